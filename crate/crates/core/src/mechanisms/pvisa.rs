//! Second-price auctions in both submarkets, brand bidding alongside.

use super::{argmax_by, settle, Mechanism, MarketContext, PhysicalAward, PhysicalBid, VirtualBid};
use crate::error::Result;
use crate::market_model::{MarketScenario, MechanismOutcome};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pvisa {
    /// Brand contract bid used under truthful play.
    pub brand_bid: f64,
}

impl Pvisa {
    pub fn new(brand_bid: f64) -> Self {
        Self { brand_bid }
    }

    fn eligible_bids(ctx: &MarketContext, bids: &[PhysicalBid]) -> Vec<PhysicalBid> {
        let mut v: Vec<PhysicalBid> = bids
            .iter()
            .filter(|b| b.av_id < ctx.scenario.avs.len())
            .filter(|b| ctx.dt_fits(b.av_id, ctx.effective_deadline(b.av_id, None)))
            .copied()
            .collect();
        v.sort_by_key(|b| b.av_id);
        v
    }
}

/// Highest price wins (lowest id on ties); returns winner position, tie
/// flag and the best competing price (0 when alone).
pub(crate) fn second_price<T>(items: &[T], price: impl Fn(&T) -> f64) -> Option<(usize, bool, f64)> {
    let (w, tie) = argmax_by(items, &price)?;
    let second = items
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != w)
        .map(|(_, it)| price(it))
        .fold(0.0, f64::max);
    Some((w, tie, second))
}

impl Mechanism for Pvisa {
    fn label(&self) -> String {
        "pvisa".into()
    }

    fn brand_bid(&self) -> f64 {
        self.brand_bid
    }

    fn physical_stage(&self, ctx: &MarketContext, bids: &[PhysicalBid]) -> Result<Option<PhysicalAward>> {
        let bids = Self::eligible_bids(ctx, bids);
        Ok(second_price(&bids, |b| b.price).map(|(w, tie, second)| {
            let av = bids[w].av_id;
            PhysicalAward { av, payment: second, deadline_s: ctx.effective_deadline(av, None), tie }
        }))
    }

    fn virtual_stage(&self, ctx: &MarketContext, award: &PhysicalAward, bids: &[VirtualBid]) -> Result<MechanismOutcome> {
        let mut bids: Vec<VirtualBid> =
            bids.iter().filter(|b| b.mbp_id < ctx.scenario.mbps.len()).copied().collect();
        bids.sort_by_key(|b| b.mbp_id);
        Ok(match second_price(&bids, |b| b.price) {
            Some((w, tie, second)) => settle(ctx, award, Some(bids[w].mbp_id), second, tie),
            None => settle(ctx, award, None, 0.0, false),
        })
    }

    fn critical_physical_price(&self, ctx: &MarketContext, bids: &[PhysicalBid], bidder: usize) -> Option<f64> {
        let bids = Self::eligible_bids(ctx, bids);
        Some(bids.iter().filter(|b| b.av_id != bidder).map(|b| b.price).fold(0.0, f64::max))
    }
}

/// PViSA on explicit bids; `virtual_bids` are the MBPs' bids for the winning AV.
pub fn run_pvisa(
    scenario: &MarketScenario,
    physical_bids: &[PhysicalBid],
    virtual_bids: &[VirtualBid],
) -> Result<MechanismOutcome> {
    let ctx = MarketContext::new(scenario)?;
    let brand = virtual_bids.iter().find(|b| b.mbp_id == 0).map_or(0.0, |b| b.price);
    Pvisa::new(brand).run(&ctx, physical_bids, &|_| virtual_bids.to_vec())
}
