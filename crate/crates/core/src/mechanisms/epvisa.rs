//! Score-based physical auction and threshold virtual auction with the brand
//! as residual claimant.

use super::pvisa::second_price;
use super::{
    argmax_by, settle, AlphaFactor, Mechanism, MarketContext, PhysicalAward, PhysicalBid, ScoreSign,
    ScoringRule, VirtualBid,
};
use crate::error::Result;
use crate::market_model::{MarketScenario, MechanismOutcome};

#[derive(Debug, Clone)]
pub struct Epvisa {
    pub rule: ScoringRule,
    pub alpha: AlphaFactor,
    pub sign: ScoreSign,
    /// Brand contract price per second of display.
    pub brand_bid: f64,
}

struct Scored {
    av: usize,
    price: f64,
    deadline: f64,
    slope: f64,
    offset: f64,
}

impl Scored {
    fn score(&self) -> f64 {
        self.slope * self.price + self.offset
    }
}

impl Epvisa {
    pub fn new(rule: ScoringRule, alpha: AlphaFactor, brand_bid: f64) -> Self {
        Self { rule, alpha, sign: ScoreSign::Plus, brand_bid }
    }

    fn scored(&self, ctx: &MarketContext, bids: &[PhysicalBid]) -> Result<Vec<Scored>> {
        let mut out = Vec::with_capacity(bids.len());
        for b in bids {
            if b.av_id >= ctx.scenario.avs.len() {
                continue;
            }
            let deadline = ctx.effective_deadline(b.av_id, b.deadline_s);
            if !(deadline > 0.0) || !ctx.dt_fits(b.av_id, deadline) {
                continue;
            }
            let (slope, offset) = self.rule.terms(ctx, b.av_id, deadline, self.sign)?;
            out.push(Scored { av: b.av_id, price: b.price, deadline, slope, offset });
        }
        out.sort_by_key(|s| s.av);
        Ok(out)
    }

    /// Price at which `who` ties the best rival score, floored at 0.
    fn critical(scored: &[Scored], who: usize) -> f64 {
        let rival = scored
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != who)
            .map(|(_, s)| s.score())
            .fold(f64::NEG_INFINITY, f64::max);
        if rival == f64::NEG_INFINITY {
            return 0.0;
        }
        let me = &scored[who];
        ((rival - me.offset) / me.slope).max(0.0)
    }
}

/// Virtual threshold rule: returns the winning MBP, its price per second and
/// whether the top performance bid was tied.
pub(crate) fn threshold_allocation(bids: &[VirtualBid], alpha: f64) -> (Option<usize>, f64, bool) {
    let mut perf: Vec<VirtualBid> = bids.iter().filter(|b| b.mbp_id != 0).copied().collect();
    perf.sort_by_key(|b| b.mbp_id);
    let brand_price = bids.iter().find(|b| b.mbp_id == 0).map_or(0.0, |b| b.price);
    match second_price(&perf, |b| b.price) {
        Some((w, tie, second)) if perf[w].price > alpha * second => (Some(perf[w].mbp_id), alpha * second, tie),
        Some((_, tie, _)) => (Some(0), brand_price, tie),
        None => (Some(0), brand_price, false),
    }
}

impl Mechanism for Epvisa {
    fn label(&self) -> String {
        "epvisa".into()
    }

    fn brand_bid(&self) -> f64 {
        self.brand_bid
    }

    fn uses_deadlines(&self) -> bool {
        true
    }

    fn physical_stage(&self, ctx: &MarketContext, bids: &[PhysicalBid]) -> Result<Option<PhysicalAward>> {
        let scored = self.scored(ctx, bids)?;
        Ok(argmax_by(&scored, Scored::score).map(|(w, tie)| {
            let payment = Self::critical(&scored, w).min(scored[w].price);
            PhysicalAward { av: scored[w].av, payment, deadline_s: scored[w].deadline, tie }
        }))
    }

    fn virtual_stage(&self, ctx: &MarketContext, award: &PhysicalAward, bids: &[VirtualBid]) -> Result<MechanismOutcome> {
        let bids: Vec<VirtualBid> = bids.iter().filter(|b| b.mbp_id < ctx.scenario.mbps.len()).copied().collect();
        let (mbp, price, tie) = threshold_allocation(&bids, self.alpha.get());
        Ok(settle(ctx, award, mbp, price, tie))
    }

    fn critical_physical_price(&self, ctx: &MarketContext, bids: &[PhysicalBid], bidder: usize) -> Option<f64> {
        let scored = self.scored(ctx, bids).ok()?;
        let who = scored.iter().position(|s| s.av == bidder)?;
        Some(Self::critical(&scored, who))
    }
}

/// EPViSA on explicit bids; `virtual_bids` are the MBPs' bids for the winning AV.
pub fn run_epvisa(
    scenario: &MarketScenario,
    physical_bids: &[PhysicalBid],
    virtual_bids: &[VirtualBid],
    rule: ScoringRule,
    alpha: AlphaFactor,
) -> Result<MechanismOutcome> {
    let ctx = MarketContext::new(scenario)?;
    let brand = virtual_bids.iter().find(|b| b.mbp_id == 0).map_or(0.0, |b| b.price);
    Epvisa::new(rule, alpha, brand).run(&ctx, physical_bids, &|_| virtual_bids.to_vec())
}
