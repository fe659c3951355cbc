//! Omniscient benchmark, PViSA and EPViSA, plus bidder strategy helpers.

use std::cell::RefCell;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::channel_delay::DelayTable;
use crate::error::{Error, Result};
use crate::market_model::{MarketScenario, MbpKind, MechanismOutcome};

mod epvisa;
mod omniscient;
mod pvisa;
mod scoring;
mod strategy;

pub use epvisa::{run_epvisa, Epvisa};
pub use omniscient::{omniscient_given_av, run_omniscient, Omniscient};
pub use pvisa::{run_pvisa, Pvisa};
pub use scoring::{ScoreSign, ScoringRule, SurplusEstimate};
pub use strategy::{efficient_score, optimal_brand_bid, optimal_deadline, select_alpha, AlphaFactor};

/// Stand-in for an unbounded bid or price factor.
pub const EFFECTIVELY_INFINITE: f64 = 1.0e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalBid {
    pub av_id: usize,
    pub price: f64,
    /// Reported deadline; `None` for price-only bids.
    pub deadline_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualBid {
    pub mbp_id: usize,
    /// Currency per second of display.
    pub price: f64,
}

/// Result of the physical stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalAward {
    pub av: usize,
    pub payment: f64,
    /// Deadline the display must respect.
    pub deadline_s: f64,
    pub tie: bool,
}

/// A scenario with its delay table and a per-bidder score cache.
#[derive(Debug, Clone)]
pub struct MarketContext {
    pub scenario: MarketScenario,
    pub delays: DelayTable,
    externality: RefCell<HashMap<(usize, u64), f64>>,
}

impl MarketContext {
    pub fn new(scenario: &MarketScenario) -> Result<Self> {
        Ok(Self {
            delays: DelayTable::new(scenario)?,
            scenario: scenario.clone(),
            externality: RefCell::new(HashMap::new()),
        })
    }

    pub(crate) fn cached_externality(&self, av: usize, deadline: f64, f: impl FnOnce() -> f64) -> f64 {
        let key = (av, deadline.to_bits());
        if let Some(&v) = self.externality.borrow().get(&key) {
            return v;
        }
        let v = f();
        self.externality.borrow_mut().insert(key, v);
        v
    }

    /// Deadline an AV's display must meet given its report.
    pub fn effective_deadline(&self, av: usize, reported: Option<f64>) -> f64 {
        let own = self.scenario.avs[av].dt_task.deadline_s;
        reported.map_or(own, |r| r.min(own))
    }

    /// Whether the DT task alone fits within `deadline` (and the threshold).
    pub fn dt_fits(&self, av: usize, deadline: f64) -> bool {
        let cap = self.delays.bound_s[av].min(deadline);
        self.delays.dt_s[av] <= cap
    }

    /// Adds `n` AVs cloned from `source` (ids appended after the last AV).
    pub fn with_shill_avs(&self, source: usize, n: usize) -> Self {
        let mut out = self.clone();
        for _ in 0..n {
            let id = out.scenario.avs.len();
            let mut av = out.scenario.avs[source].clone();
            av.id = id;
            out.scenario.avs.push(av);
            let row = out.scenario.matches.h[source].clone();
            out.scenario.matches.h.push(row);
            out.delays.dt_s.push(out.delays.dt_s[source]);
            out.delays.ar_layer_s.push(out.delays.ar_layer_s[source].clone());
            out.delays.bound_s.push(out.delays.bound_s[source]);
            let copied: Vec<_> = out
                .externality
                .borrow()
                .iter()
                .filter(|((a, _), _)| *a == source)
                .map(|(&(_, d), &v)| ((id, d), v))
                .collect();
            out.externality.borrow_mut().extend(copied);
        }
        out
    }

    /// Adds `n` performance MBPs cloned from `source`.
    pub fn with_shill_mbps(&self, source: usize, n: usize) -> Self {
        let mut out = self.clone();
        for _ in 0..n {
            let id = out.scenario.mbps.len();
            let mut m = out.scenario.mbps[source].clone();
            m.id = id;
            m.kind = MbpKind::Performance;
            out.scenario.mbps.push(m);
            for row in &mut out.scenario.matches.h {
                row.push(row[source]);
            }
            for row in &mut out.delays.ar_layer_s {
                row.push(row[source]);
            }
        }
        out
    }

    /// Same market with AV `av`'s valuation multiplied by `c`.
    pub fn with_scaled_valuation(&self, av: usize, c: f64) -> Self {
        let mut out = self.clone();
        out.scenario.avs[av].valuation *= c;
        out
    }
}

/// A two-stage synchronization mechanism.
pub trait Mechanism: Send + Sync {
    fn label(&self) -> String;

    /// Contract bid the brand submits in the virtual stage.
    fn brand_bid(&self) -> f64 {
        0.0
    }

    /// Whether physical bids carry a deadline.
    fn uses_deadlines(&self) -> bool {
        false
    }

    /// Picks the synchronizing AV; `None` when no bidder can be served.
    fn physical_stage(&self, ctx: &MarketContext, bids: &[PhysicalBid]) -> Result<Option<PhysicalAward>>;

    /// Allocates the ad slot for a given synchronizing AV.
    fn virtual_stage(&self, ctx: &MarketContext, award: &PhysicalAward, bids: &[VirtualBid]) -> Result<MechanismOutcome>;

    /// Lowest price at which `bidder` would still win, if the mechanism has one.
    fn critical_physical_price(&self, _ctx: &MarketContext, _bids: &[PhysicalBid], _bidder: usize) -> Option<f64> {
        None
    }

    fn run(
        &self,
        ctx: &MarketContext,
        physical: &[PhysicalBid],
        virtual_bids: &dyn Fn(usize) -> Vec<VirtualBid>,
    ) -> Result<MechanismOutcome> {
        if physical.is_empty() {
            return Err(Error::EmptyMarket);
        }
        match self.physical_stage(ctx, physical)? {
            None => Ok(MechanismOutcome::empty()),
            Some(award) => {
                let bids = virtual_bids(award.av);
                if bids.is_empty() {
                    return Err(Error::EmptyMarket);
                }
                self.virtual_stage(ctx, &award, &bids)
            }
        }
    }

    /// Run under truthful bidding.
    fn run_truthful(&self, ctx: &MarketContext) -> Result<MechanismOutcome> {
        let phys = truthful_physical_bids(&ctx.scenario, self.uses_deadlines());
        let brand = self.brand_bid();
        self.run(ctx, &phys, &|av| truthful_virtual_bids(&ctx.scenario, av, brand))
    }
}

/// Every AV bids its valuation (and its own deadline when asked).
pub fn truthful_physical_bids(s: &MarketScenario, with_deadlines: bool) -> Vec<PhysicalBid> {
    s.avs
        .iter()
        .map(|a| PhysicalBid {
            av_id: a.id,
            price: a.valuation,
            deadline_s: with_deadlines.then_some(a.dt_task.deadline_s),
        })
        .collect()
}

/// Brand contract bid plus every performance MBP bidding its ad value rate for `av`.
pub fn truthful_virtual_bids(s: &MarketScenario, av: usize, brand_bid: f64) -> Vec<VirtualBid> {
    let mut out = vec![VirtualBid { mbp_id: 0, price: brand_bid }];
    out.extend((1..s.mbps.len()).map(|k| VirtualBid { mbp_id: k, price: s.perf_value(av, k) }));
    out
}

/// Builds the outcome for a synchronizing AV and a chosen MBP charged
/// `price_per_s` per second of display, voiding the ad slot when the pair
/// misses the deadline.
pub fn settle(
    ctx: &MarketContext,
    award: &PhysicalAward,
    mbp: Option<usize>,
    price_per_s: f64,
    tie: bool,
) -> MechanismOutcome {
    let s = &ctx.scenario;
    let av = award.av;
    let mut out = MechanismOutcome {
        winner_av: Some(av),
        payment_dt: award.payment,
        surplus_dt: s.avs[av].valuation,
        tie: tie || award.tie,
        ..MechanismOutcome::default()
    };
    if let Some(k) = mbp {
        if let Some(t) = ctx.delays.feasible_pair(s, av, k, award.deadline_s) {
            out.winner_mbp = Some(k);
            out.display_duration_s = t;
            out.payment_ar = (t * price_per_s).max(0.0);
            if k == 0 {
                out.surplus_brand = s.brand_value(av);
            } else {
                out.surplus_perf = s.perf_value(av, k);
            }
        }
    }
    out.total_welfare =
        out.surplus_dt + out.display_duration_s * (s.gamma * out.surplus_brand + out.surplus_perf);
    out
}

/// Index of the maximum by `key` (lowest index on ties) and whether it tied.
pub(crate) fn argmax_by<T>(items: &[T], key: impl Fn(&T) -> f64) -> Option<(usize, bool)> {
    let mut best: Option<(usize, f64)> = None;
    let mut tie = false;
    for (i, it) in items.iter().enumerate() {
        let v = key(it);
        match best {
            None => best = Some((i, v)),
            Some((_, b)) if v > b => {
                best = Some((i, v));
                tie = false;
            }
            Some((_, b)) if v == b => tie = true,
            _ => {}
        }
    }
    best.map(|(i, _)| (i, tie))
}
