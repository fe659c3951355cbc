//! Benchmark with full knowledge of valuations and realized match qualities.

use super::{settle, Mechanism, MarketContext, PhysicalAward, PhysicalBid, VirtualBid};
use crate::error::{Error, Result};
use crate::market_model::{MarketScenario, MechanismOutcome};

/// Best virtual choice for `av`: the brand (valued at its expected match)
/// or a top-match performance MBP, whichever yields more display surplus.
/// Returns the MBP and its duration-weighted surplus.
pub(crate) fn virtual_choice(ctx: &MarketContext, av: usize, deadline: f64) -> (Option<usize>, f64) {
    let s = &ctx.scenario;
    let brand = ctx
        .delays
        .feasible_pair(s, av, 0, deadline)
        .map(|t| t * s.gamma * s.brand_value(av));

    let k = s.num_perf();
    let mut perf: Option<(usize, f64)> = None;
    if k >= 1 {
        let row = &s.matches.h[av];
        let top = row[1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (j, &h) in row.iter().enumerate().skip(1) {
            if h != top {
                continue;
            }
            if let Some(t) = ctx.delays.feasible_pair(s, av, j, deadline) {
                let v = t * s.perf_value(av, j);
                if perf.is_none_or(|(_, b)| v > b) {
                    perf = Some((j, v));
                }
            }
        }
    }

    match (brand, perf) {
        (Some(b), Some((j, p))) if p > b => (Some(j), p),
        (Some(b), _) => (Some(0), b),
        (None, Some((j, p))) => (Some(j), p),
        (None, None) => (None, 0.0),
    }
}

/// Omniscient outcome for a fixed synchronizing AV.
pub fn omniscient_given_av(ctx: &MarketContext, av: usize) -> MechanismOutcome {
    let deadline = ctx.scenario.avs[av].dt_task.deadline_s;
    let (mbp, _) = virtual_choice(ctx, av, deadline);
    let award = PhysicalAward { av, payment: 0.0, deadline_s: deadline, tie: false };
    settle(ctx, &award, mbp, 0.0, false)
}

/// Omniscient benchmark: picks the AV maximizing DT value plus its best
/// display surplus. Payments are zero.
pub fn run_omniscient(scenario: &MarketScenario) -> Result<MechanismOutcome> {
    let ctx = MarketContext::new(scenario)?;
    Omniscient.run_truthful(&ctx).and_then(|o| o.winner_av.map(|_| o).ok_or(Error::NoFeasiblePair))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Omniscient;

impl Omniscient {
    fn best_av(ctx: &MarketContext) -> Option<(usize, bool)> {
        let s = &ctx.scenario;
        let mut best: Option<(usize, f64)> = None;
        let mut tie = false;
        for i in 0..s.avs.len() {
            if !ctx.delays.eligible(i) {
                continue;
            }
            let (_, v) = virtual_choice(ctx, i, s.avs[i].dt_task.deadline_s);
            let w = s.avs[i].valuation + v;
            match best {
                Some((_, b)) if w < b => {}
                Some((_, b)) if w == b => tie = true,
                _ => {
                    best = Some((i, w));
                    tie = false;
                }
            }
        }
        best.map(|(i, _)| (i, tie))
    }
}

impl Mechanism for Omniscient {
    fn label(&self) -> String {
        "omniscient".into()
    }

    fn physical_stage(&self, ctx: &MarketContext, _bids: &[PhysicalBid]) -> Result<Option<PhysicalAward>> {
        Ok(Self::best_av(ctx).map(|(av, tie)| PhysicalAward {
            av,
            payment: 0.0,
            deadline_s: ctx.scenario.avs[av].dt_task.deadline_s,
            tie,
        }))
    }

    fn virtual_stage(&self, ctx: &MarketContext, award: &PhysicalAward, _bids: &[VirtualBid]) -> Result<MechanismOutcome> {
        let (mbp, _) = virtual_choice(ctx, award.av, award.deadline_s);
        Ok(settle(ctx, award, mbp, 0.0, award.tie))
    }
}
