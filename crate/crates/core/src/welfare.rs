//! Surplus accounting, welfare ratios and the exhaustive small-instance optimum.

use serde::{Deserialize, Serialize};

use crate::channel_delay::{is_feasible, DelayTable};
use crate::error::{Error, Result};
use crate::market_model::{MarketScenario, MechanismOutcome};

/// Largest `I * (K + 1)` the enumeration accepts.
pub const MAX_ENUMERATION: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WelfareReport {
    pub w_dt: f64,
    /// Brand ad value rate (per second of display).
    pub w_brand: f64,
    /// Performance ad value rate (per second of display).
    pub w_perf: f64,
    pub display_s: f64,
    pub total: f64,
    pub ratio_vs_benchmark: Option<f64>,
}

impl WelfareReport {
    fn compose(s: &MarketScenario, w_dt: f64, w_brand: f64, w_perf: f64, display_s: f64) -> Self {
        Self {
            w_dt,
            w_brand,
            w_perf,
            display_s,
            total: w_dt + display_s * (s.gamma * w_brand + w_perf),
            ratio_vs_benchmark: None,
        }
    }
}

/// Who is served in a candidate allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub av: Option<usize>,
    pub mbp: Option<usize>,
}

/// Re-derives the welfare of `outcome` from the scenario's raw fields.
pub fn score_outcome(s: &MarketScenario, outcome: &MechanismOutcome) -> Result<WelfareReport> {
    let Some(av) = outcome.winner_av else {
        if outcome.winner_mbp.is_some() {
            return Err(Error::InfeasibleOutcome("ad slot allocated without a synchronizing AV".into()));
        }
        return Ok(WelfareReport::default());
    };
    if av >= s.avs.len() {
        return Err(Error::InfeasibleOutcome(format!("AV {av} does not exist")));
    }
    let d = DelayTable::new(s)?;
    let bound = d.bound_s[av];
    if !is_feasible(d.dt_s[av], bound) {
        return Err(Error::InfeasibleOutcome(format!("AV {av} cannot meet its deadline")));
    }
    let nu = s.avs[av].valuation;
    match outcome.winner_mbp {
        None => Ok(WelfareReport::compose(s, nu, 0.0, 0.0, 0.0)),
        Some(k) if k >= s.mbps.len() => Err(Error::InfeasibleOutcome(format!("MBP {k} does not exist"))),
        Some(k) => {
            let t = d.pair_delay(av, k, s.matches.get(av, k));
            if !is_feasible(t, bound) {
                return Err(Error::InfeasibleOutcome(format!(
                    "pair ({av},{k}) needs {t} s against a {bound} s deadline"
                )));
            }
            let (b, p) = if k == 0 { (s.brand_value(av), 0.0) } else { (0.0, s.perf_value(av, k)) };
            Ok(WelfareReport::compose(s, nu, b, p, t))
        }
    }
}

/// Welfare-maximal allocation by enumerating every feasible pair.
pub fn brute_force_benchmark(s: &MarketScenario) -> Result<(WelfareReport, Allocation)> {
    let pairs = s.avs.len() * s.mbps.len();
    if pairs > MAX_ENUMERATION {
        return Err(Error::InstanceTooLarge(pairs));
    }
    let d = DelayTable::new(s)?;
    let mut best = (WelfareReport::default(), Allocation { av: None, mbp: None });
    for i in 0..s.avs.len() {
        if !is_feasible(d.dt_s[i], d.bound_s[i]) {
            continue;
        }
        let nu = s.avs[i].valuation;
        let dt_only = WelfareReport::compose(s, nu, 0.0, 0.0, 0.0);
        if dt_only.total > best.0.total {
            best = (dt_only, Allocation { av: Some(i), mbp: None });
        }
        for k in 0..s.mbps.len() {
            let t = d.pair_delay(i, k, s.matches.get(i, k));
            if !is_feasible(t, d.bound_s[i]) {
                continue;
            }
            let (b, p) = if k == 0 { (s.brand_value(i), 0.0) } else { (0.0, s.perf_value(i, k)) };
            let r = WelfareReport::compose(s, nu, b, p, t);
            if r.total > best.0.total {
                best = (r, Allocation { av: Some(i), mbp: Some(k) });
            }
        }
    }
    Ok(best)
}

pub fn welfare_ratio(mech: &WelfareReport, benchmark: &WelfareReport) -> Result<f64> {
    if benchmark.total == 0.0 {
        return Err(Error::ZeroBenchmark);
    }
    Ok(mech.total / benchmark.total)
}

/// Benchmark welfare with both virtual terms summed instead of maximized,
/// for AV `av` and display duration `duration_s`.
pub fn summed_virtual_diagnostic(s: &MarketScenario, av: usize, duration_s: f64) -> f64 {
    let top = s.matches.h[av][1..].iter().copied().fold(0.0, f64::max);
    s.avs[av].valuation * (1.0 + duration_s * (s.gamma * s.expected_brand_match + top))
}

/// Welfare report for an outcome produced by this crate's mechanisms.
pub fn report_of(outcome: &MechanismOutcome) -> WelfareReport {
    WelfareReport {
        w_dt: outcome.surplus_dt,
        w_brand: outcome.surplus_brand,
        w_perf: outcome.surplus_perf,
        display_s: outcome.display_duration_s,
        total: outcome.total_welfare,
        ratio_vs_benchmark: None,
    }
}
