//! Deviation, shill-bid and scaling checks of the mechanisms' incentive
//! properties, Monte Carlo welfare-ratio bounds, and analytic cross-checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::calibration::{calibrate, CalibrationSettings, MechanismKind};
use crate::error::{Error, Result};
use crate::market_model::{MarketScenario, MechanismOutcome};
use crate::mechanisms::{
    omniscient_given_av, run_omniscient, truthful_physical_bids, truthful_virtual_bids, MarketContext, Mechanism,
    PhysicalAward, PhysicalBid, VirtualBid,
};
use crate::scenario_gen::{sample_scenario, Dist, GeneratorConfig};
use crate::stats::{ratio_of_means, Summary};

/// Multipliers applied to a truthful bid.
pub const DEFAULT_GRID: [f64; 6] = [0.0, 0.5, 0.9, 1.1, 2.0, 10.0];
/// Shill counts for the false-name checks.
pub const DEFAULT_SHILLS: [usize; 3] = [1, 2, 3];
/// Scales of the common value for the adverse-selection check.
pub const DEFAULT_SCALES: [f64; 3] = [0.1, 1.0, 10.0];
/// Utility gain that counts as a violation.
pub const UTILITY_TOLERANCE: f64 = 1e-9;
/// Relative tolerance for payment homogeneity.
pub const SCALING_TOLERANCE: f64 = 1e-12;

const DEADLINE_SHADES: [f64; 2] = [0.5, 0.9];
const SHILL_FRACTIONS: [f64; 4] = [1.0, 0.75, 0.5, 0.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Property {
    StrategyProof,
    WinnerFalseName,
    LoserFalseName,
    AdverseSelectionFree,
    Bound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Physical,
    Virtual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyViolation {
    pub property: Property,
    pub scenario_seed: u64,
    pub side: Side,
    pub deviator: usize,
    pub truthful_utility: f64,
    pub deviant_utility: f64,
    pub detail: String,
}

fn eps_around(x: f64) -> [f64; 2] {
    let e = 1e-7 * x.abs().max(1.0);
    [(x - e).max(0.0), x + e]
}

fn physical_utility(o: &MechanismOutcome, ids: &[usize], value: f64) -> f64 {
    match o.winner_av {
        Some(w) if ids.contains(&w) => value - o.payment_dt,
        _ => 0.0,
    }
}

fn virtual_utility(o: &MechanismOutcome, ids: &[usize], rate: f64) -> f64 {
    match o.winner_mbp {
        Some(w) if ids.contains(&w) => o.display_duration_s * rate - o.payment_ar,
        _ => 0.0,
    }
}

/// Truthful bids plus the award they produce, or `None` for an empty market.
struct Baseline {
    phys: Vec<PhysicalBid>,
    outcome: MechanismOutcome,
    award: Option<PhysicalAward>,
    brand_bid: f64,
}

impl Baseline {
    fn new(mech: &dyn Mechanism, ctx: &MarketContext) -> Result<Self> {
        let phys = truthful_physical_bids(&ctx.scenario, mech.uses_deadlines());
        let brand_bid = mech.brand_bid();
        let outcome = mech.run(ctx, &phys, &|av| truthful_virtual_bids(&ctx.scenario, av, brand_bid))?;
        let award = mech.physical_stage(ctx, &phys)?;
        Ok(Self { phys, outcome, award, brand_bid })
    }

    fn virtual_bids(&self, ctx: &MarketContext, av: usize) -> Vec<VirtualBid> {
        truthful_virtual_bids(&ctx.scenario, av, self.brand_bid)
    }
}

fn top_other_prices(prices: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = prices.collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v.truncate(2);
    v
}

/// Single-bid deviations by every AV and performance MBP.
pub fn check_strategy_proofness(
    mech: &dyn Mechanism,
    scenario: &MarketScenario,
    deviation_grid: &[f64],
    scenario_seed: u64,
) -> Result<Vec<PropertyViolation>> {
    let ctx = MarketContext::new(scenario)?;
    let base = Baseline::new(mech, &ctx)?;
    let s = &ctx.scenario;
    let mut out = Vec::new();
    let vfn = |av: usize| base.virtual_bids(&ctx, av);

    for i in 0..s.avs.len() {
        let value = s.avs[i].valuation;
        let u0 = physical_utility(&base.outcome, &[i], value);
        let mut prices: Vec<f64> = deviation_grid.iter().map(|m| m * value).collect();
        if let Some(c) = mech.critical_physical_price(&ctx, &base.phys, i) {
            prices.extend(eps_around(c));
        }
        for p in top_other_prices(base.phys.iter().filter(|b| b.av_id != i).map(|b| b.price)) {
            prices.extend(eps_around(p));
        }
        let mut deviations: Vec<(PhysicalBid, String)> = prices
            .into_iter()
            .map(|p| (PhysicalBid { price: p, ..base.phys[i] }, format!("price {p}")))
            .collect();
        if let Some(d) = base.phys[i].deadline_s {
            for f in DEADLINE_SHADES {
                deviations.push((PhysicalBid { deadline_s: Some(f * d), ..base.phys[i] }, format!("deadline {}", f * d)));
            }
        }
        for (bid, what) in deviations {
            let mut bids = base.phys.clone();
            bids[i] = bid;
            let o = mech.run(&ctx, &bids, &vfn)?;
            let u = physical_utility(&o, &[i], value);
            if u > u0 + UTILITY_TOLERANCE {
                out.push(PropertyViolation {
                    property: Property::StrategyProof,
                    scenario_seed,
                    side: Side::Physical,
                    deviator: i,
                    truthful_utility: u0,
                    deviant_utility: u,
                    detail: format!("AV {i} bidding {what} instead of truthfully"),
                });
            }
        }
    }

    if let Some(award) = base.award {
        let av = award.av;
        let truthful = base.virtual_bids(&ctx, av);
        let o0 = mech.virtual_stage(&ctx, &award, &truthful)?;
        for k in 1..s.mbps.len() {
            let rate = s.perf_value(av, k);
            let u0 = virtual_utility(&o0, &[k], rate);
            let mut prices: Vec<f64> = deviation_grid.iter().map(|m| m * rate).collect();
            for p in top_other_prices(truthful.iter().filter(|b| b.mbp_id != k).map(|b| b.price)) {
                prices.extend(eps_around(p));
            }
            if let Some(c) = critical_virtual_price(mech, &ctx, &award, &truthful, k)? {
                prices.extend(eps_around(c));
            }
            for p in prices {
                let mut bids = truthful.clone();
                bids[k].price = p;
                let o = mech.virtual_stage(&ctx, &award, &bids)?;
                let u = virtual_utility(&o, &[k], rate);
                if u > u0 + UTILITY_TOLERANCE {
                    out.push(PropertyViolation {
                        property: Property::StrategyProof,
                        scenario_seed,
                        side: Side::Virtual,
                        deviator: k,
                        truthful_utility: u0,
                        deviant_utility: u,
                        detail: format!("MBP {k} bidding {p} instead of {rate} for AV {av}"),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Bisects the price at which MBP `k` starts winning, holding others fixed.
fn critical_virtual_price(
    mech: &dyn Mechanism,
    ctx: &MarketContext,
    award: &PhysicalAward,
    bids: &[VirtualBid],
    k: usize,
) -> Result<Option<f64>> {
    let wins = |p: f64| -> Result<bool> {
        let mut b = bids.to_vec();
        b[k].price = p;
        Ok(mech.virtual_stage(ctx, award, &b)?.winner_mbp == Some(k))
    };
    let hi0 = bids.iter().map(|b| b.price).fold(0.0, f64::max).max(1.0) * 1e4;
    if !wins(hi0)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, hi0);
    if wins(lo)? {
        return Ok(Some(0.0));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if wins(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Shill bids by winners (combined utility must not rise) and by losers
/// (the winner's utility must not fall), on both submarkets.
pub fn check_false_name_proofness(
    mech: &dyn Mechanism,
    scenario: &MarketScenario,
    shill_counts: &[usize],
    scenario_seed: u64,
) -> Result<Vec<PropertyViolation>> {
    let ctx = MarketContext::new(scenario)?;
    let base = Baseline::new(mech, &ctx)?;
    let s = &ctx.scenario;
    let mut out = Vec::new();
    let Some(award) = base.award else { return Ok(out) };
    let winner = award.av;
    let winner_value = s.avs[winner].valuation;
    let u_winner = physical_utility(&base.outcome, &[winner], winner_value);

    for &n in shill_counts {
        for src in 0..s.avs.len() {
            let shilled = ctx.with_shill_avs(src, n);
            let ids: Vec<usize> = std::iter::once(src).chain(s.avs.len()..s.avs.len() + n).collect();
            let fractions: &[f64] = if src == winner { &SHILL_FRACTIONS } else { &SHILL_FRACTIONS[..3] };
            for &f in fractions {
                let mut bids = base.phys.clone();
                for &id in &ids[1..] {
                    bids.push(PhysicalBid { av_id: id, price: f * base.phys[src].price, ..base.phys[src] });
                }
                let vfn = |av: usize| truthful_virtual_bids(&shilled.scenario, av, base.brand_bid);
                let o = mech.run(&shilled, &bids, &vfn)?;
                if src == winner {
                    let u = physical_utility(&o, &ids, winner_value);
                    if u > u_winner + UTILITY_TOLERANCE {
                        out.push(PropertyViolation {
                            property: Property::WinnerFalseName,
                            scenario_seed,
                            side: Side::Physical,
                            deviator: src,
                            truthful_utility: u_winner,
                            deviant_utility: u,
                            detail: format!("winning AV {src} adding {n} shills at {f} of its bid"),
                        });
                    }
                } else {
                    let u = physical_utility(&o, &[winner], winner_value);
                    if u < u_winner - UTILITY_TOLERANCE {
                        out.push(PropertyViolation {
                            property: Property::LoserFalseName,
                            scenario_seed,
                            side: Side::Physical,
                            deviator: src,
                            truthful_utility: u_winner,
                            deviant_utility: u,
                            detail: format!("losing AV {src} adding {n} shills at {f} of its bid lowers AV {winner}'s utility"),
                        });
                    }
                }
            }
        }
    }

    let truthful = base.virtual_bids(&ctx, winner);
    let o0 = mech.virtual_stage(&ctx, &award, &truthful)?;
    let utility_of = |o: &MechanismOutcome, k: usize, ids: &[usize]| {
        let rate = if k == 0 { s.brand_value(winner) } else { s.perf_value(winner, k) };
        virtual_utility(o, ids, rate)
    };
    let vwin = o0.winner_mbp;
    let u_vwin = vwin.map(|k| utility_of(&o0, k, &[k]));
    for &n in shill_counts {
        for src in 1..s.mbps.len() {
            let shilled = ctx.with_shill_mbps(src, n);
            let ids: Vec<usize> = std::iter::once(src).chain(s.mbps.len()..s.mbps.len() + n).collect();
            let own = truthful[src].price;
            for &f in &SHILL_FRACTIONS {
                let mut bids = truthful.clone();
                for &id in &ids[1..] {
                    bids.push(VirtualBid { mbp_id: id, price: f * own });
                }
                let o = mech.virtual_stage(&shilled, &award, &bids)?;
                let u0 = utility_of(&o0, src, &[src]);
                let u = utility_of(&o, src, &ids);
                if u > u0 + UTILITY_TOLERANCE {
                    out.push(PropertyViolation {
                        property: Property::WinnerFalseName,
                        scenario_seed,
                        side: Side::Virtual,
                        deviator: src,
                        truthful_utility: u0,
                        deviant_utility: u,
                        detail: format!("MBP {src} adding {n} shills at {f} of its bid"),
                    });
                }
                if let (Some(w), Some(uw)) = (vwin, u_vwin) {
                    if w != src && f <= 1.0 {
                        let after = utility_of(&o, w, &[w]);
                        if after < uw - UTILITY_TOLERANCE {
                            out.push(PropertyViolation {
                                property: Property::LoserFalseName,
                                scenario_seed,
                                side: Side::Virtual,
                                deviator: src,
                                truthful_utility: uw,
                                deviant_utility: after,
                                detail: format!("losing MBP {src} adding {n} shills at {f} of its bid lowers MBP {w}'s utility"),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Scales the synchronizing AV's valuation (hence every ad value and truthful
/// performance bid) and checks that the ad-slot allocation is unchanged and
/// performance payments scale by the same factor.
pub fn check_adverse_selection_free(
    mech: &dyn Mechanism,
    scenario: &MarketScenario,
    common_value_scales: &[f64],
    scenario_seed: u64,
) -> Result<Vec<PropertyViolation>> {
    let ctx = MarketContext::new(scenario)?;
    let base = Baseline::new(mech, &ctx)?;
    let mut out = Vec::new();
    let Some(award) = base.award else { return Ok(out) };
    let av = award.av;
    let o1 = mech.virtual_stage(&ctx, &award, &base.virtual_bids(&ctx, av))?;
    for &c in common_value_scales {
        if !(c > 0.0) {
            return Err(Error::OutOfDomain(format!("scale {c} must be positive")));
        }
        let scaled = ctx.with_scaled_valuation(av, c);
        let oc = mech.virtual_stage(&scaled, &award, &base.virtual_bids(&scaled, av))?;
        let deviator = o1.winner_mbp.unwrap_or(0);
        if oc.winner_mbp != o1.winner_mbp {
            out.push(PropertyViolation {
                property: Property::AdverseSelectionFree,
                scenario_seed,
                side: Side::Virtual,
                deviator,
                truthful_utility: 0.0,
                deviant_utility: 0.0,
                detail: format!("scale {c} moves the ad slot from {:?} to {:?}", o1.winner_mbp, oc.winner_mbp),
            });
            continue;
        }
        if matches!(o1.winner_mbp, Some(k) if k > 0) {
            let expected = c * o1.payment_ar;
            let tol = SCALING_TOLERANCE * expected.abs().max(f64::MIN_POSITIVE);
            if (oc.payment_ar - expected).abs() > tol {
                out.push(PropertyViolation {
                    property: Property::AdverseSelectionFree,
                    scenario_seed,
                    side: Side::Virtual,
                    deviator,
                    truthful_utility: expected,
                    deviant_utility: oc.payment_ar,
                    detail: format!("scale {c}: payment {} instead of {expected}", oc.payment_ar),
                });
            }
        }
    }
    Ok(out)
}

/// `min Gamma(2 - 1/a)` over the grid of tail exponents.
pub fn gamma_floor(a_grid: &[f64]) -> Result<f64> {
    if a_grid.is_empty() {
        return Err(Error::OutOfDomain("empty grid".into()));
    }
    let mut best = f64::INFINITY;
    for &a in a_grid {
        if !(a > 1.0) || !a.is_finite() {
            return Err(Error::OutOfDomain(format!("tail exponent {a} must exceed 1")));
        }
        best = best.min(gamma(2.0 - 1.0 / a));
    }
    Ok(best)
}

/// Which benchmark a bound is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    /// Omniscient allocation of the ad slot for the mechanism's own synchronizing AV.
    ConditionalOmniscient,
    /// Omniscient choice of both the AV and the ad slot.
    Omniscient,
    /// The mechanism itself.
    SameMechanism,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Mean of per-trial total-welfare ratios.
    Total,
    /// Ratio of mean display-weighted performance surplus.
    Perf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub mechanism: MechanismKind,
    pub benchmark: Benchmark,
    pub metric: Metric,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub label: String,
    pub ratio_mean: f64,
    /// 99% half-width.
    pub ratio_ci: f64,
    pub bound: f64,
    pub trials: usize,
    pub pass: bool,
}

impl BoundReport {
    pub fn lower(&self) -> f64 {
        self.ratio_mean - self.ratio_ci
    }
}

/// Slack allowed below the bound at the lower confidence edge.
pub const BOUND_SLACK: f64 = 0.005;
pub const MIN_BOUND_TRIALS: usize = 1000;

/// Monte Carlo welfare ratio of a mechanism against a benchmark over `trials`
/// scenarios drawn from `config`. Passes when the 99% lower edge is at least
/// `bound - 0.005`.
pub fn check_bound(
    spec: &BoundSpec,
    config: &GeneratorConfig,
    settings: &CalibrationSettings,
    trials: usize,
) -> Result<BoundReport> {
    if trials < MIN_BOUND_TRIALS {
        return Err(Error::InsufficientTrials { min: MIN_BOUND_TRIALS, got: trials });
    }
    let calib = calibrate(config, settings)?;
    let mech = spec.mechanism.build(config, &calib, settings)?;
    let pairs: Vec<(MechanismOutcome, MechanismOutcome)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = sample_scenario(config, t)?;
            let ctx = MarketContext::new(&s)?;
            let o = mech.run_truthful(&ctx)?;
            let b = match spec.benchmark {
                Benchmark::SameMechanism => o.clone(),
                Benchmark::ConditionalOmniscient => match o.winner_av {
                    Some(av) => omniscient_given_av(&ctx, av),
                    None => MechanismOutcome::empty(),
                },
                Benchmark::Omniscient => match run_omniscient(&s) {
                    Ok(b) => b,
                    Err(Error::NoFeasiblePair) => MechanismOutcome::empty(),
                    Err(e) => return Err(e),
                },
            };
            Ok((o, b))
        })
        .collect::<Result<_>>()?;
    let summary = match spec.metric {
        Metric::Total => {
            let r: Vec<f64> = pairs
                .iter()
                .map(|(o, b)| if b.total_welfare > 0.0 { o.total_welfare / b.total_welfare } else { 1.0 })
                .collect();
            Summary::of(&r)
        }
        Metric::Perf => {
            let x: Vec<f64> = pairs.iter().map(|(o, _)| o.display_duration_s * o.surplus_perf).collect();
            let y: Vec<f64> = pairs.iter().map(|(_, b)| b.display_duration_s * b.surplus_perf).collect();
            if y.iter().all(|&v| v == 0.0) {
                return Err(Error::ZeroBenchmark);
            }
            ratio_of_means(&x, &y)
        }
    };
    Ok(BoundReport {
        label: spec.mechanism.to_string(),
        ratio_mean: summary.mean,
        ratio_ci: summary.ci,
        bound: spec.bound,
        trials,
        pass: summary.mean - summary.ci >= spec.bound - BOUND_SLACK,
    })
}

/// Analytic PViSA-to-omniscient welfare ratio on the adversarial family,
/// maximized over the brand's bid.
///
/// The synchronizing AV's valuation is Pareto(`valuation_tail`), the `k`
/// performance match qualities are i.i.d. Pareto(`a`), the display lasts one
/// second, `gamma = 1`, and the brand's expected match is `(1 + eps)` times the
/// mean top match. PViSA with brand bid `b` shows the brand when the top
/// performance bid `nu * m_(1)` is at most `b`.
pub fn adversarial_sup_ratio(a: f64, valuation_tail: f64, eps: f64, k: usize) -> Result<f64> {
    if !(a > 1.0) || !(valuation_tail > 1.0) || k < 1 {
        return Err(Error::OutOfDomain("need a > 1, valuation tail > 1 and k >= 1".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidEpsilon);
    }
    let top = TopOfPareto::new(a, k);
    let mean_top = top.mean();
    let brand = (1.0 + eps) * mean_top;
    let ap = valuation_tail;
    let mean_nu = ap / (ap - 1.0);
    let omniscient = mean_nu * (1.0 + brand + top.excess(brand));

    // E[nu * (1{nu m <= b} brand + 1{nu m > b} m)] over nu ~ Pareto(ap).
    let virtual_at = |b: f64| -> f64 {
        // nu in [1, b] by log-spaced quadrature; nu > b has m >= 1 > b/nu, so
        // the performance MBP always wins there.
        let mut acc = 0.0;
        if b > 1.0 {
            let n = 4000;
            let lb = b.ln();
            let h = lb / n as f64;
            for j in 0..=n {
                let x = j as f64 * h;
                let nu = x.exp();
                let s = b / nu;
                let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                // density in log-nu: ap * nu^-ap, times nu (the valuation factor)
                let dens = ap * (-ap * x).exp() * nu;
                acc += w * h * dens * (brand * top.cdf(s) + top.mean_above(s));
            }
        }
        let tail_mass_nu = if b > 1.0 { ap * b.powf(1.0 - ap) / (ap - 1.0) } else { mean_nu };
        acc + tail_mass_nu * mean_top
    };

    let mut best = virtual_at(0.0).max(mean_nu * brand);
    let mut lb: f64 = 0.0;
    while lb < 690.0 {
        best = best.max(virtual_at(lb.exp()));
        lb += 0.25;
    }
    Ok((mean_nu + best) / omniscient)
}

/// Law of the largest of `k` i.i.d. Pareto(a) draws.
struct TopOfPareto {
    a: f64,
    k: usize,
}

impl TopOfPareto {
    fn new(a: f64, k: usize) -> Self {
        Self { a, k }
    }

    fn cdf(&self, s: f64) -> f64 {
        if s < 1.0 {
            0.0
        } else {
            (1.0 - s.powf(-self.a)).powi(self.k as i32)
        }
    }

    fn mean(&self) -> f64 {
        crate::scenario_gen::pareto_max_mean(self.a, self.k)
    }

    /// `E[(X - t)^+]` for `t >= 1` via inclusion-exclusion on the survival function.
    fn excess(&self, t: f64) -> f64 {
        if t < 1.0 {
            return self.mean() - t;
        }
        let mut sum = 0.0;
        let mut binom = 1.0;
        for j in 1..=self.k {
            binom *= (self.k + 1 - j) as f64 / j as f64;
            let aj = self.a * j as f64;
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            sum += sign * binom * t.powf(1.0 - aj) / (aj - 1.0);
        }
        sum.max(0.0)
    }

    /// `E[X; X > s]`.
    fn mean_above(&self, s: f64) -> f64 {
        if s < 1.0 {
            self.mean()
        } else {
            s * (1.0 - self.cdf(s)) + self.excess(s)
        }
    }
}

/// Violations found by each checker over a batch of scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertySuiteReport {
    pub mechanism: String,
    pub scenarios: usize,
    pub strategy_proof: Vec<PropertyViolation>,
    pub false_name: Vec<PropertyViolation>,
    pub adverse_selection: Vec<PropertyViolation>,
}

impl PropertySuiteReport {
    pub fn pass(&self) -> bool {
        self.strategy_proof.is_empty() && self.false_name.is_empty() && self.adverse_selection.is_empty()
    }
}

fn sorted(mut v: Vec<PropertyViolation>) -> Vec<PropertyViolation> {
    v.sort_by_key(|a| (a.scenario_seed, a.side, a.deviator));
    v
}

/// Runs all three checkers with default grids on scenarios `0..scenarios` of `config`.
pub fn run_property_suite(mech: &dyn Mechanism, config: &GeneratorConfig, scenarios: usize) -> Result<PropertySuiteReport> {
    type Found = (Vec<PropertyViolation>, Vec<PropertyViolation>, Vec<PropertyViolation>);
    let per: Vec<Found> = (0..scenarios as u64)
        .into_par_iter()
        .map(|t| {
            let s = sample_scenario(config, t)?;
            Ok((
                check_strategy_proofness(mech, &s, &DEFAULT_GRID, t)?,
                check_false_name_proofness(mech, &s, &DEFAULT_SHILLS, t)?,
                check_adverse_selection_free(mech, &s, &DEFAULT_SCALES, t)?,
            ))
        })
        .collect::<Result<_>>()?;
    let mut sp = Vec::new();
    let mut fl = Vec::new();
    let mut asf = Vec::new();
    for (a, b, c) in per {
        sp.extend(a);
        fl.extend(b);
        asf.extend(c);
    }
    Ok(PropertySuiteReport {
        mechanism: mech.label(),
        scenarios,
        strategy_proof: sorted(sp),
        false_name: sorted(fl),
        adverse_selection: sorted(asf),
    })
}

/// Market where the welfare bounds for the price-factor mechanism are
/// stated: Pareto(2) match qualities for every MBP, unbounded caches and an
/// ad slot whose display time does not depend on the winning MBP.
pub fn power_law_config(base: &GeneratorConfig) -> GeneratorConfig {
    GeneratorConfig {
        match_quality: Dist::PowerLaw { a: 2.0 },
        brand_match_quality: None,
        expected_brand_match: None,
        cache_size: Dist::constant(1.0e12),
        ar_layer_size_bits: Dist::constant(0.0),
        ..base.clone()
    }
}

/// A named bound check in the standard suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedBound {
    pub name: String,
    pub reports: Vec<BoundReport>,
    /// The best of `reports` by mean ratio.
    pub best: BoundReport,
}

impl NamedBound {
    fn of(name: &str, reports: Vec<BoundReport>) -> Self {
        let best = reports
            .iter()
            .max_by(|a, b| a.ratio_mean.total_cmp(&b.ratio_mean))
            .cloned()
            .expect("at least one report");
        Self { name: name.into(), reports, best }
    }
}

/// Half bounds for the best degenerate brand bid / price factor on `base`,
/// and the total and performance-surplus bounds for the calibrated price
/// factor on the power-law market.
pub fn run_bound_suite(base: &GeneratorConfig, settings: &CalibrationSettings, trials: usize) -> Result<Vec<NamedBound>> {
    use crate::mechanisms::EFFECTIVELY_INFINITE as INF;
    let spec = |mechanism, metric, bound| BoundSpec { mechanism, benchmark: Benchmark::ConditionalOmniscient, metric, bound };
    let pv = [0.0, INF]
        .map(|b| check_bound(&spec(MechanismKind::Pvisa { brand_bid: Some(b) }, Metric::Total, 0.5), base, settings, trials));
    let ep = [1.0, INF]
        .map(|a| check_bound(&spec(MechanismKind::epvisa_with_alpha(a), Metric::Total, 0.5), base, settings, trials));
    let pl = power_law_config(base);
    let total = check_bound(&spec(MechanismKind::epvisa(), Metric::Total, 0.96), &pl, settings, trials)?;
    let perf = check_bound(&spec(MechanismKind::epvisa(), Metric::Perf, 0.885), &pl, settings, trials)?;
    Ok(vec![
        NamedBound::of("pvisa-half", pv.into_iter().collect::<Result<_>>()?),
        NamedBound::of("epvisa-half", ep.into_iter().collect::<Result<_>>()?),
        NamedBound::of("epvisa-total-0.96", vec![total]),
        NamedBound::of("epvisa-perf-0.885", vec![perf]),
    ])
}

/// Fixtures that break one property each, for checker sensitivity tests.
pub mod fixtures {
    use super::*;
    use crate::mechanisms::Pvisa;

    /// Highest bid wins and pays its own bid.
    #[derive(Debug, Clone, Copy)]
    pub struct FirstPrice(pub Pvisa);

    impl Mechanism for FirstPrice {
        fn label(&self) -> String {
            "first-price".into()
        }
        fn brand_bid(&self) -> f64 {
            self.0.brand_bid
        }
        fn physical_stage(&self, ctx: &MarketContext, bids: &[PhysicalBid]) -> Result<Option<PhysicalAward>> {
            Ok(self.0.physical_stage(ctx, bids)?.map(|mut a| {
                a.payment = bids.iter().find(|b| b.av_id == a.av).map_or(0.0, |b| b.price);
                a
            }))
        }
        fn virtual_stage(&self, ctx: &MarketContext, award: &PhysicalAward, bids: &[VirtualBid]) -> Result<MechanismOutcome> {
            self.0.virtual_stage(ctx, award, bids)
        }
    }

    /// Threshold rule whose performance winner pays `alpha` times the sum of
    /// all competing performance bids.
    #[derive(Debug, Clone, Copy)]
    pub struct SumOfCompetingBids {
        pub alpha: f64,
        pub brand_bid: f64,
    }

    impl Mechanism for SumOfCompetingBids {
        fn label(&self) -> String {
            "sum-critical".into()
        }
        fn brand_bid(&self) -> f64 {
            self.brand_bid
        }
        fn physical_stage(&self, ctx: &MarketContext, bids: &[PhysicalBid]) -> Result<Option<PhysicalAward>> {
            Pvisa::new(self.brand_bid).physical_stage(ctx, bids)
        }
        fn virtual_stage(&self, ctx: &MarketContext, award: &PhysicalAward, bids: &[VirtualBid]) -> Result<MechanismOutcome> {
            let mut perf: Vec<VirtualBid> = bids.iter().filter(|b| b.mbp_id != 0).copied().collect();
            perf.sort_by_key(|b| b.mbp_id);
            let brand = bids.iter().find(|b| b.mbp_id == 0).map_or(0.0, |b| b.price);
            let Some(w) = perf.iter().enumerate().max_by(|x, y| x.1.price.total_cmp(&y.1.price).then(y.0.cmp(&x.0))).map(|(i, _)| i)
            else {
                return Ok(crate::mechanisms::settle(ctx, award, Some(0), brand, false));
            };
            let others: f64 = perf.iter().enumerate().filter(|&(i, _)| i != w).map(|(_, b)| b.price).sum();
            let max_other = perf.iter().enumerate().filter(|&(i, _)| i != w).map(|(_, b)| b.price).fold(0.0, f64::max);
            if perf[w].price > self.alpha * max_other {
                Ok(crate::mechanisms::settle(ctx, award, Some(perf[w].mbp_id), self.alpha * others, false))
            } else {
                Ok(crate::mechanisms::settle(ctx, award, Some(0), brand, false))
            }
        }
    }

    /// Threshold rule with a fixed additive reserve on performance bids.
    #[derive(Debug, Clone, Copy)]
    pub struct AdditiveReserve {
        pub alpha: f64,
        pub reserve: f64,
        pub brand_bid: f64,
    }

    impl Mechanism for AdditiveReserve {
        fn label(&self) -> String {
            "additive-reserve".into()
        }
        fn brand_bid(&self) -> f64 {
            self.brand_bid
        }
        fn physical_stage(&self, ctx: &MarketContext, bids: &[PhysicalBid]) -> Result<Option<PhysicalAward>> {
            Pvisa::new(self.brand_bid).physical_stage(ctx, bids)
        }
        fn virtual_stage(&self, ctx: &MarketContext, award: &PhysicalAward, bids: &[VirtualBid]) -> Result<MechanismOutcome> {
            let mut perf: Vec<VirtualBid> = bids.iter().filter(|b| b.mbp_id != 0).copied().collect();
            perf.sort_by_key(|b| b.mbp_id);
            let brand = bids.iter().find(|b| b.mbp_id == 0).map_or(0.0, |b| b.price);
            let mut top: Option<VirtualBid> = None;
            for b in &perf {
                if top.is_none_or(|t| b.price > t.price) {
                    top = Some(*b);
                }
            }
            let Some(top) = top else {
                return Ok(crate::mechanisms::settle(ctx, award, Some(0), brand, false));
            };
            let second = perf.iter().filter(|b| b.mbp_id != top.mbp_id).map(|b| b.price).fold(0.0, f64::max);
            let threshold = (self.alpha * second).max(self.reserve);
            if top.price > threshold {
                Ok(crate::mechanisms::settle(ctx, award, Some(top.mbp_id), threshold, false))
            } else {
                Ok(crate::mechanisms::settle(ctx, award, Some(0), brand, false))
            }
        }
    }
}
