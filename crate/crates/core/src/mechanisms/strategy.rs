//! Bidder- and auctioneer-side parameter choices.

use serde::{Deserialize, Serialize};

use super::ScoringRule;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct AlphaFactor(f64);

impl AlphaFactor {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha >= 1.0 && !alpha.is_nan() {
            Ok(Self(alpha))
        } else {
            Err(Error::OutOfDomain(format!("price scaling factor {alpha} must be at least 1")))
        }
    }

    pub fn one() -> Self {
        Self(1.0)
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for AlphaFactor {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<AlphaFactor> for f64 {
    fn from(a: AlphaFactor) -> f64 {
        a.0
    }
}

/// Price plus duration-weighted ad surplus.
pub fn efficient_score(price: f64, deadline_s: f64, gamma: f64, brand_surplus_rate: f64, perf_surplus_rate: f64) -> f64 {
    price + deadline_s * (gamma * brand_surplus_rate + perf_surplus_rate)
}

/// Grid point in `(0, cap]` maximizing `valuation + phi(eta)`, ties to the
/// largest deadline. Bidder-specific rules are monotone, so they return the cap.
pub fn optimal_deadline(valuation: f64, rule: &ScoringRule, deadline_cap_s: f64, grid_step_s: f64) -> f64 {
    if !(grid_step_s > 0.0) || !(deadline_cap_s > 0.0) {
        return deadline_cap_s;
    }
    if rule.phi(deadline_cap_s).is_none() {
        return deadline_cap_s;
    }
    let steps = (deadline_cap_s / grid_step_s).floor() as usize;
    let mut best = (deadline_cap_s, valuation + rule.phi(deadline_cap_s).unwrap_or(0.0));
    for j in (1..=steps).rev() {
        let eta = j as f64 * grid_step_s;
        if eta > deadline_cap_s {
            continue;
        }
        let v = valuation + rule.phi(eta).unwrap_or(0.0);
        if v > best.1 {
            best = (eta, v);
        }
    }
    best.0
}

/// `max(1, gamma E[Q_0] / E[Q_(2)])`.
pub fn select_alpha(gamma: f64, expected_brand_value: f64, expected_second_perf_value: f64) -> Result<AlphaFactor> {
    if expected_second_perf_value == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    AlphaFactor::new((gamma * expected_brand_value / expected_second_perf_value).max(1.0))
}

/// Grid bid maximizing `mean[(E[Q_0] - Q_(1)) 1{Q_(1) <= b}]`; ties go to the smaller bid.
pub fn optimal_brand_bid(brand_value_mean: f64, top_perf_value_samples: &[f64], bid_grid: &[f64]) -> Result<f64> {
    if bid_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if top_perf_value_samples.is_empty() {
        return Err(Error::InvalidConfig("no samples of the top performance value".into()));
    }
    let mut sorted: Vec<f64> = top_perf_value_samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    // prefix[j] = sum over the j smallest samples of (E[Q_0] - q)
    let mut prefix = Vec::with_capacity(sorted.len() + 1);
    prefix.push(0.0);
    for q in &sorted {
        prefix.push(prefix.last().unwrap() + (brand_value_mean - q));
    }
    let n = sorted.len() as f64;
    let mut grid: Vec<f64> = bid_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let mut best = (grid[0], f64::NEG_INFINITY);
    for &b in &grid {
        let wins = sorted.partition_point(|&q| q <= b);
        let u = prefix[wins] / n;
        if u > best.1 {
            best = (b, u);
        }
    }
    Ok(best.0)
}
