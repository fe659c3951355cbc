//! Synchronization scores for EPViSA's physical stage.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MarketContext;
use crate::error::{Error, Result};
use crate::scenario_gen::{sample_match_quality, GeneratorConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreSign {
    #[default]
    Plus,
    Minus,
}

impl ScoreSign {
    fn apply(self, x: f64) -> f64 {
        match self {
            ScoreSign::Plus => x,
            ScoreSign::Minus => -x,
        }
    }
}

/// Externality term added to a physical bid's price.
#[derive(Debug, Clone)]
pub enum ScoringRule {
    /// `phi(eta) = eta * (gamma * brand_rate + perf_rate)`.
    Efficient { gamma: f64, brand_rate: f64, perf_rate: f64 },
    /// Piecewise-linear `phi` through sorted `(eta, phi)` knots, flat outside.
    Tabulated { knots: Vec<(f64, f64)> },
    /// Per-bidder expected ad surplus per unit of valuation, estimated from
    /// match-quality draws against the bidder's own delays and deadline.
    Estimated(Arc<SurplusEstimate>),
}

impl ScoringRule {
    /// The rule with `phi = 0`, which reduces scores to prices.
    pub fn zero() -> Self {
        ScoringRule::Tabulated { knots: vec![(0.0, 0.0)] }
    }

    pub fn tabulated(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidConfig("tabulated rule needs at least one knot".into()));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) || w[1].1 < w[0].1 {
                return Err(Error::InvalidConfig(
                    "tabulated knots must have increasing deadlines and nondecreasing values".into(),
                ));
            }
        }
        Ok(ScoringRule::Tabulated { knots })
    }

    /// `phi(eta)` for rules that do not depend on the bidder.
    pub fn phi(&self, eta: f64) -> Option<f64> {
        match self {
            ScoringRule::Efficient { gamma, brand_rate, perf_rate } => {
                Some(eta * (gamma * brand_rate + perf_rate))
            }
            ScoringRule::Tabulated { knots } => Some(interpolate(knots, eta)),
            ScoringRule::Estimated(_) => None,
        }
    }

    /// Score of `price` as `slope * price + offset` for one bidder.
    pub(crate) fn terms(&self, ctx: &MarketContext, av: usize, deadline: f64, sign: ScoreSign) -> Result<(f64, f64)> {
        match self {
            ScoringRule::Estimated(est) => {
                if sign == ScoreSign::Minus {
                    return Err(Error::InvalidConfig(
                        "the estimated efficient rule only supports the plus sign".into(),
                    ));
                }
                let r = ctx.cached_externality(av, deadline, || est.surplus_per_value(ctx, av, deadline));
                Ok((1.0 + r, 0.0))
            }
            rule => Ok((1.0, sign.apply(rule.phi(deadline).expect("bidder-independent rule")))),
        }
    }
}

fn interpolate(knots: &[(f64, f64)], x: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let j = knots.partition_point(|k| k.0 <= x);
    let (x0, y0) = knots[j - 1];
    let (x1, y1) = knots[j];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// One draw of the virtual market: the MBP that would win and its layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateDraw {
    /// 0 for the brand.
    pub winner: usize,
    pub layers: f64,
    pub match_quality: f64,
}

/// Draws of who would win the ad slot, for expected-surplus scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurplusEstimate {
    pub draws: Vec<EstimateDraw>,
}

impl SurplusEstimate {
    /// Samples `n` virtual markets from `config` and resolves each with
    /// EPViSA's threshold rule at `alpha`.
    pub fn sample<R: Rng + ?Sized>(config: &GeneratorConfig, alpha: f64, n: usize, rng: &mut R) -> Self {
        let brand = config.brand_dist();
        let k = config.num_perf_mbps;
        let mut m = vec![0.0; k + 1];
        let draws = (0..n)
            .map(|_| {
                let cache = config.cache_size.sample(rng).max(0.0).floor();
                for (j, slot) in m.iter_mut().enumerate() {
                    let d = if j == 0 { &brand } else { &config.match_quality };
                    *slot = sample_match_quality(d, Some(cache), rng);
                }
                let mut top = 1;
                for j in 2..=k {
                    if m[j] > m[top] {
                        top = j;
                    }
                }
                let second = (1..=k).filter(|&j| j != top).map(|j| m[j]).fold(0.0, f64::max);
                if m[top] > alpha * second {
                    EstimateDraw { winner: top, layers: m[top], match_quality: m[top] }
                } else {
                    EstimateDraw { winner: 0, layers: m[0], match_quality: m[0] }
                }
            })
            .collect();
        Self { draws }
    }

    /// Expected `T * 1{feasible} * (gamma E[m_0] z_0 + m z_P)` for `av` at `deadline`.
    pub fn surplus_per_value(&self, ctx: &MarketContext, av: usize, deadline: f64) -> f64 {
        if self.draws.is_empty() {
            return 0.0;
        }
        let s = &ctx.scenario;
        let d = &ctx.delays;
        let cap = match s.rsu.threshold_deadline_s {
            Some(t) => deadline.min(t),
            None => deadline,
        };
        let brand_rate = s.gamma * s.expected_brand_match;
        let dt = d.dt_s[av];
        let row = &d.ar_layer_s[av];
        let mut sum = 0.0;
        for draw in &self.draws {
            let Some(&layer) = row.get(draw.winner) else { continue };
            let t = if layer == 0.0 { dt } else { dt + (draw.layers + 1.0) * layer };
            if t <= cap {
                let rate = if draw.winner == 0 { brand_rate } else { draw.match_quality };
                sum += t * rate;
            }
        }
        sum / self.draws.len() as f64
    }
}
