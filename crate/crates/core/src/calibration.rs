//! Per-cell auctioneer parameters estimated from pre-trial draws, and the
//! configurable mechanism menu.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::channel_delay::DelayTable;
use crate::error::{Error, Result};
use crate::mechanisms::{
    optimal_brand_bid, select_alpha, AlphaFactor, Epvisa, Mechanism, Omniscient, Pvisa, ScoreSign, ScoringRule,
    SurplusEstimate,
};
use crate::rng::{derive_seed, purpose, stream};
use crate::scenario_gen::{sample_scenario, GeneratorConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationSettings {
    /// Pre-trial scenarios used for the brand bid and the price factor.
    pub draws: usize,
    /// Virtual-market draws behind the efficient score.
    pub estimate_samples: usize,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self { draws: 1000, estimate_samples: 1000 }
    }
}

/// Statistics of the synchronizing AV's ad values over pre-trial draws.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub brand_value_mean: f64,
    pub second_perf_mean: f64,
    pub top_perf_samples: Vec<f64>,
    /// Brand contract bid maximizing its expected utility.
    pub brand_bid: f64,
    /// Price factor `max(1, gamma E[Q_0] / E[Q_(2)])`, 1 when undefined.
    pub alpha: f64,
}

/// Draws scenarios on a dedicated stream; the synchronizing AV of each draw
/// is the highest-valuation AV that can be served.
pub fn calibrate(config: &GeneratorConfig, settings: &CalibrationSettings) -> Result<Calibration> {
    let mut cfg = config.clone();
    cfg.rng_seed = derive_seed(config.rng_seed, purpose::CALIBRATION);
    let mut brand = Vec::new();
    let mut top = Vec::new();
    let mut second = Vec::new();
    for t in 0..settings.draws as u64 {
        let s = sample_scenario(&cfg, t)?;
        let d = DelayTable::new(&s)?;
        let mut best: Option<usize> = None;
        for i in 0..s.avs.len() {
            if d.eligible(i) && best.is_none_or(|b| s.avs[i].valuation > s.avs[b].valuation) {
                best = Some(i);
            }
        }
        let Some(av) = best else { continue };
        let mut perf: Vec<f64> = (1..s.mbps.len()).map(|k| s.perf_value(av, k)).collect();
        perf.sort_by(|a, b| b.total_cmp(a));
        brand.push(s.brand_value(av));
        top.push(perf.first().copied().unwrap_or(0.0));
        second.push(perf.get(1).copied().unwrap_or(0.0));
    }
    if brand.is_empty() {
        return Err(Error::DegenerateDistribution("no pre-trial draw had a servable AV".into()));
    }
    let n = brand.len() as f64;
    let brand_value_mean = brand.iter().sum::<f64>() / n;
    let second_perf_mean = second.iter().sum::<f64>() / n;
    let mut grid = top.clone();
    grid.push(0.0);
    let brand_bid = optimal_brand_bid(brand_value_mean, &top, &grid)?;
    let alpha = match select_alpha(config.gamma, brand_value_mean, second_perf_mean) {
        Ok(a) => a.get(),
        Err(Error::ZeroDenominator) => 1.0,
        Err(e) => return Err(e),
    };
    Ok(Calibration { brand_value_mean, second_perf_mean, top_perf_samples: top, brand_bid, alpha })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    /// Expected display surplus estimated per bidder.
    #[default]
    Efficient,
    /// No externality term; scores equal prices.
    Zero,
}

/// Mechanism choice as written in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MechanismKind {
    Omniscient,
    Pvisa {
        /// Fixed brand bid; calibrated when absent.
        #[serde(default)]
        brand_bid: Option<f64>,
    },
    Epvisa {
        /// Fixed price factor; calibrated when absent.
        #[serde(default)]
        alpha: Option<f64>,
        #[serde(default)]
        rule: RuleKind,
        #[serde(default)]
        score_sign: ScoreSign,
        #[serde(default)]
        brand_bid: Option<f64>,
    },
}

impl MechanismKind {
    pub fn pvisa() -> Self {
        MechanismKind::Pvisa { brand_bid: None }
    }

    pub fn epvisa() -> Self {
        MechanismKind::Epvisa { alpha: None, rule: RuleKind::Efficient, score_sign: ScoreSign::Plus, brand_bid: None }
    }

    pub fn epvisa_with_alpha(alpha: f64) -> Self {
        MechanismKind::Epvisa { alpha: Some(alpha), rule: RuleKind::Efficient, score_sign: ScoreSign::Plus, brand_bid: None }
    }

    pub fn default_set() -> Vec<Self> {
        vec![MechanismKind::Omniscient, Self::pvisa(), Self::epvisa()]
    }

    pub fn build(&self, config: &GeneratorConfig, calib: &Calibration, settings: &CalibrationSettings) -> Result<Box<dyn Mechanism>> {
        Ok(match *self {
            MechanismKind::Omniscient => Box::new(Omniscient),
            MechanismKind::Pvisa { brand_bid } => Box::new(Pvisa::new(brand_bid.unwrap_or(calib.brand_bid))),
            MechanismKind::Epvisa { alpha, rule, score_sign, brand_bid } => {
                let alpha = AlphaFactor::new(alpha.unwrap_or(calib.alpha))?;
                let rule = match rule {
                    RuleKind::Zero => ScoringRule::zero(),
                    RuleKind::Efficient => {
                        let mut rng = stream(config.rng_seed, purpose::ESTIMATE, 0);
                        let est = SurplusEstimate::sample(config, alpha.get(), settings.estimate_samples, &mut rng);
                        ScoringRule::Estimated(Arc::new(est))
                    }
                };
                let mut m = Epvisa::new(rule, alpha, brand_bid.unwrap_or(calib.brand_bid));
                m.sign = score_sign;
                Box::new(m)
            }
        })
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            MechanismKind::Omniscient => write!(f, "omniscient"),
            MechanismKind::Pvisa { brand_bid: None } => write!(f, "pvisa"),
            MechanismKind::Pvisa { brand_bid: Some(b) } => write!(f, "pvisa[b0={b}]"),
            MechanismKind::Epvisa { alpha, rule, score_sign, brand_bid } => {
                let mut parts = Vec::new();
                if let Some(a) = alpha {
                    parts.push(format!("alpha={a}"));
                }
                if rule == RuleKind::Zero {
                    parts.push("rule=zero".into());
                }
                if score_sign == ScoreSign::Minus {
                    parts.push("sign=minus".into());
                }
                if let Some(b) = brand_bid {
                    parts.push(format!("b0={b}"));
                }
                if parts.is_empty() {
                    write!(f, "epvisa")
                } else {
                    write!(f, "epvisa[{}]", parts.join(";"))
                }
            }
        }
    }
}
