//! Domain types for one synchronization auction and their invariants.
//!
//! Units: data in bits, cycle densities in cycles/bit, frequencies in Hz,
//! powers in watts, durations in seconds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ScenarioViolation};

/// Bits in one megabyte.
pub const BITS_PER_MB: f64 = 8.0e6;
/// Cycles per bit in one Gcycles/MB.
pub const CYCLES_PER_BIT_PER_GCYCLES_MB: f64 = 125.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsuProfile {
    pub cpu_freq_hz: f64,
    pub gpu_freq_hz: f64,
    pub uplink_bw_hz: f64,
    pub downlink_bw_hz: f64,
    pub tx_power_w: f64,
    pub noise_power_w: f64,
    /// Announced threshold deadline; `None` means no extra cap.
    #[serde(default)]
    pub threshold_deadline_s: Option<f64>,
    /// Declared total bandwidth, checked against uplink + downlink.
    #[serde(default)]
    pub total_bw_hz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtTask {
    pub size_bits: f64,
    pub cycles_per_bit: f64,
    pub deadline_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArTask {
    pub layer_size_bits: f64,
    pub cycles_per_bit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvProfile {
    pub id: usize,
    pub valuation: f64,
    pub dt_task: DtTask,
    pub tx_power_w: f64,
    pub channel_gain: f64,
    pub noise_power_w: f64,
    pub cache_size: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MbpKind {
    Brand,
    Performance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbpProfile {
    pub id: usize,
    pub kind: MbpKind,
    pub ar_task: ArTask,
}

/// Matched preference caches, one row per AV and one column per MBP
/// (column 0 is the brand). Entries are counts under discrete match
/// distributions and unrounded reals under the power-law one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchQualityMatrix {
    pub h: Vec<Vec<f64>>,
}

impl MatchQualityMatrix {
    pub fn get(&self, av: usize, mbp: usize) -> f64 {
        self.h[av][mbp]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketScenario {
    pub rsu: RsuProfile,
    pub avs: Vec<AvProfile>,
    pub mbps: Vec<MbpProfile>,
    #[serde(rename = "match")]
    pub matches: MatchQualityMatrix,
    pub gamma: f64,
    pub expected_brand_match: f64,
}

impl MarketScenario {
    pub fn num_avs(&self) -> usize {
        self.avs.len()
    }

    /// Number of performance MBPs (K).
    pub fn num_perf(&self) -> usize {
        self.mbps.len().saturating_sub(1)
    }

    /// Brand ad value rate the auctioneer accounts for AV `av`.
    pub fn brand_value(&self, av: usize) -> f64 {
        ad_value(self.avs[av].valuation, self.expected_brand_match)
    }

    /// Ad value rate of MBP `mbp` shown to AV `av`, from realized match quality.
    pub fn perf_value(&self, av: usize, mbp: usize) -> f64 {
        ad_value(self.avs[av].valuation, self.matches.get(av, mbp))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MechanismOutcome {
    pub winner_av: Option<usize>,
    pub winner_mbp: Option<usize>,
    pub payment_dt: f64,
    pub payment_ar: f64,
    pub display_duration_s: f64,
    pub surplus_dt: f64,
    /// Brand ad value rate if the brand won, else 0.
    pub surplus_brand: f64,
    /// Performance ad value rate if a performance MBP won, else 0.
    pub surplus_perf: f64,
    pub total_welfare: f64,
    /// Set when a top bid or score was tied and resolved by lowest id.
    pub tie: bool,
}

impl MechanismOutcome {
    pub fn empty() -> Self {
        Self::default()
    }
}

pub fn ad_value(valuation: f64, match_quality: f64) -> f64 {
    valuation * match_quality
}

/// Returns the scenario unchanged when every invariant holds, otherwise
/// every violation found.
pub fn validate_scenario(scenario: MarketScenario) -> Result<MarketScenario> {
    let violations = scenario_violations(&scenario);
    if violations.is_empty() {
        Ok(scenario)
    } else {
        Err(Error::InvalidScenario(violations))
    }
}

pub fn scenario_violations(s: &MarketScenario) -> Vec<ScenarioViolation> {
    use ScenarioViolation as V;
    let mut out = Vec::new();
    let positive = |out: &mut Vec<V>, name: &str, x: f64| {
        if !(x > 0.0 && x.is_finite()) {
            out.push(V::NonPositiveResource(name.to_string()));
        }
    };
    let nonneg = |out: &mut Vec<V>, name: String, x: f64| {
        if !(x >= 0.0) {
            out.push(V::Negative(name));
        }
    };

    let r = &s.rsu;
    positive(&mut out, "rsu.cpu_freq_hz", r.cpu_freq_hz);
    positive(&mut out, "rsu.gpu_freq_hz", r.gpu_freq_hz);
    positive(&mut out, "rsu.uplink_bw_hz", r.uplink_bw_hz);
    positive(&mut out, "rsu.downlink_bw_hz", r.downlink_bw_hz);
    positive(&mut out, "rsu.tx_power_w", r.tx_power_w);
    positive(&mut out, "rsu.noise_power_w", r.noise_power_w);
    if let Some(t) = r.threshold_deadline_s {
        nonneg(&mut out, "rsu.threshold_deadline_s".into(), t);
    }
    if let Some(total) = r.total_bw_hz {
        let sum = r.uplink_bw_hz + r.downlink_bw_hz;
        if (sum - total).abs() > 1e-9 * total.abs().max(1.0) {
            out.push(V::DimensionMismatch(format!(
                "uplink + downlink bandwidth {sum} != total {total}"
            )));
        }
    }

    if s.avs.is_empty() {
        out.push(V::DimensionMismatch("scenario has no AVs".into()));
    }
    if s.mbps.is_empty() {
        out.push(V::DimensionMismatch("scenario has no MBPs".into()));
    }
    for (i, av) in s.avs.iter().enumerate() {
        if av.id != i {
            out.push(V::DimensionMismatch(format!("AV at position {i} has id {}", av.id)));
        }
        nonneg(&mut out, format!("avs[{i}].valuation"), av.valuation);
        nonneg(&mut out, format!("avs[{i}].channel_gain"), av.channel_gain);
        nonneg(&mut out, format!("avs[{i}].tx_power_w"), av.tx_power_w);
        nonneg(&mut out, format!("avs[{i}].dt_task.size_bits"), av.dt_task.size_bits);
        nonneg(&mut out, format!("avs[{i}].dt_task.cycles_per_bit"), av.dt_task.cycles_per_bit);
        positive(&mut out, &format!("avs[{i}].dt_task.deadline_s"), av.dt_task.deadline_s);
        positive(&mut out, &format!("avs[{i}].noise_power_w"), av.noise_power_w);
        if !(av.cache_size >= 0.0) {
            out.push(V::Negative(format!("avs[{i}].cache_size")));
        }
    }
    for (k, m) in s.mbps.iter().enumerate() {
        if m.id != k {
            out.push(V::DimensionMismatch(format!("MBP at position {k} has id {}", m.id)));
        }
        let expected = if k == 0 { MbpKind::Brand } else { MbpKind::Performance };
        if m.kind != expected {
            out.push(V::DimensionMismatch(format!(
                "MBP {k} has kind {:?}; the brand must be exactly id 0",
                m.kind
            )));
        }
        nonneg(&mut out, format!("mbps[{k}].ar_task.layer_size_bits"), m.ar_task.layer_size_bits);
        nonneg(&mut out, format!("mbps[{k}].ar_task.cycles_per_bit"), m.ar_task.cycles_per_bit);
    }

    if s.matches.h.len() != s.avs.len() {
        out.push(V::DimensionMismatch(format!(
            "match matrix has {} rows for {} AVs",
            s.matches.h.len(),
            s.avs.len()
        )));
    }
    for (i, row) in s.matches.h.iter().enumerate() {
        if row.len() != s.mbps.len() {
            out.push(V::DimensionMismatch(format!(
                "match row {i} has {} columns for {} MBPs",
                row.len(),
                s.mbps.len()
            )));
            continue;
        }
        let cap = s.avs.get(i).map(|a| a.cache_size);
        for (k, &h) in row.iter().enumerate() {
            if !(h >= 0.0) {
                out.push(V::Negative(format!("match[{i}][{k}]")));
            } else if let Some(cap) = cap {
                if h > cap {
                    out.push(V::CacheOverflow { av: i, mbp: k });
                }
            }
        }
    }

    nonneg(&mut out, "gamma".into(), s.gamma);
    nonneg(&mut out, "expected_brand_match".into(), s.expected_brand_match);
    out
}

/// Hand-built market with unit-SNR links of 1 MHz, so a DT task of
/// `dt_delay_s * 1e6` bits takes exactly `dt_delay_s` and each AR layer
/// takes `ar_layer_delay_s` regardless of the MBP.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioBuilder {
    pub valuations: Vec<f64>,
    /// One row per AV, column 0 for the brand.
    pub matches: Vec<Vec<f64>>,
    pub expected_brand_match: f64,
    pub gamma: f64,
    pub dt_delay_s: f64,
    pub ar_layer_delay_s: f64,
    pub deadline_s: f64,
    pub cache_size: f64,
}

const BUILDER_BW_HZ: f64 = 1.0e6;

impl ScenarioBuilder {
    pub fn new(valuations: &[f64], matches: Vec<Vec<f64>>) -> Self {
        Self {
            valuations: valuations.to_vec(),
            matches,
            expected_brand_match: 1.0,
            gamma: 1.0,
            dt_delay_s: 0.5,
            ar_layer_delay_s: 0.0,
            deadline_s: 10.0,
            cache_size: 1.0e12,
        }
    }

    pub fn brand_match(mut self, e: f64) -> Self {
        self.expected_brand_match = e;
        self
    }

    pub fn gamma(mut self, g: f64) -> Self {
        self.gamma = g;
        self
    }

    pub fn delays(mut self, dt_s: f64, ar_layer_s: f64) -> Self {
        self.dt_delay_s = dt_s;
        self.ar_layer_delay_s = ar_layer_s;
        self
    }

    pub fn deadline(mut self, d: f64) -> Self {
        self.deadline_s = d;
        self
    }

    pub fn build(&self) -> Result<MarketScenario> {
        validate_scenario(self.build_unchecked())
    }

    /// The scenario without running validation.
    pub fn build_unchecked(&self) -> MarketScenario {
        let k = self.matches.first().map_or(1, Vec::len);
        let avs = self
            .valuations
            .iter()
            .enumerate()
            .map(|(id, &valuation)| AvProfile {
                id,
                valuation,
                dt_task: DtTask {
                    size_bits: self.dt_delay_s * BUILDER_BW_HZ,
                    cycles_per_bit: 0.0,
                    deadline_s: self.deadline_s,
                },
                tx_power_w: 1.0,
                channel_gain: 1.0,
                noise_power_w: 1.0,
                cache_size: self.cache_size,
            })
            .collect();
        let mbps = (0..k)
            .map(|id| MbpProfile {
                id,
                kind: if id == 0 { MbpKind::Brand } else { MbpKind::Performance },
                ar_task: ArTask { layer_size_bits: self.ar_layer_delay_s * BUILDER_BW_HZ, cycles_per_bit: 0.0 },
            })
            .collect();
        MarketScenario {
            rsu: RsuProfile {
                cpu_freq_hz: 1.0e300,
                gpu_freq_hz: 1.0e300,
                uplink_bw_hz: BUILDER_BW_HZ,
                downlink_bw_hz: BUILDER_BW_HZ,
                tx_power_w: 1.0,
                noise_power_w: 1.0,
                threshold_deadline_s: None,
                total_bw_hz: None,
            },
            avs,
            mbps,
            matches: MatchQualityMatrix { h: self.matches.clone() },
            gamma: self.gamma,
            expected_brand_match: self.expected_brand_match,
        }
    }
}
