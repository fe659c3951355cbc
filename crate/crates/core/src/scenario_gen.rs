//! Random market scenarios from configured distributions.

use rand::Rng;
use rand_distr::{Distribution, Pareto, Zipf};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::market_model::{
    ArTask, AvProfile, DtTask, MarketScenario, MatchQualityMatrix, MbpKind, MbpProfile, RsuProfile,
    BITS_PER_MB, CYCLES_PER_BIT_PER_GCYCLES_MB,
};
use crate::rng::{purpose, stream};

/// Zipf support size when no cache cap applies.
pub const ZIPF_DEFAULT_SUPPORT: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dist {
    Uniform { lo: f64, hi: f64 },
    /// Discrete Zipf over `{1, ..., N}`.
    Zipf { exponent: f64 },
    /// Continuous Pareto with `P(X > x) = x^-a` for `x >= 1`.
    PowerLaw { a: f64 },
    Constant { value: f64 },
}

impl Dist {
    pub fn uniform(lo: f64, hi: f64) -> Self {
        Dist::Uniform { lo, hi }
    }

    pub fn constant(value: f64) -> Self {
        Dist::Constant { value }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        let bad = |why: &str| Err(Error::InvalidConfig(format!("{name}: {why}")));
        match *self {
            Dist::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite()) => bad("non-finite bound"),
            Dist::Uniform { lo, hi } if lo > hi => bad("uniform lo > hi"),
            Dist::Zipf { exponent } if !(exponent > 1.0) => bad("zipf exponent must exceed 1"),
            Dist::PowerLaw { a } if !(a > 1.0) => bad("power-law exponent must exceed 1"),
            Dist::Constant { value } if !value.is_finite() => bad("non-finite constant"),
            _ => Ok(()),
        }
    }

    /// Largest value the distribution can produce (unclamped).
    fn sup(&self) -> f64 {
        match *self {
            Dist::Uniform { hi, .. } => hi,
            Dist::Zipf { .. } => ZIPF_DEFAULT_SUPPORT,
            Dist::PowerLaw { .. } => f64::INFINITY,
            Dist::Constant { value } => value,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Dist::Uniform { lo, hi } => {
                if lo == hi {
                    lo
                } else {
                    lo + (hi - lo) * rng.random::<f64>()
                }
            }
            Dist::Zipf { exponent } => zipf(ZIPF_DEFAULT_SUPPORT, exponent, rng),
            Dist::PowerLaw { a } => Pareto::new(1.0, a).expect("validated exponent").sample(rng),
            Dist::Constant { value } => value,
        }
    }

    /// Analytic mean (Zipf over its default support).
    pub fn mean(&self) -> f64 {
        mean_clamped(self, None)
    }
}

fn zipf<R: Rng + ?Sized>(n: f64, s: f64, rng: &mut R) -> f64 {
    Zipf::new(n, s).expect("validated zipf").sample(rng)
}

/// Draws a match quality in `[0, cache_cap]`.
pub fn sample_match_quality<R: Rng + ?Sized>(dist: &Dist, cache_cap: Option<f64>, rng: &mut R) -> f64 {
    let cap = cache_cap.unwrap_or(f64::INFINITY);
    let raw = match *dist {
        Dist::Zipf { exponent } => {
            let n = cache_cap.map_or(ZIPF_DEFAULT_SUPPORT, f64::floor);
            if n < 1.0 {
                return 0.0;
            }
            zipf(n, exponent, rng)
        }
        _ => dist.sample(rng),
    };
    raw.clamp(0.0, cap)
}

/// `E[clamp(X, 0, cap)]` in closed form.
pub fn mean_clamped(dist: &Dist, cache_cap: Option<f64>) -> f64 {
    let cap = cache_cap.unwrap_or(f64::INFINITY);
    match *dist {
        Dist::Constant { value } => value.clamp(0.0, cap),
        Dist::Uniform { lo, hi } => {
            if lo == hi {
                return lo.clamp(0.0, cap);
            }
            let anti = |x: f64| {
                if x <= 0.0 {
                    0.0
                } else if x <= cap {
                    x * x / 2.0
                } else {
                    cap * cap / 2.0 + cap * (x - cap)
                }
            };
            (anti(hi) - anti(lo)) / (hi - lo)
        }
        Dist::Zipf { exponent } => {
            let n = cache_cap.map_or(ZIPF_DEFAULT_SUPPORT, f64::floor);
            if n < 1.0 {
                return 0.0;
            }
            let mut num = 0.0;
            let mut den = 0.0;
            for r in 1..=(n as u64) {
                let w = (r as f64).powf(-exponent);
                num += r as f64 * w;
                den += w;
            }
            num / den
        }
        Dist::PowerLaw { a } => {
            if cap < 1.0 {
                cap.max(0.0)
            } else if cap.is_infinite() {
                a / (a - 1.0)
            } else {
                1.0 + (1.0 - cap.powf(1.0 - a)) / (a - 1.0)
            }
        }
    }
}

/// Mean of the largest of `k` i.i.d. Pareto(a) draws.
pub fn pareto_max_mean(a: f64, k: usize) -> f64 {
    let k = k as f64;
    (ln_gamma(k + 1.0) + ln_gamma(1.0 - 1.0 / a) - ln_gamma(k + 1.0 - 1.0 / a)).exp()
}

fn d_uniform(lo: f64, hi: f64) -> Dist {
    Dist::uniform(lo, hi)
}

fn default_num() -> usize {
    30
}
fn default_cache() -> Dist {
    Dist::constant(30.0)
}
fn default_unit() -> Dist {
    d_uniform(0.0, 1.0)
}
fn default_av_power() -> Dist {
    d_uniform(0.0, 1.0e-3)
}
fn default_rsu_power() -> Dist {
    d_uniform(0.0, 10.0e-3)
}
fn default_noise() -> f64 {
    1.0e-3
}
fn default_size() -> Dist {
    d_uniform(0.0, BITS_PER_MB)
}
fn default_density() -> Dist {
    d_uniform(0.0, CYCLES_PER_BIT_PER_GCYCLES_MB)
}
fn default_deadline() -> Dist {
    d_uniform(0.9, 1.1)
}
fn default_match() -> Dist {
    Dist::Zipf { exponent: 2.0 }
}
fn default_one() -> f64 {
    1.0
}
fn default_cpu() -> f64 {
    3.6e9
}
fn default_gpu() -> f64 {
    19.0e9
}
fn default_bw() -> f64 {
    20.0e6
}

/// Scenario distributions; every field defaults to the reference setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub num_avs: usize,
    pub num_perf_mbps: usize,
    pub cache_size: Dist,
    pub valuation: Dist,
    pub channel_gain: Dist,
    pub av_tx_power_w: Dist,
    pub rsu_tx_power_w: Dist,
    /// Fixed noise power for both link ends.
    pub noise_power_w: f64,
    pub dt_size_bits: Dist,
    pub dt_cycles_per_bit: Dist,
    pub deadline_s: Dist,
    pub ar_layer_size_bits: Dist,
    pub ar_cycles_per_bit: Dist,
    pub match_quality: Dist,
    /// Brand match law; falls back to `match_quality`.
    pub brand_match_quality: Option<Dist>,
    /// Overrides the analytic brand mean.
    pub expected_brand_match: Option<f64>,
    pub gamma: f64,
    pub cpu_freq_hz: f64,
    pub gpu_freq_hz: f64,
    pub uplink_bw_hz: f64,
    pub downlink_bw_hz: f64,
    pub threshold_deadline_s: Option<f64>,
    /// Multiplies DT size and cycle density.
    pub dt_scale: f64,
    /// Multiplies AR layer size and cycle density.
    pub ar_scale: f64,
    pub rng_seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            num_avs: default_num(),
            num_perf_mbps: default_num(),
            cache_size: default_cache(),
            valuation: default_unit(),
            channel_gain: default_unit(),
            av_tx_power_w: default_av_power(),
            rsu_tx_power_w: default_rsu_power(),
            noise_power_w: default_noise(),
            dt_size_bits: default_size(),
            dt_cycles_per_bit: default_density(),
            deadline_s: default_deadline(),
            ar_layer_size_bits: default_size(),
            ar_cycles_per_bit: default_density(),
            match_quality: default_match(),
            brand_match_quality: None,
            expected_brand_match: None,
            gamma: default_one(),
            cpu_freq_hz: default_cpu(),
            gpu_freq_hz: default_gpu(),
            uplink_bw_hz: default_bw(),
            downlink_bw_hz: default_bw(),
            threshold_deadline_s: None,
            dt_scale: default_one(),
            ar_scale: default_one(),
            rng_seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn brand_dist(&self) -> Dist {
        self.brand_match_quality.unwrap_or(self.match_quality)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_avs < 1 {
            return Err(Error::InvalidConfig("num_avs must be at least 1".into()));
        }
        if self.num_perf_mbps < 1 {
            return Err(Error::InvalidConfig("num_perf_mbps must be at least 1".into()));
        }
        let dists = [
            ("cache_size", self.cache_size),
            ("valuation", self.valuation),
            ("channel_gain", self.channel_gain),
            ("av_tx_power_w", self.av_tx_power_w),
            ("rsu_tx_power_w", self.rsu_tx_power_w),
            ("dt_size_bits", self.dt_size_bits),
            ("dt_cycles_per_bit", self.dt_cycles_per_bit),
            ("deadline_s", self.deadline_s),
            ("ar_layer_size_bits", self.ar_layer_size_bits),
            ("ar_cycles_per_bit", self.ar_cycles_per_bit),
            ("match_quality", self.match_quality),
            ("brand_match_quality", self.brand_dist()),
        ];
        for (name, d) in dists {
            d.validate(name)?;
        }
        for (name, x) in [
            ("noise_power_w", self.noise_power_w),
            ("cpu_freq_hz", self.cpu_freq_hz),
            ("gpu_freq_hz", self.gpu_freq_hz),
            ("uplink_bw_hz", self.uplink_bw_hz),
            ("downlink_bw_hz", self.downlink_bw_hz),
            ("dt_scale", self.dt_scale),
            ("ar_scale", self.ar_scale),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::InvalidConfig("gamma must be nonnegative".into()));
        }
        if self.deadline_s.sup() <= 0.0 {
            return Err(Error::DegenerateDistribution("deadline_s has no positive support".into()));
        }
        if self.rsu_tx_power_w.sup() <= 0.0 {
            return Err(Error::DegenerateDistribution("rsu_tx_power_w has no positive support".into()));
        }
        if let Some(e) = self.expected_brand_match {
            if !(e >= 0.0) {
                return Err(Error::InvalidConfig("expected_brand_match must be nonnegative".into()));
            }
        }
        Ok(())
    }

    /// Brand mean the auctioneer knows, averaged over the AVs' caches.
    fn brand_mean(&self, caches: &[f64]) -> f64 {
        if let Some(e) = self.expected_brand_match {
            return e;
        }
        let brand = self.brand_dist();
        caches.iter().map(|&c| mean_clamped(&brand, Some(c))).sum::<f64>() / caches.len() as f64
    }
}

/// Deterministic scenario for `(config.rng_seed, trial_index)`.
pub fn sample_scenario(config: &GeneratorConfig, trial_index: u64) -> Result<MarketScenario> {
    config.validate()?;
    let mut rng = stream(config.rng_seed, purpose::SCENARIO, trial_index);
    let rng = &mut rng;

    let mut rsu_power = config.rsu_tx_power_w.sample(rng);
    // A zero draw leaves every downlink dead; resample within the support.
    for _ in 0..64 {
        if rsu_power > 0.0 {
            break;
        }
        rsu_power = config.rsu_tx_power_w.sample(rng);
    }
    let rsu = RsuProfile {
        cpu_freq_hz: config.cpu_freq_hz,
        gpu_freq_hz: config.gpu_freq_hz,
        uplink_bw_hz: config.uplink_bw_hz,
        downlink_bw_hz: config.downlink_bw_hz,
        tx_power_w: rsu_power,
        noise_power_w: config.noise_power_w,
        threshold_deadline_s: config.threshold_deadline_s,
        total_bw_hz: None,
    };

    let mut avs = Vec::with_capacity(config.num_avs);
    for id in 0..config.num_avs {
        let valuation = config.valuation.sample(rng).max(0.0);
        let channel_gain = config.channel_gain.sample(rng).max(0.0);
        let tx_power_w = config.av_tx_power_w.sample(rng).max(0.0);
        let size_bits = config.dt_size_bits.sample(rng).max(0.0) * config.dt_scale;
        let cycles_per_bit = config.dt_cycles_per_bit.sample(rng).max(0.0) * config.dt_scale;
        let mut deadline_s = config.deadline_s.sample(rng);
        while deadline_s <= 0.0 {
            deadline_s = config.deadline_s.sample(rng);
        }
        let cache_size = config.cache_size.sample(rng).max(0.0).floor();
        avs.push(AvProfile {
            id,
            valuation,
            dt_task: DtTask { size_bits, cycles_per_bit, deadline_s },
            tx_power_w,
            channel_gain,
            noise_power_w: config.noise_power_w,
            cache_size,
        });
    }

    let mbps = (0..=config.num_perf_mbps)
        .map(|id| {
            let layer_size_bits = config.ar_layer_size_bits.sample(rng).max(0.0) * config.ar_scale;
            let cycles_per_bit = config.ar_cycles_per_bit.sample(rng).max(0.0) * config.ar_scale;
            MbpProfile {
                id,
                kind: if id == 0 { MbpKind::Brand } else { MbpKind::Performance },
                ar_task: ArTask { layer_size_bits, cycles_per_bit },
            }
        })
        .collect::<Vec<_>>();

    let brand = config.brand_dist();
    let h = avs
        .iter()
        .map(|av| {
            (0..=config.num_perf_mbps)
                .map(|k| {
                    let d = if k == 0 { &brand } else { &config.match_quality };
                    sample_match_quality(d, Some(av.cache_size), rng)
                })
                .collect()
        })
        .collect();

    let caches: Vec<f64> = avs.iter().map(|a| a.cache_size).collect();
    Ok(MarketScenario {
        rsu,
        avs,
        mbps,
        matches: MatchQualityMatrix { h },
        gamma: config.gamma,
        expected_brand_match: config.brand_mean(&caches),
    })
}

/// Tail exponent of the valuation law in the adversarial family; it must
/// approach 1 much faster than the match exponent for the bound to bind.
pub fn adversarial_valuation_tail(a: f64) -> f64 {
    1.0 + (a - 1.0) / 50.0
}

/// Generator for the adversarial family against the PViSA half bound:
/// Pareto(a) performance matches, brand mean `(1 + eps) E[m_(1)] / gamma`,
/// heavy-tailed valuations and a fixed one-second display duration.
pub fn worst_case_scenario_prop1(
    epsilon: f64,
    a: f64,
    gamma: f64,
    num_avs: usize,
    num_perf: usize,
) -> Result<GeneratorConfig> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidEpsilon);
    }
    if !(a > 1.0) || num_avs < 2 || num_perf < 2 || !(gamma > 0.0) {
        return Err(Error::InvalidConfig(
            "adversarial family needs a > 1, gamma > 0, at least two AVs and two MBPs".into(),
        ));
    }
    let top_mean = pareto_max_mean(a, num_perf);
    let link = 20.0e6;
    Ok(GeneratorConfig {
        num_avs,
        num_perf_mbps: num_perf,
        cache_size: Dist::constant(1.0e12),
        valuation: Dist::PowerLaw { a: adversarial_valuation_tail(a) },
        channel_gain: Dist::constant(1.0),
        av_tx_power_w: Dist::constant(1.0e-3),
        rsu_tx_power_w: Dist::constant(1.0e-3),
        noise_power_w: 1.0e-3,
        // SNR 1 gives exactly `link` bit/s, so the DT upload takes one second.
        dt_size_bits: Dist::constant(link),
        dt_cycles_per_bit: Dist::constant(0.0),
        deadline_s: Dist::constant(1.5),
        ar_layer_size_bits: Dist::constant(0.0),
        ar_cycles_per_bit: Dist::constant(0.0),
        match_quality: Dist::PowerLaw { a },
        brand_match_quality: None,
        expected_brand_match: Some((1.0 + epsilon) * top_mean / gamma),
        gamma,
        uplink_bw_hz: link,
        downlink_bw_hz: link,
        ..GeneratorConfig::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_model::validate_scenario;

    #[test]
    fn zipf_singleton_support_is_one() {
        let mut rng = stream(1, 0, 0);
        for _ in 0..100 {
            assert_eq!(sample_match_quality(&Dist::Zipf { exponent: 2.0 }, Some(1.0), &mut rng), 1.0);
        }
    }

    #[test]
    fn zero_cache_gives_zero() {
        let mut rng = stream(1, 0, 0);
        for d in [Dist::Zipf { exponent: 2.0 }, Dist::PowerLaw { a: 2.0 }, Dist::uniform(1.0, 5.0)] {
            assert_eq!(sample_match_quality(&d, Some(0.0), &mut rng), 0.0);
        }
    }

    #[test]
    fn clamped_means() {
        assert!((mean_clamped(&Dist::Zipf { exponent: 2.0 }, Some(2.0)) - 6.0 / 5.0).abs() < 1e-12);
        assert!((mean_clamped(&Dist::PowerLaw { a: 2.0 }, None) - 2.0).abs() < 1e-12);
        assert!((mean_clamped(&Dist::PowerLaw { a: 2.0 }, Some(4.0)) - 1.75).abs() < 1e-12);
        assert!((mean_clamped(&Dist::uniform(0.0, 4.0), Some(2.0)) - 1.5).abs() < 1e-12);
        assert_eq!(mean_clamped(&Dist::constant(7.0), Some(3.0)), 3.0);
    }

    #[test]
    fn pareto_max_mean_of_one_is_plain_mean() {
        assert!((pareto_max_mean(2.0, 1) - 2.0).abs() < 1e-12);
        // E[max of 2] for a = 2: 2 * Gamma(1/2) * Gamma(3) / Gamma(5/2) = 8/3.
        assert!((pareto_max_mean(2.0, 2) - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn default_scenario_shape_and_ranges() {
        let cfg = GeneratorConfig { rng_seed: 42, ..Default::default() };
        let s = sample_scenario(&cfg, 0).unwrap();
        assert_eq!(s.avs.len(), 30);
        assert_eq!(s.mbps.len(), 31);
        assert!(s.avs.iter().all(|a| (0.0..=1.0).contains(&a.valuation)));
        let s = validate_scenario(s).unwrap();
        assert_eq!(s, sample_scenario(&cfg, 0).unwrap());
    }

    #[test]
    fn constant_config_is_trial_independent() {
        let c = Dist::constant(0.5);
        let cfg = GeneratorConfig {
            num_avs: 2,
            num_perf_mbps: 2,
            cache_size: Dist::constant(3.0),
            valuation: c,
            channel_gain: c,
            av_tx_power_w: c,
            rsu_tx_power_w: c,
            dt_size_bits: c,
            dt_cycles_per_bit: c,
            deadline_s: c,
            ar_layer_size_bits: c,
            ar_cycles_per_bit: c,
            match_quality: Dist::constant(2.0),
            ..Default::default()
        };
        assert_eq!(sample_scenario(&cfg, 0).unwrap(), sample_scenario(&cfg, 99).unwrap());
    }

    #[test]
    fn invalid_epsilon() {
        assert!(matches!(worst_case_scenario_prop1(0.0, 1.05, 1.0, 2, 2), Err(Error::InvalidEpsilon)));
    }

    #[test]
    fn adversarial_brand_identity() {
        let cfg = worst_case_scenario_prop1(0.05, 1.5, 2.0, 2, 3).unwrap();
        let ratio = cfg.expected_brand_match.unwrap() * 2.0 / pareto_max_mean(1.5, 3);
        assert!((ratio - 1.05).abs() < 1e-12);
    }
}
