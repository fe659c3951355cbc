//! Wireless rates and DT/AR delays.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_model::{ArTask, DtTask, MarketScenario};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DelayBreakdown {
    pub transmit_s: f64,
    pub compute_s: f64,
}

impl DelayBreakdown {
    pub fn total(&self) -> f64 {
        self.transmit_s + self.compute_s
    }
}

/// Shannon rate `B * log2(1 + g P / noise)` in bit/s.
pub fn link_rate(bandwidth_hz: f64, gain: f64, tx_power_w: f64, noise_power_w: f64) -> Result<f64> {
    if !(noise_power_w > 0.0) {
        return Err(Error::NonPositiveNoise);
    }
    Ok(bandwidth_hz * (gain * tx_power_w / noise_power_w).ln_1p() / std::f64::consts::LN_2)
}

fn transmit(bits: f64, rate: f64) -> Result<f64> {
    if bits == 0.0 {
        Ok(0.0)
    } else if rate > 0.0 {
        Ok(bits / rate)
    } else {
        Err(Error::ZeroRate)
    }
}

pub fn dt_delays(task: &DtTask, uplink_rate: f64, cpu_freq_hz: f64) -> Result<DelayBreakdown> {
    Ok(DelayBreakdown {
        transmit_s: transmit(task.size_bits, uplink_rate)?,
        compute_s: task.size_bits * task.cycles_per_bit / cpu_freq_hz,
    })
}

/// AR delay for one basic layer plus `matched_caches` enhancement layers.
pub fn ar_delays(
    task: &ArTask,
    matched_caches: f64,
    downlink_rate: f64,
    cpu_freq_hz: f64,
    gpu_freq_hz: f64,
) -> Result<DelayBreakdown> {
    let bits = (matched_caches + 1.0) * task.layer_size_bits;
    Ok(DelayBreakdown {
        transmit_s: transmit(bits, downlink_rate)?,
        compute_s: bits / cpu_freq_hz + bits * task.cycles_per_bit / gpu_freq_hz,
    })
}

pub fn total_sync_delay(z_dt: bool, dt: &DelayBreakdown, z_ar: bool, ar: &DelayBreakdown) -> f64 {
    let mut t = 0.0;
    if z_dt {
        t += dt.total();
    }
    if z_ar {
        t += ar.total();
    }
    t
}

pub fn is_feasible(total_delay_s: f64, deadline_s: f64) -> bool {
    total_delay_s <= deadline_s
}

/// Per-scenario delay lookups. Unreachable links give infinite delay.
#[derive(Debug, Clone)]
pub struct DelayTable {
    /// DT-only delay per AV.
    pub dt_s: Vec<f64>,
    /// AR delay of one layer per (AV, MBP); the pair delay is
    /// `dt_s[i] + (h + 1) * ar_layer_s[i][k]`.
    pub ar_layer_s: Vec<Vec<f64>>,
    /// `min(deadline, threshold)` per AV.
    pub bound_s: Vec<f64>,
}

impl DelayTable {
    pub fn new(s: &MarketScenario) -> Result<Self> {
        let rsu = &s.rsu;
        let mut dt_s = Vec::with_capacity(s.avs.len());
        let mut ar_layer_s = Vec::with_capacity(s.avs.len());
        let mut bound_s = Vec::with_capacity(s.avs.len());
        for av in &s.avs {
            let up = link_rate(rsu.uplink_bw_hz, av.channel_gain, av.tx_power_w, rsu.noise_power_w)?;
            let down = link_rate(rsu.downlink_bw_hz, av.channel_gain, rsu.tx_power_w, av.noise_power_w)?;
            dt_s.push(match dt_delays(&av.dt_task, up, rsu.cpu_freq_hz) {
                Ok(d) => d.total(),
                Err(Error::ZeroRate) => f64::INFINITY,
                Err(e) => return Err(e),
            });
            let row = s
                .mbps
                .iter()
                .map(|m| match ar_delays(&m.ar_task, 0.0, down, rsu.cpu_freq_hz, rsu.gpu_freq_hz) {
                    Ok(d) => Ok(d.total()),
                    Err(Error::ZeroRate) => Ok(f64::INFINITY),
                    Err(e) => Err(e),
                })
                .collect::<Result<Vec<_>>>()?;
            ar_layer_s.push(row);
            let mut bound = av.dt_task.deadline_s;
            if let Some(t) = rsu.threshold_deadline_s {
                bound = bound.min(t);
            }
            bound_s.push(bound);
        }
        Ok(Self { dt_s, ar_layer_s, bound_s })
    }

    /// Total delay of AV `av` synchronized with MBP `mbp` at `h` matched caches.
    pub fn pair_delay(&self, av: usize, mbp: usize, h: f64) -> f64 {
        let layer = self.ar_layer_s[av][mbp];
        let ar = if layer == 0.0 { 0.0 } else { (h + 1.0) * layer };
        self.dt_s[av] + ar
    }

    /// Whether AV `av` can have its DT task served at all.
    pub fn eligible(&self, av: usize) -> bool {
        is_feasible(self.dt_s[av], self.bound_s[av])
    }

    /// Pair delay if feasible under `deadline` (further capped by the threshold).
    pub fn feasible_pair(&self, s: &MarketScenario, av: usize, mbp: usize, deadline: f64) -> Option<f64> {
        let t = self.pair_delay(av, mbp, s.matches.get(av, mbp));
        let cap = match s.rsu.threshold_deadline_s {
            Some(th) => deadline.min(th),
            None => deadline,
        };
        is_feasible(t, cap).then_some(t)
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::market_model::ScenarioBuilder;

    const DT: DtTask = DtTask { size_bits: 8.0e6, cycles_per_bit: 125.0, deadline_s: 1.0 };
    const AR: ArTask = ArTask { layer_size_bits: 8.0e6, cycles_per_bit: 125.0 };

    #[test]
    fn rate_examples() {
        assert_relative_eq!(link_rate(20e6, 1.0, 1e-3, 1e-3).unwrap(), 20e6, max_relative = 1e-15);
        assert_relative_eq!(link_rate(10e6, 3.0, 1.0, 1.0).unwrap(), 20e6, max_relative = 1e-15);
        assert_eq!(link_rate(20e6, 0.0, 5.0, 1.0).unwrap(), 0.0);
        assert!(matches!(link_rate(1.0, 1.0, 1.0, 0.0), Err(Error::NonPositiveNoise)));
    }

    #[test]
    fn dt_examples() {
        let d = dt_delays(&DT, 20e6, 3.6e9).unwrap();
        assert_relative_eq!(d.transmit_s, 0.4, max_relative = 1e-15);
        assert_relative_eq!(d.compute_s, 1.0 / 3.6, max_relative = 1e-12);
        let empty = DtTask { size_bits: 0.0, ..DT };
        assert_eq!(dt_delays(&empty, 0.0, 3.6e9).unwrap(), DelayBreakdown::default());
        assert!(matches!(dt_delays(&DT, 0.0, 3.6e9), Err(Error::ZeroRate)));
    }

    #[test]
    fn ar_examples() {
        let d = ar_delays(&AR, 1.0, 20e6, 3.6e9, 19e9).unwrap();
        assert_relative_eq!(d.transmit_s, 0.8, max_relative = 1e-15);
        assert_relative_eq!(d.compute_s, 16e6 / 3.6e9 + 16e6 * 125.0 / 19e9, max_relative = 1e-12);
        assert_relative_eq!(d.compute_s, 0.10971, epsilon = 1e-5);
        let empty = ArTask { layer_size_bits: 0.0, ..AR };
        assert_eq!(ar_delays(&empty, 0.0, 20e6, 3.6e9, 19e9).unwrap(), DelayBreakdown::default());
    }

    #[test]
    fn total_and_feasibility_examples() {
        let dt = DelayBreakdown { transmit_s: 0.4, compute_s: 0.2778 };
        let ar = DelayBreakdown { transmit_s: 0.8, compute_s: 0.1097 };
        assert_relative_eq!(total_sync_delay(true, &dt, true, &ar), 1.5875, epsilon = 1e-12);
        assert_eq!(total_sync_delay(false, &dt, false, &ar), 0.0);
        assert_relative_eq!(total_sync_delay(true, &dt, false, &ar), 0.6778, epsilon = 1e-12);
        assert!(!is_feasible(1.5875, 1.1));
        assert!(is_feasible(0.6778, 0.9));
        assert!(is_feasible(1.05, 1.05));
    }

    #[test]
    fn table_pair_delay_counts_layers() {
        let s = ScenarioBuilder::new(&[1.0], vec![vec![0.0, 3.0]]).delays(0.25, 0.125).build().unwrap();
        let d = DelayTable::new(&s).unwrap();
        assert_eq!(d.dt_s[0], 0.25);
        assert_eq!(d.pair_delay(0, 1, 3.0), 0.25 + 4.0 * 0.125);
        assert_eq!(d.feasible_pair(&s, 0, 1, 0.75), Some(0.75));
        assert_eq!(d.feasible_pair(&s, 0, 1, 0.7), None);
    }

    #[test]
    fn threshold_caps_the_deadline() {
        let mut s = ScenarioBuilder::new(&[1.0], vec![vec![0.0, 0.0]]).delays(0.5, 0.0).build().unwrap();
        s.rsu.threshold_deadline_s = Some(0.4);
        let d = DelayTable::new(&s).unwrap();
        assert!(!d.eligible(0));
    }
}
