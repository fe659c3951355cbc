//! Summary statistics with deterministic, order-fixed summation.

use serde::{Deserialize, Serialize};

/// z-score of a two-sided 99% normal interval.
pub const Z99: f64 = 2.576;

/// Neumaier-compensated sum in slice order.
pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    /// 99% normal-approximation half-width.
    pub ci: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Summary { n, mean: f64::NAN, sd: f64::NAN, ci: f64::NAN };
        }
        let mean = compensated_sum(xs.iter().copied()) / n as f64;
        let sd = if n > 1 {
            (compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Summary { n, mean, sd, ci: Z99 * sd / (n as f64).sqrt() }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.ci
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.ci
    }
}

/// Ratio of means `E[x]/E[y]` with a delta-method 99% half-width.
pub fn ratio_of_means(x: &[f64], y: &[f64]) -> Summary {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    let sx = Summary::of(x);
    let sy = Summary::of(y);
    let r = sx.mean / sy.mean;
    let resid: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - r * b).collect();
    let sr = Summary::of(&resid);
    let sd = sr.sd / sy.mean.abs();
    Summary { n, mean: r, sd, ci: Z99 * sd / (n as f64).sqrt() }
}

/// Sample variance (n - 1 denominator); 0 for fewer than two points.
pub fn variance(xs: &[f64]) -> f64 {
    let s = Summary::of(xs);
    if xs.len() < 2 {
        0.0
    } else {
        s.sd * s.sd
    }
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let rx = ranks(x);
    let ry = ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}
