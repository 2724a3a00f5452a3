//! Goodness-of-fit and association statistics used to check samplers.

use alloc::vec::Vec;

#[allow(unused_imports)] // float math is not inherent in core on older toolchains
use num_traits::Float;

use crate::error::{Error, Result};
use crate::special::chi_squared_sf;

/// One-sample Kolmogorov–Smirnov statistic of `sample` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Asymptotic Kolmogorov p-value with Stephens' small-sample correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    kolmogorov_sf(lambda)
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// KS test p-value of `sample` against `cdf`.
pub fn ks_test<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    ks_p_value(ks_statistic(sample, cdf), sample.len())
}

/// Pearson χ² goodness-of-fit p-value with `k − 1 − fitted` degrees of freedom.
pub fn chi_squared_gof(observed: &[u64], expected_probs: &[f64], fitted: usize) -> Result<f64> {
    if observed.len() != expected_probs.len() {
        return Err(Error::DimensionMismatch {
            expected: expected_probs.len(),
            found: observed.len(),
        });
    }
    let k = observed.len();
    if k < 2 + fitted {
        return Err(Error::Config("too few categories for the χ² test".into()));
    }
    let n: u64 = observed.iter().sum();
    let mut stat = 0.0;
    for (&o, &p) in observed.iter().zip(expected_probs) {
        let e = n as f64 * p;
        if !(e > 0.0) {
            return Err(Error::Config("expected counts must be positive".into()));
        }
        stat += (o as f64 - e).powi(2) / e;
    }
    Ok(chi_squared_sf(stat, (k - 1 - fitted) as f64))
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = alloc::vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}
