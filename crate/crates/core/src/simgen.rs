//! Simulation designs with oracle potential values.

use alloc::vec::Vec;

#[allow(unused_imports)] // float math is not inherent in core on older toolchains
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::engine::Dataset;
use crate::error::{Error, Result};
use crate::estimands::StratumInterval;
use crate::matrix::Matrix;
use crate::special::{mean, sample_sd, std_normal_cdf};

/// Fixed strata of `M(1) − M(0)` for scenario I.
pub const SCENARIO1_INTERVALS: [(f64, f64); 5] = [(2.00, 2.26), (2.26, 2.53), (2.53, 2.84), (2.84, 3.29), (3.29, 5.09)];

/// Published true effects for scenario I: the average intermediate effect,
/// then the PCE within each of [`SCENARIO1_INTERVALS`].
pub const SCENARIO1_TRUTHS: [f64; 6] = [2.79, -4.54, -5.71, -7.18, -9.28, -14.11];

pub fn scenario1_intervals() -> Vec<StratumInterval> {
    SCENARIO1_INTERVALS
        .iter()
        .map(|&(l, u)| StratumInterval {
            lower: l,
            upper: u,
            lower_closed: false,
        })
        .collect()
}

/// A simulated dataset with every unit's potential values and true
/// propensity.
///
/// For very small `n` one arm may be empty, in which case `data` does not
/// pass [`Dataset::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub data: Dataset,
    pub m0: Vec<f64>,
    pub m1: Vec<f64>,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub propensity: Vec<f64>,
}

impl SimulatedData {
    pub fn intermediate_effects(&self) -> Vec<f64> {
        self.m1.iter().zip(&self.m0).map(|(a, b)| a - b).collect()
    }

    pub fn outcome_effects(&self) -> Vec<f64> {
        self.y1.iter().zip(&self.y0).map(|(a, b)| a - b).collect()
    }

    /// Sample PCE over `interval` from the oracle columns.
    pub fn sample_pce(&self, interval: &StratumInterval) -> Option<f64> {
        let (mut s, mut c) = (0.0, 0usize);
        for i in 0..self.m0.len() {
            if interval.contains(self.m1[i] - self.m0[i]) {
                s += self.y1[i] - self.y0[i];
                c += 1;
            }
        }
        (c > 0).then(|| s / c as f64)
    }
}

fn h1(x: f64) -> f64 {
    if x >= 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn h2(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn assemble(rows: Vec<Vec<f64>>, a: Vec<bool>, po: [Vec<f64>; 4], propensity: Vec<f64>) -> Result<SimulatedData> {
    let [m0, m1, y0, y1] = po;
    let pick = |v0: &[f64], v1: &[f64]| -> Vec<f64> { a.iter().enumerate().map(|(i, &t)| if t { v1[i] } else { v0[i] }).collect() };
    let data = Dataset {
        x: Matrix::from_rows(&rows)?,
        m: pick(&m0, &m1),
        y: pick(&y0, &y1),
        treatment: a,
    };
    Ok(SimulatedData {
        data,
        m0,
        m1,
        y0,
        y1,
        propensity,
    })
}

/// Scenario I: seven standard-normal confounders, `M(1) − M(0) = 2 + |x₅|`
/// and `Y(1) − Y(0) = −(M(1) − M(0))²`. Noise terms are shared across arms.
pub fn gen_scenario1(n: usize, seed: u64) -> Result<SimulatedData> {
    if n < 2 {
        return Err(Error::Config(alloc::format!("need n >= 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut a = Vec::with_capacity(n);
    let mut po: [Vec<f64>; 4] = Default::default();
    let mut propensity = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..7).map(|_| normal(&mut rng)).collect();
        let psi = 0.1 * normal(&mut rng);
        let eps = 0.3 * normal(&mut rng);
        let p = std_normal_cdf(0.5 + h1(x[0]) + h2(x[1]) - 0.5 * (x[2] - 1.0).abs() + 1.5 * x[3] * x[4]);
        let t = rng.random::<f64>() < p;

        let m_base = 0.5 * h1(x[0]) + 0.5 * h2(x[1]) + (x[2] + 1.0).abs() + 1.5 * x[3] - (0.3 * x[4]).exp() + psi;
        let m0 = m_base;
        let m1 = m_base + 2.0 + x[4].abs();
        let y_base = h1(x[0]) + 1.5 * h2(x[1]) + 2.0 * (x[2] + 1.0).abs() + 2.0 * x[3] + (0.5 * x[4]).exp()
            - 0.5 * x[5].abs()
            - (x[6] + 1.0).abs()
            + eps;
        let d = m1 - m0;
        po[0].push(m0);
        po[1].push(m1);
        po[2].push(y_base);
        po[3].push(y_base - d * d);
        propensity.push(p);
        a.push(t);
        rows.push(x);
    }
    assemble(rows, a, po, propensity)
}

/// Monte-Carlo population PCE of scenario I over `interval`. Only `x₅`
/// drives the effects, so only it is simulated.
pub fn true_pce_oracle(interval: &StratumInterval, n_mc: usize, seed: u64) -> Result<f64> {
    if n_mc < 100_000 {
        return Err(Error::Config(alloc::format!("oracle needs at least 1e5 draws, got {n_mc}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut s, mut c) = (0.0, 0usize);
    for _ in 0..n_mc {
        let d = 2.0 + normal(&mut rng).abs();
        if interval.contains(d) {
            s -= d * d;
            c += 1;
        }
    }
    if c == 0 {
        return Err(Error::Empty("oracle stratum"));
    }
    Ok(s / c as f64)
}

/// Targeted-selection design: treatment probability increases with the
/// unit's expected untreated outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetedSelection {
    /// Probit slope on the standardized untreated-outcome mean.
    pub strength: f64,
    /// Probit slope on a covariate unrelated to the outcome.
    pub nuisance: f64,
    pub outcome_noise: f64,
    pub intermediate_noise: f64,
}

impl Default for TargetedSelection {
    fn default() -> Self {
        Self {
            strength: 1.0,
            nuisance: 0.5,
            outcome_noise: 0.3,
            intermediate_noise: 0.1,
        }
    }
}

/// Untreated outcome mean of the targeted-selection design.
pub fn targeted_prognostic(x: &[f64]) -> f64 {
    1.0 + 2.0 * x[0] + (core::f64::consts::PI * x[1]).sin() + 0.5 * x[2] + x[3].abs()
}

/// Five covariates: two uniform on (0, 1), three standard normal; `x₅`
/// enters selection only.
pub fn gen_targeted_selection(n: usize, config: &TargetedSelection, seed: u64) -> Result<SimulatedData> {
    if n < 2 {
        return Err(Error::Config(alloc::format!("need n >= 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut x = Vec::with_capacity(5);
            x.push(rng.random::<f64>());
            x.push(rng.random::<f64>());
            for _ in 0..3 {
                x.push(normal(&mut rng));
            }
            x
        })
        .collect();
    let mu: Vec<f64> = rows.iter().map(|x| targeted_prognostic(x)).collect();
    let (c, s) = (mean(&mu), sample_sd(&mu).max(f64::MIN_POSITIVE));
    let mut a = Vec::with_capacity(n);
    let mut po: [Vec<f64>; 4] = Default::default();
    let mut propensity = Vec::with_capacity(n);
    for (x, &mu_i) in rows.iter().zip(&mu) {
        let p = std_normal_cdf(config.strength * (mu_i - c) / s + config.nuisance * x[4]);
        let t = rng.random::<f64>() < p;
        let psi = config.intermediate_noise * normal(&mut rng);
        let eps = config.outcome_noise * normal(&mut rng);
        let m0 = 0.5 * x[0] + x[2] + psi;
        let m1 = m0 + 1.0 + x[1];
        let y0 = mu_i + eps;
        let y1 = y0 - 1.5 * (m1 - m0);
        po[0].push(m0);
        po[1].push(m1);
        po[2].push(y0);
        po[3].push(y1);
        a.push(t);
        propensity.push(p);
    }
    assemble(rows, a, po, propensity)
}
