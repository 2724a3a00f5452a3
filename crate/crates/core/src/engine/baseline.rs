// Separate-BART baseline: four independent regressions (M on X and Y on
// [X, M], within each arm), with missing potential values imputed
// cross-arm from the other arm's posterior predictive.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // float math is not inherent in core on older toolchains
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Dataset, PosteriorDraws, Standardizer};
use crate::config::BpcfConfig;
use crate::error::{Error, Result};
use crate::forest::{backfit_sweep, update_sigma, Forest, LeafScalePrior, MoveStats, NoisePrior, SweepSettings};
use crate::matrix::Matrix;
use crate::special::LN_2PI;
use crate::tree::CutpointGrid;

// Leaf prior multiplier: the response range spans ±k leaf SDs.
const LEAF_K: f64 = 2.0;

struct Regression {
    design: Matrix,
    grid: CutpointGrid,
    forest: Forest,
    fitted: Vec<f64>,
    response: Vec<f64>,
    tr: Standardizer,
    sigma: f64,
    settings: SweepSettings,
    noise: NoisePrior,
    stats: MoveStats,
}

impl Regression {
    fn new(design: Matrix, y: &[f64], config: &BpcfConfig) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::Empty("treatment arm"));
        }
        let tr = Standardizer::fit(y);
        let response: Vec<f64> = y.iter().map(|&v| tr.forward(v)).collect();
        let (lo, hi) = response.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let range = if hi > lo { hi - lo } else { 1.0 };
        let h = config.baseline_trees as f64;
        let leaf_scale = 0.5 * range / (LEAF_K * h.sqrt());
        let forest = Forest::new(config.baseline_trees, design.cols(), leaf_scale, LeafScalePrior::Fixed)?;
        Ok(Self {
            grid: CutpointGrid::from_design(&design, config.max_cutpoints),
            fitted: alloc::vec![0.0; design.rows()],
            design,
            forest,
            response,
            tr,
            sigma: 1.0,
            settings: SweepSettings {
                prior: config.mu_prior,
                moves: config.moves,
                min_leaf_n: config.min_leaf_n,
            },
            noise: NoisePrior::calibrated(config.noise_nu, config.noise_quantile, 1.0)?,
            stats: MoveStats::default(),
        })
    }

    fn iterate<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let zeros = alloc::vec![0.0; self.response.len()];
        let s = backfit_sweep(
            &mut self.forest,
            &mut self.fitted,
            &self.response,
            &zeros,
            &self.design,
            &self.grid,
            self.sigma,
            &self.settings,
            rng,
        )?;
        self.stats.merge(&s);
        let resid: Vec<f64> = self.response.iter().zip(&self.fitted).map(|(y, f)| y - f).collect();
        self.sigma = update_sigma(&resid, &self.noise, rng)?;
        Ok(())
    }

    fn log_likelihood(&self) -> f64 {
        let sd = self.sigma * self.tr.scale;
        self.response
            .iter()
            .zip(&self.fitted)
            .map(|(y, f)| -0.5 * LN_2PI - sd.ln() - 0.5 * ((y - f) / self.sigma).powi(2))
            .sum()
    }

    // Posterior predictive draw at `row`, in original units.
    fn predict<R: Rng + ?Sized>(&self, row: &[f64], noisy: bool, rng: &mut R) -> f64 {
        let mut v = self.forest.predict_row(row);
        if noisy {
            v += self.sigma * rng.sample::<f64, _>(StandardNormal);
        }
        self.tr.backward(v)
    }
}

/// Fits the separate-BART baseline and emits draws in the same shape as the
/// joint model. Imputed intermediates always include residual noise; imputed
/// outcomes include it when `noisy_impute` is set. The prognostic summaries
/// are left empty.
pub fn run_bart_pce(data: &Dataset, config: &BpcfConfig, seed: u64) -> Result<PosteriorDraws> {
    data.validate()?;
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arms = [data.control_indices(), data.treated_indices()];
    let xm = data.x.hstack(&[&data.m])?;
    let mut models = Vec::with_capacity(4);
    for idx in &arms {
        let m: Vec<f64> = idx.iter().map(|&i| data.m[i]).collect();
        models.push(Regression::new(data.x.select_rows(idx), &m, config)?);
    }
    for idx in &arms {
        let y: Vec<f64> = idx.iter().map(|&i| data.y[i]).collect();
        models.push(Regression::new(xm.select_rows(idx), &y, config)?);
    }

    let n = data.n();
    let mut draws = PosteriorDraws::default();
    let mut row = Vec::with_capacity(data.x.cols() + 1);
    for it in 0..config.iterations {
        for model in models.iter_mut() {
            model.iterate(&mut rng)?;
        }
        let loglik: f64 = models.iter().map(Regression::log_likelihood).sum();
        if !loglik.is_finite() {
            return Err(Error::NonFinite("joint log-likelihood"));
        }
        draws.loglik_trace.push(loglik);
        if it < config.burn_in || (it - config.burn_in) % config.thin != 0 {
            continue;
        }
        let (mut m0, mut m1) = (data.m.clone(), data.m.clone());
        let (mut y0, mut y1) = (data.y.clone(), data.y.clone());
        for i in 0..n {
            // the missing arm is the opposite of the observed one
            let arm = usize::from(!data.treatment[i]);
            row.clear();
            row.extend_from_slice(data.x.row(i));
            let m = models[arm].predict(&row, true, &mut rng);
            row.push(m);
            let y = models[2 + arm].predict(&row, config.noisy_impute, &mut rng);
            if arm == 1 {
                m1[i] = m;
                y1[i] = y;
            } else {
                m0[i] = m;
                y0[i] = y;
            }
        }
        draws.m0.push(m0);
        draws.m1.push(m1);
        draws.y0.push(y0);
        draws.y1.push(y1);
        draws.sigma_m.push(models[0].sigma * models[0].tr.scale);
        draws.sigma_y.push(models[2].sigma * models[2].tr.scale);
        draws.loglik.push(loglik);
    }
    draws.acceptance.forests = ["m0", "m1", "y0", "y1"]
        .iter()
        .zip(&models)
        .map(|(name, m)| (String::from(*name), m.stats))
        .collect();
    Ok(draws)
}
