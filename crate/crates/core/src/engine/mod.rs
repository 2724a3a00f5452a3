//! The joint sampler: intermediate-model BCF, latent intermediate
//! imputation, and the outcome-model BCF conditioned on principal strata.
//!
//! `M` and `Y` are standardized internally; everything a [`Chain`] emits is
//! in original units.

mod baseline;
mod draws;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

#[allow(unused_imports)] // float math is not inherent in core on older toolchains
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use baseline::run_bart_pce;
pub use draws::{AcceptanceSummary, ModifierTrace, PosteriorDraws};

use crate::bcf::{BcfGrids, BcfModel, BcfSettings};
use crate::config::{BpcfConfig, ImputeOrder, ModifierMode, ModifierScale};
use crate::error::{Error, Result};
use crate::forest::{half_cauchy_scale_for_q3, Counter, Forest, MoveStats, NoisePrior, SweepSettings};
use crate::matrix::Matrix;
use crate::special::{self, LN_2PI};
use crate::text::{push_values, Lines};
use crate::tree::{column_cutpoints, CutpointGrid};

/// Observed data: covariates, binary treatment, intermediate and outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub treatment: Vec<bool>,
    pub m: Vec<f64>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Matrix, treatment: Vec<bool>, m: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let d = Self { x, treatment, m, y };
        d.validate()?;
        Ok(d)
    }

    pub fn n(&self) -> usize {
        self.treatment.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.treatment.len();
        for len in [self.x.rows(), self.m.len(), self.y.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, found: len });
            }
        }
        if n < 2 {
            return Err(Error::Data(format!("need at least 2 units, got {n}")));
        }
        let treated = self.treatment.iter().filter(|&&a| a).count();
        if treated == 0 || treated == n {
            return Err(Error::Data("both treatment arms must be present".into()));
        }
        if !self.x.is_finite() {
            return Err(Error::NonFinite("covariates"));
        }
        if self.m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("intermediate"));
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("outcome"));
        }
        Ok(())
    }

    pub fn treated_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.treatment[i]).collect()
    }

    pub fn control_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| !self.treatment[i]).collect()
    }
}

/// Affine map to mean 0, SD 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardizer {
    pub center: f64,
    pub scale: f64,
}

impl Standardizer {
    /// A constant vector gets scale 1.
    pub fn fit(values: &[f64]) -> Self {
        let center = special::mean(values);
        let sd = special::sample_sd(values);
        let scale = if sd > 0.0 && sd.is_finite() {
            sd
        } else {
            log::warn!("constant variable: standardizing with scale 1");
            1.0
        };
        Self { center, scale }
    }

    pub fn forward(&self, v: f64) -> f64 {
        (v - self.center) / self.scale
    }

    pub fn backward(&self, v: f64) -> f64 {
        self.center + self.scale * v
    }
}

/// Sampler state. `m_mis` holds the latent `M_i(1 − A_i)` on the
/// standardized intermediate scale.
#[derive(Debug, Clone, PartialEq)]
pub struct BpcfState {
    pub m_model: BcfModel,
    pub y_model: BcfModel,
    pub m_mis: Vec<f64>,
    pub pihat: Vec<f64>,
    pub iteration: usize,
}

/// Counts from one pass of latent-intermediate imputation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ImputeStats {
    pub treated: Counter,
    /// Outcome-model evaluations made for control units (always zero: their
    /// conditional does not involve the outcome model).
    pub control_outcome_evaluations: u64,
}

/// What one iteration produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub loglik: f64,
    pub kept: bool,
    pub impute: ImputeStats,
}

// Designs, grids and transforms that stay fixed for a chain.
#[derive(Debug, Clone)]
struct Setup {
    prognostic: Matrix,
    m_modifier: Matrix,
    y_modifier: Matrix,
    m_grids: BcfGrids,
    y_grids: BcfGrids,
    m_settings: BcfSettings,
    y_settings: BcfSettings,
    treated: Vec<usize>,
    m_std: Vec<f64>,
    y_std: Vec<f64>,
    m_tr: Standardizer,
    y_tr: Standardizer,
    // columns of M(1), M(0) in the outcome modifier design
    m1_col: usize,
    m0_col: usize,
}

impl Setup {
    fn new(data: &Dataset, pihat: &[f64], config: &BpcfConfig) -> Result<Self> {
        data.validate()?;
        config.validate()?;
        if pihat.len() != data.n() {
            return Err(Error::DimensionMismatch {
                expected: data.n(),
                found: pihat.len(),
            });
        }
        if let Some((unit, &value)) = pihat.iter().enumerate().find(|(_, p)| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::PropensityOutOfRange { unit, value });
        }
        let m_tr = Standardizer::fit(&data.m);
        let y_tr = Standardizer::fit(&data.y);
        let m_std: Vec<f64> = data.m.iter().map(|&v| m_tr.forward(v)).collect();
        let y_std: Vec<f64> = data.y.iter().map(|&v| y_tr.forward(v)).collect();

        let prognostic = data.x.hstack(&[pihat])?;
        let m_modifier = data.x.clone();
        let y_modifier = match config.modifier_mode {
            ModifierMode::Full => data.x.hstack(&[&m_std, &m_std])?,
            ModifierMode::MOnly => Matrix::from_columns(&[&m_std, &m_std])?,
        };
        let (m1_col, m0_col) = (y_modifier.cols() - 2, y_modifier.cols() - 1);

        let prognostic_grid = CutpointGrid::from_design(&prognostic, config.max_cutpoints);
        let x_grid = CutpointGrid::from_design(&data.x, config.max_cutpoints);
        // M(1) and M(0) columns change every iteration; cut them on the
        // pooled observed intermediate.
        let m_cuts = column_cutpoints(&m_std, config.max_cutpoints);
        let mut y_cuts: Vec<Vec<f64>> = match config.modifier_mode {
            ModifierMode::Full => (0..data.x.cols()).map(|j| x_grid.cuts(j).to_vec()).collect(),
            ModifierMode::MOnly => Vec::new(),
        };
        y_cuts.push(m_cuts.clone());
        y_cuts.push(m_cuts);

        let settings = |noise| BcfSettings {
            mu: SweepSettings {
                prior: config.mu_prior,
                moves: config.moves,
                min_leaf_n: config.min_leaf_n,
            },
            tau: SweepSettings {
                prior: config.tau_prior,
                moves: config.moves,
                min_leaf_n: config.min_leaf_n,
            },
            noise,
        };
        let noise = NoisePrior::calibrated(config.noise_nu, config.noise_quantile, 1.0)?;
        Ok(Self {
            m_grids: BcfGrids {
                prognostic: prognostic_grid.clone(),
                modifier: x_grid,
            },
            y_grids: BcfGrids {
                prognostic: prognostic_grid,
                modifier: CutpointGrid::from_cuts(y_cuts),
            },
            m_settings: settings(noise),
            y_settings: settings(noise),
            treated: data.treated_indices(),
            prognostic,
            m_modifier,
            y_modifier,
            m_std,
            y_std,
            m_tr,
            y_tr,
            m1_col,
            m0_col,
        })
    }
}

/// Builds the initial state: root-only forests with zero leaves, residual
/// SDs of 1 on the standardized scale, and `M_mis` equal to the observed
/// intermediate.
pub fn init_state(data: &Dataset, pihat: &[f64], config: &BpcfConfig) -> Result<BpcfState> {
    let setup = Setup::new(data, pihat, config)?;
    initial_state(&setup, pihat, config)
}

fn initial_state(setup: &Setup, pihat: &[f64], config: &BpcfConfig) -> Result<BpcfState> {
    let hc = half_cauchy_scale_for_q3(2.0);
    let prog_w = setup.prognostic.cols();
    let mut m_model = BcfModel::new(config.mu_m_trees, config.tau_m_trees, prog_w, setup.m_modifier.cols(), 1.0, hc)?;
    let mut y_model = BcfModel::new(config.mu_y_trees, config.tau_y_trees, prog_w, setup.y_modifier.cols(), 1.0, hc)?;
    if config.modifier_scale == ModifierScale::Response {
        for model in [&mut m_model, &mut y_model] {
            model.modifier_scale = ModifierScale::Response;
            model.tau.leaf_scale = (model.tau.n_trees() as f64).sqrt().recip();
        }
    }
    m_model.refresh(&setup.prognostic, &setup.m_modifier.select_rows(&setup.treated))?;
    y_model.refresh(&setup.prognostic, &setup.y_modifier.select_rows(&setup.treated))?;
    Ok(BpcfState {
        m_model,
        y_model,
        m_mis: setup.m_std.clone(),
        pihat: pihat.to_vec(),
        iteration: 0,
    })
}

/// One MCMC chain over a dataset.
#[derive(Debug, Clone)]
pub struct Chain {
    data: Dataset,
    config: BpcfConfig,
    setup: Setup,
    state: BpcfState,
    rng: ChaCha8Rng,
    draws: PosteriorDraws,
    prognostic_sums: (Vec<f64>, Vec<f64>),
    forest_stats: [MoveStats; 4],
}

const FOREST_NAMES: [&str; 4] = ["mu_m", "tau_m", "mu_y", "tau_y"];

impl Chain {
    pub fn new(data: &Dataset, pihat: &[f64], config: &BpcfConfig, seed: u64) -> Result<Self> {
        let setup = Setup::new(data, pihat, config)?;
        let state = initial_state(&setup, pihat, config)?;
        Ok(Self::assemble(data, config, setup, state, ChaCha8Rng::seed_from_u64(seed)))
    }

    fn assemble(data: &Dataset, config: &BpcfConfig, mut setup: Setup, state: BpcfState, rng: ChaCha8Rng) -> Self {
        let n = data.n();
        rebuild_outcome_modifier(&mut setup, &data.treatment, &state.m_mis);
        let modifier = config.keep_modifier_forests.then(|| ModifierTrace {
            x: data.x.clone(),
            mode: config.modifier_mode,
            m_center: setup.m_tr.center,
            m_scale: setup.m_tr.scale,
            y_scale: setup.y_tr.scale,
            forests: Vec::new(),
        });
        Self {
            data: data.clone(),
            config: *config,
            setup,
            state,
            rng,
            draws: PosteriorDraws {
                modifier,
                ..PosteriorDraws::default()
            },
            prognostic_sums: (vec![0.0; n], vec![0.0; n]),
            forest_stats: [MoveStats::default(); 4],
        }
    }

    pub fn state(&self) -> &BpcfState {
        &self.state
    }

    /// Installs both models (on the standardized scale) and recomputes their
    /// cached fits. Used to run the imputation steps against fixed forests.
    pub fn replace_models(&mut self, mut m_model: BcfModel, mut y_model: BcfModel) -> Result<()> {
        let s = &self.setup;
        m_model.refresh(&s.prognostic, &s.m_modifier.select_rows(&s.treated))?;
        y_model.refresh(&s.prognostic, &s.y_modifier.select_rows(&s.treated))?;
        self.state.m_model = m_model;
        self.state.y_model = y_model;
        Ok(())
    }

    /// The standardizing maps of `M` and `Y`.
    pub fn transforms(&self) -> (Standardizer, Standardizer) {
        (self.setup.m_tr, self.setup.y_tr)
    }

    pub fn is_finished(&self) -> bool {
        self.state.iteration >= self.config.iterations
    }

    /// Current principal strata `(M(0), M(1))` per unit, in original units.
    pub fn strata(&self) -> Vec<(f64, f64)> {
        let tr = self.setup.m_tr;
        (0..self.data.n())
            .map(|i| {
                let latent = tr.backward(self.state.m_mis[i]);
                if self.data.treatment[i] {
                    (latent, self.data.m[i])
                } else {
                    (self.data.m[i], latent)
                }
            })
            .collect()
    }

    /// Runs one iteration in the configured order and records a draw when
    /// the iteration is past burn-in and on the thinning lattice.
    pub fn step(&mut self) -> Result<IterationRecord> {
        let impute = match self.config.impute_order {
            ImputeOrder::AfterIntermediateModel => {
                self.fit_intermediate()?;
                let s = self.impute_m_mis()?;
                self.fit_outcome()?;
                s
            }
            ImputeOrder::BeforeIntermediateModel => {
                let s = self.impute_m_mis()?;
                self.fit_intermediate()?;
                self.fit_outcome()?;
                s
            }
        };
        let loglik = self.log_likelihood();
        if !loglik.is_finite() {
            return Err(Error::NonFinite("joint log-likelihood"));
        }
        self.draws.loglik_trace.push(loglik);
        self.draws.acceptance.m_mis.proposed += impute.treated.proposed;
        self.draws.acceptance.m_mis.accepted += impute.treated.accepted;
        self.draws.acceptance.control_outcome_evaluations += impute.control_outcome_evaluations;

        let it = self.state.iteration;
        let kept = it >= self.config.burn_in && (it - self.config.burn_in) % self.config.thin == 0;
        if kept {
            self.record(loglik);
        }
        self.state.iteration += 1;
        Ok(IterationRecord {
            iteration: it,
            loglik,
            kept,
            impute,
        })
    }

    fn fit_intermediate(&mut self) -> Result<()> {
        let s = &self.setup;
        let r = self.state.m_model.fit_iteration(
            &s.m_std,
            &s.treated,
            &s.prognostic,
            &s.m_modifier,
            &s.m_grids,
            &s.m_settings,
            &mut self.rng,
        )?;
        self.forest_stats[0].merge(&r.mu_moves);
        self.forest_stats[1].merge(&r.tau_moves);
        Ok(())
    }

    fn fit_outcome(&mut self) -> Result<()> {
        let s = &self.setup;
        let r = self.state.y_model.fit_iteration(
            &s.y_std,
            &s.treated,
            &s.prognostic,
            &s.y_modifier,
            &s.y_grids,
            &s.y_settings,
            &mut self.rng,
        )?;
        self.forest_stats[2].merge(&r.mu_moves);
        self.forest_stats[3].merge(&r.tau_moves);
        Ok(())
    }

    /// Redraws every unit's latent intermediate, then rebuilds the outcome
    /// modifier design from the updated strata.
    ///
    /// Control units draw `M(1)` from `N(μ_M + τ_M, σ_m²)` directly. Treated
    /// units make one independence proposal from `N(μ_M, σ_m²)` accepted with
    /// the ratio of outcome likelihoods.
    pub fn impute_m_mis(&mut self) -> Result<ImputeStats> {
        let mut stats = ImputeStats::default();
        let s = &mut self.setup;
        let mm = &self.state.m_model;
        let ym = &self.state.y_model;
        let (sigma_m, sigma_y) = (mm.sigma, ym.sigma);
        let mu_m = mm.mu_fitted();
        let mu_y = ym.mu_fitted();
        for i in 0..self.data.n() {
            let z: f64 = self.rng.sample(StandardNormal);
            if !self.data.treatment[i] {
                let mean = mu_m[i] + mm.tau.predict_row(s.m_modifier.row(i));
                let draw = mean + sigma_m * z;
                if !draw.is_finite() {
                    return Err(Error::NonFinite("latent intermediate draw"));
                }
                self.state.m_mis[i] = draw;
                continue;
            }
            let proposal = mu_m[i] + sigma_m * z;
            let old = self.state.m_mis[i];
            let row = s.y_modifier.row_mut(i);
            row[s.m0_col] = proposal;
            let tau_new = ym.tau.predict_row(row);
            row[s.m0_col] = old;
            let tau_old = ym.tau.predict_row(row);
            let target = s.y_std[i] - mu_y[i];
            let log_ratio = ((target - tau_old).powi(2) - (target - tau_new).powi(2)) / (2.0 * sigma_y * sigma_y);
            if !(proposal.is_finite() && log_ratio.is_finite()) {
                return Err(Error::NonFinite("latent intermediate acceptance ratio"));
            }
            stats.treated.proposed += 1;
            let u: f64 = self.rng.random();
            if log_ratio >= 0.0 || u.ln() < log_ratio {
                stats.treated.accepted += 1;
                self.state.m_mis[i] = proposal;
            }
        }
        rebuild_outcome_modifier(&mut self.setup, &self.data.treatment, &self.state.m_mis);
        Ok(stats)
    }

    /// Joint observed-data log-likelihood in original units.
    pub fn log_likelihood(&self) -> f64 {
        let s = &self.setup;
        let part = |model: &BcfModel, y: &[f64], scale: f64| {
            let sd = model.sigma * scale;
            model
                .residuals(y, &s.treated)
                .iter()
                .map(|r| -0.5 * LN_2PI - sd.ln() - 0.5 * (r / model.sigma).powi(2))
                .sum::<f64>()
        };
        part(&self.state.m_model, &s.m_std, s.m_tr.scale) + part(&self.state.y_model, &s.y_std, s.y_tr.scale)
    }

    /// Draws `(Y(0), Y(1))` in original units. Observed slots hold the data;
    /// the missing slot is `μ_Y + a·τ_Y(strata) + ε` with the noise term
    /// included when `noisy_impute` is set.
    pub fn impute_potential_outcomes(&mut self) -> (Vec<f64>, Vec<f64>) {
        let n = self.data.n();
        let (mut y0, mut y1) = (self.data.y.clone(), self.data.y.clone());
        let ym = &self.state.y_model;
        let mu = ym.mu_fitted();
        for i in 0..n {
            let noise = if self.config.noisy_impute {
                ym.sigma * self.rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            if self.data.treatment[i] {
                y0[i] = self.setup.y_tr.backward(mu[i] + noise);
            } else {
                let tau = ym.tau.predict_row(self.setup.y_modifier.row(i));
                y1[i] = self.setup.y_tr.backward(mu[i] + tau + noise);
            }
        }
        (y0, y1)
    }

    fn record(&mut self, loglik: f64) {
        let (m0, m1): (Vec<f64>, Vec<f64>) = self.strata().into_iter().unzip();
        let (y0, y1) = self.impute_potential_outcomes();
        let s = &self.setup;
        for (acc, v) in self.prognostic_sums.0.iter_mut().zip(self.state.m_model.mu_fitted()) {
            *acc += s.m_tr.backward(*v);
        }
        for (acc, v) in self.prognostic_sums.1.iter_mut().zip(self.state.y_model.mu_fitted()) {
            *acc += s.y_tr.backward(*v);
        }
        let d = &mut self.draws;
        d.m0.push(m0);
        d.m1.push(m1);
        d.y0.push(y0);
        d.y1.push(y1);
        d.sigma_m.push(self.state.m_model.sigma * s.m_tr.scale);
        d.sigma_y.push(self.state.y_model.sigma * s.y_tr.scale);
        d.loglik.push(loglik);
        if let Some(trace) = d.modifier.as_mut() {
            trace.forests.push(self.state.y_model.tau.clone());
        }
    }

    /// Runs the remaining iterations and returns the draws kept by this
    /// chain object (a resumed chain only holds draws made after resuming).
    pub fn run_to_end(mut self) -> Result<PosteriorDraws> {
        while !self.is_finished() {
            self.step()?;
        }
        Ok(self.finish())
    }

    pub fn finish(mut self) -> PosteriorDraws {
        let kept = self.draws.m0.len().max(1) as f64;
        let (pm, py) = core::mem::take(&mut self.prognostic_sums);
        self.draws.prognostic_m = pm.into_iter().map(|v| v / kept).collect();
        self.draws.prognostic_y = py.into_iter().map(|v| v / kept).collect();
        self.draws.acceptance.forests = FOREST_NAMES
            .iter()
            .zip(self.forest_stats)
            .map(|(n, s)| (String::from(*n), s))
            .collect();
        self.draws
    }

    /// Serializes the sampler state and RNG position. Draws already kept are
    /// not included.
    pub fn checkpoint(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "bpcf-chain v1");
        let _ = writeln!(out, "iteration {}", self.state.iteration);
        let _ = write!(out, "rng ");
        for b in self.rng.get_seed() {
            let _ = write!(out, "{b:02x}");
        }
        let _ = writeln!(out, " {} {}", self.rng.get_stream(), self.rng.get_word_pos());
        for model in [&self.state.m_model, &self.state.y_model] {
            model.mu.write_checkpoint(model.sigma, &mut out);
            push_values(&mut out, "mu_fit", model.mu_fitted());
            model.tau.write_checkpoint(model.sigma, &mut out);
        }
        push_values(&mut out, "m_mis", &self.state.m_mis);
        out
    }

    /// Restores a chain from [`Chain::checkpoint`] output. The data, propensity
    /// scores and config must be those the chain was created with.
    pub fn resume(data: &Dataset, pihat: &[f64], config: &BpcfConfig, text: &str) -> Result<Self> {
        let setup = Setup::new(data, pihat, config)?;
        let mut state = initial_state(&setup, pihat, config)?;
        let mut lines = Lines::new(text);
        if lines.next_fields()? != ["bpcf-chain", "v1"] {
            return Err(lines.err("unsupported chain checkpoint header"));
        }
        state.iteration = lines.value("iteration")?;
        let r = lines.expect("rng")?;
        let hex = r.first().copied().unwrap_or_default();
        if hex.len() != 64 || !hex.is_ascii() {
            return Err(lines.err("rng seed must be 64 hex digits"));
        }
        let mut seed = [0u8; 32];
        for (k, b) in seed.iter_mut().enumerate() {
            *b = u8::from_str_radix(&hex[2 * k..2 * k + 2], 16).map_err(|_| lines.err("bad rng seed"))?;
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(lines.parse(r.get(1))?);
        rng.set_word_pos(lines.parse(r.get(2))?);

        for (model, widths) in [
            (&mut state.m_model, (setup.prognostic.cols(), setup.m_modifier.cols())),
            (&mut state.y_model, (setup.prognostic.cols(), setup.y_modifier.cols())),
        ] {
            let (mu, sigma) = Forest::read_lines(&mut lines)?;
            let fit = lines.values::<f64>("mu_fit")?;
            let (tau, _) = Forest::read_lines(&mut lines)?;
            if mu.width() != widths.0 || tau.width() != widths.1 || fit.len() != data.n() {
                return Err(lines.err("checkpoint does not match the data or config"));
            }
            if mu.n_trees() != model.mu.n_trees() || tau.n_trees() != model.tau.n_trees() {
                return Err(lines.err("checkpoint tree counts differ from the config"));
            }
            model.mu = mu;
            model.tau = tau;
            model.sigma = sigma;
            model.set_mu_fitted(fit);
        }
        let m_mis = lines.values::<f64>("m_mis")?;
        if m_mis.len() != data.n() {
            return Err(lines.err("m_mis length differs from the data"));
        }
        state.m_mis = m_mis;
        Ok(Self::assemble(data, config, setup, state, rng))
    }
}

fn rebuild_outcome_modifier(setup: &mut Setup, treatment: &[bool], m_mis: &[f64]) {
    for (i, &a) in treatment.iter().enumerate() {
        let (m1, m0) = if a {
            (setup.m_std[i], m_mis[i])
        } else {
            (m_mis[i], setup.m_std[i])
        };
        let row = setup.y_modifier.row_mut(i);
        row[setup.m1_col] = m1;
        row[setup.m0_col] = m0;
    }
}

/// Fits the joint model and returns the kept draws.
pub fn run(data: &Dataset, pihat: &[f64], config: &BpcfConfig, seed: u64) -> Result<PosteriorDraws> {
    Chain::new(data, pihat, config, seed)?.run_to_end()
}
