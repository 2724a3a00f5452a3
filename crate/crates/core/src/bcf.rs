//! Bayesian causal forest: `E[response] = μ(x, π̂) + a · τ(modifier)`.
//!
//! The prognostic forest sees every row through the design `[X, π̂]`; the
//! modifier forest only enters the likelihood of treated rows and is fit on
//! those alone. The modifier leaf scale is tied to the residual SD as
//! `σ / √H_τ`; the prognostic leaf scale has a half-Cauchy prior.

use alloc::vec::Vec;

#[allow(unused_imports)] // float math is not inherent in core on older toolchains
use num_traits::Float;
use rand::Rng;

use crate::config::ModifierScale;
use crate::error::{Error, Result};
use crate::forest::{
    backfit_sweep, predict_forest, update_leaf_scale, update_sigma, Forest, LeafScalePrior, MoveStats,
    NoisePrior, SweepSettings,
};
use crate::matrix::Matrix;
use crate::tree::CutpointGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct BcfModel {
    pub mu: Forest,
    pub tau: Forest,
    pub sigma: f64,
    pub modifier_scale: ModifierScale,
    // μ over every row of the prognostic design
    mu_fit: Vec<f64>,
    // τ over the treated rows, in treated order
    tau_fit: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BcfGrids {
    pub prognostic: CutpointGrid,
    pub modifier: CutpointGrid,
}

#[derive(Debug, Clone, Copy)]
pub struct BcfSettings {
    pub mu: SweepSettings,
    pub tau: SweepSettings,
    pub noise: NoisePrior,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FitReport {
    pub mu_moves: MoveStats,
    pub tau_moves: MoveStats,
    pub treated_rows: usize,
}

impl BcfModel {
    /// Root-only forests with zero leaves. `mu_hc_scale` is the half-Cauchy
    /// scale of the prognostic leaf SD, which starts at `1/√H_μ`.
    pub fn new(
        mu_trees: usize,
        tau_trees: usize,
        prognostic_width: usize,
        modifier_width: usize,
        sigma: f64,
        mu_hc_scale: f64,
    ) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config("initial residual SD must be positive".into()));
        }
        let mu = Forest::new(
            mu_trees,
            prognostic_width,
            (mu_trees as f64).sqrt().recip(),
            LeafScalePrior::HalfCauchy { scale: mu_hc_scale },
        )?;
        let tau = Forest::new(
            tau_trees,
            modifier_width,
            sigma / (tau_trees.max(1) as f64).sqrt(),
            LeafScalePrior::Fixed,
        )?;
        Ok(Self {
            mu,
            tau,
            sigma,
            modifier_scale: ModifierScale::Residual,
            mu_fit: Vec::new(),
            tau_fit: Vec::new(),
        })
    }

    /// Current μ over the prognostic design, as of the last refresh or sweep.
    pub fn mu_fitted(&self) -> &[f64] {
        &self.mu_fit
    }

    /// Current τ over the treated rows (treated order).
    pub fn tau_fitted(&self) -> &[f64] {
        &self.tau_fit
    }

    pub(crate) fn set_mu_fitted(&mut self, fit: Vec<f64>) {
        self.mu_fit = fit;
    }

    /// Recomputes cached fits from the forests.
    pub fn refresh(&mut self, prognostic: &Matrix, modifier_treated: &Matrix) -> Result<()> {
        self.mu_fit = predict_forest(&self.mu, prognostic)?;
        self.tau_fit = predict_forest(&self.tau, modifier_treated)?;
        Ok(())
    }

    pub fn conditional_mean(&self, prognostic_row: &[f64], treated: bool, modifier_row: &[f64]) -> Result<f64> {
        let mu = self.mu.evaluate(prognostic_row)?;
        let tau = self.tau.evaluate(modifier_row)?;
        Ok(if treated { mu + tau } else { mu })
    }

    /// Backfits μ against `y − a·τ`.
    pub fn update_prognostic<R: Rng + ?Sized>(
        &mut self,
        y: &[f64],
        treated: &[usize],
        prognostic: &Matrix,
        grid: &CutpointGrid,
        settings: &SweepSettings,
        rng: &mut R,
    ) -> Result<MoveStats> {
        let mut offset = alloc::vec![0.0; y.len()];
        for (k, &i) in treated.iter().enumerate() {
            offset[i] = self.tau_fit[k];
        }
        if self.mu_fit.len() != y.len() {
            self.mu_fit = predict_forest(&self.mu, prognostic)?;
        }
        backfit_sweep(&mut self.mu, &mut self.mu_fit, y, &offset, prognostic, grid, self.sigma, settings, rng)
    }

    /// Backfits τ on the treated rows against `y − μ`.
    pub fn update_modifier<R: Rng + ?Sized>(
        &mut self,
        y: &[f64],
        treated: &[usize],
        modifier_treated: &Matrix,
        grid: &CutpointGrid,
        settings: &SweepSettings,
        rng: &mut R,
    ) -> Result<MoveStats> {
        let response: Vec<f64> = treated.iter().map(|&i| y[i]).collect();
        let offset: Vec<f64> = treated.iter().map(|&i| self.mu_fit[i]).collect();
        if self.tau_fit.len() != treated.len() {
            self.tau_fit = predict_forest(&self.tau, modifier_treated)?;
        }
        backfit_sweep(
            &mut self.tau,
            &mut self.tau_fit,
            &response,
            &offset,
            modifier_treated,
            grid,
            self.sigma,
            settings,
            rng,
        )
    }

    pub fn residuals(&self, y: &[f64], treated: &[usize]) -> Vec<f64> {
        let mut r: Vec<f64> = y.iter().zip(&self.mu_fit).map(|(y, m)| y - m).collect();
        for (k, &i) in treated.iter().enumerate() {
            r[i] -= self.tau_fit[k];
        }
        r
    }

    /// One full update: μ sweep, τ sweep, σ draw, τ leaf scale reset to
    /// `σ/√H_τ`, then the μ leaf-scale slice update.
    #[allow(clippy::too_many_arguments)]
    pub fn fit_iteration<R: Rng + ?Sized>(
        &mut self,
        y: &[f64],
        treated: &[usize],
        prognostic: &Matrix,
        modifier: &Matrix,
        grids: &BcfGrids,
        settings: &BcfSettings,
        rng: &mut R,
    ) -> Result<FitReport> {
        if prognostic.rows() != y.len() || modifier.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                found: if prognostic.rows() != y.len() { prognostic.rows() } else { modifier.rows() },
            });
        }
        let modifier_treated = modifier.select_rows(treated);
        self.tau_fit = predict_forest(&self.tau, &modifier_treated)?;
        if treated.is_empty() {
            log::warn!("no treated rows: modifier forest is drawn from its prior");
        }

        let mu_moves = self.update_prognostic(y, treated, prognostic, &grids.prognostic, &settings.mu, rng)?;
        let tau_moves = self.update_modifier(y, treated, &modifier_treated, &grids.modifier, &settings.tau, rng)?;

        let resid = self.residuals(y, treated);
        self.sigma = update_sigma(&resid, &settings.noise, rng)?;
        if self.modifier_scale == ModifierScale::Residual {
            self.tau.leaf_scale = self.sigma / (self.tau.n_trees() as f64).sqrt();
        }
        if let LeafScalePrior::HalfCauchy { scale } = self.mu.leaf_scale_prior {
            let leaves = self.mu.leaf_values();
            self.mu.leaf_scale = update_leaf_scale(self.mu.leaf_scale, &leaves, scale, rng);
        }
        Ok(FitReport {
            mu_moves,
            tau_moves,
            treated_rows: treated.len(),
        })
    }
}
