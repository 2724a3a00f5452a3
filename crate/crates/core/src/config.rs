//! Sampler configuration and the named presets.

use alloc::format;

use crate::error::{Error, Result};
use crate::tree::{MoveProbabilities, TreePrior};

/// Inputs of the outcome model's modifier function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModifierMode {
    /// Covariates plus the principal stratum: `[X, M(1), M(0)]`.
    #[default]
    Full,
    /// Principal stratum only: `[M(1), M(0)]`.
    MOnly,
}

/// Where the latent intermediate is imputed within an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImputeOrder {
    /// Update the intermediate model, impute, then update the outcome model.
    #[default]
    AfterIntermediateModel,
    /// Impute first, then update both models.
    BeforeIntermediateModel,
}

/// What the modifier forest's leaf SD `σ₀ = s/√H_τ` is tied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModifierScale {
    /// `s` is the current residual SD, reset after every σ draw.
    Residual,
    /// `s` is the SD of the observed response (1 on the standardized scale).
    #[default]
    Response,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// 200 prognostic / 50 modifier trees.
    PaperDefault,
    /// 150 prognostic / 50 modifier trees, as in the simulation study.
    PaperSim,
}

impl Profile {
    pub fn name(&self) -> &'static str {
        match self {
            Profile::PaperDefault => "paper_default",
            Profile::PaperSim => "paper_sim",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "paper_default" => Some(Profile::PaperDefault),
            "paper_sim" => Some(Profile::PaperSim),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpcfConfig {
    pub mu_m_trees: usize,
    pub tau_m_trees: usize,
    pub mu_y_trees: usize,
    pub tau_y_trees: usize,
    pub mu_prior: TreePrior,
    pub tau_prior: TreePrior,
    pub moves: MoveProbabilities,
    pub min_leaf_n: usize,
    pub max_cutpoints: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub modifier_mode: ModifierMode,
    pub modifier_scale: ModifierScale,
    pub impute_order: ImputeOrder,
    /// Add residual noise when imputing the missing potential outcome.
    pub noisy_impute: bool,
    /// Inverse-gamma σ² prior degrees of freedom.
    pub noise_nu: f64,
    /// Prior probability that σ is below the response SD.
    pub noise_quantile: f64,
    /// Trees per regression in the separate-BART baseline.
    pub baseline_trees: usize,
    /// Keep every kept draw's outcome modifier forest (needed for surfaces).
    pub keep_modifier_forests: bool,
}

impl Default for BpcfConfig {
    fn default() -> Self {
        Self::profile(Profile::PaperDefault)
    }
}

impl BpcfConfig {
    pub fn profile(profile: Profile) -> Self {
        let prognostic = match profile {
            Profile::PaperDefault => 200,
            Profile::PaperSim => 150,
        };
        Self {
            mu_m_trees: prognostic,
            tau_m_trees: 50,
            mu_y_trees: prognostic,
            tau_y_trees: 50,
            mu_prior: TreePrior::PROGNOSTIC,
            tau_prior: TreePrior::MODIFIER,
            moves: MoveProbabilities::default(),
            min_leaf_n: 5,
            max_cutpoints: 100,
            iterations: 10_000,
            burn_in: 5_000,
            thin: 1,
            modifier_mode: ModifierMode::Full,
            modifier_scale: ModifierScale::Response,
            impute_order: ImputeOrder::AfterIntermediateModel,
            noisy_impute: true,
            noise_nu: 3.0,
            noise_quantile: 0.9,
            baseline_trees: 200,
            keep_modifier_forests: false,
        }
    }

    pub fn kept_draws(&self) -> usize {
        if self.iterations <= self.burn_in || self.thin == 0 {
            return 0;
        }
        (self.iterations - self.burn_in).div_ceil(self.thin)
    }

    pub fn validate(&self) -> Result<()> {
        let trees = [self.mu_m_trees, self.tau_m_trees, self.mu_y_trees, self.tau_y_trees, self.baseline_trees];
        if trees.contains(&0) {
            return Err(Error::Config("every forest needs at least one tree".into()));
        }
        if self.iterations <= self.burn_in {
            return Err(Error::Config(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        for (name, p) in [("mu", self.mu_prior), ("tau", self.tau_prior)] {
            if !(p.alpha > 0.0 && p.alpha < 1.0 && p.beta >= 0.0) {
                return Err(Error::Config(format!("{name} split prior needs alpha in (0,1), beta >= 0")));
            }
        }
        if self.max_cutpoints == 0 {
            return Err(Error::Config("max_cutpoints must be positive".into()));
        }
        if !(self.noise_nu > 0.0 && self.noise_quantile > 0.0 && self.noise_quantile < 1.0) {
            return Err(Error::Config("noise prior needs nu > 0 and quantile in (0,1)".into()));
        }
        self.moves.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_profile_regularizes_the_modifier() {
        let c = BpcfConfig::default();
        assert_eq!((c.mu_m_trees, c.mu_y_trees), (200, 200));
        assert_eq!((c.tau_m_trees, c.tau_y_trees), (50, 50));
        assert!(c.mu_m_trees > c.tau_m_trees);
        assert_eq!(c.tau_prior, TreePrior { alpha: 0.25, beta: 3.0 });
        assert_eq!(c.mu_prior, TreePrior { alpha: 0.95, beta: 2.0 });
        let s = BpcfConfig::profile(Profile::PaperSim);
        assert_eq!((s.mu_m_trees, s.tau_m_trees, s.iterations, s.burn_in), (150, 50, 10_000, 5_000));
        assert_eq!((c.modifier_scale, c.modifier_mode), (ModifierScale::Response, ModifierMode::Full));
        assert!(c.noisy_impute);
    }

    #[test]
    fn validation() {
        let mut c = BpcfConfig::default();
        c.iterations = 10;
        c.burn_in = 5;
        assert_eq!(c.kept_draws(), 5);
        c.thin = 2;
        assert_eq!(c.kept_draws(), 3);
        assert!(c.validate().is_ok());
        c.burn_in = 10;
        assert!(c.validate().is_err());
        let mut c = BpcfConfig::default();
        c.tau_y_trees = 0;
        assert!(c.validate().is_err());
    }
}
