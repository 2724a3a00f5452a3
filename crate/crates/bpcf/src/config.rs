//! Run configuration: a flat `key = value` text format layered over named
//! presets.
//!
//! ```text
//! # comments start with '#'
//! profile = paper_sim
//! iterations = 4000
//! burn_in = 2000
//! modifier_mode = m_only
//! ```
//!
//! The preset named by `profile` is applied first, whatever its position in
//! the file; every other key then overrides one field.

use std::fmt::Write as _;
use std::str::FromStr;

use bpcf_core::propensity::DEFAULT_CLIP;
use bpcf_core::{BpcfConfig, ImputeOrder, ModifierMode, ModifierScale, Profile};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunProfile {
    PaperDefault,
    PaperSim,
    /// Tiny forests and 20 iterations, for plumbing checks.
    Smoke,
}

impl RunProfile {
    pub const ALL: [RunProfile; 3] = [RunProfile::PaperDefault, RunProfile::PaperSim, RunProfile::Smoke];

    pub fn name(self) -> &'static str {
        match self {
            RunProfile::PaperDefault => Profile::PaperDefault.name(),
            RunProfile::PaperSim => Profile::PaperSim.name(),
            RunProfile::Smoke => "smoke",
        }
    }

    fn sampler(self) -> BpcfConfig {
        match self {
            RunProfile::PaperDefault => BpcfConfig::profile(Profile::PaperDefault),
            RunProfile::PaperSim => BpcfConfig::profile(Profile::PaperSim),
            RunProfile::Smoke => BpcfConfig {
                mu_m_trees: 20,
                tau_m_trees: 10,
                mu_y_trees: 20,
                tau_y_trees: 10,
                baseline_trees: 20,
                iterations: 20,
                burn_in: 10,
                ..BpcfConfig::profile(Profile::PaperSim)
            },
        }
    }
}

impl FromStr for RunProfile {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        RunProfile::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown profile '{s}' (expected paper_default, paper_sim or smoke)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub profile: RunProfile,
    pub sampler: BpcfConfig,
    pub seed: u64,
    /// Propensity clip: predictions are kept in `[clip, 1 − clip]`.
    pub clip: f64,
    /// Units per simulated dataset.
    pub sim_n: usize,
    pub replications: usize,
}

impl RunConfig {
    pub fn from_profile(profile: RunProfile) -> Self {
        Self {
            profile,
            sampler: profile.sampler(),
            seed: 1,
            clip: DEFAULT_CLIP,
            sim_n: 300,
            replications: 200,
        }
    }

    /// Parses `text`. A `profile` given here replaces the one in the file.
    pub fn parse(text: &str, profile: Option<RunProfile>) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut file_profile = None;
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: k + 1,
                reason: format!("expected 'key = value', got '{line}'"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key == "profile" {
                file_profile = Some(value.parse().map_err(|reason| Error::Config { line: k + 1, reason })?);
            } else {
                pairs.push((k + 1, key.to_string(), value.to_string()));
            }
        }
        let mut cfg = Self::from_profile(profile.or(file_profile).unwrap_or(RunProfile::PaperDefault));
        for (line, key, value) in pairs {
            cfg.set(&key, &value).map_err(|reason| Error::Config { line, reason })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        if !(self.clip > 0.0 && self.clip < 0.5) {
            return Err(Error::Usage(format!("clip must lie in (0, 0.5), got {}", self.clip)));
        }
        if self.sim_n < 2 {
            return Err(Error::Usage("sim_n must be at least 2".into()));
        }
        Ok(())
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let s = &mut self.sampler;
        match key {
            "seed" => self.seed = num(value)?,
            "clip" => self.clip = num(value)?,
            "sim_n" => self.sim_n = num(value)?,
            "replications" => self.replications = num(value)?,
            "iterations" => s.iterations = num(value)?,
            "burn_in" => s.burn_in = num(value)?,
            "thin" => s.thin = num(value)?,
            "mu_m_trees" => s.mu_m_trees = num(value)?,
            "tau_m_trees" => s.tau_m_trees = num(value)?,
            "mu_y_trees" => s.mu_y_trees = num(value)?,
            "tau_y_trees" => s.tau_y_trees = num(value)?,
            "baseline_trees" => s.baseline_trees = num(value)?,
            "mu_alpha" => s.mu_prior.alpha = num(value)?,
            "mu_beta" => s.mu_prior.beta = num(value)?,
            "tau_alpha" => s.tau_prior.alpha = num(value)?,
            "tau_beta" => s.tau_prior.beta = num(value)?,
            "grow_prob" => s.moves.grow = num(value)?,
            "prune_prob" => s.moves.prune = num(value)?,
            "change_prob" => s.moves.change = num(value)?,
            "min_leaf_n" => s.min_leaf_n = num(value)?,
            "max_cutpoints" => s.max_cutpoints = num(value)?,
            "noise_nu" => s.noise_nu = num(value)?,
            "noise_quantile" => s.noise_quantile = num(value)?,
            "noisy_impute" => s.noisy_impute = num(value)?,
            "keep_modifier_forests" => s.keep_modifier_forests = num(value)?,
            "modifier_mode" => {
                s.modifier_mode = match value {
                    "full" => ModifierMode::Full,
                    "m_only" => ModifierMode::MOnly,
                    _ => return Err(format!("modifier_mode must be full or m_only, got '{value}'")),
                }
            }
            "modifier_scale" => {
                s.modifier_scale = match value {
                    "response" => ModifierScale::Response,
                    "residual" => ModifierScale::Residual,
                    _ => return Err(format!("modifier_scale must be response or residual, got '{value}'")),
                }
            }
            "impute_order" => {
                s.impute_order = match value {
                    "after" => ImputeOrder::AfterIntermediateModel,
                    "before" => ImputeOrder::BeforeIntermediateModel,
                    _ => return Err(format!("impute_order must be after or before, got '{value}'")),
                }
            }
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Every setting, one per line in a fixed order. Parsing this text gives
    /// back the same configuration.
    pub fn to_text(&self) -> String {
        let s = &self.sampler;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("profile", self.profile.name().into());
        put("seed", self.seed.to_string());
        put("clip", format!("{:?}", self.clip));
        put("sim_n", self.sim_n.to_string());
        put("replications", self.replications.to_string());
        put("iterations", s.iterations.to_string());
        put("burn_in", s.burn_in.to_string());
        put("thin", s.thin.to_string());
        put("mu_m_trees", s.mu_m_trees.to_string());
        put("tau_m_trees", s.tau_m_trees.to_string());
        put("mu_y_trees", s.mu_y_trees.to_string());
        put("tau_y_trees", s.tau_y_trees.to_string());
        put("baseline_trees", s.baseline_trees.to_string());
        put("mu_alpha", format!("{:?}", s.mu_prior.alpha));
        put("mu_beta", format!("{:?}", s.mu_prior.beta));
        put("tau_alpha", format!("{:?}", s.tau_prior.alpha));
        put("tau_beta", format!("{:?}", s.tau_prior.beta));
        put("grow_prob", format!("{:?}", s.moves.grow));
        put("prune_prob", format!("{:?}", s.moves.prune));
        put("change_prob", format!("{:?}", s.moves.change));
        put("min_leaf_n", s.min_leaf_n.to_string());
        put("max_cutpoints", s.max_cutpoints.to_string());
        put("noise_nu", format!("{:?}", s.noise_nu));
        put("noise_quantile", format!("{:?}", s.noise_quantile));
        put("noisy_impute", s.noisy_impute.to_string());
        put("keep_modifier_forests", s.keep_modifier_forests.to_string());
        let mode = match s.modifier_mode {
            ModifierMode::Full => "full",
            ModifierMode::MOnly => "m_only",
        };
        put("modifier_mode", mode.into());
        let scale = match s.modifier_scale {
            ModifierScale::Response => "response",
            ModifierScale::Residual => "residual",
        };
        put("modifier_scale", scale.into());
        let order = match s.impute_order {
            ImputeOrder::AfterIntermediateModel => "after",
            ImputeOrder::BeforeIntermediateModel => "before",
        };
        put("impute_order", order.into());
        out
    }

    /// SHA-256 of [`RunConfig::to_text`], hex encoded.
    pub fn digest(&self) -> String {
        format!("{:x}", Sha256::digest(self.to_text().as_bytes()))
    }
}

fn num<T: FromStr>(value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("cannot parse '{value}'"))
}
