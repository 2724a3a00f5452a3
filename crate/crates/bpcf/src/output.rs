//! Posterior-draw directories, JSON summaries and run manifests.
//!
//! A draws directory holds `M0.csv`, `M1.csv`, `Y0.csv`, `Y1.csv` (one row
//! per kept draw, one column per unit, headed `draw,<unit ids>`), a
//! `summary.json` and, when the outcome modifier forests were kept,
//! `tau_y_forests.txt`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use bpcf_core::engine::ModifierTrace;
use bpcf_core::forest::{Counter, MoveStats};
use bpcf_core::special::{mean, quantile_sorted, sample_sd};
use bpcf_core::PosteriorDraws;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::data::fmt;
use crate::error::{Error, Result};

pub const DRAW_FILES: [&str; 4] = ["M0.csv", "M1.csv", "Y0.csv", "Y1.csv"];
pub const MODIFIER_FILE: &str = "tau_y_forests.txt";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

fn write_matrix(path: &Path, ids: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(Error::csv(path))?;
    let mut header = vec!["draw".to_string()];
    header.extend(ids.iter().cloned());
    w.write_record(&header).map_err(Error::csv(path))?;
    for (r, row) in rows.iter().enumerate() {
        let mut rec = vec![r.to_string()];
        rec.extend(row.iter().map(|&v| fmt(v)));
        w.write_record(&rec).map_err(Error::csv(path))?;
    }
    w.flush().map_err(Error::io(path))
}

fn read_matrix(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::Reader::from_path(path).map_err(Error::csv(path))?;
    let header = reader.headers().map_err(Error::csv(path))?.clone();
    let ids: Vec<String> = header.iter().skip(1).map(String::from).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(Error::csv(path))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row = record
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, v)| {
                v.parse::<f64>().map_err(|_| Error::Schema {
                    path: path.to_path_buf(),
                    row: line,
                    column: header.get(j).unwrap_or("?").to_string(),
                    reason: format!("'{v}' is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((ids, rows))
}

/// Writes the four potential-value matrices and, if present, the modifier
/// trace. Returns the file names written.
pub fn write_draws(dir: &Path, ids: &[String], draws: &PosteriorDraws) -> Result<Vec<String>> {
    let mut files = Vec::new();
    for (name, m) in DRAW_FILES.iter().zip([&draws.m0, &draws.m1, &draws.y0, &draws.y1]) {
        write_matrix(&dir.join(name), ids, m)?;
        files.push(name.to_string());
    }
    if let Some(trace) = &draws.modifier {
        let path = dir.join(MODIFIER_FILE);
        fs::write(&path, trace.to_text()).map_err(Error::io(&path))?;
        files.push(MODIFIER_FILE.into());
    }
    Ok(files)
}

/// Reads a draws directory back. Only the potential values and the modifier
/// trace are restored.
pub fn read_draws(dir: &Path) -> Result<(Vec<String>, PosteriorDraws)> {
    let mut mats = Vec::new();
    let mut ids = Vec::new();
    for name in DRAW_FILES {
        let (file_ids, rows) = read_matrix(&dir.join(name))?;
        if !ids.is_empty() && file_ids != ids {
            return Err(Error::Usage(format!("{name}: unit columns differ from {}", DRAW_FILES[0])));
        }
        ids = file_ids;
        mats.push(rows);
    }
    let [m0, m1, y0, y1]: [Vec<Vec<f64>>; 4] = mats.try_into().expect("four draw files");
    let trace_path = dir.join(MODIFIER_FILE);
    let modifier = if trace_path.exists() {
        let text = fs::read_to_string(&trace_path).map_err(Error::io(&trace_path))?;
        Some(ModifierTrace::from_text(&text)?)
    } else {
        None
    };
    let draws = PosteriorDraws {
        m0,
        m1,
        y0,
        y1,
        modifier,
        ..PosteriorDraws::default()
    };
    draws.validate()?;
    Ok((ids, draws))
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct EffectSummary {
    pub posterior_mean: f64,
    pub posterior_sd: f64,
    pub ci95: (f64, f64),
}

impl EffectSummary {
    /// Mean, SD and equal-tailed 95% interval of per-draw values.
    pub fn from_draws(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            posterior_mean: mean(values),
            posterior_sd: if values.len() > 1 { sample_sd(values) } else { 0.0 },
            ci95: (quantile_sorted(&sorted, 0.025), quantile_sorted(&sorted, 0.975)),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Rate {
    pub proposed: u64,
    pub accepted: u64,
    pub rate: f64,
}

impl From<Counter> for Rate {
    fn from(c: Counter) -> Self {
        Self {
            proposed: c.proposed,
            accepted: c.accepted,
            rate: c.rate(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ForestRates {
    pub grow: Rate,
    pub prune: Rate,
    pub change: Rate,
    pub total: Rate,
}

impl From<MoveStats> for ForestRates {
    fn from(s: MoveStats) -> Self {
        Self {
            grow: s.grow.into(),
            prune: s.prune.into(),
            change: s.change.into(),
            total: s.total().into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub method: String,
    pub n_units: usize,
    pub n_draws: usize,
    pub ate_m: EffectSummary,
    pub ate_y: EffectSummary,
    pub forests: BTreeMap<String, ForestRates>,
    pub m_mis: Rate,
    pub control_outcome_evaluations: u64,
    pub sigma_m: Vec<f64>,
    pub sigma_y: Vec<f64>,
    pub loglik: Vec<f64>,
    pub loglik_trace: Vec<f64>,
}

impl Summary {
    pub fn new(method: &str, draws: &PosteriorDraws) -> Self {
        Self {
            method: method.into(),
            n_units: draws.n_units(),
            n_draws: draws.n_draws(),
            ate_m: EffectSummary::from_draws(&draws.intermediate_effects()),
            ate_y: EffectSummary::from_draws(&draws.outcome_effects()),
            forests: draws
                .acceptance
                .forests
                .iter()
                .map(|(name, s)| (name.clone(), (*s).into()))
                .collect(),
            m_mis: draws.acceptance.m_mis.into(),
            control_outcome_evaluations: draws.acceptance.control_outcome_evaluations,
            sigma_m: draws.sigma_m.clone(),
            sigma_y: draws.sigma_y.clone(),
            loglik: draws.loglik.clone(),
            loglik_trace: draws.loglik_trace.clone(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(Error::io(path))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Provenance of one command's outputs. Holds no timestamps or absolute
/// paths so identical runs produce identical manifests.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub config: String,
    /// Command arguments that are not part of the run config.
    pub parameters: BTreeMap<String, String>,
    /// Input file name → SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
    /// Output file name → SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config_text: String) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            seed,
            config_sha256: format!("{:x}", Sha256::digest(config_text.as_bytes())),
            config: config_text,
            parameters: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        self.inputs.insert(name, sha256_file(path)?);
        Ok(())
    }

    /// Hashes `files` (names inside `dir`) and writes `manifest.json` there.
    pub fn write(mut self, dir: &Path, files: &[String]) -> Result<()> {
        for f in files {
            self.outputs.insert(f.clone(), sha256_file(&dir.join(f))?);
        }
        write_json(&dir.join(MANIFEST_FILE), &self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effect_summary_of_known_values() {
        let s = EffectSummary::from_draws(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.posterior_mean, 2.5);
        assert!((s.posterior_sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(s.ci95.0 >= 1.0 && s.ci95.1 <= 4.0);
    }
}
