//! CSV ingestion and export of unit-level datasets.
//!
//! A data file has a header row and one row per unit. Column roles come
//! from a sidecar mapping in the same `key = value` style as run configs:
//!
//! ```text
//! id = unit
//! treatment = scrubber
//! intermediate = so2
//! outcome = pm25
//! covariates = x1, x2, x3
//! # optional: the columns used by the propensity model (default: covariates)
//! propensity_covariates = x1, x2
//! ```
//!
//! Without a sidecar the roles are `id`, `A`, `M`, `Y`, with every other
//! column a covariate.

use std::fs;
use std::path::Path;

use bpcf_core::{Dataset, Matrix};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnRoles {
    pub id: String,
    pub treatment: String,
    pub intermediate: String,
    pub outcome: String,
    /// `None` means every column without another role.
    pub covariates: Option<Vec<String>>,
    pub propensity_covariates: Option<Vec<String>>,
}

impl Default for ColumnRoles {
    fn default() -> Self {
        Self {
            id: "id".into(),
            treatment: "A".into(),
            intermediate: "M".into(),
            outcome: "Y".into(),
            covariates: None,
            propensity_covariates: None,
        }
    }
}

impl ColumnRoles {
    pub fn parse(text: &str) -> Result<Self> {
        let mut roles = Self::default();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| Error::Config { line: k + 1, reason };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'role = column', got '{line}'")))?;
            let value = value.trim().to_string();
            let list = || -> Vec<String> {
                value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
            };
            match key.trim() {
                "id" => roles.id = value.clone(),
                "treatment" => roles.treatment = value.clone(),
                "intermediate" => roles.intermediate = value.clone(),
                "outcome" => roles.outcome = value.clone(),
                "covariates" => roles.covariates = Some(list()),
                "propensity_covariates" => roles.propensity_covariates = Some(list()),
                other => return Err(err(format!("unknown role '{other}'"))),
            }
        }
        Ok(roles)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path).map_err(Error::io(path))?)
    }
}

/// A dataset read from CSV with its unit ids and column names.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedData {
    pub ids: Vec<String>,
    pub covariate_names: Vec<String>,
    pub data: Dataset,
    /// Design of the propensity model.
    pub propensity_x: Matrix,
}

pub fn read_dataset(path: &Path, roles: &ColumnRoles) -> Result<LoadedData> {
    let schema = |row: usize, column: &str, reason: String| Error::Schema {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(Error::csv(path))?;
    let header: Vec<String> = reader.headers().map_err(Error::csv(path))?.iter().map(String::from).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| schema(1, name, "missing column".into()))
    };
    let id_col = find(&roles.id)?;
    let a_col = find(&roles.treatment)?;
    let m_col = find(&roles.intermediate)?;
    let y_col = find(&roles.outcome)?;
    let covariate_names: Vec<String> = match &roles.covariates {
        Some(list) => list.clone(),
        None => header
            .iter()
            .enumerate()
            .filter(|(j, _)| ![id_col, a_col, m_col, y_col].contains(j))
            .map(|(_, h)| h.clone())
            .collect(),
    };
    if covariate_names.is_empty() {
        return Err(schema(1, "covariates", "no covariate columns".into()));
    }
    let x_cols = covariate_names.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;
    let p_names = roles.propensity_covariates.clone().unwrap_or_else(|| covariate_names.clone());
    let p_cols = p_names.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;

    let (mut ids, mut a, mut m, mut y) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let (mut xs, mut ps) = (Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(Error::csv(path))?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(schema(row, "*", format!("expected {} fields, found {}", header.len(), record.len())));
        }
        let cell = |j: usize| -> Result<&str> {
            let v = &record[j];
            if v.is_empty() || v.eq_ignore_ascii_case("na") || v.eq_ignore_ascii_case("nan") {
                return Err(schema(row, &header[j], "missing value".into()));
            }
            Ok(v)
        };
        let number = |j: usize| -> Result<f64> {
            let v = cell(j)?;
            match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(schema(row, &header[j], format!("'{v}' is not a finite number"))),
            }
        };
        ids.push(cell(id_col)?.to_string());
        a.push(match cell(a_col)? {
            "1" => true,
            "0" => false,
            other => return Err(schema(row, &header[a_col], format!("treatment must be 0 or 1, got '{other}'"))),
        });
        m.push(number(m_col)?);
        y.push(number(y_col)?);
        for &j in &x_cols {
            xs.push(number(j)?);
        }
        for &j in &p_cols {
            ps.push(number(j)?);
        }
    }
    let n = ids.len();
    let x = Matrix::new(n, x_cols.len(), xs)?;
    let propensity_x = Matrix::new(n, p_cols.len(), ps)?;
    let data = Dataset::new(x, a, m, y)?;
    Ok(LoadedData {
        ids,
        covariate_names,
        data,
        propensity_x,
    })
}

/// Writes `data` in the default role layout (`id, A, M, Y, X1..Xp`).
pub fn write_dataset(path: &Path, ids: &[String], data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(Error::csv(path))?;
    let mut header = vec!["id".to_string(), "A".into(), "M".into(), "Y".into()];
    header.extend((1..=data.x.cols()).map(|j| format!("X{j}")));
    w.write_record(&header).map_err(Error::csv(path))?;
    for i in 0..data.n() {
        let mut rec = vec![
            ids[i].clone(),
            u8::from(data.treatment[i]).to_string(),
            fmt(data.m[i]),
            fmt(data.y[i]),
        ];
        rec.extend(data.x.row(i).iter().map(|&v| fmt(v)));
        w.write_record(&rec).map_err(Error::csv(path))?;
    }
    w.flush().map_err(Error::io(path))
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt(v: f64) -> String {
    format!("{v:?}")
}

/// Ids `1..=n` as strings.
pub fn sequential_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}
