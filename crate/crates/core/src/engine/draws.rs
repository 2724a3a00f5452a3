use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::config::ModifierMode;
use crate::error::{Error, Result};
use crate::forest::{Counter, Forest, MoveStats};
use crate::matrix::Matrix;
use crate::text::{push_values, Lines};

/// Posterior draws of every unit's potential values, in original units.
///
/// Rows of `m0`, `m1`, `y0`, `y1` are kept iterations; columns are units.
/// Observed-arm slots hold the observed data exactly.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PosteriorDraws {
    pub m0: Vec<Vec<f64>>,
    pub m1: Vec<Vec<f64>>,
    pub y0: Vec<Vec<f64>>,
    pub y1: Vec<Vec<f64>>,
    pub sigma_m: Vec<f64>,
    pub sigma_y: Vec<f64>,
    /// Joint observed-data log-likelihood at each kept draw.
    pub loglik: Vec<f64>,
    /// Joint log-likelihood at every iteration, burn-in included.
    pub loglik_trace: Vec<f64>,
    pub acceptance: AcceptanceSummary,
    /// Posterior mean of the intermediate model's prognostic function per unit.
    pub prognostic_m: Vec<f64>,
    /// Posterior mean of the outcome model's prognostic function per unit.
    pub prognostic_y: Vec<f64>,
    pub modifier: Option<ModifierTrace>,
}

impl PosteriorDraws {
    pub fn n_draws(&self) -> usize {
        self.m0.len()
    }

    pub fn n_units(&self) -> usize {
        self.m0.first().map_or(0, Vec::len)
    }

    /// Per-draw sample mean of `M(1) − M(0)`.
    pub fn intermediate_effects(&self) -> Vec<f64> {
        self.m1
            .iter()
            .zip(&self.m0)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).sum::<f64>() / a.len() as f64)
            .collect()
    }

    /// Per-draw sample mean of `Y(1) − Y(0)`.
    pub fn outcome_effects(&self) -> Vec<f64> {
        self.y1
            .iter()
            .zip(&self.y0)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).sum::<f64>() / a.len() as f64)
            .collect()
    }

    /// Checks shapes are consistent across the four draw matrices.
    pub fn validate(&self) -> Result<()> {
        let r = self.m0.len();
        let n = self.n_units();
        for (name, m) in [("M(1)", &self.m1), ("Y(0)", &self.y0), ("Y(1)", &self.y1)] {
            if m.len() != r {
                return Err(Error::Data(format!("{name} has {} draws, M(0) has {r}", m.len())));
            }
        }
        for m in [&self.m0, &self.m1, &self.y0, &self.y1] {
            if m.iter().any(|row| row.len() != n) {
                return Err(Error::Data("draw rows have unequal unit counts".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AcceptanceSummary {
    /// Structural move statistics per named forest.
    pub forests: Vec<(String, MoveStats)>,
    /// Independence-MH updates of treated units' latent `M(0)`.
    pub m_mis: Counter,
    /// Outcome-model evaluations made while imputing control units.
    pub control_outcome_evaluations: u64,
}

/// Everything needed to evaluate the outcome modifier `τ_Y(x, m1, m0)` of
/// each kept draw in original units.
#[derive(Debug, Clone, PartialEq)]
pub struct ModifierTrace {
    pub x: Matrix,
    pub mode: ModifierMode,
    pub m_center: f64,
    pub m_scale: f64,
    pub y_scale: f64,
    pub forests: Vec<Forest>,
}

impl ModifierTrace {
    /// Writes the standardized modifier row for unit `i` at `(m1, m0)` given
    /// in original units.
    pub fn modifier_row(&self, i: usize, m1: f64, m0: f64, buf: &mut Vec<f64>) {
        buf.clear();
        if self.mode == ModifierMode::Full {
            buf.extend_from_slice(self.x.row(i));
        }
        buf.push((m1 - self.m_center) / self.m_scale);
        buf.push((m0 - self.m_center) / self.m_scale);
    }

    /// τ_Y of draw `r` at unit `i`'s covariates and `(m1, m0)`, in outcome units.
    pub fn effect(&self, r: usize, i: usize, m1: f64, m0: f64) -> f64 {
        let mut row = Vec::new();
        self.modifier_row(i, m1, m0, &mut row);
        self.y_scale * self.forests[r].predict_row(&row)
    }

    /// Column indices of `M(1)` and `M(0)` in the modifier design.
    pub fn m_columns(&self) -> (usize, usize) {
        match self.mode {
            ModifierMode::Full => (self.x.cols(), self.x.cols() + 1),
            ModifierMode::MOnly => (0, 1),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "bpcf-modifier-trace v1");
        let mode = match self.mode {
            ModifierMode::Full => "full",
            ModifierMode::MOnly => "m_only",
        };
        let _ = writeln!(out, "mode {mode}");
        let _ = writeln!(out, "m_transform {:?} {:?}", self.m_center, self.m_scale);
        let _ = writeln!(out, "y_scale {:?}", self.y_scale);
        let _ = writeln!(out, "x {} {}", self.x.rows(), self.x.cols());
        for row in self.x.iter_rows() {
            push_values(&mut out, "r", row);
        }
        let _ = writeln!(out, "draws {}", self.forests.len());
        for f in &self.forests {
            f.write_checkpoint(f64::NAN, &mut out);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        let header = lines.next_fields()?;
        if header != ["bpcf-modifier-trace", "v1"] {
            return Err(lines.err("unsupported modifier trace header"));
        }
        let mode = match lines.expect("mode")?.first().copied() {
            Some("full") => ModifierMode::Full,
            Some("m_only") => ModifierMode::MOnly,
            _ => return Err(lines.err("unknown modifier mode")),
        };
        let t = lines.expect("m_transform")?;
        let (m_center, m_scale) = (lines.parse(t.first())?, lines.parse(t.get(1))?);
        let y_scale = lines.value("y_scale")?;
        let dims = lines.expect("x")?;
        let (rows, cols): (usize, usize) = (lines.parse(dims.first())?, lines.parse(dims.get(1))?);
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let f = lines.expect("r")?;
            if f.len() != cols {
                return Err(lines.err("covariate row width"));
            }
            data.extend(lines.parse_all::<f64>(&f)?);
        }
        let x = Matrix::new(rows, cols, data)?;
        let n: usize = lines.value("draws")?;
        let forests = (0..n)
            .map(|_| Forest::read_lines(&mut lines).map(|(f, _)| f))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            x,
            mode,
            m_center,
            m_scale,
            y_scale,
            forests,
        })
    }
}
