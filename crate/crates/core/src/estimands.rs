//! Principal causal effects, stratum partitions, CEP surfaces and
//! replication metrics.

use alloc::vec;
use alloc::vec::Vec;

use crate::engine::{ModifierTrace, PosteriorDraws};
use crate::error::{Error, Result};
use crate::special::{mean, quantile_sorted, sample_sd};
use crate::tree::{NodeId, Tree, ROOT};

/// A set of values of `M(1) − M(0)`. Open `(lower, upper)` unless
/// `lower_closed`, which partitions use to avoid gaps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StratumInterval {
    pub lower: f64,
    pub upper: f64,
    pub lower_closed: bool,
}

impl StratumInterval {
    pub fn open(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(Error::Config(alloc::format!("invalid interval ({lower}, {upper})")));
        }
        Ok(Self {
            lower,
            upper,
            lower_closed: false,
        })
    }

    pub fn half_open(lower: f64, upper: f64) -> Result<Self> {
        Ok(Self {
            lower_closed: true,
            ..Self::open(lower, upper)?
        })
    }

    pub fn whole_line() -> Self {
        Self {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            lower_closed: false,
        }
    }

    #[inline]
    pub fn contains(&self, delta: f64) -> bool {
        let above = if self.lower_closed { delta >= self.lower } else { delta > self.lower };
        above && delta < self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PceEstimate {
    /// Ratio of summed effects to summed memberships over all draws.
    pub posterior_mean: f64,
    /// SD of the per-draw stratum means.
    pub posterior_sd: f64,
    /// Equal-tailed 95% interval of the per-draw stratum means.
    pub ci95: (f64, f64),
    /// Mean stratum size over draws.
    pub avg_stratum_n: f64,
    /// Draws in which the stratum had at least one member.
    pub nonempty_draws: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pce {
    Estimate(PceEstimate),
    /// No unit fell in the stratum in any draw.
    EmptyStratum,
}

impl Pce {
    pub fn estimate(&self) -> Option<&PceEstimate> {
        match self {
            Pce::Estimate(e) => Some(e),
            Pce::EmptyStratum => None,
        }
    }
}

/// Per-draw stratum sum of `Y(1) − Y(0)` and member count.
pub fn stratum_sums(draws: &PosteriorDraws, interval: &StratumInterval) -> Vec<(f64, usize)> {
    (0..draws.n_draws())
        .map(|r| {
            let mut sum = 0.0;
            let mut count = 0;
            for i in 0..draws.m0[r].len() {
                if interval.contains(draws.m1[r][i] - draws.m0[r][i]) {
                    sum += draws.y1[r][i] - draws.y0[r][i];
                    count += 1;
                }
            }
            (sum, count)
        })
        .collect()
}

/// Per-draw stratum mean of `Y(1) − Y(0)`, `None` where the stratum is empty.
pub fn per_draw_pce(draws: &PosteriorDraws, interval: &StratumInterval) -> Vec<Option<f64>> {
    stratum_sums(draws, interval)
        .into_iter()
        .map(|(s, c)| (c > 0).then(|| s / c as f64))
        .collect()
}

pub fn pce(draws: &PosteriorDraws, interval: &StratumInterval) -> Result<Pce> {
    if draws.n_draws() == 0 {
        return Err(Error::Empty("posterior draws"));
    }
    draws.validate()?;
    let sums = stratum_sums(draws, interval);
    let total: f64 = sums.iter().map(|s| s.0).sum();
    let count: usize = sums.iter().map(|s| s.1).sum();
    if count == 0 {
        return Ok(Pce::EmptyStratum);
    }
    let mut per_draw: Vec<f64> = sums.iter().filter(|s| s.1 > 0).map(|&(s, c)| s / c as f64).collect();
    let posterior_sd = if per_draw.len() > 1 { sample_sd(&per_draw) } else { 0.0 };
    per_draw.sort_by(f64::total_cmp);
    Ok(Pce::Estimate(PceEstimate {
        posterior_mean: total / count as f64,
        posterior_sd,
        ci95: (quantile_sorted(&per_draw, 0.025), quantile_sorted(&per_draw, 0.975)),
        avg_stratum_n: count as f64 / sums.len() as f64,
        nonempty_draws: per_draw.len(),
    }))
}

/// Partition of the real line at sorted, distinct `cuts`: `(−∞, c₁)`, then
/// `[cₖ, cₖ₊₁)`, ending with `[c_last, ∞)`.
pub fn partition(cuts: &[f64]) -> Result<Vec<StratumInterval>> {
    if cuts.iter().any(|c| !c.is_finite()) || cuts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("partition cutpoints must be finite and strictly increasing".into()));
    }
    let mut bounds = vec![f64::NEG_INFINITY];
    bounds.extend_from_slice(cuts);
    bounds.push(f64::INFINITY);
    Ok(bounds
        .windows(2)
        .enumerate()
        .map(|(k, w)| StratumInterval {
            lower: w[0],
            upper: w[1],
            lower_closed: k > 0,
        })
        .collect())
}

/// Per-unit posterior mean of `M(1) − M(0)`.
pub fn mean_intermediate_effects(draws: &PosteriorDraws) -> Vec<f64> {
    let n = draws.n_units();
    let mut acc = vec![0.0; n];
    for (a, b) in draws.m1.iter().zip(&draws.m0) {
        for i in 0..n {
            acc[i] += a[i] - b[i];
        }
    }
    let r = draws.n_draws() as f64;
    acc.into_iter().map(|v| v / r).collect()
}

/// Partition at `0` and `±s·m` for each multiplier `m`, where `s` is the SD
/// of the per-unit posterior-mean intermediate effects. Returns `s` and the
/// `2k + 2` intervals.
pub fn intervals_from_sd_multiples(draws: &PosteriorDraws, multipliers: &[f64]) -> Result<(f64, Vec<StratumInterval>)> {
    if draws.n_draws() == 0 {
        return Err(Error::Empty("posterior draws"));
    }
    let s = sample_sd(&mean_intermediate_effects(draws));
    Ok((s, sd_multiple_partition(s, multipliers)?))
}

pub fn sd_multiple_partition(s: f64, multipliers: &[f64]) -> Result<Vec<StratumInterval>> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Degenerate("posterior-mean intermediate effects"));
    }
    if multipliers.is_empty() || multipliers.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
        return Err(Error::Config("SD multipliers must be positive and finite".into()));
    }
    let mut cuts: Vec<f64> = multipliers.iter().flat_map(|m| [-s * m, s * m]).collect();
    cuts.push(0.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    partition(&cuts)
}

/// Posterior mean CEP surface: `values[j][k]` is the average over draws and
/// units of `τ_Y(x_i, m1 = grid_m1[k], m0 = grid_m0[j])`, with the per-unit
/// posterior mean strata `(M̄(0), M̄(1))` for overlay.
#[derive(Debug, Clone, PartialEq)]
pub struct CepSurface {
    pub grid_m0: Vec<f64>,
    pub grid_m1: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub points: Vec<(f64, f64)>,
}

/// Evenly spaced `size × size` grid over the span of the posterior-mean strata.
pub fn surface_grid(draws: &PosteriorDraws, size: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if size == 0 || draws.n_draws() == 0 {
        return Err(Error::Empty("surface grid"));
    }
    let points = mean_strata(draws);
    let span = |f: fn(&(f64, f64)) -> f64| {
        let lo = points.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if size == 1 {
            return vec![0.5 * (lo + hi)];
        }
        (0..size).map(|k| lo + (hi - lo) * k as f64 / (size - 1) as f64).collect()
    };
    Ok((span(|p| p.0), span(|p| p.1)))
}

fn mean_strata(draws: &PosteriorDraws) -> Vec<(f64, f64)> {
    let r = draws.n_draws() as f64;
    (0..draws.n_units())
        .map(|i| {
            let m0: f64 = draws.m0.iter().map(|d| d[i]).sum();
            let m1: f64 = draws.m1.iter().map(|d| d[i]).sum();
            (m0 / r, m1 / r)
        })
        .collect()
}

// Adds every leaf of `tree` reachable from unit `i`'s covariates to the
// rectangle of grid cells whose (m0, m1) route to it.
struct SurfaceWalk<'a> {
    x: &'a [f64],
    use_x: bool,
    m1_col: usize,
    m0_col: usize,
    g0: &'a [f64],
    g1: &'a [f64],
    diff: &'a mut [f64],
    weight: f64,
}

impl SurfaceWalk<'_> {
    fn walk(&mut self, tree: &Tree, node: NodeId, j: (usize, usize), k: (usize, usize)) {
        if j.0 >= j.1 || k.0 >= k.1 {
            return;
        }
        let Some(rule) = tree.rule(node) else {
            let v = self.weight * tree.leaf_value(node).unwrap_or(0.0);
            let w = self.g1.len() + 1;
            self.diff[j.0 * w + k.0] += v;
            self.diff[j.0 * w + k.1] -= v;
            self.diff[j.1 * w + k.0] -= v;
            self.diff[j.1 * w + k.1] += v;
            return;
        };
        let (l, r) = tree.children(node).unwrap_or((node, node));
        if rule.var == self.m0_col {
            let s = j.0 + self.g0[j.0..j.1].partition_point(|&g| g < rule.cutpoint);
            self.walk(tree, l, (j.0, s), k);
            self.walk(tree, r, (s, j.1), k);
        } else if rule.var == self.m1_col {
            let s = k.0 + self.g1[k.0..k.1].partition_point(|&g| g < rule.cutpoint);
            self.walk(tree, l, j, (k.0, s));
            self.walk(tree, r, j, (s, k.1));
        } else {
            let left = self.use_x && self.x[rule.var] < rule.cutpoint;
            self.walk(tree, if left { l } else { r }, j, k);
        }
    }
}

pub fn cep_surface(draws: &PosteriorDraws, grid_m0: &[f64], grid_m1: &[f64]) -> Result<CepSurface> {
    let trace = draws
        .modifier
        .as_ref()
        .ok_or_else(|| Error::Data("draws carry no outcome modifier forests".into()))?;
    let values = modifier_surface(trace, grid_m0, grid_m1)?;
    Ok(CepSurface {
        grid_m0: grid_m0.to_vec(),
        grid_m1: grid_m1.to_vec(),
        values,
        points: mean_strata(draws),
    })
}

/// Surface values from the modifier trace alone.
pub fn modifier_surface(trace: &ModifierTrace, grid_m0: &[f64], grid_m1: &[f64]) -> Result<Vec<Vec<f64>>> {
    if grid_m0.is_empty() || grid_m1.is_empty() {
        return Err(Error::Empty("surface grid"));
    }
    if trace.forests.is_empty() {
        return Err(Error::Empty("modifier draws"));
    }
    for g in [grid_m0, grid_m1] {
        if g.iter().any(|v| !v.is_finite()) || g.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config("surface grids must be finite and sorted".into()));
        }
    }
    let g0: Vec<f64> = grid_m0.iter().map(|v| (v - trace.m_center) / trace.m_scale).collect();
    let g1: Vec<f64> = grid_m1.iter().map(|v| (v - trace.m_center) / trace.m_scale).collect();
    let (m1_col, m0_col) = trace.m_columns();
    let (n0, n1) = (g0.len(), g1.len());
    let mut diff = vec![0.0; (n0 + 1) * (n1 + 1)];
    let full = trace.mode == crate::config::ModifierMode::Full;
    let units = trace.x.rows();
    let (unit_passes, weight) = if full { (units, 1.0) } else { (1, units as f64) };
    for forest in &trace.forests {
        for tree in &forest.trees {
            for i in 0..unit_passes {
                let mut w = SurfaceWalk {
                    x: if full { trace.x.row(i) } else { &[] },
                    use_x: full,
                    m1_col,
                    m0_col,
                    g0: &g0,
                    g1: &g1,
                    diff: &mut diff,
                    weight,
                };
                w.walk(tree, ROOT, (0, n0), (0, n1));
            }
        }
    }
    let denom = (trace.forests.len() * units) as f64;
    let w = n1 + 1;
    let mut values = vec![vec![0.0; n1]; n0];
    let mut row_acc = vec![0.0; n1];
    for j in 0..n0 {
        let mut run = 0.0;
        for k in 0..n1 {
            run += diff[j * w + k];
            row_acc[k] += run;
            values[j][k] = trace.y_scale * row_acc[k] / denom;
        }
    }
    Ok(values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationMetrics {
    pub bias: f64,
    /// `(mean − truth)/truth`, so estimates shrunk toward zero give a
    /// negative value for either sign of the truth; `None` when the truth is
    /// zero.
    pub rbias: Option<f64>,
    pub mse: f64,
}

pub fn replication_metrics(estimates: &[f64], truth: f64) -> Result<ReplicationMetrics> {
    if estimates.is_empty() {
        return Err(Error::Empty("replication estimates"));
    }
    let bias = mean(estimates) - truth;
    let mse = estimates.iter().map(|e| (e - truth) * (e - truth)).sum::<f64>() / estimates.len() as f64;
    Ok(ReplicationMetrics {
        bias,
        rbias: (truth != 0.0).then(|| bias / truth),
        mse,
    })
}
