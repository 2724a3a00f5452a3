//! Additive forests fit by Bayesian backfitting.
//!
//! Each tree is updated against the partial residual of all other trees: one
//! structural Metropolis-Hastings move scored with leaf values integrated
//! out, then a conjugate normal draw of every leaf. Residual variance has an
//! inverse-gamma Gibbs update; the leaf scale is either fixed or carries a
//! half-Cauchy prior updated by slice sampling.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

#[allow(unused_imports)] // float math is not inherent in core on older toolchains
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::slice::slice_step;
use crate::special::{self, LN_2PI};
use crate::text::Lines;
use crate::tree::{
    propose_move, CutpointGrid, MoveKind, MoveProbabilities, NodeId, Proposal, Tree, TreePrior,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeafScalePrior {
    /// The leaf scale is set by the owner (e.g. tied to the residual SD).
    Fixed,
    /// Half-Cauchy prior with the given scale, updated by slice sampling.
    HalfCauchy { scale: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<Tree>,
    /// Prior SD of every leaf value.
    pub leaf_scale: f64,
    pub leaf_scale_prior: LeafScalePrior,
}

impl Forest {
    /// `n_trees` root-only trees with zero leaves.
    pub fn new(n_trees: usize, width: usize, leaf_scale: f64, leaf_scale_prior: LeafScalePrior) -> Result<Self> {
        if n_trees == 0 {
            return Err(Error::Config("a forest needs at least one tree".into()));
        }
        if !(leaf_scale > 0.0 && leaf_scale.is_finite()) {
            return Err(Error::Config(format!("leaf scale must be positive, got {leaf_scale}")));
        }
        Ok(Self {
            trees: (0..n_trees).map(|_| Tree::stump(width, 0.0)).collect(),
            leaf_scale,
            leaf_scale_prior,
        })
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn width(&self) -> usize {
        self.trees[0].width()
    }

    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum()
    }

    pub fn evaluate(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.width() {
            return Err(Error::DimensionMismatch {
                expected: self.width(),
                found: row.len(),
            });
        }
        Ok(self.predict_row(row))
    }

    pub fn leaf_values(&self) -> Vec<f64> {
        self.trees
            .iter()
            .flat_map(|t| t.leaves().into_iter().map(move |l| t.leaf_value(l).unwrap_or(0.0)))
            .collect()
    }

    /// Versioned text checkpoint: header, leaf scale and its prior, the
    /// residual SD owned by the enclosing model, then every tree.
    pub fn write_checkpoint(&self, sigma: f64, out: &mut String) {
        let _ = writeln!(out, "bpcf-forest v1");
        let _ = writeln!(out, "trees {}", self.trees.len());
        let _ = writeln!(out, "leaf_scale {:?}", self.leaf_scale);
        match self.leaf_scale_prior {
            LeafScalePrior::Fixed => {
                let _ = writeln!(out, "leaf_scale_prior fixed");
            }
            LeafScalePrior::HalfCauchy { scale } => {
                let _ = writeln!(out, "leaf_scale_prior half_cauchy {scale:?}");
            }
        }
        let _ = writeln!(out, "sigma {sigma:?}");
        for t in &self.trees {
            t.write_text(out);
        }
    }

    pub fn read_checkpoint(text: &str) -> Result<(Self, f64)> {
        Self::read_lines(&mut Lines::new(text))
    }

    pub(crate) fn read_lines(lines: &mut Lines<'_>) -> Result<(Self, f64)> {
        let header = lines.next_fields()?;
        if header != ["bpcf-forest", "v1"] {
            return Err(lines.err(format!("unsupported forest header `{}`", header.join(" "))));
        }
        let n: usize = lines.value("trees")?;
        let leaf_scale: f64 = lines.value("leaf_scale")?;
        let p = lines.expect("leaf_scale_prior")?;
        let leaf_scale_prior = match p.first().copied() {
            Some("fixed") => LeafScalePrior::Fixed,
            Some("half_cauchy") => LeafScalePrior::HalfCauchy {
                scale: lines.parse(p.get(1))?,
            },
            _ => return Err(lines.err("unknown leaf scale prior")),
        };
        let sigma: f64 = lines.value("sigma")?;
        let trees = (0..n).map(|_| Tree::read_text(lines)).collect::<Result<Vec<_>>>()?;
        if trees.is_empty() {
            return Err(lines.err("forest without trees"));
        }
        Ok((
            Self {
                trees,
                leaf_scale,
                leaf_scale_prior,
            },
            sigma,
        ))
    }
}

/// Rowwise sum of every tree's prediction.
pub fn predict_forest(forest: &Forest, design: &Matrix) -> Result<Vec<f64>> {
    if design.cols() != forest.width() {
        return Err(Error::DimensionMismatch {
            expected: forest.width(),
            found: design.cols(),
        });
    }
    Ok(design.iter_rows().map(|r| forest.predict_row(r)).collect())
}

/// Inverse-gamma prior on σ²: σ² ~ IG(ν/2, νλ/2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisePrior {
    pub nu: f64,
    pub lambda: f64,
}

impl NoisePrior {
    /// Chooses λ so that P(σ < `sd`) = `quantile` under the prior.
    pub fn calibrated(nu: f64, quantile: f64, sd: f64) -> Result<Self> {
        if !(nu > 0.0 && quantile > 0.0 && quantile < 1.0 && sd > 0.0) {
            return Err(Error::Config(format!(
                "noise prior needs nu > 0, quantile in (0,1), sd > 0 (got {nu}, {quantile}, {sd})"
            )));
        }
        let lambda = sd * sd * special::chi_squared_quantile(1.0 - quantile, nu) / nu;
        Ok(Self { nu, lambda })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LeafStats {
    pub n: usize,
    pub sum: f64,
}

/// Log marginal likelihood of the residuals in one leaf with the leaf value
/// integrated against N(0, σ₀²), omitting the −Σr²/(2σ²) term that is the
/// same for every partition of a fixed residual vector.
#[inline]
pub fn log_marginal_leaf(stats: LeafStats, sigma: f64, sigma0: f64) -> f64 {
    if stats.n == 0 {
        return 0.0;
    }
    let n = stats.n as f64;
    let s2 = sigma * sigma;
    let t2 = sigma0 * sigma0;
    let denom = s2 + n * t2;
    -0.5 * n * (LN_2PI + s2.ln()) + 0.5 * (s2 / denom).ln() + t2 * stats.sum * stats.sum / (2.0 * s2 * denom)
}

/// Conjugate normal posterior (mean, sd) of a leaf value.
#[inline]
pub fn leaf_posterior(stats: LeafStats, sigma: f64, sigma0: f64) -> (f64, f64) {
    let s2 = sigma * sigma;
    let precision = stats.n as f64 / s2 + 1.0 / (sigma0 * sigma0);
    ((stats.sum / s2) / precision, precision.sqrt().recip())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counter {
    pub proposed: u64,
    pub accepted: u64,
}

impl Counter {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Structural move counts. A proposal that had no legal move, or that hit a
/// zero-prior or under-populated tree, counts as proposed and rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MoveStats {
    pub grow: Counter,
    pub prune: Counter,
    pub change: Counter,
}

impl MoveStats {
    fn counter(&mut self, kind: MoveKind) -> &mut Counter {
        match kind {
            MoveKind::Grow => &mut self.grow,
            MoveKind::Prune => &mut self.prune,
            MoveKind::Change => &mut self.change,
        }
    }

    pub fn total(&self) -> Counter {
        Counter {
            proposed: self.grow.proposed + self.prune.proposed + self.change.proposed,
            accepted: self.grow.accepted + self.prune.accepted + self.change.accepted,
        }
    }

    pub fn merge(&mut self, other: &MoveStats) {
        for (a, b) in [
            (&mut self.grow, &other.grow),
            (&mut self.prune, &other.prune),
            (&mut self.change, &other.change),
        ] {
            a.proposed += b.proposed;
            a.accepted += b.accepted;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSettings {
    pub prior: TreePrior,
    pub moves: MoveProbabilities,
    /// Minimum number of rows in every leaf touched by an accepted move.
    pub min_leaf_n: usize,
}

impl SweepSettings {
    pub fn new(prior: TreePrior) -> Self {
        Self {
            prior,
            moves: MoveProbabilities::default(),
            min_leaf_n: 5,
        }
    }
}

#[derive(Default)]
struct Scratch {
    leaf_cur: Vec<NodeId>,
    leaf_new: Vec<NodeId>,
    old_fit: Vec<f64>,
    resid: Vec<f64>,
    marks: Vec<bool>,
    stats: Vec<LeafStats>,
}

/// Log-likelihood ratio of `proposal` against `old`, computed from the
/// leaves of the modified subtree only, plus the smallest row count among
/// the new subtree's leaves.
#[cfg(test)]
pub(crate) fn affected_log_likelihood_ratio(
    old: &Tree,
    proposal: &Proposal,
    leaf_old: &[NodeId],
    leaf_new: &[NodeId],
    resid: &[f64],
    sigma: f64,
    sigma0: f64,
) -> (f64, usize) {
    let mut marks = Vec::new();
    let mut stats = Vec::new();
    affected_ratio_with(old, proposal, leaf_old, leaf_new, resid, sigma, sigma0, &mut marks, &mut stats)
}

#[allow(clippy::too_many_arguments)]
fn affected_ratio_with(
    old: &Tree,
    proposal: &Proposal,
    leaf_old: &[NodeId],
    leaf_new: &[NodeId],
    resid: &[f64],
    sigma: f64,
    sigma0: f64,
    marks: &mut Vec<bool>,
    stats: &mut Vec<LeafStats>,
) -> (f64, usize) {
    let mut side = |tree: &Tree, leaf_of: &[NodeId]| -> (f64, usize) {
        marks.clear();
        marks.resize(tree.capacity(), false);
        stats.clear();
        stats.resize(tree.capacity(), LeafStats::default());
        let mut affected = Vec::new();
        for id in tree.leaves() {
            if tree.is_descendant(id, proposal.node) {
                marks[id] = true;
                affected.push(id);
            }
        }
        for (i, &l) in leaf_of.iter().enumerate() {
            if marks[l] {
                stats[l].n += 1;
                stats[l].sum += resid[i];
            }
        }
        let ll = affected.iter().map(|&l| log_marginal_leaf(stats[l], sigma, sigma0)).sum();
        let min_n = affected.iter().map(|&l| stats[l].n).min().unwrap_or(usize::MAX);
        (ll, min_n)
    };
    let (ll_old, _) = side(old, leaf_old);
    let (ll_new, min_new) = side(&proposal.tree, leaf_new);
    (ll_new - ll_old, min_new)
}

/// Sum of [`log_marginal_leaf`] over every leaf of `tree`.
pub fn tree_log_likelihood(tree: &Tree, design: &Matrix, resid: &[f64], sigma: f64, sigma0: f64) -> f64 {
    let mut stats = alloc::vec![LeafStats::default(); tree.capacity()];
    for (i, row) in design.iter_rows().enumerate() {
        let l = tree.leaf_for(row);
        stats[l].n += 1;
        stats[l].sum += resid[i];
    }
    tree.leaves()
        .into_iter()
        .map(|l| log_marginal_leaf(stats[l], sigma, sigma0))
        .sum()
}

/// One backfitting pass over every tree of `forest`.
///
/// `fitted` must hold `predict_forest(forest, design)` on entry and is kept
/// in sync. For each tree the partial residual is
/// `response − offset − (fitted − tree)`; one structural MH move is tried,
/// then all leaves of the resulting tree are redrawn.
#[allow(clippy::too_many_arguments)]
pub fn backfit_sweep<R: Rng + ?Sized>(
    forest: &mut Forest,
    fitted: &mut [f64],
    response: &[f64],
    offset: &[f64],
    design: &Matrix,
    grid: &CutpointGrid,
    sigma: f64,
    settings: &SweepSettings,
    rng: &mut R,
) -> Result<MoveStats> {
    let n = design.rows();
    for (len, _) in [(response.len(), "response"), (offset.len(), "offset"), (fitted.len(), "fitted")] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, found: len });
        }
    }
    if design.cols() != forest.width() || grid.width() != forest.width() {
        return Err(Error::DimensionMismatch {
            expected: forest.width(),
            found: design.cols(),
        });
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::NonFinite("residual SD"));
    }
    let sigma0 = forest.leaf_scale;
    let mut s = Scratch::default();
    let mut stats = MoveStats::default();

    for tree in forest.trees.iter_mut() {
        tree.route_rows(design, &mut s.leaf_cur);
        s.old_fit.clear();
        s.old_fit
            .extend(s.leaf_cur.iter().map(|&l| tree.leaf_value(l).unwrap_or(0.0)));
        s.resid.clear();
        for i in 0..n {
            s.resid.push(response[i] - offset[i] - (fitted[i] - s.old_fit[i]));
        }
        if s.resid.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("partial residuals"));
        }

        let (kind, proposal) = propose_move(tree, grid, &settings.prior, &settings.moves, rng);
        let counter = stats.counter(kind);
        counter.proposed += 1;
        if let Some(p) = proposal {
            if p.log_tree_prior_ratio > f64::NEG_INFINITY {
                p.tree.route_rows(design, &mut s.leaf_new);
                let (lr, min_n) = affected_ratio_with(
                    tree,
                    &p,
                    &s.leaf_cur,
                    &s.leaf_new,
                    &s.resid,
                    sigma,
                    sigma0,
                    &mut s.marks,
                    &mut s.stats,
                );
                if min_n >= settings.min_leaf_n {
                    let log_alpha = lr + p.log_tree_prior_ratio + p.log_transition_ratio;
                    if rng.random::<f64>().ln() < log_alpha {
                        *tree = p.tree;
                        core::mem::swap(&mut s.leaf_cur, &mut s.leaf_new);
                        counter.accepted += 1;
                    }
                }
            }
        }

        draw_leaves(tree, &s.leaf_cur, &s.resid, sigma, sigma0, &mut s.stats, rng);
        for i in 0..n {
            let v = tree.leaf_value(s.leaf_cur[i]).unwrap_or(0.0);
            fitted[i] += v - s.old_fit[i];
        }
    }
    Ok(stats)
}

fn draw_leaves<R: Rng + ?Sized>(
    tree: &mut Tree,
    leaf_of: &[NodeId],
    resid: &[f64],
    sigma: f64,
    sigma0: f64,
    stats: &mut Vec<LeafStats>,
    rng: &mut R,
) {
    stats.clear();
    stats.resize(tree.capacity(), LeafStats::default());
    for (i, &l) in leaf_of.iter().enumerate() {
        stats[l].n += 1;
        stats[l].sum += resid[i];
    }
    for l in tree.leaves() {
        let (m, sd) = leaf_posterior(stats[l], sigma, sigma0);
        let z: f64 = StandardNormal.sample(rng);
        tree.set_leaf_value(l, m + sd * z);
    }
}

/// Gibbs draw of σ from σ² ~ IG(ν/2 + n/2, νλ/2 + Σr²/2).
pub fn update_sigma<R: Rng + ?Sized>(residuals: &[f64], prior: &NoisePrior, rng: &mut R) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::Empty("residuals"));
    }
    let mut ss = 0.0;
    for r in residuals {
        if !r.is_finite() {
            return Err(Error::NonFinite("residuals"));
        }
        ss += r * r;
    }
    let shape = 0.5 * (prior.nu + residuals.len() as f64);
    let rate = 0.5 * (prior.nu * prior.lambda + ss);
    let g = Gamma::new(shape, 1.0).map_err(|_| Error::Config(format!("invalid gamma shape {shape}")))?;
    let draw: f64 = g.sample(rng);
    Ok((rate / draw).sqrt())
}

/// Log density, up to a constant, of log σ₀ given leaf values under
/// N(0, σ₀²) leaves and a half-Cauchy(`hc_scale`) prior on σ₀.
pub fn leaf_scale_log_posterior(log_sigma0: f64, sum_sq: f64, n_leaves: usize, hc_scale: f64) -> f64 {
    let s0 = log_sigma0.exp();
    if !(s0 > 0.0 && s0.is_finite()) {
        return f64::NEG_INFINITY;
    }
    let ratio = s0 / hc_scale;
    -(n_leaves as f64) * log_sigma0 - 0.5 * sum_sq / (s0 * s0) - (1.0 + ratio * ratio).ln() + log_sigma0
}

/// One slice-sampling update of the leaf scale σ₀ (on the log scale).
pub fn update_leaf_scale<R: Rng + ?Sized>(current: f64, leaf_values: &[f64], hc_scale: f64, rng: &mut R) -> f64 {
    let sum_sq: f64 = leaf_values.iter().map(|v| v * v).sum();
    let n = leaf_values.len();
    let x = slice_step(
        current.ln(),
        |t| leaf_scale_log_posterior(t, sum_sq, n, hc_scale),
        1.0,
        64,
        rng,
    );
    x.exp()
}

/// Half-Cauchy scale whose third quartile equals `q3`.
pub fn half_cauchy_scale_for_q3(q3: f64) -> f64 {
    q3 / special::half_cauchy_q3_factor()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{propose_kind, SplitRule, ROOT};
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_leaf_contributes_nothing() {
        assert_eq!(log_marginal_leaf(LeafStats { n: 0, sum: 0.0 }, 1.3, 0.2), 0.0);
    }

    #[test]
    fn single_zero_residual_is_normal_with_added_variance() {
        let v = log_marginal_leaf(LeafStats { n: 1, sum: 0.0 }, 1.0, 1.0);
        let expected = -0.5 * (2.0 * core::f64::consts::PI * 2.0).ln();
        assert!((v - expected).abs() < 1e-14);
    }

    #[test]
    fn half_cauchy_calibration_hits_third_quartile() {
        let sd = 1.7;
        let s = half_cauchy_scale_for_q3(2.0 * sd);
        // CDF of HalfCauchy(s) at q: (2/π) atan(q/s)
        let cdf = 2.0 / core::f64::consts::PI * (2.0 * sd / s).atan();
        assert!((cdf - 0.75).abs() < 1e-14);
    }

    #[test]
    fn noise_prior_calibration() {
        let p = NoisePrior::calibrated(3.0, 0.9, 1.0).unwrap();
        assert!((p.lambda - 0.194_791_458).abs() < 1e-7);
        assert!(NoisePrior::calibrated(0.0, 0.9, 1.0).is_err());
    }

    #[test]
    fn predict_forest_is_sum_of_trees() {
        let mut a = Tree::stump(1, 0.0);
        a.grow(ROOT, SplitRule { var: 0, cutpoint: 0.0 }, -1.0, 2.0);
        let b = Tree::stump(1, 0.5);
        let f = Forest {
            trees: vec![a.clone(), b.clone()],
            leaf_scale: 1.0,
            leaf_scale_prior: LeafScalePrior::Fixed,
        };
        let d = Matrix::from_rows(&[vec![-1.0], vec![1.0]]).unwrap();
        assert_eq!(predict_forest(&f, &d).unwrap(), vec![-0.5, 2.5]);
        let zero = Forest::new(3, 1, 1.0, LeafScalePrior::Fixed).unwrap();
        assert_eq!(predict_forest(&zero, &d).unwrap(), vec![0.0, 0.0]);
        assert!(predict_forest(&f, &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn update_sigma_rejects_empty_and_non_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = NoisePrior { nu: 3.0, lambda: 1.0 };
        assert_eq!(update_sigma(&[], &p, &mut rng), Err(Error::Empty("residuals")));
        assert!(update_sigma(&[f64::NAN], &p, &mut rng).is_err());
    }

    #[test]
    fn non_finite_response_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let grid = CutpointGrid::from_design(&d, 10);
        let mut f = Forest::new(1, 1, 1.0, LeafScalePrior::Fixed).unwrap();
        let mut fit = vec![0.0; 2];
        let r = backfit_sweep(
            &mut f,
            &mut fit,
            &[f64::NAN, 0.0],
            &[0.0, 0.0],
            &d,
            &grid,
            1.0,
            &SweepSettings::new(TreePrior::PROGNOSTIC),
            &mut rng,
        );
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    /// Affected-leaf ratios against full-tree recomputation on a logged
    /// sequence of proposals, with identical accept/reject decisions.
    #[test]
    fn affected_leaf_ratio_matches_full_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 400;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let design = Matrix::from_rows(&rows).unwrap();
        let resid: Vec<f64> = rows
            .iter()
            .map(|r| if r[0] < 0.4 { 1.0 } else { -0.5 } + r[1] + 0.3 * (rng.random::<f64>() - 0.5))
            .collect();
        let grid = CutpointGrid::from_design(&design, 20);
        let prior = TreePrior::PROGNOSTIC;
        let moves = MoveProbabilities::default();
        let (sigma, sigma0) = (0.4, 0.7);
        let mut tree = Tree::stump(3, 0.0);
        let mut leaf_old = Vec::new();
        let mut leaf_new = Vec::new();
        let mut checked = 0;
        for _ in 0..3000 {
            let (_, prop) = propose_move(&tree, &grid, &prior, &moves, &mut rng);
            let Some(p) = prop else { continue };
            if p.log_tree_prior_ratio == f64::NEG_INFINITY {
                continue;
            }
            tree.route_rows(&design, &mut leaf_old);
            p.tree.route_rows(&design, &mut leaf_new);
            let (fast, _) = affected_log_likelihood_ratio(&tree, &p, &leaf_old, &leaf_new, &resid, sigma, sigma0);
            let full = tree_log_likelihood(&p.tree, &design, &resid, sigma, sigma0)
                - tree_log_likelihood(&tree, &design, &resid, sigma, sigma0);
            assert!((fast - full).abs() < 1e-10, "{fast} vs {full}");
            let u: f64 = rng.random::<f64>().ln();
            let a_fast = u < fast + p.log_tree_prior_ratio + p.log_transition_ratio;
            let a_full = u < full + p.log_tree_prior_ratio + p.log_transition_ratio;
            assert_eq!(a_fast, a_full);
            if a_fast {
                tree = p.tree;
            }
            checked += 1;
        }
        assert!(checked > 1000);
        assert!(tree.num_leaves() > 1);
    }

    #[test]
    fn min_leaf_n_holds_for_accepted_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 60;
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, (i * 7 % 13) as f64]).collect();
        let design = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = (0..n).map(|i| if i < 30 { -2.0 } else { 2.0 } + 0.1 * (i % 3) as f64).collect();
        let grid = CutpointGrid::from_design(&design, 100);
        let settings = SweepSettings::new(TreePrior::PROGNOSTIC);
        let mut f = Forest::new(5, 2, 0.5, LeafScalePrior::Fixed).unwrap();
        let mut fit = vec![0.0; n];
        let zeros = vec![0.0; n];
        let mut leaf_of = Vec::new();
        for _ in 0..300 {
            backfit_sweep(&mut f, &mut fit, &y, &zeros, &design, &grid, 0.2, &settings, &mut rng).unwrap();
            for t in &f.trees {
                t.route_rows(&design, &mut leaf_of);
                for l in t.leaves() {
                    let c = leaf_of.iter().filter(|&&x| x == l).count();
                    assert!(c >= settings.min_leaf_n, "leaf with {c} rows");
                }
            }
        }
        let pred = predict_forest(&f, &design).unwrap();
        for (a, b) in pred.iter().zip(&fit) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn forest_checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = Matrix::from_rows(&(0..50).map(|i| vec![i as f64 / 50.0]).collect::<Vec<_>>()).unwrap();
        let y: Vec<f64> = (0..50).map(|i| (i as f64 / 8.0).sin()).collect();
        let grid = CutpointGrid::from_design(&d, 100);
        let mut f = Forest::new(4, 1, 0.3, LeafScalePrior::HalfCauchy { scale: 0.8 }).unwrap();
        let mut fit = vec![0.0; 50];
        for _ in 0..50 {
            backfit_sweep(&mut f, &mut fit, &y, &[0.0; 50], &d, &grid, 0.3, &SweepSettings::new(TreePrior::PROGNOSTIC), &mut rng)
                .unwrap();
        }
        let mut text = String::new();
        f.write_checkpoint(0.123, &mut text);
        let (back, sigma) = Forest::read_checkpoint(&text).unwrap();
        assert_eq!(back, f);
        assert_eq!(sigma, 0.123);
        assert!(Forest::read_checkpoint("bpcf-forest v9\n").is_err());
    }

    #[test]
    fn forced_grow_on_stump_then_prune_gets_zero_ratio() {
        let grid = CutpointGrid::from_cuts(vec![vec![0.5]]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = Tree::stump(1, 0.0);
        let moves = MoveProbabilities::default();
        let g = propose_kind(MoveKind::Grow, &t, &grid, &TreePrior::PROGNOSTIC, &moves, &mut rng).unwrap();
        let p = propose_kind(MoveKind::Prune, &g.tree, &grid, &TreePrior::PROGNOSTIC, &moves, &mut rng).unwrap();
        assert!((g.log_transition_ratio + p.log_transition_ratio).abs() < 1e-14);
    }
}
