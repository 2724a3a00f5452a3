//! Binary regression trees, the branching-process tree prior, and the
//! GROW / PRUNE / CHANGE structural proposals used by every forest.
//!
//! A split sends a row left iff `row[var] < cutpoint`. Cutpoints always come
//! from a fixed [`CutpointGrid`]; below a split on `(v, c)` only grid values
//! strictly on the proper side of `c` remain available for variable `v`, so
//! every proposable tree has non-empty cells in covariate space. The rule
//! prior at a node is uniform over variables that still have an available
//! cutpoint, then uniform over that variable's available cutpoints.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;
use core::ops::Range;

#[allow(unused_imports)] // float math is not inherent in core on older toolchains
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::text::Lines;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRule {
    pub var: usize,
    pub cutpoint: f64,
}

impl SplitRule {
    #[inline]
    pub fn goes_left(&self, row: &[f64]) -> bool {
        row[self.var] < self.cutpoint
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum NodeKind {
    Leaf(f64),
    Split {
        rule: SplitRule,
        left: NodeId,
        right: NodeId,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Node {
    kind: NodeKind,
    parent: Option<NodeId>,
    depth: usize,
}

/// A regression tree over rows of a fixed width.
///
/// Nodes live in an arena; pruned slots are recycled through a free list, so
/// node ids are stable for the lifetime of a node but not across
/// serialization.
#[derive(Debug, Clone)]
pub struct Tree {
    width: usize,
    nodes: Vec<Node>,
    free: Vec<NodeId>,
}

pub const ROOT: NodeId = 0;

impl Tree {
    /// Root-only tree with leaf value `value` over rows of `width` columns.
    pub fn stump(width: usize, value: f64) -> Self {
        Self {
            width,
            nodes: alloc::vec![Node {
                kind: NodeKind::Leaf(value),
                parent: None,
                depth: 0,
            }],
            free: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Size of the node arena; node ids are below this bound.
    pub fn capacity(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        matches!(self.nodes[id].kind, NodeKind::Leaf(_))
    }

    pub fn depth(&self, id: NodeId) -> usize {
        self.nodes[id].depth
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id].parent
    }

    pub fn rule(&self, id: NodeId) -> Option<SplitRule> {
        match self.nodes[id].kind {
            NodeKind::Split { rule, .. } => Some(rule),
            NodeKind::Leaf(_) => None,
        }
    }

    pub fn children(&self, id: NodeId) -> Option<(NodeId, NodeId)> {
        match self.nodes[id].kind {
            NodeKind::Split { left, right, .. } => Some((left, right)),
            NodeKind::Leaf(_) => None,
        }
    }

    pub fn leaf_value(&self, id: NodeId) -> Option<f64> {
        match self.nodes[id].kind {
            NodeKind::Leaf(v) => Some(v),
            NodeKind::Split { .. } => None,
        }
    }

    pub fn set_leaf_value(&mut self, id: NodeId, value: f64) {
        if let NodeKind::Leaf(v) = &mut self.nodes[id].kind {
            *v = value;
        }
    }

    /// Node ids in preorder.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = alloc::vec![ROOT];
        while let Some(id) = stack.pop() {
            out.push(id);
            if let NodeKind::Split { left, right, .. } = self.nodes[id].kind {
                stack.push(right);
                stack.push(left);
            }
        }
        out
    }

    pub fn leaves(&self) -> Vec<NodeId> {
        self.preorder()
            .into_iter()
            .filter(|&id| self.is_leaf(id))
            .collect()
    }

    pub fn interior_nodes(&self) -> Vec<NodeId> {
        self.preorder()
            .into_iter()
            .filter(|&id| !self.is_leaf(id))
            .collect()
    }

    /// Interior nodes whose two children are both leaves.
    pub fn prunable_nodes(&self) -> Vec<NodeId> {
        self.preorder()
            .into_iter()
            .filter(|&id| match self.nodes[id].kind {
                NodeKind::Split { left, right, .. } => self.is_leaf(left) && self.is_leaf(right),
                NodeKind::Leaf(_) => false,
            })
            .collect()
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves().len()
    }

    /// True iff `id` lies in the subtree rooted at `ancestor` (inclusive).
    pub fn is_descendant(&self, mut id: NodeId, ancestor: NodeId) -> bool {
        loop {
            if id == ancestor {
                return true;
            }
            match self.nodes[id].parent {
                Some(p) => id = p,
                None => return false,
            }
        }
    }

    fn alloc(&mut self, node: Node) -> NodeId {
        if let Some(id) = self.free.pop() {
            self.nodes[id] = node;
            id
        } else {
            self.nodes.push(node);
            self.nodes.len() - 1
        }
    }

    /// Turns leaf `id` into a split with two fresh leaves.
    pub fn grow(&mut self, id: NodeId, rule: SplitRule, left_value: f64, right_value: f64) {
        debug_assert!(self.is_leaf(id));
        let depth = self.nodes[id].depth + 1;
        let left = self.alloc(Node {
            kind: NodeKind::Leaf(left_value),
            parent: Some(id),
            depth,
        });
        let right = self.alloc(Node {
            kind: NodeKind::Leaf(right_value),
            parent: Some(id),
            depth,
        });
        self.nodes[id].kind = NodeKind::Split { rule, left, right };
    }

    /// Collapses a split whose children are both leaves.
    pub fn prune(&mut self, id: NodeId, value: f64) {
        if let NodeKind::Split { left, right, .. } = self.nodes[id].kind {
            debug_assert!(self.is_leaf(left) && self.is_leaf(right));
            self.free.push(right);
            self.free.push(left);
            self.nodes[id].kind = NodeKind::Leaf(value);
        }
    }

    pub fn set_rule(&mut self, id: NodeId, new_rule: SplitRule) {
        if let NodeKind::Split { rule, .. } = &mut self.nodes[id].kind {
            *rule = new_rule;
        }
    }

    /// Terminal node reached by `row`. No width check.
    #[inline]
    pub fn leaf_for(&self, row: &[f64]) -> NodeId {
        let mut id = ROOT;
        loop {
            match self.nodes[id].kind {
                NodeKind::Leaf(_) => return id,
                NodeKind::Split { rule, left, right } => {
                    id = if rule.goes_left(row) { left } else { right };
                }
            }
        }
    }

    /// Leaf value for `row`. No width check.
    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut id = ROOT;
        loop {
            match self.nodes[id].kind {
                NodeKind::Leaf(v) => return v,
                NodeKind::Split { rule, left, right } => {
                    id = if rule.goes_left(row) { left } else { right };
                }
            }
        }
    }

    pub fn evaluate(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.width {
            return Err(Error::DimensionMismatch {
                expected: self.width,
                found: row.len(),
            });
        }
        Ok(self.predict_row(row))
    }

    /// Per-row leaf ids over a design, written into `out`.
    pub fn route_rows(&self, design: &Matrix, out: &mut Vec<NodeId>) {
        out.clear();
        out.extend((0..design.rows()).map(|i| self.leaf_for(design.row(i))));
    }

    /// Line-oriented preorder text: a `tree <width> <nodes>` header, then one
    /// `S <var> <cutpoint>` or `L <value>` line per node.
    pub fn write_text(&self, out: &mut String) {
        let order = self.preorder();
        let _ = writeln!(out, "tree {} {}", self.width, order.len());
        for id in order {
            match self.nodes[id].kind {
                NodeKind::Leaf(v) => {
                    let _ = writeln!(out, "L {v:?}");
                }
                NodeKind::Split { rule, .. } => {
                    let _ = writeln!(out, "S {} {:?}", rule.var, rule.cutpoint);
                }
            }
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        self.write_text(&mut s);
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        Self::read_text(&mut lines)
    }

    pub(crate) fn read_text(lines: &mut Lines<'_>) -> Result<Self> {
        let header = lines.expect("tree")?;
        let width: usize = lines.parse(header.first())?;
        let count: usize = lines.parse(header.get(1))?;
        let mut records = Vec::with_capacity(count);
        for _ in 0..count {
            let f = lines.next_fields()?;
            let rec = match f.first().copied() {
                Some("L") if f.len() == 2 => NodeKind::Leaf(lines.parse(f.get(1))?),
                Some("S") if f.len() == 3 => {
                    let var: usize = lines.parse(f.get(1))?;
                    if var >= width {
                        return Err(lines.err(format!("split variable {var} >= width {width}")));
                    }
                    NodeKind::Split {
                        rule: SplitRule {
                            var,
                            cutpoint: lines.parse(f.get(2))?,
                        },
                        left: 0,
                        right: 0,
                    }
                }
                _ => return Err(lines.err("expected `L <value>` or `S <var> <cutpoint>`")),
            };
            records.push(rec);
        }
        let mut tree = Tree {
            width,
            nodes: Vec::with_capacity(count),
            free: Vec::new(),
        };
        let mut pos = 0;
        tree.build_preorder(&records, &mut pos, None, 0)
            .ok_or_else(|| lines.err("truncated preorder"))?;
        if pos != records.len() {
            return Err(lines.err("trailing nodes after complete tree"));
        }
        Ok(tree)
    }

    fn build_preorder(
        &mut self,
        records: &[NodeKind],
        pos: &mut usize,
        parent: Option<NodeId>,
        depth: usize,
    ) -> Option<NodeId> {
        let rec = *records.get(*pos)?;
        *pos += 1;
        let id = self.nodes.len();
        self.nodes.push(Node {
            kind: NodeKind::Leaf(0.0),
            parent,
            depth,
        });
        match rec {
            NodeKind::Leaf(v) => self.nodes[id].kind = NodeKind::Leaf(v),
            NodeKind::Split { rule, .. } => {
                let left = self.build_preorder(records, pos, Some(id), depth + 1)?;
                let right = self.build_preorder(records, pos, Some(id), depth + 1)?;
                self.nodes[id].kind = NodeKind::Split { rule, left, right };
            }
        }
        Some(id)
    }
}

/// Trees compare by structure and values, not arena layout.
impl PartialEq for Tree {
    fn eq(&self, other: &Self) -> bool {
        if self.width != other.width {
            return false;
        }
        let a = self.preorder();
        let b = other.preorder();
        a.len() == b.len()
            && a.iter().zip(&b).all(|(&i, &j)| {
                match (self.nodes[i].kind, other.nodes[j].kind) {
                    (NodeKind::Leaf(x), NodeKind::Leaf(y)) => x.to_bits() == y.to_bits(),
                    (NodeKind::Split { rule: r, .. }, NodeKind::Split { rule: s, .. }) => {
                        r.var == s.var && r.cutpoint.to_bits() == s.cutpoint.to_bits()
                    }
                    _ => false,
                }
            })
    }
}

/// Probability that a node at `depth` is split: `alpha * (1 + depth)^(-beta)`.
pub fn split_probability(depth: usize, alpha: f64, beta: f64) -> f64 {
    alpha * (1.0 + depth as f64).powf(-beta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreePrior {
    pub alpha: f64,
    pub beta: f64,
}

impl TreePrior {
    pub const PROGNOSTIC: TreePrior = TreePrior {
        alpha: 0.95,
        beta: 2.0,
    };
    pub const MODIFIER: TreePrior = TreePrior {
        alpha: 0.25,
        beta: 3.0,
    };

    pub fn split_probability(&self, depth: usize) -> f64 {
        split_probability(depth, self.alpha, self.beta)
    }
}

/// Sorted candidate thresholds per covariate.
#[derive(Debug, Clone, PartialEq)]
pub struct CutpointGrid {
    cuts: Vec<Vec<f64>>,
}

impl CutpointGrid {
    pub fn from_cuts(cuts: Vec<Vec<f64>>) -> Self {
        Self { cuts }
    }

    /// Up to `max_cuts` thresholds per column at equally spaced quantile
    /// levels, kept only when strictly inside the observed range and
    /// deduplicated. Two-valued columns get their midpoint; constant columns
    /// get no cutpoints.
    pub fn from_design(design: &Matrix, max_cuts: usize) -> Self {
        let cuts = (0..design.cols())
            .map(|j| column_cutpoints(&design.column(j), max_cuts))
            .collect();
        Self { cuts }
    }

    pub fn width(&self) -> usize {
        self.cuts.len()
    }

    pub fn cuts(&self, var: usize) -> &[f64] {
        &self.cuts[var]
    }

    /// Position of an exact grid cutpoint.
    pub fn index_of(&self, var: usize, cut: f64) -> Option<usize> {
        let c = self.cuts.get(var)?;
        let k = c.partition_point(|&v| v < cut);
        (k < c.len() && c[k] == cut).then_some(k)
    }

    fn full_ranges(&self) -> Vec<Range<usize>> {
        self.cuts.iter().map(|c| 0..c.len()).collect()
    }
}

pub fn column_cutpoints(values: &[f64], max_cuts: usize) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() < 2 {
        return Vec::new();
    }
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if sorted.len() == 2 {
        return alloc::vec![0.5 * (lo + hi)];
    }
    if sorted.len() <= max_cuts + 1 {
        return sorted.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    let mut all: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    all.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = (1..=max_cuts)
        .map(|k| crate::special::quantile_sorted(&all, k as f64 / (max_cuts + 1) as f64))
        .filter(|&q| q > lo && q < hi)
        .collect();
    out.dedup();
    out
}

/// Available cutpoint index ranges per variable at `node`, given the splits
/// of its ancestors. `None` if an ancestor rule is not on the grid or is
/// outside its own available range.
pub fn node_ranges(tree: &Tree, grid: &CutpointGrid, node: NodeId) -> Option<Vec<Range<usize>>> {
    let mut path = Vec::new();
    let mut id = node;
    while let Some(p) = tree.parent(id) {
        path.push((p, id));
        id = p;
    }
    let mut ranges = grid.full_ranges();
    for &(p, child) in path.iter().rev() {
        let rule = tree.rule(p)?;
        let k = grid.index_of(rule.var, rule.cutpoint)?;
        let r = &mut ranges[rule.var];
        if !r.contains(&k) {
            return None;
        }
        let (left, _) = tree.children(p)?;
        if child == left {
            r.end = k;
        } else {
            r.start = k + 1;
        }
    }
    Some(ranges)
}

fn splittable(ranges: &[Range<usize>]) -> bool {
    ranges.iter().any(|r| !r.is_empty())
}

/// log of the rule prior 1/(#usable vars × #cutpoints of `var`) at a node.
fn ln_rule_probability(ranges: &[Range<usize>], var: usize) -> f64 {
    let usable = ranges.iter().filter(|r| !r.is_empty()).count();
    let n_cuts = ranges[var].len();
    if usable == 0 || n_cuts == 0 {
        return f64::NEG_INFINITY;
    }
    -((usable as f64).ln() + (n_cuts as f64).ln())
}

/// Log prior probability of a tree structure (leaf values excluded).
/// Unsplittable leaves contribute probability one; trees with rules outside
/// their available ranges have prior zero.
pub fn log_tree_prior(tree: &Tree, grid: &CutpointGrid, prior: &TreePrior) -> f64 {
    fn walk(
        tree: &Tree,
        grid: &CutpointGrid,
        prior: &TreePrior,
        id: NodeId,
        ranges: &mut Vec<Range<usize>>,
    ) -> f64 {
        let d = tree.depth(id);
        match tree.nodes[id].kind {
            NodeKind::Leaf(_) => {
                if splittable(ranges) {
                    (1.0 - prior.split_probability(d)).ln()
                } else {
                    0.0
                }
            }
            NodeKind::Split { rule, left, right } => {
                let Some(k) = grid.index_of(rule.var, rule.cutpoint) else {
                    return f64::NEG_INFINITY;
                };
                let saved = ranges[rule.var].clone();
                if !saved.contains(&k) {
                    return f64::NEG_INFINITY;
                }
                let mut lp = prior.split_probability(d).ln() + ln_rule_probability(ranges, rule.var);
                ranges[rule.var] = saved.start..k;
                lp += walk(tree, grid, prior, left, ranges);
                ranges[rule.var] = k + 1..saved.end;
                lp += walk(tree, grid, prior, right, ranges);
                ranges[rule.var] = saved;
                lp
            }
        }
    }
    if tree.width() != grid.width() {
        return f64::NEG_INFINITY;
    }
    let mut ranges = grid.full_ranges();
    walk(tree, grid, prior, ROOT, &mut ranges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveKind {
    Grow,
    Prune,
    Change,
}

/// Mixture weights over the three structural moves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveProbabilities {
    pub grow: f64,
    pub prune: f64,
    pub change: f64,
}

impl Default for MoveProbabilities {
    fn default() -> Self {
        Self {
            grow: 0.4,
            prune: 0.4,
            change: 0.2,
        }
    }
}

impl MoveProbabilities {
    pub fn validate(&self) -> Result<()> {
        let all = [self.grow, self.prune, self.change];
        if all.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || self.grow <= 0.0 || self.prune <= 0.0 {
            return Err(Error::Config(format!("invalid move probabilities {self:?}")));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MoveKind {
        let total = self.grow + self.prune + self.change;
        let u = rng.random::<f64>() * total;
        if u < self.grow {
            MoveKind::Grow
        } else if u < self.grow + self.prune {
            MoveKind::Prune
        } else {
            MoveKind::Change
        }
    }

    fn ln_weight(&self, kind: MoveKind) -> f64 {
        let total = self.grow + self.prune + self.change;
        match kind {
            MoveKind::Grow => (self.grow / total).ln(),
            MoveKind::Prune => (self.prune / total).ln(),
            MoveKind::Change => (self.change / total).ln(),
        }
    }
}

/// A proposed structural change. Leaf values of new leaves are placeholders;
/// samplers integrate them out and redraw all leaves after the MH decision.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub kind: MoveKind,
    /// The grown leaf, pruned parent or changed interior node. The same id
    /// addresses the modified subtree in both the old and the new tree.
    pub node: NodeId,
    pub tree: Tree,
    pub log_transition_ratio: f64,
    pub log_tree_prior_ratio: f64,
}

/// Samples a move kind from `moves` and proposes it. `None` means no legal
/// move of the sampled kind exists; the caller counts that as a rejection.
pub fn propose_move<R: Rng + ?Sized>(
    tree: &Tree,
    grid: &CutpointGrid,
    prior: &TreePrior,
    moves: &MoveProbabilities,
    rng: &mut R,
) -> (MoveKind, Option<Proposal>) {
    let kind = moves.sample(rng);
    (kind, propose_kind(kind, tree, grid, prior, moves, rng))
}

pub fn propose_kind<R: Rng + ?Sized>(
    kind: MoveKind,
    tree: &Tree,
    grid: &CutpointGrid,
    prior: &TreePrior,
    moves: &MoveProbabilities,
    rng: &mut R,
) -> Option<Proposal> {
    match kind {
        MoveKind::Grow => propose_grow(tree, grid, prior, moves, rng),
        MoveKind::Prune => propose_prune(tree, grid, prior, moves, rng),
        MoveKind::Change => propose_change(tree, grid, prior, rng),
    }
}

fn draw_rule<R: Rng + ?Sized>(ranges: &[Range<usize>], grid: &CutpointGrid, rng: &mut R) -> Option<SplitRule> {
    let usable: Vec<usize> = (0..ranges.len()).filter(|&v| !ranges[v].is_empty()).collect();
    if usable.is_empty() {
        return None;
    }
    let var = usable[rng.random_range(0..usable.len())];
    let k = rng.random_range(ranges[var].clone());
    Some(SplitRule {
        var,
        cutpoint: grid.cuts(var)[k],
    })
}

fn propose_grow<R: Rng + ?Sized>(
    tree: &Tree,
    grid: &CutpointGrid,
    prior: &TreePrior,
    moves: &MoveProbabilities,
    rng: &mut R,
) -> Option<Proposal> {
    let leaves = tree.leaves();
    let leaf = leaves[rng.random_range(0..leaves.len())];
    let ranges = node_ranges(tree, grid, leaf)?;
    let rule = draw_rule(&ranges, grid, rng)?;
    let mut new_tree = tree.clone();
    let v = tree.leaf_value(leaf).unwrap_or(0.0);
    new_tree.grow(leaf, rule, v, v);
    let nog_after = new_tree.prunable_nodes().len() as f64;
    let ln_fwd = moves.ln_weight(MoveKind::Grow) - (leaves.len() as f64).ln() + ln_rule_probability(&ranges, rule.var);
    let ln_rev = moves.ln_weight(MoveKind::Prune) - nog_after.ln();
    Some(Proposal {
        kind: MoveKind::Grow,
        node: leaf,
        log_transition_ratio: ln_rev - ln_fwd,
        log_tree_prior_ratio: log_tree_prior(&new_tree, grid, prior) - log_tree_prior(tree, grid, prior),
        tree: new_tree,
    })
}

fn propose_prune<R: Rng + ?Sized>(
    tree: &Tree,
    grid: &CutpointGrid,
    prior: &TreePrior,
    moves: &MoveProbabilities,
    rng: &mut R,
) -> Option<Proposal> {
    let nogs = tree.prunable_nodes();
    if nogs.is_empty() {
        return None;
    }
    let node = nogs[rng.random_range(0..nogs.len())];
    let rule = tree.rule(node)?;
    let ranges = node_ranges(tree, grid, node)?;
    let mut new_tree = tree.clone();
    new_tree.prune(node, 0.0);
    let leaves_after = new_tree.num_leaves() as f64;
    let ln_fwd = moves.ln_weight(MoveKind::Prune) - (nogs.len() as f64).ln();
    let ln_rev = moves.ln_weight(MoveKind::Grow) - leaves_after.ln() + ln_rule_probability(&ranges, rule.var);
    Some(Proposal {
        kind: MoveKind::Prune,
        node,
        log_transition_ratio: ln_rev - ln_fwd,
        log_tree_prior_ratio: log_tree_prior(&new_tree, grid, prior) - log_tree_prior(tree, grid, prior),
        tree: new_tree,
    })
}

fn propose_change<R: Rng + ?Sized>(
    tree: &Tree,
    grid: &CutpointGrid,
    prior: &TreePrior,
    rng: &mut R,
) -> Option<Proposal> {
    let interior = tree.interior_nodes();
    if interior.is_empty() {
        return None;
    }
    let node = interior[rng.random_range(0..interior.len())];
    let old_rule = tree.rule(node)?;
    let ranges = node_ranges(tree, grid, node)?;
    let rule = draw_rule(&ranges, grid, rng)?;
    let mut new_tree = tree.clone();
    new_tree.set_rule(node, rule);
    Some(Proposal {
        kind: MoveKind::Change,
        node,
        log_transition_ratio: ln_rule_probability(&ranges, old_rule.var) - ln_rule_probability(&ranges, rule.var),
        log_tree_prior_ratio: log_tree_prior(&new_tree, grid, prior) - log_tree_prior(tree, grid, prior),
        tree: new_tree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid2() -> CutpointGrid {
        CutpointGrid::from_cuts(vec![vec![0.25, 0.5, 0.75], vec![0.5]])
    }

    #[test]
    fn stump_evaluates_to_its_value() {
        let t = Tree::stump(3, 0.0);
        assert_eq!(t.evaluate(&[1.0, -4.0, 9.0]).unwrap(), 0.0);
    }

    #[test]
    fn depth_one_split_routes_by_strict_less_than() {
        let mut t = Tree::stump(1, 0.0);
        t.grow(ROOT, SplitRule { var: 0, cutpoint: 0.5 }, -1.0, 1.0);
        assert_eq!(t.evaluate(&[0.2]).unwrap(), -1.0);
        assert_eq!(t.evaluate(&[0.5]).unwrap(), 1.0);
        assert_eq!(t.evaluate(&[0.9]).unwrap(), 1.0);
    }

    #[test]
    fn evaluate_rejects_wrong_width() {
        let t = Tree::stump(2, 1.0);
        assert_eq!(
            t.evaluate(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        );
    }

    #[test]
    fn split_probability_values() {
        assert!((split_probability(0, 0.95, 2.0) - 0.95).abs() < 1e-15);
        assert!((split_probability(1, 0.95, 2.0) - 0.2375).abs() < 1e-15);
        assert!((split_probability(0, 0.25, 3.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn prune_on_root_only_tree_is_rejected_in_place() {
        let t = Tree::stump(2, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = propose_kind(
            MoveKind::Prune,
            &t,
            &grid2(),
            &TreePrior::PROGNOSTIC,
            &MoveProbabilities::default(),
            &mut rng,
        );
        assert!(p.is_none());
        let p = propose_kind(
            MoveKind::Change,
            &t,
            &grid2(),
            &TreePrior::PROGNOSTIC,
            &MoveProbabilities::default(),
            &mut rng,
        );
        assert!(p.is_none());
    }

    #[test]
    fn grow_from_root_has_hand_computed_prior_ratio() {
        let grid = grid2();
        let prior = TreePrior::PROGNOSTIC;
        let t = Tree::stump(2, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let p = propose_kind(MoveKind::Grow, &t, &grid, &prior, &MoveProbabilities::default(), &mut rng)
                .unwrap();
            assert_eq!(p.tree.num_leaves(), 2);
            let rule = p.tree.rule(ROOT).unwrap();
            let n_rules = 2.0 * grid.cuts(rule.var).len() as f64;
            // both children remain splittable on this grid: var 0 always
            // keeps a cutpoint on one side, and var 1 is untouched otherwise
            let (l, r) = p.tree.children(ROOT).unwrap();
            let l_split = splittable(&node_ranges(&p.tree, &grid, l).unwrap());
            let r_split = splittable(&node_ranges(&p.tree, &grid, r).unwrap());
            let p0 = split_probability(0, 0.95, 2.0);
            let p1 = split_probability(1, 0.95, 2.0);
            let leaf_term = |s: bool| if s { 1.0 - p1 } else { 1.0 };
            let expected = p0 * leaf_term(l_split) * leaf_term(r_split) / n_rules / (1.0 - p0);
            assert!((p.log_tree_prior_ratio - expected.ln()).abs() < 1e-12);
            if l_split && r_split {
                let textbook = p0 * (1.0 - p1) * (1.0 - p1) * (1.0 / n_rules) / (1.0 - p0);
                assert!((p.log_tree_prior_ratio.exp() - textbook).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn grow_then_matching_prune_has_zero_total_transition_ratio() {
        let grid = grid2();
        let prior = TreePrior::PROGNOSTIC;
        let moves = MoveProbabilities::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut t = Tree::stump(2, 0.0);
        for _ in 0..3 {
            let g = propose_kind(MoveKind::Grow, &t, &grid, &prior, &moves, &mut rng).unwrap();
            t = g.tree;
        }
        for _ in 0..50 {
            let Some(g) = propose_kind(MoveKind::Grow, &t, &grid, &prior, &moves, &mut rng) else {
                continue;
            };
            // find the reverse prune of the grown node
            let nogs = g.tree.prunable_nodes();
            assert!(nogs.contains(&g.node));
            let mut back = None;
            for _ in 0..1000 {
                let p = propose_kind(MoveKind::Prune, &g.tree, &grid, &prior, &moves, &mut rng).unwrap();
                if p.node == g.node {
                    back = Some(p);
                    break;
                }
            }
            let back = back.unwrap();
            assert_eq!(back.tree, t);
            assert!((g.log_transition_ratio + back.log_transition_ratio).abs() < 1e-12);
            assert!((g.log_tree_prior_ratio + back.log_tree_prior_ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn change_invalidating_descendants_has_zero_prior() {
        let grid = CutpointGrid::from_cuts(vec![vec![0.25, 0.5, 0.75]]);
        let mut t = Tree::stump(1, 0.0);
        t.grow(ROOT, SplitRule { var: 0, cutpoint: 0.5 }, 0.0, 0.0);
        let (l, _) = t.children(ROOT).unwrap();
        t.grow(l, SplitRule { var: 0, cutpoint: 0.25 }, 0.0, 0.0);
        let mut bad = t.clone();
        bad.set_rule(ROOT, SplitRule { var: 0, cutpoint: 0.25 });
        assert_eq!(log_tree_prior(&bad, &grid, &TreePrior::PROGNOSTIC), f64::NEG_INFINITY);
        assert!(log_tree_prior(&t, &grid, &TreePrior::PROGNOSTIC).is_finite());
    }

    #[test]
    fn text_round_trip_after_prune_recycling() {
        let grid = grid2();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut t = Tree::stump(2, 0.125);
        let moves = MoveProbabilities::default();
        for _ in 0..40 {
            if let (_, Some(p)) = propose_move(&t, &grid, &TreePrior::PROGNOSTIC, &moves, &mut rng) {
                t = p.tree;
                for leaf in t.leaves() {
                    t.set_leaf_value(leaf, rng.random::<f64>() - 0.5);
                }
            }
        }
        let text = t.to_text();
        let back = Tree::from_text(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn malformed_tree_text_is_rejected() {
        assert!(Tree::from_text("tree 1 3\nS 0 0.5\nL 1.0\n").is_err());
        assert!(Tree::from_text("tree 1 1\nS 4 0.5\n").is_err());
        assert!(Tree::from_text("tree 1 1\nX 1\n").is_err());
    }

    #[test]
    fn cutpoints_lie_strictly_inside_the_range() {
        let values: Vec<f64> = (0..1000).map(|i| (i as f64).sqrt()).collect();
        let cuts = column_cutpoints(&values, 100);
        assert!(cuts.len() <= 100 && cuts.len() > 90);
        assert!(cuts.windows(2).all(|w| w[0] < w[1]));
        assert!(cuts.iter().all(|&c| c > 0.0 && c < values[999]));
        assert_eq!(column_cutpoints(&[0.0, 1.0, 1.0, 0.0], 100), vec![0.5]);
        assert!(column_cutpoints(&[2.0; 5], 100).is_empty());
    }
}
