//! Metropolis-Hastings tree moves and conjugate leaf draws under unit noise.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::prior::{node_split_probability, BartPrior, CutpointSets};
use super::tree::{DecisionTree, NodeKind};
use crate::design::DesignMatrix;
use crate::error::{Error, Result};

/// Normal prior `N(mean, sd^2)` on every leaf parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeafPrior {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MoveKind {
    Grow,
    Prune,
    Change,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoveOutcome {
    pub kind: MoveKind,
    pub accepted: bool,
    /// Log acceptance ratio, `None` when the move had no valid proposal.
    pub log_ratio: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MoveStats {
    pub proposed: [u64; 3],
    pub accepted: [u64; 3],
}

impl MoveStats {
    pub fn record(&mut self, outcome: &MoveOutcome) {
        let k = outcome.kind as usize;
        self.proposed[k] += 1;
        if outcome.accepted {
            self.accepted[k] += 1;
        }
    }

    pub fn merge(&mut self, other: &MoveStats) {
        for k in 0..3 {
            self.proposed[k] += other.proposed[k];
            self.accepted[k] += other.accepted[k];
        }
    }

    pub fn rate(&self, kind: MoveKind) -> f64 {
        let k = kind as usize;
        if self.proposed[k] == 0 {
            0.0
        } else {
            self.accepted[k] as f64 / self.proposed[k] as f64
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Suff {
    n: usize,
    sum: f64,
}

impl Suff {
    fn add(&mut self, r: f64) {
        self.n += 1;
        self.sum += r;
    }
}

/// Log marginal likelihood of a leaf's residuals with its parameter
/// integrated out, dropping terms shared by every partition of the rows.
fn leaf_log_marginal(s: Suff, leaf: LeafPrior) -> f64 {
    let v = leaf.sd * leaf.sd;
    let n = s.n as f64;
    let centered = s.sum - n * leaf.mean;
    -0.5 * (1.0 + n * v).ln() + 0.5 * v * centered * centered / (1.0 + n * v)
}

/// Conjugate posterior `(mean, variance)` of a leaf with `n` residuals summing to `sum`.
pub fn leaf_posterior(n: usize, sum: f64, leaf: LeafPrior) -> (f64, f64) {
    let prec0 = 1.0 / (leaf.sd * leaf.sd);
    let var = 1.0 / (prec0 + n as f64);
    (var * (leaf.mean * prec0 + sum), var)
}

fn check_alignment(design: &DesignMatrix, residuals: &[f64]) -> Result<()> {
    if design.n_rows() != residuals.len() {
        return Err(Error::Dimension(format!(
            "{} design rows but {} residuals",
            design.n_rows(),
            residuals.len()
        )));
    }
    Ok(())
}

/// One Metropolis-Hastings step over GROW / PRUNE / CHANGE.
///
/// Leaves are integrated out of the acceptance ratio, so only the structure
/// changes here; changed or new leaves keep placeholder values until
/// [`sample_leaf_values`] runs.
pub fn propose_tree_move<R: Rng + ?Sized>(
    tree: &mut DecisionTree,
    design: &DesignMatrix,
    residuals: &[f64],
    cutpoints: &CutpointSets,
    prior: &BartPrior,
    leaf: LeafPrior,
    rng: &mut R,
) -> Result<MoveOutcome> {
    check_alignment(design, residuals)?;
    let n_leaves = tree.n_leaves();
    let probs = prior.move_probabilities.for_tree(n_leaves);
    let u: f64 = rng.random();
    let kind = if u < probs.grow {
        MoveKind::Grow
    } else if u < probs.grow + probs.prune {
        MoveKind::Prune
    } else {
        MoveKind::Change
    };
    let log_ratio = match kind {
        MoveKind::Grow => propose_grow(tree, design, residuals, cutpoints, prior, leaf, rng),
        MoveKind::Prune => propose_prune(tree, design, residuals, cutpoints, prior, leaf, rng),
        MoveKind::Change => propose_change(tree, design, residuals, cutpoints, leaf, rng),
    };
    let Some((log_ratio, apply)) = log_ratio else {
        return Ok(MoveOutcome {
            kind,
            accepted: false,
            log_ratio: None,
        });
    };
    let accepted = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
    if accepted {
        apply(tree);
    }
    Ok(MoveOutcome {
        kind,
        accepted,
        log_ratio: Some(log_ratio),
    })
}

type Apply = Box<dyn FnOnce(&mut DecisionTree)>;

fn rows_in(tree: &DecisionTree, design: &DesignMatrix, node: usize) -> Vec<usize> {
    (0..design.n_rows())
        .filter(|&r| reaches(tree, design.row(r), node))
        .collect()
}

/// Whether `x` passes through `node`.
fn reaches(tree: &DecisionTree, x: &[f64], node: usize) -> bool {
    let mut id = 0;
    loop {
        if id == node {
            return true;
        }
        match tree.node(id).kind {
            NodeKind::Leaf { .. } => return false,
            NodeKind::Split {
                var,
                cut,
                left,
                right,
            } => id = if x[var] <= cut { left } else { right },
        }
    }
}

fn split_stats(rows: &[usize], design: &DesignMatrix, residuals: &[f64], var: usize, cut: f64) -> (Suff, Suff) {
    let mut l = Suff::default();
    let mut r = Suff::default();
    for &row in rows {
        if design.value(row, var) <= cut {
            l.add(residuals[row]);
        } else {
            r.add(residuals[row]);
        }
    }
    (l, r)
}

fn pick<R: Rng + ?Sized, T: Copy>(items: &[T], rng: &mut R) -> T {
    items[rng.random_range(0..items.len())]
}

fn propose_grow<R: Rng + ?Sized>(
    tree: &DecisionTree,
    design: &DesignMatrix,
    residuals: &[f64],
    cutpoints: &CutpointSets,
    prior: &BartPrior,
    leaf: LeafPrior,
    rng: &mut R,
) -> Option<(f64, Apply)> {
    let k_x = cutpoints.n_vars();
    if k_x == 0 {
        return None;
    }
    let leaves = tree.leaves();
    let node = pick(&leaves, rng);
    let var = rng.random_range(0..k_x);
    let (lo, hi) = tree.region(node, var);
    let avail = cutpoints.available(var, lo, hi);
    if avail.is_empty() {
        return None;
    }
    let cut = pick(avail, rng);
    let depth = tree.node(node).depth;

    let rows = rows_in(tree, design, node);
    let (l, r) = split_stats(&rows, design, residuals, var, cut);
    let parent = Suff {
        n: l.n + r.n,
        sum: l.sum + r.sum,
    };
    let lik = leaf_log_marginal(l, leaf) + leaf_log_marginal(r, leaf) - leaf_log_marginal(parent, leaf);

    let p_d = node_split_probability(depth, prior);
    let p_child = node_split_probability(depth + 1, prior);
    let log_prior = p_d.ln() + 2.0 * (1.0 - p_child).ln() - (1.0 - p_d).ln();

    // Number of nog nodes after the grow: `node` becomes one, and its parent
    // stops being one if it was.
    let mut nog_after = tree.nog_nodes().len() + 1;
    if let Some(p) = tree.node(node).parent {
        if let NodeKind::Split { left, right, .. } = tree.node(p).kind {
            if tree.is_leaf(left) && tree.is_leaf(right) {
                nog_after -= 1;
            }
        }
    }
    let mp = &prior.move_probabilities;
    let forward = mp.for_tree(leaves.len()).grow / leaves.len() as f64;
    let backward = mp.for_tree(leaves.len() + 1).prune / nog_after as f64;
    let log_ratio = lik + log_prior + backward.ln() - forward.ln();
    let mu = tree.leaf_value(node).unwrap_or(0.0);
    Some((
        log_ratio,
        Box::new(move |t: &mut DecisionTree| t.grow(node, var, cut, mu, mu)),
    ))
}

fn propose_prune<R: Rng + ?Sized>(
    tree: &DecisionTree,
    design: &DesignMatrix,
    residuals: &[f64],
    _cutpoints: &CutpointSets,
    prior: &BartPrior,
    leaf: LeafPrior,
    rng: &mut R,
) -> Option<(f64, Apply)> {
    let nogs = tree.nog_nodes();
    if nogs.is_empty() {
        return None;
    }
    let node = pick(&nogs, rng);
    let NodeKind::Split { var, cut, .. } = tree.node(node).kind else {
        return None;
    };
    let depth = tree.node(node).depth;
    let rows = rows_in(tree, design, node);
    let (l, r) = split_stats(&rows, design, residuals, var, cut);
    let merged = Suff {
        n: l.n + r.n,
        sum: l.sum + r.sum,
    };
    let lik = leaf_log_marginal(merged, leaf) - leaf_log_marginal(l, leaf) - leaf_log_marginal(r, leaf);

    let p_d = node_split_probability(depth, prior);
    let p_child = node_split_probability(depth + 1, prior);
    let log_prior = (1.0 - p_d).ln() - p_d.ln() - 2.0 * (1.0 - p_child).ln();

    let n_leaves = tree.n_leaves();
    let mp = &prior.move_probabilities;
    let forward = mp.for_tree(n_leaves).prune / nogs.len() as f64;
    let backward = mp.for_tree(n_leaves - 1).grow / (n_leaves - 1) as f64;
    let log_ratio = lik + log_prior + backward.ln() - forward.ln();
    Some((log_ratio, Box::new(move |t: &mut DecisionTree| t.prune(node, 0.0))))
}

fn propose_change<R: Rng + ?Sized>(
    tree: &DecisionTree,
    design: &DesignMatrix,
    residuals: &[f64],
    cutpoints: &CutpointSets,
    leaf: LeafPrior,
    rng: &mut R,
) -> Option<(f64, Apply)> {
    let k_x = cutpoints.n_vars();
    let nogs = tree.nog_nodes();
    if nogs.is_empty() || k_x == 0 {
        return None;
    }
    let node = pick(&nogs, rng);
    let NodeKind::Split { var, cut, .. } = tree.node(node).kind else {
        return None;
    };
    let new_var = rng.random_range(0..k_x);
    let (lo, hi) = tree.region(node, new_var);
    let avail = cutpoints.available(new_var, lo, hi);
    if avail.is_empty() {
        return None;
    }
    let new_cut = pick(avail, rng);
    let rows = rows_in(tree, design, node);
    let (l0, r0) = split_stats(&rows, design, residuals, var, cut);
    let (l1, r1) = split_stats(&rows, design, residuals, new_var, new_cut);
    // Tree prior and proposal terms cancel: both are uniform over the same
    // variables and the cuts available at this node.
    let log_ratio = leaf_log_marginal(l1, leaf) + leaf_log_marginal(r1, leaf)
        - leaf_log_marginal(l0, leaf)
        - leaf_log_marginal(r0, leaf);
    Some((
        log_ratio,
        Box::new(move |t: &mut DecisionTree| t.change_rule(node, new_var, new_cut)),
    ))
}

/// Redraws every leaf from its conjugate normal posterior (the prior when
/// the leaf holds no rows).
pub fn sample_leaf_values<R: Rng + ?Sized>(
    tree: &mut DecisionTree,
    design: &DesignMatrix,
    residuals: &[f64],
    leaf: LeafPrior,
    rng: &mut R,
) -> Result<()> {
    check_alignment(design, residuals)?;
    let mut stats = vec![Suff::default(); tree.nodes().len()];
    for r in 0..design.n_rows() {
        stats[tree.leaf_of(design.row(r))].add(residuals[r]);
    }
    for id in tree.leaves() {
        let (m, v) = leaf_posterior(stats[id].n, stats[id].sum, leaf);
        let z: f64 = rng.sample(StandardNormal);
        tree.set_leaf_value(id, m + v.sqrt() * z);
    }
    Ok(())
}
