use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, NodeKind};
use crate::design::DesignMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoveProbabilities {
    pub grow: f64,
    pub prune: f64,
    pub change: f64,
}

impl Default for MoveProbabilities {
    fn default() -> Self {
        MoveProbabilities {
            grow: 0.25,
            prune: 0.25,
            change: 0.5,
        }
    }
}

impl MoveProbabilities {
    /// Move probabilities for a tree, renormalized over the moves it admits.
    pub fn for_tree(&self, n_leaves: usize) -> MoveProbabilities {
        if n_leaves <= 1 {
            MoveProbabilities {
                grow: 1.0,
                prune: 0.0,
                change: 0.0,
            }
        } else {
            let total = self.grow + self.prune + self.change;
            MoveProbabilities {
                grow: self.grow / total,
                prune: self.prune / total,
                change: self.change / total,
            }
        }
    }
}

/// Regularization prior of the sum-of-trees model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BartPrior {
    pub alpha: f64,
    pub beta: f64,
    /// Leaf spread multiplier `k`: the sum of `S` leaves has prior sd `range / (2k)`.
    pub k_sigma: f64,
    pub n_trees: usize,
    pub n_cutpoints: usize,
    pub move_probabilities: MoveProbabilities,
    /// Leaf prior mean.
    pub mu_mean: f64,
}

impl Default for BartPrior {
    fn default() -> Self {
        BartPrior {
            alpha: 0.95,
            beta: 2.0,
            k_sigma: 2.0,
            n_trees: 50,
            n_cutpoints: 100,
            move_probabilities: MoveProbabilities::default(),
            mu_mean: 0.0,
        }
    }
}

impl BartPrior {
    pub fn with_trees(n_trees: usize) -> Self {
        BartPrior {
            n_trees,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.k_sigma > 0.0) {
            return Err(Error::Config(format!("k must be > 0, got {}", self.k_sigma)));
        }
        if self.n_trees == 0 {
            return Err(Error::Config("the forest needs at least one tree".into()));
        }
        if self.n_cutpoints == 0 {
            return Err(Error::Config("n_cutpoints must be positive".into()));
        }
        let m = self.move_probabilities;
        if [m.grow, m.prune, m.change].iter().any(|p| !(*p > 0.0)) {
            return Err(Error::Config("move probabilities must be positive".into()));
        }
        Ok(())
    }

    /// Leaf prior standard deviation for targets spanning `[z_min, z_max]`.
    pub fn leaf_sd(&self, z_min: f64, z_max: f64) -> f64 {
        let range = if z_max > z_min { z_max - z_min } else { 1.0 };
        range / (2.0 * self.k_sigma * (self.n_trees as f64).sqrt())
    }
}

/// Probability that a node at `depth` is interior.
pub fn node_split_probability(depth: usize, prior: &BartPrior) -> f64 {
    prior.alpha * (1.0 + depth as f64).powf(-prior.beta)
}

/// Candidate split values per covariate, sorted ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct CutpointSets {
    pub per_var: Vec<Vec<f64>>,
}

impl CutpointSets {
    /// Up to `n_cutpoints` evenly spaced empirical quantiles of every column.
    /// Cuts at or above a column's maximum are dropped since they cannot
    /// separate any rows.
    pub fn from_design(design: &DesignMatrix, n_cutpoints: usize) -> Self {
        let per_var = (0..design.n_cols())
            .map(|c| {
                let mut v: Vec<f64> = design.column(c).collect();
                v.sort_by(|a, b| a.total_cmp(b));
                quantile_cuts(&v, n_cutpoints)
            })
            .collect();
        CutpointSets { per_var }
    }

    pub fn n_vars(&self) -> usize {
        self.per_var.len()
    }

    /// Candidate cuts of `var` strictly inside `(lo, hi)`.
    pub fn available(&self, var: usize, lo: f64, hi: f64) -> &[f64] {
        let cuts = &self.per_var[var];
        let start = cuts.partition_point(|&c| c <= lo);
        let end = cuts.partition_point(|&c| c < hi);
        if start >= end {
            &[]
        } else {
            &cuts[start..end]
        }
    }
}

fn quantile_cuts(sorted: &[f64], n_cutpoints: usize) -> Vec<f64> {
    let Some(&max) = sorted.last() else {
        return Vec::new();
    };
    let mut unique = sorted.to_vec();
    unique.dedup();
    let mut cuts: Vec<f64> = if unique.len() <= n_cutpoints + 1 {
        unique
    } else {
        let n = sorted.len();
        (1..=n_cutpoints)
            .map(|k| {
                let p = k as f64 / (n_cutpoints + 1) as f64;
                let h = p * (n - 1) as f64;
                let lo = h.floor() as usize;
                let frac = h - lo as f64;
                if lo + 1 < n {
                    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
                } else {
                    sorted[lo]
                }
            })
            .collect()
    };
    cuts.retain(|&c| c < max);
    cuts.dedup();
    cuts
}

/// Log prior probability of a tree's structure: split/no-split terms at every
/// node, a uniform splitting variable and a uniform cut among those available
/// at the node.
pub fn log_tree_prior(tree: &DecisionTree, prior: &BartPrior, cutpoints: &CutpointSets) -> Result<f64> {
    let k_x = cutpoints.n_vars();
    let mut total = 0.0;
    for (id, node) in tree.nodes().iter().enumerate() {
        let p = node_split_probability(node.depth, prior);
        match node.kind {
            NodeKind::Leaf { .. } => total += (1.0 - p).ln(),
            NodeKind::Split { var, cut, .. } => {
                if var >= k_x {
                    return Err(Error::Dimension(format!(
                        "split on covariate {var} with only {k_x} covariates"
                    )));
                }
                let (lo, hi) = tree.region(id, var);
                let avail = cutpoints.available(var, lo, hi);
                if !avail.contains(&cut) {
                    return Err(Error::Validation(format!(
                        "split value {cut} of covariate {var} is not an available cutpoint"
                    )));
                }
                total += p.ln() - (k_x as f64).ln() - (avail.len() as f64).ln();
            }
        }
    }
    Ok(total)
}
