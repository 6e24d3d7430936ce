//! Sum-of-trees regression: tree representation, prior, MCMC moves and the
//! text format used by archives.

pub mod partition;
pub mod prior;
pub mod sampler;
pub mod text;
pub mod tree;

pub use partition::{induced_partition, locate_cell, PartitionCell};
pub use prior::{log_tree_prior, node_split_probability, BartPrior, CutpointSets, MoveProbabilities};
pub use sampler::{leaf_posterior, propose_tree_move, sample_leaf_values, LeafPrior, MoveKind, MoveOutcome, MoveStats};
pub use text::{parse_forest, write_forest};
pub use tree::{evaluate_forest, evaluate_tree, DecisionTree, Forest, Node, NodeKind};

/// Residual targets for tree `s`: `targets - sum of the other trees`.
pub fn partial_residuals(targets: &[f64], design: &crate::design::DesignMatrix, forest: &Forest, s: usize) -> Vec<f64> {
    (0..design.n_rows())
        .map(|r| {
            let x = design.row(r);
            let others: f64 = forest
                .trees
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != s)
                .map(|(_, t)| t.predict(x))
                .sum();
            targets[r] - others
        })
        .collect()
}
