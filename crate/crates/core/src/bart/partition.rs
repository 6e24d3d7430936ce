use super::tree::{Forest, NodeKind};
use crate::error::{Error, Result};

/// Interval `(lower, upper]` of a scalar input on which a forest is constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionCell {
    pub lower: f64,
    pub upper: f64,
    /// Sum of the leaf parameters reached from this interval.
    pub value: f64,
}

impl PartitionCell {
    pub fn contains(&self, x: f64) -> bool {
        x > self.lower && x <= self.upper
    }
}

/// Cells of the partition a forest induces on covariate `dim`.
///
/// Cells are ordered left to right, cover the real line and are pairwise
/// disjoint. Only nonempty intersections of leaf regions are returned, so
/// their number is at most the product of the trees' leaf counts.
pub fn induced_partition(forest: &Forest, dim: usize) -> Result<Vec<PartitionCell>> {
    let mut cuts = Vec::new();
    for tree in &forest.trees {
        for node in tree.nodes() {
            if let NodeKind::Split { var, cut, .. } = node.kind {
                if var != dim {
                    return Err(Error::Unsupported(format!(
                        "forest splits on covariate {var}; the oracle needs splits on {dim} only"
                    )));
                }
                cuts.push(cut);
            }
        }
    }
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();

    let mut bounds = Vec::with_capacity(cuts.len() + 2);
    bounds.push(f64::NEG_INFINITY);
    bounds.extend_from_slice(&cuts);
    bounds.push(f64::INFINITY);

    let mut x = vec![0.0; forest.n_covariates.max(dim + 1)];
    let mut cells = Vec::with_capacity(bounds.len() - 1);
    for w in bounds.windows(2) {
        // Any point of (lo, hi] is representative; the upper end is exact
        // because splits send x <= cut left.
        x[dim] = if w[1].is_finite() {
            w[1]
        } else if w[0].is_finite() {
            w[0] + 1.0
        } else {
            0.0
        };
        cells.push(PartitionCell {
            lower: w[0],
            upper: w[1],
            value: forest.predict(&x),
        });
    }
    Ok(cells)
}

/// Index of the cell containing `x`.
pub fn locate_cell(cells: &[PartitionCell], x: f64) -> usize {
    cells.partition_point(|c| c.upper < x).min(cells.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bart::tree::DecisionTree;

    fn stump(cut: f64, a: f64, b: f64) -> DecisionTree {
        DecisionTree::split(0, cut, DecisionTree::leaf(a), DecisionTree::leaf(b))
    }

    #[test]
    fn single_split() {
        let f = Forest::new(vec![stump(0.0, -1.0, 1.0)], 1).unwrap();
        let cells = induced_partition(&f, 0).unwrap();
        assert_eq!(
            cells,
            vec![
                PartitionCell {
                    lower: f64::NEG_INFINITY,
                    upper: 0.0,
                    value: -1.0
                },
                PartitionCell {
                    lower: 0.0,
                    upper: f64::INFINITY,
                    value: 1.0
                },
            ]
        );
    }

    #[test]
    fn overlapping_splits_sum() {
        let f = Forest::new(vec![stump(0.0, -1.0, 1.0), stump(1.0, 10.0, 20.0)], 1).unwrap();
        let cells = induced_partition(&f, 0).unwrap();
        let values: Vec<f64> = cells.iter().map(|c| c.value).collect();
        assert_eq!(values, vec![9.0, 11.0, 21.0]);
        assert_eq!(cells[1].lower, 0.0);
        assert_eq!(cells[1].upper, 1.0);
    }

    #[test]
    fn constant_forest_one_cell() {
        let f = Forest::constant(4, 1, 0.25);
        let cells = induced_partition(&f, 0).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].value, 1.0);
    }

    #[test]
    fn other_dimension_unsupported() {
        let t = DecisionTree::split(1, 0.0, DecisionTree::leaf(0.0), DecisionTree::leaf(1.0));
        let f = Forest::new(vec![t], 2).unwrap();
        assert!(matches!(induced_partition(&f, 0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn locate_respects_boundaries() {
        let f = Forest::new(vec![stump(0.0, -1.0, 1.0), stump(1.0, 10.0, 20.0)], 1).unwrap();
        let cells = induced_partition(&f, 0).unwrap();
        assert_eq!(locate_cell(&cells, -5.0), 0);
        assert_eq!(locate_cell(&cells, 0.0), 0);
        assert_eq!(locate_cell(&cells, 0.5), 1);
        assert_eq!(locate_cell(&cells, 1.0), 1);
        assert_eq!(locate_cell(&cells, 7.0), 2);
    }
}
