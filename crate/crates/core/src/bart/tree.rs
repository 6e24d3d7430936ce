use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind {
    Leaf { mu: f64 },
    /// Rows with `x[var] <= cut` go left.
    Split {
        var: usize,
        cut: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub parent: Option<usize>,
    pub depth: usize,
}

/// Binary regression tree stored as an arena in preorder (root at 0).
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf(mu: f64) -> Self {
        DecisionTree {
            nodes: vec![Node {
                kind: NodeKind::Leaf { mu },
                parent: None,
                depth: 0,
            }],
        }
    }

    /// Joins two subtrees under a new root `x[var] <= cut`.
    pub fn split(var: usize, cut: f64, left: DecisionTree, right: DecisionTree) -> Self {
        let mut nodes = Vec::with_capacity(1 + left.nodes.len() + right.nodes.len());
        nodes.push(Node {
            kind: NodeKind::Leaf { mu: 0.0 },
            parent: None,
            depth: 0,
        });
        let left_root = append_subtree(&mut nodes, &left, 0);
        let right_root = append_subtree(&mut nodes, &right, 0);
        nodes[0].kind = NodeKind::Split {
            var,
            cut,
            left: left_root,
            right: right_root,
        };
        DecisionTree { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Leaf { .. }))
            .count()
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| matches!(self.nodes[i].kind, NodeKind::Leaf { .. }))
            .collect()
    }

    /// Interior nodes whose children are both leaves.
    pub fn nog_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| match self.nodes[i].kind {
                NodeKind::Split { left, right, .. } => {
                    self.is_leaf(left) && self.is_leaf(right)
                }
                NodeKind::Leaf { .. } => false,
            })
            .collect()
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        matches!(self.nodes[id].kind, NodeKind::Leaf { .. })
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Largest split variable index plus one (0 for a single leaf).
    pub fn required_dim(&self) -> usize {
        self.nodes
            .iter()
            .filter_map(|n| match n.kind {
                NodeKind::Split { var, .. } => Some(var + 1),
                NodeKind::Leaf { .. } => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Leaf node reached by `x`. No dimension check.
    #[inline]
    pub fn leaf_of(&self, x: &[f64]) -> usize {
        let mut id = 0;
        loop {
            match self.nodes[id].kind {
                NodeKind::Leaf { .. } => return id,
                NodeKind::Split {
                    var,
                    cut,
                    left,
                    right,
                } => id = if x[var] <= cut { left } else { right },
            }
        }
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_of(x)].kind {
            NodeKind::Leaf { mu } => mu,
            NodeKind::Split { .. } => unreachable!(),
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let need = self.required_dim();
        if x.len() < need {
            return Err(Error::Dimension(format!(
                "tree splits on covariate {} but x has {} entries",
                need - 1,
                x.len()
            )));
        }
        Ok(self.predict(x))
    }

    pub fn leaf_value(&self, id: usize) -> Option<f64> {
        match self.nodes[id].kind {
            NodeKind::Leaf { mu } => Some(mu),
            NodeKind::Split { .. } => None,
        }
    }

    pub fn set_leaf_value(&mut self, id: usize, value: f64) {
        if let NodeKind::Leaf { mu } = &mut self.nodes[id].kind {
            *mu = value;
        }
    }

    /// Region of `var` reaching node `id`, as the half-open interval `(lo, hi]`.
    pub fn region(&self, id: usize, var: usize) -> (f64, f64) {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut child = id;
        while let Some(p) = self.nodes[child].parent {
            if let NodeKind::Split {
                var: v,
                cut,
                left,
                ..
            } = self.nodes[p].kind
            {
                if v == var {
                    if child == left {
                        hi = hi.min(cut);
                    } else {
                        lo = lo.max(cut);
                    }
                }
            }
            child = p;
        }
        (lo, hi)
    }

    /// Turns leaf `id` into a split with two new leaves.
    pub fn grow(&mut self, id: usize, var: usize, cut: f64, mu_left: f64, mu_right: f64) {
        debug_assert!(self.is_leaf(id));
        let depth = self.nodes[id].depth + 1;
        let left = self.nodes.len();
        let right = left + 1;
        for mu in [mu_left, mu_right] {
            self.nodes.push(Node {
                kind: NodeKind::Leaf { mu },
                parent: Some(id),
                depth,
            });
        }
        self.nodes[id].kind = NodeKind::Split {
            var,
            cut,
            left,
            right,
        };
        self.canonicalize();
    }

    /// Collapses interior node `id` (whose children are leaves) into a leaf.
    pub fn prune(&mut self, id: usize, mu: f64) {
        self.nodes[id].kind = NodeKind::Leaf { mu };
        self.canonicalize();
    }

    pub fn change_rule(&mut self, id: usize, new_var: usize, new_cut: f64) {
        if let NodeKind::Split { var, cut, .. } = &mut self.nodes[id].kind {
            *var = new_var;
            *cut = new_cut;
        }
    }

    /// Renumbers reachable nodes in preorder.
    fn canonicalize(&mut self) {
        let old = std::mem::take(&mut self.nodes);
        let mut nodes = Vec::with_capacity(old.len());
        fn visit(old: &[Node], id: usize, parent: Option<usize>, depth: usize, out: &mut Vec<Node>) -> usize {
            let new_id = out.len();
            out.push(Node {
                kind: NodeKind::Leaf { mu: 0.0 },
                parent,
                depth,
            });
            out[new_id].kind = match old[id].kind {
                NodeKind::Leaf { mu } => NodeKind::Leaf { mu },
                NodeKind::Split {
                    var,
                    cut,
                    left,
                    right,
                } => {
                    let l = visit(old, left, Some(new_id), depth + 1, out);
                    let r = visit(old, right, Some(new_id), depth + 1, out);
                    NodeKind::Split {
                        var,
                        cut,
                        left: l,
                        right: r,
                    }
                }
            };
            new_id
        }
        visit(&old, 0, None, 0, &mut nodes);
        self.nodes = nodes;
    }

    /// Builds a tree from a preorder listing of `(kind)` entries; used by the
    /// text format.
    pub(crate) fn from_preorder(entries: &[PreorderEntry]) -> Result<Self> {
        fn build(
            entries: &[PreorderEntry],
            pos: &mut usize,
            parent: Option<usize>,
            depth: usize,
            out: &mut Vec<Node>,
        ) -> Result<usize> {
            let entry = entries
                .get(*pos)
                .ok_or_else(|| Error::Validation("truncated tree listing".into()))?;
            *pos += 1;
            let id = out.len();
            out.push(Node {
                kind: NodeKind::Leaf { mu: 0.0 },
                parent,
                depth,
            });
            out[id].kind = match *entry {
                PreorderEntry::Leaf(mu) => NodeKind::Leaf { mu },
                PreorderEntry::Split(var, cut) => {
                    let left = build(entries, pos, Some(id), depth + 1, out)?;
                    let right = build(entries, pos, Some(id), depth + 1, out)?;
                    NodeKind::Split {
                        var,
                        cut,
                        left,
                        right,
                    }
                }
            };
            Ok(id)
        }
        let mut nodes = Vec::with_capacity(entries.len());
        let mut pos = 0;
        build(entries, &mut pos, None, 0, &mut nodes)?;
        if pos != entries.len() {
            return Err(Error::Validation(format!(
                "tree listing has {} trailing nodes",
                entries.len() - pos
            )));
        }
        Ok(DecisionTree { nodes })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum PreorderEntry {
    Leaf(f64),
    Split(usize, f64),
}

fn append_subtree(nodes: &mut Vec<Node>, sub: &DecisionTree, parent: usize) -> usize {
    let offset = nodes.len();
    for n in &sub.nodes {
        let kind = match n.kind {
            NodeKind::Leaf { mu } => NodeKind::Leaf { mu },
            NodeKind::Split {
                var,
                cut,
                left,
                right,
            } => NodeKind::Split {
                var,
                cut,
                left: left + offset,
                right: right + offset,
            },
        };
        nodes.push(Node {
            kind,
            parent: Some(n.parent.map_or(parent, |p| p + offset)),
            depth: n.depth + 1,
        });
    }
    offset
}

/// Sum of trees over a shared covariate dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Forest {
    pub trees: Vec<DecisionTree>,
    pub n_covariates: usize,
}

impl Forest {
    pub fn constant(n_trees: usize, n_covariates: usize, mu: f64) -> Self {
        Forest {
            trees: vec![DecisionTree::leaf(mu); n_trees],
            n_covariates,
        }
    }

    pub fn new(trees: Vec<DecisionTree>, n_covariates: usize) -> Result<Self> {
        if let Some(t) = trees.iter().find(|t| t.required_dim() > n_covariates) {
            return Err(Error::Dimension(format!(
                "tree splits on covariate {} of a {}-dimensional forest",
                t.required_dim() - 1,
                n_covariates
            )));
        }
        Ok(Forest {
            trees,
            n_covariates,
        })
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_covariates {
            return Err(Error::Dimension(format!(
                "forest expects {} covariates, got {}",
                self.n_covariates,
                x.len()
            )));
        }
        Ok(self.predict(x))
    }
}

pub fn evaluate_tree(tree: &DecisionTree, x: &[f64]) -> Result<f64> {
    tree.evaluate(x)
}

pub fn evaluate_forest(forest: &Forest, x: &[f64]) -> Result<f64> {
    forest.evaluate(x)
}
