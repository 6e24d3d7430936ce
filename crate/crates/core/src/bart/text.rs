//! Line-oriented forest format.
//!
//! ```text
//! forest <n_trees> <n_covariates>
//! tree 0
//! 0,split,<var>,<cut>
//! 1,leaf,<mu>
//! 2,leaf,<mu>
//! tree 1
//! ...
//! ```
//!
//! Nodes are listed in preorder. Floats use the shortest representation
//! that parses back to the same bits.

use std::fmt::Write as _;

use super::tree::{DecisionTree, Forest, NodeKind, PreorderEntry};
use crate::error::{Error, Result};

pub fn write_forest(forest: &Forest) -> String {
    let mut out = String::new();
    writeln!(out, "forest {} {}", forest.trees.len(), forest.n_covariates).unwrap();
    for (s, tree) in forest.trees.iter().enumerate() {
        writeln!(out, "tree {s}").unwrap();
        for (id, node) in tree.nodes().iter().enumerate() {
            match node.kind {
                NodeKind::Leaf { mu } => writeln!(out, "{id},leaf,{mu:?}").unwrap(),
                NodeKind::Split { var, cut, .. } => writeln!(out, "{id},split,{var},{cut:?}").unwrap(),
            }
        }
    }
    out
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Validation(format!("forest line {line}: {msg}"))
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| bad(line, format!("invalid number {s:?}")))?;
    if !v.is_finite() {
        return Err(bad(line, "non-finite value"));
    }
    Ok(v)
}

pub fn parse_forest(text: &str) -> Result<Forest> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let (ln, header) = lines.next().ok_or_else(|| bad(1, "empty input"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 || parts[0] != "forest" {
        return Err(bad(ln, "expected `forest <n_trees> <n_covariates>`"));
    }
    let n_trees: usize = parts[1].parse().map_err(|_| bad(ln, "invalid tree count"))?;
    let n_cov: usize = parts[2].parse().map_err(|_| bad(ln, "invalid covariate count"))?;

    let mut trees = Vec::with_capacity(n_trees);
    let mut current: Option<Vec<PreorderEntry>> = None;
    let mut current_line = ln;
    let finish = |entries: Vec<PreorderEntry>, line: usize, trees: &mut Vec<DecisionTree>| -> Result<()> {
        let t = DecisionTree::from_preorder(&entries).map_err(|e| bad(line, e))?;
        trees.push(t);
        Ok(())
    };
    for (ln, line) in lines {
        if let Some(rest) = line.strip_prefix("tree ") {
            let idx: usize = rest.trim().parse().map_err(|_| bad(ln, "invalid tree index"))?;
            if let Some(entries) = current.take() {
                finish(entries, current_line, &mut trees)?;
            }
            if idx != trees.len() {
                return Err(bad(ln, format!("expected tree {}, found tree {idx}", trees.len())));
            }
            current = Some(Vec::new());
            current_line = ln;
            continue;
        }
        let entries = current.as_mut().ok_or_else(|| bad(ln, "node listed before any tree"))?;
        let fields: Vec<&str> = line.split(',').collect();
        let id: usize = fields[0].trim().parse().map_err(|_| bad(ln, "invalid node id"))?;
        if id != entries.len() {
            return Err(bad(ln, format!("node ids must be consecutive, expected {}", entries.len())));
        }
        let entry = match (fields.get(1).map(|s| s.trim()), fields.len()) {
            (Some("leaf"), 3) => PreorderEntry::Leaf(parse_f64(fields[2], ln)?),
            (Some("split"), 4) => {
                let var: usize = fields[2].trim().parse().map_err(|_| bad(ln, "invalid split variable"))?;
                if var >= n_cov {
                    return Err(bad(ln, format!("split variable {var} exceeds {n_cov} covariates")));
                }
                PreorderEntry::Split(var, parse_f64(fields[3], ln)?)
            }
            _ => return Err(bad(ln, "expected `id,leaf,mu` or `id,split,var,cut`")),
        };
        entries.push(entry);
    }
    if let Some(entries) = current.take() {
        finish(entries, current_line, &mut trees)?;
    }
    if trees.len() != n_trees {
        return Err(bad(ln, format!("header declares {n_trees} trees, found {}", trees.len())));
    }
    Forest::new(trees, n_cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_tree(depth: u32) -> impl Strategy<Value = DecisionTree> {
        let leaf = any::<f64>()
            .prop_filter("finite", |v| v.is_finite())
            .prop_map(DecisionTree::leaf);
        leaf.prop_recursive(depth, 32, 2, |inner| {
            (0usize..3, -1e6f64..1e6, inner.clone(), inner)
                .prop_map(|(v, c, l, r)| DecisionTree::split(v, c, l, r))
        })
    }

    proptest! {
        #[test]
        fn round_trip(trees in proptest::collection::vec(arb_tree(4), 1..6)) {
            let f = Forest::new(trees, 3).unwrap();
            let text = write_forest(&f);
            let back = parse_forest(&text).unwrap();
            prop_assert_eq!(&back, &f);
            prop_assert_eq!(write_forest(&back), text);
        }
    }

    #[test]
    fn example_listing() {
        let t = DecisionTree::split(0, 0.5, DecisionTree::leaf(-1.0), DecisionTree::leaf(0.1));
        let f = Forest::new(vec![t], 1).unwrap();
        assert_eq!(write_forest(&f), "forest 1 1\ntree 0\n0,split,0,0.5\n1,leaf,-1.0\n2,leaf,0.1\n");
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_forest("").is_err());
        assert!(parse_forest("forest 1 1\ntree 0\n0,split,0,0.5\n1,leaf,1\n").is_err());
        assert!(parse_forest("forest 2 1\ntree 0\n0,leaf,1\n").is_err());
        assert!(parse_forest("forest 1 1\ntree 0\n0,split,3,0.5\n1,leaf,1\n2,leaf,2\n").is_err());
        let err = parse_forest("forest 1 1\ntree 0\n0,leaf,abc\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }
}
