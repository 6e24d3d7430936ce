#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;
use rankdyn::bart::{BartPrior, DecisionTree, Forest};
use rankdyn::latent::{sample_latent_path, sample_level_moves, LatentScoreState};
use rankdyn::model::{DesignBuilder, LagInput, Layout, ModelKind};
use rankdyn::rankings::{Ranking, RankingPanel};
use rankdyn::regression::{Regressor, RegressorDraw};
use rankdyn::rng::derive_rng;

pub fn stump(cut: f64, left: f64, right: f64) -> Forest {
    Forest::new(vec![DecisionTree::split(0, cut, DecisionTree::leaf(left), DecisionTree::leaf(right))], 1).unwrap()
}

pub fn single_ranker_panel(orders: &[&[usize]]) -> RankingPanel {
    let r = orders.iter().map(|o| vec![Ranking::from_order(o).unwrap()]).collect();
    RankingPanel::new(r, None).unwrap()
}

pub fn edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|b| lo + (hi - lo) * b as f64 / bins as f64).collect()
}

fn bin_of(edges: &[f64], x: f64) -> Option<usize> {
    if x < edges[0] || x >= *edges.last().unwrap() {
        return None;
    }
    Some(edges.partition_point(|&e| e <= x) - 1)
}

/// Normalized histograms `[period][item][bin]`; mass outside the edges is dropped.
pub type Histograms = Vec<Vec<Vec<f64>>>;

/// Bootstrap particle filter with ordering indicators as weights.
pub fn smc_filter(forest: &Forest, panel: &RankingPanel, particles: usize, edges: &[f64], seed: u64) -> Histograms {
    let n = panel.n_items();
    let bins = edges.len() - 1;
    let mut rng = derive_rng(seed, &[]);
    let mut z: Vec<f64> = (0..particles * n).map(|_| rng.sample(StandardNormal)).collect();
    let mut next = vec![0.0; particles * n];
    let mut out = Vec::new();
    for t in 0..panel.n_times() {
        let order = panel.ranking(0, t).order();
        let mut alive = Vec::with_capacity(particles);
        for p in 0..particles {
            let prev = &z[p * n..(p + 1) * n];
            let cur = &mut next[p * n..(p + 1) * n];
            for i in 0..n {
                cur[i] = forest.predict(&[prev[i]]) + rng.sample::<f64, _>(StandardNormal);
            }
            if order.windows(2).all(|w| cur[w[0]] < cur[w[1]]) {
                alive.push(p);
            }
        }
        let mut hist = vec![vec![0.0; bins]; n];
        for &p in &alive {
            for i in 0..n {
                if let Some(b) = bin_of(edges, next[p * n + i]) {
                    hist[i][b] += 1.0;
                }
            }
        }
        for h in hist.iter_mut() {
            h.iter_mut().for_each(|v| *v /= alive.len() as f64);
        }
        out.push(hist);
        for p in 0..particles {
            let src = alive[rng.random_range(0..alive.len())];
            z[p * n..(p + 1) * n].copy_from_slice(&next[src * n..(src + 1) * n]);
        }
    }
    out
}

/// Runs the path sampler with a fixed forest and histograms the response slots.
pub fn path_sampler(
    forest: &Forest,
    panel: &RankingPanel,
    sweeps: usize,
    burn: usize,
    edges: &[f64],
    seed: u64,
    level_moves: bool,
) -> Histograms {
    let n = panel.n_items();
    let t_n = panel.n_times();
    let bins = edges.len() - 1;
    let layout = Layout {
        n_items: n,
        n_rankers: panel.n_rankers(),
        n_periods: t_n,
        dynamic: true,
    };
    let spec = ModelKind::Arrobart.spec().unwrap();
    let builder = DesignBuilder::new(spec, LagInput::OwnScalarLag, panel, layout);
    let reg = Regressor::from_draw(RegressorDraw::Forest(forest.clone()), &BartPrior::default());
    let mut state = LatentScoreState::initialize(panel, layout, |_| 0.0);
    let mut hist = vec![vec![vec![0.0; bins]; n]; t_n];
    let mut kept = 0.0;
    for sweep in 0..sweeps {
        sample_latent_path(&mut state, &reg, &builder, &|_| 0.0, seed, sweep as u64).unwrap();
        if level_moves {
            sample_level_moves(&mut state, &reg, &builder, &|_| 0.0, seed, sweep as u64).unwrap();
        }
        if sweep < burn {
            continue;
        }
        kept += 1.0;
        for (p, hp) in hist.iter_mut().enumerate() {
            let z = state.scores(0, p);
            for (i, h) in hp.iter_mut().enumerate() {
                if let Some(b) = bin_of(edges, z[i]) {
                    h[b] += 1.0;
                }
            }
        }
    }
    for h in hist.iter_mut().flatten() {
        h.iter_mut().for_each(|v| *v /= kept);
    }
    hist
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
