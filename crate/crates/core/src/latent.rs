//! Data augmentation: latent utility updates under the ordering constraints.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{DesignBuilder, Layout};
use crate::rankings::{Ranking, RankingPanel};
use crate::regression::Regressor;
use crate::rng::{derive_rng, stream};
use crate::stats::{normal_quantile, truncated_normal_draw};

/// Current draw of every latent score, laid out by [`Layout`].
#[derive(Clone, Debug, PartialEq)]
pub struct LatentScoreState {
    pub layout: Layout,
    pub z: Vec<f64>,
}

impl LatentScoreState {
    /// Scores mapped from ranks through standard normal quantiles of
    /// `(rank - 0.5) / N`; dynamic initial slots start at the prior mean.
    pub fn initialize(panel: &RankingPanel, layout: Layout, prior_mean: impl Fn(usize) -> f64) -> Self {
        let n = layout.n_items;
        let mut z = vec![0.0; layout.n_latent()];
        for j in 0..layout.n_rankers {
            if layout.dynamic {
                for i in 0..n {
                    z[layout.latent_index(j, 0, i)] = prior_mean(i);
                }
            }
            for p in 0..layout.n_periods {
                let r = panel.ranking(j, p);
                for i in 0..n {
                    let q = (r.rank(i) as f64 - 0.5) / n as f64;
                    z[layout.latent_index(j, layout.response_slot(p), i)] = normal_quantile(q);
                }
            }
        }
        LatentScoreState { layout, z }
    }

    pub fn ranker_block(&self, ranker: usize) -> &[f64] {
        let w = self.layout.slots() * self.layout.n_items;
        &self.z[ranker * w..(ranker + 1) * w]
    }

    /// Scores of `(ranker, period)` in item order.
    pub fn scores(&self, ranker: usize, period: usize) -> &[f64] {
        let s = self.layout.latent_index(ranker, self.layout.response_slot(period), 0);
        &self.z[s..s + self.layout.n_items]
    }

    /// Errors if any period's scores disagree with the observed ranking.
    pub fn check_ordering(&self, panel: &RankingPanel) -> Result<()> {
        for j in 0..self.layout.n_rankers {
            check_block(self.ranker_block(j), &self.layout, j, panel)?;
        }
        Ok(())
    }
}

fn check_block(block: &[f64], layout: &Layout, ranker: usize, panel: &RankingPanel) -> Result<()> {
    let n = layout.n_items;
    for p in 0..layout.n_periods {
        let s = layout.response_slot(p) * n;
        let z = &block[s..s + n];
        let order = panel.ranking(ranker, p).order();
        if let Some(w) = order.windows(2).find(|w| !(z[w[0]] < z[w[1]])) {
            return Err(Error::Invariant(format!(
                "latent scores of ranker {ranker}, period {p} violate the ranking: z[{}]={} !< z[{}]={}",
                w[0], z[w[0]], w[1], z[w[1]]
            )));
        }
    }
    Ok(())
}

/// Truncation interval of `item` given the scores of its rank neighbours.
#[inline]
fn bounds(z: &[f64], ranking: &Ranking, order: &[usize], item: usize) -> (f64, f64) {
    let r = ranking.rank(item) as usize;
    let lower = if r > 1 { z[order[r - 2]] } else { f64::NEG_INFINITY };
    let upper = if r < order.len() { z[order[r]] } else { f64::INFINITY };
    (lower, upper)
}

/// Gibbs scan over every cross-sectional latent score: `z_ij` is redrawn from
/// `N(mean_ij, 1)` truncated between its rank neighbours.
///
/// `means` follows design-row order. Rankers run in parallel with their own
/// streams derived from `(seed, sweep, ranker, period)`.
pub fn sample_latent_scores_static(
    state: &mut LatentScoreState,
    means: &[f64],
    panel: &RankingPanel,
    seed: u64,
    sweep: u64,
) -> Result<()> {
    let layout = state.layout;
    if layout.dynamic {
        return Err(Error::InvalidInput("static update on a dynamic latent layout".into()));
    }
    if means.len() != layout.n_rows() {
        return Err(Error::Dimension(format!("{} means for {} latent scores", means.len(), layout.n_rows())));
    }
    let width = layout.slots() * layout.n_items;
    state
        .z
        .par_chunks_mut(width)
        .enumerate()
        .try_for_each(|(j, block)| static_ranker_sweep(block, j, &layout, panel, means, seed, sweep))
}

fn static_ranker_sweep(
    block: &mut [f64],
    j: usize,
    layout: &Layout,
    panel: &RankingPanel,
    means: &[f64],
    seed: u64,
    sweep: u64,
) -> Result<()> {
    let n = layout.n_items;
    for p in 0..layout.n_periods {
        let mut rng = derive_rng(seed, &[sweep, stream::LATENT, j as u64, p as u64]);
        let ranking = panel.ranking(j, p);
        let order = ranking.order();
        let z = &mut block[p * n..(p + 1) * n];
        for i in 0..n {
            let (lo, hi) = bounds(z, ranking, &order, i);
            z[i] = truncated_normal_draw(means[layout.row(j, p, i)], lo, hi, &mut rng)?;
        }
    }
    if cfg!(debug_assertions) {
        check_block(block, layout, j, panel)?;
    }
    Ok(())
}

/// Acceptance counts of the latent path sampler.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PathStats {
    pub proposed: u64,
    pub accepted: u64,
}

/// Metropolis-within-Gibbs scan over a dynamic latent path.
///
/// Each site proposes from its measurement-and-ordering factor (the prior
/// `N(z_prior, 1)` for initial states) and accepts with the ratio of the
/// transition densities of the next period. Slots are scanned forward in
/// time, items in index order.
pub fn sample_latent_path(
    state: &mut LatentScoreState,
    regressor: &Regressor,
    builder: &DesignBuilder<'_>,
    prior_mean: &(dyn Fn(usize) -> f64 + Sync),
    seed: u64,
    sweep: u64,
) -> Result<PathStats> {
    sample_latent_path_from(state, regressor, builder, prior_mean, seed, sweep, 0)
}

/// [`sample_latent_path`] restricted to slots `first_slot..`; earlier slots
/// stay fixed.
pub fn sample_latent_path_from(
    state: &mut LatentScoreState,
    regressor: &Regressor,
    builder: &DesignBuilder<'_>,
    prior_mean: &(dyn Fn(usize) -> f64 + Sync),
    seed: u64,
    sweep: u64,
    first_slot: usize,
) -> Result<PathStats> {
    let layout = state.layout;
    if !layout.dynamic {
        return Err(Error::InvalidInput("path update on a static latent layout".into()));
    }
    let width = layout.slots() * layout.n_items;
    let stats = state
        .z
        .par_chunks_mut(width)
        .enumerate()
        .map(|(j, block)| dynamic_ranker_sweep(block, j, regressor, builder, prior_mean, seed, sweep, first_slot))
        .collect::<Result<Vec<_>>>()?;
    Ok(stats.into_iter().fold(PathStats::default(), |a, b| PathStats {
        proposed: a.proposed + b.proposed,
        accepted: a.accepted + b.accepted,
    }))
}

fn dynamic_ranker_sweep(
    block: &mut [f64],
    j: usize,
    regressor: &Regressor,
    builder: &DesignBuilder<'_>,
    prior_mean: &(dyn Fn(usize) -> f64 + Sync),
    seed: u64,
    sweep: u64,
    first_slot: usize,
) -> Result<PathStats> {
    let layout = builder.layout;
    let n = layout.n_items;
    let t_n = layout.n_periods;
    let mut stats = PathStats::default();
    let mut row = Vec::with_capacity(builder.n_cols());
    let mut lag_new = vec![0.0; n];

    for s in first_slot..=t_n {
        let mut rng = derive_rng(seed, &[sweep, stream::LATENT, j as u64, s as u64]);
        let ordering = (s > 0).then(|| {
            let r = builder.panel.ranking(j, s - 1);
            (r, r.order())
        });
        for i in 0..n {
            let proposal = match &ordering {
                None => prior_mean(i) + rng.sample::<f64, _>(StandardNormal),
                Some((ranking, order)) => {
                    let lag = &block[(s - 1) * n..s * n];
                    builder.fill_row(lag, j, s - 1, i, &mut row);
                    let mean = regressor.predict(&row);
                    let (lo, hi) = bounds(&block[s * n..(s + 1) * n], ranking, order, i);
                    truncated_normal_draw(mean, lo, hi, &mut rng)?
                }
            };
            if s == t_n {
                block[s * n + i] = proposal;
                continue;
            }
            // Transition factor of period s, whose rows read slot s as their lag.
            let lag = &block[s * n..(s + 1) * n];
            lag_new.copy_from_slice(lag);
            lag_new[i] = proposal;
            let next = &block[(s + 1) * n..(s + 2) * n];
            let mut log_ratio = 0.0;
            let affected = if builder.full_vector() { 0..n } else { i..i + 1 };
            for k in affected {
                builder.fill_row(lag, j, s, k, &mut row);
                let d0 = next[k] - regressor.predict(&row);
                builder.fill_row(&lag_new, j, s, k, &mut row);
                let d1 = next[k] - regressor.predict(&row);
                log_ratio += 0.5 * (d0 * d0 - d1 * d1);
            }
            stats.proposed += 1;
            if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
                block[s * n + i] = proposal;
                stats.accepted += 1;
            }
        }
    }
    if cfg!(debug_assertions) {
        check_block(block, &layout, j, builder.panel)?;
    }
    Ok(stats)
}

/// Order-preserving block moves on every period's score vector: a common
/// shift followed by a scaling about the mean, each a random-walk Metropolis
/// step targeting the full conditional of the vector.
pub fn sample_level_moves(
    state: &mut LatentScoreState,
    regressor: &Regressor,
    builder: &DesignBuilder<'_>,
    prior_mean: &(dyn Fn(usize) -> f64 + Sync),
    seed: u64,
    sweep: u64,
) -> Result<PathStats> {
    let layout = state.layout;
    if !layout.dynamic {
        return Err(Error::InvalidInput("level moves on a static latent layout".into()));
    }
    let width = layout.slots() * layout.n_items;
    let stats = state
        .z
        .par_chunks_mut(width)
        .enumerate()
        .map(|(j, block)| level_moves_ranker(block, j, regressor, builder, prior_mean, seed, sweep))
        .collect::<Vec<_>>();
    Ok(stats.into_iter().fold(PathStats::default(), |a, b| PathStats {
        proposed: a.proposed + b.proposed,
        accepted: a.accepted + b.accepted,
    }))
}

/// Log density of the factors touching slot `s` of one ranker's path.
fn slot_log_density(
    block: &[f64],
    s: usize,
    j: usize,
    regressor: &Regressor,
    builder: &DesignBuilder<'_>,
    prior_mean: &(dyn Fn(usize) -> f64 + Sync),
    row: &mut Vec<f64>,
) -> f64 {
    let n = builder.layout.n_items;
    let t_n = builder.layout.n_periods;
    let mut ll = 0.0;
    for i in 0..n {
        let mean = if s == 0 {
            prior_mean(i)
        } else {
            builder.fill_row(&block[(s - 1) * n..s * n], j, s - 1, i, row);
            regressor.predict(row)
        };
        let d = block[s * n + i] - mean;
        ll -= 0.5 * d * d;
    }
    if s < t_n {
        for i in 0..n {
            builder.fill_row(&block[s * n..(s + 1) * n], j, s, i, row);
            let d = block[(s + 1) * n + i] - regressor.predict(row);
            ll -= 0.5 * d * d;
        }
    }
    ll
}

fn level_moves_ranker(
    block: &mut [f64],
    j: usize,
    regressor: &Regressor,
    builder: &DesignBuilder<'_>,
    prior_mean: &(dyn Fn(usize) -> f64 + Sync),
    seed: u64,
    sweep: u64,
) -> PathStats {
    let layout = builder.layout;
    let n = layout.n_items;
    let step = 1.0 / (n as f64).sqrt();
    let mut stats = PathStats::default();
    let mut row = Vec::with_capacity(builder.n_cols());
    let mut saved = vec![0.0; n];
    for s in 0..=layout.n_periods {
        let mut rng = derive_rng(seed, &[sweep, stream::LEVEL, j as u64, s as u64]);
        for scale in [false, true] {
            if scale && n < 2 {
                continue;
            }
            let current = slot_log_density(block, s, j, regressor, builder, prior_mean, &mut row);
            let slot = &mut block[s * n..(s + 1) * n];
            saved.copy_from_slice(slot);
            let u: f64 = step * rng.sample::<f64, _>(StandardNormal);
            let log_jacobian = scale_or_shift(slot, u, scale);
            let proposed = slot_log_density(block, s, j, regressor, builder, prior_mean, &mut row);
            let log_ratio = proposed - current + log_jacobian;
            stats.proposed += 1;
            if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
                stats.accepted += 1;
            } else {
                block[s * n..(s + 1) * n].copy_from_slice(&saved);
            }
        }
    }
    stats
}

/// Shifts `slot` by `u`, or scales it about its mean by `exp(u)`; returns the
/// log Jacobian.
fn scale_or_shift(slot: &mut [f64], u: f64, scale: bool) -> f64 {
    if scale {
        let centre = slot.iter().sum::<f64>() / slot.len() as f64;
        let b = u.exp();
        slot.iter_mut().for_each(|z| *z = centre + b * (*z - centre));
        (slot.len() - 1) as f64 * u
    } else {
        slot.iter_mut().for_each(|z| *z += u);
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bart::{DecisionTree, Forest};
    use crate::model::{LagInput, ModelKind};
    use crate::regression::RegressorDraw;

    fn panel_one(r: &[usize], t: usize) -> RankingPanel {
        let rk = Ranking::from_order(r).unwrap();
        RankingPanel::new(vec![vec![rk]; t], None).unwrap()
    }

    #[test]
    fn initialization_respects_order() {
        let panel = panel_one(&[2, 0, 1], 3);
        for dynamic in [false, true] {
            let layout = Layout {
                n_items: 3,
                n_rankers: 1,
                n_periods: 3,
                dynamic,
            };
            let s = LatentScoreState::initialize(&panel, layout, |_| 0.0);
            s.check_ordering(&panel).unwrap();
        }
    }

    #[test]
    fn single_item_is_unconstrained() {
        let panel = panel_one(&[0], 1);
        let layout = Layout {
            n_items: 1,
            n_rankers: 1,
            n_periods: 1,
            dynamic: false,
        };
        let mut s = LatentScoreState::initialize(&panel, layout, |_| 0.0);
        let mut draws = Vec::new();
        for sweep in 0..20_000 {
            sample_latent_scores_static(&mut s, &[2.0], &panel, 4, sweep).unwrap();
            draws.push(s.z[0]);
        }
        assert!((crate::stats::mean(&draws) - 2.0).abs() < 0.03);
        assert!((crate::stats::variance(&draws) - 1.0).abs() < 0.05);
    }

    #[test]
    fn two_items_keep_order() {
        let panel = panel_one(&[0, 1], 1);
        let layout = Layout {
            n_items: 2,
            n_rankers: 1,
            n_periods: 1,
            dynamic: false,
        };
        let mut s = LatentScoreState::initialize(&panel, layout, |_| 0.0);
        for sweep in 0..2000 {
            sample_latent_scores_static(&mut s, &[1.0, -1.0], &panel, 9, sweep).unwrap();
            assert!(s.z[0] < s.z[1]);
        }
    }

    #[test]
    fn constant_forest_accepts_everything() {
        let panel = panel_one(&[1, 0, 2], 4);
        let layout = Layout {
            n_items: 3,
            n_rankers: 1,
            n_periods: 4,
            dynamic: true,
        };
        let spec = ModelKind::Arrobart.spec().unwrap();
        let builder = DesignBuilder::new(spec, LagInput::OwnScalarLag, &panel, layout);
        let reg = Regressor::from_draw(
            RegressorDraw::Forest(Forest::constant(3, 1, 0.2)),
            &crate::bart::BartPrior::default(),
        );
        let mut s = LatentScoreState::initialize(&panel, layout, |_| 0.0);
        for sweep in 0..50 {
            let st = sample_latent_path(&mut s, &reg, &builder, &|_| 0.0, 1, sweep).unwrap();
            assert_eq!(st.accepted, st.proposed);
        }
    }

    #[test]
    fn lag_dependent_forest_keeps_ordering() {
        let panel = panel_one(&[1, 0, 2], 5);
        let layout = Layout {
            n_items: 3,
            n_rankers: 1,
            n_periods: 5,
            dynamic: true,
        };
        let t = DecisionTree::split(0, 0.0, DecisionTree::leaf(-1.0), DecisionTree::leaf(1.5));
        let reg = Regressor::from_draw(
            RegressorDraw::Forest(Forest::new(vec![t], 4).unwrap()),
            &crate::bart::BartPrior::default(),
        );
        for lag in [LagInput::OwnScalarLag, LagInput::FullVectorLag] {
            let builder = DesignBuilder::new(ModelKind::Arrobart.spec().unwrap(), lag, &panel, layout);
            let mut s = LatentScoreState::initialize(&panel, layout, |_| 0.0);
            let mut acc = PathStats::default();
            for sweep in 0..200 {
                let st = sample_latent_path(&mut s, &reg, &builder, &|_| 0.0, 3, sweep).unwrap();
                acc.accepted += st.accepted;
                acc.proposed += st.proposed;
                s.check_ordering(&panel).unwrap();
            }
            assert!(acc.accepted < acc.proposed);
            assert!(acc.accepted > acc.proposed / 4);
        }
    }
}
