//! Autoregressive Thurstone models and one-step-ahead forecasting.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::chain::{run_chain, PosteriorArchive};
use crate::error::{Error, Result};
use crate::model::{DesignBuilder, FitConfig, ModelKind};
use crate::rankings::{rank_of_scores, rank_of_scores_with_tiebreak, Ranking, RankingPanel};
use crate::rng::{derive_rng, stream};

pub fn arrobart_fit(panel: &RankingPanel, config: &FitConfig) -> Result<PosteriorArchive> {
    match config.model {
        ModelKind::Arrobart | ModelKind::Arrobartx | ModelKind::ArrobartLag => run_chain(panel, config),
        other => Err(Error::Config(format!("arrobart_fit called with model {other}"))),
    }
}

/// In-sample one-step rankings: for every `(ranker, period)`, the ranking of
/// posterior-mean fitted scores (ties broken by posterior-mean latent scores).
/// Indexed `[ranker * T + period]`.
pub fn fitted_rankings(archive: &PosteriorArchive) -> Result<Vec<Ranking>> {
    if archive.n_kept() == 0 {
        return Err(Error::InvalidInput("archive holds no draws".into()));
    }
    let l = archive.layout;
    let fitted = archive.fitted_mean();
    let latent = archive.latent_mean();
    let n = l.n_items;
    let mut out = Vec::with_capacity(l.n_rankers * l.n_periods);
    for j in 0..l.n_rankers {
        for p in 0..l.n_periods {
            let f = &fitted[l.row(j, p, 0)..l.row(j, p, 0) + n];
            let s = l.latent_index(j, l.response_slot(p), 0);
            out.push(rank_of_scores_with_tiebreak(f, &latent[s..s + n])?);
        }
    }
    Ok(out)
}

/// Posterior predictive rankings of the period after the fitted window.
#[derive(Clone, Debug, PartialEq)]
pub struct RankForecast {
    pub n_items: usize,
    pub n_rankers: usize,
    /// `P(item i gets rank r + 1)` for ranker `j`, at `[(j * N + i) * N + r]`.
    pub probabilities: Vec<f64>,
    /// Posterior mean of the predictive mean score, `[j * N + i]`.
    pub mean_scores: Vec<f64>,
    /// Rank of `mean_scores` per ranker.
    pub point: Vec<Ranking>,
    pub n_samples: usize,
}

impl RankForecast {
    pub fn probability(&self, ranker: usize, item: usize, rank: usize) -> f64 {
        self.probabilities[(ranker * self.n_items + item) * self.n_items + rank - 1]
    }
}

/// Simulates `z_{T+1} ~ N(f(X_{T+1}), I)` once per kept draw and
/// `samples_per_draw` times over, using each draw's regression function and
/// final latent state.
///
/// `panel` must contain the fitted periods; it also needs the forecast
/// period when the model reads exogenous covariates.
pub fn forecast_one_step(
    archive: &PosteriorArchive,
    panel: &RankingPanel,
    samples_per_draw: usize,
    seed: u64,
) -> Result<RankForecast> {
    let spec = archive.spec()?;
    let l = archive.layout;
    let (n, m, t_fit) = (l.n_items, l.n_rankers, l.n_periods);
    if archive.n_kept() == 0 {
        return Err(Error::InvalidInput("archive holds no draws".into()));
    }
    if spec.dynamic && archive.latent_draws.len() != archive.n_kept() {
        return Err(Error::InvalidInput("archive is missing latent paths".into()));
    }
    if panel.n_items() != n || panel.n_rankers() != m || panel.n_times() < t_fit {
        return Err(Error::Dimension("forecast panel does not extend the fitted panel".into()));
    }
    let builder = DesignBuilder::new(spec, archive.config.lag_input, panel, l);
    if builder.n_cols() != archive.n_covariates {
        return Err(Error::Dimension(format!(
            "forecast design has {} columns, the fit used {}",
            builder.n_cols(),
            archive.n_covariates
        )));
    }
    if spec.exogenous && panel.covariates.exogenous_dim() > 0 && panel.n_times() <= t_fit {
        return Err(Error::InvalidInput(
            "missing holdout period: covariates of the forecast period are required".into(),
        ));
    }
    let samples_per_draw = samples_per_draw.max(1);

    let per_draw: Vec<(Vec<u32>, Vec<f64>)> = (0..archive.n_kept())
        .into_par_iter()
        .map(|d| -> Result<(Vec<u32>, Vec<f64>)> {
            let draw = &archive.draws[d];
            let mut rng = derive_rng(seed, &[stream::FORECAST, d as u64]);
            let mut counts = vec![0u32; m * n * n];
            let mut means = vec![0.0; m * n];
            let mut row = Vec::with_capacity(builder.n_cols());
            let mut mu = vec![0.0; n];
            let mut z = vec![0.0; n];
            for j in 0..m {
                let lag: &[f64] = if spec.dynamic {
                    let s = l.latent_index(j, t_fit, 0);
                    &archive.latent_draws[d][s..s + n]
                } else {
                    &[]
                };
                for i in 0..n {
                    builder.fill_row(lag, j, t_fit, i, &mut row);
                    mu[i] = draw.predict(&row);
                    means[j * n + i] = mu[i];
                }
                for _ in 0..samples_per_draw {
                    for i in 0..n {
                        z[i] = mu[i] + rng.sample::<f64, _>(StandardNormal);
                    }
                    let r = rank_of_scores(&z)?;
                    for i in 0..n {
                        counts[(j * n + i) * n + r.rank(i) as usize - 1] += 1;
                    }
                }
            }
            Ok((counts, means))
        })
        .collect::<Result<_>>()?;

    let total = (archive.n_kept() * samples_per_draw) as f64;
    let mut counts = vec![0u64; m * n * n];
    let mut mean_scores = vec![0.0; m * n];
    for (c, mu) in &per_draw {
        for (a, b) in counts.iter_mut().zip(c) {
            *a += *b as u64;
        }
        for (a, b) in mean_scores.iter_mut().zip(mu) {
            *a += b;
        }
    }
    mean_scores.iter_mut().for_each(|v| *v /= archive.n_kept() as f64);
    let probabilities = counts.iter().map(|&c| c as f64 / total).collect();
    let point = (0..m)
        .map(|j| rank_of_scores(&mean_scores[j * n..(j + 1) * n]))
        .collect::<Result<_>>()?;
    Ok(RankForecast {
        n_items: n,
        n_rankers: m,
        probabilities,
        mean_scores,
        point,
        n_samples: archive.n_kept() * samples_per_draw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bart::{DecisionTree, Forest};
    use crate::chain::PosteriorArchive;
    use crate::latent::PathStats;
    use crate::model::Layout;
    use crate::regression::RegressorDraw;

    /// Archive with one forest over the lag and a fixed final latent state.
    fn fixed_archive(forest: Forest, last: Vec<f64>, n_draws: usize) -> (PosteriorArchive, RankingPanel) {
        let n = last.len();
        let panel = RankingPanel::new(vec![vec![Ranking::identity(n)]; 2], None).unwrap();
        let layout = Layout {
            n_items: n,
            n_rankers: 1,
            n_periods: 2,
            dynamic: true,
        };
        let mut z = vec![0.0; layout.n_latent()];
        z[2 * n..].copy_from_slice(&last);
        let draw = RegressorDraw::Forest(forest);
        let a = PosteriorArchive {
            config: FitConfig::new(ModelKind::Arrobart),
            layout,
            n_covariates: 1,
            sweeps_completed: 0,
            draws: vec![draw.clone(); n_draws],
            latent_draws: vec![z.clone(); n_draws],
            fitted_sum: vec![0.0; layout.n_rows()],
            latent_sum: vec![0.0; layout.n_latent()],
            final_regressor: draw,
            final_latent: z,
            move_stats: None,
            path_stats: PathStats::default(),
        };
        (a, panel)
    }

    #[test]
    fn symmetric_two_items() {
        let (a, panel) = fixed_archive(Forest::constant(2, 1, 0.3), vec![0.0, 1.0], 1000);
        let f = forecast_one_step(&a, &panel, 100, 1).unwrap();
        let p = f.probability(0, 0, 1);
        assert!((p - 0.5).abs() < 0.01, "{p}");
    }

    #[test]
    fn separated_means() {
        // lag 0 -> mean 0, lag 1 -> mean 2
        let t = DecisionTree::split(0, 0.5, DecisionTree::leaf(0.0), DecisionTree::leaf(2.0));
        let (a, panel) = fixed_archive(Forest::new(vec![t], 1).unwrap(), vec![0.0, 1.0], 1000);
        let f = forecast_one_step(&a, &panel, 100, 2).unwrap();
        let want = crate::stats::normal_cdf(2.0 / 2f64.sqrt());
        assert!((f.probability(0, 0, 1) - want).abs() < 0.005);
        assert_eq!(f.point[0], Ranking::identity(2));
        for i in 0..2 {
            let row: f64 = (1..=2).map(|r| f.probability(0, i, r)).sum();
            let col: f64 = (0..2).map(|k| f.probability(0, k, i + 1)).sum();
            assert!((row - 1.0).abs() < 1e-12 && (col - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_latent_paths() {
        let (mut a, panel) = fixed_archive(Forest::constant(1, 1, 0.0), vec![0.0, 1.0], 3);
        a.latent_draws.clear();
        assert!(forecast_one_step(&a, &panel, 1, 0).is_err());
    }
}
