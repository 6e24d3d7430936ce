//! Expanding-window forecasting: fit on periods `0..t`, forecast period `t`.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::baselines::BordaScores;
use crate::chain::{run_chain, PosteriorArchive};
use crate::dynamic::{forecast_one_step, RankForecast};
use crate::error::{Error, Result};
use crate::latent::{sample_latent_path_from, LatentScoreState};
use crate::model::{DesignBuilder, FitConfig, Layout, ModelKind};
use crate::rankings::{Ranking, RankingPanel};
use crate::regression::Regressor;
use crate::rng::{derive_seed, stream};

/// Settings of an expanding-window exercise.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSpec {
    /// First forecast period; the first fit uses periods `0..first_test`.
    pub first_test: usize,
    pub n_test: usize,
    pub samples_per_draw: usize,
    /// Fit once and extend the latent paths over later periods with the
    /// regression draws held fixed. Approximate.
    pub reuse_posterior: bool,
    /// Latent sweeps per draw when extending a posterior.
    pub reuse_sweeps: usize,
    /// Fit every ranker separately instead of sharing one regression function.
    pub per_ranker: bool,
}

impl WindowSpec {
    pub fn new(first_test: usize, n_test: usize) -> Self {
        WindowSpec {
            first_test,
            n_test,
            samples_per_draw: 10,
            reuse_posterior: false,
            reuse_sweeps: 20,
            per_ranker: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodForecast {
    pub time: usize,
    pub forecast: RankForecast,
}

/// Fits `config` to `panel`, either jointly or one ranker at a time. Per-ranker
/// fits use seeds derived from the ranker index.
pub fn fit_panel(panel: &RankingPanel, config: &FitConfig, per_ranker: bool) -> Result<Vec<PosteriorArchive>> {
    if !per_ranker {
        return Ok(vec![run_chain(panel, config)?]);
    }
    (0..panel.n_rankers())
        .into_par_iter()
        .map(|j| {
            let sub = panel.select_rankers(&[j])?;
            let mut cfg = config.clone();
            cfg.seed = derive_seed(config.seed, &[stream::RANKER_FIT, j as u64]);
            run_chain(&sub, &cfg)
        })
        .collect()
}

/// Joins single-ranker forecasts in ranker order.
pub fn merge_rankers(parts: Vec<RankForecast>) -> Result<RankForecast> {
    let mut it = parts.into_iter();
    let mut out = it
        .next()
        .ok_or_else(|| Error::InvalidInput("no forecasts to merge".into()))?;
    for p in it {
        if p.n_items != out.n_items {
            return Err(Error::Dimension("forecasts over different item sets".into()));
        }
        out.n_rankers += p.n_rankers;
        out.probabilities.extend(p.probabilities);
        out.mean_scores.extend(p.mean_scores);
        out.point.extend(p.point);
        out.n_samples = out.n_samples.min(p.n_samples);
    }
    Ok(out)
}

/// Per-ranker Borda forecast: each ranker's mean rank over the given periods.
pub fn borda_forecast(panel: &RankingPanel) -> Result<RankForecast> {
    let n = panel.n_items();
    let m = panel.n_rankers();
    let mut probabilities = vec![0.0; m * n * n];
    let mut mean_scores = Vec::with_capacity(m * n);
    let mut point = Vec::with_capacity(m);
    for j in 0..m {
        let history: Vec<Ranking> = (0..panel.n_times()).map(|t| panel.ranking(j, t).clone()).collect();
        let scores = BordaScores::from_rankings(&history)?;
        let r = scores.ranking();
        for i in 0..n {
            probabilities[(j * n + i) * n + r.rank(i) as usize - 1] = 1.0;
        }
        mean_scores.extend(scores.means);
        point.push(r);
    }
    Ok(RankForecast {
        n_items: n,
        n_rankers: m,
        probabilities,
        mean_scores,
        point,
        n_samples: 0,
    })
}

/// Re-targets a fitted archive to a longer panel. Dynamic archives get their
/// latent paths extended over the new periods by `sweeps` path updates per
/// kept draw, with that draw's regression function fixed and the fitted
/// periods left as they were.
pub fn extend_posterior(archive: &PosteriorArchive, panel: &RankingPanel, sweeps: usize, seed: u64) -> Result<PosteriorArchive> {
    let spec = archive.spec()?;
    let old = archive.layout;
    if panel.n_times() < old.n_periods || panel.n_items() != old.n_items || panel.n_rankers() != old.n_rankers {
        return Err(Error::Dimension("panel does not extend the fitted panel".into()));
    }
    let layout = Layout {
        n_periods: panel.n_times(),
        ..old
    };
    let mut out = archive.clone();
    out.layout = layout;
    out.fitted_sum = vec![0.0; layout.n_rows()];
    out.latent_sum = vec![0.0; layout.n_latent()];
    if !spec.dynamic || layout.n_periods == old.n_periods {
        out.latent_draws = archive.latent_draws.iter().map(|z| resize_latent(z, &old, &layout)).collect();
        out.final_latent = resize_latent(&archive.final_latent, &old, &layout);
        return Ok(out);
    }
    if archive.latent_draws.len() != archive.n_kept() {
        return Err(Error::InvalidInput("archive is missing latent paths".into()));
    }
    let builder = DesignBuilder::new(spec, archive.config.lag_input, panel, layout);
    let prior = |i: usize| archive.config.prior_mean(i);
    let first_new = old.slots();
    out.latent_draws = archive
        .draws
        .par_iter()
        .zip(&archive.latent_draws)
        .enumerate()
        .map(|(d, (draw, z))| {
            let regressor = Regressor::from_draw(draw.clone(), &archive.config.prior);
            let mut state = LatentScoreState::initialize(panel, layout, prior);
            copy_slots(z, &old, &mut state.z, &layout);
            let draw_seed = derive_seed(seed, &[stream::FORECAST, d as u64]);
            for sweep in 0..sweeps {
                sample_latent_path_from(&mut state, &regressor, &builder, &prior, draw_seed, sweep as u64, first_new)?;
            }
            Ok(state.z)
        })
        .collect::<Result<_>>()?;
    out.final_latent = out.latent_draws.last().cloned().unwrap_or_default();
    Ok(out)
}

fn copy_slots(src: &[f64], from: &Layout, dst: &mut [f64], to: &Layout) {
    let n = from.n_items;
    for j in 0..from.n_rankers {
        for s in 0..from.slots().min(to.slots()) {
            let a = from.latent_index(j, s, 0);
            let b = to.latent_index(j, s, 0);
            dst[b..b + n].copy_from_slice(&src[a..a + n]);
        }
    }
}

fn resize_latent(src: &[f64], from: &Layout, to: &Layout) -> Vec<f64> {
    if src.is_empty() {
        return Vec::new();
    }
    let mut dst = vec![0.0; to.n_latent()];
    copy_slots(src, from, &mut dst, to);
    dst
}

fn forecast_archives(archives: &[PosteriorArchive], panel: &RankingPanel, samples: usize, seed: u64, per_ranker: bool) -> Result<RankForecast> {
    if !per_ranker {
        return forecast_one_step(&archives[0], panel, samples, seed);
    }
    let parts = archives
        .iter()
        .enumerate()
        .map(|(j, a)| {
            let sub = panel.select_rankers(&[j])?;
            forecast_one_step(a, &sub, samples, derive_seed(seed, &[stream::RANKER_FIT, j as u64]))
        })
        .collect::<Result<Vec<_>>>()?;
    merge_rankers(parts)
}

/// Runs the expanding window over `first_test..first_test + n_test`. Every
/// forecast period must exist in `panel` (its rankings are not used, its
/// covariates are).
pub fn expanding_window(panel: &RankingPanel, config: &FitConfig, window: &WindowSpec) -> Result<Vec<PeriodForecast>> {
    let end = window.first_test + window.n_test;
    if window.n_test == 0 {
        return Err(Error::Config("forecast window is empty".into()));
    }
    if window.first_test == 0 {
        return Err(Error::Config("the first forecast period needs at least one fitted period".into()));
    }
    if end > panel.n_times() {
        return Err(Error::InvalidInput(format!(
            "missing holdout: window ends at period {end}, data has {} periods",
            panel.n_times()
        )));
    }
    let times: Vec<usize> = (window.first_test..end).collect();
    if config.model == ModelKind::Borda {
        return times
            .iter()
            .map(|&t| {
                Ok(PeriodForecast {
                    time: t,
                    forecast: borda_forecast(&panel.slice_times(0, t)?)?,
                })
            })
            .collect();
    }
    let forecast_seed = |t: usize| derive_seed(config.seed, &[stream::FORECAST, t as u64]);

    if window.reuse_posterior {
        let base = fit_panel(&panel.slice_times(0, window.first_test)?, config, window.per_ranker)?;
        return times
            .par_iter()
            .map(|&t| {
                let train = panel.slice_times(0, t)?;
                let archives = base
                    .iter()
                    .enumerate()
                    .map(|(j, a)| {
                        let sub = if window.per_ranker { train.select_rankers(&[j])? } else { train.clone() };
                        extend_posterior(a, &sub, window.reuse_sweeps, forecast_seed(t))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let forecast = forecast_archives(&archives, &panel.slice_times(0, t + 1)?, window.samples_per_draw, forecast_seed(t), window.per_ranker)?;
                Ok(PeriodForecast { time: t, forecast })
            })
            .collect();
    }

    times
        .par_iter()
        .map(|&t| {
            let mut cfg = config.clone();
            cfg.seed = derive_seed(config.seed, &[stream::WINDOW, t as u64]);
            let archives = fit_panel(&panel.slice_times(0, t)?, &cfg, window.per_ranker)?;
            let forecast = forecast_archives(&archives, &panel.slice_times(0, t + 1)?, window.samples_per_draw, forecast_seed(t), window.per_ranker)?;
            Ok(PeriodForecast { time: t, forecast })
        })
        .collect()
}

/// Writes `time,ranker,item,rank,probability` rows.
pub fn write_probability_csv<W: Write>(mut w: W, panel: &RankingPanel, forecasts: &[PeriodForecast]) -> Result<()> {
    let io = |e| Error::io("<probabilities>", e);
    writeln!(w, "time,ranker,item,rank,probability").map_err(io)?;
    let n = panel.n_items();
    for pf in forecasts {
        let time = time_label(panel, pf.time);
        for j in 0..pf.forecast.n_rankers {
            for i in 0..n {
                for r in 1..=n {
                    writeln!(
                        w,
                        "{time},{},{},{r},{:?}",
                        panel.ranker_labels()[j],
                        panel.item_labels()[i],
                        pf.forecast.probability(j, i, r)
                    )
                    .map_err(io)?;
                }
            }
        }
    }
    Ok(())
}

/// Writes `time,ranker,item,point_rank` rows.
pub fn write_point_csv<W: Write>(mut w: W, panel: &RankingPanel, forecasts: &[PeriodForecast]) -> Result<()> {
    let io = |e| Error::io("<points>", e);
    writeln!(w, "time,ranker,item,point_rank").map_err(io)?;
    for pf in forecasts {
        let time = time_label(panel, pf.time);
        for (j, r) in pf.forecast.point.iter().enumerate() {
            for i in 0..r.len() {
                writeln!(w, "{time},{},{},{}", panel.ranker_labels()[j], panel.item_labels()[i], r.rank(i)).map_err(io)?;
            }
        }
    }
    Ok(())
}

fn time_label(panel: &RankingPanel, t: usize) -> String {
    panel.time_labels().get(t).cloned().unwrap_or_else(|| t.to_string())
}

pub fn write_forecasts(dir: impl AsRef<Path>, panel: &RankingPanel, forecasts: &[PeriodForecast]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let open = |name: &str| {
        let p = dir.join(name);
        std::fs::File::create(&p)
            .map(std::io::BufWriter::new)
            .map_err(|e| Error::io(&p, e))
    };
    let mut probs = open("probabilities.csv")?;
    write_probability_csv(&mut probs, panel, forecasts)?;
    probs.flush().map_err(|e| Error::io(dir.join("probabilities.csv"), e))?;
    let mut points = open("points.csv")?;
    write_point_csv(&mut points, panel, forecasts)?;
    points.flush().map_err(|e| Error::io(dir.join("points.csv"), e))
}
