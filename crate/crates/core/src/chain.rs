//! The Gibbs sampler shared by every model: latent augmentation followed by
//! a regression update, with draw storage and resumable state.

use log::{debug, info};

use crate::bart::MoveStats;
use crate::error::{Error, Result};
use crate::latent::{sample_latent_path, sample_level_moves, sample_latent_scores_static, LatentScoreState, PathStats};
use crate::model::{DesignBuilder, FitConfig, Layout, ModelSpec};
use crate::rankings::RankingPanel;
use crate::regression::{Regressor, RegressorDraw};
use crate::rng::{derive_rng, stream};

/// Stored output of a fit, plus the state needed to extend the chain.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorArchive {
    pub config: FitConfig,
    pub layout: Layout,
    pub n_covariates: usize,
    pub sweeps_completed: usize,
    /// Kept regression draws, oldest first.
    pub draws: Vec<RegressorDraw>,
    /// Full latent state of every kept draw (empty when not stored).
    pub latent_draws: Vec<Vec<f64>>,
    /// Running sums over kept draws of the in-sample fitted means (design-row order).
    pub fitted_sum: Vec<f64>,
    /// Running sums over kept draws of the latent state.
    pub latent_sum: Vec<f64>,
    pub final_regressor: RegressorDraw,
    pub final_latent: Vec<f64>,
    pub move_stats: Option<MoveStats>,
    pub path_stats: PathStats,
}

impl PosteriorArchive {
    pub fn n_kept(&self) -> usize {
        self.draws.len()
    }

    pub fn fitted_mean(&self) -> Vec<f64> {
        let k = self.n_kept().max(1) as f64;
        self.fitted_sum.iter().map(|v| v / k).collect()
    }

    pub fn latent_mean(&self) -> Vec<f64> {
        let k = self.n_kept().max(1) as f64;
        self.latent_sum.iter().map(|v| v / k).collect()
    }

    pub fn spec(&self) -> Result<ModelSpec> {
        self.config.spec()
    }
}

fn check_panel(spec: &ModelSpec, panel: &RankingPanel) -> Result<()> {
    if spec.dynamic && panel.n_times() < 2 {
        return Err(Error::InvalidInput(format!(
            "dynamic model requires T >= 2, got T = {}",
            panel.n_times()
        )));
    }
    panel.covariates.validate()
}

/// Runs a fresh chain.
pub fn run_chain(panel: &RankingPanel, config: &FitConfig) -> Result<PosteriorArchive> {
    config.validate()?;
    let spec = config.spec()?;
    check_panel(&spec, panel)?;
    let layout = Layout {
        n_items: panel.n_items(),
        n_rankers: panel.n_rankers(),
        n_periods: panel.n_times(),
        dynamic: spec.dynamic,
    };
    let builder = DesignBuilder::new(spec, config.lag_input, panel, layout);
    let latent = LatentScoreState::initialize(panel, layout, |i| config.prior_mean(i));
    let regressor = Regressor::new(spec.regressor, &config.prior, builder.n_cols());
    let archive = PosteriorArchive {
        config: config.clone(),
        layout,
        n_covariates: builder.n_cols(),
        sweeps_completed: 0,
        draws: Vec::new(),
        latent_draws: Vec::new(),
        fitted_sum: vec![0.0; layout.n_rows()],
        latent_sum: vec![0.0; layout.n_latent()],
        final_regressor: regressor.draw(),
        final_latent: latent.z,
        move_stats: regressor.move_stats(),
        path_stats: PathStats::default(),
    };
    continue_chain(panel, archive)
}

/// Extends a chain to `n_draws` kept draws. Running a chain in pieces gives
/// exactly the archive of a single run with the final settings.
pub fn resume_chain(panel: &RankingPanel, mut archive: PosteriorArchive, n_draws: usize) -> Result<PosteriorArchive> {
    if n_draws < archive.n_kept() {
        return Err(Error::Config(format!(
            "archive already holds {} draws, cannot resume to {n_draws}",
            archive.n_kept()
        )));
    }
    archive.config.n_draws = n_draws;
    let spec = archive.spec()?;
    check_panel(&spec, panel)?;
    if (panel.n_items(), panel.n_rankers(), panel.n_times()) != (archive.layout.n_items, archive.layout.n_rankers, archive.layout.n_periods) {
        return Err(Error::Dimension("panel does not match the archived fit".into()));
    }
    continue_chain(panel, archive)
}

fn continue_chain(panel: &RankingPanel, mut archive: PosteriorArchive) -> Result<PosteriorArchive> {
    let config = archive.config.clone();
    let spec = config.spec()?;
    let layout = archive.layout;
    let builder = DesignBuilder::new(spec, config.lag_input, panel, layout);
    let mut regressor = Regressor::from_draw(archive.final_regressor.clone(), &config.prior);
    if let (Regressor::Bart(b), Some(stats)) = (&mut regressor, archive.move_stats) {
        b.stats = stats;
    }
    let mut latent = LatentScoreState {
        layout,
        z: std::mem::take(&mut archive.final_latent),
    };
    latent.check_ordering(panel)?;
    let mut design = builder.build(&latent.z);
    regressor.refresh(&design);
    let prior_mean = |i: usize| config.prior_mean(i);

    let total = config.total_sweeps();
    let started = std::time::Instant::now();
    for sweep in archive.sweeps_completed..total {
        let sw = sweep as u64;
        if spec.dynamic {
            let st = sample_latent_path(&mut latent, &regressor, &builder, &prior_mean, config.seed, sw)?;
            archive.path_stats.proposed += st.proposed;
            archive.path_stats.accepted += st.accepted;
            if config.level_moves {
                sample_level_moves(&mut latent, &regressor, &builder, &prior_mean, config.seed, sw)?;
            }
            design = builder.build(&latent.z);
        } else {
            sample_latent_scores_static(&mut latent, regressor.fitted(), panel, config.seed, sw)?;
        }
        let targets = builder.targets(&latent.z);
        let mut rng = derive_rng(config.seed, &[sw, stream::REGRESSION]);
        regressor.update(&design, &targets, &mut rng)?;

        if sweep >= config.n_burnin && (sweep - config.n_burnin + 1).is_multiple_of(config.thin) {
            archive.draws.push(regressor.draw());
            for (s, v) in archive.fitted_sum.iter_mut().zip(regressor.fitted()) {
                *s += v;
            }
            for (s, v) in archive.latent_sum.iter_mut().zip(&latent.z) {
                *s += v;
            }
            if config.store_latent {
                archive.latent_draws.push(latent.z.clone());
            }
        }
        if (sweep + 1) % 500 == 0 {
            debug!("{}: sweep {}/{}", config.model, sweep + 1, total);
        }
    }
    archive.sweeps_completed = total.max(archive.sweeps_completed);
    archive.final_regressor = regressor.draw();
    archive.final_latent = latent.z;
    archive.move_stats = regressor.move_stats();

    let elapsed = started.elapsed().as_secs_f64();
    if let Some(ms) = archive.move_stats {
        info!(
            "{}: {} sweeps in {:.2}s; grow/prune/change acceptance {:.3}/{:.3}/{:.3}",
            config.model,
            total,
            elapsed,
            ms.rate(crate::bart::MoveKind::Grow),
            ms.rate(crate::bart::MoveKind::Prune),
            ms.rate(crate::bart::MoveKind::Change)
        );
    } else {
        info!("{}: {} sweeps in {:.2}s", config.model, total, elapsed);
    }
    if archive.path_stats.proposed > 0 {
        info!(
            "{}: latent path acceptance {:.3}",
            config.model,
            archive.path_stats.accepted as f64 / archive.path_stats.proposed as f64
        );
    }
    Ok(archive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelKind;
    use crate::rankings::Ranking;

    fn small_panel(t: usize) -> RankingPanel {
        let r = |v: &[usize]| Ranking::from_order(v).unwrap();
        let periods = (0..t)
            .map(|p| vec![r(if p % 2 == 0 { &[0, 1, 2] } else { &[1, 0, 2] }), r(&[2, 1, 0])])
            .collect();
        RankingPanel::new(periods, None).unwrap()
    }

    #[test]
    fn split_run_matches_single_run() {
        let panel = small_panel(4);
        for model in [ModelKind::Arrobart, ModelKind::Arrolinear, ModelKind::Robart] {
            let cfg = FitConfig::new(model).with_iterations(20, 30).with_seed(5).with_trees(5);
            let full = run_chain(&panel, &cfg).unwrap();
            let mut first = cfg.clone();
            first.n_draws = 10;
            let part = run_chain(&panel, &first).unwrap();
            let resumed = resume_chain(&panel, part, 30).unwrap();
            assert_eq!(resumed, full, "{model}");
        }
    }

    #[test]
    fn dynamic_needs_two_periods() {
        let panel = small_panel(1);
        let err = run_chain(&panel, &FitConfig::new(ModelKind::Arrobart).with_iterations(1, 1)).unwrap_err();
        assert!(err.to_string().contains("T >= 2"), "{err}");
    }

    #[test]
    fn kept_draws_and_ordering() {
        let panel = small_panel(3);
        let mut cfg = FitConfig::new(ModelKind::ArrobartLag).with_iterations(5, 6).with_trees(4);
        cfg.thin = 2;
        let a = run_chain(&panel, &cfg).unwrap();
        assert_eq!(a.n_kept(), 6);
        assert_eq!(a.sweeps_completed, 17);
        for z in &a.latent_draws {
            LatentScoreState { layout: a.layout, z: z.clone() }.check_ordering(&panel).unwrap();
        }
    }
}
