//! Cross-sectional Thurstone models: the sum-of-trees model and its linear
//! counterpart.

use crate::chain::{run_chain, PosteriorArchive};
use crate::error::{Error, Result};
use crate::model::{FitConfig, ModelKind};
use crate::rankings::{rank_of_scores_with_tiebreak, Ranking, RankingPanel};

fn check_static(config: &FitConfig, allowed: &[ModelKind]) -> Result<()> {
    if !allowed.contains(&config.model) {
        return Err(Error::Config(format!("model {} is not valid here", config.model)));
    }
    Ok(())
}

pub fn robart_fit(panel: &RankingPanel, config: &FitConfig) -> Result<PosteriorArchive> {
    check_static(config, &[ModelKind::Robart, ModelKind::RobartLag])?;
    run_chain(panel, config)
}

pub fn rolinear_fit(panel: &RankingPanel, config: &FitConfig) -> Result<PosteriorArchive> {
    check_static(config, &[ModelKind::Rolinear, ModelKind::RolinearLag])?;
    run_chain(panel, config)
}

/// Item ranking from posterior-mean fitted scores averaged over rankers and
/// periods. Ties fall back to posterior-mean latent scores, then item index.
pub fn posterior_rank_estimate(archive: &PosteriorArchive) -> Result<Ranking> {
    if archive.n_kept() == 0 {
        return Err(Error::InvalidInput("archive holds no draws".into()));
    }
    let l = archive.layout;
    let fitted = archive.fitted_mean();
    let latent = archive.latent_mean();
    let mut f = vec![0.0; l.n_items];
    let mut z = vec![0.0; l.n_items];
    for j in 0..l.n_rankers {
        for p in 0..l.n_periods {
            for i in 0..l.n_items {
                f[i] += fitted[l.row(j, p, i)];
                z[i] += latent[l.latent_index(j, l.response_slot(p), i)];
            }
        }
    }
    rank_of_scores_with_tiebreak(&f, &z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rankings::rank_of_scores;

    #[test]
    fn rejects_dynamic_kind() {
        let panel = RankingPanel::cross_section(vec![Ranking::identity(3)], None).unwrap();
        assert!(robart_fit(&panel, &FitConfig::new(ModelKind::Arrobart)).is_err());
    }

    #[test]
    fn no_covariates_follows_borda() {
        let orders: [&[usize]; 4] = [&[0, 1, 2, 3], &[0, 2, 1, 3], &[1, 0, 2, 3], &[0, 1, 3, 2]];
        let rankings: Vec<Ranking> = orders.iter().map(|o| Ranking::from_order(o).unwrap()).collect();
        let panel = RankingPanel::cross_section(rankings.clone(), None).unwrap();
        let cfg = FitConfig::new(ModelKind::Rolinear).with_iterations(200, 2000).with_seed(1);
        let a = rolinear_fit(&panel, &cfg).unwrap();
        // Without covariates the fitted mean is shared, so the latent means decide.
        let l = a.layout;
        let latent = a.latent_mean();
        let z: Vec<f64> = (0..l.n_items)
            .map(|i| (0..l.n_rankers).map(|j| latent[l.latent_index(j, 0, i)]).sum())
            .collect();
        assert_eq!(rank_of_scores(&z).unwrap(), crate::baselines::borda_count(&rankings).unwrap());
        assert_eq!(posterior_rank_estimate(&a).unwrap(), crate::baselines::borda_count(&rankings).unwrap());
    }
}
