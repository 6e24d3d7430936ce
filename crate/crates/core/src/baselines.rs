use crate::chain::{run_chain, PosteriorArchive};
use crate::error::{Error, Result};
use crate::model::{FitConfig, ModelKind};
use crate::rankings::{rank_of_scores, Ranking, RankingPanel};

/// Mean observed rank of every item.
#[derive(Clone, Debug, PartialEq)]
pub struct BordaScores {
    pub means: Vec<f64>,
}

impl BordaScores {
    pub fn from_rankings(rankings: &[Ranking]) -> Result<Self> {
        let first = rankings
            .first()
            .ok_or_else(|| Error::InvalidInput("Borda count of zero rankings".into()))?;
        let n = first.len();
        let mut sums = vec![0.0; n];
        for r in rankings {
            if r.len() != n {
                return Err(Error::Dimension(format!("rankings over {} and {n} items", r.len())));
            }
            for (s, &v) in sums.iter_mut().zip(r.ranks()) {
                *s += v as f64;
            }
        }
        let m = rankings.len() as f64;
        Ok(BordaScores {
            means: sums.into_iter().map(|s| s / m).collect(),
        })
    }

    pub fn ranking(&self) -> Ranking {
        rank_of_scores(&self.means).expect("mean ranks are finite")
    }
}

/// Orders items by ascending mean rank; ties go to the lower item index.
pub fn borda_count(rankings: &[Ranking]) -> Result<Ranking> {
    Ok(BordaScores::from_rankings(rankings)?.ranking())
}

/// Dynamic linear baseline: latent mean `alpha + phi * z_{t-1} (+ x'beta)`.
pub fn arrolinear_fit(panel: &RankingPanel, config: &FitConfig) -> Result<PosteriorArchive> {
    match config.model {
        ModelKind::Arrolinear | ModelKind::Arrolinearx | ModelKind::ArrolinearLag => run_chain(panel, config),
        other => Err(Error::Config(format!("arrolinear_fit called with model {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(v: &[u32]) -> Ranking {
        let raw: Vec<i64> = v.iter().map(|&x| x as i64).collect();
        crate::rankings::validate_ranking(&raw).unwrap()
    }

    #[test]
    fn borda_examples() {
        assert_eq!(borda_count(&[r(&[2, 3, 1])]).unwrap(), r(&[2, 3, 1]));
        assert_eq!(borda_count(&[r(&[1, 2]), r(&[2, 1])]).unwrap(), r(&[1, 2]));
        // means (4/3, 7/3, 7/3) -> item 1 first, tie between 2 and 3 by index
        let rs = [r(&[1, 2, 3]), r(&[1, 3, 2]), r(&[2, 1, 3])];
        let s = BordaScores::from_rankings(&rs).unwrap();
        assert_eq!(s.means, vec![4.0 / 3.0, 2.0, 8.0 / 3.0]);
        assert_eq!(borda_count(&rs).unwrap(), r(&[1, 2, 3]));
        assert!(borda_count(&[]).is_err());
    }

    #[test]
    fn borda_invariances() {
        let rs = vec![r(&[3, 1, 2, 4]), r(&[1, 2, 4, 3]), r(&[2, 1, 3, 4])];
        let base = borda_count(&rs).unwrap();
        let mut rev = rs.clone();
        rev.reverse();
        assert_eq!(borda_count(&rev).unwrap(), base);
        let doubled: Vec<Ranking> = rs.iter().chain(&rs).cloned().collect();
        assert_eq!(borda_count(&doubled).unwrap(), base);
    }
}
