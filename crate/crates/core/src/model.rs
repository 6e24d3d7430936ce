//! Model roster, sampler configuration and regression design assembly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bart::BartPrior;
use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::rankings::RankingPanel;
use crate::regression::RegressorKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Robart,
    Rolinear,
    Arrobart,
    Arrobartx,
    Arrolinear,
    Arrolinearx,
    RobartLag,
    RolinearLag,
    ArrobartLag,
    ArrolinearLag,
    Borda,
}

impl ModelKind {
    pub const ALL: [ModelKind; 11] = [
        ModelKind::Robart,
        ModelKind::Rolinear,
        ModelKind::Arrobart,
        ModelKind::Arrobartx,
        ModelKind::Arrolinear,
        ModelKind::Arrolinearx,
        ModelKind::RobartLag,
        ModelKind::RolinearLag,
        ModelKind::ArrobartLag,
        ModelKind::ArrolinearLag,
        ModelKind::Borda,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Robart => "robart",
            ModelKind::Rolinear => "rolinear",
            ModelKind::Arrobart => "arrobart",
            ModelKind::Arrobartx => "arrobartx",
            ModelKind::Arrolinear => "arrolinear",
            ModelKind::Arrolinearx => "arrolinearx",
            ModelKind::RobartLag => "robart_lag",
            ModelKind::RolinearLag => "rolinear_lag",
            ModelKind::ArrobartLag => "arrobart_lag",
            ModelKind::ArrolinearLag => "arrolinear_lag",
            ModelKind::Borda => "borda",
        }
    }

    /// Structural description of the model; `None` for the Borda baseline.
    pub fn spec(self) -> Option<ModelSpec> {
        use ModelKind::*;
        use RegressorKind::{Bart, Linear};
        let (dynamic, regressor, exogenous, lagged_rank) = match self {
            Robart => (false, Bart, true, false),
            Rolinear => (false, Linear, true, false),
            RobartLag => (false, Bart, true, true),
            RolinearLag => (false, Linear, true, true),
            Arrobart => (true, Bart, false, false),
            Arrolinear => (true, Linear, false, false),
            Arrobartx => (true, Bart, true, false),
            Arrolinearx => (true, Linear, true, false),
            ArrobartLag => (true, Bart, false, true),
            ArrolinearLag => (true, Linear, false, true),
            Borda => return None,
        };
        Some(ModelSpec {
            dynamic,
            regressor,
            exogenous,
            lagged_rank,
        })
    }

    /// Default forest size: 50 trees for static models, 25 for dynamic ones.
    pub fn default_trees(self) -> usize {
        match self.spec() {
            Some(s) if s.dynamic => 25,
            _ => 50,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown model kind {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dynamic: bool,
    pub regressor: RegressorKind,
    /// Include item, ranker and pair covariates of the response period.
    pub exogenous: bool,
    /// Include the previous period's observed rank.
    pub lagged_rank: bool,
}

/// How lagged latent scores enter a dynamic model's design.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagInput {
    /// Item `i` sees only its own previous score.
    #[default]
    OwnScalarLag,
    /// Item `i` sees its own previous score followed by the ranker's full previous score vector.
    FullVectorLag,
}

/// Settings of one MCMC fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub model: ModelKind,
    pub n_burnin: usize,
    pub n_draws: usize,
    /// Keep every `thin`-th post-burn-in sweep.
    pub thin: usize,
    pub seed: u64,
    pub prior: BartPrior,
    pub lag_input: LagInput,
    /// Prior mean of the initial latent state, one entry per item; empty means zero.
    pub z_prior_mean: Vec<f64>,
    /// Store the full latent state of every kept draw.
    pub store_latent: bool,
    /// Add order-preserving shift and scale moves per period to the path update.
    #[serde(default = "default_true")]
    pub level_moves: bool,
}

fn default_true() -> bool {
    true
}

impl FitConfig {
    pub fn new(model: ModelKind) -> Self {
        FitConfig {
            model,
            n_burnin: 1000,
            n_draws: 1000,
            thin: 1,
            seed: 0,
            prior: BartPrior::with_trees(model.default_trees()),
            lag_input: LagInput::default(),
            z_prior_mean: Vec::new(),
            store_latent: true,
            level_moves: true,
        }
    }

    pub fn with_iterations(mut self, n_burnin: usize, n_draws: usize) -> Self {
        self.n_burnin = n_burnin;
        self.n_draws = n_draws;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_trees(mut self, n_trees: usize) -> Self {
        self.prior.n_trees = n_trees;
        self
    }

    pub fn spec(&self) -> Result<ModelSpec> {
        self.model
            .spec()
            .ok_or_else(|| Error::Config(format!("{} is not a sampled model", self.model)))
    }

    pub fn total_sweeps(&self) -> usize {
        self.n_burnin + self.n_draws * self.thin
    }

    pub fn validate(&self) -> Result<()> {
        self.spec()?;
        if self.n_draws == 0 {
            return Err(Error::Config("n_draws must be positive".into()));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be positive".into()));
        }
        if self.z_prior_mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("z_prior_mean must be finite".into()));
        }
        self.prior.validate()
    }

    pub fn prior_mean(&self, item: usize) -> f64 {
        self.z_prior_mean.get(item).copied().unwrap_or(0.0)
    }
}

/// Indexing of latent scores and design rows.
///
/// Latent scores are stored per ranker and slot: dynamic models keep the
/// initial state in slot 0 and period `p` in slot `p + 1`; static models
/// map period `p` to slot `p`. Design rows are ordered `(ranker, period, item)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub n_items: usize,
    pub n_rankers: usize,
    pub n_periods: usize,
    pub dynamic: bool,
}

impl Layout {
    pub fn slots(&self) -> usize {
        self.n_periods + self.dynamic as usize
    }

    pub fn n_latent(&self) -> usize {
        self.n_rankers * self.slots() * self.n_items
    }

    pub fn n_rows(&self) -> usize {
        self.n_rankers * self.n_periods * self.n_items
    }

    #[inline]
    pub fn latent_index(&self, ranker: usize, slot: usize, item: usize) -> usize {
        (ranker * self.slots() + slot) * self.n_items + item
    }

    #[inline]
    pub fn response_slot(&self, period: usize) -> usize {
        period + self.dynamic as usize
    }

    #[inline]
    pub fn row(&self, ranker: usize, period: usize, item: usize) -> usize {
        (ranker * self.n_periods + period) * self.n_items + item
    }
}

/// Assembles design rows of a model from a panel and the latent state.
///
/// Column order: lagged latent scores (dynamic models), exogenous
/// covariates of the response period, previous observed rank.
#[derive(Clone, Debug)]
pub struct DesignBuilder<'a> {
    pub spec: ModelSpec,
    pub lag_input: LagInput,
    pub panel: &'a RankingPanel,
    pub layout: Layout,
    lag_cols: usize,
    exo_cols: usize,
    rank_col: bool,
}

impl<'a> DesignBuilder<'a> {
    /// `layout` may cover fewer periods than `panel` (forecasting reads the
    /// covariates and ranks of later periods).
    pub fn new(spec: ModelSpec, lag_input: LagInput, panel: &'a RankingPanel, layout: Layout) -> Self {
        let n = layout.n_items;
        let lag_cols = match (spec.dynamic, lag_input) {
            (false, _) => 0,
            (true, LagInput::OwnScalarLag) => 1,
            (true, LagInput::FullVectorLag) => 1 + n,
        };
        let exo_cols = if spec.exogenous {
            panel.covariates.exogenous_dim()
        } else {
            0
        };
        DesignBuilder {
            spec,
            lag_input,
            panel,
            layout,
            lag_cols,
            exo_cols,
            rank_col: spec.lagged_rank || panel.covariates.lagged_rank_flag,
        }
    }

    pub fn n_cols(&self) -> usize {
        self.lag_cols + self.exo_cols + self.rank_col as usize
    }

    /// Whether a change to item `i`'s lag affects other items' rows.
    pub fn full_vector(&self) -> bool {
        self.spec.dynamic && self.lag_input == LagInput::FullVectorLag
    }

    /// Writes the row of `(ranker, period, item)` given the ranker's lagged
    /// score vector `lag` (ignored by static models).
    pub fn fill_row(&self, lag: &[f64], ranker: usize, period: usize, item: usize, out: &mut Vec<f64>) {
        out.clear();
        if self.spec.dynamic {
            out.push(lag[item]);
            if self.lag_input == LagInput::FullVectorLag {
                out.extend_from_slice(lag);
            }
        }
        if self.exo_cols > 0 {
            self.panel.covariates.extend_row(item, ranker, period, out);
        }
        if self.rank_col {
            out.push(if period == 0 {
                0.5 * (self.layout.n_items as f64 + 1.0)
            } else {
                self.panel.ranking(ranker, period - 1).rank(item) as f64
            });
        }
    }

    /// Slice of the ranker's latent vector feeding period `period`.
    pub fn lag_slice<'z>(&self, latent: &'z [f64], ranker: usize, period: usize) -> &'z [f64] {
        if !self.spec.dynamic {
            return &[];
        }
        let start = self.layout.latent_index(ranker, period, 0);
        &latent[start..start + self.layout.n_items]
    }

    pub fn build(&self, latent: &[f64]) -> DesignMatrix {
        let l = self.layout;
        let k = self.n_cols();
        let mut data = Vec::with_capacity(l.n_rows() * k);
        let mut row = Vec::with_capacity(k);
        for j in 0..l.n_rankers {
            for p in 0..l.n_periods {
                let lag = self.lag_slice(latent, j, p);
                for i in 0..l.n_items {
                    self.fill_row(lag, j, p, i, &mut row);
                    data.extend_from_slice(&row);
                }
            }
        }
        DesignMatrix::new(l.n_rows(), k, data)
    }

    /// Response targets in design-row order.
    pub fn targets(&self, latent: &[f64]) -> Vec<f64> {
        let l = self.layout;
        let mut out = Vec::with_capacity(l.n_rows());
        for j in 0..l.n_rankers {
            for p in 0..l.n_periods {
                let s = l.latent_index(j, l.response_slot(p), 0);
                out.extend_from_slice(&latent[s..s + l.n_items]);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rankings::{CovariateSet, Ranking};

    #[test]
    fn parse_kinds() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert_eq!("ARROBART-lag".parse::<ModelKind>().unwrap(), ModelKind::ArrobartLag);
        assert!("mc1".parse::<ModelKind>().is_err());
        assert!(ModelKind::Borda.spec().is_none());
        assert_eq!(ModelKind::Robart.default_trees(), 50);
        assert_eq!(ModelKind::Arrobartx.default_trees(), 25);
    }

    #[test]
    fn dynamic_rows() {
        let r = |v: &[usize]| Ranking::from_order(v).unwrap();
        let cov = CovariateSet::with_pair(2, 1, 2, vec!["a".into()], vec![10.0, 11.0, 20.0, 21.0]).unwrap();
        let panel = RankingPanel::new(vec![vec![r(&[0, 1])], vec![r(&[1, 0])]], Some(cov)).unwrap();
        let layout = Layout {
            n_items: 2,
            n_rankers: 1,
            n_periods: 2,
            dynamic: true,
        };
        let spec = ModelKind::ArrobartLag.spec().unwrap();
        let spec = ModelSpec { exogenous: true, ..spec };
        let b = DesignBuilder::new(spec, LagInput::OwnScalarLag, &panel, layout);
        assert_eq!(b.n_cols(), 3);
        // slots: z0 = (0.1, 0.2), z1 = (1, 2), z2 = (3, 4)
        let latent = vec![0.1, 0.2, 1.0, 2.0, 3.0, 4.0];
        let d = b.build(&latent);
        assert_eq!(d.row(0), &[0.1, 10.0, 1.5]);
        assert_eq!(d.row(1), &[0.2, 20.0, 1.5]);
        assert_eq!(d.row(2), &[1.0, 11.0, 1.0]);
        assert_eq!(d.row(3), &[2.0, 21.0, 2.0]);
        assert_eq!(b.targets(&latent), vec![1.0, 2.0, 3.0, 4.0]);

        let full = DesignBuilder::new(spec, LagInput::FullVectorLag, &panel, layout);
        assert_eq!(full.build(&latent).row(3), &[2.0, 1.0, 2.0, 21.0, 2.0]);
    }
}
