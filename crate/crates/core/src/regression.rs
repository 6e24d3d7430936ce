//! Mean functions for the latent scores: a BART forest or a Bayesian linear
//! model, both updated under unit observation noise.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bart::{propose_tree_move, sample_leaf_values, BartPrior, CutpointSets, Forest, LeafPrior, MoveStats};
use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::rng::derive_rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorKind {
    Bart,
    Linear,
}

/// A posterior draw of the mean function.
#[derive(Clone, Debug, PartialEq)]
pub enum RegressorDraw {
    Forest(Forest),
    Linear { intercept: f64, beta: Vec<f64> },
}

impl RegressorDraw {
    pub fn n_covariates(&self) -> usize {
        match self {
            RegressorDraw::Forest(f) => f.n_covariates,
            RegressorDraw::Linear { beta, .. } => beta.len(),
        }
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            RegressorDraw::Forest(f) => f.predict(x),
            RegressorDraw::Linear { intercept, beta } => {
                intercept + beta.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
            }
        }
    }
}

/// Sum-of-trees regressor with cached per-tree fitted values.
#[derive(Clone, Debug)]
pub struct BartRegressor {
    pub prior: BartPrior,
    pub forest: Forest,
    tree_fits: Vec<Vec<f64>>,
    fit: Vec<f64>,
    pub stats: MoveStats,
}

impl BartRegressor {
    pub fn new(prior: BartPrior, n_covariates: usize) -> Self {
        let forest = Forest::constant(prior.n_trees, n_covariates, 0.0);
        BartRegressor {
            prior,
            forest,
            tree_fits: Vec::new(),
            fit: Vec::new(),
            stats: MoveStats::default(),
        }
    }

    pub fn from_forest(prior: BartPrior, forest: Forest) -> Self {
        BartRegressor {
            prior,
            forest,
            tree_fits: Vec::new(),
            fit: Vec::new(),
            stats: MoveStats::default(),
        }
    }

    /// Recomputes cached fits from scratch; must be called whenever the
    /// design changes.
    pub fn refresh(&mut self, design: &DesignMatrix) {
        let n = design.n_rows();
        self.tree_fits = self
            .forest
            .trees
            .iter()
            .map(|t| (0..n).map(|r| t.predict(design.row(r))).collect())
            .collect();
        self.fit = vec![0.0; n];
        for tf in &self.tree_fits {
            for (f, v) in self.fit.iter_mut().zip(tf) {
                *f += v;
            }
        }
    }

    pub fn fitted(&self) -> &[f64] {
        &self.fit
    }

    /// One backfitting pass over all trees.
    pub fn update<R: Rng + ?Sized>(&mut self, design: &DesignMatrix, targets: &[f64], rng: &mut R) -> Result<()> {
        if targets.len() != design.n_rows() {
            return Err(Error::Dimension(format!(
                "{} targets for {} design rows",
                targets.len(),
                design.n_rows()
            )));
        }
        self.refresh(design);
        let cutpoints = CutpointSets::from_design(design, self.prior.n_cutpoints);
        let (lo, hi) = targets
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &z| (a.min(z), b.max(z)));
        let leaf = LeafPrior {
            mean: self.prior.mu_mean,
            sd: self.prior.leaf_sd(lo, hi),
        };
        let mut residual = vec![0.0; targets.len()];
        for s in 0..self.forest.trees.len() {
            for r in 0..targets.len() {
                residual[r] = targets[r] - (self.fit[r] - self.tree_fits[s][r]);
            }
            let tree = &mut self.forest.trees[s];
            let outcome = propose_tree_move(tree, design, &residual, &cutpoints, &self.prior, leaf, rng)?;
            self.stats.record(&outcome);
            sample_leaf_values(tree, design, &residual, leaf, rng)?;
            for r in 0..targets.len() {
                let new = tree.predict(design.row(r));
                self.fit[r] += new - self.tree_fits[s][r];
                self.tree_fits[s][r] = new;
            }
        }
        // Re-sum so the cached fit depends only on the forest, not on the
        // order of incremental updates.
        self.fit.iter_mut().for_each(|f| *f = 0.0);
        for tf in &self.tree_fits {
            for (f, v) in self.fit.iter_mut().zip(tf) {
                *f += v;
            }
        }
        Ok(())
    }
}

/// Linear mean `intercept + x'beta` with prior `N(0, prior_var * I)` on all coefficients.
#[derive(Clone, Debug)]
pub struct LinearRegressor {
    pub prior_var: f64,
    pub intercept: f64,
    pub beta: Vec<f64>,
    fit: Vec<f64>,
}

impl LinearRegressor {
    pub fn new(n_covariates: usize, prior_var: f64) -> Self {
        LinearRegressor {
            prior_var,
            intercept: 0.0,
            beta: vec![0.0; n_covariates],
            fit: Vec::new(),
        }
    }

    pub fn refresh(&mut self, design: &DesignMatrix) {
        let draw = self.draw();
        self.fit = (0..design.n_rows()).map(|r| draw.predict(design.row(r))).collect();
    }

    pub fn fitted(&self) -> &[f64] {
        &self.fit
    }

    pub fn draw(&self) -> RegressorDraw {
        RegressorDraw::Linear {
            intercept: self.intercept,
            beta: self.beta.clone(),
        }
    }

    /// Conjugate draw of `(intercept, beta)` given unit-variance targets.
    pub fn update<R: Rng + ?Sized>(&mut self, design: &DesignMatrix, targets: &[f64], rng: &mut R) -> Result<()> {
        if targets.len() != design.n_rows() {
            return Err(Error::Dimension(format!(
                "{} targets for {} design rows",
                targets.len(),
                design.n_rows()
            )));
        }
        let p = design.n_cols() + 1;
        let mut xtx = DMatrix::<f64>::zeros(p, p);
        let mut xty = DVector::<f64>::zeros(p);
        let mut row = vec![1.0; p];
        for r in 0..design.n_rows() {
            row[1..].copy_from_slice(design.row(r));
            for a in 0..p {
                xty[a] += row[a] * targets[r];
                for b in 0..=a {
                    xtx[(a, b)] += row[a] * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                xtx[(b, a)] = xtx[(a, b)];
            }
            xtx[(a, a)] += 1.0 / self.prior_var;
        }
        let chol = xtx
            .cholesky()
            .ok_or_else(|| Error::Invariant("linear posterior precision is not positive definite".into()))?;
        let mean = chol.solve(&xty);
        let z = DVector::<f64>::from_fn(p, |_, _| rng.sample(StandardNormal));
        let l = chol.l();
        let noise = l
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::Invariant("singular Cholesky factor".into()))?;
        let coef = mean + noise;
        self.intercept = coef[0];
        self.beta = coef.iter().skip(1).copied().collect();
        self.refresh(design);
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub enum Regressor {
    Bart(BartRegressor),
    Linear(LinearRegressor),
}

/// Prior variance of every linear coefficient.
pub const LINEAR_PRIOR_VAR: f64 = 100.0;

impl Regressor {
    pub fn new(kind: RegressorKind, prior: &BartPrior, n_covariates: usize) -> Self {
        match kind {
            RegressorKind::Bart => Regressor::Bart(BartRegressor::new(prior.clone(), n_covariates)),
            RegressorKind::Linear => Regressor::Linear(LinearRegressor::new(n_covariates, LINEAR_PRIOR_VAR)),
        }
    }

    pub fn from_draw(draw: RegressorDraw, prior: &BartPrior) -> Self {
        match draw {
            RegressorDraw::Forest(f) => Regressor::Bart(BartRegressor::from_forest(prior.clone(), f)),
            RegressorDraw::Linear { intercept, beta } => Regressor::Linear(LinearRegressor {
                prior_var: LINEAR_PRIOR_VAR,
                intercept,
                beta,
                fit: Vec::new(),
            }),
        }
    }

    pub fn refresh(&mut self, design: &DesignMatrix) {
        match self {
            Regressor::Bart(b) => b.refresh(design),
            Regressor::Linear(l) => l.refresh(design),
        }
    }

    pub fn fitted(&self) -> &[f64] {
        match self {
            Regressor::Bart(b) => b.fitted(),
            Regressor::Linear(l) => l.fitted(),
        }
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Regressor::Bart(b) => b.forest.predict(x),
            Regressor::Linear(l) => l.intercept + l.beta.iter().zip(x).map(|(b, v)| b * v).sum::<f64>(),
        }
    }

    pub fn update<R: Rng + ?Sized>(&mut self, design: &DesignMatrix, targets: &[f64], rng: &mut R) -> Result<()> {
        match self {
            Regressor::Bart(b) => b.update(design, targets, rng),
            Regressor::Linear(l) => l.update(design, targets, rng),
        }
    }

    pub fn draw(&self) -> RegressorDraw {
        match self {
            Regressor::Bart(b) => RegressorDraw::Forest(b.forest.clone()),
            Regressor::Linear(l) => l.draw(),
        }
    }

    pub fn move_stats(&self) -> Option<MoveStats> {
        match self {
            Regressor::Bart(b) => Some(b.stats),
            Regressor::Linear(_) => None,
        }
    }
}

/// Posterior draws of a plain BART regression `y = f(x) + N(0, 1)`.
#[derive(Clone, Debug)]
pub struct BartFit {
    pub draws: Vec<Forest>,
    pub stats: MoveStats,
}

impl BartFit {
    pub fn posterior_mean(&self, x: &[f64]) -> f64 {
        self.draws.iter().map(|f| f.predict(x)).sum::<f64>() / self.draws.len() as f64
    }
}

/// Fits a sum-of-trees model to observed targets with unit noise.
pub fn fit_bart_regression(
    design: &DesignMatrix,
    y: &[f64],
    prior: &BartPrior,
    n_burnin: usize,
    n_draws: usize,
    seed: u64,
) -> Result<BartFit> {
    prior.validate()?;
    if n_draws == 0 {
        return Err(Error::Config("n_draws must be positive".into()));
    }
    let mut reg = BartRegressor::new(prior.clone(), design.n_cols());
    let mut draws = Vec::with_capacity(n_draws);
    for sweep in 0..n_burnin + n_draws {
        let mut rng = derive_rng(seed, &[sweep as u64, crate::rng::stream::REGRESSION]);
        reg.update(design, y, &mut rng)?;
        if sweep >= n_burnin {
            draws.push(reg.forest.clone());
        }
    }
    Ok(BartFit {
        draws,
        stats: reg.stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn linear_recovers_coefficients() {
        let mut rng = derive_rng(3, &[]);
        let rows: Vec<Vec<f64>> = (0..2000)
            .map(|_| vec![rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)])
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| 1.0 + 2.0 * r[0] - 0.5 * r[1] + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let d = DesignMatrix::from_rows(&rows);
        let mut reg = LinearRegressor::new(2, LINEAR_PRIOR_VAR);
        let mut sums = [0.0; 3];
        for _ in 0..200 {
            reg.update(&d, &y, &mut rng).unwrap();
            sums[0] += reg.intercept;
            sums[1] += reg.beta[0];
            sums[2] += reg.beta[1];
        }
        assert_relative_eq!(sums[0] / 200.0, 1.0, epsilon = 0.1);
        assert_relative_eq!(sums[1] / 200.0, 2.0, epsilon = 0.1);
        assert_relative_eq!(sums[2] / 200.0, -0.5, epsilon = 0.1);
    }

    #[test]
    fn linear_without_data_reverts_to_prior() {
        let d = DesignMatrix::new(0, 1, vec![]);
        let mut reg = LinearRegressor::new(1, LINEAR_PRIOR_VAR);
        let mut rng = derive_rng(8, &[]);
        let draws: Vec<f64> = (0..20_000)
            .map(|_| {
                reg.update(&d, &[], &mut rng).unwrap();
                reg.beta[0]
            })
            .collect();
        assert!(crate::stats::mean(&draws).abs() < 0.3);
        assert_relative_eq!(crate::stats::variance(&draws), 100.0, max_relative = 0.05);
    }

    #[test]
    fn bart_tracks_constant_targets() {
        let rows: Vec<Vec<f64>> = (0..2000).map(|i| vec![i as f64]).collect();
        let d = DesignMatrix::from_rows(&rows);
        let y = vec![3.0; 2000];
        let fit = fit_bart_regression(&d, &y, &BartPrior::with_trees(20), 200, 400, 1).unwrap();
        let m = fit.posterior_mean(&[500.0]);
        assert!((m - 3.0).abs() < 0.3, "posterior mean {m}");
    }

    #[test]
    fn cached_fit_matches_forest() {
        let mut rng = derive_rng(2, &[]);
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![(i as f64 / 6.0).sin(), i as f64]).collect();
        let d = DesignMatrix::from_rows(&rows);
        let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0]).collect();
        let mut reg = BartRegressor::new(BartPrior::with_trees(10), 2);
        for _ in 0..30 {
            reg.update(&d, &y, &mut rng).unwrap();
        }
        for r in 0..60 {
            assert_relative_eq!(reg.fitted()[r], reg.forest.predict(d.row(r)), epsilon = 1e-10);
        }
    }
}
