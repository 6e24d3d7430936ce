//! Exact filtering, predictive and smoothing distributions for small
//! instances of the autoregressive model with a fixed scalar-lag forest.
//!
//! The forest partitions the lag axis into cells; a tuple `k` assigns one
//! cell per item and fixes the mean vector `mu_k` of the next period. Box and
//! ordering masses of unit-variance Gaussians are computed by nested
//! Gauss-Legendre quadrature with a closed-form innermost level.

use crate::bart::{induced_partition, locate_cell, Forest, PartitionCell};
use crate::error::{Error, Result};
use crate::model::{FitConfig, LagInput};
use crate::quadrature::integrate;
use crate::rankings::RankingPanel;
use crate::stats::{normal_cdf, normal_pdf};

/// Largest number of items the filter accepts.
pub const MAX_FILTER_ITEMS: usize = 3;
/// Largest instance the smoother accepts.
pub const MAX_SMOOTH_ITEMS: usize = 2;
pub const MAX_SMOOTH_PERIODS: usize = 4;

/// Gaussian mass beyond this many standard deviations is ignored.
const TAIL: f64 = 10.0;

/// Predictive cell weights entering one period, normalized to sum to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    pub period: usize,
    pub cells: Vec<PartitionCell>,
    /// Cell index per item for each component.
    pub tuples: Vec<Vec<usize>>,
    pub q: Vec<f64>,
    /// `ln` of the factor removed from `q` by normalization, accumulated.
    pub log_scale: f64,
    /// Filtering mixture of this period.
    pub mixture: MixtureRepresentation,
}

impl FilterState {
    /// `ln p(tau_0, ..., tau_period)`.
    pub fn log_likelihood(&self) -> f64 {
        self.log_scale + self.mixture.total.ln()
    }
}

/// Density proportional to
/// `1(z in A) * sum_k c_k N(z | mu_k, I) * r(cell tuple of z)`.
///
/// Filtering mixtures have `r = 1`; predictive mixtures also drop the
/// ordering region.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureRepresentation {
    pub period: usize,
    /// Items in ascending latent order; `None` when unconstrained.
    pub order: Option<Vec<usize>>,
    pub means: Vec<Vec<f64>>,
    /// Unnormalized component coefficients `c_k`.
    pub coefficients: Vec<f64>,
    /// `n_k` or `m_k`: the mass of component `k` over the region, including `r`.
    pub normalizers: Vec<f64>,
    /// `c_k n_k / sum`, a probability vector.
    pub weights: Vec<f64>,
    /// `sum_k c_k n_k`.
    pub total: f64,
    pub cells: Vec<PartitionCell>,
    /// Backward function per cell tuple, smoothing only.
    pub backward: Option<Vec<f64>>,
}

impl MixtureRepresentation {
    pub fn n_items(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Unnormalized density at `z`.
    pub fn unnormalized_density(&self, z: &[f64]) -> f64 {
        if let Some(order) = &self.order {
            if order.windows(2).any(|w| z[w[0]] >= z[w[1]]) {
                return 0.0;
            }
        }
        let r = match &self.backward {
            Some(b) => b[tuple_index(&self.cells, z)],
            None => 1.0,
        };
        let s: f64 = self
            .means
            .iter()
            .zip(&self.coefficients)
            .map(|(mu, c)| c * mu.iter().zip(z).map(|(m, x)| normal_pdf(x - m)).product::<f64>())
            .sum();
        s * r
    }

    /// Normalized density at `z`, assembled from the mixture weights.
    pub fn density(&self, z: &[f64]) -> f64 {
        if let Some(order) = &self.order {
            if order.windows(2).any(|w| z[w[0]] >= z[w[1]]) {
                return 0.0;
            }
        }
        let r = match &self.backward {
            Some(b) => b[tuple_index(&self.cells, z)],
            None => 1.0,
        };
        let mut s = 0.0;
        for ((mu, w), n) in self.means.iter().zip(&self.weights).zip(&self.normalizers) {
            if *w > 0.0 {
                s += w / n * mu.iter().zip(z).map(|(m, x)| normal_pdf(x - m)).product::<f64>();
            }
        }
        s * r
    }

    /// Marginal density of one item's latent score.
    pub fn marginal_density(&self, item: usize, x: f64) -> f64 {
        let n = self.n_items();
        let k_cells = self.cells.len();
        let mut s = 0.0;
        for (mu, c) in self.means.iter().zip(&self.coefficients) {
            if *c == 0.0 {
                continue;
            }
            let base = c * normal_pdf(x - mu[item]);
            let Some(order) = &self.order else {
                s += base;
                continue;
            };
            let pos = order.iter().position(|&o| o == item).expect("item in order");
            match &self.backward {
                None => {
                    let lo = vec![f64::NEG_INFINITY; n];
                    let hi = vec![f64::INFINITY; n];
                    s += base * conditional_chain(mu, &lo, &hi, order, pos, x);
                }
                Some(b) => {
                    let cell_x = locate_cell(&self.cells, x);
                    let mut lo = vec![0.0; n];
                    let mut hi = vec![0.0; n];
                    for (t, &r) in b.iter().enumerate() {
                        let tuple = decode(t, n, k_cells);
                        if tuple[item] != cell_x || r == 0.0 {
                            continue;
                        }
                        for (i, &ci) in tuple.iter().enumerate() {
                            lo[i] = self.cells[ci].lower;
                            hi[i] = self.cells[ci].upper;
                        }
                        s += base * r * conditional_chain(mu, &lo, &hi, order, pos, x);
                    }
                }
            }
        }
        s / self.total
    }

    /// Marginal probabilities of the bins `[edges[b], edges[b + 1])`.
    pub fn bin_probabilities(&self, item: usize, edges: &[f64]) -> Vec<f64> {
        let breaks: Vec<f64> = self.cells.iter().map(|c| c.upper).filter(|u| u.is_finite()).collect();
        edges
            .windows(2)
            .map(|w| integrate(|x| self.marginal_density(item, x), w[0], w[1], &breaks))
            .collect()
    }
}

fn decode(mut index: usize, n: usize, k: usize) -> Vec<usize> {
    let mut t = vec![0; n];
    for slot in t.iter_mut() {
        *slot = index % k;
        index /= k;
    }
    t
}

fn tuple_index(cells: &[PartitionCell], z: &[f64]) -> usize {
    z.iter().rev().fold(0, |acc, &x| acc * cells.len() + locate_cell(cells, x))
}

/// Mass of `u_{o_1} < ... < u_{o_m} < x` with each `u_i` in its box, under
/// independent `N(mu_i, 1)`.
fn chain_below(mu: &[f64], lo: &[f64], hi: &[f64], order: &[usize], x: f64) -> f64 {
    let Some((&last, rest)) = order.split_last() else {
        return 1.0;
    };
    let a = lo[last].max(mu[last] - TAIL);
    let b = hi[last].min(x).min(mu[last] + TAIL);
    if !(b > a) {
        return 0.0;
    }
    if rest.is_empty() {
        return (normal_cdf(b - mu[last]) - normal_cdf(a - mu[last])).max(0.0);
    }
    let breaks: Vec<f64> = rest.iter().flat_map(|&i| [lo[i], hi[i]]).filter(|v| v.is_finite()).collect();
    integrate(|u| normal_pdf(u - mu[last]) * chain_below(mu, lo, hi, rest, u), a, b, &breaks)
}

/// Mass of `x < u_{o_1} < ... < u_{o_m}`, by reflection.
fn chain_above(mu: &[f64], lo: &[f64], hi: &[f64], order: &[usize], x: f64) -> f64 {
    let neg = |v: &[f64]| v.iter().map(|a| -a).collect::<Vec<_>>();
    let rev: Vec<usize> = order.iter().rev().copied().collect();
    chain_below(&neg(mu), &neg(hi), &neg(lo), &rev, -x)
}

/// Mass of the other items' chain given that `order[pos]` sits at `x`.
fn conditional_chain(mu: &[f64], lo: &[f64], hi: &[f64], order: &[usize], pos: usize, x: f64) -> f64 {
    let item = order[pos];
    if !(x > lo[item] && x <= hi[item]) {
        return 0.0;
    }
    chain_below(mu, lo, hi, &order[..pos], x) * chain_above(mu, lo, hi, &order[pos + 1..], x)
}

/// Mass of the ordering region intersected with a box.
pub fn ordered_box_mass(mu: &[f64], lo: &[f64], hi: &[f64], order: &[usize]) -> f64 {
    chain_below(mu, lo, hi, order, f64::INFINITY)
}

struct Problem {
    cells: Vec<PartitionCell>,
    n: usize,
    prior: Vec<f64>,
    orders: Vec<Vec<usize>>,
}

impl Problem {
    fn new(forest: &Forest, panel: &RankingPanel, config: &FitConfig, max_items: usize) -> Result<Self> {
        let n = panel.n_items();
        if n > max_items {
            return Err(Error::Unsupported(format!(
                "exact oracle supports at most {max_items} items, got {n}"
            )));
        }
        if panel.n_rankers() != 1 {
            return Err(Error::Unsupported("exact oracle needs a single ranker".into()));
        }
        if config.lag_input != LagInput::OwnScalarLag {
            return Err(Error::Unsupported("exact oracle needs the own scalar lag input".into()));
        }
        if panel.covariates.exogenous_dim() > 0 {
            return Err(Error::Unsupported("exact oracle takes no exogenous covariates".into()));
        }
        let cells = induced_partition(forest, 0)?;
        Ok(Problem {
            cells,
            n,
            prior: (0..n).map(|i| config.prior_mean(i)).collect(),
            orders: (0..panel.n_times()).map(|t| panel.ranking(0, t).order()).collect(),
        })
    }

    fn n_tuples(&self) -> usize {
        self.cells.len().pow(self.n as u32)
    }

    fn tuples(&self) -> Vec<Vec<usize>> {
        (0..self.n_tuples()).map(|t| decode(t, self.n, self.cells.len())).collect()
    }

    fn means(&self) -> Vec<Vec<f64>> {
        self.tuples()
            .iter()
            .map(|t| t.iter().map(|&c| self.cells[c].value).collect())
            .collect()
    }

    fn bounds(&self, tuple: &[usize]) -> (Vec<f64>, Vec<f64>) {
        (
            tuple.iter().map(|&c| self.cells[c].lower).collect(),
            tuple.iter().map(|&c| self.cells[c].upper).collect(),
        )
    }

    /// Initial-state cell probabilities.
    fn initial(&self) -> Vec<f64> {
        self.tuples()
            .iter()
            .map(|t| {
                t.iter()
                    .zip(&self.prior)
                    .map(|(&c, m)| {
                        let cell = self.cells[c];
                        (normal_cdf(cell.upper - m) - normal_cdf(cell.lower - m)).max(0.0)
                    })
                    .product()
            })
            .collect()
    }

    /// `trans[k][k']`: mass of `A_t` within cell tuple `k'` under `N(mu_k, I)`.
    fn transition(&self, period: usize) -> Vec<Vec<f64>> {
        let tuples = self.tuples();
        let boxes: Vec<_> = tuples.iter().map(|t| self.bounds(t)).collect();
        self.means()
            .iter()
            .map(|mu| {
                boxes
                    .iter()
                    .map(|(lo, hi)| ordered_box_mass(mu, lo, hi, &self.orders[period]))
                    .collect()
            })
            .collect()
    }

    fn mixture(&self, period: usize, coefficients: Vec<f64>, normalizers: Vec<f64>, backward: Option<Vec<f64>>) -> MixtureRepresentation {
        let total: f64 = coefficients.iter().zip(&normalizers).map(|(c, n)| c * n).sum();
        let weights = coefficients.iter().zip(&normalizers).map(|(c, n)| c * n / total).collect();
        MixtureRepresentation {
            period,
            order: Some(self.orders[period].clone()),
            means: self.means(),
            coefficients,
            normalizers,
            weights,
            total,
            cells: self.cells.clone(),
            backward,
        }
    }
}

fn normalize(v: &mut [f64]) -> Result<f64> {
    let s: f64 = v.iter().sum();
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Invariant("oracle weights vanished".into()));
    }
    v.iter_mut().for_each(|x| *x /= s);
    Ok(s.ln())
}

fn step(q: &[f64], trans: &[Vec<f64>]) -> Vec<f64> {
    let mut next = vec![0.0; q.len()];
    for (qk, row) in q.iter().zip(trans) {
        for (a, t) in next.iter_mut().zip(row) {
            *a += qk * t;
        }
    }
    next
}

fn filter_with(problem: &Problem, trans: &[Vec<Vec<f64>>]) -> Result<(Vec<FilterState>, Vec<f64>, f64)> {
    let mut q = problem.initial();
    let mut log_scale = normalize(&mut q)?;
    let mut out = Vec::with_capacity(trans.len());
    for (p, tr) in trans.iter().enumerate() {
        let n_k: Vec<f64> = tr.iter().map(|row| row.iter().sum()).collect();
        let mixture = problem.mixture(p, q.clone(), n_k, None);
        out.push(FilterState {
            period: p,
            cells: problem.cells.clone(),
            tuples: problem.tuples(),
            q: q.clone(),
            log_scale,
            mixture,
        });
        q = step(&q, tr);
        log_scale += normalize(&mut q)?;
    }
    Ok((out, q, log_scale))
}

/// Filtering distributions `p(z_t | tau_0..tau_t)` for every period.
pub fn exact_filter_oracle(forest: &Forest, panel: &RankingPanel, config: &FitConfig) -> Result<Vec<FilterState>> {
    let problem = Problem::new(forest, panel, config, MAX_FILTER_ITEMS)?;
    let trans: Vec<_> = (0..panel.n_times()).map(|p| problem.transition(p)).collect();
    Ok(filter_with(&problem, &trans)?.0)
}

/// Distribution of the latent scores one period past the panel.
pub fn predictive_mixture_oracle(
    forest: &Forest,
    panel: &RankingPanel,
    config: &FitConfig,
) -> Result<MixtureRepresentation> {
    let problem = Problem::new(forest, panel, config, MAX_FILTER_ITEMS)?;
    let trans: Vec<_> = (0..panel.n_times()).map(|p| problem.transition(p)).collect();
    let (_, q, _) = filter_with(&problem, &trans)?;
    let k = q.len();
    Ok(MixtureRepresentation {
        period: panel.n_times(),
        order: None,
        means: problem.means(),
        weights: q.clone(),
        coefficients: q,
        normalizers: vec![1.0; k],
        total: 1.0,
        cells: problem.cells.clone(),
        backward: None,
    })
}

/// Smoothing distributions `p(z_t | tau_0..tau_{T-1})` for every period.
pub fn exact_smoothing_oracle(
    forest: &Forest,
    panel: &RankingPanel,
    config: &FitConfig,
) -> Result<Vec<MixtureRepresentation>> {
    if panel.n_times() > MAX_SMOOTH_PERIODS {
        return Err(Error::Unsupported(format!(
            "exact smoother supports at most {MAX_SMOOTH_PERIODS} periods, got {}",
            panel.n_times()
        )));
    }
    let problem = Problem::new(forest, panel, config, MAX_SMOOTH_ITEMS)?;
    let t_n = panel.n_times();
    let trans: Vec<_> = (0..t_n).map(|p| problem.transition(p)).collect();
    let (filters, _, _) = filter_with(&problem, &trans)?;

    let mut out = Vec::with_capacity(t_n);
    let mut rho = vec![1.0; problem.n_tuples()];
    for p in (0..t_n).rev() {
        let m: Vec<f64> = trans[p]
            .iter()
            .map(|row| row.iter().zip(&rho).map(|(t, r)| t * r).sum())
            .collect();
        out.push(problem.mixture(p, filters[p].q.clone(), m, Some(rho.clone())));
        if p > 0 {
            rho = trans[p].iter().map(|row| row.iter().zip(&rho).map(|(t, r)| t * r).sum()).collect();
            let s = rho.iter().cloned().fold(0.0, f64::max);
            if s > 0.0 {
                rho.iter_mut().for_each(|r| *r /= s);
            }
        }
    }
    out.reverse();
    Ok(out)
}
