//! Synthetic panels for the static and dynamic simulation scenarios.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::model::Layout;
use crate::rankings::{rank_of_scores, CovariateSet, Ranking, RankingPanel};
use crate::rng::{derive_rng, stream, ChainRng};

/// Rows of i.i.d. `N(0, Sigma)` vectors with `Sigma[l][m] = rho^|l-m|`.
pub fn gen_correlated_covariates<R: Rng + ?Sized>(n_rows: usize, k: usize, rho: f64, rng: &mut R) -> Result<DesignMatrix> {
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidInput(format!("|rho| must be < 1, got {rho}")));
    }
    if k == 0 {
        return Err(Error::InvalidInput("at least one covariate is required".into()));
    }
    // AR(1) recursion; equivalent to multiplying by the Cholesky factor.
    let innov = (1.0 - rho * rho).sqrt();
    let mut data = Vec::with_capacity(n_rows * k);
    for _ in 0..n_rows {
        let mut prev: f64 = rng.sample(StandardNormal);
        data.push(prev);
        for _ in 1..k {
            let e: f64 = rng.sample(StandardNormal);
            prev = rho * prev + innov * e;
            data.push(prev);
        }
    }
    Ok(DesignMatrix::new(n_rows, k, data))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticScenarioSpec {
    pub scenario: u8,
    pub sigma: f64,
    pub n_items: usize,
    pub n_rankers: usize,
    pub seed: u64,
}

impl StaticScenarioSpec {
    pub fn new(scenario: u8, sigma: f64) -> Self {
        StaticScenarioSpec {
            scenario,
            sigma,
            n_items: 20,
            n_rankers: 10,
            seed: 0,
        }
    }

    /// `(K_x, rho)` of the scenario.
    pub fn design(&self) -> Result<(usize, f64)> {
        match self.scenario {
            1 => Ok((4, 0.0)),
            2 => Ok((3, 0.5)),
            3 => Ok((4, 0.5)),
            s => Err(Error::Config(format!("static scenario must be 1, 2 or 3, got {s}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.design()?;
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.n_items < 2 || self.n_rankers == 0 {
            return Err(Error::Config("need at least 2 items and 1 ranker".into()));
        }
        Ok(())
    }

    /// True mean score of an item with covariates `x`.
    pub fn gamma(&self, x: &[f64]) -> f64 {
        let sq: f64 = x.iter().map(|v| v * v).sum();
        match self.scenario {
            1 => 3.0 * x[0] + 2.0 * x[1] - x[2] - 0.5 * x[3],
            2 => 3.0 * x[0] + 2.0 * x[1] + x[2] + sq,
            _ => sq,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StaticScenario {
    pub panel: RankingPanel,
    /// True mean score of each item.
    pub gamma: Vec<f64>,
    /// Simulated scores, `[ranker][item]` flattened.
    pub latent: Vec<f64>,
}

pub fn gen_static_scenario(spec: &StaticScenarioSpec) -> Result<StaticScenario> {
    spec.validate()?;
    let (k, rho) = spec.design()?;
    let (n, m) = (spec.n_items, spec.n_rankers);
    let mut rng = derive_rng(spec.seed, &[stream::SIMULATION]);
    let x = gen_correlated_covariates(n, k, rho, &mut rng)?;
    let gamma: Vec<f64> = (0..n).map(|i| spec.gamma(x.row(i))).collect();
    let mut latent = Vec::with_capacity(n * m);
    let mut rankings = Vec::with_capacity(m);
    for _ in 0..m {
        let z: Vec<f64> = gamma
            .iter()
            .map(|g| g + spec.sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        rankings.push(rank_of_scores(&z)?);
        latent.extend(z);
    }
    let mut cov = CovariateSet::empty(n, m, 1);
    cov.item_dim = k;
    cov.item = (0..n).flat_map(|i| x.row(i).to_vec()).collect();
    let panel = RankingPanel::cross_section(rankings, Some(cov))?;
    Ok(StaticScenario { panel, gamma, latent })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicScenarioSpec {
    pub scenario: u8,
    pub sigma: f64,
    pub n_items: usize,
    pub n_rankers: usize,
    pub n_periods: usize,
    pub seed: u64,
}

impl DynamicScenarioSpec {
    pub fn new(scenario: u8, sigma: f64) -> Self {
        DynamicScenarioSpec {
            scenario,
            sigma,
            n_items: 20,
            n_rankers: 5,
            n_periods: 52,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.scenario) {
            return Err(Error::Config(format!(
                "dynamic scenario must be 1, 2 or 3, got {}",
                self.scenario
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.n_items < 2 || self.n_rankers == 0 || self.n_periods < 2 {
            return Err(Error::Config("need at least 2 items, 1 ranker and 2 periods".into()));
        }
        Ok(())
    }

    /// `(K_x, rho)` of the exogenous covariates; scenario 3 only.
    pub fn covariate_design(&self) -> Option<(usize, f64)> {
        (self.scenario == 3).then_some((3, 0.5))
    }

    /// Conditional mean of a score given its previous value and, for
    /// scenario 3, the first lagged covariate.
    pub fn gamma(&self, z_prev: f64, x_prev: f64) -> f64 {
        match self.scenario {
            1 => 0.1 * z_prev * z_prev,
            2 => 0.05 * z_prev + 0.1 * z_prev * z_prev,
            _ => 0.1 * z_prev * x_prev,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicScenario {
    pub panel: RankingPanel,
    /// Conditional means in design-row order `(ranker, period, item)`.
    pub gamma: Vec<f64>,
    /// Simulated scores including the initial state, laid out by `layout`.
    pub latent: Vec<f64>,
    pub layout: Layout,
}

/// Simulates latent autoregressive paths started from `z_0 ~ N(0, I)`.
///
/// For scenario 3 the covariates stored for period `t` are the ones entering
/// that period's mean, i.e. the draws indexed `t - 1`.
pub fn gen_dynamic_scenario(spec: &DynamicScenarioSpec) -> Result<DynamicScenario> {
    spec.validate()?;
    let (n, m, t_n) = (spec.n_items, spec.n_rankers, spec.n_periods);
    let layout = Layout {
        n_items: n,
        n_rankers: m,
        n_periods: t_n,
        dynamic: true,
    };
    let mut rng: ChainRng = derive_rng(spec.seed, &[stream::SIMULATION]);
    let mut cov = CovariateSet::empty(n, m, t_n);
    if let Some((k, rho)) = spec.covariate_design() {
        let x = gen_correlated_covariates(n * m * t_n, k, rho, &mut rng)?;
        cov.pair_dim = k;
        cov.pair_names = (1..=k).map(|c| format!("cov_x{c}")).collect();
        cov.pair = (0..n * m * t_n).flat_map(|r| x.row(r).to_vec()).collect();
    }
    let mut latent = vec![0.0; layout.n_latent()];
    let mut gamma = vec![0.0; layout.n_rows()];
    let mut rankings = vec![Vec::with_capacity(m); t_n];
    for j in 0..m {
        for i in 0..n {
            latent[layout.latent_index(j, 0, i)] = rng.sample(StandardNormal);
        }
        for p in 0..t_n {
            let mut z = vec![0.0; n];
            for i in 0..n {
                let prev = latent[layout.latent_index(j, p, i)];
                let x1 = if cov.pair_dim > 0 {
                    cov.pair[((i * m + j) * t_n + p) * cov.pair_dim]
                } else {
                    0.0
                };
                let g = spec.gamma(prev, x1);
                let v = g + spec.sigma * rng.sample::<f64, _>(StandardNormal);
                if !v.is_finite() || v.abs() > 1e12 {
                    return Err(Error::InvalidInput(format!(
                        "simulated scores diverged (ranker {j}, period {p}); reduce sigma"
                    )));
                }
                gamma[layout.row(j, p, i)] = g;
                z[i] = v;
                latent[layout.latent_index(j, p + 1, i)] = v;
            }
            rankings[p].push(rank_of_scores(&z)?);
        }
    }
    let panel = RankingPanel::new(rankings, Some(cov))?;
    Ok(DynamicScenario {
        panel,
        gamma,
        latent,
        layout,
    })
}

/// Writes `time,ranker,item,gamma,latent` rows using the panel's labels.
pub fn write_truth_csv(
    path: impl AsRef<Path>,
    panel: &RankingPanel,
    gamma_at: impl Fn(usize, usize, usize) -> f64,
    latent_at: impl Fn(usize, usize, usize) -> f64,
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "time,ranker,item,gamma,latent").map_err(|e| Error::io(path, e))?;
    for p in 0..panel.n_times() {
        for j in 0..panel.n_rankers() {
            for i in 0..panel.n_items() {
                writeln!(
                    w,
                    "{},{},{},{:?},{:?}",
                    panel.time_labels()[p],
                    panel.ranker_labels()[j],
                    panel.item_labels()[i],
                    gamma_at(j, p, i),
                    latent_at(j, p, i)
                )
                .map_err(|e| Error::io(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

impl StaticScenario {
    pub fn write_truth_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let n = self.panel.n_items();
        write_truth_csv(path, &self.panel, |_, _, i| self.gamma[i], |j, _, i| self.latent[j * n + i])
    }
}

impl DynamicScenario {
    pub fn write_truth_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let l = self.layout;
        write_truth_csv(
            path,
            &self.panel,
            |j, p, i| self.gamma[l.row(j, p, i)],
            |j, p, i| self.latent[l.latent_index(j, p + 1, i)],
        )
    }
}

/// Scenario name as used on the command line: `static1`..`static3`,
/// `dyn1`..`dyn3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ScenarioId {
    Static(u8),
    Dynamic(u8),
}

impl std::fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScenarioId::Static(k) => write!(f, "static{k}"),
            ScenarioId::Dynamic(k) => write!(f, "dyn{k}"),
        }
    }
}

impl std::str::FromStr for ScenarioId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (kind, num) = if let Some(k) = lower.strip_prefix("static") {
            (false, k)
        } else if let Some(k) = lower.strip_prefix("dynamic").or_else(|| lower.strip_prefix("dyn")) {
            (true, k)
        } else {
            return Err(Error::Config(format!("unknown scenario {s:?}")));
        };
        match num.parse::<u8>() {
            Ok(k @ 1..=3) if kind => Ok(ScenarioId::Dynamic(k)),
            Ok(k @ 1..=3) => Ok(ScenarioId::Static(k)),
            _ => Err(Error::Config(format!("unknown scenario {s:?}"))),
        }
    }
}

impl TryFrom<String> for ScenarioId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ScenarioId> for String {
    fn from(id: ScenarioId) -> String {
        id.to_string()
    }
}

/// One generated dataset of either kind.
#[derive(Clone, Debug, PartialEq)]
pub enum Simulated {
    Static(StaticScenario),
    Dynamic(DynamicScenario),
}

/// Size overrides left at `None` take the scenario defaults.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScenarioRequest {
    pub id: ScenarioId,
    pub sigma: f64,
    pub n_items: Option<usize>,
    pub n_rankers: Option<usize>,
    pub n_periods: Option<usize>,
    pub seed: u64,
}

impl ScenarioRequest {
    pub fn new(id: ScenarioId, sigma: f64, seed: u64) -> Self {
        ScenarioRequest {
            id,
            sigma,
            n_items: None,
            n_rankers: None,
            n_periods: None,
            seed,
        }
    }
}

pub fn simulate(req: &ScenarioRequest) -> Result<Simulated> {
    match req.id {
        ScenarioId::Static(k) => {
            let d = StaticScenarioSpec::new(k, req.sigma);
            if req.n_periods.is_some_and(|t| t != 1) {
                return Err(Error::Config("static scenarios have a single period".into()));
            }
            let spec = StaticScenarioSpec {
                n_items: req.n_items.unwrap_or(d.n_items),
                n_rankers: req.n_rankers.unwrap_or(d.n_rankers),
                seed: req.seed,
                ..d
            };
            Ok(Simulated::Static(gen_static_scenario(&spec)?))
        }
        ScenarioId::Dynamic(k) => {
            let d = DynamicScenarioSpec::new(k, req.sigma);
            let spec = DynamicScenarioSpec {
                n_items: req.n_items.unwrap_or(d.n_items),
                n_rankers: req.n_rankers.unwrap_or(d.n_rankers),
                n_periods: req.n_periods.unwrap_or(d.n_periods),
                seed: req.seed,
                ..d
            };
            Ok(Simulated::Dynamic(gen_dynamic_scenario(&spec)?))
        }
    }
}

impl Simulated {
    pub fn panel(&self) -> &RankingPanel {
        match self {
            Simulated::Static(s) => &s.panel,
            Simulated::Dynamic(d) => &d.panel,
        }
    }

    /// `rank(gamma)` for every `(ranker, period)`, indexed `[ranker * T + period]`.
    pub fn truth_rankings(&self) -> Result<Vec<Ranking>> {
        match self {
            Simulated::Static(s) => {
                let r = rank_of_scores(&s.gamma)?;
                Ok(vec![r; s.panel.n_rankers() * s.panel.n_times()])
            }
            Simulated::Dynamic(d) => {
                let l = d.layout;
                let mut out = Vec::with_capacity(l.n_rankers * l.n_periods);
                for j in 0..l.n_rankers {
                    for p in 0..l.n_periods {
                        let a = l.row(j, p, 0);
                        out.push(rank_of_scores(&d.gamma[a..a + l.n_items])?);
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn write_truth_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        match self {
            Simulated::Static(s) => s.write_truth_csv(path),
            Simulated::Dynamic(d) => d.write_truth_csv(path),
        }
    }
}
