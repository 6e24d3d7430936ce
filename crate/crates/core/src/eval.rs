//! Kendall tau evaluation of point rankings, and replicated simulation studies.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::borda_count;
use crate::chain::run_chain;
use crate::dynamic::fitted_rankings;
use crate::error::{Error, Result};
use crate::model::{FitConfig, ModelKind};
use crate::rankings::{kendall_tau, rank_of_scores, validate_ranking, Ranking, RankingPanel};
use crate::rng::{derive_seed, stream};
use crate::simgen::{simulate, ScenarioId, ScenarioRequest, Simulated};
use crate::static_model::posterior_rank_estimate;

/// Rankings keyed by `(time, ranker)` labels over a shared item list.
#[derive(Clone, Debug, PartialEq)]
pub struct RankingTable {
    pub items: Vec<String>,
    /// Keys in first-appearance order.
    pub keys: Vec<(String, String)>,
    pub rankings: HashMap<(String, String), Ranking>,
}

impl RankingTable {
    pub fn from_panel(panel: &RankingPanel) -> Self {
        let mut keys = Vec::new();
        let mut rankings = HashMap::new();
        for t in 0..panel.n_times() {
            for j in 0..panel.n_rankers() {
                let key = (panel.time_labels()[t].clone(), panel.ranker_labels()[j].clone());
                keys.push(key.clone());
                rankings.insert(key, panel.ranking(j, t).clone());
            }
        }
        RankingTable {
            items: panel.item_labels().to_vec(),
            keys,
            rankings,
        }
    }

    /// Reads `time,ranker,item,<value>` rows. With `by_score` the value is a
    /// score whose ascending order gives the ranking; otherwise it is a rank.
    pub fn read_csv<R: Read>(reader: R, value_column: &str, by_score: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Validation(format!("line 1: missing column `{name}`")))
        };
        let (ct, cr, ci, cv) = (col("time")?, col("ranker")?, col("item")?, col(value_column)?);
        let mut items: Vec<String> = Vec::new();
        let mut item_index: HashMap<String, usize> = HashMap::new();
        let mut keys = Vec::new();
        let mut values: HashMap<(String, String), Vec<(usize, f64)>> = HashMap::new();
        for (n, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = n + 2;
            let field = |c: usize| rec.get(c).unwrap_or("").to_string();
            let item = field(ci);
            let idx = *item_index.entry(item.clone()).or_insert_with(|| {
                items.push(item.clone());
                items.len() - 1
            });
            let v: f64 = field(cv)
                .parse()
                .map_err(|_| Error::Validation(format!("line {line}: bad {value_column} value {:?}", field(cv))))?;
            let key = (field(ct), field(cr));
            let entry = values.entry(key.clone()).or_insert_with(|| {
                keys.push(key.clone());
                Vec::new()
            });
            if entry.iter().any(|(i, _)| *i == idx) {
                return Err(Error::Validation(format!(
                    "line {line}: item {item} listed twice for time {} ranker {}",
                    key.0, key.1
                )));
            }
            entry.push((idx, v));
        }
        let n_items = items.len();
        let mut rankings = HashMap::new();
        for key in &keys {
            let entries = &values[key];
            if entries.len() != n_items {
                return Err(Error::Validation(format!(
                    "time {} ranker {}: {} of {n_items} items present",
                    key.0,
                    key.1,
                    entries.len()
                )));
            }
            let mut v = vec![0.0; n_items];
            for &(i, x) in entries {
                v[i] = x;
            }
            let r = if by_score {
                rank_of_scores(&v)?
            } else {
                let raw: Vec<i64> = v.iter().map(|&x| x as i64).collect();
                if v.iter().any(|x| x.fract() != 0.0) {
                    return Err(Error::Validation(format!("time {} ranker {}: non-integer rank", key.0, key.1)));
                }
                validate_ranking(&raw).map_err(|e| Error::Validation(format!("time {} ranker {}: {e}", key.0, key.1)))?
            };
            rankings.insert(key.clone(), r);
        }
        Ok(RankingTable { items, keys, rankings })
    }

    /// Reads either a ranking panel CSV (`rank` column), a point forecast
    /// (`point_rank`) or a simulation truth sidecar (`gamma`, ranked ascending).
    pub fn read_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let header = text.lines().next().unwrap_or("");
        let has = |c: &str| header.split(',').any(|h| h.trim() == c);
        let table = if has("gamma") {
            Self::read_csv(text.as_bytes(), "gamma", true)
        } else if has("point_rank") {
            Self::read_csv(text.as_bytes(), "point_rank", false)
        } else {
            Self::read_csv(text.as_bytes(), "rank", false)
        };
        table.map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
    }

    /// Re-expresses this table's rankings over `items` order.
    fn aligned(&self, key: &(String, String), items: &[String]) -> Result<Ranking> {
        let r = &self.rankings[key];
        if items.len() != self.items.len() {
            return Err(Error::Dimension(format!(
                "{} items against {}",
                self.items.len(),
                items.len()
            )));
        }
        let pos: HashMap<&str, usize> = self.items.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let ranks = items
            .iter()
            .map(|it| {
                pos.get(it.as_str())
                    .map(|&i| r.rank(i) as i64)
                    .ok_or_else(|| Error::Dimension(format!("item {it} missing")))
            })
            .collect::<Result<Vec<_>>>()?;
        validate_ranking(&ranks)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TauRow {
    pub model: String,
    pub time: String,
    pub ranker: String,
    pub tau: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub model: String,
    /// Time label, or `all` for the average over every pair.
    pub time: String,
    pub mean_tau: f64,
    /// `mean_tau / mean_tau(benchmark)` at the same time.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub taus: Vec<TauRow>,
    pub summary: Vec<SummaryRow>,
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        a / b
    }
}

/// Scores every model's rankings against `truth` on the `(time, ranker)`
/// pairs the model provides.
pub fn evaluate(models: &[(String, RankingTable)], truth: &RankingTable, benchmark: &str) -> Result<EvalReport> {
    if !models.iter().any(|(m, _)| m == benchmark) {
        return Err(Error::Config(format!("benchmark {benchmark} is not among the evaluated models")));
    }
    let mut taus = Vec::new();
    let mut per_time: Vec<(String, Vec<(String, f64, usize)>)> = Vec::new();
    for (name, table) in models {
        let mut times: Vec<(String, f64, usize)> = Vec::new();
        for key in &table.keys {
            let t = truth.rankings.get(key).ok_or_else(|| {
                Error::Dimension(format!("model {name}: no truth for time {} ranker {}", key.0, key.1))
            })?;
            let est = table.aligned(key, &truth.items)?;
            let tau = kendall_tau(&est, t)?;
            taus.push(TauRow {
                model: name.clone(),
                time: key.0.clone(),
                ranker: key.1.clone(),
                tau,
            });
            match times.iter_mut().find(|(tl, _, _)| *tl == key.0) {
                Some(e) => {
                    e.1 += tau;
                    e.2 += 1;
                }
                None => times.push((key.0.clone(), tau, 1)),
            }
        }
        per_time.push((name.clone(), times));
    }
    let mean_of = |name: &str, time: Option<&str>| -> Option<f64> {
        let rows: Vec<f64> = taus
            .iter()
            .filter(|r| r.model == name && time.is_none_or(|t| r.time == t))
            .map(|r| r.tau)
            .collect();
        (!rows.is_empty()).then(|| rows.iter().sum::<f64>() / rows.len() as f64)
    };
    let mut summary = Vec::new();
    for (name, times) in &per_time {
        for (time, sum, count) in times {
            let mean = sum / *count as f64;
            let bench = mean_of(benchmark, Some(time)).unwrap_or(f64::NAN);
            summary.push(SummaryRow {
                model: name.clone(),
                time: time.clone(),
                mean_tau: mean,
                ratio: ratio(mean, bench),
            });
        }
        let all = mean_of(name, None).unwrap_or(f64::NAN);
        summary.push(SummaryRow {
            model: name.clone(),
            time: "all".into(),
            mean_tau: all,
            ratio: ratio(all, mean_of(benchmark, None).unwrap_or(f64::NAN)),
        });
    }
    Ok(EvalReport { taus, summary })
}

pub fn write_rows<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv>", e))
}

/// Settings of a replicated simulation study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub scenario: ScenarioId,
    pub sigma: f64,
    #[serde(default)]
    pub n_items: Option<usize>,
    #[serde(default)]
    pub n_rankers: Option<usize>,
    #[serde(default)]
    pub n_periods: Option<usize>,
    pub n_reps: usize,
    pub seed: u64,
    pub models: Vec<ModelKind>,
    pub benchmark: ModelKind,
    pub n_burnin: usize,
    pub n_draws: usize,
    /// Overrides the per-model default number of trees.
    #[serde(default)]
    pub n_trees: Option<usize>,
}

impl StudySpec {
    pub fn new(scenario: ScenarioId, sigma: f64, models: Vec<ModelKind>, benchmark: ModelKind) -> Self {
        StudySpec {
            scenario,
            sigma,
            n_items: None,
            n_rankers: None,
            n_periods: None,
            n_reps: 10,
            seed: 0,
            models,
            benchmark,
            n_burnin: 1000,
            n_draws: 1000,
            n_trees: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_reps == 0 {
            return Err(Error::Config("n_reps must be positive".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !self.models.contains(&self.benchmark) {
            return Err(Error::Config(format!("benchmark {} is not among the models", self.benchmark)));
        }
        let dynamic = matches!(self.scenario, ScenarioId::Dynamic(_));
        for m in &self.models {
            if let Some(spec) = m.spec() {
                if spec.dynamic != dynamic {
                    return Err(Error::Config(format!("model {m} does not fit scenario {}", self.scenario)));
                }
            }
        }
        Ok(())
    }

    fn fit_config(&self, model: ModelKind, seed: u64) -> FitConfig {
        let mut cfg = FitConfig::new(model).with_iterations(self.n_burnin, self.n_draws).with_seed(seed);
        if let Some(s) = self.n_trees {
            cfg = cfg.with_trees(s);
        }
        cfg.store_latent = false;
        cfg
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyRow {
    pub replication: usize,
    pub model: ModelKind,
    pub tau: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudySummary {
    pub model: ModelKind,
    pub mean_tau: f64,
    pub std_error: f64,
    /// `mean_tau / mean_tau(benchmark)`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
    pub summary: Vec<StudySummary>,
}

impl StudyReport {
    pub fn mean_tau(&self, model: ModelKind) -> Option<f64> {
        self.summary.iter().find(|s| s.model == model).map(|s| s.mean_tau)
    }
}

/// Mean Kendall tau of `model` on one dataset: the posterior rank estimate for
/// static data, in-sample fitted rankings per `(ranker, period)` for dynamic data.
pub fn score_model(data: &Simulated, model: ModelKind, config: &FitConfig) -> Result<f64> {
    let truth = data.truth_rankings()?;
    let panel = data.panel();
    let (m, t_n) = (panel.n_rankers(), panel.n_times());
    let estimates: Vec<Ranking> = match (model, data) {
        (ModelKind::Borda, _) => {
            let mut out = vec![Ranking::identity(panel.n_items()); m * t_n];
            for p in 0..t_n {
                let b = borda_count(panel.period(p))?;
                for j in 0..m {
                    out[j * t_n + p] = b.clone();
                }
            }
            out
        }
        (_, Simulated::Static(_)) => {
            let a = run_chain(panel, config)?;
            vec![posterior_rank_estimate(&a)?; m * t_n]
        }
        (_, Simulated::Dynamic(_)) => fitted_rankings(&run_chain(panel, config)?)?,
    };
    let mut s = 0.0;
    for (e, t) in estimates.iter().zip(&truth) {
        s += kendall_tau(e, t)?;
    }
    Ok(s / truth.len() as f64)
}

/// Runs every model on `n_reps` generated datasets. Replications run in
/// parallel; data and fit seeds derive from `(seed, replication, model)`.
pub fn simulation_study(spec: &StudySpec) -> Result<StudyReport> {
    spec.validate()?;
    let per_rep: Vec<Vec<StudyRow>> = (0..spec.n_reps)
        .into_par_iter()
        .map(|rep| {
            let data_seed = derive_seed(spec.seed, &[stream::STUDY, rep as u64]);
            let req = ScenarioRequest {
                n_items: spec.n_items,
                n_rankers: spec.n_rankers,
                n_periods: spec.n_periods,
                ..ScenarioRequest::new(spec.scenario, spec.sigma, data_seed)
            };
            let data = simulate(&req)?;
            spec.models
                .iter()
                .enumerate()
                .map(|(k, &model)| {
                    let fit_seed = derive_seed(spec.seed, &[stream::STUDY, rep as u64, k as u64 + 1]);
                    let tau = score_model(&data, model, &spec.fit_config(model, fit_seed))?;
                    log::info!("replication {rep} {model}: tau {tau:.4}");
                    Ok(StudyRow {
                        replication: rep,
                        model,
                        tau,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<StudyRow> = per_rep.into_iter().flatten().collect();
    let stats = |m: ModelKind| {
        let v: Vec<f64> = rows.iter().filter(|r| r.model == m).map(|r| r.tau).collect();
        let mean = crate::stats::mean(&v);
        let se = if v.len() > 1 {
            (crate::stats::variance(&v) / v.len() as f64).sqrt()
        } else {
            0.0
        };
        (mean, se)
    };
    let bench = stats(spec.benchmark).0;
    let summary = spec
        .models
        .iter()
        .map(|&m| {
            let (mean_tau, std_error) = stats(m);
            StudySummary {
                model: m,
                mean_tau,
                std_error,
                ratio: ratio(mean_tau, bench),
            }
        })
        .collect();
    Ok(StudyReport { rows, summary })
}
