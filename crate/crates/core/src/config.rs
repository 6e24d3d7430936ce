//! JSON experiment configuration shared by the command-line tools.
//!
//! Every section is optional and unknown keys are rejected. The schema in
//! `schema/experiment.schema.json` describes the same structure.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::StudySpec;
use crate::forecast::WindowSpec;
use crate::model::{FitConfig, LagInput, ModelKind};
use crate::simgen::{ScenarioId, ScenarioRequest};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub data: DataSettings,
    #[serde(default)]
    pub model: Option<ModelKind>,
    #[serde(default)]
    pub sampler: SamplerSettings,
    #[serde(default)]
    pub forecast: ForecastSettings,
    #[serde(default)]
    pub evaluation: EvaluationSettings,
}

/// Either a ranking CSV or a simulation scenario.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSettings {
    pub csv: Option<PathBuf>,
    pub scenario: Option<ScenarioId>,
    pub sigma: Option<f64>,
    pub seed: Option<u64>,
    pub n_items: Option<usize>,
    pub n_rankers: Option<usize>,
    pub n_periods: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSettings {
    pub n_burnin: Option<usize>,
    pub n_draws: Option<usize>,
    pub thin: Option<usize>,
    pub n_trees: Option<usize>,
    pub seed: Option<u64>,
    pub lag_input: Option<LagInput>,
    pub level_moves: Option<bool>,
    pub z_prior_mean: Option<Vec<f64>>,
    pub store_latent: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastSettings {
    /// Time label of the first forecast period.
    pub first_test: Option<String>,
    pub n_test: Option<usize>,
    pub samples_per_draw: Option<usize>,
    pub reuse_posterior: Option<bool>,
    pub reuse_sweeps: Option<usize>,
    pub per_ranker: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSettings {
    pub models: Option<Vec<ModelKind>>,
    pub benchmark: Option<String>,
    pub n_reps: Option<usize>,
}

/// Copies every `Some` field of `over` onto `base`.
macro_rules! overlay {
    ($base:expr, $over:expr, $($f:ident),+) => {
        $( if $over.$f.is_some() { $base.$f = $over.$f.clone(); } )+
    };
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Values set in `flags` win over values in `self`.
    pub fn merged(mut self, flags: &ExperimentConfig) -> Self {
        // a data source given on the command line replaces the file's
        if flags.data.csv.is_some() {
            self.data.scenario = None;
        }
        if flags.data.scenario.is_some() {
            self.data.csv = None;
        }
        overlay!(self.data, flags.data, csv, scenario, sigma, seed, n_items, n_rankers, n_periods);
        overlay!(self, flags, model);
        overlay!(
            self.sampler,
            flags.sampler,
            n_burnin,
            n_draws,
            thin,
            n_trees,
            seed,
            lag_input,
            level_moves,
            z_prior_mean,
            store_latent
        );
        overlay!(
            self.forecast,
            flags.forecast,
            first_test,
            n_test,
            samples_per_draw,
            reuse_posterior,
            reuse_sweeps,
            per_ranker
        );
        overlay!(self.evaluation, flags.evaluation, models, benchmark, n_reps);
        self
    }

    /// Checks value ranges that do not depend on the command.
    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        if d.csv.is_some() && d.scenario.is_some() {
            return Err(Error::Config("data: give either csv or scenario, not both".into()));
        }
        if let Some(s) = d.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("sigma must be positive, got {s}")));
            }
        }
        for (name, v) in [("n_items", d.n_items), ("n_rankers", d.n_rankers), ("n_periods", d.n_periods)] {
            if v == Some(0) {
                return Err(Error::Config(format!("data.{name} must be positive")));
            }
        }
        let s = &self.sampler;
        for (name, v) in [("n_draws", s.n_draws), ("thin", s.thin), ("n_trees", s.n_trees)] {
            if v == Some(0) {
                return Err(Error::Config(format!("sampler.{name} must be positive")));
            }
        }
        if self.forecast.n_test == Some(0) {
            return Err(Error::Config("forecast.n_test must be positive".into()));
        }
        if self.evaluation.n_reps == Some(0) {
            return Err(Error::Config("evaluation.n_reps must be positive".into()));
        }
        if self.evaluation.models.as_ref().is_some_and(|m| m.is_empty()) {
            return Err(Error::Config("evaluation.models is empty".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<ModelKind> {
        self.model.ok_or_else(|| Error::Config("no model given".into()))
    }

    pub fn fit_config(&self, model: ModelKind) -> Result<FitConfig> {
        let s = &self.sampler;
        let mut c = FitConfig::new(model);
        c.n_burnin = s.n_burnin.unwrap_or(c.n_burnin);
        c.n_draws = s.n_draws.unwrap_or(c.n_draws);
        c.thin = s.thin.unwrap_or(c.thin);
        c.prior.n_trees = s.n_trees.unwrap_or(c.prior.n_trees);
        c.seed = s.seed.unwrap_or(c.seed);
        c.lag_input = s.lag_input.unwrap_or(c.lag_input);
        c.level_moves = s.level_moves.unwrap_or(c.level_moves);
        c.store_latent = s.store_latent.unwrap_or(c.store_latent);
        if let Some(z) = &s.z_prior_mean {
            c.z_prior_mean = z.clone();
        }
        if model != ModelKind::Borda {
            c.validate()?;
        }
        Ok(c)
    }

    pub fn scenario_request(&self) -> Result<ScenarioRequest> {
        let d = &self.data;
        let id = d.scenario.ok_or_else(|| Error::Config("no scenario given".into()))?;
        let sigma = d.sigma.ok_or_else(|| Error::Config("no sigma given".into()))?;
        Ok(ScenarioRequest {
            n_items: d.n_items,
            n_rankers: d.n_rankers,
            n_periods: d.n_periods,
            ..ScenarioRequest::new(id, sigma, d.seed.unwrap_or(0))
        })
    }

    /// Forecast window, with the first test period resolved against `time_labels`.
    pub fn window(&self, time_labels: &[String]) -> Result<WindowSpec> {
        let f = &self.forecast;
        let label = f
            .first_test
            .as_ref()
            .ok_or_else(|| Error::Config("no first test period given".into()))?;
        let first_test = time_labels
            .iter()
            .position(|t| t == label)
            .ok_or_else(|| Error::InvalidInput(format!("missing holdout: time {label} not in the data")))?;
        let d = WindowSpec::new(first_test, time_labels.len() - first_test);
        Ok(WindowSpec {
            first_test,
            n_test: f.n_test.unwrap_or(d.n_test),
            samples_per_draw: f.samples_per_draw.unwrap_or(d.samples_per_draw),
            reuse_posterior: f.reuse_posterior.unwrap_or(d.reuse_posterior),
            reuse_sweeps: f.reuse_sweeps.unwrap_or(d.reuse_sweeps),
            per_ranker: f.per_ranker.unwrap_or(d.per_ranker),
        })
    }

    pub fn study(&self) -> Result<StudySpec> {
        let req = self.scenario_request()?;
        let e = &self.evaluation;
        let models = e
            .models
            .clone()
            .ok_or_else(|| Error::Config("no models given for the study".into()))?;
        let benchmark: ModelKind = match &e.benchmark {
            Some(b) => b.parse()?,
            None => *models.last().expect("validated non-empty"),
        };
        let d = StudySpec::new(req.id, req.sigma, models, benchmark);
        let s = &self.sampler;
        let spec = StudySpec {
            n_items: req.n_items,
            n_rankers: req.n_rankers,
            n_periods: req.n_periods,
            n_reps: e.n_reps.unwrap_or(d.n_reps),
            seed: s.seed.or(self.data.seed).unwrap_or(d.seed),
            n_burnin: s.n_burnin.unwrap_or(d.n_burnin),
            n_draws: s.n_draws.unwrap_or(d.n_draws),
            n_trees: s.n_trees,
            ..d
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"model": "robart", "colour": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"sampler": {"draws": 10}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"model": "nope"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"data": {"scenario": "static9"}}"#).is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let file = ExperimentConfig::from_json(
            r#"{"model": "robart", "sampler": {"n_burnin": 10, "n_draws": 20, "seed": 3}}"#,
        )
        .unwrap();
        let mut flags = ExperimentConfig::default();
        flags.sampler.n_draws = Some(99);
        flags.model = Some(ModelKind::Rolinear);
        let m = file.merged(&flags);
        assert_eq!(m.model, Some(ModelKind::Rolinear));
        let c = m.fit_config(m.model().unwrap()).unwrap();
        assert_eq!((c.n_burnin, c.n_draws, c.seed), (10, 99, 3));
    }

    #[test]
    fn nonpositive_sigma_is_a_config_error() {
        let c = ExperimentConfig::from_json(r#"{"data": {"scenario": "dyn1", "sigma": 0.0}}"#).unwrap();
        let e = c.validate().unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn window_resolves_time_labels() {
        let c = ExperimentConfig::from_json(r#"{"forecast": {"first_test": "12", "n_test": 5}}"#).unwrap();
        let labels: Vec<String> = (1..=16).map(|t| t.to_string()).collect();
        let w = c.window(&labels).unwrap();
        assert_eq!((w.first_test, w.n_test), (11, 5));
        assert!(c.window(&labels[..5]).is_err());
    }

    #[test]
    fn schema_lists_every_field() {
        let schema: serde_json::Value =
            serde_json::from_str(include_str!("../../../schema/experiment.schema.json")).unwrap();
        let full = ExperimentConfig { model: Some(ModelKind::Robart), ..Default::default() };
        let value = serde_json::to_value(&full).unwrap();
        let keys = |v: &serde_json::Value| {
            let mut k: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
            k.sort();
            k
        };
        let props = &schema["properties"];
        assert_eq!(keys(props), keys(&value));
        assert_eq!(schema["additionalProperties"], false);
        for section in ["data", "sampler", "forecast", "evaluation"] {
            assert_eq!(keys(&props[section]["properties"]), keys(&value[section]), "{section}");
            assert_eq!(props[section]["additionalProperties"], false);
        }
        let models: Vec<String> = props["model"]["enum"]
            .as_array()
            .unwrap()
            .iter()
            .filter_map(|v| v.as_str().map(str::to_string))
            .collect();
        let names: Vec<String> = ModelKind::ALL.iter().map(|m| m.name().to_string()).collect();
        assert_eq!(models, names);
    }
}
