//! Command-line front end: `simulate`, `fit`, `forecast` and `evaluate`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::archive::{read_archive, write_archive};
use crate::chain::{resume_chain, PosteriorArchive};
use crate::config::ExperimentConfig;
use crate::dynamic::forecast_one_step;
use crate::error::{Error, Result};
use crate::eval::{evaluate, simulation_study, write_rows, RankingTable};
use crate::forecast::{expanding_window, fit_panel, write_forecasts, PeriodForecast};
use crate::model::{LagInput, ModelKind};
use crate::rankings::RankingPanel;
use crate::rng::{derive_seed, stream};
use crate::simgen::{simulate, ScenarioId, Simulated};

#[derive(Debug, Parser)]
#[command(name = "rankdyn", version, about = "Nonparametric Thurstone models for rank-order data")]
pub struct Cli {
    /// JSON experiment configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// More log output (-v debug, -vv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a simulation scenario as a ranking CSV plus a truth sidecar.
    Simulate(SimulateArgs),
    /// Run the MCMC sampler and write a posterior archive.
    Fit(FitArgs),
    /// Expanding-window or one-step forecasts.
    Forecast(ForecastArgs),
    /// Kendall tau of forecasts against truth, or a replicated simulation study.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args, Default)]
pub struct ScenarioArgs {
    /// static1..static3 or dyn1..dyn3.
    #[arg(long)]
    pub scenario: Option<ScenarioId>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    #[arg(long = "data-seed")]
    pub data_seed: Option<u64>,
    #[arg(long)]
    pub n_items: Option<usize>,
    #[arg(long)]
    pub n_rankers: Option<usize>,
    #[arg(long)]
    pub n_periods: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct SamplerArgs {
    #[arg(long)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// own_scalar_lag or full_vector_lag.
    #[arg(long, value_parser = parse_lag_input)]
    pub lag_input: Option<LagInput>,
    /// Disable the per-period shift and scale moves of dynamic chains.
    #[arg(long)]
    pub no_level_moves: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Same as --data-seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Ranking CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Fit every ranker separately (archives under `ranker_<k>/`).
    #[arg(long)]
    pub per_ranker: bool,
    /// Continue the chain stored in `--out` up to `--draws` kept draws.
    #[arg(long)]
    pub resume: bool,
    /// Archive directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    /// Ranking CSV including the holdout periods.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Forecast the period after a fitted archive instead of refitting.
    #[arg(long)]
    pub archive: Option<PathBuf>,
    /// Time label of the first forecast period.
    #[arg(long)]
    pub first_test: Option<String>,
    /// Number of forecast periods; defaults to every period from --first-test on.
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub samples_per_draw: Option<usize>,
    /// Approximate: fit once and extend the latent paths instead of refitting.
    #[arg(long)]
    pub reuse_posterior: bool,
    #[arg(long)]
    pub per_ranker: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Truth rankings: a ranking CSV or a simulation truth sidecar.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Point forecasts as NAME=POINTS_CSV; repeatable.
    #[arg(long = "forecast", value_parser = parse_named_path)]
    pub forecasts: Vec<(String, PathBuf)>,
    /// Model name whose mean tau divides the ratio column.
    #[arg(long)]
    pub benchmark: Option<String>,
    /// Study mode: comma-separated models to compare on simulated data.
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<ModelKind>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_lag_input(s: &str) -> std::result::Result<LagInput, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown lag input {s:?}"))
}

fn parse_named_path(s: &str) -> std::result::Result<(String, PathBuf), String> {
    let (name, path) = s.split_once('=').ok_or_else(|| format!("expected NAME=PATH, got {s:?}"))?;
    if name.is_empty() || path.is_empty() {
        return Err(format!("expected NAME=PATH, got {s:?}"));
    }
    Ok((name.to_string(), PathBuf::from(path)))
}

impl ScenarioArgs {
    fn apply(&self, c: &mut ExperimentConfig) {
        let d = &mut c.data;
        d.scenario = self.scenario.or(d.scenario);
        d.sigma = self.sigma.or(d.sigma);
        d.seed = self.data_seed.or(d.seed);
        d.n_items = self.n_items.or(d.n_items);
        d.n_rankers = self.n_rankers.or(d.n_rankers);
        d.n_periods = self.n_periods.or(d.n_periods);
    }
}

impl SamplerArgs {
    fn apply(&self, c: &mut ExperimentConfig) {
        c.model = self.model.or(c.model);
        let s = &mut c.sampler;
        s.n_burnin = self.burnin.or(s.n_burnin);
        s.n_draws = self.draws.or(s.n_draws);
        s.thin = self.thin.or(s.thin);
        s.n_trees = self.trees.or(s.n_trees);
        s.seed = self.seed.or(s.seed);
        s.lag_input = self.lag_input.or(s.lag_input);
        if self.no_level_moves {
            s.level_moves = Some(false);
        }
    }
}

fn flag_config(command: &Command) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    match command {
        Command::Simulate(a) => {
            a.scenario.apply(&mut c);
            c.data.seed = a.scenario.data_seed.or(a.seed);
        }
        Command::Fit(a) => {
            c.data.csv = a.data.clone();
            a.sampler.apply(&mut c);
            if a.per_ranker {
                c.forecast.per_ranker = Some(true);
            }
        }
        Command::Forecast(a) => {
            c.data.csv = a.data.clone();
            a.sampler.apply(&mut c);
            let f = &mut c.forecast;
            f.first_test = a.first_test.clone();
            f.n_test = a.n_test;
            f.samples_per_draw = a.samples_per_draw;
            if a.reuse_posterior {
                f.reuse_posterior = Some(true);
            }
            if a.per_ranker {
                f.per_ranker = Some(true);
            }
        }
        Command::Evaluate(a) => {
            a.scenario.apply(&mut c);
            a.sampler.apply(&mut c);
            let e = &mut c.evaluation;
            if !a.models.is_empty() {
                e.models = Some(a.models.clone());
            }
            e.benchmark = a.benchmark.clone();
            e.n_reps = a.reps;
        }
    }
    c
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn read_panel(config: &ExperimentConfig) -> Result<RankingPanel> {
    let path = config
        .data
        .csv
        .as_ref()
        .ok_or_else(|| Error::Config("no ranking CSV given (--data)".into()))?;
    RankingPanel::read_csv_path(path)
}

fn cmd_simulate(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let req = config.scenario_request()?;
    let data = simulate(&req)?;
    create_dir(out)?;
    data.panel().write_csv_path(out.join("rankings.csv"))?;
    data.write_truth_csv(out.join(format!("truth_{}.csv", req.id)))?;
    let p = data.panel();
    let kind = match data {
        Simulated::Static(_) => "static",
        Simulated::Dynamic(_) => "dynamic",
    };
    println!(
        "scenario {} ({kind}) sigma {} seed {}: N={} M={} T={} covariates={}",
        req.id,
        req.sigma,
        req.seed,
        p.n_items(),
        p.n_rankers(),
        p.n_times(),
        p.covariates.exogenous_dim()
    );
    Ok(())
}

fn ranker_dir(out: &Path, j: usize) -> PathBuf {
    out.join(format!("ranker_{j}"))
}

fn cmd_fit(config: &ExperimentConfig, out: &Path, resume: bool) -> Result<()> {
    let model = config.model()?;
    if model == ModelKind::Borda {
        return Err(Error::Config("borda has no posterior to fit; use forecast or evaluate".into()));
    }
    let panel = read_panel(config)?;
    let fit = config.fit_config(model)?;
    let per_ranker = config.forecast.per_ranker.unwrap_or(false);
    let dirs: Vec<PathBuf> = if per_ranker {
        (0..panel.n_rankers()).map(|j| ranker_dir(out, j)).collect()
    } else {
        vec![out.to_path_buf()]
    };
    let archives: Vec<PosteriorArchive> = if resume {
        dirs.iter()
            .enumerate()
            .map(|(j, dir)| {
                let archive = read_archive(dir)?;
                let sub = if per_ranker { panel.select_rankers(&[j])? } else { panel.clone() };
                info!("resuming {} from {} to {} draws", dir.display(), archive.n_kept(), fit.n_draws);
                resume_chain(&sub, archive, fit.n_draws)
            })
            .collect::<Result<_>>()?
    } else {
        fit_panel(&panel, &fit, per_ranker)?
    };
    for (a, dir) in archives.iter().zip(&dirs) {
        write_archive(a, dir)?;
    }
    println!(
        "{model}: {} kept draws, {} sweeps, written to {}",
        archives[0].n_kept(),
        archives[0].sweeps_completed,
        out.display()
    );
    Ok(())
}

fn cmd_forecast(config: &ExperimentConfig, archive_dir: Option<&Path>, out: &Path) -> Result<()> {
    let panel = read_panel(config)?;
    let forecasts = if let Some(dir) = archive_dir {
        let archive = read_archive(dir)?;
        let samples = config.forecast.samples_per_draw.unwrap_or(10);
        let t = archive.layout.n_periods;
        let seed = derive_seed(archive.config.seed, &[stream::FORECAST, t as u64]);
        vec![PeriodForecast {
            time: t,
            forecast: forecast_one_step(&archive, &panel, samples, seed)?,
        }]
    } else {
        let model = config.model()?;
        let window = config.window(panel.time_labels())?;
        if window.reuse_posterior {
            log::warn!("--reuse-posterior is approximate: regression draws are not refit on new periods");
        }
        expanding_window(&panel, &config.fit_config(model)?, &window)?
    };
    write_forecasts(out, &panel, &forecasts)?;
    println!("{} forecast period(s) written to {}", forecasts.len(), out.display());
    Ok(())
}

fn cmd_evaluate(config: &ExperimentConfig, args: &EvaluateArgs) -> Result<()> {
    create_dir(&args.out)?;
    let mut stdout = std::io::stdout().lock();
    let fail = |e: std::io::Error| Error::io("<stdout>", e);
    if let Some(truth_path) = &args.truth {
        if args.forecasts.is_empty() {
            return Err(Error::Config("no --forecast NAME=PATH given".into()));
        }
        let truth = RankingTable::read_path(truth_path)?;
        let models = args
            .forecasts
            .iter()
            .map(|(n, p)| Ok((n.clone(), RankingTable::read_path(p)?)))
            .collect::<Result<Vec<_>>>()?;
        let benchmark = config.evaluation.benchmark.clone().unwrap_or_else(|| models[0].0.clone());
        let report = evaluate(&models, &truth, &benchmark)?;
        write_csv_file(&args.out.join("taus.csv"), &report.taus)?;
        write_csv_file(&args.out.join("summary.csv"), &report.summary)?;
        writeln!(stdout, "model,time,mean_tau,ratio").map_err(fail)?;
        for r in report.summary.iter().filter(|r| r.time == "all") {
            writeln!(stdout, "{},{},{:.4},{:.4}", r.model, r.time, r.mean_tau, r.ratio).map_err(fail)?;
        }
        return Ok(());
    }
    let spec = config.study()?;
    let report = simulation_study(&spec)?;
    write_csv_file(&args.out.join("study_taus.csv"), &report.rows)?;
    write_csv_file(&args.out.join("study_summary.csv"), &report.summary)?;
    writeln!(stdout, "model,mean_tau,std_error,ratio").map_err(fail)?;
    for s in &report.summary {
        writeln!(stdout, "{},{:.4},{:.4},{:.4}", s.model, s.mean_tau, s.std_error, s.ratio).map_err(fail)?;
    }
    Ok(())
}

fn write_csv_file<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_rows(std::io::BufWriter::new(f), rows)
}

/// Worker count from `RANKDYN_THREADS`, if set.
pub fn thread_limit() -> Result<Option<usize>> {
    match std::env::var("RANKDYN_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("RANKDYN_THREADS must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => ExperimentConfig::read(p)?,
        None => ExperimentConfig::default(),
    };
    let config = file.merged(&flag_config(&cli.command));
    config.validate()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_limit()? {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Invariant(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => cmd_simulate(&config, &a.out),
        Command::Fit(a) => cmd_fit(&config, &a.out, a.resume),
        Command::Forecast(a) => cmd_forecast(&config, a.archive.as_deref(), &a.out),
        Command::Evaluate(a) => cmd_evaluate(&config, a),
    })
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => log::LevelFilter::Warn,
        (false, 0) => log::LevelFilter::Info,
        (false, 1) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_logging(cli.verbose, cli.quiet);
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_paths_parse() {
        assert_eq!(parse_named_path("a=b.csv").unwrap(), ("a".into(), PathBuf::from("b.csv")));
        assert!(parse_named_path("nope").is_err());
        assert!(parse_named_path("=x").is_err());
    }

    #[test]
    fn lag_input_parses() {
        assert_eq!(parse_lag_input("full_vector_lag").unwrap(), LagInput::FullVectorLag);
        assert!(parse_lag_input("other").is_err());
    }

    #[test]
    fn bad_flags_exit_with_two() {
        assert_eq!(main_with_args(["rankdyn", "simulate", "--bogus"]), 2);
        assert_eq!(main_with_args(["rankdyn", "fit", "--model", "nope", "--out", "x"]), 2);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"data": {"scenario": "static1", "sigma": 1.0, "seed": 4}}"#).unwrap();
        let cli = Cli::try_parse_from([
            "rankdyn",
            "--config",
            cfg.to_str().unwrap(),
            "simulate",
            "--sigma",
            "2.5",
            "--out",
            "o",
        ])
        .unwrap();
        let merged = ExperimentConfig::read(&cfg).unwrap().merged(&flag_config(&cli.command));
        assert_eq!(merged.data.sigma, Some(2.5));
        assert_eq!(merged.data.seed, Some(4));
    }
}
