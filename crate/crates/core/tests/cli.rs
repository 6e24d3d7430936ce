use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rankdyn::archive::read_archive;
use rankdyn::rankings::RankingPanel;

fn rankdyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rankdyn"))
        .args(args)
        .arg("--quiet")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = rankdyn(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails_with(args: &[&str], code: i32, needle: &str) {
    let out = rankdyn(args);
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(out.status.code(), Some(code), "{args:?}: {err}");
    assert!(err.contains(needle), "{args:?}: expected {needle:?} in {err}");
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn read_csv(path: impl AsRef<Path>) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

fn small_dynamic(dir: &Path) -> String {
    ok(&[
        "simulate", "--scenario", "dyn1", "--sigma", "1", "--seed", "2", "--n-items", "5", "--n-rankers", "2",
        "--n-periods", "10", "--out", &p(dir, "sim"),
    ]);
    p(dir, "sim/rankings.csv")
}

#[test]
fn simulate_is_reproducible_and_reports_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let a = ok(&["simulate", "--scenario", "dyn1", "--sigma", "1.0", "--seed", "7", "--out", &p(dir.path(), "a")]);
    ok(&["simulate", "--scenario", "dyn1", "--sigma", "1.0", "--seed", "7", "--out", &p(dir.path(), "b")]);
    assert!(a.contains("N=20 M=5 T=52"), "{a}");
    for f in ["rankings.csv", "truth_dyn1.csv"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    let panel = RankingPanel::read_csv_path(dir.path().join("a/rankings.csv")).unwrap();
    assert_eq!((panel.n_items(), panel.n_rankers(), panel.n_times()), (20, 5, 52));
}

#[test]
fn static_scenario_three_has_four_covariates() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--scenario", "static3", "--sigma", "5", "--out", &p(dir.path(), "s")]);
    let text = std::fs::read_to_string(dir.path().join("s/rankings.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header.split(',').filter(|h| h.starts_with("cov_")).count(), 4, "{header}");
}

#[test]
fn invalid_sigma_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    fails_with(&["simulate", "--scenario", "dyn1", "--sigma", "0", "--out", &p(dir.path(), "x")], 2, "sigma");
    fails_with(&["simulate", "--scenario", "dyn1", "--sigma", "-1", "--out", &p(dir.path(), "x")], 2, "sigma");
    fails_with(&["simulate", "--scenario", "dyn9", "--sigma", "1", "--out", &p(dir.path(), "x")], 2, "scenario");
}

#[test]
fn fit_writes_the_requested_number_of_draws() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--scenario", "static1", "--sigma", "1", "--out", &p(dir.path(), "s")]);
    let data = p(dir.path(), "s/rankings.csv");
    ok(&["fit", "--data", &data, "--model", "robart", "--burnin", "20", "--draws", "25", "--out", &p(dir.path(), "f")]);
    let a = read_archive(dir.path().join("f")).unwrap();
    assert_eq!(a.n_kept(), 25);
    assert_eq!(std::fs::read_dir(dir.path().join("f/forests")).unwrap().count(), 25);
}

#[test]
fn dynamic_model_on_one_period_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--scenario", "static1", "--sigma", "1", "--out", &p(dir.path(), "s")]);
    let data = p(dir.path(), "s/rankings.csv");
    fails_with(
        &["fit", "--data", &data, "--model", "arrobart", "--draws", "5", "--out", &p(dir.path(), "f")],
        3,
        "dynamic model requires T >= 2",
    );
}

#[test]
fn bad_csv_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let data = p(dir.path(), "bad.csv");
    std::fs::write(&data, "time,ranker,item,rank\n1,a,x,1\n1,a,y,1\n").unwrap();
    fails_with(&["fit", "--data", &data, "--model", "robart", "--out", &p(dir.path(), "f")], 3, "line 2");
    std::fs::write(&data, "time,ranker,item,rank\n1,a,x,1\n1,a,y,two\n").unwrap();
    fails_with(&["fit", "--data", &data, "--model", "robart", "--out", &p(dir.path(), "f")], 3, "line 3");
    fails_with(&["fit", "--data", &p(dir.path(), "missing.csv"), "--model", "robart", "--out", &p(dir.path(), "f")], 2, "missing.csv");
}

#[test]
fn resume_equals_a_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dynamic(dir.path());
    let base = ["fit", "--data", &data, "--model", "arrobart", "--burnin", "30", "--seed", "4"];
    ok(&[&base[..], &["--draws", "40", "--out", &p(dir.path(), "one")]].concat());
    ok(&[&base[..], &["--draws", "15", "--out", &p(dir.path(), "two")]].concat());
    ok(&[&base[..], &["--draws", "40", "--out", &p(dir.path(), "two"), "--resume"]].concat());
    let a = read_archive(dir.path().join("one")).unwrap();
    let b = read_archive(dir.path().join("two")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn per_ranker_fit_writes_one_archive_per_ranker() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dynamic(dir.path());
    ok(&["fit", "--data", &data, "--model", "arrolinear", "--burnin", "10", "--draws", "10", "--per-ranker", "--out", &p(dir.path(), "f")]);
    for j in 0..2 {
        let a = read_archive(dir.path().join(format!("f/ranker_{j}"))).unwrap();
        assert_eq!(a.layout.n_rankers, 1);
    }
}

fn check_forecast_dir(dir: &Path, n_items: usize, times: &[&str]) {
    let probs = read_csv(dir.join("probabilities.csv"));
    for t in times {
        for ranker in ["ranker1", "ranker2"] {
            let rows: Vec<&Vec<String>> = probs.iter().filter(|r| r[0] == *t && r[1] == ranker).collect();
            assert_eq!(rows.len(), n_items * n_items);
            let mut by_item = vec![0.0; n_items];
            let mut by_rank = vec![0.0; n_items];
            for r in rows {
                let item: usize = r[2].trim_start_matches("item").parse::<usize>().unwrap() - 1;
                let rank: usize = r[3].parse().unwrap();
                let v: f64 = r[4].parse().unwrap();
                by_item[item] += v;
                by_rank[rank - 1] += v;
            }
            for s in by_item.iter().chain(&by_rank) {
                assert!((s - 1.0).abs() < 0.01, "time {t} {ranker}: sum {s}");
            }
        }
    }
    let points = read_csv(dir.join("points.csv"));
    for t in times {
        for ranker in ["ranker1", "ranker2"] {
            let mut ranks: Vec<usize> = points
                .iter()
                .filter(|r| r[0] == *t && r[1] == ranker)
                .map(|r| r[3].parse().unwrap())
                .collect();
            ranks.sort();
            assert_eq!(ranks, (1..=n_items).collect::<Vec<_>>());
        }
    }
}

#[test]
fn expanding_window_forecasts_are_valid() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dynamic(dir.path());
    let times = ["6", "7", "8", "9", "10"];
    for (name, extra) in [
        ("full", vec![]),
        ("reuse", vec!["--reuse-posterior"]),
        ("per_ranker", vec!["--per-ranker"]),
    ] {
        let out = p(dir.path(), name);
        let mut args = vec![
            "forecast", "--data", &data, "--model", "arrolinear", "--burnin", "30", "--draws", "30", "--first-test", "6",
            "--n-test", "5", "--out", &out,
        ];
        args.extend(extra);
        ok(&args);
        check_forecast_dir(Path::new(&out), 5, &times);
    }
    let out = p(dir.path(), "borda");
    ok(&["forecast", "--data", &data, "--model", "borda", "--first-test", "6", "--n-test", "5", "--out", &out]);
    check_forecast_dir(Path::new(&out), 5, &times);
    fails_with(
        &["forecast", "--data", &data, "--model", "arrolinear", "--first-test", "8", "--n-test", "5", "--out", &out],
        3,
        "missing holdout",
    );
}

#[test]
fn forecast_from_archive() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dynamic(dir.path());
    ok(&["fit", "--data", &data, "--model", "arrobart", "--burnin", "20", "--draws", "20", "--out", &p(dir.path(), "f")]);
    ok(&["forecast", "--data", &data, "--archive", &p(dir.path(), "f"), "--out", &p(dir.path(), "fc")]);
    check_forecast_dir(&dir.path().join("fc"), 5, &["10"]);
}

#[test]
fn evaluate_scores_forecasts() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dynamic(dir.path());
    let truth = p(dir.path(), "sim/rankings.csv");
    let out = p(dir.path(), "ev");
    ok(&["evaluate", "--truth", &truth, "--forecast", &format!("self={data}"), "--benchmark", "self", "--out", &out]);
    let taus = read_csv(dir.path().join("ev/taus.csv"));
    assert_eq!(taus.len(), 20);
    assert!(taus.iter().all(|r| r[3].parse::<f64>().unwrap() == 0.0));

    ok(&["forecast", "--data", &data, "--model", "borda", "--first-test", "6", "--n-test", "5", "--out", &p(dir.path(), "fb")]);
    ok(&[
        "evaluate", "--truth", &p(dir.path(), "sim/truth_dyn1.csv"), "--forecast", &format!("borda={}", p(dir.path(), "fb/points.csv")),
        "--benchmark", "borda", "--out", &out,
    ]);
    let summary = read_csv(dir.path().join("ev/summary.csv"));
    assert_eq!(summary.len(), 6);
    assert!(summary.iter().all(|r| r[3] == "1.0"), "{summary:?}");
    fails_with(&["evaluate", "--truth", &truth, "--forecast", &format!("m={data}"), "--benchmark", "other", "--out", &out], 2, "benchmark");
}

#[test]
fn evaluate_runs_a_small_study() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&[
        "evaluate", "--scenario", "static1", "--sigma", "1", "--models", "rolinear,borda", "--benchmark", "borda", "--reps", "2",
        "--burnin", "20", "--draws", "20", "--out", &p(dir.path(), "st"),
    ]);
    assert!(out.contains("borda"), "{out}");
    assert_eq!(read_csv(dir.path().join("st/study_taus.csv")).len(), 4);
    assert_eq!(read_csv(dir.path().join("st/study_summary.csv")).len(), 2);
}

#[test]
fn config_file_is_validated_and_overridden() {
    let dir = tempfile::tempdir().unwrap();
    let cfg: PathBuf = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"data": {"scenario": "static1", "sigma": 1.0}, "sampler": {"n_draws": 3}, "bogus": 1}"#).unwrap();
    fails_with(&["--config", cfg.to_str().unwrap(), "simulate", "--out", &p(dir.path(), "x")], 2, "bogus");

    std::fs::write(&cfg, r#"{"data": {"scenario": "static1", "sigma": 1.0, "seed": 5}, "model": "rolinear", "sampler": {"n_burnin": 5, "n_draws": 3}}"#).unwrap();
    let c = cfg.to_str().unwrap();
    ok(&["--config", c, "simulate", "--out", &p(dir.path(), "s")]);
    let data = p(dir.path(), "s/rankings.csv");
    ok(&["--config", c, "fit", "--data", &data, "--out", &p(dir.path(), "f")]);
    assert_eq!(read_archive(dir.path().join("f")).unwrap().n_kept(), 3);
    ok(&["--config", c, "fit", "--data", &data, "--draws", "4", "--out", &p(dir.path(), "g")]);
    assert_eq!(read_archive(dir.path().join("g")).unwrap().n_kept(), 4);
}

#[test]
fn bad_thread_setting_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_rankdyn"))
        .args(["simulate", "--scenario", "static1", "--sigma", "1", "--out", "/nonexistent/never"])
        .env("RANKDYN_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
