//! C ABI over the `rankdyn` library.
//!
//! Every function returns an `RdStatus` code; results come back through out
//! pointers. Objects are opaque handles released with their `_free`
//! function. After a nonzero status, `rd_last_error` describes the failure
//! on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rankdyn::archive::{read_archive, write_archive};
use rankdyn::chain::{run_chain, PosteriorArchive};
use rankdyn::config::ExperimentConfig;
use rankdyn::dynamic::{forecast_one_step, RankForecast};
use rankdyn::rankings::{kendall_tau, rank_of_scores, validate_ranking, RankingPanel};
use rankdyn::simgen::{simulate, ScenarioRequest};
use rankdyn::Error;

/// Status codes; the nonzero values of 2..=4 match the CLI exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RdStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Data = 3,
    Internal = 4,
    Panic = 5,
}

pub struct RdPanel(RankingPanel);
pub struct RdArchive(PosteriorArchive);
pub struct RdForecast(RankForecast);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RdStatus {
    match e.exit_code() {
        2 => RdStatus::Config,
        3 => RdStatus::Data,
        _ => RdStatus::Internal,
    }
}

struct Fail(RdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(RdStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RdStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("panic inside rankdyn".into());
            RdStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(RdStatus::Config, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

/// Message of the last failure on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn rd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Normalized Kendall tau distance of two rankings given as 1-based ranks.
///
/// # Safety
/// `a` and `b` must point to `n` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rd_kendall_tau(a: *const u32, b: *const u32, n: usize, out: *mut f64) -> RdStatus {
    guard(|| {
        let to_ranking = |p: *const u32, what: &str| -> Result<_, Fail> {
            let raw: Vec<i64> = slice_arg(p, n, what)?.iter().map(|&r| r as i64).collect();
            Ok(validate_ranking(&raw)?)
        };
        let tau = kendall_tau(&to_ranking(a, "a")?, &to_ranking(b, "b")?)?;
        put(out, tau, "out")
    })
}

/// Ranks of `n` scores, rank 1 for the smallest.
///
/// # Safety
/// `z` must point to `n` readable values and `ranks` to `n` writable ones.
#[no_mangle]
pub unsafe extern "C" fn rd_rank_of_scores(z: *const f64, n: usize, ranks: *mut u32) -> RdStatus {
    guard(|| {
        let r = rank_of_scores(slice_arg(z, n, "z")?)?;
        if ranks.is_null() {
            return Err(null("ranks"));
        }
        std::slice::from_raw_parts_mut(ranks, n).copy_from_slice(r.ranks());
        Ok(())
    })
}

/// Reads a ranking CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rd_panel_read_csv(path: *const c_char, out: *mut *mut RdPanel) -> RdStatus {
    guard(|| {
        let panel = RankingPanel::read_csv_path(str_arg(path, "path")?)?;
        put(out, Box::into_raw(Box::new(RdPanel(panel))), "out")
    })
}

/// Writes a panel as a ranking CSV.
///
/// # Safety
/// `panel` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rd_panel_write_csv(panel: *const RdPanel, path: *const c_char) -> RdStatus {
    guard(|| {
        let p = ref_arg(panel, "panel")?;
        Ok(p.0.write_csv_path(str_arg(path, "path")?)?)
    })
}

/// Items, rankers and periods of a panel.
///
/// # Safety
/// `panel` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn rd_panel_dims(
    panel: *const RdPanel,
    n_items: *mut usize,
    n_rankers: *mut usize,
    n_times: *mut usize,
) -> RdStatus {
    guard(|| {
        let p = &ref_arg(panel, "panel")?.0;
        put(n_items, p.n_items(), "n_items")?;
        put(n_rankers, p.n_rankers(), "n_rankers")?;
        put(n_times, p.n_times(), "n_times")
    })
}

/// Copies the ranks of `(ranker, time)` into `ranks` (length `n_items`).
///
/// # Safety
/// `panel` must be a live handle and `ranks` must hold `n_items` values.
#[no_mangle]
pub unsafe extern "C" fn rd_panel_ranking(panel: *const RdPanel, ranker: usize, time: usize, ranks: *mut u32) -> RdStatus {
    guard(|| {
        let p = &ref_arg(panel, "panel")?.0;
        if ranker >= p.n_rankers() || time >= p.n_times() {
            return Err(Fail(RdStatus::Data, format!("no ranking for ranker {ranker} time {time}")));
        }
        if ranks.is_null() {
            return Err(null("ranks"));
        }
        std::slice::from_raw_parts_mut(ranks, p.n_items()).copy_from_slice(p.ranking(ranker, time).ranks());
        Ok(())
    })
}

/// # Safety
/// `panel` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rd_panel_free(panel: *mut RdPanel) {
    if !panel.is_null() {
        drop(Box::from_raw(panel));
    }
}

/// Generates a simulation scenario (`static1`..`static3`, `dyn1`..`dyn3`)
/// at its default size.
///
/// # Safety
/// `scenario` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rd_simulate(scenario: *const c_char, sigma: f64, seed: u64, out: *mut *mut RdPanel) -> RdStatus {
    guard(|| {
        let id = str_arg(scenario, "scenario")?.parse()?;
        let data = simulate(&ScenarioRequest::new(id, sigma, seed))?;
        put(out, Box::into_raw(Box::new(RdPanel(data.panel().clone()))), "out")
    })
}

/// Fits the model named in `config_json`, an experiment configuration
/// document (only the `model` and `sampler` sections are read).
///
/// # Safety
/// `panel` must be a live handle, `config_json` a NUL-terminated string and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rd_fit(panel: *const RdPanel, config_json: *const c_char, out: *mut *mut RdArchive) -> RdStatus {
    guard(|| {
        let p = &ref_arg(panel, "panel")?.0;
        let cfg = ExperimentConfig::from_json(str_arg(config_json, "config_json")?)?;
        cfg.validate()?;
        let fit = cfg.fit_config(cfg.model()?)?;
        let archive = run_chain(p, &fit)?;
        put(out, Box::into_raw(Box::new(RdArchive(archive))), "out")
    })
}

/// Number of kept posterior draws.
///
/// # Safety
/// `archive` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rd_archive_n_draws(archive: *const RdArchive, out: *mut usize) -> RdStatus {
    guard(|| put(out, ref_arg(archive, "archive")?.0.n_kept(), "out"))
}

/// # Safety
/// `archive` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rd_archive_write(archive: *const RdArchive, dir: *const c_char) -> RdStatus {
    guard(|| Ok(write_archive(&ref_arg(archive, "archive")?.0, str_arg(dir, "dir")?)?))
}

/// # Safety
/// `dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rd_archive_read(dir: *const c_char, out: *mut *mut RdArchive) -> RdStatus {
    guard(|| {
        let a = read_archive(str_arg(dir, "dir")?)?;
        put(out, Box::into_raw(Box::new(RdArchive(a))), "out")
    })
}

/// # Safety
/// `archive` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rd_archive_free(archive: *mut RdArchive) {
    if !archive.is_null() {
        drop(Box::from_raw(archive));
    }
}

/// One-step-ahead forecast of the period after the fitted data.
///
/// # Safety
/// `archive` and `panel` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rd_forecast(
    archive: *const RdArchive,
    panel: *const RdPanel,
    samples_per_draw: usize,
    seed: u64,
    out: *mut *mut RdForecast,
) -> RdStatus {
    guard(|| {
        let a = &ref_arg(archive, "archive")?.0;
        let p = &ref_arg(panel, "panel")?.0;
        let f = forecast_one_step(a, p, samples_per_draw, seed)?;
        put(out, Box::into_raw(Box::new(RdForecast(f))), "out")
    })
}

/// Probability that `item` (0-based) receives `rank` (1-based) for `ranker`.
///
/// # Safety
/// `forecast` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rd_forecast_probability(
    forecast: *const RdForecast,
    ranker: usize,
    item: usize,
    rank: usize,
    out: *mut f64,
) -> RdStatus {
    guard(|| {
        let f = &ref_arg(forecast, "forecast")?.0;
        if ranker >= f.n_rankers || item >= f.n_items || rank == 0 || rank > f.n_items {
            return Err(Fail(RdStatus::Data, format!("index out of range: ranker {ranker} item {item} rank {rank}")));
        }
        put(out, f.probability(ranker, item, rank), "out")
    })
}

/// Point forecast ranks of `ranker` (length `n_items`).
///
/// # Safety
/// `forecast` must be a live handle and `ranks` must hold `n_items` values.
#[no_mangle]
pub unsafe extern "C" fn rd_forecast_point(forecast: *const RdForecast, ranker: usize, ranks: *mut u32) -> RdStatus {
    guard(|| {
        let f = &ref_arg(forecast, "forecast")?.0;
        let r = f
            .point
            .get(ranker)
            .ok_or_else(|| Fail(RdStatus::Data, format!("no ranker {ranker}")))?;
        if ranks.is_null() {
            return Err(null("ranks"));
        }
        std::slice::from_raw_parts_mut(ranks, f.n_items).copy_from_slice(r.ranks());
        Ok(())
    })
}

/// # Safety
/// `forecast` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rd_forecast_free(forecast: *mut RdForecast) {
    if !forecast.is_null() {
        drop(Box::from_raw(forecast));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn last_error() -> String {
        let p = rd_last_error();
        assert!(!p.is_null());
        unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
    }

    #[test]
    fn tau_and_ranks() {
        let (a, b) = ([1u32, 2, 3], [3u32, 2, 1]);
        let mut tau = 0.0;
        assert_eq!(unsafe { rd_kendall_tau(a.as_ptr(), b.as_ptr(), 3, &mut tau) }, RdStatus::Ok);
        assert_eq!(tau, 1.0);
        assert!(rd_last_error().is_null());
        let z = [0.3, -1.0, 2.0];
        let mut r = [0u32; 3];
        assert_eq!(unsafe { rd_rank_of_scores(z.as_ptr(), 3, r.as_mut_ptr()) }, RdStatus::Ok);
        assert_eq!(r, [2, 1, 3]);
    }

    #[test]
    fn errors_set_codes_and_messages() {
        let bad = [1u32, 1, 3];
        let good = [1u32, 2, 3];
        let mut tau = 0.0;
        assert_eq!(unsafe { rd_kendall_tau(bad.as_ptr(), good.as_ptr(), 3, &mut tau) }, RdStatus::Data);
        assert!(!last_error().is_empty());
        assert_eq!(unsafe { rd_kendall_tau(ptr::null(), good.as_ptr(), 3, &mut tau) }, RdStatus::NullPointer);
        let mut panel = ptr::null_mut();
        let s = CString::new("static7").unwrap();
        assert_eq!(unsafe { rd_simulate(s.as_ptr(), 1.0, 0, &mut panel) }, RdStatus::Config);
        assert!(panel.is_null());
    }

    #[test]
    fn simulate_fit_forecast_round_trip() {
        let s = CString::new("dyn1").unwrap();
        let mut panel = ptr::null_mut();
        assert_eq!(unsafe { rd_simulate(s.as_ptr(), 1.0, 3, &mut panel) }, RdStatus::Ok);
        let (mut n, mut m, mut t) = (0, 0, 0);
        assert_eq!(unsafe { rd_panel_dims(panel, &mut n, &mut m, &mut t) }, RdStatus::Ok);
        assert!(n > 1 && m > 0 && t > 1);

        let cfg = CString::new(r#"{"model": "arrolinear", "sampler": {"n_burnin": 20, "n_draws": 15, "seed": 1}}"#).unwrap();
        let mut archive = ptr::null_mut();
        assert_eq!(unsafe { rd_fit(panel, cfg.as_ptr(), &mut archive) }, RdStatus::Ok, "{}", last_error());
        let mut draws = 0;
        assert_eq!(unsafe { rd_archive_n_draws(archive, &mut draws) }, RdStatus::Ok);
        assert_eq!(draws, 15);

        let dir = tempfile::tempdir().unwrap();
        let d = CString::new(dir.path().join("a").to_str().unwrap()).unwrap();
        assert_eq!(unsafe { rd_archive_write(archive, d.as_ptr()) }, RdStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(unsafe { rd_archive_read(d.as_ptr(), &mut back) }, RdStatus::Ok);
        assert_eq!(unsafe { &(*back).0 }, unsafe { &(*archive).0 });

        let mut fc = ptr::null_mut();
        assert_eq!(unsafe { rd_forecast(back, panel, 2, 9, &mut fc) }, RdStatus::Ok, "{}", last_error());
        let mut ranks = vec![0u32; n];
        assert_eq!(unsafe { rd_forecast_point(fc, 0, ranks.as_mut_ptr()) }, RdStatus::Ok);
        let mut sorted = ranks.clone();
        sorted.sort();
        assert_eq!(sorted, (1..=n as u32).collect::<Vec<_>>());
        let mut total = 0.0;
        for r in 1..=n {
            let mut p = 0.0;
            assert_eq!(unsafe { rd_forecast_probability(fc, 0, 0, r, &mut p) }, RdStatus::Ok);
            total += p;
        }
        assert!((total - 1.0).abs() < 1e-9);
        let mut p = 0.0;
        assert_eq!(unsafe { rd_forecast_probability(fc, 0, 0, 0, &mut p) }, RdStatus::Data);

        unsafe {
            rd_forecast_free(fc);
            rd_archive_free(back);
            rd_archive_free(archive);
            rd_panel_free(panel);
            rd_panel_free(ptr::null_mut());
        }
    }
}
