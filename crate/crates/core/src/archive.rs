//! Directory format of a [`PosteriorArchive`].
//!
//! ```text
//! <dir>/config.json        fit settings
//! <dir>/seed.json          root seed of every random stream
//! <dir>/archive.json       dimensions and sampler bookkeeping
//! <dir>/forests/draw_NNNNN.txt   one forest per kept draw (tree models)
//! <dir>/coefficients.csv   one row per kept draw (linear models)
//! <dir>/latent.bin         kept latent states, one row per draw
//! <dir>/state/...          final sampler state and running sums, for resuming
//! ```
//!
//! Binary matrices start with the magic `RDLT`, a little-endian `u32`
//! version, `u64` rows and `u64` columns, followed by row-major `f64` values.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bart::{parse_forest, write_forest, MoveStats};
use crate::chain::PosteriorArchive;
use crate::error::{Error, Result};
use crate::latent::PathStats;
use crate::model::{FitConfig, Layout};
use crate::regression::RegressorDraw;

const MAGIC: &[u8; 4] = b"RDLT";
const MATRIX_VERSION: u32 = 1;
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format_version: u32,
    n_items: usize,
    n_rankers: usize,
    n_periods: usize,
    dynamic: bool,
    n_covariates: usize,
    sweeps_completed: usize,
    n_kept: usize,
    latent_stored: bool,
    move_stats: Option<MoveStats>,
    path_stats: PathStats,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeedRecord {
    seed: u64,
    derivation: String,
}

/// Row-major `f64` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

pub fn encode_matrix(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 8 * m.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&MATRIX_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols as u64).to_le_bytes());
    for v in &m.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_matrix(bytes: &[u8]) -> Result<Matrix> {
    let bad = |msg: &str| Error::Validation(format!("latent matrix: {msg}"));
    if bytes.len() < 24 || &bytes[..4] != MAGIC {
        return Err(bad("missing RDLT header"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != MATRIX_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let body = &bytes[24..];
    if rows.checked_mul(cols).and_then(|n| n.checked_mul(8)) != Some(body.len()) {
        return Err(bad(&format!("{rows}x{cols} header does not match {} data bytes", body.len())));
    }
    let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(Matrix { rows, cols, data })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn rows_matrix(rows: &[Vec<f64>], cols: usize) -> Matrix {
    Matrix {
        rows: rows.len(),
        cols,
        data: rows.iter().flatten().copied().collect(),
    }
}

fn vector_matrix(v: &[f64]) -> Matrix {
    Matrix {
        rows: 1,
        cols: v.len(),
        data: v.to_vec(),
    }
}

fn coefficient_csv(draws: &[&RegressorDraw]) -> Result<String> {
    let mut out = String::new();
    let k = draws.first().map_or(0, |d| d.n_covariates());
    out.push_str("draw,intercept");
    for b in 1..=k {
        out.push_str(&format!(",beta_{b}"));
    }
    out.push('\n');
    for (d, draw) in draws.iter().enumerate() {
        let RegressorDraw::Linear { intercept, beta } = draw else {
            return Err(Error::Invariant("mixed regressor kinds in one archive".into()));
        };
        out.push_str(&format!("{d},{intercept:?}"));
        for b in beta {
            out.push_str(&format!(",{b:?}"));
        }
        out.push('\n');
    }
    Ok(out)
}

fn parse_coefficients(text: &str, path: &Path) -> Result<Vec<RegressorDraw>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Validation(format!("{}: empty coefficient file", path.display())))?;
    let k = header.split(',').count().saturating_sub(2);
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != k + 2 {
            return Err(Error::Validation(format!(
                "{} line {}: expected {} fields, got {}",
                path.display(),
                n + 2,
                k + 2,
                fields.len()
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Validation(format!("{} line {}: bad number {s:?}", path.display(), n + 2)))
        };
        out.push(RegressorDraw::Linear {
            intercept: parse(fields[1])?,
            beta: fields[2..].iter().map(|s| parse(s)).collect::<Result<_>>()?,
        });
    }
    Ok(out)
}

fn write_draws(dir: &Path, draws: &[&RegressorDraw], forest_dir: &str, coef_file: &str) -> Result<()> {
    match draws.first() {
        Some(RegressorDraw::Linear { .. }) => write_file(&dir.join(coef_file), coefficient_csv(draws)?.as_bytes()),
        _ => {
            let fdir = dir.join(forest_dir);
            mkdir(&fdir)?;
            for (d, draw) in draws.iter().enumerate() {
                let RegressorDraw::Forest(f) = draw else {
                    return Err(Error::Invariant("mixed regressor kinds in one archive".into()));
                };
                write_file(&fdir.join(format!("draw_{d:05}.txt")), write_forest(f).as_bytes())?;
            }
            Ok(())
        }
    }
}

fn read_draws(dir: &Path, n: usize, linear: bool, forest_dir: &str, coef_file: &str) -> Result<Vec<RegressorDraw>> {
    if linear {
        let path = dir.join(coef_file);
        let draws = parse_coefficients(&read_text(&path)?, &path)?;
        if draws.len() != n {
            return Err(Error::Validation(format!(
                "{}: expected {n} draws, found {}",
                path.display(),
                draws.len()
            )));
        }
        return Ok(draws);
    }
    (0..n)
        .map(|d| {
            let path = dir.join(forest_dir).join(format!("draw_{d:05}.txt"));
            parse_forest(&read_text(&path)?)
                .map(RegressorDraw::Forest)
                .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
        })
        .collect()
}

/// Writes `archive` into `dir`, creating it if needed. Output bytes depend
/// only on the archive contents.
pub fn write_archive(archive: &PosteriorArchive, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    mkdir(dir)?;
    let l = archive.layout;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        n_items: l.n_items,
        n_rankers: l.n_rankers,
        n_periods: l.n_periods,
        dynamic: l.dynamic,
        n_covariates: archive.n_covariates,
        sweeps_completed: archive.sweeps_completed,
        n_kept: archive.n_kept(),
        latent_stored: !archive.latent_draws.is_empty(),
        move_stats: archive.move_stats,
        path_stats: archive.path_stats,
    };
    write_file(&dir.join("config.json"), &json(&archive.config)?)?;
    write_file(
        &dir.join("seed.json"),
        &json(&SeedRecord {
            seed: archive.config.seed,
            derivation: "splitmix64 fold over (seed, sweep, stream, index...)".into(),
        })?,
    )?;
    write_file(&dir.join("archive.json"), &json(&manifest)?)?;
    let draws: Vec<&RegressorDraw> = archive.draws.iter().collect();
    write_draws(dir, &draws, "forests", "coefficients.csv")?;
    write_file(
        &dir.join("latent.bin"),
        &encode_matrix(&rows_matrix(&archive.latent_draws, l.n_latent())),
    )?;

    let state = dir.join("state");
    mkdir(&state)?;
    write_draws(&state, &[&archive.final_regressor], "forest", "coefficients.csv")?;
    write_file(&state.join("latent.bin"), &encode_matrix(&vector_matrix(&archive.final_latent)))?;
    write_file(&state.join("fitted_sum.bin"), &encode_matrix(&vector_matrix(&archive.fitted_sum)))?;
    write_file(&state.join("latent_sum.bin"), &encode_matrix(&vector_matrix(&archive.latent_sum)))?;
    Ok(())
}

fn read_vector(path: PathBuf, len: usize) -> Result<Vec<f64>> {
    let m = decode_matrix(&read_file(&path)?).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    if m.rows != 1 || m.cols != len {
        return Err(Error::Validation(format!(
            "{}: expected 1x{len}, found {}x{}",
            path.display(),
            m.rows,
            m.cols
        )));
    }
    Ok(m.data)
}

pub fn read_archive(dir: impl AsRef<Path>) -> Result<PosteriorArchive> {
    let dir = dir.as_ref();
    let config: FitConfig = serde_json::from_str(&read_text(&dir.join("config.json"))?)?;
    let manifest: Manifest = serde_json::from_str(&read_text(&dir.join("archive.json"))?)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Validation(format!(
            "archive format {} is not supported",
            manifest.format_version
        )));
    }
    let spec = config.spec()?;
    let layout = Layout {
        n_items: manifest.n_items,
        n_rankers: manifest.n_rankers,
        n_periods: manifest.n_periods,
        dynamic: manifest.dynamic,
    };
    if layout.dynamic != spec.dynamic {
        return Err(Error::Validation("archive layout disagrees with its model".into()));
    }
    let linear = spec.regressor == crate::regression::RegressorKind::Linear;
    let draws = read_draws(dir, manifest.n_kept, linear, "forests", "coefficients.csv")?;

    let path = dir.join("latent.bin");
    let latent = decode_matrix(&read_file(&path)?).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    let expected_rows = if manifest.latent_stored { manifest.n_kept } else { 0 };
    if latent.rows != expected_rows || (latent.rows > 0 && latent.cols != layout.n_latent()) {
        return Err(Error::Validation(format!(
            "{}: expected {expected_rows}x{}, found {}x{}",
            path.display(),
            layout.n_latent(),
            latent.rows,
            latent.cols
        )));
    }
    let latent_draws = latent.data.chunks(latent.cols.max(1)).map(<[f64]>::to_vec).collect();

    let state = dir.join("state");
    let final_regressor = read_draws(&state, 1, linear, "forest", "coefficients.csv")?
        .pop()
        .expect("one state draw");
    Ok(PosteriorArchive {
        config,
        layout,
        n_covariates: manifest.n_covariates,
        sweeps_completed: manifest.sweeps_completed,
        draws,
        latent_draws,
        fitted_sum: read_vector(state.join("fitted_sum.bin"), layout.n_rows())?,
        latent_sum: read_vector(state.join("latent_sum.bin"), layout.n_latent())?,
        final_regressor,
        final_latent: read_vector(state.join("latent.bin"), layout.n_latent())?,
        move_stats: manifest.move_stats,
        path_stats: manifest.path_stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::run_chain;
    use crate::model::ModelKind;
    use crate::rankings::{Ranking, RankingPanel};
    use proptest::prelude::*;

    fn panel() -> RankingPanel {
        let o: [&[usize]; 3] = [&[0, 1, 2], &[2, 0, 1], &[1, 0, 2]];
        RankingPanel::new(o.iter().map(|o| vec![Ranking::from_order(o).unwrap()]).collect(), None).unwrap()
    }

    #[test]
    fn round_trips_tree_and_linear_archives() {
        for model in [ModelKind::Arrobart, ModelKind::Arrolinear, ModelKind::Robart] {
            let cfg = FitConfig::new(model).with_iterations(5, 4).with_seed(3);
            let a = run_chain(&panel(), &cfg).unwrap();
            let dir = tempfile::tempdir().unwrap();
            write_archive(&a, dir.path()).unwrap();
            assert_eq!(read_archive(dir.path()).unwrap(), a);
        }
    }

    #[test]
    fn rejects_truncated_matrix() {
        let m = Matrix {
            rows: 2,
            cols: 2,
            data: vec![1.0, 2.0, 3.0, 4.0],
        };
        let bytes = encode_matrix(&m);
        assert!(decode_matrix(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_matrix(b"XXXX").is_err());
    }

    proptest! {
        #[test]
        fn matrix_round_trip(rows in 0usize..5, cols in 1usize..5, seed in any::<u64>()) {
            use rand::Rng;
            let mut rng = crate::rng::derive_rng(seed, &[]);
            let data: Vec<f64> = (0..rows * cols).map(|_| rng.random::<f64>() * 1e6 - 5e5).collect();
            let m = Matrix { rows, cols, data };
            prop_assert_eq!(decode_matrix(&encode_matrix(&m)).unwrap(), m);
        }
    }
}
