//! On-disk layout: `runs/<id>/{manifest.json, series.csv, ...}` and
//! `sweeps/<id>/table.csv`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{RunResult, RunSummary, SweepError, SweepTable};

pub const RUNS_DIR: &str = "runs";
pub const SWEEPS_DIR: &str = "sweeps";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SweepError + '_ {
    move |source| SweepError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn ser_err<E: std::fmt::Display>(e: E) -> SweepError {
    SweepError::Serialize(e.to_string())
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), SweepError> {
    let mut w = csv::Writer::from_path(path).map_err(ser_err)?;
    for row in rows {
        w.serialize(row).map_err(ser_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes the manifest, the time series and any optional grids of one run.
/// Returns the run directory.
pub fn persist_run(root: &Path, run: &RunResult) -> Result<PathBuf, SweepError> {
    let dir = root.join(RUNS_DIR).join(&run.summary.id);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;

    write_csv(&dir.join("series.csv"), run.series.iter())?;

    if let Some(s) = &run.spectrum {
        let rows = s
            .omega
            .iter()
            .zip(&s.c_omega)
            .map(|(&omega, &value)| SpectrumRow { omega, value });
        write_csv(&dir.join("spectrum.csv"), rows)?;
    }
    if let Some(g) = &run.wigner {
        let n = g.p.len();
        let rows = g.w.iter().enumerate().map(|(k, &w)| WignerRow {
            x: g.q[k / n],
            y: g.p[k % n],
            w,
        });
        write_csv(&dir.join("wigner.csv"), rows)?;
    }

    // The manifest goes last so its presence marks a complete run.
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&run.summary).map_err(ser_err)?;
    let tmp = dir.join("manifest.json.tmp");
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(text.as_bytes()).map_err(io_err(&tmp))?;
    fs::rename(&tmp, &path).map_err(io_err(&path))?;
    Ok(dir)
}

pub fn load_summary(root: &Path, id: &str) -> Result<RunSummary, SweepError> {
    let path = root.join(RUNS_DIR).join(id).join("manifest.json");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(ser_err)
}

#[derive(Serialize)]
struct SpectrumRow {
    omega: f64,
    value: f64,
}

#[derive(Serialize)]
struct WignerRow {
    x: f64,
    y: f64,
    #[serde(rename = "W")]
    w: f64,
}

#[derive(Serialize)]
struct TableRow<'a> {
    value: f64,
    regime: &'a str,
    t_s: Option<f64>,
    n_mf: Option<f64>,
    n_s: Option<f64>,
    n_cav: Option<f64>,
    n_bs: Option<f64>,
    n_sq: Option<f64>,
    n_photon: Option<f64>,
    purity: Option<f64>,
    diverged_at: Option<f64>,
    run_id: &'a str,
    error: &'a str,
}

/// Writes `sweeps/<id>/table.csv` plus a JSON sidecar with the axis name
/// and settings hash.
pub fn persist_table(root: &Path, table: &SweepTable) -> Result<PathBuf, SweepError> {
    let dir = root.join(SWEEPS_DIR).join(&table.id);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let path = dir.join("table.csv");
    let rows = table.rows.iter().map(|r| TableRow {
        value: r.axis_value,
        regime: r.regime.map_or("error", |g| g.name()),
        t_s: r.t_s,
        n_mf: r.n_mf,
        n_s: r.n_s,
        n_cav: r.n_cav,
        n_bs: r.n_bs,
        n_sq: r.n_sq,
        n_photon: r.n_photon,
        purity: r.purity,
        diverged_at: r.diverged_at,
        run_id: r.run_id.as_deref().unwrap_or(""),
        error: r.error.as_deref().unwrap_or(""),
    });
    write_csv(&path, rows)?;
    let meta = serde_json::json!({
        "id": table.id,
        "axis": table.axis.name(),
        "settings_hash": table.settings_hash,
        "rows": table.rows.len(),
    });
    let meta_path = dir.join("sweep.json");
    let text = serde_json::to_string_pretty(&meta).map_err(ser_err)?;
    fs::write(&meta_path, text).map_err(io_err(&meta_path))?;
    Ok(path)
}
