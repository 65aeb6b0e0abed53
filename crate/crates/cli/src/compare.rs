//! Side-by-side error statistics for several finished runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use contact_rom::experiment::Stage;
use contact_rom::mtx::fmt_f64;
use contact_rom::{ErrorCurve, ErrorKind, NormConvention};

use crate::config::RESOLVED_NAME;
use crate::error::CliError;

const QUANTITIES: [(&str, &str, ErrorKind); 3] = [
    ("q_B", "boundary", ErrorKind::Displacement),
    ("q_I", "interior", ErrorKind::Displacement),
    ("lambda", "multiplier", ErrorKind::Multiplier),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub quantity: &'static str,
    pub run: String,
    pub method: String,
    pub max: f64,
    pub mean: f64,
    /// Largest pointwise difference to the first run's curve.
    pub max_diff: f64,
}

fn method_of(dir: &Path) -> Result<String, CliError> {
    let path = dir.join(RESOLVED_NAME);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let table: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    Ok(table
        .get("coupling")
        .and_then(toml::Value::as_str)
        .unwrap_or("static-modes")
        .to_string())
}

fn read_curve(dir: &Path, stem: &str, kind: ErrorKind) -> Result<Option<ErrorCurve>, CliError> {
    let path = dir.join("errors").join(format!("{stem}.csv"));
    if !path.is_file() {
        return Ok(None);
    }
    ErrorCurve::read_csv(&path, kind, NormConvention::Squared)
        .map(Some)
        .map_err(CliError::stage(Stage::Metrics))
}

fn same_grid(a: &ErrorCurve, b: &ErrorCurve) -> bool {
    a.times.len() == b.times.len()
        && a.times.iter().zip(&b.times).all(|(x, y)| (x - y).abs() <= 1e-9 * x.abs().max(1.0))
}

/// One row per quantity and run, using the squared error curves.
pub fn compare(dirs: &[PathBuf]) -> Result<Vec<Row>, CliError> {
    if dirs.is_empty() {
        return Err(CliError::config("compare needs at least one run directory"));
    }
    let methods = dirs.iter().map(|d| method_of(d)).collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for (quantity, stem, kind) in QUANTITIES {
        let mut curves = Vec::with_capacity(dirs.len());
        for dir in dirs {
            let curve = read_curve(dir, stem, kind)?;
            if curve.is_none() && kind == ErrorKind::Displacement {
                return Err(CliError::missing_file(&dir.join("errors").join(format!("{stem}.csv"))));
            }
            curves.push(curve);
        }
        let Some(Some(first)) = curves.first().cloned() else { continue };
        for ((dir, method), curve) in dirs.iter().zip(&methods).zip(&curves) {
            let Some(curve) = curve else { continue };
            if !same_grid(&first, curve) {
                return Err(CliError::config(format!(
                    "{} uses a different time grid than {}",
                    dir.display(),
                    dirs[0].display()
                )));
            }
            let max_diff = curve
                .values
                .iter()
                .zip(&first.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            rows.push(Row {
                quantity,
                run: dir.display().to_string(),
                method: method.clone(),
                max: curve.max(),
                mean: curve.mean(),
                max_diff,
            });
        }
    }
    Ok(rows)
}

pub fn to_csv(rows: &[Row]) -> String {
    let mut out = String::from("quantity,run,method,max,mean,max_diff_vs_first\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.quantity,
            r.run,
            r.method,
            fmt_f64(r.max),
            fmt_f64(r.mean),
            fmt_f64(r.max_diff)
        );
    }
    out
}

pub fn to_table(rows: &[Row]) -> String {
    let width = rows.iter().map(|r| r.run.len()).max().unwrap_or(3).max(3);
    let mut out = format!(
        "{:<8} {:<width$} {:<13} {:>11} {:>11} {:>11}\n",
        "quantity", "run", "method", "max", "mean", "diff"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<8} {:<width$} {:<13} {:>11.4e} {:>11.4e} {:>11.4e}",
            r.quantity, r.run, r.method, r.max, r.mean, r.max_diff
        );
    }
    out
}
