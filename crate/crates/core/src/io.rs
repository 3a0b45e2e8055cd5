//! File formats: JSON for every structured artifact, CSV for tables.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::ExperimentReport;
use crate::forward::MSRDataset;
use crate::inversion::ReconstructionResult;

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(w, value)?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// One row per source/receiver pair: `s, r, V(t_0), …, V(t_{N−1})`, after a
/// comment line holding the dataset header.
pub fn write_msr_csv(data: &MSRDataset, path: &Path) -> Result<()> {
    let mut file = File::create(path)?;
    use std::io::Write;
    writeln!(
        file,
        "# j={} ns={} nr={} N={} T={} seed={} rho={}",
        data.scale,
        data.ns,
        data.nr,
        data.samples(),
        data.duration,
        data.seed.map_or("none".to_string(), |s| s.to_string()),
        data.noise_level
    )?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["s".to_string(), "r".to_string()];
    header.extend((0..data.samples()).map(|n| format!("v{n}")));
    w.write_record(&header).map_err(csv_error)?;
    for s in 0..data.ns {
        for r in 0..data.nr {
            let mut row = vec![s.to_string(), r.to_string()];
            row.extend((0..data.samples()).map(|n| format!("{:e}", data.value(s, r, n))));
            w.write_record(&row).map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Columns `t, N11, N12, N22, residual`.
pub fn write_reconstruction_csv(result: &ReconstructionResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(["t", "N11", "N12", "N22", "residual"])
        .map_err(csv_error)?;
    for (n, (v, res)) in result.series.values.iter().zip(&result.residuals).enumerate() {
        w.write_record(&[
            format!("{:e}", n as f64 * result.series.dt),
            format!("{:e}", v[0]),
            format!("{:e}", v[1]),
            format!("{:e}", v[2]),
            format!("{:e}", res),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Column names of the report table.
pub fn report_columns(report: &ExperimentReport) -> Vec<String> {
    let mut cols: Vec<String> = [
        "shape",
        "rho",
        "alpha",
        "scales",
        "trials",
        "successes",
        "success_prob",
        "random_guess",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend(report.dictionary_names.iter().map(|n| format!("mean_eps_{n}")));
    cols.extend(report.dictionary_names.iter().map(|n| format!("std_eps_{n}")));
    cols
}

pub fn write_report_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(report_columns(report)).map_err(csv_error)?;
    for r in &report.rows {
        let scales: Vec<String> = r.scales.iter().map(|j| j.to_string()).collect();
        let mut row = vec![
            r.target.clone(),
            format!("{}", r.noise_level),
            format!("{}", r.aperture),
            scales.join(" "),
            r.trials.to_string(),
            r.successes.to_string(),
            format!("{}", r.success_probability),
            format!("{}", report.random_guess),
        ];
        row.extend(r.mean_distance.iter().map(|d| format!("{d:e}")));
        row.extend(r.std_distance.iter().map(|d| format!("{d:e}")));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}
