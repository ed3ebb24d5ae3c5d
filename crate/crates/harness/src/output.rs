//! CSV files written by an experiment and the readers used to plot them.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! parse-back yields the exact values and reruns produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use apbm_core::systems::SimTruth;
use nalgebra::DVector;
use thiserror::Error;

use crate::config::Method;
use crate::metrics::{RmseSeries, Summary, VarianceSeries};
use crate::runner::{MonteCarloOutput, RunStatus};

pub const RMSE_FILE: &str = "rmse.csv";
pub const THETA_VAR_FILE: &str = "theta_var.csv";
pub const MANIFEST_FILE: &str = "runs_manifest.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const TRAJECTORY_DIR: &str = "trajectories";

pub const RMSE_HEADER: [&str; 4] = ["step", "method", "lambda", "rmse"];
pub const THETA_VAR_HEADER: [&str; 3] = ["step", "lambda", "mean_variance"];
pub const MANIFEST_HEADER: [&str; 5] = ["run", "seed", "method", "lambda", "status"];

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: row {row}: {msg}")]
    Format {
        path: PathBuf,
        row: usize,
        msg: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> OutputError + '_ {
    move |source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn lambda_cell(lambda: Option<f64>) -> String {
    lambda.map(|l| l.to_string()).unwrap_or_default()
}

struct Writer<'a> {
    path: &'a Path,
    inner: csv::Writer<fs::File>,
}

impl<'a> Writer<'a> {
    fn create(path: &'a Path, header: &[&str]) -> Result<Self, OutputError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        let file = fs::File::create(path).map_err(io_err(path))?;
        let mut inner = csv::Writer::from_writer(file);
        inner.write_record(header).map_err(csv_err(path))?;
        Ok(Self { path, inner })
    }

    fn row<I, T>(&mut self, cells: I) -> Result<(), OutputError>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.inner.write_record(cells).map_err(csv_err(self.path))
    }

    fn finish(mut self) -> Result<(), OutputError> {
        self.inner.flush().map_err(io_err(self.path))
    }
}

pub fn write_rmse(path: &Path, series: &[RmseSeries]) -> Result<(), OutputError> {
    let mut w = Writer::create(path, &RMSE_HEADER)?;
    for s in series {
        let lambda = lambda_cell(s.lambda);
        for (k, v) in s.values.iter().enumerate() {
            w.row([
                (k + 1).to_string(),
                s.method.name().to_string(),
                lambda.clone(),
                v.to_string(),
            ])?;
        }
    }
    w.finish()
}

pub fn write_theta_var(path: &Path, series: &[VarianceSeries]) -> Result<(), OutputError> {
    let mut w = Writer::create(path, &THETA_VAR_HEADER)?;
    for s in series {
        for (k, v) in s.values.iter().enumerate() {
            w.row([(k + 1).to_string(), s.lambda.to_string(), v.to_string()])?;
        }
    }
    w.finish()
}

pub fn write_manifest(path: &Path, out: &MonteCarloOutput) -> Result<(), OutputError> {
    let mut w = Writer::create(path, &MANIFEST_HEADER)?;
    for rec in &out.records {
        for t in &rec.traces {
            let status = match &t.status {
                RunStatus::Ok => "ok".to_string(),
                RunStatus::Failed { step, reason } => format!("failed at step {step}: {reason}"),
            };
            w.row([
                rec.run.to_string(),
                rec.seed.to_string(),
                t.spec.method.name().to_string(),
                lambda_cell(t.spec.lambda),
                status,
            ])?;
        }
    }
    w.finish()
}

/// Per-step truth, measurements and (optionally) estimates of one run.
pub fn write_trajectory(
    path: &Path,
    truth: &SimTruth,
    estimates: Option<&[DVector<f64>]>,
) -> Result<(), OutputError> {
    let n = truth.states.first().map_or(0, |s| s.len());
    let m = truth.measurements.first().map_or(0, |s| s.len());
    let mut header: Vec<String> = vec!["step".into()];
    header.extend((0..n).map(|i| format!("truth_{i}")));
    header.extend((0..m).map(|i| format!("meas_{i}")));
    if estimates.is_some() {
        header.extend((0..n).map(|i| format!("est_{i}")));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut w = Writer::create(path, &header_refs)?;
    for k in 0..truth.steps() {
        let mut row = vec![(k + 1).to_string()];
        row.extend(truth.states[k].iter().map(f64::to_string));
        row.extend(truth.measurements[k].iter().map(f64::to_string));
        if let Some(est) = estimates {
            row.extend(est[k].iter().map(f64::to_string));
        }
        w.row(row)?;
    }
    w.finish()
}

/// Writes every artifact of a finished experiment into `dir`.
pub fn write_experiment(
    dir: &Path,
    out: &MonteCarloOutput,
    summary: &Summary,
) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_rmse(&dir.join(RMSE_FILE), &summary.rmse)?;
    if !summary.theta_var.is_empty() {
        write_theta_var(&dir.join(THETA_VAR_FILE), &summary.theta_var)?;
    }
    write_manifest(&dir.join(MANIFEST_FILE), out)?;
    for &r in &out.config.trajectory_runs {
        let rec = &out.records[r];
        let Some(truth) = &rec.truth else { continue };
        let run_dir = dir.join(TRAJECTORY_DIR).join(format!("run_{r:04}"));
        for t in rec.traces.iter().filter(|t| t.status.is_ok()) {
            let path = run_dir.join(format!("{}.csv", t.spec.label()));
            write_trajectory(&path, truth, Some(&t.estimates))?;
        }
    }
    Ok(())
}

fn open_reader(path: &Path, header: &[&str]) -> Result<csv::Reader<fs::File>, OutputError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::Reader::from_reader(file);
    let got = reader.headers().map_err(csv_err(path))?;
    if got.iter().ne(header.iter().copied()) {
        return Err(OutputError::Format {
            path: path.to_path_buf(),
            row: 0,
            msg: format!(
                "expected header {}, got {}",
                header.join(","),
                got.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    Ok(reader)
}

fn parse_cell<T: std::str::FromStr>(
    path: &Path,
    row: usize,
    what: &str,
    cell: &str,
) -> Result<T, OutputError> {
    cell.parse().map_err(|_| OutputError::Format {
        path: path.to_path_buf(),
        row,
        msg: format!("bad {what} {cell:?}"),
    })
}

/// Appends `value` to the series for `key`, checking that steps count up
/// from 1 within each series.
fn push_step<K: PartialEq>(
    series: &mut Vec<(K, Vec<f64>)>,
    key: K,
    step: usize,
    value: f64,
    path: &Path,
    row: usize,
) -> Result<(), OutputError> {
    let idx = match series.iter().position(|(k, _)| *k == key) {
        Some(i) => i,
        None => {
            series.push((key, Vec::new()));
            series.len() - 1
        }
    };
    let values = &mut series[idx].1;
    if step != values.len() + 1 {
        return Err(OutputError::Format {
            path: path.to_path_buf(),
            row,
            msg: format!("step {step} out of sequence"),
        });
    }
    values.push(value);
    Ok(())
}

pub fn read_rmse(path: &Path) -> Result<Vec<RmseSeries>, OutputError> {
    let mut reader = open_reader(path, &RMSE_HEADER)?;
    type Key = (Method, Option<f64>);
    let mut series: Vec<(Key, Vec<f64>)> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(csv_err(path))?;
        let step: usize = parse_cell(path, row, "step", &rec[0])?;
        let method = Method::from_name(&rec[1]).ok_or_else(|| OutputError::Format {
            path: path.to_path_buf(),
            row,
            msg: format!("unknown method {:?}", &rec[1]),
        })?;
        let lambda = match &rec[2] {
            "" => None,
            cell => Some(parse_cell(path, row, "lambda", cell)?),
        };
        let value = parse_cell(path, row, "rmse", &rec[3])?;
        push_step(&mut series, (method, lambda), step, value, path, row)?;
    }
    Ok(series
        .into_iter()
        .map(|((method, lambda), values)| RmseSeries {
            method,
            lambda,
            values,
        })
        .collect())
}

pub fn read_theta_var(path: &Path) -> Result<Vec<VarianceSeries>, OutputError> {
    let mut reader = open_reader(path, &THETA_VAR_HEADER)?;
    let mut series: Vec<(f64, Vec<f64>)> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(csv_err(path))?;
        let step: usize = parse_cell(path, row, "step", &rec[0])?;
        let lambda: f64 = parse_cell(path, row, "lambda", &rec[1])?;
        let value = parse_cell(path, row, "mean_variance", &rec[2])?;
        push_step(&mut series, lambda, step, value, path, row)?;
    }
    Ok(series
        .into_iter()
        .map(|(lambda, values)| VarianceSeries { lambda, values })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rmse() -> Vec<RmseSeries> {
        vec![
            RmseSeries {
                method: Method::Cv,
                lambda: None,
                values: vec![3.5355339059327378, 0.1, 1e-300],
            },
            RmseSeries {
                method: Method::Apbm,
                lambda: Some(0.01),
                values: vec![2.0, 1.0 / 3.0, 7.0],
            },
            RmseSeries {
                method: Method::Apbm,
                lambda: Some(1e12),
                values: vec![0.0, 5.5, 6.25],
            },
        ]
    }

    #[test]
    fn rmse_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(RMSE_FILE);
        let series = sample_rmse();
        write_rmse(&path, &series).unwrap();
        assert_eq!(read_rmse(&path).unwrap(), series);
    }

    #[test]
    fn rmse_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(RMSE_FILE);
        write_rmse(&path, &sample_rmse()).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("step,method,lambda,rmse"));
        assert_eq!(lines.next(), Some("1,cv,,3.5355339059327378"));
        assert!(text.contains("1,apbm,1000000000000,0\n"));
    }

    #[test]
    fn empty_series_gives_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(RMSE_FILE);
        write_rmse(&path, &[]).unwrap();
        assert_eq!(
            fs::read_to_string(&path).unwrap(),
            "step,method,lambda,rmse\n"
        );
        assert!(read_rmse(&path).unwrap().is_empty());
        let path = dir.path().join(THETA_VAR_FILE);
        write_theta_var(&path, &[]).unwrap();
        assert_eq!(
            fs::read_to_string(&path).unwrap(),
            "step,lambda,mean_variance\n"
        );
    }

    #[test]
    fn theta_var_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(THETA_VAR_FILE);
        let series = vec![
            VarianceSeries {
                lambda: 0.0,
                values: vec![0.0, 1e-7, 2.5e-3],
            },
            VarianceSeries {
                lambda: 10.0,
                values: vec![0.0, 3e-9, 4e-5],
            },
        ];
        write_theta_var(&path, &series).unwrap();
        assert_eq!(read_theta_var(&path).unwrap(), series);
    }

    #[test]
    fn malformed_files_are_reported_with_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "step,method,rmse\n1,cv,2\n").unwrap();
        let err = read_rmse(&path).unwrap_err().to_string();
        assert!(
            err.contains("bad.csv") && err.contains("expected header"),
            "{err}"
        );
        fs::write(&path, "step,method,lambda,rmse\n2,cv,,1\n").unwrap();
        assert!(read_rmse(&path)
            .unwrap_err()
            .to_string()
            .contains("out of sequence"));
        let missing = dir.path().join("missing.csv");
        assert!(read_rmse(&missing)
            .unwrap_err()
            .to_string()
            .contains("missing.csv"));
    }

    #[test]
    fn trajectory_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(TRAJECTORY_FILE);
        let truth = SimTruth {
            states: vec![DVector::from_vec(vec![1.0, 2.0, 3.0])],
            omegas: Vec::new(),
            measurements: vec![DVector::from_vec(vec![1.5, 2.5, 3.5])],
            seed: 0,
        };
        let est = vec![DVector::from_vec(vec![0.5, 0.25, 0.125])];
        write_trajectory(&path, &truth, Some(&est)).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "step,truth_0,truth_1,truth_2,meas_0,meas_1,meas_2,est_0,est_1,est_2\n\
             1,1,2,3,1.5,2.5,3.5,0.5,0.25,0.125\n"
        );
    }
}
