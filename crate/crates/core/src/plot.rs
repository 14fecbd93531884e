//! Flat, plot-ready CSV from any result file the toolkit writes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::analysis::PeakAreaReport;
use crate::dip::fmt_sig;
use crate::error::{Error, Result};
use crate::montecarlo::CorrelationHistogram;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultKind {
    Histogram,
    DipCurve,
    PeakAreas,
}

fn unrecognized(path: &Path, why: &str) -> Error {
    Error::UnrecognizedResult(format!("{}: {why}", path.display()))
}

fn csv_header(path: &Path) -> Result<Vec<String>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| unrecognized(path, &e.to_string()))?;
    let headers = reader.headers().map_err(|e| unrecognized(path, &e.to_string()))?;
    Ok(headers.iter().map(|h| h.trim().to_ascii_lowercase()).collect())
}

fn histogram_pair(path: &Path) -> Option<(PathBuf, PathBuf)> {
    let csv = path.with_extension("csv");
    let json = path.with_extension("json");
    (csv.exists() && json.exists()).then_some((csv, json))
}

/// Identifies a result file by its header or schema.
pub fn detect(path: &Path) -> Result<ResultKind> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => {
            let header = csv_header(path)?;
            match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
                ["bin_start_ps", "counts"] => Ok(ResultKind::Histogram),
                ["delta_ps", "central_area", ..] => Ok(ResultKind::DipCurve),
                ["peak_index", "area", ..] => Ok(ResultKind::PeakAreas),
                _ => Err(unrecognized(path, "unknown CSV header")),
            }
        }
        Some("json") => {
            let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)
                .map_err(|e| unrecognized(path, &e.to_string()))?;
            if value.get("areas").is_some() && value.get("raw_counts").is_some() {
                Ok(ResultKind::PeakAreas)
            } else if value.get("bins").is_some() && value.get("bin_width").is_some() {
                Ok(ResultKind::Histogram)
            } else {
                Err(unrecognized(path, "unknown JSON schema"))
            }
        }
        _ => Err(unrecognized(path, "expected a .csv or .json result")),
    }
}

fn histogram_plot(path: &Path) -> Result<String> {
    let (csv, json) = histogram_pair(path).ok_or_else(|| unrecognized(path, "histogram needs both .csv and .json"))?;
    let h = CorrelationHistogram::read(&csv, &json)?;
    let mut out = String::from("time_ns,counts\n");
    for (k, c) in h.counts.iter().enumerate() {
        let _ = writeln!(out, "{},{}", fmt_sig(h.bin_center(k) * 1e-3), c);
    }
    Ok(out)
}

fn dip_plot(path: &Path) -> Result<String> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| unrecognized(path, &e.to_string()))?;
    let header = csv_header(path)?;
    let with_err = header.len() >= 3;
    let mut out = String::from(if with_err {
        "delta_ps,central_area,central_area_err\n"
    } else {
        "delta_ps,central_area\n"
    });
    for row in reader.records() {
        let row = row.map_err(|e| unrecognized(path, &e.to_string()))?;
        let cells: Vec<&str> = row.iter().map(str::trim).take(if with_err { 3 } else { 2 }).collect();
        for c in &cells {
            c.parse::<f64>()
                .map_err(|_| unrecognized(path, &format!("non-numeric cell {c:?}")))?;
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

fn peak_plot(path: &Path) -> Result<String> {
    let mut out = String::from("peak_index,area\n");
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        let report: PeakAreaReport = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        for (n, a) in &report.areas {
            let _ = writeln!(out, "{n},{}", fmt_sig(*a));
        }
    } else {
        let mut reader = csv::Reader::from_path(path).map_err(|e| unrecognized(path, &e.to_string()))?;
        for row in reader.records() {
            let row = row.map_err(|e| unrecognized(path, &e.to_string()))?;
            let n: i32 = row[0]
                .trim()
                .parse()
                .map_err(|_| unrecognized(path, "bad peak index"))?;
            let a: f64 = row[1].trim().parse().map_err(|_| unrecognized(path, "bad area"))?;
            let _ = writeln!(out, "{n},{}", fmt_sig(a));
        }
    }
    Ok(out)
}

/// Writes `<stem>_plot.csv` into `out_dir` and returns its path.
pub fn emit_plot_data(input: &Path, out_dir: &Path) -> Result<PathBuf> {
    let body = match detect(input)? {
        ResultKind::Histogram => histogram_plot(input)?,
        ResultKind::DipCurve => dip_plot(input)?,
        ResultKind::PeakAreas => peak_plot(input)?,
    };
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("result");
    let out = out_dir.join(format!("{stem}_plot.csv"));
    std::fs::write(&out, body)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dip_csv_passthrough_normalizes_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("dip.csv");
        std::fs::write(&p, "Delta_ps , Central_Area\n-10, 0.25\n0,0.18\n").unwrap();
        let out = emit_plot_data(&p, dir.path()).unwrap();
        assert_eq!(
            std::fs::read_to_string(out).unwrap(),
            "delta_ps,central_area\n-10,0.25\n0,0.18\n"
        );
    }

    #[test]
    fn histogram_becomes_nanoseconds() {
        let dir = tempfile::tempdir().unwrap();
        let mut h = CorrelationHistogram::symmetric(500.0, 1000.0).unwrap();
        h.counts = vec![1, 2, 3, 4];
        let (csv, _) = h.write(dir.path(), "hist", "hbt").unwrap();
        let out = emit_plot_data(&csv, dir.path()).unwrap();
        assert_eq!(
            std::fs::read_to_string(out).unwrap(),
            "time_ns,counts\n-0.75,1\n-0.25,2\n0.25,3\n0.75,4\n"
        );
    }

    #[test]
    fn unknown_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        std::fs::write(&p, "a,b\n1,2\n").unwrap();
        assert!(matches!(
            emit_plot_data(&p, dir.path()),
            Err(Error::UnrecognizedResult(_))
        ));
        let q = dir.path().join("x.txt");
        std::fs::write(&q, "hello").unwrap();
        assert!(emit_plot_data(&q, dir.path()).is_err());
    }
}
