use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dip::fmt_sig;
use crate::error::{Error, Result};

/// Counts of `t(D1) − t(D2)` in bins `[origin + k w, origin + (k+1) w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationHistogram {
    pub bin_width: f64,
    pub origin: f64,
    pub counts: Vec<u64>,
    pub cycles_simulated: u64,
    pub seed: u64,
    pub config_hash: String,
}

/// Everything in a histogram except the counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramMeta {
    pub kind: String,
    pub bin_width: f64,
    pub origin: f64,
    pub bins: usize,
    pub cycles_simulated: u64,
    pub seed: u64,
    pub config_hash: String,
}

impl CorrelationHistogram {
    /// Empty histogram symmetric about zero covering at least `±span`.
    pub fn symmetric(bin_width: f64, span: f64) -> Result<Self> {
        if !(bin_width > 0.0 && span > 0.0) {
            return Err(Error::invalid("histogram", "bin_width and span must be positive"));
        }
        let half = (span / bin_width).ceil() as usize;
        Ok(Self {
            bin_width,
            origin: -(half as f64) * bin_width,
            counts: vec![0; 2 * half],
            cycles_simulated: 0,
            seed: 0,
            config_hash: String::new(),
        })
    }

    pub fn bin_start(&self, k: usize) -> f64 {
        self.origin + self.bin_width * k as f64
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        self.bin_start(k) + 0.5 * self.bin_width
    }

    /// Half-width of the symmetric range covered by the bins.
    pub fn covered_span(&self) -> f64 {
        (-self.origin).min(self.origin + self.bin_width * self.counts.len() as f64)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds one difference; values outside the binned range are dropped.
    #[inline]
    pub fn record(&mut self, diff: f64) {
        let k = ((diff - self.origin) / self.bin_width).floor();
        if k >= 0.0 && (k as usize) < self.counts.len() {
            self.counts[k as usize] += 1;
        }
    }

    pub(crate) fn add_counts(&mut self, other: &[u64]) {
        for (a, b) in self.counts.iter_mut().zip(other) {
            *a += b;
        }
    }

    pub fn meta(&self, kind: &str) -> HistogramMeta {
        HistogramMeta {
            kind: kind.to_string(),
            bin_width: self.bin_width,
            origin: self.origin,
            bins: self.counts.len(),
            cycles_simulated: self.cycles_simulated,
            seed: self.seed,
            config_hash: self.config_hash.clone(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start_ps,counts\n");
        for (k, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{}", fmt_sig(self.bin_start(k)), c);
        }
        out
    }

    /// Writes `<stem>.csv` and the `<stem>.json` sidecar; returns both paths.
    pub fn write(&self, dir: &Path, stem: &str, kind: &str) -> Result<(PathBuf, PathBuf)> {
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&csv, self.to_csv())?;
        std::fs::write(&json, serde_json::to_string_pretty(&self.meta(kind))? + "\n")?;
        Ok((csv, json))
    }

    /// Reads a histogram back from its CSV and sidecar.
    pub fn read(csv: &Path, sidecar: &Path) -> Result<Self> {
        let meta: HistogramMeta = serde_json::from_str(&std::fs::read_to_string(sidecar)?)?;
        let bad = |why: String| Error::UnrecognizedResult(format!("{}: {why}", csv.display()));
        let mut reader = csv::Reader::from_path(csv).map_err(|e| bad(e.to_string()))?;
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| bad(e.to_string()))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if header != ["bin_start_ps", "counts"] {
            return Err(bad("not a histogram CSV".into()));
        }
        let counts = reader
            .records()
            .map(|row| {
                let row = row.map_err(|e| bad(e.to_string()))?;
                row.get(1)
                    .and_then(|c| c.trim().parse::<u64>().ok())
                    .ok_or_else(|| bad(format!("bad histogram row {row:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if counts.len() != meta.bins {
            return Err(Error::UnrecognizedResult(format!(
                "sidecar declares {} bins, CSV has {}",
                meta.bins,
                counts.len()
            )));
        }
        Ok(Self {
            bin_width: meta.bin_width,
            origin: meta.origin,
            counts,
            cycles_simulated: meta.cycles_simulated,
            seed: meta.seed,
            config_hash: meta.config_hash,
        })
    }
}
