//! Peak areas of correlation histograms and the figures derived from them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dip::fmt_sig;
use crate::error::{Error, Result};
use crate::montecarlo::CorrelationHistogram;

/// Peaks `n ∈ [−PEAK_RANGE, PEAK_RANGE]` are integrated.
pub const PEAK_RANGE: i32 = 6;
/// Peaks whose mean defines unit area.
pub const OUTER_PEAKS: [i32; 10] = [-6, -5, -4, -3, -2, 2, 3, 4, 5, 6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakAreaReport {
    pub period: f64,
    pub window_half_width: f64,
    pub bin_width: f64,
    /// Area of each peak relative to the mean of the outer peaks.
    pub areas: BTreeMap<i32, f64>,
    /// Median counts per bin away from every peak.
    pub baseline_rate: f64,
    /// Counts in each window (baseline-subtracted once corrected).
    pub raw_counts: BTreeMap<i32, f64>,
    /// Bins inside each window.
    pub window_bins: BTreeMap<i32, u64>,
    /// Poisson variance of each window's counts before any correction.
    pub count_variance: BTreeMap<i32, f64>,
    pub dark_corrected: bool,
}

impl PeakAreaReport {
    pub fn area(&self, n: i32) -> f64 {
        self.areas.get(&n).copied().unwrap_or(f64::NAN)
    }

    /// One-sigma counting uncertainty of `area(n)`.
    pub fn area_uncertainty(&self, n: i32) -> f64 {
        let a = self.area(n);
        let raw = self.raw_counts[&n];
        let outer: f64 = OUTER_PEAKS.iter().map(|k| self.raw_counts[k]).sum();
        let outer_var: f64 = OUTER_PEAKS.iter().map(|k| self.count_variance[k]).sum();
        let own = if raw > 0.0 {
            self.count_variance[&n] / (raw * raw)
        } else {
            0.0
        };
        if raw > 0.0 {
            a * (own + outer_var / (outer * outer)).sqrt()
        } else {
            // Empty window: one count sets the scale.
            self.count_variance[&n].max(1.0).sqrt() * OUTER_PEAKS.len() as f64 / outer
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("peak_index,area,raw_counts\n");
        for (n, a) in &self.areas {
            let _ = writeln!(out, "{},{},{}", n, fmt_sig(*a), fmt_sig(self.raw_counts[n]));
        }
        out
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    fn normalized(mut self) -> Result<Self> {
        let outer = OUTER_PEAKS.iter().map(|n| self.raw_counts[n]).sum::<f64>() / OUTER_PEAKS.len() as f64;
        if !(outer > 0.0) {
            return Err(if self.dark_corrected {
                Error::BaselineExceedsSignal {
                    baseline: self.baseline_rate,
                }
            } else {
                Error::DegenerateHistogram
            });
        }
        self.areas = self.raw_counts.iter().map(|(&n, &c)| (n, c / outer)).collect();
        Ok(self)
    }
}

/// Integrates the windows `n·period ± window_half_width` (by bin centre) and
/// normalizes to the mean of the outer ten peaks.
pub fn peak_areas(hist: &CorrelationHistogram, period: f64, window_half_width: f64) -> Result<PeakAreaReport> {
    if !(period > 0.0) {
        return Err(Error::invalid(
            "analysis",
            format!("period must be positive, got {period}"),
        ));
    }
    if !(window_half_width > 0.0 && window_half_width < 0.5 * period) {
        return Err(Error::invalid(
            "analysis",
            format!("window_half_width must lie in (0, period/2), got {window_half_width}"),
        ));
    }
    let required = (PEAK_RANGE as f64 + 0.5) * period;
    if hist.covered_span() < required {
        return Err(Error::InsufficientSpan {
            covered: hist.covered_span(),
            required,
        });
    }

    let mut raw = BTreeMap::new();
    let mut bins = BTreeMap::new();
    for n in -PEAK_RANGE..=PEAK_RANGE {
        raw.insert(n, 0.0);
        bins.insert(n, 0u64);
    }
    let mut outside = Vec::new();
    for (k, &c) in hist.counts.iter().enumerate() {
        let t = hist.bin_center(k);
        let n = (t / period).round();
        if (t - n * period).abs() <= window_half_width {
            let n = n as i32;
            if let Some(r) = raw.get_mut(&n) {
                *r += c as f64;
                *bins.get_mut(&n).expect("same keys") += 1;
            }
        } else {
            outside.push(c);
        }
    }
    outside.sort_unstable();
    let baseline_rate = match outside.len() {
        0 => 0.0,
        m if m % 2 == 1 => outside[m / 2] as f64,
        m => 0.5 * (outside[m / 2 - 1] + outside[m / 2]) as f64,
    };

    PeakAreaReport {
        period,
        window_half_width,
        bin_width: hist.bin_width,
        areas: BTreeMap::new(),
        baseline_rate,
        count_variance: raw.clone(),
        raw_counts: raw,
        window_bins: bins,
        dark_corrected: false,
    }
    .normalized()
}

/// g²(0) of an HBT report: the normalized central area.
pub fn g2_zero(report: &PeakAreaReport) -> f64 {
    report.area(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visibility {
    pub value: f64,
    /// The unclamped estimate fell outside `[0, 1]`.
    pub clamped: bool,
}

/// `1 − area(0) / 0.5`: the fraction of the distinguishable central peak
/// removed by interference.
pub fn visibility_from_areas(report: &PeakAreaReport) -> Visibility {
    let v = 1.0 - report.area(0) / 0.5;
    Visibility {
        value: v.clamp(0.0, 1.0),
        clamped: !(0.0..=1.0).contains(&v),
    }
}

/// Removes the flat accidental floor (`baseline_rate` per bin) from every
/// window and renormalizes.
pub fn correct_dark_counts(report: &PeakAreaReport) -> Result<PeakAreaReport> {
    let mut out = report.clone();
    out.dark_corrected = true;
    for (n, c) in out.raw_counts.iter_mut() {
        *c = (*c - report.baseline_rate * report.window_bins[n] as f64).max(0.0);
    }
    out.normalized()
}
