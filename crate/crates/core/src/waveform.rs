//! Periodic drive sequence, spectral filter, the time gate they define and the
//! deterministic Stark chirp accumulated inside the gate.

use serde::{Deserialize, Serialize};

use crate::constants::mev_to_rad_per_ps;
use crate::emitter::EmitterParams;
use crate::error::{Error, Result};
use crate::packet::Polarization;

/// One constant-voltage step of the drive sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Volts.
    pub voltage: f64,
    /// Picoseconds.
    pub duration: f64,
}

/// Piecewise-constant periodic voltage sequence. `period` is the repetition
/// period of the source in ps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWaveform")]
pub struct DriveWaveform {
    period: f64,
    segments: Vec<Segment>,
}

#[derive(Deserialize)]
struct RawWaveform {
    period: f64,
    segments: Vec<Segment>,
}

impl TryFrom<RawWaveform> for DriveWaveform {
    type Error = Error;

    fn try_from(raw: RawWaveform) -> Result<Self> {
        build_waveform(&raw.segments, raw.period)
    }
}

/// Relative mismatch allowed between the summed segment durations and the period.
const PERIOD_MATCH_TOL: f64 = 1e-9;

/// Validates and builds a drive sequence from `(voltage, duration)` steps.
pub fn build_waveform(segments: &[Segment], period: f64) -> Result<DriveWaveform> {
    if segments.is_empty() {
        return Err(Error::invalid("waveform", "segment list is empty"));
    }
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::invalid(
            "waveform",
            format!("period must be positive, got {period}"),
        ));
    }
    for (i, s) in segments.iter().enumerate() {
        if !(s.duration > 0.0 && s.duration.is_finite()) {
            return Err(Error::invalid(
                "waveform",
                format!("segment {i} has non-positive duration {}", s.duration),
            ));
        }
        if !s.voltage.is_finite() {
            return Err(Error::invalid("waveform", format!("segment {i} voltage is not finite")));
        }
    }
    let total: f64 = segments.iter().map(|s| s.duration).sum();
    if (total - period).abs() > PERIOD_MATCH_TOL * period {
        return Err(Error::invalid(
            "waveform",
            format!("segment durations sum to {total} ps but the period is {period} ps"),
        ));
    }
    Ok(DriveWaveform {
        period,
        segments: segments.to_vec(),
    })
}

impl DriveWaveform {
    /// The operating sequence: 1.45 V idle, a 300 ps injection pulse, then
    /// 300 ps at 0.61 V below the bias, repeating every 1.98 ns.
    pub fn measured_sequence() -> Self {
        Self::measured_sequence_with_gate(300.0)
    }

    /// Like [`measured_sequence`](Self::measured_sequence) with a different
    /// length for the low-voltage collection step.
    pub fn measured_sequence_with_gate(gate_ps: f64) -> Self {
        let segs = [
            Segment {
                voltage: 1.45,
                duration: 1980.0 - 300.0 - gate_ps,
            },
            Segment {
                voltage: 2.06,
                duration: 300.0,
            },
            Segment {
                voltage: 0.84,
                duration: gate_ps,
            },
        ];
        build_waveform(&segs, 1980.0).expect("valid sequence")
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// `(start, end, voltage)` of every segment within one cycle.
    pub fn spans(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let mut start = 0.0;
        self.segments.iter().map(move |s| {
            let span = (start, start + s.duration, s.voltage);
            start += s.duration;
            span
        })
    }

    /// Voltage at time `t`, periodic with the waveform period.
    pub fn voltage_at(&self, t: f64) -> f64 {
        let local = t.rem_euclid(self.period);
        self.spans()
            .find(|&(_, end, _)| local < end)
            .map(|(_, _, v)| v)
            .unwrap_or_else(|| self.segments[self.segments.len() - 1].voltage)
    }

    /// Same sequence with the first segment stretched so the period becomes
    /// `period`.
    pub fn with_period(&self, period: f64) -> Result<Self> {
        let mut segs = self.segments.clone();
        segs[0].duration += period - self.period;
        build_waveform(&segs, period)
    }
}

/// Ideal top-hat spectral filter followed by a polarizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterWindow {
    /// eV.
    pub center_energy: f64,
    /// eV.
    pub full_width: f64,
    pub polarization: Polarization,
}

impl FilterWindow {
    /// 0.1 meV window at the collection energy.
    pub fn collection() -> Self {
        Self {
            center_energy: crate::emitter::COLLECTION_ENERGY_EV,
            full_width: 1e-4,
            polarization: Polarization::H,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.full_width > 0.0) {
            return Err(Error::invalid(
                "filter",
                format!("full_width must be positive, got {}", self.full_width),
            ));
        }
        Ok(())
    }

    fn passes(&self, energy: f64) -> bool {
        // Absolute slack of 1e-12 eV absorbs rounding at the window edge.
        (energy - self.center_energy).abs() <= 0.5 * self.full_width + 1e-12
    }
}

/// In-cycle interval (ps) during which photons pass the filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateWindow {
    pub t_on: f64,
    pub t_off: f64,
}

impl GateWindow {
    pub fn new(t_on: f64, t_off: f64) -> Result<Self> {
        if !(t_on >= 0.0 && t_on < t_off && t_off.is_finite()) {
            return Err(Error::invalid(
                "gate",
                format!("need 0 <= t_on < t_off, got [{t_on}, {t_off}]"),
            ));
        }
        Ok(Self { t_on, t_off })
    }

    pub fn length(&self) -> f64 {
        self.t_off - self.t_on
    }
}

/// The single in-cycle interval during which the Stark-shifted line lies
/// inside the filter pass band. Adjacent passing segments are merged; an
/// interval touching the end of the cycle is not joined with one at its start.
pub fn collection_gate(waveform: &DriveWaveform, params: &EmitterParams, filter: &FilterWindow) -> Result<GateWindow> {
    filter.validate()?;
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for (start, end, v) in waveform.spans() {
        if !filter.passes(params.stark_energy(v)) {
            continue;
        }
        match intervals.last_mut() {
            Some(last) if (last.1 - start).abs() < 1e-9 => last.1 = end,
            _ => intervals.push((start, end)),
        }
    }
    match intervals.as_slice() {
        [] => Err(Error::EmptyGate),
        [(on, off)] => GateWindow::new(*on, off.min(waveform.period())),
        many => Err(Error::MultipleGates { count: many.len() }),
    }
}

/// A function sampled on a uniform grid, linearly interpolated between samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSamples {
    pub start: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

impl PhaseSamples {
    pub fn end(&self) -> f64 {
        self.start + self.step * (self.values.len() - 1) as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| self.start + self.step * i as f64)
    }

    /// Same samples with the grid moved to begin at `start`.
    pub fn rebased(&self, start: f64) -> Self {
        Self { start, ..self.clone() }
    }

    fn cell(&self, t: f64) -> (usize, f64) {
        let n = self.values.len();
        let x = (t - self.start) / self.step;
        let i = (x.floor().max(0.0) as usize).min(n - 2);
        (i, x - i as f64)
    }

    /// Piecewise-linear value at `t`; outside the grid the end cells are
    /// extrapolated.
    pub fn phase_at(&self, t: f64) -> f64 {
        if self.values.len() == 1 {
            return self.values[0];
        }
        let (i, frac) = self.cell(t);
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }

    /// Slope of the cell containing `t`.
    pub fn slope_at(&self, t: f64) -> f64 {
        if self.values.len() == 1 {
            return 0.0;
        }
        let (i, _) = self.cell(t);
        (self.values[i + 1] - self.values[i]) / self.step
    }

    /// Interior grid times at which the slope of the interpolant changes.
    pub fn kinks(&self) -> Vec<f64> {
        let v = &self.values;
        let mut out = Vec::new();
        for i in 1..v.len().saturating_sub(1) {
            let left = v[i] - v[i - 1];
            let right = v[i + 1] - v[i];
            let scale = left.abs().max(right.abs()).max(1e-300);
            if (right - left).abs() > 1e-9 * scale {
                out.push(self.start + self.step * i as f64);
            }
        }
        out
    }

    pub fn is_identically_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Default grid spacing of [`chirp_phase`] in ps.
pub const CHIRP_GRID_STEP_PS: f64 = 0.25;

/// Deterministic phase (rad) accumulated from the gate opening:
/// φ(t) = (1/ħ) ∫ (E(V(t')) − E₀) dt', sampled every [`CHIRP_GRID_STEP_PS`].
pub fn chirp_phase(gate: &GateWindow, waveform: &DriveWaveform, params: &EmitterParams) -> PhaseSamples {
    chirp_phase_with_step(gate, waveform, params, CHIRP_GRID_STEP_PS)
}

pub fn chirp_phase_with_step(
    gate: &GateWindow,
    waveform: &DriveWaveform,
    params: &EmitterParams,
    max_step: f64,
) -> PhaseSamples {
    let len = gate.length();
    let cells = (len / max_step).ceil().max(1.0) as usize;
    let step = len / cells as f64;
    let spans: Vec<(f64, f64, f64)> = waveform
        .spans()
        .map(|(s, e, v)| (s, e, mev_to_rad_per_ps(params.detuning_mev(v))))
        .collect();
    // Exact integral of the piecewise-constant detuning from t_on to t.
    let phase = |t: f64| -> f64 {
        spans
            .iter()
            .map(|&(s, e, w)| {
                let lo = s.max(gate.t_on);
                let hi = e.min(t);
                if hi > lo {
                    w * (hi - lo)
                } else {
                    0.0
                }
            })
            .sum()
    };
    let values = (0..=cells).map(|i| phase(gate.t_on + step * i as f64)).collect();
    PhaseSamples {
        start: gate.t_on,
        step,
        values,
    }
}
