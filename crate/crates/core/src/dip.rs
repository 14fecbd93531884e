//! Jitter-averaged HOM dip: central-peak area against period mismatch.
//!
//! `V(δt)` is tabulated once per call as a piecewise Chebyshev interpolant
//! on `[0, reach]` (it is even in `δt` for identical packets and vanishes
//! beyond the packet length), then averaged over the gaussian pair offset.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cheb::{interpolate, ChebPiece};
use crate::emitter::EmitterParams;
use crate::error::{Error, Result};
use crate::interference::{pair_visibility, PairConfig, PairMode, TAIL_MASS};
use crate::packet::{Envelope, JitterSpec, PhotonPacket};
use crate::quadrature::{integrate, QuadratureSpec};
use crate::relations::dephasing_time;
use crate::waveform::{chirp_phase, DriveWaveform, GateWindow};

/// How a fitted coherence time `τ_c` maps onto the emitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CoherenceModel {
    /// Envelope decays with `t1`; the remaining coherence loss is pure
    /// dephasing, `1/τ_c = 1/(2 t1) + γ*`. Requires `τ_c <= 2 t1`.
    Dephased { t1: f64 },
    /// Transform-limited exponential packet whose field decays with `τ_c`:
    /// intensity decay `τ_c / 2`, no pure dephasing.
    LifetimeLimited,
}

impl CoherenceModel {
    pub fn emitter(&self, base: &EmitterParams, tau_c: f64) -> Result<EmitterParams> {
        if !(tau_c > 0.0 && tau_c.is_finite()) {
            return Err(Error::invalid(
                "coherence",
                format!("tau_c must be positive, got {tau_c}"),
            ));
        }
        let (t1, rate) = match *self {
            CoherenceModel::Dephased { t1 } => (t1, 1.0 / dephasing_time(t1, tau_c)?),
            CoherenceModel::LifetimeLimited => (0.5 * tau_c, 0.0),
        };
        EmitterParams::new(
            t1,
            rate,
            base.center_energy,
            base.stark_coefficient,
            base.reference_voltage,
        )
    }

    /// Largest admissible `τ_c`.
    pub fn max_tau_c(&self) -> f64 {
        match *self {
            CoherenceModel::Dephased { t1 } => 2.0 * t1,
            CoherenceModel::LifetimeLimited => f64::INFINITY,
        }
    }
}

/// Everything that fixes the dip shape except the scan points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipModel {
    pub emitter: EmitterParams,
    pub waveform: DriveWaveform,
    /// `None` gives ungated exponential packets.
    pub gate: Option<GateWindow>,
    pub jitter: JitterSpec,
    #[serde(default)]
    pub mode: PairMode,
    #[serde(default)]
    pub chirp_on: bool,
}

impl DipModel {
    pub fn validate(&self) -> Result<()> {
        self.emitter.validate()?;
        self.jitter.validate()
    }

    /// The packet every photon is emitted into, starting at local time 0.
    pub fn packet(&self) -> Result<PhotonPacket> {
        let decay = self.emitter.t1_radiative;
        let envelope = match self.gate {
            Some(gate) => Envelope::GatedExponential { decay, gate },
            None => Envelope::Exponential { decay },
        };
        let packet = PhotonPacket::new(0.0, envelope)?;
        match self.gate {
            Some(gate) if self.chirp_on => packet.with_chirp(chirp_phase(&gate, &self.waveform, &self.emitter)),
            _ => Ok(packet),
        }
    }

    /// Copy with the emitter replaced by `coherence` at `tau_c`.
    pub fn with_coherence(&self, coherence: &CoherenceModel, tau_c: f64) -> Result<Self> {
        Ok(Self {
            emitter: coherence.emitter(&self.emitter, tau_c)?,
            ..self.clone()
        })
    }
}

/// `V(|δt|)` for a fixed packet and dephasing rate.
#[derive(Debug, Clone)]
pub struct VisibilityProfile {
    pieces: Vec<ChebPiece>,
    reach: f64,
}

impl VisibilityProfile {
    pub fn build(model: &DipModel, quad: &QuadratureSpec) -> Result<Self> {
        model.validate()?;
        quad.validate()?;
        let packet = model.packet()?;
        let reach = packet.envelope.extent(TAIL_MASS);
        let kinks: Vec<f64> = packet.phase_kinks();
        let mut breaks = vec![0.0, reach];
        for &k in &kinks {
            breaks.push(k);
            breaks.push(reach - k);
            for &j in &kinks {
                breaks.push((k - j).abs());
            }
        }
        breaks.retain(|&b| (0.0..=reach).contains(&b));
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

        let gamma = model.emitter.dephasing_rate;
        let v = |dt: f64| {
            let cfg = PairConfig {
                packet_a: packet.clone(),
                packet_b: packet.clone(),
                relative_offset: dt,
                dephasing_rate: gamma,
                mode: PairMode::Parallel,
            };
            pair_visibility(&cfg, quad)
        };
        let tol = 100.0 * quad.rel_tol.max(quad.abs_tol);
        let pieces = interpolate(&v, &breaks, tol)?;
        Ok(Self { pieces, reach })
    }

    /// Largest offset at which the packets still overlap.
    pub fn reach(&self) -> f64 {
        self.reach
    }

    pub fn eval(&self, dt: f64) -> f64 {
        self.raw(dt).clamp(0.0, 1.0)
    }

    /// Interpolant without clamping, smooth inside each piece.
    fn raw(&self, dt: f64) -> f64 {
        let x = dt.abs();
        if x >= self.reach {
            return 0.0;
        }
        let idx = self.pieces.partition_point(|p| p.b < x).min(self.pieces.len() - 1);
        self.pieces[idx].eval(x)
    }

    /// Gaussian average of `V` over offsets with mean `mean` and std `sd`.
    pub fn averaged(&self, mean: f64, sd: f64, quad: &QuadratureSpec) -> Result<f64> {
        if sd == 0.0 {
            return Ok(self.eval(mean));
        }
        let lo = (mean - 10.0 * sd).max(-self.reach);
        let hi = (mean + 10.0 * sd).min(self.reach);
        if hi <= lo {
            return Ok(0.0);
        }
        let mut points = vec![lo, hi, 0.0];
        for p in &self.pieces {
            points.extend([p.a, p.b, -p.a, -p.b]);
        }
        points.retain(|&x| x >= lo && x <= hi);
        let norm = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
        let r = integrate(
            |x| {
                let z = (x - mean) / sd;
                self.raw(x) * norm * (-0.5 * z * z).exp()
            },
            &points,
            quad,
        )?;
        Ok(r.value.clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipPoint {
    pub delta: f64,
    pub central_area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipCurve {
    pub points: Vec<DipPoint>,
    pub model: DipModel,
}

impl DipCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta_ps,central_area\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{}", fmt_sig(p.delta), fmt_sig(p.central_area));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn area_at(&self, delta: f64) -> Option<f64> {
        self.points.iter().find(|p| p.delta == delta).map(|p| p.central_area)
    }
}

/// Central-peak area `(1 − E[V(δt)]) / 2` for each mismatch `Δ`, with `δt`
/// gaussian around `Δ` with the pair jitter spread.
pub fn dip_curve(deltas: &[f64], model: &DipModel, quad: &QuadratureSpec) -> Result<DipCurve> {
    model.validate()?;
    if let Some(bad) = deltas.iter().find(|d| !d.is_finite()) {
        return Err(Error::invalid("dip", format!("delta must be finite, got {bad}")));
    }
    if model.mode == PairMode::Orthogonal {
        let points = deltas
            .iter()
            .map(|&delta| DipPoint {
                delta,
                central_area: 0.5,
            })
            .collect();
        return Ok(DipCurve {
            points,
            model: model.clone(),
        });
    }
    let profile = VisibilityProfile::build(model, quad)?;
    let sd = model.jitter.pair_std_dev();
    let points = deltas
        .par_iter()
        .map(|&delta| {
            let v = profile.averaged(delta, sd, quad)?;
            Ok(DipPoint {
                delta,
                central_area: (0.5 * (1.0 - v)).clamp(0.0, 0.5),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DipCurve {
        points,
        model: model.clone(),
    })
}

/// Evenly spaced scan from `min` to `max` inclusive.
pub fn delta_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(max >= min) || !min.is_finite() || !max.is_finite() {
        return Err(Error::invalid(
            "delta grid",
            format!("need min <= max and step > 0, got {min}..{max} by {step}"),
        ));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| min + step * i as f64).collect())
}

/// Decimal rendering with 12 significant digits, trailing zeros removed.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-6..=15).contains(&exp) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::JitterWidth;

    fn lifetime_model(jitter: f64) -> DipModel {
        DipModel {
            emitter: CoherenceModel::LifetimeLimited
                .emitter(&EmitterParams::measured_dot(), 60.0)
                .unwrap(),
            waveform: DriveWaveform::measured_sequence(),
            gate: Some(GateWindow::new(1680.0, 1980.0).unwrap()),
            jitter: JitterSpec {
                sigma: jitter,
                interpretation: JitterWidth::Fwhm,
            },
            mode: PairMode::Parallel,
            chirp_on: false,
        }
    }

    #[test]
    fn pure_packets_without_jitter_have_empty_center() {
        let curve = dip_curve(&[0.0], &lifetime_model(0.0), &QuadratureSpec::default()).unwrap();
        assert!(curve.points[0].central_area < 1e-9);
    }

    #[test]
    fn orthogonal_is_flat() {
        let mut m = lifetime_model(31.0);
        m.mode = PairMode::Orthogonal;
        let curve = dip_curve(&[-100.0, 0.0, 250.0], &m, &QuadratureSpec::default()).unwrap();
        assert!(curve.points.iter().all(|p| p.central_area == 0.5));
    }

    #[test]
    fn profile_matches_direct_quadrature() {
        let quad = QuadratureSpec::default();
        let mut model = lifetime_model(0.0);
        model.emitter.dephasing_rate = 1.0 / 200.0;
        let profile = VisibilityProfile::build(&model, &quad).unwrap();
        let packet = model.packet().unwrap();
        for dt in [0.0, 3.0, 17.5, 60.0, 150.0, 299.0, 310.0] {
            let cfg = PairConfig {
                packet_a: packet.clone(),
                packet_b: packet.clone(),
                relative_offset: dt,
                dephasing_rate: model.emitter.dephasing_rate,
                mode: PairMode::Parallel,
            };
            let direct = pair_visibility(&cfg, &quad).unwrap();
            assert!((profile.eval(dt) - direct).abs() < 1e-8, "dt {dt}");
            assert!((profile.eval(-dt) - direct).abs() < 1e-8);
        }
    }

    #[test]
    fn csv_uses_twelve_significant_digits() {
        assert_eq!(fmt_sig(0.176_012_345_678_9), "0.176012345679");
        assert_eq!(fmt_sig(-400.0), "-400");
        assert_eq!(fmt_sig(0.5), "0.5");
        assert_eq!(fmt_sig(0.0), "0");
        let curve = DipCurve {
            points: vec![DipPoint {
                delta: -10.0,
                central_area: 0.25,
            }],
            model: lifetime_model(0.0),
        };
        assert_eq!(curve.to_csv(), "delta_ps,central_area\n-10,0.25\n");
    }

    #[test]
    fn dephased_coherence_respects_lifetime_limit() {
        let base = EmitterParams::measured_dot();
        let e = CoherenceModel::Dephased { t1: 800.0 }.emitter(&base, 60.0).unwrap();
        assert!((e.coherence_time() - 60.0).abs() < 1e-9);
        assert!(CoherenceModel::Dephased { t1: 800.0 }.emitter(&base, 1700.0).is_err());
        let l = CoherenceModel::LifetimeLimited.emitter(&base, 60.0).unwrap();
        assert_eq!((l.t1_radiative, l.dephasing_rate), (30.0, 0.0));
        assert!((l.coherence_time() - 60.0).abs() < 1e-12);
    }

    #[test]
    fn grid_is_inclusive() {
        assert_eq!(
            delta_grid(-20.0, 20.0, 10.0).unwrap(),
            vec![-20.0, -10.0, 0.0, 10.0, 20.0]
        );
        assert!(delta_grid(1.0, 0.0, 1.0).is_err());
    }
}
