//! Two-photon coincidence probability at a balanced beam splitter.
//!
//! With `g = sqrt(a1 a2)` and `ψ = φ1 − φ2`, integrating the joint density
//! over both detection times gives `P_c = (1 − I) / 2` where
//!
//! ```text
//! I = ∬ g(t) g(s) cos(ψ(s) − ψ(t)) exp(−2γ*|s − t|) dt ds
//!   = 2 Re ∫ g(t) e^{−iψ(t)} ∫_{s>t} g(s) e^{iψ(s)} e^{−2γ*(s − t)} ds dt.
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::packet::PhotonPacket;
use crate::quadrature::{integrate, QuadratureSpec};

/// Probability mass dropped when an unbounded envelope is truncated.
pub(crate) const TAIL_MASS: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PairMode {
    #[default]
    Parallel,
    Orthogonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairConfig {
    pub packet_a: PhotonPacket,
    pub packet_b: PhotonPacket,
    /// Added to `packet_b`'s emission time, ps.
    pub relative_offset: f64,
    /// γ* shared by both photons, 1/ps.
    pub dephasing_rate: f64,
    pub mode: PairMode,
}

impl PairConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dephasing_rate >= 0.0 && self.dephasing_rate.is_finite()) {
            return Err(Error::invalid(
                "pair",
                format!("dephasing_rate must be >= 0, got {}", self.dephasing_rate),
            ));
        }
        if !self.relative_offset.is_finite() {
            return Err(Error::invalid("pair", "relative_offset must be finite"));
        }
        PhotonPacket::new(0.0, self.packet_a.envelope)?;
        PhotonPacket::new(0.0, self.packet_b.envelope)?;
        Ok(())
    }
}

/// Probability that the two photons leave through different ports.
pub fn coincidence_probability(cfg: &PairConfig, quad: &QuadratureSpec) -> Result<f64> {
    cfg.validate()?;
    quad.validate()?;
    if cfg.mode == PairMode::Orthogonal || cfg.packet_a.polarization != cfg.packet_b.polarization {
        return Ok(0.5);
    }
    let overlap = overlap_integral(cfg, quad)?;
    Ok((0.5 * (1.0 - overlap)).clamp(0.0, 0.5))
}

/// `1 − 2 P_c` for the pair taken with parallel polarization.
pub fn pair_visibility(cfg: &PairConfig, quad: &QuadratureSpec) -> Result<f64> {
    let parallel = PairConfig {
        mode: PairMode::Parallel,
        ..cfg.clone()
    };
    let mut b = parallel;
    b.packet_b.polarization = b.packet_a.polarization;
    Ok(1.0 - 2.0 * coincidence_probability(&b, quad)?)
}

fn overlap_integral(cfg: &PairConfig, quad: &QuadratureSpec) -> Result<f64> {
    let a = &cfg.packet_a;
    let b = cfg.packet_b.shifted(cfg.relative_offset);
    let (a_lo, a_hi) = a.support(TAIL_MASS);
    let (b_lo, b_hi) = b.support(TAIL_MASS);
    let lo = a_lo.max(b_lo);
    let hi = a_hi.min(b_hi);
    if hi <= lo {
        return Ok(0.0);
    }

    let g = |t: f64| (a.intensity(t) * b.intensity(t)).sqrt();
    let chirped = a.has_chirp() || b.has_chirp();
    let psi = |t: f64| a.phase(t) - b.phase(t);
    let mut points = vec![lo, hi];
    points.extend(
        a.phase_kinks()
            .into_iter()
            .chain(b.phase_kinks())
            .filter(|&k| k > lo && k < hi),
    );
    let two_gamma = 2.0 * cfg.dephasing_rate;

    if two_gamma == 0.0 {
        let re = integrate(|t| g(t) * if chirped { psi(t).cos() } else { 1.0 }, &points, quad)?.value;
        let im = if chirped {
            integrate(|t| g(t) * psi(t).sin(), &points, quad)?.value
        } else {
            0.0
        };
        return Ok(re * re + im * im);
    }

    let inner_quad = quad.scaled(0.1);
    let mut failure: Option<Error> = None;
    let mut inner = |t: f64, part: fn(f64) -> f64| -> f64 {
        if failure.is_some() {
            return 0.0;
        }
        let mut pts: Vec<f64> = points.iter().copied().filter(|&p| p > t).collect();
        pts.push(t);
        let res = integrate(
            |s| g(s) * (-two_gamma * (s - t)).exp() * if chirped { part(psi(s)) } else { 1.0 },
            &pts,
            &inner_quad,
        );
        match res {
            Ok(r) => r.value,
            Err(e) => {
                failure = Some(e);
                0.0
            }
        }
    };

    let outer = if chirped {
        integrate(
            |t| {
                let p = psi(t);
                g(t) * (p.cos() * inner(t, f64::cos) + p.sin() * inner(t, f64::sin))
            },
            &points,
            quad,
        )
    } else {
        integrate(|t| g(t) * inner(t, f64::cos), &points, quad)
    };
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(2.0 * outer?.value)
}
