//! Single-photon temporal amplitudes and emission-time jitter.

use serde::{Deserialize, Serialize};

use crate::constants::FWHM_PER_SIGMA;
use crate::error::{Error, Result};
use crate::waveform::{GateWindow, PhaseSamples};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

/// Convention used to read a quoted gaussian jitter width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JitterWidth {
    StdDev,
    Fwhm,
    /// Half-width of `exp(-t^2 / w^2)`, i.e. `w = sqrt(2) * std`.
    #[default]
    OneOverEHalfWidth,
}

/// Gaussian jitter on the emission time of each photon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterSpec {
    /// ps, read according to `interpretation`.
    pub sigma: f64,
    #[serde(default)]
    pub interpretation: JitterWidth,
}

impl JitterSpec {
    pub fn new(sigma: f64, interpretation: JitterWidth) -> Result<Self> {
        let spec = Self { sigma, interpretation };
        spec.validate()?;
        Ok(spec)
    }

    pub fn none() -> Self {
        Self {
            sigma: 0.0,
            interpretation: JitterWidth::StdDev,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(
                "jitter",
                format!("sigma must be >= 0, got {}", self.sigma),
            ));
        }
        Ok(())
    }

    /// Standard deviation of one photon's emission time.
    pub fn std_dev(&self) -> f64 {
        match self.interpretation {
            JitterWidth::StdDev => self.sigma,
            JitterWidth::Fwhm => self.sigma / FWHM_PER_SIGMA,
            JitterWidth::OneOverEHalfWidth => self.sigma / std::f64::consts::SQRT_2,
        }
    }

    /// Standard deviation of the difference of two independent emission times.
    pub fn pair_std_dev(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.std_dev()
    }
}

/// Intensity envelope `|ζ(u)|²` in the local time `u` of a packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Envelope {
    /// `e^{-u/decay}/decay` for `u >= 0`.
    Exponential { decay: f64 },
    /// The exponential cut to `[0, gate.length()]` and renormalized.
    GatedExponential { decay: f64, gate: GateWindow },
}

impl Envelope {
    pub fn decay(&self) -> f64 {
        match *self {
            Envelope::Exponential { decay } | Envelope::GatedExponential { decay, .. } => decay,
        }
    }

    /// Length of the support, `None` when unbounded.
    pub fn length(&self) -> Option<f64> {
        match self {
            Envelope::Exponential { .. } => None,
            Envelope::GatedExponential { gate, .. } => Some(gate.length()),
        }
    }

    pub fn intensity(&self, u: f64) -> f64 {
        match *self {
            Envelope::Exponential { decay } => {
                if u < 0.0 {
                    0.0
                } else {
                    (-u / decay).exp() / decay
                }
            }
            Envelope::GatedExponential { decay, gate } => {
                let len = gate.length();
                if !(0.0..=len).contains(&u) {
                    0.0
                } else {
                    (-u / decay).exp() / (decay * -(-len / decay).exp_m1())
                }
            }
        }
    }

    /// Local time beyond which at most `tail_mass` of the probability lies.
    pub fn extent(&self, tail_mass: f64) -> f64 {
        match self.length() {
            Some(len) => len,
            None => self.decay() * (1.0 / tail_mass).ln().max(0.0),
        }
    }

    /// Probability beyond local time `u`.
    pub fn tail_mass(&self, u: f64) -> f64 {
        match *self {
            Envelope::Exponential { decay } => (-u.max(0.0) / decay).exp(),
            Envelope::GatedExponential { decay, gate } => {
                let len = gate.length();
                if u >= len {
                    0.0
                } else {
                    let u = u.max(0.0);
                    ((-u / decay).exp() - (-len / decay).exp()) / -(-len / decay).exp_m1()
                }
            }
        }
    }

    /// Inverse-CDF sample from a uniform `p` in `[0, 1)`.
    pub fn sample(&self, p: f64) -> f64 {
        match *self {
            Envelope::Exponential { decay } => -decay * (-p).ln_1p(),
            Envelope::GatedExponential { decay, gate } => {
                let span = -(-gate.length() / decay).exp_m1();
                -decay * (-p * span).ln_1p()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.decay() > 0.0 && self.decay().is_finite()) {
            return Err(Error::invalid(
                "envelope",
                format!("decay must be positive, got {}", self.decay()),
            ));
        }
        Ok(())
    }
}

/// One photon's temporal mode.
///
/// The envelope starts at `emission_time` (the gate opening for gated packets);
/// jitter shifts this time. `chirp` is the deterministic phase in local time,
/// sampled from `u = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonPacket {
    pub emission_time: f64,
    pub envelope: Envelope,
    pub chirp: Option<PhaseSamples>,
    pub polarization: Polarization,
}

impl PhotonPacket {
    pub fn new(emission_time: f64, envelope: Envelope) -> Result<Self> {
        envelope.validate()?;
        Ok(Self {
            emission_time,
            envelope,
            chirp: None,
            polarization: Polarization::H,
        })
    }

    pub fn with_chirp(mut self, chirp: PhaseSamples) -> Result<Self> {
        if !(chirp.step > 0.0) || chirp.values.is_empty() {
            return Err(Error::invalid(
                "chirp",
                "grid must be non-empty and strictly increasing",
            ));
        }
        self.chirp = Some(chirp.rebased(0.0));
        Ok(self)
    }

    pub fn with_polarization(mut self, polarization: Polarization) -> Self {
        self.polarization = polarization;
        self
    }

    pub fn shifted(&self, dt: f64) -> Self {
        Self {
            emission_time: self.emission_time + dt,
            ..self.clone()
        }
    }

    pub fn intensity(&self, t: f64) -> f64 {
        self.envelope.intensity(t - self.emission_time)
    }

    pub fn phase(&self, t: f64) -> f64 {
        self.chirp.as_ref().map_or(0.0, |c| c.phase_at(t - self.emission_time))
    }

    pub fn has_chirp(&self) -> bool {
        self.chirp.as_ref().is_some_and(|c| !c.is_identically_zero())
    }

    /// Absolute support, truncated so that at most `tail_mass` is dropped.
    pub fn support(&self, tail_mass: f64) -> (f64, f64) {
        (self.emission_time, self.emission_time + self.envelope.extent(tail_mass))
    }

    /// Absolute times inside the support where the phase has a kink.
    pub fn phase_kinks(&self) -> Vec<f64> {
        self.chirp
            .as_ref()
            .map(|c| c.kinks().into_iter().map(|k| k + self.emission_time).collect())
            .unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, QuadratureSpec};

    #[test]
    fn jitter_conventions() {
        let j = |i| JitterSpec {
            sigma: 31.0,
            interpretation: i,
        };
        assert_eq!(j(JitterWidth::StdDev).std_dev(), 31.0);
        assert!((j(JitterWidth::Fwhm).std_dev() - 13.164_5).abs() < 1e-3);
        assert!((j(JitterWidth::OneOverEHalfWidth).std_dev() - 21.920_3).abs() < 1e-3);
        assert!((j(JitterWidth::StdDev).pair_std_dev() - 43.840_6).abs() < 1e-3);
        assert_eq!(JitterWidth::default(), JitterWidth::OneOverEHalfWidth);
        assert!(JitterSpec::new(-1.0, JitterWidth::StdDev).is_err());
    }

    #[test]
    fn gated_envelope_is_normalized() {
        let quad = QuadratureSpec::default();
        for (decay, len) in [(800.0, 300.0), (30.0, 300.0), (5.0, 31.0), (1e4, 10.0)] {
            let env = Envelope::GatedExponential {
                decay,
                gate: GateWindow::new(100.0, 100.0 + len).unwrap(),
            };
            let norm = integrate(|u| env.intensity(u), &[0.0, len], &quad).unwrap();
            assert!(
                (norm.value - 1.0).abs() < 1e-9,
                "decay {decay} len {len}: {}",
                norm.value
            );
        }
    }

    #[test]
    fn exponential_tail_and_sample_agree() {
        let env = Envelope::Exponential { decay: 800.0 };
        assert!((env.tail_mass(800.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((env.sample(1.0 - (-1.0f64).exp()) - 800.0).abs() < 1e-9);
        let gated = Envelope::GatedExponential {
            decay: 30.0,
            gate: GateWindow::new(0.0, 60.0).unwrap(),
        };
        let u = gated.sample(0.5);
        assert!((gated.tail_mass(u) - 0.5).abs() < 1e-12);
        assert!(gated.sample(0.999_999_999) <= 60.0);
    }

    #[test]
    fn bad_decay_rejected() {
        assert!(PhotonPacket::new(0.0, Envelope::Exponential { decay: 0.0 }).is_err());
    }
}
