//! The emitting state: lifetime, dephasing and the linear Stark map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physics of the photon source.
///
/// Times are in ps, `dephasing_rate` (γ*) in 1/ps, `center_energy` in eV at
/// `reference_voltage` (V), and `stark_coefficient` in meV/V.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterParams {
    pub t1_radiative: f64,
    pub dephasing_rate: f64,
    pub center_energy: f64,
    pub stark_coefficient: f64,
    pub reference_voltage: f64,
}

/// Bias at which the line sits at its nominal energy.
pub const DC_BIAS_V: f64 = 1.45;
/// Line energy at the DC bias.
pub const LINE_ENERGY_EV: f64 = 1.31495;
/// Energy at which photons are collected, reached 0.61 V below the bias.
pub const COLLECTION_ENERGY_EV: f64 = 1.31475;
pub const GATE_VOLTAGE_STEP_V: f64 = 0.61;

impl EmitterParams {
    pub fn new(
        t1_radiative: f64,
        dephasing_rate: f64,
        center_energy: f64,
        stark_coefficient: f64,
        reference_voltage: f64,
    ) -> Result<Self> {
        let params = Self {
            t1_radiative,
            dephasing_rate,
            center_energy,
            stark_coefficient,
            reference_voltage,
        };
        params.validate()?;
        Ok(params)
    }

    /// The measured dot: T1 = 800 ps, T2 = 60 ps, and a Stark slope through
    /// (1.45 V, 1.31495 eV) and (0.84 V, 1.31475 eV).
    pub fn measured_dot() -> Self {
        let t1 = 800.0;
        let t2_star = crate::relations::dephasing_time(t1, 60.0).expect("60 ps is below 2*T1");
        Self {
            t1_radiative: t1,
            dephasing_rate: 1.0 / t2_star,
            center_energy: LINE_ENERGY_EV,
            stark_coefficient: calibrated_stark_coefficient(),
            reference_voltage: DC_BIAS_V,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1_radiative > 0.0 && self.t1_radiative.is_finite()) {
            return Err(Error::invalid(
                "emitter",
                format!("t1_radiative must be positive, got {}", self.t1_radiative),
            ));
        }
        if !(self.dephasing_rate >= 0.0 && self.dephasing_rate.is_finite()) {
            return Err(Error::invalid(
                "emitter",
                format!("dephasing_rate must be >= 0, got {}", self.dephasing_rate),
            ));
        }
        if !(self.center_energy > 0.0) {
            return Err(Error::invalid(
                "emitter",
                format!("center_energy must be positive, got {}", self.center_energy),
            ));
        }
        if !self.stark_coefficient.is_finite() || !self.reference_voltage.is_finite() {
            return Err(Error::invalid("emitter", "Stark calibration must be finite"));
        }
        Ok(())
    }

    /// Field coherence time T2, from 1/T2 = 1/(2 T1) + γ*.
    pub fn coherence_time(&self) -> f64 {
        1.0 / (0.5 / self.t1_radiative + self.dephasing_rate)
    }

    /// Line energy (eV) at the given bias.
    pub fn stark_energy(&self, voltage: f64) -> f64 {
        self.center_energy + self.detuning_mev(voltage) * 1e-3
    }

    /// Line detuning from `center_energy` in meV.
    pub fn detuning_mev(&self, voltage: f64) -> f64 {
        self.stark_coefficient * (voltage - self.reference_voltage)
    }
}

/// Slope (meV/V) of the line through the two measured operating points.
pub fn calibrated_stark_coefficient() -> f64 {
    (LINE_ENERGY_EV - COLLECTION_ENERGY_EV) * 1e3 / GATE_VOLTAGE_STEP_V
}

/// Line energy (eV) of `params` at `voltage`.
pub fn stark_energy(voltage: f64, params: &EmitterParams) -> f64 {
    params.stark_energy(voltage)
}
