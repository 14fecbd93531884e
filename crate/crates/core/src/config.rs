//! JSON run configuration shared by every command-line subcommand.
//!
//! Units are fixed: ps, V, eV, meV/V, and 1/ps for rates.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dip::{CoherenceModel, DipModel};
use crate::emitter::EmitterParams;
use crate::error::{Error, Result};
use crate::interference::PairMode;
use crate::montecarlo::{DetectorSim, InterferometerSim, SourceSim};
use crate::packet::JitterSpec;
use crate::quadrature::QuadratureSpec;
use crate::waveform::{collection_gate, DriveWaveform, FilterWindow, GateWindow};

/// Coherence time plus the model that turns it into emitter parameters.
/// When present it overrides `emitter.t1_radiative` and `emitter.dephasing_rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceConfig {
    #[serde(flatten)]
    pub model: CoherenceModel,
    pub tau_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub cycles: u64,
    pub seed: u64,
    #[serde(default = "one")]
    pub emission_probability: f64,
    #[serde(default)]
    pub background_mean: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Defaults to a quarter period.
    #[serde(default)]
    pub window_half_width: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipScanConfig {
    pub delta_min: f64,
    pub delta_max: f64,
    pub delta_step: f64,
    #[serde(default)]
    pub chirp_on: bool,
}

impl Default for DipScanConfig {
    fn default() -> Self {
        Self {
            delta_min: -400.0,
            delta_max: 400.0,
            delta_step: 10.0,
            chirp_on: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub emitter: EmitterParams,
    #[serde(default)]
    pub coherence: Option<CoherenceConfig>,
    pub waveform: DriveWaveform,
    pub filter: FilterWindow,
    pub jitter: JitterSpec,
    pub interferometer: InterferometerSim,
    pub detector: DetectorSim,
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub dip: DipScanConfig,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub outputs: OutputConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.effective_emitter()?;
        self.jitter.validate()?;
        self.filter.validate()?;
        self.interferometer.validate()?;
        self.detector.validate(self.waveform.period())?;
        self.quadrature.validate()?;
        self.source_sim()?.validate()?;
        let w = self.window_half_width();
        if !(w > 0.0 && w < 0.5 * self.waveform.period()) {
            return Err(Error::invalid(
                "analysis",
                format!("window_half_width must lie in (0, period/2), got {w}"),
            ));
        }
        if self.simulation.cycles == 0 {
            return Err(Error::invalid("simulation", "cycles must be at least 1"));
        }
        Ok(())
    }

    /// Emitter with the coherence section applied.
    pub fn effective_emitter(&self) -> Result<EmitterParams> {
        self.emitter.validate()?;
        match self.coherence {
            Some(c) => c.model.emitter(&self.emitter, c.tau_c),
            None => Ok(self.emitter),
        }
    }

    pub fn gate(&self) -> Result<GateWindow> {
        collection_gate(&self.waveform, &self.effective_emitter()?, &self.filter)
    }

    pub fn source_sim(&self) -> Result<SourceSim> {
        Ok(SourceSim {
            emitter: self.effective_emitter()?,
            waveform: self.waveform.clone(),
            gate: self.gate()?,
            jitter: self.jitter,
            emission_probability: self.simulation.emission_probability,
            background_mean: self.simulation.background_mean,
        })
    }

    pub fn interferometer(&self, orthogonal: bool) -> InterferometerSim {
        let mut mz = self.interferometer;
        if orthogonal {
            mz.mode = PairMode::Orthogonal;
        }
        mz
    }

    pub fn dip_model(&self, orthogonal: bool) -> Result<DipModel> {
        Ok(DipModel {
            emitter: self.effective_emitter()?,
            waveform: self.waveform.clone(),
            gate: Some(self.gate()?),
            jitter: self.jitter,
            mode: if orthogonal {
                PairMode::Orthogonal
            } else {
                self.interferometer.mode
            },
            chirp_on: self.dip.chirp_on,
        })
    }

    pub fn window_half_width(&self) -> f64 {
        self.analysis.window_half_width.unwrap_or(0.25 * self.waveform.period())
    }

    /// The coherence model a fit should use, with its starting `τ_c`.
    pub fn fit_coherence(&self) -> (CoherenceModel, f64) {
        match self.coherence {
            Some(c) => (c.model, c.tau_c),
            None => {
                let e = self.emitter;
                (CoherenceModel::Dephased { t1: e.t1_radiative }, e.coherence_time())
            }
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
