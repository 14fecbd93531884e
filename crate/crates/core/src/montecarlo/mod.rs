//! Event-level simulation of the pulsed source, the unbalanced
//! Mach-Zehnder interferometer and two detectors.
//!
//! Every random draw comes from a stream keyed by (seed, cycle, purpose), and
//! every detection event is owned by exactly one cycle. Chunks of cycles are
//! simulated independently (re-deriving the few neighbouring cycles they need)
//! and their integer histograms summed, so the result is identical for any
//! number of workers.

mod histogram;
mod streams;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use histogram::{CorrelationHistogram, HistogramMeta};
use streams::{gaussian, poisson};
pub use streams::{sample_phase_trajectory, stream, Purpose};

use crate::emitter::EmitterParams;
use crate::error::{Error, Result};
use crate::interference::{PairMode, TAIL_MASS};
use crate::packet::{Envelope, JitterSpec, Polarization};
use crate::waveform::{chirp_phase, DriveWaveform, GateWindow, PhaseSamples};

const CHUNK_CYCLES: u64 = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSim {
    pub emitter: EmitterParams,
    pub waveform: DriveWaveform,
    pub gate: GateWindow,
    pub jitter: JitterSpec,
    #[serde(default = "one")]
    pub emission_probability: f64,
    /// Mean number of uncorrelated background photons per cycle.
    #[serde(default)]
    pub background_mean: f64,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

impl SourceSim {
    pub fn validate(&self) -> Result<()> {
        self.emitter.validate()?;
        self.jitter.validate()?;
        if !(0.0..=1.0).contains(&self.emission_probability) {
            return Err(Error::invalid(
                "source",
                format!(
                    "emission_probability must be in [0, 1], got {}",
                    self.emission_probability
                ),
            ));
        }
        if !(self.background_mean >= 0.0 && self.background_mean.is_finite()) {
            return Err(Error::invalid(
                "source",
                format!("background_mean must be >= 0, got {}", self.background_mean),
            ));
        }
        if self.gate.t_off > self.waveform.period() + 1e-9 {
            return Err(Error::invalid("source", "gate extends past the drive period"));
        }
        Ok(())
    }

    fn period(&self) -> f64 {
        self.waveform.period()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferometerSim {
    /// Extra delay of the long arm, ps.
    pub delay: f64,
    /// Power fraction sent into the short arm by coupler A.
    #[serde(default = "half")]
    pub split_a: f64,
    /// Power fraction coupler B passes straight through (short arm to D1).
    #[serde(default = "half")]
    pub split_b: f64,
    #[serde(default)]
    pub mode: PairMode,
}

impl InterferometerSim {
    pub fn matched(delay: f64, mode: PairMode) -> Self {
        Self {
            delay,
            split_a: 0.5,
            split_b: 0.5,
            mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("split_a", self.split_a), ("split_b", self.split_b)] {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::invalid(
                    "interferometer",
                    format!("{name} must be in (0, 1), got {r}"),
                ));
            }
        }
        if !(self.delay >= 0.0 && self.delay.is_finite()) {
            return Err(Error::invalid(
                "interferometer",
                format!("delay must be >= 0, got {}", self.delay),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSim {
    pub efficiency: f64,
    /// Dark counts per ps, per detector.
    pub dark_rate: f64,
    pub timing_sigma: f64,
    pub bin_width: f64,
    /// Histogram covers `±span`.
    pub span: f64,
}

impl DetectorSim {
    pub fn ideal(bin_width: f64, span: f64) -> Self {
        Self {
            efficiency: 1.0,
            dark_rate: 0.0,
            timing_sigma: 0.0,
            bin_width,
            span,
        }
    }

    pub fn validate(&self, period: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::invalid(
                "detector",
                format!("efficiency must be in [0, 1], got {}", self.efficiency),
            ));
        }
        if !(self.dark_rate >= 0.0 && self.timing_sigma >= 0.0) {
            return Err(Error::invalid("detector", "dark_rate and timing_sigma must be >= 0"));
        }
        if !(self.bin_width > 0.0) {
            return Err(Error::invalid(
                "detector",
                format!("bin_width must be positive, got {}", self.bin_width),
            ));
        }
        if !(self.span >= 6.0 * period) {
            return Err(Error::invalid(
                "detector",
                format!("span {} ps does not cover six periods ({} ps)", self.span, 6.0 * period),
            ));
        }
        Ok(())
    }
}

/// Accidental floor per window relative to an outer signal peak that makes
/// the normalized central area of an HBT run equal `g2`.
pub fn floor_ratio_for_g2(g2: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&g2) {
        return Err(Error::invalid(
            "calibration",
            format!("g2 must lie in [0, 1), got {g2}"),
        ));
    }
    Ok(g2 / (1.0 - g2))
}

/// Floor ratio that turns a floor-free central area `signal_area` into the
/// raw visibility `raw_visibility`.
pub fn floor_ratio_for_visibility(signal_area: f64, raw_visibility: f64) -> Result<f64> {
    let raw_area = 0.5 * (1.0 - raw_visibility);
    if !(raw_area >= signal_area && raw_area < 1.0) {
        return Err(Error::invalid(
            "calibration",
            format!("raw visibility {raw_visibility} needs central area {raw_area} >= {signal_area}"),
        ));
    }
    Ok((raw_area - signal_area) / (1.0 - raw_area))
}

// With windows of half a period in total, detected signal m per detector and
// slot and uniform events u per detector and cycle, floor/signal is
// (2 m u + u²) / (2 m²).
fn uniform_events_for_floor(ratio: f64, signal_per_detector: f64) -> f64 {
    signal_per_detector * (-1.0 + (1.0 + 2.0 * ratio).sqrt())
}

/// Background photons per cycle giving `g2` at zero delay in an HBT run with
/// emission probability `p`, assuming quarter-period windows that contain the
/// whole signal peak.
pub fn background_mean_for_g2(g2: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid("calibration", format!("p must lie in (0, 1], got {p}")));
    }
    // Detection efficiency scales signal and background alike and cancels.
    Ok(2.0 * uniform_events_for_floor(floor_ratio_for_g2(g2)?, 0.5 * p))
}

/// Dark rate (per ps, per detector) that, on top of the source background,
/// produces the floor ratio `ratio` with quarter-period windows.
pub fn dark_rate_for_floor(ratio: f64, source: &SourceSim, efficiency: f64) -> Result<f64> {
    let m = 0.5 * efficiency * source.emission_probability;
    let u = uniform_events_for_floor(ratio, m);
    let dark = u - 0.5 * efficiency * source.background_mean;
    if dark < 0.0 {
        return Err(Error::invalid(
            "calibration",
            "background alone exceeds the requested floor",
        ));
    }
    Ok(dark / source.period())
}

#[derive(Debug, Clone, Copy)]
struct Emission {
    /// Packet start at the source, ps.
    start: f64,
    long: bool,
    pol: Polarization,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    d1: bool,
    time: f64,
}

/// Immutable per-run state shared by all chunks.
struct Engine<'a> {
    source: &'a SourceSim,
    mz: Option<InterferometerSim>,
    det: &'a DetectorSim,
    seed: u64,
    cycles: u64,
    envelope: Envelope,
    chirp: PhaseSamples,
    jitter_sd: f64,
    pair_reach: f64,
}

impl Engine<'_> {
    fn emission(&self, cycle: u64) -> Option<Emission> {
        let mut rng = stream(self.seed, cycle, Purpose::Source);
        if !rng.random_bool(self.source.emission_probability) {
            return None;
        }
        let start = cycle as f64 * self.source.period() + self.source.gate.t_on + gaussian(&mut rng, self.jitter_sd);
        let (long, pol) = match self.mz {
            Some(mz) => {
                let long = rng.random::<f64>() >= mz.split_a;
                let pol = if long && mz.mode == PairMode::Orthogonal {
                    Polarization::V
                } else {
                    Polarization::H
                };
                (long, pol)
            }
            None => (false, Polarization::H),
        };
        Some(Emission { start, long, pol })
    }

    fn delay(&self) -> f64 {
        self.mz.map_or(0.0, |m| m.delay)
    }

    /// Arrival time of the packet start at coupler B.
    fn arrival(&self, e: &Emission) -> f64 {
        if e.long {
            e.start + self.delay()
        } else {
            e.start
        }
    }

    /// Cycle offset between a long photon and the short photon it meets.
    fn pair_shift(&self) -> i64 {
        (self.delay() / self.source.period()).round() as i64
    }

    /// Interfering partner of the photon emitted in `cycle`, if any.
    fn partner(&self, em: &[Option<Emission>], first: u64, cycle: u64) -> Option<u64> {
        let me = em[(cycle - first) as usize]?;
        let shift = if me.long { self.pair_shift() } else { -self.pair_shift() };
        let best = self.nearest(em, first, &me, cycle as i64 + shift)?;
        let other = em[(best - first) as usize]?;
        let back = if other.long {
            self.pair_shift()
        } else {
            -self.pair_shift()
        };
        (self.nearest(em, first, &other, best as i64 + back) == Some(cycle)).then_some(best)
    }

    fn nearest(&self, em: &[Option<Emission>], first: u64, me: &Emission, around: i64) -> Option<u64> {
        let t = self.arrival(me);
        let mut best: Option<(f64, u64)> = None;
        for c in around - 1..=around + 1 {
            if c < first as i64 || c >= first as i64 + em.len() as i64 {
                continue;
            }
            let c = c as u64;
            let Some(o) = em[(c - first) as usize] else { continue };
            if o.long == me.long || o.pol != me.pol {
                continue;
            }
            let d = (self.arrival(&o) - t).abs();
            if d < self.pair_reach && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, c));
            }
        }
        best.map(|(_, c)| c)
    }

    /// Output port for a photon routed without interference.
    fn classical_port<R: Rng>(&self, rng: &mut R, long: bool) -> bool {
        match self.mz {
            Some(mz) => {
                let straight = rng.random::<f64>() < mz.split_b;
                straight != long
            }
            None => rng.random_bool(0.5),
        }
    }

    fn amplitude_phase(&self, start: f64, t: f64) -> f64 {
        self.chirp.phase_at(t - start)
    }

    /// Detection times and ports for two photons meeting at coupler B.
    fn pair_events<R: Rng>(&self, rng: &mut R, short: &Emission, long: &Emission, out: &mut Vec<(bool, f64)>) {
        let r = self.mz.expect("pairs need an interferometer").split_b;
        let sa = self.arrival(short);
        let sb = self.arrival(long);
        let ua = self.envelope.sample(rng.random());
        let ub = self.envelope.sample(rng.random());
        let (x, y) = if rng.random_bool(0.5) {
            (sa + ua, sb + ub)
        } else {
            (sb + ub, sa + ua)
        };
        let ia = |t: f64| self.envelope.intensity(t - sa);
        let ib = |t: f64| self.envelope.intensity(t - sb);
        // |A|² = a_a(y) a_b(x), |B|² = a_a(x) a_b(y).
        let a2 = ia(y) * ib(x);
        let b2 = ia(x) * ib(y);
        let gamma = self.source.emitter.dephasing_rate;
        let diffusion = (2.0 * gamma * (y - x).abs()).sqrt();
        let dphi_a = self.amplitude_phase(sa, y) - self.amplitude_phase(sa, x) + gaussian(rng, diffusion);
        let dphi_b = self.amplitude_phase(sb, y) - self.amplitude_phase(sb, x) + gaussian(rng, diffusion);
        let cross = 2.0 * (a2 * b2).sqrt() * (dphi_a - dphi_b).cos();
        let t = r * (1.0 - r);
        // Weights for (port of x, port of y): (1,2), (2,1), (1,1), (2,2).
        let w12 = r * r * b2 + (1.0 - r) * (1.0 - r) * a2 - t * cross;
        let w21 = (1.0 - r) * (1.0 - r) * b2 + r * r * a2 - t * cross;
        let w11 = t * (a2 + b2 + cross);
        let total = a2 + b2;
        let u = rng.random::<f64>() * total;
        let (px, py) = if u < w12 {
            (true, false)
        } else if u < w12 + w21 {
            (false, true)
        } else if u < w12 + w21 + w11 {
            (true, true)
        } else {
            (false, false)
        };
        out.push((px, x));
        out.push((py, y));
    }

    /// All detection events owned by `cycle`.
    fn cycle_events(&self, em: &[Option<Emission>], first: u64, cycle: u64, out: &mut Vec<Event>) {
        let mut photons: Vec<(bool, f64)> = Vec::with_capacity(4);
        if let Some(me) = em[(cycle - first) as usize] {
            match self.partner(em, first, cycle) {
                Some(p) if !me.long => {
                    let other = em[(p - first) as usize].expect("partner exists");
                    let mut rng = stream(self.seed, cycle, Purpose::Pair);
                    self.pair_events(&mut rng, &me, &other, &mut photons);
                }
                Some(_) => {}
                None => {
                    let mut rng = stream(self.seed, cycle, Purpose::Route);
                    let t = self.arrival(&me) + self.envelope.sample(rng.random());
                    photons.push((self.classical_port(&mut rng, me.long), t));
                }
            }
        }

        if self.source.background_mean > 0.0 {
            let mut rng = stream(self.seed, cycle, Purpose::Background);
            let n = poisson(&mut rng, self.source.background_mean);
            let period = self.source.period();
            for _ in 0..n {
                let mut t = (cycle as f64 + rng.random::<f64>()) * period;
                let long = self.mz.is_some_and(|mz| rng.random::<f64>() >= mz.split_a);
                if long {
                    t += self.delay();
                }
                photons.push((self.classical_port(&mut rng, long), t));
            }
        }

        let mut rng = stream(self.seed, cycle, Purpose::Detect);
        for (d1, t) in photons {
            if rng.random::<f64>() < self.det.efficiency {
                out.push(Event {
                    d1,
                    time: t + gaussian(&mut rng, self.det.timing_sigma),
                });
            }
        }

        if self.det.dark_rate > 0.0 {
            let mut rng = stream(self.seed, cycle, Purpose::Dark);
            let period = self.source.period();
            for d1 in [true, false] {
                let n = poisson(&mut rng, self.det.dark_rate * period);
                for _ in 0..n {
                    out.push(Event {
                        d1,
                        time: (cycle as f64 + rng.random::<f64>()) * period,
                    });
                }
            }
        }
    }

    fn chunk(&self, c0: u64, c1: u64, template: &CorrelationHistogram) -> Vec<u64> {
        let period = self.source.period();
        let reach = ((self.det.span + self.delay() + self.pair_reach) / period).ceil() as u64 + 2;
        let ev_lo = c0.saturating_sub(reach);
        let ev_hi = (c1 + reach).min(self.cycles);
        let margin = 2 * (self.pair_shift().unsigned_abs() + 1) + 1;
        let em_lo = ev_lo.saturating_sub(margin);
        let em_hi = (ev_hi + margin).min(self.cycles);
        let em: Vec<Option<Emission>> = (em_lo..em_hi).map(|c| self.emission(c)).collect();

        let mut d1 = Vec::new();
        let mut d2 = Vec::new();
        let mut buf = Vec::new();
        for c in ev_lo..ev_hi {
            buf.clear();
            self.cycle_events(&em, em_lo, c, &mut buf);
            for e in &buf {
                if e.d1 {
                    if (c0..c1).contains(&c) {
                        d1.push(e.time);
                    }
                } else {
                    d2.push(e.time);
                }
            }
        }
        d2.sort_by(f64::total_cmp);

        let mut hist = template.clone();
        let span = self.det.span;
        for &t1 in &d1 {
            let lo = d2.partition_point(|&t| t < t1 - span);
            for &t2 in d2[lo..].iter().take_while(|&&t| t <= t1 + span) {
                hist.record(t1 - t2);
            }
        }
        hist.counts
    }

    fn run(&self) -> Result<CorrelationHistogram> {
        let mut hist = CorrelationHistogram::symmetric(self.det.bin_width, self.det.span)?;
        let chunks: Vec<(u64, u64)> = (0..self.cycles.div_ceil(CHUNK_CYCLES))
            .map(|k| (k * CHUNK_CYCLES, ((k + 1) * CHUNK_CYCLES).min(self.cycles)))
            .collect();
        let template = hist.clone();
        let zero = vec![0u64; hist.counts.len()];
        let counts = chunks.par_iter().map(|&(c0, c1)| self.chunk(c0, c1, &template)).reduce(
            || zero.clone(),
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
        hist.add_counts(&counts);
        hist.cycles_simulated = self.cycles;
        hist.seed = self.seed;
        Ok(hist)
    }
}

fn engine<'a>(
    source: &'a SourceSim,
    mz: Option<InterferometerSim>,
    det: &'a DetectorSim,
    cycles: u64,
    seed: u64,
) -> Result<Engine<'a>> {
    source.validate()?;
    det.validate(source.period())?;
    if let Some(mz) = mz {
        mz.validate()?;
    }
    if cycles == 0 {
        return Err(Error::invalid("simulation", "cycles must be at least 1"));
    }
    let envelope = Envelope::GatedExponential {
        decay: source.emitter.t1_radiative,
        gate: source.gate,
    };
    let chirp = chirp_phase(&source.gate, &source.waveform, &source.emitter).rebased(0.0);
    let pair_reach = (envelope.extent(TAIL_MASS) + 10.0 * source.emitter.coherence_time()).min(0.5 * source.period());
    Ok(Engine {
        source,
        mz,
        det,
        seed,
        cycles,
        envelope,
        chirp,
        jitter_sd: source.jitter.std_dev(),
        pair_reach,
    })
}

/// SHA-256 of the canonical JSON of the simulation inputs.
pub fn config_hash<T: Serialize>(kind: &str, config: &T) -> String {
    let mut h = Sha256::new();
    h.update(kind.as_bytes());
    h.update(serde_json::to_vec(config).expect("config serializes"));
    hex::encode(h.finalize())
}

/// Two-photon interference run through the unbalanced interferometer.
pub fn simulate_hom(
    source: &SourceSim,
    mz: &InterferometerSim,
    det: &DetectorSim,
    cycles: u64,
    seed: u64,
) -> Result<CorrelationHistogram> {
    let mut hist = engine(source, Some(*mz), det, cycles, seed)?.run()?;
    hist.config_hash = config_hash("hom", &(source, mz, det, cycles));
    Ok(hist)
}

/// Autocorrelation run: one balanced splitter in front of the detectors.
pub fn simulate_hbt(source: &SourceSim, det: &DetectorSim, cycles: u64, seed: u64) -> Result<CorrelationHistogram> {
    let mut hist = engine(source, None, det, cycles, seed)?.run()?;
    hist.config_hash = config_hash("hbt", &(source, det, cycles));
    Ok(hist)
}
