//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::path::Path;
use std::time::Instant;

use diode_hom::analysis::{
    correct_dark_counts, g2_zero, peak_areas, visibility_from_areas, PeakAreaReport, OUTER_PEAKS,
};
use diode_hom::config::RunConfig;
use diode_hom::dip::{delta_grid, dip_curve, DipModel};
use diode_hom::fit::{fit_dip, DipObservation, FitOptions};
use diode_hom::interference::{pair_visibility, PairConfig, PairMode};
use diode_hom::montecarlo::{
    background_mean_for_g2, dark_rate_for_floor, floor_ratio_for_visibility, simulate_hbt, simulate_hom,
    CorrelationHistogram,
};
use diode_hom::packet::{Envelope, PhotonPacket};
use diode_hom::quadrature::QuadratureSpec;
use diode_hom::relations::{dephasing_time, fixed_bias_visibility};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

const CYCLES: u64 = 1_000_000;

type Outcome = Result<String, String>;

fn measured() -> RunConfig {
    RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/measured.json"))
        .expect("measured config loads")
}

fn dark_free(cfg: &RunConfig) -> RunConfig {
    let mut cfg = cfg.clone();
    cfg.detector.dark_rate = 0.0;
    cfg
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn hom_report(cfg: &RunConfig, mode: PairMode, cycles: u64, seed: u64) -> PeakAreaReport {
    let hist = hom_histogram(cfg, mode, cycles, seed);
    peak_areas(&hist, cfg.waveform.period(), cfg.window_half_width()).unwrap()
}

fn hom_histogram(cfg: &RunConfig, mode: PairMode, cycles: u64, seed: u64) -> CorrelationHistogram {
    let mz = cfg.interferometer(mode == PairMode::Orthogonal);
    simulate_hom(&cfg.source_sim().unwrap(), &mz, &cfg.detector, cycles, seed).unwrap()
}

fn within_sigmas(report: &PeakAreaReport, n: i32, expected: f64, k: f64) -> bool {
    (report.area(n) - expected).abs() <= k * report.area_uncertainty(n)
}

fn closed_form_relations() -> Outcome {
    let t2_star = dephasing_time(800.0, 60.0).map_err(|e| e.to_string())?;
    let v = fixed_bias_visibility(800.0, 60.0).map_err(|e| e.to_string())?;
    check(
        (t2_star - 62.3).abs() <= 0.5 && v == 0.0375,
        format!("T2* = {t2_star:.3} ps, T2/2T1 = {v}"),
    )
}

fn quadrature_identity() -> Outcome {
    let t1 = 800.0;
    let quad = QuadratureSpec::default();
    let mut worst: f64 = 0.0;
    for gamma_star in [0.0, 1.0 / 500.0, 1.0 / 62.34, 1.0 / 10.0] {
        let packet = PhotonPacket::new(0.0, Envelope::Exponential { decay: t1 }).unwrap();
        let cfg = PairConfig {
            packet_a: packet.clone(),
            packet_b: packet,
            relative_offset: 0.0,
            dephasing_rate: gamma_star,
            mode: PairMode::Parallel,
        };
        let v = pair_visibility(&cfg, &quad).map_err(|e| e.to_string())?;
        let gamma = 1.0 / t1;
        let oracle = gamma / (gamma + 2.0 * gamma_star);
        let t2 = 1.0 / (0.5 * gamma + gamma_star);
        if (oracle - t2 / (2.0 * t1)).abs() > 1e-12 {
            return Err(format!("oracle forms disagree at gamma* = {gamma_star}"));
        }
        worst = worst.max((v - oracle).abs());
    }
    check(worst < 1e-6, format!("max |V - G/(G+2g*)| = {worst:.2e}"))
}

fn peak_combinatorics(cfg: &RunConfig) -> Outcome {
    let r = hom_report(&dark_free(cfg), PairMode::Orthogonal, CYCLES, cfg.simulation.seed);
    let expected = |n: i32| match n.abs() {
        0 => 0.5,
        1 => 0.75,
        _ => 1.0,
    };
    let bad: Vec<i32> = r
        .areas
        .keys()
        .copied()
        .filter(|&n| !within_sigmas(&r, n, expected(n), 3.0))
        .collect();
    check(
        bad.is_empty(),
        format!(
            "areas 0: {:.4}±{:.4}, -1: {:.4}, +1: {:.4}; outside 3σ: {bad:?}",
            r.area(0),
            r.area_uncertainty(0),
            r.area(-1),
            r.area(1)
        ),
    )
}

fn cross_oracle(cfg: &RunConfig) -> Outcome {
    let cfg = dark_free(cfg);
    let r = hom_report(&cfg, PairMode::Parallel, CYCLES, cfg.simulation.seed);
    let analytic = dip_curve(&[0.0], &cfg.dip_model(false).unwrap(), &cfg.quadrature)
        .unwrap()
        .points[0]
        .central_area;
    let z = (r.area(0) - analytic) / r.area_uncertainty(0);
    check(
        z.abs() <= 3.0,
        format!(
            "MC {:.5}±{:.5} vs analytic {analytic:.5} ({z:+.2}σ)",
            r.area(0),
            r.area_uncertainty(0)
        ),
    )
}

fn dip_band(cfg: &RunConfig) -> Outcome {
    let model = cfg.dip_model(false).unwrap();
    let deltas = delta_grid(-400.0, 400.0, 5.0).unwrap();
    let curve = dip_curve(&deltas, &model, &cfg.quadrature).map_err(|e| e.to_string())?;
    let areas: Vec<f64> = curve.points.iter().map(|p| p.central_area).collect();
    let v0 = 1.0 - 2.0 * curve.area_at(0.0).unwrap();
    let asym = areas
        .iter()
        .zip(areas.iter().rev())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mid = areas.len() / 2;
    let monotone =
        areas[mid..].windows(2).all(|w| w[1] >= w[0] - 1e-9) && areas[..=mid].windows(2).all(|w| w[1] <= w[0] + 1e-9);
    check(
        (0.55..=0.75).contains(&v0) && asym <= 1e-3 && monotone,
        format!("V(0) = {v0:.4}, max asymmetry {asym:.1e}, monotone in |Δ|: {monotone}"),
    )
}

fn chirp_negligible(cfg: &RunConfig) -> Outcome {
    let deltas = delta_grid(-400.0, 400.0, 10.0).unwrap();
    let on = cfg.dip_model(false).unwrap();
    let off = DipModel {
        chirp_on: false,
        ..on.clone()
    };
    let a = dip_curve(&deltas, &on, &cfg.quadrature).map_err(|e| e.to_string())?;
    let b = dip_curve(&deltas, &off, &cfg.quadrature).map_err(|e| e.to_string())?;
    let diff = a
        .points
        .iter()
        .zip(&b.points)
        .map(|(p, q)| (p.central_area - q.central_area).abs())
        .fold(0.0, f64::max);
    check(diff < 0.01, format!("max |on - off| = {diff:.2e}"))
}

fn g2_pipeline(cfg: &RunConfig) -> Outcome {
    let mut cfg = dark_free(cfg);
    let target = 0.03;
    cfg.simulation.background_mean = background_mean_for_g2(target, cfg.simulation.emission_probability).unwrap();
    let hist = simulate_hbt(&cfg.source_sim().unwrap(), &cfg.detector, CYCLES, cfg.simulation.seed).unwrap();
    let r = peak_areas(&hist, cfg.waveform.period(), cfg.window_half_width()).unwrap();
    let g2 = g2_zero(&r);
    let uneven: Vec<i32> = r
        .areas
        .keys()
        .copied()
        .filter(|&n| n != 0 && !within_sigmas(&r, n, 1.0, 3.0))
        .collect();
    check(
        (g2 - target).abs() <= 0.01 && uneven.is_empty(),
        format!(
            "g2(0) = {g2:.4}±{:.4}; side peaks outside 3σ of 1: {uneven:?}",
            r.area_uncertainty(0)
        ),
    )
}

fn dark_round_trip(cfg: &RunConfig) -> Outcome {
    let clean_cfg = dark_free(cfg);
    let seed = cfg.simulation.seed;
    let clean = hom_report(&clean_cfg, PairMode::Parallel, CYCLES, seed);
    let v_clean = visibility_from_areas(&clean).value;

    let analytic = dip_curve(&[0.0], &clean_cfg.dip_model(false).unwrap(), &clean_cfg.quadrature)
        .unwrap()
        .points[0]
        .central_area;
    let ratio = floor_ratio_for_visibility(analytic, 0.60).unwrap();
    let mut noisy_cfg = clean_cfg.clone();
    noisy_cfg.detector.dark_rate =
        dark_rate_for_floor(ratio, &noisy_cfg.source_sim().unwrap(), noisy_cfg.detector.efficiency).unwrap();
    let noisy = hom_report(&noisy_cfg, PairMode::Parallel, CYCLES, seed.wrapping_add(1));
    let v_raw = visibility_from_areas(&noisy).value;
    let corrected = correct_dark_counts(&noisy).map_err(|e| e.to_string())?;
    let v_corr = visibility_from_areas(&corrected).value;
    check(
        (v_raw - 0.60).abs() <= 0.02 && (v_corr - 0.64).abs() <= 0.02 && (v_corr - v_clean).abs() <= 0.02,
        format!("raw {v_raw:.4} -> corrected {v_corr:.4} (dark-free {v_clean:.4})"),
    )
}

fn fit_round_trip(cfg: &RunConfig) -> Outcome {
    let (coherence, _) = cfg.fit_coherence();
    let options = FitOptions::new(coherence);
    let geometry = cfg.dip_model(false).unwrap();
    let deltas = delta_grid(-400.0, 400.0, 10.0).unwrap();
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let (mut clean_worst, mut noisy_worst): (f64, f64) = (0.0, 0.0);
    for tau in [30.0, 60.0, 120.0] {
        for sigma in [10.0, 31.0, 60.0] {
            let mut m = geometry.with_coherence(&coherence, tau).unwrap();
            m.jitter.sigma = sigma;
            let curve = dip_curve(&deltas, &m, &options.quad).map_err(|e| e.to_string())?;
            let clean: Vec<DipObservation> = curve
                .points
                .iter()
                .map(|p| DipObservation {
                    delta: p.delta,
                    central_area: p.central_area,
                    weight: None,
                })
                .collect();
            let noisy: Vec<DipObservation> = clean
                .iter()
                .map(|o| DipObservation {
                    central_area: o.central_area * (1.0 + 0.01 * noise.sample(&mut rng)),
                    ..*o
                })
                .collect();
            let err = |data: &[DipObservation]| -> Result<f64, String> {
                let f = fit_dip(data, (50.0, 25.0), &geometry, &options).map_err(|e| e.to_string())?;
                Ok((f.tau_c / tau - 1.0).abs().max((f.sigma_jitter / sigma - 1.0).abs()))
            };
            clean_worst = clean_worst.max(err(&clean)?);
            noisy_worst = noisy_worst.max(err(&noisy)?);
        }
    }
    check(
        clean_worst < 1e-3 && noisy_worst < 0.05,
        format!("worst relative error: noiseless {clean_worst:.1e}, 1% noise {noisy_worst:.3}"),
    )
}

fn determinism(cfg: &RunConfig) -> Outcome {
    let runs: Vec<(String, String)> = [1, 4, 8]
        .iter()
        .map(|&threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let hist = hom_histogram(cfg, PairMode::Parallel, 200_000, cfg.simulation.seed);
                let report = peak_areas(&hist, cfg.waveform.period(), cfg.window_half_width()).unwrap();
                (hist.to_csv(), serde_json::to_string(&report).unwrap())
            })
        })
        .collect();
    let same = runs.windows(2).all(|w| w[0] == w[1]);
    check(same, format!("1/4/8 workers byte-identical: {same}"))
}

fn main() {
    let cfg = measured();
    assert_eq!(OUTER_PEAKS.len(), 10);
    let criteria: [(&str, &dyn Fn() -> Outcome); 10] = [
        ("closed-form relations", &closed_form_relations),
        ("quadrature identity", &quadrature_identity),
        ("peak combinatorics", &|| peak_combinatorics(&cfg)),
        ("cross-oracle agreement", &|| cross_oracle(&cfg)),
        ("dip reproduction", &|| dip_band(&cfg)),
        ("chirp negligibility", &|| chirp_negligible(&cfg)),
        ("g2(0) pipeline", &|| g2_pipeline(&cfg)),
        ("dark-count correction round trip", &|| dark_round_trip(&cfg)),
        ("fit round trip", &|| fit_round_trip(&cfg)),
        ("determinism", &|| determinism(&cfg)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "criterion {:>2} {tag} {name}: {detail} [{:.1} s]",
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
