//! Least-squares fit of the dip model to measured central-peak areas.
//!
//! Free parameters are `ln τ_c` and `ln σ`; everything else comes from a
//! fixed [`DipModel`]. The optimizer is Levenberg-Marquardt with Marquardt's
//! diagonal scaling and central-difference Jacobians.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dip::{dip_curve, CoherenceModel, DipModel};
use crate::error::{Error, Result};
use crate::quadrature::QuadratureSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipObservation {
    pub delta: f64,
    pub central_area: f64,
    #[serde(default)]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Weighting {
    /// Explicit weights where given, 1 otherwise.
    #[default]
    Uniform,
    /// Variance proportional to the area, as for counts.
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub coherence: CoherenceModel,
    pub weighting: Weighting,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub quad: QuadratureSpec,
}

impl FitOptions {
    pub fn new(coherence: CoherenceModel) -> Self {
        Self {
            coherence,
            weighting: Weighting::Uniform,
            max_iterations: 200,
            tolerance: 1e-6,
            quad: QuadratureSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub tau_c: f64,
    pub sigma_jitter: f64,
    pub visibility_at_zero: f64,
    /// `sqrt(Σ w r²)` at the optimum.
    pub residual_norm: f64,
    /// One-sigma half-widths from the curvature at the optimum.
    pub tau_c_half_width: f64,
    pub sigma_half_width: f64,
    pub iterations: usize,
    pub converged: bool,
    pub tau_c_pinned: bool,
    pub sigma_pinned: bool,
    /// The data do not constrain both parameters.
    pub degenerate: bool,
}

const TAU_MIN: f64 = 0.1;
const TAU_MAX: f64 = 1e5;
const SIGMA_MIN: f64 = 1e-3;
const SIGMA_MAX: f64 = 1e4;
const LOG_STEP: f64 = 1e-4;

struct Problem<'a> {
    deltas: Vec<f64>,
    targets: Vec<f64>,
    sqrt_w: Vec<f64>,
    geometry: &'a DipModel,
    options: &'a FitOptions,
    lower: [f64; 2],
    upper: [f64; 2],
}

impl Problem<'_> {
    fn model_at(&self, p: [f64; 2]) -> Result<DipModel> {
        let mut m = self.geometry.with_coherence(&self.options.coherence, p[0].exp())?;
        m.jitter.sigma = p[1].exp();
        Ok(m)
    }

    fn predict(&self, p: [f64; 2]) -> Result<Vec<f64>> {
        let curve = dip_curve(&self.deltas, &self.model_at(p)?, &self.options.quad)?;
        Ok(curve.points.iter().map(|q| q.central_area).collect())
    }

    fn residuals(&self, p: [f64; 2]) -> Result<Vec<f64>> {
        Ok(self
            .predict(p)?
            .iter()
            .zip(&self.targets)
            .zip(&self.sqrt_w)
            .map(|((m, d), w)| w * (m - d))
            .collect())
    }

    fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [
            p[0].clamp(self.lower[0], self.upper[0]),
            p[1].clamp(self.lower[1], self.upper[1]),
        ]
    }

    /// Central differences, one-sided against a bound.
    fn jacobian(&self, p: [f64; 2]) -> Result<Vec<[f64; 2]>> {
        let mut cols = [Vec::new(), Vec::new()];
        for (j, col) in cols.iter_mut().enumerate() {
            let mut hi = p;
            let mut lo = p;
            hi[j] = (p[j] + LOG_STEP).min(self.upper[j]);
            lo[j] = (p[j] - LOG_STEP).max(self.lower[j]);
            let rh = self.residuals(hi)?;
            let rl = self.residuals(lo)?;
            let h = hi[j] - lo[j];
            *col = rh.iter().zip(&rl).map(|(a, b)| (a - b) / h).collect();
        }
        Ok((0..self.deltas.len()).map(|i| [cols[0][i], cols[1][i]]).collect())
    }
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn normal_equations(jac: &[[f64; 2]], r: &[f64]) -> ([[f64; 2]; 2], [f64; 2]) {
    let mut a = [[0.0; 2]; 2];
    let mut g = [0.0; 2];
    for (row, ri) in jac.iter().zip(r) {
        for i in 0..2 {
            g[i] += row[i] * ri;
            for j in 0..2 {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    (a, g)
}

fn solve2(a: [[f64; 2]; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let scale = a[0][0].abs() * a[1][1].abs() + a[0][1].abs() * a[1][0].abs();
    if !(det.abs() > 1e-14 * scale) || !det.is_finite() {
        return None;
    }
    Some([
        (b[0] * a[1][1] - b[1] * a[0][1]) / det,
        (a[0][0] * b[1] - a[1][0] * b[0]) / det,
    ])
}

/// Fits `(τ_c, σ)` to the observations, starting from `initial`.
pub fn fit_dip(
    data: &[DipObservation],
    initial: (f64, f64),
    geometry: &DipModel,
    options: &FitOptions,
) -> Result<FitResult> {
    if data.len() < 4 {
        return Err(Error::invalid(
            "fit",
            format!("need at least 4 points, got {}", data.len()),
        ));
    }
    if !(initial.0 > 0.0 && initial.1 > 0.0) {
        return Err(Error::invalid("fit", "initial parameters must be positive"));
    }
    geometry.validate()?;
    // Canonical order makes the result independent of input order.
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| {
        a.delta
            .total_cmp(&b.delta)
            .then(a.central_area.total_cmp(&b.central_area))
            .then(a.weight.unwrap_or(1.0).total_cmp(&b.weight.unwrap_or(1.0)))
    });
    let mut sqrt_w = Vec::with_capacity(sorted.len());
    for o in &sorted {
        if !(o.delta.is_finite() && o.central_area.is_finite()) {
            return Err(Error::invalid("fit", "observations must be finite"));
        }
        let w = match options.weighting {
            Weighting::Uniform => o.weight.unwrap_or(1.0),
            Weighting::Poisson => o.weight.unwrap_or(1.0) / o.central_area.max(1e-3),
        };
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::invalid("fit", format!("weights must be >= 0, got {w}")));
        }
        sqrt_w.push(w.sqrt());
    }

    let tau_max = options.coherence.max_tau_c().min(TAU_MAX);
    let problem = Problem {
        deltas: sorted.iter().map(|o| o.delta).collect(),
        targets: sorted.iter().map(|o| o.central_area).collect(),
        sqrt_w,
        geometry,
        options,
        lower: [TAU_MIN.ln(), SIGMA_MIN.ln()],
        upper: [tau_max.ln(), SIGMA_MAX.ln()],
    };

    let mut p = problem.clamp([initial.0.ln(), initial.1.ln()]);
    let mut r = problem.residuals(p)?;
    let mut c = cost(&r);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < options.max_iterations {
        iterations += 1;
        let jac = problem.jacobian(p)?;
        let (a, g) = normal_equations(&jac, &r);
        if g[0] == 0.0 && g[1] == 0.0 {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = a;
            for i in 0..2 {
                damped[i][i] += lambda * a[i][i].max(1e-12);
            }
            let Some(step) = solve2(damped, [-g[0], -g[1]]) else {
                lambda *= 10.0;
                continue;
            };
            let trial = problem.clamp([p[0] + step[0], p[1] + step[1]]);
            let (rt, ct) = match problem.residuals(trial) {
                Ok(rt) => {
                    let ct = cost(&rt);
                    (rt, ct)
                }
                Err(e) if e.is_numerical() => (Vec::new(), f64::INFINITY),
                Err(e) => return Err(e),
            };
            if ct <= c {
                let moved = (trial[0] - p[0]).abs().max((trial[1] - p[1]).abs());
                let drop = (c - ct) / c.max(f64::MIN_POSITIVE);
                p = trial;
                r = rt;
                c = ct;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if moved < options.tolerance && drop < options.tolerance {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No descent direction left at working precision.
            converged = true;
        }
        if converged {
            break;
        }
    }

    let jac = problem.jacobian(p)?;
    let (a, _) = normal_equations(&jac, &r);
    let dof = (sorted.len() as f64 - 2.0).max(1.0);
    let s2 = c / dof;
    let inv = solve2(a, [1.0, 0.0]).zip(solve2(a, [0.0, 1.0]));
    let (tau_c, sigma) = (p[0].exp(), p[1].exp());
    let (tau_hw, sigma_hw, singular) = match inv {
        Some((c0, c1)) => (
            (s2 * c0[0]).abs().sqrt() * tau_c,
            (s2 * c1[1]).abs().sqrt() * sigma,
            false,
        ),
        None => (f64::INFINITY, f64::INFINITY, true),
    };
    let pinned = |j: usize| (p[j] - problem.lower[j]).abs() < 1e-9 || (p[j] - problem.upper[j]).abs() < 1e-9;
    let tau_c_pinned = pinned(0);
    let sigma_pinned = pinned(1);
    let at_zero = dip_curve(&[0.0], &problem.model_at(p)?, &options.quad)?.points[0].central_area;

    Ok(FitResult {
        tau_c,
        sigma_jitter: sigma,
        visibility_at_zero: (1.0 - 2.0 * at_zero).clamp(0.0, 1.0),
        residual_norm: c.sqrt(),
        tau_c_half_width: tau_hw,
        sigma_half_width: sigma_hw,
        iterations,
        converged,
        tau_c_pinned,
        sigma_pinned,
        degenerate: singular || tau_c_pinned || sigma_pinned || !(tau_hw < tau_c && sigma_hw < sigma.max(1.0) * 1e3),
    })
}

/// Reads `delta_ps,central_area[,weight]` rows; header names are matched
/// case-insensitively and an empty weight cell means "unweighted".
pub fn read_observations(path: &Path) -> Result<Vec<DipObservation>> {
    let bad = |why: String| Error::invalid("fit data", format!("{}: {why}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(str::to_ascii_lowercase)
        .collect();
    if header.len() < 2 || header[0] != "delta_ps" || header[1] != "central_area" {
        return Err(bad(format!(
            "expected header delta_ps,central_area[,weight], got {}",
            header.join(",")
        )));
    }
    let num = |cell: &str, line: usize| {
        cell.parse::<f64>()
            .map_err(|_| bad(format!("line {line}: {cell:?} is not a number")))
    };
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let line = i + 2;
        out.push(DipObservation {
            delta: num(row.get(0).unwrap_or(""), line)?,
            central_area: num(row.get(1).unwrap_or(""), line)?,
            weight: match row.get(2) {
                Some(w) if !w.is_empty() => Some(num(w, line)?),
                _ => None,
            },
        });
    }
    Ok(out)
}

/// Jacobian of the model areas with respect to `(ln τ_c, ln σ)`.
pub fn model_jacobian(
    deltas: &[f64],
    tau_c: f64,
    sigma: f64,
    step: f64,
    geometry: &DipModel,
    options: &FitOptions,
) -> Result<Vec<[f64; 2]>> {
    let problem = Problem {
        deltas: deltas.to_vec(),
        targets: vec![0.0; deltas.len()],
        sqrt_w: vec![1.0; deltas.len()],
        geometry,
        options,
        lower: [f64::NEG_INFINITY; 2],
        upper: [f64::INFINITY; 2],
    };
    let p = [tau_c.ln(), sigma.ln()];
    let mut cols = [Vec::new(), Vec::new()];
    for (j, col) in cols.iter_mut().enumerate() {
        let mut hi = p;
        let mut lo = p;
        hi[j] += step;
        lo[j] -= step;
        let a = problem.predict(hi)?;
        let b = problem.predict(lo)?;
        *col = a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * step)).collect();
    }
    Ok((0..deltas.len()).map(|i| [cols[0][i], cols[1][i]]).collect())
}
