//! Piecewise Chebyshev interpolation of expensive smooth functions.

use rayon::prelude::*;

use crate::error::{Error, Result};

const START_CELLS: usize = 16;
const MAX_CELLS: usize = 256;
const MAX_DEPTH: u32 = 10;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ChebPiece {
    pub a: f64,
    pub b: f64,
    coeffs: Vec<f64>,
}

impl ChebPiece {
    /// Clenshaw evaluation; `x` is clamped into `[a, b]`.
    pub fn eval(&self, x: f64) -> f64 {
        let u = (2.0 * x.clamp(self.a, self.b) - self.a - self.b) / (self.b - self.a);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * u * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        u * b1 - b2 + self.coeffs[0]
    }
}

/// Lobatto nodes `cos(πj/n)` mapped to `[a, b]`, ordered as `j = 0..=n`.
fn nodes(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|j| {
            let c = (std::f64::consts::PI * j as f64 / n as f64).cos();
            0.5 * (a + b) + 0.5 * (b - a) * c
        })
        .collect()
}

fn coefficients(values: &[f64]) -> Vec<f64> {
    let n = values.len() - 1;
    (0..=n)
        .map(|k| {
            let mut s = 0.0;
            for (j, &f) in values.iter().enumerate() {
                let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                s += w * f * (std::f64::consts::PI * (j * k) as f64 / n as f64).cos();
            }
            let c = 2.0 * s / n as f64;
            if k == 0 || k == n {
                0.5 * c
            } else {
                c
            }
        })
        .collect()
}

fn eval_all<F>(f: &F, xs: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    xs.par_iter().map(|&x| f(x)).collect()
}

/// Interpolates `f` on each interval between consecutive `breaks`, doubling
/// the node count until the trailing coefficients fall below `tol`, and
/// bisecting intervals that do not resolve.
pub(crate) fn interpolate<F>(f: &F, breaks: &[f64], tol: f64) -> Result<Vec<ChebPiece>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let mut out = Vec::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            fit(f, w[0], w[1], tol, 0, &mut out)?;
        }
    }
    Ok(out)
}

fn fit<F>(f: &F, a: f64, b: f64, tol: f64, depth: u32, out: &mut Vec<ChebPiece>) -> Result<()>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let mut n = START_CELLS;
    let mut values = eval_all(f, &nodes(a, b, n))?;
    loop {
        let coeffs = coefficients(&values);
        let scale = coeffs.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        let tail = coeffs[n - 2..].iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if tail <= tol * scale {
            out.push(ChebPiece { a, b, coeffs });
            return Ok(());
        }
        if n >= MAX_CELLS {
            break;
        }
        // Old nodes are the even-indexed nodes of the doubled set.
        let fresh: Vec<f64> = nodes(a, b, 2 * n).into_iter().skip(1).step_by(2).collect();
        let fresh_values = eval_all(f, &fresh)?;
        let mut merged = Vec::with_capacity(2 * n + 1);
        for j in 0..n {
            merged.push(values[j]);
            merged.push(fresh_values[j]);
        }
        merged.push(values[n]);
        values = merged;
        n *= 2;
    }
    if depth >= MAX_DEPTH {
        return Err(Error::Quadrature {
            estimate: f64::NAN,
            error: f64::NAN,
            subdivisions: depth as usize,
        });
    }
    let mid = 0.5 * (a + b);
    fit(f, a, mid, tol, depth + 1, out)?;
    fit(f, mid, b, tol, depth + 1, out)
}
