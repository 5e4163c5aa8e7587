use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DIAG_FLOOR: f64 = 1e-14;
/// Exponent standing in for `q = ∞` when a smooth ascent direction is needed.
const LINF_SMOOTHING: f64 = 64.0;
const DUAL_MIX: f64 = 1e-6;

/// Inner norm of a norm-image body `{x : ‖Ax‖ ≤ 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "norm", rename_all = "snake_case")]
pub enum InnerNorm {
    /// `ℓ_p` with `2 ≤ p < ∞`.
    Lp {
        p: f64,
    },
    Linf,
    /// `(‖y‖₂² + ‖y‖₁²/m)^{1/2}`, a symmetric norm that is not quadratically convex.
    L2L1,
}

impl InnerNorm {
    pub fn validate(&self) -> Result<()> {
        match self {
            InnerNorm::Lp { p } if !(p.is_finite() && *p >= 2.0) => Err(Error::invalid(format!(
                "inner norm exponent p = {p} must satisfy 2 <= p < inf"
            ))),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, y: &DVector<f64>) -> f64 {
        match *self {
            InnerNorm::Lp { p } => {
                let m = y.amax();
                if m == 0.0 {
                    return 0.0;
                }
                m * y
                    .iter()
                    .map(|v| (v.abs() / m).powf(p))
                    .sum::<f64>()
                    .powf(1.0 / p)
            }
            InnerNorm::Linf => y.amax(),
            InnerNorm::L2L1 => {
                let m = y.len() as f64;
                let l1: f64 = y.iter().map(|v| v.abs()).sum();
                (y.norm_squared() + l1 * l1 / m).sqrt()
            }
        }
    }

    /// A subgradient of the norm at `y` (zero at the origin).
    pub fn subgradient(&self, y: &DVector<f64>) -> DVector<f64> {
        let rho = self.eval(y);
        if rho == 0.0 {
            return DVector::zeros(y.len());
        }
        match *self {
            InnerNorm::Lp { p } => y.map(|v| v.signum() * (v.abs() / rho).powf(p - 1.0)),
            InnerNorm::Linf => {
                let i = y.iamax();
                let mut g = DVector::zeros(y.len());
                g[i] = y[i].signum();
                g
            }
            InnerNorm::L2L1 => {
                let m = y.len() as f64;
                let l1: f64 = y.iter().map(|v| v.abs()).sum();
                y.map(|v| (v + l1 * v.signum() / m) / rho)
            }
        }
    }

    /// Declared bound on the type-2 constant of the unit ball in dimension `m`.
    pub fn t2_bound(&self, m: usize) -> f64 {
        match *self {
            InnerNorm::Lp { p } => (p - 1.0).sqrt().max(1.0),
            InnerNorm::Linf => (2.0 * (2.0 * m as f64).ln()).sqrt().max(1.0),
            InnerNorm::L2L1 => 2f64.sqrt(),
        }
    }

    /// `f(d) = ‖√d‖²`, the relaxed constraint as a function of the diagonal `d = diag(AWAᵀ)`.
    pub fn relax_value(&self, d: &[f64]) -> f64 {
        match *self {
            InnerNorm::Lp { p } => lq_norm(d, p / 2.0),
            InnerNorm::Linf => d.iter().cloned().fold(0.0, f64::max),
            InnerNorm::L2L1 => {
                let m = d.len() as f64;
                let s: f64 = d.iter().map(|v| v.max(0.0).sqrt()).sum();
                d.iter().sum::<f64>() + s * s / m
            }
        }
    }

    /// Gradient of `relax_value` (of a smoothed surrogate for `Linf`), with coordinates floored.
    pub fn relax_gradient(&self, d: &[f64]) -> Vec<f64> {
        match *self {
            InnerNorm::Lp { p } => lq_gradient(d, p / 2.0),
            InnerNorm::Linf => lq_gradient(d, LINF_SMOOTHING),
            InnerNorm::L2L1 => {
                let m = d.len() as f64;
                let s: f64 = d.iter().map(|v| v.max(DIAG_FLOOR).sqrt()).sum();
                d.iter()
                    .map(|v| 1.0 + s / (m * v.max(DIAG_FLOOR).sqrt()))
                    .collect()
            }
        }
    }

    /// Nonnegative weights `y` with `Σ yᵢ (Ax)ᵢ² ≤ ‖Ax‖²` for every `x`, tuned to the diagonal `d`.
    pub fn dual_weights(&self, d: &[f64]) -> Vec<f64> {
        match *self {
            InnerNorm::Lp { p } => {
                let q = p / 2.0;
                if q == 1.0 {
                    return vec![1.0; d.len()];
                }
                let y = lq_gradient(d, q);
                // Normalize in the conjugate norm so Hölder's inequality applies exactly.
                let qs = q / (q - 1.0);
                let nrm = lq_norm(&y, qs);
                // Mixing with the flat unit vector keeps every weight positive and the norm at most one.
                let flat = (d.len() as f64).powf(-1.0 / qs);
                y.into_iter()
                    .map(|v| (1.0 - DUAL_MIX) * v / nrm + DUAL_MIX * flat)
                    .collect()
            }
            InnerNorm::Linf => {
                let y = lq_gradient(d, LINF_SMOOTHING);
                let s: f64 = y.iter().sum();
                let flat = 1.0 / d.len() as f64;
                y.into_iter()
                    .map(|v| (1.0 - DUAL_MIX) * v / s + DUAL_MIX * flat)
                    .collect()
            }
            InnerNorm::L2L1 => vec![1.0; d.len()],
        }
    }
}

fn lq_norm(d: &[f64], q: f64) -> f64 {
    let m = d.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    m * d
        .iter()
        .map(|v| (v.abs() / m).powf(q))
        .sum::<f64>()
        .powf(1.0 / q)
}

fn lq_gradient(d: &[f64], q: f64) -> Vec<f64> {
    let floored: Vec<f64> = d.iter().map(|v| v.max(DIAG_FLOOR)).collect();
    let nrm = lq_norm(&floored, q);
    floored.iter().map(|v| (v / nrm).powf(q - 1.0)).collect()
}
