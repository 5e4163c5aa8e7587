//! Type-2 checks on quadratically convex bodies and the non-quadratically-convex witness.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConvexBody, InnerNorm};
use crate::rng;
use rand::Rng;

/// Batches up to this size average over every sign pattern exactly.
const EXACT_SIGN_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Type2Config {
    /// Vectors per batch; `None` means `min(n, 8)`.
    pub batch: Option<usize>,
    /// Sign draws per batch when the batch is too large to enumerate.
    pub sign_draws: usize,
    /// The ratio is compared with `constant · ln n`.
    pub constant: f64,
}

impl Default for Type2Config {
    fn default() -> Self {
        Self {
            batch: None,
            sign_draws: 256,
            constant: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Type2Report {
    pub dim: usize,
    pub trials: usize,
    pub batch: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    /// `constant · ln n`.
    pub bound: f64,
    pub within_bound: bool,
}

/// `{x : Σ θᵢ xᵢ² ≤ 1}`.
pub fn qco_quadratic_fixture(theta: &[f64]) -> Result<ConvexBody> {
    if theta.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::invalid("weights must be finite and positive"));
    }
    ConvexBody::ellipsoid(theta.iter().map(|t| 1.0 / t.sqrt()).collect())
}

/// `{x : Σ θᵢ |xᵢ|^p ≤ 1}` for `p ≥ 2`, i.e. `ψ(t) = t^{p/2}`.
pub fn qco_power_fixture(theta: &[f64], p: f64) -> Result<ConvexBody> {
    if theta.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::invalid("weights must be finite and positive"));
    }
    let diag = DVector::from_iterator(theta.len(), theta.iter().map(|t| t.powf(1.0 / p)));
    ConvexBody::norm_image(DMatrix::from_diagonal(&diag), InnerNorm::Lp { p })
}

/// Monte Carlo estimate of `max E_ε ρ²(Σ εᵢxᵢ) / Σ ρ²(xᵢ)` over Gaussian batches.
pub fn check_qco_type2(body: &ConvexBody, trials: usize, seed: u64) -> Result<Type2Report> {
    check_qco_type2_with(body, trials, seed, &Type2Config::default())
}

pub fn check_qco_type2_with(
    body: &ConvexBody,
    trials: usize,
    seed: u64,
    cfg: &Type2Config,
) -> Result<Type2Report> {
    let n = body.dim();
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let batch = cfg.batch.unwrap_or(n.min(8));
    if batch == 0 {
        return Err(Error::invalid("batch must be positive"));
    }
    let mut max_ratio: f64 = 0.0;
    let mut total = 0.0;
    for t in 0..trials {
        let mut r = rng::stream(seed, &[0x7E2, t as u64]);
        let xs: Vec<DVector<f64>> = (0..batch)
            .map(|_| rng::gaussian_vector(&mut r, n))
            .collect();
        let mut denom = 0.0;
        for x in &xs {
            denom += body.gauge(x)?.powi(2);
        }
        let signed = |signs: &dyn Fn(usize) -> bool| -> Result<f64> {
            let s = xs
                .iter()
                .enumerate()
                .fold(
                    DVector::zeros(n),
                    |acc, (i, x)| if signs(i) { acc + x } else { acc - x },
                );
            Ok(body.gauge(&s)?.powi(2))
        };
        let mut num = 0.0;
        let draws = if batch <= EXACT_SIGN_LIMIT {
            let patterns = 1usize << batch;
            for pat in 0..patterns {
                num += signed(&|i| pat >> i & 1 == 1)?;
            }
            patterns
        } else {
            for _ in 0..cfg.sign_draws {
                let bits: Vec<bool> = (0..batch).map(|_| r.random::<bool>()).collect();
                num += signed(&|i| bits[i])?;
            }
            cfg.sign_draws
        };
        let ratio = num / draws as f64 / denom;
        max_ratio = max_ratio.max(ratio);
        total += ratio;
    }
    let bound = cfg.constant * (n as f64).ln();
    Ok(Type2Report {
        dim: n,
        trials,
        batch,
        max_ratio,
        mean_ratio: total / trials as f64,
        bound,
        within_bound: max_ratio <= bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub n: usize,
    pub u_norm: f64,
    pub v_norm: f64,
    /// `‖w‖²` for `w = √((ũ² + ṽ²)/2)`.
    pub w_norm_sq: f64,
    /// `(n+2)/(n+1)`.
    pub expected: f64,
}

/// Builds the two unit vectors of `‖x‖ = (‖x‖₂² + ‖x‖₁²/n)^{1/2}` whose squared midpoint leaves the ball.
pub fn check_non_qco_witness(n: usize) -> Result<WitnessReport> {
    if n < 2 {
        return Err(Error::invalid("the witness needs n >= 2"));
    }
    let norm = InnerNorm::L2L1;
    let c = (1.0 + 1.0 / n as f64).sqrt();
    let mut u = DVector::zeros(n);
    let mut v = DVector::zeros(n);
    u[0] = 1.0 / c;
    v[1] = 1.0 / c;
    let w = (u.component_mul(&u) + v.component_mul(&v)).map(|x| (x / 2.0).sqrt());
    Ok(WitnessReport {
        n,
        u_norm: norm.eval(&u),
        v_norm: norm.eval(&v),
        w_norm_sq: norm.eval(&w).powi(2),
        expected: (n as f64 + 2.0) / (n as f64 + 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn witness_values() {
        for (n, want) in [(2, 4.0 / 3.0), (9, 11.0 / 10.0), (100, 102.0 / 101.0)] {
            let rep = check_non_qco_witness(n).unwrap();
            assert!(
                (rep.w_norm_sq - want).abs() < 1e-12,
                "n = {n}: {}",
                rep.w_norm_sq
            );
            assert!((rep.u_norm - 1.0).abs() < 1e-12 && (rep.v_norm - 1.0).abs() < 1e-12);
        }
        assert!(check_non_qco_witness(1).is_err());
    }

    #[test]
    fn euclidean_ratio_near_one() {
        let body = ConvexBody::euclidean_ball(6, 1.0).unwrap();
        let rep = check_qco_type2(&body, 2000, 1).unwrap();
        // Exact sign averaging makes the Euclidean ratio one up to rounding.
        assert!((rep.max_ratio - 1.0).abs() < 1e-9, "{rep:?}");
    }

    #[test]
    fn single_vector_batch() {
        let body = qco_power_fixture(&[1.0, 2.0, 3.0], 4.0).unwrap();
        let cfg = Type2Config {
            batch: Some(1),
            ..Default::default()
        };
        let rep = check_qco_type2_with(&body, 100, 3, &cfg).unwrap();
        assert!((rep.max_ratio - 1.0).abs() < 1e-12 && (rep.mean_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_signs_for_large_batches() {
        let body = ConvexBody::euclidean_ball(16, 1.0).unwrap();
        let cfg = Type2Config {
            batch: Some(16),
            ..Default::default()
        };
        let rep = check_qco_type2_with(&body, 200, 5, &cfg).unwrap();
        assert!(rep.max_ratio <= 2.0, "{rep:?}");
    }
}
