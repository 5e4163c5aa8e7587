//! Euclidean projections onto the capped simplex `{w ∈ [0,1]^n : Σw = k}`
//! and onto the spectahedron `{0 ≼ W ≼ I, tr W = k}`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;

const MEMBERSHIP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CappedSimplexResult {
    pub w: Vec<f64>,
    pub theta: f64,
}

/// `f(θ) = Σ min(1, max(0, v_i − θ))`.
pub fn capped_sum(v: &[f64], theta: f64) -> f64 {
    v.iter().map(|&x| (x - theta).clamp(0.0, 1.0)).sum()
}

pub fn project_capped_simplex(v: &[f64], k: usize) -> Result<CappedSimplexResult> {
    let n = v.len();
    if k > n {
        return Err(Error::invalid(format!(
            "capped simplex level k = {k} exceeds n = {n}"
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(
            "capped simplex input has non-finite entries",
        ));
    }
    if n == 0 {
        return Ok(CappedSimplexResult {
            w: Vec::new(),
            theta: 0.0,
        });
    }
    let kf = k as f64;

    let mut breaks: Vec<f64> = v.iter().flat_map(|&x| [x - 1.0, x]).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= MEMBERSHIP_TOL);
    breaks.push(f64::INFINITY);

    let mut theta = None;
    for win in breaks.windows(2) {
        let (lo, hi) = (win[0], win[1]);
        let mut n_top = 0usize;
        let mut n_mid = 0usize;
        let mut mid_sum = 0.0;
        for &x in v {
            let gap = x - lo;
            // An entry with x − 1 = lo leaves the cap as soon as θ moves past lo.
            if gap > 1.0 + MEMBERSHIP_TOL {
                n_top += 1;
            } else if gap > MEMBERSHIP_TOL {
                n_mid += 1;
                mid_sum += x;
            }
        }
        if n_mid == 0 {
            if n_top == k {
                theta = Some(lo);
                break;
            }
            continue;
        }
        let t = (mid_sum + n_top as f64 - kf) / n_mid as f64;
        if t >= lo - MEMBERSHIP_TOL && t < hi + MEMBERSHIP_TOL {
            theta = Some(t);
            break;
        }
    }
    // Rounding can push θ just outside every interval; the monotone sum then pins it down.
    let theta = match theta {
        Some(t) => t,
        None => bisect_theta(v, kf),
    };
    let w = v.iter().map(|&x| (x - theta).clamp(0.0, 1.0)).collect();
    Ok(CappedSimplexResult { w, theta })
}

fn bisect_theta(v: &[f64], k: f64) -> f64 {
    let lo0 = v.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let hi0 = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (lo0, hi0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if capped_sum(v, mid) > k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Frobenius projection onto `{0 ≼ W ≼ I, tr W = k}`. The result carries its eigendecomposition.
pub fn project_spectahedron(x: &SymmetricMatrix, k: usize) -> Result<SymmetricMatrix> {
    let n = x.dim();
    if k > n {
        return Err(Error::invalid(format!(
            "spectahedron trace k = {k} exceeds n = {n}"
        )));
    }
    let spec = x.spectral()?;
    let proj = project_capped_simplex(spec.values.as_slice(), k)?;
    Ok(SymmetricMatrix::from_spectral(
        DVector::from_vec(proj.w),
        spec.vectors.clone(),
    ))
}
