//! Closed-form references for axis-aligned ellipsoids.

use nalgebra::DVector;

use crate::error::{Error, Result};

const PINSKER_REL_TOL: f64 = 1e-10;

fn check_axes(semi_axes: &[f64]) -> Result<()> {
    if semi_axes.is_empty() || semi_axes.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(Error::invalid("semi-axes must be finite and positive"));
    }
    Ok(())
}

/// Kolmogorov `m`-width of the ellipsoid with descending semi-axes: `a_{m+1}`, or 0 when `m = n`.
pub fn exact_width_ellipsoid(semi_axes: &[f64], m: usize) -> Result<f64> {
    check_axes(semi_axes)?;
    if semi_axes.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::invalid(
            "semi-axes must be sorted in descending order",
        ));
    }
    if m > semi_axes.len() {
        return Err(Error::invalid(format!(
            "m = {m} exceeds n = {}",
            semi_axes.len()
        )));
    }
    Ok(semi_axes.get(m).copied().unwrap_or(0.0))
}

/// Linear minimax risk over `{Σ μᵢ²/aᵢ² ≤ 1}` at noise level `σ`.
///
/// With `αᵢ = 1/aᵢ`, the water level `λ` solves `σ² Σ αᵢ(λ − αᵢ)₊ = 1` and the risk is
/// `σ² Σ (1 − αᵢ/λ)₊`.
pub fn pinsker_risk(semi_axes: &[f64], sigma: f64) -> Result<f64> {
    check_axes(semi_axes)?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!(
            "sigma = {sigma} must be finite and nonnegative"
        )));
    }
    if sigma == 0.0 {
        return Ok(0.0);
    }
    let s2 = sigma * sigma;
    let alpha: Vec<f64> = semi_axes.iter().map(|a| 1.0 / a).collect();
    let budget = |lam: f64| s2 * alpha.iter().map(|a| a * (lam - a).max(0.0)).sum::<f64>();
    let mut lo = alpha.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = 2.0 * lo.max(1e-300);
    let mut grow = 0;
    while budget(hi) < 1.0 {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > 2000 || !hi.is_finite() {
            return Err(Error::numeric("Pinsker water level bracket failed"));
        }
    }
    while hi - lo > PINSKER_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if budget(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lam = 0.5 * (lo + hi);
    Ok(s2 * alpha.iter().map(|a| (1.0 - a / lam).max(0.0)).sum::<f64>())
}

/// The truncation level minimizing `a_{m+1}² + mσ²`, ties going to the smaller `m`.
pub fn truncation_level(semi_axes: &[f64], sigma: f64) -> Result<usize> {
    check_axes(semi_axes)?;
    let mut sorted = semi_axes.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let s2 = sigma * sigma;
    let proxy = |m: usize| sorted.get(m).map_or(0.0, |a| a * a) + m as f64 * s2;
    Ok((0..=sorted.len()).fold(0, |best, m| if proxy(m) < proxy(best) { m } else { best }))
}

/// Keeps `Y` on the `m` longest axes and zeroes the rest, with `m` from [`truncation_level`].
pub fn baseline_truncated_series(
    semi_axes: &[f64],
    y: &DVector<f64>,
    sigma: f64,
) -> Result<DVector<f64>> {
    if y.len() != semi_axes.len() {
        return Err(Error::invalid(format!(
            "observation has dimension {}, body has {}",
            y.len(),
            semi_axes.len()
        )));
    }
    let m = truncation_level(semi_axes, sigma)?;
    let mut order: Vec<usize> = (0..semi_axes.len()).collect();
    order.sort_by(|&i, &j| semi_axes[j].total_cmp(&semi_axes[i]));
    let mut out = DVector::zeros(y.len());
    for &i in &order[..m] {
        out[i] = y[i];
    }
    Ok(out)
}
