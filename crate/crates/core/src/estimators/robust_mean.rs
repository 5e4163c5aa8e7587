use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

const WEISZFELD_TOL: f64 = 1e-9;
const WEISZFELD_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobustMeanMethod {
    #[default]
    GeometricMedianOfMeans,
    CoordinatewiseMedianOfMeans,
}

/// Median of `k` block means.
///
/// Samples are ordered by a seeded hash of their bits and dealt round-robin into blocks, so the
/// result does not depend on the order the samples arrive in.
pub fn robust_mean(
    samples: &[DVector<f64>],
    k: usize,
    method: RobustMeanMethod,
    seed: u64,
) -> Result<DVector<f64>> {
    let n_samples = samples.len();
    if n_samples == 0 {
        return Err(Error::invalid("no samples"));
    }
    if k == 0 || k > n_samples {
        return Err(Error::invalid(format!(
            "block count {k} must lie in [1, {n_samples}]"
        )));
    }
    let dim = samples[0].len();
    if samples
        .iter()
        .any(|s| s.len() != dim || s.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::invalid(
            "samples must share one dimension and be finite",
        ));
    }

    let keyed: Vec<(u64, Vec<u64>)> = samples
        .iter()
        .map(|s| {
            let bits: Vec<u64> = s.iter().map(|v| v.to_bits()).collect();
            (rng::derive_seed(seed, &bits), bits)
        })
        .collect();
    let mut order: Vec<usize> = (0..n_samples).collect();
    order.sort_by(|&a, &b| keyed[a].cmp(&keyed[b]));

    let mut sums = vec![DVector::zeros(dim); k];
    let mut counts = vec![0usize; k];
    for (pos, &i) in order.iter().enumerate() {
        sums[pos % k] += &samples[i];
        counts[pos % k] += 1;
    }
    let means: Vec<DVector<f64>> = sums
        .into_iter()
        .zip(counts)
        .map(|(s, c)| s / c as f64)
        .collect();
    if k == 1 {
        return Ok(means.into_iter().next().expect("one block"));
    }
    match method {
        RobustMeanMethod::GeometricMedianOfMeans => geometric_median(&means),
        RobustMeanMethod::CoordinatewiseMedianOfMeans => Ok(coordinatewise_median(&means)),
    }
}

pub(crate) fn coordinatewise_median(points: &[DVector<f64>]) -> DVector<f64> {
    let dim = points[0].len();
    DVector::from_fn(dim, |i, _| {
        let mut col: Vec<f64> = points.iter().map(|p| p[i]).collect();
        col.sort_by(f64::total_cmp);
        let h = col.len() / 2;
        if col.len() % 2 == 1 {
            col[h]
        } else {
            0.5 * (col[h - 1] + col[h])
        }
    })
}

/// Weiszfeld iteration with the Vardi–Zhang modification at data points.
pub(crate) fn geometric_median(points: &[DVector<f64>]) -> Result<DVector<f64>> {
    let count = points.len() as f64;
    let mut y = points
        .iter()
        .fold(DVector::zeros(points[0].len()), |acc, p| acc + p)
        / count;
    let scale = points.iter().map(|p| (p - &y).norm()).fold(0.0, f64::max);
    // Points that agree to rounding error have their mean as median.
    if scale <= 1e-12 * (1.0 + y.amax()) {
        return Ok(y);
    }
    let coincide = 1e-14 * scale;
    let objective = |y: &DVector<f64>| points.iter().map(|p| (p - y).norm()).sum::<f64>();
    let mut best = (objective(&y), y.clone());
    for _ in 0..WEISZFELD_MAX_ITER {
        let mut num = DVector::zeros(y.len());
        let mut den = 0.0;
        let mut eta = 0.0;
        for p in points {
            let dist = (p - &y).norm();
            if dist <= coincide {
                eta += 1.0;
            } else {
                num += p / dist;
                den += 1.0 / dist;
            }
        }
        if den == 0.0 {
            return Ok(y);
        }
        let t = &num / den;
        let next = if eta > 0.0 {
            let pull = (&num - &y * den).norm();
            if pull <= eta {
                // The subgradient condition holds at the data point.
                return Ok(y);
            }
            let gamma = eta / pull;
            t * (1.0 - gamma) + &y * gamma
        } else {
            t
        };
        let moved = (&next - &y).norm();
        y = next;
        let f = objective(&y);
        if f < best.0 {
            best = (f, y.clone());
        }
        if moved <= WEISZFELD_TOL * scale {
            return Ok(y);
        }
    }
    Err(Error::ToleranceNotMet {
        message: format!("Weiszfeld did not converge in {WEISZFELD_MAX_ITER} iterations"),
        best_point: best.1.iter().cloned().collect(),
        best_value: best.0,
    })
}
