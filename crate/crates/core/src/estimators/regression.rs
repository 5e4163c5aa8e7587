use nalgebra::{DMatrix, DVector};

use super::{EstimationTrace, Estimator, IterationRecord};
use crate::error::{Error, Result};
use crate::geometry::ConvexBody;
use crate::linalg::symmetric_eigen;

const CONDITION_FLOOR: f64 = 1e-10;

/// Responses `Y_i = Z_iᵀβ + ξ_i`, one design row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    /// `N × n` design.
    pub z: DMatrix<f64>,
    pub y: DVector<f64>,
    /// Set once rows have been pair-differenced.
    pub centered: bool,
}

impl RegressionData {
    pub fn new(z: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let data = Self {
            z,
            y,
            centered: false,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.z.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.y.is_empty() {
            return Err(Error::invalid("regression data has no samples"));
        }
        if self.z.nrows() != self.y.len() {
            return Err(Error::invalid(format!(
                "{} design rows but {} responses",
                self.z.nrows(),
                self.y.len()
            )));
        }
        if self.z.iter().chain(self.y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("regression data has non-finite entries"));
        }
        Ok(())
    }
}

/// Differences consecutive pairs `(2i+1, 2i)`, dropping a trailing odd sample.
pub fn center_pairs(data: &RegressionData) -> Result<RegressionData> {
    data.validate()?;
    let pairs = data.len() / 2;
    if pairs == 0 {
        return Err(Error::invalid(
            "pair differencing needs at least two samples",
        ));
    }
    let n = data.dim();
    let z = DMatrix::from_fn(pairs, n, |i, c| data.z[(2 * i + 1, c)] - data.z[(2 * i, c)]);
    let y = DVector::from_fn(pairs, |i, _| data.y[2 * i + 1] - data.y[2 * i]);
    Ok(RegressionData {
        z,
        y,
        centered: true,
    })
}

/// Projected accelerated gradient for `min ½‖Bν − t‖²` over `body`, with function restarts.
fn constrained_least_squares(
    b: &DMatrix<f64>,
    target: &DVector<f64>,
    body: &ConvexBody,
    step: f64,
    tol: f64,
    proj_eps: f64,
    max_iter: usize,
) -> Result<DVector<f64>> {
    let n = b.ncols();
    let f = |v: &DVector<f64>| 0.5 * (b * v - target).norm_squared();
    let mut x = DVector::zeros(n);
    let mut fx = f(&x);
    let mut y = x.clone();
    let mut t = 1.0f64;
    for _ in 0..max_iter {
        let grad = b.tr_mul(&(b * &y - target));
        let next = body.weak_project(&(&y - grad * step), proj_eps)?.point;
        let fn_ = f(&next);
        if fn_ > fx {
            // Momentum overshot: restart from the last accepted point.
            y = x.clone();
            t = 1.0;
            continue;
        }
        let gain = 2.0 * (fx - fn_);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &next + (&next - &x) * ((t - 1.0) / t_next);
        t = t_next;
        x = next;
        fx = fn_;
        if gain < tol {
            return Ok(x);
        }
    }
    log::warn!("inner regression solve stopped at the iteration cap");
    Ok(x)
}

impl Estimator {
    /// Estimates `β ∈ K` from a linear model with noise level `noise_scale`.
    pub fn regression(&self, data: &RegressionData) -> Result<(DVector<f64>, EstimationTrace)> {
        data.validate()?;
        let body = self.body();
        let cfg = self.config();
        let n = body.dim();
        let n_samples = data.len();
        if data.dim() != n {
            return Err(Error::invalid(format!(
                "design has {} columns, body has dimension {n}",
                data.dim()
            )));
        }
        if (n_samples as f64) < cfg.min_samples_factor * n as f64 {
            return Err(Error::invalid(format!(
                "need at least {} samples for dimension {n}, got {n_samples}",
                (cfg.min_samples_factor * n as f64).ceil()
            )));
        }
        let gram = data.z.tr_mul(&data.z);
        let spec = symmetric_eigen(&gram)?;
        let (lmax, lmin) = (spec.values[0], spec.values[n - 1]);
        if !(lmax > 0.0) || lmin < CONDITION_FLOOR * lmax {
            return Err(Error::IllConditionedDesign {
                ratio: if lmax > 0.0 { lmin / lmax } else { 0.0 },
            });
        }

        let nf = n_samples as f64;
        let (r, big_r) = (body.inner_radius(), body.outer_radius());
        let sigma_eff = cfg.noise_scale / nf.sqrt();
        let r_eff = r.min(0.5 * (n as f64 / nf).sqrt() * cfg.noise_scale);
        let mut trace = EstimationTrace {
            effective_inner_radius: r_eff,
            ..Default::default()
        };

        if cfg.noise_scale == 0.0 {
            // Noiseless responses: least squares is exact and the schedule would never stop.
            let chol = gram
                .clone()
                .cholesky()
                .ok_or(Error::IllConditionedDesign { ratio: lmin / lmax })?;
            let beta = chol.solve(&data.z.tr_mul(&data.y));
            trace.early_return = true;
            trace.estimate = beta.iter().cloned().collect();
            return Ok((beta, trace));
        }

        let max_iter = cfg.schedule_length(big_r / r_eff);
        let stop = (2.0 * r_eff).max(cfg.c * sigma_eff);
        let mut d = body.diameter_bound();
        let mut beta = DVector::zeros(n);
        trace.d_tilde_initial = d;
        trace.initial_estimate = vec![0.0; n];
        trace.max_iterations = max_iter;

        for j in 1..=max_iter {
            let loc = self.localize(d, sigma_eff, max_iter)?;
            if let Some(err) = self.degenerate(&loc, j, &trace) {
                return Err(err);
            }
            let a = loc.width.a_star2.as_matrix();
            let b = &data.z * a;
            let target = (&data.y - &data.z * &beta) / 2.0;
            let accuracy = nf.sqrt() * d / cfg.inner_constant;
            let nu = constrained_least_squares(
                &b,
                &target,
                &loc.body,
                1.0 / lmax,
                accuracy * accuracy / 10.0,
                cfg.eps_local(d) / 100.0,
                cfg.inner_max_iter,
            )?;
            let tilde = a * nu;
            let (_, next) = self.refine(&loc.body, &tilde, &beta, d)?;
            let d_next = cfg.shrink() * d;
            trace.total_fail_budget += loc.fail_prob;
            trace.records.push(IterationRecord {
                j,
                d_tilde: d,
                d_tilde_next: d_next,
                m: loc.m,
                oracle_value: loc.width.best_value,
                step_norm: (&next - &beta).norm(),
                fail_budget: loc.fail_prob,
                blocks: None,
                estimate: next.iter().cloned().collect(),
            });
            beta = next;
            d = d_next;
            if d <= stop {
                break;
            }
        }
        trace.estimate = beta.iter().cloned().collect();
        Ok((beta, trace))
    }
}
