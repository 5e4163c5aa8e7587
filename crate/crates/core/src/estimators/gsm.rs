use nalgebra::DVector;

use super::{check_vector, EstimationTrace, Estimator, IterationRecord};
use crate::error::{Error, Result};

impl Estimator {
    /// Estimates `μ ∈ K` from `Y = μ + σg`.
    pub fn gsm(&self, y: &DVector<f64>, sigma: f64) -> Result<(DVector<f64>, EstimationTrace)> {
        let body = self.body();
        let cfg = self.config();
        let n = body.dim();
        check_vector(y, n, "observation")?;
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!(
                "sigma = {sigma} must be finite and nonnegative"
            )));
        }
        let (r, big_r) = (body.inner_radius(), body.outer_radius());
        let mut trace = EstimationTrace {
            effective_inner_radius: r,
            ..Default::default()
        };

        if sigma <= r / (n as f64).sqrt() {
            let out = if cfg.project_early_return {
                body.weak_project(y, 1e-9 * big_r)?.point
            } else {
                y.clone()
            };
            trace.early_return = true;
            trace.estimate = out.iter().cloned().collect();
            return Ok((out, trace));
        }

        let max_iter = cfg.schedule_length(big_r / r);
        let stop = (2.0 * r).max(cfg.c * sigma);
        let mut d = body.diameter_bound();
        let mut mu = DVector::zeros(n);
        trace.d_tilde_initial = d;
        trace.initial_estimate = vec![0.0; n];
        trace.max_iterations = max_iter;

        for j in 1..=max_iter {
            let loc = self.localize(d, sigma, max_iter)?;
            if let Some(err) = self.degenerate(&loc, j, &trace) {
                return Err(err);
            }
            let tilde = loc.width.a_star2.apply(&(y - &mu)) / 2.0;
            let (_, next) = self.refine(&loc.body, &tilde, &mu, d)?;
            let d_next = cfg.shrink() * d;
            trace.total_fail_budget += loc.fail_prob;
            trace.records.push(IterationRecord {
                j,
                d_tilde: d,
                d_tilde_next: d_next,
                m: loc.m,
                oracle_value: loc.width.best_value,
                step_norm: (&next - &mu).norm(),
                fail_budget: loc.fail_prob,
                blocks: None,
                estimate: next.iter().cloned().collect(),
            });
            mu = next;
            d = d_next;
            if d <= stop {
                break;
            }
        }
        trace.estimate = mu.iter().cloned().collect();
        Ok((mu, trace))
    }
}
