use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{
    check_vector, robust_mean, EstimationTrace, Estimator, IterationRecord, RobustMeanMethod,
};
use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobustConfig {
    /// Contamination fraction, below one half.
    pub epsilon: f64,
    pub method: RobustMeanMethod,
    /// Keeps at least `⌊factor·εN⌋ + 1` blocks, so at most a `1/factor` share of them hold a corrupted sample.
    /// Zero disables the floor.
    pub block_floor_factor: f64,
}

impl Default for RobustConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            method: RobustMeanMethod::default(),
            block_floor_factor: 8.0,
        }
    }
}

impl RobustConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.epsilon) {
            return Err(Error::invalid(format!(
                "epsilon = {} must lie in [0, 1/2)",
                self.epsilon
            )));
        }
        if !(self.block_floor_factor >= 0.0 && self.block_floor_factor.is_finite()) {
            return Err(Error::invalid(
                "block_floor_factor must be finite and nonnegative",
            ));
        }
        Ok(())
    }

    /// `⌈N d̃²/(C²σ²)⌉ ∧ N`, raised to the contamination floor.
    pub fn blocks(&self, n_samples: usize, d_tilde: f64, c: f64, sigma: f64) -> usize {
        let nf = n_samples as f64;
        let raw = nf * (d_tilde / (c * sigma)).powi(2);
        let k = if raw.is_finite() && raw < nf {
            (raw.ceil() as usize).max(1)
        } else {
            n_samples
        };
        let floor = if self.epsilon > 0.0 {
            (self.block_floor_factor * self.epsilon * nf).floor() as usize + 1
        } else {
            1
        };
        k.max(floor).min(n_samples)
    }
}

struct Schedule {
    r_eff: f64,
    d1: f64,
    max_iter: usize,
    sigma_eff: f64,
}

impl Estimator {
    fn robust_schedule(&self, n_samples: usize, sigma: f64, eps: f64) -> Schedule {
        let body = self.body();
        let cfg = self.config();
        let nf = n_samples as f64;
        let dim = body.dim() as f64;
        let r_eff = body
            .inner_radius()
            .min(((dim / nf).sqrt() * sigma).max(eps.sqrt() * sigma));
        let d1 = body.diameter_bound().min(cfg.pilot_constant * sigma);
        let max_iter = if r_eff > 0.0 {
            cfg.schedule_length(d1 / (2.0 * r_eff))
        } else {
            0
        };
        Schedule {
            r_eff,
            d1,
            max_iter,
            sigma_eff: sigma / nf.sqrt(),
        }
    }

    /// The first shrinkage matrix the robust estimator would use, if it takes any step.
    pub fn robust_first_shrinkage(
        &self,
        n_samples: usize,
        sigma: f64,
        rcfg: &RobustConfig,
    ) -> Result<Option<SymmetricMatrix>> {
        rcfg.validate()?;
        if n_samples == 0 || !(sigma > 0.0 && sigma.is_finite()) {
            return Ok(None);
        }
        let s = self.robust_schedule(n_samples, sigma, rcfg.epsilon);
        if s.max_iter == 0 {
            return Ok(None);
        }
        Ok(Some(
            self.localize(s.d1, s.sigma_eff, s.max_iter)?
                .width
                .a_star2
                .clone(),
        ))
    }

    /// Estimates `μ ∈ K` from `N` samples of which a fraction `ε` may be corrupted.
    pub fn robust(
        &self,
        samples: &[DVector<f64>],
        sigma: f64,
        rcfg: &RobustConfig,
    ) -> Result<(DVector<f64>, EstimationTrace)> {
        rcfg.validate()?;
        let body = self.body();
        let cfg = self.config();
        let n = body.dim();
        if samples.is_empty() {
            return Err(Error::invalid("no samples"));
        }
        for s in samples {
            check_vector(s, n, "sample")?;
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!(
                "sigma = {sigma} must be finite and nonnegative"
            )));
        }
        let n_samples = samples.len();
        let sched = self.robust_schedule(n_samples, sigma, rcfg.epsilon);
        let seed = |j: usize| rng::derive_seed(cfg.seed, &[0xB10C, j as u64]);

        let pilot_mean = robust_mean(samples, n_samples, rcfg.method, seed(0))?;
        // σ = 0 leaves nothing to localize; a tight projection stands in for ε = σ.
        let pilot_eps = if sigma > 0.0 {
            sigma
        } else {
            1e-9 * body.outer_radius()
        };
        let mut mu = body.weak_project(&pilot_mean, pilot_eps)?.point;
        let mut trace = EstimationTrace {
            d_tilde_initial: sched.d1,
            initial_estimate: mu.iter().cloned().collect(),
            effective_inner_radius: sched.r_eff,
            max_iterations: sched.max_iter,
            ..Default::default()
        };

        let stop = (2.0 * sched.r_eff).max(cfg.c * sched.sigma_eff);
        let mut d = sched.d1;
        for j in 1..=sched.max_iter {
            let loc = self.localize(d, sched.sigma_eff, sched.max_iter)?;
            if let Some(err) = self.degenerate(&loc, j, &trace) {
                return Err(err);
            }
            let a = &loc.width.a_star2;
            let k = rcfg.blocks(n_samples, d, cfg.c, sigma);
            let shrunk: Vec<DVector<f64>> = samples.iter().map(|s| a.apply(s)).collect();
            let center = robust_mean(&shrunk, k, rcfg.method, seed(j))?;
            let tilde = (center - a.apply(&mu)) / 2.0;
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
                blocks: Some(k),
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

#[cfg(test)]
mod tests {
    use super::super::{run_robust, EstimationConfig};
    use super::*;
    use crate::geometry::ConvexBody;

    #[test]
    fn identical_samples_return_the_point() {
        let body = ConvexBody::ellipsoid(vec![3.0, 2.0, 1.0]).unwrap();
        let mu = DVector::from_vec(vec![1.0, -0.5, 0.4]);
        let samples = vec![mu.clone(); 40];
        let rcfg = RobustConfig {
            epsilon: 0.1,
            ..Default::default()
        };
        let (est, _) =
            run_robust(&body, &samples, 0.5, &rcfg, &EstimationConfig::default()).unwrap();
        assert!((est - mu).norm() < 1e-6);
    }

    #[test]
    fn zero_noise_returns_pilot() {
        let body = ConvexBody::ellipsoid(vec![3.0, 2.0]).unwrap();
        let samples = vec![DVector::from_vec(vec![10.0, 0.0]); 5];
        let (est, trace) = run_robust(
            &body,
            &samples,
            0.0,
            &RobustConfig::default(),
            &EstimationConfig::default(),
        )
        .unwrap();
        assert!(trace.records.is_empty());
        assert!((est - DVector::from_vec(vec![3.0, 0.0])).norm() < 1e-6);
    }

    #[test]
    fn output_stays_in_body_under_contamination() {
        let body = ConvexBody::ellipsoid(vec![4.0, 2.0, 1.0, 0.5]).unwrap();
        let mut r = rng::stream(3, &[]);
        let mu = DVector::from_vec(vec![2.0, 1.0, 0.0, 0.1]);
        let mut samples: Vec<DVector<f64>> = (0..72)
            .map(|_| &mu + rng::gaussian_vector(&mut r, 4) * 0.5)
            .collect();
        samples.extend((0..8).map(|_| DVector::from_element(4, 40.0)));
        let rcfg = RobustConfig {
            epsilon: 0.1,
            ..Default::default()
        };
        let (est, trace) =
            run_robust(&body, &samples, 0.5, &rcfg, &EstimationConfig::default()).unwrap();
        assert!(body.gauge(&est).unwrap() <= 1.0 + 1e-9);
        assert!((est - mu).norm() < 1.5);
        assert!(trace.records.iter().all(|rec| rec.blocks.unwrap() >= 65));
    }

    #[test]
    fn block_rule() {
        let rcfg = RobustConfig::default();
        assert_eq!(rcfg.blocks(100, 8.0, 8.0, 1.0), 100);
        assert_eq!(rcfg.blocks(100, 2.0, 8.0, 1.0), 7);
        assert_eq!(rcfg.blocks(100, 0.0, 8.0, 1.0), 1);
        let rcfg = RobustConfig {
            epsilon: 0.1,
            ..Default::default()
        };
        assert_eq!(rcfg.blocks(100, 0.0, 8.0, 1.0), 81);
        let loose = RobustConfig {
            epsilon: 0.1,
            block_floor_factor: 2.0,
            ..Default::default()
        };
        assert_eq!(loose.blocks(100, 0.0, 8.0, 1.0), 21);
        assert!(RobustConfig {
            epsilon: 0.5,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
