//! Iterative localization estimators for the sequence model, robust mean and regression.
//!
//! All three share one step: at radius `d̃`, solve the width relaxation on `K ∩ B(0, d̃/2)`,
//! shrink a residual with `A⋆⋆`, and pull it back into the localized body and then into `K`
//! by two weak projections.

mod gsm;
mod regression;
mod robust;
mod robust_mean;

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use regression::{center_pairs, RegressionData};
pub use robust::RobustConfig;
pub use robust_mean::{robust_mean, RobustMeanMethod};

use crate::error::{Error, Result};
use crate::geometry::ConvexBody;
use crate::qfm::{oracle_for, QfmConfig};
use crate::rng;
use crate::width_sdp::{
    select_width_rank, solve_width_sdp, WidthCache, WidthSdpConfig, WidthSdpResult,
};

const SQRT3_PLUS_1: f64 = 2.732_050_807_568_877_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimationConfig {
    /// Width constant, shared with the width solver.
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "L_tilde")]
    pub l_tilde: f64,
    pub width: WidthSdpConfig,
    pub qfm: QfmConfig,
    pub seed: u64,
    /// Project `Y` onto `K` on the small-noise early return instead of returning it raw.
    pub project_early_return: bool,
    /// `C′` in the robust pilot radius `d̃₁ = min(2R, C′σ)`.
    pub pilot_constant: f64,
    /// Regression needs `N ≥ factor·n`.
    pub min_samples_factor: f64,
    /// Iteration cap of the inner regression solver.
    pub inner_max_iter: usize,
    /// `C′` in the inner regression accuracy `√N·d̃/C′`.
    pub inner_constant: f64,
    /// Noise level of the regression responses.
    pub noise_scale: f64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            c: 8.0,
            l_tilde: 4.0 * SQRT3_PLUS_1,
            width: WidthSdpConfig::default(),
            qfm: QfmConfig::default(),
            seed: 0,
            project_early_return: false,
            pilot_constant: 16.0,
            min_samples_factor: 2.0,
            inner_max_iter: 10_000,
            inner_constant: 16.0,
            noise_scale: 1.0,
        }
    }
}

impl EstimationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 1.0 && self.c.is_finite()) {
            return Err(Error::invalid(format!("C = {} must be at least 1", self.c)));
        }
        if !(self.l_tilde > 2.0 * SQRT3_PLUS_1 && self.l_tilde.is_finite()) {
            return Err(Error::invalid(format!(
                "L_tilde = {} must exceed 2(sqrt 3 + 1)",
                self.l_tilde
            )));
        }
        if !(self.pilot_constant > 0.0 && self.inner_constant > 0.0) {
            return Err(Error::invalid("pilot and inner constants must be positive"));
        }
        if !(self.min_samples_factor >= 0.0) || self.inner_max_iter == 0 {
            return Err(Error::invalid(
                "min_samples_factor must be nonnegative and inner_max_iter positive",
            ));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::invalid(format!(
                "noise_scale = {} must be finite and nonnegative",
                self.noise_scale
            )));
        }
        self.width_config().validate()
    }

    /// Per-iteration radius ratio `2(√3+1)/L̃`.
    pub fn shrink(&self) -> f64 {
        2.0 * SQRT3_PLUS_1 / self.l_tilde
    }

    /// `L = (√3+1)·L̃`.
    pub fn l(&self) -> f64 {
        SQRT3_PLUS_1 * self.l_tilde
    }

    /// Tolerance of the projection onto the localized body.
    pub fn eps_local(&self, d_tilde: f64) -> f64 {
        d_tilde / self.l()
    }

    /// Tolerance of the projection back onto `K`.
    pub fn eps_global(&self, d_tilde: f64) -> f64 {
        2.0 * d_tilde / self.l_tilde
    }

    /// `⌈log_{1/shrink}(ratio)⌉`, zero when the ratio is at most one.
    pub fn schedule_length(&self, ratio: f64) -> usize {
        if !(ratio > 1.0) {
            return 0;
        }
        let raw = ratio.ln() / (1.0 / self.shrink()).ln();
        let snapped = if (raw - raw.round()).abs() <= 1e-9 * raw.max(1.0) {
            raw.round()
        } else {
            raw
        };
        snapped.ceil() as usize
    }

    pub fn width_config(&self) -> WidthSdpConfig {
        WidthSdpConfig {
            c: self.c,
            ..self.width.clone()
        }
    }
}

/// One localization step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub j: usize,
    pub d_tilde: f64,
    pub d_tilde_next: f64,
    pub m: usize,
    pub oracle_value: f64,
    pub step_norm: f64,
    pub fail_budget: f64,
    /// Robust-mean block count, when applicable.
    pub blocks: Option<usize>,
    /// The estimate after this step.
    pub estimate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EstimationTrace {
    pub records: Vec<IterationRecord>,
    /// Radius the localization starts from.
    pub d_tilde_initial: f64,
    /// The starting estimate.
    pub initial_estimate: Vec<f64>,
    /// Inner radius after any overwrite by the algorithm.
    pub effective_inner_radius: f64,
    pub max_iterations: usize,
    pub early_return: bool,
    pub total_fail_budget: f64,
    pub estimate: Vec<f64>,
}

impl EstimationTrace {
    /// Estimates `μ̂_j` in order, starting with the initial one.
    pub fn iterates(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        std::iter::once((self.d_tilde_initial, self.initial_estimate.as_slice())).chain(
            self.records
                .iter()
                .map(|r| (r.d_tilde_next, r.estimate.as_slice())),
        )
    }
}

/// Width solve and localized body for one radius.
pub(crate) struct Localized {
    pub body: ConvexBody,
    pub width: Arc<WidthSdpResult>,
    pub m: usize,
    pub fail_prob: f64,
}

/// A body with its configuration and a cache of width solves.
///
/// Reusing one `Estimator` across trials reuses every width solve, since those depend only on the
/// schedule.
pub struct Estimator {
    body: ConvexBody,
    cfg: EstimationConfig,
    cache: WidthCache,
}

impl Estimator {
    pub fn new(body: ConvexBody, cfg: EstimationConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            body,
            cfg,
            cache: WidthCache::new(),
        })
    }

    pub fn body(&self) -> &ConvexBody {
        &self.body
    }

    pub fn config(&self) -> &EstimationConfig {
        &self.cfg
    }

    pub fn cached_solves(&self) -> usize {
        self.cache.len()
    }

    /// Width solve on `K ∩ B(0, d̃/2)` at the rank chosen for `σ_eff`.
    pub(crate) fn localize(
        &self,
        d_tilde: f64,
        sigma_eff: f64,
        schedule: usize,
    ) -> Result<Localized> {
        let n = self.body.dim();
        let m = select_width_rank(d_tilde, sigma_eff, self.cfg.c, n)?;
        let radius = d_tilde / 2.0;
        let body = self.body.localize(radius)?;
        let ratio = d_tilde / sigma_eff;
        let fail_prob = (1.0 / schedule.max(1) as f64) / (1.0 + ratio * ratio * ratio);
        let width = self.cache.get_or_solve(radius, m, fail_prob, || {
            let oracle = oracle_for(&body, &self.cfg.qfm);
            let wcfg = WidthSdpConfig {
                oracle_fail_prob: fail_prob.max(f64::MIN_POSITIVE),
                ..self.cfg.width_config()
            };
            let seed = rng::derive_seed(self.cfg.seed, &[0x5D, radius.to_bits(), m as u64]);
            solve_width_sdp(&body, m, oracle.as_ref(), &wcfg, seed)
        })?;
        Ok(Localized {
            body,
            width,
            m,
            fail_prob,
        })
    }

    /// `μ̄ = Π_{K(j)}(μ̃)` then `Π_K(2μ̄ + μ̂)`, returning both.
    pub(crate) fn refine(
        &self,
        local: &ConvexBody,
        tilde: &DVector<f64>,
        prev: &DVector<f64>,
        d_tilde: f64,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let bar = local
            .weak_project(tilde, self.cfg.eps_local(d_tilde))?
            .point;
        let next = self
            .body
            .weak_project(&(&bar * 2.0 + prev), self.cfg.eps_global(d_tilde))?
            .point;
        Ok((bar, next))
    }

    pub(crate) fn degenerate(
        &self,
        loc: &Localized,
        j: usize,
        trace: &EstimationTrace,
    ) -> Option<Error> {
        loc.width.degenerate.then(|| Error::DegenerateWidth {
            iteration: j,
            trace: Box::new(trace.clone()),
        })
    }
}

pub(crate) fn check_vector(y: &DVector<f64>, n: usize, what: &str) -> Result<()> {
    if y.len() != n {
        return Err(Error::invalid(format!(
            "{what} has dimension {}, body has {n}",
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{what} has non-finite entries")));
    }
    Ok(())
}

/// Runs the sequence-model estimator with a fresh width cache.
pub fn run_gsm(
    body: &ConvexBody,
    y: &DVector<f64>,
    sigma: f64,
    cfg: &EstimationConfig,
) -> Result<(DVector<f64>, EstimationTrace)> {
    Estimator::new(body.clone(), cfg.clone())?.gsm(y, sigma)
}

/// Runs the robust mean estimator with a fresh width cache.
pub fn run_robust(
    body: &ConvexBody,
    samples: &[DVector<f64>],
    sigma: f64,
    rcfg: &RobustConfig,
    cfg: &EstimationConfig,
) -> Result<(DVector<f64>, EstimationTrace)> {
    Estimator::new(body.clone(), cfg.clone())?.robust(samples, sigma, rcfg)
}

/// Runs the regression estimator with a fresh width cache.
pub fn run_regression(
    body: &ConvexBody,
    data: &RegressionData,
    cfg: &EstimationConfig,
) -> Result<(DVector<f64>, EstimationTrace)> {
    Estimator::new(body.clone(), cfg.clone())?.regression(data)
}
