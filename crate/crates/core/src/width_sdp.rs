//! Projected subgradient descent on the trace-constrained relaxation of the Kolmogorov width.
//!
//! Minimizes `f(X) = max_{p ∈ K} pᵀXp` over `{0 ≼ X ≼ I, tr X = n − m}`. The oracle maximizer `p`
//! gives the subgradient `ppᵀ`, and every step is followed by a spectahedron projection.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::caps_proj::project_spectahedron;
use crate::error::{Error, Result};
use crate::geometry::ConvexBody;
use crate::linalg::{MatrixRecord, SymmetricMatrix};
use crate::qfm::{QfmOracle, WarmStart};
use crate::rng;

/// Oracle maximizers shorter than this are treated as a collapsed body.
pub const DEGENERATE_NORM: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WidthSdpConfig {
    #[serde(rename = "C")]
    pub c: f64,
    /// Iteration cap; `None` means `20·(n−m)·C²`.
    pub max_iter_cap: Option<usize>,
    /// Base learning rate; `None` means `1/(κC²)`.
    pub gamma: Option<f64>,
    /// Failure probability passed to every oracle call.
    pub oracle_fail_prob: f64,
}

impl Default for WidthSdpConfig {
    fn default() -> Self {
        Self {
            c: 8.0,
            max_iter_cap: None,
            gamma: None,
            oracle_fail_prob: 1e-3,
        }
    }
}

impl WidthSdpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 1.0 && self.c.is_finite()) {
            return Err(Error::invalid(format!("C = {} must be at least 1", self.c)));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::invalid(format!("gamma = {g} must be positive")));
            }
        }
        if self.max_iter_cap == Some(0) {
            return Err(Error::invalid("max_iter_cap must be at least 1"));
        }
        if !(self.oracle_fail_prob > 0.0 && self.oracle_fail_prob <= 1.0) {
            return Err(Error::invalid(format!(
                "oracle_fail_prob = {} must lie in (0, 1]",
                self.oracle_fail_prob
            )));
        }
        Ok(())
    }

    /// The worst-case iteration count `4(n−m)C⁴κ²`.
    pub fn theoretical_iterations(&self, n: usize, m: usize, kappa: f64) -> f64 {
        4.0 * (n - m) as f64 * self.c.powi(4) * kappa * kappa
    }

    pub fn iteration_cap(&self, n: usize, m: usize) -> usize {
        self.max_iter_cap
            .unwrap_or_else(|| (20.0 * (n - m) as f64 * self.c * self.c).ceil() as usize)
            .max(1)
    }

    pub fn learning_rate(&self, kappa: f64) -> f64 {
        self.gamma.unwrap_or(1.0 / (kappa * self.c * self.c))
    }
}

#[derive(Debug, Clone)]
pub struct WidthSdpResult {
    pub x_star2: SymmetricMatrix,
    pub a_star2: SymmetricMatrix,
    pub best_value: f64,
    pub m: usize,
    pub iterations_run: usize,
    /// Iterations the theory asks for.
    pub iterations_planned: usize,
    /// The iteration cap was binding.
    pub capped: bool,
    /// An oracle maximizer vanished and the loop stopped early.
    pub degenerate: bool,
    /// Declared oracle approximation factor used for the step size.
    pub kappa: f64,
}

/// JSON form of [`WidthSdpResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthSdpRecord {
    #[serde(rename = "X_star2")]
    pub x_star2: MatrixRecord,
    #[serde(rename = "A_star2")]
    pub a_star2: MatrixRecord,
    pub best_value: f64,
    pub m: usize,
    pub iterations_run: usize,
    pub iterations_planned: usize,
    pub capped: bool,
    pub degenerate: bool,
    pub kappa: f64,
}

impl From<&WidthSdpResult> for WidthSdpRecord {
    fn from(r: &WidthSdpResult) -> Self {
        Self {
            x_star2: (&r.x_star2).into(),
            a_star2: (&r.a_star2).into(),
            best_value: r.best_value,
            m: r.m,
            iterations_run: r.iterations_run,
            iterations_planned: r.iterations_planned,
            capped: r.capped,
            degenerate: r.degenerate,
            kappa: r.kappa,
        }
    }
}

/// `min(⌈(d̃/(C·σ_eff))²⌉, n)`.
pub fn select_width_rank(d_tilde: f64, sigma_eff: f64, c: f64, n: usize) -> Result<usize> {
    if !(sigma_eff > 0.0) || n == 0 || !(d_tilde >= 0.0) {
        return Err(Error::invalid(format!(
            "width rank needs sigma_eff > 0, n >= 1 and d_tilde >= 0 (got {sigma_eff}, {n}, {d_tilde})"
        )));
    }
    let ratio = (d_tilde / (c * sigma_eff)).powi(2);
    if !ratio.is_finite() || ratio >= n as f64 {
        return Ok(n);
    }
    // Ratios like (4/0.8)² land a hair above an integer in floating point.
    let snapped = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) {
        ratio.round()
    } else {
        ratio
    };
    Ok((snapped.ceil() as usize).min(n))
}

/// `(I − X)^{1/2}`, with eigenvalues of `X` clamped into `[0, 1]`.
pub fn shrinkage_matrix(x: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let spec = x.spectral()?;
    let band = 1e-8;
    if let Some(bad) = spec
        .values
        .iter()
        .find(|v| !(**v >= -band && **v <= 1.0 + band))
    {
        return Err(Error::invalid(format!(
            "eigenvalue {bad} of X lies outside [0, 1]"
        )));
    }
    let vals = spec.values.map(|v| (1.0 - v.clamp(0.0, 1.0)).sqrt());
    Ok(SymmetricMatrix::from_spectral(vals, spec.vectors.clone()))
}

fn trivial(n: usize, m: usize, kappa: f64) -> WidthSdpResult {
    let (x, a) = if m == n {
        (SymmetricMatrix::zeros(n), SymmetricMatrix::identity(n))
    } else {
        (SymmetricMatrix::identity(n), SymmetricMatrix::zeros(n))
    };
    WidthSdpResult {
        x_star2: x,
        a_star2: a,
        best_value: f64::NAN,
        m,
        iterations_run: 0,
        iterations_planned: 0,
        capped: false,
        degenerate: false,
        kappa,
    }
}

pub fn solve_width_sdp(
    body: &ConvexBody,
    m: usize,
    oracle: &dyn QfmOracle,
    cfg: &WidthSdpConfig,
    seed: u64,
) -> Result<WidthSdpResult> {
    cfg.validate()?;
    let n = body.dim();
    if oracle.dim() != n {
        return Err(Error::invalid(format!(
            "oracle dimension {} does not match body dimension {n}",
            oracle.dim()
        )));
    }
    if m > n {
        return Err(Error::invalid(format!(
            "width rank m = {m} exceeds n = {n}"
        )));
    }
    let kappa = oracle.kappa().unwrap_or(1.0);
    if m == n || m == 0 {
        let mut r = trivial(n, m, kappa);
        r.best_value = oracle
            .maximize(
                &r.x_star2,
                cfg.oracle_fail_prob,
                rng::derive_seed(seed, &[0]),
            )?
            .value;
        return Ok(r);
    }

    let k = n - m;
    let planned = cfg.theoretical_iterations(n, m, kappa);
    let cap = cfg.iteration_cap(n, m);
    let iterations = if planned > cap as f64 {
        cap
    } else {
        planned.ceil() as usize
    };
    let capped = planned > cap as f64;
    if capped {
        log::warn!("width solve capped at {cap} iterations (theory asks for {planned:.0})");
    }
    let gamma = cfg.learning_rate(kappa);

    let mut x = SymmetricMatrix::scaled_identity(n, k as f64 / n as f64);
    let mut best_x = x.clone();
    let mut best_value = f64::INFINITY;
    let mut warm = WarmStart::default();
    let mut run = 0;
    let mut degenerate = false;
    for j in 0..iterations {
        let res = oracle.maximize_warm(
            &x,
            cfg.oracle_fail_prob,
            rng::derive_seed(seed, &[j as u64]),
            &mut warm,
        )?;
        run = j + 1;
        if res.value < best_value {
            best_value = res.value;
            best_x = x.clone();
        }
        let p = DVector::from_column_slice(&res.point);
        let norm = p.norm();
        if norm < DEGENERATE_NORM {
            degenerate = true;
            break;
        }
        // γ_j ppᵀ with γ_j = γ/‖p‖² is a unit-direction step of length γ.
        let u = p / norm;
        x = project_spectahedron(&x.rank_one_update(-gamma, &u), k)?;
    }
    let a = shrinkage_matrix(&best_x)?;
    Ok(WidthSdpResult {
        x_star2: best_x,
        a_star2: a,
        best_value,
        m,
        iterations_run: run,
        iterations_planned: iterations,
        capped,
        degenerate,
        kappa,
    })
}

/// Memoizes width solves for one body across repeated localization schedules.
///
/// A solve depends on the ball radius, the rank and the oracle failure probability, never on the
/// data, so Monte Carlo trials sharing a body can share the results.
#[derive(Default)]
pub struct WidthCache {
    entries: Mutex<HashMap<(u64, usize, u64), Arc<WidthSdpResult>>>,
}

impl WidthCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_solve(
        &self,
        radius: f64,
        m: usize,
        fail_prob: f64,
        solve: impl FnOnce() -> Result<WidthSdpResult>,
    ) -> Result<Arc<WidthSdpResult>> {
        let key = (radius.to_bits(), m, fail_prob.to_bits());
        if let Some(hit) = self.entries.lock().expect("cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let fresh = Arc::new(solve()?);
        self.entries
            .lock()
            .expect("cache poisoned")
            .insert(key, fresh.clone());
        Ok(fresh)
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
