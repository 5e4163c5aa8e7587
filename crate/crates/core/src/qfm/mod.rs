//! Oracles for `max_{p ∈ K} pᵀXp` with `X ≽ 0`.

mod box_sdp;
mod bruteforce;
mod ellipsoid;
mod norm_image;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use box_sdp::BoxSdpOracle;
pub use bruteforce::BruteForceOracle;
pub use ellipsoid::{EllipsoidBallOracle, EllipsoidOracle};
pub use norm_image::NormImageOracle;

use crate::error::{Error, Result};
use crate::geometry::{ConvexBody, Ellipsoid, InnerNorm, Shape};
use crate::linalg::SymmetricMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QfmResult {
    pub point: Vec<f64>,
    /// `pᵀXp`, a certified lower bound on the maximum.
    pub value: f64,
    /// Upper bound on the maximum, `None` when the oracle has none.
    pub relax_upper: Option<f64>,
    /// Declared approximation factor, `None` for heuristic oracles.
    pub kappa: Option<f64>,
    pub fail_prob: f64,
}

impl QfmResult {
    pub fn point_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.point)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QfmConfig {
    /// Rounds per unit of `log(1/q)`.
    pub boost: f64,
    /// Default failure probability when the caller does not supply one.
    pub fail_prob: f64,
    pub relax_max_iter: usize,
    pub relax_tol: f64,
    pub box_kappa_slack: f64,
    pub bruteforce_starts: usize,
}

impl Default for QfmConfig {
    fn default() -> Self {
        Self {
            boost: 64.0,
            fail_prob: 1e-3,
            relax_max_iter: 3000,
            relax_tol: 1e-10,
            box_kappa_slack: crate::geometry::BOX_KAPPA_SLACK,
            bruteforce_starts: 32,
        }
    }
}

impl QfmConfig {
    pub fn rounds_for(&self, fail_prob: f64) -> usize {
        let q = fail_prob.clamp(1e-300, 0.5);
        (self.boost * (1.0 / q).ln()).ceil().max(1.0) as usize
    }

    pub fn fail_prob_for(&self, rounds: usize) -> f64 {
        (-(rounds as f64) / self.boost).exp()
    }
}

/// Reusable state between calls on slowly varying inputs.
#[derive(Debug, Clone, Default)]
pub struct WarmStart {
    pub multiplier: Option<f64>,
}

pub trait QfmOracle: Send + Sync {
    fn dim(&self) -> usize;

    fn kappa(&self) -> Option<f64>;

    /// Returns a feasible `p` with `pᵀXp ≥ κ⁻¹ max`, except with probability `fail_prob`.
    fn maximize(&self, x: &SymmetricMatrix, fail_prob: f64, seed: u64) -> Result<QfmResult>;

    fn maximize_warm(
        &self,
        x: &SymmetricMatrix,
        fail_prob: f64,
        seed: u64,
        _warm: &mut WarmStart,
    ) -> Result<QfmResult> {
        self.maximize(x, fail_prob, seed)
    }

    /// The oracle for the body intersected with `B(0, c)`.
    fn restrict_to_ball(&self, c: f64) -> Result<Box<dyn QfmOracle>>;
}

pub(crate) fn check_input(n: usize, x: &SymmetricMatrix) -> Result<()> {
    if x.dim() != n {
        return Err(Error::invalid(format!(
            "matrix is {0}x{0}, body has dimension {n}",
            x.dim()
        )));
    }
    Ok(())
}

/// Picks the strongest available oracle for `body`.
pub fn oracle_for(body: &ConvexBody, cfg: &QfmConfig) -> Box<dyn QfmOracle> {
    match body.shape() {
        Shape::Ellipsoid(e) => Box::new(EllipsoidOracle::new(e.clone())),
        Shape::Box(h) => Box::new(BoxSdpOracle::new(h.clone(), cfg.clone())),
        Shape::PBall { p, radius } => Box::new(pball_oracle(body.dim(), *p, *radius, cfg)),
        Shape::NormImage { matrix, inner } => Box::new(NormImageOracle::new(
            matrix.clone(),
            *inner,
            body.t2_bound(),
            cfg.clone(),
        )),
        Shape::Intersection { base, radius } => match base.shape() {
            Shape::Ellipsoid(e) => Box::new(EllipsoidBallOracle::new(e.clone(), *radius)),
            Shape::Box(h) => {
                let a = DMatrix::from_diagonal(&DVector::from_iterator(
                    h.len(),
                    h.iter().map(|v| 1.0 / v),
                ));
                Box::new(
                    NormImageOracle::new(a, InnerNorm::Linf, base.t2_bound(), cfg.clone())
                        .with_ball(*radius),
                )
            }
            Shape::PBall { p, radius: rad } => {
                Box::new(pball_oracle(body.dim(), *p, *rad, cfg).with_ball(*radius))
            }
            Shape::NormImage { matrix, inner } => Box::new(
                NormImageOracle::new(matrix.clone(), *inner, base.t2_bound(), cfg.clone())
                    .with_ball(*radius),
            ),
            _ => Box::new(BruteForceOracle::new(body.clone(), cfg.bruteforce_starts)),
        },
        Shape::Custom(_) => Box::new(BruteForceOracle::new(body.clone(), cfg.bruteforce_starts)),
    }
}

fn pball_oracle(n: usize, p: f64, radius: f64, cfg: &QfmConfig) -> NormImageOracle {
    let a = DMatrix::identity(n, n) / radius;
    let t2 = InnerNorm::Lp { p }.t2_bound(n);
    NormImageOracle::new(a, InnerNorm::Lp { p }, t2, cfg.clone())
}

/// Exact oracle for `{x : xᵀMx ≤ 1}`.
pub fn qfm_ellipsoid(m: &SymmetricMatrix, x: &SymmetricMatrix) -> Result<QfmResult> {
    let e = Ellipsoid::from_shape_matrix(m)?;
    EllipsoidOracle::new(e).maximize(x, 0.0, 0)
}

pub fn qfm_box_sdp(
    half_widths: &[f64],
    x: &SymmetricMatrix,
    rounds: usize,
    seed: u64,
) -> Result<QfmResult> {
    if half_widths.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
        return Err(Error::invalid(
            "box half-widths must be finite and positive",
        ));
    }
    BoxSdpOracle::new(half_widths.to_vec(), QfmConfig::default()).solve(x, rounds, seed)
}

pub fn qfm_norm_image(
    a: &DMatrix<f64>,
    inner: InnerNorm,
    x: &SymmetricMatrix,
    rounds: usize,
    seed: u64,
) -> Result<QfmResult> {
    let body = ConvexBody::norm_image(a.clone(), inner)?;
    NormImageOracle::new(a.clone(), inner, body.t2_bound(), QfmConfig::default())
        .solve(x, rounds, seed)
}

pub fn qfm_intersection(
    base: &dyn QfmOracle,
    c: f64,
    x: &SymmetricMatrix,
    rounds: usize,
    seed: u64,
) -> Result<QfmResult> {
    let cfg = QfmConfig::default();
    base.restrict_to_ball(c)?
        .maximize(x, cfg.fail_prob_for(rounds), seed)
}

pub fn qfm_bruteforce(
    body: &ConvexBody,
    x: &SymmetricMatrix,
    starts: usize,
    seed: u64,
) -> Result<QfmResult> {
    BruteForceOracle::new(body.clone(), starts).maximize(x, 1.0, seed)
}

/// Convex-maximization ascent `p ← argmax_{K} ⟨Xp, ·⟩` from `p`; never decreases `pᵀXp`.
pub(crate) fn polish(
    body: &ConvexBody,
    x: &SymmetricMatrix,
    mut p: DVector<f64>,
    max_iter: usize,
) -> DVector<f64> {
    let mut val = x.quadratic_form(&p);
    for _ in 0..max_iter {
        let c = x.apply(&p);
        let Some(q) = body.linear_maximizer(&c) else {
            break;
        };
        let qv = x.quadratic_form(&q);
        if !(qv > val * (1.0 + 1e-15)) {
            break;
        }
        p = q;
        val = qv;
    }
    p
}
