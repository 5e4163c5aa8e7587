//! Origin-symmetric convex bodies accessed through their gauge.

mod ellipsoid;
mod norms;
mod projection;
mod spec;

use std::f64::consts::{E, PI};
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

pub use ellipsoid::Ellipsoid;
pub use norms::InnerNorm;
pub use projection::WeakProjection;
pub use spec::BodySpec;

use crate::error::{Error, Result};
use crate::rng;

/// Default slack on the box rounding factor.
pub const BOX_KAPPA_SLACK: f64 = 0.05;

pub type GaugeFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyKind {
    Ellipsoid,
    Box,
    Pball,
    NormImage,
    Intersection,
    Custom,
}

#[derive(Clone)]
pub(crate) enum Shape {
    Ellipsoid(Ellipsoid),
    Box(Vec<f64>),
    PBall {
        p: f64,
        radius: f64,
    },
    NormImage {
        matrix: DMatrix<f64>,
        inner: InnerNorm,
    },
    Intersection {
        base: Arc<ConvexBody>,
        radius: f64,
    },
    Custom(GaugeFn),
}

/// A convex body with `r·B₂ ⊆ K ⊆ R·B₂`, immutable once built.
#[derive(Clone)]
pub struct ConvexBody {
    dim: usize,
    shape: Shape,
    inner_radius: f64,
    outer_radius: f64,
    t2_bound: f64,
    kappa_bound: f64,
}

impl fmt::Debug for ConvexBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexBody")
            .field("kind", &self.kind())
            .field("dim", &self.dim)
            .field("inner_radius", &self.inner_radius)
            .field("outer_radius", &self.outer_radius)
            .field("t2_bound", &self.t2_bound)
            .field("kappa_bound", &self.kappa_bound)
            .finish()
    }
}

fn check_positive(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid(format!("{what}: empty")));
    }
    if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::invalid(format!(
            "{what} must be finite and positive"
        )));
    }
    Ok(())
}

fn norm_image_kappa(t2: f64, rows: usize) -> f64 {
    8.0 * E * t2 * t2 * (rows.max(3) as f64).ln()
}

impl ConvexBody {
    pub fn ellipsoid(semi_axes: Vec<f64>) -> Result<Self> {
        check_positive(&semi_axes, "ellipsoid semi-axes")?;
        Ok(Self::from_ellipsoid(Ellipsoid::axis_aligned(semi_axes)?))
    }

    pub fn from_ellipsoid(e: Ellipsoid) -> Self {
        Self {
            dim: e.dim(),
            inner_radius: e.min_axis(),
            outer_radius: e.max_axis(),
            t2_bound: 1.0,
            kappa_bound: 1.0,
            shape: Shape::Ellipsoid(e),
        }
    }

    pub fn euclidean_ball(n: usize, radius: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        Self::ellipsoid(vec![radius; n])
    }

    pub fn hyperrectangle(half_widths: Vec<f64>) -> Result<Self> {
        check_positive(&half_widths, "box half-widths")?;
        let n = half_widths.len();
        let inner = half_widths.iter().cloned().fold(f64::INFINITY, f64::min);
        let outer = half_widths.iter().map(|h| h * h).sum::<f64>().sqrt();
        Ok(Self {
            dim: n,
            inner_radius: inner,
            outer_radius: outer,
            t2_bound: InnerNorm::Linf.t2_bound(n),
            kappa_bound: PI / 2.0 * (1.0 + BOX_KAPPA_SLACK),
            shape: Shape::Box(half_widths),
        })
    }

    /// `{x : ‖x‖_p ≤ radius}` with `p ≥ 2`.
    pub fn p_ball(n: usize, p: f64, radius: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        InnerNorm::Lp { p }.validate()?;
        check_positive(&[radius], "p-ball radius")?;
        let t2 = InnerNorm::Lp { p }.t2_bound(n);
        Ok(Self {
            dim: n,
            inner_radius: radius,
            outer_radius: radius * (n as f64).powf(0.5 - 1.0 / p),
            t2_bound: t2,
            kappa_bound: norm_image_kappa(t2, n),
            shape: Shape::PBall { p, radius },
        })
    }

    /// `{x : ‖Ax‖ ≤ 1}` for a full column rank `m × n` matrix `A`, `m ≥ n`.
    pub fn norm_image(matrix: DMatrix<f64>, inner: InnerNorm) -> Result<Self> {
        inner.validate()?;
        let (m, n) = matrix.shape();
        if n == 0 || m < n {
            return Err(Error::invalid(format!(
                "norm-image matrix is {m}x{n}; need m >= n >= 1"
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("norm-image matrix has non-finite entries"));
        }
        let sv = matrix.clone().svd(false, false).singular_values;
        let smax = sv.max();
        let smin = sv.min();
        if smin <= 1e-10 {
            return Err(Error::invalid(format!(
                "norm-image matrix is rank deficient (sigma_min = {smin:.3e})"
            )));
        }
        // ‖y‖₂ ≥ ‖y‖ ≥ ‖y‖₂·m^{1/q − 1/2} style comparisons give the two radii.
        let (lo, hi) = match inner {
            InnerNorm::Lp { p } => ((m as f64).powf(0.5 - 1.0 / p), 1.0),
            InnerNorm::Linf => ((m as f64).sqrt(), 1.0),
            InnerNorm::L2L1 => (1.0, 2f64.sqrt()),
        };
        // ‖Ax‖ ≤ hi·‖Ax‖₂ ≤ hi·smax·‖x‖₂, and ‖Ax‖ ≥ ‖Ax‖₂/lo ≥ smin‖x‖₂/lo.
        let t2 = inner.t2_bound(m);
        let kappa = match inner {
            InnerNorm::L2L1 => 2.0 * t2.powi(10) * (E * t2).ln().powi(4),
            _ => norm_image_kappa(t2, m),
        };
        Ok(Self {
            dim: n,
            inner_radius: 1.0 / (hi * smax),
            outer_radius: lo / smin,
            t2_bound: t2,
            kappa_bound: kappa,
            shape: Shape::NormImage { matrix, inner },
        })
    }

    /// A body given only by its gauge. The caller vouches for convexity, symmetry and the radii.
    pub fn custom(
        dim: usize,
        gauge: GaugeFn,
        inner_radius: f64,
        outer_radius: f64,
        t2_bound: f64,
        kappa_bound: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        check_positive(
            &[inner_radius, outer_radius, t2_bound, kappa_bound],
            "custom body constants",
        )?;
        if outer_radius < inner_radius || t2_bound < 1.0 || kappa_bound < 1.0 {
            return Err(Error::invalid(
                "custom body needs r <= R, t2 >= 1, kappa >= 1",
            ));
        }
        Ok(Self {
            dim,
            shape: Shape::Custom(gauge),
            inner_radius,
            outer_radius,
            t2_bound,
            kappa_bound,
        })
    }

    /// `K ∩ B(0, c)` with gauge `max(ρ_K, ‖·‖₂/c)`.
    pub fn intersect_ball(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::invalid(format!(
                "ball radius {c} must be finite and positive"
            )));
        }
        if c < self.inner_radius * (1.0 - 1e-12) {
            return Err(Error::invalid(format!(
                "ball radius {c} is below the inner radius {}",
                self.inner_radius
            )));
        }
        let (base, radius) = match &self.shape {
            Shape::Intersection { base, radius } if *radius <= c => {
                return Ok(self.with_radius(base.clone(), *radius))
            }
            Shape::Intersection { base, .. } => (base.clone(), c),
            _ => (Arc::new(self.clone()), c),
        };
        Ok(self.with_radius(base, radius))
    }

    fn with_radius(&self, base: Arc<ConvexBody>, radius: f64) -> Self {
        Self {
            dim: base.dim,
            inner_radius: base.inner_radius.min(radius),
            outer_radius: base.outer_radius.min(radius),
            t2_bound: 2f64.sqrt() * base.t2_bound,
            kappa_bound: 2.0 * base.kappa_bound,
            shape: Shape::Intersection { base, radius },
        }
    }

    /// The set `K ∩ B(0, c)` for any `c > 0`: `K` itself when `c ≥ R`, the ball when `c ≤ r`.
    pub fn localize(&self, c: f64) -> Result<Self> {
        if c >= self.outer_radius {
            Ok(self.clone())
        } else if c <= self.inner_radius {
            Self::euclidean_ball(self.dim, c)
        } else {
            self.intersect_ball(c)
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer_radius
    }

    /// `d̃ = 2R`, the diameter bound used throughout.
    pub fn diameter_bound(&self) -> f64 {
        2.0 * self.outer_radius
    }

    pub fn t2_bound(&self) -> f64 {
        self.t2_bound
    }

    pub fn kappa_bound(&self) -> f64 {
        self.kappa_bound
    }

    pub fn kind(&self) -> BodyKind {
        match &self.shape {
            Shape::Ellipsoid(_) => BodyKind::Ellipsoid,
            Shape::Box(_) => BodyKind::Box,
            Shape::PBall { .. } => BodyKind::Pball,
            Shape::NormImage { .. } => BodyKind::NormImage,
            Shape::Intersection { .. } => BodyKind::Intersection,
            Shape::Custom(_) => BodyKind::Custom,
        }
    }

    pub(crate) fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn as_ellipsoid(&self) -> Option<&Ellipsoid> {
        match &self.shape {
            Shape::Ellipsoid(e) => Some(e),
            _ => None,
        }
    }

    /// For an intersection body, the base body and ball radius.
    pub fn intersection_parts(&self) -> Option<(&ConvexBody, f64)> {
        match &self.shape {
            Shape::Intersection { base, radius } => Some((base.as_ref(), *radius)),
            _ => None,
        }
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "vector has dimension {}, body has {}",
                x.len(),
                self.dim
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("vector has non-finite entries"));
        }
        Ok(())
    }

    pub fn gauge(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.gauge_unchecked(x))
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> Result<bool> {
        Ok(self.gauge(x)? <= 1.0 + tol)
    }

    pub(crate) fn gauge_unchecked(&self, x: &DVector<f64>) -> f64 {
        match &self.shape {
            Shape::Ellipsoid(e) => e.gauge(x),
            Shape::Box(h) => x
                .iter()
                .zip(h)
                .map(|(v, w)| v.abs() / w)
                .fold(0.0, f64::max),
            Shape::PBall { p, radius } => InnerNorm::Lp { p: *p }.eval(x) / radius,
            Shape::NormImage { matrix, inner } => inner.eval(&(matrix * x)),
            Shape::Intersection { base, radius } => base.gauge_unchecked(x).max(x.norm() / radius),
            Shape::Custom(g) => g(x),
        }
    }

    /// A subgradient `g` of the gauge at `x`; for every `y`, `⟨g, y⟩ ≤ ρ_K(y)`.
    pub(crate) fn gauge_subgradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.shape {
            Shape::Ellipsoid(e) => e.gauge_gradient(x),
            Shape::Box(h) => {
                let mut best = 0;
                let mut val = -1.0;
                for i in 0..h.len() {
                    let v = x[i].abs() / h[i];
                    if v > val {
                        val = v;
                        best = i;
                    }
                }
                let mut g = DVector::zeros(self.dim);
                if val > 0.0 {
                    g[best] = x[best].signum() / h[best];
                }
                g
            }
            Shape::PBall { p, radius } => InnerNorm::Lp { p: *p }.subgradient(x) / *radius,
            Shape::NormImage { matrix, inner } => matrix.tr_mul(&inner.subgradient(&(matrix * x))),
            Shape::Intersection { base, radius } => {
                let nb = x.norm();
                if base.gauge_unchecked(x) >= nb / radius {
                    base.gauge_subgradient(x)
                } else if nb > 0.0 {
                    x / (nb * radius)
                } else {
                    DVector::zeros(self.dim)
                }
            }
            Shape::Custom(g) => {
                let h = 1e-6 * (1.0 + x.norm());
                DVector::from_fn(self.dim, |i, _| {
                    let mut a = x.clone();
                    let mut b = x.clone();
                    a[i] += h;
                    b[i] -= h;
                    (g(&a) - g(&b)) / (2.0 * h)
                })
            }
        }
    }

    /// `argmax_{y ∈ K} ⟨c, y⟩` when a closed form exists.
    pub(crate) fn linear_maximizer(&self, c: &DVector<f64>) -> Option<DVector<f64>> {
        match &self.shape {
            Shape::Ellipsoid(e) => {
                let u = e.to_local(c);
                let y = DVector::from_fn(self.dim, |i, _| e.semi_axes()[i].powi(2) * u[i]);
                let s = e.local_gauge(&y);
                (s > 0.0).then(|| e.from_local(&(y / s)))
            }
            Shape::Box(h) => Some(DVector::from_fn(self.dim, |i, _| {
                if c[i] >= 0.0 {
                    h[i]
                } else {
                    -h[i]
                }
            })),
            Shape::PBall { p, radius } => {
                let q = p / (p - 1.0);
                let y = c.map(|v| v.signum() * v.abs().powf(q - 1.0));
                let s = InnerNorm::Lp { p: *p }.eval(&y);
                (s > 0.0).then(|| y * (*radius / s))
            }
            Shape::NormImage { matrix, inner } if matrix.nrows() == matrix.ncols() => {
                // y = A⁻¹z with z maximizing ⟨A⁻ᵀc, z⟩ over the inner unit ball.
                let ainv = matrix.clone().try_inverse()?;
                let d = ainv.tr_mul(c);
                let z = match *inner {
                    InnerNorm::Lp { p } => {
                        let q = p / (p - 1.0);
                        let y = d.map(|v| v.signum() * v.abs().powf(q - 1.0));
                        let s = inner.eval(&y);
                        if s == 0.0 {
                            return None;
                        }
                        y / s
                    }
                    InnerNorm::Linf => d.map(|v| if v >= 0.0 { 1.0 } else { -1.0 }),
                    InnerNorm::L2L1 => return None,
                };
                Some(ainv * z)
            }
            _ => None,
        }
    }

    /// Points with `ρ_K = 1`: Gaussian directions rescaled radially. Deterministic in `seed`.
    pub fn sample_boundary(&self, count: usize, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = rng::stream(seed, &[0xB0DA]);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let g = rng::gaussian_vector(&mut rng, self.dim);
            let rho = self.gauge_unchecked(&g);
            if rho > 0.0 && rho.is_finite() {
                out.push(g / rho);
            }
        }
        out
    }
}
