use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, SymmetricMatrix};

/// `{x : Σ (qᵢᵀx)² / aᵢ² ≤ 1}` where the `qᵢ` are the columns of an orthogonal basis
/// (the identity when the ellipsoid is axis aligned).
#[derive(Debug, Clone)]
pub struct Ellipsoid {
    semi_axes: Vec<f64>,
    basis: Option<DMatrix<f64>>,
}

impl Ellipsoid {
    pub fn axis_aligned(semi_axes: Vec<f64>) -> Result<Self> {
        if semi_axes.is_empty() {
            return Err(Error::invalid("ellipsoid needs at least one semi-axis"));
        }
        if semi_axes.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::invalid(
                "ellipsoid semi-axes must be finite and positive",
            ));
        }
        Ok(Self {
            semi_axes,
            basis: None,
        })
    }

    /// Ellipsoid `{x : xᵀMx ≤ 1}` for symmetric positive definite `M`.
    pub fn from_shape_matrix(m: &SymmetricMatrix) -> Result<Self> {
        let spec = symmetric_eigen(m.as_matrix())?;
        let lmin = spec.values[spec.values.len() - 1];
        if lmin <= 1e-12 {
            return Err(Error::invalid(format!(
                "shape matrix is not positive definite (lambda_min = {lmin:.3e})"
            )));
        }
        let semi_axes = spec.values.iter().map(|v| 1.0 / v.sqrt()).collect();
        Ok(Self {
            semi_axes,
            basis: Some(spec.vectors),
        })
    }

    pub fn dim(&self) -> usize {
        self.semi_axes.len()
    }

    pub fn semi_axes(&self) -> &[f64] {
        &self.semi_axes
    }

    pub fn basis(&self) -> Option<&DMatrix<f64>> {
        self.basis.as_ref()
    }

    pub fn max_axis(&self) -> f64 {
        self.semi_axes.iter().cloned().fold(0.0, f64::max)
    }

    pub fn min_axis(&self) -> f64 {
        self.semi_axes.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn to_local(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.basis {
            Some(q) => q.tr_mul(x),
            None => x.clone(),
        }
    }

    pub fn from_local(&self, y: &DVector<f64>) -> DVector<f64> {
        match &self.basis {
            Some(q) => q * y,
            None => y.clone(),
        }
    }

    /// `X ↦ QᵀXQ`, the quadratic form in local coordinates.
    pub fn form_to_local(&self, x: &SymmetricMatrix) -> SymmetricMatrix {
        match &self.basis {
            Some(q) => x.conjugate(q),
            None => x.clone(),
        }
    }

    pub fn shape_matrix(&self) -> DMatrix<f64> {
        let d = DVector::from_iterator(self.dim(), self.semi_axes.iter().map(|a| 1.0 / (a * a)));
        match &self.basis {
            Some(q) => q * DMatrix::from_diagonal(&d) * q.transpose(),
            None => DMatrix::from_diagonal(&d),
        }
    }

    pub(crate) fn local_gauge(&self, y: &DVector<f64>) -> f64 {
        y.iter()
            .zip(&self.semi_axes)
            .map(|(v, a)| (v / a) * (v / a))
            .sum::<f64>()
            .sqrt()
    }

    pub fn gauge(&self, x: &DVector<f64>) -> f64 {
        self.local_gauge(&self.to_local(x))
    }

    pub fn gauge_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let y = self.to_local(x);
        let rho = self.local_gauge(&y);
        if rho == 0.0 {
            return DVector::zeros(self.dim());
        }
        let g = DVector::from_fn(self.dim(), |i, _| y[i] / (self.semi_axes[i].powi(2) * rho));
        self.from_local(&g)
    }

    /// Exact Euclidean projection, by Newton's method on the Lagrange multiplier.
    pub fn project(&self, z: &DVector<f64>) -> DVector<f64> {
        let y = self.to_local(z);
        let x = project_local(&self.semi_axes, &y, 0.0);
        self.from_local(&x)
    }

    /// Exact Euclidean projection onto the ellipsoid intersected with the centered ball of radius `c`.
    pub fn project_with_ball(&self, z: &DVector<f64>, c: f64) -> DVector<f64> {
        let y = self.to_local(z);
        let x = project_local_with_ball(&self.semi_axes, &y, c);
        self.from_local(&x)
    }
}

/// Solves `Σ aᵢ² yᵢ² / (aᵢ²(1+β) + α)² = 1` for `α ≥ 0` and returns the projected point
/// `xᵢ = aᵢ² yᵢ / (aᵢ²(1+β) + α)`, i.e. the minimizer of `½‖x − y‖² + β/2 ‖x‖²` over the ellipsoid.
fn project_local(a: &[f64], y: &DVector<f64>, beta: f64) -> DVector<f64> {
    let s = 1.0 + beta;
    let point = |alpha: f64| {
        DVector::from_fn(a.len(), |i, _| {
            a[i] * a[i] * y[i] / (a[i] * a[i] * s + alpha)
        })
    };
    let phi = |alpha: f64| -> (f64, f64) {
        let mut val = -1.0;
        let mut der = 0.0;
        for i in 0..a.len() {
            let a2 = a[i] * a[i];
            let den = a2 * s + alpha;
            let t = a2 * y[i] * y[i] / (den * den);
            val += t;
            der -= 2.0 * t / den;
        }
        (val, der)
    };
    if phi(0.0).0 <= 0.0 {
        return point(0.0);
    }
    // φ is convex and decreasing, so Newton from the left converges monotonically.
    let mut alpha = 0.0;
    for _ in 0..200 {
        let (val, der) = phi(alpha);
        if val <= 1e-15 || der >= 0.0 {
            break;
        }
        let next = alpha - val / der;
        if !(next > alpha) || (next - alpha) <= 1e-16 * next.abs() {
            alpha = next.max(alpha);
            break;
        }
        alpha = next;
    }
    let mut x = point(alpha);
    let g = x
        .iter()
        .zip(a)
        .map(|(v, ai)| (v / ai) * (v / ai))
        .sum::<f64>()
        .sqrt();
    if g > 1.0 {
        x /= g;
    }
    x
}

fn project_local_with_ball(a: &[f64], y: &DVector<f64>, c: f64) -> DVector<f64> {
    let x_e = project_local(a, y, 0.0);
    if x_e.norm() <= c {
        return x_e;
    }
    let ny = y.norm();
    let x_b = if ny > c { y * (c / ny) } else { y.clone() };
    let gauge_b = x_b
        .iter()
        .zip(a)
        .map(|(v, ai)| (v / ai) * (v / ai))
        .sum::<f64>()
        .sqrt();
    if gauge_b <= 1.0 {
        return x_b;
    }
    // Both constraints active. ‖x(β)‖ decreases along the ellipsoid-optimal multiplier path.
    let mut lo = 0.0;
    let mut hi = (ny / c - 1.0).max(0.0);
    let mut best = x_b;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let x = project_local(a, y, mid);
        if x.norm() > c {
            lo = mid;
        } else {
            hi = mid;
            best = x;
        }
        if hi - lo <= 1e-15 * (1.0 + hi) {
            break;
        }
    }
    let nb = best.norm();
    if nb > c {
        best *= c / nb;
    }
    best
}
