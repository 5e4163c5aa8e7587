use nalgebra::{DMatrix, DVector};

use super::{check_input, QfmOracle, QfmResult, WarmStart};
use crate::error::Result;
use crate::geometry::Ellipsoid;
use crate::linalg::{top_pencil_diag, SymmetricMatrix};

/// Relative primal-dual gap at which the intersection search stops.
const GAP_TOL: f64 = 1e-12;

/// Exact oracle: the top generalized eigenvector of `(X, M)`.
#[derive(Debug, Clone)]
pub struct EllipsoidOracle {
    ell: Ellipsoid,
}

impl EllipsoidOracle {
    pub fn new(ell: Ellipsoid) -> Self {
        Self { ell }
    }
}

fn finish(
    ell: &Ellipsoid,
    xl: &SymmetricMatrix,
    mut pl: DVector<f64>,
    c: Option<f64>,
    upper: f64,
) -> QfmResult {
    let mut g = ell.local_gauge(&pl);
    if let Some(c) = c {
        g = g.max(pl.norm() / c);
    }
    if g > 0.0 {
        pl /= g;
    }
    let value = xl.quadratic_form(&pl);
    let p = ell.from_local(&pl);
    QfmResult {
        point: p.iter().cloned().collect(),
        value,
        relax_upper: Some(upper.max(value)),
        kappa: Some(1.0),
        fail_prob: 0.0,
    }
}

impl QfmOracle for EllipsoidOracle {
    fn dim(&self) -> usize {
        self.ell.dim()
    }

    fn kappa(&self) -> Option<f64> {
        Some(1.0)
    }

    fn maximize(&self, x: &SymmetricMatrix, _fail_prob: f64, _seed: u64) -> Result<QfmResult> {
        check_input(self.dim(), x)?;
        let xl = self.ell.form_to_local(x);
        let b: Vec<f64> = self.ell.semi_axes().iter().map(|a| 1.0 / (a * a)).collect();
        let (lambda, pl, _) = top_pencil_diag(xl.as_matrix(), &b)?;
        Ok(finish(&self.ell, &xl, pl, None, lambda))
    }

    fn restrict_to_ball(&self, c: f64) -> Result<Box<dyn QfmOracle>> {
        Ok(Box::new(EllipsoidBallOracle::new(self.ell.clone(), c)))
    }
}

/// Exact oracle for an ellipsoid intersected with a centered ball.
///
/// With two quadratic constraints the semidefinite relaxation is tight, and its dual reduces to
/// `min_{t ∈ [0,1]} λ_max(X; t·M + (1−t)·I/c²)`. The minimizing `t` is the sign change of
/// `h(t) = pᵀMp − ‖p‖²/c²` at the top pencil eigenvector `p`, located by safeguarded Newton.
#[derive(Debug, Clone)]
pub struct EllipsoidBallOracle {
    ell: Ellipsoid,
    c: f64,
}

struct Eval {
    t: f64,
    lambda: f64,
    second: f64,
    p: DVector<f64>,
    p2: DVector<f64>,
    h: f64,
    /// `dh/dt` from first-order eigenvector perturbation; `-∞` at a multiple top eigenvalue.
    dh: f64,
}

impl EllipsoidBallOracle {
    pub fn new(ell: Ellipsoid, c: f64) -> Self {
        Self { ell, c }
    }

    fn eval(&self, xl: &DMatrix<f64>, t: f64) -> Result<Eval> {
        let inv_c2 = 1.0 / (self.c * self.c);
        let a = self.ell.semi_axes();
        let b: Vec<f64> = a
            .iter()
            .map(|ai| t / (ai * ai) + (1.0 - t) * inv_c2)
            .collect();
        let (lambda, p, spec) = top_pencil_diag(xl, &b)?;
        let n = a.len();
        let (second, p2) = if n > 1 {
            let s = DVector::from_fn(n, |i, _| spec.vectors[(i, 1)] / b[i].sqrt());
            (spec.values[1], s)
        } else {
            (f64::NEG_INFINITY, DVector::zeros(n))
        };
        // In the scaled basis h = w₁ᵀEw₁ with E = diag(δ/b), δ = dB/dt, and dS/dt = −(ES + SE)/2.
        let e: Vec<f64> = a
            .iter()
            .zip(&b)
            .map(|(ai, bi)| (1.0 / (ai * ai) - inv_c2) / bi)
            .collect();
        let w1 = spec.vectors.column(0);
        let h = (0..n).map(|i| e[i] * w1[i] * w1[i]).sum::<f64>();
        let mut dh = -(0..n).map(|i| (e[i] * w1[i]).powi(2)).sum::<f64>();
        let mu1 = spec.values[0];
        for k in 1..n {
            let ek: f64 = (0..n).map(|i| e[i] * w1[i] * spec.vectors[(i, k)]).sum();
            let gap = mu1 - spec.values[k];
            if gap <= 1e-14 * mu1.abs().max(1e-300) {
                if ek.abs() > 0.0 {
                    dh = f64::NEG_INFINITY;
                    break;
                }
                continue;
            }
            dh -= (mu1 + spec.values[k]) / gap * ek * ek;
        }
        Ok(Eval {
            t,
            lambda,
            second,
            p,
            p2,
            h,
            dh,
        })
    }

    fn h_form(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let inv_c2 = 1.0 / (self.c * self.c);
        self.ell
            .semi_axes()
            .iter()
            .enumerate()
            .map(|(i, ai)| u[i] * v[i] * (1.0 / (ai * ai) - inv_c2))
            .sum()
    }

    /// At a multiple top eigenvalue, rotate within the top pair to zero out `h`.
    fn balance(&self, e: &Eval) -> DVector<f64> {
        if !(e.lambda - e.second <= 1e-9 * e.lambda.abs().max(1e-300)) {
            return e.p.clone();
        }
        self.mix(&e.p, e.h, &e.p2)
    }

    /// A unit combination `cos φ·u + sin φ·v` with `h = 0`, when `h(u)` and `h(v)` differ in sign.
    fn mix(&self, u: &DVector<f64>, h11: f64, v: &DVector<f64>) -> DVector<f64> {
        let h22 = self.h_form(v, v);
        let h12 = self.h_form(u, v);
        if h11 * h22 > 0.0 {
            return u.clone();
        }
        // h(φ) = h11 cos²φ + 2 h12 cosφ sinφ + h22 sin²φ; solve in s = tanφ.
        let (qa, qb, qc) = (h22, 2.0 * h12, h11);
        let s = if qa.abs() < 1e-300 {
            -qc / qb
        } else {
            let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
            (-qb + disc) / (2.0 * qa)
        };
        if !s.is_finite() {
            return v.clone();
        }
        (u + v * s) / (1.0 + s * s).sqrt()
    }

    /// Magnitude of `h` for a `p` normalized in the pencil metric.
    fn h_scale(&self) -> f64 {
        let inv_c2 = 1.0 / (self.c * self.c);
        let a = self.ell.semi_axes();
        let spread = a
            .iter()
            .map(|ai| (1.0 / (ai * ai) - inv_c2).abs())
            .fold(0.0, f64::max);
        let floor = a.iter().map(|ai| 1.0 / (ai * ai)).fold(inv_c2, f64::min);
        spread / floor
    }

    /// `pᵀXp` after scaling `p` onto the boundary of the intersection.
    fn scaled_value(&self, xl: &SymmetricMatrix, p: &DVector<f64>) -> f64 {
        let g = self.ell.local_gauge(p).max(p.norm() / self.c);
        if g > 0.0 {
            xl.quadratic_form(p) / (g * g)
        } else {
            0.0
        }
    }
}

impl QfmOracle for EllipsoidBallOracle {
    fn dim(&self) -> usize {
        self.ell.dim()
    }

    fn kappa(&self) -> Option<f64> {
        Some(1.0)
    }

    fn maximize(&self, x: &SymmetricMatrix, fail_prob: f64, seed: u64) -> Result<QfmResult> {
        self.maximize_warm(x, fail_prob, seed, &mut WarmStart::default())
    }

    fn maximize_warm(
        &self,
        x: &SymmetricMatrix,
        _fail_prob: f64,
        _seed: u64,
        warm: &mut WarmStart,
    ) -> Result<QfmResult> {
        check_input(self.dim(), x)?;
        let xl = self.ell.form_to_local(x);
        let xm = xl.as_matrix();
        if self.c >= self.ell.max_axis() {
            let e = self.eval(xm, 1.0)?;
            return Ok(finish(&self.ell, &xl, e.p, Some(self.c), e.lambda));
        }
        let mut upper = f64::INFINITY;
        let run = |t: f64, upper: &mut f64| -> Result<Eval> {
            let e = self.eval(xm, t)?;
            *upper = upper.min(e.lambda);
            Ok(e)
        };

        // Safeguarded Newton on the decreasing function h, keeping a sign bracket once one exists.
        let mut e = run(warm.multiplier.unwrap_or(1.0).clamp(0.0, 1.0), &mut upper)?;
        let (mut lo, mut hi): (Option<Eval>, Option<Eval>) = (None, None);
        let mut last_abs_h = f64::INFINITY;
        let h_tol = 1e-13 * self.h_scale();
        for _ in 0..100 {
            if e.h.abs() <= h_tol || (e.t >= 1.0 && e.h >= 0.0) || (e.t <= 0.0 && e.h <= 0.0) {
                break;
            }
            let newton = if e.dh.is_finite() && e.dh < 0.0 {
                e.t - e.h / e.dh
            } else {
                f64::NAN
            };
            let slow = e.h.abs() > 0.5 * last_abs_h;
            last_abs_h = e.h.abs();
            if e.h > 0.0 {
                lo = Some(e);
            } else {
                hi = Some(e);
            }
            let (l, u) = (
                lo.as_ref().map_or(0.0, |v| v.t),
                hi.as_ref().map_or(1.0, |v| v.t),
            );
            if let (Some(a), Some(b)) = (&lo, &hi) {
                // Near a jump of h the endpoints straddle two eigenvectors; their balanced mix certifies the bound.
                let cand = self.mix(&a.p, a.h, &b.p);
                if self.scaled_value(&xl, &cand) >= upper * (1.0 - GAP_TOL) || u - l <= 1e-15 {
                    warm.multiplier = Some(0.5 * (l + u));
                    return Ok(finish(&self.ell, &xl, cand, Some(self.c), upper));
                }
            }
            let both = lo.is_some() && hi.is_some();
            let t = if newton > l && newton < u && !(both && slow) {
                newton
            } else if both {
                0.5 * (l + u)
            } else if newton.is_finite() {
                newton.clamp(0.0, 1.0)
            } else if lo.is_some() {
                0.5 * (l + 1.0)
            } else {
                0.5 * u
            };
            e = run(t, &mut upper)?;
        }
        warm.multiplier = Some(e.t);
        let p = self.balance(&e);
        Ok(finish(&self.ell, &xl, p, Some(self.c), upper))
    }

    fn restrict_to_ball(&self, c: f64) -> Result<Box<dyn QfmOracle>> {
        Ok(Box::new(EllipsoidBallOracle::new(
            self.ell.clone(),
            self.c.min(c),
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexBody;
    use crate::rng;

    #[test]
    fn intersection_oracle_beats_dense_sampling() {
        let body = ConvexBody::ellipsoid(vec![4.0, 1.0])
            .unwrap()
            .intersect_ball(2.0)
            .unwrap();
        let oracle =
            EllipsoidBallOracle::new(Ellipsoid::axis_aligned(vec![4.0, 1.0]).unwrap(), 2.0);
        for seed in 0..20 {
            let mut r = rng::stream(seed, &[]);
            let g = DMatrix::from_fn(2, 2, |_, _| rng::gaussian_vector(&mut r, 1)[0]);
            let x = SymmetricMatrix::new(&g * g.transpose()).unwrap();
            let res = oracle.maximize(&x, 0.0, 0).unwrap();
            let sampled = body
                .sample_boundary(100_000, seed)
                .iter()
                .map(|p| x.quadratic_form(p))
                .fold(0.0, f64::max);
            assert!(res.value >= sampled - 1e-9, "{} < {sampled}", res.value);
            assert!(res.value <= sampled * (1.0 + 1e-3));
            assert!((res.relax_upper.unwrap() - res.value).abs() <= 1e-8 * res.value);
        }
    }

    #[test]
    fn warm_start_reaches_same_answer() {
        let ell = Ellipsoid::axis_aligned(vec![4.0, 2.0, 1.0, 0.5]).unwrap();
        let oracle = EllipsoidBallOracle::new(ell, 1.5);
        let mut warm = WarmStart::default();
        for seed in 0..30 {
            let mut r = rng::stream(seed, &[1]);
            let g = DMatrix::from_fn(4, 4, |_, _| rng::gaussian_vector(&mut r, 1)[0]);
            let x = SymmetricMatrix::new(&g * g.transpose()).unwrap();
            let cold = oracle.maximize(&x, 0.0, 0).unwrap();
            let hot = oracle.maximize_warm(&x, 0.0, 0, &mut warm).unwrap();
            assert!((cold.value - hot.value).abs() <= 1e-8 * cold.value);
            assert!((cold.relax_upper.unwrap() - cold.value).abs() <= 1e-8 * cold.value);
        }
    }

    #[test]
    fn multiplier_derivative_matches_finite_differences() {
        let oracle = EllipsoidBallOracle::new(
            Ellipsoid::axis_aligned(vec![3.0, 2.0, 1.0, 0.5]).unwrap(),
            1.2,
        );
        let mut r = rng::stream(5, &[]);
        let g = DMatrix::from_fn(4, 4, |_, _| rng::gaussian_vector(&mut r, 1)[0]);
        let x = &g * g.transpose();
        for t in [0.1, 0.4, 0.8] {
            let e = oracle.eval(&x, t).unwrap();
            let step = 1e-6;
            let fd = (oracle.eval(&x, t + step).unwrap().h - oracle.eval(&x, t - step).unwrap().h)
                / (2.0 * step);
            assert!(
                (e.dh - fd).abs() <= 1e-5 * fd.abs().max(1.0),
                "t {t}: {} vs {fd}",
                e.dh
            );
        }
    }

    #[test]
    fn degenerate_top_eigenvalue_is_balanced() {
        // X = I on ellipsoid (4,1) ∩ B(0,2): max ‖p‖² = 4 on the circle, attained inside the ellipsoid band.
        let oracle =
            EllipsoidBallOracle::new(Ellipsoid::axis_aligned(vec![4.0, 1.0]).unwrap(), 2.0);
        let res = oracle
            .maximize(&SymmetricMatrix::identity(2), 0.0, 0)
            .unwrap();
        assert!((res.value - 4.0).abs() < 1e-8, "{}", res.value);
    }
}
