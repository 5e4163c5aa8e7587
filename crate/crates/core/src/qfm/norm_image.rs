use std::f64::consts::E;

use nalgebra::{DMatrix, DVector};

use super::{check_input, polish, QfmConfig, QfmOracle, QfmResult};
use crate::error::{Error, Result};
use crate::geometry::{ConvexBody, InnerNorm};
use crate::linalg::{symmetric_eigen, top_pencil, SymmetricMatrix};
use crate::rng;

/// Relaxation `max ⟨X, W⟩` over `W ≽ 0, F(W) ≤ 1` for `K = {x : ‖Ax‖ ≤ 1}` (optionally `∩ B(0, c)`),
/// where `F(W) = max(f(diag(AWAᵀ)), tr(W)/c²)`. Since `F` is degree-one homogeneous, the ratio
/// `⟨X, W⟩ / F(W)` is maximized by ascent on a factor `W = VVᵀ` with radial renormalization.
#[derive(Debug, Clone)]
pub struct NormImageOracle {
    a: DMatrix<f64>,
    inner: InnerNorm,
    t2: f64,
    ball: Option<f64>,
    cfg: QfmConfig,
}

struct Relaxed {
    v: DMatrix<f64>,
    d: Vec<f64>,
}

impl NormImageOracle {
    pub fn new(a: DMatrix<f64>, inner: InnerNorm, t2: f64, cfg: QfmConfig) -> Self {
        Self {
            a,
            inner,
            t2,
            ball: None,
            cfg,
        }
    }

    pub fn with_ball(mut self, c: f64) -> Self {
        self.ball = Some(self.ball.map_or(c, |b| b.min(c)));
        self
    }

    fn kappa_value(&self) -> f64 {
        let base = match self.inner {
            InnerNorm::L2L1 => 2.0 * self.t2.powi(10) * (E * self.t2).ln().powi(4),
            _ => 8.0 * E * self.t2 * self.t2 * (self.a.nrows().max(3) as f64).ln(),
        };
        if self.ball.is_some() {
            2.0 * base
        } else {
            base
        }
    }

    fn gauge(&self, x: &DVector<f64>) -> f64 {
        let g = self.inner.eval(&(&self.a * x));
        match self.ball {
            Some(c) => g.max(x.norm() / c),
            None => g,
        }
    }

    fn diag(&self, v: &DMatrix<f64>) -> Result<Vec<f64>> {
        let av = &self.a * v;
        let d: Vec<f64> = (0..av.nrows()).map(|i| av.row(i).norm_squared()).collect();
        if d.iter().any(|x| !x.is_finite() || *x < -1e-12) {
            return Err(Error::numeric(
                "relaxed constraint diagonal is not finite and nonnegative",
            ));
        }
        Ok(d)
    }

    fn constraint(&self, v: &DMatrix<f64>) -> Result<(f64, bool, Vec<f64>)> {
        let d = self.diag(v)?;
        let fv = self.inner.relax_value(&d);
        match self.ball {
            Some(c) => {
                let tv = v.norm_squared() / (c * c);
                Ok((fv.max(tv), fv >= tv, d))
            }
            None => Ok((fv, true, d)),
        }
    }

    fn normalized(&self, mut v: DMatrix<f64>) -> Result<(DMatrix<f64>, bool, Vec<f64>)> {
        let (f, norm_active, _) = self.constraint(&v)?;
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::numeric("relaxed constraint vanished"));
        }
        v /= f.sqrt();
        let d = self.diag(&v)?;
        Ok((v, norm_active, d))
    }

    fn relax(&self, x: &DMatrix<f64>) -> Result<Relaxed> {
        let n = x.nrows();
        let (mut v, mut active, mut d) = self.normalized(DMatrix::identity(n, n))?;
        let objective = |v: &DMatrix<f64>| (v.transpose() * x * v).trace();
        let mut val = objective(&v);
        let lam = symmetric_eigen(x)?.values[0].max(1e-300);
        let mut eta = 1.0 / lam;
        let mut stall = 0usize;
        for _ in 0..self.cfg.relax_max_iter {
            let grad_f = if active {
                let w = self.inner.relax_gradient(&d);
                let mut aw = self.a.clone();
                for (i, wi) in w.iter().enumerate() {
                    aw.row_mut(i).scale_mut(*wi);
                }
                self.a.tr_mul(&aw)
            } else {
                let c = self.ball.unwrap_or(1.0);
                DMatrix::identity(n, n) / (c * c)
            };
            let dir = (x - grad_f * val) * &v;
            let mut improved = false;
            for _ in 0..40 {
                let (cand, act, dd) = self.normalized(&v + &dir * eta)?;
                let cv = objective(&cand);
                if cv > val {
                    let gain = (cv - val) / cv.abs().max(1e-300);
                    v = cand;
                    active = act;
                    d = dd;
                    val = cv;
                    eta *= 1.5;
                    improved = true;
                    stall = if gain <= self.cfg.relax_tol {
                        stall + 1
                    } else {
                        0
                    };
                    break;
                }
                eta *= 0.5;
            }
            if !improved || stall >= 5 {
                break;
            }
        }
        Ok(Relaxed { v, d })
    }

    fn upper_bound(&self, x: &DMatrix<f64>, d: &[f64]) -> Result<f64> {
        let y = self.inner.dual_weights(d);
        let mut ay = self.a.clone();
        for (i, yi) in y.iter().enumerate() {
            ay.row_mut(i).scale_mut(*yi);
        }
        let b = self.a.tr_mul(&ay);
        let n = x.nrows();
        let Some(c) = self.ball else {
            return Ok(top_pencil(x, &b)?.0);
        };
        let ball = DMatrix::identity(n, n) / (c * c);
        let phi = |t: f64| -> Result<f64> { Ok(top_pencil(x, &(&b * t + &ball * (1.0 - t)))?.0) };
        let mut best = phi(0.0)?.min(phi(1.0)?);
        // The dual objective is quasi-convex in t.
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let mut f1 = phi(x1)?;
        let mut f2 = phi(x2)?;
        for _ in 0..60 {
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = phi(x1)?;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = phi(x2)?;
            }
            best = best.min(f1).min(f2);
        }
        Ok(best)
    }

    pub fn solve(&self, x: &SymmetricMatrix, rounds: usize, seed: u64) -> Result<QfmResult> {
        let n = self.a.ncols();
        check_input(n, x)?;
        let xm = x.as_matrix();
        let relaxed = self.relax(xm)?;
        let upper = self.upper_bound(xm, &relaxed.d)?;

        let mut best_p = DVector::zeros(n);
        let mut best_val = -1.0;
        let mut r = rng::stream(seed, &[0x4E]);
        for _ in 0..rounds.max(1) {
            let g = rng::gaussian_vector(&mut r, relaxed.v.ncols());
            let q = &relaxed.v * g;
            let rho = self.gauge(&q);
            if !(rho > 0.0) {
                continue;
            }
            let p = q / rho;
            let val = x.quadratic_form(&p);
            if val > best_val {
                best_val = val;
                best_p = p;
            }
        }
        if self.ball.is_none() {
            let body = ConvexBody::norm_image(self.a.clone(), self.inner)?;
            best_p = polish(&body, x, best_p, 1000);
        }
        let rho = self.gauge(&best_p);
        if rho > 1.0 {
            best_p /= rho;
        }
        let value = x.quadratic_form(&best_p);
        Ok(QfmResult {
            point: best_p.iter().cloned().collect(),
            value,
            relax_upper: Some(upper.max(value)),
            kappa: Some(self.kappa_value()),
            fail_prob: self.cfg.fail_prob_for(rounds.max(1)),
        })
    }
}

impl QfmOracle for NormImageOracle {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn kappa(&self) -> Option<f64> {
        Some(self.kappa_value())
    }

    fn maximize(&self, x: &SymmetricMatrix, fail_prob: f64, seed: u64) -> Result<QfmResult> {
        self.solve(x, self.cfg.rounds_for(fail_prob), seed)
    }

    fn restrict_to_ball(&self, c: f64) -> Result<Box<dyn QfmOracle>> {
        Ok(Box::new(self.clone().with_ball(c)))
    }
}
