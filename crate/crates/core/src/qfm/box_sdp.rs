use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{check_input, polish, QfmConfig, QfmOracle, QfmResult};
use crate::error::Result;
use crate::geometry::{ConvexBody, InnerNorm};
use crate::linalg::{symmetric_eigen, SymmetricMatrix};
use crate::rng;

/// Relaxation `max ⟨X′, W⟩` over `W ≽ 0, diag W ≤ 1` with `X′ = DXD`, `D = diag(h)`,
/// solved in factored form `W = VVᵀ` by row-wise ascent with row norms clamped to one,
/// then rounded through `sign(Vg)`.
#[derive(Debug, Clone)]
pub struct BoxSdpOracle {
    h: Vec<f64>,
    cfg: QfmConfig,
}

impl BoxSdpOracle {
    pub fn new(h: Vec<f64>, cfg: QfmConfig) -> Self {
        Self { h, cfg }
    }

    fn kappa_value(&self) -> f64 {
        PI / 2.0 * (1.0 + self.cfg.box_kappa_slack)
    }

    pub fn solve(&self, x: &SymmetricMatrix, rounds: usize, seed: u64) -> Result<QfmResult> {
        let n = self.h.len();
        check_input(n, x)?;
        let xs = DMatrix::from_fn(n, n, |i, j| x.as_matrix()[(i, j)] * self.h[i] * self.h[j]);
        let v = self.relax(&xs, seed);
        let upper = dual_bound(&xs, &v)?;

        let body = ConvexBody::hyperrectangle(self.h.clone())?;
        let mut best_s = DVector::from_element(n, 1.0);
        let mut best_val = best_s.dot(&(&xs * &best_s));
        let mut r = rng::stream(seed, &[0x50]);
        for _ in 0..rounds.max(1) {
            let g = rng::gaussian_vector(&mut r, v.ncols());
            let s = (&v * g).map(|t| if t >= 0.0 { 1.0 } else { -1.0 });
            let val = s.dot(&(&xs * &s));
            if val > best_val {
                best_val = val;
                best_s = s;
            }
        }
        let p = DVector::from_fn(n, |i, _| best_s[i] * self.h[i]);
        let p = polish(&body, x, p, 1000);
        let value = x.quadratic_form(&p);
        Ok(QfmResult {
            point: p.iter().cloned().collect(),
            value,
            relax_upper: Some(upper.max(value)),
            kappa: Some(self.kappa_value()),
            fail_prob: self.cfg.fail_prob_for(rounds.max(1)),
        })
    }

    fn relax(&self, xs: &DMatrix<f64>, seed: u64) -> DMatrix<f64> {
        let n = xs.nrows();
        let mut r = rng::stream(seed, &[0x51]);
        let mut v = DMatrix::from_fn(n, n, |_, _| rng::gaussian_vector(&mut r, 1)[0]);
        for i in 0..n {
            let nr = v.row(i).norm();
            v.row_mut(i).scale_mut(1.0 / nr);
        }
        let objective = |v: &DMatrix<f64>| (v.transpose() * xs * v).trace();
        let mut prev = objective(&v);
        for _ in 0..self.cfg.relax_max_iter {
            for i in 0..n {
                let mut g = v.tr_mul(&xs.column(i)).transpose();
                g -= v.row(i) * xs[(i, i)];
                let ng = g.norm();
                if ng > 0.0 {
                    v.set_row(i, &(g / ng));
                }
            }
            let cur = objective(&v);
            if (cur - prev).abs() <= self.cfg.relax_tol * cur.abs().max(1e-300) {
                break;
            }
            prev = cur;
        }
        v
    }
}

/// `Σ yᵢ` for `y ≥ 0` with `Diag(y) ≽ X′`, built from the factored primal.
fn dual_bound(xs: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<f64> {
    let n = xs.nrows();
    let xv = xs * v;
    let y: Vec<f64> = (0..n).map(|i| xv.row(i).dot(&v.row(i)).max(0.0)).collect();
    let slack = xs - DMatrix::from_diagonal(&DVector::from_column_slice(&y));
    let shift = symmetric_eigen(&slack)?.values[0].max(0.0);
    Ok(y.iter().sum::<f64>() + n as f64 * shift)
}

impl QfmOracle for BoxSdpOracle {
    fn dim(&self) -> usize {
        self.h.len()
    }

    fn kappa(&self) -> Option<f64> {
        Some(self.kappa_value())
    }

    fn maximize(&self, x: &SymmetricMatrix, fail_prob: f64, seed: u64) -> Result<QfmResult> {
        self.solve(x, self.cfg.rounds_for(fail_prob), seed)
    }

    fn restrict_to_ball(&self, c: f64) -> Result<Box<dyn QfmOracle>> {
        let n = self.h.len();
        let a = DMatrix::from_diagonal(&DVector::from_iterator(n, self.h.iter().map(|v| 1.0 / v)));
        let t2 = InnerNorm::Linf.t2_bound(n);
        Ok(Box::new(
            super::NormImageOracle::new(a, InnerNorm::Linf, t2, self.cfg.clone()).with_ball(c),
        ))
    }
}
