use nalgebra::DVector;

use super::{check_input, QfmOracle, QfmResult};
use crate::error::{Error, Result};
use crate::geometry::ConvexBody;
use crate::linalg::SymmetricMatrix;

const MAX_ASCENT: usize = 2000;

/// Multi-start ascent for `max pᵀXp` over an arbitrary body.
///
/// Each step moves to a maximizer of the linearization `⟨Xp, ·⟩` over `K`, which never decreases a
/// convex objective. Bodies without a closed-form linear maximizer take a projected gradient step instead.
/// No approximation factor is claimed.
#[derive(Debug, Clone)]
pub struct BruteForceOracle {
    body: ConvexBody,
    starts: usize,
}

impl BruteForceOracle {
    pub fn new(body: ConvexBody, starts: usize) -> Self {
        Self {
            body,
            starts: starts.max(1),
        }
    }

    fn step(&self, p: &DVector<f64>, c: &DVector<f64>) -> Result<Option<DVector<f64>>> {
        if let Some(q) = self.body.linear_maximizer(c) {
            return Ok(Some(q));
        }
        let cn = c.norm();
        if cn == 0.0 {
            return Ok(None);
        }
        // Projected gradient ascent is monotone for convex objectives at any step size.
        let t = self.body.outer_radius() / cn;
        let point = match self
            .body
            .weak_project(&(p + c * t), 1e-9 * self.body.outer_radius())
        {
            Ok(proj) => proj.point,
            Err(Error::ToleranceNotMet { best_point, .. }) => DVector::from_vec(best_point),
            Err(e) => return Err(e),
        };
        let rho = self.body.gauge_unchecked(&point);
        Ok((rho > 0.0).then(|| point / rho))
    }

    fn ascend(&self, x: &SymmetricMatrix, mut p: DVector<f64>) -> Result<(DVector<f64>, f64)> {
        let mut val = x.quadratic_form(&p);
        for _ in 0..MAX_ASCENT {
            let c = x.apply(&p);
            let Some(q) = self.step(&p, &c)? else { break };
            let qv = x.quadratic_form(&q);
            if !(qv > val * (1.0 + 1e-13)) {
                break;
            }
            p = q;
            val = qv;
        }
        Ok((p, val))
    }
}

impl QfmOracle for BruteForceOracle {
    fn dim(&self) -> usize {
        self.body.dim()
    }

    fn kappa(&self) -> Option<f64> {
        None
    }

    fn maximize(&self, x: &SymmetricMatrix, _fail_prob: f64, seed: u64) -> Result<QfmResult> {
        check_input(self.dim(), x)?;
        let mut best: Option<(DVector<f64>, f64)> = None;
        for p0 in self.body.sample_boundary(self.starts, seed) {
            let (p, v) = self.ascend(x, p0)?;
            if best.as_ref().map_or(true, |(_, b)| v > *b) {
                best = Some((p, v));
            }
        }
        let (p, value) = best.expect("at least one start");
        Ok(QfmResult {
            point: p.iter().cloned().collect(),
            value,
            relax_upper: None,
            kappa: None,
            fail_prob: 1.0,
        })
    }

    fn restrict_to_ball(&self, c: f64) -> Result<Box<dyn QfmOracle>> {
        Ok(Box::new(BruteForceOracle::new(
            self.body.localize(c)?,
            self.starts,
        )))
    }
}
