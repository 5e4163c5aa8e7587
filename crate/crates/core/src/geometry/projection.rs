use nalgebra::DVector;

use super::{ConvexBody, InnerNorm, Shape};
use crate::error::{Error, Result};

/// Approximate Euclidean projection with a two-sided certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakProjection {
    pub point: DVector<f64>,
    /// `w ≥ ‖z − p‖₂`.
    pub certificate: f64,
    /// A certified lower bound on the distance from `z` to the body.
    pub lower_bound: f64,
}

const OUTER_ITERS: usize = 200;
const INNER_ITERS: usize = 4000;
const DYKSTRA_ITERS: usize = 2000;

impl ConvexBody {
    /// Returns `p` with `ρ_K(p) ≤ 1` and `w = ‖z − p‖₂` with `w − eps ≤ dist(z, K)`.
    pub fn weak_project(&self, z: &DVector<f64>, eps: f64) -> Result<WeakProjection> {
        if !(eps > 0.0) {
            return Err(Error::invalid(format!(
                "projection tolerance {eps} must be positive"
            )));
        }
        self.check_dim(z)?;
        if self.gauge_unchecked(z) <= 1.0 {
            return Ok(WeakProjection {
                point: z.clone(),
                certificate: 0.0,
                lower_bound: 0.0,
            });
        }
        let exact = match &self.shape {
            Shape::Ellipsoid(e) => Some(e.project(z)),
            Shape::Box(h) => Some(DVector::from_fn(self.dim, |i, _| z[i].clamp(-h[i], h[i]))),
            Shape::PBall { p, radius } => Some(project_pball(z, *p, *radius)),
            Shape::Intersection { base, radius } => match &base.shape {
                Shape::Ellipsoid(e) => Some(e.project_with_ball(z, *radius)),
                _ => None,
            },
            _ => None,
        };
        if let Some(p) = exact {
            let p = self.rescale(p);
            let w = (z - &p).norm();
            return Ok(WeakProjection {
                point: p,
                certificate: w,
                lower_bound: w,
            });
        }
        match &self.shape {
            Shape::Intersection { base, radius } => self.dykstra(base, *radius, z, eps),
            _ => self.penalty_path(z, eps),
        }
    }

    fn rescale(&self, p: DVector<f64>) -> DVector<f64> {
        let g = self.gauge_unchecked(&p);
        if g > 1.0 {
            p / g
        } else {
            p
        }
    }

    /// Distance from `z` to the supporting half-space `{⟨g, x⟩ ≤ 1}`, maximized over the
    /// available subgradients taken at the boundary point in the direction of `p`.
    fn halfspace_bound(&self, z: &DVector<f64>, p: &DVector<f64>) -> f64 {
        let rho = self.gauge_unchecked(p);
        if rho <= 0.0 {
            return 0.0;
        }
        let b = p / rho;
        let bound = |g: &DVector<f64>| {
            let ng = g.norm();
            if ng > 0.0 {
                ((g.dot(z) - 1.0) / ng).max(0.0)
            } else {
                0.0
            }
        };
        match &self.shape {
            Shape::Intersection { base, radius } => {
                // Any convex combination of the two gauges' subgradients is valid.
                let g1 = base.gauge_subgradient(&b);
                let g2 = &b / (b.norm() * radius);
                (0..=200)
                    .map(|t| {
                        let t = t as f64 / 200.0;
                        bound(&(&g1 * t + &g2 * (1.0 - t)))
                    })
                    .fold(0.0, f64::max)
            }
            _ => bound(&self.gauge_subgradient(&b)),
        }
    }

    /// Minimizes `½‖x − z‖² + (λ/2)ρ²(x)` and tunes `λ` until `ρ(x(λ)) = 1`.
    fn penalty_path(&self, z: &DVector<f64>, eps: f64) -> Result<WeakProjection> {
        let radial = z / self.gauge_unchecked(z);
        let mut best_p = radial.clone();
        let mut best_upper = (z - &radial).norm();
        let mut best_lower = self.halfspace_bound(z, &radial);
        if best_upper - best_lower <= eps {
            return Ok(WeakProjection {
                point: best_p,
                certificate: best_upper,
                lower_bound: best_lower,
            });
        }
        let mut x = radial;
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        let mut lam = best_upper.max(1e-8);
        for _ in 0..OUTER_ITERS {
            x = self.penalized_minimizer(z, lam, x);
            let rho = self.gauge_unchecked(&x);
            let cand = if rho > 1.0 { &x / rho } else { x.clone() };
            let upper = (z - &cand).norm();
            if upper < best_upper {
                best_upper = upper;
                best_p = cand;
            }
            best_lower = best_lower.max(self.halfspace_bound(z, &x));
            if best_upper - best_lower <= eps {
                return Ok(WeakProjection {
                    point: best_p,
                    certificate: best_upper,
                    lower_bound: best_lower,
                });
            }
            if rho > 1.0 {
                lo = lam;
            } else {
                hi = lam;
            }
            lam = if hi.is_finite() {
                if lo > 0.0 {
                    (lo * hi).sqrt()
                } else {
                    hi / 4.0
                }
            } else {
                lam * 4.0
            };
            if hi.is_finite() && (hi - lo) <= 1e-15 * hi {
                break;
            }
        }
        Err(Error::ToleranceNotMet {
            message: format!(
                "weak projection gap {:.3e} exceeds tolerance {eps:.3e}",
                best_upper - best_lower
            ),
            best_point: best_p.iter().cloned().collect(),
            best_value: best_upper,
        })
    }

    fn penalized_minimizer(&self, z: &DVector<f64>, lam: f64, start: DVector<f64>) -> DVector<f64> {
        let objective = |x: &DVector<f64>| {
            let r = self.gauge_unchecked(x);
            0.5 * (x - z).norm_squared() + 0.5 * lam * r * r
        };
        let gradient = |x: &DVector<f64>| {
            let r = self.gauge_unchecked(x);
            (x - z) + self.gauge_subgradient(x) * (lam * r)
        };
        let tol = 1e-13 * (1.0 + z.norm());
        let mut step = 1.0 / (1.0 + lam / (self.inner_radius * self.inner_radius));
        let mut x = start;
        let mut y = x.clone();
        let mut fx = objective(&x);
        let mut t = 1.0f64;
        for _ in 0..INNER_ITERS {
            let gy = gradient(&y);
            if gy.norm() <= tol {
                x = y;
                break;
            }
            let fy = objective(&y);
            // Backtracking on the sufficient-decrease condition.
            let mut cand;
            loop {
                cand = &y - &gy * step;
                if objective(&cand) <= fy - 0.5 * step * gy.norm_squared() || step < 1e-20 {
                    break;
                }
                step *= 0.5;
            }
            let fc = objective(&cand);
            if fc > fx {
                // Restart momentum.
                y = x.clone();
                t = 1.0;
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &cand + (&cand - &x) * ((t - 1.0) / t_next);
            if (fx - fc).abs() <= 1e-16 * (1.0 + fx.abs()) {
                x = cand;
                break;
            }
            x = cand;
            fx = fc;
            t = t_next;
            step *= 1.5;
        }
        x
    }

    fn dykstra(
        &self,
        base: &ConvexBody,
        radius: f64,
        z: &DVector<f64>,
        eps: f64,
    ) -> Result<WeakProjection> {
        let n = self.dim;
        let mut x = z.clone();
        let mut pa = DVector::zeros(n);
        let mut qa = DVector::zeros(n);
        let tol = 1e-13 * (1.0 + z.norm());
        let mut best = self.rescale(x.clone());
        let mut best_upper = (z - &best).norm();
        let mut best_lower = 0.0f64;
        for it in 0..DYKSTRA_ITERS {
            let y = base
                .weak_project(&(&x + &pa), (eps * 1e-3).max(1e-14))?
                .point;
            let pa_next = &x + &pa - &y;
            let w = &y + &qa;
            let nw = w.norm();
            let xn = if nw > radius {
                &w * (radius / nw)
            } else {
                w.clone()
            };
            let qa_next = &w - &xn;
            // The iterate can stall while the correction terms still move.
            let moved = (&xn - &x).norm() + (&pa_next - &pa).norm() + (&qa_next - &qa).norm();
            pa = pa_next;
            qa = qa_next;
            x = xn;
            if it % 10 == 0 || moved <= tol {
                let cand = self.rescale(x.clone());
                let upper = (z - &cand).norm();
                if upper < best_upper {
                    best_upper = upper;
                    best = cand;
                }
                best_lower = best_lower.max(self.halfspace_bound(z, &x));
                if best_upper - best_lower <= eps {
                    return Ok(WeakProjection {
                        point: best,
                        certificate: best_upper,
                        lower_bound: best_lower,
                    });
                }
            }
            if moved <= tol {
                break;
            }
        }
        Err(Error::ToleranceNotMet {
            message: format!(
                "alternating projection gap {:.3e} exceeds tolerance {eps:.3e}",
                best_upper - best_lower
            ),
            best_point: best.iter().cloned().collect(),
            best_value: best_upper,
        })
    }
}

/// Exact projection onto `{‖x‖_p ≤ radius}`: per-coordinate Newton solves inside a bisection on the multiplier.
fn project_pball(z: &DVector<f64>, p: f64, radius: f64) -> DVector<f64> {
    let target = radius.powf(p);
    let abs: Vec<f64> = z.iter().map(|v| v.abs()).collect();
    let shrink = |mu: f64| -> Vec<f64> {
        abs.iter()
            .map(|&a| {
                if a == 0.0 {
                    return 0.0;
                }
                // t + μ p t^{p−1} = a on [0, a]; increasing and convex, so Newton from the right is monotone.
                let mut t = a;
                for _ in 0..100 {
                    let f = t + mu * p * t.powf(p - 1.0) - a;
                    let d = 1.0 + mu * p * (p - 1.0) * t.powf(p - 2.0);
                    let next = (t - f / d).max(0.0);
                    if (t - next).abs() <= 1e-16 * a {
                        t = next;
                        break;
                    }
                    t = next;
                }
                t
            })
            .collect()
    };
    let total = |t: &[f64]| t.iter().map(|v| v.powf(p)).sum::<f64>();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while total(&shrink(hi)) > target {
        hi *= 4.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(&shrink(mid)) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    let t = shrink(hi);
    let x = DVector::from_fn(z.len(), |i, _| z[i].signum() * t[i]);
    let g = InnerNorm::Lp { p }.eval(&x) / radius;
    if g > 1.0 {
        x / g
    } else {
        x
    }
}
