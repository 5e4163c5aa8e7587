//! Monte Carlo risk evaluation over experiment plans.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::noise::{corrupt, draw_noise, radial_fraction, Adversary, NoiseKind};
use super::oracles::{baseline_truncated_series, pinsker_risk};
use crate::error::{Error, Result};
use crate::estimators::{center_pairs, EstimationConfig, Estimator, RegressionData, RobustConfig};
use crate::geometry::{BodySpec, ConvexBody};
use crate::rng::{self, Stream};

/// Rows must average at least this many trials.
pub const MIN_TRIALS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyEntry {
    pub id: String,
    pub spec: BodySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Suite {
    /// `Y = μ + σg`, one row per `σ`.
    Sequence { sigmas: Vec<f64> },
    /// `N` samples with coordinate noise `σ`, one row per contamination level and adversary.
    Robust {
        sigma: f64,
        samples: usize,
        epsilons: Vec<f64>,
        adversaries: Vec<Adversary>,
        #[serde(default)]
        noise: NoiseKind,
    },
    /// Gaussian design, one row per sample size.
    Regression {
        samples: Vec<usize>,
        #[serde(default)]
        center: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorId {
    Gsm,
    /// The raw observation.
    Identity,
    /// Weak projection of the observation onto `K`.
    Projection,
    TruncatedSeries,
    Robust,
    SampleMean,
    Regression,
    LeastSquares,
}

impl EstimatorId {
    pub fn id(&self) -> &'static str {
        match self {
            EstimatorId::Gsm => "gsm",
            EstimatorId::Identity => "identity",
            EstimatorId::Projection => "projection",
            EstimatorId::TruncatedSeries => "truncated_series",
            EstimatorId::Robust => "robust",
            EstimatorId::SampleMean => "sample_mean",
            EstimatorId::Regression => "regression",
            EstimatorId::LeastSquares => "least_squares",
        }
    }

    fn fits(&self, suite: &Suite) -> bool {
        use EstimatorId::*;
        match suite {
            Suite::Sequence { .. } => matches!(self, Gsm | Identity | Projection | TruncatedSeries),
            Suite::Robust { .. } => matches!(self, Robust | SampleMean),
            Suite::Regression { .. } => matches!(self, Regression | LeastSquares),
        }
    }
}

/// Where the true parameter comes from in each trial.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SignalRule {
    #[default]
    Boundary,
    Interior,
    Fixed {
        value: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub bodies: Vec<BodyEntry>,
    pub suite: Suite,
    pub trials: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorId>,
    #[serde(default)]
    pub signal: SignalRule,
    #[serde(default)]
    pub config: EstimationConfig,
    /// Robust-mean settings; the contamination level comes from the grid.
    #[serde(default)]
    pub robust: RobustConfig,
    /// Directory for the CSV table and JSON sidecar.
    #[serde(default)]
    pub output_dir: Option<String>,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.bodies.is_empty() || self.estimators.is_empty() {
            return Err(Error::invalid(
                "plan needs at least one body and one estimator",
            ));
        }
        if self.trials < MIN_TRIALS {
            return Err(Error::invalid(format!(
                "plan needs at least {MIN_TRIALS} trials, got {}",
                self.trials
            )));
        }
        let grid_ok = match &self.suite {
            Suite::Sequence { sigmas } => {
                !sigmas.is_empty() && sigmas.iter().all(|s| *s >= 0.0 && s.is_finite())
            }
            Suite::Robust {
                sigma,
                samples,
                epsilons,
                adversaries,
                ..
            } => {
                *sigma >= 0.0
                    && sigma.is_finite()
                    && *samples >= 1
                    && !epsilons.is_empty()
                    && epsilons.iter().all(|e| (0.0..0.5).contains(e))
                    && (adversaries.len() > 0 || epsilons.iter().all(|e| *e == 0.0))
            }
            Suite::Regression { samples, .. } => {
                !samples.is_empty() && samples.iter().all(|n| *n >= 2)
            }
        };
        if !grid_ok {
            return Err(Error::invalid("plan grid is empty or out of range"));
        }
        if let Some(bad) = self.estimators.iter().find(|e| !e.fits(&self.suite)) {
            return Err(Error::invalid(format!(
                "estimator {} does not apply to this suite",
                bad.id()
            )));
        }
        self.config.validate()?;
        for entry in &self.bodies {
            let body = entry.spec.build()?;
            if self.estimators.contains(&EstimatorId::TruncatedSeries)
                && axes_of(&entry.spec).is_none()
            {
                return Err(Error::invalid(format!(
                    "truncated series needs an axis-aligned ellipsoid, body {}",
                    entry.id
                )));
            }
            if let SignalRule::Fixed { value } = &self.signal {
                let mu = DVector::from_column_slice(value);
                if body.gauge(&mu)? > 1.0 + 1e-9 {
                    return Err(Error::invalid(format!(
                        "fixed signal lies outside body {}",
                        entry.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("experiment plan: {e}")))
    }
}

fn axes_of(spec: &BodySpec) -> Option<&[f64]> {
    match spec {
        BodySpec::Ellipsoid { semi_axes } => Some(semi_axes),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub body: String,
    pub estimator: String,
    /// Coordinate noise level of the cell.
    pub sigma: f64,
    /// Sample count, for the robust and regression suites.
    pub samples: Option<usize>,
    pub epsilon: Option<f64>,
    pub adversary: Option<String>,
    /// Successful trials.
    pub trials: usize,
    pub failed: usize,
    pub mse: f64,
    pub std_err: f64,
    /// Pinsker risk at the effective noise level, for axis-aligned ellipsoids.
    pub pinsker: Option<f64>,
    pub pinsker_ratio: Option<f64>,
    /// MSE over `n·σ_eff²`.
    pub identity_ratio: Option<f64>,
    /// Iterates with `‖μ̂_j − μ‖ ≤ d̃_j`, for localization estimators.
    pub trapped: Option<usize>,
    pub trap_checked: Option<usize>,
    /// Largest gauge of any estimate.
    pub max_gauge: f64,
    /// Wall-clock seconds; kept out of the CSV table so it stays reproducible.
    #[serde(default)]
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub plan: ExperimentPlan,
    pub rows: Vec<RiskRow>,
}

/// Compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn sum(&self) -> f64 {
        self.sum
    }
}

#[derive(Default)]
struct Tally {
    errors: Vec<f64>,
    failed: usize,
    trapped: usize,
    trap_checked: usize,
    max_gauge: f64,
    tracks_trapping: bool,
}

impl Tally {
    fn record(&mut self, body: &ConvexBody, truth: &DVector<f64>, est: Result<DVector<f64>>) {
        match est {
            Ok(e) => {
                self.errors.push((&e - truth).norm_squared());
                self.max_gauge = self.max_gauge.max(body.gauge(&e).unwrap_or(f64::INFINITY));
            }
            Err(err) => {
                log::warn!("trial failed: {err}");
                self.failed += 1;
            }
        }
    }

    fn trap(&mut self, truth: &DVector<f64>, trace: &crate::estimators::EstimationTrace) {
        self.tracks_trapping = true;
        for rec in &trace.records {
            let est = DVector::from_column_slice(&rec.estimate);
            self.trap_checked += 1;
            if (est - truth).norm() <= rec.d_tilde_next {
                self.trapped += 1;
            }
        }
    }

    fn finish(
        self,
        cell: &Cell,
        estimator: EstimatorId,
        n: usize,
        pinsker: Option<f64>,
        seconds: f64,
    ) -> RiskRow {
        let count = self.errors.len();
        let mut s = Kahan::default();
        self.errors.iter().for_each(|e| s.add(*e));
        let mse = if count > 0 {
            s.sum() / count as f64
        } else {
            f64::NAN
        };
        let mut v = Kahan::default();
        self.errors.iter().for_each(|e| v.add((e - mse).powi(2)));
        let std_err = if count > 1 {
            (v.sum() / (count - 1) as f64).sqrt() / (count as f64).sqrt()
        } else {
            f64::NAN
        };
        let noise_energy = n as f64 * cell.sigma_eff * cell.sigma_eff;
        RiskRow {
            body: cell.body.clone(),
            estimator: estimator.id().to_string(),
            sigma: cell.sigma,
            samples: cell.samples,
            epsilon: cell.epsilon,
            adversary: cell.adversary.clone(),
            trials: count,
            failed: self.failed,
            mse,
            std_err,
            pinsker,
            pinsker_ratio: pinsker.filter(|p| *p > 0.0).map(|p| mse / p),
            identity_ratio: (noise_energy > 0.0).then(|| mse / noise_energy),
            trapped: self.tracks_trapping.then_some(self.trapped),
            trap_checked: self.tracks_trapping.then_some(self.trap_checked),
            max_gauge: self.max_gauge,
            seconds,
        }
    }
}

struct Cell {
    body: String,
    sigma: f64,
    sigma_eff: f64,
    samples: Option<usize>,
    epsilon: Option<f64>,
    adversary: Option<String>,
}

fn draw_signal(rule: &SignalRule, body: &ConvexBody, rng: &mut Stream) -> DVector<f64> {
    match rule {
        SignalRule::Fixed { value } => DVector::from_column_slice(value),
        SignalRule::Boundary | SignalRule::Interior => {
            let seed = rand::Rng::random::<u64>(rng);
            let p = body.sample_boundary(1, seed).pop().expect("one point");
            if matches!(rule, SignalRule::Interior) {
                p * radial_fraction(rng, body.dim())
            } else {
                p
            }
        }
    }
}

/// Runs every cell of the plan. Trials are sequential and each draws from its own stream
/// `(seed, body, cell, trial)`, so the report is reproducible.
pub fn mc_risk(plan: &ExperimentPlan) -> Result<RiskReport> {
    plan.validate()?;
    let mut rows = Vec::new();
    for (bi, entry) in plan.bodies.iter().enumerate() {
        let body = entry.spec.build()?;
        let est = Estimator::new(body.clone(), plan.config.clone())?;
        let axes = axes_of(&entry.spec);
        match &plan.suite {
            Suite::Sequence { sigmas } => {
                for (ci, &sigma) in sigmas.iter().enumerate() {
                    let cell = Cell {
                        body: entry.id.clone(),
                        sigma,
                        sigma_eff: sigma,
                        samples: None,
                        epsilon: None,
                        adversary: None,
                    };
                    rows.extend(sequence_cell(
                        plan, &est, axes, &cell, bi as u64, ci as u64,
                    )?);
                }
            }
            Suite::Robust {
                sigma,
                samples,
                epsilons,
                adversaries,
                noise,
            } => {
                let mut cells: Vec<(f64, Option<Adversary>)> = Vec::new();
                for &eps in epsilons {
                    if eps == 0.0 {
                        cells.push((eps, None));
                    } else {
                        cells.extend(adversaries.iter().map(|a| (eps, Some(*a))));
                    }
                }
                for (eps, adv) in cells {
                    let cell = Cell {
                        body: entry.id.clone(),
                        sigma: *sigma,
                        sigma_eff: sigma / (*samples as f64).sqrt(),
                        samples: Some(*samples),
                        epsilon: Some(eps),
                        adversary: Some(adv.map_or("none", |a| a.id()).to_string()),
                    };
                    rows.extend(robust_cell(
                        plan, &est, axes, &cell, bi as u64, *noise, eps, adv,
                    )?);
                }
            }
            Suite::Regression { samples, center } => {
                for &ns in samples {
                    let sigma = plan.config.noise_scale;
                    let cell = Cell {
                        body: entry.id.clone(),
                        sigma,
                        sigma_eff: sigma / (ns as f64).sqrt(),
                        samples: Some(ns),
                        epsilon: None,
                        adversary: None,
                    };
                    rows.extend(regression_cell(
                        plan, &est, axes, &cell, bi as u64, *center,
                    )?);
                }
            }
        }
    }
    Ok(RiskReport {
        plan: plan.clone(),
        rows,
    })
}

fn pinsker_for(axes: Option<&[f64]>, sigma_eff: f64) -> Result<Option<f64>> {
    axes.map(|a| pinsker_risk(a, sigma_eff)).transpose()
}

fn sequence_cell(
    plan: &ExperimentPlan,
    est: &Estimator,
    axes: Option<&[f64]>,
    cell: &Cell,
    bi: u64,
    ci: u64,
) -> Result<Vec<RiskRow>> {
    let body = est.body();
    let n = body.dim();
    let pinsker = pinsker_for(axes, cell.sigma_eff)?;
    let mut out = Vec::new();
    for &id in &plan.estimators {
        let start = Instant::now();
        let mut tally = Tally::default();
        for t in 0..plan.trials {
            let mut r = rng::stream(plan.seed, &[0x5E9, bi, ci, t as u64]);
            let mu = draw_signal(&plan.signal, body, &mut r);
            let y = &mu + rng::gaussian_vector(&mut r, n) * cell.sigma;
            let result = match id {
                EstimatorId::Gsm => est.gsm(&y, cell.sigma).map(|(e, trace)| {
                    tally.trap(&mu, &trace);
                    e
                }),
                EstimatorId::Identity => Ok(y),
                EstimatorId::Projection => body
                    .weak_project(&y, 1e-9 * body.outer_radius())
                    .map(|p| p.point),
                EstimatorId::TruncatedSeries => {
                    baseline_truncated_series(axes.expect("validated"), &y, cell.sigma)
                }
                _ => unreachable!("validated"),
            };
            tally.record(body, &mu, result);
        }
        out.push(tally.finish(cell, id, n, pinsker, start.elapsed().as_secs_f64()));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn robust_cell(
    plan: &ExperimentPlan,
    est: &Estimator,
    axes: Option<&[f64]>,
    cell: &Cell,
    bi: u64,
    noise: NoiseKind,
    eps: f64,
    adversary: Option<Adversary>,
) -> Result<Vec<RiskRow>> {
    let body = est.body();
    let n = body.dim();
    let n_samples = cell.samples.expect("robust cell");
    let rcfg = RobustConfig {
        epsilon: eps,
        ..plan.robust.clone()
    };
    let direction = match adversary {
        Some(Adversary::TopEigenvector) => est
            .robust_first_shrinkage(n_samples, cell.sigma, &rcfg)?
            .map(|a| a.spectral().map(|s| s.top().1))
            .transpose()?,
        _ => None,
    };
    let pinsker = pinsker_for(axes, cell.sigma_eff)?;
    let mut out = Vec::new();
    for &id in &plan.estimators {
        let start = Instant::now();
        let mut tally = Tally::default();
        for t in 0..plan.trials {
            // Clean draws depend only on the trial, so contamination levels are paired.
            let mut r = rng::stream(plan.seed, &[0x20B, bi, t as u64]);
            let mu = draw_signal(&plan.signal, body, &mut r);
            let mut samples: Vec<DVector<f64>> = (0..n_samples)
                .map(|_| &mu + draw_noise(&mut r, n, cell.sigma, noise))
                .collect();
            if let Some(adv) = adversary {
                corrupt(
                    &mut samples,
                    eps,
                    adv,
                    &mu,
                    body.outer_radius(),
                    direction.as_ref(),
                );
            }
            let result = match id {
                EstimatorId::Robust => est.robust(&samples, cell.sigma, &rcfg).map(|(e, trace)| {
                    tally.trap(&mu, &trace);
                    e
                }),
                EstimatorId::SampleMean => {
                    Ok(samples.iter().fold(DVector::zeros(n), |acc, s| acc + s) / n_samples as f64)
                }
                _ => unreachable!("validated"),
            };
            tally.record(body, &mu, result);
        }
        out.push(tally.finish(cell, id, n, pinsker, start.elapsed().as_secs_f64()));
    }
    Ok(out)
}

fn regression_cell(
    plan: &ExperimentPlan,
    est: &Estimator,
    axes: Option<&[f64]>,
    cell: &Cell,
    bi: u64,
    center: bool,
) -> Result<Vec<RiskRow>> {
    let body = est.body();
    let n = body.dim();
    let n_samples = cell.samples.expect("regression cell");
    let pinsker = pinsker_for(axes, cell.sigma_eff)?;
    let mut out = Vec::new();
    for &id in &plan.estimators {
        let start = Instant::now();
        let mut tally = Tally::default();
        for t in 0..plan.trials {
            let mut r = rng::stream(plan.seed, &[0x4E6, bi, n_samples as u64, t as u64]);
            let beta = draw_signal(&plan.signal, body, &mut r);
            let g = rng::gaussian_vector(&mut r, n_samples * n);
            let z = DMatrix::from_column_slice(n_samples, n, g.as_slice());
            let y = &z * &beta + rng::gaussian_vector(&mut r, n_samples) * plan.config.noise_scale;
            let result = RegressionData::new(z, y)
                .and_then(|d| if center { center_pairs(&d) } else { Ok(d) })
                .and_then(|data| match id {
                    EstimatorId::Regression => est.regression(&data).map(|(e, trace)| {
                        tally.trap(&beta, &trace);
                        e
                    }),
                    EstimatorId::LeastSquares => least_squares(&data),
                    _ => unreachable!("validated"),
                });
            tally.record(body, &beta, result);
        }
        out.push(tally.finish(cell, id, n, pinsker, start.elapsed().as_secs_f64()));
    }
    Ok(out)
}

fn least_squares(data: &RegressionData) -> Result<DVector<f64>> {
    let gram = data.z.tr_mul(&data.z);
    let chol = gram
        .cholesky()
        .ok_or(Error::IllConditionedDesign { ratio: 0.0 })?;
    Ok(chol.solve(&data.z.tr_mul(&data.y)))
}
