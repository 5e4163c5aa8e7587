//! Noise models and contamination for the robust suite.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StudentT};
use serde::{Deserialize, Serialize};

use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    /// Student-t with three degrees of freedom, scaled to coordinate variance `σ²`.
    StudentT3,
}

/// How corrupted samples are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adversary {
    /// Every corrupted sample sits at one point at distance `10R` along the diagonal.
    FarCluster,
    /// Genuine-looking samples shifted by `R` along `μ`.
    MeanShift,
    /// `μ + 10R·v` with `v` the top eigenvector of the first shrinkage matrix.
    TopEigenvector,
}

impl Adversary {
    pub fn id(&self) -> &'static str {
        match self {
            Adversary::FarCluster => "far_cluster",
            Adversary::MeanShift => "mean_shift",
            Adversary::TopEigenvector => "top_eigenvector",
        }
    }
}

pub fn draw_noise(rng: &mut Stream, n: usize, sigma: f64, kind: NoiseKind) -> DVector<f64> {
    match kind {
        NoiseKind::Gaussian => rng::gaussian_vector(rng, n) * sigma,
        NoiseKind::StudentT3 => {
            let t = StudentT::new(3.0).expect("three degrees of freedom");
            DVector::from_fn(n, |_, _| t.sample(rng)) * (sigma / 3f64.sqrt())
        }
    }
}

/// Replaces the first `⌊εN⌋` samples according to `adversary`.
///
/// `direction` is the unit vector used by [`Adversary::TopEigenvector`]; `outer_radius` is `R`.
pub fn corrupt(
    samples: &mut [DVector<f64>],
    epsilon: f64,
    adversary: Adversary,
    mu: &DVector<f64>,
    outer_radius: f64,
    direction: Option<&DVector<f64>>,
) -> usize {
    let count = (epsilon * samples.len() as f64).floor() as usize;
    let n = mu.len();
    let diagonal = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let target = match adversary {
        Adversary::FarCluster => Some(&diagonal * (10.0 * outer_radius)),
        Adversary::TopEigenvector => {
            Some(mu + direction.unwrap_or(&diagonal) * (10.0 * outer_radius))
        }
        Adversary::MeanShift => None,
    };
    let shift_dir = if mu.norm() > 0.0 {
        mu.normalize()
    } else {
        diagonal.clone()
    };
    for s in samples.iter_mut().take(count) {
        match &target {
            Some(t) => *s = t.clone(),
            None => *s += &shift_dir * outer_radius,
        }
    }
    count
}

/// A uniformly random point of the unit sphere.
pub fn random_direction(rng: &mut Stream, n: usize) -> DVector<f64> {
    loop {
        let g = rng::gaussian_vector(rng, n);
        let norm = g.norm();
        if norm > 0.0 {
            return g / norm;
        }
    }
}

/// `U^{1/n}` for `U` uniform, the radial law of a uniform point in a star body.
pub fn radial_fraction(rng: &mut Stream, n: usize) -> f64 {
    rng.random::<f64>().powf(1.0 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn student_noise_has_the_right_scale() {
        let mut r = rng::stream(0, &[]);
        let draws = 200_000;
        let mut sum2 = 0.0;
        for _ in 0..draws {
            sum2 += draw_noise(&mut r, 1, 2.0, NoiseKind::StudentT3)[0].powi(2);
        }
        // Infinite fourth moment makes the sample variance noisy; allow a wide band.
        let var = sum2 / draws as f64;
        assert!((var - 4.0).abs() < 0.6, "variance {var}");
    }

    #[test]
    fn corruption_counts_and_places() {
        let mu = DVector::from_vec(vec![1.0, 0.0]);
        let mut s = vec![mu.clone(); 20];
        assert_eq!(
            corrupt(&mut s, 0.1, Adversary::FarCluster, &mu, 2.0, None),
            2
        );
        assert!((s[0].norm() - 20.0).abs() < 1e-12);
        assert_eq!(s[2], mu);

        let mut s = vec![mu.clone(); 20];
        let dir = DVector::from_vec(vec![0.0, 1.0]);
        corrupt(
            &mut s,
            0.05,
            Adversary::TopEigenvector,
            &mu,
            2.0,
            Some(&dir),
        );
        assert_eq!(s[0], DVector::from_vec(vec![1.0, 20.0]));

        let mut s = vec![mu.clone(); 20];
        corrupt(&mut s, 0.05, Adversary::MeanShift, &mu, 2.0, None);
        assert_eq!(s[0], DVector::from_vec(vec![3.0, 0.0]));
        assert_eq!(
            corrupt(&mut s, 0.0, Adversary::MeanShift, &mu, 2.0, None),
            0
        );
    }
}
