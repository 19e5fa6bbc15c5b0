//! Gaussian grand canonical ensembles.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::householder::apply_u_inverse;
use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum GrandCanonicalParams {
    /// Density `∝ e^{−μΣφ − ηΣφ²}`: i.i.d. sites, mean `−μ/(2η)`, variance `1/(2η)`.
    AuxMag { mu: f64, eta: f64 },
    /// Density `∝ e^{−βH − μΣφ²}` at `h = 0`.
    Energy { beta: f64, mu: f64 },
    /// Equal mixture of the `AuxMag` ensembles at `±μ̄`.
    Alternate { mu_bar: f64, eta: f64 },
}

/// Exact single-site mean and variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GcMoments {
    pub mean: f64,
    pub variance: f64,
}

/// `(μ, η)` whose product Gaussian has site mean `m` and second moment `ρ`.
pub fn matched_aux_mag(m: f64, rho: f64) -> Result<(f64, f64)> {
    super::microcanonical::check_magnetization(m, rho)?;
    let eta = 0.5 / (rho - m * m);
    Ok((-2.0 * eta * m, eta))
}

impl GrandCanonicalParams {
    pub fn validate(&self, j: f64) -> Result<()> {
        match *self {
            Self::AuxMag { mu, eta } => {
                ensure(mu.is_finite(), || format!("mu = {mu} must be finite"))?;
                ensure(eta > 0.0, || format!("eta = {eta} must be > 0"))
            }
            Self::Energy { beta, mu } => {
                ensure(mu > 0.0, || format!("mu = {mu} must be > 0"))?;
                ensure(beta < 2.0 * mu / j, || {
                    format!(
                        "beta = {beta} must be < 2 mu / J = {}; the z-Gaussian is undefined",
                        2.0 * mu / j
                    )
                })
            }
            Self::Alternate { mu_bar, eta } => {
                ensure(mu_bar >= 0.0, || format!("mu_bar = {mu_bar} must be >= 0"))?;
                ensure(eta > 0.0, || format!("eta = {eta} must be > 0"))
            }
        }
    }

    /// Variance of `z = Σφ/√N` and of each transverse coordinate (energy variant).
    pub fn energy_variances(beta: f64, mu: f64, j: f64) -> (f64, f64) {
        (0.5 / (mu - 0.5 * beta * j), 0.5 / mu)
    }

    pub fn site_moments(&self, n: u64, j: f64) -> Result<GcMoments> {
        self.validate(j)?;
        Ok(match *self {
            Self::AuxMag { mu, eta } => GcMoments {
                mean: -mu / (2.0 * eta),
                variance: 0.5 / eta,
            },
            Self::Energy { beta, mu } => {
                // Covariance sI + (s_z − s)uuᵀ with u = 1/√N.
                let (s_z, s) = Self::energy_variances(beta, mu, j);
                GcMoments {
                    mean: 0.0,
                    variance: s + (s_z - s) / n as f64,
                }
            }
            Self::Alternate { mu_bar, eta } => GcMoments {
                mean: 0.0,
                variance: 0.5 / eta + (mu_bar / (2.0 * eta)).powi(2),
            },
        })
    }
}

/// One draw of length `n`. Parameters must already be validated.
pub fn sample_gc_with<R: Rng>(params: &GrandCanonicalParams, n: usize, j: f64, rng: &mut R) -> Vec<f64> {
    let mut gauss = || -> f64 { rng.sample(StandardNormal) };
    match *params {
        GrandCanonicalParams::AuxMag { mu, eta } => {
            let (mean, sd) = (-mu / (2.0 * eta), (0.5 / eta).sqrt());
            (0..n).map(|_| mean + sd * gauss()).collect()
        }
        GrandCanonicalParams::Energy { beta, mu } => {
            let (s_z, s) = GrandCanonicalParams::energy_variances(beta, mu, j);
            let mut y: Vec<f64> = (0..n).map(|_| s.sqrt() * gauss()).collect();
            y[0] *= (s_z / s).sqrt();
            apply_u_inverse(&y)
        }
        GrandCanonicalParams::Alternate { mu_bar, eta } => {
            let sign = if gauss() >= 0.0 { 1.0 } else { -1.0 };
            let (mean, sd) = (sign * mu_bar / (2.0 * eta), (0.5 / eta).sqrt());
            (0..n).map(|_| mean + sd * gauss()).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::RunningMoments;
    use crate::seeding::stream_rng;

    fn check_sampler(params: GrandCanonicalParams, n: usize) {
        let exact = params.site_moments(n as u64, 1.0).unwrap();
        let mut rng = stream_rng(21, 0);
        let (mut first, mut square) = (RunningMoments::default(), RunningMoments::default());
        for _ in 0..20_000 {
            let phi = sample_gc_with(&params, n, 1.0, &mut rng);
            first.push(phi[1]);
            square.push((phi[1] - exact.mean).powi(2));
        }
        assert!(
            (first.mean - exact.mean).abs() < 3.5 * first.std_error(),
            "{params:?} mean"
        );
        assert!(
            (square.mean - exact.variance).abs() < 3.5 * square.std_error(),
            "{params:?} var"
        );
    }

    #[test]
    fn samplers_reproduce_exact_moments() {
        check_sampler(GrandCanonicalParams::AuxMag { mu: 0.0, eta: 0.5 }, 10);
        check_sampler(GrandCanonicalParams::AuxMag { mu: -0.8, eta: 0.7 }, 10);
        check_sampler(GrandCanonicalParams::Energy { beta: 0.6, mu: 0.5 }, 6);
        check_sampler(GrandCanonicalParams::Alternate { mu_bar: 1.2, eta: 0.5 }, 10);
    }

    #[test]
    fn zero_field_moments() {
        let m = GrandCanonicalParams::AuxMag { mu: 0.0, eta: 2.0 }
            .site_moments(10, 1.0)
            .unwrap();
        assert_eq!((m.mean, m.variance), (0.0, 0.25));
    }

    #[test]
    fn matched_parameters_reproduce_m_and_rho() {
        for (m, rho) in [(0.0, 1.0), (0.5, 1.0), (-1.0, 3.0)] {
            let (mu, eta) = matched_aux_mag(m, rho).unwrap();
            let g = GrandCanonicalParams::AuxMag { mu, eta }.site_moments(10, 1.0).unwrap();
            assert!((g.mean - m).abs() < 1e-14);
            assert!((g.variance - (rho - m * m)).abs() < 1e-14);
            assert!((0.5 / eta + mu * mu / (4.0 * eta * eta) - rho).abs() < 1e-13);
        }
    }

    #[test]
    fn energy_variant_rejects_large_beta() {
        let p = GrandCanonicalParams::Energy { beta: 1.0, mu: 0.5 };
        assert!(p.validate(1.0).is_err());
        assert!(GrandCanonicalParams::Energy { beta: 0.99, mu: 0.5 }
            .validate(1.0)
            .is_ok());
    }
}
