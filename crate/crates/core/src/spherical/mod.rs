//! Mean-field spherical model: continuous spins with `Σφ² = ρN` and Hamiltonian
//! `H[φ] = −(J/2N)(Σφ)² − hΣφ`.
//!
//! Every ensemble is reduced to the fixed-magnetization one. Its single-site
//! marginal has a closed form and its polynomial moments are computed exactly,
//! so canonical ensembles become one-dimensional quadratures over `m` or `ε`.

mod canonical;
mod energy;
mod grand_canonical;
mod householder;
mod microcanonical;
mod transport;

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::coupling::parallel_moments;
use crate::error::{ensure, Result};
use crate::observable::{LocalObservable, MomentIndex};
use crate::quad::QuadOptions;

pub use canonical::{AuxCanonical, CanonicalEnergy, MagnetizationStats};
pub use energy::{dominance_bound, m_branches, BranchCase, EnergyEnsemble, EnergyMethod, EnergyWeights};
pub use grand_canonical::{matched_aux_mag, sample_gc_with, GcMoments, GrandCanonicalParams};
pub use householder::{apply_u, apply_u_inverse};
pub use microcanonical::{
    mc_marginal_density, mc_moment, sample_aux_mc, sample_aux_mc_with, MagnetizationEnsemble, SiteMarginal,
    MAX_MOMENT_ORDER,
};
pub use transport::{
    direct_coupling_cost_gc_mc, direct_coupling_cost_gc_mc_energy, direct_coupling_cost_gc_mc_energy_at,
    direct_coupling_energy_bound, direct_coupling_expected_cost, direct_coupling_mag_bound, direct_coupling_upper,
    energy_cost_lipschitz, mag_cost_lipschitz, transport_cost_energy, transport_cost_mag,
};

/// Smallest supported system size; the site marginal needs `(N−4)/2 ≥ 0`.
pub const MIN_SITES: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SphericalModel {
    pub n: u64,
    pub j: f64,
    pub h: f64,
    pub rho: f64,
}

impl SphericalModel {
    pub fn new(n: u64, j: f64, h: f64, rho: f64) -> Result<Self> {
        ensure(n >= MIN_SITES, || format!("N = {n}: N >= {MIN_SITES} required"))?;
        ensure(j > 0.0 && j.is_finite(), || format!("J = {j} must be > 0"))?;
        ensure(h.is_finite(), || format!("h = {h} must be finite"))?;
        ensure(rho > 0.0 && rho.is_finite(), || format!("rho = {rho} must be > 0"))?;
        Ok(Self { n, j, h, rho })
    }

    pub fn with_n(&self, n: u64) -> Result<Self> {
        Self::new(n, self.j, self.h, self.rho)
    }

    /// `H[φ]/N`.
    pub fn energy_density(&self, phi: &[f64]) -> f64 {
        let n = phi.len() as f64;
        let m = phi.iter().sum::<f64>() / n;
        -0.5 * self.j * m * m - self.h * m
    }
}

/// Point estimate with standard error; the error is 0 for deterministic methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, std_error: 0.0 }
    }
}

/// Single-site function with known kink locations for quadrature splitting.
pub type SiteFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Observables whose fixed-magnetization expectation is available without sampling.
#[derive(Clone)]
pub enum SphericalObservable {
    /// Polynomial moment `x^J`, computed exactly.
    Moment(MomentIndex),
    /// `g(φ₁)`, integrated against the site marginal.
    SingleSite { name: String, f: SiteFn, kinks: Vec<f64> },
}

impl std::fmt::Debug for SphericalObservable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Moment(j) => f.debug_tuple("Moment").field(j).finish(),
            Self::SingleSite { name, kinks, .. } => f
                .debug_struct("SingleSite")
                .field("name", name)
                .field("kinks", kinks)
                .finish(),
        }
    }
}

impl SphericalObservable {
    pub fn moment(labels: Vec<usize>) -> Result<Self> {
        Ok(Self::Moment(MomentIndex::new(labels)?))
    }

    pub fn single_site(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        kinks: Vec<f64>,
    ) -> Self {
        Self::SingleSite {
            name: name.into(),
            f: Arc::new(f),
            kinks,
        }
    }

    /// `clamp(φ₁, −c, c)`.
    pub fn clipped(c: f64) -> Self {
        Self::single_site(format!("clip({c})"), move |v| v.clamp(-c, c), vec![-c, c])
    }

    /// `min(|φ₁|, c)`.
    pub fn abs_clipped(c: f64) -> Self {
        Self::single_site(format!("absclip({c})"), move |v| v.abs().min(c), vec![-c, 0.0, c])
    }

    pub fn name(&self) -> String {
        match self {
            Self::Moment(j) => format!("x^{:?}", j.labels()),
            Self::SingleSite { name, .. } => name.clone(),
        }
    }

    /// Number of sites the observable depends on.
    pub fn size(&self) -> usize {
        match self {
            Self::Moment(j) => j.distinct().len(),
            Self::SingleSite { .. } => 1,
        }
    }

    /// Evaluates on a full configuration.
    pub fn eval_state(&self, phi: &[f64]) -> f64 {
        match self {
            Self::Moment(j) => j.eval_state(phi),
            Self::SingleSite { f, .. } => f(phi[0]),
        }
    }

    /// `⟨·⟩` under the fixed-magnetization ensemble.
    pub fn mc_expectation(&self, ens: &MagnetizationEnsemble, opts: QuadOptions) -> Result<f64> {
        match self {
            Self::Moment(j) => mc_moment(j, ens),
            Self::SingleSite { f, kinks, .. } => SiteMarginal::new(ens).expectation(|v| f(v), kinks, opts),
        }
    }
}

/// Monte Carlo estimate of `⟨f⟩` under the fixed-magnetization ensemble.
pub fn mc_sampled_expectation(
    f: &LocalObservable,
    ens: &MagnetizationEnsemble,
    samples: u64,
    seed: u64,
) -> Result<Estimate> {
    let draw = |rng: &mut ChaCha8Rng| f.eval_state(&sample_aux_mc_with(ens, rng));
    let moments = parallel_moments(seed, samples, draw)?;
    Ok(Estimate {
        value: moments.mean,
        std_error: moments.std_error(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn model_validation() {
        assert!(
            matches!(SphericalModel::new(4, 1.0, 0.0, 1.0), Err(Error::Domain(msg)) if msg.contains("N >= 5 required"))
        );
        assert!(SphericalModel::new(5, 0.0, 0.0, 1.0).is_err());
        assert!(SphericalModel::new(5, 1.0, 0.0, -1.0).is_err());
        assert!(SphericalModel::new(5, 1.0, 0.3, 1.0).is_ok());
    }

    #[test]
    fn sampled_pair_moment_is_exchangeable() {
        let ens = MagnetizationEnsemble::new(SphericalModel::new(16, 1.0, 0.0, 1.0).unwrap(), 0.2).unwrap();
        let exact = mc_moment(&MomentIndex::new(vec![0, 1]).unwrap(), &ens).unwrap();
        for (a, b) in [(0usize, 1usize), (3, 7), (15, 2)] {
            let f = LocalObservable::pair_product(a, b).unwrap();
            let est = mc_sampled_expectation(&f, &ens, 40_000, 3).unwrap();
            assert!(
                (est.value - exact).abs() < 4.0 * est.std_error,
                "({a},{b}) {est:?} vs {exact}"
            );
        }
    }

    #[test]
    fn single_site_observables_match_sampling() {
        let ens = MagnetizationEnsemble::new(SphericalModel::new(30, 1.0, 0.0, 1.0).unwrap(), 0.3).unwrap();
        let obs = SphericalObservable::abs_clipped(0.5);
        let exact = obs.mc_expectation(&ens, QuadOptions::rel(1e-10)).unwrap();
        let f = LocalObservable::new("absclip", vec![0], |x| x[0].abs().min(0.5)).unwrap();
        let est = mc_sampled_expectation(&f, &ens, 40_000, 9).unwrap();
        assert!((est.value - exact).abs() < 4.0 * est.std_error);
    }
}
