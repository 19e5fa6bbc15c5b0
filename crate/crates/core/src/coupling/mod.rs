//! Permutation-invariant Wasserstein machinery.
//!
//! Bounds that turn a global fluctuation distance `w_p` into errors for local
//! observables, an exact transport oracle for small discrete measures, and a
//! seeded Monte Carlo estimator for the cost of explicit transport maps.

mod discrete;
mod estimate;
mod lp;

pub use discrete::{
    exchangeability_spot_check, moment_constant, wp_bruteforce, DiscreteJointDistribution, DiscreteMeasure,
    ExchangeableFamily, OptimalCoupling, SpotCheck,
};
pub use estimate::{parallel_moments, transport_cost_estimate, CouplingReport, RunningMoments};
pub use lp::{solve_transport, TransportPlan};

use crate::error::{ensure, Result};
use crate::observable::MomentIndex;

/// Which fluctuation distance a query refers to. Only `w_p` is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostKind {
    #[default]
    SpecificPNorm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluctuationDistanceQuery {
    pub p: f64,
    pub n: u64,
    pub cost_kind: CostKind,
}

impl FluctuationDistanceQuery {
    pub fn new(p: f64, n: u64) -> Result<Self> {
        ensure(p >= 1.0, || format!("cost exponent p = {p} must be >= 1"))?;
        ensure(n >= 1, || "system size N must be >= 1".into())?;
        Ok(Self {
            p,
            n,
            cost_kind: CostKind::SpecificPNorm,
        })
    }

    /// Specific cost `(1/N) Σ |x_i − y_i|^p`.
    pub fn cost(&self, x: &[f64], y: &[f64]) -> f64 {
        specific_cost(x, y, self.p)
    }
}

pub(crate) fn specific_cost(x: &[f64], y: &[f64], p: f64) -> f64 {
    let n = x.len() as f64;
    let total: f64 = if p == 1.0 {
        x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()
    } else if p == 2.0 {
        x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
    } else {
        x.iter().zip(y).map(|(a, b)| (a - b).abs().powf(p)).sum()
    };
    total / n
}

/// `(|I| / (1 − |I|/N))^{1/p}`.
fn locality_factor(size_i: usize, n: u64, p: f64) -> Result<f64> {
    ensure(size_i >= 1, || "|I| must be >= 1".into())?;
    ensure((size_i as u64) < n, || {
        format!("|I| = {size_i} must be smaller than N = {n}")
    })?;
    ensure(p >= 1.0, || format!("p = {p} must be >= 1"))?;
    let s = size_i as f64;
    Ok((s / (1.0 - s / n as f64)).powf(1.0 / p))
}

/// Error bound for a bounded 1-Lipschitz observable on `size_i` sites.
pub fn lipschitz_error_bound(size_i: usize, n: u64, p: f64, wp: f64) -> Result<f64> {
    ensure(wp >= 0.0, || format!("w_p = {wp} must be >= 0"))?;
    Ok(locality_factor(size_i, n, p)? * wp)
}

/// Hölder conjugate `p/(p−1)`.
pub fn conjugate_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

/// Whether the moment bound applies: `n_J ≤ p0 + 1 − p0/p`.
pub fn moment_admissible(n_j: usize, p: f64, p0: f64) -> bool {
    p0.is_infinite() || n_j as f64 <= p0 + 1.0 - p0 / p + 1e-12
}

/// Error bound for the monomial `x^J`, given the moment constant `M(J,p)`.
pub fn moment_error_bound(j: &MomentIndex, p: f64, p0: f64, m_const: f64, wp: f64, n: u64) -> Result<f64> {
    ensure(p > 1.0, || format!("p = {p} must be > 1"))?;
    ensure(p0 >= p, || format!("p0 = {p0} must be >= p = {p}"))?;
    ensure(m_const >= 0.0 && wp >= 0.0, || "M and w_p must be >= 0".into())?;
    let n_j = j.n_j();
    ensure(moment_admissible(n_j, p, p0), || {
        format!("admissibility n_J <= p0 + 1 - p0/p violated: n_J = {n_j}, p = {p}, p0 = {p0}")
    })?;
    let factor = locality_factor(j.distinct().len(), n, p)?;
    Ok(n_j as f64 * m_const.powi(n_j as i32 - 1) * factor * wp)
}

/// Free-energy bound `C (|I|/(1−|I|/N))^{1/p} (σ + |ε − ⟨H⟩/N|)`.
pub fn free_energy_bound(c: f64, size_i: usize, n: u64, p: f64, sigma: f64, mismatch: f64) -> Result<f64> {
    ensure(c >= 0.0 && sigma >= 0.0 && mismatch >= 0.0, || {
        format!("free-energy bound inputs must be >= 0 (C = {c}, sigma = {sigma}, mismatch = {mismatch})")
    })?;
    Ok(c * locality_factor(size_i, n, p)? * (sigma + mismatch))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lipschitz_bound_values() {
        assert_eq!(lipschitz_error_bound(1, 2, 1.0, 0.5).unwrap(), 1.0);
        let v = lipschitz_error_bound(1, 1_000_000, 2.0, 1.0).unwrap();
        assert!((v - (1.0f64 / (1.0 - 1e-6)).sqrt()).abs() < 1e-15);
        assert!((v - 1.0000005).abs() < 1e-9);
        assert_eq!(lipschitz_error_bound(2, 4, 2.0, 0.0).unwrap(), 0.0);
        assert!(lipschitz_error_bound(4, 4, 1.0, 0.1).is_err());
    }

    #[test]
    fn moment_bound_values() {
        let j1 = MomentIndex::new(vec![0]).unwrap();
        let v = moment_error_bound(&j1, 2.0, f64::INFINITY, 17.0, 0.1, 100).unwrap();
        assert!((v - 0.1 * (1.0f64 / 0.99).sqrt()).abs() < 1e-15);
        let j2 = MomentIndex::new(vec![0, 1]).unwrap();
        let v = moment_error_bound(&j2, 2.0, 4.0, 1.0, 0.5, 8).unwrap();
        assert!((v - 2.0 * (2.0f64 / 0.75).sqrt() * 0.5).abs() < 1e-14);
        assert_eq!(moment_error_bound(&j2, 2.0, 4.0, 3.0, 0.0, 8).unwrap(), 0.0);
    }

    #[test]
    fn moment_bound_admissibility() {
        // p0 = 2, p = 2: n_J <= 2.
        let j3 = MomentIndex::new(vec![0, 1, 2]).unwrap();
        let err = moment_error_bound(&j3, 2.0, 2.0, 1.0, 0.1, 10).unwrap_err();
        assert!(err.to_string().contains("admissibility"));
        assert!(moment_error_bound(&j3, 2.0, f64::INFINITY, 1.0, 0.1, 10).is_ok());
    }

    #[test]
    fn free_energy_bound_values() {
        let v = free_energy_bound(1.0, 1, 100, 1.0, 0.05, 0.0).unwrap();
        assert!((v - 0.05 / 0.99).abs() < 1e-15);
        assert_eq!(free_energy_bound(1.0, 1, 100, 1.0, 0.0, 0.0).unwrap(), 0.0);
        assert!(free_energy_bound(-1.0, 1, 100, 1.0, 0.1, 0.0).is_err());
    }
}
