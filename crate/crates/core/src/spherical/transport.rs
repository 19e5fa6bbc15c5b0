//! Transport maps between spherical ensembles and their costs.

use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use super::grand_canonical::{matched_aux_mag, sample_gc_with, GrandCanonicalParams};
use super::householder::{apply_u, apply_u_inverse};
use super::microcanonical::check_magnetization;
use crate::coupling::{transport_cost_estimate, CouplingReport};
use crate::error::{ensure, Result};

/// Exact cost of the radial map between fixed-magnetization shells `m → m′`.
///
/// The map moves the mean and rescales the transverse sphere, so every point
/// travels the same specific distance.
pub fn transport_cost_mag(m: f64, m_prime: f64, rho: f64) -> Result<f64> {
    check_magnetization(m, rho)?;
    check_magnetization(m_prime, rho)?;
    let radial = (rho - m * m).sqrt() - (rho - m_prime * m_prime).sqrt();
    Ok(((m - m_prime).powi(2) + radial.powi(2)).sqrt())
}

/// `1 + 2/√(1 − m²/ρ)`: local Lipschitz constant of `m ↦` shell in `w₂`.
pub fn mag_cost_lipschitz(m: f64, rho: f64) -> f64 {
    1.0 + 2.0 / (1.0 - m * m / rho).sqrt()
}

fn check_energy(epsilon: f64, rho: f64, j: f64) -> Result<f64> {
    ensure(epsilon <= 0.0 && epsilon > -0.5 * rho * j, || {
        format!("epsilon = {epsilon} outside (-rho J/2, 0] = ({}, 0]", -0.5 * rho * j)
    })?;
    Ok((-2.0 * epsilon / j).sqrt())
}

/// Cost of the branch-preserving map between zero-field energy shells.
pub fn transport_cost_energy(epsilon: f64, epsilon_prime: f64, rho: f64, j: f64) -> Result<f64> {
    let m = check_energy(epsilon, rho, j)?;
    let m_prime = check_energy(epsilon_prime, rho, j)?;
    transport_cost_mag(m, m_prime, rho)
}

/// `(2/J)(−2ε/J)^{−1/2}(1 + 2ε/(Jρ))^{−1/2}`; infinite at `ε = 0`.
pub fn energy_cost_lipschitz(epsilon: f64, rho: f64, j: f64) -> f64 {
    (2.0 / j) / ((-2.0 * epsilon / j).sqrt() * (1.0 + 2.0 * epsilon / (j * rho)).sqrt())
}

/// Stated bound `1/((ρ − m²)N)` on the grand canonical to microcanonical cost².
pub fn direct_coupling_mag_bound(m: f64, rho: f64, n: u64) -> f64 {
    1.0 / ((rho - m * m) * n as f64)
}

/// `(ρ − m²)(3N − 1)/N²`, from bounding the radial term by `(‖ψ‖² − R²)²/R²`.
pub fn direct_coupling_upper(m: f64, rho: f64, n: u64) -> f64 {
    let n = n as f64;
    (rho - m * m) * (3.0 * n - 1.0) / (n * n)
}

/// Exact `E[(1/N)‖φ − Tφ‖²]` for the matched product Gaussian.
pub fn direct_coupling_expected_cost(m: f64, rho: f64, n: u64) -> f64 {
    let s = rho - m * m;
    let n = n as f64;
    // E[χ_{N−1}] = √2 Γ(N/2)/Γ((N−1)/2).
    let mean_chi = std::f64::consts::SQRT_2 * (ln_gamma(n / 2.0) - ln_gamma((n - 1.0) / 2.0)).exp();
    s / n * (2.0 * n - 2.0 * n.sqrt() * mean_chi)
}

/// Pins `z = Σφ/√N` to `z_target(z)` and projects the transverse part onto radius `r`.
fn pin_and_project(phi: &[f64], z_target: impl Fn(f64) -> f64, radius: f64) -> Vec<f64> {
    let mut y = apply_u(phi);
    y[0] = z_target(y[0]);
    let norm = y[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        let scale = radius / norm;
        y[1..].iter_mut().for_each(|v| *v *= scale);
    }
    apply_u_inverse(&y)
}

/// Monte Carlo cost² of the direct map from the matched grand canonical to the fixed-`m` ensemble.
pub fn direct_coupling_cost_gc_mc(m: f64, rho: f64, n: u64, seed: u64, samples: u64) -> Result<CouplingReport> {
    let (mu, eta) = matched_aux_mag(m, rho)?;
    let params = GrandCanonicalParams::AuxMag { mu, eta };
    let size = n as usize;
    let root_n = (n as f64).sqrt();
    let radius = ((rho - m * m) * n as f64).sqrt();
    let report = transport_cost_estimate(
        |rng: &mut ChaCha8Rng| sample_gc_with(&params, size, 1.0, rng),
        |phi: &[f64]| pin_and_project(phi, |_| m * root_n, radius),
        2.0,
        size,
        samples,
        seed,
    )?;
    Ok(report.with_bound(direct_coupling_mag_bound(m, rho, n)))
}

/// `(1/N)(ρ/(1 − ρβJ) + 2ρ)` with `ρ = 1/(2μ)`.
pub fn direct_coupling_energy_bound(beta: f64, mu: f64, j: f64, n: u64) -> f64 {
    let rho = 0.5 / mu;
    (rho / (1.0 - rho * beta * j) + 2.0 * rho) / n as f64
}

/// Direct map from the zero-field energy grand canonical ensemble to the `ε = 0` shell.
pub fn direct_coupling_cost_gc_mc_energy(
    beta: f64,
    mu: f64,
    j: f64,
    n: u64,
    seed: u64,
    samples: u64,
) -> Result<CouplingReport> {
    let report = direct_coupling_cost_gc_mc_energy_at(beta, mu, 0.0, j, n, seed, samples)?;
    Ok(report.with_bound(direct_coupling_energy_bound(beta, mu, j, n)))
}

/// As [`direct_coupling_cost_gc_mc_energy`] but targeting the shell at `ε ≤ 0`; `z` keeps its sign.
pub fn direct_coupling_cost_gc_mc_energy_at(
    beta: f64,
    mu: f64,
    epsilon: f64,
    j: f64,
    n: u64,
    seed: u64,
    samples: u64,
) -> Result<CouplingReport> {
    let params = GrandCanonicalParams::Energy { beta, mu };
    params.validate(j)?;
    let rho = 0.5 / mu;
    let m = check_energy(epsilon, rho, j)?;
    let size = n as usize;
    let root_n = (n as f64).sqrt();
    let radius = ((rho - m * m) * n as f64).sqrt();
    transport_cost_estimate(
        |rng: &mut ChaCha8Rng| sample_gc_with(&params, size, j, rng),
        |phi: &[f64]| pin_and_project(phi, |z| z.signum() * m * root_n, radius),
        2.0,
        size,
        samples,
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mag_cost_examples() {
        assert_eq!(transport_cost_mag(0.3, 0.3, 1.0).unwrap(), 0.0);
        let want = (0.25 + (1.0 - 0.75f64.sqrt()).powi(2)).sqrt();
        assert!((transport_cost_mag(0.0, 0.5, 1.0).unwrap() - want).abs() < 1e-15);
        assert!(transport_cost_mag(1.0, 0.5, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn mag_cost_sandwich(m in -0.95f64..0.95, dm in -0.5f64..0.5, rho in 0.5f64..3.0) {
            let root = rho.sqrt();
            let (m, m2) = (m * root, (m + dm).clamp(-0.95, 0.95) * root);
            let cost = transport_cost_mag(m, m2, rho).unwrap();
            let gap = (m - m2).abs();
            prop_assert!(cost >= gap * (1.0 - 1e-12));
            prop_assert!(cost <= mag_cost_lipschitz(m, rho).max(mag_cost_lipschitz(m2, rho)) * gap * (1.0 + 1e-12));
        }
    }

    #[test]
    fn energy_cost_bounds() {
        assert_eq!(transport_cost_energy(-0.2, -0.2, 1.0, 1.0).unwrap(), 0.0);
        assert!(transport_cost_energy(0.0, -0.01, 1.0, 1.0).unwrap() <= 2.0 * 0.01f64.sqrt());
        for k in 1..40 {
            let eps = -0.5 * k as f64 / 40.0;
            let de = 1e-6;
            let cost = transport_cost_energy(eps, eps + de, 1.0, 1.0).unwrap();
            assert!(
                cost / de <= energy_cost_lipschitz(eps, 1.0, 1.0) * (1.0 + 1e-3),
                "eps={eps}"
            );
        }
        assert!(transport_cost_energy(-0.5, -0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn direct_coupling_exact_cost_and_bounds() {
        assert!((direct_coupling_mag_bound(0.0, 1.0, 100) - 0.01).abs() < 1e-15);
        for n in [10u64, 100, 1000, 100_000] {
            let exact = direct_coupling_expected_cost(0.5, 1.0, n);
            assert!(exact <= direct_coupling_upper(0.5, 1.0, n));
            assert!((exact * n as f64 / 0.75 - 1.5).abs() < 2.0 / n as f64 + 1e-9, "n={n}");
        }
    }

    #[test]
    fn direct_coupling_monte_carlo_matches_exact() {
        let r = direct_coupling_cost_gc_mc(0.3, 1.0, 200, 5, 20_000).unwrap();
        let exact = direct_coupling_expected_cost(0.3, 1.0, 200);
        assert!((r.mean_cost - exact).abs() < 4.0 * r.mean_cost_se, "{r:?} vs {exact}");
        assert!(r.mean_cost <= direct_coupling_upper(0.3, 1.0, 200));
    }

    #[test]
    fn energy_direct_coupling() {
        assert!((direct_coupling_energy_bound(0.0, 0.5, 1.0, 10) - 0.3).abs() < 1e-15);
        let r = direct_coupling_cost_gc_mc_energy(0.25, 0.5, 1.0, 1000, 3, 4096).unwrap();
        assert_eq!(r.within_bound(3.0), Some(true));
        assert!(direct_coupling_cost_gc_mc_energy(1.0, 0.5, 1.0, 100, 3, 100).is_err());
    }

    #[test]
    fn energy_direct_coupling_does_not_decay_off_zero() {
        let costs: Vec<f64> = [100u64, 1000]
            .iter()
            .map(|&n| {
                direct_coupling_cost_gc_mc_energy_at(0.25, 0.5, -0.1, 1.0, n, 8, 4096)
                    .unwrap()
                    .mean_cost
            })
            .collect();
        // z-cost ≈ −2ε/J − O(N^{−1/2}), so the cost grows towards 0.2 instead of decaying.
        assert!(costs[0] > 0.1 && costs[1] > costs[0], "{costs:?}");
        assert!((costs[1] - 0.2).abs() < 0.05);
    }
}
