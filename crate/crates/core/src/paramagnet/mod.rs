//! The discrete paramagnet on `{−1, +1}^N`.
//!
//! Exact fixed-magnetization (MC) and product (C) expectations of local
//! observables, relative entropy between them, the explicit optimal coupling
//! and the Curie–Weiss fixed-energy split.

mod coupling;
mod curie_weiss;

pub use coupling::{sample_optimal_coupling, sample_optimal_coupling_with, SpinConfiguration};
pub use curie_weiss::{energy_mc_expectation, energy_split, CurieWeissParams, EnergySplit};

use statrs::function::gamma::ln_gamma;

use crate::error::{ensure, Error, Result};
use crate::observable::LocalObservable;

/// Largest observable support enumerated exactly.
pub const MAX_LOCAL_SITES: usize = 20;

/// Snapping radius for admissible magnetization densities.
pub const SNAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamagnetParams {
    pub n: u64,
    pub m: f64,
    pub mu: f64,
}

impl ParamagnetParams {
    /// Snaps `m` onto `Ran[m_N]`.
    pub fn new(n: u64, m: f64, mu: f64) -> Result<Self> {
        Ok(Self {
            n,
            m: admissible_m(m, n)?,
            mu,
        })
    }

    /// Canonical potential matched to `m`: `μ = tanh⁻¹(−m)`.
    pub fn matched(n: u64, m: f64) -> Result<Self> {
        let m = admissible_m(m, n)?;
        Ok(Self {
            n,
            m,
            mu: matched_mu(m),
        })
    }

    pub fn plus_count(&self) -> u64 {
        plus_count_unchecked(self.m, self.n)
    }
}

pub fn matched_mu(m: f64) -> f64 {
    (-m).atanh()
}

fn plus_count_unchecked(m: f64, n: u64) -> u64 {
    ((1.0 + m) * n as f64 / 2.0).round() as u64
}

/// Nearest element of `Ran[m_N] = {2k/N − 1}` to `m`, clamped to `[−1, 1]`.
pub fn nearest_admissible(m: f64, n: u64) -> f64 {
    let k = ((1.0 + m) * n as f64 / 2.0).round().clamp(0.0, n as f64);
    2.0 * k / n as f64 - 1.0
}

/// Returns the admissible density within [`SNAP_TOL`] of `m`, or an error naming the nearest one.
pub fn admissible_m(m: f64, n: u64) -> Result<f64> {
    ensure(n >= 1, || "N must be >= 1".into())?;
    ensure(m.is_finite(), || format!("m = {m} is not finite"))?;
    let nearest = nearest_admissible(m, n);
    if (nearest - m).abs() <= SNAP_TOL {
        Ok(nearest)
    } else {
        Err(Error::Inadmissible { m, n, nearest })
    }
}

/// `K₊ = (1+m)N/2` for admissible `m`.
pub fn plus_count(m: f64, n: u64) -> Result<u64> {
    Ok(plus_count_unchecked(admissible_m(m, n)?, n))
}

/// `ln C(n, k)`. Short products are summed exactly; long ones use log-gamma.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    assert!(k <= n, "k = {k} exceeds n = {n}");
    let k = k.min(n - k);
    if k <= 64 {
        (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum()
    } else {
        ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
    }
}

/// `ln Z_MC(m; N) = ln C(N, (1+m)N/2)`.
pub fn log_z_mc(m: f64, n: u64) -> Result<f64> {
    Ok(ln_binomial(n, plus_count(m, n)?))
}

/// `ln(2 cosh μ)` without overflow.
pub fn ln_two_cosh(mu: f64) -> f64 {
    let a = mu.abs();
    a + (-2.0 * a).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalScalars {
    pub log_z_c: f64,
    pub f_c: f64,
    pub mean_mdensity: f64,
    pub sigma_mdensity: f64,
}

/// Partition function, free energy, mean and spread of `M/N` for the product measure.
pub fn canonical_scalars(mu: f64, n: u64) -> CanonicalScalars {
    let t = mu.tanh();
    let l = ln_two_cosh(mu);
    CanonicalScalars {
        log_z_c: n as f64 * l,
        f_c: -l,
        mean_mdensity: -t,
        sigma_mdensity: ((1.0 - t * t) / n as f64).sqrt(),
    }
}

/// Canonical single-site probability of `+1`: `e^{−μ}/(2 cosh μ)`.
pub fn canonical_plus_probability(mu: f64) -> f64 {
    0.5 * (1.0 - mu.tanh())
}

fn check_local(f: &LocalObservable, n: u64) -> Result<()> {
    if f.size() > MAX_LOCAL_SITES {
        return Err(Error::Capacity(format!(
            "observable on {} sites exceeds the enumeration limit {MAX_LOCAL_SITES}",
            f.size()
        )));
    }
    ensure(f.size() as u64 <= n, || {
        format!("observable on {} sites does not fit N = {n}", f.size())
    })?;
    ensure(f.indices().iter().all(|&i| (i as u64) < n), || {
        format!("observable labels {:?} exceed N = {n}", f.indices())
    })
}

/// Sums `weight(k) · f(pattern)` over all sign patterns, `k` = number of plus signs.
fn pattern_sum(f: &LocalObservable, weight: impl Fn(usize) -> f64) -> f64 {
    let n = f.size();
    let weights: Vec<f64> = (0..=n).map(&weight).collect();
    let mut point = vec![0.0; n];
    (0u32..1 << n)
        .map(|bits| {
            for (k, v) in point.iter_mut().enumerate() {
                *v = if bits >> k & 1 == 1 { 1.0 } else { -1.0 };
            }
            weights[bits.count_ones() as usize] * f.eval_point(&point)
        })
        .sum()
}

/// Probability of one specific sign pattern with `k` plus signs on `n` sites under
/// the uniform law on `S_m`: `[K₊]_k [N−K₊]_{n−k} / [N]_n`.
pub fn mc_pattern_probability(k: usize, n_sites: usize, plus: u64, n: u64) -> f64 {
    let (k, n_sites) = (k as u64, n_sites as u64);
    let mut p = 1.0;
    for t in 0..k {
        p *= plus.saturating_sub(t) as f64 / (n - t) as f64;
    }
    for s in 0..n_sites - k {
        p *= (n - plus).saturating_sub(s) as f64 / (n - k - s) as f64;
    }
    p
}

/// Exact `⟨f ∘ P_I⟩` under the uniform measure on `S_m`.
pub fn mc_local_expectation(f: &LocalObservable, m: f64, n: u64) -> Result<f64> {
    check_local(f, n)?;
    let plus = plus_count(m, n)?;
    let sites = f.size();
    Ok(pattern_sum(f, |k| mc_pattern_probability(k, sites, plus, n)))
}

/// Exact `⟨f ∘ P_I⟩` under the product measure with potential `μ`.
pub fn c_local_expectation(f: &LocalObservable, mu: f64) -> Result<f64> {
    if f.size() > MAX_LOCAL_SITES {
        return Err(Error::Capacity(format!(
            "observable on {} sites exceeds the enumeration limit {MAX_LOCAL_SITES}",
            f.size()
        )));
    }
    let p = canonical_plus_probability(mu);
    let sites = f.size() as i32;
    Ok(pattern_sum(f, |k| p.powi(k as i32) * (1.0 - p).powi(sites - k as i32)))
}

/// Exact specific relative entropy `H(MC_m | C_μ)/N`.
pub fn specific_relative_entropy(m: f64, mu: f64, n: u64) -> Result<f64> {
    let m = admissible_m(m, n)?;
    if m.abs() == 1.0 {
        return Err(Error::Degenerate(format!("m = {m} is a single configuration")));
    }
    Ok(mu * m + ln_two_cosh(mu) - log_z_mc(m, n)? / n as f64)
}

fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Large-deviation rate `F(m, μ) ≥ 0`, vanishing only at `μ = tanh⁻¹(−m)`.
#[allow(non_snake_case)]
pub fn F_of(m: f64, mu: f64) -> f64 {
    std::f64::consts::LN_2 + mu.cosh().ln() + mu * m + xlnx((1.0 + m) / 2.0) + xlnx((1.0 - m) / 2.0)
}

/// Supremum of `|f|` on `{−1, 1}^{|I|}`; the declared bound wins when present.
pub fn spin_sup(f: &LocalObservable) -> Result<f64> {
    if let Some(b) = f.sup_bound() {
        return Ok(b);
    }
    check_local(f, f.size() as u64)?;
    let n = f.size();
    let mut point = vec![0.0; n];
    let sup = (0u32..1 << n)
        .map(|bits| {
            for (k, v) in point.iter_mut().enumerate() {
                *v = if bits >> k & 1 == 1 { 1.0 } else { -1.0 };
            }
            f.eval_point(&point).abs()
        })
        .fold(0.0, f64::max);
    ensure(sup.is_finite(), || format!("observable {} is unbounded", f.name()))?;
    Ok(sup)
}

/// Relative-entropy bound `√(2|I|) · sup|f| · √(H/N)`.
pub fn pinsker_bound(f: &LocalObservable, m: f64, mu: f64, n: u64) -> Result<f64> {
    let sup = spin_sup(f)?;
    let h = specific_relative_entropy(m, mu, n)?.max(0.0);
    Ok((2.0 * f.size() as f64).sqrt() * sup * h.sqrt())
}

/// Coupling bound at matched parameters: `C = 1`, `p = 1`, `σ = √(1 − m²)/√N`, no mismatch.
pub fn coupling_bound(size_i: usize, m: f64, mu: f64, n: u64) -> Result<f64> {
    let s = canonical_scalars(mu, n);
    let mismatch = (m - s.mean_mdensity).abs();
    crate::coupling::free_energy_bound(1.0, size_i, n, 1.0, s.sigma_mdensity, mismatch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;

    fn big_binomial(n: u64, k: u64) -> BigUint {
        let mut acc = BigUint::from(1u32);
        for i in 0..k {
            acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
        }
        acc
    }

    fn big_ln(x: &BigUint) -> f64 {
        let bits = x.bits();
        if bits < 1000 {
            let shift = bits.saturating_sub(60);
            let top: BigUint = x >> shift;
            let mantissa: f64 = top.to_string().parse().unwrap();
            mantissa.ln() + shift as f64 * std::f64::consts::LN_2
        } else {
            unreachable!()
        }
    }

    #[test]
    fn log_z_mc_small_cases() {
        assert!((log_z_mc(0.0, 2).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_z_mc(1.0, 4).unwrap(), 0.0);
        let exact = big_ln(&big_binomial(100, 50));
        assert!((log_z_mc(0.0, 100).unwrap() - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn log_z_mc_matches_big_integers_up_to_64() {
        for n in 1..=64u64 {
            for k in 0..=n {
                let m = 2.0 * k as f64 / n as f64 - 1.0;
                let exact = big_ln(&big_binomial(n, k));
                let got = log_z_mc(m, n).unwrap();
                assert!((got - exact).abs() <= 1e-12 * exact.max(1.0), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn log_gamma_branch_matches_big_integers() {
        for (n, k) in [(300u64, 150u64), (500, 400), (900, 77)] {
            let exact = big_ln(&big_binomial(n, k));
            let lg = ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0);
            assert!((lg - exact).abs() <= 1e-12 * exact, "n={n} k={k}");
            assert!((ln_binomial(n, k) - exact).abs() <= 1e-12 * exact);
        }
    }

    #[test]
    fn inadmissible_reports_nearest() {
        match log_z_mc(0.3, 4) {
            Err(Error::Inadmissible { nearest, .. }) => assert_eq!(nearest, 0.5),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(admissible_m(0.5 + 1e-11, 4).unwrap(), 0.5);
    }

    #[test]
    fn canonical_scalar_values() {
        let s = canonical_scalars(0.0, 16);
        assert_eq!(s.mean_mdensity, 0.0);
        assert!((s.sigma_mdensity - 0.25).abs() < 1e-15);
        assert!((s.f_c + std::f64::consts::LN_2).abs() < 1e-15);
        let s = canonical_scalars(1.0, 4);
        assert!((s.mean_mdensity + 0.761_594_155_955_764_9).abs() < 1e-15);
        for n in [1, 10, 1000] {
            let s = canonical_scalars(0.7, n);
            assert!((s.sigma_mdensity * (n as f64).sqrt() - (1.0 - 0.7f64.tanh().powi(2)).sqrt()).abs() < 1e-14);
        }
        assert!((ln_two_cosh(800.0) - 800.0).abs() < 1e-12);
    }

    /// Brute-force expectation over all configurations in `S_m`.
    fn enumerate_mc(f: &LocalObservable, m: f64, n: u64) -> f64 {
        let plus = plus_count(m, n).unwrap() as u32;
        let mut total = 0.0;
        let mut count = 0.0;
        for bits in 0u32..1 << n {
            if bits.count_ones() != plus {
                continue;
            }
            let state: Vec<f64> = (0..n).map(|k| if bits >> k & 1 == 1 { 1.0 } else { -1.0 }).collect();
            total += f.eval_state(&state);
            count += 1.0;
        }
        total / count
    }

    #[test]
    fn mc_expectations_match_enumeration() {
        let phi12 = LocalObservable::pair_product(0, 1).unwrap();
        assert!((mc_local_expectation(&phi12, 0.0, 2).unwrap() + 1.0).abs() < 1e-15);
        let weird = LocalObservable::new("weird", vec![3, 0, 2], |x| (x[0] + 2.0 * x[1]).exp() - x[2] * x[0]).unwrap();
        for n in 4..=10u64 {
            for k in 0..=n {
                let m = 2.0 * k as f64 / n as f64 - 1.0;
                for f in [&phi12, &weird, &LocalObservable::site(1)] {
                    let exact = enumerate_mc(f, m, n);
                    let got = mc_local_expectation(f, m, n).unwrap();
                    assert!(
                        (got - exact).abs() <= 1e-12 * exact.abs().max(1.0),
                        "n={n} m={m} {}",
                        f.name()
                    );
                }
                let cov = mc_local_expectation(&phi12, m, n).unwrap() - m * m;
                assert!((cov + (1.0 - m * m) / (n as f64 - 1.0)).abs() < 1e-13);
            }
        }
        assert!((mc_local_expectation(&LocalObservable::site(0), 0.5, 4).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn c_expectations() {
        let mu = 0.37;
        let phi = LocalObservable::site(0);
        assert!((c_local_expectation(&phi, mu).unwrap() + mu.tanh()).abs() < 1e-15);
        let phi12 = LocalObservable::pair_product(0, 1).unwrap();
        assert!((c_local_expectation(&phi12, mu).unwrap() - mu.tanh().powi(2)).abs() < 1e-15);
        let g = LocalObservable::new("g", vec![0, 1], |x| x[0] + 3.0 * x[1] * x[1] + x[0] * x[1]).unwrap();
        assert!((c_local_expectation(&g, 0.0).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn capacity_limit() {
        let big = LocalObservable::new("big", (0..21).collect(), |x| x[0]).unwrap();
        assert!(matches!(mc_local_expectation(&big, 0.0, 100), Err(Error::Capacity(_))));
        assert!(matches!(c_local_expectation(&big, 0.0), Err(Error::Capacity(_))));
    }

    #[test]
    fn relative_entropy_and_rate_function() {
        assert!((specific_relative_entropy(0.0, 0.0, 2).unwrap() - 0.5 * std::f64::consts::LN_2).abs() < 1e-15);
        assert!(specific_relative_entropy(1.0, 0.0, 4).is_err());
        assert!(F_of(0.0, 0.0).abs() < 1e-15);
        for m in [-0.9, -0.5, 0.5, 0.9] {
            assert!(F_of(m, matched_mu(m)).abs() < 1e-14);
        }
        assert!((F_of(0.0, 1.0) - 1f64.cosh().ln()).abs() < 1e-15);
        for m in [-0.5, 0.0, 0.5] {
            for n in [10u64, 100, 1000] {
                let m = nearest_admissible(m, n);
                let h = specific_relative_entropy(m, matched_mu(m), n).unwrap();
                assert!(h - F_of(m, matched_mu(m)) <= ((n + 1) as f64).ln() / n as f64);
            }
        }
    }

    #[test]
    fn rate_function_minimum_on_grid() {
        for m in [-0.8, -0.3, 0.0, 0.6, 1.0] {
            let star = if m == 1.0 { f64::NEG_INFINITY } else { matched_mu(m) };
            for k in -40..=40 {
                let mu = k as f64 * 0.1;
                let f = F_of(m, mu);
                assert!(f >= -1e-14);
                if (mu - star).abs() > 1e-3 {
                    assert!(f > 0.0, "m={m} mu={mu}");
                }
            }
        }
    }

    #[test]
    fn pinsker_bound_composition() {
        let f = LocalObservable::site(0);
        let h = specific_relative_entropy(0.0, 0.0, 100).unwrap();
        assert!((pinsker_bound(&f, 0.0, 0.0, 100).unwrap() - 2f64.sqrt() * h.sqrt()).abs() < 1e-15);
        let clipped = LocalObservable::clipped_site(0, 0.25);
        assert!((pinsker_bound(&clipped, 0.0, 0.0, 100).unwrap() - 0.25 * 2f64.sqrt() * h.sqrt()).abs() < 1e-15);
    }
}
