//! Fixed-energy Curie–Weiss ensemble as a mixture of fixed magnetizations.

use super::{log_z_mc, mc_local_expectation, nearest_admissible};
use crate::error::{ensure, Error, Result};
use crate::observable::LocalObservable;

/// Tolerance for matching an energy density or branch to the lattice of admissible values.
const LATTICE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurieWeissParams {
    pub j: f64,
    pub h: f64,
}

impl CurieWeissParams {
    pub fn new(j: f64, h: f64) -> Result<Self> {
        ensure(j > 0.0, || format!("J = {j} must be > 0"))?;
        Ok(Self { j, h })
    }

    /// Energy density `−(J/2) m² − h m`.
    pub fn energy_density(&self, m: f64) -> f64 {
        -0.5 * self.j * m * m - self.h * m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySplit {
    pub m_plus: f64,
    pub m_minus: f64,
    pub weight_plus: f64,
    pub weight_minus: f64,
}

fn on_lattice(m: f64, n: u64) -> Option<f64> {
    let snapped = nearest_admissible(m, n);
    ((snapped - m).abs() <= LATTICE_TOL).then_some(snapped)
}

/// Splits `S_ε` into the magnetization classes `m_±`, weighted by their sizes.
pub fn energy_split(epsilon: f64, cw: &CurieWeissParams, n: u64) -> Result<EnergySplit> {
    let (j, h) = (cw.j, cw.h);
    let top = h * h / (2.0 * j);
    ensure(epsilon <= top + LATTICE_TOL, || {
        format!("epsilon = {epsilon} exceeds h^2/(2J) = {top}; no real magnetization branches")
    })?;
    let root = (h * h / (j * j) - 2.0 * epsilon / j).max(0.0).sqrt();
    let (m_plus, m_minus) = (-h / j + root, -h / j - root);
    let plus = on_lattice(m_plus, n);
    let minus = on_lattice(m_minus, n);
    let (m_plus, m_minus) = (plus.unwrap_or(m_plus), minus.unwrap_or(m_minus));
    if plus.is_none() && minus.is_none() {
        return Err(Error::Domain(format!(
            "epsilon = {epsilon} is not an attainable energy density for N = {n}"
        )));
    }
    if m_plus == m_minus {
        return Ok(EnergySplit {
            m_plus,
            m_minus,
            weight_plus: 0.5,
            weight_minus: 0.5,
        });
    }
    let log_size = |m: Option<f64>| m.map(|m| log_z_mc(m, n)).transpose();
    let (lp, lm) = (log_size(plus)?, log_size(minus)?);
    let (weight_plus, weight_minus) = match (lp, lm) {
        (Some(a), Some(b)) => {
            let top = a.max(b);
            let (ea, eb) = ((a - top).exp(), (b - top).exp());
            (ea / (ea + eb), eb / (ea + eb))
        }
        (Some(_), None) => (1.0, 0.0),
        (None, Some(_)) => (0.0, 1.0),
        (None, None) => unreachable!(),
    };
    Ok(EnergySplit {
        m_plus,
        m_minus,
        weight_plus,
        weight_minus,
    })
}

/// `⟨f ∘ P_I⟩` under the uniform law on `S_ε`, via the magnetization split.
pub fn energy_mc_expectation(f: &LocalObservable, epsilon: f64, cw: &CurieWeissParams, n: u64) -> Result<f64> {
    let split = energy_split(epsilon, cw, n)?;
    let mut total = 0.0;
    for (m, w) in [(split.m_plus, split.weight_plus), (split.m_minus, split.weight_minus)] {
        if w > 0.0 {
            total += w * mc_local_expectation(f, m, n)?;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Enumerates `{−1,1}^N`, keeping configurations with energy density `ε`.
    fn brute_force(epsilon: f64, cw: &CurieWeissParams, n: u64, f: &LocalObservable) -> (Vec<(f64, usize)>, f64) {
        let mut classes: Vec<(f64, usize)> = Vec::new();
        let mut total = 0.0;
        let mut count = 0usize;
        for bits in 0u32..1 << n {
            let state: Vec<f64> = (0..n).map(|k| if bits >> k & 1 == 1 { 1.0 } else { -1.0 }).collect();
            let m = state.iter().sum::<f64>() / n as f64;
            if (cw.energy_density(m) - epsilon).abs() > 1e-12 {
                continue;
            }
            total += f.eval_state(&state);
            count += 1;
            match classes.iter_mut().find(|c| c.0 == m) {
                Some(c) => c.1 += 1,
                None => classes.push((m, 1)),
            }
        }
        (classes, total / count as f64)
    }

    #[test]
    fn symmetric_split_has_equal_weights() {
        let cw = CurieWeissParams::new(1.0, 0.0).unwrap();
        for n in [4u64, 8, 12] {
            let s = energy_split(-0.125, &cw, n).unwrap();
            assert_eq!((s.m_plus, s.m_minus), (0.5, -0.5));
            assert!((s.weight_plus - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn top_energy_is_single_branch() {
        let cw = CurieWeissParams::new(2.0, 1.0).unwrap();
        let s = energy_split(0.25, &cw, 8).unwrap();
        assert_eq!(s.m_plus, s.m_minus);
        assert_eq!((s.weight_plus, s.weight_minus), (0.5, 0.5));
        assert!(energy_split(0.3, &cw, 8).is_err());
    }

    #[test]
    fn generic_split_matches_enumeration() {
        // h = 1/4 puts both branches (1/4 and −3/4) on the N = 8 lattice.
        let cw = CurieWeissParams::new(1.0, 0.25).unwrap();
        let f = LocalObservable::new("g", vec![0, 1], |x| x[0] + 0.3 * x[0] * x[1]).unwrap();
        let eps = cw.energy_density(0.25);
        let s = energy_split(eps, &cw, 8).unwrap();
        let (classes, mean) = brute_force(eps, &cw, 8, &f);
        let total: usize = classes.iter().map(|c| c.1).sum();
        for (m, count) in classes {
            let w = if m == s.m_plus { s.weight_plus } else { s.weight_minus };
            assert!((w - count as f64 / total as f64).abs() < 1e-14, "m={m}");
        }
        assert!((energy_mc_expectation(&f, eps, &cw, 8).unwrap() - mean).abs() < 1e-13);
    }

    #[test]
    fn off_lattice_branch_gets_zero_weight() {
        let cw = CurieWeissParams::new(1.0, 1.0).unwrap();
        let eps = cw.energy_density(0.5);
        let s = energy_split(eps, &cw, 8).unwrap();
        assert_eq!((s.weight_plus, s.weight_minus), (1.0, 0.0));
        let f = LocalObservable::site(2);
        let (_, mean) = brute_force(eps, &cw, 8, &f);
        assert!((energy_mc_expectation(&f, eps, &cw, 8).unwrap() - mean).abs() < 1e-14);
        // −0.5 is not an attainable energy density at N = 8.
        assert!(energy_split(-0.5, &cw, 8).is_err());
    }
}
