//! Fixed magnetization and particle density: sampling, marginal law, exact moments.

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

use super::householder::apply_u_inverse;
use super::SphericalModel;
use crate::error::{Error, Result};
use crate::observable::MomentIndex;
use crate::quad::{effective_support, integrate, QuadOptions};
use crate::seeding::stream_rng;

/// Largest `n_J` handled by the exact moment engine.
pub const MAX_MOMENT_ORDER: usize = 12;

/// Uniform law on `{Σφ = mN, Σφ² = ρN}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnetizationEnsemble {
    pub model: SphericalModel,
    pub m: f64,
}

impl MagnetizationEnsemble {
    pub fn new(model: SphericalModel, m: f64) -> Result<Self> {
        check_magnetization(m, model.rho)?;
        Ok(Self { model, m })
    }

    /// `ρ − m²`, the transverse variance per site.
    pub fn transverse(&self) -> f64 {
        self.model.rho - self.m * self.m
    }

    /// Radius of the transverse sphere, `√(N(ρ − m²))`.
    pub fn radius(&self) -> f64 {
        (self.model.n as f64 * self.transverse()).sqrt()
    }

    /// `ln Z_MC(m, ρ; N) = ((N−3)/2) ln(ρ − m²)`.
    pub fn log_z(&self) -> f64 {
        0.5 * (self.model.n as f64 - 3.0) * self.transverse().ln()
    }
}

pub(crate) fn check_magnetization(m: f64, rho: f64) -> Result<()> {
    if !m.is_finite() {
        return Err(Error::domain(format!("m = {m} is not finite")));
    }
    let gap = rho - m * m;
    if gap == 0.0 {
        Err(Error::Degenerate(format!("m^2 = rho = {rho}")))
    } else if gap < 0.0 {
        Err(Error::domain(format!("m = {m} violates m^2 < rho = {rho}")))
    } else {
        Ok(())
    }
}

/// One draw `φ = U⁻¹(m√N, √(N(ρ−m²)) Ω)` with `Ω` uniform on the unit sphere of R^{N−1}.
pub fn sample_aux_mc_with<R: Rng>(ens: &MagnetizationEnsemble, rng: &mut R) -> Vec<f64> {
    let n = ens.model.n as usize;
    let mut y = vec![0.0; n];
    let radius = ens.radius();
    loop {
        let mut norm2 = 0.0;
        for v in y[1..].iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *v = g;
            norm2 += g * g;
        }
        if norm2 > 0.0 {
            let scale = radius / norm2.sqrt();
            y[1..].iter_mut().for_each(|v| *v *= scale);
            break;
        }
    }
    y[0] = ens.m * (n as f64).sqrt();
    apply_u_inverse(&y)
}

pub fn sample_aux_mc(ens: &MagnetizationEnsemble, seed: u64) -> Vec<f64> {
    sample_aux_mc_with(ens, &mut stream_rng(seed, 0))
}

/// Single-site marginal: `a = √((ρ−m²)(N−1))`, density ∝ `(1 − ((v−m)/a)²)^{(N−4)/2}` on `|v−m| ≤ a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteMarginal {
    pub center: f64,
    pub half_width: f64,
    pub exponent: f64,
    log_norm: f64,
}

impl SiteMarginal {
    pub fn new(ens: &MagnetizationEnsemble) -> Self {
        let n = ens.model.n as f64;
        let half_width = (ens.transverse() * (n - 1.0)).sqrt();
        let exponent = (n - 4.0) / 2.0;
        // ∫_{−a}^{a} (1 − t²/a²)^k dt = a B(1/2, k+1).
        let log_beta = ln_gamma(0.5) + ln_gamma(exponent + 1.0) - ln_gamma(exponent + 1.5);
        Self {
            center: ens.m,
            half_width,
            exponent,
            log_norm: -half_width.ln() - log_beta,
        }
    }

    pub fn density(&self, v: f64) -> f64 {
        let t = (v - self.center) / self.half_width;
        if t.abs() > 1.0 {
            return 0.0;
        }
        if self.exponent == 0.0 {
            return self.log_norm.exp();
        }
        (self.log_norm + self.exponent * (-t * t).ln_1p()).exp()
    }

    /// `⟨g(φ₁)⟩`, splitting additionally at the given kink locations of `g`.
    pub fn expectation(&self, g: impl Fn(f64) -> f64, kinks: &[f64], opts: QuadOptions) -> Result<f64> {
        let (c, a, k) = (self.center, self.half_width, self.exponent);
        let log_w = |t: f64| {
            if t.abs() >= 1.0 {
                f64::NEG_INFINITY
            } else {
                k * (-t * t).ln_1p()
            }
        };
        let scale = 1.0 / (k + 1.0).sqrt();
        let (lo, hi) = if k > 0.0 {
            effective_support(log_w, 0.0, -1.0, 1.0, scale, 90.0)
        } else {
            (-1.0, 1.0)
        };
        let mut points = vec![lo, 0.0, hi];
        for &x in kinks {
            let t = (x - c) / a;
            if t > lo && t < hi {
                points.push(t);
            }
        }
        for s in [-4.0, -2.0, -1.0, 1.0, 2.0, 4.0] {
            let t = s * scale;
            if t > lo && t < hi {
                points.push(t);
            }
        }
        points.sort_by(f64::total_cmp);
        points.dedup();
        let weight = |t: f64| (self.log_norm + log_w(t)).exp() * a;
        let q = integrate(|t| weight(t) * g(c + a * t), &points, opts)?;
        Ok(q.value)
    }
}

pub fn mc_marginal_density(ens: &MagnetizationEnsemble, value: f64) -> f64 {
    SiteMarginal::new(ens).density(value)
}

/// `ln E[χ_k^s] = (s/2) ln 2 + lnΓ((k+s)/2) − lnΓ(k/2)`.
fn ln_chi_moment(k: f64, s: usize) -> f64 {
    0.5 * s as f64 * std::f64::consts::LN_2 + ln_gamma((k + s as f64) / 2.0) - ln_gamma(k / 2.0)
}

/// Exact `⟨x^J⟩` under the fixed-magnetization ensemble.
///
/// With `x = m·1 + ξ`, `ξ` uniform on the radius-`R` sphere of the sum-zero
/// hyperplane, `E[ξ^S] = R^s E[(Pg)^S] / E[χ_{N−1}^s]` for a standard Gaussian
/// `g` and projector `P = I − 11ᵀ/N`; the Gaussian moments are hafnians of `P`.
pub fn mc_moment(j: &MomentIndex, ens: &MagnetizationEnsemble) -> Result<f64> {
    let n_j = j.n_j();
    if n_j > MAX_MOMENT_ORDER {
        return Err(Error::Capacity(format!(
            "moment order {n_j} exceeds {MAX_MOMENT_ORDER}"
        )));
    }
    let n = ens.model.n as f64;
    if j.labels().iter().any(|&l| l as u64 >= ens.model.n) {
        return Err(Error::domain(format!("moment labels {:?} exceed N", j.labels())));
    }
    let labels = j.labels();
    let cov = |a: usize, b: usize| {
        if labels[a] == labels[b] {
            1.0 - 1.0 / n
        } else {
            -1.0 / n
        }
    };
    let full = (1usize << n_j) - 1;
    let mut haf = vec![f64::NAN; full + 1];
    haf[0] = 1.0;
    fn hafnian(mask: usize, haf: &mut [f64], cov: &dyn Fn(usize, usize) -> f64) -> f64 {
        if !haf[mask].is_nan() {
            return haf[mask];
        }
        if mask.count_ones() % 2 == 1 {
            haf[mask] = 0.0;
            return 0.0;
        }
        let first = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << first);
        let mut total = 0.0;
        let mut bits = rest;
        while bits != 0 {
            let b = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            total += cov(first, b) * hafnian(rest & !(1 << b), haf, cov);
        }
        haf[mask] = total;
        total
    }
    let k = n - 1.0;
    let ln_r2 = (n * ens.transverse()).ln();
    let mut total = 0.0;
    for mask in 0..=full {
        let s = mask.count_ones() as usize;
        if s % 2 == 1 {
            continue;
        }
        let gauss = hafnian(mask, &mut haf, &cov);
        if gauss == 0.0 {
            continue;
        }
        let sphere = if s == 0 {
            1.0
        } else {
            (0.5 * s as f64 * ln_r2 - ln_chi_moment(k, s)).exp()
        };
        total += ens.m.powi((n_j - s) as i32) * sphere * gauss;
    }
    Ok(total)
}
