//! Canonical ensembles as one-dimensional mixtures of fixed-magnetization shells.
//!
//! Auxiliary canonical: `m = √ρ·tanh u` turns the weight
//! `e^{−Nμm}(ρ−m²)^{(N−3)/2} dm` into `e^{−Nμ√ρ tanh u} cosh^{−(N−1)}u du`.
//! Energy canonical (h = 0): `ε = −(ρJ/2) sin²θ` turns
//! `e^{−Nβε}(−2ε/J)^{−1/2}(ρ+2ε/J)^{(N−3)/2} dε` into `e^{−Nβε(θ)} cos^{N−2}θ dθ`.

use serde::Serialize;

use super::{MagnetizationEnsemble, SphericalModel, SphericalObservable};
use crate::error::{ensure, Error, Result};
use crate::quad::{effective_support, integrate_fallible, QuadOptions};

/// Log-weight drop treated as negligible.
const SUPPORT_DROP: f64 = 75.0;

/// Mean and standard deviation of a scalar under a canonical mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MagnetizationStats {
    pub mean: f64,
    pub sd: f64,
}

fn ln_cosh(u: f64) -> f64 {
    let a = u.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Normalized 1-D mixture on `[lo, hi]` with breakpoints around the peak.
struct Mixture<W> {
    log_w: W,
    peak: f64,
    top: f64,
    points: Vec<f64>,
    opts: QuadOptions,
    norm: f64,
}

impl<W: Fn(f64) -> f64> Mixture<W> {
    fn new(log_w: W, peak: f64, a: f64, b: f64, scale: f64, opts: QuadOptions) -> Result<Self> {
        let (lo, hi) = effective_support(&log_w, peak, a, b, scale, SUPPORT_DROP);
        let mut points = vec![lo, peak, hi];
        for k in [-8.0, -3.0, -1.0, 1.0, 3.0, 8.0] {
            let x = peak + k * scale;
            if x > lo && x < hi {
                points.push(x);
            }
        }
        points.sort_by(f64::total_cmp);
        points.dedup();
        let top = log_w(peak);
        let mut mix = Self {
            log_w,
            peak,
            top,
            points,
            opts,
            norm: 1.0,
        };
        mix.norm = integrate_fallible(|x| Ok(mix.weight(x)), &mix.points, opts)?.value;
        ensure(mix.norm > 0.0 && mix.norm.is_finite(), || {
            "canonical normalization vanished".into()
        })?;
        Ok(mix)
    }

    fn weight(&self, x: f64) -> f64 {
        let lw = (self.log_w)(x) - self.top;
        if lw.is_nan() {
            0.0
        } else {
            lw.exp()
        }
    }

    /// `∫ w g / ∫ w`.
    fn average(&self, g: impl Fn(f64) -> Result<f64>) -> Result<f64> {
        let opts = QuadOptions {
            abs_tol: self.opts.abs_tol.max(1e-13 * self.norm),
            ..self.opts
        };
        let q = integrate_fallible(
            |x| {
                let w = self.weight(x);
                if w == 0.0 {
                    Ok(0.0)
                } else {
                    Ok(w * g(x)?)
                }
            },
            &self.points,
            opts,
        )?;
        Ok(q.value / self.norm)
    }

    fn stats(&self, g: impl Fn(f64) -> f64) -> Result<MagnetizationStats> {
        let mean = self.average(|x| Ok(g(x)))?;
        let var = self.average(|x| Ok((g(x) - mean).powi(2)))?;
        Ok(MagnetizationStats {
            mean,
            sd: var.max(0.0).sqrt(),
        })
    }
}

/// Auxiliary canonical ensemble with magnetization field `μ`.
pub struct AuxCanonical {
    pub model: SphericalModel,
    pub mu: f64,
    mixture: Mixture<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl std::fmt::Debug for AuxCanonical {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AuxCanonical")
            .field("model", &self.model)
            .field("mu", &self.mu)
            .field("peak_u", &self.mixture.peak)
            .finish()
    }
}

impl AuxCanonical {
    pub fn new(model: SphericalModel, mu: f64, opts: QuadOptions) -> Result<Self> {
        ensure(mu.is_finite(), || format!("mu = {mu} must be finite"))?;
        let n = model.n as f64;
        let a = n * mu * model.rho.sqrt();
        let log_w = move |u: f64| -a * u.tanh() - (n - 1.0) * ln_cosh(u);
        // Stationary point of log_w: a t² − (N−1) t − a = 0 with t = tanh u.
        let t = -2.0 * a / ((n - 1.0) + ((n - 1.0).powi(2) + 4.0 * a * a).sqrt());
        let peak = t.atanh();
        let mixture = Mixture::new(
            Box::new(log_w) as Box<dyn Fn(f64) -> f64 + Send + Sync>,
            peak,
            peak - 50.0,
            peak + 50.0,
            1.0 / n.sqrt(),
            opts,
        )?;
        Ok(Self { model, mu, mixture })
    }

    /// Large-N most likely magnetization `1/(2μ) − sgn(μ)√(1/(4μ²) + ρ)`.
    pub fn m_star(mu: f64, rho: f64) -> f64 {
        if mu == 0.0 {
            0.0
        } else {
            1.0 / (2.0 * mu) - mu.signum() * (1.0 / (4.0 * mu * mu) + rho).sqrt()
        }
    }

    /// Field whose `m_star` equals `m`.
    pub fn matched_mu(m: f64, rho: f64) -> f64 {
        -m / (rho - m * m)
    }

    fn m_of(&self, u: f64) -> f64 {
        self.model.rho.sqrt() * u.tanh()
    }

    /// Mean and standard deviation of `M/N`.
    pub fn magnetization(&self) -> Result<MagnetizationStats> {
        self.mixture.stats(|u| self.m_of(u))
    }

    /// `⟨g(M/N)⟩`.
    pub fn average_over_m(&self, g: impl Fn(f64) -> Result<f64>) -> Result<f64> {
        self.mixture.average(|u| g(self.m_of(u)))
    }

    pub fn expectation(&self, obs: &SphericalObservable) -> Result<f64> {
        let opts = self.mixture.opts;
        self.average_over_m(|m| {
            if m * m >= self.model.rho {
                return Ok(0.0);
            }
            obs.mc_expectation(&MagnetizationEnsemble::new(self.model, m)?, opts)
        })
    }
}

/// Canonical ensemble at inverse temperature `β` for `h = 0`.
pub struct CanonicalEnergy {
    pub model: SphericalModel,
    pub beta: f64,
    mixture: Mixture<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl std::fmt::Debug for CanonicalEnergy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CanonicalEnergy")
            .field("model", &self.model)
            .field("beta", &self.beta)
            .field("peak_theta", &self.mixture.peak)
            .finish()
    }
}

impl CanonicalEnergy {
    pub fn new(model: SphericalModel, beta: f64, opts: QuadOptions) -> Result<Self> {
        if model.h != 0.0 {
            return Err(Error::Unsupported(format!(
                "canonical energy quadrature requires h = 0, got h = {}",
                model.h
            )));
        }
        ensure(beta.is_finite(), || format!("beta = {beta} must be finite"))?;
        let n = model.n as f64;
        let c = n * beta * model.rho * model.j / 2.0;
        let half_pi = std::f64::consts::FRAC_PI_2;
        let log_w = move |theta: f64| {
            let cos = theta.cos();
            if cos <= 0.0 {
                return f64::NEG_INFINITY;
            }
            c * theta.sin().powi(2) + (n - 2.0) * cos.ln()
        };
        // Stationary point: cos²θ = (N−2)/(NβρJ) when that is below 1.
        let cos2 = (n - 2.0) / (2.0 * c);
        let peak = if c > 0.0 && cos2 < 1.0 { cos2.sqrt().acos() } else { 0.0 };
        let mixture = Mixture::new(
            Box::new(log_w) as Box<dyn Fn(f64) -> f64 + Send + Sync>,
            peak,
            0.0,
            half_pi,
            1.0 / n.sqrt(),
            opts,
        )?;
        Ok(Self { model, beta, mixture })
    }

    /// Large-N energy density `−(Jρ/2)(1 − 1/(βJρ))` for `β ≥ 1/(Jρ)`, else 0.
    pub fn eps_star(beta: f64, rho: f64, j: f64) -> f64 {
        if beta * j * rho >= 1.0 {
            -0.5 * j * rho * (1.0 - 1.0 / (beta * j * rho))
        } else {
            0.0
        }
    }

    /// Inverse temperature whose `eps_star` equals `ε`.
    pub fn matched_beta(epsilon: f64, rho: f64, j: f64) -> f64 {
        (1.0 / j) / (rho + 2.0 * epsilon / j)
    }

    fn eps_of(&self, theta: f64) -> f64 {
        -0.5 * self.model.rho * self.model.j * theta.sin().powi(2)
    }

    /// `⟨g(H/N)⟩`.
    pub fn average_over_eps(&self, g: impl Fn(f64) -> Result<f64>) -> Result<f64> {
        self.mixture.average(|t| g(self.eps_of(t)))
    }

    /// Mean and standard deviation of `H/N`.
    pub fn energy(&self) -> Result<MagnetizationStats> {
        self.mixture.stats(|t| self.eps_of(t))
    }

    pub fn expectation(&self, obs: &SphericalObservable) -> Result<f64> {
        let opts = self.mixture.opts;
        let root_rho = self.model.rho.sqrt();
        self.mixture.average(|theta| {
            let m = root_rho * theta.sin();
            if m * m >= self.model.rho {
                return Ok(0.0);
            }
            let plus = obs.mc_expectation(&MagnetizationEnsemble::new(self.model, m)?, opts)?;
            let minus = obs.mc_expectation(&MagnetizationEnsemble::new(self.model, -m)?, opts)?;
            Ok(0.5 * (plus + minus))
        })
    }
}
