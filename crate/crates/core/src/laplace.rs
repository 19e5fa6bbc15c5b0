//! Leading-order Laplace asymptotics of `I(λ) = ∫_a^b φ(x) e^{−λh(x)} dx`.
//!
//! Near the minimum `x₀` the problem is described by
//! `h(x) − h(x₀) ~ a₀ t^μ` and `φ(x) ~ b₀ t^{α−1}` with `t = |x − x₀|`.
//! The leading term is `e^{−λh(x₀)} Γ(α/μ) c₀ λ^{−α/μ}` with `c₀ = b₀/(μ a₀^{α/μ})`.

use std::sync::Arc;

use statrs::function::gamma::gamma;

use crate::error::{ensure, Error, Result};
use crate::quad::{integrate, QuadOptions, Quadrature};

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Local expansion coefficients on one side of the minimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expansion {
    pub a0: f64,
    pub alpha: f64,
    pub b0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MinLocation {
    LeftEndpoint,
    /// Minimum at `at`; `left` describes the expansion in `t = at − x`.
    Interior {
        at: f64,
        left: Expansion,
    },
}

#[derive(Clone)]
pub struct LaplaceProblem {
    pub name: String,
    pub a: f64,
    pub b: f64,
    pub min_location: MinLocation,
    pub h_at_min: f64,
    pub mu_exp: f64,
    /// Expansion to the right of the minimum.
    pub right: Expansion,
    pub h_eval: RealFn,
    pub phi_eval: RealFn,
}

impl std::fmt::Debug for LaplaceProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LaplaceProblem")
            .field("name", &self.name)
            .field("domain", &(self.a, self.b))
            .field("min_location", &self.min_location)
            .field("mu_exp", &self.mu_exp)
            .field("right", &self.right)
            .finish()
    }
}

impl LaplaceProblem {
    pub fn endpoint(
        name: impl Into<String>,
        (a, b): (f64, f64),
        mu_exp: f64,
        right: Expansion,
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let h_at_min = h(a);
        let problem = Self {
            name: name.into(),
            a,
            b,
            min_location: MinLocation::LeftEndpoint,
            h_at_min,
            mu_exp,
            right,
            h_eval: Arc::new(h),
            phi_eval: Arc::new(phi),
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn min_point(&self) -> f64 {
        match self.min_location {
            MinLocation::LeftEndpoint => self.a,
            MinLocation::Interior { at, .. } => at,
        }
    }

    /// Checks coefficient signs and that `h` exceeds its minimum on a grid away from it.
    pub fn validate(&self) -> Result<()> {
        ensure(self.a < self.b, || format!("empty domain [{}, {}]", self.a, self.b))?;
        ensure(self.mu_exp > 0.0, || format!("mu = {} must be > 0", self.mu_exp))?;
        let mut sides = vec![self.right];
        if let MinLocation::Interior { at, left } = self.min_location {
            ensure(self.a < at && at < self.b, || {
                format!("interior minimum {at} outside ({}, {})", self.a, self.b)
            })?;
            sides.push(left);
        }
        for e in &sides {
            ensure(e.a0 != 0.0, || "a0 must be nonzero".into())?;
            ensure(e.alpha > 0.0, || format!("alpha = {} must be > 0", e.alpha))?;
            ensure(e.b0 != 0.0, || "b0 must be nonzero".into())?;
        }
        let x0 = self.min_point();
        let width = self.b - self.a;
        for k in 1..200 {
            let x = self.a + width * k as f64 / 200.0;
            if (x - x0).abs() < 1e-3 * width {
                continue;
            }
            let hx = (self.h_eval)(x);
            ensure(hx > self.h_at_min, || {
                format!("h({x}) = {hx} does not exceed the minimum value {}", self.h_at_min)
            })?;
        }
        Ok(())
    }
}

/// `Γ(α/μ) c₀ λ^{−α/μ}` for one side, without the `e^{−λh}` factor.
fn side_term(e: &Expansion, mu: f64, lambda: f64) -> Result<f64> {
    let ratio = e.alpha / mu;
    if e.a0 <= 0.0 && ratio.fract() != 0.0 {
        return Err(Error::domain(format!(
            "a0 = {} <= 0 with non-integer alpha/mu = {ratio}: real power undefined",
            e.a0
        )));
    }
    let c0 = e.b0 / (mu * e.a0.powf(ratio));
    Ok(gamma(ratio) * c0 * lambda.powf(-ratio))
}

/// Leading term of `I(λ)`; interior minima contribute one term per side.
pub fn leading_term(problem: &LaplaceProblem, lambda: f64) -> Result<f64> {
    ensure(lambda > 0.0, || format!("lambda = {lambda} must be > 0"))?;
    let mut total = side_term(&problem.right, problem.mu_exp, lambda)?;
    if let MinLocation::Interior { left, .. } = problem.min_location {
        total += side_term(&left, problem.mu_exp, lambda)?;
    }
    Ok((-lambda * problem.h_at_min).exp() * total)
}

/// `(Γ((i+1)/2)/Γ(1/2)) (1/i!) φ^{(i)}(b) (h″(b)/2)^{−i/2} λ^{−i/2}`.
pub fn interior_min_ratio(i: u32, h2: f64, phi_i: f64, lambda: f64) -> f64 {
    let half_i = i as f64 / 2.0;
    prefactor(i) * phi_i * (0.5 * h2).powf(-half_i) * lambda.powf(-half_i)
}

/// `Γ((i+1)/2) / (Γ(1/2) i!)` by exact recurrences.
fn prefactor(i: u32) -> f64 {
    let k = i / 2;
    let gamma_ratio = if i.is_multiple_of(2) {
        (0..k).map(|j| j as f64 + 0.5).product::<f64>()
    } else {
        (1..=k).map(f64::from).product::<f64>() / std::f64::consts::PI.sqrt()
    };
    gamma_ratio / (1..=i).map(f64::from).product::<f64>()
}

/// Adaptive quadrature of `∫ φ e^{−λh}` with breakpoints on the `λ^{−1/μ}` scale.
pub fn quadrature_reference(problem: &LaplaceProblem, lambda: f64) -> Result<Quadrature> {
    ensure(lambda > 0.0, || format!("lambda = {lambda} must be > 0"))?;
    let x0 = problem.min_point();
    let scale = lambda.powf(-1.0 / problem.mu_exp);
    let mut points = vec![problem.a, x0, problem.b];
    for k in [1.0, 4.0, 16.0, 64.0, 256.0] {
        for x in [x0 - k * scale, x0 + k * scale] {
            if x > problem.a && x < problem.b {
                points.push(x);
            }
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    let (h, phi, hmin) = (&problem.h_eval, &problem.phi_eval, problem.h_at_min);
    let q = integrate(
        |x| phi(x) * (-lambda * (h(x) - hmin)).exp(),
        &points,
        QuadOptions::rel(1e-10),
    )?;
    let factor = (-lambda * hmin).exp();
    Ok(Quadrature {
        value: q.value * factor,
        abs_error: q.abs_error * factor,
        evaluations: q.evaluations,
    })
}

/// The three closed-form validation problems.
pub fn registered_problems() -> Vec<LaplaceProblem> {
    let unit = Expansion {
        a0: 1.0,
        alpha: 1.0,
        b0: 1.0,
    };
    vec![
        LaplaceProblem::endpoint("linear", (0.0, 1.0), 1.0, unit, |x| x, |_| 1.0),
        LaplaceProblem::endpoint("half_gaussian", (0.0, 1.0), 2.0, unit, |x| x * x, |_| 1.0),
        LaplaceProblem::endpoint("exp_weighted_half_gaussian", (0.0, 1.0), 2.0, unit, |x| x * x, f64::exp),
    ]
    .into_iter()
    .map(|p| p.expect("registered problems are valid"))
    .collect()
}

/// `h″(m*)` for `ψ_{μ,ρ}(m) = μm − ½ ln(ρ − m²)`.
pub fn psi_second_derivative(m_star: f64, rho: f64) -> f64 {
    (rho + m_star * m_star) / (rho - m_star * m_star).powi(2)
}
