//! Fixed energy density: a weighted mixture of at most two magnetization shells.

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{sample_aux_mc_with, Estimate, MagnetizationEnsemble, SphericalModel, SphericalObservable};
use crate::coupling::parallel_moments;
use crate::error::{Error, Result};
use crate::observable::LocalObservable;
use crate::quad::QuadOptions;
use crate::seeding::sub_seed;

/// `m_± = −h/J ± √(h²/J² − 2ε/J)`.
pub fn m_branches(epsilon: f64, model: &SphericalModel) -> Result<(f64, f64)> {
    let (j, h) = (model.j, model.h);
    let disc = h * h / (j * j) - 2.0 * epsilon / j;
    if !(disc >= 0.0) {
        return Err(Error::domain(format!(
            "epsilon = {epsilon} exceeds h^2/(2J) = {}; magnetization branches are complex",
            h * h / (2.0 * j)
        )));
    }
    let root = disc.sqrt();
    Ok((-h / j + root, -h / j - root))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchCase {
    /// Both `m_±² < ρ`.
    TwoBranch,
    /// Only the smaller-`|m|` branch is inside the sphere.
    SingleBranch,
    /// `ε = h²/(2J)`, so `m_+ = m_- = −h/J`.
    DegenerateTop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyMethod {
    /// Exact moments or marginal quadrature per branch.
    MarginalQuadrature(QuadOptions),
    /// Monte Carlo per branch; branch `k` uses child seed `k`.
    Sampled { samples: u64, seed: u64 },
}

/// Normalized branch weights with their logarithms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyWeights {
    pub plus: f64,
    pub minus: f64,
    pub log_plus: f64,
    pub log_minus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyEnsemble {
    pub model: SphericalModel,
    pub epsilon: f64,
    pub m_plus: f64,
    pub m_minus: f64,
    pub branch_case: BranchCase,
}

impl EnergyEnsemble {
    pub fn new(model: SphericalModel, epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() {
            return Err(Error::domain(format!("epsilon = {epsilon} is not finite")));
        }
        let (m_plus, m_minus) = m_branches(epsilon, &model)?;
        let root = 0.5 * (m_plus - m_minus);
        let closest = (model.h.abs() / model.j - root).abs();
        let edge = model.rho.sqrt();
        if closest == edge {
            return Err(Error::Degenerate(format!(
                "epsilon = {epsilon} is the excluded endpoint of E_{{h,rho}}: the nearest branch has m^2 = rho = {}; \
                 at h = 0 the admissible range is the half-open interval (-rho J/2, 0] = ({}, 0]",
                model.rho,
                -0.5 * model.rho * model.j
            )));
        }
        if closest > edge {
            return Err(Error::domain(format!(
                "epsilon = {epsilon} is outside E_{{h,rho}}: both branches ({m_plus}, {m_minus}) have m^2 > rho = {}",
                model.rho
            )));
        }
        let inside = |m: f64| m * m < model.rho;
        let branch_case = if root == 0.0 {
            BranchCase::DegenerateTop
        } else if inside(m_plus) && inside(m_minus) {
            BranchCase::TwoBranch
        } else {
            BranchCase::SingleBranch
        };
        Ok(Self {
            model,
            epsilon,
            m_plus,
            m_minus,
            branch_case,
        })
    }

    fn log_z(&self, m: f64) -> f64 {
        0.5 * (self.model.n as f64 - 3.0) * (self.model.rho - m * m).ln()
    }

    /// Branch with the smaller `|m|`; ties go to `m_+`.
    pub fn dominant_m(&self) -> f64 {
        if self.m_minus.abs() < self.m_plus.abs() {
            self.m_minus
        } else {
            self.m_plus
        }
    }

    pub fn subdominant_m(&self) -> f64 {
        if self.dominant_m() == self.m_plus {
            self.m_minus
        } else {
            self.m_plus
        }
    }

    pub fn weights(&self) -> EnergyWeights {
        let half = std::f64::consts::LN_2;
        match self.branch_case {
            BranchCase::DegenerateTop => EnergyWeights {
                plus: 0.5,
                minus: 0.5,
                log_plus: -half,
                log_minus: -half,
            },
            BranchCase::SingleBranch => {
                let plus_wins = self.dominant_m() == self.m_plus;
                let (one, zero) = ((1.0, 0.0), (0.0, f64::NEG_INFINITY));
                let ((plus, log_plus), (minus, log_minus)) = if plus_wins { (one, zero) } else { (zero, one) };
                EnergyWeights {
                    plus,
                    minus,
                    log_plus,
                    log_minus,
                }
            }
            BranchCase::TwoBranch => {
                let (a, b) = (self.log_z(self.m_plus), self.log_z(self.m_minus));
                if a == b {
                    let half = -std::f64::consts::LN_2;
                    return EnergyWeights {
                        plus: 0.5,
                        minus: 0.5,
                        log_plus: half,
                        log_minus: half,
                    };
                }
                let top = a.max(b);
                let log_sum = top + ((a - top).exp() + (b - top).exp()).ln();
                EnergyWeights {
                    plus: (a - log_sum).exp(),
                    minus: (b - log_sum).exp(),
                    log_plus: a - log_sum,
                    log_minus: b - log_sum,
                }
            }
        }
    }

    /// `ln` of the closed-form ratio `((ρ − m_sub²)/(ρ − m_dom²))^{(N−3)/2}`.
    ///
    /// NaN when the sub-dominant branch lies outside the sphere.
    pub fn closed_form_log_ratio(&self) -> f64 {
        let rho = self.model.rho;
        let (big, small) = (self.subdominant_m(), self.dominant_m());
        0.5 * (self.model.n as f64 - 3.0) * ((rho - big * big) / (rho - small * small)).ln()
    }

    /// Sub-dominant over dominant weight, from the normalized weights, in log-space.
    pub fn weight_log_ratio(&self) -> f64 {
        let w = self.weights();
        if self.dominant_m() == self.m_plus {
            w.log_minus - w.log_plus
        } else {
            w.log_plus - w.log_minus
        }
    }

    /// `(m, weight)` for each branch with positive weight.
    pub fn branches(&self) -> Vec<(f64, f64)> {
        let w = self.weights();
        match self.branch_case {
            BranchCase::DegenerateTop => vec![(self.m_plus, 1.0)],
            _ => [(self.m_plus, w.plus), (self.m_minus, w.minus)]
                .into_iter()
                .filter(|&(_, w)| w > 0.0)
                .collect(),
        }
    }

    fn shell(&self, m: f64) -> Result<MagnetizationEnsemble> {
        MagnetizationEnsemble::new(self.model, m)
    }

    pub fn expectation(&self, obs: &SphericalObservable, method: EnergyMethod) -> Result<Estimate> {
        match method {
            EnergyMethod::MarginalQuadrature(opts) => {
                let mut total = 0.0;
                for (m, w) in self.branches() {
                    total += w * obs.mc_expectation(&self.shell(m)?, opts)?;
                }
                Ok(Estimate::exact(total))
            }
            EnergyMethod::Sampled { samples, seed } => self.sampled(|phi| obs.eval_state(phi), samples, seed),
        }
    }

    /// Monte Carlo `⟨f⟩` for an arbitrary local observable.
    pub fn sampled_local_expectation(&self, f: &LocalObservable, samples: u64, seed: u64) -> Result<Estimate> {
        self.sampled(|phi| f.eval_state(phi), samples, seed)
    }

    fn sampled(&self, f: impl Fn(&[f64]) -> f64 + Sync, samples: u64, seed: u64) -> Result<Estimate> {
        let mut value = 0.0;
        let mut var = 0.0;
        for (k, (m, w)) in self.branches().into_iter().enumerate() {
            let ens = self.shell(m)?;
            let moments = parallel_moments(sub_seed(seed, k as u64), samples, |rng: &mut ChaCha8Rng| {
                f(&sample_aux_mc_with(&ens, rng))
            })?;
            value += w * moments.mean;
            var += (w * moments.std_error()).powi(2);
        }
        Ok(Estimate {
            value,
            std_error: var.sqrt(),
        })
    }
}

/// `2K·r` for a sub-dominant/dominant weight ratio `r` and observable bound `K`.
pub fn dominance_bound(k: f64, log_ratio: f64) -> f64 {
    2.0 * k * log_ratio.exp()
}
