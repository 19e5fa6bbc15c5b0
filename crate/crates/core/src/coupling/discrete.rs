//! Finite discrete measures on R^N and exact optimal couplings between them.

use rand::seq::SliceRandom;
use rand::Rng;

use super::lp::solve_transport;
use super::specific_cost;
use crate::error::{ensure, Error, Result};
use crate::observable::{LocalObservable, MomentIndex};

/// Largest joint support the exact solver accepts.
const MAX_JOINT_SUPPORT: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Weights must be non-negative and sum to 1 within 1e−9; they are renormalized exactly.
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        ensure(!points.is_empty(), || "measure needs at least one point".into())?;
        ensure(points.len() == weights.len(), || {
            "points and weights differ in length".into()
        })?;
        let dim = points[0].len();
        ensure(dim >= 1, || "points must have dimension N >= 1".into())?;
        ensure(points.iter().all(|p| p.len() == dim), || {
            "points have mixed dimensions".into()
        })?;
        ensure(points.iter().flatten().all(|v| v.is_finite()), || {
            "points must be finite".into()
        })?;
        ensure(weights.iter().all(|w| w.is_finite() && *w >= 0.0), || {
            "weights must be finite and non-negative".into()
        })?;
        let total: f64 = weights.iter().sum();
        ensure((total - 1.0).abs() <= 1e-9, || {
            format!("weights sum to {total}, expected 1")
        })?;
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { dim, points, weights })
    }

    pub fn point_mass(x: Vec<f64>) -> Result<Self> {
        Self::new(vec![x], vec![1.0])
    }

    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let w = 1.0 / points.len().max(1) as f64;
        let weights = vec![w; points.len()];
        Self::new(points, weights)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn expectation(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }

    /// Law of `x ↦ x∘π`, i.e. site `k` of the image carries site `perm[k]`.
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        let points = self
            .points
            .iter()
            .map(|x| perm.iter().map(|&k| x[k]).collect())
            .collect();
        Self {
            dim: self.dim,
            points,
            weights: self.weights.clone(),
        }
    }
}

/// A coupling stored as index triples into its two marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJointDistribution {
    pub first: DiscreteMeasure,
    pub second: DiscreteMeasure,
    /// `(index in first, index in second, mass)`.
    pub support: Vec<(usize, usize, f64)>,
}

impl DiscreteJointDistribution {
    pub fn total_mass(&self) -> f64 {
        self.support.iter().map(|s| s.2).sum()
    }

    /// Largest deviation of a row or column sum from the prescribed marginal.
    pub fn marginal_error(&self) -> f64 {
        let mut rows = vec![0.0; self.first.len()];
        let mut cols = vec![0.0; self.second.len()];
        for &(i, j, w) in &self.support {
            rows[i] += w;
            cols[j] += w;
        }
        let dev =
            |sums: &[f64], target: &[f64]| sums.iter().zip(target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        dev(&rows, self.first.weights()).max(dev(&cols, self.second.weights()))
    }

    pub fn expected_cost(&self, p: f64) -> f64 {
        self.support
            .iter()
            .map(|&(i, j, w)| w * specific_cost(&self.first.points()[i], &self.second.points()[j], p))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalCoupling {
    /// `w_p`, the p-th root of the optimal cost.
    pub value: f64,
    /// Optimal expected specific cost `E[(1/N) Σ |x_i − y_i|^p]`.
    pub cost: f64,
    pub plan: DiscreteJointDistribution,
}

/// Exact `w_p` between two finite measures by linear programming.
pub fn wp_bruteforce(first: &DiscreteMeasure, second: &DiscreteMeasure, p: f64) -> Result<OptimalCoupling> {
    ensure(p >= 1.0, || format!("p = {p} must be >= 1"))?;
    ensure(first.dim() == second.dim(), || {
        format!("dimension mismatch: {} vs {}", first.dim(), second.dim())
    })?;
    let joint = first.len() * second.len();
    if joint > MAX_JOINT_SUPPORT {
        return Err(Error::Capacity(format!(
            "joint support {joint} exceeds {MAX_JOINT_SUPPORT}"
        )));
    }
    let cost: Vec<f64> = first
        .points()
        .iter()
        .flat_map(|x| second.points().iter().map(move |y| specific_cost(x, y, p)))
        .collect();
    let plan = solve_transport(first.weights(), second.weights(), &cost)?;
    let optimum = plan.cost.max(0.0);
    Ok(OptimalCoupling {
        value: optimum.powf(1.0 / p),
        cost: optimum,
        plan: DiscreteJointDistribution {
            first: first.clone(),
            second: second.clone(),
            support: plan.flows,
        },
    })
}

/// `M(J,p)`: the largest `q(n_J−1)`-th absolute moment norm over sites in `J` and measures.
pub fn moment_constant(j: &MomentIndex, p: f64, measures: &[&DiscreteMeasure]) -> f64 {
    let n_j = j.n_j();
    if n_j == 1 {
        return 1.0;
    }
    let r = super::conjugate_exponent(p) * (n_j - 1) as f64;
    j.distinct()
        .into_iter()
        .flat_map(|i| {
            measures
                .iter()
                .map(move |mu| mu.expectation(|x| x[i].abs().powf(r)).powf(1.0 / r))
        })
        .fold(0.0, f64::max)
}

/// Result of comparing `⟨f⟩` before and after random label transpositions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpotCheck {
    pub transpositions: usize,
    pub max_deviation: f64,
    pub passed: bool,
}

/// Applies up to 100 random label swaps and compares `⟨f∘P_I⟩` within `tol`.
pub fn exchangeability_spot_check<R: Rng>(
    measure: &DiscreteMeasure,
    f: &LocalObservable,
    swaps: usize,
    tol: f64,
    rng: &mut R,
) -> SpotCheck {
    let n = measure.dim();
    let swaps = swaps.min(100);
    let base = measure.expectation(|x| f.eval_state(x));
    let mut max_deviation: f64 = 0.0;
    for _ in 0..swaps {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.swap(a, b);
        let swapped = measure.expectation(|x| {
            let y: Vec<f64> = perm.iter().map(|&k| x[k]).collect();
            f.eval_state(&y)
        });
        max_deviation = max_deviation.max((swapped - base).abs());
    }
    SpotCheck {
        transpositions: swaps,
        max_deviation,
        passed: max_deviation <= tol,
    }
}

/// Exchangeable measures on `alphabet^N` built as mixtures of uniform laws on type classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeableFamily {
    alphabet: Vec<f64>,
    n: usize,
    types: Vec<Vec<usize>>,
}

impl ExchangeableFamily {
    pub fn new(alphabet: Vec<f64>, n: usize) -> Result<Self> {
        ensure(!alphabet.is_empty() && n >= 1, || {
            "need a non-empty alphabet and N >= 1".into()
        })?;
        let types = compositions(n, alphabet.len());
        Ok(Self { alphabet, n, types })
    }

    /// Letter counts of every type class.
    pub fn types(&self) -> &[Vec<usize>] {
        &self.types
    }

    /// All configurations in one type class, in lexicographic order of letter indices.
    pub fn class_points(&self, counts: &[usize]) -> Vec<Vec<f64>> {
        let mut letters: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(k, &c)| std::iter::repeat_n(k, c))
            .collect();
        let mut out = Vec::new();
        loop {
            out.push(letters.iter().map(|&k| self.alphabet[k]).collect());
            if !next_permutation(&mut letters) {
                break;
            }
        }
        out
    }

    /// Mixture `Σ_t w_t · Uniform(class t)`; weights indexed like [`ExchangeableFamily::types`].
    pub fn measure(&self, type_weights: &[f64]) -> Result<DiscreteMeasure> {
        ensure(type_weights.len() == self.types.len(), || {
            "one weight per type class required".into()
        })?;
        let total: f64 = type_weights.iter().sum();
        ensure(total > 0.0, || "type weights must not all vanish".into())?;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (counts, &w) in self.types.iter().zip(type_weights) {
            if w <= 0.0 {
                continue;
            }
            let class = self.class_points(counts);
            let share = w / total / class.len() as f64;
            weights.extend(std::iter::repeat_n(share, class.len()));
            points.extend(class);
        }
        let sum: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= sum);
        DiscreteMeasure::new(points, weights)
    }

    /// Random mixture over at most `max_types` classes with total support ≤ `max_support`.
    pub fn random_measure<R: Rng>(&self, max_types: usize, max_support: usize, rng: &mut R) -> Result<DiscreteMeasure> {
        let mut order: Vec<usize> = (0..self.types.len()).collect();
        order.shuffle(rng);
        let mut weights = vec![0.0; self.types.len()];
        let mut support = 0usize;
        let mut used = 0usize;
        for t in order {
            let size = multinomial(self.n, &self.types[t]);
            if support + size > max_support {
                continue;
            }
            support += size;
            weights[t] = rng.random::<f64>() + 0.05;
            used += 1;
            if used == max_types {
                break;
            }
        }
        self.measure(&weights)
    }
}

fn compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return vec![vec![n]];
    }
    (0..=n)
        .flat_map(|first| {
            compositions(n - first, k - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

fn multinomial(n: usize, counts: &[usize]) -> usize {
    let mut result: u128 = 1;
    let mut placed = 0u128;
    for &c in counts {
        for i in 1..=c as u128 {
            placed += 1;
            result = result * placed / i;
        }
    }
    debug_assert_eq!(placed as usize, n);
    result as usize
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).expect("pivot exists");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}
