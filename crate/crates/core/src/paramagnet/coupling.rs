//! Optimal coupling between two fixed-magnetization ensembles.

use rand::seq::{index::sample, SliceRandom};
use rand::Rng;

use super::plus_count;
use crate::error::Result;
use crate::seeding::stream_rng;

/// A spin configuration in `{−1, +1}^N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinConfiguration(pub Vec<i8>);

impl SpinConfiguration {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn magnetization(&self) -> i64 {
        self.0.iter().map(|&s| s as i64).sum()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&s| s as f64).collect()
    }

    /// `(1/N) ‖φ − φ′‖₁`.
    pub fn specific_l1(&self, other: &Self) -> f64 {
        let flips = self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count();
        2.0 * flips as f64 / self.len() as f64
    }
}

/// Draws `φ` uniform on `S_m`, then flips `|K′ − K|` uniformly chosen opposite-sign sites.
pub fn sample_optimal_coupling_with<R: Rng>(
    m: f64,
    m_prime: f64,
    n: u64,
    rng: &mut R,
) -> Result<(SpinConfiguration, SpinConfiguration)> {
    let k = plus_count(m, n)? as usize;
    let k_prime = plus_count(m_prime, n)? as usize;
    let n = n as usize;
    let mut spins = vec![-1i8; n];
    spins[..k].fill(1);
    spins.shuffle(rng);
    let mut flipped = spins.clone();
    let (from, count) = if k_prime >= k {
        (-1i8, k_prime - k)
    } else {
        (1i8, k - k_prime)
    };
    let candidates: Vec<usize> = (0..n).filter(|&i| spins[i] == from).collect();
    assert!(
        count <= candidates.len(),
        "admissible densities always leave enough sites to flip"
    );
    for pick in sample(rng, candidates.len(), count) {
        flipped[candidates[pick]] = -from;
    }
    Ok((SpinConfiguration(spins), SpinConfiguration(flipped)))
}

/// Seeded variant of [`sample_optimal_coupling_with`].
pub fn sample_optimal_coupling(
    m: f64,
    m_prime: f64,
    n: u64,
    seed: u64,
) -> Result<(SpinConfiguration, SpinConfiguration)> {
    sample_optimal_coupling_with(m, m_prime, n, &mut stream_rng(seed, 0))
}
