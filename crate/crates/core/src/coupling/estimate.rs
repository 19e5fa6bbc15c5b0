//! Monte Carlo transport-cost estimation with deterministic parallel chunks.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::specific_cost;
use crate::error::{ensure, Error, Result};
use crate::seeding::{chunks, stream_rng, CHUNK};

/// Streaming mean and variance (Welford), mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningMoments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningMoments) {
        if other.count == 0 {
            return;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / total as f64;
        self.m2 += other.m2 + delta * delta * (self.count as f64 * other.count as f64) / total as f64;
        self.count = total;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Draws `samples` values in parallel; chunk `k` uses ChaCha stream `k` of `seed`.
pub fn parallel_moments<F>(seed: u64, samples: u64, draw: F) -> Result<RunningMoments>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let parts: Vec<Result<RunningMoments>> = chunks(samples)
        .into_par_iter()
        .map(|(k, len)| {
            let mut rng = stream_rng(seed, k);
            let mut acc = RunningMoments::default();
            for s in 0..len {
                let x = draw(&mut rng);
                if !x.is_finite() {
                    return Err(Error::NonFinite { index: k * CHUNK + s });
                }
                acc.push(x);
            }
            Ok(acc)
        })
        .collect();
    let mut total = RunningMoments::default();
    for part in parts {
        total.merge(&part?);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingReport {
    /// `E[(1/N)‖x − T x‖_p^p]^{1/p}`.
    pub estimate: f64,
    /// Delta-method standard error of `estimate`.
    pub estimate_se: f64,
    /// Mean specific cost `E[(1/N)‖x − T x‖_p^p]`.
    pub mean_cost: f64,
    /// Plug-in standard error of `mean_cost`.
    pub mean_cost_se: f64,
    pub p: f64,
    pub samples: u64,
    pub seed: u64,
    /// Theoretical bound on `mean_cost`, where one is known.
    pub bound: Option<f64>,
}

impl CouplingReport {
    pub fn from_moments(moments: &RunningMoments, p: f64, seed: u64) -> Self {
        let mean_cost = moments.mean.max(0.0);
        let mean_cost_se = moments.std_error();
        let estimate = mean_cost.powf(1.0 / p);
        let estimate_se = if mean_cost > 0.0 {
            mean_cost.powf(1.0 / p - 1.0) / p * mean_cost_se
        } else {
            0.0
        };
        Self {
            estimate,
            estimate_se,
            mean_cost,
            mean_cost_se,
            p,
            samples: moments.count,
            seed,
            bound: None,
        }
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self
    }

    /// Whether `mean_cost ≤ bound + k·SE`.
    pub fn within_bound(&self, k: f64) -> Option<bool> {
        self.bound.map(|b| self.mean_cost <= b + k * self.mean_cost_se)
    }
}

/// Estimates the specific cost of the coupling `(x, T x)` with `x` drawn by `sampler`.
pub fn transport_cost_estimate<S, T>(
    sampler: S,
    map: T,
    p: f64,
    n: usize,
    samples: u64,
    seed: u64,
) -> Result<CouplingReport>
where
    S: Fn(&mut ChaCha8Rng) -> Vec<f64> + Sync,
    T: Fn(&[f64]) -> Vec<f64> + Sync,
{
    ensure(p >= 1.0, || format!("p = {p} must be >= 1"))?;
    ensure(samples >= 2, || "at least two samples are required".into())?;
    let moments = parallel_moments(seed, samples, |rng| {
        let x = sampler(rng);
        if x.len() != n {
            return f64::NAN;
        }
        let y = map(&x);
        specific_cost(&x, &y, p)
    })?;
    Ok(CouplingReport::from_moments(&moments, p, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|k| ((k * 7919) % 1013) as f64 / 17.0).collect();
        let mut whole = RunningMoments::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut parts = RunningMoments::default();
        for chunk in xs.chunks(333) {
            let mut c = RunningMoments::default();
            chunk.iter().for_each(|&x| c.push(x));
            parts.merge(&c);
        }
        assert!((whole.mean - parts.mean).abs() < 1e-12);
        assert!((whole.variance() - parts.variance()).abs() < 1e-9);
    }

    #[test]
    fn identity_map_costs_nothing() {
        let r = transport_cost_estimate(
            |rng| (0..4).map(|_| rng.random::<f64>()).collect(),
            |x| x.to_vec(),
            2.0,
            4,
            100,
            1,
        )
        .unwrap();
        assert_eq!((r.estimate, r.mean_cost_se), (0.0, 0.0));
    }

    #[test]
    fn reproducible_across_thread_counts() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    transport_cost_estimate(
                        |rng| (0..3).map(|_| rng.random::<f64>()).collect(),
                        |x| x.iter().map(|v| v * 0.5).collect(),
                        1.0,
                        3,
                        10_000,
                        42,
                    )
                    .unwrap()
                })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn non_finite_draw_reports_index() {
        let err = parallel_moments(0, 10, |rng| {
            let u: f64 = rng.random();
            if u >= 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .unwrap_err();
        assert_eq!(err, Error::NonFinite { index: 0 });
    }
}
