//! Adaptive Gauss–Kronrod quadrature (G10/K21) with global subdivision.
//!
//! The interval with the largest local error estimate is bisected until the
//! summed estimate meets `max(abs_tol, rel_tol·|I|)` or the subdivision budget
//! runs out. Callers pass known peaks and kinks as breakpoints.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_352,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_5,
    0.149_445_554_002_916_9,
];

/// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_36,
    0.295_524_224_714_752_87,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_subdivisions: 4000,
        }
    }
}

impl QuadOptions {
    pub fn rel(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = WGK[10] * fc;
    let mut kron_abs = WGK[10] * fc.abs();
    let mut gauss = 0.0;
    for (k, (&x, &w)) in XGK[..10].iter().zip(&WGK[..10]).enumerate() {
        let (lo, hi) = (f(center - half * x), f(center + half * x));
        let pair = lo + hi;
        kron += w * pair;
        kron_abs += w * (lo.abs() + hi.abs());
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    let value = kron * half;
    let raw = ((kron - gauss) * half).abs();
    // Floor the estimate at the rounding level of the panel sum.
    let error = raw.max(50.0 * f64::EPSILON * (kron_abs * half).abs());
    Panel { a, b, value, error }
}

/// Integrates `f` over `[points[0], points[last]]`, splitting at every interior point.
pub fn integrate<F: Fn(f64) -> f64>(f: F, points: &[f64], opts: QuadOptions) -> Result<Quadrature> {
    if points.len() < 2 {
        return Err(Error::domain("quadrature needs at least two points"));
    }
    if points.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::domain(
            "quadrature breakpoints must be non-decreasing and finite",
        ));
    }
    let mut heap: BinaryHeap<Panel> = points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| kronrod(&f, w[0], w[1]))
        .collect();
    let mut evaluations = 21 * heap.len();
    let mut splits = 0;
    loop {
        let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
        if !value.is_finite() {
            return Err(Error::Quadrature {
                estimate: value,
                achieved: f64::INFINITY,
                requested: opts.rel_tol,
            });
        }
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= target || heap.is_empty() {
            return Ok(Quadrature {
                value,
                abs_error: error,
                evaluations,
            });
        }
        if splits >= opts.max_subdivisions {
            return Err(Error::Quadrature {
                estimate: value,
                achieved: error,
                requested: target,
            });
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval at machine resolution; accept its contribution as is.
            heap.push(Panel { error: 0.0, ..worst });
            continue;
        }
        heap.push(kronrod(&f, worst.a, mid));
        heap.push(kronrod(&f, mid, worst.b));
        evaluations += 42;
        splits += 1;
    }
}

/// [`integrate`] for integrands that can fail; the first failure aborts the result.
pub fn integrate_fallible<F: Fn(f64) -> Result<f64>>(f: F, points: &[f64], opts: QuadOptions) -> Result<Quadrature> {
    let failure = std::cell::RefCell::new(None);
    let q = integrate(
        |x| match f(x) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        points,
        opts,
    );
    match failure.into_inner() {
        Some(e) => Err(e),
        None => q,
    }
}

/// Finds the effective support of a unimodal log-density around `peak`.
///
/// Returns the narrowest `[lo, hi] ⊆ [a, b]` outside of which `log_w` sits at
/// least `drop` below `log_w(peak)`, located by doubling steps then bisection.
pub fn effective_support<G: Fn(f64) -> f64>(log_w: G, peak: f64, a: f64, b: f64, scale: f64, drop: f64) -> (f64, f64) {
    let top = log_w(peak);
    let edge = |dir: f64, limit: f64| -> f64 {
        let mut inner = peak;
        let mut step = scale;
        loop {
            let probe = peak + dir * step;
            if (dir > 0.0 && probe >= limit) || (dir < 0.0 && probe <= limit) {
                if log_w(limit) >= top - drop {
                    return limit;
                }
                return bisect(&log_w, inner, limit, top - drop);
            }
            if log_w(probe) < top - drop {
                return bisect(&log_w, inner, probe, top - drop);
            }
            inner = probe;
            step *= 2.0;
        }
    };
    (edge(-1.0, a), edge(1.0, b))
}

fn bisect<G: Fn(f64) -> f64>(log_w: &G, mut inside: f64, mut outside: f64, level: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if log_w(mid) >= level {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    outside
}
