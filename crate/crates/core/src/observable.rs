//! Local observables: functions of a bounded set of site labels.

use std::fmt;
use std::sync::Arc;

use crate::error::{ensure, Result};

pub type Kernel = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Declared Lipschitz constant with respect to the `norm_p` norm on R^|I|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lipschitz {
    pub constant: f64,
    pub norm_p: f64,
}

/// A function `f ∘ P_I` of the sites in `I`, evaluated on the restricted point.
#[derive(Clone)]
pub struct LocalObservable {
    name: String,
    indices: Vec<usize>,
    kernel: Kernel,
    lipschitz: Option<Lipschitz>,
    sup_bound: Option<f64>,
}

impl fmt::Debug for LocalObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LocalObservable")
            .field("name", &self.name)
            .field("indices", &self.indices)
            .field("lipschitz", &self.lipschitz)
            .field("sup_bound", &self.sup_bound)
            .finish()
    }
}

impl LocalObservable {
    pub fn new(
        name: impl Into<String>,
        indices: Vec<usize>,
        kernel: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        ensure(!indices.is_empty(), || "observable needs at least one site".into())?;
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        ensure(sorted.windows(2).all(|w| w[0] != w[1]), || {
            format!("observable labels must be distinct, got {indices:?}")
        })?;
        Ok(Self {
            name: name.into(),
            indices,
            kernel: Arc::new(kernel),
            lipschitz: None,
            sup_bound: None,
        })
    }

    pub fn with_lipschitz(mut self, constant: f64, norm_p: f64) -> Self {
        self.lipschitz = Some(Lipschitz { constant, norm_p });
        self
    }

    pub fn with_sup_bound(mut self, bound: f64) -> Self {
        self.sup_bound = Some(bound);
        self
    }

    /// `φ_i`, 1-Lipschitz in every p-norm.
    pub fn site(i: usize) -> Self {
        Self::new(format!("phi{}", i + 1), vec![i], |x| x[0])
            .expect("single label")
            .with_lipschitz(1.0, 1.0)
    }

    /// `φ_i φ_j`.
    pub fn pair_product(i: usize, j: usize) -> Result<Self> {
        Self::new(format!("phi{}phi{}", i + 1, j + 1), vec![i, j], |x| x[0] * x[1])
    }

    /// `min(φ_i, φ_j)`: 1-Lipschitz in the sup norm, hence in every p-norm.
    pub fn pair_min(i: usize, j: usize) -> Result<Self> {
        Ok(Self::new(format!("min(phi{},phi{})", i + 1, j + 1), vec![i, j], |x| {
            x[0].min(x[1])
        })?
        .with_lipschitz(1.0, 1.0))
    }

    /// `clamp(φ_i, −c, c)`: bounded and 1-Lipschitz.
    pub fn clipped_site(i: usize, c: f64) -> Self {
        Self::new(format!("clip{c}(phi{})", i + 1), vec![i], move |x| x[0].clamp(-c, c))
            .expect("single label")
            .with_lipschitz(1.0, 1.0)
            .with_sup_bound(c)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn size(&self) -> usize {
        self.indices.len()
    }

    pub fn lipschitz(&self) -> Option<Lipschitz> {
        self.lipschitz
    }

    pub fn sup_bound(&self) -> Option<f64> {
        self.sup_bound
    }

    /// Evaluates `f` on an |I|-dimensional point.
    pub fn eval_point(&self, point: &[f64]) -> f64 {
        (self.kernel)(point)
    }

    /// Evaluates `f ∘ P_I` on a full configuration.
    pub fn eval_state(&self, state: &[f64]) -> f64 {
        let point: Vec<f64> = self.indices.iter().map(|&i| state[i]).collect();
        (self.kernel)(&point)
    }

    /// Largest observed `|f(x)−f(y)| / ‖x−y‖_p` over the given point pairs.
    pub fn empirical_lipschitz(&self, pairs: &[(Vec<f64>, Vec<f64>)], norm_p: f64) -> f64 {
        pairs
            .iter()
            .filter_map(|(x, y)| {
                let d = p_norm_diff(x, y, norm_p);
                (d > 0.0).then(|| (self.eval_point(x) - self.eval_point(y)).abs() / d)
            })
            .fold(0.0, f64::max)
    }
}

pub(crate) fn p_norm_diff(x: &[f64], y: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    }
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

/// A label sequence `J` with repetitions, denoting the monomial `x^J = Π x_{J_l}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MomentIndex {
    labels: Vec<usize>,
}

impl MomentIndex {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        ensure(!labels.is_empty(), || "moment index needs n_J >= 1".into())?;
        Ok(Self { labels })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_j(&self) -> usize {
        self.labels.len()
    }

    /// Distinct labels in order of first appearance.
    pub fn distinct(&self) -> Vec<usize> {
        let mut seen = Vec::new();
        for &l in &self.labels {
            if !seen.contains(&l) {
                seen.push(l);
            }
        }
        seen
    }

    /// Exponent of each distinct label, aligned with [`MomentIndex::distinct`].
    pub fn powers(&self) -> Vec<u32> {
        self.distinct()
            .iter()
            .map(|d| self.labels.iter().filter(|&&l| l == *d).count() as u32)
            .collect()
    }

    pub fn eval_state(&self, state: &[f64]) -> f64 {
        self.labels.iter().map(|&l| state[l]).product()
    }

    pub fn to_observable(&self) -> LocalObservable {
        let powers = self.powers();
        let name = format!("x^{:?}", self.labels.iter().map(|l| l + 1).collect::<Vec<_>>());
        LocalObservable::new(name, self.distinct(), move |x| {
            x.iter().zip(&powers).map(|(v, &k)| v.powi(k as i32)).product()
        })
        .expect("distinct labels")
    }
}
