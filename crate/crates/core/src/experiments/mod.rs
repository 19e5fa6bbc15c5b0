//! Experiment drivers: convergence-rate sweeps, bound comparisons and oracle checks.
//!
//! Every driver maps an [`ExperimentPlan`] to a table of [`ResultRow`]s plus a
//! [`Summary`] of fitted log-log slopes and named pass/fail checks. Rows are
//! computed in parallel but collected in grid order, and Monte Carlo cells draw
//! from child seeds indexed by grid position, so output depends only on the plan.

mod oracles;
mod paramagnet_runs;
mod spherical_runs;

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paramagnet::nearest_admissible;
use crate::spherical::{EnergyEnsemble, SphericalModel, MIN_SITES};

/// Gaps below this are treated as numerically zero by the rate fit.
pub const GAP_FLOOR: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    ParamagnetConverge,
    BoundCompare,
    SphericalMagConverge,
    SphericalEnergyConverge,
    GcDirectCoupling,
    DominanceDecay,
    LaplaceCheck,
    OtOracleCheck,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        Self::ParamagnetConverge,
        Self::BoundCompare,
        Self::SphericalMagConverge,
        Self::SphericalEnergyConverge,
        Self::GcDirectCoupling,
        Self::DominanceDecay,
        Self::LaplaceCheck,
        Self::OtOracleCheck,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ParamagnetConverge => "paramagnet_converge",
            Self::BoundCompare => "bound_compare",
            Self::SphericalMagConverge => "spherical_mag_converge",
            Self::SphericalEnergyConverge => "spherical_energy_converge",
            Self::GcDirectCoupling => "gc_direct_coupling",
            Self::DominanceDecay => "dominance_decay",
            Self::LaplaceCheck => "laplace_check",
            Self::OtOracleCheck => "ot_oracle_check",
        }
    }

    /// Spelling used for CLI subcommands.
    pub fn kebab(&self) -> String {
        self.as_str().replace('_', "-")
    }

    /// Columns appended after the common ones, in order.
    pub fn extra_columns(&self) -> &'static [&'static str] {
        match self {
            Self::ParamagnetConverge => &["m_used", "mu"],
            Self::BoundCompare => &["m_used", "mu", "ratio", "ratio_over_sqrt_log_n"],
            Self::SphericalMagConverge => &["mu", "sigma", "mismatch", "w2", "bound_free_energy"],
            Self::SphericalEnergyConverge => &["beta", "sigma", "mismatch", "w2", "bound_free_energy"],
            Self::GcDirectCoupling => &["exact_cost", "corrected_bound", "within_3se"],
            Self::DominanceDecay => &[
                "branch_case",
                "m_plus",
                "m_minus",
                "weight_sub",
                "log_ratio_weights",
                "log_ratio_closed_form",
            ],
            Self::LaplaceCheck => &["quadrature", "leading", "tolerance"],
            Self::OtOracleCheck => &["trial", "p", "wp"],
        }
    }

    fn is_spherical(&self) -> bool {
        matches!(
            self,
            Self::SphericalMagConverge | Self::SphericalEnergyConverge | Self::GcDirectCoupling | Self::DominanceDecay
        )
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == key)
            .ok_or_else(|| Error::domain(format!("unknown experiment id '{s}'")))
    }
}

/// Test observables shared by the drivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    /// `φ₁`.
    Phi1,
    /// `φ₁φ₂`.
    Phi1phi2,
    /// `min(φ₁, φ₂)`; spin systems only.
    Min2,
    /// `clamp(φ₁, −c, c)`.
    Clip,
    /// `min(|φ₁|, c)`.
    Absclip,
}

impl ObservableKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Phi1 => "phi1",
            Self::Phi1phi2 => "phi1phi2",
            Self::Min2 => "min2",
            Self::Clip => "clip",
            Self::Absclip => "absclip",
        }
    }
}

impl FromStr for ObservableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::Phi1, Self::Phi1phi2, Self::Min2, Self::Clip, Self::Absclip]
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::domain(format!("unknown observable '{s}'")))
    }
}

/// Fully resolved experiment parameters. Fields an experiment does not use are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub experiment_id: ExperimentId,
    /// System sizes; `λ` values for `laplace_check`.
    pub n_grid: Vec<u64>,
    pub m: f64,
    /// Field or chemical potential; matched to `m` when absent.
    pub mu: Option<f64>,
    pub rho: f64,
    pub j: f64,
    pub h: f64,
    pub epsilon: f64,
    /// Inverse temperature; matched to `epsilon` when absent.
    pub beta: Option<f64>,
    pub clip: f64,
    /// Monte Carlo draws per cell.
    pub samples: u64,
    pub trials: u64,
    pub observables: Vec<ObservableKind>,
    pub seed: u64,
}

impl ExperimentPlan {
    pub fn defaults(id: ExperimentId) -> Self {
        use ObservableKind::*;
        let base = Self {
            experiment_id: id,
            n_grid: vec![100, 1000, 10_000],
            m: 0.5,
            mu: None,
            rho: 1.0,
            j: 1.0,
            h: 0.0,
            epsilon: -0.25,
            beta: None,
            clip: 0.5,
            samples: 20_000,
            trials: 100,
            observables: vec![Phi1, Phi1phi2, Clip, Absclip],
            seed: 1,
        };
        match id {
            ExperimentId::ParamagnetConverge => Self {
                n_grid: vec![100, 1000, 10_000, 100_000],
                observables: vec![Phi1, Phi1phi2, Min2],
                ..base
            },
            ExperimentId::BoundCompare => Self {
                n_grid: vec![100, 1000, 10_000, 100_000, 1_000_000],
                observables: vec![Phi1phi2],
                ..base
            },
            ExperimentId::SphericalMagConverge => base,
            ExperimentId::SphericalEnergyConverge => Self {
                observables: vec![Phi1phi2, Absclip],
                ..base
            },
            ExperimentId::GcDirectCoupling => Self {
                beta: Some(0.25),
                observables: vec![Phi1phi2, Absclip],
                ..base
            },
            ExperimentId::DominanceDecay => Self {
                n_grid: vec![50, 100, 200],
                h: 1.0,
                observables: vec![Phi1],
                ..base
            },
            ExperimentId::LaplaceCheck => Self {
                n_grid: vec![10, 100, 1000, 10_000],
                observables: vec![],
                ..base
            },
            ExperimentId::OtOracleCheck => Self {
                n_grid: vec![4, 6, 8],
                observables: vec![],
                ..base
            },
        }
    }

    /// Precondition diagnostics; empty iff [`run`] passes its precondition checks.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut diag = |field: &str, message: String| out.push(Diagnostic::new(field, message));
        let id = self.experiment_id;
        if self.n_grid.is_empty() {
            diag("n_grid", "N grid is empty".into());
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            diag("n_grid", "N grid must be strictly increasing".into());
        }
        if self.n_grid.contains(&0) {
            diag("n_grid", "N values must be positive".into());
        }
        if id.is_spherical() && self.n_grid.iter().any(|&n| n < MIN_SITES) {
            diag("n_grid", format!("N >= {MIN_SITES} required for the spherical model"));
        }
        for (name, v) in [
            ("m", self.m),
            ("rho", self.rho),
            ("j", self.j),
            ("h", self.h),
            ("epsilon", self.epsilon),
            ("clip", self.clip),
        ] {
            if !v.is_finite() {
                diag(name, format!("{name} = {v} is not finite"));
            }
        }
        for (name, v) in [("mu", self.mu), ("beta", self.beta)] {
            if matches!(v, Some(x) if !x.is_finite()) {
                diag(name, format!("{name} is not finite"));
            }
        }
        let needs_obs = matches!(
            id,
            ExperimentId::ParamagnetConverge
                | ExperimentId::BoundCompare
                | ExperimentId::SphericalMagConverge
                | ExperimentId::SphericalEnergyConverge
                | ExperimentId::GcDirectCoupling
                | ExperimentId::DominanceDecay
        );
        if needs_obs && self.observables.is_empty() {
            diag("observables", "at least one observable is required".into());
        }
        if self
            .observables
            .iter()
            .any(|o| matches!(o, ObservableKind::Clip | ObservableKind::Absclip))
            && !(self.clip > 0.0)
        {
            diag("clip", format!("clip = {} must be > 0", self.clip));
        }
        if id.is_spherical() {
            if self.observables.contains(&ObservableKind::Min2) {
                diag("observables", "min2 is only available for the paramagnet".into());
            }
            if !(self.rho > 0.0) {
                diag("rho", format!("rho = {} must be > 0", self.rho));
            }
            if !(self.j > 0.0) {
                diag("j", format!("J = {} must be > 0", self.j));
            }
        }
        match id {
            ExperimentId::ParamagnetConverge | ExperimentId::BoundCompare => {
                if !(self.m > -1.0 && self.m < 1.0) {
                    diag("m", format!("m = {} outside (-1,1)", self.m));
                }
                if self.n_grid.iter().any(|&n| n < 3) {
                    diag("n_grid", "N >= 3 required for two-site observables".into());
                }
                if self.m > -1.0 && self.m < 1.0 {
                    if let Some(&n) = self
                        .n_grid
                        .iter()
                        .find(|&&n| n > 0 && nearest_admissible(self.m, n).abs() == 1.0)
                    {
                        diag(
                            "m",
                            format!(
                                "m = {} snaps to {} at N = {n}, a single configuration",
                                self.m,
                                nearest_admissible(self.m, n)
                            ),
                        );
                    }
                }
            }
            ExperimentId::SphericalMagConverge | ExperimentId::GcDirectCoupling => {
                if self.rho > 0.0 && !(self.m * self.m < self.rho) {
                    diag("m", format!("m = {} violates m^2 < rho = {}", self.m, self.rho));
                }
                if id == ExperimentId::GcDirectCoupling {
                    if self.samples < 2 {
                        diag("samples", "at least 2 samples are required".into());
                    }
                    let mu = 0.5 / self.rho;
                    if let Some(beta) = self.beta {
                        if !(beta < 2.0 * mu / self.j) {
                            diag(
                                "beta",
                                format!(
                                    "beta = {beta} must be < 2 mu / J = {} with mu = 1/(2 rho)",
                                    2.0 * mu / self.j
                                ),
                            );
                        }
                    }
                }
            }
            ExperimentId::SphericalEnergyConverge | ExperimentId::DominanceDecay => {
                if id == ExperimentId::SphericalEnergyConverge && self.h != 0.0 {
                    diag(
                        "h",
                        format!("h = {}: canonical energy quadrature supports h = 0 only", self.h),
                    );
                }
                if self.rho > 0.0 && self.j > 0.0 {
                    match SphericalModel::new(MIN_SITES, self.j, self.h, self.rho)
                        .and_then(|md| EnergyEnsemble::new(md, self.epsilon))
                    {
                        Ok(_) => {}
                        Err(e) => diag("epsilon", e.to_string()),
                    }
                }
                if id == ExperimentId::SphericalEnergyConverge && self.epsilon == 0.0 {
                    diag("epsilon", "epsilon = 0 has no finite energy-coupling constant".into());
                }
            }
            ExperimentId::LaplaceCheck => {}
            ExperimentId::OtOracleCheck => {
                if self.n_grid.iter().any(|&n| !(2..=8).contains(&n)) {
                    diag("n_grid", "ot_oracle_check requires 2 <= N <= 8".into());
                }
                if self.trials == 0 {
                    diag("trials", "at least one trial is required".into());
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn new(field: &str, message: String) -> Self {
        Self {
            field: field.into(),
            message,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub n: u64,
    pub observable: String,
    pub gap: f64,
    pub bound_coupling: Option<f64>,
    pub bound_relent: Option<f64>,
    pub se: f64,
    pub runtime_ms: f64,
    pub extras: Vec<(&'static str, f64)>,
}

impl ResultRow {
    pub fn new(n: u64, observable: impl Into<String>, gap: f64) -> Self {
        Self {
            n,
            observable: observable.into(),
            gap,
            bound_coupling: None,
            bound_relent: None,
            se: 0.0,
            runtime_ms: 0.0,
            extras: Vec::new(),
        }
    }

    pub fn extra(&self, name: &str) -> Option<f64> {
        self.extras.iter().find(|(k, _)| *k == name).map(|&(_, v)| v)
    }

    /// Whether the coupling bound covers the gap, allowing `k` standard errors.
    pub fn dominated(&self, k: f64) -> bool {
        self.bound_coupling.is_some_and(|b| self.gap <= b + k * self.se)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub rows_used: usize,
}

/// OLS fit of `ln gap` on `ln N`, skipping rows below [`GAP_FLOOR`] or below 3 SE.
pub fn fit_rate(rows: &[ResultRow]) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.gap.is_finite() && r.gap >= GAP_FLOOR && r.gap >= 3.0 * r.se)
        .map(|r| ((r.n as f64).ln(), r.gap.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::TooFewRows(pts.len()));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::TooFewRows(1));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(RateFit {
        slope,
        slope_stderr: (ssr / (k - 2.0) / sxx).sqrt(),
        intercept,
        rows_used: pts.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRecord {
    pub observable: String,
    pub fit: Option<RateFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub experiment_id: ExperimentId,
    pub params: ExperimentPlan,
    /// Slope of the first fitted observable.
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub fits: Vec<FitRecord>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl Summary {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn fit(&self, observable: &str) -> Option<&FitRecord> {
        self.fits.iter().find(|f| f.observable == observable)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Summary,
}

/// Distinct observable names in first-appearance order.
fn observable_names(rows: &[ResultRow]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for r in rows {
        if !names.contains(&r.observable) {
            names.push(r.observable.clone());
        }
    }
    names
}

fn fits_by_observable(rows: &[ResultRow], names: &[String]) -> Vec<FitRecord> {
    names
        .iter()
        .map(|name| {
            let subset: Vec<ResultRow> = rows.iter().filter(|r| &r.observable == name).cloned().collect();
            match fit_rate(&subset) {
                Ok(fit) => FitRecord {
                    observable: name.clone(),
                    fit: Some(fit),
                    error: None,
                },
                Err(e) => FitRecord {
                    observable: name.clone(),
                    fit: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

fn slope_window_check(name: &str, fits: &[FitRecord], target: f64, half_width: f64) -> Check {
    let bad: Vec<String> = fits
        .iter()
        .filter(|f| !f.fit.is_some_and(|r| (r.slope - target).abs() <= half_width))
        .map(|f| match (&f.fit, &f.error) {
            (Some(r), _) => format!("{}: slope {:.3}", f.observable, r.slope),
            (None, Some(e)) => format!("{}: {e}", f.observable),
            (None, None) => f.observable.clone(),
        })
        .collect();
    let detail = if bad.is_empty() {
        format!("all slopes within {target} ± {half_width}")
    } else {
        format!("outside {target} ± {half_width}: {}", bad.join("; "))
    };
    Check::new(name, bad.is_empty(), detail)
}

fn dominance_check(name: &str, rows: &[ResultRow], k: f64) -> Check {
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| !r.dominated(k))
        .map(|r| {
            format!(
                "N={} {}: gap {:.3e} bound {:?}",
                r.n, r.observable, r.gap, r.bound_coupling
            )
        })
        .collect();
    Check::new(
        name,
        bad.is_empty(),
        if bad.is_empty() {
            "all rows dominated".into()
        } else {
            bad.join("; ")
        },
    )
}

/// Times `f` and stamps the elapsed milliseconds on every returned row.
fn timed(f: impl FnOnce() -> Result<Vec<ResultRow>>) -> Result<Vec<ResultRow>> {
    let start = Instant::now();
    let mut rows = f()?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    rows.iter_mut().for_each(|r| r.runtime_ms = ms);
    Ok(rows)
}

/// Runs a plan after validating it.
pub fn run(plan: &ExperimentPlan) -> Result<ExperimentOutput> {
    let diags = plan.validate();
    if !diags.is_empty() {
        let msg = diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ");
        return Err(Error::Domain(msg).context(format!("experiment {}", plan.experiment_id)));
    }
    let (rows, checks, fit_rows) = match plan.experiment_id {
        ExperimentId::ParamagnetConverge => paramagnet_runs::converge(plan)?,
        ExperimentId::BoundCompare => paramagnet_runs::bound_compare(plan)?,
        ExperimentId::SphericalMagConverge => spherical_runs::mag_converge(plan)?,
        ExperimentId::SphericalEnergyConverge => spherical_runs::energy_converge(plan)?,
        ExperimentId::GcDirectCoupling => spherical_runs::gc_direct_coupling(plan)?,
        ExperimentId::DominanceDecay => spherical_runs::dominance_decay(plan)?,
        ExperimentId::LaplaceCheck => oracles::laplace_check(plan)?,
        ExperimentId::OtOracleCheck => oracles::ot_oracle_check(plan)?,
    };
    let names = observable_names(&fit_rows);
    let fits = fits_by_observable(&fit_rows, &names);
    let first = fits.first().and_then(|f| f.fit);
    let pass = checks.iter().all(|c| c.pass);
    Ok(ExperimentOutput {
        rows,
        summary: Summary {
            experiment_id: plan.experiment_id,
            params: plan.clone(),
            slope: first.map(|f| f.slope),
            slope_stderr: first.map(|f| f.slope_stderr),
            fits,
            checks,
            pass,
        },
    })
}

/// Result of one driver: all rows, named checks, and the rows entering the rate fits.
type DriverOutput = (Vec<ResultRow>, Vec<Check>, Vec<ResultRow>);

fn format_value(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(x) if x.is_nan() => "NaN".into(),
        Some(x) => format!("{x:e}"),
    }
}

/// Writes the table as CSV with the common columns followed by the experiment's extras.
pub fn write_csv(path: &Path, id: ExperimentId, rows: &[ResultRow]) -> Result<()> {
    let io = |e: csv::Error| Error::Output(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header = vec![
        "N",
        "observable",
        "gap",
        "bound_coupling",
        "bound_relent",
        "se",
        "runtime_ms",
    ];
    header.extend(id.extra_columns());
    w.write_record(&header).map_err(io)?;
    for r in rows {
        let mut rec = vec![
            r.n.to_string(),
            r.observable.clone(),
            format_value(Some(r.gap)),
            format_value(r.bound_coupling),
            format_value(r.bound_relent),
            format_value(Some(r.se)),
            format!("{:.3}", r.runtime_ms),
        ];
        rec.extend(id.extra_columns().iter().map(|c| format_value(r.extra(c))));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Output(format!("{}: {e}", path.display())))
}

pub fn write_json(path: &Path, summary: &Summary) -> Result<()> {
    let text = serde_json::to_string_pretty(summary).map_err(|e| Error::Output(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::Output(format!("{}: {e}", path.display())))
}

/// Writes `<out>` as CSV and the summary next to it with a `.json` extension.
pub fn write_outputs(out: &Path, output: &ExperimentOutput) -> Result<()> {
    write_csv(out, output.summary.experiment_id, &output.rows)?;
    write_json(&out.with_extension("json"), &output.summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(f64) -> f64, ns: &[u64]) -> Vec<ResultRow> {
        ns.iter().map(|&n| ResultRow::new(n, "y", f(n as f64))).collect()
    }

    #[test]
    fn fit_exact_power_law() {
        let fit = fit_rate(&synthetic(|n| n.powf(-0.5), &[100, 1000, 10_000, 100_000])).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!(fit.slope_stderr < 1e-10);
    }

    #[test]
    fn fit_constant_and_log_corrected() {
        let fit = fit_rate(&synthetic(|_| 3.0, &[10, 100, 1000])).unwrap();
        assert!(fit.slope.abs() < 1e-12);
        let ns: Vec<u64> = (2..=6).map(|k| 10u64.pow(k)).collect();
        let fit = fit_rate(&synthetic(|n| n.powf(-0.5) * n.ln().sqrt(), &ns)).unwrap();
        assert!(fit.slope > -0.5 && fit.slope < -0.4, "{}", fit.slope);
    }

    #[test]
    fn fit_needs_three_usable_rows() {
        assert_eq!(fit_rate(&synthetic(|n| 1.0 / n, &[10, 100])), Err(Error::TooFewRows(2)));
        let mut rows = synthetic(|n| 1.0 / n, &[10, 100, 1000]);
        rows[2].se = 1.0;
        assert_eq!(fit_rate(&rows), Err(Error::TooFewRows(2)));
        rows[2].se = 0.0;
        rows[1].gap = 1e-13;
        assert_eq!(fit_rate(&rows), Err(Error::TooFewRows(2)));
    }

    #[test]
    fn ids_round_trip() {
        for id in ExperimentId::ALL {
            assert_eq!(id.kebab().parse::<ExperimentId>().unwrap(), id);
            assert_eq!(id.as_str().parse::<ExperimentId>().unwrap(), id);
            assert!(ExperimentPlan::defaults(id).validate().is_empty(), "{id}");
        }
        assert!("nope".parse::<ExperimentId>().is_err());
    }

    #[test]
    fn validation_diagnostics() {
        let mut plan = ExperimentPlan::defaults(ExperimentId::ParamagnetConverge);
        plan.m = 2.0;
        assert!(plan
            .validate()
            .iter()
            .any(|d| d.message.contains("m = 2 outside (-1,1)")));
        let mut plan = ExperimentPlan::defaults(ExperimentId::SphericalEnergyConverge);
        plan.epsilon = -0.5;
        assert!(plan
            .validate()
            .iter()
            .any(|d| d.field == "epsilon" && d.message.contains("(-0.5, 0]")));
        let mut plan = ExperimentPlan::defaults(ExperimentId::SphericalMagConverge);
        plan.n_grid = vec![4, 10];
        assert!(plan.validate().iter().any(|d| d.message.contains("N >= 5 required")));
        plan.n_grid = vec![10, 10];
        assert!(plan
            .validate()
            .iter()
            .any(|d| d.message.contains("strictly increasing")));
    }

    #[test]
    fn csv_layout() {
        let dir = std::env::temp_dir().join(format!("ensemble-csv-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.csv");
        let mut row = ResultRow::new(10, "phi1", 0.25);
        row.bound_relent = Some(f64::NAN);
        row.extras.push(("m_used", 0.5));
        write_csv(&path, ExperimentId::ParamagnetConverge, &[row]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "N,observable,gap,bound_coupling,bound_relent,se,runtime_ms,m_used,mu"
        );
        assert_eq!(lines.next().unwrap(), "10,phi1,2.5e-1,,NaN,0e0,0.000,5e-1,");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
