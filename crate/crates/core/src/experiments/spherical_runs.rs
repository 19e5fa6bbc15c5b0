use rayon::prelude::*;

use super::{
    dominance_check, slope_window_check, timed, Check, DriverOutput, ExperimentPlan, FitRecord, ObservableKind,
    ResultRow,
};
use crate::coupling::{free_energy_bound, lipschitz_error_bound, moment_error_bound};
use crate::error::Result;
use crate::quad::{integrate, QuadOptions};
use crate::seeding::sub_seed;
use crate::spherical::{
    direct_coupling_cost_gc_mc, direct_coupling_cost_gc_mc_energy, direct_coupling_expected_cost,
    direct_coupling_upper, dominance_bound, energy_cost_lipschitz, mag_cost_lipschitz, AuxCanonical, BranchCase,
    CanonicalEnergy, EnergyEnsemble, EnergyMethod, MagnetizationEnsemble, SphericalModel, SphericalObservable,
};

fn spherical_observable(kind: ObservableKind, clip: f64) -> Result<SphericalObservable> {
    match kind {
        ObservableKind::Phi1 => SphericalObservable::moment(vec![0]),
        ObservableKind::Phi1phi2 => SphericalObservable::moment(vec![0, 1]),
        ObservableKind::Clip => Ok(SphericalObservable::clipped(clip)),
        ObservableKind::Absclip => Ok(SphericalObservable::abs_clipped(clip)),
        ObservableKind::Min2 => unreachable!("rejected by validate"),
    }
}

/// Observable factor of the coupling bound: `n_J M^{n_J − 1}` for monomials, 1 for 1-Lipschitz functions.
fn observable_constant(obs: &SphericalObservable, rho: f64) -> f64 {
    match obs {
        SphericalObservable::Moment(j) => j.n_j() as f64 * rho.sqrt().powi(j.n_j() as i32 - 1),
        SphericalObservable::SingleSite { .. } => 1.0,
    }
}

/// Coupling bound at `p = 2`. Every ensemble involved has `⟨φᵢ²⟩ = ρ`, so `M = √ρ`.
fn coupling_bound(obs: &SphericalObservable, n: u64, w2: f64, rho: f64) -> Result<f64> {
    match obs {
        SphericalObservable::Moment(j) => moment_error_bound(j, 2.0, f64::INFINITY, rho.sqrt(), w2, n),
        SphericalObservable::SingleSite { .. } => lipschitz_error_bound(1, n, 2.0, w2),
    }
}

/// Radial shell-to-shell cost, extended continuously to `m′² ≥ ρ`.
fn shell_cost(m: f64, m_prime: f64, rho: f64) -> f64 {
    let radial = (rho - m * m).max(0.0).sqrt() - (rho - m_prime * m_prime).max(0.0).sqrt();
    ((m - m_prime).powi(2) + radial.powi(2)).sqrt()
}

fn collect_cells(n_grid: &[u64], cell: impl Fn(usize, u64) -> Result<Vec<ResultRow>> + Sync) -> Result<Vec<ResultRow>> {
    let cells: Vec<Result<Vec<ResultRow>>> = n_grid
        .par_iter()
        .enumerate()
        .map(|(i, &n)| timed(|| cell(i, n)).map_err(|e| e.context(format!("N = {n}"))))
        .collect();
    let mut rows = Vec::new();
    for c in cells {
        rows.extend(c?);
    }
    Ok(rows)
}

fn fits_for(rows: &[ResultRow]) -> Vec<FitRecord> {
    super::fits_by_observable(rows, &super::observable_names(rows))
}

/// Every fit exists and decays at least as fast as `N^{max_slope}`.
fn max_slope_check(name: &str, fits: &[FitRecord], max_slope: f64) -> Check {
    let bad: Vec<String> = fits
        .iter()
        .filter(|f| !f.fit.is_some_and(|r| r.slope <= max_slope))
        .map(|f| match (&f.fit, &f.error) {
            (Some(r), _) => format!("{}: slope {:.3}", f.observable, r.slope),
            (None, e) => format!("{}: {}", f.observable, e.as_deref().unwrap_or("no fit")),
        })
        .collect();
    let detail = if bad.is_empty() {
        format!("all slopes <= {max_slope}")
    } else {
        bad.join("; ")
    };
    Check::new(name, bad.is_empty(), detail)
}

pub(super) fn mag_converge(plan: &ExperimentPlan) -> Result<DriverOutput> {
    let opts = QuadOptions::default();
    let (m, rho) = (plan.m, plan.rho);
    let mu = plan.mu.unwrap_or_else(|| AuxCanonical::matched_mu(m, rho));
    let observables: Vec<(ObservableKind, SphericalObservable)> = plan
        .observables
        .iter()
        .map(|&k| spherical_observable(k, plan.clip).map(|o| (k, o)))
        .collect::<Result<_>>()?;
    let rows = collect_cells(&plan.n_grid, |_, n| {
        let model = SphericalModel::new(n, plan.j, plan.h, rho)?;
        let shell = MagnetizationEnsemble::new(model, m)?;
        let canonical = AuxCanonical::new(model, mu, opts)?;
        let stats = canonical.magnetization()?;
        let mismatch = (m - stats.mean).abs();
        let w2 = canonical
            .average_over_m(|mp| Ok(shell_cost(m, mp, rho).powi(2)))?
            .sqrt();
        observables
            .iter()
            .map(|(kind, obs)| {
                let gap = (obs.mc_expectation(&shell, opts)? - canonical.expectation(obs)?).abs();
                let c = observable_constant(obs, rho) * mag_cost_lipschitz(m, rho);
                let mut row = ResultRow::new(n, kind.as_str(), gap);
                row.bound_coupling = Some(coupling_bound(obs, n, w2, rho)?);
                row.extras = vec![
                    ("mu", mu),
                    ("sigma", stats.sd),
                    ("mismatch", mismatch),
                    ("w2", w2),
                    (
                        "bound_free_energy",
                        free_energy_bound(c, obs.size(), n, 2.0, stats.sd, mismatch)?,
                    ),
                ];
                Ok(row)
            })
            .collect()
    })?;
    let fits = fits_for(&rows);
    let checks = vec![
        dominance_check("dominated", &rows, 0.0),
        max_slope_check("slope", &fits, -0.4),
    ];
    Ok((rows.clone(), checks, rows))
}

pub(super) fn energy_converge(plan: &ExperimentPlan) -> Result<DriverOutput> {
    let opts = QuadOptions::default();
    let (eps, rho, j) = (plan.epsilon, plan.rho, plan.j);
    let beta = plan.beta.unwrap_or_else(|| CanonicalEnergy::matched_beta(eps, rho, j));
    let m_of = |e: f64| (-2.0 * e / j).max(0.0).sqrt();
    let observables: Vec<(ObservableKind, SphericalObservable)> = plan
        .observables
        .iter()
        .map(|&k| spherical_observable(k, plan.clip).map(|o| (k, o)))
        .collect::<Result<_>>()?;
    let rows = collect_cells(&plan.n_grid, |_, n| {
        let model = SphericalModel::new(n, j, 0.0, rho)?;
        let shell = EnergyEnsemble::new(model, eps)?;
        let canonical = CanonicalEnergy::new(model, beta, opts)?;
        let stats = canonical.energy()?;
        let mismatch = (eps - stats.mean).abs();
        // Branch-preserving mixture coupling: ±m couples to ±m′.
        let w2 = canonical
            .average_over_eps(|e| Ok(shell_cost(m_of(eps), m_of(e), rho).powi(2)))?
            .sqrt();
        observables
            .iter()
            .map(|(kind, obs)| {
                let mc = shell.expectation(obs, EnergyMethod::MarginalQuadrature(opts))?.value;
                let gap = (mc - canonical.expectation(obs)?).abs();
                let c = observable_constant(obs, rho) * energy_cost_lipschitz(eps, rho, j);
                let mut row = ResultRow::new(n, kind.as_str(), gap);
                row.bound_coupling = Some(coupling_bound(obs, n, w2, rho)?);
                row.extras = vec![
                    ("beta", beta),
                    ("sigma", stats.sd),
                    ("mismatch", mismatch),
                    ("w2", w2),
                    (
                        "bound_free_energy",
                        free_energy_bound(c, obs.size(), n, 2.0, stats.sd, mismatch)?,
                    ),
                ];
                Ok(row)
            })
            .collect()
    })?;
    let fits = fits_for(&rows);
    let checks = vec![
        dominance_check("dominated", &rows, 0.0),
        max_slope_check("slope", &fits, -0.4),
    ];
    Ok((rows.clone(), checks, rows))
}

/// `E[X^k]` for `X ~ N(mean, var)`.
fn gaussian_raw_moment(k: u32, mean: f64, var: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, mean);
    if k == 0 {
        return prev;
    }
    for i in 2..=k {
        let next = mean * cur + (i - 1) as f64 * var * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `⟨f⟩` under the i.i.d. product law `N(mean, var)^{⊗N}`.
fn product_gaussian_expectation(obs: &SphericalObservable, mean: f64, var: f64, opts: QuadOptions) -> Result<f64> {
    match obs {
        SphericalObservable::Moment(j) => Ok(j
            .powers()
            .into_iter()
            .map(|k| gaussian_raw_moment(k, mean, var))
            .product()),
        SphericalObservable::SingleSite { f, kinks, .. } => {
            let sd = var.sqrt();
            let (lo, hi) = (mean - 12.0 * sd, mean + 12.0 * sd);
            let mut points = vec![lo];
            points.extend(kinks.iter().copied().filter(|&k| k > lo && k < hi));
            points.push(hi);
            points.sort_by(f64::total_cmp);
            let norm = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
            let q = integrate(
                |x| f(x) * norm * (-0.5 * ((x - mean) / sd).powi(2)).exp(),
                &points,
                opts,
            )?;
            Ok(q.value)
        }
    }
}

pub(super) fn gc_direct_coupling(plan: &ExperimentPlan) -> Result<DriverOutput> {
    let opts = QuadOptions::default();
    let (m, rho, j) = (plan.m, plan.rho, plan.j);
    let mu_energy = 0.5 / rho;
    let observables: Vec<(ObservableKind, SphericalObservable)> = plan
        .observables
        .iter()
        .map(|&k| spherical_observable(k, plan.clip).map(|o| (k, o)))
        .collect::<Result<_>>()?;
    let rows = collect_cells(&plan.n_grid, |i, n| {
        let cell_seed = sub_seed(plan.seed, i as u64);
        let report = direct_coupling_cost_gc_mc(m, rho, n, sub_seed(cell_seed, 0), plan.samples)?;
        let exact = direct_coupling_expected_cost(m, rho, n);
        let mut cost = ResultRow::new(n, "cost2", report.mean_cost);
        cost.bound_coupling = report.bound;
        cost.se = report.mean_cost_se;
        cost.extras = vec![
            ("exact_cost", exact),
            ("corrected_bound", direct_coupling_upper(m, rho, n)),
            (
                "within_3se",
                f64::from(u8::from(report.within_bound(3.0).unwrap_or(false))),
            ),
        ];
        let mut rows = vec![cost];
        if let Some(beta) = plan.beta {
            let report =
                direct_coupling_cost_gc_mc_energy(beta, mu_energy, j, n, sub_seed(cell_seed, 1), plan.samples)?;
            let mut row = ResultRow::new(n, "cost2_energy", report.mean_cost);
            row.bound_coupling = report.bound;
            row.se = report.mean_cost_se;
            row.extras = vec![(
                "within_3se",
                f64::from(u8::from(report.within_bound(3.0).unwrap_or(false))),
            )];
            rows.push(row);
        }
        // Matched product Gaussian against the fixed-m shell, bounded through the exact direct-map cost.
        let model = SphericalModel::new(n, j, plan.h, rho)?;
        let shell = MagnetizationEnsemble::new(model, m)?;
        let w2 = exact.sqrt();
        for (kind, obs) in &observables {
            let gc = product_gaussian_expectation(obs, m, rho - m * m, opts)?;
            let gap = (obs.mc_expectation(&shell, opts)? - gc).abs();
            let mut row = ResultRow::new(n, format!("gc_{}", kind.as_str()), gap);
            row.bound_coupling = Some(coupling_bound(obs, n, w2, rho)?);
            row.extras = vec![("exact_cost", exact)];
            rows.push(row);
        }
        Ok(rows)
    })?;
    let cost_rows: Vec<ResultRow> = rows.iter().filter(|r| r.observable == "cost2").cloned().collect();
    let mc_rows: Vec<ResultRow> = rows
        .iter()
        .filter(|r| r.observable.starts_with("cost2"))
        .cloned()
        .collect();
    let exact_rows: Vec<ResultRow> = rows
        .iter()
        .filter(|r| r.observable.starts_with("gc_"))
        .cloned()
        .collect();
    let checks = vec![
        dominance_check("within_bound_3se", &mc_rows, 3.0),
        slope_window_check("slope", &fits_for(&cost_rows), -1.0, 0.1),
        dominance_check("dominated", &exact_rows, 0.0),
    ];
    Ok((rows, checks, cost_rows))
}

/// Bound on `|⟨f⟩|` over every fixed-magnetization shell.
fn sup_bound(kind: ObservableKind, rho: f64, clip: f64) -> f64 {
    match kind {
        ObservableKind::Phi1 => rho.sqrt(),
        ObservableKind::Phi1phi2 => rho,
        ObservableKind::Clip | ObservableKind::Absclip | ObservableKind::Min2 => clip,
    }
}

pub(super) fn dominance_decay(plan: &ExperimentPlan) -> Result<DriverOutput> {
    let opts = QuadOptions::default();
    let observables: Vec<(ObservableKind, SphericalObservable)> = plan
        .observables
        .iter()
        .map(|&k| spherical_observable(k, plan.clip).map(|o| (k, o)))
        .collect::<Result<_>>()?;
    let rows = collect_cells(&plan.n_grid, |_, n| {
        let model = SphericalModel::new(n, plan.j, plan.h, plan.rho)?;
        let ens = EnergyEnsemble::new(model, plan.epsilon)?;
        let (dom, sub) = (ens.dominant_m(), ens.subdominant_m());
        let log_ratio = ens.weight_log_ratio();
        let w = ens.weights();
        let weight_sub = if dom == ens.m_plus { w.minus } else { w.plus };
        let dom_shell = MagnetizationEnsemble::new(model, dom)?;
        let sub_shell = (ens.branch_case == BranchCase::TwoBranch)
            .then(|| MagnetizationEnsemble::new(model, sub))
            .transpose()?;
        observables
            .iter()
            .map(|(kind, obs)| {
                let at_dom = obs.mc_expectation(&dom_shell, opts)?;
                // ⟨f⟩_ε − ⟨f⟩_dom = w_sub (⟨f⟩_sub − ⟨f⟩_dom), evaluated without cancellation.
                let gap = match &sub_shell {
                    Some(s) => weight_sub * (obs.mc_expectation(s, opts)? - at_dom).abs(),
                    None => 0.0,
                };
                let mut row = ResultRow::new(n, kind.as_str(), gap);
                row.bound_coupling = Some(dominance_bound(sup_bound(*kind, plan.rho, plan.clip), log_ratio));
                row.extras = vec![
                    ("branch_case", branch_code(ens.branch_case)),
                    ("m_plus", ens.m_plus),
                    ("m_minus", ens.m_minus),
                    ("weight_sub", weight_sub),
                    ("log_ratio_weights", log_ratio),
                    ("log_ratio_closed_form", ens.closed_form_log_ratio()),
                ];
                Ok(row)
            })
            .collect()
    })?;
    let mismatches: Vec<String> = rows
        .iter()
        .filter_map(|r| {
            let (a, b) = (r.extra("log_ratio_weights")?, r.extra("log_ratio_closed_form")?);
            let ok = (a - b).abs() <= 1e-12 || (a == b);
            (!ok).then(|| format!("N={}: weights {a} vs closed form {b}", r.n))
        })
        .collect();
    let mut decay_detail = Vec::new();
    let mut decay_ok = true;
    for name in super::observable_names(&rows) {
        let gaps: Vec<f64> = rows.iter().filter(|r| r.observable == name).map(|r| r.gap).collect();
        for w in gaps.windows(2) {
            let factor = w[0] / w[1];
            decay_ok &= factor >= 10.0;
            decay_detail.push(format!("{name}: {factor:.3e}"));
        }
    }
    let branch = rows.first().and_then(|r| r.extra("branch_case")).unwrap_or(f64::NAN);
    let checks = vec![
        Check::new(
            "log_ratio_match",
            mismatches.is_empty(),
            if mismatches.is_empty() {
                "log ratios agree to 1e-12".into()
            } else {
                mismatches.join("; ")
            },
        ),
        Check::new(
            "decay_factor",
            decay_ok,
            format!(
                "branch_case {branch}; successive gap ratios {}",
                decay_detail.join(", ")
            ),
        ),
        dominance_check("dominated", &rows, 0.0),
    ];
    Ok((rows.clone(), checks, rows))
}

/// CSV code: 0 two-branch, 1 single-branch, 2 degenerate top.
fn branch_code(case: BranchCase) -> f64 {
    match case {
        BranchCase::TwoBranch => 0.0,
        BranchCase::SingleBranch => 1.0,
        BranchCase::DegenerateTop => 2.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{run, ExperimentId};

    #[test]
    fn gaussian_moments_by_recurrence() {
        assert_eq!(gaussian_raw_moment(0, 0.3, 2.0), 1.0);
        assert_eq!(gaussian_raw_moment(1, 0.3, 2.0), 0.3);
        assert!((gaussian_raw_moment(2, 0.3, 2.0) - 2.09).abs() < 1e-15);
        assert!((gaussian_raw_moment(4, 0.0, 1.0) - 3.0).abs() < 1e-15);
        assert!((gaussian_raw_moment(3, 1.0, 1.0) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_quadrature_matches_moment() {
        let obs = SphericalObservable::single_site("x", |x| x * x, vec![]);
        let v = product_gaussian_expectation(&obs, 0.5, 0.75, QuadOptions::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn shell_cost_extends_past_sphere() {
        assert!((shell_cost(0.0, 1.0, 1.0) - 2f64.sqrt()).abs() < 1e-15);
        assert!((shell_cost(0.5, 2.0, 1.0) - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn small_mag_run_is_dominated() {
        let plan = ExperimentPlan {
            n_grid: vec![20, 40, 80],
            ..ExperimentPlan::defaults(ExperimentId::SphericalMagConverge)
        };
        let out = run(&plan).unwrap();
        assert!(out.summary.check("dominated").unwrap().pass, "{:?}", out.summary.checks);
    }

    #[test]
    fn two_branch_dominance_decays() {
        let plan = ExperimentPlan {
            rho: 6.0,
            n_grid: vec![50, 100, 200],
            ..ExperimentPlan::defaults(ExperimentId::DominanceDecay)
        };
        let out = run(&plan).unwrap();
        assert!(out.summary.pass, "{:?}", out.summary.checks);
    }
}
