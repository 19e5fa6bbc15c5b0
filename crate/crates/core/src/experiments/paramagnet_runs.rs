use rayon::prelude::*;

use super::{
    dominance_check, slope_window_check, timed, Check, DriverOutput, ExperimentPlan, ObservableKind, ResultRow,
};
use crate::error::{Error, Result};
use crate::observable::LocalObservable;
use crate::paramagnet::{
    admissible_m, c_local_expectation, coupling_bound, matched_mu, mc_local_expectation, nearest_admissible,
    pinsker_bound,
};

/// Spin-system version of each test observable, with its ℓ1 Lipschitz constant declared.
fn spin_observable(kind: ObservableKind, clip: f64) -> Result<LocalObservable> {
    Ok(match kind {
        ObservableKind::Phi1 => LocalObservable::site(0),
        // |x₁x₂ − y₁y₂| ≤ |x₁ − y₁| + |x₂ − y₂| on [−1, 1]².
        ObservableKind::Phi1phi2 => LocalObservable::pair_product(0, 1)?.with_lipschitz(1.0, 1.0),
        ObservableKind::Min2 => LocalObservable::pair_min(0, 1)?,
        ObservableKind::Clip => LocalObservable::clipped_site(0, clip),
        ObservableKind::Absclip => {
            LocalObservable::new(format!("absclip{clip}(phi1)"), vec![0], move |x| x[0].abs().min(clip))?
                .with_lipschitz(1.0, 1.0)
                .with_sup_bound(clip)
        }
    })
}

fn cell(plan: &ExperimentPlan, n: u64) -> Result<Vec<ResultRow>> {
    let m = admissible_m(nearest_admissible(plan.m, n), n)?;
    let mu = plan.mu.unwrap_or_else(|| matched_mu(m));
    plan.observables
        .iter()
        .map(|&kind| {
            let f = spin_observable(kind, plan.clip)?;
            let lip = f
                .lipschitz()
                .ok_or_else(|| Error::domain(format!("{} has no declared Lipschitz constant", f.name())))?;
            let gap = (mc_local_expectation(&f, m, n)? - c_local_expectation(&f, mu)?).abs();
            let mut row = ResultRow::new(n, kind.as_str(), gap);
            row.bound_coupling = Some(lip.constant * coupling_bound(f.size(), m, mu, n)?);
            row.bound_relent = Some(pinsker_bound(&f, m, mu, n)?);
            row.extras = vec![("m_used", m), ("mu", mu)];
            Ok(row)
        })
        .collect()
}

fn all_rows(plan: &ExperimentPlan) -> Result<Vec<ResultRow>> {
    let cells: Vec<Result<Vec<ResultRow>>> = plan
        .n_grid
        .par_iter()
        .map(|&n| timed(|| cell(plan, n)).map_err(|e| e.context(format!("N = {n}"))))
        .collect();
    let mut rows = Vec::new();
    for c in cells {
        rows.extend(c?);
    }
    Ok(rows)
}

pub(super) fn converge(plan: &ExperimentPlan) -> Result<DriverOutput> {
    let rows = all_rows(plan)?;
    let names = super::observable_names(&rows);
    let fits = super::fits_by_observable(&rows, &names);
    let checks = vec![
        dominance_check("dominated", &rows, 0.0),
        slope_window_check("slope", &fits, -0.5, 0.1),
    ];
    Ok((rows.clone(), checks, rows))
}

pub(super) fn bound_compare(plan: &ExperimentPlan) -> Result<DriverOutput> {
    let mut rows = all_rows(plan)?;
    for r in rows.iter_mut() {
        let ratio = r.bound_relent.unwrap_or(f64::NAN) / r.bound_coupling.unwrap_or(f64::NAN);
        r.extras.push(("ratio", ratio));
        r.extras
            .push(("ratio_over_sqrt_log_n", ratio / (r.n as f64).ln().sqrt()));
    }
    let first = &rows[0].observable;
    let ratios: Vec<f64> = rows
        .iter()
        .filter(|r| &r.observable == first)
        .map(|r| r.extra("ratio").unwrap_or(f64::NAN))
        .collect();
    let monotone = ratios.windows(2).all(|w| w[1] > w[0]);
    let growth = ratios.last().copied().unwrap_or(f64::NAN) / ratios[0];
    let checks = vec![
        Check::new("ratio_monotone", monotone, format!("ratios {ratios:?}")),
        Check::new("ratio_growth", growth >= 1.5, format!("last/first = {growth:.4}")),
        dominance_check("dominated", &rows, 0.0),
    ];
    Ok((rows.clone(), checks, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{run, ExperimentId};

    #[test]
    fn small_converge_run_is_dominated() {
        let plan = ExperimentPlan {
            n_grid: vec![10, 20, 40, 80],
            ..ExperimentPlan::defaults(ExperimentId::ParamagnetConverge)
        };
        let out = run(&plan).unwrap();
        assert_eq!(out.rows.len(), 12);
        assert!(out.summary.check("dominated").unwrap().pass);
        // Exactly matched field: the single-site mean agrees.
        assert!(out
            .rows
            .iter()
            .filter(|r| r.observable == "phi1")
            .all(|r| r.gap < 1e-12));
    }

    #[test]
    fn pair_gap_matches_closed_form() {
        // MC: m² − (1 − m²)/(N − 1); C: m², at the snapped m.
        let plan = ExperimentPlan {
            n_grid: vec![10, 100],
            observables: vec![ObservableKind::Phi1phi2],
            ..ExperimentPlan::defaults(ExperimentId::ParamagnetConverge)
        };
        for r in run(&plan).unwrap().rows {
            let m = r.extra("m_used").unwrap();
            let want = (1.0 - m * m) / (r.n as f64 - 1.0);
            assert!((r.gap - want).abs() < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn deterministic_output() {
        let plan = ExperimentPlan {
            n_grid: vec![10, 100, 1000],
            ..ExperimentPlan::defaults(ExperimentId::BoundCompare)
        };
        let a = run(&plan).unwrap();
        let b = run(&plan).unwrap();
        let strip = |rows: &[ResultRow]| {
            rows.iter()
                .map(|r| (r.gap, r.bound_coupling, r.bound_relent))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a.rows), strip(&b.rows));
    }
}
