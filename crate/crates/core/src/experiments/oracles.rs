use std::collections::BTreeSet;

use rand::Rng;
use rayon::prelude::*;

use super::{dominance_check, Check, DriverOutput, ExperimentPlan, ResultRow};
use crate::coupling::{lipschitz_error_bound, moment_constant, moment_error_bound, wp_bruteforce, ExchangeableFamily};
use crate::error::Result;
use crate::laplace::{leading_term, quadrature_reference, registered_problems};
use crate::observable::MomentIndex;
use crate::seeding::{stream_rng, sub_seed};

/// Slack for LP round-off when comparing an exact gap with its bound.
const LP_SLACK: f64 = 1e-12;
const ALPHABET: [f64; 3] = [-1.0, 0.0, 1.5];
const MAX_TYPES: usize = 4;
const MAX_SUPPORT: usize = 256;

pub(super) fn laplace_check(plan: &ExperimentPlan) -> Result<DriverOutput> {
    let mut rows = Vec::new();
    for problem in registered_problems() {
        for &n in &plan.n_grid {
            let lambda = n as f64;
            let q = quadrature_reference(&problem, lambda)?;
            let lead = leading_term(&problem, lambda)?;
            let tolerance = 5.0 * lambda.powf(-1.0 / problem.mu_exp);
            let mut row = ResultRow::new(n, problem.name.clone(), (q.value / lead - 1.0).abs());
            row.bound_coupling = Some(tolerance);
            row.extras = vec![("quadrature", q.value), ("leading", lead), ("tolerance", tolerance)];
            rows.push(row);
        }
    }
    let checks = vec![dominance_check("within_tolerance", &rows, 0.0)];
    Ok((rows.clone(), checks, rows))
}

/// `x ↦ clamp(Σ cᵢ xᵢ, ±1)` with `‖c‖_q = 1`, hence 1-Lipschitz for `‖·‖_p` on the chosen sites.
struct LinearClip {
    sites: Vec<usize>,
    coef: Vec<f64>,
}

impl LinearClip {
    fn random<R: Rng>(n: usize, p: f64, rng: &mut R) -> Self {
        let size = rng.random_range(1..=3.min(n - 1));
        let mut sites: Vec<usize> = (0..n).collect();
        sites.sort_by_key(|_| rng.random::<u32>());
        sites.truncate(size);
        let raw: Vec<f64> = (0..size).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = if p == 1.0 {
            raw.iter().fold(0.0f64, |a, c| a.max(c.abs()))
        } else {
            let q = p / (p - 1.0);
            raw.iter().map(|c| c.abs().powf(q)).sum::<f64>().powf(1.0 / q)
        };
        let coef = raw.iter().map(|c| c / norm.max(f64::MIN_POSITIVE)).collect();
        Self { sites, coef }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.sites
            .iter()
            .zip(&self.coef)
            .map(|(&i, c)| c * x[i])
            .sum::<f64>()
            .clamp(-1.0, 1.0)
    }
}

fn random_moment<R: Rng>(n: usize, rng: &mut R) -> Result<MomentIndex> {
    let order = rng.random_range(1..=3);
    let sites = rng.random_range(1..=order.min(n - 1));
    let labels = (0..order)
        .map(|k| if k < sites { k } else { rng.random_range(0..sites) })
        .collect();
    MomentIndex::new(labels)
}

fn trial(plan: &ExperimentPlan, t: u64) -> Result<Vec<ResultRow>> {
    let n = plan.n_grid[(t % plan.n_grid.len() as u64) as usize];
    let size = n as usize;
    let mut rng = stream_rng(sub_seed(plan.seed, t), 0);
    let family = ExchangeableFamily::new(ALPHABET.to_vec(), size)?;
    let a = family.random_measure(MAX_TYPES, MAX_SUPPORT, &mut rng)?;
    let b = family.random_measure(MAX_TYPES, MAX_SUPPORT, &mut rng)?;
    let mut rows = Vec::new();
    let mut push = |name: &str, p: f64, wp: f64, gap: f64, bound: f64| {
        let mut row = ResultRow::new(n, name, gap);
        row.bound_coupling = Some(bound);
        row.extras = vec![("trial", t as f64), ("p", p), ("wp", wp)];
        rows.push(row);
    };
    for p in [1.0, 2.0] {
        let wp = wp_bruteforce(&a, &b, p)?.value;
        let f = LinearClip::random(size, p, &mut rng);
        let gap = (a.expectation(|x| f.eval(x)) - b.expectation(|x| f.eval(x))).abs();
        push(
            &format!("lipschitz_p{p}"),
            p,
            wp,
            gap,
            lipschitz_error_bound(f.sites.len(), n, p, wp)?,
        );
        if p == 2.0 {
            let j = random_moment(size, &mut rng)?;
            let m = moment_constant(&j, p, &[&a, &b]);
            let gap = (a.expectation(|x| j.eval_state(x)) - b.expectation(|x| j.eval_state(x))).abs();
            push(
                "moment_p2",
                p,
                wp,
                gap,
                moment_error_bound(&j, p, f64::INFINITY, m, wp, n)?,
            );
        }
    }
    Ok(rows)
}

pub(super) fn ot_oracle_check(plan: &ExperimentPlan) -> Result<DriverOutput> {
    let per_trial: Vec<Result<Vec<ResultRow>>> = (0..plan.trials)
        .into_par_iter()
        .map(|t| trial(plan, t).map_err(|e| e.context(format!("trial {t}"))))
        .collect();
    let mut rows = Vec::new();
    for r in per_trial {
        rows.extend(r?);
    }
    let failing: Vec<&ResultRow> = rows
        .iter()
        .filter(|r| !r.bound_coupling.is_some_and(|b| r.gap <= b + LP_SLACK))
        .collect();
    let failed_trials: BTreeSet<u64> = failing
        .iter()
        .filter_map(|r| r.extra("trial"))
        .map(|t| t as u64)
        .collect();
    let trials_ok = plan.trials as usize - failed_trials.len();
    let bad: Vec<String> = failing
        .iter()
        .map(|r| {
            format!(
                "trial {} {}: gap {:.3e} bound {:?}",
                r.extra("trial").unwrap_or(f64::NAN),
                r.observable,
                r.gap,
                r.bound_coupling
            )
        })
        .collect();
    let checks = vec![Check::new(
        "dominated",
        bad.is_empty(),
        if bad.is_empty() {
            format!("{trials_ok}/{} trials dominated", plan.trials)
        } else {
            format!("{trials_ok}/{} trials dominated; {}", plan.trials, bad.join("; "))
        },
    )];
    Ok((rows, checks, Vec::new()))
}
