//! Transportation simplex on the coupling polytope.
//!
//! Start from a northwest-corner spanning tree, price with dual potentials,
//! pivot around the tree cycle closed by the entering cell. Long runs of
//! degenerate pivots switch pricing to a seeded random choice among improving
//! cells, which breaks cycling with probability one.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub cost: f64,
    /// Positive flows `(row, column, mass)`.
    pub flows: Vec<(usize, usize, f64)>,
    pub pivots: usize,
}

struct Tree {
    rows: usize,
    cols: usize,
    /// Basic cells as (row, col).
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
}

impl Tree {
    fn node_count(&self) -> usize {
        self.rows + self.cols
    }

    /// Rooted at row 0: parent node, edge to parent (cell slot) and depth.
    fn rooted(&self) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let n = self.node_count();
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (slot, &(i, j)) in self.cells.iter().enumerate() {
            adj[i].push((self.rows + j, slot));
            adj[self.rows + j].push((i, slot));
        }
        let mut parent = vec![usize::MAX; n];
        let mut edge = vec![usize::MAX; n];
        let mut depth = vec![0usize; n];
        let mut stack = vec![0usize];
        parent[0] = 0;
        while let Some(u) = stack.pop() {
            for &(v, slot) in &adj[u] {
                if parent[v] == usize::MAX {
                    parent[v] = u;
                    edge[v] = slot;
                    depth[v] = depth[u] + 1;
                    stack.push(v);
                }
            }
        }
        (parent, edge, depth)
    }
}

/// Solves `min Σ c_ij x_ij` subject to row sums `supply` and column sums `demand`.
///
/// `cost` is row-major `supply.len() × demand.len()`. Totals must agree to 1e−9.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportPlan> {
    let (m_all, n_all) = (supply.len(), demand.len());
    if m_all == 0 || n_all == 0 || cost.len() != m_all * n_all {
        return Err(Error::Solver("empty marginals or mismatched cost matrix".into()));
    }
    if supply.iter().chain(demand).any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Solver("weights must be finite and non-negative".into()));
    }
    let total_s: f64 = supply.iter().sum();
    let total_d: f64 = demand.iter().sum();
    if (total_s - total_d).abs() > 1e-9 * total_s.max(1.0) || total_s <= 0.0 {
        return Err(Error::Solver(format!("unbalanced marginals: {total_s} vs {total_d}")));
    }

    // Zero-mass points never carry flow; drop them.
    let rows: Vec<usize> = (0..m_all).filter(|&i| supply[i] > 0.0).collect();
    let cols: Vec<usize> = (0..n_all).filter(|&j| demand[j] > 0.0).collect();
    let (m, n) = (rows.len(), cols.len());
    let a: Vec<f64> = rows.iter().map(|&i| supply[i]).collect();
    let b: Vec<f64> = cols.iter().map(|&j| demand[j] * total_s / total_d).collect();
    let c: Vec<f64> = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| cost[i * n_all + j]))
        .collect();
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("cost matrix contains non-finite entries".into()));
    }
    let scale = c.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1e-300);
    let tol = 1e-12 * scale;

    let mut tree = northwest_corner(&a, &b);
    let mut is_basic = vec![false; m * n];
    for &(i, j) in &tree.cells {
        is_basic[i * n + j] = true;
    }

    let max_pivots = 50 * (m + n) * (m + n) + 10_000;
    let mut degenerate_run = 0usize;
    let mut lcg: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut pivots = 0usize;
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];

    loop {
        let (parent, edge, depth) = tree.rooted();
        // Potentials: u_i + v_j = c_ij on basic cells, u_0 = 0, in BFS-depth order.
        let mut order: Vec<usize> = (0..m + n).collect();
        order.sort_by_key(|&k| depth[k]);
        for &node in &order {
            if node == 0 {
                u[0] = 0.0;
                continue;
            }
            let (i, j) = tree.cells[edge[node]];
            if node < m {
                u[node] = c[i * n + j] - v[j];
            } else {
                v[node - m] = c[i * n + j] - u[i];
            }
            debug_assert!(parent[node] != usize::MAX);
        }

        let random_pricing = degenerate_run > 2 * (m + n);
        let mut entering: Option<(usize, usize)> = None;
        let mut best = -tol;
        let mut candidates = 0u64;
        for i in 0..m {
            for j in 0..n {
                if is_basic[i * n + j] {
                    continue;
                }
                let reduced = c[i * n + j] - u[i] - v[j];
                if reduced < -tol {
                    if random_pricing {
                        // Reservoir sampling over improving cells.
                        candidates += 1;
                        lcg = lcg
                            .wrapping_mul(6_364_136_223_846_793_005)
                            .wrapping_add(1_442_695_040_888_963_407);
                        if (lcg >> 33).is_multiple_of(candidates) {
                            entering = Some((i, j));
                        }
                    } else if reduced < best {
                        best = reduced;
                        entering = Some((i, j));
                    }
                }
            }
        }
        let Some((ei, ej)) = entering else {
            break;
        };
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Solver(format!("pivot limit {max_pivots} reached")));
        }

        // Tree path from row ei to column ej; both halves start with a donor edge.
        let mut side_a = Vec::new();
        let mut side_b = Vec::new();
        let (mut x, mut y) = (ei, m + ej);
        while depth[x] > depth[y] {
            side_a.push(edge[x]);
            x = parent[x];
        }
        while depth[y] > depth[x] {
            side_b.push(edge[y]);
            y = parent[y];
        }
        while x != y {
            side_a.push(edge[x]);
            x = parent[x];
            side_b.push(edge[y]);
            y = parent[y];
        }
        let signed = side_a
            .iter()
            .enumerate()
            .chain(side_b.iter().enumerate())
            .map(|(k, &slot)| (slot, k % 2 == 0));
        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        for (slot, donor) in signed.clone() {
            if donor && tree.flow[slot] < theta {
                theta = tree.flow[slot];
                leaving = slot;
            }
        }
        if leaving == usize::MAX {
            return Err(Error::Solver("pivot cycle without donor edge".into()));
        }
        for (slot, donor) in signed {
            if donor {
                tree.flow[slot] = (tree.flow[slot] - theta).max(0.0);
            } else {
                tree.flow[slot] += theta;
            }
        }
        degenerate_run = if theta <= 1e-15 { degenerate_run + 1 } else { 0 };
        let (li, lj) = tree.cells[leaving];
        is_basic[li * n + lj] = false;
        is_basic[ei * n + ej] = true;
        tree.cells[leaving] = (ei, ej);
        tree.flow[leaving] = theta;
    }

    let mut flows = Vec::new();
    let mut total = 0.0;
    for (&(i, j), &x) in tree.cells.iter().zip(&tree.flow) {
        if x > 0.0 {
            total += c[i * n + j] * x;
            flows.push((rows[i], cols[j], x));
        }
    }
    flows.sort_by_key(|p| (p.0, p.1));
    Ok(TransportPlan {
        cost: total,
        flows,
        pivots,
    })
}

fn northwest_corner(a: &[f64], b: &[f64]) -> Tree {
    let (m, n) = (a.len(), b.len());
    let mut ra = a.to_vec();
    let mut rb = b.to_vec();
    let mut cells = Vec::with_capacity(m + n - 1);
    let mut flow = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let x = ra[i].min(rb[j]).max(0.0);
        cells.push((i, j));
        flow.push(x);
        ra[i] -= x;
        rb[j] -= x;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if j == n - 1 || (i < m - 1 && ra[i] <= rb[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }
    Tree {
        rows: m,
        cols: n,
        cells,
        flow,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_instance() {
        // Classic 3x4 textbook instance, optimum 435.
        let supply = [15.0, 25.0, 10.0];
        let demand = [5.0, 15.0, 15.0, 15.0];
        let cost = [10.0, 2.0, 20.0, 11.0, 12.0, 7.0, 9.0, 20.0, 4.0, 14.0, 16.0, 18.0];
        let plan = solve_transport(&supply, &demand, &cost).unwrap();
        assert!((plan.cost - 435.0).abs() < 1e-9, "cost {}", plan.cost);
    }

    #[test]
    fn degenerate_assignment() {
        // Uniform weights produce heavy degeneracy; optimum is the anti-diagonal.
        let n = 12;
        let w = vec![1.0 / n as f64; n];
        let cost: Vec<f64> = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                ((i + j) as f64 - (n - 1) as f64).abs()
            })
            .collect();
        let plan = solve_transport(&w, &w, &cost).unwrap();
        assert!(plan.cost.abs() < 1e-12);
    }

    #[test]
    fn zero_mass_points_are_ignored() {
        let plan = solve_transport(&[0.0, 1.0], &[1.0, 0.0], &[5.0, 5.0, 3.0, 7.0]).unwrap();
        assert!((plan.cost - 3.0).abs() < 1e-15);
        assert_eq!(plan.flows, vec![(1, 0, 1.0)]);
    }

    #[test]
    fn unbalanced_rejected() {
        assert!(solve_transport(&[1.0], &[0.5], &[0.0]).is_err());
    }
}
