//! Exact balanced transport between two discrete measures by the primal
//! transportation simplex (MODI): northwest-corner start, potentials on the basis
//! tree, Dantzig pricing with lowest-index tie breaks.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Minimum of Σ c_ij x_ij over couplings of `a` (rows) and `b` (columns).
/// `cost` is row-major m×n. Totals must already agree.
pub fn transport_cost(a: &[f64], b: &[f64], cost: &[f64]) -> Result<f64> {
    let (m, n) = (a.len(), b.len());
    if m == 0 || n == 0 {
        return Ok(0.0);
    }
    debug_assert_eq!(cost.len(), m * n);
    let scale = cost.iter().fold(0.0f64, |s, c| s.max(c.abs())).max(1.0);
    let tol = 1e-13 * scale;

    // basis cells and their flows; `slot[i * n + j]` indexes into them
    let mut cells: Vec<(usize, usize)> = Vec::with_capacity(m + n - 1);
    let mut flow: Vec<f64> = Vec::with_capacity(m + n - 1);
    let mut slot = vec![usize::MAX; m * n];
    {
        let (mut ra, mut rb) = (a.to_vec(), b.to_vec());
        let (mut i, mut j) = (0, 0);
        loop {
            let x = ra[i].min(rb[j]).max(0.0);
            slot[i * n + j] = cells.len();
            cells.push((i, j));
            flow.push(x);
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i < m - 1 && (ra[i] < rb[j] || j == n - 1) {
                rb[j] -= x;
                ra[i] = 0.0;
                i += 1;
            } else {
                ra[i] -= x;
                rb[j] = 0.0;
                j += 1;
            }
        }
    }

    let nodes = m + n;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut pot = vec![0.0; nodes];
    let mut parent = vec![usize::MAX; nodes];
    let mut parent_cell = vec![usize::MAX; nodes];
    let mut queue = VecDeque::new();
    let max_iter = 50 * (m * n).max(100);

    for _ in 0..max_iter {
        // node k < m is row k, node m + j is column j
        for l in adj.iter_mut() {
            l.clear();
        }
        for (c, &(i, j)) in cells.iter().enumerate() {
            adj[i].push(c);
            adj[m + j].push(c);
        }
        // potentials u_i + v_j = c_ij on the tree, rooted at row 0
        parent.iter_mut().for_each(|p| *p = usize::MAX);
        parent[0] = 0;
        pot[0] = 0.0;
        queue.clear();
        queue.push_back(0);
        while let Some(k) = queue.pop_front() {
            for &c in &adj[k] {
                let (i, j) = cells[c];
                let other = if k < m { m + j } else { i };
                if parent[other] == usize::MAX {
                    parent[other] = k;
                    pot[other] = cost[i * n + j] - pot[k];
                    queue.push_back(other);
                }
            }
        }

        // Dantzig pricing
        let mut best = -tol;
        let mut enter = None;
        for i in 0..m {
            let ui = pot[i];
            let row = &cost[i * n..(i + 1) * n];
            for j in 0..n {
                let d = row[j] - ui - pot[m + j];
                if d < best {
                    best = d;
                    enter = Some((i, j));
                }
            }
        }
        let Some((ei, ej)) = enter else {
            return Ok(cells.iter().zip(&flow).map(|(&(i, j), x)| cost[i * n + j] * x).sum());
        };

        // tree path from column ej to row ei, rooted at ei
        parent.iter_mut().for_each(|p| *p = usize::MAX);
        parent[ei] = ei;
        queue.clear();
        queue.push_back(ei);
        while let Some(k) = queue.pop_front() {
            if k == m + ej {
                break;
            }
            for &c in &adj[k] {
                let (i, j) = cells[c];
                let other = if k < m { m + j } else { i };
                if parent[other] == usize::MAX {
                    parent[other] = k;
                    parent_cell[other] = c;
                    queue.push_back(other);
                }
            }
        }
        // walking from column ej toward the root, edges alternate -, +, -, ...
        let mut path = Vec::new();
        let mut k = m + ej;
        while k != ei {
            path.push(parent_cell[k]);
            k = parent[k];
        }
        let mut leave = usize::MAX;
        let mut theta = f64::INFINITY;
        for &c in path.iter().step_by(2) {
            let (i, j) = cells[c];
            let better = flow[c] < theta
                || (flow[c] == theta && {
                    let (li, lj) = cells[leave];
                    i * n + j < li * n + lj
                });
            if better {
                theta = flow[c];
                leave = c;
            }
        }
        for (s, &c) in path.iter().enumerate() {
            if s % 2 == 0 {
                flow[c] -= theta;
            } else {
                flow[c] += theta;
            }
        }
        let (li, lj) = cells[leave];
        slot[li * n + lj] = usize::MAX;
        cells[leave] = (ei, ej);
        flow[leave] = theta;
        slot[ei * n + ej] = leave;
    }
    Err(Error::Domain(format!("transport simplex did not converge in {max_iter} pivots")))
}
