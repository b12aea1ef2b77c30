//! Shortest open Hamiltonian path (free endpoints) over a symmetric distance matrix.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest instance solved exactly; larger ones use the heuristic.
pub const DEFAULT_HELD_KARP_MAX: usize = 18;

#[derive(Debug, Clone, PartialEq)]
pub struct TspPath {
    pub order: Vec<usize>,
    pub length: f64,
    /// False when the heuristic fallback produced the path.
    pub exact: bool,
}

pub fn held_karp_path(dist: &DMatrix<f64>) -> Result<TspPath> {
    shortest_open_path(dist, DEFAULT_HELD_KARP_MAX)
}

/// Exact subset DP up to `max_exact` nodes, nearest neighbour plus 2-opt above.
pub fn shortest_open_path(dist: &DMatrix<f64>, max_exact: usize) -> Result<TspPath> {
    let n = dist.nrows();
    if n == 0 {
        return Err(Error::InvalidInput("path over zero nodes".into()));
    }
    if dist.ncols() != n {
        return Err(Error::InvalidInput("distance matrix is not square".into()));
    }
    if n == 1 {
        return Ok(TspPath {
            order: vec![0],
            length: 0.0,
            exact: true,
        });
    }
    if n <= max_exact.min(usize::BITS as usize - 2) {
        Ok(held_karp(dist))
    } else {
        Ok(nearest_neighbour_two_opt(dist))
    }
}

/// Sum of consecutive edges, accumulated from the front of the path.
pub fn path_length(dist: &DMatrix<f64>, order: &[usize]) -> f64 {
    order.windows(2).fold(0.0, |acc, w| acc + dist[(w[0], w[1])])
}

// best[mask * n + j]: shortest path visiting exactly `mask` and ending at j. Every node may
// start a path at cost zero, which is the same as a depot joined to all nodes by free edges.
fn held_karp(dist: &DMatrix<f64>) -> TspPath {
    let n = dist.nrows();
    let full = (1usize << n) - 1;
    let mut best = vec![f64::INFINITY; (full + 1) * n];
    let mut parent = vec![u8::MAX; (full + 1) * n];
    for j in 0..n {
        best[(1 << j) * n + j] = 0.0;
    }
    for mask in 1..=full {
        for j in 0..n {
            if mask & (1 << j) == 0 {
                continue;
            }
            let here = best[mask * n + j];
            if here == f64::INFINITY {
                continue;
            }
            for k in 0..n {
                if mask & (1 << k) != 0 {
                    continue;
                }
                let next = mask | (1 << k);
                let cand = here + dist[(j, k)];
                if cand < best[next * n + k] {
                    best[next * n + k] = cand;
                    parent[next * n + k] = j as u8;
                }
            }
        }
    }
    let mut end = 0;
    for j in 1..n {
        if best[full * n + j] < best[full * n + end] {
            end = j;
        }
    }
    let length = best[full * n + end];
    let mut order = Vec::with_capacity(n);
    let (mut mask, mut j) = (full, end);
    loop {
        order.push(j);
        let p = parent[mask * n + j];
        if p == u8::MAX {
            break;
        }
        mask &= !(1 << j);
        j = p as usize;
    }
    order.reverse();
    TspPath {
        order,
        length,
        exact: true,
    }
}

fn nearest_neighbour_two_opt(dist: &DMatrix<f64>) -> TspPath {
    let n = dist.nrows();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut cur = 0;
    visited[0] = true;
    order.push(0);
    for _ in 1..n {
        let mut next = usize::MAX;
        for k in 0..n {
            if !visited[k] && (next == usize::MAX || dist[(cur, k)] < dist[(cur, next)]) {
                next = k;
            }
        }
        visited[next] = true;
        order.push(next);
        cur = next;
    }

    // reversing order[i..=j] swaps the edges entering i and leaving j; a missing edge at either
    // end of the path costs nothing, which lets the endpoints move
    let mut improved = true;
    while improved {
        improved = false;
        for i in 0..n - 1 {
            for j in i + 1..n {
                let mut before = 0.0;
                let mut after = 0.0;
                if i > 0 {
                    before += dist[(order[i - 1], order[i])];
                    after += dist[(order[i - 1], order[j])];
                }
                if j + 1 < n {
                    before += dist[(order[j], order[j + 1])];
                    after += dist[(order[i], order[j + 1])];
                }
                if after < before - 1e-12 {
                    order[i..=j].reverse();
                    improved = true;
                }
            }
        }
    }
    let length = path_length(dist, &order);
    TspPath {
        order,
        length,
        exact: false,
    }
}
