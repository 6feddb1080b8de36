//! Brute-force reference for the circuit solver.
//!
//! Node voltages are found by nodal analysis with the input treated as a
//! known voltage and eliminated from the unknowns (no auxiliary source
//! current), solved by textbook Gaussian elimination with partial pivoting.
//! Nodes with no device path to either terminal are held at 0 V.

#![allow(dead_code)]

use rand::Rng;
use switchnet_core::device::{apply_hysteresis, conductance, sample_device_params, step_internal_state_with};
use switchnet_core::solver::{SimOptions, Waveform};
use switchnet_core::topology::{build_grid, Edge, NetworkTopology};
use switchnet_core::{DeviceState, ParamRanges};

/// Solve `a x = b` in place by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        assert!(a[pivot][col].abs() > 0.0, "singular oracle system");
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

fn reachable(n: usize, edges: &[(usize, usize)], from: usize) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(u) = stack.pop() {
        for &(a, b) in edges {
            let next = if a == u {
                b
            } else if b == u {
                a
            } else {
                continue;
            };
            if !seen[next] {
                seen[next] = true;
                stack.push(next);
            }
        }
    }
    seen
}

/// Node voltages and source current for fixed per-edge conductances.
pub fn solve_network(t: &NetworkTopology, g: &[f64], v_in: f64) -> (Vec<f64>, f64) {
    let n = t.grid.node_count();
    let pairs: Vec<(usize, usize)> = t.edges.iter().map(|e| (e.a, e.b)).collect();
    let from_in = reachable(n, &pairs, t.input_node);
    let from_gnd = reachable(n, &pairs, t.ground_node);

    let mut v = vec![0.0; n];
    v[t.input_node] = v_in;
    let free: Vec<usize> =
        (0..n).filter(|&i| i != t.input_node && i != t.ground_node && (from_in[i] || from_gnd[i])).collect();
    let mut index = vec![usize::MAX; n];
    for (k, &node) in free.iter().enumerate() {
        index[node] = k;
    }
    let m = free.len();
    let mut a = vec![vec![0.0; m]; m];
    let mut b = vec![0.0; m];
    for (e, &ge) in t.edges.iter().zip(g) {
        for (p, q) in [(e.a, e.b), (e.b, e.a)] {
            if index[p] == usize::MAX {
                continue;
            }
            a[index[p]][index[p]] += ge;
            if index[q] != usize::MAX {
                a[index[p]][index[q]] -= ge;
            } else {
                b[index[p]] += ge * v[q];
            }
        }
    }
    if m > 0 {
        for (k, x) in gauss_solve(a, b).into_iter().enumerate() {
            v[free[k]] = x;
        }
    }
    let current = t
        .edges
        .iter()
        .zip(g)
        .map(|(e, &ge)| {
            if e.a == t.input_node {
                ge * (v[e.a] - v[e.b])
            } else if e.b == t.input_node {
                ge * (v[e.b] - v[e.a])
            } else {
                0.0
            }
        })
        .sum();
    (v, current)
}

/// Stamped conductance of every edge at the given branch voltages.
pub fn stamped(t: &NetworkTopology, branch: &[f64]) -> Vec<f64> {
    t.edges
        .iter()
        .zip(branch)
        .map(|(e, &v)| conductance(e.state.on, v, &e.params).unwrap() + e.params.g_floor)
        .collect()
}

/// Independent re-solve of every step of a recorded run.
///
/// `recorded[k]` holds all node voltages the solver produced at step `k`.
/// Step `k` is rebuilt from the solver's step `k - 1` voltages (zero before
/// the first step): conductances come from those branch voltages, the oracle
/// solves the circuit, and the devices are then advanced. Checking one step
/// at a time keeps the comparison meaningful even where the lagged update
/// amplifies rounding differences from step to step.
pub fn replay(
    t: &NetworkTopology,
    waveform: &Waveform,
    opts: &SimOptions,
    recorded: &[Vec<f64>],
) -> Vec<(Vec<f64>, f64)> {
    let mut t = t.clone();
    let mut branch = vec![0.0; t.edges.len()];
    let mut out = Vec::new();
    for (k, v_rec) in recorded.iter().enumerate() {
        let v_in = waveform.value(k as f64 * opts.dt);
        out.push(solve_network(&t, &stamped(&t, &branch), v_in));
        for (e, b) in t.edges.iter_mut().zip(branch.iter_mut()) {
            *b = v_rec[e.a] - v_rec[e.b];
            let next = step_internal_state_with(e.state, *b, opts.dt, &e.params, opts.decay_mode).unwrap();
            e.state = apply_hysteresis(next, &e.params);
        }
    }
    out
}

/// Random network on a `dim`×`dim` lattice where every node is an interface
/// node, with input at the first node and ground at the last. A spanning
/// chain guarantees connectivity; `frozen` zeroes the state growth rate.
pub fn random_network<R: Rng>(dim: usize, edges: usize, frozen: bool, rng: &mut R) -> NetworkTopology {
    let grid = build_grid(dim, 0).unwrap();
    let n = grid.node_count();
    let ranges = ParamRanges::default();
    let make = |a: usize, b: usize, rng: &mut R| {
        let mut params = sample_device_params(&ranges, rng).unwrap();
        if frozen {
            params.lambda = 0.0;
        }
        // w' = 0 and w' = 1 are fixed points once the growth term is gone.
        let on = frozen && rng.random_bool(0.5);
        let w_prime = if on { 1.0 } else { 0.0 };
        Edge { a, b, params, state: DeviceState { w_prime, on } }
    };
    let mut list: Vec<Edge> = (0..n - 1).map(|i| make(i, i + 1, rng)).collect();
    while list.len() < edges {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            list.push(make(a, b, rng));
        }
    }
    NetworkTopology { grid, edges: list, input_node: 0, ground_node: n - 1, seed: 0, added_edges: 0 }
}
