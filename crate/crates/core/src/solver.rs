//! Quasi-static network solver.
//!
//! Every step the network is frozen into a linear resistive circuit (device
//! conductances evaluated at the previous branch voltages), solved by
//! modified nodal analysis with one ideal source between input and ground,
//! and then each device's hidden state is advanced with the new branch
//! voltage.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::device::{apply_hysteresis, conductance_unchecked, step_unchecked, DecayMode};
use crate::error::{Error, Result};
use crate::topology::{components, NetworkTopology};

/// Relative KCL residual every solve must satisfy.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

/// Conductance to ground (S) stamped on nodes cut off from both terminals.
const FLOATING_SHUNT: f64 = 1e-9;

/// Source waveform applied between input and ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Waveform {
    /// `amplitude * sin(2 pi frequency t + phase)`.
    Sine {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    Constant {
        volts: f64,
    },
}

impl Waveform {
    pub fn sine(amplitude: f64, frequency: f64) -> Self {
        Waveform::Sine { amplitude, frequency, phase: 0.0 }
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Waveform::Sine { amplitude, frequency, phase } => amplitude * (2.0 * PI * frequency * t + phase).sin(),
            Waveform::Constant { volts } => volts,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Waveform::Sine { amplitude, frequency, phase } => {
                amplitude.is_finite() && frequency.is_finite() && phase.is_finite()
            }
            Waveform::Constant { volts } => volts.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("waveform has non-finite parameters: {self:?}")))
        }
    }
}

impl Default for Waveform {
    fn default() -> Self {
        Waveform::sine(2.0, 5.0)
    }
}

/// Optional inner re-linearization loop per step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPoint {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for FixedPoint {
    fn default() -> Self {
        Self { max_iterations: 10, tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimOptions {
    pub dt: f64,
    pub duration: f64,
    #[serde(default)]
    pub decay_mode: DecayMode,
    #[serde(default)]
    pub fixed_point: Option<FixedPoint>,
    /// Record every n-th step.
    #[serde(default = "one")]
    pub decimation: usize,
}

fn one() -> usize {
    1
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { dt: 1e-3, duration: 1.0, decay_mode: DecayMode::default(), fixed_point: None, decimation: 1 }
    }
}

impl SimOptions {
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::param(format!("dt must be finite and > 0, got {}", self.dt)));
        }
        if !(self.duration.is_finite() && self.duration >= self.dt) {
            return Err(Error::param(format!("duration must be >= dt, got {}", self.duration)));
        }
        if self.decimation == 0 {
            return Err(Error::param("decimation must be >= 1"));
        }
        if let Some(fp) = self.fixed_point {
            if fp.max_iterations == 0 || !(fp.tolerance > 0.0) {
                return Err(Error::param("fixed_point needs max_iterations >= 1 and tolerance > 0"));
            }
        }
        Ok(())
    }
}

/// Assembled MNA system `A x = b`.
///
/// Unknowns are the voltages of every non-ground node followed by the
/// current through the ideal source.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// Unknown index for each grid node; `None` for ground.
    pub unknown_of_node: Vec<Option<usize>>,
}

impl LinearSystem {
    pub fn dimension(&self) -> usize {
        self.rhs.len()
    }

    fn source_row(&self) -> usize {
        self.rhs.len() - 1
    }
}

/// Node voltages (ground included, at 0 V) and the current the source
/// delivers into the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub node_voltages: Vec<f64>,
    pub source_current: f64,
    /// `||A x - b||_inf / max(1, ||b||_inf)`.
    pub residual: f64,
}

/// Nodes with no device path to either terminal. They carry no current
/// and are tied to ground through a small shunt.
fn floating_nodes(t: &NetworkTopology) -> Vec<bool> {
    let comp = components(t.grid.node_count(), &t.edges);
    let (ci, cg) = (comp[t.input_node], comp[t.ground_node]);
    comp.iter().map(|&c| c != ci && c != cg).collect()
}

struct Assembler {
    unknown_of_node: Vec<Option<usize>>,
    floating: Vec<bool>,
    input: usize,
}

impl Assembler {
    fn new(t: &NetworkTopology) -> Self {
        let mut next = 0;
        let unknown_of_node = (0..t.grid.node_count())
            .map(|i| {
                if i == t.ground_node {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect();
        Self { unknown_of_node, floating: floating_nodes(t), input: t.input_node }
    }

    fn dimension(&self) -> usize {
        self.unknown_of_node.len()
    }

    fn stamp(&self, t: &NetworkTopology, conductances: &[f64], v_in: f64, sys: &mut LinearSystem) {
        let a = &mut sys.matrix;
        a.fill(0.0);
        sys.rhs.fill(0.0);
        for (e, &g) in t.edges.iter().zip(conductances) {
            let (ia, ib) = (self.unknown_of_node[e.a], self.unknown_of_node[e.b]);
            if let Some(i) = ia {
                a[(i, i)] += g;
            }
            if let Some(j) = ib {
                a[(j, j)] += g;
            }
            if let (Some(i), Some(j)) = (ia, ib) {
                a[(i, j)] -= g;
                a[(j, i)] -= g;
            }
        }
        for (node, &floating) in self.floating.iter().enumerate() {
            if floating {
                if let Some(i) = self.unknown_of_node[node] {
                    a[(i, i)] += FLOATING_SHUNT;
                }
            }
        }
        let k = sys.rhs.len() - 1;
        let i = self.unknown_of_node[self.input].expect("input is never ground");
        a[(i, k)] += 1.0;
        a[(k, i)] += 1.0;
        sys.rhs[k] = v_in;
    }
}

fn stamp_conductances(t: &NetworkTopology, branch_voltages: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend(
        t.edges
            .iter()
            .zip(branch_voltages)
            .map(|(e, &v)| conductance_unchecked(e.state.on, v, &e.params) + e.params.g_floor),
    );
}

/// Build the MNA system for the current device states.
///
/// Each edge contributes `conductance(w, V_prev) + g_floor`.
pub fn assemble(t: &NetworkTopology, branch_voltages: &[f64], v_in: f64) -> Result<LinearSystem> {
    if branch_voltages.len() != t.edges.len() {
        return Err(Error::param(format!("expected {} branch voltages, got {}", t.edges.len(), branch_voltages.len())));
    }
    if !v_in.is_finite() || branch_voltages.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("assembly inputs must be finite"));
    }
    let asm = Assembler::new(t);
    let dim = asm.dimension();
    let mut sys = LinearSystem {
        matrix: DMatrix::zeros(dim, dim),
        rhs: DVector::zeros(dim),
        unknown_of_node: asm.unknown_of_node.clone(),
    };
    let mut g = Vec::new();
    stamp_conductances(t, branch_voltages, &mut g);
    asm.stamp(t, &g, v_in, &mut sys);
    Ok(sys)
}

/// Solve an assembled system and verify its residual.
pub fn solve_step(sys: &LinearSystem) -> Result<Solution> {
    solve_at(sys, 0)
}

fn solve_at(sys: &LinearSystem, step: usize) -> Result<Solution> {
    let numerical = |message: String| Error::Numerical { step, message };
    let x = sys.matrix.clone().lu().solve(&sys.rhs).ok_or_else(|| numerical("singular MNA matrix".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(numerical("non-finite solution".into()));
    }
    let r = &sys.matrix * &x - &sys.rhs;
    let scale = sys.rhs.amax().max(1.0);
    let residual = r.amax() / scale;
    if !(residual < RESIDUAL_TOLERANCE) {
        return Err(numerical(format!("KCL residual {residual:e} exceeds tolerance")));
    }
    let node_voltages = sys.unknown_of_node.iter().map(|u| u.map_or(0.0, |i| x[i])).collect();
    Ok(Solution { node_voltages, source_current: -x[sys.source_row()], residual })
}

/// Recorded network response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    /// Sample spacing in seconds (solver dt times decimation).
    pub dt: f64,
    pub times: Vec<f64>,
    pub applied_voltage: Vec<f64>,
    pub source_current: Vec<f64>,
    /// Grid node index of each recorded interface column.
    pub interface_nodes: Vec<usize>,
    /// One row per recorded step, one column per interface node.
    pub interface_voltages: Vec<Vec<f64>>,
    pub switching_events: u64,
    /// Largest relative KCL residual over all solves.
    pub max_residual: f64,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Interface voltages as a `steps x nodes` matrix.
    pub fn interface_matrix(&self) -> DMatrix<f64> {
        let cols = self.interface_nodes.len();
        DMatrix::from_fn(self.len(), cols, |r, c| self.interface_voltages[r][c])
    }

    /// Column `k` of the interface voltages.
    pub fn interface_column(&self, k: usize) -> Vec<f64> {
        self.interface_voltages.iter().map(|row| row[k]).collect()
    }
}

/// Simulate a copy of `t`; the input topology is left untouched.
pub fn simulate(t: &NetworkTopology, waveform: &Waveform, opts: &SimOptions) -> Result<SimulationTrace> {
    let mut work = t.clone();
    simulate_in_place(&mut work, waveform, opts)
}

/// Simulate `t`, leaving its devices in their final states.
pub fn simulate_in_place(t: &mut NetworkTopology, waveform: &Waveform, opts: &SimOptions) -> Result<SimulationTrace> {
    opts.validate()?;
    waveform.validate()?;
    t.validate()?;
    if !t.is_connected() {
        return Err(Error::param("input and ground are not connected"));
    }

    let steps = opts.steps();
    let asm = Assembler::new(t);
    let dim = asm.dimension();
    let mut sys = LinearSystem {
        matrix: DMatrix::zeros(dim, dim),
        rhs: DVector::zeros(dim),
        unknown_of_node: asm.unknown_of_node.clone(),
    };
    let interface_nodes = t.grid.interface_nodes();
    let recorded = steps.div_ceil(opts.decimation);
    let mut trace = SimulationTrace {
        dt: opts.dt * opts.decimation as f64,
        times: Vec::with_capacity(recorded),
        applied_voltage: Vec::with_capacity(recorded),
        source_current: Vec::with_capacity(recorded),
        interface_nodes,
        interface_voltages: Vec::with_capacity(recorded),
        switching_events: 0,
        max_residual: 0.0,
    };

    let mut branch = vec![0.0; t.edges.len()];
    let mut g = Vec::with_capacity(t.edges.len());
    for k in 0..steps {
        let time = k as f64 * opts.dt;
        let v_in = waveform.value(time);

        stamp_conductances(t, &branch, &mut g);
        asm.stamp(t, &g, v_in, &mut sys);
        let mut sol = solve_at(&sys, k)?;
        let mut residual = sol.residual;
        update_branch(t, &sol.node_voltages, &mut branch);

        if let Some(fp) = opts.fixed_point {
            for _ in 1..fp.max_iterations {
                stamp_conductances(t, &branch, &mut g);
                asm.stamp(t, &g, v_in, &mut sys);
                let next = solve_at(&sys, k)?;
                residual = residual.max(next.residual);
                let change = max_abs_diff(&next.node_voltages, &sol.node_voltages);
                let scale = next.node_voltages.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
                sol = next;
                update_branch(t, &sol.node_voltages, &mut branch);
                if change <= fp.tolerance * scale {
                    break;
                }
            }
        }

        for (e, &v) in t.edges.iter_mut().zip(&branch) {
            let was_on = e.state.on;
            e.state = apply_hysteresis(step_unchecked(e.state, v, opts.dt, &e.params, opts.decay_mode), &e.params);
            if e.state.on != was_on {
                trace.switching_events += 1;
            }
        }

        trace.max_residual = trace.max_residual.max(residual);
        if k % opts.decimation == 0 {
            trace.times.push(time);
            trace.applied_voltage.push(v_in);
            trace.source_current.push(sol.source_current);
            trace.interface_voltages.push(trace.interface_nodes.iter().map(|&n| sol.node_voltages[n]).collect());
        }
    }
    Ok(trace)
}

fn update_branch(t: &NetworkTopology, v: &[f64], branch: &mut [f64]) {
    for (e, b) in t.edges.iter().zip(branch.iter_mut()) {
        *b = v[e.a] - v[e.b];
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{DeviceParams, DeviceState};
    use crate::topology::{build_grid, Edge};

    /// Device whose zero-bias conductance is `g` (gamma * delta).
    fn linear_on(g: f64) -> DeviceParams {
        DeviceParams { gamma: g / 1e-3, delta: 1e-3, lambda: 0.0, g_floor: 1e-9, ..DeviceParams::default() }
    }

    fn net(edges: &[(usize, usize, f64)], input: usize, ground: usize) -> NetworkTopology {
        let grid = build_grid(2, 1).unwrap();
        NetworkTopology {
            grid,
            edges: edges
                .iter()
                .map(|&(a, b, g)| Edge { a, b, params: linear_on(g), state: DeviceState { w_prime: 1.0, on: true } })
                .collect(),
            input_node: input,
            ground_node: ground,
            seed: 0,
            added_edges: 0,
        }
    }

    #[test]
    fn ohms_law() {
        let t = net(&[(0, 8, 2e-3)], 0, 8);
        let sys = assemble(&t, &[0.0], 3.0).unwrap();
        assert_eq!(sys.dimension(), 9);
        let sol = solve_step(&sys).unwrap();
        let g = 2e-3 + 1e-9;
        assert!((sol.source_current - g * 3.0).abs() < 1e-15);
    }

    #[test]
    fn voltage_divider() {
        let t = net(&[(0, 4, 1e-3), (4, 8, 1e-3)], 0, 8);
        let sol = solve_step(&assemble(&t, &[0.0, 0.0], 2.0).unwrap()).unwrap();
        assert!((sol.node_voltages[4] - 1.0).abs() < 1e-12);
        assert_eq!(sol.node_voltages[8], 0.0);
        assert!((sol.node_voltages[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn parallel_sum() {
        let t = net(&[(0, 8, 1e-3), (8, 0, 3e-3)], 0, 8);
        let sol = solve_step(&assemble(&t, &[0.0, 0.0], 1.5).unwrap()).unwrap();
        let expected = (1e-3 + 3e-3 + 2e-9) * 1.5;
        assert!((sol.source_current - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_source() {
        let t = net(&[(0, 4, 1e-3), (4, 8, 1e-3), (2, 6, 1e-3)], 0, 8);
        let sol = solve_step(&assemble(&t, &[0.0; 3], 0.0).unwrap()).unwrap();
        assert!(sol.node_voltages.iter().all(|&v| v == 0.0));
        assert_eq!(sol.source_current, 0.0);
    }

    #[test]
    fn floating_islands_sit_at_zero() {
        // nodes 2 and 6 touch neither terminal
        let t = net(&[(0, 4, 1e-3), (4, 8, 1e-3), (2, 6, 1e-3)], 0, 8);
        let sol = solve_step(&assemble(&t, &[0.0; 3], 5.0).unwrap()).unwrap();
        assert_eq!(sol.node_voltages[2], 0.0);
        assert_eq!(sol.node_voltages[6], 0.0);
    }

    #[test]
    fn branch_voltage_count_checked() {
        let t = net(&[(0, 8, 1e-3)], 0, 8);
        assert!(assemble(&t, &[], 1.0).is_err());
    }

    #[test]
    fn null_drive() {
        let grid = build_grid(4, 1).unwrap();
        let spec = crate::topology::GenerationSpec::new(crate::topology::BetaShape::new(2.0, 5.0).unwrap(), 4);
        let t = crate::topology::generate_network(&grid, &spec, 3).unwrap();
        let opts = SimOptions { duration: 0.2, ..SimOptions::default() };
        let trace = simulate(&t, &Waveform::sine(0.0, 5.0), &opts).unwrap();
        assert_eq!(trace.len(), 200);
        assert_eq!(trace.switching_events, 0);
        assert!(trace.source_current.iter().all(|&i| i == 0.0));
        assert!(trace.interface_voltages.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn terminals_and_passivity() {
        let grid = build_grid(4, 1).unwrap();
        let spec = crate::topology::GenerationSpec::new(crate::topology::BetaShape::new(10.0, 1.0).unwrap(), 4);
        let t = crate::topology::generate_network(&grid, &spec, 9).unwrap();
        let w = Waveform::sine(8.0, 5.0);
        let trace = simulate(&t, &w, &SimOptions { duration: 0.4, ..SimOptions::default() }).unwrap();
        let last = trace.interface_nodes.len() - 1;
        for (k, row) in trace.interface_voltages.iter().enumerate() {
            assert!((row[0] - w.value(trace.times[k])).abs() <= 1e-12 * 8.0);
            assert_eq!(row[last], 0.0);
            assert!(trace.applied_voltage[k] * trace.source_current[k] >= 0.0);
        }
        assert!(trace.max_residual < RESIDUAL_TOLERANCE);
        assert!(trace.switching_events > 0);
    }

    #[test]
    fn fixed_point_loop_converges() {
        let grid = build_grid(4, 1).unwrap();
        let spec = crate::topology::GenerationSpec::new(crate::topology::BetaShape::new(2.0, 2.0).unwrap(), 2);
        let t = crate::topology::generate_network(&grid, &spec, 1).unwrap();
        let w = Waveform::sine(4.0, 5.0);
        let base = SimOptions { duration: 0.2, ..SimOptions::default() };
        let fp = SimOptions { fixed_point: Some(FixedPoint::default()), ..base };
        let a = simulate(&t, &w, &base).unwrap();
        let b = simulate(&t, &w, &fp).unwrap();
        assert_eq!(a.len(), b.len());
        assert!(b.max_residual < RESIDUAL_TOLERANCE);
    }

    #[test]
    fn decimation_thins_rows() {
        let t = net(&[(0, 8, 1e-3)], 0, 8);
        let opts = SimOptions { duration: 0.1, decimation: 3, ..SimOptions::default() };
        let trace = simulate(&t, &Waveform::Constant { volts: 1.0 }, &opts).unwrap();
        assert_eq!(trace.len(), 34);
        assert!((trace.dt - 3e-3).abs() < 1e-15);
    }

    #[test]
    fn option_validation() {
        let t = net(&[(0, 8, 1e-3)], 0, 8);
        let w = Waveform::Constant { volts: 1.0 };
        assert!(simulate(&t, &w, &SimOptions { dt: 0.0, ..SimOptions::default() }).is_err());
        assert!(simulate(&t, &w, &SimOptions { duration: 1e-4, ..SimOptions::default() }).is_err());
        let bad = Waveform::Constant { volts: f64::NAN };
        assert!(simulate(&t, &bad, &SimOptions::default()).is_err());
    }

    #[test]
    fn disconnected_network_rejected() {
        let t = net(&[(0, 4, 1e-3)], 0, 8);
        assert!(simulate(&t, &Waveform::default(), &SimOptions::default()).is_err());
    }
}
