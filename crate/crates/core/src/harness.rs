//! Experiment orchestration: single runs, hierarchies of independent
//! networks, and Cartesian parameter sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{differential_readout, energy, entropy, entropy_of_signals};
use crate::device::ParamRanges;
use crate::error::{Error, Result};
use crate::solver::{simulate, SimOptions, Waveform};
use crate::topology::{build_grid, generate_network, BetaShape, GenerationSpec, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub interface_dim: usize,
    pub subdivision: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { interface_dim: 4, subdivision: 1 }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        build_grid(self.interface_dim, self.subdivision)
    }
}

/// Settings shared by every run of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSettings {
    pub grid: GridSpec,
    pub ranges: ParamRanges,
    pub sim: SimOptions,
    /// Drive frequency (Hz) of the sine input.
    pub frequency: f64,
    /// Mean-center signals before the eigen-decomposition.
    pub center: bool,
    pub edge_count: Option<usize>,
    pub input_node: Option<usize>,
    pub ground_node: Option<usize>,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            ranges: ParamRanges::default(),
            sim: SimOptions::default(),
            frequency: 5.0,
            center: true,
            edge_count: None,
            input_node: None,
            ground_node: None,
        }
    }
}

impl ExperimentSettings {
    pub fn generation_spec(&self, cell: &Cell) -> Result<GenerationSpec> {
        Ok(GenerationSpec {
            shape: BetaShape::new(cell.alpha, cell.beta)?,
            xi: cell.xi,
            edge_count: self.edge_count,
            input_node: self.input_node,
            ground_node: self.ground_node,
            ranges: self.ranges,
        })
    }

    pub fn waveform(&self, amplitude: f64) -> Waveform {
        Waveform::sine(amplitude, self.frequency)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.build()?;
        self.sim.validate()?;
        if !(self.frequency.is_finite() && self.frequency >= 0.0) {
            return Err(Error::param(format!("frequency must be finite and >= 0, got {}", self.frequency)));
        }
        self.generation_spec(&Cell { alpha: 1.0, beta: 1.0, xi: 1, amplitude: 0.0 })?.validate(&grid)
    }
}

/// One point of the (alpha, beta, xi, v) parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub alpha: f64,
    pub beta: f64,
    pub xi: usize,
    /// Drive amplitude (V).
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub alpha: f64,
    pub beta: f64,
    pub xi: usize,
    pub v: f64,
    pub trial: usize,
    pub seed: u64,
    pub entropy_bits: f64,
    pub energy_joules: f64,
    pub switching_events: u64,
    pub edge_count: usize,
    pub error: Option<String>,
}

impl SweepRecord {
    fn failed(cell: &Cell, trial: usize, seed: u64, err: &Error) -> Self {
        Self {
            alpha: cell.alpha,
            beta: cell.beta,
            xi: cell.xi,
            v: cell.amplitude,
            trial,
            seed,
            entropy_bits: f64::NAN,
            energy_joules: f64::NAN,
            switching_events: 0,
            edge_count: 0,
            error: Some(err.to_string()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

fn tag(cell: &Cell, seed: u64, err: Error) -> Error {
    let ctx =
        format!("cell (alpha={}, beta={}, xi={}, v={}) seed {seed}", cell.alpha, cell.beta, cell.xi, cell.amplitude);
    match err {
        Error::Parameter(m) => Error::Parameter(format!("{ctx}: {m}")),
        Error::Generation(m) => Error::Generation(format!("{ctx}: {m}")),
        Error::Numerical { step, message } => Error::Numerical { step, message: format!("{ctx}: {message}") },
        Error::Data(m) => Error::Data(format!("{ctx}: {m}")),
    }
}

/// Generate, simulate and score one network with all interface columns.
pub fn run_single(settings: &ExperimentSettings, cell: &Cell, seed: u64) -> Result<SweepRecord> {
    run_single_inner(settings, cell, seed).map_err(|e| tag(cell, seed, e))
}

fn run_single_inner(settings: &ExperimentSettings, cell: &Cell, seed: u64) -> Result<SweepRecord> {
    let grid = settings.grid.build()?;
    let topo = generate_network(&grid, &settings.generation_spec(cell)?, seed)?;
    let trace = simulate(&topo, &settings.waveform(cell.amplitude), &settings.sim)?;
    let h = entropy(&trace.interface_matrix(), settings.center)?;
    let e = energy(&trace)?;
    Ok(SweepRecord {
        alpha: cell.alpha,
        beta: cell.beta,
        xi: cell.xi,
        v: cell.amplitude,
        trial: 0,
        seed,
        entropy_bits: h.entropy_bits,
        energy_joules: e.energy_joules,
        switching_events: trace.switching_events,
        edge_count: topo.edges.len(),
        error: None,
    })
}

/// K independent networks under one shared input, each read out
/// differentially.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HierarchyConfig {
    pub networks: usize,
    /// Zero-based interface indices `(a, b)`; the signal is `v_a - v_b`.
    pub readout: (usize, usize),
    /// Explicit member seeds; derived from the run seed when empty.
    pub member_seeds: Vec<u64>,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        // interface nodes 2 and 9 in one-based numbering
        Self { networks: 16, readout: (1, 8), member_seeds: Vec::new() }
    }
}

impl HierarchyConfig {
    pub fn with_networks(networks: usize) -> Self {
        Self { networks, ..Self::default() }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if self.networks < 1 {
            return Err(Error::param("hierarchy needs at least one network"));
        }
        let n = grid.interface_dim * grid.interface_dim;
        let (a, b) = self.readout;
        if a == b || a >= n || b >= n {
            return Err(Error::param(format!("readout pair ({a}, {b}) invalid for {n} interface nodes")));
        }
        if !self.member_seeds.is_empty() && self.member_seeds.len() != self.networks {
            return Err(Error::param(format!(
                "{} member seeds given for {} networks",
                self.member_seeds.len(),
                self.networks
            )));
        }
        Ok(())
    }

    /// Seed of member `m`; member 0 reuses the run seed so a single-network
    /// run with the same seed is its matched counterpart.
    pub fn member_seed(&self, seed: u64, m: usize) -> u64 {
        match self.member_seeds.get(m) {
            Some(&s) => s,
            None if m == 0 => seed,
            None => derive_seed(seed, &[m as u64]),
        }
    }
}

struct Member {
    readout: Vec<f64>,
    energy: f64,
    switching_events: u64,
    edges: usize,
}

/// Entropy over the K differential readouts; energy summed over members.
pub fn run_hierarchy(
    settings: &ExperimentSettings,
    cfg: &HierarchyConfig,
    cell: &Cell,
    seed: u64,
) -> Result<SweepRecord> {
    cfg.validate(&settings.grid).map_err(|e| tag(cell, seed, e))?;
    let grid = settings.grid.build()?;
    let spec = settings.generation_spec(cell).map_err(|e| tag(cell, seed, e))?;
    let waveform = settings.waveform(cell.amplitude);
    let members: Vec<Member> = (0..cfg.networks)
        .into_par_iter()
        .map(|m| {
            let s = cfg.member_seed(seed, m);
            let run = || -> Result<Member> {
                let topo = generate_network(&grid, &spec, s)?;
                let trace = simulate(&topo, &waveform, &settings.sim)?;
                Ok(Member {
                    readout: differential_readout(&trace, cfg.readout.0, cfg.readout.1)?,
                    energy: energy(&trace)?.energy_joules,
                    switching_events: trace.switching_events,
                    edges: topo.edges.len(),
                })
            };
            run().map_err(|e| tag(cell, s, e))
        })
        .collect::<Result<_>>()?;

    let signals: Vec<Vec<f64>> = members.iter().map(|m| m.readout.clone()).collect();
    let h = entropy_of_signals(&signals, settings.center).map_err(|e| tag(cell, seed, e))?;
    Ok(SweepRecord {
        alpha: cell.alpha,
        beta: cell.beta,
        xi: cell.xi,
        v: cell.amplitude,
        trial: 0,
        seed,
        entropy_bits: h.entropy_bits,
        energy_joules: members.iter().map(|m| m.energy).sum(),
        switching_events: members.iter().map(|m| m.switching_events).sum(),
        edge_count: members.iter().map(|m| m.edges).sum(),
        error: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub xis: Vec<usize>,
    pub amplitudes: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub settings: ExperimentSettings,
    /// Run every cell as a hierarchy instead of a single network.
    pub hierarchy: Option<HierarchyConfig>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let shape = vec![1.0, 2.0, 3.0, 5.0, 7.0, 10.0];
        Self {
            alphas: shape.clone(),
            betas: shape,
            xis: vec![2, 4, 6, 8],
            amplitudes: vec![1.0, 2.0, 4.0, 8.0],
            trials: 10,
            base_seed: 0,
            settings: ExperimentSettings::default(),
            hierarchy: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, empty) in [
            ("alphas", self.alphas.is_empty()),
            ("betas", self.betas.is_empty()),
            ("xis", self.xis.is_empty()),
            ("amplitudes", self.amplitudes.is_empty()),
        ] {
            if empty {
                return Err(Error::param(format!("{name} must not be empty")));
            }
        }
        if self.trials < 1 {
            return Err(Error::param("trials must be >= 1"));
        }
        for &a in self.alphas.iter().chain(&self.betas) {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::param(format!("beta shape parameters must be > 0, got {a}")));
            }
        }
        if self.xis.contains(&0) {
            return Err(Error::param("xi values must be >= 1"));
        }
        if self.amplitudes.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("amplitudes must be finite"));
        }
        self.settings.validate()?;
        if let Some(h) = &self.hierarchy {
            h.validate(&self.settings.grid)?;
        }
        Ok(())
    }

    /// Work units in canonical order: alpha, beta, xi, v, trial.
    pub fn units(&self) -> Vec<Unit> {
        let mut out = Vec::with_capacity(self.record_count());
        for (ai, &alpha) in self.alphas.iter().enumerate() {
            for (bi, &beta) in self.betas.iter().enumerate() {
                for (xi_i, &xi) in self.xis.iter().enumerate() {
                    for (vi, &amplitude) in self.amplitudes.iter().enumerate() {
                        for trial in 0..self.trials {
                            let idx = [ai, bi, xi_i, vi, trial].map(|i| i as u64);
                            out.push(Unit {
                                cell: Cell { alpha, beta, xi, amplitude },
                                trial,
                                seed: derive_seed(self.base_seed, &idx),
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn record_count(&self) -> usize {
        self.alphas.len() * self.betas.len() * self.xis.len() * self.amplitudes.len() * self.trials
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unit {
    pub cell: Cell,
    pub trial: usize,
    pub seed: u64,
}

/// Per-cell statistics over successful trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub alpha: f64,
    pub beta: f64,
    pub xi: usize,
    pub v: f64,
    pub trials: usize,
    pub failed: usize,
    pub entropy_mean: f64,
    pub entropy_std: f64,
    pub energy_mean: f64,
    pub energy_std: f64,
    pub switching_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    pub aggregates: Vec<CellAggregate>,
}

impl SweepOutcome {
    pub fn failed(&self) -> usize {
        self.records.iter().filter(|r| !r.is_ok()).count()
    }
}

/// Run every unit of the sweep on up to `workers` threads (0 = all cores).
///
/// Failed units are recorded with their error and never abort the sweep.
pub fn run_sweep(cfg: &SweepConfig, workers: usize) -> Result<SweepOutcome> {
    cfg.validate()?;
    let units = cfg.units();
    let run = |u: &Unit| {
        let res = match &cfg.hierarchy {
            Some(h) => run_hierarchy(&cfg.settings, h, &u.cell, u.seed),
            None => run_single(&cfg.settings, &u.cell, u.seed),
        };
        match res {
            Ok(r) => SweepRecord { trial: u.trial, ..r },
            Err(e) => {
                log::warn!("{e}");
                SweepRecord::failed(&u.cell, u.trial, u.seed, &e)
            }
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::param(format!("worker pool: {e}")))?;
    // indexed collect keeps canonical order regardless of scheduling
    let records: Vec<SweepRecord> = pool.install(|| units.par_iter().map(run).collect());
    let aggregates = aggregate(&records, cfg.trials);
    Ok(SweepOutcome { records, aggregates })
}

/// Group consecutive runs of `trials` records (canonical order) into cells.
pub fn aggregate(records: &[SweepRecord], trials: usize) -> Vec<CellAggregate> {
    records
        .chunks(trials.max(1))
        .map(|chunk| {
            let ok: Vec<&SweepRecord> = chunk.iter().filter(|r| r.is_ok()).collect();
            let h: Vec<f64> = ok.iter().map(|r| r.entropy_bits).collect();
            let e: Vec<f64> = ok.iter().map(|r| r.energy_joules).collect();
            let s: Vec<f64> = ok.iter().map(|r| r.switching_events as f64).collect();
            let first = &chunk[0];
            CellAggregate {
                alpha: first.alpha,
                beta: first.beta,
                xi: first.xi,
                v: first.v,
                trials: ok.len(),
                failed: chunk.len() - ok.len(),
                entropy_mean: mean(&h),
                entropy_std: std_dev(&h),
                energy_mean: mean(&e),
                energy_std: std_dev(&e),
                switching_mean: mean(&s),
            }
        })
        .collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Sample standard deviation (n - 1); zero for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Least-squares line through `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LineFit { slope, intercept: my - slope * mx, r_squared })
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable, order-sensitive hash of a base seed and a coordinate tuple.
pub fn derive_seed(base: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(splitmix(base), |h, &c| splitmix(h ^ splitmix(c.wrapping_add(1))))
}
