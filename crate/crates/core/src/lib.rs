//! Simulation of random resistive-switch networks.
//!
//! Networks are grown on a lattice of seed posts with beta-distributed wire
//! lengths, driven through one interface post and grounded at another, and
//! stepped as quasi-static resistive circuits. Each run is scored by the
//! entropy of the principal-component spectrum of the interface signals and
//! by the energy drawn from the source.

pub mod analysis;
pub mod device;
pub mod error;
pub mod harness;
pub mod solver;
pub mod topology;

pub use analysis::{differential_readout, energy, entropy, EnergyResult, EntropyResult};
pub use device::{DecayMode, DeviceParams, DeviceState, Interval, ParamRanges};
pub use error::{Error, Result};
pub use harness::{
    run_hierarchy, run_single, run_sweep, Cell, CellAggregate, ExperimentSettings, GridSpec, HierarchyConfig,
    SweepConfig, SweepOutcome, SweepRecord,
};
pub use solver::{simulate, SimOptions, SimulationTrace, Waveform};
pub use topology::{build_grid, generate_network, BetaShape, GenerationSpec, Grid, NetworkTopology};
