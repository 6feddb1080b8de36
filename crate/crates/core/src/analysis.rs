//! Capacity and cost measures over recorded signals.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::SimulationTrace;

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const EIGEN_NOISE_FLOOR: f64 = 1e-12;

/// Normalized principal-component spectrum and its Shannon entropy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyResult {
    /// Normalized eigenvalues, descending, summing to one (all zero when
    /// `degenerate`).
    pub spectrum: Vec<f64>,
    pub entropy_bits: f64,
    pub n_signals: usize,
    /// The signal matrix had no variance at all.
    pub degenerate: bool,
}

/// Entropy of the normalized eigenvalues of `XᵀX` for a `steps x signals`
/// matrix.
///
/// With `center` each column has its mean removed first, so constant
/// offsets do not register as a principal direction.
pub fn entropy(x: &DMatrix<f64>, center: bool) -> Result<EntropyResult> {
    let (rows, cols) = x.shape();
    if rows < 2 {
        return Err(Error::data(format!("need at least 2 samples, got {rows}")));
    }
    if cols < 1 {
        return Err(Error::data("need at least one signal"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("signal matrix contains non-finite entries"));
    }

    let mut x = x.clone();
    if center {
        for mut col in x.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
    }
    let c = x.tr_mul(&x);
    let mut eig: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
    let max = eig.iter().copied().fold(0.0f64, f64::max);
    for v in &mut eig {
        if *v < EIGEN_NOISE_FLOOR * max {
            *v = 0.0;
        }
    }
    eig.sort_by(|a, b| b.total_cmp(a));

    let total: f64 = eig.iter().sum();
    if total <= 0.0 {
        return Ok(EntropyResult { spectrum: vec![0.0; cols], entropy_bits: 0.0, n_signals: cols, degenerate: true });
    }
    let spectrum: Vec<f64> = eig.iter().map(|v| v / total).collect();
    let h = -spectrum.iter().filter(|&&l| l > 0.0).map(|&l| l * l.log2()).sum::<f64>();
    Ok(EntropyResult { spectrum, entropy_bits: h.max(0.0), n_signals: cols, degenerate: false })
}

/// Entropy of column signals given as separate vectors of equal length.
pub fn entropy_of_signals(signals: &[Vec<f64>], center: bool) -> Result<EntropyResult> {
    let rows = signals.first().map_or(0, Vec::len);
    if signals.iter().any(|s| s.len() != rows) {
        return Err(Error::data("signals have different lengths"));
    }
    entropy(&DMatrix::from_fn(rows, signals.len(), |r, c| signals[c][r]), center)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyResult {
    pub energy_joules: f64,
    pub duration: f64,
    pub mean_power: f64,
}

/// Left-Riemann sum of `v_in * i_src * dt` over the trace.
pub fn energy(trace: &SimulationTrace) -> Result<EnergyResult> {
    if trace.applied_voltage.len() != trace.source_current.len() || trace.times.len() != trace.source_current.len() {
        return Err(Error::data(format!(
            "trace series lengths differ: {} times, {} voltages, {} currents",
            trace.times.len(),
            trace.applied_voltage.len(),
            trace.source_current.len()
        )));
    }
    energy_of_series(&trace.applied_voltage, &trace.source_current, trace.dt)
}

pub fn energy_of_series(volts: &[f64], amps: &[f64], dt: f64) -> Result<EnergyResult> {
    if volts.len() != amps.len() {
        return Err(Error::data(format!("{} voltages vs {} currents", volts.len(), amps.len())));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::data(format!("sample spacing must be > 0, got {dt}")));
    }
    let energy_joules = volts.iter().zip(amps).map(|(v, i)| v * i).sum::<f64>() * dt;
    let duration = volts.len() as f64 * dt;
    let mean_power = if duration > 0.0 { energy_joules / duration } else { 0.0 };
    Ok(EnergyResult { energy_joules, duration, mean_power })
}

/// `v_a(t) - v_b(t)` for two interface columns of the trace.
pub fn differential_readout(trace: &SimulationTrace, node_a: usize, node_b: usize) -> Result<Vec<f64>> {
    let n = trace.interface_nodes.len();
    if node_a >= n || node_b >= n {
        return Err(Error::param(format!("readout nodes ({node_a}, {node_b}) out of range for {n} interface nodes")));
    }
    if node_a == node_b {
        return Err(Error::param("readout nodes must differ"));
    }
    Ok(trace.interface_voltages.iter().map(|row| row[node_a] - row[node_b]).collect())
}
