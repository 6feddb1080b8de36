use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use switchnet_core::harness::{GridSpec, HierarchyConfig, SweepConfig};
use switchnet_core::solver::{SimOptions, Waveform};
use switchnet_core::topology::{BetaShape, GenerationSpec};
use switchnet_core::ParamRanges;

use crate::CliError;

/// Network morphology block of a run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkBlock {
    pub alpha: f64,
    pub beta: f64,
    pub xi: usize,
    pub edge_count: Option<usize>,
    pub input_node: Option<usize>,
    pub ground_node: Option<usize>,
}

impl Default for NetworkBlock {
    fn default() -> Self {
        Self { alpha: 2.0, beta: 5.0, xi: 4, edge_count: None, input_node: None, ground_node: None }
    }
}

/// Differential readout and centering options for `analyze`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisBlock {
    pub center: bool,
    pub readout: Option<(usize, usize)>,
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        Self { center: true, readout: None }
    }
}

/// Every subcommand reads the blocks it needs and ignores the rest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub ranges: ParamRanges,
    pub network: NetworkBlock,
    pub waveform: Waveform,
    pub sim: SimOptions,
    pub analysis: AnalysisBlock,
    pub sweep: SweepConfig,
    pub hierarchy: HierarchyConfig,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub workers: usize,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn generation_spec(&self) -> Result<GenerationSpec, CliError> {
        let n = &self.network;
        let shape =
            BetaShape::new(n.alpha, n.beta).map_err(|e| CliError::Config(format!("network.alpha/beta: {e}")))?;
        Ok(GenerationSpec {
            shape,
            xi: n.xi,
            edge_count: n.edge_count,
            input_node: n.input_node,
            ground_node: n.ground_node,
            ranges: self.ranges,
        })
    }

    /// The sweep block with command-line overrides applied.
    pub fn sweep_config(&self, seed: Option<u64>, no_center: bool, hierarchy: bool) -> SweepConfig {
        let mut cfg = self.sweep.clone();
        if let Some(s) = seed {
            cfg.base_seed = s;
        }
        if no_center {
            cfg.settings.center = false;
        }
        if hierarchy {
            cfg.hierarchy = Some(self.hierarchy.clone());
        }
        cfg
    }
}
