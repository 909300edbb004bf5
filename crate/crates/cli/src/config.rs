//! Experiment configuration: one TOML file, every key optional, unknown keys
//! rejected. Command-line flags are merged on top.

use std::path::{Path, PathBuf};

use anyhow::Context;
use dqs_core::experiments::{ArmPhase, RfTask};
use dqs_core::fisher::FisherMethod;
use dqs_core::protocols::{ProbeKind, SensingTask, SensorNetworkSpec};
use serde::{Deserialize, Serialize};

use crate::Invalid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transmissivities: Option<Vec<f64>>,
    /// Shared transmissivity when `transmissivities` is absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Total photon budget `N_S`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub photon_budget: Option<f64>,
    /// Photons per node `n_S` (scaling sweep, phase).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub photons_per_node: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<ProbeKind>,
    /// Per-node displacements for `estimate`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes_grid: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_grid: Option<Vec<f64>>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<FisherMethod>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<RfTask>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phases: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flip: Option<ArmPhase>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuned_node: Option<usize>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo_angles: Option<Vec<f64>>,
}

/// Values given on the command line; each one that is set wins.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(|e| Invalid::new("config", format!("{e:#}")))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).map_err(|e| Invalid::new("config", e.to_string()).into())
    }

    pub fn merge(mut self, o: &Overrides) -> Self {
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.trials.is_some() {
            self.trials = o.trials;
        }
        if o.out.is_some() {
            self.out = o.out.clone();
        }
        if o.format.is_some() {
            self.format = o.format;
        }
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn trials_or(&self, default: usize) -> usize {
        self.trials.unwrap_or(default)
    }

    /// Node count implied by the weights, the transmissivities or `modes`,
    /// which must agree when several are given.
    pub fn node_count(&self, default: usize) -> anyhow::Result<usize> {
        let mut m = self.modes;
        for (field, len) in [
            ("weights", self.weights.as_ref().map(Vec::len)),
            (
                "transmissivities",
                self.transmissivities.as_ref().map(Vec::len),
            ),
        ] {
            if let Some(len) = len {
                match m {
                    Some(prev) if prev != len => {
                        return Err(Invalid::new(
                            field,
                            format!("has {len} entries but the network has {prev} nodes"),
                        )
                        .into())
                    }
                    _ => m = Some(len),
                }
            }
        }
        Ok(m.unwrap_or(default))
    }

    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or(1.0)
    }

    pub fn transmissivities(&self, modes: usize) -> Vec<f64> {
        self.transmissivities
            .clone()
            .unwrap_or_else(|| vec![self.eta(); modes])
    }

    /// Network spec with equal weights unless `weights` is given.
    pub fn network(
        &self,
        default_modes: usize,
        default_budget: f64,
    ) -> anyhow::Result<SensorNetworkSpec> {
        let m = self.node_count(default_modes)?;
        if m == 0 {
            return Err(Invalid::new("modes", "must be at least 1").into());
        }
        let weights = self
            .weights
            .clone()
            .unwrap_or_else(|| vec![1.0 / m as f64; m]);
        Ok(SensorNetworkSpec::new(
            weights,
            self.transmissivities(m),
            self.photon_budget.unwrap_or(default_budget),
            self.kind.unwrap_or(ProbeKind::Entangled),
            SensingTask::Displacement,
        )?)
    }
}
