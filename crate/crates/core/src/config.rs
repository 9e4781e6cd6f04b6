//! TOML sweep configuration. Every key is optional and defaults to the
//! reference setup; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::arch::GroupSizePolicy;
use crate::channels::PathLossModel;
use crate::error::{Result, RisError};
use crate::harness::{ChannelKind, ExperimentConfig, Geometry};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ScenarioSection {
    #[serde(rename = "L")]
    operators: usize,
    #[serde(rename = "N_values")]
    n_values: Vec<usize>,
    #[serde(rename = "tx_power_W")]
    tx_power_w: f64,
    serving_bs_ris_m: f64,
    other_bs_ris_m: f64,
    ris_user_m: f64,
    alpha_bs_ris: f64,
    alpha_ris_user: f64,
    #[serde(rename = "l0_dB")]
    l0_db: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        let g = e.geometry;
        Self {
            operators: e.operators,
            n_values: e.n_values,
            tx_power_w: e.tx_power_w,
            serving_bs_ris_m: g.serving_bs_ris_m,
            other_bs_ris_m: g.other_bs_ris_m,
            ris_user_m: g.ris_user_m,
            alpha_bs_ris: g.path_loss.exponent_bi,
            alpha_ris_user: g.path_loss.exponent_ru,
            l0_db: g.path_loss.l0_db,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ArchitecturesSection {
    group_sizes: Vec<usize>,
    include_fully_connected: bool,
}

impl Default for ArchitecturesSection {
    fn default() -> Self {
        Self {
            group_sizes: vec![1, 2, 4],
            include_fully_connected: true,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ChannelsSection {
    kind: String,
    #[serde(rename = "rician_k_dB")]
    rician_k_db: f64,
    los_angles_rad: Option<Vec<f64>>,
}

impl Default for ChannelsSection {
    fn default() -> Self {
        Self {
            kind: "rayleigh".into(),
            rician_k_db: 2.0,
            los_angles_rad: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct MonteCarloSection {
    trials: usize,
    block_len: usize,
    seed: u64,
    workers: Option<usize>,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        Self {
            trials: e.trials,
            block_len: e.block_len,
            seed: e.seed,
            workers: None,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct OutputSection {
    csv: Option<PathBuf>,
    svg: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ConfigDocument {
    scenario: ScenarioSection,
    architectures: ArchitecturesSection,
    channels: ChannelsSection,
    montecarlo: MonteCarloSection,
    output: OutputSection,
}

/// A parsed configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub experiment: ExperimentConfig,
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

fn field_of(message: &str) -> String {
    // toml reports e.g. "unknown field `foo`, expected one of ..."
    message
        .split('`')
        .nth(1)
        .map(str::to_owned)
        .unwrap_or_else(|| "config".into())
}

impl SweepConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let doc: ConfigDocument = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_owned();
            RisError::InvalidConfig {
                field: field_of(&msg),
                reason: e.to_string().trim_end().to_owned(),
            }
        })?;
        let channel = match doc.channels.kind.to_ascii_lowercase().as_str() {
            "rayleigh" => ChannelKind::Rayleigh,
            "los" => ChannelKind::LoS,
            "rician" => ChannelKind::Rician {
                k_db: doc.channels.rician_k_db,
            },
            other => {
                return Err(RisError::config(
                    "kind",
                    format!("unknown channel kind `{other}` (rayleigh, los, rician)"),
                ))
            }
        };
        let mut architectures: Vec<GroupSizePolicy> = doc
            .architectures
            .group_sizes
            .iter()
            .map(|&gs| GroupSizePolicy::Fixed(gs))
            .collect();
        if doc.architectures.include_fully_connected {
            architectures.push(GroupSizePolicy::FullyConnected);
        }
        let s = doc.scenario;
        let experiment = ExperimentConfig {
            operators: s.operators,
            n_values: s.n_values,
            architectures,
            channel,
            los_angles: doc.channels.los_angles_rad,
            trials: doc.montecarlo.trials,
            block_len: doc.montecarlo.block_len,
            seed: doc.montecarlo.seed,
            geometry: Geometry {
                serving_bs_ris_m: s.serving_bs_ris_m,
                other_bs_ris_m: s.other_bs_ris_m,
                ris_user_m: s.ris_user_m,
                path_loss: PathLossModel {
                    l0_db: s.l0_db,
                    exponent_ru: s.alpha_ris_user,
                    exponent_bi: s.alpha_bs_ris,
                },
            },
            tx_power_w: s.tx_power_w,
            workers: doc.montecarlo.workers,
        };
        experiment.validate()?;
        Ok(Self {
            experiment,
            csv: doc.output.csv,
            svg: doc.output.svg,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| RisError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}
