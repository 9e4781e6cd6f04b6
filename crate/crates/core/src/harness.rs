//! Reproducible Monte Carlo sweeps of the optimal received power.
//!
//! Trials are grouped in blocks of `block_len`: the BS-RIS channels, the
//! LoS angles and the target reflections are drawn once per block, the
//! RIS-user channel once per trial. Every draw comes from a stream keyed by
//! `(block or trial index, link tag)`, and per-trial powers are reduced with
//! a fixed pairwise summation tree, so results do not depend on the number
//! of worker threads.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::arch::{GroupSizePolicy, RisArchitecture};
use crate::channels::{
    draw_los_angles, los_vector, rayleigh_vector, rician_vector, spatial_frequency, PathLossModel,
    ScenarioChannels,
};
use crate::error::{Result, RisError};
use crate::linalg::ComplexVector;
use crate::rng::RngStream;
use crate::scaling::{expected_power_los, expected_power_rayleigh, ScalingQuery};
use crate::solver::{generate_targets, solve, TargetMode, TargetReflections};

pub const CSV_HEADER: &str = "N,G,Gs,L,channel,trials,seed,mean_power_W,stderr_W,analytic_power_W";

const TAG_RIS_USER: u64 = 1;
const TAG_TARGETS: u64 = 2;
const TAG_ANGLES: u64 = 3;
const TAG_BS_RIS: u64 = 0x100;

/// BS-RIS channel family; the RIS-user link is always Rayleigh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelKind {
    Rayleigh,
    LoS,
    Rician { k_db: f64 },
}

impl ChannelKind {
    pub fn label(&self) -> &'static str {
        match self {
            ChannelKind::Rayleigh => "rayleigh",
            ChannelKind::LoS => "los",
            ChannelKind::Rician { .. } => "rician",
        }
    }
}

/// Link distances in meters and the path-loss model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub serving_bs_ris_m: f64,
    pub other_bs_ris_m: f64,
    pub ris_user_m: f64,
    pub path_loss: PathLossModel,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            serving_bs_ris_m: 2.0,
            other_bs_ris_m: 4.0,
            ris_user_m: 20.0,
            path_loss: PathLossModel::default(),
        }
    }
}

impl Geometry {
    pub fn ris_user_gain(&self) -> Result<f64> {
        self.path_loss.ris_user_gain(self.ris_user_m)
    }

    /// BS-RIS gain of operator `l` (0-based; 0 is the serving operator).
    pub fn bs_ris_gain(&self, l: usize) -> Result<f64> {
        let d = if l == 0 {
            self.serving_bs_ris_m
        } else {
            self.other_bs_ris_m
        };
        self.path_loss.bs_ris_gain(d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub operators: usize,
    pub n_values: Vec<usize>,
    pub architectures: Vec<GroupSizePolicy>,
    pub channel: ChannelKind,
    /// Fixed BS-RIS arrival angles (rad), one per operator; redrawn per
    /// block when absent. Ignored for Rayleigh.
    pub los_angles: Option<Vec<f64>>,
    pub trials: usize,
    pub block_len: usize,
    pub seed: u64,
    pub geometry: Geometry,
    pub tx_power_w: f64,
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            operators: 2,
            n_values: vec![16, 32, 64, 128],
            architectures: vec![
                GroupSizePolicy::Fixed(1),
                GroupSizePolicy::Fixed(2),
                GroupSizePolicy::Fixed(4),
                GroupSizePolicy::FullyConnected,
            ],
            channel: ChannelKind::Rayleigh,
            los_angles: None,
            trials: 200_000,
            block_len: 20,
            seed: 0,
            geometry: Geometry::default(),
            tx_power_w: 10.0,
            workers: None,
        }
    }
}

fn bad(field: &str, reason: impl Into<String>) -> RisError {
    RisError::config(field, reason)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.operators < 2 {
            return Err(bad("L", "need at least two operators"));
        }
        if self.n_values.is_empty() {
            return Err(bad("N_values", "must list at least one RIS size"));
        }
        if self.n_values.contains(&0) {
            return Err(bad("N_values", "RIS sizes must be positive"));
        }
        if self.architectures.is_empty() {
            return Err(bad("group_sizes", "must list at least one architecture"));
        }
        for policy in &self.architectures {
            if let GroupSizePolicy::Fixed(gs) = policy {
                if *gs == 0 {
                    return Err(bad("group_sizes", "group size must be positive"));
                }
                if let Some(n) = self.n_values.iter().find(|&&n| n % gs != 0) {
                    return Err(bad(
                        "group_sizes",
                        format!("N = {n} is not divisible by Gs = {gs}"),
                    ));
                }
            }
        }
        if self.trials == 0 {
            return Err(bad("trials", "must be at least 1"));
        }
        if self.block_len == 0 {
            return Err(bad("block_len", "must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(bad("workers", "must be at least 1"));
        }
        if !(self.tx_power_w > 0.0) || !self.tx_power_w.is_finite() {
            return Err(bad("tx_power_W", "must be positive"));
        }
        let g = &self.geometry;
        for (field, d) in [
            ("serving_bs_ris_m", g.serving_bs_ris_m),
            ("other_bs_ris_m", g.other_bs_ris_m),
            ("ris_user_m", g.ris_user_m),
        ] {
            if !(d > 0.0) || !d.is_finite() {
                return Err(bad(field, "distance must be positive"));
            }
        }
        g.path_loss
            .validate()
            .map_err(|e| bad("alpha", e.to_string()))?;
        if let ChannelKind::Rician { k_db } = self.channel {
            if !k_db.is_finite() {
                return Err(bad("rician_k_dB", "must be finite"));
            }
        }
        if let Some(angles) = &self.los_angles {
            if angles.len() != self.operators {
                return Err(bad(
                    "los_angles_rad",
                    format!(
                        "need one angle per operator ({}), got {}",
                        self.operators,
                        angles.len()
                    ),
                ));
            }
            if let Some(a) = angles
                .iter()
                .find(|a| !(a.abs() < std::f64::consts::FRAC_PI_2))
            {
                return Err(bad(
                    "los_angles_rad",
                    format!("angle {a} outside (-pi/2, pi/2)"),
                ));
            }
        }
        Ok(())
    }

    fn block_count(&self) -> usize {
        self.trials.div_ceil(self.block_len)
    }
}

/// One row of a sweep: a single `(N, architecture)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub groups: usize,
    pub group_size: usize,
    pub operators: usize,
    pub channel: ChannelKind,
    pub trials: usize,
    pub seed: u64,
    pub mean_power_w: f64,
    pub stderr_w: f64,
    pub analytic_power_w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

impl SweepResult {
    /// CSV with [`CSV_HEADER`], 17 significant digits, LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.n,
                r.groups,
                r.group_size,
                r.operators,
                r.channel.label(),
                r.trials,
                r.seed,
                sci(r.mean_power_w),
                sci(r.stderr_w),
                r.analytic_power_w.map(sci).unwrap_or_default()
            );
        }
        out
    }

    /// Rows of one group-size policy, ordered by N.
    pub fn series(&self, policy: GroupSizePolicy) -> Vec<&SweepRow> {
        let mut rows: Vec<&SweepRow> = self
            .rows
            .iter()
            .filter(|r| policy.group_size(r.n) == r.group_size)
            .collect();
        rows.sort_by_key(|r| r.n);
        rows
    }
}

/// Sum with a fixed binary tree, independent of how the input was produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Slow-timescale state shared by all trials of one block.
struct BlockState {
    h_it: Vec<ComplexVector>,
    targets: TargetReflections,
}

fn draw_block(config: &ExperimentConfig, arch: &RisArchitecture, block: u64) -> Result<BlockState> {
    let n = arch.n();
    let l = config.operators;
    let seed = config.seed;
    let angles = match (config.channel, &config.los_angles) {
        (ChannelKind::Rayleigh, _) => None,
        (_, Some(fixed)) => Some(fixed.clone()),
        (_, None) => {
            let mut rng = RngStream::derived(seed, &[block, TAG_ANGLES]).generator();
            Some(draw_los_angles(l, &mut rng))
        }
    };
    let h_it = (0..l)
        .map(|op| {
            let rho = config.geometry.bs_ris_gain(op)?;
            let mut rng = RngStream::derived(seed, &[block, TAG_BS_RIS + op as u64]).generator();
            match (config.channel, &angles) {
                (ChannelKind::Rayleigh, _) => Ok(rayleigh_vector(n, rho, &mut rng)),
                (ChannelKind::LoS, Some(a)) => los_vector(n, a[op], rho),
                (ChannelKind::Rician { k_db }, Some(a)) => {
                    rician_vector(n, a[op], rho, k_db, &mut rng)
                }
                _ => unreachable!("angles are drawn for every non-Rayleigh channel"),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    // targets only need h_IT, so a placeholder h_RI is enough here
    let placeholder = ScenarioChannels::new(ComplexVector::zeros(n), h_it.clone())?;
    let mut rng = RngStream::derived(seed, &[block, TAG_TARGETS]).generator();
    let targets = generate_targets(&placeholder, arch, TargetMode::Haar, &mut rng)?;
    Ok(BlockState { h_it, targets })
}

fn trial_in_block(
    config: &ExperimentConfig,
    arch: &RisArchitecture,
    state: &BlockState,
    trial: u64,
) -> Result<f64> {
    let rho_ri = config.geometry.ris_user_gain()?;
    let mut rng = RngStream::derived(config.seed, &[trial, TAG_RIS_USER]).generator();
    let h_ri = rayleigh_vector(arch.n(), rho_ri, &mut rng);
    let ch = ScenarioChannels::new(h_ri, state.h_it.clone())?;
    let sol = solve(&ch, &state.targets, arch)
        .map_err(|e| RisError::InvalidArgument(format!("trial {trial} ({arch}): {e}")))?;
    Ok(config.tx_power_w * sol.optimal_power)
}

/// Received power of one trial; fully determined by the seed and the index.
pub fn run_trial(
    config: &ExperimentConfig,
    arch: &RisArchitecture,
    trial_index: u64,
) -> Result<f64> {
    config.validate()?;
    let block = trial_index / config.block_len as u64;
    let state = draw_block(config, arch, block)?;
    trial_in_block(config, arch, &state, trial_index)
}

/// Per-trial powers of one block, in trial order.
pub fn run_block(
    config: &ExperimentConfig,
    arch: &RisArchitecture,
    block: u64,
) -> Result<Vec<f64>> {
    let state = draw_block(config, arch, block)?;
    let start = block * config.block_len as u64;
    let end = (start + config.block_len as u64).min(config.trials as u64);
    (start..end)
        .map(|t| trial_in_block(config, arch, &state, t))
        .collect()
}

/// Mean and standard error of block-correlated samples. Trials in one
/// block share the BS-RIS channels, so the error is estimated from block
/// totals (cluster-robust); with `block_len = 1` this is `sd / sqrt(n)`.
pub fn mean_and_stderr(values: &[f64], block_len: usize) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let clusters: Vec<f64> = values
        .chunks(block_len.max(1))
        .map(|c| {
            let r: Vec<f64> = c.iter().map(|x| x - mean).collect();
            pairwise_sum(&r)
        })
        .collect();
    let c = clusters.len();
    let nf = n as f64;
    let var = if c >= 2 {
        let sq: Vec<f64> = clusters.iter().map(|s| s * s).collect();
        c as f64 / (c as f64 - 1.0) * pairwise_sum(&sq) / (nf * nf)
    } else {
        let sq: Vec<f64> = values.iter().map(|x| (x - mean).powi(2)).collect();
        pairwise_sum(&sq) / (nf - 1.0) / nf
    };
    (mean, var.sqrt())
}

/// Closed-form expected power for a cell, where one exists.
pub fn analytic_power(config: &ExperimentConfig, arch: &RisArchitecture) -> Result<Option<f64>> {
    let q = ScalingQuery::new(
        *arch,
        config.operators,
        config.geometry.ris_user_gain()?,
        config.geometry.bs_ris_gain(0)?,
    )?;
    let p = match (config.channel, &config.los_angles) {
        (ChannelKind::Rayleigh, _) => Some(expected_power_rayleigh(&q)?),
        (ChannelKind::LoS, Some(a)) if config.operators == 2 => {
            let delta_mu = spatial_frequency(a[1]) - spatial_frequency(a[0]);
            Some(expected_power_los(&q, delta_mu)?)
        }
        _ => None,
    };
    Ok(p.map(|p| p * config.tx_power_w))
}

fn cells(config: &ExperimentConfig) -> Result<Vec<RisArchitecture>> {
    let mut out = Vec::new();
    for &n in &config.n_values {
        for policy in &config.architectures {
            let arch = policy.architecture(n)?;
            if !out.contains(&arch) {
                out.push(arch);
            }
        }
    }
    Ok(out)
}

/// Run every `(N, architecture)` cell of the configuration.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(w) = config.workers {
            b = b.num_threads(w);
        }
        b.build()
            .map_err(|e| RisError::InvalidArgument(format!("thread pool: {e}")))?
    };
    let blocks = config.block_count() as u64;
    let rows = cells(config)?
        .into_iter()
        .map(|arch| {
            let per_block = pool.install(|| {
                (0..blocks)
                    .into_par_iter()
                    .map(|b| run_block(config, &arch, b))
                    .collect::<Result<Vec<Vec<f64>>>>()
            })?;
            let values: Vec<f64> = per_block.into_iter().flatten().collect();
            let (mean, stderr) = mean_and_stderr(&values, config.block_len);
            Ok(SweepRow {
                n: arch.n(),
                groups: arch.groups(),
                group_size: arch.group_size(),
                operators: config.operators,
                channel: config.channel,
                trials: config.trials,
                seed: config.seed,
                mean_power_w: mean,
                stderr_w: stderr,
                analytic_power_w: analytic_power(config, &arch)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { rows })
}

/// Least-squares slope of `log(power)` against `log(N)`.
pub fn fit_scaling_exponent(points: &[(usize, f64)]) -> Result<f64> {
    let mut distinct: Vec<usize> = points.iter().map(|p| p.0).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(RisError::InsufficientPoints(distinct.len()));
    }
    if let Some((n, _)) = points.iter().find(|(_, p)| !(*p > 0.0)) {
        return Err(RisError::NonPositivePower(*n));
    }
    let xs: Vec<f64> = points.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, p)| p.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Slope fitted to the mean powers of a sweep series.
pub fn fit_rows(rows: &[&SweepRow]) -> Result<f64> {
    let pts: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.mean_power_w)).collect();
    fit_scaling_exponent(&pts)
}
