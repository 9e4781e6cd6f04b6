//! Exact expected optimal received power under Rayleigh and LoS BS-RIS
//! channels, the LoS Dirichlet factor, and the large-`N` coefficients.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::arch::{ArchitectureKind, GroupSizePolicy, RisArchitecture};
use crate::error::{Result, RisError};

/// Below this `|sin(dmu/2)|` the Dirichlet factor uses its Taylor expansion.
pub const DIRICHLET_SINGULARITY: f64 = 1e-6;

// Bernoulli coefficients B_2k / (2k (2k-1)) of the Stirling series.
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
];
const STIRLING_MIN: f64 = 10.0;

fn stirling_tail(x: f64) -> f64 {
    let inv2 = 1.0 / (x * x);
    let mut p = 1.0 / x;
    let mut s = 0.0;
    for c in STIRLING {
        s += c * p;
        p *= inv2;
    }
    s
}

/// `lnG(a) - lnG(b)` for `a, b >= STIRLING_MIN`, written so that the large
/// `(x - 1/2) ln x` terms cancel analytically.
fn stirling_difference(a: f64, b: f64) -> f64 {
    let delta = a - b;
    (a - 0.5) * (delta / b).ln_1p() + delta * b.ln() - delta + stirling_tail(a) - stirling_tail(b)
}

/// `Gamma(a) / Gamma(b)` via log-Gamma differences, accurate for arguments
/// up to 1e7.
pub fn gamma_ratio(a: f64, b: f64) -> Result<f64> {
    for x in [a, b] {
        if !(x > 0.0) || !x.is_finite() {
            return Err(RisError::NonPositiveArgument(x));
        }
    }
    Ok(ln_gamma_ratio(a, b).exp())
}

fn ln_gamma_ratio(a: f64, b: f64) -> f64 {
    if a < STIRLING_MIN && b < STIRLING_MIN {
        return ln_gamma(a) - ln_gamma(b);
    }
    // lnG(x) = lnG(x + 1) - ln x moves both arguments into the Stirling range
    let (mut a, mut b, mut acc) = (a, b, 0.0);
    while a < STIRLING_MIN {
        acc -= a.ln();
        a += 1.0;
    }
    while b < STIRLING_MIN {
        acc += b.ln();
        b += 1.0;
    }
    acc + stirling_difference(a, b)
}

/// `(1/Gs) (sin(Gs dmu/2) / sin(dmu/2))^2`, in `[0, Gs]`.
pub fn dirichlet_factor(group_size: usize, delta_mu: f64) -> f64 {
    let gs = group_size as f64;
    let half = 0.5 * delta_mu;
    let s = half.sin();
    if s.abs() < DIRICHLET_SINGULARITY {
        let offset = delta_mu - 2.0 * PI * (delta_mu / (2.0 * PI)).round();
        return gs * (1.0 - (gs * gs - 1.0) * offset * offset / 12.0);
    }
    let ratio = (gs * half).sin() / s;
    (ratio * ratio / gs).clamp(0.0, gs)
}

/// Inputs shared by the expected-power formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingQuery {
    pub arch: RisArchitecture,
    pub operators: usize,
    pub rho_ri: f64,
    pub rho_it1: f64,
}

impl ScalingQuery {
    pub fn new(arch: RisArchitecture, operators: usize, rho_ri: f64, rho_it1: f64) -> Result<Self> {
        let q = Self {
            arch,
            operators,
            rho_ri,
            rho_it1,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.operators < 2 {
            return Err(RisError::InvalidArgument(format!(
                "need at least two operators, got {}",
                self.operators
            )));
        }
        for (name, g) in [("rho_RI", self.rho_ri), ("rho_IT1", self.rho_it1)] {
            if !(g >= 0.0) || !g.is_finite() {
                return Err(RisError::InvalidArgument(format!(
                    "{name} = {g} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }

    fn gain(&self) -> f64 {
        self.rho_ri * self.rho_it1
    }
}

/// Expected optimal power for i.i.d. Rayleigh BS-RIS and RIS-user channels
/// with any number of operators.
pub fn expected_power_rayleigh(q: &ScalingQuery) -> Result<f64> {
    q.validate()?;
    let l = q.operators;
    let gs = q.arch.group_size();
    let n = q.arch.n() as f64;
    if gs < l {
        return Ok(n * q.gain());
    }
    let g = q.arch.groups() as f64;
    let free = (gs - l + 1) as f64;
    let constrained = (l - 1) as f64;
    let r2 = gamma_ratio(free + 0.5, free)?.powi(2);
    let cross = gamma_ratio(g * constrained + 0.5, g * constrained)?;
    let normalized =
        g * (g - 1.0) * r2 * r2 + PI.sqrt() * g * cross * r2 + g * free * free + g * constrained;
    Ok(normalized * q.gain())
}

/// The two-operator Rayleigh result coded from its own closed form; agrees
/// with [`expected_power_rayleigh`] at `L = 2`.
pub fn expected_power_rayleigh_two_operator(q: &ScalingQuery) -> Result<f64> {
    q.validate()?;
    if q.operators != 2 {
        return Err(RisError::UnsupportedOperatorCount(q.operators));
    }
    let n = q.arch.n() as f64;
    let normalized = match q.arch.kind() {
        ArchitectureKind::SingleConnected => n,
        ArchitectureKind::FullyConnected => {
            let r = gamma_ratio(n - 0.5, n - 1.0)?;
            (n - 1.0).powi(2) + 0.5 * PI * r * r + 1.0
        }
        ArchitectureKind::GroupConnected => {
            let g = q.arch.groups() as f64;
            let gs = q.arch.group_size() as f64;
            let r2 = gamma_ratio(gs - 0.5, gs - 1.0)?.powi(2);
            g * (g - 1.0) * r2 * r2
                + PI.sqrt() * g * gamma_ratio(g + 0.5, g)? * r2
                + g * (gs - 1.0).powi(2)
                + g
        }
    };
    Ok(normalized * q.gain())
}

/// Expected optimal power with LoS BS-RIS channels whose spatial frequencies
/// differ by `delta_mu`; two operators only.
pub fn expected_power_los(q: &ScalingQuery, delta_mu: f64) -> Result<f64> {
    q.validate()?;
    if q.operators != 2 {
        return Err(RisError::UnsupportedOperatorCount(q.operators));
    }
    if !delta_mu.is_finite() {
        return Err(RisError::NonFinite("delta_mu"));
    }
    let n = q.arch.n() as f64;
    let normalized = match q.arch.kind() {
        ArchitectureKind::SingleConnected => n,
        ArchitectureKind::FullyConnected => {
            let lf = dirichlet_factor(q.arch.n(), delta_mu);
            let r = gamma_ratio(n - 0.5, n - 1.0)?;
            (n - 1.0) * (n - lf) + (PI * (n - lf) * lf).sqrt() * r + lf
        }
        ArchitectureKind::GroupConnected => {
            let g = q.arch.groups() as f64;
            let gs = q.arch.group_size() as f64;
            let lf = dirichlet_factor(q.arch.group_size(), delta_mu);
            let r = gamma_ratio(gs - 0.5, gs - 1.0)?;
            g * (g - 1.0) * r * r * (gs - lf)
                + g * (PI * g * (gs - lf) * lf).sqrt() * r
                + g * (gs - 1.0) * (gs - lf)
                + g * lf
        }
    };
    Ok(normalized * q.gain())
}

/// Channel family for the large-`N` coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyticChannel {
    Rayleigh,
    LoS,
}

/// Coefficient `kappa` in `E[P*] ~ kappa N^2 rho_RI rho_IT1`.
pub fn asymptotic_kappa(
    policy: GroupSizePolicy,
    operators: usize,
    channel: AnalyticChannel,
) -> Result<f64> {
    let gs = match policy {
        GroupSizePolicy::FullyConnected => return Ok(1.0),
        GroupSizePolicy::Fixed(gs) => gs,
    };
    match channel {
        AnalyticChannel::Rayleigh => {
            if operators < 2 || gs < operators {
                return Err(RisError::InvalidArchitecture(format!(
                    "N^2 scaling needs Gs >= L, got Gs = {gs}, L = {operators}"
                )));
            }
            let free = (gs - operators + 1) as f64;
            Ok((gamma_ratio(free + 0.5, free)? / (gs as f64).sqrt()).powi(4))
        }
        AnalyticChannel::LoS => {
            if operators != 2 {
                return Err(RisError::UnsupportedOperatorCount(operators));
            }
            if gs < 2 {
                return Err(RisError::InvalidArchitecture(format!(
                    "N^2 scaling needs Gs >= 2, got Gs = {gs}"
                )));
            }
            let gs = gs as f64;
            Ok((gamma_ratio(gs - 0.5, gs - 1.0)? / gs.sqrt()).powi(2))
        }
    }
}

/// Large-`N` power of an `L`-operator RIS relative to a single-operator RIS
/// with the same group size.
pub fn single_operator_ratio(group_size: usize, operators: usize) -> Result<f64> {
    if operators < 2 || group_size < operators {
        return Err(RisError::InvalidArchitecture(format!(
            "ratio needs Gs >= L >= 2, got Gs = {group_size}, L = {operators}"
        )));
    }
    Ok((0..=operators - 2)
        .map(|j| {
            let m = (group_size - operators + j) as f64;
            (1.0 - 1.0 / (2.0 * m + 3.0)).powi(4)
        })
        .product())
}
