//! Channel realizations: i.i.d. Rayleigh, line-of-sight ULA and Rician
//! mixtures, plus the distance-based large-scale gain.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Result, RisError};
use crate::linalg::{all_finite_vec, ComplexVector};
use crate::rng::complex_normal;

/// `L(d) = L0 d^-alpha` with separate exponents for the RIS-user link and the
/// BS-RIS links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    pub l0_db: f64,
    pub exponent_ru: f64,
    pub exponent_bi: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self {
            l0_db: -30.0,
            exponent_ru: 2.8,
            exponent_bi: 2.0,
        }
    }
}

impl PathLossModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.exponent_ru > 0.0 && self.exponent_bi > 0.0) {
            return Err(RisError::InvalidArgument(
                "path-loss exponents must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn ris_user_gain(&self, distance: f64) -> Result<f64> {
        path_gain(distance, self.exponent_ru, self.l0_db)
    }

    pub fn bs_ris_gain(&self, distance: f64) -> Result<f64> {
        path_gain(distance, self.exponent_bi, self.l0_db)
    }
}

/// Linear power gain `10^(L0/10) d^-exponent`.
pub fn path_gain(distance: f64, exponent: f64, l0_db: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(RisError::NonPositiveDistance(distance));
    }
    Ok(10f64.powf(l0_db / 10.0) * distance.powf(-exponent))
}

/// i.i.d. `CN(0, rho)` entries.
pub fn rayleigh_vector<R: Rng + ?Sized>(n: usize, rho: f64, rng: &mut R) -> ComplexVector {
    assert!(rho >= 0.0, "channel gain must be non-negative");
    ComplexVector::from_fn(n, |_, _| complex_normal(rng, rho))
}

/// Half-wavelength ULA response `[1, e^{-i pi sin t}, ..., e^{-i (n-1) pi sin t}]`.
pub fn steering_vector(n: usize, theta: f64) -> Result<ComplexVector> {
    if !(theta.abs() < FRAC_PI_2) {
        return Err(RisError::AngleOutOfRange(theta));
    }
    let mu = PI * theta.sin();
    Ok(ComplexVector::from_fn(n, |k, _| {
        Complex64::from_polar(1.0, -(k as f64) * mu)
    }))
}

pub fn los_vector(n: usize, theta: f64, rho: f64) -> Result<ComplexVector> {
    if rho < 0.0 {
        return Err(RisError::InvalidArgument(
            "channel gain must be non-negative".into(),
        ));
    }
    Ok(steering_vector(n, theta)?.scale(rho.sqrt()))
}

/// Power-preserving Rician mixture
/// `sqrt(rho k/(1+k)) a(theta) + sqrt(rho/(1+k)) CN(0, I)`.
/// `kappa_db >= 200` is treated as pure LoS, `<= -200` as pure Rayleigh.
pub fn rician_vector<R: Rng + ?Sized>(
    n: usize,
    theta: f64,
    rho: f64,
    kappa_db: f64,
    rng: &mut R,
) -> Result<ComplexVector> {
    if kappa_db >= 200.0 {
        return los_vector(n, theta, rho);
    }
    let a = steering_vector(n, theta)?;
    if rho < 0.0 {
        return Err(RisError::InvalidArgument(
            "channel gain must be non-negative".into(),
        ));
    }
    if kappa_db <= -200.0 {
        return Ok(rayleigh_vector(n, rho, rng));
    }
    let k = 10f64.powf(kappa_db / 10.0);
    let los = (rho * k / (1.0 + k)).sqrt();
    let nlos = (rho / (1.0 + k)).sqrt();
    let scatter = rayleigh_vector(n, 1.0, rng);
    Ok(a.scale(los) + scatter.scale(nlos))
}

/// Spatial frequency `pi sin(theta)`.
pub fn spatial_frequency(theta: f64) -> f64 {
    PI * theta.sin()
}

const ANGLE_LIMIT: f64 = 1.4;
const MIN_SIN_SEPARATION: f64 = 0.05;

/// Draws `count` arrival angles uniform on (-1.4, 1.4) rad, redrawing the set
/// until every pair differs by at least 0.05 in `sin(theta)`.
pub fn draw_los_angles<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let angles: Vec<f64> = (0..count)
            .map(|_| rng.random_range(-ANGLE_LIMIT..ANGLE_LIMIT))
            .collect();
        let separated = angles.iter().enumerate().all(|(i, a)| {
            angles[i + 1..]
                .iter()
                .all(|b| (a.sin() - b.sin()).abs() >= MIN_SIN_SEPARATION)
        });
        if separated {
            return angles;
        }
    }
}

/// Per-link linear power gains.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGains {
    pub ris_user: f64,
    pub bs_ris: Vec<f64>,
}

/// One realization of every channel in the single-antenna model:
/// `h_ri` (RIS to user of operator 1) and `h_it[l]` (BS of operator `l+1` to
/// RIS), all of length N.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioChannels {
    pub h_ri: ComplexVector,
    pub h_it: Vec<ComplexVector>,
    pub gains: Option<LinkGains>,
}

impl ScenarioChannels {
    pub fn new(h_ri: ComplexVector, h_it: Vec<ComplexVector>) -> Result<Self> {
        let s = Self {
            h_ri,
            h_it,
            gains: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.h_ri.len()
    }

    /// Number of operators L.
    pub fn operators(&self) -> usize {
        self.h_it.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.h_it.len() < 2 {
            return Err(RisError::InvalidArgument(format!(
                "need at least two operators, got {}",
                self.h_it.len()
            )));
        }
        let n = self.n();
        if n == 0 {
            return Err(RisError::EmptyInput("h_RI"));
        }
        if let Some((l, h)) = self.h_it.iter().enumerate().find(|(_, h)| h.len() != n) {
            return Err(RisError::DimensionMismatch(format!(
                "h_IT{} has length {} but h_RI has length {n}",
                l + 1,
                h.len()
            )));
        }
        if !all_finite_vec(&self.h_ri) || !self.h_it.iter().all(all_finite_vec) {
            return Err(RisError::NonFinite("channel"));
        }
        Ok(())
    }
}
