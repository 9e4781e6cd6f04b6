use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use risopt_core::channels::{self as ch, ScenarioChannels};
use risopt_core::config::SweepConfig;
use risopt_core::harness;
use risopt_core::rng::RngStream;
use risopt_core::scaling::{self, AnalyticChannel, ScalingQuery};
use risopt_core::solver::{self, TargetMode, TargetReflections};
use risopt_core::{ComplexVector, GroupSizePolicy, RisError};

fn err(e: RisError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn vector(v: Vec<Complex64>) -> ComplexVector {
    ComplexVector::from_vec(v)
}

fn scenario(h_ri: Vec<Complex64>, h_it: Vec<Vec<Complex64>>) -> PyResult<ScenarioChannels> {
    ScenarioChannels::new(vector(h_ri), h_it.into_iter().map(vector).collect()).map_err(err)
}

fn policy(group_size: Option<usize>) -> GroupSizePolicy {
    group_size.map_or(GroupSizePolicy::FullyConnected, GroupSizePolicy::Fixed)
}

/// Group-connected RIS layout: `n` elements split into `groups` equal groups.
#[pyclass(frozen, name = "Architecture")]
struct PyArchitecture {
    inner: risopt_core::RisArchitecture,
}

#[pymethods]
impl PyArchitecture {
    #[new]
    fn new(n: usize, groups: usize) -> PyResult<Self> {
        let inner = risopt_core::RisArchitecture::new(n, groups).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn with_group_size(n: usize, group_size: usize) -> PyResult<Self> {
        let inner = risopt_core::RisArchitecture::with_group_size(n, group_size).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn groups(&self) -> usize {
        self.inner.groups()
    }

    #[getter]
    fn group_size(&self) -> usize {
        self.inner.group_size()
    }

    fn __repr__(&self) -> String {
        format!(
            "Architecture(n={}, groups={}, group_size={})",
            self.inner.n(),
            self.inner.groups(),
            self.inner.group_size()
        )
    }
}

/// Optimal scattering matrix and the power it delivers (per watt transmitted).
#[pyclass(frozen, name = "Solution")]
struct PySolution {
    #[pyo3(get)]
    optimal_power: f64,
    #[pyo3(get)]
    branch: &'static str,
    #[pyo3(get)]
    theta: Vec<Vec<Complex64>>,
    #[pyo3(get)]
    residuals: Vec<f64>,
    #[pyo3(get)]
    unitarity_deviation: f64,
}

#[pymethods]
impl PySolution {
    fn __repr__(&self) -> String {
        format!(
            "Solution(branch='{}', optimal_power={:e})",
            self.branch, self.optimal_power
        )
    }
}

/// Maximize the serving operator's received power subject to fixed
/// reflected channels `targets[k]` for operators 2..L.
#[pyfunction]
#[pyo3(signature = (h_ri, h_it, targets, arch, direct_path=None))]
fn solve(
    h_ri: Vec<Complex64>,
    h_it: Vec<Vec<Complex64>>,
    targets: Vec<Vec<Complex64>>,
    arch: &PyArchitecture,
    direct_path: Option<Complex64>,
) -> PyResult<PySolution> {
    let channels = scenario(h_ri, h_it)?;
    let targets = TargetReflections::new(targets.into_iter().map(vector).collect());
    let sol = match direct_path {
        Some(h_rt) => {
            solver::solve_group_two_operator(&channels, &targets, &arch.inner, Some(h_rt))
        }
        None => solver::solve(&channels, &targets, &arch.inner),
    }
    .map_err(err)?;
    let dense = sol.theta_dense();
    let theta = dense
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();
    Ok(PySolution {
        optimal_power: sol.optimal_power,
        branch: sol.branch.name(),
        residuals: sol.constraint_residuals(&channels, &targets),
        unitarity_deviation: sol.theta.max_unitarity_deviation(),
        theta,
    })
}

/// Draw Rayleigh channels of unit variance and Haar-rotated targets.
/// Returns `(h_ri, h_it, targets)`.
#[pyfunction]
#[pyo3(signature = (arch, operators=2, seed=0))]
#[allow(clippy::type_complexity)]
fn random_instance(
    arch: &PyArchitecture,
    operators: usize,
    seed: u64,
) -> PyResult<(Vec<Complex64>, Vec<Vec<Complex64>>, Vec<Vec<Complex64>>)> {
    let n = arch.inner.n();
    let mut rng = RngStream::derived(seed, &[0x9e7]).generator();
    let h_ri = ch::rayleigh_vector(n, 1.0, &mut rng);
    let h_it: Vec<_> = (0..operators)
        .map(|_| ch::rayleigh_vector(n, 1.0, &mut rng))
        .collect();
    let channels = ScenarioChannels::new(h_ri, h_it).map_err(err)?;
    let targets = solver::generate_targets(&channels, &arch.inner, TargetMode::Haar, &mut rng)
        .map_err(err)?;
    let list = |v: &ComplexVector| v.iter().copied().collect::<Vec<_>>();
    Ok((
        list(&channels.h_ri),
        channels.h_it.iter().map(list).collect(),
        targets.d.iter().map(list).collect(),
    ))
}

/// Mean received power over Rayleigh channels (any number of operators).
#[pyfunction]
#[pyo3(signature = (arch, operators=2, rho_ri=1.0, rho_it1=1.0))]
fn expected_power_rayleigh(
    arch: &PyArchitecture,
    operators: usize,
    rho_ri: f64,
    rho_it1: f64,
) -> PyResult<f64> {
    let q = ScalingQuery::new(arch.inner, operators, rho_ri, rho_it1).map_err(err)?;
    scaling::expected_power_rayleigh(&q).map_err(err)
}

/// Mean received power with line-of-sight BS-RIS links (two operators).
#[pyfunction]
#[pyo3(signature = (arch, delta_mu, rho_ri=1.0, rho_it1=1.0))]
fn expected_power_los(
    arch: &PyArchitecture,
    delta_mu: f64,
    rho_ri: f64,
    rho_it1: f64,
) -> PyResult<f64> {
    let q = ScalingQuery::new(arch.inner, 2, rho_ri, rho_it1).map_err(err)?;
    scaling::expected_power_los(&q, delta_mu).map_err(err)
}

/// Large-N coefficient of N^2; `group_size=None` means fully connected.
#[pyfunction]
#[pyo3(signature = (group_size, operators=2, los=false))]
fn asymptotic_kappa(group_size: Option<usize>, operators: usize, los: bool) -> PyResult<f64> {
    let channel = if los {
        AnalyticChannel::LoS
    } else {
        AnalyticChannel::Rayleigh
    };
    scaling::asymptotic_kappa(policy(group_size), operators, channel).map_err(err)
}

#[pyfunction]
fn single_operator_ratio(group_size: usize, operators: usize) -> PyResult<f64> {
    scaling::single_operator_ratio(group_size, operators).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (distance, exponent, l0_db=-30.0))]
fn path_gain(distance: f64, exponent: f64, l0_db: f64) -> PyResult<f64> {
    ch::path_gain(distance, exponent, l0_db).map_err(err)
}

/// Run a Monte Carlo sweep from a TOML document; returns the CSV text.
#[pyfunction]
#[pyo3(signature = (config, seed=None, workers=None))]
fn run_sweep(
    py: Python<'_>,
    config: &str,
    seed: Option<u64>,
    workers: Option<usize>,
) -> PyResult<String> {
    let mut experiment = SweepConfig::parse(config).map_err(err)?.experiment;
    if let Some(s) = seed {
        experiment.seed = s;
    }
    if workers.is_some() {
        experiment.workers = workers;
    }
    let result = py.detach(|| harness::run_sweep(&experiment)).map_err(err)?;
    Ok(result.to_csv())
}

/// Least-squares slope of log(power) against log(N).
#[pyfunction]
fn fit_scaling_exponent(points: Vec<(usize, f64)>) -> PyResult<f64> {
    harness::fit_scaling_exponent(&points).map_err(err)
}

#[pymodule]
fn risopt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyArchitecture>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(random_instance, m)?)?;
    m.add_function(wrap_pyfunction!(expected_power_rayleigh, m)?)?;
    m.add_function(wrap_pyfunction!(expected_power_los, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotic_kappa, m)?)?;
    m.add_function(wrap_pyfunction!(single_operator_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(path_gain, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(fit_scaling_exponent, m)?)?;
    m.add("CSV_HEADER", harness::CSV_HEADER)?;
    Ok(())
}
