//! Multi-antenna, multi-operator generalization: eliminate the linear
//! constraints and expose the remaining block-unitary freedom as an
//! unconstrained problem `H(Theta_bar) = H0 + H1 Theta_bar H2`.

use crate::arch::{BlockDiagonal, RisArchitecture};
use crate::channels::ScenarioChannels;
use crate::error::{Result, RisError};
use crate::linalg::{
    self, eps_zero, numerical_rank, unit_phase, unitary_completion_vector, ComplexMatrix,
    ComplexVector, RANK_TOL,
};
use crate::solver::{
    gram_deviation, unique_group_block, GroupFrame, TargetReflections, FEASIBILITY_TOL,
};

/// Tolerance on `|Theta_bar_g^H Theta_bar_g - I|` accepted by
/// [`reconstruct_theta`].
pub const UNITARY_INPUT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiAntennaScenario {
    /// RIS to receiver, `N_R x N`.
    pub h_ri: ComplexMatrix,
    /// Transmitter `l` to RIS, each `N x N_T`; index 0 is the serving operator.
    pub h_it: Vec<ComplexMatrix>,
    /// Prescribed reflected channels of operators `2..=L`, each `N x N_T`.
    pub d_it: Vec<ComplexMatrix>,
    pub arch: RisArchitecture,
}

impl MultiAntennaScenario {
    pub fn new(
        h_ri: ComplexMatrix,
        h_it: Vec<ComplexMatrix>,
        d_it: Vec<ComplexMatrix>,
        arch: RisArchitecture,
    ) -> Result<Self> {
        let s = Self {
            h_ri,
            h_it,
            d_it,
            arch,
        };
        s.validate()?;
        Ok(s)
    }

    /// Single-antenna scenario written as `1 x N` and `N x 1` matrices.
    pub fn from_single_antenna(
        ch: &ScenarioChannels,
        targets: &TargetReflections,
        arch: RisArchitecture,
    ) -> Result<Self> {
        let col = |v: &ComplexVector| ComplexMatrix::from_column_slice(v.len(), 1, v.as_slice());
        Self::new(
            ComplexMatrix::from_iterator(1, ch.n(), ch.h_ri.iter().map(|z| z.conj())),
            ch.h_it.iter().map(col).collect(),
            targets.d.iter().map(col).collect(),
            arch,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.arch.n();
        if self.h_ri.ncols() != n || self.h_ri.nrows() == 0 {
            return Err(RisError::DimensionMismatch(format!(
                "H_RI is {}x{}, expected N_R x {n}",
                self.h_ri.nrows(),
                self.h_ri.ncols()
            )));
        }
        if self.h_it.len() < 2 {
            return Err(RisError::InvalidArgument(format!(
                "need at least two operators, got {}",
                self.h_it.len()
            )));
        }
        if self.d_it.len() + 1 != self.h_it.len() {
            return Err(RisError::DimensionMismatch(format!(
                "{} operators need {} targets, got {}",
                self.h_it.len(),
                self.h_it.len() - 1,
                self.d_it.len()
            )));
        }
        let nt = self.h_it[0].ncols();
        if nt == 0 {
            return Err(RisError::EmptyInput("H_IT"));
        }
        for m in self.h_it.iter().chain(&self.d_it) {
            if m.shape() != (n, nt) {
                return Err(RisError::DimensionMismatch(format!(
                    "channel block is {}x{}, expected {n}x{nt}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        if !linalg::all_finite_mat(&self.h_ri)
            || !self
                .h_it
                .iter()
                .chain(&self.d_it)
                .all(linalg::all_finite_mat)
        {
            return Err(RisError::NonFinite("multi-antenna channels"));
        }
        Ok(())
    }

    pub fn operators(&self) -> usize {
        self.h_it.len()
    }

    pub fn tx_antennas(&self) -> usize {
        self.h_it[0].ncols()
    }

    pub fn rx_antennas(&self) -> usize {
        self.h_ri.nrows()
    }

    fn hstack_rows(mats: &[ComplexMatrix], rows: std::ops::Range<usize>) -> ComplexMatrix {
        let cols: usize = mats.iter().map(|m| m.ncols()).sum();
        let mut out = ComplexMatrix::zeros(rows.len(), cols);
        let mut at = 0;
        for m in mats {
            out.view_mut((0, at), (rows.len(), m.ncols()))
                .copy_from(&m.rows(rows.start, rows.len()));
            at += m.ncols();
        }
        out
    }

    /// `(H_g, D_g)`: stacked non-serving channels and targets of group `g`,
    /// each `Gs x N_T(L-1)`.
    pub fn group_constraints(&self, g: usize) -> (ComplexMatrix, ComplexMatrix) {
        let r = self.arch.group_range(g);
        (
            Self::hstack_rows(&self.h_it[1..], r.clone()),
            Self::hstack_rows(&self.d_it, r),
        )
    }

    pub fn max_gram_deviation(&self) -> f64 {
        (0..self.arch.groups())
            .map(|g| {
                let (h, d) = self.group_constraints(g);
                gram_deviation(&h, &d)
            })
            .fold(0.0, f64::max)
    }

    fn require_feasible(&self) -> Result<()> {
        let dev = self.max_gram_deviation();
        if !(dev <= FEASIBILITY_TOL) {
            return Err(RisError::Infeasible(format!(
                "max relative Gram deviation {dev:e} exceeds {FEASIBILITY_TOL:e}"
            )));
        }
        Ok(())
    }

    /// `H_RI Theta H_IT1`.
    pub fn effective_channel(&self, theta: &ComplexMatrix) -> ComplexMatrix {
        &self.h_ri * theta * &self.h_it[0]
    }

    /// Largest `|Theta H_IT_l - D_IT_l|_F / |D_IT_l|_F` over non-serving operators.
    pub fn max_constraint_residual(&self, theta: &ComplexMatrix) -> f64 {
        self.h_it[1..]
            .iter()
            .zip(&self.d_it)
            .map(|(h, d)| {
                let r = (theta * h - d).norm();
                let s = d.norm();
                if s > 0.0 {
                    r / s
                } else {
                    r
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Group-size threshold above which free degrees of freedom remain:
/// `N_T (L-1) + 1` for full-rank constraints, else `max_g rank(H_g) + 1`.
pub fn compute_tau(scenario: &MultiAntennaScenario) -> usize {
    let full = scenario.tx_antennas() * (scenario.operators() - 1);
    let ranks: Vec<usize> = (0..scenario.arch.groups())
        .map(|g| numerical_rank(&scenario.group_constraints(g).0, RANK_TOL))
        .collect();
    if ranks.iter().all(|&r| r == full) {
        full + 1
    } else {
        ranks.into_iter().max().unwrap_or(0) + 1
    }
}

/// Replace `Theta H = D` by the equivalent full-column-rank system
/// `Theta A = RHS`, using the thin SVD `H = (U_r S_r) V_r^H`.
/// Full-column-rank input is returned unchanged.
pub fn rank_reduce_constraints(
    h: &ComplexMatrix,
    d: &ComplexMatrix,
    rank_tol: f64,
) -> Result<(ComplexMatrix, ComplexMatrix)> {
    if h.shape() != d.shape() {
        return Err(RisError::DimensionMismatch(format!(
            "H is {}x{} but D is {}x{}",
            h.nrows(),
            h.ncols(),
            d.nrows(),
            d.ncols()
        )));
    }
    let svd = linalg::thin_svd(h);
    let smax = svd.singular_values.first().copied().unwrap_or(0.0);
    if smax <= eps_zero(h.nrows()) {
        return Err(RisError::ZeroConstraint);
    }
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > rank_tol * smax)
        .count();
    if rank == h.ncols() {
        return Ok((h.clone(), d.clone()));
    }
    let mut a = svd.u.columns(0, rank).into_owned();
    for (j, s) in svd.singular_values[..rank].iter().enumerate() {
        a.column_mut(j).scale_mut(*s);
    }
    let v_r = svd.v.columns(0, rank).into_owned();
    Ok((a, d * v_r))
}

/// Unconstrained reformulation of a multi-antenna scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedProblem {
    /// `N_R x N_T` fixed part.
    pub hbar0: ComplexMatrix,
    /// `N_R x sum(free_dims)`.
    pub hbar1: ComplexMatrix,
    /// `sum(free_dims) x N_T`.
    pub hbar2: ComplexMatrix,
    /// Per-group completions `(U(D_g), U(H_g))` after rank reduction.
    pub completions: Vec<GroupFrame>,
    pub tau: usize,
    /// Size of each free block `Theta_bar_g`; `Gs - tau + 1` when every
    /// group has the same constraint rank.
    pub free_dims: Vec<usize>,
}

impl ReducedProblem {
    /// `H0 + H1 blkdiag(Theta_bar) H2`.
    pub fn objective_channel(&self, blocks: &[ComplexMatrix]) -> Result<ComplexMatrix> {
        let inner = BlockDiagonal::new(blocks.to_vec())?;
        if inner.blocks().iter().map(|b| b.nrows()).collect::<Vec<_>>() != self.free_dims {
            return Err(RisError::DimensionMismatch(
                "reduced block sizes differ from free_dims".into(),
            ));
        }
        Ok(&self.hbar0 + &self.hbar1 * inner.to_dense() * &self.hbar2)
    }

    fn offsets(&self) -> Vec<usize> {
        let mut at = 0;
        self.free_dims
            .iter()
            .map(|k| {
                let o = at;
                at += k;
                o
            })
            .collect()
    }
}

pub fn build_reduced_problem(scenario: &MultiAntennaScenario) -> Result<ReducedProblem> {
    scenario.validate()?;
    scenario.require_feasible()?;
    let tau = compute_tau(scenario);
    let arch = &scenario.arch;
    let gs = arch.group_size();
    if gs < tau {
        return Err(RisError::GroupSizeTooSmall { gs, tau });
    }
    let (nr, nt) = (scenario.rx_antennas(), scenario.tx_antennas());

    let mut completions = Vec::with_capacity(arch.groups());
    let mut hbar0 = ComplexMatrix::zeros(nr, nt);
    let mut left_tails = Vec::with_capacity(arch.groups());
    let mut right_tails = Vec::with_capacity(arch.groups());
    for g in 0..arch.groups() {
        let (h, d) = scenario.group_constraints(g);
        let frame = if linalg::singular_values(&h)[0] <= eps_zero(gs) {
            if linalg::singular_values(&d)[0] > eps_zero(gs) {
                return Err(RisError::Infeasible(format!(
                    "group {g}: channels vanish but targets do not"
                )));
            }
            GroupFrame::unconstrained(gs)
        } else {
            let (a, rhs) = rank_reduce_constraints(&h, &d, RANK_TOL)?;
            GroupFrame::canonical(&a, &rhs)?
        };
        let r = arch.group_range(g);
        let left = scenario.h_ri.columns(r.start, gs) * &frame.u_target;
        let right = frame.u_source.adjoint() * scenario.h_it[0].rows(r.start, gs);
        let m = frame.anchor;
        hbar0 += left.columns(0, m) * right.rows(0, m);
        left_tails.push(left.columns(m, gs - m).into_owned());
        right_tails.push(right.rows(m, gs - m).into_owned());
        completions.push(frame);
    }
    let free_dims: Vec<usize> = completions.iter().map(|f| f.free_dim()).collect();
    let total: usize = free_dims.iter().sum();
    let mut hbar1 = ComplexMatrix::zeros(nr, total);
    let mut hbar2 = ComplexMatrix::zeros(total, nt);
    let mut at = 0;
    for ((l, r), k) in left_tails.iter().zip(&right_tails).zip(&free_dims) {
        hbar1.view_mut((0, at), (nr, *k)).copy_from(l);
        hbar2.view_mut((at, 0), (*k, nt)).copy_from(r);
        at += k;
    }
    Ok(ReducedProblem {
        hbar0,
        hbar1,
        hbar2,
        completions,
        tau,
        free_dims,
    })
}

/// Map free unitary blocks back to a feasible block-diagonal `Theta`.
pub fn reconstruct_theta(
    reduced: &ReducedProblem,
    blocks: &[ComplexMatrix],
) -> Result<ComplexMatrix> {
    if blocks.len() != reduced.completions.len() {
        return Err(RisError::DimensionMismatch(format!(
            "{} groups but {} reduced blocks",
            reduced.completions.len(),
            blocks.len()
        )));
    }
    let full = blocks
        .iter()
        .zip(&reduced.completions)
        .enumerate()
        .map(|(g, (b, f))| {
            if b.shape() != (f.free_dim(), f.free_dim()) {
                return Err(RisError::DimensionMismatch(format!(
                    "reduced block {g} is {}x{}, expected {1}x{1}",
                    b.nrows(),
                    f.free_dim()
                )));
            }
            if b.nrows() > 0 && linalg::unitarity_deviation(b) > UNITARY_INPUT_TOL {
                return Err(RisError::NotUnitaryInput(g));
            }
            Ok(f.block(b))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockDiagonal::new(full)?.to_dense())
}

/// The unique feasible `Theta` when every group is too small to leave any
/// freedom (`H_g` of full row rank).
pub fn unique_solution_small_group(scenario: &MultiAntennaScenario) -> Result<ComplexMatrix> {
    scenario.validate()?;
    scenario.require_feasible()?;
    let blocks = (0..scenario.arch.groups())
        .map(|g| {
            let (h, d) = scenario.group_constraints(g);
            unique_group_block(&h, &d)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockDiagonal::new(blocks)?.to_dense())
}

/// Maximizer of `|h0 + h1 Theta_bar h2|` for a single-stream link
/// (`N_R = N_T = 1`): each block maps the `h2` tail onto the conjugated `h1`
/// tail with the phase of `h0`. Returns the blocks and the optimal power.
pub fn maximize_single_stream(reduced: &ReducedProblem) -> Result<(Vec<ComplexMatrix>, f64)> {
    if reduced.hbar0.shape() != (1, 1) {
        return Err(RisError::InvalidArgument(format!(
            "single-stream maximizer needs a 1x1 channel, got {}x{}",
            reduced.hbar0.nrows(),
            reduced.hbar0.ncols()
        )));
    }
    let h0 = reduced.hbar0[(0, 0)];
    let mut scale = h0.norm();
    let mut gain = 0.0;
    let tails: Vec<(ComplexVector, ComplexVector)> = reduced
        .offsets()
        .iter()
        .zip(&reduced.free_dims)
        .map(|(&o, &k)| {
            let w = ComplexVector::from_iterator(
                k,
                reduced.hbar1.view((0, o), (1, k)).iter().map(|z| z.conj()),
            );
            let v =
                ComplexVector::from_iterator(k, reduced.hbar2.view((o, 0), (k, 1)).iter().cloned());
            (w, v)
        })
        .collect();
    for (w, v) in &tails {
        scale += w.norm() * v.norm();
        gain += w.norm() * v.norm();
    }
    let phase = unit_phase(h0, 1e-14 * scale);
    let blocks = tails
        .iter()
        .map(|(w, v)| {
            let k = w.len();
            if k == 0 {
                return Ok(ComplexMatrix::zeros(0, 0));
            }
            if w.norm() == 0.0 || v.norm() == 0.0 {
                return Ok(ComplexMatrix::identity(k, k) * phase);
            }
            let uw = unitary_completion_vector(w, k)?.u;
            let uv = unitary_completion_vector(v, k)?.u;
            Ok(uw * uv.adjoint() * phase)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((blocks, (h0.norm() + gain).powi(2)))
}
