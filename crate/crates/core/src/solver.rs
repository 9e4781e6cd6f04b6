//! Closed-form globally optimal scattering matrices under fixed-reflection
//! constraints.
//!
//! Every block `Theta_g` must map the non-serving channels `H_g` onto the
//! prescribed reflections `D_g` while staying unitary. Writing
//! `Theta_g = U(D_g) diag(I_m, Theta_bar_g) U(H_g)^H` turns the coupled
//! constraints into a plain unitary constraint on `Theta_bar_g`, and the
//! serving operator's gain is then maximized by aligning every free block
//! with the common phase of the fixed part `gamma`.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;

use crate::arch::{BlockDiagonal, RisArchitecture};
use crate::channels::ScenarioChannels;
use crate::error::{Result, RisError};
use crate::linalg::{
    self, eps_zero, haar_unitary, numerical_rank, psd_inv_sqrt, unit_phase,
    unitary_completion_matrix, unitary_completion_vector, ComplexMatrix, ComplexVector, RANK_TOL,
};
use crate::multiantenna::rank_reduce_constraints;

/// Relative Frobenius tolerance on `H_g^H H_g = D_g^H D_g`.
pub const FEASIBILITY_TOL: f64 = 1e-8;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
#[cfg(test)]
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Fixed RIS-reflected channels of the non-serving operators; `d[0]` is the
/// target for operator 2, `d[L-2]` for operator L.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetReflections {
    pub d: Vec<ComplexVector>,
}

impl TargetReflections {
    pub fn new(d: Vec<ComplexVector>) -> Self {
        Self { d }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub group_deviation: Vec<f64>,
    pub group_feasible: Vec<bool>,
    pub max_deviation: f64,
    pub feasible: bool,
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "feasible: {} (max relative Gram deviation {:.3e}, tolerance {:.0e})",
            self.feasible, self.max_deviation, FEASIBILITY_TOL
        )?;
        for (g, (dev, ok)) in self
            .group_deviation
            .iter()
            .zip(&self.group_feasible)
            .enumerate()
        {
            writeln!(
                f,
                "  group {g}: deviation {dev:.3e} {}",
                if *ok { "ok" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

fn check_dimensions(
    ch: &ScenarioChannels,
    targets: &TargetReflections,
    arch: &RisArchitecture,
) -> Result<()> {
    ch.validate()?;
    if ch.n() != arch.n() {
        return Err(RisError::DimensionMismatch(format!(
            "channels have N = {} but architecture has N = {}",
            ch.n(),
            arch.n()
        )));
    }
    if targets.d.len() + 1 != ch.operators() {
        return Err(RisError::DimensionMismatch(format!(
            "{} operators need {} target vectors, got {}",
            ch.operators(),
            ch.operators() - 1,
            targets.d.len()
        )));
    }
    if let Some(d) = targets.d.iter().find(|d| d.len() != ch.n()) {
        return Err(RisError::DimensionMismatch(format!(
            "target of length {} for N = {}",
            d.len(),
            ch.n()
        )));
    }
    if !targets.d.iter().all(linalg::all_finite_vec) {
        return Err(RisError::NonFinite("targets"));
    }
    Ok(())
}

fn stack_group(vecs: &[ComplexVector], arch: &RisArchitecture, g: usize) -> ComplexMatrix {
    let gs = arch.group_size();
    ComplexMatrix::from_fn(gs, vecs.len(), |i, j| vecs[j][g * gs + i])
}

/// `(H_g, D_g)`: the non-serving channels and their targets restricted to
/// group `g`, one column per non-serving operator.
pub fn constraint_matrices(
    ch: &ScenarioChannels,
    targets: &TargetReflections,
    arch: &RisArchitecture,
    g: usize,
) -> (ComplexMatrix, ComplexMatrix) {
    (
        stack_group(&ch.h_it[1..], arch, g),
        stack_group(&targets.d, arch, g),
    )
}

/// `|H^H H - D^H D|_F / |H^H H|_F`, with an all-zero pair counting as exact.
pub fn gram_deviation(h: &ComplexMatrix, d: &ComplexMatrix) -> f64 {
    let gh = h.adjoint() * h;
    let gd = d.adjoint() * d;
    let diff = (&gh - &gd).norm();
    let scale = gh.norm();
    let tiny = eps_zero(h.nrows()).powi(2);
    if scale <= tiny {
        if gd.norm() <= tiny {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / scale
    }
}

pub fn check_feasibility(
    ch: &ScenarioChannels,
    targets: &TargetReflections,
    arch: &RisArchitecture,
) -> Result<FeasibilityReport> {
    check_dimensions(ch, targets, arch)?;
    let group_deviation: Vec<f64> = (0..arch.groups())
        .map(|g| {
            let (h, d) = constraint_matrices(ch, targets, arch, g);
            gram_deviation(&h, &d)
        })
        .collect();
    let group_feasible: Vec<bool> = group_deviation
        .iter()
        .map(|&d| d <= FEASIBILITY_TOL)
        .collect();
    let max_deviation = group_deviation.iter().cloned().fold(0.0, f64::max);
    Ok(FeasibilityReport {
        feasible: group_feasible.iter().all(|&b| b),
        group_deviation,
        group_feasible,
        max_deviation,
    })
}

fn require_feasible(
    ch: &ScenarioChannels,
    targets: &TargetReflections,
    arch: &RisArchitecture,
) -> Result<()> {
    let report = check_feasibility(ch, targets, arch)?;
    if !report.feasible {
        return Err(RisError::Infeasible(report.to_string()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetMode {
    /// `D_g = V_g H_g` with a fresh Haar unitary `V_g` per group.
    Haar,
    /// `D_g = H_g`.
    Identity,
}

/// Feasible target reflections obtained by rotating each group's
/// non-serving channels with a unitary.
pub fn generate_targets<R: Rng + ?Sized>(
    ch: &ScenarioChannels,
    arch: &RisArchitecture,
    mode: TargetMode,
    rng: &mut R,
) -> Result<TargetReflections> {
    ch.validate()?;
    if ch.n() != arch.n() {
        return Err(RisError::DimensionMismatch(format!(
            "channels have N = {} but architecture has N = {}",
            ch.n(),
            arch.n()
        )));
    }
    let gs = arch.group_size();
    let mut d: Vec<ComplexVector> = ch.h_it[1..].to_vec();
    if mode == TargetMode::Identity {
        return Ok(TargetReflections { d });
    }
    for g in 0..arch.groups() {
        let v = haar_unitary(gs, rng);
        let range = arch.group_range(g);
        for (dl, hl) in d.iter_mut().zip(&ch.h_it[1..]) {
            let rotated = &v * hl.rows(range.start, gs);
            dl.rows_mut(range.start, gs).copy_from(&rotated);
        }
    }
    Ok(TargetReflections { d })
}

/// Which closed form produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveBranch {
    /// `Gs = 1`, `L = 2`: diagonal phases fixed by the constraint.
    SingleConnected,
    /// `L = 2`, `Gs >= 2`: one free `(Gs-1)`-dimensional unitary per group.
    TwoOperatorGroup,
    /// `Gs >= L`: one free `(Gs-L+1)`-dimensional unitary per group.
    MultiOperatorFree,
    /// `Gs < L`: the constraints pin down every block.
    UniqueSmallGroup,
}

impl SolveBranch {
    pub fn name(&self) -> &'static str {
        match self {
            SolveBranch::SingleConnected => "single-connected",
            SolveBranch::TwoOperatorGroup => "two-operator group-connected",
            SolveBranch::MultiOperatorFree => "multi-operator Gs>=L",
            SolveBranch::UniqueSmallGroup => "unique solution Gs<L",
        }
    }
}

impl fmt::Display for SolveBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Constructed scattering matrix together with the closed-form optimal value
/// `|h_RT + h_RI^H Theta h_IT1|^2` (unit transmit power).
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSolution {
    pub theta: BlockDiagonal,
    pub optimal_power: f64,
    pub gamma: Complex64,
    pub branch: SolveBranch,
    pub direct_path: Complex64,
}

impl DesignSolution {
    pub fn theta_dense(&self) -> ComplexMatrix {
        self.theta.to_dense()
    }

    /// Effective channel of the serving operator evaluated from `theta`.
    pub fn achieved_channel(&self, ch: &ScenarioChannels) -> Complex64 {
        self.direct_path + self.theta.bilinear(&ch.h_ri, &ch.h_it[0])
    }

    pub fn achieved_power(&self, ch: &ScenarioChannels) -> f64 {
        self.achieved_channel(ch).norm_sqr()
    }

    /// `|Theta h_IT_l - d_l| / |d_l|` for every non-serving operator.
    pub fn constraint_residuals(
        &self,
        ch: &ScenarioChannels,
        targets: &TargetReflections,
    ) -> Vec<f64> {
        ch.h_it[1..]
            .iter()
            .zip(&targets.d)
            .map(|(h, d)| {
                let r = (self.theta.mul_vec(h) - d).norm();
                let s = d.norm();
                if s > 0.0 {
                    r / s
                } else {
                    r
                }
            })
            .collect()
    }
}

/// Unitary frames of one group's linear constraint `Theta_g A = B`:
/// `u_target = U(B)`, `u_source = U(A)`, both pinning `anchor` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupFrame {
    pub u_target: ComplexMatrix,
    pub u_source: ComplexMatrix,
    pub anchor: usize,
}

impl GroupFrame {
    /// Canonical completions of a full-column-rank constraint pair.
    pub fn canonical(source: &ComplexMatrix, target: &ComplexMatrix) -> Result<Self> {
        if source.shape() != target.shape() {
            return Err(RisError::DimensionMismatch(
                "constraint pair shapes differ".into(),
            ));
        }
        if source.ncols() == 0 {
            return Ok(Self::unconstrained(source.nrows()));
        }
        Ok(Self {
            u_target: unitary_completion_matrix(target)?.u,
            u_source: unitary_completion_matrix(source)?.u,
            anchor: source.ncols(),
        })
    }

    pub fn unconstrained(gs: usize) -> Self {
        Self {
            u_target: ComplexMatrix::identity(gs, gs),
            u_source: ComplexMatrix::identity(gs, gs),
            anchor: 0,
        }
    }

    pub fn group_size(&self) -> usize {
        self.u_source.nrows()
    }

    /// Dimension of the free unitary block.
    pub fn free_dim(&self) -> usize {
        self.group_size() - self.anchor
    }

    /// `U(B) diag(I_anchor, inner) U(A)^H`.
    pub fn block(&self, inner: &ComplexMatrix) -> ComplexMatrix {
        let gs = self.group_size();
        assert_eq!(
            inner.nrows(),
            self.free_dim(),
            "inner block has the wrong size"
        );
        let mut mid = ComplexMatrix::identity(gs, gs);
        mid.view_mut((self.anchor, self.anchor), (inner.nrows(), inner.ncols()))
            .copy_from(inner);
        &self.u_target * mid * self.u_source.adjoint()
    }
}

/// Per-group constraint pairs ready for completion, after dropping
/// numerically dependent columns. Groups whose constraint is vacuous
/// (`H_g = 0 = D_g`) get zero columns.
fn reduced_constraints(
    ch: &ScenarioChannels,
    targets: &TargetReflections,
    arch: &RisArchitecture,
) -> Result<Vec<(ComplexMatrix, ComplexMatrix)>> {
    let gs = arch.group_size();
    (0..arch.groups())
        .map(|g| {
            let (h, d) = constraint_matrices(ch, targets, arch, g);
            let hmax = linalg::singular_values(&h).first().cloned().unwrap_or(0.0);
            if hmax <= eps_zero(gs) {
                let dmax = linalg::singular_values(&d).first().cloned().unwrap_or(0.0);
                if dmax <= eps_zero(gs) {
                    return Ok((ComplexMatrix::zeros(gs, 0), ComplexMatrix::zeros(gs, 0)));
                }
                return Err(RisError::DegenerateGroup {
                    group: g,
                    reason: format!("non-serving channels vanish but targets have norm {dmax:e}"),
                });
            }
            if numerical_rank(&h, RANK_TOL) < h.ncols() {
                rank_reduce_constraints(&h, &d, RANK_TOL)
            } else {
                Ok((h, d))
            }
        })
        .collect()
}

/// Canonical frames for every group, as used by the solvers.
pub fn group_frames(
    ch: &ScenarioChannels,
    targets: &TargetReflections,
    arch: &RisArchitecture,
) -> Result<Vec<GroupFrame>> {
    check_dimensions(ch, targets, arch)?;
    reduced_constraints(ch, targets, arch)?
        .iter()
        .map(|(a, b)| GroupFrame::canonical(a, b))
        .collect()
}

fn tail_is_negligible(tail: &ComplexVector, full: &ComplexVector) -> bool {
    let t = tail.norm();
    t == 0.0 || t <= 1e-13 * full.norm()
}

/// Optimal blocks for fixed frames: every free block maps the residual of
/// `h_IT1,g` onto the residual of `h_RI,g` with the common phase of `gamma`.
/// `free` replaces the identity inner unitaries of size `free_dim - 1`.
pub fn optimal_blocks(
    frames: &[GroupFrame],
    h_ri_groups: &[ComplexVector],
    h1_groups: &[ComplexVector],
    direct_path: Complex64,
    free: Option<&[ComplexMatrix]>,
) -> Result<(BlockDiagonal, Complex64)> {
    if frames.len() != h_ri_groups.len() || frames.len() != h1_groups.len() {
        return Err(RisError::DimensionMismatch(
            "one frame per group required".into(),
        ));
    }
    let projected: Vec<(ComplexVector, ComplexVector)> = frames
        .iter()
        .zip(h_ri_groups.iter().zip(h1_groups))
        .map(|(f, (hr, h1))| (f.u_target.adjoint() * hr, f.u_source.adjoint() * h1))
        .collect();

    let mut gamma = direct_path;
    let mut scale = direct_path.norm();
    for (f, (w, v)) in frames.iter().zip(&projected) {
        let m = f.anchor;
        gamma += w.rows(0, m).dotc(&v.rows(0, m));
        scale += w.norm() * v.norm();
    }
    // any phase is optimal once the aligned term vanishes
    let phase = unit_phase(gamma, 1e-14 * scale);

    let blocks = frames
        .iter()
        .zip(&projected)
        .enumerate()
        .map(|(g, (f, (w, v)))| {
            let k = f.free_dim();
            if k == 0 {
                return Ok(f.block(&ComplexMatrix::zeros(0, 0)));
            }
            let wt = linalg::segment(w, f.anchor, k);
            let vt = linalg::segment(v, f.anchor, k);
            let inner = if tail_is_negligible(&wt, w) || tail_is_negligible(&vt, v) {
                ComplexMatrix::identity(k, k) * phase
            } else {
                let uw = unitary_completion_vector(&wt, k)?.u;
                let uv = unitary_completion_vector(&vt, k)?.u;
                let mut mid = ComplexMatrix::identity(k, k);
                if let Some(free) = free {
                    let t = &free[g];
                    if t.nrows() != k - 1 || t.ncols() != k - 1 {
                        return Err(RisError::DimensionMismatch(format!(
                            "free unitary for group {g} must be {0}x{0}",
                            k - 1
                        )));
                    }
                    mid.view_mut((1, 1), (k - 1, k - 1)).copy_from(t);
                }
                uw * mid * uv.adjoint() * phase
            };
            Ok(f.block(&inner))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((BlockDiagonal::new(blocks)?, gamma))
}

fn split_groups(v: &ComplexVector, arch: &RisArchitecture) -> Vec<ComplexVector> {
    (0..arch.groups()).map(|g| arch.group_of(v, g)).collect()
}

/// Closed-form optimal value for two operators, evaluated directly from the
/// channels (no completions involved).
pub fn two_operator_optimal_value(
    ch: &ScenarioChannels,
    targets: &TargetReflections,
    arch: &RisArchitecture,
    direct_path: Complex64,
) -> f64 {
    let gs = arch.group_size();
    let mut aligned = direct_path;
    let mut free = 0.0;
    for g in 0..arch.groups() {
        let hr = arch.group_of(&ch.h_ri, g);
        let h1 = arch.group_of(&ch.h_it[0], g);
        let h2 = arch.group_of(&ch.h_it[1], g);
        let d = arch.group_of(&targets.d[0], g);
        let (nh2, nd) = (h2.norm(), d.norm());
        if nh2 <= eps_zero(gs) {
            free += hr.norm() * h1.norm();
            continue;
        }
        let dh = d.dotc(&hr);
        let hh = h2.dotc(&h1);
        aligned += dh.conj() / nd * hh / nh2;
        let b = (hr.norm_squared() - dh.norm_sqr() / (nd * nd))
            .max(0.0)
            .sqrt();
        let c = (h1.norm_squared() - hh.norm_sqr() / (nh2 * nh2))
            .max(0.0)
            .sqrt();
        free += b * c;
    }
    (aligned.norm() + free).powi(2)
}

/// Closed-form optimal value for `Gs >= L`, in terms of the (reduced)
/// constraint pairs `(A_g, B_g)` with `Theta_g A_g = B_g`.
fn free_branch_optimal_value(
    pairs: &[(ComplexMatrix, ComplexMatrix)],
    hr_groups: &[ComplexVector],
    h1_groups: &[ComplexVector],
) -> Result<f64> {
    let mut aligned = ZERO;
    let mut free = 0.0;
    for ((a, b), (hr, h1)) in pairs.iter().zip(hr_groups.iter().zip(h1_groups)) {
        if a.ncols() == 0 {
            free += hr.norm() * h1.norm();
            continue;
        }
        let proj_b = psd_inv_sqrt(&(b.adjoint() * b))? * (b.adjoint() * hr);
        let proj_a = psd_inv_sqrt(&(a.adjoint() * a))? * (a.adjoint() * h1);
        aligned += proj_b.dotc(&proj_a);
        let rb = (hr.norm_squared() - proj_b.norm_squared()).max(0.0).sqrt();
        let ra = (h1.norm_squared() - proj_a.norm_squared()).max(0.0).sqrt();
        free += rb * ra;
    }
    Ok((aligned.norm() + free).powi(2))
}

/// Optimal blocks for two operators and `Gs >= 2`, optionally with a direct
/// BS-user path `h_RT`.
pub fn solve_group_two_operator(
    ch: &ScenarioChannels,
    targets: &TargetReflections,
    arch: &RisArchitecture,
    direct_path: Option<Complex64>,
) -> Result<DesignSolution> {
    check_dimensions(ch, targets, arch)?;
    if ch.operators() != 2 {
        return Err(RisError::InvalidArgument(format!(
            "two-operator solver called with L = {}",
            ch.operators()
        )));
    }
    if arch.group_size() < 2 {
        return Err(RisError::InvalidArchitecture(
            "two-operator group solver needs Gs >= 2; use the single-connected solver".into(),
        ));
    }
    require_feasible(ch, targets, arch)?;
    let direct = direct_path.unwrap_or(ZERO);
    let frames = group_frames(ch, targets, arch)?;
    let hr = split_groups(&ch.h_ri, arch);
    let h1 = split_groups(&ch.h_it[0], arch);
    let (theta, gamma) = optimal_blocks(&frames, &hr, &h1, direct, None)?;
    Ok(DesignSolution {
        theta,
        optimal_power: two_operator_optimal_value(ch, targets, arch, direct),
        gamma,
        branch: SolveBranch::TwoOperatorGroup,
        direct_path: direct,
    })
}

/// Diagonal solution `Theta_nn = exp(i(arg d_n - arg h_IT2,n))`.
pub fn solve_single_connected(
    ch: &ScenarioChannels,
    targets: &TargetReflections,
) -> Result<DesignSolution> {
    let n = ch.n();
    let arch = RisArchitecture::single_connected(n)?;
    check_dimensions(ch, targets, &arch)?;
    if ch.operators() != 2 {
        return Err(RisError::InvalidArgument(format!(
            "single-connected closed form is for L = 2, got L = {}",
            ch.operators()
        )));
    }
    let h2 = &ch.h_it[1];
    let d = &targets.d[0];
    if let Some((index, z)) = h2.iter().enumerate().find(|(_, z)| z.norm() <= eps_zero(1)) {
        return Err(RisError::DegenerateElement {
            index,
            magnitude: z.norm(),
        });
    }
    require_feasible(ch, targets, &arch)?;
    let phases: Vec<Complex64> = d
        .iter()
        .zip(h2.iter())
        .map(|(dn, hn)| unit_phase(dn * hn.conj(), 0.0))
        .collect();
    let gamma: Complex64 = phases
        .iter()
        .zip(ch.h_ri.iter().zip(ch.h_it[0].iter()))
        .map(|(p, (r, t))| r.conj() * p * t)
        .sum();
    let blocks = phases
        .iter()
        .map(|p| ComplexMatrix::from_element(1, 1, *p))
        .collect();
    Ok(DesignSolution {
        theta: BlockDiagonal::new(blocks)?,
        optimal_power: gamma.norm_sqr(),
        gamma,
        branch: SolveBranch::SingleConnected,
        direct_path: ZERO,
    })
}

/// The only unitary `Theta_g` with `Theta_g H = D` when `H` has full row
/// rank: `D H^H (H H^H)^{-1}`, evaluated through the SVD of `H`.
pub fn unique_group_block(h: &ComplexMatrix, d: &ComplexMatrix) -> Result<ComplexMatrix> {
    let gs = h.nrows();
    if numerical_rank(h, RANK_TOL) < gs {
        return Err(RisError::RankDeficient(format!(
            "constraint matrix does not have full row rank {gs}"
        )));
    }
    let svd = linalg::thin_svd(h);
    // thin SVD with r = min(gs, cols) = gs
    let mut right = svd.v.clone();
    for (j, s) in svd.singular_values.iter().enumerate() {
        right.column_mut(j).unscale_mut(*s);
    }
    let u = svd.u;
    let theta = d * right * u.adjoint();
    let dev = linalg::unitarity_deviation(&theta);
    if dev > 1e-6 {
        return Err(RisError::Infeasible(format!(
            "unique block deviates from unitary by {dev:e}"
        )));
    }
    Ok(theta)
}

/// General `L`-operator solver: free-block construction for `Gs >= L`, the
/// unique feasible point for `Gs < L`.
pub fn solve_multi_operator(
    ch: &ScenarioChannels,
    targets: &TargetReflections,
    arch: &RisArchitecture,
) -> Result<DesignSolution> {
    check_dimensions(ch, targets, arch)?;
    require_feasible(ch, targets, arch)?;
    let l = ch.operators();
    let hr = split_groups(&ch.h_ri, arch);
    let h1 = split_groups(&ch.h_it[0], arch);

    if arch.group_size() >= l {
        let pairs = reduced_constraints(ch, targets, arch)?;
        let frames = pairs
            .iter()
            .map(|(a, b)| GroupFrame::canonical(a, b))
            .collect::<Result<Vec<_>>>()?;
        let (theta, gamma) = optimal_blocks(&frames, &hr, &h1, ZERO, None)?;
        return Ok(DesignSolution {
            theta,
            optimal_power: free_branch_optimal_value(&pairs, &hr, &h1)?,
            gamma,
            branch: SolveBranch::MultiOperatorFree,
            direct_path: ZERO,
        });
    }

    let mut blocks = Vec::with_capacity(arch.groups());
    let mut gamma = ZERO;
    for g in 0..arch.groups() {
        let (h, d) = constraint_matrices(ch, targets, arch, g);
        let block = unique_group_block(&h, &d)?;
        // h_RI,g^H D_g H_g^+ h_IT1,g
        let left = d.adjoint() * &hr[g];
        let right = pseudo_solve(&h, &h1[g]);
        gamma += left.dotc(&right);
        blocks.push(block);
    }
    Ok(DesignSolution {
        theta: BlockDiagonal::new(blocks)?,
        optimal_power: gamma.norm_sqr(),
        gamma,
        branch: SolveBranch::UniqueSmallGroup,
        direct_path: ZERO,
    })
}

/// `H^H (H H^H)^{-1} x` for a full-row-rank `H`.
fn pseudo_solve(h: &ComplexMatrix, x: &ComplexVector) -> ComplexVector {
    let gram = h * h.adjoint();
    let y = gram
        .lu()
        .solve(x)
        .expect("full row rank checked by the caller");
    h.adjoint() * y
}

/// Dispatch on `(L, Gs)` to the matching closed form.
pub fn solve(
    ch: &ScenarioChannels,
    targets: &TargetReflections,
    arch: &RisArchitecture,
) -> Result<DesignSolution> {
    match (ch.operators(), arch.group_size()) {
        (2, 1) => {
            check_dimensions(ch, targets, arch)?;
            solve_single_connected(ch, targets)
        }
        (2, _) => solve_group_two_operator(ch, targets, arch, None),
        _ => solve_multi_operator(ch, targets, arch),
    }
}

/// `P_T |h_RI^H Theta h_IT1|^2`.
pub fn received_power(
    theta: &ComplexMatrix,
    h_ri: &ComplexVector,
    h_it1: &ComplexVector,
    tx_power: f64,
) -> Result<f64> {
    let n = h_ri.len();
    if theta.shape() != (n, n) || h_it1.len() != n {
        return Err(RisError::DimensionMismatch(format!(
            "Theta is {}x{}, h_RI has length {n}, h_IT1 has length {}",
            theta.nrows(),
            theta.ncols(),
            h_it1.len()
        )));
    }
    Ok(tx_power * h_ri.dotc(&(theta * h_it1)).norm_sqr())
}

/// A uniformly random feasible scattering matrix: Haar free blocks inside
/// the canonical frames, or the unique feasible point when `Gs < L`.
pub fn sample_feasible<R: Rng + ?Sized>(
    ch: &ScenarioChannels,
    targets: &TargetReflections,
    arch: &RisArchitecture,
    rng: &mut R,
) -> Result<BlockDiagonal> {
    if arch.group_size() < ch.operators() {
        return Ok(solve(ch, targets, arch)?.theta);
    }
    let frames = group_frames(ch, targets, arch)?;
    sample_in_frames(&frames, rng)
}

pub fn sample_in_frames<R: Rng + ?Sized>(
    frames: &[GroupFrame],
    rng: &mut R,
) -> Result<BlockDiagonal> {
    let blocks = frames
        .iter()
        .map(|f| {
            let k = f.free_dim();
            if k == 0 {
                f.block(&ComplexMatrix::zeros(0, 0))
            } else {
                f.block(&haar_unitary(k, rng))
            }
        })
        .collect();
    BlockDiagonal::new(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::rayleigh_vector;
    use crate::rng::RngStream;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_instance(
        n: usize,
        l: usize,
        gs: usize,
        seed: u64,
    ) -> (ScenarioChannels, TargetReflections, RisArchitecture) {
        let mut g = RngStream::new(seed, 17).generator();
        let h_ri = rayleigh_vector(n, 1.0, &mut g);
        let h_it = (0..l).map(|_| rayleigh_vector(n, 1.0, &mut g)).collect();
        let ch = ScenarioChannels::new(h_ri, h_it).unwrap();
        let arch = RisArchitecture::with_group_size(n, gs).unwrap();
        let t = generate_targets(&ch, &arch, TargetMode::Haar, &mut g).unwrap();
        (ch, t, arch)
    }

    #[test]
    fn feasibility_examples() {
        let (ch, _, arch) = random_instance(8, 2, 4, 1);
        let same = TargetReflections::new(vec![ch.h_it[1].clone()]);
        let r = check_feasibility(&ch, &same, &arch).unwrap();
        assert!(r.feasible);
        assert_eq!(r.max_deviation, 0.0);

        let doubled = TargetReflections::new(vec![ch.h_it[1].scale(2.0)]);
        assert!(!check_feasibility(&ch, &doubled, &arch).unwrap().feasible);

        let (ch, t, arch) = random_instance(16, 3, 4, 2);
        let r = check_feasibility(&ch, &t, &arch).unwrap();
        assert!(r.feasible && r.max_deviation < 1e-10, "{}", r.max_deviation);
    }

    #[test]
    fn feasibility_rejects_bad_dimensions() {
        let (ch, _, arch) = random_instance(8, 2, 4, 1);
        let short = TargetReflections::new(vec![ComplexVector::from_element(4, ONE)]);
        assert!(matches!(
            check_feasibility(&ch, &short, &arch),
            Err(RisError::DimensionMismatch(_))
        ));
        let none = TargetReflections::new(vec![]);
        assert!(matches!(
            check_feasibility(&ch, &none, &arch),
            Err(RisError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn identity_targets_copy_channels() {
        let (ch, _, arch) = random_instance(8, 3, 2, 3);
        let mut g = RngStream::new(0, 0).generator();
        let t = generate_targets(&ch, &arch, TargetMode::Identity, &mut g).unwrap();
        assert_eq!(t.d, ch.h_it[1..].to_vec());
    }

    #[test]
    fn scalar_groups_preserve_magnitudes() {
        let (ch, t, _) = random_instance(6, 2, 1, 4);
        for (d, h) in t.d[0].iter().zip(ch.h_it[1].iter()) {
            assert!((d.norm() - h.norm()).abs() < 1e-14);
        }
    }

    #[test]
    fn orthogonal_case_saturates() {
        // h_RI orthogonal to d and h_IT1 orthogonal to h_IT2: the aligned
        // term vanishes and P* = (|h_RI| |h_IT1|)^2.
        let e = |i: usize| {
            let mut v = ComplexVector::from_element(4, ZERO);
            v[i] = ONE;
            v
        };
        let h_ri = e(0).scale(2.0) + e(1) * c(0.0, 1.0);
        let d = e(2) * c(0.0, 3.0);
        let h1 = e(3).scale(1.5) + e(0) * c(0.5, 0.5);
        let h2 = e(1).scale(3.0);
        let ch = ScenarioChannels::new(h_ri.clone(), vec![h1.clone(), h2]).unwrap();
        let t = TargetReflections::new(vec![d]);
        let arch = RisArchitecture::fully_connected(4).unwrap();
        let s = solve_group_two_operator(&ch, &t, &arch, None).unwrap();
        let want = (h_ri.norm() * h1.norm()).powi(2);
        assert!((s.optimal_power - want).abs() < 1e-12 * want);
        assert!((s.achieved_power(&ch) - want).abs() < 1e-12 * want);
    }

    #[test]
    fn aligned_case_uses_identity() {
        // d = h_RI and h_IT2 = h_IT1 with equal norms: Theta = I is optimal
        let mut g = RngStream::new(5, 5).generator();
        let h1 = rayleigh_vector(6, 1.0, &mut g);
        let raw = rayleigh_vector(6, 1.0, &mut g);
        let h_ri = raw.scale(h1.norm() / raw.norm());
        let ch = ScenarioChannels::new(h_ri.clone(), vec![h1.clone(), h1.clone()]).unwrap();
        let t = TargetReflections::new(vec![h_ri.clone()]);
        let arch = RisArchitecture::fully_connected(6).unwrap();
        let s = solve_group_two_operator(&ch, &t, &arch, None).unwrap();
        let want = h_ri.norm_squared() * h1.norm_squared();
        assert!((s.optimal_power - want).abs() < 1e-10 * want);
        assert!((s.achieved_power(&ch) - want).abs() < 1e-10 * want);
    }

    #[test]
    fn group_solution_is_consistent() {
        let (ch, t, arch) = random_instance(8, 2, 4, 6);
        let s = solve_group_two_operator(&ch, &t, &arch, None).unwrap();
        let direct = s.achieved_power(&ch);
        assert!((s.optimal_power - direct).abs() <= 1e-9 * direct);
        assert!(s.theta.max_unitarity_deviation() < 1e-10);
        assert!(s.constraint_residuals(&ch, &t).iter().all(|&r| r < 1e-9));
    }

    #[test]
    fn direct_path_zero_matches_baseline() {
        let (ch, t, arch) = random_instance(8, 2, 2, 7);
        let a = solve_group_two_operator(&ch, &t, &arch, None).unwrap();
        let b = solve_group_two_operator(&ch, &t, &arch, Some(ZERO)).unwrap();
        assert_eq!(a, b);
        let h_rt = c(0.7, -1.2);
        let s = solve_group_two_operator(&ch, &t, &arch, Some(h_rt)).unwrap();
        let achieved = s.achieved_power(&ch);
        assert!((s.optimal_power - achieved).abs() <= 1e-9 * achieved);
        // the direct-path optimum dominates the baseline design evaluated with h_RT
        let baseline = (h_rt + a.theta.bilinear(&ch.h_ri, &ch.h_it[0])).norm_sqr();
        assert!(s.optimal_power >= baseline * (1.0 - 1e-12));
    }

    #[test]
    fn single_connected_examples() {
        let (ch, _, _) = random_instance(8, 2, 1, 8);
        let same = TargetReflections::new(vec![ch.h_it[1].clone()]);
        let s = solve_single_connected(&ch, &same).unwrap();
        assert!(s.theta.max_unitarity_deviation() < 1e-15);
        let dense = s.theta_dense();
        assert!(linalg::max_abs_diff(&dense, &ComplexMatrix::identity(8, 8)) < 1e-15);
        let direct = ch.h_ri.dotc(&ch.h_it[0]).norm_sqr();
        assert!((s.optimal_power - direct).abs() < 1e-12 * direct);

        let neg = TargetReflections::new(vec![-ch.h_it[1].clone()]);
        let s = solve_single_connected(&ch, &neg).unwrap();
        assert!(linalg::max_abs_diff(&s.theta_dense(), &(-ComplexMatrix::identity(8, 8))) < 1e-15);
        assert!((s.optimal_power - direct).abs() < 1e-12 * direct);

        let (ch, t, _) = random_instance(16, 2, 1, 9);
        let s = solve_single_connected(&ch, &t).unwrap();
        assert!((s.theta.mul_vec(&ch.h_it[1]) - &t.d[0]).norm() < 1e-12 * t.d[0].norm());
    }

    #[test]
    fn single_connected_degenerate_element() {
        let (mut ch, t, _) = random_instance(4, 2, 1, 10);
        ch.h_it[1][2] = ZERO;
        assert!(matches!(
            solve_single_connected(&ch, &t),
            Err(RisError::DegenerateElement { index: 2, .. })
        ));
    }

    #[test]
    fn infeasible_targets_rejected() {
        let (ch, t, arch) = random_instance(8, 2, 4, 11);
        let bad = TargetReflections::new(vec![t.d[0].scale(1.01)]);
        assert!(matches!(
            solve_group_two_operator(&ch, &bad, &arch, None),
            Err(RisError::Infeasible(_))
        ));
    }

    #[test]
    fn degenerate_group_with_zero_target_is_unconstrained() {
        let (mut ch, mut t, arch) = random_instance(8, 2, 4, 12);
        for i in 0..4 {
            ch.h_it[1][i] = ZERO;
            t.d[0][i] = ZERO;
        }
        let s = solve_group_two_operator(&ch, &t, &arch, None).unwrap();
        let direct = s.achieved_power(&ch);
        assert!((s.optimal_power - direct).abs() <= 1e-9 * direct);
        assert!(s.theta.max_unitarity_deviation() < 1e-10);

        t.d[0][0] = ONE;
        assert!(solve_group_two_operator(&ch, &t, &arch, None).is_err());
    }

    #[test]
    fn multi_operator_reduces_to_two_operator() {
        let (ch, t, arch) = random_instance(16, 2, 4, 13);
        let a = solve_group_two_operator(&ch, &t, &arch, None).unwrap();
        let b = solve_multi_operator(&ch, &t, &arch).unwrap();
        assert!(linalg::max_abs_diff(&a.theta_dense(), &b.theta_dense()) < 1e-12);
        assert!((a.optimal_power - b.optimal_power).abs() < 1e-12 * a.optimal_power);
    }

    #[test]
    fn small_group_identity_targets() {
        let mut g = RngStream::new(14, 0).generator();
        let h_ri = rayleigh_vector(8, 1.0, &mut g);
        let h_it: Vec<_> = (0..3).map(|_| rayleigh_vector(8, 1.0, &mut g)).collect();
        let ch = ScenarioChannels::new(h_ri, h_it).unwrap();
        let arch = RisArchitecture::with_group_size(8, 2).unwrap();
        let t = generate_targets(&ch, &arch, TargetMode::Identity, &mut g).unwrap();
        let s = solve_multi_operator(&ch, &t, &arch).unwrap();
        assert_eq!(s.branch, SolveBranch::UniqueSmallGroup);
        assert!(linalg::max_abs_diff(&s.theta_dense(), &ComplexMatrix::identity(8, 8)) < 1e-12);
        let want = ch.h_ri.dotc(&ch.h_it[0]).norm_sqr();
        assert!((s.optimal_power - want).abs() < 1e-10 * want);
    }

    #[test]
    fn multi_operator_free_branch() {
        let (ch, t, arch) = random_instance(16, 3, 4, 15);
        let s = solve_multi_operator(&ch, &t, &arch).unwrap();
        assert_eq!(s.branch, SolveBranch::MultiOperatorFree);
        let direct = s.achieved_power(&ch);
        assert!((s.optimal_power - direct).abs() <= 1e-9 * direct);
        assert!(s.constraint_residuals(&ch, &t).iter().all(|&r| r < 1e-9));
        let mut g = RngStream::new(15, 1).generator();
        for _ in 0..500 {
            let th = sample_feasible(&ch, &t, &arch, &mut g).unwrap();
            let p = th.bilinear(&ch.h_ri, &ch.h_it[0]).norm_sqr();
            assert!(p <= s.optimal_power * (1.0 + 1e-9));
        }
    }

    #[test]
    fn rank_deficient_channels_are_reduced() {
        // h_IT3 = 2 h_IT2: feasible targets exist (D_g = V_g H_g) but H_g has rank 1.
        let mut g = RngStream::new(16, 0).generator();
        let h_ri = rayleigh_vector(8, 1.0, &mut g);
        let h1 = rayleigh_vector(8, 1.0, &mut g);
        let h2 = rayleigh_vector(8, 1.0, &mut g);
        let ch = ScenarioChannels::new(h_ri, vec![h1, h2.clone(), h2.scale(2.0)]).unwrap();
        let arch = RisArchitecture::with_group_size(8, 4).unwrap();
        let t = generate_targets(&ch, &arch, TargetMode::Haar, &mut g).unwrap();
        let s = solve_multi_operator(&ch, &t, &arch).unwrap();
        let direct = s.achieved_power(&ch);
        assert!((s.optimal_power - direct).abs() <= 1e-9 * direct);
        assert!(s.constraint_residuals(&ch, &t).iter().all(|&r| r < 1e-9));
    }

    #[test]
    fn received_power_examples() {
        let ones = ComplexVector::from_element(4, ONE);
        let i4 = ComplexMatrix::identity(4, 4);
        assert!((received_power(&i4, &ones, &ones, 1.0).unwrap() - 16.0).abs() < 1e-12);
        let mut a = ComplexVector::from_element(4, ZERO);
        a[0] = ONE;
        let mut b = ComplexVector::from_element(4, ZERO);
        b[1] = ONE;
        assert_eq!(received_power(&i4, &a, &b, 1.0).unwrap(), 0.0);
        let (ch, t, arch) = random_instance(8, 2, 2, 18);
        let th = solve(&ch, &t, &arch).unwrap().theta_dense();
        let p1 = received_power(&th, &ch.h_ri, &ch.h_it[0], 1.0).unwrap();
        let p10 = received_power(&th, &ch.h_ri, &ch.h_it[0], 10.0).unwrap();
        assert!((p10 - 10.0 * p1).abs() < 1e-12 * p10);
        assert!(received_power(&i4, &ones, &ComplexVector::from_element(3, ONE), 1.0).is_err());
    }
}
