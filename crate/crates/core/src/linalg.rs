//! Dense complex linear algebra used by the scattering-matrix constructions.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Result, RisError};
use crate::rng::complex_normal;

pub type ComplexVector = DVector<Complex64>;
pub type ComplexMatrix = DMatrix<Complex64>;

/// Relative singular-value threshold below which a direction is treated as
/// numerically absent.
pub const RANK_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Absolute norm threshold for "zero" vectors of the given dimension.
pub fn eps_zero(dim: usize) -> f64 {
    1e-12 * (dim.max(1) as f64)
}

/// A unitary matrix whose leading `anchor_cols` columns are pinned to the
/// orthonormalized columns of the completed object.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryCompletion {
    pub u: ComplexMatrix,
    pub anchor_cols: usize,
}

pub fn all_finite_vec(v: &ComplexVector) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn all_finite_mat(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// `max |U^H U - I|` over all entries.
pub fn unitarity_deviation(u: &ComplexMatrix) -> f64 {
    let g = u.adjoint() * u;
    max_abs_diff(&g, &ComplexMatrix::identity(u.ncols(), u.ncols()))
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Phase `z/|z|`, or 1 when `|z| <= tol`.
pub fn unit_phase(z: Complex64, tol: f64) -> Complex64 {
    let r = z.norm();
    if r <= tol {
        ONE
    } else {
        z / r
    }
}

/// Canonical unitary completion of a vector: a Householder reflector that
/// sends `e_1` to `x/|x|`, with the first column rescaled by a phase.
/// Returns the identity when `x` is a positive multiple of `e_1`.
pub fn unitary_completion_vector(x: &ComplexVector, n: usize) -> Result<UnitaryCompletion> {
    if x.len() != n {
        return Err(RisError::DimensionMismatch(format!(
            "vector length {} but completion dimension {n}",
            x.len()
        )));
    }
    if n == 0 {
        return Err(RisError::EmptyInput("vector"));
    }
    if !all_finite_vec(x) {
        return Err(RisError::NonFinite("vector"));
    }
    let norm = x.norm();
    let eps = eps_zero(n);
    if norm <= eps {
        return Err(RisError::ZeroVector { norm, eps });
    }
    let u = x.unscale(norm);
    let phase = unit_phase(u[0], 0.0);

    // w = u + phase e1 satisfies |w|^2 = 2 + 2|u_1| >= 2, so no cancellation.
    let mut w = u.clone();
    w[0] += phase;
    let beta = 2.0 / w.norm_squared();
    let mut h = ComplexMatrix::identity(n, n);
    for j in 0..n {
        let wj = w[j].conj();
        for i in 0..n {
            h[(i, j)] -= w[i] * wj * beta;
        }
    }
    // H u = -phase e1, hence H (-phase e1) = u.
    let scale = -phase;
    for i in 0..n {
        h[(i, 0)] *= scale;
    }
    Ok(UnitaryCompletion {
        u: h,
        anchor_cols: 1,
    })
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues unsorted.
fn hermitian_eigen(a: &ComplexMatrix) -> (DVector<f64>, ComplexMatrix) {
    let eig = SymmetricEigen::new(a.clone());
    (eig.eigenvalues, eig.eigenvectors)
}

fn check_hermitian(a: &ComplexMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(RisError::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !all_finite_mat(a) {
        return Err(RisError::NonFinite("matrix"));
    }
    let scale = a.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let dev = max_abs_diff(a, &a.adjoint());
    if dev > 1e-10 * scale {
        return Err(RisError::NotHermitian(dev));
    }
    Ok(())
}

fn rebuild(vecs: &ComplexMatrix, vals: impl Iterator<Item = f64>) -> ComplexMatrix {
    let mut scaled = vecs.clone();
    for (j, v) in vals.enumerate() {
        scaled.column_mut(j).scale_mut(v);
    }
    let out = scaled * vecs.adjoint();
    // symmetrize away rounding
    (&out + out.adjoint()).scale(0.5)
}

/// Hermitian square root of a positive semidefinite matrix. Slightly negative
/// eigenvalues (rounding noise) are clamped to zero.
pub fn psd_sqrt(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_hermitian(a)?;
    let n = a.nrows();
    if n == 0 {
        return Err(RisError::EmptyInput("matrix"));
    }
    let (vals, vecs) = hermitian_eigen(a);
    let trace_scale = (a.trace().re / n as f64).abs();
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -1e-8 * trace_scale {
        return Err(RisError::NotPsd {
            min_eigenvalue: min,
        });
    }
    Ok(rebuild(&vecs, vals.iter().map(|&l| l.max(0.0).sqrt())))
}

/// `A^{-1/2}` for a Hermitian positive definite matrix whose condition number
/// (in singular-value terms) is within `1/RANK_TOL`.
pub fn psd_inv_sqrt(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_hermitian(a)?;
    let (vals, vecs) = hermitian_eigen(a);
    let max = vals.iter().cloned().fold(0.0, f64::max);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if max <= 0.0 || min <= (RANK_TOL * RANK_TOL) * max {
        return Err(RisError::RankDeficient(format!(
            "Gram eigenvalues span [{min:e}, {max:e}]"
        )));
    }
    Ok(rebuild(&vecs, vals.iter().map(|&l| 1.0 / l.sqrt())))
}

/// Orthonormal part `X (X^H X)^{-1/2}` of a full-column-rank matrix.
pub fn polar_factor(x: &ComplexMatrix) -> Result<ComplexMatrix> {
    let gram = x.adjoint() * x;
    Ok(x * psd_inv_sqrt(&gram)?)
}

/// Thin SVD `m = u diag(singular_values) v^H` with `k = min(rows, cols)`
/// columns in `u` and `v` and singular values in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinSvd {
    pub u: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub v: ComplexMatrix,
}

impl ThinSvd {
    pub fn recompose(&self) -> ComplexMatrix {
        let mut us = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.adjoint()
    }
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD. Used instead of nalgebra's complex SVD,
/// which loses accuracy on rank-deficient input; Jacobi also resolves small
/// singular values to high relative accuracy, which the rank decisions need.
pub fn thin_svd(m: &ComplexMatrix) -> ThinSvd {
    let (rows, cols) = m.shape();
    if rows < cols {
        let t = thin_svd(&m.adjoint());
        return ThinSvd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        };
    }
    let mut a = m.clone();
    let mut v = ComplexMatrix::identity(cols, cols);
    let tol = f64::EPSILON * rows as f64;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dotc(&a.column(q));
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // make the coupling real, then apply a real rotation
                let phase = (gamma / g).conj();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for i in 0..mat.nrows() {
                        let xp = mat[(i, p)];
                        let xq = mat[(i, q)] * phase;
                        mat[(i, p)] = xp * c - xq * s;
                        mat[(i, q)] = xp * s + xq * c;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..cols).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let smax = order.first().map_or(0.0, |&i| norms[i]);
    let mut u = ComplexMatrix::zeros(rows, cols);
    let mut vs = ComplexMatrix::zeros(cols, cols);
    let mut rank = 0;
    for (k, &j) in order.iter().enumerate() {
        vs.set_column(k, &v.column(j));
        if norms[j] > 0.0 && norms[j] > f64::EPSILON * smax {
            u.set_column(k, &(a.column(j) / Complex64::new(norms[j], 0.0)));
            rank = k + 1;
        }
    }
    if rank < cols {
        // left vectors of (numerically) zero singular values: any orthonormal
        // extension of the ones already found
        let basis = extend_to_unitary(&u.columns(0, rank).into_owned());
        u.columns_mut(rank, cols - rank)
            .copy_from(&basis.columns(rank, cols - rank));
    }
    ThinSvd {
        u,
        singular_values: order.iter().map(|&j| norms[j]).collect(),
        v: vs,
    }
}

/// Singular values in descending order.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    thin_svd(m).singular_values
}

/// Number of singular values above `tol` times the largest one.
pub fn numerical_rank(m: &ComplexMatrix, tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&v| v > tol * smax).count(),
        _ => 0,
    }
}

/// Extend the orthonormal columns of `q` (n x m) to an n x n unitary by
/// Gram-Schmidt over the standard basis, picking at each step the basis
/// vector with the largest residual and orthogonalizing twice.
fn extend_to_unitary(q: &ComplexMatrix) -> ComplexMatrix {
    let n = q.nrows();
    let m = q.ncols();
    let mut basis: Vec<ComplexVector> = (0..m).map(|j| q.column(j).into_owned()).collect();
    let mut used = vec![false; n];
    while basis.len() < n {
        let mut best: Option<(usize, ComplexVector, f64)> = None;
        for (i, taken) in used.iter().enumerate() {
            if *taken {
                continue;
            }
            let mut r = ComplexVector::from_element(n, ZERO);
            r[i] = ONE;
            for _ in 0..2 {
                for b in &basis {
                    let c = b.dotc(&r);
                    r.axpy(-c, b, ONE);
                }
            }
            let norm = r.norm();
            if best.as_ref().is_none_or(|(_, _, bn)| norm > *bn) {
                best = Some((i, r, norm));
            }
        }
        let (i, r, norm) = best.expect("fewer than n basis vectors but none left");
        used[i] = true;
        basis.push(r.unscale(norm));
    }
    ComplexMatrix::from_columns(&basis)
}

/// Canonical unitary completion of a full-column-rank `n x m` matrix: the
/// first `m` columns are the polar factor, the rest an orthonormal basis of
/// its complement. For `m = 1` this is [`unitary_completion_vector`].
pub fn unitary_completion_matrix(x: &ComplexMatrix) -> Result<UnitaryCompletion> {
    let (n, m) = x.shape();
    if m == 0 || n == 0 {
        return Err(RisError::EmptyInput("matrix"));
    }
    if m > n {
        return Err(RisError::DimensionMismatch(format!(
            "cannot complete a {n}x{m} matrix with more columns than rows"
        )));
    }
    if !all_finite_mat(x) {
        return Err(RisError::NonFinite("matrix"));
    }
    if m == 1 {
        return unitary_completion_vector(&x.column(0).into_owned(), n);
    }
    let sv = singular_values(x);
    let smax = sv[0];
    let smin = sv[m - 1];
    if smax <= eps_zero(n) || smin <= RANK_TOL * smax {
        return Err(RisError::RankDeficient(format!(
            "singular values span [{smin:e}, {smax:e}]; reduce the constraints first"
        )));
    }
    let p = polar_factor(x)?;
    Ok(UnitaryCompletion {
        u: extend_to_unitary(&p),
        anchor_cols: m,
    })
}

/// Block-diagonal assembly of square blocks.
pub fn block_diag(blocks: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    if blocks.is_empty() {
        return Err(RisError::EmptyInput("blocks"));
    }
    if let Some(b) = blocks.iter().find(|b| !b.is_square()) {
        return Err(RisError::DimensionMismatch(format!(
            "block of shape {}x{} is not square",
            b.nrows(),
            b.ncols()
        )));
    }
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = ComplexMatrix::from_element(n, n, ZERO);
    let mut off = 0;
    for b in blocks {
        let k = b.nrows();
        out.view_mut((off, off), (k, k)).copy_from(b);
        off += k;
    }
    Ok(out)
}

/// Haar-distributed `n x n` unitary: QR of a standard complex Gaussian matrix
/// with the phases of `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    assert!(n >= 1, "haar_unitary needs n >= 1");
    let z = ComplexMatrix::from_fn(n, n, |_, _| complex_normal(rng, 1.0));
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let ph = unit_phase(r[(j, j)], 0.0);
        for z in q.column_mut(j).iter_mut() {
            *z *= ph;
        }
    }
    q
}

/// Rows `start..start+len` of a vector.
pub fn segment(v: &ComplexVector, start: usize, len: usize) -> ComplexVector {
    v.rows(start, len).into_owned()
}
