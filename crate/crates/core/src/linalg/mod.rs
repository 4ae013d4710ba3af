// Copyright 2026 flsim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Dense complex linear algebra kernels.
//!
//! Everything here runs sequentially (`Par::Seq`) so results are bit-for-bit
//! reproducible no matter how the caller parallelizes outer loops.

use faer::linalg::solvers::Solve;
use faer::{Accum, Par};
use num_complex::Complex64;
use thiserror::Error;

mod expm;
mod logm;
mod schur;

pub use expm::expm;
pub use logm::{logm, logm_triangular_factor, logm_triangular_factor_with_policy, BRANCH_TOL};
pub use schur::{eig, eig_from_schur, schur, schur_residual, Schur};

/// Dense complex matrix used throughout the crate.
pub type CMat = faer::Mat<Complex64>;

pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("eigenvalue iteration failed to converge (at index {0})")]
    NoConvergence(usize),
    #[error("matrix is singular or has a zero eigenvalue")]
    Singular,
    #[error(
        "principal logarithm is ambiguous: eigenvalue {re:.3e}{im:+.3e}i lies within {tol:.1e} of the negative real axis"
    )]
    BranchCut { re: f64, im: f64, tol: f64 },
    #[error("spectral radius {0:.6} exceeds the unit circle beyond tolerance")]
    SpectralRadius(f64),
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(n: usize, m: usize) -> CMat {
    CMat::zeros(n, m)
}

/// `a * b`, sequential. Small operands take a direct loop; faer's blocked
/// kernel only pays off for the superoperator sizes.
pub fn mat_mul(a: &CMat, b: &CMat) -> CMat {
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    if m.max(k).max(n) <= 48 {
        let mut out = CMat::zeros(m, n);
        for j in 0..n {
            for l in 0..k {
                let blj = b[(l, j)];
                if blj == ZERO {
                    continue;
                }
                for i in 0..m {
                    out[(i, j)] += a[(i, l)] * blj;
                }
            }
        }
        return out;
    }
    let mut out = CMat::zeros(m, n);
    faer::linalg::matmul::matmul(out.as_mut(), Accum::Replace, a.as_ref(), b.as_ref(), ONE, Par::Seq);
    out
}

/// `out += alpha * a * b`, sequential.
pub fn mat_mul_acc(out: &mut CMat, alpha: Complex64, a: &CMat, b: &CMat) {
    faer::linalg::matmul::matmul(out.as_mut(), Accum::Add, a.as_ref(), b.as_ref(), alpha, Par::Seq);
}

pub fn dagger(a: &CMat) -> CMat {
    CMat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)].conj())
}

pub fn scale(a: &CMat, z: Complex64) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * z)
}

pub fn add(a: &CMat, b: &CMat) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] + b[(i, j)])
}

pub fn sub(a: &CMat, b: &CMat) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)])
}

/// Maximum column sum of absolute values.
pub fn one_norm(a: &CMat) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        let mut s = 0.0;
        for i in 0..a.nrows() {
            s += a[(i, j)].norm();
        }
        best = best.max(s);
    }
    best
}

pub fn max_abs(a: &CMat) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            best = best.max(a[(i, j)].norm());
        }
    }
    best
}

pub fn all_finite(a: &CMat) -> bool {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let z = a[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return false;
            }
        }
    }
    true
}

/// Solves `A X = RHS` by partial-pivoting LU.
pub fn lu_solve(a: &CMat, rhs: &CMat) -> Result<CMat, LinalgError> {
    if a.nrows() != a.ncols() || a.nrows() != rhs.nrows() {
        return Err(LinalgError::Dimension(format!(
            "lu_solve: {}x{} vs rhs {}x{}",
            a.nrows(),
            a.ncols(),
            rhs.nrows(),
            rhs.ncols()
        )));
    }
    if !all_finite(a) || !all_finite(rhs) {
        return Err(LinalgError::NonFinite);
    }
    let lu = a.partial_piv_lu();
    Ok(lu.solve(rhs))
}

/// Eigendecomposition of a self-adjoint matrix. Returns eigenvalues in
/// ascending order with matching eigenvector columns.
pub fn herm_eig(a: &CMat) -> Result<(Vec<f64>, CMat), LinalgError> {
    use dyn_stack::{MemBuffer, MemStack};
    let n = a.nrows();
    if n != a.ncols() {
        return Err(LinalgError::Dimension("herm_eig: not square".into()));
    }
    if !all_finite(a) {
        return Err(LinalgError::NonFinite);
    }
    let params: faer::Spec<faer::linalg::evd::SelfAdjointEvdParams, Complex64> = faer::Spec::new(faer::auto!(Complex64));
    let mut s = faer::diag::Diag::<Complex64>::zeros(n);
    let mut u = CMat::zeros(n, n);
    let mut buf = MemBuffer::new(faer::linalg::evd::self_adjoint_evd_scratch::<Complex64>(
        n,
        faer::linalg::evd::ComputeEigenvectors::Yes,
        Par::Seq,
        params,
    ));
    faer::linalg::evd::self_adjoint_evd(
        a.as_ref(),
        s.as_mut(),
        Some(u.as_mut()),
        Par::Seq,
        MemStack::new(&mut buf),
        params,
    )
    .map_err(|_| LinalgError::NoConvergence(0))?;
    let mut vals: Vec<f64> = (0..n).map(|i| s[i].re).collect();
    // faer returns ascending order already; sort defensively while keeping
    // eigenvector columns attached.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap());
    let sorted_vals: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let sorted_u = CMat::from_fn(n, n, |i, j| u[(i, order[j])]);
    vals = sorted_vals;
    Ok((vals, sorted_u))
}
