// Copyright 2026 flsim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Principal matrix logarithm by inverse scaling and squaring on the Schur
//! form, with square roots of the triangular factor.
//!
//! Ref: N. J. Higham, "Functions of Matrices: Theory and Computation",
//! SIAM (2008), ch. 11. Works for defective matrices, which is why the
//! propagator logarithms in this crate never go through an eigenbasis.

use faer::Par;
use num_complex::Complex64;

use super::schur::{schur, Schur};
use super::{all_finite, dagger, identity, mat_mul, one_norm, sub, CMat, LinalgError, ZERO};

/// Distance from the negative real axis below which the principal branch is
/// declared ambiguous.
pub const BRANCH_TOL: f64 = 1e-12;

/// Principal square root of an upper-triangular matrix
/// (Björck–Hammarling recurrence).
fn sqrtm_triangular(t: &CMat) -> CMat {
    let n = t.nrows();
    let mut u = CMat::zeros(n, n);
    for i in 0..n {
        u[(i, i)] = t[(i, i)].sqrt();
    }
    // column sweep, superdiagonal by superdiagonal
    for d in 1..n {
        for i in 0..n - d {
            let j = i + d;
            let mut acc = ZERO;
            for k in i + 1..j {
                acc += u[(i, k)] * u[(k, j)];
            }
            u[(i, j)] = (t[(i, j)] - acc) / (u[(i, i)] + u[(j, j)]);
        }
    }
    u
}

/// log(I + E) for upper-triangular E via the m-node Gauss–Legendre quadrature
/// of the integral representation (equivalent to the [m/m] Padé approximant).
fn log_pade_triangular(e: &CMat) -> CMat {
    // 8-point Gauss-Legendre nodes/weights on [0, 1].
    const NODES: [f64; 8] = [
        0.01985507175123188,
        0.10166676129318664,
        0.2372337950418355,
        0.40828267875217505,
        0.5917173212478249,
        0.7627662049581645,
        0.8983332387068134,
        0.9801449282487681,
    ];
    const WEIGHTS: [f64; 8] = [
        0.05061426814518813,
        0.11119051722668724,
        0.15685332293894363,
        0.18134189168918097,
        0.18134189168918097,
        0.15685332293894363,
        0.11119051722668724,
        0.05061426814518813,
    ];
    let n = e.nrows();
    let mut acc = CMat::zeros(n, n);
    for (x, w) in NODES.iter().zip(WEIGHTS.iter()) {
        // solve (I + x E) X = E, triangular system
        let mut m = identity(n);
        for j in 0..n {
            for i in 0..=j {
                m[(i, j)] += Complex64::new(*x, 0.0) * e[(i, j)];
            }
        }
        let mut rhs = e.clone();
        faer::linalg::triangular_solve::solve_upper_triangular_in_place(
            m.as_ref(),
            rhs.as_mut(),
            Par::Seq,
        );
        for j in 0..n {
            for i in 0..=j {
                acc[(i, j)] += Complex64::new(*w, 0.0) * rhs[(i, j)];
            }
        }
    }
    acc
}

/// Principal logarithm of the triangular factor of a Schur form.
///
/// Returns an upper-triangular `X` with `exp(X) = T`; together with the Schur
/// basis this gives `log(A) = Q X Q^H`, and `(Q, X)` is itself a valid Schur
/// form of `log(A)`.
///
/// Errors when an eigenvalue sits on (or within `BRANCH_TOL` of) the closed
/// negative real axis, where the principal branch is not defined, and when an
/// eigenvalue vanishes.
pub fn logm_triangular_factor(s: &Schur) -> Result<CMat, LinalgError> {
    logm_triangular_factor_with_policy(s, false)
}

/// Like [`logm_triangular_factor`], optionally admitting eigenvalues exactly
/// on the negative real axis with the canonical boundary branch
/// Log(−x) = ln x + iπ. Callers enable this only when the matrix has a
/// structural symmetry pinning those eigenvalues to the axis, where the
/// boundary choice is deterministic rather than a roundoff coin flip.
pub fn logm_triangular_factor_with_policy(
    s: &Schur,
    allow_negative_real: bool,
) -> Result<CMat, LinalgError> {
    for lambda in s.eigenvalues() {
        if lambda.norm() == 0.0 {
            return Err(LinalgError::Singular);
        }
        if !allow_negative_real && lambda.re < 0.0 && lambda.im.abs() <= BRANCH_TOL {
            return Err(LinalgError::BranchCut { re: lambda.re, im: lambda.im, tol: BRANCH_TOL });
        }
    }

    let n = s.t.nrows();
    let mut t = s.t.clone();
    if allow_negative_real {
        // Snap near-axis eigenvalues onto the axis with a +0 imaginary part
        // so the principal square roots stay on the +i side.
        for i in 0..n {
            let lam = t[(i, i)];
            if lam.re < 0.0 && lam.im.abs() <= BRANCH_TOL * lam.norm().max(1e-300) {
                t[(i, i)] = Complex64::new(lam.re, 0.0);
            }
        }
    }
    let id = identity(n);
    let mut sqrt_count = 0u32;
    const THETA: f64 = 0.25;
    const MAX_SQRTS: u32 = 60;
    while one_norm(&sub(&t, &id)) > THETA {
        if sqrt_count >= MAX_SQRTS {
            return Err(LinalgError::NoConvergence(n));
        }
        t = sqrtm_triangular(&t);
        sqrt_count += 1;
    }
    let e = sub(&t, &id);
    let mut x = log_pade_triangular(&e);
    let factor = Complex64::new(2f64.powi(sqrt_count as i32), 0.0);
    for j in 0..n {
        for i in 0..=j {
            x[(i, j)] *= factor;
        }
    }
    Ok(x)
}

/// Principal logarithm of a square complex matrix.
pub fn logm(a: &CMat) -> Result<CMat, LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::Dimension("logm: not square".into()));
    }
    if !all_finite(a) {
        return Err(LinalgError::NonFinite);
    }
    let s = schur(a)?;
    let x = logm_triangular_factor(&s)?;
    Ok(mat_mul(&mat_mul(&s.q, &x), &dagger(&s.q)))
}
