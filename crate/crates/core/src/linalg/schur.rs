// Copyright 2026 flsim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Complex Schur decomposition A = Q T Q^H (T upper triangular) and the
//! eigendecomposition built on top of it.
//!
//! The Hessenberg reduction comes from faer; the QR iteration is a
//! single-shift implicit sweep with Wilkinson shifts (the ZLAHQR scheme),
//! and eigenvector extraction is triangular back-substitution (ZTREVC).

use dyn_stack::{MemBuffer, MemStack};
use faer::{Conj, Par};
use num_complex::Complex64;

use super::{all_finite, dagger, mat_mul, max_abs, one_norm, CMat, LinalgError, ONE, ZERO};

/// Schur form: `a = q * t * q^H` with unitary `q` and upper-triangular `t`.
pub struct Schur {
    pub q: CMat,
    pub t: CMat,
}

impl Schur {
    /// Eigenvalues, i.e. the diagonal of `t` (unsorted).
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        (0..self.t.nrows()).map(|i| self.t[(i, i)]).collect()
    }
}

/// Complex Givens rotation G = [[c, s], [-conj(s), c]] with real c >= 0 such
/// that G [a, b]^T = [r, 0]^T.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64, Complex64) {
    if b == ZERO {
        return (1.0, ZERO, a);
    }
    if a == ZERO {
        let babs = b.norm();
        return (0.0, b.conj() / babs, Complex64::new(babs, 0.0));
    }
    // scale to avoid under/overflow in the norm for subnormal-range entries
    let aabs = a.norm();
    let babs = b.norm();
    let scale = aabs.max(babs);
    let an = aabs / scale;
    let bn = babs / scale;
    let norm = scale * (an * an + bn * bn).sqrt();
    let alpha = a / aabs;
    let c = aabs / norm;
    let s = alpha * b.conj() / norm;
    (c, s, alpha * norm)
}

/// In-place single-shift implicit QR on an upper Hessenberg matrix `h` with
/// unitary accumulation into `z`. On success `h` is upper triangular.
fn hessenberg_qr(h: &mut CMat, z: &mut CMat) -> Result<(), LinalgError> {
    let n = h.nrows();
    if n <= 1 {
        return Ok(());
    }
    let ulp = f64::EPSILON;
    let smlnum = f64::MIN_POSITIVE / ulp;
    let overall = one_norm(h).max(smlnum);

    let mut ihi = n; // eigenvalues converge at positions ihi-1, ihi-2, ...
    let mut its = 0usize;
    let max_its_per_eig = 40usize;

    while ihi > 0 {
        // Find the start of the active block: smallest l such that the
        // subdiagonal entries below it are not negligible. Entries below
        // ulp * ||A|| are deflated outright; zeroing them is a perturbation
        // within the backward error of the decomposition and keeps clusters
        // of fully decayed propagator modes from stalling the shifts.
        let mut l = ihi - 1;
        while l > 0 {
            let sub = h[(l, l - 1)].norm();
            let mut tst = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            if tst == 0.0 {
                tst = overall;
            }
            if sub <= (ulp * tst).max(smlnum) || sub <= ulp * overall {
                h[(l, l - 1)] = ZERO;
                break;
            }
            l -= 1;
        }

        if l == ihi - 1 {
            // 1x1 block deflated.
            ihi -= 1;
            its = 0;
            continue;
        }

        its += 1;
        if its > max_its_per_eig {
            return Err(LinalgError::NoConvergence(ihi));
        }

        let i = ihi - 1;
        // Shift selection.
        let mut shift = h[(i, i)];
        if its % 10 == 0 {
            // exceptional shift
            shift = h[(i, i)] + Complex64::new(0.75 * h[(i, i - 1)].norm(), 0.0);
        } else {
            let u = h[(i - 1, i)].sqrt() * h[(i, i - 1)].sqrt();
            if u != ZERO {
                let x = (h[(i - 1, i - 1)] - shift) * Complex64::new(0.5, 0.0);
                let mut y = (x * x + u * u).sqrt();
                if x.re * y.re + x.im * y.im < 0.0 {
                    y = -y;
                }
                shift -= u * (u / (x + y));
            }
        }

        // Implicit single-shift sweep over the block [l, ihi).
        let mut a = h[(l, l)] - shift;
        let mut b = h[(l + 1, l)];
        for k in l..i {
            let (c, s, r) = givens(a, b);
            let cc = Complex64::new(c, 0.0);
            if k > l {
                h[(k, k - 1)] = r;
                h[(k + 1, k - 1)] = ZERO;
            }
            // rows k, k+1 over columns k..n
            for j in k..n {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = cc * x + s * y;
                h[(k + 1, j)] = -s.conj() * x + cc * y;
            }
            // columns k, k+1 over rows 0..min(k+2, ihi-1)+1
            let row_end = (k + 2).min(i) + 1;
            for i2 in 0..row_end {
                let x = h[(i2, k)];
                let y = h[(i2, k + 1)];
                h[(i2, k)] = cc * x + s.conj() * y;
                h[(i2, k + 1)] = -s * x + cc * y;
            }
            // accumulate z
            for i2 in 0..n {
                let x = z[(i2, k)];
                let y = z[(i2, k + 1)];
                z[(i2, k)] = cc * x + s.conj() * y;
                z[(i2, k + 1)] = -s * x + cc * y;
            }
            if k + 1 < i {
                a = h[(k + 1, k)];
                b = h[(k + 2, k)];
            }
        }
    }
    Ok(())
}

pub fn schur(a: &CMat) -> Result<Schur, LinalgError> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(LinalgError::Dimension("schur: not square".into()));
    }
    if !all_finite(a) {
        return Err(LinalgError::NonFinite);
    }
    if n == 0 {
        return Ok(Schur { q: CMat::zeros(0, 0), t: CMat::zeros(0, 0) });
    }
    if n == 1 {
        return Ok(Schur { q: super::identity(1), t: a.clone() });
    }

    let par = Par::Seq;
    let hess_params: faer::Spec<faer::linalg::evd::hessenberg::HessenbergParams, Complex64> =
        faer::Spec::new(faer::auto!(Complex64));
    let bs = faer::linalg::qr::no_pivoting::factor::recommended_block_size::<Complex64>(n - 1, n - 1);

    let mut h = a.clone();
    let mut z = super::identity(n);

    let req = dyn_stack::StackReq::any_of(&[
        faer::linalg::evd::hessenberg::hessenberg_in_place_scratch::<Complex64>(n, bs, par, hess_params),
        faer::linalg::householder::apply_block_householder_sequence_on_the_right_in_place_scratch::<Complex64>(
            n - 1,
            bs,
            n - 1,
        ),
    ]);
    let mut buf = MemBuffer::new(req);
    let stack = MemStack::new(&mut buf);

    {
        let mut householder = CMat::zeros(bs, n - 1);
        faer::linalg::evd::hessenberg::hessenberg_in_place(
            h.as_mut(),
            householder.as_mut(),
            par,
            stack,
            hess_params,
        );
        faer::linalg::householder::apply_block_householder_sequence_on_the_right_in_place_with_conj(
            h.as_ref().submatrix(1, 0, n - 1, n - 1),
            householder.as_ref(),
            Conj::No,
            z.as_mut().submatrix_mut(1, 1, n - 1, n - 1),
            par,
            stack,
        );
        for j in 0..n {
            for i in j + 2..n {
                h[(i, j)] = ZERO;
            }
        }
    }

    hessenberg_qr(&mut h, &mut z)?;
    for j in 0..n {
        for i in j + 1..n {
            h[(i, j)] = ZERO;
        }
    }
    Ok(Schur { q: z, t: h })
}

/// Right eigenvectors from a Schur form via back-substitution on `t`.
///
/// Returns eigenvalue/eigenvector pairs sorted by descending real part of the
/// eigenvalue (ties broken by descending imaginary part). Eigenvectors are
/// normalized to unit 2-norm.
pub fn eig_from_schur(s: &Schur) -> (Vec<Complex64>, CMat) {
    let n = s.t.nrows();
    let t = &s.t;
    let scale_floor = 1e-300_f64.max(max_abs(t) * f64::EPSILON);
    // Y is upper triangular: column k solves (T - lambda_k) y = 0, y[k] = 1.
    let mut y = CMat::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        y[(k, k)] = ONE;
        for i in (0..k).rev() {
            let mut acc = ZERO;
            for j in i + 1..=k {
                acc += t[(i, j)] * y[(j, k)];
            }
            let mut den = t[(i, i)] - lambda;
            if den.norm() < scale_floor {
                den = Complex64::new(scale_floor, 0.0);
            }
            y[(i, k)] = -acc / den;
        }
        // normalize column
        let mut nrm = 0.0f64;
        for i in 0..=k {
            nrm += y[(i, k)].norm_sqr();
        }
        let nrm = nrm.sqrt();
        if nrm > 0.0 {
            for i in 0..=k {
                y[(i, k)] /= nrm;
            }
        }
    }
    let v = mat_mul(&s.q, &y);
    let vals: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        (vals[b].re, vals[b].im)
            .partial_cmp(&(vals[a].re, vals[a].im))
            .unwrap()
    });
    let sorted_vals: Vec<Complex64> = order.iter().map(|&i| vals[i]).collect();
    let sorted_v = CMat::from_fn(n, n, |i, j| v[(i, order[j])]);
    (sorted_vals, sorted_v)
}

/// Full eigendecomposition: eigenvalues sorted by descending real part plus
/// right eigenvectors. The worst residual `||A v - lambda v||_2` over all
/// pairs is returned for diagnostics.
pub fn eig(a: &CMat) -> Result<(Vec<Complex64>, CMat, f64), LinalgError> {
    let s = schur(a)?;
    let (vals, vecs) = eig_from_schur(&s);
    let n = a.nrows();
    let av = mat_mul(a, &vecs);
    let mut worst = 0.0f64;
    for k in 0..n {
        let mut res = 0.0f64;
        for i in 0..n {
            res += (av[(i, k)] - vals[k] * vecs[(i, k)]).norm_sqr();
        }
        worst = worst.max(res.sqrt());
    }
    Ok((vals, vecs, worst))
}

/// `max |A - Q T Q^H|`, used in tests.
pub fn schur_residual(a: &CMat, s: &Schur) -> f64 {
    let qtqh = mat_mul(&mat_mul(&s.q, &s.t), &dagger(&s.q));
    max_abs(&super::sub(a, &qtqh))
}

#[cfg(test)]
mod tests {
    use super::super::{add, identity, scale, sub};
    use super::*;

    fn randish(n: usize, seed: u64) -> CMat {
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        CMat::from_fn(n, n, |_, _| Complex64::new(next(), next()))
    }

    #[test]
    fn givens_zeroes_second_component() {
        let a = Complex64::new(0.3, -1.2);
        let b = Complex64::new(-0.7, 0.4);
        let (c, s, r) = givens(a, b);
        let cc = Complex64::new(c, 0.0);
        let z1 = cc * a + s * b;
        let z2 = -s.conj() * a + cc * b;
        assert!((z1 - r).norm() < 1e-14);
        assert!(z2.norm() < 1e-14);
        // unitarity
        assert!((c * c + s.norm_sqr() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn schur_reconstructs_random_matrix() {
        for n in [2usize, 3, 8, 24, 60] {
            let a = randish(n, n as u64 + 1);
            let s = schur(&a).unwrap();
            assert!(schur_residual(&a, &s) < 1e-12 * (n as f64), "n = {n}");
            let qq = mat_mul(&dagger(&s.q), &s.q);
            assert!(max_abs(&sub(&qq, &identity(n))) < 1e-13 * (n as f64), "n = {n}");
            for j in 0..n {
                for i in j + 1..n {
                    assert_eq!(s.t[(i, j)], ZERO);
                }
            }
        }
    }

    #[test]
    fn eigenvalues_match_faer_reference() {
        // cross-check the QR iteration against faer's own eigensolver
        let n = 40;
        let a = randish(n, 99);
        let s = schur(&a).unwrap();
        let mut mine = s.eigenvalues();
        let evd = a.eigen().unwrap();
        let sref = evd.S();
        let mut theirs: Vec<Complex64> = (0..n).map(|i| sref[i]).collect();
        let key = |z: &Complex64| (z.re, z.im);
        mine.sort_by(|p, q| key(p).partial_cmp(&key(q)).unwrap());
        theirs.sort_by(|p, q| key(p).partial_cmp(&key(q)).unwrap());
        for (m, t) in mine.iter().zip(theirs.iter()) {
            assert!((m - t).norm() < 1e-10, "{m} vs {t}");
        }
    }

    #[test]
    fn eig_diagonal_matrix() {
        let mut d = CMat::zeros(4, 4);
        let vals = [
            Complex64::new(3.0, 0.5),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -2.0),
            Complex64::new(2.0, 1.0),
        ];
        for (i, v) in vals.iter().enumerate() {
            d[(i, i)] = *v;
        }
        let (found, _, worst) = eig(&d).unwrap();
        assert!(worst < 1e-12);
        assert!((found[0] - vals[0]).norm() < 1e-13);
        assert!((found[1] - vals[3]).norm() < 1e-13);
        assert!((found[2] - vals[2]).norm() < 1e-13);
        assert!((found[3] - vals[1]).norm() < 1e-13);
    }

    #[test]
    fn eig_residual_small_random() {
        for n in [5usize, 16, 40] {
            let a = randish(n, 17 * n as u64);
            let (_, _, worst) = eig(&a).unwrap();
            let norm = one_norm(&a);
            assert!(worst < 1e-10 * norm.max(1.0), "n = {n} residual {worst}");
        }
    }

    #[test]
    fn eig_defective_jordan_block_does_not_blow_up() {
        let mut j = CMat::zeros(3, 3);
        for i in 0..3 {
            j[(i, i)] = Complex64::new(0.7, 0.1);
            if i + 1 < 3 {
                j[(i, i + 1)] = ONE;
            }
        }
        let (vals, vecs, _) = eig(&j).unwrap();
        for v in &vals {
            assert!((v - Complex64::new(0.7, 0.1)).norm() < 1e-4);
        }
        assert!(all_finite(&vecs));
    }

    #[test]
    fn rejects_non_finite() {
        let mut a = randish(3, 2);
        a[(1, 1)] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(schur(&a), Err(LinalgError::NonFinite)));
    }

    #[test]
    fn hermitian_spectrum_is_real_and_sorted() {
        let g = randish(12, 5);
        let h = add(&g, &dagger(&g));
        let (vals, _, _) = eig(&h).unwrap();
        for v in &vals {
            assert!(v.im.abs() < 1e-10);
        }
        for w in vals.windows(2) {
            assert!(w[0].re >= w[1].re - 1e-12);
        }
        let _ = scale(&h, ONE);
    }
}
