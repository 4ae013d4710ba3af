// Copyright 2026 flsim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Operators, superoperators, and the Fock-Liouville machinery.
//!
//! Density matrices are vectorized row-major: `vec(rho)[i*d + j] = rho[i][j]`,
//! matching the |i⟩⊗|j⟩* pairing. Under that stacking,
//! `vec(A rho B) = (A ⊗ B^T) vec(rho)`, which fixes every superoperator
//! formula below. All generator entries are angular frequencies (rad/s).

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{self, CMat, LinalgError, ONE, ZERO};

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("vector length {0} is not a perfect square")]
    NotSquareLength(usize),
    #[error("jump rate must be nonnegative, got {0}")]
    NegativeRate(f64),
    #[error("operator is not Hermitian: max |A - A^H| = {defect:.3e} exceeds {tol:.3e}")]
    NotHermitian { defect: f64, tol: f64 },
    #[error("spectral radius {0:.8} exceeds 1 beyond the propagator tolerance")]
    NotAPropagator(f64),
    #[error("matrix logarithm round-trip residual {0:.3e} exceeds contract")]
    LogRoundTrip(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Dense complex square matrix on the Hilbert space.
#[derive(Clone)]
pub struct Operator {
    dim: usize,
    mat: CMat,
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, mat: CMat::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, mat: linalg::identity(dim) }
    }

    pub fn from_mat(mat: CMat) -> Result<Self, OperatorError> {
        if mat.nrows() != mat.ncols() {
            return Err(OperatorError::Dimension(format!(
                "operator must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Self { dim: mat.nrows(), mat })
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        Self { dim, mat: CMat::from_fn(dim, dim, f) }
    }

    /// |ket⟩⟨bra| on a `dim`-dimensional space.
    pub fn ket_bra(dim: usize, ket: &[Complex64], bra: &[Complex64]) -> Self {
        assert_eq!(ket.len(), dim);
        assert_eq!(bra.len(), dim);
        Self::from_fn(dim, |i, j| ket[i] * bra[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn mat_mut(&mut self) -> &mut CMat {
        &mut self.mat
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.mat[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, z: Complex64) {
        self.mat[(i, j)] = z;
    }

    pub fn dagger(&self) -> Self {
        Self { dim: self.dim, mat: linalg::dagger(&self.mat) }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.mat[(i, i)]).sum()
    }

    pub fn scale(&self, z: Complex64) -> Self {
        Self { dim: self.dim, mat: linalg::scale(&self.mat, z) }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { dim: self.dim, mat: linalg::add(&self.mat, &other.mat) }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { dim: self.dim, mat: linalg::sub(&self.mat, &other.mat) }
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self { dim: self.dim, mat: linalg::mat_mul(&self.mat, &other.mat) }
    }

    /// A|v⟩ for a state vector.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.dim];
        for j in 0..self.dim {
            let vj = v[j];
            if vj == ZERO {
                continue;
            }
            for i in 0..self.dim {
                out[i] += self.mat[(i, j)] * vj;
            }
        }
        out
    }

    /// ⟨u|A|v⟩.
    pub fn matrix_element(&self, u: &[Complex64], v: &[Complex64]) -> Complex64 {
        let av = self.apply(v);
        u.iter().zip(av.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.mat)
    }

    /// max |A - A^H|.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.dim {
            for i in 0..=j {
                worst = worst.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Checks max |A - A^H| < 1e-12 * max|A|.
    pub fn assert_hermitian(&self) -> Result<(), OperatorError> {
        let tol = 1e-12 * self.max_abs().max(f64::MIN_POSITIVE);
        let defect = self.hermiticity_defect();
        if defect < tol {
            Ok(())
        } else {
            Err(OperatorError::NotHermitian { defect, tol })
        }
    }

    /// Eigenvalues/eigenvectors of a Hermitian operator, ascending order.
    pub fn herm_eig(&self) -> Result<(Vec<f64>, CMat), OperatorError> {
        Ok(linalg::herm_eig(&self.mat)?)
    }

    /// exp(A * t).
    pub fn expm_scaled(&self, t: f64) -> Result<Self, OperatorError> {
        let scaled = linalg::scale(&self.mat, Complex64::new(t, 0.0));
        Ok(Self { dim: self.dim, mat: linalg::expm(&scaled)? })
    }
}

/// Superoperator on the dim^2 Fock-Liouville space.
#[derive(Clone)]
pub struct SuperOperator {
    hilbert_dim: usize,
    mat: CMat,
}

impl SuperOperator {
    pub fn from_mat(hilbert_dim: usize, mat: CMat) -> Result<Self, OperatorError> {
        let d2 = hilbert_dim * hilbert_dim;
        if mat.nrows() != d2 || mat.ncols() != d2 {
            return Err(OperatorError::Dimension(format!(
                "superoperator must be {d2}x{d2} for Hilbert dim {hilbert_dim}, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Self { hilbert_dim, mat })
    }

    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    pub fn dim(&self) -> usize {
        self.hilbert_dim * self.hilbert_dim
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert_eq!(v.len(), n);
        let mut out = vec![ZERO; n];
        let rhs = CMat::from_fn(n, 1, |i, _| v[i]);
        let mut dst = CMat::zeros(n, 1);
        faer::linalg::matmul::matmul(
            dst.as_mut(),
            faer::Accum::Replace,
            self.mat.as_ref(),
            rhs.as_ref(),
            ONE,
            faer::Par::Seq,
        );
        for i in 0..n {
            out[i] = dst[(i, 0)];
        }
        out
    }

    /// exp(L * t).
    pub fn expm_scaled(&self, t: f64) -> Result<Self, OperatorError> {
        let scaled = linalg::scale(&self.mat, Complex64::new(t, 0.0));
        Ok(Self { hilbert_dim: self.hilbert_dim, mat: linalg::expm(&scaled)? })
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self { hilbert_dim: self.hilbert_dim, mat: linalg::mat_mul(&self.mat, &other.mat) }
    }
}

/// A Lindblad jump channel: dissipator rate * D[operator].
#[derive(Clone)]
pub struct JumpChannel {
    pub operator: Operator,
    pub rate: f64,
}

impl JumpChannel {
    pub fn new(operator: Operator, rate: f64) -> Result<Self, OperatorError> {
        if rate < 0.0 {
            return Err(OperatorError::NegativeRate(rate));
        }
        Ok(Self { operator, rate })
    }
}

/// Tensor product. `kron(a, b)` acts on the product space with `a` on the
/// leading (slow) index: `(a ⊗ b)[(i1*db + i2), (j1*db + j2)] = a[i1,j1] b[i2,j2]`.
pub fn kron(a: &Operator, b: &Operator) -> Operator {
    let (da, db) = (a.dim, b.dim);
    let dim = da * db;
    let mut out = CMat::zeros(dim, dim);
    for i1 in 0..da {
        for j1 in 0..da {
            let aij = a.mat[(i1, j1)];
            if aij == ZERO {
                continue;
            }
            for i2 in 0..db {
                for j2 in 0..db {
                    out[(i1 * db + i2, j1 * db + j2)] = aij * b.mat[(i2, j2)];
                }
            }
        }
    }
    Operator { dim, mat: out }
}

/// Raw Kronecker product of general matrices (used to assemble Liouvillians).
fn kron_mat(a: &CMat, b: &CMat) -> CMat {
    let (ra, ca) = (a.nrows(), a.ncols());
    let (rb, cb) = (b.nrows(), b.ncols());
    let mut out = CMat::zeros(ra * rb, ca * cb);
    for i1 in 0..ra {
        for j1 in 0..ca {
            let aij = a[(i1, j1)];
            if aij == ZERO {
                continue;
            }
            for i2 in 0..rb {
                for j2 in 0..cb {
                    out[(i1 * rb + i2, j1 * cb + j2)] = aij * b[(i2, j2)];
                }
            }
        }
    }
    out
}

/// Row-major vectorization: `vec(rho)[i*d + j] = rho[i][j]`.
pub fn vectorize(rho: &Operator) -> Vec<Complex64> {
    let d = rho.dim;
    let mut v = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            v.push(rho.mat[(i, j)]);
        }
    }
    v
}

/// Inverse of [`vectorize`]. Errors if the length is not a perfect square.
pub fn devectorize(v: &[Complex64]) -> Result<Operator, OperatorError> {
    let len = v.len();
    let d = (len as f64).sqrt().round() as usize;
    if d * d != len {
        return Err(OperatorError::NotSquareLength(len));
    }
    Ok(Operator::from_fn(d, |i, j| v[i * d + j]))
}

/// Lindblad generator in Fock-Liouville space:
///
/// L = -i (H ⊗ I - I ⊗ H^T) + Σ_k γ_k [ c_k ⊗ conj(c_k)
///     - ½ (c_k^H c_k ⊗ I) - ½ (I ⊗ (c_k^H c_k)^T) ]
pub fn liouvillian(h: Option<&Operator>, channels: &[JumpChannel]) -> Result<SuperOperator, OperatorError> {
    let dim = match (h, channels.first()) {
        (Some(h), _) => h.dim,
        (None, Some(c)) => c.operator.dim,
        (None, None) => {
            return Err(OperatorError::Dimension(
                "liouvillian needs a Hamiltonian or at least one channel".into(),
            ))
        }
    };
    for c in channels {
        if c.operator.dim != dim {
            return Err(OperatorError::Dimension(format!(
                "channel dim {} != Hamiltonian dim {}",
                c.operator.dim, dim
            )));
        }
        if c.rate < 0.0 {
            return Err(OperatorError::NegativeRate(c.rate));
        }
    }
    let id = linalg::identity(dim);
    let d2 = dim * dim;
    let mut l = CMat::zeros(d2, d2);

    if let Some(h) = h {
        if h.dim != dim {
            return Err(OperatorError::Dimension("Hamiltonian dim mismatch".into()));
        }
        let ht = CMat::from_fn(dim, dim, |i, j| h.mat[(j, i)]);
        let left = kron_mat(&h.mat, &id);
        let right = kron_mat(&id, &ht);
        let minus_i = Complex64::new(0.0, -1.0);
        l = linalg::add(&l, &linalg::scale(&linalg::sub(&left, &right), minus_i));
    }

    for c in channels {
        if c.rate == 0.0 {
            continue;
        }
        let g = Complex64::new(c.rate, 0.0);
        let cm = &c.operator.mat;
        let c_conj = CMat::from_fn(dim, dim, |i, j| cm[(i, j)].conj());
        let cdc = linalg::mat_mul(&linalg::dagger(cm), cm);
        let cdc_t = CMat::from_fn(dim, dim, |i, j| cdc[(j, i)]);

        let jump = kron_mat(cm, &c_conj);
        let left = kron_mat(&cdc, &id);
        let right = kron_mat(&id, &cdc_t);
        let half = Complex64::new(0.5, 0.0);
        let diss = linalg::sub(&jump, &linalg::scale(&linalg::add(&left, &right), half));
        l = linalg::add(&l, &linalg::scale(&diss, g));
    }

    SuperOperator::from_mat(dim, l)
}

/// Direct right-hand side -i[H,rho] + Σ γ D[c] rho, evaluated in Hilbert
/// space. This is the reference the vectorized generator is tested against,
/// and the fast path for time-dependent integration.
pub fn lindblad_rhs(h: Option<&Operator>, channels: &[JumpChannel], rho: &Operator) -> Operator {
    let dim = rho.dim;
    let mut out = Operator::zeros(dim);
    if let Some(h) = h {
        let hr = h.mul(rho);
        let rh = rho.mul(h);
        let minus_i = Complex64::new(0.0, -1.0);
        out = out.add(&hr.sub(&rh).scale(minus_i));
    }
    for c in channels {
        if c.rate == 0.0 {
            continue;
        }
        let cm = &c.operator;
        let cd = cm.dagger();
        let cdc = cd.mul(cm);
        let jump = cm.mul(rho).mul(&cd);
        let anti = cdc.mul(rho).add(&rho.mul(&cdc)).scale(Complex64::new(0.5, 0.0));
        out = out.add(&jump.sub(&anti).scale(Complex64::new(c.rate, 0.0)));
    }
    out
}

/// One-period propagator logarithm: (1/period) Log(p), principal branch.
///
/// Preconditions: `p` must look like a physical one-period propagator
/// (spectral radius ≤ 1 + 1e-8). Errors if an eigenvalue sits within 1e-12
/// of the negative real axis (branch ambiguity) — except when `p` preserves
/// Hermiticity, which pins such eigenvalues exactly onto the axis, where the
/// canonical boundary branch Log(−x) = ln x + iπ applies. Verifies the round
/// trip `exp(result * period) ≈ p` to 1e-8 * max|p|.
pub fn matrix_log(p: &SuperOperator, period: f64) -> Result<SuperOperator, OperatorError> {
    let (l, _) = matrix_log_with_schur(p, period)?;
    Ok(l)
}

/// Same as [`matrix_log`], also returning a Schur form `(q, x)` of the result
/// so spectral analysis can reuse the factorization.
pub fn matrix_log_with_schur(
    p: &SuperOperator,
    period: f64,
) -> Result<(SuperOperator, linalg::Schur), OperatorError> {
    assert!(period > 0.0, "period must be positive");
    let s = linalg::schur(p.mat())?;
    let mut radius = 0.0f64;
    for ev in s.eigenvalues() {
        radius = radius.max(ev.norm());
    }
    if radius > 1.0 + 1e-8 {
        return Err(OperatorError::NotAPropagator(radius));
    }
    let x = linalg::logm_triangular_factor_with_policy(&s, preserves_hermiticity(p))?;
    let inv_period = Complex64::new(1.0 / period, 0.0);
    let x_scaled = linalg::scale(&x, inv_period);
    let l_mat = linalg::mat_mul(&linalg::mat_mul(&s.q, &x_scaled), &linalg::dagger(&s.q));
    let l = SuperOperator::from_mat(p.hilbert_dim, l_mat)?;

    // round-trip contract
    let back = l.expm_scaled(period)?;
    let resid = linalg::max_abs(&linalg::sub(back.mat(), p.mat()));
    let tol = 1e-8 * linalg::max_abs(p.mat()).max(f64::MIN_POSITIVE);
    if resid > tol {
        return Err(OperatorError::LogRoundTrip(resid));
    }
    let schur_of_log = linalg::Schur { q: s.q, t: x_scaled };
    Ok((l, schur_of_log))
}

/// Whether the map ρ → devec(P vec(ρ)) sends Hermitian matrices to Hermitian
/// matrices: P[(ij),(kl)] = conj(P[(ji),(lk)]) entrywise. Lindblad step
/// propagators and their products satisfy this up to roundoff.
pub fn preserves_hermiticity(p: &SuperOperator) -> bool {
    let d = p.hilbert_dim();
    let m = p.mat();
    let tol = 1e-8 * linalg::max_abs(m).max(f64::MIN_POSITIVE);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let a = m[(i * d + j, k * d + l)];
                    let b = m[(j * d + i, l * d + k)].conj();
                    if (a - b).norm() > tol {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Eigendecomposition of a superoperator, sorted by descending real part.
pub struct SuperOpEig {
    pub eigenvalues: Vec<Complex64>,
    pub right_eigenvectors: CMat,
    pub max_residual: f64,
}

pub fn eig(l: &SuperOperator) -> Result<SuperOpEig, OperatorError> {
    let (vals, vecs, resid) = linalg::eig(l.mat())?;
    Ok(SuperOpEig { eigenvalues: vals, right_eigenvectors: vecs, max_residual: resid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn randish_op(n: usize, seed: u64, amp: f64) -> Operator {
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            amp * ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
        };
        Operator::from_fn(n, |_, _| Complex64::new(next(), next()))
    }

    fn rand_hermitian(n: usize, seed: u64, amp: f64) -> Operator {
        let g = randish_op(n, seed, amp);
        g.add(&g.dagger())
    }

    fn rand_density(n: usize, seed: u64) -> Operator {
        let g = randish_op(n, seed, 1.0);
        let p = g.mul(&g.dagger());
        let tr = p.trace();
        p.scale(ONE / tr)
    }

    #[test]
    fn kron_identity_dims() {
        let i3 = Operator::identity(3);
        let k = kron(&i3, &i3);
        assert_eq!(k.dim(), 9);
        assert_abs_diff_eq!(k.sub(&Operator::identity(9)).max_abs(), 0.0, epsilon = 0.0);

        let a = randish_op(3, 1, 1.0);
        let b = randish_op(9, 2, 1.0);
        assert_eq!(kron(&a, &b).dim(), 27);
    }

    #[test]
    fn kron_moves_basis_labels() {
        // (|r><1| ⊗ I ⊗ I) |100> = |r00> in the atom-major ordering with
        // levels (0,1,r) -> indices (0,1,2).
        let mut flip = Operator::zeros(3);
        flip.set(2, 1, ONE); // |r><1|
        let i3 = Operator::identity(3);
        let op = kron(&kron(&flip, &i3), &i3);
        let idx_100 = 9 * 1 + 3 * 0 + 0;
        let idx_r00 = 9 * 2 + 3 * 0 + 0;
        let mut v = vec![ZERO; 27];
        v[idx_100] = ONE;
        let w = op.apply(&v);
        assert_abs_diff_eq!(w[idx_r00].re, 1.0, epsilon = 1e-15);
        let total: f64 = w.iter().map(|z| z.norm_sqr()).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn vectorize_row_major_order() {
        let rho = Operator::from_fn(2, |i, j| Complex64::new((2 * i + j) as f64 + 1.0, 0.0));
        let v = vectorize(&rho);
        // (a, b; c, d) -> (a, b, c, d)
        assert_eq!(v[0].re, 1.0);
        assert_eq!(v[1].re, 2.0);
        assert_eq!(v[2].re, 3.0);
        assert_eq!(v[3].re, 4.0);
    }

    #[test]
    fn vectorize_round_trip_27() {
        let rho = randish_op(27, 5, 1.0);
        let back = devectorize(&vectorize(&rho)).unwrap();
        assert_eq!(back.sub(&rho).max_abs(), 0.0);
    }

    #[test]
    fn devectorize_rejects_non_square_length() {
        let v = vec![ZERO; 5];
        assert!(matches!(devectorize(&v), Err(OperatorError::NotSquareLength(5))));
    }

    #[test]
    fn vectorization_adjoint_identity() {
        // <vec(A), vec(B)> = Tr(A^H B)
        let a = randish_op(6, 9, 1.0);
        let b = randish_op(6, 10, 1.0);
        let va = vectorize(&a);
        let vb = vectorize(&b);
        let dot: Complex64 = va.iter().zip(vb.iter()).map(|(x, y)| x.conj() * y).sum();
        let tr = a.dagger().mul(&b).trace();
        assert!((dot - tr).norm() < 1e-13);
    }

    #[test]
    fn liouvillian_matches_direct_rhs() {
        let dim = 4;
        let h = rand_hermitian(dim, 3, 1.0);
        let c = randish_op(dim, 7, 1.0);
        let channels = vec![JumpChannel::new(c, 0.37).unwrap()];
        let l = liouvillian(Some(&h), &channels).unwrap();
        for seed in 0..20u64 {
            let rho = rand_density(dim, 100 + seed);
            let via_l = devectorize(&l.apply(&vectorize(&rho))).unwrap();
            let direct = lindblad_rhs(Some(&h), &channels, &rho);
            let scale = direct.max_abs().max(1.0);
            assert!(via_l.sub(&direct).max_abs() < 1e-12 * scale, "seed {seed}");
        }
    }

    #[test]
    fn liouvillian_single_atom_decay_law() {
        // H = 0, one channel Γ D[|0><r|] on a 3-level atom: from |r>,
        // rho_rr(t) = exp(-Γ t).
        let gamma = 2.0 * std::f64::consts::PI * 0.2424e6;
        let mut c = Operator::zeros(3);
        c.set(0, 2, ONE);
        let l = liouvillian(None, &[JumpChannel::new(c, gamma).unwrap()]).unwrap();
        let mut rho0 = Operator::zeros(3);
        rho0.set(2, 2, ONE);
        for &t in &[0.0, 0.4e-6, 1.9e-6, 5.0e-6] {
            let p = l.expm_scaled(t).unwrap();
            let rho_t = devectorize(&p.apply(&vectorize(&rho0))).unwrap();
            let expected = (-gamma * t).exp();
            assert!((rho_t.get(2, 2).re - expected).abs() < 1e-10);
            assert!((rho_t.trace().re - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn unitary_limit_preserves_purity() {
        let h = rand_hermitian(4, 21, 1.0);
        let l = liouvillian(Some(&h), &[]).unwrap();
        let rho0 = rand_density(4, 33);
        let purity0 = rho0.mul(&rho0).trace().re;
        let p = l.expm_scaled(0.7).unwrap();
        let rho_t = devectorize(&p.apply(&vectorize(&rho0))).unwrap();
        let purity_t = rho_t.mul(&rho_t).trace().re;
        assert!((purity0 - purity_t).abs() < 1e-10);
    }

    #[test]
    fn eig_pure_decay_spectrum() {
        // Two-level decay Γ D[|0><1|]: Liouvillian eigenvalues {0, -Γ/2, -Γ/2, -Γ}.
        let gamma = 1.3;
        let mut c = Operator::zeros(2);
        c.set(0, 1, ONE);
        let l = liouvillian(None, &[JumpChannel::new(c, gamma).unwrap()]).unwrap();
        let result = eig(&l).unwrap();
        let mut res: Vec<f64> = result.eigenvalues.iter().map(|z| z.re).collect();
        res.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let expected = [0.0, -gamma / 2.0, -gamma / 2.0, -gamma];
        for (got, want) in res.iter().zip(expected.iter()) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert!(result.max_residual < 1e-8);
    }

    #[test]
    fn matrix_log_recovers_generator() {
        // small random Lindblad system
        let dim = 3;
        let h = rand_hermitian(dim, 55, 0.8);
        let c = randish_op(dim, 56, 0.6);
        let channels = vec![JumpChannel::new(c, 0.45).unwrap()];
        let l = liouvillian(Some(&h), &channels).unwrap();
        let period = 0.9;
        let p = l.expm_scaled(period).unwrap();
        let back = matrix_log(&p, period).unwrap();
        let err = linalg::max_abs(&linalg::sub(back.mat(), l.mat()));
        assert!(err < 1e-8 * linalg::one_norm(l.mat()).max(1.0), "err {err:.3e}");
    }

    #[test]
    fn matrix_log_identity_is_zero() {
        let p = SuperOperator::from_mat(2, linalg::identity(4)).unwrap();
        let l = matrix_log(&p, 2.5).unwrap();
        assert!(linalg::max_abs(l.mat()) < 1e-12);
    }

    #[test]
    fn matrix_log_rejects_expanding_map() {
        let p = SuperOperator::from_mat(2, linalg::scale(&linalg::identity(4), Complex64::new(1.5, 0.0)))
            .unwrap();
        assert!(matches!(matrix_log(&p, 1.0), Err(OperatorError::NotAPropagator(_))));
    }

    #[test]
    fn matrix_log_reports_branch_ambiguity() {
        // a negative-real eigenvalue without the Hermiticity-preserving
        // structure is a genuine branch coin flip and must be reported
        let mut m = linalg::identity(4);
        m[(0, 0)] = Complex64::new(-0.9, 0.0);
        m[(0, 1)] = Complex64::new(0.1, 0.0);
        let p = SuperOperator::from_mat(2, m).unwrap();
        assert!(!preserves_hermiticity(&p));
        match matrix_log(&p, 1.0) {
            Err(OperatorError::Linalg(LinalgError::BranchCut { .. })) => {}
            other => panic!("expected branch-cut error, got {:?}", other.err()),
        }
    }

    #[test]
    fn matrix_log_negative_real_mode_of_symmetric_propagator() {
        // a Hermiticity-preserving map may carry exactly-real negative
        // eigenvalues (period-doubled decaying modes); the canonical branch
        // puts the quasi-frequency at +pi/T and still round-trips
        let mut m = linalg::identity(4);
        m[(0, 0)] = Complex64::new(-0.9, 0.0);
        let p = SuperOperator::from_mat(2, m).unwrap();
        assert!(preserves_hermiticity(&p));
        let period = 2.0;
        let l = matrix_log(&p, period).unwrap();
        let back = l.expm_scaled(period).unwrap();
        assert!(linalg::max_abs(&linalg::sub(back.mat(), p.mat())) < 1e-10);
        assert!((l.mat()[(0, 0)].im - std::f64::consts::PI / period).abs() < 1e-12);
    }

    #[test]
    fn trace_preservation_under_propagation() {
        let dim = 3;
        let h = rand_hermitian(dim, 71, 1.0);
        let c = randish_op(dim, 72, 1.0);
        let l = liouvillian(Some(&h), &[JumpChannel::new(c, 0.8).unwrap()]).unwrap();
        let rho0 = rand_density(dim, 73);
        for &t in &[0.1, 0.5, 2.0, 10.0] {
            let p = l.expm_scaled(t).unwrap();
            let rho_t = devectorize(&p.apply(&vectorize(&rho0))).unwrap();
            assert!((rho_t.trace().re - 1.0).abs() < 1e-8, "t = {t}");
            assert!(rho_t.trace().im.abs() < 1e-10);
        }
    }

    #[test]
    fn positivity_at_samples() {
        let dim = 3;
        let h = rand_hermitian(dim, 81, 1.0);
        let c = randish_op(dim, 82, 1.0);
        let l = liouvillian(Some(&h), &[JumpChannel::new(c, 0.6).unwrap()]).unwrap();
        let rho0 = rand_density(dim, 83);
        for &t in &[0.2, 1.0, 4.0] {
            let p = l.expm_scaled(t).unwrap();
            let rho_t = devectorize(&p.apply(&vectorize(&rho0))).unwrap();
            let herm = rho_t.add(&rho_t.dagger()).scale(Complex64::new(0.5, 0.0));
            let (vals, _) = herm.herm_eig().unwrap();
            assert!(vals[0] > -1e-8, "min eigenvalue {} at t = {t}", vals[0]);
        }
    }
}
