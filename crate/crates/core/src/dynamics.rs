// Copyright 2026 flsim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Master-equation propagation.
//!
//! Three paths cover every run in the crate:
//!
//! - constant generators go through superoperator exponentials, cached per
//!   (generator, duration) content hash and chained across a sample grid;
//! - explicitly time-dependent generators (Gaussian envelopes, phase noise)
//!   integrate d vec(ρ)/dt = L(t) vec(ρ) with an adaptive Dormand-Prince 5(4)
//!   stepper, evaluating the right-hand side in Hilbert space;
//! - carrier-resolved full Hamiltonians use the periodicity of the strong
//!   drive: one carrier-period unitary is composed from midpoint-sampled
//!   exponential slices and powered across each sample interval, with the
//!   (slow) dissipators applied in a Strang split around each interval.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::ONE;
use crate::operator::{
    devectorize, lindblad_rhs, liouvillian, vectorize, JumpChannel, Operator, OperatorError,
    SuperOperator,
};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("duration must be nonnegative, got {0}")]
    NegativeDuration(f64),
    #[error("step size underflow at t = {t:.6e} s (stiffness or discontinuity)")]
    Stiffness { t: f64 },
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Strictly increasing sample times within [t_start, t_end].
#[derive(Debug, Clone)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub samples: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(t_start: f64, t_end: f64, intervals: usize) -> Self {
        let n = intervals.max(1);
        let samples = (0..=n)
            .map(|k| t_start + (t_end - t_start) * k as f64 / n as f64)
            .collect();
        Self { t_start, t_end, samples }
    }

    pub fn is_monotone(&self) -> bool {
        self.samples.windows(2).all(|w| w[1] > w[0])
            && self
                .samples
                .iter()
                .all(|&t| t >= self.t_start - 1e-12 && t <= self.t_end + 1e-12)
    }
}

/// A propagated density-matrix trajectory with optional named observables.
#[derive(Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Operator>,
    pub observables: BTreeMap<String, Vec<f64>>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<Operator>) -> Self {
        Self { times, states, observables: BTreeMap::new() }
    }

    pub fn final_state(&self) -> &Operator {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    pub fn population_series(&self, state: &[Complex64]) -> Vec<f64> {
        self.states.iter().map(|rho| observe(rho, state)).collect()
    }

    pub fn purity_series(&self) -> Vec<f64> {
        self.states.iter().map(purity).collect()
    }

    pub fn record(&mut self, name: &str, series: Vec<f64>) {
        assert_eq!(series.len(), self.times.len());
        self.observables.insert(name.to_string(), series);
    }

    /// Worst trace and Hermiticity drift over the stored states.
    pub fn drift(&self) -> (f64, f64) {
        let mut trace = 0.0f64;
        let mut herm = 0.0f64;
        for s in &self.states {
            trace = trace.max((s.trace().re - 1.0).abs());
            herm = herm.max(s.hermiticity_defect());
        }
        (trace, herm)
    }

    /// Concatenates another trajectory whose first state duplicates this
    /// trajectory's last state.
    pub fn extend_with(&mut self, mut other: Trajectory) {
        if !other.times.is_empty() {
            other.times.remove(0);
            other.states.remove(0);
            self.times.extend(other.times);
            self.states.extend(other.states);
        }
    }
}

/// Population ⟨ψ|ρ|ψ⟩ (real part; imaginary part vanishes for Hermitian ρ).
pub fn observe(rho: &Operator, state: &[Complex64]) -> f64 {
    rho.matrix_element(state, state).re
}

/// Tr ρ².
pub fn purity(rho: &Operator) -> f64 {
    rho.mul(rho).trace().re
}

fn fnv1a(bytes: &[u8], mut hash: u64) -> u64 {
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn content_hash(l: &SuperOperator, t: f64) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    let m = l.mat();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            h = fnv1a(&z.re.to_bits().to_le_bytes(), h);
            h = fnv1a(&z.im.to_bits().to_le_bytes(), h);
        }
    }
    h = fnv1a(&t.to_bits().to_le_bytes(), h);
    h
}

/// Cache of exp(L·t) keyed by the content of (L, t); shareable across
/// threads.
#[derive(Default)]
pub struct PropagatorCache {
    map: Mutex<HashMap<u64, Arc<SuperOperator>>>,
}

impl PropagatorCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn propagator(&self, l: &SuperOperator, t: f64) -> Result<Arc<SuperOperator>, DynamicsError> {
        let key = content_hash(l, t);
        if let Some(hit) = self.map.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let p = Arc::new(l.expm_scaled(t)?);
        self.map.lock().unwrap().insert(key, p.clone());
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Propagation under a constant generator, sampled on a uniform grid with
/// `samples` intervals: states are devec(exp(L·t_k) vec(ρ₀)).
pub fn propagate_const(
    rho0: &Operator,
    h: Option<&Operator>,
    channels: &[JumpChannel],
    duration: f64,
    samples: usize,
    cache: Option<&PropagatorCache>,
) -> Result<Trajectory, DynamicsError> {
    if duration < 0.0 {
        return Err(DynamicsError::NegativeDuration(duration));
    }
    if let Some(h) = h {
        if h.dim() != rho0.dim() {
            return Err(DynamicsError::Dimension("Hamiltonian vs state".into()));
        }
    }
    if duration == 0.0 {
        return Ok(Trajectory::new(vec![0.0], vec![rho0.clone()]));
    }
    let l = liouvillian(h, channels)?;
    let n = samples.max(1);
    let dt = duration / n as f64;
    let step = match cache {
        Some(c) => c.propagator(&l, dt)?,
        None => Arc::new(l.expm_scaled(dt)?),
    };
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(0.0);
    states.push(rho0.clone());
    let mut v = vectorize(rho0);
    for k in 1..=n {
        v = step.apply(&v);
        times.push(dt * k as f64);
        states.push(devectorize(&v)?);
    }
    Ok(Trajectory::new(times, states))
}

// Dormand-Prince 5(4) coefficients.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive Dormand-Prince 5(4) over a complex state vector, integrating
/// exactly to `t_end`. `rhs(t, y, dy)` fills dy = f(t, y).
pub fn rk45_integrate<F>(
    y: &mut Vec<Complex64>,
    t_start: f64,
    t_end: f64,
    rel_tol: f64,
    abs_tol: f64,
    mut rhs: F,
) -> Result<(), DynamicsError>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let span = t_end - t_start;
    if span <= 0.0 {
        return Ok(());
    }
    let n = y.len();
    let mut k: Vec<Vec<Complex64>> = (0..7).map(|_| vec![Complex64::ZERO; n]).collect();
    let mut y_stage = vec![Complex64::ZERO; n];
    let mut y_next = vec![Complex64::ZERO; n];
    let mut t = t_start;
    let mut h = span / 100.0;
    let h_min = span * 1e-14;
    let mut first = true;

    while t < t_end {
        if h < h_min {
            return Err(DynamicsError::Stiffness { t });
        }
        let h_step = h.min(t_end - t);
        if first {
            rhs(t, y, &mut k[0]);
            first = false;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = Complex64::ZERO;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = DP_A[s - 1][j];
                    if a != 0.0 {
                        acc += Complex64::new(a, 0.0) * kj[i];
                    }
                }
                y_stage[i] = y[i] + Complex64::new(h_step, 0.0) * acc;
            }
            if s < 6 {
                let (head, tail) = k.split_at_mut(s);
                let _ = head;
                rhs(t + DP_C[s] * h_step, &y_stage, &mut tail[0]);
            } else {
                // stage 7 = FSAL evaluation at t + h of the 5th-order solution
                y_next.copy_from_slice(&y_stage);
                let (head, tail) = k.split_at_mut(6);
                let _ = head;
                rhs(t + h_step, &y_next, &mut tail[0]);
            }
        }
        // y_next already holds the 5th-order solution: row 6 of DP_A is the
        // 5th-order weight vector (FSAL).
        let mut err_sq = 0.0f64;
        for i in 0..n {
            let mut e = Complex64::ZERO;
            for (j, kj) in k.iter().enumerate() {
                if DP_E[j] != 0.0 {
                    e += Complex64::new(DP_E[j], 0.0) * kj[i];
                }
            }
            let e = e * Complex64::new(h_step, 0.0);
            let scale = abs_tol + rel_tol * y[i].norm().max(y_next[i].norm());
            let ratio = e.norm() / scale;
            err_sq += ratio * ratio;
        }
        let err = (err_sq / n as f64).sqrt();
        if err <= 1.0 {
            t += h_step;
            y.copy_from_slice(&y_next);
            k.swap(0, 6); // FSAL
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = h_step * factor;
        } else {
            let factor = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            h = h_step * factor;
            first = true; // k[0] no longer matches (t, y)
        }
    }
    Ok(())
}

/// Time-dependent propagation of d vec(ρ)/dt = L(t) vec(ρ) with the
/// Hamiltonian supplied as a closure of time; channels stay constant.
/// Defaults: rel_tol 1e-8, abs_tol 1e-10.
pub fn propagate_timedep<F>(
    rho0: &Operator,
    mut h_of_t: F,
    channels: &[JumpChannel],
    duration: f64,
    samples: usize,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Trajectory, DynamicsError>
where
    F: FnMut(f64) -> Operator,
{
    if duration < 0.0 {
        return Err(DynamicsError::NegativeDuration(duration));
    }
    if duration == 0.0 {
        return Ok(Trajectory::new(vec![0.0], vec![rho0.clone()]));
    }
    let n = samples.max(1);
    let dt = duration / n as f64;
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(0.0);
    states.push(rho0.clone());
    let mut v = vectorize(rho0);
    let dim = rho0.dim();
    for s in 1..=n {
        let t0 = dt * (s - 1) as f64;
        let t1 = dt * s as f64;
        rk45_integrate(&mut v, t0, t1, rel_tol, abs_tol, |t, y, dy| {
            let rho = devectorize_slice(y, dim);
            let h = h_of_t(t);
            let out = lindblad_rhs(Some(&h), channels, &rho);
            let m = out.mat();
            for i in 0..dim {
                for j in 0..dim {
                    dy[i * dim + j] = m[(i, j)];
                }
            }
        })?;
        times.push(t1);
        states.push(devectorize(&v)?);
    }
    Ok(Trajectory::new(times, states))
}

fn devectorize_slice(v: &[Complex64], dim: usize) -> Operator {
    Operator::from_fn(dim, |i, j| v[i * dim + j])
}

/// Sparse view of an operator: the nonzero entries.
fn sparse_entries(op: &Operator) -> Vec<(usize, usize, Complex64)> {
    let d = op.dim();
    let mut out = Vec::new();
    for j in 0..d {
        for i in 0..d {
            let z = op.get(i, j);
            if z != Complex64::ZERO {
                out.push((i, j, z));
            }
        }
    }
    out
}

/// Fast propagation of d ρ/dt = −i[H₀ + f(t)·C + conj(f(t))·C†, ρ] + Σ D[c]ρ
/// for sparse H₀, C and jump operators — the workhorse for phase-noise and
/// envelope-modulated steps, where the generic closure path would rebuild
/// dense operators at every stage evaluation.
pub fn propagate_modulated<F>(
    rho0: &Operator,
    h0: &Operator,
    coupling: &Operator,
    mut modulation: F,
    channels: &[JumpChannel],
    duration: f64,
    samples: usize,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Trajectory, DynamicsError>
where
    F: FnMut(f64) -> Complex64,
{
    if duration < 0.0 {
        return Err(DynamicsError::NegativeDuration(duration));
    }
    if duration == 0.0 {
        return Ok(Trajectory::new(vec![0.0], vec![rho0.clone()]));
    }
    let dim = rho0.dim();
    let h0_sp = sparse_entries(h0);
    let c_sp = sparse_entries(coupling);
    // jump part: cρc† as gathered sums over the nonzeros of each channel,
    // and the anticommutator −½{Σ γ c†c, ρ} with a precomputed (dense,
    // usually diagonal) damping matrix
    let jumps: Vec<(f64, Vec<(usize, usize, Complex64)>)> =
        channels.iter().filter(|c| c.rate > 0.0).map(|c| (c.rate, sparse_entries(&c.operator))).collect();
    let mut damping = Operator::zeros(dim);
    for c in channels {
        if c.rate > 0.0 {
            let cdc = c.operator.dagger().mul(&c.operator);
            damping = damping.add(&cdc.scale(Complex64::new(c.rate, 0.0)));
        }
    }
    let damping_sp = sparse_entries(&damping);

    let n = samples.max(1);
    let dt = duration / n as f64;
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(0.0);
    states.push(rho0.clone());
    let mut v = vectorize(rho0);
    let minus_i = Complex64::new(0.0, -1.0);
    for s in 1..=n {
        let t0 = dt * (s - 1) as f64;
        let t1 = dt * s as f64;
        rk45_integrate(&mut v, t0, t1, rel_tol, abs_tol, |t, y, dy| {
            dy.fill(Complex64::ZERO);
            let f = modulation(t);
            let fc = f.conj();
            // −i [M, ρ] with M = H0 + f C + conj(f) C†
            let mut apply_comm = |a: usize, b: usize, w: Complex64| {
                let wi = minus_i * w;
                let arow = a * dim;
                let brow = b * dim;
                for y2 in 0..dim {
                    dy[arow + y2] += wi * y[brow + y2];
                }
                for x in 0..dim {
                    dy[x * dim + b] -= wi * y[x * dim + a];
                }
            };
            for &(i, j, z) in &h0_sp {
                apply_comm(i, j, z);
            }
            for &(i, j, z) in &c_sp {
                apply_comm(i, j, f * z);
                apply_comm(j, i, fc * z.conj());
            }
            // jump gains γ c ρ c†
            for (rate, entries) in &jumps {
                let g = Complex64::new(*rate, 0.0);
                for &(p, q, z1) in entries {
                    for &(p2, q2, z2) in entries {
                        dy[p * dim + p2] += g * z1 * z2.conj() * y[q * dim + q2];
                    }
                }
            }
            // −½ (Dρ + ρD)
            let half = Complex64::new(0.5, 0.0);
            for &(i, j, z) in &damping_sp {
                let w = half * z;
                let irow = i * dim;
                let jrow = j * dim;
                for y2 in 0..dim {
                    dy[irow + y2] -= w * y[jrow + y2];
                }
                for x in 0..dim {
                    dy[x * dim + j] -= w.conj() * y[x * dim + i];
                }
            }
        })?;
        times.push(t1);
        states.push(devectorize(&v)?);
    }
    Ok(Trajectory::new(times, states))
}

/// Slow envelope applied to the weak coupling of a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Envelope {
    Rect,
    /// exp(−(t−2σ)²/(2σ²)) supported on [0, 4σ].
    Gaussian { sigma: f64 },
}

impl Envelope {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Envelope::Rect => 1.0,
            Envelope::Gaussian { sigma } => {
                let x = (t - 2.0 * sigma) / sigma;
                (-0.5 * x * x).exp()
            }
        }
    }
}

/// Interaction-frame full Hamiltonian of one coherent step:
///
/// H(t) = diag + env(t)·(W + W†) + S·e^{−iΔt} + S†·e^{+iΔt}.
#[derive(Clone)]
pub struct CarrierStep {
    pub diag: Operator,
    pub weak_half: Operator,
    pub strong_half: Operator,
    pub delta: f64,
    pub envelope: Envelope,
    pub duration: f64,
}

/// Exponential slices per carrier period before Richardson extrapolation;
/// the pairwise (K, 2K) extrapolation leaves per-period errors below 1e-9.
pub const CARRIER_SLICES: usize = 128;

impl CarrierStep {
    pub fn hamiltonian_at(&self, t: f64) -> Operator {
        let env = Complex64::new(self.envelope.value(t), 0.0);
        let w = self.weak_half.scale(env);
        let phase = Complex64::from_polar(1.0, -self.delta * t);
        let s = self.strong_half.scale(phase);
        self.diag.add(&w).add(&w.dagger()).add(&s).add(&s.dagger())
    }

    /// Product of midpoint-sampled exponential slices over [0, span], with
    /// the carrier phase referenced to the segment start (segments always
    /// begin on a period boundary) and the envelope frozen at `env`.
    fn midpoint_product(&self, env: f64, span: f64, slices: usize) -> Result<Operator, DynamicsError> {
        let h_env = {
            let w = self.weak_half.scale(Complex64::new(env, 0.0));
            self.diag.add(&w).add(&w.dagger())
        };
        let delta_t = span / slices as f64;
        let mut u = Operator::identity(self.diag.dim());
        for s in 0..slices {
            let t_mid = (s as f64 + 0.5) * delta_t;
            let phase = Complex64::from_polar(1.0, -self.delta * t_mid);
            let sc = self.strong_half.scale(phase);
            let h = h_env.add(&sc).add(&sc.dagger());
            let slice = h.scale(Complex64::new(0.0, -delta_t)).expm_scaled(1.0)?;
            u = slice.mul(&u);
        }
        Ok(u)
    }

    /// Richardson-extrapolated unitary over a span starting on a period
    /// boundary: the midpoint product is second order in the slice width, so
    /// (4·U_{2K} − U_K)/3 removes the leading error.
    fn unitary_over(&self, env: f64, span: f64, slices: usize) -> Result<Operator, DynamicsError> {
        let k = slices.max(8);
        let u1 = self.midpoint_product(env, span, k)?;
        let u2 = self.midpoint_product(env, span, 2 * k)?;
        Ok(u2
            .scale(Complex64::new(4.0 / 3.0, 0.0))
            .sub(&u1.scale(Complex64::new(1.0 / 3.0, 0.0))))
    }

    /// One-carrier-period unitary with the envelope frozen at `env`.
    pub fn period_unitary(&self, env: f64, slices: usize) -> Result<Operator, DynamicsError> {
        let t_d = 2.0 * std::f64::consts::PI / self.delta;
        self.unitary_over(env, t_d, slices)
    }
}

fn unitary_power(u: &Operator, mut n: usize) -> Operator {
    let mut result = Operator::identity(u.dim());
    let mut base = u.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = base.mul(&result);
        }
        base = base.mul(&base);
        n >>= 1;
    }
    result
}

/// Applies exp(L_channels · dt) to ρ by a truncated Taylor series; the
/// channel rates here are slow (γ_r), so a handful of terms reaches machine
/// precision.
fn apply_channel_semigroup(rho: &Operator, channels: &[JumpChannel], dt: f64) -> Operator {
    if channels.is_empty() || dt == 0.0 {
        return rho.clone();
    }
    let mut out = rho.clone();
    let mut term = rho.clone();
    let max_rate: f64 = channels.iter().map(|c| c.rate).fold(0.0, f64::max);
    let x = max_rate * dt;
    let terms = if x < 1e-4 {
        3
    } else if x < 1e-2 {
        5
    } else {
        (8.0 + 4.0 * x) as usize
    };
    for k in 1..=terms {
        term = lindblad_rhs(None, channels, &term).scale(Complex64::new(dt / k as f64, 0.0));
        out = out.add(&term);
    }
    out
}

/// Envelope nodes for the interpolation table of a Gaussian step.
const ENVELOPE_NODES: usize = 8;

/// Slices used to average the dissipator over one carrier period.
const CORRECTION_SLICES: usize = 32;

/// Period-averaged, unitary-conjugated dissipator:
///
/// C = (1/T) ∫₀ᵀ (U(T←s) ⊗ conj U(T←s)) L_γ (U(s←0) ⊗ conj U(s←0)) ds.
///
/// Lumping the bare dissipator at period boundaries correlates it with the
/// carrier phase and biases the decay of Rydberg coherences; lumping this
/// average instead is first-order exact in the channel rates.
fn period_averaged_dissipator(
    step: &CarrierStep,
    env: f64,
    channels: &[JumpChannel],
) -> Result<crate::linalg::CMat, DynamicsError> {
    use crate::linalg::{self, CMat};
    let dim = step.diag.dim();
    let d2 = dim * dim;
    let t_d = 2.0 * std::f64::consts::PI / step.delta;
    let k_slices = CORRECTION_SLICES;
    let delta_t = t_d / k_slices as f64;

    let h_env = {
        let w = step.weak_half.scale(Complex64::new(env, 0.0));
        step.diag.add(&w).add(&w.dagger())
    };
    let mut slices = Vec::with_capacity(k_slices);
    let mut half_slices = Vec::with_capacity(k_slices);
    for s in 0..k_slices {
        let t_mid = (s as f64 + 0.5) * delta_t;
        let phase = Complex64::from_polar(1.0, -step.delta * t_mid);
        let sc = step.strong_half.scale(phase);
        let h = h_env.add(&sc).add(&sc.dagger());
        slices.push(h.scale(Complex64::new(0.0, -delta_t)).expm_scaled(1.0)?);
        half_slices.push(h.scale(Complex64::new(0.0, -delta_t / 2.0)).expm_scaled(1.0)?);
    }
    // prefix[k] = product of slices 0..k, suffix[k] = product of slices k+1..
    let mut prefix = vec![Operator::identity(dim)];
    for s in slices.iter().take(k_slices - 1) {
        prefix.push(s.mul(prefix.last().unwrap()));
    }
    let mut suffix = vec![Operator::identity(dim); k_slices];
    for k in (0..k_slices - 1).rev() {
        suffix[k] = suffix[k + 1].mul(&slices[k + 1]);
    }

    fn kron_into(acc: &mut CMat, alpha: f64, a: &Operator, b_conj_src: &Operator) {
        let dim = a.dim();
        for i1 in 0..dim {
            for j1 in 0..dim {
                let aij = a.get(i1, j1);
                if aij == Complex64::ZERO {
                    continue;
                }
                let w = Complex64::new(alpha, 0.0) * aij;
                for i2 in 0..dim {
                    for j2 in 0..dim {
                        let b = b_conj_src.get(i2, j2).conj();
                        if b != Complex64::ZERO {
                            acc[(i1 * dim + i2, j1 * dim + j2)] += w * b;
                        }
                    }
                }
            }
        }
    }

    let mut cbar = linalg::zeros(d2, d2);
    for k in 0..k_slices {
        // U(s_mid ← 0) and U(T ← s_mid)
        let b = half_slices[k].mul(&prefix[k]);
        let a = suffix[k].mul(&half_slices[k]);
        let ab = a.mul(&b);
        for ch in channels {
            if ch.rate == 0.0 {
                continue;
            }
            let gamma = ch.rate / k_slices as f64;
            let acb = a.mul(&ch.operator).mul(&b);
            let cdc = ch.operator.dagger().mul(&ch.operator);
            let acdcb = a.mul(&cdc).mul(&b);
            kron_into(&mut cbar, gamma, &acb, &acb);
            kron_into(&mut cbar, -0.5 * gamma, &acdcb, &ab);
            kron_into(&mut cbar, -0.5 * gamma, &ab, &acdcb);
        }
    }
    Ok(cbar)
}

/// A prepared carrier-step propagator: one-period unitaries tabulated over
/// the envelope value plus the period-averaged dissipator, reusable across
/// cycles and sample chunks.
pub struct CarrierPropagator {
    pub step: CarrierStep,
    /// (envelope value, one-period unitary); a single entry for Rect.
    nodes: Vec<(f64, Operator)>,
    channels: Vec<JumpChannel>,
    /// Period-averaged dissipator in Fock-Liouville form.
    cbar: Option<crate::linalg::CMat>,
}

impl CarrierPropagator {
    pub fn new(step: CarrierStep, always_on: &[JumpChannel]) -> Result<Self, DynamicsError> {
        let nodes = match step.envelope {
            Envelope::Rect => vec![(1.0, step.period_unitary(1.0, CARRIER_SLICES)?)],
            Envelope::Gaussian { .. } => {
                // Chebyshev points on [0, 1]; the unitary is a near-linear
                // function of the envelope over one 5 ns period.
                let n = ENVELOPE_NODES;
                let mut nodes = Vec::with_capacity(n);
                for k in 0..n {
                    let theta = std::f64::consts::PI * k as f64 / (n - 1) as f64;
                    let x = 0.5 * (1.0 - theta.cos());
                    nodes.push((x, step.period_unitary(x, CARRIER_SLICES)?));
                }
                nodes
            }
        };
        let cbar = if always_on.is_empty() {
            None
        } else {
            let env_ref = match step.envelope {
                Envelope::Rect => 1.0,
                Envelope::Gaussian { .. } => step.envelope.value(step.duration / 2.0),
            };
            Some(period_averaged_dissipator(&step, env_ref, always_on)?)
        };
        Ok(Self { step, nodes, channels: always_on.to_vec(), cbar })
    }

    /// One-period unitary at an envelope value, by barycentric interpolation
    /// over the tabulated nodes.
    pub fn period_unitary_at(&self, env: f64) -> Operator {
        if self.nodes.len() == 1 {
            return self.nodes[0].1.clone();
        }
        let n = self.nodes.len();
        let mut num = Operator::zeros(self.step.diag.dim());
        let mut den = 0.0f64;
        for (k, (xk, uk)) in self.nodes.iter().enumerate() {
            if (env - xk).abs() < 1e-14 {
                return uk.clone();
            }
            let mut w = if k % 2 == 0 { 1.0 } else { -1.0 };
            if k == 0 || k == n - 1 {
                w *= 0.5;
            }
            let coeff = w / (env - xk);
            num = num.add(&uk.scale(Complex64::new(coeff, 0.0)));
            den += coeff;
        }
        num.scale(Complex64::new(1.0 / den, 0.0))
    }

    fn apply_correction(&self, rho: &Operator, tau: f64) -> Result<Operator, DynamicsError> {
        let Some(cbar) = &self.cbar else {
            return Ok(rho.clone());
        };
        // exp(tau C) to third order; tau * rates is well below 1e-3
        let mut v = vectorize(rho);
        let n = v.len();
        let mut acc = v.clone();
        for k in 1..=3u32 {
            let mut next = vec![Complex64::ZERO; n];
            let rhs = crate::linalg::CMat::from_fn(n, 1, |i, _| v[i]);
            let mut dst = crate::linalg::CMat::zeros(n, 1);
            faer::linalg::matmul::matmul(
                dst.as_mut(),
                faer::Accum::Replace,
                cbar.as_ref(),
                rhs.as_ref(),
                ONE,
                faer::Par::Seq,
            );
            let factor = Complex64::new(tau / k as f64, 0.0);
            for i in 0..n {
                next[i] = dst[(i, 0)] * factor;
            }
            for i in 0..n {
                acc[i] += next[i];
            }
            v = next;
        }
        Ok(devectorize(&acc)?)
    }

    /// Propagates one carrier-resolved coherent step, sampling `samples`
    /// times. Sample times snap to carrier-period boundaries (the step end is
    /// exact).
    pub fn propagate(&self, rho0: &Operator, samples: usize) -> Result<Trajectory, DynamicsError> {
        let step = &self.step;
        if step.duration < 0.0 {
            return Err(DynamicsError::NegativeDuration(step.duration));
        }
        if step.duration == 0.0 {
            return Ok(Trajectory::new(vec![0.0], vec![rho0.clone()]));
        }
        let t_d = 2.0 * std::f64::consts::PI / step.delta;
        let total_periods = (step.duration / t_d).floor() as usize;
        let tail = step.duration - total_periods as f64 * t_d;
        let n = samples.max(1);

        let mut boundaries: Vec<usize> = (0..=n)
            .map(|k| ((k as f64 / n as f64) * total_periods as f64).round() as usize)
            .collect();
        boundaries.dedup();

        let mut times = vec![0.0];
        let mut states = vec![rho0.clone()];
        let mut rho = rho0.clone();
        for w in boundaries.windows(2) {
            let (p0, p1) = (w[0], w[1]);
            if p1 == p0 {
                continue;
            }
            let t0 = p0 as f64 * t_d;
            let t1 = p1 as f64 * t_d;
            let dt = t1 - t0;
            let env = step.envelope.value(0.5 * (t0 + t1));
            let u = unitary_power(&self.period_unitary_at(env), p1 - p0);
            rho = self.apply_correction(&rho, dt / 2.0)?;
            rho = u.mul(&rho).mul(&u.dagger());
            rho = self.apply_correction(&rho, dt / 2.0)?;
            times.push(t1);
            states.push(rho.clone());
        }
        if tail > 1e-18 {
            let t0 = total_periods as f64 * t_d;
            let env = step.envelope.value(t0 + tail / 2.0);
            let slices = (((tail / t_d) * CARRIER_SLICES as f64).ceil() as usize).max(8);
            rho = apply_channel_semigroup(&rho, &self.channels, tail / 2.0);
            let u = step.unitary_over(env, tail, slices)?;
            rho = u.mul(&rho).mul(&u.dagger());
            rho = apply_channel_semigroup(&rho, &self.channels, tail / 2.0);
            times.push(step.duration);
            states.push(rho);
        }
        Ok(Trajectory::new(times, states))
    }
}

/// Convenience wrapper building the propagator and running one step.
pub fn propagate_carrier_step(
    rho0: &Operator,
    step: &CarrierStep,
    always_on: &[JumpChannel],
    samples: usize,
) -> Result<Trajectory, DynamicsError> {
    CarrierPropagator::new(step.clone(), always_on)?.propagate(rho0, samples)
}
