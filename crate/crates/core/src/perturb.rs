// Copyright 2026 flsim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Noise and imperfection models.
//!
//! Laser phase noise is synthesized as a truncated cosine series over a flat
//! frequency-noise background S_δν = h₀:
//!
//!   φ(t) = Σ_j 2 √(S_φ(f_j) Δf) cos(2π f_j t + φ_j),  S_φ(f) = h₀/f²,
//!   δν(t) = −Σ_j 2 √(h₀ Δf) sin(2π f_j t + φ_j),
//!
//! with f_j = jΔf and φ_j drawn uniformly from [0, 2π) by a seeded ChaCha
//! stream. h₀ is the two-sided spectral density, so the two-sided
//! periodogram of δν averages back to h₀.
//!
//! Geometric imperfections enter as a quasi-static distance offset δR that
//! shifts the vdW interaction, timing errors scale the coherent step
//! durations, and a detuning offset δ shifts the levels driven by the weak
//! field. Gaussian pulse shaping fixes σ by the π-area constraint over
//! [0, 4σ].

use num_complex::Complex64;
use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use crate::atomic::VdwParams;
use crate::dynamics::Envelope;
use crate::operator::Operator;
use crate::protocol::{Protocol, StepGenerator};

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("noise trace covers {covered:.3e} s but the step needs {needed:.3e} s")]
    TraceTooShort { covered: f64, needed: f64 },
}

/// White frequency-noise synthesis parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseNoiseSpec {
    /// Two-sided frequency-noise floor (Hz²/Hz).
    pub h0: f64,
    /// Bandwidth f_{M/2} (Hz).
    pub f_max: f64,
    /// Number of cosine components M/2.
    pub n_components: usize,
    pub seed: u64,
}

impl PhaseNoiseSpec {
    pub fn reference(seed: u64) -> Self {
        Self { h0: 400.0, f_max: 10.0e6, n_components: 500, seed }
    }

    /// Δf = f_max / (M/2).
    pub fn delta_f(&self) -> f64 {
        self.f_max / self.n_components as f64
    }

    /// Nyquist sample spacing Δt = 1/(M Δf) = 1/(2 f_max).
    pub fn delta_t(&self) -> f64 {
        1.0 / (2.0 * self.n_components as f64 * self.delta_f())
    }

    pub fn validate(&self) -> Result<(), PerturbError> {
        if self.h0 < 0.0 || !self.h0.is_finite() {
            return Err(PerturbError::InvalidParameter(format!("h0 = {}", self.h0)));
        }
        if self.f_max <= 0.0 || self.n_components == 0 {
            return Err(PerturbError::InvalidParameter("f_max and n_components must be positive".into()));
        }
        Ok(())
    }
}

/// Sampled φ(t) and δν(t) series on the Nyquist grid.
#[derive(Debug, Clone)]
pub struct NoiseTrace {
    pub spec: PhaseNoiseSpec,
    pub dt: f64,
    /// φ(t_k) in radians.
    pub phi: Vec<f64>,
    /// δν(t_k) in Hz.
    pub freq_dev: Vec<f64>,
}

impl NoiseTrace {
    pub fn duration(&self) -> f64 {
        (self.phi.len().saturating_sub(1)) as f64 * self.dt
    }

    pub fn covers(&self, duration: f64) -> bool {
        self.duration() >= duration - 1e-15
    }

    /// Linear interpolation of φ between grid samples.
    pub fn phi_at(&self, t: f64) -> f64 {
        if self.phi.is_empty() {
            return 0.0;
        }
        let x = (t / self.dt).max(0.0);
        let k = x.floor() as usize;
        if k + 1 >= self.phi.len() {
            return *self.phi.last().unwrap();
        }
        let frac = x - k as f64;
        self.phi[k] * (1.0 - frac) + self.phi[k + 1] * frac
    }
}

/// SplitMix64, used to derive independent per-step seeds from a master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(0xD1B54A32D192ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn uniform_phase(rng: &mut ChaCha12Rng) -> f64 {
    // 53-bit uniform in [0, 1), scaled to [0, 2π)
    let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    2.0 * std::f64::consts::PI * u
}

/// Synthesizes φ(t) and δν(t) on the Nyquist grid covering `duration`.
pub fn phase_noise_trace(spec: &PhaseNoiseSpec, duration: f64) -> Result<NoiseTrace, PerturbError> {
    spec.validate()?;
    if duration <= 0.0 {
        return Err(PerturbError::InvalidParameter(format!("duration = {duration}")));
    }
    let dt = spec.delta_t();
    let df = spec.delta_f();
    let n_samples = (duration / dt).ceil() as usize + 1;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let phases: Vec<f64> = (0..spec.n_components).map(|_| uniform_phase(&mut rng)).collect();

    let mut phi = vec![0.0f64; n_samples];
    let mut freq_dev = vec![0.0f64; n_samples];
    if spec.h0 > 0.0 {
        let amp_freq = 2.0 * (spec.h0 * df).sqrt();
        for (k, (phi_k, dv_k)) in phi.iter_mut().zip(freq_dev.iter_mut()).enumerate() {
            let t = k as f64 * dt;
            let mut p = 0.0;
            let mut v = 0.0;
            for (j, phase_j) in phases.iter().enumerate() {
                let f_j = (j + 1) as f64 * df;
                let arg = 2.0 * std::f64::consts::PI * f_j * t + phase_j;
                // S_phi(f) = h0/f² turns the flat frequency noise into 1/f² phase noise
                p += 2.0 * (spec.h0 / (f_j * f_j) * df).sqrt() * arg.cos();
                v -= amp_freq * arg.sin();
            }
            *phi_k = p;
            *dv_k = v;
        }
    }
    Ok(NoiseTrace { spec: *spec, dt, phi, freq_dev })
}

/// Two-sided periodogram of the sampled δν series over one synthesis period
/// (bins at f_j = jΔf): P(f_j) = |Σ_k x_k e^{−2πi jk/N}|² Δt / N.
pub fn frequency_noise_periodogram(trace: &NoiseTrace) -> Vec<(f64, f64)> {
    let m = 2 * trace.spec.n_components;
    let n = trace.freq_dev.len().min(m);
    let df = trace.spec.delta_f();
    let mut out = Vec::with_capacity(trace.spec.n_components);
    for j in 1..=trace.spec.n_components {
        let mut re = 0.0f64;
        let mut im = 0.0f64;
        for (k, x) in trace.freq_dev.iter().take(n).enumerate() {
            let arg = -2.0 * std::f64::consts::PI * (j * k) as f64 / n as f64;
            re += x * arg.cos();
            im += x * arg.sin();
        }
        let power = (re * re + im * im) * trace.dt / n as f64;
        out.push((j as f64 * df, power));
    }
    out
}

/// Pulse shape of the weak drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseKind {
    Rectangular,
    Gaussian,
}

/// Weak-drive pulse: a rectangular pulse at `omega0`, or a Gaussian
/// Ω(t) = Ω₀ exp(−(t−2σ)²/2σ²) supported on [0, 4σ] whose width is fixed by
/// the π-area constraint ∫ α Ω(t) dt = π.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseShape {
    pub kind: PulseKind,
    /// Peak Rabi frequency (rad/s).
    pub omega0: f64,
    /// Gaussian width (s); meaningful for Gaussian pulses only.
    pub sigma: f64,
    /// Pulse-area coefficient: √3 for the entangled pumps, √2 for the
    /// ±-basis excitation, 1 otherwise.
    pub alpha: f64,
}

impl PulseShape {
    pub fn rectangular(omega0: f64, alpha: f64) -> Self {
        Self { kind: PulseKind::Rectangular, omega0, sigma: 0.0, alpha }
    }

    pub fn gaussian(omega0: f64, alpha: f64) -> Result<Self, PerturbError> {
        let sigma = gaussian_sigma(alpha, omega0)?;
        Ok(Self { kind: PulseKind::Gaussian, omega0, sigma, alpha })
    }

    /// Nominal coherent duration: π/(αΩ₀) for rectangular, 4σ for Gaussian.
    pub fn nominal_duration(&self) -> f64 {
        match self.kind {
            PulseKind::Rectangular => std::f64::consts::PI / (self.alpha * self.omega0),
            PulseKind::Gaussian => 4.0 * self.sigma,
        }
    }

    pub fn envelope(&self) -> Envelope {
        match self.kind {
            PulseKind::Rectangular => Envelope::Rect,
            PulseKind::Gaussian => Envelope::Gaussian { sigma: self.sigma },
        }
    }
}

/// σ = √π / (√2 α Ω₀ Erf(√2)): the width at which the truncated Gaussian
/// carries a pulse area of exactly π over [0, 4σ].
pub fn gaussian_sigma(alpha: f64, omega0: f64) -> Result<f64, PerturbError> {
    if omega0 <= 0.0 {
        return Err(PerturbError::InvalidParameter(format!("omega0 = {omega0}")));
    }
    if alpha <= 0.0 {
        return Err(PerturbError::InvalidParameter(format!("alpha = {alpha}")));
    }
    let erf_sqrt2 = libm::erf(std::f64::consts::SQRT_2);
    Ok(std::f64::consts::PI.sqrt() / (std::f64::consts::SQRT_2 * alpha * omega0 * erf_sqrt2))
}

/// Quasi-static geometric and drive imperfections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImperfectionSpec {
    /// Interatomic distance offset (nm).
    pub delta_r_nm: f64,
    /// Relative timing error applied to every coherent step.
    pub delta_t_fraction: f64,
    /// Detuning offset of the weak drive (rad/s).
    pub delta_freq: f64,
    /// Use the exact C₆/(R₀+δR)⁶ law instead of the linearized shift.
    pub exact_distance_law: bool,
}

impl ImperfectionSpec {
    pub fn none() -> Self {
        Self { delta_r_nm: 0.0, delta_t_fraction: 0.0, delta_freq: 0.0, exact_distance_law: false }
    }

    pub fn validate(&self) -> Result<(), PerturbError> {
        if self.delta_t_fraction.abs() > 0.5 {
            return Err(PerturbError::InvalidParameter(format!(
                "|delta_t_fraction| = {} exceeds 0.5",
                self.delta_t_fraction.abs()
            )));
        }
        Ok(())
    }

    pub fn is_none(&self) -> bool {
        self.delta_r_nm == 0.0 && self.delta_t_fraction == 0.0 && self.delta_freq == 0.0
    }
}

/// vdW parameters at distance R₀+δR. The default is the linearized shift
/// δU = −6 U_rr δR/R₀; `exact` applies C₆/(R₀+δR)⁶.
pub fn distance_shift(delta_r_um: f64, v: &VdwParams, exact: bool) -> Result<VdwParams, PerturbError> {
    if delta_r_um.abs() >= v.r0 {
        return Err(PerturbError::InvalidParameter(format!(
            "|delta_r| = {} um exceeds the interatomic distance {} um",
            delta_r_um.abs(),
            v.r0
        )));
    }
    let urr = if exact {
        v.c6 / (v.r0 + delta_r_um).powi(6)
    } else {
        v.urr * (1.0 - 6.0 * delta_r_um / v.r0)
    };
    VdwParams::from_urr(v.c6, urr)
        .map_err(|e| PerturbError::InvalidParameter(format!("shifted vdW invalid: {e}")))
}

/// Applies quasi-static imperfections to a protocol: timing errors stretch
/// the coherent steps, a distance offset swaps the effective operators for
/// the full carrier-resolved ones at the shifted U_rr, and a detuning offset
/// shifts the levels driven by the weak field.
pub fn apply_imperfections(protocol: &Protocol, spec: &ImperfectionSpec) -> Result<Protocol, PerturbError> {
    spec.validate()?;
    let mut out = protocol.clone();
    if spec.delta_t_fraction != 0.0 {
        for step in out.steps.iter_mut() {
            if matches!(step.generator, StepGenerator::Coherent { .. }) {
                step.duration *= 1.0 + spec.delta_t_fraction;
            }
        }
    }
    if spec.delta_r_nm != 0.0 {
        let shifted = distance_shift(spec.delta_r_nm * 1e-3, &out.vdw, spec.exact_distance_law)?;
        out.vdw = shifted;
        out.use_full_hamiltonians = true;
    }
    out.detuning += spec.delta_freq;
    Ok(out)
}

/// e^{iφ(t)} applied to a coupling half: H(t) = f(t)·C + conj(f(t))·C† with
/// f(t) = env(t)·e^{iφ(t)}. Both weak fields of the ±-basis step carry the
/// same trace. Errors if the trace is shorter than the step.
pub fn noisy_hamiltonian<'a>(
    coupling_half: &'a Operator,
    static_part: &'a Operator,
    envelope: Envelope,
    trace: &'a NoiseTrace,
    duration: f64,
) -> Result<impl Fn(f64) -> Operator + 'a, PerturbError> {
    if !trace.covers(duration) {
        return Err(PerturbError::TraceTooShort { covered: trace.duration(), needed: duration });
    }
    Ok(move |t: f64| {
        let f = Complex64::from_polar(envelope.value(t), trace.phi_at(t));
        let c = coupling_half.scale(f);
        static_part.add(&c).add(&c.dagger())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU: f64 = 2.0 * std::f64::consts::PI;

    #[test]
    fn zero_amplitude_gives_zero_trace() {
        let spec = PhaseNoiseSpec { h0: 0.0, ..PhaseNoiseSpec::reference(7) };
        let trace = phase_noise_trace(&spec, 20.0e-6).unwrap();
        assert!(trace.phi.iter().all(|&x| x == 0.0));
        assert!(trace.freq_dev.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn same_seed_same_trace() {
        let spec = PhaseNoiseSpec::reference(42);
        let a = phase_noise_trace(&spec, 15.0e-6).unwrap();
        let b = phase_noise_trace(&spec, 15.0e-6).unwrap();
        assert_eq!(a.phi, b.phi);
        let c = phase_noise_trace(&PhaseNoiseSpec::reference(43), 15.0e-6).unwrap();
        assert_ne!(a.phi, c.phi);
    }

    #[test]
    fn nyquist_grid_spacing() {
        let spec = PhaseNoiseSpec::reference(1);
        assert!((spec.delta_f() - 20.0e3).abs() < 1e-9);
        assert!((spec.delta_t() - 50.0e-9).abs() < 1e-18);
        let trace = phase_noise_trace(&spec, 12.5e-6).unwrap();
        assert!(trace.covers(12.5e-6));
        assert!((trace.dt - 50.0e-9).abs() < 1e-18);
    }

    #[test]
    fn periodogram_averages_to_h0() {
        // 100-seed average of the band-mean two-sided PSD within 20% of h0
        let mut total = 0.0f64;
        let mut bins = 0usize;
        for seed in 0..100u64 {
            let spec = PhaseNoiseSpec { n_components: 100, ..PhaseNoiseSpec::reference(seed) };
            // one full synthesis period 1/Δf
            let trace = phase_noise_trace(&spec, 1.0 / spec.delta_f()).unwrap();
            let psd = frequency_noise_periodogram(&trace);
            for (_, p) in psd {
                total += p;
                bins += 1;
            }
        }
        let mean = total / bins as f64;
        assert!((mean - 400.0).abs() / 400.0 < 0.2, "mean PSD {mean}");
    }

    #[test]
    fn periodogram_is_flat_across_decades() {
        // band-averaged PSD ratio between decades within [Δf, f_max/2]
        let mut decade_sums = vec![0.0f64; 3];
        let mut decade_counts = vec![0usize; 3];
        for seed in 0..100u64 {
            let spec = PhaseNoiseSpec::reference(seed);
            let trace = phase_noise_trace(&spec, 1.0 / spec.delta_f()).unwrap();
            for (f, p) in frequency_noise_periodogram(&trace) {
                if f > spec.f_max / 2.0 {
                    continue;
                }
                // decades: [20 kHz, 200 kHz), [200 kHz, 2 MHz), [2 MHz, 5 MHz]
                let idx = if f < 200.0e3 {
                    0
                } else if f < 2.0e6 {
                    1
                } else {
                    2
                };
                decade_sums[idx] += p;
                decade_counts[idx] += 1;
            }
        }
        let means: Vec<f64> =
            decade_sums.iter().zip(&decade_counts).map(|(s, &c)| s / c as f64).collect();
        for i in 0..means.len() {
            for j in 0..means.len() {
                let ratio = means[i] / means[j];
                assert!((0.7..=1.3).contains(&ratio), "decade ratio {ratio}");
            }
        }
    }

    #[test]
    fn phi_interpolation_is_linear_between_samples() {
        let spec = PhaseNoiseSpec::reference(5);
        let trace = phase_noise_trace(&spec, 1.0e-6).unwrap();
        let mid = 0.5 * (trace.phi[3] + trace.phi[4]);
        assert!((trace.phi_at(3.5 * trace.dt) - mid).abs() < 1e-12);
    }

    #[test]
    fn gaussian_sigma_reference_value() {
        let omega0 = TAU * 0.072e6;
        let sigma = gaussian_sigma(1.0, omega0).unwrap();
        assert!((sigma - 2.902e-6).abs() < 2e-9, "sigma = {sigma:.4e}");
        // quadrature of the pulse area: Simpson over [0, 4σ]
        let alpha = 1.0;
        let n = 4000;
        let h = 4.0 * sigma / n as f64;
        let f = |t: f64| alpha * omega0 * (-((t - 2.0 * sigma) / sigma).powi(2) / 2.0).exp();
        let mut area = f(0.0) + f(4.0 * sigma);
        for k in 1..n {
            area += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        area *= h / 3.0;
        assert!((area - std::f64::consts::PI).abs() < 1e-6, "area = {area}");
    }

    #[test]
    fn gaussian_sigma_scalings() {
        let omega0 = TAU * 0.072e6;
        let s1 = gaussian_sigma(1.0, omega0).unwrap();
        let s3 = gaussian_sigma(3f64.sqrt(), omega0).unwrap();
        assert!((s3 - s1 / 3f64.sqrt()).abs() < 1e-18 * s1.max(1.0));
        let s_double = gaussian_sigma(1.0, 2.0 * omega0).unwrap();
        assert!((s_double - s1 / 2.0).abs() < 1e-18 * s1.max(1.0));
        assert!(gaussian_sigma(1.0, -1.0).is_err());
    }

    #[test]
    fn distance_shift_reference_magnitude() {
        let v = VdwParams::from_urr(TAU * 4161.55e9, TAU * 200.0e6).unwrap();
        let delta_r_um = std::f64::consts::SQRT_2 * 86.6e-3;
        let shifted = distance_shift(delta_r_um, &v, false).unwrap();
        let delta_u = (shifted.urr - v.urr).abs();
        let expected = TAU * 28.0e6;
        assert!((delta_u - expected).abs() / expected < 0.02, "delta_u = {:.3}", delta_u / TAU / 1e6);
        // outward displacement weakens the interaction
        assert!(shifted.urr < v.urr);
        // no offset, no shift
        let same = distance_shift(0.0, &v, false).unwrap();
        assert_eq!(same.urr, v.urr);
    }

    #[test]
    fn linearized_vs_exact_distance_law() {
        let v = VdwParams::from_urr(TAU * 4161.55e9, TAU * 200.0e6).unwrap();
        let dr = 0.05; // 50 nm in um
        let lin = distance_shift(dr, &v, false).unwrap();
        let exact = distance_shift(dr, &v, true).unwrap();
        // the shifted interactions agree within 3%
        assert!((lin.urr - exact.urr).abs() / exact.urr < 0.03);
        // and the shift itself is first-order accurate (next order is 3.5 δR/R₀)
        let shift_lin = v.urr - lin.urr;
        let shift_exact = v.urr - exact.urr;
        let rel = (shift_lin - shift_exact).abs() / shift_exact.abs();
        assert!((rel - 3.5 * dr / v.r0).abs() < 0.005, "rel = {rel}");
    }

    #[test]
    fn imperfection_validation() {
        let mut s = ImperfectionSpec::none();
        assert!(s.validate().is_ok());
        assert!(s.is_none());
        s.delta_t_fraction = 0.6;
        assert!(s.validate().is_err());
    }

    #[test]
    fn derive_seed_is_stable_and_spread() {
        let a = derive_seed(12345, 0);
        let b = derive_seed(12345, 1);
        assert_ne!(a, b);
        assert_eq!(a, derive_seed(12345, 0));
    }
}
