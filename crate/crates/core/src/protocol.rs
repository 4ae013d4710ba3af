// Copyright 2026 flsim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Six-step conversion cycles and their Floquet analysis.
//!
//! Conversion Ⅰ (GHZ→W) alternates entangled pumps with conditional decay:
//! [EP1 | CD | SE0 | CD | EP0 | UCD]; conversion Ⅱ (W→GHZ) alternates
//! selective excitations with unconditional decay:
//! [SE0 | UCD | SE1 | UCD | SE+ | UCD]. Natural Rydberg decay stays on in
//! every step. The one-period map P = e^{L₆t₆}···e^{L₁t₁} defines the
//! effective generator L_eff = ln(P)/T whose spectrum certifies the unique
//! steady state.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::atomic::{
    effective_coupling_half, named_state, rydberg_number, structured_full_hamiltonian, LaserParams,
    NamedState, PumpVariant, StateLabel, VdwParams, C6_REFERENCE,
};
use crate::dissipation::{channels_for, tau1, tau2, ChannelKind, DecayParams, DissipationError};
use crate::dynamics::{
    propagate_const, propagate_modulated, DynamicsError, PropagatorCache, Trajectory,
};
use crate::linalg::CMat;
use crate::operator::{
    devectorize, liouvillian, matrix_log_with_schur, JumpChannel, Operator, OperatorError,
    SuperOperator,
};
use crate::perturb::{
    derive_seed, phase_noise_trace, PerturbError, PhaseNoiseSpec, PulseKind, PulseShape,
};

/// Eigenvalues with |λ| below this (rad/s) count as the zero mode.
pub const ZERO_MODE_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("operation requires constant rectangular-pulse effective generators")]
    NonConstantGenerator,
    #[error("{count} eigenvalues lie within the zero-mode tolerance; steady state is not unique")]
    NonUniqueSteadyState { count: usize },
    #[error("steady state violates positivity: min eigenvalue {0:.3e}")]
    PositivityViolation(f64),
    #[error("phase noise is only supported with effective operators")]
    NoiseNeedsEffectiveOperators,
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Dissipation(#[from] DissipationError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
}

/// Which conversion the protocol implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConversionKind {
    /// Conversion Ⅰ: GHZ⁻ → W₀.
    GhzToW,
    /// Conversion Ⅱ: W₀ → GHZ⁻.
    WToGhz,
}

impl ConversionKind {
    pub fn target_label(&self) -> StateLabel {
        match self {
            ConversionKind::GhzToW => StateLabel::W0,
            ConversionKind::WToGhz => StateLabel::GhzMinus,
        }
    }

    pub fn initial_label(&self) -> StateLabel {
        match self {
            ConversionKind::GhzToW => StateLabel::GhzMinus,
            ConversionKind::WToGhz => StateLabel::W0,
        }
    }
}

/// One step of a cycle: a coherent pump/excitation pulse or an engineered
/// dissipation window. Natural decay is handled protocol-wide.
#[derive(Debug, Clone)]
pub enum StepGenerator {
    Coherent { variant: PumpVariant, pulse: PulseShape },
    Dissipative { kind: ChannelKind },
}

#[derive(Debug, Clone)]
pub struct ProtocolStep {
    pub generator: StepGenerator,
    pub duration: f64,
}

impl ProtocolStep {
    pub fn is_coherent(&self) -> bool {
        matches!(self.generator, StepGenerator::Coherent { .. })
    }
}

/// A six-step cycle with everything needed to instantiate its generators.
#[derive(Clone)]
pub struct Protocol {
    pub kind: ConversionKind,
    pub steps: Vec<ProtocolStep>,
    pub laser: LaserParams,
    pub decay: DecayParams,
    pub vdw: VdwParams,
    /// Swap the effective operators for the carrier-resolved full
    /// Hamiltonians (required whenever U_rr ≠ Δ).
    pub use_full_hamiltonians: bool,
    /// Detuning offset of the weak drive (rad/s), added to the driven
    /// Rydberg levels.
    pub detuning: f64,
}

impl Protocol {
    /// Cycle period T = Σ tᵢ.
    pub fn period(&self) -> f64 {
        self.steps.iter().map(|s| s.duration).sum()
    }

    pub fn coherent_time_per_cycle(&self) -> f64 {
        self.steps.iter().filter(|s| s.is_coherent()).map(|s| s.duration).sum()
    }

    /// Replaces the coherent rectangular pulses with Gaussian pulses peaking
    /// at `omega0`, keeping each step's pulse-area coefficient.
    pub fn with_gaussian_pulses(&self, omega0: f64) -> Result<Protocol, ProtocolError> {
        let mut out = self.clone();
        for step in out.steps.iter_mut() {
            if let StepGenerator::Coherent { pulse, .. } = &mut step.generator {
                let gp = PulseShape::gaussian(omega0, pulse.alpha)?;
                step.duration = gp.nominal_duration();
                *pulse = gp;
            }
        }
        Ok(out)
    }
}

/// Conversion Ⅰ: [EP1 t₁ | CD τ₁ | SE0 t₃ | CD τ₁ | EP0 t₅ | UCD τ₂] with
/// t₁ = t₅ = π/(√3 Ω₂), t₃ = π/Ω₂, τ₁ = 4.6/Γ₁, τ₂ = 9.75/Γ₂.
pub fn make_conversion_i(p: &LaserParams, d: &DecayParams) -> Protocol {
    let o2 = p.omega2;
    let sqrt3 = 3f64.sqrt();
    let steps = vec![
        ProtocolStep {
            generator: StepGenerator::Coherent {
                variant: PumpVariant::Ep1,
                pulse: PulseShape::rectangular(o2, sqrt3),
            },
            duration: PI / (sqrt3 * o2),
        },
        ProtocolStep { generator: StepGenerator::Dissipative { kind: ChannelKind::Cd }, duration: tau1(d) },
        ProtocolStep {
            generator: StepGenerator::Coherent {
                variant: PumpVariant::Se0,
                pulse: PulseShape::rectangular(o2, 1.0),
            },
            duration: PI / o2,
        },
        ProtocolStep { generator: StepGenerator::Dissipative { kind: ChannelKind::Cd }, duration: tau1(d) },
        ProtocolStep {
            generator: StepGenerator::Coherent {
                variant: PumpVariant::Ep0,
                pulse: PulseShape::rectangular(o2, sqrt3),
            },
            duration: PI / (sqrt3 * o2),
        },
        ProtocolStep { generator: StepGenerator::Dissipative { kind: ChannelKind::Ucd }, duration: tau2(d) },
    ];
    Protocol {
        kind: ConversionKind::GhzToW,
        steps,
        laser: *p,
        decay: *d,
        vdw: VdwParams::from_urr(C6_REFERENCE, p.delta).expect("positive delta"),
        use_full_hamiltonians: false,
        detuning: 0.0,
    }
}

/// Conversion Ⅱ: [SE0 t₁ | UCD τ₂ | SE1 t₃ | UCD τ₂ | SE+ t₅ | UCD τ₂] with
/// t₁ = t₃ = π/Ω₂ and t₅ = π/(√2 Ω₂).
pub fn make_conversion_ii(p: &LaserParams, d: &DecayParams) -> Protocol {
    let o2 = p.omega2;
    let sqrt2 = std::f64::consts::SQRT_2;
    let steps = vec![
        ProtocolStep {
            generator: StepGenerator::Coherent {
                variant: PumpVariant::Se0,
                pulse: PulseShape::rectangular(o2, 1.0),
            },
            duration: PI / o2,
        },
        ProtocolStep { generator: StepGenerator::Dissipative { kind: ChannelKind::Ucd }, duration: tau2(d) },
        ProtocolStep {
            generator: StepGenerator::Coherent {
                variant: PumpVariant::Se1,
                pulse: PulseShape::rectangular(o2, 1.0),
            },
            duration: PI / o2,
        },
        ProtocolStep { generator: StepGenerator::Dissipative { kind: ChannelKind::Ucd }, duration: tau2(d) },
        ProtocolStep {
            generator: StepGenerator::Coherent {
                variant: PumpVariant::SePlus,
                pulse: PulseShape::rectangular(o2, sqrt2),
            },
            duration: PI / (sqrt2 * o2),
        },
        ProtocolStep { generator: StepGenerator::Dissipative { kind: ChannelKind::Ucd }, duration: tau2(d) },
    ];
    Protocol {
        kind: ConversionKind::WToGhz,
        steps,
        laser: *p,
        decay: *d,
        vdw: VdwParams::from_urr(C6_REFERENCE, p.delta).expect("positive delta"),
        use_full_hamiltonians: false,
        detuning: 0.0,
    }
}

pub fn make_protocol(kind: ConversionKind, p: &LaserParams, d: &DecayParams) -> Protocol {
    match kind {
        ConversionKind::GhzToW => make_conversion_i(p, d),
        ConversionKind::WToGhz => make_conversion_ii(p, d),
    }
}

/// Phase-noise configuration of a run: fresh per-step traces derived from the
/// master seed by default, or one shared trace when `fresh_per_step` is off.
#[derive(Debug, Clone)]
pub struct NoisePlan {
    pub spec: PhaseNoiseSpec,
    pub master_seed: u64,
    pub fresh_per_step: bool,
}

impl NoisePlan {
    pub fn new(spec: PhaseNoiseSpec, master_seed: u64) -> Self {
        Self { spec, master_seed, fresh_per_step: true }
    }
}

/// Result of a multi-cycle run: the sampled trajectory plus the state index
/// at the end of each cycle.
pub struct ProtocolRun {
    pub trajectory: Trajectory,
    pub cycle_ends: Vec<usize>,
}

impl ProtocolRun {
    pub fn final_population(&self, state: &NamedState) -> f64 {
        crate::dynamics::observe(self.trajectory.final_state(), &state.vector)
    }

    pub fn cycle_populations(&self, state: &NamedState) -> Vec<f64> {
        self.cycle_ends
            .iter()
            .map(|&i| crate::dynamics::observe(&self.trajectory.states[i], &state.vector))
            .collect()
    }
}

/// Executes protocols step by step, reusing cached superoperator
/// exponentials and carrier tables across cycles.
pub struct ProtocolRunner<'a> {
    protocol: &'a Protocol,
    cache: &'a PropagatorCache,
    gamma: Vec<JumpChannel>,
    step_counter: u64,
}

impl<'a> ProtocolRunner<'a> {
    pub fn new(protocol: &'a Protocol, cache: &'a PropagatorCache) -> Self {
        let gamma = channels_for(ChannelKind::NaturalRydberg, &protocol.decay);
        Self { protocol, cache, gamma, step_counter: 0 }
    }

    fn detuning_shift(&self) -> Option<Operator> {
        if self.protocol.detuning == 0.0 {
            None
        } else {
            Some(rydberg_number().scale(Complex64::new(self.protocol.detuning, 0.0)))
        }
    }

    fn step_laser(&self, variant: PumpVariant, pulse: &PulseShape) -> LaserParams {
        let mut p = self.protocol.laser.with_variant(variant);
        p.omega2 = pulse.omega0;
        p
    }

    fn run_step(
        &mut self,
        index: usize,
        rho: &Operator,
        samples: usize,
        noise: Option<&NoisePlan>,
    ) -> Result<Trajectory, ProtocolError> {
        let step = &self.protocol.steps[index];
        let counter = self.step_counter;
        self.step_counter += 1;
        match &step.generator {
            StepGenerator::Dissipative { kind } => {
                let mut channels = channels_for(*kind, &self.protocol.decay);
                channels.extend(self.gamma.iter().cloned());
                Ok(propagate_const(rho, None, &channels, step.duration, samples, Some(self.cache))?)
            }
            StepGenerator::Coherent { variant, pulse } => {
                let p = self.step_laser(*variant, pulse);
                if self.protocol.use_full_hamiltonians {
                    if noise.is_some() {
                        return Err(ProtocolError::NoiseNeedsEffectiveOperators);
                    }
                    let urr = self.protocol.vdw.urr;
                    match pulse.kind {
                        PulseKind::Rectangular => {
                            let mut h = structured_full_hamiltonian(&p, urr);
                            if let Some(shift) = self.detuning_shift() {
                                h = h.add(&shift);
                            }
                            Ok(propagate_const(
                                rho,
                                Some(&h),
                                &self.gamma,
                                step.duration,
                                samples,
                                Some(self.cache),
                            )?)
                        }
                        PulseKind::Gaussian => {
                            // the envelope scales only the weak structured part
                            let mut p_zero = p;
                            p_zero.omega2 = f64::MIN_POSITIVE;
                            let mut h_base = structured_full_hamiltonian(&p_zero, urr);
                            if let Some(shift) = self.detuning_shift() {
                                h_base = h_base.add(&shift);
                            }
                            // halve the Hermitian weak part so it can ride the
                            // coupling slot of the modulated propagator
                            let (_, weak) = crate::atomic::zeno_split(&p);
                            let weak_half = weak.scale(Complex64::new(0.5, 0.0));
                            let env = pulse.envelope();
                            Ok(propagate_modulated(
                                rho,
                                &h_base,
                                &weak_half,
                                |t| Complex64::new(env.value(t), 0.0),
                                &self.gamma,
                                step.duration,
                                samples,
                                1e-8,
                                1e-10,
                            )?)
                        }
                    }
                } else {
                    let coupling = effective_coupling_half(&p);
                    let mut static_part = Operator::zeros(coupling.dim());
                    if let Some(shift) = self.detuning_shift() {
                        static_part = static_part.add(&shift);
                    }
                    match (noise, pulse.kind) {
                        (None, PulseKind::Rectangular) => {
                            let h = coupling.add(&coupling.dagger()).add(&static_part);
                            Ok(propagate_const(
                                rho,
                                Some(&h),
                                &self.gamma,
                                step.duration,
                                samples,
                                Some(self.cache),
                            )?)
                        }
                        (None, PulseKind::Gaussian) => {
                            let env = pulse.envelope();
                            Ok(propagate_modulated(
                                rho,
                                &static_part,
                                &coupling,
                                |t| Complex64::new(env.value(t), 0.0),
                                &self.gamma,
                                step.duration,
                                samples,
                                1e-8,
                                1e-10,
                            )?)
                        }
                        (Some(plan), _) => {
                            let seed = if plan.fresh_per_step {
                                derive_seed(plan.master_seed, counter)
                            } else {
                                plan.master_seed
                            };
                            let spec = PhaseNoiseSpec { seed, ..plan.spec };
                            let trace = phase_noise_trace(&spec, step.duration)?;
                            if !trace.covers(step.duration) {
                                return Err(ProtocolError::Perturb(PerturbError::TraceTooShort {
                                    covered: trace.duration(),
                                    needed: step.duration,
                                }));
                            }
                            let env = pulse.envelope();
                            Ok(propagate_modulated(
                                rho,
                                &static_part,
                                &coupling,
                                |t| Complex64::from_polar(env.value(t), trace.phi_at(t)),
                                &self.gamma,
                                step.duration,
                                samples,
                                1e-8,
                                1e-10,
                            )?)
                        }
                    }
                }
            }
        }
    }

    /// Runs `n_cycles` cycles from ρ₀, sampling each step `samples_per_step`
    /// times.
    pub fn run_cycles(
        &mut self,
        rho0: &Operator,
        n_cycles: usize,
        samples_per_step: usize,
        noise: Option<&NoisePlan>,
    ) -> Result<ProtocolRun, ProtocolError> {
        assert!(n_cycles >= 1, "n_cycles must be at least 1");
        self.step_counter = 0;
        let mut trajectory = Trajectory::new(vec![0.0], vec![rho0.clone()]);
        let mut cycle_ends = Vec::with_capacity(n_cycles);
        let mut offset = 0.0;
        let mut rho = rho0.clone();
        for _cycle in 0..n_cycles {
            for index in 0..self.protocol.steps.len() {
                let mut seg = self.run_step(index, &rho, samples_per_step, noise)?;
                rho = seg.final_state().clone();
                let local_end = *seg.times.last().unwrap();
                for t in seg.times.iter_mut() {
                    *t += offset;
                }
                offset += local_end;
                trajectory.extend_with(seg);
            }
            cycle_ends.push(trajectory.states.len() - 1);
        }
        Ok(ProtocolRun { trajectory, cycle_ends })
    }
}

/// One-cycle step generators as constant Liouvillians. Requires effective
/// operators and rectangular pulses.
fn step_liouvillians(protocol: &Protocol) -> Result<Vec<(SuperOperator, f64)>, ProtocolError> {
    if protocol.use_full_hamiltonians {
        return Err(ProtocolError::NonConstantGenerator);
    }
    let gamma = channels_for(ChannelKind::NaturalRydberg, &protocol.decay);
    let shift = if protocol.detuning == 0.0 {
        None
    } else {
        Some(rydberg_number().scale(Complex64::new(protocol.detuning, 0.0)))
    };
    let mut out = Vec::with_capacity(protocol.steps.len());
    for step in &protocol.steps {
        match &step.generator {
            StepGenerator::Dissipative { kind } => {
                let mut channels = channels_for(*kind, &protocol.decay);
                channels.extend(gamma.iter().cloned());
                out.push((liouvillian(None, &channels)?, step.duration));
            }
            StepGenerator::Coherent { variant, pulse } => {
                if pulse.kind != PulseKind::Rectangular {
                    return Err(ProtocolError::NonConstantGenerator);
                }
                let mut p = protocol.laser.with_variant(*variant);
                p.omega2 = pulse.omega0;
                let c = effective_coupling_half(&p);
                let mut h = c.add(&c.dagger());
                if let Some(s) = &shift {
                    h = h.add(s);
                }
                out.push((liouvillian(Some(&h), &gamma)?, step.duration));
            }
        }
    }
    Ok(out)
}

/// One-period propagator P = e^{L₆t₆}···e^{L₁t₁} (step 1 acts first).
pub fn cycle_propagator(
    protocol: &Protocol,
    cache: &PropagatorCache,
) -> Result<SuperOperator, ProtocolError> {
    let ls = step_liouvillians(protocol)?;
    let mut p: Option<SuperOperator> = None;
    for (l, t) in &ls {
        let step_prop = cache.propagator(l, *t)?;
        p = Some(match p {
            None => (*step_prop).clone(),
            Some(acc) => step_prop.mul(&acc),
        });
    }
    Ok(p.expect("protocol has steps"))
}

/// Effective Floquet generator L_eff = ln(P)/T on the principal branch.
pub fn effective_liouvillian(
    protocol: &Protocol,
    cache: &PropagatorCache,
) -> Result<SuperOperator, ProtocolError> {
    let p = cycle_propagator(protocol, cache)?;
    let (l_eff, _) = matrix_log_with_schur(&p, protocol.period())?;
    Ok(l_eff)
}

/// Spectrum, steady state, and figures of merit of an effective generator.
pub struct SpectrumResult {
    /// Eigenvalues sorted by descending real part (rad/s).
    pub eigenvalues: Vec<Complex64>,
    pub steady_state: Operator,
    pub purity: f64,
    pub target_population: f64,
    /// |Re λ₂| of the slowest nonzero mode (rad/s).
    pub spectral_gap: f64,
    pub zero_mode_count: usize,
}

fn analyze_eig(
    eigenvalues: Vec<Complex64>,
    eigenvectors: &CMat,
    hilbert_dim: usize,
    target: &NamedState,
) -> Result<SpectrumResult, ProtocolError> {
    let zero_modes: Vec<usize> = eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, l)| l.norm() < ZERO_MODE_TOL)
        .map(|(i, _)| i)
        .collect();
    if zero_modes.len() != 1 {
        return Err(ProtocolError::NonUniqueSteadyState { count: zero_modes.len() });
    }
    let k = zero_modes[0];
    let n2 = hilbert_dim * hilbert_dim;
    let v: Vec<Complex64> = (0..n2).map(|i| eigenvectors[(i, k)]).collect();
    let raw = devectorize(&v)?;
    // Hermitize and normalize; eigenvector scaling leaves an arbitrary phase.
    let herm = raw.add(&raw.dagger()).scale(Complex64::new(0.5, 0.0));
    let tr = herm.trace().re;
    let mut rho = herm.scale(Complex64::new(1.0 / tr, 0.0));
    // positivity check and clipping of numerical negatives
    let (vals, vecs) = rho.herm_eig()?;
    if vals[0] < -1e-8 {
        return Err(ProtocolError::PositivityViolation(vals[0]));
    }
    if vals[0] < 0.0 {
        let dim = rho.dim();
        let mut rebuilt = Operator::zeros(dim);
        let mut total = 0.0;
        for (j, &lam) in vals.iter().enumerate() {
            let lam_c = lam.max(0.0);
            if lam_c == 0.0 {
                continue;
            }
            total += lam_c;
            let col: Vec<Complex64> = (0..dim).map(|i| vecs[(i, j)]).collect();
            rebuilt = rebuilt.add(&Operator::ket_bra(dim, &col, &col).scale(Complex64::new(lam_c, 0.0)));
        }
        rho = rebuilt.scale(Complex64::new(1.0 / total, 0.0));
    }
    let purity = crate::dynamics::purity(&rho);
    let target_population = crate::dynamics::observe(&rho, &target.vector);
    let spectral_gap = eigenvalues
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, l)| l.re.abs())
        .fold(f64::INFINITY, f64::min);
    Ok(SpectrumResult {
        eigenvalues,
        steady_state: rho,
        purity,
        target_population,
        spectral_gap,
        zero_mode_count: 1,
    })
}

/// Spectral analysis of an already-built effective generator.
pub fn steady_state_analysis(
    l_eff: &SuperOperator,
    target: &NamedState,
) -> Result<SpectrumResult, ProtocolError> {
    let eig = crate::operator::eig(l_eff)?;
    analyze_eig(eig.eigenvalues, &eig.right_eigenvectors, l_eff.hilbert_dim(), target)
}

/// Builds the cycle propagator and analyzes the spectrum of its effective
/// generator through one Schur factorization: the generator's eigenvalues
/// are the principal scalar logarithms λ = Log(μ)/T of the propagator
/// eigenvalues and the eigenvectors are shared. This stays finite even when
/// the fully decayed modes form a defective block whose matrix logarithm
/// has no bounded representation.
pub fn analyze_protocol_spectrum(
    protocol: &Protocol,
    cache: &PropagatorCache,
) -> Result<SpectrumResult, ProtocolError> {
    let p = cycle_propagator(protocol, cache)?;
    let period = protocol.period();
    let s = crate::linalg::schur(p.mat()).map_err(OperatorError::from)?;
    let mut radius = 0.0f64;
    for ev in s.eigenvalues() {
        radius = radius.max(ev.norm());
    }
    if radius > 1.0 + 1e-8 {
        return Err(ProtocolError::Operator(OperatorError::NotAPropagator(radius)));
    }
    let symmetric = crate::operator::preserves_hermiticity(&p);
    let (mu, vecs) = crate::linalg::eig_from_schur(&s);
    let mut lambda = Vec::with_capacity(mu.len());
    for m in &mu {
        let modulus = m.norm();
        let l = if modulus == 0.0 {
            // numerically dead mode: floor the decay rate at the double
            // precision limit
            Complex64::new(f64::MIN_POSITIVE.ln() / period, 0.0)
        } else if m.re < 0.0 && m.im.abs() <= 1e-12 * modulus {
            if !symmetric {
                return Err(ProtocolError::Operator(OperatorError::Linalg(
                    crate::linalg::LinalgError::BranchCut { re: m.re, im: m.im, tol: 1e-12 },
                )));
            }
            // canonical boundary branch for an eigenvalue pinned to the axis
            Complex64::new(modulus.ln() / period, std::f64::consts::PI / period)
        } else {
            let ln = Complex64::new(modulus.ln(), m.im.atan2(m.re));
            ln / Complex64::new(period, 0.0)
        };
        lambda.push(l);
    }
    // re-sort by descending real part of the generator eigenvalues
    let n = lambda.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        (lambda[b].re, lambda[b].im)
            .partial_cmp(&(lambda[a].re, lambda[a].im))
            .unwrap()
    });
    let sorted: Vec<Complex64> = order.iter().map(|&i| lambda[i]).collect();
    let sorted_vecs = crate::linalg::CMat::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    let target = named_state(protocol.kind.target_label());
    analyze_eig(sorted, &sorted_vecs, p.hilbert_dim(), &target)
}

/// Steady-state figures of merit across a grid of Ω₂/Ω₁ ratios at fixed Ω₁.
/// Per-point failures are recorded without aborting the sweep.
pub fn sweep_ratio(
    kind: ConversionKind,
    base_laser: &LaserParams,
    decay: &DecayParams,
    ratios: &[f64],
) -> Vec<(f64, Result<SpectrumResult, ProtocolError>)> {
    use rayon::prelude::*;
    ratios
        .par_iter()
        .map(|&ratio| {
            let cache = PropagatorCache::new();
            let result = (|| {
                let mut p = *base_laser;
                p.omega2 = ratio * p.omega1;
                let protocol = make_protocol(kind, &p, decay);
                analyze_protocol_spectrum(&protocol, &cache)
            })();
            (ratio, result)
        })
        .collect()
}

/// The laser-cooling-prepared mixed state of the ground-state manifold:
/// Σ aᵢ |family_i⟩⟨family_i| over
/// {W₀, W₀′, W₀″, W₁, W₁′, W₁″, GHZ₊, GHZ₋}; weights are normalized.
pub fn mixed_ground_state(weights: &[f64; 8]) -> Operator {
    use StateLabel::*;
    let labels =
        [W0, W0Prime, W0DoublePrime, W1, W1Prime, W1DoublePrime, GhzPlus, GhzMinus];
    let total: f64 = weights.iter().sum();
    let mut rho = Operator::zeros(crate::atomic::DIM);
    for (w, label) in weights.iter().zip(labels.iter()) {
        if *w == 0.0 {
            continue;
        }
        let v = named_state(*label).vector;
        rho = rho.add(&Operator::ket_bra(crate::atomic::DIM, &v, &v).scale(Complex64::new(w / total, 0.0)));
    }
    rho
}

/// Density matrix of a pure named state.
pub fn pure_state(label: StateLabel) -> Operator {
    let v = named_state(label).vector;
    Operator::ket_bra(v.len(), &v, &v)
}
