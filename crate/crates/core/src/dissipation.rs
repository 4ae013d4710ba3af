// Copyright 2026 flsim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Engineered spontaneous-emission channels.
//!
//! Two dissipation modes act on the register, both built by coupling |r⟩ to
//! short-lived intermediate states:
//!
//! - CD (conditional decay): |r⟩ → |0⟩ only, rate Γ₁ = Ω_d₁²/γ₁;
//! - UCD (unconditional decay): |r⟩ → |0⟩ and |1⟩ at Γ₂/2 each,
//!   Γ₂ = Ω_d₂²/γ₂.
//!
//! The natural Rydberg decay γ_r is modeled the same way with equal
//! branching. Single-atom models with the intermediate states still present
//! validate the adiabatic elimination; their analytic ground-population laws
//! are the oracles for the decay-duration calibration.

use num_complex::Complex64;
use thiserror::Error;

use crate::atomic::{transition, Level, N_ATOMS};
use crate::linalg::ONE;
use crate::operator::{JumpChannel, Operator, OperatorError};

#[derive(Debug, Error)]
pub enum DissipationError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("target ground population must lie in (0, 1), got {0}")]
    InvalidTarget(f64),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Decay-engineering parameters, all angular frequencies (rad/s).
#[derive(Debug, Clone, Copy)]
pub struct DecayParams {
    /// Intermediate-state linewidths. γ₃ defaults to γ₁ (same lifetime).
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    /// Dressing Rabi frequencies r↔p.
    pub omega_d1: f64,
    pub omega_d2: f64,
    pub omega_d3: f64,
    /// Natural Rydberg decay rate.
    pub gamma_r: f64,
}

impl DecayParams {
    /// The working point of the engineered channels: Ω_d/γ = 0.2 with the
    /// rubidium linewidths, which lands Γ₁ = 2π×0.2424 MHz and
    /// Γ₂ = 2π×0.23 MHz.
    pub fn reference() -> Self {
        let tau = 2.0 * std::f64::consts::PI;
        let gamma1 = tau * 6.06e6;
        let gamma2 = tau * 5.75e6;
        let gamma3 = gamma1;
        Self {
            gamma1,
            gamma2,
            gamma3,
            omega_d1: 0.2 * gamma1,
            omega_d2: 0.2 * gamma2,
            omega_d3: 0.2 * gamma3,
            gamma_r: tau * 0.28e3,
        }
    }

    pub fn validate(&self) -> Result<(), DissipationError> {
        for (name, v) in [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma3", self.gamma3),
            ("omega_d1", self.omega_d1),
            ("omega_d2", self.omega_d2),
            ("omega_d3", self.omega_d3),
            ("gamma_r", self.gamma_r),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(DissipationError::InvalidParameter(format!("{name} = {v}")));
            }
        }
        Ok(())
    }

    /// Adiabatic-elimination advisories (Ω_d/γ ≤ 0.2).
    pub fn validity_warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        for (name, od, g) in [
            ("omega_d1/gamma1", self.omega_d1, self.gamma1),
            ("omega_d2/gamma2", self.omega_d2, self.gamma2),
            ("omega_d3/gamma3", self.omega_d3, self.gamma3),
        ] {
            if g > 0.0 && od / g > 0.2 + 1e-12 {
                w.push(format!("{name} = {:.3} exceeds 0.2", od / g));
            }
        }
        w
    }

    /// Γ₁ = Ω_d₁²/γ₁.
    pub fn gamma_cd(&self) -> f64 {
        if self.gamma1 == 0.0 { 0.0 } else { self.omega_d1 * self.omega_d1 / self.gamma1 }
    }

    /// Γ₂ = Ω_d₂²/γ₂.
    pub fn gamma_ucd(&self) -> f64 {
        if self.gamma2 == 0.0 { 0.0 } else { self.omega_d2 * self.omega_d2 / self.gamma2 }
    }

    /// Γ₃ = Γ₂ γ₃/γ₂ (recycling rate of the noncomputational state).
    pub fn gamma_recycle(&self) -> f64 {
        if self.gamma2 == 0.0 { 0.0 } else { self.gamma_ucd() * self.gamma3 / self.gamma2 }
    }
}

/// Which engineered reservoir acts on the register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    /// Conditional decay |r⟩ → |0⟩ at Γ₁.
    Cd,
    /// Unconditional decay |r⟩ → |0⟩, |1⟩ at Γ₂/2 each.
    Ucd,
    /// Natural decay |r⟩ → |0⟩, |1⟩ at γ_r/2 each.
    NaturalRydberg,
}

/// Rates and branching of one engineered reservoir on the register.
#[derive(Debug, Clone)]
pub struct EngineeredChannelSpec {
    pub kind: ChannelKind,
    /// (target level, rate) pairs per atom.
    pub effective_rates: Vec<(Level, f64)>,
}

impl EngineeredChannelSpec {
    pub fn new(kind: ChannelKind, d: &DecayParams) -> Self {
        let rates = match kind {
            ChannelKind::Cd => vec![(Level::Zero, d.gamma_cd())],
            ChannelKind::Ucd => {
                let g = d.gamma_ucd();
                vec![(Level::Zero, g / 2.0), (Level::One, g / 2.0)]
            }
            ChannelKind::NaturalRydberg => {
                vec![(Level::Zero, d.gamma_r / 2.0), (Level::One, d.gamma_r / 2.0)]
            }
        };
        Self { kind, effective_rates: rates }
    }

    /// Branching fractions per target level (sums to 1 when any rate is set).
    pub fn branching(&self) -> Vec<(Level, f64)> {
        let total: f64 = self.effective_rates.iter().map(|(_, r)| r).sum();
        if total == 0.0 {
            return Vec::new();
        }
        self.effective_rates.iter().map(|&(l, r)| (l, r / total)).collect()
    }
}

/// Register-level (27-dim) jump channels for a reservoir: one |g⟩⟨r| channel
/// per atom per target level. Zero-rate channels are dropped.
pub fn effective_channels(spec: &EngineeredChannelSpec, _d: &DecayParams) -> Vec<JumpChannel> {
    let mut out = Vec::new();
    for atom in 0..N_ATOMS {
        for &(level, rate) in &spec.effective_rates {
            if rate > 0.0 {
                let op = transition(atom, level, Level::Rydberg);
                out.push(JumpChannel { operator: op, rate });
            }
        }
    }
    out
}

/// Convenience: register channels of a [`ChannelKind`].
pub fn channels_for(kind: ChannelKind, d: &DecayParams) -> Vec<JumpChannel> {
    effective_channels(&EngineeredChannelSpec::new(kind, d), d)
}

/// A single-atom validation model: Hamiltonian plus jump channels on an
/// extended space that still contains the short-lived intermediate states.
pub struct SingleAtomModel {
    pub dim: usize,
    pub hamiltonian: Operator,
    pub channels: Vec<JumpChannel>,
    /// Index of |r⟩ (initial state of the validation runs).
    pub rydberg: usize,
    /// Indices of the computational ground states |0⟩, |1⟩.
    pub ground: Vec<usize>,
}

fn lower(dim: usize, to: usize, from: usize) -> Operator {
    let mut m = Operator::zeros(dim);
    m.set(to, from, ONE);
    m
}

/// Full CD model on {|r⟩, |p₁⟩, |0⟩, |1⟩}: resonant dressing r↔p₁ at Ω_d₁
/// with p₁ decaying only to |0⟩ at γ₁.
pub fn full_cd_model(d: &DecayParams) -> Result<SingleAtomModel, DissipationError> {
    d.validate()?;
    let dim = 4;
    let (r, p1, g0) = (0usize, 1usize, 2usize);
    let mut h = Operator::zeros(dim);
    h.set(r, p1, Complex64::new(d.omega_d1 / 2.0, 0.0));
    h.set(p1, r, Complex64::new(d.omega_d1 / 2.0, 0.0));
    let channels = vec![JumpChannel::new(lower(dim, g0, p1), d.gamma1)?];
    Ok(SingleAtomModel { dim, hamiltonian: h, channels, rydberg: r, ground: vec![g0, 3] })
}

/// Effective CD model on the same 4-level space: Γ₁ D[|0⟩⟨r|].
pub fn effective_cd_model(d: &DecayParams) -> Result<SingleAtomModel, DissipationError> {
    d.validate()?;
    let dim = 4;
    let (r, g0) = (0usize, 2usize);
    let channels = vec![JumpChannel::new(lower(dim, g0, r), d.gamma_cd())?];
    Ok(SingleAtomModel { dim, hamiltonian: Operator::zeros(dim), channels, rydberg: r, ground: vec![g0, 3] })
}

/// Full UCD model on {|r⟩, |p₃⟩, |p₄⟩, |0⟩, |1⟩, |α⟩}: dressing r↔p₃ at Ω_d₂,
/// recycling α↔p₄ at Ω_d₃, with branching p₃ → (0, 1, α) at (1/3, 1/2, 1/6)γ₂
/// and p₄ → (0, α) at (1/3, 2/3)γ₃.
pub fn full_ucd_model(d: &DecayParams) -> Result<SingleAtomModel, DissipationError> {
    d.validate()?;
    let dim = 6;
    let (r, p3, p4, g0, g1, alpha) = (0usize, 1usize, 2usize, 3usize, 4usize, 5usize);
    let mut h = Operator::zeros(dim);
    h.set(r, p3, Complex64::new(d.omega_d2 / 2.0, 0.0));
    h.set(p3, r, Complex64::new(d.omega_d2 / 2.0, 0.0));
    h.set(alpha, p4, Complex64::new(d.omega_d3 / 2.0, 0.0));
    h.set(p4, alpha, Complex64::new(d.omega_d3 / 2.0, 0.0));
    let channels = vec![
        JumpChannel::new(lower(dim, g0, p3), d.gamma2 / 3.0)?,
        JumpChannel::new(lower(dim, g1, p3), d.gamma2 / 2.0)?,
        JumpChannel::new(lower(dim, alpha, p3), d.gamma2 / 6.0)?,
        JumpChannel::new(lower(dim, g0, p4), d.gamma3 / 3.0)?,
        JumpChannel::new(lower(dim, alpha, p4), 2.0 * d.gamma3 / 3.0)?,
    ];
    Ok(SingleAtomModel { dim, hamiltonian: h, channels, rydberg: r, ground: vec![g0, g1] })
}

/// Effective UCD model after eliminating p₃ and p₄; the α state survives
/// with branching Γ₂^l from |r⟩ and Γ₃^l from |α⟩.
pub fn effective_ucd_model(d: &DecayParams) -> Result<SingleAtomModel, DissipationError> {
    d.validate()?;
    let dim = 6;
    let (r, g0, g1, alpha) = (0usize, 3usize, 4usize, 5usize);
    let g2 = d.gamma_ucd();
    let g3 = d.gamma_recycle();
    let channels = vec![
        JumpChannel::new(lower(dim, g0, r), g2 / 3.0)?,
        JumpChannel::new(lower(dim, g1, r), g2 / 2.0)?,
        JumpChannel::new(lower(dim, alpha, r), g2 / 6.0)?,
        JumpChannel::new(lower(dim, g0, alpha), g3 / 3.0)?,
        JumpChannel::new(lower(dim, alpha, alpha), 2.0 * g3 / 3.0)?,
    ];
    Ok(SingleAtomModel { dim, hamiltonian: Operator::zeros(dim), channels, rydberg: r, ground: vec![g0, g1] })
}

/// Analytic ground population of the effective CD channel from |r⟩:
/// ρ₀₀(t) = 1 − e^{−Γ₁ t}.
pub fn cd_ground_population(d: &DecayParams, t: f64) -> f64 {
    1.0 - (-d.gamma_cd() * t).exp()
}

/// Analytic computational ground population of the effective UCD channel
/// from |r⟩:
///
/// ρ₀₀+ρ₁₁ = 1 − e^{−Γ₂ t} − Γ₂/(6Γ₂−2Γ₃) (e^{−Γ₃ t/3} − e^{−Γ₂ t}).
///
/// Uses the limit form when 6Γ₂ = 2Γ₃.
pub fn ucd_ground_population(d: &DecayParams, t: f64) -> Result<f64, DissipationError> {
    let g2 = d.gamma_ucd();
    let g3 = d.gamma_recycle();
    let denom = 6.0 * g2 - 2.0 * g3;
    let alpha_pop = if denom.abs() < 1e-12 * (6.0 * g2).max(2.0 * g3) {
        // Γ₃/3 → Γ₂: the α population becomes (Γ₂ t / 6) e^{−Γ₂ t}.
        g2 * t / 6.0 * (-g2 * t).exp()
    } else {
        g2 / denom * ((-g3 * t / 3.0).exp() - (-g2 * t).exp())
    };
    Ok(1.0 - (-g2 * t).exp() - alpha_pop)
}

/// Smallest time at which the analytic ground population reaches `target`.
/// CD inverts the exponential in closed form; UCD bisects the closed-form
/// law above.
pub fn decay_duration(
    target_ground_prob: f64,
    kind: ChannelKind,
    d: &DecayParams,
) -> Result<f64, DissipationError> {
    if !(0.0..1.0).contains(&target_ground_prob) || target_ground_prob == 0.0 {
        return Err(DissipationError::InvalidTarget(target_ground_prob));
    }
    match kind {
        ChannelKind::Cd => {
            let g = d.gamma_cd();
            if g <= 0.0 {
                return Err(DissipationError::InvalidParameter("gamma_cd is zero".into()));
            }
            Ok(-(1.0 - target_ground_prob).ln() / g)
        }
        ChannelKind::Ucd => {
            let g2 = d.gamma_ucd();
            if g2 <= 0.0 {
                return Err(DissipationError::InvalidParameter("gamma_ucd is zero".into()));
            }
            // bracket then bisect; the law is monotone increasing
            let mut lo = 0.0f64;
            let mut hi = 1.0 / g2;
            while ucd_ground_population(d, hi)? < target_ground_prob {
                hi *= 2.0;
                if hi > 1e6 / g2 {
                    return Err(DissipationError::InvalidParameter(
                        "target unreachable within 1e6 decay times".into(),
                    ));
                }
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if ucd_ground_population(d, mid)? >= target_ground_prob {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(hi)
        }
        ChannelKind::NaturalRydberg => {
            let g = d.gamma_r;
            if g <= 0.0 {
                return Err(DissipationError::InvalidParameter("gamma_r is zero".into()));
            }
            Ok(-(1.0 - target_ground_prob).ln() / g)
        }
    }
}

/// Protocol decay windows pinned to the calibration constants:
/// τ₁ = 4.6/Γ₁ (CD) and τ₂ = 9.75/Γ₂ (UCD).
pub fn tau1(d: &DecayParams) -> f64 {
    4.6 / d.gamma_cd()
}

pub fn tau2(d: &DecayParams) -> f64 {
    9.75 / d.gamma_ucd()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU: f64 = 2.0 * std::f64::consts::PI;

    #[test]
    fn engineered_rates_match_reference_point() {
        let d = DecayParams::reference();
        assert!((d.gamma_cd() - TAU * 0.2424e6).abs() / (TAU * 0.2424e6) < 1e-12);
        assert!((d.gamma_ucd() - TAU * 0.23e6).abs() / (TAU * 0.23e6) < 1e-12);
        assert!(d.validity_warnings().is_empty());
    }

    #[test]
    fn zero_dressing_gives_no_channels() {
        let mut d = DecayParams::reference();
        d.omega_d1 = 0.0;
        let spec = EngineeredChannelSpec::new(ChannelKind::Cd, &d);
        assert!(effective_channels(&spec, &d).is_empty());
    }

    #[test]
    fn channel_counts_and_branching() {
        let d = DecayParams::reference();
        let cd = channels_for(ChannelKind::Cd, &d);
        assert_eq!(cd.len(), 3); // one per atom
        let ucd = channels_for(ChannelKind::Ucd, &d);
        assert_eq!(ucd.len(), 6); // two per atom
        let spec = EngineeredChannelSpec::new(ChannelKind::Ucd, &d);
        let b = spec.branching();
        assert_eq!(b.len(), 2);
        assert!((b[0].1 - 0.5).abs() < 1e-15);
        assert!((b[1].1 - 0.5).abs() < 1e-15);
        let total: f64 = b.iter().map(|(_, f)| f).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cd_duration_closed_forms() {
        let d = DecayParams::reference();
        let t99 = decay_duration(0.99, ChannelKind::Cd, &d).unwrap();
        assert!((t99 * d.gamma_cd() - (100f64).ln()).abs() < 1e-12);
        // half-life
        let t50 = decay_duration(0.5, ChannelKind::Cd, &d).unwrap();
        assert!((t50 * d.gamma_cd() - 2f64.ln()).abs() < 1e-12);
        assert!(decay_duration(1.0, ChannelKind::Cd, &d).is_err());
    }

    #[test]
    fn ucd_law_reference_values() {
        let d = DecayParams::reference();
        // paper's window: 9.75/Γ₂ lands at ~99.2% ground population
        let p = ucd_ground_population(&d, 9.75 / d.gamma_ucd()).unwrap();
        assert!(p >= 0.99, "population {p}");
        assert!((p - 0.9916).abs() < 5e-4, "population {p}");
        assert_eq!(ucd_ground_population(&d, 0.0).unwrap(), 0.0);
        // long-time limit
        let p_inf = ucd_ground_population(&d, 60.0 / d.gamma_ucd()).unwrap();
        assert!((p_inf - 1.0).abs() < 1e-8);
    }

    #[test]
    fn ucd_duration_bisection_is_consistent() {
        let d = DecayParams::reference();
        let t = decay_duration(0.99, ChannelKind::Ucd, &d).unwrap();
        let p = ucd_ground_population(&d, t).unwrap();
        assert!((p - 0.99).abs() < 1e-9);
        // monotone law → earlier time is below target
        assert!(ucd_ground_population(&d, t * 0.999).unwrap() < 0.99);
    }

    #[test]
    fn tau_windows() {
        let d = DecayParams::reference();
        assert!((tau1(&d) - 3.02e-6).abs() < 0.01e-6);
        assert!((tau2(&d) - 6.75e-6).abs() < 0.01e-6);
    }

    #[test]
    fn singular_formula_limit_form() {
        let mut d = DecayParams::reference();
        // force Γ₃ = 3 Γ₂ so that 6Γ₂ − 2Γ₃ = 0
        d.gamma3 = 3.0 * d.gamma2;
        d.omega_d3 = 0.2 * d.gamma3;
        let p = ucd_ground_population(&d, 1.0 / d.gamma_ucd()).unwrap();
        assert!(p.is_finite());
        assert!(p > 0.0 && p < 1.0);
    }
}
