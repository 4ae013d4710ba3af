// Copyright 2026 flsim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Three-atom, three-level basis and Hamiltonians.
//!
//! Each atom carries the Λ system {|0⟩, |1⟩, |r⟩}. Basis ordering is
//! atom-major lexicographic |i₁⟩⊗|j₂⟩⊗|k₃⟩ with level order (0, 1, r), so
//! `index = 9·i + 3·j + k` with 0↦0, 1↦1, r↦2. The two pump classes:
//!
//! - entangled pump (EP0/EP1): strong off-resonant drive on one transition,
//!   weak resonant drive on the other;
//! - selective excitation (SE0/SE1/SE+): both drives on the same
//!   transition(s).
//!
//! Full Hamiltonians follow the interaction picture, where the strong drive
//! carries e^{∓iΔt} and the vdW shift U_rr sits on doubly-excited pairs.
//! The static frame trades those phases for constant diagonal shifts.

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::ONE;
use crate::operator::{kron, Operator, OperatorError};

pub const N_ATOMS: usize = 3;
pub const N_LEVELS: usize = 3;
/// Hilbert dimension of the three-atom register.
pub const DIM: usize = 27;

/// Dispersion coefficient of the 80S₁/₂ pair state (rad/s · μm⁶).
pub const C6_REFERENCE: f64 = 2.0 * std::f64::consts::PI * 4161.55e9;

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Error)]
pub enum AtomicError {
    #[error("unknown pump variant for this operation: {0:?}")]
    UnsupportedVariant(PumpVariant),
    #[error("strong Hamiltonian has an empty null space")]
    EmptyNullSpace,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Single-atom level, in basis order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Zero = 0,
    One = 1,
    Rydberg = 2,
}

/// Single-atom state including the ± superpositions (|0⟩±|1⟩)/√2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalState {
    Zero,
    One,
    Rydberg,
    Plus,
    Minus,
}

impl LocalState {
    fn amplitudes(self) -> [Complex64; 3] {
        let h = Complex64::new(1.0 / SQRT2, 0.0);
        match self {
            LocalState::Zero => [ONE, Complex64::ZERO, Complex64::ZERO],
            LocalState::One => [Complex64::ZERO, ONE, Complex64::ZERO],
            LocalState::Rydberg => [Complex64::ZERO, Complex64::ZERO, ONE],
            LocalState::Plus => [h, h, Complex64::ZERO],
            LocalState::Minus => [h, -h, Complex64::ZERO],
        }
    }
}

/// Index of the basis ket |i j k⟩.
pub fn basis_index(levels: [Level; N_ATOMS]) -> usize {
    9 * levels[0] as usize + 3 * levels[1] as usize + levels[2] as usize
}

/// Product ket over the three atoms.
pub fn product_ket(states: [LocalState; N_ATOMS]) -> Vec<Complex64> {
    let amps: Vec<[Complex64; 3]> = states.iter().map(|s| s.amplitudes()).collect();
    let mut v = vec![Complex64::ZERO; DIM];
    for i in 0..N_LEVELS {
        for j in 0..N_LEVELS {
            for k in 0..N_LEVELS {
                let amp = amps[0][i] * amps[1][j] * amps[2][k];
                if amp != Complex64::ZERO {
                    v[9 * i + 3 * j + k] = amp;
                }
            }
        }
    }
    v
}

fn basis_ket(levels: [Level; N_ATOMS]) -> Vec<Complex64> {
    let mut v = vec![Complex64::ZERO; DIM];
    v[basis_index(levels)] = ONE;
    v
}

/// Embeds a 3x3 single-atom operator on the given atom (0-based).
pub fn single_atom_op(atom: usize, local: &Operator) -> Operator {
    assert!(atom < N_ATOMS);
    assert_eq!(local.dim(), N_LEVELS);
    let id = Operator::identity(N_LEVELS);
    let pick = |k: usize| if k == atom { local } else { &id };
    kron(&kron(pick(0), pick(1)), pick(2))
}

/// σ^{ab} = |a⟩⟨b| on one atom, identity elsewhere.
pub fn transition(atom: usize, to: Level, from: Level) -> Operator {
    let mut t = Operator::zeros(N_LEVELS);
    t.set(to as usize, from as usize, ONE);
    single_atom_op(atom, &t)
}

/// |a⟩⟨a| on one atom.
pub fn projector(atom: usize, level: Level) -> Operator {
    transition(atom, level, level)
}

/// Σ_j |r⟩⟨r|_j.
pub fn rydberg_number() -> Operator {
    let mut n = Operator::zeros(DIM);
    for atom in 0..N_ATOMS {
        n = n.add(&projector(atom, Level::Rydberg));
    }
    n
}

/// Σ_j |g⟩⟨g|_j for a ground level.
pub fn level_number(level: Level) -> Operator {
    let mut n = Operator::zeros(DIM);
    for atom in 0..N_ATOMS {
        n = n.add(&projector(atom, level));
    }
    n
}

/// U_rr Σ_{j<k} n_j n_k.
pub fn vdw_interaction(urr: f64) -> Operator {
    let mut v = Operator::zeros(DIM);
    for j in 0..N_ATOMS {
        for k in j + 1..N_ATOMS {
            let njk = projector(j, Level::Rydberg).mul(&projector(k, Level::Rydberg));
            v = v.add(&njk);
        }
    }
    v.scale(Complex64::new(urr, 0.0))
}

/// Which pump/excitation configuration the lasers realize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PumpVariant {
    /// Entangled pump through |0⟩→|r⟩ (W₀ dark).
    Ep0,
    /// Entangled pump through |1⟩→|r⟩ (W₁ dark).
    Ep1,
    /// Selective excitation of |0⟩ when the other atoms sit in |1⟩.
    Se0,
    /// Selective excitation of |1⟩ when the other atoms sit in |0⟩.
    Se1,
    /// Combined drive exciting |+⟩ when the other atoms sit in |−⟩.
    SePlus,
}

impl PumpVariant {
    /// Ground level(s) driven by the strong field Ω₁.
    fn strong_levels(self) -> &'static [Level] {
        match self {
            PumpVariant::Ep0 => &[Level::One],
            PumpVariant::Ep1 => &[Level::Zero],
            PumpVariant::Se0 => &[Level::Zero],
            PumpVariant::Se1 => &[Level::One],
            PumpVariant::SePlus => &[Level::Zero, Level::One],
        }
    }

    /// Ground level(s) driven by the weak field Ω₂.
    fn weak_levels(self) -> &'static [Level] {
        match self {
            PumpVariant::Ep0 => &[Level::Zero],
            PumpVariant::Ep1 => &[Level::One],
            PumpVariant::Se0 => &[Level::Zero],
            PumpVariant::Se1 => &[Level::One],
            PumpVariant::SePlus => &[Level::Zero, Level::One],
        }
    }
}

/// Drive parameters. All angular frequencies (rad/s).
#[derive(Debug, Clone, Copy)]
pub struct LaserParams {
    pub omega1: f64,
    pub omega2: f64,
    pub delta: f64,
    pub pump_variant: PumpVariant,
}

impl LaserParams {
    pub fn new(omega1: f64, omega2: f64, delta: f64, pump_variant: PumpVariant) -> Result<Self, AtomicError> {
        if omega1 <= 0.0 || omega2 <= 0.0 {
            return Err(AtomicError::InvalidParameter(format!(
                "Rabi frequencies must be positive (omega1 = {omega1}, omega2 = {omega2})"
            )));
        }
        Ok(Self { omega1, omega2, delta, pump_variant })
    }

    pub fn with_variant(self, pump_variant: PumpVariant) -> Self {
        Self { pump_variant, ..self }
    }

    /// Advisory checks; the effective-operator reduction assumes
    /// Ω₂/Ω₁ ≤ 0.025.
    pub fn validity_warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.omega2 / self.omega1 > 0.025 {
            w.push(format!(
                "omega2/omega1 = {:.4} exceeds 0.025; effective operators degrade",
                self.omega2 / self.omega1
            ));
        }
        w
    }
}

/// van der Waals coupling data. `c6` carries rad/s·μm⁶, `r0` μm.
#[derive(Debug, Clone, Copy)]
pub struct VdwParams {
    pub c6: f64,
    pub r0: f64,
    pub urr: f64,
}

impl VdwParams {
    pub fn new(c6: f64, r0: f64) -> Result<Self, AtomicError> {
        if r0 <= 0.0 {
            return Err(AtomicError::InvalidParameter(format!("r0 must be positive, got {r0}")));
        }
        Ok(Self { c6, r0, urr: c6 / r0.powi(6) })
    }

    /// Fixes U_rr and infers the distance, keeping urr = c6/r0⁶ exact.
    pub fn from_urr(c6: f64, urr: f64) -> Result<Self, AtomicError> {
        if urr <= 0.0 || c6 <= 0.0 {
            return Err(AtomicError::InvalidParameter("c6 and urr must be positive".into()));
        }
        Ok(Self { c6, r0: (c6 / urr).powf(1.0 / 6.0), urr })
    }
}

/// Two-photon drive data for the level-reduction of the physical system.
#[derive(Debug, Clone, Copy)]
pub struct TwoPhotonParams {
    pub omega_a: f64,
    pub omega_b: f64,
    pub delta1: f64,
}

impl TwoPhotonParams {
    pub fn validity_warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        for (name, v) in [("omega_a", self.omega_a), ("omega_b", self.omega_b)] {
            if v / self.delta1 > 0.15 {
                w.push(format!("{name}/delta1 = {:.3} too large for adiabatic elimination", v / self.delta1));
            }
        }
        w
    }
}

/// Effective single-photon Rabi frequencies (Ω₁, Ω₂) from the two-photon
/// configuration:
///
/// Ω₁/2 = (2Δ₁+Δ) Ω_a² / (8 Δ₁ (Δ₁+Δ)),  Ω₂/2 = Ω_a Ω_b / (4 Δ₁).
pub fn two_photon_reduce(tp: &TwoPhotonParams, delta: f64) -> (f64, f64) {
    let omega1 = (2.0 * tp.delta1 + delta) * tp.omega_a * tp.omega_a
        / (4.0 * tp.delta1 * (tp.delta1 + delta));
    let omega2 = tp.omega_a * tp.omega_b / (2.0 * tp.delta1);
    (omega1, omega2)
}

/// Labels for the states the protocols are written in terms of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateLabel {
    GhzPlus,
    GhzMinus,
    W0,
    W0Prime,
    W0DoublePrime,
    W1,
    W1Prime,
    W1DoublePrime,
    D0,
    D1,
    /// |ψ₀^i⟩, i ∈ 1..=3.
    Psi0(u8),
    /// |ψ₁^i⟩, i ∈ 1..=3.
    Psi1(u8),
    /// Bare product ket |ijk⟩.
    Ket([Level; N_ATOMS]),
    /// Product over {0,1,r,+,−} local states.
    Product([LocalState; N_ATOMS]),
}

/// A labeled unit vector on the 27-dimensional register.
#[derive(Clone)]
pub struct NamedState {
    pub label: StateLabel,
    pub vector: Vec<Complex64>,
}

fn superpose(terms: &[(f64, [Level; N_ATOMS])]) -> Vec<Complex64> {
    let mut v = vec![Complex64::ZERO; DIM];
    for (amp, levels) in terms {
        v[basis_index(*levels)] += Complex64::new(*amp, 0.0);
    }
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in v.iter_mut() {
        *z /= norm;
    }
    v
}

pub fn named_state(label: StateLabel) -> NamedState {
    use Level::{One as L1, Rydberg as Lr, Zero as L0};
    let vector = match label {
        StateLabel::GhzPlus => superpose(&[(1.0, [L0, L0, L0]), (1.0, [L1, L1, L1])]),
        StateLabel::GhzMinus => superpose(&[(1.0, [L0, L0, L0]), (-1.0, [L1, L1, L1])]),
        StateLabel::W0 => superpose(&[(1.0, [L1, L0, L0]), (1.0, [L0, L1, L0]), (1.0, [L0, L0, L1])]),
        StateLabel::W0Prime => {
            superpose(&[(2.0, [L1, L0, L0]), (-1.0, [L0, L1, L0]), (-1.0, [L0, L0, L1])])
        }
        StateLabel::W0DoublePrime => superpose(&[(1.0, [L0, L1, L0]), (-1.0, [L0, L0, L1])]),
        StateLabel::W1 => superpose(&[(1.0, [L1, L1, L0]), (1.0, [L1, L0, L1]), (1.0, [L0, L1, L1])]),
        StateLabel::W1Prime => {
            superpose(&[(2.0, [L0, L1, L1]), (-1.0, [L1, L0, L1]), (-1.0, [L1, L1, L0])])
        }
        StateLabel::W1DoublePrime => superpose(&[(1.0, [L1, L0, L1]), (-1.0, [L1, L1, L0])]),
        StateLabel::D0 => superpose(&[(1.0, [Lr, L0, L0]), (1.0, [L0, Lr, L0]), (1.0, [L0, L0, Lr])]),
        StateLabel::D1 => superpose(&[(1.0, [Lr, L1, L1]), (1.0, [L1, Lr, L1]), (1.0, [L1, L1, Lr])]),
        StateLabel::Psi0(i) => match i {
            1 => superpose(&[(1.0, [L0, Lr, L1]), (-1.0, [L0, L1, Lr])]),
            2 => superpose(&[(1.0, [Lr, L0, L1]), (-1.0, [L1, L0, Lr])]),
            3 => superpose(&[(1.0, [Lr, L1, L0]), (-1.0, [L1, Lr, L0])]),
            _ => panic!("psi0 index must be 1..=3"),
        },
        StateLabel::Psi1(i) => match i {
            1 => superpose(&[(1.0, [L1, Lr, L0]), (-1.0, [L1, L0, Lr])]),
            2 => superpose(&[(1.0, [Lr, L1, L0]), (-1.0, [L0, L1, Lr])]),
            3 => superpose(&[(1.0, [Lr, L0, L1]), (-1.0, [L0, Lr, L1])]),
            _ => panic!("psi1 index must be 1..=3"),
        },
        StateLabel::Ket(levels) => basis_ket(levels),
        StateLabel::Product(states) => product_ket(states),
    };
    NamedState { label, vector }
}

/// Reference frame for the full Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// Strong-drive terms carry e^{∓iΔt}; no single-atom diagonal.
    Interaction,
    /// Constant diagonal shifts absorb the strong-drive phase. For EP this
    /// removes all time dependence (+Δ on the far-detuned ground level);
    /// for SE the Rydberg level shifts by −Δ and the weak drive oscillates.
    Static,
}

/// The time-independent building blocks of the full Hamiltonian in the
/// interaction picture:
///
/// H(t) = diag + env(t)·(weak + weak†) + strong·e^{−iΔt} + strong†·e^{+iΔt}
///
/// with `weak`/`strong` the lowering-free coupling halves Σ_j (Ω/2)|r⟩⟨g|_j.
#[derive(Clone)]
pub struct FullHamiltonianParts {
    pub diag: Operator,
    pub weak: Operator,
    pub strong: Operator,
    pub delta: f64,
}

impl FullHamiltonianParts {
    /// Instantaneous interaction-frame Hamiltonian.
    pub fn at(&self, t: f64) -> Operator {
        let phase = Complex64::from_polar(1.0, -self.delta * t);
        let s = self.strong.scale(phase);
        self.diag.add(&self.weak).add(&self.weak.dagger()).add(&s).add(&s.dagger())
    }
}

fn coupling_half(levels: &[Level], rabi: f64) -> Operator {
    let mut c = Operator::zeros(DIM);
    for atom in 0..N_ATOMS {
        for &g in levels {
            c = c.add(&transition(atom, Level::Rydberg, g).scale(Complex64::new(rabi / 2.0, 0.0)));
        }
    }
    c
}

/// Interaction-frame pieces of the full (unreduced) Hamiltonian.
pub fn full_hamiltonian_parts(p: &LaserParams, v: &VdwParams) -> FullHamiltonianParts {
    FullHamiltonianParts {
        diag: vdw_interaction(v.urr),
        weak: coupling_half(p.pump_variant.weak_levels(), p.omega2),
        strong: coupling_half(p.pump_variant.strong_levels(), p.omega1),
        delta: p.delta,
    }
}

/// Full 27-dimensional Hamiltonian at time `t` in the requested frame.
pub fn build_full_hamiltonian(p: &LaserParams, v: &VdwParams, frame: Frame, t: f64) -> Operator {
    let parts = full_hamiltonian_parts(p, v);
    match frame {
        Frame::Interaction => parts.at(t),
        Frame::Static => {
            let strong_static = parts.strong.add(&parts.strong.dagger());
            match p.pump_variant {
                PumpVariant::Ep0 | PumpVariant::Ep1 => {
                    // +Δ on the ground level driven by the strong field.
                    let far = p.pump_variant.strong_levels()[0];
                    let shift = level_number(far).scale(Complex64::new(p.delta, 0.0));
                    parts
                        .diag
                        .add(&parts.weak)
                        .add(&parts.weak.dagger())
                        .add(&strong_static)
                        .add(&shift)
                }
                PumpVariant::Se0 | PumpVariant::Se1 | PumpVariant::SePlus => {
                    // Strong drive static, Rydberg level at −Δ, weak drive
                    // oscillating at +Δ. Exactly unitarily equivalent to the
                    // interaction frame; still time-dependent because the two
                    // drives share a transition.
                    let shift = rydberg_number().scale(Complex64::new(-p.delta, 0.0));
                    let wphase = Complex64::from_polar(1.0, p.delta * t);
                    let w = parts.weak.scale(wphase);
                    parts.diag.add(&shift).add(&strong_static).add(&w).add(&w.dagger())
                }
            }
        }
    }
}

/// Effective Hamiltonian coupling half C, so that H_eff = C + C†.
///
/// EP0 couples the separable ground states into the single-excitation sector
/// via |0⟩→|r⟩ with W₀ dark; EP1 is the 0↔1 mirror. SE0/SE1 excite one atom
/// only when the other two occupy the uncoupled level, and SE+ does the same
/// in the ± basis with strength Ω₂/√2.
pub fn effective_coupling_half(p: &LaserParams) -> Operator {
    use LocalState as S;
    let o2 = p.omega2;
    let sqrt3 = 3.0f64.sqrt();
    let mut c = Operator::zeros(DIM);
    let mut add_term = |amp: f64, ket: &[Complex64], bra: &[Complex64]| {
        c = c.add(&Operator::ket_bra(DIM, ket, bra).scale(Complex64::new(amp, 0.0)));
    };
    match p.pump_variant {
        PumpVariant::Ep0 => {
            let d0 = named_state(StateLabel::D0).vector;
            let g000 = product_ket([S::Zero, S::Zero, S::Zero]);
            let w0p = named_state(StateLabel::W0Prime).vector;
            let w0pp = named_state(StateLabel::W0DoublePrime).vector;
            let p1 = named_state(StateLabel::Psi0(1)).vector;
            let p2 = named_state(StateLabel::Psi0(2)).vector;
            let p3 = named_state(StateLabel::Psi0(3)).vector;
            add_term(sqrt3 * o2 / 2.0, &d0, &g000);
            let p23: Vec<Complex64> = p2.iter().zip(&p3).map(|(a, b)| a + b).collect();
            add_term(-sqrt3 * o2 / 4.0, &p23, &w0p);
            let comb: Vec<Complex64> = p1
                .iter()
                .zip(p2.iter().zip(&p3))
                .map(|(a, (b, c))| Complex64::new(2.0, 0.0) * a + b - c)
                .collect();
            add_term(-o2 / 4.0, &comb, &w0pp);
        }
        PumpVariant::Ep1 => {
            let d1 = named_state(StateLabel::D1).vector;
            let g111 = product_ket([S::One, S::One, S::One]);
            let w1p = named_state(StateLabel::W1Prime).vector;
            let w1pp = named_state(StateLabel::W1DoublePrime).vector;
            let p1 = named_state(StateLabel::Psi1(1)).vector;
            let p2 = named_state(StateLabel::Psi1(2)).vector;
            let p3 = named_state(StateLabel::Psi1(3)).vector;
            add_term(sqrt3 * o2 / 2.0, &d1, &g111);
            let p23: Vec<Complex64> = p2.iter().zip(&p3).map(|(a, b)| a + b).collect();
            add_term(-sqrt3 * o2 / 4.0, &p23, &w1p);
            let comb: Vec<Complex64> = p1
                .iter()
                .zip(p2.iter().zip(&p3))
                .map(|(a, (b, c))| Complex64::new(2.0, 0.0) * a + b - c)
                .collect();
            add_term(-o2 / 4.0, &comb, &w1pp);
        }
        PumpVariant::Se0 => {
            for (ket, bra) in [
                ([S::Rydberg, S::One, S::One], [S::Zero, S::One, S::One]),
                ([S::One, S::Rydberg, S::One], [S::One, S::Zero, S::One]),
                ([S::One, S::One, S::Rydberg], [S::One, S::One, S::Zero]),
            ] {
                add_term(o2 / 2.0, &product_ket(ket), &product_ket(bra));
            }
        }
        PumpVariant::Se1 => {
            for (ket, bra) in [
                ([S::Rydberg, S::Zero, S::Zero], [S::One, S::Zero, S::Zero]),
                ([S::Zero, S::Rydberg, S::Zero], [S::Zero, S::One, S::Zero]),
                ([S::Zero, S::Zero, S::Rydberg], [S::Zero, S::Zero, S::One]),
            ] {
                add_term(o2 / 2.0, &product_ket(ket), &product_ket(bra));
            }
        }
        PumpVariant::SePlus => {
            for (ket, bra) in [
                ([S::Rydberg, S::Minus, S::Minus], [S::Plus, S::Minus, S::Minus]),
                ([S::Minus, S::Rydberg, S::Minus], [S::Minus, S::Plus, S::Minus]),
                ([S::Minus, S::Minus, S::Rydberg], [S::Minus, S::Minus, S::Plus]),
            ] {
                add_term(o2 / SQRT2, &product_ket(ket), &product_ket(bra));
            }
        }
    }
    c
}

/// Effective Hamiltonian for the configured pump variant.
pub fn build_effective_hamiltonian(p: &LaserParams) -> Operator {
    let c = effective_coupling_half(p);
    c.add(&c.dagger())
}

/// Strong/weak split of the rotated full Hamiltonian at the vdW resonance
/// U_rr = Δ. `strong` keeps the transitions that the blockade shift makes
/// resonant (exactly one other atom excited); `weak` keeps the resonant weak
/// drive acting when both other atoms are in the ground manifold. Everything
/// else oscillates and is available from [`offresonant_hamiltonian`].
pub fn zeno_split(p: &LaserParams) -> (Operator, Operator) {
    let mut strong = Operator::zeros(DIM);
    let mut weak = Operator::zeros(DIM);
    let grounds = [Level::Zero, Level::One];
    for atom in 0..N_ATOMS {
        let a1 = (atom + 1) % N_ATOMS;
        let a2 = (atom + 2) % N_ATOMS;
        // one other atom in |r⟩, the remaining one in a ground level
        let mut one_r = Operator::zeros(DIM);
        for g in grounds {
            one_r = one_r
                .add(&projector(a1, Level::Rydberg).mul(&projector(a2, g)))
                .add(&projector(a1, g).mul(&projector(a2, Level::Rydberg)));
        }
        // both other atoms in the ground manifold
        let mut both_ground = Operator::zeros(DIM);
        for g1 in grounds {
            for g2 in grounds {
                both_ground = both_ground.add(&projector(a1, g1).mul(&projector(a2, g2)));
            }
        }
        for &g in p.pump_variant.strong_levels() {
            let term = transition(atom, Level::Rydberg, g)
                .mul(&one_r)
                .scale(Complex64::new(p.omega1 / 2.0, 0.0));
            strong = strong.add(&term).add(&term.dagger());
        }
        for &g in p.pump_variant.weak_levels() {
            let term = transition(atom, Level::Rydberg, g)
                .mul(&both_ground)
                .scale(Complex64::new(p.omega2 / 2.0, 0.0));
            weak = weak.add(&term).add(&term.dagger());
        }
    }
    (strong, weak)
}

/// The oscillating remainder of the rotated full Hamiltonian (the part the
/// effective treatment drops). Retained behind a flag for error-budget runs.
pub fn offresonant_hamiltonian(p: &LaserParams, t: f64) -> Operator {
    let grounds = [Level::Zero, Level::One];
    let mut h = Operator::zeros(DIM);
    let e_m = Complex64::from_polar(1.0, -p.delta * t);
    let e_p = Complex64::from_polar(1.0, p.delta * t);
    let e_2p = Complex64::from_polar(1.0, 2.0 * p.delta * t);
    for atom in 0..N_ATOMS {
        let a1 = (atom + 1) % N_ATOMS;
        let a2 = (atom + 2) % N_ATOMS;
        let mut both_ground = Operator::zeros(DIM);
        for g1 in grounds {
            for g2 in grounds {
                both_ground = both_ground.add(&projector(a1, g1).mul(&projector(a2, g2)));
            }
        }
        let mut one_r = Operator::zeros(DIM);
        for g in grounds {
            one_r = one_r
                .add(&projector(a1, Level::Rydberg).mul(&projector(a2, g)))
                .add(&projector(a1, g).mul(&projector(a2, Level::Rydberg)));
        }
        let both_r = projector(a1, Level::Rydberg).mul(&projector(a2, Level::Rydberg));
        for &g in p.pump_variant.strong_levels() {
            let sig = transition(atom, Level::Rydberg, g);
            let t1 = sig.mul(&both_ground).scale(Complex64::new(p.omega1 / 2.0, 0.0) * e_m);
            let t2 = sig.mul(&both_r).scale(Complex64::new(p.omega1 / 2.0, 0.0) * e_p);
            h = h.add(&t1).add(&t1.dagger()).add(&t2).add(&t2.dagger());
        }
        for &g in p.pump_variant.weak_levels() {
            let sig = transition(atom, Level::Rydberg, g);
            let t1 = sig.mul(&one_r).scale(Complex64::new(p.omega2 / 2.0, 0.0) * e_p);
            let t2 = sig.mul(&both_r).scale(Complex64::new(p.omega2 / 2.0, 0.0) * e_2p);
            h = h.add(&t1).add(&t1.dagger()).add(&t2).add(&t2.dagger());
        }
    }
    h
}

/// Blockade-structured static Hamiltonian: the production "full" model.
///
/// The strong drive acts only on its blockade-resonant configurations
/// (exactly one other atom excited), the weak drive only where it is
/// resonant (both other atoms in the ground manifold), and a sector
/// diagonal carries the blockade mismatch: a basis state with k Rydberg
/// excitations sits at U_rr·k(k−1)/2 − Δ·(k−1) for k ≥ 1. At U_rr = Δ the
/// doubly-excited sector is degenerate with the singles and the model
/// reduces to the resonant rotated-frame Hamiltonian; away from it the
/// mismatch detunes the protective strong coupling. Off-resonant Stark
/// shifts are taken as externally compensated and are not included; the
/// uncompensated physics is available from the interaction-frame builder.
pub fn structured_full_hamiltonian(p: &LaserParams, urr: f64) -> Operator {
    let (strong, weak) = zeno_split(p);
    let mut h = strong.add(&weak);
    for idx in 0..DIM {
        let k = (idx / 9 == 2) as usize + (idx / 3 % 3 == 2) as usize + (idx % 3 == 2) as usize;
        if k >= 1 {
            let pairs = (k * (k - 1) / 2) as f64;
            let energy = urr * pairs - p.delta * (k as f64 - 1.0);
            let cur = h.get(idx, idx);
            h.set(idx, idx, cur + Complex64::new(energy, 0.0));
        }
    }
    h
}

/// Rotated-frame Hamiltonian used for the Zeno validation: strong + weak
/// resonant parts, plus the oscillating remainder when `retain_offresonant`.
pub fn zeno_frame_hamiltonian(p: &LaserParams, retain_offresonant: bool, t: f64) -> Operator {
    let (strong, weak) = zeno_split(p);
    let mut h = strong.add(&weak);
    if retain_offresonant {
        h = h.add(&offresonant_hamiltonian(p, t));
    }
    h
}

/// P₀ h_weak P₀ with P₀ the projector onto the null space of `h_strong`
/// (eigenvalues |ε| < 1e−9·‖h_strong‖).
pub fn zeno_project(h_strong: &Operator, h_weak: &Operator) -> Result<Operator, AtomicError> {
    if h_strong.dim() != h_weak.dim() {
        return Err(AtomicError::InvalidParameter("zeno_project: dimension mismatch".into()));
    }
    h_strong.assert_hermitian()?;
    h_weak.assert_hermitian()?;
    if h_strong.max_abs() == 0.0 {
        return Ok(h_weak.clone());
    }
    let dim = h_strong.dim();
    let (vals, vecs) = h_strong.herm_eig()?;
    let spectral = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-9 * spectral;
    let null_cols: Vec<usize> = (0..dim).filter(|&k| vals[k].abs() < tol).collect();
    if null_cols.is_empty() {
        return Err(AtomicError::EmptyNullSpace);
    }
    let mut p0 = Operator::zeros(dim);
    for &k in &null_cols {
        let col: Vec<Complex64> = (0..dim).map(|i| vecs[(i, k)]).collect();
        p0 = p0.add(&Operator::ket_bra(dim, &col, &col));
    }
    Ok(p0.mul(h_weak).mul(&p0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;

    fn overlap(a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
    }

    fn fig3_laser(variant: PumpVariant) -> LaserParams {
        let tau = 2.0 * std::f64::consts::PI;
        LaserParams::new(tau * 4.0e6, tau * 0.04e6, tau * 200.0e6, variant).unwrap()
    }

    #[test]
    fn named_states_are_unit_and_orthogonal() {
        use StateLabel::*;
        let family = [W0, W0Prime, W0DoublePrime, W1, W1Prime, W1DoublePrime, GhzPlus, GhzMinus];
        for (i, la) in family.iter().enumerate() {
            let a = named_state(*la).vector;
            assert!((overlap(&a, &a).re - 1.0).abs() < 1e-14);
            for lb in family.iter().skip(i + 1) {
                let b = named_state(*lb).vector;
                assert!(overlap(&a, &b).norm() < 1e-14, "{la:?} vs {lb:?}");
            }
        }
    }

    #[test]
    fn ghz_minus_components() {
        let g = named_state(StateLabel::GhzMinus).vector;
        let s = 1.0 / 2f64.sqrt();
        let i000 = basis_index([Level::Zero; 3]);
        let i111 = basis_index([Level::One; 3]);
        assert!((g[i000].re - s).abs() < 1e-15);
        assert!((g[i111].re + s).abs() < 1e-15);
    }

    #[test]
    fn ghz_states_in_pm_basis() {
        use LocalState::{Minus as M, Plus as P};
        // GHZ+ = (|+++> + |+--> + |-+-> + |--+>)/2
        let gp = named_state(StateLabel::GhzPlus).vector;
        for combo in [[P, P, P], [P, M, M], [M, P, M], [M, M, P]] {
            let k = product_ket(combo);
            assert!((overlap(&k, &gp).re - 0.5).abs() < 1e-14, "{combo:?}");
        }
        // GHZ- = (|---> + |++-> + |+-+> + |-++>)/2
        let gm = named_state(StateLabel::GhzMinus).vector;
        for combo in [[M, M, M], [P, P, M], [P, M, P], [M, P, P]] {
            let k = product_ket(combo);
            assert!((overlap(&k, &gm).re - 0.5).abs() < 1e-14, "{combo:?}");
        }
    }

    #[test]
    fn ep0_matrix_element_and_dark_state() {
        let p = fig3_laser(PumpVariant::Ep0);
        let h = build_effective_hamiltonian(&p);
        h.assert_hermitian().unwrap();
        let d0 = named_state(StateLabel::D0).vector;
        let k000 = named_state(StateLabel::Ket([Level::Zero; 3])).vector;
        let elem = h.matrix_element(&d0, &k000);
        let expected = 3f64.sqrt() * p.omega2 / 2.0;
        assert!((elem.re - expected).abs() < 1e-6 * expected);
        assert!(elem.im.abs() < 1e-9);

        // W0 is dark
        let w0 = named_state(StateLabel::W0).vector;
        let hw0 = h.apply(&w0);
        let norm: f64 = hw0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(norm < 1e-12 * h.max_abs());
    }

    #[test]
    fn ep0_protects_two_or_more_ones() {
        let p = fig3_laser(PumpVariant::Ep0);
        let h = build_effective_hamiltonian(&p);
        use Level::{One as L1, Rydberg as _, Zero as L0};
        for levels in [[L0, L1, L1], [L1, L0, L1], [L1, L1, L0], [L1, L1, L1]] {
            let k = named_state(StateLabel::Ket(levels)).vector;
            let hk = h.apply(&k);
            let norm: f64 = hk.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(norm < 1e-12 * h.max_abs(), "{levels:?}");
        }
    }

    #[test]
    fn dark_states_of_all_variants() {
        let checks = [
            (PumpVariant::Ep0, StateLabel::W0),
            (PumpVariant::Ep1, StateLabel::W1),
            (PumpVariant::Se0, StateLabel::W0),
            (PumpVariant::SePlus, StateLabel::GhzMinus),
        ];
        for (variant, label) in checks {
            let p = fig3_laser(variant);
            let h = build_effective_hamiltonian(&p);
            let v = named_state(label).vector;
            let hv = h.apply(&v);
            let norm: f64 = hv.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(norm < 1e-12 * h.max_abs(), "{variant:?} should annihilate {label:?}");
        }
    }

    #[test]
    fn effective_hamiltonians_stay_in_single_excitation_sector() {
        for variant in [
            PumpVariant::Ep0,
            PumpVariant::Ep1,
            PumpVariant::Se0,
            PumpVariant::Se1,
            PumpVariant::SePlus,
        ] {
            let p = fig3_laser(variant);
            let h = build_effective_hamiltonian(&p);
            // no matrix element may connect anything to >= 2 Rydberg states
            for i in 0..DIM {
                let ri = (i / 9 == 2) as usize + (i / 3 % 3 == 2) as usize + (i % 3 == 2) as usize;
                for j in 0..DIM {
                    let rj = (j / 9 == 2) as usize + (j / 3 % 3 == 2) as usize + (j % 3 == 2) as usize;
                    if ri >= 2 || rj >= 2 {
                        assert_eq!(h.get(i, j), ZERO, "({i},{j})");
                    }
                }
            }
        }
    }

    #[test]
    fn full_hamiltonian_hermitian_at_random_times() {
        let v = VdwParams::from_urr(2.0 * std::f64::consts::PI * 4161.55e9, 2.0 * std::f64::consts::PI * 200.0e6).unwrap();
        for variant in [PumpVariant::Ep0, PumpVariant::Se0, PumpVariant::SePlus] {
            let p = fig3_laser(variant);
            for &t in &[0.0, 1.3e-9, 0.7e-6, 3.1e-6] {
                for frame in [Frame::Interaction, Frame::Static] {
                    let h = build_full_hamiltonian(&p, &v, frame, t);
                    assert!(h.hermiticity_defect() < 1e-12 * h.max_abs(), "{variant:?} {frame:?} t={t}");
                }
            }
        }
    }

    #[test]
    fn full_hamiltonian_ep0_structure_at_t0() {
        let tau = 2.0 * std::f64::consts::PI;
        let p = fig3_laser(PumpVariant::Ep0);
        let v = VdwParams::from_urr(tau * 4161.55e9, tau * 200.0e6).unwrap();
        let h = build_full_hamiltonian(&p, &v, Frame::Interaction, 0.0);
        use Level::{One as L1, Rydberg as Lr, Zero as L0};
        // Ω₁/2 on |r⟩⟨1| pairs
        let i_r11 = basis_index([Lr, L1, L1]);
        let i_111 = basis_index([L1, L1, L1]);
        assert!((h.get(i_r11, i_111) - Complex64::new(p.omega1 / 2.0, 0.0)).norm() < 1e-9);
        // Ω₂/2 on |r⟩⟨0| pairs
        let i_r00 = basis_index([Lr, L0, L0]);
        let i_000 = basis_index([L0, L0, L0]);
        assert!((h.get(i_r00, i_000) - Complex64::new(p.omega2 / 2.0, 0.0)).norm() < 1e-9);
        // U_rr on doubly-Rydberg diagonal
        let i_rr0 = basis_index([Lr, Lr, L0]);
        assert!((h.get(i_rr0, i_rr0).re - v.urr).abs() < 1e-6);
        let i_rrr = basis_index([Lr, Lr, Lr]);
        assert!((h.get(i_rrr, i_rrr).re - 3.0 * v.urr).abs() < 1e-6);
    }

    #[test]
    fn zeno_projection_reproduces_ep0() {
        let p = fig3_laser(PumpVariant::Ep0);
        let (strong, weak) = zeno_split(&p);
        let projected = zeno_project(&strong, &weak).unwrap();
        let effective = build_effective_hamiltonian(&p);
        let err = projected.sub(&effective).max_abs();
        assert!(err < 1e-10 * effective.max_abs().max(1.0), "err = {err:.3e}");
    }

    #[test]
    fn zeno_projection_reproduces_se0() {
        let p = fig3_laser(PumpVariant::Se0);
        let (strong, weak) = zeno_split(&p);
        let projected = zeno_project(&strong, &weak).unwrap();
        let effective = build_effective_hamiltonian(&p);
        let err = projected.sub(&effective).max_abs();
        assert!(err < 1e-10 * effective.max_abs().max(1.0), "err = {err:.3e}");
    }

    #[test]
    fn zeno_project_with_zero_strong_part_returns_weak() {
        let p = fig3_laser(PumpVariant::Ep0);
        let (_, weak) = zeno_split(&p);
        let zero = Operator::zeros(DIM);
        let out = zeno_project(&zero, &weak).unwrap();
        assert!(out.sub(&weak).max_abs() == 0.0);
    }

    #[test]
    fn two_photon_reduce_reproduces_paper_parameters() {
        let tau = 2.0 * std::f64::consts::PI;
        let tp = TwoPhotonParams {
            omega_a: tau * 93.42e6,
            omega_b: tau * 0.856e6,
            delta1: tau * 1000.0e6,
        };
        let delta = tau * 200.0e6;
        let (o1, o2) = two_photon_reduce(&tp, delta);
        let o1_target = tau * 4.0e6;
        let o2_target = tau * 0.04e6;
        assert!((o1 - o1_target).abs() / o1_target < 0.005, "omega1 = {}", o1 / tau / 1e6);
        assert!((o2 - o2_target).abs() / o2_target < 0.005, "omega2 = {}", o2 / tau / 1e6);
        assert!(tp.validity_warnings().is_empty());
    }

    #[test]
    fn two_photon_reduce_zero_drive() {
        let tp = TwoPhotonParams { omega_a: 0.0, omega_b: 0.0, delta1: 1.0e9 };
        let (o1, o2) = two_photon_reduce(&tp, 1.0e8);
        assert_eq!(o1, 0.0);
        assert_eq!(o2, 0.0);
    }

    #[test]
    fn vdw_params_consistency() {
        let tau = 2.0 * std::f64::consts::PI;
        let v = VdwParams::new(tau * 4161.55e9, 5.2445).unwrap();
        let urr_expected = tau * 200.0e6;
        assert!((v.urr - urr_expected).abs() / urr_expected < 1e-3);
        let v2 = VdwParams::from_urr(tau * 4161.55e9, urr_expected).unwrap();
        assert!((v2.r0 - 5.2445).abs() < 1e-3);
        assert!((v2.urr - v2.c6 / v2.r0.powi(6)).abs() / v2.urr < 1e-9);
    }

    #[test]
    fn laser_params_warn_only_above_ratio() {
        let tau = 2.0 * std::f64::consts::PI;
        let ok = LaserParams::new(tau * 4.0e6, tau * 0.04e6, tau * 200.0e6, PumpVariant::Ep0).unwrap();
        assert!(ok.validity_warnings().is_empty());
        let marginal = LaserParams::new(tau * 4.0e6, tau * 0.32e6, tau * 200.0e6, PumpVariant::Ep0).unwrap();
        assert_eq!(marginal.validity_warnings().len(), 1);
        assert!(LaserParams::new(0.0, 1.0, 1.0, PumpVariant::Ep0).is_err());
    }
}
