//! Statevector simulation of probe-plus-system circuits.
//!
//! The combined register puts the probe on wire 0 and system qubit `k` on
//! wire `k + 1`. Wire `q` is bit `q` of the basis index. Gates are Pauli
//! exponentials `exp(-i theta/2 P)` supported on one or two wires, which is
//! exactly the set needed by the product-formula circuits built here.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::Spectrum;
use crate::pauli::{PauliHamiltonian, PauliOp, PauliString};

/// Product-formula order for a single time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrotterOrder {
    First,
    Second,
}

/// `exp(-i theta/2 P)` for a Pauli `P` on one or two wires.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    theta: f64,
    support: Vec<(usize, PauliOp)>,
}

impl Gate {
    pub fn pauli_exp(support: Vec<(usize, PauliOp)>, theta: f64) -> Result<Self> {
        if support.is_empty() || support.len() > 2 {
            return Err(Error::InvalidCircuit(format!(
                "gates act on one or two wires, got {}",
                support.len()
            )));
        }
        if support.iter().any(|(_, p)| *p == PauliOp::I) {
            return Err(Error::InvalidCircuit("gate support lists identity factors".into()));
        }
        if support.len() == 2 && support[0].0 == support[1].0 {
            return Err(Error::InvalidCircuit("two-wire gate repeats a wire".into()));
        }
        Ok(Gate { theta, support })
    }

    pub fn rx(wire: usize, theta: f64) -> Self {
        Gate { theta, support: vec![(wire, PauliOp::X)] }
    }

    pub fn ry(wire: usize, theta: f64) -> Self {
        Gate { theta, support: vec![(wire, PauliOp::Y)] }
    }

    pub fn rz(wire: usize, theta: f64) -> Self {
        Gate { theta, support: vec![(wire, PauliOp::Z)] }
    }

    pub fn rxx(w1: usize, w2: usize, theta: f64) -> Self {
        Gate { theta, support: vec![(w1, PauliOp::X), (w2, PauliOp::X)] }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn support(&self) -> &[(usize, PauliOp)] {
        &self.support
    }

    pub fn is_two_wire(&self) -> bool {
        self.support.len() == 2
    }

    pub fn max_wire(&self) -> usize {
        self.support.iter().map(|(w, _)| *w).max().unwrap_or(0)
    }

    fn masks(&self) -> (usize, usize, u32) {
        let mut flip = 0usize;
        let mut phase = 0usize;
        let mut y_count = 0u32;
        for &(w, p) in &self.support {
            match p {
                PauliOp::I => {}
                PauliOp::X => flip |= 1 << w,
                PauliOp::Y => {
                    flip |= 1 << w;
                    phase |= 1 << w;
                    y_count += 1;
                }
                PauliOp::Z => phase |= 1 << w,
            }
        }
        (flip, phase, y_count)
    }
}

/// Provenance of a resonance circuit: the drive settings it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceMeta {
    pub omega: f64,
    pub coupling: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub total_time: f64,
    pub order: TrotterOrder,
    pub probed: usize,
}

/// An ordered gate list on a fixed register.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    pub meta: Option<ResonanceMeta>,
}

impl Circuit {
    pub fn new(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        for g in &gates {
            if g.max_wire() >= n_qubits {
                return Err(Error::InvalidCircuit(format!(
                    "gate touches wire {} on a {}-wire register",
                    g.max_wire(),
                    n_qubits
                )));
            }
        }
        Ok(Circuit { n_qubits, gates, meta: None })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }
}

/// Splits a total evolution time into steps: `n = round(t / dt)` (at least
/// one step), with the step length readjusted to `t / n` so the steps cover
/// `t` exactly.
pub fn steps_for(total_time: f64, dt: f64) -> Result<(usize, f64)> {
    if !(total_time > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time and step must be positive, got t={total_time}, dt={dt}"
        )));
    }
    let n = (total_time / dt).round().max(1.0) as usize;
    Ok((n, total_time / n as f64))
}

/// Resonance Hamiltonian on the combined register:
/// `-omega/2 Z_0 + c X_0 X_probed + H_system`, with the system embedded on
/// wires 1..=n.
pub fn resonance_hamiltonian(
    system: &PauliHamiltonian,
    omega: f64,
    coupling: f64,
    probed: usize,
) -> Result<PauliHamiltonian> {
    let n = system.n_qubits();
    check_probed(probed, n)?;
    let full = n + 1;
    let mut terms = vec![
        (-omega / 2.0, PauliString::single(full, 0, PauliOp::Z)),
        (coupling, PauliString::pair(full, 0, PauliOp::X, probed, PauliOp::X)),
    ];
    for (c, s) in system.terms() {
        terms.push((*c, s.embed(1, full)));
    }
    PauliHamiltonian::new(full, terms)
}

fn check_probed(probed: usize, n: usize) -> Result<()> {
    if probed == 0 || probed > n {
        return Err(Error::InvalidCircuit(format!(
            "probed wire {probed} outside the system range 1..={n}"
        )));
    }
    Ok(())
}

/// Builds the Trotterized resonance circuit.
///
/// Each first-order step applies, in time order, one exponential per system
/// term (`theta = 2 c_k dt`), then the probe rotation `R^z_0(-omega dt)`,
/// then the coupling `R^xx_{0,probed}(2 c dt)`. A second-order step runs the
/// same sequence at half angle followed by its reverse at half angle, probe
/// terms included in the split.
pub fn build_resonance_circuit(
    system: &PauliHamiltonian,
    omega: f64,
    coupling: f64,
    dt: f64,
    n_steps: usize,
    order: TrotterOrder,
    probed: usize,
) -> Result<Circuit> {
    let n = system.n_qubits();
    check_probed(probed, n)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidCircuit(format!("step length must be positive, got {dt}")));
    }
    if n_steps == 0 {
        return Err(Error::InvalidCircuit("need at least one step".into()));
    }

    let mut sequence: Vec<(Vec<(usize, PauliOp)>, f64)> = Vec::new();
    for (c, s) in system.terms() {
        let support: Vec<(usize, PauliOp)> =
            s.support().into_iter().map(|(k, p)| (k + 1, p)).collect();
        match support.len() {
            0 => continue, // identity term: a global phase, nothing to apply
            1 | 2 => sequence.push((support, 2.0 * c * dt)),
            w => {
                return Err(Error::InvalidCircuit(format!(
                    "term {} has weight {w}; only weight-1 and weight-2 terms are supported",
                    s.label()
                )))
            }
        }
    }
    sequence.push((vec![(0, PauliOp::Z)], -omega * dt));
    sequence.push((vec![(0, PauliOp::X), (probed, PauliOp::X)], 2.0 * coupling * dt));

    let step: Vec<Gate> = match order {
        TrotterOrder::First => sequence
            .iter()
            .map(|(s, theta)| Gate::pauli_exp(s.clone(), *theta))
            .collect::<Result<_>>()?,
        TrotterOrder::Second => {
            let half: Vec<Gate> = sequence
                .iter()
                .map(|(s, theta)| Gate::pauli_exp(s.clone(), theta / 2.0))
                .collect::<Result<_>>()?;
            let mut both = half.clone();
            both.extend(half.into_iter().rev());
            both
        }
    };

    let mut gates = Vec::with_capacity(step.len() * n_steps);
    for _ in 0..n_steps {
        gates.extend(step.iter().cloned());
    }

    let mut circuit = Circuit::new(n + 1, gates)?;
    circuit.meta = Some(ResonanceMeta {
        omega,
        coupling,
        dt,
        n_steps,
        total_time: dt * n_steps as f64,
        order,
        probed,
    });
    Ok(circuit)
}

/// Normalized complex amplitudes over `2^n` basis states, bit `q` of the
/// index being wire `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>`.
    pub fn zero_state(n_qubits: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        StateVector { n_qubits, amps }
    }

    /// Computational basis state `|index>`.
    pub fn basis_state(n_qubits: usize, index: usize) -> Result<Self> {
        if index >= 1 << n_qubits {
            return Err(Error::InvalidState(format!(
                "basis index {index} outside a {n_qubits}-qubit register"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amps })
    }

    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 1 << n_qubits {
            return Err(Error::InvalidState(format!(
                "{} amplitudes for a {}-qubit register",
                amps.len(),
                n_qubits
            )));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidState(format!("state norm^2 = {norm}, expected 1")));
        }
        Ok(StateVector { n_qubits, amps })
    }

    /// Attaches a probe in `|0>` on wire 0 below a system state.
    pub fn with_probe_ground(system: &StateVector) -> Self {
        let n = system.n_qubits + 1;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        for (s, a) in system.amps.iter().enumerate() {
            amps[s << 1] = *a;
        }
        StateVector { n_qubits: n, amps }
    }

    /// System eigenstate `k` of a diagonalized Hamiltonian.
    pub fn from_eigenstate(spectrum: &Spectrum, k: usize) -> Result<Self> {
        if k >= spectrum.len() {
            return Err(Error::InvalidState(format!(
                "eigenstate index {k} outside spectrum of {} levels",
                spectrum.len()
            )));
        }
        let amps: Vec<Complex64> = spectrum.state(k).iter().copied().collect();
        StateVector::from_amplitudes(spectrum.n_qubits(), amps)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn apply_gate(&mut self, gate: &Gate) {
        let (flip, phase_mask, y_count) = gate.masks();
        let half = gate.theta / 2.0;
        let (cos, sin) = (half.cos(), half.sin());
        let y_phase = Complex64::i().powu(y_count);
        let m_i_sin = Complex64::new(0.0, -sin);

        let pauli_phase = |b: usize| -> Complex64 {
            let sign = if (b & phase_mask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            y_phase * sign
        };

        if flip == 0 {
            for (b, a) in self.amps.iter_mut().enumerate() {
                *a *= Complex64::new(cos, 0.0) + m_i_sin * pauli_phase(b);
            }
        } else {
            for b in 0..self.amps.len() {
                let partner = b ^ flip;
                if b < partner {
                    let (ab, ap) = (self.amps[b], self.amps[partner]);
                    self.amps[b] = cos * ab + m_i_sin * pauli_phase(partner) * ap;
                    self.amps[partner] = cos * ap + m_i_sin * pauli_phase(b) * ab;
                }
            }
        }
    }

    /// Applies a bare Pauli (no rotation) to the state: `psi -> P psi`.
    fn apply_pauli(&mut self, wires: &[(usize, PauliOp)]) {
        let mut flip = 0usize;
        let mut phase_mask = 0usize;
        let mut y_count = 0u32;
        for &(w, p) in wires {
            match p {
                PauliOp::I => {}
                PauliOp::X => flip |= 1 << w,
                PauliOp::Y => {
                    flip |= 1 << w;
                    phase_mask |= 1 << w;
                    y_count += 1;
                }
                PauliOp::Z => phase_mask |= 1 << w,
            }
        }
        let y_phase = Complex64::i().powu(y_count);
        let old = self.amps.clone();
        for b in 0..self.amps.len() {
            let src = b ^ flip;
            let sign = if (src & phase_mask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            self.amps[b] = y_phase * sign * old[src];
        }
    }
}

/// Runs a circuit on a state, returning the evolved state.
pub fn apply(circuit: &Circuit, state: &StateVector) -> Result<StateVector> {
    if circuit.n_qubits() != state.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: circuit.n_qubits(),
            got: state.n_qubits(),
        });
    }
    let mut out = state.clone();
    for gate in circuit.gates() {
        out.apply_gate(gate);
    }
    Ok(out)
}

/// Exact expectation of Z on one wire.
pub fn expectation_z(state: &StateVector, wire: usize) -> f64 {
    assert!(wire < state.n_qubits(), "wire {wire} out of range");
    let mask = 1usize << wire;
    state
        .amps
        .iter()
        .enumerate()
        .map(|(b, a)| if b & mask == 0 { a.norm_sqr() } else { -a.norm_sqr() })
        .sum()
}

/// Finite-shot estimate of `<Z_wire>`: draws `shots` single-qubit outcomes
/// from the exact marginal and returns `(n0 - n1) / shots`. Deterministic
/// for a fixed seed.
pub fn sample_z(state: &StateVector, wire: usize, shots: u64, seed: u64) -> f64 {
    assert!(shots >= 1, "need at least one shot");
    assert!(wire < state.n_qubits(), "wire {wire} out of range");
    let mask = 1usize << wire;
    let p1: f64 = state
        .amps
        .iter()
        .enumerate()
        .filter(|(b, _)| b & mask != 0)
        .map(|(_, a)| a.norm_sqr())
        .sum();
    let p1 = p1.clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n1 = Binomial::new(shots, p1).expect("probability in range").sample(&mut rng);
    (shots as f64 - 2.0 * n1 as f64) / shots as f64
}

/// Evolves a state by `exp(-i H t)` for an explicit dense Hermitian `H`.
pub fn evolve_exact(
    h_dense: &nalgebra::DMatrix<Complex64>,
    t: f64,
    state: &StateVector,
) -> Result<StateVector> {
    let dim = state.amps.len();
    if h_dense.nrows() != dim || h_dense.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: state.n_qubits(),
            got: h_dense.nrows().trailing_zeros() as usize,
        });
    }
    let spectrum = crate::exact::spectrum_of_dense(h_dense, state.n_qubits())?;
    let v = spectrum.states();
    let psi = nalgebra::DVector::from_column_slice(&state.amps);
    let mut coeffs = v.adjoint() * psi;
    for (k, c) in coeffs.iter_mut().enumerate() {
        let phase = -spectrum.energies()[k] * t;
        *c *= Complex64::new(phase.cos(), phase.sin());
    }
    let out = v * coeffs;
    Ok(StateVector { n_qubits: state.n_qubits, amps: out.iter().copied().collect() })
}

/// Runs a circuit under stochastic two-qubit depolarizing noise and returns
/// the probe `<Z_0>` averaged over trajectories.
///
/// After every two-wire gate, with probability `p_depol` a uniformly drawn
/// non-identity two-qubit Pauli is applied to the gate's wires. `p_depol = 0`
/// reproduces the noiseless expectation exactly; trajectories are seeded
/// deterministically from `seed`.
pub fn noisy_apply(
    circuit: &Circuit,
    state: &StateVector,
    p_depol: f64,
    seed: u64,
    trajectories: usize,
) -> Result<f64> {
    if circuit.n_qubits() != state.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: circuit.n_qubits(),
            got: state.n_qubits(),
        });
    }
    if !(0.0..=1.0).contains(&p_depol) {
        return Err(Error::InvalidArgument(format!(
            "depolarizing probability {p_depol} outside [0, 1]"
        )));
    }
    if trajectories == 0 {
        return Err(Error::InvalidArgument("need at least one trajectory".into()));
    }
    if p_depol == 0.0 {
        let out = apply(circuit, state)?;
        return Ok(expectation_z(&out, 0));
    }

    let mut total = 0.0;
    for traj in 0..trajectories {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, traj as u64));
        let mut psi = state.clone();
        for gate in circuit.gates() {
            psi.apply_gate(gate);
            if gate.is_two_wire() && rng.gen::<f64>() < p_depol {
                let (w1, w2) = (gate.support[0].0, gate.support[1].0);
                let idx = rng.gen_range(1..16u8);
                let paulis = [PauliOp::I, PauliOp::X, PauliOp::Y, PauliOp::Z];
                let error = [
                    (w1, paulis[(idx & 0b11) as usize]),
                    (w2, paulis[(idx >> 2) as usize]),
                ];
                let error: Vec<(usize, PauliOp)> =
                    error.iter().copied().filter(|(_, p)| *p != PauliOp::I).collect();
                psi.apply_pauli(&error);
            }
        }
        total += expectation_z(&psi, 0);
    }
    Ok(total / trajectories as f64)
}

/// Derives per-index stream seeds from a base seed, so parallel work items
/// are reproducible independent of scheduling.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    // SplitMix64 step on base + golden-ratio stride.
    let mut s = base.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    s = (s ^ (s >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    s = (s ^ (s >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    s ^ (s >> 31)
}
