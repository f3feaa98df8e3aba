//! Pauli strings, Hamiltonians built from them, and the two model families
//! used throughout the crate: a single-spin avoided crossing and an open
//! interacting Kitaev chain written in spin variables.
//!
//! System qubits are indexed 0..n-1 inside a [`PauliString`]. When a probe
//! qubit is attached (see [`crate::sim`]), system qubit `k` sits on wire
//! `k + 1` of the combined register and public APIs that talk about wires use
//! that 1-based convention.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{Error, Result};

/// Single-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PauliOp {
    I,
    X,
    Y,
    Z,
}

impl PauliOp {
    pub fn label(self) -> char {
        match self {
            PauliOp::I => 'I',
            PauliOp::X => 'X',
            PauliOp::Y => 'Y',
            PauliOp::Z => 'Z',
        }
    }
}

/// A tensor product of single-qubit Paulis over a fixed-size register.
///
/// The string stores one operator per qubit, identity included, so its length
/// always equals the register size.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString {
    ops: Vec<PauliOp>,
}

impl PauliString {
    pub fn new(ops: Vec<PauliOp>) -> Self {
        PauliString { ops }
    }

    /// The identity string on `n` qubits.
    pub fn identity(n: usize) -> Self {
        PauliString { ops: vec![PauliOp::I; n] }
    }

    /// A single non-identity operator `op` on qubit `k` of an `n`-qubit register.
    pub fn single(n: usize, k: usize, op: PauliOp) -> Self {
        let mut ops = vec![PauliOp::I; n];
        ops[k] = op;
        PauliString { ops }
    }

    /// Two operators on distinct qubits of an `n`-qubit register.
    pub fn pair(n: usize, k1: usize, op1: PauliOp, k2: usize, op2: PauliOp) -> Self {
        assert_ne!(k1, k2, "pair sites must be distinct");
        let mut ops = vec![PauliOp::I; n];
        ops[k1] = op1;
        ops[k2] = op2;
        PauliString { ops }
    }

    pub fn n_qubits(&self) -> usize {
        self.ops.len()
    }

    pub fn ops(&self) -> &[PauliOp] {
        &self.ops
    }

    pub fn op(&self, k: usize) -> PauliOp {
        self.ops[k]
    }

    /// Number of non-identity factors.
    pub fn weight(&self) -> usize {
        self.ops.iter().filter(|&&p| p != PauliOp::I).count()
    }

    /// Sites carrying a non-identity factor, ascending.
    pub fn support(&self) -> Vec<(usize, PauliOp)> {
        self.ops
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != PauliOp::I)
            .map(|(k, &p)| (k, p))
            .collect()
    }

    /// Bit masks describing the action on a computational basis state:
    /// `flip` has a 1-bit per X or Y factor, `phase` per Y or Z factor, and
    /// `y_count` counts Y factors.
    ///
    /// `P |b> = i^y_count * (-1)^popcount(b & phase) * |b ^ flip>`.
    pub fn masks(&self) -> (usize, usize, u32) {
        let mut flip = 0usize;
        let mut phase = 0usize;
        let mut y_count = 0u32;
        for (k, &p) in self.ops.iter().enumerate() {
            match p {
                PauliOp::I => {}
                PauliOp::X => flip |= 1 << k,
                PauliOp::Y => {
                    flip |= 1 << k;
                    phase |= 1 << k;
                    y_count += 1;
                }
                PauliOp::Z => phase |= 1 << k,
            }
        }
        (flip, phase, y_count)
    }

    /// Re-embeds the string into a larger register, shifting every site up by
    /// `offset`.
    pub fn embed(&self, offset: usize, new_n: usize) -> PauliString {
        assert!(self.ops.len() + offset <= new_n);
        let mut ops = vec![PauliOp::I; new_n];
        for (k, &p) in self.ops.iter().enumerate() {
            ops[k + offset] = p;
        }
        PauliString { ops }
    }

    pub fn label(&self) -> String {
        self.ops.iter().map(|p| p.label()).collect()
    }
}

/// A real linear combination of Pauli strings on a common register.
///
/// Terms are kept in first-insertion order with duplicate strings merged and
/// exact-zero coefficients dropped, so two Hamiltonians assembled from the
/// same physical terms compare equal and Trotter circuits built from them are
/// reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliHamiltonian {
    n_qubits: usize,
    terms: Vec<(f64, PauliString)>,
}

impl PauliHamiltonian {
    pub fn new(n_qubits: usize, terms: Vec<(f64, PauliString)>) -> Result<Self> {
        let mut merged: Vec<(f64, PauliString)> = Vec::with_capacity(terms.len());
        let mut index: HashMap<Vec<PauliOp>, usize> = HashMap::new();
        for (coeff, string) in terms {
            if string.n_qubits() != n_qubits {
                return Err(Error::InvalidModel(format!(
                    "term {} acts on {} qubits, register has {}",
                    string.label(),
                    string.n_qubits(),
                    n_qubits
                )));
            }
            match index.get(string.ops()) {
                Some(&i) => merged[i].0 += coeff,
                None => {
                    index.insert(string.ops().to_vec(), merged.len());
                    merged.push((coeff, string));
                }
            }
        }
        merged.retain(|(c, _)| *c != 0.0);
        Ok(PauliHamiltonian { n_qubits, terms: merged })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of an exact string, zero if absent.
    pub fn coefficient(&self, string: &PauliString) -> f64 {
        self.terms
            .iter()
            .find(|(_, s)| s == string)
            .map(|(c, _)| *c)
            .unwrap_or(0.0)
    }
}

/// `a Z + b Y` on a single system qubit: the minimal avoided-crossing model.
pub fn landau_zener(a: f64, b: f64) -> PauliHamiltonian {
    PauliHamiltonian::new(
        1,
        vec![
            (a, PauliString::single(1, 0, PauliOp::Z)),
            (b, PauliString::single(1, 0, PauliOp::Y)),
        ],
    )
    .expect("single-qubit terms are well formed")
}

/// Spin couplings of the open interacting Kitaev chain.
///
/// `x`, `y`, `z` multiply the nearest-neighbour XX, YY and ZZ terms, `m` the
/// uniform field `-m * sum_i Z_i` and `mbar` the extra interior field
/// `-mbar * sum_{i=2}^{n-1} Z_i` (1-based sites). The fermionic interaction
/// fixes `mbar = z`; the field is kept separate so the two roles stay visible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KitaevCouplings {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub m: f64,
    pub mbar: f64,
}

/// Physical parameters of the fermionic chain: chemical potential `mu`,
/// hopping `g`, pairing `delta` and nearest-neighbour interaction `v`.
///
/// The spin couplings follow from the Jordan-Wigner mapping as
/// `2x = g + delta`, `2y = g - delta`, `4z = v`, `4m = 2 mu + v` and
/// `4 mbar = v`; the constant offset `mu L / 2 + v (L - 1) / 4` produced by
/// the mapping is dropped throughout, so all spectra are reported without it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KitaevParams {
    sites: usize,
    mu: f64,
    g: f64,
    delta: f64,
    v: f64,
}

impl KitaevParams {
    pub fn new(sites: usize, mu: f64, g: f64, delta: f64, v: f64) -> Result<Self> {
        if sites < 2 {
            return Err(Error::InvalidModel(format!(
                "chain needs at least 2 sites, got {sites}"
            )));
        }
        Ok(KitaevParams { sites, mu, g, delta, v })
    }

    /// Builds the parameter set from spin couplings, using the `mbar = z`
    /// constraint to invert the map: `g = x + y`, `delta = x - y`, `v = 4z`,
    /// `mu = 2m - 2z`.
    pub fn from_couplings(sites: usize, x: f64, y: f64, z: f64, m: f64) -> Result<Self> {
        KitaevParams::new(sites, 2.0 * m - 2.0 * z, x + y, x - y, 4.0 * z)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn x(&self) -> f64 {
        (self.g + self.delta) / 2.0
    }

    pub fn y(&self) -> f64 {
        (self.g - self.delta) / 2.0
    }

    pub fn z(&self) -> f64 {
        self.v / 4.0
    }

    pub fn m(&self) -> f64 {
        (2.0 * self.mu + self.v) / 4.0
    }

    pub fn mbar(&self) -> f64 {
        self.v / 4.0
    }

    pub fn couplings(&self) -> KitaevCouplings {
        KitaevCouplings {
            x: self.x(),
            y: self.y(),
            z: self.z(),
            m: self.m(),
            mbar: self.mbar(),
        }
    }
}

/// Spin Hamiltonian of the open chain for an arbitrary coupling set.
///
/// Emits, in order: XX, YY and ZZ bonds (ascending site), then the uniform
/// `-m Z_i` fields, then the interior `-mbar Z_i` fields. Interior fields
/// merge with the uniform ones, so interior sites carry a single Z term with
/// coefficient `-(m + mbar)`.
pub fn kitaev_chain_couplings(sites: usize, c: &KitaevCouplings) -> Result<PauliHamiltonian> {
    if sites < 2 {
        return Err(Error::InvalidModel(format!(
            "chain needs at least 2 sites, got {sites}"
        )));
    }
    let n = sites;
    let mut terms = Vec::new();
    for i in 0..n - 1 {
        terms.push((c.x, PauliString::pair(n, i, PauliOp::X, i + 1, PauliOp::X)));
    }
    for i in 0..n - 1 {
        terms.push((c.y, PauliString::pair(n, i, PauliOp::Y, i + 1, PauliOp::Y)));
    }
    for i in 0..n - 1 {
        terms.push((c.z, PauliString::pair(n, i, PauliOp::Z, i + 1, PauliOp::Z)));
    }
    for i in 0..n {
        terms.push((-c.m, PauliString::single(n, i, PauliOp::Z)));
    }
    for i in 1..n.saturating_sub(1) {
        terms.push((-c.mbar, PauliString::single(n, i, PauliOp::Z)));
    }
    PauliHamiltonian::new(n, terms)
}

/// Spin Hamiltonian of the open chain for physical parameters.
pub fn kitaev_chain(p: &KitaevParams) -> Result<PauliHamiltonian> {
    kitaev_chain_couplings(p.sites(), &p.couplings())
}
