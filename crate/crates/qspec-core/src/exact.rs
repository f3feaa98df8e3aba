//! Dense Hermitian diagonalization used as the exact reference for the
//! statevector engine: matrix forms of Pauli Hamiltonians, sorted spectra
//! with parity labels, transition tables and matrix elements.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::PauliHamiltonian;

/// Hard cap on dense diagonalization size.
pub const DENSE_MAX_QUBITS: usize = 14;

const HERMITICITY_TOL: f64 = 1e-12;
const DEGENERACY_TOL: f64 = 1e-8;
const PARITY_LABEL_THRESHOLD: f64 = 0.99;

/// Dense matrix of a Pauli Hamiltonian in the computational basis.
///
/// Qubit `k` is bit `k` of the basis index, so basis state `|b>` has qubit 0
/// in its lowest-order bit.
pub fn to_dense(h: &PauliHamiltonian) -> Result<DMatrix<Complex64>> {
    let n = h.n_qubits();
    if n > DENSE_MAX_QUBITS {
        return Err(Error::DenseCapacity { got: n, max: DENSE_MAX_QUBITS });
    }
    let dim = 1usize << n;
    let mut mat = DMatrix::<Complex64>::zeros(dim, dim);
    for (coeff, string) in h.terms() {
        let (flip, phase, y_count) = string.masks();
        let y_phase = Complex64::i().powu(y_count);
        for col in 0..dim {
            let row = col ^ flip;
            let sign = if (col & phase).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            mat[(row, col)] += y_phase * (coeff * sign);
        }
    }
    Ok(mat)
}

/// Diagonal of the parity operator `prod_k Z_k` on `n` qubits.
fn parity_diagonal(n: usize) -> Vec<f64> {
    (0..1usize << n)
        .map(|b| if b.count_ones() % 2 == 0 { 1.0 } else { -1.0 })
        .collect()
}

/// Full spectrum of a Pauli Hamiltonian.
///
/// Energies are ascending. Within a degenerate cluster states are ordered by
/// parity label (+1 first) and then by the basis index of their dominant
/// amplitude, and each eigenvector's global phase is fixed by making that
/// dominant amplitude real and positive, so repeated runs produce identical
/// spectra.
#[derive(Debug, Clone)]
pub struct Spectrum {
    energies: Vec<f64>,
    /// Eigenvectors as matrix columns, aligned with `energies`.
    states: DMatrix<Complex64>,
    /// Parity label per eigenstate: the sign of `<prod Z>` when the
    /// Hamiltonian conserves parity and the expectation is sharp, else None.
    parities: Vec<Option<i8>>,
    n_qubits: usize,
}

impl Spectrum {
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn states(&self) -> &DMatrix<Complex64> {
        &self.states
    }

    pub fn state(&self, k: usize) -> nalgebra::DVectorView<'_, Complex64> {
        self.states.column(k)
    }

    pub fn parities(&self) -> &[Option<i8>] {
        &self.parities
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Lowest energy carrying the given parity label.
    pub fn lowest_with_parity(&self, parity: i8) -> Option<f64> {
        self.energies
            .iter()
            .zip(&self.parities)
            .find(|(_, p)| **p == Some(parity))
            .map(|(e, _)| *e)
    }
}

/// An ordered transition `[from, to]` with energy difference
/// `delta = E_to - E_from`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub delta: f64,
}

/// Diagonalizes a Pauli Hamiltonian.
pub fn exact_spectrum(h: &PauliHamiltonian) -> Result<Spectrum> {
    let dense = to_dense(h)?;
    let n = h.n_qubits();
    spectrum_of_dense(&dense, n)
}

/// Diagonalizes an explicit dense Hermitian matrix over `n_qubits`.
pub fn spectrum_of_dense(dense: &DMatrix<Complex64>, n_qubits: usize) -> Result<Spectrum> {
    let dim = 1usize << n_qubits;
    if dense.nrows() != dim || dense.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: n_qubits, got: dense.nrows() });
    }
    check_hermitian(dense)?;

    let eig = dense.clone().symmetric_eigen();
    let parity = parity_diagonal(n_qubits);
    let conserves_parity = parity_commutes(dense, &parity);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut energies: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut states = DMatrix::<Complex64>::zeros(dim, dim);
    for (col, &i) in order.iter().enumerate() {
        states.set_column(col, &eig.eigenvectors.column(i));
    }

    let scale = energies.iter().fold(1.0f64, |acc, e| acc.max(e.abs()));
    let cluster_tol = DEGENERACY_TOL * scale;

    // Within each degenerate cluster the solver returns an arbitrary basis;
    // rotate it to definite parity when parity is conserved so cross-sector
    // degeneracies (e.g. at a gap closing) still get sharp labels.
    let mut start = 0;
    while start < dim {
        let mut end = start + 1;
        while end < dim && energies[end] - energies[end - 1] <= cluster_tol {
            end += 1;
        }
        if conserves_parity && end - start > 1 {
            rotate_cluster_to_parity(&mut states, start..end, &parity);
        }
        start = end;
    }

    let mut parities = Vec::with_capacity(dim);
    let mut dominants = Vec::with_capacity(dim);
    for col in 0..dim {
        fix_phase(&mut states, col);
        let v = states.column(col);
        let expectation: f64 = v.iter().zip(&parity).map(|(a, p)| p * a.norm_sqr()).sum();
        let label = if conserves_parity && expectation.abs() > PARITY_LABEL_THRESHOLD {
            Some(if expectation >= 0.0 { 1i8 } else { -1 })
        } else {
            None
        };
        parities.push(label);
        dominants.push(dominant_index(&states, col));
    }

    // Deterministic order inside clusters: parity +1 first, unlabeled last,
    // then dominant basis index.
    let mut start = 0;
    while start < dim {
        let mut end = start + 1;
        while end < dim && energies[end] - energies[end - 1] <= cluster_tol {
            end += 1;
        }
        if end - start > 1 {
            let mut cols: Vec<usize> = (start..end).collect();
            cols.sort_by_key(|&c| {
                let pk = match parities[c] {
                    Some(1) => 0u8,
                    Some(_) => 1,
                    None => 2,
                };
                (pk, dominants[c])
            });
            let old_states = states.clone();
            let old: Vec<_> = cols.iter().map(|&c| (energies[c], parities[c], dominants[c])).collect();
            for (offset, &src) in cols.iter().enumerate() {
                states.set_column(start + offset, &old_states.column(src));
                let (e, p, d) = old[offset];
                energies[start + offset] = e;
                parities[start + offset] = p;
                dominants[start + offset] = d;
            }
        }
        start = end;
    }

    Ok(Spectrum { energies, states, parities, n_qubits })
}

fn check_hermitian(m: &DMatrix<Complex64>) -> Result<()> {
    let mut residual = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            residual = residual.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    if residual > HERMITICITY_TOL {
        return Err(Error::NotHermitian { residual });
    }
    Ok(())
}

fn parity_commutes(m: &DMatrix<Complex64>, parity: &[f64]) -> bool {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if parity[i] != parity[j] && m[(i, j)].norm() > HERMITICITY_TOL {
                return false;
            }
        }
    }
    true
}

fn rotate_cluster_to_parity(
    states: &mut DMatrix<Complex64>,
    cluster: std::ops::Range<usize>,
    parity: &[f64],
) {
    let k = cluster.len();
    let dim = states.nrows();
    let mut block = DMatrix::<Complex64>::zeros(k, k);
    for (a, ca) in cluster.clone().enumerate() {
        for (b, cb) in cluster.clone().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for row in 0..dim {
                acc += states[(row, ca)].conj() * parity[row] * states[(row, cb)];
            }
            block[(a, b)] = acc;
        }
    }
    let eig = block.symmetric_eigen();
    let mut rotated = DMatrix::<Complex64>::zeros(dim, k);
    for col in 0..k {
        for row in 0..dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, ca) in cluster.clone().enumerate() {
                acc += states[(row, ca)] * eig.eigenvectors[(a, col)];
            }
            rotated[(row, col)] = acc;
        }
    }
    for (offset, c) in cluster.enumerate() {
        states.set_column(c, &rotated.column(offset));
    }
}

fn dominant_index(states: &DMatrix<Complex64>, col: usize) -> usize {
    let v = states.column(col);
    let mut best = 0;
    let mut best_norm = -1.0f64;
    for (i, a) in v.iter().enumerate() {
        let n = a.norm_sqr();
        if n > best_norm + 1e-15 {
            best = i;
            best_norm = n;
        }
    }
    best
}

fn fix_phase(states: &mut DMatrix<Complex64>, col: usize) {
    let dom = dominant_index(states, col);
    let a = states[(dom, col)];
    if a.norm() > 0.0 {
        let phase = a.conj() / a.norm();
        let mut column = states.column_mut(col);
        for entry in column.iter_mut() {
            *entry *= phase;
        }
    }
}

/// All ordered transitions `[n, m]` with `delta = E_m - E_n`, `m` and `n`
/// ranging over the full spectrum (self-transitions included).
pub fn transition_energies(s: &Spectrum) -> Vec<Transition> {
    let n_levels = s.len();
    let mut out = Vec::with_capacity(n_levels * n_levels);
    for from in 0..n_levels {
        for to in 0..n_levels {
            out.push(Transition {
                from,
                to,
                delta: s.energies[to] - s.energies[from],
            });
        }
    }
    out
}

/// Matrix element `<m| X_site |n>` between eigenstates, where `site` is the
/// 1-based system wire (site 1 is the qubit adjacent to the probe).
pub fn chi_element(s: &Spectrum, m: usize, n: usize, site: usize) -> Result<Complex64> {
    if site == 0 || site > s.n_qubits {
        return Err(Error::InvalidArgument(format!(
            "site {site} outside the system register 1..={}",
            s.n_qubits
        )));
    }
    let mask = 1usize << (site - 1);
    let vm = s.states.column(m);
    let vn = s.states.column(n);
    let mut acc = Complex64::new(0.0, 0.0);
    for b in 0..s.states.nrows() {
        acc += vm[b ^ mask].conj() * vn[b];
    }
    Ok(acc)
}
