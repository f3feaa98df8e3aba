//! Closed-form and perturbative predictions for the probe response.
//!
//! These are independent of the gate-level simulator and exist to pin it
//! down: the two-level amplitudes are exact for a single-qubit system under
//! the un-Trotterized resonance Hamiltonian, and the perturbative line shape
//! covers arbitrary small systems at weak coupling.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exact::Spectrum;

/// Inputs to the two-level closed form: a system gap `d`, probe coupling
/// `c`, evolution time `t`, and drive frequency `omega`.
#[derive(Debug, Clone, Copy)]
pub struct TwoLevelParams {
    pub d: f64,
    pub c: f64,
    pub t: f64,
    pub omega: f64,
}

/// Flip amplitude of the probe against a two-level system prepared in its
/// upper state, so the system relaxes by `d` while the probe absorbs.
/// `|A|^2` peaks at `omega = +d` where it reaches `sin^2(c t)`.
pub fn amplitude_a(p: TwoLevelParams) -> Complex64 {
    let detuning = p.d - p.omega;
    let q = (4.0 * p.c * p.c + detuning * detuning).sqrt();
    if q == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    Complex64::i() * (2.0 * p.c / q) * (q * p.t / 2.0).sin()
}

/// Flip amplitude against the lower state (system absorbs `d`); the mirror
/// image of [`amplitude_a`], peaking at `omega = -d`.
pub fn amplitude_b(p: TwoLevelParams) -> Complex64 {
    amplitude_a(TwoLevelParams { omega: -p.omega, ..p })
}

/// Probe flip probability for a system prepared in `u |lower> + v |upper>`.
/// The two branches live in disjoint invariant subspaces, so their
/// probabilities add without interference.
pub fn flip_probability(p: TwoLevelParams, u: Complex64, v: Complex64) -> f64 {
    u.norm_sqr() * amplitude_b(p).norm_sqr() + v.norm_sqr() * amplitude_a(p).norm_sqr()
}

/// First-order perturbative probe response for an arbitrary diagonalized
/// system.
///
/// For the system prepared in `sum_n alpha_n |E_n>` with the probe in
/// `|0>`, the probe expectation after time `t` at drive `omega` is
///
/// ```text
/// <Z_0> = 1 - 2 c^2 sum_m | sum_n alpha_n chi_mn
///         (e^{-i (E_n - omega/2) t} - e^{-i (E_m + omega/2) t})
///         / (E_m - E_n + omega) |^2
/// ```
///
/// with `chi_mn = <E_m| X_probed |E_n>`. The expression diverges on
/// resonance, so frequencies within `delta = max(5 c, 1e-6)` of a
/// contributing transition `omega = E_n - E_m` are rejected; a pair
/// contributes when both `|alpha_n|` and `|chi_mn|` exceed `1e-12`.
pub fn perturbative_z0(
    spectrum: &Spectrum,
    alphas: &[Complex64],
    probed: usize,
    coupling: f64,
    t: f64,
    omega: f64,
) -> Result<f64> {
    let n_levels = spectrum.len();
    if alphas.len() != n_levels {
        return Err(Error::LengthMismatch { left: alphas.len(), right: n_levels });
    }
    let delta = (5.0 * coupling.abs()).max(1e-6);
    let energies = spectrum.energies();

    let mut chi = vec![vec![Complex64::new(0.0, 0.0); n_levels]; n_levels];
    for m in 0..n_levels {
        for n in 0..n_levels {
            chi[m][n] = crate::exact::chi_element(spectrum, m, n, probed)?;
        }
    }

    for (n, alpha) in alphas.iter().enumerate() {
        if alpha.norm() <= 1e-12 {
            continue;
        }
        for m in 0..n_levels {
            if chi[m][n].norm() <= 1e-12 {
                continue;
            }
            let pole = energies[n] - energies[m];
            if (omega - pole).abs() < delta {
                return Err(Error::PoleProximity { omega, pole, delta });
            }
        }
    }

    let mut total = 0.0;
    for m in 0..n_levels {
        let mut inner = Complex64::new(0.0, 0.0);
        for (n, alpha) in alphas.iter().enumerate() {
            if alpha.norm() <= 1e-12 || chi[m][n].norm() <= 1e-12 {
                continue;
            }
            let e0n = energies[n] - omega / 2.0;
            let e1m = energies[m] + omega / 2.0;
            let phases = phase(-e0n * t) - phase(-e1m * t);
            inner += alpha * chi[m][n] * phases / (energies[m] - energies[n] + omega);
        }
        total += inner.norm_sqr();
    }
    Ok(1.0 - 2.0 * coupling * coupling * total)
}

fn phase(arg: f64) -> Complex64 {
    Complex64::new(arg.cos(), arg.sin())
}

/// Whether the ideal (un-Trotterized) probe response has a dip at
/// `omega = 0`: true exactly when some occupied eigenstate has a nonzero
/// diagonal coupling matrix element `chi_nn` on the probed site.
pub fn zero_dip_expected(spectrum: &Spectrum, alphas: &[Complex64], probed: usize) -> Result<bool> {
    if alphas.len() != spectrum.len() {
        return Err(Error::LengthMismatch { left: alphas.len(), right: spectrum.len() });
    }
    for (n, alpha) in alphas.iter().enumerate() {
        if alpha.norm() <= 1e-10 {
            continue;
        }
        if crate::exact::chi_element(spectrum, n, n, probed)?.norm() > 1e-10 {
            return Ok(true);
        }
    }
    Ok(false)
}
