//! Frequency sweeps of the probe and dip analysis.
//!
//! A sweep evolves probe + system once per drive frequency and records the
//! probe `<Z_0>`. The analysis half turns that curve into dip locations:
//! smoothing, minimum detection against a noise-aware threshold, model fits
//! of the dip shape, and width estimates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::least_squares;
use crate::oracles::{amplitude_a, TwoLevelParams};
use crate::pauli::PauliHamiltonian;
use crate::sim::{
    apply, build_resonance_circuit, derive_seed, expectation_z, noisy_apply, steps_for,
    StateVector, TrotterOrder,
};

/// Uniform frequency grid, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl OmegaGrid {
    pub fn new(start: f64, stop: f64, points: usize) -> Result<Self> {
        if !(start < stop) {
            return Err(Error::InvalidArgument(format!(
                "frequency range [{start}, {stop}] is empty"
            )));
        }
        if points < 3 {
            return Err(Error::InvalidArgument(format!(
                "need at least 3 grid points, got {points}"
            )));
        }
        Ok(OmegaGrid { start, stop, points })
    }

    pub fn step(&self) -> f64 {
        (self.stop - self.start) / (self.points - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        let step = self.step();
        (0..self.points).map(|i| self.start + step * i as f64).collect()
    }
}

/// System preparation before the probe is attached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// `|0...0>`.
    Zeros,
    /// A computational basis state of the system register.
    Basis(usize),
    /// The k-th exact eigenstate, energies ascending.
    Eigenstate(usize),
}

/// Stochastic two-qubit depolarizing noise applied during the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p_depol: f64,
    pub trajectories: usize,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub hamiltonian: PauliHamiltonian,
    pub grid: OmegaGrid,
    pub coupling: f64,
    pub total_time: f64,
    pub dt: f64,
    pub order: TrotterOrder,
    pub probed: usize,
    pub initial: InitialState,
    pub shots: Option<u64>,
    pub seed: u64,
    pub expected_dips: usize,
    pub noise: Option<NoiseModel>,
}

impl SweepConfig {
    pub fn new(hamiltonian: PauliHamiltonian, grid: OmegaGrid) -> Self {
        SweepConfig {
            hamiltonian,
            grid,
            coupling: 0.1,
            total_time: 10.0,
            dt: 1.0 / 3.0,
            order: TrotterOrder::First,
            probed: 1,
            initial: InitialState::Zeros,
            shots: None,
            seed: 0,
            expected_dips: 2,
            noise: None,
        }
    }
}

/// Fitted dip shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DipShape {
    Single,
    Double,
}

/// One detected dip, after model fitting and width extraction.
#[derive(Debug, Clone, Serialize)]
pub struct DipFit {
    pub center: f64,
    pub depth: f64,
    pub half_left: Option<f64>,
    pub half_right: Option<f64>,
    pub fwhm: Option<f64>,
    pub shape: DipShape,
    pub residual: f64,
    pub converged: bool,
    pub raw_omega: f64,
    pub raw_z0: f64,
}

/// Sweep settings echoed alongside results (everything but the model).
#[derive(Debug, Clone, Serialize)]
pub struct SweepMeta {
    pub coupling: f64,
    pub total_time: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub order: TrotterOrder,
    pub probed: usize,
    pub shots: Option<u64>,
    pub seed: u64,
    pub expected_dips: usize,
    pub noise: Option<NoiseModel>,
    pub sigma: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub omegas: Vec<f64>,
    pub z0: Vec<f64>,
    pub z0_smoothed: Vec<f64>,
    pub dips: Vec<DipFit>,
    pub meta: SweepMeta,
}

/// Runs the full sweep: evolve at every frequency, smooth, detect, fit.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    if !cfg.coupling.is_finite() {
        return Err(Error::InvalidArgument("coupling must be finite".into()));
    }
    if !(1..=2).contains(&cfg.expected_dips) {
        return Err(Error::InvalidArgument(format!(
            "expected_dips must be 1 or 2, got {}",
            cfg.expected_dips
        )));
    }
    if let Some(shots) = cfg.shots {
        if shots == 0 {
            return Err(Error::InvalidArgument("shots must be at least 1".into()));
        }
    }
    if let Some(nm) = &cfg.noise {
        if !(0.0..=1.0).contains(&nm.p_depol) {
            return Err(Error::InvalidArgument(format!(
                "depolarizing probability {} outside [0, 1]",
                nm.p_depol
            )));
        }
        if nm.trajectories == 0 {
            return Err(Error::InvalidArgument("need at least one trajectory".into()));
        }
    }

    let (n_steps, dt) = steps_for(cfg.total_time, cfg.dt)?;
    let system_state = prepare_initial(cfg)?;
    let omegas = cfg.grid.values();

    let z0: Vec<f64> = omegas
        .par_iter()
        .enumerate()
        .map(|(idx, &omega)| -> Result<f64> {
            let circuit = build_resonance_circuit(
                &cfg.hamiltonian,
                omega,
                cfg.coupling,
                dt,
                n_steps,
                cfg.order,
                cfg.probed,
            )?;
            let init = StateVector::with_probe_ground(&system_state);
            let point_seed = derive_seed(cfg.seed, idx as u64);
            let z = match &cfg.noise {
                Some(nm) => noisy_apply(
                    &circuit,
                    &init,
                    nm.p_depol,
                    derive_seed(point_seed, 1),
                    nm.trajectories,
                )?,
                None => expectation_z(&apply(&circuit, &init)?, 0),
            };
            Ok(match cfg.shots {
                Some(shots) => resample(z, shots, derive_seed(point_seed, 2)),
                None => z,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let z0_smoothed = smooth(&z0);
    let sigma = detection_sigma(cfg.shots, cfg.noise.as_ref());
    let candidates = find_minima(&z0_smoothed, sigma);
    let dips = fit_dips(
        &omegas,
        &z0,
        &z0_smoothed,
        &candidates,
        cfg.coupling,
        cfg.total_time,
        cfg.expected_dips,
        sigma,
    )?;

    Ok(SweepResult {
        omegas,
        z0,
        z0_smoothed,
        dips,
        meta: SweepMeta {
            coupling: cfg.coupling,
            total_time: cfg.total_time,
            dt,
            n_steps,
            order: cfg.order,
            probed: cfg.probed,
            shots: cfg.shots,
            seed: cfg.seed,
            expected_dips: cfg.expected_dips,
            noise: cfg.noise,
            sigma,
        },
    })
}

fn prepare_initial(cfg: &SweepConfig) -> Result<StateVector> {
    let n = cfg.hamiltonian.n_qubits();
    match cfg.initial {
        InitialState::Zeros => Ok(StateVector::zero_state(n)),
        InitialState::Basis(index) => StateVector::basis_state(n, index),
        InitialState::Eigenstate(k) => {
            let spectrum = crate::exact::exact_spectrum(&cfg.hamiltonian)?;
            StateVector::from_eigenstate(&spectrum, k)
        }
    }
}

/// Statistical scale used by the minimum detector: shot noise, trajectory
/// noise, or a small floor for exact data.
fn detection_sigma(shots: Option<u64>, noise: Option<&NoiseModel>) -> f64 {
    let base = match shots {
        Some(s) => 1.0 / (s as f64).sqrt(),
        None => 0.01,
    };
    match noise {
        Some(nm) => base.max(1.0 / (nm.trajectories as f64).sqrt()),
        None => base,
    }
}

fn resample(z: f64, shots: u64, seed: u64) -> f64 {
    let p1 = ((1.0 - z) / 2.0).clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n1 = Binomial::new(shots, p1).expect("probability in range").sample(&mut rng);
    (shots as f64 - 2.0 * n1 as f64) / shots as f64
}

/// Centered five-point moving average, window truncated at the ends.
pub fn smooth(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 2).min(n - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Indices of interior local minima at least `3 sigma` below the median.
/// A flat run counts once, at its first index, and only if the series rises
/// again on its far side.
pub fn find_minima(smoothed: &[f64], sigma: f64) -> Vec<usize> {
    let n = smoothed.len();
    if n < 3 {
        return Vec::new();
    }
    let mut sorted = smoothed.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let threshold = median - 3.0 * sigma;

    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if smoothed[i] < smoothed[i - 1] {
            let mut j = i;
            while j + 1 < n && smoothed[j + 1] == smoothed[i] {
                j += 1;
            }
            if j + 1 < n && smoothed[j + 1] > smoothed[i] && smoothed[i] <= threshold {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Contiguous window of up to `k` indices around `center`, preferring the
/// left side on ties.
fn window_around(n: usize, center: usize, k: usize) -> (usize, usize) {
    let mut lo = center;
    let mut hi = center;
    while hi - lo + 1 < k.min(n) {
        let can_left = lo > 0;
        let can_right = hi + 1 < n;
        if can_left && (!can_right || center - lo <= hi - center) {
            lo -= 1;
        } else {
            hi += 1;
        }
    }
    (lo, hi)
}

/// Fits detected minima to the two-level dip shape.
///
/// Each candidate gets an independent single-dip fit on the 10 nearest
/// points, except when exactly one candidate was found but two dips are
/// expected: then a two-center model is fitted on the 20 nearest points and
/// both centers are reported. A fit that fails to converge falls back to
/// the raw minimum location.
pub fn fit_dips(
    omegas: &[f64],
    z0: &[f64],
    z0_smoothed: &[f64],
    candidates: &[usize],
    coupling: f64,
    total_time: f64,
    expected_dips: usize,
    sigma: f64,
) -> Result<Vec<DipFit>> {
    if omegas.len() != z0.len() {
        return Err(Error::LengthMismatch { left: omegas.len(), right: z0.len() });
    }
    let n = omegas.len();
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let grid_step = if n > 1 { (omegas[n - 1] - omegas[0]) / (n - 1) as f64 } else { 1.0 };
    let sin_ct_sqr = (coupling * total_time).sin().powi(2).max(1e-6);
    let s_bounds = (1e-4, 4.0);

    let single = |idx: usize| -> Result<DipFit> {
        let (lo, hi) = window_around(n, idx, 10);
        let xs = &omegas[lo..=hi];
        let ys = &z0[lo..=hi];
        let span = (omegas[hi] - omegas[lo]).max(grid_step) + grid_step;
        let depth0 = (1.0 - z0_smoothed[idx]).max(1e-3);
        let s0 = (depth0 / (2.0 * sin_ct_sqr)).clamp(s_bounds.0, s_bounds.1);
        let model = |w: f64, p: &[f64]| {
            let a = amplitude_a(TwoLevelParams { d: p[0], c: coupling, t: total_time, omega: w });
            1.0 - 2.0 * p[1] * a.norm_sqr()
        };
        let fit = least_squares(
            xs,
            ys,
            &[omegas[idx], s0],
            &[(omegas[idx] - span, omegas[idx] + span), s_bounds],
            model,
        )?;
        if fit.converged {
            let center = fit.params[0];
            let width = fwhm_within(omegas, z0_smoothed, center, sigma);
            Ok(DipFit {
                center,
                depth: 1.0 - model(center, &fit.params),
                half_left: width.left,
                half_right: width.right,
                fwhm: width.width,
                shape: DipShape::Single,
                residual: fit.rms,
                converged: true,
                raw_omega: omegas[idx],
                raw_z0: z0[idx],
            })
        } else {
            Ok(raw_fallback(omegas, z0, z0_smoothed, idx, DipShape::Single, fit.rms, sigma))
        }
    };

    if candidates.len() == 1 && expected_dips == 2 {
        let idx = candidates[0];
        let (lo, hi) = window_around(n, idx, 20);
        let xs = &omegas[lo..=hi];
        let ys = &z0[lo..=hi];
        let span = (omegas[hi] - omegas[lo]).max(grid_step) + grid_step;
        let depth0 = (1.0 - z0_smoothed[idx]).max(1e-3);
        let s0 = (depth0 / (2.0 * sin_ct_sqr)).clamp(s_bounds.0, s_bounds.1);
        let model = |w: f64, p: &[f64]| {
            let a1 = amplitude_a(TwoLevelParams { d: p[0], c: coupling, t: total_time, omega: w });
            let a2 = amplitude_a(TwoLevelParams { d: p[1], c: coupling, t: total_time, omega: w });
            1.0 - 2.0 * p[2] * (a1 + a2).norm_sqr()
        };
        let d_bounds = (omegas[idx] - span, omegas[idx] + span);
        let fit = least_squares(
            xs,
            ys,
            &[omegas[idx] - 2.0 * grid_step, omegas[idx] + 2.0 * grid_step, s0],
            &[d_bounds, d_bounds, s_bounds],
            model,
        )?;
        if fit.converged {
            let mut centers = [fit.params[0], fit.params[1]];
            centers.sort_by(f64::total_cmp);
            let dips = centers
                .iter()
                .map(|&center| {
                    let width = fwhm_within(omegas, z0_smoothed, center, sigma);
                    DipFit {
                        center,
                        depth: 1.0 - model(center, &fit.params),
                        half_left: width.left,
                        half_right: width.right,
                        fwhm: width.width,
                        shape: DipShape::Double,
                        residual: fit.rms,
                        converged: true,
                        raw_omega: omegas[idx],
                        raw_z0: z0[idx],
                    }
                })
                .collect();
            return Ok(dips);
        }
        return Ok(vec![raw_fallback(
            omegas,
            z0,
            z0_smoothed,
            idx,
            DipShape::Double,
            fit.rms,
            sigma,
        )]);
    }

    candidates.iter().map(|&idx| single(idx)).collect()
}

fn raw_fallback(
    omegas: &[f64],
    z0: &[f64],
    z0_smoothed: &[f64],
    idx: usize,
    shape: DipShape,
    rms: f64,
    sigma: f64,
) -> DipFit {
    let width = fwhm_within(omegas, z0_smoothed, omegas[idx], sigma);
    DipFit {
        center: omegas[idx],
        depth: 1.0 - z0[idx],
        half_left: width.left,
        half_right: width.right,
        fwhm: width.width,
        shape,
        residual: rms,
        converged: false,
        raw_omega: omegas[idx],
        raw_z0: z0[idx],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfWidth {
    pub left: Option<f64>,
    pub right: Option<f64>,
    pub width: Option<f64>,
}

/// Full width at half depth of the dip nearest `center`.
///
/// Each side walks outward until the series turns down again (or the grid
/// ends); the half level on that side is midway between the dip value and
/// that shoulder, located by linear interpolation. A side that never rises
/// past its half level is reported as `None`, and `width` needs both.
pub fn fwhm(omegas: &[f64], values: &[f64], center: f64) -> HalfWidth {
    fwhm_within(omegas, values, center, 0.0)
}

/// [`fwhm`] with a noise allowance: the shoulder walk only stops once the
/// series has dropped more than `slack` below its running maximum, so
/// statistical wiggles smaller than `slack` do not end a side early.
pub fn fwhm_within(omegas: &[f64], values: &[f64], center: f64, slack: f64) -> HalfWidth {
    let n = values.len();
    if n < 3 {
        return HalfWidth { left: None, right: None, width: None };
    }
    let idx = omegas
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| (*a - center).abs().total_cmp(&(*b - center).abs()))
        .map(|(i, _)| i)
        .unwrap();
    let min_v = values[idx];

    let shoulder = |step: isize| -> usize {
        let mut best = idx;
        let mut j = idx as isize;
        loop {
            let next = j + step;
            if next < 0 || next >= n as isize {
                return best;
            }
            let v = values[next as usize];
            if v >= values[best] {
                best = next as usize;
            } else if values[best] - v > slack {
                return best;
            }
            j = next;
        }
    };
    let left = crossing(omegas, values, min_v, idx, shoulder(-1));
    let right = crossing(omegas, values, min_v, idx, shoulder(1));
    let width = match (left, right) {
        (Some(l), Some(r)) => Some(r - l),
        _ => None,
    };
    HalfWidth { left, right, width }
}

fn crossing(
    omegas: &[f64],
    values: &[f64],
    min_v: f64,
    from: usize,
    shoulder: usize,
) -> Option<f64> {
    if shoulder == from {
        return None;
    }
    let half = (min_v + values[shoulder]) / 2.0;
    if values[shoulder] <= half {
        return None;
    }
    let step: isize = if shoulder > from { 1 } else { -1 };
    let mut i = from as isize;
    while i != shoulder as isize {
        let next = i + step;
        let (a, b) = (values[i as usize], values[next as usize]);
        if b >= half {
            let t = if b == a { 0.0 } else { (half - a) / (b - a) };
            return Some(omegas[i as usize] + t * (omegas[next as usize] - omegas[i as usize]));
        }
        i = next;
    }
    None
}

/// Depth of a dip centered at zero frequency: how far the smoothed series
/// at `omega = 0` sits below the higher ground on *both* sides within
/// `window`. Structure away from zero (including side lobes of distant
/// dips) does not register; monotone behavior across the window gives
/// zero.
pub fn zero_dip_depth(omegas: &[f64], smoothed: &[f64], window: f64) -> f64 {
    let idxs: Vec<usize> =
        (0..omegas.len()).filter(|&i| omegas[i].abs() <= window).collect();
    if idxs.len() < 3 {
        return 0.0;
    }
    let step = (omegas[idxs[1]] - omegas[idxs[0]]).abs();
    let central = idxs
        .iter()
        .filter(|&&i| omegas[i].abs() <= 1.5 * step)
        .map(|&i| smoothed[i])
        .fold(f64::INFINITY, f64::min);
    let side_max = |pred: &dyn Fn(f64) -> bool| {
        idxs.iter()
            .filter(|&&i| pred(omegas[i]))
            .map(|&i| smoothed[i])
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let left = side_max(&|w| w < 0.0);
    let right = side_max(&|w| w > 0.0);
    if !left.is_finite() || !right.is_finite() || !central.is_finite() {
        return 0.0;
    }
    (left.min(right) - central).max(0.0)
}

/// The dip whose fitted center is nearest `previous`; ties go to the
/// smaller `|center|`.
pub fn track_dip<'a>(dips: &'a [DipFit], previous: f64) -> Option<&'a DipFit> {
    dips.iter().min_by(|a, b| {
        (a.center - previous)
            .abs()
            .total_cmp(&(b.center - previous).abs())
            .then(a.center.abs().total_cmp(&b.center.abs()))
    })
}

/// Root-mean-square difference of two equal-length series.
pub fn rms(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(Error::SeriesTooShort { got: 0, min: 1 });
    }
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    Ok((sum / a.len() as f64).sqrt())
}

impl SweepResult {
    /// `omega,z0,z0_smoothed` rows, one per grid point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega,z0,z0_smoothed\n");
        for i in 0..self.omegas.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.omegas[i], self.z0[i], self.z0_smoothed[i]
            ));
        }
        out
    }

    /// Pretty JSON with the sweep settings, grid, and fitted dips.
    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            omega_start: f64,
            omega_stop: f64,
            points: usize,
            meta: &'a SweepMeta,
            dips: &'a [DipFit],
        }
        let s = Summary {
            omega_start: self.omegas[0],
            omega_stop: *self.omegas.last().unwrap(),
            points: self.omegas.len(),
            meta: &self.meta,
            dips: &self.dips,
        };
        serde_json::to_string_pretty(&s).map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::landau_zener;
    use approx::assert_abs_diff_eq;

    fn two_dip_curve(grid: &OmegaGrid, d: f64, c: f64, t: f64) -> Vec<f64> {
        grid.values()
            .iter()
            .map(|&omega| {
                let a = amplitude_a(TwoLevelParams { d, c, t, omega });
                let b = amplitude_a(TwoLevelParams { d, c, t, omega: -omega });
                1.0 - a.norm_sqr() - b.norm_sqr()
            })
            .collect()
    }

    #[test]
    fn grid_is_inclusive_and_uniform() {
        let g = OmegaGrid::new(-4.0, 4.0, 101).unwrap();
        let v = g.values();
        assert_eq!(v.len(), 101);
        assert_abs_diff_eq!(v[0], -4.0, epsilon = 0.0);
        assert_abs_diff_eq!(v[100], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1] - v[0], 0.08, epsilon = 1e-12);
        assert!(OmegaGrid::new(1.0, 1.0, 10).is_err());
        assert!(OmegaGrid::new(0.0, 1.0, 2).is_err());
    }

    #[test]
    fn smoothing_spreads_a_spike_over_five_points() {
        let mut data = vec![0.0; 11];
        data[5] = 1.0;
        let s = smooth(&data);
        for i in 3..=7 {
            assert_abs_diff_eq!(s[i], 0.2, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(s[2], 0.0, epsilon = 0.0);
        assert_abs_diff_eq!(s[8], 0.0, epsilon = 0.0);
    }

    #[test]
    fn smoothing_truncates_at_the_edges() {
        let mut data = vec![0.0; 8];
        data[0] = 1.0;
        let s = smooth(&data);
        assert_abs_diff_eq!(s[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s[1], 1.0 / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s[2], 1.0 / 5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s[3], 0.0, epsilon = 0.0);
    }

    #[test]
    fn minima_detection_finds_both_dips_and_ignores_ripple() {
        let grid = OmegaGrid::new(-4.0, 4.0, 161).unwrap();
        let raw = two_dip_curve(&grid, 2.163, 0.1, 10.0);
        let smoothed = smooth(&raw);
        let minima = find_minima(&smoothed, 0.01);
        let omegas = grid.values();
        let centers: Vec<f64> = minima.iter().map(|&i| omegas[i]).collect();
        assert!(
            centers.iter().any(|&w| (w + 2.163).abs() < 0.15),
            "missing negative dip in {centers:?}"
        );
        assert!(
            centers.iter().any(|&w| (w - 2.163).abs() < 0.15),
            "missing positive dip in {centers:?}"
        );
    }

    #[test]
    fn shallow_wiggles_stay_below_threshold() {
        let data: Vec<f64> = (0..101)
            .map(|i| 1.0 - 0.005 * ((i as f64) * 0.7).sin().powi(2))
            .collect();
        let smoothed = smooth(&data);
        assert!(find_minima(&smoothed, 0.01).is_empty());
    }

    #[test]
    fn plateau_counts_once() {
        let data = vec![1.0, 0.5, 0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0];
        let minima = find_minima(&data, 0.01);
        assert_eq!(minima, vec![2]);
    }

    #[test]
    fn single_fit_recovers_a_synthetic_center() {
        let grid = OmegaGrid::new(0.5, 3.5, 61).unwrap();
        let (c, t, d) = (0.1, 10.0, 2.163);
        let raw: Vec<f64> = grid
            .values()
            .iter()
            .map(|&omega| {
                let a = amplitude_a(TwoLevelParams { d, c, t, omega });
                1.0 - 2.0 * 0.5 * a.norm_sqr()
            })
            .collect();
        let smoothed = smooth(&raw);
        let minima = find_minima(&smoothed, 0.01);
        assert_eq!(minima.len(), 1);
        let dips =
            fit_dips(&grid.values(), &raw, &smoothed, &minima, c, t, 1, 0.01).unwrap();
        assert_eq!(dips.len(), 1);
        assert!(dips[0].converged);
        assert_abs_diff_eq!(dips[0].center, d, epsilon = 1e-4);
        assert_abs_diff_eq!(dips[0].depth, (c * t).sin().powi(2), epsilon = 1e-4);
        assert_eq!(dips[0].shape, DipShape::Single);
    }

    #[test]
    fn double_fit_splits_an_unresolved_pair() {
        // Two dips 0.35 apart with linewidth ~ 4c = 0.8: merged into one
        // minimum on the grid, recovered by the two-center model.
        let grid = OmegaGrid::new(0.0, 4.0, 81).unwrap();
        let (c, t) = (0.2, 6.0);
        let (d1, d2) = (1.8, 2.15);
        let raw: Vec<f64> = grid
            .values()
            .iter()
            .map(|&omega| {
                let a1 = amplitude_a(TwoLevelParams { d: d1, c, t, omega });
                let a2 = amplitude_a(TwoLevelParams { d: d2, c, t, omega });
                1.0 - 2.0 * 0.5 * (a1 + a2).norm_sqr()
            })
            .collect();
        let smoothed = smooth(&raw);
        let minima = find_minima(&smoothed, 0.01);
        assert_eq!(minima.len(), 1, "dips should merge at this spacing");
        let dips =
            fit_dips(&grid.values(), &raw, &smoothed, &minima, c, t, 2, 0.01).unwrap();
        assert_eq!(dips.len(), 2);
        assert!(dips.iter().all(|d| d.converged && d.shape == DipShape::Double));
        assert_abs_diff_eq!(dips[0].center, d1, epsilon = 0.02);
        assert_abs_diff_eq!(dips[1].center, d2, epsilon = 0.02);
    }

    fn ideal_dip_width(c: f64, t: f64) -> f64 {
        let grid = OmegaGrid::new(0.0, 4.0, 401).unwrap();
        let raw: Vec<f64> = grid
            .values()
            .iter()
            .map(|&omega| {
                let a = amplitude_a(TwoLevelParams { d: 2.0, c, t, omega });
                1.0 - 2.0 * a.norm_sqr()
            })
            .collect();
        fwhm(&grid.values(), &raw, 2.0).width.expect("closed dip")
    }

    #[test]
    fn fwhm_narrows_with_longer_evolution() {
        let widths: Vec<f64> = [3.0, 5.0, 8.0, 10.0]
            .iter()
            .map(|&t| ideal_dip_width(0.1, t))
            .collect();
        assert!(
            widths.windows(2).all(|w| w[1] < w[0]),
            "expected Fourier narrowing with t: {widths:?}"
        );
    }

    #[test]
    fn stronger_coupling_at_shorter_time_broadens_the_dip() {
        let wide = ideal_dip_width(0.3, 5.0);
        let narrow = ideal_dip_width(0.1, 10.0);
        assert!(wide > narrow, "{wide} vs {narrow}");
        // The narrow case sits in the working band used for scan metrics.
        assert!((narrow - 0.811).abs() / 0.811 < 0.5, "{narrow}");
    }

    #[test]
    fn dip_depth_grows_with_coupling_before_saturation() {
        let t = 5.0;
        let depths: Vec<f64> = [0.05, 0.1, 0.2, 0.3]
            .iter()
            .map(|&c| {
                let a = amplitude_a(TwoLevelParams { d: 2.0, c, t, omega: 2.0 });
                2.0 * a.norm_sqr()
            })
            .collect();
        assert!(
            depths.windows(2).all(|w| w[1] > w[0]),
            "weak coupling should wash the dip out: {depths:?}"
        );
        assert!(depths[0] < 0.2 && depths[3] > 1.9);
    }

    #[test]
    fn fwhm_flags_open_sides_at_the_grid_edge() {
        let grid = OmegaGrid::new(0.0, 1.0, 21).unwrap();
        let raw: Vec<f64> = grid.values().iter().map(|&w| w).collect();
        // Monotone series: the "dip" at the left edge never closes.
        let hw = fwhm(&grid.values(), &raw, 0.0);
        assert!(hw.left.is_none());
        assert!(hw.width.is_none());
    }

    #[test]
    fn zero_dip_depth_is_zero_on_monotone_tails() {
        let grid = OmegaGrid::new(-1.0, 1.0, 41).unwrap();
        let values: Vec<f64> = grid.values().iter().map(|&w| 0.5 + 0.3 * w).collect();
        assert_eq!(zero_dip_depth(&grid.values(), &values, 0.5), 0.0);
    }

    #[test]
    fn zero_dip_depth_measures_a_central_sag() {
        let grid = OmegaGrid::new(-1.0, 1.0, 41).unwrap();
        let values: Vec<f64> =
            grid.values().iter().map(|&w| 1.0 - 0.2 * (-8.0 * w * w).exp()).collect();
        let depth = zero_dip_depth(&grid.values(), &values, 0.5);
        assert!(depth > 0.15, "depth {depth}");
    }

    #[test]
    fn zero_dip_depth_ignores_an_off_center_dip() {
        let grid = OmegaGrid::new(-1.0, 1.0, 41).unwrap();
        let values: Vec<f64> = grid
            .values()
            .iter()
            .map(|&w| 1.0 - 0.3 * (-60.0 * (w + 0.3) * (w + 0.3)).exp())
            .collect();
        let depth = zero_dip_depth(&grid.values(), &values, 0.5);
        assert!(depth < 0.01, "depth {depth}");
    }

    #[test]
    fn tracking_prefers_nearest_then_smallest() {
        let mk = |center: f64| DipFit {
            center,
            depth: 0.5,
            half_left: None,
            half_right: None,
            fwhm: None,
            shape: DipShape::Single,
            residual: 0.0,
            converged: true,
            raw_omega: center,
            raw_z0: 0.5,
        };
        let dips = vec![mk(-2.0), mk(1.0), mk(2.5)];
        assert_eq!(track_dip(&dips, 2.2).unwrap().center, 2.5);
        // -2.0 and 1.0 are equidistant from -0.5; the smaller magnitude wins.
        assert_eq!(track_dip(&dips, -0.5).unwrap().center, 1.0);
        assert!(track_dip(&[], 0.0).is_none());
    }

    #[test]
    fn sweep_is_deterministic_for_a_fixed_seed() {
        let cfg = SweepConfig {
            shots: Some(256),
            grid: OmegaGrid::new(1.5, 2.8, 14).unwrap(),
            seed: 11,
            ..SweepConfig::new(landau_zener(0.6, 0.9), OmegaGrid::new(1.5, 2.8, 14).unwrap())
        };
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        assert_eq!(a.z0, b.z0);
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn sweep_rejects_bad_settings() {
        let grid = OmegaGrid::new(-1.0, 1.0, 11).unwrap();
        let mut cfg = SweepConfig::new(landau_zener(0.6, 0.9), grid);
        cfg.expected_dips = 3;
        assert!(run_sweep(&cfg).is_err());
        cfg.expected_dips = 2;
        cfg.shots = Some(0);
        assert!(run_sweep(&cfg).is_err());
        cfg.shots = None;
        cfg.noise = Some(NoiseModel { p_depol: 1.5, trajectories: 10 });
        assert!(run_sweep(&cfg).is_err());
    }

    #[test]
    fn csv_has_one_row_per_point_and_a_header() {
        let grid = OmegaGrid::new(2.0, 2.4, 5).unwrap();
        let cfg = SweepConfig::new(landau_zener(0.6, 0.9), grid);
        let result = run_sweep(&cfg).unwrap();
        let csv = result.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "omega,z0,z0_smoothed");
        assert_eq!(lines.len(), 6);
        for line in &lines[1..] {
            assert_eq!(line.split(',').count(), 3);
        }
    }

    #[test]
    fn rms_checks_lengths() {
        assert!(rms(&[1.0], &[1.0, 2.0]).is_err());
        assert_abs_diff_eq!(rms(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0, epsilon = 0.0);
        assert_abs_diff_eq!(rms(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), (12.5f64).sqrt(),
            epsilon = 1e-12);
    }
}
