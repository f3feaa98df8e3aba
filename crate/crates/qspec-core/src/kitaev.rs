//! Kitaev-chain analysis: the two-site closed form, parity gap maps over
//! `(m, y)`, the m-sign consistency filter, and boundary fitting.
//!
//! Throughout, "gap" means the energy difference between the lowest even-
//! and lowest odd-parity levels; the phase boundary is where it closes.
//! Chains are built with the interior field tied to the interaction,
//! `mbar = z`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::exact_spectrum;
use crate::pauli::{kitaev_chain_couplings, KitaevCouplings, PauliHamiltonian};
use crate::sim::{derive_seed, TrotterOrder};
use crate::spectroscopy::{
    run_sweep, track_dip, DipFit, InitialState, NoiseModel, OmegaGrid, SweepConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParitySector {
    Even,
    Odd,
}

/// The four closed-form levels of the two-site chain. The `a` pair lives in
/// the odd-parity sector, the `b` pair in the even sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoSiteSpectrum {
    pub a_minus: f64,
    pub a_plus: f64,
    pub b_minus: f64,
    pub b_plus: f64,
}

impl TwoSiteSpectrum {
    /// Levels ascending; exact ties put the even level first.
    pub fn levels(&self) -> [(f64, ParitySector); 4] {
        let mut v = [
            (self.b_minus, ParitySector::Even),
            (self.b_plus, ParitySector::Even),
            (self.a_minus, ParitySector::Odd),
            (self.a_plus, ParitySector::Odd),
        ];
        v.sort_by(|x, y| x.0.total_cmp(&y.0));
        v
    }

    /// Lowest even level minus lowest odd level; its sign tracks which
    /// sector holds the ground state.
    pub fn signed_gap(&self) -> f64 {
        self.b_minus - self.a_minus
    }
}

/// Closed-form spectrum of the two-site chain:
/// `E_a± = -z ± (x+y)`, `E_b± = z ± sqrt(4m² + (x−y)²)`.
pub fn two_site_spectrum(m: f64, x: f64, y: f64, z: f64) -> TwoSiteSpectrum {
    let root = (4.0 * m * m + (x - y) * (x - y)).sqrt();
    TwoSiteSpectrum {
        a_minus: -z - (x + y),
        a_plus: -z + (x + y),
        b_minus: z - root,
        b_plus: z + root,
    }
}

/// The field strength at which the two lowest two-site levels cross:
/// `m = sqrt(z² + z(x+y) + xy)`. A negative radicand means the gap never
/// closes along the m axis.
pub fn zero_crossing_m(x: f64, y: f64, z: f64) -> Option<f64> {
    let radicand = z * z + z * (x + y) + x * y;
    if radicand < 0.0 {
        None
    } else {
        Some(radicand.sqrt())
    }
}

fn chain(sites: usize, x: f64, y: f64, z: f64, m: f64) -> Result<PauliHamiltonian> {
    kitaev_chain_couplings(sites, &KitaevCouplings { x, y, z, m, mbar: z })
}

/// Lowest even-parity level minus lowest odd-parity level of an L-site
/// chain, from dense diagonalization.
pub fn signed_gap(sites: usize, x: f64, y: f64, z: f64, m: f64) -> Result<f64> {
    let spectrum = exact_spectrum(&chain(sites, x, y, z, m)?)?;
    let even = spectrum.lowest_with_parity(1).ok_or_else(|| {
        Error::InvalidModel("no even-parity level labeled".into())
    })?;
    let odd = spectrum.lowest_with_parity(-1).ok_or_else(|| {
        Error::InvalidModel("no odd-parity level labeled".into())
    })?;
    Ok(even - odd)
}

/// Number of sign changes of the signed gap along a grid of m values.
pub fn count_gap_closings(
    sites: usize,
    x: f64,
    y: f64,
    z: f64,
    m_values: &[f64],
) -> Result<usize> {
    let mut count = 0;
    let mut last_sign = 0i8;
    for &m in m_values {
        let g = signed_gap(sites, x, y, z, m)?;
        let sign = if g.abs() < 1e-12 {
            0
        } else if g > 0.0 {
            1
        } else {
            -1
        };
        if sign != 0 {
            if last_sign != 0 && sign != last_sign {
                count += 1;
            }
            last_sign = sign;
        }
    }
    Ok(count)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapMapSource {
    ExactDiagonalization,
    SpectroscopicSim,
}

/// `|gap|` over an `(m, y)` grid at fixed `x`, `z`; `gap[i][j]` belongs to
/// `(m_axis[i], y_axis[j])`. Cells where no dip could be extracted are
/// `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapMap {
    pub m_axis: Vec<f64>,
    pub y_axis: Vec<f64>,
    pub gap: Vec<Vec<Option<f64>>>,
    pub source: GapMapSource,
    pub x: f64,
    pub z: f64,
    pub sites: usize,
}

impl GapMap {
    pub fn new(
        m_axis: Vec<f64>,
        y_axis: Vec<f64>,
        gap: Vec<Vec<Option<f64>>>,
        source: GapMapSource,
        x: f64,
        z: f64,
        sites: usize,
    ) -> Result<Self> {
        if gap.len() != m_axis.len() || gap.iter().any(|row| row.len() != y_axis.len()) {
            return Err(Error::GridMismatch(format!(
                "gap matrix shape does not match {}x{} axes",
                m_axis.len(),
                y_axis.len()
            )));
        }
        if gap.iter().flatten().flatten().any(|&g| !(g >= 0.0)) {
            return Err(Error::InvalidArgument("gap entries must be nonnegative".into()));
        }
        Ok(GapMap { m_axis, y_axis, gap, source, x, z, sites })
    }

    /// Matrix CSV: first row `m\y,<y values...>`, then one row per m value.
    /// Missing cells are left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m\\y");
        for y in &self.y_axis {
            out.push_str(&format!(",{y}"));
        }
        out.push('\n');
        for (i, m) in self.m_axis.iter().enumerate() {
            out.push_str(&format!("{m}"));
            for cell in &self.gap[i] {
                match cell {
                    Some(g) => out.push_str(&format!(",{g}")),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

/// Exact-diagonalization gap map with cells `|E_lowest-even − E_lowest-odd|`.
pub fn gap_map_exact(
    m_axis: &[f64],
    y_axis: &[f64],
    x: f64,
    z: f64,
    sites: usize,
) -> Result<GapMap> {
    let gap: Vec<Vec<Option<f64>>> = m_axis
        .par_iter()
        .map(|&m| {
            y_axis
                .iter()
                .map(|&y| signed_gap(sites, x, y, z, m).map(|g| Some(g.abs())))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    GapMap::new(
        m_axis.to_vec(),
        y_axis.to_vec(),
        gap,
        GapMapSource::ExactDiagonalization,
        x,
        z,
        sites,
    )
}

/// Per-cell sweep settings for spectroscopic gap maps; the Hamiltonian and
/// seed are filled in cell by cell.
///
/// Two candidate filters guard the per-cell dip selection. `tracking_floor`
/// drops dips with `|center|` below it: coarse Trotter steps grow a
/// spurious dip pinned to zero frequency, and without a floor the tracker
/// can latch onto it. `min_relative_depth` drops dips shallower than that
/// fraction of the cell's deepest dip: the finite evolution window rings,
/// and a deep dip's first side lobe (roughly a tenth of its depth) often
/// sits closer to zero than the dip itself. Either filter disabled at 0.
#[derive(Debug, Clone)]
pub struct SweepTemplate {
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
    pub tracking_floor: f64,
    pub min_relative_depth: f64,
}

impl SweepTemplate {
    fn to_config(&self, hamiltonian: PauliHamiltonian, seed: u64) -> SweepConfig {
        SweepConfig {
            hamiltonian,
            grid: self.grid,
            coupling: self.coupling,
            total_time: self.total_time,
            dt: self.dt,
            order: self.order,
            probed: self.probed,
            initial: self.initial,
            shots: self.shots,
            seed,
            expected_dips: self.expected_dips,
            noise: self.noise,
        }
    }
}

/// Spectroscopic gap map: one frequency sweep per cell, each cell reporting
/// the detected dip nearest zero frequency (above the template's tracking
/// floor). With the system prepared in its ground state every dip is an
/// absorption from level 0, so the nearest-zero dip is the smallest gap.
/// Cells whose sweep yields no usable dip are `None`.
pub fn gap_map_spectroscopic(
    m_axis: &[f64],
    y_axis: &[f64],
    x: f64,
    z: f64,
    sites: usize,
    template: &SweepTemplate,
) -> Result<GapMap> {
    let gap: Vec<Vec<Option<f64>>> = m_axis
        .par_iter()
        .enumerate()
        .map(|(mi, &m)| {
            let mut row = Vec::with_capacity(y_axis.len());
            for (yi, &y) in y_axis.iter().enumerate() {
                let h = chain(sites, x, y, z, m)?;
                let cell_seed =
                    derive_seed(template.seed, (mi * y_axis.len() + yi) as u64);
                let result = run_sweep(&template.to_config(h, cell_seed))?;
                let deepest =
                    result.dips.iter().map(|d| d.depth).fold(0.0, f64::max);
                let candidates: Vec<DipFit> = result
                    .dips
                    .into_iter()
                    .filter(|d| d.center.abs() >= template.tracking_floor)
                    .filter(|d| d.depth >= template.min_relative_depth * deepest)
                    .collect();
                match track_dip(&candidates, 0.0) {
                    Some(dip) => row.push(Some(dip.center.abs())),
                    None => row.push(None),
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    GapMap::new(
        m_axis.to_vec(),
        y_axis.to_vec(),
        gap,
        GapMapSource::SpectroscopicSim,
        x,
        z,
        sites,
    )
}

/// Which side of the m axis supplied a filtered cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MSide {
    Plus,
    Minus,
}

fn congruent(a: &GapMap, b: &GapMap) -> Result<()> {
    let axis_eq = |p: &[f64], q: &[f64]| {
        p.len() == q.len() && p.iter().zip(q).all(|(u, v)| (u - v).abs() < 1e-9)
    };
    if !axis_eq(&a.y_axis, &b.y_axis) {
        return Err(Error::GridMismatch("y axes differ".into()));
    }
    if a.m_axis.len() != b.m_axis.len()
        || !a
            .m_axis
            .iter()
            .zip(&b.m_axis)
            .all(|(p, q)| (p + q).abs() < 1e-9)
    {
        return Err(Error::GridMismatch("m axes are not mirror images".into()));
    }
    if a.sites != b.sites || (a.x - b.x).abs() > 1e-12 || (a.z - b.z).abs() > 1e-12 {
        return Err(Error::GridMismatch("maps were built at different parameters".into()));
    }
    Ok(())
}

/// Combines a map over `m > 0` with its mirror over `m < 0`, keeping the
/// smaller gap of each pair (gap estimates fail high, so the smaller value
/// is the more trustworthy one). A missing cell falls back to the other
/// side; provenance records the side used.
pub fn m_symmetry_filter(
    plus: &GapMap,
    minus: &GapMap,
) -> Result<(GapMap, Vec<Vec<Option<MSide>>>)> {
    congruent(plus, minus)?;
    let mut gap = Vec::with_capacity(plus.m_axis.len());
    let mut provenance = Vec::with_capacity(plus.m_axis.len());
    for i in 0..plus.m_axis.len() {
        let mut row = Vec::with_capacity(plus.y_axis.len());
        let mut prov = Vec::with_capacity(plus.y_axis.len());
        for j in 0..plus.y_axis.len() {
            let (g, side) = match (plus.gap[i][j], minus.gap[i][j]) {
                (Some(p), Some(q)) if q < p => (Some(q), Some(MSide::Minus)),
                (Some(p), _) => (Some(p), Some(MSide::Plus)),
                (None, Some(q)) => (Some(q), Some(MSide::Minus)),
                (None, None) => (None, None),
            };
            row.push(g);
            prov.push(side);
        }
        gap.push(row);
        provenance.push(prov);
    }
    let map = GapMap::new(
        plus.m_axis.clone(),
        plus.y_axis.clone(),
        gap,
        plus.source,
        plus.x,
        plus.z,
        plus.sites,
    )?;
    Ok((map, provenance))
}

/// Splits a map over a symmetric m axis into its two halves and filters
/// them; the result covers `m ≥ 0`.
pub fn fold_m_symmetry(map: &GapMap) -> Result<(GapMap, Vec<Vec<Option<MSide>>>)> {
    let mut nonneg: Vec<usize> = (0..map.m_axis.len())
        .filter(|&i| map.m_axis[i] >= -1e-12)
        .collect();
    nonneg.sort_by(|&a, &b| map.m_axis[a].total_cmp(&map.m_axis[b]));
    if nonneg.is_empty() {
        return Err(Error::GridMismatch("no m >= 0 entries to fold onto".into()));
    }
    let mirror: Vec<usize> = nonneg
        .iter()
        .map(|&i| {
            let target = -map.m_axis[i];
            (0..map.m_axis.len())
                .find(|&j| (map.m_axis[j] - target).abs() < 1e-9)
                .ok_or_else(|| {
                    Error::GridMismatch(format!(
                        "m axis has no partner for {}",
                        map.m_axis[i]
                    ))
                })
        })
        .collect::<Result<Vec<_>>>()?;

    let half = |idxs: &[usize], negate: bool| -> Result<GapMap> {
        GapMap::new(
            idxs.iter()
                .map(|&i| if negate { -map.m_axis[i] } else { map.m_axis[i] })
                .collect(),
            map.y_axis.clone(),
            idxs.iter().map(|&i| map.gap[i].clone()).collect(),
            map.source,
            map.x,
            map.z,
            map.sites,
        )
    };
    let plus = half(&nonneg, false)?;
    let minus_raw = half(&mirror, false)?;
    // Present the mirror half with axis values −m so congruence holds.
    let minus = GapMap { m_axis: plus.m_axis.iter().map(|m| -m).collect(), ..minus_raw };
    m_symmetry_filter(&plus, &minus)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RidgePoint {
    pub y: f64,
    pub m: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryFit {
    pub z_fit: f64,
    pub delta_z: f64,
    pub rms: f64,
    pub ridge: Vec<RidgePoint>,
}

impl BoundaryFit {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

/// Extracts the minimum-gap ridge of a map and fits the crossing curve
/// `m*(y) = sqrt(z² + z(x+y) + xy)` with z free.
///
/// Per y column, the smallest-gap cell and its two m neighbors define a
/// parabola whose vertex gives a sub-grid ridge estimate; columns whose
/// minimum sits on the axis edge, has a missing neighbor, or no upward
/// curvature are skipped. The fit minimizes the summed squared difference
/// between `|m_ridge|` and the model curve; `delta_z` is relative to the
/// map's own z and `rms` is the residual at the fitted z.
pub fn fit_boundary_z(map: &GapMap, y_range: Option<(f64, f64)>) -> Result<BoundaryFit> {
    let mut ridge = Vec::new();
    for (j, &y) in map.y_axis.iter().enumerate() {
        if let Some((lo, hi)) = y_range {
            if y < lo || y > hi {
                continue;
            }
        }
        let column: Vec<Option<f64>> = map.gap.iter().map(|row| row[j]).collect();
        let min_i = match column
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.map(|v| (i, v)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
        {
            Some((i, _)) => i,
            None => continue,
        };
        if min_i == 0 || min_i + 1 == map.m_axis.len() {
            continue;
        }
        let (Some(g_lo), Some(g0), Some(g_hi)) =
            (column[min_i - 1], column[min_i], column[min_i + 1])
        else {
            continue;
        };
        let (x1, x2, x3) = (map.m_axis[min_i - 1], map.m_axis[min_i], map.m_axis[min_i + 1]);
        let denom = (x1 - x2) * (x1 - x3) * (x2 - x3);
        let a = (x3 * (g0 - g_lo) + x2 * (g_lo - g_hi) + x1 * (g_hi - g0)) / denom;
        if a <= 0.0 {
            continue;
        }
        let b = (x3 * x3 * (g_lo - g0) + x2 * x2 * (g_hi - g_lo) + x1 * x1 * (g0 - g_hi))
            / denom;
        let vertex = (-b / (2.0 * a)).clamp(x1, x3);
        ridge.push(RidgePoint { y, m: vertex });
    }
    if ridge.len() < 3 {
        return Err(Error::NoRidge(format!(
            "only {} usable ridge columns; need at least 3",
            ridge.len()
        )));
    }

    let objective = |z: f64| -> f64 {
        ridge
            .iter()
            .map(|p| {
                let model = zero_crossing_m(map.x, p.y, z).unwrap_or(0.0);
                (model - p.m.abs()).powi(2)
            })
            .sum()
    };

    let (z_lo, z_hi, coarse) = (0.0, 4.0, 401);
    let step = (z_hi - z_lo) / (coarse - 1) as f64;
    let mut best = (z_lo, objective(z_lo));
    for k in 1..coarse {
        let z = z_lo + step * k as f64;
        let val = objective(z);
        if val < best.1 {
            best = (z, val);
        }
    }
    let (mut a, mut b) = ((best.0 - step).max(z_lo), (best.0 + step).min(z_hi));
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - phi * (b - a), a + phi * (b - a));
    let (mut fc, mut fd) = (objective(c), objective(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = objective(d);
        }
    }
    let z_fit = (a + b) / 2.0;
    Ok(BoundaryFit {
        z_fit,
        delta_z: z_fit - map.z,
        rms: (objective(z_fit) / ridge.len() as f64).sqrt(),
        ridge,
    })
}
