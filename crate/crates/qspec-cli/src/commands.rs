use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use qspec_core::exact::{exact_spectrum, to_dense, Spectrum};
use qspec_core::kitaev::{
    fit_boundary_z, fold_m_symmetry, gap_map_exact, gap_map_spectroscopic, GapMap, SweepTemplate,
};
use qspec_core::oracles::{flip_probability, perturbative_z0, TwoLevelParams};
use qspec_core::resources::{count_qpe, count_spectroscopic, Decomposition, GateErrorModel};
use qspec_core::sim::{
    apply, build_resonance_circuit, derive_seed, evolve_exact, expectation_z,
    resonance_hamiltonian, steps_for, StateVector, TrotterOrder,
};
use qspec_core::spectroscopy::{run_sweep, track_dip, InitialState, SweepConfig};
use qspec_core::Error;

use crate::config::{
    build_model, config_err, scan_target, scan_values, Experiment, Failure, MapMode, MapSection,
    ScanTarget,
};

pub fn sweep(exp: &Experiment, out: &Path) -> Result<(), Failure> {
    let cfg = exp.sweep_config()?;
    ensure_dir(out)?;
    let result = run_sweep(&cfg)?;
    write_file(&out.join("sweep.csv"), &result.to_csv())?;
    write_file(&out.join("sweep_summary.json"), &result.summary_json()?)?;
    Ok(())
}

#[derive(Serialize)]
struct TrackedPoint {
    value: f64,
    center: Option<f64>,
    depth: Option<f64>,
    fwhm: Option<f64>,
}

#[derive(Serialize)]
struct TrackedPath<'a> {
    parameter: &'a str,
    path: Vec<TrackedPoint>,
}

pub fn scan(exp: &Experiment, out: &Path) -> Result<(), Failure> {
    let section = exp
        .raw
        .scan
        .as_ref()
        .ok_or_else(|| config_err("scan needs a [scan] section"))?
        .clone();
    let values = scan_values(&section)?;
    let target = scan_target(&exp.raw.model, &section.parameter)?;
    let base_seed = exp.seed();
    let configs: Vec<SweepConfig> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut cfg = match &target {
                ScanTarget::Model(set) => {
                    let mut model = exp.raw.model.clone();
                    set(&mut model, v);
                    exp.sweep_config_for(build_model(&model)?)?
                }
                ScanTarget::Sweep(set) => {
                    let mut cfg = exp.sweep_config()?;
                    set(&mut cfg, v);
                    cfg
                }
            };
            cfg.seed = derive_seed(base_seed, i as u64);
            Ok(cfg)
        })
        .collect::<Result<_, Failure>>()?;
    ensure_dir(out)?;

    let mut minima = String::from("index,value,center,depth,fwhm\n");
    let mut previous = section.track_from.unwrap_or(0.0);
    let mut path = Vec::with_capacity(values.len());
    for (i, (&v, cfg)) in values.iter().zip(&configs).enumerate() {
        let result = run_sweep(cfg)?;
        write_file(&out.join(format!("sweep_{i:03}.csv")), &result.to_csv())?;
        for dip in &result.dips {
            let fwhm = dip.fwhm.map(|w| w.to_string()).unwrap_or_default();
            minima.push_str(&format!("{i},{v},{},{},{fwhm}\n", dip.center, dip.depth));
        }
        path.push(match track_dip(&result.dips, previous) {
            Some(dip) => {
                previous = dip.center;
                TrackedPoint {
                    value: v,
                    center: Some(dip.center),
                    depth: Some(dip.depth),
                    fwhm: dip.fwhm,
                }
            }
            None => TrackedPoint { value: v, center: None, depth: None, fwhm: None },
        });
    }
    write_file(&out.join("scan_minima.csv"), &minima)?;
    if section.track.unwrap_or(false) {
        let tracked = TrackedPath { parameter: &section.parameter, path };
        write_file(&out.join("tracked_path.json"), &to_json(&tracked)?)?;
    }
    Ok(())
}

pub fn phase_map(exp: &Experiment, out: &Path) -> Result<(), Failure> {
    let section = exp
        .raw
        .map
        .as_ref()
        .ok_or_else(|| config_err("phase-map needs a [map] section"))?
        .clone();
    let (x, z) = exp.map_geometry()?;
    let sites = section.sites.clone().unwrap_or_else(|| vec![2]);
    if sites.is_empty() {
        return Err(config_err("[map] sites must not be empty"));
    }
    if let Some(&l) = sites.iter().find(|&&l| l < 2) {
        return Err(config_err(format!("[map] chains need at least 2 sites, got {l}")));
    }
    let m_axis = axis(
        section.m_start.unwrap_or(-2.0),
        section.m_stop.unwrap_or(2.0),
        section.m_points.unwrap_or(21),
        "m",
    )?;
    let y_axis = axis(
        section.y_start.unwrap_or(0.2),
        section.y_stop.unwrap_or(1.8),
        section.y_points.unwrap_or(21),
        "y",
    )?;
    let exact_wanted = matches!(section.mode, MapMode::Exact | MapMode::Both);
    let spectroscopic_template = match section.mode {
        MapMode::Spectroscopic | MapMode::Both => Some(sweep_template(exp, &section)?),
        MapMode::Exact => None,
    };
    let fit_range = match (section.fit_y_start, section.fit_y_stop) {
        (None, None) => None,
        (Some(lo), Some(hi)) => Some((lo, hi)),
        _ => return Err(config_err("[map] fit_y_start and fit_y_stop must be given together")),
    };
    ensure_dir(out)?;

    for &l in &sites {
        let mut fit_source: Option<GapMap> = None;
        if exact_wanted {
            let map = gap_map_exact(&m_axis, &y_axis, x, z, l)?;
            write_map(out, "map_exact", l, &map)?;
            fit_source = Some(map);
        }
        if let Some(template) = &spectroscopic_template {
            let map = gap_map_spectroscopic(&m_axis, &y_axis, x, z, l, template)?;
            write_map(out, "map_spectroscopic", l, &map)?;
            fit_source = Some(map);
        }
        let mut map = fit_source.expect("mode always selects at least one map");
        if section.fold.unwrap_or(false) {
            let (folded, _) = fold_m_symmetry(&map)?;
            write_map(out, "map_folded", l, &folded)?;
            map = folded;
        }
        if section.fit.unwrap_or(false) {
            let fit = fit_boundary_z(&map, fit_range)?;
            write_file(&out.join(format!("boundary_fit_L{l}.json")), &fit.to_json()?)?;
        }
    }
    Ok(())
}

/// Per-cell sweep settings for spectroscopic maps come from [sweep] plus the
/// two candidate filters in [map]; the m and y entries of [model] are unused
/// because the map grid supplies them cell by cell.
fn sweep_template(exp: &Experiment, section: &MapSection) -> Result<SweepTemplate, Failure> {
    let placeholder = qspec_core::pauli::landau_zener(0.0, 0.0);
    let cfg = exp.sweep_config_for(placeholder)?;
    Ok(SweepTemplate {
        grid: cfg.grid,
        coupling: cfg.coupling,
        total_time: cfg.total_time,
        dt: cfg.dt,
        order: cfg.order,
        probed: cfg.probed,
        initial: cfg.initial,
        shots: cfg.shots,
        seed: cfg.seed,
        expected_dips: cfg.expected_dips,
        noise: cfg.noise,
        tracking_floor: section.tracking_floor.unwrap_or(0.0),
        min_relative_depth: section.min_relative_depth.unwrap_or(0.0),
    })
}

fn write_map(out: &Path, stem: &str, sites: usize, map: &GapMap) -> Result<(), Failure> {
    write_file(&out.join(format!("{stem}_L{sites}.csv")), &map.to_csv())?;
    write_file(&out.join(format!("{stem}_L{sites}.json")), &map.to_json()?)?;
    Ok(())
}

#[derive(Serialize)]
struct ConvergenceOrder {
    order: u8,
    state_errors: Vec<f64>,
    slope: f64,
}

#[derive(Serialize)]
struct Convergence {
    omega: f64,
    total_time: f64,
    dts: Vec<f64>,
    orders: Vec<ConvergenceOrder>,
}

/// Writes the four-way probe comparison and the Trotter convergence study.
///
/// Shot sampling and noise are ignored here: every column reports an exact
/// expectation value. The perturbative column is blank inside its pole
/// guard, and the two-level column exists only for one-qubit systems.
pub fn oracle(exp: &Experiment, out: &Path) -> Result<(), Failure> {
    let mut cfg = exp.sweep_config()?;
    cfg.shots = None;
    cfg.noise = None;
    let section = exp.raw.oracle.clone();
    let dts = section
        .as_ref()
        .and_then(|s| s.dts.clone())
        .unwrap_or_else(|| vec![0.4, 0.2, 0.1, 0.05]);
    if dts.is_empty() {
        return Err(config_err("[oracle] dts must not be empty"));
    }
    if let Some(&bad) = dts.iter().find(|&&dt| !(dt > 0.0 && dt.is_finite())) {
        return Err(config_err(format!("[oracle] dts must be positive, got {bad}")));
    }
    let conv_omega = section.as_ref().and_then(|s| s.convergence_omega).unwrap_or(1.0);
    let conv_time = section.as_ref().and_then(|s| s.convergence_time).unwrap_or(2.0);
    ensure_dir(out)?;

    let system = cfg.hamiltonian.clone();
    let spectrum = exact_spectrum(&system)?;
    let system_init = initial_system_state(cfg.initial, system.n_qubits(), &spectrum)?;
    let alphas = eigenbasis_amplitudes(&spectrum, &system_init);
    let full_init = StateVector::with_probe_ground(&system_init);

    let swept = run_sweep(&cfg)?;
    let mut csv = String::from("omega,simulated,exact,perturbative,two_level\n");
    for (i, &omega) in swept.omegas.iter().enumerate() {
        let h_res = resonance_hamiltonian(&system, omega, cfg.coupling, cfg.probed)?;
        let evolved = evolve_exact(&to_dense(&h_res)?, cfg.total_time, &full_init)?;
        let exact_z = expectation_z(&evolved, 0);
        let perturbative = match perturbative_z0(
            &spectrum,
            &alphas,
            cfg.probed,
            cfg.coupling,
            cfg.total_time,
            omega,
        ) {
            Ok(v) => v.to_string(),
            Err(Error::PoleProximity { .. }) => String::new(),
            Err(e) => return Err(e.into()),
        };
        let two_level = if system.n_qubits() == 1 {
            let params = TwoLevelParams {
                d: spectrum.energies()[1] - spectrum.energies()[0],
                c: cfg.coupling,
                t: cfg.total_time,
                omega,
            };
            (1.0 - 2.0 * flip_probability(params, alphas[0], alphas[1])).to_string()
        } else {
            String::new()
        };
        csv.push_str(&format!("{omega},{},{exact_z},{perturbative},{two_level}\n", swept.z0[i]));
    }
    write_file(&out.join("oracle_comparison.csv"), &csv)?;

    let h_conv = resonance_hamiltonian(&system, conv_omega, cfg.coupling, cfg.probed)?;
    let reference = evolve_exact(&to_dense(&h_conv)?, conv_time, &full_init)?;
    let mut orders = Vec::new();
    for (label, order) in [(1u8, TrotterOrder::First), (2, TrotterOrder::Second)] {
        let mut effective_dts = Vec::with_capacity(dts.len());
        let mut state_errors = Vec::with_capacity(dts.len());
        for &dt in &dts {
            let (n_steps, dt_eff) = steps_for(conv_time, dt)?;
            let circuit = build_resonance_circuit(
                &system, conv_omega, cfg.coupling, dt_eff, n_steps, order, cfg.probed,
            )?;
            let state = apply(&circuit, &full_init)?;
            effective_dts.push(dt_eff);
            state_errors.push(l2_distance(&state, &reference));
        }
        let slope = log_log_slope(&effective_dts, &state_errors)?;
        orders.push(ConvergenceOrder { order: label, state_errors, slope });
    }
    let convergence = Convergence { omega: conv_omega, total_time: conv_time, dts, orders };
    write_file(&out.join("convergence.json"), &to_json(&convergence)?)?;
    Ok(())
}

#[derive(Serialize)]
struct ResourcesOut {
    qpe: qspec_core::resources::ResourceReport,
    spectroscopic_cnot_pair: qspec_core::resources::ResourceReport,
    spectroscopic_native_zx: qspec_core::resources::ResourceReport,
    qpe_to_cnot_pair_two_qubit_ratio: f64,
}

pub fn resources(exp: &Experiment, out: &Path) -> Result<(), Failure> {
    let section = exp
        .raw
        .resources
        .as_ref()
        .ok_or_else(|| config_err("resources needs a [resources] section"))?;
    let h = exp.model()?;
    let cfg = exp.sweep_config()?;
    let model_path = resolve_against(&exp.dir, &section.error_model);
    let error_model = GateErrorModel::from_file(&model_path).map_err(|e| {
        config_err(format!("error model {}: {e}", model_path.display()))
    })?;
    let precision = section.qpe_precision.unwrap_or(3);
    let (n_steps, dt_eff) = steps_for(cfg.total_time, cfg.dt)?;
    ensure_dir(out)?;

    let qpe = count_qpe(&h, precision, n_steps)?.scored(&error_model);
    let cnot_pair =
        count_spectroscopic(&h, cfg.coupling, dt_eff, n_steps, cfg.order, Decomposition::CnotPair)?
            .scored(&error_model);
    let native_zx =
        count_spectroscopic(&h, cfg.coupling, dt_eff, n_steps, cfg.order, Decomposition::NativeZx)?
            .scored(&error_model);
    let ratio = qpe.two_qubit_gates as f64 / cnot_pair.two_qubit_gates as f64;
    let report = ResourcesOut {
        qpe,
        spectroscopic_cnot_pair: cnot_pair,
        spectroscopic_native_zx: native_zx,
        qpe_to_cnot_pair_two_qubit_ratio: ratio,
    };
    write_file(&out.join("resources.json"), &to_json(&report)?)?;
    Ok(())
}

fn initial_system_state(
    initial: InitialState,
    n_qubits: usize,
    spectrum: &Spectrum,
) -> Result<StateVector, Failure> {
    let state = match initial {
        InitialState::Zeros => StateVector::zero_state(n_qubits),
        InitialState::Basis(index) => StateVector::basis_state(n_qubits, index)?,
        InitialState::Eigenstate(k) => StateVector::from_eigenstate(spectrum, k)?,
    };
    Ok(state)
}

fn eigenbasis_amplitudes(spectrum: &Spectrum, state: &StateVector) -> Vec<Complex64> {
    let states = spectrum.states();
    let amps = state.amplitudes();
    (0..states.ncols())
        .map(|n| (0..amps.len()).map(|i| states[(i, n)].conj() * amps[i]).sum())
        .collect()
}

fn l2_distance(a: &StateVector, b: &StateVector) -> f64 {
    a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64, Failure> {
    if xs.len() < 2 {
        return Err(config_err("[oracle] need at least two dts to fit a slope"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.max(1e-300).ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if var == 0.0 {
        return Err(config_err("[oracle] dts must not all be equal"));
    }
    Ok(cov / var)
}

fn axis(start: f64, stop: f64, points: usize, name: &str) -> Result<Vec<f64>, Failure> {
    if points == 0 {
        return Err(config_err(format!("[map] {name}_points must be positive")));
    }
    if points == 1 {
        return Ok(vec![start]);
    }
    let step = (stop - start) / (points - 1) as f64;
    Ok((0..points).map(|i| start + step * i as f64).collect())
}

fn resolve_against(dir: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

fn ensure_dir(out: &Path) -> Result<(), Failure> {
    fs::create_dir_all(out)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", out.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents)
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))
}
