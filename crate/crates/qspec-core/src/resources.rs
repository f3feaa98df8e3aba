//! Gate-count and infidelity accounting for the probe circuits versus
//! textbook phase estimation.
//!
//! Counts are analytic, not transpiled: rotations are counted and Clifford
//! basis changes are not, so the numbers rank protocols rather than predict
//! a specific backend. Two decompositions of a two-qubit Pauli exponential
//! are modeled: a Z-rotation sandwiched by two CNOTs, or a single
//! native scaled gate whose error grows linearly with the angle.

use serde::Serialize;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pauli::PauliHamiltonian;
use crate::sim::TrotterOrder;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decomposition {
    CnotPair,
    NativeZx,
}

/// Per-gate error rates. The scaled-gate rule for the native decomposition
/// is `eps(theta) = max(zx_floor, |theta|/pi * two_qubit)` with the angle
/// folded into `[0, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GateErrorModel {
    pub two_qubit: f64,
    pub single_qubit: f64,
    pub measurement: f64,
    pub zx_floor: f64,
}

impl GateErrorModel {
    pub fn new(two_qubit: f64, single_qubit: f64, measurement: f64, zx_floor: f64) -> Result<Self> {
        let model = GateErrorModel { two_qubit, single_qubit, measurement, zx_floor };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        for (name, rate) in [
            ("two_qubit", self.two_qubit),
            ("single_qubit", self.single_qubit),
            ("measurement", self.measurement),
            ("zx_floor", self.zx_floor),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::ErrorModel(format!("{name} = {rate} outside [0, 1]")));
            }
        }
        if self.zx_floor > self.two_qubit {
            return Err(Error::ErrorModel(format!(
                "zx_floor {} exceeds two_qubit {}",
                self.zx_floor, self.two_qubit
            )));
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment. All four keys are
    /// required and unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut two_qubit = None;
        let mut single_qubit = None;
        let mut measurement = None;
        let mut zx_floor = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::ErrorModel(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    lineno + 1
                )));
            };
            let value: f64 = value.trim().parse().map_err(|_| {
                Error::ErrorModel(format!("line {}: `{}` is not a number", lineno + 1, value.trim()))
            })?;
            let slot = match key.trim() {
                "two_qubit" => &mut two_qubit,
                "single_qubit" => &mut single_qubit,
                "measurement" => &mut measurement,
                "zx_floor" => &mut zx_floor,
                other => {
                    return Err(Error::ErrorModel(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            };
            if slot.replace(value).is_some() {
                return Err(Error::ErrorModel(format!(
                    "line {}: duplicate key `{}`",
                    lineno + 1,
                    key.trim()
                )));
            }
        }
        let require = |name: &str, v: Option<f64>| {
            v.ok_or_else(|| Error::ErrorModel(format!("missing key `{name}`")))
        };
        GateErrorModel::new(
            require("two_qubit", two_qubit)?,
            require("single_qubit", single_qubit)?,
            require("measurement", measurement)?,
            require("zx_floor", zx_floor)?,
        )
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        GateErrorModel::parse(&std::fs::read_to_string(path)?)
    }
}

/// Gate totals for one circuit family, plus the angle of every two-qubit
/// Pauli exponential (needed by the scaled-gate error rule).
#[derive(Debug, Clone, Serialize)]
pub struct ResourceReport {
    pub label: String,
    pub n_qubits: usize,
    pub two_qubit_gates: usize,
    pub single_qubit_gates: usize,
    pub measurements: usize,
    pub decomposition: Decomposition,
    pub infidelity: Option<f64>,
    #[serde(skip)]
    pub two_qubit_angles: Vec<f64>,
}

impl ResourceReport {
    pub fn scored(mut self, model: &GateErrorModel) -> ResourceReport {
        self.infidelity = Some(infidelity_score(&self, model));
        self
    }
}

fn term_profile(h: &PauliHamiltonian) -> Result<(Vec<f64>, usize)> {
    let mut weight2_coeffs = Vec::new();
    let mut weight1 = 0usize;
    for (c, s) in h.terms() {
        match s.weight() {
            0 => {}
            1 => weight1 += 1,
            2 => weight2_coeffs.push(*c),
            w => {
                return Err(Error::InvalidModel(format!(
                    "term {} has weight {w}; the circuit model covers weights 1 and 2",
                    s.label()
                )))
            }
        }
    }
    Ok((weight2_coeffs, weight1))
}

/// Resource count for the Trotterized probe circuit: per first-order step,
/// one exponential per system term plus the probe rotation and the
/// coupling; the second-order splitting doubles every count at half the
/// angle.
pub fn count_spectroscopic(
    h: &PauliHamiltonian,
    coupling: f64,
    dt: f64,
    n_steps: usize,
    order: TrotterOrder,
    decomposition: Decomposition,
) -> Result<ResourceReport> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("need at least one step".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("step length must be positive, got {dt}")));
    }
    let (weight2_coeffs, weight1) = term_profile(h)?;

    let (passes, angle_scale) = match order {
        TrotterOrder::First => (1usize, 1.0),
        TrotterOrder::Second => (2usize, 0.5),
    };
    let mut step_angles: Vec<f64> = weight2_coeffs
        .iter()
        .map(|c| (2.0 * c * dt * angle_scale).abs())
        .collect();
    step_angles.push((2.0 * coupling * dt * angle_scale).abs());
    let singles_per_pass = weight1 + 1;

    let mut two_qubit_angles = Vec::with_capacity(step_angles.len() * passes * n_steps);
    for _ in 0..n_steps * passes {
        two_qubit_angles.extend_from_slice(&step_angles);
    }
    let exponentials = two_qubit_angles.len();
    let (two_qubit_gates, sandwich_rotations) = match decomposition {
        Decomposition::CnotPair => (2 * exponentials, exponentials),
        Decomposition::NativeZx => (exponentials, 0),
    };

    Ok(ResourceReport {
        label: format!("spectroscopic-{}", match decomposition {
            Decomposition::CnotPair => "cnot-pair",
            Decomposition::NativeZx => "native-zx",
        }),
        n_qubits: h.n_qubits() + 1,
        two_qubit_gates,
        single_qubit_gates: singles_per_pass * passes * n_steps + sandwich_rotations,
        measurements: 1,
        decomposition,
        infidelity: None,
        two_qubit_angles,
    })
}

/// Resource count for textbook phase estimation over the same system:
/// `m` ancillas control `sum_k n_steps * 2^(k-1)` evolution steps, each
/// controlled weight-w exponential costing `2w` CNOTs, plus the
/// `m(m-1)/2` two-qubit gates of the inverse Fourier transform.
pub fn count_qpe(h: &PauliHamiltonian, m_precision: usize, n_steps: usize) -> Result<ResourceReport> {
    if m_precision == 0 {
        return Err(Error::InvalidArgument("need at least one precision qubit".into()));
    }
    if n_steps == 0 {
        return Err(Error::InvalidArgument("need at least one step".into()));
    }
    let mut cnots_per_step = 0usize;
    let mut rotations_per_step = 0usize;
    for (_, s) in h.terms() {
        let w = s.weight();
        if w == 0 {
            continue;
        }
        cnots_per_step += 2 * w;
        rotations_per_step += 1;
    }
    let controlled_steps = n_steps * ((1usize << m_precision) - 1);
    let qft_two_qubit = m_precision * (m_precision - 1) / 2;

    Ok(ResourceReport {
        label: "qpe".into(),
        n_qubits: h.n_qubits() + m_precision,
        two_qubit_gates: controlled_steps * cnots_per_step + qft_two_qubit,
        single_qubit_gates: controlled_steps * rotations_per_step + 2 * m_precision,
        measurements: m_precision,
        decomposition: Decomposition::CnotPair,
        infidelity: None,
        two_qubit_angles: Vec::new(),
    })
}

fn folded_angle(theta: f64) -> f64 {
    let wrapped = theta.abs().rem_euclid(2.0 * std::f64::consts::PI);
    if wrapped > std::f64::consts::PI {
        2.0 * std::f64::consts::PI - wrapped
    } else {
        wrapped
    }
}

/// `1 - prod(1 - eps_i)` over every counted gate and measurement.
pub fn infidelity_score(report: &ResourceReport, model: &GateErrorModel) -> f64 {
    let mut log_success = 0.0f64;
    let mut saw_certain_failure = false;
    let mut push = |eps: f64, count: usize| {
        if count == 0 {
            return;
        }
        if eps >= 1.0 {
            saw_certain_failure = true;
        } else {
            log_success += (1.0 - eps).ln() * count as f64;
        }
    };
    match report.decomposition {
        Decomposition::CnotPair => push(model.two_qubit, report.two_qubit_gates),
        Decomposition::NativeZx => {
            for &theta in &report.two_qubit_angles {
                let eps = (folded_angle(theta) / std::f64::consts::PI * model.two_qubit)
                    .max(model.zx_floor);
                push(eps, 1);
            }
        }
    }
    push(model.single_qubit, report.single_qubit_gates);
    push(model.measurement, report.measurements);
    if saw_certain_failure {
        1.0
    } else {
        1.0 - log_success.exp()
    }
}
