use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use qspec_core::pauli::{kitaev_chain_couplings, landau_zener, KitaevCouplings, PauliHamiltonian};
use qspec_core::sim::TrotterOrder;
use qspec_core::spectroscopy::{InitialState, NoiseModel, OmegaGrid, SweepConfig};

/// Failures split by who has to fix them: `Config` means the experiment
/// description is wrong (exit 2), `Runtime` means execution failed on a
/// valid description (exit 3).
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Runtime(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<qspec_core::Error> for Failure {
    fn from(e: qspec_core::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

pub fn config_err(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub seed: Option<u64>,
    pub model: ModelSection,
    pub sweep: Option<SweepSection>,
    pub scan: Option<ScanSection>,
    pub map: Option<MapSection>,
    pub oracle: Option<OracleSection>,
    pub resources: Option<ResourcesSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    LandauZener,
    Kitaev,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub sites: Option<usize>,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub z: Option<f64>,
    pub m: Option<f64>,
    pub mbar: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub omega_start: f64,
    pub omega_stop: f64,
    pub points: usize,
    pub coupling: Option<f64>,
    pub total_time: Option<f64>,
    pub dt: Option<f64>,
    pub order: Option<u8>,
    pub probed: Option<usize>,
    pub initial: Option<String>,
    pub expected_dips: Option<usize>,
    pub shots: Option<u64>,
    pub noise_p: Option<f64>,
    pub trajectories: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub parameter: String,
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
    pub track: Option<bool>,
    pub track_from: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapMode {
    Exact,
    Spectroscopic,
    Both,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSection {
    pub mode: MapMode,
    pub sites: Option<Vec<usize>>,
    pub m_start: Option<f64>,
    pub m_stop: Option<f64>,
    pub m_points: Option<usize>,
    pub y_start: Option<f64>,
    pub y_stop: Option<f64>,
    pub y_points: Option<usize>,
    pub fold: Option<bool>,
    pub fit: Option<bool>,
    pub fit_y_start: Option<f64>,
    pub fit_y_stop: Option<f64>,
    pub tracking_floor: Option<f64>,
    pub min_relative_depth: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub dts: Option<Vec<f64>>,
    pub convergence_omega: Option<f64>,
    pub convergence_time: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourcesSection {
    pub error_model: String,
    pub qpe_precision: Option<usize>,
}

/// A parsed config together with where it came from, so relative paths
/// inside it (the error-model file) resolve against the config location.
pub struct Experiment {
    pub raw: RawConfig,
    pub dir: PathBuf,
}

pub fn load(path: &Path) -> Result<Experiment, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    let raw: RawConfig = toml::from_str(&text)
        .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let dir = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    Ok(Experiment { raw, dir })
}

impl Experiment {
    /// Applies command-line overrides onto the parsed file, then runs the
    /// checks that need the merged view (a stochastic run must carry an
    /// explicit seed, or reruns could not reproduce it).
    pub fn apply_overrides(
        &mut self,
        seed: Option<u64>,
        shots: Option<u64>,
        noise: Option<f64>,
    ) -> Result<(), Failure> {
        if let Some(s) = seed {
            self.raw.seed = Some(s);
        }
        let sweep = self.raw.sweep.as_mut();
        if let Some(n) = shots {
            match sweep {
                Some(s) => s.shots = Some(n),
                None => return Err(config_err("--shots given but the config has no [sweep]")),
            }
        }
        if let Some(p) = noise {
            match self.raw.sweep.as_mut() {
                Some(s) => s.noise_p = Some(p),
                None => return Err(config_err("--noise given but the config has no [sweep]")),
            }
        }
        if let Some(s) = &self.raw.sweep {
            let stochastic = matches!(s.shots, Some(n) if n > 0)
                || matches!(s.noise_p, Some(p) if p > 0.0);
            if stochastic && self.raw.seed.is_none() {
                return Err(config_err(
                    "shots or noise requested without a seed; add `seed = ...` or pass --seed",
                ));
            }
            if s.shots == Some(0) {
                return Err(config_err(
                    "shots must be at least 1; omit the field for exact expectation values",
                ));
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.raw.seed.unwrap_or(0)
    }

    pub fn sweep_section(&self) -> Result<&SweepSection, Failure> {
        self.raw
            .sweep
            .as_ref()
            .ok_or_else(|| config_err("this command needs a [sweep] section"))
    }

    /// Builds the system Hamiltonian for commands that evolve the model as
    /// configured (sweep, scan, oracle, resources).
    pub fn model(&self) -> Result<PauliHamiltonian, Failure> {
        build_model(&self.raw.model)
    }

    /// Map commands vary m and y per cell, so the model section only
    /// contributes the chain geometry and the fixed couplings.
    pub fn map_geometry(&self) -> Result<(f64, f64), Failure> {
        let m = &self.raw.model;
        if m.kind != ModelKind::Kitaev {
            return Err(config_err("phase maps are defined for the kitaev model only"));
        }
        let x = m.x.ok_or_else(|| config_err("[model] x is required for phase maps"))?;
        let z = m.z.ok_or_else(|| config_err("[model] z is required for phase maps"))?;
        Ok((x, z))
    }

    pub fn sweep_config(&self) -> Result<SweepConfig, Failure> {
        let h = self.model()?;
        self.sweep_config_for(h)
    }

    pub fn sweep_config_for(&self, h: PauliHamiltonian) -> Result<SweepConfig, Failure> {
        let s = self.sweep_section()?;
        let grid = OmegaGrid::new(s.omega_start, s.omega_stop, s.points)
            .map_err(|e| config_err(e.to_string()))?;
        let mut cfg = SweepConfig::new(h, grid);
        if let Some(c) = s.coupling {
            cfg.coupling = c;
        }
        if let Some(t) = s.total_time {
            cfg.total_time = t;
        }
        if let Some(dt) = s.dt {
            cfg.dt = dt;
        }
        if let Some(o) = s.order {
            cfg.order = parse_order(o)?;
        }
        if let Some(p) = s.probed {
            cfg.probed = p;
        }
        if let Some(init) = &s.initial {
            cfg.initial = parse_initial(init)?;
        }
        if let Some(n) = s.expected_dips {
            cfg.expected_dips = n;
        }
        cfg.shots = s.shots;
        cfg.seed = self.seed();
        cfg.noise = match s.noise_p {
            Some(p) if !(0.0..=1.0).contains(&p) => {
                return Err(config_err(format!("[sweep] noise_p must lie in [0, 1], got {p}")))
            }
            Some(p) if p > 0.0 => Some(NoiseModel {
                p_depol: p,
                trajectories: s.trajectories.unwrap_or(100),
            }),
            _ => None,
        };
        if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
            return Err(config_err(format!("[sweep] dt must be positive, got {}", cfg.dt)));
        }
        if !(cfg.total_time > 0.0 && cfg.total_time.is_finite()) {
            return Err(config_err(format!(
                "[sweep] total_time must be positive, got {}",
                cfg.total_time
            )));
        }
        Ok(cfg)
    }
}

pub fn parse_order(order: u8) -> Result<TrotterOrder, Failure> {
    match order {
        1 => Ok(TrotterOrder::First),
        2 => Ok(TrotterOrder::Second),
        other => Err(config_err(format!("order must be 1 or 2, got {other}"))),
    }
}

pub fn parse_initial(text: &str) -> Result<InitialState, Failure> {
    if text == "zeros" {
        return Ok(InitialState::Zeros);
    }
    if let Some(k) = text.strip_prefix("basis:") {
        let k = k
            .parse()
            .map_err(|_| config_err(format!("bad basis index in initial '{text}'")))?;
        return Ok(InitialState::Basis(k));
    }
    if let Some(k) = text.strip_prefix("eigenstate:") {
        let k = k
            .parse()
            .map_err(|_| config_err(format!("bad eigenstate index in initial '{text}'")))?;
        return Ok(InitialState::Eigenstate(k));
    }
    Err(config_err(format!(
        "unknown initial state '{text}'; use zeros, basis:N or eigenstate:K"
    )))
}

pub fn build_model(m: &ModelSection) -> Result<PauliHamiltonian, Failure> {
    match m.kind {
        ModelKind::LandauZener => {
            let a = m.a.ok_or_else(|| config_err("[model] a is required for landau-zener"))?;
            let b = m.b.ok_or_else(|| config_err("[model] b is required for landau-zener"))?;
            for (name, field) in
                [("sites", m.sites.map(|_| ())), ("x", m.x.map(|_| ())), ("y", m.y.map(|_| ())), ("z", m.z.map(|_| ())), ("m", m.m.map(|_| ())), ("mbar", m.mbar.map(|_| ()))]
            {
                if field.is_some() {
                    return Err(config_err(format!(
                        "[model] {name} does not apply to landau-zener"
                    )));
                }
            }
            Ok(landau_zener(a, b))
        }
        ModelKind::Kitaev => {
            let need = |v: Option<f64>, name: &str| {
                v.ok_or_else(|| config_err(format!("[model] {name} is required for kitaev")))
            };
            for (name, field) in [("a", m.a), ("b", m.b)] {
                if field.is_some() {
                    return Err(config_err(format!("[model] {name} does not apply to kitaev")));
                }
            }
            let z = need(m.z, "z")?;
            let couplings = KitaevCouplings {
                x: need(m.x, "x")?,
                y: need(m.y, "y")?,
                z,
                m: need(m.m, "m")?,
                mbar: m.mbar.unwrap_or(z),
            };
            kitaev_chain_couplings(m.sites.unwrap_or(2), &couplings)
                .map_err(|e| config_err(e.to_string()))
        }
    }
}

/// Which knob a scan turns. Model parameters rebuild the Hamiltonian;
/// sweep parameters adjust the probe protocol.
pub enum ScanTarget {
    Model(fn(&mut ModelSection, f64)),
    Sweep(fn(&mut SweepConfig, f64)),
}

pub fn scan_target(model: &ModelSection, parameter: &str) -> Result<ScanTarget, Failure> {
    let model_params: &[(&str, fn(&mut ModelSection, f64))] = match model.kind {
        ModelKind::LandauZener => &[
            ("a", |m, v| m.a = Some(v)),
            ("b", |m, v| m.b = Some(v)),
        ],
        ModelKind::Kitaev => &[
            ("x", |m, v| m.x = Some(v)),
            ("y", |m, v| m.y = Some(v)),
            ("z", |m, v| m.z = Some(v)),
            ("m", |m, v| m.m = Some(v)),
            ("mbar", |m, v| m.mbar = Some(v)),
        ],
    };
    if let Some((_, set)) = model_params.iter().find(|(n, _)| *n == parameter) {
        return Ok(ScanTarget::Model(*set));
    }
    let sweep_params: &[(&str, fn(&mut SweepConfig, f64))] = &[
        ("coupling", |c, v| c.coupling = v),
        ("total_time", |c, v| c.total_time = v),
        ("dt", |c, v| c.dt = v),
    ];
    if let Some((_, set)) = sweep_params.iter().find(|(n, _)| *n == parameter) {
        return Ok(ScanTarget::Sweep(*set));
    }
    let known: Vec<&str> = model_params
        .iter()
        .map(|(n, _)| *n)
        .chain(sweep_params.iter().map(|(n, _)| *n))
        .collect();
    Err(config_err(format!(
        "parameter '{parameter}' does not exist for this model; known: {}",
        known.join(", ")
    )))
}

pub fn scan_values(scan: &ScanSection) -> Result<Vec<f64>, Failure> {
    match (&scan.values, scan.start, scan.stop, scan.points) {
        (Some(v), None, None, None) => {
            if v.is_empty() {
                return Err(config_err("[scan] values must not be empty"));
            }
            Ok(v.clone())
        }
        (None, Some(start), Some(stop), Some(points)) => {
            if points == 0 {
                return Err(config_err("[scan] points must be positive"));
            }
            if points == 1 {
                return Ok(vec![start]);
            }
            let step = (stop - start) / (points - 1) as f64;
            Ok((0..points).map(|i| start + step * i as f64).collect())
        }
        _ => Err(config_err(
            "[scan] needs either `values = [...]` or all of start, stop, points",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Experiment {
        let raw: RawConfig = toml::from_str(text).unwrap();
        Experiment { raw, dir: PathBuf::from(".") }
    }

    #[test]
    fn initial_state_text_forms() {
        assert!(matches!(parse_initial("zeros").unwrap(), InitialState::Zeros));
        assert!(matches!(parse_initial("basis:5").unwrap(), InitialState::Basis(5)));
        assert!(matches!(parse_initial("eigenstate:0").unwrap(), InitialState::Eigenstate(0)));
        assert!(parse_initial("eigenstate:").is_err());
        assert!(parse_initial("plus").is_err());
    }

    #[test]
    fn scan_values_needs_exactly_one_grid_form() {
        let mut scan = ScanSection {
            parameter: "a".into(),
            values: Some(vec![1.0, 2.0]),
            start: None,
            stop: None,
            points: None,
            track: None,
            track_from: None,
        };
        assert_eq!(scan_values(&scan).unwrap(), vec![1.0, 2.0]);

        scan.start = Some(0.0);
        scan.stop = Some(1.0);
        scan.points = Some(3);
        assert!(scan_values(&scan).is_err());

        scan.values = None;
        assert_eq!(scan_values(&scan).unwrap(), vec![0.0, 0.5, 1.0]);

        scan.points = Some(1);
        assert_eq!(scan_values(&scan).unwrap(), vec![0.0]);
    }

    #[test]
    fn stochastic_overrides_demand_a_seed() {
        let mut exp = parse(
            "[model]\nkind = \"landau-zener\"\na = 1.0\nb = 0.5\n\n[sweep]\nomega_start = -1.0\nomega_stop = 1.0\npoints = 5\n",
        );
        assert!(exp.apply_overrides(None, Some(100), None).is_err());

        let mut exp = parse(
            "seed = 9\n[model]\nkind = \"landau-zener\"\na = 1.0\nb = 0.5\n\n[sweep]\nomega_start = -1.0\nomega_stop = 1.0\npoints = 5\n",
        );
        exp.apply_overrides(None, Some(100), Some(0.01)).unwrap();
        let sweep = exp.raw.sweep.as_ref().unwrap();
        assert_eq!(sweep.shots, Some(100));
        assert_eq!(sweep.noise_p, Some(0.01));
        assert_eq!(exp.seed(), 9);
    }

    #[test]
    fn seed_flag_satisfies_the_stochastic_check() {
        let mut exp = parse(
            "[model]\nkind = \"landau-zener\"\na = 1.0\nb = 0.5\n\n[sweep]\nomega_start = -1.0\nomega_stop = 1.0\npoints = 5\nshots = 50\n",
        );
        assert!(exp.apply_overrides(None, None, None).is_err());
        exp.apply_overrides(Some(3), None, None).unwrap();
        assert_eq!(exp.seed(), 3);
    }
}
