//! Scenario files: strict TOML with one section per component, dotted
//! `key=value` overrides, and a derived-quantity report for `validate`.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{hover_speed, rad_s_to_rpm, rpm_to_rad_s, speed_of_sound, tip_mach, EnvParams, VehicleParams};
use crate::error::{Error, Result, Violation};
use crate::linearization::{discretize, linearize_hover};
use crate::mpc::{MpcConfig, MpcController};
use crate::pid::{AxisGains, PidController, PidGains};
use crate::sim::{compute_metrics, run_closed_loop, Disturbance, FlightController, Metrics, Plant, SimFailure, SimLog, SimSettings};
use crate::dynamics::State12;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Mpc,
    Pid,
}

impl ControllerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::Mpc => "mpc",
            ControllerKind::Pid => "pid",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerChoice {
    Mpc,
    Pid,
    Both,
}

impl ControllerChoice {
    pub fn kinds(self) -> Vec<ControllerKind> {
        match self {
            ControllerChoice::Mpc => vec![ControllerKind::Mpc],
            ControllerChoice::Pid => vec![ControllerKind::Pid],
            ControllerChoice::Both => vec![ControllerKind::Mpc, ControllerKind::Pid],
        }
    }
}

impl std::str::FromStr for ControllerChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mpc" => Ok(Self::Mpc),
            "pid" => Ok(Self::Pid),
            "both" => Ok(Self::Both),
            other => Err(Error::Config(format!("unknown controller `{other}` (expected mpc, pid or both)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantKind {
    #[default]
    Nonlinear,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Mars,
    Earth,
}

/// A scalar applied to every entry, or one value per entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weights {
    Scalar(f64),
    List(Vec<f64>),
}

impl Weights {
    fn resolve<const N: usize>(&self, field: &str) -> Result<[f64; N]> {
        match self {
            Weights::Scalar(v) => Ok([*v; N]),
            Weights::List(v) => v
                .as_slice()
                .try_into()
                .map_err(|_| Error::Config(format!("{field}: expected {N} entries, got {}", v.len()))),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvironmentSection {
    #[serde(default)]
    profile: Profile,
    density: Option<f64>,
    static_pressure: Option<f64>,
    temperature: Option<f64>,
    gas_constant: Option<f64>,
    dynamic_viscosity: Option<f64>,
    gamma: Option<f64>,
    gravity: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct VehicleSection {
    mass: Option<f64>,
    arm_length: Option<f64>,
    rotor_radius: Option<f64>,
    ixx: Option<f64>,
    iyy: Option<f64>,
    izz: Option<f64>,
    rotor_inertia: Option<f64>,
    thrust_coeff: Option<f64>,
    /// Defaults to `0.1 K_T r` when absent.
    drag_coeff: Option<f64>,
    linear_drag: Option<f64>,
    /// rad/s; `omega_max_rpm` is the alternative spelling.
    omega_max: Option<f64>,
    omega_max_rpm: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MpcSection {
    horizon: Option<usize>,
    state_weight: Option<Weights>,
    input_weight: Option<Weights>,
    rate_weight: Option<Weights>,
    u_min: Option<Weights>,
    u_max: Option<Weights>,
    qp_max_iter: Option<usize>,
    qp_tol: Option<f64>,
    constrained: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PidSection {
    x: Option<AxisGains>,
    y: Option<AxisGains>,
    z: Option<AxisGains>,
    roll: Option<AxisGains>,
    pitch: Option<AxisGains>,
    yaw: Option<AxisGains>,
    outer_angle_limit: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSection {
    name: Option<String>,
    #[serde(default = "default_choice")]
    controller: ControllerChoice,
    #[serde(default = "default_ts")]
    ts: f64,
    #[serde(default = "default_substeps")]
    substeps: usize,
    duration: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_output")]
    output_dir: PathBuf,
    /// Samples before this time are left out of the RMS error, s.
    #[serde(default)]
    transient: f64,
    /// `[x, y, z, psi]` at rest; absent means start on the reference.
    initial: Option<[f64; 4]>,
    #[serde(default)]
    plant: PlantKind,
}

fn default_choice() -> ControllerChoice {
    ControllerChoice::Mpc
}
fn default_ts() -> f64 {
    0.02
}
fn default_substeps() -> usize {
    10
}
fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    environment: EnvironmentSection,
    #[serde(default)]
    vehicle: VehicleSection,
    #[serde(default)]
    mpc: MpcSection,
    #[serde(default)]
    pid: PidSection,
    #[serde(default)]
    trajectory: Trajectory,
    #[serde(default)]
    disturbance: Disturbance,
    sim: SimSection,
}

/// A fully resolved experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub controller: ControllerChoice,
    pub env: EnvParams,
    pub vehicle: VehicleParams,
    pub mpc: MpcConfig,
    pub pid: PidGains,
    pub trajectory: Trajectory,
    pub disturbance: Disturbance,
    pub settings: SimSettings,
    pub plant: PlantKind,
    pub transient: f64,
    pub output_dir: PathBuf,
    /// The configuration after overrides, as TOML.
    pub snapshot: String,
}

/// Set `section.key = value` inside a TOML document. The value is read as
/// a TOML literal and falls back to a bare string.
pub fn apply_override(doc: &mut toml::Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() {
        return Err(Error::Config(format!("override `{assignment}` has an empty key")));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = doc;
    for part in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{part}` is not a table")))?;
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| Error::Config(format!("override `{key}` does not address a table entry")))?;
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl Scenario {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let snapshot = toml::to_string(&doc).map_err(|e| Error::Config(e.to_string()))?;
        let file: ScenarioFile = doc.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Self::resolve(file, snapshot)
    }

    pub fn from_path(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut s = Self::from_toml_str(&text, overrides).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if s.name.is_empty() {
            s.name = path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        }
        Ok(s)
    }

    fn resolve(file: ScenarioFile, snapshot: String) -> Result<Self> {
        let e = &file.environment;
        let base = match e.profile {
            Profile::Mars => EnvParams::mars(),
            Profile::Earth => EnvParams::earth(),
        };
        let env = EnvParams {
            density: e.density.unwrap_or(base.density),
            static_pressure: e.static_pressure.unwrap_or(base.static_pressure),
            temperature: e.temperature.unwrap_or(base.temperature),
            gas_constant: e.gas_constant.unwrap_or(base.gas_constant),
            dynamic_viscosity: e.dynamic_viscosity.unwrap_or(base.dynamic_viscosity),
            gamma: e.gamma.unwrap_or(base.gamma),
            gravity: e.gravity.unwrap_or(base.gravity),
        };

        let v = &file.vehicle;
        let d = VehicleParams::mars_octorotor();
        if v.omega_max.is_some() && v.omega_max_rpm.is_some() {
            return Err(Error::Config("vehicle: give omega_max or omega_max_rpm, not both".into()));
        }
        let thrust_coeff = v.thrust_coeff.unwrap_or(d.thrust_coeff);
        let rotor_radius = v.rotor_radius.unwrap_or(d.rotor_radius);
        let vehicle = VehicleParams {
            mass: v.mass.unwrap_or(d.mass),
            arm_length: v.arm_length.unwrap_or(d.arm_length),
            rotor_radius,
            ixx: v.ixx.unwrap_or(d.ixx),
            iyy: v.iyy.unwrap_or(d.iyy),
            izz: v.izz.unwrap_or(d.izz),
            rotor_inertia: v.rotor_inertia.unwrap_or(d.rotor_inertia),
            thrust_coeff,
            drag_coeff: v.drag_coeff.unwrap_or(0.1 * thrust_coeff * rotor_radius),
            linear_drag: v.linear_drag.unwrap_or(d.linear_drag),
            omega_max: v.omega_max.or(v.omega_max_rpm.map(rpm_to_rad_s)).unwrap_or(d.omega_max),
        };

        let m = &file.mpc;
        let mut mpc = MpcConfig::for_vehicle(&vehicle);
        if let Some(h) = m.horizon {
            mpc.horizon = h;
        }
        if let Some(w) = &m.state_weight {
            mpc.state_weight = w.resolve("mpc.state_weight")?;
        }
        if let Some(w) = &m.input_weight {
            mpc.input_weight = w.resolve("mpc.input_weight")?;
        }
        if let Some(w) = &m.rate_weight {
            mpc.rate_weight = w.resolve("mpc.rate_weight")?;
        }
        if let Some(w) = &m.u_min {
            mpc.u_min = w.resolve("mpc.u_min")?;
        }
        if let Some(w) = &m.u_max {
            mpc.u_max = w.resolve("mpc.u_max")?;
        }
        if let Some(n) = m.qp_max_iter {
            mpc.qp_max_iter = n;
        }
        if let Some(t) = m.qp_tol {
            mpc.qp_tol = t;
        }
        if let Some(c) = m.constrained {
            mpc.constrained = c;
        }

        let p = &file.pid;
        let dp = PidGains::default();
        let pid = PidGains {
            x: p.x.unwrap_or(dp.x),
            y: p.y.unwrap_or(dp.y),
            z: p.z.unwrap_or(dp.z),
            roll: p.roll.unwrap_or(dp.roll),
            pitch: p.pitch.unwrap_or(dp.pitch),
            yaw: p.yaw.unwrap_or(dp.yaw),
            outer_angle_limit: p.outer_angle_limit.unwrap_or(dp.outer_angle_limit),
        };

        let s = &file.sim;
        let initial = match s.initial {
            Some([x, y, z, psi]) => State12::at_rest(x, y, z, psi),
            None => {
                let r = file.trajectory.sample(0.0);
                State12::at_rest(r.x, r.y, r.z, r.psi)
            }
        };
        let mut settings = SimSettings::new(s.ts, s.substeps, s.duration);
        settings.seed = s.seed;
        settings.initial = initial;

        Ok(Self {
            name: s.name.clone().unwrap_or_default(),
            controller: s.controller,
            env,
            vehicle,
            mpc,
            pid,
            trajectory: file.trajectory,
            disturbance: file.disturbance,
            settings,
            plant: s.plant,
            transient: s.transient,
            output_dir: s.output_dir.clone(),
            snapshot,
        })
    }

    /// Every invariant violation across all sections.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = self.env.violations();
        out.extend(self.vehicle.violations(&self.env));
        out.extend(self.mpc.violations());
        out.extend(self.pid.violations());
        let max = self.vehicle.omega_sq_max();
        if self.mpc.u_max.iter().any(|u| *u > max * (1.0 + 1e-12)) {
            out.push(Violation::new("mpc.u_max", format!("exceeds omega_max^2 = {max:.1}")));
        }
        if self.mpc.u_min.iter().any(|u| *u < 0.0) {
            out.push(Violation::new("mpc.u_min", "squared speeds cannot be negative"));
        }
        if let Err(e) = self.trajectory.validate() {
            out.push(Violation::new("trajectory", e.to_string()));
        }
        if let Err(e) = self.disturbance.validate() {
            out.push(Violation::new("disturbance", e.to_string()));
        }
        let s = &self.settings;
        if !(s.ts > 0.0 && s.ts.is_finite()) {
            out.push(Violation::new("sim.ts", "must be > 0"));
        }
        if s.substeps == 0 {
            out.push(Violation::new("sim.substeps", "must be >= 1"));
        }
        if !(s.duration > 0.0 && s.duration.is_finite()) {
            out.push(Violation::new("sim.duration", "must be > 0"));
        }
        if !(self.transient >= 0.0) {
            out.push(Violation::new("sim.transient", "must be >= 0"));
        }
        if !s.initial.is_finite() {
            out.push(Violation::new("sim.initial", "must be finite"));
        }
        if self.name.is_empty() {
            out.push(Violation::new("sim.name", "must not be empty"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        Error::from_violations(self.violations())
    }

    pub fn report(&self) -> Report {
        let a = speed_of_sound(&self.env);
        let hover = hover_speed(&self.vehicle, &self.env);
        Report {
            speed_of_sound: a,
            hover_thrust: self.vehicle.weight(&self.env),
            hover_speed: hover,
            hover_rpm: rad_s_to_rpm(hover),
            hover_omega_sq: hover * hover,
            omega_sq_max: self.vehicle.omega_sq_max(),
            tip_mach_hover: tip_mach(hover, self.vehicle.rotor_radius, a).unwrap_or(f64::NAN),
            tip_mach_max: tip_mach(self.vehicle.omega_max, self.vehicle.rotor_radius, a).unwrap_or(f64::NAN),
        }
    }

    pub fn controller(&self, kind: ControllerKind) -> Result<Box<dyn FlightController>> {
        Ok(match kind {
            ControllerKind::Mpc => Box::new(MpcController::hover(&self.vehicle, &self.env, self.settings.ts, self.mpc.clone())?),
            ControllerKind::Pid => Box::new(PidController::new(self.pid, self.vehicle, self.env)?),
        })
    }

    fn sim_settings(&self) -> Result<SimSettings> {
        let mut s = self.settings.clone();
        s.plant = match self.plant {
            PlantKind::Nonlinear => Plant::Nonlinear,
            PlantKind::Linear => Plant::Linear(discretize(&linearize_hover(&self.vehicle, &self.env), s.ts)?),
        };
        Ok(s)
    }

    /// Validate, then simulate with one controller.
    pub fn run(&self, kind: ControllerKind) -> std::result::Result<Run, SimFailure> {
        let empty = |error| SimFailure {
            error,
            log: SimLog {
                controller: kind.as_str().into(),
                seed: self.settings.seed,
                ts: self.settings.ts,
                hover_command: 0.0,
                u_min: 0.0,
                u_max: 0.0,
                config_snapshot: None,
                records: Vec::new(),
            },
        };
        self.validate().map_err(empty)?;
        let settings = self.sim_settings().map_err(empty)?;
        let mut ctrl = self.controller(kind).map_err(empty)?;
        let mut log = run_closed_loop(ctrl.as_mut(), &self.trajectory, &self.disturbance, &settings, &self.vehicle, &self.env)?;
        if kind == ControllerKind::Mpc {
            // the controller's own box is the one it must honour
            log.u_min = self.mpc.u_min.iter().cloned().fold(f64::INFINITY, f64::min);
            log.u_max = self.mpc.u_max.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        }
        log.config_snapshot = Some(self.snapshot.clone());
        let metrics = compute_metrics(&log, self.transient).map_err(|error| SimFailure { error, log: log.clone() })?;
        Ok(Run { kind, log, metrics })
    }
}

#[derive(Debug, Clone)]
pub struct Run {
    pub kind: ControllerKind,
    pub log: SimLog,
    pub metrics: Metrics,
}

/// Derived quantities printed by `validate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Report {
    /// m/s
    pub speed_of_sound: f64,
    /// m g, N
    pub hover_thrust: f64,
    /// rad/s per rotor
    pub hover_speed: f64,
    pub hover_rpm: f64,
    pub hover_omega_sq: f64,
    pub omega_sq_max: f64,
    pub tip_mach_hover: f64,
    pub tip_mach_max: f64,
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "speed of sound      {:>10.1} m/s", self.speed_of_sound)?;
        writeln!(f, "hover thrust        {:>10.2} N", self.hover_thrust)?;
        writeln!(f, "hover speed         {:>10.1} rad/s ({:.0} rpm)", self.hover_speed, self.hover_rpm)?;
        writeln!(f, "hover omega^2       {:>10.0} rad^2/s^2", self.hover_omega_sq)?;
        writeln!(f, "omega_max^2         {:>10.0} rad^2/s^2", self.omega_sq_max)?;
        writeln!(f, "tip Mach at hover   {:>10.3}", self.tip_mach_hover)?;
        write!(f, "tip Mach at max     {:>10.3}", self.tip_mach_max)
    }
}
