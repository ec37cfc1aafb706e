//! Fixed-step closed-loop simulation: controller at `ts`, plant integrated
//! with classical RK4 at `ts / substeps` under a zero-order-held command.

use std::io::Write;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{derivative, idx, wrench_from_rotors, RotorCommand, State12, StateVector, Wrench};
use crate::env::{hover_omega_sq, EnvParams, VehicleParams};
use crate::error::{Error, Result};
use crate::linearization::LinearModel;
use crate::mpc::{reference_deviation, MpcController};
use crate::pid::PidController;
use crate::trajectory::{RefSample, Trajectory};

/// Magnitude beyond which any state entry counts as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;
/// Pitch margin from +-pi/2 where the Euler model is abandoned.
pub const GIMBAL_MARGIN: f64 = 0.01;

/// A force/torque pulse active on `[t_start, t_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pulse {
    pub t_start: f64,
    pub t_end: f64,
    /// Ground frame, N.
    #[serde(default)]
    pub force: [f64; 3],
    /// Body frame, N m.
    #[serde(default)]
    pub torque: [f64; 3],
}

/// External loads: scheduled pulses plus optional zero-mean Gaussian
/// noise, redrawn every control step from a seeded generator.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbance {
    #[serde(default, rename = "pulse")]
    pub pulses: Vec<Pulse>,
    /// Standard deviation per ground-frame force channel, N.
    #[serde(default)]
    pub noise_force: [f64; 3],
    /// Standard deviation per body torque channel, N m.
    #[serde(default)]
    pub noise_torque: [f64; 3],
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExternalLoad {
    pub force: [f64; 3],
    pub torque: [f64; 3],
}

impl ExternalLoad {
    fn add(mut self, other: &ExternalLoad) -> Self {
        for k in 0..3 {
            self.force[k] += other.force[k];
            self.torque[k] += other.torque[k];
        }
        self
    }
}

impl Disturbance {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.pulses.iter().enumerate() {
            let finite = p.force.iter().chain(&p.torque).all(|v| v.is_finite());
            if !(p.t_start < p.t_end) || !finite || !p.t_start.is_finite() || !p.t_end.is_finite() {
                return Err(Error::invalid(format!("disturbance.pulse[{i}]"), "needs t_start < t_end and finite values"));
            }
        }
        if self.noise_force.iter().chain(&self.noise_torque).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("disturbance.noise", "amplitudes must be finite and >= 0"));
        }
        Ok(())
    }

    /// Sum of the pulses active at `t`.
    pub fn pulses_at(&self, t: f64) -> ExternalLoad {
        self.pulses
            .iter()
            .filter(|p| t >= p.t_start && t < p.t_end)
            .fold(ExternalLoad::default(), |acc, p| {
                acc.add(&ExternalLoad {
                    force: p.force,
                    torque: p.torque,
                })
            })
    }

    fn has_noise(&self) -> bool {
        self.noise_force.iter().chain(&self.noise_torque).any(|v| *v > 0.0)
    }

    fn draw_noise(&self, rng: &mut ChaCha8Rng) -> ExternalLoad {
        let mut out = ExternalLoad::default();
        let mut draw = |sd: f64| {
            if sd > 0.0 {
                Normal::new(0.0, sd).expect("finite positive deviation").sample(rng)
            } else {
                0.0
            }
        };
        for k in 0..3 {
            out.force[k] = draw(self.noise_force[k]);
        }
        for k in 0..3 {
            out.torque[k] = draw(self.noise_torque[k]);
        }
        out
    }
}

fn rhs_with_load(x: &StateVector, cmd: &RotorCommand, veh: &VehicleParams, env: &EnvParams, load: &ExternalLoad) -> StateVector {
    let mut d = derivative(x, &cmd.0, veh, env);
    d[idx::VX] += load.force[0] / veh.mass;
    d[idx::VY] += load.force[1] / veh.mass;
    d[idx::VZ] += load.force[2] / veh.mass;
    d[idx::PHI_DOT] += load.torque[0] / veh.ixx;
    d[idx::THETA_DOT] += load.torque[1] / veh.iyy;
    d[idx::PSI_DOT] += load.torque[2] / veh.izz;
    d
}

fn check_state(x: &StateVector, t: f64) -> Result<()> {
    if let Some(i) = x.iter().position(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
        return Err(Error::NumericalDivergence {
            t,
            reason: format!("{} = {}", State12::FIELD_NAMES[i], x[i]),
        });
    }
    if x[idx::THETA].abs() >= std::f64::consts::FRAC_PI_2 - GIMBAL_MARGIN {
        return Err(Error::NumericalDivergence {
            t,
            reason: format!("pitch {} too close to gimbal lock", x[idx::THETA]),
        });
    }
    Ok(())
}

/// One RK4 step; `load` is sampled at the start of the step and held.
pub fn rk4_step_with<F>(
    state: &State12,
    cmd: &RotorCommand,
    dt: f64,
    veh: &VehicleParams,
    env: &EnvParams,
    t: f64,
    load: F,
) -> Result<State12>
where
    F: Fn(f64) -> ExternalLoad,
{
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "must be > 0"));
    }
    cmd.check_non_negative()?;
    let x = state.to_vector();
    check_state(&x, t)?;
    // loads are held over the step like the command
    let l = load(t);
    let k1 = rhs_with_load(&x, cmd, veh, env, &l);
    let k2 = rhs_with_load(&(x + k1 * (0.5 * dt)), cmd, veh, env, &l);
    let k3 = rhs_with_load(&(x + k2 * (0.5 * dt)), cmd, veh, env, &l);
    let k4 = rhs_with_load(&(x + k3 * dt), cmd, veh, env, &l);
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    check_state(&next, t + dt)?;
    Ok(State12::from_vector(&next))
}

/// One RK4 step with the pulse schedule of `dist` (noise is drawn by the
/// closed-loop runner, not here).
pub fn rk4_step(
    state: &State12,
    cmd: &RotorCommand,
    dt: f64,
    veh: &VehicleParams,
    env: &EnvParams,
    dist: &Disturbance,
    t: f64,
) -> Result<State12> {
    rk4_step_with(state, cmd, dt, veh, env, t, |s| dist.pulses_at(s))
}

/// What a controller hands back each sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub command: RotorCommand,
    pub iterations: usize,
}

/// Anything that turns a measured state and a reference into rotor commands.
pub trait FlightController {
    fn name(&self) -> &'static str;
    fn reset(&mut self);
    fn control(&mut self, t: f64, state: &State12, trajectory: &Trajectory, ts: f64) -> Result<ControlOutput>;
}

impl FlightController for MpcController {
    fn name(&self) -> &'static str {
        "mpc"
    }

    fn reset(&mut self) {
        MpcController::reset(self)
    }

    fn control(&mut self, t: f64, state: &State12, trajectory: &Trajectory, ts: f64) -> Result<ControlOutput> {
        let window = trajectory.window(t, ts, self.config().horizon);
        let out = self.step(state, &window)?;
        Ok(ControlOutput {
            command: out.command,
            iterations: out.qp_iterations,
        })
    }
}

impl FlightController for PidController {
    fn name(&self) -> &'static str {
        "pid"
    }

    fn reset(&mut self) {
        PidController::reset(self)
    }

    fn control(&mut self, t: f64, state: &State12, trajectory: &Trajectory, ts: f64) -> Result<ControlOutput> {
        let out = self.step(state, &trajectory.sample(t), ts)?;
        Ok(ControlOutput {
            command: out.command,
            iterations: 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Plant {
    Nonlinear,
    /// Discrete linear model stepped once per control sample.
    Linear(LinearModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub ts: f64,
    pub substeps: usize,
    pub duration: f64,
    pub seed: u64,
    pub initial: State12,
    pub plant: Plant,
}

impl SimSettings {
    pub fn new(ts: f64, substeps: usize, duration: f64) -> Self {
        Self {
            ts,
            substeps,
            duration,
            seed: 0,
            initial: State12::default(),
            plant: Plant::Nonlinear,
        }
    }

    /// Number of controller invocations, `ceil(duration / ts)`.
    pub fn steps(&self) -> usize {
        let ratio = self.duration / self.ts;
        let rounded = ratio.round();
        if (ratio - rounded).abs() < 1e-9 * ratio.max(1.0) {
            rounded as usize
        } else {
            ratio.ceil() as usize
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.ts > 0.0 && self.ts.is_finite()) {
            return Err(Error::invalid("sim.ts", "must be > 0"));
        }
        if self.substeps == 0 {
            return Err(Error::invalid("sim.substeps", "must be >= 1"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid("sim.duration", "must be > 0"));
        }
        if !self.initial.is_finite() {
            return Err(Error::NonFiniteState);
        }
        if let Plant::Linear(m) = &self.plant {
            if (m.dt - self.ts).abs() > 1e-12 {
                return Err(Error::invalid("sim.plant", "linear plant must be discretised at ts"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimRecord {
    pub t: f64,
    pub state: State12,
    pub command: RotorCommand,
    pub reference: RefSample,
    pub wrench: Wrench,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub controller: String,
    pub seed: u64,
    pub ts: f64,
    /// Hover squared speed, the reference for control effort.
    pub hover_command: f64,
    /// Box every command must respect.
    pub u_min: f64,
    pub u_max: f64,
    pub config_snapshot: Option<String>,
    pub records: Vec<SimRecord>,
}

/// Simulation stopped early; the log holds everything up to the failure.
#[derive(Debug)]
pub struct SimFailure {
    pub error: Error,
    pub log: SimLog,
}

impl std::fmt::Display for SimFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} control steps)", self.error, self.log.records.len())
    }
}

impl std::error::Error for SimFailure {}

pub fn run_closed_loop(
    controller: &mut dyn FlightController,
    trajectory: &Trajectory,
    dist: &Disturbance,
    settings: &SimSettings,
    veh: &VehicleParams,
    env: &EnvParams,
) -> std::result::Result<SimLog, SimFailure> {
    let mut log = SimLog {
        controller: controller.name().to_string(),
        seed: settings.seed,
        ts: settings.ts,
        hover_command: hover_omega_sq(veh, env),
        u_min: 0.0,
        u_max: veh.omega_sq_max(),
        config_snapshot: None,
        records: Vec::new(),
    };
    let checks = settings.validate().and_then(|_| dist.validate()).and_then(|_| trajectory.validate());
    if let Err(error) = checks {
        return Err(SimFailure { error, log });
    }
    let n = settings.steps();
    log.records.reserve(n);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let noisy = dist.has_noise();
    let dt = settings.ts / settings.substeps as f64;
    let mut state = settings.initial;

    for k in 0..n {
        let t = k as f64 * settings.ts;
        let out = match controller.control(t, &state, trajectory, settings.ts) {
            Ok(o) => o,
            Err(error) => return Err(SimFailure { error, log }),
        };
        let wrench = wrench_from_rotors(&out.command, veh).unwrap_or_default();
        log.records.push(SimRecord {
            t,
            state,
            command: out.command,
            reference: trajectory.sample(t),
            wrench,
            iterations: out.iterations,
        });
        let noise = if noisy {
            dist.draw_noise(&mut rng)
        } else {
            ExternalLoad::default()
        };
        let next = match &settings.plant {
            Plant::Nonlinear => {
                let mut s = state;
                let mut result = Ok(());
                for j in 0..settings.substeps {
                    let ts = t + j as f64 * dt;
                    match rk4_step_with(&s, &out.command, dt, veh, env, ts, |tau| dist.pulses_at(tau).add(&noise)) {
                        Ok(v) => s = v,
                        Err(e) => {
                            result = Err(e);
                            break;
                        }
                    }
                }
                result.map(|_| s)
            }
            Plant::Linear(model) => {
                let x = model.step(&state.to_vector(), &out.command.to_vector());
                check_state(&x, t + settings.ts).map(|_| State12::from_vector(&x))
            }
        };
        match next {
            Ok(s) => state = s,
            Err(error) => return Err(SimFailure { error, log }),
        }
    }
    Ok(log)
}

/// Tracking quality of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// RMS 3D position error after the transient window, m.
    pub rms_position_error: f64,
    /// Largest overshoot past a held reference, per axis x, y, z, m.
    pub max_overshoot: [f64; 3],
    /// Same, as a percentage of the step into the hold.
    pub max_overshoot_pct: [f64; 3],
    /// Longest time to stay inside the 2 % band after a step, s.
    pub settling_time: f64,
    /// 3D position error at the last sample, m.
    pub final_position_error: f64,
    /// Largest 3D position error after the transient window, m.
    pub max_position_error: f64,
    /// `sum ||u - u_hover||^2 ts`.
    pub control_effort: f64,
    /// Commands outside the box.
    pub constraint_violations: usize,
    pub samples: usize,
}

/// A maximal run of samples over which one reference axis is constant.
/// The step into it is measured from the previous held level, so a ramp
/// between two holds counts as one step.
struct Hold {
    start: usize,
    end: usize,
    value: f64,
    /// +1 when the response approaches from below.
    direction: f64,
    step: f64,
}

fn holds(log: &SimLog, axis: usize) -> Vec<Hold> {
    let refv = |i: usize| log.records[i].reference.position()[axis];
    let n = log.records.len();
    let mut out = Vec::new();
    let mut level = log.records[0].state.position()[axis];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && (refv(j) - refv(i)).abs() <= 1e-12 {
            j += 1;
        }
        // single samples are part of a ramp, not a hold
        if j - i >= 2 {
            let value = refv(i);
            let jump = value - level;
            if jump.abs() > 1e-9 {
                out.push(Hold {
                    start: i,
                    end: j,
                    value,
                    direction: jump.signum(),
                    step: jump.abs(),
                });
            }
            level = value;
        }
        i = j;
    }
    out
}

pub fn compute_metrics(log: &SimLog, transient: f64) -> Result<Metrics> {
    if log.records.is_empty() {
        return Err(Error::invalid("log", "is empty"));
    }
    let err3 = |r: &SimRecord| {
        let p = r.state.position();
        let q = r.reference.position();
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
    };
    let t0 = log.records[0].t;
    let window: Vec<f64> = log
        .records
        .iter()
        .filter(|r| r.t - t0 >= transient - 1e-12)
        .map(err3)
        .collect();
    let rms = if window.is_empty() {
        0.0
    } else {
        (window.iter().map(|e| e * e).sum::<f64>() / window.len() as f64).sqrt()
    };
    let max_err = window.iter().cloned().fold(0.0, f64::max);

    let mut max_overshoot = [0.0; 3];
    let mut max_overshoot_pct = [0.0; 3];
    let mut settling = 0.0f64;
    for axis in 0..3 {
        for h in holds(log, axis) {
            let mut peak = 0.0f64;
            for r in &log.records[h.start..h.end] {
                peak = peak.max(h.direction * (r.state.position()[axis] - h.value));
            }
            max_overshoot[axis] = f64::max(max_overshoot[axis], peak);
            if h.step > 1e-6 {
                max_overshoot_pct[axis] = f64::max(max_overshoot_pct[axis], 100.0 * peak / h.step);
            }
            if h.step >= 1e-3 {
                let band = 0.02 * h.step;
                let last_out = (h.start..h.end)
                    .rev()
                    .find(|&i| (log.records[i].state.position()[axis] - h.value).abs() > band);
                let settle = match last_out {
                    Some(i) if i + 1 < h.end => log.records[i + 1].t - log.records[h.start].t,
                    Some(_) => log.records[h.end - 1].t - log.records[h.start].t + log.ts,
                    None => 0.0,
                };
                settling = settling.max(settle);
            }
        }
    }

    let mut effort = 0.0;
    let mut violations = 0;
    for r in &log.records {
        effort += r.command.0.iter().map(|w| (w - log.hover_command).powi(2)).sum::<f64>() * log.ts;
        if !r.command.within(log.u_min, log.u_max) {
            violations += 1;
        }
    }

    Ok(Metrics {
        rms_position_error: rms,
        max_overshoot,
        max_overshoot_pct,
        settling_time: settling,
        final_position_error: err3(log.records.last().expect("non-empty")),
        max_position_error: max_err,
        control_effort: effort,
        constraint_violations: violations,
        samples: log.records.len(),
    })
}

/// Column header of the CSV log.
pub fn csv_header() -> Vec<String> {
    let mut cols: Vec<String> = vec!["t".into()];
    cols.extend(State12::FIELD_NAMES.iter().map(|s| s.to_string()));
    cols.extend((1..=8).map(|i| format!("omega_sq_{i}")));
    cols.extend(["ref_x", "ref_y", "ref_z", "ref_psi", "u1", "u2", "u3", "u4", "qp_iterations"].map(String::from));
    cols
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write one row per control step; floats carry 17 significant digits.
pub fn write_csv<W: Write>(log: &SimLog, mut out: W) -> Result<()> {
    writeln!(out, "{}", csv_header().join(","))?;
    for r in &log.records {
        let mut row: Vec<String> = Vec::with_capacity(36);
        row.push(fmt_f64(r.t));
        row.extend(r.state.to_vector().iter().map(|v| fmt_f64(*v)));
        row.extend(r.command.0.iter().map(|v| fmt_f64(*v)));
        for v in [r.reference.x, r.reference.y, r.reference.z, r.reference.psi] {
            row.push(fmt_f64(v));
        }
        for v in [r.wrench.thrust, r.wrench.roll, r.wrench.pitch, r.wrench.yaw] {
            row.push(fmt_f64(v));
        }
        row.push(r.iterations.to_string());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_metrics<W: Write>(metrics: &Metrics, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, metrics).map_err(|e| Error::Io(e.into()))
}

/// Predicted state trajectory over the horizon for the current plan,
/// in the controller's deviation coordinates.
pub fn predicted_window(ctrl: &MpcController, x_now: &State12, reference: &[RefSample], plan: &DVector<f64>) -> Result<DVector<f64>> {
    let (dx0, _) = reference_deviation(x_now, reference, ctrl.config().horizon, ctrl.model().dt)?;
    let p = ctrl.prediction();
    Ok(&p.g * DVector::from_column_slice(dx0.as_slice()) + &p.h * plan)
}

#[cfg(test)]
mod tests;
