//! Cascaded PID position and heading controller used as the comparison
//! baseline.
//!
//! Outer loop: horizontal position error, rotated into the heading frame,
//! becomes desired pitch and roll (PD on measured velocity plus a clamped
//! integral). Altitude is a PID on z with hover feed-forward. Inner loop:
//! PID on roll, pitch and yaw with rate damping on the measured Euler
//! rates. The resulting wrench goes through the minimum-norm allocator.

use serde::{Deserialize, Serialize};

use crate::dynamics::{wrap_angle, Allocator, RotorCommand, State12, Wrench};
use crate::env::{EnvParams, VehicleParams};
use crate::error::{Error, Result, Violation};
use crate::trajectory::RefSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisGains {
    pub kp: f64,
    #[serde(default)]
    pub ki: f64,
    #[serde(default)]
    pub kd: f64,
    /// Absolute bound on the integrator state.
    #[serde(default = "default_integrator_limit")]
    pub integrator_limit: f64,
}

fn default_integrator_limit() -> f64 {
    1.0
}

impl AxisGains {
    pub const fn new(kp: f64, ki: f64, kd: f64, integrator_limit: f64) -> Self {
        Self {
            kp,
            ki,
            kd,
            integrator_limit,
        }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    /// rad of pitch per metre of forward error.
    pub x: AxisGains,
    /// rad of roll per metre of lateral error.
    pub y: AxisGains,
    /// m/s^2 per metre of altitude error.
    pub z: AxisGains,
    /// rad/s^2 per rad.
    pub roll: AxisGains,
    pub pitch: AxisGains,
    pub yaw: AxisGains,
    /// Bound on commanded roll and pitch, rad.
    pub outer_angle_limit: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            x: AxisGains::new(0.8, 0.02, 0.8, 0.5),
            y: AxisGains::new(0.8, 0.02, 0.8, 0.5),
            z: AxisGains::new(4.0, 0.1, 3.0, 0.5),
            roll: AxisGains::new(49.0, 0.0, 14.0, 0.2),
            pitch: AxisGains::new(49.0, 0.0, 14.0, 0.2),
            yaw: AxisGains::new(4.0, 0.0, 4.0, 0.2),
            outer_angle_limit: 0.3,
        }
    }
}

impl PidGains {
    pub fn zero() -> Self {
        Self {
            x: AxisGains::zero(),
            y: AxisGains::zero(),
            z: AxisGains::zero(),
            roll: AxisGains::zero(),
            pitch: AxisGains::zero(),
            yaw: AxisGains::zero(),
            outer_angle_limit: 0.3,
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (name, g) in self.axes() {
            if [g.kp, g.ki, g.kd].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                out.push(Violation::new(format!("pid.{name}"), "gains must be finite and >= 0"));
            }
            if !(g.integrator_limit > 0.0) {
                out.push(Violation::new(format!("pid.{name}.integrator_limit"), "must be > 0"));
            }
        }
        if !(self.outer_angle_limit > 0.0 && self.outer_angle_limit <= std::f64::consts::FRAC_PI_4) {
            out.push(Violation::new("pid.outer_angle_limit", "must lie in (0, pi/4]"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        Error::from_violations(self.violations())
    }

    fn axes(&self) -> [(&'static str, AxisGains); 6] {
        [
            ("x", self.x),
            ("y", self.y),
            ("z", self.z),
            ("roll", self.roll),
            ("pitch", self.pitch),
            ("yaw", self.yaw),
        ]
    }
}

/// Integrator memory, one slot per axis in the order x, y, z, roll, pitch, yaw.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PidMemory {
    pub integrals: [f64; 6],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidOutput {
    pub command: RotorCommand,
    pub wrench: Wrench,
    pub saturated: bool,
    pub roll_cmd: f64,
    pub pitch_cmd: f64,
}

#[derive(Debug, Clone)]
pub struct PidController {
    gains: PidGains,
    veh: VehicleParams,
    env: EnvParams,
    allocator: Allocator,
    memory: PidMemory,
}

fn integrate(acc: &mut f64, err: f64, dt: f64, limit: f64) -> f64 {
    *acc = (*acc + err * dt).clamp(-limit, limit);
    *acc
}

impl PidController {
    pub fn new(gains: PidGains, veh: VehicleParams, env: EnvParams) -> Result<Self> {
        gains.validate()?;
        Ok(Self {
            gains,
            allocator: Allocator::new(&veh),
            veh,
            env,
            memory: PidMemory::default(),
        })
    }

    pub fn gains(&self) -> &PidGains {
        &self.gains
    }

    pub fn memory(&self) -> &PidMemory {
        &self.memory
    }

    pub fn reset(&mut self) {
        self.memory = PidMemory::default();
    }

    pub fn step(&mut self, x_now: &State12, reference: &RefSample, dt: f64) -> Result<PidOutput> {
        if !(dt > 0.0) {
            return Err(Error::invalid("dt", "must be > 0"));
        }
        if !x_now.is_finite() {
            return Err(Error::NonFiniteState);
        }
        let g = &self.gains;
        let mem = &mut self.memory.integrals;

        // Position error in the heading frame.
        let (s, c) = x_now.psi.sin_cos();
        let (ex_w, ey_w) = (reference.x - x_now.x, reference.y - x_now.y);
        let ex = c * ex_w + s * ey_w;
        let ey = -s * ex_w + c * ey_w;
        let vx = c * x_now.vx + s * x_now.vy;
        let vy = -s * x_now.vx + c * x_now.vy;

        let ix = integrate(&mut mem[0], ex, dt, g.x.integrator_limit);
        let iy = integrate(&mut mem[1], ey, dt, g.y.integrator_limit);
        let lim = g.outer_angle_limit;
        // x'' = g theta, y'' = -g phi
        let pitch_cmd = (g.x.kp * ex + g.x.ki * ix - g.x.kd * vx).clamp(-lim, lim);
        let roll_cmd = -(g.y.kp * ey + g.y.ki * iy - g.y.kd * vy).clamp(-lim, lim);

        let ez = reference.z - x_now.z;
        let iz = integrate(&mut mem[2], ez, dt, g.z.integrator_limit);
        let accel_z = g.z.kp * ez + g.z.ki * iz - g.z.kd * x_now.vz;
        let thrust = (self.veh.mass * (self.env.gravity + accel_z)).max(0.0);

        let e_roll = roll_cmd - x_now.phi;
        let e_pitch = pitch_cmd - x_now.theta;
        let e_yaw = wrap_angle(reference.psi - x_now.psi);
        let i_roll = integrate(&mut mem[3], e_roll, dt, g.roll.integrator_limit);
        let i_pitch = integrate(&mut mem[4], e_pitch, dt, g.pitch.integrator_limit);
        let i_yaw = integrate(&mut mem[5], e_yaw, dt, g.yaw.integrator_limit);
        let roll = self.veh.ixx * (g.roll.kp * e_roll + g.roll.ki * i_roll - g.roll.kd * x_now.phi_dot);
        let pitch = self.veh.iyy * (g.pitch.kp * e_pitch + g.pitch.ki * i_pitch - g.pitch.kd * x_now.theta_dot);
        let yaw = self.veh.izz * (g.yaw.kp * e_yaw + g.yaw.ki * i_yaw - g.yaw.kd * x_now.psi_dot);

        let wrench = Wrench::new(thrust, roll, pitch, yaw);
        let alloc = self.allocator.allocate(&wrench)?;
        Ok(PidOutput {
            command: alloc.command,
            wrench,
            saturated: alloc.saturated,
            roll_cmd,
            pitch_cmd,
        })
    }
}
