//! Planetary atmosphere and vehicle constants, plus the aerodynamic
//! feasibility checks (speed of sound, tip Mach) and thrust-coefficient
//! calibration used to derive the default rotor model.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Violation};

/// Number of rotors on the coaxial airframe (four arms, two rotors each).
pub const ROTOR_COUNT: usize = 8;

/// Mars surface gravity, m/s^2.
pub const MARS_GRAVITY: f64 = 3.711;
/// Earth standard gravity, m/s^2.
pub const EARTH_GRAVITY: f64 = 9.80665;

/// Atmosphere and gravity of the planet the vehicle flies on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvParams {
    /// kg/m^3
    pub density: f64,
    /// Pa
    pub static_pressure: f64,
    /// K
    pub temperature: f64,
    /// m^2/(s^2 K)
    pub gas_constant: f64,
    /// N s/m^2
    pub dynamic_viscosity: f64,
    /// Ratio of specific heats.
    pub gamma: f64,
    /// m/s^2
    pub gravity: f64,
}

impl EnvParams {
    /// Mars surface conditions used for the rotor CFD runs.
    pub fn mars() -> Self {
        Self {
            density: 0.017,
            static_pressure: 720.0,
            temperature: 223.0,
            gas_constant: 188.9,
            dynamic_viscosity: 1.130e-5,
            gamma: 1.289,
            gravity: MARS_GRAVITY,
        }
    }

    /// Sea-level Earth conditions, handy for sanity checks.
    pub fn earth() -> Self {
        Self {
            density: 1.225,
            static_pressure: 101_325.0,
            temperature: 288.2,
            gas_constant: 287.1,
            dynamic_viscosity: 1.175e-5,
            gamma: 1.4,
            gravity: EARTH_GRAVITY,
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let fields = [
            ("environment.density", self.density),
            ("environment.static_pressure", self.static_pressure),
            ("environment.temperature", self.temperature),
            ("environment.gas_constant", self.gas_constant),
            ("environment.dynamic_viscosity", self.dynamic_viscosity),
            ("environment.gamma", self.gamma),
            ("environment.gravity", self.gravity),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                out.push(Violation::new(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if self.gamma.is_finite() && !(self.gamma > 1.0 && self.gamma < 2.0) {
            out.push(Violation::new(
                "environment.gamma",
                format!("must lie in (1, 2), got {}", self.gamma),
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<(), Error> {
        Error::from_violations(self.violations())
    }
}

impl Default for EnvParams {
    fn default() -> Self {
        Self::mars()
    }
}

/// Mass properties and rotor model of the octorotor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// Rotor hub to centre of gravity, m.
    pub arm_length: f64,
    /// m
    pub rotor_radius: f64,
    /// kg m^2
    pub ixx: f64,
    pub iyy: f64,
    pub izz: f64,
    /// Rotor rotational inertia, kg m^2.
    pub rotor_inertia: f64,
    /// Thrust coefficient K_T, N s^2/rad^2.
    pub thrust_coeff: f64,
    /// Yaw drag coefficient K_D, N m s^2/rad^2.
    pub drag_coeff: f64,
    /// Translational friction B, N s/m. Zero disables the term.
    pub linear_drag: f64,
    /// Per-rotor speed ceiling, rad/s.
    pub omega_max: f64,
}

/// Thrust coefficient calibrated from the coaxial pair force report
/// (15.67 N for two rotors at 2800 rpm).
pub const DEFAULT_THRUST_COEFF: f64 = 9.11e-5;

impl VehicleParams {
    pub fn mars_octorotor() -> Self {
        let rotor_radius = 0.56;
        Self {
            mass: 12.0,
            arm_length: 1.3,
            rotor_radius,
            ixx: 1.2,
            iyy: 1.2,
            izz: 2.2,
            rotor_inertia: 0.02,
            thrust_coeff: DEFAULT_THRUST_COEFF,
            drag_coeff: 0.1 * DEFAULT_THRUST_COEFF * rotor_radius,
            linear_drag: 0.0,
            omega_max: rpm_to_rad_s(2800.0),
        }
    }

    /// Upper bound on a single squared rotor speed.
    pub fn omega_sq_max(&self) -> f64 {
        self.omega_max * self.omega_max
    }

    pub fn weight(&self, env: &EnvParams) -> f64 {
        self.mass * env.gravity
    }

    /// Field-level problems, including tip-Mach feasibility at `omega_max`.
    pub fn violations(&self, env: &EnvParams) -> Vec<Violation> {
        let mut out = Vec::new();
        let positive = [
            ("vehicle.mass", self.mass),
            ("vehicle.arm_length", self.arm_length),
            ("vehicle.rotor_radius", self.rotor_radius),
            ("vehicle.ixx", self.ixx),
            ("vehicle.iyy", self.iyy),
            ("vehicle.izz", self.izz),
            ("vehicle.rotor_inertia", self.rotor_inertia),
            ("vehicle.thrust_coeff", self.thrust_coeff),
            ("vehicle.drag_coeff", self.drag_coeff),
            ("vehicle.omega_max", self.omega_max),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                out.push(Violation::new(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.linear_drag.is_finite() && self.linear_drag >= 0.0) {
            out.push(Violation::new(
                "vehicle.linear_drag",
                format!("must be finite and >= 0, got {}", self.linear_drag),
            ));
        }
        if out.is_empty() && env.violations().is_empty() {
            let mach = tip_mach(self.omega_max, self.rotor_radius, speed_of_sound(env))
                .expect("speed of sound is positive for a valid environment");
            if mach >= 1.0 {
                out.push(Violation::new(
                    "vehicle.omega_max",
                    format!(
                        "tip Mach {mach:.3} at omega_max = {:.1} rad/s and radius {} m is not subsonic",
                        self.omega_max, self.rotor_radius
                    ),
                ));
            }
        }
        out
    }

    pub fn validate(&self, env: &EnvParams) -> Result<(), Error> {
        Error::from_violations(self.violations(env))
    }
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self::mars_octorotor()
    }
}

pub fn rpm_to_rad_s(rpm: f64) -> f64 {
    rpm * 2.0 * PI / 60.0
}

pub fn rad_s_to_rpm(omega: f64) -> f64 {
    omega * 60.0 / (2.0 * PI)
}

/// `a = sqrt(gamma R T)`.
pub fn speed_of_sound(env: &EnvParams) -> f64 {
    (env.gamma * env.gas_constant * env.temperature).sqrt()
}

/// Mach number of a rotor tip spinning at `omega` with radius `radius`.
pub fn tip_mach(omega: f64, radius: f64, speed_of_sound: f64) -> Result<f64, Error> {
    if !(speed_of_sound > 0.0) {
        return Err(Error::invalid("speed_of_sound", "must be > 0"));
    }
    if !(omega >= 0.0) {
        return Err(Error::invalid("omega", "must be >= 0"));
    }
    if !(radius > 0.0) {
        return Err(Error::invalid("radius", "must be > 0"));
    }
    Ok(omega * radius / speed_of_sound)
}

/// Mach number of an arbitrary flow speed.
pub fn mach_from_velocity(velocity: f64, speed_of_sound: f64) -> Result<f64, Error> {
    if !(speed_of_sound > 0.0) {
        return Err(Error::invalid("speed_of_sound", "must be > 0"));
    }
    Ok(velocity / speed_of_sound)
}

/// Solve `F = n K_T Omega^2` for `K_T` given a measured total force.
pub fn calibrate_thrust_coeff(total_force: f64, rpm: f64, n_rotors: usize) -> Result<f64, Error> {
    if !(total_force > 0.0 && total_force.is_finite()) {
        return Err(Error::invalid("total_force", "must be finite and > 0"));
    }
    if !(rpm > 0.0 && rpm.is_finite()) {
        return Err(Error::invalid("rpm", "must be finite and > 0"));
    }
    if n_rotors == 0 {
        return Err(Error::invalid("n_rotors", "must be >= 1"));
    }
    let omega = rpm_to_rad_s(rpm);
    Ok(total_force / (n_rotors as f64 * omega * omega))
}

/// Per-rotor speed at which the eight rotors together carry the weight.
pub fn hover_speed(veh: &VehicleParams, env: &EnvParams) -> f64 {
    (hover_omega_sq(veh, env)).sqrt()
}

/// Squared per-rotor hover speed, `m g / (8 K_T)`.
pub fn hover_omega_sq(veh: &VehicleParams, env: &EnvParams) -> f64 {
    veh.mass * env.gravity / (ROTOR_COUNT as f64 * veh.thrust_coeff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn speed_of_sound_earth_and_mars() {
        assert_abs_diff_eq!(speed_of_sound(&EnvParams::earth()), 340.4, epsilon = 0.2);
        assert_abs_diff_eq!(speed_of_sound(&EnvParams::mars()), 233.0, epsilon = 0.5);
    }

    #[test]
    fn speed_of_sound_unit_product() {
        let env = EnvParams {
            gamma: 1.25,
            gas_constant: 0.8,
            temperature: 1.0,
            ..EnvParams::mars()
        };
        assert_abs_diff_eq!(speed_of_sound(&env), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn mach_numbers_from_flow_report() {
        assert_abs_diff_eq!(mach_from_velocity(396.0, 244.0).unwrap(), 1.62, epsilon = 0.01);
        assert_abs_diff_eq!(mach_from_velocity(202.4, 244.0).unwrap(), 0.83, epsilon = 0.01);
        assert_eq!(tip_mach(0.0, 0.5, 233.0).unwrap(), 0.0);
        assert!(tip_mach(10.0, 0.5, 0.0).is_err());
        assert!(mach_from_velocity(10.0, -1.0).is_err());
    }

    #[test]
    fn thrust_coefficient_calibration() {
        // Omega = 2800 rpm = 293.215 rad/s; 15.67 / (2 * 293.215^2)
        assert_abs_diff_eq!(calibrate_thrust_coeff(15.67, 2800.0, 2).unwrap(), 9.11e-5, epsilon = 1e-7);
        assert_abs_diff_eq!(calibrate_thrust_coeff(11.5, 3200.0, 1).unwrap(), 1.024e-4, epsilon = 1e-6);
        assert_abs_diff_eq!(
            calibrate_thrust_coeff(1.0, 60.0 / (2.0 * PI), 1).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert!(calibrate_thrust_coeff(0.0, 2800.0, 2).is_err());
        assert!(calibrate_thrust_coeff(1.0, -5.0, 2).is_err());
        assert!(calibrate_thrust_coeff(1.0, 2800.0, 0).is_err());
    }

    #[test]
    fn hover_speed_defaults() {
        let veh = VehicleParams::default();
        let env = EnvParams::mars();
        let w = hover_speed(&veh, &env);
        assert_abs_diff_eq!(w, 247.2, epsilon = 0.5);
        let a = speed_of_sound(&env);
        assert!(tip_mach(w, veh.rotor_radius, a).unwrap() < 1.0);
    }

    #[test]
    fn hover_speed_normalised() {
        let env = EnvParams::mars();
        let veh = VehicleParams {
            thrust_coeff: 12.0 * env.gravity / 8.0,
            ..VehicleParams::default()
        };
        assert_abs_diff_eq!(hover_speed(&veh, &env), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn defaults_validate() {
        let env = EnvParams::mars();
        env.validate().unwrap();
        VehicleParams::default().validate(&env).unwrap();
        EnvParams::earth().validate().unwrap();
    }

    #[test]
    fn supersonic_tip_rejected() {
        let env = EnvParams::mars();
        let veh = VehicleParams {
            rotor_radius: 1.12,
            ..VehicleParams::default()
        };
        let v = veh.violations(&env);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "vehicle.omega_max");
    }

    #[test]
    fn negative_mass_is_field_level() {
        let env = EnvParams::mars();
        let veh = VehicleParams {
            mass: -1.0,
            ..VehicleParams::default()
        };
        let v = veh.violations(&env);
        assert!(v.iter().any(|x| x.field == "vehicle.mass"));
    }

    #[test]
    fn gamma_out_of_range() {
        let env = EnvParams {
            gamma: 2.5,
            ..EnvParams::mars()
        };
        assert!(env.validate().is_err());
    }

    proptest::proptest! {
        #[test]
        fn speed_of_sound_monotone(g in 1.01f64..1.9, r in 10.0f64..400.0, t in 50.0f64..400.0, bump in 1e-3f64..1.0) {
            let base = EnvParams { gamma: g, gas_constant: r, temperature: t, ..EnvParams::mars() };
            let a0 = speed_of_sound(&base);
            let more_gamma = EnvParams { gamma: g + bump * 0.05, ..base };
            let more_r = EnvParams { gas_constant: r + bump, ..base };
            let more_t = EnvParams { temperature: t + bump, ..base };
            proptest::prop_assert!(speed_of_sound(&more_gamma) > a0);
            proptest::prop_assert!(speed_of_sound(&more_r) > a0);
            proptest::prop_assert!(speed_of_sound(&more_t) > a0);
        }

        #[test]
        fn calibration_round_trip(f in 0.1f64..100.0, rpm in 100.0f64..6000.0, n in 1usize..9) {
            let kt = calibrate_thrust_coeff(f, rpm, n).unwrap();
            let w = rpm_to_rad_s(rpm);
            let back = n as f64 * kt * w * w;
            proptest::prop_assert!((back - f).abs() <= 4.0 * f64::EPSILON * f);
        }
    }
}
