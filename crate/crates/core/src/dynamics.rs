//! Nonlinear 12-state rigid-body model of the coaxial octorotor, the
//! rotor-speed to wrench map and minimum-norm control allocation.
//!
//! Rotor numbering: rotors 1,2 sit on the -x (rear) arm, 3,4 on -y,
//! 5,6 on +x and 7,8 on +y. Odd rotors spin one way and even rotors the
//! other, which is what the sign pattern of the yaw moment and of the net
//! rotor speed encodes.

use std::f64::consts::PI;

use nalgebra::{Matrix4, SMatrix, SVector, Vector4};
use serde::{Deserialize, Serialize};

use crate::env::{EnvParams, VehicleParams, ROTOR_COUNT};
use crate::error::{Error, Result};

pub type StateVector = SVector<f64, 12>;
pub type InputVector = SVector<f64, 8>;

/// Indices into the stacked state vector.
pub mod idx {
    pub const X: usize = 0;
    pub const Y: usize = 1;
    pub const Z: usize = 2;
    pub const VX: usize = 3;
    pub const VY: usize = 4;
    pub const VZ: usize = 5;
    pub const PHI: usize = 6;
    pub const THETA: usize = 7;
    pub const PSI: usize = 8;
    pub const PHI_DOT: usize = 9;
    pub const THETA_DOT: usize = 10;
    pub const PSI_DOT: usize = 11;
}

/// Wrap an angle into (-pi, pi]. Values already in range are returned
/// untouched.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        PI
    } else {
        w
    }
}

/// Ground-frame position and velocity, Euler angles and Euler rates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct State12 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
    pub phi_dot: f64,
    pub theta_dot: f64,
    pub psi_dot: f64,
}

impl State12 {
    pub const FIELD_NAMES: [&'static str; 12] = [
        "x", "y", "z", "vx", "vy", "vz", "phi", "theta", "psi", "phi_dot", "theta_dot", "psi_dot",
    ];

    /// Hovering at rest at the given position and heading.
    pub fn at_rest(x: f64, y: f64, z: f64, psi: f64) -> Self {
        Self {
            x,
            y,
            z,
            psi: wrap_angle(psi),
            ..Self::default()
        }
    }

    pub fn to_vector(&self) -> StateVector {
        StateVector::from([
            self.x,
            self.y,
            self.z,
            self.vx,
            self.vy,
            self.vz,
            self.phi,
            self.theta,
            self.psi,
            self.phi_dot,
            self.theta_dot,
            self.psi_dot,
        ])
    }

    /// Builds a state from a stacked vector, wrapping the three angles.
    pub fn from_vector(v: &StateVector) -> Self {
        Self {
            x: v[0],
            y: v[1],
            z: v[2],
            vx: v[3],
            vy: v[4],
            vz: v[5],
            phi: wrap_angle(v[6]),
            theta: wrap_angle(v[7]),
            psi: wrap_angle(v[8]),
            phi_dot: v[9],
            theta_dot: v[10],
            psi_dot: v[11],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Squared rotor speeds, rad^2/s^2, for rotors 1..8.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotorCommand(pub [f64; ROTOR_COUNT]);

impl RotorCommand {
    pub fn uniform(omega_sq: f64) -> Self {
        Self([omega_sq; ROTOR_COUNT])
    }

    /// Every rotor at hover speed.
    pub fn hover(veh: &VehicleParams, env: &EnvParams) -> Self {
        Self::uniform(crate::env::hover_omega_sq(veh, env))
    }

    pub fn omega_sq(&self) -> &[f64; ROTOR_COUNT] {
        &self.0
    }

    pub fn to_vector(&self) -> InputVector {
        InputVector::from(self.0)
    }

    pub fn from_vector(v: &InputVector) -> Self {
        let mut out = [0.0; ROTOR_COUNT];
        out.copy_from_slice(v.as_slice());
        Self(out)
    }

    /// Positive rotor speeds, rad/s.
    pub fn speeds(&self) -> [f64; ROTOR_COUNT] {
        self.0.map(|w| w.max(0.0).sqrt())
    }

    pub fn check_non_negative(&self) -> Result<()> {
        match self.0.iter().position(|w| !(*w >= 0.0)) {
            Some(i) => Err(Error::NegativeRotorCommand {
                rotor: i + 1,
                value: self.0[i],
            }),
            None => Ok(()),
        }
    }

    pub fn within(&self, lower: f64, upper: f64) -> bool {
        self.0.iter().all(|w| *w >= lower && *w <= upper)
    }
}

/// Total thrust, body moments and net rotor speed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Wrench {
    /// U1, N, positive up.
    pub thrust: f64,
    /// U2, N m.
    pub roll: f64,
    /// U3, N m.
    pub pitch: f64,
    /// U4, N m.
    pub yaw: f64,
    /// Net rotor speed used by the gyroscopic terms, rad/s.
    pub rotor_speed_sum: f64,
}

impl Wrench {
    pub fn new(thrust: f64, roll: f64, pitch: f64, yaw: f64) -> Self {
        Self {
            thrust,
            roll,
            pitch,
            yaw,
            rotor_speed_sum: 0.0,
        }
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.thrust, self.roll, self.pitch, self.yaw)
    }
}

// Sign of each rotor in the roll, pitch and yaw rows and in the net speed.
const ROLL_PATTERN: [f64; 8] = [0.0, 0.0, -1.0, -1.0, 0.0, 0.0, 1.0, 1.0];
const PITCH_PATTERN: [f64; 8] = [-1.0, -1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0];
const SPIN_PATTERN: [f64; 8] = [-1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0];

/// Allocation matrix with the row convention used in the literature for
/// this vehicle: rows (thrust, tau_x, tau_y, tau_z), thrust row `-K_T`
/// because thrust points along body -z.
pub fn allocation_matrix(veh: &VehicleParams) -> SMatrix<f64, 4, 8> {
    let mut a = lift_matrix(veh);
    a.row_mut(0).neg_mut();
    a
}

/// Same as [`allocation_matrix`] but with upward thrust positive, which is
/// the convention of the equations of motion.
fn lift_matrix(veh: &VehicleParams) -> SMatrix<f64, 4, 8> {
    let dk = veh.arm_length * veh.thrust_coeff;
    SMatrix::<f64, 4, 8>::from_fn(|r, c| match r {
        0 => veh.thrust_coeff,
        1 => dk * ROLL_PATTERN[c],
        2 => dk * PITCH_PATTERN[c],
        _ => veh.drag_coeff * SPIN_PATTERN[c],
    })
}

/// U1..U4 and net rotor speed produced by a rotor command.
pub fn wrench_from_rotors(cmd: &RotorCommand, veh: &VehicleParams) -> Result<Wrench> {
    cmd.check_non_negative()?;
    Ok(wrench_unchecked(&cmd.0, veh))
}

fn wrench_unchecked(w2: &[f64; 8], veh: &VehicleParams) -> Wrench {
    let dk = veh.arm_length * veh.thrust_coeff;
    let (mut sum, mut roll, mut pitch, mut yaw, mut spin) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..ROTOR_COUNT {
        sum += w2[i];
        roll += ROLL_PATTERN[i] * w2[i];
        pitch += PITCH_PATTERN[i] * w2[i];
        yaw += SPIN_PATTERN[i] * w2[i];
        spin += SPIN_PATTERN[i] * w2[i].max(0.0).sqrt();
    }
    Wrench {
        thrust: veh.thrust_coeff * sum,
        roll: dk * roll,
        pitch: dk * pitch,
        yaw: veh.drag_coeff * yaw,
        rotor_speed_sum: spin,
    }
}

/// Result of mapping a wrench onto the rotors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allocation {
    /// Command after clamping into `[0, omega_max^2]`.
    pub command: RotorCommand,
    /// Minimum-norm solution before clamping.
    pub unclamped: [f64; ROTOR_COUNT],
    /// True when at least one rotor had to be clamped.
    pub saturated: bool,
}

/// Minimum-norm allocator. The right pseudo-inverse of the 4x8 lift
/// matrix is computed once per vehicle.
#[derive(Debug, Clone)]
pub struct Allocator {
    pinv: SMatrix<f64, 8, 4>,
    omega_sq_max: f64,
}

impl Allocator {
    pub fn new(veh: &VehicleParams) -> Self {
        let a = lift_matrix(veh);
        let gram: Matrix4<f64> = a * a.transpose();
        let gram_inv = gram
            .try_inverse()
            .expect("allocation rows are orthogonal and non-zero for positive K_T, K_D, d");
        Self {
            pinv: a.transpose() * gram_inv,
            omega_sq_max: veh.omega_sq_max(),
        }
    }

    pub fn pseudo_inverse(&self) -> &SMatrix<f64, 8, 4> {
        &self.pinv
    }

    pub fn allocate(&self, target: &Wrench) -> Result<Allocation> {
        let v = target.as_vector();
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("wrench", "must be finite"));
        }
        if target.thrust < 0.0 {
            return Err(Error::InfeasibleThrust(target.thrust));
        }
        let raw = self.pinv * v;
        let mut unclamped = [0.0; ROTOR_COUNT];
        unclamped.copy_from_slice(raw.as_slice());
        let mut saturated = false;
        let clamped = unclamped.map(|w| {
            let c = w.clamp(0.0, self.omega_sq_max);
            saturated |= c != w;
            c
        });
        Ok(Allocation {
            command: RotorCommand(clamped),
            unclamped,
            saturated,
        })
    }
}

/// One-shot allocation; build an [`Allocator`] when calling repeatedly.
pub fn allocate(target: &Wrench, veh: &VehicleParams) -> Result<Allocation> {
    Allocator::new(veh).allocate(target)
}

/// Time derivative of the state under a rotor command.
pub fn state_derivative(
    state: &State12,
    cmd: &RotorCommand,
    veh: &VehicleParams,
    env: &EnvParams,
) -> Result<StateVector> {
    if !state.is_finite() {
        return Err(Error::NonFiniteState);
    }
    cmd.check_non_negative()?;
    Ok(derivative(&state.to_vector(), &cmd.0, veh, env))
}

/// Unchecked right-hand side on raw vectors. Negative squared speeds are
/// allowed (they only arise in finite-difference probes) and contribute
/// linearly to the wrench; the gyroscopic net speed uses their positive
/// part.
pub(crate) fn derivative(
    x: &StateVector,
    omega_sq: &[f64; 8],
    veh: &VehicleParams,
    env: &EnvParams,
) -> StateVector {
    let w = wrench_unchecked(omega_sq, veh);
    let (phi, theta, psi) = (x[idx::PHI], x[idx::THETA], x[idx::PSI]);
    let (p, q, r) = (x[idx::PHI_DOT], x[idx::THETA_DOT], x[idx::PSI_DOT]);
    let (sphi, cphi) = phi.sin_cos();
    let (sth, cth) = theta.sin_cos();
    let (spsi, cpsi) = psi.sin_cos();
    let thrust_acc = w.thrust / veh.mass;
    let drag = veh.linear_drag / veh.mass;

    let mut d = StateVector::zeros();
    d[idx::X] = x[idx::VX];
    d[idx::Y] = x[idx::VY];
    d[idx::Z] = x[idx::VZ];
    d[idx::VX] = (spsi * sphi + cpsi * sth * cphi) * thrust_acc - drag * x[idx::VX];
    d[idx::VY] = (-cpsi * sphi + spsi * sth * cphi) * thrust_acc - drag * x[idx::VY];
    d[idx::VZ] = cth * cphi * thrust_acc - env.gravity - drag * x[idx::VZ];
    d[idx::PHI] = p;
    d[idx::THETA] = q;
    d[idx::PSI] = r;
    d[idx::PHI_DOT] =
        (q * r * (veh.iyy - veh.izz) - veh.rotor_inertia * q * w.rotor_speed_sum + w.roll) / veh.ixx;
    d[idx::THETA_DOT] =
        (p * r * (veh.izz - veh.ixx) - veh.rotor_inertia * p * w.rotor_speed_sum + w.pitch) / veh.iyy;
    d[idx::PSI_DOT] = (p * q * (veh.ixx - veh.iyy) + w.yaw) / veh.izz;
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::hover_omega_sq;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn setup() -> (VehicleParams, EnvParams) {
        (VehicleParams::default(), EnvParams::mars())
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert_eq!(wrap_angle(1e-20), 1e-20);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-0.5 - 2.0 * PI), -0.5, epsilon = 1e-12);
    }

    #[test]
    fn uniform_command_has_no_moments() {
        let (veh, _) = setup();
        let s = 5000.0;
        let w = wrench_from_rotors(&RotorCommand::uniform(s), &veh).unwrap();
        assert_eq!(w.roll, 0.0);
        assert_eq!(w.pitch, 0.0);
        assert_eq!(w.yaw, 0.0);
        assert_eq!(w.rotor_speed_sum, 0.0);
        assert_abs_diff_eq!(w.thrust, 8.0 * veh.thrust_coeff * s, epsilon = 1e-12);
    }

    #[test]
    fn raising_rotors_seven_and_eight_rolls() {
        let (veh, env) = setup();
        let h = hover_omega_sq(&veh, &env);
        let delta = 1000.0;
        let mut c = [h; 8];
        c[6] += delta;
        c[7] += delta;
        let w = wrench_from_rotors(&RotorCommand(c), &veh).unwrap();
        assert_abs_diff_eq!(w.roll, 2.0 * veh.arm_length * veh.thrust_coeff * delta, epsilon = 1e-12);
        assert_eq!(w.pitch, 0.0);
    }

    #[test]
    fn hover_command_balances_weight() {
        let (veh, env) = setup();
        let w = wrench_from_rotors(&RotorCommand::hover(&veh, &env), &veh).unwrap();
        assert_abs_diff_eq!(w.thrust, veh.mass * env.gravity, epsilon = 1e-9);
    }

    #[test]
    fn negative_command_rejected() {
        let (veh, _) = setup();
        let mut c = [1.0; 8];
        c[4] = -1.0;
        match wrench_from_rotors(&RotorCommand(c), &veh) {
            Err(Error::NegativeRotorCommand { rotor: 5, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn allocation_matrix_layout() {
        let (veh, _) = setup();
        let a = allocation_matrix(&veh);
        let dk = veh.arm_length * veh.thrust_coeff;
        for c in 0..8 {
            assert_eq!(a[(0, c)], -veh.thrust_coeff);
        }
        for c in [0, 1, 4, 5] {
            assert_eq!(a[(1, c)], 0.0);
        }
        assert_eq!(a[(1, 2)], -dk);
        assert_eq!(a[(1, 3)], -dk);
        assert_eq!(a[(1, 6)], dk);
        assert_eq!(a[(1, 7)], dk);
        assert_eq!(a[(3, 0)], -veh.drag_coeff);
        assert_eq!(a[(3, 1)], veh.drag_coeff);
    }

    #[test]
    fn allocation_matrix_full_rank() {
        for (kt, kd, d) in [(9.11e-5, 5.1e-6, 1.3), (1.0, 1.0, 1.0), (1e-3, 2.0, 0.1)] {
            let veh = VehicleParams {
                thrust_coeff: kt,
                drag_coeff: kd,
                arm_length: d,
                ..VehicleParams::default()
            };
            let sv = allocation_matrix(&veh).svd(false, false).singular_values;
            let tol = sv.max() * 1e-12;
            assert_eq!(sv.iter().filter(|s| **s > tol).count(), 4);
        }
    }

    #[test]
    fn symmetric_hover_allocation() {
        let (veh, env) = setup();
        let mg = veh.mass * env.gravity;
        let out = allocate(&Wrench::new(mg, 0.0, 0.0, 0.0), &veh).unwrap();
        assert!(!out.saturated);
        for w in out.command.0 {
            assert_abs_diff_eq!(w, mg / (8.0 * veh.thrust_coeff), epsilon = 1e-8);
        }
    }

    #[test]
    fn pure_yaw_allocation() {
        let (veh, _) = setup();
        let tau = 0.01;
        let out = allocate(&Wrench::new(0.0, 0.0, 0.0, tau), &veh).unwrap();
        let mag = tau / (8.0 * veh.drag_coeff);
        for (i, w) in out.unclamped.iter().enumerate() {
            let expected = if i % 2 == 0 { -mag } else { mag };
            assert_abs_diff_eq!(*w, expected, epsilon = 1e-9 * mag);
        }
        assert!(out.saturated);
        for (i, w) in out.command.0.iter().enumerate() {
            if i % 2 == 0 {
                assert_eq!(*w, 0.0);
            }
        }
    }

    #[test]
    fn negative_thrust_infeasible() {
        let (veh, _) = setup();
        assert!(matches!(
            allocate(&Wrench::new(-1.0, 0.0, 0.0, 0.0), &veh),
            Err(Error::InfeasibleThrust(_))
        ));
    }

    #[test]
    fn hover_is_equilibrium() {
        let (veh, env) = setup();
        let d = state_derivative(&State12::default(), &RotorCommand::hover(&veh, &env), &veh, &env).unwrap();
        assert!(d.amax() < 1e-12, "{d}");
    }

    #[test]
    fn free_fall() {
        let (veh, env) = setup();
        let d = state_derivative(&State12::default(), &RotorCommand::uniform(0.0), &veh, &env).unwrap();
        assert_eq!(d[idx::VZ], -3.711);
        assert_eq!(d.iter().filter(|v| **v != 0.0).count(), 1);
    }

    #[test]
    fn small_pitch_accelerates_forward() {
        let (veh, env) = setup();
        let s = State12 {
            theta: 0.05,
            ..State12::default()
        };
        let d = state_derivative(&s, &RotorCommand::hover(&veh, &env), &veh, &env).unwrap();
        // g * theta = 0.18555
        assert_abs_diff_eq!(d[idx::VX], env.gravity * 0.05, epsilon = 1e-4);
    }

    #[test]
    fn linear_drag_opposes_velocity() {
        let (mut veh, env) = setup();
        veh.linear_drag = 0.6;
        let s = State12 {
            vx: 2.0,
            ..State12::default()
        };
        let d = state_derivative(&s, &RotorCommand::hover(&veh, &env), &veh, &env).unwrap();
        assert_abs_diff_eq!(d[idx::VX], -0.1, epsilon = 1e-12);
    }

    #[test]
    fn non_finite_state_rejected() {
        let (veh, env) = setup();
        let s = State12 {
            z: f64::NAN,
            ..State12::default()
        };
        assert!(matches!(
            state_derivative(&s, &RotorCommand::hover(&veh, &env), &veh, &env),
            Err(Error::NonFiniteState)
        ));
    }

    fn arb_command(max: f64) -> impl Strategy<Value = [f64; 8]> {
        proptest::array::uniform8(0.0..max)
    }

    fn arb_state() -> impl Strategy<Value = State12> {
        (
            proptest::array::uniform6(-5.0f64..5.0),
            proptest::array::uniform3(-1.2f64..1.2),
            proptest::array::uniform3(-2.0f64..2.0),
        )
            .prop_map(|(a, b, c)| State12 {
                x: a[0],
                y: a[1],
                z: a[2],
                vx: a[3],
                vy: a[4],
                vz: a[5],
                phi: b[0],
                theta: b[1],
                psi: b[2],
                phi_dot: c[0],
                theta_dot: c[1],
                psi_dot: c[2],
            })
    }

    proptest! {
        #[test]
        fn wrench_is_linear(a in arb_command(8e4), b in arb_command(8e4), k in 0.0f64..3.0) {
            let veh = VehicleParams::default();
            let mut sum = [0.0; 8];
            for i in 0..8 { sum[i] = a[i] + k * b[i]; }
            let wa = wrench_from_rotors(&RotorCommand(a), &veh).unwrap().as_vector();
            let wb = wrench_from_rotors(&RotorCommand(b), &veh).unwrap().as_vector();
            let ws = wrench_from_rotors(&RotorCommand(sum), &veh).unwrap().as_vector();
            let err = (ws - (wa + wb * k)).amax();
            prop_assert!(err <= 1e-12 * (1.0 + ws.amax()));
        }

        #[test]
        fn equal_increments_leave_moments(a in arb_command(6e4), inc in 0.0f64..2e4) {
            let veh = VehicleParams::default();
            let w0 = wrench_from_rotors(&RotorCommand(a), &veh).unwrap();
            let w1 = wrench_from_rotors(&RotorCommand(a.map(|v| v + inc)), &veh).unwrap();
            prop_assert!((w0.roll - w1.roll).abs() < 1e-12);
            prop_assert!((w0.pitch - w1.pitch).abs() < 1e-12);
            prop_assert!((w0.yaw - w1.yaw).abs() < 1e-12);
        }

        #[test]
        fn zero_thrust_is_free_fall(s in arb_state()) {
            let (veh, env) = (VehicleParams::default(), EnvParams::mars());
            let d = state_derivative(&s, &RotorCommand::uniform(0.0), &veh, &env).unwrap();
            prop_assert_eq!(d[idx::VX], 0.0);
            prop_assert_eq!(d[idx::VY], 0.0);
            prop_assert_eq!(d[idx::VZ], -env.gravity);
        }

        #[test]
        fn heading_rotates_horizontal_acceleration(s in arb_state(), offset in -PI..PI, c in arb_command(8e4)) {
            let (veh, env) = (VehicleParams::default(), EnvParams::mars());
            let cmd = RotorCommand(c);
            let (so, co) = offset.sin_cos();
            let rotated = State12 {
                x: co * s.x - so * s.y,
                y: so * s.x + co * s.y,
                vx: co * s.vx - so * s.vy,
                vy: so * s.vx + co * s.vy,
                psi: s.psi + offset,
                ..s
            };
            let d0 = state_derivative(&s, &cmd, &veh, &env).unwrap();
            let d1 = state_derivative(&rotated, &cmd, &veh, &env).unwrap();
            let ex = co * d0[idx::VX] - so * d0[idx::VY];
            let ey = so * d0[idx::VX] + co * d0[idx::VY];
            prop_assert!((d1[idx::VX] - ex).abs() < 1e-9);
            prop_assert!((d1[idx::VY] - ey).abs() < 1e-9);
        }

        #[test]
        fn allocation_round_trip(t in 0.0f64..60.0, r in -5.0f64..5.0, p in -5.0f64..5.0, y in -0.05f64..0.05) {
            let veh = VehicleParams::default();
            let target = Wrench::new(t, r, p, y);
            let out = Allocator::new(&veh).allocate(&target).unwrap();
            // linear identity on the unclamped solution
            let back = lift_matrix(&veh) * InputVector::from(out.unclamped);
            let err = (back - target.as_vector()).norm();
            prop_assert!(err <= 1e-10 * target.as_vector().norm().max(1e-12));
            if !out.saturated {
                let w = wrench_from_rotors(&out.command, &veh).unwrap();
                prop_assert!((w.as_vector() - target.as_vector()).norm() <= 1e-10 * target.as_vector().norm().max(1e-12));
            }
        }

        #[test]
        fn allocation_is_identity_on_min_norm_subspace(coeffs in proptest::array::uniform4(-1e4f64..1e4)) {
            // any vector in the row space of A is reproduced by A+ A
            let veh = VehicleParams::default();
            let a = lift_matrix(&veh);
            let u = a.transpose() * Vector4::from(coeffs) / veh.thrust_coeff;
            let alloc = Allocator::new(&veh);
            let back = alloc.pseudo_inverse() * (a * u);
            prop_assert!((back - u).norm() <= 1e-10 * u.norm().max(1e-12));
        }
    }
}
