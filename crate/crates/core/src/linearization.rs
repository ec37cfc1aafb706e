//! Near-hover linear model, its zero-order-hold discretisation and a
//! central-difference Jacobian of the nonlinear model used to check it.

use nalgebra::{SMatrix, SVector};

use crate::dynamics::{derivative, idx, InputVector, RotorCommand, State12, StateVector};
use crate::env::{EnvParams, VehicleParams};
use crate::error::{Error, Result};

pub type SystemMatrix = SMatrix<f64, 12, 12>;
pub type InputMatrix = SMatrix<f64, 12, 8>;
pub type OutputMatrix = SMatrix<f64, 4, 12>;
pub type FeedthroughMatrix = SMatrix<f64, 4, 8>;

/// Output rows of C: x, y, z, psi.
pub const OUTPUT_STATES: [usize; 4] = [idx::X, idx::Y, idx::Z, idx::PSI];

/// `dx' = A dx + B du`, `dy = C dx + D du` about `(x_ref, u_ref)`.
/// `dt == 0` marks a continuous-time model.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: SystemMatrix,
    pub b: InputMatrix,
    pub c: OutputMatrix,
    pub d: FeedthroughMatrix,
    pub x_ref: State12,
    pub u_ref: RotorCommand,
    pub dt: f64,
}

impl LinearModel {
    pub fn is_continuous(&self) -> bool {
        self.dt == 0.0
    }

    /// One step of the discrete model in absolute coordinates.
    pub fn step(&self, x: &StateVector, u: &InputVector) -> StateVector {
        let xr = self.x_ref.to_vector();
        let ur = self.u_ref.to_vector();
        xr + self.a * (x - xr) + self.b * (u - ur)
    }
}

fn output_matrix() -> OutputMatrix {
    let mut c = OutputMatrix::zeros();
    for (row, col) in OUTPUT_STATES.iter().enumerate() {
        c[(row, *col)] = 1.0;
    }
    c
}

/// Analytic small-angle model about hover at the origin.
pub fn linearize_hover(veh: &VehicleParams, env: &EnvParams) -> LinearModel {
    let g = env.gravity;
    let mut a = SystemMatrix::zeros();
    a[(idx::X, idx::VX)] = 1.0;
    a[(idx::Y, idx::VY)] = 1.0;
    a[(idx::Z, idx::VZ)] = 1.0;
    a[(idx::VX, idx::THETA)] = g;
    a[(idx::VY, idx::PHI)] = -g;
    a[(idx::PHI, idx::PHI_DOT)] = 1.0;
    a[(idx::THETA, idx::THETA_DOT)] = 1.0;
    a[(idx::PSI, idx::PSI_DOT)] = 1.0;

    let kt = veh.thrust_coeff;
    let roll = veh.arm_length * kt / veh.ixx;
    let pitch = veh.arm_length * kt / veh.iyy;
    let yaw = veh.drag_coeff / veh.izz;
    let roll_sign = [0.0, 0.0, -1.0, -1.0, 0.0, 0.0, 1.0, 1.0];
    let pitch_sign = [-1.0, -1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0];
    let mut b = InputMatrix::zeros();
    for c in 0..8 {
        let spin = if c % 2 == 0 { -1.0 } else { 1.0 };
        b[(idx::VZ, c)] = kt / veh.mass;
        b[(idx::PHI_DOT, c)] = roll * roll_sign[c];
        b[(idx::THETA_DOT, c)] = pitch * pitch_sign[c];
        b[(idx::PSI_DOT, c)] = yaw * spin;
    }

    LinearModel {
        a,
        b,
        c: output_matrix(),
        d: FeedthroughMatrix::zeros(),
        x_ref: State12::default(),
        u_ref: RotorCommand::hover(veh, env),
        dt: 0.0,
    }
}

/// Exact zero-order-hold discretisation. The hover `A` is nilpotent of
/// index 4, so `exp(A Ts)` and its integral are finite series.
pub fn discretize(model: &LinearModel, ts: f64) -> Result<LinearModel> {
    if !(ts > 0.0 && ts.is_finite()) {
        return Err(Error::invalid("ts", "sampling time must be finite and > 0"));
    }
    if !model.is_continuous() {
        return Err(Error::WrongModelKind {
            expected: "continuous",
        });
    }
    let at = model.a * ts;
    let at2 = at * at;
    let at3 = at2 * at;
    if (at3 * at).amax() != 0.0 {
        return Err(Error::invalid("model.a", "zero-order hold series requires A^4 = 0"));
    }
    let i = SystemMatrix::identity();
    let ad = i + at + at2 / 2.0 + at3 / 6.0;
    // integral_0^Ts exp(A s) ds = Ts (I + A Ts/2 + (A Ts)^2/6 + (A Ts)^3/24)
    let gamma = (i + at / 2.0 + at2 / 6.0 + at3 / 24.0) * ts;
    Ok(LinearModel {
        a: ad,
        b: gamma * model.b,
        dt: ts,
        ..model.clone()
    })
}

/// Central finite differences of the nonlinear right-hand side.
pub fn numeric_jacobian(
    x0: &State12,
    u0: &RotorCommand,
    eps: f64,
    veh: &VehicleParams,
    env: &EnvParams,
) -> Result<(SystemMatrix, InputMatrix)> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps", "must be > 0"));
    }
    if !x0.is_finite() {
        return Err(Error::NonFiniteState);
    }
    u0.check_non_negative()?;
    let x = x0.to_vector();
    let u = u0.0;
    let mut ja = SystemMatrix::zeros();
    for j in 0..12 {
        let mut xp = x;
        let mut xm = x;
        xp[j] += eps;
        xm[j] -= eps;
        let col: SVector<f64, 12> = (derivative(&xp, &u, veh, env) - derivative(&xm, &u, veh, env)) / (2.0 * eps);
        ja.set_column(j, &col);
    }
    let mut jb = InputMatrix::zeros();
    for j in 0..8 {
        let mut up = u;
        let mut um = u;
        up[j] += eps;
        um[j] -= eps;
        let col = (derivative(&x, &up, veh, env) - derivative(&x, &um, veh, env)) / (2.0 * eps);
        jb.set_column(j, &col);
    }
    Ok((ja, jb))
}

/// Rank of `[B, AB, ..., A^11 B]` with a relative singular-value cutoff.
pub fn controllability_rank(a: &SystemMatrix, b: &InputMatrix) -> usize {
    let mut ctrb = nalgebra::DMatrix::<f64>::zeros(12, 8 * 12);
    let mut block = *b;
    for k in 0..12 {
        // scale columns so the tiny yaw/rotor gains do not fall under the cutoff
        let mut scaled = block;
        for mut c in scaled.column_iter_mut() {
            let n = c.norm();
            if n > 0.0 {
                c /= n;
            }
        }
        ctrb.view_mut((0, 8 * k), (12, 8)).copy_from(&scaled);
        block = a * block;
    }
    let sv = ctrb.svd(false, false).singular_values;
    let tol = sv.max() * 1e-10;
    sv.iter().filter(|s| **s > tol).count()
}
