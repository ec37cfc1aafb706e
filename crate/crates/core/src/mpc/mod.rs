//! Condensed linear MPC about hover.
//!
//! Predicted states over the window `x_k .. x_{k+N-1}` are eliminated with
//! the prediction equation `dX = G dx_k + H dU`, leaving a dense QP in the
//! stacked input deviations `dU = U - U_ref`, which is solved with box
//! bounds on the squared rotor speeds. Only the first input is applied.

pub mod qp;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{idx, wrap_angle, RotorCommand, State12, StateVector};
use crate::env::{hover_omega_sq, EnvParams, VehicleParams, ROTOR_COUNT};
use crate::error::{Error, Result, Violation};
use crate::linearization::LinearModel;
use crate::trajectory::RefSample;

pub use qp::{solve_qp, BoxQp, QpSettings, QpSolution, QpStatus};

const NX: usize = 12;
const NU: usize = ROTOR_COUNT;
const NY: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcConfig {
    pub horizon: usize,
    /// Diagonal of the per-stage state weight.
    pub state_weight: [f64; NX],
    /// Diagonal of the per-stage input-deviation weight.
    pub input_weight: [f64; NU],
    /// Diagonal of the per-stage input-rate weight.
    pub rate_weight: [f64; NU],
    /// Box on each squared rotor speed, rad^2/s^2.
    pub u_min: [f64; NU],
    pub u_max: [f64; NU],
    pub qp_max_iter: usize,
    pub qp_tol: f64,
    /// When false the QP runs without bounds and only the applied command
    /// is clipped.
    pub constrained: bool,
}

/// Default per-stage state weights, ordered like the state vector. The
/// vertical velocity weight is raised to damp the thrust channel.
pub const DEFAULT_STATE_WEIGHT: [f64; NX] = [10.0, 10.0, 10.0, 4.0, 4.0, 12.0, 5.0, 5.0, 5.0, 0.1, 0.1, 0.1];
/// Per (rad/s)^4: inputs are squared speeds around 6e4 rad^2/s^2.
pub const DEFAULT_INPUT_WEIGHT: f64 = 1e-8;
pub const DEFAULT_RATE_WEIGHT: f64 = 1e-7;
/// 2 s at the default 20 ms sample time.
pub const DEFAULT_HORIZON: usize = 100;

impl MpcConfig {
    /// Default tuning with the box `[0, omega_max^2]`.
    pub fn for_vehicle(veh: &VehicleParams) -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            state_weight: DEFAULT_STATE_WEIGHT,
            input_weight: [DEFAULT_INPUT_WEIGHT; NU],
            rate_weight: [DEFAULT_RATE_WEIGHT; NU],
            u_min: [0.0; NU],
            u_max: [veh.omega_sq_max(); NU],
            qp_max_iter: 100,
            qp_tol: 1e-9,
            constrained: true,
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.horizon == 0 {
            out.push(Violation::new("mpc.horizon", "must be >= 1"));
        }
        if self.state_weight.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            out.push(Violation::new("mpc.state_weight", "entries must be finite and >= 0"));
        }
        if self.input_weight.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            out.push(Violation::new("mpc.input_weight", "entries must be finite and > 0"));
        }
        if self.rate_weight.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            out.push(Violation::new("mpc.rate_weight", "entries must be finite and >= 0"));
        }
        if self.u_min.iter().zip(&self.u_max).any(|(l, u)| !(l < u)) {
            out.push(Violation::new("mpc.u_min", "must be strictly below mpc.u_max"));
        }
        if self.qp_max_iter == 0 {
            out.push(Violation::new("mpc.qp_max_iter", "must be >= 1"));
        }
        if !(self.qp_tol > 0.0) {
            out.push(Violation::new("mpc.qp_tol", "must be > 0"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        Error::from_violations(self.violations())
    }

    fn qp_settings(&self) -> QpSettings {
        QpSettings {
            max_iter: self.qp_max_iter,
            tol: self.qp_tol,
        }
    }
}

/// Stacked prediction matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub horizon: usize,
    /// `[I; A; ...; A^{N-1}]`, (12N x 12).
    pub g: DMatrix<f64>,
    /// Strictly block lower-triangular, block (i, j) = `A^{i-j-1} B`, (12N x 8N).
    pub h: DMatrix<f64>,
    /// Block diagonal of `C`, (4N x 12N).
    pub c_bar: DMatrix<f64>,
}

pub fn build_prediction(model: &LinearModel, horizon: usize) -> Result<Prediction> {
    if model.is_continuous() {
        return Err(Error::WrongModelKind { expected: "discrete" });
    }
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be >= 1"));
    }
    let a = DMatrix::from_column_slice(NX, NX, model.a.as_slice());
    let b = DMatrix::from_column_slice(NX, NU, model.b.as_slice());
    let c = DMatrix::from_column_slice(NY, NX, model.c.as_slice());

    // powers[k] = A^k
    let mut powers = Vec::with_capacity(horizon);
    powers.push(DMatrix::identity(NX, NX));
    for k in 1..horizon {
        let next = &a * &powers[k - 1];
        powers.push(next);
    }
    let mut g = DMatrix::zeros(NX * horizon, NX);
    for (k, p) in powers.iter().enumerate() {
        g.view_mut((NX * k, 0), (NX, NX)).copy_from(p);
    }
    let mut h = DMatrix::zeros(NX * horizon, NU * horizon);
    for i in 1..horizon {
        for j in 0..i {
            let block = &powers[i - j - 1] * &b;
            h.view_mut((NX * i, NU * j), (NX, NU)).copy_from(&block);
        }
    }
    let mut c_bar = DMatrix::zeros(NY * horizon, NX * horizon);
    for i in 0..horizon {
        c_bar.view_mut((NY * i, NX * i), (NY, NX)).copy_from(&c);
    }
    Ok(Prediction { horizon, g, h, c_bar })
}

/// Condensed cost `1/2 dU' hessian dU + gradient' dU` (constant dropped).
#[derive(Debug, Clone)]
pub struct Cost {
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
}

fn block_diag(diag: &[f64], n: usize) -> DVector<f64> {
    DVector::from_iterator(diag.len() * n, (0..n).flat_map(|_| diag.iter().copied()))
}

/// First-difference operator on the stacked inputs: row block i is
/// `du_i - du_{i-1}`.
fn difference_operator(n: usize) -> DMatrix<f64> {
    let dim = NU * n;
    let mut d = DMatrix::identity(dim, dim);
    for k in NU..dim {
        d[(k, k - NU)] = -1.0;
    }
    d
}

/// Condensed Hessian `2 (H' Mx H + Mu + D' Mdu D)`; depends only on the
/// model and weights.
fn condensed_hessian(pred: &Prediction, cfg: &MpcConfig) -> DMatrix<f64> {
    let n = pred.horizon;
    let mx = block_diag(&cfg.state_weight, n);
    let mu = block_diag(&cfg.input_weight, n);
    let mdu = block_diag(&cfg.rate_weight, n);
    let d = difference_operator(n);
    let weighted_h = DMatrix::from_fn(pred.h.nrows(), pred.h.ncols(), |r, c| mx[r] * pred.h[(r, c)]);
    let weighted_d = DMatrix::from_fn(d.nrows(), d.ncols(), |r, c| mdu[r] * d[(r, c)]);
    let mut hess = pred.h.transpose() * weighted_h + d.transpose() * weighted_d;
    for k in 0..hess.nrows() {
        hess[(k, k)] += mu[k];
    }
    // P + P' both doubles and symmetrises
    &hess + hess.transpose()
}

/// Assemble the condensed QP for the tracking cost
///
/// ```text
/// sum_i (xr_i - x_i)' Mx (xr_i - x_i) + du_i' Mu du_i + (du_i - du_{i-1})' Mdu (du_i - du_{i-1})
/// ```
///
/// `dx0` and `x_ref_window` (12N) are deviations from the linearisation
/// point; `u_prev` is the command applied at the previous step.
pub fn build_cost(
    pred: &Prediction,
    cfg: &MpcConfig,
    dx0: &StateVector,
    x_ref_window: &DVector<f64>,
    u_prev: &RotorCommand,
    u_ref: &RotorCommand,
) -> Result<Cost> {
    let n = pred.horizon;
    if x_ref_window.len() != NX * n {
        return Err(Error::DimensionMismatch(format!(
            "reference window has length {}, expected {}",
            x_ref_window.len(),
            NX * n
        )));
    }
    if cfg.horizon != n {
        return Err(Error::DimensionMismatch(format!(
            "config horizon {} differs from prediction horizon {n}",
            cfg.horizon
        )));
    }
    let hessian = condensed_hessian(pred, cfg);
    if nalgebra::Cholesky::new(hessian.clone()).is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    let mx = block_diag(&cfg.state_weight, n);
    let mdu = block_diag(&cfg.rate_weight, n);
    let dx0 = DVector::from_column_slice(dx0.as_slice());
    let free = &pred.g * dx0 - x_ref_window;
    let mut d0 = DVector::zeros(NU * n);
    for k in 0..NU {
        d0[k] = u_prev.0[k] - u_ref.0[k];
    }
    let d = difference_operator(n);
    let gradient = (pred.h.transpose() * free.component_mul(&mx) - d.transpose() * d0.component_mul(&mdu)) * 2.0;
    Ok(Cost { hessian, gradient })
}

/// Mutable part of the controller carried between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub u_prev: RotorCommand,
    /// Previous optimal `dU`, shifted one block.
    pub warm_start: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct MpcOutput {
    pub command: RotorCommand,
    pub qp_iterations: usize,
    pub qp_residual: f64,
    pub qp_status: QpStatus,
    /// Optimal stacked `dU`.
    pub plan: DVector<f64>,
}

/// Receding-horizon controller with cached condensed matrices.
#[derive(Debug, Clone)]
pub struct MpcController {
    model: LinearModel,
    cfg: MpcConfig,
    pred: Prediction,
    qp: BoxQp,
    /// `2 H' Mx G`
    state_gain: DMatrix<f64>,
    /// `2 H' Mx`
    ref_gain: DMatrix<f64>,
    /// `2 D' Mdu` restricted to the first input block.
    rate_gain: DMatrix<f64>,
    lower: DVector<f64>,
    upper: DVector<f64>,
    state: ControllerState,
}

impl MpcController {
    pub fn new(model: LinearModel, cfg: MpcConfig) -> Result<Self> {
        cfg.validate()?;
        let pred = build_prediction(&model, cfg.horizon)?;
        let n = cfg.horizon;
        let hessian = condensed_hessian(&pred, &cfg);
        let qp = BoxQp::new(hessian, cfg.qp_settings())?;
        let mx = block_diag(&cfg.state_weight, n);
        let ref_gain = DMatrix::from_fn(NU * n, NX * n, |r, c| 2.0 * pred.h[(c, r)] * mx[c]);
        let state_gain = &ref_gain * &pred.g;
        let d = difference_operator(n);
        let mdu = block_diag(&cfg.rate_weight, n);
        let rate_gain = DMatrix::from_fn(NU * n, NU, |r, c| 2.0 * d[(c, r)] * mdu[c]);
        let (lower, upper) = if cfg.constrained {
            let lo = DVector::from_iterator(NU * n, (0..NU * n).map(|k| cfg.u_min[k % NU] - model.u_ref.0[k % NU]));
            let hi = DVector::from_iterator(NU * n, (0..NU * n).map(|k| cfg.u_max[k % NU] - model.u_ref.0[k % NU]));
            (lo, hi)
        } else {
            (
                DVector::from_element(NU * n, f64::NEG_INFINITY),
                DVector::from_element(NU * n, f64::INFINITY),
            )
        };
        let state = ControllerState {
            u_prev: model.u_ref,
            warm_start: DVector::zeros(NU * n),
        };
        Ok(Self {
            model,
            cfg,
            pred,
            qp,
            state_gain,
            ref_gain,
            rate_gain,
            lower,
            upper,
            state,
        })
    }

    /// Controller for the default hover model of a vehicle.
    pub fn hover(veh: &VehicleParams, env: &EnvParams, ts: f64, cfg: MpcConfig) -> Result<Self> {
        let model = crate::linearization::discretize(&crate::linearization::linearize_hover(veh, env), ts)?;
        Self::new(model, cfg)
    }

    pub fn config(&self) -> &MpcConfig {
        &self.cfg
    }

    pub fn model(&self) -> &LinearModel {
        &self.model
    }

    pub fn prediction(&self) -> &Prediction {
        &self.pred
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state = ControllerState {
            u_prev: self.model.u_ref,
            warm_start: DVector::zeros(NU * self.cfg.horizon),
        };
    }

    /// Condensed QP gradient for the current deviation and reference.
    pub fn gradient(&self, dx0: &StateVector, x_ref_window: &DVector<f64>) -> DVector<f64> {
        let dx0 = DVector::from_column_slice(dx0.as_slice());
        let du_prev = self.state.u_prev.to_vector() - self.model.u_ref.to_vector();
        let du_prev = DVector::from_column_slice(du_prev.as_slice());
        &self.state_gain * dx0 - &self.ref_gain * x_ref_window - &self.rate_gain * du_prev
    }

    /// One receding-horizon step. `reference` must hold at least one
    /// sample; shorter windows are padded with their last sample.
    pub fn step(&mut self, x_now: &State12, reference: &[RefSample]) -> Result<MpcOutput> {
        if !x_now.is_finite() {
            return Err(Error::NonFiniteState);
        }
        let (dx0, xref) = reference_deviation(x_now, reference, self.cfg.horizon, self.model.dt)?;
        self.step_deviation(&dx0, &xref)
    }

    /// Step with precomputed deviation coordinates.
    pub fn step_deviation(&mut self, dx0: &StateVector, x_ref_window: &DVector<f64>) -> Result<MpcOutput> {
        let grad = self.gradient(dx0, x_ref_window);
        let sol = self.qp.solve(&grad, &self.lower, &self.upper, Some(&self.state.warm_start))?;
        let mut cmd = [0.0; NU];
        for k in 0..NU {
            cmd[k] = (self.model.u_ref.0[k] + sol.x[k]).clamp(self.cfg.u_min[k], self.cfg.u_max[k]);
        }
        let command = RotorCommand(cmd);
        let n = self.cfg.horizon;
        let mut shifted = DVector::zeros(NU * n);
        for k in 0..NU * n {
            let src = (k + NU).min(NU * n - NU + k % NU);
            shifted[k] = sol.x[src];
        }
        self.state = ControllerState {
            u_prev: command,
            warm_start: shifted,
        };
        Ok(MpcOutput {
            command,
            qp_iterations: sol.iterations,
            qp_residual: sol.residual,
            qp_status: sol.status,
            plan: sol.x,
        })
    }
}

/// Hover command in squared-speed units: each rotor carries `m g / 8`.
pub fn nominal_input(veh: &VehicleParams, env: &EnvParams) -> RotorCommand {
    RotorCommand::uniform(hover_omega_sq(veh, env))
}

/// Express the current state and a reference window in the deviation
/// coordinates of the hover model.
///
/// Positions are taken relative to the vehicle and, like velocities,
/// rotated into the current heading frame, where the hover model applies
/// regardless of yaw. Reference velocities are finite differences of the
/// reference positions; yaw is handled as a wrapped difference from the
/// first reference heading.
pub fn reference_deviation(
    x_now: &State12,
    reference: &[RefSample],
    horizon: usize,
    ts: f64,
) -> Result<(StateVector, DVector<f64>)> {
    if reference.is_empty() {
        return Err(Error::invalid("reference", "window is empty"));
    }
    if !(ts > 0.0) {
        return Err(Error::WrongModelKind { expected: "discrete" });
    }
    let sample = |i: usize| reference[i.min(reference.len() - 1)];
    let (s, c) = x_now.psi.sin_cos();
    let rot = |vx: f64, vy: f64| (c * vx + s * vy, -s * vx + c * vy);
    let psi0 = sample(0).psi;

    let mut dx0 = StateVector::zeros();
    let (vx, vy) = rot(x_now.vx, x_now.vy);
    dx0[idx::VX] = vx;
    dx0[idx::VY] = vy;
    dx0[idx::VZ] = x_now.vz;
    dx0[idx::PHI] = x_now.phi;
    dx0[idx::THETA] = x_now.theta;
    dx0[idx::PSI] = wrap_angle(x_now.psi - psi0);
    dx0[idx::PHI_DOT] = x_now.phi_dot;
    dx0[idx::THETA_DOT] = x_now.theta_dot;
    dx0[idx::PSI_DOT] = x_now.psi_dot;

    let mut xref = DVector::zeros(NX * horizon);
    let mut psi_acc = 0.0;
    let mut prev_psi = psi0;
    for i in 0..horizon {
        let r = sample(i);
        let (px, py) = rot(r.x - x_now.x, r.y - x_now.y);
        psi_acc += wrap_angle(r.psi - prev_psi);
        prev_psi = r.psi;
        let (a, b) = if horizon > 1 {
            if i + 1 < horizon {
                (r, sample(i + 1))
            } else {
                (sample(i - 1), r)
            }
        } else {
            (r, r)
        };
        let (vx, vy) = rot((b.x - a.x) / ts, (b.y - a.y) / ts);
        let base = NX * i;
        xref[base + idx::X] = px;
        xref[base + idx::Y] = py;
        xref[base + idx::Z] = r.z - x_now.z;
        xref[base + idx::VX] = vx;
        xref[base + idx::VY] = vy;
        xref[base + idx::VZ] = (b.z - a.z) / ts;
        xref[base + idx::PSI] = psi_acc;
        xref[base + idx::PSI_DOT] = wrap_angle(b.psi - a.psi) / ts;
    }
    Ok((dx0, xref))
}
