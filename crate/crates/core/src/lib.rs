//! Simulation and control toolkit for an eight-rotor coaxial quadrotor
//! flying in the Martian atmosphere.
//!
//! The crate covers the nonlinear rigid-body model and rotor allocation
//! ([`dynamics`]), the near-hover linear model ([`linearization`]), a
//! condensed box-constrained linear MPC ([`mpc`]), a cascaded PID
//! baseline ([`pid`]), reference generators ([`trajectory`]) and a
//! fixed-step closed-loop simulator with logging and metrics ([`sim`]).
//! Experiments are described by TOML scenario files ([`config`]); the
//! shipped set and its pass limits live in [`scenarios`].

pub mod config;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod linearization;
pub mod mpc;
pub mod pid;
pub mod scenarios;
pub mod sim;
pub mod trajectory;

pub use config::{ControllerChoice, ControllerKind, Report, Run, Scenario};
pub use dynamics::{allocate, allocation_matrix, state_derivative, wrench_from_rotors, Allocator, RotorCommand, State12, Wrench};
pub use env::{calibrate_thrust_coeff, hover_speed, mach_from_velocity, speed_of_sound, tip_mach, EnvParams, VehicleParams};
pub use error::{Error, Result};
pub use linearization::{discretize, linearize_hover, numeric_jacobian, LinearModel};
pub use mpc::{MpcConfig, MpcController};
pub use pid::{PidController, PidGains};
pub use scenarios::{list_scenarios, ScenarioInfo, Thresholds};
pub use sim::{compute_metrics, rk4_step, run_closed_loop, Disturbance, FlightController, Metrics, Plant, SimLog, SimSettings};
pub use trajectory::{RefSample, Trajectory};
