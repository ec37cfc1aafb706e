use super::*;
use crate::env::{EnvParams, VehicleParams};
use crate::pid::PidGains;
use approx::assert_abs_diff_eq;

fn mars() -> (VehicleParams, EnvParams) {
    (VehicleParams::default(), EnvParams::mars())
}

#[test]
fn hover_is_a_fixed_point() {
    let (veh, env) = mars();
    let cmd = RotorCommand::hover(&veh, &env);
    let mut s = State12::default();
    for k in 0..500 {
        s = rk4_step(&s, &cmd, 0.002, &veh, &env, &Disturbance::none(), k as f64 * 0.002).unwrap();
    }
    for v in s.to_vector().iter() {
        assert!(v.abs() < 1e-9, "{v}");
    }
}

#[test]
fn free_fall_matches_closed_form() {
    let (veh, env) = mars();
    let cmd = RotorCommand::uniform(0.0);
    let mut s = State12::at_rest(0.0, 0.0, 10.0, 0.0);
    let dt = 0.01;
    for k in 0..100 {
        s = rk4_step(&s, &cmd, dt, &veh, &env, &Disturbance::none(), k as f64 * dt).unwrap();
    }
    // quadratic in t, so RK4 is exact up to roundoff
    assert_abs_diff_eq!(s.z, 10.0 - 0.5 * env.gravity, epsilon = 1e-12);
    assert_abs_diff_eq!(s.vz, -env.gravity, epsilon = 1e-12);
}

fn tilted_run(dt: f64, steps: usize) -> State12 {
    let (veh, env) = mars();
    let mut cmd = RotorCommand::hover(&veh, &env);
    cmd.0[4] *= 1.05;
    cmd.0[5] *= 1.05;
    cmd.0[2] *= 1.03;
    let mut s = State12::default();
    for k in 0..steps {
        s = rk4_step(&s, &cmd, dt, &veh, &env, &Disturbance::none(), k as f64 * dt).unwrap();
    }
    s
}

#[test]
fn rk4_is_fourth_order() {
    let reference = tilted_run(0.0025, 400).to_vector();
    let e1 = (tilted_run(0.05, 20).to_vector() - reference).norm();
    let e2 = (tilted_run(0.025, 40).to_vector() - reference).norm();
    let ratio = e1 / e2;
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}, errors {e1} {e2}");
}

#[test]
fn rejects_bad_steps() {
    let (veh, env) = mars();
    let s = State12::default();
    let cmd = RotorCommand::hover(&veh, &env);
    assert!(rk4_step(&s, &cmd, 0.0, &veh, &env, &Disturbance::none(), 0.0).is_err());
    let mut neg = cmd;
    neg.0[3] = -1.0;
    assert!(matches!(
        rk4_step(&s, &neg, 0.01, &veh, &env, &Disturbance::none(), 0.0),
        Err(Error::NegativeRotorCommand { .. })
    ));
    let tipped = State12 {
        theta: 1.6,
        ..State12::default()
    };
    assert!(matches!(
        rk4_step(&tipped, &cmd, 0.01, &veh, &env, &Disturbance::none(), 0.0),
        Err(Error::NumericalDivergence { .. })
    ));
}

#[test]
fn pulse_adds_acceleration() {
    let (veh, env) = mars();
    let cmd = RotorCommand::hover(&veh, &env);
    let dist = Disturbance {
        pulses: vec![Pulse {
            t_start: 0.0,
            t_end: 1.0,
            force: [1.2, 0.0, 0.0],
            torque: [0.0; 3],
        }],
        ..Disturbance::default()
    };
    let mut s = State12::default();
    for k in 0..100 {
        s = rk4_step(&s, &cmd, 0.01, &veh, &env, &dist, k as f64 * 0.01).unwrap();
    }
    assert_abs_diff_eq!(s.vx, 1.2 / veh.mass, epsilon = 1e-12);
    assert_eq!(dist.pulses_at(1.0), ExternalLoad::default());
}

#[test]
fn step_count_rounds_up() {
    assert_eq!(SimSettings::new(0.02, 1, 1.0).steps(), 50);
    assert_eq!(SimSettings::new(0.02, 1, 1.01).steps(), 51);
    assert_eq!(SimSettings::new(0.1, 1, 0.3).steps(), 3);
}

fn pid_run(seed: u64) -> SimLog {
    let (veh, env) = mars();
    let mut pid = PidController::new(PidGains::default(), veh, env).unwrap();
    let traj = Trajectory::constant([0.5, 0.0, 0.5, 0.0]);
    let dist = Disturbance {
        noise_force: [0.05; 3],
        ..Disturbance::default()
    };
    let mut settings = SimSettings::new(0.02, 4, 2.0);
    settings.seed = seed;
    run_closed_loop(&mut pid, &traj, &dist, &settings, &veh, &env).unwrap()
}

#[test]
fn seeded_runs_are_reproducible() {
    let a = pid_run(7);
    let b = pid_run(7);
    let c = pid_run(8);
    assert_eq!(a, b);
    assert_ne!(a.records.last().unwrap().state, c.records.last().unwrap().state);
    let mut ca = Vec::new();
    let mut cb = Vec::new();
    write_csv(&a, &mut ca).unwrap();
    write_csv(&b, &mut cb).unwrap();
    assert_eq!(ca, cb);
}

#[test]
fn csv_layout() {
    let log = pid_run(1);
    let mut buf = Vec::new();
    write_csv(&log, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 1 + 12 + 8 + 4 + 4 + 1);
    assert_eq!(header[0], "t");
    assert_eq!(header[13], "omega_sq_1");
    assert_eq!(header[21], "ref_x");
    assert_eq!(lines.count(), log.records.len());
}

fn synthetic(positions: &[f64], refs: &[f64]) -> SimLog {
    let records = positions
        .iter()
        .zip(refs)
        .enumerate()
        .map(|(i, (p, r))| SimRecord {
            t: i as f64 * 0.1,
            state: State12::at_rest(*p, 0.0, 0.0, 0.0),
            command: RotorCommand::uniform(1.0),
            reference: RefSample {
                t: i as f64 * 0.1,
                x: *r,
                ..RefSample::default()
            },
            wrench: Wrench::default(),
            iterations: 0,
        })
        .collect();
    SimLog {
        controller: "test".into(),
        seed: 0,
        ts: 0.1,
        hover_command: 1.0,
        u_min: 0.0,
        u_max: 2.0,
        config_snapshot: None,
        records,
    }
}

#[test]
fn overshoot_and_settling_on_known_response() {
    // step 0 -> 1 at t=0; peak 1.2, inside 2 % from sample 4
    let pos = [0.0, 0.8, 1.2, 1.05, 1.01, 1.0, 1.0, 1.0];
    let refs = [1.0; 8];
    let m = compute_metrics(&synthetic(&pos, &refs), 0.0).unwrap();
    assert_abs_diff_eq!(m.max_overshoot[0], 0.2, epsilon = 1e-12);
    assert_abs_diff_eq!(m.max_overshoot_pct[0], 20.0, epsilon = 1e-9);
    assert_abs_diff_eq!(m.settling_time, 0.4, epsilon = 1e-12);
    assert_eq!(m.control_effort, 0.0);
    assert_eq!(m.constraint_violations, 0);
    assert_eq!(m.final_position_error, 0.0);
}

#[test]
fn downward_step_overshoot_and_rms() {
    let pos = [1.0, 1.0, 1.0, 0.3, -0.1, 0.0];
    let refs = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
    let m = compute_metrics(&synthetic(&pos, &refs), 0.0).unwrap();
    assert_abs_diff_eq!(m.max_overshoot[0], 0.1, epsilon = 1e-12);
    assert_abs_diff_eq!(m.max_overshoot_pct[0], 10.0, epsilon = 1e-9);
    let expected = ((0.09f64 + 0.01) / 6.0).sqrt();
    assert_abs_diff_eq!(m.rms_position_error, expected, epsilon = 1e-12);
    // transient skips the first three samples
    let late = compute_metrics(&synthetic(&pos, &refs), 0.3).unwrap();
    assert_abs_diff_eq!(late.rms_position_error, ((0.09f64 + 0.01) / 3.0).sqrt(), epsilon = 1e-12);
}

#[test]
fn effort_and_violations_count() {
    let mut log = synthetic(&[0.0; 3], &[0.0; 3]);
    log.records[1].command = RotorCommand::uniform(3.0);
    let m = compute_metrics(&log, 0.0).unwrap();
    assert_eq!(m.constraint_violations, 1);
    assert_abs_diff_eq!(m.control_effort, 8.0 * 4.0 * 0.1, epsilon = 1e-12);
}

#[test]
fn failure_keeps_partial_log() {
    let (veh, env) = mars();
    // a huge torque pulse tips the vehicle over
    let dist = Disturbance {
        pulses: vec![Pulse {
            t_start: 0.1,
            t_end: 5.0,
            force: [0.0; 3],
            torque: [0.0, 50.0, 0.0],
        }],
        ..Disturbance::default()
    };
    let mut pid = PidController::new(PidGains::zero(), veh, env).unwrap();
    let settings = SimSettings::new(0.02, 2, 5.0);
    let err = run_closed_loop(&mut pid, &Trajectory::constant([0.0; 4]), &dist, &settings, &veh, &env).unwrap_err();
    assert!(matches!(err.error, Error::NumericalDivergence { .. }));
    assert!(!err.log.records.is_empty());
    assert!(err.log.records.len() < settings.steps());
}
