//! Reference generators: fixed setpoint, helix and square path.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position and heading the vehicle should be at time `t`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RefSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub psi: f64,
}

impl RefSample {
    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trajectory {
    Constant {
        /// `[x, y, z, psi]`
        setpoint: [f64; 4],
    },
    Helix {
        radius: f64,
        angular_rate: f64,
        climb_rate: f64,
    },
    Square {
        side: f64,
        edge_duration: f64,
        altitude: f64,
    },
}

impl Default for Trajectory {
    fn default() -> Self {
        Self::constant([0.0; 4])
    }
}

impl Trajectory {
    pub fn constant(setpoint: [f64; 4]) -> Self {
        Self::Constant { setpoint }
    }

    /// Helix used for the closed-loop tracking study: unit radius, one
    /// revolution every 100 s, climbing 0.1 m/s.
    pub fn paper_helix() -> Self {
        Self::Helix {
            radius: 1.0,
            angular_rate: 0.02 * PI,
            climb_rate: 0.1,
        }
    }

    pub fn default_square() -> Self {
        Self::Square {
            side: 2.0,
            edge_duration: 10.0,
            altitude: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Trajectory::Constant { setpoint } => setpoint.iter().all(|v| v.is_finite()),
            Trajectory::Helix {
                radius,
                angular_rate,
                climb_rate,
            } => radius > 0.0 && radius.is_finite() && angular_rate.is_finite() && climb_rate.is_finite(),
            Trajectory::Square {
                side,
                edge_duration,
                altitude,
            } => side > 0.0 && edge_duration > 0.0 && side.is_finite() && edge_duration.is_finite() && altitude.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("trajectory", format!("invalid parameters {self:?}")))
        }
    }

    pub fn sample(&self, t: f64) -> RefSample {
        match *self {
            Trajectory::Constant { setpoint: [x, y, z, psi] } => RefSample { t, x, y, z, psi },
            Trajectory::Helix {
                radius,
                angular_rate,
                climb_rate,
            } => {
                let (s, c) = (angular_rate * t).sin_cos();
                RefSample {
                    t,
                    x: radius * c,
                    y: radius * s,
                    z: climb_rate * t,
                    psi: 0.0,
                }
            }
            Trajectory::Square {
                side,
                edge_duration,
                altitude,
            } => {
                let period = 4.0 * edge_duration;
                let phase = t.rem_euclid(period);
                let edge = ((phase / edge_duration).floor() as usize).min(3);
                let frac = (phase - edge as f64 * edge_duration) / edge_duration * side;
                let (x, y) = match edge {
                    0 => (frac, 0.0),
                    1 => (side, frac),
                    2 => (side - frac, side),
                    _ => (0.0, side - frac),
                };
                RefSample {
                    t,
                    x,
                    y,
                    z: altitude,
                    psi: 0.0,
                }
            }
        }
    }

    /// `count` samples spaced `ts` apart starting at `t`.
    pub fn window(&self, t: f64, ts: f64, count: usize) -> Vec<RefSample> {
        (0..count).map(|i| self.sample(t + i as f64 * ts)).collect()
    }

    pub fn period(&self) -> Option<f64> {
        match *self {
            Trajectory::Square { edge_duration, .. } => Some(4.0 * edge_duration),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn constant_is_time_invariant() {
        let tr = Trajectory::constant([1.0, -2.0, 3.0, 0.4]);
        for t in [0.0, 100.0, 7.3] {
            let s = tr.sample(t);
            assert_eq!((s.x, s.y, s.z, s.psi), (1.0, -2.0, 3.0, 0.4));
        }
    }

    #[test]
    fn helix_known_points() {
        let tr = Trajectory::paper_helix();
        let s = tr.sample(0.0);
        assert_eq!((s.x, s.y, s.z, s.psi), (1.0, 0.0, 0.0, 0.0));
        let s = tr.sample(50.0);
        assert_abs_diff_eq!(s.x, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.z, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn helix_planar_speed() {
        let tr = Trajectory::paper_helix();
        let h = 1e-3;
        for t in [0.3, 12.0, 77.7] {
            let a = tr.sample(t - h);
            let b = tr.sample(t + h);
            let v = ((b.x - a.x).hypot(b.y - a.y)) / (2.0 * h);
            assert_abs_diff_eq!(v, 0.02 * PI, epsilon = 1e-8);
        }
    }

    #[test]
    fn square_corners() {
        let tr = Trajectory::default_square();
        let s = tr.sample(0.0);
        assert_eq!((s.x, s.y, s.z), (0.0, 0.0, 1.0));
        let before = tr.sample(10.0 - 1e-9);
        let after = tr.sample(10.0 + 1e-9);
        assert_abs_diff_eq!(before.x, after.x, epsilon = 1e-6);
        assert_abs_diff_eq!(before.y, after.y, epsilon = 1e-6);
        // direction turns from +x to +y
        let v_before = (tr.sample(9.9).x - tr.sample(9.8).x, tr.sample(9.9).y - tr.sample(9.8).y);
        let v_after = (tr.sample(10.2).x - tr.sample(10.1).x, tr.sample(10.2).y - tr.sample(10.1).y);
        assert!(v_before.0 > 0.0 && v_before.1.abs() < 1e-12);
        assert!(v_after.1 > 0.0 && v_after.0.abs() < 1e-12);
    }

    #[test]
    fn invalid_parameters() {
        assert!(Trajectory::Helix { radius: 0.0, angular_rate: 1.0, climb_rate: 0.0 }.validate().is_err());
        assert!(Trajectory::Square { side: 1.0, edge_duration: -1.0, altitude: 0.0 }.validate().is_err());
        assert!(Trajectory::constant([f64::NAN, 0.0, 0.0, 0.0]).validate().is_err());
    }

    proptest! {
        #[test]
        fn square_is_periodic(t in 0.0f64..200.0) {
            let tr = Trajectory::default_square();
            let p = tr.period().unwrap();
            let a = tr.sample(t);
            let b = tr.sample(t + p);
            prop_assert!((a.x - b.x).abs() < 1e-9 && (a.y - b.y).abs() < 1e-9);
        }

        #[test]
        fn helix_stays_on_circle(t in 0.0f64..1000.0, r in 0.1f64..10.0) {
            let tr = Trajectory::Helix { radius: r, angular_rate: 0.3, climb_rate: 0.1 };
            let s = tr.sample(t);
            prop_assert!((s.x.hypot(s.y) - r).abs() < 1e-12 * r.max(1.0));
        }
    }
}
