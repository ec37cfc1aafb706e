//! The shipped scenario set, embedded at build time, and the pass limits
//! stored beside it.

use serde::Deserialize;

use crate::config::Scenario;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioInfo {
    pub name: &'static str,
    /// Figure of the original study the scenario reproduces.
    pub figure: &'static str,
    pub description: &'static str,
    pub source: &'static str,
}

const SCENARIOS: [ScenarioInfo; 5] = [
    ScenarioInfo {
        name: "hover",
        figure: "none (equilibrium check)",
        description: "hold the origin from rest, no disturbance",
        source: include_str!("../../../scenarios/hover.toml"),
    },
    ScenarioInfo {
        name: "step_xyz",
        figure: "Position response",
        description: "simultaneous +1 m step in x, y and z",
        source: include_str!("../../../scenarios/step_xyz.toml"),
    },
    ScenarioInfo {
        name: "helix_paper",
        figure: "Position response for helix trajectory",
        description: "unit-radius helix, 0.02 pi rad/s, climbing 0.1 m/s",
        source: include_str!("../../../scenarios/helix_paper.toml"),
    },
    ScenarioInfo {
        name: "square_corners",
        figure: "Square trajectory tracking using MP-controller; Trajectory follow response based on PID controller",
        description: "2 m square with sharp corners, MPC against PID",
        source: include_str!("../../../scenarios/square_corners.toml"),
    },
    ScenarioInfo {
        name: "helix_disturbed",
        figure: "Trajectory tracking with MPC (with an induced gust)",
        description: "paper helix with a 1 N lateral gust for 2 s",
        source: include_str!("../../../scenarios/helix_disturbed.toml"),
    },
];

/// Raw text of the limits file.
pub const THRESHOLDS_SOURCE: &str = include_str!("../../../scenarios/thresholds.toml");

pub fn list_scenarios() -> &'static [ScenarioInfo] {
    &SCENARIOS
}

pub fn find(name: &str) -> Option<&'static ScenarioInfo> {
    SCENARIOS.iter().find(|s| s.name == name)
}

/// Parse a shipped scenario, applying `key=value` overrides.
pub fn load(name: &str, overrides: &[String]) -> Result<Scenario> {
    let info = find(name).ok_or_else(|| Error::Config(format!("no shipped scenario named `{name}`")))?;
    let mut s = Scenario::from_toml_str(info.source, overrides)?;
    if s.name.is_empty() {
        s.name = name.to_string();
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoverLimits {
    pub max_deviation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepLimits {
    pub settling_time: f64,
    pub overshoot_pct: f64,
    pub steady_state_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HelixLimits {
    pub rms_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SquareLimits {
    pub strict_overshoot: bool,
    pub strict_effort: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryLimits {
    pub recovery_band: f64,
    pub recovery_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub hover: HoverLimits,
    pub step_xyz: StepLimits,
    pub helix_paper: HelixLimits,
    pub square_corners: SquareLimits,
    pub helix_disturbed: RecoveryLimits,
}

impl Thresholds {
    pub fn shipped() -> Result<Self> {
        toml::from_str(THRESHOLDS_SOURCE).map_err(|e| Error::Config(format!("thresholds: {e}")))
    }
}
