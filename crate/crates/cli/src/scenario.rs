//! Scenario files: one JSON document per run.
//!
//! Every key is checked; unknown keys are rejected with the line and column
//! reported by the JSON parser. Keys are emitted in declaration order, so a
//! parsed scenario re-serializes to a stable document.

use std::path::Path;

use serde::{Deserialize, Serialize};

use secbill_core::billiard::{ArcWindow, Wall, WallKind};
use secbill_core::flow::{IntegrateOptions, System, SystemKind};
use secbill_core::model::from_partner;
use secbill_core::secular::{self, elements_to_state, OrbitElements};
use secbill_core::{ModelParams, PhaseState, Space};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub system: SystemKind,
    #[serde(default = "default_space")]
    pub space: Space,
    #[serde(default)]
    pub params: Params,
    pub initial: Initial,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub walls: Vec<WallSpec>,
    #[serde(default)]
    pub run: RunControls,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default)]
    pub seed: u64,
}

fn default_space() -> Space {
    Space::Euclidean
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default = "one")]
    pub m1: f64,
    #[serde(default)]
    pub m2: f64,
    #[serde(default)]
    pub f: f64,
    #[serde(default)]
    pub a: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self { m1: 1.0, m2: 0.0, f: 0.0, a: 0.0 }
    }
}

fn one() -> f64 {
    1.0
}

/// Initial condition in standardized coordinates.
///
/// `state` gives the chart point and velocity directly. With
/// `partner_velocity` set on a curved surface, `v` is read as the velocity of
/// the Euclidean partner state and multiplied by the conformal factor.
/// `elements` always describes the partner Kepler orbit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Initial {
    State {
        q: [f64; 2],
        v: [f64; 2],
        #[serde(default, skip_serializing_if = "is_false")]
        partner_velocity: bool,
    },
    Elements {
        lambda: f64,
        k: f64,
        h_e: f64,
        #[serde(default)]
        l: f64,
        #[serde(default = "one")]
        sigma: f64,
    },
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallSpec {
    pub kind: WallKind,
    /// Half focal sum or difference; ignored for the focal line.
    #[serde(default)]
    pub s: f64,
    #[serde(default = "one")]
    pub branch: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<ArcWindow>,
    /// Translates both foci in the natural chart. A nonzero shift makes the
    /// wall non-confocal with the centers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<[f64; 2]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunControls {
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_quad_tol")]
    pub quad_tol: f64,
    #[serde(default = "default_node_cap")]
    pub node_cap: usize,
    #[serde(default = "default_max_bounces")]
    pub max_bounces: usize,
    /// Output spacing in time; accepted steps are written when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_dt: Option<f64>,
}

fn default_t_end() -> f64 {
    10.0
}
fn default_tol() -> f64 {
    1e-10
}
fn default_quad_tol() -> f64 {
    secular::DEFAULT_QUAD_TOL
}
fn default_node_cap() -> usize {
    secular::DEFAULT_NODE_CAP
}
fn default_max_bounces() -> usize {
    50
}

impl Default for RunControls {
    fn default() -> Self {
        Self {
            t_end: default_t_end(),
            tol: default_tol(),
            quad_tol: default_quad_tol(),
            node_cap: default_node_cap(),
            max_bounces: default_max_bounces(),
            sample_dt: None,
        }
    }
}

/// Pass/fail bounds. Absent bounds are reported but not enforced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    /// `max |E_target(t) - E_target(0)|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_drift: Option<f64>,
    /// `max |E_kep(t) - E_kep(0)|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kepler_drift: Option<f64>,
    /// `max |D(t) - D(0)| / (1 + |D(0)|)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_drift: Option<f64>,
    /// `max |E_sph(t) - E_sph(0)| / |E_sph(0)|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_sph_drift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity_residual: Option<f64>,
    /// Per bounce, `|ΔD| / (1 + |D_pre|)`.
    #[serde(default = "default_bounce_bound", skip_serializing_if = "Option::is_none")]
    pub bounce_d: Option<f64>,
    /// Per bounce, `|ΔE_kep| / (1 + |E_kep,pre|)`.
    #[serde(default = "default_bounce_bound", skip_serializing_if = "Option::is_none")]
    pub bounce_e_kep: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_bounces: Option<usize>,
}

fn default_bounce_bound() -> Option<f64> {
    Some(1e-10)
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            energy_drift: None,
            kepler_drift: None,
            d_drift: None,
            e_sph_drift: None,
            identity_residual: None,
            bounce_d: default_bounce_bound(),
            bounce_e_kep: default_bounce_bound(),
            min_bounces: None,
        }
    }
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_scenario_str(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_scenario_str(text: &str) -> Result<Scenario, CliError> {
    let sc: Scenario = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    sc.validate()?;
    Ok(sc)
}

fn config<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

impl Scenario {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenarios serialize")
    }

    pub fn model_params(&self) -> Result<ModelParams, CliError> {
        let p = self.params;
        ModelParams::new(p.m1, p.m2, p.f, p.a, self.space).map_err(config)
    }

    pub fn system(&self) -> Result<System, CliError> {
        let p = self.model_params()?;
        match self.system {
            SystemKind::Averaged => System::averaged(p, self.run.quad_tol, self.run.node_cap).map_err(config),
            kind => System::new(kind, p).map_err(config),
        }
    }

    /// Standardized initial state of the scenario's surface.
    pub fn initial_state(&self) -> Result<PhaseState, CliError> {
        let p = self.model_params()?;
        let s = match self.initial {
            Initial::State { q, v, partner_velocity } => {
                let s = PhaseState::new(q, v);
                if partner_velocity {
                    from_partner(&s, &p)
                } else {
                    s
                }
            }
            Initial::Elements { lambda, k, h_e, l, sigma } => {
                if sigma != 1.0 && sigma != -1.0 {
                    return Err(CliError::Config(format!("sigma must be ±1, got {sigma}")));
                }
                let el = OrbitElements { lambda, k, h_e, l, sigma };
                if !(el.eccentricity() < 1.0) {
                    return Err(CliError::Config(format!(
                        "initial elements outside the averaging region R: eccentricity {} ≥ 1",
                        el.eccentricity()
                    )));
                }
                from_partner(&elements_to_state(&el, p.m1, l).map_err(config)?, &p)
            }
        };
        if !s.is_finite() {
            return Err(CliError::Config("initial state is not finite".into()));
        }
        Ok(s)
    }

    pub fn walls(&self) -> Result<Vec<Wall>, CliError> {
        let p = self.model_params()?;
        self.walls
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let mut wall = Wall::confocal(w.kind, w.s, w.branch, &p).map_err(|e| CliError::Config(format!("wall {i}: {e}")))?;
                if let Some(win) = w.window {
                    wall = wall.with_window(win.start, win.end);
                }
                if let Some([dx, dy]) = w.shift {
                    for f in wall.foci.iter_mut() {
                        f[0] += dx;
                        f[1] += dy;
                    }
                    wall.validate(p.space).map_err(|e| CliError::Config(format!("wall {i}: {e}")))?;
                }
                Ok(wall)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c)) {
            return Err(CliError::Config(format!("name {:?} must be non-empty and use only [A-Za-z0-9_.-]", self.name)));
        }
        let r = &self.run;
        if !(r.t_end.is_finite() && r.t_end > 0.0) {
            return Err(CliError::Config(format!("run.t_end = {} must be positive and finite", r.t_end)));
        }
        IntegrateOptions::new(r.tol).validate().map_err(|e| CliError::Config(format!("run.tol: {e}")))?;
        if !(r.quad_tol > 0.0 && r.quad_tol <= 1e-6) {
            return Err(CliError::Config(format!("run.quad_tol = {} outside (0, 1e-6]", r.quad_tol)));
        }
        if r.node_cap < 32 {
            return Err(CliError::Config(format!("run.node_cap = {} is below 32", r.node_cap)));
        }
        if let Some(dt) = r.sample_dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(CliError::Config(format!("run.sample_dt = {dt} must be positive")));
            }
        }
        let c = &self.checks;
        for (name, b) in [
            ("energy_drift", c.energy_drift),
            ("kepler_drift", c.kepler_drift),
            ("d_drift", c.d_drift),
            ("e_sph_drift", c.e_sph_drift),
            ("identity_residual", c.identity_residual),
            ("bounce_d", c.bounce_d),
            ("bounce_e_kep", c.bounce_e_kep),
        ] {
            if let Some(b) = b {
                if !(b > 0.0) {
                    return Err(CliError::Config(format!("checks.{name} = {b} must be positive")));
                }
            }
        }
        let sys = self.system()?;
        let s0 = self.initial_state()?;
        sys.check_regular(&s0).map_err(|e| CliError::Config(format!("initial state: {e}")))?;
        if self.system == SystemKind::Averaged {
            let el = secular::osculating_elements(&s0, &sys.params).map_err(|e| CliError::Config(format!("initial state: {e}")))?;
            secular::check_orbit_admissible(&el, &sys.params)
                .map_err(|e| CliError::Config(format!("initial state outside the averaging region R: {e}")))?;
        }
        sys.first_integrals(&s0).map_err(|e| CliError::Config(format!("initial state: {e}")))?;
        self.walls()?;
        Ok(())
    }

    /// Validation specific to `billiard`.
    pub fn require_walls(&self) -> Result<Vec<Wall>, CliError> {
        if self.walls.is_empty() {
            return Err(CliError::Config(format!("scenario {:?} has no walls; billiard runs need at least one", self.name)));
        }
        self.walls()
    }
}
