//! Vector fields of every system, adaptive integration with dense output, and
//! finite-difference Poisson brackets.

mod dop853;

use serde::{Deserialize, Serialize};

pub use dop853::{DenseSegment, Dop853, StepCounts, StepperOptions};

use crate::error::{Error, Result};
use crate::geometry::{chart_metric, chart_metric_inverse, check_chart_domain, conformal_factor, dot, mat_vec, PhaseState, Space, Vec2};
use crate::model::{self, FirstIntegrals, ModelParams};
use crate::secular::{self, AveragedSystem};

/// Distance to a massive center at which integration stops.
pub const SINGULARITY_STOP_RADIUS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Kepler,
    TwoCenter,
    Lagrange,
    Averaged,
}

impl SystemKind {
    pub fn name(self) -> &'static str {
        match self {
            SystemKind::Kepler => "kepler",
            SystemKind::TwoCenter => "two_center",
            SystemKind::Lagrange => "lagrange",
            SystemKind::Averaged => "averaged",
        }
    }
}

/// A governing system: which Hamiltonian, on which surface, with which parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct System {
    pub kind: SystemKind,
    /// Parameters with the terms absent from `kind` already zeroed.
    pub params: ModelParams,
    pub quad_tol: f64,
    pub node_cap: usize,
}

impl System {
    pub fn new(kind: SystemKind, params: ModelParams) -> Result<Self> {
        params.validate()?;
        let mut p = params;
        match kind {
            SystemKind::Kepler => p = p.without_secondary(),
            SystemKind::TwoCenter => p.f = 0.0,
            SystemKind::Lagrange | SystemKind::Averaged => {}
        }
        let sys = Self { kind, params: p, quad_tol: secular::DEFAULT_QUAD_TOL, node_cap: secular::DEFAULT_NODE_CAP };
        if kind == SystemKind::Averaged && !(p.m1 > 0.0) {
            return Err(Error::InvalidParameter("the averaged system needs m1 > 0".into()));
        }
        Ok(sys)
    }

    pub fn averaged(params: ModelParams, quad_tol: f64, node_cap: usize) -> Result<Self> {
        let mut sys = Self::new(SystemKind::Averaged, params)?;
        sys.quad_tol = quad_tol;
        sys.node_cap = node_cap;
        sys.averaged_system()?;
        Ok(sys)
    }

    pub fn space(&self) -> Space {
        self.params.space
    }

    pub fn averaged_system(&self) -> Result<AveragedSystem> {
        AveragedSystem::new(self.params, self.quad_tol, self.node_cap)
    }

    /// Energy of the governing Hamiltonian.
    pub fn energy(&self, state: &PhaseState) -> Result<f64> {
        match self.kind {
            SystemKind::Averaged => secular::averaged_hamiltonian(state, &self.averaged_system()?),
            _ => model::system_energy(state, &self.params),
        }
    }

    pub fn first_integrals(&self, state: &PhaseState) -> Result<FirstIntegrals> {
        let mut fi = model::first_integrals(state, &self.params)?;
        if self.kind == SystemKind::Averaged {
            fi.e_target = self.energy(state)?;
        }
        Ok(fi)
    }

    /// `(q̇, v̇)` at a standardized state.
    pub fn vector_field(&self, state: &PhaseState) -> Result<[f64; 4]> {
        let extra = if self.kind == SystemKind::Averaged {
            Some(secular::averaged_potential_gradient(state, &self.averaged_system()?)?)
        } else {
            None
        };
        let base = if self.kind == SystemKind::Averaged { self.params.without_secondary() } else { self.params };
        match self.params.space {
            Space::Euclidean => euclidean_field(&base, state, extra),
            _ => curved_field(&base, state, extra),
        }
    }

    /// Errors if the state is within the stop radius of a massive center or
    /// outside the chart domain.
    pub fn check_regular(&self, state: &PhaseState) -> Result<()> {
        let p = &self.params;
        let h = p.h();
        let centers: [(f64, Vec2, &'static str); 2] =
            [(p.m1, [0.0, 0.0], "primary center"), (p.m2, [0.0, -2.0 * h], "secondary center")];
        for (m, c, what) in centers {
            if m == 0.0 || (self.kind == SystemKind::Averaged && what == "secondary center") {
                continue;
            }
            let d = (state.q[0] - c[0]).hypot(state.q[1] - c[1]);
            if !(d >= SINGULARITY_STOP_RADIUS) {
                return Err(Error::Singular { what, distance: d });
            }
        }
        if p.space.is_curved() {
            check_chart_domain(p.frame().point_to_raw(state.q), p.space)?;
        }
        Ok(())
    }
}

type Extra = ([f64; 2], [f64; 2]);

fn euclidean_field(params: &ModelParams, state: &PhaseState, extra: Option<Extra>) -> Result<[f64; 4]> {
    let g = model::euclidean_potential_gradient(state.q, params)?;
    let mut out = [state.v[0], state.v[1], -g[0], -g[1]];
    if let Some((dq, dp)) = extra {
        out[0] += dp[0];
        out[1] += dp[1];
        out[2] -= dq[0];
        out[3] -= dq[1];
    }
    Ok(out)
}

/// Hamiltonian field of `½ pᵀG⁻¹p + V_curved` in the raw chart, reported in
/// standardized coordinates. `extra` holds `(∂H'/∂q, ∂H'/∂p)` of an additional
/// Hamiltonian term in standardized canonical coordinates.
fn curved_field(params: &ModelParams, state: &PhaseState, extra: Option<Extra>) -> Result<[f64; 4]> {
    let frame = params.frame();
    let space = params.space;
    let kappa = space.curvature();
    let q = frame.point_to_raw(state.q);
    check_chart_domain(q, space)?;
    let w = frame.vector_to_raw(state.v);
    let p = mat_vec(&chart_metric(q, space), w);
    let lam = conformal_factor(q, space);
    let qp = dot(q, p);
    let pp = dot(p, p);
    let gv = model::curved_potential_gradient_raw(q, params, kappa)?;
    let mut qdot = w;
    let mut pdot = [
        -(kappa * q[0] * (pp + kappa * qp * qp) + lam * kappa * qp * p[0]) - gv[0],
        -(kappa * q[1] * (pp + kappa * qp * qp) + lam * kappa * qp * p[1]) - gv[1],
    ];
    if let Some((dq, dp)) = extra {
        let dp_raw = frame.vector_to_raw(dp);
        let dq_raw = frame.covector_to_raw(dq);
        qdot[0] += dp_raw[0];
        qdot[1] += dp_raw[1];
        pdot[0] -= dq_raw[0];
        pdot[1] -= dq_raw[1];
    }
    // ẇ = D(G⁻¹)[q̇] p + G⁻¹ ṗ
    let qu = dot(q, qdot);
    let up = dot(qdot, p);
    let gp = mat_vec(&chart_metric_inverse(q, space), pdot);
    let wdot = [
        2.0 * kappa * qu * (p[0] + kappa * qp * q[0]) + lam * kappa * (up * q[0] + qp * qdot[0]) + gp[0],
        2.0 * kappa * qu * (p[1] + kappa * qp * q[1]) + lam * kappa * (up * q[1] + qp * qdot[1]) + gp[1],
    ];
    let qd = frame.vector_from_raw(qdot);
    let wd = frame.vector_from_raw(wdot);
    Ok([qd[0], qd[1], wd[0], wd[1]])
}

#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    Completed,
    SingularityStop { t: f64, reason: String },
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrajectoryStats {
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Largest `|E(t) - E(t0)|` of the governing energy over the samples.
    pub max_energy_drift: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<PhaseState>,
    pub segments: Vec<DenseSegment<4>>,
    pub stats: TrajectoryStats,
    pub status: Status,
}

impl Trajectory {
    pub fn last(&self) -> &PhaseState {
        self.samples.last().expect("a trajectory holds at least its initial state")
    }

    pub fn t_start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn t_end(&self) -> f64 {
        self.last().t
    }

    /// Dense-output state at time `t` within the trajectory's span.
    pub fn state_at(&self, t: f64) -> Option<PhaseState> {
        let seg = self.segment_at(t)?;
        Some(PhaseState::from_array(&seg.eval(t), t))
    }

    fn segment_at(&self, t: f64) -> Option<&DenseSegment<4>> {
        let forward = self.segments.first().is_none_or(|s| s.h >= 0.0);
        let i = self.segments.partition_point(|s| if forward { s.t1() < t } else { s.t1() > t });
        self.segments.get(i).filter(|s| s.contains(t))
    }

    pub(crate) fn push_segment(&mut self, seg: DenseSegment<4>) {
        let t = seg.t1();
        self.samples.push(PhaseState::from_array(&seg.end(), t));
        self.segments.push(seg);
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrateOptions {
    pub tol: f64,
    pub max_steps: usize,
    pub h_max: f64,
    /// Evaluate the governing energy at every sample to fill `max_energy_drift`.
    pub track_energy: bool,
}

impl IntegrateOptions {
    pub fn new(tol: f64) -> Self {
        Self { tol, max_steps: 2_000_000, h_max: f64::INFINITY, track_energy: true }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1e-14..=1e-4).contains(&self.tol) {
            return Err(Error::InvalidParameter(format!("tolerance {} outside [1e-14, 1e-4]", self.tol)));
        }
        Ok(())
    }

    pub(crate) fn stepper(&self) -> StepperOptions {
        StepperOptions { h_max: self.h_max, max_steps: self.max_steps, ..StepperOptions::with_tol(self.tol) }
    }
}

pub(crate) fn is_stop_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Singular { .. }
            | Error::ChartDomain { .. }
            | Error::OrbitExcluded { .. }
            | Error::OrbitLeavesChart { .. }
            | Error::OutsideRegion(_)
            | Error::NodeCapExceeded { .. }
            | Error::StepUnderflow { .. }
    )
}

pub(crate) fn field_fn(sys: &System) -> impl FnMut(f64, &[f64; 4]) -> Result<[f64; 4]> + '_ {
    move |t, y| sys.vector_field(&PhaseState::from_array(y, t))
}

/// Integrates `sys` from `state` to `t_end` (forward or backward).
pub fn integrate(sys: &System, state: &PhaseState, t_end: f64, tol: f64) -> Result<Trajectory> {
    integrate_with(sys, state, t_end, &IntegrateOptions::new(tol))
}

pub fn integrate_with(sys: &System, state: &PhaseState, t_end: f64, opts: &IntegrateOptions) -> Result<Trajectory> {
    opts.validate()?;
    if !state.is_finite() || !t_end.is_finite() {
        return Err(Error::InvalidParameter("non-finite initial state or end time".into()));
    }
    sys.check_regular(state)?;
    let e0 = if opts.track_energy { Some(sys.energy(state)?) } else { None };
    let mut traj = Trajectory { samples: vec![*state], segments: Vec::new(), stats: TrajectoryStats::default(), status: Status::Completed };
    let mut f = field_fn(sys);
    let mut stepper = Dop853::new(&mut f, state.t, state.to_array(), t_end, opts.stepper())?;
    while stepper.t() != t_end {
        let seg = match stepper.step(&mut f, t_end) {
            Ok(s) => s,
            Err(e) if is_stop_error(&e) => {
                traj.status = Status::SingularityStop { t: stepper.t(), reason: e.to_string() };
                break;
            }
            Err(e) => return Err(e),
        };
        traj.push_segment(seg);
        let s = *traj.last();
        if let Err(e) = sys.check_regular(&s) {
            traj.status = Status::SingularityStop { t: s.t, reason: e.to_string() };
            break;
        }
        if let Some(e0) = e0 {
            match sys.energy(&s) {
                Ok(e) => traj.stats.max_energy_drift = traj.stats.max_energy_drift.max((e - e0).abs()),
                Err(e) if is_stop_error(&e) => {
                    traj.status = Status::SingularityStop { t: s.t, reason: e.to_string() };
                    break;
                }
                Err(e) => return Err(e),
            }
        }
    }
    let c = stepper.counts();
    traj.stats.steps = c.accepted;
    traj.stats.rejected = c.rejected;
    traj.stats.evaluations = c.evaluations;
    Ok(traj)
}

/// Canonical coordinates `(q, p)` in the standardized chart: `p = v` on the
/// plane, `p = Mᵀ G M w` on curved surfaces (`M` the frame's linear part).
pub fn to_canonical(state: &PhaseState, params: &ModelParams) -> [f64; 4] {
    if !params.space.is_curved() {
        return state.to_array();
    }
    let frame = params.frame();
    let q = frame.point_to_raw(state.q);
    let p_raw = mat_vec(&chart_metric(q, params.space), frame.vector_to_raw(state.v));
    let p = frame.covector_from_raw(p_raw);
    [state.q[0], state.q[1], p[0], p[1]]
}

pub fn from_canonical(z: &[f64; 4], params: &ModelParams) -> PhaseState {
    if !params.space.is_curved() {
        return PhaseState::from_array(z, 0.0);
    }
    let frame = params.frame();
    let q = frame.point_to_raw([z[0], z[1]]);
    let w_raw = mat_vec(&chart_metric_inverse(q, params.space), frame.covector_to_raw([z[2], z[3]]));
    PhaseState::new([z[0], z[1]], frame.vector_from_raw(w_raw))
}

/// `max(1e-5, 1e-5 ‖z‖)`.
pub fn default_bracket_step(z: &[f64; 4]) -> f64 {
    let n = z.iter().map(|c| c * c).sum::<f64>().sqrt();
    1e-5f64.max(1e-5 * n)
}

/// Central-difference gradient with one Richardson extrapolation:
/// `(4 D(h) - D(2h)) / 3`.
pub fn gradient_fd<F>(f: F, z: &[f64; 4], step: f64) -> Result<[f64; 4]>
where
    F: Fn(&[f64; 4]) -> Result<f64>,
{
    let mut g = [0.0; 4];
    for i in 0..4 {
        let at = |d: f64| {
            let mut y = *z;
            y[i] += d;
            f(&y)
        };
        let d1 = (at(step)? - at(-step)?) / (2.0 * step);
        let d2 = (at(2.0 * step)? - at(-2.0 * step)?) / (4.0 * step);
        g[i] = (4.0 * d1 - d2) / 3.0;
    }
    Ok(g)
}

/// `{F, G} = Σ ∂F/∂qᵢ ∂G/∂pᵢ - ∂F/∂pᵢ ∂G/∂qᵢ` at canonical point `z`.
pub fn poisson_bracket_fd<F, G>(f: F, g: G, z: &[f64; 4], step: Option<f64>) -> Result<f64>
where
    F: Fn(&[f64; 4]) -> Result<f64>,
    G: Fn(&[f64; 4]) -> Result<f64>,
{
    let h = step.unwrap_or_else(|| default_bracket_step(z));
    let gf = gradient_fd(f, z, h)?;
    let gg = gradient_fd(g, z, h)?;
    Ok(bracket_from_gradients(&gf, &gg))
}

pub fn bracket_from_gradients(gf: &[f64; 4], gg: &[f64; 4]) -> f64 {
    (gf[0] * gg[2] - gf[2] * gg[0]) + (gf[1] * gg[3] - gf[3] * gg[1])
}

/// Bracket of two functions of states of the space `params.space`, through
/// the Legendre identification of velocities with momenta.
pub fn poisson_bracket_states<F, G>(f: F, g: G, state: &PhaseState, params: &ModelParams) -> Result<f64>
where
    F: Fn(&PhaseState) -> Result<f64>,
    G: Fn(&PhaseState) -> Result<f64>,
{
    let z = to_canonical(state, params);
    poisson_bracket_fd(|y| f(&from_canonical(y, params)), |y| g(&from_canonical(y, params)), &z, None)
}
