//! Reflection walls from the confocal conic family with foci at the two
//! centers, and the billiard loop over any governing flow.
//!
//! Walls are defined through geodesic focal distances, so one definition
//! serves the plane, the sphere and the hyperbolic plane. Wall geometry lives
//! in the natural chart of the surface (standardized chart on the plane, raw
//! gnomonic chart on curved surfaces); dynamical states stay standardized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, field_fn, DenseSegment, Dop853, IntegrateOptions, Status, System, Trajectory, TrajectoryStats};
use crate::geometry::{
    chart_metric_inverse, dot, geodesic_distance, geodesic_distance_gradient, mat_vec, metric_product, reflect_vector, PhaseState,
    Space, Vec2,
};
use crate::model::{FirstIntegrals, ModelParams};

/// Normal speed below which a crossing counts as a graze.
pub const GRAZE_THRESHOLD: f64 = 1e-10;
/// Impacts this close to a focus or an arc endpoint abort the run.
pub const DEGENERACY_RADIUS: f64 = 1e-8;
/// Displacement along the post-reflection velocity before restarting.
pub const NUDGE: f64 = 1e-12;
const TIME_TOL: f64 = 1e-12;
const SUBDIVISIONS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallKind {
    Ellipse,
    HyperbolaBranch,
    FocalLine,
}

/// Angular window `[start, end]` (radians, counterclockwise from `start`)
/// seen from the first focus in the natural chart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcWindow {
    pub start: f64,
    pub end: f64,
}

impl ArcWindow {
    fn width(&self) -> f64 {
        (self.end - self.start).rem_euclid(std::f64::consts::TAU)
    }

    fn offset(&self, angle: f64) -> f64 {
        (angle - self.start).rem_euclid(std::f64::consts::TAU)
    }

    pub fn contains(&self, angle: f64) -> bool {
        self.offset(angle) <= self.width()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wall {
    pub kind: WallKind,
    /// Half focal sum (ellipse) or half focal difference (hyperbola).
    pub s: f64,
    /// `±1`, selects the hyperbola branch: `(r₁ - r₂)·branch = 2s`.
    pub branch: f64,
    /// Foci in the natural chart; the first is the primary center.
    pub foci: [Vec2; 2],
    pub window: Option<ArcWindow>,
}

/// Chart point of the surface's natural chart for a standardized point.
pub fn natural_point(q: Vec2, params: &ModelParams) -> Vec2 {
    if params.space.is_curved() {
        params.frame().point_to_raw(q)
    } else {
        q
    }
}

fn natural_vector(v: Vec2, params: &ModelParams) -> Vec2 {
    if params.space.is_curved() {
        params.frame().vector_to_raw(v)
    } else {
        v
    }
}

/// The two centers of `params` in the natural chart.
pub fn center_foci(params: &ModelParams) -> [Vec2; 2] {
    [natural_point([0.0, 0.0], params), natural_point([0.0, -2.0 * params.h()], params)]
}

impl Wall {
    /// A member of the confocal family whose foci are the two centers.
    pub fn confocal(kind: WallKind, s: f64, branch: f64, params: &ModelParams) -> Result<Self> {
        let w = Self { kind, s, branch, foci: center_foci(params), window: None };
        w.validate(params.space)?;
        Ok(w)
    }

    pub fn with_window(mut self, start: f64, end: f64) -> Self {
        self.window = Some(ArcWindow { start, end });
        self
    }

    /// Half the geodesic distance between the foci.
    pub fn half_focal_distance(&self, space: Space) -> Result<f64> {
        Ok(0.5 * geodesic_distance(self.foci[0], self.foci[1], space)?)
    }

    pub fn validate(&self, space: Space) -> Result<()> {
        let c = self.half_focal_distance(space)?;
        let ok = match self.kind {
            WallKind::Ellipse => self.s > c,
            WallKind::HyperbolaBranch => self.s > 0.0 && self.s < c && (self.branch == 1.0 || self.branch == -1.0),
            WallKind::FocalLine => c > 0.0,
        };
        if ok && self.s.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{:?} wall with s = {} and half focal distance {c} is not admissible", self.kind, self.s)))
        }
    }

    fn angle(&self, point: Vec2) -> f64 {
        (point[1] - self.foci[0][1]).atan2(point[0] - self.foci[0][0])
    }
}

/// `r₁ + r₂ - 2s`, `(r₁ - r₂)·branch - 2s` or `r₁ - r₂` at a natural-chart point.
pub fn wall_value(wall: &Wall, point: Vec2, space: Space) -> Result<f64> {
    let r1 = geodesic_distance(point, wall.foci[0], space)?;
    let r2 = geodesic_distance(point, wall.foci[1], space)?;
    Ok(match wall.kind {
        WallKind::Ellipse => r1 + r2 - 2.0 * wall.s,
        WallKind::HyperbolaBranch => (r1 - r2) * wall.branch - 2.0 * wall.s,
        WallKind::FocalLine => r1 - r2,
    })
}

/// Differential of [`wall_value`] (a covector in the natural chart).
pub fn wall_gradient(wall: &Wall, point: Vec2, space: Space) -> Result<Vec2> {
    let g1 = geodesic_distance_gradient(point, wall.foci[0], space)?;
    let g2 = geodesic_distance_gradient(point, wall.foci[1], space)?;
    let (a, b) = match wall.kind {
        WallKind::Ellipse => (1.0, 1.0),
        WallKind::HyperbolaBranch => (wall.branch, -wall.branch),
        WallKind::FocalLine => (1.0, -1.0),
    };
    Ok([a * g1[0] + b * g2[0], a * g1[1] + b * g2[1]])
}

/// Metric-unit normal vector of the level set of [`wall_value`] through `point`.
pub fn wall_normal(wall: &Wall, point: Vec2, space: Space) -> Result<Vec2> {
    let g = wall_gradient(wall, point, space)?;
    let n = mat_vec(&chart_metric_inverse(point, space), g);
    let len = dot(g, n).max(0.0).sqrt();
    if !(len >= 1e-12) {
        return Err(Error::DegenerateNormal { x: point[0], y: point[1] });
    }
    Ok([n[0] / len, n[1] / len])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpactKind {
    Reflect,
    Graze,
}

/// A located wall crossing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Impact {
    pub t: f64,
    /// Standardized state at the crossing, still on the incoming side.
    pub state: PhaseState,
    pub kind: ImpactKind,
    /// `g(v, n̂)` at the crossing.
    pub normal_speed: f64,
}

/// Earliest crossing of `wall` within a dense segment.
pub fn find_impact(seg: &DenseSegment<4>, wall: &Wall, params: &ModelParams) -> Result<Option<Impact>> {
    let space = params.space;
    let value_at = |t: f64| -> Result<f64> {
        let y = seg.eval(t);
        wall_value(wall, natural_point([y[0], y[1]], params), space)
    };
    let (t0, t1) = (seg.t0, seg.t1());
    let mut a = t0;
    let mut fa = value_at(a)?;
    for j in 1..=SUBDIVISIONS {
        let b = if j == SUBDIVISIONS { t1 } else { t0 + (t1 - t0) * j as f64 / SUBDIVISIONS as f64 };
        let fb = value_at(b)?;
        if fa != 0.0 && fa.signum() != fb.signum() {
            let (mut lo, mut hi, flo) = (a, b, fa);
            while (hi - lo).abs() > TIME_TOL {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                let fm = value_at(mid)?;
                if fm.signum() == flo.signum() && fm != 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let y = seg.eval(lo);
            let state = PhaseState::from_array(&y, lo);
            let point = natural_point(state.q, params);
            let inside = match &wall.window {
                Some(w) => w.contains(wall.angle(point)),
                None => true,
            };
            if inside {
                for f in wall.foci {
                    let d = geodesic_distance(point, f, space)?;
                    if d < DEGENERACY_RADIUS {
                        return Err(Error::FocusImpact { t: lo, distance: d });
                    }
                }
                if let Some(w) = &wall.window {
                    let r = geodesic_distance(point, wall.foci[0], space)?;
                    let off = w.offset(wall.angle(point));
                    let d = r * off.min((w.width() - off).abs());
                    if d < DEGENERACY_RADIUS {
                        return Err(Error::CornerImpact { t: lo, distance: d });
                    }
                }
                let n = wall_normal(wall, point, space)?;
                let v = natural_vector(state.v, params);
                let normal_speed = metric_product(point, v, n, space);
                let kind = if normal_speed.abs() < GRAZE_THRESHOLD { ImpactKind::Graze } else { ImpactKind::Reflect };
                return Ok(Some(Impact { t: lo, state, kind, normal_speed }));
            }
        }
        a = b;
        fa = fb;
    }
    Ok(None)
}

/// Elastic reflection of a standardized state at `wall`.
pub fn reflect_at_wall(state: &PhaseState, wall: &Wall, params: &ModelParams) -> Result<PhaseState> {
    let point = natural_point(state.q, params);
    let g = wall_gradient(wall, point, params.space)?;
    let v = natural_vector(state.v, params);
    let r = reflect_vector(&PhaseState { q: point, v, t: state.t }, g, params.space)?;
    let v_post = if params.space.is_curved() { params.frame().vector_from_raw(r.v) } else { r.v };
    Ok(PhaseState { v: v_post, ..*state })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BounceRecord {
    pub index: usize,
    pub wall: usize,
    pub t: f64,
    pub point: Vec2,
    pub v_pre: Vec2,
    pub v_post: Vec2,
    pub pre: FirstIntegrals,
    pub post: FirstIntegrals,
}

impl BounceRecord {
    pub fn delta_d(&self) -> f64 {
        self.post.d - self.pre.d
    }

    pub fn delta_e_kep(&self) -> f64 {
        self.post.e_kep - self.pre.e_kep
    }

    /// Jump of the governing energy at the reflection.
    pub fn delta_e_target(&self) -> f64 {
        self.post.e_target - self.pre.e_target
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BilliardStatus {
    Completed,
    MaxBounces,
    SingularityStop { t: f64, reason: String },
    FocusDegeneracy { t: f64 },
    CornerDegeneracy { t: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BilliardRun {
    pub trajectory: Trajectory,
    pub bounces: Vec<BounceRecord>,
    /// Times of crossings classified as grazes (passed through, not reflected).
    pub grazes: Vec<f64>,
    pub status: BilliardStatus,
}

/// Alternates the flow of `sys` with elastic reflections at `walls` until
/// `t_end`, `max_bounces` or a stop.
pub fn run_billiard(
    sys: &System,
    walls: &[Wall],
    state: &PhaseState,
    t_end: f64,
    max_bounces: usize,
    tol: f64,
) -> Result<BilliardRun> {
    let opts = IntegrateOptions::new(tol);
    opts.validate()?;
    let params = &sys.params;
    if !(t_end > state.t) {
        return Err(Error::InvalidParameter("billiard runs integrate forward in time".into()));
    }
    for w in walls {
        w.validate(params.space)?;
        if wall_value(w, natural_point(state.q, params), params.space)?.abs() <= 1e-12 {
            return Err(Error::InvalidParameter("initial state lies on a wall".into()));
        }
    }
    sys.check_regular(state)?;
    sys.first_integrals(state)?;

    let mut traj = Trajectory {
        samples: vec![*state],
        segments: Vec::new(),
        stats: TrajectoryStats::default(),
        status: Status::Completed,
    };
    let mut run_status = BilliardStatus::Completed;
    let mut bounces = Vec::new();
    let mut grazes = Vec::new();
    let mut f = field_fn(sys);
    let mut stepper = Dop853::new(&mut f, state.t, state.to_array(), t_end, opts.stepper())?;

    'outer: while stepper.t() < t_end {
        if bounces.len() >= max_bounces {
            run_status = BilliardStatus::MaxBounces;
            break;
        }
        let seg = match stepper.step(&mut f, t_end) {
            Ok(s) => s,
            Err(e) if flow::is_stop_error(&e) => {
                run_status = BilliardStatus::SingularityStop { t: stepper.t(), reason: e.to_string() };
                break;
            }
            Err(e) => return Err(e),
        };
        let mut earliest: Option<(usize, Impact)> = None;
        for (i, w) in walls.iter().enumerate() {
            let hit = match find_impact(&seg, w, params) {
                Ok(h) => h,
                Err(Error::FocusImpact { t, .. }) => {
                    traj.push_segment(seg.truncated(t));
                    run_status = BilliardStatus::FocusDegeneracy { t };
                    break 'outer;
                }
                Err(Error::CornerImpact { t, .. }) => {
                    traj.push_segment(seg.truncated(t));
                    run_status = BilliardStatus::CornerDegeneracy { t };
                    break 'outer;
                }
                Err(e) => return Err(e),
            };
            if let Some(hit) = hit {
                if earliest.as_ref().is_none_or(|(_, e)| hit.t < e.t) {
                    earliest = Some((i, hit));
                }
            }
        }
        let Some((wi, hit)) = earliest else {
            traj.push_segment(seg);
            let s = *traj.last();
            if let Err(e) = sys.check_regular(&s) {
                run_status = BilliardStatus::SingularityStop { t: s.t, reason: e.to_string() };
                break;
            }
            continue;
        };
        if hit.kind == ImpactKind::Graze {
            grazes.push(hit.t);
            traj.push_segment(seg);
            continue;
        }
        traj.push_segment(seg.truncated(hit.t));
        let pre_state = hit.state;
        let post_state = reflect_at_wall(&pre_state, &walls[wi], params)?;
        let (pre, post) = match (sys.first_integrals(&pre_state), sys.first_integrals(&post_state)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) if flow::is_stop_error(&e) => {
                run_status = BilliardStatus::SingularityStop { t: hit.t, reason: e.to_string() };
                break;
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        bounces.push(BounceRecord {
            index: bounces.len(),
            wall: wi,
            t: hit.t,
            point: pre_state.q,
            v_pre: pre_state.v,
            v_post: post_state.v,
            pre,
            post,
        });
        let restart = PhaseState {
            q: [post_state.q[0] + NUDGE * post_state.v[0], post_state.q[1] + NUDGE * post_state.v[1]],
            ..post_state
        };
        if let Err(e) = stepper.reset(&mut f, hit.t, restart.to_array()) {
            if flow::is_stop_error(&e) {
                run_status = BilliardStatus::SingularityStop { t: hit.t, reason: e.to_string() };
                break;
            }
            return Err(e);
        }
    }
    let c = stepper.counts();
    traj.stats.steps = c.accepted;
    traj.stats.rejected = c.rejected;
    traj.stats.evaluations = c.evaluations;
    if let BilliardStatus::SingularityStop { t, reason } = &run_status {
        traj.status = Status::SingularityStop { t: *t, reason: reason.clone() };
    }
    Ok(BilliardRun { trajectory: traj, bounces, grazes, status: run_status })
}

/// Points of `wall` in the natural chart, found along `rays` rays from the
/// first focus out to distance `reach`. Rays that miss the wall give `None`,
/// which separates the traced pieces.
pub fn trace_wall(wall: &Wall, space: Space, reach: f64, rays: usize) -> Vec<Option<Vec2>> {
    const RADIAL: usize = 400;
    let f = wall.foci[0];
    let value = |p: Vec2| wall_value(wall, p, space).ok();
    let mut pts = Vec::with_capacity(rays + 1);
    for i in 0..=rays {
        let th = std::f64::consts::TAU * i as f64 / rays as f64;
        let (s, c) = th.sin_cos();
        let at = |r: f64| [f[0] + r * c, f[1] + r * s];
        let mut hit = None;
        let mut prev: Option<(f64, f64)> = None;
        for j in 1..=RADIAL {
            let r = reach * j as f64 / RADIAL as f64;
            let Some(v) = value(at(r)) else { break };
            if let Some((r0, v0)) = prev {
                if v0.signum() != v.signum() {
                    let (mut lo, mut hi) = (r0, r);
                    for _ in 0..50 {
                        let mid = 0.5 * (lo + hi);
                        match value(at(mid)) {
                            Some(m) if m.signum() == v0.signum() => lo = mid,
                            _ => hi = mid,
                        }
                    }
                    hit = Some(at(0.5 * (lo + hi)));
                    break;
                }
            }
            prev = Some((r, v));
        }
        pts.push(hit);
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::SystemKind;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plane(a: f64) -> ModelParams {
        ModelParams::new(1.0, 0.0, 0.0, a, Space::Euclidean).unwrap()
    }

    #[test]
    fn wall_value_examples() {
        let w = Wall { kind: WallKind::Ellipse, s: 1.0, branch: 1.0, foci: [[0.0, 0.0], [0.0, -1.0]], window: None };
        assert_abs_diff_eq!(wall_value(&w, [0.0, 0.5], Space::Euclidean).unwrap(), 0.0, epsilon = 1e-15);
        let l = Wall { kind: WallKind::FocalLine, ..w };
        assert_eq!(wall_value(&l, [0.7, -0.5], Space::Euclidean).unwrap(), 0.0);
        let params = ModelParams::new(1.0, 0.0, 0.0, 0.6, Space::Spherical).unwrap();
        let e = Wall::confocal(WallKind::Ellipse, 0.9, 1.0, &params).unwrap();
        // the lifted midpoint of the foci is the chart origin
        let d = geodesic_distance([0.0, 0.0], e.foci[0], Space::Spherical).unwrap();
        assert_abs_diff_eq!(wall_value(&e, [0.0, 0.0], Space::Spherical).unwrap(), 2.0 * d - 1.8, epsilon = 1e-14);
        assert_abs_diff_eq!(d, 0.6f64.atan(), epsilon = 1e-15);
    }

    #[test]
    fn confocal_admissibility() {
        let p = plane(1.0);
        let c = p.h();
        assert!(Wall::confocal(WallKind::Ellipse, 0.5 * c, 1.0, &p).is_err());
        assert!(Wall::confocal(WallKind::HyperbolaBranch, 2.0 * c, 1.0, &p).is_err());
        assert!(Wall::confocal(WallKind::HyperbolaBranch, 0.5 * c, 1.0, &p).is_ok());
    }

    #[test]
    fn normal_examples() {
        let p = plane(1.0);
        let l = Wall::confocal(WallKind::FocalLine, 0.0, 1.0, &p).unwrap();
        let n = wall_normal(&l, [0.3, -p.h()], Space::Euclidean).unwrap();
        assert_abs_diff_eq!(n[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(n[1].abs(), 1.0, epsilon = 1e-15);
        let e = Wall::confocal(WallKind::Ellipse, 2.0 * p.h(), 1.0, &p).unwrap();
        // apsis on the focal axis: r₁ = y, r₂ = y + 2h, r₁ + r₂ = 4h
        let n = wall_normal(&e, [0.0, p.h()], Space::Euclidean).unwrap();
        assert_abs_diff_eq!(n[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn normal_matches_finite_difference_and_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for space in [Space::Euclidean, Space::Spherical, Space::Hyperbolic] {
            let p = ModelParams::new(1.0, 0.0, 0.0, 0.4, space).unwrap();
            for kind in [WallKind::Ellipse, WallKind::HyperbolaBranch, WallKind::FocalLine] {
                let c = Wall::confocal(WallKind::FocalLine, 0.0, 1.0, &p).unwrap().half_focal_distance(space).unwrap();
                let s = match kind {
                    WallKind::Ellipse => 1.5 * c,
                    _ => 0.5 * c,
                };
                let w = Wall::confocal(kind, s, 1.0, &p).unwrap();
                for _ in 0..20 {
                    let q = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.6..0.6)];
                    let g = wall_gradient(&w, q, space).unwrap();
                    let eps = 1e-6;
                    for i in 0..2 {
                        let (mut a, mut b) = (q, q);
                        a[i] += eps;
                        b[i] -= eps;
                        let fd = (wall_value(&w, a, space).unwrap() - wall_value(&w, b, space).unwrap()) / (2.0 * eps);
                        assert_abs_diff_eq!(fd, g[i], epsilon = 1e-6);
                    }
                    // level-set tangent: rotate the gradient covector into a vector with g(t, n) = 0
                    let n = wall_normal(&w, q, space).unwrap();
                    let t = [-g[1], g[0]];
                    assert!(metric_product(q, t, n, space).abs() <= 1e-8);
                }
            }
        }
    }

    #[test]
    fn straight_line_crossing_of_focal_line() {
        let p = ModelParams::new(0.0, 0.0, 0.0, 1.0, Space::Euclidean).unwrap();
        let sys = System::new(SystemKind::Kepler, p).unwrap();
        let w = Wall::confocal(WallKind::FocalLine, 0.0, 1.0, &p).unwrap();
        let s = PhaseState::new([0.2, 0.5], [0.1, -1.0]);
        let traj = flow::integrate(&sys, &s, 2.0, 1e-12).unwrap();
        let mut found = None;
        for seg in &traj.segments {
            if let Some(hit) = find_impact(seg, &w, &p).unwrap() {
                found = Some(hit);
                break;
            }
        }
        let hit = found.unwrap();
        // η(t) = 0.5 - t crosses -h at t = 0.5 + h
        assert_abs_diff_eq!(hit.t, 0.5 + p.h(), epsilon = 1e-12);
        assert_eq!(hit.kind, ImpactKind::Reflect);
    }

    #[test]
    fn no_impact_on_one_side() {
        let p = plane(1.0);
        let sys = System::new(SystemKind::Kepler, p).unwrap();
        let w = Wall::confocal(WallKind::Ellipse, 3.0, 1.0, &p).unwrap();
        let traj = flow::integrate(&sys, &PhaseState::new([1.0, 0.0], [0.0, 1.0]), 3.0, 1e-10).unwrap();
        for seg in &traj.segments {
            assert!(find_impact(seg, &w, &p).unwrap().is_none());
        }
        let run = run_billiard(&sys, &[w], &PhaseState::new([1.0, 0.0], [0.0, 1.0]), 0.5, 10, 1e-10).unwrap();
        assert!(run.bounces.is_empty());
        assert_eq!(run.status, BilliardStatus::Completed);
    }

    #[test]
    fn kepler_billiard_conserves_d_at_focal_line() {
        let p = plane(1.0);
        let sys = System::new(SystemKind::Kepler, p).unwrap();
        let w = Wall::confocal(WallKind::FocalLine, 0.0, 1.0, &p).unwrap();
        let run = run_billiard(&sys, &[w], &PhaseState::new([0.9, 0.1], [-0.2, 1.0]), 200.0, 20, 1e-12).unwrap();
        assert!(run.bounces.len() >= 10, "{} bounces, {:?}", run.bounces.len(), run.status);
        for b in &run.bounces {
            assert!(b.delta_d().abs() <= 1e-10 * (1.0 + b.pre.d.abs()), "{}", b.delta_d());
            assert!(b.delta_e_kep().abs() <= 1e-12);
            let n = wall_normal(&w, b.point, Space::Euclidean).unwrap();
            assert!(dot(n, b.v_pre) * dot(n, b.v_post) < 0.0);
        }
    }

    #[test]
    fn arc_window_lets_trajectories_pass() {
        let p = plane(1.0);
        let sys = System::new(SystemKind::Kepler, p).unwrap();
        // a window that excludes the whole region the orbit visits near the line
        let w = Wall::confocal(WallKind::FocalLine, 0.0, 1.0, &p).unwrap().with_window(0.1, 0.2);
        let run = run_billiard(&sys, &[w], &PhaseState::new([0.9, 0.1], [-0.2, 1.0]), 20.0, 20, 1e-10).unwrap();
        assert!(run.bounces.is_empty());
    }

    #[test]
    fn traced_ellipse_lies_on_the_wall() {
        let p = ModelParams::new(1.0, 0.0, 0.0, 0.5, Space::Spherical).unwrap();
        let w = Wall::confocal(WallKind::Ellipse, 0.55, 1.0, &p).unwrap();
        let pts = trace_wall(&w, p.space, 10.0, 720);
        assert!(pts.iter().all(|p| p.is_some()));
        for q in pts.into_iter().flatten() {
            assert!(wall_value(&w, q, p.space).unwrap().abs() < 1e-9);
        }
    }
}
