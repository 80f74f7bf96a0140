//! Configuration surfaces and chart machinery.
//!
//! The sphere is the unit sphere of ℝ³ and the hyperbolic plane the lower
//! sheet of the unit pseudosphere of ℝ^{2,1}. Both are charted by central
//! projection onto the plane `z = -1`: the chart point `q` corresponds to the
//! surface point `(q, -1) / √λ(q)` with `λ(q) = 1 + κ|q|²`.
//!
//! Functions here take *natural chart* coordinates: for the Euclidean plane
//! that is any Cartesian chart with the standard metric (the dynamics use the
//! standardized chart), for the curved surfaces it is the raw gnomonic chart.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];
pub type Vec3 = [f64; 3];

/// Lifted third coordinate above which a spherical point counts as on the equator.
pub const EQUATOR_GUARD: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Euclidean,
    Spherical,
    Hyperbolic,
}

impl Space {
    pub fn curvature(self) -> f64 {
        match self {
            Space::Euclidean => 0.0,
            Space::Spherical => 1.0,
            Space::Hyperbolic => -1.0,
        }
    }

    pub fn is_curved(self) -> bool {
        self != Space::Euclidean
    }

    pub fn name(self) -> &'static str {
        match self {
            Space::Euclidean => "euclidean",
            Space::Spherical => "spherical",
            Space::Hyperbolic => "hyperbolic",
        }
    }
}

/// Chart position, chart velocity and time.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseState {
    pub q: Vec2,
    pub v: Vec2,
    #[serde(default)]
    pub t: f64,
}

impl PhaseState {
    pub fn new(q: Vec2, v: Vec2) -> Self {
        Self { q, v, t: 0.0 }
    }

    pub fn at(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.q[0], self.q[1], self.v[0], self.v[1]]
    }

    pub fn from_array(y: &[f64; 4], t: f64) -> Self {
        Self { q: [y[0], y[1]], v: [y[2], y[3]], t }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite()) && self.t.is_finite()
    }
}

/// A surface point in the ambient space together with a tangent vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChartJacobianPair {
    pub point: Vec3,
    pub velocity: Vec3,
}

/// `‖(u, v)‖_a = √(u² + v²/(1+a²))`.
pub fn scaled_norm(v: Vec2, a: f64) -> f64 {
    if a == 0.0 {
        return v[0].hypot(v[1]);
    }
    (v[0] * v[0] + v[1] * v[1] / (1.0 + a * a)).sqrt()
}

/// The affine change `x = ξ`, `y = s·η + a` with `s = √(1 + κa²)`.
///
/// `κ = +1` pairs the plane with the sphere (the usual setting); `κ = -1`
/// pairs it with the hyperbolic plane and requires `a < 1`. With this change
/// the first center `(0, a)` goes to the origin, the second center `(0, -a)`
/// to `(0, -2h)` and the raw origin to `(0, -h)`, where `h = a / s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    a: f64,
    scale: f64,
}

impl Frame {
    pub fn new(a: f64, kappa: f64) -> Result<Self> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::InvalidParameter(format!("center parameter a = {a} must be finite and ≥ 0")));
        }
        let s2 = 1.0 + kappa * a * a;
        if s2 <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "center parameter a = {a} puts the centers outside the hyperbolic chart (need a < 1)"
            )));
        }
        Ok(Self { a, scale: s2.sqrt() })
    }

    pub fn spherical(a: f64) -> Result<Self> {
        Self::new(a, 1.0)
    }

    pub fn hyperbolic(a: f64) -> Result<Self> {
        Self::new(a, -1.0)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// `√(1 + κa²)`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Half the distance from the primary to the secondary center in standardized coordinates.
    pub fn h(&self) -> f64 {
        self.a / self.scale
    }

    pub fn secondary_center(&self) -> Vec2 {
        [0.0, -2.0 * self.h()]
    }

    pub fn hooke_center(&self) -> Vec2 {
        [0.0, -self.h()]
    }

    pub fn point_to_raw(&self, q: Vec2) -> Vec2 {
        [q[0], self.scale * q[1] + self.a]
    }

    pub fn point_from_raw(&self, x: Vec2) -> Vec2 {
        [x[0], (x[1] - self.a) / self.scale]
    }

    pub fn vector_to_raw(&self, v: Vec2) -> Vec2 {
        [v[0], self.scale * v[1]]
    }

    pub fn vector_from_raw(&self, v: Vec2) -> Vec2 {
        [v[0], v[1] / self.scale]
    }

    /// Covectors transform with the transpose: `p_std = Mᵀ p_raw`.
    pub fn covector_from_raw(&self, p: Vec2) -> Vec2 {
        [p[0], self.scale * p[1]]
    }

    pub fn covector_to_raw(&self, p: Vec2) -> Vec2 {
        [p[0], p[1] / self.scale]
    }

    pub fn standardize(&self, raw: &PhaseState) -> PhaseState {
        PhaseState { q: self.point_from_raw(raw.q), v: self.vector_from_raw(raw.v), t: raw.t }
    }

    pub fn unstandardize(&self, std: &PhaseState) -> PhaseState {
        PhaseState { q: self.point_to_raw(std.q), v: self.vector_to_raw(std.v), t: std.t }
    }
}

/// `(x, y, ẋ, ẏ) ↦ (ξ, η, ξ̇, η̇)` in the sphere-paired frame.
pub fn standardize(x: f64, y: f64, vx: f64, vy: f64, a: f64) -> (f64, f64, f64, f64) {
    let s = (1.0 + a * a).sqrt();
    (x, (y - a) / s, vx, vy / s)
}

pub fn unstandardize(xi: f64, eta: f64, vxi: f64, veta: f64, a: f64) -> (f64, f64, f64, f64) {
    let s = (1.0 + a * a).sqrt();
    (xi, s * eta + a, vxi, s * veta)
}

pub(crate) fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub(crate) fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub(crate) fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

pub(crate) fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

/// `B(X, Y) = X₁Y₁ + X₂Y₂ + κX₃Y₃`: the Euclidean product for the sphere,
/// the Lorentz product for the hyperboloid.
pub fn ambient_form(x: Vec3, y: Vec3, space: Space) -> f64 {
    x[0] * y[0] + x[1] * y[1] + space.curvature() * x[2] * y[2]
}

/// `λ(q) = 1 + κ|q|²` for a raw chart point.
pub fn conformal_factor(q: Vec2, space: Space) -> f64 {
    1.0 + space.curvature() * dot(q, q)
}

fn require_curved(space: Space) -> Result<()> {
    if space.is_curved() {
        Ok(())
    } else {
        Err(Error::InvalidParameter("the Euclidean plane has no ambient lift".into()))
    }
}

/// Checks that a raw chart point lies in the chart domain of `space`.
pub fn check_chart_domain(q: Vec2, space: Space) -> Result<()> {
    match space {
        Space::Euclidean => Ok(()),
        Space::Spherical => {
            // third lifted coordinate is -1/√λ
            let z = -1.0 / conformal_factor(q, space).sqrt();
            if z.is_finite() && z < -EQUATOR_GUARD {
                Ok(())
            } else {
                Err(Error::ChartDomain { space })
            }
        }
        Space::Hyperbolic => {
            let lam = conformal_factor(q, space);
            if lam > EQUATOR_GUARD {
                Ok(())
            } else {
                Err(Error::ChartDomain { space })
            }
        }
    }
}

/// Lifts a raw chart point to the surface.
pub fn lift_point(q: Vec2, space: Space) -> Result<Vec3> {
    require_curved(space)?;
    check_chart_domain(q, space)?;
    let r = conformal_factor(q, space).sqrt();
    Ok([q[0] / r, q[1] / r, -1.0 / r])
}

/// Central projection of a raw chart state onto the surface, with the
/// differential applied to the velocity.
pub fn lift_to_surface(state: &PhaseState, space: Space) -> Result<ChartJacobianPair> {
    let point = lift_point(state.q, space)?;
    let kappa = space.curvature();
    let lam = conformal_factor(state.q, space);
    let r = lam.sqrt();
    // X = U/√λ, Ẋ = U̇/√λ - X·λ̇/(2λ), λ̇ = 2κ q·v
    let rate = kappa * dot(state.q, state.v) / lam;
    let velocity = [
        state.v[0] / r - point[0] * rate,
        state.v[1] / r - point[1] * rate,
        -point[2] * rate,
    ];
    Ok(ChartJacobianPair { point, velocity })
}

/// Inverse of [`lift_to_surface`]. The returned state has `t = 0`.
pub fn project_to_chart(ambient: &ChartJacobianPair, space: Space) -> Result<PhaseState> {
    require_curved(space)?;
    let [x0, x1, x2] = ambient.point;
    let limit = match space {
        Space::Spherical => -EQUATOR_GUARD,
        _ => 0.0,
    };
    if !(x2 < limit) {
        return Err(Error::ChartDomain { space });
    }
    let q = [-x0 / x2, -x1 / x2];
    let [w0, w1, w2] = ambient.velocity;
    let v = [-w0 / x2 + x0 * w2 / (x2 * x2), -w1 / x2 + x1 * w2 / (x2 * x2)];
    Ok(PhaseState::new(q, v))
}

/// Geodesic distance between two natural-chart points.
pub fn geodesic_distance(p: Vec2, q: Vec2, space: Space) -> Result<f64> {
    match space {
        Space::Euclidean => Ok(norm(sub(p, q))),
        Space::Spherical => {
            let x = lift_point(p, space)?;
            let y = lift_point(q, space)?;
            let c = [x[1] * y[2] - x[2] * y[1], x[2] * y[0] - x[0] * y[2], x[0] * y[1] - x[1] * y[0]];
            let sin = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
            Ok(sin.atan2(x[0] * y[0] + x[1] * y[1] + x[2] * y[2]))
        }
        Space::Hyperbolic => {
            let x = lift_point(p, space)?;
            let y = lift_point(q, space)?;
            let d = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
            // B(X-Y, X-Y) = 4 sinh²(d/2)
            let b = ambient_form(d, d, space).max(0.0);
            Ok(2.0 * (b.sqrt() / 2.0).asinh())
        }
    }
}

/// Gradient, with respect to the natural-chart point `p`, of the geodesic
/// distance from `p` to `focus`.
pub fn geodesic_distance_gradient(p: Vec2, focus: Vec2, space: Space) -> Result<Vec2> {
    match space {
        Space::Euclidean => {
            let d = sub(p, focus);
            let r = norm(d);
            if r < 1e-300 {
                return Err(Error::Singular { what: "distance gradient at a focus", distance: r });
            }
            Ok([d[0] / r, d[1] / r])
        }
        _ => {
            let kappa = space.curvature();
            let x = lift_point(p, space)?;
            let f = lift_point(focus, space)?;
            let lam = conformal_factor(p, space);
            // c = κB(X, F) is cos d (sphere) or cosh d (hyperbolic)
            let c = kappa * ambient_form(x, f, space);
            let d = geodesic_distance(p, focus, space)?;
            let sn = if kappa > 0.0 { d.sin() } else { d.sinh() };
            if sn.abs() < 1e-300 {
                return Err(Error::Singular { what: "distance gradient at a focus", distance: d });
            }
            let r = lam.sqrt();
            let dc = |i: usize| kappa * f[i] / r - kappa * c * p[i] / lam;
            Ok([-kappa * dc(0) / sn, -kappa * dc(1) / sn])
        }
    }
}

/// Metric matrix of `space` at a natural-chart point.
pub fn chart_metric(q: Vec2, space: Space) -> [[f64; 2]; 2] {
    if !space.is_curved() {
        return [[1.0, 0.0], [0.0, 1.0]];
    }
    let kappa = space.curvature();
    let lam = conformal_factor(q, space);
    let l2 = lam * lam;
    // G = (λI - κqqᵀ)/λ²
    [
        [(lam - kappa * q[0] * q[0]) / l2, -kappa * q[0] * q[1] / l2],
        [-kappa * q[0] * q[1] / l2, (lam - kappa * q[1] * q[1]) / l2],
    ]
}

/// Inverse metric `G⁻¹ = λ(I + κqqᵀ)`.
pub fn chart_metric_inverse(q: Vec2, space: Space) -> [[f64; 2]; 2] {
    if !space.is_curved() {
        return [[1.0, 0.0], [0.0, 1.0]];
    }
    let kappa = space.curvature();
    let lam = conformal_factor(q, space);
    [
        [lam * (1.0 + kappa * q[0] * q[0]), lam * kappa * q[0] * q[1]],
        [lam * kappa * q[0] * q[1], lam * (1.0 + kappa * q[1] * q[1])],
    ]
}

pub(crate) fn mat_vec(m: &[[f64; 2]; 2], v: Vec2) -> Vec2 {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// `g_q(u, v)` at a natural-chart point.
pub fn metric_product(q: Vec2, u: Vec2, v: Vec2, space: Space) -> f64 {
    dot(u, mat_vec(&chart_metric(q, space), v))
}

/// Elastic reflection `v' = v - 2 g(v, n̂) n̂`, where `normal` is a covector
/// (e.g. the gradient of a wall function) and `n̂` the metric-unit vector dual
/// to it. Position and time are unchanged.
pub fn reflect_vector(state: &PhaseState, normal: Vec2, space: Space) -> Result<PhaseState> {
    if !(normal[0].is_finite() && normal[1].is_finite()) || (normal[0] == 0.0 && normal[1] == 0.0) {
        return Err(Error::ZeroNormal);
    }
    let ginv = chart_metric_inverse(state.q, space);
    let n = mat_vec(&ginv, normal);
    let nn = dot(normal, n);
    if !(nn > 0.0) {
        return Err(Error::ZeroNormal);
    }
    let c = 2.0 * dot(normal, state.v) / nn;
    Ok(PhaseState { q: state.q, v: [state.v[0] - c * n[0], state.v[1] - c * n[1]], t: state.t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scaled_norm_examples() {
        assert_eq!(scaled_norm([3.0, 4.0], 0.0), 5.0);
        assert_abs_diff_eq!(scaled_norm([0.0, 1.0], 1.0), 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(scaled_norm([1.0, 1.0], 3f64.sqrt()), 1.25f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn scaled_norm_is_euclidean_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let v = [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)];
            assert_eq!(scaled_norm(v, 0.0), v[0].hypot(v[1]));
        }
    }

    #[test]
    fn standardize_sends_centers_where_expected() {
        let a = 1.3;
        assert_eq!(standardize(0.0, a, 0.0, 0.0, a), (0.0, 0.0, 0.0, 0.0));
        let (x, y, _, _) = standardize(0.0, -1.0, 0.0, 0.0, 1.0);
        assert_eq!(x, 0.0);
        assert_abs_diff_eq!(y, -2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(standardize(0.3, -0.7, 1.1, 2.0, 0.0), (0.3, -0.7, 1.1, 2.0));
        let fr = Frame::spherical(a).unwrap();
        let c2 = fr.point_from_raw([0.0, -a]);
        assert_abs_diff_eq!(c2[1], fr.secondary_center()[1], epsilon = 1e-15);
        let hk = fr.point_from_raw([0.0, 0.0]);
        assert_abs_diff_eq!(hk[1], fr.hooke_center()[1], epsilon = 1e-15);
    }

    #[test]
    fn hyperbolic_frame_requires_a_below_one() {
        assert!(Frame::hyperbolic(1.0).is_err());
        assert!(Frame::hyperbolic(0.5).is_ok());
    }

    #[test]
    fn lift_examples() {
        let p = lift_to_surface(&PhaseState::default(), Space::Spherical).unwrap();
        assert_eq!(p.point, [0.0, 0.0, -1.0]);
        assert_eq!(p.velocity, [0.0, 0.0, 0.0]);
        let a = 0.8;
        let p = lift_to_surface(&PhaseState::new([0.0, a], [0.0, 0.0]), Space::Spherical).unwrap();
        let r = (1.0 + a * a).sqrt();
        assert_abs_diff_eq!(p.point[1], a / r, epsilon = 1e-15);
        assert_abs_diff_eq!(p.point[2], -1.0 / r, epsilon = 1e-15);
        let back = project_to_chart(
            &ChartJacobianPair { point: [0.0, a / r, -1.0 / r], velocity: [0.0; 3] },
            Space::Spherical,
        )
        .unwrap();
        assert_abs_diff_eq!(back.q[1], a, epsilon = 1e-15);
    }

    #[test]
    fn lift_project_round_trip_and_tangency() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for space in [Space::Spherical, Space::Hyperbolic] {
            for _ in 0..500 {
                let q = [rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6)];
                let v = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
                let s = PhaseState::new(q, v);
                let pair = lift_to_surface(&s, space).unwrap();
                let kappa = space.curvature();
                assert_abs_diff_eq!(ambient_form(pair.point, pair.point, space), kappa, epsilon = 1e-12);
                assert_abs_diff_eq!(ambient_form(pair.point, pair.velocity, space), 0.0, epsilon = 1e-12);
                let back = project_to_chart(&pair, space).unwrap();
                for i in 0..2 {
                    assert_abs_diff_eq!(back.q[i], q[i], epsilon = 1e-12);
                    assert_abs_diff_eq!(back.v[i], v[i], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn lift_velocity_matches_finite_difference() {
        let s = PhaseState::new([0.3, -0.2], [0.7, 0.4]);
        for space in [Space::Spherical, Space::Hyperbolic] {
            let pair = lift_to_surface(&s, space).unwrap();
            let eps = 1e-6;
            let xp = lift_point([s.q[0] + eps * s.v[0], s.q[1] + eps * s.v[1]], space).unwrap();
            let xm = lift_point([s.q[0] - eps * s.v[0], s.q[1] - eps * s.v[1]], space).unwrap();
            for i in 0..3 {
                assert_abs_diff_eq!((xp[i] - xm[i]) / (2.0 * eps), pair.velocity[i], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn chart_domain_guards() {
        assert!(lift_point([0.5, 0.5], Space::Hyperbolic).is_ok());
        assert!(matches!(lift_point([0.8, 0.8], Space::Hyperbolic), Err(Error::ChartDomain { .. })));
        assert!(matches!(lift_point([2e9, 0.0], Space::Spherical), Err(Error::ChartDomain { .. })));
        let equator = ChartJacobianPair { point: [1.0, 0.0, 0.0], velocity: [0.0; 3] };
        assert!(project_to_chart(&equator, Space::Spherical).is_err());
        assert!(lift_point([0.0, 0.0], Space::Euclidean).is_err());
    }

    #[test]
    fn reflection_examples() {
        let s = |v| PhaseState::new([0.0, 0.0], v);
        let e = Space::Euclidean;
        assert_eq!(reflect_vector(&s([1.0, 0.0]), [0.0, 1.0], e).unwrap().v, [1.0, 0.0]);
        assert_eq!(reflect_vector(&s([0.0, 1.0]), [0.0, 1.0], e).unwrap().v, [0.0, -1.0]);
        assert_eq!(reflect_vector(&s([1.0, 1.0]), [0.0, 1.0], e).unwrap().v, [1.0, -1.0]);
        assert_eq!(reflect_vector(&s([1.0, 1.0]), [0.0, 0.0], e), Err(Error::ZeroNormal));
    }

    #[test]
    fn reflection_is_an_isometric_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for space in [Space::Euclidean, Space::Spherical, Space::Hyperbolic] {
            for _ in 0..500 {
                let q = [rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6)];
                let v = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
                let n = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let s = PhaseState::new(q, v);
                let r = reflect_vector(&s, n, space).unwrap();
                let rr = reflect_vector(&r, n, space).unwrap();
                assert_abs_diff_eq!(rr.v[0], v[0], epsilon = 1e-13);
                assert_abs_diff_eq!(rr.v[1], v[1], epsilon = 1e-13);
                let k0 = metric_product(q, v, v, space);
                let k1 = metric_product(q, r.v, r.v, space);
                assert!((k0 - k1).abs() <= 1e-13 * (1.0 + k0));
            }
        }
    }

    #[test]
    fn distance_gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for space in [Space::Euclidean, Space::Spherical, Space::Hyperbolic] {
            for _ in 0..100 {
                let p = [rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6)];
                let f = [rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6)];
                let g = geodesic_distance_gradient(p, f, space).unwrap();
                let eps = 1e-6;
                for i in 0..2 {
                    let mut pp = p;
                    let mut pm = p;
                    pp[i] += eps;
                    pm[i] -= eps;
                    let fd = (geodesic_distance(pp, f, space).unwrap() - geodesic_distance(pm, f, space).unwrap())
                        / (2.0 * eps);
                    assert_abs_diff_eq!(fd, g[i], epsilon = 1e-7);
                }
            }
        }
    }

    #[test]
    fn spherical_distance_of_symmetric_centers() {
        // centers at (0, ±a): central angle 2·atan(a)
        let a = 0.7;
        let d = geodesic_distance([0.0, a], [0.0, -a], Space::Spherical).unwrap();
        assert_abs_diff_eq!(d, 2.0 * a.atan(), epsilon = 1e-14);
        let d = geodesic_distance([0.0, a], [0.0, -a], Space::Hyperbolic).unwrap();
        assert_abs_diff_eq!(d, 2.0 * a.atanh(), epsilon = 1e-14);
    }
}
