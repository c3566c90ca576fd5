//! Ball and half-space models of `H^{m+1}`, distances, geodesics, shadows
//! and horoballs.
//!
//! Both models are related by the spherical inversion in the point
//! `c = (-1, 0, ..., 0)`, `x ↦ c + 2 (x - c) / |x - c|^2`, which is its own
//! inverse. It sends the ball origin `ȷ` to `e₀ = (1, 0, ..., 0)`, the
//! boundary point `e` to `0` and `-e` to `∞`.

use serde::{Deserialize, Serialize};

use crate::vecops::{axpy, dist as edist, dot, norm, norm2, scale, sub};
use crate::{Error, Result};

/// Points closer than this to the ball boundary are rejected.
pub const BOUNDARY_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    Ball,
    HalfSpace,
}

/// Interior point of `H^{m+1}`. In the half-space model `coords[0]` is the
/// height `t` and `coords[1..]` the boundary coordinate `v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelPoint {
    model: Model,
    coords: Vec<f64>,
}

impl ModelPoint {
    pub fn new(model: Model, coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::DegeneratePoint(format!(
                "ambient dimension {} < 2",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::DegeneratePoint("non-finite coordinate".into()));
        }
        match model {
            Model::Ball => {
                let r = norm(&coords);
                if 1.0 - r <= BOUNDARY_EPS {
                    return Err(Error::DegeneratePoint(format!(
                        "ball point with |x| = {r} too close to the boundary"
                    )));
                }
            }
            Model::HalfSpace => {
                // Heights are kept relative: deep points (t ~ 1e-40) are
                // legitimate data for standard sequences.
                if !(coords[0] >= f64::MIN_POSITIVE) {
                    return Err(Error::DegeneratePoint(format!(
                        "half-space height {} not positive",
                        coords[0]
                    )));
                }
            }
        }
        Ok(Self { model, coords })
    }

    pub fn ball(coords: Vec<f64>) -> Result<Self> {
        Self::new(Model::Ball, coords)
    }

    pub fn half_space(t: f64, v: &[f64]) -> Result<Self> {
        let mut coords = Vec::with_capacity(v.len() + 1);
        coords.push(t);
        coords.extend_from_slice(v);
        Self::new(Model::HalfSpace, coords)
    }

    /// The distinguished point `ȷ`: ball origin, or `e₀` in the half-space.
    pub fn origin(model: Model, dim: usize) -> Self {
        let mut coords = vec![0.0; dim];
        if model == Model::HalfSpace {
            coords[0] = 1.0;
        }
        Self { model, coords }
    }

    pub fn model(&self) -> Model {
        self.model
    }

    /// Ambient dimension `m + 1`.
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Half-space height `t`. Panics in the ball model.
    pub fn height(&self) -> f64 {
        assert_eq!(self.model, Model::HalfSpace);
        self.coords[0]
    }

    /// Half-space boundary coordinate `v`. Panics in the ball model.
    pub fn base(&self) -> &[f64] {
        assert_eq!(self.model, Model::HalfSpace);
        &self.coords[1..]
    }

    pub fn to_model(&self, model: Model) -> Result<Self> {
        if self.model == model {
            return Ok(self.clone());
        }
        match self.model {
            Model::Ball => {
                let x = &self.coords;
                let d = (x[0] + 1.0).powi(2) + norm2(&x[1..]);
                let mut out = Vec::with_capacity(x.len());
                out.push((1.0 - norm2(x)) / d);
                out.extend(x[1..].iter().map(|c| 2.0 * c / d));
                Self::new(Model::HalfSpace, out)
            }
            Model::HalfSpace => {
                let t = self.coords[0];
                let v = &self.coords[1..];
                let v2 = norm2(v);
                let d = (t + 1.0).powi(2) + v2;
                let mut out = Vec::with_capacity(self.coords.len());
                out.push((1.0 - t * t - v2) / d);
                out.extend(v.iter().map(|c| 2.0 * c / d));
                Self::new(Model::Ball, out)
            }
        }
    }

    pub fn to_ball(&self) -> Result<Self> {
        self.to_model(Model::Ball)
    }

    pub fn to_half_space(&self) -> Result<Self> {
        self.to_model(Model::HalfSpace)
    }

    /// Hyperboloid lift `((1+|x|²), 2x) / (1-|x|²)` of the ball image.
    pub fn hyperboloid(&self) -> Result<Vec<f64>> {
        let b = self.to_ball()?;
        Ok(ball_to_hyperboloid(&b.coords))
    }
}

pub(crate) fn ball_to_hyperboloid(x: &[f64]) -> Vec<f64> {
    let r2 = norm2(x);
    let den = 1.0 - r2;
    let mut out = Vec::with_capacity(x.len() + 1);
    out.push((1.0 + r2) / den);
    out.extend(x.iter().map(|c| 2.0 * c / den));
    out
}

/// Boundary point. `Sphere` holds a unit vector (ball model), `Plane` a
/// finite half-space boundary coordinate, `Infinity` the point at infinity
/// of the half-space model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum IdealPoint {
    Sphere(Vec<f64>),
    Plane(Vec<f64>),
    Infinity { dim: usize },
}

impl IdealPoint {
    /// Unit vector; inputs within 1e-9 of the sphere are renormalized.
    pub fn sphere(coords: Vec<f64>) -> Result<Self> {
        let r = norm(&coords);
        if coords.len() < 2 || (r - 1.0).abs() > 1e-9 {
            return Err(Error::DegeneratePoint(format!(
                "ideal point with |x| = {r} is not on the unit sphere"
            )));
        }
        Ok(IdealPoint::Sphere(scale(&coords, 1.0 / r)))
    }

    pub fn plane(v: Vec<f64>) -> Self {
        IdealPoint::Plane(v)
    }

    pub fn infinity(dim: usize) -> Self {
        IdealPoint::Infinity { dim }
    }

    /// Unit vector at angle `theta` on `S¹`.
    pub fn angle(theta: f64) -> Self {
        IdealPoint::Sphere(vec![theta.cos(), theta.sin()])
    }

    pub fn model(&self) -> Model {
        match self {
            IdealPoint::Sphere(_) => Model::Ball,
            _ => Model::HalfSpace,
        }
    }

    /// Ambient dimension `m + 1` of the space whose boundary holds the point.
    pub fn dim(&self) -> usize {
        match self {
            IdealPoint::Sphere(c) => c.len(),
            IdealPoint::Plane(v) => v.len() + 1,
            IdealPoint::Infinity { dim } => *dim,
        }
    }

    pub fn to_model(&self, model: Model) -> Self {
        match (self, model) {
            (IdealPoint::Sphere(y), Model::HalfSpace) => {
                let d = (y[0] + 1.0).powi(2) + norm2(&y[1..]);
                if d < 1e-300 {
                    IdealPoint::Infinity { dim: y.len() }
                } else {
                    IdealPoint::Plane(y[1..].iter().map(|c| 2.0 * c / d).collect())
                }
            }
            (IdealPoint::Plane(v), Model::Ball) => {
                let v2 = norm2(v);
                let d = 1.0 + v2;
                let mut out = Vec::with_capacity(v.len() + 1);
                out.push((1.0 - v2) / d);
                out.extend(v.iter().map(|c| 2.0 * c / d));
                IdealPoint::Sphere(out)
            }
            (IdealPoint::Infinity { dim }, Model::Ball) => {
                let mut out = vec![0.0; *dim];
                out[0] = -1.0;
                IdealPoint::Sphere(out)
            }
            _ => self.clone(),
        }
    }

    /// Unit vector of the ball-model image.
    pub fn unit(&self) -> Vec<f64> {
        match self.to_model(Model::Ball) {
            IdealPoint::Sphere(c) => c,
            _ => unreachable!(),
        }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, IdealPoint::Infinity { .. })
    }
}

/// Conversion between the two models.
pub trait ConvertModel {
    type Output;
    fn convert_model(&self) -> Self::Output;
}

impl ConvertModel for ModelPoint {
    type Output = Result<ModelPoint>;
    fn convert_model(&self) -> Result<ModelPoint> {
        match self.model {
            Model::Ball => self.to_model(Model::HalfSpace),
            Model::HalfSpace => self.to_model(Model::Ball),
        }
    }
}

impl ConvertModel for IdealPoint {
    type Output = IdealPoint;
    fn convert_model(&self) -> IdealPoint {
        match self.model() {
            Model::Ball => self.to_model(Model::HalfSpace),
            Model::HalfSpace => self.to_model(Model::Ball),
        }
    }
}

/// Model-agnostic conversion entry point.
pub fn convert_model<P: ConvertModel>(p: &P) -> P::Output {
    p.convert_model()
}

fn check_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            got: b,
        });
    }
    Ok(())
}

fn ball_dist(p: &[f64], q: &[f64]) -> f64 {
    let den = ((1.0 - norm2(p)) * (1.0 - norm2(q))).sqrt();
    2.0 * (edist(p, q) / den).asinh()
}

fn half_dist(p: &[f64], q: &[f64]) -> f64 {
    2.0 * (edist(p, q) / (2.0 * (p[0] * q[0]).sqrt())).asinh()
}

/// Hyperbolic distance. The second point is converted to the model of the
/// first when they differ.
pub fn dist(p: &ModelPoint, q: &ModelPoint) -> f64 {
    assert_eq!(p.dim(), q.dim(), "dist: dimension mismatch");
    if p.model != q.model {
        match q.to_model(p.model) {
            Ok(q2) => return dist(p, &q2),
            Err(_) => {
                let p2 = p.to_model(q.model).expect("dist: unconvertible points");
                return dist(&p2, q);
            }
        }
    }
    match p.model {
        Model::Ball => ball_dist(&p.coords, &q.coords),
        Model::HalfSpace => half_dist(&p.coords, &q.coords),
    }
}

/// Distance from `ȷ`, evaluated natively in the model of `p`.
pub fn dist_from_origin(p: &ModelPoint) -> f64 {
    match p.model {
        Model::Ball => {
            let r = norm(&p.coords);
            2.0 * r.atanh()
        }
        Model::HalfSpace => {
            let t = p.coords[0];
            let d2 = (t - 1.0).powi(2) + norm2(&p.coords[1..]);
            2.0 * (d2.sqrt() / (2.0 * t.sqrt())).asinh()
        }
    }
}

/// Euclidean distance between ball-model images of boundary points.
pub fn chordal(x: &IdealPoint, y: &IdealPoint) -> f64 {
    assert_eq!(x.dim(), y.dim(), "chordal: dimension mismatch");
    edist(&x.unit(), &y.unit())
}

/// Geodesic: a full line between ideal points, a ray from an interior point
/// to an ideal point, or a segment. Ideal endpoints are not included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Geodesic {
    Line(IdealPoint, IdealPoint),
    Ray(ModelPoint, IdealPoint),
    Segment(ModelPoint, ModelPoint),
}

impl Geodesic {
    pub fn line(x: IdealPoint, y: IdealPoint) -> Result<Self> {
        check_dim(x.dim(), y.dim())?;
        if chordal(&x, &y) <= 1e-12 {
            return Err(Error::DegenerateGeodesic);
        }
        Ok(Geodesic::Line(x, y))
    }

    pub fn ray(p: ModelPoint, x: IdealPoint) -> Result<Self> {
        check_dim(p.dim(), x.dim())?;
        Ok(Geodesic::Ray(p, x))
    }

    pub fn segment(p: ModelPoint, q: ModelPoint) -> Result<Self> {
        check_dim(p.dim(), q.dim())?;
        if dist(&p, &q) <= 1e-12 {
            return Err(Error::DegenerateGeodesic);
        }
        Ok(Geodesic::Segment(p, q))
    }

    /// The ray `[ȷ, x)` in the model of `x`.
    pub fn from_origin(x: IdealPoint) -> Self {
        let model = x.model();
        Geodesic::Ray(ModelPoint::origin(model, x.dim()), x)
    }

    pub fn dim(&self) -> usize {
        match self {
            Geodesic::Line(x, _) => x.dim(),
            Geodesic::Ray(p, _) => p.dim(),
            Geodesic::Segment(p, _) => p.dim(),
        }
    }

    /// Arclength parametrization `s ↦ cosh s · P + sinh s · U` on the
    /// hyperboloid, with the admissible parameter range.
    fn parametrize(&self) -> Result<(Vec<f64>, Vec<f64>, f64, f64)> {
        match self {
            Geodesic::Line(x, y) => {
                let xu = x.unit();
                let yu = y.unit();
                let nx = null_vector(&xu);
                let ny = null_vector(&yu);
                let k = (2.0 * (1.0 - dot(&xu, &yu))).sqrt();
                let p: Vec<f64> = nx.iter().zip(&ny).map(|(a, b)| (a + b) / k).collect();
                let u: Vec<f64> = nx.iter().zip(&ny).map(|(a, b)| (a - b) / k).collect();
                Ok((p, u, f64::NEG_INFINITY, f64::INFINITY))
            }
            Geodesic::Ray(p, x) => {
                let pp = p.hyperboloid()?;
                let nx = null_vector(&x.unit());
                let k = -crate::vecops::mink(&pp, &nx);
                let u: Vec<f64> = nx.iter().zip(&pp).map(|(n, q)| n / k - q).collect();
                Ok((pp, u, 0.0, f64::INFINITY))
            }
            Geodesic::Segment(p, q) => {
                let pp = p.hyperboloid()?;
                let qq = q.hyperboloid()?;
                let d = dist(p, q);
                let (c, s) = (d.cosh(), d.sinh());
                let u: Vec<f64> = qq.iter().zip(&pp).map(|(a, b)| (a - c * b) / s).collect();
                Ok((pp, u, 0.0, d))
            }
        }
    }
}

fn null_vector(unit: &[f64]) -> Vec<f64> {
    let mut n = Vec::with_capacity(unit.len() + 1);
    n.push(1.0);
    n.extend_from_slice(unit);
    n
}

/// Ball distance from `x` to the hyperboloid point `cosh s P + sinh s U`,
/// using `1 - |y|² = 2 / (1 + Y₀)` for the projected point.
fn dist_to_param(x: &[f64], one_minus_x2: f64, p: &[f64], u: &[f64], s: f64) -> f64 {
    let (c, sh) = (s.cosh(), s.sinh());
    let y0 = c * p[0] + sh * u[0];
    let mut d2 = 0.0;
    for i in 0..x.len() {
        let yi = (c * p[i + 1] + sh * u[i + 1]) / (1.0 + y0);
        d2 += (x[i] - yi).powi(2);
    }
    let den = (one_minus_x2 * 2.0 / (1.0 + y0)).sqrt();
    2.0 * (d2.sqrt() / den).asinh()
}

const GOLDEN_TOL: f64 = 1e-11;
const S_CAP: f64 = 600.0;

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > GOLDEN_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    f(a).min(f(b)).min(f(0.5 * (a + b)))
}

/// Expand from `start` in direction `sign` until `f` stops decreasing;
/// returns the far end of a bracket.
fn expand<F: Fn(f64) -> f64>(f: &F, start: f64, sign: f64, limit: f64) -> f64 {
    let mut step = 1.0;
    let mut prev = f(start);
    loop {
        let s = start + sign * step;
        if sign * (s - limit) >= 0.0 {
            return limit;
        }
        let v = f(s);
        if v >= prev {
            return s;
        }
        prev = v;
        step *= 2.0;
    }
}

/// Infimum of `dist(p, ·)` over the geodesic, by golden-section search on
/// the arclength parameter (tolerance 1e-11 in `s`).
pub fn dist_to_geodesic(p: &ModelPoint, g: &Geodesic) -> f64 {
    assert_eq!(p.dim(), g.dim(), "dist_to_geodesic: dimension mismatch");
    let x = p.to_ball().expect("dist_to_geodesic: point not representable in the ball");
    let x = x.coords();
    let omx2 = 1.0 - norm2(x);
    let (pp, u, smin, smax) = g.parametrize().expect("dist_to_geodesic: degenerate geodesic");
    let f = |s: f64| dist_to_param(x, omx2, &pp, &u, s);
    let lo_lim = smin.max(-S_CAP);
    let hi_lim = smax.min(S_CAP);
    let start = 0.0f64.clamp(lo_lim, hi_lim);
    let hi = expand(&f, start, 1.0, hi_lim);
    let lo = expand(&f, start, -1.0, lo_lim);
    golden_min(f, lo, hi)
}

/// Closed-form distance from `w` to the ray `[ȷ, x)`, evaluated natively in
/// the model of `w` so that deep half-space points keep full precision.
pub fn dist_to_origin_ray(w: &ModelPoint, x: &IdealPoint) -> f64 {
    RayTarget::new(x).dist(w)
}

/// The ray `[ȷ, x)` with the per-endpoint quantities of the closed-form
/// distance precomputed for both models.
#[derive(Clone, Debug)]
pub struct RayTarget {
    unit: Vec<f64>,
    half: HalfEnd,
}

#[derive(Clone, Debug)]
enum HalfEnd {
    Infinity,
    Zero,
    // a, its antipode b = -a/|a|², |a - b|, and (1+|b|²)/(1+|a|²)
    Plane { a: Vec<f64>, b: Vec<f64>, ab: f64, ratio_origin: f64 },
}

impl RayTarget {
    pub fn new(x: &IdealPoint) -> Self {
        let half = match x.to_model(Model::HalfSpace) {
            IdealPoint::Infinity { .. } => HalfEnd::Infinity,
            IdealPoint::Plane(a) => {
                let a2 = norm2(&a);
                if a2 == 0.0 {
                    HalfEnd::Zero
                } else {
                    let b = scale(&a, -1.0 / a2);
                    let ab = edist(&a, &b);
                    let ratio_origin = (1.0 + norm2(&b)) / (1.0 + a2);
                    HalfEnd::Plane { a, b, ab, ratio_origin }
                }
            }
            IdealPoint::Sphere(_) => unreachable!(),
        };
        Self { unit: x.unit(), half }
    }

    pub fn unit(&self) -> &[f64] {
        &self.unit
    }

    /// Cheap test that `ρ(w, ray) ≥ ρ(w, full line) ≥ cap`, given
    /// `cosh2_cap = cosh²(cap)`. `false` means undecided. Only half-space
    /// points at moderate heights toward a finite nonzero endpoint are
    /// screened.
    pub fn surely_beyond(&self, w: &ModelPoint, cosh2_cap: f64) -> bool {
        let HalfEnd::Plane { a, b, ab, .. } = &self.half else { return false };
        if w.model != Model::HalfSpace {
            return false;
        }
        let t = w.coords[0];
        if !(t > 1e-100 && t < 1e100) {
            return false;
        }
        let v = &w.coords[1..];
        let t2 = t * t;
        let mut da = 0.0;
        let mut db = 0.0;
        for ((x, p), q) in v.iter().zip(a).zip(b) {
            da += (x - p) * (x - p);
            db += (x - q) * (x - q);
        }
        // the product form of cosh ρ to the line, squared; slack covers rounding
        (t2 + da) * (t2 + db) > cosh2_cap * t2 * ab * ab * (1.0 + 1e-9)
    }

    pub fn dist(&self, w: &ModelPoint) -> f64 {
        match w.model {
            Model::Ball => {
                let wc = &w.coords;
                let along = dot(wc, &self.unit);
                if along <= 0.0 {
                    return dist_from_origin(w);
                }
                let perp = axpy(wc, -along, &self.unit);
                let sh = 2.0 * norm(&perp) / (1.0 - norm2(wc));
                sh.asinh()
            }
            Model::HalfSpace => {
                let t = w.coords[0];
                let v = &w.coords[1..];
                match &self.half {
                    HalfEnd::Infinity => {
                        if t.hypot(norm(v)) >= 1.0 {
                            (norm(v) / t).asinh()
                        } else {
                            dist_from_origin(w)
                        }
                    }
                    HalfEnd::Zero => {
                        if t.hypot(norm(v)) <= 1.0 {
                            (norm(v) / t).asinh()
                        } else {
                            dist_from_origin(w)
                        }
                    }
                    HalfEnd::Plane { a, b, ab, ratio_origin } => {
                        let ha = t.hypot(edist(v, a));
                        let hb = t.hypot(edist(v, b));
                        if (hb / ha).powi(2) < *ratio_origin {
                            return dist_from_origin(w);
                        }
                        let c = (ha / t) * (hb / ab);
                        c.max(1.0).acosh()
                    }
                }
            }
        }
    }
}

/// `sinh ρ(w, δ_x) = |v - x| / t` for the vertical geodesic over `x`.
pub fn dist_to_vertical(w: &ModelPoint, x: &[f64]) -> f64 {
    let w = w.to_half_space().expect("dist_to_vertical: point not representable");
    (edist(w.base(), x) / w.height()).asinh()
}

/// Closed-form distance from `p` to the full line with ideal endpoints
/// `a`, `b`: `cosh ρ = 2|x-a||x-b| / ((1-|x|²)|a-b|)` in the ball.
pub fn dist_to_line_closed_form(p: &ModelPoint, a: &IdealPoint, b: &IdealPoint) -> f64 {
    let x = p.to_ball().expect("dist_to_line_closed_form: point not representable");
    let x = x.coords();
    let (au, bu) = (a.unit(), b.unit());
    let c = 2.0 * edist(x, &au) * edist(x, &bu) / ((1.0 - norm2(x)) * edist(&au, &bu));
    c.max(1.0).acosh()
}

/// `(|x - y|, 2 / cosh ρ(ȷ, γ_{xy}))`, the two sides of the chord identity.
pub fn key_chord_identity(x: &IdealPoint, y: &IdealPoint) -> Result<(f64, f64)> {
    let g = Geodesic::line(x.clone(), y.clone())?;
    let origin = ModelPoint::origin(Model::Ball, x.dim());
    let rho = dist_to_geodesic(&origin, &g);
    Ok((chordal(x, y), 2.0 / rho.cosh()))
}

/// Half-angle `θ` of the cone of radius `α` about a geodesic from the
/// origin: `cos θ cosh α = 1`.
pub fn cone_angle(alpha: f64) -> f64 {
    assert!(alpha > 0.0, "cone_angle: alpha must be positive");
    (1.0 / alpha.cosh()).acos()
}

/// `Shad_∞^α(w)` for half-space `w = (t, v)`: the ball `B(v, t sinh α)`.
pub fn shadow_ball_infinity(w: &ModelPoint, alpha: f64) -> (Vec<f64>, f64) {
    let w = w.to_half_space().expect("shadow_ball_infinity: point not representable");
    (w.base().to_vec(), w.height() * alpha.sinh())
}

/// Viewpoint of a shadow: an interior point or an ideal point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Viewpoint {
    Interior(ModelPoint),
    Ideal(IdealPoint),
}

/// `x ∈ Shad_v^α(w)`, i.e. `ρ(w, [v, x]) < α`.
pub fn shadow_contains(x: &IdealPoint, v: &Viewpoint, alpha: f64, w: &ModelPoint) -> Result<bool> {
    let g = match v {
        Viewpoint::Interior(p) => Geodesic::ray(p.clone(), x.clone())?,
        Viewpoint::Ideal(u) => Geodesic::line(u.clone(), x.clone())?,
    };
    Ok(dist_to_geodesic(w, &g) < alpha)
}

/// Horoball based at `base`. For the base `∞` the parameter is the height
/// `c` (region `t > c`); otherwise it is the Euclidean radius of the
/// internally tangent ball in the model of the base.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Horoball {
    base: IdealPoint,
    parameter: f64,
}

impl Horoball {
    pub fn new(base: IdealPoint, parameter: f64) -> Result<Self> {
        if !(parameter > 0.0) || !parameter.is_finite() {
            return Err(Error::InvalidInput(format!(
                "horoball parameter {parameter} must be positive"
            )));
        }
        if matches!(base, IdealPoint::Sphere(_)) && parameter >= 1.0 {
            return Err(Error::InvalidInput(
                "ball-model horoball radius must be below 1".into(),
            ));
        }
        Ok(Self { base, parameter })
    }

    pub fn base(&self) -> &IdealPoint {
        &self.base
    }

    pub fn parameter(&self) -> f64 {
        self.parameter
    }

    pub fn contains(&self, p: &ModelPoint) -> bool {
        horoball_contains(self, p)
    }
}

pub fn horoball_contains(h: &Horoball, p: &ModelPoint) -> bool {
    let r = h.parameter;
    match &h.base {
        IdealPoint::Infinity { .. } => {
            let q = p.to_half_space().expect("horoball_contains: point not representable");
            q.height() > r
        }
        IdealPoint::Plane(b) => {
            let q = p.to_half_space().expect("horoball_contains: point not representable");
            let t = q.height();
            ((t - r).powi(2) + norm2(&sub(q.base(), b))).sqrt() < r
        }
        IdealPoint::Sphere(b) => {
            let q = p.to_ball().expect("horoball_contains: point not representable");
            let center = scale(b, 1.0 - r);
            edist(q.coords(), &center) < r
        }
    }
}
