//! Möbius transformations of the boundary sphere, acting on the closed ball
//! by Poincaré extension.
//!
//! An [`Isometry`] is a word of primitive generators stored in application
//! order: the first primitive acts first. Composition concatenates words and
//! equality is only ever tested by action on probe points.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{IdealPoint, Model, ModelPoint};
use crate::sampling::{random_unit, seeded};
use crate::vecops::{axpy, dist as edist, dot, norm, norm2, normalized, scale, sub};
use crate::{Error, Result};

/// Words longer than this are refit to a 2×2 matrix in dimensions 2 and 3.
pub const COMPACTION_THRESHOLD: usize = 10_000;
/// Matrix products are rescaled to unit determinant this often.
pub const RENORMALIZE_EVERY: usize = 32;

/// A point of `C ∪ {∞}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ExtComplex {
    Finite(Complex64),
    Infinity,
}

impl ExtComplex {
    pub fn real(x: f64) -> Self {
        ExtComplex::Finite(Complex64::new(x, 0.0))
    }

    /// Chordal distance on the Riemann sphere of diameter 2.
    pub fn chordal(&self, other: &ExtComplex) -> f64 {
        match (self, other) {
            (ExtComplex::Infinity, ExtComplex::Infinity) => 0.0,
            (ExtComplex::Finite(z), ExtComplex::Infinity) | (ExtComplex::Infinity, ExtComplex::Finite(z)) => {
                2.0 / (1.0 + z.norm_sqr()).sqrt()
            }
            (ExtComplex::Finite(z), ExtComplex::Finite(w)) => {
                2.0 * (z - w).norm() / ((1.0 + z.norm_sqr()) * (1.0 + w.norm_sqr())).sqrt()
            }
        }
    }

    pub fn to_ideal(&self, dim: usize) -> IdealPoint {
        match self {
            ExtComplex::Infinity => IdealPoint::infinity(dim),
            ExtComplex::Finite(z) => {
                if dim == 2 {
                    IdealPoint::plane(vec![z.re])
                } else {
                    IdealPoint::plane(vec![z.re, z.im])
                }
            }
        }
    }

    pub fn from_ideal(p: &IdealPoint) -> Self {
        match p.to_model(Model::HalfSpace) {
            IdealPoint::Infinity { .. } => ExtComplex::Infinity,
            IdealPoint::Plane(v) => ExtComplex::Finite(Complex64::new(v[0], v.get(1).copied().unwrap_or(0.0))),
            IdealPoint::Sphere(_) => unreachable!(),
        }
    }
}

/// `z ↦ (az + b)/(cz + d)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix2 {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Matrix2 {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        let m = Matrix2 { a, b, c, d };
        if m.det().norm() < 1e-300 {
            return Err(Error::InvalidInput("singular 2x2 matrix".into()));
        }
        Ok(m.normalized())
    }

    pub fn real(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let r = |x: f64| Complex64::new(x, 0.0);
        Self::new(r(a), r(b), r(c), r(d))
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Matrix2 { a: one, b: zero, c: zero, d: one }
    }

    pub fn det(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    /// Matrix product without renormalization.
    pub fn mul(&self, o: &Matrix2) -> Matrix2 {
        Matrix2 {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    /// Rescaled by `1/√det`.
    pub fn normalized(&self) -> Matrix2 {
        let s = self.det().sqrt().inv();
        Matrix2 { a: self.a * s, b: self.b * s, c: self.c * s, d: self.d * s }
    }

    pub fn inverse(&self) -> Matrix2 {
        Matrix2 { a: self.d, b: -self.b, c: -self.c, d: self.a }.normalized()
    }

    pub fn is_real(&self) -> bool {
        [self.a, self.b, self.c, self.d].iter().all(|z| z.im.abs() <= 1e-12 * (1.0 + z.re.abs()))
    }

    pub fn apply_boundary(&self, z: ExtComplex) -> ExtComplex {
        match z {
            ExtComplex::Infinity => {
                if self.c.norm() == 0.0 {
                    ExtComplex::Infinity
                } else {
                    ExtComplex::Finite(self.a / self.c)
                }
            }
            ExtComplex::Finite(z) => {
                let den = self.c * z + self.d;
                if den.norm() == 0.0 {
                    ExtComplex::Infinity
                } else {
                    ExtComplex::Finite((self.a * z + self.b) / den)
                }
            }
        }
    }
}

/// Running matrix product renormalized every [`RENORMALIZE_EVERY`] factors.
#[derive(Clone, Debug)]
pub struct MatrixProduct {
    value: Matrix2,
    since: usize,
}

impl Default for MatrixProduct {
    fn default() -> Self {
        Self { value: Matrix2::identity(), since: 0 }
    }
}

impl MatrixProduct {
    pub fn push(&mut self, m: &Matrix2) {
        self.value = self.value.mul(m);
        self.since += 1;
        if self.since >= RENORMALIZE_EVERY {
            self.value = self.value.normalized();
            self.since = 0;
        }
    }

    pub fn value(&self) -> Matrix2 {
        self.value.normalized()
    }
}

/// Action of `M ∈ PSL(2, C)` on the half-space `H³` (or `PSL(2, R)` on
/// `H²`): with `D = |cz+d|² + |c|² t²`, `z' = ((az+b)·conj(cz+d) + a·conj(c)·t²)/D`
/// and `t' = t/D`.
pub fn psl2_apply(m: &Matrix2, p: &ModelPoint) -> Result<ModelPoint> {
    let h = p.to_half_space()?;
    let dim = h.dim();
    if !(2..=3).contains(&dim) {
        return Err(Error::InvalidInput(format!("psl2_apply needs dimension 2 or 3, got {dim}")));
    }
    let c = h.coords();
    let (t, v) = psl2_raw(m, c[0], &c[1..]);
    let out = ModelPoint::half_space(t, &v[..dim - 1])?;
    if p.model() == Model::Ball {
        out.to_ball()
    } else {
        Ok(out)
    }
}

fn psl2_raw(m: &Matrix2, t: f64, v: &[f64]) -> (f64, [f64; 2]) {
    let z = Complex64::new(v[0], v.get(1).copied().unwrap_or(0.0));
    let w = m.c * z + m.d;
    let den = w.norm_sqr() + m.c.norm_sqr() * t * t;
    let zp = ((m.a * z + m.b) * w.conj() + m.a * m.c.conj() * (t * t)) / den;
    (t / den, [zp.re, zp.im])
}

fn ball_to_half_raw(x: &[f64]) -> (f64, Vec<f64>) {
    let d = (x[0] + 1.0).powi(2) + norm2(&x[1..]);
    ((1.0 - norm2(x)) / d, x[1..].iter().map(|c| 2.0 * c / d).collect())
}

fn half_to_ball_raw(t: f64, v: &[f64]) -> Vec<f64> {
    let v2 = norm2(v);
    let d = (t + 1.0).powi(2) + v2;
    let mut out = Vec::with_capacity(v.len() + 1);
    out.push((1.0 - t * t - v2) / d);
    out.extend(v.iter().map(|c| 2.0 * c / d));
    out
}

/// Primitive generators, all acting on the closed unit ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Primitive {
    /// `x ↦ x - 2 (x·u) u`.
    HyperplaneReflection { normal: Vec<f64> },
    /// Inversion in the sphere `|x - c| = r` orthogonal to the unit sphere.
    SphereInversion { center: Vec<f64>, radius: f64 },
    /// `x ↦ R x`, rows of `R`.
    OrthogonalMap { rows: Vec<Vec<f64>> },
    /// Möbius translation sending `a` to the origin.
    BallTransvection { point: Vec<f64> },
    /// Boundary action on `R_∞` or `C_∞` through the half-space model.
    Matrix2 { matrix: Matrix2 },
}

impl Primitive {
    fn parity(&self) -> i32 {
        match self {
            Primitive::HyperplaneReflection { .. } | Primitive::SphereInversion { .. } => -1,
            Primitive::OrthogonalMap { rows } => {
                if orthogonal_det(rows) < 0.0 {
                    -1
                } else {
                    1
                }
            }
            Primitive::BallTransvection { .. } | Primitive::Matrix2 { .. } => 1,
        }
    }

    fn inverse(&self) -> Primitive {
        match self {
            Primitive::OrthogonalMap { rows } => {
                let n = rows.len();
                let t = (0..n).map(|i| (0..n).map(|j| rows[j][i]).collect()).collect();
                Primitive::OrthogonalMap { rows: t }
            }
            Primitive::BallTransvection { point } => Primitive::BallTransvection { point: scale(point, -1.0) },
            Primitive::Matrix2 { matrix } => Primitive::Matrix2 { matrix: matrix.inverse() },
            other => other.clone(),
        }
    }

    fn apply(&self, x: &[f64], boundary: bool) -> Vec<f64> {
        match self {
            Primitive::HyperplaneReflection { normal } => axpy(x, -2.0 * dot(x, normal), normal),
            Primitive::SphereInversion { center, radius } => {
                let d = sub(x, center);
                let s = radius * radius / norm2(&d);
                axpy(center, s, &d)
            }
            Primitive::OrthogonalMap { rows } => rows.iter().map(|r| dot(r, x)).collect(),
            Primitive::BallTransvection { point: a } => transvect(a, x),
            Primitive::Matrix2 { matrix } => {
                if boundary {
                    let dim = x.len();
                    let z = ExtComplex::from_ideal(&IdealPoint::Sphere(x.to_vec()));
                    matrix.apply_boundary(z).to_ideal(dim).unit()
                } else {
                    let (t, v) = ball_to_half_raw(x);
                    let (t2, v2) = psl2_raw(matrix, t, &v);
                    half_to_ball_raw(t2, &v2[..x.len() - 1])
                }
            }
        }
    }
}

/// `T_a(x) = ((1-|a|²)(x-a) - |x-a|² a) / (1 - 2⟨a,x⟩ + |a|²|x|²)`.
///
/// The denominator is evaluated as `|x-a|² + (1-|x|²)(1-|a|²)`, which does
/// not cancel when `a` and `x` are both near the same boundary point.
fn transvect(a: &[f64], x: &[f64]) -> Vec<f64> {
    let a2 = norm2(a);
    let xa = sub(x, a);
    let k = norm2(&xa);
    let den = k + (1.0 - norm2(x)) * (1.0 - a2);
    xa.iter().zip(a).map(|(d, ai)| ((1.0 - a2) * d - k * ai) / den).collect()
}

fn orthogonal_det(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i][j]).determinant()
}

/// Isometry of `B^{dim}` as a word of primitives (application order).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Isometry {
    dim: usize,
    word: Vec<Primitive>,
}

impl Isometry {
    pub fn identity(dim: usize) -> Self {
        Self { dim, word: Vec::new() }
    }

    pub fn from_word(dim: usize, word: Vec<Primitive>) -> Result<Self> {
        for p in &word {
            validate_primitive(dim, p)?;
        }
        Ok(Self { dim, word })
    }

    pub fn reflection(normal: Vec<f64>) -> Result<Self> {
        let dim = normal.len();
        let n = norm(&normal);
        if n < 1e-12 {
            return Err(Error::InvalidInput("zero reflection normal".into()));
        }
        Ok(Self { dim, word: vec![Primitive::HyperplaneReflection { normal: scale(&normal, 1.0 / n) }] })
    }

    pub fn inversion(center: Vec<f64>, radius: f64) -> Result<Self> {
        let dim = center.len();
        Self::from_word(dim, vec![Primitive::SphereInversion { center, radius }])
    }

    pub fn orthogonal(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        Self::from_word(dim, vec![Primitive::OrthogonalMap { rows }])
    }

    /// The transvection `T_a` with `T_a(a) = 0`.
    pub fn transvection(a: Vec<f64>) -> Result<Self> {
        let dim = a.len();
        Self::from_word(dim, vec![Primitive::BallTransvection { point: a }])
    }

    pub fn matrix2(dim: usize, m: Matrix2) -> Result<Self> {
        Self::from_word(dim, vec![Primitive::Matrix2 { matrix: m }])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn word(&self) -> &[Primitive] {
        &self.word
    }

    /// Product of primitive parities.
    pub fn orientation(&self) -> i32 {
        self.word.iter().map(Primitive::parity).product()
    }

    /// Apply to ball coordinates; `boundary` selects the boundary action
    /// for the matrix primitive.
    pub fn apply_ball(&self, x: &[f64], boundary: bool) -> Vec<f64> {
        let mut cur = x.to_vec();
        for p in &self.word {
            cur = p.apply(&cur, boundary);
        }
        cur
    }

    pub fn apply_point(&self, p: &ModelPoint) -> Result<ModelPoint> {
        self.check(p.dim())?;
        let b = p.to_ball()?;
        let img = ModelPoint::ball(self.apply_ball(b.coords(), false))?;
        img.to_model(p.model())
    }

    pub fn apply_ideal(&self, x: &IdealPoint) -> IdealPoint {
        assert_eq!(x.dim(), self.dim, "apply_ideal: dimension mismatch");
        let y = normalized(&self.apply_ball(&x.unit(), true));
        IdealPoint::Sphere(y).to_model(x.model())
    }

    fn check(&self, d: usize) -> Result<()> {
        if d != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: d });
        }
        Ok(())
    }

    /// Agreement with `other` on the fixed probe set.
    pub fn approx_eq(&self, other: &Isometry, tol: f64) -> bool {
        probe_points(self.dim).iter().all(|x| {
            edist(&self.apply_ball(x, false), &other.apply_ball(x, false)) <= tol
        })
    }

    /// Refit a long word in dimension 2 or 3 to at most two primitives
    /// (a reflection and a matrix). Returns `self` unchanged when the fit
    /// is not accurate to 1e-9 on the probe set.
    pub fn compacted(&self) -> Isometry {
        if !(2..=3).contains(&self.dim) || self.word.len() <= 2 {
            return self.clone();
        }
        let flip = self.orientation() < 0;
        let mut prefix = Vec::new();
        let mut target = self.clone();
        if flip {
            let mut e1 = vec![0.0; self.dim];
            e1[1] = 1.0;
            prefix.push(Primitive::HyperplaneReflection { normal: e1 });
            target.word.splice(0..0, prefix.iter().cloned());
        }
        let Some(m) = fit_matrix(&target) else {
            return self.clone();
        };
        let mut word = prefix;
        word.push(Primitive::Matrix2 { matrix: m });
        let fitted = Isometry { dim: self.dim, word };
        if fitted.approx_eq(self, 1e-9) {
            fitted
        } else {
            self.clone()
        }
    }
}

fn validate_primitive(dim: usize, p: &Primitive) -> Result<()> {
    let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
    match p {
        Primitive::HyperplaneReflection { normal } => {
            if normal.len() != dim || (norm(normal) - 1.0).abs() > 1e-12 {
                return bad("reflection normal must be a unit vector of the ambient dimension");
            }
        }
        Primitive::SphereInversion { center, radius } => {
            if center.len() != dim || !(*radius > 0.0) {
                return bad("inversion needs a center of the ambient dimension and positive radius");
            }
            if (norm2(center) - 1.0 - radius * radius).abs() > 1e-10 * (1.0 + norm2(center)) {
                return bad("inversion sphere is not orthogonal to the unit sphere");
            }
        }
        Primitive::OrthogonalMap { rows } => {
            if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                return bad("orthogonal map has wrong shape");
            }
            for i in 0..dim {
                for j in 0..dim {
                    let want = if i == j { 1.0 } else { 0.0 };
                    if (dot(&rows[i], &rows[j]) - want).abs() > 1e-10 {
                        return bad("matrix is not orthogonal");
                    }
                }
            }
        }
        Primitive::BallTransvection { point } => {
            if point.len() != dim || norm(point) >= 1.0 {
                return bad("transvection point must lie in the open ball");
            }
        }
        Primitive::Matrix2 { matrix } => {
            if !(2..=3).contains(&dim) {
                return bad("matrix primitive needs dimension 2 or 3");
            }
            if dim == 2 && !matrix.is_real() {
                return bad("dimension 2 needs a real matrix");
            }
            // a det-1 matrix with entries of size s computes its det only to about eps·s²
            let scale = [matrix.a, matrix.b, matrix.c, matrix.d].iter().map(|z| z.norm_sqr()).sum::<f64>();
            if (matrix.det() - Complex64::new(1.0, 0.0)).norm() > 1e-9 * scale.max(1.0) {
                return bad("matrix determinant must be 1");
            }
        }
    }
    Ok(())
}

fn fit_matrix(g: &Isometry) -> Option<Matrix2> {
    let cands: Vec<Complex64> = [(0.0, 0.0), (1.0, 0.0), (-1.0, 0.0), (2.0, 0.0), (-0.5, 0.0), (0.3, 0.0)]
        .iter()
        .map(|&(re, im)| Complex64::new(re, im))
        .collect();
    let img = |z: Complex64| {
        let p = ExtComplex::Finite(z).to_ideal(g.dim).unit();
        ExtComplex::from_ideal(&IdealPoint::Sphere(normalized(&g.apply_ball(&p, true))))
    };
    let pairs: Vec<(Complex64, Complex64)> = cands
        .iter()
        .filter_map(|&z| match img(z) {
            ExtComplex::Finite(w) if w.norm() < 1e8 => Some((z, w)),
            _ => None,
        })
        .collect();
    if pairs.len() < 3 {
        return None;
    }
    let (z1, w1) = pairs[0];
    let (z2, w2) = pairs[1];
    let (z3, w3) = pairs[2];
    let cross = |p: Complex64, q: Complex64, r: Complex64| Matrix2 { a: q - r, b: -p * (q - r), c: q - p, d: -r * (q - p) };
    let sz = cross(z1, z2, z3);
    let sw = cross(w1, w2, w3);
    if sz.det().norm() < 1e-12 || sw.det().norm() < 1e-12 {
        return None;
    }
    let mut m = sw.normalized().inverse().mul(&sz.normalized()).normalized();
    if g.dim == 2 {
        // a real matrix up to a global unit scalar
        let phase = [m.a, m.b, m.c, m.d].into_iter().max_by(|x, y| x.norm().total_cmp(&y.norm())).unwrap();
        let u = phase.conj() / phase.norm();
        m = Matrix2 {
            a: Complex64::new((m.a * u).re, 0.0),
            b: Complex64::new((m.b * u).re, 0.0),
            c: Complex64::new((m.c * u).re, 0.0),
            d: Complex64::new((m.d * u).re, 0.0),
        };
        if m.det().re <= 0.0 {
            return None;
        }
        m = m.normalized();
    }
    Some(m)
}

/// `G ∘ H`: apply `H` first. Long words are compacted in dimensions 2–3.
pub fn compose(g: &Isometry, h: &Isometry) -> Isometry {
    assert_eq!(g.dim, h.dim, "compose: dimension mismatch");
    let mut word = h.word.clone();
    word.extend(g.word.iter().cloned());
    let out = Isometry { dim: g.dim, word };
    if out.word.len() > COMPACTION_THRESHOLD {
        out.compacted()
    } else {
        out
    }
}

/// Reversed word of primitive inverses.
pub fn invert(g: &Isometry) -> Isometry {
    Isometry { dim: g.dim, word: g.word.iter().rev().map(Primitive::inverse).collect() }
}

/// Apply to an interior or ideal point, keeping its model.
pub trait MobiusApply {
    type Output;
    fn apply_by(&self, g: &Isometry) -> Self::Output;
}

impl MobiusApply for ModelPoint {
    type Output = Result<ModelPoint>;
    fn apply_by(&self, g: &Isometry) -> Result<ModelPoint> {
        g.apply_point(self)
    }
}

impl MobiusApply for IdealPoint {
    type Output = IdealPoint;
    fn apply_by(&self, g: &Isometry) -> IdealPoint {
        g.apply_ideal(self)
    }
}

pub fn apply<P: MobiusApply>(g: &Isometry, p: &P) -> P::Output {
    p.apply_by(g)
}

/// The 20 fixed interior probe points used for equality checks.
pub fn probe_points(dim: usize) -> Vec<Vec<f64>> {
    let mut rng = seeded(0x5eed_0f_9b0e);
    (0..20)
        .map(|_| {
            let r = 0.9 * rng.gen::<f64>();
            scale(&random_unit(&mut rng, dim), r)
        })
        .collect()
}

/// Rotation in the plane of unit vectors `u`, `w` taking `u` to `w`.
pub fn rotation_taking(u: &[f64], w: &[f64]) -> Isometry {
    let dim = u.len();
    let c = dot(u, w).clamp(-1.0, 1.0);
    let mut perp = axpy(w, -c, u);
    let pn = norm(&perp);
    if pn < 1e-14 {
        if c > 0.0 {
            return Isometry::identity(dim);
        }
        perp = complement_vector(&[u.to_vec()]);
    } else {
        perp = scale(&perp, 1.0 / pn);
    }
    let s = (1.0 - c * c).max(0.0).sqrt();
    let s = if pn < 1e-14 { 0.0 } else { s };
    let rows = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    let id = if i == j { 1.0 } else { 0.0 };
                    id + s * (perp[i] * u[j] - u[i] * perp[j]) + (c - 1.0) * (u[i] * u[j] + perp[i] * perp[j])
                })
                .collect()
        })
        .collect();
    Isometry { dim, word: vec![Primitive::OrthogonalMap { rows }] }
}

/// A unit vector orthogonal to all of `vs` (assumed orthonormal).
fn complement_vector(vs: &[Vec<f64>]) -> Vec<f64> {
    let dim = vs[0].len();
    let mut best: Option<Vec<f64>> = None;
    let mut best_n = 0.0;
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        for v in vs {
            e = axpy(&e, -dot(&e, v), v);
        }
        let n = norm(&e);
        if n > best_n {
            best_n = n;
            best = Some(scale(&e, 1.0 / n));
        }
    }
    best.expect("complement exists")
}

/// Complete an orthonormal family to an orthonormal basis.
fn complete_basis(mut vs: Vec<Vec<f64>>, dim: usize) -> Vec<Vec<f64>> {
    while vs.len() < dim {
        let c = complement_vector(&vs);
        vs.push(c);
    }
    vs
}

fn perp2(v: &[f64]) -> Vec<f64> {
    vec![-v[1], v[0]]
}

/// Orientation-preserving `U` with `U(z) = ȷ`, `U(e) = x`, `U(-e) = y`.
///
/// Built as `W ∘ T_z` where `W` is orthogonal and matches the frames
/// spanned by `T_z(±e)` and `x, y`.
pub fn lemma_orthogonal_map(z: &ModelPoint, x: &IdealPoint, y: &IdealPoint) -> Result<Isometry> {
    let dim = z.dim();
    if x.dim() != dim || y.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: x.dim().max(y.dim()) });
    }
    let zb = z.to_ball()?;
    let zc = zb.coords().to_vec();
    let mut e = vec![0.0; dim];
    e[0] = 1.0;
    let me = scale(&e, -1.0);
    let (xu, yu) = (x.unit(), y.unit());
    let expected = 2.0 * (1.0 - norm2(&zc)) / (edist(&zc, &e) * edist(&zc, &me));
    let chord = edist(&xu, &yu);
    if (chord - expected).abs() > 1e-9 {
        return Err(Error::PreconditionViolated(format!(
            "|x-y| = {chord} but 2/cosh rho(z, axis) = {expected}"
        )));
    }
    let v = Isometry::transvection(zc)?;
    let p = normalized(&v.apply_ball(&e, true));
    let q = normalized(&v.apply_ball(&me, true));
    let f2 = normalized(&sub(&p, &q));
    let g2 = normalized(&sub(&xu, &yu));
    let sum_p: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a + b).collect();
    let sum_x: Vec<f64> = xu.iter().zip(&yu).map(|(a, b)| a + b).collect();
    let antipodal = norm(&sum_p) < 1e-9 || norm(&sum_x) < 1e-9;
    // p - q is orthogonal to p + q in exact arithmetic; when p and q are
    // close the computed difference is not, so re-orthogonalize the frames
    let (f2, g2) = if antipodal {
        (f2, g2)
    } else {
        let (sp, sx) = (normalized(&sum_p), normalized(&sum_x));
        (
            normalized(&axpy(&f2, -dot(&f2, &sp), &sp)),
            normalized(&axpy(&g2, -dot(&g2, &sx), &sx)),
        )
    };

    let (fs, mut gs) = if dim == 2 {
        if antipodal {
            (vec![perp2(&f2), f2.clone()], vec![perp2(&g2), g2.clone()])
        } else {
            (vec![normalized(&sum_p), f2.clone()], vec![normalized(&sum_x), g2.clone()])
        }
    } else if antipodal {
        (complete_basis(vec![f2.clone()], dim), complete_basis(vec![g2.clone()], dim))
    } else {
        (
            complete_basis(vec![normalized(&sum_p), f2.clone()], dim),
            complete_basis(vec![normalized(&sum_x), g2.clone()], dim),
        )
    };
    let build = |gs: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..dim)
            .map(|r| (0..dim).map(|c| (0..dim).map(|i| gs[i][r] * fs[i][c]).sum()).collect())
            .collect()
    };
    let mut rows = build(&gs);
    if orthogonal_det(&rows) < 0.0 {
        let fixed = if antipodal { 1 } else { 2 };
        if dim == 2 || dim <= fixed {
            return Err(Error::SideConditionViolated);
        }
        let last = gs.len() - 1;
        gs[last] = scale(&gs[last], -1.0);
        rows = build(&gs);
    }
    Ok(Isometry { dim, word: vec![Primitive::BallTransvection { point: zb.coords().to_vec() }, Primitive::OrthogonalMap { rows }] })
}

/// Unit vectors with covering radius at most `radius` on `S^{dim-1}`:
/// grid points of the cube surface, radially projected.
pub fn sphere_net(dim: usize, radius: f64) -> Vec<Vec<f64>> {
    (0..sphere_net_len(dim, radius)).map(|i| sphere_net_point(dim, radius, i)).collect()
}

fn cube_steps(dim: usize, radius: f64) -> usize {
    let h = 2.0 * radius / ((dim - 1) as f64).sqrt();
    (2.0 / h).ceil() as usize
}

pub fn sphere_net_len(dim: usize, radius: f64) -> usize {
    let m = cube_steps(dim, radius);
    2 * dim * (m + 1).pow(dim as u32 - 1)
}

/// The `idx`-th point of [`sphere_net`].
pub fn sphere_net_point(dim: usize, radius: f64, idx: usize) -> Vec<f64> {
    let m = cube_steps(dim, radius);
    let step = 2.0 / m as f64;
    let per_face = (m + 1).pow(dim as u32 - 1);
    let (face, mut k) = (idx / per_face, idx % per_face);
    let (axis, sign) = (face / 2, if face % 2 == 0 { -1.0 } else { 1.0 });
    let mut p = vec![0.0; dim];
    p[axis] = sign;
    for i in (0..dim).filter(|&i| i != axis) {
        p[i] = -1.0 + step * (k % (m + 1)) as f64;
        k /= m + 1;
    }
    normalized(&p)
}

/// Orthogonal maps (determinant +1) such that any unit vector can be sent
/// within `delta` of any other by one of them.
pub fn orthogonal_net(dim: usize, delta: f64) -> Vec<Vec<Vec<f64>>> {
    (0..orthogonal_net_len(dim, delta)).map(|i| orthogonal_net_element(dim, delta, i)).collect()
}

pub fn orthogonal_net_len(dim: usize, delta: f64) -> usize {
    if dim == 2 {
        (std::f64::consts::TAU / delta).ceil() as usize
    } else {
        sphere_net_len(dim, delta / 2.0).pow(2)
    }
}

/// The `i`-th element of [`orthogonal_net`]: a rotation by `2πi/K` in the
/// plane, or the map sending net point `i / P` to net point `i % P`.
pub fn orthogonal_net_element(dim: usize, delta: f64, i: usize) -> Vec<Vec<f64>> {
    if dim == 2 {
        let k = orthogonal_net_len(2, delta);
        let a = std::f64::consts::TAU * i as f64 / k as f64;
        return vec![vec![a.cos(), -a.sin()], vec![a.sin(), a.cos()]];
    }
    let p = sphere_net_len(dim, delta / 2.0);
    let from = sphere_net_point(dim, delta / 2.0, i / p);
    let to = sphere_net_point(dim, delta / 2.0, i % p);
    orthogonal_sending(&from, &to)
}

/// Rotation sending unit `p` to unit `q`: a reflection swapping them
/// followed by a reflection fixing `q`.
fn orthogonal_sending(p: &[f64], q: &[f64]) -> Vec<Vec<f64>> {
    let dim = p.len();
    let id = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let d = sub(p, q);
    let dn = norm(&d);
    if dn < 1e-14 {
        return (0..dim).map(|i| (0..dim).map(|j| id(i, j)).collect()).collect();
    }
    let u = scale(&d, 1.0 / dn);
    let w = complement_vector(&[q.to_vec()]);
    let h: Vec<Vec<f64>> = (0..dim).map(|i| (0..dim).map(|j| id(i, j) - 2.0 * u[i] * u[j]).collect()).collect();
    let f: Vec<Vec<f64>> = (0..dim).map(|i| (0..dim).map(|j| id(i, j) - 2.0 * w[i] * w[j]).collect()).collect();
    (0..dim)
        .map(|i| (0..dim).map(|j| (0..dim).map(|k| f[i][k] * h[k][j]).sum()).collect())
        .collect()
}

/// Elements `T⁻¹ ∘ O_i ∘ T` of the stabilizer of `x`, with `T = T_x` and
/// `{O_i}` an orthogonal net fine enough that every boundary point can be
/// moved within chordal distance `1/n` of every target.
///
/// The net resolution is `(1/n)(1-|x|)/(1+|x|)`: the chordal Lipschitz
/// constant of `T_x⁻¹` on the sphere is `(1+|x|)/(1-|x|)`.
pub fn stabilizer_net(x: &ModelPoint, n: usize) -> Result<Vec<Isometry>> {
    let (center, delta) = stabilizer_resolution(x, n)?;
    let dim = center.len();
    Ok((0..orthogonal_net_len(dim, delta)).map(|i| stabilizer_element(&center, delta, i)).collect())
}

/// Ball coordinates of `x` and the orthogonal-net resolution used by
/// [`stabilizer_net`].
pub fn stabilizer_resolution(x: &ModelPoint, n: usize) -> Result<(Vec<f64>, f64)> {
    if n == 0 {
        return Err(Error::InvalidInput("stabilizer_net needs n >= 1".into()));
    }
    let xb = x.to_ball()?;
    let r = norm(xb.coords());
    Ok((xb.coords().to_vec(), (1.0 / n as f64) * (1.0 - r) / (1.0 + r)))
}

/// `T⁻¹ ∘ O_i ∘ T` for the `i`-th orthogonal net element.
pub fn stabilizer_element(center: &[f64], delta: f64, i: usize) -> Isometry {
    let t = Primitive::BallTransvection { point: center.to_vec() };
    let rows = orthogonal_net_element(center.len(), delta, i);
    Isometry { dim: center.len(), word: vec![t.clone(), Primitive::OrthogonalMap { rows }, t.inverse()] }
}

/// Random word of `len` primitives, for property tests and probes. Each
/// primitive moves the origin a hyperbolic distance of at most 1.5.
pub fn random_isometry<R: Rng + ?Sized>(rng: &mut R, dim: usize, len: usize) -> Isometry {
    let mut word = Vec::with_capacity(len);
    for _ in 0..len {
        let half = 0.025 + 0.725 * rng.gen::<f64>();
        let p = match rng.gen_range(0..4) {
            0 => Primitive::HyperplaneReflection { normal: random_unit(rng, dim) },
            1 => {
                let u = random_unit(rng, dim);
                Primitive::SphereInversion { center: scale(&u, 1.0 / half.tanh()), radius: 1.0 / half.sinh() }
            }
            2 => Primitive::OrthogonalMap { rows: random_orthogonal(rng, dim) },
            _ => Primitive::BallTransvection { point: scale(&random_unit(rng, dim), half.tanh()) },
        };
        word.push(p);
    }
    Isometry { dim, word }
}

fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<Vec<f64>> {
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while vs.len() < dim {
        let mut v = random_unit(rng, dim);
        for w in &vs {
            v = axpy(&v, -dot(&v, w), w);
        }
        let n = norm(&v);
        if n > 1e-6 {
            vs.push(scale(&v, 1.0 / n));
        }
    }
    vs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::dist;

    fn ball(c: &[f64]) -> ModelPoint {
        ModelPoint::ball(c.to_vec()).unwrap()
    }

    #[test]
    fn transvection_sends_point_to_origin() {
        let a = vec![0.3, -0.4, 0.1];
        let t = Isometry::transvection(a.clone()).unwrap();
        let img = t.apply_ball(&a, false);
        assert!(norm(&img) < 1e-15);
        assert!(norm(&sub(&t.apply_ball(&[0.0; 3], false), &scale(&a, -1.0))) < 1e-15);
    }

    #[test]
    fn transvection_one_dimensional_form() {
        // on the axis T_a(x) = (x - a)/(1 - a x)
        let a = 0.6;
        let t = Isometry::transvection(vec![a, 0.0]).unwrap();
        for &x in &[-0.9, -0.2, 0.0, 0.35, 0.99] {
            let img = t.apply_ball(&[x, 0.0], false);
            assert!((img[0] - (x - a) / (1.0 - a * x)).abs() < 1e-14);
            assert!(img[1].abs() < 1e-15);
        }
    }

    #[test]
    fn identity_word() {
        let p = ball(&[0.2, 0.5]);
        assert_eq!(Isometry::identity(2).apply_point(&p).unwrap(), p);
    }

    #[test]
    fn orthogonal_map_fixes_origin_distance() {
        let r = rotation_taking(&[1.0, 0.0, 0.0], &[0.0, 0.6, 0.8]);
        let p = ball(&[0.1, 0.2, 0.3]);
        let o = ModelPoint::origin(Model::Ball, 3);
        assert!((dist(&o, &r.apply_point(&p).unwrap()) - dist(&o, &p)).abs() < 1e-14);
        let img = r.apply_ball(&[1.0, 0.0, 0.0], true);
        assert!(edist(&img, &[0.0, 0.6, 0.8]) < 1e-14);
    }

    #[test]
    fn rotation_taking_antipodes() {
        let r = rotation_taking(&[1.0, 0.0], &[-1.0, 0.0]);
        assert_eq!(r.orientation(), 1);
        assert!(edist(&r.apply_ball(&[1.0, 0.0], true), &[-1.0, 0.0]) < 1e-14);
    }

    #[test]
    fn psl2_fixes_origin_under_rotation() {
        let m = Matrix2::real(0.0, -1.0, 1.0, 0.0).unwrap();
        let j = ModelPoint::half_space(1.0, &[0.0, 0.0]).unwrap();
        let img = psl2_apply(&m, &j).unwrap();
        assert!(edist(img.coords(), j.coords()) < 1e-15);
        let id = psl2_apply(&Matrix2::identity(), &ModelPoint::half_space(0.3, &[1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(id.coords(), &[0.3, 1.0, 2.0]);
    }

    #[test]
    fn lemma_map_identity_case() {
        let z = ModelPoint::origin(Model::Ball, 3);
        let e = IdealPoint::sphere(vec![1.0, 0.0, 0.0]).unwrap();
        let me = IdealPoint::sphere(vec![-1.0, 0.0, 0.0]).unwrap();
        let u = lemma_orthogonal_map(&z, &e, &me).unwrap();
        assert_eq!(u.orientation(), 1);
        assert!(edist(&u.apply_ideal(&e).unit(), &e.unit()) < 1e-12);
        assert!(edist(&u.apply_ideal(&me).unit(), &me.unit()) < 1e-12);
    }

    #[test]
    fn lemma_map_precondition() {
        let z = ball(&[0.0, 0.5, 0.0]);
        let e = IdealPoint::sphere(vec![1.0, 0.0, 0.0]).unwrap();
        let me = IdealPoint::sphere(vec![-1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(lemma_orthogonal_map(&z, &e, &me), Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn stabilizer_circle_count() {
        let o = ModelPoint::origin(Model::Ball, 2);
        let net = stabilizer_net(&o, 3).unwrap();
        assert_eq!(net.len(), (std::f64::consts::TAU * 3.0).ceil() as usize);
    }

    #[test]
    fn sphere_net_covers() {
        let pts = sphere_net(3, 0.25);
        let mut rng = seeded(3);
        for _ in 0..500 {
            let u = random_unit(&mut rng, 3);
            let best = pts.iter().map(|p| edist(p, &u)).fold(f64::INFINITY, f64::min);
            assert!(best <= 0.25 + 1e-12);
        }
    }

    #[test]
    fn json_round_trip() {
        let mut rng = seeded(11);
        let g = random_isometry(&mut rng, 3, 6);
        let s = serde_json::to_string(&g).unwrap();
        let back: Isometry = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
        let m = Isometry::matrix2(3, Matrix2::new(
            Complex64::new(1.0, 0.5), Complex64::new(0.2, 0.0), Complex64::new(-0.3, 0.1), Complex64::new(1.0, 0.0),
        ).unwrap()).unwrap();
        let back: Isometry = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
