//! Continued fractions as Möbius sequences.
//!
//! Classical continued fractions `K(a_n | b_n)` are evaluated through
//! products of the matrices `[[0, a_k], [1, b_k]]`. Ball-model continued
//! fractions are sequences of isometries `T_n` with `T_n(e) = T_{n-1}(-e)`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Deserialize;

use crate::divergence::{classify_orbit, final_half_start, MobiusSequence, TailVerdict, DEFAULT_TOL_HI};
use crate::geometry::{IdealPoint, Model, ModelPoint};
use crate::limits::{final_quarter_start, PointSequence};
use crate::mobius::{lemma_orthogonal_map, ExtComplex, Isometry, Matrix2};
use crate::vecops::{dist as edist, norm2};
use crate::{Error, Result};

/// `(a_n, b_n)`.
pub type Coefficient = (Complex64, Complex64);

#[derive(Clone)]
enum Source {
    List(Arc<Vec<Coefficient>>),
    Generated(Arc<dyn Fn(usize) -> Coefficient + Send + Sync>),
}

/// `t_n(z) = a_n / (b_n + z)`, composed as `T_n = t_1 ∘ … ∘ t_n`.
#[derive(Clone)]
pub struct ContinuedFraction {
    source: Source,
}

impl std::fmt::Debug for ContinuedFraction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ContinuedFraction").field("len", &self.len()).finish()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonNumber {
    Real(f64),
    Complex([f64; 2]),
}

impl JsonNumber {
    fn value(&self) -> Complex64 {
        match *self {
            JsonNumber::Real(x) => Complex64::new(x, 0.0),
            JsonNumber::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

impl ContinuedFraction {
    pub fn from_pairs(pairs: Vec<Coefficient>) -> Self {
        Self { source: Source::List(Arc::new(pairs)) }
    }

    pub fn from_real_pairs(pairs: &[(f64, f64)]) -> Self {
        Self::from_pairs(pairs.iter().map(|&(a, b)| (Complex64::new(a, 0.0), Complex64::new(b, 0.0))).collect())
    }

    /// Unbounded coefficient stream, `f(n)` for `n ≥ 1`.
    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(usize) -> Coefficient + Send + Sync + 'static,
    {
        Self { source: Source::Generated(Arc::new(f)) }
    }

    /// `a_n = b_n = 1`.
    pub fn golden() -> Self {
        Self::from_fn(|_| (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)))
    }

    /// `a_n = 1, b_n = 0`: `T_n(0)` alternates between `∞` and `0`.
    pub fn oscillating() -> Self {
        Self::from_fn(|_| (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)))
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "golden" => Ok(Self::golden()),
            "oscillating" => Ok(Self::oscillating()),
            other => Err(Error::InvalidInput(format!("unknown preset {other:?} (expected golden or oscillating)"))),
        }
    }

    /// A JSON list of `[a, b]` pairs; each entry is a number or `[re, im]`.
    pub fn from_json(text: &str) -> Result<Self> {
        let pairs: Vec<(JsonNumber, JsonNumber)> =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("coefficient JSON: {e}")))?;
        if pairs.is_empty() {
            return Err(Error::InvalidInput("coefficient list is empty".into()));
        }
        Ok(Self::from_pairs(pairs.iter().map(|(a, b)| (a.value(), b.value())).collect()))
    }

    /// `None` for unbounded streams.
    pub fn len(&self) -> Option<usize> {
        match &self.source {
            Source::List(v) => Some(v.len()),
            Source::Generated(_) => None,
        }
    }

    pub fn coefficient(&self, n: usize) -> Result<Coefficient> {
        if n == 0 {
            return Err(Error::InvalidInput("coefficients are indexed from 1".into()));
        }
        let (a, b) = match &self.source {
            Source::List(v) => *v
                .get(n - 1)
                .ok_or_else(|| Error::InvalidInput(format!("index {n} beyond the {} supplied coefficients", v.len())))?,
            Source::Generated(f) => f(n),
        };
        if a == Complex64::new(0.0, 0.0) {
            return Err(Error::DegenerateCoefficient(n));
        }
        if !(a.re.is_finite() && a.im.is_finite() && b.re.is_finite() && b.im.is_finite()) {
            return Err(Error::InvalidInput(format!("coefficient {n} is not finite")));
        }
        Ok((a, b))
    }
}

const RESCALE_HI: f64 = 1e150;
const RESCALE_LO: f64 = 1e-150;

/// Multiply every entry by the power of two bringing the largest modulus
/// near 1. Power-of-two scaling is exact, so ratios of entries are kept bit
/// for bit.
fn rescale(m: &mut Matrix2) {
    let big = [m.a, m.b, m.c, m.d].iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max);
    if big > RESCALE_HI || (big < RESCALE_LO && big > 0.0) {
        let s = 2f64.powi(-big.log2().round() as i32);
        for z in [&mut m.a, &mut m.b, &mut m.c, &mut m.d] {
            *z *= s;
        }
    }
}

/// Raw products `t_1 ⋯ t_k` for `k = 1..=n`, never det-normalized.
/// Column one of the `k`-th product is column two of the `(k-1)`-th up to
/// a power of two, so `T_k(∞) = T_{k-1}(0)` holds bit for bit.
pub fn partial_matrices(cf: &ContinuedFraction, n: usize) -> Result<Vec<Matrix2>> {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let mut acc = Matrix2::identity();
    let mut out = Vec::with_capacity(n);
    for k in 1..=n {
        let (a, b) = cf.coefficient(k)?;
        acc = acc.mul(&Matrix2 { a: zero, b: a, c: one, d: b });
        rescale(&mut acc);
        out.push(acc);
    }
    Ok(out)
}

/// `T_n(z)`.
pub fn cf_partial(cf: &ContinuedFraction, n: usize, z: ExtComplex) -> Result<ExtComplex> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let m = partial_matrices(cf, n)?.pop().expect("n >= 1");
    Ok(m.apply_boundary(z))
}

/// Convergents `T_k(0)` for `k = 1..=n`.
pub fn convergents(cf: &ContinuedFraction, n: usize) -> Result<Vec<ExtComplex>> {
    Ok(partial_matrices(cf, n)?.iter().map(|m| m.apply_boundary(ExtComplex::real(0.0))).collect())
}

/// Inverse stereographic image on the unit sphere of `R³`. Euclidean
/// distance there is [`ExtComplex::chordal`].
pub fn riemann_sphere(z: &ExtComplex) -> Vec<f64> {
    match z {
        ExtComplex::Infinity => vec![0.0, 0.0, 1.0],
        ExtComplex::Finite(w) => {
            let s = w.norm_sqr();
            if !s.is_finite() {
                return vec![0.0, 0.0, 1.0];
            }
            vec![2.0 * w.re / (1.0 + s), 2.0 * w.im / (1.0 + s), (s - 1.0) / (s + 1.0)]
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ClassicalConvergence<V> {
    Converges(V),
    Diverges,
    Undecided,
}

impl<V> ClassicalConvergence<V> {
    pub fn name(&self) -> &'static str {
        match self {
            ClassicalConvergence::Converges(_) => "converges",
            ClassicalConvergence::Diverges => "diverges",
            ClassicalConvergence::Undecided => "undecided",
        }
    }
}

/// Tail rule of the boundary classifier applied to `(T_n(0))` in the
/// chordal metric: `tol` bounds the final-quarter diameter for
/// convergence, and divergence needs every window of the final half to
/// spread beyond the default upper tolerance.
pub fn classical_convergence(cf: &ContinuedFraction, n: usize, tol: f64) -> Result<ClassicalConvergence<ExtComplex>> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let values = convergents(cf, n)?;
    let half = final_half_start(n);
    let orbit: Vec<Vec<f64>> = values[half - 1..].iter().map(riemann_sphere).collect();
    Ok(match classify_orbit(&orbit, n, tol, DEFAULT_TOL_HI.max(tol)).0 {
        TailVerdict::Convergent => ClassicalConvergence::Converges(values[n - 1]),
        TailVerdict::Divergent => ClassicalConvergence::Diverges,
        TailVerdict::Undecided => ClassicalConvergence::Undecided,
    })
}

/// `(T_n)` acting on `H³` through `PSL(2, C)`.
///
/// Each factor is scaled to determinant 1 before multiplying. Normalizing
/// the raw product instead would divide by a determinant computed with
/// cancellation once the entries grow.
pub fn isometry_sequence(cf: &ContinuedFraction, n: usize) -> Result<MobiusSequence> {
    let zero = Complex64::new(0.0, 0.0);
    let mut acc = Matrix2::identity();
    let mut terms = Vec::with_capacity(n);
    for k in 1..=n {
        let (a, b) = cf.coefficient(k)?;
        let s = (-a).sqrt().inv();
        acc = acc.mul(&Matrix2 { a: zero, b: a * s, c: s, d: b * s });
        let size: f64 = [acc.a, acc.b, acc.c, acc.d].iter().map(|z| z.norm_sqr()).sum();
        if !size.is_finite() {
            return Err(Error::InvalidInput(format!("normalized product overflows f64 at term {k}")));
        }
        terms.push(Isometry::matrix2(3, acc)?);
    }
    MobiusSequence::from_vec(terms)
}

/// `n,re,im,chordal_step` per convergent; the step is the chordal distance
/// to the previous convergent (empty on the first row).
pub fn diagnostics_csv(cf: &ContinuedFraction, n: usize) -> Result<String> {
    use crate::fmt::g17;
    let values = convergents(cf, n)?;
    let mut out = String::from("n,re,im,chordal_step\n");
    for (i, v) in values.iter().enumerate() {
        let (re, im) = match v {
            ExtComplex::Finite(z) => (g17(z.re), g17(z.im)),
            ExtComplex::Infinity => ("inf".to_string(), "0".to_string()),
        };
        let step = if i == 0 { String::new() } else { g17(v.chordal(&values[i - 1])) };
        out.push_str(&format!("{},{re},{im},{step}\n", i + 1));
    }
    Ok(out)
}

/// `cosh ρ(z, γ) = |z - e||z + e| / (1 - |z|²)` where `γ` is the diameter
/// from `-e` to `e`.
pub fn cosh_dist_to_axis(z: &ModelPoint) -> Result<f64> {
    let zb = z.to_ball()?;
    let c = zb.coords();
    let mut e = vec![0.0; c.len()];
    e[0] = 1.0;
    let me: Vec<f64> = e.iter().map(|x| -x).collect();
    Ok(edist(c, &e) * edist(c, &me) / (1.0 - norm2(c)))
}

fn axis_point(dim: usize, theta: f64) -> IdealPoint {
    let mut v = vec![0.0; dim];
    v[0] = theta.cos();
    v[1] = theta.sin();
    IdealPoint::Sphere(v)
}

/// A ball-model continued fraction: `T_0` is the identity and
/// `T_n(e) = T_{n-1}(-e)` for every `n ≥ 1`.
#[derive(Clone, Debug)]
pub struct BallContinuedFraction {
    dim: usize,
    terms: Vec<Isometry>,
    thetas: Vec<f64>,
    data: Vec<ModelPoint>,
    padding: Vec<bool>,
    cosh_rho: Vec<f64>,
}

impl BallContinuedFraction {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `T_n`; `n = 0` gives the identity.
    pub fn term(&self, n: usize) -> Isometry {
        if n == 0 {
            Isometry::identity(self.dim)
        } else {
            self.terms[n - 1].clone()
        }
    }

    /// Angles `θ_0 = 0, θ_1, …, θ_N`.
    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    /// The point `z_n` with `T_n(z_n) = ȷ`, padding included.
    pub fn data_point(&self, n: usize) -> &ModelPoint {
        &self.data[n - 1]
    }

    pub fn is_padding(&self, n: usize) -> bool {
        self.padding[n - 1]
    }

    pub fn padding_count(&self) -> usize {
        self.padding.iter().filter(|p| **p).count()
    }

    /// `ρ(z_n, γ)` in construction order.
    pub fn rhos(&self) -> Vec<f64> {
        self.cosh_rho.iter().map(|c| c.acosh()).collect()
    }

    /// Least `ρ(z_n, γ)` over the supplied (non-padding) data. A small value
    /// at large `N` hints at a conical limit point at `±e`.
    pub fn min_rho(&self) -> f64 {
        self.cosh_rho
            .iter()
            .zip(&self.padding)
            .filter(|(_, p)| !**p)
            .map(|(c, _)| c.acosh())
            .fold(f64::INFINITY, f64::min)
    }

    /// `|T_n(e) - T_{n-1}(-e)|`.
    pub fn chaining_residual(&self, n: usize) -> f64 {
        let mut e = vec![0.0; self.dim];
        e[0] = 1.0;
        let me: Vec<f64> = e.iter().map(|x| -x).collect();
        edist(&self.term(n).apply_ball(&e, true), &self.term(n - 1).apply_ball(&me, true))
    }

    pub fn to_mobius_sequence(&self) -> MobiusSequence {
        MobiusSequence::from_vec(self.terms.clone()).expect("nonempty")
    }

    /// `(T_n⁻¹(ȷ))`.
    pub fn inverse_orbit(&self) -> PointSequence {
        self.to_mobius_sequence().inverse_orbit()
    }

    /// Tail rule on `(T_n(e))` over the first `n` terms.
    pub fn classical_convergence(&self, n: usize, tol: f64) -> ClassicalConvergence<IdealPoint> {
        assert!(n >= 1 && n <= self.len(), "n outside 1..={}", self.len());
        let mut e = vec![0.0; self.dim];
        e[0] = 1.0;
        let orbit: Vec<Vec<f64>> = (final_half_start(n)..=n).map(|k| self.term(k).apply_ball(&e, true)).collect();
        match classify_orbit(&orbit, n, tol, DEFAULT_TOL_HI.max(tol)).0 {
            TailVerdict::Convergent => ClassicalConvergence::Converges(IdealPoint::Sphere(orbit.last().unwrap().clone())),
            TailVerdict::Divergent => ClassicalConvergence::Diverges,
            TailVerdict::Undecided => ClassicalConvergence::Undecided,
        }
    }
}

/// Relative width of a tie group in `cosh ρ`; members may be reordered.
const TIE: f64 = 1e-12;

struct Builder {
    dim: usize,
    out: BallContinuedFraction,
}

impl Builder {
    fn next_parity(&self) -> usize {
        self.out.terms.len() + 1
    }

    /// Build `T_n` for `z` if the lemma allows it.
    fn try_push(&mut self, z: &ModelPoint, cosh_rho: f64, padding: bool) -> Result<bool> {
        let n = self.next_parity();
        let half = (1.0 / cosh_rho).min(1.0).asin();
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let prev = *self.out.thetas.last().unwrap();
        let theta = prev + 2.0 * sign * half;
        // T_n(e) = -P(θ_{n-1}) = T_{n-1}(-e), T_n(-e) = -P(θ_n)
        let x = axis_point(self.dim, prev + std::f64::consts::PI);
        let y = axis_point(self.dim, theta + std::f64::consts::PI);
        match lemma_orthogonal_map(z, &x, &y) {
            Ok(t) => {
                self.out.terms.push(t);
                self.out.thetas.push(theta);
                self.out.data.push(z.clone());
                self.out.padding.push(padding);
                self.out.cosh_rho.push(cosh_rho);
                Ok(true)
            }
            Err(Error::SideConditionViolated) => Ok(false),
            Err(e) => Err(e),
        }
    }

    /// A point on the horocycle through `ȷ` tangent at `e` with the given
    /// `ρ(·, γ)`; `sinh ρ = 2 cot(φ/2)` along `(½ + ½cos φ, ±½ sin φ)`.
    fn pad(&mut self, rho: f64) -> Result<()> {
        let phi = 2.0 * (2.0 / rho.sinh()).atan();
        for side in [1.0, -1.0] {
            let mut c = vec![0.0; self.dim];
            c[0] = 0.5 + 0.5 * phi.cos();
            c[1] = side * 0.5 * phi.sin();
            let p = ModelPoint::ball(c).map_err(|_| {
                Error::PreconditionViolated(format!("horocycle padding at rho = {rho} is beyond f64 resolution"))
            })?;
            let ch = cosh_dist_to_axis(&p)?;
            if self.try_push(&p, ch, true)? {
                return Ok(());
            }
        }
        unreachable!("one side of the axis always satisfies the side condition")
    }
}

/// The classically convergent continued fraction whose set of divergence
/// is the conical limit set of `z_seq` (Proposition: conical limit sets
/// avoiding `±e`).
///
/// Data are stably sorted by `ρ(z, γ)`. In dimension 2 the lemma's side
/// condition fixes on which side of `γ` each `z_n` must lie; points of a
/// tie group are reordered to match, and otherwise a horocycle point is
/// inserted.
pub fn construct_cfconv(z_seq: &PointSequence) -> Result<BallContinuedFraction> {
    let n = z_seq.len();
    if n == 0 {
        return Err(Error::EmptyResult(0));
    }
    let dim = z_seq.dim();
    let mut items: Vec<(ModelPoint, f64)> = Vec::with_capacity(n);
    for z in z_seq.to_vec(n) {
        let zb = z.to_ball()?;
        let c = cosh_dist_to_axis(&zb)?;
        items.push((zb, c));
    }
    // a bounded subsequence of ρ shows up as late terms no farther from γ
    // than the early ones
    let q = n / 4;
    if q >= 1 {
        let early = items[..q].iter().map(|i| i.1).fold(0.0, f64::max);
        let late = items[final_quarter_start(n) - 1..].iter().map(|i| i.1).fold(f64::INFINITY, f64::min);
        if late <= early {
            return Err(Error::PreconditionViolated(format!(
                "rho(z_n, axis) looks bounded: final-quarter min {} <= first-quarter max {} (e or -e may be conical)",
                late.acosh(),
                early.acosh()
            )));
        }
    }
    items.sort_by(|a, b| a.1.total_cmp(&b.1));

    let mut b = Builder {
        dim,
        out: BallContinuedFraction {
            dim,
            terms: Vec::with_capacity(n),
            thetas: vec![0.0],
            data: Vec::with_capacity(n),
            padding: Vec::with_capacity(n),
            cosh_rho: Vec::with_capacity(n),
        },
    };
    let mut i = 0;
    let mut last_rho = 0.0f64;
    while i < items.len() {
        let mut j = i + 1;
        while j < items.len() && items[j].1 <= items[i].1 * (1.0 + TIE) {
            j += 1;
        }
        let mut group: Vec<(ModelPoint, f64)> = items[i..j].to_vec();
        while !group.is_empty() {
            let mut placed = None;
            for (k, (z, c)) in group.iter().enumerate() {
                if b.try_push(z, *c, false)? {
                    placed = Some(k);
                    break;
                }
            }
            match placed {
                Some(k) => {
                    last_rho = group[k].1.acosh();
                    group.remove(k);
                }
                None => {
                    let rho = 0.5 * (last_rho + group[0].1.acosh());
                    b.pad(rho)?;
                    last_rho = rho;
                }
            }
        }
        i = j;
    }
    Ok(b.out)
}

/// `r ∈ [0, 1)` with `cosh ρ(r ζ, γ) = target`, by bisection.
pub fn radius_for_cosh(zeta: &[f64], target: f64) -> f64 {
    let f = |r: f64| {
        let z: Vec<f64> = zeta.iter().map(|c| c * r).collect();
        let mut e = vec![0.0; z.len()];
        e[0] = 1.0;
        let me: Vec<f64> = e.iter().map(|x| -x).collect();
        edist(&z, &e) * edist(&z, &me) / (1.0 - norm2(&z))
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// [`construct_prescribed_limit_set`] with the schedule `cosh ρ(z_n, γ) =
/// cosh_target(n)`, which must be strictly increasing and unbounded.
pub fn construct_prescribed_with_schedule<F>(samples: &[IdealPoint], n: usize, cosh_target: F) -> Result<BallContinuedFraction>
where
    F: Fn(usize) -> f64,
{
    let first = samples.first().ok_or_else(|| Error::PreconditionViolated("no samples".into()))?;
    let dim = first.dim();
    let units: Vec<Vec<f64>> = samples.iter().map(|s| s.to_model(Model::Ball).unit()).collect();
    for u in &units {
        if u.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: u.len() });
        }
        let perp = (norm2(u) - u[0] * u[0]).max(0.0).sqrt();
        if perp < 1e-9 {
            return Err(Error::PreconditionViolated("samples must exclude e and -e".into()));
        }
    }
    // in dimension 2 the side of γ has to alternate: cycle the two
    // half-circles separately and take from them in turn
    let order: Vec<usize> = if dim == 2 {
        let upper: Vec<usize> = (0..units.len()).filter(|&i| units[i][1] > 0.0).collect();
        let lower: Vec<usize> = (0..units.len()).filter(|&i| units[i][1] < 0.0).collect();
        let (mut iu, mut il) = (0, 0);
        (1..=n)
            .map(|k| {
                // odd terms sit above γ, even terms below
                let want_upper = k % 2 == 1;
                let pick_upper = if upper.is_empty() { false } else if lower.is_empty() { true } else { want_upper };
                if pick_upper {
                    iu += 1;
                    upper[(iu - 1) % upper.len()]
                } else {
                    il += 1;
                    lower[(il - 1) % lower.len()]
                }
            })
            .collect()
    } else {
        (0..n).map(|k| k % units.len()).collect()
    };
    let mut points = Vec::with_capacity(n);
    let mut prev = 1.0;
    for (k, &idx) in order.iter().enumerate() {
        let target = cosh_target(k + 1);
        if !(target > prev) {
            return Err(Error::InvalidInput(format!("schedule not strictly increasing at {}", k + 1)));
        }
        prev = target;
        let r = radius_for_cosh(&units[idx], target);
        let p = ModelPoint::ball(units[idx].iter().map(|c| c * r).collect()).map_err(|_| {
            Error::PreconditionViolated(format!("term {} falls within f64 resolution of the sphere", k + 1))
        })?;
        points.push(p);
    }
    construct_cfconv(&PointSequence::from_points(points)?)
}

/// A classically convergent continued fraction whose limit set is the
/// closure of `samples`: `ζ_n` cycles through the samples and
/// `cosh ρ(z_n, γ) = n + 2`.
pub fn construct_prescribed_limit_set(samples: &[IdealPoint], n: usize) -> Result<BallContinuedFraction> {
    construct_prescribed_with_schedule(samples, n, |k| k as f64 + 2.0)
}
