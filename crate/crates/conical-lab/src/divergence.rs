//! Sets of divergence of Möbius sequences.
//!
//! A boundary point is classified from the tail of its orbit: Convergent
//! when the final-quarter images are within `tol_lo` of each other,
//! Divergent when every window of length `⌈N/10⌉` in the final half spreads
//! wider than `tol_hi`. The inverse orbit of `ȷ` ties this to conical limit
//! sets: away from at most one exceptional point, a generally convergent
//! sequence diverges exactly on the conical limit set of `(G_n⁻¹(ȷ))`.

use std::ops::Range;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fmt::g17;
use crate::geometry::{chordal, IdealPoint, Model, ModelPoint};
use crate::limits::{conical_estimate, final_quarter_start, ConicalConfig, ConicalStatus, PointSequence};
use crate::mobius::{invert, orthogonal_net_element, orthogonal_net_len, rotation_taking, stabilizer_resolution, Isometry, Primitive};
use crate::vecops::{dist as edist, norm, normalized, scale};
use crate::{Error, Result};

pub const DEFAULT_TOL_LO: f64 = 1e-6;
pub const DEFAULT_TOL_HI: f64 = 1e-2;

/// A pure map from indices `1..=len` to isometries.
pub trait IsometrySource: Send + Sync {
    fn len(&self) -> usize;
    fn dim(&self) -> usize;
    fn term(&self, n: usize) -> Isometry;
    /// Visit terms in order; sources built from running products override
    /// this to avoid recomputing prefixes.
    fn for_each_in(&self, range: Range<usize>, f: &mut dyn FnMut(usize, &Isometry)) {
        for n in range {
            f(n, &self.term(n));
        }
    }
}

#[derive(Clone)]
pub struct MobiusSequence {
    src: Arc<dyn IsometrySource>,
}

impl std::fmt::Debug for MobiusSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MobiusSequence").field("len", &self.len()).field("dim", &self.dim()).finish()
    }
}

struct FnIsometries<F> {
    len: usize,
    dim: usize,
    f: F,
}

impl<F: Fn(usize) -> Isometry + Send + Sync> IsometrySource for FnIsometries<F> {
    fn len(&self) -> usize {
        self.len
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn term(&self, n: usize) -> Isometry {
        (self.f)(n)
    }
}

impl MobiusSequence {
    pub fn new<S: IsometrySource + 'static>(src: S) -> Self {
        Self { src: Arc::new(src) }
    }

    pub fn from_fn<F>(len: usize, dim: usize, f: F) -> Self
    where
        F: Fn(usize) -> Isometry + Send + Sync + 'static,
    {
        Self::new(FnIsometries { len, dim, f })
    }

    pub fn from_vec(terms: Vec<Isometry>) -> Result<Self> {
        let dim = terms.first().ok_or(Error::EmptyResult(0))?.dim();
        if let Some(t) = terms.iter().find(|t| t.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: t.dim() });
        }
        let terms = Arc::new(terms);
        Ok(Self::from_fn(terms.len(), dim, move |n| terms[n - 1].clone()))
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.src.dim()
    }

    pub fn term(&self, n: usize) -> Isometry {
        assert!(n >= 1 && n <= self.len(), "index {n} outside 1..={}", self.len());
        self.src.term(n)
    }

    pub fn for_each_in(&self, range: Range<usize>, f: &mut dyn FnMut(usize, &Isometry)) {
        assert!(range.start >= 1 && range.end <= self.len() + 1, "range outside the sequence");
        self.src.for_each_in(range, f)
    }

    /// `(G_n⁻¹(ȷ))` in the ball.
    pub fn inverse_orbit(&self) -> PointSequence {
        let me = self.clone();
        let dim = self.dim();
        PointSequence::new(InverseOrbit { seq: me, dim })
    }
}

struct InverseOrbit {
    seq: MobiusSequence,
    dim: usize,
}

impl crate::limits::SequenceSource for InverseOrbit {
    fn len(&self) -> usize {
        self.seq.len()
    }
    fn model(&self) -> Model {
        Model::Ball
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn point(&self, n: usize) -> ModelPoint {
        orbit_point(&invert(&self.seq.term(n)), self.dim)
    }
    fn for_each_in(&self, range: Range<usize>, f: &mut dyn FnMut(usize, &ModelPoint)) {
        let dim = self.dim;
        self.seq.for_each_in(range, &mut |n, g| f(n, &orbit_point(&invert(g), dim)));
    }
}

fn orbit_point(g: &Isometry, dim: usize) -> ModelPoint {
    ModelPoint::ball(g.apply_ball(&vec![0.0; dim], false)).expect("orbit point reached the boundary")
}

fn chunked(range: Range<usize>) -> Vec<Range<usize>> {
    let len = range.end.saturating_sub(range.start);
    let size = (len / (rayon::current_num_threads() * 4)).clamp(64, 1 << 14);
    range.clone().step_by(size).map(|s| s..(s + size).min(range.end)).collect()
}

/// Images `G_n(z)` for `n` in `range` (outer index) and each boundary unit
/// vector `z` (inner index).
fn boundary_images(seq: &MobiusSequence, units: &[Vec<f64>], range: Range<usize>) -> Vec<Vec<Vec<f64>>> {
    chunked(range)
        .into_par_iter()
        .map(|r| {
            let mut out = Vec::with_capacity(r.len());
            seq.for_each_in(r, &mut |_, g| {
                out.push(units.iter().map(|u| normalized(&g.apply_ball(u, true))).collect::<Vec<_>>());
            });
            out
        })
        .flatten()
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GeneralConvergence {
    Converges(IdealPoint),
    No,
    Undecided,
}

/// Ideal convergence of the orbit `G_n(ȷ)`. `Converges(x)` when the final
/// quarter has chordal diameter below `tol` and stays within `tol` of the
/// sphere; `No` when some final-quarter term is farther than
/// `max(tol, DEFAULT_TOL_HI)` from the sphere or the final quarter spreads
/// wider than that.
pub fn general_convergence_test(seq: &MobiusSequence, n: usize, tol: f64) -> GeneralConvergence {
    assert!(n >= 1 && n <= seq.len(), "general_convergence_test: N = {n} outside 1..={}", seq.len());
    let dim = seq.dim();
    let origin = vec![0.0; dim];
    let mut pts: Vec<Vec<f64>> = Vec::new();
    seq.for_each_in(final_quarter_start(n)..n + 1, &mut |_, g| pts.push(g.apply_ball(&origin, false)));
    let depth = pts.iter().map(|p| 1.0 - norm(p)).fold(0.0, f64::max);
    let diam = diameter(&pts);
    if diam < tol && depth < tol {
        let mut c = vec![0.0; dim];
        for p in &pts {
            for (ci, pi) in c.iter_mut().zip(p) {
                *ci += pi;
            }
        }
        return GeneralConvergence::Converges(IdealPoint::Sphere(normalized(&c)));
    }
    let hi = tol.max(DEFAULT_TOL_HI);
    if depth > hi || diam > hi {
        return GeneralConvergence::No;
    }
    GeneralConvergence::Undecided
}

fn diameter(pts: &[Vec<f64>]) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            best = best.max(edist(&pts[i], &pts[j]));
        }
    }
    best
}

/// Whether the diameter of `pts` is below `tol`, with early exits.
fn diameter_below(pts: &[&Vec<f64>], tol: f64) -> bool {
    let Some(first) = pts.first() else { return true };
    let far = pts.iter().map(|p| edist(p, first)).fold(0.0, f64::max);
    if far >= tol {
        return false;
    }
    if 2.0 * far < tol {
        return true;
    }
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if edist(pts[i], pts[j]) >= tol {
                return false;
            }
        }
    }
    true
}

/// A pair of indices in `lo..=hi` with distance above `tol`, if any.
fn far_pair(pts: &[Vec<f64>], lo: usize, hi: usize, tol: f64) -> Option<(usize, usize)> {
    for j in lo + 1..=hi {
        if edist(&pts[lo], &pts[j]) > tol {
            return Some((lo, j));
        }
    }
    for i in lo + 1..=hi {
        for j in i + 1..=hi {
            if edist(&pts[i], &pts[j]) > tol {
                return Some((i, j));
            }
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PointStatus {
    Convergent(IdealPoint),
    Divergent,
    Undecided,
}

impl PointStatus {
    pub fn name(&self) -> &'static str {
        match self {
            PointStatus::Convergent(_) => "Convergent",
            PointStatus::Divergent => "Divergent",
            PointStatus::Undecided => "Undecided",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointClassification {
    pub point: IdealPoint,
    pub status: PointStatus,
    /// Chordal diameter of the final-quarter images.
    pub tail_diameter: f64,
}

/// Classify each sample by the tail of `(G_n(z))`, `n ≤ N`.
pub fn classify_boundary(
    seq: &MobiusSequence,
    samples: &[IdealPoint],
    n: usize,
    tol_lo: f64,
    tol_hi: f64,
) -> Result<Vec<PointClassification>> {
    if !(tol_lo < tol_hi) {
        return Err(Error::InvalidInput("tol_lo must be below tol_hi".into()));
    }
    if n == 0 || n > seq.len() {
        return Err(Error::InvalidInput(format!("N = {n} outside 1..={}", seq.len())));
    }
    if let Some(s) = samples.iter().find(|s| s.dim() != seq.dim()) {
        return Err(Error::DimensionMismatch { expected: seq.dim(), got: s.dim() });
    }
    let units: Vec<Vec<f64>> = samples.iter().map(|s| s.unit()).collect();
    let images = boundary_images(seq, &units, final_half_start(n)..n + 1);
    Ok(samples
        .par_iter()
        .enumerate()
        .map(|(s, z)| {
            let orbit: Vec<Vec<f64>> = images.iter().map(|row| row[s].clone()).collect();
            let (verdict, tail_diameter) = classify_orbit(&orbit, n, tol_lo, tol_hi);
            let status = match verdict {
                TailVerdict::Convergent => {
                    PointStatus::Convergent(IdealPoint::Sphere(orbit.last().unwrap().clone()).to_model(z.model()))
                }
                TailVerdict::Divergent => PointStatus::Divergent,
                TailVerdict::Undecided => PointStatus::Undecided,
            };
            PointClassification { point: z.clone(), status, tail_diameter }
        })
        .collect())
}

/// First index of the final half `[⌈N/2⌉, N]`.
pub fn final_half_start(n: usize) -> usize {
    n.div_ceil(2).max(1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailVerdict {
    Convergent,
    Divergent,
    Undecided,
}

/// Tail rule shared by all orbit classifiers. `orbit` holds the terms with
/// indices `final_half_start(n)..=n`. Returns the verdict and the diameter
/// of the final quarter.
pub fn classify_orbit(orbit: &[Vec<f64>], n: usize, tol_lo: f64, tol_hi: f64) -> (TailVerdict, f64) {
    let half = final_half_start(n);
    assert_eq!(orbit.len(), n + 1 - half, "orbit must cover the final half");
    let tail_part = &orbit[final_quarter_start(n) - half..];
    let tail: Vec<&Vec<f64>> = tail_part.iter().collect();
    let tail_diameter = diameter(tail_part);
    let verdict = if diameter_below(&tail, tol_lo) {
        TailVerdict::Convergent
    } else if every_window_spreads(orbit, n.div_ceil(10).max(1), tol_hi) {
        TailVerdict::Divergent
    } else {
        TailVerdict::Undecided
    };
    (verdict, tail_diameter)
}

fn every_window_spreads(orbit: &[Vec<f64>], window: usize, tol: f64) -> bool {
    if orbit.len() < window {
        return false;
    }
    let mut pair: Option<(usize, usize)> = None;
    for start in 0..=orbit.len() - window {
        let end = start + window - 1;
        if let Some((i, j)) = pair {
            if i >= start && j <= end {
                continue;
            }
        }
        match far_pair(orbit, start, end, tol) {
            Some(p) => pair = Some(p),
            None => return false,
        }
    }
    true
}

/// CSV: sample ball coordinates, status, limit coordinates (empty unless
/// Convergent) and tail diameter.
pub fn classifications_to_csv(rows: &[PointClassification]) -> String {
    let dim = rows.first().map(|r| r.point.dim()).unwrap_or(0);
    let mut out = String::new();
    let mut head: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    head.push("status".into());
    head.extend((0..dim).map(|i| format!("limit{i}")));
    head.push("tail_diameter".into());
    out.push_str(&head.join(","));
    out.push('\n');
    for r in rows {
        let mut cols: Vec<String> = r.point.unit().into_iter().map(g17).collect();
        cols.push(r.status.name().into());
        match &r.status {
            PointStatus::Convergent(y) => cols.extend(y.unit().into_iter().map(g17)),
            _ => cols.extend((0..dim).map(|_| String::new())),
        }
        cols.push(g17(r.tail_diameter));
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AebischerParams {
    pub conical: ConicalConfig,
    pub tol_lo: f64,
    pub tol_hi: f64,
    /// Tolerance for the general convergence precondition.
    pub convergence_tol: f64,
}

impl AebischerParams {
    pub fn new(conical: ConicalConfig) -> Self {
        Self { conical, tol_lo: DEFAULT_TOL_LO, tol_hi: DEFAULT_TOL_HI, convergence_tol: DEFAULT_TOL_HI }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AebischerRow {
    pub classification: PointClassification,
    pub conical: ConicalStatus,
    /// `None` when either side is Undecided.
    pub agrees: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AebischerReport {
    pub limit: IdealPoint,
    pub rows: Vec<AebischerRow>,
    pub decided: usize,
    pub agreements: usize,
}

impl AebischerReport {
    pub fn mismatches(&self) -> usize {
        self.decided - self.agreements
    }

    /// Fraction of decided samples that agree (1 when none are decided).
    pub fn agreement(&self) -> f64 {
        if self.decided == 0 {
            1.0
        } else {
            self.agreements as f64 / self.decided as f64
        }
    }
}

/// Compare the set of divergence of `seq` with the conical limit set of its
/// inverse orbit. Divergent samples and samples converging to a limit other
/// than the general limit `x` should be Accepted; samples converging to `x`
/// should be Rejected.
pub fn aebischer_crosscheck(seq: &MobiusSequence, samples: &[IdealPoint], params: &AebischerParams) -> Result<AebischerReport> {
    let n = params.conical.n;
    let limit = match general_convergence_test(seq, n, params.convergence_tol) {
        GeneralConvergence::Converges(x) => x,
        _ => return Err(Error::NotGenerallyConvergent),
    };
    let classes = classify_boundary(seq, samples, n, params.tol_lo, params.tol_hi)?;
    let verdicts = conical_estimate(&seq.inverse_orbit(), samples, &params.conical)?;
    let mut decided = 0;
    let mut agreements = 0;
    let rows = classes
        .into_iter()
        .zip(verdicts)
        .map(|(c, v)| {
            let expected_accept = match &c.status {
                PointStatus::Divergent => Some(true),
                PointStatus::Convergent(y) => Some(chordal(y, &limit) > params.tol_hi),
                PointStatus::Undecided => None,
            };
            let got = match v.status {
                ConicalStatus::Accepted => Some(true),
                ConicalStatus::Rejected => Some(false),
                ConicalStatus::Undecided => None,
            };
            let agrees = match (expected_accept, got) {
                (Some(a), Some(b)) => {
                    decided += 1;
                    if a == b {
                        agreements += 1;
                    }
                    Some(a == b)
                }
                _ => None,
            };
            AebischerRow { classification: c, conical: v.status, agrees }
        })
        .collect();
    Ok(AebischerReport { limit, rows, decided, agreements })
}

struct ConicalDataSource {
    points: PointSequence,
}

impl IsometrySource for ConicalDataSource {
    fn len(&self) -> usize {
        self.points.len()
    }
    fn dim(&self) -> usize {
        self.points.dim()
    }
    fn term(&self, n: usize) -> Isometry {
        conical_data_term(&self.points.point(n))
    }
    fn for_each_in(&self, range: Range<usize>, f: &mut dyn FnMut(usize, &Isometry)) {
        self.points.for_each_in(range, &mut |n, p| f(n, &conical_data_term(p)));
    }
}

/// `G = R ∘ T_z` with `R` the rotation taking `-z/|z|` to `e₀`, so that
/// `G⁻¹(ȷ) = z` and `G(ȷ) = |z| e₀`.
pub fn conical_data_term(z: &ModelPoint) -> Isometry {
    let zb = z.to_ball().expect("conical data point not representable in the ball");
    let zc = zb.coords();
    let dim = zc.len();
    let r = norm(zc);
    if r == 0.0 {
        return Isometry::identity(dim);
    }
    let mut e0 = vec![0.0; dim];
    e0[0] = 1.0;
    let rot = rotation_taking(&scale(zc, -1.0 / r), &e0);
    let mut word = vec![Primitive::BallTransvection { point: zc.to_vec() }];
    word.extend(rot.word().iter().cloned());
    Isometry::from_word(dim, word).expect("valid conical data term")
}

/// The Möbius sequence whose set of divergence is the conical limit set of
/// `z_seq` (away from one exceptional point).
pub fn from_conical_data(z_seq: &PointSequence) -> MobiusSequence {
    MobiusSequence::new(ConicalDataSource { points: z_seq.clone() })
}

struct DenseSource {
    points: PointSequence,
    /// Cumulative block ends: block `n` covers `ends[n-2]+1 ..= ends[n-1]`.
    ends: Vec<usize>,
}

impl DenseSource {
    fn locate(&self, idx: usize) -> (usize, usize) {
        let b = self.ends.partition_point(|&e| e < idx);
        let start = if b == 0 { 0 } else { self.ends[b - 1] };
        (b + 1, idx - start - 1)
    }
}

impl IsometrySource for DenseSource {
    fn len(&self) -> usize {
        *self.ends.last().unwrap_or(&0)
    }
    fn dim(&self) -> usize {
        self.points.dim()
    }
    fn term(&self, idx: usize) -> Isometry {
        let (block, i) = self.locate(idx);
        let (center, delta) = stabilizer_resolution(&self.points.point(block), block).expect("interior point");
        dense_term(&center, delta, i)
    }
    fn for_each_in(&self, range: Range<usize>, f: &mut dyn FnMut(usize, &Isometry)) {
        let mut cached: Option<(usize, Vec<f64>, f64)> = None;
        for idx in range {
            let (block, i) = self.locate(idx);
            if cached.as_ref().map(|c| c.0) != Some(block) {
                let (c, d) = stabilizer_resolution(&self.points.point(block), block).expect("interior point");
                cached = Some((block, c, d));
            }
            let (_, c, d) = cached.as_ref().unwrap();
            f(idx, &dense_term(c, *d, i));
        }
    }
}

/// `M_i ∘ H` with `H = T_{-x}` sending `ȷ` to `x` and `M_i = T_x⁻¹ O_i T_x`;
/// since `T_x ∘ T_{-x}` is the identity this is `T_{-x} ∘ O_i`.
fn dense_term(center: &[f64], delta: f64, i: usize) -> Isometry {
    let rows = orthogonal_net_element(center.len(), delta, i);
    let word = vec![Primitive::OrthogonalMap { rows }, Primitive::BallTransvection { point: scale(center, -1.0) }];
    Isometry::from_word(center.len(), word).expect("valid dense term")
}

/// Interleave, for each `n`, the block `M_{n,1}∘H_n, …, M_{n,k(n)}∘H_n`
/// where `H_n` sends `ȷ` to `x_n` and `M_{n,i}` run over
/// [`stabilizer_net`](crate::mobius::stabilizer_net)`(x_n, n)`. The result
/// converges generally to `lim x_n` but diverges at every boundary point.
///
/// Blocks are listed until the total length exceeds `max_len`.
pub fn dense_divergence_generator(x_seq: &PointSequence, max_len: usize) -> Result<MobiusSequence> {
    let mut ends = Vec::new();
    let mut total = 0usize;
    for n in 1..=x_seq.len() {
        let (_, delta) = stabilizer_resolution(&x_seq.point(n), n)?;
        total = total.saturating_add(orthogonal_net_len(x_seq.dim(), delta));
        ends.push(total);
        if total >= max_len {
            break;
        }
    }
    if ends.is_empty() {
        return Err(Error::EmptyResult(0));
    }
    Ok(MobiusSequence::new(DenseSource { points: x_seq.clone(), ends }))
}

/// `(1 - (n+1)^{-p}) u_{n mod k}`: radial approach cycling over the given
/// directions, each of which is then a conical limit point.
pub fn radial_dataset(directions: &[IdealPoint], len: usize, p: i32) -> Result<PointSequence> {
    let dim = directions.first().ok_or(Error::EmptyResult(0))?.dim();
    let units: Vec<Vec<f64>> = directions.iter().map(|d| d.unit()).collect();
    Ok(PointSequence::from_fn(len, Model::Ball, dim, move |n| {
        let r = 1.0 - ((n + 1) as f64).powi(-p);
        ModelPoint::ball(scale(&units[(n - 1) % units.len()], r)).expect("radius below 1")
    }))
}

/// A sequence diverging on the whole sphere: the dense generator over
/// `x_n = (1 - (n+1)^{-p}) e₀`.
pub fn whole_sphere_divergence(dim: usize, p: i32, max_len: usize) -> Result<MobiusSequence> {
    let mut e0 = vec![0.0; dim];
    e0[0] = 1.0;
    let xs = radial_dataset(&[IdealPoint::Sphere(e0)], 4096, p)?;
    dense_divergence_generator(&xs, max_len)
}
