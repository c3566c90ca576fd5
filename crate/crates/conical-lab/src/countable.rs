//! Countable boundary sets at finite resolution.
//!
//! A [`SetOracle`] hands out truncations: a finite list of true set points
//! together with a certificate describing where the rest of the set may
//! hide. The gd operator is probed on a fixed scale/direction net, the rank
//! iteration `E^{k+1} = E^k ∩ gd(E^k)` runs on top of it, and for sets of
//! finite rank [`thm3_construct`] builds a point sequence in the half-space
//! whose conical limit set is the given set.
//!
//! Verdicts are certificates about the true set at the probed scales only:
//! `InGd` needs an enumerated point near every probe (enumerated points are
//! true points), `NotInGd` needs a probe ball in every octave that the
//! oracle certifies empty.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::ops::Range;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fmt::g17;
use crate::geometry::{dist_to_vertical, Model, ModelPoint};
use crate::limits::{PointSequence, SequenceSource};
use crate::vecops::{dist as edist, norm};
use crate::{Error, Result};

/// Enumerations larger than this are refused.
pub const MAX_POINTS: usize = 1_000_000;
/// Default ε list for gd probes.
pub const DEFAULT_EPS: [f64; 4] = [0.5, 0.25, 0.125, 0.0625];
/// A point is depth-matched when its self-similar scale is at least this
/// multiple of the largest probe radius and four times this multiple of
/// the smallest. Calibrated on the first self-similar set: below it the
/// probes reach the gaps around the point's own copy.
pub const MATCH_FACTOR: f64 = 4.0;

// Hull of the first self-similar set: sup A = f_1(sup A) gives 4/7.
const HULL_A: f64 = 4.0 / 7.0;
// Hull of the second: sup B = g_1(sup B) gives 8/31.
const HULL_B: f64 = 8.0 / 31.0;

// ---------------------------------------------------------------------------
// Spatial helpers

#[derive(Clone, Debug)]
struct IntervalIndex {
    lo: Vec<f64>,
    hi_max: Vec<f64>,
}

impl IntervalIndex {
    fn new(mut iv: Vec<(f64, f64)>) -> Self {
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        let lo = iv.iter().map(|p| p.0).collect();
        let mut hi_max = Vec::with_capacity(iv.len());
        let mut m = f64::NEG_INFINITY;
        for &(_, h) in &iv {
            m = m.max(h);
            hi_max.push(m);
        }
        Self { lo, hi_max }
    }

    /// Some closed interval meets the open interval `(a, b)`.
    fn meets_open(&self, a: f64, b: f64) -> bool {
        let k = self.lo.partition_point(|&l| l < b);
        k > 0 && self.hi_max[k - 1] > a
    }
}

#[derive(Clone, Debug)]
enum Near {
    Line(Vec<f64>),
    Cloud(Vec<Vec<f64>>),
    Product(Arc<Near>, usize, Arc<Near>),
}

impl Near {
    fn build(dim: usize, points: &[Vec<f64>]) -> Near {
        if dim == 1 {
            let mut xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            Near::Line(xs)
        } else {
            Near::Cloud(points.to_vec())
        }
    }

    fn distance(&self, v: &[f64]) -> f64 {
        match self {
            Near::Line(xs) => {
                let x = v[0];
                let k = xs.partition_point(|&p| p < x);
                let mut d = f64::INFINITY;
                if k < xs.len() {
                    d = d.min(xs[k] - x);
                }
                if k > 0 {
                    d = d.min(x - xs[k - 1]);
                }
                d
            }
            Near::Cloud(ps) => ps.iter().map(|p| edist(p, v)).fold(f64::INFINITY, f64::min),
            Near::Product(a, m, b) => a.distance(&v[..*m]).hypot(b.distance(&v[*m..])),
        }
    }
}

/// Where the unenumerated part of the set may lie.
#[derive(Clone, Debug)]
enum Cover {
    /// The enumeration is the whole set.
    Exact(Arc<Near>),
    /// Enumeration plus closed intervals on the line.
    Intervals(Arc<Near>, IntervalIndex),
    /// Dense in `[lo, hi]` on the line.
    Dense(f64, f64),
    Product(Arc<Cover>, usize, Arc<Cover>),
}

impl Cover {
    /// Certifies that the open ball `B(v, r)` misses the true set.
    fn ball_is_empty(&self, v: &[f64], r: f64) -> bool {
        match self {
            Cover::Exact(n) => n.distance(v) >= r,
            Cover::Intervals(n, iv) => n.distance(v) >= r && !iv.meets_open(v[0] - r, v[0] + r),
            Cover::Dense(lo, hi) => v[0] + r <= *lo || v[0] - r >= *hi,
            Cover::Product(a, m, b) => a.ball_is_empty(&v[..*m], r) || b.ball_is_empty(&v[*m..], r),
        }
    }
}

// ---------------------------------------------------------------------------
// Truncations and oracles

/// A finite view of a set at a given depth.
#[derive(Clone, Debug)]
pub struct Truncation {
    name: String,
    depth: usize,
    dim: usize,
    eta: f64,
    points: Vec<Vec<f64>>,
    scales: Vec<f64>,
    near: Arc<Near>,
    cover: Arc<Cover>,
}

impl Truncation {
    fn finish(name: String, depth: usize, dim: usize, eta: f64, points: Vec<Vec<f64>>, scales: Vec<f64>, cover: impl FnOnce(Arc<Near>) -> Cover) -> Self {
        let near = Arc::new(Near::build(dim, &points));
        let cover = Arc::new(cover(near.clone()));
        Self { name, depth, dim, eta, points, scales, near, cover }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `η`: every true point lies within this distance of an enumerated one.
    pub fn resolution(&self) -> f64 {
        self.eta
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Self-similar scale of each enumerated point (`∞` for sets without
    /// one).
    pub fn local_scales(&self) -> &[f64] {
        &self.scales
    }

    /// Euclidean distance from `v` to the enumeration.
    pub fn nearest_distance(&self, v: &[f64]) -> f64 {
        self.near.distance(v)
    }

    /// The open ball `B(v, r)` is certified to miss the true set.
    pub fn ball_is_empty(&self, v: &[f64], r: f64) -> bool {
        self.cover.ball_is_empty(v, r)
    }

    /// The sub-enumeration at `indices`. Emptiness certificates are
    /// inherited, which is sound because the true subset lies in the true
    /// parent set.
    pub fn induced(&self, indices: &[usize]) -> Truncation {
        let points: Vec<Vec<f64>> = indices.iter().map(|&i| self.points[i].clone()).collect();
        let scales = indices.iter().map(|&i| self.scales[i]).collect();
        let near = Arc::new(Near::build(self.dim, &points));
        Truncation {
            name: self.name.clone(),
            depth: self.depth,
            dim: self.dim,
            eta: self.eta,
            points,
            scales,
            near,
            cover: self.cover.clone(),
        }
    }

    /// One row per enumerated point: coordinates, then the local scale.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for i in 0..self.dim {
            s.push_str(&format!("x{i},"));
        }
        s.push_str("scale\n");
        for (p, sc) in self.points.iter().zip(&self.scales) {
            for x in p {
                s.push_str(&g17(*x));
                s.push(',');
            }
            s.push_str(&if sc.is_finite() { g17(*sc) } else { "inf".into() });
            s.push('\n');
        }
        s
    }
}

/// A countable subset of `R^m` known through finite truncations.
pub trait SetOracle: Send + Sync {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    /// `η(d)`, strictly decreasing to 0.
    fn resolution(&self, depth: usize) -> f64;
    fn truncate(&self, depth: usize) -> Result<Truncation>;
    fn enumerate(&self, depth: usize) -> Result<Vec<Vec<f64>>> {
        Ok(self.truncate(depth)?.points)
    }
}

fn dedup_points(points: Vec<Vec<f64>>, scales: Vec<f64>) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut seen = HashSet::new();
    let mut p_out = Vec::with_capacity(points.len());
    let mut s_out = Vec::with_capacity(points.len());
    for (p, s) in points.into_iter().zip(scales) {
        let key: Vec<u64> = p.iter().map(|x| (x + 0.0).to_bits()).collect();
        if seen.insert(key) {
            p_out.push(p);
            s_out.push(s);
        }
    }
    (p_out, s_out)
}

/// A finite set, enumerated exactly at every depth.
#[derive(Clone, Debug)]
pub struct FiniteSet {
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl FiniteSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).ok_or(Error::EmptyResult(0))?;
        if dim == 0 {
            return Err(Error::InvalidInput("points must have at least one coordinate".into()));
        }
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
        }
        if points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("points must be finite".into()));
        }
        Ok(Self { dim, points })
    }
}

impl SetOracle for FiniteSet {
    fn name(&self) -> String {
        format!("finite({})", self.points.len())
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn resolution(&self, depth: usize) -> f64 {
        1e-12 * 0.5f64.powi(depth as i32)
    }
    fn truncate(&self, depth: usize) -> Result<Truncation> {
        if self.points.len() > MAX_POINTS {
            return Err(Error::DepthTooLarge(MAX_POINTS));
        }
        let (points, scales) = dedup_points(self.points.clone(), vec![f64::INFINITY; self.points.len()]);
        Ok(Truncation::finish(self.name(), depth, self.dim, self.resolution(depth), points, scales, Cover::Exact))
    }
}

/// Which of the two self-similar sets: generators `1/(2n) + x/(8n²)` or
/// `sgn(n)/4^{|n|} + x/(8·4^{|n|})`, `n ∈ Z∖{0}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelfSimKind {
    A,
    B,
}

impl SelfSimKind {
    /// `(offset, ratio)` of the generator with index `n`.
    pub fn generator(self, n: i64) -> (f64, f64) {
        let m = n.unsigned_abs() as f64;
        let s = n.signum() as f64;
        match self {
            SelfSimKind::A => (s / (2.0 * m), 1.0 / (8.0 * m * m)),
            SelfSimKind::B => {
                let q = 0.25f64.powf(m);
                (s * q, q / 8.0)
            }
        }
    }

    fn hull(self) -> f64 {
        match self {
            SelfSimKind::A => HULL_A,
            SelfSimKind::B => HULL_B,
        }
    }

    /// Image of the composition `h_{n_1} ∘ … ∘ h_{n_k}` at 0 with its ratio.
    pub fn word_map(self, word: &[i64]) -> (f64, f64) {
        let (mut off, mut lam) = (0.0, 1.0);
        for &n in word {
            let (c, r) = self.generator(n);
            off += lam * c;
            lam *= r;
        }
        (off, lam)
    }
}

/// Word truncation shared by both self-similar sets: a child `n` of the
/// word `w` is kept while the first set's offset `λ_w / (2|n|)` is at
/// least `τ(d) = 2^{-(d+4)}`. Using one rule for both sets keeps the
/// enumerations in word-for-word correspondence.
pub fn word_threshold(depth: usize) -> f64 {
    0.5f64.powi(depth as i32 + 4)
}

/// Words kept at `depth`, shortest first; children in the order
/// `1, -1, 2, -2, …`.
pub fn selfsim_words(depth: usize) -> Result<Vec<Vec<i64>>> {
    let tau = word_threshold(depth);
    let mut out: Vec<(Vec<i64>, f64)> = vec![(Vec::new(), 1.0)];
    let mut head = 0;
    while head < out.len() {
        let (w, lam) = out[head].clone();
        head += 1;
        let nmax = (lam / (2.0 * tau)).floor() as i64;
        for n in 1..=nmax {
            for s in [n, -n] {
                if out.len() >= MAX_POINTS {
                    return Err(Error::DepthTooLarge(MAX_POINTS));
                }
                let mut c = w.clone();
                c.push(s);
                out.push((c, lam / (8.0 * (n * n) as f64)));
            }
        }
    }
    Ok(out.into_iter().map(|p| p.0).collect())
}

/// One of the two self-similar sets.
#[derive(Clone, Copy, Debug)]
pub struct SelfSim {
    pub kind: SelfSimKind,
}

impl SelfSim {
    /// `(word, h_w(0))` for every kept word, without deduplication.
    pub fn word_points(&self, depth: usize) -> Result<Vec<(Vec<i64>, f64)>> {
        Ok(selfsim_words(depth)?
            .into_iter()
            .map(|w| {
                let x = self.kind.word_map(&w).0;
                (w, x)
            })
            .collect())
    }
}

impl SetOracle for SelfSim {
    fn name(&self) -> String {
        match self.kind {
            SelfSimKind::A => "selfsimA".into(),
            SelfSimKind::B => "selfsimB".into(),
        }
    }
    fn dim(&self) -> usize {
        1
    }
    fn resolution(&self, depth: usize) -> f64 {
        // An omitted tail starts with a child of offset < τ; the hull of
        // the first set adds at most a factor 8/7. The second set's
        // offsets are never larger.
        word_threshold(depth) * 8.0 / 7.0
    }
    fn truncate(&self, depth: usize) -> Result<Truncation> {
        let tau = word_threshold(depth);
        let words = selfsim_words(depth)?;
        let mut points = Vec::with_capacity(words.len());
        let mut scales = Vec::with_capacity(words.len());
        let mut hulls = Vec::with_capacity(words.len());
        let hull = self.kind.hull();
        // Omitted children get their own hull intervals for a while so that
        // the gaps between them can be certified; the rest share one.
        let extra = match self.kind {
            SelfSimKind::A => 32.0,
            SelfSimKind::B => 600.0,
        };
        let mut push = |x: f64, off: f64, half: f64, sign: f64| {
            let c = x + sign * off;
            let pad = half * 1e-12 + c.abs() * 4.0 * f64::EPSILON;
            hulls.push((c - half - pad, c + half + pad));
        };
        for w in &words {
            let (x, lam) = self.kind.word_map(w);
            let lam_a = SelfSimKind::A.word_map(w).1;
            // Smallest omitted child index; every larger one is omitted too.
            let n0 = (lam_a / (2.0 * tau)).floor() + 1.0;
            // Below this offset the children are indistinguishable from x.
            let negligible = 1e-17 * x.abs().max(1e-290);
            let mut n = n0;
            loop {
                let (c, r) = self.kind.generator(n as i64);
                let (off, half) = (lam * c, lam * r * hull);
                if n - n0 >= extra || off < negligible {
                    push(x, 0.0, off + half, 1.0);
                    break;
                }
                push(x, off, half, 1.0);
                push(x, off, half, -1.0);
                n += 1.0;
            }
            points.push(vec![x]);
            scales.push(lam);
        }
        let (points, scales) = dedup_points(points, scales);
        let iv = IntervalIndex::new(hulls);
        Ok(Truncation::finish(self.name(), depth, 1, self.resolution(depth), points, scales, |n| Cover::Intervals(n, iv)))
    }
}

/// `∪ ∂J_n`: endpoints of the middle-thirds construction intervals.
#[derive(Clone, Copy, Debug, Default)]
pub struct CantorAccessible;

impl CantorAccessible {
    /// The closed intervals of `J_depth`, as exact rationals over
    /// `3^{depth-1}`.
    fn intervals(depth: usize) -> Result<(Vec<(u64, u64)>, f64)> {
        if depth == 0 {
            return Err(Error::InvalidInput("Cantor depth starts at 1".into()));
        }
        if depth >= 20 {
            return Err(Error::DepthTooLarge(MAX_POINTS));
        }
        let unit = 3u64.pow(depth as u32 - 1);
        let mut iv = vec![(0u64, unit)];
        for _ in 1..depth {
            iv = iv.into_iter().flat_map(|(lo, len)| [(lo, len / 3), (lo + 2 * len / 3, len / 3)]).collect();
        }
        Ok((iv, unit as f64))
    }
}

impl SetOracle for CantorAccessible {
    fn name(&self) -> String {
        "cantor".into()
    }
    fn dim(&self) -> usize {
        1
    }
    fn resolution(&self, depth: usize) -> f64 {
        // Half the length of a J_depth interval.
        0.5 * 3f64.powi(1 - depth as i32)
    }
    fn truncate(&self, depth: usize) -> Result<Truncation> {
        let (iv, unit) = Self::intervals(depth)?;
        let mut points = Vec::with_capacity(2 * iv.len());
        let mut hulls = Vec::with_capacity(iv.len());
        for &(lo, len) in &iv {
            let (a, b) = (lo as f64 / unit, (lo + len) as f64 / unit);
            points.push(vec![a]);
            points.push(vec![b]);
            hulls.push((a, b));
        }
        let scales = vec![f64::INFINITY; points.len()];
        let ivx = IntervalIndex::new(hulls);
        Ok(Truncation::finish(self.name(), depth, 1, self.resolution(depth), points, scales, |n| Cover::Intervals(n, ivx)))
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Rationals in `[0, 1]`; depth is the largest denominator.
#[derive(Clone, Copy, Debug, Default)]
pub struct Rationals01;

impl SetOracle for Rationals01 {
    fn name(&self) -> String {
        "rationals01".into()
    }
    fn dim(&self) -> usize {
        1
    }
    fn resolution(&self, depth: usize) -> f64 {
        // Consecutive Farey fractions of order Q are at most 1/Q apart.
        0.5 / depth.max(1) as f64
    }
    fn truncate(&self, depth: usize) -> Result<Truncation> {
        let qmax = depth.max(1) as u64;
        let mut xs = Vec::new();
        for q in 1..=qmax {
            for a in 0..=q {
                if gcd(a, q) == 1 {
                    if xs.len() >= MAX_POINTS {
                        return Err(Error::DepthTooLarge(MAX_POINTS));
                    }
                    xs.push(a as f64 / q as f64);
                }
            }
        }
        xs.sort_by(f64::total_cmp);
        let points: Vec<Vec<f64>> = xs.into_iter().map(|x| vec![x]).collect();
        let scales = vec![f64::INFINITY; points.len()];
        Ok(Truncation::finish(self.name(), depth, 1, self.resolution(depth), points, scales, |_| Cover::Dense(0.0, 1.0)))
    }
}

/// Boundary projection `{a/q : 0 < a < q ≤ qmax}` of a truncated `J(α)`.
/// A finite set, so it is enumerated exactly.
#[derive(Clone, Copy, Debug)]
pub struct JAlphaProjection {
    pub alpha: f64,
    pub qmax: u64,
}

impl SetOracle for JAlphaProjection {
    fn name(&self) -> String {
        format!("jalpha({},{})", g17(self.alpha), self.qmax)
    }
    fn dim(&self) -> usize {
        1
    }
    fn resolution(&self, depth: usize) -> f64 {
        1e-12 * 0.5f64.powi(depth as i32)
    }
    fn truncate(&self, depth: usize) -> Result<Truncation> {
        let mut xs = Vec::new();
        for q in 2..=self.qmax {
            for a in 1..q {
                if gcd(a, q) == 1 {
                    if xs.len() >= MAX_POINTS {
                        return Err(Error::DepthTooLarge(MAX_POINTS));
                    }
                    xs.push(vec![a as f64 / q as f64]);
                }
            }
        }
        FiniteSet::new(xs)?.truncate(depth).map(|mut t| {
            t.name = self.name();
            t
        })
    }
}

/// `E₁ × E₂ ⊂ R^{m₁+m₂}`.
pub struct Product {
    pub first: Box<dyn SetOracle>,
    pub second: Box<dyn SetOracle>,
}

impl SetOracle for Product {
    fn name(&self) -> String {
        format!("{}x{}", self.first.name(), self.second.name())
    }
    fn dim(&self) -> usize {
        self.first.dim() + self.second.dim()
    }
    fn resolution(&self, depth: usize) -> f64 {
        self.first.resolution(depth).hypot(self.second.resolution(depth))
    }
    fn truncate(&self, depth: usize) -> Result<Truncation> {
        let a = self.first.truncate(depth)?;
        let b = self.second.truncate(depth)?;
        if a.len().saturating_mul(b.len()) > MAX_POINTS {
            return Err(Error::DepthTooLarge(MAX_POINTS));
        }
        let mut points = Vec::with_capacity(a.len() * b.len());
        let mut scales = Vec::with_capacity(a.len() * b.len());
        for (p, sp) in a.points.iter().zip(&a.scales) {
            for (q, sq) in b.points.iter().zip(&b.scales) {
                let mut x = p.clone();
                x.extend_from_slice(q);
                points.push(x);
                scales.push(sp.min(*sq));
            }
        }
        let m = a.dim;
        Ok(Truncation {
            name: self.name(),
            depth,
            dim: a.dim + b.dim,
            eta: self.resolution(depth),
            points,
            scales,
            near: Arc::new(Near::Product(a.near.clone(), m, b.near.clone())),
            cover: Arc::new(Cover::Product(a.cover.clone(), m, b.cover.clone())),
        })
    }
}

/// Named example sets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ExampleSet {
    CantorAccessible,
    SelfSimA,
    SelfSimB,
    Rationals01,
    JAlphaProjection { alpha: f64, qmax: u64 },
}

impl ExampleSet {
    /// Parses `cantor`, `selfsimA`, `selfsimB`, `rationals01` and
    /// `jalpha:<alpha>:<qmax>` (case-insensitive).
    pub fn parse(s: &str) -> Result<Self> {
        let l = s.to_ascii_lowercase();
        match l.as_str() {
            "cantor" | "cantoraccessible" => return Ok(ExampleSet::CantorAccessible),
            "selfsima" => return Ok(ExampleSet::SelfSimA),
            "selfsimb" => return Ok(ExampleSet::SelfSimB),
            "rationals01" | "rationals" => return Ok(ExampleSet::Rationals01),
            _ => {}
        }
        if let Some(rest) = l.strip_prefix("jalpha:") {
            let mut it = rest.split(':');
            let alpha = it.next().and_then(|a| a.parse::<f64>().ok());
            let qmax = it.next().and_then(|q| q.parse::<u64>().ok());
            if let (Some(alpha), Some(qmax), None) = (alpha, qmax, it.next()) {
                return Ok(ExampleSet::JAlphaProjection { alpha, qmax });
            }
        }
        Err(Error::InvalidInput(format!("unknown example set {s:?}")))
    }

    pub fn oracle(self) -> Box<dyn SetOracle> {
        match self {
            ExampleSet::CantorAccessible => Box::new(CantorAccessible),
            ExampleSet::SelfSimA => Box::new(SelfSim { kind: SelfSimKind::A }),
            ExampleSet::SelfSimB => Box::new(SelfSim { kind: SelfSimKind::B }),
            ExampleSet::Rationals01 => Box::new(Rationals01),
            ExampleSet::JAlphaProjection { alpha, qmax } => Box::new(JAlphaProjection { alpha, qmax }),
        }
    }
}

/// Truncation of a named example set.
pub fn build_example_set(name: ExampleSet, depth: usize) -> Result<Truncation> {
    name.oracle().truncate(depth)
}

// ---------------------------------------------------------------------------
// gd probes

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdParams {
    /// Strictly descending, inside `(0, 1)`.
    pub eps_list: Vec<f64>,
    /// Smallest probe radius; `None` means `4η`.
    pub scale_min: Option<f64>,
    /// Number of octaves probed above `scale_min`.
    pub octaves: usize,
    pub radii_per_octave: usize,
}

impl Default for GdParams {
    fn default() -> Self {
        Self { eps_list: DEFAULT_EPS.to_vec(), scale_min: None, octaves: 2, radii_per_octave: 4 }
    }
}

impl GdParams {
    fn validate(&self, e: &Truncation) -> Result<(f64, f64)> {
        if self.eps_list.is_empty() || self.eps_list.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::InvalidInput("eps_list must be nonempty inside (0, 1)".into()));
        }
        if self.eps_list.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidInput("eps_list must be strictly descending".into()));
        }
        if self.octaves == 0 || self.radii_per_octave == 0 {
            return Err(Error::InvalidInput("octaves and radii_per_octave must be positive".into()));
        }
        let floor = 4.0 * e.eta;
        let smin = self.scale_min.unwrap_or(floor);
        if !(smin >= floor * (1.0 - 1e-12)) {
            return Err(Error::ScaleTooFine { scale_min: smin, resolution: e.eta });
        }
        Ok((smin, smin * 2f64.powi(self.octaves as i32)))
    }

    /// Probe radii, octave by octave, ascending from `scale_min`.
    fn radii(&self, smin: f64) -> Vec<Vec<f64>> {
        (0..self.octaves)
            .map(|o| {
                (0..self.radii_per_octave)
                    .map(|i| smin * 2f64.powf(o as f64 + i as f64 / self.radii_per_octave as f64))
                    .collect()
            })
            .collect()
    }
}

/// Probe directions `±e_i`. Axis probes keep the other coordinates of an
/// enumerated point fixed, so on products the verdict factors exactly:
/// both factors InGd iff the product is InGd.
pub fn direction_net(dim: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * dim);
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; dim];
            e[i] = s;
            out.push(e);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GdStatus {
    InGd,
    NotInGd,
    Unresolved,
}

impl GdStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            GdStatus::InGd => "InGd",
            GdStatus::NotInGd => "NotInGd",
            GdStatus::Unresolved => "Unresolved",
        }
    }
}

/// A probe `v` at distance `radius` from `z` whose ball `B(v, ε·radius)`
/// is certified empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdWitness {
    pub radius: f64,
    pub v: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdVerdict {
    pub point: Vec<f64>,
    pub status: GdStatus,
    /// For NotInGd, the ε of the witnesses.
    pub eps: Option<f64>,
    /// One witness per octave for NotInGd.
    pub witnesses: Vec<GdWitness>,
}

fn probe(z: &[f64], r: f64, d: &[f64]) -> Vec<f64> {
    z.iter().zip(d).map(|(a, b)| a + r * b).collect()
}

/// Probes `z ∈ gd(E)` on the scale/direction net.
///
/// InGd: for every ε and every probe `v` some enumerated point lies within
/// `ε|v - z|`. NotInGd: for some ε, every octave holds a probe whose
/// `ε`-ball the oracle certifies empty. Otherwise Unresolved.
pub fn gd_test(e: &Truncation, z: &[f64], params: &GdParams) -> Result<GdVerdict> {
    if z.len() != e.dim {
        return Err(Error::DimensionMismatch { expected: e.dim, got: z.len() });
    }
    let (smin, _) = params.validate(e)?;
    Ok(gd_probe(e, z, params, smin))
}

fn gd_probe(e: &Truncation, z: &[f64], params: &GdParams, smin: f64) -> GdVerdict {
    let dirs = direction_net(e.dim);
    let radii = params.radii(smin);
    let eps_min = *params.eps_list.last().unwrap();
    let in_gd = radii.iter().flatten().all(|&r| {
        dirs.iter().all(|d| {
            let v = probe(z, r, d);
            e.near.distance(&v) < eps_min * edist(&v, z)
        })
    });
    if in_gd {
        return GdVerdict { point: z.to_vec(), status: GdStatus::InGd, eps: None, witnesses: Vec::new() };
    }
    for &eps in &params.eps_list {
        let mut witnesses = Vec::with_capacity(radii.len());
        for octave in &radii {
            let found = octave.iter().rev().find_map(|&r| {
                dirs.iter().find_map(|d| {
                    let v = probe(z, r, d);
                    let rr = edist(&v, z);
                    e.cover.ball_is_empty(&v, eps * rr).then(|| GdWitness { radius: rr, v })
                })
            });
            match found {
                Some(w) => witnesses.push(w),
                None => break,
            }
        }
        if witnesses.len() == radii.len() {
            return GdVerdict { point: z.to_vec(), status: GdStatus::NotInGd, eps: Some(eps), witnesses };
        }
    }
    GdVerdict { point: z.to_vec(), status: GdStatus::Unresolved, eps: None, witnesses: Vec::new() }
}

/// Witnesses of `z ∉ gd(E)` lifted to the half-space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdFailureWitnesses {
    pub eps: f64,
    /// `cosh α = 1/(2ε)`, with ε capped at 1/4 so that `α > 0`.
    pub alpha: f64,
    pub points: Vec<ModelPoint>,
    /// Shadow balls `B(v, t sinh α)`.
    pub shadows: Vec<(Vec<f64>, f64)>,
}

/// `w = (t, v)` with `t = |v - z| / sinh 2α`, so that `ρ(w, δ_z) = 2α` and
/// the shadow `B(v, t sinh α) = B(v, |v - z| / (2 cosh α))` sits inside an
/// empty witness ball.
pub fn gd_failure_witnesses(e: &Truncation, z: &[f64], params: &GdParams) -> Result<GdFailureWitnesses> {
    let verdict = gd_test(e, z, params)?;
    if verdict.status != GdStatus::NotInGd {
        return Err(Error::NoWitness);
    }
    let eps = verdict.eps.expect("NotInGd carries ε");
    let alpha = (1.0 / (2.0 * eps.min(0.25))).acosh();
    let mut points = Vec::new();
    let mut shadows = Vec::new();
    for w in &verdict.witnesses {
        let t = w.radius / (2.0 * alpha).sinh();
        let p = ModelPoint::half_space(t, &w.v)?;
        shadows.push((w.v.clone(), t * alpha.sinh()));
        points.push(p);
    }
    Ok(GdFailureWitnesses { eps, alpha, points, shadows })
}

// ---------------------------------------------------------------------------
// Rank iteration

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankOutcome {
    /// `E^k = ∅`.
    EmptyAtRank(usize),
    /// No depth-matched point of `E^rank` left; `size = |E^{rank+1}|`.
    Stalled { rank: usize, size: usize },
    Exhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub name: String,
    pub depth: usize,
    pub resolution: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub outcome: RankOutcome,
    pub points: Vec<Vec<f64>>,
    /// `β(z)`: the last level containing `z` (1-based).
    pub ranks: Vec<usize>,
    /// Self-similar scale large enough for the probes, see [`MATCH_FACTOR`].
    pub matched: Vec<bool>,
    /// The verdict that removed each point, or its last verdict.
    pub verdicts: Vec<GdVerdict>,
    /// `|E^k|` for `k = 1, 2, …`.
    pub level_sizes: Vec<usize>,
}

impl RankReport {
    /// Indices of `E^k`.
    pub fn level(&self, k: usize) -> Vec<usize> {
        (0..self.points.len()).filter(|&i| self.ranks[i] >= k).collect()
    }

    /// `|E² ∩ M| / |E¹ ∩ M|` over depth-matched points `M`.
    pub fn matched_survival(&self) -> Option<f64> {
        let m = self.matched.iter().filter(|&&b| b).count();
        (m > 0).then(|| {
            let kept = (0..self.points.len()).filter(|&i| self.matched[i] && self.ranks[i] >= 2).count();
            kept as f64 / m as f64
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rank report serializes")
    }
}

/// `E^{k+1} = {z ∈ E^k : gd_test(z) = InGd}` with the test run against the
/// current iterate. Stalls when every depth-matched point survives a step.
pub fn rank_iterate(e: &Truncation, params: &GdParams, max_rank: usize) -> Result<RankReport> {
    if max_rank < 2 {
        return Err(Error::InvalidInput("max_rank must be at least 2".into()));
    }
    let (smin, smax) = params.validate(e)?;
    let n = e.len();
    let floor = (MATCH_FACTOR * smax).max(4.0 * MATCH_FACTOR * smin);
    let matched: Vec<bool> = e.scales.iter().map(|&s| s >= floor).collect();
    let mut ranks = vec![1usize; n];
    let mut verdicts: Vec<Option<GdVerdict>> = vec![None; n];
    let mut current: Vec<usize> = (0..n).collect();
    let mut level_sizes = vec![n];
    let mut outcome = RankOutcome::Exhausted;
    if n == 0 {
        outcome = RankOutcome::EmptyAtRank(1);
    }
    for k in 1..max_rank {
        if current.is_empty() {
            break;
        }
        let view = if k == 1 { e.clone() } else { e.induced(&current) };
        let results: Vec<GdVerdict> = current.par_iter().map(|&i| gd_probe(&view, &e.points[i], params, smin)).collect();
        let mut next = Vec::new();
        for (&i, v) in current.iter().zip(results) {
            if v.status == GdStatus::InGd {
                ranks[i] = k + 1;
                next.push(i);
            }
            verdicts[i] = Some(v);
        }
        level_sizes.push(next.len());
        let matched_here = current.iter().filter(|&&i| matched[i]).count();
        let matched_kept = next.iter().filter(|&&i| matched[i]).count();
        if next.is_empty() {
            outcome = RankOutcome::EmptyAtRank(k + 1);
            break;
        }
        if matched_here > 0 && matched_kept == matched_here {
            outcome = RankOutcome::Stalled { rank: k, size: next.len() };
            break;
        }
        current = next;
    }
    Ok(RankReport {
        name: e.name.clone(),
        depth: e.depth,
        resolution: e.eta,
        scale_min: smin,
        scale_max: smax,
        outcome,
        points: e.points.clone(),
        ranks,
        matched,
        verdicts: verdicts
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                v.unwrap_or_else(|| GdVerdict { point: e.points[i].clone(), status: GdStatus::Unresolved, eps: None, witnesses: Vec::new() })
            })
            .collect(),
        level_sizes,
    })
}

// ---------------------------------------------------------------------------
// The homeomorphism carrying the first self-similar set onto the second

/// Where the recursion for `φ(x)` stopped.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PhiTail {
    /// At a word point (or below double resolution).
    Zero,
    /// In the complementary gap `index` on side `side`, at relative
    /// position `frac`. Gap 0 is `(5/8, 1]`; gap `n ≥ 1` lies between the
    /// images of `[-1, 1]` under the generators `n + 1` and `n`.
    Gap { side: i8, index: f64, frac: f64 },
    /// Outside `[-1, 1]`, where `φ` is the identity.
    Outer(f64),
}

/// `φ(x) = h_{n_1} ∘ … ∘ h_{n_k}(tail)` in the second set's coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiImage {
    pub letters: Vec<i64>,
    pub tail: PhiTail,
}

const PHI_MAX_LEVELS: usize = 64;

fn gap_bounds(kind: SelfSimKind, index: f64) -> (f64, f64) {
    let g = index;
    match (kind, g == 0.0) {
        (SelfSimKind::A, true) => (0.625, 1.0),
        (SelfSimKind::B, true) => (9.0 / 32.0, 1.0),
        (SelfSimKind::A, false) => (0.5 / (g + 1.0) + 0.125 / ((g + 1.0) * (g + 1.0)), 0.5 / g - 0.125 / (g * g)),
        (SelfSimKind::B, false) => (0.25f64.powf(g + 1.0) * 9.0 / 8.0, 0.25f64.powf(g) * 7.0 / 8.0),
    }
}

// Above this the generator index no longer resolves in double precision.
const PHI_EXACT_INDEX: f64 = 4_503_599_627_370_496.0;

/// Structural image of `x` under `φ`.
pub fn phi_image(x: f64) -> PhiImage {
    let mut letters = Vec::new();
    let mut y = x;
    loop {
        if y.abs() > 1.0 {
            return PhiImage { letters, tail: PhiTail::Outer(y) };
        }
        if y == 0.0 || letters.len() == PHI_MAX_LEVELS {
            return PhiImage { letters, tail: PhiTail::Zero };
        }
        let s = y.signum();
        let a = y.abs();
        let guess = 0.5 / a;
        if !guess.is_finite() {
            return PhiImage { letters, tail: PhiTail::Zero };
        }
        if guess < PHI_EXACT_INDEX {
            let n0 = guess.round().max(1.0) as i64;
            let hit = [n0 - 1, n0, n0 + 1].into_iter().filter(|&n| n >= 1).find(|&n| {
                let (c, r) = SelfSimKind::A.generator(n);
                (a - c).abs() <= r
            });
            if let Some(n) = hit {
                let (c, r) = SelfSimKind::A.generator(n);
                letters.push(s as i64 * n);
                y = s * ((a - c) / r).clamp(-1.0, 1.0);
                continue;
            }
        }
        let index = if a > 0.625 {
            0.0
        } else if guess >= PHI_EXACT_INDEX {
            guess.floor()
        } else {
            let mut g = guess.floor().max(1.0);
            // Settle rounding at gap edges.
            while g > 1.0 && a > gap_bounds(SelfSimKind::A, g).1 {
                g -= 1.0;
            }
            while a < gap_bounds(SelfSimKind::A, g).0 {
                g += 1.0;
            }
            g
        };
        let (lo, hi) = gap_bounds(SelfSimKind::A, index);
        // Far out the gap is below double resolution; its index still orders.
        let frac = if hi > lo { ((a - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 };
        return PhiImage { letters, tail: PhiTail::Gap { side: s as i8, index, frac } };
    }
}

impl PhiImage {
    /// The real value in the second set's coordinates.
    pub fn value(&self) -> f64 {
        let mut v = match self.tail {
            PhiTail::Zero => 0.0,
            PhiTail::Outer(y) => y,
            PhiTail::Gap { side, index, frac } => {
                let (lo, hi) = gap_bounds(SelfSimKind::B, index);
                side as f64 * (lo + frac * (hi - lo))
            }
        };
        for &n in self.letters.iter().rev() {
            let (c, r) = SelfSimKind::B.generator(n);
            v = c + r * v;
        }
        v
    }

    /// Order along the line, decided piece by piece without evaluating the
    /// (possibly underflowing) value.
    pub fn structural_cmp(&self, other: &PhiImage) -> Ordering {
        // (side, position) of the piece at level `i`; larger is further
        // right. On the positive side generator n sits at -2n and gap g at
        // -2g-1; the negative side mirrors.
        fn key(img: &PhiImage, i: usize) -> (i8, f64) {
            match img.letters.get(i) {
                Some(&n) => (n.signum() as i8, n.signum() as f64 * -2.0 * n.unsigned_abs() as f64),
                None => match img.tail {
                    PhiTail::Zero => (0, 0.0),
                    PhiTail::Outer(y) => (y.signum() as i8, y.signum() * 1.0),
                    PhiTail::Gap { side, index, .. } => (side, side as f64 * (-2.0 * index - 1.0)),
                },
            }
        }
        let mut i = 0;
        loop {
            let (a, b) = (key(self, i), key(other, i));
            let ord = a.0.cmp(&b.0).then(a.1.total_cmp(&b.1));
            if ord != Ordering::Equal {
                return ord;
            }
            let (la, lb) = (self.letters.get(i), other.letters.get(i));
            if la.is_some() && lb.is_some() {
                i += 1;
                continue;
            }
            return match (self.tail, other.tail) {
                (PhiTail::Gap { side, frac: fa, .. }, PhiTail::Gap { frac: fb, .. }) => {
                    let o = fa.total_cmp(&fb);
                    if side < 0 { o.reverse() } else { o }
                }
                (PhiTail::Outer(ya), PhiTail::Outer(yb)) => ya.total_cmp(&yb),
                _ => Ordering::Equal,
            };
        }
    }
}

/// `φ(x)`: word points `f_w(0)` go to `g_w(0)`, complementary gaps map
/// affinely onto the corresponding gaps, and `φ` is the identity off
/// `[-1, 1]`.
pub fn phi_map(x: f64) -> f64 {
    phi_image(x).value()
}

// ---------------------------------------------------------------------------
// Diophantine point sets

/// `J(α)` on a list of denominators: `(1/q^α, a/q)` for `0 < a < q`,
/// `gcd(a, q) = 1`, ordered by `q` then `a`.
struct JAlphaSource {
    alpha: f64,
    dens: Vec<u64>,
    // offsets[i] = number of points with denominator dens[..i]
    offsets: Vec<usize>,
}

impl JAlphaSource {
    fn locate(&self, n: usize) -> (usize, usize) {
        let i = self.offsets.partition_point(|&o| o < n) - 1;
        (i, n - self.offsets[i])
    }

    fn point_at(&self, q: u64, a: u64) -> ModelPoint {
        let qf = q as f64;
        ModelPoint::half_space(qf.powf(-self.alpha), &[a as f64 / qf]).expect("J(α) point")
    }
}

impl SequenceSource for JAlphaSource {
    fn len(&self) -> usize {
        *self.offsets.last().unwrap()
    }
    fn model(&self) -> Model {
        Model::HalfSpace
    }
    fn dim(&self) -> usize {
        2
    }
    fn point(&self, n: usize) -> ModelPoint {
        let mut out = None;
        self.for_each_in(n..n + 1, &mut |_, p| out = Some(p.clone()));
        out.expect("index in range")
    }
    fn for_each_in(&self, range: Range<usize>, f: &mut dyn FnMut(usize, &ModelPoint)) {
        if range.is_empty() {
            return;
        }
        let (mut i, mut skip) = self.locate(range.start);
        let mut n = range.start;
        while n < range.end && i < self.dens.len() {
            let q = self.dens[i];
            for a in 1..q {
                if gcd(a, q) != 1 {
                    continue;
                }
                // skip counts points of this denominator already before
                // range.start (1-based within the block)
                if skip > 1 {
                    skip -= 1;
                    continue;
                }
                skip = 0;
                f(n, &self.point_at(q, a));
                n += 1;
                if n >= range.end {
                    return;
                }
            }
            i += 1;
            skip = 0;
        }
    }
}

fn totient(mut n: u64) -> u64 {
    let mut out = n;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            while n % p == 0 {
                n /= p;
            }
            out -= out / p;
        }
        p += 1;
    }
    if n > 1 {
        out -= out / n;
    }
    out
}

/// `J(α)` with the given denominators (each at least 2, below `2^53`).
pub fn build_j_alpha_denominators(alpha: f64, dens: &[u64]) -> Result<PointSequence> {
    if !(alpha > 2.0) {
        return Err(Error::PreconditionViolated(format!("J(α) needs α > 2, got {alpha}")));
    }
    let mut dens = dens.to_vec();
    dens.sort_unstable();
    dens.dedup();
    if dens.is_empty() || dens[0] < 2 || *dens.last().unwrap() >= 1 << 53 {
        return Err(Error::InvalidInput("denominators must lie in [2, 2^53)".into()));
    }
    let mut offsets = vec![0usize];
    for &q in &dens {
        let next = offsets.last().unwrap() + totient(q) as usize;
        if next > 1 << 40 {
            return Err(Error::InvalidInput("J(α) sequence too long".into()));
        }
        offsets.push(next);
    }
    // 1-based: block i holds indices offsets[i]+1 ..= offsets[i+1]
    Ok(PointSequence::new(JAlphaSource { alpha, dens, offsets }))
}

/// `J(α)` with every denominator `2 ≤ q ≤ qmax`.
pub fn build_j_alpha(alpha: f64, qmax: u64) -> Result<PointSequence> {
    if qmax < 2 {
        return Err(Error::PreconditionViolated("qmax must be at least 2".into()));
    }
    build_j_alpha_denominators(alpha, &(2..=qmax).collect::<Vec<_>>())
}

/// `Σ_{k=1}^{kmax} 10^{-k!}` in double precision.
pub fn liouville_constant(kmax: u32) -> f64 {
    let mut s = 0.0;
    let mut fact = 1i32;
    for k in 1..=kmax.min(4) as i32 {
        fact *= k;
        s += 10f64.powi(-fact);
    }
    s
}

// ---------------------------------------------------------------------------
// Finite-rank construction

/// One emitted point `w_{kj}` with its shadow ball `N_{kj}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thm3Pair {
    /// 1-based column (target) index.
    pub k: usize,
    /// 1-based position in the column.
    pub j: usize,
    pub rank: usize,
    pub alpha: f64,
    /// Height factor of the perturbation, in `[1/2, 1]`.
    pub delta: f64,
    pub point: ModelPoint,
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thm3Construction {
    /// Targets `z_k` in enumeration order.
    pub targets: Vec<Vec<f64>>,
    pub ranks: Vec<usize>,
    /// `α_k` per target.
    pub alphas: Vec<f64>,
    /// Flattened `w_{kj}`, round-robin in `j`.
    pub pairs: Vec<Thm3Pair>,
}

impl Thm3Construction {
    pub fn sequence(&self) -> Result<PointSequence> {
        PointSequence::from_points(self.pairs.iter().map(|p| p.point.clone()).collect())
    }

    pub fn max_alpha(&self) -> f64 {
        self.alphas.iter().cloned().fold(0.0, f64::max)
    }
}

const THM3_TOP: f64 = 0.25;
const THM3_STEPS_PER_OCTAVE: i32 = 4;
const THM3_MAX_MISSES: usize = 24;
const THM3_DELTAS: [f64; 5] = [1.0, 0.9, 0.8, 0.7, 0.6];

struct Placed {
    center: Vec<f64>,
    radius: f64,
    rank: usize,
}

fn balls_compatible(c: &[f64], r: f64, rank: usize, other: &Placed) -> bool {
    let d = edist(c, &other.center);
    let disjoint = d >= r + other.radius;
    if rank == other.rank {
        disjoint
    } else {
        disjoint || d + r <= other.radius || d + other.radius <= r
    }
}

/// Some enumerated point lies on the sphere `|x - c| = r` up to
/// `1e-12·r`.
fn touches_sphere(e: &Truncation, c: &[f64], r: f64) -> bool {
    let tol = 1e-12 * r;
    match &*e.near {
        Near::Line(xs) => [c[0] - r, c[0] + r].iter().any(|&y| {
            let k = xs.partition_point(|&p| p < y - tol);
            k < xs.len() && xs[k] <= y + tol
        }),
        _ => e.points.iter().any(|p| (edist(p, c) - r).abs() <= tol),
    }
}

/// Columns `w_{kj} → z_k` over an enumeration of finite rank.
///
/// Targets are ordered by (rank, magnitude, coordinates). Column `k` uses
/// `α_k = max(cosh⁻¹(1/(2ε)), 1) + ½ ln k` where ε is the witness ε of
/// `z_k` (capped at 1/4) or the smallest tested ε. Each `w = (δt, v)` has
/// `t = |v - z_k| / sinh 2α_k` and a shadow ball
/// `N = B(v, δ t sinh α_k)` certified empty of `E^{β(k)}`, compatible with
/// every earlier ball, of diameter at most `1/(kj)`. Radii are taken from
/// the finest admissible end of a geometric grid, at least a factor 2
/// apart.
pub fn thm3_construct(e: &Truncation, report: &RankReport, n_pairs: usize) -> Result<Thm3Construction> {
    let k_max = match report.outcome {
        RankOutcome::EmptyAtRank(k) => k,
        other => return Err(Error::RankDataInconsistent(format!("rank iteration ended with {other:?}"))),
    };
    if report.depth != e.depth || report.points.len() != e.len() || report.points != e.points {
        return Err(Error::RankDataInconsistent("rank report belongs to a different truncation".into()));
    }
    if report.ranks.iter().any(|&r| r == 0 || r >= k_max) {
        return Err(Error::RankDataInconsistent("rank labels outside 1..K".into()));
    }
    if e.is_empty() || n_pairs == 0 {
        return Err(Error::InvalidInput("need a nonempty set and at least one pair".into()));
    }
    let mut order: Vec<usize> = (0..e.len()).collect();
    order.sort_by(|&a, &b| {
        report.ranks[a]
            .cmp(&report.ranks[b])
            .then(norm(&e.points[a]).total_cmp(&norm(&e.points[b])))
            .then_with(|| {
                e.points[a].iter().zip(&e.points[b]).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
            })
    });
    let kk = order.len();
    let j_max = n_pairs.div_ceil(kk);
    let eps_min = DEFAULT_EPS[DEFAULT_EPS.len() - 1];
    let dirs = direction_net(e.dim);
    let grid_ratio = 2f64.powf(-1.0 / THM3_STEPS_PER_OCTAVE as f64);

    let mut targets = Vec::with_capacity(kk);
    let mut ranks = Vec::with_capacity(kk);
    let mut alphas = Vec::with_capacity(kk);
    let mut columns: Vec<Vec<Thm3Pair>> = Vec::with_capacity(kk);
    let mut placed: Vec<Placed> = Vec::new();

    for (k0, &i) in order.iter().enumerate() {
        let k = k0 + 1;
        let z = &e.points[i];
        let beta = report.ranks[i];
        let eps = report.verdicts[i].eps.unwrap_or(eps_min).min(0.25);
        let alpha = (1.0 / (2.0 * eps)).acosh().max(1.0) + 0.5 * (k as f64).ln();
        let (s2a, sa) = ((2.0 * alpha).sinh(), alpha.sinh());
        let level = if beta == 1 { e.clone() } else { e.induced(&report.level(beta)) };
        let floor = 1e-13 * norm(z).max(1e-280);

        // Admissible probes on the grid, coarse to fine.
        let mut grid: Vec<Vec<(Vec<f64>, f64, f64)>> = Vec::new();
        let mut misses = 0;
        let mut r = THM3_TOP;
        while r >= floor {
            let mut here = Vec::new();
            for d in &dirs {
                let v = probe(z, r, d);
                let rr = edist(&v, z);
                if rr == 0.0 {
                    continue;
                }
                let t = rr / s2a;
                if let Some(&delta) = THM3_DELTAS.iter().find(|&&delta| {
                    let rad = delta * t * sa;
                    level.cover.ball_is_empty(&v, rad * (1.0 + 1e-9)) && !touches_sphere(e, &v, rad)
                }) {
                    here.push((v, rr, delta));
                }
            }
            if here.is_empty() {
                misses += 1;
                if misses >= THM3_MAX_MISSES && !grid.is_empty() {
                    break;
                }
            } else {
                misses = 0;
                grid.push(here);
            }
            r *= grid_ratio;
        }

        // Bottom-up selection.
        let mut picks: Vec<Thm3Pair> = Vec::new();
        let mut last_r = 0.0;
        for cands in grid.iter().rev() {
            if picks.len() == j_max {
                break;
            }
            let j = j_max - picks.len();
            for (v, rr, delta) in cands {
                if picks.len() > 0 && *rr < 2.0 * last_r {
                    break;
                }
                let t = rr / s2a;
                let rad = delta * t * sa;
                if 2.0 * rad > 1.0 / (k * j) as f64 {
                    continue;
                }
                let ok = placed.iter().all(|p| balls_compatible(v, rad, beta, p))
                    && picks.iter().all(|p| balls_compatible(v, rad, beta, &Placed { center: p.center.clone(), radius: p.radius, rank: beta }));
                if !ok {
                    continue;
                }
                picks.push(Thm3Pair {
                    k,
                    j,
                    rank: beta,
                    alpha,
                    delta: *delta,
                    point: ModelPoint::half_space(delta * t, v)?,
                    center: v.clone(),
                    radius: rad,
                });
                last_r = *rr;
                break;
            }
        }
        if picks.len() < j_max {
            let j = j_max - picks.len();
            return Err(Error::ConstructionStuck((j - 1) * kk + k));
        }
        picks.reverse();
        for p in &picks {
            placed.push(Placed { center: p.center.clone(), radius: p.radius, rank: beta });
        }
        targets.push(z.clone());
        ranks.push(beta);
        alphas.push(alpha);
        columns.push(picks);
    }

    let mut pairs = Vec::with_capacity(n_pairs);
    'outer: for j in 0..j_max {
        for col in &columns {
            if pairs.len() == n_pairs {
                break 'outer;
            }
            pairs.push(col[j].clone());
        }
    }
    Ok(Thm3Construction { targets, ranks, alphas, pairs })
}

/// Post-hoc check of the construction conditions on the emitted pairs:
/// shrinking diameters, disjointness of equal-rank balls, nesting or
/// disjointness across ranks, emptiness against `E^{β(k)}`, the distance
/// bound `ρ(w, δ_{z_k}) < 2α_k + log 2`, and no enumerated point on any
/// ball boundary. Returns one message per violation.
pub fn check_thm3(e: &Truncation, report: &RankReport, c: &Thm3Construction) -> Vec<String> {
    let mut bad = Vec::new();
    let mut levels: Vec<Option<Truncation>> = vec![None; report.level_sizes.len() + 1];
    for (n, p) in c.pairs.iter().enumerate() {
        let tag = format!("pair {} (k={}, j={})", n + 1, p.k, p.j);
        if 2.0 * p.radius > 1.0 / (p.k * p.j) as f64 {
            bad.push(format!("{tag}: diameter {} above 1/(kj)", g17(2.0 * p.radius)));
        }
        let level = levels[p.rank].get_or_insert_with(|| if p.rank == 1 { e.clone() } else { e.induced(&report.level(p.rank)) });
        if !level.cover.ball_is_empty(&p.center, p.radius) {
            bad.push(format!("{tag}: ball meets E^{}", p.rank));
        }
        let z = &c.targets[p.k - 1];
        let rho = dist_to_vertical(&p.point, z);
        if !(rho < 2.0 * p.alpha + 2f64.ln()) {
            bad.push(format!("{tag}: distance {} to the vertical exceeds 2α+log 2", g17(rho)));
        }
        if !(0.5..=1.0).contains(&p.delta) {
            bad.push(format!("{tag}: height factor outside [1/2, 1]"));
        }
        let (cen, rad) = (p.point.base().to_vec(), p.point.height() * p.alpha.sinh());
        if edist(&cen, &p.center) > 1e-12 * (1.0 + norm(&cen)) || (rad - p.radius).abs() > 1e-9 * rad {
            bad.push(format!("{tag}: stored ball is not the shadow of the point"));
        }
        if touches_sphere(e, &p.center, p.radius) {
            bad.push(format!("{tag}: enumerated point on the boundary"));
        }
    }
    // Pairwise relations, sweeping along the first coordinate.
    let mut idx: Vec<usize> = (0..c.pairs.len()).collect();
    idx.sort_by(|&a, &b| (c.pairs[a].center[0] - c.pairs[a].radius).total_cmp(&(c.pairs[b].center[0] - c.pairs[b].radius)));
    for (pos, &a) in idx.iter().enumerate() {
        let pa = &c.pairs[a];
        let right = pa.center[0] + pa.radius;
        for &b in &idx[pos + 1..] {
            let pb = &c.pairs[b];
            if pb.center[0] - pb.radius >= right {
                break;
            }
            let other = Placed { center: pb.center.clone(), radius: pb.radius, rank: pb.rank };
            if !balls_compatible(&pa.center, pa.radius, pa.rank, &other) {
                bad.push(format!("pairs {} and {}: balls overlap", a + 1, b + 1));
            }
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_index_open_query() {
        let iv = IntervalIndex::new(vec![(0.0, 1.0), (3.0, 4.0)]);
        assert!(iv.meets_open(0.5, 2.0));
        assert!(!iv.meets_open(1.0, 3.0));
        assert!(iv.meets_open(2.0, 3.5));
        assert!(!iv.meets_open(4.0, 9.0));
    }

    #[test]
    fn selfsim_depth_one_points() {
        let a = SelfSim { kind: SelfSimKind::A }.enumerate(1).unwrap();
        for x in [0.5, -0.5, 0.25, -0.25, 0.0] {
            assert!(a.iter().any(|p| (p[0] - x).abs() < 1e-15), "{x}");
        }
        let b = SelfSim { kind: SelfSimKind::B }.enumerate(1).unwrap();
        for x in [0.25, -0.25, 1.0 / 16.0, -1.0 / 16.0] {
            assert!(b.iter().any(|p| (p[0] - x).abs() < 1e-15), "{x}");
        }
    }

    #[test]
    fn enumerations_nest() {
        for oracle in [ExampleSet::SelfSimA.oracle(), ExampleSet::CantorAccessible.oracle(), ExampleSet::Rationals01.oracle()] {
            for d in 1..5 {
                let small = oracle.truncate(d).unwrap();
                let big = oracle.truncate(d + 1).unwrap();
                assert!(oracle.resolution(d + 1) < oracle.resolution(d));
                for p in small.points() {
                    assert!(big.nearest_distance(p) <= 1e-12, "{} depth {d}", oracle.name());
                }
            }
        }
    }

    #[test]
    fn cantor_depth_two() {
        let c = CantorAccessible.enumerate(2).unwrap();
        for x in [0.0, 1.0, 1.0 / 3.0, 2.0 / 3.0] {
            assert!(c.iter().any(|p| (p[0] - x).abs() < 1e-15));
        }
        assert_eq!(CantorAccessible.enumerate(5).unwrap().len(), 32);
    }

    #[test]
    fn depth_limit() {
        assert_eq!(CantorAccessible.truncate(20).unwrap_err(), Error::DepthTooLarge(MAX_POINTS));
        assert!(matches!(SelfSim { kind: SelfSimKind::A }.truncate(30), Err(Error::DepthTooLarge(_))));
    }

    #[test]
    fn scale_too_fine() {
        let e = build_example_set(ExampleSet::SelfSimB, 3).unwrap();
        let p = GdParams { scale_min: Some(e.resolution()), ..GdParams::default() };
        assert!(matches!(gd_test(&e, &[0.0], &p), Err(Error::ScaleTooFine { .. })));
    }

    #[test]
    fn phi_fixed_values() {
        assert_eq!(phi_map(0.0), 0.0);
        assert!((phi_map(0.5) - 0.25).abs() < 1e-15);
        assert!((phi_map(-0.25) + 1.0 / 16.0).abs() < 1e-15);
        assert_eq!(phi_map(1.5), 1.5);
        assert!((phi_map(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn totients() {
        assert_eq!(totient(1_000_000), 400_000);
        assert_eq!(totient(2), 1);
        assert_eq!(totient(97), 96);
    }

    #[test]
    fn j_alpha_streaming_matches_point() {
        let s = build_j_alpha(3.0, 12).unwrap();
        let all = s.to_vec(s.len());
        for n in 1..=s.len() {
            assert_eq!(s.point(n), all[n - 1]);
        }
        let mut seen = Vec::new();
        s.for_each_in(5..9, &mut |n, p| seen.push((n, p.clone())));
        assert_eq!(seen.iter().map(|x| x.0).collect::<Vec<_>>(), vec![5, 6, 7, 8]);
        assert_eq!(seen[0].1, all[4]);
    }
}
