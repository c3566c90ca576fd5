//! Sequences with prescribed conical limit sets.
//!
//! Open sets are finite ball unions with finitely many points removed.
//! From them we build dunes (for localizing a sequence to an open set),
//! multiplicity-controlled ball covers, sequences whose conical limit set
//! is a truncated G_δ set, the Cantor graph sequence, codimension-one
//! lifts and the joint prescription of limit and conical limit sets.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergence::radial_dataset;
use crate::geometry::{IdealPoint, Model, ModelPoint};
use crate::limits::{conical_estimate, ConicalConfig, ConicalStatus, PointSequence, SequenceSource};
use crate::vecops::{dist as edist, norm};
use crate::{Error, Result};

/// Hard cap on emitted cover balls and mesh points.
pub const MAX_EMITTED: usize = 50_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum OpenBase {
    Whole,
    Balls(Vec<Ball>),
}

/// Open `U ⊆ R^m`: the base set with finitely many points removed.
#[derive(Clone, Debug, PartialEq)]
pub struct OpenSetRep {
    dim: usize,
    base: OpenBase,
    removed: Vec<Vec<f64>>,
    /// Disjoint sorted open intervals of a one-dimensional ball union.
    merged: Option<Vec<(f64, f64)>>,
}

fn merge_intervals(balls: &[Ball]) -> Vec<(f64, f64)> {
    let mut iv: Vec<(f64, f64)> = balls.iter().map(|b| (b.center[0] - b.radius, b.center[0] + b.radius)).collect();
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
    for (lo, hi) in iv {
        match out.last_mut() {
            // open intervals sharing only an endpoint stay separate
            Some(last) if lo < last.1 => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

impl OpenSetRep {
    pub fn whole(dim: usize) -> Self {
        Self { dim, base: OpenBase::Whole, removed: Vec::new(), merged: None }
    }

    pub fn balls(dim: usize, balls: Vec<Ball>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("open sets live in R^m with m >= 1".into()));
        }
        for b in &balls {
            if b.center.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: b.center.len() });
            }
            if !(b.radius > 0.0) || !b.radius.is_finite() || b.center.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput(format!("bad ball radius {}", b.radius)));
            }
        }
        let merged = (dim == 1).then(|| merge_intervals(&balls));
        Ok(Self { dim, base: OpenBase::Balls(balls), removed: Vec::new(), merged })
    }

    /// Union of open intervals `(lo, hi)` in `R`.
    pub fn intervals(iv: &[(f64, f64)]) -> Result<Self> {
        if let Some(&(lo, hi)) = iv.iter().find(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidInput(format!("empty interval ({lo}, {hi})")));
        }
        Self::balls(1, iv.iter().map(|&(lo, hi)| Ball { center: vec![0.5 * (lo + hi)], radius: 0.5 * (hi - lo) }).collect())
    }

    /// `R^m` minus a finite point set.
    pub fn complement_of_points(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        Self::whole(dim).without(points)
    }

    /// Remove finitely many more points.
    pub fn without(mut self, points: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| p.len() != self.dim) {
            return Err(Error::DimensionMismatch { expected: self.dim, got: p.len() });
        }
        self.removed.extend(points);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn base(&self) -> &OpenBase {
        &self.base
    }

    pub fn removed(&self) -> &[Vec<f64>] {
        &self.removed
    }

    /// `d(v, R^m ∖ U)`, infinite for `U = R^m`. Exact in dimension one and
    /// for disjoint balls; for overlapping balls in higher dimension the
    /// deepest single ball gives a lower bound.
    pub fn dist_to_complement(&self, v: &[f64]) -> f64 {
        let base = match &self.base {
            OpenBase::Whole => f64::INFINITY,
            OpenBase::Balls(balls) => match &self.merged {
                Some(iv) => {
                    let x = v[0];
                    let i = iv.partition_point(|&(lo, _)| lo < x);
                    if i == 0 {
                        0.0
                    } else {
                        let (lo, hi) = iv[i - 1];
                        if x < hi {
                            (x - lo).min(hi - x)
                        } else {
                            0.0
                        }
                    }
                }
                None => balls.iter().map(|b| b.radius - edist(v, &b.center)).fold(0.0, f64::max),
            },
        };
        self.removed.iter().map(|p| edist(v, p)).fold(base, f64::min)
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        self.dist_to_complement(v) > 0.0
    }
}

/// Whether `w` lies in the dune `D(U) = {(t, v) : t < min(1, d(v, R^m∖U)²)}`.
pub fn dune_contains(u: &OpenSetRep, w: &ModelPoint) -> Result<bool> {
    if w.dim() != u.dim() + 1 {
        return Err(Error::DimensionMismatch { expected: u.dim() + 1, got: w.dim() });
    }
    let w = w.to_half_space()?;
    let t = w.height();
    let d = u.dist_to_complement(w.base());
    Ok(t < 1.0 && t < d * d)
}

/// Terms of `e` inside the dune of `u`, in order.
pub fn localize(e: &PointSequence, u: &OpenSetRep) -> Result<PointSequence> {
    if e.dim() != u.dim() + 1 {
        return Err(Error::DimensionMismatch { expected: u.dim() + 1, got: e.dim() });
    }
    let mut keep = Vec::new();
    let mut err = None;
    e.for_each_in(1..e.len() + 1, &mut |n, w| match dune_contains(u, w) {
        Ok(true) => keep.push(n),
        Ok(false) => {}
        Err(x) => err = err.take().or(Some(x)),
    });
    if let Some(x) = err {
        return Err(x);
    }
    Ok(e.subsequence(keep))
}

/// Finite descending chain `V₁ ⊇ V₂ ⊇ … ⊇ V_d`.
#[derive(Clone, Debug, PartialEq)]
pub struct GDeltaRep {
    levels: Vec<OpenSetRep>,
}

impl GDeltaRep {
    pub fn new(levels: Vec<OpenSetRep>) -> Result<Self> {
        let dim = levels.first().ok_or_else(|| Error::InvalidInput("a G_δ truncation needs a level".into()))?.dim();
        if let Some(l) = levels.iter().find(|l| l.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: l.dim() });
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[OpenSetRep] {
        &self.levels
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn dim(&self) -> usize {
        self.levels[0].dim()
    }

    /// The first `depth` levels.
    pub fn truncated(&self, depth: usize) -> Result<Self> {
        if depth == 0 || depth > self.depth() {
            return Err(Error::InvalidInput(format!("depth {depth} outside 1..={}", self.depth())));
        }
        Ok(Self { levels: self.levels[..depth].to_vec() })
    }

    /// Membership in the last level, hence in all of them.
    pub fn contains(&self, v: &[f64]) -> bool {
        self.levels.iter().all(|l| l.contains(v))
    }

    /// Checks `V_{n+1} ⊆ V_n` on the samples.
    pub fn check_descending(&self, samples: &[Vec<f64>]) -> Result<()> {
        for (n, pair) in self.levels.windows(2).enumerate() {
            if let Some(v) = samples.iter().find(|v| pair[1].contains(v) && !pair[0].contains(v)) {
                return Err(Error::PreconditionViolated(format!("level {} is not inside level {} at {:?}", n + 2, n + 1, v)));
            }
        }
        Ok(())
    }
}

/// Cover tuning. `ratio_cap` bounds `radius / d(center)` in every shell;
/// `1.0` gives radius `ε 4^{-k}` in shell `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverParams {
    /// Box `[lo_i, hi_i]` the nets are laid out in.
    pub window: Vec<(f64, f64)>,
    pub max_shell: u32,
    pub ratio_cap: f64,
}

impl CoverParams {
    pub fn new(window: Vec<(f64, f64)>, max_shell: u32) -> Self {
        Self { window, max_shell, ratio_cap: 1.0 }
    }

    pub fn with_ratio_cap(mut self, cap: f64) -> Self {
        self.ratio_cap = cap;
        self
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.window.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: self.window.len() });
        }
        if self.window.iter().any(|&(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::InvalidInput("window sides must be finite with lo < hi".into()));
        }
        if !(self.ratio_cap > 0.0 && self.ratio_cap <= 1.0) {
            return Err(Error::InvalidInput(format!("ratio cap {} outside (0, 1]", self.ratio_cap)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverBall {
    pub center: Vec<f64>,
    pub radius: f64,
    pub shell: u32,
}

/// Distance band `[a, b]` of shell `k`: `W₀ = {d ≥ ε}`,
/// `W_k = {ε 2^{-k} ≤ d ≤ ε 2^{1-k}}`.
pub fn shell_band(eps: f64, k: u32) -> (f64, f64) {
    if k == 0 {
        (eps, f64::INFINITY)
    } else {
        let a = eps * 0.5f64.powi(k as i32);
        (a, 2.0 * a)
    }
}

pub fn shell_radius(eps: f64, k: u32, ratio_cap: f64) -> f64 {
    let h = 0.5f64.powi(k as i32);
    eps * h * h.min(ratio_cap)
}

/// Corner-aligned lattice over a box: per-axis spacing and point counts.
struct Lattice<'a> {
    window: &'a [(f64, f64)],
    step: f64,
    counts: Vec<usize>,
}

impl<'a> Lattice<'a> {
    fn new(window: &'a [(f64, f64)], step: f64) -> Result<Self> {
        let counts: Vec<usize> = window.iter().map(|&(lo, hi)| ((hi - lo) / step).ceil() as usize + 1).collect();
        let total = counts.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c));
        if total.is_none() || counts.iter().any(|&c| c > 1 << 40) {
            return Err(Error::DepthTooLarge(MAX_EMITTED));
        }
        Ok(Self { window, step, counts })
    }

    fn coord(&self, axis: usize, i: usize) -> f64 {
        self.window[axis].0 + self.step * i as f64
    }

    /// Lattice points `c` with `d(c) ∈ [lo, hi]`, found by subdividing
    /// index boxes and pruning with the 1-Lipschitz bound on `d`.
    fn select(&self, d: &dyn Fn(&[f64]) -> f64, lo: f64, hi: f64, out: &mut Vec<Vec<f64>>) -> Result<()> {
        let boxes: Vec<(usize, usize)> = self.counts.iter().map(|&c| (0, c - 1)).collect();
        self.descend(&boxes, d, lo, hi, out)
    }

    fn descend(&self, bx: &[(usize, usize)], d: &dyn Fn(&[f64]) -> f64, lo: f64, hi: f64, out: &mut Vec<Vec<f64>>) -> Result<()> {
        let center: Vec<f64> = bx
            .iter()
            .enumerate()
            .map(|(axis, &(i0, i1))| 0.5 * (self.coord(axis, i0) + self.coord(axis, i1)))
            .collect();
        let half_diag = 0.5 * self.step * norm(&bx.iter().map(|&(i0, i1)| (i1 - i0) as f64).collect::<Vec<_>>());
        let dc = d(&center);
        if dc + half_diag < lo || dc - half_diag > hi {
            return Ok(());
        }
        let (axis, &(i0, i1)) = bx.iter().enumerate().max_by_key(|(_, &(i0, i1))| i1 - i0).unwrap();
        if i0 == i1 {
            if dc >= lo && dc <= hi && dc > 0.0 {
                if out.len() >= MAX_EMITTED {
                    return Err(Error::DepthTooLarge(MAX_EMITTED));
                }
                out.push(center);
            }
            return Ok(());
        }
        let mid = i0 + (i1 - i0) / 2;
        let mut left = bx.to_vec();
        left[axis] = (i0, mid);
        self.descend(&left, d, lo, hi, out)?;
        let mut right = bx.to_vec();
        right[axis] = (mid + 1, i1);
        self.descend(&right, d, lo, hi, out)
    }
}

/// Finite-multiplicity cover of `V` inside the window, shell by shell.
///
/// Shell `k` uses radius `r_k = ε 2^{-k} min(2^{-k}, cap)` and lattice
/// spacing `r_k / √m`. A lattice point is a center when its distance to
/// the complement lies in `[a_k, b_k + (r_{k-1} + r_k)/2]`; the upper slack
/// picks up points of `W_k` whose nearest lattice point falls just below
/// `a_k`. Every point of `V` in the window with `d ≥ a_K + r_K/2` (`K` the
/// last shell) is within `r/2` of a center.
pub fn cover_balls(v: &OpenSetRep, eps: f64, params: &CoverParams) -> Result<Vec<CoverBall>> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidInput(format!("eps = {eps} must be positive")));
    }
    params.validate(v.dim())?;
    let m = v.dim() as f64;
    let d = |x: &[f64]| v.dist_to_complement(x);
    let mut out = Vec::new();
    for k in 0..=params.max_shell {
        let r = shell_radius(eps, k, params.ratio_cap);
        let (a, b) = shell_band(eps, k);
        let hi = if k == 0 { f64::INFINITY } else { b + 0.5 * (shell_radius(eps, k - 1, params.ratio_cap) + r) };
        let lattice = Lattice::new(&params.window, r / m.sqrt())?;
        let mut centers = Vec::new();
        lattice.select(&d, a, hi, &mut centers)?;
        if out.len() + centers.len() > MAX_EMITTED {
            return Err(Error::DepthTooLarge(MAX_EMITTED));
        }
        out.extend(centers.into_iter().map(|center| CoverBall { center, radius: r, shell: k }));
    }
    Ok(out)
}

/// Per-shell `(3·(⌊2α√m⌋ + 1)^m)` bound on how many `α`-inflated balls of
/// three consecutive shells can contain one point: each shell is a
/// lattice of spacing `r/√m`.
pub fn multiplicity_bound(dim: usize, alpha: f64) -> usize {
    let per = (2.0 * alpha * (dim as f64).sqrt()).floor() as usize + 1;
    3 * per.pow(dim as u32)
}

/// Machine check of the cover lemma's conditions at truncation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverCheck {
    /// Probes inside `V` and the window and deep enough in `V` to be in scope.
    pub probes_in_scope: usize,
    pub uncovered: usize,
    pub max_radius: f64,
    /// Largest `radius / d(center)` per shell.
    pub ratio_by_shell: Vec<f64>,
    /// Largest count over probes and shell triples of inflated balls
    /// containing the probe.
    pub max_multiplicity: usize,
    pub violations: Vec<String>,
}

pub fn check_cover(
    v: &OpenSetRep,
    eps: f64,
    params: &CoverParams,
    balls: &[CoverBall],
    probes: &[Vec<f64>],
    alpha: f64,
) -> CoverCheck {
    let shells = params.max_shell as usize + 1;
    let mut violations = Vec::new();
    let mut ratio_by_shell = vec![0.0f64; shells];
    let mut max_radius = 0.0f64;
    for b in balls {
        max_radius = max_radius.max(b.radius);
        let ratio = b.radius / v.dist_to_complement(&b.center);
        let k = b.shell as usize;
        ratio_by_shell[k] = ratio_by_shell[k].max(ratio);
    }
    if max_radius > eps {
        violations.push(format!("(ii) radius {max_radius} exceeds eps {eps}"));
    }
    for (k, &r) in ratio_by_shell.iter().enumerate() {
        let bound = 0.5f64.powi(k as i32).min(params.ratio_cap);
        if r > bound * (1.0 + 1e-12) {
            violations.push(format!("(iv) shell {k}: ratio {r} > {bound}"));
        }
    }
    let last = params.max_shell;
    let floor = shell_band(eps, last).0 + 0.5 * shell_radius(eps, last, params.ratio_cap);
    let in_window = |x: &[f64]| x.iter().zip(&params.window).all(|(c, &(lo, hi))| *c >= lo && *c <= hi);
    let per_probe: Vec<(bool, bool, usize)> = probes
        .par_iter()
        .map(|x| {
            let scope = in_window(x) && v.dist_to_complement(x) >= floor;
            let mut covered = false;
            let mut counts = vec![0usize; shells];
            for b in balls {
                let dx = edist(x, &b.center);
                covered |= dx < b.radius;
                if dx < alpha * b.radius {
                    counts[b.shell as usize] += 1;
                }
            }
            let triple = (0..shells)
                .map(|k| counts[k.saturating_sub(1)..(k + 2).min(shells)].iter().sum::<usize>())
                .max()
                .unwrap_or(0);
            (scope, covered, triple)
        })
        .collect();
    let probes_in_scope = per_probe.iter().filter(|p| p.0).count();
    let uncovered = per_probe.iter().filter(|p| p.0 && !p.1).count();
    if uncovered > 0 {
        violations.push(format!("(i) {uncovered} probes of V uncovered"));
    }
    let max_multiplicity = per_probe.iter().map(|p| p.2).max().unwrap_or(0);
    let bound = multiplicity_bound(v.dim(), alpha);
    if max_multiplicity > bound {
        violations.push(format!("(iii) multiplicity {max_multiplicity} > {bound}"));
    }
    CoverCheck { probes_in_scope, uncovered, max_radius, ratio_by_shell, max_multiplicity, violations }
}

/// Half-space points stored flat as `[t, v...]` rows.
struct FlatSource {
    dim: usize,
    data: Vec<f64>,
}

impl SequenceSource for FlatSource {
    fn len(&self) -> usize {
        self.data.len() / self.dim
    }
    fn model(&self) -> Model {
        Model::HalfSpace
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn point(&self, n: usize) -> ModelPoint {
        let row = &self.data[(n - 1) * self.dim..n * self.dim];
        ModelPoint::half_space(row[0], &row[1..]).expect("stored heights are positive")
    }
}

fn flat_sequence(dim: usize, data: Vec<f64>) -> PointSequence {
    PointSequence::new(FlatSource { dim, data })
}

/// Tuning for [`gdelta_to_sequence`]. Level `n` is covered with
/// `ε = 1/n` and ratio cap `ratio_cap / n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdeltaParams {
    pub window: Vec<(f64, f64)>,
    pub max_shell: u32,
    pub ratio_cap: f64,
}

/// Default ratio cap: `asinh(32) > 4`, so no ball sees a removed point
/// within angle 4.
pub const DEFAULT_RATIO_CAP: f64 = 1.0 / 32.0;

impl GdeltaParams {
    pub fn new(window: Vec<(f64, f64)>) -> Self {
        Self { window, max_shell: 10, ratio_cap: DEFAULT_RATIO_CAP }
    }

    pub fn with_max_shell(mut self, k: u32) -> Self {
        self.max_shell = k;
        self
    }

    pub fn with_ratio_cap(mut self, cap: f64) -> Self {
        self.ratio_cap = cap;
        self
    }

    pub fn cover_params(&self, level: usize) -> CoverParams {
        CoverParams::new(self.window.clone(), self.max_shell).with_ratio_cap(self.ratio_cap / level as f64)
    }
}

/// Level-major sequence of half-space points `(t, v)`, one per cover ball
/// `B(v, t)` of `V_n` at `ε = 1/n`. Within a level the balls come in
/// bit-reversed order, so the tail of the sequence is spread over space.
pub fn gdelta_to_sequence(g: &GDeltaRep, params: &GdeltaParams) -> Result<PointSequence> {
    let dim = g.dim() + 1;
    let covers = g
        .levels()
        .par_iter()
        .enumerate()
        .map(|(i, v)| cover_balls(v, 1.0 / (i + 1) as f64, &params.cover_params(i + 1)))
        .collect::<Result<Vec<_>>>()?;
    let total: usize = covers.iter().map(|c| c.len()).sum();
    if total > MAX_EMITTED {
        return Err(Error::DepthTooLarge(MAX_EMITTED));
    }
    let mut data = Vec::with_capacity(total * dim);
    for level in &covers {
        for i in bit_reversed(level.len()) {
            data.push(level[i].radius);
            data.extend_from_slice(&level[i].center);
        }
    }
    Ok(flat_sequence(dim, data))
}

/// `0..len` in bit-reversed order, so every suffix is spread evenly over
/// the original order.
pub fn bit_reversed(len: usize) -> impl Iterator<Item = usize> {
    let bits = usize::BITS - len.saturating_sub(1).leading_zeros();
    (0..1usize << bits)
        .map(move |i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
        .filter(move |&i| i < len)
}

/// Gap `(a, b)` of level `n`: removed when passing from `J_{n-1}` to `J_n`,
/// of length `3^{-n}`.
pub fn cantor_gaps(level: u32) -> Vec<(f64, f64)> {
    let unit = 3f64.powi(level as i32);
    let mut lefts = vec![0u64];
    for _ in 1..level {
        lefts = lefts.into_iter().flat_map(|l| [3 * l, 3 * l + 2]).collect();
    }
    lefts.into_iter().map(|l| ((3 * l + 1) as f64 / unit, (3 * l + 2) as f64 / unit)).collect()
}

/// Samples of the graph of `f(x) = d(x, C)/n` over the level-`n` gaps.
///
/// On each gap the offsets from the nearer endpoint are `δ_j = ℓ/2 · 2^{1-j}`
/// (`ℓ` the gap length), so `j = 1` is the gap center. Emission is
/// `j`-major, so later terms are deeper on every gap.
pub fn cantor_graph_sequence(depth: u32, per_side: u32) -> Result<PointSequence> {
    if depth == 0 || depth > 12 {
        return Err(Error::InvalidInput(format!("Cantor graph depth {depth} outside 1..=12")));
    }
    if per_side == 0 {
        return Err(Error::InvalidInput("need at least one sample per gap".into()));
    }
    let gaps: Vec<(u32, Vec<(f64, f64)>)> = (1..=depth).map(|n| (n, cantor_gaps(n))).collect();
    let mut data = Vec::new();
    for j in 1..=per_side {
        for (n, level) in &gaps {
            let nf = *n as f64;
            for &(a, b) in level {
                let delta = 0.5 * (b - a) * 0.5f64.powi(j as i32 - 1);
                if j == 1 {
                    data.extend_from_slice(&[delta / nf, 0.5 * (a + b)]);
                } else {
                    data.extend_from_slice(&[delta / nf, a + delta, delta / nf, b - delta]);
                }
            }
        }
    }
    Ok(flat_sequence(2, data))
}

/// Image of `(x₀, x₁, …, x_{m-1}) ∈ H^m` in `H^{m+1}`:
/// `(x₀ sin(π/n), x₁, …, x_{m-1}, x₀ cos(π/n))`, kept only when
/// `x₀ < 2 sin(π/n)` (the part inside the radius-one cylinder).
pub fn lift_point(p: &ModelPoint, n: usize) -> Result<Option<ModelPoint>> {
    let p = p.to_half_space()?;
    let (s, c) = (std::f64::consts::PI / n as f64).sin_cos();
    let x0 = p.height();
    if !(x0 < 2.0 * s) {
        return Ok(None);
    }
    let h = x0 * s;
    if !(h >= f64::MIN_POSITIVE) {
        return Ok(None);
    }
    let mut base = p.base().to_vec();
    base.push(x0 * c);
    Ok(Some(ModelPoint::half_space(h, &base)?))
}

/// Lifts the `i`-th sequence (0-based) into the half-plane at angle
/// `π/(i+1)` and interleaves the kept points round-robin.
pub fn codim1_lift(gammas: &[PointSequence]) -> Result<PointSequence> {
    let dim = gammas.first().ok_or_else(|| Error::InvalidInput("no sequences to lift".into()))?.dim();
    if let Some(g) = gammas.iter().find(|g| g.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: g.dim() });
    }
    let lifted = gammas
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let mut rows = Vec::new();
            let mut err = None;
            g.for_each_in(1..g.len() + 1, &mut |_, p| match lift_point(p, i + 1) {
                Ok(Some(q)) => rows.push(q),
                Ok(None) => {}
                Err(e) => err = err.take().or(Some(e)),
            });
            err.map_or(Ok(rows), Err)
        })
        .collect::<Result<Vec<_>>>()?;
    let longest = lifted.iter().map(|l| l.len()).max().unwrap_or(0);
    let mut data = Vec::new();
    for k in 0..longest {
        for l in &lifted {
            if let Some(q) = l.get(k) {
                data.extend_from_slice(q.coords());
            }
        }
    }
    Ok(flat_sequence(dim + 1, data))
}

/// A closed `F ⊆ R^m` given by sample points and a distance oracle.
#[derive(Clone)]
pub struct ClosedSet {
    dim: usize,
    samples: Vec<Vec<f64>>,
    dist: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for ClosedSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClosedSet").field("dim", &self.dim).field("samples", &self.samples.len()).finish()
    }
}

impl ClosedSet {
    pub fn new<F>(dim: usize, samples: Vec<Vec<f64>>, dist: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self { dim, samples, dist: Arc::new(dist) }
    }

    pub fn empty(dim: usize) -> Self {
        Self::new(dim, Vec::new(), |_| f64::INFINITY)
    }

    pub fn finite(dim: usize, points: Vec<Vec<f64>>) -> Self {
        let pts = points.clone();
        Self::new(dim, points, move |v| pts.iter().map(|p| edist(v, p)).fold(f64::INFINITY, f64::min))
    }

    /// Union of closed intervals in `R`, sampled at `spacing`.
    pub fn intervals(iv: Vec<(f64, f64)>, spacing: f64) -> Self {
        let mut samples = Vec::new();
        for &(lo, hi) in &iv {
            let n = ((hi - lo) / spacing).ceil().max(0.0) as usize;
            samples.extend((0..=n).map(|i| vec![(lo + i as f64 * spacing).min(hi)]));
        }
        Self::new(1, samples, move |v| {
            iv.iter().map(|&(lo, hi)| (lo - v[0]).max(v[0] - hi).max(0.0)).fold(f64::INFINITY, f64::min)
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn dist(&self, v: &[f64]) -> f64 {
        (self.dist)(v)
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrescribeParams {
    pub window: Vec<(f64, f64)>,
    /// Mesh and probe lattice spacing.
    pub spacing: f64,
    /// Estimator used for the precondition probes.
    pub conical: ConicalConfig,
    /// Sample resolution of the containment checks.
    pub resolution: f64,
    /// Mesh only where `d(v, F) < mesh_band ≤ 1`. Points further out sit at
    /// heights bounded below and do not affect either limit set.
    pub mesh_band: f64,
}

fn lattice_points(window: &[(f64, f64)], step: f64) -> Result<Vec<Vec<f64>>> {
    let lattice = Lattice::new(window, step)?;
    let total: usize = lattice.counts.iter().product();
    if total > MAX_EMITTED {
        return Err(Error::DepthTooLarge(MAX_EMITTED));
    }
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; window.len()];
    for _ in 0..total {
        out.push(idx.iter().enumerate().map(|(a, &i)| lattice.coord(a, i)).collect());
        for (a, i) in idx.iter_mut().enumerate() {
            *i += 1;
            if *i < lattice.counts[a] {
                break;
            }
            *i = 0;
        }
    }
    Ok(out)
}

/// Mesh of the lower boundary surface `t = d(v, F)²` of the dune of the
/// complement of `F`, over lattice points with `0 < d < band`, sorted by
/// decreasing height. Heights are `d²(1 - 1e-9)`.
pub fn dune_boundary_mesh(f: &ClosedSet, window: &[(f64, f64)], spacing: f64, band: f64) -> Result<PointSequence> {
    if window.len() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: window.len() });
    }
    if !(spacing > 0.0) {
        return Err(Error::InvalidInput(format!("spacing {spacing} must be positive")));
    }
    if !(band > 0.0 && band <= 1.0) {
        return Err(Error::InvalidInput(format!("mesh band {band} outside (0, 1]")));
    }
    let dim = f.dim() + 1;
    let mut rows: Vec<(f64, Vec<f64>)> = lattice_points(window, spacing)?
        .into_par_iter()
        .filter_map(|v| {
            let d = f.dist(&v);
            (d > 0.0 && d < band && d * d >= f64::MIN_POSITIVE).then(|| (d * d * (1.0 - 1e-9), v))
        })
        .collect();
    rows.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut data = Vec::with_capacity(rows.len() * dim);
    for (t, v) in rows {
        data.push(t);
        data.extend(v);
    }
    Ok(flat_sequence(dim, data))
}

/// `W' = (W ∖ D(R^m∖F)) ∪ ∂D(R^m∖F)`, the two parts interleaved in
/// proportion so both keep their order.
///
/// Preconditions are checked on the probe lattice: every probe the
/// estimator accepts must be within `resolution` of `F`, and every sample
/// of `F` whose `resolution`-neighbours along the axes all lie in `F`
/// must have an accepted probe within `resolution + spacing`.
pub fn prescribe_limit_and_conical(w: &PointSequence, f: &ClosedSet, params: &PrescribeParams) -> Result<PointSequence> {
    let m = f.dim();
    if w.dim() != m + 1 {
        return Err(Error::DimensionMismatch { expected: m + 1, got: w.dim() });
    }
    let probes = lattice_points(&params.window, params.spacing)?;
    let accepted: Vec<Vec<f64>> = if w.is_empty() {
        Vec::new()
    } else {
        let ideal: Vec<IdealPoint> = probes.iter().map(|p| IdealPoint::plane(p.clone())).collect();
        conical_estimate(w, &ideal, &params.conical)?
            .into_iter()
            .zip(&probes)
            .filter(|(v, _)| v.status == ConicalStatus::Accepted)
            .map(|(_, p)| p.clone())
            .collect()
    };
    let h = params.resolution;
    if let Some(p) = accepted.iter().find(|p| f.dist(p) > h) {
        return Err(Error::PreconditionViolated(format!("accepted point {p:?} lies outside F")));
    }
    let interior = |x: &Vec<f64>| {
        (0..m).all(|a| {
            [-h, h].iter().all(|s| {
                let mut y = x.clone();
                y[a] += s;
                f.dist(&y) == 0.0
            })
        })
    };
    let reach = h + params.spacing;
    if let Some(x) = f.samples().iter().find(|x| interior(x) && !accepted.iter().any(|p| edist(p, x) <= reach)) {
        return Err(Error::PreconditionViolated(format!("interior point {x:?} of F is not near the conical limit set")));
    }

    let mut kept = Vec::new();
    w.for_each_in(1..w.len() + 1, &mut |_, p| {
        let q = p.to_half_space().expect("half-space image of an interior point");
        let d = f.dist(q.base());
        if !(q.height() < 1.0 && q.height() < d * d) {
            kept.push(q);
        }
    });
    let mesh = if f.is_empty() { None } else { Some(dune_boundary_mesh(f, &params.window, params.spacing, params.mesh_band)?) };
    let mesh_len = mesh.as_ref().map_or(0, |s| s.len());
    let (a, b) = (kept.len(), mesh_len);
    let mut data = Vec::with_capacity((a + b) * (m + 1));
    let (mut i, mut j) = (0usize, 0usize);
    while i < a || j < b {
        // compare (i + 1/2)/a against (j + 1/2)/b without dividing
        let take_w = j >= b || (i < a && (2 * i + 1) * b <= (2 * j + 1) * a);
        if take_w {
            data.extend_from_slice(kept[i].coords());
            i += 1;
        } else {
            data.extend_from_slice(mesh.as_ref().unwrap().point(j + 1).coords());
            j += 1;
        }
    }
    Ok(flat_sequence(m + 1, data))
}

/// Radial conical data in `B²` towards the images on the circle of the
/// Cantor endpoints of depth `depth`.
pub fn cantor_circle_dataset(depth: usize, len: usize, p: i32) -> Result<PointSequence> {
    let t = crate::countable::build_example_set(crate::countable::ExampleSet::CantorAccessible, depth)?;
    let dirs: Vec<IdealPoint> = t.points().iter().map(|x| IdealPoint::plane(x.clone()).to_model(Model::Ball)).collect();
    radial_dataset(&dirs, len, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_interval_first_shell() {
        let v = OpenSetRep::intervals(&[(0.0, 1.0)]).unwrap();
        let balls = cover_balls(&v, 1.0, &CoverParams::new(vec![(0.0, 1.0)], 1)).unwrap();
        assert_eq!(balls, vec![CoverBall { center: vec![0.5], radius: 0.25, shell: 1 }]);
    }

    #[test]
    fn bit_reversal_is_a_permutation() {
        for len in [0usize, 1, 2, 5, 8, 13] {
            let mut v: Vec<usize> = bit_reversed(len).collect();
            v.sort();
            assert_eq!(v, (0..len).collect::<Vec<_>>());
        }
        assert_eq!(bit_reversed(8).collect::<Vec<_>>(), vec![0, 4, 2, 6, 1, 5, 3, 7]);
    }

    #[test]
    fn dune_examples() {
        let u = OpenSetRep::complement_of_points(1, vec![vec![0.0]]).unwrap();
        assert!(dune_contains(&u, &ModelPoint::half_space(0.5, &[0.8]).unwrap()).unwrap());
        assert!(!dune_contains(&u, &ModelPoint::half_space(0.5, &[0.6]).unwrap()).unwrap());
        let all = OpenSetRep::whole(1);
        assert!(dune_contains(&all, &ModelPoint::half_space(0.999, &[1e6]).unwrap()).unwrap());
        assert!(!dune_contains(&all, &ModelPoint::half_space(1.0, &[0.0]).unwrap()).unwrap());
    }

    #[test]
    fn merged_interval_distance() {
        let u = OpenSetRep::intervals(&[(0.0, 1.0), (0.5, 2.0), (3.0, 4.0)]).unwrap();
        assert_eq!(u.dist_to_complement(&[1.5]), 0.5);
        assert_eq!(u.dist_to_complement(&[2.5]), 0.0);
        assert_eq!(u.dist_to_complement(&[3.25]), 0.25);
        let u = u.without(vec![vec![3.5]]).unwrap();
        assert!((u.dist_to_complement(&[3.4]) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn cantor_gap_levels() {
        assert_eq!(cantor_gaps(1), vec![(1.0 / 3.0, 2.0 / 3.0)]);
        let g2 = cantor_gaps(2);
        assert_eq!(g2.len(), 2);
        assert!((g2[1].0 - 7.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn mesh_heights_follow_distance() {
        let f = ClosedSet::finite(1, vec![vec![0.0]]);
        let mesh = dune_boundary_mesh(&f, &[(-0.5, 0.5)], 0.25, 1.0).unwrap();
        let pts = mesh.to_vec(mesh.len());
        assert_eq!(pts.len(), 4);
        assert!((pts[0].height() - 0.25 * (1.0 - 1e-9)).abs() < 1e-15);
        assert!((pts[3].height() - 0.0625 * (1.0 - 1e-9)).abs() < 1e-15);
    }
}
