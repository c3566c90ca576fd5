//! Point sequences in hyperbolic space and finite-data estimators of their
//! conical limit sets and limit sets.
//!
//! Estimators never see the whole sequence: they stream the first `N`
//! terms. A sample is Accepted when enough escaping terms lie within `α`
//! of the ray from `ȷ` to it, with at least one of them in the final
//! quarter of the data. Rejected means no term at all came within the
//! largest tested `α`.

use std::ops::Range;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fmt::g17;
use crate::geometry::{dist, dist_from_origin, IdealPoint, Model, ModelPoint, RayTarget};
use crate::mobius::Isometry;
use crate::vecops::{dist as edist, norm};
use crate::{Error, Result};

/// Distances within this band of `α` are neither counted as in nor out.
pub const TIE_BAND: f64 = 1e-6;
/// Default minimum witness count.
pub const DEFAULT_MIN_WITNESSES: usize = 5;

/// A pure, reentrant map from indices `1..=len` to points.
pub trait SequenceSource: Send + Sync {
    fn len(&self) -> usize;
    fn model(&self) -> Model;
    fn dim(&self) -> usize;
    /// The `n`-th term, `1 <= n <= len`.
    fn point(&self, n: usize) -> ModelPoint;
    /// Visit terms with indices in `range` in order. Sources with cheap
    /// incremental enumeration override this.
    fn for_each_in(&self, range: Range<usize>, f: &mut dyn FnMut(usize, &ModelPoint)) {
        for n in range {
            f(n, &self.point(n));
        }
    }
}

/// Shared handle on a sequence source.
#[derive(Clone)]
pub struct PointSequence {
    src: Arc<dyn SequenceSource>,
}

impl std::fmt::Debug for PointSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PointSequence")
            .field("len", &self.len())
            .field("model", &self.model())
            .field("dim", &self.dim())
            .finish()
    }
}

struct VecSource {
    model: Model,
    dim: usize,
    points: Vec<ModelPoint>,
}

impl SequenceSource for VecSource {
    fn len(&self) -> usize {
        self.points.len()
    }
    fn model(&self) -> Model {
        self.model
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn point(&self, n: usize) -> ModelPoint {
        self.points[n - 1].clone()
    }
}

struct FnSource<F> {
    len: usize,
    model: Model,
    dim: usize,
    f: F,
}

impl<F> SequenceSource for FnSource<F>
where
    F: Fn(usize) -> ModelPoint + Send + Sync,
{
    fn len(&self) -> usize {
        self.len
    }
    fn model(&self) -> Model {
        self.model
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn point(&self, n: usize) -> ModelPoint {
        (self.f)(n)
    }
}

struct IndexedSource {
    base: PointSequence,
    indices: Vec<usize>,
}

impl SequenceSource for IndexedSource {
    fn len(&self) -> usize {
        self.indices.len()
    }
    fn model(&self) -> Model {
        self.base.model()
    }
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn point(&self, n: usize) -> ModelPoint {
        self.base.point(self.indices[n - 1])
    }
}

struct MappedSource {
    base: PointSequence,
    map: Isometry,
}

impl SequenceSource for MappedSource {
    fn len(&self) -> usize {
        self.base.len()
    }
    fn model(&self) -> Model {
        self.base.model()
    }
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn point(&self, n: usize) -> ModelPoint {
        self.map.apply_point(&self.base.point(n)).expect("isometry image left the model")
    }
    fn for_each_in(&self, range: Range<usize>, f: &mut dyn FnMut(usize, &ModelPoint)) {
        let map = &self.map;
        self.base.src.for_each_in(range, &mut |n, p| {
            f(n, &map.apply_point(p).expect("isometry image left the model"));
        });
    }
}

impl PointSequence {
    pub fn new<S: SequenceSource + 'static>(src: S) -> Self {
        Self { src: Arc::new(src) }
    }

    /// Finite sequence from explicit points, all converted to the model of
    /// the first.
    pub fn from_points(points: Vec<ModelPoint>) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyResult(0))?;
        let (model, dim) = (first.model(), first.dim());
        let points = points
            .into_iter()
            .map(|p| {
                if p.dim() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: p.dim() });
                }
                p.to_model(model)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(VecSource { model, dim, points }))
    }

    /// Sequence given by a closure `n ↦ w_n` on `1..=len`; every value must
    /// be in `model`.
    pub fn from_fn<F>(len: usize, model: Model, dim: usize, f: F) -> Self
    where
        F: Fn(usize) -> ModelPoint + Send + Sync + 'static,
    {
        Self::new(FnSource { len, model, dim, f })
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn model(&self) -> Model {
        self.src.model()
    }

    pub fn dim(&self) -> usize {
        self.src.dim()
    }

    /// The `n`-th term (1-based).
    pub fn point(&self, n: usize) -> ModelPoint {
        assert!(n >= 1 && n <= self.len(), "index {n} outside 1..={}", self.len());
        self.src.point(n)
    }

    pub fn for_each_in(&self, range: Range<usize>, f: &mut dyn FnMut(usize, &ModelPoint)) {
        assert!(range.start >= 1 && range.end <= self.len() + 1, "range outside the sequence");
        self.src.for_each_in(range, f)
    }

    /// First `n` terms.
    pub fn to_vec(&self, n: usize) -> Vec<ModelPoint> {
        let mut out = Vec::with_capacity(n);
        self.for_each_in(1..n + 1, &mut |_, p| out.push(p.clone()));
        out
    }

    /// Subsequence at the given 1-based indices.
    pub fn subsequence(&self, indices: Vec<usize>) -> PointSequence {
        assert!(indices.iter().all(|&i| i >= 1 && i <= self.len()), "subsequence index out of range");
        Self::new(IndexedSource { base: self.clone(), indices })
    }

    /// Image under an isometry, term by term.
    pub fn transformed(&self, g: &Isometry) -> PointSequence {
        assert_eq!(g.dim(), self.dim(), "transformed: dimension mismatch");
        Self::new(MappedSource { base: self.clone(), map: g.clone() })
    }
}

/// First index of the final quarter `[⌈3N/4⌉, N]`.
pub fn final_quarter_start(n: usize) -> usize {
    ((3 * n).div_ceil(4)).max(1)
}

/// Whether every term in the final quarter of the first `n` terms is
/// farther than `radius` from `ȷ`.
pub fn is_escaping(seq: &PointSequence, n: usize, radius: f64) -> bool {
    assert!(n >= 1 && n <= seq.len(), "is_escaping: N = {n} outside 1..={}", seq.len());
    let mut ok = true;
    seq.for_each_in(final_quarter_start(n)..n + 1, &mut |_, p| {
        if ok && dist_from_origin(p) <= radius {
            ok = false;
        }
    });
    ok
}

/// Terms among the first `n` with `t < 1/(1 + |v|)`, as a subsequence.
pub fn reduce_to_standard(seq: &PointSequence, n: usize) -> Result<PointSequence> {
    if seq.model() != Model::HalfSpace {
        return Err(Error::InvalidInput("reduce_to_standard needs a half-space sequence".into()));
    }
    let n = n.min(seq.len());
    let mut keep = Vec::new();
    seq.for_each_in(1..n + 1, &mut |i, p| {
        if p.height() < 1.0 / (1.0 + norm(p.base())) {
            keep.push(i);
        }
    });
    if keep.is_empty() {
        return Err(Error::EmptyResult(n));
    }
    Ok(seq.subsequence(keep))
}

/// Escape filter: only terms farther than this from `ȷ` count as witnesses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum EscapeRadius {
    /// `R = c·α` for each tested `α`.
    Scaled(f64),
    Fixed(f64),
}

impl Default for EscapeRadius {
    fn default() -> Self {
        EscapeRadius::Scaled(3f64.sqrt())
    }
}

impl EscapeRadius {
    pub fn radius(&self, alpha: f64) -> f64 {
        match *self {
            EscapeRadius::Scaled(c) => c * alpha,
            EscapeRadius::Fixed(r) => r,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicalConfig {
    /// Ascending.
    pub alphas: Vec<f64>,
    pub min_witnesses: usize,
    pub radius: EscapeRadius,
    /// Number of leading terms used.
    pub n: usize,
}

impl ConicalConfig {
    pub fn new(alphas: Vec<f64>, n: usize) -> Self {
        Self { alphas, min_witnesses: DEFAULT_MIN_WITNESSES, radius: EscapeRadius::default(), n }
    }

    pub fn with_min_witnesses(mut self, k: usize) -> Self {
        self.min_witnesses = k;
        self
    }

    pub fn with_radius(mut self, r: EscapeRadius) -> Self {
        self.radius = r;
        self
    }

    fn validate(&self, seq: &PointSequence) -> Result<()> {
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::InvalidInput("alphas must be positive and nonempty".into()));
        }
        if self.alphas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("alphas must be strictly ascending".into()));
        }
        if self.n == 0 || self.n > seq.len() {
            return Err(Error::InvalidInput(format!("N = {} outside 1..={}", self.n, seq.len())));
        }
        if self.min_witnesses == 0 {
            return Err(Error::InvalidInput("min_witnesses must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConicalStatus {
    Accepted,
    Rejected,
    Undecided,
}

impl ConicalStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConicalStatus::Accepted => "Accepted",
            ConicalStatus::Rejected => "Rejected",
            ConicalStatus::Undecided => "Undecided",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicalVerdict {
    pub point: IdealPoint,
    pub status: ConicalStatus,
    pub alpha_min: Option<f64>,
    pub witness_count: usize,
}

/// Per-(sample, α) witness counts.
#[derive(Clone, Debug, Default)]
struct Counts {
    strict: Vec<u64>,
    loose: Vec<u64>,
    strict_late: Vec<u64>,
}

impl Counts {
    fn zeros(len: usize) -> Self {
        Self { strict: vec![0; len], loose: vec![0; len], strict_late: vec![0; len] }
    }

    fn merge(mut self, o: Counts) -> Counts {
        for (a, b) in self.strict.iter_mut().zip(&o.strict) {
            *a += b;
        }
        for (a, b) in self.loose.iter_mut().zip(&o.loose) {
            *a += b;
        }
        for (a, b) in self.strict_late.iter_mut().zip(&o.strict_late) {
            *a += b;
        }
        self
    }
}

fn chunks(start: usize, end: usize) -> Vec<Range<usize>> {
    let len = end.saturating_sub(start);
    let size = (len / (rayon::current_num_threads() * 8)).clamp(256, 1 << 16);
    (start..end).step_by(size).map(|s| s..(s + size).min(end)).collect()
}

/// Verdict for each sample from the first `cfg.n` terms of `seq`.
pub fn conical_estimate(seq: &PointSequence, samples: &[IdealPoint], cfg: &ConicalConfig) -> Result<Vec<ConicalVerdict>> {
    cfg.validate(seq)?;
    if let Some(s) = samples.iter().find(|s| s.dim() != seq.dim()) {
        return Err(Error::DimensionMismatch { expected: seq.dim(), got: s.dim() });
    }
    let targets: Vec<RayTarget> = samples.iter().map(RayTarget::new).collect();
    let na = cfg.alphas.len();
    let radii: Vec<f64> = cfg.alphas.iter().map(|&a| cfg.radius.radius(a)).collect();
    let late = final_quarter_start(cfg.n);
    let cosh2_cap = (cfg.alphas[na - 1] + TIE_BAND).cosh().powi(2);
    let counts = chunks(1, cfg.n + 1)
        .into_par_iter()
        .map(|range| {
            let mut c = Counts::zeros(samples.len() * na);
            seq.for_each_in(range, &mut |i, w| {
                let d0 = dist_from_origin(w);
                let first = match radii.iter().position(|&r| d0 > r) {
                    Some(f) => f,
                    None => return,
                };
                for (s, t) in targets.iter().enumerate() {
                    if t.surely_beyond(w, cosh2_cap) {
                        continue;
                    }
                    let rho = t.dist(w);
                    if rho >= cfg.alphas[na - 1] + TIE_BAND {
                        continue;
                    }
                    for a in first..na {
                        if d0 <= radii[a] {
                            continue;
                        }
                        let alpha = cfg.alphas[a];
                        if rho < alpha + TIE_BAND {
                            c.loose[s * na + a] += 1;
                            if rho < alpha - TIE_BAND {
                                c.strict[s * na + a] += 1;
                                if i >= late {
                                    c.strict_late[s * na + a] += 1;
                                }
                            }
                        }
                    }
                }
            });
            c
        })
        .reduce(|| Counts::zeros(samples.len() * na), Counts::merge);

    let k = cfg.min_witnesses as u64;
    Ok(samples
        .iter()
        .enumerate()
        .map(|(s, x)| {
            let row = |v: &Vec<u64>, a: usize| v[s * na + a];
            let accepted = (0..na).find(|&a| row(&counts.strict, a) >= k && row(&counts.strict_late, a) >= 1);
            if let Some(a) = accepted {
                ConicalVerdict {
                    point: x.clone(),
                    status: ConicalStatus::Accepted,
                    alpha_min: Some(cfg.alphas[a]),
                    witness_count: row(&counts.strict, a) as usize,
                }
            } else if row(&counts.loose, na - 1) == 0 {
                ConicalVerdict { point: x.clone(), status: ConicalStatus::Rejected, alpha_min: None, witness_count: 0 }
            } else {
                let w = (0..na).map(|a| row(&counts.strict, a)).max().unwrap_or(0);
                ConicalVerdict { point: x.clone(), status: ConicalStatus::Undecided, alpha_min: None, witness_count: w as usize }
            }
        })
        .collect())
}

/// CSV with the sample's ball coordinates, status, `alpha_min` and the
/// witness count.
pub fn verdicts_to_csv(verdicts: &[ConicalVerdict]) -> String {
    let dim = verdicts.first().map(|v| v.point.dim()).unwrap_or(0);
    let mut out = String::new();
    let cols: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    out.push_str(&cols.join(","));
    if dim > 0 {
        out.push(',');
    }
    out.push_str("status,alpha_min,witness_count\n");
    for v in verdicts {
        for c in v.point.unit() {
            out.push_str(&g17(c));
            out.push(',');
        }
        out.push_str(v.status.as_str());
        out.push(',');
        if let Some(a) = v.alpha_min {
            out.push_str(&g17(a));
        }
        out.push(',');
        out.push_str(&v.witness_count.to_string());
        out.push('\n');
    }
    out
}

/// Radial projection of an interior point to the boundary, or `None` at
/// the origin.
pub fn boundary_projection(w: &ModelPoint) -> Option<Vec<f64>> {
    let b = w.to_ball().ok()?;
    let r = norm(b.coords());
    if r == 0.0 {
        return None;
    }
    Some(b.coords().iter().map(|c| c / r).collect())
}

/// Flags samples with at least `k` final-quarter terms whose boundary
/// projection is within chordal distance `tol`.
pub fn limit_set_estimate(seq: &PointSequence, samples: &[IdealPoint], tol: f64, k: usize, n: usize) -> Result<Vec<bool>> {
    if n == 0 || n > seq.len() {
        return Err(Error::InvalidInput(format!("N = {n} outside 1..={}", seq.len())));
    }
    let units: Vec<Vec<f64>> = samples.iter().map(|s| s.unit()).collect();
    let counts = chunks(final_quarter_start(n), n + 1)
        .into_par_iter()
        .map(|range| {
            let mut c = vec![0usize; units.len()];
            seq.for_each_in(range, &mut |_, w| {
                if let Some(p) = boundary_projection(w) {
                    for (s, u) in units.iter().enumerate() {
                        if edist(&p, u) < tol {
                            c[s] += 1;
                        }
                    }
                }
            });
            c
        })
        .reduce(
            || vec![0usize; units.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    Ok(counts.into_iter().map(|c| c >= k).collect())
}

/// Hausdorff distance between finite point sets.
pub fn hausdorff(e: &[ModelPoint], f: &[ModelPoint]) -> Result<f64> {
    if e.is_empty() || f.is_empty() {
        return Err(Error::InvalidInput("hausdorff needs nonempty sets".into()));
    }
    let one_sided = |a: &[ModelPoint], b: &[ModelPoint]| {
        a.par_iter()
            .map(|p| b.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min))
            .reduce(|| 0.0, f64::max)
    };
    Ok(one_sided(e, f).max(one_sided(f, e)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::circle_grid;

    fn radial(n: usize, dir: [f64; 2]) -> PointSequence {
        PointSequence::from_fn(n, Model::Ball, 2, move |k| {
            let r = 1.0 - 1.0 / (k as f64 + 1.0);
            ModelPoint::ball(vec![r * dir[0], r * dir[1]]).unwrap()
        })
    }

    #[test]
    fn final_quarter_bounds() {
        assert_eq!(final_quarter_start(200), 150);
        assert_eq!(final_quarter_start(1), 1);
        assert_eq!(final_quarter_start(5), 4);
    }

    #[test]
    fn escaping_radial_sequence() {
        let seq = PointSequence::from_fn(200, Model::Ball, 2, |n| {
            ModelPoint::ball(vec![1.0 - 1.0 / n as f64, 0.0]).unwrap()
        });
        assert!(is_escaping(&seq, 200, 3.0));
        let c = PointSequence::from_points(vec![ModelPoint::ball(vec![0.5, 0.0]).unwrap(); 10]).unwrap();
        assert!(!is_escaping(&c, 10, 1.2));
    }

    #[test]
    fn standard_reduction() {
        let low = PointSequence::from_fn(50, Model::HalfSpace, 2, |n| ModelPoint::half_space(1.0 / n as f64, &[0.0]).unwrap());
        let r = reduce_to_standard(&low, 50).unwrap();
        assert_eq!(r.len(), 49);
        let high = PointSequence::from_fn(50, Model::HalfSpace, 2, |n| ModelPoint::half_space(n as f64, &[0.0]).unwrap());
        assert!(matches!(reduce_to_standard(&high, 50), Err(Error::EmptyResult(50))));
    }

    #[test]
    fn ray_accepted_and_far_rejected() {
        let seq = radial(400, [0.0, 1.0]);
        let samples = circle_grid(36);
        let cfg = ConicalConfig::new(vec![0.5, 1.0, 2.0], 400);
        let v = conical_estimate(&seq, &samples, &cfg).unwrap();
        assert_eq!(v[9].status, ConicalStatus::Accepted);
        assert_eq!(v[9].alpha_min, Some(0.5));
        assert_eq!(v[27].status, ConicalStatus::Rejected);
    }

    #[test]
    fn csv_layout() {
        let v = vec![ConicalVerdict {
            point: IdealPoint::angle(0.0),
            status: ConicalStatus::Accepted,
            alpha_min: Some(0.5),
            witness_count: 7,
        }];
        assert_eq!(verdicts_to_csv(&v), "x0,x1,status,alpha_min,witness_count\n1,0,Accepted,0.5,7\n");
    }

    #[test]
    fn hausdorff_single_pair() {
        let o = ModelPoint::origin(Model::Ball, 2);
        let p = ModelPoint::ball(vec![0.6, 0.0]).unwrap();
        let h = hausdorff(&[o.clone()], &[p]).unwrap();
        assert!((h - (1.6f64 / 0.4).ln()).abs() < 1e-14);
        assert_eq!(hausdorff(&[o.clone()], &[o]).unwrap(), 0.0);
    }
}
