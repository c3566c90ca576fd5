//! Seeded residual suites for the closed-form geometry identities and the
//! isometry machinery. Each check reports the worst residual over its
//! trials; a suite passes when every residual is below [`SUITE_TOL`].

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{
    dist, dist_to_geodesic, key_chord_identity, cone_angle, shadow_ball_infinity, Geodesic, IdealPoint,
    ModelPoint,
};
use crate::mobius::{compose, invert, probe_points, psl2_apply, random_isometry, ExtComplex, Matrix2};
use crate::sampling::{random_ball_point, random_ideal, random_unit, seeded};
use crate::vecops::{axpy, dist as edist, norm2};
use crate::{Error, Result};

pub const SUITE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub trials: usize,
    pub max_residual: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub dim: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.max_residual).fold(0.0, f64::max)
    }
}

struct Tally {
    name: &'static str,
    trials: usize,
    worst: f64,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self { name, trials: 0, worst: 0.0 }
    }

    fn push(&mut self, r: f64) {
        self.trials += 1;
        // NaN must fail the check, so it is never absorbed by max
        self.worst = if r.is_nan() || self.worst.is_nan() { f64::NAN } else { self.worst.max(r) };
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name.into(),
            trials: self.trials,
            max_residual: self.worst,
            passed: self.worst < SUITE_TOL,
        }
    }
}

fn check_args(dim: usize, trials: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidInput(format!("suite dimension must be at least 2, got {dim}")));
    }
    if trials == 0 {
        return Err(Error::InvalidInput("suite needs at least one trial".into()));
    }
    Ok(())
}

fn random_plane_point<R: Rng>(rng: &mut R, m: usize, spread: f64) -> Vec<f64> {
    (0..m).map(|_| rng.gen_range(-spread..spread)).collect()
}

/// Chord identity `|x - y| = 2 / cosh ρ(ȷ, γ_xy)`, the cone half-angle
/// `cos θ cosh α = 1` against the distance to a vertical geodesic, and the
/// shadow radius `t sinh α` seen from infinity. `trials` configurations per
/// identity in `H^dim`.
pub fn geometry_suite(dim: usize, trials: usize, seed: u64) -> Result<SuiteReport> {
    check_args(dim, trials)?;
    let m = dim - 1;
    let mut rng = seeded(seed);
    let mut chord = Tally::new("key_chord_identity");
    let mut cone = Tally::new("cone_angle_vs_distance");
    let mut shadow = Tally::new("shadow_radius_from_infinity");

    for _ in 0..trials {
        let x = random_ideal(&mut rng, dim);
        let y = random_ideal(&mut rng, dim);
        let (lhs, rhs) = key_chord_identity(&x, &y)?;
        chord.push((lhs - rhs).abs());

        // a point on the cone boundary about the vertical geodesic over `v`
        let alpha = rng.gen_range(0.05..4.0);
        let theta = cone_angle(alpha);
        let v = random_plane_point(&mut rng, m, 3.0);
        let t = rng.gen_range(0.1..10.0);
        let base = axpy(&v, t * theta.tan(), &random_unit(&mut rng, m));
        let w = ModelPoint::half_space(t, &base)?;
        let g = Geodesic::line(IdealPoint::plane(v), IdealPoint::infinity(dim))?;
        cone.push((dist_to_geodesic(&w, &g) - alpha).abs());

        // a boundary point on the rim of Shad_∞^α(w)
        let alpha = rng.gen_range(0.05..4.0);
        let t = rng.gen_range(0.1..10.0);
        let w = ModelPoint::half_space(t, &random_plane_point(&mut rng, m, 3.0))?;
        let (center, radius) = shadow_ball_infinity(&w, alpha);
        let rel = (radius - t * alpha.sinh()).abs() / radius;
        let rim = axpy(&center, radius, &random_unit(&mut rng, m));
        let g = Geodesic::line(IdealPoint::infinity(dim), IdealPoint::plane(rim))?;
        shadow.push((dist_to_geodesic(&w, &g) - alpha).abs().max(rel));
    }

    Ok(SuiteReport {
        suite: "geometry".into(),
        dim,
        seed,
        tolerance: SUITE_TOL,
        checks: vec![chord.finish(), cone.finish(), shadow.finish()],
    })
}

fn random_matrix<R: Rng>(rng: &mut R, real: bool) -> Matrix2 {
    loop {
        let mut c = || {
            let im = if real { 0.0 } else { rng.gen_range(-1.5..1.5) };
            Complex64::new(rng.gen_range(-1.5..1.5), im)
        };
        let (a, b, cc, d) = (c(), c(), c(), c());
        let det = a * d - b * cc;
        if det.norm() > 0.1 && !(real && det.re < 0.0) {
            if let Ok(mx) = Matrix2::new(a, b, cc, d) {
                return mx;
            }
        }
    }
}

// Ball coordinates of a half-space point, without the interior check that
// rejects points this close to the sphere.
fn half_to_ball(t: f64, v: &[f64]) -> Vec<f64> {
    let v2 = norm2(v);
    let d = (t + 1.0).powi(2) + v2;
    let mut out = vec![(1.0 - t * t - v2) / d];
    out.extend(v.iter().map(|c| 2.0 * c / d));
    out
}

// Height of the interior point standing in for a boundary limit.
const LIMIT_HEIGHT: f64 = 1e-13;

/// Distance invariance, associativity on the fixed probe points, inverse
/// round trip and the boundary limit of the `PSL(2)` action (in dimension
/// `min(dim, 3)`), over `trials` seeded random words.
pub fn isometry_suite(dim: usize, trials: usize, seed: u64) -> Result<SuiteReport> {
    check_args(dim, trials)?;
    let mut rng = seeded(seed);
    let probes = probe_points(dim);
    let mut invariance = Tally::new("distance_invariance");
    let mut assoc = Tally::new("composition_associativity");
    let mut round_trip = Tally::new("inverse_round_trip");
    let mut limit = Tally::new("psl2_boundary_limit");
    let low = dim.min(3);

    for _ in 0..trials {
        let lens: [usize; 3] = std::array::from_fn(|_| rng.gen_range(1..8));
        let f = random_isometry(&mut rng, dim, lens[0]);
        let g = random_isometry(&mut rng, dim, lens[1]);
        let h = random_isometry(&mut rng, dim, lens[2]);

        let p = random_ball_point(&mut rng, dim, 3.0);
        let q = random_ball_point(&mut rng, dim, 3.0);
        let d0 = dist(&p, &q);
        let d1 = dist(&f.apply_point(&p)?, &f.apply_point(&q)?);
        invariance.push((d0 - d1).abs() / (1.0 + d0));

        let left = compose(&compose(&f, &g), &h);
        let right = compose(&f, &compose(&g, &h));
        let worst = probes
            .iter()
            .map(|x| edist(&left.apply_ball(x, false), &right.apply_ball(x, false)))
            .fold(0.0, f64::max);
        assoc.push(worst);

        let back = compose(&invert(&f), &f).apply_point(&p)?;
        round_trip.push(edist(back.coords(), p.coords()));

        let mx = random_matrix(&mut rng, low == 2);
        let v: Vec<f64> = (0..low - 1).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let z = ExtComplex::Finite(Complex64::new(v[0], v.get(1).copied().unwrap_or(0.0)));
        let target = mx.apply_boundary(z).to_ideal(low).unit();
        let near = psl2_apply(&mx, &ModelPoint::half_space(LIMIT_HEIGHT, &v)?)?;
        limit.push(edist(&half_to_ball(near.height(), near.base()), &target));
    }

    Ok(SuiteReport {
        suite: "isometry".into(),
        dim,
        seed,
        tolerance: SUITE_TOL,
        checks: vec![invariance.finish(), assoc.finish(), round_trip.finish(), limit.finish()],
    })
}
