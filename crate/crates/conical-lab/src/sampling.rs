//! Seeded random sampling and deterministic boundary grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{IdealPoint, ModelPoint};
use crate::vecops::{norm, scale};

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal deviate (Box-Muller).
pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Uniformly distributed unit vector in `R^dim`.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| normal(rng)).collect();
        let n = norm(&v);
        if n > 1e-8 {
            return scale(&v, 1.0 / n);
        }
    }
}

pub fn random_ideal<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> IdealPoint {
    IdealPoint::Sphere(random_unit(rng, dim))
}

/// Ball point with hyperbolic distance from the origin uniform in
/// `[0, rho_max]` and uniform direction.
pub fn random_ball_point<R: Rng + ?Sized>(rng: &mut R, dim: usize, rho_max: f64) -> ModelPoint {
    let rho = rng.gen::<f64>() * rho_max;
    let r = (rho / 2.0).tanh();
    ModelPoint::ball(scale(&random_unit(rng, dim), r)).expect("radius below rho_max stays interior")
}

/// `n` equally spaced points on `S¹`, starting at angle 0.
pub fn circle_grid(n: usize) -> Vec<IdealPoint> {
    (0..n)
        .map(|k| IdealPoint::angle(std::f64::consts::TAU * k as f64 / n as f64))
        .collect()
}

/// Fibonacci lattice of `n` points on `S²`.
pub fn fibonacci_sphere(n: usize) -> Vec<IdealPoint> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * k as f64;
            IdealPoint::Sphere(vec![z, r * phi.cos(), r * phi.sin()])
        })
        .collect()
}
