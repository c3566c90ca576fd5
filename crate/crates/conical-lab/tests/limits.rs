use conical_lab::geometry::{chordal, dist, dist_from_origin, IdealPoint, Model, ModelPoint, RayTarget};
use conical_lab::limits::{
    conical_estimate, hausdorff, is_escaping, limit_set_estimate, reduce_to_standard, ConicalConfig, ConicalStatus,
    EscapeRadius, PointSequence,
};
use conical_lab::mobius::{random_isometry, rotation_taking, Isometry};
use conical_lab::sampling::{circle_grid, fibonacci_sphere, random_unit, seeded};
use proptest::prelude::*;
use rand::Rng;

fn ball_at(dir: &[f64], rho: f64) -> ModelPoint {
    let r = (rho / 2.0).tanh();
    ModelPoint::ball(dir.iter().map(|c| c * r).collect()).unwrap()
}

/// Terms cycle over a few random directions at growing distance, each
/// jittered sideways by a random hyperbolic offset of at most about 2.
fn clustered(seed: u64, dim: usize, n: usize, dirs: usize) -> PointSequence {
    let mut rng = seeded(seed);
    let centers: Vec<Vec<f64>> = (0..dirs).map(|_| random_unit(&mut rng, dim)).collect();
    let jitter: Vec<Vec<f64>> = (0..n).map(|_| random_unit(&mut rng, dim)).collect();
    let amp: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    PointSequence::from_fn(n, Model::Ball, dim, move |k| {
        let c = &centers[k % centers.len()];
        let rho = 1.0 + 0.8 * (k as f64).ln();
        let e = 2.0 * amp[k - 1] / rho.cosh();
        let d: Vec<f64> = c.iter().zip(&jitter[k - 1]).map(|(a, b)| a + e * b).collect();
        let nd = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        ball_at(&d.iter().map(|x| x / nd).collect::<Vec<_>>(), rho)
    })
}

fn samples(dim: usize) -> Vec<IdealPoint> {
    if dim == 2 {
        circle_grid(72)
    } else {
        fibonacci_sphere(120)
    }
}

#[test]
fn ray_sequence_reach() {
    let x = IdealPoint::angle(0.7);
    let seq = PointSequence::from_fn(500, Model::Ball, 2, {
        let u = x.unit();
        move |n| ball_at(&u, 0.05 * n as f64)
    });
    let alphas = vec![0.5, 1.0, 2.0];
    let r = 3.0;
    let mut grid = circle_grid(360);
    grid.push(x.clone());
    let cfg = ConicalConfig::new(alphas.clone(), 500).with_radius(EscapeRadius::Fixed(r));
    let v = conical_estimate(&seq, &grid, &cfg).unwrap();
    let last = v.last().unwrap();
    assert_eq!(last.status, ConicalStatus::Accepted);
    assert_eq!(last.alpha_min, Some(0.5));
    let reach = 2.0 / (r - alphas[2]).cosh();
    let mut checked = 0;
    for vd in &v {
        if chordal(&vd.point, &x) > reach {
            assert_eq!(vd.status, ConicalStatus::Rejected);
            checked += 1;
        }
    }
    assert!(checked > 150);
}

#[test]
fn bounded_sequence_rejected_everywhere() {
    let mut rng = seeded(5);
    let pts: Vec<ModelPoint> = (0..2000).map(|_| ball_at(&random_unit(&mut rng, 3), 4.0 * rng.gen::<f64>())).collect();
    let seq = PointSequence::from_points(pts).unwrap();
    // every term is inside the escape radius of every tested α
    let cfg = ConicalConfig::new(vec![3.0, 4.0, 5.0], 2000);
    for v in conical_estimate(&seq, &samples(3), &cfg).unwrap() {
        assert_eq!(v.status, ConicalStatus::Rejected);
    }
}

#[test]
fn parabolic_orbit_fixed_point() {
    // orbit of ȷ under v ↦ v + 1, seen in the ball; its fixed point is -e
    let seq = PointSequence::from_fn(10_000, Model::Ball, 2, |n| {
        ModelPoint::half_space(1.0, &[n as f64]).unwrap().to_ball().unwrap()
    });
    let target = [IdealPoint::sphere(vec![-1.0, 0.0]).unwrap()];
    let alphas = vec![0.5, 1.0, 2.0, 3.0];
    for n in [20usize, 10_000] {
        let v = conical_estimate(&seq, &target, &ConicalConfig::new(alphas.clone(), n)).unwrap();
        assert_eq!(v[0].status, ConicalStatus::Rejected, "N = {n}");
    }
    // with a small escape radius a few early terms witness, none late
    let small = |n| ConicalConfig::new(alphas.clone(), n).with_radius(EscapeRadius::Fixed(1.0));
    let v = conical_estimate(&seq, &target, &small(10_000)).unwrap();
    assert_eq!(v[0].status, ConicalStatus::Undecided);
    assert!(v[0].witness_count <= 10);
    // every term is still in the limit set's reach
    assert!(limit_set_estimate(&seq, &target, 0.01, 5, 10_000).unwrap()[0]);
}

#[test]
fn escaping_under_conjugation() {
    let seq = PointSequence::from_fn(200, Model::Ball, 2, |n| ModelPoint::ball(vec![1.0 - 1.0 / n as f64, 0.0]).unwrap());
    assert!(is_escaping(&seq, 200, 3.0));
    let mut rng = seeded(8);
    for _ in 0..20 {
        let g = random_isometry(&mut rng, 2, 3);
        let m = dist_from_origin(&g.apply_point(&ModelPoint::origin(Model::Ball, 2)).unwrap());
        let moved = seq.transformed(&g);
        for r in [1.0, 2.0, 3.0, 4.0] {
            if is_escaping(&seq, 200, r + m) {
                assert!(is_escaping(&moved, 200, r));
            }
            if !is_escaping(&seq, 200, r - m) {
                assert!(!is_escaping(&moved, 200, r));
            }
        }
    }
}

#[test]
fn standard_reduction_drops_only_infinity() {
    // alternating: low terms tending to 0, high terms tending to ∞
    let seq = PointSequence::from_fn(4000, Model::HalfSpace, 2, |n| {
        if n % 2 == 0 {
            ModelPoint::half_space(1.0 / n as f64, &[0.0]).unwrap()
        } else {
            ModelPoint::half_space(n as f64, &[0.5]).unwrap()
        }
    });
    let red = reduce_to_standard(&seq, 4000).unwrap();
    assert_eq!(red.len(), 2000);
    assert!(red.to_vec(red.len()).iter().all(|p| p.height() < 1.0));
    let mut grid = circle_grid(90);
    grid.push(IdealPoint::plane(vec![0.0]));
    grid.push(IdealPoint::infinity(2));
    let cfg = |n| ConicalConfig::new(vec![0.5, 1.0, 2.0], n);
    let before = conical_estimate(&seq, &grid, &cfg(4000)).unwrap();
    let after = conical_estimate(&red, &grid, &cfg(2000)).unwrap();
    let inf_idx = grid.len() - 1;
    assert_eq!(before[inf_idx].status, ConicalStatus::Accepted);
    assert_eq!(after[inf_idx].status, ConicalStatus::Rejected);
    for i in 0..inf_idx {
        if chordal(&grid[i], &grid[inf_idx]) < 1e-9 {
            continue;
        }
        let (a, b) = (before[i].status == ConicalStatus::Accepted, after[i].status == ConicalStatus::Accepted);
        assert_eq!(a, b, "sample {i}");
    }
    assert_eq!(after[inf_idx - 1].status, ConicalStatus::Accepted);
}

#[test]
fn limit_set_single_and_alternating() {
    let x = IdealPoint::angle(1.0);
    let y = IdealPoint::angle(2.5);
    let grid = {
        let mut g = circle_grid(360);
        g.push(x.clone());
        g.push(y.clone());
        g
    };
    let (xu, yu) = (x.unit(), y.unit());
    let single = PointSequence::from_fn(1000, Model::Ball, 2, move |n| ball_at(&xu, 0.02 * n as f64));
    let flags = limit_set_estimate(&single, &grid, 0.01, 5, 1000).unwrap();
    for (p, f) in grid.iter().zip(&flags) {
        assert_eq!(*f, chordal(p, &x) < 0.01, "{p:?}");
    }
    let xu = x.unit();
    let alt = PointSequence::from_fn(1000, Model::Ball, 2, move |n| ball_at(if n % 2 == 0 { &xu } else { &yu }, 0.02 * n as f64));
    let flags = limit_set_estimate(&alt, &grid, 0.01, 5, 1000).unwrap();
    assert!(flags[grid.len() - 1] && flags[grid.len() - 2]);
    for (p, f) in grid.iter().zip(&flags) {
        assert_eq!(*f, chordal(p, &x) < 0.01 || chordal(p, &y) < 0.01);
    }
}

#[test]
fn hausdorff_examples() {
    let o = ModelPoint::origin(Model::Ball, 3);
    for r in [0.1, 0.5, 0.9, 0.999] {
        let p = ModelPoint::ball(vec![r, 0.0, 0.0]).unwrap();
        let h = hausdorff(&[o.clone()], &[p]).unwrap();
        assert!((h - ((1.0 + r) / (1.0 - r)).ln()).abs() < 1e-12 * (1.0 + h));
    }
    let mut rng = seeded(9);
    let e: Vec<ModelPoint> = (0..30).map(|_| ball_at(&random_unit(&mut rng, 3), 3.0 * rng.gen::<f64>())).collect();
    assert_eq!(hausdorff(&e, &e).unwrap(), 0.0);
}

#[test]
fn csv_round_trip_columns() {
    let seq = clustered(3, 2, 500, 3);
    let cfg = ConicalConfig::new(vec![0.5, 1.0], 500);
    let v = conical_estimate(&seq, &circle_grid(8), &cfg).unwrap();
    let csv = conical_lab::limits::verdicts_to_csv(&v);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 9);
    for (l, vd) in lines[1..].iter().zip(&v) {
        let cols: Vec<&str> = l.split(',').collect();
        assert_eq!(cols.len(), 5);
        assert_eq!(cols[2], vd.status.as_str());
        assert_eq!(cols[4].parse::<usize>().unwrap(), vd.witness_count);
    }
}

fn accepted_at(seq: &PointSequence, samples: &[IdealPoint], alpha: f64, r: f64, n: usize) -> Vec<bool> {
    let cfg = ConicalConfig::new(vec![alpha], n).with_radius(EscapeRadius::Fixed(r)).with_min_witnesses(3);
    conical_estimate(seq, samples, &cfg).unwrap().iter().map(|v| v.status == ConicalStatus::Accepted).collect()
}

proptest! {
    #[test]
    fn ray_screen_never_drops_a_witness(
        a in -5.0f64..5.0, b in -5.0f64..5.0, t in 1e-8f64..10.0, x in -5.0f64..5.0, y in -5.0f64..5.0, cap in 0.01f64..6.0,
    ) {
        let target = RayTarget::new(&IdealPoint::plane(vec![a, b]));
        let w = ModelPoint::half_space(t, &[x, y]).unwrap();
        if target.surely_beyond(&w, cap.cosh().powi(2)) {
            prop_assert!(target.dist(&w) >= cap * (1.0 - 1e-9));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rotation_equivariance(seed in any::<u64>(), dim in 2usize..4) {
        let mut rng = seeded(seed);
        let seq = clustered(seed, dim, 3000, 4);
        let u = random_unit(&mut rng, dim);
        let w = random_unit(&mut rng, dim);
        let g = rotation_taking(&u, &w);
        let grid = samples(dim);
        let moved: Vec<IdealPoint> = grid.iter().map(|x| g.apply_ideal(x)).collect();
        let cfg = ConicalConfig::new(vec![0.5, 1.0, 2.0], 3000);
        let a = conical_estimate(&seq, &grid, &cfg).unwrap();
        let b = conical_estimate(&seq.transformed(&g), &moved, &cfg).unwrap();
        for (va, vb) in a.iter().zip(&b) {
            prop_assert_eq!(va.status, vb.status);
            prop_assert_eq!(va.alpha_min, vb.alpha_min);
            prop_assert_eq!(va.witness_count, vb.witness_count);
        }
    }

    #[test]
    fn isometry_moves_verdicts_by_displacement(seed in any::<u64>(), dim in 2usize..4) {
        let mut rng = seeded(seed);
        let seq = clustered(seed, dim, 3000, 4);
        let g: Isometry = random_isometry(&mut rng, dim, 2);
        let m = dist_from_origin(&g.apply_point(&ModelPoint::origin(Model::Ball, dim)).unwrap());
        let grid = samples(dim);
        let moved: Vec<IdealPoint> = grid.iter().map(|x| g.apply_ideal(x)).collect();
        let before = accepted_at(&seq, &grid, 1.0, 2.0 + m, 3000);
        let after = accepted_at(&seq.transformed(&g), &moved, 1.0 + m, 2.0, 3000);
        for (a, b) in before.iter().zip(&after) {
            prop_assert!(!a || *b);
        }
    }

    #[test]
    fn acceptance_monotone_in_alpha(seed in any::<u64>(), dim in 2usize..4) {
        let seq = clustered(seed, dim, 2000, 3);
        let grid = samples(dim);
        let per: Vec<Vec<bool>> = [0.25, 0.5, 1.0, 2.0].iter().map(|&a| accepted_at(&seq, &grid, a, 2.0, 2000)).collect();
        for w in per.windows(2) {
            for (a, b) in w[0].iter().zip(&w[1]) {
                prop_assert!(!a || *b);
            }
        }
    }

    #[test]
    fn accepted_never_becomes_rejected(seed in any::<u64>(), dim in 2usize..4) {
        let seq = clustered(seed, dim, 4000, 3);
        let grid = samples(dim);
        let run = |n| conical_estimate(&seq, &grid, &ConicalConfig::new(vec![0.5, 1.0, 2.0], n)).unwrap();
        let (early, late) = (run(1000), run(4000));
        for (a, b) in early.iter().zip(&late) {
            if a.status == ConicalStatus::Accepted {
                prop_assert_ne!(b.status, ConicalStatus::Rejected);
            }
        }
    }

    #[test]
    fn perturbation_by_one(seed in any::<u64>(), dim in 2usize..4) {
        let mut rng = seeded(seed ^ 0xabc);
        let seq = clustered(seed, dim, 2000, 3);
        let pts = seq.to_vec(2000);
        // T_{-p} sends the origin to p, so q at distance <= 1 from the origin lands within 1 of p
        let moved: Vec<ModelPoint> = pts
            .iter()
            .map(|p| {
                let q = ball_at(&random_unit(&mut rng, dim), rng.gen::<f64>());
                invert_to(p).apply_point(&q).unwrap()
            })
            .collect();
        for (p, q) in pts.iter().zip(&moved) {
            prop_assert!(dist(p, q) <= 1.0 + 1e-9);
        }
        prop_assert!(hausdorff(&pts, &moved).unwrap() <= 1.0 + 1e-9);
        let other = PointSequence::from_points(moved).unwrap();
        let grid = samples(dim);
        let before = accepted_at(&seq, &grid, 1.0, 3.0, 2000);
        let after = accepted_at(&other, &grid, 2.0, 2.0, 2000);
        for (a, b) in before.iter().zip(&after) {
            prop_assert!(!a || *b);
        }
    }
}

/// The transvection sending the origin to `p`.
fn invert_to(p: &ModelPoint) -> Isometry {
    Isometry::transvection(p.coords().iter().map(|c| -c).collect()).unwrap()
}
