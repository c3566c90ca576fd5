use conical_lab::divergence::{
    aebischer_crosscheck, classify_boundary, conical_data_term, dense_divergence_generator, from_conical_data,
    general_convergence_test, radial_dataset, whole_sphere_divergence, AebischerParams, GeneralConvergence, MobiusSequence,
    PointStatus, DEFAULT_TOL_HI, DEFAULT_TOL_LO,
};
use conical_lab::geometry::{chordal, IdealPoint, Model, ModelPoint};
use conical_lab::limits::{conical_estimate, ConicalConfig, ConicalStatus, PointSequence};
use conical_lab::mobius::{invert, rotation_taking, Isometry};
use conical_lab::sampling::{circle_grid, fibonacci_sphere, random_ball_point, random_ideal, seeded};
use conical_lab::Error;

fn deg(d: f64) -> IdealPoint {
    IdealPoint::angle(d.to_radians())
}

fn params(n: usize) -> AebischerParams {
    AebischerParams::new(ConicalConfig::new(vec![0.5, 1.0, 2.0, 3.0], n))
}

fn edist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn radial_inverse_sequence_converges_generally() {
    let x = deg(70.0);
    let u = x.unit();
    let seq = MobiusSequence::from_fn(400, 2, move |n| {
        let r = 1.0 - 1.0 / (n as f64 + 1.0);
        invert(&Isometry::transvection(u.iter().map(|c| c * r).collect()).unwrap())
    });
    match general_convergence_test(&seq, 400, 1e-2) {
        GeneralConvergence::Converges(y) => assert!(chordal(&x, &y) < 1e-9),
        other => panic!("{other:?}"),
    }
}

#[test]
fn alternating_rotations_do_not_converge() {
    let a = rotation_taking(&[1.0, 0.0], &[0.0, 1.0]);
    let seq = MobiusSequence::from_fn(100, 2, move |n| if n % 2 == 0 { a.clone() } else { Isometry::identity(2) });
    assert_eq!(general_convergence_test(&seq, 100, 1e-2), GeneralConvergence::No);
    let err = aebischer_crosscheck(&seq, &circle_grid(12), &params(100)).unwrap_err();
    assert!(matches!(err, Error::NotGenerallyConvergent));
}

#[test]
fn constant_sequence_converges_everywhere() {
    let mut rng = seeded(3);
    let g = conical_lab::mobius::random_isometry(&mut rng, 3, 4);
    let seq = MobiusSequence::from_vec(vec![g.clone(); 200]).unwrap();
    let samples = fibonacci_sphere(50);
    for c in classify_boundary(&seq, &samples, 200, DEFAULT_TOL_LO, DEFAULT_TOL_HI).unwrap() {
        match c.status {
            PointStatus::Convergent(y) => assert!(chordal(&y, &g.apply_ideal(&c.point)) < 1e-12),
            other => panic!("{other:?}"),
        }
        assert!(c.tail_diameter < 1e-12);
    }
}

#[test]
fn conical_data_identities_random() {
    let mut rng = seeded(4);
    for dim in [2usize, 3, 4] {
        for _ in 0..1000 {
            let z = random_ball_point(&mut rng, dim, 8.0);
            let g = conical_data_term(&z);
            assert_eq!(g.orientation(), 1);
            let o = vec![0.0; dim];
            let r: f64 = z.coords().iter().map(|c| c * c).sum::<f64>().sqrt();
            let mut want = vec![0.0; dim];
            want[0] = r;
            assert!(edist(&g.apply_ball(&o, false), &want) < 1e-9);
            assert!(edist(&invert(&g).apply_ball(&o, false), z.coords()) < 1e-9);
        }
    }
    let seq = PointSequence::from_fn(50, Model::Ball, 2, |n| ModelPoint::ball(vec![1.0 - 1.0 / n as f64, 0.0]).unwrap());
    let g = from_conical_data(&seq);
    for n in 1..=50 {
        let img = g.term(n).apply_ball(&[0.0, 0.0], false);
        assert!(edist(&img, &[1.0 - 1.0 / n as f64, 0.0]) < 1e-9);
    }
}

#[test]
fn singleton_divergence_set() {
    let b = deg(40.0);
    let data = radial_dataset(&[b.clone()], 2000, 3).unwrap();
    let seq = from_conical_data(&data);
    let grid = circle_grid(360);
    let classes = classify_boundary(&seq, &grid, 2000, DEFAULT_TOL_LO, DEFAULT_TOL_HI).unwrap();
    let e0 = IdealPoint::angle(0.0);
    for c in &classes {
        match &c.status {
            // the exceptional point's orbit is -e₀ in exact arithmetic; in f64
            // the image is only good to about 1e-16·2/(1-r) ≈ 2e-6 here
            PointStatus::Convergent(y) if chordal(&c.point, &b) < 1e-9 => {
                assert!(chordal(y, &IdealPoint::angle(std::f64::consts::PI)) < 1e-5)
            }
            PointStatus::Undecided if chordal(&c.point, &b) < 1e-9 => assert!(c.tail_diameter < 1e-4),
            PointStatus::Convergent(y) => assert!(chordal(y, &e0) < 1e-6, "{:?}", c.point),
            other => panic!("{:?} at {:?}", other, c.point),
        }
    }
    let report = aebischer_crosscheck(&seq, &grid, &params(2000)).unwrap();
    assert!(chordal(&report.limit, &e0) < 1e-6);
    assert!(report.agreement() >= 0.99, "{} of {}", report.agreements, report.decided);
    let at_b = report.rows.iter().find(|r| chordal(&r.classification.point, &b) < 1e-9).unwrap();
    assert_eq!(at_b.conical, ConicalStatus::Accepted);
}

#[test]
fn twelve_point_divergence_set() {
    let dirs: Vec<IdealPoint> = (0..12).map(|k| deg(15.0 + 30.0 * k as f64)).collect();
    let data = radial_dataset(&dirs, 2000, 3).unwrap();
    let seq = from_conical_data(&data);
    let grid = circle_grid(360);
    let report = aebischer_crosscheck(&seq, &grid, &params(2000)).unwrap();
    assert!(report.agreement() >= 0.99, "{} of {}", report.agreements, report.decided);
    for r in &report.rows {
        let on_data = dirs.iter().any(|d| chordal(d, &r.classification.point) < 1e-9);
        if on_data {
            assert_eq!(r.classification.status, PointStatus::Divergent);
            assert_eq!(r.conical, ConicalStatus::Accepted);
        } else {
            assert!(matches!(r.classification.status, PointStatus::Convergent(_)));
        }
    }
    // two distinct samples converging to one limit force general convergence
    assert!(matches!(general_convergence_test(&seq, 2000, 1e-2), GeneralConvergence::Converges(_)));
}

#[test]
fn dense_generator_diverges_everywhere() {
    let seq = whole_sphere_divergence(2, 2, 10_000).unwrap();
    assert!(seq.len() >= 10_000);
    match general_convergence_test(&seq, 10_000, 5e-2) {
        GeneralConvergence::Converges(x) => assert!(chordal(&x, &IdealPoint::angle(0.0)) < 1e-6),
        other => panic!("{other:?}"),
    }
    let mut rng = seeded(12);
    let samples: Vec<IdealPoint> = (0..100).map(|_| random_ideal(&mut rng, 2)).collect();
    let classes = classify_boundary(&seq, &samples, 10_000, DEFAULT_TOL_LO, DEFAULT_TOL_HI).unwrap();
    let divergent = classes.iter().filter(|c| c.status == PointStatus::Divergent).count();
    assert!(classes.iter().all(|c| !matches!(c.status, PointStatus::Convergent(_))));
    assert!(divergent >= 50, "{divergent}");
}

#[test]
fn dense_block_sweeps_a_net() {
    let xs = radial_dataset(&[deg(0.0)], 10, 3).unwrap();
    let seq = dense_divergence_generator(&xs, 3000).unwrap();
    // block 2 starts after block 1
    let n = 2usize;
    let x = xs.point(n);
    let (_, delta) = conical_lab::mobius::stabilizer_resolution(&x, n).unwrap();
    let k1 = conical_lab::mobius::orthogonal_net_len(2, conical_lab::mobius::stabilizer_resolution(&xs.point(1), 1).unwrap().1);
    let k2 = conical_lab::mobius::orthogonal_net_len(2, delta);
    let y = deg(123.0);
    let images: Vec<Vec<f64>> = (k1 + 1..=k1 + k2).map(|i| seq.term(i).apply_ideal(&y).unit()).collect();
    let targets = circle_grid(720);
    let worst = targets
        .iter()
        .map(|t| images.iter().map(|p| edist(p, &t.unit())).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    assert!(worst <= 1.0 / n as f64, "worst {worst}");
}

#[test]
fn exceptional_point_is_unique_and_conical() {
    let b = deg(200.0);
    // slow approach keeps the exceptional orbit well conditioned
    let data = radial_dataset(&[b.clone()], 1500, 1).unwrap();
    let seq = from_conical_data(&data);
    let grid = circle_grid(360);
    let report = aebischer_crosscheck(&seq, &grid, &params(1500)).unwrap();
    let odd: Vec<_> = report
        .rows
        .iter()
        .filter(|r| matches!(&r.classification.status, PointStatus::Convergent(y) if chordal(y, &report.limit) > DEFAULT_TOL_HI))
        .collect();
    assert_eq!(odd.len(), 1);
    assert_eq!(odd[0].conical, ConicalStatus::Accepted);
    let v = conical_estimate(&seq.inverse_orbit(), &[b], &ConicalConfig::new(vec![0.5], 1500)).unwrap();
    assert_eq!(v[0].status, ConicalStatus::Accepted);
}
