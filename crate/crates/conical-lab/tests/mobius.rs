use conical_lab::geometry::{chordal, dist, IdealPoint, Model, ModelPoint};
use conical_lab::mobius::{
    compose, invert, lemma_orthogonal_map, psl2_apply, random_isometry, stabilizer_net, Isometry, Matrix2, ExtComplex,
    COMPACTION_THRESHOLD,
};
use conical_lab::sampling::{random_ball_point, random_unit, seeded};
use conical_lab::Error;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

fn unit_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn edist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn boundary_sphere_is_preserved(seed in any::<u64>(), dim in 2usize..5, len in 1usize..8) {
        let mut rng = seeded(seed);
        let g = random_isometry(&mut rng, dim, len);
        for _ in 0..100 {
            let u = random_unit(&mut rng, dim);
            let img = g.apply_ball(&u, true);
            prop_assert!((unit_norm(&img) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn distance_is_preserved(seed in any::<u64>(), dim in 2usize..5, len in 1usize..8) {
        let mut rng = seeded(seed);
        let g = random_isometry(&mut rng, dim, len);
        for model in [Model::Ball, Model::HalfSpace] {
            for _ in 0..10 {
                let p = random_ball_point(&mut rng, dim, 3.0).to_model(model).unwrap();
                let q = random_ball_point(&mut rng, dim, 3.0).to_model(model).unwrap();
                let (gp, gq) = (g.apply_point(&p).unwrap(), g.apply_point(&q).unwrap());
                prop_assert_eq!(gp.model(), model);
                let (d0, d1) = (dist(&p, &q), dist(&gp, &gq));
                prop_assert!((d0 - d1).abs() < 1e-10 * (1.0 + d0), "{} vs {}", d0, d1);
            }
        }
    }

    #[test]
    fn inverse_undoes(seed in any::<u64>(), dim in 2usize..5, len in 1usize..10) {
        let mut rng = seeded(seed);
        let g = random_isometry(&mut rng, dim, len);
        let gg = compose(&invert(&g), &g);
        prop_assert!(gg.approx_eq(&Isometry::identity(dim), 1e-10));
        for _ in 0..20 {
            let p = random_ball_point(&mut rng, dim, 2.0);
            let back = gg.apply_point(&p).unwrap();
            prop_assert!(edist(back.coords(), p.coords()) < 1e-10, "err {} at {:?} len {}", edist(back.coords(), p.coords()), p.coords(), len);
        }
    }

    #[test]
    fn composition_and_orientation(seed in any::<u64>(), dim in 2usize..5) {
        let mut rng = seeded(seed);
        let g = random_isometry(&mut rng, dim, 4);
        let h = random_isometry(&mut rng, dim, 5);
        let gh = compose(&g, &h);
        prop_assert_eq!(gh.orientation(), g.orientation() * h.orientation());
        let p = random_ball_point(&mut rng, dim, 2.5);
        let lhs = gh.apply_point(&p).unwrap();
        let rhs = g.apply_point(&h.apply_point(&p).unwrap()).unwrap();
        prop_assert!(edist(lhs.coords(), rhs.coords()) < 1e-10);
    }

    #[test]
    fn cross_ratio_is_preserved(seed in any::<u64>(), dim in 2usize..5) {
        let mut rng = seeded(seed);
        let g = random_isometry(&mut rng, dim, 5);
        let pts: Vec<Vec<f64>> = (0..4).map(|_| random_unit(&mut rng, dim)).collect();
        let img: Vec<Vec<f64>> = pts.iter().map(|p| g.apply_ball(p, true)).collect();
        let cr = |v: &[Vec<f64>]| edist(&v[0], &v[2]) * edist(&v[1], &v[3]) / (edist(&v[0], &v[1]) * edist(&v[2], &v[3]));
        let (a, b) = (cr(&pts), cr(&img));
        prop_assert!((a - b).abs() < 1e-9 * (1.0 + a), "{} vs {}", a, b);
    }

    #[test]
    fn lemma_map_meets_its_constraints(seed in any::<u64>(), dim in 3usize..6) {
        let mut rng = seeded(seed);
        let z = random_ball_point(&mut rng, dim, 2.5);
        let zc = z.coords().to_vec();
        let zz: f64 = zc.iter().map(|c| c * c).sum();
        let mut e = vec![0.0; dim];
        e[0] = 1.0;
        let me: Vec<f64> = e.iter().map(|c| -c).collect();
        let chord = 2.0 * (1.0 - zz) / (edist(&zc, &e) * edist(&zc, &me));
        // x random, y at the prescribed chordal distance
        let x = random_unit(&mut rng, dim);
        let w = {
            let r = random_unit(&mut rng, dim);
            let d: f64 = r.iter().zip(&x).map(|(a, b)| a * b).sum();
            let p: Vec<f64> = r.iter().zip(&x).map(|(a, b)| a - d * b).collect();
            let n = unit_norm(&p);
            p.into_iter().map(|c| c / n).collect::<Vec<_>>()
        };
        let cos = 1.0 - chord * chord / 2.0;
        let sin = (1.0 - cos * cos).max(0.0).sqrt();
        let y: Vec<f64> = x.iter().zip(&w).map(|(a, b)| cos * a + sin * b).collect();
        let (xi, yi) = (IdealPoint::sphere(x.clone()).unwrap(), IdealPoint::sphere(y.clone()).unwrap());
        let u = lemma_orthogonal_map(&z, &xi, &yi).unwrap();
        prop_assert_eq!(u.orientation(), 1);
        prop_assert!(unit_norm(u.apply_point(&z).unwrap().coords()) < 1e-9);
        prop_assert!(edist(&u.apply_ball(&e, true), &x) < 1e-9);
        prop_assert!(edist(&u.apply_ball(&me, true), &y) < 1e-9);
    }

    #[test]
    fn lemma_map_in_the_plane(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let z = random_ball_point(&mut rng, 2, 2.5);
        let zc = z.coords().to_vec();
        let zz: f64 = zc.iter().map(|c| c * c).sum();
        let chord = 2.0 * (1.0 - zz) / (edist(&zc, &[1.0, 0.0]) * edist(&zc, &[-1.0, 0.0]));
        let half = 2.0 * (chord / 2.0).asin();
        let base: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
        let mut ok = 0;
        for sign in [1.0, -1.0] {
            let x = IdealPoint::angle(base);
            let y = IdealPoint::angle(base + sign * half);
            match lemma_orthogonal_map(&z, &x, &y) {
                Ok(u) => {
                    ok += 1;
                    prop_assert_eq!(u.orientation(), 1);
                    prop_assert!(unit_norm(u.apply_point(&z).unwrap().coords()) < 1e-9);
                    prop_assert!(edist(&u.apply_ball(&[1.0, 0.0], true), &x.unit()) < 1e-9);
                    prop_assert!(edist(&u.apply_ball(&[-1.0, 0.0], true), &y.unit()) < 1e-9);
                }
                Err(Error::SideConditionViolated) => {}
                Err(e) => prop_assert!(false, "unexpected {e}"),
            }
        }
        // exactly one side works unless x, y are antipodal
        if (chord - 2.0).abs() > 1e-6 {
            prop_assert_eq!(ok, 1);
        } else {
            prop_assert!(ok >= 1);
        }
    }
}

fn random_matrix<R: Rng>(rng: &mut R, real: bool) -> Matrix2 {
    loop {
        let mut c = || {
            let im = if real { 0.0 } else { rng.gen_range(-1.5..1.5) };
            Complex64::new(rng.gen_range(-1.5..1.5), im)
        };
        let (a, b, cc, d) = (c(), c(), c(), c());
        if (a * d - b * cc).norm() > 0.1 {
            let m = Matrix2::new(a, b, cc, d).unwrap();
            if real && (a * d - b * cc).re < 0.0 {
                continue;
            }
            return m;
        }
    }
}

#[test]
fn matrix_determinant_is_normalized() {
    let mut rng = seeded(21);
    for _ in 0..200 {
        let m = random_matrix(&mut rng, false);
        assert!((m.det() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }
}

#[test]
fn psl2_preserves_distance() {
    let mut rng = seeded(22);
    for _ in 0..1000 {
        let m = random_matrix(&mut rng, false);
        let p = random_ball_point(&mut rng, 3, 3.0).to_half_space().unwrap();
        let q = random_ball_point(&mut rng, 3, 3.0).to_half_space().unwrap();
        let d0 = dist(&p, &q);
        let d1 = dist(&psl2_apply(&m, &p).unwrap(), &psl2_apply(&m, &q).unwrap());
        assert!((d0 - d1).abs() < 1e-9 * (1.0 + d0), "{d0} vs {d1}");
    }
}

#[test]
fn psl2_boundary_limit() {
    let mut rng = seeded(23);
    for real in [true, false] {
        let dim = if real { 2 } else { 3 };
        for _ in 0..200 {
            let m = random_matrix(&mut rng, real);
            let v: Vec<f64> = (0..dim - 1).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let z = ExtComplex::Finite(Complex64::new(v[0], v.get(1).copied().unwrap_or(0.0)));
            let limit = m.apply_boundary(z).to_ideal(dim);
            let near = psl2_apply(&m, &ModelPoint::half_space(1e-8, &v).unwrap()).unwrap();
            let near_b = near.to_ball().unwrap();
            let lim_b = limit.unit();
            assert!(edist(near_b.coords(), &lim_b) < 1e-6);
        }
    }
}

#[test]
fn matrix_primitive_agrees_with_psl2() {
    let mut rng = seeded(24);
    for _ in 0..100 {
        let m = random_matrix(&mut rng, false);
        let g = Isometry::matrix2(3, m).unwrap();
        let p = random_ball_point(&mut rng, 3, 3.0);
        let a = g.apply_point(&p).unwrap();
        let b = psl2_apply(&m, &p).unwrap();
        assert!(edist(a.coords(), b.coords()) < 1e-10);
        let u = random_unit(&mut rng, 3);
        let bd = g.apply_ball(&u, true);
        let z = ExtComplex::from_ideal(&IdealPoint::sphere(u).unwrap());
        assert!(chordal(&IdealPoint::sphere(bd).unwrap(), &m.apply_boundary(z).to_ideal(3)) < 1e-9);
    }
}

#[test]
fn long_words_are_compacted() {
    for (dim, seed) in [(2usize, 31u64), (3, 32)] {
        let mut rng = seeded(seed);
        let small: Vec<f64> = (0..dim).map(|i| if i == 0 { 1e-4 } else { 0.0 }).collect();
        let step = Isometry::transvection(small).unwrap();
        let spin = random_isometry(&mut rng, dim, 3);
        let steps = COMPACTION_THRESHOLD + 50;
        let mut g = spin.clone();
        for _ in 0..steps {
            g = compose(&step, &g);
        }
        let mut word = spin.word().to_vec();
        word.extend(std::iter::repeat(step.word()[0].clone()).take(steps));
        let long = Isometry::from_word(dim, word).unwrap();
        assert!(g.word().len() < COMPACTION_THRESHOLD);
        assert_eq!(g.orientation(), spin.orientation());
        assert!(g.approx_eq(&long, 1e-8));
    }
}

#[test]
fn stabilizer_net_fixes_and_covers() {
    for (dim, center, n) in [(2usize, vec![0.3, -0.5], 4usize), (3, vec![0.2, 0.1, -0.3], 1)] {
        let x = ModelPoint::ball(center.clone()).unwrap();
        let net = stabilizer_net(&x, n).unwrap();
        for m in &net {
            assert!(edist(m.apply_point(&x).unwrap().coords(), &center) < 1e-10);
            assert_eq!(m.orientation(), 1);
        }
        let mut rng = seeded(41);
        for _ in 0..10 {
            let y = random_unit(&mut rng, dim);
            let target = random_unit(&mut rng, dim);
            let best = net
                .iter()
                .map(|m| edist(&m.apply_ball(&y, true), &target))
                .fold(f64::INFINITY, f64::min);
            assert!(best <= 1.0 / n as f64, "best {best}");
        }
    }
}

#[test]
fn stabilizer_net_at_origin_is_circle_rotations() {
    let o = ModelPoint::origin(Model::Ball, 2);
    for n in [1usize, 2, 5, 10] {
        let net = stabilizer_net(&o, n).unwrap();
        assert_eq!(net.len(), (std::f64::consts::TAU * n as f64).ceil() as usize);
        for k in 0..36 {
            let target = IdealPoint::angle(k as f64 * 0.17).unit();
            let best = net.iter().map(|m| edist(&m.apply_ball(&[1.0, 0.0], true), &target)).fold(f64::INFINITY, f64::min);
            assert!(best <= 1.0 / n as f64);
        }
    }
}

#[test]
fn lemma_antipodal_on_axis() {
    let z = ModelPoint::origin(Model::Ball, 3);
    let mut rng = seeded(51);
    for _ in 0..20 {
        let x = random_unit(&mut rng, 3);
        let y: Vec<f64> = x.iter().map(|c| -c).collect();
        let u = lemma_orthogonal_map(&z, &IdealPoint::sphere(x.clone()).unwrap(), &IdealPoint::sphere(y.clone()).unwrap()).unwrap();
        assert!(edist(&u.apply_ball(&[1.0, 0.0, 0.0], true), &x) < 1e-9);
        assert!(edist(&u.apply_ball(&[-1.0, 0.0, 0.0], true), &y) < 1e-9);
        assert!(unit_norm(u.apply_point(&z).unwrap().coords()) < 1e-9);
    }
    let z2 = ModelPoint::origin(Model::Ball, 2);
    let u = lemma_orthogonal_map(&z2, &IdealPoint::angle(1.0), &IdealPoint::angle(1.0 + std::f64::consts::PI)).unwrap();
    assert!(edist(&u.apply_ball(&[1.0, 0.0], true), &IdealPoint::angle(1.0).unit()) < 1e-9);
}

#[test]
fn serialized_words_apply_identically() {
    let mut rng = seeded(61);
    let g = compose(&random_isometry(&mut rng, 3, 7), &Isometry::matrix2(3, random_matrix(&mut rng, false)).unwrap());
    let back: Isometry = serde_json::from_str(&serde_json::to_string_pretty(&g).unwrap()).unwrap();
    assert!(back.approx_eq(&g, 0.0));
}
