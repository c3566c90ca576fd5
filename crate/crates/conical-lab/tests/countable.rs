use conical_lab::countable::*;
use conical_lab::geometry::{dist_to_vertical, IdealPoint, ModelPoint};
use conical_lab::limits::{conical_estimate, ConicalConfig, ConicalStatus, EscapeRadius};
use conical_lab::Error;
use proptest::prelude::*;

fn finite_sets() -> Vec<FiniteSet> {
    vec![
        FiniteSet::new(vec![vec![0.0]]).unwrap(),
        FiniteSet::new((0..25).map(|i| vec![(i as f64 * 0.37).sin()]).collect()).unwrap(),
        FiniteSet::new((0..12).map(|i| {
            let a = i as f64 * std::f64::consts::PI / 6.0;
            vec![a.cos(), a.sin()]
        }).collect())
        .unwrap(),
        FiniteSet::new(vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.5, -0.25]]).unwrap(),
    ]
}

#[test]
fn finite_sets_have_rank_one() {
    for f in finite_sets() {
        let e = f.truncate(3).unwrap();
        let p = GdParams { scale_min: Some(1e-3), ..GdParams::default() };
        for z in e.points() {
            assert_eq!(gd_test(&e, z, &p).unwrap().status, GdStatus::NotInGd);
        }
        let r = rank_iterate(&e, &p, 5).unwrap();
        assert_eq!(r.outcome, RankOutcome::EmptyAtRank(2));
        assert!(r.ranks.iter().all(|&k| k == 1));
    }
}

#[test]
fn selfsim_b_and_cantor_rank_one() {
    for set in [ExampleSet::SelfSimB, ExampleSet::CantorAccessible] {
        let e = build_example_set(set, 6).unwrap();
        let r = rank_iterate(&e, &GdParams::default(), 6).unwrap();
        assert_eq!(r.outcome, RankOutcome::EmptyAtRank(2), "{set:?}");
    }
}

#[test]
fn selfsim_a_stalls() {
    let e = build_example_set(ExampleSet::SelfSimA, 6).unwrap();
    let r = rank_iterate(&e, &GdParams::default(), 6).unwrap();
    assert!(matches!(r.outcome, RankOutcome::Stalled { rank: 1, .. }), "{:?}", r.outcome);
    assert!(r.matched.iter().filter(|&&m| m).count() >= 3);
    assert!(r.matched_survival().unwrap() >= 0.99);
    // 0 is a limit of 1/(2n) ∈ A at every scale.
    let i0 = e.points().iter().position(|p| p[0] == 0.0).unwrap();
    assert!(r.matched[i0]);
    assert_eq!(r.verdicts[i0].status, GdStatus::InGd);
}

#[test]
fn selfsim_b_zero_has_gap_witnesses() {
    let e = build_example_set(ExampleSet::SelfSimB, 5).unwrap();
    let v = gd_test(&e, &[0.0], &GdParams::default()).unwrap();
    assert_eq!(v.status, GdStatus::NotInGd);
    assert!(v.eps.unwrap() <= 0.25);
    for w in &v.witnesses {
        let r = v.eps.unwrap() * w.radius;
        assert!(e.ball_is_empty(&w.v, r));
        assert!(e.nearest_distance(&w.v) >= r);
    }
}

#[test]
fn rationals_dense() {
    let e = build_example_set(ExampleSet::Rationals01, 50).unwrap();
    let p = GdParams { scale_min: Some(0.1), octaves: 1, ..GdParams::default() };
    for i in 0..=200 {
        let z = 0.25 + 0.5 * i as f64 / 200.0;
        assert_eq!(gd_test(&e, &[z], &p).unwrap().status, GdStatus::InGd, "z = {z}");
    }
}

#[test]
fn product_law() {
    for kind in [SelfSimKind::A, SelfSimKind::B] {
        let f = SelfSim { kind };
        let prod = Product { first: Box::new(f), second: Box::new(f) };
        let e1 = f.truncate(4).unwrap();
        let ep = prod.truncate(4).unwrap();
        let p = GdParams { scale_min: Some(4.0 * ep.resolution()), ..GdParams::default() };
        let zs: Vec<f64> = e1.points().iter().step_by(9).map(|p| p[0]).collect();
        let verdict: Vec<GdStatus> = zs.iter().map(|&z| gd_test(&e1, &[z], &p).unwrap().status).collect();
        let mut decisive = 0;
        for (a, va) in zs.iter().zip(&verdict) {
            for (b, vb) in zs.iter().zip(&verdict) {
                let vp = gd_test(&ep, &[*a, *b], &p).unwrap().status;
                let both_in = *va == GdStatus::InGd && *vb == GdStatus::InGd;
                assert_eq!(vp == GdStatus::InGd, both_in, "({a}, {b})");
                if *va == GdStatus::NotInGd || *vb == GdStatus::NotInGd {
                    assert_eq!(vp, GdStatus::NotInGd, "({a}, {b})");
                    decisive += 1;
                } else if both_in {
                    decisive += 1;
                }
            }
        }
        assert!(decisive > 100, "{kind:?}: only {decisive} decisive probes");
    }
}

#[test]
fn scale_floor_enforced() {
    let e = build_example_set(ExampleSet::CantorAccessible, 4).unwrap();
    let p = GdParams { scale_min: Some(3.9 * e.resolution()), ..GdParams::default() };
    assert!(matches!(rank_iterate(&e, &p, 3), Err(Error::ScaleTooFine { .. })));
    let bad = GdParams { eps_list: vec![0.25, 0.5], ..GdParams::default() };
    assert!(matches!(gd_test(&e, &[0.0], &bad), Err(Error::InvalidInput(_))));
}

#[test]
fn failure_witnesses_at_twice_alpha() {
    let e = FiniteSet::new(vec![vec![0.0]]).unwrap().truncate(1).unwrap();
    let p = GdParams { eps_list: vec![0.25], scale_min: Some(1e-3), ..GdParams::default() };
    let w = gd_failure_witnesses(&e, &[0.0], &p).unwrap();
    assert!((w.alpha - 2f64.acosh()).abs() < 1e-15);
    assert_eq!(w.points.len(), p.octaves);
    for (pt, (c, r)) in w.points.iter().zip(&w.shadows) {
        assert!((dist_to_vertical(pt, &[0.0]) - 2.0 * w.alpha).abs() < 1e-9);
        assert!(e.nearest_distance(c) >= *r);
    }
    let a = build_example_set(ExampleSet::SelfSimA, 6).unwrap();
    assert_eq!(gd_failure_witnesses(&a, &[0.0], &GdParams::default()).unwrap_err(), Error::NoWitness);
}

#[test]
fn phi_is_increasing() {
    let mut xs: Vec<f64> = (0..10_000).map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / 10_000.0).collect();
    // Dense near zero too, where the values underflow.
    xs.extend((1..200).flat_map(|k| [1.3f64.powi(-k), -(1.3f64.powi(-k))]));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let imgs: Vec<PhiImage> = xs.iter().map(|&x| phi_image(x)).collect();
    for (i, w) in imgs.windows(2).enumerate() {
        assert_eq!(w[0].structural_cmp(&w[1]), std::cmp::Ordering::Less, "{} vs {}", xs[i], xs[i + 1]);
        assert!(w[0].value() <= w[1].value(), "value {} {} -> {} {}", xs[i], xs[i + 1], w[0].value(), w[1].value());
    }
}

#[test]
fn phi_word_bijection() {
    let a = SelfSim { kind: SelfSimKind::A }.word_points(6).unwrap();
    let b = SelfSim { kind: SelfSimKind::B }.word_points(6).unwrap();
    assert_eq!(a.len(), 1521);
    assert_eq!(a.len(), b.len());
    for ((wa, xa), (wb, xb)) in a.iter().zip(&b) {
        assert_eq!(wa, wb);
        assert!((phi_map(*xa) - xb).abs() <= 1e-12, "{wa:?}");
    }
}

proptest! {
    #[test]
    fn phi_odd_and_monotone(x in -1.0f64..1.0, y in -1.0f64..1.0) {
        prop_assert_eq!(phi_map(-x), -phi_map(x));
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        if lo < hi {
            prop_assert_eq!(phi_image(lo).structural_cmp(&phi_image(hi)), std::cmp::Ordering::Less);
        }
    }

    #[test]
    fn phi_identity_outside(x in 1.0f64..10.0) {
        let y = x + f64::EPSILON * 4.0;
        prop_assert_eq!(phi_map(y), y);
        prop_assert_eq!(phi_map(-y), -y);
    }
}

fn construction_check(set: ExampleSet, gaps: Vec<f64>) {
    let e = build_example_set(set, 5).unwrap();
    let report = rank_iterate(&e, &GdParams::default(), 4).unwrap();
    assert_eq!(report.outcome, RankOutcome::EmptyAtRank(2));
    let c = thm3_construct(&e, &report, 16 * e.len()).unwrap();
    let bad = check_thm3(&e, &report, &c);
    assert!(bad.is_empty(), "{set:?}: {:?}", &bad[..bad.len().min(5)]);

    let seq = c.sequence().unwrap();
    let amax = 2.0 * c.max_alpha() + 2.0;
    let alphas: Vec<f64> = (1..).map(|i| i as f64 * 0.25).take_while(|&a| a <= amax).collect();
    let cfg = ConicalConfig::new(alphas, seq.len()).with_min_witnesses(5).with_radius(EscapeRadius::Scaled(1.35));
    let mut samples: Vec<IdealPoint> = e.points().iter().map(|p| IdealPoint::plane(p.clone())).collect();
    let n = samples.len();
    samples.extend(gaps.iter().map(|&g| IdealPoint::plane(vec![g])));
    let v = conical_estimate(&seq, &samples, &cfg).unwrap();
    let accepted = v[..n].iter().filter(|x| x.status == ConicalStatus::Accepted).count();
    assert!(accepted as f64 >= 0.95 * n as f64, "{set:?}: {accepted}/{n}");
    for (g, x) in gaps.iter().zip(&v[n..]) {
        assert_eq!(x.status, ConicalStatus::Rejected, "{set:?} gap sample {g}");
    }
}

#[test]
fn construction_on_cantor_endpoints() {
    let mut gaps = vec![0.25];
    for k in 1..5 {
        let u = 3f64.powi(k);
        for a in (1..3i32.pow(k as u32)).step_by(3) {
            gaps.push((a as f64 + 0.5) / u);
        }
    }
    construction_check(ExampleSet::CantorAccessible, gaps);
}

#[test]
fn construction_on_selfsim_b() {
    let mut gaps = Vec::new();
    for n in 1..6 {
        // Between the images of [-1, 1] under generators n + 1 and n.
        let (c1, r1) = SelfSimKind::B.generator(n + 1);
        let (c0, r0) = SelfSimKind::B.generator(n);
        let m = 0.5 * (c1 + r1 + c0 - r0);
        gaps.extend([m, -m, 2.5 * 0.25f64.powi(n as i32)]);
    }
    construction_check(ExampleSet::SelfSimB, gaps);
}

#[test]
fn construction_single_point() {
    let e = FiniteSet::new(vec![vec![0.0]]).unwrap().truncate(1).unwrap();
    let p = GdParams { scale_min: Some(1e-3), ..GdParams::default() };
    let r = rank_iterate(&e, &p, 3).unwrap();
    let c = thm3_construct(&e, &r, 10).unwrap();
    assert_eq!(c.pairs.len(), 10);
    assert!(c.pairs.iter().all(|p| p.k == 1));
    assert!(check_thm3(&e, &r, &c).is_empty());
    // Shrinking towards the target inside a fixed cone.
    for w in c.pairs.windows(2) {
        assert!(w[1].point.height() < w[0].point.height());
    }
}

#[test]
fn construction_rejects_mismatched_report() {
    let e4 = build_example_set(ExampleSet::CantorAccessible, 4).unwrap();
    let e5 = build_example_set(ExampleSet::CantorAccessible, 5).unwrap();
    let r4 = rank_iterate(&e4, &GdParams::default(), 3).unwrap();
    assert!(matches!(thm3_construct(&e5, &r4, 10), Err(Error::RankDataInconsistent(_))));
    let a = build_example_set(ExampleSet::SelfSimA, 6).unwrap();
    let ra = rank_iterate(&a, &GdParams::default(), 3).unwrap();
    assert!(matches!(thm3_construct(&a, &ra, 10), Err(Error::RankDataInconsistent(_))));
}

#[test]
fn j_alpha_basic() {
    let s = build_j_alpha(3.0, 2).unwrap();
    assert_eq!(s.len(), 1);
    assert_eq!(s.point(1), ModelPoint::half_space(0.125, &[0.5]).unwrap());
    assert!(matches!(build_j_alpha(2.0, 10), Err(Error::PreconditionViolated(_))));
    // Σ φ(q) for q ≤ 10 is 31, minus φ(1).
    assert_eq!(build_j_alpha(3.0, 10).unwrap().len(), 31);
}

#[test]
fn j_alpha_liouville_and_golden() {
    let start = std::time::Instant::now();
    let mut dens: Vec<u64> = (2..=10_000).collect();
    // 10^{k!} for k ≤ 3 (10 and 100 are already present).
    dens.push(1_000_000);
    let seq = build_j_alpha_denominators(3.0, &dens).unwrap();
    let cfg = ConicalConfig::new(vec![3.0], seq.len()).with_min_witnesses(2).with_radius(EscapeRadius::Fixed(10.0));
    let liouville = liouville_constant(3);
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let v = conical_estimate(&seq, &[IdealPoint::plane(vec![liouville]), IdealPoint::plane(vec![golden])], &cfg).unwrap();
    assert_eq!(v[0].status, ConicalStatus::Accepted);
    assert_eq!(v[1].status, ConicalStatus::Rejected);
    assert!(start.elapsed().as_secs_f64() < 30.0);
}

#[test]
fn example_set_names() {
    assert_eq!(ExampleSet::parse("selfsimA").unwrap(), ExampleSet::SelfSimA);
    assert_eq!(ExampleSet::parse("Cantor").unwrap(), ExampleSet::CantorAccessible);
    assert_eq!(ExampleSet::parse("jalpha:3:20").unwrap(), ExampleSet::JAlphaProjection { alpha: 3.0, qmax: 20 });
    assert!(ExampleSet::parse("jalpha:3").is_err());
    let j = build_example_set(ExampleSet::JAlphaProjection { alpha: 3.0, qmax: 5 }, 2).unwrap();
    assert_eq!(j.len(), 9);
    let r = rank_iterate(&j, &GdParams { scale_min: Some(1e-3), ..GdParams::default() }, 3).unwrap();
    assert_eq!(r.outcome, RankOutcome::EmptyAtRank(2));
}

#[test]
fn report_round_trips() {
    let e = build_example_set(ExampleSet::CantorAccessible, 3).unwrap();
    let r = rank_iterate(&e, &GdParams::default(), 3).unwrap();
    let back: RankReport = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(back, r);
}
