use conical_lab::suites::{geometry_suite, isometry_suite, SUITE_TOL};

#[test]
fn geometry_identities_hold_in_several_dimensions() {
    for dim in [2, 3, 4] {
        let r = geometry_suite(dim, 2000, 11).unwrap();
        for c in &r.checks {
            assert!(c.max_residual < SUITE_TOL, "dim {dim}: {} residual {}", c.name, c.max_residual);
        }
    }
}

#[test]
fn isometry_checks_hold_in_several_dimensions() {
    for dim in [2, 3, 4] {
        let r = isometry_suite(dim, 300, 12).unwrap();
        for c in &r.checks {
            assert!(c.max_residual < SUITE_TOL, "dim {dim}: {} residual {}", c.name, c.max_residual);
        }
    }
}

#[test]
fn suites_are_reproducible() {
    assert_eq!(geometry_suite(3, 50, 5).unwrap(), geometry_suite(3, 50, 5).unwrap());
    assert_eq!(isometry_suite(3, 20, 5).unwrap(), isometry_suite(3, 20, 5).unwrap());
    assert!(geometry_suite(1, 10, 0).is_err());
    assert!(isometry_suite(3, 0, 0).is_err());
}
