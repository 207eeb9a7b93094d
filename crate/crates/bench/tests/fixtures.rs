use didpower_bench::{partial_design, school_components, school_design, school_spec};
use didpower_core::{did_variance, exact_did_variance, required_subjects, validate_design};

#[test]
fn school_fixture_solves() {
    let k = required_subjects(&school_spec(), &school_design(1), &school_components()).unwrap();
    assert_eq!(k, 171);
}

#[test]
fn partial_fixture_is_integral_and_matches_oracle() {
    let vc = school_components();
    for k in [20, 60, 200] {
        let d = partial_design(4, k);
        assert!(validate_design(&d).is_ok());
        let closed = did_variance(&d, &vc).unwrap().total;
        let exact = exact_did_variance(&d, &vc).unwrap();
        assert!((closed - exact).abs() <= 1e-12 * exact, "k={k}: {closed} vs {exact}");
    }
}
