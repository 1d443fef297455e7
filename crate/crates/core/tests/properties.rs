use std::f64::consts::TAU;

use mmsgeo::cheeger::{cheeger_constant, CheegerParams, Definition, FamilySpec};
use mmsgeo::descent::{variational_descent, DescentParams};
use mmsgeo::minkowski::{check_semigroup_inclusion, enlarge, profile};
use mmsgeo::perimeter::{perimeter, PerimeterParams};
use mmsgeo::slope::check_semigroup_ops;
use mmsgeo::space::{Density, SampledSpace};
use proptest::prelude::*;

#[test]
fn descent_on_disk_stays_above_family_bound() {
    let s = SampledSpace::grid_box(2, 192, &[(-2.0, 2.0), (-2.0, 2.0)], &Density::Unit).unwrap();
    let a = s.indicator_where(|c| c[0].hypot(c[1]) <= 1.0);
    let per = perimeter(&s, &a, &PerimeterParams { cross_check: false, ..Default::default() }).unwrap();
    let d = variational_descent(&s, &a, &DescentParams { iterations: 300, ..Default::default() }).unwrap();
    assert!(d.trace.windows(2).all(|w| w[1] <= w[0]));
    assert!(d.slope_part >= per.upper - per.band, "{} < {} - {}", d.slope_part, per.upper, per.band);
    assert!((per.upper / TAU - 1.0).abs() < 0.05, "{}", per.upper / TAU);
}

#[test]
fn cheeger_scales_inversely_with_length() {
    let params = CheegerParams::default();
    let spec = FamilySpec::SublevelSweep { seeds: vec![0], levels: 16 };
    let g = |len: f64, density: f64| {
        let s = SampledSpace::grid_box(1, 1000, &[(0.0, len)], &Density::Constant(density)).unwrap();
        cheeger_constant(&s, &spec, Definition::Per, &params).unwrap().gamma
    };
    let unit = g(1.0, 1.0);
    assert!((g(2.0, 1.0) * 2.0 / unit - 1.0).abs() < 0.03);
    assert!((g(1.0, 3.0) / unit - 1.0).abs() < 0.03);
}

fn small_square() -> SampledSpace {
    SampledSpace::grid_box(2, 20, &[(0.0, 1.0), (0.0, 1.0)], &Density::Unit).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn enlargement_invariants(marks in prop::collection::vec(prop::bool::weighted(0.05), 400), s in 0.06f64..0.3, t in 0.06f64..0.3) {
        let space = small_square();
        let a = space.indicator(marks).unwrap();
        prop_assume!(a.has_points());
        let r = check_semigroup_inclusion(&space, &a, s, t).unwrap();
        prop_assert!(r.passed());
        let p = profile(&space, &a, &[0.18, 0.25, 0.35, 0.5]).unwrap();
        prop_assert!(p.masses.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(a.is_subset(&enlarge(&space, &a, s).unwrap()));
    }

    #[test]
    fn semigroup_invariants(values in prop::collection::vec(-1.0f64..1.0, 400), s in 0.06f64..0.3, t in 0.06f64..0.3) {
        let space = small_square();
        let f = space.field(values).unwrap();
        let r = check_semigroup_ops(&space, &f, s, t).unwrap();
        for name in ["monotone_sup", "composition_inequality", "difference_quotient_vs_slope"] {
            prop_assert!(r.find(name).unwrap().pass, "{}", name);
        }
    }
}
