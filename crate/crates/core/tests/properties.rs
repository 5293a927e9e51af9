use std::sync::Arc;

use approx::assert_relative_eq;
use proptest::prelude::*;
use superform::density::{ball_intersection_volume, ball_volume, cap_volume, cusp_area};
use superform::literal::{parse_form, parse_polynomial};
use superform::{ChartDomain, ChartMap, MatrixForm};

const DIM: usize = 3;

fn square() -> Arc<ChartDomain> {
    Arc::new(ChartDomain::cube(DIM, -1.0, 1.0).unwrap())
}

// One term `c*x1^a*x2^b*x3^c d(...)` of the given degree.
fn term(degree: usize) -> impl Strategy<Value = String> {
    let basis = proptest::sample::subsequence(vec![1usize, 2, 3], degree);
    (-3i32..=3, 0u32..3, 0u32..3, 0u32..3, basis).prop_map(|(c, a, b, e, idx)| {
        let d = if idx.is_empty() {
            String::new()
        } else {
            format!(" d({})", idx.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","))
        };
        format!("({c})*x1^{a}*x2^{b}*x3^{e}{d}")
    })
}

fn entry(degree: usize) -> impl Strategy<Value = String> {
    proptest::collection::vec(term(degree), 1..3).prop_map(|ts| ts.join(" + "))
}

// A 2×2 polynomial form of the given degree, as a literal.
fn form(degree: usize) -> impl Strategy<Value = String> {
    proptest::collection::vec(entry(degree), 4)
        .prop_map(|e| format!("[[{}, {}],[{}, {}]]", e[0], e[1], e[2], e[3]))
}

fn build(src: &str, degree: usize) -> MatrixForm {
    parse_form(src, square(), Some(degree)).unwrap()
}

fn same(a: &MatrixForm, b: &MatrixForm) -> bool {
    a.sub(b).unwrap().is_exactly_zero()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn d_squared_vanishes((k, src) in (0usize..=2).prop_flat_map(|k| (Just(k), form(k)))) {
        prop_assert!(build(&src, k).d().unwrap().d().unwrap().is_exactly_zero());
    }

    #[test]
    fn leibniz(a in form(1), b in form(1)) {
        let (x, y) = (build(&a, 1), build(&b, 1));
        let lhs = x.wedge(&y).unwrap().d().unwrap();
        let rhs = x.d().unwrap().wedge(&y).unwrap().sub(&x.wedge(&y.d().unwrap()).unwrap()).unwrap();
        prop_assert!(same(&lhs, &rhs));
    }

    #[test]
    fn wedge_is_associative_and_distributive(a in form(0), b in form(1), c in form(1), e in form(1)) {
        let (x, y, z, w) = (build(&a, 0), build(&b, 1), build(&c, 1), build(&e, 1));
        let left = x.wedge(&y).unwrap().wedge(&z).unwrap();
        let right = x.wedge(&y.wedge(&z).unwrap()).unwrap();
        prop_assert!(same(&left, &right));
        let dist = y.wedge(&z.add(&w).unwrap()).unwrap();
        let split = y.wedge(&z).unwrap().add(&y.wedge(&w).unwrap()).unwrap();
        prop_assert!(same(&dist, &split));
    }

    #[test]
    fn pullback_commutes_with_d_and_wedge(a in form(1), b in form(0)) {
        let dom = square();
        let comps = ["x1*x2", "x2^2 - x3", "x1*x3"]
            .iter()
            .map(|s| parse_polynomial(s, DIM).unwrap())
            .collect();
        let f = ChartMap::polynomial(dom.clone(), dom, comps).unwrap();
        let (x, y) = (build(&a, 1), build(&b, 0));
        prop_assert!(same(&x.d().unwrap().pullback(&f).unwrap(), &x.pullback(&f).unwrap().d().unwrap()));
        let w = y.wedge(&x).unwrap();
        prop_assert!(same(
            &w.pullback(&f).unwrap(),
            &y.pullback(&f).unwrap().wedge(&x.pullback(&f).unwrap()).unwrap()
        ));
    }

    #[test]
    fn caps_split_the_ball(dim in 1usize..=6, r in 0.01f64..2.0, t in -1.0f64..1.0) {
        let a = t * r;
        assert_relative_eq!(cap_volume(dim, r, a) + cap_volume(dim, r, -a), ball_volume(dim, r), max_relative = 1e-12);
        prop_assert!(cap_volume(dim, r, a) <= cap_volume(dim, r, a - 0.1 * r) + 1e-15);
    }

    #[test]
    fn ball_intersections_are_bounded(dim in 1usize..=5, r in 0.01f64..1.0, big in 0.01f64..1.0, dist in 0.0f64..2.5) {
        let v = ball_intersection_volume(dim, r, big, dist);
        prop_assert!(v >= -1e-15);
        prop_assert!(v <= ball_volume(dim, r.min(big)) * (1.0 + 1e-12));
        prop_assert!(ball_intersection_volume(dim, r, big, dist + 0.05) <= v * (1.0 + 1e-12) + 1e-15);
        assert_relative_eq!(v, ball_intersection_volume(dim, big, r, dist), max_relative = 1e-9, epsilon = 1e-15);
    }

    #[test]
    fn cusp_area_is_monotone_and_below_the_half_disc(k in 2u32..=6, r in 0.001f64..0.9) {
        let small = cusp_area(k, r);
        prop_assert!(small > 0.0);
        prop_assert!(small < cusp_area(k, r * 1.01));
        prop_assert!(small < std::f64::consts::PI * r * r / 2.0);
        // leading order: 2 r^{k+1} / (k + 1)
        let lead = 2.0 * r.powi(k as i32 + 1) / (k as f64 + 1.0);
        prop_assert!(small <= lead * (1.0 + 1e-12));
    }
}
