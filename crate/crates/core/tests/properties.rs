use proptest::prelude::*;

use fiberflow::geometry::{dist, dist_point_segment, dist_segment_segment, FiberGeometry};
use fiberflow::lagrangian::{conjugate_at, Lagrangian};
use fiberflow::scenario::{paper_counterexample, random_scenario, two_point, Scenario, ScenarioFile};
use fiberflow::semigroup::{HopfLax, DEFAULT_TAU_TIE};
use fiberflow::variational::{action, solve_variational, CurveProblem};

fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, dim)
}

proptest! {
    #[test]
    fn scenario_json_round_trip(seed in any::<u64>()) {
        let file = random_scenario(seed);
        let back = ScenarioFile::from_json(&file.to_json()).unwrap();
        prop_assert_eq!(&back, &file);
        prop_assert!(Scenario::from_file(back).is_ok());
    }

    #[test]
    fn arbitrary_floats_round_trip(xs in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 4)) {
        let mut file = two_point();
        file.base[0].point = vec![xs[0], xs[1]];
        file.section[1].value = vec![xs[2], xs[3]];
        file.base[1].param = Some(xs[0] / 3.0);
        let back = ScenarioFile::from_json(&file.to_json()).unwrap();
        prop_assert_eq!(back, file);
    }

    #[test]
    fn point_segment_distance(p in point(3), a in point(3), b in point(3)) {
        let (d, w) = dist_point_segment(&p, &a, &b);
        prop_assert!(d >= 0.0);
        prop_assert!(d <= dist(&p, &a) + 1e-12 && d <= dist(&p, &b) + 1e-12);
        prop_assert!((dist(&p, &w) - d).abs() <= 1e-9);
        // The witness lies on the segment.
        prop_assert!((dist(&a, &w) + dist(&w, &b) - dist(&a, &b)).abs() <= 1e-9);
    }

    #[test]
    fn segment_segment_distance(p1 in point(2), q1 in point(2), p2 in point(2), q2 in point(2)) {
        let d = dist_segment_segment(&p1, &q1, &p2, &q2);
        prop_assert!((d - dist_segment_segment(&p2, &q2, &p1, &q1)).abs() <= 1e-9);
        for e in [&p1, &q1] {
            prop_assert!(d <= dist_point_segment(e, &p2, &q2).0 + 1e-9);
        }
        for e in [&p2, &q2] {
            prop_assert!(d <= dist_point_segment(e, &p1, &q1).0 + 1e-9);
        }
    }

    #[test]
    fn fiber_distance_is_one_lipschitz(
        p in point(2),
        q in point(2),
        pts in prop::collection::vec(point(2), 1..5),
        segs in prop::collection::vec((point(2), point(2)), 1..4),
    ) {
        let fibers = [
            FiberGeometry::Points(pts),
            FiberGeometry::Segments(segs.into_iter().map(|(a, b)| [a, b]).collect()),
        ];
        for f in &fibers {
            let dp = f.distance(&p).unwrap().0;
            let dq = f.distance(&q).unwrap().0;
            prop_assert!((dp - dq).abs() <= dist(&p, &q) + 1e-9);
        }
    }

    #[test]
    fn evolution_bounds_and_monotonicity(seed in any::<u64>(), s in 0.05f64..3.0, dt in 0.0f64..3.0) {
        let sc = Scenario::from_file(random_scenario(seed)).unwrap();
        let f = &sc.section;
        let hl = HopfLax::new(f, &sc.lagrangian, DEFAULT_TAU_TIE);
        let min_g = f.g_field().iter().copied().fold(f64::INFINITY, f64::min);
        for y in 0..f.len() {
            let us = hl.evolve(y, s).unwrap().value;
            let ut = hl.evolve(y, s + dt).unwrap().value;
            // z = y is a candidate; its cost is g(y) up to the on-fiber rounding of f(y).
            prop_assert!(us <= hl.cost(y, y, s));
            prop_assert!(hl.cost(y, y, s) - f.g(y) <= 1e-12);
            prop_assert!(us >= min_g);
            prop_assert!(ut <= us + 1e-12);
        }
    }

    #[test]
    fn fenchel_young(ws in prop::collection::vec(0.0f64..20.0, 1..30), xi in 0.0f64..10.0, c in 0.1f64..3.0, p in 1.0f64..4.0) {
        let l = Lagrangian::power(c, p).unwrap();
        let (v, i) = conjugate_at(&l, &ws, xi);
        prop_assert_eq!(v, xi * ws[i] - l.eval(ws[i]));
        for &w in &ws {
            prop_assert!(v >= xi * w - l.eval(w));
        }
    }

    #[test]
    fn curve_value_never_below_evolution(seed in any::<u64>(), t in 0.2f64..4.0, m in 1usize..12) {
        let sc = Scenario::from_file(random_scenario(seed)).unwrap();
        let p = sc.parametrization().unwrap();
        let hl = HopfLax::new(&sc.section, &sc.lagrangian, DEFAULT_TAU_TIE);
        for y in 0..sc.section.len() {
            let v = solve_variational(&sc.section, &sc.lagrangian, &p, y, t, m).unwrap().value;
            let u = hl.evolve(y, t).unwrap().value;
            prop_assert!(v >= u - 1e-9);
            prop_assert!((v - u).abs() <= 1e-7);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// Perturbing the interior nodes of the straight curve never lowers the action.
    #[test]
    fn straight_curve_minimizes_action(
        bumps in prop::collection::vec(-2.0f64..2.0, 15),
        y in 0usize..81,
        z in 0usize..81,
        t in 0.25f64..4.0,
        power in prop::bool::ANY,
    ) {
        let sc = Scenario::from_file(paper_counterexample()).unwrap();
        let p = sc.parametrization().unwrap();
        let l = if power { Lagrangian::power(1.0, 3.0).unwrap() } else { Lagrangian::model_quadratic() };
        let line = CurveProblem::linear(&sc.section, &p, y, t, 16, z);
        let base = action(&line, &l, &sc.section, &p).unwrap();
        let mut bent = line.clone();
        for (k, b) in bumps.iter().enumerate() {
            bent.nodes[k + 1] += b;
        }
        let a = action(&bent, &l, &sc.section, &p).unwrap();
        prop_assert!(a >= base - 1e-9 * (1.0 + base.abs()), "{} < {}", a, base);
    }
}
