//! Randomized invariants of the geometry, the group action, the measure and the flow.

use std::f64::consts::TAU;

use proptest::prelude::*;

use anosov_lab::action::{equivariant_map, CircleAction, CirclePoint};
use anosov_lab::flow::{BundlePoint, FlowEngine};
use anosov_lab::geometry::{
    busemann, classify_and_fixed_points, hyperbolic_distance, poisson_kernel, visual_density_ratio,
    BoundaryPoint, HyperbolicPoint, IsometryClass,
};
use anosov_lab::group::{Letter, SurfaceGroup, Word};
use anosov_lab::measure::PullbackMeasure;
use anosov_lab::quadrature::adaptive_simpson;

fn point(max_r: f64) -> impl Strategy<Value = HyperbolicPoint> {
    (0.0..max_r, 0.0..TAU).prop_map(|(r, a)| HyperbolicPoint::polar(r, a))
}

fn boundary() -> impl Strategy<Value = BoundaryPoint> {
    (0.0..TAU).prop_map(BoundaryPoint::new)
}

fn word(max_len: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec(0usize..8, 0..=max_len).prop_map(|codes| {
        let mut w = Word::empty();
        for c in codes {
            w.push(Letter::new(c / 2, c % 2 == 1));
        }
        w
    })
}

fn nonempty_word(max_len: usize) -> impl Strategy<Value = Word> {
    word(max_len).prop_filter("nonempty", |w| !w.is_empty())
}

fn group() -> SurfaceGroup {
    SurfaceGroup::standard_genus2()
}

/// `b` lies strictly inside the positively oriented arc from `a` to `c`.
fn between(a: f64, b: f64, c: f64) -> bool {
    let (b, c) = ((b - a).rem_euclid(TAU), (c - a).rem_euclid(TAU));
    b > 0.0 && b < c
}

proptest! {
    #[test]
    fn busemann_is_a_bounded_cocycle(x in point(3.0), y in point(3.0), z in point(3.0), xi in boundary()) {
        let sum = busemann(xi, x, y) + busemann(xi, y, z);
        prop_assert!((sum - busemann(xi, x, z)).abs() < 1e-9);
        prop_assert!(busemann(xi, x, y).abs() <= hyperbolic_distance(x, y) + 1e-9);
    }

    #[test]
    fn density_ratios_multiply(x in point(3.0), y in point(3.0), z in point(3.0), xi in boundary()) {
        let direct = visual_density_ratio(x, z, xi, 1.0);
        let chained = visual_density_ratio(x, y, xi, 1.0) * visual_density_ratio(y, z, xi, 1.0);
        prop_assert!((direct / chained - 1.0).abs() < 1e-9);
    }

    #[test]
    fn busemann_is_equivariant(x in point(2.5), y in point(2.5), xi in boundary(), w in word(4)) {
        let g = group().evaluate(&w);
        let moved = busemann(g.apply_boundary(xi), g.apply(x), g.apply(y));
        prop_assert!((moved - busemann(xi, x, y)).abs() < 1e-9);
    }

    #[test]
    fn isometries_preserve_cyclic_order(a in 0.0..TAU, d1 in 0.01..2.0f64, d2 in 0.01..2.0f64, w in word(4)) {
        let (b, c) = (a + d1, a + d1 + d2);
        let g = group().evaluate(&w);
        let img = |t: f64| g.apply_boundary(BoundaryPoint::new(t)).theta();
        prop_assert!(between(img(a), img(b), img(c)));
    }

    #[test]
    fn evaluate_is_a_homomorphism(u in word(10), v in word(10)) {
        let g = group();
        let lhs = g.evaluate(&u.concat(&v));
        let rhs = g.evaluate(&u).compose(&g.evaluate(&v));
        let scale = lhs.entries().iter().fold(1.0f64, |m, e| m.max(e.abs()));
        prop_assert!(lhs.distance(&rhs) <= 1e-10 * scale * scale, "{}", lhs.distance(&rhs));
    }

    #[test]
    fn reduction_round_trips(x in point(6.0)) {
        let g = group();
        let r = g.reduce_to_domain(x).unwrap();
        prop_assert!(g.in_domain(r.point, 1e-8));
        let back = g.evaluate(&r.word).apply(r.point);
        prop_assert!(hyperbolic_distance(back, x) < 1e-8);
    }

    #[test]
    fn cyclically_reduced_words_are_hyperbolic(w in nonempty_word(6)) {
        let w = w.cyclically_reduced();
        prop_assume!(!w.is_empty());
        let c = classify_and_fixed_points(&group().evaluate(&w));
        prop_assert_eq!(c.class, IsometryClass::Hyperbolic);
    }

    #[test]
    fn action_is_equivariant_and_orientation_preserving(
        k in 1u32..=4,
        w in word(4),
        s in 0.0..4.0f64,
        d1 in 0.01..1.5f64,
        d2 in 0.01..1.5f64,
    ) {
        let a = CircleAction::new(group(), k).unwrap();
        let kf = k as f64;
        let p = a.point(s);
        let lhs = equivariant_map(a.act(&w, p)).theta();
        let rhs = a.group().evaluate(&w).apply_boundary(equivariant_map(p)).theta();
        let gap = (lhs - rhs).rem_euclid(TAU);
        prop_assert!(gap.min(TAU - gap) < 1e-8);
        let (s1, s2) = (s + d1.min(kf / 3.0), s + (d1 + d2).min(2.0 * kf / 3.0));
        let (l0, l1, l2) = (a.lift(&w, s), a.lift(&w, s1), a.lift(&w, s2));
        prop_assert!(l0 < l1 && l1 < l2 && l2 < l0 + kf);
    }

    #[test]
    fn nu_is_additive_on_partitions(k in 1u32..=4, a in 0.0..4.0f64, cuts in prop::collection::vec(0.0..1.0f64, 1..6)) {
        let m = PullbackMeasure::new(k);
        let kf = k as f64;
        let mut pts: Vec<f64> = cuts.iter().map(|c| a + c * kf).collect();
        pts.push(a);
        pts.push(a + kf);
        pts.sort_by(f64::total_cmp);
        let total: f64 = pts
            .windows(2)
            .map(|w| {
                // `nu_interval` takes pieces of at most one turn.
                let parts = (w[1] - w[0]).ceil().max(1.0);
                let h = (w[1] - w[0]) / parts;
                (0..parts as usize)
                    .map(|i| {
                        let lo = w[0] + i as f64 * h;
                        m.nu_interval(CirclePoint::new(lo, k), CirclePoint::new(lo + h, k)).unwrap()
                    })
                    .sum::<f64>()
            })
            .sum();
        prop_assert!((total - kf).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// `ν_o(ρ(w⁻¹)I) = ∫_I rn_derivative dν_o`, with `dν_o = P(o, f(s)) ds` for `k = 1`.
    #[test]
    fn pushforward_matches_rn_integral(w in nonempty_word(3), o in point(1.0), a in 0.0..1.0f64, len in 0.02..0.3f64) {
        let action = CircleAction::new(group(), 1).unwrap();
        let m = PullbackMeasure::with_basepoint(o, 1);
        let lhs = m.nu_lifted(action.lift(&w.inverse(), a), action.lift(&w.inverse(), a + len)).unwrap();
        let density = |s: f64| {
            let p = action.point(s);
            m.rn_derivative(&action, &w, p) * poisson_kernel(o, equivariant_map(p))
        };
        let rhs = adaptive_simpson(&density, a, a + len, 1e-9);
        prop_assert!((lhs / rhs - 1.0).abs() < 1e-6, "{lhs} {rhs}");
    }

    #[test]
    fn holonomy_is_multiplicative_and_invertible(
        k in 1u32..=3,
        x in point(0.8),
        s in 0.0..3.0f64,
        t1 in -6.0..6.0f64,
        t2 in -6.0..6.0f64,
    ) {
        let action = CircleAction::new(group(), k).unwrap();
        let e = FlowEngine::new(&action);
        let pt = BundlePoint::from_global(&action, x, action.point(s)).unwrap();
        let whole = e.holonomy_derivative(&pt, t1 + t2).unwrap().log_derivative;
        let (mid, first) = e.flow_phi(&pt, t1).unwrap();
        let second = e.holonomy_derivative(&mid, t2).unwrap().log_derivative;
        prop_assert!((whole - first.log_holonomy - second).abs() < 1e-8);
        let back = e.holonomy_derivative(&mid, -t1).unwrap().log_derivative;
        prop_assert!((first.log_holonomy + back).abs() < 1e-9);
    }
}
