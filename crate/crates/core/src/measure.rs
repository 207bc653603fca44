//! The pullback measure `ν_o(I) = μ_o(f(I))`, its charts, Radon–Nikodym derivatives of the
//! circle action, and the piecewise fiber metric.
//!
//! The visual measure `μ_x` is normalized to a probability measure, so `ν_o` has total mass `k`
//! on `R/kZ`. Masses seen from an arbitrary basepoint are computed in closed form by moving the
//! basepoint to the center, where the visual measure is uniform in angle.

use std::f64::consts::TAU;

use crate::action::{equivariant_map, CircleAction, CirclePoint};
use crate::error::{LabError, Result};
use crate::geometry::{busemann, HyperbolicPoint, Isometry, SURFACE_DELTA};
use crate::group::Word;

/// Visual probability mass, seen from `x`, of the positively oriented boundary arc starting at
/// angle `theta0` and sweeping `sweep ∈ [0, 2π]`.
pub fn visual_arc_mass(x: HyperbolicPoint, theta0: f64, sweep: f64) -> f64 {
    if sweep <= 0.0 {
        return 0.0;
    }
    if sweep >= TAU {
        return 1.0;
    }
    let to0 = Isometry::moving_to_origin(x);
    let e0 = to0
        .apply_boundary(crate::geometry::BoundaryPoint::new(theta0))
        .theta();
    let e1 = to0
        .apply_boundary(crate::geometry::BoundaryPoint::new(theta0 + sweep))
        .theta();
    (e1 - e0).rem_euclid(TAU) / TAU
}

/// `ν_x` on `R/kZ`: the pullback of the visual measure from `x`.
#[derive(Clone, Copy, Debug)]
pub struct PullbackMeasure {
    basepoint: HyperbolicPoint,
    k: u32,
    delta: f64,
}

impl PullbackMeasure {
    /// `ν_o` for the disk origin.
    pub fn new(k: u32) -> Self {
        Self {
            basepoint: HyperbolicPoint::ORIGIN,
            k,
            delta: SURFACE_DELTA,
        }
    }

    pub fn with_basepoint(basepoint: HyperbolicPoint, k: u32) -> Self {
        Self {
            basepoint,
            k,
            delta: SURFACE_DELTA,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn total_mass(&self) -> f64 {
        self.k as f64
    }

    /// Mass of the lifted interval `[a, b] ⊂ R`, `0 ≤ b - a ≤ 1`.
    pub fn nu_lifted(&self, a: f64, b: f64) -> Result<f64> {
        let len = b - a;
        if len > 1.0 + 1e-12 {
            return Err(LabError::IntervalTooLong { length: len });
        }
        if len < 0.0 {
            return Err(LabError::IntervalTooLong { length: len });
        }
        Ok(visual_arc_mass(self.basepoint, TAU * a, TAU * len.min(1.0)))
    }

    /// Mass of the positively oriented interval from `a` to `b` on `R/kZ`.
    pub fn nu_interval(&self, a: CirclePoint, b: CirclePoint) -> Result<f64> {
        let len = (b.s() - a.s()).rem_euclid(self.k as f64);
        self.nu_lifted(a.s(), a.s() + len)
    }

    /// `d ρ(w)_* ν_o / d ν_o (p) = e^{-δ b_{f(p)}(w·o, o)}`, the derivative of `act(w⁻¹, ·)` at `p`.
    pub fn rn_derivative(&self, action: &CircleAction, w: &Word, p: CirclePoint) -> f64 {
        let o = self.basepoint;
        let wo = action.group().evaluate(w).apply(o);
        (-self.delta * busemann(equivariant_map(p), wo, o)).exp()
    }
}

/// Charts `ζ_a(s) = ν_o([a, s])` anchored at the given points, each of a common width.
#[derive(Clone, Debug)]
pub struct ChartAtlas {
    measure: PullbackMeasure,
    anchors: Vec<CirclePoint>,
    width: f64,
}

impl ChartAtlas {
    /// `count` evenly spaced anchors on `R/kZ`; the width must cover the gaps and stay below 1.
    pub fn uniform(measure: PullbackMeasure, count: usize, width: f64) -> Result<Self> {
        let k = measure.k as f64;
        if !(width > 0.0 && width <= 1.0) || width * count as f64 <= k {
            return Err(LabError::Config(format!(
                "chart width {width} with {count} anchors does not cover R/{k}Z"
            )));
        }
        let anchors = (0..count)
            .map(|i| CirclePoint::new(k * i as f64 / count as f64, measure.k))
            .collect();
        Ok(Self {
            measure,
            anchors,
            width,
        })
    }

    pub fn anchors(&self) -> &[CirclePoint] {
        &self.anchors
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// `ζ_a(s)` for `s` in the open chart `(a, a + width)` or at `a`.
    pub fn chart_coordinate(&self, a: CirclePoint, s: CirclePoint) -> Result<f64> {
        let off = (s.s() - a.s()).rem_euclid(self.measure.k as f64);
        if off >= self.width {
            return Err(LabError::OutsideChart {
                s: s.s(),
                anchor: a.s(),
                width: self.width,
            });
        }
        self.measure.nu_lifted(a.s(), a.s() + off)
    }

    /// An anchor whose chart contains `s` well inside its domain.
    pub fn chart_for(&self, s: CirclePoint) -> CirclePoint {
        let k = self.measure.k as f64;
        *self
            .anchors
            .iter()
            .min_by(|a, b| {
                let da = ((s.s() - a.s()).rem_euclid(k) - 0.5 * self.width).abs();
                let db = ((s.s() - b.s()).rem_euclid(k) - 0.5 * self.width).abs();
                da.total_cmp(&db)
            })
            .expect("atlas has anchors")
    }
}

/// The piecewise fiber metric: over `γD` the fiber is measured by `ρ(γ)_* ν_o`.
#[derive(Clone, Debug)]
pub struct FiberMetric<'a> {
    action: &'a CircleAction,
    measure: PullbackMeasure,
}

impl<'a> FiberMetric<'a> {
    pub fn new(action: &'a CircleAction) -> Self {
        Self {
            action,
            measure: PullbackMeasure::new(action.k()),
        }
    }

    /// Length of the lifted fiber interval `[a, a + len]` over the translate `γD`.
    pub fn length_over(&self, gamma: &Word, a: f64, len: f64) -> Result<f64> {
        let inv = gamma.inverse();
        let lo = self.action.lift(&inv, a);
        let hi = self.action.lift(&inv, a + len);
        self.measure.nu_lifted(lo, hi)
    }

    /// `ν_o(ρ(γ⁻¹)[a, b])` where `x ∈ γD`; `[a, b]` is the positively oriented interval.
    pub fn fiber_length(&self, x: HyperbolicPoint, a: CirclePoint, b: CirclePoint) -> Result<f64> {
        let reduced = self.action.group().reduce_to_domain(x)?;
        let len = (b.s() - a.s()).rem_euclid(self.action.k() as f64);
        self.length_over(&reduced.word, a.s(), len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{busemann, classify_and_fixed_points};
    use crate::group::SurfaceGroup;
    use crate::quadrature::adaptive_simpson;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn action(k: u32) -> CircleAction {
        CircleAction::new(SurfaceGroup::standard_genus2(), k).unwrap()
    }

    fn random_word(rng: &mut impl Rng, max_len: usize) -> Word {
        let len = rng.gen_range(0..=max_len);
        Word::from_letters((0..len).map(|_| crate::group::Letter::ALL[rng.gen_range(0..8)]))
    }

    #[test]
    fn nu_interval_examples() {
        let m1 = PullbackMeasure::new(1);
        let p = CirclePoint::new(0.3, 1);
        assert_eq!(m1.nu_interval(p, p).unwrap(), 0.0);
        assert!((m1.nu_lifted(0.3, 1.3).unwrap() - 1.0).abs() < 1e-15);
        let m2 = PullbackMeasure::new(2);
        let v = m2
            .nu_interval(CirclePoint::new(0.2, 2), CirclePoint::new(1.2, 2))
            .unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert!(m2
            .nu_interval(CirclePoint::new(0.2, 2), CirclePoint::new(1.5, 2))
            .is_err());
        // Oracle: mass from the origin is the integral of the uniform density over the arc.
        let oracle = adaptive_simpson(&|_t: f64| 1.0 / TAU, 0.0, TAU * 0.37, 1e-12);
        assert!((m1.nu_lifted(0.1, 0.47).unwrap() - oracle).abs() < 1e-10);
    }

    #[test]
    fn additivity_over_partitions() {
        let m = PullbackMeasure::with_basepoint(HyperbolicPoint::new(0.4, -0.3).unwrap(), 1);
        let cuts = [0.0, 0.13, 0.2, 0.55, 0.81, 1.0];
        let sum: f64 = cuts
            .windows(2)
            .map(|c| m.nu_lifted(c[0], c[1]).unwrap())
            .sum();
        assert!((sum - 1.0).abs() < 1e-10);
    }

    #[test]
    fn off_center_mass_matches_poisson_integral() {
        let x = HyperbolicPoint::new(0.5, 0.2).unwrap();
        let m = PullbackMeasure::with_basepoint(x, 1);
        let density = |s: f64| {
            crate::geometry::poisson_kernel(x, crate::geometry::BoundaryPoint::new(TAU * s))
        };
        for &(a, b) in &[(0.0, 0.3), (0.25, 0.9), (0.6, 1.4)] {
            let q = adaptive_simpson(&density, a, b, 1e-12);
            assert!((m.nu_lifted(a, b).unwrap() - q).abs() < 1e-9);
        }
    }

    #[test]
    fn rn_derivative_examples() {
        let a = action(1);
        let m = PullbackMeasure::new(1);
        assert_eq!(m.rn_derivative(&a, &Word::empty(), a.point(0.3)), 1.0);
        for word in ["a", "bC", "abAB", "cdd"] {
            let word: Word = word.parse().unwrap();
            let c = classify_and_fixed_points(&a.group().evaluate(&word));
            let p = a.point(c.attracting().unwrap().theta() / TAU);
            let rn = m.rn_derivative(&a, &word, p);
            assert!((rn / c.translation_length.exp() - 1.0).abs() < 1e-9);
            assert!((a.derivative(&word, p) * rn - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn pushforward_identity() {
        let a = action(1);
        let m = PullbackMeasure::new(1);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let w = random_word(&mut rng, 4);
            let s0 = rng.gen_range(0.0..1.0);
            let len = rng.gen_range(0.01..0.5);
            let inv = w.inverse();
            let lhs = m
                .nu_lifted(a.lift(&inv, s0), a.lift(&inv, s0 + len))
                .unwrap();
            let wo = a.group().evaluate(&w).apply(HyperbolicPoint::ORIGIN);
            let rn = |s: f64| {
                (-busemann(
                    crate::geometry::BoundaryPoint::new(TAU * s),
                    wo,
                    HyperbolicPoint::ORIGIN,
                ))
                .exp()
            };
            let rhs = adaptive_simpson(&rn, s0, s0 + len, 1e-10 * lhs);
            assert!((lhs / rhs - 1.0).abs() < 1e-6, "{w}");
        }
    }

    #[test]
    fn chart_overlaps_are_translations() {
        let m = PullbackMeasure::new(2);
        let atlas = ChartAtlas::uniform(m, 8, 0.75).unwrap();
        let (a, b) = (atlas.anchors()[1], atlas.anchors()[2]);
        assert_eq!(atlas.chart_coordinate(a, a).unwrap(), 0.0);
        let mut diffs = Vec::new();
        for i in 0..100 {
            let s = CirclePoint::new(b.s() + 0.001 + 0.004 * i as f64, 2);
            diffs.push(
                atlas.chart_coordinate(a, s).unwrap() - atlas.chart_coordinate(b, s).unwrap(),
            );
        }
        let spread = diffs.iter().cloned().fold(f64::MIN, f64::max)
            - diffs.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-10);
        assert!(atlas
            .chart_coordinate(a, CirclePoint::new(a.s() + 0.9, 2))
            .is_err());
        let mut prev = -1.0;
        for i in 0..70 {
            let z = atlas
                .chart_coordinate(a, CirclePoint::new(a.s() + 0.01 * i as f64, 2))
                .unwrap();
            assert!(z > prev);
            prev = z;
        }
    }

    #[test]
    fn fiber_length_is_invariant() {
        let a = action(2);
        let metric = FiberMetric::new(&a);
        let g = a.group();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = HyperbolicPoint::new(0.1, 0.05).unwrap();
        let pa = a.point(0.4);
        let pb = a.point(0.55);
        assert!((metric.fiber_length(x, pa, pb).unwrap() - 0.15).abs() < 1e-12);
        for _ in 0..50 {
            let w = random_word(&mut rng, 3);
            let y = crate::geometry::HyperbolicPoint::polar(
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.0..TAU),
            );
            let (s0, len) = (rng.gen_range(0.0..2.0), rng.gen_range(0.01..0.4));
            let before = metric
                .fiber_length(y, a.point(s0), a.point(s0 + len))
                .unwrap();
            let gy = g.evaluate(&w).apply(y);
            let ga = a.lift(&w, s0);
            let gb = a.lift(&w, s0 + len);
            let after = metric.fiber_length(gy, a.point(ga), a.point(gb)).unwrap();
            assert!((before - after).abs() < 1e-9, "{w}");
            // Comparability with the fiber measure over D.
            let reduced = g.reduce_to_domain(gy).unwrap();
            let d = crate::geometry::hyperbolic_distance(
                HyperbolicPoint::ORIGIN,
                g.evaluate(&reduced.word).apply(HyperbolicPoint::ORIGIN),
            );
            let flat = (gb - ga).min(1.0);
            assert!(
                after <= flat * d.exp() * (1.0 + 1e-9) && after >= flat * (-d).exp() * (1.0 - 1e-9)
            );
        }
    }
}
