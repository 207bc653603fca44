//! Periodic orbits from fixed points of `ρ_k(w)` and their first-return maps.

use crate::action::{equivariant_map, CircleAction, CirclePoint, FixedKind};
use crate::error::{LabError, Result};
use crate::geometry::{
    classify_and_fixed_points, fermi_in_frame, flow_toward, hyperbolic_distance, BoundaryPoint,
    Geodesic, HyperbolicPoint, Isometry, IsometryClass,
};
use crate::group::{conjugacy_key, ConjugacyKey, Word};
use crate::measure::PullbackMeasure;

use super::{BundlePoint, FlowEngine, OrbitSegment};

/// Largest residual `|ŵ(s) - s - mk|` accepted for a fixed point.
pub const FIXED_TOL: f64 = 1e-9;

/// Largest angular distance between `f(p)` and an axis endpoint.
pub const ENDPOINT_TOL: f64 = 1e-8;

/// Fiber gaps below this are at the accuracy of the computed fixed points.
pub const GAP_RESOLUTION: f64 = 1e-12;

/// A closed orbit of `φ`, one period starting near the foot of the origin on the axis.
#[derive(Clone, Debug)]
pub struct PeriodicOrbit {
    /// The word whose fixed point was used.
    pub word: Word,
    /// `word` or its inverse: the element translating the axis toward `f(p)`.
    pub oriented: Word,
    /// `word = root^exponent`; `segment` covers one period of the root.
    pub exponent: u32,
    pub p: CirclePoint,
    pub kind: FixedKind,
    pub period: f64,
    pub axis: Geodesic,
    pub start: BundlePoint,
    /// One period of the root word.
    pub segment: OrbitSegment,
    /// Letters crossed over one period; conjugate to `oriented` in the surface group.
    pub crossing_word: Word,
    /// Free-homotopy class, read from the crossing word.
    pub class: ConjugacyKey,
    /// The crossing word spells the class with a different free word (differs by relators).
    pub respelled: bool,
    /// Base distance plus fiber gap between the start and the end of the period.
    pub closure_gap: f64,
    /// Log holonomy derivative over one period forward in time.
    pub forward_log_holonomy: f64,
    /// Log holonomy derivative over one period backward in time.
    pub backward_log_holonomy: f64,
}

impl PeriodicOrbit {
    pub fn translation_length(&self) -> f64 {
        self.period
    }
}

fn fixed_residual(action: &CircleAction, w: &Word, p: CirclePoint) -> f64 {
    let k = action.k() as f64;
    let d = action.lift(w, p.s()) - p.s();
    (d - k * (d / k).round()).abs()
}

/// The periodic orbit of `φ` through the axis of `w` at height `p`.
pub fn periodic_orbit(
    engine: &FlowEngine<'_>,
    w: &Word,
    p: CirclePoint,
    sample_dt: Option<f64>,
) -> Result<PeriodicOrbit> {
    periodic_orbit_power(engine, w, 1, p, sample_dt)
}

/// Margin, in the `cosh` proxy of the Dirichlet test, kept between the start point and the
/// domain boundary. On the boundary the end of the period may land in another representative.
const START_MARGIN: f64 = 1e-6;

/// First point along the axis, from the foot of the origin, that reduces into the interior.
fn interior_start(
    action: &CircleAction,
    axis: &Geodesic,
    period: f64,
    p: CirclePoint,
) -> Result<(HyperbolicPoint, BundlePoint)> {
    for i in 0..64 {
        let x0 = axis.point_at(period * i as f64 / 61.0, 0.0);
        let start = BundlePoint::from_global(action, x0, p)?;
        if action.group().in_domain(start.local(), -START_MARGIN) {
            return Ok((x0, start));
        }
    }
    Err(LabError::DomainEscape {
        steps: 64,
        distance: period,
    })
}

/// Attracting fixed point of the lift of `w` near `s`, refined by iterating the contraction.
fn polish(action: &CircleAction, w: &Word, s: f64) -> f64 {
    let k = action.k() as f64;
    let mut s = s;
    for _ in 0..8 {
        let d = action.lift(w, s) - s;
        let next = s + d - k * (d / k).round();
        if next == s {
            break;
        }
        s = next;
    }
    s
}

/// The periodic orbit of `φ` for `w^j` at height `p`, where `p` is fixed by `ρ_k(w^j)`.
///
/// Over one period of `w` the orbit returns to the same base point with its fiber translated by
/// an integer, so the period of `w^j` is `j` translated copies of one period of `w`. Only that
/// first copy is traced: forward in time fiber errors grow like `e^t`.
pub fn periodic_orbit_power(
    engine: &FlowEngine<'_>,
    w: &Word,
    j: u32,
    p: CirclePoint,
    sample_dt: Option<f64>,
) -> Result<PeriodicOrbit> {
    let action = engine.action();
    let g = action.group();
    let c = classify_and_fixed_points(&g.evaluate(w));
    if w.is_empty() || j == 0 || c.class != IsometryClass::Hyperbolic {
        return Err(LabError::NotHyperbolic {
            word: w.pow(j).to_string(),
        });
    }
    let wj = w.pow(j);
    let residual = fixed_residual(action, &wj, p).min(fixed_residual(action, &wj.inverse(), p));
    if residual > FIXED_TOL {
        return Err(LabError::NotFixed {
            word: wj.to_string(),
            s: p.s(),
            residual,
        });
    }
    let xi = equivariant_map(p);
    let (att, rep) = (c.fixed[0], c.fixed[1]);
    let (root, axis, kind) = if xi.angular_distance(att) < ENDPOINT_TOL {
        (w.clone(), Geodesic::new(rep, att)?, FixedKind::Attracting)
    } else if xi.angular_distance(rep) < ENDPOINT_TOL {
        (w.inverse(), Geodesic::new(att, rep)?, FixedKind::Repelling)
    } else {
        return Err(LabError::NotAxisEndpoint {
            word: w.to_string(),
            theta: xi.theta(),
        });
    };
    let oriented = root.pow(j);
    let p = action.point(polish(action, &oriented, p.s()));
    let root_period = c.translation_length;
    let (x0, start) = interior_start(action, &axis, root_period, p)?;
    let (end, segment) = engine.flow_phi_sampled(&start, root_period, sample_dt)?;
    let root_crossing = segment.crossing_word();

    // The crossing word must be γ₀⁻¹·V·γ₀ as an element, γ₀ the start word.
    let expected = start.word().inverse().concat(&root).concat(start.word());
    let mismatch = g.evaluate(&root_crossing).distance(&g.evaluate(&expected));
    if mismatch > 1e-6 {
        return Err(LabError::NotFixed {
            word: root_crossing.to_string(),
            s: p.s(),
            residual: mismatch,
        });
    }
    let crossing_word = root_crossing.pow(j);
    let class = conjugacy_key(&oriented);
    let respelled = conjugacy_key(&crossing_word) != class;

    // In the surface group the end word is V·γ₀; the fiber then closes because p is fixed by
    // ρ_k(V).
    let end_base = g.evaluate(&root).inverse().apply(end.x(action));
    let base_gap = hyperbolic_distance(end_base, x0);
    let fiber_gap = fixed_residual(action, &oriented, p);
    let backward = engine.holonomy_derivative(&start, -root_period)?;
    let jf = j as f64;
    Ok(PeriodicOrbit {
        word: w.pow(j),
        oriented,
        exponent: j,
        p,
        kind,
        period: jf * root_period,
        axis,
        start,
        forward_log_holonomy: jf * segment.log_holonomy,
        segment,
        crossing_word,
        class,
        respelled,
        closure_gap: base_gap + fiber_gap,
        backward_log_holonomy: jf * backward.log_derivative,
    })
}

/// One sample of the first-return map on the transversal.
#[derive(Clone, Copy, Debug)]
pub struct ReturnSample {
    /// Offset along the perpendicular geodesic and fiber coordinate of the start.
    pub offset: f64,
    pub s: f64,
    /// The same coordinates after one return.
    pub offset_return: f64,
    pub s_return: f64,
    /// Return time.
    pub time: f64,
    /// Whether the forward orbit reaches the translated transversal at all; `false` leaves the
    /// return coordinates `NaN`.
    pub defined: bool,
    /// Whether the return lands back in the transversal (the point lies in `T'`).
    pub lands_inside: bool,
}

#[derive(Clone, Debug)]
pub struct FirstReturnReport {
    /// Base radius and fiber half-width actually used.
    pub radius: f64,
    pub fiber_radius: f64,
    /// Number of halvings needed.
    pub shrinks: u32,
    pub samples: Vec<ReturnSample>,
    /// Distance of `r(x₀, p)` from `(x₀, p)`.
    pub fixed_residual: f64,
    /// Central difference of the return in the fiber direction at `(x₀, p)`.
    pub fiber_derivative: f64,
    /// `rn_derivative(V, p)` for the oriented word `V`.
    pub expected_derivative: f64,
    /// Signed fiber gaps `s_n - p` of the backward iterates `r⁻ⁿ(c)`, `n = 0, 1, ...`.
    pub backward_gaps: Vec<f64>,
    /// Base offsets of the backward iterates.
    pub backward_offsets: Vec<f64>,
    /// Largest disagreement over one root step between `r⁻¹` and the leaf parametrization.
    pub leaf_drift: f64,
    /// The backward gaps shrink strictly and keep one sign.
    pub monotone: bool,
}

/// Transversal-relative geometry of one periodic orbit.
struct Transversal<'a> {
    action: &'a CircleAction,
    frame: Isometry,
    axis: Geodesic,
    /// The oriented root `R` with `V = R^steps`, its isometry and its period.
    v: Isometry,
    v_inv: Isometry,
    oriented: Word,
    period: f64,
    steps: u32,
    p: CirclePoint,
    /// `lift(V, p) - p`, a multiple of `k`; removed so returns stay near `p` on the line.
    shift: f64,
}

impl Transversal<'_> {
    fn point(&self, offset: f64) -> HyperbolicPoint {
        self.axis.point_at(0.0, offset)
    }

    /// Flows `(x, s)` from `x` until the Fermi position reaches `target`.
    fn hit(
        &self,
        x: HyperbolicPoint,
        xi: BoundaryPoint,
        target: f64,
        radius: f64,
    ) -> Result<(f64, HyperbolicPoint)> {
        let pos = |t: f64| fermi_in_frame(&self.frame, flow_toward(x, xi, t)).0 - target;
        let t0 = -pos(0.0);
        let mut width = 0.5;
        let (mut lo, mut hi) = (t0 - width, t0 + width);
        while !(pos(lo) < 0.0 && pos(hi) > 0.0) {
            width *= 2.0;
            if width > 64.0 {
                return Err(LabError::TransversalTooLarge {
                    radius,
                    reason: "geodesic misses the transversal".into(),
                });
            }
            lo = t0 - width;
            hi = t0 + width;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo < 1e-14 {
                break;
            }
            if pos(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        Ok((t, flow_toward(x, xi, t)))
    }

    /// `r(offset, s)`: flow forward to the translate `V·T`, then pull back by `V⁻¹`. Done as
    /// `steps` root periods, each pulled back by `R⁻¹`, so no point gets near the boundary.
    fn forward(&self, offset: f64, s: f64, radius: f64) -> Result<(f64, f64, f64)> {
        let inv = self.oriented.inverse();
        let (mut off, mut s, mut time) = (offset, s, 0.0);
        for _ in 0..self.steps {
            let xi = equivariant_map(self.action.point(s));
            let (t, y) = self.hit(self.point(off), xi, self.period, radius)?;
            let (pos, o) = fermi_in_frame(&self.frame, self.v_inv.apply(y));
            if pos.abs() > 1e-8 {
                return Err(LabError::TransversalTooLarge {
                    radius,
                    reason: "return is not on the transversal".into(),
                });
            }
            off = o;
            s = self.action.lift(&inv, s);
            time += t;
        }
        Ok((off, s + self.shift, time))
    }

    /// `r⁻¹` on the weak-unstable leaf of the orbit: push by `R`, flow back to the transversal,
    /// `steps` times. Off the leaf, errors grow like `e^ℓ` per root step, so every step is
    /// re-projected onto the leaf; the largest projection distance is returned with the result.
    fn backward(&self, offset: f64, s: f64, radius: f64) -> Result<(f64, f64, f64)> {
        let (mut off, mut s, mut drift) = (offset, s, 0.0f64);
        for _ in 0..self.steps {
            s = self.action.lift(&self.oriented, s);
            let xi = equivariant_map(self.action.point(s));
            let (_, z) = self.hit(self.v.apply(self.point(off)), xi, 0.0, radius)?;
            let landed = fermi_in_frame(&self.frame, z).1;
            off = self.unstable_leaf_point(s, radius)?;
            drift = drift.max((landed - off).abs());
        }
        Ok((off, s - self.shift, drift))
    }

    /// The point of the transversal on the geodesic from the axis' backward endpoint to `f(s)`.
    fn unstable_leaf_point(&self, s: f64, radius: f64) -> Result<f64> {
        let xi = equivariant_map(self.action.point(s));
        let g = Geodesic::new(self.axis.neg, xi)?;
        let (_, z) = self.hit(g.point_at(0.0, 0.0), xi, 0.0, radius)?;
        Ok(fermi_in_frame(&self.frame, z).1)
    }
}

/// Samples the first-return map of `orbit` on a transversal of base radius `radius` and fiber
/// half-width `radius / 2π`, halving the radius on failure up to 8 times.
pub fn first_return(
    engine: &FlowEngine<'_>,
    orbit: &PeriodicOrbit,
    radius: f64,
    grid: usize,
    iterates: usize,
) -> Result<FirstReturnReport> {
    let action = engine.action();
    let g = action.group();
    let n = orbit.oriented.len() / orbit.exponent as usize;
    let root = Word::from_letters(orbit.oriented.letters()[..n].iter().copied());
    let v = g.evaluate(&root);
    let k = action.k() as f64;
    let shift = k * ((action.lift(&orbit.oriented, orbit.p.s()) - orbit.p.s()) / k).round();
    let tr = Transversal {
        action,
        frame: orbit.axis.standard_frame(),
        axis: orbit.axis,
        v,
        v_inv: v.inverse(),
        oriented: root,
        period: orbit.period / orbit.exponent as f64,
        steps: orbit.exponent,
        p: orbit.p,
        shift,
    };
    let mut r = radius;
    let mut last_err = None;
    for shrinks in 0..=8u32 {
        match sample_return(&tr, r, grid, iterates) {
            Ok(mut report) => {
                report.shrinks = shrinks;
                return Ok(report);
            }
            Err(e @ LabError::TransversalTooLarge { .. }) => {
                last_err = Some(e);
                r *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or(LabError::TransversalTooLarge {
        radius,
        reason: "no attempt".into(),
    }))
}

fn sample_return(
    tr: &Transversal<'_>,
    radius: f64,
    grid: usize,
    iterates: usize,
) -> Result<FirstReturnReport> {
    let fiber_radius = radius / std::f64::consts::TAU;
    let p = tr.p.s();
    let n = grid.max(1);
    let mut samples = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let frac = |m: usize| {
                if n == 1 {
                    0.0
                } else {
                    2.0 * m as f64 / (n - 1) as f64 - 1.0
                }
            };
            let offset = radius * frac(i);
            let s = p + fiber_radius * frac(j);
            // Fiber offsets beyond about e^{-period} aim past the translated transversal.
            let (offset_return, s_return, time, defined) = match tr.forward(offset, s, radius) {
                Ok((o, r, t)) => (o, r, t, true),
                Err(LabError::TransversalTooLarge { .. }) => (f64::NAN, f64::NAN, f64::NAN, false),
                Err(e) => return Err(e),
            };
            let lands_inside =
                defined && offset_return.abs() <= radius && (s_return - p).abs() <= fiber_radius;
            samples.push(ReturnSample {
                offset,
                s,
                offset_return,
                s_return,
                time,
                defined,
                lands_inside,
            });
        }
    }
    let (off0, s0, _) = tr.forward(0.0, p, radius)?;
    let fixed_residual = off0.abs() + (s0 - p).abs();
    let h = (1e-2 * (-tr.period * tr.steps as f64).exp()).min(1e-6);
    let fiber_derivative =
        (tr.forward(0.0, p + h, radius)?.1 - tr.forward(0.0, p - h, radius)?.1) / (2.0 * h);
    let expected_derivative = PullbackMeasure::new(tr.action.k()).rn_derivative(
        tr.action,
        &tr.oriented.pow(tr.steps),
        tr.p,
    );

    let mut s = p + 0.5 * fiber_radius;
    let mut offset = tr.unstable_leaf_point(s, radius)?;
    let mut backward_gaps = vec![s - p];
    let mut backward_offsets = vec![offset];
    let mut leaf_drift: f64 = 0.0;
    for _ in 0..iterates {
        let (o, s_new, drift) = tr.backward(offset, s, radius)?;
        (offset, s) = (o, s_new);
        leaf_drift = leaf_drift.max(drift);
        backward_gaps.push(s - p);
        backward_offsets.push(offset);
    }
    // Below the resolution of the fixed point itself the sign of the gap is noise.
    let monotone = backward_gaps
        .windows(2)
        .take_while(|w| w[0].abs() > GAP_RESOLUTION)
        .all(|w| w[1].abs() < w[0].abs() && (w[1] * w[0] >= 0.0 || w[1].abs() <= GAP_RESOLUTION));
    Ok(FirstReturnReport {
        radius,
        fiber_radius,
        shrinks: 0,
        samples,
        fixed_residual,
        fiber_derivative,
        expected_derivative,
        backward_gaps,
        backward_offsets,
        leaf_drift,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::SurfaceGroup;

    fn action(k: u32) -> CircleAction {
        CircleAction::new(SurfaceGroup::standard_genus2(), k).unwrap()
    }

    #[test]
    fn generator_orbits_close() {
        let a = action(1);
        let e = FlowEngine::new(&a);
        for name in ["a", "b", "C", "ab", "aB"] {
            let w: Word = name.parse().unwrap();
            let c = classify_and_fixed_points(&a.group().evaluate(&w));
            for fp in a.fixed_points(&w).unwrap() {
                let orbit = periodic_orbit(&e, &w, fp.point, Some(0.1)).unwrap();
                assert!((orbit.period - c.translation_length).abs() < 1e-12);
                assert!(orbit.closure_gap < 1e-7, "{name}: {}", orbit.closure_gap);
                assert!(!orbit.respelled, "{name}");
                assert!((orbit.backward_log_holonomy + orbit.period).abs() < 1e-6 * orbit.period);
                assert!((orbit.forward_log_holonomy - orbit.period).abs() < 1e-6 * orbit.period);
                assert_eq!(orbit.kind, fp.kind);
                let expected = match fp.kind {
                    FixedKind::Attracting => conjugacy_key(&w),
                    FixedKind::Repelling => conjugacy_key(&w.inverse()),
                };
                assert_eq!(orbit.class, expected);
            }
        }
    }

    #[test]
    fn rejects_non_fixed_points() {
        let a = action(1);
        let e = FlowEngine::new(&a);
        let w: Word = "a".parse().unwrap();
        let fp = a.fixed_points(&w).unwrap()[0].point;
        let err = periodic_orbit(&e, &w, a.point(fp.s() + 0.01), None).unwrap_err();
        assert!(matches!(err, LabError::NotFixed { .. }));
    }

    #[test]
    fn first_return_contracts_in_the_past() {
        let a = action(1);
        let e = FlowEngine::new(&a);
        for name in ["ab", "ac", "Ad"] {
            let w: Word = name.parse().unwrap();
            for fp in a.fixed_points(&w).unwrap() {
                let orbit = periodic_orbit(&e, &w, fp.point, None).unwrap();
                let rep = first_return(&e, &orbit, 0.1, 3, 10).unwrap();
                assert!(rep.fixed_residual < 1e-9);
                assert!((rep.fiber_derivative / rep.expected_derivative - 1.0).abs() < 1e-5);
                assert!((rep.expected_derivative.ln() - orbit.period).abs() < 1e-8);
                assert!(rep.monotone, "{:?}", rep.backward_gaps);
                assert!(rep.leaf_drift < 1e-8, "{}", rep.leaf_drift);
                assert!(rep.backward_gaps.last().unwrap().abs() < 1e-12);
                assert!(
                    rep.backward_offsets.last().unwrap().abs() < 1e-9,
                    "{:?}",
                    rep.backward_offsets
                );
            }
        }
    }

    #[test]
    fn power_orbit_first_return_on_the_cover() {
        let a = action(4);
        let e = FlowEngine::new(&a);
        let w: Word = "ac".parse().unwrap();
        assert_eq!(a.rotation_displacement(&w).abs(), 1);
        for fp in a.fixed_points(&w.pow(4)).unwrap().into_iter().take(2) {
            let orbit = periodic_orbit_power(&e, &w, 4, fp.point, None).unwrap();
            let rep = first_return(&e, &orbit, 0.05, 3, 6).unwrap();
            // The forward return expands fiber rounding by e^period.
            let tol = 1e-9 + 1e-14 * rep.expected_derivative;
            assert!(rep.fixed_residual < tol, "{}", rep.fixed_residual);
            assert!(rep.monotone, "{:?}", rep.backward_gaps);
            assert!(rep.samples.iter().any(|s| !s.defined));
            assert!((rep.expected_derivative.ln() / orbit.period - 1.0).abs() < 1e-8);
        }
    }
}
