//! The boundary action of the surface group on the circle and its lifts to `R/kZ`.
//!
//! The circle `R/Z` is identified with the boundary of the disk by `s ↦ e^{2πis}`. Each letter
//! `l` with `SU(1, 1)` pair `(α, β)` lifts to `R` in closed form:
//!
//! ```text
//! l̂(s) = s + arg(α)/π + Arg(1 + (β/α)·e^{-2πis})/π + n_l
//! ```
//!
//! which is continuous because `|β/α| < 1`. The integer `n_l` is fixed by asking the lift to
//! have fixed points, so inverse letters lift to inverse maps. Words act by composing letter
//! lifts right to left; the lift of a word commutes with `s ↦ s + 1` and therefore descends to
//! `R/kZ` for every `k`.
//!
//! The lift of the surface relator is a translation by the Euler number of the action, which
//! is `±2` for a genus-2 surface. The free-group action on `R/kZ` therefore factors through the
//! surface group only when `k` divides 2.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::geometry::{classify_and_fixed_points, BoundaryPoint, IsometryClass};
use crate::group::{Letter, SurfaceGroup, Word};

/// Number of scan intervals per unit of `s` used to bracket fixed points.
pub const FIXED_POINT_SCAN: usize = 2048;

/// A point of `R/kZ`, stored with its representative in `[0, k)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CirclePoint {
    s: f64,
    k: u32,
}

impl CirclePoint {
    pub fn new(s: f64, k: u32) -> Self {
        assert!(k > 0, "cover index must be positive");
        let kf = k as f64;
        let mut r = s.rem_euclid(kf);
        if r >= kf {
            r = 0.0;
        }
        Self { s: r, k }
    }

    pub fn s(self) -> f64 {
        self.s
    }

    pub fn k(self) -> u32 {
        self.k
    }

    /// Signed displacement `other - self` taken in `(-k/2, k/2]`.
    pub fn signed_gap(self, other: CirclePoint) -> f64 {
        let kf = self.k as f64;
        let mut d = (other.s - self.s).rem_euclid(kf);
        if d > 0.5 * kf {
            d -= kf;
        }
        d
    }
}

/// The equivariant map `f_k: R/kZ → ∂H²`, `s ↦ e^{2πi s}`.
pub fn equivariant_map(p: CirclePoint) -> BoundaryPoint {
    BoundaryPoint::new(TAU * p.s)
}

#[derive(Clone, Copy, Debug)]
struct LetterLift {
    alpha: Complex64,
    beta: Complex64,
    ratio: Complex64,
    shift: f64,
}

impl LetterLift {
    fn raw(&self, s: f64) -> f64 {
        let u = Complex64::new(1.0, 0.0) + self.ratio * Complex64::from_polar(1.0, -TAU * s);
        s + self.shift + u.arg() / PI
    }

    fn derivative(&self, s: f64) -> f64 {
        let e = Complex64::from_polar(1.0, TAU * s);
        1.0 / (self.beta.conj() * e + self.alpha.conj()).norm_sqr()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixedKind {
    Attracting,
    Repelling,
}

impl FixedKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FixedKind::Attracting => "attracting",
            FixedKind::Repelling => "repelling",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FixedPoint {
    pub point: CirclePoint,
    pub kind: FixedKind,
    /// Derivative of the lift at the fixed point, in the `s` coordinate.
    pub derivative: f64,
}

#[derive(Clone, Debug)]
pub struct MinimalityProbe {
    /// Largest gap between consecutive orbit points, as an angle (a full fiber is `2πk`).
    pub max_gap: f64,
    pub orbit_size: usize,
    pub pass: bool,
}

/// `ρ_k`: the lifted boundary action on `R/kZ`.
#[derive(Clone, Debug)]
pub struct CircleAction {
    group: SurfaceGroup,
    k: u32,
    lifts: [LetterLift; 8],
}

impl CircleAction {
    pub fn new(group: SurfaceGroup, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(LabError::Config("cover index k must be positive".into()));
        }
        let lifts = std::array::from_fn(|c| {
            let g = group.generator(Letter::ALL[c]);
            let (alpha, beta) = g.su11();
            let mut lift = LetterLift {
                alpha,
                beta,
                ratio: beta / alpha,
                shift: alpha.arg() / PI,
            };
            let fixed = classify_and_fixed_points(g).fixed[0];
            let s = fixed.theta() / TAU;
            lift.shift -= (lift.raw(s) - s).round();
            lift
        });
        Ok(Self { group, k, lifts })
    }

    pub fn group(&self) -> &SurfaceGroup {
        &self.group
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Whether the free-group action on `R/kZ` factors through the surface group.
    pub fn descends_to_surface_group(&self) -> bool {
        let e = self.rotation_displacement(self.group.relator());
        e % self.k as i64 == 0
    }

    pub fn point(&self, s: f64) -> CirclePoint {
        CirclePoint::new(s, self.k)
    }

    /// Lift of a letter to `R`.
    pub fn lift_letter(&self, l: Letter, s: f64) -> f64 {
        self.lifts[l.code()].raw(s)
    }

    pub fn letter_derivative(&self, l: Letter, s: f64) -> f64 {
        self.lifts[l.code()].derivative(s)
    }

    /// Lift `ŵ` of a word to `R`.
    pub fn lift(&self, w: &Word, s: f64) -> f64 {
        w.letters()
            .iter()
            .rev()
            .fold(s, |acc, &l| self.lifts[l.code()].raw(acc))
    }

    /// `(ŵ(s), ŵ'(s))`.
    pub fn lift_with_derivative(&self, w: &Word, s: f64) -> (f64, f64) {
        let mut x = s;
        let mut der = 1.0;
        for &l in w.letters().iter().rev() {
            let lift = &self.lifts[l.code()];
            der *= lift.derivative(x);
            x = lift.raw(x);
        }
        (x, der)
    }

    pub fn act(&self, w: &Word, p: CirclePoint) -> CirclePoint {
        CirclePoint::new(self.lift(w, p.s), self.k)
    }

    /// Derivative of `act(w, ·)` at `p` in the `s` coordinate.
    pub fn derivative(&self, w: &Word, p: CirclePoint) -> f64 {
        self.lift_with_derivative(w, p.s).1
    }

    /// Net integer translation of the lift `ŵ`: its displacement at the base fixed points, or
    /// the constant displacement when `w` evaluates to the identity.
    pub fn rotation_displacement(&self, w: &Word) -> i64 {
        let c = classify_and_fixed_points(&self.group.evaluate(w));
        let s = match c.class {
            IsometryClass::Hyperbolic | IsometryClass::Parabolic => c.fixed[0].theta() / TAU,
            _ => 0.0,
        };
        (self.lift(w, s) - s).round() as i64
    }

    /// All fixed points of `ρ_k(w)` on `R/kZ`, sorted by coordinate.
    pub fn fixed_points(&self, w: &Word) -> Result<Vec<FixedPoint>> {
        if w.is_empty()
            || classify_and_fixed_points(&self.group.evaluate(w)).class != IsometryClass::Hyperbolic
        {
            return Err(LabError::NotHyperbolic {
                word: w.to_string(),
            });
        }
        let n = FIXED_POINT_SCAN;
        let disp: Vec<f64> = (0..n)
            .map(|i| {
                let s = i as f64 / n as f64;
                self.lift(w, s) - s
            })
            .collect();
        let lo = disp.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = disp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let k = self.k as i64;
        let mut base = Vec::new();
        let first = (lo / k as f64).ceil() as i64;
        let last = (hi / k as f64).floor() as i64;
        for m in first..=last {
            let target = (m * k) as f64;
            for i in 0..n {
                // The displacement is 1-periodic; closing the scan with the value at 0 keeps a
                // root sitting exactly on the seam from being lost to rounding.
                let (d0, d1) = (disp[i] - target, disp[(i + 1) % n] - target);
                if d0 == 0.0 {
                    base.push(i as f64 / n as f64);
                } else if d0 * d1 < 0.0 {
                    base.push(self.bisect(
                        w,
                        target,
                        i as f64 / n as f64,
                        (i + 1) as f64 / n as f64,
                    ));
                }
            }
        }
        for r in base.iter_mut() {
            *r = r.rem_euclid(1.0);
        }
        base.sort_by(f64::total_cmp);
        base.dedup_by(|a, b| (*a - *b).abs() < 1e-10);
        if base.len() > 1 && base[0] + 1.0 - base[base.len() - 1] < 1e-10 {
            base.pop();
        }
        if base.is_empty() {
            let d = self.rotation_displacement(w);
            return Err(LabError::NoFixedPoints {
                word: w.to_string(),
                k: self.k,
                displacement: d,
            });
        }
        let mut out = Vec::with_capacity(base.len() * self.k as usize);
        for s0 in base {
            let der = self.lift_with_derivative(w, s0).1;
            let kind = if der < 1.0 {
                FixedKind::Attracting
            } else {
                FixedKind::Repelling
            };
            for i in 0..self.k {
                out.push(FixedPoint {
                    point: CirclePoint::new(s0 + i as f64, self.k),
                    kind,
                    derivative: der,
                });
            }
        }
        out.sort_by(|a, b| a.point.s.total_cmp(&b.point.s));
        Ok(out)
    }

    fn bisect(&self, w: &Word, target: f64, mut a: f64, mut b: f64) -> f64 {
        let f = |s: f64| self.lift(w, s) - s - target;
        let fa = f(a);
        while b - a > 1e-13 {
            let m = 0.5 * (a + b);
            let fm = f(m);
            if fm == 0.0 {
                return m;
            }
            if (fm < 0.0) == (fa < 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    /// Orbit of `p0` under all words of length at most `word_len`; reports the largest gap.
    pub fn minimality_probe(
        &self,
        p0: CirclePoint,
        word_len: usize,
        eps: f64,
    ) -> Result<MinimalityProbe> {
        if word_len > 8 {
            return Err(LabError::Guard {
                what: "probe word_len",
                value: word_len as f64,
                limit: 8.0,
            });
        }
        let kf = self.k as f64;
        let mut orbit = vec![p0.s];
        let mut frontier: Vec<(f64, Option<Letter>)> = vec![(p0.s, None)];
        for _ in 0..word_len {
            let mut next = Vec::with_capacity(frontier.len() * 7);
            for &(s, last) in &frontier {
                for &l in &Letter::ALL {
                    if last == Some(l.inverse()) {
                        continue;
                    }
                    next.push((self.lifts[l.code()].raw(s), Some(l)));
                }
            }
            orbit.extend(next.iter().map(|(s, _)| s.rem_euclid(kf)));
            frontier = next;
        }
        orbit.sort_by(f64::total_cmp);
        let mut max_gap = orbit[0] + kf - orbit[orbit.len() - 1];
        for w in orbit.windows(2) {
            max_gap = max_gap.max(w[1] - w[0]);
        }
        let max_gap = TAU * max_gap;
        Ok(MinimalityProbe {
            max_gap,
            orbit_size: orbit.len(),
            pass: max_gap < eps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::classify_and_fixed_points;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn action(k: u32) -> CircleAction {
        CircleAction::new(SurfaceGroup::standard_genus2(), k).unwrap()
    }

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn empty_word_acts_trivially() {
        let a = action(3);
        let p = a.point(2.25);
        assert_eq!(a.act(&Word::empty(), p), p);
        assert_eq!(a.rotation_displacement(&Word::empty()), 0);
    }

    #[test]
    fn base_action_is_equivariant() {
        let a = action(1);
        let g = a.group().clone();
        let words: Vec<Word> = g.enumerate_words(4).unwrap().collect();
        for word in &words {
            let m = g.evaluate(word);
            for i in 0..40 {
                let p = a.point(i as f64 / 40.0 + 0.003);
                let lhs = equivariant_map(a.act(word, p));
                let rhs = m.apply_boundary(equivariant_map(p));
                assert!(lhs.angular_distance(rhs) < 1e-8, "{word}");
            }
        }
    }

    #[test]
    fn lifts_are_monotone_and_periodic() {
        let a = action(1);
        for &l in &Letter::ALL {
            let mut prev = a.lift_letter(l, -0.5);
            for i in 1..=2000 {
                let s = -0.5 + i as f64 / 1000.0;
                let x = a.lift_letter(l, s);
                assert!(x > prev);
                prev = x;
                assert!((a.lift_letter(l, s + 1.0) - x - 1.0).abs() < 1e-12);
            }
            let inv = l.inverse();
            assert!((a.lift_letter(inv, a.lift_letter(l, 0.37)) - 0.37).abs() < 1e-12);
        }
    }

    #[test]
    fn relator_lift_is_euler_translation() {
        let a = action(1);
        let r = a.group().relator().clone();
        assert_eq!(a.rotation_displacement(&r).abs(), 2);
        for i in 0..50 {
            let s = i as f64 / 50.0;
            assert!((a.lift(&r, s) - s - a.rotation_displacement(&r) as f64).abs() < 1e-8);
        }
        assert!(action(1).descends_to_surface_group());
        assert!(action(2).descends_to_surface_group());
        assert!(!action(3).descends_to_surface_group());
        assert!(!action(4).descends_to_surface_group());
        let a2 = action(2);
        let p = a2.point(1.3);
        assert!(a2.act(&r, p).signed_gap(p).abs() < 1e-8);
    }

    #[test]
    fn displacement_of_inverse_is_opposite() {
        let a = action(1);
        for word in a.group().enumerate_words(3).unwrap() {
            assert_eq!(
                a.rotation_displacement(&word),
                -a.rotation_displacement(&word.inverse())
            );
        }
    }

    #[test]
    fn generator_fixed_points_match_axis() {
        let a = action(1);
        for &l in &Letter::ALL {
            let word = Word::letter(l);
            let fp = a.fixed_points(&word).unwrap();
            assert_eq!(fp.len(), 2);
            let c = classify_and_fixed_points(a.group().generator(l));
            let att = fp.iter().find(|f| f.kind == FixedKind::Attracting).unwrap();
            let rep = fp.iter().find(|f| f.kind == FixedKind::Repelling).unwrap();
            assert!(equivariant_map(att.point).angular_distance(c.attracting().unwrap()) < 1e-10);
            assert!(equivariant_map(rep.point).angular_distance(c.repelling().unwrap()) < 1e-10);
        }
    }

    #[test]
    fn fixed_points_alternate_and_cover() {
        for k in 1..=4u32 {
            let a = action(k);
            for word in a.group().enumerate_words(3).unwrap().skip(1) {
                let d = a.rotation_displacement(&word);
                match a.fixed_points(&word) {
                    Ok(fp) => {
                        assert_eq!(d % k as i64, 0);
                        assert_eq!(fp.len(), 2 * k as usize, "{word} k={k}");
                        for i in 0..fp.len() {
                            assert_ne!(fp[i].kind, fp[(i + 1) % fp.len()].kind);
                            let q = a.act(&word, fp[i].point);
                            assert!(q.signed_gap(fp[i].point).abs() < 1e-9);
                        }
                    }
                    Err(LabError::NoFixedPoints { .. }) => assert_ne!(d % k as i64, 0),
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }

    #[test]
    fn derivative_at_attractor_is_exp_minus_length() {
        let a = action(1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let words: Vec<Word> = a
            .group()
            .enumerate_words(4)
            .unwrap()
            .filter(|w| w.is_cyclically_reduced() && !w.is_empty())
            .collect();
        for _ in 0..50 {
            let word = &words[rng.gen_range(0..words.len())];
            let fp = a.fixed_points(word).unwrap();
            let len = classify_and_fixed_points(&a.group().evaluate(word)).translation_length;
            let att = fp.iter().find(|f| f.kind == FixedKind::Attracting).unwrap();
            assert!((att.derivative / (-len).exp() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn order_preserved() {
        let a = action(2);
        let word = w("aBcD");
        let (p, q, r) = (a.point(0.1), a.point(0.7), a.point(1.6));
        let (p2, q2, r2) = (a.act(&word, p), a.act(&word, q), a.act(&word, r));
        let ccw = |x: CirclePoint, y: CirclePoint, z: CirclePoint| {
            let kf = 2.0;
            ((y.s() - x.s()).rem_euclid(kf)) < ((z.s() - x.s()).rem_euclid(kf))
        };
        assert_eq!(ccw(p, q, r), ccw(p2, q2, r2));
    }

    #[test]
    fn minimality_probe_examples() {
        let a = action(1);
        let probe = a.minimality_probe(a.point(0.123), 6, 0.05 * TAU).unwrap();
        assert!(probe.pass, "gap {}", probe.max_gap);
        let zero = a.minimality_probe(a.point(0.123), 0, 0.05 * TAU).unwrap();
        assert!(!zero.pass);
        assert!((zero.max_gap - TAU).abs() < 1e-12);
        let a2 = action(2);
        assert!(
            a2.minimality_probe(a2.point(0.123), 6, 0.05 * TAU)
                .unwrap()
                .pass
        );
    }
}
