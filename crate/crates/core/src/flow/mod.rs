//! The flow `φ^t` on `H² × R/kZ` and its quotient bookkeeping.
//!
//! A [`BundlePoint`] is kept in the coordinates of the fundamental domain: a point `z` of the
//! closed octagon `D`, the word `γ` with `x = γ·z`, and the local fiber coordinate
//! `s_loc = ρ(γ⁻¹)·p`. In these coordinates the point `(x, p)` of `H² × S¹` is represented by
//! `(z, s_loc)`, which is its image in the quotient bundle. The flow moves `z` along the
//! geodesic toward `f(s_loc)`; when `z` leaves `D` across the side paired by the letter `l`,
//! the representation is changed by `l`: `γ ← γl`, `z ← l⁻¹z`, `s_loc ← ρ(l⁻¹)s_loc`.
//!
//! Crossing times are exact. Along the geodesic `τ ↦ x(τ)`, `cosh d(x(τ), q)` has the form
//! `A cosh τ - B sinh τ`, so the boundary of each Dirichlet half-plane of `D` is met where a
//! sum `c₁e^τ + c₂e^{-τ}` vanishes.
//!
//! The fiber length over `γD` is measured by `ρ(γ)_*ν_o`, which is Lebesgue measure in
//! `s_loc`. The transverse holonomy derivative along an orbit is therefore the product of the
//! letter-lift derivatives collected at the crossings.

pub mod cone;
pub mod estimators;
pub mod mollifier;
pub mod periodic;
pub mod psi;

use num_complex::Complex64;

use crate::action::{equivariant_map, CircleAction, CirclePoint};
use crate::error::{LabError, Result};
use crate::geometry::{busemann, HyperbolicPoint, SURFACE_DELTA};
use crate::group::{Letter, Word, SIDES};

/// Largest flow time accepted by one call.
pub const MAX_FLOW_TIME: f64 = 100.0;

/// A point of `H² × R/kZ` in fundamental-domain coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct BundlePoint {
    z: Complex64,
    word: Word,
    s_loc: f64,
    p: CirclePoint,
}

impl BundlePoint {
    /// Reduces `x` into the fundamental domain and records the domain word.
    pub fn from_global(action: &CircleAction, x: HyperbolicPoint, p: CirclePoint) -> Result<Self> {
        let reduced = action.group().reduce_to_domain(x)?;
        let s_loc = action
            .lift(&reduced.word.inverse(), p.s())
            .rem_euclid(action.k() as f64);
        Ok(Self {
            z: reduced.point.to_complex(),
            word: reduced.word,
            s_loc,
            p,
        })
    }

    /// A point given directly in local coordinates, with `z` in the domain.
    pub fn from_local(action: &CircleAction, z: HyperbolicPoint, word: Word, s_loc: f64) -> Self {
        let k = action.k() as f64;
        let p = action.point(action.lift(&word, s_loc));
        Self {
            z: z.to_complex(),
            word,
            s_loc: s_loc.rem_euclid(k),
            p,
        }
    }

    pub fn local(&self) -> HyperbolicPoint {
        HyperbolicPoint::from_complex(self.z)
    }

    pub(crate) fn z(&self) -> Complex64 {
        self.z
    }

    pub fn word(&self) -> &Word {
        &self.word
    }

    pub fn s_loc(&self) -> f64 {
        self.s_loc
    }

    pub fn p(&self) -> CirclePoint {
        self.p
    }

    /// The point of `H²`, `γ·z`.
    pub fn x(&self, action: &CircleAction) -> HyperbolicPoint {
        action.group().evaluate(&self.word).apply(self.local())
    }

    /// The target of the leafwise geodesics in local coordinates, `f(s_loc) = γ⁻¹f(p)`.
    pub(crate) fn target(&self) -> Complex64 {
        Complex64::from_polar(1.0, std::f64::consts::TAU * self.s_loc)
    }

    pub(crate) fn set_local(&mut self, z: Complex64) {
        self.z = z;
    }

    /// Changes the representation by the letter `l` (the domain was left across `l`'s side).
    /// Returns the log-derivative of the fiber map `s_loc ↦ ρ(l⁻¹)s_loc`.
    pub(crate) fn cross(&mut self, action: &CircleAction, l: Letter) -> f64 {
        let inv = l.inverse();
        let log_der = action.letter_derivative(inv, self.s_loc).ln();
        self.s_loc = action
            .lift_letter(inv, self.s_loc)
            .rem_euclid(action.k() as f64);
        self.z = action.group().generator(inv).apply_complex(self.z);
        self.word.push(l);
        log_der
    }

    /// Same point re-expressed with the domain word `word` (any word, the local point may then
    /// lie outside `D`).
    pub fn rebased(&self, action: &CircleAction, word: &Word) -> BundlePoint {
        let rel = word.inverse().concat(&self.word);
        let m = action.group().evaluate(&rel);
        let s_loc = action.lift(&rel, self.s_loc).rem_euclid(action.k() as f64);
        BundlePoint {
            z: m.apply_complex(self.z),
            word: word.clone(),
            s_loc,
            p: self.p,
        }
    }
}

/// A sample along an orbit.
#[derive(Clone, Debug)]
pub struct OrbitSample {
    pub t: f64,
    pub point: BundlePoint,
}

/// A domain transition: at time `t` the orbit left the current translate across `letter`.
#[derive(Clone, Copy, Debug)]
pub struct Crossing {
    pub t: f64,
    pub letter: Letter,
}

#[derive(Clone, Debug, Default)]
pub struct OrbitSegment {
    pub samples: Vec<OrbitSample>,
    pub crossings: Vec<Crossing>,
    /// Sum of log-derivatives of the fiber maps at the crossings.
    pub log_holonomy: f64,
}

impl OrbitSegment {
    /// Free product of the crossing letters; the end word is `start · crossing_word`.
    pub fn crossing_word(&self) -> Word {
        Word::from_letters(self.crossings.iter().map(|c| c.letter))
    }

    /// Hyperbolic distance between consecutive samples, measured in the first sample's frame.
    pub fn step_distances(&self, action: &CircleAction) -> Vec<f64> {
        self.samples
            .windows(2)
            .map(|w| {
                let b = w[1].point.rebased(action, w[0].point.word());
                crate::geometry::hyperbolic_distance(w[0].point.local(), b.local())
            })
            .collect()
    }
}

/// Transverse holonomy derivative along `φ^s(y)`, `s ∈ [0, t]`, in the piecewise fiber metric.
#[derive(Clone, Copy, Debug)]
pub struct HolonomyRecord {
    pub t: f64,
    pub derivative: f64,
    pub log_derivative: f64,
    /// `log(derivative) - (δt + 2δ·diam D)`; meaningful for `t < 0`, where it must be `≤ 0`.
    pub bound_check: f64,
}

/// Moving frame `w ↦ rot·(w - z)/(1 - z̄w)` sending `z` to 0 and the flow target to `+1`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Frame {
    z: Complex64,
    rot: Complex64,
}

impl Frame {
    pub(crate) fn new(z: Complex64, target: Complex64) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let w = (target - z) / (one - z.conj() * target);
        Self {
            z,
            rot: w.conj() / w.norm(),
        }
    }

    pub(crate) fn apply(&self, w: Complex64) -> Complex64 {
        self.rot * (w - self.z) / (Complex64::new(1.0, 0.0) - self.z.conj() * w)
    }

    pub(crate) fn unapply(&self, w: Complex64) -> Complex64 {
        let u = self.rot.conj() * w;
        (u + self.z) / (Complex64::new(1.0, 0.0) + self.z.conj() * u)
    }

    /// Point at signed arclength `tau` along the geodesic through `z` toward the target.
    pub(crate) fn along(&self, tau: f64) -> Complex64 {
        self.unapply(Complex64::new((0.5 * tau).tanh(), 0.0))
    }
}

/// The flow engine: the circle action plus precomputed side data of the fundamental domain.
#[derive(Clone, Debug)]
pub struct FlowEngine<'a> {
    action: &'a CircleAction,
    /// For each side, the translate `l·o` across it and the letter `l`.
    sides: [(Complex64, Letter); SIDES],
    diameter: f64,
    delta: f64,
}

impl<'a> FlowEngine<'a> {
    pub fn new(action: &'a CircleAction) -> Self {
        let g = action.group();
        let sides = std::array::from_fn(|j| {
            let l = g.side_letter(j);
            (g.translate_of_origin(l).to_complex(), l)
        });
        Self {
            action,
            sides,
            diameter: g.domain().diameter,
            delta: SURFACE_DELTA,
        }
    }

    pub fn action(&self) -> &'a CircleAction {
        self.action
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// First exit from `D` along the geodesic through `z` toward `target` (backward when
    /// `sign < 0`): the arclength and the side letter.
    fn exit(&self, z: Complex64, target: Complex64, sign: f64) -> Option<(f64, Letter)> {
        let frame = Frame::new(z, target);
        let coeffs = |q: Complex64| {
            let w = frame.apply(q);
            let n = w.norm_sqr();
            let a = (1.0 + n) / (1.0 - n);
            let b = sign * 2.0 * w.re / (1.0 - n);
            (a, b)
        };
        let (ao, bo) = coeffs(Complex64::new(0.0, 0.0));
        let mut best: Option<(f64, Letter)> = None;
        for &(y, l) in &self.sides {
            let (ay, by) = coeffs(y);
            // g(τ) = cosh d(x(τ), o) - cosh d(x(τ), y) = c1 e^τ + c2 e^{-τ}
            let c1 = 0.5 * ((ao - bo) - (ay - by));
            let c2 = 0.5 * ((ao + bo) - (ay + by));
            if c1 <= 0.0 {
                continue;
            }
            let tau = if c2 >= 0.0 {
                0.0
            } else {
                (0.5 * (-c2 / c1).ln()).max(0.0)
            };
            let better = match best {
                None => true,
                Some((bt, bl)) => tau < bt || (tau == bt && l < bl),
            };
            if better {
                best = Some((tau, l));
            }
        }
        best
    }

    /// Flows along `φ` for signed time `t`, recording crossings and, when `sample_dt` is
    /// given, samples at that spacing (plus both endpoints).
    pub fn flow_phi_sampled(
        &self,
        pt: &BundlePoint,
        t: f64,
        sample_dt: Option<f64>,
    ) -> Result<(BundlePoint, OrbitSegment)> {
        if !(t.abs() <= MAX_FLOW_TIME) {
            return Err(LabError::Guard {
                what: "|t|",
                value: t.abs(),
                limit: MAX_FLOW_TIME,
            });
        }
        let sign = if t < 0.0 { -1.0 } else { 1.0 };
        let total = t.abs();
        let mut cur = pt.clone();
        let mut seg = OrbitSegment::default();
        seg.samples.push(OrbitSample {
            t: 0.0,
            point: cur.clone(),
        });
        let mut elapsed = 0.0;
        let mut next_sample = sample_dt.map(|dt| dt.abs());
        let max_crossings = 10_000 + (200.0 * total) as usize;
        loop {
            let target = cur.target();
            let frame = Frame::new(cur.z, target);
            let remaining = total - elapsed;
            let exit = self.exit(cur.z, target, sign);
            let leg = match exit {
                Some((tau, _)) if tau < remaining => tau,
                _ => remaining,
            };
            if let (Some(dt), Some(ns)) = (sample_dt, next_sample.as_mut()) {
                while *ns < elapsed + leg && *ns < total {
                    let z = frame.along(sign * (*ns - elapsed));
                    let mut s = cur.clone();
                    s.set_local(z);
                    seg.samples.push(OrbitSample {
                        t: sign * *ns,
                        point: s,
                    });
                    *ns += dt.abs();
                }
            }
            match exit {
                Some((tau, l)) if tau < remaining => {
                    cur.set_local(frame.along(sign * tau));
                    elapsed += tau;
                    seg.log_holonomy += cur.cross(self.action, l);
                    seg.crossings.push(Crossing {
                        t: sign * elapsed,
                        letter: l,
                    });
                    if seg.crossings.len() > max_crossings {
                        return Err(LabError::DomainEscape {
                            steps: seg.crossings.len(),
                            distance: elapsed,
                        });
                    }
                }
                _ => {
                    cur.set_local(frame.along(sign * remaining));
                    break;
                }
            }
        }
        if total > 0.0 {
            seg.samples.push(OrbitSample {
                t,
                point: cur.clone(),
            });
        }
        Ok((cur, seg))
    }

    /// `φ^t(pt)` with the orbit segment sampled at the crossings.
    pub fn flow_phi(&self, pt: &BundlePoint, t: f64) -> Result<(BundlePoint, OrbitSegment)> {
        self.flow_phi_sampled(pt, t, None)
    }

    /// Transverse holonomy derivative along `φ^s(pt)`, `s ∈ [0, t]`.
    pub fn holonomy_derivative(&self, pt: &BundlePoint, t: f64) -> Result<HolonomyRecord> {
        let (_, seg) = self.flow_phi(pt, t)?;
        Ok(self.record(t, seg.log_holonomy))
    }

    pub(crate) fn record(&self, t: f64, log_derivative: f64) -> HolonomyRecord {
        let bound = self.delta * t + 2.0 * self.delta * self.diameter;
        HolonomyRecord {
            t,
            derivative: log_derivative.exp(),
            log_derivative,
            bound_check: log_derivative - bound,
        }
    }

    /// The closed-form derivative `e^{-δ b_{f(p)}(β·o, α·o)}` for start word `α` and end word `β`.
    pub fn holonomy_closed_form(&self, p: CirclePoint, alpha: &Word, beta: &Word) -> f64 {
        let g = self.action.group();
        let o = HyperbolicPoint::ORIGIN;
        // Evaluate in α's frame to keep both points near the origin.
        let rel = alpha.inverse().concat(beta);
        let xi = equivariant_map(self.action.point(self.action.lift(&alpha.inverse(), p.s())));
        (-self.delta * busemann(xi, g.evaluate(&rel).apply(o), o)).exp()
    }
}
