//! The perturbed leafwise field `X_k` and its flow `ψ^t`.
//!
//! Charts are centered at the `Γ`-orbits of the domain center, its vertices and its side
//! midpoints. In the chart at `q` the leafwise field is written in coordinates `(w, y)` with
//! `w = M_q(x)` for an isometry `M_q: q ↦ 0` and `y` the visual-measure coordinate of `f(s)` seen
//! from `q`. There the unit field toward the boundary point `e^{2πiy}` is rotation equivariant,
//! so the correction `b_k - a` is stored once on a polar grid `(r, y - arg w/2π)` and reused in
//! every chart. The charts are glued with a partition of unity built from a bump in `d(x, q)`.

use num_complex::Complex64;

use crate::action::CircleAction;
use crate::error::{LabError, Result};
use crate::geometry::unit_field;
use crate::group::{SurfaceGroup, Word};

use super::mollifier::{check_resolution, convolve, kernel_weights};
use super::{BundlePoint, OrbitSample, MAX_FLOW_TIME};

/// Default integrator step.
pub const DEFAULT_STEP: f64 = 1e-2;

/// Largest accepted Richardson local error estimate.
pub const LOCAL_ERROR_LIMIT: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsiParams {
    pub scale: u32,
    pub nr: usize,
    pub ny: usize,
    /// Hyperbolic radius of the chart support.
    pub r_out: f64,
}

impl Default for PsiParams {
    fn default() -> Self {
        Self {
            scale: 128,
            nr: 128,
            ny: 2048,
            r_out: 1.6,
        }
    }
}

/// `C(r, u) = (b_k - a)(r, u)` on a uniform polar grid, periodic in `u`.
#[derive(Clone, Debug)]
struct CorrectionGrid {
    nr: usize,
    ny: usize,
    r_max: f64,
    values: Vec<Complex64>,
}

fn catmull_rom(p: [Complex64; 4], t: f64) -> Complex64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (p[1] * 2.0
        + (p[2] - p[0]) * t
        + (p[0] * 2.0 - p[1] * 5.0 + p[2] * 4.0 - p[3]) * t2
        + (p[1] * 3.0 - p[0] - p[2] * 3.0 + p[3]) * t3)
        * 0.5
}

impl CorrectionGrid {
    fn build(params: &PsiParams) -> Result<Self> {
        let h = 1.0 / params.ny as f64;
        check_resolution(params.scale, h)?;
        let (w, _) = kernel_weights(params.scale, h);
        let r_max = (0.5 * params.r_out).tanh();
        let mut values = Vec::with_capacity(params.nr * params.ny);
        for i in 0..params.nr {
            let r = Complex64::new(r_max * i as f64 / (params.nr - 1) as f64, 0.0);
            let a: Vec<Complex64> = (0..params.ny)
                .map(|j| {
                    unit_field(
                        r,
                        Complex64::from_polar(1.0, std::f64::consts::TAU * j as f64 * h),
                    )
                })
                .collect();
            let re = convolve(&a.iter().map(|v| v.re).collect::<Vec<_>>(), &w);
            let im = convolve(&a.iter().map(|v| v.im).collect::<Vec<_>>(), &w);
            values.extend((0..params.ny).map(|j| Complex64::new(re[j], im[j]) - a[j]));
        }
        Ok(Self {
            nr: params.nr,
            ny: params.ny,
            r_max,
            values,
        })
    }

    fn at(&self, i: isize, j: isize) -> Complex64 {
        let i = i.clamp(0, self.nr as isize - 1) as usize;
        let j = j.rem_euclid(self.ny as isize) as usize;
        self.values[i * self.ny + j]
    }

    fn eval(&self, r: f64, u: f64) -> Complex64 {
        let x = r / self.r_max * (self.nr - 1) as f64;
        let y = u.rem_euclid(1.0) * self.ny as f64;
        let (i0, j0) = (x.floor() as isize, y.floor() as isize);
        let (tx, ty) = (x - i0 as f64, y - j0 as f64);
        let rows: [Complex64; 4] = std::array::from_fn(|di| {
            let i = i0 + di as isize - 1;
            catmull_rom(
                std::array::from_fn(|dj| self.at(i, j0 + dj as isize - 1)),
                ty,
            )
        });
        catmull_rom(rows, tx)
    }

    fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// The leafwise field `X` or its perturbation `X_k`, in fundamental-domain coordinates.
#[derive(Clone, Debug)]
pub struct PsiField {
    centers: Vec<Complex64>,
    r_out: f64,
    cosh_out: f64,
    correction: Option<CorrectionGrid>,
    scale: u32,
}

/// Chart centers: translates of the center, vertices and side midpoints within `radius` of `o`.
fn chart_centers(group: &SurfaceGroup, radius: f64) -> Vec<Complex64> {
    let dom = group.domain();
    let mut base = vec![Complex64::new(0.0, 0.0)];
    base.extend(dom.vertices.iter().map(|v| v.to_complex()));
    let mid_r = (0.5 * dom.inradius).tanh();
    base.extend(
        (0..crate::group::SIDES).map(|j| {
            Complex64::from_polar(mid_r, crate::group::FundamentalDomain::side_direction(j))
        }),
    );
    let reach = radius + dom.circumradius + 1e-6;
    // Breadth-first search over translates γD with d(o, γo) ≤ reach.
    let mut seen = vec![Complex64::new(0.0, 0.0)];
    let mut frontier = vec![Word::empty()];
    let mut out: Vec<Complex64> = Vec::new();
    let cosh = |z: Complex64| 1.0 + 2.0 * z.norm_sqr() / (1.0 - z.norm_sqr());
    while let Some(w) = frontier.pop() {
        let g = group.evaluate(&w);
        for &c in &base {
            let q = g.apply_complex(c);
            if cosh(q) <= radius.cosh() && !out.iter().any(|p| (p - q).norm() < 1e-9) {
                out.push(q);
            }
        }
        for l in crate::group::Letter::ALL {
            let mut next = w.clone();
            next.push(l);
            let y = group
                .evaluate(&next)
                .apply_complex(Complex64::new(0.0, 0.0));
            if cosh(y) <= reach.cosh() && !seen.iter().any(|p| (p - y).norm() < 1e-9) {
                seen.push(y);
                frontier.push(next);
            }
        }
    }
    out.sort_by(|a, b| {
        a.norm_sqr()
            .total_cmp(&b.norm_sqr())
            .then(a.arg().total_cmp(&b.arg()))
    });
    out
}

impl PsiField {
    /// The unperturbed field `X`: `ψ = φ`.
    pub fn unperturbed() -> Self {
        Self {
            centers: Vec::new(),
            r_out: 0.0,
            cosh_out: 1.0,
            correction: None,
            scale: 0,
        }
    }

    pub fn mollified(group: &SurfaceGroup, params: PsiParams) -> Result<Self> {
        if params.nr < 4 {
            return Err(LabError::Guard {
                what: "psi nr",
                value: params.nr as f64,
                limit: 4.0,
            });
        }
        let correction = CorrectionGrid::build(&params)?;
        let radius = group.domain().circumradius + params.r_out;
        let centers = chart_centers(group, radius);
        let field = Self {
            centers,
            r_out: params.r_out,
            cosh_out: params.r_out.cosh(),
            correction: Some(correction),
            scale: params.scale,
        };
        let cover = field.covering_radius(group);
        if cover >= 0.95 * params.r_out {
            return Err(LabError::Guard {
                what: "chart covering radius",
                value: cover,
                limit: 0.95 * params.r_out,
            });
        }
        Ok(field)
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn is_perturbed(&self) -> bool {
        self.correction.is_some()
    }

    pub fn center_count(&self) -> usize {
        self.centers.len()
    }

    /// Sup of `|b_k - a|` over the stored grid, in the chart's Euclidean coordinates at `w = 0`
    /// scale (twice the hyperbolic norm at the chart center).
    pub fn correction_sup(&self) -> f64 {
        self.correction
            .as_ref()
            .map_or(0.0, CorrectionGrid::sup_norm)
    }

    /// Largest distance from a sampled point of the domain to its nearest chart center.
    pub fn covering_radius(&self, group: &SurfaceGroup) -> f64 {
        let mut pts = group.domain().boundary_samples(32);
        for i in 1..16 {
            for j in 0..32 {
                let r = group.domain().circumradius * i as f64 / 16.0;
                pts.push(crate::geometry::HyperbolicPoint::polar(
                    r,
                    std::f64::consts::TAU * j as f64 / 32.0,
                ));
            }
        }
        pts.iter()
            .map(|x| {
                let z = x.to_complex();
                self.centers
                    .iter()
                    .map(|&q| cosh_distance(z, q))
                    .fold(f64::INFINITY, f64::min)
                    .acosh()
            })
            .fold(0.0, f64::max)
    }

    /// Velocity at `z` of the leaf whose forward endpoint is `target`.
    pub(crate) fn velocity(&self, z: Complex64, target: Complex64) -> Complex64 {
        unit_field(z, target) + self.correction_at(z, target)
    }

    pub(crate) fn correction_at(&self, z: Complex64, target: Complex64) -> Complex64 {
        let Some(grid) = &self.correction else {
            return Complex64::new(0.0, 0.0);
        };
        let one = Complex64::new(1.0, 0.0);
        let mut total = 0.0;
        let mut acc = Complex64::new(0.0, 0.0);
        for &q in &self.centers {
            let ch = cosh_distance(z, q);
            if ch >= self.cosh_out {
                continue;
            }
            let d = ch.acosh() / self.r_out;
            let weight = (-1.0 / (1.0 - d * d)).exp();
            let w = (z - q) / (one - q.conj() * z);
            let xi = (target - q) / (one - q.conj() * target);
            let phi = if w.norm_sqr() > 0.0 { w.arg() } else { 0.0 };
            let u = (xi.arg() - phi) / std::f64::consts::TAU;
            let local = Complex64::from_polar(1.0, phi) * grid.eval(w.norm(), u);
            // Push back by M_q⁻¹: derivative (1 - |q|²)/(1 + q̄w)².
            let jac = (1.0 - q.norm_sqr()) / (one + q.conj() * w).powi(2);
            acc += jac * local * weight;
            total += weight;
        }
        if total > 0.0 {
            acc / total
        } else {
            acc
        }
    }
}

fn cosh_distance(z: Complex64, q: Complex64) -> f64 {
    1.0 + 2.0 * (z - q).norm_sqr() / ((1.0 - z.norm_sqr()) * (1.0 - q.norm_sqr()))
}

/// Leafwise C¹ distance between `X_k` and `X`, in the hyperbolic norm.
#[derive(Clone, Copy, Debug)]
pub struct C1Distance {
    pub c0: f64,
    pub c1: f64,
}

impl C1Distance {
    pub fn total(&self) -> f64 {
        self.c0 + self.c1
    }
}

/// The flow of a [`PsiField`] by fixed-step RK4 in fundamental-domain coordinates.
#[derive(Clone, Debug)]
pub struct PsiFlow<'a> {
    action: &'a CircleAction,
    field: &'a PsiField,
    step: f64,
    /// Steps between Richardson checks.
    check_every: usize,
}

/// End state of a ψ integration, with boundary points carried along in local coordinates.
#[derive(Clone, Debug)]
pub struct PsiTrace {
    pub end: BundlePoint,
    pub samples: Vec<OrbitSample>,
    pub companions: Vec<Complex64>,
    pub max_error_estimate: f64,
}

impl<'a> PsiFlow<'a> {
    pub fn new(action: &'a CircleAction, field: &'a PsiField, step: f64) -> Result<Self> {
        if !(step > 0.0 && step <= 0.1) {
            return Err(LabError::Guard {
                what: "psi step",
                value: step,
                limit: 0.1,
            });
        }
        Ok(Self {
            action,
            field,
            step,
            check_every: 32,
        })
    }

    pub fn field(&self) -> &PsiField {
        self.field
    }

    fn rk4(&self, z: Complex64, target: Complex64, h: f64) -> Complex64 {
        let f = |z| self.field.velocity(z, target);
        let k1 = f(z);
        let k2 = f(z + k1 * (0.5 * h));
        let k3 = f(z + k2 * (0.5 * h));
        let k4 = f(z + k3 * h);
        z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
    }

    /// `ψ^t(pt)`.
    pub fn flow(&self, pt: &BundlePoint, t: f64) -> Result<BundlePoint> {
        Ok(self.trace(pt, t, None, &[])?.end)
    }

    /// `ψ^t(pt)` with optional samples; `companions` are boundary points (in `pt`'s local
    /// frame) re-expressed at every domain change.
    pub fn trace(
        &self,
        pt: &BundlePoint,
        t: f64,
        sample_dt: Option<f64>,
        companions: &[Complex64],
    ) -> Result<PsiTrace> {
        if !(t.abs() <= MAX_FLOW_TIME) {
            return Err(LabError::Guard {
                what: "|t|",
                value: t.abs(),
                limit: MAX_FLOW_TIME,
            });
        }
        let group = self.action.group();
        let sign = if t < 0.0 { -1.0 } else { 1.0 };
        let n = (t.abs() / self.step).ceil() as usize;
        let h = if n == 0 { 0.0 } else { t / n as f64 };
        let mut cur = pt.clone();
        let mut comp = companions.to_vec();
        let mut samples = vec![OrbitSample {
            t: 0.0,
            point: cur.clone(),
        }];
        let mut next_sample = sample_dt.map(|d| d.abs());
        let mut max_err: f64 = 0.0;
        for i in 0..n {
            let target = cur.target();
            let z = cur.z();
            let z1 = self.rk4(z, target, h);
            if i % self.check_every == 0 {
                let half = self.rk4(self.rk4(z, target, 0.5 * h), target, 0.5 * h);
                let scale = 2.0 / (1.0 - z.norm_sqr());
                let est = (z1 - half).norm() * scale / 15.0;
                max_err = max_err.max(est);
                if est > LOCAL_ERROR_LIMIT {
                    return Err(LabError::StepSizeFailure {
                        estimate: est,
                        limit: LOCAL_ERROR_LIMIT,
                        t: i as f64 * h,
                    });
                }
            }
            cur.set_local(z1);
            let mut guard = 0;
            while let Some(l) = group.worst_side(cur.z(), 1e-13) {
                cur.cross(self.action, l);
                let m = group.generator(l.inverse());
                for c in comp.iter_mut() {
                    *c = m.apply_complex(*c);
                    *c /= c.norm();
                }
                guard += 1;
                if guard > 16 {
                    return Err(LabError::DomainEscape {
                        steps: guard,
                        distance: i as f64 * h,
                    });
                }
            }
            let elapsed = (i + 1) as f64 * h.abs();
            if let (Some(dt), Some(ns)) = (sample_dt, next_sample.as_mut()) {
                if elapsed + 1e-12 >= *ns && i + 1 < n {
                    samples.push(OrbitSample {
                        t: sign * elapsed,
                        point: cur.clone(),
                    });
                    *ns += dt.abs();
                }
            }
        }
        if n > 0 {
            samples.push(OrbitSample {
                t,
                point: cur.clone(),
            });
        }
        Ok(PsiTrace {
            end: cur,
            samples,
            companions: comp,
            max_error_estimate: max_err,
        })
    }
}

/// `ψ^t(pt)` with the default step.
pub fn flow_psi(
    action: &CircleAction,
    field: &PsiField,
    pt: &BundlePoint,
    t: f64,
) -> Result<BundlePoint> {
    PsiFlow::new(action, field, DEFAULT_STEP)?.flow(pt, t)
}

/// Samples the C¹ distance between the perturbed and the unperturbed field on `D × S¹`.
pub fn c1_distance(
    field: &PsiField,
    group: &SurfaceGroup,
    samples: usize,
    rng: &mut impl rand::Rng,
) -> C1Distance {
    let mut c0: f64 = 0.0;
    let mut c1: f64 = 0.0;
    let h = 1e-5;
    let r_max = group.domain().circumradius;
    for _ in 0..samples {
        let z = crate::geometry::HyperbolicPoint::polar(
            rng.gen_range(0.0..r_max),
            rng.gen_range(0.0..std::f64::consts::TAU),
        )
        .to_complex();
        let target = Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU));
        let lambda = 2.0 / (1.0 - z.norm_sqr());
        c0 = c0.max(field.correction_at(z, target).norm() * lambda);
        for dir in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
            let e = dir * (h / lambda);
            let d = (field.correction_at(z + e, target) - field.correction_at(z - e, target))
                / (2.0 * h);
            c1 = c1.max(d.norm() * lambda);
        }
    }
    C1Distance { c0, c1 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::equivariant_map;
    use crate::flow::FlowEngine;
    use crate::geometry::{hyperbolic_distance, HyperbolicPoint};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (CircleAction, PsiField) {
        let a = CircleAction::new(SurfaceGroup::standard_genus2(), 1).unwrap();
        let f = PsiField::mollified(a.group(), PsiParams::default()).unwrap();
        (a, f)
    }

    #[test]
    fn unperturbed_matches_phi() {
        let a = CircleAction::new(SurfaceGroup::standard_genus2(), 2).unwrap();
        let field = PsiField::unperturbed();
        let e = FlowEngine::new(&a);
        let psi = PsiFlow::new(&a, &field, DEFAULT_STEP).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let x = HyperbolicPoint::polar(rng.gen_range(0.0..1.0), rng.gen_range(0.0..6.0));
            let pt = BundlePoint::from_global(&a, x, a.point(rng.gen_range(0.0..2.0))).unwrap();
            let q1 = psi.flow(&pt, 5.0).unwrap();
            let (q2, _) = e.flow_phi(&pt, 5.0).unwrap();
            let moved = q1.rebased(&a, q2.word());
            assert!(hyperbolic_distance(moved.local(), q2.local()) < 1e-8);
        }
    }

    #[test]
    fn charts_cover_the_domain() {
        let (a, f) = setup();
        assert!(f.covering_radius(a.group()) < 1.3);
        assert!(f.center_count() > 20);
    }

    #[test]
    fn correction_is_small_and_equivariant() {
        let (a, f) = setup();
        assert!(f.correction_sup() < 5e-3, "{}", f.correction_sup());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = c1_distance(&f, a.group(), 200, &mut rng);
        assert!(d.total() < 0.1, "{d:?}");
        assert!(d.c0 > 0.0);
        // Γ-invariance: the correction at a side pairing agrees on both sides.
        let g = a.group();
        for j in 0..8 {
            let l = g.side_letter(j);
            let z = Complex64::from_polar(
                (0.5 * g.domain().inradius).tanh() * 0.999,
                crate::group::FundamentalDomain::side_direction(j),
            );
            let xi = Complex64::from_polar(1.0, 0.3);
            let m = g.generator(l.inverse());
            let (zz, xx) = (m.apply_complex(z), m.apply_complex(xi));
            let pushed = m.derivative_at(z) * f.velocity(z, xi);
            assert!((pushed - f.velocity(zz, xx)).norm() < 1e-10);
        }
    }

    #[test]
    fn orbits_fellow_travel_and_contract() {
        let (a, f) = setup();
        let psi = PsiFlow::new(&a, &f, DEFAULT_STEP).unwrap();
        let p = a.point(0.37);
        let x1 = HyperbolicPoint::polar(0.3, 1.0);
        let x2 = HyperbolicPoint::polar(0.4, 2.0);
        let b1 = BundlePoint::from_global(&a, x1, p).unwrap();
        let b2 = BundlePoint::from_global(&a, x2, p).unwrap();
        let xi = equivariant_map(p);
        let geo = crate::geometry::Geodesic::through(x1, xi);
        let tr = psi
            .trace(&b1, 10.0, Some(0.5), &[geo.neg.to_complex()])
            .unwrap();
        let neg = tr.companions[0];
        let local_geo = crate::geometry::Geodesic::new(
            crate::geometry::BoundaryPoint::new(neg.arg()),
            crate::geometry::BoundaryPoint::new(tr.end.target().arg()),
        )
        .unwrap();
        assert!(local_geo.distance_to(tr.end.local()) < 0.05);
        let d0 = {
            let q = psi.flow(&b2, 0.0).unwrap().rebased(&a, b1.word());
            hyperbolic_distance(b1.local(), q.local())
        };
        let e1 = psi.flow(&b1, 10.0).unwrap();
        let e2 = psi.flow(&b2, 10.0).unwrap().rebased(&a, e1.word());
        let d10 = hyperbolic_distance(e1.local(), e2.local());
        // Same forward endpoint: the distance settles to the Busemann gap, not beyond d0.
        assert!(d10 <= d0 + 1e-3);
    }
}
