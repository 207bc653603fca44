//! Finite-difference derivatives of `ψ^t` and the cone field `C_β(U, E^h)`.
//!
//! Tangent vectors are measured in the metric `g` that is hyperbolic on the leaves and
//! `P(z, f(s))|ds|` on the fibers. Under `φ` this fiber norm grows by exactly `e^t`.

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::geometry::{poisson_kernel, BoundaryPoint, HyperbolicPoint};

use super::psi::PsiFlow;
use super::BundlePoint;

/// Central-difference step in the local coordinates.
pub const FD_STEP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeField {
    /// Cone angle parameter: `‖w‖ < β‖u‖` for `u ∈ U`, `w ∈ E^h`.
    pub beta: f64,
}

impl ConeField {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(LabError::Guard {
                what: "cone beta",
                value: beta,
                limit: 0.0,
            });
        }
        Ok(Self { beta })
    }
}

/// `Dψ^t` at a point in `g`-orthonormal coordinates (two leaf directions, then the fiber).
#[derive(Clone, Copy, Debug)]
pub struct JacobianSample {
    pub t: f64,
    /// Leaf block `∂z_t/∂z`.
    pub a: [[f64; 2]; 2],
    /// `∂z_t/∂s`, the leaf component of the image of the fiber vector.
    pub w: [f64; 2],
    /// `∂s_t/∂s`, fiber expansion.
    pub u: f64,
    /// `∂s_t/∂z`; zero because leaves are invariant.
    pub leak: [f64; 2],
}

impl JacobianSample {
    /// Largest singular value of the leaf block.
    pub fn a_norm(&self) -> f64 {
        let [[p, q], [r, s]] = self.a;
        let t = p * p + q * q + r * r + s * s;
        let det = p * s - q * r;
        (0.5 * (t + (t * t - 4.0 * det * det).max(0.0).sqrt())).sqrt()
    }

    pub fn w_norm(&self) -> f64 {
        self.w[0].hypot(self.w[1])
    }

    /// `(‖w_t‖ + β‖A‖)/(β|u_t|)`: the image of the cone lies inside the cone iff this is `< 1`.
    pub fn containment_ratio(&self, cone: &ConeField) -> f64 {
        (self.w_norm() + cone.beta * self.a_norm()) / (cone.beta * self.u.abs())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConeCheck {
    pub contained: bool,
    pub ratio: f64,
    pub expansion: f64,
}

fn fiber_scale(z: Complex64, s_loc: f64) -> f64 {
    poisson_kernel(
        HyperbolicPoint::from_complex(z),
        BoundaryPoint::new(std::f64::consts::TAU * s_loc),
    )
}

/// `Dψ^t(pt)` by central differences, expressed in the domain word of the center trajectory.
pub fn jacobian(
    flow: &PsiFlow<'_>,
    action: &crate::action::CircleAction,
    pt: &BundlePoint,
    t: f64,
) -> Result<JacobianSample> {
    let k = action.k() as f64;
    let center = flow.flow(pt, t)?;
    let word = center.word().clone();
    let z0 = pt.z();
    let s0 = pt.s_loc();
    let run = |dz: Complex64, ds: f64| -> Result<(Complex64, f64)> {
        let start = BundlePoint::from_local(
            action,
            HyperbolicPoint::from_complex(z0 + dz),
            pt.word().clone(),
            s0 + ds,
        );
        let end = flow.flow(&start, t)?.rebased(action, &word);
        Ok((end.z(), end.s_loc()))
    };
    let wrap = |d: f64| d - k * (d / k).round();
    let h = FD_STEP;
    let mut cols = [(Complex64::new(0.0, 0.0), 0.0); 3];
    let dirs = [
        (Complex64::new(h, 0.0), 0.0),
        (Complex64::new(0.0, h), 0.0),
        (Complex64::new(0.0, 0.0), h),
    ];
    for (c, &(dz, ds)) in cols.iter_mut().zip(&dirs) {
        let (zp, sp) = run(dz, ds)?;
        let (zm, sm) = run(-dz, -ds)?;
        *c = ((zp - zm) / (2.0 * h), wrap(sp - sm) / (2.0 * h));
    }
    for (dz, ds) in &cols {
        if !(dz.re.is_finite() && dz.im.is_finite() && ds.is_finite()) {
            return Err(LabError::JacobianConditioning {
                detail: format!("non-finite derivative at t = {t}"),
            });
        }
    }
    let lam0 = 2.0 / (1.0 - z0.norm_sqr());
    let lam1 = 2.0 / (1.0 - center.z().norm_sqr());
    let sig0 = fiber_scale(z0, s0);
    let sig1 = fiber_scale(center.z(), center.s_loc());
    let leaf = |c: Complex64, from: f64| [c.re * lam1 / from, c.im * lam1 / from];
    let (c0, c1, c2) = (
        leaf(cols[0].0, lam0),
        leaf(cols[1].0, lam0),
        leaf(cols[2].0, sig0),
    );
    Ok(JacobianSample {
        t,
        a: [[c0[0], c1[0]], [c0[1], c1[1]]],
        w: c2,
        u: cols[2].1 * sig1 / sig0,
        leak: [cols[0].1 * sig1 / lam0, cols[1].1 * sig1 / lam0],
    })
}

/// Tests `Dψ^T(C_β) ⊂ C_β` at `pt` and reports the fiber expansion.
pub fn cone_check(
    flow: &PsiFlow<'_>,
    action: &crate::action::CircleAction,
    cone: &ConeField,
    pt: &BundlePoint,
    t: f64,
) -> Result<ConeCheck> {
    if !(t > 0.0) {
        return Err(LabError::Guard {
            what: "cone time",
            value: t,
            limit: 0.0,
        });
    }
    let j = jacobian(flow, action, pt, t)?;
    let ratio = j.containment_ratio(cone);
    Ok(ConeCheck {
        contained: ratio < 1.0,
        ratio,
        expansion: j.u,
    })
}

/// The constants of the cone argument measured from Jacobian samples.
#[derive(Clone, Copy, Debug)]
pub struct ConeConstants {
    /// Fiber growth `u_t ≥ c₁e^{c₂t}`.
    pub c1: f64,
    pub c2: f64,
    /// Sup of the leaf block norm.
    pub c3: f64,
    /// Sup of `‖w_t‖/u_t` on `[T, 2T]`.
    pub c4: f64,
    /// First time with `c₁e^{c₂T} > 2c₃`.
    pub t0: f64,
    pub beta: f64,
    pub samples: usize,
}

/// Safety factor between the measured `2c₄` and the cone angle.
pub const BETA_FACTOR: f64 = 1.25;

/// Confidence factor applied to the sampled minimum of `u_t e^{-c₂t}`.
pub const GROWTH_MARGIN: f64 = 0.9;

/// Fits `c₂` to `ln u_t` by least squares; `c₁` is the smallest `u_t e^{-c₂t}` and `c₃` the
/// largest leaf block norm.
pub fn fit_growth(samples: &[JacobianSample]) -> Result<(f64, f64, f64)> {
    if samples.len() < 2 {
        return Err(LabError::Budget(
            "at least two Jacobian samples are needed".into(),
        ));
    }
    let n = samples.len() as f64;
    let mt = samples.iter().map(|s| s.t).sum::<f64>() / n;
    let ml = samples.iter().map(|s| s.u.ln()).sum::<f64>() / n;
    let sxy: f64 = samples.iter().map(|s| (s.t - mt) * (s.u.ln() - ml)).sum();
    let sxx: f64 = samples.iter().map(|s| (s.t - mt).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(LabError::Budget(
            "Jacobian samples need distinct times".into(),
        ));
    }
    let c2 = sxy / sxx;
    let c1 = samples
        .iter()
        .map(|s| s.u * (-c2 * s.t).exp())
        .fold(f64::INFINITY, f64::min);
    let c3 = samples
        .iter()
        .map(JacobianSample::a_norm)
        .fold(0.0, f64::max);
    Ok((c1, c2, c3))
}

/// All constants; `c₁` carries [`GROWTH_MARGIN`] and `c₄` comes from `window` samples with
/// `t ∈ [T, 2T]`.
pub fn cone_constants(
    growth: &[JacobianSample],
    window: &[JacobianSample],
) -> Result<ConeConstants> {
    let (c1, c2, c3) = fit_growth(growth)?;
    if !(c2 > 0.0) {
        return Err(LabError::JacobianConditioning {
            detail: format!("no fiber growth, fitted exponent {c2}"),
        });
    }
    let c1 = GROWTH_MARGIN * c1;
    let t0 = ((2.0 * c3 / c1).ln() / c2).max(0.0);
    let c4 = window.iter().map(|s| s.w_norm() / s.u).fold(0.0, f64::max);
    Ok(ConeConstants {
        c1,
        c2,
        c3,
        c4,
        t0,
        beta: BETA_FACTOR * 2.0 * c4,
        samples: growth.len() + window.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::CircleAction;
    use crate::flow::periodic::periodic_orbit;
    use crate::flow::psi::{PsiField, PsiParams, DEFAULT_STEP};
    use crate::flow::FlowEngine;
    use crate::group::{SurfaceGroup, Word};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn phi_expands_fibers_by_period_on_periodic_orbits() {
        let a = CircleAction::new(SurfaceGroup::standard_genus2(), 1).unwrap();
        let field = PsiField::unperturbed();
        let psi = PsiFlow::new(&a, &field, 1e-3).unwrap();
        let e = FlowEngine::new(&a);
        let w: Word = "a".parse().unwrap();
        let fp = a.fixed_points(&w).unwrap()[0];
        let orbit = periodic_orbit(&e, &w, fp.point, None).unwrap();
        let j = jacobian(&psi, &a, &orbit.start, orbit.period).unwrap();
        assert!(
            (j.u.ln() - orbit.period).abs() < 1e-5,
            "{} vs {}",
            j.u.ln(),
            orbit.period
        );
        assert!((j.u * orbit.backward_log_holonomy.exp() - 1.0).abs() < 1e-5);
        assert!(j.leak[0].abs() < 1e-6 && j.leak[1].abs() < 1e-6);
    }

    #[test]
    fn perturbed_cone_is_invariant() {
        let a = CircleAction::new(SurfaceGroup::standard_genus2(), 1).unwrap();
        let field = PsiField::mollified(a.group(), PsiParams::default()).unwrap();
        let psi = PsiFlow::new(&a, &field, DEFAULT_STEP).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut point = || {
            let x = HyperbolicPoint::polar(
                rng.gen_range(0.0..1.5),
                rng.gen_range(0.0..std::f64::consts::TAU),
            );
            BundlePoint::from_global(&a, x, a.point(rng.gen::<f64>())).unwrap()
        };
        let growth: Vec<_> = (0..12)
            .map(|i| jacobian(&psi, &a, &point(), 0.25 + 0.25 * (i % 6) as f64).unwrap())
            .collect();
        let (c1, c2, c3) = fit_growth(&growth).unwrap();
        assert!(
            (c2 - 1.0).abs() < 0.05 && (c3 - 1.0).abs() < 0.05 && c1 > 0.9,
            "{c1} {c2} {c3}"
        );
        let t0 = ((2.0 * c3 / c1).ln() / c2).max(0.0);
        let window: Vec<_> = (0..12)
            .map(|i| jacobian(&psi, &a, &point(), t0 * (1.0 + i as f64 / 11.0)).unwrap())
            .collect();
        let k = cone_constants(&growth, &window).unwrap();
        let cone = ConeField::new(k.beta).unwrap();
        for i in 0..10 {
            let t = k.t0 * (1.0 + i as f64 / 9.0);
            let c = cone_check(&psi, &a, &cone, &point(), t).unwrap();
            assert!(c.contained, "{c:?}");
        }
    }
}
