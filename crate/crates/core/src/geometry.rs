//! Exact-formula hyperbolic plane geometry.
//!
//! Points live in the Poincaré disk. Isometries are stored as `SL(2, R)` matrices acting on
//! the upper half-plane and are applied to the disk through the fixed Cayley conjugation
//! `w ↦ (w - i)/(w + i)`, which turns `(a, b; c, d)` into the `SU(1, 1)` pair `(α, β)` with
//! `z ↦ (αz + β)/(β̄z + ᾱ)`. The `SU(1, 1)` form is used for every evaluation because it is
//! finite on the whole closed disk, so there are no chart seams at infinity.
//!
//! Busemann functions are evaluated in closed form through the Poisson kernel
//! `P(z, ξ) = (1 - |z|²)/|ξ - z|²`:
//!
//! ```text
//! b_ξ(x, y) = ln P(y, ξ) - ln P(x, ξ)      (positive when y is closer to ξ)
//! ```

use std::f64::consts::TAU;
use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;

use crate::error::{LabError, Result};

/// Dimension of the boundary sphere for surfaces; the exponent in `dμ_x/dμ_y = e^{-δ b}`.
pub const SURFACE_DELTA: f64 = 1.0;

/// Tolerance used to decide whether a matrix is the identity or a trace is exactly 2.
const CLASSIFY_TOL: f64 = 1e-9;

/// A point of the open unit disk.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperbolicPoint {
    pub u: f64,
    pub v: f64,
}

impl HyperbolicPoint {
    pub const ORIGIN: HyperbolicPoint = HyperbolicPoint { u: 0.0, v: 0.0 };

    pub fn new(u: f64, v: f64) -> Result<Self> {
        if !(u.is_finite() && v.is_finite()) || u * u + v * v >= 1.0 {
            return Err(LabError::OutsideDisk { u, v });
        }
        Ok(Self { u, v })
    }

    /// Point at hyperbolic distance `r` from the origin in direction `angle`.
    pub fn polar(r: f64, angle: f64) -> Self {
        Self::from_complex(Complex64::from_polar((0.5 * r).tanh(), angle))
    }

    pub(crate) fn from_complex(z: Complex64) -> Self {
        Self { u: z.re, v: z.im }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.u, self.v)
    }

    pub fn norm_sqr(self) -> f64 {
        self.u * self.u + self.v * self.v
    }

    /// Hyperbolic length of the Euclidean vector `w` based at this point.
    pub fn hyperbolic_norm(self, w: Complex64) -> f64 {
        2.0 * w.norm() / (1.0 - self.norm_sqr())
    }
}

/// A point of the circle at infinity, stored as an angle in `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPoint {
    theta: f64,
}

impl BoundaryPoint {
    pub fn new(theta: f64) -> Self {
        let mut t = theta.rem_euclid(TAU);
        if t >= TAU {
            t = 0.0;
        }
        Self { theta: t }
    }

    pub fn theta(self) -> f64 {
        self.theta
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(1.0, self.theta)
    }

    pub(crate) fn from_complex(z: Complex64) -> Self {
        Self::new(z.arg())
    }

    /// Angular distance on the circle, in `[0, π]`.
    pub fn angular_distance(self, other: BoundaryPoint) -> f64 {
        let d = (self.theta - other.theta).rem_euclid(TAU);
        d.min(TAU - d)
    }
}

/// Orientation-preserving isometry as a normalized `PSL(2, R)` matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Isometry {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl Default for Isometry {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Isometry {
    pub const IDENTITY: Isometry = Isometry {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    /// Builds an isometry from a unimodular matrix; `det` must be 1 within `1e-12`.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if !((det - 1.0).abs() <= 1e-12) {
            return Err(LabError::NotUnimodular { det });
        }
        Ok(Self { a, b, c, d }.normalized())
    }

    pub fn entries(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Renormalizes the determinant and picks the sign making the first nonzero entry positive.
    fn normalized(self) -> Self {
        let det = self.a * self.d - self.b * self.c;
        // For large entries the determinant is dominated by cancellation error; rescaling by it
        // would add noise rather than remove drift.
        let size = [self.a, self.b, self.c, self.d]
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()));
        let s = if det > 0.0 && size * size < 1e6 {
            det.sqrt()
        } else {
            1.0
        };
        let (mut a, mut b, mut c, mut d) = (self.a / s, self.b / s, self.c / s, self.d / s);
        let lead = [a, b, c, d]
            .into_iter()
            .find(|x| x.abs() > 1e-15)
            .unwrap_or(1.0);
        if lead < 0.0 {
            a = -a;
            b = -b;
            c = -c;
            d = -d;
        }
        Self { a, b, c, d }
    }

    /// Rotation of the disk about the origin by `angle`.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        Self {
            a: c,
            b: s,
            c: -s,
            d: c,
        }
        .normalized()
    }

    /// Translation of length `dist` along the real diameter of the disk, moving 0 toward +1.
    pub fn translation(dist: f64) -> Self {
        Self {
            a: (0.5 * dist).exp(),
            b: 0.0,
            c: 0.0,
            d: (-0.5 * dist).exp(),
        }
    }

    /// The disk automorphism `z ↦ (z - x)/(1 - x̄z)` moving `x` to the origin.
    pub fn moving_to_origin(x: HyperbolicPoint) -> Self {
        let z = x.to_complex();
        let s = 1.0 / (1.0 - z.norm_sqr()).sqrt();
        Self::from_su11(Complex64::new(s, 0.0), -z * s)
    }

    /// Converts an `SU(1, 1)` pair `(α, β)` with `|α|² - |β|² = 1` back to `SL(2, R)`.
    pub fn from_su11(alpha: Complex64, beta: Complex64) -> Self {
        Self {
            a: alpha.re + beta.re,
            b: alpha.im - beta.im,
            c: -alpha.im - beta.im,
            d: alpha.re - beta.re,
        }
        .normalized()
    }

    /// The `SU(1, 1)` pair `(α, β)` acting on the disk.
    pub fn su11(&self) -> (Complex64, Complex64) {
        let alpha = Complex64::new(0.5 * (self.a + self.d), 0.5 * (self.b - self.c));
        let beta = Complex64::new(0.5 * (self.a - self.d), -0.5 * (self.b + self.c));
        (alpha, beta)
    }

    pub fn inverse(&self) -> Self {
        Self {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
        .normalized()
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn compose(&self, other: &Isometry) -> Self {
        Self {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
        .normalized()
    }

    /// Max-entry distance between the two matrices, modulo the sign ambiguity.
    pub fn distance(&self, other: &Isometry) -> f64 {
        let e1 = self.entries();
        let e2 = other.entries();
        let plus = (0..4).map(|i| (e1[i] - e2[i]).abs()).fold(0.0, f64::max);
        let minus = (0..4).map(|i| (e1[i] + e2[i]).abs()).fold(0.0, f64::max);
        plus.min(minus)
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.distance(&Self::IDENTITY) <= tol
    }

    pub(crate) fn apply_complex(&self, z: Complex64) -> Complex64 {
        let (alpha, beta) = self.su11();
        (alpha * z + beta) / (beta.conj() * z + alpha.conj())
    }

    /// Complex derivative of the disk action at `z`.
    pub fn derivative_at(&self, z: Complex64) -> Complex64 {
        let (alpha, beta) = self.su11();
        let den = beta.conj() * z + alpha.conj();
        1.0 / (den * den)
    }

    pub fn apply(&self, x: HyperbolicPoint) -> HyperbolicPoint {
        HyperbolicPoint::from_complex(self.apply_complex(x.to_complex()))
    }

    pub fn apply_boundary(&self, xi: BoundaryPoint) -> BoundaryPoint {
        BoundaryPoint::from_complex(self.apply_complex(xi.to_complex()))
    }

    /// Derivative of the induced circle map `θ ↦ θ'` at `xi`.
    pub fn boundary_derivative(&self, xi: BoundaryPoint) -> f64 {
        let (alpha, beta) = self.su11();
        1.0 / (beta.conj() * xi.to_complex() + alpha.conj()).norm_sqr()
    }
}

impl Mul for Isometry {
    type Output = Isometry;
    fn mul(self, rhs: Isometry) -> Isometry {
        self.compose(&rhs)
    }
}

impl<'a> Mul<&'a Isometry> for &'a Isometry {
    type Output = Isometry;
    fn mul(self, rhs: &'a Isometry) -> Isometry {
        self.compose(rhs)
    }
}

pub fn apply_isometry(g: &Isometry, x: HyperbolicPoint) -> HyperbolicPoint {
    g.apply(x)
}

pub fn apply_boundary(g: &Isometry, xi: BoundaryPoint) -> BoundaryPoint {
    g.apply_boundary(xi)
}

pub fn hyperbolic_distance(x: HyperbolicPoint, y: HyperbolicPoint) -> f64 {
    let zx = x.to_complex();
    let zy = y.to_complex();
    let num = (zx - zy).norm();
    let den = (Complex64::new(1.0, 0.0) - zx.conj() * zy).norm();
    2.0 * (num / den).min(1.0 - f64::EPSILON).atanh()
}

/// `ln P(z, ξ)`, the logarithm of the Poisson kernel of the disk.
pub fn log_poisson(z: HyperbolicPoint, xi: BoundaryPoint) -> f64 {
    let w = z.to_complex();
    (1.0 - w.norm_sqr()).ln() - (xi.to_complex() - w).norm_sqr().ln()
}

pub fn poisson_kernel(z: HyperbolicPoint, xi: BoundaryPoint) -> f64 {
    log_poisson(z, xi).exp()
}

/// Busemann cocycle `b_ξ(x, y)`, positive when `y` is closer to `ξ` than `x`.
pub fn busemann(xi: BoundaryPoint, x: HyperbolicPoint, y: HyperbolicPoint) -> f64 {
    log_poisson(y, xi) - log_poisson(x, xi)
}

/// Radon–Nikodym derivative `dμ_x/dμ_y (ξ) = e^{-δ b_ξ(x, y)}` of visual measures.
pub fn visual_density_ratio(
    x: HyperbolicPoint,
    y: HyperbolicPoint,
    xi: BoundaryPoint,
    delta: f64,
) -> f64 {
    (-delta * busemann(xi, x, y)).exp()
}

/// Moves `x` a signed distance `t` along the geodesic through `x` whose forward endpoint is `xi`.
pub fn flow_toward(x: HyperbolicPoint, xi: BoundaryPoint, t: f64) -> HyperbolicPoint {
    HyperbolicPoint::from_complex(flow_toward_complex(x.to_complex(), xi.to_complex(), t))
}

pub(crate) fn flow_toward_complex(z: Complex64, xi: Complex64, t: f64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let target = (xi - z) / (one - z.conj() * xi);
    let w = target * (0.5 * t).tanh();
    (w + z) / (one + z.conj() * w)
}

/// Unit-speed generator of the geodesic flow toward `xi`, as a Euclidean vector at `z`.
pub(crate) fn unit_field(z: Complex64, xi: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    (xi - z) / (one - z.conj() * xi) * (0.5 * (1.0 - z.norm_sqr()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IsometryClass {
    Identity,
    Elliptic,
    Parabolic,
    Hyperbolic,
}

impl fmt::Display for IsometryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            IsometryClass::Identity => "identity",
            IsometryClass::Elliptic => "elliptic",
            IsometryClass::Parabolic => "parabolic",
            IsometryClass::Hyperbolic => "hyperbolic",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub class: IsometryClass,
    /// `(attracting, repelling)` for hyperbolic elements, the single fixed point for parabolic ones.
    pub fixed: Vec<BoundaryPoint>,
    pub translation_length: f64,
}

impl Classification {
    pub fn attracting(&self) -> Option<BoundaryPoint> {
        (self.class == IsometryClass::Hyperbolic).then(|| self.fixed[0])
    }

    pub fn repelling(&self) -> Option<BoundaryPoint> {
        (self.class == IsometryClass::Hyperbolic).then(|| self.fixed[1])
    }
}

pub fn classify_and_fixed_points(g: &Isometry) -> Classification {
    if g.is_identity(1e-10) {
        return Classification {
            class: IsometryClass::Identity,
            fixed: vec![],
            translation_length: 0.0,
        };
    }
    let half_trace = 0.5 * g.trace().abs();
    let (alpha, beta) = g.su11();
    if half_trace < 1.0 - CLASSIFY_TOL {
        return Classification {
            class: IsometryClass::Elliptic,
            fixed: vec![],
            translation_length: 0.0,
        };
    }
    if half_trace <= 1.0 + CLASSIFY_TOL {
        let z = Complex64::new(0.0, alpha.im) / beta.conj();
        return Classification {
            class: IsometryClass::Parabolic,
            fixed: vec![BoundaryPoint::from_complex(z)],
            translation_length: 0.0,
        };
    }
    // Fixed points solve β̄z² + (ᾱ - α)z - β = 0.
    let root = (beta.norm_sqr() - alpha.im * alpha.im).max(0.0).sqrt();
    let z1 = Complex64::new(root, alpha.im) / beta.conj();
    let z2 = Complex64::new(-root, alpha.im) / beta.conj();
    let contraction = |z: Complex64| 1.0 / (beta.conj() * z + alpha.conj()).norm_sqr();
    let (att, rep) = if contraction(z1) < contraction(z2) {
        (z1, z2)
    } else {
        (z2, z1)
    };
    Classification {
        class: IsometryClass::Hyperbolic,
        fixed: vec![
            BoundaryPoint::from_complex(att),
            BoundaryPoint::from_complex(rep),
        ],
        translation_length: 2.0 * half_trace.acosh(),
    }
}

/// An oriented bi-infinite geodesic, named by its endpoints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Geodesic {
    pub neg: BoundaryPoint,
    pub pos: BoundaryPoint,
}

impl Geodesic {
    pub fn new(neg: BoundaryPoint, pos: BoundaryPoint) -> Result<Self> {
        if neg.angular_distance(pos) < 1e-14 {
            return Err(LabError::DegenerateGeodesic { theta: neg.theta() });
        }
        Ok(Self { neg, pos })
    }

    /// The geodesic through `x` with forward endpoint `xi`.
    pub fn through(x: HyperbolicPoint, xi: BoundaryPoint) -> Self {
        let to0 = Isometry::moving_to_origin(x);
        let back = to0.inverse();
        let fwd = to0.apply_boundary(xi);
        let neg = back.apply_boundary(BoundaryPoint::new(fwd.theta() + std::f64::consts::PI));
        Self { neg, pos: xi }
    }

    /// Isometry taking `neg ↦ -1`, `pos ↦ +1` and the foot of the origin to 0.
    pub fn standard_frame(&self) -> Isometry {
        let (t1, t2) = (self.neg.theta(), self.pos.theta());
        let gap = (t2 - t1).rem_euclid(TAU);
        // Foot of the perpendicular from the origin lies on the bisector of the shorter arc.
        let (mid, half) = if gap <= std::f64::consts::PI {
            (t1 + 0.5 * gap, 0.5 * gap)
        } else {
            (t2 + 0.5 * (TAU - gap), 0.5 * (TAU - gap))
        };
        let r = (1.0 - half.sin()) / half.cos().max(1e-300);
        let foot = HyperbolicPoint::from_complex(Complex64::from_polar(r.max(0.0), mid));
        let to0 = Isometry::moving_to_origin(foot);
        let pos_img = to0.apply_boundary(self.pos);
        Isometry::rotation(-pos_img.theta()) * to0
    }

    /// Fermi coordinates `(position along, signed offset)` relative to the standard frame.
    pub fn fermi_coordinates(&self, z: HyperbolicPoint) -> (f64, f64) {
        fermi_in_frame(&self.standard_frame(), z)
    }

    /// Inverse of [`Geodesic::fermi_coordinates`].
    pub fn point_at(&self, position: f64, offset: f64) -> HyperbolicPoint {
        point_in_frame(&self.standard_frame(), position, offset)
    }

    pub fn distance_to(&self, z: HyperbolicPoint) -> f64 {
        self.fermi_coordinates(z).1.abs()
    }
}

pub(crate) fn fermi_in_frame(frame: &Isometry, z: HyperbolicPoint) -> (f64, f64) {
    let w = frame.apply_complex(z.to_complex());
    let one = Complex64::new(1.0, 0.0);
    let position = ((one + w) / (one - w)).norm().ln();
    let offset = (2.0 * w.im / (1.0 - w.norm_sqr())).asinh();
    (position, offset)
}

pub(crate) fn point_in_frame(frame: &Isometry, position: f64, offset: f64) -> HyperbolicPoint {
    let w = Complex64::new(0.0, (0.5 * offset).tanh());
    let moved = Isometry::translation(position).apply_complex(w);
    HyperbolicPoint::from_complex(frame.inverse().apply_complex(moved))
}
