//! Convolution of chart-grid samples with the bump `kζ(k·)` in the fiber direction.

use std::sync::OnceLock;

use crate::error::{LabError, Result};
use crate::quadrature::adaptive_simpson;

/// Grid points required per kernel half-width `1/k`.
pub const MIN_POINTS_PER_HALF_WIDTH: usize = 16;

fn profile(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

fn profile_derivative(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        let q = 1.0 - t * t;
        -2.0 * t / (q * q) * (-1.0 / q).exp()
    }
}

fn normalization() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| 1.0 / adaptive_simpson(&profile, -1.0, 1.0, 1e-15))
}

/// The unit-mass bump `ζ`, supported in `[-1, 1]`.
pub fn bump(t: f64) -> f64 {
    normalization() * profile(t)
}

pub fn bump_derivative(t: f64) -> f64 {
    normalization() * profile_derivative(t)
}

/// Samples `a(x_i, y_j)` on a uniform grid, periodic in `y` with period `period`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartGrid {
    pub xs: Vec<f64>,
    pub ny: usize,
    pub period: f64,
    /// Row-major, `values[i * ny + j] = a(xs[i], j·period/ny)`.
    pub values: Vec<f64>,
}

impl ChartGrid {
    pub fn sample(xs: Vec<f64>, ny: usize, period: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let h = period / ny as f64;
        let mut values = Vec::with_capacity(xs.len() * ny);
        for &x in &xs {
            values.extend((0..ny).map(|j| f(x, j as f64 * h)));
        }
        Self {
            xs,
            ny,
            period,
            values,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.ny as f64
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.ny..(i + 1) * self.ny]
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }
}

/// `b_k` and `∂b_k/∂y` on the grid of the input field.
#[derive(Clone, Debug)]
pub struct MollifiedField {
    pub scale: u32,
    pub input: ChartGrid,
    pub smoothed: ChartGrid,
    pub dy: ChartGrid,
}

impl MollifiedField {
    /// Central differences of `b_k` in `x` at the interior grid rows.
    pub fn dx(&self, i: usize, j: usize) -> f64 {
        let g = &self.smoothed;
        let n = g.ny;
        (g.values[(i + 1) * n + j] - g.values[(i - 1) * n + j]) / (g.xs[i + 1] - g.xs[i - 1])
    }
}

/// Discrete kernel weights at offsets `m·h`, `|m| ≤ half`: `(value, derivative)`.
pub(crate) fn kernel_weights(scale: u32, h: f64) -> (Vec<f64>, Vec<f64>) {
    let k = scale as f64;
    let half = (1.0 / (k * h)).floor() as i64;
    let mut w: Vec<f64> = (-half..=half)
        .map(|m| k * bump(k * m as f64 * h) * h)
        .collect();
    let total: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= total;
    }
    // ∂_y ∫ a(y - t) kζ(kt) dt = ∫ a(y - t) k² ζ'(kt) dt.
    let d = (-half..=half)
        .map(|m| k * k * bump_derivative(k * m as f64 * h) * h)
        .collect();
    (w, d)
}

pub(crate) fn check_resolution(scale: u32, h: f64) -> Result<()> {
    if scale == 0 {
        return Err(LabError::Guard {
            what: "mollifier scale",
            value: 0.0,
            limit: 1.0,
        });
    }
    let have = (1.0 / (scale as f64 * h) + 1e-9).floor() as usize;
    if have < MIN_POINTS_PER_HALF_WIDTH {
        return Err(LabError::GridTooCoarse {
            have,
            need: MIN_POINTS_PER_HALF_WIDTH,
            scale,
        });
    }
    Ok(())
}

/// Periodic discrete convolution of `row` with centered weights.
pub(crate) fn convolve(row: &[f64], weights: &[f64]) -> Vec<f64> {
    let n = row.len() as i64;
    let half = (weights.len() / 2) as i64;
    (0..n)
        .map(|j| {
            weights
                .iter()
                .enumerate()
                .map(|(m, w)| w * row[(j - (m as i64 - half)).rem_euclid(n) as usize])
                .sum()
        })
        .collect()
}

/// `b_k(x, y) = ∫ a(x, y - t) kζ(kt) dt` and its `y`-derivative, by quadrature on the grid.
pub fn mollify(a: &ChartGrid, scale: u32) -> Result<MollifiedField> {
    let h = a.spacing();
    check_resolution(scale, h)?;
    let (w, d) = kernel_weights(scale, h);
    let mut smoothed = Vec::with_capacity(a.values.len());
    let mut dy = Vec::with_capacity(a.values.len());
    for i in 0..a.xs.len() {
        smoothed.extend(convolve(a.row(i), &w));
        dy.extend(convolve(a.row(i), &d));
    }
    let with = |values| ChartGrid {
        xs: a.xs.clone(),
        ny: a.ny,
        period: a.period,
        values,
    };
    Ok(MollifiedField {
        scale,
        input: a.clone(),
        smoothed: with(smoothed),
        dy: with(dy),
    })
}

/// Largest `|b_k - a|` over the grid.
pub fn sup_error(field: &MollifiedField) -> f64 {
    field
        .smoothed
        .values
        .iter()
        .zip(&field.input.values)
        .map(|(b, a)| (b - a).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn triangle(y: f64) -> f64 {
        let f = y.rem_euclid(1.0);
        (f - 0.5).abs()
    }

    #[test]
    fn bump_has_unit_mass() {
        let m = adaptive_simpson(&bump, -1.0, 1.0, 1e-14);
        assert!((m - 1.0).abs() < 1e-12);
        assert_eq!(bump(1.0), 0.0);
        assert!(bump_derivative(0.5) < 0.0);
    }

    #[test]
    fn constants_are_reproduced() {
        let a = ChartGrid::sample(vec![0.0, 0.5, 1.0], 1024, 1.0, |x, _| 1.0 + x * x);
        let b = mollify(&a, 32).unwrap();
        assert!(sup_error(&b) < 1e-10);
        assert!(b.dy.values.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn lipschitz_error_halves() {
        let a = ChartGrid::sample(vec![0.0], 4096, 1.0, |_, y| triangle(y));
        let errs: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&k| sup_error(&mollify(&a, k).unwrap()))
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
        }
    }

    #[test]
    fn smooth_error_decreases() {
        let a = ChartGrid::sample(vec![0.0], 2048, 1.0, |_, y| (TAU * y).sin());
        let e32 = sup_error(&mollify(&a, 32).unwrap());
        let e64 = sup_error(&mollify(&a, 64).unwrap());
        assert!(e64 < e32);
        let b = mollify(&a, 32).unwrap();
        for j in (0..2048).step_by(97) {
            let y = a.y(j);
            let exact = TAU * (TAU * y).cos();
            assert!((b.dy.values[j] - exact).abs() < 0.05 * TAU);
        }
    }

    #[test]
    fn matches_quadrature_oracle() {
        let a = ChartGrid::sample(vec![0.0], 4096, 1.0, |_, y| (TAU * y).sin());
        for k in [32u32, 64] {
            let kf = k as f64;
            let damp = adaptive_simpson(
                &|t: f64| (TAU * t).cos() * kf * bump(kf * t),
                -1.0 / kf,
                1.0 / kf,
                1e-14,
            );
            let b = mollify(&a, k).unwrap();
            let e = (0..4096)
                .map(|j| (b.smoothed.values[j] - damp * (TAU * a.y(j)).sin()).abs())
                .fold(0.0, f64::max);
            assert!(e < 1e-10, "{k}: {e:e}");
        }
    }

    #[test]
    fn x_partials_converge() {
        let xs: Vec<f64> = (0..21).map(|i| i as f64 * 0.005).collect();
        let a = ChartGrid::sample(xs.clone(), 4096, 1.0, |x, y| x.sin() * triangle(y) + x * x);
        let err = |k: u32| {
            let b = mollify(&a, k).unwrap();
            let mut e: f64 = 0.0;
            for i in 1..20 {
                for j in 0..4096 {
                    let exact = xs[i].cos() * triangle(a.y(j)) + 2.0 * xs[i];
                    e = e.max((b.dx(i, j) - exact).abs());
                }
            }
            e
        };
        let (e16, e32, e64) = (err(16), err(32), err(64));
        assert!(e32 < e16 && e64 < e32);
        assert!((e16 / e32 - 2.0).abs() < 0.4);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let a = ChartGrid::sample(vec![0.0], 256, 1.0, |_, y| y);
        assert!(matches!(
            mollify(&a, 32),
            Err(LabError::GridTooCoarse { .. })
        ));
    }
}
