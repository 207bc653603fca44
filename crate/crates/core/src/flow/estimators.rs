//! Empirical estimators for the topological-Anosov properties of `φ` and the uniformity of `ψ`.

use std::f64::consts::TAU;

use rand::Rng;

use crate::action::{equivariant_map, CircleAction};
use crate::error::{LabError, Result};
use crate::geometry::{
    busemann, flow_toward, hyperbolic_distance, BoundaryPoint, Geodesic, HyperbolicPoint,
};
use crate::measure::visual_arc_mass;

use super::psi::PsiFlow;
use super::{BundlePoint, FlowEngine};

/// Least-squares slope and intercept of `ys` against `xs`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| (sxy / sxx, my - sxy / sxx * mx))
}

fn random_domain_point(action: &CircleAction, rng: &mut impl Rng) -> HyperbolicPoint {
    let r = action.group().domain().inradius;
    HyperbolicPoint::polar(rng.gen_range(0.0..r), rng.gen_range(0.0..TAU))
}

/// Second point on the horocycle through `x` centered at `xi`, at distance about `d`.
fn horocycle_partner(x: HyperbolicPoint, xi: BoundaryPoint, d: f64, side: f64) -> HyperbolicPoint {
    let g = Geodesic::through(x, xi);
    let y = g.point_at(g.fermi_coordinates(x).0, side * d);
    flow_toward(y, xi, busemann(xi, y, x))
}

fn relative_distance(action: &CircleAction, a: &BundlePoint, b: &BundlePoint) -> f64 {
    hyperbolic_distance(a.local(), b.rebased(action, a.word()).local())
}

/// Decay of distances between `φ`-orbits on one horocycle.
#[derive(Clone, Debug)]
pub struct AsymptoticityReport {
    pub pairs: usize,
    /// Smallest fitted exponent of `d(φ^t x, φ^t y) ≈ k₁e^{-k₂t}` over the pairs.
    pub min_exponent: f64,
    pub mean_exponent: f64,
    /// Largest fitted prefactor, relative to the initial distance.
    pub max_prefactor: f64,
}

/// Pairs on one strong-stable horocycle at initial distance `d0`, sampled at `times`.
pub fn forward_asymptoticity(
    engine: &FlowEngine<'_>,
    pairs: usize,
    d0: f64,
    times: &[f64],
    rng: &mut impl Rng,
) -> Result<AsymptoticityReport> {
    let action = engine.action();
    if pairs == 0 {
        return Err(LabError::Budget(
            "asymptoticity needs at least one pair".into(),
        ));
    }
    let mut exps = Vec::with_capacity(pairs);
    let mut max_pref: f64 = 0.0;
    for _ in 0..pairs {
        let p = action.point(rng.gen_range(0.0..action.k() as f64));
        let x = random_domain_point(action, rng);
        let xi = equivariant_map(p);
        let y = horocycle_partner(x, xi, d0, if rng.gen::<bool>() { 1.0 } else { -1.0 });
        let (a, b) = (
            BundlePoint::from_global(action, x, p)?,
            BundlePoint::from_global(action, y, p)?,
        );
        let start = relative_distance(action, &a, &b);
        let mut logs = Vec::with_capacity(times.len());
        for &t in times {
            let (fa, _) = engine.flow_phi(&a, t)?;
            let (fb, _) = engine.flow_phi(&b, t)?;
            logs.push(relative_distance(action, &fa, &fb).ln());
        }
        let (slope, icpt) = linear_fit(times, &logs)
            .ok_or_else(|| LabError::Budget("need two sample times".into()))?;
        exps.push(-slope);
        max_pref = max_pref.max(icpt.exp() / start);
    }
    let min_exponent = exps.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean_exponent = exps.iter().sum::<f64>() / exps.len() as f64;
    Ok(AsymptoticityReport {
        pairs,
        min_exponent,
        mean_exponent,
        max_prefactor: max_pref,
    })
}

/// Separation times of pairs at initial transverse gap `kappa`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparationRow {
    pub kappa: f64,
    pub pairs: usize,
    pub separated: usize,
    pub t_max: f64,
    pub t_mean: f64,
}

#[derive(Clone, Debug)]
pub struct SeparationReport {
    pub epsilon: f64,
    pub rows: Vec<SeparationRow>,
    /// Every pair separated within the time budget.
    pub finite: bool,
    /// `t(κ)` is nondecreasing as `κ` decreases.
    pub monotone: bool,
}

impl SeparationReport {
    pub fn total_pairs(&self) -> usize {
        self.rows.iter().map(|r| r.pairs).sum()
    }

    fn finish(epsilon: f64, rows: Vec<SeparationRow>) -> Self {
        let finite = rows.iter().all(|r| r.separated == r.pairs);
        let monotone = rows.windows(2).all(|w| w[1].t_max >= w[0].t_max);
        Self {
            epsilon,
            rows,
            finite,
            monotone,
        }
    }
}

/// Transverse gap between the fibers `s_p` and `s_q` seen from the local point `z`.
fn fiber_gap(z: HyperbolicPoint, s_p: f64, s_q: f64) -> f64 {
    let (lo, hi) = if s_p <= s_q { (s_p, s_q) } else { (s_q, s_p) };
    let sweep = TAU * (hi - lo);
    if sweep >= TAU {
        return 1.0;
    }
    visual_arc_mass(z, TAU * lo, sweep)
}

/// Forward separation along `F^v` leaves: `(x, p)` and a point over `q` on the same weak-unstable
/// leaf, with initial transverse gap `ν_x[p, q] = κ`. Reports the first time the gap seen from
/// `φ^t x` reaches `epsilon`, stepping by `dt` up to `t_limit`.
pub fn vertical_separation(
    engine: &FlowEngine<'_>,
    epsilon: f64,
    kappas: &[f64],
    pairs_per_kappa: usize,
    dt: f64,
    t_limit: f64,
    rng: &mut impl Rng,
) -> Result<SeparationReport> {
    let action = engine.action();
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(LabError::Guard {
            what: "separation epsilon",
            value: epsilon,
            limit: 0.5,
        });
    }
    let mut rows = Vec::with_capacity(kappas.len());
    for &kappa in kappas {
        let mut times = Vec::with_capacity(pairs_per_kappa);
        for _ in 0..pairs_per_kappa {
            let x = random_domain_point(action, rng);
            let p = action.point(rng.gen_range(0.0..action.k() as f64));
            let side = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let pt = BundlePoint::from_global(action, x, p)?;
            // Local fiber coordinate of q with ν_z[p, q] = κ, by bisection on the lifted gap.
            let z = pt.local();
            let s_p = pt.s_loc();
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if fiber_gap(z, s_p, s_p + side * mid) < kappa {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let mut s_q = s_p + side * 0.5 * (lo + hi);
            let mut cur = pt;
            let mut t = 0.0;
            let mut hit = None;
            while t < t_limit {
                let (next, seg) = engine.flow_phi(&cur, dt)?;
                for c in &seg.crossings {
                    s_q = action.lift_letter(c.letter.inverse(), s_q);
                }
                // Keep the lifted coordinates of p and q within one unit of each other.
                let shift = ((s_q - next.s_loc()) / action.k() as f64).round() * action.k() as f64;
                s_q -= shift;
                cur = next;
                t += dt;
                if fiber_gap(cur.local(), cur.s_loc(), s_q) >= epsilon {
                    hit = Some(t);
                    break;
                }
            }
            times.push(hit);
        }
        let separated: Vec<f64> = times.iter().flatten().cloned().collect();
        rows.push(SeparationRow {
            kappa,
            pairs: pairs_per_kappa,
            separated: separated.len(),
            t_max: separated.iter().cloned().fold(0.0, f64::max),
            t_mean: if separated.is_empty() {
                f64::NAN
            } else {
                separated.iter().sum::<f64>() / separated.len() as f64
            },
        });
    }
    Ok(SeparationReport::finish(epsilon, rows))
}

/// Backward separation along `F^h` leaves: two points on one horocycle at distance `κ`; the
/// first time the distance between `φ^{-t}` images reaches `epsilon`.
pub fn horizontal_separation(
    engine: &FlowEngine<'_>,
    epsilon: f64,
    kappas: &[f64],
    pairs_per_kappa: usize,
    dt: f64,
    t_limit: f64,
    rng: &mut impl Rng,
) -> Result<SeparationReport> {
    let action = engine.action();
    let mut rows = Vec::with_capacity(kappas.len());
    for &kappa in kappas {
        let mut times = Vec::with_capacity(pairs_per_kappa);
        for _ in 0..pairs_per_kappa {
            let x = random_domain_point(action, rng);
            let p = action.point(rng.gen_range(0.0..action.k() as f64));
            let xi = equivariant_map(p);
            let side = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let y = horocycle_partner(x, xi, kappa, side);
            let mut a = BundlePoint::from_global(action, x, p)?;
            let mut b = BundlePoint::from_global(action, y, p)?;
            let mut t = 0.0;
            let mut hit = None;
            while t < t_limit {
                a = engine.flow_phi(&a, -dt)?.0;
                b = engine.flow_phi(&b, -dt)?.0;
                t += dt;
                if relative_distance(action, &a, &b) >= epsilon {
                    hit = Some(t);
                    break;
                }
            }
            times.push(hit);
        }
        let separated: Vec<f64> = times.iter().flatten().cloned().collect();
        rows.push(SeparationRow {
            kappa,
            pairs: pairs_per_kappa,
            separated: separated.len(),
            t_max: separated.iter().cloned().fold(0.0, f64::max),
            t_mean: if separated.is_empty() {
                f64::NAN
            } else {
                separated.iter().sum::<f64>() / separated.len() as f64
            },
        });
    }
    Ok(SeparationReport::finish(epsilon, rows))
}

/// The holonomy bound `log D hol ≤ δt + 2δ·diam D` on random backward segments.
#[derive(Clone, Debug)]
pub struct HolonomyBoundReport {
    pub segments: usize,
    /// Largest `log D hol - (δt + 2δ·diam D)`.
    pub max_slack: f64,
    /// Least-squares slope of `log D hol` against `t`.
    pub slope: f64,
    pub intercept: f64,
}

pub fn holonomy_bound_sweep(
    engine: &FlowEngine<'_>,
    segments: usize,
    t_min: f64,
    rng: &mut impl Rng,
) -> Result<HolonomyBoundReport> {
    let action = engine.action();
    if segments < 2 {
        return Err(LabError::Budget(
            "holonomy sweep needs at least two segments".into(),
        ));
    }
    let mut ts = Vec::with_capacity(segments);
    let mut logs = Vec::with_capacity(segments);
    let mut max_slack = f64::NEG_INFINITY;
    for _ in 0..segments {
        let x = random_domain_point(action, rng);
        let p = action.point(rng.gen_range(0.0..action.k() as f64));
        let t = rng.gen_range(t_min..0.0);
        let rec = engine.holonomy_derivative(&BundlePoint::from_global(action, x, p)?, t)?;
        max_slack = max_slack.max(rec.bound_check);
        ts.push(t);
        logs.push(rec.log_derivative);
    }
    let (slope, intercept) =
        linear_fit(&ts, &logs).ok_or_else(|| LabError::Budget("degenerate times".into()))?;
    Ok(HolonomyBoundReport {
        segments,
        max_slack,
        slope,
        intercept,
    })
}

/// Fellow-traveling distance of `ψ`-orbits from the geodesic toward `f(p)`.
#[derive(Clone, Debug)]
pub struct QuasigeodesicReport {
    pub leaves_per_batch: usize,
    /// Largest distance over each batch.
    pub batch_r: Vec<f64>,
    /// Largest relative spread of the batch values around their mean.
    pub spread: f64,
}

/// Largest distance of the `ψ`-orbit of `pt` over `[0, t]` from the geodesic through `pt` toward
/// its forward endpoint, sampled every `dt`.
pub fn fellow_travel_distance(
    flow: &PsiFlow<'_>,
    pt: &BundlePoint,
    t: f64,
    dt: f64,
) -> Result<f64> {
    let xi = BoundaryPoint::new(pt.target().arg());
    let neg = Geodesic::through(pt.local(), xi).neg;
    let steps = (t / dt).ceil() as usize;
    let mut cur = pt.clone();
    let mut companion = neg.to_complex();
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        let tr = flow.trace(&cur, dt, None, &[companion])?;
        cur = tr.end;
        companion = tr.companions[0];
        let g = Geodesic::new(
            BoundaryPoint::new(companion.arg()),
            BoundaryPoint::new(cur.target().arg()),
        )?;
        worst = worst.max(g.distance_to(cur.local()));
    }
    Ok(worst)
}

pub fn quasigeodesic_uniformity(
    flow: &PsiFlow<'_>,
    action: &CircleAction,
    batches: usize,
    leaves: usize,
    t: f64,
    rng: &mut impl Rng,
) -> Result<QuasigeodesicReport> {
    if batches == 0 || leaves == 0 {
        return Err(LabError::Budget("quasigeodesic check needs leaves".into()));
    }
    let mut batch_r = Vec::with_capacity(batches);
    for _ in 0..batches {
        let mut r: f64 = 0.0;
        for _ in 0..leaves {
            let x = random_domain_point(action, rng);
            let p = action.point(rng.gen_range(0.0..action.k() as f64));
            r = r.max(fellow_travel_distance(
                flow,
                &BundlePoint::from_global(action, x, p)?,
                t,
                0.5,
            )?);
        }
        batch_r.push(r);
    }
    let mean = batch_r.iter().sum::<f64>() / batch_r.len() as f64;
    let spread = batch_r
        .iter()
        .map(|r| (r - mean).abs() / mean)
        .fold(0.0, f64::max);
    Ok(QuasigeodesicReport {
        leaves_per_batch: leaves,
        batch_r,
        spread,
    })
}
