//! The full property sweep behind `verify`: every asserted inequality with its measured value,
//! bound, slack and sample count, the measured constants, the separation tables and the census.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::action::{equivariant_map, CircleAction};
use crate::census::{
    conjugacy_classes, cover_exponent, homotopic_inverse_pairs, orbit_census, scaling_rows,
    CensusEntry, ScalingRow,
};
use crate::config::RunConfig;
use crate::error::{LabError, Result};
use crate::flow::cone::{cone_check, cone_constants, jacobian, ConeField};
use crate::flow::estimators::{
    forward_asymptoticity, holonomy_bound_sweep, horizontal_separation, quasigeodesic_uniformity,
    vertical_separation, SeparationRow,
};
use crate::flow::mollifier::{mollify, sup_error, ChartGrid};
use crate::flow::periodic::{first_return, periodic_orbit_power};
use crate::flow::psi::{c1_distance, PsiField, PsiFlow, PsiParams};
use crate::flow::{BundlePoint, FlowEngine};
use crate::geometry::{
    busemann, classify_and_fixed_points, visual_density_ratio, BoundaryPoint, HyperbolicPoint,
    IsometryClass, SURFACE_DELTA,
};
use crate::group::{Letter, SurfaceGroup, Word};
use crate::measure::{visual_arc_mass, PullbackMeasure};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Lt,
    Ge,
    Gt,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Lt => "<",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// No samples were configured, so nothing was certified.
    InsufficientSamples,
    /// The sub-check aborted; the error is kept in the detail.
    Error,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::InsufficientSamples => "INSUFFICIENT",
            Status::Error => "ERROR",
        }
    }
}

/// One certified inequality `measured ⋈ bound`.
#[derive(Clone, Debug, PartialEq)]
pub struct Inequality {
    pub property: &'static str,
    pub name: &'static str,
    pub relation: Relation,
    pub measured: f64,
    pub bound: f64,
    pub samples: usize,
    pub status: Status,
    pub detail: String,
}

impl Inequality {
    fn new(
        property: &'static str,
        name: &'static str,
        measured: f64,
        relation: Relation,
        bound: f64,
        samples: usize,
    ) -> Self {
        let holds = match relation {
            Relation::Le => measured <= bound,
            Relation::Lt => measured < bound,
            Relation::Ge => measured >= bound,
            Relation::Gt => measured > bound,
        };
        let status = if samples == 0 {
            Status::InsufficientSamples
        } else if holds {
            Status::Pass
        } else {
            Status::Fail
        };
        Self {
            property,
            name,
            relation,
            measured,
            bound,
            samples,
            status,
            detail: String::new(),
        }
    }

    fn error(property: &'static str, err: impl std::fmt::Display) -> Self {
        Self {
            property,
            name: "run",
            relation: Relation::Le,
            measured: f64::NAN,
            bound: f64::NAN,
            samples: 0,
            status: Status::Error,
            detail: err.to_string(),
        }
    }

    /// Positive when the inequality holds with room to spare.
    pub fn slack(&self) -> f64 {
        match self.relation {
            Relation::Le | Relation::Lt => self.bound - self.measured,
            Relation::Ge | Relation::Gt => self.measured - self.bound,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeparationTable {
    pub direction: &'static str,
    pub epsilon: f64,
    pub rows: Vec<SeparationRow>,
}

#[derive(Clone, Debug)]
pub struct CertificationReport {
    pub seed: u64,
    pub group: String,
    pub k: u32,
    pub checks: Vec<Inequality>,
    /// Measured constants in a fixed order.
    pub constants: Vec<(&'static str, f64)>,
    pub separation: Vec<SeparationTable>,
    pub census: Vec<CensusEntry>,
    pub scaling: Vec<ScalingRow>,
}

impl CertificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status == Status::Pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Inequality> {
        self.checks.iter().filter(|c| c.status != Status::Pass)
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| *v)
    }

    /// Deterministic text rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "anosov-lab certification report");
        let _ = writeln!(out, "group {}", self.group);
        let _ = writeln!(out, "cover k {}", self.k);
        let _ = writeln!(out, "seed {}", self.seed);
        let _ = writeln!(out, "\n[checks]");
        for c in &self.checks {
            let _ = write!(
                out,
                "{:<12} {}.{} measured {:.12e} {} {:.12e} slack {:.12e} samples {}",
                c.status.as_str(),
                c.property,
                c.name,
                c.measured,
                c.relation.as_str(),
                c.bound,
                c.slack(),
                c.samples
            );
            if !c.detail.is_empty() {
                let _ = write!(out, " ({})", c.detail);
            }
            out.push('\n');
        }
        let _ = writeln!(out, "\n[constants]");
        for (name, v) in &self.constants {
            let _ = writeln!(out, "{name} = {v:.12e}");
        }
        for t in &self.separation {
            let _ = writeln!(
                out,
                "\n[separation {} epsilon {:.12e}]",
                t.direction, t.epsilon
            );
            let _ = writeln!(out, "kappa pairs separated t_max t_mean");
            for r in &t.rows {
                let _ = writeln!(
                    out,
                    "{:.12e} {} {} {:.12e} {:.12e}",
                    r.kappa, r.pairs, r.separated, r.t_max, r.t_mean
                );
            }
        }
        let _ = writeln!(out, "\n[census]");
        let mut ks: Vec<u32> = self.census.iter().map(|e| e.k).collect();
        ks.dedup();
        for k in ks {
            let entries: Vec<&CensusEntry> = self.census.iter().filter(|e| e.k == k).collect();
            let orbits: usize = entries.iter().map(|e| e.count()).sum();
            let respelled: usize = entries
                .iter()
                .map(|e| e.orbits.iter().filter(|o| o.respelled).count())
                .sum();
            let descends = entries.first().map(|e| e.descends).unwrap_or(true);
            let _ = writeln!(
                out,
                "k {k} classes {} orbits {orbits} respelled {respelled} descends {descends}",
                entries.len()
            );
        }
        if !self.scaling.is_empty() {
            let lo = self
                .scaling
                .iter()
                .map(|r| r.count as f64 / r.base_count as f64)
                .fold(f64::INFINITY, f64::min);
            let hi = self
                .scaling
                .iter()
                .map(|r| r.count as f64 / r.base_count as f64)
                .fold(0.0, f64::max);
            let _ = writeln!(
                out,
                "scaling factor min {lo:.12e} max {hi:.12e} rows {}",
                self.scaling.len()
            );
        }
        let failed = self.failures().count();
        let _ = writeln!(
            out,
            "\nverdict {} ({} checks, {} not passed)",
            if failed == 0 { "PASS" } else { "FAIL" },
            self.checks.len(),
            failed
        );
        out
    }
}

/// Independent random stream per property, so sample counts of one do not shift another.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn random_point(rng: &mut impl Rng, max_r: f64) -> HyperbolicPoint {
    HyperbolicPoint::polar(rng.gen_range(0.0..max_r), rng.gen_range(0.0..TAU))
}

fn random_word(rng: &mut impl Rng, min_len: usize, max_len: usize) -> Word {
    let len = rng.gen_range(min_len..=max_len);
    Word::from_letters((0..len).map(|_| Letter::ALL[rng.gen_range(0..8)]))
}

/// `lim_{h→0} m(h)` from central samples `m(h)` by one Richardson step (error `O(h⁴)`).
fn richardson(m: impl Fn(f64) -> f64, h: f64) -> f64 {
    (4.0 * m(0.5 * h) - m(h)) / 3.0
}

/// Density of `μ_x` against `μ_y` at `θ`, from visual masses of shrinking arcs.
fn density_ratio_oracle(x: HyperbolicPoint, y: HyperbolicPoint, theta: f64) -> f64 {
    richardson(
        |h| visual_arc_mass(x, theta - h, 2.0 * h) / visual_arc_mass(y, theta - h, 2.0 * h),
        1e-3,
    )
}

struct Sweep<'a> {
    cfg: &'a RunConfig,
    seed: u64,
    group: &'a SurfaceGroup,
    action: &'a CircleAction,
    checks: Vec<Inequality>,
    constants: Vec<(&'static str, f64)>,
    separation: Vec<SeparationTable>,
    census: Vec<CensusEntry>,
    scaling: Vec<ScalingRow>,
}

impl Sweep<'_> {
    fn push(
        &mut self,
        property: &'static str,
        name: &'static str,
        measured: f64,
        relation: Relation,
        bound: f64,
        samples: usize,
    ) {
        self.checks.push(Inequality::new(
            property, name, measured, relation, bound, samples,
        ));
    }

    fn run(&mut self, property: &'static str, f: impl FnOnce(&mut Self) -> Result<()>) {
        if let Err(e) = f(self) {
            self.checks.push(Inequality::error(property, e));
        }
    }

    fn busemann(&mut self) -> Result<()> {
        let n = self.cfg.samples.busemann;
        let tol = self.cfg.tolerances.busemann;
        let mut rng = stream(self.seed, 1);
        let (mut cocycle, mut equiv, mut density, mut oracle) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for _ in 0..n {
            let (x, y, z) = (
                random_point(&mut rng, 2.5),
                random_point(&mut rng, 2.5),
                random_point(&mut rng, 2.5),
            );
            let xi = BoundaryPoint::new(rng.gen_range(0.0..TAU));
            cocycle =
                cocycle.max((busemann(xi, x, y) + busemann(xi, y, z) - busemann(xi, x, z)).abs());
            let g = self.group.evaluate(&random_word(&mut rng, 1, 3));
            let moved = busemann(g.apply_boundary(xi), g.apply(x), g.apply(y));
            equiv = equiv.max((moved - busemann(xi, x, y)).abs());
            let rn = (-SURFACE_DELTA * busemann(xi, x, y)).exp();
            density = density.max((visual_density_ratio(x, y, xi, SURFACE_DELTA) / rn - 1.0).abs());
            oracle = oracle.max((density_ratio_oracle(x, y, xi.theta()) / rn - 1.0).abs());
        }
        self.push("busemann", "cocycle", cocycle, Relation::Le, tol, n);
        self.push("busemann", "equivariance", equiv, Relation::Le, tol, n);
        self.push("busemann", "density_ratio", density, Relation::Le, tol, n);
        self.push(
            "busemann",
            "density_vs_arc_masses",
            oracle,
            Relation::Le,
            tol,
            n,
        );
        Ok(())
    }

    fn rn(&mut self) -> Result<()> {
        let n = self.cfg.samples.rn;
        let max_len = self.cfg.budgets.rn_word_len;
        let measure = PullbackMeasure::new(self.action.k());
        let kf = self.action.k() as f64;
        let mut rng = stream(self.seed, 2);
        let mut worst: f64 = 0.0;
        for _ in 0..n {
            let w = random_word(&mut rng, 0, max_len);
            let s = rng.gen_range(0.0..kf);
            let inv = w.inverse();
            // The density varies on the visual scale |f(p) - w·o|; the step follows it.
            let wo = self.group.evaluate(&w).apply(HyperbolicPoint::ORIGIN);
            let xi = equivariant_map(self.action.point(s));
            let h0 = (2e-3 * (xi.to_complex() - wo.to_complex()).norm() / TAU).min(1e-3);
            // The derivative of act(w⁻¹) in the chart ζ = ν_o, by central mass quotients.
            let fd = richardson(
                |h| {
                    let num = measure
                        .nu_lifted(self.action.lift(&inv, s - h), self.action.lift(&inv, s + h))
                        .unwrap_or(f64::NAN);
                    num / measure.nu_lifted(s - h, s + h).unwrap_or(f64::NAN)
                },
                h0,
            );
            let rn = measure.rn_derivative(self.action, &w, self.action.point(s));
            worst = worst.max((rn / fd - 1.0).abs());
            if worst.is_nan() {
                break;
            }
        }
        self.push(
            "rn_derivative",
            "finite_difference",
            worst,
            Relation::Le,
            self.cfg.tolerances.rn_relative,
            n,
        );
        Ok(())
    }

    fn periodic(&mut self) -> Result<()> {
        let engine = FlowEngine::new(self.action);
        let tol = self.cfg.tolerances.periodic_relative;
        let b = &self.cfg.budgets;
        let (mut backward, mut forward) = (0.0f64, 0.0f64);
        let (mut orbits, mut returns, mut not_monotone) = (0usize, 0usize, 0usize);
        let mut drift: f64 = 0.0;
        for key in conjugacy_classes(self.action, b.periodic_word_len)? {
            let w = key.word();
            let c = classify_and_fixed_points(&self.group.evaluate(w));
            if c.class != IsometryClass::Hyperbolic {
                continue;
            }
            let n = self.action.rotation_displacement(w);
            let j = cover_exponent(self.action.k(), n);
            let expected = SURFACE_DELTA * j as f64 * c.translation_length;
            for fp in self.action.fixed_points(&w.pow(j))? {
                let orbit = periodic_orbit_power(&engine, w, j, fp.point, None)?;
                backward =
                    backward.max(((orbit.backward_log_holonomy + expected).exp() - 1.0).abs());
                forward = forward.max(((orbit.forward_log_holonomy - expected).exp() - 1.0).abs());
                orbits += 1;
                let r = first_return(
                    &engine,
                    &orbit,
                    b.first_return_radius,
                    3,
                    b.first_return_iterates,
                );
                returns += 1;
                match r {
                    Ok(r) if r.monotone => drift = drift.max(r.leaf_drift),
                    _ => not_monotone += 1,
                }
            }
        }
        self.push(
            "periodic",
            "backward_holonomy_vs_exp_minus_length",
            backward,
            Relation::Le,
            tol,
            orbits,
        );
        self.push(
            "periodic",
            "forward_holonomy_vs_exp_length",
            forward,
            Relation::Le,
            tol,
            orbits,
        );
        self.push(
            "periodic",
            "first_return_not_contracting",
            not_monotone as f64,
            Relation::Le,
            0.0,
            returns,
        );
        self.constants.push(("periodic_orbits", orbits as f64));
        self.constants.push(("first_return_leaf_drift", drift));
        Ok(())
    }

    fn holonomy(&mut self) -> Result<()> {
        let n = self.cfg.samples.holonomy_segments;
        let engine = FlowEngine::new(self.action);
        let mut rng = stream(self.seed, 4);
        if n < 2 {
            self.push(
                "holonomy",
                "bound_slack",
                f64::NAN,
                Relation::Le,
                self.cfg.tolerances.holonomy_bound,
                0,
            );
            return Ok(());
        }
        let r = holonomy_bound_sweep(&engine, n, self.cfg.budgets.holonomy_t_min, &mut rng)?;
        self.push(
            "holonomy",
            "bound_slack",
            r.max_slack,
            Relation::Le,
            self.cfg.tolerances.holonomy_bound,
            n,
        );
        let rel = (r.slope / SURFACE_DELTA - 1.0).abs();
        self.push(
            "holonomy",
            "exponent_relative_error",
            rel,
            Relation::Le,
            self.cfg.tolerances.holonomy_slope,
            n,
        );
        self.constants.push(("k1", r.intercept.exp()));
        self.constants.push(("k2", r.slope));
        self.constants.push(("diam_D", engine.diameter()));
        Ok(())
    }

    fn asymptotic(&mut self) -> Result<()> {
        let n = self.cfg.samples.asymptotic_pairs;
        let engine = FlowEngine::new(self.action);
        let mut rng = stream(self.seed, 5);
        if n == 0 {
            self.push(
                "asymptotic",
                "decay_exponent",
                f64::NAN,
                Relation::Ge,
                self.cfg.tolerances.asymptotic_exponent,
                0,
            );
            return Ok(());
        }
        let times: Vec<f64> = (0..=10).map(f64::from).collect();
        let r = forward_asymptoticity(&engine, n, 1e-3, &times, &mut rng)?;
        self.push(
            "asymptotic",
            "decay_exponent",
            r.min_exponent,
            Relation::Ge,
            self.cfg.tolerances.asymptotic_exponent,
            n,
        );
        self.constants.push(("k1_prime", r.max_prefactor));
        self.constants.push(("k2_prime", r.min_exponent));
        Ok(())
    }

    fn separation(&mut self) -> Result<()> {
        let b = &self.cfg.budgets;
        let pairs = self.cfg.samples.separation_pairs;
        let engine = FlowEngine::new(self.action);
        let eps = b.separation_epsilon;
        let kappas: Vec<f64> = (1..=b.separation_levels)
            .map(|i| eps / 2f64.powi(i as i32))
            .collect();
        let mut rng = stream(self.seed, 6);
        let v = vertical_separation(
            &engine,
            eps,
            &kappas,
            pairs,
            b.separation_dt,
            b.separation_t_limit,
            &mut rng,
        )?;
        let total = v.total_pairs();
        let unseparated = v.rows.iter().map(|r| r.pairs - r.separated).sum::<usize>();
        let inversions = v
            .rows
            .windows(2)
            .filter(|w| w[1].t_max < w[0].t_max)
            .count();
        self.push(
            "separation",
            "vertical_unseparated_pairs",
            unseparated as f64,
            Relation::Le,
            0.0,
            total,
        );
        self.push(
            "separation",
            "vertical_t_kappa_inversions",
            inversions as f64,
            Relation::Le,
            0.0,
            total,
        );
        self.constants.push(("epsilon", eps));
        self.constants.push(("delta_sep", eps));
        self.separation.push(SeparationTable {
            direction: "vertical_forward",
            epsilon: eps,
            rows: v.rows,
        });
        // Backward along horocycles, gaps measured in the leaf metric.
        let h_eps = 4.0 * eps;
        let h_kappas: Vec<f64> = (1..=b.separation_levels)
            .map(|i| h_eps / 2f64.powi(i as i32))
            .collect();
        let h = horizontal_separation(
            &engine,
            h_eps,
            &h_kappas,
            pairs,
            b.separation_dt,
            b.separation_t_limit,
            &mut rng,
        )?;
        let unseparated = h.rows.iter().map(|r| r.pairs - r.separated).sum::<usize>();
        let inversions = h
            .rows
            .windows(2)
            .filter(|w| w[1].t_max < w[0].t_max)
            .count();
        self.push(
            "separation",
            "horizontal_unseparated_pairs",
            unseparated as f64,
            Relation::Le,
            0.0,
            h.total_pairs(),
        );
        self.push(
            "separation",
            "horizontal_t_kappa_inversions",
            inversions as f64,
            Relation::Le,
            0.0,
            h.total_pairs(),
        );
        self.separation.push(SeparationTable {
            direction: "horizontal_backward",
            epsilon: h_eps,
            rows: h.rows,
        });
        Ok(())
    }

    fn mollifier(&mut self) -> Result<()> {
        let tol = &self.cfg.tolerances;
        let ny = 4096;
        let constant = ChartGrid::sample(vec![0.0, 0.5, 1.0], ny, 1.0, |x, _| 1.0 + x * x);
        let b = mollify(&constant, 64)?;
        let dy = b.dy.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.push(
            "mollifier",
            "constant_field_error",
            sup_error(&b).max(dy),
            Relation::Le,
            tol.mollifier_exact,
            constant.values.len(),
        );
        let triangle = |y: f64| (y.rem_euclid(1.0) - 0.5).abs();
        let lip = ChartGrid::sample(vec![0.0], ny, 1.0, |_, y| triangle(y));
        let errs = [16u32, 32, 64]
            .iter()
            .map(|&k| Ok(sup_error(&mollify(&lip, k)?)))
            .collect::<Result<Vec<f64>>>()?;
        let halving = errs
            .windows(2)
            .map(|w| (w[0] / w[1] / 2.0 - 1.0).abs())
            .fold(0.0, f64::max);
        self.push(
            "mollifier",
            "lipschitz_halving_deviation",
            halving,
            Relation::Le,
            tol.mollifier_ratio,
            lip.values.len(),
        );
        let xs: Vec<f64> = (0..21).map(|i| i as f64 * 0.005).collect();
        let leafwise = ChartGrid::sample(xs.clone(), ny, 1.0, |x, y| x.sin() * triangle(y) + x * x);
        let dx_err = |k: u32| -> Result<f64> {
            let b = mollify(&leafwise, k)?;
            let mut e: f64 = 0.0;
            for i in 1..xs.len() - 1 {
                for j in 0..ny {
                    e = e.max(
                        (b.dx(i, j) - (xs[i].cos() * triangle(leafwise.y(j)) + 2.0 * xs[i])).abs(),
                    );
                }
            }
            Ok(e)
        };
        let dx = [dx_err(16)?, dx_err(32)?, dx_err(64)?];
        let conv = dx
            .windows(2)
            .map(|w| (w[0] / w[1] / 2.0 - 1.0).abs())
            .fold(0.0, f64::max);
        self.push(
            "mollifier",
            "leafwise_partial_convergence_deviation",
            conv,
            Relation::Le,
            tol.mollifier_ratio,
            leafwise.values.len(),
        );
        self.constants.push(("mollifier_partial_error_k64", dx[2]));
        Ok(())
    }

    fn psi_params(&self) -> PsiParams {
        let m = &self.cfg.mollifier;
        PsiParams {
            scale: m.scale,
            nr: m.nr,
            ny: m.ny,
            r_out: m.r_out,
        }
    }

    fn cone(&mut self) -> Result<()> {
        let s = &self.cfg.samples;
        let (fit_n, points) = (s.cone_fit, s.cone_points);
        let field = PsiField::mollified(self.group, self.psi_params())?;
        let flow = PsiFlow::new(self.action, &field, self.cfg.mollifier.step)?;
        let action = self.action;
        let kf = action.k() as f64;
        let mut rng = stream(self.seed, 7);
        let r_max = self.group.domain().inradius;
        let point = |rng: &mut ChaCha8Rng| {
            BundlePoint::from_global(
                action,
                random_point(rng, r_max),
                action.point(rng.gen_range(0.0..kf)),
            )
        };
        let c1d = c1_distance(&field, self.group, s.c1_points, &mut rng);
        self.constants.push(("psi_c0_distance", c1d.c0));
        self.constants.push(("psi_c1_distance", c1d.c1));
        if fit_n < 2 {
            self.push(
                "cone",
                "fiber_growth_exponent",
                f64::NAN,
                Relation::Ge,
                self.cfg.tolerances.cone_growth,
                0,
            );
            return Ok(());
        }
        let mut growth = Vec::with_capacity(fit_n);
        for i in 0..fit_n {
            let t = 0.25 + 1.25 * i as f64 / (fit_n - 1) as f64;
            growth.push(jacobian(&flow, action, &point(&mut rng)?, t)?);
        }
        let (c1_raw, c2_raw, c3_raw) = crate::flow::cone::fit_growth(&growth)?;
        let t0 =
            ((2.0 * c3_raw / (crate::flow::cone::GROWTH_MARGIN * c1_raw)).ln() / c2_raw).max(0.05);
        let mut window = Vec::with_capacity(fit_n);
        for i in 0..fit_n {
            window.push(jacobian(
                &flow,
                action,
                &point(&mut rng)?,
                t0 * (1.0 + i as f64 / (fit_n - 1) as f64),
            )?);
        }
        let k = cone_constants(&growth, &window)?;
        let cone = ConeField::new(k.beta)?;
        let (mut worst_ratio, mut worst_growth): (f64, f64) = (0.0, f64::INFINITY);
        let mut min_expansion = f64::INFINITY;
        for _ in 0..points {
            let t = k.t0 * (1.0 + rng.gen::<f64>());
            let c = cone_check(&flow, action, &cone, &point(&mut rng)?, t)?;
            worst_ratio = worst_ratio.max(c.ratio);
            worst_growth = worst_growth.min(c.expansion.ln() - (k.c1.ln() + k.c2 * t));
            min_expansion = min_expansion.min(c.expansion);
        }
        self.push(
            "cone",
            "fiber_growth_exponent",
            k.c2,
            Relation::Ge,
            self.cfg.tolerances.cone_growth,
            growth.len(),
        );
        self.push(
            "cone",
            "beta_over_2c4",
            k.beta / (2.0 * k.c4),
            Relation::Gt,
            1.0,
            window.len(),
        );
        self.push(
            "cone",
            "image_containment_ratio",
            worst_ratio,
            Relation::Lt,
            1.0,
            points,
        );
        self.push(
            "cone",
            "growth_log_margin",
            worst_growth,
            Relation::Gt,
            0.0,
            points,
        );
        let margin = k.c2.min(self.constant_or("k2_prime", k.c2));
        self.push(
            "cone",
            "c1_distance_over_margin",
            c1d.total() / margin,
            Relation::Le,
            self.cfg.tolerances.c1_fraction,
            s.c1_points,
        );
        for (name, v) in [
            ("c1", k.c1),
            ("c2", k.c2),
            ("c3", k.c3),
            ("c4", k.c4),
            ("beta", k.beta),
            ("T", k.t0),
            ("cone_min_expansion", min_expansion),
        ] {
            self.constants.push((name, v));
        }
        // Fellow traveling of ψ-orbits from their geodesics, uniform over leaves.
        let (batches, leaves) = (s.quasigeodesic_batches, s.quasigeodesic_leaves);
        if batches == 0 || leaves == 0 {
            self.push(
                "cone",
                "quasigeodesic_spread",
                f64::NAN,
                Relation::Le,
                self.cfg.tolerances.quasigeodesic_spread,
                0,
            );
            return Ok(());
        }
        let q = quasigeodesic_uniformity(
            &flow,
            action,
            batches,
            leaves,
            self.cfg.budgets.quasigeodesic_time,
            &mut rng,
        )?;
        self.push(
            "cone",
            "quasigeodesic_spread",
            q.spread,
            Relation::Le,
            self.cfg.tolerances.quasigeodesic_spread,
            batches * leaves,
        );
        self.constants
            .push(("R", q.batch_r.iter().cloned().fold(0.0, f64::max)));
        Ok(())
    }

    fn constant_or(&self, name: &str, default: f64) -> f64 {
        self.constants
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| *v)
            .unwrap_or(default)
    }

    fn census(&mut self) -> Result<()> {
        let len = self.cfg.budgets.census_word_len;
        let tol = self.cfg.tolerances.census;
        let base_action = CircleAction::new(self.group.clone(), 1)?;
        let base = orbit_census(&base_action, len)?;
        let cover = if self.action.k() == 1 {
            base.clone()
        } else {
            orbit_census(self.action, len)?
        };
        let entries = cover.len();
        let period = cover
            .iter()
            .map(CensusEntry::period_error)
            .fold(0.0, f64::max);
        let gap = cover
            .iter()
            .map(CensusEntry::max_closure_gap)
            .fold(0.0, f64::max);
        let alternation = cover.iter().filter(|e| !e.alternates()).count();
        let k = self.action.k() as usize;
        let class_split = cover
            .iter()
            .filter(|e| e.class_count() != k || e.inverse_count() != k)
            .count();
        let pairs = homotopic_inverse_pairs(&cover);
        let bad_pairs = pairs.iter().filter(|p| !p.inverse).count();
        let rows = scaling_rows(&base, &cover);
        let bad_rows = rows.iter().filter(|r| !r.holds).count();
        self.push("census", "period_error", period, Relation::Le, tol, entries);
        self.push("census", "closure_gap", gap, Relation::Le, tol, entries);
        self.push(
            "census",
            "kind_alternation_violations",
            alternation as f64,
            Relation::Le,
            0.0,
            entries,
        );
        self.push(
            "census",
            "class_split_violations",
            class_split as f64,
            Relation::Le,
            0.0,
            entries,
        );
        self.push(
            "census",
            "inverse_pair_violations",
            bad_pairs as f64,
            Relation::Le,
            0.0,
            pairs.len(),
        );
        self.push(
            "census",
            "scaling_violations",
            bad_rows as f64,
            Relation::Le,
            0.0,
            rows.len(),
        );
        let m = base.iter().map(CensusEntry::count).min().unwrap_or(0);
        let mk = cover.iter().map(CensusEntry::count).min().unwrap_or(0);
        self.constants.push(("census_classes", entries as f64));
        self.constants.push(("census_min_count_k1", m as f64));
        self.constants.push(("census_min_count_k", mk as f64));
        if self.action.k() != 1 {
            self.census.extend(base);
        }
        self.census.extend(cover);
        self.scaling = rows;
        Ok(())
    }
}

/// Property groups of the sweep, in run order.
pub const PROPERTIES: [&str; 9] = [
    "busemann",
    "rn_derivative",
    "periodic",
    "holonomy",
    "asymptotic",
    "separation",
    "mollifier",
    "cone",
    "census",
];

type Step<'a> = fn(&mut Sweep<'a>) -> Result<()>;

/// Runs every property check of `cfg`. Failures of individual sub-checks are recorded, not
/// propagated; only an invalid configuration is an error.
pub fn certify(cfg: &RunConfig) -> Result<CertificationReport> {
    certify_properties(cfg, &PROPERTIES)
}

/// Runs the named property groups only, in the order of [`PROPERTIES`].
pub fn certify_properties(cfg: &RunConfig, only: &[&str]) -> Result<CertificationReport> {
    cfg.validate()?;
    if let Some(bad) = only.iter().find(|p| !PROPERTIES.contains(p)) {
        return Err(LabError::Config(format!(
            "unknown property group \"{bad}\""
        )));
    }
    let seed = cfg.seed()?;
    let group = SurfaceGroup::from_preset(&cfg.group.preset)?;
    let action = CircleAction::new(group.clone(), cfg.cover.k)?;
    let mut sweep = Sweep {
        cfg,
        seed,
        group: &group,
        action: &action,
        checks: Vec::new(),
        constants: vec![("delta", SURFACE_DELTA)],
        separation: Vec::new(),
        census: Vec::new(),
        scaling: Vec::new(),
    };
    let steps: [Step<'_>; 9] = [
        Sweep::busemann,
        Sweep::rn,
        Sweep::periodic,
        Sweep::holonomy,
        Sweep::asymptotic,
        Sweep::separation,
        Sweep::mollifier,
        Sweep::cone,
        Sweep::census,
    ];
    for (name, step) in PROPERTIES.into_iter().zip(steps) {
        if only.contains(&name) {
            sweep.run(name, step);
        }
    }
    Ok(CertificationReport {
        seed,
        group: group.name().to_string(),
        k: cfg.cover.k,
        checks: sweep.checks,
        constants: sweep.constants,
        separation: sweep.separation,
        census: sweep.census,
        scaling: sweep.scaling,
    })
}
