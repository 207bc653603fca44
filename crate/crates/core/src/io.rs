//! Subcommand drivers and their deterministic CSV and SVG outputs.
//!
//! Floats are written as `{:.12e}`. SVG pictures map the closed unit disk onto a 1000×1000
//! viewport.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::action::{equivariant_map, CircleAction, CirclePoint};
use crate::census::{orbit_census, CensusEntry};
use crate::certify::{certify, CertificationReport};
use crate::config::RunConfig;
use crate::error::{LabError, Result};
use crate::flow::periodic::periodic_orbit;
use crate::flow::psi::{PsiField, PsiFlow, PsiParams};
use crate::flow::{BundlePoint, FlowEngine, OrbitSample};
use crate::geometry::{flow_toward, HyperbolicPoint, Isometry};
use crate::group::{SurfaceGroup, Word};
use crate::measure::{ChartAtlas, PullbackMeasure};

pub const VIEWPORT: f64 = 1000.0;
const DISK_RADIUS_PX: f64 = 480.0;

fn f(x: f64) -> String {
    format!("{x:.12e}")
}

fn csv_err(e: csv::Error) -> LabError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    LabError::Csv {
        line,
        msg: e.to_string(),
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| LabError::Io(e.into_error()))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, bytes)?;
    Ok(path)
}

fn parse_f64(rec: &csv::StringRecord, i: usize, line: usize) -> Result<f64> {
    let field = rec.get(i).ok_or_else(|| LabError::Csv {
        line,
        msg: format!("missing column {i}"),
    })?;
    field.trim().parse().map_err(|_| LabError::Csv {
        line,
        msg: format!("bad number \"{field}\""),
    })
}

// ---------------------------------------------------------------------------------------------
// verify

pub const CHECKS_HEADER: [&str; 9] = [
    "property", "name", "status", "measured", "relation", "bound", "slack", "samples", "detail",
];

pub fn checks_csv(report: &CertificationReport) -> Result<Vec<u8>> {
    csv_bytes(
        &CHECKS_HEADER,
        report.checks.iter().map(|c| {
            vec![
                c.property.to_string(),
                c.name.to_string(),
                c.status.as_str().to_string(),
                f(c.measured),
                c.relation.as_str().to_string(),
                f(c.bound),
                f(c.slack()),
                c.samples.to_string(),
                c.detail.clone(),
            ]
        }),
    )
}

pub fn constants_csv(report: &CertificationReport) -> Result<Vec<u8>> {
    csv_bytes(
        &["name", "value"],
        report
            .constants
            .iter()
            .map(|(n, v)| vec![n.to_string(), f(*v)]),
    )
}

pub const SEPARATION_HEADER: [&str; 7] = [
    "direction",
    "epsilon",
    "kappa",
    "pairs",
    "separated",
    "t_max",
    "t_mean",
];

pub fn separation_csv(report: &CertificationReport) -> Result<Vec<u8>> {
    let rows = report.separation.iter().flat_map(|t| {
        t.rows.iter().map(move |r| {
            vec![
                t.direction.to_string(),
                f(t.epsilon),
                f(r.kappa),
                r.pairs.to_string(),
                r.separated.to_string(),
                f(r.t_max),
                f(r.t_mean),
            ]
        })
    });
    csv_bytes(&SEPARATION_HEADER, rows)
}

/// Writes `report.txt`, `checks.csv`, `constants.csv`, `separation.csv` and `census.csv`.
pub fn write_report(report: &CertificationReport, dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(vec![
        write_file(dir, "report.txt", report.to_text().as_bytes())?,
        write_file(dir, "checks.csv", &checks_csv(report)?)?,
        write_file(dir, "constants.csv", &constants_csv(report)?)?,
        write_file(dir, "separation.csv", &separation_csv(report)?)?,
        write_file(dir, "census.csv", &census_csv(&report.census)?)?,
    ])
}

/// Runs the certification sweep and writes the report files into `out`.
pub fn cmd_verify(cfg: &RunConfig, out: &Path) -> Result<CertificationReport> {
    let report = certify(cfg)?;
    write_report(&report, out)?;
    Ok(report)
}

// ---------------------------------------------------------------------------------------------
// census

pub const CENSUS_HEADER: [&str; 13] = [
    "class",
    "k",
    "exponent",
    "displacement",
    "descends",
    "translation_length",
    "count",
    "class_count",
    "inverse_count",
    "alternates",
    "period_error",
    "max_closure_gap",
    "respelled",
];

pub fn census_csv(entries: &[CensusEntry]) -> Result<Vec<u8>> {
    csv_bytes(
        &CENSUS_HEADER,
        entries.iter().map(|e| {
            vec![
                e.key.to_string(),
                e.k.to_string(),
                e.exponent.to_string(),
                e.displacement.to_string(),
                e.descends.to_string(),
                f(e.translation_length),
                e.count().to_string(),
                e.class_count().to_string(),
                e.inverse_count().to_string(),
                e.alternates().to_string(),
                f(e.period_error()),
                f(e.max_closure_gap()),
                e.orbits.iter().filter(|o| o.respelled).count().to_string(),
            ]
        }),
    )
}

/// One parsed row of `census.csv`: class, cover and orbit count.
#[derive(Clone, Debug, PartialEq)]
pub struct CensusRow {
    pub class: String,
    pub k: u32,
    pub count: usize,
}

pub fn read_census_csv(bytes: &[u8]) -> Result<Vec<CensusRow>> {
    let mut r = csv::Reader::from_reader(bytes);
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = i + 2;
        let bad = |msg: &str| LabError::Csv {
            line,
            msg: msg.to_string(),
        };
        out.push(CensusRow {
            class: rec.get(0).ok_or_else(|| bad("missing class"))?.to_string(),
            k: rec
                .get(1)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad("bad k"))?,
            count: rec
                .get(6)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad("bad count"))?,
        });
    }
    Ok(out)
}

/// Census of the configured cover up to `budgets.census_word_len`, written to `census.csv`.
pub fn cmd_census(cfg: &RunConfig, out: &Path) -> Result<Vec<CensusEntry>> {
    let action = CircleAction::new(SurfaceGroup::from_preset(&cfg.group.preset)?, cfg.cover.k)?;
    let entries = orbit_census(&action, cfg.budgets.census_word_len)?;
    write_file(out, "census.csv", &census_csv(&entries)?)?;
    Ok(entries)
}

// ---------------------------------------------------------------------------------------------
// trace

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowKind {
    Phi,
    Psi,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TraceStart {
    /// A point of `H²` and a fiber coordinate on `R/kZ`.
    Point { x: HyperbolicPoint, s: f64 },
    /// The start of the periodic orbit through the `index`-th fixed point of `ρ_k(word)`.
    Periodic { word: Word, index: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRequest {
    pub start: TraceStart,
    /// Flow time; one period for periodic starts when absent.
    pub t: Option<f64>,
    pub flow: FlowKind,
    pub dt: f64,
}

/// One trace sample: global position `x`, local position `z ∈ D`, fiber coordinates and the
/// domain word with `x = word·z`.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub x: [f64; 2],
    pub z: [f64; 2],
    pub s: f64,
    pub s_loc: f64,
    pub word: Word,
}

pub const TRACE_HEADER: [&str; 8] = ["t", "x_u", "x_v", "z_u", "z_v", "s", "s_loc", "word"];

impl TraceRow {
    fn from_sample(action: &CircleAction, sample: &OrbitSample) -> Self {
        let pt = &sample.point;
        let x = pt.x(action);
        let z = pt.local();
        Self {
            t: sample.t,
            x: [x.u, x.v],
            z: [z.u, z.v],
            s: pt.p().s(),
            s_loc: pt.s_loc(),
            word: pt.word().clone(),
        }
    }

    fn record(&self) -> Vec<String> {
        vec![
            f(self.t),
            f(self.x[0]),
            f(self.x[1]),
            f(self.z[0]),
            f(self.z[1]),
            f(self.s),
            f(self.s_loc),
            self.word.to_string(),
        ]
    }
}

pub fn trace_csv(rows: &[TraceRow]) -> Result<Vec<u8>> {
    csv_bytes(&TRACE_HEADER, rows.iter().map(TraceRow::record))
}

pub fn read_trace_csv(bytes: &[u8]) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != TRACE_HEADER {
        return Err(LabError::Csv {
            line: 1,
            msg: "unexpected trace header".into(),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = i + 2;
        let word = rec
            .get(7)
            .unwrap_or("")
            .parse()
            .map_err(|e: LabError| LabError::Csv {
                line,
                msg: e.to_string(),
            })?;
        out.push(TraceRow {
            t: parse_f64(&rec, 0, line)?,
            x: [parse_f64(&rec, 1, line)?, parse_f64(&rec, 2, line)?],
            z: [parse_f64(&rec, 3, line)?, parse_f64(&rec, 4, line)?],
            s: parse_f64(&rec, 5, line)?,
            s_loc: parse_f64(&rec, 6, line)?,
            word,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct TraceOutput {
    pub rows: Vec<TraceRow>,
    /// Distance in `D` between the first and last local positions, for periodic starts.
    pub closure_gap: Option<f64>,
    pub target: CirclePoint,
    pub csv: PathBuf,
    pub svg: PathBuf,
}

fn psi_params(cfg: &RunConfig) -> PsiParams {
    let m = &cfg.mollifier;
    PsiParams {
        scale: m.scale,
        nr: m.nr,
        ny: m.ny,
        r_out: m.r_out,
    }
}

/// Traces one orbit of `φ` or `ψ`, writing `trace.csv` and `trace.svg`.
pub fn cmd_trace(cfg: &RunConfig, req: &TraceRequest, out: &Path) -> Result<TraceOutput> {
    let group = SurfaceGroup::from_preset(&cfg.group.preset)?;
    let action = CircleAction::new(group, cfg.cover.k)?;
    let engine = FlowEngine::new(&action);
    if !(req.dt > 0.0) {
        return Err(LabError::Guard {
            what: "trace dt",
            value: req.dt,
            limit: 0.0,
        });
    }
    let (start, t, periodic) = match &req.start {
        TraceStart::Point { x, s } => {
            let t = req
                .t
                .ok_or_else(|| LabError::Config("trace needs a flow time".into()))?;
            (
                BundlePoint::from_global(&action, *x, action.point(*s))?,
                t,
                false,
            )
        }
        TraceStart::Periodic { word, index } => {
            let fps = action.fixed_points(word)?;
            let fp = fps.get(*index).ok_or_else(|| {
                LabError::Config(format!(
                    "{word} has {} fixed points, index {index} requested",
                    fps.len()
                ))
            })?;
            let orbit = periodic_orbit(&engine, word, fp.point, None)?;
            (orbit.start, req.t.unwrap_or(orbit.period), req.t.is_none())
        }
    };
    let samples = match req.flow {
        FlowKind::Phi => engine.flow_phi_sampled(&start, t, Some(req.dt))?.1.samples,
        FlowKind::Psi => {
            let field = PsiField::mollified(action.group(), psi_params(cfg))?;
            PsiFlow::new(&action, &field, cfg.mollifier.step)?
                .trace(&start, t, Some(req.dt), &[])?
                .samples
        }
    };
    let rows: Vec<TraceRow> = samples
        .iter()
        .map(|s| TraceRow::from_sample(&action, s))
        .collect();
    let closure_gap = periodic.then(|| {
        let (a, b) = (&rows[0], &rows[rows.len() - 1]);
        (a.z[0] - b.z[0]).hypot(a.z[1] - b.z[1])
    });
    let csv = write_file(out, "trace.csv", &trace_csv(&rows)?)?;
    let svg = write_file(
        out,
        "trace.svg",
        trace_svg(&action, &rows, start.s_loc()).as_bytes(),
    )?;
    Ok(TraceOutput {
        rows,
        closure_gap,
        target: start.p(),
        csv,
        svg,
    })
}

// ---------------------------------------------------------------------------------------------
// SVG

fn px(u: f64, v: f64) -> (f64, f64) {
    (
        0.5 * VIEWPORT + DISK_RADIUS_PX * u,
        0.5 * VIEWPORT - DISK_RADIUS_PX * v,
    )
}

fn svg_open() -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{v}\" height=\"{v}\" viewBox=\"0 0 {v} {v}\">",
        v = VIEWPORT
    );
    let _ = writeln!(
        s,
        "<rect width=\"{v}\" height=\"{v}\" fill=\"white\"/>",
        v = VIEWPORT
    );
    let (cx, cy) = px(0.0, 0.0);
    let _ = writeln!(
        s,
        "<circle cx=\"{cx:.3}\" cy=\"{cy:.3}\" r=\"{DISK_RADIUS_PX:.3}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>"
    );
    s
}

fn polyline(s: &mut String, pts: &[HyperbolicPoint], stroke: &str, width: f64, closed: bool) {
    if pts.len() < 2 {
        return;
    }
    let coords: Vec<String> = pts
        .iter()
        .map(|p| {
            let (x, y) = px(p.u, p.v);
            format!("{x:.3},{y:.3}")
        })
        .collect();
    let tag = if closed { "polygon" } else { "polyline" };
    let _ = writeln!(
        s,
        "<{tag} points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"{width}\"/>",
        coords.join(" ")
    );
}

fn octagon(s: &mut String, g: &Isometry, group: &SurfaceGroup, stroke: &str, width: f64) {
    let pts: Vec<HyperbolicPoint> = group
        .domain()
        .boundary_samples(32)
        .into_iter()
        .map(|p| g.apply(p))
        .collect();
    polyline(s, &pts, stroke, width, true);
}

fn boundary_marker(s: &mut String, theta: f64, fill: &str) {
    let (x, y) = px(theta.cos(), theta.sin());
    let _ = writeln!(
        s,
        "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"7\" fill=\"{fill}\"/>"
    );
}

/// The orbit projected into `D`, one polyline between consecutive domain changes, and the
/// boundary target `f(s_loc)` of the start.
pub fn trace_svg(action: &CircleAction, rows: &[TraceRow], s_loc: f64) -> String {
    let mut s = svg_open();
    octagon(&mut s, &Isometry::IDENTITY, action.group(), "#444444", 1.5);
    let mut piece: Vec<HyperbolicPoint> = Vec::new();
    let mut word: Option<&Word> = None;
    for r in rows {
        if word.is_some_and(|w| w != &r.word) {
            polyline(&mut s, &piece, "#c0392b", 2.0, false);
            piece.clear();
        }
        word = Some(&r.word);
        piece.push(HyperbolicPoint {
            u: r.z[0],
            v: r.z[1],
        });
    }
    polyline(&mut s, &piece, "#c0392b", 2.0, false);
    if let Some(first) = rows.first() {
        let (x, y) = px(first.z[0], first.z[1]);
        let _ = writeln!(
            s,
            "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"4\" fill=\"#c0392b\"/>"
        );
    }
    boundary_marker(&mut s, std::f64::consts::TAU * s_loc, "#2471a3");
    s.push_str("</svg>\n");
    s
}

/// Leaves `H² × {p}` of the horizontal foliation: geodesics toward `f(p)` through a grid of
/// points, over the tiles `γD` for words up to length 2.
pub fn render_leaves_svg(action: &CircleAction, p: CirclePoint) -> Result<String> {
    let group = action.group();
    let mut s = svg_open();
    for w in group.enumerate_words(2)? {
        let g = group.evaluate(&w);
        let width = if w.is_empty() { 1.5 } else { 0.6 };
        octagon(&mut s, &g, group, "#888888", width);
    }
    let xi = equivariant_map(p);
    for i in 0..24 {
        let theta = std::f64::consts::TAU * i as f64 / 24.0;
        for r in [0.6, 1.6] {
            let x = HyperbolicPoint::polar(r, theta);
            let pts: Vec<HyperbolicPoint> = (0..=120)
                .map(|j| flow_toward(x, xi, -6.0 + 0.1 * j as f64))
                .collect();
            polyline(&mut s, &pts, "#1e8449", 0.8, false);
        }
    }
    boundary_marker(&mut s, xi.theta(), "#2471a3");
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn cmd_render(cfg: &RunConfig, p: f64, out: &Path) -> Result<PathBuf> {
    let action = CircleAction::new(SurfaceGroup::from_preset(&cfg.group.preset)?, cfg.cover.k)?;
    let svg = render_leaves_svg(&action, action.point(p))?;
    write_file(out, "leaves.svg", svg.as_bytes())
}

// ---------------------------------------------------------------------------------------------
// measure-charts

pub const CHARTS_HEADER: [&str; 3] = ["anchor", "s", "zeta"];
pub const RN_HEADER: [&str; 4] = ["word", "s", "rn_derivative", "log_rn_derivative"];

/// Writes `charts.csv` (the coordinates `ζ_a(s) = ν_o([a, s])` over each chart) and `rn.csv`
/// (the derivatives for every generator and its inverse on a grid).
pub fn cmd_measure_charts(cfg: &RunConfig, out: &Path) -> Result<(PathBuf, PathBuf)> {
    let k = cfg.cover.k;
    let action = CircleAction::new(SurfaceGroup::from_preset(&cfg.group.preset)?, k)?;
    let measure = PullbackMeasure::new(k);
    let atlas = ChartAtlas::uniform(measure, 4 * k as usize, 0.5)?;
    let per_chart = 64;
    let mut rows = Vec::new();
    for &a in atlas.anchors() {
        for i in 0..per_chart {
            let sp = CirclePoint::new(a.s() + atlas.width() * i as f64 / per_chart as f64, k);
            rows.push(vec![f(a.s()), f(sp.s()), f(atlas.chart_coordinate(a, sp)?)]);
        }
    }
    let charts = write_file(out, "charts.csv", &csv_bytes(&CHARTS_HEADER, rows)?)?;
    let grid = 256 * k as usize;
    let mut rn_rows = Vec::new();
    for l in crate::group::Letter::ALL {
        let w = Word::letter(l);
        for i in 0..grid {
            let sp = action.point(k as f64 * i as f64 / grid as f64);
            let d = measure.rn_derivative(&action, &w, sp);
            rn_rows.push(vec![w.to_string(), f(sp.s()), f(d), f(d.ln())]);
        }
    }
    let rn = write_file(out, "rn.csv", &csv_bytes(&RN_HEADER, rn_rows)?)?;
    Ok((charts, rn))
}
