use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use anosov_lab::config::RunConfig;
use anosov_lab::geometry::HyperbolicPoint;
use anosov_lab::group::Word;
use anosov_lab::io::{self, FlowKind, TraceRequest, TraceStart};
use anosov_lab::LabError;

#[derive(Parser, Debug)]
#[command(
    name = "anosov-lab",
    version,
    about = "Anosov flows on circle bundles over a genus 2 surface"
)]
struct Cli {
    /// TOML run configuration. Defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed. Required by verify unless set in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory. Overrides ANOSOV_LAB_OUT and `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cover index.
    #[arg(long, global = true)]
    k: Option<u32>,
    /// Census word-length budget.
    #[arg(long, global = true)]
    max_word_len: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run the certification sweep and write the report.
    Verify,
    /// Trace one orbit of φ or ψ to trace.csv and trace.svg.
    Trace(TraceArgs),
    /// Periodic-orbit census per free-homotopy class.
    Census,
    /// Chart coordinates ζ and Radon-Nikodym derivatives of the generators.
    MeasureCharts,
    /// Leaves of the horizontal foliation toward f(p) over the octagon tiling.
    Render {
        #[arg(long, default_value_t = 0.0)]
        p: f64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FlowArg {
    Phi,
    Psi,
}

#[derive(Args, Debug)]
struct TraceArgs {
    /// Start at the point (u, v) of the disk.
    #[arg(
        long,
        requires = "v",
        conflicts_with = "periodic",
        allow_negative_numbers = true
    )]
    u: Option<f64>,
    #[arg(long, requires = "u", allow_negative_numbers = true)]
    v: Option<f64>,
    /// Fiber coordinate of a point start.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    s: f64,
    /// Start on the periodic orbit of this word.
    #[arg(long, required_unless_present = "u")]
    periodic: Option<String>,
    /// Which fixed point of the word, in fiber order.
    #[arg(long, default_value_t = 0)]
    index: usize,
    /// Flow time. Defaults to one period for periodic starts.
    #[arg(long, allow_negative_numbers = true)]
    t: Option<f64>,
    #[arg(long, value_enum, default_value_t = FlowArg::Phi)]
    flow: FlowArg,
    /// Sampling interval.
    #[arg(long, default_value_t = 0.05)]
    dt: f64,
}

enum Failure {
    Usage(String),
    Run(LabError),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        match e {
            LabError::Config(_) | LabError::WordParse(_) => Failure::Usage(e.to_string()),
            e => Failure::Run(e),
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig, Failure> {
    let src = match &cli.config {
        Some(p) => Some(
            std::fs::read_to_string(p)
                .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        ),
        None => None,
    };
    let require_seed = matches!(cli.cmd, Cmd::Verify);
    let cfg = RunConfig::from_parts(src.as_deref(), require_seed, |c| {
        if let Some(s) = cli.seed {
            c.samples.seed = Some(s);
        }
        if let Some(k) = cli.k {
            c.cover.k = k;
        }
        if let Some(n) = cli.max_word_len {
            c.budgets.census_word_len = n;
        }
    });
    cfg.map_err(|e| match (&cli.config, e) {
        (Some(p), LabError::Config(m)) => {
            Failure::Usage(format!("config error: {}: {m}", p.display()))
        }
        (_, e) => e.into(),
    })
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    let cfg = load(cli)?;
    let out = cli.out.clone().unwrap_or_else(|| cfg.out_dir());
    match &cli.cmd {
        Cmd::Verify => {
            let report = io::cmd_verify(&cfg, &out)?;
            print!("{}", report.to_text());
            Ok(report.passed())
        }
        Cmd::Trace(a) => {
            let start = match (&a.periodic, a.u, a.v) {
                (Some(w), _, _) => TraceStart::Periodic {
                    word: w.parse::<Word>()?,
                    index: a.index,
                },
                (None, Some(u), Some(v)) => TraceStart::Point {
                    x: HyperbolicPoint::new(u, v)?,
                    s: a.s,
                },
                _ => return Err(Failure::Usage("trace needs --u/--v or --periodic".into())),
            };
            let flow = match a.flow {
                FlowArg::Phi => FlowKind::Phi,
                FlowArg::Psi => FlowKind::Psi,
            };
            let t = io::cmd_trace(
                &cfg,
                &TraceRequest {
                    start,
                    t: a.t,
                    flow,
                    dt: a.dt,
                },
                &out,
            )?;
            println!(
                "{} samples -> {}, {}",
                t.rows.len(),
                t.csv.display(),
                t.svg.display()
            );
            if let Some(gap) = t.closure_gap {
                println!("closure gap {gap:.3e}");
            }
            Ok(true)
        }
        Cmd::Census => {
            let entries = io::cmd_census(&cfg, &out)?;
            println!(
                "{} classes -> {}",
                entries.len(),
                out.join("census.csv").display()
            );
            Ok(true)
        }
        Cmd::MeasureCharts => {
            let (charts, rn) = io::cmd_measure_charts(&cfg, &out)?;
            println!("{}, {}", charts.display(), rn.display());
            Ok(true)
        }
        Cmd::Render { p } => {
            println!("{}", io::cmd_render(&cfg, *p, &out)?.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("anosov-lab: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("anosov-lab: {e}");
            ExitCode::from(1)
        }
    }
}
