//! `strobust`: monitor STL specifications for spatiotemporal robustness
//! envelopes, explain the binding conjunct, and generate case-study inputs.

mod generate;
mod oracle_check;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use strobust::monitor::{explain, Explanation};
use strobust::predicate::{MonitorConfig, Norm};
use strobust::signal::{PaddingPolicy, Signal};
use strobust::spec::{parse_spec, Formula};

/// Exit code when the specification is violated at level zero.
const EXIT_VIOLATED: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "strobust", version, about)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the robustness envelope of a specification at one time.
    Monitor(RunArgs),
    /// Like `monitor`, plus one envelope per top-level conjunct and the
    /// conjunct that binds at every Δt.
    Explain {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated conjunct labels.
        #[arg(long, value_delimiter = ',')]
        labels: Option<Vec<String>>,
    },
    /// Write a synthetic case study (signal, spec and settings).
    Generate {
        #[arg(value_enum)]
        case: Case,
        #[arg(long)]
        out: PathBuf,
        /// Robotaxi only: a vehicle-only signal and a parked pedestrian.
        #[arg(long)]
        fixed_pedestrian: bool,
    },
    /// Compare an envelope with the brute-force oracle on a small instance.
    OracleCheck(oracle_check::OracleArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Case {
    F16like,
    Robotaxi,
}

#[derive(Args, Debug, Clone)]
struct InputArgs {
    /// Signal CSV with header `t,x1,...,xn` and consecutive integer times.
    #[arg(long)]
    signal: PathBuf,
    /// Specification text file.
    #[arg(long)]
    spec: PathBuf,
    /// Evaluation time (default: first sample time).
    #[arg(long)]
    t: Option<i64>,
    /// `strict` rejects reads outside the signal, `clamp` repeats the end samples.
    #[arg(long, default_value = "strict")]
    padding: PaddingPolicy,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Largest time shift Δt.
    #[arg(long, default_value_t = 50)]
    dtmax: u64,
    /// Spatial norm, `l2` or `linf`.
    #[arg(long, default_value = "l2")]
    norm: Norm,
    /// Output directory for CSV envelopes and `report.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reference paths: direct window scans and full shell enumeration.
    #[arg(long)]
    naive: bool,
    /// Include per-node-kind timings in the report.
    #[arg(long)]
    timing: bool,
}

struct Loaded {
    signal: Signal,
    spec_text: String,
    formula: Formula,
    t: i64,
}

fn load(input: &InputArgs) -> Result<Loaded> {
    let signal = Signal::load_csv(&input.signal)?.with_padding(input.padding);
    let spec_text = std::fs::read_to_string(&input.spec)
        .with_context(|| format!("reading {}", input.spec.display()))?;
    let formula = parse_spec(&spec_text, signal.dim())
        .with_context(|| format!("parsing {}", input.spec.display()))?;
    let t = input.t.unwrap_or(signal.t_lo());
    Ok(Loaded {
        signal,
        spec_text,
        formula,
        t,
    })
}

fn run_monitor(run: &RunArgs, labels: Option<&[String]>, with_details: bool) -> Result<ExitCode> {
    let loaded = load(&run.input)?;
    let cfg = MonitorConfig {
        dt_max: run.dtmax,
        norm: run.norm,
        naive: run.naive,
        decompose: !run.naive,
        ..MonitorConfig::default()
    };
    let start = Instant::now();
    let ex = explain(&loaded.formula, &loaded.signal, loaded.t, &cfg, labels)?;
    let elapsed = start.elapsed();
    log_timing(&ex, elapsed);
    println!("{}", ex.root());
    if let Some(dir) = &run.out {
        write_outputs(dir, &loaded, run, &ex, with_details, elapsed)?;
    }
    if ex.root().is_violated() {
        Ok(ExitCode::from(EXIT_VIOLATED))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn log_timing(ex: &Explanation, total: std::time::Duration) {
    for (kind, d) in &ex.evaluation.timing {
        info!("{kind}: {:.3} ms", d.as_secs_f64() * 1e3);
    }
    info!("total: {:.3} ms", total.as_secs_f64() * 1e3);
}

fn write_outputs(
    dir: &Path,
    loaded: &Loaded,
    run: &RunArgs,
    ex: &Explanation,
    with_details: bool,
    elapsed: std::time::Duration,
) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    ex.root().save_csv(dir.join("root.csv"))?;
    if with_details {
        for (label, env) in &ex.subformulas {
            env.save_csv(dir.join(format!("{label}.csv")))?;
        }
        report::write_binding(&dir.join("binding.csv"), &ex.binding)?;
    }
    let rep = report::Report::new(
        &loaded.spec_text,
        ex,
        run.norm,
        run.timing.then_some(elapsed),
    );
    rep.save(&dir.join("report.json"))
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Monitor(run) => run_monitor(&run, None, false),
        Command::Explain { run, labels } => run_monitor(&run, labels.as_deref(), true),
        Command::Generate {
            case,
            out,
            fixed_pedestrian,
        } => {
            if fixed_pedestrian && case != Case::Robotaxi {
                bail!("--fixed-pedestrian only applies to robotaxi");
            }
            match case {
                Case::F16like => generate::f16like(&out)?,
                Case::Robotaxi => generate::robotaxi(&out, fixed_pedestrian)?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::OracleCheck(args) => oracle_check::run(&args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("STR_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.jobs {
        Some(0) => Err(anyhow::anyhow!("--jobs must be at least 1")),
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .context("building thread pool")
            .and_then(|pool| pool.install(|| dispatch(cli))),
        None => dispatch(cli),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
