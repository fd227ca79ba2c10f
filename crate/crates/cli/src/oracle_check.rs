use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::Args;
use serde_json::json;

use strobust::envelope::Envelope;
use strobust::monitor::monitor;
use strobust::oracle::{brute_force_str, first_undominated, qualitative, DxGrid};
use strobust::predicate::{MonitorConfig, Norm};

use crate::report::envelope_json;
use crate::{load, InputArgs, EXIT_VIOLATED};

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Largest time shift Δt.
    #[arg(long, default_value_t = 2)]
    dtmax: u64,
    /// Spatial grid step of the oracle.
    #[arg(long, default_value_t = 0.25)]
    grid: f64,
    /// Largest spatial level the oracle tries.
    #[arg(long, default_value_t = 8.0)]
    cap: f64,
    /// Check this envelope CSV instead of computing one (max norm).
    #[arg(long)]
    envelope: Option<PathBuf>,
}

/// Prints a JSON verdict; exits with 2 when a Pareto point of the envelope is
/// not dominated by the oracle or non-emptiness disagrees with satisfaction.
pub fn run(args: &OracleArgs) -> Result<ExitCode> {
    let loaded = load(&args.input)?;
    let env = match &args.envelope {
        Some(path) => Envelope::load_csv(path)?,
        None => {
            let cfg = MonitorConfig::default()
                .with_dt_max(args.dtmax)
                .with_norm(Norm::Linf);
            monitor(&loaded.formula, &loaded.signal, loaded.t, &cfg)?
        }
    };
    let grid = DxGrid::new(args.grid, args.cap);
    let oracle = brute_force_str(&loaded.formula, &loaded.signal, loaded.t, args.dtmax, grid)?;
    let satisfied = qualitative(&loaded.formula, &loaded.signal, loaded.t)?;
    let witness = first_undominated(&env, &oracle, &grid);
    let sound = satisfied == !env.is_violated();
    let pass = witness.is_none() && sound;
    let verdict = json!({
        "pass": pass,
        "envelope": envelope_json(&env),
        "oracle_points": oracle.iter().map(|p| json!([p.dx, p.dt])).collect::<Vec<_>>(),
        "undominated": witness.map(|p| json!([p.dx, p.dt])),
        "satisfied": satisfied,
        "nonempty_matches_satisfaction": sound,
    });
    println!("{}", serde_json::to_string_pretty(&verdict)?);
    Ok(if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VIOLATED)
    })
}
