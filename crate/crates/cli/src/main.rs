mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use qrem_core::QremError;

/// 2: bad input, 3: a resource cap was hit, 4: numerically degenerate input.
fn exit_code(e: &QremError) -> u8 {
    if e.is_size_cap() {
        3
    } else if e.is_numerical() {
        4
    } else {
        2
    }
}

fn run(cli: Cli) -> qrem_core::Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(QremError::Domain("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| QremError::Domain(e.to_string()))?;
    }
    let caps = &cli.caps;
    match &cli.command {
        Command::Mitigate(a) => commands::mitigate_cmd(a, caps),
        Command::CalibrateSynth(a) => commands::calibrate_cmd(a),
        Command::GhzSim(a) => commands::ghz_cmd(a, caps),
        Command::MqcSim(a) => commands::mqc_cmd(a, caps),
        Command::GroverSim(a) => commands::grover_cmd(a, caps),
        Command::Expval(a) => commands::expval_cmd(a, caps),
        Command::Fidelity(a) => commands::fidelity_cmd(a, caps),
        Command::MlaeSim(a) => commands::mlae_cmd(a, caps),
        Command::Bench(a) => commands::bench_cmd(a, caps),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
