mod args;
mod commands;
mod io;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use text2sql_core::par::ExecMode;

use args::{Cli, Command};
use commands::Ctx;
use io::{invalid, Validation};

const EXIT_VALIDATION: u8 = 1;
const EXIT_DATA: u8 = 2;

fn configure_workers(workers: Option<usize>) -> Result<()> {
    let Some(n) = workers else { return Ok(()) };
    if n == 0 {
        return Err(invalid("--workers 0: need at least one worker"));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| invalid(format!("--workers {n}: {e}")))?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    configure_workers(cli.global.workers)?;
    let mode = if cli.global.sequential { ExecMode::Sequential } else { ExecMode::default() };
    let ctx = Ctx { global: &cli.global, mode };
    match &cli.command {
        Command::Evaluate(a) => commands::evaluate(&ctx, a),
        Command::Rerank(a) => commands::rerank(&ctx, a),
        Command::Oracle(a) => commands::oracle(&ctx, a),
        Command::QpExtract(a) => commands::qp_extract(&ctx, a),
        Command::SlDiagnose(a) => commands::sl_diagnose(&ctx, a),
        Command::Serialize(a) => commands::serialize(&ctx, a),
        Command::MtMix(a) => commands::mt_mix(&ctx, a),
        Command::SplitZsg(a) => commands::split_zsg(&ctx, a),
        Command::SplitCg(a) => commands::split_cg(&ctx, a),
        Command::Stats(a) => commands::stats(&ctx, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.exit_code() == 0 { ExitCode::SUCCESS } else { ExitCode::from(EXIT_VALIDATION) };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Validation>().is_some() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::from(EXIT_DATA)
            }
        }
    }
}
