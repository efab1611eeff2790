#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod failure;

use clap::Parser;

use config::{Cli, Command};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.run.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    let result = config::resolve(&cli.run).and_then(|cfg| match &cli.command {
        None => commands::solve(&cfg),
        Some(Command::GroundState) => commands::ground_state(&cfg),
        Some(Command::Sweep(args)) => commands::sweep(&cfg, args),
        Some(Command::Lemmas(args)) => commands::lemmas(&cfg, args),
    });
    if let Err(f) = result {
        eprintln!("solve: {f}");
        std::process::exit(f.exit_code());
    }
}
