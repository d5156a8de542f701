//! Command implementations behind the `kvmeta` binary.

pub mod args;
pub mod commands;
pub mod manifest;
pub mod spec;
pub mod svg;
pub mod tables;

pub use args::{Cli, Command};
pub use commands::RunStatus;

/// Runs one parsed command line.
pub fn run(
    cli: Cli,
    argv: &[String],
    stop: &std::sync::atomic::AtomicBool,
) -> anyhow::Result<RunStatus> {
    use commands::*;
    Ok(match cli.command {
        Command::Analyze(a) => analyze(&a, argv)?.0,
        Command::Bench(a) => bench(&a, argv)?.0,
        Command::Serve(a) => {
            serve_until(&a, argv, stop)?;
            RunStatus::Completed
        }
        Command::Synth(a) => synth(&a, argv)?.0,
        Command::Report(a) => report(&a, argv)?.0,
    })
}
