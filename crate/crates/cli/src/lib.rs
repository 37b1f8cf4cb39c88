pub mod args;
pub mod artifacts;
pub mod commands;
pub mod error;
pub mod plot;

pub use error::{Category, CliError, Result};

pub fn run(cli: args::Cli) -> Result<()> {
    commands::dispatch(cli.command)
}
