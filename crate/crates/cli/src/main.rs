use clap::error::ErrorKind;
use clap::Parser;
use motifvar_cli::args::Cli;
use motifvar_cli::{Category, CliError};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            std::process::exit(0);
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", CliError::new(Category::Usage, first).line());
            std::process::exit(Category::Usage.exit_code());
        }
    };
    env_logger::Builder::new().parse_filters(&cli.log).format_timestamp(None).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool: {e}");
        }
    }
    if let Err(e) = motifvar_cli::run(cli) {
        eprintln!("{}", e.line());
        std::process::exit(e.category.exit_code());
    }
}
