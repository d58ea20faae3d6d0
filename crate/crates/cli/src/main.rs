mod args;
mod commands;
mod config;
mod fail;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Command};
use fail::Failure;

enum ParseFailure {
    Clap(clap::Error),
    Config(Failure),
}

impl From<clap::Error> for ParseFailure {
    fn from(e: clap::Error) -> Self {
        ParseFailure::Clap(e)
    }
}

/// Parses argv, folding in the config file when one is named.
fn parse(argv: Vec<OsString>) -> Result<Cli, ParseFailure> {
    let cmd = Cli::command();
    // a lenient first pass finds the config file even when it supplies
    // flags the strict parse would report as missing
    let loose = cmd.clone().ignore_errors(true).try_get_matches_from(&argv)?;
    let config = loose
        .subcommand()
        .and_then(|(_, sub)| sub.get_one::<PathBuf>("config"))
        .or_else(|| loose.get_one::<PathBuf>("config"));
    let mut full = argv.clone();
    if let Some(path) = config {
        full.extend(config::config_args(path, &cmd, &loose).map_err(ParseFailure::Config)?);
    }
    let matches = cmd.try_get_matches_from(full)?;
    Ok(Cli::from_arg_matches(&matches)?)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.get())
            .build_global()
            .map_err(|e| Failure::validation(format!("--threads: {e}")))?;
    }
    log::info!(
        "{}: threads {}, {:?}",
        cli.command.name(),
        rayon::current_num_threads(),
        cli.command
    );
    match &cli.command {
        Command::Kernel(a) => commands::run_kernel(a),
        Command::Encode(a) => commands::run_encode(a),
        Command::Fuse(a) => commands::run_fuse(a),
        Command::Loss(a) => commands::run_loss(a),
        Command::Evaluate(a) => commands::run_evaluate(a),
        Command::Phantom(a) => commands::run_phantom(a),
    }
}

fn fail(f: Failure) -> ExitCode {
    eprintln!("{}", f.to_json_line());
    ExitCode::from(f.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SVLS_LOG", "warn")).init();

    let cli = match parse(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(ParseFailure::Config(f)) => return fail(f),
        Err(ParseFailure::Clap(e)) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                return ExitCode::SUCCESS;
            }
            let rendered = e.render().to_string();
            let message: Vec<&str> = rendered
                .lines()
                .take_while(|l| !l.trim().is_empty())
                .map(str::trim)
                .collect();
            return fail(Failure::validation(message.join(" ").trim_start_matches("error: ")));
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(f),
    }
}
