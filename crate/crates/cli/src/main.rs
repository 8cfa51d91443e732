use std::process::ExitCode;

use clap::Parser;
use urgentcare_cli::error::EXIT_USAGE;
use urgentcare_cli::{print_checks, run, Cli, Outcome};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(Outcome::Stage(m)) => {
            println!("{}: wrote {} files", m.stage, m.outputs.len());
            ExitCode::SUCCESS
        }
        Ok(Outcome::Checks(checks)) => {
            print_checks(&checks);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code)
        }
    }
}
