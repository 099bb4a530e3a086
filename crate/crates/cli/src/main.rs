use std::process::ExitCode;

use clap::Parser;

mod args;
mod run;

use args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match cli.command.resolve() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run::dispatch(&config) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            if outcome.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
