//! `masi`: synthesis, dictionaries, datasets, training and evaluation.

mod args;
mod commands;
mod error;

use clap::error::ErrorKind;
use clap::Parser;

fn main() {
    let cli = match args::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            std::process::exit(0);
        }
        Err(e) => {
            let _ = e.print();
            std::process::exit(1);
        }
    };
    if let Err(e) = commands::dispatch(cli.command) {
        eprintln!("masi: {e}");
        std::process::exit(e.code());
    }
}
