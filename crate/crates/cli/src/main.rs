use clap::Parser;

use ffg_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(report) => print!("{report}"),
        Err(e) => {
            eprintln!("ffg {}: {e}", cli.command.name());
            std::process::exit(e.exit_code());
        }
    }
}
