use std::io::Write;

use clap::Parser;

fn main() {
    let cli = ibmap::cli::Cli::parse();
    match ibmap::cli::run(&cli) {
        // A closed pipe on stdout is not an error worth reporting.
        Ok(out) => {
            let _ = std::io::stdout().write_all(out.as_bytes());
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
