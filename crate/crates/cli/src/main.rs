use std::process;

use clap::Parser;
use lbf_cli::{config, execute, exit_code, Cli};

fn main() {
    let args = match config::merge_config_file(std::env::args_os().collect()) {
        Ok(args) => args,
        Err(e) => {
            eprintln!("error: {e}");
            process::exit(exit_code(&e));
        }
    };
    let cli = Cli::parse_from(args);
    if let Err(e) = execute(&cli) {
        eprintln!("error: {e}");
        process::exit(exit_code(&e));
    }
}
