use clap::Parser;
use regnoise::cli::{execute, exit_code, Cli};

fn main() {
    let result = execute(Cli::parse());
    match &result {
        Ok(o) => print!("{}", o.output),
        Err(e) => eprintln!("error: {e}"),
    }
    std::process::exit(exit_code(&result));
}
