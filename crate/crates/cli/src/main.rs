use clap::Parser;
use swarmer_cli::{execute, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SWARMER_LOG", "error")).init();
    std::process::exit(execute(Cli::parse()));
}
