use clap::Parser;
use sharpscope::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
