use clap::Parser;

use relaxctrl::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
