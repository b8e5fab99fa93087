use backdoor_cli::{run, Cli};
use clap::Parser;

fn main() {
    let report = run(&Cli::parse());
    print!("{}", report.stdout);
    eprint!("{}", report.stderr);
    std::process::exit(report.code);
}
