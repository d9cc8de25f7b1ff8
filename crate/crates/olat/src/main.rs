//! Binary entry point for the `olat` command-line tool.

fn main() {
    std::process::exit(olat::cli::run(std::env::args()));
}
