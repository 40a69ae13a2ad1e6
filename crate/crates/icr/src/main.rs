use clap::Parser;

fn main() {
    let cli = icr::cli::Cli::parse();
    std::process::exit(icr::cli::run(cli));
}
