use clap::Parser;

fn main() {
    let cli = fracluster::cli::Cli::parse();
    if let Err(e) = fracluster::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
