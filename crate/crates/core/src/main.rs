use clap::Parser;

fn main() {
    let cli = optidx::cli::Cli::parse();
    if let Err(e) = optidx::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
