use clap::Parser;

fn main() {
    let cli = ar1risk_cli::Cli::parse();
    if let Err(e) = ar1risk_cli::run(&cli, &mut std::io::stderr()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
