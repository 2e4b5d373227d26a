use clap::Parser;

fn main() {
    let cli = sendal::cli::Cli::parse();
    if let Err(e) = sendal::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
