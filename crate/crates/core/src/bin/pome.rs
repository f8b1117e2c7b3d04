use clap::Parser;

fn main() {
    let cli = pome::cli::Cli::parse();
    if let Err(e) = pome::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(pome::cli::exit_code(&e));
    }
}
