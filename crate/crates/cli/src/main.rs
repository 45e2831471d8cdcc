use clap::Parser;

fn main() {
    let cli = outsample_cli::Cli::parse();
    if let Err(e) = outsample_cli::run(cli) {
        eprintln!("outsample: {e}");
        std::process::exit(e.exit_code());
    }
}
