use clap::Parser;
use segwise_cli::args::Cli;

fn main() {
    // SEGWISE_THREADS caps internal parallelism; 0 or unset means automatic.
    let cap = std::env::var("SEGWISE_THREADS").ok().and_then(|v| v.parse::<usize>().ok());
    segwise::experiment::configure_threads(cap);

    let cli = Cli::parse();
    match segwise_cli::run::run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("{}", err.render());
            std::process::exit(err.exit_code());
        }
    }
}
