use clap::Parser;
use qgraph::cli::{run, Cli};
use qgraph::error::EXIT_OK;

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli, &mut std::io::stdout().lock(), &mut std::io::stderr().lock()) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
