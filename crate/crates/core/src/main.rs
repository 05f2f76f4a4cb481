use clap::Parser;
use ehrhart_core::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    if let Err(e) = run(&cli, &mut out) {
        if e.code == 0 {
            return;
        }
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}
