use clap::Parser;
use squidpulse_cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => log::info!("wrote {}", out.display()),
        Err(e) => {
            eprintln!("squidpulse {}: {e}", cli.command.name());
            std::process::exit(e.exit_code());
        }
    }
}
