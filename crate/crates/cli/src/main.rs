use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SEMDDE_LOG", "warn")).init();
    let cli = semdde_cli::Cli::parse();
    std::process::exit(semdde_cli::run(&cli));
}
