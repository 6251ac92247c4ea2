use std::path::PathBuf;
use std::process::ExitCode;

use blochscatter::report::exit_code;
use blochscatter::{execute, output_root, parse_config, Subcommand, OUT_ENV};
use clap::Parser;

#[derive(Parser)]
#[command(name = "blochscatter", version, about = "Band structure, dispersion and small-data scattering experiments")]
struct Cli {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `rng_seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides $BLOCHSCATTER_OUT and `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", cli.config.display());
            return ExitCode::from(1);
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    let root = output_root(cli.out.as_deref(), std::env::var(OUT_ENV).ok().as_deref(), &cfg);
    match execute(cli.subcommand, &cfg, &root) {
        Ok((art, manifest)) => {
            for g in &art.gates {
                println!("{:<4} {} = {:.6e} ({})", g.verdict.as_str(), g.name, g.value, g.tolerance);
            }
            println!("manifest: {}", manifest.display());
            ExitCode::from(exit_code(art.verdict()))
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
