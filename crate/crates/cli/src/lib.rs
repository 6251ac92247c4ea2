//! Configuration, experiment orchestration and report emission for the
//! `blochscatter` command-line tool.

pub mod config;
pub mod data;
pub mod experiments;
pub mod output;
pub mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{parse_config, RunConfig};
pub use experiments::Subcommand;

pub const OUT_ENV: &str = "BLOCHSCATTER_OUT";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] config::ConfigError),
    #[error("[{module}] {0}", module = .0.module())]
    Core(#[from] blochscatter_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Output directory: flag, then environment, then config, then `blochscatter-out`.
pub fn output_root(flag: Option<&Path>, env: Option<&str>, cfg: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("blochscatter-out"))
}

/// Runs one subcommand and writes its artifacts under `root/<subcommand>/`.
pub fn execute(sub: Subcommand, cfg: &RunConfig, root: &Path) -> Result<(report::Artifacts, PathBuf), CliError> {
    let start = Instant::now();
    log::info!("running {} (seed {})", sub.name(), cfg.rng_seed);
    let art = experiments::run(sub, cfg)?;
    let dir = root.join(sub.name());
    let manifest = report::emit(&dir, sub.name(), cfg, &art, start.elapsed())
        .map_err(|source| CliError::Io { path: dir.clone(), source })?;
    Ok((art, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_precedence() {
        let mut cfg = parse_config(r#"{"schema_version": 1}"#).unwrap();
        assert_eq!(output_root(None, None, &cfg), PathBuf::from("blochscatter-out"));
        cfg.output_dir = Some("c".into());
        assert_eq!(output_root(None, None, &cfg), PathBuf::from("c"));
        assert_eq!(output_root(None, Some("e"), &cfg), PathBuf::from("e"));
        assert_eq!(output_root(Some(Path::new("f")), Some("e"), &cfg), PathBuf::from("f"));
    }
}
