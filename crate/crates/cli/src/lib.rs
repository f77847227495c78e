//! Command-line driver: reads a JSON run config, dispatches a subcommand
//! from the [`commands`] registry and writes CSV tables plus a manifest.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod table;
pub mod verify;

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Parser;

use crate::commands::{commands, Context};
use crate::error::CliError;
use crate::table::sha256_hex;

#[derive(Debug, Parser)]
#[command(
    name = "ismq",
    version,
    about = "Quantization of in-homogeneous self-similar measures"
)]
pub struct Args {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    pub threads: Option<usize>,
    /// One of: antichain, bounds, dims, empirical, report, verify.
    #[arg(long)]
    pub subcommand: String,
}

/// Runs one invocation and returns the process exit code.
pub fn run(args: &Args) -> i32 {
    match execute(args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(args: &Args) -> Result<(), CliError> {
    let registry = commands();
    let command = registry.get(&args.subcommand).ok_or_else(|| {
        CliError::Config(format!(
            "unknown subcommand `{}`; expected one of: {}",
            args.subcommand,
            registry.names().join(", ")
        ))
    })?;
    let (raw, bytes) = config::load(&args.config)?;
    let cfg = raw.resolve(args.seed)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| cfg.raw.output_dir.clone());
    std::fs::create_dir_all(&out)?;
    let mut ctx = Context::new(cfg, out);

    let mut body = || command.run(&mut ctx);
    match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?
            .install(body)?,
        None => body()?,
    }

    let mut outputs = BTreeMap::new();
    for t in &ctx.tables {
        outputs.insert(t.name(), t.write(&ctx.out)?);
    }
    if args.subcommand == "report" {
        let md = commands::summary(&ctx);
        std::fs::write(ctx.out.join("summary.md"), &md)?;
        outputs.insert("summary.md", sha256_hex(md.as_bytes()));
    }
    let config_sha = sha256_hex(&bytes);
    let manifest = manifest::Manifest {
        tool: "ismq",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: &args.subcommand,
        config_sha256: &config_sha,
        seed: ctx.cfg.seed,
        derived_seeds: &ctx.seeds,
        outputs,
        checks: manifest::checks(&ctx.checks),
        notes: &ctx.notes,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(ctx.out.join("manifest.json"), json + "\n")?;

    if let Some(c) = ctx.checks.iter().find(|c| !c.passed) {
        let failed: Vec<&str> = ctx
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        eprintln!("failed checks: {}", failed.join(", "));
        return Err(CliError::Invariant {
            check: c.name.clone(),
            detail: c.detail.clone(),
        });
    }
    Ok(())
}
