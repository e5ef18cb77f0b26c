//! Command-line front end for the Glauber-Kawasaki critical-dynamics
//! toolkit.
//!
//! Usage: gk <command> [--config FILE] [--key value]...
//!
//! Exit codes: 0 success, 1 statistical failure, 2 usage error,
//! 3 runtime/budget error.

mod commands;
mod config;
mod output;

use commands::{CliError, Outcome};
use config::ExperimentConfig;

const USAGE: &str = "\
usage: gk <command> [--config FILE] [--key value]...

commands:
  simulate        trajectories of the particle system (traj=1 by default)
  ensemble        alias of simulate for multi-trajectory runs
  sample-measure  draw configurations from a measure spec
  kernel-g        pair-correlation kernel: coefficients, grid, jump check
  sde             Euler-Maruyama paths of the magnetisation SDE
  pde             hydrodynamic reaction-diffusion profile
  fast-field      draws of the limiting Gaussian fast field
  exact adjoint   per-state adjoint table against the closed form
  exact entropy   entropy-production inequality along a time grid
  exact tv        Monte Carlo engine vs master equation (total variation)
  analyze         recompute statistics from a stored run directory
  calibrate       statistical tests against their own null

config files hold key=value lines; --key value flags override them.
Output goes to a fresh run directory under $GK_OUTPUT_ROOT (default
./gk-runs), with a manifest.json that hashes every artifact.";

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    std::process::exit(match run(&args) {
        Ok(Outcome::Pass) => 0,
        Ok(Outcome::StatFail) => {
            eprintln!("statistical failure (see reports)");
            1
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\n{USAGE}");
            2
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("runtime error: {msg}");
            3
        }
    });
}

fn run(args: &[String]) -> Result<Outcome, CliError> {
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help" {
        println!("{USAGE}");
        return Ok(Outcome::Pass);
    }
    let mut command = args[0].clone();
    let mut rest = &args[1..];
    if command == "exact" {
        let op = rest
            .first()
            .filter(|s| !s.starts_with("--"))
            .ok_or_else(|| CliError::Usage("exact needs adjoint | entropy | tv".into()))?;
        command = format!("exact-{op}");
        rest = &rest[1..];
    }

    // config file first, flags override
    let mut cfg = ExperimentConfig::default();
    let mut flags: Vec<String> = Vec::new();
    let mut i = 0;
    while i < rest.len() {
        if rest[i] == "--config" {
            let file = rest
                .get(i + 1)
                .ok_or_else(|| CliError::Usage("--config is missing its value".into()))?;
            let text = std::fs::read_to_string(file)
                .map_err(|e| CliError::Usage(format!("cannot read config {file:?}: {e}")))?;
            let parsed = ExperimentConfig::parse_file_text(&text)
                .map_err(|e| CliError::Usage(format!("bad config file:\n{e}")))?;
            for (k, v) in parsed.entries {
                cfg.entries.insert(k, v);
            }
            if !parsed.command.is_empty() && parsed.command != command {
                return Err(CliError::Usage(format!(
                    "config file is for command {:?}, invoked as {command:?}",
                    parsed.command
                )));
            }
            i += 2;
        } else {
            flags.push(rest[i].clone());
            i += 1;
        }
    }
    cfg.command = command.clone();
    config::apply_flags(&mut cfg, &flags)
        .map_err(|e| CliError::Usage(format!("bad flags:\n{e}")))?;

    match command.as_str() {
        "simulate" | "ensemble" => commands::cmd_simulate(&cfg),
        "sample-measure" => commands::cmd_sample_measure(&cfg),
        "kernel-g" => commands::cmd_kernel_g(&cfg),
        "sde" => commands::cmd_sde(&cfg),
        "pde" => commands::cmd_pde(&cfg),
        "fast-field" => commands::cmd_fast_field(&cfg),
        "exact-adjoint" => commands::cmd_exact_adjoint(&cfg),
        "exact-entropy" => commands::cmd_exact_entropy(&cfg),
        "exact-tv" => commands::cmd_exact_tv(&cfg),
        "analyze" => commands::cmd_analyze(&cfg),
        "calibrate" => commands::cmd_calibrate(&cfg),
        other => Err(CliError::Usage(format!("unknown command {other:?}"))),
    }
}
