//! Command-line front end: configuration, the fitting pipeline and the
//! artifacts it writes.
//!
//! Exit codes are 0 on success, 2 for I/O, 3 for configuration and 4 for
//! numeric failures. Errors are printed to stderr as one JSON object.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;

use args::{Cli, Command};
use error::CliError;

/// Runs one subcommand; the returned string is printed on stdout.
pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Fit { image, out, fit } => {
            let cfg = commands::load_config(fit.config.as_deref(), &fit.overrides())?;
            let report = commands::cmd_fit(&image, &cfg, &out)?;
            Ok(serde_json::json!({
                "converged": report.converged,
                "iterations": report.iterations,
                "phi_final": report.phi_final,
                "length": report.params.length,
            })
            .to_string())
        }
        Command::Synth {
            scene,
            out,
            truth,
            eight_bit,
        } => {
            commands::cmd_synth(&scene, &out, truth.as_deref(), eight_bit)?;
            Ok(String::new())
        }
        Command::Oracle {
            spec,
            out,
            px_per_meter,
            origin,
        } => {
            commands::cmd_oracle(&spec, &out, px_per_meter, origin)?;
            Ok(String::new())
        }
        Command::Unwrap {
            image,
            report,
            out,
            max_asymmetry,
        } => {
            let a = commands::cmd_unwrap(&image, &report, &out, max_asymmetry)?;
            Ok(serde_json::json!({ "asymmetry": a }).to_string())
        }
        Command::SweepOrder {
            image,
            min,
            max,
            out,
            fit,
        } => {
            // the sweep sets the order itself
            let mut overrides = fit.overrides();
            overrides.set("order", min);
            let cfg = commands::load_config(fit.config.as_deref(), &overrides)?;
            let rows = commands::cmd_sweep_order(&image, &cfg, min, max, &out)?;
            let last = rows.last().expect("sweep has at least one row");
            Ok(serde_json::json!({ "orders": rows.len(), "last_status": last.status }).to_string())
        }
    }
}
