// SPDX-License-Identifier: Apache-2.0

//! `friedrichs` command-line scenario runner.
//!
//! Exit status: 0 when every run is certified similar, 2 when a verdict is
//! inconclusive, 1 on any error (a JSON failure report is still written).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use friedrichs::error::{Error, Result};
use friedrichs::majorants;
use friedrichs::report;
use friedrichs::scenario::{self, Command, Format, ScenarioConfig};

#[derive(Parser, Debug)]
#[command(name = "friedrichs", version, about = "Similarity transforms for Volterra perturbations of multiplication operators")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML scenario file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the grid size.
    #[arg(long, global = true)]
    grid: Option<usize>,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,

    /// Preset name (overrides the config's preset).
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Preset parameter, repeatable.
    #[arg(long = "param", global = true, value_name = "KEY=VALUE", value_parser = parse_param)]
    params: Vec<(String, f64)>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Build V and W and certify applicability.
    Analyze,
    /// Also construct, invert and verify the transform I + K.
    Transform,
    /// Also scan the norms of exp(itT).
    Evolve,
    /// Repeat a command over the [sweep] axis of the config.
    Sweep,
    /// Print the preset catalog as JSON.
    ListPresets,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum FormatArg {
    Json,
    Csv,
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("value of `{k}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

fn build_config(cli: &Cli) -> Result<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            scenario::parse_config(&text)?
        }
        None => {
            let name = cli
                .preset
                .as_deref()
                .ok_or_else(|| Error::InvalidInput("either --config or --preset is required".into()))?;
            ScenarioConfig::for_preset(name)
        }
    };
    if let Some(name) = &cli.preset {
        if *name != cfg.preset.name {
            cfg.preset.name = name.clone();
            cfg.preset.params.clear();
            cfg.preset.path = None;
        }
    }
    for (k, v) in &cli.params {
        cfg.preset.params.insert(k.clone(), *v);
    }
    if let Some(n) = cli.grid {
        cfg.grid_n = n;
    }
    if let Some(f) = cli.format {
        cfg.output.format = match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        };
    }
    if let Some(out) = &cli.out {
        cfg.output.path = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_out(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: &Cli, command: Command) -> Result<i32> {
    let cfg = build_config(cli)?;
    let report = scenario::run_scenario(&cfg, command)?;
    let text = match cfg.output.format {
        Format::Json => report::emit_json(&report),
        Format::Csv => report::emit_csv(&report)?,
    };
    write_out(cfg.output.path.as_ref(), &text)?;
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::ListPresets => {
            let text = serde_json::to_string_pretty(&majorants::catalog()).expect("catalog serializes");
            println!("{text}");
            return ExitCode::SUCCESS;
        }
        Cmd::Analyze => Command::Analyze,
        Cmd::Transform => Command::Transform,
        Cmd::Evolve => Command::Evolve,
        Cmd::Sweep => Command::Sweep,
    };
    match run(&cli, command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            let text = report::failure_json(command.as_str(), &e);
            // the failure report goes where the report would have gone
            if write_out(cli.out.as_ref(), &text).is_err() {
                print!("{text}");
            }
            ExitCode::from(1)
        }
    }
}
