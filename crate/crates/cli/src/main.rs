mod commands;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kinfluid::config::{RunConfig, SHIPPED_SETS};
use kinfluid::suite::{CriterionOutcome, Status};

use commands::{Command, SetVerdict, VerifyDocument, VERIFY_REPORT};
use error::CliError;

/// Fluid eigenvalue branches and macroscopic limits of a weighted BGK model.
///
/// Without --config or --set every shipped parameter set is run.
#[derive(Debug, Parser)]
#[command(name = "kinfluid", version)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "set")]
    config: Option<PathBuf>,
    /// Shipped parameter set: gaussian, alpha8-beta0, alpha5.5-beta0, alpha5.5-beta2.
    #[arg(long, global = true, value_name = "NAME")]
    set: Option<String>,
    /// Output directory; one subdirectory per parameter set.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Reduced grids and doubled tolerances.
    #[arg(long, global = true)]
    fast: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Track the four fluid branches; writes branch CSVs and a census summary.
    Spectrum,
    /// Fit exponents, constants and limiting modes; writes a scaling report.
    Scaling,
    /// Evolve single Fourier modes; writes trajectory CSVs and a limit report.
    Evolve,
    /// Run every stage and print the acceptance table.
    Verify,
    /// Print the resolved configuration as JSON.
    ShowConfig,
}

const DEFAULT_OUT: &str = "results";

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name != "."
        && name != ".."
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_'))
}

fn load_configs(cli: &Cli) -> Result<Vec<RunConfig>, CliError> {
    let mut configs = match (&cli.config, &cli.set) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let cfg: RunConfig =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            vec![cfg]
        }
        (None, Some(name)) => {
            if !SHIPPED_SETS.contains(&name.as_str()) {
                return Err(CliError::Config(format!(
                    "unknown parameter set '{name}' (known: {})",
                    SHIPPED_SETS.join(", ")
                )));
            }
            vec![RunConfig::shipped(name)?]
        }
        (None, None) => SHIPPED_SETS.iter().map(|n| RunConfig::shipped(n)).collect::<Result<_, _>>()?,
    };
    for cfg in &mut configs {
        if !valid_name(&cfg.name) {
            return Err(CliError::Config(format!(
                "set name '{}' must be non-empty and use only letters, digits, '.', '-' and '_'",
                cfg.name
            )));
        }
        if cli.fast || cfg.fast {
            *cfg = cfg.clone().into_fast();
        }
    }
    Ok(configs)
}

fn out_dir(cli: &Cli, cfg: &RunConfig) -> PathBuf {
    cli.out.clone().or_else(|| cfg.output_dir.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn print_outcomes(set: &str, outcomes: &[CriterionOutcome]) {
    for o in outcomes {
        println!("{set:<16} {:>2} {:<26} {:<4} {}", o.id, o.title, o.status.as_str(), o.detail);
    }
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let configs = load_configs(cli)?;
    let command = match cli.command {
        Cmd::Spectrum => Command::Spectrum,
        Cmd::Scaling => Command::Scaling,
        Cmd::Evolve => Command::Evolve,
        Cmd::Verify => Command::Verify,
        Cmd::ShowConfig => {
            for cfg in &configs {
                print!("{}", output::to_json(cfg).map_err(|e| CliError::io(Path::new("<stdout>"), e))?);
            }
            return Ok(true);
        }
    };
    let mut verdicts = Vec::new();
    for cfg in &configs {
        let dir = commands::set_dir(&out_dir(cli, cfg), cfg);
        eprintln!("{}: {:?} -> {}", cfg.name, command, dir.display());
        let start = std::time::Instant::now();
        let outcomes = commands::run(command, cfg, &dir)?;
        eprintln!("{}: done in {:.1} s", cfg.name, start.elapsed().as_secs_f64());
        print_outcomes(&cfg.name, &outcomes);
        let passed = outcomes.iter().all(|o| o.status != Status::Fail);
        verdicts.push(SetVerdict { set: cfg.name.clone(), criteria: outcomes, passed });
    }
    let all = verdicts.iter().all(|v| v.passed);
    if command == Command::Verify {
        // The summary goes next to the per-set directories of the first
        // configuration's output root.
        let root = out_dir(cli, &configs[0]);
        let fast = configs.iter().all(|c| c.fast);
        commands::create_dir(&root)?;
        let path = root.join(VERIFY_REPORT);
        output::write_json(&path, &VerifyDocument { fast, sets: verdicts, passed: all })
            .map_err(|e| CliError::io(&path, e))?;
    }
    Ok(all)
}

fn main() -> ExitCode {
    faer::set_global_parallelism(faer::Parallelism::None);
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_names_stay_inside_the_output_directory() {
        assert!(valid_name("alpha5.5-beta2"));
        assert!(!valid_name(".."));
        assert!(!valid_name("a/b"));
        assert!(!valid_name(""));
    }

    #[test]
    fn flags_are_accepted_after_the_subcommand() {
        let cli = Cli::try_parse_from(["kinfluid", "spectrum", "--set", "gaussian", "--fast", "--out", "x"]).unwrap();
        assert!(cli.fast);
        assert_eq!(cli.set.as_deref(), Some("gaussian"));
        assert!(Cli::try_parse_from(["kinfluid", "verify", "--set", "gaussian", "--config", "c.json"]).is_err());
    }
}
