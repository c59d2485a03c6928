use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::{
    emit, parse_scenario, render_attack, render_comparison, CliError, OutputFormat, RunConfig,
    DEFAULT_TRIALS, THREADS_ENV,
};
use crate::experiment::{attacker_dominance_with, run_experiment_with, RunOptions};
use crate::hash_lottery::{calibrate_difficulty, LotteryMode};
use crate::stake_model::{validate_scenario, LotteryParams, Mechanism, Scenario};

/// Expected eligible miners per tick used when a lottery needs calibrating.
pub const DEFAULT_TARGET_RATE: f64 = 0.01;

const DEFAULT_ATTACK_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "pos-lab",
    version,
    about = "Proof-of-stake leader-election laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and report win frequencies against theory.
    Simulate(RunArgs),
    /// Run one stake distribution under every mechanism and both models.
    Compare(RunArgs),
    /// Contrast a staker's win share under majority capture and a mechanism.
    Attack(AttackArgs),
    /// Print the lottery difficulty for a target eligibility rate.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output file; stdout when omitted.
    #[arg(long = "out")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TRIALS, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    /// Overrides the scenario's master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct AttackArgs {
    /// Attacker's share of total stake, as a decimal in [0, 1].
    #[arg(long)]
    ratio: String,
    #[arg(long, value_parser = parse_mechanism, default_value = "BlackcoinNxt")]
    mechanism: Mechanism,
    #[arg(long, default_value_t = DEFAULT_TRIALS, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Expected eligible miners per tick.
    #[arg(long, default_value_t = DEFAULT_TARGET_RATE)]
    rate: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

fn parse_mechanism(s: &str) -> Result<Mechanism, String> {
    Mechanism::ALL
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| {
            let names: Vec<_> = Mechanism::ALL.iter().map(|m| m.name()).collect();
            format!(
                "unknown mechanism `{s}`, expected one of {}",
                names.join(", ")
            )
        })
}

/// Entry point; returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("pos-lab: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let options = RunOptions {
        threads: threads_from_env()?,
        ..RunOptions::default()
    };
    match cli.command {
        Command::Simulate(args) => {
            let config = run_config(&args);
            let scenario =
                validate_scenario(parse_scenario(&config.scenario_path, config.seed_override)?)?;
            let result = run_experiment_with(&scenario, config.trials, &options)?;
            super::write_results(&result, &config)
        }
        Command::Compare(args) => {
            let base = parse_scenario(&args.scenario, args.seed)?;
            let mut results = Vec::with_capacity(Mechanism::ALL.len());
            for mechanism in Mechanism::ALL {
                let scenario = with_calibrated_lottery(base.clone().with_mechanism(mechanism))?;
                results.push(run_experiment_with(&scenario, args.trials, &options)?);
            }
            emit(
                &render_comparison(&results, args.output.format),
                args.output.out.as_deref(),
            )
        }
        Command::Attack(args) => {
            let (alpha, beta) = parse_ratio(&args.ratio)?;
            let seed = args.seed.unwrap_or(DEFAULT_ATTACK_SEED);
            let scenario = Scenario::from_stakes(
                format!("attack-{}", args.ratio),
                args.mechanism,
                seed,
                &[alpha, beta - alpha],
            );
            let scenario = with_calibrated_lottery(scenario)?;
            let report = attacker_dominance_with(&scenario, 0, args.trials, &options)?;
            emit(
                &render_attack(&report, args.output.format),
                args.output.out.as_deref(),
            )
        }
        Command::Calibrate(args) => {
            let scenario = parse_scenario(&args.scenario, args.seed)?;
            let mode = lottery_mode(scenario.mechanism).ok_or_else(|| {
                CliError::Usage(format!(
                    "calibrate needs a PeercoinAge or BlackcoinNxt scenario, got {}",
                    scenario.mechanism
                ))
            })?;
            let difficulty = calibrate_difficulty(&scenario.miners, args.rate, mode)?;
            // Validate the rest of the scenario with the calibrated parameters.
            validate_scenario(
                scenario
                    .clone()
                    .with_lottery(LotteryParams::new(difficulty)),
            )?;
            emit(
                &render_calibration(
                    scenario.mechanism,
                    args.rate,
                    difficulty,
                    args.output.format,
                ),
                args.output.out.as_deref(),
            )
        }
    }
}

fn run_config(args: &RunArgs) -> RunConfig {
    RunConfig {
        scenario_path: args.scenario.clone(),
        trials: args.trials,
        seed_override: args.seed,
        output_path: args.output.out.clone(),
        output_format: args.output.format,
    }
}

fn lottery_mode(mechanism: Mechanism) -> Option<LotteryMode> {
    match mechanism {
        Mechanism::PeercoinAge => Some(LotteryMode::Peercoin),
        Mechanism::BlackcoinNxt => Some(LotteryMode::BlackcoinNxt),
        _ => None,
    }
}

/// Fills in lottery parameters at the default rate when a lottery mechanism
/// has none, then validates.
fn with_calibrated_lottery(scenario: Scenario) -> Result<Scenario, CliError> {
    let scenario = match (lottery_mode(scenario.mechanism), scenario.lottery) {
        (Some(mode), None) => {
            let d = calibrate_difficulty(&scenario.miners, DEFAULT_TARGET_RATE, mode)?;
            scenario.with_lottery(LotteryParams::new(d))
        }
        _ => scenario,
    };
    Ok(validate_scenario(scenario)?)
}

fn render_calibration(
    mechanism: Mechanism,
    rate: f64,
    difficulty: u64,
    format: OutputFormat,
) -> String {
    match format {
        OutputFormat::Csv => format!(
            "mechanism,target_rate,difficulty\n{mechanism},{},{difficulty}\n",
            super::format_sig12(rate)
        ),
        OutputFormat::Json => {
            let v = serde_json::json!({
                "mechanism": mechanism,
                "target_rate": rate,
                "difficulty": difficulty,
            });
            let mut s = serde_json::to_string_pretty(&v).expect("serializes");
            s.push('\n');
            s
        }
    }
}

/// Parses a decimal stake share exactly into `(alpha, beta)` with `beta` a
/// power of ten no smaller than 100.
fn parse_ratio(text: &str) -> Result<(u64, u64), CliError> {
    let bad = || CliError::Usage(format!("--ratio expects a decimal in [0, 1], got `{text}`"));
    let (int, frac) = text.split_once('.').unwrap_or((text, ""));
    let digits_ok = |s: &str| s.chars().all(|c| c.is_ascii_digit());
    if (int.is_empty() && frac.is_empty()) || !digits_ok(int) || !digits_ok(frac) || frac.len() > 15
    {
        return Err(bad());
    }
    let places = frac.len().max(2) as u32;
    let beta = 10u64.pow(places);
    let int: u64 = if int.is_empty() {
        0
    } else {
        int.parse().map_err(|_| bad())?
    };
    let frac_val: u64 = if frac.is_empty() {
        0
    } else {
        frac.parse::<u64>().map_err(|_| bad())? * 10u64.pow(places - frac.len() as u32)
    };
    let alpha = int
        .checked_mul(beta)
        .and_then(|a| a.checked_add(frac_val))
        .ok_or_else(bad)?;
    if alpha > beta {
        return Err(bad());
    }
    Ok((alpha, beta))
}

fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
    }
}
