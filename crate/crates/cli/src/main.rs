//! Command-line driver: runs experiment files and named presets, writes CSV/JSON
//! records, and runs the self-check suite.

mod output;
mod presets;
mod runner;
mod spec;
mod validate;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use toml::{Table, Value};

use crate::spec::{apply_overrides, spec_error, Engine, ExperimentSpec, SpecError};

/// Environment variable holding the worker-thread count.
const WORKERS_ENV: &str = "NOMA_HARQ_WORKERS";

#[derive(Parser)]
#[command(name = "noma-harq", version, about = "Outage and throughput experiments for cooperative HARQ-assisted NOMA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Seed of the Monte Carlo streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials per sweep point.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// analytic-exact, analytic-approx, monte-carlo or both.
    #[arg(long, global = true)]
    engine: Option<String>,
    /// CSV destination; `-` or absent writes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write the records as JSON to this file.
    #[arg(long, global = true)]
    json: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment file (TOML).
    Run {
        spec: PathBuf,
        /// `key=value` settings applied on top of the file.
        #[arg(value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[command(flatten)]
        flags: Overrides,
    },
    /// Run a named preset: fig3a fig3b fig4a fig4b fig5a fig5b fig6 fig7 table1.
    Preset {
        name: String,
        #[arg(value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Print the resolved experiment file instead of running it.
        #[arg(long)]
        print: bool,
        #[command(flatten)]
        flags: Overrides,
    },
    /// Run the self-check suite, optionally against an experiment file's base configuration.
    Validate {
        spec: Option<PathBuf>,
        #[command(flatten)]
        flags: Overrides,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_config_error(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<SpecError>().is_some()
            || matches!(
                c.downcast_ref::<noma_harq::Error>(),
                Some(noma_harq::Error::InvalidConfig { .. })
            )
    })
}

fn configure_workers() -> anyhow::Result<()> {
    if let Ok(raw) = std::env::var(WORKERS_ENV) {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| spec_error(format!("{WORKERS_ENV} must be a positive integer, got `{raw}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    configure_workers()?;
    match cli.command {
        Command::Run { spec, set, flags } => {
            let text = std::fs::read_to_string(&spec)
                .with_context(|| format!("reading {}", spec.display()))?;
            let table: Table = text
                .parse()
                .map_err(|e| spec_error(format!("{}: {e}", spec.display())))?;
            execute(table, &set, &flags)
        }
        Command::Preset { name, set, print, flags } => {
            let text = presets::preset(&name).ok_or_else(|| {
                spec_error(format!("unknown preset `{name}` (known: {})", presets::NAMES.join(", ")))
            })?;
            let table: Table = text.parse().expect("presets are valid TOML");
            if print {
                let mut table = table;
                apply_overrides(&mut table, &set)?;
                apply_flags(&mut table, &flags)?;
                let spec = ExperimentSpec::from_table(table)?;
                print!("{}", spec::to_toml(&spec)?);
                return Ok(ExitCode::SUCCESS);
            }
            execute(table, &set, &flags)
        }
        Command::Validate { spec, flags } => {
            let base = match &spec {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    ExperimentSpec::parse(&text)?.base_point()?.cfg
                }
                None => noma_harq::Config::default().with_snr_db(40.0).with_rounds(2),
            };
            base.validate().map_err(|e| spec_error(e.to_string()))?;
            let checks = validate::run_checks(&base, flags.trials.unwrap_or(20_000), flags.seed.unwrap_or(1))?;
            let mut all = true;
            for c in &checks {
                println!("{}", c.line());
                all &= c.passed();
            }
            Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
    }
}

fn apply_flags(table: &mut Table, flags: &Overrides) -> anyhow::Result<()> {
    if let Some(seed) = flags.seed {
        table.insert("seed".into(), Value::Integer(to_i64("seed", seed)?));
    }
    if let Some(trials) = flags.trials {
        table.insert("trials".into(), Value::Integer(to_i64("trials", trials)?));
    }
    if let Some(engine) = &flags.engine {
        Engine::parse(engine)?;
        table.insert("engine".into(), Value::String(engine.clone()));
    }
    if let Some(out) = &flags.out {
        table.insert("output".into(), Value::String(out.display().to_string()));
    }
    if let Some(json) = &flags.json {
        table.insert("json".into(), Value::String(json.display().to_string()));
    }
    Ok(())
}

/// TOML integers are signed 64-bit.
fn to_i64(name: &str, v: u64) -> anyhow::Result<i64> {
    i64::try_from(v).map_err(|_| spec_error(format!("`{name}` must be below 2^63")))
}

fn execute(mut table: Table, set: &[String], flags: &Overrides) -> anyhow::Result<ExitCode> {
    apply_overrides(&mut table, set)?;
    apply_flags(&mut table, flags)?;
    let spec = ExperimentSpec::from_table(table)?;
    let result = runner::run(&spec)?;

    match spec.output.as_deref() {
        Some(path) if path != Path::new("-") => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            output::write_csv(BufWriter::new(file), &result.records)?;
        }
        _ => output::write_csv(io::stdout().lock(), &result.records)?,
    }
    if let Some(path) = &spec.json {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        output::write_json(BufWriter::new(file), &result.records)?;
    }

    let s = &result.summary;
    let mut err = io::stderr().lock();
    writeln!(
        err,
        "{}: {} points, {} records in {:.2} s",
        spec.name, s.points, s.records, s.seconds
    )?;
    if let Some((z, at)) = &s.max_z {
        writeln!(err, "max |z| analytic vs simulation: {z:.3} ({at})")?;
    }
    Ok(ExitCode::SUCCESS)
}
