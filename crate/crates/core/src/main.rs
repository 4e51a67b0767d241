use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use pilot_reuse::assignment::StrategyRegistry;
use pilot_reuse::harness::{self, ExperimentPlan, SweepAxis};

#[derive(Parser)]
#[command(name = "pilot-reuse", version, about = "Pilot-reuse Monte Carlo simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    Paper,
}

#[derive(clap::Args)]
struct PlanArgs {
    /// Plan file (TOML with [experiment] and [system] tables).
    #[arg(short, long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in plan used when no file is given.
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(short, long)]
    workers: Option<usize>,
    /// Sweep axis: snr_db, antennas_m or pilot_len_tau.
    #[arg(long)]
    axis: Option<String>,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<f64>>,
    /// Comma-separated method names.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    scenarios: Option<usize>,
    #[arg(long)]
    activity_draws: Option<usize>,
    #[arg(long)]
    channel_draws: Option<usize>,
    #[arg(long)]
    data_symbols: Option<usize>,
    /// Override any plan key, e.g. `system.snr_reference=transmit`.
    #[arg(long = "set", value_name = "TABLE.KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment and write summary.csv, rates.csv, cdf.csv and metadata.json.
    Run {
        #[command(flatten)]
        plan: PlanArgs,
        /// Output directory.
        #[arg(short, long)]
        out: PathBuf,
        /// Also write covariances, features and assignments of scenario 0.
        #[arg(long)]
        export_scenario: bool,
    },
    /// Check a plan without running it.
    Validate {
        #[command(flatten)]
        plan: PlanArgs,
        /// Print the resolved plan as TOML.
        #[arg(long)]
        print: bool,
    },
    /// Run the reference-oracle suite.
    Oracle {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Reduced trial counts.
        #[arg(long)]
        quick: bool,
    },
}

/// Parse `text` as a TOML value, falling back to a bare string.
fn parse_value(text: &str) -> toml::Value {
    format!("v = {text}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

fn apply_set(table: &mut toml::Table, assignment: &str) -> anyhow::Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .with_context(|| format!("override `{assignment}` is not KEY=VALUE"))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    let (last, parents) = path.split_last().expect("split yields one item");
    let mut cur = table;
    for p in parents {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .with_context(|| format!("`{p}` is not a table"))?;
    }
    cur.insert(last.to_string(), parse_value(value.trim()));
    Ok(())
}

fn load_plan(args: &PlanArgs) -> anyhow::Result<ExperimentPlan> {
    let base = match &args.config {
        Some(path) => ExperimentPlan::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => match args.preset {
            Preset::Desk => ExperimentPlan::desk(),
            Preset::Paper => ExperimentPlan::paper(),
        },
    };
    let mut plan = if args.sets.is_empty() {
        base
    } else {
        let mut table: toml::Table = base.to_toml_string().parse()?;
        for s in &args.sets {
            apply_set(&mut table, s)?;
        }
        ExperimentPlan::from_toml_str(&toml::to_string(&table)?)?
    };
    let e = &mut plan.experiment;
    if let Some(axis) = &args.axis {
        e.axis = axis.parse::<SweepAxis>()?;
    }
    if let Some(v) = &args.values {
        e.values = v.clone();
    }
    if let Some(m) = &args.methods {
        e.methods = m.clone();
    }
    for (slot, value) in [
        (&mut e.scenarios, args.scenarios),
        (&mut e.activity_draws, args.activity_draws),
        (&mut e.channel_draws, args.channel_draws),
        (&mut e.data_symbols, args.data_symbols),
        (&mut e.workers, args.workers),
    ] {
        if let Some(v) = value {
            *slot = v;
        }
    }
    if let Some(seed) = args.seed {
        plan.system.seed = seed;
    }
    plan.validate(&StrategyRegistry::with_builtins())?;
    Ok(plan)
}

fn run(plan: &ExperimentPlan, out: &Path, export: bool) -> anyhow::Result<()> {
    let report = harness::run_experiment(plan)?;
    let paths = harness::emit_report(&report, out).with_context(|| format!("writing {}", out.display()))?;
    if export {
        harness::export_scenario(plan, 0, &out.join("scenario_0"))?;
    }
    for p in &report.points {
        println!(
            "{:<12} {}={:<6} ser={:.4e} [{:.4e}, {:.4e}] sum_rate={:.4}",
            p.method,
            plan.experiment.axis.as_str(),
            p.axis_value,
            p.ser,
            p.ser_ci.0,
            p.ser_ci.1,
            p.sum_rate
        );
    }
    println!(
        "wrote {} files to {} in {:.1} s",
        paths.len(),
        out.display(),
        report.metadata.elapsed_seconds
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            plan,
            out,
            export_scenario,
        } => load_plan(&plan).and_then(|p| run(&p, &out, export_scenario)),
        Command::Validate { plan, print } => load_plan(&plan).map(|p| {
            if print {
                print!("{}", p.to_toml_string());
            }
            println!("plan is valid ({} hash {})", p.experiment.axis.as_str(), p.config_hash());
        }),
        Command::Oracle { seed, quick } => (|| {
            let checks = harness::oracle::run_suite(seed, quick)?;
            let mut failed = 0;
            for c in &checks {
                println!("{} {:<22} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                bail!("{failed} oracle check(s) failed");
            }
            Ok(())
        })(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
