use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use derivation_lab::adversary::{
    attack_scenario, evaluate_attack, run_attack_suite, suite_base_config, AttackId, AttackSpec, SuiteError,
};
use derivation_lab::cost::CostWeights;
use derivation_lab::experiments::{
    experiment_3_base, run_equivalence, run_experiment_1, run_experiment_2, run_experiment_3, ExperimentError,
    ExperimentResult, Metric, DEFAULT_OUTAGE_BLOCKS, DEFAULT_TIMEOUTS,
};
use derivation_lab::l1::{L1Error, ScenarioConfig};
use derivation_lab::optimized::PipelineMode;

#[derive(Parser)]
#[command(name = "derivlab", version, about = "Baseline vs. prefeed+nonce derivation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario config (JSON). Defaults depend on the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for CSV and plot data.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Cost weights (JSON).
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Channel-timeout sweep.
    Exp1 {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_TIMEOUTS)]
        timeouts: Vec<u64>,
    },
    /// Channel-timeout sweep with every header bloom saturated.
    Exp2 {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_TIMEOUTS)]
        timeouts: Vec<u64>,
    },
    /// Batcher outage replay.
    Exp3 {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = DEFAULT_OUTAGE_BLOCKS)]
        outage_blocks: u64,
    },
    /// Soundness attack suite, or a single attack from a JSON spec.
    Attacks {
        #[command(flatten)]
        common: Common,
        /// Number of seeds, starting at --seed (default 0).
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        /// Run only this attack spec (JSON).
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Output equivalence over seeded scenarios without batcher changes.
    Equiv {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        scenarios: u64,
    },
}

/// Failure with a stable code for scripts.
#[derive(Debug)]
struct Violation {
    code: &'static str,
    message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for Violation {}

fn violation(code: &'static str, message: impl Into<String>) -> anyhow::Error {
    Violation { code, message: message.into() }.into()
}

fn error_code(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(v) = cause.downcast_ref::<Violation>() {
            return v.code;
        }
        if let Some(e) = cause.downcast_ref::<ExperimentError>() {
            return e.code();
        }
        if let Some(e) = cause.downcast_ref::<SuiteError>() {
            return e.code();
        }
        if let Some(e) = cause.downcast_ref::<L1Error>() {
            return e.code();
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return "InvalidConfig";
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "IoError";
        }
    }
    "Error"
}

fn load_config(common: &Common, default: ScenarioConfig) -> anyhow::Result<ScenarioConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ScenarioConfig::from_json(&text)?
        }
        None => default,
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn load_weights(common: &Common) -> anyhow::Result<CostWeights> {
    match &common.weights {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(serde_json::from_str(&text)?)
        }
        None => Ok(CostWeights::default()),
    }
}

fn write_out(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn emit_table(common: &Common, name: &str, result: &ExperimentResult) -> anyhow::Result<()> {
    let csv = result.to_csv()?;
    print!("{csv}");
    write_out(&common.out, name, &csv)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Exp1 { common, timeouts } => {
            let cfg = load_config(&common, ScenarioConfig::default())?;
            let result = run_experiment_1(&cfg, load_weights(&common)?, &timeouts)?;
            emit_table(&common, "exp1.csv", &result)
        }
        Command::Exp2 { common, timeouts } => {
            let cfg = load_config(&common, ScenarioConfig::default())?;
            let result = run_experiment_2(&cfg, load_weights(&common)?, &timeouts)?;
            emit_table(&common, "exp2.csv", &result)?;
            for row in &result.rows {
                if row.baseline.receipt != row.optimized.receipt {
                    let diff = row.diff(Metric::Receipt)?;
                    return Err(violation("ReceiptParityViolation", format!("row {}: receipt diff {diff:.2}%", row.label)));
                }
            }
            Ok(())
        }
        Command::Exp3 { common, outage_blocks } => {
            let cfg = load_config(&common, experiment_3_base())?;
            let series = run_experiment_3(&cfg, load_weights(&common)?, outage_blocks)?;
            let csv = series.to_csv();
            print!("{csv}");
            write_out(&common.out, "exp3.csv", &csv)?;
            write_out(&common.out, "exp3_baseline.dat", &series.plot_data(PipelineMode::Baseline))?;
            write_out(&common.out, "exp3_optimized.dat", &series.plot_data(PipelineMode::Optimized))?;
            println!("peak_ratio={:.4} elevated_ranges={}", series.peak_ratio(), series.elevated_ranges());
            Ok(())
        }
        Command::Attacks { common, seeds, spec } => {
            let base = load_config(&common, suite_base_config())?;
            let first = common.seed.unwrap_or(0);
            let reports = match spec {
                Some(path) => {
                    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    let spec = AttackSpec::from_json(&text)?;
                    let scenario = attack_scenario(&base, first, spec.id() == AttackId::A5)?;
                    vec![evaluate_attack(&scenario, &spec, first)]
                }
                None => run_attack_suite(&base, first..first + seeds)?,
            };
            let mut lines = String::new();
            for r in &reports {
                println!("{r}");
                lines.push_str(&format!("{r}\n"));
            }
            write_out(&common.out, "attacks.txt", &lines)?;
            let failed = reports.iter().filter(|r| !r.pass).count();
            if failed > 0 {
                return Err(violation("AttackUndefended", format!("{failed} of {} attack runs failed", reports.len())));
            }
            Ok(())
        }
        Command::Equiv { common, scenarios } => {
            let first = common.seed.unwrap_or(0);
            let matched = run_equivalence(first..first + scenarios, load_weights(&common)?)?;
            println!("equivalent_scenarios={matched}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error_code={}", error_code(&err));
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
