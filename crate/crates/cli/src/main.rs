use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use secure_cwc::baseline::run_baseline;
use secure_cwc::bench::{render_table, run_bench, BenchConfig};
use secure_cwc::circuit::{CostModel, InsecureSimBackend, StepLog};
use secure_cwc::cwc::cwc_select;
use secure_cwc::dataset::{
    load_dataset, mutual_information, normalize, ChangeSummary, Dataset, Schema,
};
use secure_cwc::protocol::{audit_run, run_improved, ImprovedConfig};
use secure_cwc::{Error, Result};

/// Consistency-based feature selection, in the clear and over simulated
/// homomorphic encryption.
#[derive(Parser)]
#[command(name = "secure-cwc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct InputOpts {
    #[arg(long, default_value = "C")]
    class_col: String,

    #[arg(long)]
    dummy_col: Option<String>,

    /// Keep contradicting and duplicate rows as they are.
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Args)]
struct SecureOpts {
    /// Width of the encrypted consistency counts (default: ceil(log2(nm + 1))).
    #[arg(long)]
    bmax: Option<usize>,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// JSON file with per-gate weights: {"xor": .., "and": .., "mux": .., "not": ..}.
    #[arg(long)]
    cost_model: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Mutual information of every feature with the class.
    Stats {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        opts: InputOpts,
    },
    /// Plaintext CWC.
    Select {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        opts: InputOpts,
    },
    /// Single-outsourcer CWC over encrypted bits.
    SecureBaseline {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        opts: InputOpts,
        #[command(flatten)]
        secure: SecureOpts,
    },
    /// Two-party CWC with a mix network.
    SecureImproved {
        #[arg(long)]
        input_a: PathBuf,
        #[arg(long)]
        input_b: PathBuf,
        #[command(flatten)]
        opts: InputOpts,
        #[command(flatten)]
        secure: SecureOpts,
        /// Write the message transcript (JSON lines) here.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Gate counts over a grid of (k, nm) cells.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [10, 50, 100])]
        k: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [100, 500, 1000])]
        nm: Vec<usize>,
        #[command(flatten)]
        secure: SecureOpts,
        /// Skip cells with k * nm above this.
        #[arg(long, default_value_t = 100_000)]
        budget: u64,
    },
}

fn load(path: &Path, opts: &InputOpts) -> Result<(Dataset, Option<ChangeSummary>)> {
    let schema = Schema {
        class_col: opts.class_col.clone(),
        dummy_col: opts.dummy_col.clone(),
    };
    let d = load_dataset(File::open(path)?, &schema)?;
    if opts.no_normalize {
        return Ok((d, None));
    }
    let (d, changes) = normalize(&d);
    Ok((d, Some(changes)))
}

fn cost_model(path: &Option<PathBuf>) -> Result<CostModel> {
    path.as_deref()
        .map_or(Ok(CostModel::default()), CostModel::load)
}

fn step_json(steps: &StepLog, model: &CostModel) -> Value {
    let estimates: serde_json::Map<String, Value> = steps
        .estimate(model)
        .into_iter()
        .map(|(step, secs)| (step, json!(secs)))
        .collect();
    json!({
        "steps": steps.steps(),
        "total": steps.total(),
        "estimated_seconds": estimates,
        "estimated_total": model.estimate(&steps.total()),
    })
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        b.extend(e);
    }
    base
}

/// Runs the command; returns the JSON report and any text for stdout.
fn run(cli: &Cli) -> Result<(Value, Option<String>)> {
    match &cli.command {
        Command::Stats { input, opts } => {
            let (d, changes) = load(input, opts)?;
            let report = mutual_information(&d)?;
            Ok((json!({ "changes": changes, "mi": report.mi }), None))
        }
        Command::Select { input, opts } => {
            let (d, changes) = load(input, opts)?;
            let result = cwc_select(&d)?;
            Ok((
                merge(
                    serde_json::to_value(&result)?,
                    json!({ "changes": changes }),
                ),
                None,
            ))
        }
        Command::SecureBaseline {
            input,
            opts,
            secure,
        } => {
            let model = cost_model(&secure.cost_model)?;
            let (d, changes) = load(input, opts)?;
            let be = InsecureSimBackend::new();
            let r = run_baseline(&d, secure.bmax, secure.seed, &be)?;
            let head = json!({
                "selected": r.selected,
                "k": r.k,
                "pairs": r.pairs,
                "b_max": r.b_max,
                "comparators": r.comparators,
                "comparators_minimal": r.comparators_minimal,
                "changes": changes,
            });
            Ok((merge(head, step_json(&r.steps, &model)), None))
        }
        Command::SecureImproved {
            input_a,
            input_b,
            opts,
            secure,
            transcript,
        } => {
            let model = cost_model(&secure.cost_model)?;
            let (da, ca) = load(input_a, opts)?;
            let (db, cb) = load(input_b, opts)?;
            let be = InsecureSimBackend::new();
            let cfg = ImprovedConfig {
                b_max: secure.bmax,
                seed: secure.seed,
                ..Default::default()
            };
            let r = run_improved(&da, &db, &cfg, &be)?;
            let audit = audit_run(&r, &InsecureSimBackend::new())?;
            if let Some(path) = transcript {
                std::fs::write(path, r.transcript.to_jsonl())?;
            }
            let head = json!({
                "selected": r.selected,
                "params": r.params,
                "comparators": r.comparators,
                "messages": r.transcript.records.len(),
                "transcript_bytes": r.transcript.total_bytes(),
                "audit": audit,
                "changes": { "a": ca, "b": cb },
            });
            Ok((merge(head, step_json(&r.steps, &model)), None))
        }
        Command::Bench {
            k,
            nm,
            secure,
            budget,
        } => {
            let cfg = BenchConfig {
                grid: k
                    .iter()
                    .flat_map(|&k| nm.iter().map(move |&nm| (k, nm)))
                    .collect(),
                b_max: secure.bmax,
                cost_model: cost_model(&secure.cost_model)?,
                seed: secure.seed,
                budget: *budget,
            };
            let report = run_bench(&cfg)?;
            let table = render_table(&report);
            Ok((serde_json::to_value(&report)?, Some(table)))
        }
    }
}

fn emit(cli: &Cli, report: &Value, table: Option<String>) -> Result<()> {
    let text = serde_json::to_string_pretty(report)? + "\n";
    match &cli.output {
        Some(path) => {
            std::fs::write(path, text)?;
            if let Some(t) = table {
                print!("{t}");
            }
        }
        None => {
            if let Some(t) = table {
                eprint!("{t}");
            }
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli).and_then(|(report, table)| emit(&cli, &report, table)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Protocol(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
