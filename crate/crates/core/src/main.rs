use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use ctf_core::agent::AgentKind;
use ctf_core::flagforge::{builtin_flag, plant_flag, FlagSpec};
use ctf_core::harness::{
    load_dataset, load_report, read_file, render_markdown, reverify_dir, run_experiment, score_dir, write_file,
    BackendSpec, HarnessError, RunConfig,
};
use ctf_core::tabular::{export_csv, summary_stats, synth_sales};
use ctf_core::verify::MatchMode;

#[derive(Parser)]
#[command(name = "ctf", version, about = "Plant flags in sales data and see whether LLM agents find them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plant one or more flags into a CSV and write the ground truth.
    Plant {
        #[arg(long)]
        data: PathBuf,
        /// Builtin flag id (1, 2, 3) or a flag spec JSON file. Repeat to stack flags.
        #[arg(long, required = true)]
        flag: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Run an agent and persist a run directory.
    Run {
        agent: AgentKind,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        /// live, record:PATH, replay:PATH or scripted
        #[arg(long, default_value = "live")]
        backend: BackendSpec,
        #[arg(long)]
        base_url: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Flat key = value config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override one config key, e.g. --set rounds=1. Applied after --config.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-check a run's citations against the dataset.
    Verify {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Score a run's insights against ground truth.
    Score {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Require entity and lineage agreement too.
        #[arg(long)]
        strict: bool,
    },
    /// Print a markdown report for one or more runs.
    Report {
        #[arg(long, required = true)]
        run: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic sales dataset.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 9652)]
        rows: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print summary statistics for the numeric columns.
    Stats {
        #[arg(long)]
        data: PathBuf,
    },
}

fn flag_spec(arg: &str) -> Result<FlagSpec> {
    if let Ok(id) = arg.parse::<u32>() {
        return builtin_flag(id).ok_or_else(|| HarnessError::Config(format!("no builtin flag {id}")).into());
    }
    let text = read_file(Path::new(arg))?;
    serde_json::from_str(&text)
        .map_err(|e| HarnessError::Config(format!("invalid flag spec {arg}: {e}")).into())
}

fn plant(data: &Path, flags: &[String], out: &Path, truth: &Path) -> Result<()> {
    let mut table = load_dataset(data)?;
    let mut truths = Vec::new();
    for f in flags {
        let spec = flag_spec(f)?;
        let (next, t) = plant_flag(&table, &spec).map_err(|e| HarnessError::Stage {
            stage: "plant".into(),
            message: e.to_string(),
        })?;
        println!("flag {}: {} cells changed in {} rows", t.flag_id, t.changes.len(), t.touched_rows.len());
        table = next;
        truths.push(t);
    }
    write_file(out, &export_csv(&table))?;
    write_file(truth, &(serde_json::to_string_pretty(&truths)? + "\n"))?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Plant { data, flag, out, truth } => plant(&data, &flag, &out, &truth),
        Command::Run {
            agent,
            data,
            truth,
            backend,
            base_url,
            out,
            config,
            overrides,
            seed,
        } => {
            let mut cfg = RunConfig::new(agent, data, backend, out);
            cfg.truth = truth;
            if let Some(path) = config {
                cfg.apply_text(&read_file(&path)?)?;
            }
            for o in &overrides {
                let (k, v) = o
                    .split_once('=')
                    .ok_or_else(|| HarnessError::Config(format!("--set expects KEY=VALUE, got `{o}`")))?;
                cfg.set(k.trim(), v)?;
            }
            if let Some(url) = base_url {
                cfg.base_url = url;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let outcome = run_experiment(&cfg)?;
            let r = &outcome.report;
            println!(
                "{} run {}: {} insights, {} calls, captured {}/{} (top 5: {}), strict {}/{}",
                r.agent,
                r.status,
                r.insights.len(),
                r.calls,
                r.lenient.captured,
                r.lenient.total_flags,
                r.lenient.captured_at_5,
                r.strict.captured,
                r.strict.total_flags
            );
            println!("run directory: {}", outcome.dir.display());
            Ok(())
        }
        Command::Verify { run, data } => {
            let table = load_dataset(&data)?;
            let (checks, stale) = reverify_dir(&run, &table)?;
            let mut disagreements = 0;
            for c in &checks {
                let agree = c.recorded == c.recomputed;
                disagreements += usize::from(!agree);
                println!(
                    "{}\t{:?}\t{:?}{}",
                    c.id,
                    c.recorded,
                    c.recomputed,
                    if agree { "" } else { "\tMISMATCH" }
                );
            }
            for id in &stale {
                println!("view {id}: digest differs from the recorded one");
            }
            println!("{} insights, {} disagreements, {} stale views", checks.len(), disagreements, stale.len());
            if disagreements + stale.len() > 0 {
                return Err(HarnessError::Stage {
                    stage: "verify".into(),
                    message: "run does not match the dataset".into(),
                }
                .into());
            }
            Ok(())
        }
        Command::Score { run, truth, strict } => {
            let mode = if strict { MatchMode::Strict } else { MatchMode::Lenient };
            let report = score_dir(&run, &truth, mode)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Report { run, out } => {
            let reports = run.iter().map(|d| load_report(d)).collect::<Result<Vec<_>, _>>()?;
            let md = render_markdown(&reports);
            match out {
                Some(path) => write_file(&path, &md)?,
                None => print!("{md}"),
            }
            Ok(())
        }
        Command::Synth { seed, rows, out } => {
            write_file(&out, &export_csv(&synth_sales(seed, rows)))?;
            Ok(())
        }
        Command::Stats { data } => {
            let table = load_dataset(&data)?;
            let stats = summary_stats(&table).context("computing statistics")?;
            print!("{}", stats.to_text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<HarnessError>().map_or(3, HarnessError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
