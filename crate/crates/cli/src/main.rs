use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use mrfuse::bench::{
    calibrate, cells_csv, emit_report, parse_cells_csv, parse_records_jsonl, records_jsonl, run_trial,
    sweep_with_records, summarize, CalibrationSpec, FreeParam, ReportFormat, SweepSpec, Table5,
};
use mrfuse::config::{parse_config, FusionConfig};
use mrfuse::engines::EngineProfiles;
use mrfuse::scene::load_context;
use mrfuse::seed::Seed;
use mrfuse::tracegen::{generate_scenario, parse_trace, serialize_trace, ScenarioOp, ScenarioParams};
use mrfuse::types::Combo;

#[derive(Parser)]
#[command(name = "mrfuse", version, about = "Multimodal fusion pipeline simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay one trace and print one JSON record per interaction.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        trace: PathBuf,
        /// `A`, `B` or a scene file.
        #[arg(long, default_value = "A")]
        scene: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
    /// Run tier combinations over generated scenarios.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "A,B")]
        contexts: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "locate,describe")]
        ops: Vec<ScenarioOp>,
        #[arg(long, default_value_t = 30)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Restrict to these combinations, e.g. `HHLH,LHLH`.
        #[arg(long, value_delimiter = ',')]
        combos: Vec<Combo>,
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
    /// Fit engine parameters to the published grid.
    Calibrate {
        #[arg(long, default_value = "data/table5.csv")]
        targets: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Starting profile; the built-in one if absent.
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 3000)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a generated trace as JSON lines.
    GenTrace {
        #[arg(long)]
        op: ScenarioOp,
        #[arg(long, default_value = "A")]
        context: String,
        #[arg(long, default_value_t = 30)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Standard output if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render the human report for a sweep directory.
    Report {
        #[arg(long = "in")]
        dir: PathBuf,
    },
}

fn profiles(path: Option<&Path>) -> Result<EngineProfiles> {
    match path {
        Some(p) => EngineProfiles::load(&p.to_string_lossy()).with_context(|| format!("loading {}", p.display())),
        None => Ok(EngineProfiles::paper()),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, trace, scene, seed, profiles: p } => {
            let config = match config {
                Some(path) => parse_config(&read(&path)?).with_context(|| format!("in {}", path.display()))?,
                None => FusionConfig::default(),
            };
            let events = parse_trace(&read(&trace)?).with_context(|| format!("in {}", trace.display()))?;
            let scene = load_context(&scene)?;
            let records = run_trial(&config, &profiles(p.as_deref())?, &events, &scene, Seed(seed))?;
            print!("{}", records_jsonl(&records));
            let (lat, se, acc, acc_se) = summarize(&records);
            eprintln!(
                "{} interactions, {}: latency {lat:.1} ± {se:.1} ms, accuracy {acc:.1} ± {acc_se:.1} %",
                records.len(),
                config.combo()
            );
        }
        Command::Sweep { contexts, ops, n, seed, out, combos, profiles: p } => {
            let scenes = contexts.iter().map(|c| load_context(c)).collect::<Result<Vec<_>, _>>()?;
            let mut spec = SweepSpec::new(scenes, ops, n, Seed(seed));
            if !combos.is_empty() {
                spec.combos = combos;
            }
            let (cells, records) = sweep_with_records(&spec, &profiles(p.as_deref())?)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write(&out.join("cells.csv"), &cells_csv(&cells))?;
            write(&out.join("records.jsonl"), &records_jsonl(&records))?;
            let report = emit_report(&cells, &records, ReportFormat::Table)?;
            write(&out.join("report.txt"), &report)?;
            print!("{report}");
        }
        Command::Calibrate { targets, out, profiles: p, n, budget, seed } => {
            let table = Table5::load(&targets.to_string_lossy())?;
            let targets = table.all_targets();
            let scenes = vec![load_context("A")?, load_context("B")?];
            let mut spec = CalibrationSpec::new(scenes, Seed(seed));
            spec.n_per_cell = n;
            spec.budget = budget;
            spec.free = FreeParam::ALL.to_vec();
            let result = calibrate(&targets, &profiles(p.as_deref())?, &spec)?;
            if !result.converged {
                eprintln!("warning: evaluation budget {budget} exhausted; writing best parameters found");
            }
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            write(&out, &result.to_document())?;
            println!("loss {:.3} after {} evaluations", result.loss, result.evaluations);
            for c in &result.cells {
                println!(
                    "{} {:<8} {}  latency {:>7.1} (target {:>6.0})  accuracy {:>5.1} (target {:>5.1})",
                    c.target.context, c.target.op, c.target.combo, c.latency_ms, c.target.latency_ms, c.accuracy_pct,
                    c.target.accuracy_pct
                );
            }
        }
        Command::GenTrace { op, context, n, seed, out } => {
            let scene = load_context(&context)?;
            let events = generate_scenario(op, &scene, n, Seed(seed), &ScenarioParams::default())?;
            let text = serialize_trace(&events);
            match out {
                Some(path) => write(&path, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Report { dir } => {
            let cells = parse_cells_csv(&read(&dir.join("cells.csv"))?)?;
            let records_path = dir.join("records.jsonl");
            let records = if records_path.exists() { parse_records_jsonl(&read(&records_path)?)? } else { Vec::new() };
            if cells.is_empty() {
                bail!("{} has no cells", dir.join("cells.csv").display());
            }
            print!("{}", emit_report(&cells, &records, ReportFormat::Table)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
