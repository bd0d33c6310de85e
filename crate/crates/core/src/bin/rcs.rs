use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rcs_core::batch::run_batch;
use rcs_core::config::ScenarioConfig;
use rcs_core::cost::{expected_cost, CostTable};
use rcs_core::model::pad_with_empty_bins;
use rcs_core::report::{self, Format, ReportBundle};
use rcs_core::sim;
use rcs_core::solver::{build_optimal_bgc, optimal_empty_level};
use rcs_core::{Error, Result};

#[derive(Parser)]
#[command(name = "rcs", version, about = "Slotting, rearrangement and simulation for robotic compact storage grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
    Both,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
            OutFormat::Both => Format::Both,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration file and print the runs it describes.
    Validate { config: PathBuf },
    /// Optimal configuration and expected cost per empty level.
    Solve {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Simulate the configuration's first run.
    Simulate {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        format: OutFormat,
        /// Also write the full event log as NDJSON.
        #[arg(long)]
        events: bool,
    },
    /// Run every policy, randomization and seed of the batch grid.
    Batch {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutFormat,
        /// Worker threads; defaults to the number of cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Percent reductions of layer_complete against the baselines in a batch
    /// output directory.
    Compare {
        dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the digging cost table.
    Lut {
        #[arg(long, default_value_t = 10)]
        height: usize,
        #[arg(long)]
        max_layer: Option<usize>,
    },
}

fn load(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ScenarioConfig::parse(&text)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Serde(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn validate(config: &Path) -> Result<()> {
    let cfg = load(config)?;
    let keys = cfg.run_keys()?;
    let primary = cfg.primary()?;
    println!(
        "ok: {}x{} grid, height {}, {} bins, fill level {}, {} run(s)",
        primary.spec.rows,
        primary.spec.cols,
        primary.spec.height,
        primary.catalog.len(),
        primary.spec.fill_level,
        keys.len()
    );
    for k in keys {
        println!("  {} randomization={} seed={}", k.policy, k.randomization, k.seed);
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveOutput {
    empty_level: usize,
    fill_level: usize,
    expected_cost: f64,
    candidates: Vec<rcs_core::solver::EmptyLevelCandidate>,
    /// Row per layer from the top, column per stack; 0 marks an empty cell.
    matrix: Vec<Vec<u32>>,
}

fn solve(config: &Path, out: &Path) -> Result<()> {
    let cfg = load(config)?;
    let sc = cfg.primary()?;
    let table = CostTable::build(sc.spec.height)?;
    let search = optimal_empty_level(&sc.spec, &sc.catalog, &table)?;
    let he = sc.spec.empty_level();
    let padded = pad_with_empty_bins(sc.spec.fill_level, &sc.catalog);
    let bgc = build_optimal_bgc(&sc.spec, &padded, he)?;
    let cost = expected_cost(&bgc, &padded, &table)?;
    mkdir(out)?;
    let matrix: Vec<Vec<u32>> = bgc.to_matrix().into_iter().map(|r| r.into_iter().collect()).collect();
    let mut csv = String::new();
    for row in &matrix {
        csv.push_str(&row.iter().map(u32::to_string).collect::<Vec<_>>().join(","));
        csv.push('\n');
    }
    let p = out.join("optimal_bgc.csv");
    fs::write(&p, csv).map_err(|e| Error::io(&p, e))?;
    let mut cands = String::from("empty_level,occupied_stacks,expected_cost\n");
    for c in &search.candidates {
        let e = c.expected_cost.map_or(String::new(), |v| v.to_string());
        cands.push_str(&format!("{},{},{e}\n", c.empty_level, c.occupied_stacks));
    }
    let p = out.join("empty_levels.csv");
    fs::write(&p, cands).map_err(|e| Error::io(&p, e))?;
    write_json(
        &out.join("solve.json"),
        &SolveOutput {
            empty_level: he,
            fill_level: sc.spec.fill_level,
            expected_cost: cost,
            candidates: search.candidates.clone(),
            matrix,
        },
    )?;
    println!("empty level {he}: expected cost {cost:.6}");
    for c in &search.candidates {
        match c.expected_cost {
            Some(v) => println!("  h_e={} stacks={} cost={v:.6}", c.empty_level, c.occupied_stacks),
            None => println!("  h_e={} does not fit", c.empty_level),
        }
    }
    println!("cheapest empty level {}", search.best);
    Ok(())
}

fn simulate(config: &Path, out: &Path, format: OutFormat, events: bool) -> Result<()> {
    let cfg = load(config)?;
    let sc = cfg.primary()?;
    let log = sim::run(&sc)?;
    let bundle = ReportBundle::from_log(&log, &sc);
    report::emit_reports(std::slice::from_ref(&bundle), out, format.into())?;
    if events {
        let p = out.join("events.ndjson");
        fs::write(&p, log.to_ndjson()).map_err(|e| Error::io(&p, e))?;
    }
    let s = &bundle.summary;
    println!(
        "{} randomization={} seed={}: {} requests, mean retrieval {:.2} s, robot time {:.0} s",
        s.policy, s.randomization, s.seed, s.requests, s.mean_retrieval, s.robot_overall
    );
    Ok(())
}

fn batch(config: &Path, out: &Path, format: OutFormat, threads: Option<usize>) -> Result<bool> {
    let cfg = load(config)?;
    let run = || run_batch(&cfg);
    let result = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Validation(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    report::emit_reports(&result.bundles, out, format.into())?;
    let agg = report::aggregate(&result.bundles);
    report::write_table(
        &out.join("aggregate.csv"),
        &["policy", "randomization", "metric", "runs", "mean", "std"],
        &agg,
    )?;
    if let Ok(rows) = report::compare_policies(&result.bundles) {
        write_comparison(&out.join("comparison.csv"), &rows)?;
    }
    write_json(&out.join("failures.json"), &result.failures)?;
    println!("{} run(s) completed, {} failed", result.bundles.len(), result.failures.len());
    for f in &result.failures {
        eprintln!(
            "run {} randomization={} seed={} failed: {}",
            f.key.policy, f.key.randomization, f.key.seed, f.message
        );
    }
    Ok(result.failures.is_empty())
}

fn write_comparison(path: &Path, rows: &[report::ComparisonRow]) -> Result<()> {
    report::write_table(
        path,
        &[
            "randomization", "candidate", "baseline", "metric", "candidate_value", "baseline_value",
            "reduction_percent",
        ],
        rows,
    )
}

fn compare(dir: &Path, out: Option<&Path>) -> Result<()> {
    let bundles = report::read_csv_reports(dir)?;
    let rows = report::compare_policies(&bundles)?;
    if let Some(p) = out {
        write_comparison(p, &rows)?;
    }
    for r in &rows {
        let pct = r.reduction_percent.map_or("n/a".to_string(), |v| format!("{v:.1}%"));
        println!(
            "randomization={} {} vs {} {}: {:.3} vs {:.3} ({pct})",
            r.randomization, r.candidate, r.baseline, r.metric, r.candidate_value, r.baseline_value
        );
    }
    Ok(())
}

fn lut(height: usize, max_layer: Option<usize>) -> Result<()> {
    let table = CostTable::build(height)?;
    print!("{}", table.to_csv(max_layer.unwrap_or(table.max_layer())));
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Validation(_) => 3,
        Error::Io { .. } => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { config } => validate(&config).map(|_| true),
        Command::Solve { config, out } => solve(&config, &out).map(|_| true),
        Command::Simulate {
            config,
            out,
            format,
            events,
        } => simulate(&config, &out, format, events).map(|_| true),
        Command::Batch {
            config,
            out,
            format,
            threads,
        } => batch(&config, &out, format, threads),
        Command::Compare { dir, out } => compare(&dir, out.as_deref()).map(|_| true),
        Command::Lut { height, max_layer } => lut(height, max_layer).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(5),
        Err(e) => {
            eprintln!("rcs: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
