use clap::{Parser, Subcommand};
use dcroute::harness::{
    self, compare_runs, comparison_to_csv, parse_experiments, records_to_csv, run_experiment, run_simulation,
    ExperimentConfig, RunRecord, SchedulerKind, SimOptions, TopologySource,
};
use dcroute::workload::{self, WorkloadConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dcroute",
    about = "Deadline-guaranteed single-path transfer scheduling, LP baselines and a slotted-timeline simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a topology file (the built-in 12-node WAN or a synthetic one).
    GenTopology {
        /// gscale | synthetic:N[:seed] | file:path
        #[arg(long, default_value = "gscale")]
        topology: String,
        /// Output path; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Generate a workload trace CSV.
    GenTrace {
        #[arg(long, default_value = "gscale")]
        topology: String,
        #[arg(long, default_value_t = 6.0)]
        lambda: f64,
        #[arg(long, default_value_t = 500)]
        horizon: u64,
        #[arg(long, default_value_t = 10.0)]
        mean_length: f64,
        #[arg(long, default_value_t = 0.125)]
        vol_fraction: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run schedulers over a trace (generated per seed, or loaded from a file).
    Simulate {
        #[arg(long, default_value = "gscale")]
        topology: String,
        /// Comma-separated: dcroute, global-lp, ksp-lp:K, pip-pmc[:K], pip-spmc[:K]
        #[arg(long, default_value = "dcroute")]
        schedulers: String,
        /// Trace CSV to replay; workload parameters are ignored when set.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 6.0)]
        lambda: f64,
        #[arg(long, default_value_t = 500)]
        horizon: u64,
        #[arg(long, default_value_t = 10.0)]
        mean_length: f64,
        #[arg(long, default_value_t = 0.125)]
        vol_fraction: f64,
        /// Comma-separated seeds (one simulation cell per scheduler x seed).
        #[arg(long, default_value = "1,2,3")]
        seeds: String,
        /// Split every timeslot into this many sub-slots.
        #[arg(long, default_value_t = 1)]
        subdivision: u64,
        /// Skip per-boundary invariant sweeps (for timing runs).
        #[arg(long)]
        fast: bool,
        /// Write per-run records CSV here.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Write the finalized per-slot schedule CSV here (single cell only).
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Aggregate run-record CSVs into a seed-averaged comparison table.
    Compare {
        /// Record CSV files produced by simulate/sweep.
        records: Vec<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run every experiment section of a config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
    },
}

fn emit(out: Option<&PathBuf>, contents: &str) -> std::io::Result<()> {
    match out {
        Some(path) => harness::write_atomic(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn run() -> Result<(), String> {
    let cli = Cli::parse();
    match cli.cmd {
        Command::GenTopology { topology, out } => {
            let source: TopologySource = topology.parse()?;
            let topo = source.build::<f64>().map_err(|e| e.to_string())?;
            emit(out.as_ref(), &topo.to_file_format()).map_err(|e| e.to_string())?;
        }
        Command::GenTrace { topology, lambda, horizon, mean_length, vol_fraction, seed, out } => {
            let source: TopologySource = topology.parse()?;
            let topo = source.build::<f64>().map_err(|e| e.to_string())?;
            let cfg = WorkloadConfig { lambda, horizon, mean_length, vol_fraction, seed };
            let trace = workload::generate_trace(&cfg, &topo).map_err(|e| e.to_string())?;
            if trace.clamped > 0 {
                eprintln!(
                    "note: {} of {} volumes clamped to the per-path maximum",
                    trace.clamped,
                    trace.entries.len()
                );
            }
            emit(out.as_ref(), &workload::format_trace(&trace.entries)).map_err(|e| e.to_string())?;
        }
        Command::Simulate {
            topology,
            schedulers,
            trace,
            lambda,
            horizon,
            mean_length,
            vol_fraction,
            seeds,
            subdivision,
            fast,
            records,
            schedule,
        } => {
            let source: TopologySource = topology.parse()?;
            let kinds: Vec<SchedulerKind> =
                schedulers.split(',').map(|s| s.parse()).collect::<Result<_, _>>()?;
            let seed_list: Vec<u64> = seeds
                .split(',')
                .map(|s| s.trim().parse::<u64>().map_err(|_| format!("bad seed {s:?}")))
                .collect::<Result<_, _>>()?;

            let recs: Vec<RunRecord> = if let Some(trace_path) = trace {
                // replay one fixed trace through every scheduler
                let base_topo = source.build::<f64>().map_err(|e| e.to_string())?;
                let topo = if subdivision > 1 {
                    harness::subdivide_topology(&base_topo, subdivision)
                } else {
                    base_topo
                };
                let text = std::fs::read_to_string(&trace_path).map_err(|e| e.to_string())?;
                let trace_hash = harness::hex_digest(text.as_bytes());
                let mut entries = workload::parse_trace::<f64>(&text).map_err(|e| e.to_string())?;
                entries.sort_by_key(|e| e.arrival);
                if subdivision > 1 {
                    entries = harness::subdivide_slots(&entries, subdivision);
                }
                let opts = SimOptions { check_invariants: !fast, collect_schedule: schedule.is_some() };
                let mut out = Vec::new();
                for &kind in &kinds {
                    let mut sched = kind.make::<f64>();
                    let outcome =
                        run_simulation(&topo, &entries, sched.as_mut(), &opts).map_err(|e| e.to_string())?;
                    if let (Some(path), Some(csv)) = (&schedule, &outcome.schedule_csv) {
                        harness::write_atomic(path, csv).map_err(|e| e.to_string())?;
                    }
                    out.push(RunRecord {
                        config_hash: trace_hash.clone(),
                        trace_hash: trace_hash.clone(),
                        scheduler: kind.tag(),
                        seed: 0,
                        lambda,
                        nodes: topo.num_nodes(),
                        subdivision,
                        metrics: outcome.metrics,
                        version: env!("CARGO_PKG_VERSION").into(),
                    });
                }
                out
            } else {
                let cfg = ExperimentConfig {
                    name: "simulate".into(),
                    topology: source,
                    workload: WorkloadConfig { lambda, horizon, mean_length, vol_fraction, seed: 0 },
                    schedulers: kinds,
                    subdivision,
                    seeds: seed_list,
                    fast,
                    out_dir: None,
                };
                run_experiment(&cfg).map_err(|e| e.to_string())?
            };

            let csv = records_to_csv(&recs);
            if let Some(path) = &records {
                harness::write_atomic(path, &csv).map_err(|e| e.to_string())?;
            }
            let rows = compare_runs(&recs).map_err(|e| e.to_string())?;
            print!("{}", comparison_to_csv(&rows));
        }
        Command::Compare { records, out } => {
            if records.is_empty() {
                return Err("no record files given".into());
            }
            let mut all = Vec::new();
            for path in &records {
                let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                all.extend(RunRecord::parse_csv(&text).map_err(|e| e.to_string())?);
            }
            let rows = compare_runs(&all).map_err(|e| e.to_string())?;
            emit(out.as_ref(), &comparison_to_csv(&rows)).map_err(|e| e.to_string())?;
        }
        Command::Sweep { config, out_dir } => {
            let text = std::fs::read_to_string(&config).map_err(|e| format!("{}: {e}", config.display()))?;
            let experiments = parse_experiments(&text).map_err(|e| e.to_string())?;
            if experiments.is_empty() {
                return Err("config file defines no experiments".into());
            }
            for cfg in &experiments {
                eprintln!("running experiment [{}] ...", cfg.name);
                let recs = run_experiment(cfg).map_err(|e| e.to_string())?;
                let out_dir = cfg.out_dir.as_ref().unwrap_or(&out_dir);
                let records_path = out_dir.join(format!("{}-records.csv", cfg.name));
                harness::write_atomic(&records_path, &records_to_csv(&recs)).map_err(|e| e.to_string())?;
                let rows = compare_runs(&recs).map_err(|e| e.to_string())?;
                let cmp_path = out_dir.join(format!("{}-comparison.csv", cfg.name));
                harness::write_atomic(&cmp_path, &comparison_to_csv(&rows)).map_err(|e| e.to_string())?;
                eprintln!("  wrote {} and {}", records_path.display(), cmp_path.display());
                print!("{}", comparison_to_csv(&rows));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
