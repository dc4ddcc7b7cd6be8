//! Simulation harness: drives slot boundaries, feeds identical traces to
//! every scheduler, measures rejection and processing-time metrics and runs
//! (scheduler x seed) cells in parallel as isolated tasks.
//!
//! Event order per slot t: (1) process every arrival with arrival == t
//! through the scheduler's admission path, timing each decision; (2) run the
//! scheduler's boundary maintenance (PullBack/PushForward for the ALAP
//! scheduler); (3) finalize slot t+1. After the last arrival the clock keeps
//! advancing until all admitted traffic has drained, so rejected-fraction
//! accounting is closed.

use crate::baselines::{BaselineKind, LpBaseline};
use crate::scalar::Scalar;
use crate::scheduler::{walk, DcRoute, Request, RequestState, Scheduler, SchedulerError};
use crate::timeline::{AllocationGrid, SlotIndex};
use crate::topology::{self, Topology, TopologyError};
use crate::workload::{self, TraceEntry, TraceError, WorkloadConfig};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invariant violation at boundary t={t}: {detail}\nforensic grid dump:\n{dump}")]
    InvariantViolation { t: SlotIndex, detail: String, dump: String },
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Which allocator a cell runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerKind {
    DcRoute,
    Baseline(BaselineKind),
}

impl SchedulerKind {
    pub fn tag(self) -> String {
        match self {
            SchedulerKind::DcRoute => "dcroute".into(),
            SchedulerKind::Baseline(b) => b.tag(),
        }
    }

    pub fn make<F: Scalar>(self) -> Box<dyn Scheduler<F> + Send> {
        match self {
            SchedulerKind::DcRoute => Box::new(DcRoute::new()),
            SchedulerKind::Baseline(kind) => Box::new(LpBaseline::new(kind)),
        }
    }
}

impl FromStr for SchedulerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let parse_k = |arg: Option<&str>, default: usize| -> Result<usize, String> {
            match arg {
                None => Ok(default),
                Some(a) => a.parse::<usize>().map_err(|_| format!("bad K in {s:?}")).and_then(|k| {
                    if k >= 1 {
                        Ok(k)
                    } else {
                        Err(format!("K must be >= 1 in {s:?}"))
                    }
                }),
            }
        };
        match name {
            "dcroute" => Ok(SchedulerKind::DcRoute),
            "global-lp" => Ok(SchedulerKind::Baseline(BaselineKind::GlobalLp)),
            "ksp-lp" => {
                let k = parse_k(arg, 0)?;
                if k == 0 {
                    return Err(format!("ksp-lp needs a K, e.g. ksp-lp:7 (got {s:?})"));
                }
                Ok(SchedulerKind::Baseline(BaselineKind::KspLp { k }))
            }
            "pip-pmc" => Ok(SchedulerKind::Baseline(BaselineKind::PipPmc { k: parse_k(arg, 20)? })),
            "pip-spmc" => Ok(SchedulerKind::Baseline(BaselineKind::PipSpmc { k: parse_k(arg, 20)? })),
            other => Err(format!("unknown scheduler {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopologySource {
    GScale,
    Synthetic { n: usize, seed: u64 },
    File(PathBuf),
}

impl TopologySource {
    pub fn build<F: Scalar>(&self) -> Result<Topology<F>, TopologyError> {
        match self {
            TopologySource::GScale => Ok(topology::gscale()),
            TopologySource::Synthetic { n, seed } => topology::generate_synthetic(*n, *seed),
            TopologySource::File(path) => topology::load_topology(path),
        }
    }

    fn canonical(&self) -> String {
        match self {
            TopologySource::GScale => "gscale".into(),
            TopologySource::Synthetic { n, seed } => format!("synthetic:{n}:{seed}"),
            TopologySource::File(p) => format!("file:{}", p.display()),
        }
    }
}

impl FromStr for TopologySource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "gscale" {
            return Ok(TopologySource::GScale);
        }
        if let Some(rest) = s.strip_prefix("synthetic:") {
            let mut it = rest.split(':');
            let n = it
                .next()
                .and_then(|x| x.parse().ok())
                .ok_or_else(|| format!("bad synthetic size in {s:?}"))?;
            let seed = match it.next() {
                Some(x) => x.parse().map_err(|_| format!("bad synthetic seed in {s:?}"))?,
                None => 0,
            };
            return Ok(TopologySource::Synthetic { n, seed });
        }
        if let Some(rest) = s.strip_prefix("file:") {
            return Ok(TopologySource::File(PathBuf::from(rest)));
        }
        Err(format!("unknown topology {s:?} (expected gscale | synthetic:N[:seed] | file:path)"))
    }
}

/// One experiment: a topology, a workload, a scheduler list and seeds.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub name: String,
    pub topology: TopologySource,
    pub workload: WorkloadConfig,
    pub schedulers: Vec<SchedulerKind>,
    /// Timeslot subdivision factor (1 = native slots).
    pub subdivision: u64,
    pub seeds: Vec<u64>,
    pub fast: bool,
    /// Where the sweep driver writes this experiment's CSVs; falls back to
    /// the CLI's --out-dir.
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.schedulers.is_empty() {
            return Err(SimError::Config("no schedulers configured".into()));
        }
        if self.seeds.is_empty() {
            return Err(SimError::Config("no seeds configured".into()));
        }
        if self.subdivision < 1 {
            return Err(SimError::Config("subdivision must be >= 1".into()));
        }
        Ok(())
    }

    /// Canonical serialization; the hash is stable across platforms.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "name={}", self.name);
        let _ = writeln!(s, "topology={}", self.topology.canonical());
        let _ = writeln!(
            s,
            "workload=lambda:{};horizon:{};mean_length:{};vol_fraction:{}",
            self.workload.lambda, self.workload.horizon, self.workload.mean_length, self.workload.vol_fraction
        );
        let _ = writeln!(s, "schedulers={}", self.schedulers.iter().map(|k| k.tag()).collect::<Vec<_>>().join(","));
        let _ = writeln!(s, "subdivision={}", self.subdivision);
        let _ = writeln!(s, "seeds={}", self.seeds.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","));
        s
    }

    pub fn config_hash(&self) -> String {
        hex_digest(self.canonical().as_bytes())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Per-run measurements. Volume fields are deterministic for a fixed
/// (config, seed, scheduler); time fields depend on the machine.
#[derive(Debug, Clone)]
pub struct SimMetrics<F> {
    pub requests: usize,
    pub admitted: usize,
    pub rejected: usize,
    pub completed: usize,
    pub offered_volume: F,
    pub rejected_volume: F,
    pub rejected_fraction: f64,
    /// Mean admission+adjustment time per request (the paper's metric).
    pub per_request_time_s: f64,
    pub admit_mean_s: f64,
    pub admit_p99_s: f64,
    /// Admission time averaged over admitted requests only.
    pub admit_mean_admitted_s: f64,
    pub admit_total_s: f64,
    pub boundary_total_s: f64,
    pub pulled_volume: F,
    pub pushed_volume: F,
    pub max_push_passes: u32,
    pub boundaries: u64,
    /// Always zero for a completed run; violations abort instead.
    pub violations: u32,
}

#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    /// Sweep grid and scheduler invariants at every boundary (slow; off for
    /// timing runs).
    pub check_invariants: bool,
    /// Collect the finalized per-slot schedule as CSV rows.
    pub collect_schedule: bool,
}

#[derive(Debug, Clone)]
pub struct SimOutcome<F> {
    pub metrics: SimMetrics<F>,
    pub schedule_csv: Option<String>,
}

/// Runs one scheduler over one trace. The trace must be sorted by arrival.
pub fn run_simulation<F: Scalar>(
    topo: &Topology<F>,
    trace: &[TraceEntry<F>],
    scheduler: &mut (dyn Scheduler<F> + Send),
    opts: &SimOptions,
) -> Result<SimOutcome<F>, SimError> {
    debug_assert!(trace.windows(2).all(|w| w[0].arrival <= w[1].arrival), "trace sorted by arrival");
    let mut grid: AllocationGrid<F> = AllocationGrid::new(topo.channel_capacities(), 0);
    let mut requests: Vec<Request<F>> = Vec::with_capacity(trace.len());
    let mut admit_times: Vec<f64> = Vec::with_capacity(trace.len());
    let mut admitted_times: Vec<f64> = Vec::new();
    let mut offered = F::zero();
    let mut rejected_volume = F::zero();
    let mut boundary_total = 0.0f64;
    let mut pulled = F::zero();
    let mut pushed = F::zero();
    let mut max_push_passes = 0u32;
    let mut boundaries = 0u64;
    let mut schedule_csv = opts.collect_schedule.then(|| String::from("slot,request_id,rate,path\n"));

    let mut next_arrival = 0usize;
    loop {
        let t = grid.t_now();
        while next_arrival < trace.len() && trace[next_arrival].arrival == t {
            let e = &trace[next_arrival];
            let id = requests.len();
            requests.push(Request::new(id, e.src, e.dst, e.vol, e.dl, e.arrival));
            let start = Instant::now();
            let admitted = scheduler.admit(topo, &mut grid, &mut requests, id)?;
            let dt = start.elapsed().as_secs_f64();
            admit_times.push(dt);
            if admitted {
                admitted_times.push(dt);
            } else {
                rejected_volume = rejected_volume + e.vol;
            }
            offered = offered + e.vol;
            next_arrival += 1;
        }

        let bstart = Instant::now();
        let stats = scheduler.boundary(topo, &mut grid, &requests)?;
        boundary_total += bstart.elapsed().as_secs_f64();
        pulled = pulled + stats.pulled;
        pushed = pushed + stats.pushed;
        max_push_passes = max_push_passes.max(stats.push_passes);
        boundaries += 1;

        if opts.check_invariants {
            let fail = grid
                .check_consistency()
                .map_err(|e| e.to_string())
                .and_then(|()| scheduler.check_invariants(topo, &grid, &requests));
            if let Err(detail) = fail {
                return Err(SimError::InvariantViolation { t, detail, dump: grid.dump() });
            }
        }

        let schedule = walk(&mut grid, &mut requests, &*scheduler)?;
        if let Some(csv) = schedule_csv.as_mut() {
            for row in schedule.csv_rows() {
                csv.push_str(&row);
                csv.push('\n');
            }
        }

        if next_arrival >= trace.len() && requests.iter().all(|r| !r.is_active()) {
            break;
        }
    }

    let requests_n = requests.len();
    let admitted_n = requests.iter().filter(|r| !matches!(r.state, RequestState::Rejected)).count();
    let completed = requests.iter().filter(|r| r.state == RequestState::Completed).count();
    let admit_total: f64 = admit_times.iter().sum();
    let mut sorted = admit_times.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let p99 = if sorted.is_empty() {
        0.0
    } else {
        sorted[((sorted.len() as f64 * 0.99).ceil() as usize - 1).min(sorted.len() - 1)]
    };
    let rejected_fraction = if offered > F::zero() {
        (rejected_volume / offered).to_f64_lossy()
    } else {
        0.0
    };
    let metrics = SimMetrics {
        requests: requests_n,
        admitted: admitted_n,
        rejected: requests_n - admitted_n,
        completed,
        offered_volume: offered,
        rejected_volume,
        rejected_fraction,
        per_request_time_s: if requests_n > 0 {
            (admit_total + boundary_total) / requests_n as f64
        } else {
            0.0
        },
        admit_mean_s: if requests_n > 0 { admit_total / requests_n as f64 } else { 0.0 },
        admit_p99_s: p99,
        admit_mean_admitted_s: if admitted_times.is_empty() {
            0.0
        } else {
            admitted_times.iter().sum::<f64>() / admitted_times.len() as f64
        },
        admit_total_s: admit_total,
        boundary_total_s: boundary_total,
        pulled_volume: pulled,
        pushed_volume: pushed,
        max_push_passes,
        boundaries,
        violations: 0,
    };
    Ok(SimOutcome { metrics, schedule_csv })
}

/// Scales a trace onto a finer timeline: arrivals and deadlines multiply by
/// `f`; pair with [`subdivide_topology`] so per-(sub)slot capacity shrinks by
/// the same factor and every per-request deliverable bound is preserved.
pub fn subdivide_slots<F: Scalar>(trace: &[TraceEntry<F>], f: u64) -> Vec<TraceEntry<F>> {
    trace
        .iter()
        .map(|e| TraceEntry { arrival: e.arrival * f, src: e.src, dst: e.dst, vol: e.vol, dl: e.dl * f })
        .collect()
}

pub fn subdivide_topology<F: Scalar>(topo: &Topology<F>, f: u64) -> Topology<F> {
    let scale = F::one() / F::from_u64(f).unwrap();
    let edges = topo
        .edges()
        .iter()
        .map(|e| crate::topology::Edge { u: e.u, v: e.v, capacity: e.capacity * scale })
        .collect();
    Topology::from_edges(topo.num_nodes(), edges)
}

/// One (scheduler, seed) cell's results.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config_hash: String,
    pub trace_hash: String,
    pub scheduler: String,
    pub seed: u64,
    pub lambda: f64,
    pub nodes: usize,
    pub subdivision: u64,
    pub metrics: SimMetrics<f64>,
    pub version: String,
}

pub const RECORD_HEADER: &str = "config_hash,trace_hash,scheduler,seed,lambda,nodes,subdivision,requests,admitted,rejected,completed,offered_volume,rejected_volume,rejected_fraction,per_request_time_s,admit_mean_s,admit_p99_s,admit_mean_admitted_s,pulled_volume,pushed_volume,violations,version";

impl RunRecord {
    pub fn csv_row(&self) -> String {
        let m = &self.metrics;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{:.9},{:.9},{:.9},{:.9e},{:.9e},{:.9e},{:.9e},{:.9},{:.9},{},{}",
            self.config_hash,
            self.trace_hash,
            self.scheduler,
            self.seed,
            self.lambda,
            self.nodes,
            self.subdivision,
            m.requests,
            m.admitted,
            m.rejected,
            m.completed,
            m.offered_volume,
            m.rejected_volume,
            m.rejected_fraction,
            m.per_request_time_s,
            m.admit_mean_s,
            m.admit_p99_s,
            m.admit_mean_admitted_s,
            m.pulled_volume,
            m.pushed_volume,
            m.violations,
            self.version,
        )
    }

    pub fn parse_csv(text: &str) -> Result<Vec<RunRecord>, SimError> {
        let mut out = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line == RECORD_HEADER {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 22 {
                return Err(SimError::Config(format!("record line {}: expected 22 fields, got {}", idx + 1, f.len())));
            }
            let pf = |s: &str| s.parse::<f64>().map_err(|_| SimError::Config(format!("bad float {s:?}")));
            let pu = |s: &str| s.parse::<u64>().map_err(|_| SimError::Config(format!("bad int {s:?}")));
            out.push(RunRecord {
                config_hash: f[0].into(),
                trace_hash: f[1].into(),
                scheduler: f[2].into(),
                seed: pu(f[3])?,
                lambda: pf(f[4])?,
                nodes: pu(f[5])? as usize,
                subdivision: pu(f[6])?,
                metrics: SimMetrics {
                    requests: pu(f[7])? as usize,
                    admitted: pu(f[8])? as usize,
                    rejected: pu(f[9])? as usize,
                    completed: pu(f[10])? as usize,
                    offered_volume: pf(f[11])?,
                    rejected_volume: pf(f[12])?,
                    rejected_fraction: pf(f[13])?,
                    per_request_time_s: pf(f[14])?,
                    admit_mean_s: pf(f[15])?,
                    admit_p99_s: pf(f[16])?,
                    admit_mean_admitted_s: pf(f[17])?,
                    admit_total_s: 0.0,
                    boundary_total_s: 0.0,
                    pulled_volume: pf(f[18])?,
                    pushed_volume: pf(f[19])?,
                    max_push_passes: 0,
                    boundaries: 0,
                    violations: pu(f[20])? as u32,
                },
                version: f[21].into(),
            });
        }
        Ok(out)
    }
}

pub fn records_to_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(RECORD_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Runs every (scheduler, seed) cell of an experiment in parallel. Each seed
/// generates one trace shared byte-identically (hash-recorded) by all
/// schedulers of that seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>, SimError> {
    cfg.validate()?;
    let base_topo: Topology<f64> = cfg.topology.build()?;
    let topo = if cfg.subdivision > 1 { subdivide_topology(&base_topo, cfg.subdivision) } else { base_topo.clone() };

    // one trace per seed, shared by every scheduler of that seed
    let mut per_seed: Vec<(u64, Vec<TraceEntry<f64>>, String)> = Vec::new();
    for &seed in &cfg.seeds {
        let wl = WorkloadConfig { seed, ..cfg.workload.clone() };
        let trace = workload::generate_trace::<f64>(&wl, &base_topo)?;
        let text = workload::format_trace(&trace.entries);
        let hash = hex_digest(text.as_bytes());
        let entries =
            if cfg.subdivision > 1 { subdivide_slots(&trace.entries, cfg.subdivision) } else { trace.entries };
        per_seed.push((seed, entries, hash));
    }

    // longest-expected-first keeps the slow cells from straggling at the end
    // of the worker pool; output order is restored below
    let cost_rank = |k: SchedulerKind| -> u64 {
        match k {
            SchedulerKind::Baseline(BaselineKind::GlobalLp) => 1000,
            SchedulerKind::Baseline(BaselineKind::KspLp { k }) => 60 * k as u64,
            SchedulerKind::Baseline(BaselineKind::PipPmc { .. }) => 250,
            SchedulerKind::Baseline(BaselineKind::PipSpmc { .. }) => 60,
            SchedulerKind::DcRoute => 1,
        }
    };
    let mut cells: Vec<(SchedulerKind, usize)> = cfg
        .schedulers
        .iter()
        .flat_map(|&k| (0..per_seed.len()).map(move |i| (k, i)))
        .collect();
    cells.sort_by_key(|&(k, i)| (std::cmp::Reverse(cost_rank(k)), i));

    let opts = SimOptions { check_invariants: !cfg.fast, collect_schedule: false };
    let config_hash = cfg.config_hash();
    let mut records: Vec<RunRecord> = cells
        .par_iter()
        .map(|&(kind, seed_idx)| -> Result<RunRecord, String> {
            let (seed, trace, trace_hash) = &per_seed[seed_idx];
            let mut sched = kind.make::<f64>();
            let outcome = run_simulation(&topo, trace, sched.as_mut(), &opts)
                .map_err(|e| format!("{} seed {}: {e}", kind.tag(), seed))?;
            Ok(RunRecord {
                config_hash: config_hash.clone(),
                trace_hash: trace_hash.clone(),
                scheduler: kind.tag(),
                seed: *seed,
                lambda: cfg.workload.lambda,
                nodes: topo.num_nodes(),
                subdivision: cfg.subdivision,
                metrics: outcome.metrics,
                version: env!("CARGO_PKG_VERSION").to_string(),
            })
        })
        .collect::<Result<Vec<_>, String>>()
        .map_err(SimError::Config)?;
    records.sort_by(|a, b| (a.scheduler.clone(), a.seed).cmp(&(b.scheduler.clone(), b.seed)));
    Ok(records)
}

/// Seed-averaged comparison, processing time normalized to the ALAP
/// scheduler. Records must cover identical traces per seed.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub scheduler: String,
    pub lambda: f64,
    pub nodes: usize,
    pub subdivision: u64,
    pub seeds: usize,
    pub rejected_fraction: f64,
    pub per_request_time_s: f64,
    /// Mean processing time over the reference scheduler's; 1.0 for itself.
    pub time_ratio: f64,
}

pub fn compare_runs(records: &[RunRecord]) -> Result<Vec<ComparisonRow>, SimError> {
    if records.is_empty() {
        return Ok(Vec::new());
    }
    // fairness: within each seed, all schedulers must have consumed the same trace
    let mut by_seed: std::collections::BTreeMap<u64, Vec<&RunRecord>> = Default::default();
    for r in records {
        by_seed.entry(r.seed).or_default().push(r);
    }
    for (seed, rs) in &by_seed {
        let h = &rs[0].trace_hash;
        if rs.iter().any(|r| &r.trace_hash != h) {
            return Err(SimError::Config(format!("seed {seed}: records mix different traces")));
        }
    }
    let mut by_sched: std::collections::BTreeMap<String, Vec<&RunRecord>> = Default::default();
    for r in records {
        by_sched.entry(r.scheduler.clone()).or_default().push(r);
    }
    let mean =
        |rs: &[&RunRecord], f: fn(&RunRecord) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / rs.len() as f64;
    let reference = by_sched
        .get("dcroute")
        .map(|rs| mean(rs, |r| r.metrics.per_request_time_s))
        .unwrap_or(f64::NAN);
    let mut rows = Vec::new();
    for (tag, rs) in &by_sched {
        let time = mean(rs, |r| r.metrics.per_request_time_s);
        rows.push(ComparisonRow {
            scheduler: tag.clone(),
            lambda: rs[0].lambda,
            nodes: rs[0].nodes,
            subdivision: rs[0].subdivision,
            seeds: rs.len(),
            rejected_fraction: mean(rs, |r| r.metrics.rejected_fraction),
            per_request_time_s: time,
            time_ratio: time / reference,
        });
    }
    Ok(rows)
}

pub fn comparison_to_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("scheduler,lambda,nodes,subdivision,seeds,rejected_fraction,per_request_time_s,time_ratio_vs_dcroute\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.9},{:.9e},{:.3}",
            r.scheduler, r.lambda, r.nodes, r.subdivision, r.seeds, r.rejected_fraction, r.per_request_time_s, r.time_ratio
        );
    }
    out
}

/// Parses the line-oriented `key = value` config format with `[name]`
/// sections, one experiment per section.
pub fn parse_experiments(text: &str) -> Result<Vec<ExperimentConfig>, SimError> {
    let mut out: Vec<ExperimentConfig> = Vec::new();
    let mut current: Option<ExperimentConfig> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            if let Some(done) = current.take() {
                out.push(done);
            }
            current = Some(ExperimentConfig {
                name: name.trim().to_string(),
                topology: TopologySource::GScale,
                workload: WorkloadConfig::default(),
                schedulers: vec![SchedulerKind::DcRoute],
                subdivision: 1,
                seeds: vec![1, 2, 3],
                fast: false,
                out_dir: None,
            });
            continue;
        }
        let Some(cfg) = current.as_mut() else {
            return Err(SimError::Config(format!("line {line_no}: key outside any [section]")));
        };
        let Some((key, value)) = line.split_once('=') else {
            return Err(SimError::Config(format!("line {line_no}: expected key = value")));
        };
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| SimError::Config(format!("line {line_no}: bad {what}: {value:?}"));
        match key {
            "topology" => cfg.topology = value.parse().map_err(|e| SimError::Config(format!("line {line_no}: {e}")))?,
            "lambda" => cfg.workload.lambda = value.parse().map_err(|_| bad("lambda"))?,
            "horizon" => cfg.workload.horizon = value.parse().map_err(|_| bad("horizon"))?,
            "mean_length" => cfg.workload.mean_length = value.parse().map_err(|_| bad("mean_length"))?,
            "vol_fraction" => cfg.workload.vol_fraction = value.parse().map_err(|_| bad("vol_fraction"))?,
            "subdivision" => cfg.subdivision = value.parse().map_err(|_| bad("subdivision"))?,
            "fast" => cfg.fast = value.parse().map_err(|_| bad("fast"))?,
            "out" => cfg.out_dir = Some(PathBuf::from(value)),
            "seeds" => {
                cfg.seeds = value
                    .split(',')
                    .map(|x| x.trim().parse::<u64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| bad("seeds"))?;
            }
            "schedulers" => {
                cfg.schedulers = value
                    .split(',')
                    .map(|x| x.trim().parse::<SchedulerKind>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| SimError::Config(format!("line {line_no}: {e}")))?;
            }
            other => return Err(SimError::Config(format!("line {line_no}: unknown key {other:?}"))),
        }
    }
    if let Some(done) = current.take() {
        out.push(done);
    }
    for cfg in &out {
        cfg.validate()?;
    }
    Ok(out)
}

/// Atomic write: temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into())
    ));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheduler_kind_parsing() {
        assert_eq!("dcroute".parse::<SchedulerKind>().unwrap(), SchedulerKind::DcRoute);
        assert_eq!(
            "ksp-lp:7".parse::<SchedulerKind>().unwrap(),
            SchedulerKind::Baseline(BaselineKind::KspLp { k: 7 })
        );
        assert_eq!(
            "pip-pmc".parse::<SchedulerKind>().unwrap(),
            SchedulerKind::Baseline(BaselineKind::PipPmc { k: 20 })
        );
        assert_eq!(
            "pip-spmc:5".parse::<SchedulerKind>().unwrap(),
            SchedulerKind::Baseline(BaselineKind::PipSpmc { k: 5 })
        );
        assert!("ksp-lp".parse::<SchedulerKind>().is_err());
        assert!("bogus".parse::<SchedulerKind>().is_err());
        assert_eq!("ksp-lp:7".parse::<SchedulerKind>().unwrap().tag(), "ksp-lp:7");
    }

    #[test]
    fn empty_trace_runs_clean() {
        let topo: Topology<f64> = topology::gscale();
        let mut sched = SchedulerKind::DcRoute.make::<f64>();
        let out = run_simulation(&topo, &[], sched.as_mut(), &SimOptions { check_invariants: true, collect_schedule: false })
            .unwrap();
        assert_eq!(out.metrics.rejected_fraction, 0.0);
        assert_eq!(out.metrics.requests, 0);
        assert_eq!(out.metrics.violations, 0);
    }

    #[test]
    fn single_request_completes_by_deadline() {
        let topo: Topology<f64> = topology::gscale();
        let trace = vec![TraceEntry { arrival: 0, src: 0, dst: 6, vol: 2.0, dl: 5 }];
        let mut sched = SchedulerKind::DcRoute.make::<f64>();
        let out = run_simulation(
            &topo,
            &trace,
            sched.as_mut(),
            &SimOptions { check_invariants: true, collect_schedule: true },
        )
        .unwrap();
        assert_eq!(out.metrics.rejected_fraction, 0.0);
        assert_eq!(out.metrics.completed, 1);
        let csv = out.schedule_csv.unwrap();
        assert!(csv.lines().count() >= 2, "schedule rows emitted:\n{csv}");
    }

    #[test]
    fn multipath_baseline_completes_requests_via_plan() {
        let topo: Topology<f64> = topology::gscale();
        let trace = vec![
            TraceEntry { arrival: 0, src: 0, dst: 6, vol: 2.0, dl: 6 },
            TraceEntry { arrival: 1, src: 3, dst: 9, vol: 1.5, dl: 7 },
        ];
        let mut sched = SchedulerKind::Baseline(BaselineKind::KspLp { k: 3 }).make::<f64>();
        let out = run_simulation(
            &topo,
            &trace,
            sched.as_mut(),
            &SimOptions { check_invariants: true, collect_schedule: false },
        )
        .unwrap();
        assert_eq!(out.metrics.completed, 2);
        assert_eq!(out.metrics.rejected, 0);
    }

    #[test]
    fn subdivision_preserves_deliverable_bounds() {
        let trace = vec![TraceEntry::<f64> { arrival: 3, src: 0, dst: 1, vol: 2.0, dl: 9 }];
        assert_eq!(subdivide_slots(&trace, 1), trace);
        let topo: Topology<f64> = topology::gscale();
        for f in [2u64, 5] {
            let scaled = subdivide_slots(&trace, f);
            let scaled_topo = subdivide_topology(&topo, f);
            let native_bound = (trace[0].dl - trace[0].arrival) as f64 * 1.0;
            let scaled_bound =
                (scaled[0].dl - scaled[0].arrival) as f64 * scaled_topo.edges()[0].capacity;
            assert!((native_bound - scaled_bound).abs() < 1e-12, "f={f}");
        }
    }

    #[test]
    fn config_sections_parse() {
        let text = "\n# sweep config\n[gscale-medium]\ntopology = gscale\nlambda = 6.0\nhorizon = 50\nschedulers = dcroute, ksp-lp:3\nseeds = 1, 2\n\n[tiny]\ntopology = synthetic:5:1\nlambda = 2\nhorizon = 20\nschedulers = dcroute\nseeds = 7\nsubdivision = 2\n";
        let cfgs = parse_experiments(text).unwrap();
        assert_eq!(cfgs.len(), 2);
        assert_eq!(cfgs[0].name, "gscale-medium");
        assert_eq!(cfgs[0].schedulers.len(), 2);
        assert_eq!(cfgs[0].seeds, vec![1, 2]);
        assert_eq!(cfgs[1].topology, TopologySource::Synthetic { n: 5, seed: 1 });
        assert_eq!(cfgs[1].subdivision, 2);
        assert!(parse_experiments("lambda = 2\n").is_err(), "keys need a section");
        assert!(parse_experiments("[x]\nbogus = 1\n").is_err());
    }

    #[test]
    fn records_roundtrip_and_compare() {
        let cfg = ExperimentConfig {
            name: "t".into(),
            topology: TopologySource::Synthetic { n: 5, seed: 1 },
            workload: WorkloadConfig { lambda: 2.0, horizon: 15, ..Default::default() },
            schedulers: vec![SchedulerKind::DcRoute],
            subdivision: 1,
            seeds: vec![1],
            fast: false,
            out_dir: None,
        };
        let records = run_experiment(&cfg).unwrap();
        assert_eq!(records.len(), 1);
        let csv = records_to_csv(&records);
        let parsed = RunRecord::parse_csv(&csv).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].scheduler, "dcroute");
        assert_eq!(parsed[0].metrics.requests, records[0].metrics.requests);
        let rows = compare_runs(&parsed).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].time_ratio - 1.0).abs() < 1e-9, "self-normalization");
    }

    #[test]
    fn compare_rejects_mismatched_traces() {
        let mk = |hash: &str, sched: &str| RunRecord {
            config_hash: "c".into(),
            trace_hash: hash.into(),
            scheduler: sched.into(),
            seed: 1,
            lambda: 2.0,
            nodes: 5,
            subdivision: 1,
            metrics: SimMetrics {
                requests: 1,
                admitted: 1,
                rejected: 0,
                completed: 1,
                offered_volume: 1.0,
                rejected_volume: 0.0,
                rejected_fraction: 0.0,
                per_request_time_s: 1e-6,
                admit_mean_s: 1e-6,
                admit_p99_s: 1e-6,
                admit_mean_admitted_s: 1e-6,
                admit_total_s: 1e-6,
                boundary_total_s: 0.0,
                pulled_volume: 0.0,
                pushed_volume: 0.0,
                max_push_passes: 0,
                boundaries: 1,
                violations: 0,
            },
            version: "0".into(),
        };
        let records = vec![mk("aaa", "dcroute"), mk("bbb", "ksp-lp:1")];
        assert!(compare_runs(&records).is_err());
    }

    #[test]
    fn determinism_same_seed_same_volumes() {
        let cfg = ExperimentConfig {
            name: "d".into(),
            topology: TopologySource::GScale,
            workload: WorkloadConfig { lambda: 3.0, horizon: 30, ..Default::default() },
            schedulers: vec![SchedulerKind::DcRoute],
            subdivision: 1,
            seeds: vec![42],
            fast: false,
            out_dir: None,
        };
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a[0].trace_hash, b[0].trace_hash);
        assert_eq!(a[0].metrics.offered_volume, b[0].metrics.offered_volume);
        assert_eq!(a[0].metrics.rejected_volume, b[0].metrics.rejected_volume);
        assert_eq!(a[0].metrics.admitted, b[0].metrics.admitted);
    }
}
