//! Synthetic traffic generation and trace serialization.
//!
//! Arrival counts per slot are Poisson; request durations are exponential
//! (ceiling-rounded, at least one slot); volumes are exponential with mean
//! `vol_fraction` of the largest volume a single full-capacity path could
//! carry before the deadline, clamped to that maximum. Four independent
//! RNG streams (arrivals / endpoints / durations / volumes) are derived from
//! one seed so changing one distribution never perturbs the others.

use crate::scalar::Scalar;
use crate::timeline::SlotIndex;
use crate::topology::{NodeId, Topology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

/// One transfer demand of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry<F> {
    pub arrival: SlotIndex,
    pub src: NodeId,
    pub dst: NodeId,
    pub vol: F,
    pub dl: SlotIndex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadConfig {
    /// Mean arrivals per slot.
    pub lambda: f64,
    /// Total slots generating arrivals.
    pub horizon: u64,
    /// Mean request duration in slots.
    pub mean_length: f64,
    /// Mean volume as a fraction of the per-path maximum before the deadline.
    pub vol_fraction: f64,
    pub seed: u64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig { lambda: 6.0, horizon: 500, mean_length: 10.0, vol_fraction: 1.0 / 8.0, seed: 1 }
    }
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<(), TraceError> {
        if self.lambda <= 0.0 || self.horizon == 0 || self.mean_length < 1.0 {
            return Err(TraceError::BadConfig(format!("{self:?}")));
        }
        if !(self.vol_fraction > 0.0 && self.vol_fraction <= 1.0) {
            return Err(TraceError::BadConfig(format!("vol_fraction {} outside (0,1]", self.vol_fraction)));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("bad workload config: {0}")]
    BadConfig(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct Trace<F> {
    pub entries: Vec<TraceEntry<F>>,
    /// How many volumes hit the per-path maximum and were clamped.
    pub clamped: usize,
}

fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> u64 {
    // Knuth's product method; fine for the desk-scale rates used here.
    let limit = (-lambda).exp();
    let mut k = 0u64;
    let mut p = 1.0;
    loop {
        p *= rng.gen::<f64>();
        if p <= limit {
            return k;
        }
        k += 1;
    }
}

fn exponential(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
    loop {
        let u: f64 = rng.gen();
        let x = -mean * (1.0 - u).ln();
        if x > 0.0 {
            return x;
        }
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Generates a trace; a pure function of (config, topology node count and
/// capacity). Entries are ordered by arrival slot, then generation order.
pub fn generate_trace<F: Scalar>(cfg: &WorkloadConfig, topo: &Topology<F>) -> Result<Trace<F>, TraceError> {
    cfg.validate()?;
    let n = topo.num_nodes();
    if n < 2 {
        return Err(TraceError::BadConfig("topology needs at least two nodes".into()));
    }
    // the per-slot rate bound of a full-capacity path
    let cap = topo
        .edges()
        .iter()
        .map(|e| e.capacity.to_f64_lossy())
        .fold(f64::NEG_INFINITY, f64::max);

    let mut arrivals_rng = stream(cfg.seed, 0);
    let mut endpoints_rng = stream(cfg.seed, 1);
    let mut durations_rng = stream(cfg.seed, 2);
    let mut volumes_rng = stream(cfg.seed, 3);

    let mut entries = Vec::new();
    let mut clamped = 0usize;
    for slot in 0..cfg.horizon {
        let count = poisson(&mut arrivals_rng, cfg.lambda);
        for _ in 0..count {
            let src = endpoints_rng.gen_range(0..n);
            let mut dst = endpoints_rng.gen_range(0..n - 1);
            if dst >= src {
                dst += 1;
            }
            let length = exponential(&mut durations_rng, cfg.mean_length).ceil().max(1.0) as u64;
            let max_vol = cap * length as f64;
            let mut vol = exponential(&mut volumes_rng, cfg.vol_fraction * max_vol);
            if vol >= max_vol {
                vol = max_vol;
                clamped += 1;
            }
            entries.push(TraceEntry {
                arrival: slot,
                src,
                dst,
                vol: F::from_f64_lossy(vol),
                dl: slot + length,
            });
        }
    }
    Ok(Trace { entries, clamped })
}

/// CSV with header `arrival,src,dst,vol,dl`; volumes carry 9 decimals so the
/// round-trip is lossless for the simulation's value range.
pub fn format_trace<F: Scalar>(entries: &[TraceEntry<F>]) -> String {
    let mut out = String::from("arrival,src,dst,vol,dl\n");
    for e in entries {
        let _ = writeln!(out, "{},{},{},{:.9},{}", e.arrival, e.src, e.dst, e.vol.to_f64_lossy(), e.dl);
    }
    out
}

pub fn save_trace<F: Scalar>(path: impl AsRef<Path>, entries: &[TraceEntry<F>]) -> Result<(), TraceError> {
    std::fs::write(path, format_trace(entries))?;
    Ok(())
}

pub fn parse_trace<F: Scalar>(text: &str) -> Result<Vec<TraceEntry<F>>, TraceError> {
    let mut entries = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if !saw_header {
            if line != "arrival,src,dst,vol,dl" {
                return Err(TraceError::Parse { line: line_no, msg: format!("bad header {line:?}") });
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(TraceError::Parse { line: line_no, msg: format!("expected 5 fields, got {}", fields.len()) });
        }
        let parse_u64 = |s: &str, what: &str| -> Result<u64, TraceError> {
            s.trim().parse().map_err(|_| TraceError::Parse { line: line_no, msg: format!("bad {what}: {s:?}") })
        };
        let arrival = parse_u64(fields[0], "arrival")?;
        let src = parse_u64(fields[1], "src")? as usize;
        let dst = parse_u64(fields[2], "dst")? as usize;
        let vol: f64 = fields[3]
            .trim()
            .parse()
            .map_err(|_| TraceError::Parse { line: line_no, msg: format!("bad vol: {:?}", fields[3]) })?;
        let dl = parse_u64(fields[4], "dl")?;
        if dl <= arrival {
            return Err(TraceError::Parse { line: line_no, msg: format!("dl {dl} <= arrival {arrival}") });
        }
        if vol <= 0.0 {
            return Err(TraceError::Parse { line: line_no, msg: format!("non-positive volume {vol}") });
        }
        if src == dst {
            return Err(TraceError::Parse { line: line_no, msg: format!("src == dst == {src}") });
        }
        entries.push(TraceEntry { arrival, src, dst, vol: F::from_f64_lossy(vol), dl });
    }
    if !saw_header {
        return Err(TraceError::Parse { line: 0, msg: "missing header".into() });
    }
    Ok(entries)
}

pub fn load_trace<F: Scalar>(path: impl AsRef<Path>) -> Result<Vec<TraceEntry<F>>, TraceError> {
    parse_trace(&std::fs::read_to_string(path)?)
}
