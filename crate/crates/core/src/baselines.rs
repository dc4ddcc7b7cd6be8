//! Comparison allocators: a global multipath LP over all edges, a k-shortest-
//! paths LP, and pseudo-integer-programming variants (one LP per candidate
//! path) that keep every transfer on a single path. Plus an exhaustive
//! single-path admission oracle for property tests.
//!
//! All of them re-plan every active request from scratch at each arrival and
//! admit the newcomer iff the joint plan is feasible; the objective is
//! feasibility-first with a minimax tie-break (minimize the maximum
//! per-channel per-slot load), which preserves headroom for later arrivals.
//!
//! Model sizes are kept at desk scale by two exact reductions: slots are
//! aggregated into the intervals between consecutive distinct deadlines
//! (every demand window starts at t_now+1, so spreading an interval's volume
//! uniformly over its slots preserves both feasibility and the minimax
//! objective), and the global model aggregates commodities by source node
//! (single-source multi-sink flows decompose exactly; per-request demand
//! splits stay explicit).

use crate::lp::{LpBackend, LpError, LpModel, LpStatus, Relation, Sense, SolveOptions, VarId};
use crate::scalar::Scalar;
use crate::scheduler::{PathAssignment, Request, RequestState, Scheduler, SchedulerError};
use crate::timeline::{AllocationGrid, RequestId, SlotIndex};
use crate::topology::{k_shortest_paths, path_channels, ChannelId, NodeId, NodePath, Topology};
use std::collections::BTreeMap;
use thiserror::Error;

/// Which baseline allocator to run. The paper-scale parameters are K in
/// {1,3,5,7} for the multipath k-shortest-paths LP and K = 20 for the
/// single-path variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    GlobalLp,
    KspLp { k: usize },
    /// Pure minimum cost: the feasible candidate with the smallest objective.
    PipPmc { k: usize },
    /// Shortest path, minimum cost: smallest objective among the feasible
    /// candidates of minimal hop count.
    PipSpmc { k: usize },
}

impl BaselineKind {
    pub fn tag(self) -> String {
        match self {
            BaselineKind::GlobalLp => "global-lp".into(),
            BaselineKind::KspLp { k } => format!("ksp-lp:{k}"),
            BaselineKind::PipPmc { k } if k == 20 => "pip-pmc".into(),
            BaselineKind::PipPmc { k } => format!("pip-pmc:{k}"),
            BaselineKind::PipSpmc { k } if k == 20 => "pip-spmc".into(),
            BaselineKind::PipSpmc { k } => format!("pip-spmc:{k}"),
        }
    }
}

/// One demand row of a model: ship `vol` from src to dst within
/// (t_now, dl], either over anything (global) or over candidate paths.
#[derive(Debug, Clone)]
pub struct Demand<F> {
    pub id: RequestId,
    pub src: NodeId,
    pub dst: NodeId,
    pub vol: F,
    pub dl: SlotIndex,
    pub routes: RouteSet,
}

#[derive(Debug, Clone)]
pub enum RouteSet {
    AllEdges,
    Paths(Vec<Vec<ChannelId>>),
}

/// Marks a channel with no flow variable (arcs into a commodity's source).
const NO_VAR: VarId = usize::MAX;

/// Objective values for candidate comparison, quantized at the solver
/// feasibility tolerance: differences below it are pivot noise, and two
/// mathematically tied candidates must resolve by candidate order, not by
/// which one drew the luckier last ulp.
fn quantize<F: Scalar>(z: F) -> i64 {
    (z.to_f64_lossy() * 1e7).round() as i64
}

/// Deadline intervals partitioning (t_now, max dl]: interval i covers
/// (ends[i-1], ends[i]] with ends[-1] = t_now.
#[derive(Debug, Clone)]
struct Intervals {
    t_now: SlotIndex,
    ends: Vec<SlotIndex>,
}

impl Intervals {
    fn build(t_now: SlotIndex, deadlines: impl Iterator<Item = SlotIndex>) -> Self {
        let mut ends: Vec<SlotIndex> = deadlines.filter(|&d| d > t_now).collect();
        ends.sort_unstable();
        ends.dedup();
        Intervals { t_now, ends }
    }

    fn count(&self) -> usize {
        self.ends.len()
    }

    fn start(&self, i: usize) -> SlotIndex {
        if i == 0 {
            self.t_now
        } else {
            self.ends[i - 1]
        }
    }

    fn width(&self, i: usize) -> u64 {
        self.ends[i] - self.start(i)
    }

    fn rank(&self, dl: SlotIndex) -> usize {
        self.ends.binary_search(&dl).expect("every demand deadline is an interval end")
    }

    fn slots(&self, i: usize) -> impl Iterator<Item = SlotIndex> {
        self.start(i) + 1..=self.ends[i]
    }
}

/// Variable layout of a built model, for extracting the plan afterwards.
pub struct MultipathModel<F> {
    pub lp: LpModel<F>,
    intervals: Intervals,
    /// per demand: interval -> var layout
    demand_vars: Vec<DemandVars>,
    /// per source node: interval -> per channel flow var
    flow_vars: BTreeMap<NodeId, Vec<Vec<VarId>>>,
    num_channels: usize,
}

enum DemandVars {
    /// q[interval]
    Split(Vec<VarId>),
    /// q[path][interval]
    PerPath(Vec<Vec<VarId>>),
}

/// Builds the joint re-planning LP for the given demands. Capacity and
/// minimax rows are per (channel, interval); feasibility of the model is the
/// admission test.
pub fn build_multipath_model<F: Scalar>(topo: &Topology<F>, t_now: SlotIndex, demands: &[Demand<F>]) -> MultipathModel<F> {
    let intervals = Intervals::build(t_now, demands.iter().map(|d| d.dl));
    let n_chan = topo.num_channels();
    let mut lp = LpModel::new(Sense::Minimize);
    // With uniform capacities the per-cell capacity rows are implied by the
    // minimax rows plus an upper bound on z (max load <= cap), which halves
    // the row count; heterogeneous capacities keep explicit rows.
    let uniform_cap = topo
        .edges()
        .iter()
        .all(|e| e.capacity == topo.edges()[0].capacity)
        .then(|| topo.edges()[0].capacity);
    let z = match uniform_cap {
        Some(cap) if n_chan > 0 => lp.add_bounded_var("z", F::one(), cap),
        _ => lp.add_var("z", F::one()),
    };
    debug_assert_eq!(z, 0);

    // flow variables per source present among all-edges demands; arcs into
    // the source itself are dropped (any solution using them has a cycle
    // whose removal only lowers loads, so the restriction is exact)
    let mut flow_vars: BTreeMap<NodeId, Vec<Vec<VarId>>> = BTreeMap::new();
    for d in demands {
        if matches!(d.routes, RouteSet::AllEdges) {
            let rank = intervals.rank(d.dl);
            let entry = flow_vars.entry(d.src).or_default();
            while entry.len() <= rank {
                let i = entry.len();
                let row: Vec<VarId> = (0..n_chan)
                    .map(|ch| {
                        if topo.channel_endpoints(ch).1 == d.src {
                            NO_VAR
                        } else {
                            lp.add_var(format!("f_{}_{}_{}", d.src, i, ch), F::zero())
                        }
                    })
                    .collect();
                entry.push(row);
            }
        }
    }

    let mut demand_vars = Vec::with_capacity(demands.len());
    for d in demands {
        let rank = intervals.rank(d.dl);
        match &d.routes {
            RouteSet::AllEdges => {
                let qs: Vec<VarId> =
                    (0..=rank).map(|i| lp.add_var(format!("q_{}_{}", d.id, i), F::zero())).collect();
                lp.add_constraint(qs.iter().map(|&v| (v, F::one())).collect(), Relation::Eq, d.vol);
                demand_vars.push(DemandVars::Split(qs));
            }
            RouteSet::Paths(paths) => {
                let per_path: Vec<Vec<VarId>> = paths
                    .iter()
                    .enumerate()
                    .map(|(p, _)| {
                        (0..=rank).map(|i| lp.add_var(format!("x_{}_{}_{}", d.id, p, i), F::zero())).collect()
                    })
                    .collect();
                let all: Vec<(VarId, F)> =
                    per_path.iter().flatten().map(|&v| (v, F::one())).collect();
                lp.add_constraint(all, Relation::Eq, d.vol);
                demand_vars.push(DemandVars::PerPath(per_path));
            }
        }
    }

    // flow conservation: per source, interval and node != source, the net
    // inflow equals the volume delivered there in that interval
    let mut in_channels: Vec<Vec<ChannelId>> = vec![Vec::new(); topo.num_nodes()];
    let mut out_channels: Vec<Vec<ChannelId>> = vec![Vec::new(); topo.num_nodes()];
    for ch in 0..n_chan {
        let (from, to) = topo.channel_endpoints(ch);
        out_channels[from].push(ch);
        in_channels[to].push(ch);
    }
    for (&s, per_interval) in &flow_vars {
        for (i, row) in per_interval.iter().enumerate() {
            for v in 0..topo.num_nodes() {
                if v == s {
                    continue;
                }
                let mut coeffs: Vec<(VarId, F)> =
                    Vec::with_capacity(in_channels[v].len() + out_channels[v].len() + 2);
                for &ch in &in_channels[v] {
                    if row[ch] != NO_VAR {
                        coeffs.push((row[ch], F::one()));
                    }
                }
                for &ch in &out_channels[v] {
                    if row[ch] != NO_VAR {
                        coeffs.push((row[ch], -F::one()));
                    }
                }
                for (d, dv) in demands.iter().zip(&demand_vars) {
                    if d.src == s && d.dst == v {
                        if let DemandVars::Split(qs) = dv {
                            if i < qs.len() {
                                coeffs.push((qs[i], -F::one()));
                            }
                        }
                    }
                }
                lp.add_constraint(coeffs, Relation::Eq, F::zero());
            }
        }
    }

    // capacity and minimax rows per (channel, interval), assembled from a
    // channel -> (demand, path) incidence so the build stays O(nonzeros)
    let mut incidence: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_chan];
    for (di, d) in demands.iter().enumerate() {
        if let RouteSet::Paths(paths) = &d.routes {
            for (p, path) in paths.iter().enumerate() {
                for &ch in path {
                    incidence[ch].push((di, p));
                }
            }
        }
    }
    for i in 0..intervals.count() {
        let w = F::from_u64(intervals.width(i)).unwrap();
        for ch in 0..n_chan {
            let mut coeffs: Vec<(VarId, F)> = Vec::new();
            for per_interval in flow_vars.values() {
                if let Some(row) = per_interval.get(i) {
                    if row[ch] != NO_VAR {
                        coeffs.push((row[ch], F::one()));
                    }
                }
            }
            for &(di, p) in &incidence[ch] {
                if let DemandVars::PerPath(vars) = &demand_vars[di] {
                    if let Some(&v) = vars[p].get(i) {
                        coeffs.push((v, F::one()));
                    }
                }
            }
            if coeffs.is_empty() {
                continue;
            }
            if uniform_cap.is_none() {
                lp.add_constraint(coeffs.clone(), Relation::Le, w * topo.channel_capacity(ch));
            }
            let mut zrow = coeffs;
            zrow.push((z, -w));
            lp.add_constraint(zrow, Relation::Le, F::zero());
        }
    }

    MultipathModel { lp, intervals, demand_vars, flow_vars, num_channels: n_chan }
}

/// A feasible plan extracted from an LP solution: exact per-request per-slot
/// rates plus the per-channel share ledger.
struct ExtractedPlan<F> {
    /// per demand: slot -> rate
    rates: Vec<BTreeMap<SlotIndex, F>>,
    /// per demand: (channel, slot) -> share
    shares: Vec<BTreeMap<(ChannelId, SlotIndex), F>>,
}

#[derive(Debug, Error)]
enum PlanError {
    #[error("solution ships {got} of demand {demand}, expected {want}")]
    DemandMismatch { demand: RequestId, got: f64, want: f64 },
    #[error("plan exceeds capacity on channel {ch} at slot {t}: {load} > {cap}")]
    OverCapacity { ch: ChannelId, t: SlotIndex, load: f64, cap: f64 },
}

impl<F: Scalar> MultipathModel<F> {
    /// Turns an optimal solution into exact per-slot rates and shares:
    /// interval volumes spread uniformly over their slots, every demand
    /// rescaled to ship exactly its volume, and capacities re-verified
    /// arithmetically rather than trusted from the solver.
    fn extract(&self, topo: &Topology<F>, demands: &[Demand<F>], values: &[F]) -> Result<ExtractedPlan<F>, PlanError> {
        let iv = &self.intervals;
        let mut rates: Vec<BTreeMap<SlotIndex, F>> = vec![BTreeMap::new(); demands.len()];
        let mut shares: Vec<BTreeMap<(ChannelId, SlotIndex), F>> = vec![BTreeMap::new(); demands.len()];

        // per (source, interval): total split volume, for attributing the
        // aggregated source flow back to individual demands
        let mut source_totals: BTreeMap<(NodeId, usize), F> = BTreeMap::new();
        for (d, dv) in demands.iter().zip(&self.demand_vars) {
            if let DemandVars::Split(qs) = dv {
                for (i, &q) in qs.iter().enumerate() {
                    let e = source_totals.entry((d.src, i)).or_insert_with(F::zero);
                    *e = *e + values[q];
                }
            }
        }

        for (di, (d, dv)) in demands.iter().zip(&self.demand_vars).enumerate() {
            match dv {
                DemandVars::Split(qs) => {
                    for (i, &qv) in qs.iter().enumerate() {
                        let q = values[qv].max(F::zero());
                        if q <= F::zero() {
                            continue;
                        }
                        let w = F::from_u64(iv.width(i)).unwrap();
                        let per_slot = q / w;
                        for t in iv.slots(i) {
                            let r = rates[di].entry(t).or_insert_with(F::zero);
                            *r = *r + per_slot;
                        }
                        // attribute the source flow proportionally
                        let total = source_totals[&(d.src, i)];
                        if total > F::zero() {
                            let frac = q / total;
                            let flows = &self.flow_vars[&d.src][i];
                            for ch in 0..self.num_channels {
                                if flows[ch] == NO_VAR {
                                    continue;
                                }
                                let f = values[flows[ch]].max(F::zero());
                                if f <= F::zero() {
                                    continue;
                                }
                                let per_slot_share = f * frac / w;
                                for t in iv.slots(i) {
                                    let e = shares[di].entry((ch, t)).or_insert_with(F::zero);
                                    *e = *e + per_slot_share;
                                }
                            }
                        }
                    }
                }
                DemandVars::PerPath(per_path) => {
                    let RouteSet::Paths(paths) = &d.routes else { unreachable!() };
                    for (p, vars) in per_path.iter().enumerate() {
                        for (i, &qv) in vars.iter().enumerate() {
                            let q = values[qv].max(F::zero());
                            if q <= F::zero() {
                                continue;
                            }
                            let w = F::from_u64(iv.width(i)).unwrap();
                            let per_slot = q / w;
                            for t in iv.slots(i) {
                                let r = rates[di].entry(t).or_insert_with(F::zero);
                                *r = *r + per_slot;
                                for &ch in &paths[p] {
                                    let e = shares[di].entry((ch, t)).or_insert_with(F::zero);
                                    *e = *e + per_slot;
                                }
                            }
                        }
                    }
                }
            }
        }

        // rescale each demand to ship exactly its volume
        for (di, d) in demands.iter().enumerate() {
            let total: F = rates[di].values().copied().fold(F::zero(), |a, b| a + b);
            let rel = (total - d.vol).abs() / (F::one() + d.vol);
            if rel > F::LP_EPS {
                return Err(PlanError::DemandMismatch {
                    demand: d.id,
                    got: total.to_f64_lossy(),
                    want: d.vol.to_f64_lossy(),
                });
            }
            if total > F::zero() {
                let scale = d.vol / total;
                for v in rates[di].values_mut() {
                    *v = *v * scale;
                }
                for v in shares[di].values_mut() {
                    *v = *v * scale;
                }
            }
        }

        // re-verify capacity arithmetically
        let mut loads: BTreeMap<(ChannelId, SlotIndex), F> = BTreeMap::new();
        for per_demand in &shares {
            for (&key, &v) in per_demand {
                let e = loads.entry(key).or_insert_with(F::zero);
                *e = *e + v;
            }
        }
        for (&(ch, t), &load) in &loads {
            let cap = topo.channel_capacity(ch);
            if load > cap + F::GRID_EPS {
                return Err(PlanError::OverCapacity {
                    ch,
                    t,
                    load: load.to_f64_lossy(),
                    cap: cap.to_f64_lossy(),
                });
            }
        }

        Ok(ExtractedPlan { rates, shares })
    }
}

/// LP-driven baseline scheduler state.
pub struct LpBaseline<F> {
    kind: BaselineKind,
    backend: LpBackend,
    /// Committed per-request per-slot rates of the current joint plan.
    plan: BTreeMap<RequestId, BTreeMap<SlotIndex, F>>,
    /// Candidate-path cache (topology is immutable).
    path_cache: BTreeMap<(NodeId, NodeId, usize), Vec<NodePath>>,
    /// Objective value of the last applied plan, for inspection.
    pub last_objective: Option<F>,
}

impl<F: Scalar> LpBaseline<F> {
    pub fn new(kind: BaselineKind) -> Self {
        LpBaseline { kind, backend: LpBackend::Highs, plan: BTreeMap::new(), path_cache: BTreeMap::new(), last_objective: None }
    }

    pub fn with_backend(kind: BaselineKind, backend: LpBackend) -> Self {
        LpBaseline { backend, ..Self::new(kind) }
    }

    fn candidate_paths(&mut self, topo: &Topology<F>, src: NodeId, dst: NodeId, k: usize) -> &[NodePath] {
        self.path_cache
            .entry((src, dst, k))
            .or_insert_with(|| k_shortest_paths(topo, src, dst, k))
    }

    fn solve(&self, lp: &LpModel<F>) -> Result<crate::lp::LpSolution<F>, LpError> {
        crate::lp::solve_with(lp, SolveOptions { backend: self.backend, ..Default::default() })
    }

    /// Active demands (positive residual), in admission order.
    fn active_demands(&mut self, topo: &Topology<F>, requests: &[Request<F>], except: RequestId) -> Vec<Demand<F>> {
        let mut out = Vec::new();
        for r in requests {
            if r.id == except || !r.is_active() || r.residual <= F::GRID_EPS {
                continue;
            }
            let routes = match self.kind {
                BaselineKind::GlobalLp => RouteSet::AllEdges,
                BaselineKind::KspLp { k } => {
                    let paths = self.candidate_paths(topo, r.src, r.dst, k).to_vec();
                    RouteSet::Paths(paths.iter().map(|p| path_channels(topo, p)).collect())
                }
                BaselineKind::PipPmc { .. } | BaselineKind::PipSpmc { .. } => {
                    let path = r.path.as_ref().expect("admitted single-path request has a path");
                    RouteSet::Paths(vec![path.channels.clone()])
                }
            };
            out.push(Demand { id: r.id, src: r.src, dst: r.dst, vol: r.residual, dl: r.dl, routes });
        }
        out
    }

    /// Installs an extracted plan: rewrites grid shares and the rate table.
    fn install(
        &mut self,
        grid: &mut AllocationGrid<F>,
        demands: &[Demand<F>],
        plan: ExtractedPlan<F>,
        objective: F,
    ) -> Result<(), SchedulerError> {
        let max_dl = demands.iter().map(|d| d.dl).max().unwrap_or(grid.t_now() + 1);
        grid.extend_window(max_dl);
        grid.clear_window();
        self.plan.clear();
        for (di, d) in demands.iter().enumerate() {
            for (&(ch, t), &v) in &plan.shares[di] {
                if v > F::GRID_EPS {
                    grid.add_share(ch, t, d.id, v).map_err(SchedulerError::Grid)?;
                }
            }
            self.plan.insert(d.id, plan.rates[di].clone());
        }
        self.last_objective = Some(objective);
        Ok(())
    }

    /// Joint multipath admission: feasibility of the re-planning LP with the
    /// new request included. Solver failures (iteration caps, numerically
    /// unclean solutions) count as rejections, never admissions.
    fn admit_multipath(
        &mut self,
        topo: &Topology<F>,
        grid: &mut AllocationGrid<F>,
        requests: &mut [Request<F>],
        new: RequestId,
    ) -> Result<bool, SchedulerError> {
        let mut demands = self.active_demands(topo, requests, new);
        let r = &requests[new];
        let routes = match self.kind {
            BaselineKind::GlobalLp => RouteSet::AllEdges,
            BaselineKind::KspLp { k } => {
                let paths = self.candidate_paths(topo, r.src, r.dst, k).to_vec();
                if paths.is_empty() {
                    requests[new].state = RequestState::Rejected;
                    return Ok(false);
                }
                RouteSet::Paths(paths.iter().map(|p| path_channels(topo, p)).collect())
            }
            _ => unreachable!("single-path kinds use admit_pip"),
        };
        demands.push(Demand { id: r.id, src: r.src, dst: r.dst, vol: r.vol, dl: r.dl, routes });

        let model = build_multipath_model(topo, grid.t_now(), &demands);
        match self.solve(&model.lp) {
            Ok(sol) if sol.status == LpStatus::Optimal => {
                match model.extract(topo, &demands, &sol.values) {
                    Ok(plan) => {
                        self.install(grid, &demands, plan, sol.objective)?;
                        requests[new].state = RequestState::Admitted;
                        Ok(true)
                    }
                    Err(e) => {
                        eprintln!("warning: {} solution rejected as unclean: {e}", self.kind.tag());
                        requests[new].state = RequestState::Rejected;
                        Ok(false)
                    }
                }
            }
            Ok(_) => {
                requests[new].state = RequestState::Rejected;
                Ok(false)
            }
            Err(e) => {
                eprintln!("warning: {} solver failed, rejecting: {e}", self.kind.tag());
                requests[new].state = RequestState::Rejected;
                Ok(false)
            }
        }
    }

    /// Single-path admission: one LP per candidate path (actives pinned to
    /// their fixed paths, rates free), best candidate by objective. SPMC
    /// stops at the first hop class containing a feasible candidate.
    /// Candidates failing the per-channel cumulative-demand bound are
    /// provably infeasible and skip the solve.
    fn admit_pip(
        &mut self,
        topo: &Topology<F>,
        grid: &mut AllocationGrid<F>,
        requests: &mut [Request<F>],
        new: RequestId,
    ) -> Result<bool, SchedulerError> {
        let (k, shortest_first) = match self.kind {
            BaselineKind::PipPmc { k } => (k, false),
            BaselineKind::PipSpmc { k } => (k, true),
            _ => unreachable!(),
        };
        let base_demands = self.active_demands(topo, requests, new);
        let r = requests[new].clone();
        let candidates = self.candidate_paths(topo, r.src, r.dst, k).to_vec();
        let screen = ChannelPrefixBound::new(topo, grid.t_now(), &base_demands);
        let channel_sets: Vec<Vec<ChannelId>> = candidates.iter().map(|p| path_channels(topo, p)).collect();
        // per-candidate lower bound on the joint minimax objective: a
        // candidate whose bound exceeds the incumbent's optimum cannot win
        // (ties still go to the earlier candidate, which gets solved)
        let lower_bounds: Vec<F> =
            channel_sets.iter().map(|chs| screen.load_lower_bound(chs, r.vol, r.dl)).collect();
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        if !shortest_first {
            // best-first makes the bound prune hardest; the argmin over
            // (quantized objective, candidate index) is order-independent
            order.sort_by(|&a, &b| {
                lower_bounds[a].partial_cmp(&lower_bounds[b]).expect("finite bounds").then(a.cmp(&b))
            });
        }

        // best = (quantized objective, candidate index, model, demands, values)
        let mut best: Option<(i64, usize, MultipathModel<F>, Vec<Demand<F>>, Vec<F>)> = None;
        let mut current_hops: Option<usize> = None;
        for &idx in &order {
            let path = &candidates[idx];
            if shortest_first {
                if let Some(h) = current_hops {
                    if best.is_some() && path.len() - 1 > h {
                        break; // a feasible candidate exists in a shorter class
                    }
                }
                current_hops = Some(path.len() - 1);
            }
            if let Some((bq, bidx, _, _, _)) = &best {
                // the candidate's objective quantizes to at least this
                let qlb = quantize(lower_bounds[idx]) - 1;
                if qlb > *bq {
                    if shortest_first {
                        continue;
                    }
                    break; // bounds ascend along the evaluation order
                }
                if qlb >= *bq && idx > *bidx {
                    continue; // at best a tie, and ties go to the earlier index
                }
            }
            if !screen.may_fit(topo, &channel_sets[idx], r.vol, r.dl) {
                continue; // certainly infeasible: cumulative demand bound
            }
            let mut demands = base_demands.clone();
            demands.push(Demand {
                id: r.id,
                src: r.src,
                dst: r.dst,
                vol: r.vol,
                dl: r.dl,
                routes: RouteSet::Paths(vec![channel_sets[idx].clone()]),
            });
            let model = build_multipath_model(topo, grid.t_now(), &demands);
            match self.solve(&model.lp) {
                Ok(sol) if sol.status == LpStatus::Optimal => {
                    let zq = quantize(sol.objective);
                    let better = match &best {
                        None => true,
                        Some((bq, bidx, _, _, _)) => zq < *bq || (zq == *bq && idx < *bidx),
                    };
                    if better {
                        best = Some((zq, idx, model, demands, sol.values));
                    }
                }
                Ok(_) => {}
                Err(e) => {
                    eprintln!("warning: {} candidate solver failed, skipping: {e}", self.kind.tag());
                }
            }
        }

        if std::env::var_os("DCROUTE_PIP_VERIFY").is_some() {
            // reference pass: solve every candidate, pick argmin (zq, idx)
            let mut reference: Option<(i64, usize)> = None;
            for (idx, path) in candidates.iter().enumerate() {
                if shortest_first {
                    if let Some((_, bidx)) = reference {
                        if path.len() > candidates[bidx].len() {
                            break;
                        }
                    }
                }
                let mut demands = base_demands.clone();
                demands.push(Demand {
                    id: r.id,
                    src: r.src,
                    dst: r.dst,
                    vol: r.vol,
                    dl: r.dl,
                    routes: RouteSet::Paths(vec![channel_sets[idx].clone()]),
                });
                let model = build_multipath_model(topo, grid.t_now(), &demands);
                if let Ok(sol) = self.solve(&model.lp) {
                    if sol.status == LpStatus::Optimal {
                        let zq = quantize(sol.objective);
                        let better = match &reference {
                            None => true,
                            Some((bq, bidx)) => zq < *bq || (zq == *bq && idx < *bidx),
                        };
                        if better {
                            reference = Some((zq, idx));
                        }
                        if quantize(lower_bounds[idx]) - 1 > zq {
                            eprintln!(
                                "PIP VERIFY: lb {} exceeds z* {} for candidate {idx}",
                                lower_bounds[idx].to_f64_lossy(),
                                sol.objective.to_f64_lossy()
                            );
                        }
                    }
                }
            }
            let pruned = best.as_ref().map(|(zq, i, _, _, _)| (*zq, *i));
            if pruned != reference {
                eprintln!(
                    "PIP VERIFY: winner mismatch pruned={pruned:?} reference={reference:?} lbs={:?}",
                    lower_bounds.iter().map(|x| x.to_f64_lossy()).collect::<Vec<_>>()
                );
            }
        }

        match best {
            Some((_zq, idx, model, demands, values)) => match model.extract(topo, &demands, &values) {
                Ok(plan) => {
                    let objective = model.lp.objective_of(&values);
                    self.install(grid, &demands, plan, objective)?;
                    let nodes = candidates[idx].clone();
                    let channels = path_channels(topo, &nodes);
                    requests[new].state = RequestState::Admitted;
                    requests[new].path = Some(PathAssignment { nodes, channels });
                    Ok(true)
                }
                Err(e) => {
                    eprintln!("warning: {} winning candidate unclean, rejecting: {e}", self.kind.tag());
                    requests[new].state = RequestState::Rejected;
                    Ok(false)
                }
            },
            None => {
                requests[new].state = RequestState::Rejected;
                Ok(false)
            }
        }
    }
}

impl<F: Scalar> Scheduler<F> for LpBaseline<F> {
    fn tag(&self) -> String {
        self.kind.tag()
    }

    fn admit(
        &mut self,
        topo: &Topology<F>,
        grid: &mut AllocationGrid<F>,
        requests: &mut [Request<F>],
        new: RequestId,
    ) -> Result<bool, SchedulerError> {
        let r = &requests[new];
        if r.src == r.dst || r.vol <= F::GRID_EPS || r.dl <= grid.t_now() {
            requests[new].state = RequestState::Rejected;
            return Ok(false);
        }
        match self.kind {
            BaselineKind::GlobalLp | BaselineKind::KspLp { .. } => self.admit_multipath(topo, grid, requests, new),
            BaselineKind::PipPmc { .. } | BaselineKind::PipSpmc { .. } => self.admit_pip(topo, grid, requests, new),
        }
    }

    fn planned_rate(&self, _grid: &AllocationGrid<F>, req: &Request<F>, slot: SlotIndex) -> F {
        self.plan
            .get(&req.id)
            .and_then(|rates| rates.get(&slot))
            .copied()
            .unwrap_or_else(F::zero)
    }

    fn check_invariants(
        &self,
        _topo: &Topology<F>,
        grid: &AllocationGrid<F>,
        requests: &[Request<F>],
    ) -> Result<(), String> {
        // every active's future plan ships exactly its residual
        for r in requests {
            if !r.is_active() || r.residual <= F::GRID_EPS {
                continue;
            }
            let planned: F = self
                .plan
                .get(&r.id)
                .map(|rates| {
                    rates
                        .iter()
                        .filter(|(&t, _)| t > grid.t_now())
                        .map(|(_, &v)| v)
                        .fold(F::zero(), |a, b| a + b)
                })
                .unwrap_or_else(F::zero);
            let tol = F::LP_EPS * (F::one() + r.residual);
            if (planned - r.residual).abs() > tol {
                return Err(format!(
                    "request {} plans {} against residual {}",
                    r.id,
                    planned.to_f64_lossy(),
                    r.residual.to_f64_lossy()
                ));
            }
        }
        Ok(())
    }
}

/// Exact necessary condition for fixed-path feasibility: every unit of a
/// fixed-path demand with deadline <= T crosses each of its channels within
/// (t_now, T], so the cumulative demand routed over a channel by T can never
/// exceed capacity * (T - t_now). A candidate violating this on any of its
/// channels is infeasible without solving anything.
struct ChannelPrefixBound<F> {
    t_now: SlotIndex,
    /// Per channel: ascending (deadline, cumulative volume) steps.
    curves: Vec<Vec<(SlotIndex, F)>>,
}

impl<F: Scalar> ChannelPrefixBound<F> {
    fn new(topo: &Topology<F>, t_now: SlotIndex, demands: &[Demand<F>]) -> Self {
        let mut per: Vec<Vec<(SlotIndex, F)>> = vec![Vec::new(); topo.num_channels()];
        for d in demands {
            if let RouteSet::Paths(paths) = &d.routes {
                // only single fixed routes pin volume to channels
                if paths.len() == 1 {
                    for &ch in &paths[0] {
                        per[ch].push((d.dl, d.vol));
                    }
                }
            }
        }
        let curves = per
            .into_iter()
            .map(|mut steps| {
                steps.sort_by_key(|&(dl, _)| dl);
                let mut cum = F::zero();
                steps
                    .into_iter()
                    .map(|(dl, v)| {
                        cum = cum + v;
                        (dl, cum)
                    })
                    .collect()
            })
            .collect();
        ChannelPrefixBound { t_now, curves }
    }

    /// Lower bound on the minimax per-slot load of any joint plan that adds
    /// `vol` by `dl` over `channels`: everything due by a horizon T must
    /// average at least cumulative/(T - t_now) on each channel it crosses.
    fn load_lower_bound(&self, channels: &[ChannelId], vol: F, dl: SlotIndex) -> F {
        let mut lb = F::zero();
        for &ch in channels {
            let curve = &self.curves[ch];
            let mut cum_dl = F::zero();
            for &(t, cum) in curve.iter() {
                if t <= dl {
                    cum_dl = cum;
                } else {
                    lb = lb.max((cum + vol) / F::from_u64(t - self.t_now).unwrap());
                }
            }
            lb = lb.max((cum_dl + vol) / F::from_u64(dl - self.t_now).unwrap());
        }
        lb
    }

    /// Whether `vol` by `dl` could possibly fit over `channels` alongside the
    /// fixed-path demands. The demands alone satisfy the bound (they hold a
    /// feasible plan), so only horizons at and beyond `dl` need checking.
    fn may_fit(&self, topo: &Topology<F>, channels: &[ChannelId], vol: F, dl: SlotIndex) -> bool {
        for &ch in channels {
            let cap = topo.channel_capacity(ch);
            let curve = &self.curves[ch];
            let cum_at = |t: SlotIndex| -> F {
                match curve.binary_search_by_key(&t, |&(d, _)| d) {
                    Ok(mut i) => {
                        while i + 1 < curve.len() && curve[i + 1].0 == t {
                            i += 1;
                        }
                        curve[i].1
                    }
                    Err(0) => F::zero(),
                    Err(i) => curve[i - 1].1,
                }
            };
            let budget = |t: SlotIndex| cap * F::from_u64(t - self.t_now).unwrap() + F::GRID_EPS;
            if cum_at(dl) + vol > budget(dl) {
                return false;
            }
            for &(t, cum) in curve.iter().filter(|&&(t, _)| t > dl) {
                if cum + vol > budget(t) {
                    return false;
                }
            }
        }
        true
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance too large for exhaustive path enumeration ({nodes} nodes)")]
    TooLarge { nodes: usize },
}

#[derive(Debug, Clone)]
pub struct PathYield<F> {
    pub path: NodePath,
    pub deliverable: F,
}

/// Exhaustive single-path admission oracle: for every simple path the
/// deliverable volume before `dl` is the sum over slots in (t_now, dl] of
/// the path-wide residual capacity (ALAP back-fill on a fixed path is a
/// greedy optimum, so this closed form is exact). Instances beyond a few
/// nodes are refused.
pub fn oracle_single_path<F: Scalar>(
    topo: &Topology<F>,
    grid: &AllocationGrid<F>,
    src: NodeId,
    dst: NodeId,
    dl: SlotIndex,
) -> Result<Vec<PathYield<F>>, OracleError> {
    if topo.num_nodes() > 8 {
        return Err(OracleError::TooLarge { nodes: topo.num_nodes() });
    }
    let mut out = Vec::new();
    for path in crate::topology::all_simple_paths(topo, src, dst) {
        let channels = path_channels(topo, &path);
        let mut total = F::zero();
        for t in grid.t_now() + 1..=dl.min(grid.t_end()) {
            let slot_rate = channels.iter().map(|&ch| grid.free(ch, t)).fold(F::infinity(), |a, b| a.min(b));
            total = total + slot_rate;
        }
        // slots beyond the window are entirely free
        if dl > grid.t_end() {
            let cap = channels
                .iter()
                .map(|&ch| topo.channel_capacity(ch))
                .fold(F::infinity(), |a, b| a.min(b));
            total = total + cap * F::from_u64(dl - grid.t_end()).unwrap();
        }
        out.push(PathYield { path, deliverable: total });
    }
    Ok(out)
}

/// Best deliverable volume over all simple paths.
pub fn oracle_best_volume<F: Scalar>(
    topo: &Topology<F>,
    grid: &AllocationGrid<F>,
    src: NodeId,
    dst: NodeId,
    dl: SlotIndex,
) -> Result<F, OracleError> {
    Ok(oracle_single_path(topo, grid, src, dst, dl)?
        .into_iter()
        .map(|y| y.deliverable)
        .fold(F::zero(), |a, b| a.max(b)))
}
