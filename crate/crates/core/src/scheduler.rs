//! The deadline-guaranteeing single-path scheduler.
//!
//! Admission control works purely on residual bandwidth: a new request is
//! routed by an iterative edge-pruned BFS over per-channel load sums, then
//! back-filled as late as possible (ALAP) between the next-but-one slot and
//! its deadline. At every slot boundary traffic is pulled from the nearest
//! future slots into the upcoming slot to maximize utilization (PullBack),
//! the ALAP property is then restored by sweeping shares toward their
//! deadlines (PushForward), and the upcoming slot is finalized (Walk).
//!
//! No preemption: an admitted request keeps its path and its admission for
//! life, and the scheduler guarantees it completes by its deadline.

use crate::scalar::Scalar;
use crate::timeline::{AllocationGrid, GridError, RequestId, SlotIndex};
use crate::topology::{ChannelId, NodeId, Topology};
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequestState {
    Pending,
    Admitted,
    Rejected,
    Completed,
}

/// The single path bound to an admitted request; immutable for its lifetime.
#[derive(Debug, Clone, PartialEq)]
pub struct PathAssignment {
    pub nodes: Vec<NodeId>,
    pub channels: Vec<ChannelId>,
}

/// A transfer demand and its lifecycle state.
#[derive(Debug, Clone)]
pub struct Request<F> {
    pub id: RequestId,
    pub src: NodeId,
    pub dst: NodeId,
    pub vol: F,
    pub dl: SlotIndex,
    pub arrival: SlotIndex,
    pub state: RequestState,
    pub residual: F,
    pub path: Option<PathAssignment>,
}

impl<F: Scalar> Request<F> {
    pub fn new(id: RequestId, src: NodeId, dst: NodeId, vol: F, dl: SlotIndex, arrival: SlotIndex) -> Self {
        Request { id, src, dst, vol, dl, arrival, state: RequestState::Pending, residual: vol, path: None }
    }

    /// Admitted and not yet completed.
    pub fn is_active(&self) -> bool {
        self.state == RequestState::Admitted
    }
}

#[derive(Debug, Error)]
pub enum SchedulerError {
    #[error("grid: {0}")]
    Grid(#[from] GridError),
    #[error("lp: {0}")]
    Lp(#[from] crate::lp::LpError),
    #[error("admitted request {request} missed its deadline at slot {slot} with residual {residual}")]
    DeadlineViolation { request: RequestId, slot: SlotIndex, residual: f64 },
    #[error("{0}")]
    Internal(String),
}

/// Per-boundary maintenance stats.
#[derive(Debug, Clone, Copy, Default)]
pub struct BoundaryStats<F> {
    pub pulled: F,
    pub pushed: F,
    pub push_passes: u32,
}

/// Finalized per-request rates for one slot.
#[derive(Debug, Clone)]
pub struct SlotSchedule<F> {
    pub slot: SlotIndex,
    pub entries: Vec<ScheduleEntry<F>>,
}

#[derive(Debug, Clone)]
pub struct ScheduleEntry<F> {
    pub request: RequestId,
    pub rate: F,
    /// Node sequence for single-path schedulers; None for multipath plans.
    pub path: Option<Vec<NodeId>>,
}

impl<F: Scalar> SlotSchedule<F> {
    /// CSV rows `slot,request_id,rate,path`, rate with 9 decimals, path as
    /// hyphen-joined node ids (`-` when multipath).
    pub fn csv_rows(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|e| {
                let path = match &e.path {
                    Some(nodes) => nodes.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("-"),
                    None => "-".to_string(),
                };
                format!("{},{},{:.9},{}", self.slot, e.request, e.rate.to_f64_lossy(), path)
            })
            .collect()
    }
}

/// Admission + boundary behavior shared by every allocator the harness
/// drives. One mutator at a time; the harness serializes calls.
pub trait Scheduler<F: Scalar> {
    fn tag(&self) -> String;

    /// Decides `requests[new]`, updating its state (and the grid on
    /// admission). Returns whether it was admitted.
    fn admit(
        &mut self,
        topo: &Topology<F>,
        grid: &mut AllocationGrid<F>,
        requests: &mut [Request<F>],
        new: RequestId,
    ) -> Result<bool, SchedulerError>;

    /// Slot-boundary maintenance, run after arrivals and before the next
    /// slot is finalized.
    fn boundary(
        &mut self,
        _topo: &Topology<F>,
        _grid: &mut AllocationGrid<F>,
        _requests: &[Request<F>],
    ) -> Result<BoundaryStats<F>, SchedulerError> {
        Ok(BoundaryStats::default())
    }

    /// Rate `req` transmits in `slot` under the current plan.
    fn planned_rate(&self, grid: &AllocationGrid<F>, req: &Request<F>, slot: SlotIndex) -> F;

    /// Scheduler-specific invariants, swept at boundaries in checked runs.
    fn check_invariants(
        &self,
        _topo: &Topology<F>,
        _grid: &AllocationGrid<F>,
        _requests: &[Request<F>],
    ) -> Result<(), String> {
        Ok(())
    }
}

/// BFS labels per node: hop count, bottleneck load and summed load of the
/// tree path from the source.
#[derive(Debug, Clone)]
struct NodeLabel<F> {
    visited: bool,
    hops: usize,
    bottleneck: F,
    load_sum: F,
    pred: Option<(NodeId, ChannelId)>,
}

impl<F: Scalar> NodeLabel<F> {
    fn reset(&mut self) {
        self.visited = false;
        self.hops = 0;
        self.bottleneck = F::zero();
        self.load_sum = F::zero();
        self.pred = None;
    }
}

/// Destination label of one BFS probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfsResult<F> {
    pub hops: usize,
    pub bottleneck: F,
    pub load_sum: F,
}

/// The ALAP single-path scheduler. Holds reusable search scratch; all
/// durable state lives in the grid and the request table.
pub struct DcRoute<F> {
    labels: Vec<NodeLabel<F>>,
    use_flags: Vec<bool>,
    queue: VecDeque<NodeId>,
}

impl<F: Scalar> Default for DcRoute<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> DcRoute<F> {
    pub fn new() -> Self {
        DcRoute { labels: Vec::new(), use_flags: Vec::new(), queue: VecDeque::new() }
    }

    fn ensure_scratch(&mut self, topo: &Topology<F>) {
        if self.labels.len() != topo.num_nodes() {
            self.labels = vec![
                NodeLabel { visited: false, hops: 0, bottleneck: F::zero(), load_sum: F::zero(), pred: None };
                topo.num_nodes()
            ];
        }
        if self.use_flags.len() != topo.num_channels() {
            self.use_flags = vec![true; topo.num_channels()];
        }
    }

    /// Enables or disables every channel for the next searches.
    pub fn reset_use_flags(&mut self, topo: &Topology<F>, enabled: bool) {
        self.ensure_scratch(topo);
        self.use_flags.fill(enabled);
    }

    /// Breadth-first probe from `src` over use-enabled channels, each channel
    /// weighted by S(dl, channel) in travel direction. Neighbors are visited
    /// in ascending node order (part of the determinism contract). Returns
    /// the destination label, or None when unreachable; the predecessor tree
    /// stays valid until the next probe.
    pub fn bfs_test(
        &mut self,
        topo: &Topology<F>,
        grid: &AllocationGrid<F>,
        src: NodeId,
        dst: NodeId,
        dl: SlotIndex,
    ) -> Option<BfsResult<F>> {
        self.ensure_scratch(topo);
        for label in &mut self.labels {
            label.reset();
        }
        self.queue.clear();
        self.queue.push_back(src);
        self.labels[src].visited = true;
        while let Some(node) = self.queue.pop_front() {
            if node == dst {
                let l = &self.labels[node];
                return Some(BfsResult { hops: l.hops, bottleneck: l.bottleneck, load_sum: l.load_sum });
            }
            for (next, ch) in topo.neighbors(node) {
                if self.use_flags[ch] && !self.labels[next].visited {
                    let load = grid.prefix_load(ch, dl);
                    let node_label = self.labels[node].clone();
                    let next_label = &mut self.labels[next];
                    next_label.visited = true;
                    next_label.hops = node_label.hops + 1;
                    next_label.bottleneck = node_label.bottleneck.max(load);
                    next_label.load_sum = node_label.load_sum + load;
                    next_label.pred = Some((node, ch));
                    self.queue.push_back(next);
                }
            }
        }
        None
    }

    fn path_from_tree(&self, src: NodeId, dst: NodeId) -> PathAssignment {
        let mut nodes = vec![dst];
        let mut channels = Vec::new();
        let mut cur = dst;
        while cur != src {
            let (prev, ch) = self.labels[cur].pred.expect("predecessor chain reaches the source");
            channels.push(ch);
            nodes.push(prev);
            cur = prev;
        }
        nodes.reverse();
        channels.reverse();
        PathAssignment { nodes, channels }
    }

    /// Iterative edge-pruned path search: starting from the full graph,
    /// repeatedly disable the most-loaded channel (by S(dl, .)) and re-probe,
    /// keeping the candidate minimizing alpha = hops * vol + load_sum with
    /// smaller bottleneck as the tie-break. On the first improvement with a
    /// positive bottleneck, every channel loaded strictly above that
    /// bottleneck is disabled as well. Channels disabled after the winning
    /// candidate are restored and the winner is rebuilt by a final probe over
    /// exactly the edge set it was found on.
    pub fn select_path(
        &mut self,
        topo: &Topology<F>,
        grid: &AllocationGrid<F>,
        req: &Request<F>,
    ) -> Option<PathAssignment> {
        self.ensure_scratch(topo);
        self.use_flags.fill(true);
        let dl = req.dl;
        let mut order: Vec<ChannelId> = (0..topo.num_channels()).collect();
        // descending load, ties by ascending channel id
        order.sort_by(|&a, &b| {
            grid.prefix_load(b, dl)
                .partial_cmp(&grid.prefix_load(a, dl))
                .expect("loads are finite")
                .then(a.cmp(&b))
        });

        let mut best = self.bfs_test(topo, grid, req.src, req.dst, dl)?;
        let mut i = 0usize;
        let mut j = 1usize;
        let mut flag = true;
        loop {
            if best.bottleneck > F::zero() && flag {
                flag = false;
                while i < order.len() && grid.prefix_load(order[i], dl) > best.bottleneck {
                    self.use_flags[order[i]] = false;
                    i += 1;
                }
            }
            if i >= order.len() {
                break;
            }
            self.use_flags[order[i]] = false;
            i += 1;
            let Some(next) = self.bfs_test(topo, grid, req.src, req.dst, dl) else { break };
            let alpha = F::from_usize(best.hops).unwrap() * req.vol + best.load_sum;
            let beta = F::from_usize(next.hops).unwrap() * req.vol + next.load_sum;
            if alpha > beta || (alpha == beta && best.bottleneck > next.bottleneck) {
                j = i + 1;
                best = next;
                flag = true;
            }
        }
        while i >= j {
            i -= 1;
            self.use_flags[order[i]] = true;
        }
        // Rebuild the winner on the restored edge set; this reproduces the
        // exact search state the best candidate was found in.
        let rebuilt = self.bfs_test(topo, grid, req.src, req.dst, dl)?;
        debug_assert_eq!(rebuilt.hops, best.hops);
        Some(self.path_from_tree(req.src, req.dst))
    }
}

/// ALAP back-fill of `req.vol` along `path`, iterating from the deadline
/// down to t_now+2. Each slot takes the path-wide residual capacity, capped
/// by the remaining volume. Returns true iff everything fits; a dry run
/// (apply = false) never mutates the grid.
pub fn path_allocate<F: Scalar>(
    grid: &mut AllocationGrid<F>,
    path: &PathAssignment,
    req: &Request<F>,
    apply: bool,
) -> Result<bool, GridError> {
    let mut vol = req.vol;
    let floor = grid.t_now() + 2;
    if req.dl < floor {
        return Ok(vol <= F::GRID_EPS);
    }
    let mut t = req.dl;
    loop {
        let mut space = vol;
        for &ch in &path.channels {
            space = space.min(grid.free(ch, t));
        }
        if space > F::GRID_EPS {
            vol = vol - space;
            if apply {
                for &ch in &path.channels {
                    grid.add_share(ch, t, req.id, space)?;
                }
            }
        }
        if vol <= F::GRID_EPS || t == floor {
            break;
        }
        t -= 1;
    }
    Ok(vol <= F::GRID_EPS)
}

impl<F: Scalar> DcRoute<F> {
    /// Admission: extend the window to the deadline, pick a path, dry-run the
    /// ALAP back-fill and commit it only if the full volume fits. Rejected
    /// requests leave the grid untouched.
    pub fn allocate(
        &mut self,
        topo: &Topology<F>,
        grid: &mut AllocationGrid<F>,
        req: &mut Request<F>,
    ) -> Result<bool, SchedulerError> {
        grid.extend_window(req.dl);
        if req.src == req.dst || req.vol <= F::GRID_EPS || req.dl <= grid.t_now() + 1 {
            req.state = RequestState::Rejected;
            return Ok(false);
        }
        let Some(path) = self.select_path(topo, grid, req) else {
            req.state = RequestState::Rejected;
            return Ok(false);
        };
        if path_allocate(grid, &path, req, false)? {
            let committed = path_allocate(grid, &path, req, true)?;
            debug_assert!(committed, "dry run and apply agree");
            req.state = RequestState::Admitted;
            req.path = Some(path);
            Ok(true)
        } else {
            req.state = RequestState::Rejected;
            Ok(false)
        }
    }

    /// Pulls as much traffic as possible from the closest future slots into
    /// the upcoming slot t_now+1. Scans slots ascending, channels ascending,
    /// requests in admission order; a share moves by the path-wide residual
    /// of the upcoming slot, atomically across all its path channels.
    /// Returns the total moved volume.
    pub fn pull_back(
        &mut self,
        _topo: &Topology<F>,
        grid: &mut AllocationGrid<F>,
        requests: &[Request<F>],
    ) -> Result<F, SchedulerError> {
        let target = grid.t_now() + 1;
        let mut moved = F::zero();
        for t in grid.t_now() + 2..=grid.t_end() {
            for ch in 0..grid.num_channels() {
                for (r, _) in grid.shares_at(ch, t) {
                    let share = grid.share(ch, t, r);
                    if share <= F::GRID_EPS {
                        continue;
                    }
                    let path = requests[r]
                        .path
                        .as_ref()
                        .ok_or_else(|| SchedulerError::Internal(format!("request {r} holds shares without a path")))?;
                    let mut vol = share;
                    for &e in &path.channels {
                        vol = vol.min(grid.free(e, target));
                    }
                    if vol <= F::GRID_EPS {
                        continue;
                    }
                    if share - vol <= F::GRID_EPS {
                        vol = share; // absorb dust instead of leaving it behind
                    }
                    grid.move_share(&path.channels, t, target, r, vol)?;
                    moved = moved + vol;
                }
            }
        }
        Ok(moved)
    }

    /// Restores the ALAP property disturbed by PullBack: sweeps shares from
    /// t_now+2 upward, moving each as close to its deadline as path-wide
    /// residuals allow (destination slots tried from the deadline downward).
    /// The sweep repeats until a full pass moves nothing, which is exactly
    /// the ALAP fixpoint at the dust threshold. Returns (moved, passes).
    pub fn push_forward(
        &mut self,
        _topo: &Topology<F>,
        grid: &mut AllocationGrid<F>,
        requests: &[Request<F>],
    ) -> Result<(F, u32), SchedulerError> {
        let mut total = F::zero();
        let mut passes = 0;
        loop {
            let mut pass_moved = F::zero();
            for t in grid.t_now() + 2..=grid.t_end() {
                for ch in 0..grid.num_channels() {
                    for (r, _) in grid.shares_at(ch, t) {
                        let path = requests[r]
                            .path
                            .as_ref()
                            .ok_or_else(|| SchedulerError::Internal(format!("request {r} holds shares without a path")))?;
                        let dl = requests[r].dl;
                        let mut t2 = dl;
                        while t2 > t {
                            let share = grid.share(ch, t, r);
                            if share <= F::GRID_EPS {
                                break;
                            }
                            let mut mv = share;
                            for &e in &path.channels {
                                mv = mv.min(grid.free(e, t2));
                            }
                            if mv > F::GRID_EPS {
                                if share - mv <= F::GRID_EPS {
                                    mv = share;
                                }
                                grid.move_share(&path.channels, t, t2, r, mv)?;
                                pass_moved = pass_moved + mv;
                            }
                            t2 -= 1;
                        }
                    }
                }
            }
            total = total + pass_moved;
            passes += 1;
            if pass_moved <= F::GRID_EPS {
                break;
            }
        }
        Ok((total, passes))
    }
}

impl<F: Scalar> Scheduler<F> for DcRoute<F> {
    fn tag(&self) -> String {
        "dcroute".into()
    }

    fn admit(
        &mut self,
        topo: &Topology<F>,
        grid: &mut AllocationGrid<F>,
        requests: &mut [Request<F>],
        new: RequestId,
    ) -> Result<bool, SchedulerError> {
        let mut req = requests[new].clone();
        let admitted = self.allocate(topo, grid, &mut req)?;
        requests[new] = req;
        Ok(admitted)
    }

    fn boundary(
        &mut self,
        topo: &Topology<F>,
        grid: &mut AllocationGrid<F>,
        requests: &[Request<F>],
    ) -> Result<BoundaryStats<F>, SchedulerError> {
        let pulled = self.pull_back(topo, grid, requests)?;
        let (pushed, push_passes) = self.push_forward(topo, grid, requests)?;
        Ok(BoundaryStats { pulled, pushed, push_passes })
    }

    fn planned_rate(&self, grid: &AllocationGrid<F>, req: &Request<F>, slot: SlotIndex) -> F {
        match &req.path {
            Some(path) => grid.share(path.channels[0], slot, req.id),
            None => F::zero(),
        }
    }

    fn check_invariants(
        &self,
        _topo: &Topology<F>,
        grid: &AllocationGrid<F>,
        requests: &[Request<F>],
    ) -> Result<(), String> {
        check_single_path(grid, requests)?;
        check_pull_maximality(grid, requests)?;
        check_alap_fixpoint(grid, requests)
    }
}

/// Finalizes slot t_now+1: reads each active request's rate, advances the
/// grid, deducts transmitted volume, completes requests whose residual
/// reaches zero and enforces the deadline guarantee.
pub fn walk<F: Scalar>(
    grid: &mut AllocationGrid<F>,
    requests: &mut [Request<F>],
    sched: &dyn Scheduler<F>,
) -> Result<SlotSchedule<F>, SchedulerError> {
    let slot = grid.t_now() + 1;
    let mut entries = Vec::new();
    for req in requests.iter() {
        if !req.is_active() {
            continue;
        }
        let rate = sched.planned_rate(grid, req, slot);
        if rate > F::GRID_EPS {
            entries.push(ScheduleEntry {
                request: req.id,
                rate,
                path: req.path.as_ref().map(|p| p.nodes.clone()),
            });
        }
    }
    grid.advance();
    for entry in &entries {
        let req = &mut requests[entry.request];
        req.residual = (req.residual - entry.rate).max(F::zero());
        if req.residual <= F::GRID_EPS {
            req.residual = F::zero();
            req.state = RequestState::Completed;
        }
    }
    for req in requests.iter() {
        if req.is_active() && req.dl <= slot && req.residual > F::GRID_EPS {
            return Err(SchedulerError::DeadlineViolation {
                request: req.id,
                slot,
                residual: req.residual.to_f64_lossy(),
            });
        }
    }
    Ok(SlotSchedule { slot, entries })
}

/// Every share of an admitted request lies on its assigned path, with equal
/// volume across the path's channels per slot.
pub fn check_single_path<F: Scalar>(grid: &AllocationGrid<F>, requests: &[Request<F>]) -> Result<(), String> {
    for req in requests {
        let channels = grid.channels_of_request(req.id);
        if channels.is_empty() {
            continue;
        }
        let Some(path) = &req.path else {
            return Err(format!("request {} holds shares but has no path", req.id));
        };
        for ch in &channels {
            if !path.channels.contains(ch) {
                return Err(format!("request {} holds a share off its path (channel {ch})", req.id));
            }
        }
        for t in grid.t_now() + 1..=grid.t_end() {
            let first = grid.share(path.channels[0], t, req.id);
            for &ch in &path.channels[1..] {
                if (grid.share(ch, t, req.id) - first).abs() > F::GRID_EPS {
                    return Err(format!("request {} shares unequal across path at slot {t}", req.id));
                }
            }
        }
    }
    Ok(())
}

/// After PullBack: no remaining future share can be pulled into the upcoming
/// slot without violating capacity on some path channel.
pub fn check_pull_maximality<F: Scalar>(grid: &AllocationGrid<F>, requests: &[Request<F>]) -> Result<(), String> {
    let target = grid.t_now() + 1;
    for req in requests {
        let Some(path) = &req.path else { continue };
        for t in grid.t_now() + 2..=grid.t_end() {
            if grid.share(path.channels[0], t, req.id) <= F::GRID_EPS {
                continue;
            }
            let min_free = path
                .channels
                .iter()
                .map(|&ch| grid.free(ch, target))
                .fold(F::infinity(), |a, b| a.min(b));
            if min_free > F::GRID_EPS {
                return Err(format!(
                    "request {} at slot {t} could still pull {} into slot {target}",
                    req.id,
                    min_free.to_f64_lossy()
                ));
            }
        }
    }
    Ok(())
}

/// After PushForward: no share strictly before its deadline (from t_now+2 on;
/// the upcoming slot is finalized and deliberately filled by PullBack) can be
/// delayed by any amount — every later slot up to the deadline is saturated
/// on some path channel.
pub fn check_alap_fixpoint<F: Scalar>(grid: &AllocationGrid<F>, requests: &[Request<F>]) -> Result<(), String> {
    for req in requests {
        let Some(path) = &req.path else { continue };
        for t in grid.t_now() + 2..=grid.t_end().min(req.dl.saturating_sub(1)) {
            if grid.share(path.channels[0], t, req.id) <= F::GRID_EPS {
                continue;
            }
            for t2 in t + 1..=req.dl {
                let min_free = path
                    .channels
                    .iter()
                    .map(|&ch| grid.free(ch, t2))
                    .fold(F::infinity(), |a, b| a.min(b));
                if min_free > F::GRID_EPS {
                    return Err(format!(
                        "request {} at slot {t} is not ALAP: {} free at slot {t2}",
                        req.id,
                        min_free.to_f64_lossy()
                    ));
                }
            }
        }
    }
    Ok(())
}
