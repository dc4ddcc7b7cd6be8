//! The active-window allocation store: per-channel per-slot request shares,
//! the running prefix sums S(t,e) over the window, residual-capacity queries
//! and window advancement.
//!
//! The window covers slots t_now+1 ..= t_end and is stored as a ring of slot
//! records indexed relative to t_now, so advancing is O(channels) rather than
//! O(window): the per-channel volume departing with the finalized slot is
//! folded into a base offset instead of being subtracted from every stored
//! prefix.

use crate::scalar::Scalar;
use crate::topology::ChannelId;
use std::collections::{BTreeMap, VecDeque};
use thiserror::Error;

pub type SlotIndex = u64;
pub type RequestId = usize;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("slot {t} outside window ({lo}..={hi})")]
    OutOfWindow { t: SlotIndex, lo: SlotIndex, hi: SlotIndex },
    #[error("capacity exceeded on channel {ch} at slot {t}: load {load} + {add} > cap {cap}")]
    CapacityExceeded { ch: ChannelId, t: SlotIndex, load: f64, add: f64, cap: f64 },
    #[error("request {r} holds {have} on channel {ch} at slot {t}, cannot move {want}")]
    ShareUnderflow { r: RequestId, ch: ChannelId, t: SlotIndex, have: f64, want: f64 },
    #[error("non-positive volume {0}")]
    NonPositiveVolume(f64),
    #[error("consistency violation on channel {ch} at slot {t}: {msg}")]
    Inconsistent { ch: ChannelId, t: SlotIndex, msg: String },
}

#[derive(Debug, Clone)]
struct SlotRecord<F> {
    /// Stored prefix values; true S(t,e) = prefix[e] - base[e].
    prefix: Vec<F>,
    /// Per channel: request shares scheduled in this slot.
    shares: Vec<BTreeMap<RequestId, F>>,
}

impl<F: Scalar> SlotRecord<F> {
    fn fresh(prefix: Vec<F>, channels: usize) -> Self {
        SlotRecord { prefix, shares: vec![BTreeMap::new(); channels] }
    }
}

/// Shares of the slot that just departed the window, per channel, in
/// ascending request order.
#[derive(Debug, Clone)]
pub struct DepartedSlot<F> {
    pub slot: SlotIndex,
    pub shares: Vec<Vec<(RequestId, F)>>,
}

/// Per-channel per-slot allocation grid over the active window.
#[derive(Debug, Clone)]
pub struct AllocationGrid<F> {
    caps: Vec<F>,
    t_now: SlotIndex,
    base: Vec<F>,
    slots: VecDeque<SlotRecord<F>>,
}

impl<F: Scalar> AllocationGrid<F> {
    /// Empty grid with the given per-channel capacities; the window starts as
    /// the single slot t_now+1.
    pub fn new(caps: Vec<F>, t_now: SlotIndex) -> Self {
        let n = caps.len();
        let base = vec![F::zero(); n];
        let mut slots = VecDeque::new();
        slots.push_back(SlotRecord::fresh(base.clone(), n));
        AllocationGrid { caps, t_now, base, slots }
    }

    pub fn num_channels(&self) -> usize {
        self.caps.len()
    }

    pub fn capacity(&self, ch: ChannelId) -> F {
        self.caps[ch]
    }

    pub fn t_now(&self) -> SlotIndex {
        self.t_now
    }

    /// Latest slot in the window; always >= t_now + 1.
    pub fn t_end(&self) -> SlotIndex {
        self.t_now + self.slots.len() as u64
    }

    fn idx(&self, t: SlotIndex) -> Option<usize> {
        if t <= self.t_now || t > self.t_end() {
            None
        } else {
            Some((t - self.t_now - 1) as usize)
        }
    }

    fn idx_or_err(&self, t: SlotIndex) -> Result<usize, GridError> {
        self.idx(t).ok_or(GridError::OutOfWindow { t, lo: self.t_now + 1, hi: self.t_end() })
    }

    /// Cumulative scheduled volume on `ch` over slots t_now+1 ..= t.
    /// Zero for t <= t_now; saturates at S(t_end) beyond the window.
    pub fn prefix_load(&self, ch: ChannelId, t: SlotIndex) -> F {
        if t <= self.t_now {
            return F::zero();
        }
        let i = ((t - self.t_now - 1) as usize).min(self.slots.len() - 1);
        self.slots[i].prefix[ch] - self.base[ch]
    }

    /// Scheduled volume on `ch` in exactly slot `t`.
    pub fn slot_load(&self, ch: ChannelId, t: SlotIndex) -> F {
        match self.idx(t) {
            None => F::zero(),
            Some(i) => {
                let cur = self.slots[i].prefix[ch];
                let prev = if i == 0 { self.base[ch] } else { self.slots[i - 1].prefix[ch] };
                cur - prev
            }
        }
    }

    /// Residual capacity on `ch` at slot `t`, clamped at zero.
    pub fn free(&self, ch: ChannelId, t: SlotIndex) -> F {
        (self.caps[ch] - self.slot_load(ch, t)).max(F::zero())
    }

    pub fn share(&self, ch: ChannelId, t: SlotIndex, r: RequestId) -> F {
        match self.idx(t) {
            None => F::zero(),
            Some(i) => self.slots[i].shares[ch].get(&r).copied().unwrap_or_else(F::zero),
        }
    }

    /// Snapshot of the request shares on `ch` at `t`, ascending request id.
    pub fn shares_at(&self, ch: ChannelId, t: SlotIndex) -> Vec<(RequestId, F)> {
        match self.idx(t) {
            None => Vec::new(),
            Some(i) => self.slots[i].shares[ch].iter().map(|(&r, &v)| (r, v)).collect(),
        }
    }

    /// Grows the window so it covers `new_deadline`; appended slots replicate
    /// the latest prefix values (they carry no load of their own). A deadline
    /// already inside the window is a no-op.
    pub fn extend_window(&mut self, new_deadline: SlotIndex) {
        while self.t_end() < new_deadline {
            let last_prefix = self.slots.back().expect("window is never empty").prefix.clone();
            let n = self.caps.len();
            self.slots.push_back(SlotRecord::fresh(last_prefix, n));
        }
    }

    /// Records `v` of request `r` on channel `ch` at slot `t`, bumping the
    /// prefix sums of every later slot. Capacity overflow is a caller bug,
    /// not an admission rejection.
    pub fn add_share(&mut self, ch: ChannelId, t: SlotIndex, r: RequestId, v: F) -> Result<(), GridError> {
        if v <= F::zero() {
            return Err(GridError::NonPositiveVolume(v.to_f64_lossy()));
        }
        let i = self.idx_or_err(t)?;
        let load = self.slot_load(ch, t);
        if load + v > self.caps[ch] + F::GRID_EPS {
            return Err(GridError::CapacityExceeded {
                ch,
                t,
                load: load.to_f64_lossy(),
                add: v.to_f64_lossy(),
                cap: self.caps[ch].to_f64_lossy(),
            });
        }
        let entry = self.slots[i].shares[ch].entry(r).or_insert_with(F::zero);
        *entry = *entry + v;
        for rec in self.slots.iter_mut().skip(i) {
            rec.prefix[ch] = rec.prefix[ch] + v;
        }
        Ok(())
    }

    /// Moves `v` of request `r` from slot `t_from` to `t_to` atomically
    /// across all the channels of its path: every precondition is validated
    /// on every channel before anything mutates. Volumes below the dust
    /// threshold are treated as zero.
    pub fn move_share(
        &mut self,
        channels: &[ChannelId],
        t_from: SlotIndex,
        t_to: SlotIndex,
        r: RequestId,
        v: F,
    ) -> Result<(), GridError> {
        if v < F::zero() {
            return Err(GridError::NonPositiveVolume(v.to_f64_lossy()));
        }
        if t_from == t_to || v <= F::GRID_EPS {
            return Ok(());
        }
        let from_i = self.idx_or_err(t_from)?;
        let to_i = self.idx_or_err(t_to)?;
        for &ch in channels {
            let have = self.share(ch, t_from, r);
            if have + F::GRID_EPS < v {
                return Err(GridError::ShareUnderflow {
                    r,
                    ch,
                    t: t_from,
                    have: have.to_f64_lossy(),
                    want: v.to_f64_lossy(),
                });
            }
            let free = self.caps[ch] - self.slot_load(ch, t_to);
            if free + F::GRID_EPS < v {
                return Err(GridError::CapacityExceeded {
                    ch,
                    t: t_to,
                    load: self.slot_load(ch, t_to).to_f64_lossy(),
                    add: v.to_f64_lossy(),
                    cap: self.caps[ch].to_f64_lossy(),
                });
            }
        }
        for &ch in channels {
            let slot = &mut self.slots[from_i].shares[ch];
            let remaining = slot[&r] - v;
            if remaining <= F::GRID_EPS {
                slot.remove(&r);
            } else {
                slot.insert(r, remaining);
            }
            let entry = self.slots[to_i].shares[ch].entry(r).or_insert_with(F::zero);
            *entry = *entry + v;
            // Prefix-sum law: moving v from slot a to b < a raises S(t') on
            // [b, a-1]; moving to b > a lowers S(t') on [a, b-1].
            if t_to < t_from {
                for i in to_i..from_i {
                    self.slots[i].prefix[ch] = self.slots[i].prefix[ch] + v;
                }
            } else {
                for i in from_i..to_i {
                    self.slots[i].prefix[ch] = self.slots[i].prefix[ch] - v;
                }
            }
        }
        Ok(())
    }

    /// Finalizes slot t_now+1: removes it from the window, folds its volume
    /// out of the remaining prefix sums and advances the clock. The window
    /// never becomes empty (t_end >= t_now+1 is maintained).
    pub fn advance(&mut self) -> DepartedSlot<F> {
        let departing = self.slots.pop_front().expect("window is never empty");
        let slot = self.t_now + 1;
        self.base.copy_from_slice(&departing.prefix);
        self.t_now += 1;
        if self.slots.is_empty() {
            let n = self.caps.len();
            self.slots.push_back(SlotRecord::fresh(self.base.clone(), n));
        }
        let shares = departing
            .shares
            .into_iter()
            .map(|m| m.into_iter().collect::<Vec<_>>())
            .collect();
        DepartedSlot { slot, shares }
    }

    /// Wipes every share in the window (prefix sums return to zero). Used by
    /// allocators that re-plan the whole window on each admission.
    pub fn clear_window(&mut self) {
        for rec in self.slots.iter_mut() {
            rec.prefix.copy_from_slice(&self.base);
            for m in rec.shares.iter_mut() {
                m.clear();
            }
        }
    }

    /// Total volume request `r` holds on `ch` across the window.
    pub fn request_total_on_channel(&self, ch: ChannelId, r: RequestId) -> F {
        self.slots
            .iter()
            .map(|rec| rec.shares[ch].get(&r).copied().unwrap_or_else(F::zero))
            .fold(F::zero(), |a, b| a + b)
    }

    /// Channels on which request `r` holds any share, ascending.
    pub fn channels_of_request(&self, r: RequestId) -> Vec<ChannelId> {
        let mut out = Vec::new();
        for ch in 0..self.num_channels() {
            if self.slots.iter().any(|rec| rec.shares[ch].contains_key(&r)) {
                out.push(ch);
            }
        }
        out
    }

    /// Line-oriented dump `channel slot request volume`, lexicographically
    /// sorted, 9-decimal volumes. Stable across platforms for golden tests.
    pub fn dump(&self) -> String {
        let mut lines: Vec<String> = Vec::new();
        for (i, rec) in self.slots.iter().enumerate() {
            let t = self.t_now + 1 + i as u64;
            for (ch, m) in rec.shares.iter().enumerate() {
                for (r, v) in m {
                    lines.push(format!("{ch} {t} {r} {:.9}", v.to_f64_lossy()));
                }
            }
        }
        lines.sort();
        let mut out = lines.join("\n");
        if !out.is_empty() {
            out.push('\n');
        }
        out
    }

    /// Verifies the prefix-sum/shares law, non-negativity and the capacity
    /// bound on every cell of the window.
    pub fn check_consistency(&self) -> Result<(), GridError> {
        for ch in 0..self.num_channels() {
            for (i, rec) in self.slots.iter().enumerate() {
                let t = self.t_now + 1 + i as u64;
                let prev = if i == 0 { self.base[ch] } else { self.slots[i - 1].prefix[ch] };
                let load = rec.prefix[ch] - prev;
                let sum: F = rec.shares[ch].values().copied().fold(F::zero(), |a, b| a + b);
                if (load - sum).abs() > F::GRID_EPS {
                    return Err(GridError::Inconsistent {
                        ch,
                        t,
                        msg: format!(
                            "prefix delta {} != share sum {}",
                            load.to_f64_lossy(),
                            sum.to_f64_lossy()
                        ),
                    });
                }
                if load < -F::GRID_EPS {
                    return Err(GridError::Inconsistent { ch, t, msg: format!("negative load {}", load.to_f64_lossy()) });
                }
                if load > self.caps[ch] + F::GRID_EPS {
                    return Err(GridError::Inconsistent {
                        ch,
                        t,
                        msg: format!("load {} over capacity {}", load.to_f64_lossy(), self.caps[ch].to_f64_lossy()),
                    });
                }
                if rec.shares[ch].values().any(|v| *v <= F::zero()) {
                    return Err(GridError::Inconsistent { ch, t, msg: "non-positive share entry".into() });
                }
            }
        }
        Ok(())
    }

    pub fn residual_view(&self) -> ResidualView<'_, F> {
        ResidualView { grid: self }
    }
}

/// Read-only residual-bandwidth view; `free` is always derived from shares,
/// never stored independently.
pub struct ResidualView<'a, F> {
    grid: &'a AllocationGrid<F>,
}

impl<F: Scalar> ResidualView<'_, F> {
    pub fn free(&self, ch: ChannelId, t: SlotIndex) -> F {
        self.grid.free(ch, t)
    }
}
