//! Deadline-guaranteed single-path inter-datacenter transfer scheduling,
//! LP-based baseline allocators and a slotted-timeline simulation harness.
//!
//! The core is generic over the volume scalar (see [`scalar::Scalar`]); the
//! aliases below pin the `f64` instantiation used by the CLI and the
//! simulations.

pub mod baselines;
pub mod harness;
pub mod lp;
pub mod scalar;
pub mod scheduler;
pub mod timeline;
pub mod topology;
pub mod workload;

pub use scalar::Scalar;
pub use timeline::{RequestId, SlotIndex};
pub use topology::{ChannelId, EdgeId, NodeId};

/// Scalar used by the shipped binaries and simulations.
pub type DefaultScalar = f64;

pub type Topology = topology::Topology<DefaultScalar>;
pub type AllocationGrid = timeline::AllocationGrid<DefaultScalar>;
pub type Request = scheduler::Request<DefaultScalar>;
pub type DcRoute = scheduler::DcRoute<DefaultScalar>;
pub type LpModel = lp::LpModel<DefaultScalar>;
pub type TraceEntry = workload::TraceEntry<DefaultScalar>;
pub type SimMetrics = harness::SimMetrics<DefaultScalar>;
