//! Cooperative content dissemination over vehicular fog networks.
//!
//! The pipeline runs per scenario: contact-event framing, the layered
//! resource graph, per-frame link scheduling, subchannel matching, robust
//! per-pair power control and a convex flow program over the capacitated
//! graph. Everything here is `no_std` with `alloc`.

#![no_std]

extern crate alloc;

pub mod channel;
pub mod error;
pub mod flow;
pub mod pipeline;
pub mod power;
pub mod robust;
pub mod scenario;
pub mod schedule;
pub mod subchannel;
pub mod trrg;
pub mod units;

pub use error::{Error, Result};
pub use scenario::{AvId, AvSpec, ChannelParams, Frame, Point, Role, Scenario, Task, TaskId, VehicleId, VehicleSpec};
pub use trrg::{Arc, ArcId, ArcKind, Capacity, Trrg, Vertex};
