//! Vehicles, mobility, channel parameters and contact-event framing.
//!
//! Vehicles move along straight lanes at constant velocity (signed along x).
//! Frames are delimited by the instants at which some vehicle pair enters or
//! leaves communication range, so the in-range pair set is constant inside
//! every frame.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::units;

/// Crossings closer than this (seconds) collapse into one frame boundary.
pub const FRAME_DEDUP_SECONDS: f64 = 1e-3;

/// Default V2V communication range in meters.
pub const DEFAULT_COMM_RANGE_M: f64 = 30.0;

/// Default cap on conflict-graph nodes per frame for exact enumeration.
pub const DEFAULT_MAX_CONFLICT_NODES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AvId(pub u32);

impl fmt::Display for AvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskId(pub u32);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// What a vehicle contributes to dissemination. Capacities are bits per frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Role {
    Perceptual,
    Relay { cache_capacity: f64 },
    Fog { compute_capacity: f64 },
}

impl Role {
    /// Member of the non-fog set: may transmit on a communication arc.
    pub fn can_transmit(&self) -> bool {
        !matches!(self, Role::Fog { .. })
    }

    /// Member of the non-perceptual set: may receive on a communication arc.
    pub fn can_receive(&self) -> bool {
        !matches!(self, Role::Perceptual)
    }

    pub fn is_relay(&self) -> bool {
        matches!(self, Role::Relay { .. })
    }

    pub fn is_fog(&self) -> bool {
        matches!(self, Role::Fog { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Role::Perceptual => "perceptual",
            Role::Relay { .. } => "relay",
            Role::Fog { .. } => "fog",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleSpec {
    pub id: VehicleId,
    pub role: Role,
    pub initial_position: Point,
    /// Meters per second, signed along the x axis.
    pub velocity: f64,
}

/// A vehicle outside the dissemination service whose subchannel may be reused.
#[derive(Debug, Clone, PartialEq)]
pub struct AvSpec {
    pub id: AvId,
    pub transmitter: Point,
    pub receiver: Point,
    /// SINR the AV link must reach with probability at least 1 - epsilon.
    pub gamma_th: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: TaskId,
    /// Perceptual vehicle that senses the content.
    pub source: VehicleId,
    /// Delay budget in frames; flows are allowed only in frames `k < delay_budget`.
    pub delay_budget: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    /// Subchannel bandwidth in Hz.
    pub bandwidth_hz: f64,
    /// Noise power over one subchannel, watts.
    pub noise_power: f64,
    pub shadowing_std_db: f64,
    pub rayleigh_fading: bool,
    /// Independent fading blocks averaged into one frame-level gain.
    pub fading_blocks: u32,
    /// Outage tolerance for the AV and BS chance constraints.
    pub epsilon: f64,
    /// Training samples per uncertainty set.
    pub sample_count: usize,
    pub compression_eta: f64,
    /// Default AV SINR threshold (linear).
    pub gamma_th: f64,
    pub p_max_v: f64,
    pub p_max_av: f64,
    pub p_max_bs: f64,
    /// Weight of BS power in the network utility.
    pub w_p: f64,
    pub bisection_zeta: f64,
    /// Disable shadowing and fading.
    pub deterministic: bool,
}

impl ChannelParams {
    /// Parameters of the reference simulation (10 MHz, -174 dBm/Hz, 30 dBm caps).
    pub fn reference() -> Self {
        ChannelParams {
            bandwidth_hz: 10e6,
            noise_power: units::noise_power(-174.0, 10e6),
            shadowing_std_db: 4.0,
            rayleigh_fading: true,
            fading_blocks: 100,
            epsilon: 1e-3,
            sample_count: 1000,
            compression_eta: 0.1,
            gamma_th: 10.0,
            p_max_v: units::dbm_to_watts(30.0),
            p_max_av: units::dbm_to_watts(30.0),
            p_max_bs: units::dbm_to_watts(30.0),
            w_p: 0.01,
            bisection_zeta: 1e-3,
            deterministic: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("channel.bandwidth_hz", self.bandwidth_hz)?;
        positive("channel.noise_power", self.noise_power)?;
        nonnegative("channel.shadowing_std_db", self.shadowing_std_db)?;
        if self.fading_blocks == 0 {
            return Err(Error::invalid("channel.fading_blocks", "must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::invalid("channel.epsilon", "must lie in (0, 1)"));
        }
        if self.sample_count < 2 {
            return Err(Error::invalid("channel.sample_count", "must be at least 2"));
        }
        if !(self.compression_eta > 0.0 && self.compression_eta <= 1.0) {
            return Err(Error::invalid("channel.compression_eta", "must lie in (0, 1]"));
        }
        positive("channel.gamma_th", self.gamma_th)?;
        positive("channel.p_max_v", self.p_max_v)?;
        positive("channel.p_max_av", self.p_max_av)?;
        positive("channel.p_max_bs", self.p_max_bs)?;
        nonnegative("channel.w_p", self.w_p)?;
        if !(self.bisection_zeta > 0.0 && self.bisection_zeta < 1.0) {
            return Err(Error::invalid("channel.bisection_zeta", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn nonnegative(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            field,
            format!("must be nonnegative and finite, got {v}"),
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub vehicles: Vec<VehicleSpec>,
    pub avs: Vec<AvSpec>,
    pub bs: Point,
    pub tasks: Vec<Task>,
    pub channel: ChannelParams,
    pub comm_range: f64,
    pub horizon: f64,
    pub max_conflict_nodes: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.vehicles.is_empty() {
            return Err(Error::NoVehicles);
        }
        for (i, v) in self.vehicles.iter().enumerate() {
            if self.vehicles[..i].iter().any(|w| w.id == v.id) {
                return Err(Error::DuplicateId {
                    kind: "vehicle",
                    id: v.id.0,
                });
            }
            let field = |name: &str| format!("vehicles[{}].{name}", v.id);
            if !v.velocity.is_finite() {
                return Err(Error::invalid(field("velocity"), "must be finite"));
            }
            if !(v.initial_position.x.is_finite() && v.initial_position.y.is_finite()) {
                return Err(Error::invalid(field("position"), "must be finite"));
            }
            match v.role {
                Role::Relay { cache_capacity } => nonnegative(&field("cache_capacity"), cache_capacity)?,
                Role::Fog { compute_capacity } => nonnegative(&field("compute_capacity"), compute_capacity)?,
                Role::Perceptual => {}
            }
        }
        for (i, av) in self.avs.iter().enumerate() {
            if self.avs[..i].iter().any(|w| w.id == av.id) {
                return Err(Error::DuplicateId {
                    kind: "av",
                    id: av.id.0,
                });
            }
            positive(&format!("avs[{}].gamma_th", av.id), av.gamma_th)?;
            if av.transmitter.distance(&av.receiver) <= 0.0 {
                return Err(Error::invalid(
                    format!("avs[{}].receiver", av.id),
                    "coincides with the AV transmitter",
                ));
            }
        }
        for (i, t) in self.tasks.iter().enumerate() {
            if self.tasks[..i].iter().any(|w| w.id == t.id) {
                return Err(Error::DuplicateId {
                    kind: "task",
                    id: t.id.0,
                });
            }
            let source = self.vehicle(t.source)?;
            if source.role != Role::Perceptual {
                return Err(Error::invalid(
                    format!("tasks[{}].source", t.id),
                    format!("vehicle {} is not perceptual", t.source),
                ));
            }
            if t.delay_budget == 0 {
                return Err(Error::invalid(
                    format!("tasks[{}].delay_budget", t.id),
                    "must be at least 1 frame",
                ));
            }
        }
        positive("comm_range", self.comm_range)?;
        positive("horizon", self.horizon)?;
        if self.max_conflict_nodes == 0 || self.max_conflict_nodes > 64 {
            return Err(Error::invalid("max_conflict_nodes", "must lie in 1..=64"));
        }
        self.channel.validate()
    }

    pub fn vehicle(&self, id: VehicleId) -> Result<&VehicleSpec> {
        self.vehicles
            .iter()
            .find(|v| v.id == id)
            .ok_or(Error::UnknownVehicle(id))
    }

    pub fn vehicle_index(&self, id: VehicleId) -> Result<usize> {
        self.vehicles
            .iter()
            .position(|v| v.id == id)
            .ok_or(Error::UnknownVehicle(id))
    }

    pub fn av(&self, id: AvId) -> Option<&AvSpec> {
        self.avs.iter().find(|a| a.id == id)
    }
}

impl VehicleSpec {
    pub fn position_at(&self, time: f64) -> Point {
        Point::new(self.initial_position.x + self.velocity * time, self.initial_position.y)
    }
}

/// Straight-lane position of a vehicle at `time` seconds.
pub fn position_at(scenario: &Scenario, vehicle: VehicleId, time: f64) -> Result<Point> {
    if !(time >= 0.0) {
        return Err(Error::invalid("time", "must be nonnegative"));
    }
    Ok(scenario.vehicle(vehicle)?.position_at(time))
}

/// Interval between consecutive contact events. `index` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub start: f64,
    pub end: f64,
}

impl Frame {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }
}

/// Times in `(0, horizon)` at which the two vehicles are exactly `range` apart.
pub fn range_crossings(a: &VehicleSpec, b: &VehicleSpec, range: f64, horizon: f64) -> Vec<f64> {
    let dx = a.initial_position.x - b.initial_position.x;
    let dy = a.initial_position.y - b.initial_position.y;
    let dv = a.velocity - b.velocity;
    let mut out = Vec::new();
    if dv == 0.0 {
        return out;
    }
    // (dx + dv t)^2 + dy^2 = range^2; a tangency is not a change of state.
    let disc = range * range - dy * dy;
    if disc <= 0.0 {
        return out;
    }
    let s = disc.sqrt();
    for t in [(-dx - s) / dv, (-dx + s) / dv] {
        if t > 0.0 && t < horizon {
            out.push(t);
        }
    }
    out
}

/// Partition `[0, horizon]` into frames bounded by range crossings of any
/// vehicle pair.
pub fn contact_frames(scenario: &Scenario, comm_range: f64, horizon: f64) -> Result<Vec<Frame>> {
    positive("comm_range", comm_range)?;
    positive("horizon", horizon)?;
    let mut events = Vec::new();
    let vs = &scenario.vehicles;
    for i in 0..vs.len() {
        for j in (i + 1)..vs.len() {
            events.extend(range_crossings(&vs[i], &vs[j], comm_range, horizon));
        }
    }
    events.sort_by(f64::total_cmp);

    let mut bounds = Vec::with_capacity(events.len() + 2);
    bounds.push(0.0);
    for t in events {
        let last = *bounds.last().unwrap();
        if t - last >= FRAME_DEDUP_SECONDS && horizon - t >= FRAME_DEDUP_SECONDS {
            bounds.push(t);
        }
    }
    bounds.push(horizon);

    Ok(bounds
        .windows(2)
        .enumerate()
        .map(|(i, w)| Frame {
            index: i + 1,
            start: w[0],
            end: w[1],
        })
        .collect())
}

/// Whether two vehicles are within `range` at `time`.
pub fn in_range(a: &VehicleSpec, b: &VehicleSpec, range: f64, time: f64) -> bool {
    a.position_at(time).distance(&b.position_at(time)) <= range
}
