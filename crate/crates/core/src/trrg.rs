//! Time-varying resource relationship graph.
//!
//! One layer of ordinary vertices per frame (one per vehicle), a virtual
//! source `alpha` feeding perceptual vertices and a virtual sink `omega`
//! collecting computed content. Arcs model the four resources: perception,
//! V2V communication, fog computing, and relay storage (carry).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::scenario::{in_range, Frame, Role, Scenario, Task, TaskId, VehicleId};

pub type VertexId = usize;

pub const SOURCE: VertexId = 0;
pub const SINK: VertexId = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArcId(pub usize);

impl fmt::Display for ArcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Vertex {
    Source,
    Sink,
    /// Temporal copy of a vehicle in a 1-based frame.
    Vehicle {
        vehicle: VehicleId,
        frame: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArcKind {
    Communication,
    Computing,
    Perception,
    Carry,
}

impl ArcKind {
    pub fn name(&self) -> &'static str {
        match self {
            ArcKind::Communication => "communication",
            ArcKind::Computing => "computing",
            ArcKind::Perception => "perception",
            ArcKind::Carry => "carry",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Capacity {
    Bits(f64),
    /// Perception arcs, and communication arcs before power allocation.
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    pub id: ArcId,
    pub kind: ArcKind,
    pub tail: VertexId,
    pub head: VertexId,
    /// Frame of the tail vertex (of the head for perception arcs).
    pub frame: usize,
    /// Task fed by a perception arc.
    pub task: Option<TaskId>,
    pub capacity: Capacity,
}

#[derive(Debug, Clone)]
pub struct Trrg {
    frames: Vec<Frame>,
    vehicles: Vec<(VehicleId, Role)>,
    vertices: Vec<Vertex>,
    arcs: Vec<Arc>,
    outgoing: Vec<Vec<ArcId>>,
    incoming: Vec<Vec<ArcId>>,
    by_frame: Vec<Vec<ArcId>>,
}

impl Trrg {
    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn frame(&self, k: usize) -> Result<&Frame> {
        k.checked_sub(1)
            .and_then(|i| self.frames.get(i))
            .ok_or(Error::UnknownFrame { frame: k })
    }

    pub fn vehicles(&self) -> &[(VehicleId, Role)] {
        &self.vehicles
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, id: VertexId) -> Vertex {
        self.vertices[id]
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn arc(&self, id: ArcId) -> &Arc {
        &self.arcs[id.0]
    }

    pub fn outgoing(&self, v: VertexId) -> &[ArcId] {
        &self.outgoing[v]
    }

    pub fn incoming(&self, v: VertexId) -> &[ArcId] {
        &self.incoming[v]
    }

    /// All arcs whose `frame` field is `k`.
    pub fn arcs_in_frame(&self, k: usize) -> &[ArcId] {
        k.checked_sub(1)
            .and_then(|i| self.by_frame.get(i))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn communication_arcs(&self, k: usize) -> impl Iterator<Item = &Arc> + '_ {
        self.arcs_in_frame(k)
            .iter()
            .map(move |&a| self.arc(a))
            .filter(|a| a.kind == ArcKind::Communication)
    }

    pub fn vehicle_vertex(&self, vehicle: VehicleId, frame: usize) -> Option<VertexId> {
        let idx = self.vehicles.iter().position(|(v, _)| *v == vehicle)?;
        if frame == 0 || frame > self.frames.len() {
            return None;
        }
        Some(2 + (frame - 1) * self.vehicles.len() + idx)
    }

    pub fn role(&self, v: VertexId) -> Option<Role> {
        match self.vertices[v] {
            Vertex::Vehicle { vehicle, .. } => self.vehicles.iter().find(|(id, _)| *id == vehicle).map(|(_, r)| *r),
            _ => None,
        }
    }

    pub fn vehicle_of(&self, v: VertexId) -> Option<VehicleId> {
        match self.vertices[v] {
            Vertex::Vehicle { vehicle, .. } => Some(vehicle),
            _ => None,
        }
    }

    /// Edge-list label: `alpha`, `omega` or `v<frame>:<vehicle>`.
    pub fn label(&self, v: VertexId) -> String {
        match self.vertices[v] {
            Vertex::Source => "alpha".into(),
            Vertex::Sink => "omega".into(),
            Vertex::Vehicle { vehicle, frame } => format!("v{frame}:{vehicle}"),
        }
    }
}

/// Build the layered graph for the given frames.
pub fn build_trrg(scenario: &Scenario, frames: &[Frame], comm_range: f64) -> Result<Trrg> {
    if frames.is_empty() {
        return Err(Error::EmptyFrames);
    }
    let n = scenario.vehicles.len();
    let k_total = frames.len();
    let vehicles: Vec<(VehicleId, Role)> = scenario.vehicles.iter().map(|v| (v.id, v.role)).collect();

    let mut vertices = vec![Vertex::Source, Vertex::Sink];
    for f in frames {
        for v in &scenario.vehicles {
            vertices.push(Vertex::Vehicle {
                vehicle: v.id,
                frame: f.index,
            });
        }
    }
    let vid = |frame: usize, idx: usize| 2 + (frame - 1) * n + idx;

    let mut g = Trrg {
        frames: frames.to_vec(),
        vehicles,
        outgoing: vec![Vec::new(); vertices.len()],
        incoming: vec![Vec::new(); vertices.len()],
        vertices,
        arcs: Vec::new(),
        by_frame: vec![Vec::new(); k_total],
    };
    let push = |g: &mut Trrg, kind, tail, head, frame, task, capacity| {
        let id = ArcId(g.arcs.len());
        g.arcs.push(Arc {
            id,
            kind,
            tail,
            head,
            frame,
            task,
            capacity,
        });
        g.outgoing[tail].push(id);
        g.incoming[head].push(id);
        g.by_frame[frame - 1].push(id);
    };

    for f in frames {
        let k = f.index;
        let t = f.midpoint();
        for task in &scenario.tasks {
            if k <= task.delay_budget {
                let idx = scenario.vehicle_index(task.source)?;
                push(
                    &mut g,
                    ArcKind::Perception,
                    SOURCE,
                    vid(k, idx),
                    k,
                    Some(task.id),
                    Capacity::Unbounded,
                );
            }
        }
        for (i, tx) in scenario.vehicles.iter().enumerate() {
            if !tx.role.can_transmit() {
                continue;
            }
            for (j, rx) in scenario.vehicles.iter().enumerate() {
                if i == j || !rx.role.can_receive() {
                    continue;
                }
                if in_range(tx, rx, comm_range, t) {
                    push(
                        &mut g,
                        ArcKind::Communication,
                        vid(k, i),
                        vid(k, j),
                        k,
                        None,
                        Capacity::Unbounded,
                    );
                }
            }
        }
        for (i, v) in scenario.vehicles.iter().enumerate() {
            match v.role {
                Role::Fog { compute_capacity } => push(
                    &mut g,
                    ArcKind::Computing,
                    vid(k, i),
                    SINK,
                    k,
                    None,
                    Capacity::Bits(compute_capacity),
                ),
                Role::Relay { cache_capacity } if k < k_total => push(
                    &mut g,
                    ArcKind::Carry,
                    vid(k, i),
                    vid(k + 1, i),
                    k,
                    None,
                    Capacity::Bits(cache_capacity),
                ),
                _ => {}
            }
        }
    }
    Ok(g)
}

/// Whether an alpha-to-omega path exists for `task` using communication and
/// carry arcs of frames `k < delay_budget` only.
pub fn reachable_paths_exist(trrg: &Trrg, task: &Task, delay_budget: usize) -> bool {
    reachable_with(trrg, task, delay_budget, |_| true)
}

/// [`reachable_paths_exist`] restricted to arcs accepted by `keep`.
pub fn reachable_with(trrg: &Trrg, task: &Task, delay_budget: usize, mut keep: impl FnMut(&Arc) -> bool) -> bool {
    let mut seen = vec![false; trrg.vertices().len()];
    let mut stack = vec![SOURCE];
    seen[SOURCE] = true;
    while let Some(v) = stack.pop() {
        if v == SINK {
            return true;
        }
        for &a in trrg.outgoing(v) {
            let arc = trrg.arc(a);
            let usable = match arc.kind {
                ArcKind::Perception => arc.task == Some(task.id),
                ArcKind::Communication | ArcKind::Carry => arc.frame < delay_budget,
                ArcKind::Computing => true,
            };
            if usable && keep(arc) && !seen[arc.head] {
                seen[arc.head] = true;
                stack.push(arc.head);
            }
        }
    }
    false
}
