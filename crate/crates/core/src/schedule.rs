//! Per-frame link activation.
//!
//! Communication arcs of one frame conflict when they share a transmitter,
//! share a receiver, or chain through a relay (a vehicle cannot send and
//! receive in the same frame). The active set is the maximal independent set
//! of the conflict graph with the largest total CNR weight, found by
//! enumerating all maximal independent sets with Bron-Kerbosch.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::trrg::{Arc, ArcId, ArcKind, Trrg};

#[derive(Debug, Clone, PartialEq)]
pub struct ConflictGraph {
    frame: usize,
    nodes: Vec<ArcId>,
    weights: Vec<f64>,
    adjacent: Vec<Vec<bool>>,
}

impl ConflictGraph {
    /// Graph over nodes `0..weights.len()` (node `i` stands for arc `i`).
    pub fn from_edges(weights: Vec<f64>, edges: &[(usize, usize)]) -> Self {
        let n = weights.len();
        let mut adjacent = vec![vec![false; n]; n];
        for &(a, b) in edges {
            if a != b {
                adjacent[a][b] = true;
                adjacent[b][a] = true;
            }
        }
        ConflictGraph {
            frame: 0,
            nodes: (0..n).map(ArcId).collect(),
            weights,
            adjacent,
        }
    }

    pub fn frame(&self) -> usize {
        self.frame
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[ArcId] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn conflicts(&self, a: usize, b: usize) -> bool {
        self.adjacent[a][b]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.len() {
            for b in (a + 1)..self.len() {
                if self.adjacent[a][b] {
                    out.push((a, b));
                }
            }
        }
        out
    }

    pub fn is_independent(&self, set: &[usize]) -> bool {
        set.iter()
            .enumerate()
            .all(|(i, &a)| set[i + 1..].iter().all(|&b| !self.adjacent[a][b]))
    }

    /// Sum of node weights, accumulated in ascending node order.
    pub fn weight_of(&self, set: &[usize]) -> f64 {
        let mut sorted = set.to_vec();
        sorted.sort_unstable();
        sorted.iter().map(|&i| self.weights[i]).sum()
    }
}

/// Whether two communication arcs of the same frame conflict.
pub fn arcs_conflict(trrg: &Trrg, a: &Arc, b: &Arc) -> bool {
    if a.tail == b.tail || a.head == b.head {
        return true;
    }
    let relay = |v| trrg.role(v).is_some_and(|r| r.is_relay());
    (a.head == b.tail && relay(a.head)) || (b.head == a.tail && relay(b.head))
}

/// Conflict graph over the communication arcs of frame `k`, in arc-id order.
pub fn build_conflict_graph(trrg: &Trrg, frame: usize, mut weight: impl FnMut(&Arc) -> f64) -> Result<ConflictGraph> {
    trrg.frame(frame)?;
    let arcs: Vec<&Arc> = trrg.communication_arcs(frame).collect();
    let n = arcs.len();
    let mut adjacent = vec![vec![false; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if arcs_conflict(trrg, arcs[i], arcs[j]) {
                adjacent[i][j] = true;
                adjacent[j][i] = true;
            }
        }
    }
    Ok(ConflictGraph {
        frame,
        nodes: arcs.iter().map(|a| a.id).collect(),
        weights: arcs.iter().map(|a| weight(a)).collect(),
        adjacent,
    })
}

/// All maximal independent sets, each sorted ascending, in lexicographic order.
pub fn maximal_independent_sets(graph: &ConflictGraph, cap: usize) -> Result<Vec<Vec<usize>>> {
    let n = graph.len();
    if n > cap.min(64) {
        return Err(Error::TooManyNodes {
            nodes: n,
            cap: cap.min(64),
        });
    }
    if n == 0 {
        return Ok(vec![Vec::new()]);
    }
    // neighbours in the complement graph
    let compat: Vec<u64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && !graph.adjacent[i][j])
                .fold(0u64, |m, j| m | (1 << j))
        })
        .collect();
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut out = Vec::new();
    bron_kerbosch(&compat, 0, all, 0, &mut out);
    let mut sets: Vec<Vec<usize>> = out
        .into_iter()
        .map(|m| (0..n).filter(|&i| m & (1 << i) != 0).collect())
        .collect();
    sets.sort();
    Ok(sets)
}

fn bron_kerbosch(compat: &[u64], r: u64, mut p: u64, mut x: u64, out: &mut Vec<u64>) {
    if p == 0 {
        if x == 0 {
            out.push(r);
        }
        return;
    }
    let pivot = bits(p | x)
        .max_by_key(|&u| ((p & compat[u]).count_ones(), core::cmp::Reverse(u)))
        .unwrap();
    for v in bits(p & !compat[pivot]) {
        let bit = 1u64 << v;
        bron_kerbosch(compat, r | bit, p & compat[v], x & compat[v], out);
        p &= !bit;
        x |= bit;
    }
}

fn bits(mut m: u64) -> impl Iterator<Item = usize> {
    core::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let i = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(i)
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSchedule {
    pub frame: usize,
    /// Active arcs, ascending.
    pub active: Vec<ArcId>,
    pub weight: f64,
}

/// Maximum-weight maximal independent set. Equal weights resolve to the
/// lexicographically smallest arc-id sequence.
pub fn select_schedule(graph: &ConflictGraph, cap: usize) -> Result<FrameSchedule> {
    let sets = maximal_independent_sets(graph, cap)?;
    let mut best: Option<(f64, Vec<ArcId>)> = None;
    for set in sets {
        let w = graph.weight_of(&set);
        let mut ids: Vec<ArcId> = set.iter().map(|&i| graph.nodes[i]).collect();
        ids.sort_unstable();
        let better = match &best {
            None => true,
            Some((bw, bids)) => w > *bw || (w == *bw && ids < *bids),
        };
        if better {
            best = Some((w, ids));
        }
    }
    let (weight, active) = best.unwrap_or((0.0, Vec::new()));
    Ok(FrameSchedule {
        frame: graph.frame,
        active,
        weight,
    })
}

/// Active communication arcs for every frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkSchedule {
    frames: BTreeMap<usize, FrameSchedule>,
}

impl LinkSchedule {
    pub fn new(frames: impl IntoIterator<Item = FrameSchedule>) -> Self {
        LinkSchedule {
            frames: frames.into_iter().map(|f| (f.frame, f)).collect(),
        }
    }

    pub fn frame(&self, k: usize) -> Option<&FrameSchedule> {
        self.frames.get(&k)
    }

    pub fn frames(&self) -> impl Iterator<Item = &FrameSchedule> {
        self.frames.values()
    }

    pub fn active(&self, k: usize) -> &[ArcId] {
        self.frames.get(&k).map(|f| f.active.as_slice()).unwrap_or(&[])
    }

    pub fn is_active(&self, trrg: &Trrg, arc: ArcId) -> bool {
        let a = trrg.arc(arc);
        a.kind == ArcKind::Communication && self.active(a.frame).binary_search(&arc).is_ok()
    }
}

/// Check the one-to-one and half-duplex rules on a set of same-frame arcs.
pub fn satisfies_link_constraints(trrg: &Trrg, active: &[ArcId]) -> bool {
    let mut sends = BTreeMap::new();
    let mut receives = BTreeMap::new();
    for &id in active {
        let a = trrg.arc(id);
        *sends.entry(a.tail).or_insert(0usize) += 1;
        *receives.entry(a.head).or_insert(0usize) += 1;
    }
    if sends.values().any(|&c| c > 1) || receives.values().any(|&c| c > 1) {
        return false;
    }
    receives
        .keys()
        .all(|v| !(sends.contains_key(v) && trrg.role(*v).is_some_and(|r| r.is_relay())))
}
