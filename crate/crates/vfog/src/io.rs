//! CSV readers and writers for samples, intermediate results and solutions.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use vfog_core::flow::FlowSolution;
use vfog_core::pipeline::RunResult;
use vfog_core::schedule::ConflictGraph;
use vfog_core::trrg::{ArcKind, Capacity, Trrg};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct SampleRow {
    g_av: f64,
    g_leak: f64,
}

/// Uncertainty samples, one `(g_av, g_leak)` pair per row.
pub fn write_samples<W: Write>(w: W, samples: &[[f64; 2]]) -> Result<(), IoError> {
    let mut out = csv::Writer::from_writer(w);
    for s in samples {
        out.serialize(SampleRow {
            g_av: s[0],
            g_leak: s[1],
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_samples<R: Read>(r: R) -> Result<Vec<[f64; 2]>, IoError> {
    let mut out = Vec::new();
    for (i, row) in csv::Reader::from_reader(r).deserialize::<SampleRow>().enumerate() {
        let row = row?;
        if !(row.g_av.is_finite() && row.g_leak.is_finite()) {
            return Err(IoError::Malformed {
                row: i + 1,
                message: "non-finite gain".into(),
            });
        }
        out.push([row.g_av, row.g_leak]);
    }
    Ok(out)
}

#[derive(Serialize)]
struct PairRow {
    frame: usize,
    arc: usize,
    av: u32,
    p_link_watts: f64,
    p_av_watts: f64,
    capacity_bps: f64,
    bisection_steps: usize,
    outage: f64,
}

/// Subchannel assignment and solved powers, one row per paired link.
pub fn write_pairs<W: Write>(w: W, run: &RunResult) -> Result<(), IoError> {
    let mut out = csv::Writer::from_writer(w);
    for p in &run.pairs {
        out.serialize(PairRow {
            frame: p.frame,
            arc: p.arc.0,
            av: p.av.0,
            p_link_watts: p.power.p_link,
            p_av_watts: p.power.p_av,
            capacity_bps: p.power.capacity,
            bisection_steps: p.power.iterations,
            outage: p.outage,
        })?;
    }
    out.flush()?;
    Ok(())
}

fn capacity_field(c: Capacity) -> String {
    match c {
        Capacity::Bits(b) => b.to_string(),
        Capacity::Unbounded => "inf".into(),
    }
}

#[derive(Serialize)]
struct EdgeRow<'a> {
    arc: usize,
    kind: &'a str,
    frame: usize,
    tail: String,
    head: String,
    task: Option<u32>,
    capacity_bits: String,
}

/// The graph as an edge list. `capacities`, when given, overrides the
/// capacities stored on the arcs.
pub fn write_graph<W: Write>(w: W, trrg: &Trrg, capacities: Option<&[Capacity]>) -> Result<(), IoError> {
    let mut out = csv::Writer::from_writer(w);
    for a in trrg.arcs() {
        let cap = capacities.and_then(|c| c.get(a.id.0).copied()).unwrap_or(a.capacity);
        out.serialize(EdgeRow {
            arc: a.id.0,
            kind: a.kind.name(),
            frame: a.frame,
            tail: trrg.label(a.tail),
            head: trrg.label(a.head),
            task: a.task.map(|t| t.0),
            capacity_bits: capacity_field(cap),
        })?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ConflictRow {
    frame: usize,
    a: usize,
    b: usize,
}

/// Conflict edges as arc-id pairs.
pub fn write_conflicts<W: Write>(w: W, graphs: &[ConflictGraph]) -> Result<(), IoError> {
    let mut out = csv::Writer::from_writer(w);
    for g in graphs {
        for (i, j) in g.edges() {
            out.serialize(ConflictRow {
                frame: g.frame(),
                a: g.nodes()[i].0,
                b: g.nodes()[j].0,
            })?;
        }
    }
    out.flush()?;
    Ok(())
}

/// A solution row. Summary rows have kind `summary` and carry the totals in
/// the value columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRow {
    pub kind: String,
    pub frame: usize,
    pub arc: Option<usize>,
    pub task: Option<u32>,
    pub flow_bits: f64,
    pub capacity_bits: String,
}

pub fn solution_rows(trrg: &Trrg, capacities: &[Capacity], solution: &FlowSolution) -> Vec<SolutionRow> {
    let mut rows: Vec<SolutionRow> = solution
        .flows
        .iter()
        .map(|f| {
            let a = trrg.arc(f.arc);
            SolutionRow {
                kind: a.kind.name().into(),
                frame: a.frame,
                arc: Some(f.arc.0),
                task: Some(f.task.0),
                flow_bits: f.bits,
                capacity_bits: capacity_field(capacities[f.arc.0]),
            }
        })
        .collect();
    let summary = |name: &str, v: f64| SolutionRow {
        kind: format!("summary:{name}"),
        frame: 0,
        arc: None,
        task: None,
        flow_bits: v,
        capacity_bits: String::new(),
    };
    rows.push(summary("objective", solution.objective));
    rows.push(summary("throughput", solution.throughput));
    rows.push(summary("bs_power", solution.total_bs_power()));
    rows
}

pub fn write_solution<W: Write>(
    w: W,
    trrg: &Trrg,
    capacities: &[Capacity],
    solution: &FlowSolution,
) -> Result<(), IoError> {
    let mut out = csv::Writer::from_writer(w);
    for row in solution_rows(trrg, capacities, solution) {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_solution<R: Read>(r: R) -> Result<Vec<SolutionRow>, IoError> {
    Ok(csv::Reader::from_reader(r).deserialize().collect::<Result<_, _>>()?)
}

/// Upload rates `mu[task][frame - 1]` rebuilt from the perception rows of a
/// dumped solution, with `tasks` giving the task order.
pub fn mu_from_rows(rows: &[SolutionRow], tasks: &[u32], num_frames: usize) -> Result<Vec<Vec<f64>>, IoError> {
    let mut mu = vec![vec![0.0; num_frames]; tasks.len()];
    let perception = ArcKind::Perception.name();
    for (i, row) in rows.iter().enumerate().filter(|(_, r)| r.kind == perception) {
        let bad = |message: &str| IoError::Malformed {
            row: i + 1,
            message: message.into(),
        };
        let task = row.task.ok_or_else(|| bad("perception row without a task"))?;
        let t = tasks
            .iter()
            .position(|&x| x == task)
            .ok_or_else(|| bad("unknown task"))?;
        if row.frame == 0 || row.frame > num_frames {
            return Err(bad("frame out of range"));
        }
        mu[t][row.frame - 1] += row.flow_bits;
    }
    Ok(mu)
}

/// The value stored in a `summary:<name>` row.
pub fn summary_value(rows: &[SolutionRow], name: &str) -> Option<f64> {
    let key = format!("summary:{name}");
    rows.iter().find(|r| r.kind == key).map(|r| r.flow_bits)
}
