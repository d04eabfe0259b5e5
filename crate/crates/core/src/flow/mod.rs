//! Delay-bounded multi-task flow control over the capacitated graph.
//!
//! Variables are per-task flows on perception, communication, carry and
//! computing arcs. Each task's flow is conserved at every vehicle vertex,
//! arcs share their capacity across tasks, and flows stay in frames before
//! the task's deadline. The utility is the frame-averaged log of the upload
//! rates minus the weighted BS power needed to relay the compressed result,
//! with the BS power eliminated at its tight value.

pub mod ipm;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{E, LN_2};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scenario::{Task, TaskId, VehicleId};
use crate::trrg::{ArcId, ArcKind, Capacity, Trrg, VertexId, SINK, SOURCE};
use ipm::{dense_rows, ConvexObjective, IpmOptions, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Approach {
    Robust,
    V2Only,
    V5Only,
    WithoutCarry,
    NoRobust,
}

impl Approach {
    pub const ALL: [Approach; 5] = [
        Approach::Robust,
        Approach::V2Only,
        Approach::V5Only,
        Approach::WithoutCarry,
        Approach::NoRobust,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Approach::Robust => "Robust",
            Approach::V2Only => "V2Only",
            Approach::V5Only => "V5Only",
            Approach::WithoutCarry => "WithoutCarry",
            Approach::NoRobust => "NoRobust",
        }
    }

    pub fn parse(s: &str) -> Option<Approach> {
        Approach::ALL.into_iter().find(|a| a.name().eq_ignore_ascii_case(s))
    }

    /// Vehicles whose storage may be used; `None` means every relay.
    pub fn carry_vehicles(&self) -> Option<&'static [VehicleId]> {
        match self {
            Approach::V2Only => Some(&[VehicleId(2)]),
            Approach::V5Only => Some(&[VehicleId(5)]),
            Approach::WithoutCarry => Some(&[]),
            Approach::Robust | Approach::NoRobust => None,
        }
    }

    /// Whether power control protects AVs against channel uncertainty.
    pub fn is_robust(&self) -> bool {
        !matches!(self, Approach::NoRobust)
    }
}

/// Zero the carry arcs the approach may not use.
pub fn baseline_mask(trrg: &Trrg, capacities: &mut [Capacity], approach: Approach) {
    let Some(allowed) = approach.carry_vehicles() else {
        return;
    };
    for arc in trrg.arcs() {
        if arc.kind == ArcKind::Carry {
            let owner = trrg.vehicle_of(arc.tail);
            if !owner.is_some_and(|v| allowed.contains(&v)) {
                capacities[arc.id.0] = Capacity::Bits(0.0);
            }
        }
    }
}

/// A task together with the lower-tail BS gains of its two relay legs.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTask {
    pub task: Task,
    /// Fog vehicle to BS.
    pub gain_up: f64,
    /// BS to requester.
    pub gain_down: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    pub num_frames: usize,
    pub bandwidth_hz: f64,
    pub noise_power: f64,
    pub compression_eta: f64,
    pub w_p: f64,
    pub p_max_bs: f64,
}

impl FlowParams {
    /// Largest compressed size the BS can relay within its power cap.
    pub fn theta_cap(&self, t: &FlowTask) -> f64 {
        let leg = |g: f64| self.bandwidth_hz * (1.0 + self.p_max_bs * g / self.noise_power).log2();
        leg(t.gain_up).min(leg(t.gain_down))
    }

    /// BS powers `(up, down)` that exactly meet the rate for `throughput` bits.
    pub fn bs_powers(&self, t: &FlowTask, throughput: f64) -> (f64, f64) {
        let x = (self.compression_eta * throughput / self.bandwidth_hz).exp2() - 1.0;
        (x * self.noise_power / t.gain_up, x * self.noise_power / t.gain_down)
    }
}

/// Utility of per-task, per-frame upload rates `mu[task][frame - 1]`.
pub fn evaluate_objective(params: &FlowParams, tasks: &[FlowTask], mu: &[Vec<f64>]) -> f64 {
    let k = params.num_frames as f64;
    let mut total = 0.0;
    for (t, rates) in tasks.iter().zip(mu) {
        let utility: f64 = rates.iter().map(|m| (m + E).ln()).sum::<f64>() / k;
        let (up, down) = params.bs_powers(t, rates.iter().sum());
        total += utility - params.w_p * (up + down);
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Var {
    arc: ArcId,
    task: usize,
}

#[derive(Debug, Clone)]
pub struct FlowProgram {
    params: FlowParams,
    tasks: Vec<FlowTask>,
    vars: Vec<Var>,
    /// Per variable: frame of its perception arc, if any.
    mu_frame: Vec<Option<usize>>,
    equalities: Vec<Vec<(usize, f64)>>,
    inequalities: Vec<(Vec<(usize, f64)>, f64)>,
    scale: f64,
}

impl FlowProgram {
    pub fn num_variables(&self) -> usize {
        self.vars.len()
    }

    pub fn tasks(&self) -> &[FlowTask] {
        &self.tasks
    }

    pub fn params(&self) -> &FlowParams {
        &self.params
    }
}

/// Whether a task may use `arc` at all.
fn admissible(trrg: &Trrg, capacities: &[Capacity], task: &Task, arc: ArcId) -> bool {
    let a = trrg.arc(arc);
    let positive = match capacities[arc.0] {
        Capacity::Unbounded => true,
        Capacity::Bits(b) => b > 0.0,
    };
    match a.kind {
        ArcKind::Perception => a.task == Some(task.id) && a.frame <= task.delay_budget,
        ArcKind::Communication | ArcKind::Carry | ArcKind::Computing => positive && a.frame < task.delay_budget,
    }
}

/// Admissible arcs that lie on some source-to-sink path.
fn useful_arcs(trrg: &Trrg, capacities: &[Capacity], task: &Task) -> Vec<ArcId> {
    let nv = trrg.vertices().len();
    let ok = |a: ArcId| admissible(trrg, capacities, task, a);
    let mut fwd = vec![false; nv];
    let mut stack = vec![SOURCE];
    fwd[SOURCE] = true;
    while let Some(v) = stack.pop() {
        for &a in trrg.outgoing(v) {
            let h = trrg.arc(a).head;
            if ok(a) && !fwd[h] {
                fwd[h] = true;
                stack.push(h);
            }
        }
    }
    let mut bwd = vec![false; nv];
    let mut stack = vec![SINK];
    bwd[SINK] = true;
    while let Some(v) = stack.pop() {
        for &a in trrg.incoming(v) {
            let t = trrg.arc(a).tail;
            if ok(a) && !bwd[t] {
                bwd[t] = true;
                stack.push(t);
            }
        }
    }
    trrg.arcs()
        .iter()
        .filter(|a| ok(a.id) && fwd[a.tail] && bwd[a.head])
        .map(|a| a.id)
        .collect()
}

/// Assemble the convex program. `capacities` is indexed by arc id.
pub fn build_program(
    trrg: &Trrg,
    capacities: &[Capacity],
    tasks: &[FlowTask],
    params: FlowParams,
) -> Result<FlowProgram> {
    if capacities.len() < trrg.arcs().len() {
        return Err(Error::MissingCapacity(capacities.len()));
    }
    let mut vars = Vec::new();
    for (ti, t) in tasks.iter().enumerate() {
        for arc in useful_arcs(trrg, capacities, &t.task) {
            vars.push(Var { arc, task: ti });
        }
    }
    let mu_frame = vars
        .iter()
        .map(|v| {
            let a = trrg.arc(v.arc);
            (a.kind == ArcKind::Perception).then_some(a.frame)
        })
        .collect();

    // conservation at every vehicle vertex a task's flow touches
    let mut balance: alloc::collections::BTreeMap<(usize, VertexId), Vec<(usize, f64)>> = Default::default();
    for (j, v) in vars.iter().enumerate() {
        let a = trrg.arc(v.arc);
        if a.head != SINK {
            balance.entry((v.task, a.head)).or_default().push((j, 1.0));
        }
        if a.tail != SOURCE {
            balance.entry((v.task, a.tail)).or_default().push((j, -1.0));
        }
    }
    let equalities: Vec<Vec<(usize, f64)>> = balance.into_values().collect();

    let scale = vars
        .iter()
        .filter_map(|v| match capacities[v.arc.0] {
            Capacity::Bits(b) => Some(b),
            Capacity::Unbounded => None,
        })
        .fold(0.0, f64::max)
        .max(1.0);

    let mut inequalities = Vec::new();
    for j in 0..vars.len() {
        inequalities.push((vec![(j, -1.0)], 0.0));
    }
    let mut shared: alloc::collections::BTreeMap<ArcId, Vec<(usize, f64)>> = Default::default();
    for (j, v) in vars.iter().enumerate() {
        if let Capacity::Bits(_) = capacities[v.arc.0] {
            shared.entry(v.arc).or_default().push((j, 1.0));
        }
    }
    for (arc, row) in shared {
        if let Capacity::Bits(b) = capacities[arc.0] {
            inequalities.push((row, b / scale));
        }
    }
    for (ti, t) in tasks.iter().enumerate() {
        let row: Vec<(usize, f64)> = vars
            .iter()
            .enumerate()
            .filter(|(j, v)| v.task == ti && trrg.arc(vars[*j].arc).kind == ArcKind::Perception)
            .map(|(j, _)| (j, params.compression_eta))
            .collect();
        if !row.is_empty() {
            inequalities.push((row, params.theta_cap(t) / scale));
        }
    }
    Ok(FlowProgram {
        params,
        tasks: tasks.to_vec(),
        vars,
        mu_frame,
        equalities,
        inequalities,
        scale,
    })
}

struct Utility<'a> {
    program: &'a FlowProgram,
    /// Per task: penalty weight and exponent rate per scaled unit.
    penalty: Vec<(f64, f64)>,
}

impl<'a> Utility<'a> {
    fn new(program: &'a FlowProgram) -> Self {
        let p = &program.params;
        let penalty = program
            .tasks
            .iter()
            .map(|t| {
                let weight = p.w_p * p.noise_power * (1.0 / t.gain_up + 1.0 / t.gain_down);
                let rate = p.compression_eta * program.scale / p.bandwidth_hz * LN_2;
                (weight, rate)
            })
            .collect();
        Utility { program, penalty }
    }

    fn task_sums(&self, z: &DVector<f64>) -> Vec<f64> {
        let mut sums = vec![0.0; self.program.tasks.len()];
        for (j, v) in self.program.vars.iter().enumerate() {
            if self.program.mu_frame[j].is_some() {
                sums[v.task] += z[j];
            }
        }
        sums
    }
}

// Minimized: the negated utility in scaled units.
impl ConvexObjective for Utility<'_> {
    fn value(&self, z: &DVector<f64>) -> f64 {
        let k = self.program.params.num_frames as f64;
        let s = self.program.scale;
        let mut f = 0.0;
        for (j, frame) in self.program.mu_frame.iter().enumerate() {
            if frame.is_some() {
                f -= (s * z[j] + E).ln() / k;
            }
        }
        for (sum, (w, r)) in self.task_sums(z).iter().zip(&self.penalty) {
            f += w * ((r * sum).exp() - 1.0);
        }
        f
    }

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let k = self.program.params.num_frames as f64;
        let s = self.program.scale;
        let sums = self.task_sums(z);
        DVector::from_iterator(
            z.len(),
            self.program.vars.iter().enumerate().map(|(j, v)| {
                if self.program.mu_frame[j].is_some() {
                    let (w, r) = self.penalty[v.task];
                    -s / (k * (s * z[j] + E)) + w * r * (r * sums[v.task]).exp()
                } else {
                    0.0
                }
            }),
        )
    }

    fn hessian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let k = self.program.params.num_frames as f64;
        let s = self.program.scale;
        let sums = self.task_sums(z);
        let n = z.len();
        let mut h = DMatrix::zeros(n, n);
        let mu: Vec<usize> = (0..n).filter(|&j| self.program.mu_frame[j].is_some()).collect();
        for &i in &mu {
            let d = s * z[i] + E;
            h[(i, i)] += s * s / (k * d * d);
            let ti = self.program.vars[i].task;
            let (w, r) = self.penalty[ti];
            let c = w * r * r * (r * sums[ti]).exp();
            for &j in &mu {
                if self.program.vars[j].task == ti {
                    h[(i, j)] += c;
                }
            }
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcFlow {
    pub arc: ArcId,
    pub task: TaskId,
    pub bits: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsPower {
    pub task: TaskId,
    pub up: f64,
    pub down: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    /// Every program variable, including zero-valued ones.
    pub flows: Vec<ArcFlow>,
    /// `mu[task][frame - 1]`, upload rates in bits per frame.
    pub mu: Vec<Vec<f64>>,
    pub throughput: f64,
    pub bs_power: Vec<BsPower>,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

impl FlowSolution {
    pub fn total_bs_power(&self) -> f64 {
        self.bs_power.iter().map(|p| p.up + p.down).sum()
    }

    pub fn flow_on(&self, arc: ArcId) -> f64 {
        self.flows.iter().filter(|f| f.arc == arc).map(|f| f.bits).sum()
    }
}

/// Solve with the default relative tolerance (1e-9 internally).
pub fn solve(program: &FlowProgram) -> Result<FlowSolution> {
    solve_with(program, IpmOptions::default())
}

pub fn solve_with(program: &FlowProgram, options: IpmOptions) -> Result<FlowSolution> {
    let n = program.vars.len();
    if n == 0 {
        return finish(program, &DVector::zeros(0), None);
    }
    let rows: Vec<(Vec<(usize, f64)>, f64)> = program.equalities.iter().map(|r| (r.clone(), 0.0)).collect();
    let (a, b) = dense_rows(n, &rows);
    let (g, h) = dense_rows(n, &program.inequalities);
    // uniform start strictly inside every inequality
    let tau = 0.5
        * program
            .inequalities
            .iter()
            .filter(|(_, bound)| *bound > 0.0)
            .map(|(row, bound)| bound / row.iter().map(|(_, c)| c.abs()).sum::<f64>())
            .fold(1.0, f64::min);
    if !(tau > 0.0) {
        return Err(Error::Infeasible("a capacity constraint has no interior".into()));
    }
    let objective = Utility::new(program);
    let problem = Problem {
        objective: &objective,
        a: &a,
        b: &b,
        g: &g,
        h: &h,
    };
    let sol = problem.solve(DVector::from_element(n, tau), options)?;
    finish(program, &sol.z, Some(&sol))
}

fn finish(program: &FlowProgram, z: &DVector<f64>, sol: Option<&ipm::IpmSolution>) -> Result<FlowSolution> {
    let mut mu = vec![vec![0.0; program.params.num_frames]; program.tasks.len()];
    let mut flows = Vec::with_capacity(program.vars.len());
    for (j, v) in program.vars.iter().enumerate() {
        // interior iterates are strictly positive; rescale to bits
        let bits = (z[j] * program.scale).max(0.0);
        flows.push(ArcFlow {
            arc: v.arc,
            task: program.tasks[v.task].task.id,
            bits,
        });
        if let Some(frame) = program.mu_frame[j] {
            mu[v.task][frame - 1] += bits;
        }
    }
    let throughput: f64 = mu.iter().flatten().sum();
    let bs_power = program
        .tasks
        .iter()
        .zip(&mu)
        .map(|(t, rates)| {
            let (up, down) = program.params.bs_powers(t, rates.iter().sum());
            BsPower {
                task: t.task.id,
                up,
                down,
            }
        })
        .collect();
    let objective = evaluate_objective(&program.params, &program.tasks, &mu);
    if !objective.is_finite() {
        return Err(Error::Infeasible(format!("objective evaluated to {objective}")));
    }
    Ok(FlowSolution {
        flows,
        mu,
        throughput,
        bs_power,
        objective,
        iterations: sol.map_or(0, |s| s.iterations),
        primal_residual: sol.map_or(0.0, |s| s.primal_residual * program.scale),
        dual_residual: sol.map_or(0.0, |s| s.dual_residual),
        gap: sol.map_or(0.0, |s| s.gap),
    })
}

/// Largest per-task imbalance (bits) over all vehicle vertices.
pub fn conservation_residual(trrg: &Trrg, solution: &FlowSolution) -> f64 {
    let mut net: alloc::collections::BTreeMap<(TaskId, VertexId), f64> = Default::default();
    for f in &solution.flows {
        let a = trrg.arc(f.arc);
        if a.head != SINK {
            *net.entry((f.task, a.head)).or_default() += f.bits;
        }
        if a.tail != SOURCE {
            *net.entry((f.task, a.tail)).or_default() -= f.bits;
        }
    }
    net.values().fold(0.0, |m, v| m.max(v.abs()))
}

/// Largest amount (bits) by which joint arc flows exceed their capacity.
pub fn capacity_violation(trrg: &Trrg, capacities: &[Capacity], solution: &FlowSolution) -> f64 {
    trrg.arcs()
        .iter()
        .filter_map(|a| match capacities[a.id.0] {
            Capacity::Bits(b) => Some(solution.flow_on(a.id) - b),
            Capacity::Unbounded => None,
        })
        .fold(0.0, f64::max)
}

/// Whether every flow respects its task's deadline.
pub fn respects_deadlines(trrg: &Trrg, tasks: &[FlowTask], solution: &FlowSolution) -> bool {
    solution.flows.iter().all(|f| {
        let a = trrg.arc(f.arc);
        let t = tasks.iter().find(|t| t.task.id == f.task).map(|t| t.task.delay_budget);
        match (a.kind, t) {
            (_, None) => false,
            (ArcKind::Perception, Some(ts)) => a.frame <= ts || f.bits == 0.0,
            (_, Some(ts)) => a.frame < ts || f.bits == 0.0,
        }
    })
}
