//! Randomized comparisons of the fast routines against the reference
//! solutions in [`crate::oracle`]. Shared by the `oracle` subcommand and the
//! acceptance tests.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vfog_core::flow::{build_program, solve, FlowParams, FlowTask};
use vfog_core::power::solve_pair;
use vfog_core::robust::{learn_uncertainty_set, UncertaintySet};
use vfog_core::schedule::{select_schedule, ConflictGraph};
use vfog_core::subchannel::assign;
use vfog_core::trrg::{build_trrg, SINK, SOURCE};
use vfog_core::{
    ArcKind, Capacity, ChannelParams, Frame, Point, Role, Scenario, Task, TaskId, Trrg, VehicleId, VehicleSpec,
};

use crate::oracle::{
    closed_form_pair, grid_pair_capacity, min_assignment_exhaustive, mwis_exhaustive, random_pair_instance, rate,
    FlowInstance,
};

/// Outcome of one batch of comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub name: &'static str,
    pub cases: usize,
    /// Cases outside the tolerance.
    pub mismatches: usize,
    /// Largest deviation seen, in the unit of the tolerance.
    pub worst: f64,
    pub tolerance: f64,
    pub seconds: f64,
}

impl Comparison {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }
}

fn batch(name: &'static str, cases: usize, tolerance: f64, mut case: impl FnMut(usize) -> f64) -> Comparison {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut mismatches = 0;
    for i in 0..cases {
        let d = case(i);
        // NaN counts as a mismatch
        if !(d <= tolerance) {
            mismatches += 1;
        }
        worst = if d.is_nan() { f64::NAN } else { worst.max(d) };
    }
    Comparison {
        name,
        cases,
        mismatches,
        worst,
        tolerance,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn random_conflict_graph<R: Rng + ?Sized>(rng: &mut R, max_nodes: usize) -> ConflictGraph {
    let n = rng.random_range(1..=max_nodes);
    let density: f64 = rng.random_range(0.05..0.8);
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(density) {
                edges.push((a, b));
            }
        }
    }
    ConflictGraph::from_edges(weights, &edges)
}

/// Schedule weight against subset enumeration; deviation is `|difference|`.
pub fn mwis(seed: u64, cases: usize, max_nodes: usize) -> Comparison {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    batch("mwis vs subsets", cases, 0.0, |_| {
        let g = random_conflict_graph(&mut rng, max_nodes);
        match select_schedule(&g, 64) {
            Ok(s) => (s.weight - mwis_exhaustive(&g)).abs(),
            Err(_) => f64::NAN,
        }
    })
}

pub fn random_cost_matrix<R: Rng + ?Sized>(rng: &mut R, max_dim: usize) -> Vec<Vec<f64>> {
    let rows = rng.random_range(1..=max_dim);
    let cols = rng.random_range(1..=max_dim);
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(0.0..100.0)).collect())
        .collect()
}

/// Assignment cost against permutation enumeration; deviation is
/// `|difference|`.
pub fn hungarian(seed: u64, cases: usize, max_dim: usize) -> Comparison {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    batch("assignment vs permutations", cases, 0.0, |_| {
        let c = random_cost_matrix(&mut rng, max_dim);
        (assign(&c).total - min_assignment_exhaustive(&c)).abs()
    })
}

/// Pair capacity against the grid search; deviation is relative.
pub fn pair_grid(seed: u64, cases: usize, epsilon: f64, zeta: f64, tolerance: f64) -> Comparison {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    batch("pair capacity vs grid", cases, tolerance, |_| {
        let inst = random_pair_instance(&mut rng, 1000);
        let Ok(set) = learn_uncertainty_set(&inst.samples, epsilon) else {
            return f64::NAN;
        };
        let p = solve_pair(inst.gains, &set, inst.noise, inst.bandwidth, inst.caps, zeta);
        let g = grid_pair_capacity(inst.gains, &set, inst.noise, inst.bandwidth, inst.caps);
        if g > 0.0 {
            (p.capacity - g).abs() / g
        } else {
            p.capacity
        }
    })
}

/// Zero-spread pair capacity against the closed-form powers; deviation is
/// relative. Bisection may stop anywhere in its termination band, so the
/// powers themselves can differ by more than the capacity does.
pub fn pair_closed_form(seed: u64, cases: usize, zeta: f64) -> Comparison {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    batch("zero-spread pair vs closed form", cases, zeta, |_| {
        let inst = random_pair_instance(&mut rng, 2);
        let center = inst.samples[0];
        let set = UncertaintySet::nominal(center);
        let p = solve_pair(inst.gains, &set, inst.noise, inst.bandwidth, inst.caps, zeta);
        match closed_form_pair(center, inst.noise, inst.caps) {
            Some((l, a)) => {
                let c = rate(inst.bandwidth, inst.gains, l, a, inst.noise);
                (p.capacity - c).abs() / c
            }
            None => p.capacity,
        }
    })
}

/// A random flow problem on at most six vertices: either one task over two
/// frames, or two tasks sharing one fog vehicle in a single frame.
pub struct FlowCase {
    pub trrg: Trrg,
    pub capacities: Vec<Capacity>,
    pub tasks: Vec<FlowTask>,
    pub params: FlowParams,
}

pub fn random_flow_case<R: Rng + ?Sized>(rng: &mut R) -> FlowCase {
    let vehicle = |id, role, x| VehicleSpec {
        id: VehicleId(id),
        role,
        initial_position: Point::new(x, 0.0),
        velocity: 0.0,
    };
    let fog = Role::Fog { compute_capacity: 1.0 };
    let (vehicles, sources, num_frames) = if rng.random_bool(0.5) {
        (
            vec![vehicle(1, Role::Perceptual, 0.0), vehicle(2, fog, 10.0)],
            vec![1],
            2,
        )
    } else {
        (
            vec![
                vehicle(1, Role::Perceptual, 0.0),
                vehicle(2, Role::Perceptual, 20.0),
                vehicle(3, fog, 10.0),
            ],
            vec![1, 2],
            1,
        )
    };
    let tasks: Vec<Task> = sources
        .iter()
        .enumerate()
        .map(|(i, &s)| Task {
            id: TaskId(i as u32 + 1),
            source: VehicleId(s),
            delay_budget: num_frames + 1,
        })
        .collect();
    let scenario = Scenario {
        vehicles,
        avs: vec![],
        bs: Point::new(0.0, 0.0),
        tasks: tasks.clone(),
        channel: ChannelParams::reference(),
        comm_range: 30.0,
        horizon: num_frames as f64,
        max_conflict_nodes: 32,
        seed: 0,
    };
    let frames: Vec<Frame> = (1..=num_frames)
        .map(|k| Frame {
            index: k,
            start: (k - 1) as f64,
            end: k as f64,
        })
        .collect();
    let trrg = build_trrg(&scenario, &frames, 30.0).expect("static vehicles in range");
    let capacities = trrg
        .arcs()
        .iter()
        .map(|a| match a.kind {
            ArcKind::Perception => Capacity::Unbounded,
            _ => Capacity::Bits(rng.random_range(0.5e6..5e6)),
        })
        .collect();
    let params = FlowParams {
        num_frames,
        bandwidth_hz: 1e7,
        noise_power: 1.0,
        compression_eta: 0.1,
        w_p: rng.random_range(0.0..100.0),
        p_max_bs: rng.random_range(0.01..0.2),
    };
    let tasks = tasks
        .into_iter()
        .map(|task| FlowTask {
            task,
            gain_up: 1.0,
            gain_down: 1.0,
        })
        .collect();
    FlowCase {
        trrg,
        capacities,
        tasks,
        params,
    }
}

impl FlowCase {
    /// The same problem in the oracle's pooled form, read off the graph.
    pub fn oracle_instance(&self) -> FlowInstance {
        let p = &self.params;
        let mut arcs = Vec::new();
        let mut uploads = vec![Vec::new(); self.tasks.len()];
        for a in self.trrg.arcs() {
            match (a.kind, self.capacities[a.id.0]) {
                (ArcKind::Perception, _) => {
                    let t = self
                        .tasks
                        .iter()
                        .position(|t| Some(t.task.id) == a.task)
                        .expect("task arc");
                    uploads[t].push((a.frame, a.head));
                }
                (_, Capacity::Bits(c)) => arcs.push((a.tail, a.head, c)),
                (_, Capacity::Unbounded) => unreachable!("only perception arcs are unbounded here"),
            }
        }
        debug_assert!(arcs.iter().all(|a| a.0 != SOURCE && a.1 != SOURCE && a.0 != SINK));
        FlowInstance {
            num_vertices: self.trrg.vertices().len(),
            arcs,
            uploads,
            upload_cap: self
                .tasks
                .iter()
                .map(|t| {
                    let leg = |g: f64| p.bandwidth_hz * (1.0 + p.p_max_bs * g / p.noise_power).log2();
                    leg(t.gain_up).min(leg(t.gain_down)) / p.compression_eta
                })
                .collect(),
            num_frames: p.num_frames,
            penalty: self
                .tasks
                .iter()
                .map(|t| {
                    let w = p.w_p * p.noise_power * (1.0 / t.gain_up + 1.0 / t.gain_down);
                    (w, p.compression_eta / p.bandwidth_hz * std::f64::consts::LN_2)
                })
                .collect(),
        }
    }
}

/// Flow objective against a grid over upload vectors; deviation is
/// relative.
pub fn flow_grid(seed: u64, cases: usize, tolerance: f64) -> Comparison {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    batch("flow objective vs grid", cases, tolerance, |_| {
        let case = random_flow_case(&mut rng);
        let Ok(program) = build_program(&case.trrg, &case.capacities, &case.tasks, case.params) else {
            return f64::NAN;
        };
        let Ok(sol) = solve(&program) else {
            return f64::NAN;
        };
        let g = case.oracle_instance().grid_optimum(40, 14);
        (sol.objective - g).abs() / g.abs().max(1e-12)
    })
}
