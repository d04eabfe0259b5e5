#![allow(dead_code)]

use proptest::prelude::*;
use vfog_core::{ChannelParams, Point, Role, Scenario, Task, TaskId, VehicleId, VehicleSpec};

pub fn vehicle(id: u32, role: Role, x: f64, y: f64, velocity: f64) -> VehicleSpec {
    VehicleSpec {
        id: VehicleId(id),
        role,
        initial_position: Point::new(x, y),
        velocity,
    }
}

pub fn scenario(vehicles: Vec<VehicleSpec>, tasks: Vec<Task>, horizon: f64) -> Scenario {
    Scenario {
        vehicles,
        avs: vec![],
        bs: Point::new(100.0, 25.0),
        tasks,
        channel: ChannelParams::reference(),
        comm_range: 30.0,
        horizon,
        max_conflict_nodes: 32,
        seed: 0,
    }
}

pub fn role_strategy() -> impl Strategy<Value = Role> {
    prop_oneof![
        Just(Role::Perceptual),
        (1e5..1e7f64).prop_map(|c| Role::Relay { cache_capacity: c }),
        (1e5..1e7f64).prop_map(|c| Role::Fog { compute_capacity: c }),
    ]
}

/// 2 to 6 vehicles on a 200 m stretch, one task per perceptual vehicle.
pub fn scenario_strategy() -> impl Strategy<Value = Scenario> {
    prop::collection::vec(
        (role_strategy(), 0.0..200.0f64, 0.0..50.0f64, -30.0..30.0f64, 1usize..8),
        2..=6,
    )
    .prop_map(|specs| {
        let mut tasks = Vec::new();
        let vehicles = specs
            .iter()
            .enumerate()
            .map(|(i, &(role, x, y, v, budget))| {
                let id = i as u32 + 1;
                if role == Role::Perceptual {
                    tasks.push(Task {
                        id: TaskId(id),
                        source: VehicleId(id),
                        delay_budget: budget,
                    });
                }
                vehicle(id, role, x, y, v)
            })
            .collect();
        scenario(vehicles, tasks, 10.0)
    })
}

/// Max flow by augmenting paths on a dense matrix.
pub fn max_flow(n: usize, edges: &[(usize, usize, f64)], s: usize, t: usize) -> f64 {
    let mut cap = vec![vec![0.0f64; n]; n];
    for &(u, v, c) in edges {
        cap[u][v] += c;
    }
    let mut total = 0.0;
    loop {
        let mut prev = vec![usize::MAX; n];
        prev[s] = s;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if prev[v] == usize::MAX && cap[u][v] > 0.0 {
                    prev[v] = u;
                    stack.push(v);
                }
            }
        }
        if prev[t] == usize::MAX {
            return total;
        }
        let mut push = f64::INFINITY;
        let mut v = t;
        while v != s {
            push = push.min(cap[prev[v]][v]);
            v = prev[v];
        }
        let mut v = t;
        while v != s {
            cap[prev[v]][v] -= push;
            cap[v][prev[v]] += push;
            v = prev[v];
        }
        total += push;
    }
}

/// Correlated Gaussian pairs around `mean`.
pub fn gaussian_pairs<R: rand::Rng>(rng: &mut R, n: usize, mean: [f64; 2], std: [f64; 2], rho: f64) -> Vec<[f64; 2]> {
    use rand_distr::{Distribution, StandardNormal};
    (0..n)
        .map(|_| {
            let z0: f64 = StandardNormal.sample(rng);
            let z1: f64 = StandardNormal.sample(rng);
            [
                mean[0] + std[0] * z0,
                mean[1] + std[1] * (rho * z0 + (1.0 - rho * rho).sqrt() * z1),
            ]
        })
        .collect()
}
