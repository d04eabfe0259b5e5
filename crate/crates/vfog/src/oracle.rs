//! Slow reference solutions used to cross-check the fast algorithms: subset
//! enumeration, permutation enumeration, grid searches and a plain
//! augmenting-path max flow. Nothing here calls the routine it checks.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use vfog_core::power::{PairGains, PowerCaps};
use vfog_core::robust::UncertaintySet;
use vfog_core::schedule::ConflictGraph;

/// Heaviest independent set weight by enumerating all `2^n` subsets.
/// Weights of a set are summed in ascending node order.
pub fn mwis_exhaustive(graph: &ConflictGraph) -> f64 {
    let n = graph.len();
    assert!(n <= 24, "exhaustive search over {n} nodes");
    let w = graph.weights();
    let mut best = 0.0f64;
    let mut members = Vec::with_capacity(n);
    'subsets: for mask in 0u32..(1 << n) {
        members.clear();
        for i in 0..n {
            if mask >> i & 1 == 1 {
                for &j in &members {
                    if graph.conflicts(i, j) {
                        continue 'subsets;
                    }
                }
                members.push(i);
            }
        }
        best = best.max(members.iter().map(|&i| w[i]).sum());
    }
    best
}

/// Cheapest matching of size `min(rows, cols)` by trying every injection of
/// the shorter side into the longer one. Costs summed in row order.
pub fn min_assignment_exhaustive(cost: &[Vec<f64>]) -> f64 {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let transposed = rows > cols;
    let (short, long) = if transposed { (cols, rows) } else { (rows, cols) };
    let mut used = vec![false; long];
    let mut chosen = vec![0usize; short];
    let mut best = f64::INFINITY;
    fn rec(
        s: usize,
        short: usize,
        used: &mut [bool],
        chosen: &mut [usize],
        best: &mut f64,
        total: &dyn Fn(&[usize]) -> f64,
    ) {
        if s == short {
            *best = best.min(total(chosen));
            return;
        }
        for l in 0..used.len() {
            if !used[l] {
                used[l] = true;
                chosen[s] = l;
                rec(s + 1, short, used, chosen, best, total);
                used[l] = false;
            }
        }
    }
    let total = |chosen: &[usize]| -> f64 {
        // sum in row order of the original matrix
        let mut pairs: Vec<(usize, usize)> = chosen
            .iter()
            .enumerate()
            .map(|(s, &l)| if transposed { (l, s) } else { (s, l) })
            .collect();
        pairs.sort_unstable();
        pairs.iter().map(|&(r, c)| cost[r][c]).sum()
    };
    rec(0, short, &mut used, &mut chosen, &mut best, &total);
    best
}

/// `p_av c0 - p_link c1 - |B^T (p_av, -p_link)| - noise`, written out.
pub fn robust_margin(p_av: f64, p_link: f64, set: &UncertaintySet, noise: f64) -> f64 {
    let b = &set.shape;
    let u0 = p_av * b[(0, 0)] - p_link * b[(1, 0)];
    let u1 = p_av * b[(0, 1)] - p_link * b[(1, 1)];
    p_av * set.center[0] - p_link * set.center[1] - (u0 * u0 + u1 * u1).sqrt() - noise
}

pub fn rate(bandwidth: f64, gains: PairGains, p_link: f64, p_av: f64, noise: f64) -> f64 {
    bandwidth * (1.0 + p_link * gains.link / (p_av * gains.cross + noise)).log2()
}

/// Largest feasible link power at a fixed AV power, by bisection on the
/// margin over `[0, cap]`. Returns `None` when even zero is infeasible.
pub fn bisect_link_power(p_av: f64, set: &UncertaintySet, noise: f64, cap: f64) -> Option<f64> {
    if robust_margin(p_av, 0.0, set, noise) < 0.0 {
        return None;
    }
    if robust_margin(p_av, cap, set, noise) >= 0.0 {
        return Some(cap);
    }
    // the margin is concave in p_link, so feasibility is an interval from 0
    let (mut lo, mut hi) = (0.0, cap);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if robust_margin(p_av, mid, set, noise) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Largest feasible link power at a fixed AV power, by nested grids: scan
/// `[0, cap]`, then rescan the cell past the last feasible point.
fn grid_link_limit(p_av: f64, set: &UncertaintySet, noise: f64, cap: f64) -> Option<f64> {
    const N: usize = 200;
    let (mut lo, mut hi) = (0.0, cap);
    if robust_margin(p_av, lo, set, noise) < 0.0 {
        return None;
    }
    for _ in 0..6 {
        let mut last = lo;
        for j in 1..=N {
            let l = lo + (hi - lo) * j as f64 / N as f64;
            if robust_margin(p_av, l, set, noise) < 0.0 {
                break;
            }
            last = l;
        }
        let cell = (hi - lo) / N as f64;
        lo = last;
        hi = (last + cell).min(cap);
        if lo >= hi {
            break;
        }
    }
    Some(lo)
}

/// Best link rate over a grid of AV powers. The rate grows with the link
/// power, so each row only needs its largest feasible link power, found on a
/// nested grid. The AV axis zooms in around the incumbent. 0 when nothing
/// is feasible.
pub fn grid_pair_capacity(gains: PairGains, set: &UncertaintySet, noise: f64, bandwidth: f64, caps: PowerCaps) -> f64 {
    let mut best = (0.0, 0.0); // rate, p_av
    let scan = |a0: f64, a1: f64, n: usize, best: &mut (f64, f64)| {
        for i in 0..=n {
            let p_av = (a0 + (a1 - a0) * i as f64 / n as f64).clamp(0.0, caps.av);
            if let Some(l) = grid_link_limit(p_av, set, noise, caps.link) {
                let r = rate(bandwidth, gains, l, p_av, noise);
                if r > best.0 {
                    *best = (r, p_av);
                }
            }
        }
    };
    scan(0.0, caps.av, 1000, &mut best);
    let mut da = caps.av / 1000.0;
    for _ in 0..8 {
        if best.0 == 0.0 {
            break;
        }
        let a = best.1;
        scan(a - 4.0 * da, a + 4.0 * da, 80, &mut best);
        da /= 10.0;
    }
    best.0
}

/// Optimal powers with no uncertainty spread, in closed form. Returns
/// `(p_link, p_av)`, or `None` when the AV cannot be protected with any link
/// power.
pub fn closed_form_pair(center: [f64; 2], noise: f64, caps: PowerCaps) -> Option<(f64, f64)> {
    let [a, c] = center;
    if caps.av * a - noise <= 0.0 {
        return None;
    }
    // link limit at full AV power
    let limit = (caps.av * a - noise) / c;
    if limit <= caps.link {
        Some((limit, caps.av))
    } else {
        // lower the AV power until the limit meets the link cap exactly
        Some((caps.link, (caps.link * c + noise) / a))
    }
}

/// One random power-control instance in normalized units (noise 1, unit
/// bandwidth) with a set learned from correlated Gaussian samples.
pub struct PairInstance {
    pub gains: PairGains,
    pub samples: Vec<[f64; 2]>,
    pub noise: f64,
    pub bandwidth: f64,
    pub caps: PowerCaps,
}

pub fn random_pair_instance<R: Rng + ?Sized>(rng: &mut R, samples: usize) -> PairInstance {
    let m0 = rng.random_range(5.0..200.0);
    let m1 = rng.random_range(0.5..20.0);
    let s0 = m0 * rng.random_range(0.01..0.2);
    let s1 = m1 * rng.random_range(0.01..0.2);
    let rho: f64 = rng.random_range(-0.8..0.8);
    let draws = (0..samples)
        .map(|_| {
            let z0: f64 = StandardNormal.sample(rng);
            let z1: f64 = StandardNormal.sample(rng);
            let y = rho * z0 + (1.0 - rho * rho).sqrt() * z1;
            [m0 + s0 * z0, m1 + s1 * y]
        })
        .collect();
    PairInstance {
        gains: PairGains {
            link: rng.random_range(1.0..100.0),
            cross: rng.random_range(0.1..10.0),
        },
        samples: draws,
        noise: 1.0,
        bandwidth: 1.0,
        caps: PowerCaps {
            link: rng.random_range(0.05..2.0),
            av: rng.random_range(0.05..2.0),
        },
    }
}

/// Max flow by shortest augmenting paths on a dense residual matrix.
pub fn max_flow(n: usize, edges: &[(usize, usize, f64)], s: usize, t: usize) -> f64 {
    let mut cap = vec![vec![0.0f64; n]; n];
    for &(u, v, c) in edges {
        cap[u][v] += c;
    }
    let mut total = 0.0;
    loop {
        let mut prev = vec![usize::MAX; n];
        prev[s] = s;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if prev[v] == usize::MAX && cap[u][v] > 1e-12 {
                    prev[v] = u;
                    queue.push_back(v);
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
        if !push.is_finite() {
            return f64::INFINITY;
        }
        let mut v = t;
        while v != s {
            let u = prev[v];
            cap[u][v] -= push;
            cap[v][u] += push;
            v = u;
        }
        total += push;
    }
}

/// A small flow instance for the grid oracle: a common delay budget, so
/// every task sees the same arcs and the tasks can be pooled into one
/// commodity when testing feasibility.
pub struct FlowInstance {
    /// Vertices `0 = alpha`, `1 = omega`, then the vehicle copies.
    pub num_vertices: usize,
    /// Non-perception arcs `(tail, head, capacity)`.
    pub arcs: Vec<(usize, usize, f64)>,
    /// `uploads[task]`: one entry per frame, `(frame, vertex)` of the task
    /// source's copy.
    pub uploads: Vec<Vec<(usize, usize)>>,
    /// Per task cap on the summed uploads.
    pub upload_cap: Vec<f64>,
    pub num_frames: usize,
    /// Per task `(weight, rate)` of the penalty `weight (exp(rate sum) - 1)`.
    pub penalty: Vec<(f64, f64)>,
}

impl FlowInstance {
    pub fn utility(&self, mu: &[Vec<f64>]) -> f64 {
        let k = self.num_frames as f64;
        let mut u = 0.0;
        for (t, rates) in mu.iter().enumerate() {
            // frames without an upload arc still count with rate 0
            let missing = (self.num_frames - rates.len()) as f64;
            u += (rates.iter().map(|m| (m + std::f64::consts::E).ln()).sum::<f64>() + missing) / k;
            let (w, r) = self.penalty[t];
            u -= w * ((r * rates.iter().sum::<f64>()).exp() - 1.0);
        }
        u
    }

    /// Whether the upload vector can be routed to omega.
    pub fn feasible(&self, mu: &[Vec<f64>]) -> bool {
        let tasks = mu.len();
        // extra vertices: super source, then one hub per task
        let src = self.num_vertices;
        let n = self.num_vertices + 1 + tasks;
        let mut edges = self.arcs.clone();
        let mut need = 0.0;
        for (t, rates) in mu.iter().enumerate() {
            let hub = self.num_vertices + 1 + t;
            let sum: f64 = rates.iter().sum();
            if sum > self.upload_cap[t] * (1.0 + 1e-12) {
                return false;
            }
            edges.push((src, hub, sum));
            for (&m, &(_, v)) in rates.iter().zip(&self.uploads[t]) {
                edges.push((hub, v, m));
            }
            need += sum;
        }
        max_flow(n, &edges, src, 1) >= need * (1.0 - 1e-9) - 1e-9
    }

    /// Best utility over a grid of upload vectors with zoom-in refinement.
    pub fn grid_optimum(&self, steps: usize, rounds: usize) -> f64 {
        let dims: Vec<(usize, usize)> = self
            .uploads
            .iter()
            .enumerate()
            .flat_map(|(t, u)| (0..u.len()).map(move |i| (t, i)))
            .collect();
        let upper: f64 = self.arcs.iter().map(|a| a.2).sum::<f64>().max(1.0);
        let mut lo = vec![0.0; dims.len()];
        let mut hi = vec![upper; dims.len()];
        let shape: Vec<usize> = self.uploads.iter().map(Vec::len).collect();
        let to_mu = |x: &[f64]| -> Vec<Vec<f64>> {
            let mut mu: Vec<Vec<f64>> = shape.iter().map(|&l| vec![0.0; l]).collect();
            for (d, &(t, i)) in dims.iter().enumerate() {
                mu[t][i] = x[d];
            }
            mu
        };
        let mut best_x = vec![0.0; dims.len()];
        let mut best = self.utility(&to_mu(&best_x));
        for _ in 0..rounds {
            let mut idx = vec![0usize; dims.len()];
            loop {
                let x: Vec<f64> = idx
                    .iter()
                    .enumerate()
                    .map(|(d, &i)| (lo[d] + (hi[d] - lo[d]) * i as f64 / steps as f64).max(0.0))
                    .collect();
                let mu = to_mu(&x);
                let u = self.utility(&mu);
                if u > best && self.feasible(&mu) {
                    best = u;
                    best_x = x;
                }
                // odometer increment
                let mut d = 0;
                while d < idx.len() {
                    idx[d] += 1;
                    if idx[d] <= steps {
                        break;
                    }
                    idx[d] = 0;
                    d += 1;
                }
                if d == idx.len() {
                    break;
                }
            }
            for d in 0..dims.len() {
                let span = (hi[d] - lo[d]) / steps as f64 * 2.0;
                lo[d] = (best_x[d] - span).max(0.0);
                hi[d] = best_x[d] + span;
            }
        }
        best
    }
}
