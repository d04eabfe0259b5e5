use vfog::config::reference_scenario;
use vfog_core::flow::Approach;
use vfog_core::pipeline::{run_with, RunOptions, RunResult};
use vfog_core::schedule::satisfies_link_constraints;
use vfog_core::{ArcKind, Capacity, Scenario, VehicleId};

fn deterministic() -> Scenario {
    let mut s = reference_scenario();
    s.channel.deterministic = true;
    s
}

fn run(s: &Scenario, approach: Approach) -> RunResult {
    let options = RunOptions {
        outage_trials: 2000,
        gap_trials: 0,
    };
    run_with(s, approach, &options).unwrap()
}

/// Path-loss gain written out from the model: 128.1 + 37.6 log10(d in km) dB.
fn pathloss_gain(a: (f64, f64), b: (f64, f64)) -> f64 {
    let d = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
    10f64.powf(-(128.1 + 37.6 * (d / 1000.0).log10()) / 10.0)
}

fn permutations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n, k - 1) {
        for c in 0..n {
            if !p.contains(&c) {
                let mut q = p.clone();
                q.push(c);
                out.push(q);
            }
        }
    }
    out
}

#[test]
fn first_frame_matching_minimizes_geometric_interference() {
    let s = deterministic();
    let r = run(&s, Approach::Robust);
    let frame = &r.frames[0];
    let t = frame.midpoint();
    let active = r.schedule.active(frame.index).to_vec();
    assert!(!active.is_empty());

    let noise = s.channel.noise_power;
    let phi: Vec<Vec<f64>> = active
        .iter()
        .map(|&id| {
            let rx = r.trrg.vehicle_of(r.trrg.arc(id).head).unwrap();
            let p = s.vehicle(rx).unwrap().position_at(t);
            s.avs
                .iter()
                .map(|av| pathloss_gain((av.transmitter.x, av.transmitter.y), (p.x, p.y)) / noise)
                .collect()
        })
        .collect();
    let best = permutations(s.avs.len(), active.len())
        .iter()
        .map(|cols| cols.iter().enumerate().map(|(i, &c)| phi[i][c]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);

    let chosen: f64 = r
        .pairs
        .iter()
        .filter(|p| p.frame == frame.index)
        .map(|p| {
            let i = active.iter().position(|&a| a == p.arc).unwrap();
            let c = s.avs.iter().position(|av| av.id == p.av).unwrap();
            phi[i][c]
        })
        .sum();
    assert_eq!(r.pairs.iter().filter(|p| p.frame == frame.index).count(), active.len());
    assert!((chosen - best).abs() <= 1e-9 * best, "{chosen} vs {best}");
}

#[test]
fn link_capacities_follow_the_pair_powers() {
    let s = reference_scenario();
    let r = run(&s, Approach::Robust);
    let b = s.channel.bandwidth_hz;
    let noise = s.channel.noise_power;
    for p in &r.pairs {
        let sinr = p.power.p_link * p.gains.link / (p.power.p_av * p.gains.cross + noise);
        let duration = r.trrg.frame(p.frame).unwrap().duration();
        let expected = b * (1.0 + sinr).log2() * duration;
        match r.capacities[p.arc.0] {
            Capacity::Bits(c) => assert!((c - expected).abs() <= 1e-9 * expected.max(1.0), "{c} vs {expected}"),
            Capacity::Unbounded => panic!("paired arc without a capacity"),
        }
        assert!(p.power.p_link <= s.channel.p_max_v * (1.0 + 1e-12));
        assert!(p.power.p_av <= s.channel.p_max_av * (1.0 + 1e-12));
    }
    // unpaired communication arcs carry nothing
    for a in r.trrg.arcs().iter().filter(|a| a.kind == ArcKind::Communication) {
        if !r.pairs.iter().any(|p| p.arc == a.id) {
            assert_eq!(r.capacities[a.id.0], Capacity::Bits(0.0));
        }
    }
}

#[test]
fn schedules_respect_the_half_duplex_rule() {
    let r = run(&reference_scenario(), Approach::Robust);
    for f in &r.frames {
        assert!(satisfies_link_constraints(&r.trrg, r.schedule.active(f.index)));
    }
}

#[test]
fn baselines_only_lose_carry_arcs() {
    let s = reference_scenario();
    let full = run(&s, Approach::Robust);
    for approach in [Approach::V2Only, Approach::V5Only, Approach::WithoutCarry] {
        let r = run(&s, approach);
        let keep = approach.carry_vehicles().unwrap();
        for a in r.trrg.arcs() {
            let owner = r.trrg.vehicle_of(a.tail);
            let masked = a.kind == ArcKind::Carry && !owner.is_some_and(|v| keep.contains(&v));
            if masked {
                assert_eq!(r.capacities[a.id.0], Capacity::Bits(0.0), "{approach:?} arc {}", a.id.0);
            } else {
                assert_eq!(
                    r.capacities[a.id.0], full.capacities[a.id.0],
                    "{approach:?} arc {}",
                    a.id.0
                );
            }
        }
        assert!(r.throughput() <= full.throughput() * (1.0 + 1e-6));
    }
    assert_eq!(Approach::V2Only.carry_vehicles(), Some(&[VehicleId(2)][..]));
}

#[test]
fn robust_powers_protect_the_audience() {
    let s = reference_scenario();
    let robust = run(&s, Approach::Robust);
    let plain = run(&s, Approach::NoRobust);
    assert!(robust.outage_rate() < 0.01, "{}", robust.outage_rate());
    assert!(plain.outage_rate() > robust.outage_rate());
    assert!(robust.throughput() > 0.0);
}

#[test]
fn same_seed_same_result() {
    let s = reference_scenario();
    let a = run(&s, Approach::Robust);
    let b = run(&s, Approach::Robust);
    assert_eq!(a.throughput().to_bits(), b.throughput().to_bits());
    assert_eq!(a.capacities, b.capacities);
}
