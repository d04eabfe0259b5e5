mod common;

use common::gaussian_pairs;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use vfog_core::power::{link_capacity, solve_pair, PairGains, PowerCaps, MAX_BISECTION_STEPS};
use vfog_core::robust::{
    learn_uncertainty_set, max_link_power, outage_eval, quantile_gain, soc_feasible, split_epsilon, UncertaintySet,
};

/// Learned set from a random correlated Gaussian with a comfortable AV gain.
fn random_set(seed: u64, epsilon: f64) -> UncertaintySet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m0 = rng.random_range(5.0..200.0);
    let m1 = rng.random_range(0.5..20.0);
    let std = [m0 * rng.random_range(0.01..0.2), m1 * rng.random_range(0.01..0.2)];
    let rho = rng.random_range(-0.8..0.8);
    learn_uncertainty_set(&gaussian_pairs(&mut rng, 1000, [m0, m1], std, rho), epsilon).unwrap()
}

/// Largest feasible link power to 1e-6 W by plain bisection on the cone test.
fn scalar_bisection(p_av: f64, set: &UncertaintySet, cap: f64) -> f64 {
    if !soc_feasible(p_av, 0.0, set, 1.0) {
        return 0.0;
    }
    if soc_feasible(p_av, cap, set, 1.0) {
        return cap;
    }
    let (mut lo, mut hi) = (0.0, cap);
    while hi - lo > 1e-7 {
        let mid = 0.5 * (lo + hi);
        if soc_feasible(p_av, mid, set, 1.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[test]
fn gaussian_coverage_on_held_out_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mean, std, rho) = ([50.0, 5.0], [5.0, 1.0], 0.4);
    let eps = 0.05;
    let set = learn_uncertainty_set(&gaussian_pairs(&mut rng, 10_000, mean, std, rho), eps).unwrap();
    let test = gaussian_pairs(&mut rng, 10_000, mean, std, rho);
    let inside = test.iter().filter(|&&x| set.contains(x)).count() as f64 / test.len() as f64;
    assert!(inside >= 1.0 - eps - 0.005, "coverage {inside}");
}

#[test]
fn feasible_powers_protect_on_fresh_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mean, std, rho) = ([40.0, 4.0], [6.0, 0.8], -0.3);
    let eps = 0.05;
    let set = learn_uncertainty_set(&gaussian_pairs(&mut rng, 1000, mean, std, rho), eps).unwrap();
    let p_av = 0.5;
    let p_link = max_link_power(p_av, &set, 1.0, 10.0);
    assert!(p_link > 0.0);
    // gamma is already folded into the first component
    let fresh = gaussian_pairs(&mut rng, 100_000, mean, std, rho);
    let outage = outage_eval(p_av, p_link, fresh, 1.0, 1.0);
    assert!(outage <= eps, "outage {outage}");
}

#[test]
fn zero_link_power_leaves_only_the_own_gain_outage() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let draws = gaussian_pairs(&mut rng, 10_000, [2.0, 1.0], [1.0, 0.5], 0.0);
    let alone = draws.iter().filter(|d| 0.7 * d[0] < 1.0).count() as f64 / draws.len() as f64;
    assert_eq!(outage_eval(0.7, 0.0, draws, 1.0, 1.0), alone);
}

#[test]
fn bonferroni_split_bounds_the_joint_outage() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let eps = 0.02;
    let (e1, e2) = split_epsilon(eps).unwrap();
    assert_eq!(e1 + e2, eps);
    let mut draw = |n: usize, scale: f64| (0..n).map(|_| scale * rng.sample::<f64, _>(Exp1)).collect::<Vec<_>>();
    let q_up = quantile_gain(&draw(20_000, 1.0), e1).unwrap().gain;
    let q_down = quantile_gain(&draw(20_000, 3.0), e2).unwrap().gain;
    let n = 100_000;
    let (up, down) = (draw(n, 1.0), draw(n, 3.0));
    let joint = up
        .iter()
        .zip(&down)
        .filter(|(u, d)| **u >= q_up && **d >= q_down)
        .count() as f64
        / n as f64;
    let slack = 3.0 * (eps * (1.0 - eps) / n as f64).sqrt();
    assert!(joint >= 1.0 - eps - slack, "joint {joint}");
}

#[test]
fn quantile_examples() {
    let ranks: Vec<f64> = (1..=1000).map(f64::from).collect();
    assert_eq!(quantile_gain(&ranks, 1e-3).unwrap().gain, 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let exp: Vec<f64> = (0..100_000).map(|_| rng.sample(Exp1)).collect();
    let q = quantile_gain(&exp, 0.05).unwrap().gain;
    let exact = -(0.95f64).ln();
    assert!((q / exact - 1.0).abs() < 0.1, "{q} vs {exact}");
}

#[test]
fn nominal_pair_reaches_both_caps() {
    let set = UncertaintySet::nominal([2.0, 1.0]);
    let caps = PowerCaps { link: 1.0, av: 1.0 };
    let p = solve_pair(PairGains { link: 1.0, cross: 1.0 }, &set, 1.0, 1.0, caps, 1e-3);
    assert!((p.p_link - 1.0).abs() <= 1e-3 && (p.p_av - 1.0).abs() <= 1e-3, "{p:?}");
}

#[test]
fn unit_sinr_over_ten_megahertz() {
    let bits = link_capacity(10e6, PairGains { link: 1.0, cross: 0.0 }, 1.0, 0.0, 1.0) * 1.0;
    assert_eq!(bits, 1e7);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn max_link_power_matches_scalar_bisection(seed in any::<u64>(), p_av in 0.0..2.0f64, cap in 0.05..2.0f64) {
        let set = random_set(seed, 1e-2);
        let fast = max_link_power(p_av, &set, 1.0, cap);
        prop_assert!((fast - scalar_bisection(p_av, &set, cap)).abs() <= 1e-6);
    }

    #[test]
    fn max_link_power_grows_with_av_power(seed in any::<u64>(), a in 0.0..2.0f64, b in 0.0..2.0f64) {
        let set = random_set(seed, 1e-2);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(max_link_power(lo, &set, 1.0, 5.0) <= max_link_power(hi, &set, 1.0, 5.0) + 1e-12);
    }

    #[test]
    fn feasible_powers_hold_on_the_set_boundary(seed in any::<u64>(), p_av in 0.0..2.0f64, frac in 0.0..=1.0f64) {
        let set = random_set(seed, 1e-3);
        let p_link = frac * max_link_power(p_av, &set, 1.0, 2.0);
        prop_assume!(soc_feasible(p_av, p_link, &set, 1.0));
        for i in 0..360 {
            let g = set.boundary_point(i as f64 * std::f64::consts::TAU / 360.0);
            let lhs = p_av * g[0] - p_link * g[1];
            prop_assert!(lhs >= 1.0 - 1e-9 * (p_av * g[0]).abs().max(1.0), "angle {} lhs {}", i, lhs);
        }
    }

    #[test]
    fn pair_solution_is_feasible_and_capped(
        seed in any::<u64>(),
        link in 1.0..100.0f64,
        cross in 0.1..10.0f64,
        cap_link in 0.05..2.0f64,
        cap_av in 0.05..2.0f64,
    ) {
        let set = random_set(seed, 1e-3);
        let caps = PowerCaps { link: cap_link, av: cap_av };
        let p = solve_pair(PairGains { link, cross }, &set, 1.0, 1.0, caps, 1e-3);
        prop_assert!(p.iterations <= MAX_BISECTION_STEPS);
        prop_assert!(p.p_link >= 0.0 && p.p_link <= cap_link);
        prop_assert!(p.p_av >= 0.0 && p.p_av <= cap_av);
        if p.capacity > 0.0 {
            prop_assert!(soc_feasible(p.p_av, p.p_link, &set, 1.0));
        }
    }

    // Bisection stops inside a band of width zeta, so monotonicity holds up
    // to that resolution.
    #[test]
    fn capacity_grows_with_either_cap(
        seed in any::<u64>(),
        cap_link in 0.05..2.0f64,
        cap_av in 0.05..2.0f64,
        grow in 1.0..4.0f64,
    ) {
        let set = random_set(seed, 1e-3);
        let gains = PairGains { link: 30.0, cross: 2.0 };
        let solve = |l: f64, a: f64| solve_pair(gains, &set, 1.0, 1.0, PowerCaps { link: l, av: a }, 1e-3).capacity;
        let base = solve(cap_link, cap_av);
        prop_assert!(solve(cap_link * grow, cap_av) >= base * (1.0 - 1e-3));
        prop_assert!(solve(cap_link, cap_av * grow) >= base * (1.0 - 1e-3));
    }
}
