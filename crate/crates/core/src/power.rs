//! Per-pair power control and communication-arc capacities.
//!
//! A V2V link and the AV whose subchannel it borrows share one power
//! problem: maximize the link rate evaluated at mean gains subject to the
//! robust AV constraint and both power caps. The link rate falls with AV
//! power and rises with link power, so the optimum sits where the link
//! power limit first reaches its cap; the AV power is found by bisection.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::robust::{feasible_link_interval, max_link_power, soc_feasible, UncertaintySet};
use crate::schedule::LinkSchedule;
use crate::trrg::{ArcId, ArcKind, Capacity, Trrg};

pub const MAX_BISECTION_STEPS: usize = 64;

/// Mean gains seen by the V2V receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGains {
    /// Link transmitter to link receiver.
    pub link: f64,
    /// AV transmitter to link receiver.
    pub cross: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerCaps {
    pub link: f64,
    pub av: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairPower {
    pub p_link: f64,
    pub p_av: f64,
    /// Bits per second at mean gains.
    pub capacity: f64,
    pub iterations: usize,
}

impl PairPower {
    pub fn is_active(&self) -> bool {
        self.capacity > 0.0
    }
}

/// `W log2(1 + p_link g_link / (p_av g_cross + noise))`.
pub fn link_capacity(bandwidth: f64, gains: PairGains, p_link: f64, p_av: f64, noise: f64) -> f64 {
    bandwidth * (1.0 + p_link * gains.link / (p_av * gains.cross + noise)).log2()
}

/// Bisection on the AV power. `zeta` is the accuracy relative to the caps.
pub fn solve_pair(
    gains: PairGains,
    set: &UncertaintySet,
    noise: f64,
    bandwidth: f64,
    caps: PowerCaps,
    zeta: f64,
) -> PairPower {
    let tol_link = zeta * caps.link;
    let tol_av = zeta * caps.av;
    let mut best: Option<PairPower> = None;
    let mut iterations = 0;
    let mut record = |p_av: f64, iterations: usize| {
        let p_link = max_link_power(p_av, set, noise, caps.link);
        if !soc_feasible(p_av, p_link, set, noise) {
            return;
        }
        let capacity = link_capacity(bandwidth, gains, p_link, p_av, noise);
        if best.is_none_or(|b| capacity >= b.capacity) {
            best = Some(PairPower {
                p_link,
                p_av,
                capacity,
                iterations,
            });
        }
    };

    let (mut lo, mut hi) = (0.0, caps.av);
    let mut p_av = 0.0;
    let mut settled = false;
    while p_av < caps.av - tol_av && iterations < MAX_BISECTION_STEPS {
        iterations += 1;
        p_av = 0.5 * (lo + hi);
        // branch on the unclamped limit so a capped link keeps lowering p_av
        let limit = feasible_link_interval(p_av, set, noise)
            .filter(|&(l, _)| l <= caps.link)
            .map_or(f64::NEG_INFINITY, |(_, h)| h);
        record(p_av, iterations);
        if limit > caps.link + tol_link {
            hi = p_av;
        } else if limit < caps.link - tol_link {
            lo = p_av;
        } else {
            settled = true;
            break;
        }
    }
    if !settled {
        // the bracket closed on an endpoint without meeting the cap
        record(hi, iterations);
    }

    best.unwrap_or_else(|| {
        // AV served alone at the smallest power meeting its constraint
        let spread = (set.shape[(0, 0)].powi(2) + set.shape[(0, 1)].powi(2)).sqrt();
        let margin = set.center[0] - spread;
        let p_av = if margin > 0.0 {
            (noise / margin).min(caps.av)
        } else {
            caps.av
        };
        PairPower {
            p_link: 0.0,
            p_av,
            capacity: 0.0,
            iterations,
        }
    })
}

/// Bits each arc can carry in its frame. Communication arcs carry only when
/// scheduled and paired with an AV (present in `powers`).
pub fn arc_capacities(trrg: &Trrg, schedule: &LinkSchedule, powers: &BTreeMap<ArcId, PairPower>) -> Vec<Capacity> {
    trrg.arcs()
        .iter()
        .map(|arc| match arc.kind {
            ArcKind::Communication => {
                let duration = trrg.frame(arc.frame).map_or(0.0, |f| f.duration());
                let bits = match powers.get(&arc.id) {
                    Some(p) if schedule.is_active(trrg, arc.id) => p.capacity * duration,
                    _ => 0.0,
                };
                Capacity::Bits(bits)
            }
            ArcKind::Perception => Capacity::Unbounded,
            ArcKind::Carry | ArcKind::Computing => arc.capacity,
        })
        .collect()
}
