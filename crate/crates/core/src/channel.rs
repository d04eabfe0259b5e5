//! Pathloss, shadowing and Rayleigh fading.
//!
//! Two sampling levels exist. [`sample_gain`] draws one instantaneous gain:
//! fresh log-normal shadowing times a unit-mean exponential fading power.
//! [`ChannelModel`] draws frame-level gains for the optimization pipeline:
//! shadowing is a per-link constant fixed by the scenario seed (the known
//! environment), and fast fading is averaged over `fading_blocks` coherence
//! blocks within the frame.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::scenario::{AvId, ChannelParams, Point, Scenario, VehicleId};
use crate::units;

/// Pathloss in dB: `128.1 + 37.6 log10(d[km])`.
pub fn pathloss_db(distance_m: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::ZeroDistance);
    }
    Ok(128.1 + 37.6 * (distance_m / 1000.0).log10())
}

/// Linear gain with shadowing and fading disabled.
pub fn deterministic_gain(distance_m: f64) -> Result<f64> {
    Ok(units::db_to_linear(-pathloss_db(distance_m)?))
}

/// One instantaneous linear gain between two positions.
pub fn sample_gain<R: Rng + ?Sized>(params: &ChannelParams, tx: Point, rx: Point, rng: &mut R) -> Result<f64> {
    let mut gain_db = -pathloss_db(tx.distance(&rx))?;
    if params.deterministic {
        return Ok(units::db_to_linear(gain_db));
    }
    let shadow: f64 = rng.sample(StandardNormal);
    gain_db += params.shadowing_std_db * shadow;
    let mut gain = units::db_to_linear(gain_db);
    if params.rayleigh_fading {
        let power: f64 = rng.sample(Exp1);
        gain *= power;
    }
    Ok(gain)
}

pub fn mean_gain(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Radio endpoints, used to key per-link shadowing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Endpoint {
    Vehicle(VehicleId),
    AvTransmitter(AvId),
    AvReceiver(AvId),
    BaseStation,
}

impl Endpoint {
    fn key(&self) -> u64 {
        match *self {
            Endpoint::Vehicle(v) => (1 << 32) | v.0 as u64,
            Endpoint::AvTransmitter(a) => (2 << 32) | a.0 as u64,
            Endpoint::AvReceiver(a) => (3 << 32) | a.0 as u64,
            Endpoint::BaseStation => 4 << 32,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic sub-seed for an independent random stream.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream_rng(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, parts))
}

/// Frame-level statistics of one directed link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkChannel {
    /// Pathloss times the link's shadowing factor; equals the mean gain.
    pub large_scale: f64,
    fading: Option<Gamma<f64>>,
}

impl LinkChannel {
    pub fn mean(&self) -> f64 {
        self.large_scale
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.fading {
            Some(g) => self.large_scale * g.sample(rng),
            None => self.large_scale,
        }
    }

    pub fn samples<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ChannelModel {
    params: ChannelParams,
    seed: u64,
}

impl ChannelModel {
    pub fn new(scenario: &Scenario) -> Self {
        ChannelModel {
            params: scenario.channel.clone(),
            seed: scenario.seed,
        }
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn noise(&self) -> f64 {
        self.params.noise_power
    }

    /// Shadowing factor of the directed link `tx -> rx`, fixed per seed.
    pub fn shadowing(&self, tx: Endpoint, rx: Endpoint) -> f64 {
        if self.params.deterministic || self.params.shadowing_std_db == 0.0 {
            return 1.0;
        }
        let mut rng = stream_rng(self.seed, &[0x5a4d, tx.key(), rx.key()]);
        let z: f64 = rng.sample(StandardNormal);
        units::db_to_linear(self.params.shadowing_std_db * z)
    }

    pub fn link(&self, tx: Endpoint, tx_pos: Point, rx: Endpoint, rx_pos: Point) -> Result<LinkChannel> {
        let large_scale = deterministic_gain(tx_pos.distance(&rx_pos))? * self.shadowing(tx, rx);
        let fading = if self.params.deterministic || !self.params.rayleigh_fading {
            None
        } else {
            let blocks = self.params.fading_blocks as f64;
            // mean of `blocks` unit exponentials
            Some(Gamma::new(blocks, 1.0 / blocks).expect("fading_blocks >= 1"))
        };
        Ok(LinkChannel { large_scale, fading })
    }
}
