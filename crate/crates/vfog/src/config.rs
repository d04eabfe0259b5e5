//! TOML scenario files.
//!
//! ```toml
//! seed = 7
//! comm_range_m = 30.0          # optional, default 30 m
//! horizon_s = 10.0
//! max_conflict_nodes = 32      # optional
//!
//! [bs]
//! x = 100.0
//! y = 25.0
//!
//! [channel]                    # every key optional, defaults shown in README
//! bandwidth_hz = 10e6
//! noise_density_dbm_hz = -174.0
//! p_max_v_w = 1.0
//!
//! [[vehicles]]
//! id = 1
//! role = "perceptual"          # perceptual | relay | fog
//! x = 2.0
//! y = 34.0
//! velocity_kmh = 72.0          # signed along x
//! cache_capacity_bits = 5e8    # relay only
//! compute_capacity_bits = 5e8  # fog only
//!
//! [[avs]]
//! id = 1
//! x = 20.0
//! y = 45.0
//! receiver_x = 100.0           # optional pair, defaults to the BS position
//! receiver_y = 25.0
//! gamma_th = 10.0              # optional, defaults to channel.gamma_th
//!
//! [[tasks]]
//! id = 1
//! source = 1
//! delay_frames = 18
//! ```

use std::path::Path;

use serde::Deserialize;
use vfog_core::scenario::DEFAULT_MAX_CONFLICT_NODES;
use vfog_core::{units, AvId, AvSpec, ChannelParams, Point, Role, Scenario, Task, TaskId, VehicleId, VehicleSpec};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid {field}: {message}")]
    Semantic { field: String, message: String },
}

impl ConfigError {
    fn semantic(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Semantic {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    seed: u64,
    comm_range_m: Option<f64>,
    horizon_s: f64,
    max_conflict_nodes: Option<usize>,
    bs: BsEntry,
    #[serde(default)]
    channel: ChannelEntry,
    #[serde(default)]
    vehicles: Vec<VehicleEntry>,
    #[serde(default)]
    avs: Vec<AvEntry>,
    #[serde(default)]
    tasks: Vec<TaskEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BsEntry {
    x: f64,
    y: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelEntry {
    bandwidth_hz: Option<f64>,
    noise_density_dbm_hz: Option<f64>,
    shadowing_std_db: Option<f64>,
    rayleigh_fading: Option<bool>,
    fading_blocks: Option<u32>,
    epsilon: Option<f64>,
    sample_count: Option<usize>,
    compression_eta: Option<f64>,
    gamma_th: Option<f64>,
    p_max_v_w: Option<f64>,
    p_max_av_w: Option<f64>,
    p_max_bs_w: Option<f64>,
    w_p: Option<f64>,
    bisection_zeta: Option<f64>,
    deterministic: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VehicleEntry {
    id: u32,
    role: String,
    x: f64,
    y: f64,
    velocity_kmh: f64,
    cache_capacity_bits: Option<f64>,
    compute_capacity_bits: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AvEntry {
    id: u32,
    x: f64,
    y: f64,
    receiver_x: Option<f64>,
    receiver_y: Option<f64>,
    gamma_th: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskEntry {
    id: u32,
    source: u32,
    delay_frames: usize,
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ConfigError> {
    let file: File = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        ConfigError::Parse {
            line,
            message: e.message().to_string(),
        }
    })?;
    let scenario = convert(file)?;
    scenario.validate().map_err(|e| match e {
        vfog_core::Error::InvalidParameter { field, reason } => ConfigError::semantic(field, reason),
        vfog_core::Error::NoVehicles => ConfigError::semantic("vehicles", "no vehicles"),
        other => ConfigError::semantic("scenario", other.to_string()),
    })?;
    Ok(scenario)
}

fn convert(file: File) -> Result<Scenario, ConfigError> {
    let reference = ChannelParams::reference();
    let c = file.channel;
    let bandwidth = c.bandwidth_hz.unwrap_or(reference.bandwidth_hz);
    let noise = match c.noise_density_dbm_hz {
        Some(d) => units::noise_power(d, bandwidth),
        None => units::noise_power(-174.0, bandwidth),
    };
    let channel = ChannelParams {
        bandwidth_hz: bandwidth,
        noise_power: noise,
        shadowing_std_db: c.shadowing_std_db.unwrap_or(reference.shadowing_std_db),
        rayleigh_fading: c.rayleigh_fading.unwrap_or(reference.rayleigh_fading),
        fading_blocks: c.fading_blocks.unwrap_or(reference.fading_blocks),
        epsilon: c.epsilon.unwrap_or(reference.epsilon),
        sample_count: c.sample_count.unwrap_or(reference.sample_count),
        compression_eta: c.compression_eta.unwrap_or(reference.compression_eta),
        gamma_th: c.gamma_th.unwrap_or(reference.gamma_th),
        p_max_v: c.p_max_v_w.unwrap_or(reference.p_max_v),
        p_max_av: c.p_max_av_w.unwrap_or(reference.p_max_av),
        p_max_bs: c.p_max_bs_w.unwrap_or(reference.p_max_bs),
        w_p: c.w_p.unwrap_or(reference.w_p),
        bisection_zeta: c.bisection_zeta.unwrap_or(reference.bisection_zeta),
        deterministic: c.deterministic.unwrap_or(reference.deterministic),
    };

    let mut vehicles = Vec::with_capacity(file.vehicles.len());
    for v in file.vehicles {
        let field = |name: &str| format!("vehicles[{}].{name}", v.id);
        let role = match v.role.as_str() {
            "perceptual" => Role::Perceptual,
            "relay" => Role::Relay {
                cache_capacity: v
                    .cache_capacity_bits
                    .ok_or_else(|| ConfigError::semantic(field("cache_capacity_bits"), "required for a relay"))?,
            },
            "fog" => Role::Fog {
                compute_capacity: v.compute_capacity_bits.ok_or_else(|| {
                    ConfigError::semantic(field("compute_capacity_bits"), "required for a fog vehicle")
                })?,
            },
            other => {
                return Err(ConfigError::semantic(
                    field("role"),
                    format!("unknown role {other:?}, expected perceptual, relay or fog"),
                ))
            }
        };
        if v.cache_capacity_bits.is_some() && !role.is_relay() {
            return Err(ConfigError::semantic(
                field("cache_capacity_bits"),
                "only relays have a cache",
            ));
        }
        if v.compute_capacity_bits.is_some() && !role.is_fog() {
            return Err(ConfigError::semantic(
                field("compute_capacity_bits"),
                "only fog vehicles compute",
            ));
        }
        vehicles.push(VehicleSpec {
            id: VehicleId(v.id),
            role,
            initial_position: Point::new(v.x, v.y),
            velocity: units::kmh_to_mps(v.velocity_kmh),
        });
    }

    let bs = Point::new(file.bs.x, file.bs.y);
    let mut avs = Vec::with_capacity(file.avs.len());
    for a in file.avs {
        let receiver = match (a.receiver_x, a.receiver_y) {
            (Some(x), Some(y)) => Point::new(x, y),
            (None, None) => bs,
            _ => {
                return Err(ConfigError::semantic(
                    format!("avs[{}].receiver_x", a.id),
                    "receiver_x and receiver_y must be given together",
                ))
            }
        };
        avs.push(AvSpec {
            id: AvId(a.id),
            transmitter: Point::new(a.x, a.y),
            receiver,
            gamma_th: a.gamma_th.unwrap_or(channel.gamma_th),
        });
    }
    let tasks = file
        .tasks
        .into_iter()
        .map(|t| Task {
            id: TaskId(t.id),
            source: VehicleId(t.source),
            delay_budget: t.delay_frames,
        })
        .collect();

    Ok(Scenario {
        vehicles,
        avs,
        bs,
        tasks,
        channel,
        comm_range: file.comm_range_m.unwrap_or(vfog_core::scenario::DEFAULT_COMM_RANGE_M),
        horizon: file.horizon_s,
        max_conflict_nodes: file.max_conflict_nodes.unwrap_or(DEFAULT_MAX_CONFLICT_NODES),
        seed: file.seed,
    })
}

/// The reference scenario shipped with the crate.
pub const REFERENCE_TOML: &str = include_str!("../scenarios/reference.toml");

pub fn reference_scenario() -> Scenario {
    parse_scenario(REFERENCE_TOML).expect("bundled reference scenario is valid")
}
