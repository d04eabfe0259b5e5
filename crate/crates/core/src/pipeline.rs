//! End-to-end run of one scenario under one approach.
//!
//! framing -> graph -> link schedule -> subchannel matching -> pair powers
//! -> arc capacities (+ baseline mask) -> flow program.
//!
//! All randomness comes from streams derived from the scenario seed and the
//! role of the draw (training, realization, evaluation), so every stage is
//! reproducible on its own.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::channel::{deterministic_gain, mean_gain, stream_rng, ChannelModel, Endpoint, LinkChannel};
use crate::error::{AtStage, Error, Result, StageError};
use crate::flow::{self, baseline_mask, build_program, Approach, FlowParams, FlowSolution, FlowTask};
use crate::power::{arc_capacities, link_capacity, solve_pair, PairGains, PairPower, PowerCaps};
use crate::robust::{learn_uncertainty_set, outage_eval, quantile_gain, split_epsilon, UncertaintySet};
use crate::scenario::{contact_frames, AvId, Frame, Point, Scenario, VehicleId};
use crate::schedule::{build_conflict_graph, select_schedule, ConflictGraph, LinkSchedule};
use crate::subchannel::{assign, interference_matrix};
use crate::trrg::{build_trrg, ArcId, Capacity, Trrg};

const TAG_TRAIN: u64 = 1;
const TAG_REALIZE: u64 = 2;
const TAG_OUTAGE: u64 = 3;
const TAG_BS: u64 = 4;
const TAG_GAP: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Fresh channel draws per pair for the AV outage estimate.
    pub outage_trials: usize,
    /// Draws per pair for the averaged-rate diagnostic (0 disables it).
    pub gap_trials: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            outage_trials: 10_000,
            gap_trials: 1_000,
        }
    }
}

/// One V2V link sharing the subchannel of one AV in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub frame: usize,
    pub arc: ArcId,
    pub av: AvId,
    pub gains: PairGains,
    pub set: UncertaintySet,
    pub power: PairPower,
    /// The one channel realization used to gate non-robust capacity.
    pub realized_protected: bool,
    /// Fraction of fresh draws with the AV SINR below its threshold.
    pub outage: f64,
    /// Monte-Carlo mean of the instantaneous rate (bits/s), if computed.
    pub averaged_capacity: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub approach: Approach,
    pub frames: Vec<Frame>,
    pub trrg: Trrg,
    pub conflict_graphs: Vec<ConflictGraph>,
    pub schedule: LinkSchedule,
    pub pairs: Vec<PairRecord>,
    pub capacities: Vec<Capacity>,
    pub flow_tasks: Vec<FlowTask>,
    pub flow_params: FlowParams,
    pub solution: FlowSolution,
}

impl RunResult {
    pub fn throughput(&self) -> f64 {
        self.solution.throughput
    }

    pub fn objective(&self) -> f64 {
        self.solution.objective
    }

    /// Link transmit powers of every paired link plus the BS powers.
    pub fn consumed_power(&self) -> f64 {
        self.pairs.iter().map(|p| p.power.p_link).sum::<f64>() + self.solution.total_bs_power()
    }

    /// Mean AV outage over all pairs; 0 with no pairs.
    pub fn outage_rate(&self) -> f64 {
        if self.pairs.is_empty() {
            0.0
        } else {
            self.pairs.iter().map(|p| p.outage).sum::<f64>() / self.pairs.len() as f64
        }
    }

    /// Outage per AV, averaged over the frames in which it lends spectrum.
    pub fn outage_by_av(&self) -> BTreeMap<AvId, f64> {
        let mut acc: BTreeMap<AvId, (f64, usize)> = BTreeMap::new();
        for p in &self.pairs {
            let e = acc.entry(p.av).or_default();
            e.0 += p.outage;
            e.1 += 1;
        }
        acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
    }

    /// Mean relative gap between the averaged rate and the rate at mean gains.
    pub fn rate_approximation_gap(&self) -> Option<f64> {
        let gaps: Vec<f64> = self
            .pairs
            .iter()
            .filter(|p| p.power.capacity > 0.0)
            .filter_map(|p| p.averaged_capacity.map(|a| (p.power.capacity - a) / p.power.capacity))
            .collect();
        (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64)
    }
}

pub fn num_frames_for(scenario: &Scenario) -> Result<usize> {
    Ok(contact_frames(scenario, scenario.comm_range, scenario.horizon)?.len())
}

/// Per-frame maximum-CNR conflict-free schedule.
pub fn schedule_links(scenario: &Scenario, trrg: &Trrg) -> Result<(LinkSchedule, Vec<ConflictGraph>)> {
    let noise = scenario.channel.noise_power;
    let mut graphs = Vec::new();
    let mut frames = Vec::new();
    for f in trrg.frames() {
        let t = f.midpoint();
        let mut err = None;
        let graph = build_conflict_graph(trrg, f.index, |arc| {
            let (Some(a), Some(b)) = (trrg.vehicle_of(arc.tail), trrg.vehicle_of(arc.head)) else {
                return 0.0;
            };
            match position_pair(scenario, a, b, t).and_then(|(p, q)| deterministic_gain(p.distance(&q))) {
                Ok(g) => g / noise,
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            }
        })?;
        if let Some(e) = err {
            return Err(e);
        }
        frames.push(select_schedule(&graph, scenario.max_conflict_nodes)?);
        graphs.push(graph);
    }
    Ok((LinkSchedule::new(frames), graphs))
}

fn position_pair(s: &Scenario, a: VehicleId, b: VehicleId, t: f64) -> Result<(Point, Point)> {
    Ok((s.vehicle(a)?.position_at(t), s.vehicle(b)?.position_at(t)))
}

/// `(arc, av)` pairs per frame from the minimum-interference matching.
pub fn assign_subchannels(
    scenario: &Scenario,
    model: &ChannelModel,
    trrg: &Trrg,
    schedule: &LinkSchedule,
) -> Result<Vec<(usize, ArcId, AvId)>> {
    let mut out = Vec::new();
    if scenario.avs.is_empty() {
        return Ok(out);
    }
    for f in trrg.frames() {
        let active = schedule.active(f.index);
        if active.is_empty() {
            continue;
        }
        let t = f.midpoint();
        let mut receivers = Vec::with_capacity(active.len());
        for &id in active {
            let rx = trrg.vehicle_of(trrg.arc(id).head).ok_or(Error::MissingCapacity(id.0))?;
            receivers.push((Endpoint::Vehicle(rx), scenario.vehicle(rx)?.position_at(t)));
        }
        let phi = interference_matrix(model, &receivers, &scenario.avs)?;
        for (row, col) in assign(&phi).pairs {
            out.push((f.index, active[row], scenario.avs[col].id));
        }
    }
    Ok(out)
}

struct PairChannels {
    link: LinkChannel,
    cross: LinkChannel,
    av: LinkChannel,
    leak: LinkChannel,
    gamma: f64,
}

impl PairChannels {
    /// One draw of `(g_av, g_leak)`.
    fn raw<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        [self.av.sample(rng), self.leak.sample(rng)]
    }

    /// One draw of `(g_av / gamma, g_leak)`.
    fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        let [av, leak] = self.raw(rng);
        [av / self.gamma, leak]
    }
}

fn pair_channels(
    scenario: &Scenario,
    model: &ChannelModel,
    trrg: &Trrg,
    frame: &Frame,
    arc: ArcId,
    av: AvId,
) -> Result<PairChannels> {
    let a = trrg.arc(arc);
    let t = frame.midpoint();
    let tx = trrg.vehicle_of(a.tail).ok_or(Error::MissingCapacity(arc.0))?;
    let rx = trrg.vehicle_of(a.head).ok_or(Error::MissingCapacity(arc.0))?;
    let (tx_pos, rx_pos) = position_pair(scenario, tx, rx, t)?;
    let spec = scenario.av(av).ok_or(Error::invalid("avs", "unknown AV id"))?;
    let (vt, vr) = (Endpoint::Vehicle(tx), Endpoint::Vehicle(rx));
    let (at, ar) = (Endpoint::AvTransmitter(av), Endpoint::AvReceiver(av));
    Ok(PairChannels {
        link: model.link(vt, tx_pos, vr, rx_pos)?,
        cross: model.link(at, spec.transmitter, vr, rx_pos)?,
        av: model.link(at, spec.transmitter, ar, spec.receiver)?,
        leak: model.link(vt, tx_pos, ar, spec.receiver)?,
        gamma: spec.gamma_th,
    })
}

fn solve_pairs(
    scenario: &Scenario,
    model: &ChannelModel,
    trrg: &Trrg,
    assignment: &[(usize, ArcId, AvId)],
    approach: Approach,
    options: &RunOptions,
) -> Result<Vec<PairRecord>> {
    let c = &scenario.channel;
    let noise = c.noise_power;
    let caps = PowerCaps {
        link: c.p_max_v,
        av: c.p_max_av,
    };
    let mut out = Vec::with_capacity(assignment.len());
    for &(k, arc, av) in assignment {
        let frame = trrg.frame(k)?;
        let ch = pair_channels(scenario, model, trrg, frame, arc, av)?;
        // keyed by the vehicles, not the arc id, so draws survive graph changes
        let a = trrg.arc(arc);
        let end = |v| trrg.vehicle_of(v).map_or(0, |id| id.0 as u64);
        let key = [k as u64, (end(a.tail) << 32) | end(a.head), av.0 as u64];

        let mut rng = stream_rng(scenario.seed, &[TAG_TRAIN, key[0], key[1], key[2]]);
        let samples: Vec<[f64; 2]> = (0..c.sample_count).map(|_| ch.draw(&mut rng)).collect();
        let link_samples = ch.link.samples(c.sample_count, &mut rng);
        let cross_samples = ch.cross.samples(c.sample_count, &mut rng);
        let gains = PairGains {
            link: mean_gain(&link_samples)?,
            cross: mean_gain(&cross_samples)?,
        };
        let set = if approach.is_robust() {
            learn_uncertainty_set(&samples, c.epsilon)?
        } else {
            let mean = |i: usize| samples.iter().map(|s| s[i]).sum::<f64>() / samples.len() as f64;
            UncertaintySet::nominal([mean(0), mean(1)])
        };
        let power = solve_pair(gains, &set, noise, c.bandwidth_hz, caps, c.bisection_zeta);

        let mut rng = stream_rng(scenario.seed, &[TAG_REALIZE, key[0], key[1], key[2]]);
        let realized_protected = outage_eval(power.p_av, power.p_link, [ch.raw(&mut rng)], ch.gamma, noise) == 0.0;

        let mut rng = stream_rng(scenario.seed, &[TAG_OUTAGE, key[0], key[1], key[2]]);
        let trials = options.outage_trials.max(1);
        let draws = (0..trials).map(|_| ch.raw(&mut rng));
        let outage = outage_eval(power.p_av, power.p_link, draws, ch.gamma, noise);

        let averaged_capacity = (options.gap_trials > 0).then(|| {
            let mut rng = stream_rng(scenario.seed, &[TAG_GAP, key[0], key[1], key[2]]);
            let total: f64 = (0..options.gap_trials)
                .map(|_| {
                    let g = PairGains {
                        link: ch.link.sample(&mut rng),
                        cross: ch.cross.sample(&mut rng),
                    };
                    link_capacity(c.bandwidth_hz, g, power.p_link, power.p_av, noise)
                })
                .sum();
            total / options.gap_trials as f64
        });

        out.push(PairRecord {
            frame: k,
            arc,
            av,
            gains,
            set,
            power,
            realized_protected,
            outage,
            averaged_capacity,
        });
    }
    Ok(out)
}

/// Lower-tail BS gains of each task's two legs, evaluated in its last frame.
pub fn bs_gains(scenario: &Scenario, model: &ChannelModel, frames: &[Frame]) -> Result<Vec<FlowTask>> {
    let c = &scenario.channel;
    let (eps_up, eps_down) = split_epsilon(c.epsilon)?;
    let last = frames.len();
    let mut out = Vec::with_capacity(scenario.tasks.len());
    for task in &scenario.tasks {
        let k = task.delay_budget.min(last);
        let t = frames[k - 1].midpoint();
        let mut rng = stream_rng(scenario.seed, &[TAG_BS, task.id.0 as u64, k as u64]);
        let mut gain_up = f64::INFINITY;
        for v in scenario.vehicles.iter().filter(|v| v.role.is_fog()) {
            let link = model.link(
                Endpoint::Vehicle(v.id),
                v.position_at(t),
                Endpoint::BaseStation,
                scenario.bs,
            )?;
            let q = quantile_gain(&link.samples(c.sample_count, &mut rng), eps_up)?;
            gain_up = gain_up.min(q.gain);
        }
        if !gain_up.is_finite() {
            // no fog vehicle: nothing reaches the BS, any finite gain will do
            gain_up = 1.0;
        }
        let requester = scenario.vehicle(task.source)?;
        let link = model.link(
            Endpoint::BaseStation,
            scenario.bs,
            Endpoint::Vehicle(requester.id),
            requester.position_at(t),
        )?;
        let gain_down = quantile_gain(&link.samples(c.sample_count, &mut rng), eps_down)?.gain;
        out.push(FlowTask {
            task: task.clone(),
            gain_up,
            gain_down,
        });
    }
    Ok(out)
}

pub fn run(scenario: &Scenario, approach: Approach) -> core::result::Result<RunResult, StageError> {
    run_with(scenario, approach, &RunOptions::default())
}

pub fn run_with(
    scenario: &Scenario,
    approach: Approach,
    options: &RunOptions,
) -> core::result::Result<RunResult, StageError> {
    scenario.validate().at("scenario")?;
    let frames = contact_frames(scenario, scenario.comm_range, scenario.horizon).at("framing")?;
    let trrg = build_trrg(scenario, &frames, scenario.comm_range).at("graph")?;
    let model = ChannelModel::new(scenario);
    let (schedule, conflict_graphs) = schedule_links(scenario, &trrg).at("link scheduling")?;
    let assignment = assign_subchannels(scenario, &model, &trrg, &schedule).at("subchannel matching")?;
    let pairs = solve_pairs(scenario, &model, &trrg, &assignment, approach, options).at("power control")?;

    let powers: BTreeMap<ArcId, PairPower> = pairs.iter().map(|p| (p.arc, p.power)).collect();
    let mut capacities = arc_capacities(&trrg, &schedule, &powers);
    baseline_mask(&trrg, &mut capacities, approach);
    if !approach.is_robust() {
        for p in pairs.iter().filter(|p| !p.realized_protected) {
            capacities[p.arc.0] = Capacity::Bits(0.0);
        }
    }

    let flow_tasks = bs_gains(scenario, &model, &frames).at("base station gains")?;
    let c = &scenario.channel;
    let flow_params = FlowParams {
        num_frames: frames.len(),
        bandwidth_hz: c.bandwidth_hz,
        noise_power: c.noise_power,
        compression_eta: c.compression_eta,
        w_p: c.w_p,
        p_max_bs: c.p_max_bs,
    };
    let program = build_program(&trrg, &capacities, &flow_tasks, flow_params).at("flow program")?;
    let solution = flow::solve(&program).at("flow solve")?;
    Ok(RunResult {
        approach,
        frames,
        trrg,
        conflict_graphs,
        schedule,
        pairs,
        capacities,
        flow_tasks,
        flow_params,
        solution,
    })
}
