//! Slot-synchronous Monte Carlo simulation of the full protocol: saturated
//! users, a half-duplex relay with an infinite FIFO queue, SINR-threshold
//! multi-packet reception with per-slot Rayleigh fading, and instantaneous
//! error-free ACKs.
//!
//! Per slot: (1) each user transmits with its probability, the relay with
//! probability q0 if its queue is busy; (2) the destination runs one capture
//! test per active transmitter, the relay (when silent) one per active user;
//! (3) a user packet counts as delivered when the destination decodes it, is
//! enqueued at the relay when the destination failed but the relay decoded
//! it, and is dropped otherwise (the saturated source simply offers a fresh
//! packet next time); (4) the relay's head-of-line packet departs when the
//! destination decodes the relay.
//!
//! Every capture test draws its own fading realization of the slot, so
//! decode outcomes are conditionally independent given the active set with
//! exactly the closed-form marginal probabilities — the same product-form
//! reception model the analytical modules use. Statistics therefore estimate
//! every analytical quantity, including the queue-length distribution.
//!
//! Replications run in parallel, each on its own counter-indexed ChaCha
//! stream of the master seed, so results are bit-identical regardless of
//! scheduling.

use std::io::Write;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::channel::{NetworkGeometry, NodeId};
use crate::Error;

/// Scenario the simulator runs: any geometry with users `1..=n`, a relay and
/// a destination, plus the transmit probabilities.
#[derive(Debug, Clone)]
pub struct SimScenario {
    geometry: NetworkGeometry,
    user_tx_probs: Vec<f64>,
    relay_tx_prob: f64,
}

impl SimScenario {
    pub fn new(
        geometry: NetworkGeometry,
        user_tx_probs: Vec<f64>,
        relay_tx_prob: f64,
    ) -> Result<Self, Error> {
        if user_tx_probs.is_empty() {
            return Err(Error::NoUsers);
        }
        for &q in user_tx_probs.iter().chain([&relay_tx_prob]) {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::InvalidParameter {
                    name: "transmit probability",
                    value: q,
                    requirement: "a probability in [0, 1]",
                });
            }
        }
        let users = geometry.users();
        if users.len() != user_tx_probs.len() {
            return Err(Error::ModelInconsistency {
                detail: format!(
                    "{} transmit probabilities for {} users in the geometry",
                    user_tx_probs.len(),
                    users.len()
                ),
            });
        }
        // Every input the per-slot loop needs must resolve now.
        for &user in &users {
            geometry.mean_received_power(user, NodeId::Destination)?;
            geometry.mean_received_power(user, NodeId::Relay)?;
        }
        geometry.mean_received_power(NodeId::Relay, NodeId::Destination)?;
        geometry.sinr_threshold(NodeId::Relay)?;
        geometry.sinr_threshold(NodeId::Destination)?;
        Ok(Self { geometry, user_tx_probs, relay_tx_prob })
    }

    /// Uniform transmit probability across all users of the geometry.
    pub fn uniform(geometry: NetworkGeometry, q: f64, q0: f64) -> Result<Self, Error> {
        let n = geometry.users().len();
        Self::new(geometry, vec![q; n], q0)
    }

    pub fn geometry(&self) -> &NetworkGeometry {
        &self.geometry
    }

    pub fn user_count(&self) -> usize {
        self.user_tx_probs.len()
    }
}

/// Per-slot trace sink: binary records, replication 0 only.
///
/// Record layout (little endian, 32 bytes): `slot: u64`, `active: u64`,
/// `decoded: u64`, `queue_len: u64`. Bitmap bit 0 is the relay, bit `i`
/// user `i`. In `decoded`, bit 0 means the relay's head-of-line packet
/// departed, bit `i` that user `i` was delivered directly, and bit `32 + i`
/// that user `i`'s packet was enqueued at the relay.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceConfig {
    pub path: PathBuf,
    pub max_slots: u64,
}

/// Simulation run configuration.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub scenario: SimScenario,
    pub slots: u64,
    /// Slots dropped from every statistic; defaults to 10% of `slots`.
    pub warmup: u64,
    pub seed: u64,
    pub replications: u32,
    pub trace: Option<TraceConfig>,
}

impl SimConfig {
    pub fn new(scenario: SimScenario, slots: u64, seed: u64, replications: u32) -> Self {
        Self {
            scenario,
            slots,
            warmup: slots / 10,
            seed,
            replications,
            trace: None,
        }
    }

    fn validate(&self) -> Result<(), Error> {
        if self.slots == 0 || self.warmup >= self.slots {
            return Err(Error::InvalidParameter {
                name: "warmup",
                value: self.warmup as f64,
                requirement: "warmup < slots and slots > 0",
            });
        }
        if self.replications == 0 {
            return Err(Error::InvalidParameter {
                name: "replications",
                value: 0.0,
                requirement: "at least one replication",
            });
        }
        if self.trace.is_some() && self.scenario.user_count() > 30 {
            return Err(Error::InvalidParameter {
                name: "trace",
                value: self.scenario.user_count() as f64,
                requirement: "trace bitmaps support at most 30 users",
            });
        }
        Ok(())
    }
}

/// Raw counters of one replication, measured after warmup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicationCounters {
    pub stream: u64,
    pub counted_slots: u64,
    pub empty_slots: u64,
    pub busy_slots: u64,
    pub queue_len_sum: u64,
    pub arrivals_on_empty: u64,
    pub arrivals_on_busy: u64,
    pub departures: u64,
    /// Histogram of arrivals per empty-queue slot (index = batch size).
    pub arrival_hist_empty: Vec<u64>,
    pub attempts: Vec<u64>,
    pub delivered_direct: Vec<u64>,
    pub enqueued: Vec<u64>,
    pub relayed: Vec<u64>,
    pub dropped: Vec<u64>,
}

impl ReplicationCounters {
    /// delivered_direct + enqueued + dropped == attempts, per user, exactly.
    pub fn conserved(&self) -> bool {
        (0..self.attempts.len()).all(|u| {
            self.delivered_direct[u] + self.enqueued[u] + self.dropped[u] == self.attempts[u]
        })
    }
}

/// Mean and standard error over replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let std_err = if samples.len() < 2 {
            0.0
        } else {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        Self { mean, std_err }
    }

    /// |mean - reference| measured in standard errors.
    pub fn sigmas_from(&self, reference: f64) -> f64 {
        if self.std_err == 0.0 {
            if self.mean == reference {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - reference).abs() / self.std_err
        }
    }
}

/// Empirical counterparts of the analytical quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationStats {
    /// Fraction of slots with an empty queue (sampled at slot start).
    pub prob_empty: Estimate,
    pub mean_queue: Estimate,
    /// Mean arrivals per empty-queue slot.
    pub lambda0: Estimate,
    /// Mean arrivals per busy slot.
    pub lambda1: Estimate,
    /// Mean arrivals per slot.
    pub lambda: Estimate,
    /// Departures per busy slot.
    pub service_rate: Estimate,
    /// (delivered directly + accepted by the relay) per slot, per user.
    pub per_user_throughput: Vec<Estimate>,
    pub aggregate_throughput: Estimate,
    /// P(k arrivals | empty queue), index k-1.
    pub arrival_dist_empty: Vec<Estimate>,
    pub replications: Vec<ReplicationCounters>,
}

/// One capture test: a fresh fading realization for the signal and every
/// interferer. `mean_powers` are v·g products (mean received powers).
#[inline]
fn capture_test<R: Rng>(
    rng: &mut R,
    signal_mean_power: f64,
    noise: f64,
    threshold: f64,
    interferer_mean_powers: impl Iterator<Item = f64>,
) -> bool {
    let signal: f64 = rng.sample::<f64, _>(Exp1) * signal_mean_power;
    let mut interference = 0.0;
    for mean in interferer_mean_powers {
        interference += rng.sample::<f64, _>(Exp1) * mean;
    }
    signal >= threshold * (noise + interference)
}

/// Stochastic realization of one reception slot at `receiver`: every
/// transmitter is tested against its own independent fading draw of the
/// slot, and the subset that clears the SINR threshold is returned (multiple
/// simultaneous successes are the MPR capability).
pub fn success_draw<R: Rng>(
    geometry: &NetworkGeometry,
    transmitters: &[NodeId],
    receiver: NodeId,
    rng: &mut R,
) -> Result<Vec<NodeId>, Error> {
    if transmitters.contains(&receiver) {
        return Err(Error::ReceiverInSet { node: receiver });
    }
    let noise = geometry.noise_w(receiver)?;
    let threshold = geometry.sinr_threshold(receiver)?;
    let mean_powers: Vec<f64> = transmitters
        .iter()
        .map(|&t| geometry.mean_received_power(t, receiver))
        .collect::<Result<_, _>>()?;
    let mut decoded = Vec::new();
    for (idx, &node) in transmitters.iter().enumerate() {
        let interferers = mean_powers
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != idx)
            .map(|(_, &m)| m);
        if capture_test(rng, mean_powers[idx], noise, threshold, interferers) {
            decoded.push(node);
        }
    }
    Ok(decoded)
}

/// Run the simulation: `replications` independent runs of `slots` slots,
/// statistics collected after `warmup`, merged into mean ± standard error.
pub fn run(config: &SimConfig) -> Result<SimulationStats, Error> {
    config.validate()?;
    let n = config.scenario.user_count();

    // Mean received powers, resolved once.
    let users: Vec<NodeId> = config.scenario.geometry.users();
    let to_dest: Vec<f64> = users
        .iter()
        .map(|&u| config.scenario.geometry.mean_received_power(u, NodeId::Destination))
        .collect::<Result<_, _>>()?;
    let to_relay: Vec<f64> = users
        .iter()
        .map(|&u| config.scenario.geometry.mean_received_power(u, NodeId::Relay))
        .collect::<Result<_, _>>()?;
    let relay_to_dest = config
        .scenario
        .geometry
        .mean_received_power(NodeId::Relay, NodeId::Destination)?;
    let tables = Tables {
        q_users: &config.scenario.user_tx_probs,
        q0: config.scenario.relay_tx_prob,
        to_dest: &to_dest,
        to_relay: &to_relay,
        relay_to_dest,
        noise_dest: config.scenario.geometry.noise_w(NodeId::Destination)?,
        gamma_dest: config.scenario.geometry.sinr_threshold(NodeId::Destination)?,
        noise_relay: config.scenario.geometry.noise_w(NodeId::Relay)?,
        gamma_relay: config.scenario.geometry.sinr_threshold(NodeId::Relay)?,
    };

    let results: Vec<(ReplicationCounters, Vec<TraceRecord>)> = (0..config.replications)
        .into_par_iter()
        .map(|rep| {
            let trace_slots = match (&config.trace, rep) {
                (Some(t), 0) => t.max_slots,
                _ => 0,
            };
            run_replication(config, &tables, rep as u64, trace_slots)
        })
        .collect();

    if let Some(trace) = &config.trace {
        let mut file = std::fs::File::create(&trace.path)?;
        let mut buf = Vec::with_capacity(32 * results[0].1.len());
        for rec in &results[0].1 {
            buf.extend_from_slice(&rec.slot.to_le_bytes());
            buf.extend_from_slice(&rec.active.to_le_bytes());
            buf.extend_from_slice(&rec.decoded.to_le_bytes());
            buf.extend_from_slice(&rec.queue_len.to_le_bytes());
        }
        file.write_all(&buf)?;
    }

    let counters: Vec<ReplicationCounters> = results.into_iter().map(|(c, _)| c).collect();
    let per_rep = |f: &dyn Fn(&ReplicationCounters) -> f64| -> Vec<f64> {
        counters.iter().map(f).collect()
    };
    let ratio = |num: u64, den: u64| -> f64 { num as f64 / den as f64 };

    let per_user_throughput: Vec<Estimate> = (0..n)
        .map(|u| {
            Estimate::from_samples(&per_rep(&|c| {
                ratio(c.delivered_direct[u] + c.enqueued[u], c.counted_slots)
            }))
        })
        .collect();
    let arrival_dist_empty: Vec<Estimate> = (1..=n)
        .map(|k| {
            Estimate::from_samples(&per_rep(&|c| {
                ratio(*c.arrival_hist_empty.get(k).unwrap_or(&0), c.empty_slots)
            }))
        })
        .collect();

    Ok(SimulationStats {
        prob_empty: Estimate::from_samples(&per_rep(&|c| ratio(c.empty_slots, c.counted_slots))),
        mean_queue: Estimate::from_samples(&per_rep(&|c| ratio(c.queue_len_sum, c.counted_slots))),
        lambda0: Estimate::from_samples(&per_rep(&|c| ratio(c.arrivals_on_empty, c.empty_slots))),
        lambda1: Estimate::from_samples(&per_rep(&|c| ratio(c.arrivals_on_busy, c.busy_slots))),
        lambda: Estimate::from_samples(&per_rep(&|c| {
            ratio(c.arrivals_on_empty + c.arrivals_on_busy, c.counted_slots)
        })),
        service_rate: Estimate::from_samples(&per_rep(&|c| ratio(c.departures, c.busy_slots))),
        aggregate_throughput: Estimate::from_samples(&per_rep(&|c| {
            let delivered: u64 = (0..n).map(|u| c.delivered_direct[u] + c.enqueued[u]).sum();
            ratio(delivered, c.counted_slots)
        })),
        per_user_throughput,
        arrival_dist_empty,
        replications: counters,
    })
}

struct Tables<'a> {
    q_users: &'a [f64],
    q0: f64,
    to_dest: &'a [f64],
    to_relay: &'a [f64],
    relay_to_dest: f64,
    noise_dest: f64,
    gamma_dest: f64,
    noise_relay: f64,
    gamma_relay: f64,
}

struct TraceRecord {
    slot: u64,
    active: u64,
    decoded: u64,
    queue_len: u64,
}

fn run_replication(
    config: &SimConfig,
    t: &Tables<'_>,
    stream: u64,
    trace_slots: u64,
) -> (ReplicationCounters, Vec<TraceRecord>) {
    let n = t.q_users.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);

    let mut c = ReplicationCounters {
        stream,
        counted_slots: 0,
        empty_slots: 0,
        busy_slots: 0,
        queue_len_sum: 0,
        arrivals_on_empty: 0,
        arrivals_on_busy: 0,
        departures: 0,
        arrival_hist_empty: vec![0; n + 1],
        attempts: vec![0; n],
        delivered_direct: vec![0; n],
        enqueued: vec![0; n],
        relayed: vec![0; n],
        dropped: vec![0; n],
    };
    let mut trace = Vec::with_capacity(trace_slots.min(1 << 20) as usize);
    // FIFO queue of originating user indices.
    let mut queue: std::collections::VecDeque<u32> = std::collections::VecDeque::new();
    let mut active: Vec<usize> = Vec::with_capacity(n);
    let mut dest_ok: Vec<bool> = vec![false; n];

    for slot in 0..config.slots {
        let measured = slot >= config.warmup;
        let queue_len = queue.len() as u64;
        if measured {
            c.counted_slots += 1;
            c.queue_len_sum += queue_len;
            if queue_len == 0 {
                c.empty_slots += 1;
            } else {
                c.busy_slots += 1;
            }
        }

        active.clear();
        for (u, &q) in t.q_users.iter().enumerate() {
            if rng.random::<f64>() < q {
                active.push(u);
            }
        }
        let relay_tx = queue_len > 0 && rng.random::<f64>() < t.q0;

        // Destination capture tests, one per active transmitter. The relay's
        // interference is included whenever it transmits.
        let mut arrivals: u64 = 0;
        let mut trace_active: u64 = 0;
        let mut trace_decoded: u64 = 0;
        for (idx, &u) in active.iter().enumerate() {
            let others = active
                .iter()
                .enumerate()
                .filter(move |&(j, _)| j != idx)
                .map(|(_, &v)| t.to_dest[v])
                .chain(relay_tx.then_some(t.relay_to_dest));
            dest_ok[u] = capture_test(&mut rng, t.to_dest[u], t.noise_dest, t.gamma_dest, others);
        }
        for (idx, &u) in active.iter().enumerate() {
            if measured {
                c.attempts[u] += 1;
            }
            if dest_ok[u] {
                if measured {
                    c.delivered_direct[u] += 1;
                }
                trace_decoded |= 1 << (u + 1);
            } else if !relay_tx && {
                let others = active
                    .iter()
                    .enumerate()
                    .filter(move |&(j, _)| j != idx)
                    .map(|(_, &v)| t.to_relay[v]);
                capture_test(&mut rng, t.to_relay[u], t.noise_relay, t.gamma_relay, others)
            } {
                queue.push_back(u as u32);
                arrivals += 1;
                if measured {
                    c.enqueued[u] += 1;
                }
                trace_decoded |= 1 << (32 + u + 1);
            } else if measured {
                c.dropped[u] += 1;
            }
        }
        if relay_tx {
            let decoded = capture_test(
                &mut rng,
                t.relay_to_dest,
                t.noise_dest,
                t.gamma_dest,
                active.iter().map(|&v| t.to_dest[v]),
            );
            if decoded {
                let origin = queue.pop_front().expect("relay transmits only when busy");
                if measured {
                    c.departures += 1;
                    c.relayed[origin as usize] += 1;
                }
                trace_decoded |= 1;
            }
        }

        if measured {
            if queue_len == 0 {
                c.arrivals_on_empty += arrivals;
                c.arrival_hist_empty[arrivals as usize] += 1;
            } else {
                c.arrivals_on_busy += arrivals;
            }
        }
        if slot < trace_slots {
            for &u in &active {
                trace_active |= 1 << (u + 1);
            }
            if relay_tx {
                trace_active |= 1;
            }
            trace.push(TraceRecord {
                slot,
                active: trace_active,
                decoded: trace_decoded,
                queue_len,
            });
        }
    }
    (c, trace)
}
