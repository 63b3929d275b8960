//! Closed-form queue and throughput analysis for the non-symmetric two-user
//! network: users 1 and 2, a half-duplex relay with an infinite queue, and a
//! common destination, all under slotted random access with SINR capture.
//!
//! Notation used below: `P_{i/T}^j` is the probability that receiver `j`
//! decodes transmitter `i` when the set `T` is active, evaluated by the
//! channel module. The relay transmits with probability `q0` when its queue
//! is busy; user `i` transmits with probability `q_i` in every slot
//! (saturated sources).

use crate::channel::{NetworkGeometry, NodeId};
use crate::dtmc::ArrivalProbabilities;
use crate::queue::{characterize, QueueCharacterization};
use crate::Error;

const RELAY: NodeId = NodeId::Relay;
const DEST: NodeId = NodeId::Destination;
const U1: NodeId = NodeId::User(1);
const U2: NodeId = NodeId::User(2);

/// Per-link conditional success probabilities, evaluated once per scenario.
#[derive(Debug, Clone, Copy)]
struct CondProbs {
    /// Relay→dest with the given users also active: [none, {1}, {2}, {1,2}].
    relay_dest: [f64; 4],
    /// User i→dest, user alone / both users (relay silent).
    user_dest_alone: [f64; 2],
    user_dest_both: [f64; 2],
    /// User i→dest with the relay also active.
    user_dest_alone_relay: [f64; 2],
    user_dest_both_relay: [f64; 2],
    /// User i→relay, user alone / both users.
    user_relay_alone: [f64; 2],
    user_relay_both: [f64; 2],
}

/// Two-user scenario: geometry plus the three transmit probabilities.
#[derive(Debug, Clone)]
pub struct TwoUserScenario {
    geometry: NetworkGeometry,
    q0: f64,
    q1: f64,
    q2: f64,
    probs: CondProbs,
}

/// Throughput of both users, with and without the relay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoUserThroughput {
    pub per_user: [f64; 2],
    pub aggregate: f64,
    pub no_relay_per_user: [f64; 2],
    pub no_relay_aggregate: f64,
    /// aggregate / no_relay_aggregate.
    pub relay_gain: f64,
}

impl TwoUserScenario {
    /// The geometry must contain exactly the links 1→0, 2→0, 1→d, 2→d, 0→d.
    pub fn new(geometry: NetworkGeometry, q0: f64, q1: f64, q2: f64) -> Result<Self, Error> {
        for (name, value) in [("q0", q0), ("q1", q1), ("q2", q2)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    requirement: "a probability in [0, 1]",
                });
            }
        }
        let required = [(U1, RELAY), (U2, RELAY), (U1, DEST), (U2, DEST), (RELAY, DEST)];
        for (from, to) in required {
            if !geometry.has_link(from, to) {
                return Err(Error::UnknownLink { from, to });
            }
        }
        if geometry.link_count() != required.len() {
            return Err(Error::ModelInconsistency {
                detail: "two-user geometry must contain exactly the links \
                         1->0, 2->0, 1->d, 2->d, 0->d"
                    .into(),
            });
        }
        let p = |from: NodeId, to: NodeId, set: &[NodeId]| geometry.success_probability(from, to, set);
        let probs = CondProbs {
            relay_dest: [
                p(RELAY, DEST, &[RELAY])?,
                p(RELAY, DEST, &[RELAY, U1])?,
                p(RELAY, DEST, &[RELAY, U2])?,
                p(RELAY, DEST, &[RELAY, U1, U2])?,
            ],
            user_dest_alone: [p(U1, DEST, &[U1])?, p(U2, DEST, &[U2])?],
            user_dest_both: [p(U1, DEST, &[U1, U2])?, p(U2, DEST, &[U1, U2])?],
            user_dest_alone_relay: [p(U1, DEST, &[RELAY, U1])?, p(U2, DEST, &[RELAY, U2])?],
            user_dest_both_relay: [
                p(U1, DEST, &[RELAY, U1, U2])?,
                p(U2, DEST, &[RELAY, U1, U2])?,
            ],
            user_relay_alone: [p(U1, RELAY, &[U1])?, p(U2, RELAY, &[U2])?],
            user_relay_both: [p(U1, RELAY, &[U1, U2])?, p(U2, RELAY, &[U1, U2])?],
        };
        Ok(Self { geometry, q0, q1, q2, probs })
    }

    pub fn geometry(&self) -> &NetworkGeometry {
        &self.geometry
    }

    pub fn q0(&self) -> f64 {
        self.q0
    }

    pub fn user_tx_probs(&self) -> [f64; 2] {
        [self.q1, self.q2]
    }

    /// Service probability of a busy relay:
    ///
    /// ```text
    /// μ = q0 [ (1-q1)(1-q2) P_{0/0}^d + q1 (1-q2) P_{0/0,1}^d
    ///        + q2 (1-q1) P_{0/0,2}^d + q1 q2 P_{0/0,1,2}^d ]
    /// ```
    pub fn service_rate(&self) -> f64 {
        self.q0 * self.service_factor()
    }

    /// The bracketed, q0-independent part of the service rate.
    fn service_factor(&self) -> f64 {
        let [q1, q2] = [self.q1, self.q2];
        let r = &self.probs.relay_dest;
        (1.0 - q1) * (1.0 - q2) * r[0]
            + q1 * (1.0 - q2) * r[1]
            + q2 * (1.0 - q1) * r[2]
            + q1 * q2 * r[3]
    }

    /// Probabilities of the relay accepting 1 or 2 packets in an
    /// empty-queue slot. A packet is accepted when its direct transmission
    /// fails and the relay decodes it:
    ///
    /// ```text
    /// p_1^0 = q1(1-q2)(1-P_{1/1}^d)P_{1/1}^0 + q2(1-q1)(1-P_{2/2}^d)P_{2/2}^0
    ///       + q1 q2 (1-P_{1/1,2}^d) P_{1/1,2}^0 [P_{2/1,2}^d + (1-P_{2/1,2}^d)(1-P_{2/1,2}^0)]
    ///       + q1 q2 (1-P_{2/1,2}^d) P_{2/1,2}^0 [P_{1/1,2}^d + (1-P_{1/1,2}^d)(1-P_{1/1,2}^0)]
    /// p_2^0 = q1 q2 (1-P_{1/1,2}^d)(1-P_{2/1,2}^d) P_{1/1,2}^0 P_{2/1,2}^0
    /// ```
    pub fn arrival_probabilities(&self) -> ArrivalProbabilities {
        let [q1, q2] = [self.q1, self.q2];
        let pd = &self.probs.user_dest_both;
        let pr = &self.probs.user_relay_both;
        let p1 = q1 * (1.0 - q2) * (1.0 - self.probs.user_dest_alone[0]) * self.probs.user_relay_alone[0]
            + q2 * (1.0 - q1) * (1.0 - self.probs.user_dest_alone[1]) * self.probs.user_relay_alone[1]
            + q1 * q2 * (1.0 - pd[0]) * pr[0] * (pd[1] + (1.0 - pd[1]) * (1.0 - pr[1]))
            + q1 * q2 * (1.0 - pd[1]) * pr[1] * (pd[0] + (1.0 - pd[0]) * (1.0 - pr[0]));
        let p2 = q1 * q2 * (1.0 - pd[0]) * (1.0 - pd[1]) * pr[0] * pr[1];
        ArrivalProbabilities::new(vec![p1, p2], self.q0)
            .expect("two-user arrival probabilities are valid by construction")
    }

    /// Queue characterization: P(Q=0), λ, q0min, mean queue length, and the
    /// stability flag. Unstable scenarios carry divergence markers.
    pub fn characterize_queue(&self) -> QueueCharacterization {
        characterize(
            &self.arrival_probabilities(),
            self.service_rate(),
            self.service_factor(),
        )
    }

    /// Per-user throughput with the relay. A user's packet counts whenever
    /// it is delivered directly or accepted into the (stable) relay queue:
    ///
    /// ```text
    /// μ_1 = q0 P(Q>0) q1 [(1-q2) P_{1/0,1}^d + q2 P_{1/0,1,2}^d]
    ///     + (1 - q0 P(Q>0)) q1 [(1-q2)(P_{1/1}^d + (1-P_{1/1}^d)P_{1/1}^0)
    ///                           + q2 (P_{1/1,2}^d + (1-P_{1/1,2}^d)P_{1/1,2}^0)]
    /// ```
    ///
    /// and symmetrically for user 2. Errors in the unstable regime, naming
    /// the stability threshold.
    pub fn throughput(&self) -> Result<TwoUserThroughput, Error> {
        let queue = self.characterize_queue();
        let Some(prob_busy) = queue.prob_empty.value().map(|s0| 1.0 - s0) else {
            return Err(Error::UnstableQueue { q0min: queue.q0min });
        };
        let relay_on = self.q0 * prob_busy;
        let [q1, q2] = [self.q1, self.q2];
        let other_q = [q2, q1];
        let mut per_user = [0.0; 2];
        for i in 0..2 {
            let alone = self.probs.user_dest_alone[i];
            let both = self.probs.user_dest_both[i];
            let relayed = relay_on
                * [q1, q2][i]
                * ((1.0 - other_q[i]) * self.probs.user_dest_alone_relay[i]
                    + other_q[i] * self.probs.user_dest_both_relay[i]);
            let direct = (1.0 - relay_on)
                * [q1, q2][i]
                * ((1.0 - other_q[i])
                    * (alone + (1.0 - alone) * self.probs.user_relay_alone[i])
                    + other_q[i] * (both + (1.0 - both) * self.probs.user_relay_both[i]));
            per_user[i] = relayed + direct;
        }
        let no_relay_per_user = self.no_relay_throughput();
        let aggregate = per_user[0] + per_user[1];
        let no_relay_aggregate = no_relay_per_user[0] + no_relay_per_user[1];
        Ok(TwoUserThroughput {
            per_user,
            aggregate,
            no_relay_per_user,
            no_relay_aggregate,
            relay_gain: aggregate / no_relay_aggregate,
        })
    }

    /// Baseline without the relay:
    /// `μ_1 = q1 (1-q2) P_{1/1}^d + q1 q2 P_{1/1,2}^d`, symmetrically for 2.
    pub fn no_relay_throughput(&self) -> [f64; 2] {
        let [q1, q2] = [self.q1, self.q2];
        [
            q1 * (1.0 - q2) * self.probs.user_dest_alone[0]
                + q1 * q2 * self.probs.user_dest_both[0],
            q2 * (1.0 - q1) * self.probs.user_dest_alone[1]
                + q1 * q2 * self.probs.user_dest_both[1],
        ]
    }
}
