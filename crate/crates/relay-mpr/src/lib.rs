//! Analytical model and slot-level Monte Carlo simulator for a
//! relay-assisted slotted random-access network with multi-packet reception.
//!
//! A set of saturated users transmits to a common destination under slotted
//! random access; a half-duplex relay with an infinite queue captures
//! packets that miss the destination and forwards them later. Reception is
//! governed by an SINR threshold under Rayleigh fading, so several packets
//! can be decoded in the same slot.
//!
//! The crate provides:
//!
//! * [`channel`] — link success probabilities from geometry and fading
//!   parameters, plus the closed symmetric forms;
//! * [`two_user`] — exact queue and throughput analysis of the two-user
//!   (non-symmetric) network;
//! * [`symmetric`] — closed forms for n symmetric users, μ(q), and the
//!   optimizers for q* and N*;
//! * [`dtmc`] — the lower-Hessenberg queue chain, its generating-function
//!   steady state, and an independent truncated numerical solver used as
//!   the oracle for every closed form;
//! * [`sim`] — a slot-synchronous simulator of the full protocol that
//!   estimates every analytical quantity from counters.

pub mod channel;
pub mod dtmc;
pub mod queue;
pub mod sim;
pub mod symmetric;
pub mod two_user;

use channel::NodeId;
use thiserror::Error as ThisError;

/// Crate-wide error type.
#[derive(Debug, ThisError)]
pub enum Error {
    #[error("{name} = {value} must be {requirement}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("unknown link {from}->{to}")]
    UnknownLink { from: NodeId, to: NodeId },
    #[error("node {node} has no transmit power")]
    UnknownTransmitter { node: NodeId },
    #[error("node {node} is not a receiver")]
    UnknownReceiver { node: NodeId },
    #[error("the destination cannot transmit")]
    DestinationTransmits,
    #[error("transmitter {node} is not in the transmitter set")]
    TransmitterNotInSet { node: NodeId },
    #[error("receiver {node} is in the transmitter set")]
    ReceiverInSet { node: NodeId },
    #[error("transmitter {node} appears twice in the transmitter set")]
    DuplicateTransmitter { node: NodeId },
    #[error("link {from}->{to} breaks user symmetry: {detail}")]
    NonSymmetricLink {
        from: NodeId,
        to: NodeId,
        detail: String,
    },
    #[error("at least one transmitting user is required on a user link")]
    NoTransmittingUser,
    #[error("the network needs at least one user")]
    NoUsers,
    #[error("model inconsistency: {detail}")]
    ModelInconsistency { detail: String },
    #[error("chain is unstable: busy arrival rate {arrival_rate} >= service rate {service_rate}")]
    UnstableChain {
        arrival_rate: f64,
        service_rate: f64,
    },
    #[error("truncation at {q_max} leaves tail mass {tail_mass:e}; retry with a larger q_max")]
    TruncationTooSmall { q_max: usize, tail_mass: f64 },
    #[error("queue is unstable at this q0; the smallest stabilizing value is q0min = {q0min}")]
    UnstableQueue { q0min: f64 },
    #[error("no stable configuration in the swept range")]
    NoStableScenario,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
