//! Physical-layer capture model: per-slot link success probabilities under
//! Rayleigh fading with SINR-threshold reception.
//!
//! A packet sent by node `i` is decoded by receiver `j` iff
//!
//! ```text
//! SINR(i,j) = A(i,j) g(i,j) / (η_j + Σ_{k≠i} A(k,j) g(k,j)) ≥ γ_j
//! ```
//!
//! where `A(i,j)` is exponentially distributed with mean `v(i,j)` (unit mean
//! by default) and `g(i,j) = P_tx(i) · r(i,j)^-α` is the deterministic
//! received-power factor. Averaging over the fading gives the closed form
//!
//! ```text
//! P(i decoded at j | transmitter set T)
//!   = exp(-γ_j η_j / (v(i,j) g(i,j)))
//!     · Π_{k ∈ T\{i}} (1 + γ_j v(k,j) g(k,j) / (v(i,j) g(i,j)))^-1
//! ```
//!
//! which [`NetworkGeometry::success_probability`] evaluates (in log space, so
//! extreme geometries underflow to 0 instead of producing NaN).

use std::collections::BTreeMap;
use std::fmt;

use crate::Error;

/// Relative tolerance used when checking that user links are identical.
const SYMMETRY_REL_TOL: f64 = 1e-12;

/// A node of the network. `Relay` carries index 0, users are indexed from 1,
/// and the destination is a pure receiver (it never transmits).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeId {
    Relay,
    User(u32),
    Destination,
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Relay => write!(f, "relay"),
            NodeId::User(i) => write!(f, "u{i}"),
            NodeId::Destination => write!(f, "d"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Link {
    distance_m: f64,
    fading_mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Receiver {
    noise_w: f64,
    sinr_threshold: f64,
}

/// Static description of the network: directed links with distances and
/// fading means, per-node transmit powers, per-receiver noise and SINR
/// thresholds, and a global path-loss exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGeometry {
    path_loss_exponent: f64,
    tx_power_w: BTreeMap<NodeId, f64>,
    links: BTreeMap<(NodeId, NodeId), Link>,
    receivers: BTreeMap<NodeId, Receiver>,
}

impl NetworkGeometry {
    /// Empty geometry with the given path-loss exponent. Values outside the
    /// typical [2, 4] range are accepted; [`Self::warnings`] flags them.
    pub fn new(path_loss_exponent: f64) -> Result<Self, Error> {
        if !path_loss_exponent.is_finite() || path_loss_exponent < 0.0 {
            return Err(Error::InvalidParameter {
                name: "path_loss_exponent",
                value: path_loss_exponent,
                requirement: "finite and non-negative",
            });
        }
        Ok(Self {
            path_loss_exponent,
            tx_power_w: BTreeMap::new(),
            links: BTreeMap::new(),
            receivers: BTreeMap::new(),
        })
    }

    pub fn add_transmitter(&mut self, node: NodeId, tx_power_w: f64) -> Result<(), Error> {
        if node == NodeId::Destination {
            return Err(Error::DestinationTransmits);
        }
        if !(tx_power_w.is_finite() && tx_power_w > 0.0) {
            return Err(Error::InvalidParameter {
                name: "tx_power_w",
                value: tx_power_w,
                requirement: "finite and strictly positive",
            });
        }
        self.tx_power_w.insert(node, tx_power_w);
        Ok(())
    }

    pub fn add_receiver(
        &mut self,
        node: NodeId,
        noise_w: f64,
        sinr_threshold: f64,
    ) -> Result<(), Error> {
        if !(noise_w.is_finite() && noise_w > 0.0) {
            return Err(Error::InvalidParameter {
                name: "noise_w",
                value: noise_w,
                requirement: "finite and strictly positive",
            });
        }
        if !(sinr_threshold.is_finite() && sinr_threshold >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "sinr_threshold",
                value: sinr_threshold,
                requirement: "finite and non-negative",
            });
        }
        self.receivers.insert(node, Receiver { noise_w, sinr_threshold });
        Ok(())
    }

    pub fn add_link(
        &mut self,
        from: NodeId,
        to: NodeId,
        distance_m: f64,
        fading_mean: f64,
    ) -> Result<(), Error> {
        if from == NodeId::Destination {
            return Err(Error::DestinationTransmits);
        }
        if !(distance_m.is_finite() && distance_m > 0.0) {
            return Err(Error::InvalidParameter {
                name: "distance_m",
                value: distance_m,
                requirement: "finite and strictly positive",
            });
        }
        if !(fading_mean.is_finite() && fading_mean > 0.0) {
            return Err(Error::InvalidParameter {
                name: "fading_mean",
                value: fading_mean,
                requirement: "finite and strictly positive",
            });
        }
        self.links.insert((from, to), Link { distance_m, fading_mean });
        Ok(())
    }

    pub fn path_loss_exponent(&self) -> f64 {
        self.path_loss_exponent
    }

    /// User nodes present in the geometry, in ascending index order.
    pub fn users(&self) -> Vec<NodeId> {
        self.tx_power_w
            .keys()
            .copied()
            .filter(|n| matches!(n, NodeId::User(_)))
            .collect()
    }

    pub fn has_link(&self, from: NodeId, to: NodeId) -> bool {
        self.links.contains_key(&(from, to))
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn distance_m(&self, from: NodeId, to: NodeId) -> Result<f64, Error> {
        Ok(self.link(from, to)?.distance_m)
    }

    pub fn fading_mean(&self, from: NodeId, to: NodeId) -> Result<f64, Error> {
        Ok(self.link(from, to)?.fading_mean)
    }

    pub fn tx_power_w(&self, node: NodeId) -> Result<f64, Error> {
        self.tx_power_w
            .get(&node)
            .copied()
            .ok_or(Error::UnknownTransmitter { node })
    }

    pub fn noise_w(&self, receiver: NodeId) -> Result<f64, Error> {
        Ok(self.receiver(receiver)?.noise_w)
    }

    pub fn sinr_threshold(&self, receiver: NodeId) -> Result<f64, Error> {
        Ok(self.receiver(receiver)?.sinr_threshold)
    }

    fn link(&self, from: NodeId, to: NodeId) -> Result<&Link, Error> {
        self.links
            .get(&(from, to))
            .ok_or(Error::UnknownLink { from, to })
    }

    fn receiver(&self, node: NodeId) -> Result<&Receiver, Error> {
        self.receivers
            .get(&node)
            .ok_or(Error::UnknownReceiver { node })
    }

    /// Soft diagnostics. Non-fatal oddities such as a path-loss exponent
    /// outside the typical [2, 4] range.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(2.0..=4.0).contains(&self.path_loss_exponent) {
            out.push(format!(
                "path-loss exponent {} is outside the typical range [2, 4]",
                self.path_loss_exponent
            ));
        }
        out
    }

    /// Deterministic received-power factor `g(i,j) = P_tx(i) · r(i,j)^-α`.
    pub fn received_power_factor(&self, from: NodeId, to: NodeId) -> Result<f64, Error> {
        let power = self.tx_power_w(from)?;
        let link = self.link(from, to)?;
        Ok(power * link.distance_m.powf(-self.path_loss_exponent))
    }

    /// Mean received power `v(i,j) · g(i,j)`; the expected value of the
    /// faded signal power.
    pub fn mean_received_power(&self, from: NodeId, to: NodeId) -> Result<f64, Error> {
        Ok(self.fading_mean(from, to)? * self.received_power_factor(from, to)?)
    }

    /// Probability that receiver `to` decodes the packet from `from` when
    /// the nodes in `transmitters` are all active in the slot.
    ///
    /// `from` must be in the transmitter set and `to` must not be. The set
    /// must not contain duplicates. Evaluated in log space and clamped to
    /// [0, 1].
    pub fn success_probability(
        &self,
        from: NodeId,
        to: NodeId,
        transmitters: &[NodeId],
    ) -> Result<f64, Error> {
        if !transmitters.contains(&from) {
            return Err(Error::TransmitterNotInSet { node: from });
        }
        if transmitters.contains(&to) {
            return Err(Error::ReceiverInSet { node: to });
        }
        for (idx, node) in transmitters.iter().enumerate() {
            if transmitters[..idx].contains(node) {
                return Err(Error::DuplicateTransmitter { node: *node });
            }
        }
        let rcv = self.receiver(to)?;
        let signal = self.mean_received_power(from, to)?;
        let mut log_p = -rcv.sinr_threshold * rcv.noise_w / signal;
        for &k in transmitters {
            if k == from {
                continue;
            }
            let interference = self.mean_received_power(k, to)?;
            log_p -= (rcv.sinr_threshold * interference / signal).ln_1p();
        }
        Ok(log_p.exp().clamp(0.0, 1.0))
    }

    /// Extract the closed-form symmetric link parameters, verifying that all
    /// user links really are identical (within 1e-12 relative).
    pub fn symmetric_link_params(&self) -> Result<SymmetricLinkParams, Error> {
        let users = self.users();
        let first = *users.first().ok_or(Error::NoUsers)?;
        for &to in &[NodeId::Relay, NodeId::Destination] {
            let reference = self.link(first, to)?;
            let ref_power = self.tx_power_w(first)?;
            for &user in &users[1..] {
                let link = self.link(user, to)?;
                let power = self.tx_power_w(user)?;
                for (what, a, b) in [
                    ("distance", reference.distance_m, link.distance_m),
                    ("fading mean", reference.fading_mean, link.fading_mean),
                    ("tx power", ref_power, power),
                ] {
                    if (a - b).abs() > SYMMETRY_REL_TOL * a.abs().max(b.abs()) {
                        return Err(Error::NonSymmetricLink {
                            from: user,
                            to,
                            detail: format!("{what} {b} differs from {first}'s {a}"),
                        });
                    }
                }
            }
        }
        let p_user_relay = self.success_probability(first, NodeId::Relay, &[first])?;
        let p_user_dest = self.success_probability(first, NodeId::Destination, &[first])?;
        let p_relay_dest =
            self.success_probability(NodeId::Relay, NodeId::Destination, &[NodeId::Relay])?;
        let beta = self.mean_received_power(NodeId::Relay, NodeId::Destination)?
            / self.mean_received_power(first, NodeId::Destination)?;
        Ok(SymmetricLinkParams {
            p_user_relay,
            p_user_dest,
            p_relay_dest,
            gamma_relay: self.sinr_threshold(NodeId::Relay)?,
            gamma_dest: self.sinr_threshold(NodeId::Destination)?,
            beta,
            relay_interference: RelayInterferenceConvention::default(),
        })
    }
}

/// Configuration for a symmetric star network: `n` identical users, one
/// relay, one destination. Defaults are the reference deployment used
/// throughout the test suite: users 130 m from the destination and 60 m from
/// the relay, relay 80 m from the destination, path loss 4, noise 1e-11 W,
/// user power 1 mW, relay power 10 mW, unit-mean fading.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricGeometry {
    pub n_users: usize,
    pub gamma_relay: f64,
    pub gamma_dest: f64,
    pub path_loss_exponent: f64,
    pub noise_w: f64,
    pub tx_power_user_w: f64,
    pub tx_power_relay_w: f64,
    pub r_user_dest_m: f64,
    pub r_user_relay_m: f64,
    pub r_relay_dest_m: f64,
    pub fading_mean: f64,
}

impl SymmetricGeometry {
    /// The reference deployment with a common SINR threshold γ at both
    /// receivers.
    pub fn baseline(n_users: usize, gamma: f64) -> Self {
        Self {
            n_users,
            gamma_relay: gamma,
            gamma_dest: gamma,
            path_loss_exponent: 4.0,
            noise_w: 1e-11,
            tx_power_user_w: 1e-3,
            tx_power_relay_w: 1e-2,
            r_user_dest_m: 130.0,
            r_user_relay_m: 60.0,
            r_relay_dest_m: 80.0,
            fading_mean: 1.0,
        }
    }

    pub fn build(&self) -> Result<NetworkGeometry, Error> {
        if self.n_users == 0 {
            return Err(Error::NoUsers);
        }
        let mut geom = NetworkGeometry::new(self.path_loss_exponent)?;
        geom.add_receiver(NodeId::Relay, self.noise_w, self.gamma_relay)?;
        geom.add_receiver(NodeId::Destination, self.noise_w, self.gamma_dest)?;
        geom.add_transmitter(NodeId::Relay, self.tx_power_relay_w)?;
        geom.add_link(
            NodeId::Relay,
            NodeId::Destination,
            self.r_relay_dest_m,
            self.fading_mean,
        )?;
        for i in 1..=self.n_users as u32 {
            let user = NodeId::User(i);
            geom.add_transmitter(user, self.tx_power_user_w)?;
            geom.add_link(user, NodeId::Relay, self.r_user_relay_m, self.fading_mean)?;
            geom.add_link(user, NodeId::Destination, self.r_user_dest_m, self.fading_mean)?;
        }
        Ok(geom)
    }
}

/// Which SINR threshold the relay-interference attenuation factor of
/// `P_{d,i,j}` uses. Interference from the relay is seen at the destination,
/// so the factor that the general success-probability formula produces is
/// `(1 + β γ_d)^-1`; the `GammaRelay` variant substitutes `γ_0` instead (a
/// published alternative). The two coincide whenever `γ_0 = γ_d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RelayInterferenceConvention {
    #[default]
    GammaDest,
    GammaRelay,
}

/// Base (single-transmitter) success probabilities of the symmetric network
/// and the factors needed to attenuate them for every interference pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricLinkParams {
    /// P_0: lone user decoded by the relay.
    pub p_user_relay: f64,
    /// P_d: lone user decoded by the destination.
    pub p_user_dest: f64,
    /// P_0d: lone relay decoded by the destination.
    pub p_relay_dest: f64,
    /// γ_0: SINR threshold at the relay.
    pub gamma_relay: f64,
    /// γ_d: SINR threshold at the destination.
    pub gamma_dest: f64,
    /// β: relay-to-user ratio of mean received power at the destination.
    pub beta: f64,
    pub relay_interference: RelayInterferenceConvention,
}

/// Link classes of the symmetric network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    UserToRelay,
    UserToDest,
    RelayToDest,
}

impl SymmetricLinkParams {
    pub fn new(
        p_user_relay: f64,
        p_user_dest: f64,
        p_relay_dest: f64,
        gamma_relay: f64,
        gamma_dest: f64,
        beta: f64,
    ) -> Result<Self, Error> {
        for (name, value) in [
            ("p_user_relay", p_user_relay),
            ("p_user_dest", p_user_dest),
            ("p_relay_dest", p_relay_dest),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    requirement: "a probability in [0, 1]",
                });
            }
        }
        for (name, value) in [("gamma_relay", gamma_relay), ("gamma_dest", gamma_dest)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    requirement: "finite and non-negative",
                });
            }
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "beta",
                value: beta,
                requirement: "finite and strictly positive",
            });
        }
        Ok(Self {
            p_user_relay,
            p_user_dest,
            p_relay_dest,
            gamma_relay,
            gamma_dest,
            beta,
            relay_interference: RelayInterferenceConvention::default(),
        })
    }

    pub fn with_relay_interference(mut self, convention: RelayInterferenceConvention) -> Self {
        self.relay_interference = convention;
        self
    }

    /// A relay that is harder to reach than the destination (β ≤ 1) makes
    /// relaying pointless; flagged but not rejected.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.beta <= 1.0 {
            out.push(format!(
                "beta = {} <= 1: the relay-destination link is no more reliable than \
                 the user-destination link, so the relay cannot help",
                self.beta
            ));
        }
        out
    }

    /// Closed-form symmetric success probability.
    ///
    /// * `UserToRelay`, `transmitting_users = i ≥ 1`:
    ///   `P_{0,i} = P_0 (1+γ_0)^{-(i-1)}` (the `relay_active` flag is
    ///   ignored; a transmitting relay cannot receive at all, which is a
    ///   protocol matter, not a link property).
    /// * `UserToDest`, `i ≥ 1`, `j = relay_active`:
    ///   `P_{d,i,j} = P_d (1+γ_d)^{-(i-1)} (1+βγ_d)^{-j}`.
    /// * `RelayToDest`, `i ≥ 0` interfering users:
    ///   `P_{0d,i} = P_0d (1+γ_d/β)^{-i}`.
    pub fn success(
        &self,
        kind: LinkKind,
        transmitting_users: u32,
        relay_active: bool,
    ) -> Result<f64, Error> {
        let i = transmitting_users;
        match kind {
            LinkKind::UserToRelay => {
                if i == 0 {
                    return Err(Error::NoTransmittingUser);
                }
                Ok(self.p_user_relay * (1.0 + self.gamma_relay).powi(-(i as i32 - 1)))
            }
            LinkKind::UserToDest => {
                if i == 0 {
                    return Err(Error::NoTransmittingUser);
                }
                let relay_gamma = match self.relay_interference {
                    RelayInterferenceConvention::GammaDest => self.gamma_dest,
                    RelayInterferenceConvention::GammaRelay => self.gamma_relay,
                };
                let relay_factor = if relay_active {
                    1.0 / (1.0 + self.beta * relay_gamma)
                } else {
                    1.0
                };
                Ok(self.p_user_dest
                    * (1.0 + self.gamma_dest).powi(-(i as i32 - 1))
                    * relay_factor)
            }
            LinkKind::RelayToDest => {
                Ok(self.p_relay_dest * (1.0 + self.gamma_dest / self.beta).powi(-(i as i32)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn baseline(n: usize, gamma: f64) -> NetworkGeometry {
        SymmetricGeometry::baseline(n, gamma).build().unwrap()
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn received_power_factor_reference_values() {
        let geom = baseline(2, 0.5);
        // 1 mW over 130 m at alpha = 4
        let g_user = geom
            .received_power_factor(NodeId::User(1), NodeId::Destination)
            .unwrap();
        assert!(rel_close(g_user, 3.501277966457757e-12, 1e-12), "{g_user}");
        // 10 mW over 80 m at alpha = 4
        let g_relay = geom
            .received_power_factor(NodeId::Relay, NodeId::Destination)
            .unwrap();
        assert!(rel_close(g_relay, 2.44140625e-10, 1e-12), "{g_relay}");
    }

    #[test]
    fn received_power_factor_alpha_zero_is_tx_power() {
        let mut cfg = SymmetricGeometry::baseline(1, 0.5);
        cfg.path_loss_exponent = 0.0;
        let geom = cfg.build().unwrap();
        let g = geom
            .received_power_factor(NodeId::User(1), NodeId::Destination)
            .unwrap();
        assert_eq!(g, 1e-3);
    }

    #[test]
    fn received_power_factor_unknown_link() {
        let geom = baseline(2, 0.5);
        let err = geom
            .received_power_factor(NodeId::User(1), NodeId::User(2))
            .unwrap_err();
        assert!(matches!(err, Error::UnknownLink { .. }), "{err}");
    }

    #[test]
    fn single_transmitter_success_reference_values() {
        let geom = baseline(2, 0.5);
        let u = NodeId::User(1);
        let p_d = geom
            .success_probability(u, NodeId::Destination, &[u])
            .unwrap();
        assert!(rel_close(p_d, 0.23977602992410343, 1e-12), "{p_d}");
        let p_0 = geom.success_probability(u, NodeId::Relay, &[u]).unwrap();
        assert!(rel_close(p_0, 0.9372548956126777, 1e-12), "{p_0}");
    }

    #[test]
    fn zero_threshold_always_succeeds() {
        let geom = baseline(3, 0.0);
        let set = [NodeId::User(1), NodeId::User(2), NodeId::User(3)];
        for &u in &set {
            let p = geom
                .success_probability(u, NodeId::Destination, &set)
                .unwrap();
            assert_eq!(p, 1.0);
        }
    }

    #[test]
    fn success_probability_contract_checks() {
        let geom = baseline(2, 0.5);
        let u1 = NodeId::User(1);
        let u2 = NodeId::User(2);
        assert!(matches!(
            geom.success_probability(u1, NodeId::Destination, &[u2]),
            Err(Error::TransmitterNotInSet { .. })
        ));
        assert!(matches!(
            geom.success_probability(u1, NodeId::Destination, &[u1, NodeId::Destination]),
            Err(Error::ReceiverInSet { .. })
        ));
        assert!(matches!(
            geom.success_probability(u1, NodeId::Destination, &[u1, u1]),
            Err(Error::DuplicateTransmitter { .. })
        ));
    }

    #[test]
    fn success_probability_monotone_in_interference() {
        let geom = baseline(4, 0.8);
        let u1 = NodeId::User(1);
        let mut set = vec![u1];
        let mut prev = geom
            .success_probability(u1, NodeId::Destination, &set)
            .unwrap();
        for i in 2..=4 {
            set.push(NodeId::User(i));
            let p = geom
                .success_probability(u1, NodeId::Destination, &set)
                .unwrap();
            assert!(p < prev, "adding an interferer must strictly reduce success");
            prev = p;
        }
    }

    #[test]
    fn symmetric_params_reference_values() {
        let geom = baseline(2, 0.5);
        let p = geom.symmetric_link_params().unwrap();
        assert!(rel_close(p.p_user_relay, 0.9372548956126777, 1e-12));
        assert!(rel_close(p.p_user_dest, 0.23977602992410343, 1e-12));
        assert!(rel_close(p.p_relay_dest, 0.9797282908443904, 1e-12));
        assert!(rel_close(p.beta, 69.72900390625, 1e-12));
        assert!(p.warnings().is_empty());
    }

    #[test]
    fn symmetric_params_zero_threshold() {
        let geom = baseline(2, 0.0);
        let p = geom.symmetric_link_params().unwrap();
        assert_eq!(p.p_user_relay, 1.0);
        assert_eq!(p.p_user_dest, 1.0);
        assert_eq!(p.p_relay_dest, 1.0);
    }

    #[test]
    fn symmetric_params_rejects_offset_user() {
        let mut geom = baseline(3, 0.5);
        geom.add_link(NodeId::User(2), NodeId::Destination, 150.0, 1.0)
            .unwrap();
        let err = geom.symmetric_link_params().unwrap_err();
        match err {
            Error::NonSymmetricLink { from, to, .. } => {
                assert_eq!(from, NodeId::User(2));
                assert_eq!(to, NodeId::Destination);
            }
            other => panic!("expected NonSymmetricLink, got {other}"),
        }
    }

    #[test]
    fn symmetric_success_reference_values() {
        let params = baseline(2, 0.5).symmetric_link_params().unwrap();
        let p02 = params.success(LinkKind::UserToRelay, 2, false).unwrap();
        assert!(rel_close(p02, 0.9372548956126777 / 1.5, 1e-12), "{p02}");
        // i = 1, relay silent reduces to the base probability
        let pd10 = params.success(LinkKind::UserToDest, 1, false).unwrap();
        assert_eq!(pd10, params.p_user_dest);
        let p0d1 = params.success(LinkKind::RelayToDest, 1, false).unwrap();
        assert!(rel_close(p0d1, 0.9727530510121963, 1e-12), "{p0d1}");
    }

    #[test]
    fn symmetric_success_requires_a_user_on_user_links() {
        let params = baseline(2, 0.5).symmetric_link_params().unwrap();
        assert!(matches!(
            params.success(LinkKind::UserToRelay, 0, false),
            Err(Error::NoTransmittingUser)
        ));
        assert!(matches!(
            params.success(LinkKind::UserToDest, 0, true),
            Err(Error::NoTransmittingUser)
        ));
        // relay -> destination with zero users is the uncontended case
        let p = params.success(LinkKind::RelayToDest, 0, false).unwrap();
        assert_eq!(p, params.p_relay_dest);
    }

    /// The closed symmetric forms must agree with the general formula on the
    /// corresponding explicit transmitter sets, for every reachable pattern
    /// with up to 6 users.
    #[test]
    fn symmetric_forms_match_general_formula() {
        for gamma in [0.3, 0.5, 1.2, 2.5] {
            let geom = baseline(6, gamma);
            let params = geom.symmetric_link_params().unwrap();
            for i in 1..=6u32 {
                let users: Vec<NodeId> = (1..=i).map(NodeId::User).collect();

                let closed = params.success(LinkKind::UserToRelay, i, false).unwrap();
                let general = geom
                    .success_probability(NodeId::User(1), NodeId::Relay, &users)
                    .unwrap();
                assert!(rel_close(closed, general, 1e-12), "P_0,{i}");

                for relay_active in [false, true] {
                    let closed = params
                        .success(LinkKind::UserToDest, i, relay_active)
                        .unwrap();
                    let mut set = users.clone();
                    if relay_active {
                        set.push(NodeId::Relay);
                    }
                    let general = geom
                        .success_probability(NodeId::User(1), NodeId::Destination, &set)
                        .unwrap();
                    assert!(
                        rel_close(closed, general, 1e-12),
                        "P_d,{i},{relay_active}: {closed} vs {general}"
                    );
                }
            }
            for i in 0..=6u32 {
                let closed = params.success(LinkKind::RelayToDest, i, true).unwrap();
                let mut set: Vec<NodeId> = (1..=i).map(NodeId::User).collect();
                set.push(NodeId::Relay);
                let general = geom
                    .success_probability(NodeId::Relay, NodeId::Destination, &set)
                    .unwrap();
                assert!(rel_close(closed, general, 1e-12), "P_0d,{i}");
            }
        }
    }

    /// With distinct thresholds the two relay-interference conventions
    /// genuinely differ, and only the default one matches the general
    /// formula.
    #[test]
    fn relay_interference_conventions_differ_when_thresholds_differ() {
        let mut cfg = SymmetricGeometry::baseline(2, 0.5);
        cfg.gamma_relay = 1.5;
        let geom = cfg.build().unwrap();
        let params = geom.symmetric_link_params().unwrap();
        let strict = params.with_relay_interference(RelayInterferenceConvention::GammaRelay);

        let derived = params.success(LinkKind::UserToDest, 1, true).unwrap();
        let printed = strict.success(LinkKind::UserToDest, 1, true).unwrap();
        assert!(!rel_close(derived, printed, 1e-6));

        let general = geom
            .success_probability(
                NodeId::User(1),
                NodeId::Destination,
                &[NodeId::User(1), NodeId::Relay],
            )
            .unwrap();
        assert!(rel_close(derived, general, 1e-12));
    }

    #[test]
    fn beta_warning_when_relay_link_is_weak() {
        let mut cfg = SymmetricGeometry::baseline(2, 0.5);
        cfg.tx_power_relay_w = 1e-5;
        let params = cfg.build().unwrap().symmetric_link_params().unwrap();
        assert!(params.beta < 1.0);
        assert_eq!(params.warnings().len(), 1);
    }

    #[test]
    fn alpha_warning_outside_typical_range() {
        let mut cfg = SymmetricGeometry::baseline(1, 0.5);
        cfg.path_loss_exponent = 5.0;
        let geom = cfg.build().unwrap();
        assert_eq!(geom.warnings().len(), 1);
        assert!(baseline(1, 0.5).warnings().is_empty());
    }

    #[test]
    fn probabilities_stay_in_range_under_extreme_geometry() {
        // Far receiver: the exponent underflows rather than producing NaN.
        let mut cfg = SymmetricGeometry::baseline(1, 0.5);
        cfg.r_user_dest_m = 1e9;
        let geom = cfg.build().unwrap();
        let p = geom
            .success_probability(NodeId::User(1), NodeId::Destination, &[NodeId::User(1)])
            .unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert_eq!(p, 0.0);
    }
}
