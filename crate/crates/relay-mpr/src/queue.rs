//! Steady-state characterization of the relay queue, shared by the two-user
//! and the n-user symmetric analyses. Both feed it their own arrival
//! distribution, service rate and stability threshold; the closed forms here
//! are the same for either network.

use crate::dtmc::ArrivalProbabilities;

/// A queue statistic that only exists in the stable regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QueueMetric {
    Finite(f64),
    /// The queue drifts to infinity; the statistic has no stationary value.
    Divergent,
}

impl QueueMetric {
    pub fn value(self) -> Option<f64> {
        match self {
            QueueMetric::Finite(v) => Some(v),
            QueueMetric::Divergent => None,
        }
    }

    pub fn is_divergent(self) -> bool {
        matches!(self, QueueMetric::Divergent)
    }

    /// Unwrap a value that the caller has already proven finite.
    pub fn expect_finite(self, context: &str) -> f64 {
        match self {
            QueueMetric::Finite(v) => v,
            QueueMetric::Divergent => panic!("divergent queue metric: {context}"),
        }
    }
}

/// Closed-form summary of the relay queue for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueCharacterization {
    /// Mean arrivals per slot while the queue is empty.
    pub lambda0: f64,
    /// Mean arrivals per slot while the queue is busy: (1 - q0) λ0.
    pub lambda1: f64,
    /// Average arrival rate λ = μ λ0 / (μ - λ1 + λ0).
    pub lambda: f64,
    /// Service probability per busy slot.
    pub mu: f64,
    /// P(Q = 0); divergent when the queue is unstable.
    pub prob_empty: QueueMetric,
    /// Mean queue length; divergent when the queue is unstable.
    pub mean_queue: QueueMetric,
    /// Smallest relay transmit probability that stabilizes the queue.
    pub q0min: f64,
    /// λ1 < μ (an always-empty queue counts as stable).
    pub stable: bool,
}

/// Assemble the characterization from an arrival distribution, the service
/// rate μ = q0 · `service_factor`, and the q0-free part of the service rate
/// (the bracketed sum of the service-rate equation), from which
///
/// ```text
/// q0min = λ0 / (λ0 + service_factor)
/// P(Q=0) = (μ - λ1) / (μ - λ1 + λ0)
/// Q̄ = [(λ1 - μ) Σ i(i+3) p_i^0  +  λ0 (2μ - Σ i(i+3) p_i^1)]
///     / [2 (μ - λ1 + λ0)(λ1 - μ)]
/// ```
pub(crate) fn characterize(
    arrivals: &ArrivalProbabilities,
    mu: f64,
    service_factor: f64,
) -> QueueCharacterization {
    let lambda0 = arrivals.lambda0();
    let lambda1 = arrivals.lambda1();
    if lambda0 == 0.0 {
        // Nothing ever arrives: the queue is empty with certainty, whatever
        // the service rate (including the degenerate μ = 0).
        return QueueCharacterization {
            lambda0,
            lambda1,
            lambda: 0.0,
            mu,
            prob_empty: QueueMetric::Finite(1.0),
            mean_queue: QueueMetric::Finite(0.0),
            q0min: 0.0,
            stable: true,
        };
    }
    let q0min = lambda0 / (lambda0 + service_factor);
    let denom = mu - lambda1 + lambda0; // >= mu > 0 whenever lambda0 > 0
    let lambda = mu * lambda0 / denom;
    let stable = lambda1 < mu;
    let (prob_empty, mean_queue) = if stable {
        let w0 = arrivals.weighted_moment(false);
        let w1 = arrivals.weighted_moment(true);
        let mean =
            ((lambda1 - mu) * w0 + lambda0 * (2.0 * mu - w1)) / (2.0 * denom * (lambda1 - mu));
        (
            QueueMetric::Finite(((mu - lambda1) / denom).clamp(0.0, 1.0)),
            QueueMetric::Finite(mean.max(0.0)),
        )
    } else {
        (QueueMetric::Divergent, QueueMetric::Divergent)
    };
    QueueCharacterization {
        lambda0,
        lambda1,
        lambda,
        mu,
        prob_empty,
        mean_queue,
        q0min,
        stable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtmc::{self, HessenbergChain};

    #[test]
    fn degenerate_no_arrivals_reports_certainty() {
        let arrivals = ArrivalProbabilities::new(vec![], 0.0).unwrap();
        let c = characterize(&arrivals, 0.0, 0.0);
        assert_eq!(c.prob_empty, QueueMetric::Finite(1.0));
        assert_eq!(c.mean_queue, QueueMetric::Finite(0.0));
        assert_eq!(c.q0min, 0.0);
        assert!(c.stable);
    }

    #[test]
    fn unstable_regime_carries_divergence_markers() {
        let arrivals = ArrivalProbabilities::new(vec![0.4], 0.1).unwrap();
        let c = characterize(&arrivals, 0.05, 0.5);
        assert!(!c.stable);
        assert!(c.prob_empty.is_divergent());
        assert!(c.mean_queue.is_divergent());
        assert!(c.q0min > 0.0);
    }

    /// The module-level mean formula and the generating-function route in
    /// dtmc are algebraically the same quantity; check they agree bitwise-ish.
    #[test]
    fn mean_formula_matches_transform_route() {
        let arrivals =
            ArrivalProbabilities::new(vec![0.2, 0.05, 0.01], 0.7).unwrap();
        let mu = 0.6;
        let c = characterize(&arrivals, mu, mu / 0.7);
        let chain = HessenbergChain::from_arrivals(&arrivals, mu).unwrap();
        let ss = dtmc::steady_state_closed_form(&chain).unwrap();
        let mean = c.mean_queue.expect_finite("stable");
        assert!((mean - ss.mean_queue).abs() < 1e-12 * mean.max(1.0));
        let s0 = c.prob_empty.expect_finite("stable");
        assert!((s0 - ss.prob_empty).abs() < 1e-14);
    }
}
