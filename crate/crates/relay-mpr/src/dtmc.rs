//! Lower-Hessenberg discrete-time Markov chain machinery for the relay
//! queue: at most one departure per slot, batch arrivals of up to `m`
//! packets.
//!
//! The chain is described by two probability rows:
//!
//! * `a_0..a_m`   — transitions out of the empty state (`a_k` = k arrivals),
//! * `b_0..b_{m+1}` — transitions out of every busy state (`b_0` = departure,
//!   `b_1` = hold, `b_{k+1}` = k arrivals).
//!
//! Two independent solvers produce the steady state: generating-function
//! closed forms ([`steady_state_closed_form`]) and a truncated numerical
//! solve ([`steady_state_truncated`]) that serves as the oracle for every
//! closed-form queue quantity in this crate.

use crate::Error;

/// Default acceptance bound on the probability mass parked at the
/// truncation boundary.
pub const DEFAULT_TAIL_BOUND: f64 = 1e-10;

/// Largest truncation the auto-retry loop will attempt.
const MAX_AUTO_TRUNCATION: usize = 1 << 21;

/// Batch-arrival distribution of the relay queue, conditioned on the queue
/// being empty. `p0[k-1]` holds `p_k^0`, the probability that k packets are
/// accepted in a slot in which the queue is empty. Arrivals while the queue
/// is busy are the same draws thinned by the relay's own transmissions:
/// `p_k^1 = (1 - q0) p_k^0` exactly, because a transmitting relay cannot
/// receive.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalProbabilities {
    p0: Vec<f64>,
    relay_tx_prob: f64,
}

impl ArrivalProbabilities {
    pub fn new(p0: Vec<f64>, relay_tx_prob: f64) -> Result<Self, Error> {
        if !(0.0..=1.0).contains(&relay_tx_prob) {
            return Err(Error::InvalidParameter {
                name: "relay_tx_prob",
                value: relay_tx_prob,
                requirement: "a probability in [0, 1]",
            });
        }
        let mut total = 0.0;
        for &p in &p0 {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter {
                    name: "p_k^0",
                    value: p,
                    requirement: "a probability in [0, 1]",
                });
            }
            total += p;
        }
        if total > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter {
                name: "sum p_k^0",
                value: total,
                requirement: "at most 1",
            });
        }
        Ok(Self { p0, relay_tx_prob })
    }

    /// Largest batch size with nonzero support.
    pub fn max_batch(&self) -> usize {
        self.p0.len()
    }

    pub fn relay_tx_prob(&self) -> f64 {
        self.relay_tx_prob
    }

    /// `p_k^0` for `k ≥ 1` (0 beyond the maximum batch).
    pub fn p_empty(&self, k: usize) -> f64 {
        if k == 0 || k > self.p0.len() {
            0.0
        } else {
            self.p0[k - 1]
        }
    }

    /// `p_k^1 = (1 - q0) p_k^0`.
    pub fn p_busy(&self, k: usize) -> f64 {
        (1.0 - self.relay_tx_prob) * self.p_empty(k)
    }

    /// λ0 = Σ k p_k^0: mean arrivals per empty-queue slot.
    pub fn lambda0(&self) -> f64 {
        self.p0
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum()
    }

    /// λ1 = (1 - q0) λ0: mean arrivals per busy slot.
    pub fn lambda1(&self) -> f64 {
        (1.0 - self.relay_tx_prob) * self.lambda0()
    }

    /// Σ p_k^0: probability of at least one arrival on an empty slot.
    pub fn total_p_empty(&self) -> f64 {
        self.p0.iter().sum()
    }

    /// Σ i(i+3) p_i^x, the weighted moment appearing in the closed-form
    /// mean queue length. `busy` selects the p^1 row.
    pub fn weighted_moment(&self, busy: bool) -> f64 {
        let thin = if busy { 1.0 - self.relay_tx_prob } else { 1.0 };
        self.p0
            .iter()
            .enumerate()
            .map(|(idx, p)| {
                let i = (idx + 1) as f64;
                i * (i + 3.0) * p * thin
            })
            .sum()
    }
}

/// The two rows that generate the queue's lower-Hessenberg transition
/// matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HessenbergChain {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl HessenbergChain {
    /// Build the chain rows from the arrival distribution and the service
    /// probability μ:
    /// `a = (1 - Σ p_k^0, p_1^0, .., p_m^0)`,
    /// `b = (μ, 1 - μ - Σ p_k^1, p_1^1, .., p_m^1)`.
    ///
    /// `b_1 < 0` cannot occur for consistent inputs (service and reception
    /// exclude each other at the relay), so it is reported as a model
    /// inconsistency.
    pub fn from_arrivals(arrivals: &ArrivalProbabilities, mu: f64) -> Result<Self, Error> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::InvalidParameter {
                name: "mu",
                value: mu,
                requirement: "a probability in [0, 1]",
            });
        }
        let m = arrivals.max_batch();
        let mut a = Vec::with_capacity(m + 1);
        a.push(1.0 - arrivals.total_p_empty());
        for k in 1..=m {
            a.push(arrivals.p_empty(k));
        }
        let hold = 1.0 - mu - (1.0 - arrivals.relay_tx_prob()) * arrivals.total_p_empty();
        if hold < -1e-12 {
            return Err(Error::ModelInconsistency {
                detail: format!("busy-state hold probability b_1 = {hold} is negative"),
            });
        }
        let mut b = Vec::with_capacity(m + 2);
        b.push(mu);
        b.push(hold.max(0.0));
        for k in 1..=m {
            b.push(arrivals.p_busy(k));
        }
        Self::new(a, b)
    }

    /// Generic constructor: both rows must be probability vectors summing
    /// to 1 within 1e-12.
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self, Error> {
        if a.is_empty() || b.len() != a.len() + 1 {
            return Err(Error::ModelInconsistency {
                detail: format!(
                    "row lengths ({}, {}) do not describe a batch-arrival chain",
                    a.len(),
                    b.len()
                ),
            });
        }
        for (row, name) in [(&a, "a"), (&b, "b")] {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::ModelInconsistency {
                    detail: format!("row {name} sums to {sum}, expected 1"),
                });
            }
            if let Some(&bad) = row.iter().find(|&&x| !(x >= 0.0)) {
                return Err(Error::ModelInconsistency {
                    detail: format!("row {name} contains a negative entry {bad}"),
                });
            }
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Number of non-trivial entries per interior column: m + 2.
    pub fn bandwidth(&self) -> usize {
        self.b.len()
    }

    /// Service probability μ = b_0.
    pub fn service_rate(&self) -> f64 {
        self.b[0]
    }

    /// Mean arrivals from the empty state: -A'(1) = Σ k a_k.
    pub fn arrival_rate_empty(&self) -> f64 {
        moment(&self.a, 1)
    }

    /// Mean arrivals from busy states: Σ k b_{k+1}.
    pub fn arrival_rate_busy(&self) -> f64 {
        self.b[2..]
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum()
    }

    /// Strong stability: mean drift of a busy state is negative.
    pub fn is_stable(&self) -> bool {
        self.arrival_rate_busy() < self.service_rate()
    }
}

/// Σ k^(order-ish) helper: `moment(row, 1) = Σ k r_k`,
/// `moment(row, 2) = Σ k(k+1) r_k`; these are |A'(1)| and A''(1) for rows in
/// powers of z^-1.
fn moment(row: &[f64], order: u32) -> f64 {
    row.iter()
        .enumerate()
        .map(|(k, p)| {
            let k = k as f64;
            match order {
                1 => k * p,
                _ => k * (k + 1.0) * p,
            }
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyStateMethod {
    ClosedForm,
    TruncatedNumeric,
}

/// Steady-state summary of the queue.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    /// s_0 = P(queue empty).
    pub prob_empty: f64,
    /// Mean queue length.
    pub mean_queue: f64,
    /// Probability parked at the truncation boundary (0 for closed form).
    pub tail_mass: f64,
    pub method: SteadyStateMethod,
}

/// Steady state via generating functions.
///
/// With `A(z) = Σ a_k z^-k` and `B(z) = Σ b_k z^-k`, the steady-state
/// transform is `S(z) = s_0 (z^-1 A(z) - B(z)) / (z^-1 - B(z))`, giving
///
/// ```text
/// s_0 = (1 + B'(1)) / (1 + B'(1) - A'(1))
/// ```
///
/// and the mean queue `-S'(1)`. Both numerator and denominator of `S'`
/// vanish at z = 1; the limit is taken through the second derivatives of
/// `K(z) = N'(z)D(z) - N(z)D'(z)` and `L(z) = D(z)^2` (N, D the numerator
/// and denominator of S/s_0). Because z = 1 annihilates N and D, only four
/// coefficient sums survive:
///
/// ```text
/// K''(1) = N''(1) D'(1) - N'(1) D''(1),    L''(1) = 2 D'(1)^2
/// ```
///
/// with `N'(1) = -1 + A'(1) - B'(1)`, `N''(1) = 2 - 2A'(1) + A''(1) - B''(1)`,
/// `D'(1) = -1 - B'(1)`, `D''(1) = 2 - B''(1)`, where `A'(1) = -Σ k a_k`,
/// `A''(1) = Σ k(k+1) a_k` and likewise for B. These are exact polynomial
/// identities, so no cancellation-prone evaluation near z = 1 is needed.
pub fn steady_state_closed_form(chain: &HessenbergChain) -> Result<SteadyState, Error> {
    let a1 = -moment(&chain.a, 1); // A'(1)
    let b1 = -moment(&chain.b, 1); // B'(1)
    if 1.0 + b1 <= 0.0 {
        // 1 + B'(1) = μ - λ1: non-positive means an unstable chain.
        return Err(Error::UnstableChain {
            arrival_rate: chain.arrival_rate_busy(),
            service_rate: chain.service_rate(),
        });
    }
    let prob_empty = ((1.0 + b1) / (1.0 + b1 - a1)).clamp(0.0, 1.0);

    let a2 = moment(&chain.a, 2); // A''(1)
    let b2 = moment(&chain.b, 2); // B''(1)
    let n_p = -1.0 + a1 - b1;
    let n_pp = 2.0 - 2.0 * a1 + a2 - b2;
    let d_p = -1.0 - b1;
    let d_pp = 2.0 - b2;
    let k_pp = n_pp * d_p - n_p * d_pp;
    let l_pp = 2.0 * d_p * d_p;
    let mean_queue = (-prob_empty * k_pp / l_pp).max(0.0);

    Ok(SteadyState {
        prob_empty,
        mean_queue,
        tail_mass: 0.0,
        method: SteadyStateMethod::ClosedForm,
    })
}

/// Numerical oracle: solve `πP = π` on states `0..=q_max` with the
/// transition mass that would overflow the truncation folded into the last
/// state, replace the last balance equation with the normalisation `Σπ = 1`,
/// and run banded Gaussian elimination with deterministic partial pivoting.
///
/// The result is accepted only when the mass parked at the boundary state is
/// below `DEFAULT_TAIL_BOUND`; otherwise [`Error::TruncationTooSmall`] asks
/// the caller to retry with a larger `q_max` (a geometric rule of thumb is
/// `q_max ≳ 10 / (1 - λ1/μ)`).
pub fn steady_state_truncated(
    chain: &HessenbergChain,
    q_max: usize,
) -> Result<SteadyState, Error> {
    steady_state_truncated_with_bound(chain, q_max, DEFAULT_TAIL_BOUND)
}

pub fn steady_state_truncated_with_bound(
    chain: &HessenbergChain,
    q_max: usize,
    tail_bound: f64,
) -> Result<SteadyState, Error> {
    if q_max < chain.bandwidth() {
        return Err(Error::InvalidParameter {
            name: "q_max",
            value: q_max as f64,
            requirement: "at least the chain bandwidth",
        });
    }
    let pi = solve_truncated(chain, q_max)?;
    let tail_mass = pi[q_max];
    if !(tail_mass < tail_bound) {
        return Err(Error::TruncationTooSmall { q_max, tail_mass });
    }
    let mean_queue = pi
        .iter()
        .enumerate()
        .map(|(i, p)| i as f64 * p)
        .sum::<f64>();
    Ok(SteadyState {
        prob_empty: pi[0],
        mean_queue,
        tail_mass,
        method: SteadyStateMethod::TruncatedNumeric,
    })
}

/// Retry wrapper: doubles the truncation until the tail-mass bound is met.
pub fn steady_state_truncated_auto(
    chain: &HessenbergChain,
    tail_bound: f64,
) -> Result<SteadyState, Error> {
    let mut q_max = 64.max(chain.bandwidth());
    loop {
        match steady_state_truncated_with_bound(chain, q_max, tail_bound) {
            Err(Error::TruncationTooSmall { .. }) if q_max < MAX_AUTO_TRUNCATION => {
                q_max *= 2;
            }
            other => return other,
        }
    }
}

/// Solve the truncated balance system and return the clamped, normalised
/// distribution over states `0..=q_max`.
///
/// Unknown c appears in: its own balance equation (diagonal, the negated
/// leave probability), the equations of the states it feeds by batch
/// arrivals (up to m rows below the diagonal), and the equation of the state
/// below it via the service term μ (the single superdiagonal, making the
/// system lower Hessenberg). The dense normalisation row replaces the
/// boundary-state balance equation and is kept at position n throughout;
/// elimination always clears its current column, so it only ever loses
/// entries, bandedness is preserved, and the whole solve is O(q_max · m²).
fn solve_truncated(chain: &HessenbergChain, q_max: usize) -> Result<Vec<f64>, Error> {
    let n = q_max; // states 0..=n
    let m = chain.a.len() - 1; // max batch size

    // Row r holds columns first..first+coeffs.len()-1 and a right-hand side.
    struct Row {
        first: usize,
        coeffs: Vec<f64>,
        rhs: f64,
    }
    let at = |row: &Row, col: usize| -> f64 {
        if col < row.first || col - row.first >= row.coeffs.len() {
            0.0
        } else {
            row.coeffs[col - row.first]
        }
    };
    // Transition probability c -> r of the truncated chain, for r < n.
    // Transitions into the boundary state n (the absorbed overflow) only
    // show up in equation n, which the normalisation replaces.
    let prob = |c: usize, r: usize| -> f64 {
        if c == 0 {
            if r <= m {
                chain.a[r]
            } else {
                0.0
            }
        } else if r + 1 == c {
            chain.b[0]
        } else if r >= c && r - c + 1 < chain.b.len() {
            chain.b[r - c + 1]
        } else {
            0.0
        }
    };
    // Positions 0..n-1: balance equations of states 0..n-1 (banded).
    // Position n: the dense normalisation row Σπ = 1.
    let mut rows: Vec<Row> = Vec::with_capacity(n + 1);
    for r in 0..n {
        let first = r.saturating_sub(m);
        let mut coeffs = vec![0.0; r + 1 - first + 1];
        for c in first..=(r + 1).min(n) {
            let mut v = prob(c, r);
            if c == r {
                v -= 1.0;
            }
            coeffs[c - first] = v;
        }
        rows.push(Row { first, coeffs, rhs: 0.0 });
    }
    rows.push(Row { first: 0, coeffs: vec![1.0; n + 1], rhs: 1.0 });

    // Forward elimination over columns 0..n-1. Pivot candidates are the
    // banded positions c..c+m (the only balance rows with support in column
    // c); the row parked at position n joins only when every banded
    // candidate is exactly zero (an absorbing state), so the normalisation
    // row can never smear its full width across the band.
    for c in 0..n {
        let hi = (c + m).min(n - 1);
        let mut pivot_pos = c;
        let mut pivot_val = at(&rows[c], c).abs();
        for r in (c + 1)..=hi {
            let v = at(&rows[r], c).abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_pos = r;
            }
        }
        if pivot_val == 0.0 {
            if at(&rows[n], c) != 0.0 {
                pivot_pos = n;
            } else {
                return Err(Error::ModelInconsistency {
                    detail: format!("singular truncated system at column {c}"),
                });
            }
        }
        if pivot_pos != c {
            rows.swap(c, pivot_pos);
        }
        let pivot = at(&rows[c], c);
        for r in ((c + 1)..=hi).chain([n]) {
            if r == c {
                continue;
            }
            let factor = at(&rows[r], c) / pivot;
            if factor != 0.0 {
                let (head, tail) = rows.split_at_mut(r);
                let prow = &head[c];
                let trow = &mut tail[0];
                for (i, &v) in prow.coeffs.iter().enumerate() {
                    if v == 0.0 {
                        continue;
                    }
                    let col = prow.first + i;
                    debug_assert!(col >= trow.first, "elimination fill below band");
                    let idx = col - trow.first;
                    if idx >= trow.coeffs.len() {
                        trow.coeffs.resize(idx + 1, 0.0);
                    }
                    trow.coeffs[idx] -= factor * v;
                }
                trow.rhs -= factor * prow.rhs;
                // Pin the eliminated entry to zero against rounding.
                let idx = c - trow.first;
                trow.coeffs[idx] = 0.0;
            }
        }
    }

    // Back substitution: position r now carries the equation for unknown r.
    let mut pi = vec![0.0; n + 1];
    for r in (0..=n).rev() {
        let row = &rows[r];
        let mut acc = row.rhs;
        for (i, &v) in row.coeffs.iter().enumerate() {
            let col = row.first + i;
            if col > r && col <= n {
                acc -= v * pi[col];
            }
        }
        let diag = at(row, r);
        if diag == 0.0 {
            return Err(Error::ModelInconsistency {
                detail: format!("singular truncated system at state {r}"),
            });
        }
        pi[r] = acc / diag;
    }

    // Clamp the rounding dust and renormalise.
    let mut sum = 0.0;
    for p in pi.iter_mut() {
        if *p < 0.0 {
            if *p < -1e-12 {
                return Err(Error::ModelInconsistency {
                    detail: format!("steady-state entry {p} is significantly negative"),
                });
            }
            *p = 0.0;
        }
        sum += *p;
    }
    if !((sum - 1.0).abs() < 1e-9) {
        return Err(Error::ModelInconsistency {
            detail: format!("steady-state mass {sum} differs from 1"),
        });
    }
    for p in pi.iter_mut() {
        *p /= sum;
    }
    Ok(pi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn two_user_reference_chain() -> HessenbergChain {
        // p_1^0, p_2^0 and mu of the reference two-user scenario
        // (gamma = 0.5, q = 0.2, q0 = 0.8); values pinned independently in
        // the two_user module tests.
        let arrivals = ArrivalProbabilities::new(
            vec![0.24795773976238505, 0.011023153673718403],
            0.8,
        )
        .unwrap();
        HessenbergChain::from_arrivals(&arrivals, 0.7815521450708913).unwrap()
    }

    #[test]
    fn build_chain_deterministic_service_no_arrivals() {
        let arrivals = ArrivalProbabilities::new(vec![], 0.5).unwrap();
        let chain = HessenbergChain::from_arrivals(&arrivals, 1.0).unwrap();
        assert_eq!(chain.a(), &[1.0]);
        assert_eq!(chain.b(), &[1.0, 0.0]);
    }

    #[test]
    fn build_chain_rows_sum_to_one() {
        let chain = two_user_reference_chain();
        let sa: f64 = chain.a().iter().sum();
        let sb: f64 = chain.b().iter().sum();
        assert!(close(sa, 1.0, 1e-15), "{sa}");
        assert!(close(sb, 1.0, 1e-15), "{sb}");
    }

    #[test]
    fn build_chain_bandwidth_matches_batch_size() {
        // n = 3 symmetric arrivals: bandwidth must be n + 2.
        let arrivals = ArrivalProbabilities::new(vec![0.1, 0.05, 0.01], 0.9).unwrap();
        let chain = HessenbergChain::from_arrivals(&arrivals, 0.8).unwrap();
        assert_eq!(chain.bandwidth(), 5);
    }

    #[test]
    fn build_chain_rejects_oversubscribed_slot() {
        let arrivals = ArrivalProbabilities::new(vec![0.5], 0.0).unwrap();
        let err = HessenbergChain::from_arrivals(&arrivals, 0.6).unwrap_err();
        assert!(matches!(err, Error::ModelInconsistency { .. }), "{err}");
    }

    #[test]
    fn closed_form_no_arrivals_is_empty_queue() {
        let arrivals = ArrivalProbabilities::new(vec![], 0.3).unwrap();
        let chain = HessenbergChain::from_arrivals(&arrivals, 0.7).unwrap();
        let ss = steady_state_closed_form(&chain).unwrap();
        assert_eq!(ss.prob_empty, 1.0);
        assert_eq!(ss.mean_queue, 0.0);
    }

    #[test]
    fn closed_form_reference_scenario() {
        let ss = steady_state_closed_form(&two_user_reference_chain()).unwrap();
        assert!(close(ss.prob_empty, 0.7293342788015207, 1e-12), "{}", ss.prob_empty);
        assert!(close(ss.mean_queue, 0.30262559631752295, 1e-12), "{}", ss.mean_queue);
    }

    #[test]
    fn closed_form_rejects_unstable_chain() {
        let arrivals = ArrivalProbabilities::new(vec![0.4], 0.0).unwrap();
        let chain = HessenbergChain::from_arrivals(&arrivals, 0.2).unwrap();
        assert!(matches!(
            steady_state_closed_form(&chain),
            Err(Error::UnstableChain { .. })
        ));
    }

    #[test]
    fn truncated_deterministic_service() {
        let arrivals = ArrivalProbabilities::new(vec![], 0.5).unwrap();
        let chain = HessenbergChain::from_arrivals(&arrivals, 1.0).unwrap();
        let ss = steady_state_truncated(&chain, 64).unwrap();
        assert_eq!(ss.prob_empty, 1.0);
        assert_eq!(ss.mean_queue, 0.0);
    }

    #[test]
    fn truncated_matches_reference_scenario() {
        let chain = two_user_reference_chain();
        let ss = steady_state_truncated(&chain, 2000).unwrap();
        assert!(close(ss.prob_empty, 0.7293342788015207, 1e-11), "{}", ss.prob_empty);
        let rel = (ss.mean_queue - 0.30262559631752295).abs() / 0.30262559631752295;
        assert!(rel < 1e-6, "mean {} rel {rel}", ss.mean_queue);
        assert!(ss.tail_mass < DEFAULT_TAIL_BOUND);
    }

    #[test]
    fn near_critical_chain_needs_large_truncation() {
        // lambda1/mu = 0.99: small truncations must be rejected through the
        // tail-mass guard, a 10^4-state solve accepted.
        let mu = 0.5;
        let arrivals = ArrivalProbabilities::new(vec![0.495], 0.0).unwrap();
        let chain = HessenbergChain::from_arrivals(&arrivals, mu).unwrap();
        assert!(matches!(
            steady_state_truncated(&chain, 500),
            Err(Error::TruncationTooSmall { .. })
        ));
        let ss = steady_state_truncated(&chain, 12_000).unwrap();
        let closed = steady_state_closed_form(&chain).unwrap();
        assert!(close(ss.prob_empty, closed.prob_empty, 1e-9));
        let rel = (ss.mean_queue - closed.mean_queue).abs() / closed.mean_queue;
        assert!(rel < 1e-6, "rel {rel}");
    }

    #[test]
    fn truncated_auto_grows_until_accepted() {
        let arrivals = ArrivalProbabilities::new(vec![0.45], 0.0).unwrap();
        let chain = HessenbergChain::from_arrivals(&arrivals, 0.5).unwrap();
        let ss = steady_state_truncated_auto(&chain, DEFAULT_TAIL_BOUND).unwrap();
        assert!(ss.tail_mass < DEFAULT_TAIL_BOUND);
    }

    #[test]
    fn truncated_is_proper_distribution() {
        let chain = two_user_reference_chain();
        let pi = solve_truncated(&chain, 300).unwrap();
        let sum: f64 = pi.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(pi.iter().all(|&p| p >= 0.0));
    }

    /// Closed form vs truncated oracle across a randomized family of stable
    /// chains with batch sizes up to 6.
    #[test]
    fn closed_form_matches_oracle_on_random_chains() {
        let mut rng = StdRng::seed_from_u64(0x9e3779b97f4a7c15);
        let mut tested = 0;
        while tested < 1000 {
            let m = rng.random_range(1..=6);
            let mut p0: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            let scale = rng.random::<f64>() / p0.iter().sum::<f64>().max(1e-9);
            for p in p0.iter_mut() {
                *p *= scale;
            }
            let q0 = rng.random::<f64>();
            let arrivals = ArrivalProbabilities::new(p0, q0).unwrap();
            let lambda1 = arrivals.lambda1();
            let mu_max = 1.0 - (1.0 - q0) * arrivals.total_p_empty();
            if lambda1 >= 0.95 * mu_max {
                continue;
            }
            let mu = rng.random_range((lambda1 / 0.95)..mu_max);
            let chain = match HessenbergChain::from_arrivals(&arrivals, mu) {
                Ok(c) => c,
                Err(_) => continue,
            };
            let closed = steady_state_closed_form(&chain).unwrap();
            let oracle = steady_state_truncated_auto(&chain, DEFAULT_TAIL_BOUND).unwrap();
            assert!(
                close(closed.prob_empty, oracle.prob_empty, 1e-9),
                "s0 {} vs {}",
                closed.prob_empty,
                oracle.prob_empty
            );
            let denom = closed.mean_queue.max(1e-12);
            assert!(
                (closed.mean_queue - oracle.mean_queue).abs() / denom < 1e-6,
                "mean {} vs {}",
                closed.mean_queue,
                oracle.mean_queue
            );
            tested += 1;
        }
    }

    /// For every valid chain the closed-form s0 lands in [0, 1] exactly when
    /// the chain is stable (the solver rejects the rest).
    #[test]
    fn closed_form_s0_in_unit_interval_iff_stable() {
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..500 {
            let p = rng.random::<f64>() * 0.9;
            let q0 = rng.random::<f64>();
            let arrivals = ArrivalProbabilities::new(vec![p], q0).unwrap();
            let mu = rng.random::<f64>() * (1.0 - (1.0 - q0) * p);
            let chain = HessenbergChain::from_arrivals(&arrivals, mu).unwrap();
            match steady_state_closed_form(&chain) {
                Ok(ss) => {
                    assert!(chain.is_stable());
                    assert!((0.0..=1.0).contains(&ss.prob_empty));
                }
                Err(Error::UnstableChain { .. }) => assert!(!chain.is_stable()),
                Err(other) => panic!("unexpected error {other}"),
            }
        }
    }
}
