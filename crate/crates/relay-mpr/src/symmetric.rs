//! Closed forms for the symmetric n-user network: every user transmits with
//! the same probability `q` over identical links, which collapses the
//! conditional success probabilities to the attenuation laws of
//! [`SymmetricLinkParams`] and makes the queue analysis a function of
//! binomial mixtures.

use crate::channel::{LinkKind, SymmetricLinkParams};
use crate::dtmc::ArrivalProbabilities;
use crate::queue::{characterize, QueueCharacterization};
use crate::Error;

/// Number of grid points used by the optimizers' dense scan.
pub const DEFAULT_Q_GRID: usize = 999;

/// Symmetric scenario: link parameters plus (n, q, q0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricScenario {
    params: SymmetricLinkParams,
    n: usize,
    q: f64,
    q0: f64,
}

/// Per-user and aggregate throughput, with the no-relay baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputReport {
    pub per_user: f64,
    /// n · per_user.
    pub aggregate: f64,
    pub no_relay_per_user: f64,
    /// aggregate / (n · no_relay_per_user).
    pub relay_gain: f64,
}

/// μ(q) evaluated on a grid, with the refined maximizer.
#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputCurve {
    pub points: Vec<(f64, f64)>,
    pub q_star: f64,
    pub mu_star: f64,
}

impl SymmetricScenario {
    pub fn new(params: SymmetricLinkParams, n: usize, q: f64, q0: f64) -> Result<Self, Error> {
        if n == 0 {
            return Err(Error::NoUsers);
        }
        for (name, value) in [("q", q), ("q0", q0)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    requirement: "a probability in [0, 1]",
                });
            }
        }
        Ok(Self { params, n, q, q0 })
    }

    pub fn params(&self) -> &SymmetricLinkParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn q0(&self) -> f64 {
        self.q0
    }

    fn p_user_relay(&self, i: usize) -> f64 {
        self.params
            .success(LinkKind::UserToRelay, i as u32, false)
            .expect("i >= 1")
    }

    fn p_user_dest(&self, i: usize, relay_active: bool) -> f64 {
        self.params
            .success(LinkKind::UserToDest, i as u32, relay_active)
            .expect("i >= 1")
    }

    fn p_relay_dest(&self, users: usize) -> f64 {
        self.params
            .success(LinkKind::RelayToDest, users as u32, true)
            .expect("always valid")
    }

    /// Service probability of a busy relay:
    /// `μ = Σ_{k=0}^{n} C(n,k) q0 q^k (1-q)^{n-k} P_{0d,k}`.
    pub fn service_rate(&self) -> f64 {
        self.q0 * self.service_factor()
    }

    fn service_factor(&self) -> f64 {
        (0..=self.n)
            .map(|k| binomial_pmf(self.n, k, self.q) * self.p_relay_dest(k))
            .sum()
    }

    /// Arrival distribution on empty-queue slots:
    ///
    /// ```text
    /// p_k^0 = Σ_{i=k}^{n} C(n,i) C(i,k) q^i (1-q)^{n-i}
    ///         · e_i^k (1 - e_i)^{i-k},   e_i = P_{0,i} (1 - P_{d,i,0})
    /// ```
    ///
    /// `e_i` is the probability that one of the i transmitted packets misses
    /// the destination but is captured by the silent relay.
    pub fn arrival_probabilities(&self) -> ArrivalProbabilities {
        let mut p0 = vec![0.0; self.n];
        for k in 1..=self.n {
            let mut acc = 0.0;
            for i in k..=self.n {
                let enq = self.p_user_relay(i) * (1.0 - self.p_user_dest(i, false));
                acc += binomial_pmf(self.n, i, self.q)
                    * binomial(i, k)
                    * enq.powi(k as i32)
                    * (1.0 - enq).powi((i - k) as i32);
            }
            p0[k - 1] = acc;
        }
        ArrivalProbabilities::new(p0, self.q0)
            .expect("symmetric arrival probabilities are valid by construction")
    }

    /// Queue characterization; unstable scenarios carry divergence markers.
    pub fn characterize_queue(&self) -> QueueCharacterization {
        characterize(
            &self.arrival_probabilities(),
            self.service_rate(),
            self.service_factor(),
        )
    }

    /// Per-user throughput with the relay:
    ///
    /// ```text
    /// μ = q0 P(Q>0) Σ_k C(n-1,k) q^{k+1} (1-q)^{n-1-k} P_{d,k+1,1}
    ///   + (1 - q0 P(Q>0)) Σ_k C(n-1,k) q^{k+1} (1-q)^{n-1-k}
    ///       [P_{d,k+1,0} + (1 - P_{d,k+1,0}) P_{0,k+1}]
    /// ```
    pub fn throughput(&self) -> Result<ThroughputReport, Error> {
        let queue = self.characterize_queue();
        let Some(prob_busy) = queue.prob_empty.value().map(|s0| 1.0 - s0) else {
            return Err(Error::UnstableQueue { q0min: queue.q0min });
        };
        let relay_on = self.q0 * prob_busy;
        let per_user = relay_on * self.tagged_user_sum(|i| self.p_user_dest(i, true))
            + (1.0 - relay_on)
                * self.tagged_user_sum(|i| {
                    let pd = self.p_user_dest(i, false);
                    pd + (1.0 - pd) * self.p_user_relay(i)
                });
        let no_relay_per_user = self.no_relay_per_user();
        let aggregate = self.n as f64 * per_user;
        Ok(ThroughputReport {
            per_user,
            aggregate,
            no_relay_per_user,
            relay_gain: aggregate / (self.n as f64 * no_relay_per_user),
        })
    }

    /// Baseline without the relay:
    /// `μ = Σ_k C(n-1,k) q^{k+1} (1-q)^{n-1-k} P_{d,k+1}`.
    pub fn no_relay_per_user(&self) -> f64 {
        self.tagged_user_sum(|i| self.p_user_dest(i, false))
    }

    /// Σ over the number of co-transmitters of a tagged user:
    /// `Σ_{k=0}^{n-1} C(n-1,k) q^{k+1} (1-q)^{n-1-k} f(k+1)`.
    fn tagged_user_sum(&self, f: impl Fn(usize) -> f64) -> f64 {
        (0..self.n)
            .map(|k| self.q * binomial_pmf(self.n - 1, k, self.q) * f(k + 1))
            .sum()
    }
}

/// μ(q) in the q0-free form: the fraction
///
/// ```text
/// F(q) = ΣΣ A_{i,k} x^i / (Σ B_k x^k + ΣΣ A_{i,k} x^i),   x = q/(1-q)
/// ```
///
/// replaces `q0 P(Q>0)` (both equal λ0/(λ0 + service factor) in the stable
/// regime), with coefficients
///
/// ```text
/// A_{i,k} = k C(n,i) C(i,k) e_i^k (1-e_i)^{i-k},   B_k = C(n,k) P_{0d,k}
/// ```
///
/// Powers of x are rescaled by x^-n when x > 1 so the fraction stays finite
/// arbitrarily close to q = 1.
pub fn throughput_of_q(params: &SymmetricLinkParams, n: usize, q: f64) -> Result<f64, Error> {
    if n == 0 {
        return Err(Error::NoUsers);
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter {
            name: "q",
            value: q,
            requirement: "inside the open interval (0, 1)",
        });
    }
    let x = q / (1.0 - q);
    // x^i, rescaled to at most 1 for numerical safety.
    let xpow = |i: usize| -> f64 {
        if x > 1.0 {
            x.powi(i as i32 - n as i32)
        } else {
            x.powi(i as i32)
        }
    };
    let succ = |kind: LinkKind, i: usize, relay: bool| -> f64 {
        params.success(kind, i as u32, relay).expect("valid pattern")
    };
    let mut arrivals = 0.0;
    for i in 1..=n {
        let enq = succ(LinkKind::UserToRelay, i, false)
            * (1.0 - succ(LinkKind::UserToDest, i, false));
        let mut per_i = 0.0;
        for k in 1..=i {
            per_i += k as f64
                * binomial(i, k)
                * enq.powi(k as i32)
                * (1.0 - enq).powi((i - k) as i32);
        }
        arrivals += binomial(n, i) * per_i * xpow(i);
    }
    let mut service = 0.0;
    for k in 0..=n {
        service += binomial(n, k) * succ(LinkKind::RelayToDest, k, true) * xpow(k);
    }
    let fraction = if arrivals == 0.0 { 0.0 } else { arrivals / (service + arrivals) };

    let mut relayed = 0.0;
    let mut direct = 0.0;
    for k in 0..n {
        let weight = binomial(n - 1, k) * q.powi(k as i32 + 1) * (1.0 - q).powi((n - 1 - k) as i32);
        relayed += weight * succ(LinkKind::UserToDest, k + 1, true);
        let pd = succ(LinkKind::UserToDest, k + 1, false);
        direct += weight * (pd + (1.0 - pd) * succ(LinkKind::UserToRelay, k + 1, false));
    }
    Ok(fraction * relayed + (1.0 - fraction) * direct)
}

/// Evaluate μ(q) on a grid (strictly inside (0, 1), strictly increasing) and
/// return the maximizer q*, refined by a golden-section search between the
/// grid neighbours of the best point.
pub fn throughput_vs_q(
    params: &SymmetricLinkParams,
    n: usize,
    grid: &[f64],
) -> Result<ThroughputCurve, Error> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter {
            name: "grid",
            value: 0.0,
            requirement: "a non-empty grid",
        });
    }
    for w in grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidParameter {
                name: "grid",
                value: w[1],
                requirement: "strictly increasing grid points",
            });
        }
    }
    let mut points = Vec::with_capacity(grid.len());
    let mut best = 0usize;
    for (idx, &q) in grid.iter().enumerate() {
        let mu = throughput_of_q(params, n, q)?;
        if mu > points.get(best).map_or(f64::NEG_INFINITY, |&(_, m): &(f64, f64)| m) {
            best = idx;
        }
        points.push((q, mu));
    }
    let lo = if best == 0 { grid[0] } else { grid[best - 1] };
    let hi = if best + 1 == grid.len() { grid[best] } else { grid[best + 1] };
    let (q_star, mu_star) = golden_section_max(|q| throughput_of_q(params, n, q).unwrap(), lo, hi);
    let (q_star, mu_star) = if mu_star >= points[best].1 {
        (q_star, mu_star)
    } else {
        points[best]
    };
    Ok(ThroughputCurve { points, q_star, mu_star })
}

/// Default 999-point scan of (0, 1).
pub fn default_q_grid() -> Vec<f64> {
    (1..=DEFAULT_Q_GRID)
        .map(|i| i as f64 / (DEFAULT_Q_GRID + 1) as f64)
        .collect()
}

/// Sweep the user count and return `(N*, aggregate at N*)`, skipping
/// unstable points; ties break toward the smaller n. Errors only when every
/// n in `1..=n_max` is unstable at the given (q, q0).
pub fn optimal_user_count(
    params: &SymmetricLinkParams,
    q: f64,
    q0: f64,
    n_max: usize,
) -> Result<(usize, f64), Error> {
    if n_max == 0 {
        return Err(Error::NoUsers);
    }
    let mut best: Option<(usize, f64)> = None;
    for n in 1..=n_max {
        let scenario = SymmetricScenario::new(*params, n, q, q0)?;
        match scenario.throughput() {
            Ok(report) => {
                if best.is_none_or(|(_, agg)| report.aggregate > agg) {
                    best = Some((n, report.aggregate));
                }
            }
            Err(Error::UnstableQueue { .. }) => continue,
            Err(other) => return Err(other),
        }
    }
    best.ok_or(Error::NoStableScenario)
}

/// C(n, k) as f64; multiplicative for small n, log-space above n = 30 to
/// avoid intermediate overflow.
pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    if n <= 30 {
        let mut acc = 1.0;
        for i in 0..k {
            acc = acc * (n - i) as f64 / (i + 1) as f64;
        }
        acc
    } else {
        let mut log_acc = 0.0;
        for i in 0..k {
            log_acc += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
        }
        log_acc.exp()
    }
}

/// C(n, k) q^k (1-q)^{n-k}.
fn binomial_pmf(n: usize, k: usize, q: f64) -> f64 {
    binomial(n, k) * q.powi(k as i32) * (1.0 - q).powi((n - k) as i32)
}

/// Golden-section maximization on [lo, hi].
fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..90 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    let q = 0.5 * (lo + hi);
    (q, f(q))
}
