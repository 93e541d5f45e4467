//! The multi-server family: M/M/c, the finite-buffer M/M/c/k, and the
//! generic state-weighted evaluator they share.

use crate::analytic::mm1::check_alpha;
use crate::analytic::{erlang_c, OverlapTransform};
use crate::core::{Error, Method, QueueSpec, RiskReport, StateDistribution};

/// `R0_sys` for an M/M/c FCFS queue with exponential thresholds.
///
/// Closed form in terms of the Erlang-C probability `C`, per-server load
/// `rho = lambda/(c mu)`, and `eta = alpha/mu`; the series over states and
/// overlap transforms is summed exactly.
///
/// # Errors
///
/// `Unstable` when `rho >= 1`.
pub fn mmc_r0(lambda: f64, mu: f64, c: u32, alpha: f64) -> Result<RiskReport, Error> {
    QueueSpec::MMC { lambda, mu, c }.validate()?;
    check_alpha(alpha)?;
    let cf = c as f64;
    let rho = lambda / (cf * mu);
    let eta = alpha / mu;
    let a = cf * rho;
    let big_c = erlang_c(c, rho)?;
    let r0 = 2.0
        * ((rho / (1.0 - rho)) * big_c + a
            - (1.0 / (eta + 2.0))
                * (big_c * (2.0 * a - cf * eta) / (eta + cf - a) + 2.0 * a));
    RiskReport::analytic(r0)
}

/// Exact stationary distribution of the number in system for M/M/c/k.
///
/// States `0..=k`; `tail_mass` is zero. The per-server load must satisfy
/// `rho < 1` (the regime where the finite buffer approximates the
/// infinite-buffer system it is compared against).
///
/// # Errors
///
/// `Unstable` when `rho >= 1`; `BadRange` when `k < c` or `c < 1`.
pub fn mmck_steady_state(
    lambda: f64,
    mu: f64,
    c: u32,
    k: u32,
) -> Result<StateDistribution<u32>, Error> {
    QueueSpec::MMCK { lambda, mu, c, k }.validate()?;
    let rho = lambda / (c as f64 * mu);
    if rho >= 1.0 {
        return Err(Error::Unstable {
            condition: "rho<1".into(),
        });
    }
    let a = lambda / mu;
    let mut weights = Vec::with_capacity((k + 1) as usize);
    let mut w = 1.0;
    weights.push(w);
    for s in 1..=k {
        w *= if s <= c { a / s as f64 } else { rho };
        weights.push(w);
    }
    let total: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    StateDistribution::new((0..=k).collect(), probs, 0.0)
}

/// `R0_sys` for M/M/c/k with exponential thresholds.
///
/// Averaged over all arriving ICs with the unconditional stationary
/// distribution: an IC arriving to a full system (state `k`) is blocked,
/// never enters, and contributes zero, so the sum runs over admitted-state
/// occupancies `s <= k-1` only.
///
/// # Errors
///
/// As [`mmck_steady_state`].
pub fn mmck_r0(lambda: f64, mu: f64, c: u32, k: u32, alpha: f64) -> Result<RiskReport, Error> {
    check_alpha(alpha)?;
    let pi = mmck_steady_state(lambda, mu, c, k)?;
    let transform = OverlapTransform::MMC { c, mu };
    let mut r0 = 0.0;
    for (&s, p) in pi.iter() {
        if s == 0 || s >= k {
            continue;
        }
        let mut inner = 0.0;
        for i in 1..=s {
            inner += 1.0 - transform.eval(s, i, alpha)?;
        }
        r0 += p * inner;
    }
    RiskReport::analytic(2.0 * r0)
}

/// Largest tail bound accepted before `generic_r0` refuses to evaluate.
const GENERIC_TAIL_LIMIT: f64 = 1e-3;

/// `R0_sys` from an arbitrary occupancy distribution and overlap transform:
/// `2 sum_s pi(s) sum_{i=1..s} (1 - transform(s, i, alpha))`.
///
/// The reported `truncation_error` bounds the contribution of the missing
/// tail as `2 tail_mass (s_max + 1)`, exact in order for tails dominated by
/// their first missing state (geometric and faster); heavier tails need a
/// finer truncation before calling this.
///
/// # Errors
///
/// `NoConvergence` when that bound exceeds `1e-3`; transform errors
/// propagate.
pub fn generic_r0(
    pi: &StateDistribution<u32>,
    transform: &OverlapTransform,
    alpha: f64,
) -> Result<RiskReport, Error> {
    check_alpha(alpha)?;
    let s_max = pi.states().iter().copied().max().unwrap_or(0);
    let bound = 2.0 * pi.tail_mass() * (s_max + 1) as f64;
    if bound > GENERIC_TAIL_LIMIT {
        return Err(Error::NoConvergence {
            context: format!("state distribution tail bound {bound:.3e} too coarse"),
        });
    }
    let mut r0 = 0.0;
    for (&s, p) in pi.iter() {
        let mut inner = 0.0;
        for i in 1..=s {
            inner += 1.0 - transform.eval(s, i, alpha)?;
        }
        r0 += p * inner;
    }
    RiskReport::new(2.0 * r0, None, None, Method::Analytic, Some(bound))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Truncated M/M/c occupancy distribution for cross-checks.
    fn mmc_pi(lambda: f64, mu: f64, c: u32, s_max: u32) -> StateDistribution<u32> {
        let rho = lambda / (c as f64 * mu);
        let a = lambda / mu;
        let mut weights = vec![1.0];
        for s in 1..=s_max {
            let prev = weights[(s - 1) as usize];
            weights.push(prev * if s <= c { a / s as f64 } else { rho });
        }
        // Closed-form remainder of the geometric block beyond s_max.
        let tail = weights[s_max as usize] * rho / (1.0 - rho);
        let total: f64 = weights.iter().sum::<f64>() + tail;
        StateDistribution::new(
            (0..=s_max).collect(),
            weights.iter().map(|w| w / total).collect(),
            tail / total,
        )
        .unwrap()
    }

    #[test]
    fn closed_form_reference_value() {
        let r = mmc_r0(5.0, 25.0 / 9.0, 2, 1.0 / 30.0).unwrap();
        assert!((r.r0_sys - 1.0724925521350528).abs() < 1e-12, "got {}", r.r0_sys);
    }

    #[test]
    fn closed_form_matches_series() {
        for (lambda, mu, c, alpha) in [
            (5.0, 25.0 / 9.0, 2, 1.0 / 30.0),
            (2.0, 1.0, 4, 0.2),
            (0.9, 1.0, 1, 0.7),
            (6.5, 1.0, 8, 0.05),
        ] {
            let closed = mmc_r0(lambda, mu, c, alpha).unwrap().r0_sys;
            let pi = mmc_pi(lambda, mu, c, 400);
            let series = generic_r0(&pi, &OverlapTransform::MMC { c, mu }, alpha)
                .unwrap()
                .r0_sys;
            assert!(
                (closed - series).abs() < 1e-8,
                "c={c}: closed {closed} vs series {series}"
            );
        }
    }

    #[test]
    fn single_server_reduces_to_mm1() {
        for (lambda, mu, alpha) in [(3.0, 4.0, 0.5), (0.95, 1.0, 1.0), (0.2, 0.9, 2.0)] {
            let a = mmc_r0(lambda, mu, 1, alpha).unwrap().r0_sys;
            let b = crate::analytic::mm1_r0(lambda, mu, alpha).unwrap().r0_sys;
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn steady_state_single_buffer() {
        let pi = mmck_steady_state(3.0, 4.0, 1, 1).unwrap();
        let rho = 0.75;
        assert!((pi.probs()[0] - 1.0 / (1.0 + rho)).abs() < 1e-15);
        assert!((pi.probs()[1] - rho / (1.0 + rho)).abs() < 1e-15);
    }

    #[test]
    fn steady_state_normalizes() {
        for (lambda, mu, c, k) in [(5.0, 25.0 / 9.0, 2, 12), (1.0, 2.0, 3, 7), (0.3, 1.0, 1, 4)] {
            let pi = mmck_steady_state(lambda, mu, c, k).unwrap();
            let total: f64 = pi.probs().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert_eq!(pi.tail_mass(), 0.0);
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn loss_probability_reference_point() {
        let (lambda, mu, c, k) = (5.0, 25.0 / 9.0, 2u32, 12u32);
        let pi = mmck_steady_state(lambda, mu, c, k).unwrap();
        let loss = pi.probs()[k as usize];
        assert!((loss - 0.0406).abs() < 1e-4, "got {loss}");
        assert!(loss < 0.05);

        // Brute-force check: solve pi Q = 0 on the 13 states by Gaussian
        // elimination, replacing one balance equation with normalization.
        let n = (k + 1) as usize;
        let mut m = vec![vec![0.0f64; n + 1]; n];
        for col in 0..n {
            let s = col as u32;
            if s < k {
                m[(s + 1) as usize][col] += lambda; // flow s -> s+1
                m[col][col] -= lambda;
            }
            if s > 0 {
                let rate = s.min(c) as f64 * mu;
                m[(s - 1) as usize][col] += rate; // flow s -> s-1
                m[col][col] -= rate;
            }
        }
        m[n - 1].fill(1.0);
        for col in 0..n {
            let pivot = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
            m.swap(col, pivot);
            for row in 0..n {
                if row != col && m[row][col] != 0.0 {
                    let factor = m[row][col] / m[col][col];
                    for j in col..=n {
                        m[row][j] -= factor * m[col][j];
                    }
                }
            }
        }
        for (s, p) in pi.probs().iter().enumerate() {
            let brute = m[s][n] / m[s][s];
            assert!((p - brute).abs() < 1e-12, "state {s}: {p} vs {brute}");
        }
    }

    #[test]
    fn finite_buffer_reference_value() {
        let r = mmck_r0(5.0, 25.0 / 9.0, 2, 12, 1.0 / 30.0).unwrap();
        assert!(
            (r.r0_sys - 0.20376476966673424).abs() < 1e-12,
            "got {}",
            r.r0_sys
        );
    }

    #[test]
    fn large_buffer_recovers_infinite_system_from_below() {
        let unbounded = mmc_r0(5.0, 25.0 / 9.0, 2, 1.0 / 30.0).unwrap().r0_sys;
        let mut prev = 0.0;
        for k in [2u32, 4, 8, 16, 32, 64, 128, 256] {
            let v = mmck_r0(5.0, 25.0 / 9.0, 2, k, 1.0 / 30.0).unwrap().r0_sys;
            assert!(v >= prev, "k={k} not monotone");
            assert!(v <= unbounded + 1e-12);
            prev = v;
        }
        assert!((unbounded - prev).abs() < 1e-6);
    }

    #[test]
    fn single_admitted_customer_never_infects() {
        let r = mmck_r0(0.5, 1.0, 1, 1, 0.8).unwrap();
        assert_eq!(r.r0_sys, 0.0);
    }

    #[test]
    fn overloaded_finite_buffer_rejected() {
        assert!(matches!(
            mmck_steady_state(10.0, 1.0, 2, 5),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn generic_r0_degenerate_empty_distribution() {
        let pi = StateDistribution::new(vec![0u32], vec![1.0], 0.0).unwrap();
        let r = generic_r0(&pi, &OverlapTransform::MM1 { mu: 1.0 }, 0.5).unwrap();
        assert_eq!(r.r0_sys, 0.0);
    }

    #[test]
    fn generic_r0_matches_mm1_closed_form() {
        let (lambda, mu, alpha) = (3.0, 4.0, 0.5);
        let rho: f64 = lambda / mu;
        let s_max = 220u32;
        let probs: Vec<f64> = (0..=s_max).map(|s| (1.0 - rho) * rho.powi(s as i32)).collect();
        let tail = rho.powi((s_max + 1) as i32);
        let pi = StateDistribution::new((0..=s_max).collect(), probs, tail).unwrap();
        let r = generic_r0(&pi, &OverlapTransform::MM1 { mu }, alpha).unwrap();
        let closed = crate::analytic::mm1_r0(lambda, mu, alpha).unwrap().r0_sys;
        assert!((r.r0_sys - closed).abs() < r.truncation_error.unwrap() + 1e-12);
    }

    #[test]
    fn generic_r0_matches_mmc_closed_form_at_tight_tol() {
        let (lambda, mu, c, alpha) = (2.0, 1.0, 4, 0.2);
        let pi = mmc_pi(lambda, mu, c, 60);
        let r = generic_r0(&pi, &OverlapTransform::MMC { c, mu }, alpha).unwrap();
        let closed = mmc_r0(lambda, mu, c, alpha).unwrap().r0_sys;
        assert!((r.r0_sys - closed).abs() < 1e-10 + r.truncation_error.unwrap());
    }

    #[test]
    fn generic_r0_refuses_coarse_tail() {
        let pi = StateDistribution::new(vec![0u32, 1], vec![0.5, 0.4], 0.1).unwrap();
        assert!(matches!(
            generic_r0(&pi, &OverlapTransform::MM1 { mu: 1.0 }, 0.5),
            Err(Error::NoConvergence { .. })
        ));
    }
}
