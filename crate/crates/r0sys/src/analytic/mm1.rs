//! The M/M/1 family: baseline FCFS, designated time windows,
//! hyperexponential thresholds, and the two position-aware transmission
//! models.

use crate::analytic::SERIES_TERM_CAP;
use crate::core::{Error, PositionRates, QueueSpec, RiskReport};

/// `R0_sys` for an M/M/1 FCFS queue with exponential transmission
/// thresholds of rate `alpha`.
///
/// With `rho = lambda/mu` and `eta = alpha/mu`,
/// `r0_sys = 2 (rho/(1-rho)) (eta/(eta+1-rho))`.
///
/// # Errors
///
/// `Unstable` when `rho >= 1`; `NonPositiveRate`/`BadRange` on bad inputs.
pub fn mm1_r0(lambda: f64, mu: f64, alpha: f64) -> Result<RiskReport, Error> {
    QueueSpec::MM1 { lambda, mu }.validate()?;
    check_alpha(alpha)?;
    let rho = lambda / mu;
    let eta = alpha / mu;
    let r0 = 2.0 * (rho / (1.0 - rho)) * (eta / (eta + 1.0 - rho));
    RiskReport::analytic(r0)
}

/// Class-resolved `R0` under designated time windows.
///
/// The facility serves the high-risk class a fraction `f` of the time and
/// the low-risk class the rest; each class sees a private M/M/1 with
/// window-local load `rho_T = (lambda_T/f_T)/mu`. With class weight
/// `q_T = lambda_T/(lambda_h+lambda_l)`,
/// `r0_T = 2 q_T (rho_T/(1-rho_T)) (eta/(eta+1-rho_T))` and `r0_sys` is the
/// sum.
///
/// # Errors
///
/// `Unstable` when either window-local load reaches 1.
pub fn windows_r0(
    lambda_h: f64,
    lambda_l: f64,
    mu: f64,
    alpha: f64,
    f: f64,
) -> Result<RiskReport, Error> {
    QueueSpec::Windows {
        lambda_h,
        lambda_l,
        mu,
        f,
    }
    .validate()?;
    check_alpha(alpha)?;
    let eta = alpha / mu;
    let total = lambda_h + lambda_l;
    let class = |lambda_t: f64, f_t: f64| {
        let rho = lambda_t / f_t / mu;
        2.0 * (lambda_t / total) * (rho / (1.0 - rho)) * (eta / (eta + 1.0 - rho))
    };
    let r0_h = class(lambda_h, f);
    let r0_l = class(lambda_l, 1.0 - f);
    RiskReport::new(
        r0_h + r0_l,
        Some(r0_h),
        Some(r0_l),
        crate::core::Method::Analytic,
        None,
    )
}

/// `R0` under hyperexponentially distributed thresholds: evaluate `base_r0`
/// at each component rate and mix with the component weights.
///
/// Class splits and truncation bounds mix the same way; the split is kept
/// only when every component provides one.
///
/// # Errors
///
/// `BadRange` on a malformed mixture; errors from `base_r0` propagate.
pub fn hyper_r0<F>(base_r0: F, components: &[(f64, f64)]) -> Result<RiskReport, Error>
where
    F: Fn(f64) -> Result<RiskReport, Error>,
{
    crate::core::TransmissionSpec::Hyperexponential {
        components: components.to_vec(),
    }
    .validate()?;
    let mut r0_sys = 0.0;
    let mut r0_h = Some(0.0);
    let mut r0_l = Some(0.0);
    let mut trunc: Option<f64> = None;
    let mut method = crate::core::Method::Analytic;
    for &(q, alpha_j) in components {
        let part = base_r0(alpha_j)?;
        r0_sys += q * part.r0_sys;
        r0_h = match (r0_h, part.r0_h) {
            (Some(acc), Some(v)) => Some(acc + q * v),
            _ => None,
        };
        r0_l = match (r0_l, part.r0_l) {
            (Some(acc), Some(v)) => Some(acc + q * v),
            _ => None,
        };
        if let Some(t) = part.truncation_error {
            trunc = Some(trunc.unwrap_or(0.0) + q * t);
        }
        method = part.method;
    }
    RiskReport::new(r0_sys, r0_h, r0_l, method, trunc)
}

/// `R0_sys` when transmission reaches only customers within `d` queue
/// positions of the IC.
///
/// In a FCFS single queue the position gap of a pair is its arrival-rank
/// gap and never changes, so the model truncates the in-reach set to the
/// nearest `d` neighbors on each side. The defining sum collapses to
/// `mm1_r0(lambda, mu, alpha) * (1 - rho^d)`.
///
/// # Errors
///
/// `Unstable` when `rho >= 1`; `BadRange` when `d < 1`.
pub fn distance_r0_mm1(lambda: f64, mu: f64, alpha: f64, d: u32) -> Result<RiskReport, Error> {
    if d < 1 {
        return Err(Error::bad_range("d", "d >= 1"));
    }
    let full = mm1_r0(lambda, mu, alpha)?;
    let rho = lambda / mu;
    RiskReport::analytic(full.r0_sys * (1.0 - rho.powi(d as i32)))
}

/// `R0_sys` for an M/M/1 queue where the transmission rate between an IC at
/// position `m` and a susceptible at position `j` is `rates.rate(m, j)`.
///
/// A customer is in position `m` when it departs after `m-1` more
/// departures; positions shift down in lockstep at each departure, so a
/// pair formed at an arrival walks through a deterministic sequence of
/// position pairs, each episode lasting one Exp(mu) service. The
/// no-infection probability of one episode at rate `a` is `1/(1 + a/mu)`,
/// and the pairwise infection probability is one minus the product over
/// episodes. Summing over the stationary arrival-seen state `s` and both
/// pair directions (the reverse direction covers customers arriving after
/// the IC) gives the series evaluated here, truncated once the geometric
/// tail bound `2 rho^{S+1}((S+1)(1-rho)+rho)/(1-rho)` drops below `tol`.
///
/// # Errors
///
/// `Unstable` when `rho >= 1`; `NoConvergence` when the tail bound cannot
/// reach `tol` within the term cap.
pub fn position_r0_mm1(
    lambda: f64,
    mu: f64,
    rates: &PositionRates,
    tol: f64,
) -> Result<RiskReport, Error> {
    QueueSpec::MM1 { lambda, mu }.validate()?;
    rates.validate()?;
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::bad_range("tol", "finite and > 0"));
    }
    let rho = lambda / mu;
    let support = rates.support();
    let out_factor = 1.0 / (1.0 + rates.outside_rate() / mu);

    // Survival product for one pair direction. The IC walks positions
    // s+1-j while the target walks i-j (j = episodes elapsed); `swap`
    // reverses infector and target for the after-arrival direction.
    let survival = |s: u32, i: u32, swap: bool| -> f64 {
        let first_inside = (s + 1).saturating_sub(support).max(i.saturating_sub(support));
        let n_outside = first_inside.min(i);
        let mut p = out_factor.powi(n_outside as i32);
        for j in n_outside..i {
            let (ic, target) = (s + 1 - j, i - j);
            let rate = if swap {
                rates.rate(target, ic)
            } else {
                rates.rate(ic, target)
            };
            p *= 1.0 / (1.0 + rate / mu);
        }
        p
    };

    let mut r0 = 0.0;
    let mut pi = 1.0 - rho; // pi(0), then multiplied up by rho each state
    let mut bound = f64::INFINITY;
    let mut s = 0u32;
    while bound >= tol {
        if s == SERIES_TERM_CAP {
            return Err(Error::NoConvergence {
                context: format!("position series tail bound {bound:.3e} > tol after {s} states"),
            });
        }
        s += 1;
        pi *= rho;
        let mut inner = 0.0;
        for i in 1..=s {
            inner += (1.0 - survival(s, i, false)) + (1.0 - survival(s, i, true));
        }
        r0 += pi * inner;
        let sf = s as f64;
        bound = 2.0 * rho.powi((s + 1) as i32) * ((sf + 1.0) * (1.0 - rho) + rho) / (1.0 - rho);
    }
    RiskReport::new(
        r0,
        None,
        None,
        crate::core::Method::Analytic,
        Some(bound),
    )
}

pub(crate) fn check_alpha(alpha: f64) -> Result<(), Error> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::bad_range("alpha", "finite and >= 0"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_reference_points() {
        assert!((mm1_r0(3.0, 4.0, 0.5).unwrap().r0_sys - 2.0).abs() < 1e-12);
        assert!((mm1_r0(0.95, 1.0, 1.0).unwrap().r0_sys - 36.190476190476154).abs() < 1e-9);
    }

    #[test]
    fn empty_system_limit() {
        assert!(mm1_r0(1e-12, 1.0, 0.5).unwrap().r0_sys < 1e-11);
    }

    #[test]
    fn certain_transmission_limit_is_twice_mean_occupancy() {
        let rho: f64 = 0.6;
        let v = mm1_r0(rho, 1.0, 1e6).unwrap().r0_sys;
        assert!((v - 2.0 * rho / (1.0 - rho)).abs() < 1e-5);
    }

    #[test]
    fn unstable_rejected() {
        assert!(matches!(
            mm1_r0(4.0, 4.0, 0.5),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn windows_symmetric_half_matches_fcfs() {
        let r = windows_r0(1.5, 1.5, 4.0, 0.5, 0.5).unwrap();
        assert!((r.r0_sys - 2.0).abs() < 1e-12);
        assert!((r.r0_h.unwrap() - 1.0).abs() < 1e-12);
        assert!((r.r0_l.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn windows_skewed_split() {
        let r = windows_r0(1.5, 1.5, 4.0, 0.5, 15.0 / 34.0).unwrap();
        assert!((r.r0_h.unwrap() - 2.5757575757575752).abs() < 1e-12);
        assert!((r.r0_l.unwrap() - 0.5617391304347825).abs() < 1e-12);
    }

    #[test]
    fn windows_near_critical_blows_up() {
        let f = 1.5 / 4.0 * (1.0 + 1e-9);
        let r = windows_r0(1.5, 1.5, 4.0, 0.5, f).unwrap();
        assert!(r.r0_h.unwrap() > 1e6);
    }

    #[test]
    fn hyper_degenerate_and_collapsed_mixtures() {
        let base = |a: f64| mm1_r0(3.0, 4.0, a);
        let single = hyper_r0(base, &[(1.0, 0.5)]).unwrap();
        assert!((single.r0_sys - 2.0).abs() < 1e-12);
        let split = hyper_r0(base, &[(0.5, 0.5), (0.5, 0.5)]).unwrap();
        assert!((split.r0_sys - 2.0).abs() < 1e-12);
    }

    #[test]
    fn hyper_is_a_convex_combination() {
        let base = |a: f64| mm1_r0(3.0, 4.0, a);
        let lo = base(0.2).unwrap().r0_sys;
        let hi = base(0.9).unwrap().r0_sys;
        let mixed = hyper_r0(base, &[(0.3, 0.2), (0.7, 0.9)]).unwrap().r0_sys;
        assert!(lo < mixed && mixed < hi);
        assert!((mixed - (0.3 * lo + 0.7 * hi)).abs() < 1e-12);
    }

    #[test]
    fn distance_one_reference_value() {
        // Truncated-sum oracle 2(1-rho) sum_s rho^s (1-(1/(1+eta))^s).
        let r = distance_r0_mm1(3.0, 4.0, 0.5, 1).unwrap();
        assert!((r.r0_sys - 0.5).abs() < 1e-12);
        let (rho, beta): (f64, f64) = (0.75, 1.0 / 1.125);
        let mut oracle = 0.0;
        for s in 1..2000 {
            oracle += 2.0 * (1.0 - rho) * rho.powi(s) * (1.0 - beta.powi(s));
        }
        assert!((r.r0_sys - oracle).abs() < 1e-12);
    }

    #[test]
    fn distance_matches_defining_sum_on_grid() {
        for &rho in &[0.2, 0.5, 0.8, 0.95] {
            for &eta in &[0.05, 0.3, 1.5] {
                for d in [1u32, 2, 3, 7] {
                    let (mu, lambda, alpha) = (1.0, rho, eta);
                    let closed = distance_r0_mm1(lambda, mu, alpha, d).unwrap().r0_sys;
                    let beta = 1.0 / (1.0 + eta);
                    let mut sum = 0.0;
                    for s in 1..4000u32 {
                        let pi = (1.0 - rho) * rho.powi(s as i32);
                        let mut inner = 0.0;
                        for gap in 1..=s.min(d) {
                            inner += 1.0 - beta.powi((s - gap + 1) as i32);
                        }
                        sum += 2.0 * pi * inner;
                    }
                    assert!(
                        (closed - sum).abs() < 1e-9,
                        "rho={rho} eta={eta} d={d}: {closed} vs {sum}"
                    );
                }
            }
        }
    }

    #[test]
    fn distance_full_reach_recovers_baseline() {
        // Deficit is exactly full * rho^d, about 2.7e-7 at d=55.
        let full = mm1_r0(0.75, 1.0, 0.125).unwrap().r0_sys;
        let capped = distance_r0_mm1(0.75, 1.0, 0.125, 55).unwrap().r0_sys;
        assert!((full - capped).abs() < 1e-6);
        assert!(capped < full);
    }

    #[test]
    fn position_constant_rate_reduces_to_baseline() {
        let rates = PositionRates::Constant { alpha: 0.5 };
        let r = position_r0_mm1(3.0, 4.0, &rates, 1e-10).unwrap();
        assert!((r.r0_sys - 2.0).abs() < 1e-9);
        assert!(r.truncation_error.unwrap() < 1e-10);
    }

    #[test]
    fn position_zero_rates_give_zero() {
        let rates = PositionRates::Dense {
            support: 3,
            outside: 0.0,
            rates: vec![vec![0.0; 3]; 3],
        };
        let r = position_r0_mm1(3.0, 4.0, &rates, 1e-10).unwrap();
        assert_eq!(r.r0_sys, 0.0);
    }

    #[test]
    fn position_snake_gravity_value() {
        let rates = PositionRates::snake_gravity(3, 4, 6.0, 1.0).unwrap();
        let r = position_r0_mm1(3.0, 4.0, &rates, 1e-12).unwrap();
        assert!(
            (r.r0_sys - 0.07285820655498958).abs() < 1e-10,
            "got {}",
            r.r0_sys
        );
    }

    #[test]
    fn position_outside_rate_feeds_far_pairs() {
        // Dense block of zeros with a nonzero outside rate must still beat
        // a pure-zero table: far pairs transmit.
        let zeros = PositionRates::Dense {
            support: 2,
            outside: 0.4,
            rates: vec![vec![0.0; 2]; 2],
        };
        let r = position_r0_mm1(3.0, 4.0, &zeros, 1e-10).unwrap();
        assert!(r.r0_sys > 0.1);
        let constant = position_r0_mm1(3.0, 4.0, &PositionRates::Constant { alpha: 0.4 }, 1e-10)
            .unwrap()
            .r0_sys;
        assert!(r.r0_sys < constant);
    }
}
