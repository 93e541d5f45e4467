//! Deterministic batch arrivals: `m` customers arrive together every
//! `1/lambda` and each stays exactly `1/mu`.
//!
//! Under `mu > lambda` a batch departs before the next arrives, so the only
//! overlaps are the in-batch ones of duration exactly `1/mu`.

use crate::core::{Error, RiskReport, TransmissionSpec};

/// Probability that a threshold drawn from `transmission` is met by an
/// overlap of exactly `1/mu`.
fn batch_infection_prob(mu: f64, transmission: &TransmissionSpec) -> Result<f64, Error> {
    transmission.validate()?;
    match transmission {
        TransmissionSpec::Exponential { alpha } => Ok(1.0 - (-alpha / mu).exp()),
        TransmissionSpec::Hyperexponential { components } => Ok(components
            .iter()
            .map(|(q, a)| q * (1.0 - (-a / mu).exp()))
            .sum()),
        TransmissionSpec::PositionDependent { .. } | TransmissionSpec::DistanceThreshold { .. } => {
            Err(Error::UnsupportedCombination {
                detail: "batch arrivals define no queue positions".into(),
            })
        }
    }
}

/// `R0_sys` for the batch system: `(m-1) P(theta <= 1/mu)` — every IC
/// shares its whole stay with its `m-1` batch companions and nobody else.
///
/// # Errors
///
/// `BadRange` when `m < 1`; `UnsupportedCombination` for position-aware
/// transmission.
pub fn dmdm1_r0(m: u32, mu: f64, transmission: &TransmissionSpec) -> Result<RiskReport, Error> {
    if m < 1 {
        return Err(Error::bad_range("m", "m >= 1"));
    }
    if !mu.is_finite() || mu <= 0.0 {
        return Err(Error::NonPositiveRate { field: "mu".into() });
    }
    let p = batch_infection_prob(mu, transmission)?;
    RiskReport::analytic((m - 1) as f64 * p)
}

/// Second factorial moment of the in-system count:
/// `E[N(N-1)] = lambda m (m-1) / mu`.
///
/// # Errors
///
/// `Unstable` unless `mu > lambda`; `BadRange` when `m < 1`.
pub fn dmdm1_second_factorial(lambda: f64, mu: f64, m: u32) -> Result<f64, Error> {
    crate::core::QueueSpec::DmDm1 { lambda, mu, m }.validate()?;
    Ok(lambda * (m as f64) * ((m - 1) as f64) / mu)
}

/// Residual of the rate-balance identity
/// `p m lambda R0_sys = p mu P(theta <= 1/mu) E[N(N-1)]`
/// relating the per-sojourn count to the pairwise contact rate; zero up to
/// rounding for every valid parameter set.
///
/// # Errors
///
/// As the constituent operations; `BadRange` for `p` outside `[0,1]`.
pub fn dmdm1_identity_residual(
    lambda: f64,
    mu: f64,
    m: u32,
    alpha: f64,
    p: f64,
) -> Result<f64, Error> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::bad_range("p", "probability in [0,1]"));
    }
    let transmission = TransmissionSpec::Exponential { alpha };
    let r0 = dmdm1_r0(m, mu, &transmission)?.r0_sys;
    let e2 = dmdm1_second_factorial(lambda, mu, m)?;
    let theta_p = batch_infection_prob(mu, &transmission)?;
    Ok(p * m as f64 * lambda * r0 - p * mu * theta_p * e2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp(alpha: f64) -> TransmissionSpec {
        TransmissionSpec::Exponential { alpha }
    }

    #[test]
    fn lone_customer_infects_nobody() {
        assert_eq!(dmdm1_r0(1, 2.0, &exp(0.7)).unwrap().r0_sys, 0.0);
        assert_eq!(dmdm1_second_factorial(1.0, 2.0, 1).unwrap(), 0.0);
    }

    #[test]
    fn certain_transmission_saturates() {
        let r = dmdm1_r0(3, 1.0, &exp(1e9)).unwrap();
        assert!((r.r0_sys - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reference_value() {
        let r = dmdm1_r0(4, 2.0, &exp(1.0)).unwrap();
        let expect = 3.0 * (1.0 - (-0.5f64).exp());
        assert!((r.r0_sys - expect).abs() < 1e-15);
        assert!((r.r0_sys - 1.18040).abs() < 1e-5);
    }

    #[test]
    fn second_factorial_arithmetic() {
        assert!((dmdm1_second_factorial(1.0, 2.0, 3).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn identity_holds_on_random_parameters() {
        // Fixed pseudo-random grid; the identity is algebraic.
        let mut x: f64 = 0.37;
        for _ in 0..200 {
            x = (x * 7919.0 + 0.5).fract();
            let lambda = 0.1 + 1.9 * x;
            let mu = lambda * (1.1 + x);
            let m = 1 + (x * 9.0) as u32;
            let alpha = 0.05 + 3.0 * x;
            let p = x;
            let residual = dmdm1_identity_residual(lambda, mu, m, alpha, p).unwrap();
            assert!(residual.abs() < 1e-12, "residual {residual}");
        }
    }

    #[test]
    fn hyper_threshold_mixes() {
        let t = TransmissionSpec::Hyperexponential {
            components: vec![(0.5, 1.0), (0.5, 3.0)],
        };
        let r = dmdm1_r0(2, 1.0, &t).unwrap().r0_sys;
        let expect = 0.5 * (1.0 - (-1.0f64).exp()) + 0.5 * (1.0 - (-3.0f64).exp());
        assert!((r - expect).abs() < 1e-15);
    }

    #[test]
    fn position_transmission_unsupported() {
        let t = TransmissionSpec::DistanceThreshold { alpha: 0.5, d: 1 };
        assert!(matches!(
            dmdm1_r0(3, 1.0, &t),
            Err(Error::UnsupportedCombination { .. })
        ));
    }

    #[test]
    fn unstable_batch_rate_rejected() {
        assert!(dmdm1_second_factorial(2.0, 2.0, 3).is_err());
    }
}
