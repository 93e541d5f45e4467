//! Laplace transforms of sojourn-time overlaps.
//!
//! `W_i^(s)` is the time a newly arriving customer and customer `i` (counted
//! from the head of the line) spend in the system together, given `s`
//! customers present at the arrival instant. Its transform evaluated at the
//! transmission rate `alpha` is exactly the no-infection probability for
//! that pair, so `1 - transform` is the pairwise infection probability.

use crate::core::Error;

/// Evaluator for the overlap transform of a specific queueing model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OverlapTransform {
    /// Single-server FCFS: the overlap with position `i` is Erlang(i, mu).
    MM1 {
        /// Service rate.
        mu: f64,
    },
    /// `c`-server FCFS with the three-case overlap law.
    MMC {
        /// Number of servers.
        c: u32,
        /// Per-server service rate.
        mu: f64,
    },
}

impl OverlapTransform {
    /// Model tag, `"mm1"` or `"mmc"`.
    #[must_use]
    pub fn model_tag(&self) -> &'static str {
        match self {
            OverlapTransform::MM1 { .. } => "mm1",
            OverlapTransform::MMC { .. } => "mmc",
        }
    }

    /// Transform value for occupancy `s` seen at arrival and customer index
    /// `i` in `1..=s`, evaluated at rate `alpha`.
    ///
    /// # Errors
    ///
    /// `BadRange` on index violations, non-finite or negative `alpha`, or a
    /// non-positive service rate.
    pub fn eval(&self, s: u32, i: u32, alpha: f64) -> Result<f64, Error> {
        if i < 1 || i > s {
            return Err(Error::bad_range("i", "1 <= i <= s"));
        }
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::bad_range("alpha", "finite and >= 0"));
        }
        match *self {
            OverlapTransform::MM1 { mu } => {
                check_mu(mu)?;
                let eta = alpha / mu;
                Ok((1.0 / (1.0 + eta)).powi(i as i32))
            }
            OverlapTransform::MMC { c, mu } => {
                check_mu(mu)?;
                if c < 1 {
                    return Err(Error::bad_range("c", "c >= 1"));
                }
                let eta = alpha / mu;
                if s < c {
                    // Both in service; the overlap is min of two Exp(mu).
                    return Ok(2.0 / (eta + 2.0));
                }
                let cf = c as f64;
                // Closed form after summing the waiting-line geometry; the
                // exponent counts service completions until customer i
                // would reach the servers.
                let body = |e: u32| {
                    (eta * ((cf - 1.0) / (eta + cf)).powi(e as i32) + eta + 2.0)
                        / ((eta + 1.0) * (eta + 2.0))
                };
                if i <= c {
                    Ok(body(s - c + 1))
                } else {
                    Ok((cf / (eta + cf)).powi((i - c) as i32) * body(s - i + 1))
                }
            }
        }
    }
}

fn check_mu(mu: f64) -> Result<(), Error> {
    if !mu.is_finite() || mu <= 0.0 {
        return Err(Error::NonPositiveRate { field: "mu".into() });
    }
    Ok(())
}

/// Overlap transform for the M/M/c model; free-function form of
/// [`OverlapTransform::eval`] with tag `mmc`.
pub fn overlap_transform_mmc(s: u32, i: u32, c: u32, mu: f64, alpha: f64) -> Result<f64, Error> {
    OverlapTransform::MMC { c, mu }.eval(s, i, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_one_ignores_index() {
        let eta: f64 = 0.3;
        for (s, i) in [(1, 1), (2, 1), (2, 2), (3, 3)] {
            let v = overlap_transform_mmc(s, i, 4, 1.0, eta).unwrap();
            assert!((v - 2.0 / (eta + 2.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn single_server_reduces_to_mm1() {
        let mm1 = OverlapTransform::MM1 { mu: 1.3 };
        for s in 1..=6u32 {
            for i in 1..=s {
                let a = overlap_transform_mmc(s, i, 1, 1.3, 0.4).unwrap();
                let b = mm1.eval(s, i, 0.4).unwrap();
                assert!((a - b).abs() < 1e-15, "s={s} i={i}");
            }
        }
    }

    #[test]
    fn waiting_line_case_value() {
        // Monte Carlo of the defining overlap construction pins this value.
        let v = overlap_transform_mmc(5, 4, 2, 1.0, 0.3).unwrap();
        assert!((v - 0.5959906114).abs() < 1e-9);
    }

    #[test]
    fn unity_at_zero_rate() {
        for (s, i, c) in [(1, 1, 3), (4, 2, 2), (6, 5, 2), (3, 3, 1)] {
            assert!((overlap_transform_mmc(s, i, c, 2.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn strictly_decreasing_in_alpha() {
        let tr = OverlapTransform::MMC { c: 2, mu: 1.0 };
        for (s, i) in [(1, 1), (3, 2), (5, 4)] {
            let mut prev = tr.eval(s, i, 0.0).unwrap();
            for k in 1..=20 {
                let v = tr.eval(s, i, 0.25 * k as f64).unwrap();
                assert!(v < prev, "s={s} i={i} k={k}");
                assert!(v > 0.0 && v <= 1.0);
                prev = v;
            }
        }
    }

    #[test]
    fn rejects_index_out_of_range() {
        assert!(overlap_transform_mmc(3, 0, 2, 1.0, 0.5).is_err());
        assert!(overlap_transform_mmc(3, 4, 2, 1.0, 0.5).is_err());
    }
}
