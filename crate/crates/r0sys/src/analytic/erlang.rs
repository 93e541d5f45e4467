//! Erlang loss and delay formulas.

use crate::core::Error;

/// Erlang-B blocking probability for offered load `a` on `c` servers,
/// via the standard recurrence; avoids factorials, stable for any `c`.
pub(crate) fn erlang_b(c: u32, a: f64) -> f64 {
    let mut b = 1.0;
    for m in 1..=c {
        b = a * b / (m as f64 + a * b);
    }
    b
}

/// Erlang-C delay probability: the chance an arrival to an M/M/c system
/// with per-server load `rho` must wait.
///
/// # Errors
///
/// `BadRange` unless `c >= 1` and `0 < rho < 1`.
pub fn erlang_c(c: u32, rho: f64) -> Result<f64, Error> {
    if c < 1 {
        return Err(Error::bad_range("c", "c >= 1"));
    }
    if !rho.is_finite() || rho <= 0.0 || rho >= 1.0 {
        return Err(Error::bad_range("rho", "0 < rho < 1"));
    }
    let a = c as f64 * rho;
    let b = erlang_b(c, a);
    Ok(b / (1.0 - rho * (1.0 - b)))
}
