//! Batch-means confidence intervals.
//!
//! Each replication contributes one batch mean; the interval uses the
//! Student t quantile on replications-minus-one degrees of freedom.

use crate::core::SimEstimate;

/// Standard normal quantile (Acklam's rational approximation, absolute
/// error below 1.2e-9 on (0, 1)).
fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p > 1.0 - P_LOW {
        -normal_quantile(1.0 - p)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Student t quantile: exact at 1 and 2 degrees of freedom, a fourth-order
/// Cornish-Fisher expansion of the normal quantile above that.
pub(crate) fn t_quantile(p: f64, df: u32) -> f64 {
    match df {
        0 => f64::NAN,
        1 => (std::f64::consts::PI * (p - 0.5)).tan(),
        2 => {
            let a = 2.0 * p - 1.0;
            a * (2.0 / (1.0 - a * a)).sqrt()
        }
        _ => {
            let z = normal_quantile(p);
            let n = df as f64;
            let z2 = z * z;
            let z3 = z2 * z;
            let z5 = z3 * z2;
            let z7 = z5 * z2;
            let z9 = z7 * z2;
            z + (z3 + z) / (4.0 * n)
                + (5.0 * z5 + 16.0 * z3 + 3.0 * z) / (96.0 * n * n)
                + (3.0 * z7 + 19.0 * z5 + 17.0 * z3 - 15.0 * z) / (384.0 * n * n * n)
                + (79.0 * z9 + 776.0 * z7 + 1482.0 * z5 - 1920.0 * z3 - 945.0 * z)
                    / (92160.0 * n * n * n * n)
        }
    }
}

/// Collapse per-replication means into a point estimate with a symmetric
/// t interval. A single replication yields NaN spread fields.
pub(crate) fn summarize(means: &[f64], ci_level: f64, n_samples: u64, seed: u64) -> SimEstimate {
    let b = means.len();
    let mean = means.iter().sum::<f64>() / b as f64;
    let (std_error, half) = if b < 2 {
        (f64::NAN, f64::NAN)
    } else {
        let var = means.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (b - 1) as f64;
        let se = (var / b as f64).sqrt();
        let t = t_quantile(0.5 + ci_level / 2.0, (b - 1) as u32);
        (se, t * se)
    };
    SimEstimate {
        mean,
        std_error,
        ci_low: mean - half,
        ci_high: mean + half,
        n_samples,
        seed,
        replication_count: b as u32,
    }
}
