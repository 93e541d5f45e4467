//! Model and transmission parameter types shared by every other module.
//!
//! All rates share one implicit time unit chosen by the caller; the library
//! never converts units.

use serde::{Deserialize, Serialize};

/// Errors produced by validation and numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A stability condition does not hold; the condition is named.
    #[error("unstable: {condition}")]
    Unstable {
        /// The violated condition, e.g. `"rho<1"`.
        condition: String,
    },
    /// A rate parameter is zero, negative, or non-finite.
    #[error("non-positive rate: {field}")]
    NonPositiveRate {
        /// Name of the offending field.
        field: String,
    },
    /// A parameter lies outside its admissible range.
    #[error("bad range: {field}: {detail}")]
    BadRange {
        /// Name of the offending field.
        field: String,
        /// What the admissible range is.
        detail: String,
    },
    /// An iterative computation failed to reach its tolerance.
    #[error("no convergence: {context}")]
    NoConvergence {
        /// Which computation and at what size it gave up.
        context: String,
    },
    /// The model/transmission combination is not defined.
    #[error("unsupported combination: {detail}")]
    UnsupportedCombination {
        /// Why the combination is rejected.
        detail: String,
    },
    /// A root-finding target is unattainable on the search interval.
    #[error("no root: {detail}")]
    NoRoot {
        /// Description of the failed bracket.
        detail: String,
    },
}

impl Error {
    fn unstable(condition: &str) -> Self {
        Error::Unstable {
            condition: condition.to_string(),
        }
    }

    fn non_positive(field: &str) -> Self {
        Error::NonPositiveRate {
            field: field.to_string(),
        }
    }

    /// Construct a `BadRange` error.
    pub fn bad_range(field: &str, detail: &str) -> Self {
        Error::BadRange {
            field: field.to_string(),
            detail: detail.to_string(),
        }
    }
}

/// Queueing model families covered by the library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum QueueSpec {
    /// Single-server Markovian queue, FCFS.
    MM1 {
        /// Arrival rate.
        lambda: f64,
        /// Service rate.
        mu: f64,
    },
    /// `c`-server Markovian queue, FCFS.
    MMC {
        /// Arrival rate.
        lambda: f64,
        /// Per-server service rate.
        mu: f64,
        /// Number of servers.
        c: u32,
    },
    /// `c`-server Markovian queue with at most `k` customers in system.
    MMCK {
        /// Arrival rate.
        lambda: f64,
        /// Per-server service rate.
        mu: f64,
        /// Number of servers.
        c: u32,
        /// Occupancy cap including customers in service; `k >= c`.
        k: u32,
    },
    /// Two-class single-server queue with preemptive high-class priority.
    PriorityMM1 {
        /// High-class arrival rate.
        lambda_h: f64,
        /// Low-class arrival rate.
        lambda_l: f64,
        /// Service rate.
        mu: f64,
    },
    /// Designated time windows: the facility alternates between serving the
    /// high-risk class (a fraction `f` of the time) and the low-risk class.
    Windows {
        /// High-class arrival rate.
        lambda_h: f64,
        /// Low-class arrival rate.
        lambda_l: f64,
        /// Service rate.
        mu: f64,
        /// Fraction of time open to the high-risk class, in (0,1).
        f: f64,
    },
    /// Deterministic batch arrivals with deterministic in-system times.
    DmDm1 {
        /// Batch arrival rate (customers arrive `m` at a time).
        lambda: f64,
        /// Reciprocal of the deterministic in-system time.
        mu: f64,
        /// Batch size.
        m: u32,
    },
}

fn check_rate(value: f64, field: &str) -> Result<(), Error> {
    if !value.is_finite() || value <= 0.0 {
        return Err(Error::non_positive(field));
    }
    Ok(())
}

fn check_rate_allow_zero(value: f64, field: &str) -> Result<(), Error> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::non_positive(field));
    }
    Ok(())
}

impl QueueSpec {
    /// Check every invariant of the variant; errors name the violated
    /// condition.
    pub fn validate(&self) -> Result<(), Error> {
        match *self {
            QueueSpec::MM1 { lambda, mu } => {
                check_rate(lambda, "lambda")?;
                check_rate(mu, "mu")?;
                if lambda >= mu {
                    return Err(Error::unstable("rho<1"));
                }
            }
            QueueSpec::MMC { lambda, mu, c } => {
                check_rate(lambda, "lambda")?;
                check_rate(mu, "mu")?;
                if c < 1 {
                    return Err(Error::bad_range("c", "c >= 1"));
                }
                if lambda >= c as f64 * mu {
                    return Err(Error::unstable("rho<1"));
                }
            }
            QueueSpec::MMCK { lambda, mu, c, k } => {
                check_rate(lambda, "lambda")?;
                check_rate(mu, "mu")?;
                if c < 1 {
                    return Err(Error::bad_range("c", "c >= 1"));
                }
                if k < c {
                    return Err(Error::bad_range("k", "k >= c"));
                }
                // Finite buffers are ergodic for any load; rho < 1 is
                // enforced only by mmck_r0, which states it.
            }
            QueueSpec::PriorityMM1 {
                lambda_h,
                lambda_l,
                mu,
            } => {
                // A zero class rate is the degenerate single-class system.
                check_rate_allow_zero(lambda_h, "lambda_h")?;
                check_rate_allow_zero(lambda_l, "lambda_l")?;
                check_rate(lambda_h + lambda_l, "lambda_h+lambda_l")?;
                check_rate(mu, "mu")?;
                if lambda_h >= mu {
                    return Err(Error::unstable("rho_h<1"));
                }
                if lambda_h + lambda_l >= mu {
                    return Err(Error::unstable("rho<1"));
                }
            }
            QueueSpec::Windows {
                lambda_h,
                lambda_l,
                mu,
                f,
            } => {
                check_rate(lambda_h, "lambda_h")?;
                check_rate(lambda_l, "lambda_l")?;
                check_rate(mu, "mu")?;
                if !(f > 0.0 && f < 1.0) || !f.is_finite() {
                    return Err(Error::bad_range("f", "0 < f < 1"));
                }
                if lambda_h / f >= mu {
                    return Err(Error::unstable("lambda_h/f < mu"));
                }
                if lambda_l / (1.0 - f) >= mu {
                    return Err(Error::unstable("lambda_l/(1-f) < mu"));
                }
            }
            QueueSpec::DmDm1 { lambda, mu, m } => {
                check_rate(lambda, "lambda")?;
                check_rate(mu, "mu")?;
                if m < 1 {
                    return Err(Error::bad_range("m", "m >= 1"));
                }
                if mu <= lambda {
                    return Err(Error::unstable("mu>lambda"));
                }
            }
        }
        Ok(())
    }
}

/// Validate a [`QueueSpec`]; free-function form of [`QueueSpec::validate`].
pub fn validate(spec: &QueueSpec) -> Result<(), Error> {
    spec.validate()
}

/// Position-dependent transmission rates `alpha_{m,j}` for an IC at queue
/// position `m` and a susceptible customer at position `j`.
///
/// Positions are 1-based; position 1 is in service. Rates may be asymmetric.
/// Beyond the declared `support` either a constant `outside` rate or zero
/// applies, which keeps series evaluation finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PositionRates {
    /// The same rate for every ordered pair of positions.
    Constant {
        /// Transmission rate applied to every pair.
        alpha: f64,
    },
    /// A dense table over positions `1..=support`, and `outside` elsewhere.
    Dense {
        /// Largest position covered by `rates`.
        support: u32,
        /// Rate applied when either position exceeds `support`.
        outside: f64,
        /// `rates[m-1][j-1]` is the rate from position `m` to position `j`.
        rates: Vec<Vec<f64>>,
    },
}

impl PositionRates {
    /// Rate from an IC at position `m` to a susceptible at position `j`.
    #[must_use]
    pub fn rate(&self, m: u32, j: u32) -> f64 {
        match self {
            PositionRates::Constant { alpha } => *alpha,
            PositionRates::Dense {
                support,
                outside,
                rates,
            } => {
                if m == j {
                    return 0.0;
                }
                if m >= 1 && j >= 1 && m <= *support && j <= *support {
                    rates[(m - 1) as usize][(j - 1) as usize]
                } else {
                    *outside
                }
            }
        }
    }

    /// Position beyond which the rate is the constant outside value.
    #[must_use]
    pub fn support(&self) -> u32 {
        match self {
            PositionRates::Constant { .. } => 0,
            PositionRates::Dense { support, .. } => *support,
        }
    }

    /// The rate applied outside the supported block.
    #[must_use]
    pub fn outside_rate(&self) -> f64 {
        match self {
            PositionRates::Constant { alpha } => *alpha,
            PositionRates::Dense { outside, .. } => *outside,
        }
    }

    /// Inverse-square gravity rates over a serpentine floor layout.
    ///
    /// Positions `1..=rows*cols` snake through a `rows x cols` grid with
    /// `spacing` distance units between adjacent grid points: row `r`
    /// (0-based) holds positions `r*cols+1 ..= (r+1)*cols`, left to right on
    /// even rows and right to left on odd rows. The rate between two
    /// distinct positions is `strength / dist^2`; customers beyond the grid
    /// contribute nothing.
    pub fn snake_gravity(rows: u32, cols: u32, spacing: f64, strength: f64) -> Result<Self, Error> {
        if rows < 1 || cols < 1 {
            return Err(Error::bad_range("rows,cols", "at least 1 each"));
        }
        if !spacing.is_finite() || spacing <= 0.0 {
            return Err(Error::bad_range("spacing", "finite and > 0"));
        }
        if !strength.is_finite() || strength <= 0.0 {
            return Err(Error::bad_range("strength", "finite and > 0"));
        }
        let support = rows * cols;
        let coord = |m: u32| -> (f64, f64) {
            let r = (m - 1) / cols;
            let offset = (m - 1) % cols;
            let col = if r.is_multiple_of(2) {
                offset
            } else {
                cols - 1 - offset
            };
            (col as f64 * spacing, r as f64 * spacing)
        };
        let mut rates = vec![vec![0.0; support as usize]; support as usize];
        for m in 1..=support {
            for j in 1..=support {
                if m == j {
                    continue;
                }
                let (xm, ym) = coord(m);
                let (xj, yj) = coord(j);
                let d2 = (xm - xj).powi(2) + (ym - yj).powi(2);
                rates[(m - 1) as usize][(j - 1) as usize] = strength / d2;
            }
        }
        Ok(PositionRates::Dense {
            support,
            outside: 0.0,
            rates,
        })
    }

    pub(crate) fn validate(&self) -> Result<(), Error> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        match self {
            PositionRates::Constant { alpha } => {
                if !ok(*alpha) {
                    return Err(Error::bad_range("alpha", "finite and >= 0"));
                }
            }
            PositionRates::Dense {
                support,
                outside,
                rates,
            } => {
                if !ok(*outside) {
                    return Err(Error::bad_range("outside", "finite and >= 0"));
                }
                if rates.len() != *support as usize
                    || rates.iter().any(|row| row.len() != *support as usize)
                {
                    return Err(Error::bad_range("rates", "support x support table"));
                }
                if rates.iter().flatten().any(|x| !ok(*x)) {
                    return Err(Error::bad_range("rates", "finite and >= 0"));
                }
            }
        }
        Ok(())
    }
}

/// The law of the exposure threshold `theta` required for transmission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TransmissionSpec {
    /// `theta ~ Exp(alpha)`.
    Exponential {
        /// Transmission rate.
        alpha: f64,
    },
    /// `theta ~ Exp(alpha_j)` with probability `q_j`.
    Hyperexponential {
        /// `(q_j, alpha_j)` pairs; the `q_j` must sum to 1.
        components: Vec<(f64, f64)>,
    },
    /// Exponential exposure accumulated at position-dependent rates.
    PositionDependent {
        /// The rate table.
        rates: PositionRates,
    },
    /// Rate `alpha` between customers at most `d` queue positions apart,
    /// zero beyond.
    DistanceThreshold {
        /// Transmission rate inside the distance band.
        alpha: f64,
        /// Maximum infectious distance in queue positions; `d >= 1`.
        d: u32,
    },
}

impl TransmissionSpec {
    /// Check rate signs, mixture normalization, and range constraints.
    pub fn validate(&self) -> Result<(), Error> {
        match self {
            TransmissionSpec::Exponential { alpha } => {
                if !alpha.is_finite() || *alpha < 0.0 {
                    return Err(Error::bad_range("alpha", "finite and >= 0"));
                }
            }
            TransmissionSpec::Hyperexponential { components } => {
                if components.is_empty() {
                    return Err(Error::bad_range("components", "nonempty mixture"));
                }
                let mut total = 0.0;
                for (q, alpha) in components {
                    if !(0.0..=1.0).contains(q) || !q.is_finite() {
                        return Err(Error::bad_range("q", "probability in [0,1]"));
                    }
                    if !alpha.is_finite() || *alpha < 0.0 {
                        return Err(Error::bad_range("alpha_j", "finite and >= 0"));
                    }
                    total += q;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::bad_range("q", "weights must sum to 1"));
                }
            }
            TransmissionSpec::PositionDependent { rates } => rates.validate()?,
            TransmissionSpec::DistanceThreshold { alpha, d } => {
                if !alpha.is_finite() || *alpha < 0.0 {
                    return Err(Error::bad_range("alpha", "finite and >= 0"));
                }
                if *d < 1 {
                    return Err(Error::bad_range("d", "d >= 1"));
                }
            }
        }
        Ok(())
    }
}

/// Whether a figure came from a formula or from the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Closed form or convergent series.
    Analytic,
    /// Discrete-event simulation estimate.
    Simulated,
}

/// A computed transmission risk figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    /// Expected secondary infections per infectious customer sojourn.
    pub r0_sys: f64,
    /// High-class share, where the model distinguishes classes.
    pub r0_h: Option<f64>,
    /// Low-class share, where the model distinguishes classes.
    pub r0_l: Option<f64>,
    /// Provenance of the numbers.
    pub method: Method,
    /// Upper bound on series truncation error, when the evaluation truncates.
    pub truncation_error: Option<f64>,
}

impl RiskReport {
    /// Build a report and check `r0_sys >= 0` and, when both class values
    /// are present, `|r0_h + r0_l - r0_sys| <= 1e-9`.
    pub fn new(
        r0_sys: f64,
        r0_h: Option<f64>,
        r0_l: Option<f64>,
        method: Method,
        truncation_error: Option<f64>,
    ) -> Result<Self, Error> {
        if !r0_sys.is_finite() || r0_sys < 0.0 {
            return Err(Error::bad_range("r0_sys", "finite and >= 0"));
        }
        if let (Some(h), Some(l)) = (r0_h, r0_l) {
            if (h + l - r0_sys).abs() > 1e-9 {
                return Err(Error::bad_range("r0_h,r0_l", "must sum to r0_sys"));
            }
        }
        Ok(RiskReport {
            r0_sys,
            r0_h,
            r0_l,
            method,
            truncation_error,
        })
    }

    /// Analytic report with no class split.
    pub fn analytic(r0_sys: f64) -> Result<Self, Error> {
        RiskReport::new(r0_sys, None, None, Method::Analytic, None)
    }
}

/// A finite stationary distribution, possibly truncated from an infinite one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDistribution<S> {
    states: Vec<S>,
    probs: Vec<f64>,
    tail_mass: f64,
}

impl<S> StateDistribution<S> {
    /// Build a distribution; probabilities must be nonnegative and, together
    /// with `tail_mass`, sum to 1 within 1e-9 (they are then renormalized).
    pub fn new(states: Vec<S>, probs: Vec<f64>, tail_mass: f64) -> Result<Self, Error> {
        if states.len() != probs.len() {
            return Err(Error::bad_range("probs", "one probability per state"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) || tail_mass < 0.0 {
            return Err(Error::bad_range("probs", "nonnegative"));
        }
        let total: f64 = probs.iter().sum::<f64>() + tail_mass;
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::bad_range("probs", "must sum to 1 with tail_mass"));
        }
        let mut probs = probs;
        if total != 1.0 && total > 0.0 {
            for p in &mut probs {
                *p /= total;
            }
        }
        Ok(StateDistribution {
            states,
            probs,
            tail_mass: if total > 0.0 { tail_mass / total } else { tail_mass },
        })
    }

    /// The state descriptors, aligned with [`StateDistribution::probs`].
    #[must_use]
    pub fn states(&self) -> &[S] {
        &self.states
    }

    /// The probabilities, aligned with [`StateDistribution::states`].
    #[must_use]
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Estimated probability mass beyond the listed states.
    #[must_use]
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Iterate over `(state, probability)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (&S, f64)> {
        self.states.iter().zip(self.probs.iter().copied())
    }
}

/// A simulation estimate with batch-means error bars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    /// Point estimate.
    pub mean: f64,
    /// Standard error of the mean across batches.
    pub std_error: f64,
    /// Lower confidence bound.
    pub ci_low: f64,
    /// Upper confidence bound.
    pub ci_high: f64,
    /// Number of tagged samples behind the estimate.
    pub n_samples: u64,
    /// RNG seed that produced the estimate.
    pub seed: u64,
    /// Number of independent replications merged into the estimate.
    pub replication_count: u32,
}

/// Long-run infection rate `lambda * p * r0_sys` for background
/// infectiousness probability `p`.
pub fn infection_rate(r0_sys: f64, lambda: f64, p: f64) -> Result<f64, Error> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::bad_range("p", "probability in [0,1]"));
    }
    check_rate(lambda, "lambda")?;
    if !r0_sys.is_finite() || r0_sys < 0.0 {
        return Err(Error::bad_range("r0_sys", "finite and >= 0"));
    }
    Ok(lambda * p * r0_sys)
}
