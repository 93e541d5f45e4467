//! Transmission risk metrics for Markovian queueing systems.
//!
//! The central quantity is `R0_sys`: the expected number of secondary
//! infections caused by a single infectious customer (IC) over one sojourn
//! through a service facility in steady state, all other customers being
//! susceptible. For a system with stationary distribution `pi(s)` and
//! sojourn-time overlaps `W_i^(s)` between the IC and customer `i`,
//!
//! ```text
//! R0_sys = 2 * sum_s pi(s) * sum_{i=1..n(s)} P(W_i^(s) >= theta)
//! ```
//!
//! where `theta` is the random exposure duration required for transmission.
//! The factor 2 counts customers who arrived before the IC and, by a
//! symmetry argument, those who arrive after. With `theta ~ Exp(alpha)` the
//! probabilities reduce to Laplace transforms of the overlaps, which have
//! closed forms for the M/M/1, M/M/c, and M/M/c/k families.
//!
//! Modules:
//! - [`core`]: model and transmission parameter types, validation, derived
//!   metrics.
//! - [`analytic`]: closed-form and series evaluation for all non-priority
//!   models.
//! - [`markov`]: the two-class preemptive-priority M/M/1 chain, solved
//!   numerically on a truncated lattice.
//! - [`sim`]: a discrete-event simulation oracle with sojourn-overlap
//!   tracking and low-variance estimators.
//! - [`interventions`]: occupancy, time-window, and service-rate sweep
//!   studies over the analytic formulas.
//!
//! ```
//! use r0sys::analytic::mm1_r0;
//!
//! let report = mm1_r0(3.0, 4.0, 0.5).unwrap();
//! assert!((report.r0_sys - 2.0).abs() < 1e-12);
//! ```

#![deny(missing_docs)]
#![deny(rustdoc::broken_intra_doc_links)]

pub mod analytic;
pub mod core;
pub mod interventions;
pub mod markov;
pub mod sim;

pub use crate::core::{
    Error, Method, PositionRates, QueueSpec, RiskReport, SimEstimate, StateDistribution,
    TransmissionSpec,
};
