//! Closed-form and series evaluation of `R0_sys` for all non-priority
//! models.
//!
//! Everything here is a pure function of its arguments; the only iteration
//! is series truncation, which always reports its tail bound through
//! [`crate::core::RiskReport::truncation_error`].

mod dmdm1;
mod erlang;
mod mm1;
mod mmc;
mod transform;

pub use dmdm1::{dmdm1_identity_residual, dmdm1_r0, dmdm1_second_factorial};
pub use erlang::erlang_c;
pub use mm1::{distance_r0_mm1, hyper_r0, mm1_r0, position_r0_mm1, windows_r0};
pub use mmc::{generic_r0, mmc_r0, mmck_r0, mmck_steady_state};
pub use transform::{overlap_transform_mmc, OverlapTransform};

/// Default series truncation tolerance.
pub const SERIES_TOL: f64 = 1e-10;
/// Hard cap on outer series terms before giving up with `NoConvergence`.
pub(crate) const SERIES_TERM_CAP: u32 = 1_000_000;
