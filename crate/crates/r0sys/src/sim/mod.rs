//! Discrete-event Monte Carlo estimation of the risk metrics.
//!
//! The simulator is an independent oracle for the closed forms: it tracks
//! actual sojourn overlaps pairwise and counts (or integrates) infections
//! per tagged customer, with no transform analysis anywhere. Replications
//! map to batch means; all randomness is keyed so results are independent
//! of scheduling.

mod batch;
mod engine;
mod rng;
mod trace;

pub use trace::{CustomerRecord, EventTrace, TRACE_HEADER};

use crate::core::{Error, QueueSpec, SimEstimate, TransmissionSpec};
use batch::summarize;
use engine::{
    run_dmdm1, run_fcfs, run_priority, run_replications, ClassSums, EngineCfg, FcfsModel, Kernel,
    RepOut,
};
use rng::DOMAIN_ALT_SHIFT;
use serde::{Deserialize, Serialize};

/// How per-pair transmission outcomes enter the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Accumulate each pair's infection probability; integrates the
    /// threshold out analytically and needs far fewer samples.
    Conditional,
    /// Draw the threshold per directed pair and count indicator events.
    Bernoulli,
}

/// Simulation control parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Arrivals to discard before measuring; the warmup also waits for ten
    /// regeneration cycles, whichever is longer.
    pub warmup: u64,
    /// Total tagged customers across all replications.
    pub tagged: u64,
    /// Independent replications; each contributes one batch mean.
    pub replications: u32,
    /// Root seed for every stream.
    pub seed: u64,
    /// Estimator variant.
    pub estimator: Estimator,
    /// Two-sided confidence level in (0,1).
    pub ci_level: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            warmup: 1_000,
            tagged: 100_000,
            replications: 30,
            seed: 7,
            estimator: Estimator::Conditional,
            ci_level: 0.95,
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<(), Error> {
        if self.replications < 1 {
            return Err(Error::bad_range("replications", ">= 1"));
        }
        if self.tagged < 1 {
            return Err(Error::bad_range("tagged", ">= 1"));
        }
        if !self.ci_level.is_finite() || self.ci_level <= 0.0 || self.ci_level >= 1.0 {
            return Err(Error::bad_range("ci_level", "in (0, 1)"));
        }
        Ok(())
    }

    fn quota(&self) -> u64 {
        self.tagged.div_ceil(self.replications as u64).max(1)
    }

    fn engine_cfg(&self, rep: u32, domain_shift: u32) -> EngineCfg {
        EngineCfg {
            seed: self.seed,
            rep,
            warmup_arrivals: self.warmup,
            quota: self.quota(),
            bernoulli: matches!(self.estimator, Estimator::Bernoulli),
            domain_shift,
            trace_mode: false,
        }
    }
}

/// Time-averaged occupancy estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyEstimate {
    /// Mean number in system.
    pub mean_n: SimEstimate,
    /// Mean of N(N-1).
    pub second_factorial: SimEstimate,
    /// Blocked fraction of arrivals; present only for the finite-capacity
    /// model.
    pub loss: Option<SimEstimate>,
}

/// Class-resolved estimates for the two-class priority queue.
///
/// The five component fields follow the naming of
/// [`crate::markov::PriorityComponents`]; `before_half` and `after_half`
/// split a tagged customer's total infections by partner arrival order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityClassEstimate {
    /// Infections of high-class customers per IC.
    pub r0_h: SimEstimate,
    /// Infections of low-class customers per IC.
    pub r0_l: SimEstimate,
    /// High IC, earlier high partners.
    pub r0_hbh: SimEstimate,
    /// High IC, earlier low partners.
    pub r0_hbl: SimEstimate,
    /// Low IC, earlier high partners.
    pub r0_lbh: SimEstimate,
    /// Low IC, earlier low partners.
    pub r0_lbl: SimEstimate,
    /// Low IC, later high partners.
    pub r0_lah: SimEstimate,
    /// Infections of earlier-arrived partners per IC.
    pub before_half: SimEstimate,
    /// Infections of later-arrived partners per IC.
    pub after_half: SimEstimate,
}

fn positional_error(model: &QueueSpec) -> Error {
    match model {
        QueueSpec::DmDm1 { .. } => Error::UnsupportedCombination {
            detail: "batch arrivals define no queue positions".into(),
        },
        _ => Error::UnsupportedCombination {
            detail: "position-based transmission requires the single-server FCFS queue".into(),
        },
    }
}

fn kernel_for<'a>(
    model: &QueueSpec,
    transmission: &'a TransmissionSpec,
) -> Result<Kernel<'a>, Error> {
    let single_queue = matches!(model, QueueSpec::MM1 { .. });
    match transmission {
        TransmissionSpec::Exponential { alpha } => Ok(Kernel::Plain {
            comps: vec![(1.0, *alpha)],
        }),
        TransmissionSpec::Hyperexponential { components } => Ok(Kernel::Plain {
            comps: components.clone(),
        }),
        TransmissionSpec::PositionDependent { rates } => {
            if single_queue {
                Ok(Kernel::Field { rates })
            } else {
                Err(positional_error(model))
            }
        }
        TransmissionSpec::DistanceThreshold { alpha, d } => {
            if single_queue {
                Ok(Kernel::GapRule {
                    alpha: *alpha,
                    d: *d,
                })
            } else {
                Err(positional_error(model))
            }
        }
    }
}

fn check_alpha(alpha: f64) -> Result<(), Error> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::bad_range("alpha", "finite and >= 0"));
    }
    Ok(())
}

fn fcfs_model(model: &QueueSpec) -> Option<FcfsModel> {
    match *model {
        QueueSpec::MM1 { lambda, mu } => Some(FcfsModel {
            lambda,
            mu,
            c: 1,
            k: None,
        }),
        QueueSpec::MMC { lambda, mu, c } => Some(FcfsModel {
            lambda,
            mu,
            c,
            k: None,
        }),
        QueueSpec::MMCK { lambda, mu, c, k } => Some(FcfsModel {
            lambda,
            mu,
            c,
            k: Some(k),
        }),
        _ => None,
    }
}

/// Monte Carlo estimate of the expected number of secondary infections per
/// arriving IC. Tagged customers are post-warmup arrivals; a blocked
/// tagged arrival never enters and contributes zero.
///
/// # Errors
///
/// Model or transmission invariant violations; `UnsupportedCombination`
/// for position-based transmission outside the single-queue model.
pub fn estimate_r0(
    model: &QueueSpec,
    transmission: &TransmissionSpec,
    cfg: &SimConfig,
) -> Result<SimEstimate, Error> {
    model.validate()?;
    transmission.validate()?;
    cfg.validate()?;
    if let Some(fcfs) = fcfs_model(model) {
        let kernel = kernel_for(model, transmission)?;
        let outs = run_replications(cfg.replications, |rep| {
            run_fcfs(&fcfs, &kernel, &cfg.engine_cfg(rep, 0))
        });
        return Ok(summarize_tagged(&outs, cfg));
    }
    match *model {
        QueueSpec::PriorityMM1 {
            lambda_h,
            lambda_l,
            mu,
        } => {
            let kernel = kernel_for(model, transmission)?;
            let outs = run_replications(cfg.replications, |rep| {
                run_priority(lambda_h, lambda_l, mu, &kernel, &cfg.engine_cfg(rep, 0))
            });
            Ok(summarize_tagged(&outs, cfg))
        }
        QueueSpec::Windows {
            lambda_h,
            lambda_l,
            mu,
            f,
        } => {
            let kernel = kernel_for(model, transmission)?;
            let q_h = lambda_h / (lambda_h + lambda_l);
            let high = FcfsModel {
                lambda: lambda_h / f,
                mu,
                c: 1,
                k: None,
            };
            let low = FcfsModel {
                lambda: lambda_l / (1.0 - f),
                mu,
                c: 1,
                k: None,
            };
            let outs = run_replications(cfg.replications, |rep| {
                let h = run_fcfs(&high, &kernel, &cfg.engine_cfg(rep, 0));
                let l = run_fcfs(&low, &kernel, &cfg.engine_cfg(rep, DOMAIN_ALT_SHIFT));
                (h, l)
            });
            let means: Vec<f64> = outs
                .iter()
                .map(|(h, l)| q_h * h.mean_tagged + (1.0 - q_h) * l.mean_tagged)
                .collect();
            let n: u64 = outs.iter().map(|(h, l)| h.n_tagged + l.n_tagged).sum();
            Ok(summarize(&means, cfg.ci_level, n, cfg.seed))
        }
        QueueSpec::DmDm1 { lambda, mu, m } => {
            let kernel = match transmission {
                TransmissionSpec::Exponential { alpha } => Kernel::Plain {
                    comps: vec![(1.0, *alpha)],
                },
                TransmissionSpec::Hyperexponential { components } => Kernel::Plain {
                    comps: components.clone(),
                },
                _ => return Err(positional_error(model)),
            };
            let outs = run_replications(cfg.replications, |rep| {
                run_dmdm1(lambda, mu, m, &kernel, &cfg.engine_cfg(rep, 0))
            });
            Ok(summarize_tagged(&outs, cfg))
        }
        _ => unreachable!("fcfs family handled above"),
    }
}

fn summarize_tagged(outs: &[RepOut], cfg: &SimConfig) -> SimEstimate {
    let means: Vec<f64> = outs.iter().map(|o| o.mean_tagged).collect();
    let n: u64 = outs.iter().map(|o| o.n_tagged).sum();
    summarize(&means, cfg.ci_level, n, cfg.seed)
}

/// Class-resolved infection estimates for the preemptive-priority queue,
/// with the five-way order/class decomposition and the before/after split.
///
/// # Errors
///
/// `UnsupportedCombination` unless `model` is the priority queue.
pub fn estimate_r0_by_class(
    model: &QueueSpec,
    alpha: f64,
    cfg: &SimConfig,
) -> Result<PriorityClassEstimate, Error> {
    model.validate()?;
    cfg.validate()?;
    check_alpha(alpha)?;
    let QueueSpec::PriorityMM1 {
        lambda_h,
        lambda_l,
        mu,
    } = *model
    else {
        return Err(Error::UnsupportedCombination {
            detail: "class-resolved estimation requires the preemptive-priority model".into(),
        });
    };
    let kernel = Kernel::Plain {
        comps: vec![(1.0, alpha)],
    };
    let outs = run_replications(cfg.replications, |rep| {
        run_priority(lambda_h, lambda_l, mu, &kernel, &cfg.engine_cfg(rep, 0))
    });
    let sums: Vec<&ClassSums> = outs.iter().map(|o| o.class.as_ref().unwrap()).collect();
    let total = |s: &ClassSums| (s.n_high + s.n_low) as f64;
    let col = |f: &dyn Fn(&ClassSums) -> f64| -> Vec<f64> { sums.iter().map(|s| f(s)).collect() };
    let n_high: u64 = sums.iter().map(|s| s.n_high).sum();
    let n_low: u64 = sums.iter().map(|s| s.n_low).sum();
    let n_all = n_high + n_low;
    let lvl = cfg.ci_level;
    Ok(PriorityClassEstimate {
        r0_h: summarize(
            &col(&|s| (s.hbh + s.hah + s.lbh + s.lah) / total(s)),
            lvl,
            n_all,
            cfg.seed,
        ),
        r0_l: summarize(
            &col(&|s| (s.hbl + s.hal + s.lbl + s.lal) / total(s)),
            lvl,
            n_all,
            cfg.seed,
        ),
        r0_hbh: summarize(&col(&|s| s.hbh / s.n_high as f64), lvl, n_high, cfg.seed),
        r0_hbl: summarize(&col(&|s| s.hbl / s.n_high as f64), lvl, n_high, cfg.seed),
        r0_lbh: summarize(&col(&|s| s.lbh / s.n_low as f64), lvl, n_low, cfg.seed),
        r0_lbl: summarize(&col(&|s| s.lbl / s.n_low as f64), lvl, n_low, cfg.seed),
        r0_lah: summarize(&col(&|s| s.lah / s.n_low as f64), lvl, n_low, cfg.seed),
        before_half: summarize(
            &col(&|s| (s.hbh + s.hbl + s.lbh + s.lbl) / total(s)),
            lvl,
            n_all,
            cfg.seed,
        ),
        after_half: summarize(
            &col(&|s| (s.hah + s.hal + s.lah + s.lal) / total(s)),
            lvl,
            n_all,
            cfg.seed,
        ),
    })
}

/// Time-averaged occupancy moments (and, with finite capacity, the blocked
/// fraction) over the measurement window.
///
/// # Errors
///
/// `UnsupportedCombination` for the windows model, whose occupancy is
/// window-local.
pub fn estimate_occupancy_metrics(
    model: &QueueSpec,
    cfg: &SimConfig,
) -> Result<OccupancyEstimate, Error> {
    model.validate()?;
    cfg.validate()?;
    let outs = if let Some(fcfs) = fcfs_model(model) {
        run_replications(cfg.replications, |rep| {
            run_fcfs(&fcfs, &Kernel::Off, &cfg.engine_cfg(rep, 0))
        })
    } else {
        match *model {
            QueueSpec::PriorityMM1 {
                lambda_h,
                lambda_l,
                mu,
            } => run_replications(cfg.replications, |rep| {
                run_priority(lambda_h, lambda_l, mu, &Kernel::Off, &cfg.engine_cfg(rep, 0))
            }),
            QueueSpec::DmDm1 { lambda, mu, m } => run_replications(cfg.replications, |rep| {
                run_dmdm1(lambda, mu, m, &Kernel::Off, &cfg.engine_cfg(rep, 0))
            }),
            _ => {
                return Err(Error::UnsupportedCombination {
                    detail: "occupancy is per-window for the windows model".into(),
                })
            }
        }
    };
    let n: u64 = outs.iter().map(|o| o.n_tagged).sum();
    let mean_of = |f: &dyn Fn(&RepOut) -> f64| -> Vec<f64> { outs.iter().map(f).collect() };
    Ok(OccupancyEstimate {
        mean_n: summarize(&mean_of(&|o| o.mean_n), cfg.ci_level, n, cfg.seed),
        second_factorial: summarize(&mean_of(&|o| o.second_factorial), cfg.ci_level, n, cfg.seed),
        loss: matches!(model, QueueSpec::MMCK { .. }).then(|| {
            summarize(&mean_of(&|o| o.loss), cfg.ci_level, n, cfg.seed)
        }),
    })
}

/// Long-run infection rate when every arrival is independently infectious
/// with probability `p` and a susceptible customer's infection probability
/// is driven by its cumulative exposure to infectious customers.
///
/// Customers infected during their sojourn do not become infectious before
/// departing. Conditional-expectation estimation only.
///
/// # Errors
///
/// `BadRange` unless `0 <= p < 1`; `UnsupportedCombination` outside the
/// FCFS single-queue family or with the bernoulli estimator.
pub fn estimate_multi_infector_rate(
    model: &QueueSpec,
    alpha: f64,
    p: f64,
    cfg: &SimConfig,
) -> Result<SimEstimate, Error> {
    model.validate()?;
    cfg.validate()?;
    check_alpha(alpha)?;
    if !p.is_finite() || !(0.0..1.0).contains(&p) {
        return Err(Error::bad_range("p", "0 <= p < 1"));
    }
    if matches!(cfg.estimator, Estimator::Bernoulli) {
        return Err(Error::UnsupportedCombination {
            detail: "multi-infector estimation is conditional-expectation only".into(),
        });
    }
    let Some(fcfs) = fcfs_model(model) else {
        return Err(Error::UnsupportedCombination {
            detail: "multi-infector estimation covers the FCFS queue family".into(),
        });
    };
    let kernel = Kernel::Cumulative { alpha, p };
    let outs = run_replications(cfg.replications, |rep| {
        run_fcfs(&fcfs, &kernel, &cfg.engine_cfg(rep, 0))
    });
    let means: Vec<f64> = outs.iter().map(|o| o.rate).collect();
    let n: u64 = outs.iter().map(|o| o.n_tagged).sum();
    Ok(summarize(&means, cfg.ci_level, n, cfg.seed))
}

/// Simulates `arrivals` customers from an empty system with no warmup,
/// drains to empty, and returns the full event history.
///
/// # Errors
///
/// `BadRange` when `arrivals` is zero; `UnsupportedCombination` for the
/// windows model (two disjoint systems; trace each window directly).
pub fn trace(
    model: &QueueSpec,
    arrivals: u64,
    seed: u64,
    replication: u32,
) -> Result<EventTrace, Error> {
    model.validate()?;
    if arrivals == 0 {
        return Err(Error::bad_range("arrivals", ">= 1"));
    }
    let cfg = EngineCfg {
        seed,
        rep: replication,
        warmup_arrivals: 0,
        quota: arrivals,
        bernoulli: false,
        domain_shift: 0,
        trace_mode: true,
    };
    let out = if let Some(fcfs) = fcfs_model(model) {
        run_fcfs(&fcfs, &Kernel::Off, &cfg)
    } else {
        match *model {
            QueueSpec::PriorityMM1 {
                lambda_h,
                lambda_l,
                mu,
            } => run_priority(lambda_h, lambda_l, mu, &Kernel::Off, &cfg),
            QueueSpec::DmDm1 { lambda, mu, m } => run_dmdm1(lambda, mu, m, &Kernel::Off, &cfg),
            _ => {
                return Err(Error::UnsupportedCombination {
                    detail: "trace each window as its own single-server queue".into(),
                })
            }
        }
    };
    Ok(out.trace.expect("trace mode always records"))
}
