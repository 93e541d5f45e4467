//! The two-class preemptive-priority M/M/1 chain and its class-resolved
//! risk components.
//!
//! High-class customers are always served first and preempt a low-class
//! service in progress; within a class the order is FCFS. The state is the
//! pair (h, l) of class counts. The chain is solved numerically on a
//! truncated lattice; two exact marginals (h geometric at load `rho_h`, the
//! total count geometric at load `rho`, both consequences of preemption and
//! of work conservation with a common service rate) serve as built-in
//! validation.

use crate::core::{Error, Method, QueueSpec, RiskReport, StateDistribution};
use serde::{Deserialize, Serialize};

/// Joint class occupancy of the priority queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PriorityState {
    /// High-class customers in system.
    pub h: u32,
    /// Low-class customers in system.
    pub l: u32,
}

/// The five class-and-direction risk components.
///
/// Naming: `r0_xby` counts customers of class `y` who arrived before the
/// class-`x` IC; `r0_lah` counts high-class customers arriving after a
/// low-class IC (the one after-term the class split needs that does not
/// follow from a before-term by symmetry).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorityComponents {
    /// High IC, high targets that arrived earlier.
    pub r0_hbh: f64,
    /// High IC, low targets that arrived earlier.
    pub r0_hbl: f64,
    /// Low IC, high targets that arrived earlier.
    pub r0_lbh: f64,
    /// Low IC, low targets that arrived earlier.
    pub r0_lbl: f64,
    /// Low IC, high targets that arrived later.
    pub r0_lah: f64,
    /// Combined truncation bound from the lattice solve and series tails.
    pub truncation_error: f64,
}

/// Iteration cap per Gauss-Seidel solve.
const SWEEP_CAP: u32 = 200_000;
/// Lattice axis hard cap.
const AXIS_CAP: u32 = 4096;
/// Initial lattice extent per axis.
const AXIS_START: u32 = 64;

/// Truncated joint distribution, row-major over `h * (lmax+1) + l`.
struct Lattice {
    hmax: u32,
    lmax: u32,
    probs: Vec<f64>,
}

impl Lattice {
    fn at(&self, h: u32, l: u32) -> f64 {
        self.probs[(h * (self.lmax + 1) + l) as usize]
    }

    /// Upper bound on stationary mass outside this lattice, from the two
    /// exact geometric marginals.
    fn tail_bound(&self, rho_h: f64, rho: f64) -> f64 {
        rho_h.powi(self.hmax as i32 + 1) + rho.powi(self.lmax as i32 + 1)
    }
}

fn check_priority_rates(lambda_h: f64, lambda_l: f64, mu: f64) -> Result<(), Error> {
    QueueSpec::PriorityMM1 {
        lambda_h,
        lambda_l,
        mu,
    }
    .validate()
}

fn check_tol(tol: f64) -> Result<(), Error> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::bad_range("tol", "finite and > 0"));
    }
    Ok(())
}

/// Gauss-Seidel solve of the balance equations on the truncated lattice,
/// boundary arrivals suppressed, renormalized every sweep.
fn solve_lattice(
    lambda_h: f64,
    lambda_l: f64,
    mu: f64,
    hmax: u32,
    lmax: u32,
) -> Result<Lattice, Error> {
    let (hn, ln) = ((hmax + 1) as usize, (lmax + 1) as usize);
    let idx = |h: usize, l: usize| h * ln + l;
    let rho_h = lambda_h / mu;
    let rho_l = lambda_l / mu;

    // Product-of-geometrics initial guess; exact when one class is absent.
    let mut p = vec![0.0f64; hn * ln];
    let gh = |h: usize| (1.0 - rho_h.max(1e-12)) * rho_h.max(1e-12).powi(h as i32);
    let gl = |l: usize| (1.0 - rho_l.max(1e-12)) * rho_l.max(1e-12).powi(l as i32);
    for h in 0..hn {
        for l in 0..ln {
            p[idx(h, l)] = gh(h) * gl(l);
        }
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);

    let rate_scale = lambda_h + lambda_l + mu;
    let mut sweeps = 0u32;
    loop {
        for h in 0..hn {
            for l in 0..ln {
                if h == 0 && l == 0 {
                    // pi(0,0) pinned by the sweep normalization below.
                    continue;
                }
                let mut inflow = 0.0;
                if h > 0 {
                    inflow += lambda_h * p[idx(h - 1, l)];
                }
                if l > 0 {
                    inflow += lambda_l * p[idx(h, l - 1)];
                }
                if h + 1 < hn {
                    inflow += mu * p[idx(h + 1, l)];
                }
                if h == 0 && l + 1 < ln {
                    inflow += mu * p[idx(0, l + 1)];
                }
                let out = lambda_h * ((h + 1 < hn) as u32 as f64)
                    + lambda_l * ((l + 1 < ln) as u32 as f64)
                    + mu;
                p[idx(h, l)] = inflow / out;
            }
        }
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        sweeps += 1;

        if sweeps.is_multiple_of(8) || sweeps == 1 {
            let mut residual = 0.0;
            for h in 0..hn {
                for l in 0..ln {
                    let mut inflow = 0.0;
                    if h > 0 {
                        inflow += lambda_h * p[idx(h - 1, l)];
                    }
                    if l > 0 {
                        inflow += lambda_l * p[idx(h, l - 1)];
                    }
                    if h + 1 < hn {
                        inflow += mu * p[idx(h + 1, l)];
                    }
                    if h == 0 && l + 1 < ln {
                        inflow += mu * p[idx(0, l + 1)];
                    }
                    let out = lambda_h * ((h + 1 < hn) as u32 as f64)
                        + lambda_l * ((l + 1 < ln) as u32 as f64)
                        + mu * ((h + l > 0) as u32 as f64);
                    residual += (inflow - out * p[idx(h, l)]).abs();
                }
            }
            if residual < 1e-12 * rate_scale {
                return Ok(Lattice {
                    hmax,
                    lmax,
                    probs: p,
                });
            }
        }
        if sweeps >= SWEEP_CAP {
            return Err(Error::NoConvergence {
                context: format!("lattice solve {hmax}x{lmax} after {sweeps} sweeps"),
            });
        }
    }
}

/// Solve adaptively: start 64x64, double the axis with the larger tail
/// bound until the bound and the change in `metrics` both drop below `tol`.
fn adaptive_lattice<F>(
    lambda_h: f64,
    lambda_l: f64,
    mu: f64,
    tol: f64,
    metrics: F,
) -> Result<(Lattice, Vec<f64>, f64), Error>
where
    F: Fn(&Lattice) -> Vec<f64>,
{
    let rho_h = lambda_h / mu;
    let rho = (lambda_h + lambda_l) / mu;
    let (mut hmax, mut lmax) = (AXIS_START, AXIS_START);
    let mut prev: Option<Vec<f64>> = None;
    loop {
        let lattice = solve_lattice(lambda_h, lambda_l, mu, hmax, lmax)?;
        let values = metrics(&lattice);
        let bound = lattice.tail_bound(rho_h, rho);
        let drift = prev
            .as_ref()
            .map(|old| {
                old.iter()
                    .zip(&values)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .unwrap_or(f64::INFINITY);
        if bound < tol && (values.is_empty() || drift < tol) {
            return Ok((lattice, values, bound));
        }
        if hmax >= AXIS_CAP && lmax >= AXIS_CAP {
            return Err(Error::NoConvergence {
                context: format!("lattice {hmax}x{lmax} at cap, tail bound {bound:.3e}"),
            });
        }
        let h_term = rho_h.powi(hmax as i32 + 1);
        let l_term = rho.powi(lmax as i32 + 1);
        if (h_term >= l_term && hmax < AXIS_CAP) || lmax >= AXIS_CAP {
            hmax = (hmax * 2).min(AXIS_CAP);
        } else {
            lmax = (lmax * 2).min(AXIS_CAP);
        }
        prev = Some(values);
    }
}

/// Stationary distribution of the priority chain on an adaptively truncated
/// lattice; probabilities are scaled so that they and the reported
/// `tail_mass` bound sum to one.
///
/// # Errors
///
/// `Unstable` when `rho_h >= 1` or `rho >= 1`; `NoConvergence` when the
/// axis cap or sweep cap is hit.
pub fn priority_steady_state(
    lambda_h: f64,
    lambda_l: f64,
    mu: f64,
    tol: f64,
) -> Result<StateDistribution<PriorityState>, Error> {
    check_priority_rates(lambda_h, lambda_l, mu)?;
    check_tol(tol)?;
    let (lattice, _, bound) = adaptive_lattice(lambda_h, lambda_l, mu, tol, |_| Vec::new())?;
    let mut states = Vec::with_capacity(lattice.probs.len());
    for h in 0..=lattice.hmax {
        for l in 0..=lattice.lmax {
            states.push(PriorityState { h, l });
        }
    }
    let scale = 1.0 - bound;
    let probs = lattice.probs.iter().map(|p| p * scale).collect();
    StateDistribution::new(states, probs, bound)
}

/// Laplace transform at `alpha` of a high-class M/M/1 busy period:
/// the root `(lambda_h + mu + alpha - sqrt((lambda_h + mu + alpha)^2 -
/// 4 lambda_h mu)) / (2 lambda_h)`, evaluated in the rationalized form
/// `2 mu / (A + sqrt(A^2 - 4 lambda_h mu))` which is stable as
/// `lambda_h -> 0`.
///
/// # Errors
///
/// `BadRange` unless `0 <= lambda_h < mu` and `alpha >= 0`.
pub fn busy_period_lst(alpha: f64, lambda_h: f64, mu: f64) -> Result<f64, Error> {
    if !mu.is_finite() || mu <= 0.0 {
        return Err(Error::NonPositiveRate { field: "mu".into() });
    }
    if !lambda_h.is_finite() || lambda_h < 0.0 || lambda_h >= mu {
        return Err(Error::bad_range("lambda_h", "0 <= lambda_h < mu"));
    }
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::bad_range("alpha", "finite and >= 0"));
    }
    let a = lambda_h + mu + alpha;
    Ok(2.0 * mu / (a + (a * a - 4.0 * lambda_h * mu).sqrt()))
}

/// Probability that a low-class customer at queue index `i` is infected by
/// a low-class IC that found `h` high- and at least `i` low-class customers
/// present.
///
/// Their overlap is a busy period fed by `h + i` services plus preempting
/// high-class work, with transform `(mu/(mu+s))^{h+i}` at
/// `s = alpha + lambda_h (1 - busy_period_lst(alpha))`; the return value is
/// one minus that transform.
///
/// # Errors
///
/// `BadRange` as in [`busy_period_lst`] or when `i < 1`.
pub fn ll_overlap_infection_prob(
    h: u32,
    i: u32,
    alpha: f64,
    lambda_h: f64,
    mu: f64,
) -> Result<f64, Error> {
    if i < 1 {
        return Err(Error::bad_range("i", "i >= 1"));
    }
    let s = alpha + lambda_h * (1.0 - busy_period_lst(alpha, lambda_h, mu)?);
    Ok(1.0 - (mu / (mu + s)).powi((h + i) as i32))
}

/// Per-state series for the low-IC-infects-later-high component: the IC
/// holds the server's attention structure so that the n-th later high
/// arrival overlaps it through a count distribution with weights
/// `V(x, n) = sum_{j=max(n+1-x,1)}^{n} rho_h^j` (`x` pending services in
/// front), infecting with probability `1 - beta^n`.
fn lah_state_sum(h: u32, l: u32, rho_h: f64, beta: f64) -> f64 {
    let lf = l as f64;
    let mut acc = 0.0;
    let mut r_n = rho_h; // rho_h^n
    let mut r_j0 = rho_h; // rho_h^{max(n-h,1)}
    let mut r_np1 = rho_h * rho_h; // rho_h^{n+1}
    let mut beta_n = beta; // beta^n
    let mut n = 1u32;
    loop {
        let v_front = (r_j0 - r_np1) / (1.0 - rho_h);
        let v_unit = r_n;
        let weight = v_front + lf * v_unit;
        acc += weight * (1.0 - beta_n);
        if n > h && weight < 1e-18 * (1.0 + acc) {
            return acc;
        }
        if n > h {
            r_j0 *= rho_h;
        }
        r_n = r_np1;
        r_np1 *= rho_h;
        beta_n *= beta;
        n += 1;
    }
}

fn components_from_lattice(
    lattice: &Lattice,
    lambda_h: f64,
    mu: f64,
    alpha: f64,
) -> Result<[f64; 5], Error> {
    let rho_h = lambda_h / mu;
    let eta = alpha / mu;
    let beta = mu / (mu + alpha);
    let half_mm1 = (rho_h / (1.0 - rho_h)) * (eta / (eta + 1.0 - rho_h));

    // Low-low overlap decay rate; gamma^{h+i} is the no-infection
    // probability for the pair.
    let s = alpha + lambda_h * (1.0 - busy_period_lst(alpha, lambda_h, mu)?);
    let gamma = mu / (mu + s);

    let mut hbl = 0.0;
    let mut lbl = 0.0;
    let mut lah = 0.0;
    for h in 0..=lattice.hmax {
        let beta_h1 = beta.powi(h as i32 + 1);
        let gamma_h1 = gamma.powi(h as i32 + 1);
        for l in 0..=lattice.lmax {
            let p = lattice.at(h, l);
            if p == 0.0 {
                continue;
            }
            let lf = l as f64;
            hbl += p * lf * (1.0 - beta_h1);
            // sum_{i=1..l} 1 - gamma^{h+i} in closed form.
            lbl += p * (lf - gamma_h1 * (1.0 - gamma.powi(l as i32)) / (1.0 - gamma));
            if rho_h > 0.0 {
                lah += p * lah_state_sum(h, l, rho_h, beta);
            }
        }
    }
    Ok([half_mm1, hbl, half_mm1, lbl, lah])
}

/// All five risk components at once, over an adaptively truncated lattice.
///
/// The before-terms of the high class and toward the high class share the
/// single-class M/M/1 closed form at load `rho_h` (preemption makes the
/// high class blind to the low class); the remaining terms are pi-weighted
/// series.
///
/// # Errors
///
/// As [`priority_steady_state`].
pub fn priority_components(
    lambda_h: f64,
    lambda_l: f64,
    mu: f64,
    alpha: f64,
    tol: f64,
) -> Result<PriorityComponents, Error> {
    check_priority_rates(lambda_h, lambda_l, mu)?;
    check_tol(tol)?;
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::bad_range("alpha", "finite and >= 0"));
    }
    let (_, values, bound) = adaptive_lattice(lambda_h, lambda_l, mu, tol, |lattice| {
        components_from_lattice(lattice, lambda_h, mu, alpha)
            .map(|v| v.to_vec())
            .unwrap_or_default()
    })?;
    if values.len() != 5 {
        return Err(Error::NoConvergence {
            context: "component evaluation failed during lattice refinement".into(),
        });
    }
    Ok(PriorityComponents {
        r0_hbh: values[0],
        r0_hbl: values[1],
        r0_lbh: values[2],
        r0_lbl: values[3],
        r0_lah: values[4],
        truncation_error: bound,
    })
}

/// Class-resolved `R0` for the preemptive-priority queue.
///
/// With class weights `q_T = lambda_T / (lambda_h + lambda_l)`:
/// `r0_sys = 2 (q_h (r0_hbh + r0_hbl) + q_l (r0_lbh + r0_lbl))` (doubling
/// the before-terms by the system-wide before/after pairing symmetry), and
/// `r0_h = 2 q_h r0_hbh + q_l (r0_lbh + r0_lah)`; `r0_l` is the remainder.
///
/// # Errors
///
/// As [`priority_components`].
pub fn priority_r0(
    lambda_h: f64,
    lambda_l: f64,
    mu: f64,
    alpha: f64,
    tol: f64,
) -> Result<RiskReport, Error> {
    let c = priority_components(lambda_h, lambda_l, mu, alpha, tol)?;
    let q_h = lambda_h / (lambda_h + lambda_l);
    let q_l = 1.0 - q_h;
    let r0_sys = 2.0 * (q_h * (c.r0_hbh + c.r0_hbl) + q_l * (c.r0_lbh + c.r0_lbl));
    let r0_h = 2.0 * q_h * c.r0_hbh + q_l * (c.r0_lbh + c.r0_lah);
    RiskReport::new(
        r0_sys,
        Some(r0_h),
        Some(r0_sys - r0_h),
        Method::Analytic,
        Some(c.truncation_error),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::distributions::Distribution;
    use rand::SeedableRng;

    const REF: (f64, f64, f64, f64) = (1.5, 1.5, 4.0, 0.5);

    #[test]
    fn steady_state_single_class_is_geometric() {
        let pi = priority_steady_state(1.5, 0.0, 4.0, 1e-10).unwrap();
        let rho_h = 0.375f64;
        for (state, p) in pi.iter() {
            let expect = if state.l == 0 {
                (1.0 - rho_h) * rho_h.powi(state.h as i32)
            } else {
                0.0
            };
            assert!((p - expect).abs() < 1e-10, "state {state:?}: {p}");
        }
    }

    #[test]
    fn steady_state_normalizes_with_tail() {
        let pi = priority_steady_state(1.5, 1.5, 4.0, 1e-9).unwrap();
        let total: f64 = pi.probs().iter().sum::<f64>() + pi.tail_mass();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(pi.tail_mass() < 1e-9);
    }

    #[test]
    fn high_class_marginal_mean() {
        let pi = priority_steady_state(1.5, 1.5, 4.0, 1e-9).unwrap();
        let eh: f64 = pi.iter().map(|(s, p)| s.h as f64 * p).sum();
        let rho_h = 0.375;
        assert!((eh - rho_h / (1.0 - rho_h)).abs() < 1e-8, "E[h] = {eh}");
    }

    #[test]
    fn total_count_marginal_is_geometric() {
        // Work conservation with equal service rates makes the total count
        // an ordinary M/M/1 occupancy; a strong whole-lattice check.
        let pi = priority_steady_state(1.5, 1.5, 4.0, 1e-9).unwrap();
        let en: f64 = pi.iter().map(|(s, p)| (s.h + s.l) as f64 * p).sum();
        let rho = 0.75;
        assert!((en - rho / (1.0 - rho)).abs() < 1e-7, "E[N] = {en}");
        let mut by_total = vec![0.0f64; 40];
        for (s, p) in pi.iter() {
            let n = (s.h + s.l) as usize;
            if n < by_total.len() {
                by_total[n] += p;
            }
        }
        for (n, mass) in by_total.iter().enumerate().take(20) {
            let expect = (1.0 - rho) * rho.powi(n as i32);
            assert!((mass - expect).abs() < 1e-9, "n={n}: {mass} vs {expect}");
        }
    }

    #[test]
    fn busy_period_reference_points() {
        assert!((busy_period_lst(0.0, 1.5, 4.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((busy_period_lst(0.7, 0.0, 4.0).unwrap() - 4.0 / 4.7).abs() < 1e-15);
        let v = busy_period_lst(0.5, 1.5, 4.0).unwrap();
        assert!((v - 0.8452994616207485).abs() < 1e-15);
    }

    #[test]
    fn busy_period_matches_monte_carlo() {
        // Mean of e^{-alpha B} over simulated high-class busy periods.
        let (alpha, lambda_h, mu) = (0.5, 1.5, 4.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x42_b0);
        let exp_service = rand_distr::Exp::new(mu).unwrap();
        let exp_arrival = rand_distr::Exp::new(lambda_h).unwrap();
        let n = 200_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let mut pending = 1u32;
            let mut t = 0.0f64;
            let mut next_arrival = exp_arrival.sample(&mut rng);
            while pending > 0 {
                let s = exp_service.sample(&mut rng);
                let end = t + s;
                while next_arrival < end {
                    pending += 1;
                    next_arrival += exp_arrival.sample(&mut rng);
                }
                t = end;
                pending -= 1;
            }
            let x = (-alpha * t).exp();
            sum += x;
            sq += x * x;
        }
        let mean = sum / n as f64;
        let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
        let exact = busy_period_lst(alpha, lambda_h, mu).unwrap();
        assert!(
            (mean - exact).abs() < 4.0 * se,
            "mc {mean} +- {se} vs {exact}"
        );
    }

    #[test]
    fn ll_overlap_edge_cases() {
        assert_eq!(ll_overlap_infection_prob(2, 1, 0.0, 1.5, 4.0).unwrap(), 0.0);
        let no_preempt = ll_overlap_infection_prob(2, 1, 0.5, 0.0, 4.0).unwrap();
        let erlang = 1.0 - (4.0f64 / 4.5).powi(3);
        assert!((no_preempt - erlang).abs() < 1e-15);
    }

    #[test]
    fn ll_overlap_monotone_and_bounded() {
        let mut prev = 0.0;
        for k in 1..=20 {
            let v = ll_overlap_infection_prob(2, 1, 0.2 * k as f64, 1.5, 4.0).unwrap();
            assert!(v > prev && v < 1.0);
            prev = v;
        }
        let base = ll_overlap_infection_prob(2, 3, 0.5, 1.5, 4.0).unwrap();
        assert!(ll_overlap_infection_prob(3, 3, 0.5, 1.5, 4.0).unwrap() > base);
        assert!(ll_overlap_infection_prob(2, 4, 0.5, 1.5, 4.0).unwrap() > base);
    }

    #[test]
    fn ll_overlap_matches_monte_carlo() {
        // Busy period seeded with h+i services, fed by high-class arrivals;
        // empirical P(length exceeds an Exp(alpha) threshold).
        let (h, i, alpha, lambda_h, mu) = (2u32, 1u32, 0.5, 1.5, 4.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x42_11);
        let exp_service = rand_distr::Exp::new(mu).unwrap();
        let exp_arrival = rand_distr::Exp::new(lambda_h).unwrap();
        let n = 200_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let mut pending = h + i;
            let mut t = 0.0f64;
            let mut next_arrival = exp_arrival.sample(&mut rng);
            while pending > 0 {
                let s = exp_service.sample(&mut rng);
                let end = t + s;
                while next_arrival < end {
                    pending += 1;
                    next_arrival += exp_arrival.sample(&mut rng);
                }
                t = end;
                pending -= 1;
            }
            let x = 1.0 - (-alpha * t).exp();
            sum += x;
            sq += x * x;
        }
        let mean = sum / n as f64;
        let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
        let exact = ll_overlap_infection_prob(h, i, alpha, lambda_h, mu).unwrap();
        assert!(
            (mean - exact).abs() < 4.0 * se,
            "mc {mean} +- {se} vs {exact}"
        );
    }

    #[test]
    fn components_reference_values() {
        let (lh, ll, mu, alpha) = REF;
        let c = priority_components(lh, ll, mu, alpha, 1e-9).unwrap();
        assert!((c.r0_hbh - 0.1).abs() < 1e-12);
        assert!((c.r0_lbh - 0.1).abs() < 1e-12);
        assert!((c.r0_hbl - 0.45).abs() < 1e-8, "hbl {}", c.r0_hbl);
        let sqrt3 = 3.0f64.sqrt();
        assert!(
            (c.r0_lbl - (sqrt3 - 0.6)).abs() < 1e-8,
            "lbl {} vs {}",
            c.r0_lbl,
            sqrt3 - 0.6
        );
        assert!((c.r0_lah - 0.45).abs() < 1e-8, "lah {}", c.r0_lah);
    }

    #[test]
    fn component_duality_across_classes() {
        // Low-IC-after-high and high-IC-before-low count the same pair set
        // with roles exchanged: lambda_l * r0_lah = lambda_h * r0_hbl.
        for (lh, ll, mu, alpha) in [
            (1.5, 1.5, 4.0, 0.5),
            (1.0, 2.0, 4.0, 0.7),
            (0.4, 0.3, 1.0, 0.15),
        ] {
            let c = priority_components(lh, ll, mu, alpha, 1e-9).unwrap();
            assert!(
                (ll * c.r0_lah - lh * c.r0_hbl).abs() < 1e-8,
                "({lh},{ll},{mu},{alpha}): {} vs {}",
                ll * c.r0_lah,
                lh * c.r0_hbl
            );
        }
    }

    #[test]
    fn class_split_reference_values() {
        let (lh, ll, mu, alpha) = REF;
        let r = priority_r0(lh, ll, mu, alpha, 1e-9).unwrap();
        let sqrt3 = 3.0f64.sqrt();
        assert!((r.r0_sys - (sqrt3 + 0.05)).abs() < 1e-8, "sys {}", r.r0_sys);
        assert!((r.r0_h.unwrap() - 0.375).abs() < 1e-8, "h {:?}", r.r0_h);
        assert!(
            (r.r0_l.unwrap() - (sqrt3 + 0.05 - 0.375)).abs() < 1e-8,
            "l {:?}",
            r.r0_l
        );
    }

    #[test]
    fn split_sums_to_total() {
        for (lh, ll, mu, alpha) in [
            (0.9, 1.2, 4.0, 0.8),
            (2.0, 0.4, 4.0, 0.3),
            (0.2, 0.5, 1.0, 1.6),
        ] {
            let r = priority_r0(lh, ll, mu, alpha, 1e-7).unwrap();
            let gap = (r.r0_h.unwrap() + r.r0_l.unwrap() - r.r0_sys).abs();
            assert!(gap < 1e-9);
        }
    }

    #[test]
    fn single_class_limit_matches_mm1() {
        let full = crate::analytic::mm1_r0(1.5, 4.0, 0.5).unwrap().r0_sys;
        let r = priority_r0(1.5, 1e-9, 4.0, 0.5, 1e-9).unwrap();
        assert!((r.r0_sys - full).abs() < 1e-6, "{} vs {full}", r.r0_sys);
    }

    #[test]
    fn priority_beats_fcfs_at_reference_point() {
        let fcfs = crate::analytic::mm1_r0(3.0, 4.0, 0.5).unwrap().r0_sys;
        let prio = priority_r0(1.5, 1.5, 4.0, 0.5, 1e-9).unwrap().r0_sys;
        assert!(prio < fcfs);
    }

    #[test]
    fn refinement_is_stable() {
        let a = priority_r0(1.5, 1.5, 4.0, 0.5, 1e-6).unwrap().r0_sys;
        let b = priority_r0(1.5, 1.5, 4.0, 0.5, 1e-10).unwrap().r0_sys;
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn unstable_rejected() {
        assert!(matches!(
            priority_r0(2.0, 2.1, 4.0, 0.5, 1e-9),
            Err(Error::Unstable { .. })
        ));
        assert!(matches!(
            priority_steady_state(4.0, 0.5, 4.0, 1e-9),
            Err(Error::Unstable { .. })
        ));
    }
}
