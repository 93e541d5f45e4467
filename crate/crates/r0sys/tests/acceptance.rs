//! Release gate. Each test covers one acceptance criterion and prints a
//! `criterion N: PASS` or `criterion N: FAIL` line plus one detail line per
//! check, then panics if any check missed.
//!
//! Two criteria are expected to fail, and the failures are kept visible
//! rather than papered over:
//!
//! - Criterion 1: four pinned reference values (the two-server risk with
//!   and without a cap and the per-class priority split) disagree with this
//!   library's closed forms, which the lattice solver and the independent
//!   event-driven simulator both confirm to Monte Carlo precision. The
//!   detail lines print the measured value next to each pin.
//! - Criterion 2: the simulator tags every admitted post-warmup arrival, so
//!   consecutive tagged customers share busy periods and their contributions
//!   are strongly correlated. At 10^5 tagged customers the resulting honest
//!   standard error is 5-15% of the mean for the high-load configurations,
//!   while the gate demands 2% relative accuracy on top of the 3-sigma
//!   agreement it does achieve. The estimator is unbiased and its error
//!   shrinks like 1/sqrt(n) (checked at 16x the budget), so the 2% clause is
//!   a sample-budget shortfall, not a defect; each detail line prints both
//!   the sigma distance and the relative error.
//!
//! The README documents both discrepancies.

use r0sys::analytic;
use r0sys::interventions;
use r0sys::markov;
use r0sys::sim::{
    estimate_multi_infector_rate, estimate_r0, estimate_r0_by_class, Estimator, SimConfig,
};
use r0sys::{PositionRates, QueueSpec, TransmissionSpec};

/// Collects check outcomes for one criterion and renders the verdict line.
struct Gate {
    name: &'static str,
    failures: Vec<String>,
}

impl Gate {
    fn new(name: &'static str) -> Self {
        Gate {
            name,
            failures: Vec::new(),
        }
    }

    /// Records one check that compares a measured value against a pin.
    fn pin(&mut self, label: &str, measured: f64, pinned: f64, tol: f64) {
        let ok = (measured - pinned).abs() <= tol;
        self.record(label, ok, format!("measured {measured:.12} vs {pinned} (tol {tol:e})"));
    }

    /// Records one check with a precomputed verdict.
    fn record(&mut self, label: &str, ok: bool, detail: String) {
        let mark = if ok { "ok" } else { "MISMATCH" };
        println!("  {label}: {detail}: {mark}");
        if !ok {
            self.failures.push(format!("{label}: {detail}"));
        }
    }

    fn finish(self) {
        if self.failures.is_empty() {
            println!("{}: PASS", self.name);
        } else {
            println!("{}: FAIL", self.name);
            panic!("{} missed {} check(s):\n{}", self.name, self.failures.len(), self.failures.join("\n"));
        }
    }
}

fn sim_cfg() -> SimConfig {
    SimConfig {
        warmup: 1_000,
        tagged: 100_000,
        replications: 30,
        seed: 7,
        estimator: Estimator::Conditional,
        ci_level: 0.95,
    }
}

fn mask_mixture() -> Vec<(f64, f64)> {
    vec![(0.36, 0.05), (0.24, 0.3), (0.24, 0.3), (0.16, 0.9)]
}

#[test]
fn criterion_1_closed_form_reference_pins() {
    let mut g = Gate::new("criterion 1 (closed-form reference pins)");
    g.pin(
        "mm1_r0(3, 4, 0.5)",
        analytic::mm1_r0(3.0, 4.0, 0.5).unwrap().r0_sys,
        2.0,
        1e-9,
    );
    // The next four pins are not reproduced by this library. The closed
    // forms, the lattice solver, and the independent simulator agree with
    // each other on the measured values printed below, so the pins stay as
    // stated and this criterion reports the discrepancy honestly.
    g.pin(
        "mmc_r0(5, 25/9, 2, 1/30)",
        analytic::mmc_r0(5.0, 25.0 / 9.0, 2, 1.0 / 30.0).unwrap().r0_sys,
        1.5130,
        5e-4,
    );
    g.pin(
        "mmck_r0(5, 25/9, 2, 12, 1/30)",
        analytic::mmck_r0(5.0, 25.0 / 9.0, 2, 12, 1.0 / 30.0).unwrap().r0_sys,
        0.5104,
        5e-4,
    );
    let pri = markov::priority_r0(1.5, 1.5, 4.0, 0.5, 1e-10).unwrap();
    g.pin("priority_r0(1.5, 1.5, 4, 0.5).r0_h", pri.r0_h.unwrap(), 0.561, 2e-3);
    g.pin("priority_r0(1.5, 1.5, 4, 0.5).r0_l", pri.r0_l.unwrap(), 1.221, 2e-3);
    g.pin("priority_r0(1.5, 1.5, 4, 0.5).r0_sys", pri.r0_sys, 1.782, 2e-3);
    let win = analytic::windows_r0(1.5, 1.5, 4.0, 0.5, 15.0 / 34.0).unwrap();
    g.pin("windows_r0(1.5, 1.5, 4, 0.5, 15/34).r0_h", win.r0_h.unwrap(), 2.5758, 1e-3);
    g.pin("windows_r0(1.5, 1.5, 4, 0.5, 15/34).r0_l", win.r0_l.unwrap(), 0.5617, 1e-3);
    g.pin(
        "mm1_r0(0.95, 1, 1)",
        analytic::mm1_r0(0.95, 1.0, 1.0).unwrap().r0_sys,
        36.190476,
        1e-5,
    );
    g.finish();
}

#[test]
fn criterion_2_simulator_matches_closed_forms() {
    let cfg = sim_cfg();
    let snake = PositionRates::snake_gravity(3, 4, 6.0, 1.0).unwrap();
    let mm1 = QueueSpec::MM1 { lambda: 3.0, mu: 4.0 };
    let exp = |alpha: f64| TransmissionSpec::Exponential { alpha };

    let mut cases: Vec<(String, QueueSpec, TransmissionSpec, f64)> = vec![
        (
            "mm1(3, 4) alpha=0.5".into(),
            mm1.clone(),
            exp(0.5),
            analytic::mm1_r0(3.0, 4.0, 0.5).unwrap().r0_sys,
        ),
        (
            "mmc(5, 25/9, c=2) alpha=1/30".into(),
            QueueSpec::MMC { lambda: 5.0, mu: 25.0 / 9.0, c: 2 },
            exp(1.0 / 30.0),
            analytic::mmc_r0(5.0, 25.0 / 9.0, 2, 1.0 / 30.0).unwrap().r0_sys,
        ),
        (
            "mmck(5, 25/9, c=2, k=12) alpha=1/30".into(),
            QueueSpec::MMCK { lambda: 5.0, mu: 25.0 / 9.0, c: 2, k: 12 },
            exp(1.0 / 30.0),
            analytic::mmck_r0(5.0, 25.0 / 9.0, 2, 12, 1.0 / 30.0).unwrap().r0_sys,
        ),
        (
            "priority(1.5, 1.5, 4) alpha=0.5".into(),
            QueueSpec::PriorityMM1 { lambda_h: 1.5, lambda_l: 1.5, mu: 4.0 },
            exp(0.5),
            markov::priority_r0(1.5, 1.5, 4.0, 0.5, 1e-10).unwrap().r0_sys,
        ),
        (
            "snake position 3x4".into(),
            mm1.clone(),
            TransmissionSpec::PositionDependent { rates: snake.clone() },
            analytic::position_r0_mm1(3.0, 4.0, &snake, 1e-10).unwrap().r0_sys,
        ),
        (
            "mask mixture".into(),
            mm1.clone(),
            TransmissionSpec::Hyperexponential { components: mask_mixture() },
            analytic::hyper_r0(|a| analytic::mm1_r0(3.0, 4.0, a), &mask_mixture())
                .unwrap()
                .r0_sys,
        ),
    ];
    for d in 1..=3 {
        cases.push((
            format!("distance d={d}"),
            mm1.clone(),
            TransmissionSpec::DistanceThreshold { alpha: 0.5, d },
            analytic::distance_r0_mm1(3.0, 4.0, 0.5, d).unwrap().r0_sys,
        ));
    }

    // The 3-sigma clause holds for every configuration; the 2% clause is
    // stricter than the estimator's noise floor at this sample budget for
    // the long-memory configurations (load 0.9, slow mixture components),
    // so this criterion reports those honestly as misses.
    let mut g = Gate::new("criterion 2 (simulator vs closed forms)");
    for (label, model, transmission, truth) in &cases {
        let est = estimate_r0(model, transmission, &cfg).unwrap();
        let dev = (est.mean - truth).abs();
        let within_se = dev <= 3.0 * est.std_error;
        let within_rel = dev <= 0.02 * truth.abs();
        g.record(
            label,
            within_se && within_rel,
            format!(
                "estimate {:.6} vs {truth:.6} ({:.2} se, {:.3}% rel)",
                est.mean,
                if est.std_error > 0.0 { dev / est.std_error } else { 0.0 },
                100.0 * dev / truth.abs()
            ),
        );
    }
    g.finish();
}

#[test]
fn criterion_3_structural_properties() {
    let mut g = Gate::new("criterion 3 (structural properties)");

    // Reduction: the two-server form collapses to the single-server closed
    // form at c=1 on 100 deterministic pseudo-random parameter sets.
    let mut x = 0.37_f64;
    let mut draw = move || {
        x = (x * 7919.0 + 0.5).fract();
        x
    };
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mu = 0.2 + 3.0 * draw();
        let lambda = mu * (0.05 + 0.9 * draw());
        let alpha = 0.05 + 2.0 * draw();
        let a = analytic::mmc_r0(lambda, mu, 1, alpha).unwrap().r0_sys;
        let b = analytic::mm1_r0(lambda, mu, alpha).unwrap().r0_sys;
        worst = worst.max((a - b).abs());
    }
    g.record(
        "mmc_r0(c=1) equals mm1_r0 on 100 random sets",
        worst <= 1e-12,
        format!("worst gap {worst:e} (tol 1e-12)"),
    );

    // The capped risk approaches the uncapped one from below as k grows.
    let uncapped = analytic::mmc_r0(5.0, 25.0 / 9.0, 2, 1.0 / 30.0).unwrap().r0_sys;
    let capped: Vec<f64> = (2..=60)
        .map(|k| analytic::mmck_r0(5.0, 25.0 / 9.0, 2, k, 1.0 / 30.0).unwrap().r0_sys)
        .collect();
    let monotone = capped.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let below = capped.iter().all(|&v| v <= uncapped + 1e-12);
    let first_gap = uncapped - capped.first().unwrap();
    let last_gap = uncapped - capped.last().unwrap();
    g.record(
        "mmck_r0 rises toward mmc_r0 in k",
        monotone && below && last_gap < first_gap / 10.0,
        format!("gap {first_gap:.3e} at k=2 shrinks to {last_gap:.3e} at k=60"),
    );

    // A one-component mixture is the plain exponential threshold.
    let mut worst: f64 = 0.0;
    for &alpha in &[0.05, 0.3, 0.5, 1.0, 4.0] {
        let a = analytic::hyper_r0(|a| analytic::mm1_r0(3.0, 4.0, a), &[(1.0, alpha)])
            .unwrap()
            .r0_sys;
        let b = analytic::mm1_r0(3.0, 4.0, alpha).unwrap().r0_sys;
        worst = worst.max((a - b).abs());
    }
    g.record(
        "hyper_r0 single component equals mm1_r0",
        worst <= 1e-12,
        format!("worst gap {worst:e} (tol 1e-12)"),
    );

    // A constant position field is the position-free model, up to series
    // truncation.
    let constant = analytic::position_r0_mm1(
        3.0,
        4.0,
        &PositionRates::Constant { alpha: 0.5 },
        1e-10,
    )
    .unwrap();
    let gap = (constant.r0_sys - 2.0).abs();
    g.record(
        "position_r0_mm1 constant field equals mm1_r0",
        gap <= 1e-8,
        format!("gap {gap:e} (series tol 1e-10)"),
    );

    // Distance closed form against its defining per-gap sum: neighbors at
    // gap j contribute (1-rho) rho^(j-1) of the unrestricted risk.
    let mut worst: f64 = 0.0;
    for &rho in &[0.1, 0.3, 0.5, 0.7, 0.9] {
        for &mu in &[0.5, 1.0, 4.0] {
            for &eta in &[0.05, 0.125, 0.5, 1.0, 4.0] {
                for &d in &[1_u32, 2, 3, 5, 10, 25] {
                    let lambda = rho * mu;
                    let alpha = eta * mu;
                    let base = analytic::mm1_r0(lambda, mu, alpha).unwrap().r0_sys;
                    let sum: f64 = (1..=d)
                        .map(|j| base * (1.0 - rho) * rho.powi(j as i32 - 1))
                        .sum();
                    let closed = analytic::distance_r0_mm1(lambda, mu, alpha, d).unwrap().r0_sys;
                    worst = worst.max((closed - sum).abs());
                }
            }
        }
    }
    g.record(
        "distance closed form equals the per-gap sum",
        worst <= 1e-9,
        format!("worst gap {worst:e} over the (rho, eta, d) grid (tol 1e-9)"),
    );

    // Shape checks on 20-point grids: first differences fix monotonicity,
    // second differences fix curvature, for the risk and the infection rate.
    let grid = |lo: f64, hi: f64| -> Vec<f64> {
        (0..20).map(|i| lo + (hi - lo) * i as f64 / 19.0).collect()
    };
    let shape = |values: &[f64], rising: bool, convex: bool| -> bool {
        let mono = values
            .windows(2)
            .all(|w| if rising { w[1] > w[0] } else { w[1] < w[0] });
        let curve = values.windows(3).all(|w| {
            let second = w[2] - 2.0 * w[1] + w[0];
            if convex {
                second > -1e-12
            } else {
                second < 1e-12
            }
        });
        mono && curve
    };
    let in_lambda: Vec<f64> = grid(0.4, 3.6)
        .iter()
        .map(|&l| analytic::mm1_r0(l, 4.0, 0.5).unwrap().r0_sys)
        .collect();
    let rate_in_lambda: Vec<f64> = grid(0.4, 3.6)
        .iter()
        .map(|&l| l * analytic::mm1_r0(l, 4.0, 0.5).unwrap().r0_sys)
        .collect();
    let in_mu: Vec<f64> = grid(3.2, 9.0)
        .iter()
        .map(|&m| analytic::mm1_r0(3.0, m, 0.5).unwrap().r0_sys)
        .collect();
    let rate_in_mu: Vec<f64> = grid(3.2, 9.0)
        .iter()
        .map(|&m| 3.0 * analytic::mm1_r0(3.0, m, 0.5).unwrap().r0_sys)
        .collect();
    let in_alpha: Vec<f64> = grid(0.05, 2.0)
        .iter()
        .map(|&a| analytic::mm1_r0(3.0, 4.0, a).unwrap().r0_sys)
        .collect();
    let rate_in_alpha: Vec<f64> = grid(0.05, 2.0)
        .iter()
        .map(|&a| 3.0 * analytic::mm1_r0(3.0, 4.0, a).unwrap().r0_sys)
        .collect();
    g.record(
        "risk and rate are convex increasing in lambda",
        shape(&in_lambda, true, true) && shape(&rate_in_lambda, true, true),
        "finite differences on a 20-point grid".into(),
    );
    g.record(
        "risk and rate are convex decreasing in mu",
        shape(&in_mu, false, true) && shape(&rate_in_mu, false, true),
        "finite differences on a 20-point grid".into(),
    );
    g.record(
        "risk and rate are concave increasing in alpha",
        shape(&in_alpha, true, false) && shape(&rate_in_alpha, true, false),
        "finite differences on a 20-point grid".into(),
    );

    // Batch-system rate balance on 100 deterministic pseudo-random sets.
    let mut y = 0.61_f64;
    let mut draw = move || {
        y = (y * 7919.0 + 0.5).fract();
        y
    };
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let lambda = 0.1 + 1.9 * draw();
        let mu = lambda * (1.05 + 2.0 * draw());
        let m = 1 + (draw() * 9.0) as u32;
        let alpha = 0.05 + 3.0 * draw();
        let p = draw();
        let residual = analytic::dmdm1_identity_residual(lambda, mu, m, alpha, p).unwrap();
        worst = worst.max(residual.abs());
    }
    g.record(
        "batch identity p m lambda R0 = p mu P(theta<=1/mu) E[N(N-1)]",
        worst <= 1e-12,
        format!("worst residual {worst:e} (tol 1e-12)"),
    );

    // Simulated before/after infection counts agree statistically.
    let cfg = SimConfig {
        tagged: 20_000,
        ..sim_cfg()
    };
    let by_class = estimate_r0_by_class(
        &QueueSpec::PriorityMM1 { lambda_h: 1.5, lambda_l: 1.5, mu: 4.0 },
        0.5,
        &cfg,
    )
    .unwrap();
    let gap = (by_class.before_half.mean - by_class.after_half.mean).abs();
    let band = 3.0 * (by_class.before_half.std_error + by_class.after_half.std_error);
    g.record(
        "simulated before/after split is symmetric",
        gap <= band,
        format!("halves {:.5} and {:.5}, gap {gap:.2e} within {band:.2e}",
            by_class.before_half.mean, by_class.after_half.mean),
    );

    g.finish();
}

#[test]
fn criterion_4_intervention_studies() {
    let mut g = Gate::new("criterion 4 (intervention studies)");

    let occupancy = interventions::occupancy_sweep(5.0, 25.0 / 9.0, 2, 1.0 / 30.0, [12]).unwrap();
    let capped = occupancy.rows[0][2];
    let loss = occupancy.rows[0][3];
    let uncapped = occupancy.rows[1][2];
    let drop = 1.0 - capped / uncapped;
    g.record(
        "cap k=12 at load 0.9 cuts risk by at least 66%",
        drop >= 0.66,
        format!("risk {uncapped:.4} -> {capped:.4}, a {:.1}% drop", 100.0 * drop),
    );
    g.record(
        "the same cap keeps the loss probability under 5%",
        loss < 0.05,
        format!("loss {:.2}%", 100.0 * loss),
    );

    let grid: Vec<f64> = (38..=62).map(|i| i as f64 / 100.0).collect();
    let windows = interventions::windows_sweep(1.5, 1.5, 4.0, 0.5, &grid).unwrap();
    let pri = windows
        .rows
        .iter()
        .find(|r| r[3] == interventions::ROW_PRIORITY_REF)
        .unwrap();
    let (pri_h, pri_l) = (pri[1], pri[2]);
    let dominated = windows
        .rows
        .iter()
        .filter(|r| r[3] == interventions::ROW_DATA && r[4] == 0.0)
        .filter(|r| r[1] <= pri_h && r[2] <= pri_l)
        .count();
    g.record(
        "no window split matches priority on both classes",
        !windows.metadata.partial && dominated == 0,
        format!(
            "priority ({pri_h:.4}, {pri_l:.4}) undominated across {} stable splits",
            grid.len()
        ),
    );

    let unit = interventions::max_lambda_scale(3.0, 4.0, 0.5, 1.0).unwrap();
    g.record(
        "max_lambda_scale(k_mu=1) = 1",
        (unit - 1.0).abs() <= 1e-9,
        format!("measured {unit:.12}"),
    );
    let mut all_below = true;
    let mut detail = String::new();
    for &k_mu in &[1.25, 1.5, 2.0, 2.5, 3.0] {
        let k = interventions::max_lambda_scale(3.0, 4.0, 0.5, k_mu).unwrap();
        all_below &= k < k_mu;
        detail.push_str(&format!(" {k:.4}<{k_mu}"));
    }
    g.record(
        "faster service never supports a matching arrival speedup",
        all_below,
        format!("k_lambda_max vs k_mu:{detail}"),
    );

    g.finish();
}

#[test]
fn criterion_5_multi_infector_consistency() {
    let mut g = Gate::new("criterion 5 (multi-infector consistency)");
    let cfg = sim_cfg();
    let model = QueueSpec::MM1 { lambda: 3.0, mu: 4.0 };

    let small = estimate_multi_infector_rate(&model, 0.5, 1e-3, &cfg).unwrap();
    let linear_small = 3.0 * 1e-3 * 2.0;
    let dev = (small.mean - linear_small).abs();
    g.record(
        "p=1e-3 rate matches lambda p R0",
        dev <= 3.0 * small.std_error,
        format!(
            "estimate {:.6e} vs {linear_small:.6e} ({:.2} se)",
            small.mean,
            dev / small.std_error
        ),
    );

    let large = estimate_multi_infector_rate(&model, 0.5, 0.2, &cfg).unwrap();
    let linear_large = 3.0 * 0.2 * 2.0;
    let shortfall = 100.0 * (1.0 - large.mean / linear_large);
    // No pass/fail threshold at p=0.2; the deviation is reported and the
    // value is frozen so that regressions surface.
    println!(
        "  p=0.2 rate {:.6} vs linear {linear_large:.6}, {shortfall:.1}% below",
        large.mean
    );
    let frozen = 0.562201748637;
    g.record(
        "p=0.2 rate is frozen for regression tracking",
        large.mean < linear_large && (large.mean - frozen).abs() <= 1e-9,
        format!("estimate {:.12}", large.mean),
    );

    g.finish();
}
