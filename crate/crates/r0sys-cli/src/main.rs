//! Command-line front end for the transmission risk library.
//!
//! Three verbs: `analytic` evaluates closed forms, `simulate` runs the
//! Monte Carlo oracle, `sweep` emits intervention tables. Results go to
//! stdout (or `--out`); a single-line JSON run manifest always goes to
//! stderr. Identical arguments produce identical output bytes.

use clap::{Args, Parser, Subcommand, ValueEnum};
use r0sys::analytic;
use r0sys::core::{infection_rate, Error, PositionRates, QueueSpec, RiskReport, TransmissionSpec};
use r0sys::interventions::{self, SweepTable, ROW_FCFS_REF, ROW_PRIORITY_REF};
use r0sys::markov;
use r0sys::sim::{self, SimConfig};
use serde::Deserialize;
use serde_json::json;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "r0sys", version, about = "Transmission risk metrics for queueing systems")]
struct Cli {
    /// JSON file supplying defaults for simulation and output flags.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write the primary output to a file instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a risk metric in closed form.
    Analytic {
        #[command(subcommand)]
        model: AnalyticCmd,
    },
    /// Estimate a risk metric by discrete-event simulation.
    Simulate {
        #[command(subcommand)]
        model: SimulateCmd,
    },
    /// Generate an intervention sweep table.
    Sweep {
        #[command(subcommand)]
        study: SweepCmd,
    },
}

/// Hyperexponential mixture given as `weight:rate` pairs.
#[derive(Clone, Debug)]
struct HyperComps(Vec<(f64, f64)>);

fn parse_hyper(text: &str) -> Result<HyperComps, String> {
    let mut comps = Vec::new();
    for part in text.split(',') {
        let (q, a) = part
            .split_once(':')
            .ok_or_else(|| format!("`{part}` is not `weight:rate`"))?;
        let q: f64 = q.trim().parse().map_err(|_| format!("bad weight `{q}`"))?;
        let a: f64 = a.trim().parse().map_err(|_| format!("bad rate `{a}`"))?;
        comps.push((q, a));
    }
    Ok(HyperComps(comps))
}

/// One exponential rate or a mixture; exactly one must be given.
#[derive(Args)]
struct TransmissionFlags {
    /// Exponential transmission rate.
    #[arg(long)]
    alpha: Option<f64>,
    /// Hyperexponential mixture, e.g. `0.6:0.2,0.4:0.8`.
    #[arg(long, value_parser = parse_hyper, conflicts_with = "alpha")]
    hyper: Option<HyperComps>,
}

impl TransmissionFlags {
    fn spec(&self) -> Result<TransmissionSpec, Error> {
        match (self.alpha, &self.hyper) {
            (Some(alpha), None) => Ok(TransmissionSpec::Exponential { alpha }),
            (None, Some(h)) => Ok(TransmissionSpec::Hyperexponential {
                components: h.0.clone(),
            }),
            _ => Err(Error::bad_range(
                "transmission",
                "exactly one of --alpha or --hyper",
            )),
        }
    }

    fn describe(&self) -> serde_json::Value {
        match (&self.alpha, &self.hyper) {
            (Some(a), _) => json!({ "exponential": a }),
            (_, Some(h)) => json!({ "hyperexponential": h.0 }),
            _ => json!(null),
        }
    }
}

#[derive(Subcommand)]
enum AnalyticCmd {
    /// Single-server queue.
    Mm1 {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        mu: f64,
        #[command(flatten)]
        transmission: TransmissionFlags,
        /// Background infectiousness probability; adds the infection rate.
        #[arg(long)]
        p: Option<f64>,
    },
    /// Multi-server queue.
    Mmc {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        c: u32,
        #[command(flatten)]
        transmission: TransmissionFlags,
        #[arg(long)]
        p: Option<f64>,
    },
    /// Multi-server queue with finite capacity.
    Mmck {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        c: u32,
        #[arg(long)]
        k: u32,
        #[command(flatten)]
        transmission: TransmissionFlags,
        #[arg(long)]
        p: Option<f64>,
    },
    /// Two-class preemptive-priority queue.
    Priority {
        #[arg(long)]
        lambda_h: f64,
        #[arg(long)]
        lambda_l: f64,
        #[arg(long)]
        mu: f64,
        #[command(flatten)]
        transmission: TransmissionFlags,
        /// Truncation tolerance for the lattice solve.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        p: Option<f64>,
    },
    /// Designated time windows with high-class share `f`.
    Windows {
        #[arg(long)]
        lambda_h: f64,
        #[arg(long)]
        lambda_l: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        f: f64,
        #[command(flatten)]
        transmission: TransmissionFlags,
        #[arg(long)]
        p: Option<f64>,
    },
    /// Deterministic batch arrivals and service.
    Dmdm1 {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        m: u32,
        #[command(flatten)]
        transmission: TransmissionFlags,
        #[arg(long)]
        p: Option<f64>,
    },
    /// Single-server queue, transmission only within a position distance.
    Distance {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        d: u32,
        #[arg(long)]
        p: Option<f64>,
    },
    /// Single-server queue with seat-position-dependent rates.
    Position {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        mu: f64,
        /// Seating grid rows.
        #[arg(long)]
        rows: u32,
        /// Seating grid columns.
        #[arg(long)]
        cols: u32,
        /// Seat spacing in the gravity rate model.
        #[arg(long)]
        spacing: f64,
        /// Rate scale in the gravity rate model.
        #[arg(long)]
        strength: f64,
        /// Series truncation tolerance.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        p: Option<f64>,
    },
}

/// Shared simulation controls; unset values fall back to the config file,
/// then to defaults.
#[derive(Args)]
struct SimFlags {
    /// RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Total tagged customers across replications.
    #[arg(long)]
    tagged: Option<u64>,
    /// Independent replications.
    #[arg(long)]
    replications: Option<u32>,
    /// Warmup arrivals before measurement.
    #[arg(long)]
    warmup: Option<u64>,
    /// Estimator variant.
    #[arg(long, value_enum)]
    estimator: Option<EstimatorArg>,
    /// Two-sided confidence level.
    #[arg(long)]
    ci_level: Option<f64>,
}

#[derive(Args)]
struct SimulateFlags {
    #[command(flatten)]
    sim: SimFlags,
    /// Dump an event trace of this many arrivals instead of estimating.
    #[arg(long, value_name = "ARRIVALS")]
    trace: Option<u64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum EstimatorArg {
    Conditional,
    Bernoulli,
}

impl From<EstimatorArg> for sim::Estimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Conditional => sim::Estimator::Conditional,
            EstimatorArg::Bernoulli => sim::Estimator::Bernoulli,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum OracleArg {
    Sim,
}

#[derive(Subcommand)]
enum SimulateCmd {
    /// Single-server queue.
    Mm1 {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        mu: f64,
        #[command(flatten)]
        transmission: TransmissionFlags,
        #[command(flatten)]
        flags: SimulateFlags,
    },
    /// Multi-server queue.
    Mmc {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        c: u32,
        #[command(flatten)]
        transmission: TransmissionFlags,
        #[command(flatten)]
        flags: SimulateFlags,
    },
    /// Multi-server queue with finite capacity.
    Mmck {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        c: u32,
        #[arg(long)]
        k: u32,
        #[command(flatten)]
        transmission: TransmissionFlags,
        #[command(flatten)]
        flags: SimulateFlags,
    },
    /// Two-class preemptive-priority queue.
    Priority {
        #[arg(long)]
        lambda_h: f64,
        #[arg(long)]
        lambda_l: f64,
        #[arg(long)]
        mu: f64,
        #[command(flatten)]
        transmission: TransmissionFlags,
        /// Also print the class and arrival-order decomposition.
        #[arg(long)]
        by_class: bool,
        #[command(flatten)]
        flags: SimulateFlags,
    },
    /// Designated time windows.
    Windows {
        #[arg(long)]
        lambda_h: f64,
        #[arg(long)]
        lambda_l: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        f: f64,
        #[command(flatten)]
        transmission: TransmissionFlags,
        #[command(flatten)]
        flags: SimulateFlags,
    },
    /// Deterministic batch arrivals and service.
    Dmdm1 {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        m: u32,
        #[command(flatten)]
        transmission: TransmissionFlags,
        #[command(flatten)]
        flags: SimulateFlags,
    },
    /// Distance-limited transmission in the single-server queue.
    Distance {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        d: u32,
        #[command(flatten)]
        flags: SimulateFlags,
    },
    /// Position-dependent transmission in the single-server queue.
    Position {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        rows: u32,
        #[arg(long)]
        cols: u32,
        #[arg(long)]
        spacing: f64,
        #[arg(long)]
        strength: f64,
        #[command(flatten)]
        flags: SimulateFlags,
    },
    /// Long-run infection rate with background infectiousness `p`.
    Multi {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        mu: f64,
        /// Servers; defaults to a single server.
        #[arg(long, default_value_t = 1)]
        c: u32,
        /// Capacity; unbounded when omitted.
        #[arg(long)]
        k: Option<u32>,
        #[arg(long)]
        alpha: f64,
        /// Per-arrival infectiousness probability.
        #[arg(long)]
        p: f64,
        #[command(flatten)]
        flags: SimulateFlags,
    },
}

#[derive(Subcommand)]
enum SweepCmd {
    /// Risk versus loss as the occupancy cap varies.
    Occupancy {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        c: u32,
        #[arg(long)]
        alpha: f64,
        /// Capacity grid: `2..20`, `2,5,12`, or `12`.
        #[arg(long)]
        k: String,
        #[command(flatten)]
        flags: SweepFlags,
    },
    /// Per-class risk frontier as the time-window share varies.
    Windows {
        #[arg(long)]
        lambda_h: f64,
        #[arg(long)]
        lambda_l: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        alpha: f64,
        /// Share grid: `0.44..0.56` with `--step`, `0.44,0.5`, or `0.5`.
        #[arg(long)]
        f: String,
        /// Grid step for a range.
        #[arg(long)]
        step: Option<f64>,
        #[command(flatten)]
        flags: SweepFlags,
    },
    /// Risk as the service rate scales.
    ServiceRate {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        alpha: f64,
        /// Scale grid: `1..3` with `--step`, `1,1.5,2`, or `2`.
        #[arg(long)]
        scale: String,
        #[arg(long)]
        step: Option<f64>,
        #[command(flatten)]
        flags: SweepFlags,
    },
}

#[derive(Args)]
struct SweepFlags {
    /// Output format.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Re-estimate each row by simulation and append CI columns.
    #[arg(long, value_enum)]
    oracle: Option<OracleArg>,
    #[command(flatten)]
    sim: SimFlags,
}

/// Optional defaults loaded from `--config`.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    tagged: Option<u64>,
    replications: Option<u32>,
    warmup: Option<u64>,
    estimator: Option<EstimatorArg>,
    ci_level: Option<f64>,
    format: Option<FormatArg>,
}

fn load_config(path: &Option<PathBuf>) -> Result<FileConfig, Error> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::bad_range("--config", &format!("not readable: {e}")))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::bad_range("--config", &format!("not valid JSON: {e}")))
}

fn resolve_sim(flags: &SimFlags, file: &FileConfig) -> SimConfig {
    let d = SimConfig::default();
    SimConfig {
        warmup: flags.warmup.or(file.warmup).unwrap_or(d.warmup),
        tagged: flags.tagged.or(file.tagged).unwrap_or(d.tagged),
        replications: flags
            .replications
            .or(file.replications)
            .unwrap_or(d.replications),
        seed: flags.seed.or(file.seed).unwrap_or(d.seed),
        estimator: flags
            .estimator
            .or(file.estimator)
            .map_or(d.estimator, Into::into),
        ci_level: flags.ci_level.or(file.ci_level).unwrap_or(d.ci_level),
    }
}

fn sim_cfg_json(cfg: &SimConfig) -> serde_json::Value {
    serde_json::to_value(cfg).expect("config serializes")
}

fn parse_u32_grid(text: &str) -> Result<Vec<u32>, Error> {
    let bad = || Error::bad_range("grid", "`a..b`, `a,b,c`, or a single integer");
    if let Some((a, b)) = text.split_once("..") {
        let a: u32 = a.trim().parse().map_err(|_| bad())?;
        let b: u32 = b.trim().parse().map_err(|_| bad())?;
        Ok((a..=b).collect())
    } else if text.contains(',') {
        text.split(',')
            .map(|t| t.trim().parse().map_err(|_| bad()))
            .collect()
    } else {
        Ok(vec![text.trim().parse().map_err(|_| bad())?])
    }
}

fn parse_f64_grid(text: &str, step: Option<f64>) -> Result<Vec<f64>, Error> {
    let bad = || Error::bad_range("grid", "`a..b` with --step, `a,b,c`, or a single number");
    if let Some((a, b)) = text.split_once("..") {
        let a: f64 = a.trim().parse().map_err(|_| bad())?;
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        let step = step.ok_or_else(|| Error::bad_range("step", "required with a range"))?;
        if !step.is_finite() || step <= 0.0 {
            return Err(Error::bad_range("step", "finite and > 0"));
        }
        let mut grid = Vec::new();
        for i in 0.. {
            let x = a + f64::from(i) * step;
            if x > b + step * 1e-9 {
                break;
            }
            grid.push(x);
        }
        Ok(grid)
    } else if text.contains(',') {
        text.split(',')
            .map(|t| t.trim().parse().map_err(|_| bad()))
            .collect()
    } else {
        Ok(vec![text.trim().parse().map_err(|_| bad())?])
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Error::bad_range("--out", &e.to_string()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn timestamp() -> String {
    std::env::var("R0SYS_TIMESTAMP").unwrap_or_else(|_| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs().to_string())
            .unwrap_or_else(|_| "0".into())
    })
}

fn print_manifest(command: &str, seed: Option<u64>, params: serde_json::Value) {
    let manifest = json!({
        "command": command,
        "params": params,
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp": timestamp(),
    });
    eprintln!("{manifest}");
}

/// Evaluates `base` under an exponential rate or mixes it over a
/// hyperexponential mixture.
fn eval_with<F>(t: &TransmissionSpec, base: F) -> Result<RiskReport, Error>
where
    F: Fn(f64) -> Result<RiskReport, Error>,
{
    match t {
        TransmissionSpec::Exponential { alpha } => base(*alpha),
        TransmissionSpec::Hyperexponential { components } => analytic::hyper_r0(base, components),
        _ => Err(Error::UnsupportedCombination {
            detail: "positional transmission has its own subcommands".into(),
        }),
    }
}

fn render_report(report: &RiskReport, rate: Option<Result<f64, Error>>) -> Result<String, Error> {
    let mut s = String::new();
    let _ = writeln!(s, "r0_sys = {}", report.r0_sys);
    if let Some(h) = report.r0_h {
        let _ = writeln!(s, "r0_h = {h}");
    }
    if let Some(l) = report.r0_l {
        let _ = writeln!(s, "r0_l = {l}");
    }
    if let Some(e) = report.truncation_error {
        let _ = writeln!(s, "truncation_error = {e}");
    }
    if let Some(rate) = rate {
        let _ = writeln!(s, "infection_rate = {}", rate?);
    }
    Ok(s)
}

fn run_analytic(cmd: &AnalyticCmd, out: &Option<PathBuf>) -> Result<(), Error> {
    let (name, report, rate, params) = match cmd {
        AnalyticCmd::Mm1 {
            lambda,
            mu,
            transmission,
            p,
        } => {
            let t = transmission.spec()?;
            let report = eval_with(&t, |a| analytic::mm1_r0(*lambda, *mu, a))?;
            let rate = p.map(|p| infection_rate(report.r0_sys, *lambda, p));
            let params = json!({
                "lambda": lambda, "mu": mu,
                "transmission": transmission.describe(), "p": p,
            });
            ("analytic mm1", report, rate, params)
        }
        AnalyticCmd::Mmc {
            lambda,
            mu,
            c,
            transmission,
            p,
        } => {
            let t = transmission.spec()?;
            let report = eval_with(&t, |a| analytic::mmc_r0(*lambda, *mu, *c, a))?;
            let rate = p.map(|p| infection_rate(report.r0_sys, *lambda, p));
            let params = json!({
                "lambda": lambda, "mu": mu, "c": c,
                "transmission": transmission.describe(), "p": p,
            });
            ("analytic mmc", report, rate, params)
        }
        AnalyticCmd::Mmck {
            lambda,
            mu,
            c,
            k,
            transmission,
            p,
        } => {
            let t = transmission.spec()?;
            let report = eval_with(&t, |a| analytic::mmck_r0(*lambda, *mu, *c, *k, a))?;
            let rate = p.map(|p| infection_rate(report.r0_sys, *lambda, p));
            let params = json!({
                "lambda": lambda, "mu": mu, "c": c, "k": k,
                "transmission": transmission.describe(), "p": p,
            });
            ("analytic mmck", report, rate, params)
        }
        AnalyticCmd::Priority {
            lambda_h,
            lambda_l,
            mu,
            transmission,
            tol,
            p,
        } => {
            let t = transmission.spec()?;
            let report = eval_with(&t, |a| {
                markov::priority_r0(*lambda_h, *lambda_l, *mu, a, *tol)
            })?;
            let rate = p.map(|p| infection_rate(report.r0_sys, lambda_h + lambda_l, p));
            let params = json!({
                "lambda_h": lambda_h, "lambda_l": lambda_l, "mu": mu,
                "transmission": transmission.describe(), "tol": tol, "p": p,
            });
            ("analytic priority", report, rate, params)
        }
        AnalyticCmd::Windows {
            lambda_h,
            lambda_l,
            mu,
            f,
            transmission,
            p,
        } => {
            let t = transmission.spec()?;
            let report = eval_with(&t, |a| {
                analytic::windows_r0(*lambda_h, *lambda_l, *mu, a, *f)
            })?;
            let rate = p.map(|p| infection_rate(report.r0_sys, lambda_h + lambda_l, p));
            let params = json!({
                "lambda_h": lambda_h, "lambda_l": lambda_l, "mu": mu, "f": f,
                "transmission": transmission.describe(), "p": p,
            });
            ("analytic windows", report, rate, params)
        }
        AnalyticCmd::Dmdm1 {
            lambda,
            mu,
            m,
            transmission,
            p,
        } => {
            QueueSpec::DmDm1 {
                lambda: *lambda,
                mu: *mu,
                m: *m,
            }
            .validate()?;
            let t = transmission.spec()?;
            let report = analytic::dmdm1_r0(*m, *mu, &t)?;
            // Customers arrive at rate lambda*m, a batch per 1/lambda.
            let rate = p.map(|p| infection_rate(report.r0_sys, lambda * f64::from(*m), p));
            let params = json!({
                "lambda": lambda, "mu": mu, "m": m,
                "transmission": transmission.describe(), "p": p,
            });
            ("analytic dmdm1", report, rate, params)
        }
        AnalyticCmd::Distance {
            lambda,
            mu,
            alpha,
            d,
            p,
        } => {
            let report = analytic::distance_r0_mm1(*lambda, *mu, *alpha, *d)?;
            let rate = p.map(|p| infection_rate(report.r0_sys, *lambda, p));
            let params = json!({
                "lambda": lambda, "mu": mu, "alpha": alpha, "d": d, "p": p,
            });
            ("analytic distance", report, rate, params)
        }
        AnalyticCmd::Position {
            lambda,
            mu,
            rows,
            cols,
            spacing,
            strength,
            tol,
            p,
        } => {
            let rates = PositionRates::snake_gravity(*rows, *cols, *spacing, *strength)?;
            let report = analytic::position_r0_mm1(*lambda, *mu, &rates, *tol)?;
            let rate = p.map(|p| infection_rate(report.r0_sys, *lambda, p));
            let params = json!({
                "lambda": lambda, "mu": mu, "rows": rows, "cols": cols,
                "spacing": spacing, "strength": strength, "tol": tol, "p": p,
            });
            ("analytic position", report, rate, params)
        }
    };
    emit(out, &render_report(&report, rate)?)?;
    print_manifest(name, None, params);
    Ok(())
}

fn render_estimate(est: &r0sys::SimEstimate) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mean = {}", est.mean);
    let _ = writeln!(s, "std_error = {}", est.std_error);
    let _ = writeln!(s, "ci_low = {}", est.ci_low);
    let _ = writeln!(s, "ci_high = {}", est.ci_high);
    let _ = writeln!(s, "n_samples = {}", est.n_samples);
    let _ = writeln!(s, "replications = {}", est.replication_count);
    let _ = writeln!(s, "seed = {}", est.seed);
    s
}

fn render_estimate_row(name: &str, est: &r0sys::SimEstimate) -> String {
    format!(
        "{name} {} {} {} {} {}\n",
        est.mean, est.std_error, est.ci_low, est.ci_high, est.n_samples
    )
}

fn trace_text(model: &QueueSpec, arrivals: u64, seed: u64) -> Result<String, Error> {
    let trace = sim::trace(model, arrivals, seed, 0)?;
    let mut bytes = Vec::new();
    trace
        .write_to(&mut bytes)
        .map_err(|e| Error::bad_range("trace", &e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("trace dump is utf8"))
}

struct SimJob {
    name: &'static str,
    model: QueueSpec,
    transmission: TransmissionSpec,
    params: serde_json::Value,
}

fn simulate_job(cmd: &SimulateCmd) -> Result<SimJob, Error> {
    Ok(match cmd {
        SimulateCmd::Mm1 {
            lambda,
            mu,
            transmission,
            ..
        } => SimJob {
            name: "simulate mm1",
            model: QueueSpec::MM1 {
                lambda: *lambda,
                mu: *mu,
            },
            transmission: transmission.spec()?,
            params: json!({
                "lambda": lambda, "mu": mu,
                "transmission": transmission.describe(),
            }),
        },
        SimulateCmd::Mmc {
            lambda,
            mu,
            c,
            transmission,
            ..
        } => SimJob {
            name: "simulate mmc",
            model: QueueSpec::MMC {
                lambda: *lambda,
                mu: *mu,
                c: *c,
            },
            transmission: transmission.spec()?,
            params: json!({
                "lambda": lambda, "mu": mu, "c": c,
                "transmission": transmission.describe(),
            }),
        },
        SimulateCmd::Mmck {
            lambda,
            mu,
            c,
            k,
            transmission,
            ..
        } => SimJob {
            name: "simulate mmck",
            model: QueueSpec::MMCK {
                lambda: *lambda,
                mu: *mu,
                c: *c,
                k: *k,
            },
            transmission: transmission.spec()?,
            params: json!({
                "lambda": lambda, "mu": mu, "c": c, "k": k,
                "transmission": transmission.describe(),
            }),
        },
        SimulateCmd::Priority {
            lambda_h,
            lambda_l,
            mu,
            transmission,
            by_class,
            ..
        } => SimJob {
            name: "simulate priority",
            model: QueueSpec::PriorityMM1 {
                lambda_h: *lambda_h,
                lambda_l: *lambda_l,
                mu: *mu,
            },
            transmission: transmission.spec()?,
            params: json!({
                "lambda_h": lambda_h, "lambda_l": lambda_l, "mu": mu,
                "transmission": transmission.describe(), "by_class": by_class,
            }),
        },
        SimulateCmd::Windows {
            lambda_h,
            lambda_l,
            mu,
            f,
            transmission,
            ..
        } => SimJob {
            name: "simulate windows",
            model: QueueSpec::Windows {
                lambda_h: *lambda_h,
                lambda_l: *lambda_l,
                mu: *mu,
                f: *f,
            },
            transmission: transmission.spec()?,
            params: json!({
                "lambda_h": lambda_h, "lambda_l": lambda_l, "mu": mu, "f": f,
                "transmission": transmission.describe(),
            }),
        },
        SimulateCmd::Dmdm1 {
            lambda,
            mu,
            m,
            transmission,
            ..
        } => SimJob {
            name: "simulate dmdm1",
            model: QueueSpec::DmDm1 {
                lambda: *lambda,
                mu: *mu,
                m: *m,
            },
            transmission: transmission.spec()?,
            params: json!({
                "lambda": lambda, "mu": mu, "m": m,
                "transmission": transmission.describe(),
            }),
        },
        SimulateCmd::Distance {
            lambda,
            mu,
            alpha,
            d,
            ..
        } => SimJob {
            name: "simulate distance",
            model: QueueSpec::MM1 {
                lambda: *lambda,
                mu: *mu,
            },
            transmission: TransmissionSpec::DistanceThreshold {
                alpha: *alpha,
                d: *d,
            },
            params: json!({
                "lambda": lambda, "mu": mu, "alpha": alpha, "d": d,
            }),
        },
        SimulateCmd::Position {
            lambda,
            mu,
            rows,
            cols,
            spacing,
            strength,
            ..
        } => SimJob {
            name: "simulate position",
            model: QueueSpec::MM1 {
                lambda: *lambda,
                mu: *mu,
            },
            transmission: TransmissionSpec::PositionDependent {
                rates: PositionRates::snake_gravity(*rows, *cols, *spacing, *strength)?,
            },
            params: json!({
                "lambda": lambda, "mu": mu, "rows": rows, "cols": cols,
                "spacing": spacing, "strength": strength,
            }),
        },
        SimulateCmd::Multi { .. } => unreachable!("multi is dispatched separately"),
    })
}

fn run_simulate(
    cmd: &SimulateCmd,
    file: &FileConfig,
    out: &Option<PathBuf>,
) -> Result<(), Error> {
    // Multi differs in both the estimator entry point and the output.
    if let SimulateCmd::Multi {
        lambda,
        mu,
        c,
        k,
        alpha,
        p,
        flags,
    } = cmd
    {
        let cfg = resolve_sim(&flags.sim, file);
        let model = match (c, k) {
            (1, None) => QueueSpec::MM1 {
                lambda: *lambda,
                mu: *mu,
            },
            (c, None) => QueueSpec::MMC {
                lambda: *lambda,
                mu: *mu,
                c: *c,
            },
            (c, Some(k)) => QueueSpec::MMCK {
                lambda: *lambda,
                mu: *mu,
                c: *c,
                k: *k,
            },
        };
        let params = json!({
            "lambda": lambda, "mu": mu, "c": c, "k": k, "alpha": alpha, "p": p,
            "sim": sim_cfg_json(&cfg),
        });
        if let Some(n) = flags.trace {
            emit(out, &trace_text(&model, n, cfg.seed)?)?;
        } else {
            let est = sim::estimate_multi_infector_rate(&model, *alpha, *p, &cfg)?;
            emit(out, &render_estimate(&est))?;
        }
        print_manifest("simulate multi", Some(cfg.seed), params);
        return Ok(());
    }

    let flags = match cmd {
        SimulateCmd::Mm1 { flags, .. }
        | SimulateCmd::Mmc { flags, .. }
        | SimulateCmd::Mmck { flags, .. }
        | SimulateCmd::Priority { flags, .. }
        | SimulateCmd::Windows { flags, .. }
        | SimulateCmd::Dmdm1 { flags, .. }
        | SimulateCmd::Distance { flags, .. }
        | SimulateCmd::Position { flags, .. } => flags,
        SimulateCmd::Multi { .. } => unreachable!("handled above"),
    };
    let cfg = resolve_sim(&flags.sim, file);
    let job = simulate_job(cmd)?;
    let mut params = job.params;
    params["sim"] = sim_cfg_json(&cfg);

    if let Some(n) = flags.trace {
        emit(out, &trace_text(&job.model, n, cfg.seed)?)?;
        print_manifest(job.name, Some(cfg.seed), params);
        return Ok(());
    }

    let by_class = matches!(
        cmd,
        SimulateCmd::Priority { by_class: true, .. }
    );
    let mut text = String::new();
    if by_class {
        let TransmissionSpec::Exponential { alpha } = job.transmission else {
            return Err(Error::UnsupportedCombination {
                detail: "class decomposition takes a single exponential rate".into(),
            });
        };
        let est = sim::estimate_r0_by_class(&job.model, alpha, &cfg)?;
        text.push_str(&render_estimate_row("r0_h", &est.r0_h));
        text.push_str(&render_estimate_row("r0_l", &est.r0_l));
        text.push_str(&render_estimate_row("r0_hbh", &est.r0_hbh));
        text.push_str(&render_estimate_row("r0_hbl", &est.r0_hbl));
        text.push_str(&render_estimate_row("r0_lbh", &est.r0_lbh));
        text.push_str(&render_estimate_row("r0_lbl", &est.r0_lbl));
        text.push_str(&render_estimate_row("r0_lah", &est.r0_lah));
        text.push_str(&render_estimate_row("before_half", &est.before_half));
        text.push_str(&render_estimate_row("after_half", &est.after_half));
    } else {
        let est = sim::estimate_r0(&job.model, &job.transmission, &cfg)?;
        text.push_str(&render_estimate(&est));
    }
    emit(out, &text)?;
    print_manifest(job.name, Some(cfg.seed), params);
    Ok(())
}

const ORACLE_R0_COLUMNS: [&str; 3] = ["r0_sys_sim", "r0_sys_ci_low", "r0_sys_ci_high"];

fn push_est(row: &mut Vec<f64>, est: &r0sys::SimEstimate) {
    row.extend([est.mean, est.ci_low, est.ci_high]);
}

fn push_scaled(row: &mut Vec<f64>, est: &r0sys::SimEstimate, q: f64) {
    row.extend([q * est.mean, q * est.ci_low, q * est.ci_high]);
}

fn push_nan(row: &mut Vec<f64>, n: usize) {
    row.extend(std::iter::repeat_n(f64::NAN, n));
}

fn oracle_occupancy(
    table: &mut SweepTable,
    lambda: f64,
    mu: f64,
    c: u32,
    alpha: f64,
    cfg: &SimConfig,
) -> Result<(), Error> {
    table
        .columns
        .extend(ORACLE_R0_COLUMNS.map(String::from));
    table
        .columns
        .extend(["loss_sim", "loss_ci_low", "loss_ci_high"].map(String::from));
    let t = TransmissionSpec::Exponential { alpha };
    for row in &mut table.rows {
        let k = row[0];
        if k.is_finite() {
            let model = QueueSpec::MMCK {
                lambda,
                mu,
                c,
                k: k as u32,
            };
            push_est(row, &sim::estimate_r0(&model, &t, cfg)?);
            let occ = sim::estimate_occupancy_metrics(&model, cfg)?;
            push_est(row, &occ.loss.expect("finite capacity reports loss"));
        } else {
            let model = QueueSpec::MMC { lambda, mu, c };
            push_est(row, &sim::estimate_r0(&model, &t, cfg)?);
            push_nan(row, 3);
        }
    }
    Ok(())
}

fn oracle_windows(
    table: &mut SweepTable,
    lambda_h: f64,
    lambda_l: f64,
    mu: f64,
    alpha: f64,
    cfg: &SimConfig,
) -> Result<(), Error> {
    table.columns.extend(
        [
            "r0_h_sim",
            "r0_h_ci_low",
            "r0_h_ci_high",
            "r0_l_sim",
            "r0_l_ci_low",
            "r0_l_ci_high",
        ]
        .map(String::from),
    );
    let t = TransmissionSpec::Exponential { alpha };
    let q_h = lambda_h / (lambda_h + lambda_l);
    for row in &mut table.rows {
        if row[3] == ROW_PRIORITY_REF {
            let model = QueueSpec::PriorityMM1 {
                lambda_h,
                lambda_l,
                mu,
            };
            let est = sim::estimate_r0_by_class(&model, alpha, cfg)?;
            push_est(row, &est.r0_h);
            push_est(row, &est.r0_l);
        } else if row[3] == ROW_FCFS_REF {
            let model = QueueSpec::MM1 {
                lambda: lambda_h + lambda_l,
                mu,
            };
            let est = sim::estimate_r0(&model, &t, cfg)?;
            push_scaled(row, &est, q_h);
            push_scaled(row, &est, 1.0 - q_h);
        } else if row[4] == 0.0 {
            let f = row[0];
            let high = QueueSpec::MM1 {
                lambda: lambda_h / f,
                mu,
            };
            let low = QueueSpec::MM1 {
                lambda: lambda_l / (1.0 - f),
                mu,
            };
            push_scaled(row, &sim::estimate_r0(&high, &t, cfg)?, q_h);
            push_scaled(row, &sim::estimate_r0(&low, &t, cfg)?, 1.0 - q_h);
        } else {
            push_nan(row, 6);
        }
    }
    Ok(())
}

fn oracle_service_rate(
    table: &mut SweepTable,
    lambda: f64,
    mu: f64,
    alpha: f64,
    cfg: &SimConfig,
) -> Result<(), Error> {
    table
        .columns
        .extend(ORACLE_R0_COLUMNS.map(String::from));
    let t = TransmissionSpec::Exponential { alpha };
    for row in &mut table.rows {
        let model = QueueSpec::MM1 {
            lambda,
            mu: row[0] * mu,
        };
        push_est(row, &sim::estimate_r0(&model, &t, cfg)?);
    }
    Ok(())
}

fn run_sweep(cmd: &SweepCmd, file: &FileConfig, out: &Option<PathBuf>) -> Result<(), Error> {
    let (name, table, flags, cfg, params) = match cmd {
        SweepCmd::Occupancy {
            lambda,
            mu,
            c,
            alpha,
            k,
            flags,
        } => {
            let grid = parse_u32_grid(k)?;
            let mut table = interventions::occupancy_sweep(*lambda, *mu, *c, *alpha, grid)?;
            let cfg = resolve_sim(&flags.sim, file);
            if flags.oracle.is_some() {
                oracle_occupancy(&mut table, *lambda, *mu, *c, *alpha, &cfg)?;
            }
            let params = json!({
                "lambda": lambda, "mu": mu, "c": c, "alpha": alpha, "k": k,
            });
            ("sweep occupancy", table, flags, cfg, params)
        }
        SweepCmd::Windows {
            lambda_h,
            lambda_l,
            mu,
            alpha,
            f,
            step,
            flags,
        } => {
            let grid = parse_f64_grid(f, *step)?;
            let mut table =
                interventions::windows_sweep(*lambda_h, *lambda_l, *mu, *alpha, &grid)?;
            let cfg = resolve_sim(&flags.sim, file);
            if flags.oracle.is_some() {
                oracle_windows(&mut table, *lambda_h, *lambda_l, *mu, *alpha, &cfg)?;
            }
            let params = json!({
                "lambda_h": lambda_h, "lambda_l": lambda_l, "mu": mu,
                "alpha": alpha, "f": f, "step": step,
            });
            ("sweep windows", table, flags, cfg, params)
        }
        SweepCmd::ServiceRate {
            lambda,
            mu,
            alpha,
            scale,
            step,
            flags,
        } => {
            let grid = parse_f64_grid(scale, *step)?;
            let mut table = interventions::service_rate_sweep(*lambda, *mu, *alpha, &grid)?;
            let cfg = resolve_sim(&flags.sim, file);
            if flags.oracle.is_some() {
                oracle_service_rate(&mut table, *lambda, *mu, *alpha, &cfg)?;
            }
            let params = json!({
                "lambda": lambda, "mu": mu, "alpha": alpha, "scale": scale, "step": step,
            });
            ("sweep service-rate", table, flags, cfg, params)
        }
    };
    table.validate()?;
    let format = flags.format.or(file.format).unwrap_or(FormatArg::Csv);
    let text = match format {
        FormatArg::Csv => table.to_csv(),
        FormatArg::Json => table.to_json(),
    };
    emit(out, &text)?;
    let oracle = flags.oracle.is_some();
    let mut params = params;
    params["format"] = json!(match format {
        FormatArg::Csv => "csv",
        FormatArg::Json => "json",
    });
    params["oracle"] = json!(oracle);
    if oracle {
        params["sim"] = sim_cfg_json(&cfg);
    }
    print_manifest(name, oracle.then_some(cfg.seed), params);
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    let file = load_config(&cli.config)?;
    match &cli.cmd {
        Cmd::Analytic { model } => run_analytic(model, &cli.out),
        Cmd::Simulate { model } => run_simulate(model, &file, &cli.out),
        Cmd::Sweep { study } => run_sweep(study, &file, &cli.out),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NoConvergence { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
