//! Event engines.
//!
//! Pairs are accounted once, at the earlier departure of the two members:
//! at that instant the pair's overlap is final (`departing time - later
//! arrival`) and every partner still present is known. Per-customer
//! infection tallies are therefore complete at the customer's own
//! departure. All randomness comes from streams keyed by customer or pair
//! index, so event-processing order never changes a draw.

use super::rng::{stream, DOMAIN_CUSTOMER, DOMAIN_PAIR};
use super::trace::{CustomerRecord, EventTrace};
use crate::core::PositionRates;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

/// Regeneration cycles a warmup must observe besides its arrival count.
const WARMUP_CYCLES: u64 = 10;
/// State histogram size when the state space is unbounded.
const PASTA_BINS: usize = 64;

/// Totally ordered event time for heap storage.
#[derive(PartialEq)]
struct Tf(f64);
impl Eq for Tf {}
impl PartialOrd for Tf {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Tf {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Per-pair transmission evaluation mode.
pub(crate) enum Kernel<'a> {
    /// No transmission accounting (occupancy or trace runs).
    Off,
    /// Overlap-length law: mixture components (weight, rate).
    Plain { comps: Vec<(f64, f64)> },
    /// Positional cutoff: transmit at `alpha` when queue ranks differ by
    /// at most `d`, never otherwise.
    GapRule { alpha: f64, d: u32 },
    /// Position-resolved rates integrated over the pair's co-sojourn.
    Field { rates: &'a PositionRates },
    /// Cumulative exposure to flagged infectious customers.
    Cumulative { alpha: f64, p: f64 },
}

impl Kernel<'_> {
    fn infectious_prob(&self) -> f64 {
        match self {
            Kernel::Cumulative { p, .. } => *p,
            _ => 0.0,
        }
    }

    fn needs_departure_schedule(&self) -> bool {
        matches!(self, Kernel::Field { .. })
    }
}

fn plain_prob(comps: &[(f64, f64)], w: f64) -> f64 {
    comps
        .iter()
        .map(|&(q, a)| q * (1.0 - (-a * w).exp()))
        .sum()
}

/// One replication's raw results.
pub(crate) struct RepOut {
    pub mean_tagged: f64,
    pub n_tagged: u64,
    pub rate: f64,
    pub mean_n: f64,
    pub second_factorial: f64,
    pub loss: f64,
    /// Arrival-seen occupancy histogram, a distribution check for tests.
    #[cfg_attr(not(test), allow(dead_code))]
    pub pasta: Vec<u64>,
    pub trace: Option<EventTrace>,
    pub class: Option<ClassSums>,
}

/// Tagged-customer bucket sums for the two-class engine, split by IC
/// class, partner class, and arrival order.
#[derive(Default, Clone, Copy)]
pub(crate) struct ClassSums {
    pub n_high: u64,
    pub n_low: u64,
    pub hbh: f64,
    pub hbl: f64,
    pub hah: f64,
    pub hal: f64,
    pub lbh: f64,
    pub lbl: f64,
    pub lah: f64,
    pub lal: f64,
}

pub(crate) struct EngineCfg {
    pub seed: u64,
    pub rep: u32,
    pub warmup_arrivals: u64,
    pub quota: u64,
    pub bernoulli: bool,
    pub domain_shift: u32,
    /// Trace runs skip warmup, measure every arrival, stop generating at
    /// the quota, and drain to empty.
    pub trace_mode: bool,
}

struct Cust {
    id: u64,
    class: u8,
    arrival: f64,
    departure: f64,
    rank: u64,
    infectious: bool,
    exposure: f64,
    tally: f64,
    before: [f64; 2],
    after: [f64; 2],
    measured: bool,
    rng: Option<ChaCha8Rng>,
}

/// Directed uniforms for the pair, as (id_a to id_b, id_b to id_a).
fn pair_uniforms(cfg: &EngineCfg, a: u64, b: u64) -> (f64, f64) {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let mut rs = stream(DOMAIN_PAIR + cfg.domain_shift, cfg.seed, cfg.rep, lo, hi);
    let u1: f64 = rs.gen();
    let u2: f64 = rs.gen();
    if a < b {
        (u1, u2)
    } else {
        (u2, u1)
    }
}

/// Infection probabilities for the ordered directions (x infects y,
/// y infects x) given overlap `w` ending at `d_first`.
fn directed_probs(
    kernel: &Kernel,
    x: &Cust,
    y: &Cust,
    w: f64,
    d_first: f64,
    schedule: &[f64],
) -> (f64, f64) {
    match kernel {
        Kernel::Plain { comps } => {
            let p = plain_prob(comps, w);
            (p, p)
        }
        Kernel::GapRule { alpha, d } => {
            if x.rank.abs_diff(y.rank) <= *d as u64 {
                let p = 1.0 - (-alpha * w).exp();
                (p, p)
            } else {
                (0.0, 0.0)
            }
        }
        Kernel::Field { rates } => field_pair(rates, schedule, x, y, d_first),
        _ => (0.0, 0.0),
    }
}

/// Integrates position-dependent rates over the co-sojourn, walking the
/// global departure schedule. A customer's position is its departure rank
/// minus the count of departures so far, one-based.
fn field_pair(
    rates: &PositionRates,
    schedule: &[f64],
    x: &Cust,
    y: &Cust,
    d_first: f64,
) -> (f64, f64) {
    let start = x.arrival.max(y.arrival);
    let mut r = schedule.partition_point(|&d| d <= start);
    let mut t = start;
    let (mut axy, mut ayx) = (0.0, 0.0);
    while t < d_first {
        let t_next = if r < schedule.len() {
            schedule[r].min(d_first)
        } else {
            d_first
        };
        let dur = t_next - t;
        if dur > 0.0 {
            let px = (x.rank - r as u64 + 1) as u32;
            let py = (y.rank - r as u64 + 1) as u32;
            axy += dur * rates.rate(px, py);
            ayx += dur * rates.rate(py, px);
        }
        t = t_next;
        r += 1;
    }
    (1.0 - (-axy).exp(), 1.0 - (-ayx).exp())
}

/// Applies the departing customer's pairs against every remaining active
/// customer, updating both sides' tallies and order/class buckets.
fn sweep_pairs(
    x: &mut Cust,
    others: &mut [Cust],
    kernel: &Kernel,
    cfg: &EngineCfg,
    schedule: &[f64],
) {
    let d_first = x.departure;
    for y in others.iter_mut() {
        let w = d_first - x.arrival.max(y.arrival);
        match kernel {
            Kernel::Off => {}
            Kernel::Cumulative { .. } => {
                if x.infectious && !y.infectious {
                    y.exposure += w;
                }
                if y.infectious && !x.infectious {
                    x.exposure += w;
                }
            }
            _ => {
                let (pxy, pyx) = directed_probs(kernel, x, y, w, d_first, schedule);
                let (vxy, vyx) = if cfg.bernoulli {
                    let (uxy, uyx) = pair_uniforms(cfg, x.id, y.id);
                    (f64::from(uxy < pxy), f64::from(uyx < pyx))
                } else {
                    (pxy, pyx)
                };
                x.tally += vxy;
                y.tally += vyx;
                if x.id < y.id {
                    x.after[y.class as usize] += vxy;
                    y.before[x.class as usize] += vyx;
                } else {
                    x.before[y.class as usize] += vxy;
                    y.after[x.class as usize] += vyx;
                }
            }
        }
    }
}

/// Shared measurement bookkeeping across engines.
struct Meter {
    phase: u8,
    warmup_needed: u64,
    cycles_needed: u64,
    quota: u64,
    arr_seen: u64,
    cycles: u64,
    measured: u64,
    blocked_measured: u64,
    outstanding: u64,
    measuring: bool,
    t0: f64,
    t1: f64,
    cur_t: f64,
    acc_n: f64,
    acc_nn1: f64,
    sample_sum: f64,
    infect_sum: f64,
    pasta: Vec<u64>,
}

impl Meter {
    fn new(cfg: &EngineCfg, pasta_bins: usize) -> Self {
        Meter {
            phase: 0,
            warmup_needed: if cfg.trace_mode {
                0
            } else {
                cfg.warmup_arrivals
            },
            cycles_needed: if cfg.trace_mode { 0 } else { WARMUP_CYCLES },
            quota: cfg.quota,
            arr_seen: 0,
            cycles: 0,
            measured: 0,
            blocked_measured: 0,
            outstanding: 0,
            measuring: false,
            t0: 0.0,
            t1: 0.0,
            cur_t: 0.0,
            acc_n: 0.0,
            acc_nn1: 0.0,
            sample_sum: 0.0,
            infect_sum: 0.0,
            pasta: vec![0; pasta_bins],
        }
    }

    fn integrate(&mut self, t: f64, n: usize) {
        if self.measuring {
            let dt = t - self.cur_t;
            let nf = n as f64;
            self.acc_n += nf * dt;
            self.acc_nn1 += nf * (nf - 1.0) * dt;
            self.cur_t = t;
        }
    }

    /// Marks one arrival at `t` seeing `seen` in system; returns whether it
    /// occupies a measured slot.
    fn on_arrival(&mut self, t: f64, seen: usize, first: bool) -> bool {
        if seen == 0 && !first {
            self.cycles += 1;
        }
        if self.phase == 0
            && self.arr_seen >= self.warmup_needed
            && self.cycles >= self.cycles_needed
        {
            self.phase = 1;
            self.t0 = t;
            self.cur_t = t;
            self.measuring = true;
        }
        self.arr_seen += 1;
        if self.phase != 1 {
            return false;
        }
        let bin = seen.min(self.pasta.len() - 1);
        self.pasta[bin] += 1;
        self.measured += 1;
        if self.measured == self.quota {
            self.phase = 2;
            self.t1 = t;
            self.measuring = false;
        }
        true
    }

    fn finish(self, rate_alpha: Option<f64>) -> (f64, f64, f64, f64, f64, u64, Vec<u64>) {
        let window = self.t1 - self.t0;
        let (mean_n, second) = if window > 0.0 {
            (self.acc_n / window, self.acc_nn1 / window)
        } else {
            (0.0, 0.0)
        };
        let loss = if self.measured > 0 {
            self.blocked_measured as f64 / self.measured as f64
        } else {
            0.0
        };
        let mean_tagged = if self.measured > 0 {
            self.sample_sum / self.measured as f64
        } else {
            0.0
        };
        let rate = match rate_alpha {
            Some(_) if window > 0.0 => self.infect_sum / window,
            _ => 0.0,
        };
        (mean_tagged, rate, mean_n, second, loss, self.measured, self.pasta)
    }
}

pub(crate) struct FcfsModel {
    pub lambda: f64,
    pub mu: f64,
    pub c: u32,
    pub k: Option<u32>,
}

pub(crate) fn run_fcfs(model: &FcfsModel, kernel: &Kernel, cfg: &EngineCfg) -> RepOut {
    let exp_gap = Exp::new(model.lambda).unwrap();
    let exp_svc = Exp::new(model.mu).unwrap();
    let p_inf = kernel.infectious_prob();
    let draw = |id: u64| {
        let mut rng = stream(
            DOMAIN_CUSTOMER + cfg.domain_shift,
            cfg.seed,
            cfg.rep,
            id,
            0,
        );
        let gap = exp_gap.sample(&mut rng);
        let svc = exp_svc.sample(&mut rng);
        let u: f64 = rng.gen();
        (gap, svc, u < p_inf)
    };

    let pasta_bins = model.k.map_or(PASTA_BINS, |k| k as usize + 1);
    let mut meter = Meter::new(cfg, pasta_bins);
    let mut free = vec![0.0f64; model.c as usize];
    let mut dep_heap: BinaryHeap<Reverse<(Tf, u64)>> = BinaryHeap::new();
    let mut active: Vec<Cust> = Vec::new();
    let mut schedule: Vec<f64> = Vec::new();
    let track_schedule = kernel.needs_departure_schedule();
    let mut admitted: u64 = 0;
    let mut records: Vec<CustomerRecord> = Vec::new();
    let mut last_event = 0.0;
    let rate_alpha = match kernel {
        Kernel::Cumulative { alpha, .. } => Some(*alpha),
        _ => None,
    };

    let mut next_id: u64 = 1;
    let mut pending = {
        let (gap, svc, inf) = draw(0);
        Some((gap, 0u64, svc, inf))
    };

    loop {
        let next_dep = dep_heap.peek().map(|Reverse((t, id))| (t.0, *id));
        let take_dep = match (&next_dep, &pending) {
            (Some((td, _)), Some((ta, ..))) => *td <= *ta,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        if take_dep {
            let Reverse((t, xid)) = dep_heap.pop().unwrap();
            let t = t.0;
            meter.integrate(t, active.len());
            last_event = t;
            let idx = active.iter().position(|c| c.id == xid).unwrap();
            let mut x = active.remove(idx);
            sweep_pairs(&mut x, &mut active, kernel, cfg, &schedule);
            if x.measured {
                match kernel {
                    Kernel::Cumulative { alpha, .. } => {
                        if !x.infectious {
                            meter.infect_sum += 1.0 - (-alpha * x.exposure).exp();
                        }
                    }
                    _ => meter.sample_sum += x.tally,
                }
                meter.outstanding -= 1;
            }
            if cfg.trace_mode {
                records.push(CustomerRecord {
                    id: x.id,
                    class: x.class,
                    arrival: x.arrival,
                    departure: t,
                    blocked: false,
                });
            }
        } else {
            let (a, id, svc, inf) = pending.take().unwrap();
            meter.integrate(a, active.len());
            last_event = a;
            let seen = active.len();
            let slot = meter.on_arrival(a, seen, id == 0);
            let blocked = model.k.is_some_and(|k| seen as u64 >= k as u64);
            if blocked {
                if slot {
                    meter.blocked_measured += 1;
                }
                if cfg.trace_mode {
                    records.push(CustomerRecord {
                        id,
                        class: 0,
                        arrival: a,
                        departure: a,
                        blocked: true,
                    });
                }
            } else {
                let (si, sf) = free
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, v)| (i, *v))
                    .unwrap();
                let start = a.max(sf);
                let d = start + svc;
                free[si] = d;
                dep_heap.push(Reverse((Tf(d), id)));
                let rank = admitted;
                admitted += 1;
                if track_schedule {
                    schedule.push(d);
                }
                if slot {
                    meter.outstanding += 1;
                }
                active.push(Cust {
                    id,
                    class: 0,
                    arrival: a,
                    departure: d,
                    rank,
                    infectious: inf,
                    exposure: 0.0,
                    tally: 0.0,
                    before: [0.0; 2],
                    after: [0.0; 2],
                    measured: slot,
                    rng: None,
                });
            }
            if !cfg.trace_mode || next_id < cfg.quota {
                let (gap, svc, inf) = draw(next_id);
                pending = Some((a + gap, next_id, svc, inf));
                next_id += 1;
            }
        }
        if !cfg.trace_mode && meter.phase == 2 && meter.outstanding == 0 {
            break;
        }
    }

    let trace = cfg.trace_mode.then(|| {
        records.sort_by_key(|r| r.id);
        EventTrace {
            records,
            horizon: last_event,
        }
    });
    let (mean_tagged, rate, mean_n, second_factorial, loss, n_tagged, pasta) =
        meter.finish(rate_alpha);
    RepOut {
        mean_tagged,
        n_tagged,
        rate,
        mean_n,
        second_factorial,
        loss,
        pasta,
        trace,
        class: None,
    }
}

pub(crate) fn run_priority(
    lambda_h: f64,
    lambda_l: f64,
    mu: f64,
    kernel: &Kernel,
    cfg: &EngineCfg,
) -> RepOut {
    let total = lambda_h + lambda_l;
    let q_h = lambda_h / total;
    let exp_gap = Exp::new(total).unwrap();
    let exp_svc = Exp::new(mu).unwrap();
    let draw = |id: u64| {
        let mut rng = stream(
            DOMAIN_CUSTOMER + cfg.domain_shift,
            cfg.seed,
            cfg.rep,
            id,
            0,
        );
        let gap = exp_gap.sample(&mut rng);
        let uc: f64 = rng.gen();
        let class = u8::from(uc >= q_h);
        (gap, class, rng)
    };

    let mut meter = Meter::new(cfg, PASTA_BINS);
    let mut active: Vec<Cust> = Vec::new();
    let mut high_q: VecDeque<u64> = VecDeque::new();
    let mut low_q: VecDeque<u64> = VecDeque::new();
    let mut serving: Option<(u64, f64)> = None;
    let mut class_sums = ClassSums::default();
    let mut records: Vec<CustomerRecord> = Vec::new();
    let mut last_event = 0.0;

    let mut next_id: u64 = 1;
    let mut pending = {
        let (gap, class, rng) = draw(0);
        Some((gap, 0u64, class, rng))
    };

    let start_service =
        |active: &mut [Cust], serving: &mut Option<(u64, f64)>, id: u64, now: f64| {
            let c = active.iter_mut().find(|c| c.id == id).unwrap();
            let svc = exp_svc.sample(c.rng.as_mut().unwrap());
            *serving = Some((id, now + svc));
        };

    loop {
        let take_dep = match (&serving, &pending) {
            (Some((_, td)), Some((ta, ..))) => *td <= *ta,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        if take_dep {
            let (xid, t) = serving.take().unwrap();
            meter.integrate(t, active.len());
            last_event = t;
            let idx = active.iter().position(|c| c.id == xid).unwrap();
            let mut x = active.remove(idx);
            x.departure = t;
            sweep_pairs(&mut x, &mut active, kernel, cfg, &[]);
            if x.measured {
                meter.sample_sum += x.tally;
                meter.outstanding -= 1;
                if x.class == 0 {
                    class_sums.n_high += 1;
                    class_sums.hbh += x.before[0];
                    class_sums.hbl += x.before[1];
                    class_sums.hah += x.after[0];
                    class_sums.hal += x.after[1];
                } else {
                    class_sums.n_low += 1;
                    class_sums.lbh += x.before[0];
                    class_sums.lbl += x.before[1];
                    class_sums.lah += x.after[0];
                    class_sums.lal += x.after[1];
                }
            }
            if cfg.trace_mode {
                records.push(CustomerRecord {
                    id: x.id,
                    class: x.class,
                    arrival: x.arrival,
                    departure: t,
                    blocked: false,
                });
            }
            if let Some(next) = high_q.pop_front().or_else(|| low_q.pop_front()) {
                start_service(&mut active, &mut serving, next, t);
            }
        } else {
            let (a, id, class, rng) = pending.take().unwrap();
            meter.integrate(a, active.len());
            last_event = a;
            let seen = active.len();
            let slot = meter.on_arrival(a, seen, id == 0);
            if slot {
                meter.outstanding += 1;
            }
            active.push(Cust {
                id,
                class,
                arrival: a,
                departure: f64::NAN,
                rank: 0,
                infectious: false,
                exposure: 0.0,
                tally: 0.0,
                before: [0.0; 2],
                after: [0.0; 2],
                measured: slot,
                rng: Some(rng),
            });
            match serving {
                None => start_service(&mut active, &mut serving, id, a),
                Some((cur, _)) => {
                    let cur_class = active.iter().find(|c| c.id == cur).unwrap().class;
                    if class == 0 && cur_class == 1 {
                        low_q.push_front(cur);
                        start_service(&mut active, &mut serving, id, a);
                    } else if class == 0 {
                        high_q.push_back(id);
                    } else {
                        low_q.push_back(id);
                    }
                }
            }
            if !cfg.trace_mode || next_id < cfg.quota {
                let (gap, class, rng) = draw(next_id);
                pending = Some((a + gap, next_id, class, rng));
                next_id += 1;
            }
        }
        if !cfg.trace_mode && meter.phase == 2 && meter.outstanding == 0 {
            break;
        }
    }

    let trace = cfg.trace_mode.then(|| {
        records.sort_by_key(|r| r.id);
        EventTrace {
            records,
            horizon: last_event,
        }
    });
    let (mean_tagged, rate, mean_n, second_factorial, loss, n_tagged, pasta) = meter.finish(None);
    RepOut {
        mean_tagged,
        n_tagged,
        rate,
        mean_n,
        second_factorial,
        loss,
        pasta,
        trace,
        class: Some(class_sums),
    }
}

pub(crate) fn run_dmdm1(
    lambda: f64,
    mu: f64,
    m: u32,
    kernel: &Kernel,
    cfg: &EngineCfg,
) -> RepOut {
    let gap = 1.0 / lambda;
    let svc = 1.0 / mu;
    let mf = m as f64;
    let mut meter = Meter::new(cfg, PASTA_BINS);
    let mut records: Vec<CustomerRecord> = Vec::new();
    let mut last_event;
    let mut batch: u64 = 0;
    loop {
        let tb = batch as f64 * gap;
        let mut batch_measured: Vec<u32> = Vec::new();
        for r in 0..m {
            let id = batch * m as u64 + r as u64;
            if meter.on_arrival(tb, r as usize, id == 0) {
                batch_measured.push(r);
            }
            if cfg.trace_mode {
                records.push(CustomerRecord {
                    id,
                    class: 0,
                    arrival: tb,
                    departure: tb + svc,
                    blocked: false,
                });
            }
        }
        // The quota batch's own service period falls outside [t0, t1].
        if meter.measuring {
            meter.acc_n += mf * svc;
            meter.acc_nn1 += mf * (mf - 1.0) * svc;
        }
        if let Kernel::Plain { comps } = kernel {
            let p = plain_prob(comps, svc);
            for &r in &batch_measured {
                let x_id = batch * m as u64 + r as u64;
                let tally = if cfg.bernoulli {
                    let mut hits = 0.0;
                    for s in 0..m {
                        if s == r {
                            continue;
                        }
                        let y_id = batch * m as u64 + s as u64;
                        let (uxy, _) = pair_uniforms(cfg, x_id, y_id);
                        hits += f64::from(uxy < p);
                    }
                    hits
                } else {
                    (mf - 1.0) * p
                };
                meter.sample_sum += tally;
            }
        }
        last_event = tb + svc;
        batch += 1;
        if cfg.trace_mode {
            if batch * m as u64 >= cfg.quota {
                break;
            }
        } else if meter.phase == 2 {
            break;
        }
    }
    let trace = cfg.trace_mode.then_some(EventTrace {
        records,
        horizon: last_event,
    });
    let (mean_tagged, rate, mean_n, second_factorial, loss, n_tagged, pasta) = meter.finish(None);
    RepOut {
        mean_tagged,
        n_tagged,
        rate,
        mean_n,
        second_factorial,
        loss,
        pasta,
        trace,
        class: None,
    }
}

/// Runs `f` once per replication index, possibly across threads, and
/// returns results in index order. `R0SYS_THREADS` caps the worker count.
pub(crate) fn run_replications<T: Send, F: Fn(u32) -> T + Sync>(reps: u32, f: F) -> Vec<T> {
    let threads = thread_count(reps);
    if threads <= 1 {
        return (0..reps).map(f).collect();
    }
    let mut slots: Vec<Option<T>> = (0..reps).map(|_| None).collect();
    let chunk = (reps as usize).div_ceil(threads);
    std::thread::scope(|scope| {
        for (ci, part) in slots.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (j, slot) in part.iter_mut().enumerate() {
                    *slot = Some(f((ci * chunk + j) as u32));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.unwrap()).collect()
}

fn thread_count(reps: u32) -> usize {
    let configured = std::env::var("R0SYS_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1);
    let hw = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    configured.unwrap_or(hw).min(reps.max(1) as usize)
}
