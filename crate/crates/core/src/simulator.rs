//! Event-driven simulation of the RT/NRT buffer.
//!
//! The simulator is written against the admission and service rules only;
//! it shares no code with the generator. NRT throttling is realised by
//! thinning: a rate-`lambda1` Poisson stream is generated and an arrival at
//! occupancy `k` is admitted with probability `lambda1(k) / lambda1`. NRT
//! service is preempted (and later resumed) whenever an RT packet arrives.
//!
//! Random numbers come from ChaCha8 seeded with `seed`, one stream per
//! source (RT arrivals, NRT arrivals, thinning, RT service, NRT service),
//! so a fixed seed reproduces a run bit for bit.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::metrics::QoSReport;
use crate::model::ModelParams;

pub const DEFAULT_WARMUP_EVENTS: u64 = 100_000;
pub const DEFAULT_MEASURED_EVENTS: u64 = 10_000_000;
pub const DEFAULT_BATCHES: usize = 20;
/// Half-width multiple within which a simulated value must contain the analytic one.
pub const AGREEMENT_HALF_WIDTHS: f64 = 3.0;
/// Absolute slack added to every agreement check, so that metrics with no
/// sample variance (e.g. RT statistics when RT traffic is negligible) are
/// not failed over rounding-level analytic values.
pub const AGREEMENT_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub params: ModelParams,
    pub seed: u64,
    pub warmup_events: u64,
    pub measured_events: u64,
    pub batches: usize,
}

impl SimConfig {
    pub fn new(params: ModelParams, seed: u64) -> Self {
        SimConfig {
            params,
            seed,
            warmup_events: DEFAULT_WARMUP_EVENTS,
            measured_events: DEFAULT_MEASURED_EVENTS,
            batches: DEFAULT_BATCHES,
        }
    }

    pub fn with_measured_events(mut self, events: u64) -> Self {
        self.measured_events = events;
        self
    }

    fn check(&self) -> Result<()> {
        if self.batches < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 batches, got {}",
                self.batches
            )));
        }
        if self.measured_events < self.batches as u64 {
            return Err(Error::InvalidConfig(format!(
                "measured_events ({}) must be >= batches ({})",
                self.measured_events, self.batches
            )));
        }
        Ok(())
    }
}

/// Batch-means point estimate with a 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub point: f64,
    pub half_width: f64,
}

impl Estimate {
    fn from_batches(values: &[f64], t_quantile: f64) -> Self {
        let b = values.len() as f64;
        let mean = values.iter().sum::<f64>() / b;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1.0);
        Estimate {
            point: mean,
            half_width: t_quantile * (var / b).sqrt(),
        }
    }

    /// True when `value` lies within `k` half-widths of the point estimate.
    pub fn contains(&self, value: f64, k: f64) -> bool {
        (value - self.point).abs() <= k * self.half_width
    }
}

/// Exposure and per-occupancy tallies kept for validating the simulator itself.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDiagnostics {
    pub measured_time: f64,
    /// Time spent in each state over the measured window, by state index.
    pub state_time: Vec<f64>,
    /// Time spent at each total occupancy `k = 0..=N`.
    pub occupancy_time: Vec<f64>,
    /// NRT admissions while at occupancy `k` (measured window).
    pub nrt_admissions_by_occupancy: Vec<u64>,
    /// Whole-run NRT admissions, including warmup.
    pub total_nrt_admitted: u64,
    pub total_nrt_departed: u64,
    pub final_nrt_in_queue: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEstimate {
    pub params: ModelParams,
    pub rt_loss_fraction: Estimate,
    pub mean_rt_in_queue: Estimate,
    pub mean_nrt_in_queue: Estimate,
    pub accepted_nrt_rate: Estimate,
    pub mean_rt_sojourn: Estimate,
    pub mean_nrt_sojourn: Estimate,
    pub rt_arrivals: u64,
    pub rt_losses: u64,
    pub nrt_admissions: u64,
    pub nrt_throttle_drops: u64,
    pub diagnostics: SimDiagnostics,
}

impl SimEstimate {
    /// `(name, estimate)` for every reported metric, in CSV column order.
    pub fn metrics(&self) -> [(&'static str, Estimate); 6] {
        [
            ("rt_loss_fraction", self.rt_loss_fraction),
            ("mean_rt_in_queue", self.mean_rt_in_queue),
            ("mean_nrt_in_queue", self.mean_nrt_in_queue),
            ("accepted_nrt_rate", self.accepted_nrt_rate),
            ("mean_rt_sojourn", self.mean_rt_sojourn),
            ("mean_nrt_sojourn", self.mean_nrt_sojourn),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    RtArrival,
    NrtArrival,
    Completion { generation: u64 },
}

#[derive(Debug, Clone, Copy)]
struct Scheduled {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.seq.cmp(&other.seq))
    }
}

#[derive(Default)]
struct Calendar {
    heap: BinaryHeap<Reverse<Scheduled>>,
    seq: u64,
}

impl Calendar {
    fn schedule(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.heap.push(Reverse(Scheduled {
            time,
            seq: self.seq,
            kind,
        }));
    }

    fn pop(&mut self) -> Option<Scheduled> {
        self.heap.pop().map(|Reverse(s)| s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Rt,
    Nrt,
}

struct InService {
    class: Class,
    completes_at: f64,
    generation: u64,
}

#[derive(Default, Clone, Copy)]
struct Batch {
    duration: f64,
    rt_area: f64,
    nrt_area: f64,
    rt_arrivals: u64,
    rt_losses: u64,
    nrt_admissions: u64,
    nrt_drops: u64,
    rt_sojourn_sum: f64,
    rt_departures: u64,
    nrt_sojourn_sum: f64,
    nrt_departures: u64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

struct Streams {
    rt_arrival: ChaCha8Rng,
    nrt_arrival: ChaCha8Rng,
    thinning: ChaCha8Rng,
    rt_service: ChaCha8Rng,
    nrt_service: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let stream = |id: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Streams {
            rt_arrival: stream(0),
            nrt_arrival: stream(1),
            thinning: stream(2),
            rt_service: stream(3),
            nrt_service: stream(4),
        }
    }
}

struct Sim {
    streams: Streams,
    rt_interarrival: Exp<f64>,
    nrt_interarrival: Option<Exp<f64>>,
    rt_service: Exp<f64>,
    nrt_service: Exp<f64>,
    calendar: Calendar,
    now: f64,
    /// Admission times of queued RT packets; the head is in service when RT is served.
    rt_queue: VecDeque<f64>,
    nrt_queue: VecDeque<f64>,
    /// Remaining work of a preempted NRT head-of-line packet.
    nrt_head_remaining: Option<f64>,
    in_service: Option<InService>,
    generation: u64,
    total_nrt_admitted: u64,
    total_nrt_departed: u64,
}

fn exp(rate: f64, name: &str) -> Result<Exp<f64>> {
    Exp::new(rate).map_err(|e| Error::InvalidConfig(format!("{name} rate {rate}: {e}")))
}

impl Sim {
    fn new(cfg: &SimConfig) -> Result<Self> {
        let p = cfg.params;
        let nrt_interarrival = if p.lambda_nrt() > 0.0 {
            Some(exp(p.lambda_nrt(), "lambda_nrt")?)
        } else {
            None
        };
        let mut sim = Sim {
            streams: Streams::new(cfg.seed),
            rt_interarrival: exp(p.lambda_rt(), "lambda_rt")?,
            nrt_interarrival,
            rt_service: exp(p.mu_rt(), "mu_rt")?,
            nrt_service: exp(p.mu_nrt(), "mu_nrt")?,
            calendar: Calendar::default(),
            now: 0.0,
            rt_queue: VecDeque::new(),
            nrt_queue: VecDeque::new(),
            nrt_head_remaining: None,
            in_service: None,
            generation: 0,
            total_nrt_admitted: 0,
            total_nrt_departed: 0,
        };
        let first_rt = sim.rt_interarrival.sample(&mut sim.streams.rt_arrival);
        sim.calendar.schedule(first_rt, EventKind::RtArrival);
        if let Some(d) = sim.nrt_interarrival {
            let first_nrt = d.sample(&mut sim.streams.nrt_arrival);
            sim.calendar.schedule(first_nrt, EventKind::NrtArrival);
        }
        Ok(sim)
    }

    fn occupancy(&self) -> usize {
        self.rt_queue.len() + self.nrt_queue.len()
    }

    /// Serves RT whenever any is present, preempting NRT service.
    fn dispatch(&mut self) {
        if let Some(s) = &self.in_service {
            if s.class == Class::Rt || self.rt_queue.is_empty() {
                return;
            }
            self.nrt_head_remaining = Some(s.completes_at - self.now);
            self.in_service = None;
        }
        let (class, work) = if !self.rt_queue.is_empty() {
            (
                Class::Rt,
                self.rt_service.sample(&mut self.streams.rt_service),
            )
        } else if !self.nrt_queue.is_empty() {
            let work = match self.nrt_head_remaining.take() {
                Some(w) => w,
                None => self.nrt_service.sample(&mut self.streams.nrt_service),
            };
            (Class::Nrt, work)
        } else {
            return;
        };
        self.generation += 1;
        let completes_at = self.now + work;
        self.in_service = Some(InService {
            class,
            completes_at,
            generation: self.generation,
        });
        self.calendar.schedule(
            completes_at,
            EventKind::Completion {
                generation: self.generation,
            },
        );
    }

    /// Advances to the next live event; returns its kind. Stale completions
    /// (cancelled by preemption) are skipped without being counted.
    fn next_event(&mut self) -> EventKind {
        loop {
            let ev = self
                .calendar
                .pop()
                .expect("arrival streams keep the calendar nonempty");
            if let EventKind::Completion { generation } = ev.kind {
                if self.in_service.as_ref().map(|s| s.generation) != Some(generation) {
                    continue;
                }
            }
            self.now = ev.time;
            return ev.kind;
        }
    }
}

/// Runs one replication: `warmup_events` events are discarded, the next
/// `measured_events` are split into `batches` equal batches.
pub fn simulate_run(cfg: &SimConfig) -> Result<SimEstimate> {
    cfg.check()?;
    let params = cfg.params;
    let space = params.state_space();
    let row_len = space.row_len();
    let r = params.threshold_r();
    let lambda1 = params.lambda_nrt();
    let mut sim = Sim::new(cfg)?;

    let batch_len = cfg.measured_events / cfg.batches as u64;
    let mut batches = vec![Batch::default(); cfg.batches];
    let mut state_time = vec![0.0; space.size()];
    let mut occupancy_time = vec![0.0; params.capacity_n() + 1];
    let mut admissions_by_k = vec![0u64; params.capacity_n() + 1];
    let mut measure_start = 0.0;
    let mut last_time = 0.0;

    let total_events = cfg.warmup_events + cfg.measured_events;
    for event_no in 0..total_events {
        let kind = sim.next_event();
        let measuring = event_no >= cfg.warmup_events;
        let (i, j) = (sim.rt_queue.len(), sim.nrt_queue.len());
        let batch_idx = if measuring {
            (((event_no - cfg.warmup_events) / batch_len) as usize).min(cfg.batches - 1)
        } else {
            0
        };
        if measuring {
            if event_no == cfg.warmup_events {
                measure_start = last_time;
            }
            let dt = sim.now - last_time;
            let b = &mut batches[batch_idx];
            b.duration += dt;
            b.rt_area += dt * i as f64;
            b.nrt_area += dt * j as f64;
            state_time[i * row_len + j] += dt;
            occupancy_time[i + j] += dt;
        }
        last_time = sim.now;

        match kind {
            EventKind::RtArrival => {
                let next = sim.now + sim.rt_interarrival.sample(&mut sim.streams.rt_arrival);
                sim.calendar.schedule(next, EventKind::RtArrival);
                let admitted = i < r;
                if admitted {
                    sim.rt_queue.push_back(sim.now);
                }
                if measuring {
                    let b = &mut batches[batch_idx];
                    b.rt_arrivals += 1;
                    b.rt_losses += u64::from(!admitted);
                }
            }
            EventKind::NrtArrival => {
                let d = sim
                    .nrt_interarrival
                    .expect("NRT arrivals only with lambda1 > 0");
                let next = sim.now + d.sample(&mut sim.streams.nrt_arrival);
                sim.calendar.schedule(next, EventKind::NrtArrival);
                let k = sim.occupancy();
                let accept = params.nrt_rate(k) / lambda1;
                let admitted = sim.streams.thinning.random::<f64>() < accept;
                if admitted {
                    sim.nrt_queue.push_back(sim.now);
                    sim.total_nrt_admitted += 1;
                }
                if measuring {
                    let b = &mut batches[batch_idx];
                    if admitted {
                        b.nrt_admissions += 1;
                        admissions_by_k[k] += 1;
                    } else {
                        b.nrt_drops += 1;
                    }
                }
            }
            EventKind::Completion { .. } => {
                let done = sim.in_service.take().expect("live completion has a server");
                let admitted_at = match done.class {
                    Class::Rt => sim.rt_queue.pop_front(),
                    Class::Nrt => {
                        sim.total_nrt_departed += 1;
                        sim.nrt_queue.pop_front()
                    }
                }
                .expect("served packet was queued");
                if measuring {
                    let b = &mut batches[batch_idx];
                    let sojourn = sim.now - admitted_at;
                    match done.class {
                        Class::Rt => {
                            b.rt_sojourn_sum += sojourn;
                            b.rt_departures += 1;
                        }
                        Class::Nrt => {
                            b.nrt_sojourn_sum += sojourn;
                            b.nrt_departures += 1;
                        }
                    }
                }
            }
        }
        sim.dispatch();
    }

    let t = StudentsT::new(0.0, 1.0, (cfg.batches - 1) as f64)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?
        .inverse_cdf(0.975);
    let per_batch = |f: &dyn Fn(&Batch) -> f64| {
        let values: Vec<f64> = batches.iter().map(f).collect();
        Estimate::from_batches(&values, t)
    };

    Ok(SimEstimate {
        params,
        rt_loss_fraction: per_batch(&|b| ratio(b.rt_losses as f64, b.rt_arrivals as f64)),
        mean_rt_in_queue: per_batch(&|b| ratio(b.rt_area, b.duration)),
        mean_nrt_in_queue: per_batch(&|b| ratio(b.nrt_area, b.duration)),
        accepted_nrt_rate: per_batch(&|b| ratio(b.nrt_admissions as f64, b.duration)),
        mean_rt_sojourn: per_batch(&|b| ratio(b.rt_sojourn_sum, b.rt_departures as f64)),
        mean_nrt_sojourn: per_batch(&|b| ratio(b.nrt_sojourn_sum, b.nrt_departures as f64)),
        rt_arrivals: batches.iter().map(|b| b.rt_arrivals).sum(),
        rt_losses: batches.iter().map(|b| b.rt_losses).sum(),
        nrt_admissions: batches.iter().map(|b| b.nrt_admissions).sum(),
        nrt_throttle_drops: batches.iter().map(|b| b.nrt_drops).sum(),
        diagnostics: SimDiagnostics {
            measured_time: last_time - measure_start,
            state_time,
            occupancy_time,
            nrt_admissions_by_occupancy: admissions_by_k,
            total_nrt_admitted: sim.total_nrt_admitted,
            total_nrt_departed: sim.total_nrt_departed,
            final_nrt_in_queue: sim.nrt_queue.len() as u64,
        },
    })
}

/// Independent replications, one per config, in config order.
pub fn simulate_replications(cfgs: &[SimConfig], exec: Execution) -> Vec<Result<SimEstimate>> {
    exec.map(cfgs, simulate_run)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricCheck {
    pub metric: &'static str,
    pub analytic: f64,
    pub simulated: Estimate,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NrtDelayFormula {
    Paper,
    Little,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agreement {
    pub checks: Vec<MetricCheck>,
    /// Which analytic NRT delay lies closer to the measured NRT sojourn.
    pub closer_nrt_delay: NrtDelayFormula,
    pub measured_nrt_sojourn: Estimate,
    pub d_nrt_paper: f64,
    pub d_nrt_little: f64,
}

impl Agreement {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &MetricCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Compares simulated estimates with analytic values (3 half-widths plus
/// [`AGREEMENT_FLOOR`]).
///
/// Both sides must describe the same state space (`N`, `R`, `L`); rates may
/// differ so that a deliberately perturbed simulation can be checked against
/// an unperturbed analytic model.
pub fn compare_to_analytic(est: &SimEstimate, report: &QoSReport) -> Result<Agreement> {
    let (a, b) = (&est.params, &report.params);
    if a.capacity_n() != b.capacity_n()
        || a.threshold_r() != b.threshold_r()
        || a.threshold_l() != b.threshold_l()
    {
        return Err(Error::ParamMismatch);
    }
    let pairs = [
        ("rt_loss_fraction", report.p_lrt, est.rt_loss_fraction),
        ("mean_rt_in_queue", report.n_rt, est.mean_rt_in_queue),
        ("mean_nrt_in_queue", report.n_nrt, est.mean_nrt_in_queue),
        (
            "accepted_nrt_rate",
            report.lambda_eff_nrt,
            est.accepted_nrt_rate,
        ),
        ("mean_rt_sojourn", report.d_rt, est.mean_rt_sojourn),
    ];
    let checks = pairs
        .into_iter()
        .map(|(metric, analytic, simulated)| MetricCheck {
            metric,
            analytic,
            simulated,
            pass: (analytic - simulated.point).abs()
                <= AGREEMENT_HALF_WIDTHS * simulated.half_width + AGREEMENT_FLOOR,
        })
        .collect();
    let measured = est.mean_nrt_sojourn;
    let closer_nrt_delay = if (report.d_nrt_paper - measured.point).abs()
        < (report.d_nrt_little - measured.point).abs()
    {
        NrtDelayFormula::Paper
    } else {
        NrtDelayFormula::Little
    };
    Ok(Agreement {
        checks,
        closer_nrt_delay,
        measured_nrt_sojourn: measured,
        d_nrt_paper: report.d_nrt_paper,
        d_nrt_little: report.d_nrt_little,
    })
}
