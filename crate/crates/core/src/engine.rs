//! Discrete-event simulation of the server and its workers.
//!
//! Simulated time only advances by popping completion events. Gradient values
//! are never computed here: every delivered arrival carries a sample id, and
//! the optimizer evaluates gradients when it consumes the batch.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::io::{BufRead, Write};

use crate::delay::DelayProfile;
use crate::error::{Error, Result};
use crate::optim::{
    inexact_mvr_step, mvr_init, mvr_step, sgd_step, Method, MethodKind, Minibatch, MvrState,
};
use crate::problem::{Oracle, Sample};

/// What one arrival carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Payload {
    /// One stochastic gradient, costing `tau_i`.
    Single,
    /// Two gradients at consecutive points sharing one sample, costing `2 tau_i`.
    Pair,
}

impl Payload {
    /// Stochastic gradients per arrival.
    pub fn gradients(self) -> u64 {
        match self {
            Payload::Single => 1,
            Payload::Pair => 2,
        }
    }

    pub fn cost(self, tau: f64) -> f64 {
        match self {
            Payload::Single => tau,
            Payload::Pair => 2.0 * tau,
        }
    }
}

/// One completed oracle reply.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arrival {
    pub worker: usize,
    pub time: f64,
    pub round: u64,
    /// Sample id; pairs use it for both of their gradients.
    pub sample: u64,
    pub payload: Payload,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkerState {
    pub worker_id: usize,
    /// Completion time of the in-flight computation, `None` when idle.
    pub busy_until: Option<f64>,
    pub assigned_round: Option<u64>,
    pub payload: Payload,
    // start of the current run of back-to-back computations
    origin: f64,
    // computations finished since `origin`
    done: u64,
    // the in-flight computation targets an old point and will be thrown away
    stale: bool,
}

impl WorkerState {
    fn idle(worker_id: usize) -> Self {
        Self {
            worker_id,
            busy_until: None,
            assigned_round: None,
            payload: Payload::Single,
            origin: 0.0,
            done: 0,
            stale: false,
        }
    }

    fn begin(&mut self, at: f64, round: u64, payload: Payload, tau: f64) -> f64 {
        self.origin = at;
        self.done = 0;
        self.stale = false;
        self.payload = payload;
        self.assigned_round = Some(round);
        let t = at + payload.cost(tau);
        self.busy_until = Some(t);
        t
    }

    fn next_completion(&self, tau: f64) -> f64 {
        // origin + count * cost keeps completion times free of accumulated drift
        self.origin + (self.done + 1) as f64 * self.payload.cost(tau)
    }
}

#[derive(Clone, Copy, Debug)]
struct Event {
    time: f64,
    worker: usize,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.worker.cmp(&other.worker))
    }
}

/// Simulated clock with a min-queue of `(time, worker)` completion events.
#[derive(Clone, Debug, Default)]
pub struct SimClock {
    now: f64,
    queue: BinaryHeap<Reverse<Event>>,
}

impl SimClock {
    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn schedule(&mut self, time: f64, worker: usize) {
        self.queue.push(Reverse(Event { time, worker }));
    }

    /// Pops the earliest event (ties go to the lower worker id) and advances `now`.
    pub fn pop(&mut self) -> Option<(f64, usize)> {
        let Reverse(e) = self.queue.pop()?;
        debug_assert!(e.time >= self.now);
        self.now = e.time;
        Some((e.time, e.worker))
    }

    fn clear(&mut self) {
        self.queue.clear();
    }
}

/// Result of one collection phase.
#[derive(Clone, Debug, PartialEq)]
pub struct Collection {
    pub start: f64,
    pub finish: f64,
    /// Delivered arrivals in delivery order.
    pub arrivals: Vec<Arrival>,
}

/// A pool of workers with fixed per-gradient times.
#[derive(Clone, Debug)]
pub struct Cluster {
    profile: DelayProfile,
    workers: Vec<WorkerState>,
    clock: SimClock,
    round: u64,
    next_sample: u64,
    delivered_gradients: u64,
}

impl Cluster {
    pub fn new(profile: DelayProfile) -> Self {
        let workers = (0..profile.len()).map(WorkerState::idle).collect();
        Self {
            profile,
            workers,
            clock: SimClock::default(),
            round: 0,
            next_sample: 0,
            delivered_gradients: 0,
        }
    }

    pub fn now(&self) -> f64 {
        self.clock.now()
    }

    pub fn profile(&self) -> &DelayProfile {
        &self.profile
    }

    pub fn workers(&self) -> &[WorkerState] {
        &self.workers
    }

    /// Rounds collected so far.
    pub fn rounds(&self) -> u64 {
        self.round
    }

    /// Stochastic gradients delivered to the server so far (pairs count twice).
    pub fn delivered_gradients(&self) -> u64 {
        self.delivered_gradients
    }

    /// Marks every worker busy with a computation for an earlier point that
    /// completes at `times[i]`. Used to set up worst-case offsets.
    pub fn set_in_flight(&mut self, times: &[f64]) -> Result<()> {
        if times.len() != self.workers.len() {
            return Err(Error::DimensionMismatch {
                expected: self.workers.len(),
                got: times.len(),
            });
        }
        let now = self.now();
        if let Some(&t) = times.iter().find(|t| !(**t >= now) || !t.is_finite()) {
            return Err(Error::TimeReversal { start: t, now });
        }
        for (w, &t) in self.workers.iter_mut().zip(times) {
            w.busy_until = Some(t);
        }
        Ok(())
    }

    /// Runs the simulation from `start` until `b` arrivals of `payload` have
    /// been delivered.
    ///
    /// With `restart` every worker drops what it was doing and starts fresh at
    /// `start`. Without it, a worker still busy at `start` first finishes its
    /// in-flight computation, which is discarded as stale, and then starts fresh.
    pub fn collect_batch(
        &mut self,
        b: usize,
        payload: Payload,
        start: f64,
        restart: bool,
    ) -> Result<Collection> {
        if b == 0 {
            return Err(Error::ZeroBatch);
        }
        if !(start >= self.now()) || !start.is_finite() {
            return Err(Error::TimeReversal {
                start,
                now: self.now(),
            });
        }
        self.clock.now = start;
        self.clock.clear();
        let round = self.round;
        let taus = self.profile.taus();
        for (i, w) in self.workers.iter_mut().enumerate() {
            let t = match w.busy_until {
                Some(c) if !restart && c > start => {
                    w.stale = true;
                    c
                }
                _ => w.begin(start, round, payload, taus[i]),
            };
            self.clock.schedule(t, i);
        }

        let mut arrivals = Vec::with_capacity(b);
        let mut finish = start;
        while arrivals.len() < b {
            let (t, i) = self
                .clock
                .pop()
                .expect("every worker always has a pending event");
            let tau = taus[i];
            let w = &mut self.workers[i];
            if w.stale {
                let next = w.begin(t, round, payload, tau);
                self.clock.schedule(next, i);
                continue;
            }
            w.done += 1;
            arrivals.push(Arrival {
                worker: i,
                time: t,
                round,
                sample: self.next_sample,
                payload,
            });
            self.next_sample += 1;
            self.delivered_gradients += payload.gradients();
            finish = t;
            let next = w.next_completion(tau);
            w.busy_until = Some(next);
            self.clock.schedule(next, i);
        }
        self.clock.now = finish;
        self.round += 1;
        Ok(Collection {
            start,
            finish,
            arrivals,
        })
    }
}

/// Collection on a fresh cluster; see [`Cluster::collect_batch`].
pub fn collect_batch(
    profile: &DelayProfile,
    b: usize,
    payload: Payload,
    start: f64,
    restart: bool,
) -> Result<Collection> {
    let mut c = Cluster::new(profile.clone());
    c.clock.now = start;
    c.collect_batch(b, payload, start, restart)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunConfig {
    /// Simulated seconds; a round finishing after this is not applied.
    pub budget: f64,
    /// Optional cap on optimizer rounds.
    pub max_rounds: Option<u64>,
    /// Keep records whose iteration is a multiple of this stride.
    pub record_every: u64,
    /// Workers drop stale work at round boundaries.
    pub restart: bool,
    /// Noise stream for every sample of the run.
    pub seed: u64,
}

impl RunConfig {
    pub fn new(budget: f64, seed: u64) -> Self {
        Self {
            budget,
            max_rounds: None,
            record_every: 1,
            restart: true,
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub time: f64,
    pub iter: u64,
    pub grad_sq_norm: f64,
    pub f_value: f64,
    pub oracle_calls: u64,
}

pub const TRACE_HEADER: &str = "time,iter,grad_sq_norm,f_value,oracle_calls";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{:.16e},{},{:.16e},{:.16e},{}",
                r.time, r.iter, r.grad_sq_norm, r.f_value, r.oracle_calls
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::MalformedTrace(format!("line {line}: {msg}"));
        let mut lines = r.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == TRACE_HEADER => {}
            _ => return Err(bad(1, "missing header")),
        }
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let n = i + 2;
            let line = line.map_err(|e| bad(n, &e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad(n, "expected 5 fields"));
            }
            let float = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(n, &e.to_string()));
            let int = |s: &str| s.trim().parse::<u64>().map_err(|e| bad(n, &e.to_string()));
            records.push(TraceRecord {
                time: float(f[0])?,
                iter: int(f[1])?,
                grad_sq_norm: float(f[2])?,
                f_value: float(f[3])?,
                oracle_calls: int(f[4])?,
            });
        }
        Ok(Self { records })
    }
}

/// Drives one method over a [`Cluster`] round by round.
pub struct Runner<'a, O: Oracle + ?Sized> {
    oracle: &'a O,
    method: Method,
    cluster: Cluster,
    state: MvrState,
    cfg: RunConfig,
    initialized: bool,
    finished: bool,
    last_time: f64,
}

impl<'a, O: Oracle + ?Sized> Runner<'a, O> {
    pub fn new(
        oracle: &'a O,
        method: Method,
        x0: Vec<f64>,
        profile: DelayProfile,
        cfg: RunConfig,
    ) -> Result<Self> {
        if !(cfg.budget >= 0.0) {
            return Err(Error::BadBudget(cfg.budget));
        }
        if cfg.record_every == 0 {
            return Err(Error::InvalidHyper(
                "record_every must be at least 1".into(),
            ));
        }
        oracle.check_dim(&x0)?;
        let state = MvrState::for_sgd(x0, method.hyper)?;
        Ok(Self {
            oracle,
            method,
            cluster: Cluster::new(profile),
            state,
            cfg,
            initialized: method.kind == MethodKind::RennalaSgd,
            finished: false,
            last_time: 0.0,
        })
    }

    pub fn state(&self) -> &MvrState {
        &self.state
    }

    pub fn cluster(&self) -> &Cluster {
        &self.cluster
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// The record at time zero, before any gradient is consumed.
    pub fn initial_record(&self) -> TraceRecord {
        self.record(0.0)
    }

    fn record(&self, time: f64) -> TraceRecord {
        let x = &self.state.x;
        let mut g = vec![0.0; x.len()];
        self.oracle.exact_grad_into(x, &mut g);
        TraceRecord {
            time,
            iter: self.state.k,
            grad_sq_norm: g.iter().map(|v| v * v).sum(),
            f_value: self.oracle.value(x),
            oracle_calls: self.state.oracle_calls,
        }
    }

    fn samples(&self, c: &Collection) -> Vec<Sample> {
        c.arrivals
            .iter()
            .map(|a| Sample::new(self.cfg.seed, a.sample))
            .collect()
    }

    fn collect(&mut self, b: usize, payload: Payload) -> Result<Option<Collection>> {
        let c = self
            .cluster
            .collect_batch(b, payload, self.last_time, self.cfg.restart)?;
        if c.finish > self.cfg.budget {
            self.finished = true;
            return Ok(None);
        }
        self.last_time = c.finish;
        Ok(Some(c))
    }

    /// Advances by one collection (the initialization batch counts as one)
    /// and returns its record, or `None` once the budget or round cap is hit.
    pub fn step(&mut self) -> Result<Option<TraceRecord>> {
        if self.finished {
            return Ok(None);
        }
        let hyper = self.method.hyper;
        if !self.initialized {
            let Some(c) = self.collect(hyper.b0, Payload::Single)? else {
                return Ok(None);
            };
            let samples = self.samples(&c);
            self.state = mvr_init(self.oracle, self.state.x.clone(), hyper, &samples)?;
            self.initialized = true;
            return Ok(Some(self.record(c.finish)));
        }
        if self.cfg.max_rounds.is_some_and(|m| self.state.k >= m) {
            self.finished = true;
            return Ok(None);
        }
        let state = self.state.clone();
        let next = match self.method.kind {
            MethodKind::RennalaSgd => {
                let Some(c) = self.collect(hyper.b, Payload::Single)? else {
                    return Ok(None);
                };
                let batch = Minibatch::evaluate(self.oracle, &state.x, None, &self.samples(&c))?;
                sgd_step(state, &batch)?
            }
            MethodKind::RennalaMvr => {
                let x_next = state.next_point();
                let Some(c) = self.collect(hyper.b, Payload::Pair)? else {
                    return Ok(None);
                };
                let batch =
                    Minibatch::evaluate(self.oracle, &x_next, Some(&state.x), &self.samples(&c))?;
                mvr_step(state, &batch)?
            }
            MethodKind::RennalaMvrInexact => {
                let x_next = state.next_point();
                let Some(c) = self.collect(hyper.b, Payload::Single)? else {
                    return Ok(None);
                };
                let batch = Minibatch::evaluate(self.oracle, &x_next, None, &self.samples(&c))?;
                inexact_mvr_step(state, &batch.g_plus)?
            }
        };
        self.state = next;
        Ok(Some(self.record(self.last_time)))
    }
}

/// Runs `method` from `x0` until the simulated budget is exhausted and returns
/// every record whose iteration is a multiple of `cfg.record_every`.
pub fn run_method<O: Oracle + ?Sized>(
    oracle: &O,
    method: Method,
    x0: Vec<f64>,
    profile: &DelayProfile,
    cfg: RunConfig,
) -> Result<RunTrace> {
    let mut runner = Runner::new(oracle, method, x0, profile.clone(), cfg)?;
    let mut records = vec![runner.initial_record()];
    while let Some(r) = runner.step()? {
        if r.iter % cfg.record_every == 0 {
            records.push(r);
        }
    }
    Ok(RunTrace { records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::Hyper;
    use crate::problem::QuadraticProblem;
    use crate::theory::t_of_b;
    use proptest::prelude::*;

    fn profile(taus: &[f64]) -> DelayProfile {
        DelayProfile::new(taus.to_vec()).unwrap()
    }

    #[test]
    fn two_worker_timeline() {
        let c = collect_batch(&profile(&[1.0, 2.0]), 3, Payload::Single, 0.0, true).unwrap();
        assert_eq!(c.finish, 2.0);
        let got: Vec<(usize, f64)> = c.arrivals.iter().map(|a| (a.worker, a.time)).collect();
        assert_eq!(got, vec![(0, 1.0), (0, 2.0), (1, 2.0)]);
        let ids: Vec<u64> = c.arrivals.iter().map(|a| a.sample).collect();
        assert_eq!(ids, vec![0, 1, 2]);
    }

    #[test]
    fn single_worker_pairs() {
        let c = collect_batch(&profile(&[1.0]), 2, Payload::Pair, 0.0, true).unwrap();
        assert_eq!(c.finish, 4.0);
        assert!(c.arrivals.iter().all(|a| a.payload == Payload::Pair));
    }

    #[test]
    fn three_worker_example_within_t_of_b() {
        let p = profile(&[1.0, 2.0, 4.0]);
        let c = collect_batch(&p, 10, Payload::Single, 0.0, true).unwrap();
        assert_eq!(c.finish, 6.0);
        assert!(c.finish <= 52.0 / 7.0);
    }

    #[test]
    fn ties_go_to_lower_worker_id() {
        let c = collect_batch(&profile(&[2.0, 1.0, 2.0]), 4, Payload::Single, 0.0, true).unwrap();
        let got: Vec<(usize, f64)> = c.arrivals.iter().map(|a| (a.worker, a.time)).collect();
        assert_eq!(got, vec![(1, 1.0), (0, 2.0), (1, 2.0), (2, 2.0)]);
    }

    #[test]
    fn stale_work_is_discarded_in_carry_mode() {
        let mut c = Cluster::new(profile(&[1.0, 3.0]));
        c.set_in_flight(&[0.5, 2.5]).unwrap();
        let col = c.collect_batch(2, Payload::Single, 0.0, false).unwrap();
        // worker 0 restarts at 0.5 and delivers at 1.5, 2.5
        let got: Vec<(usize, f64)> = col.arrivals.iter().map(|a| (a.worker, a.time)).collect();
        assert_eq!(got, vec![(0, 1.5), (0, 2.5)]);
        assert_eq!(c.workers()[1].busy_until, Some(2.5));
    }

    #[test]
    fn collection_errors() {
        let mut c = Cluster::new(profile(&[1.0]));
        assert_eq!(
            c.collect_batch(0, Payload::Single, 0.0, true),
            Err(Error::ZeroBatch)
        );
        c.collect_batch(1, Payload::Single, 0.0, true).unwrap();
        assert!(matches!(
            c.collect_batch(1, Payload::Single, 0.5, true),
            Err(Error::TimeReversal { .. })
        ));
        assert!(c.set_in_flight(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn delivered_gradient_counter() {
        let mut c = Cluster::new(profile(&[1.0, 1.5]));
        let a = c.collect_batch(3, Payload::Single, 0.0, true).unwrap();
        let b = c.collect_batch(4, Payload::Pair, a.finish, true).unwrap();
        assert_eq!(c.delivered_gradients(), 3 + 8);
        assert_eq!(b.arrivals[0].sample, 3);
        assert_eq!(c.rounds(), 2);
    }

    fn quad_method(kind: MethodKind) -> Method {
        Method {
            kind,
            hyper: Hyper {
                gamma: 0.5,
                p: 0.3,
                b: 3,
                b0: 5,
                alpha: 0.5,
            },
        }
    }

    #[test]
    fn budget_below_first_completion_gives_only_initial_record() {
        let q = QuadraticProblem::new(4, 0.1).unwrap();
        for kind in [
            MethodKind::RennalaSgd,
            MethodKind::RennalaMvr,
            MethodKind::RennalaMvrInexact,
        ] {
            let t = run_method(
                &q,
                quad_method(kind),
                q.benchmark_start(),
                &profile(&[1.0]),
                RunConfig::new(0.5, 1),
            )
            .unwrap();
            assert_eq!(t.records.len(), 1);
            assert_eq!(t.records[0].time, 0.0);
            assert_eq!(t.records[0].oracle_calls, 0);
        }
    }

    #[test]
    fn zero_step_keeps_gradient_norm() {
        let q = QuadraticProblem::new(100, 0.1).unwrap();
        let m = Method {
            kind: MethodKind::RennalaSgd,
            hyper: Hyper::sgd(0.0, 4),
        };
        let p = profile(&[1.0, 1.3, 2.0]);
        let t = run_method(&q, m, q.benchmark_start(), &p, RunConfig::new(100.0, 3)).unwrap();
        assert!(t.records.len() > 10);
        assert!(t
            .records
            .iter()
            .all(|r| r.grad_sq_norm == t.records[0].grad_sq_norm));
    }

    #[test]
    fn runs_are_deterministic_and_csv_round_trips() {
        let q = QuadraticProblem::new(10, 0.1).unwrap();
        let p = profile(&[1.0, 1.7, 3.1]);
        for kind in [
            MethodKind::RennalaSgd,
            MethodKind::RennalaMvr,
            MethodKind::RennalaMvrInexact,
        ] {
            let cfg = RunConfig {
                record_every: 3,
                ..RunConfig::new(200.0, 9)
            };
            let a = run_method(&q, quad_method(kind), q.benchmark_start(), &p, cfg).unwrap();
            let b = run_method(&q, quad_method(kind), q.benchmark_start(), &p, cfg).unwrap();
            assert_eq!(a, b);
            assert!(a.records.iter().all(|r| r.iter % 3 == 0));
            let s = a.to_csv_string();
            assert_eq!(s, b.to_csv_string());
            let back = RunTrace::read_csv(s.as_bytes()).unwrap();
            assert_eq!(back, a);
        }
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(RunTrace::read_csv("nope\n".as_bytes()).is_err());
        let s = format!("{TRACE_HEADER}\n1,2,3\n");
        let e = RunTrace::read_csv(s.as_bytes()).unwrap_err();
        assert_eq!(e, Error::MalformedTrace("line 2: expected 5 fields".into()));
    }

    #[test]
    fn mvr_trace_counts_and_times() {
        let q = QuadraticProblem::new(3, 0.1).unwrap();
        let p = profile(&[1.0]);
        let m = quad_method(MethodKind::RennalaMvr);
        let t = run_method(&q, m, q.benchmark_start(), &p, RunConfig::new(17.0, 0)).unwrap();
        // init: 5 singles -> t=5; each round 3 pairs -> +6
        let times: Vec<f64> = t.records.iter().map(|r| r.time).collect();
        assert_eq!(times, vec![0.0, 5.0, 11.0, 17.0]);
        let calls: Vec<u64> = t.records.iter().map(|r| r.oracle_calls).collect();
        assert_eq!(calls, vec![0, 5, 11, 17]);
    }

    #[test]
    fn runner_rejects_bad_inputs() {
        let q = QuadraticProblem::new(3, 0.1).unwrap();
        let m = quad_method(MethodKind::RennalaSgd);
        let p = profile(&[1.0]);
        assert!(Runner::new(&q, m, vec![0.0; 2], p.clone(), RunConfig::new(1.0, 0)).is_err());
        assert!(Runner::new(&q, m, vec![0.0; 3], p.clone(), RunConfig::new(-1.0, 0)).is_err());
        assert!(Runner::new(&q, m, vec![0.0; 3], p, RunConfig::new(f64::NAN, 0)).is_err());
    }

    #[test]
    fn zero_budget_keeps_only_the_initial_record() {
        let q = QuadraticProblem::new(3, 0.1).unwrap();
        for kind in [MethodKind::RennalaSgd, MethodKind::RennalaMvr] {
            let t = run_method(
                &q,
                quad_method(kind),
                vec![0.0; 3],
                &profile(&[1.0]),
                RunConfig::new(0.0, 0),
            )
            .unwrap();
            assert_eq!(t.records.len(), 1);
            assert_eq!(t.records[0].time, 0.0);
        }
    }

    fn taus_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.1f64..100.0, 1..=32)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn restart_collection_within_t_of_b(taus in taus_strategy(), b in 1usize..=500, start in 0.0f64..50.0) {
            let p = DelayProfile::new(taus).unwrap();
            let c = collect_batch(&p, b, Payload::Single, start, true).unwrap();
            prop_assert!(c.finish - start <= t_of_b(&p, b as f64).value);
        }

        #[test]
        fn carry_collection_within_twice_t_of_b(
            taus in taus_strategy(),
            b in 1usize..=500,
            offsets in prop::collection::vec(0.0f64..1.0, 32),
        ) {
            let p = DelayProfile::new(taus).unwrap();
            let mut c = Cluster::new(p.clone());
            let inflight: Vec<f64> = p.taus().iter().zip(&offsets).map(|(t, o)| o * t).collect();
            c.set_in_flight(&inflight).unwrap();
            let bound = 2.0 * t_of_b(&p, b as f64).value;
            let mut start = 0.0;
            for _ in 0..3 {
                let col = c.collect_batch(b, Payload::Single, start, false).unwrap();
                prop_assert!(col.finish - start <= bound);
                start = col.finish;
            }
        }

        #[test]
        fn pair_collection_within_four_times_min(taus in taus_strategy(), b in 1usize..=200) {
            let p = DelayProfile::new(taus).unwrap();
            let c = collect_batch(&p, b, Payload::Pair, 0.0, true).unwrap();
            prop_assert!(c.finish <= 4.0 * t_of_b(&p, b as f64).value);
        }
    }
}
