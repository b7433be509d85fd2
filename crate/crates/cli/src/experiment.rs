//! Single runs and seeded grid sweeps.

use rayon::prelude::*;
use rennala_core::numeric::derive_seed;
use rennala_core::{
    sample_delays, DelayProfile, Error as CoreError, Hyper, Method, MethodKind, RunConfig,
    RunTrace, Runner, TraceRecord,
};

use crate::config::{ExperimentConfig, Metric};
use crate::error::CliError;

/// Fraction of the horizon whose median scores a run.
pub const TAIL_FRACTION: f64 = 0.01;
/// Points on the log-spaced time grid used for plotting.
pub const CURVE_POINTS: usize = 200;

/// Identifies one simulation: method entry, grid point and seed value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RunKey {
    pub entry: usize,
    pub config: usize,
    pub seed: u64,
}

impl RunKey {
    pub fn file_stem(&self, kind: MethodKind) -> String {
        format!(
            "{}_e{}_c{}_s{}",
            kind.name(),
            self.entry,
            self.config,
            self.seed
        )
    }
}

/// Seed of the noise stream for one run.
pub fn stream_seed(cfg: &ExperimentConfig, key: RunKey) -> u64 {
    derive_seed(&[
        cfg.master_seed,
        key.entry as u64,
        key.config as u64,
        key.seed,
    ])
}

/// Delay realization for a seed value; shared by every method.
pub fn delay_profile(cfg: &ExperimentConfig, seed: u64) -> Result<DelayProfile, CoreError> {
    let s = if cfg.resample_delays {
        seed
    } else {
        cfg.seeds[0]
    };
    sample_delays(&cfg.delay, cfg.workers, derive_seed(&[cfg.master_seed, s]))
}

fn run_config(cfg: &ExperimentConfig, key: RunKey) -> RunConfig {
    RunConfig {
        budget: cfg.budget,
        max_rounds: None,
        record_every: cfg.record_every,
        restart: cfg.restart,
        seed: stream_seed(cfg, key),
    }
}

fn method(cfg: &ExperimentConfig, key: RunKey) -> Method {
    cfg.methods[key.entry].method(key.config)
}

/// Full trace of one run, as written by the `run` subcommand.
pub fn run_trace(cfg: &ExperimentConfig, key: RunKey) -> Result<RunTrace, CoreError> {
    let oracle = cfg.oracle();
    let profile = delay_profile(cfg, key.seed)?;
    rennala_core::run_method(
        &oracle,
        method(cfg, key),
        cfg.x0(),
        &profile,
        run_config(cfg, key),
    )
}

/// Streaming reduction of a trace to its score and a plot curve.
#[derive(Clone, Debug)]
pub struct TailTracker {
    tail_start: f64,
    grid: Vec<f64>,
    curve: Vec<f64>,
    tail: Vec<f64>,
    current: f64,
    in_tail: bool,
}

impl TailTracker {
    pub fn new(budget: f64, initial: f64) -> Self {
        Self {
            tail_start: (1.0 - TAIL_FRACTION) * budget,
            grid: time_grid(budget),
            curve: Vec::with_capacity(CURVE_POINTS),
            tail: Vec::new(),
            current: initial,
            in_tail: false,
        }
    }

    /// Feeds one record value at `time`; times must be nondecreasing.
    pub fn push(&mut self, time: f64, value: f64) {
        while self.curve.len() < self.grid.len() && self.grid[self.curve.len()] < time {
            self.curve.push(self.current);
        }
        if time > self.tail_start {
            if !self.in_tail {
                self.tail.push(self.current);
                self.in_tail = true;
            }
            self.tail.push(value);
        }
        self.current = value;
    }

    /// Median over the final window, counting the value in effect when the
    /// window opens, and the metric sampled on [`time_grid`].
    pub fn finish(mut self) -> (f64, Vec<f64>) {
        if !self.in_tail {
            self.tail.push(self.current);
        }
        while self.curve.len() < self.grid.len() {
            self.curve.push(self.current);
        }
        (median(&mut self.tail), self.curve)
    }
}

/// Log-spaced times from `budget * 1e-5` to `budget`.
pub fn time_grid(budget: f64) -> Vec<f64> {
    let lo = (budget * 1e-5).max(f64::MIN_POSITIVE);
    let ratio = (budget / lo).ln();
    (0..CURVE_POINTS)
        .map(|i| lo * (ratio * i as f64 / (CURVE_POINTS - 1) as f64).exp())
        .collect()
}

/// Median; non-finite entries sort above every finite value.
pub fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    if v.iter().any(|x| !x.is_finite()) {
        return f64::INFINITY;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn metric_value(metric: Metric, r: &TraceRecord, f_star: f64) -> f64 {
    match metric {
        Metric::GradSqNorm => r.grad_sq_norm,
        Metric::FGap => r.f_value - f_star,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub key: RunKey,
    /// Tail median; `+inf` when the run diverged.
    pub score: f64,
    pub curve: Vec<f64>,
    pub last: TraceRecord,
    pub diverged: bool,
}

/// Runs one grid point without storing the trace.
pub fn summarize(cfg: &ExperimentConfig, key: RunKey) -> Result<RunSummary, CoreError> {
    let oracle = cfg.oracle();
    let f_star = oracle.min_value();
    let profile = delay_profile(cfg, key.seed)?;
    let rc = run_config(cfg, key);
    let mut runner = Runner::new(&oracle, method(cfg, key), cfg.x0(), profile, rc)?;
    let mut last = runner.initial_record();
    let mut tracker = TailTracker::new(cfg.budget, metric_value(cfg.metric, &last, f_star));
    let mut diverged = false;
    loop {
        match runner.step() {
            Ok(Some(r)) => {
                if r.iter % rc.record_every == 0 {
                    let v = metric_value(cfg.metric, &r, f_star);
                    tracker.push(r.time, v);
                    last = r;
                    if !v.is_finite() {
                        diverged = true;
                        break;
                    }
                }
            }
            Ok(None) => break,
            Err(CoreError::NonFinite(_)) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let (score, curve) = tracker.finish();
    let score = if diverged { f64::INFINITY } else { score };
    Ok(RunSummary {
        key,
        score,
        curve,
        last,
        diverged,
    })
}

/// Aggregate of one grid point over all seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigResult {
    pub entry: usize,
    pub config: usize,
    pub kind: MethodKind,
    pub hyper: Hyper,
    pub seed_scores: Vec<f64>,
    /// Mean of the per-seed scores.
    pub score: f64,
    pub diverged_seeds: usize,
    /// Seed-averaged metric on [`time_grid`].
    pub curve: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    /// Ordered by entry, then grid index.
    pub configs: Vec<ConfigResult>,
    /// Indices into `configs`, best first.
    pub ranking: Vec<usize>,
    pub time_grid: Vec<f64>,
}

impl SweepResult {
    /// Up to `k` best configs of method entry `entry`, best first.
    pub fn top_k(&self, entry: usize, k: usize) -> Vec<&ConfigResult> {
        self.ranking
            .iter()
            .map(|&i| &self.configs[i])
            .filter(|c| c.entry == entry)
            .take(k)
            .collect()
    }

    pub fn best(&self, kind: MethodKind) -> Option<&ConfigResult> {
        self.ranking
            .iter()
            .map(|&i| &self.configs[i])
            .find(|c| c.kind == kind)
    }
}

/// Rough single-threaded cost of a sweep, in stochastic gradients and seconds.
pub fn estimate_cost(cfg: &ExperimentConfig) -> Result<(f64, f64), CoreError> {
    let profile = delay_profile(cfg, cfg.seeds[0])?;
    let rate: f64 = profile.taus().iter().map(|t| 1.0 / t).sum();
    let grads = cfg.total_runs() as f64 * cfg.budget * rate;
    Ok((grads, grads * cfg.problem.dim as f64 * 1e-8))
}

/// Evaluates every grid point on every seed with `jobs` threads.
pub fn sweep(cfg: &ExperimentConfig, jobs: usize) -> Result<SweepResult, CliError> {
    if !(cfg.budget > 0.0) {
        return Err(CliError::Invalid("sweep needs budget > 0".into()));
    }
    let runs = cfg.total_runs() as u64;
    if runs > cfg.max_runs {
        let (grads, secs) = estimate_cost(cfg)?;
        return Err(CliError::GridTooLarge {
            runs,
            cap: cfg.max_runs,
            grads,
            secs,
        });
    }
    let mut keys = Vec::with_capacity(runs as usize);
    for (entry, m) in cfg.methods.iter().enumerate() {
        for config in 0..m.grid.len() {
            for &seed in &cfg.seeds {
                keys.push(RunKey {
                    entry,
                    config,
                    seed,
                });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    let summaries: Vec<RunSummary> = pool.install(|| {
        keys.par_iter()
            .map(|&k| summarize(cfg, k))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(aggregate(cfg, &summaries))
}

/// Groups summaries by `(entry, config)`; the input order does not matter.
pub fn aggregate(cfg: &ExperimentConfig, summaries: &[RunSummary]) -> SweepResult {
    let grid = time_grid(cfg.budget);
    let mut configs = Vec::new();
    for (entry, m) in cfg.methods.iter().enumerate() {
        for (config, &hyper) in m.grid.iter().enumerate() {
            let mut runs: Vec<&RunSummary> = summaries
                .iter()
                .filter(|s| s.key.entry == entry && s.key.config == config)
                .collect();
            runs.sort_by_key(|s| cfg.seeds.iter().position(|&x| x == s.key.seed));
            let seed_scores: Vec<f64> = runs.iter().map(|s| s.score).collect();
            let n = seed_scores.len().max(1) as f64;
            let score = seed_scores.iter().sum::<f64>() / n;
            let curve = (0..grid.len())
                .map(|i| runs.iter().map(|s| s.curve[i]).sum::<f64>() / n)
                .collect();
            configs.push(ConfigResult {
                entry,
                config,
                kind: m.kind,
                hyper,
                diverged_seeds: runs.iter().filter(|s| s.diverged).count(),
                seed_scores,
                score,
                curve,
            });
        }
    }
    let mut ranking: Vec<usize> = (0..configs.len()).collect();
    ranking.sort_by(|&a, &b| {
        let (x, y) = (&configs[a], &configs[b]);
        x.score
            .total_cmp(&y.score)
            .then(x.entry.cmp(&y.entry))
            .then(x.config.cmp(&y.config))
    });
    SweepResult {
        configs,
        ranking,
        time_grid: grid,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(methods: &str, budget: f64) -> ExperimentConfig {
        let src = format!(
            "workers = 3\nbudget = {budget}\nseeds = [0, 5]\nmaster_seed = 9\n\n[problem]\ndim = 6\nsigma_add = 0.1\n\n[delay]\nkind = \"sqrt\"\n\n{methods}"
        );
        ExperimentConfig::parse(&src, "t.toml").unwrap()
    }

    const TWO: &str = "[[methods]]\nmethod = \"rennala_sgd\"\ngamma = [0.5, 1.0]\nB = 2\n\n[[methods]]\nmethod = \"rennala_mvr\"\ngamma = 0.5\nB = 2\np = [0.2, 1.0]\nB0 = \"B\"\n";

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&mut [1.0, f64::NAN]), f64::INFINITY);
        assert!(median(&mut []).is_nan());
    }

    #[test]
    fn tail_tracker_counts_value_in_effect_at_window_start() {
        let mut t = TailTracker::new(100.0, 10.0);
        t.push(50.0, 8.0);
        t.push(99.5, 2.0);
        t.push(100.0, 4.0);
        let (score, curve) = t.finish();
        // window (99, 100] sees 8 (in effect at 99), 2 and 4
        assert_eq!(score, 4.0);
        assert_eq!(curve.len(), CURVE_POINTS);
        assert_eq!(curve[0], 10.0);
        assert_eq!(*curve.last().unwrap(), 4.0);
    }

    #[test]
    fn tail_tracker_without_records_in_window() {
        let mut t = TailTracker::new(1000.0, 5.0);
        t.push(10.0, 3.0);
        let (score, _) = t.finish();
        assert_eq!(score, 3.0);
    }

    #[test]
    fn time_grid_is_log_spaced_up_to_budget() {
        let g = time_grid(1e5);
        assert_eq!(g.len(), CURVE_POINTS);
        assert!((g[0] - 1.0).abs() < 1e-12);
        assert!((g[CURVE_POINTS - 1] - 1e5).abs() < 1e-6);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn methods_on_one_seed_share_delays() {
        let c = cfg(TWO, 50.0);
        let a = delay_profile(&c, 5).unwrap();
        assert_eq!(a, delay_profile(&c, 5).unwrap());
        assert_ne!(a, delay_profile(&c, 0).unwrap());
        let keys = [
            RunKey {
                entry: 0,
                config: 0,
                seed: 5,
            },
            RunKey {
                entry: 1,
                config: 1,
                seed: 5,
            },
        ];
        assert_ne!(stream_seed(&c, keys[0]), stream_seed(&c, keys[1]));
    }

    #[test]
    fn fixed_delays_across_seeds_when_requested() {
        let mut c = cfg(TWO, 50.0);
        c.resample_delays = false;
        assert_eq!(delay_profile(&c, 5).unwrap(), delay_profile(&c, 0).unwrap());
    }

    #[test]
    fn summary_score_matches_full_trace() {
        let c = cfg(TWO, 200.0);
        let key = RunKey {
            entry: 1,
            config: 0,
            seed: 0,
        };
        let s = summarize(&c, key).unwrap();
        let trace = run_trace(&c, key).unwrap();
        let mut tail: Vec<f64> = Vec::new();
        let start = 0.99 * 200.0;
        let before = trace.records.iter().rfind(|r| r.time <= start).unwrap();
        tail.push(before.grad_sq_norm);
        tail.extend(
            trace
                .records
                .iter()
                .filter(|r| r.time > start)
                .map(|r| r.grad_sq_norm),
        );
        assert_eq!(s.score, median(&mut tail));
        assert_eq!(&s.last, trace.records.last().unwrap());
    }

    #[test]
    fn sweep_is_deterministic_and_order_free() {
        let c = cfg(TWO, 100.0);
        let a = sweep(&c, 1).unwrap();
        let b = sweep(&c, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.configs.len(), 4);
        let mut sorted = a.ranking.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3]);

        let mut sums: Vec<RunSummary> = Vec::new();
        for entry in 0..2 {
            for config in 0..2 {
                for seed in [0, 5] {
                    sums.push(
                        summarize(
                            &c,
                            RunKey {
                                entry,
                                config,
                                seed,
                            },
                        )
                        .unwrap(),
                    );
                }
            }
        }
        sums.reverse();
        assert_eq!(aggregate(&c, &sums), a);
        assert!(a
            .configs
            .iter()
            .all(|r| r.score.is_finite() && r.seed_scores.len() == 2));
        assert_eq!(a.top_k(0, 3).len(), 2);
    }

    #[test]
    fn single_point_grid_gives_one_entry() {
        let c = cfg("[[methods]]\nmethod = \"rennala_sgd\"\ngamma = 0.5\n", 20.0);
        let r = sweep(&c, 1).unwrap();
        assert_eq!(r.ranking, vec![0]);
    }

    #[test]
    fn divergence_scores_infinity_and_ranks_last() {
        let c = cfg(
            "[[methods]]\nmethod = \"rennala_sgd\"\ngamma = [0.5, 1e300]\nB = 1\n",
            200.0,
        );
        let r = sweep(&c, 1).unwrap();
        assert_eq!(r.configs[1].score, f64::INFINITY);
        assert_eq!(r.configs[1].diverged_seeds, 2);
        assert_eq!(r.ranking, vec![0, 1]);
    }

    #[test]
    fn grid_cap_aborts_with_estimate() {
        let mut c = cfg(TWO, 100.0);
        c.max_runs = 3;
        match sweep(&c, 1) {
            Err(CliError::GridTooLarge {
                runs, cap, grads, ..
            }) => {
                assert_eq!((runs, cap), (8, 3));
                assert!(grads > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }
}
