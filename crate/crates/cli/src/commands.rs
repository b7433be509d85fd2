//! Subcommand bodies; `main` only parses arguments and maps errors to exit codes.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rennala_core::verify::{self, CheckOutcome, HardnessConfig};
use rennala_core::{
    collect_batch, sample_delays, t_of_b, ComplexityReport, DelayModel, DelayProfile, Hyper,
    MethodKind, Payload,
};
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::experiment::{self, RunKey, SweepResult};
use crate::plot::{self, Series};

pub const OUT_ENV: &str = "RENNALA_OUT";

/// `--out` wins, then `RENNALA_OUT`, then the config's `out`, then `./out`.
pub fn output_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    config.map_or_else(|| PathBuf::from("out"), Path::to_path_buf)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn write_jsonl(path: &Path, lines: &[serde_json::Value]) -> Result<(), CliError> {
    let mut buf = Vec::new();
    for l in lines {
        serde_json::to_writer(&mut buf, l).expect("json values serialize");
        buf.push(b'\n');
    }
    write_file(path, &buf)
}

pub fn describe(kind: MethodKind, h: &Hyper) -> String {
    match kind {
        MethodKind::RennalaSgd => format!("{} gamma={} B={}", kind.name(), h.gamma, h.b),
        MethodKind::RennalaMvr => {
            format!(
                "{} gamma={} B={} p={} B0={}",
                kind.name(),
                h.gamma,
                h.b,
                h.p,
                h.b0
            )
        }
        MethodKind::RennalaMvrInexact => format!(
            "{} gamma={} B={} p={} B0={} alpha={}",
            kind.name(),
            h.gamma,
            h.b,
            h.p,
            h.b0,
            h.alpha
        ),
    }
}

fn hyper_json(kind: MethodKind, h: &Hyper) -> serde_json::Value {
    json!({ "method": kind.name(), "gamma": h.gamma, "B": h.b, "p": h.p, "B0": h.b0, "alpha": h.alpha })
}

/// Writes one trace per grid point for a single seed.
pub fn run(
    cfg: &ExperimentConfig,
    seed: Option<u64>,
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let seed = seed.unwrap_or(cfg.seeds[0]);
    let runs = cfg.grid_size() as u64;
    if runs > cfg.max_runs {
        let (grads, secs) = experiment::estimate_cost(cfg)?;
        let scale = 1.0 / cfg.seeds.len() as f64;
        return Err(CliError::GridTooLarge {
            runs,
            cap: cfg.max_runs,
            grads: grads * scale,
            secs: secs * scale,
        });
    }
    create_dir(out)?;
    let mut written = Vec::new();
    let mut report = Vec::new();
    for (entry, m) in cfg.methods.iter().enumerate() {
        for config in 0..m.grid.len() {
            let key = RunKey {
                entry,
                config,
                seed,
            };
            let trace = experiment::run_trace(cfg, key)?;
            let path = out.join(format!("trace_{}.csv", key.file_stem(m.kind)));
            write_file(&path, trace.to_csv_string().as_bytes())?;
            let last = trace
                .records
                .last()
                .expect("traces start with the initial record");
            report.push(json!({
                "kind": "run",
                "entry": entry,
                "config": config,
                "seed": seed,
                "hyper": hyper_json(m.kind, &m.grid[config]),
                "trace": path.file_name().and_then(|s| s.to_str()),
                "final_time": last.time,
                "final_iter": last.iter,
                "final_grad_sq_norm": last.grad_sq_norm,
                "final_f_value": last.f_value,
                "oracle_calls": last.oracle_calls,
            }));
            written.push(path);
        }
    }
    write_jsonl(&out.join("report.jsonl"), &report)?;
    Ok(written)
}

pub fn leaderboard_csv(cfg: &ExperimentConfig, r: &SweepResult) -> String {
    let mut s = String::from("rank,entry,method,config,gamma,B,p,B0,alpha,score,diverged_seeds\n");
    for (rank, &i) in r.ranking.iter().enumerate() {
        let c = &r.configs[i];
        let h = &c.hyper;
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{:.10e},{}\n",
            rank + 1,
            c.entry,
            c.kind.name(),
            c.config,
            h.gamma,
            h.b,
            h.p,
            h.b0,
            h.alpha,
            c.score,
            c.diverged_seeds
        ));
    }
    debug_assert_eq!(r.configs.len(), cfg.grid_size());
    s
}

pub fn sweep_plot(cfg: &ExperimentConfig, r: &SweepResult) -> String {
    let mut series = Vec::new();
    for entry in 0..cfg.methods.len() {
        for (rank, c) in r.top_k(entry, 3).into_iter().enumerate() {
            series.push(Series {
                label: describe(c.kind, &c.hyper),
                color: plot::PALETTE[entry % plot::PALETTE.len()],
                dash: plot::DASHES[rank],
                xs: r.time_grid.clone(),
                ys: c.curve.clone(),
            });
        }
    }
    let title = format!(
        "{} delays, n = {}, d = {}, {} seeds",
        cfg.delay.name(),
        cfg.workers,
        cfg.problem.dim,
        cfg.seeds.len()
    );
    plot::render(&title, "simulated time (s)", cfg.metric.name(), &series)
}

/// Runs the grid, then writes the leaderboard, plot, report and the
/// first-seed traces of the top three configs per method entry.
pub fn sweep(cfg: &ExperimentConfig, jobs: usize, out: &Path) -> Result<SweepResult, CliError> {
    let result = experiment::sweep(cfg, jobs)?;
    create_dir(out)?;
    write_file(
        &out.join("leaderboard.csv"),
        leaderboard_csv(cfg, &result).as_bytes(),
    )?;
    write_file(&out.join("plot.svg"), sweep_plot(cfg, &result).as_bytes())?;
    let mut report = Vec::new();
    for (rank, &i) in result.ranking.iter().enumerate() {
        let c = &result.configs[i];
        report.push(json!({
            "kind": "sweep",
            "rank": rank + 1,
            "entry": c.entry,
            "config": c.config,
            "hyper": hyper_json(c.kind, &c.hyper),
            "metric": cfg.metric.name(),
            "score": c.score,
            "seed_scores": c.seed_scores,
            "diverged_seeds": c.diverged_seeds,
        }));
    }
    write_jsonl(&out.join("report.jsonl"), &report)?;
    for entry in 0..cfg.methods.len() {
        for c in result
            .top_k(entry, 3)
            .into_iter()
            .filter(|c| c.diverged_seeds == 0)
        {
            let key = RunKey {
                entry,
                config: c.config,
                seed: cfg.seeds[0],
            };
            let trace = experiment::run_trace(cfg, key)?;
            let path = out.join(format!("trace_{}.csv", key.file_stem(c.kind)));
            write_file(&path, trace.to_csv_string().as_bytes())?;
        }
    }
    Ok(result)
}

/// Aligned pass/fail table.
pub fn checks_table(checks: &[CheckOutcome]) -> String {
    let w = checks
        .iter()
        .map(|c| c.name.len())
        .max()
        .unwrap_or(4)
        .max(5);
    let mut s = format!(
        "{:<8} {:<w$} {:>14} {:>14}  status\n",
        "suite", "check", "measured", "bound"
    );
    for c in checks {
        let status = match (c.asserted, c.passed) {
            (false, _) => "INFO",
            (true, true) => "PASS",
            (true, false) => "FAIL",
        };
        s.push_str(&format!(
            "{:<8} {:<w$} {:>14.6e} {:>14.6e}  {status}",
            c.suite, c.name, c.measured, c.bound
        ));
        if !c.note.is_empty() {
            s.push_str(&format!("  ({})", c.note));
        }
        s.push('\n');
    }
    s
}

pub fn checks_csv(checks: &[CheckOutcome]) -> String {
    let mut s = String::from("suite,check,measured,bound,passed,asserted,note\n");
    for c in checks {
        s.push_str(&format!(
            "{},\"{}\",{:e},{:e},{},{},\"{}\"\n",
            c.suite,
            c.name.replace('"', "'"),
            c.measured,
            c.bound,
            c.passed,
            c.asserted,
            c.note.replace('"', "'")
        ));
    }
    s
}

fn check_json(c: &CheckOutcome) -> serde_json::Value {
    json!({
        "kind": "check",
        "suite": c.suite,
        "name": c.name,
        "measured": c.measured,
        "bound": c.bound,
        "passed": c.passed,
        "asserted": c.asserted,
        "note": c.note,
    })
}

/// Prints the table, writes `checks.csv` and `report.jsonl` (plus `extra`
/// report lines first), and fails when an asserted check failed.
pub fn finish_checks(
    checks: &[CheckOutcome],
    extra: Vec<serde_json::Value>,
    out: &Path,
) -> Result<(), CliError> {
    print!("{}", checks_table(checks));
    create_dir(out)?;
    write_file(&out.join("checks.csv"), checks_csv(checks).as_bytes())?;
    let mut lines = extra;
    lines.extend(checks.iter().map(check_json));
    write_jsonl(&out.join("report.jsonl"), &lines)?;
    let failed = checks.iter().filter(|c| c.asserted && !c.passed).count();
    let _ = std::io::stdout().flush();
    if failed > 0 {
        Err(CliError::ChecksFailed {
            failed,
            total: checks.len(),
        })
    } else {
        Ok(())
    }
}

pub fn parse_taus(s: &str) -> Result<DelayProfile, CliError> {
    let taus = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Invalid(format!("bad tau {t:?}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DelayProfile::new(taus)?)
}

/// Inputs of `verify-theory`.
#[derive(Clone, Debug)]
pub struct TheoryInputs {
    pub eps: f64,
    pub sigma: f64,
    pub delta: f64,
    pub l_bar: f64,
    pub profile: DelayProfile,
}

impl TheoryInputs {
    /// Constants of the configured problem and its first-seed delays.
    pub fn from_config(cfg: &ExperimentConfig, eps: f64) -> Result<Self, CliError> {
        Ok(Self {
            eps,
            sigma: cfg.sigma(),
            delta: cfg.delta(),
            l_bar: cfg.oracle().smoothness(),
            profile: experiment::delay_profile(cfg, cfg.seeds[0])?,
        })
    }

    /// Ten workers with `tau_i = sqrt(i)` and unit constants.
    pub fn default_with(eps: f64) -> Self {
        let profile =
            sample_delays(&DelayModel::Sqrt { permute: false }, 10, 0).expect("valid model");
        Self {
            eps,
            sigma: 1.0,
            delta: 1.0,
            l_bar: 1.0,
            profile,
        }
    }
}

pub fn verify_theory(
    inputs: &TheoryInputs,
    cases: usize,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let r = ComplexityReport::new(
        inputs.eps,
        inputs.sigma,
        inputs.delta,
        inputs.l_bar,
        &inputs.profile,
    )?;
    println!(
        "eps = {}, sigma = {}, Delta = {}, L_bar = {}, n = {}",
        inputs.eps,
        inputs.sigma,
        inputs.delta,
        inputs.l_bar,
        inputs.profile.len()
    );
    print!("{}", r.to_text());
    println!("note: the SGD constant 24 is a convention, not a derived value");
    println!();
    println!("{}", r.csv_header());
    println!("{}", r.csv_row());
    println!();
    create_dir(out)?;
    write_file(
        &out.join("complexity.csv"),
        format!("{}\n{}\n", r.csv_header(), r.csv_row()).as_bytes(),
    )?;
    let report = json!({
        "kind": "complexity",
        "eps": inputs.eps,
        "sigma": inputs.sigma,
        "delta": inputs.delta,
        "l_bar": inputs.l_bar,
        "taus": inputs.profile.taus(),
        "gamma": r.params.gamma,
        "p": r.params.p,
        "B": r.params.b,
        "B0": r.params.b0,
        "K": r.params.k,
        "t_of_b": r.t_of_b,
        "mvr_time": r.mvr_time,
        "sgd_time": r.sgd_time,
        "lower_time": r.lower_time,
        "mvr_oracle": r.mvr_oracle,
        "sgd_oracle": r.sgd_oracle,
        "sgd_constant_is_convention": r.sgd_constant_is_convention,
    });
    let checks = verify::theory_checks(cases, seed)?;
    finish_checks(&checks, vec![report], out)
}

pub fn verify_hardness(cfg: &HardnessConfig, out: &Path) -> Result<(), CliError> {
    let checks = verify::hardness_checks(cfg)?;
    let header = json!({ "kind": "hardness", "T": cfg.t, "p": cfg.p, "trials": cfg.trials, "seed": cfg.seed });
    finish_checks(&checks, vec![header], out)
}

/// Collection bounds on one user-supplied profile for `b = 1..=max_b`.
pub fn profile_checks(profile: &DelayProfile, max_b: usize) -> Result<Vec<CheckOutcome>, CliError> {
    let mut worst_single: f64 = 0.0;
    let mut worst_pair: f64 = 0.0;
    let (mut single_ok, mut pair_ok) = (true, true);
    for b in 1..=max_b {
        let tb = t_of_b(profile, b as f64).value;
        let single = collect_batch(profile, b, Payload::Single, 0.0, true)?.finish;
        let pair = collect_batch(profile, b, Payload::Pair, 0.0, true)?.finish;
        single_ok &= single <= tb;
        pair_ok &= pair <= 2.0 * tb;
        worst_single = worst_single.max(single / tb);
        worst_pair = worst_pair.max(pair / tb);
    }
    Ok(vec![
        CheckOutcome {
            suite: "profile",
            name: format!("collection time / T(b), b = 1..{max_b}"),
            measured: worst_single,
            bound: 1.0,
            passed: single_ok,
            asserted: true,
            note: String::new(),
        },
        CheckOutcome {
            suite: "profile",
            name: format!("pair collection time / T(b), b = 1..{max_b}"),
            measured: worst_pair,
            bound: 2.0,
            passed: pair_ok,
            asserted: true,
            note: String::new(),
        },
    ])
}

pub fn verify_engine(
    cases: usize,
    seed: u64,
    taus: Option<&str>,
    out: &Path,
) -> Result<(), CliError> {
    let mut checks = Vec::new();
    let mut extra = Vec::new();
    if let Some(t) = taus {
        let profile = parse_taus(t)?;
        extra.push(json!({ "kind": "profile", "taus": profile.taus() }));
        checks.extend(profile_checks(&profile, 500)?);
    }
    checks.extend(verify::engine_checks(cases, seed)?);
    finish_checks(&checks, extra, out)
}

/// Oracle-free sanity numbers for a config, used by `run` and `sweep` logs.
pub fn config_summary(cfg: &ExperimentConfig) -> String {
    let q = cfg.oracle();
    format!(
        "{} delays, n = {}, d = {}, sigma_add = {}, L = {:.6}, f(x0) - f* = {:.6}, {} grid points x {} seeds",
        cfg.delay.name(),
        cfg.workers,
        cfg.problem.dim,
        cfg.problem.sigma_add,
        q.smoothness(),
        cfg.delta(),
        cfg.grid_size(),
        cfg.seeds.len()
    )
}
