//! Experiment configuration files.
//!
//! Grammar (TOML):
//!
//! ```toml
//! workers = 10                 # number of simulated workers n
//! budget = 1e5                 # simulated seconds (>= 0; sweeps need > 0)
//! seeds = [0, 1, 2, 3, 4]      # distinct seed values
//! master_seed = 2024           # optional, default 0
//! record_every = 1             # optional record stride in rounds
//! metric = "grad_sq_norm"      # or "f_gap" (f(x) - f*)
//! out = "out"                  # optional output directory
//! max_runs = 20000             # sweep aborts above this many runs
//! sigma_convention = "total"   # or "per_coordinate"
//! restart = true               # workers drop stale work at round boundaries
//! start = "benchmark"          # or "zero"
//! resample_delays = true       # false: every seed uses the first seed's delays
//!
//! [problem]
//! kind = "quadratic"
//! dim = 100
//! sigma_add = 0.1
//!
//! [delay]
//! kind = "sqrt"                # "uniform" (lo, hi) or "mixture" (peaks, stddev)
//! permute = true
//!
//! [[methods]]
//! method = "rennala_mvr"       # "rennala_sgd" or "rennala_mvr_inexact"
//! gamma = { pow2 = [-5, 0] }   # scalar, list, or inclusive power-of-two range
//! B = [1, 10, 40, 100]
//! p = [0.01, 0.05, 0.2, 0.5]
//! B0 = ["B", "B^2"]            # integers or the symbols "B" and "B^2"
//! alpha = 1.0                  # inexact variant only
//! ```
//!
//! A `[[methods]]` entry may instead set `tuned_eps = <eps>` alone, which
//! derives `gamma, p, B, B0` from the problem constants.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use rennala_core::{tuned_params, DelayModel, Hyper, Method, MethodKind, Oracle, QuadraticProblem};
use serde::Deserialize;
use toml::Spanned;

/// A configuration problem located in the source file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub file: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}: {}",
            self.file, self.line, self.column, self.message
        )
    }
}

impl std::error::Error for ConfigError {}

fn locate(src: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(src.len());
    let before = &src[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(offset, |nl| offset - nl - 1) + 1;
    (line, column)
}

struct Ctx<'a> {
    file: &'a str,
    src: &'a str,
}

impl Ctx<'_> {
    fn err(&self, span: Range<usize>, message: impl Into<String>) -> ConfigError {
        let (line, column) = locate(self.src, span.start);
        ConfigError {
            file: self.file.to_string(),
            line,
            column,
            message: message.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    GradSqNorm,
    FGap,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::GradSqNorm => "grad_sq_norm",
            Metric::FGap => "f_gap",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaConvention {
    /// `sigma = sqrt(d) * sigma_add`, the bound on the full noise vector.
    #[default]
    Total,
    PerCoordinate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPoint {
    #[default]
    Benchmark,
    Zero,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Grid<T> {
    One(T),
    Many(Vec<T>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GammaGrid {
    One(f64),
    Many(Vec<f64>),
    Pow2 { pow2: [i32; 2] },
}

#[derive(Clone, Deserialize)]
#[serde(untagged)]
enum B0Raw {
    Count(u64),
    Symbol(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    #[serde(default = "quadratic")]
    kind: Spanned<String>,
    dim: Spanned<usize>,
    sigma_add: Spanned<f64>,
}

fn quadratic() -> Spanned<String> {
    Spanned::new(0..0, "quadratic".to_string())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDelay {
    kind: Spanned<String>,
    #[serde(default = "yes")]
    permute: bool,
    lo: Option<f64>,
    hi: Option<f64>,
    peaks: Option<Spanned<usize>>,
    stddev: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMethod {
    method: Spanned<String>,
    gamma: Option<Spanned<GammaGrid>>,
    #[serde(rename = "B")]
    b: Option<Spanned<Grid<u64>>>,
    p: Option<Spanned<Grid<f64>>>,
    #[serde(rename = "B0")]
    b0: Option<Spanned<Grid<B0Raw>>>,
    alpha: Option<Spanned<Grid<f64>>>,
    tuned_eps: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    workers: Spanned<usize>,
    budget: Spanned<f64>,
    seeds: Spanned<Vec<u64>>,
    #[serde(default)]
    master_seed: u64,
    #[serde(default = "one")]
    record_every: Spanned<u64>,
    #[serde(default)]
    metric: Metric,
    out: Option<String>,
    #[serde(default = "default_max_runs")]
    max_runs: u64,
    #[serde(default)]
    sigma_convention: SigmaConvention,
    #[serde(default = "yes")]
    restart: bool,
    #[serde(default)]
    start: StartPoint,
    #[serde(default = "yes")]
    resample_delays: bool,
    problem: RawProblem,
    delay: RawDelay,
    methods: Vec<Spanned<RawMethod>>,
}

fn yes() -> bool {
    true
}

fn one() -> Spanned<u64> {
    Spanned::new(0..0, 1)
}

fn default_max_runs() -> u64 {
    20_000
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub dim: usize,
    pub sigma_add: f64,
}

/// One `[[methods]]` entry, expanded to its Cartesian grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodSpec {
    pub kind: MethodKind,
    /// Grid points in expansion order: gamma outermost, then B, p, B0, alpha.
    pub grid: Vec<Hyper>,
}

impl MethodSpec {
    pub fn method(&self, config_index: usize) -> Method {
        Method {
            kind: self.kind,
            hyper: self.grid[config_index],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub delay: DelayModel,
    pub workers: usize,
    pub budget: f64,
    pub seeds: Vec<u64>,
    pub master_seed: u64,
    pub record_every: u64,
    pub metric: Metric,
    pub out: Option<PathBuf>,
    pub max_runs: u64,
    pub sigma_convention: SigmaConvention,
    pub restart: bool,
    pub start: StartPoint,
    pub resample_delays: bool,
    pub methods: Vec<MethodSpec>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|e| ConfigError {
            file: path.display().to_string(),
            line: 0,
            column: 0,
            message: e.to_string(),
        })?;
        Self::parse(&src, &path.display().to_string())
    }

    /// Parses and validates `src`; `file` only labels diagnostics.
    pub fn parse(src: &str, file: &str) -> Result<Self, ConfigError> {
        let ctx = Ctx { file, src };
        let raw: RawConfig = toml::from_str(src).map_err(|e| {
            let span = e.span().unwrap_or(0..0);
            ctx.err(span, e.message().trim().to_string())
        })?;
        build(&ctx, raw)
    }

    pub fn oracle(&self) -> QuadraticProblem {
        QuadraticProblem::new(self.problem.dim, self.problem.sigma_add)
            .expect("problem validated at parse time")
    }

    pub fn x0(&self) -> Vec<f64> {
        match self.start {
            StartPoint::Benchmark => self.oracle().benchmark_start(),
            StartPoint::Zero => vec![0.0; self.problem.dim],
        }
    }

    /// Noise level under the configured convention.
    pub fn sigma(&self) -> f64 {
        match self.sigma_convention {
            SigmaConvention::Total => self.oracle().sigma_total(),
            SigmaConvention::PerCoordinate => self.problem.sigma_add,
        }
    }

    /// `f(x0) - f*`.
    pub fn delta(&self) -> f64 {
        let q = self.oracle();
        q.value(&self.x0()) - q.min_value()
    }

    pub fn grid_size(&self) -> usize {
        self.methods.iter().map(|m| m.grid.len()).sum()
    }

    pub fn total_runs(&self) -> usize {
        self.grid_size() * self.seeds.len()
    }
}

fn build(ctx: &Ctx, raw: RawConfig) -> Result<ExperimentConfig, ConfigError> {
    let workers = *raw.workers.get_ref();
    if workers == 0 {
        return Err(ctx.err(raw.workers.span(), "workers must be at least 1"));
    }
    let budget = *raw.budget.get_ref();
    if !(budget >= 0.0 && budget.is_finite()) {
        return Err(ctx.err(
            raw.budget.span(),
            format!("budget must be finite and >= 0, got {budget}"),
        ));
    }
    let seeds = raw.seeds.get_ref().clone();
    if seeds.is_empty() {
        return Err(ctx.err(raw.seeds.span(), "seeds must not be empty"));
    }
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(ctx.err(
            raw.seeds.span(),
            format!("seeds must be distinct, {} repeats", w[0]),
        ));
    }
    if *raw.record_every.get_ref() == 0 {
        return Err(ctx.err(raw.record_every.span(), "record_every must be at least 1"));
    }

    let p = &raw.problem;
    if p.kind.get_ref() != "quadratic" {
        return Err(ctx.err(
            p.kind.span(),
            format!("unknown problem kind {:?}", p.kind.get_ref()),
        ));
    }
    if *p.dim.get_ref() == 0 {
        return Err(ctx.err(p.dim.span(), "dim must be at least 1"));
    }
    let sigma_add = *p.sigma_add.get_ref();
    if !(sigma_add >= 0.0 && sigma_add.is_finite()) {
        return Err(ctx.err(p.sigma_add.span(), "sigma_add must be finite and >= 0"));
    }
    let problem = ProblemSpec {
        dim: *p.dim.get_ref(),
        sigma_add,
    };

    let delay = build_delay(ctx, &raw.delay, workers)?;

    let mut cfg = ExperimentConfig {
        problem,
        delay,
        workers,
        budget,
        seeds,
        master_seed: raw.master_seed,
        record_every: *raw.record_every.get_ref(),
        metric: raw.metric,
        out: raw.out.map(PathBuf::from),
        max_runs: raw.max_runs,
        sigma_convention: raw.sigma_convention,
        restart: raw.restart,
        start: raw.start,
        resample_delays: raw.resample_delays,
        methods: Vec::new(),
    };
    if raw.methods.is_empty() {
        return Err(ctx.err(0..0, "at least one [[methods]] entry is required"));
    }
    for m in &raw.methods {
        let spec = build_method(ctx, &cfg, m)?;
        cfg.methods.push(spec);
    }
    Ok(cfg)
}

fn build_delay(ctx: &Ctx, d: &RawDelay, workers: usize) -> Result<DelayModel, ConfigError> {
    let model = match d.kind.get_ref().as_str() {
        "sqrt" => DelayModel::Sqrt { permute: d.permute },
        "uniform" => DelayModel::Uniform { lo: d.lo, hi: d.hi },
        "mixture" => {
            let peaks = d.peaks.as_ref().map_or(3, |p| *p.get_ref());
            if peaks == 0 {
                let span = d.peaks.as_ref().map_or(d.kind.span(), |p| p.span());
                return Err(ctx.err(span, "peaks must be at least 1"));
            }
            DelayModel::Mixture {
                peaks,
                stddev: d.stddev,
            }
        }
        other => {
            return Err(ctx.err(
                d.kind.span(),
                format!("unknown delay kind {other:?}; expected sqrt, uniform or mixture"),
            ))
        }
    };
    rennala_core::sample_delays(&model, workers, 0)
        .map_err(|e| ctx.err(d.kind.span(), e.to_string()))?;
    Ok(model)
}

fn floats(g: &Grid<f64>) -> Vec<f64> {
    match g {
        Grid::One(v) => vec![*v],
        Grid::Many(v) => v.clone(),
    }
}

fn build_method(
    ctx: &Ctx,
    cfg: &ExperimentConfig,
    m: &Spanned<RawMethod>,
) -> Result<MethodSpec, ConfigError> {
    let r = m.get_ref();
    let kind = MethodKind::parse(r.method.get_ref()).ok_or_else(|| {
        ctx.err(
            r.method.span(),
            format!(
                "unknown method {:?}; expected rennala_sgd, rennala_mvr or rennala_mvr_inexact",
                r.method.get_ref()
            ),
        )
    })?;

    if let Some(eps) = &r.tuned_eps {
        if r.gamma.is_some() || r.b.is_some() || r.p.is_some() || r.b0.is_some() {
            return Err(ctx.err(
                eps.span(),
                "tuned_eps derives gamma, B, p and B0; remove them",
            ));
        }
        if kind == MethodKind::RennalaSgd {
            return Err(ctx.err(eps.span(), "tuned_eps applies to the MVR methods only"));
        }
        let oracle = cfg.oracle();
        let params = tuned_params(
            *eps.get_ref(),
            cfg.sigma(),
            cfg.delta(),
            oracle.smoothness(),
        )
        .map_err(|e| ctx.err(eps.span(), e.to_string()))?;
        let mut hyper = params.hyper();
        if let Some(a) = &r.alpha {
            let alphas = floats(a.get_ref());
            if alphas.len() != 1 {
                return Err(ctx.err(a.span(), "tuned_eps takes a single alpha"));
            }
            hyper.alpha = alphas[0];
        }
        hyper
            .validate()
            .map_err(|e| ctx.err(m.span(), e.to_string()))?;
        return Ok(MethodSpec {
            kind,
            grid: vec![hyper],
        });
    }

    let gamma = r
        .gamma
        .as_ref()
        .ok_or_else(|| ctx.err(r.method.span(), "missing gamma"))?;
    let gammas = match gamma.get_ref() {
        GammaGrid::One(v) => vec![*v],
        GammaGrid::Many(v) => v.clone(),
        GammaGrid::Pow2 { pow2: [lo, hi] } => {
            if lo > hi {
                return Err(ctx.err(
                    gamma.span(),
                    "pow2 range must be [low, high] with low <= high",
                ));
            }
            (*lo..=*hi).map(|j| 2f64.powi(j)).collect()
        }
    };
    nonempty(ctx, gamma.span(), "gamma", gammas.len())?;

    let bs: Vec<u64> = match &r.b {
        Some(b) => {
            let v = match b.get_ref() {
                Grid::One(x) => vec![*x],
                Grid::Many(x) => x.clone(),
            };
            nonempty(ctx, b.span(), "B", v.len())?;
            if v.contains(&0) {
                return Err(ctx.err(b.span(), "B must be at least 1"));
            }
            v
        }
        None => vec![1],
    };

    let is_mvr = kind != MethodKind::RennalaSgd;
    if !is_mvr {
        if let Some(p) = &r.p {
            return Err(ctx.err(p.span(), "p is not used by rennala_sgd"));
        }
    }
    if kind != MethodKind::RennalaMvrInexact {
        if let Some(a) = &r.alpha {
            return Err(ctx.err(a.span(), "alpha is only used by rennala_mvr_inexact"));
        }
    }
    if !is_mvr {
        if let Some(b0) = &r.b0 {
            return Err(ctx.err(b0.span(), "B0 is not used by rennala_sgd"));
        }
    }

    let ps = match &r.p {
        Some(p) => {
            let v = floats(p.get_ref());
            nonempty(ctx, p.span(), "p", v.len())?;
            v
        }
        None if is_mvr => return Err(ctx.err(r.method.span(), "missing p")),
        None => vec![1.0],
    };
    let b0s: Vec<B0Raw> = match &r.b0 {
        Some(b0) => {
            let v = match b0.get_ref() {
                Grid::One(x) => vec![x.clone()],
                Grid::Many(x) => x.clone(),
            };
            nonempty(ctx, b0.span(), "B0", v.len())?;
            for choice in &v {
                match choice {
                    B0Raw::Count(0) => return Err(ctx.err(b0.span(), "B0 must be at least 1")),
                    B0Raw::Symbol(s) if s != "B" && s != "B^2" => {
                        return Err(ctx.err(
                            b0.span(),
                            format!("B0 symbol must be \"B\" or \"B^2\", got {s:?}"),
                        ))
                    }
                    _ => {}
                }
            }
            v
        }
        None if is_mvr => return Err(ctx.err(r.method.span(), "missing B0")),
        None => vec![B0Raw::Count(0)],
    };
    let alphas = match &r.alpha {
        Some(a) => {
            let v = floats(a.get_ref());
            nonempty(ctx, a.span(), "alpha", v.len())?;
            v
        }
        None => vec![1.0],
    };

    let mut grid = Vec::new();
    for &g in &gammas {
        for &b in &bs {
            for &p in &ps {
                for b0 in &b0s {
                    for &alpha in &alphas {
                        let b0 = match b0 {
                            B0Raw::Count(c) => *c as usize,
                            B0Raw::Symbol(s) if s == "B" => b as usize,
                            B0Raw::Symbol(_) => (b * b) as usize,
                        };
                        let hyper = if is_mvr {
                            Hyper {
                                alpha,
                                ..Hyper::mvr(g, p, b as usize, b0)
                            }
                        } else {
                            Hyper::sgd(g, b as usize)
                        };
                        hyper
                            .validate()
                            .map_err(|e| ctx.err(m.span(), e.to_string()))?;
                        grid.push(hyper);
                    }
                }
            }
        }
    }
    Ok(MethodSpec { kind, grid })
}

fn nonempty(ctx: &Ctx, span: Range<usize>, name: &str, len: usize) -> Result<(), ConfigError> {
    if len == 0 {
        Err(ctx.err(span, format!("{name} grid must not be empty")))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
workers = 4
budget = 100
seeds = [0, 1]

[problem]
dim = 5
sigma_add = 0.1

[delay]
kind = "sqrt"
"#;

    fn with_methods(methods: &str) -> String {
        format!("{BASE}\n{methods}")
    }

    #[test]
    fn parses_minimal_sgd_config() {
        let src = with_methods("[[methods]]\nmethod = \"rennala_sgd\"\ngamma = 0.5\nB = [1, 2]\n");
        let cfg = ExperimentConfig::parse(&src, "t.toml").unwrap();
        assert_eq!(cfg.workers, 4);
        assert_eq!(cfg.budget, 100.0);
        assert_eq!(cfg.methods.len(), 1);
        assert_eq!(
            cfg.methods[0].grid,
            vec![Hyper::sgd(0.5, 1), Hyper::sgd(0.5, 2)]
        );
        assert_eq!(cfg.metric, Metric::GradSqNorm);
        assert!(cfg.restart && cfg.resample_delays);
        assert_eq!(cfg.total_runs(), 4);
    }

    #[test]
    fn b0_symbols_expand_per_batch() {
        let src = with_methods(
            "[[methods]]\nmethod = \"rennala_mvr\"\ngamma = [0.1, 0.2]\nB = [3, 4]\np = 0.5\nB0 = [\"B\", \"B^2\", 7]\n",
        );
        let cfg = ExperimentConfig::parse(&src, "t.toml").unwrap();
        let b0: Vec<(usize, usize)> = cfg.methods[0].grid.iter().map(|h| (h.b, h.b0)).collect();
        assert_eq!(b0[..6], [(3, 3), (3, 9), (3, 7), (4, 4), (4, 16), (4, 7)]);
        assert_eq!(cfg.methods[0].grid.len(), 12);
        assert_eq!(cfg.methods[0].grid[6].gamma, 0.2);
    }

    #[test]
    fn pow2_gamma_range() {
        let src =
            with_methods("[[methods]]\nmethod = \"rennala_sgd\"\ngamma = { pow2 = [-2, 1] }\n");
        let cfg = ExperimentConfig::parse(&src, "t.toml").unwrap();
        let g: Vec<f64> = cfg.methods[0].grid.iter().map(|h| h.gamma).collect();
        assert_eq!(g, vec![0.25, 0.5, 1.0, 2.0]);
    }

    #[test]
    fn errors_point_at_the_offending_line() {
        let src = with_methods("[[methods]]\nmethod = \"rennala_sgd\"\ngamma = 0.5\nB = [1, 0]\n");
        let e = ExperimentConfig::parse(&src, "t.toml").unwrap_err();
        let line = src.lines().position(|l| l.starts_with("B = ")).unwrap() + 1;
        assert_eq!(e.line, line, "{e}");
        assert!(e.to_string().starts_with(&format!("t.toml:{line}:")));

        let src = BASE.replace("sigma_add = 0.1", "sigma_add = -1.0")
            + "[[methods]]\nmethod = \"rennala_sgd\"\ngamma = 0.5\n";
        let e = ExperimentConfig::parse(&src, "t.toml").unwrap_err();
        assert_eq!(e.line, 8);
        assert!(e.message.contains("sigma_add"));
    }

    #[test]
    fn syntax_and_unknown_keys_are_located() {
        let src = with_methods("[[methods]]\nmethod = \"rennala_sgd\"\ngamma = 0.5\nbeta = 2\n");
        let e = ExperimentConfig::parse(&src, "t.toml").unwrap_err();
        assert_eq!(
            e.line,
            src.lines().position(|l| l.starts_with("beta")).unwrap() + 1
        );

        let e = ExperimentConfig::parse("workers = \nbudget = 1", "t.toml").unwrap_err();
        assert_eq!(e.line, 1);
    }

    #[test]
    fn rejects_bad_top_level_values() {
        let m = "[[methods]]\nmethod = \"rennala_sgd\"\ngamma = 0.5\n";
        for (from, to, needle) in [
            ("seeds = [0, 1]", "seeds = [1, 1]", "distinct"),
            ("seeds = [0, 1]", "seeds = []", "empty"),
            ("budget = 100", "budget = -1", "budget"),
            ("workers = 4", "workers = 0", "workers"),
            ("kind = \"sqrt\"", "kind = \"lognormal\"", "delay kind"),
        ] {
            let src = BASE.replace(from, to) + m;
            let e = ExperimentConfig::parse(&src, "t.toml").unwrap_err();
            assert!(e.message.contains(needle), "{e}");
            assert_eq!(e.line, src.lines().position(|l| l == to).unwrap() + 1);
        }
    }

    #[test]
    fn method_field_checks() {
        for (body, needle) in [
            (
                "method = \"rennala_sgd\"\ngamma = 0.5\np = 0.3\n",
                "not used",
            ),
            (
                "method = \"rennala_mvr\"\ngamma = 0.5\nB0 = \"B\"\n",
                "missing p",
            ),
            (
                "method = \"rennala_mvr\"\ngamma = 0.5\np = 0.5\nB0 = \"B^3\"\n",
                "symbol",
            ),
            (
                "method = \"rennala_mvr\"\ngamma = 0.5\np = 1.5\nB0 = \"B\"\n",
                "p",
            ),
            ("method = \"adam\"\ngamma = 0.5\n", "unknown method"),
            ("method = \"rennala_sgd\"\ngamma = []\n", "empty"),
            (
                "method = \"rennala_mvr\"\ngamma = 0.5\np = 0.5\nB0 = 1\nalpha = 0.5\n",
                "alpha",
            ),
        ] {
            let src = with_methods(&format!("[[methods]]\n{body}"));
            let e = ExperimentConfig::parse(&src, "t.toml").unwrap_err();
            assert!(e.message.contains(needle), "{body}: {e}");
            assert!(e.line > 10, "{e}");
        }
    }

    #[test]
    fn tuned_entry_derives_hyperparameters() {
        let src = format!("start = \"zero\"\n{BASE}")
            .replace("dim = 5", "dim = 10")
            .replace("sigma_add = 0.1", "sigma_add = 0.01")
            + "[[methods]]\nmethod = \"rennala_mvr\"\ntuned_eps = 6e-4\n";
        let cfg = ExperimentConfig::parse(&src, "t.toml").unwrap();
        let h = cfg.methods[0].grid[0];
        assert_eq!((h.b, h.b0), (8, 10));
        assert!((cfg.delta() - 0.11363636363636363).abs() < 1e-15);
    }

    #[test]
    fn sigma_conventions() {
        let m = "[[methods]]\nmethod = \"rennala_sgd\"\ngamma = 0.5\n";
        let total = ExperimentConfig::parse(&with_methods(m), "t").unwrap();
        assert!((total.sigma() - 5f64.sqrt() * 0.1).abs() < 1e-15);
        let src = format!("sigma_convention = \"per_coordinate\"\n{BASE}{m}");
        let per = ExperimentConfig::parse(&src, "t").unwrap();
        assert_eq!(per.sigma(), 0.1);
    }

    #[test]
    fn locate_counts_lines_and_columns() {
        assert_eq!(locate("ab\ncd", 0), (1, 1));
        assert_eq!(locate("ab\ncd", 4), (2, 2));
        assert_eq!(locate("ab\ncd", 99), (2, 3));
    }
}
