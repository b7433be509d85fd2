//! Optimizer update rules.
//!
//! * Rennala SGD: average `B` gradients at the current point, step.
//! * Rennala MVR: each arrival is a gradient pair at `(x^k, x^{k+1})` sharing
//!   one sample; `g^{k+1} = g+/B + (1 - p)(g^k - g-/B)`.
//! * Inexact MVR: reuses the previous round's minibatch at `x^k` instead of
//!   recomputing it with the current sample, with the correction scaled by `alpha`.
//!
//! The step `x^{k+1} = x^k - gamma g^k` always uses the estimator from the
//! previous round, so the point a round's batch is evaluated at is known
//! before the batch arrives ([`MvrState::next_point`]).

use crate::error::{Error, Result};
use crate::numeric::{ceil_tol, CompensatedSum};
use crate::problem::{Oracle, Sample};

/// Minibatch size at which means switch to compensated summation.
pub const COMPENSATED_THRESHOLD: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MethodKind {
    RennalaSgd,
    RennalaMvr,
    RennalaMvrInexact,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::RennalaSgd => "rennala_sgd",
            MethodKind::RennalaMvr => "rennala_mvr",
            MethodKind::RennalaMvrInexact => "rennala_mvr_inexact",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rennala_sgd" => Some(MethodKind::RennalaSgd),
            "rennala_mvr" => Some(MethodKind::RennalaMvr),
            "rennala_mvr_inexact" => Some(MethodKind::RennalaMvrInexact),
            _ => None,
        }
    }
}

impl std::fmt::Display for MethodKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyper {
    pub gamma: f64,
    pub p: f64,
    pub b: usize,
    pub b0: usize,
    pub alpha: f64,
}

impl Hyper {
    pub fn sgd(gamma: f64, b: usize) -> Self {
        Self {
            gamma,
            p: 1.0,
            b,
            b0: b,
            alpha: 1.0,
        }
    }

    pub fn mvr(gamma: f64, p: f64, b: usize, b0: usize) -> Self {
        Self {
            gamma,
            p,
            b,
            b0,
            alpha: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        // gamma = 0 is allowed for frozen-iterate diagnostics
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidHyper(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::InvalidHyper(format!(
                "p must lie in (0, 1], got {}",
                self.p
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidHyper(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.b == 0 || self.b0 == 0 {
            return Err(Error::ZeroBatch);
        }
        Ok(())
    }
}

/// A method together with its hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Method {
    pub kind: MethodKind,
    pub hyper: Hyper,
}

/// Optimizer state shared by all three methods.
#[derive(Clone, Debug, PartialEq)]
pub struct MvrState {
    pub x: Vec<f64>,
    pub g: Vec<f64>,
    pub hyper: Hyper,
    /// Completed rounds.
    pub k: u64,
    /// Stochastic gradients consumed so far.
    pub oracle_calls: u64,
    /// Last round's minibatch mean at the then-new point (inexact variant only).
    pub grad_old: Option<Vec<f64>>,
}

impl MvrState {
    /// State for Rennala SGD, which has no initialization batch.
    pub fn for_sgd(x0: Vec<f64>, hyper: Hyper) -> Result<Self> {
        hyper.validate()?;
        let d = x0.len();
        Ok(Self {
            x: x0,
            g: vec![0.0; d],
            hyper,
            k: 0,
            oracle_calls: 0,
            grad_old: None,
        })
    }

    /// `x - gamma * g`, the point the next round's batch is evaluated at.
    pub fn next_point(&self) -> Vec<f64> {
        let gamma = self.hyper.gamma;
        self.x
            .iter()
            .zip(&self.g)
            .map(|(x, g)| x - gamma * g)
            .collect()
    }
}

/// Minibatch means collected in one round.
#[derive(Clone, Debug, PartialEq)]
pub struct Minibatch {
    /// Mean of the gradients at the new point.
    pub g_plus: Vec<f64>,
    /// Mean of the gradients at the old point (pair mode only).
    pub g_minus: Option<Vec<f64>>,
    pub count: usize,
}

impl Minibatch {
    /// Averages stochastic gradients at `x_new` (and at `x_old` with the same
    /// samples, when given) in the order of `samples`.
    pub fn evaluate<O: Oracle + ?Sized>(
        oracle: &O,
        x_new: &[f64],
        x_old: Option<&[f64]>,
        samples: &[Sample],
    ) -> Result<Self> {
        oracle.check_dim(x_new)?;
        if let Some(x) = x_old {
            oracle.check_dim(x)?;
        }
        if samples.is_empty() {
            return Err(Error::ZeroBatch);
        }
        let n = samples.len();
        let d = oracle.dim();
        let mut plus = Accumulator::new(d, n);
        let mut buf = vec![0.0; d];
        let g_minus = match x_old {
            None => {
                for &s in samples {
                    oracle.stochastic_grad_into(x_new, s, &mut buf);
                    plus.add(&buf);
                }
                None
            }
            Some(x_old) => {
                let mut minus = Accumulator::new(d, n);
                let mut buf_old = vec![0.0; d];
                for &s in samples {
                    oracle.stochastic_grad_pair_into(x_new, x_old, s, &mut buf, &mut buf_old);
                    plus.add(&buf);
                    minus.add(&buf_old);
                }
                Some(minus.mean(n))
            }
        };
        Ok(Self {
            g_plus: plus.mean(n),
            g_minus,
            count: n,
        })
    }
}

enum Accumulator {
    Plain(Vec<f64>),
    Compensated(Vec<CompensatedSum>),
}

impl Accumulator {
    fn new(d: usize, n: usize) -> Self {
        if n >= COMPENSATED_THRESHOLD {
            Accumulator::Compensated(vec![CompensatedSum::new(); d])
        } else {
            Accumulator::Plain(vec![0.0; d])
        }
    }

    fn add(&mut self, v: &[f64]) {
        match self {
            Accumulator::Plain(acc) => acc.iter_mut().zip(v).for_each(|(a, x)| *a += x),
            Accumulator::Compensated(acc) => acc.iter_mut().zip(v).for_each(|(a, x)| a.add(*x)),
        }
    }

    fn mean(self, n: usize) -> Vec<f64> {
        let n = n as f64;
        match self {
            Accumulator::Plain(acc) => acc.into_iter().map(|a| a / n).collect(),
            Accumulator::Compensated(acc) => acc.into_iter().map(|a| a.value() / n).collect(),
        }
    }
}

fn ensure_finite(v: &[f64], what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Initial estimator: mean of `B0` stochastic gradients at `x0`.
pub fn mvr_init<O: Oracle + ?Sized>(
    oracle: &O,
    x0: Vec<f64>,
    hyper: Hyper,
    samples: &[Sample],
) -> Result<MvrState> {
    hyper.validate()?;
    if samples.len() != hyper.b0 {
        return Err(Error::CountMismatch {
            expected: hyper.b0,
            got: samples.len(),
        });
    }
    let batch = Minibatch::evaluate(oracle, &x0, None, samples)?;
    let g = batch.g_plus;
    let grad_old = Some(g.clone());
    Ok(MvrState {
        x: x0,
        g,
        hyper,
        k: 0,
        oracle_calls: hyper.b0 as u64,
        grad_old,
    })
}

/// [`mvr_init`] with sample ids `0..B0` drawn from stream `seed`.
pub fn mvr_init_seeded<O: Oracle + ?Sized>(
    oracle: &O,
    x0: Vec<f64>,
    hyper: Hyper,
    seed: u64,
) -> Result<MvrState> {
    let samples: Vec<Sample> = (0..hyper.b0 as u64)
        .map(|id| Sample::new(seed, id))
        .collect();
    mvr_init(oracle, x0, hyper, &samples)
}

fn check_batch(state: &MvrState, batch: &Minibatch) -> Result<()> {
    if batch.count != state.hyper.b {
        return Err(Error::CountMismatch {
            expected: state.hyper.b,
            got: batch.count,
        });
    }
    if batch.g_plus.len() != state.x.len() {
        return Err(Error::DimensionMismatch {
            expected: state.x.len(),
            got: batch.g_plus.len(),
        });
    }
    Ok(())
}

/// One exact MVR round. `batch` must have been evaluated at
/// `(state.x, state.next_point())`.
pub fn mvr_step(mut state: MvrState, batch: &Minibatch) -> Result<MvrState> {
    check_batch(&state, batch)?;
    ensure_finite(&state.x, "iterate")?;
    ensure_finite(&state.g, "estimator")?;
    let x_next = state.next_point();
    ensure_finite(&x_next, "iterate")?;
    let p = state.hyper.p;
    if p == 1.0 {
        // momentum term vanishes identically; g- is never read
        ensure_finite(&batch.g_plus, "minibatch")?;
        state.g.copy_from_slice(&batch.g_plus);
    } else {
        let g_minus = batch.g_minus.as_ref().ok_or(Error::MissingOldPoint)?;
        if g_minus.len() != state.x.len() {
            return Err(Error::DimensionMismatch {
                expected: state.x.len(),
                got: g_minus.len(),
            });
        }
        ensure_finite(&batch.g_plus, "minibatch")?;
        ensure_finite(g_minus, "minibatch")?;
        let keep = 1.0 - p;
        for ((g, gp), gm) in state.g.iter_mut().zip(&batch.g_plus).zip(g_minus) {
            *g = gp + keep * (*g - gm);
        }
    }
    state.x = x_next;
    state.k += 1;
    state.oracle_calls += 2 * state.hyper.b as u64;
    Ok(state)
}

/// One Rennala SGD round: `x' = x - gamma * g_plus`.
pub fn sgd_step(mut state: MvrState, batch: &Minibatch) -> Result<MvrState> {
    check_batch(&state, batch)?;
    ensure_finite(&batch.g_plus, "minibatch")?;
    let gamma = state.hyper.gamma;
    for (x, g) in state.x.iter_mut().zip(&batch.g_plus) {
        *x -= gamma * g;
    }
    state.g.copy_from_slice(&batch.g_plus);
    state.k += 1;
    state.oracle_calls += state.hyper.b as u64;
    Ok(state)
}

/// One inexact MVR round with `grad_new` the minibatch mean at
/// `state.next_point()`:
/// `g' = (1-p) g + p grad_new + alpha (1-p) (grad_new - grad_old)`,
/// where `grad_old` is the cached mean from the previous round.
pub fn inexact_mvr_step(mut state: MvrState, grad_new: &[f64]) -> Result<MvrState> {
    if grad_new.len() != state.x.len() {
        return Err(Error::DimensionMismatch {
            expected: state.x.len(),
            got: grad_new.len(),
        });
    }
    let grad_old = state.grad_old.take().ok_or(Error::MissingCachedGradient)?;
    ensure_finite(grad_new, "minibatch")?;
    ensure_finite(&grad_old, "cached gradient")?;
    let x_next = state.next_point();
    let p = state.hyper.p;
    let keep = 1.0 - p;
    let corr = state.hyper.alpha * keep;
    for ((g, gn), go) in state.g.iter_mut().zip(grad_new).zip(&grad_old) {
        *g = keep * *g + p * gn + corr * (gn - go);
    }
    state.x = x_next;
    state.grad_old = Some(grad_new.to_vec());
    state.k += 1;
    state.oracle_calls += state.hyper.b as u64;
    Ok(state)
}

/// Hyperparameters that reach a target accuracy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TunedParams {
    pub gamma: f64,
    pub p: f64,
    pub b: u64,
    pub b0: u64,
    pub k: u64,
}

impl TunedParams {
    pub fn hyper(&self) -> Hyper {
        Hyper::mvr(self.gamma, self.p, self.b as usize, self.b0 as usize)
    }

    /// Total stochastic gradients, `B0 + 2KB`.
    pub fn oracle_calls(&self) -> u64 {
        self.b0 + 2 * self.k * self.b
    }
}

/// `gamma = 1/(4 L_bar)`, `p = sqrt(eps)/sigma`, `B = ceil(6 sigma/sqrt(eps))`,
/// `B0 = ceil(6 sigma^2/eps)`, `K = ceil(24 Delta L_bar/eps + sigma/sqrt(eps))`.
///
/// Outside the regime `eps < sigma^2`, `eps < 2 L_bar Delta` this returns
/// [`Error::LowNoise`] (use p = 1) or [`Error::AlreadyStationary`].
pub fn tuned_params(eps: f64, sigma: f64, delta: f64, l_bar: f64) -> Result<TunedParams> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::BadEps(eps));
    }
    if !(sigma >= 0.0 && delta >= 0.0 && l_bar > 0.0) {
        return Err(Error::InvalidHyper(format!(
            "need sigma >= 0, Delta >= 0, L_bar > 0 (got {sigma}, {delta}, {l_bar})"
        )));
    }
    let sigma_sq = sigma * sigma;
    if sigma_sq <= eps {
        return Err(Error::LowNoise { sigma_sq, eps });
    }
    let bound = 2.0 * l_bar * delta;
    if bound <= eps {
        return Err(Error::AlreadyStationary { bound, eps });
    }
    let root = eps.sqrt();
    Ok(TunedParams {
        gamma: 1.0 / (4.0 * l_bar),
        p: root / sigma,
        b: ceil_tol(6.0 * sigma / root) as u64,
        b0: ceil_tol(6.0 * sigma_sq / eps) as u64,
        k: ceil_tol(24.0 * delta * l_bar / eps + sigma / root) as u64,
    })
}
