//! The zero-chain hard instance.
//!
//! `F_T(x) = -Psi(1) Phi(x_1) + sum_{i=2}^T [Psi(-x_{i-1}) Phi(-x_i) - Psi(x_{i-1}) Phi(x_i)]`
//! with
//!
//! * `Psi(t) = 0` for `t <= 1/2`, `exp(1 - 1/(2t-1)^2)` otherwise,
//! * `Phi(t) = sqrt(e) * int_{-inf}^t exp(-s^2/2) ds`.
//!
//! The stochastic gradient `gbar_i = grad_i F(x) (1 + Theta_i(x)(xi/p - 1))`,
//! `xi ~ Bernoulli(p)`, hides the next chain coordinate unless `xi = 1`.
//! `Theta_i(x) = Gamma(1 - ||Gamma(|x_{>=i}|)||_2)` with `Gamma` the normalized
//! integral of the bump `Lambda(t) = exp(-1/(100 (t - 1/4)(1/2 - t)))` on `(1/4, 1/2)`.
//!
//! Indices in formulas are 1-based; slices are 0-based, so `x_i` is `x[i - 1]`.

use crate::error::{Error, Result};
use crate::numeric::std_normal_cdf;

const SQRT_E: f64 = 1.648_721_270_700_128_1;
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// `max{i : |x_i| > alpha}` with the virtual `x_0 = 1`, so the zero vector has progress 0.
pub fn prog(x: &[f64], alpha: f64) -> usize {
    x.iter().rposition(|v| v.abs() > alpha).map_or(0, |i| i + 1)
}

pub fn psi(t: f64) -> f64 {
    if t <= 0.5 {
        0.0
    } else {
        let u = 2.0 * t - 1.0;
        (1.0 - 1.0 / (u * u)).exp()
    }
}

pub fn psi_prime(t: f64) -> f64 {
    if t <= 0.5 {
        0.0
    } else {
        let u = 2.0 * t - 1.0;
        psi(t) * 4.0 / (u * u * u)
    }
}

pub fn phi(t: f64) -> f64 {
    SQRT_E * SQRT_2PI * std_normal_cdf(t)
}

pub fn phi_prime(t: f64) -> f64 {
    SQRT_E * (-0.5 * t * t).exp()
}

/// `Lambda(t)`, the unnormalized bump on `(1/4, 1/2)`.
pub fn bump(t: f64) -> f64 {
    if t <= 0.25 || t >= 0.5 {
        0.0
    } else {
        (-1.0 / (100.0 * (t - 0.25) * (0.5 - t))).exp()
    }
}

/// `Lambda'(t)`.
pub fn bump_prime(t: f64) -> f64 {
    if t <= 0.25 || t >= 0.5 {
        0.0
    } else {
        let u = (t - 0.25) * (0.5 - t);
        bump(t) * (0.75 - 2.0 * t) / (100.0 * u * u)
    }
}

/// A point of `R^T` with its progress values cached.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainPoint {
    coords: Vec<f64>,
    /// `prog_0`, `prog_{1/4}`, `prog_{1/2}`, `prog_1`.
    pub progress: [usize; 4],
}

impl ChainPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("chain point"));
        }
        let progress = [0.0, 0.25, 0.5, 1.0].map(|a| prog(&coords, a));
        Ok(Self { coords, progress })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// Chain length plus the tabulated `Gamma`.
#[derive(Clone, Debug)]
pub struct ChainInstance {
    t: usize,
    resolution: usize,
    step: f64,
    // cumulative integral of Lambda at the nodes 1/4 + j * step
    cumulative: Vec<f64>,
    gamma_norm: f64,
}

impl ChainInstance {
    pub const DEFAULT_RESOLUTION: usize = 10_000;

    /// `resolution` is the number of Simpson cells on `[1/4, 1/2]` (at least 1000).
    pub fn new(t: usize, resolution: usize) -> Result<Self> {
        if t == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        if resolution < 1000 {
            return Err(Error::InvalidHyper(format!(
                "quadrature resolution must be at least 1000, got {resolution}"
            )));
        }
        let step = 0.25 / resolution as f64;
        let mut cumulative = Vec::with_capacity(resolution + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for j in 0..resolution {
            let a = 0.25 + j as f64 * step;
            acc += simpson_cell(a, a + step);
            cumulative.push(acc);
        }
        Ok(Self {
            t,
            resolution,
            step,
            gamma_norm: acc,
            cumulative,
        })
    }

    pub fn with_default_resolution(t: usize) -> Result<Self> {
        Self::new(t, Self::DEFAULT_RESOLUTION)
    }

    pub fn len(&self) -> usize {
        self.t
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// `int_{1/4}^{1/2} Lambda`.
    pub fn gamma_norm_const(&self) -> f64 {
        self.gamma_norm
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.t {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.t,
                got: x.len(),
            })
        }
    }

    /// `Gamma(t)`: 0 below 1/4, 1 above 1/2.
    pub fn gamma_bump(&self, t: f64) -> f64 {
        if t <= 0.25 {
            return 0.0;
        }
        if t >= 0.5 {
            return 1.0;
        }
        let j = (((t - 0.25) / self.step) as usize).min(self.resolution - 1);
        let a = 0.25 + j as f64 * self.step;
        let partial = if t > a { simpson_cell(a, t) } else { 0.0 };
        ((self.cumulative[j] + partial) / self.gamma_norm).clamp(0.0, 1.0)
    }

    /// `Gamma'(t) = Lambda(t) / Z`.
    pub fn gamma_prime(&self, t: f64) -> f64 {
        bump(t) / self.gamma_norm
    }

    /// `Gamma''(t) = Lambda'(t) / Z`.
    pub fn gamma_second(&self, t: f64) -> f64 {
        bump_prime(t) / self.gamma_norm
    }

    pub fn chain_value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let mut prev = 1.0;
        let mut acc = 0.0;
        for &xi in x {
            acc += psi(-prev) * phi(-xi) - psi(prev) * phi(xi);
            prev = xi;
        }
        Ok(acc)
    }

    pub fn chain_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let t = self.t;
        let mut g = vec![0.0; t];
        for j in 0..t {
            let prev = if j == 0 { 1.0 } else { x[j - 1] };
            let xj = x[j];
            let mut v = -psi(-prev) * phi_prime(-xj) - psi(prev) * phi_prime(xj);
            if j + 1 < t {
                let next = x[j + 1];
                v += -psi_prime(-xj) * phi(-next) - psi_prime(xj) * phi(next);
            }
            g[j] = v;
        }
        Ok(g)
    }

    /// `Theta_i(x)` for every `i = 1..T`, in O(T).
    pub fn thetas(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut out = vec![0.0; self.t];
        let mut suffix = 0.0;
        for j in (0..self.t).rev() {
            let g = self.gamma_bump(x[j].abs());
            suffix += g * g;
            out[j] = self.gamma_bump(1.0 - suffix.sqrt());
        }
        Ok(out)
    }

    /// `Theta_i(x)` for one 1-based index `i`.
    pub fn theta(&self, x: &[f64], i: usize) -> Result<f64> {
        self.check(x)?;
        if i == 0 || i > self.t {
            return Err(Error::DimensionMismatch {
                expected: self.t,
                got: i,
            });
        }
        let sq: f64 = x[i - 1..]
            .iter()
            .map(|v| self.gamma_bump(v.abs()).powi(2))
            .sum();
        Ok(self.gamma_bump(1.0 - sq.sqrt()))
    }

    /// `gbar(x, xi)` for a Bernoulli draw `xi`.
    pub fn zero_chain_grad(&self, x: &[f64], xi: bool, p: f64) -> Result<Vec<f64>> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::BadProbability(p));
        }
        let g = self.chain_grad(x)?;
        let th = self.thetas(x)?;
        Ok(mask(&g, &th, xi, p))
    }
}

/// `g_i (1 + theta_i (xi/p - 1))`.
pub fn mask(grad: &[f64], thetas: &[f64], xi: bool, p: f64) -> Vec<f64> {
    let scale = if xi { 1.0 / p } else { 0.0 } - 1.0;
    grad.iter()
        .zip(thetas)
        .map(|(g, t)| g * (1.0 + t * scale))
        .collect()
}

fn simpson_cell(a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (bump(a) + 4.0 * bump(0.5 * (a + b)) + bump(b))
}
