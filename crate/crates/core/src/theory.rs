//! Closed-form time and oracle complexities.
//!
//! `T(B) = min_m (sum_{i<=m} 1/tau_(i))^{-1} (B + m)` over the sorted delays
//! bounds the time to collect `B` gradients. The MVR bound is
//! `2 T(B0) + 4 K T(B)`, the SGD bound is `(24 L Delta / eps) T(ceil(sigma^2/eps))`
//! and the lower bound (with constant 1) is
//! `(L_bar Delta min(sqrt(eps)/sigma, 1) / eps + 1) T(sigma^2/eps)`.
//!
//! The SGD constant 24 mirrors the MVR iteration count; only the order of the
//! SGD bound is known, so reports flag it as a convention.

use crate::delay::{DelayProfile, RateFunction};
use crate::error::{Error, Result};
use crate::numeric::ceil_tol;
use crate::optim::{tuned_params, TunedParams};

/// Constant used for the SGD time bound and iteration count.
pub const SGD_CONSTANT: f64 = 24.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollectionTime {
    pub value: f64,
    /// Number of fastest workers attaining the minimum (smallest on ties).
    pub argmin_m: usize,
}

/// Prefix sums of `1/tau` over the sorted delays, for repeated `T(B)` queries.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeedPrefix {
    sums: Vec<f64>,
}

impl SpeedPrefix {
    pub fn new(profile: &DelayProfile) -> Self {
        let mut acc = 0.0;
        let sums = profile
            .sorted_view()
            .iter()
            .map(|t| {
                acc += 1.0 / t;
                acc
            })
            .collect();
        Self { sums }
    }

    pub fn t_of_b(&self, b: f64) -> CollectionTime {
        let mut best = CollectionTime {
            value: f64::INFINITY,
            argmin_m: 1,
        };
        for (i, s) in self.sums.iter().enumerate() {
            let m = i + 1;
            let v = (b + m as f64) / s;
            if v < best.value {
                best = CollectionTime {
                    value: v,
                    argmin_m: m,
                };
            }
        }
        best
    }
}

/// `T(b)` for one profile. `b` may be fractional (the lower bound uses `sigma^2/eps`).
pub fn t_of_b(profile: &DelayProfile, b: f64) -> CollectionTime {
    SpeedPrefix::new(profile).t_of_b(b)
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::BadEps(eps))
    }
}

/// `2 T(B0) + 4 K T(B)` with the iteration-complexity parameters.
pub fn mvr_time_bound(
    eps: f64,
    sigma: f64,
    delta: f64,
    l_bar: f64,
    profile: &DelayProfile,
) -> Result<f64> {
    let tp = tuned_params(eps, sigma, delta, l_bar)?;
    let pre = SpeedPrefix::new(profile);
    Ok(2.0 * pre.t_of_b(tp.b0 as f64).value + 4.0 * tp.k as f64 * pre.t_of_b(tp.b as f64).value)
}

/// Rennala SGD batch size `ceil(sigma^2/eps)` (at least 1).
pub fn sgd_batch(eps: f64, sigma: f64) -> u64 {
    (ceil_tol(sigma * sigma / eps) as u64).max(1)
}

/// Rennala SGD iteration count `ceil(24 L Delta / eps)`.
pub fn sgd_iterations(eps: f64, delta: f64, l: f64) -> u64 {
    ceil_tol(SGD_CONSTANT * l * delta / eps) as u64
}

/// `(24 L Delta / eps) T(ceil(sigma^2/eps))`.
pub fn sgd_time_bound(
    eps: f64,
    sigma: f64,
    delta: f64,
    l: f64,
    profile: &DelayProfile,
) -> Result<f64> {
    check_eps(eps)?;
    Ok(SGD_CONSTANT * l * delta / eps * t_of_b(profile, sgd_batch(eps, sigma) as f64).value)
}

/// `(L_bar Delta min(sqrt(eps)/sigma, 1) / eps + 1) T(sigma^2/eps)` with `sigma^2/eps` real.
pub fn lower_time_bound(
    eps: f64,
    sigma: f64,
    delta: f64,
    l_bar: f64,
    profile: &DelayProfile,
) -> Result<f64> {
    check_eps(eps)?;
    let rounds = if sigma * sigma > eps {
        // L_bar Delta (sqrt(eps)/sigma) / eps, simplified
        l_bar * delta / (sigma * eps.sqrt())
    } else {
        l_bar * delta / eps
    };
    Ok((rounds + 1.0) * t_of_b(profile, sigma * sigma / eps).value)
}

/// Every bound for one parameter point.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexityReport {
    pub params: TunedParams,
    pub t_of_b: f64,
    pub argmin_m_b: usize,
    pub t_of_b0: f64,
    pub argmin_m_b0: usize,
    pub mvr_time: f64,
    pub sgd_time: f64,
    pub argmin_m_sgd: usize,
    pub lower_time: f64,
    pub argmin_m_lower: usize,
    pub mvr_oracle: u64,
    pub sgd_batch: u64,
    pub sgd_iterations: u64,
    pub sgd_oracle: u64,
    /// Always true: the SGD constant is a convention, not a proven value.
    pub sgd_constant_is_convention: bool,
}

impl ComplexityReport {
    /// Uses `L = L_bar` for the SGD row.
    pub fn new(
        eps: f64,
        sigma: f64,
        delta: f64,
        l_bar: f64,
        profile: &DelayProfile,
    ) -> Result<Self> {
        let params = tuned_params(eps, sigma, delta, l_bar)?;
        let pre = SpeedPrefix::new(profile);
        let tb = pre.t_of_b(params.b as f64);
        let tb0 = pre.t_of_b(params.b0 as f64);
        let sgd_b = sgd_batch(eps, sigma);
        let tsgd = pre.t_of_b(sgd_b as f64);
        let tlow = pre.t_of_b(sigma * sigma / eps);
        let sgd_k = sgd_iterations(eps, delta, l_bar);
        Ok(Self {
            params,
            t_of_b: tb.value,
            argmin_m_b: tb.argmin_m,
            t_of_b0: tb0.value,
            argmin_m_b0: tb0.argmin_m,
            mvr_time: mvr_time_bound(eps, sigma, delta, l_bar, profile)?,
            sgd_time: sgd_time_bound(eps, sigma, delta, l_bar, profile)?,
            argmin_m_sgd: tsgd.argmin_m,
            lower_time: lower_time_bound(eps, sigma, delta, l_bar, profile)?,
            argmin_m_lower: tlow.argmin_m,
            mvr_oracle: params.oracle_calls(),
            sgd_batch: sgd_b,
            sgd_iterations: sgd_k,
            sgd_oracle: sgd_k * sgd_b,
            sgd_constant_is_convention: true,
        })
    }

    fn fields(&self) -> Vec<(&'static str, String)> {
        let p = &self.params;
        vec![
            ("gamma", format!("{}", p.gamma)),
            ("p", format!("{}", p.p)),
            ("B", p.b.to_string()),
            ("B0", p.b0.to_string()),
            ("K", p.k.to_string()),
            ("T(B)", format!("{}", self.t_of_b)),
            ("argmin_m(B)", self.argmin_m_b.to_string()),
            ("T(B0)", format!("{}", self.t_of_b0)),
            ("argmin_m(B0)", self.argmin_m_b0.to_string()),
            ("mvr_time", format!("{}", self.mvr_time)),
            ("sgd_time", format!("{}", self.sgd_time)),
            ("argmin_m(sgd)", self.argmin_m_sgd.to_string()),
            ("lower_time", format!("{}", self.lower_time)),
            ("argmin_m(lower)", self.argmin_m_lower.to_string()),
            ("mvr_oracle", self.mvr_oracle.to_string()),
            ("sgd_batch", self.sgd_batch.to_string()),
            ("sgd_iterations", self.sgd_iterations.to_string()),
            ("sgd_oracle", self.sgd_oracle.to_string()),
            (
                "sgd_constant_is_convention",
                self.sgd_constant_is_convention.to_string(),
            ),
        ]
    }

    /// One `name  value` line per field, names padded to a common width.
    pub fn to_text(&self) -> String {
        let f = self.fields();
        let w = f.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        f.iter().map(|(k, v)| format!("{k:<w$}  {v}\n")).collect()
    }

    pub fn csv_header(&self) -> String {
        self.fields()
            .iter()
            .map(|(k, _)| *k)
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn csv_row(&self) -> String {
        self.fields()
            .into_iter()
            .map(|(_, v)| v)
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Constant rates `1/tau_i` for a fixed-time profile.
pub fn rates_from_profile(profile: &DelayProfile) -> Vec<RateFunction> {
    profile
        .taus()
        .iter()
        .map(|&t| RateFunction::from_period(t).expect("profile delays are positive"))
        .collect()
}

fn total_units(rates: &[RateFunction], from: f64, t: f64, unit: f64) -> u64 {
    rates.iter().map(|r| r.units_completed(from, t, unit)).sum()
}

/// Smallest `t >= from` with `sum_i floor(int_from^t p_i / unit) >= target`.
///
/// Bisects to `1e-9`, then snaps to the exact completion instant inside the
/// final bracket.
fn first_time_reaching(rates: &[RateFunction], from: f64, unit: f64, target: u64) -> Result<f64> {
    if target == 0 {
        return Ok(from);
    }
    let reachable: u64 = rates
        .iter()
        .map(|r| {
            if r.eventually_idle() {
                (r.remaining_mass(from) / unit).floor() as u64 + 1
            } else {
                u64::MAX / rates.len() as u64
            }
        })
        .sum();
    if reachable < target {
        return Err(Error::Unreachable { target });
    }
    let idle_end = rates
        .iter()
        .map(|r| *r.breakpoints().last().expect("nonempty"))
        .fold(from, f64::max);
    let mut hi = from + 1.0;
    let mut width = 1.0;
    while total_units(rates, from, hi, unit) < target {
        if rates.iter().all(|r| r.eventually_idle()) && hi > idle_end {
            return Err(Error::Unreachable { target });
        }
        width *= 2.0;
        hi = from + width;
        if !hi.is_finite() {
            return Err(Error::Unreachable { target });
        }
    }
    let mut lo = from;
    while hi - lo > 1e-9 {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if total_units(rates, from, mid, unit) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut candidates = vec![hi];
    for r in rates {
        let mut q = r.units_completed(from, lo, unit) + 1;
        while let Some(t) = r.time_to_reach(from, q as f64 * unit) {
            if t > hi {
                break;
            }
            if t > lo {
                candidates.push(t);
            }
            q += 1;
        }
    }
    candidates.sort_by(f64::total_cmp);
    Ok(candidates
        .into_iter()
        .find(|&t| total_units(rates, from, t, unit) >= target)
        .unwrap_or(hi))
}

/// Completion times `T^0, ..., T^K` of Rennala MVR under the universal model:
/// `T^0` collects `B0` single gradients from time 0, and round `k` collects `B`
/// pairs (half the integrated rate) from `T^{k-1}`.
pub fn universal_completion_times(
    rates: &[RateFunction],
    b0: u64,
    b: u64,
    k: u64,
) -> Result<Vec<f64>> {
    if rates.is_empty() {
        return Err(Error::NoWorkers);
    }
    if b0 == 0 || b == 0 {
        return Err(Error::ZeroBatch);
    }
    let mut times = vec![first_time_reaching(rates, 0.0, 1.0, b0)?];
    for _ in 0..k {
        let prev = *times.last().expect("nonempty");
        times.push(first_time_reaching(rates, prev, 2.0, b)?);
    }
    Ok(times)
}

/// Rennala SGD analogue: `T^0 = 0`, each round collects `b` single gradients.
pub fn universal_sgd_completion_times(rates: &[RateFunction], b: u64, k: u64) -> Result<Vec<f64>> {
    if rates.is_empty() {
        return Err(Error::NoWorkers);
    }
    if b == 0 {
        return Err(Error::ZeroBatch);
    }
    let mut times = vec![0.0];
    for _ in 0..k {
        let prev = *times.last().expect("nonempty");
        times.push(first_time_reaching(rates, prev, 1.0, b)?);
    }
    Ok(times)
}
