//! Worker speed models.
//!
//! The fixed model gives every worker a constant time `tau_i` per stochastic
//! gradient. The universal model replaces the constants with a rate function
//! `p_i(s)` so that worker `i` completes `floor(integral of p_i)` gradients over
//! an interval; here rate functions are piecewise constant so the integral is
//! exact.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Per-worker seconds per single stochastic gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayProfile {
    taus: Vec<f64>,
}

impl DelayProfile {
    pub fn new(taus: Vec<f64>) -> Result<Self> {
        if taus.is_empty() {
            return Err(Error::EmptyProfile);
        }
        for (worker, &tau) in taus.iter().enumerate() {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Error::NonPositiveTau { worker, tau });
            }
        }
        Ok(Self { taus })
    }

    /// `n` identical workers.
    pub fn homogeneous(tau: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::NoWorkers);
        }
        Self::new(vec![tau; n])
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    /// The taus in nondecreasing order.
    pub fn sorted_view(&self) -> Vec<f64> {
        let mut v = self.taus.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// One of the three delay distributions used by the benchmark.
#[derive(Clone, Debug, PartialEq)]
pub enum DelayModel {
    /// `tau_i = sqrt(i)`, optionally shuffled across workers.
    Sqrt { permute: bool },
    /// i.i.d. uniform on `[lo, hi]`; `None` means `[1, 10n]`.
    Uniform { lo: Option<f64>, hi: Option<f64> },
    /// `peaks` peak locations uniform on `[1, 10n]`, each worker assigned a
    /// peak uniformly, Gaussian around it with `stddev` (default `n`), clipped
    /// to `[1, 10n]`.
    Mixture { peaks: usize, stddev: Option<f64> },
}

impl DelayModel {
    pub fn name(&self) -> &'static str {
        match self {
            DelayModel::Sqrt { .. } => "sqrt",
            DelayModel::Uniform { .. } => "uniform",
            DelayModel::Mixture { .. } => "mixture",
        }
    }
}

/// Draws a delay profile. Deterministic in `(model, n, seed)`.
pub fn sample_delays(model: &DelayModel, n: usize, seed: u64) -> Result<DelayProfile> {
    if n == 0 {
        return Err(Error::NoWorkers);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = 10.0 * n as f64;
    let taus = match *model {
        DelayModel::Sqrt { permute } => {
            let mut t: Vec<f64> = (1..=n).map(|i| (i as f64).sqrt()).collect();
            if permute {
                t.shuffle(&mut rng);
            }
            t
        }
        DelayModel::Uniform { lo, hi } => {
            let lo = lo.unwrap_or(1.0);
            let hi = hi.unwrap_or(top);
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return Err(Error::BadUniformBounds { lo, hi });
            }
            (0..n).map(|_| rng.random_range(lo..=hi)).collect()
        }
        DelayModel::Mixture { peaks, stddev } => {
            if peaks == 0 {
                return Err(Error::NoPeaks);
            }
            let sd = stddev.unwrap_or(n as f64);
            if !(sd >= 0.0 && sd.is_finite()) {
                return Err(Error::BadStddev(sd));
            }
            let centers: Vec<f64> = (0..peaks).map(|_| rng.random_range(1.0..=top)).collect();
            (0..n)
                .map(|_| {
                    let c = centers[rng.random_range(0..peaks)];
                    let draw = Normal::new(c, sd)
                        .expect("validated stddev")
                        .sample(&mut rng);
                    draw.clamp(1.0, top)
                })
                .collect()
        }
    };
    DelayProfile::new(taus)
}

/// Piecewise-constant rate (gradients per second); the last piece extends to infinity.
#[derive(Clone, Debug, PartialEq)]
pub struct RateFunction {
    starts: Vec<f64>,
    rates: Vec<f64>,
    // seconds per gradient on each piece (infinite for a zero rate)
    periods: Vec<f64>,
}

impl RateFunction {
    /// `breakpoints[0]` must be 0 and the sequence strictly increasing;
    /// `rates[j]` applies on `[breakpoints[j], breakpoints[j+1])`.
    pub fn piecewise(breakpoints: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        let periods = rates
            .iter()
            .map(|&r| if r > 0.0 { 1.0 / r } else { f64::INFINITY })
            .collect();
        Self::build(breakpoints, rates, periods)
    }

    /// Constant rate over `[0, inf)`.
    pub fn constant(rate: f64) -> Result<Self> {
        Self::piecewise(vec![0.0], vec![rate])
    }

    /// Constant rate `1/tau`, with `tau` kept exactly so completion times are
    /// `t0 + q * tau` bit for bit.
    pub fn from_period(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::NonPositiveTau { worker: 0, tau });
        }
        Self::build(vec![0.0], vec![1.0 / tau], vec![tau])
    }

    fn build(starts: Vec<f64>, rates: Vec<f64>, periods: Vec<f64>) -> Result<Self> {
        if starts.is_empty() || starts.len() != rates.len() {
            return Err(Error::BadRate(format!(
                "{} breakpoints for {} rates",
                starts.len(),
                rates.len()
            )));
        }
        if starts[0] != 0.0 {
            return Err(Error::BadRate("first breakpoint must be 0".into()));
        }
        if starts
            .windows(2)
            .any(|w| !(w[1] > w[0]) || !w[1].is_finite())
        {
            return Err(Error::BadRate(
                "breakpoints must be finite and strictly increasing".into(),
            ));
        }
        if rates.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::BadRate(
                "rates must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            starts,
            rates,
            periods,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.starts
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    fn piece_end(&self, j: usize) -> f64 {
        self.starts.get(j + 1).copied().unwrap_or(f64::INFINITY)
    }

    fn piece_at(&self, t: f64) -> usize {
        self.starts.partition_point(|&s| s <= t).saturating_sub(1)
    }

    /// Exact integral of the rate over `[t1, t2]`.
    pub fn integral(&self, t1: f64, t2: f64) -> f64 {
        if t2 <= t1 {
            return 0.0;
        }
        let mut acc = 0.0;
        let mut j = self.piece_at(t1);
        let mut a = t1;
        while a < t2 {
            let e = self.piece_end(j).min(t2);
            if self.rates[j] > 0.0 {
                acc += (e - a) / self.periods[j];
            }
            a = e;
            j += 1;
        }
        acc
    }

    /// Smallest `t >= from` with `integral(from, t) >= amount`, inverted piece by
    /// piece as `a + remaining * period`. `None` if the rate vanishes first.
    pub fn time_to_reach(&self, from: f64, amount: f64) -> Option<f64> {
        if amount <= 0.0 {
            return Some(from);
        }
        let mut remaining = amount;
        let mut j = self.piece_at(from);
        let mut a = from;
        loop {
            let e = self.piece_end(j);
            if self.rates[j] > 0.0 {
                if e.is_infinite() {
                    return Some(a + remaining * self.periods[j]);
                }
                let capacity = (e - a) / self.periods[j];
                if remaining <= capacity {
                    return Some(a + remaining * self.periods[j]);
                }
                remaining -= capacity;
            } else if e.is_infinite() {
                return None;
            }
            a = e;
            j += 1;
        }
    }

    /// Number of completed units of `unit` gradients over `[from, t]`, i.e.
    /// `floor(integral / unit)`, evaluated consistently with [`Self::time_to_reach`].
    pub(crate) fn units_completed(&self, from: f64, t: f64, unit: f64) -> u64 {
        if t <= from {
            return 0;
        }
        let mut q = (self.integral(from, t) / unit).floor().max(0.0) as u64;
        while self
            .time_to_reach(from, (q + 1) as f64 * unit)
            .is_some_and(|s| s <= t)
        {
            q += 1;
        }
        while q > 0
            && self
                .time_to_reach(from, q as f64 * unit)
                .is_none_or(|s| s > t)
        {
            q -= 1;
        }
        q
    }

    /// `true` when the rate is eventually zero for good.
    pub fn eventually_idle(&self) -> bool {
        *self.rates.last().expect("nonempty") == 0.0
    }

    /// Total integral over `[from, inf)` when the rate eventually vanishes.
    pub fn remaining_mass(&self, from: f64) -> f64 {
        if !self.eventually_idle() {
            return f64::INFINITY;
        }
        let last = *self.starts.last().expect("nonempty");
        self.integral(from, last.max(from))
    }
}

/// `floor(integral_{t1}^{t2} p(s) ds)`: gradients a worker completes on `[t1, t2]`.
pub fn gradients_completed(rate: &RateFunction, t1: f64, t2: f64) -> Result<u64> {
    if !(t1 >= 0.0) || t2 < t1 {
        return Err(Error::ReversedInterval { t1, t2 });
    }
    Ok(rate.units_completed(t1, t2, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sqrt_profile_without_permutation() {
        let p = sample_delays(&DelayModel::Sqrt { permute: false }, 4, 0).unwrap();
        let want = [1.0, 2f64.sqrt(), 3f64.sqrt(), 2.0];
        for (a, b) in p.taus().iter().zip(want) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn sqrt_profile_single_worker() {
        for seed in 0..5 {
            let p = sample_delays(&DelayModel::Sqrt { permute: true }, 1, seed).unwrap();
            assert_eq!(p.taus(), &[1.0]);
        }
    }

    #[test]
    fn permuted_sqrt_is_a_permutation() {
        let p = sample_delays(&DelayModel::Sqrt { permute: true }, 10, 3).unwrap();
        let sorted = p.sorted_view();
        for (i, t) in sorted.iter().enumerate() {
            assert_eq!(*t, ((i + 1) as f64).sqrt());
        }
    }

    #[test]
    fn uniform_profile_in_range() {
        for seed in 0..20 {
            let p = sample_delays(&DelayModel::Uniform { lo: None, hi: None }, 10, seed).unwrap();
            assert!(p.taus().iter().all(|&t| (1.0..=100.0).contains(&t)));
        }
    }

    #[test]
    fn mixture_profile_clipped() {
        for seed in 0..20 {
            let model = DelayModel::Mixture {
                peaks: 3,
                stddev: Some(50.0),
            };
            let p = sample_delays(&model, 10, seed).unwrap();
            assert!(p.taus().iter().all(|&t| (1.0..=100.0).contains(&t)));
        }
    }

    #[test]
    fn sampler_errors() {
        assert_eq!(
            sample_delays(&DelayModel::Sqrt { permute: false }, 0, 1),
            Err(Error::NoWorkers)
        );
        assert!(matches!(
            sample_delays(
                &DelayModel::Uniform {
                    lo: Some(5.0),
                    hi: Some(5.0)
                },
                3,
                1
            ),
            Err(Error::BadUniformBounds { .. })
        ));
        assert_eq!(
            sample_delays(
                &DelayModel::Mixture {
                    peaks: 0,
                    stddev: None
                },
                3,
                1
            ),
            Err(Error::NoPeaks)
        );
    }

    #[test]
    fn profile_rejects_nonpositive_tau() {
        assert_eq!(
            DelayProfile::new(vec![1.0, 0.0]),
            Err(Error::NonPositiveTau {
                worker: 1,
                tau: 0.0
            })
        );
        assert_eq!(DelayProfile::new(vec![]), Err(Error::EmptyProfile));
    }

    #[test]
    fn sampling_is_reproducible() {
        let models = [
            DelayModel::Sqrt { permute: true },
            DelayModel::Uniform { lo: None, hi: None },
            DelayModel::Mixture {
                peaks: 3,
                stddev: None,
            },
        ];
        for m in &models {
            let a = sample_delays(m, 16, 99).unwrap();
            let b = sample_delays(m, 16, 99).unwrap();
            assert_eq!(a, b);
            let bits_a: Vec<u64> = a.taus().iter().map(|t| t.to_bits()).collect();
            let bits_b: Vec<u64> = b.taus().iter().map(|t| t.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }

    #[test]
    fn gradients_completed_examples() {
        let half = RateFunction::constant(0.5).unwrap();
        assert_eq!(gradients_completed(&half, 0.0, 7.0).unwrap(), 3);
        let zero = RateFunction::constant(0.0).unwrap();
        assert_eq!(gradients_completed(&zero, 0.0, 1e6).unwrap(), 0);
        let burst = RateFunction::piecewise(vec![0.0, 1.0], vec![2.0, 0.0]).unwrap();
        assert_eq!(gradients_completed(&burst, 0.0, 5.0).unwrap(), 2);
        assert!(matches!(
            gradients_completed(&half, 3.0, 2.0),
            Err(Error::ReversedInterval { .. })
        ));
    }

    #[test]
    fn constant_rate_matches_floor_on_grid() {
        for &tau in &[0.3, 1.0, 2.0, 1.7] {
            let r = RateFunction::from_period(tau).unwrap();
            for k in 0..400 {
                let t = k as f64 * 0.05;
                let want = (t / tau).floor() as u64;
                assert_eq!(
                    gradients_completed(&r, 0.0, t).unwrap(),
                    want,
                    "tau={tau} t={t}"
                );
            }
        }
    }

    #[test]
    fn rate_function_validation() {
        assert!(RateFunction::piecewise(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(RateFunction::piecewise(vec![0.5], vec![1.0]).is_err());
        assert!(RateFunction::piecewise(vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 1.0]).is_err());
        assert!(RateFunction::piecewise(vec![0.0], vec![-1.0]).is_err());
    }

    #[test]
    fn time_to_reach_crosses_pieces() {
        let r = RateFunction::piecewise(vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 4.0]).unwrap();
        assert_eq!(r.time_to_reach(0.0, 0.5), Some(0.5));
        assert_eq!(r.time_to_reach(0.0, 1.0), Some(1.0));
        assert_eq!(r.time_to_reach(0.0, 2.0), Some(3.25));
        let dead = RateFunction::piecewise(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        assert_eq!(dead.time_to_reach(0.0, 2.0), None);
        assert_eq!(dead.remaining_mass(0.25), 0.75);
    }

    fn rate_strategy() -> impl Strategy<Value = RateFunction> {
        prop::collection::vec((0.01f64..3.0, 0.0f64..5.0), 1..6).prop_map(|pieces| {
            let mut starts = vec![0.0];
            let mut rates = Vec::new();
            for (i, (len, rate)) in pieces.iter().enumerate() {
                rates.push(*rate);
                if i + 1 < pieces.len() {
                    let last = *starts.last().unwrap();
                    starts.push(last + len);
                }
            }
            RateFunction::piecewise(starts, rates).unwrap()
        })
    }

    proptest! {
        #[test]
        fn completions_monotone_and_superadditive(
            r in rate_strategy(),
            a in 0.0f64..10.0, d1 in 0.0f64..10.0, d2 in 0.0f64..10.0,
        ) {
            let t1 = a;
            let t2 = a + d1;
            let t3 = t2 + d2;
            let n12 = gradients_completed(&r, t1, t2).unwrap();
            let n23 = gradients_completed(&r, t2, t3).unwrap();
            let n13 = gradients_completed(&r, t1, t3).unwrap();
            prop_assert!(n13 >= n12);
            prop_assert!(n13 >= n12 + n23);
            prop_assert!(n13 <= n12 + n23 + 1);
        }
    }
}
