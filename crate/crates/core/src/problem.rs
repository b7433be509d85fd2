//! Stochastic first-order oracles.
//!
//! The shipped problem is the tridiagonal quadratic
//! `f(x) = 1/2 x^T A x - b^T x` with `A = (1/4) tridiag(-1, 2, -1)`,
//! `b = (-1/4, 0, ..., 0)` and additive Gaussian gradient noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numeric::derive_seed;

/// Identifies one data sample `xi`: a run-level stream plus a per-arrival id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Sample {
    pub stream: u64,
    pub id: u64,
}

impl Sample {
    pub fn new(stream: u64, id: u64) -> Self {
        Self { stream, id }
    }

    pub fn key(&self) -> u64 {
        derive_seed(&[self.stream, self.id])
    }
}

/// A differentiable objective with a stochastic gradient oracle.
///
/// `stochastic_grad_into` must be a pure function of `(x, sample)`.
pub trait Oracle {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn exact_grad_into(&self, x: &[f64], out: &mut [f64]);

    fn stochastic_grad_into(&self, x: &[f64], sample: Sample, out: &mut [f64]);

    /// Gradients at `x` and `y` with one shared sample. Must agree bit for bit
    /// with two calls to `stochastic_grad_into`.
    fn stochastic_grad_pair_into(
        &self,
        x: &[f64],
        y: &[f64],
        sample: Sample,
        gx: &mut [f64],
        gy: &mut [f64],
    ) {
        self.stochastic_grad_into(x, sample, gx);
        self.stochastic_grad_into(y, sample, gy);
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            })
        }
    }

    fn exact_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut g = vec![0.0; self.dim()];
        self.exact_grad_into(x, &mut g);
        Ok(g)
    }

    fn stochastic_grad(&self, x: &[f64], sample: Sample) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut g = vec![0.0; self.dim()];
        self.stochastic_grad_into(x, sample, &mut g);
        Ok(g)
    }

    /// `||grad f(x)||^2`, the stationarity measure.
    fn grad_sq_norm(&self, x: &[f64]) -> Result<f64> {
        Ok(self.exact_grad(x)?.iter().map(|v| v * v).sum())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticProblem {
    dim: usize,
    sigma_add: f64,
}

impl QuadraticProblem {
    pub fn new(dim: usize, sigma_add: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        if !(sigma_add >= 0.0 && sigma_add.is_finite()) {
            return Err(Error::InvalidHyper(format!(
                "sigma_add must be >= 0, got {sigma_add}"
            )));
        }
        Ok(Self { dim, sigma_add })
    }

    pub fn sigma_add(&self) -> f64 {
        self.sigma_add
    }

    /// Total noise standard deviation `sqrt(d) * sigma_add`.
    pub fn sigma_total(&self) -> f64 {
        (self.dim as f64).sqrt() * self.sigma_add
    }

    /// The benchmark starting point `(sqrt(d), 0, ..., 0)`.
    pub fn benchmark_start(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        x[0] = (self.dim as f64).sqrt();
        x
    }

    /// Largest eigenvalue of `A`, `(1 - cos(d pi / (d + 1))) / 2`. Because the
    /// noise is additive this is both `L` and the mean-squared constant `L_bar`.
    pub fn smoothness(&self) -> f64 {
        let d = self.dim as f64;
        0.5 * (1.0 - (d * std::f64::consts::PI / (d + 1.0)).cos())
    }

    /// Smallest eigenvalue of `A`.
    pub fn strong_convexity(&self) -> f64 {
        let d = self.dim as f64;
        0.5 * (1.0 - (std::f64::consts::PI / (d + 1.0)).cos())
    }

    /// `A x`, computed in O(d).
    pub fn apply_a(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for i in 0..d {
            let left = if i > 0 { x[i - 1] } else { 0.0 };
            let right = if i + 1 < d { x[i + 1] } else { 0.0 };
            out[i] = 0.5 * x[i] - 0.25 * (left + right);
        }
    }

    /// Solves `A x = b` with the Thomas algorithm.
    pub fn minimizer(&self) -> Vec<f64> {
        let d = self.dim;
        let (sub, diag, sup) = (-0.25, 0.5, -0.25);
        let mut c = vec![0.0; d];
        let mut r = vec![0.0; d];
        let mut rhs = vec![0.0; d];
        rhs[0] = -0.25;
        c[0] = sup / diag;
        r[0] = rhs[0] / diag;
        for i in 1..d {
            let m = diag - sub * c[i - 1];
            c[i] = sup / m;
            r[i] = (rhs[i] - sub * r[i - 1]) / m;
        }
        let mut x = vec![0.0; d];
        x[d - 1] = r[d - 1];
        for i in (0..d - 1).rev() {
            x[i] = r[i] - c[i] * x[i + 1];
        }
        x
    }

    /// `f* = -1/2 b^T A^{-1} b`.
    pub fn min_value(&self) -> f64 {
        self.value(&self.minimizer())
    }

    /// Writes the additive noise vector `zeta` for `sample` into `out`.
    pub fn noise_into(&self, sample: Sample, out: &mut [f64]) {
        if self.sigma_add == 0.0 {
            out.fill(0.0);
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(sample.key());
        for v in out.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = self.sigma_add * z;
        }
    }
}

impl Oracle for QuadraticProblem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.dim];
        self.apply_a(x, &mut ax);
        let quad: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
        0.5 * quad + 0.25 * x[0]
    }

    fn exact_grad_into(&self, x: &[f64], out: &mut [f64]) {
        self.apply_a(x, out);
        out[0] += 0.25;
    }

    fn stochastic_grad_into(&self, x: &[f64], sample: Sample, out: &mut [f64]) {
        self.exact_grad_into(x, out);
        if self.sigma_add == 0.0 {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(sample.key());
        for v in out.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += self.sigma_add * z;
        }
    }

    fn stochastic_grad_pair_into(
        &self,
        x: &[f64],
        y: &[f64],
        sample: Sample,
        gx: &mut [f64],
        gy: &mut [f64],
    ) {
        self.exact_grad_into(x, gx);
        self.exact_grad_into(y, gy);
        if self.sigma_add == 0.0 {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(sample.key());
        for (a, b) in gx.iter_mut().zip(gy.iter_mut()) {
            let z: f64 = StandardNormal.sample(&mut rng);
            let noise = self.sigma_add * z;
            *a += noise;
            *b += noise;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn dense_a(d: usize) -> DMatrix<f64> {
        DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                0.5
            } else if i.abs_diff(j) == 1 {
                -0.25
            } else {
                0.0
            }
        })
    }

    #[test]
    fn gradient_vanishes_at_minimizer() {
        let q = QuadraticProblem::new(100, 0.1).unwrap();
        let g = q.exact_grad(&q.minimizer()).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-12));
        assert!(q.grad_sq_norm(&q.minimizer()).unwrap() < 1e-24);
    }

    #[test]
    fn gradient_at_benchmark_start() {
        let q = QuadraticProblem::new(100, 0.1).unwrap();
        let g = q.exact_grad(&q.benchmark_start()).unwrap();
        assert_eq!(g[0], 5.25);
        assert_eq!(g[1], -2.5);
        assert!(g[2..].iter().all(|&v| v == 0.0));
        assert_eq!(q.grad_sq_norm(&q.benchmark_start()).unwrap(), 33.8125);
    }

    #[test]
    fn gradient_at_origin_is_minus_b() {
        let q = QuadraticProblem::new(7, 0.0).unwrap();
        let g = q.exact_grad(&[0.0; 7]).unwrap();
        assert_eq!(g, vec![0.25, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let q = QuadraticProblem::new(3, 0.1).unwrap();
        assert_eq!(
            q.exact_grad(&[1.0, 2.0]),
            Err(Error::DimensionMismatch {
                expected: 3,
                got: 2
            })
        );
        assert!(q.stochastic_grad(&[1.0; 4], Sample::new(0, 0)).is_err());
    }

    #[test]
    fn noiseless_oracle_is_exact() {
        let q = QuadraticProblem::new(10, 0.0).unwrap();
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.3 - 1.0).collect();
        assert_eq!(
            q.stochastic_grad(&x, Sample::new(5, 9)).unwrap(),
            q.exact_grad(&x).unwrap()
        );
    }

    #[test]
    fn same_sample_difference_is_a_times_displacement() {
        let q = QuadraticProblem::new(20, 0.3).unwrap();
        let x: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let y: Vec<f64> = (0..20).map(|i| (i as f64).cos()).collect();
        let s = Sample::new(11, 4);
        let gx = q.stochastic_grad(&x, s).unwrap();
        let gy = q.stochastic_grad(&y, s).unwrap();
        let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let mut adiff = vec![0.0; 20];
        q.apply_a(&diff, &mut adiff);
        for i in 0..20 {
            assert!((gx[i] - gy[i] - adiff[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn pair_evaluation_matches_two_single_calls() {
        let q = QuadraticProblem::new(7, 0.2).unwrap();
        let x: Vec<f64> = (0..7).map(|i| i as f64 - 3.0).collect();
        let y: Vec<f64> = (0..7).map(|i| 0.1 * i as f64).collect();
        let s = Sample::new(3, 8);
        let (mut gx, mut gy) = (vec![0.0; 7], vec![0.0; 7]);
        q.stochastic_grad_pair_into(&x, &y, s, &mut gx, &mut gy);
        assert_eq!(gx, q.stochastic_grad(&x, s).unwrap());
        assert_eq!(gy, q.stochastic_grad(&y, s).unwrap());
    }

    #[test]
    fn noise_variance_matches_d_sigma_squared() {
        let q = QuadraticProblem::new(100, 0.1).unwrap();
        let x = q.benchmark_start();
        let exact = q.exact_grad(&x).unwrap();
        let n = 10_000;
        let mut vals = Vec::with_capacity(n);
        let mut mean_err = vec![0.0; 100];
        for id in 0..n as u64 {
            let g = q.stochastic_grad(&x, Sample::new(1, id)).unwrap();
            let mut s = 0.0;
            for i in 0..100 {
                let e = g[i] - exact[i];
                s += e * e;
                mean_err[i] += e / n as f64;
            }
            vals.push(s);
        }
        let m = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((m - 1.0).abs() <= 4.0 * se, "mean {m} se {se}");
        // unbiasedness, coordinate-wise: each mean error has SE 0.1 / sqrt(n) = 1e-3
        assert!(mean_err.iter().all(|e| e.abs() < 4.0 * 1e-3 + 1e-3));
    }

    #[test]
    fn smoothness_matches_dense_eigensolver() {
        for d in [2usize, 10, 100] {
            let eig = dense_a(d).symmetric_eigen();
            let max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
            let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
            let q = QuadraticProblem::new(d, 0.1).unwrap();
            assert!((q.smoothness() - max).abs() < 1e-12);
            assert!((q.strong_convexity() - min).abs() < 1e-12);
            assert!(max < 1.0 && min > 0.0);
        }
    }

    #[test]
    fn minimizer_matches_dense_solve_and_min_value() {
        let d = 10;
        let q = QuadraticProblem::new(d, 0.0).unwrap();
        let mut b = nalgebra::DVector::zeros(d);
        b[0] = -0.25;
        let xs = dense_a(d).lu().solve(&b).unwrap();
        for (a, e) in q.minimizer().iter().zip(xs.iter()) {
            assert!((a - e).abs() < 1e-12);
        }
        let fstar = -0.5 * b.dot(&xs);
        assert!((q.min_value() - fstar).abs() < 1e-14);
        // f is bounded below by f*: random points never go lower
        for k in 0..100 {
            let x: Vec<f64> = (0..d)
                .map(|i| ((k * 31 + i * 7) as f64).sin() * 3.0)
                .collect();
            assert!(q.value(&x) >= fstar - 1e-12);
        }
    }
}
