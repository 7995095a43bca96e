//! Uniform grids on the circle with trapezoid quadrature and spectral
//! integration of periodic samples.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

/// `n` equispaced nodes `θ_i = 2πi/n` on the circle.
#[derive(Clone)]
pub struct CircleGrid {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for CircleGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CircleGrid").field("n", &self.n).finish()
    }
}

impl PartialEq for CircleGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
    }
}

impl Default for CircleGrid {
    fn default() -> Self {
        Self::new(Self::DEFAULT_POINTS).expect("default grid is valid")
    }
}

impl CircleGrid {
    pub const DEFAULT_POINTS: usize = 512;

    pub fn new(n: usize) -> Result<Self> {
        if n < 16 || n % 2 != 0 {
            return Err(Error::Config(format!(
                "grid needs an even number of points >= 16, got {n}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        TAU / self.n as f64
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        TAU * i as f64 / self.n as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.node(i))
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes().map(f).collect()
    }

    /// Trapezoid rule, spectrally accurate for smooth periodic integrands.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n);
        values.iter().sum::<f64>() * self.spacing()
    }

    /// `∫ a b` by the trapezoid rule.
    pub fn integrate_product(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * self.spacing()
    }

    /// Discrete Fourier coefficients `a_k = (1/n) Σ_i v_i e^{-ikθ_i}` in FFT order.
    pub fn dft(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    /// Inverse of [`Self::dft`], keeping the real part.
    pub fn idft(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        self.inverse.process(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    /// Signed wavenumber of FFT slot `j`.
    #[inline]
    pub fn wavenumber(&self, j: usize) -> i64 {
        if j <= self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    /// Periodic primitive of `v - mean(v)` anchored to vanish at `θ = 0`.
    pub fn periodic_primitive(&self, values: &[f64]) -> Vec<f64> {
        let mut c = self.dft(values);
        c[0] = Complex64::new(0.0, 0.0);
        c[self.n / 2] = Complex64::new(0.0, 0.0);
        for (j, cj) in c.iter_mut().enumerate().skip(1) {
            let k = self.wavenumber(j);
            if k != 0 {
                *cj /= Complex64::new(0.0, k as f64);
            }
        }
        let mut p = self.idft(&c);
        let p0 = p[0];
        p.iter_mut().for_each(|v| *v -= p0);
        p
    }

    /// Cumulative integral `∫_0^{θ_i} v`, including the linear part from the mean.
    pub fn cumulative(&self, values: &[f64]) -> Vec<f64> {
        let mean = values.iter().sum::<f64>() / self.n as f64;
        let mut p = self.periodic_primitive(values);
        for (i, v) in p.iter_mut().enumerate() {
            *v += mean * self.node(i);
        }
        p
    }

    /// Spectral derivative of periodic samples.
    pub fn derivative(&self, values: &[f64]) -> Vec<f64> {
        let mut c = self.dft(values);
        c[self.n / 2] = Complex64::new(0.0, 0.0);
        for (j, cj) in c.iter_mut().enumerate() {
            *cj *= Complex64::new(0.0, self.wavenumber(j) as f64);
        }
        self.idft(&c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_odd() {
        assert!(CircleGrid::new(8).is_err());
        assert!(CircleGrid::new(17).is_err());
        assert!(CircleGrid::new(16).is_ok());
    }

    #[test]
    fn trapezoid_is_exact_for_trig_polynomials() {
        let g = CircleGrid::new(64).unwrap();
        let v = g.sample(|t| 1.0 + (3.0 * t).cos() * (5.0 * t).sin() + (7.0 * t).cos().powi(2));
        assert!((g.integrate(&v) - (TAU + 0.5 * TAU)).abs() < 1e-13);
    }

    #[test]
    fn primitive_of_cosine() {
        let g = CircleGrid::new(128).unwrap();
        let v = g.sample(|t| (3.0 * t).cos() + 0.5);
        let p = g.cumulative(&v);
        for (i, pv) in p.iter().enumerate() {
            let t = g.node(i);
            assert!((pv - ((3.0 * t).sin() / 3.0 + 0.5 * t)).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_inverts_primitive() {
        let g = CircleGrid::new(256).unwrap();
        let v = g.sample(|t| (1.3 * t.cos()).exp() - 1.0);
        let p = g.periodic_primitive(&v);
        let d = g.derivative(&p);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        for (a, b) in d.iter().zip(&v) {
            assert!((a - (b - mean)).abs() < 1e-12);
        }
    }
}
