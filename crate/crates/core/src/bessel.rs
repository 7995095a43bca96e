//! Modified Bessel functions of the first kind, integer order.
//!
//! `I_k(x) = (1/2π) ∫ cos(kθ) e^{x cos θ} dθ = Σ_m (x/2)^{2m+k} / (m! (m+k)!)`.
//!
//! Every term of the power series is positive, so summing it is stable for any
//! argument whose result fits in a double. Arguments past [`SERIES_LIMIT`] fall
//! back to the trapezoid rule on the scaled integrand `e^{x(cos θ - 1)}`.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Largest supported order.
pub const MAX_ORDER: u32 = 64;

/// Above this argument the scaled series would overflow before rescaling.
pub const SERIES_LIMIT: f64 = 700.0;

fn check(order: u32, x: f64) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!(
            "bessel argument must be finite and >= 0, got {x}"
        )));
    }
    if order > MAX_ORDER {
        return Err(Error::Domain(format!(
            "bessel order {order} exceeds cap {MAX_ORDER}"
        )));
    }
    Ok(())
}

fn ln_factorial(k: u32) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// Returns `(ln t_0, Σ t_m / t_0)` for the power series of `I_k(x)`, `x > 0`.
fn series_parts(order: u32, x: f64) -> (f64, f64) {
    let k = order as f64;
    let half = 0.5 * x;
    let quarter_sq = half * half;
    let ln_t0 = k * half.ln() - ln_factorial(order);
    let mut ratio = 1.0;
    let mut sum = 1.0;
    let mut m = 0.0;
    loop {
        ratio *= quarter_sq / ((m + 1.0) * (m + k + 1.0));
        sum += ratio;
        m += 1.0;
        if m > half && ratio <= sum * 1e-17 {
            break;
        }
    }
    (ln_t0, sum)
}

fn scaled_quadrature(order: u32, x: f64) -> f64 {
    // the integrand has width ~ x^{-1/2} around θ = 0
    let nodes = (256.0_f64).max(64.0 * x.sqrt().ceil()) as usize;
    let h = 2.0 * PI / nodes as f64;
    let k = order as f64;
    let s: f64 = (0..nodes)
        .map(|i| {
            let t = i as f64 * h;
            (k * t).cos() * (x * (t.cos() - 1.0)).exp()
        })
        .sum();
    s / nodes as f64
}

/// `I_order(x)`.
pub fn bessel_i(order: u32, x: f64) -> Result<f64> {
    check(order, x)?;
    if x == 0.0 {
        return Ok(if order == 0 { 1.0 } else { 0.0 });
    }
    if x > SERIES_LIMIT {
        let v = scaled_quadrature(order, x) * x.exp();
        return if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain(format!("I_{order}({x}) overflows")))
        };
    }
    let (ln_t0, sum) = series_parts(order, x);
    let v = ln_t0.exp() * sum;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("I_{order}({x}) overflows")))
    }
}

/// `e^{-x} I_order(x)`, finite for every admissible argument.
pub fn bessel_i_scaled(order: u32, x: f64) -> Result<f64> {
    check(order, x)?;
    if x == 0.0 {
        return Ok(if order == 0 { 1.0 } else { 0.0 });
    }
    if x > SERIES_LIMIT {
        return Ok(scaled_quadrature(order, x));
    }
    let (ln_t0, sum) = series_parts(order, x);
    Ok((ln_t0 - x).exp() * sum)
}

/// Ratios `I_k(x) / I_0(x)` for `k = 0..=max_order`.
pub fn bessel_ratios(max_order: u32, x: f64) -> Result<Vec<f64>> {
    let i0 = bessel_i_scaled(0, x)?;
    (0..=max_order)
        .map(|k| bessel_i_scaled(k, x).map(|v| v / i0))
        .collect()
}

/// `Ψ(x) = I_1(x) / I_0(x)`: increasing, concave, `Ψ(0) = 0`, `Ψ'(0) = 1/2`.
pub fn psi_ratio(x: f64) -> Result<f64> {
    let i0 = bessel_i_scaled(0, x)?;
    let i1 = bessel_i_scaled(1, x)?;
    Ok(i1 / i0)
}
