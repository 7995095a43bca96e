//! Stationary manifold of the mean-field dynamics.
//!
//! For `K > 1` the synchronized profiles are
//! `q_ψ(θ) = exp(2Kr cos(θ - ψ)) / (2π I_0(2Kr))` where `r > 0` solves
//! `r = Ψ(2Kr)`. For `K <= 1` only the flat profile `1/2π` survives.

use crate::bessel::{bessel_i_scaled, bessel_ratios, psi_ratio, MAX_ORDER};
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Default tolerance for scalar roots.
pub const ROOT_TOL: f64 = 1e-12;

/// Default tolerance for quadrature identities.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// Interaction strength `K` of the coupling `J(θ) = -K sin θ`.
///
/// Zero is admitted so that the uncoupled Brownian system can be simulated;
/// the stationary manifold is non-trivial only when `K > 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct CouplingStrength(f64);

impl CouplingStrength {
    pub fn new(k: f64) -> Result<Self> {
        if !k.is_finite() || k < 0.0 {
            return Err(Error::Domain(format!(
                "coupling strength must be finite and >= 0, got {k}"
            )));
        }
        Ok(Self(k))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_supercritical(self) -> bool {
        self.0 > 1.0
    }
}

/// Synchronization degree `r(K)`: zero for `K <= 1`, otherwise the unique
/// positive root of `Ψ(2Kr) - r`, located by bisection.
pub fn solve_sync_degree(coupling: CouplingStrength, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let k = coupling.value();
    if k <= 1.0 {
        return Ok(0.0);
    }
    let g = |r: f64| psi_ratio(2.0 * k * r).map(|p| p - r);

    let mut hi = 1.0;
    if g(hi)? >= 0.0 {
        return Err(Error::Bracket(format!("g(1) >= 0 for K = {k}")));
    }
    // g > 0 on (0, r*); shrink towards zero until the sign is established
    let mut lo = 0.5;
    let mut tries = 0;
    while g(lo)? <= 0.0 {
        hi = lo;
        lo *= 0.5;
        tries += 1;
        if tries > 80 {
            return Err(Error::Bracket(format!(
                "no positive value of Ψ(2Kr) - r found for K = {k}"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid)?;
        if gm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * mid {
            break;
        }
    }
    let r = 0.5 * (lo + hi);
    let residual = g(r)?.abs();
    if residual >= tol {
        return Err(Error::NoConvergence {
            iterations: 200,
            residual,
        });
    }
    Ok(r)
}

/// `r(K)` at the default tolerance.
pub fn sync_degree(coupling: CouplingStrength) -> Result<f64> {
    solve_sync_degree(coupling, ROOT_TOL)
}

fn supercritical_i0(coupling: CouplingStrength) -> Result<(f64, f64)> {
    if !coupling.is_supercritical() {
        return Err(Error::Domain(format!(
            "K = {} is not supercritical (K > 1 required)",
            coupling.value()
        )));
    }
    let r = sync_degree(coupling)?;
    let x = 2.0 * coupling.value() * r;
    Ok((r, bessel_i_scaled(0, x)? * x.exp()))
}

/// `D_K = 1 / sqrt(1 - I_0(2Kr)^{-2})`.
pub fn diffusion_coefficient(coupling: CouplingStrength) -> Result<f64> {
    let (_, i0) = supercritical_i0(coupling)?;
    Ok(1.0 / (1.0 - 1.0 / (i0 * i0)).sqrt())
}

/// `c = 2π / ∫ 1/q = 1 / (2π I_0(2Kr)^2)`.
pub fn c_constant(coupling: CouplingStrength) -> Result<f64> {
    let (_, i0) = supercritical_i0(coupling)?;
    Ok(1.0 / (TAU * i0 * i0))
}

/// A point `q_ψ` of the stationary manifold (or the flat profile when `r = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryProfile {
    coupling: CouplingStrength,
    r: f64,
    psi: f64,
    x: f64,
    i0_scaled: f64,
    ratios: Vec<f64>,
}

impl StationaryProfile {
    /// Profile centered at `psi` with `r = r(K)`.
    pub fn new(coupling: CouplingStrength, psi: f64) -> Result<Self> {
        let r = sync_degree(coupling)?;
        Self::with_degree(coupling, r, psi)
    }

    /// Profile with an explicitly given synchronization degree.
    pub fn with_degree(coupling: CouplingStrength, r: f64, psi: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&r) {
            return Err(Error::Domain(format!(
                "synchronization degree must lie in [0, 1), got {r}"
            )));
        }
        let x = 2.0 * coupling.value() * r;
        let i0_scaled = bessel_i_scaled(0, x)?;
        let mut ratios = bessel_ratios(MAX_ORDER, x)?;
        let keep = ratios.iter().rposition(|v| *v > 1e-18).unwrap_or(0) + 1;
        ratios.truncate(keep);
        Ok(Self {
            coupling,
            r,
            psi: psi.rem_euclid(TAU),
            x,
            i0_scaled,
            ratios,
        })
    }

    /// Same profile rotated to a new center.
    pub fn centered_at(&self, psi: f64) -> Self {
        Self {
            psi: psi.rem_euclid(TAU),
            ..self.clone()
        }
    }

    pub fn coupling(&self) -> CouplingStrength {
        self.coupling
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    /// `2Kr`.
    pub fn concentration(&self) -> f64 {
        self.x
    }

    /// `I_0(2Kr)`.
    pub fn i0(&self) -> f64 {
        self.i0_scaled * self.x.exp()
    }

    /// `I_k(2Kr) / I_0(2Kr)` for the retained orders.
    pub fn bessel_ratios(&self) -> &[f64] {
        &self.ratios
    }

    /// `q_ψ(θ)`.
    #[inline]
    pub fn eval(&self, theta: f64) -> f64 {
        (self.x * ((theta - self.psi).cos() - 1.0)).exp() / (TAU * self.i0_scaled)
    }

    /// `q_ψ'(θ) = -2Kr sin(θ - ψ) q_ψ(θ)`.
    #[inline]
    pub fn deriv(&self, theta: f64) -> f64 {
        -self.x * (theta - self.psi).sin() * self.eval(theta)
    }

    /// `q_ψ''(θ)`.
    pub fn second_deriv(&self, theta: f64) -> f64 {
        let s = (theta - self.psi).sin();
        let c = (theta - self.psi).cos();
        self.x * (self.x * s * s - c) * self.eval(theta)
    }

    /// `(log q_ψ)'(θ) = -2Kr sin(θ - ψ)`.
    pub fn log_deriv(&self, theta: f64) -> f64 {
        -self.x * (theta - self.psi).sin()
    }

    /// `(log q_ψ)''(θ) = -2Kr cos(θ - ψ)`.
    pub fn log_second_deriv(&self, theta: f64) -> f64 {
        -self.x * (theta - self.psi).cos()
    }

    /// `∫ e^{ikθ} q_ψ(dθ) = (I_k / I_0) e^{ikψ}`.
    pub fn moment(&self, k: i64) -> Complex64 {
        let idx = k.unsigned_abs() as usize;
        let mag = self.ratios.get(idx).copied().unwrap_or(0.0);
        Complex64::from_polar(mag, k as f64 * self.psi)
    }

    /// Primitive `∫_0^θ q_ψ`.
    pub fn primitive(&self, theta: f64) -> f64 {
        let mut s = 0.0;
        for (k, a) in self.ratios.iter().enumerate().skip(1) {
            let kf = k as f64;
            s += a * ((kf * (theta - self.psi)).sin() + (kf * self.psi).sin()) / kf;
        }
        theta / TAU + s / PI
    }

    /// `∫ 1/q_ψ = (2π I_0(2Kr))^2`.
    pub fn inverse_integral(&self) -> f64 {
        let v = TAU * self.i0();
        v * v
    }

    /// `c = 1 / (2π I_0^2)`, the constant making `1 - c/q` mean-zero.
    pub fn c(&self) -> f64 {
        let i0 = self.i0();
        1.0 / (TAU * i0 * i0)
    }

    /// Closed form of `‖q'‖²` in `H_{-1,1/q}`: `1 - I_0^{-2}`.
    pub fn tangent_norm_sq(&self) -> f64 {
        let i0 = self.i0();
        1.0 - 1.0 / (i0 * i0)
    }

    /// The periodic primitive `𝒦_ψ` of `1 - c/q_ψ` that is odd about `ψ`.
    pub fn tangent_kernel(&self, theta: f64) -> f64 {
        let mut s = 0.0;
        for (k, a) in self.ratios.iter().enumerate().skip(1) {
            let kf = k as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * a * (kf * (theta - self.psi)).sin() / kf;
        }
        -2.0 * s
    }

    /// Derivative of [`Self::tangent_kernel`] with respect to `θ`, i.e. `1 - c/q_ψ(θ)`.
    pub fn tangent_kernel_deriv(&self, theta: f64) -> f64 {
        1.0 - self.c() / self.eval(theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(v: f64) -> CouplingStrength {
        CouplingStrength::new(v).unwrap()
    }

    fn trapezoid(n: usize, f: impl Fn(f64) -> f64) -> f64 {
        let h = TAU / n as f64;
        (0..n).map(|i| f(i as f64 * h)).sum::<f64>() * h
    }

    // Independent Bessel oracle by quadrature of the defining integral.
    fn quad_bessel(order: u32, x: f64) -> f64 {
        trapezoid(256, |t| ((order as f64) * t).cos() * (x * t.cos()).exp()) / TAU
    }

    #[test]
    fn subcritical_and_critical_give_zero() {
        assert_eq!(sync_degree(k(0.5)).unwrap(), 0.0);
        assert_eq!(sync_degree(k(1.0)).unwrap(), 0.0);
        assert!(diffusion_coefficient(k(1.0)).is_err());
        assert!(c_constant(k(0.7)).is_err());
    }

    #[test]
    fn k2_matches_bisection_oracle() {
        // oracle: bisection with the quadrature Bessel functions
        let g = |r: f64| quad_bessel(1, 4.0 * r) / quad_bessel(0, 4.0 * r) - r;
        let (mut lo, mut hi) = (1e-3, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let oracle = 0.5 * (lo + hi);
        assert!((oracle - 0.831_462_024_754_256_8).abs() < 1e-12);
        let r = sync_degree(k(2.0)).unwrap();
        assert!((r - oracle).abs() < 1e-12);
        assert!(0.0 < r && r < 1.0);

        let i0 = quad_bessel(0, 4.0 * oracle);
        let d_oracle = 1.0 / (1.0 - 1.0 / (i0 * i0)).sqrt();
        assert!((d_oracle - 1.012_522_264_568_64).abs() < 1e-10);
        assert!((diffusion_coefficient(k(2.0)).unwrap() - d_oracle).abs() < 1e-10);

        let c_oracle =
            TAU / trapezoid(512, |t| 1.0 / ((4.0 * oracle * t.cos()).exp() / (TAU * i0)));
        assert!((c_oracle - 0.003_912_321_506_472_157).abs() < 1e-12);
        assert!((c_constant(k(2.0)).unwrap() - c_oracle).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_residual_small() {
        for &kv in &[1.2, 1.5, 2.0, 5.0, 10.0] {
            let r = sync_degree(k(kv)).unwrap();
            let res = (psi_ratio(2.0 * kv * r).unwrap() - r).abs();
            assert!(res < 1e-10, "K={kv} residual {res}");
        }
    }

    #[test]
    fn sync_degree_increasing_in_k() {
        let mut last = 0.0;
        for i in 1..=20 {
            let kv = 1.0 + 0.25 * i as f64;
            let r = sync_degree(k(kv)).unwrap();
            assert!(r > last, "K={kv}");
            last = r;
        }
    }

    #[test]
    fn near_critical_still_solves() {
        let r = sync_degree(k(1.0001)).unwrap();
        assert!(r > 0.0 && r < 0.05);
        let res = (psi_ratio(2.0 * 1.0001 * r).unwrap() - r).abs();
        assert!(res < 1e-12);
    }

    #[test]
    fn diffusion_coefficient_diverges_near_critical() {
        let a = diffusion_coefficient(k(1.01)).unwrap();
        let b = diffusion_coefficient(k(1.1)).unwrap();
        let c = diffusion_coefficient(k(2.0)).unwrap();
        assert!(a > b && b > c && c > 1.0);
    }

    #[test]
    fn c_matches_inverse_quadrature() {
        for &kv in &[1.5, 2.0, 5.0] {
            let p = StationaryProfile::new(k(kv), 0.3).unwrap();
            let inv = trapezoid(1024, |t| 1.0 / p.eval(t));
            let c_quad = TAU / inv;
            assert!((p.c() - c_quad).abs() < 1e-10);
            assert!((c_constant(k(kv)).unwrap() - c_quad).abs() < 1e-10);
        }
        // r = 0 limit
        let flat = StationaryProfile::with_degree(k(0.5), 0.0, 0.0).unwrap();
        assert!((flat.c() - 1.0 / TAU).abs() < 1e-15);
    }

    #[test]
    fn profile_basic_shape() {
        let p = StationaryProfile::new(k(2.0), 1.0).unwrap();
        assert!((trapezoid(512, |t| p.eval(t)) - 1.0).abs() < 1e-10);
        assert!(trapezoid(512, |t| p.deriv(t)).abs() < 1e-12);
        assert_eq!(p.deriv(1.0), 0.0);
        let peak = p.eval(1.0);
        let trough = p.eval(1.0 + PI);
        for i in 0..200 {
            let t = i as f64 * TAU / 200.0;
            let v = p.eval(t);
            assert!(v > 0.0 && v <= peak && v >= trough - 1e-15);
        }
        let flat = StationaryProfile::with_degree(k(0.5), 0.0, 0.0).unwrap();
        assert!((flat.eval(2.0) - 1.0 / TAU).abs() < 1e-16);
        assert_eq!(flat.deriv(2.0), 0.0);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let p = StationaryProfile::new(k(3.0), 0.4).unwrap();
        let h = 1e-5;
        for i in 0..20 {
            let t = 0.3 * i as f64;
            let fd = (p.eval(t + h) - p.eval(t - h)) / (2.0 * h);
            assert!((fd - p.deriv(t)).abs() < 1e-8);
            let fd2 = (p.deriv(t + h) - p.deriv(t - h)) / (2.0 * h);
            assert!((fd2 - p.second_deriv(t)).abs() < 1e-7);
        }
    }

    #[test]
    fn rotation_equivariance() {
        let p = StationaryProfile::new(k(2.0), 0.7).unwrap();
        for &c in &[0.1, 1.3, 4.0] {
            let pc = p.centered_at(0.7 + c);
            for i in 0..50 {
                let t = 0.11 * i as f64;
                assert!((pc.eval(t + c) - p.eval(t)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn primitive_and_kernel_are_consistent() {
        let p = StationaryProfile::new(k(2.0), 2.2).unwrap();
        let h = 1e-5;
        assert_eq!(p.primitive(0.0), 0.0);
        assert!((p.primitive(TAU) - 1.0).abs() < 1e-13);
        for i in 0..30 {
            let t = 0.2 * i as f64;
            let fd = (p.primitive(t + h) - p.primitive(t - h)) / (2.0 * h);
            assert!((fd - p.eval(t)).abs() < 1e-8);
            let fk = (p.tangent_kernel(t + h) - p.tangent_kernel(t - h)) / (2.0 * h);
            assert!((fk - p.tangent_kernel_deriv(t)).abs() < 1e-8);
        }
        // K is periodic and odd about ψ
        assert!(p.tangent_kernel(2.2).abs() < 1e-15);
        assert!((p.tangent_kernel(2.2 + 0.4) + p.tangent_kernel(2.2 - 0.4)).abs() < 1e-14);
    }

    #[test]
    fn moments_match_quadrature() {
        let p = StationaryProfile::new(k(2.0), 0.9).unwrap();
        for kk in -5i64..=5 {
            let re = trapezoid(512, |t| (kk as f64 * t).cos() * p.eval(t));
            let im = trapezoid(512, |t| (kk as f64 * t).sin() * p.eval(t));
            let m = p.moment(kk);
            assert!((m.re - re).abs() < 1e-13 && (m.im - im).abs() < 1e-13);
        }
        // first moment is r e^{iψ}
        assert!((p.moment(1).norm() - p.r()).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_coupling() {
        assert!(CouplingStrength::new(-1.0).is_err());
        assert!(CouplingStrength::new(f64::INFINITY).is_err());
    }
}
