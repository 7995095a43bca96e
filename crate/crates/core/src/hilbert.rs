//! Weighted negative Sobolev geometry on the circle.
//!
//! A mean-zero distribution `u` is represented by a primitive `U` sampled on a
//! [`CircleGrid`]. For a weight `w > 0` the inner product is
//! `(u, v)_{-1,w} = ∫ w U V` with both primitives shifted so that `∫ w U = 0`.
//! The weight `1/q_ψ` makes the linearized dynamics at `q_ψ` self-adjoint, and
//! the projection onto the stationary manifold is defined by orthogonality of
//! `μ - q_ψ` to the tangent `q_ψ'` in that geometry.

use crate::error::{Error, Result};
use crate::grid::CircleGrid;
use crate::stationary::{CouplingStrength, StationaryProfile};
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Order parameters with modulus below this have no meaningful phase.
pub const PHASE_FLOOR: f64 = 1e-12;

/// Ratio of the primitive-based unweighted `H_{-1}` norm to the Fourier
/// `H_{-1}` norm of [`fourier_hminus_norm`].
pub const FOURIER_TO_PRIMITIVE: f64 = TAU;

/// Residual required of the projection equation.
pub const PROJECTION_TOL: f64 = 1e-10;

const SCAN_POINTS: usize = 64;

/// A probability measure on the circle.
pub trait Measure {
    /// `μ([0, θ_i])` at every node.
    fn cdf_on_grid(&self, grid: &CircleGrid) -> Vec<f64>;

    /// `∫ e^{ikθ} μ(dθ)` for `k = 0..=kmax`.
    fn fourier_moments(&self, kmax: usize) -> Vec<Complex64>;
}

/// Uniform weights `1/N` on a finite set of atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    atoms: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(atoms: &[f64]) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Domain(
                "empirical measure needs at least one atom".into(),
            ));
        }
        if let Some(a) = atoms.iter().find(|a| !a.is_finite()) {
            return Err(Error::Domain(format!("non-finite atom {a}")));
        }
        Ok(Self {
            atoms: atoms.iter().map(|a| a.rem_euclid(TAU)).collect(),
        })
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Rigid rotation by `c`.
    pub fn rotated(&self, c: f64) -> Self {
        Self {
            atoms: self.atoms.iter().map(|a| (a + c).rem_euclid(TAU)).collect(),
        }
    }
}

impl Measure for EmpiricalMeasure {
    fn cdf_on_grid(&self, grid: &CircleGrid) -> Vec<f64> {
        let mut sorted = self.atoms.clone();
        sorted.sort_by(f64::total_cmp);
        let inv = 1.0 / sorted.len() as f64;
        grid.nodes()
            .map(|t| sorted.partition_point(|a| *a <= t) as f64 * inv)
            .collect()
    }

    fn fourier_moments(&self, kmax: usize) -> Vec<Complex64> {
        let mut acc = vec![Complex64::new(0.0, 0.0); kmax + 1];
        for &a in &self.atoms {
            let z = Complex64::from_polar(1.0, a);
            let mut zk = Complex64::new(1.0, 0.0);
            for slot in acc.iter_mut() {
                *slot += zk;
                zk *= z;
            }
        }
        let inv = 1.0 / self.atoms.len() as f64;
        acc.iter_mut().for_each(|v| *v *= inv);
        acc
    }
}

/// A smooth probability density sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOnGrid {
    grid: CircleGrid,
    values: Vec<f64>,
}

impl DensityOnGrid {
    /// Tolerance on `|∫p - 1|`.
    pub const MASS_TOL: f64 = 1e-8;
    /// Most negative value tolerated from truncation ringing.
    pub const NEGATIVITY_TOL: f64 = -1e-8;

    pub fn new(grid: CircleGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "{} density values for a {}-point grid",
                values.len(),
                grid.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < Self::NEGATIVITY_TOL)
        {
            return Err(Error::Negativity {
                theta: grid.node(i),
                value: *v,
            });
        }
        let mass = grid.integrate(&values);
        if (mass - 1.0).abs() > Self::MASS_TOL {
            return Err(Error::Unnormalized(mass));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: CircleGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.sample(f);
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &CircleGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Measure for DensityOnGrid {
    fn cdf_on_grid(&self, grid: &CircleGrid) -> Vec<f64> {
        if grid.len() == self.grid.len() {
            return self.grid.cumulative(&self.values);
        }
        // evaluate the primitive of the trigonometric interpolant
        let coeffs = self.grid.dft(&self.values);
        let n = self.grid.len();
        let a0 = coeffs[0].re;
        grid.nodes()
            .map(|t| {
                let mut s = a0 * t;
                for (j, cj) in coeffs.iter().enumerate().skip(1) {
                    let k = self.grid.wavenumber(j);
                    if j == n / 2 {
                        continue;
                    }
                    let e = Complex64::from_polar(1.0, k as f64 * t) - 1.0;
                    s += (cj * e / Complex64::new(0.0, k as f64)).re;
                }
                s
            })
            .collect()
    }

    fn fourier_moments(&self, kmax: usize) -> Vec<Complex64> {
        let h = self.grid.spacing();
        (0..=kmax)
            .map(|k| {
                self.values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| Complex64::from_polar(*v, k as f64 * self.grid.node(i)))
                    .sum::<Complex64>()
                    * h
            })
            .collect()
    }
}

impl Measure for StationaryProfile {
    fn cdf_on_grid(&self, grid: &CircleGrid) -> Vec<f64> {
        grid.nodes().map(|t| self.primitive(t)).collect()
    }

    fn fourier_moments(&self, kmax: usize) -> Vec<Complex64> {
        (0..=kmax as i64).map(|k| self.moment(k)).collect()
    }
}

/// Pointwise positive weight sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    values: Vec<f64>,
    total: f64,
}

impl Weight {
    pub fn sample(grid: &CircleGrid, w: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.sample(w);
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
        {
            return Err(Error::NonPositiveWeight {
                theta: grid.node(i),
                value: *v,
            });
        }
        let total = grid.integrate(&values);
        Ok(Self { values, total })
    }

    pub fn unit(grid: &CircleGrid) -> Self {
        Self {
            values: vec![1.0; grid.len()],
            total: TAU,
        }
    }

    /// `w = 1/q_ψ`.
    pub fn inverse_profile(grid: &CircleGrid, q: &StationaryProfile) -> Self {
        Self::sample(grid, |t| 1.0 / q.eval(t)).expect("profiles are positive")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn center(&self, primitive: &[f64]) -> Vec<f64> {
        let n = primitive.len() as f64;
        let wu: f64 = self
            .values
            .iter()
            .zip(primitive)
            .map(|(w, u)| w * u)
            .sum::<f64>()
            * TAU
            / n;
        let shift = wu / self.total;
        primitive.iter().map(|u| u - shift).collect()
    }
}

/// A mean-zero distribution represented by a primitive on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HMinusOneElement {
    grid: CircleGrid,
    primitive: Vec<f64>,
    fourier: Option<Vec<Complex64>>,
}

impl HMinusOneElement {
    /// Zero-mass tolerance for function samples.
    pub const MASS_TOL: f64 = 1e-8;

    pub fn from_primitive(grid: CircleGrid, primitive: Vec<f64>) -> Result<Self> {
        if primitive.len() != grid.len() {
            return Err(Error::Config(
                "primitive length differs from grid size".into(),
            ));
        }
        Ok(Self {
            grid,
            primitive,
            fourier: None,
        })
    }

    /// `a - b` for two probability measures.
    pub fn from_difference(a: &dyn Measure, b: &dyn Measure, grid: &CircleGrid) -> Self {
        let fa = a.cdf_on_grid(grid);
        let fb = b.cdf_on_grid(grid);
        Self {
            grid: grid.clone(),
            primitive: fa.iter().zip(&fb).map(|(x, y)| x - y).collect(),
            fourier: None,
        }
    }

    /// A smooth mean-zero function given by its samples.
    pub fn from_values(grid: &CircleGrid, values: &[f64]) -> Result<Self> {
        let mass = grid.integrate(values);
        if mass.abs() > Self::MASS_TOL {
            return Err(Error::Domain(format!(
                "element must have zero mass, got {mass:e}"
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            primitive: grid.periodic_primitive(values),
            fourier: None,
        })
    }

    pub fn from_fn(grid: &CircleGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_values(grid, &grid.sample(f))
    }

    /// `u(θ) = Σ_m u_m e^{imθ}` with `coeffs[m + M] = u_m`, `|m| ≤ M`.
    pub fn from_fourier(grid: &CircleGrid, coeffs: &[Complex64]) -> Result<Self> {
        let big_m = check_fourier(coeffs)?;
        let primitive = grid
            .nodes()
            .map(|t| {
                (1..=big_m)
                    .map(|m| {
                        let e = Complex64::from_polar(1.0, m as f64 * t);
                        let mi = Complex64::new(0.0, m as f64);
                        (coeffs[big_m + m] * e / mi + coeffs[big_m - m] * e.conj() / (-mi)).re
                    })
                    .sum()
            })
            .collect();
        Ok(Self {
            grid: grid.clone(),
            primitive,
            fourier: Some(coeffs.to_vec()),
        })
    }

    pub fn grid(&self) -> &CircleGrid {
        &self.grid
    }

    /// The stored (uncentered) primitive.
    pub fn primitive(&self) -> &[f64] {
        &self.primitive
    }

    pub fn fourier(&self) -> Option<&[Complex64]> {
        self.fourier.as_deref()
    }

    /// Primitive shifted so that `∫ w U = 0`.
    pub fn centered_primitive(&self, weight: &Weight) -> Vec<f64> {
        weight.center(&self.primitive)
    }

    pub fn inner(&self, other: &Self, weight: &Weight) -> Result<f64> {
        if other.grid != self.grid || weight.values.len() != self.grid.len() {
            return Err(Error::Config("elements live on different grids".into()));
        }
        let u = weight.center(&self.primitive);
        let v = weight.center(&other.primitive);
        let s: f64 = weight
            .values
            .iter()
            .zip(u.iter().zip(&v))
            .map(|(w, (a, b))| w * a * b)
            .sum();
        Ok(s * self.grid.spacing())
    }

    pub fn norm(&self, weight: &Weight) -> Result<f64> {
        Ok(self.inner(self, weight)?.max(0.0).sqrt())
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if other.grid != self.grid {
            return Err(Error::Config("elements live on different grids".into()));
        }
        Ok(Self {
            grid: self.grid.clone(),
            primitive: self
                .primitive
                .iter()
                .zip(&other.primitive)
                .map(|(x, y)| a * x + b * y)
                .collect(),
            fourier: None,
        })
    }
}

fn check_fourier(coeffs: &[Complex64]) -> Result<usize> {
    if coeffs.len() % 2 == 0 {
        return Err(Error::Config(
            "coefficient vector must have odd length 2M+1".into(),
        ));
    }
    let big_m = coeffs.len() / 2;
    if coeffs[big_m].norm() > 0.0 {
        return Err(Error::Domain(format!(
            "u_0 must vanish, got {}",
            coeffs[big_m]
        )));
    }
    let scale = coeffs
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    for m in 1..=big_m {
        if (coeffs[big_m + m] - coeffs[big_m - m].conj()).norm() > 1e-12 * scale {
            return Err(Error::Domain(format!(
                "coefficients are not Hermitian at m = {m}"
            )));
        }
    }
    Ok(big_m)
}

/// `(r_N, Ψ_N)` with `Ψ_N = None` when `r_N < PHASE_FLOOR`.
pub fn order_parameter(phases: &[f64]) -> (f64, Option<f64>) {
    let z = complex_mean(phases);
    let r = z.norm();
    if r < PHASE_FLOOR {
        (r, None)
    } else {
        (r, Some(z.arg().rem_euclid(TAU)))
    }
}

/// `(1/N) Σ e^{iφ_j}`.
pub fn complex_mean(phases: &[f64]) -> Complex64 {
    let (mut x, mut y) = (0.0, 0.0);
    for p in phases {
        let (s, c) = p.sin_cos();
        x += c;
        y += s;
    }
    let inv = 1.0 / phases.len().max(1) as f64;
    Complex64::new(x * inv, y * inv)
}

/// `‖a - b‖_{-1,w}`.
pub fn h1w_norm_of_difference(
    a: &dyn Measure,
    b: &dyn Measure,
    weight: impl Fn(f64) -> f64,
    grid: &CircleGrid,
) -> Result<f64> {
    let w = Weight::sample(grid, weight)?;
    HMinusOneElement::from_difference(a, b, grid).norm(&w)
}

/// `((1/2π) Σ_{m≠0} |u_m|² / m^{2s})^{1/2}` with `coeffs[m + M] = u_m`.
pub fn fourier_hminus_norm(coeffs: &[Complex64], s: u32) -> Result<f64> {
    if !(1..=2).contains(&s) {
        return Err(Error::Domain(format!(
            "Sobolev order must be 1 or 2, got {s}"
        )));
    }
    let big_m = check_fourier(coeffs)?;
    let sum: f64 = (1..=big_m)
        .map(|m| {
            let d = (m as f64).powi(2 * s as i32);
            (coeffs[big_m + m].norm_sqr() + coeffs[big_m - m].norm_sqr()) / d
        })
        .sum();
    Ok((sum / TAU).sqrt())
}

/// The stationary manifold `{q_ψ}` for a fixed coupling, with projection and
/// distance computations.
#[derive(Debug, Clone)]
pub struct Manifold {
    base: StationaryProfile,
    grid: CircleGrid,
}

impl Manifold {
    pub fn new(coupling: CouplingStrength, grid: CircleGrid) -> Result<Self> {
        if !coupling.is_supercritical() {
            return Err(Error::Domain(format!(
                "stationary manifold needs K > 1, got {}",
                coupling.value()
            )));
        }
        Ok(Self {
            base: StationaryProfile::new(coupling, 0.0)?,
            grid,
        })
    }

    pub fn profile(&self, psi: f64) -> StationaryProfile {
        self.base.centered_at(psi)
    }

    pub fn grid(&self) -> &CircleGrid {
        &self.grid
    }

    fn kmax(&self) -> usize {
        self.base.bessel_ratios().len() - 1
    }

    /// Moments needed by the tangent functional.
    pub fn moments(&self, mu: &dyn Measure) -> Vec<Complex64> {
        mu.fourier_moments(self.kmax())
    }

    /// `F(ψ) = (μ - q_ψ, q_ψ')_{-1,1/q_ψ} = -∫ 𝒦_ψ dμ` from precomputed moments.
    pub fn tangent_from_moments(&self, moments: &[Complex64], psi: f64) -> f64 {
        let mut s = 0.0;
        for (k, a) in self.base.bessel_ratios().iter().enumerate().skip(1) {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let rot = Complex64::from_polar(1.0, -(k as f64) * psi) * moments[k];
            s += sign * a * rot.im / k as f64;
        }
        2.0 * s
    }

    /// `dF/dψ` from precomputed moments.
    pub fn tangent_slope_from_moments(&self, moments: &[Complex64], psi: f64) -> f64 {
        let mut s = 0.0;
        for (k, a) in self.base.bessel_ratios().iter().enumerate().skip(1) {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let rot = Complex64::from_polar(1.0, -(k as f64) * psi) * moments[k];
            s += sign * a * rot.re;
        }
        -2.0 * s
    }

    pub fn tangent_functional(&self, mu: &dyn Measure, psi: f64) -> f64 {
        self.tangent_from_moments(&self.moments(mu), psi)
    }

    /// The root `ψ*` of `F` with `F' > 0` closest to `guess`.
    pub fn project(&self, mu: &dyn Measure, guess: f64) -> Result<f64> {
        let m = self.moments(mu);
        self.project_moments(&m, guess)
    }

    pub fn project_moments(&self, moments: &[Complex64], guess: f64) -> Result<f64> {
        let f = |psi: f64| self.tangent_from_moments(moments, psi);
        let h = TAU / SCAN_POINTS as f64;
        let mut vals: Vec<f64> = (0..SCAN_POINTS).map(|i| f(i as f64 * h)).collect();
        vals.push(vals[0]);
        let mut best: Option<(f64, f64, f64)> = None;
        for i in 0..SCAN_POINTS {
            let (a, b) = (vals[i], vals[i + 1]);
            if (a < 0.0 && b >= 0.0) || (a <= 0.0 && b > 0.0) {
                let mid = (i as f64 + 0.5) * h;
                let d = circular_distance(mid, guess);
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, i as f64 * h, (i + 1) as f64 * h));
                }
            }
        }
        let Some((_, lo, hi)) = best else {
            let residual = vals.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
            return Err(Error::NoConvergence {
                iterations: 0,
                residual,
            });
        };
        let root = safeguarded_secant(f, lo, hi, PROJECTION_TOL)?;
        Ok(root.rem_euclid(TAU))
    }

    /// `min_ψ ‖μ - q_ψ‖_{-1}` and its minimizer.
    pub fn distance(&self, mu: &dyn Measure) -> (f64, f64) {
        let cdf = mu.cdf_on_grid(&self.grid);
        let unit = Weight::unit(&self.grid);
        let dist_sq = |psi: f64| -> f64 {
            let qs = self.grid.sample(|t| self.base.eval(t - psi));
            let fq = self.grid.cumulative(&qs);
            let u: Vec<f64> = cdf.iter().zip(&fq).map(|(a, b)| a - b).collect();
            let uc = unit.center(&u);
            self.grid.integrate_product(&uc, &uc)
        };
        let h = TAU / SCAN_POINTS as f64;
        let (mut best_i, mut best_v) = (0, f64::INFINITY);
        for i in 0..SCAN_POINTS {
            let v = dist_sq(i as f64 * h);
            if v < best_v {
                best_i = i;
                best_v = v;
            }
        }
        let centre = best_i as f64 * h;
        let (psi, v) = golden_section(dist_sq, centre - h, centre + h, 1e-13);
        (v.max(0.0).sqrt(), psi.rem_euclid(TAU))
    }

    /// First and second order expansions of the projection of `q_ψ + h`.
    ///
    /// With `a = (h, q')`, `n = (q', q')` and `b = (h, (log q)'')` in
    /// `H_{-1,1/q}`, they read `ψ - a/n` and `ψ - (a/n)(1 + c b / n)`.
    pub fn projection_expansion(&self, psi: f64, h: &HMinusOneElement) -> Result<(f64, f64)> {
        let grid = h.grid();
        let q = self.profile(psi);
        let w = Weight::inverse_profile(grid, &q);
        let qp = HMinusOneElement::from_primitive(grid.clone(), grid.sample(|t| q.eval(t)))?;
        let lq2 = HMinusOneElement::from_primitive(grid.clone(), grid.sample(|t| q.log_deriv(t)))?;
        let a = h.inner(&qp, &w)?;
        let n = qp.inner(&qp, &w)?;
        let b = h.inner(&lq2, &w)?;
        let first = psi - a / n;
        let second = psi - (a / n) * (1.0 + q.c() * b / n);
        Ok((first, second))
    }
}

/// `project_to_manifold` for a one-off call.
pub fn project_to_manifold(
    mu: &dyn Measure,
    coupling: CouplingStrength,
    guess: f64,
) -> Result<f64> {
    Manifold::new(coupling, CircleGrid::default())?.project(mu, guess)
}

/// `dist_to_manifold` on the default grid.
pub fn dist_to_manifold(mu: &dyn Measure, coupling: CouplingStrength) -> Result<f64> {
    Ok(Manifold::new(coupling, CircleGrid::default())?
        .distance(mu)
        .0)
}

/// `(q_ψ', μ - q_ψ)_{-1,1/q_ψ}`.
pub fn tangent_functional(mu: &dyn Measure, psi: f64, coupling: CouplingStrength) -> Result<f64> {
    Ok(Manifold::new(coupling, CircleGrid::default())?.tangent_functional(mu, psi))
}

pub(crate) fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Root of `f` on `[lo, hi]` with `f(lo) < 0 <= f(hi)`.
fn safeguarded_secant(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let mut fhi = f(hi);
    let (mut best, mut fbest) = if flo.abs() < fhi.abs() {
        (lo, flo)
    } else {
        (hi, fhi)
    };
    let mut iterations = 0;
    while fbest.abs() > 1e-2 * tol
        && hi - lo > 4.0 * f64::EPSILON * hi.abs().max(1.0)
        && iterations < 200
    {
        iterations += 1;
        let mut x = hi - fhi * (hi - lo) / (fhi - flo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx.abs() < fbest.abs() {
            best = x;
            fbest = fx;
        }
        if fx < 0.0 {
            // Illinois modification keeps the bracket shrinking from both sides
            lo = x;
            flo = fx;
            fhi *= 0.5;
        } else {
            hi = x;
            fhi = fx;
            flo *= 0.5;
        }
    }
    if fbest.abs() < tol {
        Ok(best)
    } else {
        Err(Error::NoConvergence {
            iterations,
            residual: fbest.abs(),
        })
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
