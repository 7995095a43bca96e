//! Fourier-Galerkin solver for the mean-field Fokker-Planck equation
//!
//! `∂_t p = ½ p'' - ((J∗p) p)'` with `J = -K sin`.
//!
//! With `p = Σ c_k e^{ikθ}` the convolution is the two-mode field
//! `J∗p = iπK (c_1 e^{iθ} - c_{-1} e^{-iθ})`, so mode `k` obeys
//!
//! `dc_k/dt = -(k²/2) c_k + πK k (c_1 c_{k-1} - c_{-1} c_{k+1})`.
//!
//! The mean `c_0 = 1/2π` never moves, and `c_1 = 0` is preserved exactly.
//! Time stepping is exponential Euler (ETD1): the diffusion is integrated
//! exactly and the coupling enters through `(e^{-k²h/2} - 1)/(-k²/2)`, which
//! keeps every stationary point of the Galerkin system fixed for any step.

use crate::error::{Error, Result};
use crate::grid::CircleGrid;
use crate::hilbert::{HMinusOneElement, Manifold, Measure, Weight};
use crate::output::write_columns;
use crate::stationary::{CouplingStrength, StationaryProfile};
use num_complex::Complex64;
use std::f64::consts::{PI, TAU};
use std::io::Write;

/// Default truncation.
pub const DEFAULT_MODES: usize = 64;

/// Default time step.
pub const DEFAULT_DT: f64 = 1e-3;

/// Any coefficient larger than this aborts the integration.
pub const BLOW_UP: f64 = 10.0;

/// Most negative reconstructed density tolerated from truncation ringing.
pub const NEGATIVITY_TOL: f64 = -1e-8;

const C0: f64 = 1.0 / TAU;

/// Coefficients `c_k = (1/2π) ∫ p e^{-ikθ}` for `0 <= k <= M`; negative modes
/// follow from `c_{-k} = conj(c_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierDensity {
    coeffs: Vec<Complex64>,
}

impl FourierDensity {
    pub fn uniform(modes: usize) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); modes + 1];
        coeffs[0] = Complex64::new(C0, 0.0);
        Self { coeffs }
    }

    /// From `c_1..c_M`; `c_0` is set to `1/2π`.
    pub fn from_modes(modes: &[Complex64]) -> Self {
        let mut coeffs = Vec::with_capacity(modes.len() + 1);
        coeffs.push(Complex64::new(C0, 0.0));
        coeffs.extend_from_slice(modes);
        Self { coeffs }
    }

    /// Projection of a probability density sampled on a grid with more than
    /// `2M` nodes.
    pub fn from_density(grid: &CircleGrid, values: &[f64], modes: usize) -> Result<Self> {
        if grid.len() <= 2 * modes {
            return Err(Error::Config(format!(
                "{} grid points cannot resolve {modes} modes",
                grid.len()
            )));
        }
        let a = grid.dft(values);
        if (a[0].re - C0).abs() > 1e-8 / TAU {
            return Err(Error::Unnormalized(a[0].re * TAU));
        }
        Ok(Self::from_modes(&a[1..=modes]))
    }

    pub fn from_fn(modes: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let grid = CircleGrid::new((4 * modes + 4).next_power_of_two().max(256))?;
        let values = grid.sample(f);
        Self::from_density(&grid, &values, modes)
    }

    /// `c_k = (I_k/I_0) e^{-ikψ} / 2π`.
    pub fn from_profile(q: &StationaryProfile, modes: usize) -> Self {
        let m: Vec<Complex64> = (1..=modes as i64)
            .map(|k| q.moment(k).conj() / TAU)
            .collect();
        Self::from_modes(&m)
    }

    pub fn modes(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `c_k` for `|k| <= M`, zero beyond.
    pub fn coeff(&self, k: i64) -> Complex64 {
        match self.coeffs.get(k.unsigned_abs() as usize) {
            Some(c) if k >= 0 => *c,
            Some(c) => c.conj(),
            None => Complex64::new(0.0, 0.0),
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Density of the rotated measure `p(· - c)`.
    pub fn rotated(&self, c: f64) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, v)| v * Complex64::from_polar(1.0, -(k as f64) * c))
                .collect(),
        }
    }

    /// `p(θ_i)` on a grid with more than `2M` nodes.
    pub fn density_on_grid(&self, grid: &CircleGrid) -> Result<Vec<f64>> {
        let n = grid.len();
        if n <= 2 * self.modes() {
            return Err(Error::Config(format!(
                "{n} grid points cannot resolve {} modes",
                self.modes()
            )));
        }
        let mut a = vec![Complex64::new(0.0, 0.0); n];
        a[0] = self.coeffs[0];
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            a[k] = *c;
            a[n - k] = c.conj();
        }
        Ok(grid.idft(&a))
    }

    /// Smallest value on the grid.
    pub fn min_on_grid(&self, grid: &CircleGrid) -> Result<f64> {
        Ok(self
            .density_on_grid(grid)?
            .into_iter()
            .fold(f64::INFINITY, f64::min))
    }

    /// Largest `|c_k|`, `k >= 1`, and its index.
    fn largest_mode(&self) -> (usize, f64) {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| (k, c.norm()))
            .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a })
    }
}

impl Measure for FourierDensity {
    fn cdf_on_grid(&self, grid: &CircleGrid) -> Vec<f64> {
        grid.nodes()
            .map(|t| {
                let mut s = t * C0;
                for (k, c) in self.coeffs.iter().enumerate().skip(1) {
                    let kf = k as f64;
                    let e = Complex64::from_polar(1.0, kf * t) - 1.0;
                    s += 2.0 * (c * e / Complex64::new(0.0, kf)).re;
                }
                s
            })
            .collect()
    }

    fn fourier_moments(&self, kmax: usize) -> Vec<Complex64> {
        (0..=kmax as i64).map(|k| TAU * self.coeff(-k)).collect()
    }
}

/// Time derivative of `c_0..c_M`.
pub fn rhs(c: &FourierDensity, coupling: CouplingStrength) -> Vec<Complex64> {
    let k_coupling = coupling.value();
    let c1 = c.coeff(1);
    let cm1 = c1.conj();
    (0..=c.modes())
        .map(|k| {
            let kf = k as f64;
            let kk = k as i64;
            -0.5 * kf * kf * c.coeff(kk)
                + PI * k_coupling * kf * (c1 * c.coeff(kk - 1) - cm1 * c.coeff(kk + 1))
        })
        .collect()
}

/// Exponential Euler integrator with a fixed step.
#[derive(Debug, Clone)]
pub struct PdeSolver {
    coupling: CouplingStrength,
    dt: f64,
    state: FourierDensity,
    steps: u64,
    decay: Vec<f64>,
    gain: Vec<f64>,
}

impl PdeSolver {
    pub fn new(initial: FourierDensity, coupling: CouplingStrength, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        let m = initial.modes();
        let decay: Vec<f64> = (0..=m)
            .map(|k| (-0.5 * (k * k) as f64 * dt).exp())
            .collect();
        let gain = (0..=m)
            .map(|k| {
                let l = -0.5 * (k * k) as f64;
                if k == 0 {
                    dt
                } else {
                    (l * dt).exp_m1() / l
                }
            })
            .collect();
        Ok(Self {
            coupling,
            dt,
            state: initial,
            steps: 0,
            decay,
            gain,
        })
    }

    pub fn state(&self) -> &FourierDensity {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&mut self) -> Result<()> {
        let k_coupling = self.coupling.value();
        let c = &self.state;
        let c1 = c.coeff(1);
        let cm1 = c1.conj();
        let next: Vec<Complex64> = (0..=c.modes())
            .map(|k| {
                if k == 0 {
                    return c.coeffs[0];
                }
                let kf = k as f64;
                let kk = k as i64;
                let nl = PI * k_coupling * kf * (c1 * c.coeff(kk - 1) - cm1 * c.coeff(kk + 1));
                self.decay[k] * c.coeffs[k] + self.gain[k] * nl
            })
            .collect();
        self.state.coeffs = next;
        self.steps += 1;
        let (mode, magnitude) = self.state.largest_mode();
        if magnitude > BLOW_UP || !magnitude.is_finite() {
            return Err(Error::BlowUp {
                mode,
                magnitude,
                time: self.time(),
            });
        }
        Ok(())
    }

    /// Steps until the clock reaches `t` (to the nearest step).
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        let target = (t / self.dt).round() as u64;
        while self.steps < target {
            self.step()?;
        }
        Ok(())
    }
}

/// Integrates `initial` to `t_end`.
pub fn evolve(
    initial: FourierDensity,
    coupling: CouplingStrength,
    t_end: f64,
    dt: f64,
) -> Result<FourierDensity> {
    let mut s = PdeSolver::new(initial, coupling, dt)?;
    s.advance_to(t_end)?;
    Ok(s.state)
}

/// `½ ∫ p log p - (K/2) |∫ e^{iθ} p|²` by quadrature on `grid`.
pub fn free_energy(
    c: &FourierDensity,
    coupling: CouplingStrength,
    grid: &CircleGrid,
) -> Result<f64> {
    let p = c.density_on_grid(grid)?;
    if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::Negativity {
            theta: grid.node(i),
            value: *v,
        });
    }
    let entropy: f64 = grid.integrate(&p.iter().map(|v| v * v.ln()).collect::<Vec<_>>());
    let m1 = TAU * c.coeff(1).norm();
    Ok(0.5 * entropy - 0.5 * coupling.value() * m1 * m1)
}

/// One recorded row of a PDE trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeRecord {
    pub t: f64,
    pub c1: Complex64,
    /// Distance to the stationary manifold (to the flat profile when `K <= 1`).
    pub dist: f64,
    pub free_energy: f64,
    pub min_density: f64,
}

/// Integrates to `t_end`, recording every `record_every` steps.
pub fn trajectory(
    initial: FourierDensity,
    coupling: CouplingStrength,
    t_end: f64,
    dt: f64,
    record_every: u64,
    grid: &CircleGrid,
) -> Result<(FourierDensity, Vec<PdeRecord>)> {
    if record_every == 0 {
        return Err(Error::Config("record_every must be positive".into()));
    }
    let manifold = if coupling.is_supercritical() {
        Some(Manifold::new(coupling, grid.clone())?)
    } else {
        None
    };
    let flat = FourierDensity::uniform(0);
    let unit = Weight::unit(grid);
    let record = |s: &PdeSolver| -> Result<PdeRecord> {
        let st = s.state();
        let dist = match &manifold {
            Some(m) => m.distance(st).0,
            None => HMinusOneElement::from_difference(st, &flat, grid).norm(&unit)?,
        };
        let min_density = st.min_on_grid(grid)?;
        if min_density < NEGATIVITY_TOL {
            log::warn!("density dips to {min_density:e} at t = {}", s.time());
        }
        Ok(PdeRecord {
            t: s.time(),
            c1: st.coeff(1),
            dist,
            free_energy: free_energy(st, coupling, grid)?,
            min_density,
        })
    };
    let mut solver = PdeSolver::new(initial, coupling, dt)?;
    let total = (t_end / dt).round() as u64;
    let mut rows = vec![record(&solver)?];
    while solver.steps < total {
        solver.step()?;
        if solver.steps % record_every == 0 || solver.steps == total {
            rows.push(record(&solver)?);
        }
    }
    Ok((solver.state, rows))
}

/// CSV with columns `t, re_c1, im_c1, dist, free_energy`.
pub fn write_trajectory_csv<W: Write>(w: W, rows: &[PdeRecord]) -> Result<()> {
    let col = |f: fn(&PdeRecord) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    write_columns(
        w,
        &["t", "re_c1", "im_c1", "dist", "free_energy"],
        &[
            &col(|r| r.t),
            &col(|r| r.c1.re),
            &col(|r| r.c1.im),
            &col(|r| r.dist),
            &col(|r| r.free_energy),
        ],
    )
}

/// Least-squares slope of `log dist` against `t` over rows with `t` in `[t0, t1]`,
/// returned as a positive decay rate.
pub fn fitted_decay_rate(rows: &[PdeRecord], t0: f64, t1: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.t >= t0 && r.t <= t1 && r.dist > 0.0)
        .map(|r| (r.t, r.dist.ln()))
        .collect();
    crate::stats::linear_fit(&pts).map(|f| -f.slope)
}
