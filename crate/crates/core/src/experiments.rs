//! Monte Carlo experiments on the particle system: phase diffusion of the
//! synchronization center, fluctuation scaling around the stationary manifold,
//! and the law of the center selected when starting from the flat state.
//!
//! Paths are independent replicas with streams derived from `(seed, path)`, run
//! in parallel and reduced in path order, so every number is independent of the
//! thread count.

use crate::error::{Error, Result};
use crate::grid::CircleGrid;
use crate::hilbert::{EmpiricalMeasure, HMinusOneElement, Manifold, Weight};
use crate::output::write_columns;
use crate::pde::{self, FourierDensity};
use crate::sde::{
    replica_rng, sample_initial, wrap_increment, InitialCondition, PhaseEnsemble, SimConfig,
    Simulator,
};
use crate::stationary::{diffusion_coefficient, sync_degree, CouplingStrength, StationaryProfile};
use crate::stats::{self, fit_through_origin, linear_fit, rayleigh_test, RayleighTest};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::TAU;
use std::io::Write;

/// Largest rescaled horizon accepted by the diffusion experiment.
pub const MAX_TAU: f64 = 4.0;

/// Smallest particle number accepted by the diffusion experiment.
pub const MIN_PARTICLES: usize = 100;

/// Fraction of excluded paths above which a run fails.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.01;

/// Grid used for `H_{-1}` distances of empirical measures.
pub const DISTANCE_GRID: usize = 4096;

const BOOTSTRAP_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths < 2 {
        return Err(Error::Config(format!(
            "need at least 2 paths, got {n_paths}"
        )));
    }
    if n_paths > u32::MAX as usize {
        return Err(Error::Config("too many paths".into()));
    }
    Ok(())
}

fn integer_ratio(num: f64, den: f64, what: &str) -> Result<u64> {
    let v = num / den;
    if !(v.is_finite() && v >= 1.0 - 1e-9) || (v - v.round()).abs() > 1e-6 * v.max(1.0) {
        return Err(Error::Config(format!(
            "{what} must be a positive multiple of {den}, got {num}"
        )));
    }
    Ok(v.round() as u64)
}

/// Parameters of the phase-diffusion experiment. Rescaled time `τ = t/N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionConfig {
    pub coupling: f64,
    pub n: usize,
    pub tau_f: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Spacing of the recorded rescaled times.
    pub record_dtau: f64,
    /// Records with `τ` below this are not fitted.
    pub burn_in: f64,
    /// Increment window for the autocorrelation check.
    pub window_dtau: f64,
    pub bootstrap: usize,
    /// Rotation applied to the initial ensemble.
    pub offset: f64,
}

impl DiffusionConfig {
    pub fn new(coupling: f64, n: usize, tau_f: f64, dt: f64, n_paths: usize, seed: u64) -> Self {
        Self {
            coupling,
            n,
            tau_f,
            dt,
            n_paths,
            seed,
            record_dtau: 0.01,
            burn_in: 0.1,
            window_dtau: 0.05,
            bootstrap: 1000,
            offset: 0.0,
        }
    }

    pub fn validate(&self) -> Result<CouplingStrength> {
        let k = CouplingStrength::new(self.coupling)?;
        if !k.is_supercritical() {
            return Err(Error::Domain(format!(
                "phase diffusion needs K > 1, got {}",
                self.coupling
            )));
        }
        if self.n < MIN_PARTICLES {
            return Err(Error::Config(format!(
                "N must be at least {MIN_PARTICLES}, got {}",
                self.n
            )));
        }
        if !(self.tau_f > 0.0 && self.tau_f <= MAX_TAU) {
            return Err(Error::Config(format!(
                "tau_f must lie in (0, {MAX_TAU}], got {}",
                self.tau_f
            )));
        }
        check_paths(self.n_paths)?;
        if !(self.burn_in >= 0.0 && self.burn_in < self.tau_f) {
            return Err(Error::Config(format!(
                "burn_in must lie in [0, tau_f), got {}",
                self.burn_in
            )));
        }
        if self.bootstrap < 2 {
            return Err(Error::Config("bootstrap needs at least 2 resamples".into()));
        }
        integer_ratio(self.record_dtau * self.n as f64, self.dt, "record_dtau * N")?;
        integer_ratio(self.tau_f, self.record_dtau, "tau_f")?;
        integer_ratio(self.window_dtau, self.record_dtau, "window_dtau")?;
        Ok(k)
    }
}

/// One path of the diffusion experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSummary {
    pub path: usize,
    pub excluded: bool,
    pub min_r: f64,
    /// `Ψ(τ_f) - Ψ(0)`.
    pub displacement: f64,
}

/// Result of the phase-diffusion experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionEstimate {
    pub config: DiffusionConfig,
    pub used_paths: usize,
    pub excluded_paths: usize,
    /// Slope of `Var(Ψ(τ) - Ψ(τ_b))` against `τ - τ_b`.
    pub slope: f64,
    pub r_squared: f64,
    pub d_hat: f64,
    /// Bootstrap standard error of `d_hat`.
    pub stderr: f64,
    pub target: f64,
    pub drift_mean: f64,
    pub drift_stderr: f64,
    pub lag1_autocorrelation: f64,
    pub lag1_samples: usize,
    pub tau: Vec<f64>,
    pub variance: Vec<f64>,
    pub paths: Vec<PathSummary>,
}

impl DiffusionEstimate {
    /// CSV with columns `tau, var_psi` where the variance is of `Ψ(τ) - Ψ(0)`.
    pub fn write_variance_csv<W: Write>(&self, w: W) -> Result<()> {
        write_columns(w, &["tau", "var_psi"], &[&self.tau, &self.variance])
    }
}

fn variance_at(tracks: &[&Vec<f64>], m: usize, base: usize) -> f64 {
    let d: Vec<f64> = tracks.iter().map(|t| t[m] - t[base]).collect();
    stats::variance(&d)
}

fn slope_of(tracks: &[&Vec<f64>], tau: &[f64], base: usize) -> Option<stats::LinearFit> {
    let pts: Vec<(f64, f64)> = ((base + 1)..tau.len())
        .map(|m| (tau[m] - tau[base], variance_at(tracks, m, base)))
        .collect();
    fit_through_origin(&pts)
}

/// Estimates `D_K` from the spread of the lifted center `Ψ_N` on time scale `N`.
///
/// Each path starts at the quantiles of `q_0` (rotated by `offset`) and is
/// excluded when `r_N < r/2` at two consecutive records.
pub fn phase_diffusion_experiment(config: &DiffusionConfig) -> Result<DiffusionEstimate> {
    let k = config.validate()?;
    let r_star = sync_degree(k)?;
    let target = diffusion_coefficient(k)?;
    let n = config.n;
    let t_end = config.tau_f * n as f64;
    let stride = integer_ratio(config.record_dtau * n as f64, config.dt, "record_dtau * N")?;
    let mut sim_cfg = SimConfig::new(k, n, config.dt, t_end, config.seed)?;
    sim_cfg.record_stride = stride;
    let q0 = StationaryProfile::new(k, 0.0)?;
    let initial = sample_initial(
        n,
        &InitialCondition::QuantilesOf(&q0),
        &mut replica_rng(config.seed, 0),
    )?
    .rotated(config.offset);

    let runs: Vec<(Vec<f64>, Vec<f64>)> = (0..config.n_paths)
        .into_par_iter()
        .map(|path| {
            let sim = Simulator::new(sim_cfg.clone(), initial.clone(), path as u32)?;
            let track = sim.run();
            Ok((track.psi_unwrapped, track.r_values))
        })
        .collect::<Result<_>>()?;

    let records = runs[0].0.len();
    let tau: Vec<f64> = (0..records)
        .map(|m| m as f64 * config.record_dtau)
        .collect();
    let paths: Vec<PathSummary> = runs
        .iter()
        .enumerate()
        .map(|(path, (psi, r))| {
            let excluded = r
                .windows(2)
                .any(|w| w[0] < 0.5 * r_star && w[1] < 0.5 * r_star);
            PathSummary {
                path,
                excluded,
                min_r: r.iter().copied().fold(f64::INFINITY, f64::min),
                displacement: psi[records - 1] - psi[0],
            }
        })
        .collect();
    let excluded_paths = paths.iter().filter(|p| p.excluded).count();
    if excluded_paths as f64 > MAX_EXCLUDED_FRACTION * config.n_paths as f64 {
        return Err(Error::Desynchronized {
            excluded: excluded_paths,
            total: config.n_paths,
        });
    }
    let tracks: Vec<&Vec<f64>> = runs
        .iter()
        .zip(&paths)
        .filter(|(_, s)| !s.excluded)
        .map(|(run, _)| &run.0)
        .collect();
    let used = tracks.len();
    if used < 2 {
        return Err(Error::Config("fewer than 2 usable paths".into()));
    }

    let base = tau.partition_point(|t| *t < config.burn_in - 1e-12);
    let fit = slope_of(&tracks, &tau, base)
        .ok_or_else(|| Error::Config("too few records after burn-in".into()))?;
    let slope = fit.slope;

    let mut rng = Xoshiro256PlusPlus::seed_from_u64(config.seed ^ BOOTSTRAP_SALT);
    let stderr = stats::bootstrap_stderr(used, config.bootstrap, &mut rng, |idx| {
        let sample: Vec<&Vec<f64>> = idx.iter().map(|&i| tracks[i]).collect();
        slope_of(&sample, &tau, base).map_or(f64::NAN, |f| f.slope.max(0.0).sqrt())
    });

    let disp: Vec<f64> = tracks.iter().map(|t| t[records - 1] - t[0]).collect();
    let drift_mean = stats::mean(&disp);
    let drift_stderr = (stats::variance(&disp) / used as f64).sqrt();

    let w = integer_ratio(config.window_dtau, config.record_dtau, "window_dtau")? as usize;
    let increments: Vec<Vec<f64>> = tracks
        .iter()
        .map(|t| {
            (base..records)
                .step_by(w)
                .collect::<Vec<_>>()
                .windows(2)
                .map(|p| t[p[1]] - t[p[0]])
                .collect()
        })
        .collect();
    let all: Vec<f64> = increments.iter().flatten().copied().collect();
    let mu = stats::mean(&all);
    let den: f64 = all.iter().map(|d| (d - mu).powi(2)).sum();
    let num: f64 = increments
        .iter()
        .flat_map(|inc| inc.windows(2).map(|p| (p[0] - mu) * (p[1] - mu)))
        .sum();
    let lag1_samples: usize = increments
        .iter()
        .map(|inc| inc.len().saturating_sub(1))
        .sum();

    let variance: Vec<f64> = (0..records).map(|m| variance_at(&tracks, m, 0)).collect();

    Ok(DiffusionEstimate {
        config: config.clone(),
        used_paths: used,
        excluded_paths,
        slope,
        r_squared: fit.r_squared,
        d_hat: slope.max(0.0).sqrt(),
        stderr,
        target,
        drift_mean,
        drift_stderr,
        lag1_autocorrelation: num / den,
        lag1_samples,
        tau,
        variance,
        paths,
    })
}

/// Parameters of the fluctuation-scaling experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingConfig {
    pub coupling: f64,
    pub n_list: Vec<usize>,
    /// Particle time at which the distance to the manifold is measured.
    pub t_fixed: f64,
    /// Particle time of the comparison with the deterministic flow.
    pub pde_time: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl ScalingConfig {
    pub fn new(coupling: f64, n_list: Vec<usize>, n_paths: usize, seed: u64) -> Self {
        Self {
            coupling,
            n_list,
            t_fixed: 5.0,
            pde_time: 1.0,
            dt: 1e-3,
            n_paths,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    /// Mean over paths of `‖μ_N - q_{𝚙(μ_N)}‖_{-1}` at `t_fixed`.
    pub mean_distance: f64,
    pub distance_stderr: f64,
    /// Mean over paths of `‖μ_N - p_t‖_{-1}` at `pde_time`.
    pub pde_distance: f64,
    /// `pde_distance · √N`.
    pub pde_scaled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingTable {
    pub config: ScalingConfig,
    pub rows: Vec<ScalingRow>,
    /// Slope of `log mean_distance` against `log N`.
    pub slope: f64,
    pub slope_stderr: f64,
    pub monotone: bool,
}

impl ScalingTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let col = |f: fn(&ScalingRow) -> f64| self.rows.iter().map(f).collect::<Vec<f64>>();
        write_columns(
            w,
            &[
                "n",
                "mean_distance",
                "distance_stderr",
                "pde_distance",
                "pde_scaled",
            ],
            &[
                &col(|r| r.n as f64),
                &col(|r| r.mean_distance),
                &col(|r| r.distance_stderr),
                &col(|r| r.pde_distance),
                &col(|r| r.pde_scaled),
            ],
        )
    }
}

/// Initial density of the particle/flow comparison.
pub fn comparison_density(modes: usize) -> FourierDensity {
    // (1 + 0.6 cos θ + 0.3 sin 2θ) / 2π
    let mut c = vec![Complex64::new(0.0, 0.0); modes.max(2)];
    c[0] = Complex64::new(0.3 / TAU, 0.0);
    c[1] = Complex64::new(0.0, -0.15 / TAU);
    FourierDensity::from_modes(&c)
}

fn stream_seed(seed: u64, n: usize) -> u64 {
    seed.wrapping_add((n as u64).wrapping_mul(BOOTSTRAP_SALT))
}

/// `H_{-1}` distance of the particle cloud from the manifold, and from the flow.
pub fn fluctuation_scaling(config: &ScalingConfig) -> Result<ScalingTable> {
    let k = CouplingStrength::new(config.coupling)?;
    if !k.is_supercritical() {
        return Err(Error::Domain(format!(
            "fluctuation scaling needs K > 1, got {}",
            config.coupling
        )));
    }
    check_paths(config.n_paths)?;
    if config.n_list.len() < 2 {
        return Err(Error::Config("need at least two particle numbers".into()));
    }
    let grid = CircleGrid::new(DISTANCE_GRID)?;
    let unit = Weight::unit(&grid);
    let manifold = Manifold::new(k, grid.clone())?;
    let q0 = StationaryProfile::new(k, 0.0)?;
    let p0 = comparison_density(pde::DEFAULT_MODES);
    let p_t = pde::evolve(p0.clone(), k, config.pde_time, pde::DEFAULT_DT)?;

    let mut rows = Vec::with_capacity(config.n_list.len());
    for &n in &config.n_list {
        let seed = stream_seed(config.seed, n);
        let per_path: Vec<(f64, f64)> = (0..config.n_paths)
            .into_par_iter()
            .map(|path| {
                let mut rng = replica_rng(seed, path as u32);
                let start = sample_initial(n, &InitialCondition::Iid(&q0), &mut rng)?;
                let cfg = SimConfig::new(k, n, config.dt, config.t_fixed, seed)?;
                let mut sim = Simulator::new(cfg, start, path as u32)?;
                sim.advance(sim.config().steps());
                let mu = EmpiricalMeasure::new(&sim.ensemble().phases)?;
                let (_, guess) = sim.order();
                let psi = manifold.project(&mu, guess.rem_euclid(TAU))?;
                let q = manifold.profile(psi);
                let d_manifold = HMinusOneElement::from_difference(&mu, &q, &grid).norm(&unit)?;

                let start = sample_initial(n, &InitialCondition::Iid(&p0), &mut rng)?;
                let cfg = SimConfig::new(k, n, config.dt, config.pde_time, seed)?;
                let mut sim = Simulator::new(cfg, start, path as u32)?;
                sim.advance(sim.config().steps());
                let mu = EmpiricalMeasure::new(&sim.ensemble().phases)?;
                let d_flow = HMinusOneElement::from_difference(&mu, &p_t, &grid).norm(&unit)?;
                Ok((d_manifold, d_flow))
            })
            .collect::<Result<_>>()?;
        let dm: Vec<f64> = per_path.iter().map(|p| p.0).collect();
        let df: Vec<f64> = per_path.iter().map(|p| p.1).collect();
        let pde_distance = stats::mean(&df);
        rows.push(ScalingRow {
            n,
            mean_distance: stats::mean(&dm),
            distance_stderr: (stats::variance(&dm) / dm.len() as f64).sqrt(),
            pde_distance,
            pde_scaled: pde_distance * (n as f64).sqrt(),
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.n as f64).ln(), r.mean_distance.ln()))
        .collect();
    let (slope, slope_stderr) = match linear_fit(&pts) {
        Some(f) => (f.slope, f.slope_stderr),
        None => {
            // two points
            let s = (pts[1].1 - pts[0].1) / (pts[1].0 - pts[0].0);
            (s, 0.0)
        }
    };
    let mut sorted: Vec<&ScalingRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.n);
    let monotone = sorted
        .windows(2)
        .all(|w| w[1].mean_distance < w[0].mean_distance);
    Ok(ScalingTable {
        config: config.clone(),
        rows,
        slope,
        slope_stderr,
        monotone,
    })
}

/// Parameters of the emergence-from-flat experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmergenceConfig {
    pub coupling: f64,
    pub n: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub dt: f64,
    pub bins: usize,
    /// Rotation applied to the equally spaced start.
    pub offset: f64,
}

impl EmergenceConfig {
    pub fn new(coupling: f64, n: usize, n_paths: usize, seed: u64) -> Self {
        Self {
            coupling,
            n,
            n_paths,
            seed,
            dt: 1e-2,
            bins: 36,
            offset: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmergenceResult {
    pub config: EmergenceConfig,
    /// Projected center at the first time `r_N ≥ r/2`, in `[0, 2π)`, per completed path.
    pub psi: Vec<f64>,
    pub hitting_times: Vec<f64>,
    pub timeouts: usize,
    /// Particle time after which a path counts as timed out, `20 ln N`.
    pub timeout: f64,
    pub histogram: Vec<usize>,
    pub rayleigh: RayleighTest,
}

impl EmergenceResult {
    /// CSV with columns `bin_start, bin_end, count`.
    pub fn write_histogram_csv<W: Write>(&self, w: W) -> Result<()> {
        let b = self.histogram.len();
        let lo: Vec<f64> = (0..b).map(|i| TAU * i as f64 / b as f64).collect();
        let hi: Vec<f64> = (0..b).map(|i| TAU * (i + 1) as f64 / b as f64).collect();
        let counts: Vec<f64> = self.histogram.iter().map(|c| *c as f64).collect();
        write_columns(w, &["bin_start", "bin_end", "count"], &[&lo, &hi, &counts])
    }
}

/// Starts from equally spaced phases and records where the cloud synchronizes.
pub fn emergence_from_u(config: &EmergenceConfig) -> Result<EmergenceResult> {
    let k = CouplingStrength::new(config.coupling)?;
    if !k.is_supercritical() {
        return Err(Error::Domain(format!(
            "emergence needs K > 1, got {}",
            config.coupling
        )));
    }
    check_paths(config.n_paths)?;
    if config.bins == 0 {
        return Err(Error::Config("bins must be positive".into()));
    }
    let threshold = 0.5 * sync_degree(k)?;
    let timeout = 20.0 * (config.n as f64).ln();
    let steps = (timeout / config.dt).ceil();
    let manifold = Manifold::new(k, CircleGrid::new(DISTANCE_GRID)?)?;
    let start = sample_initial(
        config.n,
        &InitialCondition::EquallySpaced,
        &mut replica_rng(config.seed, 0),
    )?
    .rotated(config.offset);
    let cfg = SimConfig::new(k, config.n, config.dt, steps * config.dt, config.seed)?;

    let outcomes: Vec<Option<(f64, f64)>> = (0..config.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut sim = Simulator::new(cfg.clone(), start.clone(), path as u32)?;
            let total = cfg.steps();
            while sim.steps_taken() < total {
                sim.step();
                let (r, lift) = sim.order();
                if r >= threshold {
                    let mu = EmpiricalMeasure::new(&sim.ensemble().phases)?;
                    let psi = manifold.project(&mu, lift.rem_euclid(TAU))?;
                    return Ok(Some((psi.rem_euclid(TAU), sim.time())));
                }
            }
            Ok(None)
        })
        .collect::<Result<_>>()?;

    let psi: Vec<f64> = outcomes.iter().flatten().map(|o| o.0).collect();
    let hitting_times: Vec<f64> = outcomes.iter().flatten().map(|o| o.1).collect();
    let timeouts = outcomes.iter().filter(|o| o.is_none()).count();
    if timeouts > 0 {
        log::warn!(
            "{timeouts} of {} paths did not synchronize by t = {timeout:.1}",
            config.n_paths
        );
    }
    let mut histogram = vec![0usize; config.bins];
    for p in &psi {
        let b = ((p / TAU) * config.bins as f64) as usize;
        histogram[b.min(config.bins - 1)] += 1;
    }
    Ok(EmergenceResult {
        config: config.clone(),
        rayleigh: rayleigh_test(&psi),
        psi,
        hitting_times,
        timeouts,
        timeout,
        histogram,
    })
}

/// Shifts an angle difference into `(-π, π]`; exposed for comparisons of centers.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    wrap_increment(a - b)
}

/// Equally spaced ensemble, for callers that build their own runs.
pub fn equally_spaced(n: usize) -> PhaseEnsemble {
    PhaseEnsemble::new((0..n).map(|j| TAU * j as f64 / n as f64).collect())
}
