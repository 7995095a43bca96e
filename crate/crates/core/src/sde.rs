//! Euler-Maruyama simulation of `N` mean-field plane rotators.
//!
//! `dφ_j = -K r_N sin(φ_j - Ψ_N) dt + dW_j`, where `r_N e^{iΨ_N}` is the
//! empirical mean of `e^{iφ_j}`. The drift is evaluated from the complex mean
//! `X + iY` as `-K (X sin φ_j - Y cos φ_j)`, so a step costs `O(N)`.
//!
//! Every particle owns a Xoshiro256++ substream and draws one normal per step,
//! which makes trajectories independent of scheduling. Replica `r` starts `r`
//! long jumps (2¹⁹² draws) past the seeded state and particle `j` sits `j`
//! jumps (2¹²⁸ draws) past its replica origin.

use crate::error::{Error, Result};
use crate::hilbert::Measure;
use crate::output::write_columns;
use crate::stationary::{CouplingStrength, StationaryProfile};
use rand::Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use std::f64::consts::{PI, TAU};
use std::io::Write;

/// Largest admissible time step.
pub const MAX_DT: f64 = 0.01;

/// Recorded phase increments at or above this trigger an unwrap warning.
pub const UNWRAP_WARNING: f64 = PI / 2.0;

const CDF_TABLE_POINTS: usize = 4096;

/// Particle-time configuration of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub coupling: CouplingStrength,
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub record_stride: u64,
    /// Drops the noise term (diagnostics only).
    pub zero_noise: bool,
    /// Times at which full snapshots of the phases are kept.
    pub snapshot_times: Vec<f64>,
}

impl SimConfig {
    pub fn new(
        coupling: CouplingStrength,
        n: usize,
        dt: f64,
        t_end: f64,
        seed: u64,
    ) -> Result<Self> {
        let c = Self {
            coupling,
            n,
            dt,
            t_end,
            seed,
            record_stride: 1,
            zero_noise: false,
            snapshot_times: Vec::new(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!(
                "N must be at least 2, got {}",
                self.n
            )));
        }
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(Error::Config(format!(
                "dt must lie in (0, {MAX_DT}], got {}",
                self.dt
            )));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!(
                "t_end must be finite and >= 0, got {}",
                self.t_end
            )));
        }
        let steps = self.t_end / self.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) || steps > u64::MAX as f64 / 2.0 {
            return Err(Error::Config(format!(
                "t_end = {} is not an integer number of steps of {}",
                self.t_end, self.dt
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::Config("record_stride must be positive".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }
}

/// Phases reduced to `[0, 2π)` and the particle clock.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseEnsemble {
    pub phases: Vec<f64>,
    pub time: f64,
}

impl PhaseEnsemble {
    pub fn new(phases: Vec<f64>) -> Self {
        Self {
            phases: phases.into_iter().map(|p| p.rem_euclid(TAU)).collect(),
            time: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn rotated(&self, c: f64) -> Self {
        Self {
            phases: self
                .phases
                .iter()
                .map(|p| (p + c).rem_euclid(TAU))
                .collect(),
            time: self.time,
        }
    }
}

/// Recorded `(t, r_N, Ψ_N)` with `Ψ_N` lifted to the real line.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhaseTrack {
    pub times: Vec<f64>,
    pub r_values: Vec<f64>,
    pub psi_unwrapped: Vec<f64>,
    pub snapshots: Vec<(f64, Vec<f64>)>,
    /// Largest increment of the lift between consecutive steps.
    pub max_increment: f64,
}

impl PhaseTrack {
    /// CSV with columns `t, r, psi_unwrapped`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_columns(
            w,
            &["t", "r", "psi_unwrapped"],
            &[&self.times, &self.r_values, &self.psi_unwrapped],
        )
    }

    /// CSV with columns `t, particle, phase`.
    pub fn write_snapshots_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut t = Vec::new();
        let mut j = Vec::new();
        let mut p = Vec::new();
        for (time, phases) in &self.snapshots {
            for (i, v) in phases.iter().enumerate() {
                t.push(*time);
                j.push(i as f64);
                p.push(*v);
            }
        }
        write_columns(w, &["t", "particle", "phase"], &[&t, &j, &p])
    }
}

/// `-K r_N sin(φ_j - Ψ_N)` for every particle.
pub fn drift(phases: &[f64], coupling: f64) -> Vec<f64> {
    let z = crate::hilbert::complex_mean(phases);
    phases
        .iter()
        .map(|p| {
            let (s, c) = p.sin_cos();
            -coupling * (z.re * s - z.im * c)
        })
        .collect()
}

/// Generator type used for all particle noise.
pub type ParticleRng = Xoshiro256PlusPlus;

/// Origin of the substreams of `replica`.
pub fn replica_rng(seed: u64, replica: u32) -> ParticleRng {
    let mut rng = ParticleRng::seed_from_u64(seed);
    for _ in 0..replica {
        rng.long_jump();
    }
    rng
}

/// Per-particle generators `0..n` of `replica`. The origin itself is left for
/// initial-condition sampling, so particle `j` sits `j + 1` jumps past it.
pub fn particle_rngs(seed: u64, replica: u32, n: usize) -> Vec<ParticleRng> {
    let mut cursor = replica_rng(seed, replica);
    (0..n)
        .map(|_| {
            cursor.jump();
            cursor.clone()
        })
        .collect()
}

/// Initial conditions.
pub enum InitialCondition<'a> {
    /// `φ_j = 2πj/N`.
    EquallySpaced,
    /// `φ_j` at the `(j - 1/2)/N` quantile of the profile.
    QuantilesOf(&'a StationaryProfile),
    /// Independent draws from a probability measure.
    Iid(&'a dyn Measure),
}

/// Builds an initial ensemble of `n` particles. Random draws use `rng`.
pub fn sample_initial(
    n: usize,
    kind: &InitialCondition<'_>,
    rng: &mut impl Rng,
) -> Result<PhaseEnsemble> {
    if n == 0 {
        return Err(Error::Config("N must be positive".into()));
    }
    let phases = match kind {
        InitialCondition::EquallySpaced => (0..n).map(|j| TAU * j as f64 / n as f64).collect(),
        InitialCondition::QuantilesOf(q) => profile_quantiles(q, n),
        InitialCondition::Iid(mu) => {
            let mass = mu.fourier_moments(0)[0].re;
            if (mass - 1.0).abs() > 1e-8 {
                return Err(Error::Unnormalized(mass));
            }
            let grid = crate::grid::CircleGrid::new(CDF_TABLE_POINTS)?;
            let mut cdf = mu.cdf_on_grid(&grid);
            cdf.push(1.0);
            let h = grid.spacing();
            (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    inverse_cdf(&cdf, h, u)
                })
                .collect()
        }
    };
    Ok(PhaseEnsemble::new(phases))
}

fn inverse_cdf(cdf: &[f64], h: f64, u: f64) -> f64 {
    let i = cdf.partition_point(|c| *c <= u).clamp(1, cdf.len() - 1);
    let (a, b) = (cdf[i - 1], cdf[i]);
    let frac = if b > a { (u - a) / (b - a) } else { 0.5 };
    ((i - 1) as f64 + frac.clamp(0.0, 1.0)) * h
}

fn profile_quantiles(q: &StationaryProfile, n: usize) -> Vec<f64> {
    let grid = crate::grid::CircleGrid::new(CDF_TABLE_POINTS).expect("valid table size");
    let mut cdf: Vec<f64> = grid.nodes().map(|t| q.primitive(t)).collect();
    cdf.push(1.0);
    let h = grid.spacing();
    (0..n)
        .map(|j| {
            let u = (j as f64 + 0.5) / n as f64;
            let mut t = inverse_cdf(&cdf, h, u);
            for _ in 0..4 {
                t -= (q.primitive(t) - u) / q.eval(t);
            }
            t
        })
        .collect()
}

/// A running simulation of one replica.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimConfig,
    ensemble: PhaseEnsemble,
    rngs: Vec<ParticleRng>,
    sin: Vec<f64>,
    cos: Vec<f64>,
    steps_taken: u64,
    psi_lift: f64,
    last_arg: Option<f64>,
    max_increment: f64,
}

impl Simulator {
    pub fn new(config: SimConfig, initial: PhaseEnsemble, replica: u32) -> Result<Self> {
        config.validate()?;
        if initial.len() != config.n {
            return Err(Error::Config(format!(
                "initial ensemble has {} particles, config says {}",
                initial.len(),
                config.n
            )));
        }
        let rngs = particle_rngs(config.seed, replica, config.n);
        let n = config.n;
        let mut sim = Self {
            config,
            ensemble: initial,
            rngs,
            sin: vec![0.0; n],
            cos: vec![0.0; n],
            steps_taken: 0,
            psi_lift: 0.0,
            last_arg: None,
            max_increment: 0.0,
        };
        let (x, y) = sim.refresh_trig();
        sim.update_lift(x, y);
        Ok(sim)
    }

    pub fn ensemble(&self) -> &PhaseEnsemble {
        &self.ensemble
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn time(&self) -> f64 {
        self.ensemble.time
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    /// Current `(r_N, lifted Ψ_N)`.
    pub fn order(&self) -> (f64, f64) {
        let n = self.config.n as f64;
        let x = lane_sum(&self.cos) / n;
        let y = lane_sum(&self.sin) / n;
        ((x * x + y * y).sqrt(), self.psi_lift)
    }

    pub fn max_increment(&self) -> f64 {
        self.max_increment
    }

    fn refresh_trig(&mut self) -> (f64, f64) {
        for ((p, s), c) in self
            .ensemble
            .phases
            .iter()
            .zip(&mut self.sin)
            .zip(&mut self.cos)
        {
            let (sv, cv) = fast_sin_cos(*p);
            *s = sv;
            *c = cv;
        }
        let n = self.config.n as f64;
        (lane_sum(&self.cos) / n, lane_sum(&self.sin) / n)
    }

    fn update_lift(&mut self, x: f64, y: f64) {
        if (x * x + y * y).sqrt() < crate::hilbert::PHASE_FLOOR {
            return;
        }
        let arg = y.atan2(x);
        match self.last_arg {
            None => self.psi_lift = arg.rem_euclid(TAU),
            Some(prev) => {
                let d = wrap_increment(arg - prev);
                self.max_increment = self.max_increment.max(d.abs());
                self.psi_lift += d;
            }
        }
        self.last_arg = Some(arg);
    }

    /// One Euler-Maruyama step with the order parameter frozen at time `t`.
    pub fn step(&mut self) {
        let n = self.config.n as f64;
        let x = lane_sum(&self.cos) / n;
        let y = lane_sum(&self.sin) / n;
        let k = self.config.coupling.value();
        let dt = self.config.dt;
        let sq = dt.sqrt();
        let noisy = !self.config.zero_noise;
        for (((p, s), c), rng) in self
            .ensemble
            .phases
            .iter_mut()
            .zip(&self.sin)
            .zip(&self.cos)
            .zip(&mut self.rngs)
        {
            let xi: f64 = rng.sample(StandardNormal);
            let noise = if noisy { sq * xi } else { 0.0 };
            *p = wrap_phase(*p - k * (x * s - y * c) * dt + noise);
        }
        self.steps_taken += 1;
        self.ensemble.time = self.steps_taken as f64 * dt;
        let (x, y) = self.refresh_trig();
        self.update_lift(x, y);
    }

    pub fn advance(&mut self, steps: u64) {
        for _ in 0..steps {
            self.step();
        }
    }

    /// Runs to `t_end`, recording every `record_stride` steps.
    pub fn run(mut self) -> PhaseTrack {
        let mut track = PhaseTrack::default();
        let snaps: Vec<u64> = self
            .config
            .snapshot_times
            .iter()
            .map(|t| (t / self.config.dt).round() as u64)
            .collect();
        let total = self.config.steps();
        let stride = self.config.record_stride;
        let record = |sim: &Self, track: &mut PhaseTrack| {
            let (r, psi) = sim.order();
            track.times.push(sim.time());
            track.r_values.push(r);
            track.psi_unwrapped.push(psi);
            if snaps.contains(&sim.steps_taken) {
                track
                    .snapshots
                    .push((sim.time(), sim.ensemble.phases.clone()));
            }
        };
        record(&self, &mut track);
        while self.steps_taken < total {
            self.step();
            if self.steps_taken % stride == 0 || self.steps_taken == total {
                record(&self, &mut track);
            } else if snaps.contains(&self.steps_taken) {
                track
                    .snapshots
                    .push((self.time(), self.ensemble.phases.clone()));
            }
        }
        track.max_increment = self.max_increment;
        if self.max_increment >= UNWRAP_WARNING {
            log::warn!(
                "phase increment {:.3} between steps reaches pi/2; the lift may be unreliable",
                self.max_increment
            );
        }
        track
    }
}

/// Reduces `p` to `[0, 2π)`, cheaply when `p` is within one turn of that range.
#[inline]
pub fn wrap_phase(p: f64) -> f64 {
    let mut v = p;
    if v < 0.0 {
        v += TAU;
    } else if v >= TAU {
        v -= TAU;
    }
    if (0.0..TAU).contains(&v) {
        v
    } else {
        let w = p.rem_euclid(TAU);
        if w < TAU {
            w
        } else {
            0.0
        }
    }
}

/// Sum with four interleaved accumulators (fixed order, so reproducible).
#[inline]
fn lane_sum(v: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = v.chunks_exact(4);
    let rest = chunks.remainder();
    for c in chunks {
        acc[0] += c[0];
        acc[1] += c[1];
        acc[2] += c[2];
        acc[3] += c[3];
    }
    let tail: f64 = rest.iter().sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

// Cody-Waite split of π/2 (33 leading bits, then the remainder).
const PIO2_HI: f64 = 1.570_796_326_734_125_6;
const PIO2_LO: f64 = 6.077_100_506_506_192e-11;

/// `(sin x, cos x)` for `0 <= x <= 2π`, accurate to a few ulp.
///
/// Reduces to `|y| <= π/4` around the nearest multiple of `π/2` and evaluates
/// the Taylor polynomials through degree 17 and 16.
#[inline]
pub fn fast_sin_cos(x: f64) -> (f64, f64) {
    debug_assert!((0.0..=TAU).contains(&x));
    // adding 1.5·2⁵² rounds to the nearest integer and leaves it in the low bits
    const ROUND: f64 = 6_755_399_441_055_744.0;
    let t = x * std::f64::consts::FRAC_2_PI + ROUND;
    let k = t.to_bits();
    let kf = t - ROUND;
    let y = (x - kf * PIO2_HI) - kf * PIO2_LO;
    let z = y * y;
    let sp = 1.0
        + z * (-1.0 / 6.0
            + z * (1.0 / 120.0
                + z * (-1.0 / 5040.0
                    + z * (1.0 / 362_880.0
                        + z * (-1.0 / 39_916_800.0
                            + z * (1.0 / 6_227_020_800.0
                                + z * (-1.0 / 1_307_674_368_000.0
                                    + z * (1.0 / 355_687_428_096_000.0))))))));
    let cp = 1.0
        + z * (-0.5
            + z * (1.0 / 24.0
                + z * (-1.0 / 720.0
                    + z * (1.0 / 40_320.0
                        + z * (-1.0 / 3_628_800.0
                            + z * (1.0 / 479_001_600.0
                                + z * (-1.0 / 87_178_291_200.0
                                    + z * (1.0 / 20_922_789_888_000.0))))))));
    let sy = (y * sp).to_bits();
    let cy = cp.to_bits();
    // branch-free quadrant selection: the quadrant of a phase is unpredictable
    let swap = 0u64.wrapping_sub(k & 1);
    let a = (sy & !swap) | (cy & swap);
    let b = (cy & !swap) | (sy & swap);
    let sin_sign = (k & 2) << 62;
    let cos_sign = ((k + 1) & 2) << 62;
    (f64::from_bits(a ^ sin_sign), f64::from_bits(b ^ cos_sign))
}

/// Shifts an angle difference into `(-π, π]`.
pub fn wrap_increment(d: f64) -> f64 {
    let w = d.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Runs replica 0 of `config` from `initial`.
pub fn run(config: &SimConfig, initial: PhaseEnsemble) -> Result<PhaseTrack> {
    Ok(Simulator::new(config.clone(), initial, 0)?.run())
}
