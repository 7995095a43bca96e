//! One function per subcommand. Each writes its outputs into `out` and returns
//! the list of files written.

use crate::config::Config;
use rotators::experiments::{self, DiffusionConfig, EmergenceConfig, ScalingConfig};
use rotators::grid::CircleGrid;
use rotators::output::write_columns;
use rotators::pde::{self, FourierDensity};
use rotators::sde::{self, replica_rng, sample_initial, InitialCondition, SimConfig};
use rotators::spectral;
use rotators::stationary::{diffusion_coefficient, sync_degree};
use rotators::{CouplingStrength, StationaryProfile};
use serde::Serialize;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

type CmdResult = Result<Vec<PathBuf>, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn create(out: &Path, name: &str) -> Result<(BufWriter<File>, PathBuf), String> {
    let path = out.join(name);
    let f = File::create(&path).map_err(|e| format!("cannot create {}: {e}", path.display()))?;
    Ok((BufWriter::new(f), path))
}

pub fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<PathBuf, String> {
    let (mut w, path) = create(out, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(err)?;
    std::io::Write::write_all(&mut w, b"\n").map_err(err)?;
    Ok(path)
}

fn coupling(cfg: &Config) -> Result<CouplingStrength, String> {
    CouplingStrength::new(cfg.f64("coupling")?).map_err(err)
}

#[derive(Serialize)]
struct StationarySummary {
    coupling: f64,
    r: f64,
    /// `None` when `K <= 1`.
    diffusion_coefficient: Option<f64>,
    c: f64,
    tangent_norm: f64,
    profile_integral: f64,
}

pub fn stationary(cfg: &Config, out: &Path) -> CmdResult {
    let k = coupling(cfg)?;
    let q = StationaryProfile::new(k, 0.0).map_err(err)?;
    let grid = CircleGrid::new(cfg.usize("points")?).map_err(err)?;
    let theta: Vec<f64> = grid.nodes().collect();
    let values = grid.sample(|t| q.eval(t));
    let summary = StationarySummary {
        coupling: k.value(),
        r: sync_degree(k).map_err(err)?,
        diffusion_coefficient: if k.is_supercritical() {
            Some(diffusion_coefficient(k).map_err(err)?)
        } else {
            None
        },
        c: q.c(),
        tangent_norm: q.tangent_norm_sq().sqrt(),
        profile_integral: grid.integrate(&values),
    };
    let (w, csv) = create(out, "profile.csv")?;
    write_columns(w, &["theta", "q"], &[&theta, &values]).map_err(err)?;
    Ok(vec![write_json(out, "stationary.json", &summary)?, csv])
}

#[derive(Serialize)]
struct SimulateSummary {
    final_time: f64,
    final_r: f64,
    final_psi: f64,
    max_increment: f64,
}

pub fn simulate(cfg: &Config, out: &Path) -> CmdResult {
    let k = coupling(cfg)?;
    let seed = cfg.u64("seed")?;
    let mut sim_cfg =
        SimConfig::new(k, cfg.usize("n")?, cfg.f64("dt")?, cfg.f64("t_end")?, seed).map_err(err)?;
    sim_cfg.record_stride = cfg.u64("record_stride")?;
    let q = StationaryProfile::new(k, 0.0).map_err(err)?;
    let kind = match cfg.string("init")?.as_str() {
        "equal" => InitialCondition::EquallySpaced,
        "quantiles" => InitialCondition::QuantilesOf(&q),
        "iid" => InitialCondition::Iid(&q),
        other => {
            return Err(format!(
                "config key 'init' must be equal, quantiles or iid, got {other}"
            ))
        }
    };
    let start = sample_initial(sim_cfg.n, &kind, &mut replica_rng(seed, 0)).map_err(err)?;
    let track = sde::run(&sim_cfg, start).map_err(err)?;
    let (w, csv) = create(out, "track.csv")?;
    track.write_csv(w).map_err(err)?;
    let last = track.times.len() - 1;
    let summary = SimulateSummary {
        final_time: track.times[last],
        final_r: track.r_values[last],
        final_psi: track.psi_unwrapped[last],
        max_increment: track.max_increment,
    };
    Ok(vec![write_json(out, "simulate.json", &summary)?, csv])
}

#[derive(Serialize)]
struct PdeSummary {
    final_time: f64,
    final_distance: f64,
    final_free_energy: f64,
    min_density: f64,
    /// Decay rate of the distance over the second half of the run.
    fitted_rate: Option<f64>,
}

pub fn pde_cmd(cfg: &Config, out: &Path) -> CmdResult {
    let k = coupling(cfg)?;
    let modes = cfg.usize("modes")?;
    let init = match cfg.string("init")?.as_str() {
        "generic" => experiments::comparison_density(modes),
        "uniform" => FourierDensity::uniform(modes),
        "stationary" => {
            FourierDensity::from_profile(&StationaryProfile::new(k, 0.0).map_err(err)?, modes)
        }
        other => {
            return Err(format!(
                "config key 'init' must be generic, uniform or stationary, got {other}"
            ))
        }
    };
    let grid = CircleGrid::new(
        (8 * modes)
            .next_power_of_two()
            .max(CircleGrid::DEFAULT_POINTS),
    )
    .map_err(err)?;
    let t_end = cfg.f64("t_end")?;
    let (last, rows) = pde::trajectory(
        init,
        k,
        t_end,
        cfg.f64("dt")?,
        cfg.u64("record_every")?,
        &grid,
    )
    .map_err(err)?;
    let (w, csv) = create(out, "trajectory.csv")?;
    pde::write_trajectory_csv(w, &rows).map_err(err)?;
    let theta: Vec<f64> = grid.nodes().collect();
    let density = last.density_on_grid(&grid).map_err(err)?;
    let (w, dens) = create(out, "density.csv")?;
    write_columns(w, &["theta", "p"], &[&theta, &density]).map_err(err)?;
    let end = rows.last().ok_or("empty trajectory")?;
    let summary = PdeSummary {
        final_time: end.t,
        final_distance: end.dist,
        final_free_energy: end.free_energy,
        min_density: rows
            .iter()
            .map(|r| r.min_density)
            .fold(f64::INFINITY, f64::min),
        fitted_rate: pde::fitted_decay_rate(&rows, 0.5 * t_end, t_end),
    };
    Ok(vec![write_json(out, "pde.json", &summary)?, csv, dens])
}

#[derive(Serialize)]
struct SpectrumSummary {
    coupling: f64,
    modes: usize,
    psi: f64,
    symmetry_defect: f64,
    tangent_residual: f64,
    tangent_alignment: f64,
    eigenvalues: Vec<f64>,
    asymptotics: spectral::AsymptoticsReport,
}

pub fn spectrum(cfg: &Config, out: &Path) -> CmdResult {
    let k = coupling(cfg)?;
    let modes = cfg.usize("modes")?;
    let asm = spectral::assemble(k, modes, cfg.f64("psi")?).map_err(err)?;
    let symmetry_defect = asm.symmetry_defect();
    let tangent_residual = asm.tangent_residual().map_err(err)?;
    let dec = spectral::eigensolve(asm).map_err(err)?;
    let ps: Vec<usize> = [8, 12, 16, 20]
        .into_iter()
        .filter(|p| 2 * p + 1 < dec.len() / 2)
        .collect();
    let asymptotics = dec.asymptotics_report(&ps);
    let mut files = Vec::new();
    let (w, path) = create(out, "spectrum.csv")?;
    dec.write_spectrum_csv(w, asymptotics.l0).map_err(err)?;
    files.push(path);
    for j in 0..cfg.usize("eigenfunctions")?.min(dec.len()) {
        let (w, path) = create(out, &format!("eigenfunction_{j}.csv"))?;
        dec.write_eigenfunction_csv(w, j).map_err(err)?;
        files.push(path);
    }
    let summary = SpectrumSummary {
        coupling: k.value(),
        modes,
        psi: dec.assembly().profile().psi(),
        symmetry_defect,
        tangent_residual,
        tangent_alignment: dec.tangent_alignment(),
        eigenvalues: dec.eigenvalues.clone(),
        asymptotics,
    };
    files.insert(0, write_json(out, "spectrum.json", &summary)?);
    Ok(files)
}

pub fn diffusion(cfg: &Config, out: &Path) -> CmdResult {
    let mut d = DiffusionConfig::new(
        cfg.f64("coupling")?,
        cfg.usize("n")?,
        cfg.f64("tau_f")?,
        cfg.f64("dt")?,
        cfg.usize("n_paths")?,
        cfg.u64("seed")?,
    );
    d.record_dtau = cfg.f64("record_dtau")?;
    d.burn_in = cfg.f64("burn_in")?;
    d.window_dtau = cfg.f64("window_dtau")?;
    d.bootstrap = cfg.usize("bootstrap")?;
    d.offset = cfg.f64("offset")?;
    let est = experiments::phase_diffusion_experiment(&d).map_err(err)?;
    let (w, csv) = create(out, "variance.csv")?;
    est.write_variance_csv(w).map_err(err)?;
    Ok(vec![write_json(out, "diffusion.json", &est)?, csv])
}

pub fn scaling(cfg: &Config, out: &Path) -> CmdResult {
    let mut s = ScalingConfig::new(
        cfg.f64("coupling")?,
        cfg.usize_list("n_list")?,
        cfg.usize("n_paths")?,
        cfg.u64("seed")?,
    );
    s.t_fixed = cfg.f64("t_fixed")?;
    s.pde_time = cfg.f64("pde_time")?;
    s.dt = cfg.f64("dt")?;
    let table = experiments::fluctuation_scaling(&s).map_err(err)?;
    let (w, csv) = create(out, "scaling.csv")?;
    table.write_csv(w).map_err(err)?;
    Ok(vec![write_json(out, "scaling.json", &table)?, csv])
}

pub fn emergence(cfg: &Config, out: &Path) -> CmdResult {
    let mut e = EmergenceConfig::new(
        cfg.f64("coupling")?,
        cfg.usize("n")?,
        cfg.usize("n_paths")?,
        cfg.u64("seed")?,
    );
    e.dt = cfg.f64("dt")?;
    e.bins = cfg.usize("bins")?;
    e.offset = cfg.f64("offset")?;
    let res = experiments::emergence_from_u(&e).map_err(err)?;
    let (w, csv) = create(out, "histogram.csv")?;
    res.write_histogram_csv(w).map_err(err)?;
    Ok(vec![write_json(out, "emergence.json", &res)?, csv])
}
