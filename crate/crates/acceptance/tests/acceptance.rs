//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero when any criterion fails.
//!
//! Criteria 1-7 run once on a single worker thread and once on three; criterion
//! 8 compares every number the two passes produced, bit for bit. Setting
//! `ACCEPTANCE_ONLY=1,3` restricts both passes to the listed criteria.

use num_complex::Complex64;
use rotators::bessel::psi_ratio;
use rotators::experiments::{self, angle_difference, DiffusionConfig, ScalingConfig};
use rotators::grid::CircleGrid;
use rotators::hilbert::{DensityOnGrid, HMinusOneElement, Manifold, Weight};
use rotators::pde::{self, FourierDensity, PdeSolver};
use rotators::spectral;
use rotators::stationary::{c_constant, diffusion_coefficient, sync_degree};
use rotators::{CouplingStrength, StationaryProfile};
use std::f64::consts::TAU;
use std::time::Instant;

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
    numbers: Vec<f64>,
}

fn k(v: f64) -> CouplingStrength {
    CouplingStrength::new(v).unwrap()
}

fn criterion_1() -> Outcome {
    let grid = CircleGrid::new(4096).unwrap();
    let mut numbers = Vec::new();
    let mut worst = [0.0f64; 3];
    for kv in [1.5, 2.0, 5.0] {
        let kk = k(kv);
        let r = sync_degree(kk).unwrap();
        let fixed = (psi_ratio(2.0 * kv * r).unwrap() - r).abs();
        let q = StationaryProfile::new(kk, 0.0).unwrap();
        let inv = grid.integrate(&grid.sample(|t| 1.0 / q.eval(t)));
        let c_err = (c_constant(kk).unwrap() - TAU / inv).abs();
        let qp = HMinusOneElement::from_fn(&grid, |t| q.deriv(t)).unwrap();
        let norm = qp.norm(&Weight::inverse_profile(&grid, &q)).unwrap();
        let d_err = (diffusion_coefficient(kk).unwrap() * norm - 1.0).abs();
        worst[0] = worst[0].max(fixed);
        worst[1] = worst[1].max(c_err);
        worst[2] = worst[2].max(d_err);
        numbers.extend([r, fixed, c_err, d_err]);
    }
    Outcome {
        pass: worst[0] < 1e-10 && worst[1] < 1e-10 && worst[2] < 1e-6,
        detail: format!(
            "max |Ψ(2Kr)-r| = {:.1e}, max |c-2π/∫1/q| = {:.1e}, max |D_K‖q'‖-1| = {:.1e}",
            worst[0], worst[1], worst[2]
        ),
        numbers,
    }
}

fn criterion_2() -> Outcome {
    let grid = CircleGrid::new(4096).unwrap();
    let q = StationaryProfile::new(k(2.0), 0.0).unwrap();
    let a = grid.integrate(&grid.sample(|t| q.tangent_kernel_deriv(t).powi(2) * q.eval(t)));
    let inv = grid.integrate(&grid.sample(|t| 1.0 / q.eval(t)));
    let b = 1.0 - TAU * TAU / inv;
    let qp = HMinusOneElement::from_fn(&grid, |t| q.deriv(t)).unwrap();
    let c = qp.norm(&Weight::inverse_profile(&grid, &q)).unwrap().powi(2);
    let spread = (a - b).abs().max((a - c).abs()).max((b - c).abs());
    Outcome {
        pass: spread < 1e-8,
        detail: format!("∫(K')²q = {a:.12}, 1-(2π)²/∫1/q = {b:.12}, ‖q'‖² = {c:.12}, spread {spread:.1e}"),
        numbers: vec![a, b, c],
    }
}

fn criterion_3() -> Outcome {
    let dec = spectral::decompose(k(2.0), 64, 0.0).unwrap();
    let grid = dec.assembly().grid().clone();
    let lambda0 = dec.eigenvalues[0];
    let lambda1 = dec.eigenvalues[1];
    let align = dec.tangent_alignment();
    let rep = dec.asymptotics_report(&[8, 12, 16]);
    let cal = rep.rows[0].residual * 8.0;
    let asym_ok = rep.rows.iter().all(|r| r.residual * r.p as f64 <= cal);
    let cal_alt = rep.rows[0].residual_alt * 8.0;
    let asym_alt_ok = rep.rows.iter().all(|r| r.residual_alt * r.p as f64 <= cal_alt);
    let mut bio = 0.0f64;
    for i in 0..=10 {
        let f = dec.adjoint_eigenfunction(i);
        for j in 0..=10 {
            let v = grid.integrate_product(&f, &dec.eigenfunction(j));
            bio = bio.max((v - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    let df = grid.derivative(&dec.adjoint_eigenfunction(0));
    let q = dec.assembly().profile();
    let energy = grid.integrate(&df.iter().zip(grid.nodes()).map(|(d, t)| d * d * q.eval(t)).collect::<Vec<_>>());
    let checks = [
        lambda0.abs() < 1e-8,
        align > 1.0 - 1e-6,
        lambda1 > 0.0,
        asym_ok,
        bio < 1e-6,
        (energy - 1.0).abs() < 1e-6,
    ];
    let scaled: Vec<String> = rep
        .rows
        .iter()
        .map(|r| format!("p={}: {:.4}", r.p, r.residual * r.p as f64))
        .collect();
    let scaled_alt: Vec<String> = rep
        .rows
        .iter()
        .map(|r| format!("{:.4}", r.residual_alt * r.p as f64))
        .collect();
    let mut numbers = vec![lambda0, lambda1, align, bio, energy];
    numbers.extend(rep.rows.iter().flat_map(|r| [r.lambda, r.residual, r.residual_alt, r.defect]));
    Outcome {
        pass: checks.iter().all(|c| *c),
        detail: format!(
            "λ0 = {lambda0:.1e}, λ1 = {lambda1:.8}, alignment 1-{:.1e}, biorthogonality {bio:.1e}, ∫(f0')²q-1 = {:.1e}, l0 = {}; \
             |λ-(p²/2-K²r²/8)|·p [{}] vs calibration {cal:.4}: {}; with +K²r²/4 offset [{}] vs {cal_alt:.4}: {}",
            1.0 - align,
            energy - 1.0,
            rep.l0,
            scaled.join(", "),
            if asym_ok { "bounded" } else { "grows" },
            scaled_alt.join(", "),
            if asym_alt_ok { "bounded" } else { "grows" },
        ),
        numbers,
    }
}

fn criterion_4() -> Outcome {
    let kk = k(2.0);
    let modes = 64;
    let grid = CircleGrid::new(512).unwrap();
    let dt = 1e-3;

    // a density with no first harmonic
    let mut u_modes = vec![Complex64::new(0.0, 0.0); modes];
    u_modes[1] = Complex64::new(0.2 / TAU, 0.1 / TAU);
    u_modes[2] = Complex64::new(0.0, -0.05 / TAU);
    let mut s = PdeSolver::new(FourierDensity::from_modes(&u_modes), kk, dt).unwrap();
    let mut c1_max = 0.0f64;
    while s.time() < 10.0 - 0.5 * dt {
        s.step().unwrap();
        c1_max = c1_max.max(s.state().coeff(1).norm());
    }
    let dens = s.state().density_on_grid(&grid).unwrap();
    let sup_u = dens.iter().map(|v| (v - 1.0 / TAU).abs()).fold(0.0, f64::max);

    let manifold = Manifold::new(kk, grid.clone()).unwrap();
    let mut s = PdeSolver::new(experiments::comparison_density(modes), kk, dt).unwrap();
    let mut fe_prev = pde::free_energy(s.state(), kk, &grid).unwrap();
    let mut fe_worst = f64::NEG_INFINITY;
    let mut rows = Vec::new();
    let mut step = 0u64;
    while s.time() < 20.0 - 0.5 * dt {
        s.step().unwrap();
        step += 1;
        let fe = pde::free_energy(s.state(), kk, &grid).unwrap();
        fe_worst = fe_worst.max(fe - fe_prev);
        fe_prev = fe;
        if step % 100 == 0 {
            rows.push((s.time(), manifold.distance(s.state()).0));
        }
    }
    let final_dist = rows.last().unwrap().1;
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(t, _)| (8.0..=14.0).contains(t))
        .map(|(t, d)| (*t, d.ln()))
        .collect();
    let rate = -rotators::stats::linear_fit(&pts).unwrap().slope;
    let lambda1 = spectral::decompose(kk, 64, 0.0).unwrap().eigenvalues[1];
    let rel = (rate / lambda1 - 1.0).abs();
    Outcome {
        pass: c1_max < 1e-14 && sup_u < 1e-6 && final_dist < 1e-6 && fe_worst <= 1e-10 && rel < 0.05,
        detail: format!(
            "U: max|c1| = {c1_max:.1e}, sup error at t=10 = {sup_u:.1e}; generic: dist at t=20 = {final_dist:.1e}, \
             max free-energy increase = {fe_worst:.1e}, rate on [8,14] = {rate:.5} vs λ1 = {lambda1:.5} ({:.2}%)",
            100.0 * rel
        ),
        numbers: vec![c1_max, sup_u, final_dist, fe_worst, rate],
    }
}

fn criterion_5() -> Outcome {
    let grid = CircleGrid::new(512).unwrap();
    let m = Manifold::new(k(2.0), grid.clone()).unwrap();
    let psi0 = 0.7;
    let q = m.profile(psi0);
    let g0 = |t: f64| (t - 0.3).sin() + 0.5 * (2.0 * t + 1.0).cos();
    let mean = grid.integrate(&grid.sample(|t| q.eval(t) * g0(t)));
    let mut errs = Vec::new();
    for eps in [1e-2, 5e-3, 2.5e-3] {
        let d = DensityOnGrid::from_fn(grid.clone(), |t| q.eval(t) * (1.0 + eps * (g0(t) - mean))).unwrap();
        let h = HMinusOneElement::from_difference(&d, &q, &grid);
        let (_, second) = m.projection_expansion(psi0, &h).unwrap();
        let exact = m.project(&d, psi0).unwrap();
        errs.push(angle_difference(exact, second).abs());
    }
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    Outcome {
        pass: ratios.iter().all(|r| (6.0..=10.0).contains(r)),
        detail: format!(
            "errors [{}], halving ratios [{}]",
            errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", "),
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", ")
        ),
        numbers: errs.into_iter().chain(ratios).collect(),
    }
}

fn criterion_6() -> Outcome {
    let cfg = ScalingConfig::new(2.0, vec![250, 500, 1000, 2000, 4000], 20, SEED);
    let t = experiments::fluctuation_scaling(&cfg).unwrap();
    let worst_pde = t.rows.iter().map(|r| r.pde_scaled).fold(0.0, f64::max);
    let means: Vec<String> = t.rows.iter().map(|r| format!("{:.4e}", r.mean_distance)).collect();
    let mut numbers = vec![t.slope, t.slope_stderr];
    numbers.extend(t.rows.iter().flat_map(|r| [r.mean_distance, r.distance_stderr, r.pde_distance]));
    Outcome {
        pass: (t.slope + 0.5).abs() <= 0.1 && t.monotone && worst_pde <= 5.0,
        detail: format!(
            "slope {:.4} ± {:.4}, mean distances [{}], monotone {}, max √N‖μ_N-p_1‖ = {worst_pde:.3}",
            t.slope,
            t.slope_stderr,
            means.join(", "),
            t.monotone
        ),
        numbers,
    }
}

fn criterion_7() -> Outcome {
    let cfg = DiffusionConfig::new(2.0, 1000, 1.0, 1e-3, 100, SEED);
    let e = experiments::phase_diffusion_experiment(&cfg).unwrap();
    let band = (3.0 * e.stderr).max(0.15 * e.target);
    let d_ok = (e.d_hat - e.target).abs() <= band;
    let drift_ok = e.drift_mean.abs() <= 3.0 * e.drift_stderr;
    let r2_ok = e.r_squared >= 0.95;
    let lag_bound = 3.0 / (e.lag1_samples as f64).sqrt();
    let lag_ok = e.lag1_autocorrelation.abs() <= lag_bound;
    let mut numbers = vec![e.slope, e.d_hat, e.stderr, e.drift_mean, e.drift_stderr, e.r_squared, e.lag1_autocorrelation];
    numbers.extend(&e.variance);
    Outcome {
        pass: d_ok && drift_ok && r2_ok && lag_ok && e.excluded_paths == 0,
        detail: format!(
            "D_hat = {:.4} ± {:.4} vs D_K = {:.4} (|Δ| = {:.4}, allowed {band:.4}); drift {:.4} ± {:.4}; R² = {:.4}; \
             lag-1 {:.4} (bound {lag_bound:.4}); excluded {}",
            e.d_hat,
            e.stderr,
            e.target,
            (e.d_hat - e.target).abs(),
            e.drift_mean,
            e.drift_stderr,
            e.r_squared,
            e.lag1_autocorrelation,
            e.excluded_paths
        ),
        numbers,
    }
}

type Criterion = fn() -> Outcome;

const CRITERIA: [(&str, Criterion); 7] = [
    ("fixed point and constants", criterion_1),
    ("tangent-norm triple identity", criterion_2),
    ("spectrum", criterion_3),
    ("PDE dynamics", criterion_4),
    ("projection expansion", criterion_5),
    ("fluctuation scaling", criterion_6),
    ("phase diffusion", criterion_7),
];

fn selected() -> Vec<usize> {
    match std::env::var("ACCEPTANCE_ONLY") {
        Ok(list) => list.split(',').filter_map(|s| s.trim().parse().ok()).collect(),
        Err(_) => (1..=CRITERIA.len()).collect(),
    }
}

fn run_all(threads: usize, report: bool) -> (Vec<bool>, Vec<Vec<f64>>) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let mut passes = Vec::new();
    let mut numbers = Vec::new();
    let only = selected();
    for (i, (name, f)) in CRITERIA.iter().enumerate().filter(|(i, _)| only.contains(&(i + 1))) {
        let start = Instant::now();
        let o = pool.install(f);
        if report {
            println!(
                "{} criterion {} ({name}): {} [{:.1}s]",
                if o.pass { "PASS" } else { "FAIL" },
                i + 1,
                o.detail,
                start.elapsed().as_secs_f64()
            );
        }
        passes.push(o.pass);
        numbers.push(o.numbers);
    }
    (passes, numbers)
}

fn main() {
    let (mut passes, first) = run_all(1, true);
    let (_, second) = run_all(3, false);
    let mismatched: Vec<usize> = first
        .iter()
        .zip(&second)
        .enumerate()
        .filter(|(_, (a, b))| a.len() != b.len() || a.iter().zip(*b).any(|(x, y)| x.to_bits() != y.to_bits()))
        .map(|(i, _)| selected()[i])
        .collect();
    let total: usize = first.iter().map(Vec::len).sum();
    let ok = mismatched.is_empty();
    println!(
        "{} criterion 8 (determinism): {total} numbers from criteria {:?} compared across two runs on 1 and 3 threads; mismatches in {:?}",
        if ok { "PASS" } else { "FAIL" },
        selected(),
        mismatched
    );
    passes.push(ok);
    let failed = passes.iter().filter(|p| !**p).count();
    println!("{} of {} criteria passed", passes.len() - failed, passes.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
