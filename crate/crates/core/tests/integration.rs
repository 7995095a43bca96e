use proptest::prelude::*;
use rotators::experiments::{self, DiffusionConfig};
use rotators::grid::CircleGrid;
use rotators::hilbert::Weight;
use rotators::pde;
use rotators::spectral;
use rotators::CouplingStrength;

fn k(v: f64) -> CouplingStrength {
    CouplingStrength::new(v).unwrap()
}

#[test]
fn flow_relaxes_at_the_spectral_gap() {
    for kv in [1.5, 3.0] {
        let kk = k(kv);
        let grid = CircleGrid::new(512).unwrap();
        let lambda1 = spectral::decompose(kk, 48, 0.0).unwrap().eigenvalues[1];
        let p0 = experiments::comparison_density(48);
        let t_end = 12.0 / lambda1;
        let (_, rows) = pde::trajectory(p0, kk, t_end, 1e-3, 100, &grid).unwrap();
        let rate = pde::fitted_decay_rate(&rows, 0.4 * t_end, 0.8 * t_end).unwrap();
        assert!((rate / lambda1 - 1.0).abs() < 0.05, "K={kv}: {rate} vs {lambda1}");
    }
}

#[test]
fn diffusion_estimate_does_not_depend_on_the_step() {
    let run = |dt: f64| {
        let mut c = DiffusionConfig::new(2.0, 100, 0.5, dt, 40, 17);
        c.bootstrap = 200;
        experiments::phase_diffusion_experiment(&c).unwrap()
    };
    let a = run(1e-2);
    let b = run(5e-3);
    let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    assert!((a.d_hat - b.d_hat).abs() <= 3.0 * se, "{} {} {se}", a.d_hat, b.d_hat);
}

#[test]
fn spectrum_csv_lists_every_eigenvalue() {
    let dec = spectral::decompose(k(2.0), 16, 0.0).unwrap();
    let mut buf = Vec::new();
    dec.write_spectrum_csv(&mut buf, -2).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1 + 32);
    assert!(text.starts_with("j,lambda,parity,pair\n"));
    let mut buf = Vec::new();
    dec.write_eigenfunction_csv(&mut buf, 1).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 512);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn spectrum_is_rotation_covariant_with_simple_kernel(kv in 1.2f64..4.0, psi in 0.0f64..6.28) {
        let a = spectral::decompose(k(kv), 24, 0.0).unwrap();
        let b = spectral::decompose(k(kv), 24, psi).unwrap();
        prop_assert!(a.eigenvalues[0].abs() < 1e-8);
        prop_assert!(a.eigenvalues[1] > 1e-6);
        for j in 0..20 {
            prop_assert!((a.eigenvalues[j] - b.eigenvalues[j]).abs() < 1e-8 * a.eigenvalues[j].max(1.0));
        }
    }

    #[test]
    fn semigroup_contracts_off_the_kernel(s in 0.05f64..3.0, w1 in -1.0f64..1.0, w2 in -1.0f64..1.0, w3 in -1.0f64..1.0) {
        let dec = spectral::decompose(k(2.0), 24, 0.0).unwrap();
        let asm = dec.assembly();
        let w: &Weight = asm.weight();
        let coeffs = dec.coefficients(1) * w1 + dec.coefficients(2) * w2 + dec.coefficients(6) * w3;
        prop_assume!(coeffs.norm() > 1e-3);
        let u = asm.element(&coeffs);
        let out = dec.semigroup_apply(s, &u).unwrap();
        let bound = (-dec.eigenvalues[1] * s).exp() * u.norm(w).unwrap();
        prop_assert!(out.norm(w).unwrap() <= bound * (1.0 + 1e-9) + 1e-12);
    }
}
