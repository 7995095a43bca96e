//! Spectrum of the linearization `L_q u = ½u'' - (u J∗q + q J∗u)'` at a point
//! `q = q_ψ` of the stationary manifold.
//!
//! `L_q` is self-adjoint in `H_{-1,1/q}`, so a Galerkin discretization on the
//! mean-zero trigonometric functions yields a symmetric pencil
//! `A a = λ G a` with Gram matrix `G_ij = (φ_i, φ_j)_{-1,1/q}` and stiffness
//! `A_ij = (φ_i, -L_q φ_j)_{-1,1/q}`. The stiffness is assembled through the
//! flux form `∫ L_q φ = ½φ' - φ J∗q - q J∗φ`, with `J∗q = -Kr sin(θ - ψ)` and
//! `J∗u = -K (sin θ ∫u cos - cos θ ∫u sin)`.
//!
//! The basis `k cos k(θ-ψ)`, `k sin k(θ-ψ)` splits into the even and odd parts
//! about `ψ`, which the pencil never mixes, so eigenvectors have exact parity.

use crate::error::{Error, Result};
use crate::grid::CircleGrid;
use crate::hilbert::{HMinusOneElement, Weight};
use crate::output::write_columns;
use crate::stationary::{CouplingStrength, StationaryProfile};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use std::f64::consts::PI;
use std::io::Write;

/// Smallest admissible number of Fourier modes.
pub const MIN_MODES: usize = 16;

/// Parity about the center `ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> i32 {
        match self {
            Parity::Even => 1,
            Parity::Odd => -1,
        }
    }
}

/// Galerkin matrices of `-L_q` and of the `H_{-1,1/q}` inner product.
#[derive(Debug, Clone)]
pub struct OperatorAssembly {
    profile: StationaryProfile,
    modes: usize,
    grid: CircleGrid,
    weight: Weight,
    /// Basis values, one column per basis function; columns `0..M` are the
    /// cosines `k = 1..M`, columns `M..2M` the sines.
    basis: DMatrix<f64>,
    /// Primitives of the basis functions (not centered).
    primitives: DMatrix<f64>,
    pub gram: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
}

fn basis_index(modes: usize, k: usize, parity: Parity) -> usize {
    match parity {
        Parity::Even => k - 1,
        Parity::Odd => modes + k - 1,
    }
}

/// Assembles `G` and `A` for `q_ψ` with `M` modes on a grid of at least `8M` nodes.
pub fn assemble(coupling: CouplingStrength, modes: usize, psi: f64) -> Result<OperatorAssembly> {
    if !coupling.is_supercritical() {
        return Err(Error::Domain(format!(
            "linearization needs K > 1, got {}",
            coupling.value()
        )));
    }
    if modes < MIN_MODES {
        return Err(Error::Config(format!(
            "need at least {MIN_MODES} modes, got {modes}"
        )));
    }
    let q = StationaryProfile::new(coupling, psi)?;
    let grid = CircleGrid::new(
        (8 * modes)
            .next_power_of_two()
            .max(CircleGrid::DEFAULT_POINTS),
    )?;
    assemble_on(q, modes, grid)
}

fn assemble_on(q: StationaryProfile, modes: usize, grid: CircleGrid) -> Result<OperatorAssembly> {
    let n = grid.len();
    let dim = 2 * modes;
    let psi = q.psi();
    let kc = q.coupling().value();
    let weight = Weight::inverse_profile(&grid, &q);
    let mut basis = DMatrix::zeros(n, dim);
    let mut primitives = DMatrix::zeros(n, dim);
    let mut deriv = DMatrix::zeros(n, dim);
    for (i, t) in grid.nodes().enumerate() {
        for k in 1..=modes {
            let kf = k as f64;
            let (s, c) = (kf * (t - psi)).sin_cos();
            let ce = basis_index(modes, k, Parity::Even);
            let so = basis_index(modes, k, Parity::Odd);
            basis[(i, ce)] = kf * c;
            basis[(i, so)] = kf * s;
            primitives[(i, ce)] = s;
            primitives[(i, so)] = -c;
            deriv[(i, ce)] = -kf * kf * s;
            deriv[(i, so)] = kf * kf * c;
        }
    }
    let h = grid.spacing();
    // ∫ φ_j cos θ and ∫ φ_j sin θ
    let cos_t = DVector::from_iterator(n, grid.nodes().map(f64::cos));
    let sin_t = DVector::from_iterator(n, grid.nodes().map(f64::sin));
    let mc = basis.tr_mul(&cos_t) * h;
    let ms = basis.tr_mul(&sin_t) * h;
    let jq = DVector::from_iterator(n, grid.nodes().map(|t| -kc * q.r() * (t - psi).sin()));
    let qv = DVector::from_iterator(n, grid.nodes().map(|t| q.eval(t)));
    // flux form of L φ_j, one column per basis function
    let mut flux = DMatrix::zeros(n, dim);
    for j in 0..dim {
        for (i, t) in grid.nodes().enumerate() {
            let jphi = -kc * (t.sin() * mc[j] - t.cos() * ms[j]);
            flux[(i, j)] = 0.5 * deriv[(i, j)] - basis[(i, j)] * jq[i] - qv[i] * jphi;
        }
    }
    let centered = center_columns(&primitives, &weight, h);
    let flux_c = center_columns(&flux, &weight, h);
    let w = DVector::from_column_slice(weight.values());
    let weighted = DMatrix::from_fn(n, dim, |i, j| w[i] * centered[(i, j)] * h);
    let gram = symmetrize(&weighted.tr_mul(&centered));
    let stiffness_raw = -(weighted.tr_mul(&flux_c));
    Ok(OperatorAssembly {
        profile: q,
        modes,
        grid,
        weight,
        basis,
        primitives,
        gram,
        stiffness: stiffness_raw,
    })
}

fn center_columns(m: &DMatrix<f64>, weight: &Weight, h: f64) -> DMatrix<f64> {
    let w = weight.values();
    let total: f64 = w.iter().sum::<f64>() * h;
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let wu: f64 = col.iter().zip(w).map(|(u, wi)| u * wi).sum::<f64>() * h;
        let shift = wu / total;
        col.iter_mut().for_each(|u| *u -= shift);
    }
    out
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

impl OperatorAssembly {
    pub fn profile(&self) -> &StationaryProfile {
        &self.profile
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn grid(&self) -> &CircleGrid {
        &self.grid
    }

    /// `‖A - Aᵀ‖ / ‖A‖`, i.e. the failure of `L_q` to be `G`-symmetric.
    pub fn symmetry_defect(&self) -> f64 {
        (&self.stiffness - self.stiffness.transpose()).norm() / self.stiffness.norm()
    }

    /// The same stiffness from `½∫φ_iφ_j/q - K Σ (∫φ_i e)(∫φ_j e)` over `e = cos, sin`.
    pub fn closed_form_stiffness(&self) -> DMatrix<f64> {
        let h = self.grid.spacing();
        let n = self.grid.len();
        let w = self.weight.values();
        let kc = self.profile.coupling().value();
        let weighted =
            DMatrix::from_fn(n, self.basis.ncols(), |i, j| w[i] * self.basis[(i, j)] * h);
        let cos_t = DVector::from_iterator(n, self.grid.nodes().map(f64::cos));
        let sin_t = DVector::from_iterator(n, self.grid.nodes().map(f64::sin));
        let mc = self.basis.tr_mul(&cos_t) * h;
        let ms = self.basis.tr_mul(&sin_t) * h;
        weighted.tr_mul(&self.basis) * 0.5 - (&mc * mc.transpose() + &ms * ms.transpose()) * kc
    }

    /// Coefficients of `q_ψ'` in the basis.
    pub fn tangent_coefficients(&self) -> DVector<f64> {
        let mut b = DVector::zeros(2 * self.modes);
        for (k, a) in self.profile.bessel_ratios().iter().enumerate().skip(1) {
            if k <= self.modes {
                // q' = -(1/π) Σ a_k k sin k(θ-ψ) and the basis carries the factor k
                b[basis_index(self.modes, k, Parity::Odd)] = -a / PI;
            }
        }
        b
    }

    /// `‖L_q q'‖_{-1,1/q}` for the Galerkin operator `-G⁻¹A`.
    pub fn tangent_residual(&self) -> Result<f64> {
        let b = self.tangent_coefficients();
        let ab = &self.stiffness * &b;
        let chol =
            self.gram.clone().cholesky().ok_or_else(|| {
                Error::LinearAlgebra("Gram matrix is not positive definite".into())
            })?;
        let x = chol.solve(&ab);
        Ok(ab.dot(&x).max(0.0).sqrt())
    }

    /// Values on the grid of the function with coefficients `a`.
    pub fn evaluate(&self, a: &DVector<f64>) -> Vec<f64> {
        (&self.basis * a).iter().copied().collect()
    }

    /// `H_{-1}` element with coefficients `a`.
    pub fn element(&self, a: &DVector<f64>) -> HMinusOneElement {
        let p: Vec<f64> = (&self.primitives * a).iter().copied().collect();
        HMinusOneElement::from_primitive(self.grid.clone(), p).expect("grid sizes agree")
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }
}

/// Eigenpairs of `-L_q`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    assembly: OperatorAssembly,
    pub eigenvalues: Vec<f64>,
    pub parity: Vec<Parity>,
    /// `G`-orthonormal eigenvectors, one column per eigenvalue.
    pub vectors: DMatrix<f64>,
}

/// Solves the pencil one parity block at a time and merges in ascending order.
pub fn eigensolve(assembly: OperatorAssembly) -> Result<SpectralDecomposition> {
    let m = assembly.modes;
    let mut pairs: Vec<(f64, Parity, DVector<f64>)> = Vec::with_capacity(2 * m);
    for parity in [Parity::Even, Parity::Odd] {
        let off = basis_index(m, 1, parity);
        let g = assembly.gram.view((off, off), (m, m)).into_owned();
        let a = symmetrize(&assembly.stiffness.view((off, off), (m, m)).into_owned());
        let chol = g.clone().cholesky().ok_or_else(|| {
            let smallest = g.diagonal().min();
            Error::LinearAlgebra(format!(
                "{parity:?} Gram block is not positive definite (smallest diagonal {smallest:e}); raise the resolution"
            ))
        })?;
        let l = chol.l();
        let x = l
            .solve_lower_triangular(&a)
            .ok_or_else(|| Error::LinearAlgebra("singular Cholesky factor".into()))?;
        let c = l
            .solve_lower_triangular(&x.transpose())
            .ok_or_else(|| Error::LinearAlgebra("singular Cholesky factor".into()))?;
        let eig = SymmetricEigen::new(symmetrize(&c));
        let vecs = l
            .transpose()
            .solve_upper_triangular(&eig.eigenvectors)
            .ok_or_else(|| Error::LinearAlgebra("singular Cholesky factor".into()))?;
        for (i, lambda) in eig.eigenvalues.iter().enumerate() {
            let mut full = DVector::zeros(2 * m);
            full.rows_mut(off, m).copy_from(&vecs.column(i));
            pairs.push((*lambda, parity, full));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut vectors = DMatrix::zeros(2 * m, 2 * m);
    let mut eigenvalues = Vec::with_capacity(2 * m);
    let mut parity = Vec::with_capacity(2 * m);
    for (j, (lambda, p, mut v)) in pairs.into_iter().enumerate() {
        // even: e(ψ) >= 0; odd: e'(ψ) >= 0
        let probe: f64 = (1..=m)
            .map(|k| {
                let kf = k as f64;
                match p {
                    Parity::Even => kf * v[basis_index(m, k, Parity::Even)],
                    Parity::Odd => kf * kf * v[basis_index(m, k, Parity::Odd)],
                }
            })
            .sum();
        let probe = if probe.abs() > 1e-12 * v.amax() {
            probe
        } else {
            v[v.iamax()]
        };
        if probe < 0.0 {
            v = -v;
        }
        vectors.set_column(j, &v);
        eigenvalues.push(lambda);
        parity.push(p);
    }
    Ok(SpectralDecomposition {
        assembly,
        eigenvalues,
        parity,
        vectors,
    })
}

/// One row of the large-`p` comparison.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AsymptoticRow {
    pub p: usize,
    pub index: usize,
    pub lambda: f64,
    pub partner: f64,
    /// `p²/2 - K²r²/8`.
    pub predicted: f64,
    pub residual: f64,
    /// `p²/2 + K²r²/4`.
    pub predicted_alt: f64,
    pub residual_alt: f64,
    /// Relative `L²` distance of `e_index` from `span{√q v₁, √q v₂}`.
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AsymptoticsReport {
    /// Index offset `l₀` fitted so that `λ_{l₀+2p}` sits nearest `p²/2`.
    pub l0: i64,
    pub rows: Vec<AsymptoticRow>,
    /// True when the largest requested index is within a quarter of the basis size.
    pub resolved: bool,
}

impl SpectralDecomposition {
    pub fn assembly(&self) -> &OperatorAssembly {
        &self.assembly
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn coefficients(&self, j: usize) -> DVector<f64> {
        self.vectors.column(j).into_owned()
    }

    /// `e_j` on the assembly grid.
    pub fn eigenfunction(&self, j: usize) -> Vec<f64> {
        self.assembly.evaluate(&self.coefficients(j))
    }

    pub fn element(&self, j: usize) -> HMinusOneElement {
        self.assembly.element(&self.coefficients(j))
    }

    /// `|cos|` between `e_0` and `q'` in `H_{-1,1/q}`.
    pub fn tangent_alignment(&self) -> f64 {
        let b = self.assembly.tangent_coefficients();
        let a = self.coefficients(0);
        let g = &self.assembly.gram;
        let ab = a.dot(&(g * &b));
        let aa = a.dot(&(g * &a));
        let bb = b.dot(&(g * &b));
        ab.abs() / (aa * bb).sqrt()
    }

    /// Adjoint eigenfunctions `f_j`: `f_j' = -ℰ_j/q` with `ℰ_j` the primitive of
    /// `e_j` satisfying `∫ℰ_j/q = 0`, and `∫ f_j = 0`.
    pub fn adjoint_eigenfunction(&self, j: usize) -> Vec<f64> {
        let grid = &self.assembly.grid;
        let e = self.element(j).centered_primitive(&self.assembly.weight);
        let fprime: Vec<f64> = e
            .iter()
            .zip(self.assembly.weight.values())
            .map(|(ej, w)| -ej * w)
            .collect();
        let f = grid.periodic_primitive(&fprime);
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        f.into_iter().map(|v| v - mean).collect()
    }

    /// `e^{s L_q} u = Σ_l e^{-sλ_l} (e_l, u) e_l` over the resolved spectrum.
    pub fn semigroup_apply(&self, s: f64, u: &HMinusOneElement) -> Result<HMinusOneElement> {
        if !(s >= 0.0) {
            return Err(Error::Domain(format!(
                "semigroup time must be >= 0, got {s}"
            )));
        }
        if u.grid() != &self.assembly.grid {
            return Err(Error::Config("element lives on a different grid".into()));
        }
        let w = &self.assembly.weight;
        let mut coeffs = DVector::zeros(self.len());
        for (l, lambda) in self.eigenvalues.iter().enumerate() {
            let c = self.element(l).inner(u, w)?;
            coeffs += self.coefficients(l) * (c * (-s * lambda).exp());
        }
        Ok(self.assembly.element(&coeffs))
    }

    /// Compares `λ_{l₀+2p}` with the large-`p` expansion for every `p` in `ps`.
    pub fn asymptotics_report(&self, ps: &[usize]) -> AsymptoticsReport {
        let q = &self.assembly.profile;
        let kr = q.coupling().value() * q.r();
        let pmax = ps.iter().copied().max().unwrap_or(0);
        // fit l₀ on the largest requested p
        let l0 = (-4i64..=4)
            .filter(|l| l + 2 * pmax as i64 + 1 < self.len() as i64 && l + 2 * pmax as i64 >= 0)
            .min_by(|a, b| {
                let da = (self.eigenvalues[(a + 2 * pmax as i64) as usize]
                    - 0.5 * (pmax * pmax) as f64)
                    .abs();
                let db = (self.eigenvalues[(b + 2 * pmax as i64) as usize]
                    - 0.5 * (pmax * pmax) as f64)
                    .abs();
                da.total_cmp(&db)
            })
            .unwrap_or(0);
        let rows = ps
            .iter()
            .filter_map(|&p| {
                let idx = l0 + 2 * p as i64;
                if idx < 0 || idx as usize + 1 >= self.len() {
                    return None;
                }
                let index = idx as usize;
                let lambda = self.eigenvalues[index];
                let base = 0.5 * (p * p) as f64;
                let predicted = base - kr * kr / 8.0;
                let predicted_alt = base + kr * kr / 4.0;
                Some(AsymptoticRow {
                    p,
                    index,
                    lambda,
                    partner: self.eigenvalues[index + 1],
                    predicted,
                    residual: (lambda - predicted).abs(),
                    predicted_alt,
                    residual_alt: (lambda - predicted_alt).abs(),
                    defect: self.defect(index, p, kr),
                })
            })
            .collect();
        let resolved = (l0 + 2 * pmax as i64 + 1) as usize <= self.len() / 2;
        if !resolved {
            log::warn!(
                "index {} is close to the truncation; raise the number of modes",
                l0 + 2 * pmax as i64 + 1
            );
        }
        AsymptoticsReport { l0, rows, resolved }
    }

    fn defect(&self, index: usize, p: usize, kr: f64) -> f64 {
        let grid = &self.assembly.grid;
        let q = &self.assembly.profile;
        let psi = q.psi();
        let pf = p as f64;
        let e = self.eigenfunction(index);
        let bracket = |t: f64| 0.5 * kr * t.sin() + kr * kr / 8.0 * (2.0 * t).sin();
        let v1: Vec<f64> = grid
            .nodes()
            .map(|t| {
                let u = t - psi;
                q.eval(t).sqrt() * ((pf * u).cos() - (pf * u).sin() / pf * bracket(u))
            })
            .collect();
        let v2: Vec<f64> = grid
            .nodes()
            .map(|t| {
                let u = t - psi;
                q.eval(t).sqrt() * ((pf * u).sin() + (pf * u).cos() / pf * bracket(u))
            })
            .collect();
        let n = grid.len();
        let basis = DMatrix::from_fn(n, 2, |i, j| if j == 0 { v1[i] } else { v2[i] });
        let target = DVector::from_column_slice(&e);
        let gtg = basis.tr_mul(&basis);
        let rhs = basis.tr_mul(&target);
        let coef = gtg.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(2));
        let resid = &target - &basis * coef;
        resid.norm() / target.norm()
    }

    /// CSV with columns `j, lambda, parity, pair` where `pair = ⌊(j - l₀)/2⌋`.
    pub fn write_spectrum_csv<W: Write>(&self, w: W, l0: i64) -> Result<()> {
        let j: Vec<f64> = (0..self.len()).map(|j| j as f64).collect();
        let parity: Vec<f64> = self.parity.iter().map(|p| p.sign() as f64).collect();
        let pair: Vec<f64> = (0..self.len() as i64)
            .map(|j| (j - l0).div_euclid(2) as f64)
            .collect();
        write_columns(
            w,
            &["j", "lambda", "parity", "pair"],
            &[&j, &self.eigenvalues, &parity, &pair],
        )
    }

    /// CSV with columns `theta, e, f` for eigenpair `j`.
    pub fn write_eigenfunction_csv<W: Write>(&self, w: W, j: usize) -> Result<()> {
        let theta: Vec<f64> = self.assembly.grid.nodes().collect();
        write_columns(
            w,
            &["theta", "e", "f"],
            &[
                &theta,
                &self.eigenfunction(j),
                &self.adjoint_eigenfunction(j),
            ],
        )
    }
}

/// `assemble` followed by `eigensolve`.
pub fn decompose(
    coupling: CouplingStrength,
    modes: usize,
    psi: f64,
) -> Result<SpectralDecomposition> {
    eigensolve(assemble(coupling, modes, psi)?)
}
