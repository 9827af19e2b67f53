//! Exact evolution of finite discrete models: the full propagator, the
//! restricted amplitude matrix A(t), the exact effective Hamiltonian
//! `H(t) = i Adot A^{-1}`, and comparison tables against the subspace
//! module's approximants.

use crate::error::{Error, Result};
use crate::subspace::{
    self, CMatrix, FiniteLevelModel, SubspaceEffectiveHamiltonian,
};
use num_complex::Complex64 as C64;

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone)]
pub struct PropagatorSample {
    pub t: f64,
    pub u: CMatrix,
}

#[derive(Debug, Clone)]
pub struct AmplitudeMatrix {
    pub t: f64,
    pub a: CMatrix,
    pub adot: CMatrix,
}

#[derive(Debug, Clone)]
pub struct ExactHeffSample {
    pub t: f64,
    pub h: SubspaceEffectiveHamiltonian,
    /// Condition number of A(t); spikes mark the transition region.
    pub condition: f64,
}

/// Eigendecomposition of a discrete model, cached once; all per-t
/// evaluations are pure functions of it.
#[derive(Debug, Clone)]
pub struct ExactEvolution {
    model: FiniteLevelModel,
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
}

impl ExactEvolution {
    pub fn new(model: FiniteLevelModel) -> Result<Self> {
        if model.is_continuum() {
            return Err(Error::Domain(
                "exact evolution needs a discrete model".into(),
            ));
        }
        let eig = crate::linalg::hermitian_eigen(model.hamiltonian());
        Ok(Self {
            model,
            eigenvalues: eig.values.iter().copied().collect(),
            eigenvectors: eig.vectors,
        })
    }

    pub fn model(&self) -> &FiniteLevelModel {
        &self.model
    }

    /// `V diag(f(E_k)) V^dag`.
    fn spectral_function(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let dim = self.model.dim();
        let mut middle = self.eigenvectors.clone();
        for c in 0..dim {
            let scale = f(self.eigenvalues[c]);
            for r in 0..dim {
                middle[(r, c)] *= scale;
            }
        }
        &middle * self.eigenvectors.adjoint()
    }

    pub fn propagator(&self, t: f64) -> PropagatorSample {
        PropagatorSample {
            t,
            u: self.spectral_function(|e| (-I * e * t).exp()),
        }
    }

    fn restrict(&self, full: &CMatrix) -> CMatrix {
        let idx = self.model.subspace_indices();
        let n = idx.len();
        let mut out = CMatrix::zeros(n, n);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out[(a, b)] = full[(i, j)];
            }
        }
        out
    }

    /// A = P U(t) P and Adot = -i P H U(t) P, both analytic in t.
    pub fn amplitude_matrix(&self, t: f64) -> AmplitudeMatrix {
        let u = self.spectral_function(|e| (-I * e * t).exp());
        let hu = self.spectral_function(|e| -I * e * (-I * e * t).exp());
        AmplitudeMatrix {
            t,
            a: self.restrict(&u),
            adot: self.restrict(&hu),
        }
    }

    /// `H(t) = i Adot A^{-1}` by a pivoted solve against Adot, with the
    /// condition number of A reported. Singular A (the transition
    /// region) is an error, not a number.
    pub fn exact_heff(&self, t: f64) -> Result<ExactHeffSample> {
        let am = self.amplitude_matrix(t);
        let svd = am.a.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(smin > 1e-12 * smax) {
            return Err(Error::SingularAmplitude { t, cond: condition });
        }
        // solve H A = i Adot as A^T H^T = i Adot^T
        let rhs = am.adot.transpose() * I;
        let ht = am
            .a
            .transpose()
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularAmplitude { t, cond: condition })?;
        Ok(ExactHeffSample {
            t,
            h: SubspaceEffectiveHamiltonian::new(ht.transpose()),
            condition,
        })
    }
}

/// One grid row of the approximation-error table. Errors are spectral
/// norms against the exact effective Hamiltonian; rows where A(t) is
/// singular carry NaN errors and the flag.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub t: f64,
    pub err_php: f64,
    pub err_v1: f64,
    pub err_vinf: f64,
    pub err_loy: Option<f64>,
    pub singular: bool,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    /// Context for the smallness condition behind the first-order series.
    pub max_norm_l: f64,
}

fn spectral_norm(m: &CMatrix) -> f64 {
    m.clone().singular_values().max()
}

/// Tabulate the distance of each approximant {PHP, PHP + V(t),
/// PHP + V(inf), LOY limit where PHP is fully degenerate} from the exact
/// effective Hamiltonian over a uniform grid starting at 0.
pub fn compare_approximations(
    m: &FiniteLevelModel,
    t_grid: &[f64],
) -> Result<ComparisonReport> {
    let evo = ExactEvolution::new(m.clone())?;
    let blocks = m.blocks();
    let projectors =
        subspace::eigenprojectors(&blocks.php, subspace::default_group_tol(&blocks.php))?;
    let vinf = subspace::v_parallel_inf(m, &projectors, None)?;
    let h_vinf = &blocks.php + &vinf.v;
    // the LOY reduction assumes a fully degenerate PHP
    let loy_applicable = projectors.groups.len() == 1;
    let series = subspace::kernel_series(m, t_grid, 0)?;
    let max_norm_l = series
        .samples
        .iter()
        .fold(0.0f64, |acc, s| acc.max(s.norm_l));

    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let v1 = subspace::v_parallel_t(m, t, &projectors)?;
        let h_v1 = &blocks.php + &v1;
        match evo.exact_heff(t) {
            Ok(sample) => {
                let exact = &sample.h.matrix;
                rows.push(ComparisonRow {
                    t,
                    err_php: spectral_norm(&(exact - &blocks.php)),
                    err_v1: spectral_norm(&(exact - &h_v1)),
                    err_vinf: spectral_norm(&(exact - &h_vinf)),
                    err_loy: loy_applicable.then(|| spectral_norm(&(exact - &h_vinf))),
                    singular: false,
                });
            }
            Err(Error::SingularAmplitude { .. }) => rows.push(ComparisonRow {
                t,
                err_php: f64::NAN,
                err_v1: f64::NAN,
                err_vinf: f64::NAN,
                err_loy: loy_applicable.then_some(f64::NAN),
                singular: true,
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(ComparisonReport { rows, max_norm_l })
}
