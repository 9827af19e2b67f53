//! Reduction of the total evolution to an n-dimensional subspace: block
//! decomposition, eigenprojectors of PHP, the self-energy, the
//! first-order time-dependent potential and its long-time limit, the
//! explicit two-level matrix elements, and the kernel/series machinery.

use crate::error::{Error, Result};
use crate::quad;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

pub type CMatrix = DMatrix<C64>;

const I: C64 = C64::new(0.0, 1.0);

/// Coupling strength `g(E)` of one subspace state to a continuum
/// reservoir.
#[derive(Debug, Clone, PartialEq)]
pub enum CouplingShape {
    /// `|g(E)|^2 = gamma / 2 pi` on `[emin, emin + cutoff]`.
    Flat { gamma: f64, cutoff: f64 },
    /// Piecewise-linear `g(E)` through sorted `(E, g)` nodes, zero outside.
    Tabulated(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumReservoir {
    pub emin: f64,
    /// One coupling function per subspace state.
    pub couplings: Vec<CouplingShape>,
}

impl ContinuumReservoir {
    pub fn g(&self, j: usize, e: f64) -> f64 {
        match &self.couplings[j] {
            CouplingShape::Flat { gamma, cutoff } => {
                if e >= self.emin && e <= self.emin + cutoff {
                    (gamma / (2.0 * std::f64::consts::PI)).sqrt()
                } else {
                    0.0
                }
            }
            CouplingShape::Tabulated(nodes) => {
                if nodes.is_empty() || e < nodes[0].0 || e > nodes[nodes.len() - 1].0 {
                    return 0.0;
                }
                let idx = nodes.partition_point(|&(x, _)| x <= e);
                if idx == 0 {
                    return nodes[0].1;
                }
                if idx == nodes.len() {
                    return nodes[nodes.len() - 1].1;
                }
                let (x0, y0) = nodes[idx - 1];
                let (x1, y1) = nodes[idx];
                y0 + (y1 - y0) * (e - x0) / (x1 - x0)
            }
        }
    }

    pub fn support(&self, j: usize) -> (f64, f64) {
        match &self.couplings[j] {
            CouplingShape::Flat { cutoff, .. } => (self.emin, self.emin + cutoff),
            CouplingShape::Tabulated(nodes) => (nodes[0].0, nodes[nodes.len() - 1].0),
        }
    }
}

/// Hermitian total Hamiltonian with a designated subspace (the P/Q
/// split). The reservoir is either the discrete Q block of `h` or an
/// explicit continuum.
#[derive(Debug, Clone)]
pub struct FiniteLevelModel {
    h: CMatrix,
    subspace: Vec<usize>,
    reservoir: Option<ContinuumReservoir>,
    hermitize_correction: f64,
}

/// The four sub-blocks of H in the ordered bases of P and Q.
#[derive(Debug, Clone)]
pub struct Blocks {
    pub php: CMatrix,
    pub phq: CMatrix,
    pub qhq: CMatrix,
    pub qhp: CMatrix,
    pub q_indices: Vec<usize>,
}

impl FiniteLevelModel {
    /// Discrete model: full Hermitian `h` with `subspace` basis indices
    /// defining P. `h` is symmetrized at construction and the applied
    /// correction norm recorded.
    pub fn discrete(h: CMatrix, subspace: Vec<usize>) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::Domain("hamiltonian must be square".into()));
        }
        let dim = h.nrows();
        if subspace.is_empty() || subspace.len() >= dim + 1 {
            return Err(Error::Domain("subspace must be nonempty and within range".into()));
        }
        let mut seen = vec![false; dim];
        for &j in &subspace {
            if j >= dim {
                return Err(Error::Domain(format!("subspace index {j} out of range")));
            }
            if seen[j] {
                return Err(Error::Domain(format!("duplicate subspace index {j}")));
            }
            seen[j] = true;
        }
        let herm = (&h + h.adjoint()) * C64::new(0.5, 0.0);
        let correction = (&h - &herm).norm();
        Ok(Self { h: herm, subspace, reservoir: None, hermitize_correction: correction })
    }

    /// Continuum model: `php` is the full discrete part (P = everything);
    /// the reservoir is described by per-state coupling functions.
    pub fn with_continuum(
        php: CMatrix,
        emin: f64,
        couplings: Vec<CouplingShape>,
    ) -> Result<Self> {
        let n = php.nrows();
        if !php.is_square() {
            return Err(Error::Domain("PHP block must be square".into()));
        }
        if couplings.len() != n {
            return Err(Error::Domain(format!(
                "need one coupling per subspace state: {} != {n}",
                couplings.len()
            )));
        }
        let herm = (&php + php.adjoint()) * C64::new(0.5, 0.0);
        let correction = (&php - &herm).norm();
        Ok(Self {
            h: herm,
            subspace: (0..n).collect(),
            reservoir: Some(ContinuumReservoir { emin, couplings }),
            hermitize_correction: correction,
        })
    }

    /// Discrete quasi-continuum: `levels` reservoir states sampling flat
    /// couplings with a common band `[emin, emin + cutoff]`. Valid up to
    /// the recurrence time `2 pi / spacing`.
    pub fn quasi_continuum(
        php: CMatrix,
        emin: f64,
        cutoff: f64,
        gammas: &[f64],
        levels: usize,
    ) -> Result<Self> {
        let n = php.nrows();
        if gammas.len() != n {
            return Err(Error::Domain("need one coupling strength per subspace state".into()));
        }
        if levels < 2 || !(cutoff > 0.0) {
            return Err(Error::Domain("quasi-continuum needs >= 2 levels and a positive band".into()));
        }
        let de = cutoff / levels as f64;
        let dim = n + levels;
        let mut h = CMatrix::zeros(dim, dim);
        h.view_mut((0, 0), (n, n)).copy_from(&php);
        for r in 0..levels {
            let e = emin + (r as f64 + 0.5) * de;
            h[(n + r, n + r)] = C64::new(e, 0.0);
            for j in 0..n {
                let c = (gammas[j] / (2.0 * std::f64::consts::PI) * de).sqrt();
                h[(j, n + r)] = C64::new(c, 0.0);
                h[(n + r, j)] = C64::new(c, 0.0);
            }
        }
        Self::discrete(h, (0..n).collect())
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn n(&self) -> usize {
        self.subspace.len()
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.h
    }

    pub fn subspace_indices(&self) -> &[usize] {
        &self.subspace
    }

    pub fn reservoir(&self) -> Option<&ContinuumReservoir> {
        self.reservoir.as_ref()
    }

    pub fn is_continuum(&self) -> bool {
        self.reservoir.is_some()
    }

    pub fn hermitize_correction(&self) -> f64 {
        self.hermitize_correction
    }

    /// Block decomposition (PHP, PHQ, QHQ, QHP). For continuum models the
    /// Q blocks are empty.
    pub fn blocks(&self) -> Blocks {
        let n = self.n();
        let q_indices: Vec<usize> = (0..self.dim())
            .filter(|j| !self.subspace.contains(j))
            .collect();
        let m = q_indices.len();
        let mut php = CMatrix::zeros(n, n);
        let mut phq = CMatrix::zeros(n, m);
        let mut qhq = CMatrix::zeros(m, m);
        let mut qhp = CMatrix::zeros(m, n);
        for (a, &i) in self.subspace.iter().enumerate() {
            for (b, &j) in self.subspace.iter().enumerate() {
                php[(a, b)] = self.h[(i, j)];
            }
            for (b, &j) in q_indices.iter().enumerate() {
                phq[(a, b)] = self.h[(i, j)];
                qhp[(b, a)] = self.h[(j, i)];
            }
        }
        for (a, &i) in q_indices.iter().enumerate() {
            for (b, &j) in q_indices.iter().enumerate() {
                qhq[(a, b)] = self.h[(i, j)];
            }
        }
        Blocks { php, phq, qhq, qhp, q_indices }
    }

    /// Multiply the P-Q coupling blocks by `c` (continuum: scales the
    /// coupling functions, i.e. gamma by c^2).
    pub fn scale_coupling(&self, c: f64) -> Self {
        let mut out = self.clone();
        match &mut out.reservoir {
            Some(res) => {
                for shape in res.couplings.iter_mut() {
                    match shape {
                        CouplingShape::Flat { gamma, .. } => *gamma *= c * c,
                        CouplingShape::Tabulated(nodes) => {
                            for node in nodes.iter_mut() {
                                node.1 *= c;
                            }
                        }
                    }
                }
            }
            None => {
                let dim = self.dim();
                for i in 0..dim {
                    for j in 0..dim {
                        let pi = self.subspace.contains(&i);
                        let pj = self.subspace.contains(&j);
                        if pi != pj {
                            out.h[(i, j)] *= c;
                        }
                    }
                }
            }
        }
        out
    }

    /// Default regularization for discrete reservoirs: 3x the mean level
    /// spacing of QHQ. The t -> infinity limit exists only against a
    /// continuum; for discrete reservoirs the eta-regularized value is a
    /// stand-in.
    pub fn default_eta(&self) -> f64 {
        let blocks = self.blocks();
        let m = blocks.qhq.nrows();
        if m < 2 {
            return 1e-3 * (1.0 + blocks.qhq.norm());
        }
        let eig = crate::linalg::hermitian_eigen(&blocks.qhq);
        let mut vals: Vec<f64> = eig.values.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        let spread = vals[m - 1] - vals[0];
        if spread <= 0.0 {
            1e-3 * (1.0 + vals[0].abs())
        } else {
            3.0 * spread / (m - 1) as f64
        }
    }

    /// Recurrence time `2 pi / (mean level spacing)` of a discrete
    /// reservoir; comparisons against continuum behavior are meaningful
    /// only well below it.
    pub fn recurrence_time(&self) -> Option<f64> {
        if self.is_continuum() {
            return None;
        }
        let blocks = self.blocks();
        let m = blocks.qhq.nrows();
        if m < 2 {
            return None;
        }
        let eig = crate::linalg::hermitian_eigen(&blocks.qhq);
        let mut vals: Vec<f64> = eig.values.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        let spacing = (vals[m - 1] - vals[0]) / (m - 1) as f64;
        (spacing > 0.0).then(|| 2.0 * std::f64::consts::PI / spacing)
    }
}

/// Eigenvalues of PHP with orthogonal projectors, one per degeneracy
/// group.
#[derive(Debug, Clone)]
pub struct EigenprojectorSet {
    /// `(lambda_j, P_j)` sorted by eigenvalue.
    pub groups: Vec<(f64, CMatrix)>,
    pub group_tol: f64,
}

impl EigenprojectorSet {
    pub fn completeness_defect(&self, n: usize) -> f64 {
        let sum = self
            .groups
            .iter()
            .fold(CMatrix::zeros(n, n), |acc, (_, p)| acc + p);
        (sum - CMatrix::identity(n, n)).norm()
    }
}

/// Solve the eigenvalue problem for a Hermitian matrix and cluster
/// eigenvalues whose spread is below `group_tol` into shared projectors.
/// Handles nondegenerate, fully degenerate, and mixed spectra uniformly.
pub fn eigenprojectors(php: &CMatrix, group_tol: f64) -> Result<EigenprojectorSet> {
    if !php.is_square() {
        return Err(Error::Domain("PHP must be square".into()));
    }
    let n = php.nrows();
    let eig = crate::linalg::hermitian_eigen(php);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.values[a].total_cmp(&eig.values[b]));
    let mut groups: Vec<(f64, CMatrix)> = Vec::new();
    let mut k = 0;
    while k < n {
        let start = k;
        let first = eig.values[order[start]];
        while k < n && (eig.values[order[k]] - first).abs() < group_tol {
            k += 1;
        }
        let members = &order[start..k];
        let mut proj = CMatrix::zeros(n, n);
        let mut lambda = 0.0;
        for &idx in members {
            let v = eig.vectors.column(idx);
            proj += &v * v.adjoint();
            lambda += eig.values[idx];
        }
        lambda /= members.len() as f64;
        groups.push((lambda, proj));
    }
    Ok(EigenprojectorSet { groups, group_tol })
}

/// Default relative grouping tolerance.
pub fn default_group_tol(php: &CMatrix) -> f64 {
    1e-8 * php.norm().max(1e-300)
}

/// Non-Hermitian effective Hamiltonian with its Hermitian decomposition
/// `matrix = M - (i/2) Gamma`.
#[derive(Debug, Clone)]
pub struct SubspaceEffectiveHamiltonian {
    pub matrix: CMatrix,
    pub mass: CMatrix,
    pub gamma: CMatrix,
}

impl SubspaceEffectiveHamiltonian {
    pub fn new(matrix: CMatrix) -> Self {
        let adj = matrix.adjoint();
        let mass = (&matrix + &adj) * C64::new(0.5, 0.0);
        let gamma = (&matrix - &adj) * I;
        Self { matrix, mass, gamma }
    }

    pub fn reconstruction_defect(&self) -> f64 {
        (&self.mass - &self.gamma * C64::new(0.0, 0.5) - &self.matrix).norm()
    }
}

/// Self-energy `Sigma(eps) = PHQ (QHQ - eps - i eta)^{-1} QHP`.
///
/// Discrete reservoirs take an explicit `eta >= 0` (with `eta = 0` the
/// evaluation point must stay away from the QHQ spectrum). Continuum
/// reservoirs implement the `-i0` prescription exactly:
/// `Sigma_jk(eps) = PV int g_j g_k / (E - eps) dE + i pi g_j(eps) g_k(eps)`.
pub fn sigma(m: &FiniteLevelModel, eps: f64, eta: f64) -> Result<CMatrix> {
    if eta < 0.0 {
        return Err(Error::Domain(format!("eta must be nonnegative, got {eta}")));
    }
    match m.reservoir() {
        Some(res) => sigma_continuum(m, res, eps),
        None => sigma_discrete(m, eps, eta),
    }
}

fn sigma_discrete(m: &FiniteLevelModel, eps: f64, eta: f64) -> Result<CMatrix> {
    let blocks = m.blocks();
    let nq = blocks.qhq.nrows();
    let n = m.n();
    if nq == 0 {
        return Ok(CMatrix::zeros(n, n));
    }
    if eta == 0.0 {
        let eig = crate::linalg::hermitian_eigen(&blocks.qhq);
        let scale = blocks.qhq.norm().max(1.0);
        if eig.values.iter().any(|&mu| (mu - eps).abs() < 1e-10 * scale) {
            return Err(Error::SigmaSingularity(eps));
        }
    }
    let shift = C64::new(eps, eta);
    let mut denom = blocks.qhq.clone();
    for k in 0..nq {
        denom[(k, k)] -= shift;
    }
    let solved = denom
        .lu()
        .solve(&blocks.qhp)
        .ok_or_else(|| Error::Eigen("singular resolvent solve".into()))?;
    Ok(&blocks.phq * solved)
}

fn sigma_continuum(m: &FiniteLevelModel, res: &ContinuumReservoir, eps: f64) -> Result<CMatrix> {
    let n = m.n();
    if (eps - res.emin).abs() < 1e-12 * (1.0 + res.emin.abs()) {
        return Err(Error::Domain(format!(
            "sigma is undefined at the spectral edge eps = emin = {eps}"
        )));
    }
    let mut out = CMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            let (lo_j, hi_j) = res.support(j);
            let (lo_k, hi_k) = res.support(k);
            let lo = lo_j.max(lo_k);
            let hi = hi_j.min(hi_k);
            if hi <= lo {
                continue;
            }
            let p = |e: f64| res.g(j, e) * res.g(k, e);
            let re = principal_value(&p, lo, hi, eps)?;
            let im = if eps > lo && eps < hi {
                std::f64::consts::PI * p(eps)
            } else {
                0.0
            };
            out[(j, k)] = C64::new(re, im);
        }
    }
    Ok(out)
}

/// `PV int_lo^hi p(E)/(E - eps) dE` by symmetric-interval subtraction:
/// the singular part integrates to `p(eps) log((hi - eps)/(eps - lo))`.
fn principal_value(p: &dyn Fn(f64) -> f64, lo: f64, hi: f64, eps: f64) -> Result<f64> {
    let tol = 1e-11;
    if eps <= lo || eps >= hi {
        let q = quad::integrate(&|e| C64::new(p(e) / (e - eps), 0.0), lo, hi, tol);
        return Ok(q.value.re);
    }
    let peps = p(eps);
    let width = hi - lo;
    let f = move |e: f64| {
        let d = e - eps;
        let v = if d.abs() < 1e-10 * width {
            // removable singularity: slope of p at eps
            (p(eps + 1e-6 * width) - p(eps - 1e-6 * width)) / (2e-6 * width)
        } else {
            (p(e) - peps) / d
        };
        C64::new(v, 0.0)
    };
    let left = quad::integrate(&f, lo, eps, 0.5 * tol);
    let right = quad::integrate(&f, eps, hi, 0.5 * tol);
    Ok(left.value.re + right.value.re + peps * ((hi - eps) / (eps - lo)).ln())
}

/// `(exp(-i x t) - 1) / x`, with a series branch below `|x t| = 1e-3` to
/// avoid cancellation.
fn phi(x: f64, t: f64) -> C64 {
    let u = x * t;
    if u.abs() < 1e-3 {
        t * C64::new(-u / 2.0 + u * u * u / 24.0, -1.0 + u * u / 6.0)
    } else {
        ((-I * u).exp() - C64::new(1.0, 0.0)) / x
    }
}

/// First-order time-dependent potential
/// `V(t) = sum_j PHQ [(exp(-it(QHQ - lambda_j)) - 1)/(QHQ - lambda_j)] QHP P_j`,
/// normalized so that `lim_{t->inf} V(t) = -sum_j Sigma(lambda_j) P_j`.
pub fn v_parallel_t(
    m: &FiniteLevelModel,
    t: f64,
    projectors: &EigenprojectorSet,
) -> Result<CMatrix> {
    if t < 0.0 {
        return Err(Error::Domain(format!("v_parallel_t requires t >= 0, got {t}")));
    }
    let n = m.n();
    match m.reservoir() {
        None => {
            let blocks = m.blocks();
            let nq = blocks.qhq.nrows();
            if nq == 0 {
                return Ok(CMatrix::zeros(n, n));
            }
            let eig = crate::linalg::hermitian_eigen(&blocks.qhq);
            let mut v = CMatrix::zeros(n, n);
            for (lambda, proj) in &projectors.groups {
                let diag = DVector::from_iterator(
                    nq,
                    eig.values.iter().map(|&mu| phi(mu - lambda, t)),
                );
                let mut middle = eig.vectors.clone();
                for c in 0..nq {
                    let scale = diag[c];
                    middle.column_mut(c).scale_mut(1.0);
                    for r in 0..nq {
                        middle[(r, c)] *= scale;
                    }
                }
                let op = &middle * eig.vectors.adjoint();
                v += &blocks.phq * op * &blocks.qhp * proj;
            }
            Ok(v)
        }
        Some(res) => {
            let mut v = CMatrix::zeros(n, n);
            if t == 0.0 {
                return Ok(v);
            }
            for (lambda, proj) in &projectors.groups {
                let mut mat = CMatrix::zeros(n, n);
                for p in 0..n {
                    for q in 0..n {
                        let (lo_p, hi_p) = res.support(p);
                        let (lo_q, hi_q) = res.support(q);
                        let lo = lo_p.max(lo_q);
                        let hi = hi_p.min(hi_q);
                        if hi <= lo {
                            continue;
                        }
                        mat[(p, q)] = oscillatory_band_integral(
                            &|e| res.g(p, e) * res.g(q, e),
                            lo,
                            hi,
                            &|e| phi(e - lambda, t),
                            t,
                        );
                    }
                }
                v += mat * proj;
            }
            Ok(v)
        }
    }
}

fn oscillatory_band_integral(
    weight: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    kernel: &dyn Fn(f64) -> C64,
    t: f64,
) -> C64 {
    let range = hi - lo;
    let width = (std::f64::consts::PI / t.max(1e-300)).min(range / 4.0);
    let chunks = (range / width).ceil() as usize;
    let step = range / chunks as f64;
    let mut value = C64::new(0.0, 0.0);
    for c in 0..chunks {
        let a = lo + c as f64 * step;
        let b = if c + 1 == chunks { hi } else { a + step };
        value += quad::integrate(&|e| weight(e) * kernel(e), a, b, 1e-12 / chunks as f64).value;
    }
    value
}

/// The long-time potential and the effective Hamiltonian it assembles.
#[derive(Debug, Clone)]
pub struct VParallelResult {
    pub v: CMatrix,
    pub h_eff: SubspaceEffectiveHamiltonian,
}

/// `V = -sum_j Sigma(lambda_j) P_j` over the degeneracy groups, and
/// `H_eff = PHP + V`. Discrete reservoirs use `eta` (default: 3x mean
/// level spacing); continuum reservoirs evaluate the `-i0` limit exactly.
pub fn v_parallel_inf(
    m: &FiniteLevelModel,
    projectors: &EigenprojectorSet,
    eta: Option<f64>,
) -> Result<VParallelResult> {
    let n = m.n();
    let eta = match (m.is_continuum(), eta) {
        (true, _) => 0.0,
        (false, Some(e)) if e > 0.0 => e,
        (false, Some(e)) => {
            return Err(Error::Domain(format!(
                "discrete reservoirs need eta > 0, got {e}"
            )))
        }
        (false, None) => m.default_eta(),
    };
    let mut v = CMatrix::zeros(n, n);
    for (lambda, proj) in &projectors.groups {
        v -= sigma(m, *lambda, eta)? * proj;
    }
    let php = m.blocks().php;
    let h_eff = SubspaceEffectiveHamiltonian::new(&php + &v);
    Ok(VParallelResult { v, h_eff })
}

/// Time-averaged first-order potential `(1/T) int_0^T V(t) dt` on a
/// uniform grid; a convergent stand-in for the long-time limit when the
/// reservoir is discrete and the plain limit oscillates.
pub fn v_parallel_time_averaged(
    m: &FiniteLevelModel,
    projectors: &EigenprojectorSet,
    t_max: f64,
    steps: usize,
) -> Result<CMatrix> {
    if !(t_max > 0.0) || steps < 2 {
        return Err(Error::Domain("need t_max > 0 and >= 2 steps".into()));
    }
    let n = m.n();
    let dt = t_max / steps as f64;
    let mut acc = CMatrix::zeros(n, n);
    for k in 0..=steps {
        let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
        acc += v_parallel_t(m, k as f64 * dt, projectors)? * C64::new(w, 0.0);
    }
    Ok(acc * C64::new(1.0 / steps as f64, 0.0))
}

/// Two-level matrix elements of the long-time potential assembled from
/// the explicit four-term expressions in `H_z, H_0, kappa`, each term a
/// self-energy at `H_0 +/- kappa`.
pub fn two_level_v(m: &FiniteLevelModel, eta: Option<f64>) -> Result<VParallelResult> {
    if m.n() != 2 {
        return Err(Error::Domain(format!("two_level_v needs n = 2, got {}", m.n())));
    }
    let blocks = m.blocks();
    let php = &blocks.php;
    let h11 = php[(0, 0)].re;
    let h22 = php[(1, 1)].re;
    let h12 = php[(0, 1)];
    let h21 = php[(1, 0)];
    let hz = 0.5 * (h11 - h22);
    let h0 = 0.5 * (h11 + h22);
    let kappa = (h12.norm_sqr() + hz * hz).sqrt();
    if kappa < 1e-12 * php.norm().max(1.0) {
        return Err(Error::DegenerateTwoLevel);
    }
    let eta = match (m.is_continuum(), eta) {
        (true, _) => 0.0,
        (false, Some(e)) if e > 0.0 => e,
        (false, Some(e)) => {
            return Err(Error::Domain(format!("discrete reservoirs need eta > 0, got {e}")))
        }
        (false, None) => m.default_eta(),
    };
    let sp = sigma(m, h0 + kappa, eta)?;
    let sm = sigma(m, h0 - kappa, eta)?;
    let cp = C64::new(0.5 * (1.0 + hz / kappa), 0.0);
    let cm = C64::new(0.5 * (1.0 - hz / kappa), 0.0);
    let mut v = CMatrix::zeros(2, 2);
    for j in 0..2 {
        v[(j, 0)] = -cp * sp[(j, 0)] - cm * sm[(j, 0)]
            - h21 / (2.0 * kappa) * sp[(j, 1)]
            + h21 / (2.0 * kappa) * sm[(j, 1)];
        v[(j, 1)] = -cm * sp[(j, 1)] - cp * sm[(j, 1)]
            - h12 / (2.0 * kappa) * sp[(j, 0)]
            + h12 / (2.0 * kappa) * sm[(j, 0)];
    }
    let h_eff = SubspaceEffectiveHamiltonian::new(php + &v);
    Ok(VParallelResult { v, h_eff })
}

/// Memory kernel, its once-convolved form, and the truncated series
/// solution on a uniform time grid.
#[derive(Debug, Clone)]
pub struct KernelSample {
    pub t: f64,
    pub k: CMatrix,
    pub l: CMatrix,
    pub norm_l: f64,
}

#[derive(Debug, Clone)]
pub struct KernelSeries {
    pub samples: Vec<KernelSample>,
    /// `u_orders[m][i]` is the order-m truncation of the series solution
    /// at grid point i; order 0 is the free evolution.
    pub u_orders: Vec<Vec<CMatrix>>,
    /// Set when the trapezoid error estimate of L exceeds 1e-4.
    pub coarse_grid: bool,
}

fn spectral_norm(m: &CMatrix) -> f64 {
    m.clone().singular_values().max()
}

fn convolve(f: &[CMatrix], g: &[CMatrix], dt: f64) -> Vec<CMatrix> {
    let n = f.len();
    let (rows, cols) = (f[0].nrows(), g[0].ncols());
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = CMatrix::zeros(rows, cols);
        if i > 0 {
            acc += &f[i] * &g[0] * C64::new(0.5, 0.0);
            acc += &f[0] * &g[i] * C64::new(0.5, 0.0);
            for j in 1..i {
                acc += &f[i - j] * &g[j];
            }
        }
        out.push(acc * C64::new(dt, 0.0));
    }
    out
}

/// Kernel `K(t) = PHQ exp(-it QHQ) QHP`, `L = G * K` with the retarded
/// Green's operator `G(t) = -i Theta(t) exp(-it PHP)`, and the series
/// `U = [1 + sum (-i)^m L*...*L] * U0` truncated at `order`.
pub fn kernel_series(
    m: &FiniteLevelModel,
    t_grid: &[f64],
    order: usize,
) -> Result<KernelSeries> {
    if order > 4 {
        return Err(Error::Domain(format!("order must be <= 4, got {order}")));
    }
    let npts = t_grid.len();
    if npts < 3 || t_grid[0] != 0.0 {
        return Err(Error::Domain("grid must start at 0 with >= 3 points".into()));
    }
    let dt = t_grid[1] - t_grid[0];
    if t_grid
        .windows(2)
        .any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs() + 1e-300)
        || dt <= 0.0
    {
        return Err(Error::Domain("grid must be uniform and increasing".into()));
    }
    let n = m.n();
    let blocks = m.blocks();

    // free subspace evolution exp(-it PHP)
    let php_eig = crate::linalg::hermitian_eigen(&blocks.php);
    let u0_at = |t: f64| -> CMatrix {
        let mut middle = php_eig.vectors.clone();
        for c in 0..n {
            let scale = (-I * php_eig.values[c] * t).exp();
            for r in 0..n {
                middle[(r, c)] *= scale;
            }
        }
        &middle * php_eig.vectors.adjoint()
    };
    let u0: Vec<CMatrix> = t_grid.iter().map(|&t| u0_at(t)).collect();
    let g: Vec<CMatrix> = u0.iter().map(|u| u * (-I)).collect();

    let k_at: Box<dyn Fn(f64) -> CMatrix> = match m.reservoir() {
        None => {
            let nq = blocks.qhq.nrows();
            if nq == 0 {
                Box::new(move |_| CMatrix::zeros(n, n))
            } else {
                let qeig = crate::linalg::hermitian_eigen(&blocks.qhq);
                let phq = blocks.phq.clone();
                let qhp = blocks.qhp.clone();
                Box::new(move |t: f64| {
                    let mut middle = qeig.vectors.clone();
                    for c in 0..nq {
                        let scale = (-I * qeig.values[c] * t).exp();
                        for r in 0..nq {
                            middle[(r, c)] *= scale;
                        }
                    }
                    &phq * (&middle * qeig.vectors.adjoint()) * &qhp
                })
            }
        }
        Some(res) => {
            let res = res.clone();
            Box::new(move |t: f64| {
                let mut out = CMatrix::zeros(n, n);
                for p in 0..n {
                    for q in 0..n {
                        let (lo_p, hi_p) = res.support(p);
                        let (lo_q, hi_q) = res.support(q);
                        let lo = lo_p.max(lo_q);
                        let hi = hi_p.min(hi_q);
                        if hi <= lo {
                            continue;
                        }
                        out[(p, q)] = oscillatory_band_integral(
                            &|e| res.g(p, e) * res.g(q, e),
                            lo,
                            hi,
                            &|e| (-I * e * t).exp(),
                            t,
                        );
                    }
                }
                out
            })
        }
    };
    let k: Vec<CMatrix> = t_grid.iter().map(|&t| k_at(t)).collect();
    let l = convolve(&g, &k, dt);

    // trapezoid error estimate by step doubling at shared points
    let mut coarse_grid = false;
    if npts >= 5 {
        let g2: Vec<CMatrix> = g.iter().step_by(2).cloned().collect();
        let k2: Vec<CMatrix> = k.iter().step_by(2).cloned().collect();
        let l2 = convolve(&g2, &k2, 2.0 * dt);
        let mut max_diff: f64 = 0.0;
        for (i, lc) in l2.iter().enumerate() {
            max_diff = max_diff.max((lc - &l[2 * i]).norm());
        }
        coarse_grid = max_diff / 3.0 > 1e-4;
    }

    let mut u_orders = vec![u0.clone()];
    let mut term = l.clone();
    let mut prefactor = -I;
    for ord in 1..=order {
        let contrib = convolve(&term, &u0, dt);
        let prev = &u_orders[ord - 1];
        let next: Vec<CMatrix> = prev
            .iter()
            .zip(contrib.iter())
            .map(|(p, c)| p + c * prefactor)
            .collect();
        u_orders.push(next);
        if ord < order {
            term = convolve(&l, &term, dt);
            prefactor *= -I;
        }
    }

    let samples = t_grid
        .iter()
        .enumerate()
        .map(|(i, &t)| KernelSample {
            t,
            k: k[i].clone(),
            l: l[i].clone(),
            norm_l: spectral_norm(&l[i]),
        })
        .collect();
    Ok(KernelSeries { samples, u_orders, coarse_grid })
}

/// Parse the plain-text model file format:
///
/// ```text
/// # comment
/// dim <dim> <n>
/// <n subspace indices (0-based)>
/// <i> <j> <re> <im>        one line per nonzero upper-triangle entry
/// continuum <emin>         optional
/// flat <gamma> <cutoff>    one line, or one per subspace state
/// tabulated <path>         alternative coupling shape
/// ```
pub fn parse_model(text: &str, base_dir: Option<&std::path::Path>) -> Result<FiniteLevelModel> {
    let mut dim = 0usize;
    let mut n = 0usize;
    let mut subspace: Vec<usize> = Vec::new();
    let mut h: Option<CMatrix> = None;
    let mut continuum_emin: Option<f64> = None;
    let mut shapes: Vec<CouplingShape> = Vec::new();
    let mut stage = 0; // 0: want header, 1: want indices, 2: entries

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: &str| Error::ModelFile(format!("line {lineno}: {msg}"));
        match stage {
            0 => {
                if fields.len() != 3 || fields[0] != "dim" {
                    return Err(bad("expected header `dim <dim> <n>`"));
                }
                dim = fields[1].parse().map_err(|_| bad("bad dim"))?;
                n = fields[2].parse().map_err(|_| bad("bad n"))?;
                if dim == 0 || n == 0 || n > dim {
                    return Err(bad("need 0 < n <= dim"));
                }
                h = Some(CMatrix::zeros(dim, dim));
                stage = 1;
            }
            1 => {
                if fields.len() != n {
                    return Err(bad(&format!("expected {n} subspace indices")));
                }
                for f in fields {
                    let idx: usize = f.parse().map_err(|_| bad("bad subspace index"))?;
                    if idx >= dim {
                        return Err(bad(&format!("subspace index {idx} out of range")));
                    }
                    subspace.push(idx);
                }
                stage = 2;
            }
            _ => match fields[0] {
                "continuum" => {
                    if fields.len() != 2 {
                        return Err(bad("expected `continuum <emin>`"));
                    }
                    if dim != n {
                        return Err(bad("continuum models must have dim == n"));
                    }
                    continuum_emin =
                        Some(fields[1].parse().map_err(|_| bad("bad emin"))?);
                }
                "flat" => {
                    if continuum_emin.is_none() {
                        return Err(bad("`flat` must follow a `continuum` line"));
                    }
                    if fields.len() != 3 {
                        return Err(bad("expected `flat <gamma> <cutoff>`"));
                    }
                    let gamma: f64 = fields[1].parse().map_err(|_| bad("bad gamma"))?;
                    let cutoff: f64 = fields[2].parse().map_err(|_| bad("bad cutoff"))?;
                    shapes.push(CouplingShape::Flat { gamma, cutoff });
                }
                "tabulated" => {
                    if continuum_emin.is_none() {
                        return Err(bad("`tabulated` must follow a `continuum` line"));
                    }
                    if fields.len() != 2 {
                        return Err(bad("expected `tabulated <path>`"));
                    }
                    let path = match base_dir {
                        Some(d) => d.join(fields[1]),
                        None => std::path::PathBuf::from(fields[1]),
                    };
                    let data = std::fs::read_to_string(&path).map_err(|e| {
                        bad(&format!("cannot read {}: {e}", path.display()))
                    })?;
                    let mut nodes = Vec::new();
                    for l in data.lines() {
                        let l = l.split('#').next().unwrap_or("").trim();
                        if l.is_empty() {
                            continue;
                        }
                        let parts: Vec<&str> = l.split_whitespace().collect();
                        if parts.len() != 2 {
                            return Err(bad("tabulated coupling rows are `E g`"));
                        }
                        let e: f64 = parts[0].parse().map_err(|_| bad("bad energy"))?;
                        let gv: f64 = parts[1].parse().map_err(|_| bad("bad coupling"))?;
                        nodes.push((e, gv));
                    }
                    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
                    shapes.push(CouplingShape::Tabulated(nodes));
                }
                _ => {
                    if fields.len() != 4 {
                        return Err(bad("expected `i j re im` matrix entry"));
                    }
                    let i: usize = fields[0].parse().map_err(|_| bad("bad row index"))?;
                    let j: usize = fields[1].parse().map_err(|_| bad("bad column index"))?;
                    let re: f64 = fields[2].parse().map_err(|_| bad("bad real part"))?;
                    let im: f64 = fields[3].parse().map_err(|_| bad("bad imaginary part"))?;
                    if i >= dim || j >= dim || i > j {
                        return Err(bad("matrix entries must be upper-triangle and in range"));
                    }
                    let hm = h.as_mut().unwrap();
                    hm[(i, j)] = C64::new(re, im);
                    if i != j {
                        hm[(j, i)] = C64::new(re, -im);
                    } else if im != 0.0 {
                        return Err(bad("diagonal entries must be real"));
                    }
                }
            },
        }
    }
    if stage != 2 {
        return Err(Error::ModelFile("incomplete model file".into()));
    }
    let h = h.unwrap();
    match continuum_emin {
        None => FiniteLevelModel::discrete(h, subspace),
        Some(emin) => {
            if shapes.is_empty() {
                return Err(Error::ModelFile(
                    "continuum model needs at least one coupling shape".into(),
                ));
            }
            let shapes = if shapes.len() == 1 {
                vec![shapes[0].clone(); n]
            } else if shapes.len() == n {
                shapes
            } else {
                return Err(Error::ModelFile(format!(
                    "expected 1 or {n} coupling shapes, got {}",
                    shapes.len()
                )));
            };
            FiniteLevelModel::with_continuum(h, emin, shapes)
        }
    }
}

/// Load a model from a file, resolving tabulated-coupling paths relative
/// to the model file's directory.
pub fn load_model(path: &std::path::Path) -> Result<FiniteLevelModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::ModelFile(format!("cannot read {}: {e}", path.display())))?;
    parse_model(&text, path.parent())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_hermitian(dim: usize, rng: &mut impl Rng) -> CMatrix {
        let mut h = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                let z = if i == j {
                    C64::new(rng.gen_range(-1.0..1.0), 0.0)
                } else {
                    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                };
                h[(i, j)] = z;
                h[(j, i)] = z.conj();
            }
        }
        h
    }

    #[test]
    fn blocks_reassemble() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let h = random_hermitian(5, &mut rng);
        let m = FiniteLevelModel::discrete(h.clone(), vec![1, 3]).unwrap();
        let b = m.blocks();
        // brute-force reassembly oracle
        let mut rebuilt = CMatrix::zeros(5, 5);
        let p = [1usize, 3];
        for (a, &i) in p.iter().enumerate() {
            for (bb, &j) in p.iter().enumerate() {
                rebuilt[(i, j)] = b.php[(a, bb)];
            }
            for (bb, &j) in b.q_indices.iter().enumerate() {
                rebuilt[(i, j)] = b.phq[(a, bb)];
                rebuilt[(j, i)] = b.qhp[(bb, a)];
            }
        }
        for (a, &i) in b.q_indices.iter().enumerate() {
            for (bb, &j) in b.q_indices.iter().enumerate() {
                rebuilt[(i, j)] = b.qhq[(a, bb)];
            }
        }
        assert!((rebuilt - &h).norm() < 1e-12);
        assert!((b.phq.adjoint() - &b.qhp).norm() < 1e-12);
    }

    #[test]
    fn block_diagonal_has_zero_coupling() {
        let mut h = CMatrix::zeros(3, 3);
        h[(0, 0)] = C64::new(1.0, 0.0);
        h[(1, 1)] = C64::new(2.0, 0.0);
        h[(2, 2)] = C64::new(3.0, 0.0);
        let m = FiniteLevelModel::discrete(h, vec![0]).unwrap();
        assert!(m.blocks().phq.norm() == 0.0);
    }

    #[test]
    fn two_level_coupling_column_readoff() {
        let mut h = CMatrix::zeros(3, 3);
        h[(0, 2)] = C64::new(0.3, 0.0);
        h[(2, 0)] = C64::new(0.3, 0.0);
        h[(1, 2)] = C64::new(0.0, -0.4);
        h[(2, 1)] = C64::new(0.0, 0.4);
        let m = FiniteLevelModel::discrete(h, vec![0, 1]).unwrap();
        let b = m.blocks();
        assert_eq!(b.phq.shape(), (2, 1));
        assert!((b.phq[(0, 0)] - C64::new(0.3, 0.0)).norm() < 1e-15);
        assert!((b.phq[(1, 0)] - C64::new(0.0, -0.4)).norm() < 1e-15);
    }

    #[test]
    fn eigenprojectors_identity_for_scalar_matrix() {
        let php = CMatrix::identity(3, 3) * C64::new(0.7, 0.0);
        let set = eigenprojectors(&php, default_group_tol(&php)).unwrap();
        assert_eq!(set.groups.len(), 1);
        assert!((set.groups[0].0 - 0.7).abs() < 1e-12);
        assert!((&set.groups[0].1 - CMatrix::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn eigenprojectors_diagonal() {
        let mut php = CMatrix::zeros(2, 2);
        php[(0, 0)] = C64::new(1.0, 0.0);
        php[(1, 1)] = C64::new(2.0, 0.0);
        let set = eigenprojectors(&php, 1e-8).unwrap();
        assert_eq!(set.groups.len(), 2);
        assert!((set.groups[0].1[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((set.groups[1].1[(1, 1)] - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn eigenvalues_split_by_kappa() {
        // 2x2 with off-diagonal coupling: lambda = H0 +/- kappa
        let mut php = CMatrix::zeros(2, 2);
        php[(0, 0)] = C64::new(1.0, 0.0);
        php[(1, 1)] = C64::new(0.2, 0.0);
        php[(0, 1)] = C64::new(0.3, 0.1);
        php[(1, 0)] = C64::new(0.3, -0.1);
        let set = eigenprojectors(&php, 1e-10).unwrap();
        let h0 = 0.6;
        let hz = 0.4;
        let kappa = (php[(0, 1)].norm_sqr() + hz * hz).sqrt();
        assert!((set.groups[0].0 - (h0 - kappa)).abs() < 1e-12);
        assert!((set.groups[1].0 - (h0 + kappa)).abs() < 1e-12);
    }

    #[test]
    fn projector_algebra_random_draws() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for &n in &[2usize, 3, 5] {
            for _ in 0..20 {
                let php = random_hermitian(n, &mut rng);
                let set = eigenprojectors(&php, default_group_tol(&php)).unwrap();
                // orthogonality
                for (a, (_, pa)) in set.groups.iter().enumerate() {
                    for (b, (_, pb)) in set.groups.iter().enumerate() {
                        let prod = pa * pb;
                        let expect = if a == b { pa.clone() } else { CMatrix::zeros(n, n) };
                        assert!((prod - expect).norm() < 1e-10);
                    }
                }
                // completeness
                assert!(set.completeness_defect(n) < 1e-10);
                // reconstruction
                let rebuilt = set
                    .groups
                    .iter()
                    .fold(CMatrix::zeros(n, n), |acc, (l, p)| acc + p * C64::new(*l, 0.0));
                assert!((rebuilt - &php).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn sigma_zero_without_coupling() {
        let mut h = CMatrix::zeros(2, 2);
        h[(0, 0)] = C64::new(1.0, 0.0);
        h[(1, 1)] = C64::new(5.0, 0.0);
        let m = FiniteLevelModel::discrete(h, vec![0]).unwrap();
        let s = sigma(&m, 0.3, 0.0).unwrap();
        assert!(s.norm() == 0.0);
    }

    #[test]
    fn sigma_single_reservoir_level() {
        // Sigma(eps) = c c^dag / (omega1 - eps - i eta)
        let mut h = CMatrix::zeros(3, 3);
        h[(0, 0)] = C64::new(1.0, 0.0);
        h[(1, 1)] = C64::new(1.5, 0.0);
        h[(2, 2)] = C64::new(4.0, 0.0);
        h[(0, 2)] = C64::new(0.2, 0.1);
        h[(2, 0)] = C64::new(0.2, -0.1);
        h[(1, 2)] = C64::new(-0.3, 0.0);
        h[(2, 1)] = C64::new(-0.3, 0.0);
        let m = FiniteLevelModel::discrete(h, vec![0, 1]).unwrap();
        let eps = 1.1;
        let eta = 0.05;
        let s = sigma(&m, eps, eta).unwrap();
        let c = DVector::from_vec(vec![C64::new(0.2, 0.1), C64::new(-0.3, 0.0)]);
        let denom = C64::new(4.0 - eps, -eta);
        let expect = &c * c.adjoint() / denom;
        assert!((s - expect).norm() < 1e-12);
    }

    #[test]
    fn sigma_discrete_singularity_detected() {
        let mut h = CMatrix::zeros(2, 2);
        h[(0, 0)] = C64::new(1.0, 0.0);
        h[(1, 1)] = C64::new(2.0, 0.0);
        h[(0, 1)] = C64::new(0.1, 0.0);
        h[(1, 0)] = C64::new(0.1, 0.0);
        let m = FiniteLevelModel::discrete(h, vec![0]).unwrap();
        assert!(matches!(sigma(&m, 2.0, 0.0), Err(Error::SigmaSingularity(_))));
        assert!(sigma(&m, 2.0, 0.1).is_ok());
    }

    #[test]
    fn sigma_flat_continuum_midband() {
        // Im Sigma_11 = gamma/2; PV part = (gamma/2pi) log((cutoff-eps)/eps)
        let gamma = 0.3;
        let cutoff = 20.0;
        let php = CMatrix::from_element(1, 1, C64::new(7.0, 0.0));
        let m = FiniteLevelModel::with_continuum(
            php,
            0.0,
            vec![CouplingShape::Flat { gamma, cutoff }],
        )
        .unwrap();
        let eps = 7.0;
        let s = sigma(&m, eps, 0.0).unwrap();
        assert!((s[(0, 0)].im - gamma / 2.0).abs() < 1e-6, "Im = {}", s[(0, 0)].im);
        let pv = gamma / (2.0 * std::f64::consts::PI) * ((cutoff - eps) / eps).ln();
        assert!((s[(0, 0)].re - pv).abs() < 1e-8, "Re = {} vs {pv}", s[(0, 0)].re);
    }

    #[test]
    fn v_parallel_t_vanishes_at_zero() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let h = random_hermitian(4, &mut rng);
        let m = FiniteLevelModel::discrete(h, vec![0, 1]).unwrap();
        let set = eigenprojectors(&m.blocks().php, 1e-10).unwrap();
        let v = v_parallel_t(&m, 0.0, &set).unwrap();
        assert!(v.norm() < 1e-14);
    }

    #[test]
    fn v_parallel_t_convolution_oracle() {
        // numerical convolution of the defining integral
        // V(t) = -i int_0^t K(u) exp(i u PHP) du  for a single reservoir level
        let e1 = 0.8;
        let w1 = 2.0;
        let c = C64::new(0.25, 0.15);
        let mut h = CMatrix::zeros(2, 2);
        h[(0, 0)] = C64::new(e1, 0.0);
        h[(1, 1)] = C64::new(w1, 0.0);
        h[(0, 1)] = c;
        h[(1, 0)] = c.conj();
        let m = FiniteLevelModel::discrete(h, vec![0]).unwrap();
        let set = eigenprojectors(&m.blocks().php, 1e-10).unwrap();
        let t = 1.7;
        let v = v_parallel_t(&m, t, &set).unwrap()[(0, 0)];
        // trapezoid oracle
        let steps = 20_000;
        let du = t / steps as f64;
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..=steps {
            let u = k as f64 * du;
            let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
            let kernel = c.norm_sqr() * (-I * w1 * u).exp();
            acc += w * kernel * (I * e1 * u).exp();
        }
        let oracle = -I * acc * du;
        assert!((v - oracle).norm() < 1e-6, "v = {v}, oracle = {oracle}");
    }

    #[test]
    fn v_parallel_inf_limits() {
        // fully degenerate PHP = lambda0 I  =>  V = -Sigma(lambda0)
        let gamma = 0.2;
        let php = CMatrix::identity(2, 2) * C64::new(5.0, 0.0);
        let m = FiniteLevelModel::with_continuum(
            php.clone(),
            0.0,
            vec![
                CouplingShape::Flat { gamma, cutoff: 30.0 },
                CouplingShape::Flat { gamma: 0.1, cutoff: 30.0 },
            ],
        )
        .unwrap();
        let set = eigenprojectors(&php, default_group_tol(&php)).unwrap();
        assert_eq!(set.groups.len(), 1);
        let r = v_parallel_inf(&m, &set, None).unwrap();
        let s = sigma(&m, 5.0, 0.0).unwrap();
        assert!((&r.v + &s).norm() < 1e-12);
    }

    #[test]
    fn one_level_weisskopf_wigner() {
        // n = 1: v = -Sigma_11(E1); flat coupling gives the golden-rule
        // width Gamma_11 = 2 pi |g(E1)|^2
        let gamma = 0.25;
        let e1 = 6.0;
        let php = CMatrix::from_element(1, 1, C64::new(e1, 0.0));
        let m = FiniteLevelModel::with_continuum(
            php.clone(),
            0.0,
            vec![CouplingShape::Flat { gamma, cutoff: 40.0 }],
        )
        .unwrap();
        let set = eigenprojectors(&php, 1e-10).unwrap();
        let r = v_parallel_inf(&m, &set, None).unwrap();
        let s = sigma(&m, e1, 0.0).unwrap();
        assert!((r.v[(0, 0)] + s[(0, 0)]).norm() < 1e-12);
        let g2 = gamma / (2.0 * std::f64::consts::PI);
        let expect = 2.0 * std::f64::consts::PI * g2; // = gamma
        assert!(
            (r.h_eff.gamma[(0, 0)].re - expect).abs() < 1e-6,
            "Gamma_11 = {}",
            r.h_eff.gamma[(0, 0)].re
        );
    }

    #[test]
    fn coupling_scaling_is_quadratic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let h = random_hermitian(5, &mut rng);
        let m = FiniteLevelModel::discrete(h, vec![0, 2]).unwrap();
        let set = eigenprojectors(&m.blocks().php, default_group_tol(&m.blocks().php)).unwrap();
        let c = 0.37;
        let scaled = m.scale_coupling(c);
        let t = 0.9;
        let v1 = v_parallel_t(&m, t, &set).unwrap();
        let v2 = v_parallel_t(&scaled, t, &set).unwrap();
        assert!((v2 - &v1 * C64::new(c * c, 0.0)).norm() < 1e-12);
        let eta = m.default_eta();
        let vin1 = v_parallel_inf(&m, &set, Some(eta)).unwrap().v;
        let vin2 = v_parallel_inf(&scaled, &set, Some(eta)).unwrap().v;
        assert!((vin2 - &vin1 * C64::new(c * c, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn two_level_matches_general_formula() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..25 {
            let h = random_hermitian(6, &mut rng);
            let m = FiniteLevelModel::discrete(h, vec![0, 1]).unwrap();
            let eta = m.default_eta();
            let general = {
                let php = m.blocks().php;
                let set = eigenprojectors(&php, default_group_tol(&php)).unwrap();
                v_parallel_inf(&m, &set, Some(eta)).unwrap()
            };
            let explicit = two_level_v(&m, Some(eta)).unwrap();
            assert!(
                (&general.v - &explicit.v).norm() < 1e-10,
                "mismatch {}",
                (&general.v - &explicit.v).norm()
            );
        }
    }

    #[test]
    fn two_level_diagonal_collapses() {
        // H12 = 0, Hz > 0: the bracket factors reduce to 0/1 and
        // v_jk = -Sigma_jk at the respective diagonal energy
        let mut h = CMatrix::zeros(4, 4);
        h[(0, 0)] = C64::new(2.0, 0.0);
        h[(1, 1)] = C64::new(1.0, 0.0);
        h[(2, 2)] = C64::new(5.0, 0.0);
        h[(3, 3)] = C64::new(6.0, 0.0);
        h[(0, 2)] = C64::new(0.2, 0.0);
        h[(2, 0)] = C64::new(0.2, 0.0);
        h[(1, 3)] = C64::new(0.1, 0.05);
        h[(3, 1)] = C64::new(0.1, -0.05);
        let m = FiniteLevelModel::discrete(h, vec![0, 1]).unwrap();
        let eta = 0.2;
        let v = two_level_v(&m, Some(eta)).unwrap().v;
        let s_h11 = sigma(&m, 2.0, eta).unwrap();
        let s_h22 = sigma(&m, 1.0, eta).unwrap();
        for j in 0..2 {
            assert!((v[(j, 0)] + s_h11[(j, 0)]).norm() < 1e-12);
            assert!((v[(j, 1)] + s_h22[(j, 1)]).norm() < 1e-12);
        }
    }

    #[test]
    fn loy_limit() {
        // degenerate diagonal PHP = m0 P with H12 = 0: H_eff = m0 P - Sigma(m0)
        let m0 = 4.0;
        let php = CMatrix::identity(2, 2) * C64::new(m0, 0.0);
        let m = FiniteLevelModel::with_continuum(
            php.clone(),
            0.0,
            vec![
                CouplingShape::Flat { gamma: 0.2, cutoff: 25.0 },
                CouplingShape::Flat { gamma: 0.3, cutoff: 25.0 },
            ],
        )
        .unwrap();
        assert!(matches!(two_level_v(&m, None), Err(Error::DegenerateTwoLevel)));
        let set = eigenprojectors(&php, default_group_tol(&php)).unwrap();
        let r = v_parallel_inf(&m, &set, None).unwrap();
        let s = sigma(&m, m0, 0.0).unwrap();
        let expect = &php - &s;
        assert!((&r.h_eff.matrix - expect).norm() < 1e-12);
    }

    #[test]
    fn dissipativity_of_continuum_sigma() {
        let php = {
            let mut p = CMatrix::zeros(2, 2);
            p[(0, 0)] = C64::new(6.0, 0.0);
            p[(1, 1)] = C64::new(9.0, 0.0);
            p[(0, 1)] = C64::new(0.5, 0.2);
            p[(1, 0)] = C64::new(0.5, -0.2);
            p
        };
        let m = FiniteLevelModel::with_continuum(
            php.clone(),
            0.0,
            vec![
                CouplingShape::Flat { gamma: 0.2, cutoff: 30.0 },
                CouplingShape::Flat { gamma: 0.4, cutoff: 30.0 },
            ],
        )
        .unwrap();
        let set = eigenprojectors(&php, default_group_tol(&php)).unwrap();
        for (lambda, proj) in &set.groups {
            if *lambda <= 0.0 {
                continue;
            }
            let v = -sigma(&m, *lambda, 0.0).unwrap();
            let heff = SubspaceEffectiveHamiltonian::new(v);
            let restricted = proj * &heff.gamma * proj;
            let eig = nalgebra::SymmetricEigen::new(restricted);
            for &ev in eig.eigenvalues.iter() {
                assert!(ev >= -1e-10, "negative width eigenvalue {ev}");
            }
        }
    }

    #[test]
    fn kernel_series_basics() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let mut h = random_hermitian(6, &mut rng);
        // weaken the coupling
        for i in 0..6 {
            for j in 0..6 {
                let pi = i < 2;
                let pj = j < 2;
                if pi != pj {
                    h[(i, j)] *= 0.1;
                }
            }
        }
        let m = FiniteLevelModel::discrete(h, vec![0, 1]).unwrap();
        let grid: Vec<f64> = (0..512).map(|k| k as f64 * 0.01).collect();
        let series = kernel_series(&m, &grid, 2).unwrap();
        // L(t) -> 0 as t -> 0
        assert!(series.samples[1].norm_l < 1e-3);
        assert!(series.samples[0].norm_l == 0.0);
        // order 0 is the free evolution
        let php = m.blocks().php;
        let eig = nalgebra::SymmetricEigen::new(php);
        let t = grid[100];
        let mut expect = CMatrix::zeros(2, 2);
        for c in 0..2 {
            let vcol = eig.eigenvectors.column(c);
            expect += &vcol * vcol.adjoint() * (-I * eig.eigenvalues[c] * t).exp();
        }
        assert!((&series.u_orders[0][100] - expect).norm() < 1e-12);
        assert!(!series.coarse_grid);
    }

    #[test]
    fn kernel_series_rejects_bad_grids() {
        let h = CMatrix::identity(2, 2);
        let m = FiniteLevelModel::discrete(h, vec![0]).unwrap();
        assert!(kernel_series(&m, &[0.0, 0.1, 0.3], 1).is_err());
        assert!(kernel_series(&m, &[0.1, 0.2, 0.3], 1).is_err());
        assert!(kernel_series(&m, &[0.0, 0.1, 0.2], 7).is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let text = "\
# test model
dim 3 1
0
0 0 1.0 0.0
1 1 2.0 0.0
2 2 3.0 0.0
0 1 0.5 -0.25
";
        let m = parse_model(text, None).unwrap();
        assert_eq!(m.dim(), 3);
        assert_eq!(m.n(), 1);
        assert!((m.hamiltonian()[(1, 0)] - C64::new(0.5, 0.25)).norm() < 1e-15);
    }

    #[test]
    fn model_file_errors_cite_lines() {
        let e = parse_model("dim 2\n", None).unwrap_err();
        assert!(e.to_string().contains("line 1"), "{e}");
        let e = parse_model("dim 2 1\n0\n0 3 1.0 0.0\n", None).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
    }

    #[test]
    fn continuum_model_file() {
        let text = "\
dim 1 1
0
0 0 5.0 0.0
continuum 0.0
flat 0.3 20.0
";
        let m = parse_model(text, None).unwrap();
        assert!(m.is_continuum());
        let res = m.reservoir().unwrap();
        assert_eq!(res.support(0), (0.0, 20.0));
    }
}
