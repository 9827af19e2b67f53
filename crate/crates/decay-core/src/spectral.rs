//! Spectral (energy/mass) densities of unstable states.
//!
//! A density `w(E)` is nonnegative, supported on `[emin, inf)`, and
//! normalized so that its total weight is 1, which makes the survival
//! amplitude satisfy `a(0) = 1`.

use crate::error::{Error, Result};
use crate::quad;
use crate::subspace::FiniteLevelModel;
use num_complex::Complex64 as C64;

/// Normalization constant of the truncated Breit-Wigner density:
/// `N = 1 / (1/2 + arctan(2 (e0 - emin) / gamma0) / pi)`.
pub fn bw_normalization(e0: f64, gamma0: f64, emin: f64) -> Result<f64> {
    if !(gamma0 > 0.0) {
        return Err(Error::Domain(format!("gamma0 must be positive, got {gamma0}")));
    }
    if !(e0 > emin) {
        return Err(Error::Domain(format!("e0 = {e0} must exceed emin = {emin}")));
    }
    Ok(1.0 / (0.5 + (2.0 * (e0 - emin) / gamma0).atan() / std::f64::consts::PI))
}

/// Lorentzian line shape cut off below `emin`.
#[derive(Debug, Clone, PartialEq)]
pub struct BreitWigner {
    pub e0: f64,
    pub gamma0: f64,
    pub emin: f64,
    pub norm: f64,
}

impl BreitWigner {
    pub fn new(e0: f64, gamma0: f64, emin: f64) -> Result<Self> {
        let norm = bw_normalization(e0, gamma0, emin)?;
        Ok(Self { e0, gamma0, emin, norm })
    }

    pub fn value(&self, e: f64) -> f64 {
        if e < self.emin {
            return 0.0;
        }
        let d = e - self.e0;
        let hg = 0.5 * self.gamma0;
        self.norm / (2.0 * std::f64::consts::PI) * self.gamma0 / (d * d + hg * hg)
    }

    /// Analytic continuation of the Lorentzian factor (no step function).
    pub fn eval_complex(&self, z: C64) -> C64 {
        let d = z - self.e0;
        let hg = 0.5 * self.gamma0;
        C64::new(self.norm / (2.0 * std::f64::consts::PI) * self.gamma0, 0.0)
            / (d * d + hg * hg)
    }

    /// Lower-half-plane pole `e0 - i gamma0/2`.
    pub fn pole(&self) -> C64 {
        C64::new(self.e0, -0.5 * self.gamma0)
    }

    /// Total weight of the untruncated Lorentzian beyond `ecut`.
    pub fn tail_mass(&self, ecut: f64) -> f64 {
        self.norm
            * (0.5 - (2.0 * (ecut - self.e0) / self.gamma0).atan() / std::f64::consts::PI)
    }
}

/// Spectral density variants.
///
/// `LinearOnset` is `w(E) = (E - emin)/scale^2 * exp(-(E - emin)/scale)`, a
/// density that vanishes linearly at threshold; it has exact closed forms
/// for the amplitude and serves as the threshold-behavior test case.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralDensity {
    BreitWigner(BreitWigner),
    LinearOnset { emin: f64, scale: f64 },
    /// Discrete spectral measure: weights `w_k` at energies `E_k`.
    PointMasses { masses: Vec<(f64, f64)>, applied_rescale: f64 },
    /// Piecewise-linear interpolation through `(E_k, w_k)` samples,
    /// trapezoid-normalized at construction.
    Interpolated { nodes: Vec<(f64, f64)>, applied_rescale: f64 },
}

impl SpectralDensity {
    pub fn breit_wigner(e0: f64, gamma0: f64, emin: f64) -> Result<Self> {
        Ok(Self::BreitWigner(BreitWigner::new(e0, gamma0, emin)?))
    }

    pub fn linear_onset(emin: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::Domain(format!("scale must be positive, got {scale}")));
        }
        Ok(Self::LinearOnset { emin, scale })
    }

    /// Point masses are rescaled so their weights sum to 1; the applied
    /// factor is recorded.
    pub fn point_masses(masses: Vec<(f64, f64)>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::Domain("point-mass density needs at least one mass".into()));
        }
        if masses.iter().any(|&(_, w)| w < 0.0) {
            return Err(Error::Domain("point-mass weights must be nonnegative".into()));
        }
        let total: f64 = masses.iter().map(|&(_, w)| w).sum();
        if total <= 0.0 {
            return Err(Error::Domain("point-mass weights sum to zero".into()));
        }
        let mut masses: Vec<(f64, f64)> = masses
            .into_iter()
            .map(|(e, w)| (e, w / total))
            .collect();
        masses.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self::PointMasses { masses, applied_rescale: 1.0 / total })
    }

    /// Samples interpreted as a piecewise-linear curve, normalized by the
    /// trapezoid rule.
    pub fn interpolated(nodes: Vec<(f64, f64)>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Domain("interpolated density needs at least two nodes".into()));
        }
        if nodes.iter().any(|&(_, w)| w < 0.0) {
            return Err(Error::Domain("interpolated samples must be nonnegative".into()));
        }
        let mut nodes = nodes;
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        if nodes.windows(2).any(|w| w[1].0 == w[0].0) {
            return Err(Error::Domain("interpolated nodes must have distinct energies".into()));
        }
        let mut total = 0.0;
        for w in nodes.windows(2) {
            total += 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1);
        }
        if total <= 0.0 {
            return Err(Error::Domain("interpolated density integrates to zero".into()));
        }
        for node in nodes.iter_mut() {
            node.1 /= total;
        }
        Ok(Self::Interpolated { nodes, applied_rescale: 1.0 / total })
    }

    /// `w(E)`; exactly zero below the spectral lower bound.
    pub fn value(&self, e: f64) -> f64 {
        match self {
            Self::BreitWigner(bw) => bw.value(e),
            Self::LinearOnset { emin, scale } => {
                if e < *emin {
                    0.0
                } else {
                    let u = (e - emin) / scale;
                    u / scale * (-u).exp()
                }
            }
            Self::PointMasses { .. } => 0.0,
            Self::Interpolated { nodes, .. } => {
                if e < nodes[0].0 || e > nodes[nodes.len() - 1].0 {
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

    /// Spectral lower bound `E_min`.
    pub fn emin(&self) -> f64 {
        match self {
            Self::BreitWigner(bw) => bw.emin,
            Self::LinearOnset { emin, .. } => *emin,
            Self::PointMasses { masses, .. } => masses[0].0,
            Self::Interpolated { nodes, .. } => nodes[0].0,
        }
    }

    /// False for the Breit-Wigner density, whose first moment diverges
    /// logarithmically; downstream code must not use moment shortcuts then.
    pub fn has_finite_first_moment(&self) -> bool {
        !matches!(self, Self::BreitWigner(_))
    }

    /// `int E w(E) dE` where it exists.
    pub fn first_moment(&self) -> Option<f64> {
        match self {
            Self::BreitWigner(_) => None,
            Self::LinearOnset { emin, scale } => Some(emin + 2.0 * scale),
            Self::PointMasses { masses, .. } => {
                Some(masses.iter().map(|&(e, w)| e * w).sum())
            }
            Self::Interpolated { nodes, .. } => {
                // exact moment of each linear segment
                let mut m = 0.0;
                for w in nodes.windows(2) {
                    let (x0, y0) = w[0];
                    let (x1, y1) = w[1];
                    let h = x1 - x0;
                    m += h * (x0 * (2.0 * y0 + y1) + x1 * (y0 + 2.0 * y1)) / 6.0;
                }
                Some(m)
            }
        }
    }

    /// Analytic continuation for contour-rotated integrals. Defined for
    /// the analytic variants only.
    pub fn eval_complex(&self, z: C64) -> Option<C64> {
        match self {
            Self::BreitWigner(bw) => Some(bw.eval_complex(z)),
            Self::LinearOnset { emin, scale } => {
                let u = (z - *emin) / *scale;
                Some(u / *scale * (-u).exp())
            }
            _ => None,
        }
    }

    pub fn as_breit_wigner(&self) -> Option<&BreitWigner> {
        match self {
            Self::BreitWigner(bw) => Some(bw),
            _ => None,
        }
    }

    /// Normalization factor applied at construction (1 for closed-form
    /// normalized variants).
    pub fn applied_rescale(&self) -> f64 {
        match self {
            Self::PointMasses { applied_rescale, .. }
            | Self::Interpolated { applied_rescale, .. } => *applied_rescale,
            _ => 1.0,
        }
    }

    #[cfg(test)]
    pub(crate) fn with_scaled_norm(&self, factor: f64) -> Self {
        match self {
            Self::BreitWigner(bw) => Self::BreitWigner(BreitWigner {
                norm: bw.norm * factor,
                ..bw.clone()
            }),
            other => other.clone(),
        }
    }
}

/// Spectral measure of a designated subspace state of a finite model:
/// point masses `w_k = |<alpha|phi_k>|^2` at the eigenvalues of the full
/// Hamiltonian.
pub fn density_from_model(m: &FiniteLevelModel, state_index: usize) -> Result<SpectralDensity> {
    if !m.subspace_indices().contains(&state_index) {
        return Err(Error::Domain(format!(
            "state index {state_index} is not inside the model subspace"
        )));
    }
    let eig = crate::linalg::hermitian_eigen(m.hamiltonian());
    let n = m.dim();
    let mut masses = Vec::with_capacity(n);
    for k in 0..n {
        let overlap: C64 = eig.vectors[(state_index, k)];
        masses.push((eig.values[k], overlap.norm_sqr()));
    }
    SpectralDensity::point_masses(masses)
}

/// Numeric total weight over `[emin, ecut]` plus the analytic tail; used
/// by tests and the normalization invariant.
pub fn numeric_total_weight(d: &SpectralDensity, ecut: f64, tol: f64) -> f64 {
    match d {
        SpectralDensity::PointMasses { masses, .. } => masses.iter().map(|&(_, w)| w).sum(),
        _ => {
            let q = quad::integrate(
                &|e| C64::new(d.value(e), 0.0),
                d.emin(),
                ecut,
                tol,
            );
            let tail = match d {
                SpectralDensity::BreitWigner(bw) => bw.tail_mass(ecut),
                SpectralDensity::LinearOnset { emin, scale } => {
                    let u = (ecut - emin) / scale;
                    (1.0 + u) * (-u).exp()
                }
                _ => 0.0,
            };
            q.value.re + tail
        }
    }
}
