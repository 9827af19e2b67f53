//! Exact one-dimensional effective Hamiltonian `h(t) = i adot(t)/a(t)`,
//! crossover time, long-time asymptotics, and the surviving-population
//! estimate.

use crate::amplitude::{self, contour_eval};
use crate::error::{Error, Result};
use crate::spectral::SpectralDensity;
use num_complex::Complex64 as C64;

const I: C64 = C64::new(0.0, 1.0);

/// `h(t)` at one instant. `trusted` is false near zeros of `a(t)`, where
/// the spikes of the transition region live, and whenever `|a|` is close
/// to its numerical error.
#[derive(Debug, Clone, Copy)]
pub struct EffectiveHamiltonianSample {
    pub t: f64,
    pub h: C64,
    pub trusted: bool,
    pub amp: C64,
    pub amp_error: f64,
}

impl EffectiveHamiltonianSample {
    /// Instantaneous energy `Re h`.
    pub fn energy(&self) -> f64 {
        self.h.re
    }

    /// Instantaneous decay rate `-2 Im h`.
    pub fn rate(&self) -> f64 {
        -2.0 * self.h.im
    }
}

#[derive(Debug, Clone)]
pub struct TransitionTimeResult {
    pub t_as: f64,
    pub bracket: (f64, f64),
    pub iterations: u32,
    pub residual: f64,
    /// Later re-crossings of `|a_exp| = |a_non|` (interference wiggles),
    /// if any; `t_as` itself is always the first crossing.
    pub recrossings: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct AsymptoticFit {
    pub emin_estimate: f64,
    pub c1: f64,
    pub c2: f64,
    pub residual: f64,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, Copy)]
pub struct PopulationEstimate {
    pub n0: f64,
    pub t: f64,
    pub n_surviving: f64,
    /// `exp(gamma0 * t_as)`: the source strength needed for survivors at
    /// the crossover (defined for the Breit-Wigner density).
    pub threshold: Option<f64>,
    pub exceeds_threshold: Option<bool>,
}

/// Evaluate `h(t) = i adot / a` with the best available method for the
/// density variant.
pub fn effective_hamiltonian(
    d: &SpectralDensity,
    t: f64,
    tol: f64,
) -> Result<EffectiveHamiltonianSample> {
    let (a, adot, a_err, split_scales) = match d {
        SpectralDensity::PointMasses { masses, .. } => {
            let a: C64 = masses.iter().map(|&(e, w)| w * (-I * e * t).exp()).sum();
            let adot: C64 = masses
                .iter()
                .map(|&(e, w)| -I * e * w * (-I * e * t).exp())
                .sum();
            (a, adot, 1e-15 * masses.len() as f64, None)
        }
        SpectralDensity::BreitWigner(_) | SpectralDensity::LinearOnset { .. } => {
            if !(t > 0.0) {
                return Err(Error::Domain(format!(
                    "effective hamiltonian requires t > 0 for continuum densities, got {t}"
                )));
            }
            let ev = contour_eval(d, t)?;
            let split = amplitude::survival_contour(d, t)?;
            (
                ev.a,
                ev.adot,
                ev.a_err,
                Some((split.a_exp.norm(), split.a_non.norm())),
            )
        }
        SpectralDensity::Interpolated { .. } => {
            let a = amplitude::survival_direct(d, t, tol)?;
            let adot = amplitude::survival_derivative(d, t, tol)?;
            (a, adot, tol, None)
        }
    };
    let amp_norm = a.norm();
    if amp_norm < 2.0 * a_err {
        return Err(Error::DivisionHazard { t, amplitude: amp_norm, error: a_err });
    }
    // Near-cancellation of the exponential and background parts marks the
    // transition-region spikes; h is ill-determined there even though a
    // itself is computed accurately.
    let near_zero = match split_scales {
        Some((e, n)) => amp_norm < 10.0 * e.min(n),
        None => false,
    };
    let trusted = !near_zero && amp_norm >= 10.0 * a_err;
    Ok(EffectiveHamiltonianSample { t, h: I * adot / a, trusted, amp: a, amp_error: a_err })
}

/// First time `t > tau` where `|a_exp(t)| = |a_non(t)|`, by bisection on
/// `log(|a_exp| / |a_non|)`.
pub fn transition_time(d: &SpectralDensity) -> Result<TransitionTimeResult> {
    let bw = d.as_breit_wigner().ok_or_else(|| {
        Error::Domain("transition time is defined for the Breit-Wigner density".into())
    })?;
    let tau = 1.0 / bw.gamma0;
    let log_ratio = |t: f64| -> Result<f64> {
        let split = amplitude::survival_contour(d, t)?;
        Ok(split.a_exp.norm().ln() - split.a_non.norm().ln())
    };
    let mut lo = tau;
    let f_lo = log_ratio(lo)?;
    if f_lo <= 0.0 {
        return Err(Error::NoCrossing { lo, hi: lo });
    }
    let mut hi = 2.0 * tau;
    let mut f_hi = log_ratio(hi)?;
    while f_hi > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e9 * tau {
            return Err(Error::NoCrossing { lo: tau, hi });
        }
        f_hi = log_ratio(hi)?;
    }
    let bracket = (lo, hi);
    let mut iterations = 0;
    while (hi - lo) > 1e-12 * hi && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if log_ratio(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let t_as = 0.5 * (lo + hi);
    let split = amplitude::survival_contour(d, t_as)?;
    let residual = (split.a_exp.norm_sqr() - split.a_non.norm_sqr()).abs()
        / split.a_exp.norm_sqr();

    // scan for later re-crossings up to 5 t_as
    let mut recrossings = Vec::new();
    let mut prev_t = t_as * 1.001;
    let mut prev_f = log_ratio(prev_t)?;
    for k in 1..=200 {
        let t = t_as * 1.001 * (5.0f64 / 1.001).powf(k as f64 / 200.0);
        let f = log_ratio(t)?;
        if prev_f.signum() != f.signum() {
            let (mut a, mut b) = (prev_t, t);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if log_ratio(m)?.signum() == prev_f.signum() {
                    a = m;
                } else {
                    b = m;
                }
            }
            recrossings.push(0.5 * (a + b));
        }
        prev_t = t;
        prev_f = f;
    }
    Ok(TransitionTimeResult { t_as, bracket, iterations, residual, recrossings })
}

/// Least-squares fit of `h(t)` against the basis `{1, -i/t, (-i/t)^2}`
/// with real coefficients. With `emin_known` supplied only `c1, c2` are
/// fitted.
pub fn asymptotic_fit(
    samples: &[EffectiveHamiltonianSample],
    emin_known: Option<f64>,
) -> Result<AsymptoticFit> {
    let trusted: Vec<&EffectiveHamiltonianSample> =
        samples.iter().filter(|s| s.trusted).collect();
    if trusted.len() < 6 {
        return Err(Error::Domain(format!(
            "asymptotic fit needs at least 6 trusted samples, got {}",
            trusted.len()
        )));
    }
    let m = trusted.len();
    let ncols = if emin_known.is_some() { 2 } else { 3 };
    let mut a = nalgebra::DMatrix::<f64>::zeros(2 * m, ncols);
    let mut b = nalgebra::DVector::<f64>::zeros(2 * m);
    for (i, s) in trusted.iter().enumerate() {
        let t = s.t;
        // Re h = emin - c2 / t^2 ; Im h = -c1 / t
        match emin_known {
            None => {
                a[(2 * i, 0)] = 1.0;
                a[(2 * i, 2)] = -1.0 / (t * t);
                a[(2 * i + 1, 1)] = -1.0 / t;
                b[2 * i] = s.h.re;
                b[2 * i + 1] = s.h.im;
            }
            Some(emin) => {
                a[(2 * i, 1)] = -1.0 / (t * t);
                a[(2 * i + 1, 0)] = -1.0 / t;
                b[2 * i] = s.h.re - emin;
                b[2 * i + 1] = s.h.im;
            }
        }
    }
    // column scaling for a meaningful condition estimate
    let mut scales = vec![0.0f64; ncols];
    for j in 0..ncols {
        scales[j] = a.column(j).norm();
        if scales[j] == 0.0 {
            return Err(Error::IllConditionedFit(f64::INFINITY));
        }
        for i in 0..2 * m {
            a[(i, j)] /= scales[j];
        }
    }
    let svd = nalgebra::SVD::new(a.clone(), true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = smax / smin;
    if !cond.is_finite() || cond > 1e8 {
        return Err(Error::IllConditionedFit(cond));
    }
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::Eigen(e.to_string()))?;
    let resid = (&a * &x - &b).norm() / (2.0 * m as f64).sqrt();
    let coef: Vec<f64> = (0..ncols).map(|j| x[j] / scales[j]).collect();
    let (emin_estimate, c1, c2) = match emin_known {
        None => (coef[0], coef[1], coef[2]),
        Some(emin) => (emin, coef[0], coef[1]),
    };
    let tmin = trusted.iter().map(|s| s.t).fold(f64::INFINITY, f64::min);
    let tmax = trusted.iter().map(|s| s.t).fold(0.0, f64::max);
    Ok(AsymptoticFit { emin_estimate, c1, c2, residual: resid, window: (tmin, tmax) })
}

/// Log-log slope of `P(t)` over the window, sign-flipped.
pub fn tail_exponent(d: &SpectralDensity, t_window: (f64, f64)) -> Result<f64> {
    let (lo, hi) = t_window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Domain(format!("bad tail window ({lo}, {hi})")));
    }
    let n = 40;
    let grid: Vec<f64> = (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect();
    let curve = amplitude::survival_probability_curve(d, &grid, 1e-12)?;
    let pts: Vec<(f64, f64)> = curve.iter().map(|&(t, p)| (t.ln(), p.ln())).collect();
    Ok(-fit_slope(&pts))
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Surviving count `P(t) * n0`, with the source-strength threshold
/// `exp(gamma0 * t_as)` reported for the Breit-Wigner density.
pub fn surviving_population(d: &SpectralDensity, n0: f64, t: f64) -> Result<PopulationEstimate> {
    if !(n0 > 0.0) {
        return Err(Error::Domain(format!("initial count must be positive, got {n0}")));
    }
    let (a, _) = amplitude::survival_best(d, t, 1e-10)?;
    let p = a.norm_sqr().min(1.0);
    let (threshold, exceeds) = match d.as_breit_wigner() {
        Some(bw) => {
            let t_as = transition_time(d)?.t_as;
            let thr = (bw.gamma0 * t_as).exp();
            (Some(thr), Some(n0 > thr))
        }
        None => (None, None),
    };
    Ok(PopulationEstimate {
        n0,
        t,
        n_surviving: p * n0,
        threshold,
        exceeds_threshold: exceeds,
    })
}
