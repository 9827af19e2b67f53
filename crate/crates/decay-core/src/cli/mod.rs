//! Command implementations behind the `decay` binary: figure presets,
//! curve sweeps, and model-file reports.

pub mod config;
pub mod output;

use crate::error::{Error, Result};
use crate::{amplitude, exact, heff1d, spectral, subspace};
use config::{RunConfig, Spacing};
use output::{CsvTable, Plot};
use rayon::prelude::*;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn base_comments(command: &str, cfg: &RunConfig) -> Vec<String> {
    let mut out = vec![
        format!("decay {VERSION}"),
        format!("command = {command}"),
    ];
    out.extend(cfg.raw.header_lines());
    out
}

fn resolve_density(cfg: &RunConfig) -> Result<spectral::SpectralDensity> {
    if let Some(path) = &cfg.model.file {
        let model = subspace::load_model(path)?;
        return spectral::density_from_model(&model, cfg.model.state);
    }
    let d = &cfg.density;
    match d.kind.as_str() {
        "breit-wigner" => spectral::SpectralDensity::breit_wigner(d.e0, d.gamma0, d.emin),
        "linear-onset" => spectral::SpectralDensity::linear_onset(d.emin, d.scale),
        other => Err(Error::Config(format!("unknown density kind `{other}`"))),
    }
}

fn build_grid(cfg: &RunConfig) -> Result<Vec<f64>> {
    let grid = cfg
        .grid
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs a [grid] block".into()))?;
    Ok(match grid.spacing {
        Spacing::Linear => crate::lin_spaced(grid.tmin, grid.tmax, grid.points),
        Spacing::Log => crate::log_spaced(grid.tmin, grid.tmax, grid.points),
    })
}

fn emit(cfg: &RunConfig, table: &CsvTable, plot: Option<&Plot>) -> Result<()> {
    let text = table.render(cfg.output.precision);
    match &cfg.output.csv {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    if let Some(plot) = plot {
        if let Some(path) = &cfg.output.svg {
            std::fs::write(path, output::render_svg(plot))?;
        }
    }
    Ok(())
}

/// Fig. 1 preset: `P(t)` on a log-spaced grid `t/tau` in
/// `[0.1, 10 t_as/tau]`, log-y SVG.
pub fn cmd_fig1(cfg: &RunConfig) -> Result<()> {
    let d = resolve_density(cfg)?;
    let tau = 1.0 / cfg.density.gamma0;
    let (lo, hi, points) = match &cfg.grid {
        Some(g) => (g.tmin, g.tmax, g.points),
        None => {
            let t_as = heff1d::transition_time(&d)?.t_as;
            (0.1, 10.0 * t_as / tau, 600)
        }
    };
    let grid_tau = crate::log_spaced(lo, hi, points);
    let grid: Vec<f64> = grid_tau.iter().map(|&x| x * tau).collect();
    let curve = amplitude::survival_probability_curve(&d, &grid, 1e-10)?;
    let rows: Vec<Vec<f64>> = grid_tau
        .iter()
        .zip(curve.iter())
        .map(|(&x, &(_, p))| vec![x, p])
        .collect();
    let table = CsvTable {
        comments: base_comments("fig1", cfg),
        columns: vec!["t_over_tau".into(), "p".into()],
        rows,
    };
    let plot = Plot {
        title: "survival probability".into(),
        x_label: "t / tau".into(),
        y_label: "P(t)".into(),
        log_x: false,
        log_y: true,
        points: table.rows.iter().map(|r| (r[0], r[1])).collect(),
    };
    emit(cfg, &table, Some(&plot))
}

/// Fig. 2 preset: the instantaneous energy and rate around the
/// transition region, dense there and sparse elsewhere, out to
/// `50 t_as`.
pub fn cmd_fig2(cfg: &RunConfig) -> Result<()> {
    let d = resolve_density(cfg)?;
    let tau = 1.0 / cfg.density.gamma0;
    let t_as = heff1d::transition_time(&d)?.t_as;
    let mut grid = crate::log_spaced(0.5 * tau, 0.699 * t_as, 150);
    grid.extend(crate::lin_spaced(0.7 * t_as, 1.3 * t_as, 1200));
    grid.extend(crate::log_spaced(1.301 * t_as, 50.0 * t_as, 150));
    let samples: Result<Vec<heff1d::EffectiveHamiltonianSample>> = grid
        .par_iter()
        .map(|&t| heff1d::effective_hamiltonian(&d, t, 1e-10))
        .collect();
    let samples = samples?;
    let e0 = cfg.density.e0;
    let rows: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| {
            vec![
                s.t / tau,
                s.h.re / e0,
                -2.0 * s.h.im / cfg.density.gamma0,
                if s.trusted { 1.0 } else { 0.0 },
            ]
        })
        .collect();
    let table = CsvTable {
        comments: {
            let mut c = base_comments("fig2", cfg);
            c.push(format!("t_as_over_tau = {}", t_as / tau));
            c
        },
        columns: vec![
            "t_over_tau".into(),
            "re_h_over_e0".into(),
            "rate_over_gamma0".into(),
            "trusted".into(),
        ],
        rows,
    };
    let plot = Plot {
        title: "instantaneous energy".into(),
        x_label: "t / tau".into(),
        y_label: "Re h / E0".into(),
        log_x: true,
        log_y: false,
        points: table.rows.iter().map(|r| (r[0], r[1])).collect(),
    };
    emit(cfg, &table, Some(&plot))
}

/// Amplitude sweep over an explicit grid: `t, Re a, Im a, P`.
pub fn cmd_survival(cfg: &RunConfig) -> Result<()> {
    let d = resolve_density(cfg)?;
    let grid = build_grid(cfg)?;
    let rows: Result<Vec<Vec<f64>>> = grid
        .par_iter()
        .map(|&t| {
            let (a, _) = amplitude::survival_best(&d, t, 1e-10)?;
            Ok(vec![t, a.re, a.im, a.norm_sqr()])
        })
        .collect();
    let table = CsvTable {
        comments: base_comments("survival", cfg),
        columns: vec!["t".into(), "re_a".into(), "im_a".into(), "p".into()],
        rows: rows?,
    };
    emit(cfg, &table, None)
}

/// Effective-Hamiltonian sweep: `t, Re h, Im h, rate, trusted`.
pub fn cmd_heff(cfg: &RunConfig) -> Result<()> {
    let d = resolve_density(cfg)?;
    let grid = build_grid(cfg)?;
    let rows: Result<Vec<Vec<f64>>> = grid
        .par_iter()
        .map(|&t| {
            let s = heff1d::effective_hamiltonian(&d, t, 1e-10)?;
            Ok(vec![t, s.h.re, s.h.im, s.rate(), if s.trusted { 1.0 } else { 0.0 }])
        })
        .collect();
    let table = CsvTable {
        comments: base_comments("heff", cfg),
        columns: vec![
            "t".into(),
            "re_h".into(),
            "im_h".into(),
            "rate".into(),
            "trusted".into(),
        ],
        rows: rows?,
    };
    emit(cfg, &table, None)
}

/// Transition time: prints `t_as` and the bracket to stdout, optionally
/// emits a one-row CSV.
pub fn cmd_tas(cfg: &RunConfig) -> Result<()> {
    let d = resolve_density(cfg)?;
    let r = heff1d::transition_time(&d)?;
    let tau = 1.0 / cfg.density.gamma0;
    println!(
        "t_as = {:.12e} (t_as/tau = {:.6}) bracket = [{:.12e}, {:.12e}] residual = {:.3e}",
        r.t_as,
        r.t_as / tau,
        r.bracket.0,
        r.bracket.1,
        r.residual
    );
    for rc in &r.recrossings {
        println!("recrossing at t = {rc:.12e}");
    }
    if cfg.output.csv.is_some() {
        let table = CsvTable {
            comments: base_comments("tas", cfg),
            columns: vec!["t_as".into(), "bracket_lo".into(), "bracket_hi".into()],
            rows: vec![vec![r.t_as, r.bracket.0, r.bracket.1]],
        };
        emit(cfg, &table, None)?;
    }
    Ok(())
}

fn require_model(cfg: &RunConfig) -> Result<subspace::FiniteLevelModel> {
    let path = cfg
        .model
        .file
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs [model] file = <path>".into()))?;
    subspace::load_model(path)
}

/// Long-time subspace reduction: emits `V` and `H_eff = PHP + V` with
/// the mass/width decomposition, one row per matrix entry.
pub fn cmd_subspace(cfg: &RunConfig) -> Result<()> {
    let model = require_model(cfg)?;
    let blocks = model.blocks();
    let group_tol = cfg
        .model
        .group_tol
        .unwrap_or_else(|| subspace::default_group_tol(&blocks.php));
    let projectors = subspace::eigenprojectors(&blocks.php, group_tol)?;
    let r = subspace::v_parallel_inf(&model, &projectors, cfg.model.eta)?;
    let n = model.n();
    let mut rows = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            rows.push(vec![
                i as f64,
                j as f64,
                r.v[(i, j)].re,
                r.v[(i, j)].im,
                r.h_eff.matrix[(i, j)].re,
                r.h_eff.matrix[(i, j)].im,
                r.h_eff.mass[(i, j)].re,
                r.h_eff.mass[(i, j)].im,
                r.h_eff.gamma[(i, j)].re,
                r.h_eff.gamma[(i, j)].im,
            ]);
        }
    }
    let mut comments = base_comments("subspace", cfg);
    if !model.is_continuum() {
        comments.push(format!(
            "eta = {}",
            cfg.model.eta.unwrap_or_else(|| model.default_eta())
        ));
    }
    comments.push(format!("group_tol = {group_tol}"));
    let table = CsvTable {
        comments,
        columns: vec![
            "i".into(),
            "j".into(),
            "re_v".into(),
            "im_v".into(),
            "re_h".into(),
            "im_h".into(),
            "re_mass".into(),
            "im_mass".into(),
            "re_gamma".into(),
            "im_gamma".into(),
        ],
        rows,
    };
    emit(cfg, &table, None)
}

/// Approximation-error table of the exact effective Hamiltonian against
/// the subspace approximants, on a uniform grid starting at 0.
pub fn cmd_exact_compare(cfg: &RunConfig) -> Result<()> {
    let model = require_model(cfg)?;
    let grid_cfg = cfg
        .grid
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs a [grid] block".into()))?;
    if grid_cfg.spacing != Spacing::Linear || grid_cfg.tmin != 0.0 {
        return Err(Error::Config(
            "exact-compare needs a linear grid starting at tmin = 0".into(),
        ));
    }
    let grid = crate::lin_spaced(grid_cfg.tmin, grid_cfg.tmax, grid_cfg.points);
    let report = exact::compare_approximations(&model, &grid)?;
    let rows: Vec<Vec<f64>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.t,
                r.err_php,
                r.err_v1,
                r.err_vinf,
                r.err_loy.unwrap_or(f64::NAN),
                if r.singular { 1.0 } else { 0.0 },
            ]
        })
        .collect();
    let mut comments = base_comments("exact-compare", cfg);
    comments.push(format!("max_norm_l = {:e}", report.max_norm_l));
    let table = CsvTable {
        comments,
        columns: vec![
            "t".into(),
            "err_php".into(),
            "err_v1".into(),
            "err_vinf".into(),
            "err_loy".into(),
            "singular".into(),
        ],
        rows,
    };
    emit(cfg, &table, None)
}
