//! Experiment drivers: each turns a config into a [`Report`].

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use statrs::distribution::{ContinuousCDF, Normal};

use super::config::{Experiment, ExperimentConfig, InitialData, PotentialKind, RadialKind};
use super::emit::{Check, Report, Skipped, Table};
use super::fit::fit_rate;
use crate::bogoliubov::{clt_variance, theta_along, ThetaOptions};
use crate::exact::{
    assemble_hamiltonian, fluctuation_number, hartree_at, propagate, reduced_density, trace_norm_distance,
    ReducedDensity,
};
use crate::fock::{coherent_state, sector_project, FockBasis, FockVector};
use crate::lattice::{laplacian_matrix, ExternalPotential, Grid1D, LatticeModel, Orbital, PairPotential};
use crate::meanfield::{
    evolve, gp_minimize, EvolveOptions, MeanFieldProblem, MinimizeOptions, Trajectory, ENERGY_ROUNDOFF,
};
use crate::scattering::{
    check_identity, coupling_constants, scaled_direct, scaled_mass, soft_sphere_scattering_length,
    solve_zero_energy, Profile, RadialGrid, RadialPotential, ScatteringOptions, ScatteringSolution,
};
use crate::{Error, Result, C64};

/// Run the experiment named in `cfg`.
pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::Converge => run_meanfield_convergence(cfg),
        Experiment::Fluct => run_fluctuation_growth(cfg),
        Experiment::Clt => run_clt(cfg),
        Experiment::Gp => run_gp_suite(cfg),
        Experiment::Minimize => run_minimize(cfg),
        Experiment::Scatter => run_scatter(cfg),
    }
}

/// Process exit code for a finished run.
pub fn exit_code(outcome: &Result<Report>) -> i32 {
    match outcome {
        Ok(r) if r.passed() => 0,
        Ok(_) => 1,
        Err(e) => e.exit_code(),
    }
}

pub fn lattice_model(cfg: &ExperimentConfig) -> Result<LatticeModel> {
    let grid = Grid1D::new(cfg.sites, cfg.spacing)?;
    let pair = match cfg.potential {
        PotentialKind::Zero => PairPotential::zero(grid),
        PotentialKind::Gaussian => PairPotential::gaussian(grid, cfg.strength, cfg.width)?,
    };
    let external = trap(&grid, cfg.trap)?;
    LatticeModel::new(pair, external)
}

fn trap(grid: &Grid1D, strength: f64) -> Result<Option<ExternalPotential>> {
    Ok(if strength > 0.0 {
        Some(ExternalPotential::cosine_trap(grid, strength)?)
    } else {
        None
    })
}

pub fn initial_orbital(cfg: &ExperimentConfig, grid: Grid1D) -> Result<Orbital> {
    let amps = cfg
        .orbital_re
        .iter()
        .zip(&cfg.orbital_im)
        .map(|(&re, &im)| C64::new(re, im))
        .collect();
    Orbital::new(grid, amps)?
        .normalized()
        .map_err(|_| Error::Config("initial orbital must be nonzero".into()))
}

/// Hartree trajectory stored at every step.
pub fn hartree_trajectory(model: &LatticeModel, phi: Orbital, t: f64, dt: f64) -> Result<Trajectory> {
    let problem = MeanFieldProblem::hartree(model.pair.clone(), model.external.clone(), phi)?;
    evolve(
        &problem,
        t,
        &EvolveOptions {
            dt,
            save_every: 1,
            ..EvolveOptions::default()
        },
    )
}

fn initial_state(
    kind: InitialData,
    phi: &Orbital,
    n: usize,
    basis: &Arc<FockBasis>,
    tail_tol: f64,
) -> Result<FockVector> {
    let scaled = phi.scaled(C64::new((n as f64).sqrt(), 0.0));
    match kind {
        InitialData::Coherent => Ok(coherent_state(&scaled, basis, tail_tol)?.state),
        // the N-sector of a coherent state is proportional to φ^{⊗N}
        InitialData::Product => sector_project(n, &coherent_state(&scaled, basis, 1.0)?.state)?.normalized(),
    }
}

/// Exact-versus-Hartree observables for one (t, N) pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub t: f64,
    pub n: usize,
    pub n_max: usize,
    pub basis_dim: usize,
    pub trace_error_1: f64,
    pub trace_error_2: f64,
    /// Excitation number around the Hartree coherent state; coherent data only.
    pub fluct_number: Option<f64>,
    pub truncation_defect: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    pub skipped: Vec<Skipped>,
}

/// Propagate the configured initial state for every N and compare it with
/// the Hartree trajectory at each output time.
pub fn exact_sweep(cfg: &ExperimentConfig) -> Result<Sweep> {
    let model = lattice_model(cfg)?;
    let phi = initial_orbital(cfg, model.grid)?;
    let times = cfg.times();
    let traj = hartree_trajectory(&model, phi.clone(), cfg.t_final, cfg.dt)?;
    let projectors = times
        .iter()
        .map(|&t| {
            let phi_t = hartree_at(&traj, t)?;
            Ok((ReducedDensity::projector(&phi_t, 1)?, ReducedDensity::projector(&phi_t, 2)?, phi_t))
        })
        .collect::<Result<Vec<_>>>()?;
    let opts = cfg.fock_options();
    let mut sweep = Sweep::default();
    let mut n_list = cfg.n_list.clone();
    n_list.sort_unstable();
    n_list.dedup();
    for n in n_list {
        let n_max = match cfg.initial {
            InitialData::Coherent => cfg.cutoff(n),
            InitialData::Product => n,
        };
        let basis = match FockBasis::with_cap(model.grid.num_sites(), n_max, cfg.basis_cap) {
            Ok(b) => b,
            Err(e @ Error::BasisTooLarge { .. }) => {
                sweep.skipped.push(Skipped { n, reason: e.to_string() });
                continue;
            }
            Err(e) => return Err(Error::at_n(n)(e)),
        };
        let rows = sweep_one(cfg, &model, &phi, n, &basis, &times, &projectors, &opts).map_err(Error::at_n(n))?;
        sweep.rows.extend(rows);
    }
    sweep.rows.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.n.cmp(&b.n)));
    Ok(sweep)
}

#[allow(clippy::too_many_arguments)]
fn sweep_one(
    cfg: &ExperimentConfig,
    model: &LatticeModel,
    phi: &Orbital,
    n: usize,
    basis: &Arc<FockBasis>,
    times: &[f64],
    projectors: &[(ReducedDensity, ReducedDensity, Orbital)],
    opts: &crate::fock::FockOptions,
) -> Result<Vec<SweepRow>> {
    let h = assemble_hamiltonian(model, n, basis)?;
    let mut psi = initial_state(cfg.initial, phi, n, basis, cfg.tail_tol)?;
    let mut now = 0.0;
    let mut rows = Vec::with_capacity(times.len());
    for (&t, (p1, p2, phi_t)) in times.iter().zip(projectors) {
        if t > now {
            psi = propagate(&h, &psi, t - now, t - now, &opts.krylov)?.0;
            now = t;
        }
        let defect = psi.top_sector_weight() / psi.norm_sqr();
        if cfg.initial == InitialData::Coherent && defect > cfg.truncation_tol {
            return Err(Error::TruncationInadequate {
                what: format!("top-sector weight at t = {t} with cutoff {}", basis.n_max()),
                defect,
                tolerance: cfg.truncation_tol,
            });
        }
        let g1 = reduced_density(&psi, 1)?;
        let g2 = reduced_density(&psi, 2)?;
        let fluct_number = match cfg.initial {
            InitialData::Coherent => Some(fluctuation_number(&psi, phi_t, n)?),
            InitialData::Product => None,
        };
        rows.push(SweepRow {
            t,
            n,
            n_max: basis.n_max(),
            basis_dim: basis.len(),
            trace_error_1: trace_norm_distance(&g1, p1)?,
            trace_error_2: trace_norm_distance(&g2, p2)?,
            fluct_number,
            truncation_defect: defect,
        });
    }
    Ok(rows)
}

fn is_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

/// Errors at the final time, in increasing N.
fn final_points(sweep: &Sweep, t: f64, pick: impl Fn(&SweepRow) -> f64) -> Vec<(f64, f64)> {
    sweep.rows.iter().filter(|r| is_close(r.t, t)).map(|r| (r.n as f64, pick(r))).collect()
}

fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

/// Convergence report from a finished sweep.
pub fn convergence_report(cfg: &ExperimentConfig, sweep: &Sweep) -> Report {
    let mut table = Table::new(&[
        "t",
        "N",
        "n_max",
        "basis_dim",
        "trace_error_1",
        "trace_error_2",
        "truncation_defect",
    ]);
    for r in &sweep.rows {
        table.push(vec![
            r.t.into(),
            r.n.into(),
            r.n_max.into(),
            r.basis_dim.into(),
            r.trace_error_1.into(),
            r.trace_error_2.into(),
            r.truncation_defect.into(),
        ]);
    }
    let mut report = Report::new(cfg, table);
    report.skipped = sweep.skipped.clone();
    let p1 = final_points(sweep, cfg.t_final, |r| r.trace_error_1);
    let p2 = final_points(sweep, cfg.t_final, |r| r.trace_error_2);
    let e1: Vec<f64> = p1.iter().map(|p| p.1).collect();
    let e2: Vec<f64> = p2.iter().map(|p| p.1).collect();
    if cfg.potential == PotentialKind::Zero || cfg.strength == 0.0 {
        let worst = sweep
            .rows
            .iter()
            .map(|r| r.trace_error_1.max(r.trace_error_2))
            .fold(0.0, f64::max);
        report.checks.push(Check::new(
            "free_errors_at_truncation_level",
            worst <= 1e-8,
            format!("largest trace-norm error {worst:e}"),
        ));
        report.results = json!({ "largest_error": worst });
        return report;
    }
    report.checks.push(Check::new(
        "trace_error_1_decreasing",
        e1.len() >= 2 && strictly_decreasing(&e1),
        format!("errors at t = {}: {e1:?}", cfg.t_final),
    ));
    report.checks.push(Check::new(
        "trace_error_2_decreasing",
        e2.len() >= 2 && strictly_decreasing(&e2),
        format!("errors at t = {}: {e2:?}", cfg.t_final),
    ));
    let fit1 = fit_rate(&p1);
    let fit2 = fit_rate(&p2).ok();
    match &fit1 {
        Ok(fit) => report.checks.push(Check::new(
            "slope_window",
            fit.slope_within(cfg.slope_min, cfg.slope_max),
            format!(
                "slope {:.4} ± {:.4} against [{}, {}]",
                fit.slope, fit.half_width, cfg.slope_min, cfg.slope_max
            ),
        )),
        Err(e) => report.checks.push(Check::new("slope_window", false, e.to_string())),
    }
    report.results = json!({
        "t": cfg.t_final,
        "fit_order_1": fit1.ok(),
        "fit_order_2": fit2,
    });
    report
}

/// Fluctuation-number report from a finished sweep.
pub fn fluctuation_report(cfg: &ExperimentConfig, sweep: &Sweep) -> Report {
    let mut table = Table::new(&["t", "N", "fluct_number", "truncation_defect"]);
    for r in &sweep.rows {
        table.push(vec![
            r.t.into(),
            r.n.into(),
            r.fluct_number.unwrap_or(f64::NAN).into(),
            r.truncation_defect.into(),
        ]);
    }
    let mut report = Report::new(cfg, table);
    report.skipped = sweep.skipped.clone();
    let mut max_over_n = Vec::new();
    for t in cfg.times() {
        let m = sweep
            .rows
            .iter()
            .filter(|r| is_close(r.t, t))
            .filter_map(|r| r.fluct_number)
            .fold(f64::NAN, f64::max);
        max_over_n.push(json!({ "t": t, "max_fluct_number": m }));
    }
    // uniformity over the upper half of the N range at the final time
    let finals = final_points(sweep, cfg.t_final, |r| r.fluct_number.unwrap_or(f64::NAN));
    let upper = &finals[finals.len() / 2..];
    let values: Vec<f64> = upper.iter().map(|p| p.1).collect();
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let spread = (hi - lo) / lo.abs().max(f64::MIN_POSITIVE);
    let uniform = values.len() >= 2 && values.iter().all(|x| x.is_finite()) && spread < cfg.fluct_spread;
    report.checks.push(Check::new(
        "fluct_uniform_in_n",
        uniform,
        format!(
            "relative spread {spread:.4} over N = {:?} at t = {} (limit {})",
            upper.iter().map(|p| p.0 as usize).collect::<Vec<_>>(),
            cfg.t_final,
            cfg.fluct_spread
        ),
    ));
    report.results = json!({ "max_over_n": max_over_n, "spread": spread });
    report
}

pub fn run_meanfield_convergence(cfg: &ExperimentConfig) -> Result<Report> {
    Ok(convergence_report(cfg, &exact_sweep(cfg)?))
}

pub fn run_fluctuation_growth(cfg: &ExperimentConfig) -> Result<Report> {
    if cfg.initial != InitialData::Coherent {
        return Err(Error::Config("the fluctuation number needs coherent initial data".into()));
    }
    Ok(fluctuation_report(cfg, &exact_sweep(cfg)?))
}

/// Law of `N^{−1/2}·Σ_j (O_j − center)` for a diagonal one-body observable.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CltLaw {
    /// Sorted distinct outcomes with their probabilities.
    pub atoms: Vec<(f64, f64)>,
    pub mean: f64,
    pub variance: f64,
    pub third_moment: f64,
    pub fourth_moment: f64,
    /// Number of position configurations `M^N` (saturating).
    pub configurations: u128,
    pub sampled: bool,
}

/// How to obtain the law when `M^N` exceeds the enumeration budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sampling {
    pub samples: usize,
    pub seed: u64,
}

/// Outcome law of the centered, scaled sum in the N-particle sector of `psi`.
///
/// Configurations are grouped by occupation numbers, so enumeration costs
/// one term per occupation pattern while covering all `M^N` outcomes.
pub fn clt_law(
    psi: &FockVector,
    n: usize,
    observable: &DMatrix<C64>,
    center: f64,
    budget: u64,
    sampling: Option<Sampling>,
) -> Result<CltLaw> {
    let m = psi.basis().modes();
    if observable.nrows() != m || observable.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: observable.nrows(),
        });
    }
    let off = (0..m)
        .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| observable[(i, j)].norm())
        .fold(0.0, f64::max);
    let imag = (0..m).map(|i| observable[(i, i)].im.abs()).fold(0.0, f64::max);
    if off > 0.0 || imag > 0.0 {
        return Err(Error::InvalidInput(
            "observable must be real and diagonal in the position basis".into(),
        ));
    }
    let diag: Vec<f64> = (0..m).map(|i| observable[(i, i)].re).collect();
    let basis = psi.basis();
    let range = basis.sector_range(n);
    let scale = 1.0 / (n as f64).sqrt();
    let outcome = |j: usize| -> f64 {
        basis
            .occupation(j)
            .iter()
            .zip(&diag)
            .map(|(&k, o)| k as f64 * (o - center))
            .sum::<f64>()
            * scale
    };
    let weights: Vec<f64> = psi.amps()[range.clone()].iter().map(|c| c.norm_sqr()).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidInput(format!("state has no weight in sector {n}")));
    }
    let configurations = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    let mut raw: Vec<(f64, f64)> = if configurations <= budget as u128 {
        range.clone().zip(&weights).map(|(j, w)| (outcome(j), w / total)).collect()
    } else if let Some(s) = sampling {
        let dist = WeightedIndex::new(&weights).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let p = 1.0 / s.samples as f64;
        (0..s.samples).map(|_| (outcome(range.start + dist.sample(&mut rng)), p)).collect()
    } else {
        return Err(Error::EnumerationBudget {
            size: usize::try_from(configurations).unwrap_or(usize::MAX),
            budget: budget as usize,
        });
    };
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    for (x, p) in raw {
        match atoms.last_mut() {
            Some(last) if (last.0 - x).abs() <= 1e-12 * x.abs().max(1.0) => last.1 += p,
            _ => atoms.push((x, p)),
        }
    }
    let mean: f64 = atoms.iter().map(|(x, p)| x * p).sum();
    let central = |k: i32| -> f64 { atoms.iter().map(|(x, p)| (x - mean).powi(k) * p).sum() };
    Ok(CltLaw {
        mean,
        variance: central(2),
        third_moment: central(3),
        fourth_moment: central(4),
        atoms,
        configurations,
        sampled: configurations > budget as u128,
    })
}

/// `sup_x |F(x) − Φ(x/σ)|` for the atomic law `F`, checking both one-sided
/// limits at every atom. `σ = 0` compares against a unit step at 0.
pub fn kolmogorov_distance(law: &CltLaw, variance: f64) -> Result<f64> {
    // (left limit, value) of the reference distribution function
    let cdf: Box<dyn Fn(f64) -> (f64, f64)> = if variance > 0.0 {
        let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Box::new(move |x| {
            let g = normal.cdf(x);
            (g, g)
        })
    } else {
        Box::new(|x: f64| (if x > 0.0 { 1.0 } else { 0.0 }, if x >= 0.0 { 1.0 } else { 0.0 }))
    };
    let mut below = 0.0;
    let mut worst = 0.0f64;
    for &(x, p) in &law.atoms {
        let (g_left, g) = cdf(x);
        worst = worst.max((below - g_left).abs());
        below += p;
        worst = worst.max((below - g).abs());
    }
    Ok(worst)
}

pub fn run_clt(cfg: &ExperimentConfig) -> Result<Report> {
    let model = lattice_model(cfg)?;
    let phi = initial_orbital(cfg, model.grid)?;
    let m = model.grid.num_sites();
    let o = DMatrix::from_diagonal(&DVector::from_iterator(m, cfg.observable.iter().map(|&x| C64::new(x, 0.0))));
    let times = cfg.times();
    // half steps, so the generator is sampled exactly at the integrator's stages
    let traj = hartree_trajectory(&model, phi.clone(), cfg.t_final, 0.5 * cfg.dt)?;
    let theta_opts = ThetaOptions {
        dt: cfg.dt,
        ..ThetaOptions::default()
    };
    let mut predictions = Vec::with_capacity(times.len());
    for &t in &times {
        let phi_t = hartree_at(&traj, t)?;
        let mean: f64 = phi_t.site_coefficients().iter().zip(&cfg.observable).map(|(c, x)| c.norm_sqr() * x).sum();
        let theta = theta_along(&model, &traj, 0.0, t, &theta_opts)?.theta;
        predictions.push((mean, clt_variance(&theta, &phi, &phi_t, &o)?));
    }
    let c0 = phi.site_coefficients();
    let iid = {
        let m1: f64 = c0.iter().zip(&cfg.observable).map(|(c, x)| c.norm_sqr() * x).sum();
        let m2: f64 = c0.iter().zip(&cfg.observable).map(|(c, x)| c.norm_sqr() * x * x).sum();
        m2 - m1 * m1
    };
    let sampling = cfg.sampling.then(|| Sampling {
        samples: cfg.samples,
        seed: cfg.seed.unwrap_or_default(),
    });
    let mut table = Table::new(&[
        "t",
        "N",
        "mean",
        "variance",
        "third_moment",
        "fourth_moment",
        "predicted_variance",
        "variance_rel_error",
        "kolmogorov",
        "sampled",
    ]);
    let mut laws = Vec::new();
    let mut finals = Vec::new();
    let mut t0_err = 0.0f64;
    let mut n_list = cfg.n_list.clone();
    n_list.sort_unstable();
    n_list.dedup();
    for &n in &n_list {
        let run = || -> Result<Vec<(f64, CltLaw)>> {
            let basis = FockBasis::with_cap(m, n, cfg.basis_cap)?;
            let h = assemble_hamiltonian(&model, n, &basis)?;
            let mut psi = initial_state(InitialData::Product, &phi, n, &basis, cfg.tail_tol)?;
            let mut now = 0.0;
            let mut out = Vec::new();
            for (&t, &(center, _)) in times.iter().zip(&predictions) {
                if t > now {
                    psi = propagate(&h, &psi, t - now, t - now, &cfg.fock_options().krylov)?.0;
                    now = t;
                }
                out.push((t, clt_law(&psi, n, &o, center, cfg.clt_budget, sampling)?));
            }
            Ok(out)
        };
        for (k, (t, law)) in run().map_err(Error::at_n(n))?.into_iter().enumerate() {
            let predicted = predictions[k].1;
            let ks = kolmogorov_distance(&law, predicted)?;
            let rel = (law.variance - predicted).abs() / predicted.abs().max(f64::MIN_POSITIVE);
            if t == 0.0 && !law.sampled {
                t0_err = t0_err.max((law.variance - iid).abs());
            }
            if is_close(t, cfg.t_final) {
                finals.push((n, ks, rel));
            }
            table.push(vec![
                t.into(),
                n.into(),
                law.mean.into(),
                law.variance.into(),
                law.third_moment.into(),
                law.fourth_moment.into(),
                predicted.into(),
                rel.into(),
                ks.into(),
                usize::from(law.sampled).into(),
            ]);
            laws.push(json!({ "t": t, "N": n, "atoms": law.atoms, "sampled": law.sampled }));
        }
    }
    // rows in (t, N) order
    let per_n = times.len();
    let rows = std::mem::take(&mut table.rows);
    for k in 0..per_n {
        table.rows.extend(rows.iter().skip(k).step_by(per_n).cloned());
    }
    let mut report = Report::new(cfg, table);
    if times[0] == 0.0 {
        report.checks.push(Check::new(
            "t0_iid_variance",
            t0_err <= 1e-10,
            format!("largest deviation from the i.i.d. variance {iid}: {t0_err:e}"),
        ));
    }
    let ks: Vec<f64> = finals.iter().map(|f| f.1).collect();
    report.checks.push(Check::new(
        "kolmogorov_decreasing",
        ks.len() >= 2 && strictly_decreasing(&ks),
        format!("Kolmogorov distances at t = {} for N = {n_list:?}: {ks:?}", cfg.t_final),
    ));
    if let Some(&(n, _, rel)) = finals.last() {
        report.checks.push(Check::new(
            "variance_agreement",
            rel <= cfg.variance_tol,
            format!("relative variance error {rel:.4} at N = {n} (limit {})", cfg.variance_tol),
        ));
    }
    report.results = json!({
        "iid_variance": iid,
        "predicted": times.iter().zip(&predictions).map(|(t, p)| json!({"t": t, "mean": p.0, "variance": p.1})).collect::<Vec<_>>(),
        "laws": laws,
    });
    Ok(report)
}

fn radial_potential(cfg: &ExperimentConfig) -> Result<RadialPotential> {
    match cfg.radial {
        RadialKind::Zero => Ok(RadialPotential::zero(cfg.radial_range)),
        RadialKind::SoftSphere => RadialPotential::soft_sphere(cfg.radial_strength, cfg.radial_range),
        RadialKind::Bump => RadialPotential::bump(cfg.radial_strength, cfg.radial_range),
    }
}

/// Scattering constants and their self-checks.
fn scattering_checks(cfg: &ExperimentConfig) -> Result<(ScatteringSolution, Vec<Check>, serde_json::Value)> {
    let v = radial_potential(cfg)?;
    let opts = ScatteringOptions::default();
    let s = solve_zero_energy(&v, &RadialGrid::for_range(v.range)?, &opts)?;
    let couplings = coupling_constants(&s)?;
    let identity = check_identity(&s);
    let mut checks = vec![Check::new(
        "identity",
        identity.rel_err <= 1e-6,
        format!("8πa₀ = {:e}, ∫Vf = {:e}, rel. {:e}", identity.lhs, identity.rhs, identity.rel_err),
    )];
    let repulsive = v.profile != Profile::Zero && v.strength > 0.0;
    if repulsive {
        checks.push(Check::new(
            "couplings_ordered",
            couplings.g_gp < couplings.b0,
            format!("8πa₀ = {:e} against ∫V = {:e}", couplings.g_gp, couplings.b0),
        ));
    }
    let scaling = scaled_direct(&s, cfg.scale_n, &opts);
    checks.push(match &scaling {
        Ok(c) => Check::new(
            "scaling_law",
            c.rel_err <= 1e-8,
            format!("a₀/N = {:e}, direct {:e}, rel. {:e}", c.predicted, c.direct, c.rel_err),
        ),
        Err(e) => Check::new("scaling_law", false, e.to_string()),
    });
    let mut analytic = None;
    if v.profile == Profile::SoftSphere {
        let exact = soft_sphere_scattering_length(v.strength, v.range);
        let rel = (s.scattering_length - exact).abs() / exact.abs().max(f64::MIN_POSITIVE);
        checks.push(Check::new(
            "soft_sphere_analytic",
            rel <= 1e-6,
            format!("a₀ = {:e}, closed form {exact:e}, rel. {rel:e}", s.scattering_length),
        ));
        analytic = Some(exact);
    }
    let masses: Vec<_> = [1.0, 4.0, 16.0]
        .iter()
        .map(|&n| json!({ "N": n, "mass": scaled_mass(&s, n) }))
        .collect();
    let results = json!({
        "potential": v,
        "scattering_length": s.scattering_length,
        "error_estimate": s.error_estimate,
        "analytic": analytic,
        "b0": couplings.b0,
        "g_gp": couplings.g_gp,
        "identity": { "lhs": identity.lhs, "rhs": identity.rhs, "rel_err": identity.rel_err },
        "scaling": scaling.ok(),
        "scaled_mass": masses,
    });
    Ok((s, checks, results))
}

pub fn run_scatter(cfg: &ExperimentConfig) -> Result<Report> {
    let (s, checks, results) = scattering_checks(cfg)?;
    let mut table = Table::new(&["r", "f", "omega"]);
    for (&r, &f) in s.nodes.iter().zip(&s.f) {
        table.push(vec![r.into(), f.into(), (1.0 - f).into()]);
    }
    let mut report = Report::new(cfg, table);
    report.checks = checks;
    report.results = results;
    Ok(report)
}

/// Smooth normalized profile used for the GP runs.
pub fn gp_orbital(grid: Grid1D) -> Result<Orbital> {
    let l = grid.length();
    Orbital::from_fn(grid, |x| {
        let s = 2.0 * std::f64::consts::PI * x / l;
        C64::new(1.0 + 0.5 * s.cos(), 0.3 * (2.0 * s).sin())
    })?
    .normalized()
}

/// Largest distance between narrow-kernel Hartree and local GP trajectories.
pub struct WidthSweep {
    pub widths: Vec<f64>,
    /// `(t, distance)` per width.
    pub distances: Vec<Vec<(f64, f64)>>,
}

impl WidthSweep {
    pub fn sup(&self) -> Vec<f64> {
        self.distances.iter().map(|d| d.iter().map(|p| p.1).fold(0.0, f64::max)).collect()
    }
}

/// Compare Hartree dynamics with mollified kernels of the given widths
/// against the local GP flow of the same mass.
pub fn gp_width_sweep(cfg: &ExperimentConfig, mass: f64) -> Result<WidthSweep> {
    let grid = Grid1D::with_length(cfg.gp_sites, cfg.gp_length)?;
    let ext = trap(&grid, cfg.trap)?;
    let phi = gp_orbital(grid)?;
    let save_every = ((cfg.gp_t / cfg.dt / 100.0).round() as usize).max(1);
    let opts = EvolveOptions {
        dt: cfg.dt,
        save_every,
        ..EvolveOptions::default()
    };
    let gp = evolve(&MeanFieldProblem::gross_pitaevskii(mass, ext.clone(), phi.clone())?, cfg.gp_t, &opts)?;
    let mut widths = cfg.widths.iter().map(|w| w * grid.length()).collect::<Vec<_>>();
    widths.sort_by(|a, b| b.total_cmp(a));
    let jobs: Vec<f64> = widths.clone();
    let distances = crate::par::map_jobs(jobs, |w| -> Result<Vec<(f64, f64)>> {
        let pair = PairPotential::mollified_delta(grid, mass, w)?;
        let traj = evolve(&MeanFieldProblem::hartree(pair, ext.clone(), phi.clone())?, cfg.gp_t, &opts)?;
        traj.times
            .iter()
            .zip(&traj.states)
            .zip(&gp.states)
            .map(|((&t, a), b)| Ok((t, a.sub(b)?.norm())))
            .collect()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(WidthSweep { widths, distances })
}

fn nonincreasing_strict(values: &[f64]) -> bool {
    values
        .windows(2)
        .all(|w| if w[0] > 1e-14 { w[1] < w[0] } else { w[1] <= w[0] })
}

pub fn run_gp_suite(cfg: &ExperimentConfig) -> Result<Report> {
    let (s, mut checks, scattering) = scattering_checks(cfg)?;
    let mass = 8.0 * std::f64::consts::PI * s.scattering_length;
    let sweep = gp_width_sweep(cfg, mass)?;
    let mut table = Table::new(&["t", "width", "distance"]);
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for (w, d) in sweep.widths.iter().zip(&sweep.distances) {
        rows.extend(d.iter().map(|&(t, x)| (t, *w, x)));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    for (t, w, x) in rows {
        table.push(vec![t.into(), w.into(), x.into()]);
    }
    let sup = sweep.sup();
    checks.push(Check::new(
        "distance_monotone_in_width",
        nonincreasing_strict(&sup),
        format!("sup distances {sup:?} for widths {:?}", sweep.widths),
    ));
    let fit = if sweep.widths.len() >= 3 && sup.iter().all(|&x| x > 0.0) {
        let points: Vec<(f64, f64)> = sweep.widths.iter().copied().zip(sup.iter().copied()).collect();
        fit_rate(&points).ok()
    } else {
        None
    };
    let mut report = Report::new(cfg, table);
    report.checks = checks;
    report.results = json!({
        "scattering": scattering,
        "mass": mass,
        "widths": sweep.widths,
        "sup_distance": sup,
        "width_order": fit,
    });
    Ok(report)
}

pub fn run_minimize(cfg: &ExperimentConfig) -> Result<Report> {
    let grid = Grid1D::with_length(cfg.gp_sites, cfg.gp_length)?;
    let ext = trap(&grid, cfg.trap)?;
    let opts = MinimizeOptions {
        tol: cfg.min_tol,
        max_iterations: cfg.min_iterations,
        ..MinimizeOptions::default()
    };
    let mut mus = cfg.mu_list.clone();
    mus.sort_by(f64::total_cmp);
    mus.dedup();
    let mut table = Table::new(&["mu", "energy", "chemical_potential", "residual", "iterations"]);
    let mut energies = Vec::new();
    let mut monotone_iterations = true;
    let mut checks = Vec::new();
    let mut results = Vec::new();
    for &mu in &mus {
        let gs = gp_minimize(mu, ext.as_ref(), &grid, &opts)?;
        monotone_iterations &= gs
            .energies
            .windows(2)
            .all(|w| w[1] <= w[0] + ENERGY_ROUNDOFF * w[0].abs().max(1.0));
        table.push(vec![
            mu.into(),
            gs.energy.into(),
            gs.chemical_potential.into(),
            gs.residual.into(),
            gs.iterations.into(),
        ]);
        if mu == 0.0 {
            let mut k = laplacian_matrix(&grid);
            if let Some(e) = &ext {
                for (i, v) in e.samples().iter().enumerate() {
                    k[(i, i)] += v;
                }
            }
            let eig = SymmetricEigen::new(k);
            let (imin, emin) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, e)| (i, *e))
                .unwrap_or((0, f64::NAN));
            let v = eig.eigenvectors.column(imin);
            let overlap: C64 = gs.orbital.site_coefficients().iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
            let de = (gs.energy - emin).abs();
            let dv = 1.0 - overlap.norm();
            checks.push(Check::new(
                "linear_ground_state",
                de <= 10.0 * cfg.min_tol && dv <= 10.0 * cfg.min_tol,
                format!("energy {:e} against eigenvalue {emin:e}; 1 − |overlap| = {dv:e}", gs.energy),
            ));
        }
        results.push(json!({ "mu": mu, "energy": gs.energy, "iterations": gs.iterations, "energies": gs.energies }));
        energies.push(gs.energy);
    }
    checks.push(Check::new(
        "energy_monotone_in_iterations",
        monotone_iterations,
        "energies never rise beyond round-off".into(),
    ));
    checks.push(Check::new(
        "energy_monotone_in_mu",
        energies.windows(2).all(|w| w[1] >= w[0]),
        format!("energies {energies:?} for mu {mus:?}"),
    ));
    let mut report = Report::new(cfg, table);
    report.checks = checks;
    report.results = json!({ "runs": results });
    Ok(report)
}
