//! End-to-end acceptance criteria, one PASS/FAIL line each.

use std::process::ExitCode;
use std::time::Instant;

use boselab::bogoliubov::{theta_along, verify_bogoliubov_action, ThetaOptions};
use boselab::exact::{assemble_hamiltonian, bbgky_report};
use boselab::fock::*;
use boselab::harness::experiments::{convergence_report, exact_sweep, fluctuation_report};
use boselab::harness::{run, Experiment, ExperimentConfig, Report};
use boselab::lattice::*;
use boselab::meanfield::{evolve, EvolveOptions, MeanFieldProblem};
use boselab::scattering::*;
use boselab::{Result, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String)>;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn checks_of(report: &Report, names: &[&str]) -> (bool, String) {
    let picked: Vec<_> = report.checks.iter().filter(|c| names.contains(&c.name.as_str())).collect();
    let ok = picked.len() == names.len() && picked.iter().all(|c| c.passed);
    let detail = picked.iter().map(|c| format!("{}: {}", c.name, c.detail)).collect::<Vec<_>>().join("; ");
    (ok, detail)
}

fn coherent_statistics() -> Outcome {
    let g = Grid1D::new(2, 1.0)?;
    let phi = Orbital::new(g, vec![c(2.0, 1.0), c(-1.0, 1.5)])?.normalized()?.scaled(c(3.0, 0.0));
    let mean = phi.norm_sqr();
    let n_max = FockBasis::adequate_cutoff(mean);
    let basis = FockBasis::new(2, n_max)?;
    let s = number_statistics(&coherent_state(&phi, &basis, 1e-12)?.state.normalized()?)?;
    let tv = 0.5
        * s.distribution
            .iter()
            .enumerate()
            .map(|(n, p)| (p - poisson_pmf(mean, n)).abs())
            .sum::<f64>()
        + 0.5 * poisson_tail(mean, n_max);
    let dn = (s.expectation - 9.0).abs();
    Ok((dn <= 1e-8 && tv <= 1e-10, format!("|<N> - 9| = {dn:e}, TV to Poisson(9) = {tv:e}")))
}

fn random_orbital(rng: &mut ChaCha8Rng, g: Grid1D) -> Result<Orbital> {
    Orbital::new(g, (0..g.num_sites()).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
}

fn ccr_and_ladder_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let basis = FockBasis::new(3, 5)?;
    let (mut ccr, mut bound_violations) = (0.0f64, 0usize);
    let cases = 128;
    for _ in 0..cases {
        let g = Grid1D::new(3, rng.random_range(0.3..1.5))?;
        let (f, h) = (random_orbital(&mut rng, g)?, random_orbital(&mut rng, g)?);
        // interior sectors only, so one creation stays inside the truncation
        let amps = (0..basis.len())
            .map(|j| {
                if basis.sector_of(j) < basis.n_max() {
                    c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                } else {
                    c(0.0, 0.0)
                }
            })
            .collect();
        let psi = FockVector::from_amps(&basis, amps)?;
        let scale = psi.norm() * f.norm().max(1.0) * h.norm().max(1.0);
        let af = annihilate_smeared(&f, &psi)?;
        let mixed = annihilate_smeared(&f, &create_smeared(&h, &psi)?)?.add_scaled(c(-1.0, 0.0), &create_smeared(&h, &af)?)?;
        ccr = ccr.max(mixed.distance(&psi.scaled(l2_inner(&f, &h)?))? / scale);
        let aa = annihilate_smeared(&f, &annihilate_smeared(&h, &psi)?)?
            .add_scaled(c(-1.0, 0.0), &annihilate_smeared(&h, &af)?)?;
        ccr = ccr.max(aa.norm() / scale);
        let (root, root1) = psi.number_root_norms();
        if af.norm() > f.norm() * root * (1.0 + 1e-12) || create_smeared(&f, &psi)?.norm() > f.norm() * root1 * (1.0 + 1e-12) {
            bound_violations += 1;
        }
    }
    Ok((
        ccr <= 1e-12 && bound_violations == 0,
        format!("{cases} pairs: largest commutator defect {ccr:e}, {bound_violations} bound violations"),
    ))
}

fn bbgky() -> Outcome {
    let g = Grid1D::new(2, 1.0)?;
    let model = LatticeModel::new(PairPotential::gaussian(g, 2.0, 0.8)?, Some(ExternalPotential::cosine_trap(&g, 0.5)?))?;
    let basis = FockBasis::new(2, 2)?;
    let h = assemble_hamiltonian(&model, 2, &basis)?;
    let mut psi = FockVector::zeros(&basis);
    for (k, j) in basis.sector_range(2).enumerate() {
        psi.amps_mut()[j] = c(0.7 - 0.3 * k as f64, 0.2 + 0.1 * k as f64);
    }
    let r = bbgky_report(&h, &psi.normalized()?, 0.4, 1e-2)?;
    let ok = r.residual <= 10.0 * r.reference_scale && (r.halving_ratio - 4.0).abs() <= 0.4;
    Ok((
        ok,
        format!(
            "residual {:e} against reference {:e}, halving ratio {:.3}",
            r.residual, r.reference_scale, r.halving_ratio
        ),
    ))
}

fn scattering() -> Outcome {
    let opts = ScatteringOptions::default();
    let mut worst_analytic = 0.0f64;
    let mut worst_identity = 0.0f64;
    let mut worst_scaling = 0.0f64;
    let mut strict = true;
    for (profile, v, r) in [
        (Profile::SoftSphere, 0.5, 1.0),
        (Profile::SoftSphere, 20.0, 0.7),
        (Profile::Bump, 3.0, 1.0),
        (Profile::Bump, 50.0, 0.5),
    ] {
        let pot = RadialPotential::new(profile, v, r)?;
        let s = solve_zero_energy(&pot, &RadialGrid::for_range(r)?, &opts)?;
        if profile == Profile::SoftSphere {
            let exact = soft_sphere_scattering_length(v, r);
            worst_analytic = worst_analytic.max((s.scattering_length - exact).abs() / exact);
        }
        worst_identity = worst_identity.max(check_identity(&s).rel_err);
        worst_scaling = worst_scaling.max(scaled_direct(&s, 16.0, &opts)?.rel_err);
        let cc = coupling_constants(&s)?;
        strict &= cc.g_gp < cc.b0;
    }
    Ok((
        worst_analytic <= 1e-6 && worst_identity <= 1e-6 && worst_scaling <= 1e-8 && strict,
        format!(
            "analytic {worst_analytic:e}, identity {worst_identity:e}, scaling {worst_scaling:e}, 8πa₀ < ∫V: {strict}"
        ),
    ))
}

fn bogoliubov_consistency() -> Outcome {
    // symplectic defect at t = 1
    let g4 = Grid1D::new(4, 1.0)?;
    let model4 = LatticeModel::new(PairPotential::gaussian(g4, 3.0, 1.0)?, None)?;
    let dt = 1e-3;
    let orbital = |g: Grid1D| -> Result<Orbital> {
        Orbital::new(g, (0..g.num_sites()).map(|i| c(1.0 + 0.5 * i as f64, 0.3 * i as f64 - 0.1)).collect())?.normalized()
    };
    let path = |model: &LatticeModel, t: f64| {
        let p = MeanFieldProblem::hartree(model.pair.clone(), None, orbital(model.grid)?)?;
        evolve(&p, t, &EvolveOptions { dt: 0.5 * dt, save_every: 1, ..EvolveOptions::default() })
    };
    let opts = ThetaOptions { dt, ..ThetaOptions::default() };
    let defect = theta_along(&model4, &path(&model4, 1.0)?, 0.0, 1.0, &opts)?.theta.symplectic_defect();

    // action on Fock space at M = 2, N_max = 20, t = 0.5
    let g2 = Grid1D::new(2, 1.0)?;
    let model2 = LatticeModel::new(PairPotential::from_samples(g2, vec![0.5, 0.2])?, None)?;
    let traj = path(&model2, 0.5)?;
    let theta = theta_along(&model2, &traj, 0.0, 0.5, &opts)?.theta;
    let basis = FockBasis::new(2, 20)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let vectors = (0..3)
        .map(|_| {
            let amps = (0..basis.len())
                .map(|j| if basis.sector_of(j) <= 2 { c(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)) } else { c(0.0, 0.0) })
                .collect();
            FockVector::from_amps(&basis, amps)?.normalized()
        })
        .collect::<Result<Vec<_>>>()?;
    let pairs = vec![
        (Orbital::new(g2, vec![c(1.0, 0.0), c(0.0, 0.0)])?, Orbital::zeros(g2)),
        (Orbital::zeros(g2), Orbital::new(g2, vec![c(0.0, 0.0), c(0.0, 1.0)])?),
        (
            Orbital::new(g2, vec![c(0.3, -0.2), c(0.5, 0.1)])?,
            Orbital::new(g2, vec![c(-0.4, 0.6), c(0.2, 0.2)])?,
        ),
    ];
    let residual = verify_bogoliubov_action(
        &model2,
        |tau| Ok(traj.interpolate(tau)),
        &theta,
        0.5,
        dt,
        &pairs,
        &vectors,
        &FockOptions::default(),
    )?;
    Ok((
        defect <= 1e-6 && residual <= 1e-5,
        format!("symplectic defect {defect:e} at t = 1, action residual {residual:e}"),
    ))
}

fn harness_checks(experiment: Experiment, names: &[&str]) -> Outcome {
    let report = run(&ExperimentConfig::defaults(experiment))?;
    Ok(checks_of(&report, names))
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut record = |id: usize, name: &str, start: Instant, outcome: Outcome| {
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok((true, detail)) => println!("PASS {id:>2} {name} ({secs:.1}s): {detail}"),
            Ok((false, detail)) => {
                failures += 1;
                println!("FAIL {id:>2} {name} ({secs:.1}s): {detail}");
            }
            Err(e) => {
                failures += 1;
                println!("FAIL {id:>2} {name} ({secs:.1}s): error: {e}");
            }
        }
    };

    let s = Instant::now();
    record(1, "coherent-state statistics", s, coherent_statistics());
    let s = Instant::now();
    record(2, "CCR and ladder bounds", s, ccr_and_ladder_bounds());

    let s = Instant::now();
    let cfg = ExperimentConfig::defaults(Experiment::Converge);
    match exact_sweep(&cfg) {
        Ok(sweep) => {
            let conv = convergence_report(&cfg, &sweep);
            let mut fcfg = cfg.clone();
            fcfg.experiment = Experiment::Fluct;
            let fluct = fluctuation_report(&fcfg, &sweep);
            let elapsed = Instant::now();
            record(
                3,
                "mean-field convergence rate",
                s,
                Ok(checks_of(&conv, &["trace_error_1_decreasing", "slope_window"])),
            );
            record(4, "fluctuation uniformity", elapsed, Ok(checks_of(&fluct, &["fluct_uniform_in_n"])));
        }
        Err(e) => {
            let msg = e.to_string();
            record(3, "mean-field convergence rate", s, Err(e));
            record(4, "fluctuation uniformity", Instant::now(), Ok((false, format!("no sweep: {msg}"))));
        }
    }

    let s = Instant::now();
    record(5, "BBGKY residual", s, bbgky());
    let s = Instant::now();
    record(6, "scattering length", s, scattering());
    let s = Instant::now();
    record(7, "Bogoliubov consistency", s, bogoliubov_consistency());
    let s = Instant::now();
    record(
        8,
        "CLT statistics",
        s,
        harness_checks(Experiment::Clt, &["t0_iid_variance", "kolmogorov_decreasing", "variance_agreement"]),
    );
    let s = Instant::now();
    record(9, "GP narrow-kernel limit", s, harness_checks(Experiment::Gp, &["distance_monotone_in_width"]));
    let s = Instant::now();
    record(
        10,
        "GP minimizer",
        s,
        harness_checks(
            Experiment::Minimize,
            &["linear_ground_state", "energy_monotone_in_iterations", "energy_monotone_in_mu"],
        ),
    );

    println!("{} of 10 criteria passed", 10 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
