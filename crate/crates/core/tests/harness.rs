use boselab::fock::{coherent_state, sector_project, FockBasis};
use boselab::harness::emit::{csv_bytes, Cell};
use boselab::harness::experiments::{clt_law, kolmogorov_distance, Sampling};
use boselab::harness::*;
use boselab::lattice::{Grid1D, Orbital};
use boselab::{Error, C64};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small(experiment: Experiment, extra: &[&str]) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(experiment);
    for a in ["n_list = [2, 3, 4]"].iter().chain(extra) {
        cfg.apply_text(a).unwrap();
    }
    cfg
}

#[test]
fn fit_recovers_planted_slopes() {
    let ns = [4.0, 8.0, 16.0, 32.0, 64.0];
    let exact: Vec<(f64, f64)> = ns.iter().map(|&n| (n, 7.0 / n)).collect();
    let fit = fit_rate(&exact).unwrap();
    assert!((fit.slope + 1.0).abs() < 1e-12 && fit.residual < 1e-12);
    assert!((fit.intercept - 7f64.ln()).abs() < 1e-12);

    let root: Vec<(f64, f64)> = ns.iter().map(|&n| (n, 3.0 / n.sqrt())).collect();
    assert!((fit_rate(&root).unwrap().slope + 0.5).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..20 {
        let noisy: Vec<(f64, f64)> = ns.iter().map(|&n| (n, (1.0 + rng.random_range(-0.05..0.05)) / n)).collect();
        let fit = fit_rate(&noisy).unwrap();
        assert!((-1.15..=-0.85).contains(&fit.slope), "{fit:?}");
        assert!(fit.half_width > 0.0 && fit.half_width.is_finite());
    }
}

#[test]
fn fit_rejects_bad_points() {
    assert!(fit_rate(&[(1.0, 1.0), (2.0, 0.5)]).is_err());
    assert!(fit_rate(&[(1.0, 1.0), (2.0, 0.0), (4.0, 0.2)]).is_err());
    assert!(fit_rate(&[(1.0, 1.0), (2.0, -0.5), (4.0, 0.2)]).is_err());
    assert!(fit_rate(&[(2.0, 1.0), (2.0, 0.5), (2.0, 0.2)]).is_err());
}

#[test]
fn config_grammar() {
    let mut cfg = ExperimentConfig::defaults(Experiment::Converge);
    cfg.apply_text(
        "# comment line\n\
         experiment = converge\n\
         sites = 3   # trailing comment\n\
         orbital_re = [1, 0.5, 0.25]\n\
         orbital_im = 0, 0, 0.1\n\
         observable = [1, 2, 3]\n\
         out = \"runs/with # hash\"\n\
         initial = product\n\
         \n\
         n_list = [2, 4]\n",
    )
    .unwrap();
    assert_eq!(cfg.sites, 3);
    assert_eq!(cfg.orbital_im, vec![0.0, 0.0, 0.1]);
    assert_eq!(cfg.out.to_str(), Some("runs/with # hash"));
    assert_eq!(cfg.initial, InitialData::Product);
    assert_eq!(cfg.n_list, vec![2, 4]);
    cfg.validate().unwrap();
    cfg.apply_override("sites=5").unwrap();
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));

    let mut cfg = ExperimentConfig::defaults(Experiment::Converge);
    for bad in ["bogus = 1", "sites = three", "experiment = gp", "no equals sign", "n_list = [1, 2", "seed = -4"] {
        assert!(matches!(cfg.apply_text(bad), Err(Error::Config(_))), "{bad}");
    }
}

#[test]
fn validation_rejects_nonsense() {
    for (key, value) in [("dt", "0"), ("n_list", "[]"), ("slope_min", "-0.5"), ("output_times", "[0.2345]"), ("widths", "[0.1, -1]")] {
        let mut cfg = ExperimentConfig::defaults(Experiment::Converge);
        cfg.set(key, value).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{key} = {value}");
    }
    let mut cfg = ExperimentConfig::defaults(Experiment::Clt);
    cfg.set("sampling", "true").unwrap();
    assert!(cfg.validate().is_err());
    cfg.set("seed", "3").unwrap();
    cfg.validate().unwrap();
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, "experiment = scatter\nradial = soft_sphere\nradial_strength = 4\n").unwrap();
    let cfg = ExperimentConfig::from_file(Experiment::Scatter, &path).unwrap();
    assert_eq!(cfg.radial, RadialKind::SoftSphere);
    let missing = ExperimentConfig::from_file(Experiment::Scatter, &dir.path().join("missing.cfg"));
    match missing {
        Err(e @ Error::Io { .. }) => assert!(e.to_string().contains("missing.cfg")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn empty_table_gives_header_only_csv_and_summary() {
    let cfg = ExperimentConfig::defaults(Experiment::Scatter);
    let report = Report::new(&cfg, Table::new(&["t", "N", "value"]));
    let dir = tempfile::tempdir().unwrap();
    let out = emit(&report, dir.path()).unwrap();
    assert_eq!(std::fs::read_to_string(&out.csv).unwrap(), "t,N,value\n");
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out.summary).unwrap()).unwrap();
    assert_eq!(summary["experiment"], "scatter");
    assert_eq!(summary["rows"], 0);
    assert_eq!(summary["config"]["radial"], "bump");
    assert_eq!(summary["passed"], true);
}

#[test]
fn csv_cells_render_plainly() {
    let mut t = Table::new(&["t", "N", "label"]);
    t.push(vec![Cell::Float(0.25), Cell::Int(8), Cell::Text("a,b".into())]);
    assert_eq!(String::from_utf8(csv_bytes(&t).unwrap()).unwrap(), "t,N,label\n2.5e-1,8,\"a,b\"\n");
}

#[test]
fn sampled_runs_are_byte_identical_for_a_fixed_seed() {
    let cfg = |seed: &str| {
        let mut c = ExperimentConfig::defaults(Experiment::Clt);
        for a in ["n_list = [4, 9]", "sampling = true", "samples = 4000", "output_times = [0, 0.5]"] {
            c.apply_text(a).unwrap();
        }
        c.set("seed", seed).unwrap();
        c
    };
    let write = |c: &ExperimentConfig| {
        let dir = tempfile::tempdir().unwrap();
        let out = emit(&run(c).unwrap(), dir.path()).unwrap();
        (std::fs::read(out.csv).unwrap(), std::fs::read(out.summary).unwrap())
    };
    let a = write(&cfg("17"));
    let b = write(&cfg("17"));
    assert_eq!(a, b);
    assert_ne!(a.0, write(&cfg("18")).0);
    let summary: serde_json::Value = serde_json::from_slice(&a.1).unwrap();
    assert_eq!(summary["seed"], 17);
    assert_eq!(summary["rng"], RNG_NAME);
    // N = 4 is enumerated, N = 9 (4^9 > 65536) is sampled
    let csv = String::from_utf8(a.0).unwrap();
    let sampled: Vec<&str> = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(sampled, vec!["0", "1", "0", "1"]);
}

fn product_state(n: usize) -> boselab::fock::FockVector {
    let g = Grid1D::new(3, 1.0).unwrap();
    let phi = Orbital::new(g, vec![C64::new(1.0, 0.0), C64::new(0.5, 0.5), C64::new(0.2, -0.3)])
        .unwrap()
        .normalized()
        .unwrap()
        .scaled(C64::new((n as f64).sqrt(), 0.0));
    let basis = FockBasis::new(3, n).unwrap();
    sector_project(n, &coherent_state(&phi, &basis, 1.0).unwrap().state).unwrap().normalized().unwrap()
}

#[test]
fn identity_observable_gives_a_point_mass() {
    let psi = product_state(5);
    let law = clt_law(&psi, 5, &DMatrix::identity(3, 3), 1.0, 1 << 20, None).unwrap();
    assert_eq!(law.atoms.len(), 1);
    assert!(law.atoms[0].0.abs() < 1e-14 && (law.atoms[0].1 - 1.0).abs() < 1e-12);
    assert!(law.variance.abs() < 1e-24);
    assert!(kolmogorov_distance(&law, 0.0).unwrap() < 1e-12);
}

#[test]
fn clt_law_inputs_are_checked() {
    let psi = product_state(5);
    let mut o = DMatrix::<C64>::identity(3, 3);
    o[(0, 1)] = C64::new(0.1, 0.0);
    assert!(matches!(clt_law(&psi, 5, &o, 0.0, 1 << 20, None), Err(Error::InvalidInput(_))));
    let diag = DMatrix::<C64>::from_diagonal_element(3, 3, C64::new(2.0, 0.0));
    assert!(matches!(clt_law(&psi, 5, &diag, 0.0, 100, None), Err(Error::EnumerationBudget { size: 243, budget: 100 })));
    let sampled = clt_law(&psi, 5, &diag, 0.0, 100, Some(Sampling { samples: 500, seed: 1 })).unwrap();
    assert!(sampled.sampled);
    assert!((sampled.atoms.iter().map(|a| a.1).sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn kolmogorov_distance_of_a_two_point_law() {
    let psi = product_state(1);
    let o = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        C64::new(1.0, 0.0),
        C64::new(-1.0, 0.0),
        C64::new(-1.0, 0.0),
    ]));
    let law = clt_law(&psi, 1, &o, 0.0, 100, None).unwrap();
    assert_eq!(law.atoms.len(), 2);
    let p_minus = law.atoms[0].1;
    // sup |F − Φ| is reached at one of the atoms ±1
    let phi = |x: f64| 0.5 * (1.0 + statrs::function::erf::erf(x / 2f64.sqrt()));
    let expected = [(p_minus - phi(-1.0)).abs(), phi(-1.0), (1.0 - phi(1.0)), (p_minus - phi(1.0)).abs()]
        .into_iter()
        .fold(0.0, f64::max);
    assert!((kolmogorov_distance(&law, 1.0).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn free_dynamics_has_no_mean_field_error() {
    let cfg = small(Experiment::Converge, &["potential = zero"]);
    let report = run(&cfg).unwrap();
    assert!(report.passed(), "{:?}", report.checks);
    assert_eq!(report.table.rows.len(), 9);

    let cfg = small(Experiment::Fluct, &["potential = zero"]);
    let report = run(&cfg).unwrap();
    let col = report.table.column("fluct_number").unwrap();
    for row in &report.table.rows {
        let Cell::Float(x) = row[col] else { panic!() };
        assert!(x.abs() < 1e-10, "{x}");
    }
}

#[test]
fn interacting_fluctuations_start_at_zero() {
    let report = run(&small(Experiment::Fluct, &[])).unwrap();
    let (t, f) = (report.table.column("t").unwrap(), report.table.column("fluct_number").unwrap());
    for row in &report.table.rows {
        let (Cell::Float(t), Cell::Float(x)) = (&row[t], &row[f]) else { panic!() };
        if *t == 0.0 {
            assert!(x.abs() < 1e-10);
        } else {
            assert!(*x > 0.0);
        }
    }
    assert!(report.results["max_over_n"].as_array().unwrap().len() == 3);
}

#[test]
fn product_data_converges_too() {
    let report = run(&small(Experiment::Converge, &["initial = product", "n_list = [2, 4, 8]"])).unwrap();
    assert!(report.passed(), "{:?}", report.checks);
    assert!(run(&small(Experiment::Fluct, &["initial = product"])).is_err());
}

#[test]
fn oversized_bases_are_skipped_and_recorded() {
    let cfg = small(Experiment::Converge, &["basis_cap = 25000"]);
    let report = run(&cfg).unwrap();
    assert!(!report.skipped.is_empty());
    assert!(report.skipped.iter().all(|s| s.reason.contains("cap")));
    let summary: serde_json::Value = serde_json::from_str(&report.summary_json().unwrap()).unwrap();
    assert_eq!(summary["skipped"].as_array().unwrap().len(), report.skipped.len());
    // fewer than three points left: the rate check fails rather than passing silently
    assert!(!report.passed());
}

#[test]
fn exit_codes() {
    assert_eq!(exit_code(&run(&small(Experiment::Converge, &["potential = zero"]))), 0);
    let strict = small(Experiment::Converge, &["slope_min = 5", "slope_max = 6"]);
    let outcome = run(&strict);
    assert_eq!(exit_code(&outcome), 1);
    let summary = outcome.unwrap().summary_json().unwrap();
    assert!(summary.contains("\"slope\"") && summary.contains("slope_window"));
    assert_eq!(exit_code(&run(&small(Experiment::Converge, &["dt = -1"]))), 2);
    let thin = small(Experiment::Converge, &["cutoff_sigmas = 0", "cutoff_offset = 0"]);
    let outcome = run(&thin);
    assert_eq!(exit_code(&outcome), 3);
    assert!(outcome.unwrap_err().to_string().starts_with("N = 2"));
}

#[test]
fn zero_scattering_potential_gives_a_zero_gp_table() {
    let report = run(&ExperimentConfig::defaults(Experiment::Gp).tap(&["radial = zero", "gp_sites = 16"])).unwrap();
    let d = report.table.column("distance").unwrap();
    assert!(report.table.rows.iter().all(|r| r[d] == Cell::Float(0.0)));
    assert!(report.passed(), "{:?}", report.checks);
}

#[test]
fn soft_sphere_scatter_run_checks_the_closed_form() {
    let report = run(&ExperimentConfig::defaults(Experiment::Scatter).tap(&["radial = soft_sphere", "radial_strength = 20"])).unwrap();
    assert!(report.checks.iter().any(|c| c.name == "soft_sphere_analytic" && c.passed));
    assert!(report.passed());
}

trait Tap {
    fn tap(self, assignments: &[&str]) -> Self;
}

impl Tap for ExperimentConfig {
    fn tap(mut self, assignments: &[&str]) -> Self {
        for a in assignments {
            self.apply_text(a).unwrap();
        }
        self
    }
}
