use boselab::lattice::{Grid1D, Orbital};
use boselab::scattering::*;
use boselab::{Error, C64};
use proptest::prelude::*;
use std::f64::consts::PI;

fn solve(v: &RadialPotential) -> ScatteringSolution {
    solve_zero_energy(v, &RadialGrid::for_range(v.range).unwrap(), &ScatteringOptions::default()).unwrap()
}

#[test]
fn zero_potential_has_no_scattering_length() {
    let s = solve(&RadialPotential::zero(2.0));
    assert_eq!(s.scattering_length, 0.0);
    assert!(s.f.iter().all(|&f| (f - 1.0).abs() < 1e-12));
    assert_eq!(check_identity(&s).rel_err, 0.0);
    let c = coupling_constants(&s).unwrap();
    assert_eq!((c.b0, c.g_gp), (0.0, 0.0));
}

#[test]
fn soft_sphere_matches_closed_form() {
    for (v, r) in [(0.5, 1.0), (4.0, 1.0), (20.0, 0.7), (100.0, 1.3)] {
        let s = solve(&RadialPotential::soft_sphere(v, r).unwrap());
        let exact = soft_sphere_scattering_length(v, r);
        let kappa = (v / 2.0f64).sqrt();
        assert!((exact - r * (1.0 - (kappa * r).tanh() / (kappa * r))).abs() < 1e-15);
        let rel = (s.scattering_length - exact).abs() / exact;
        assert!(rel <= 1e-6, "v = {v}: {rel:e}");
        let id = check_identity(&s);
        assert!(id.rel_err <= 1e-6, "v = {v}: {id:?}");
    }
}

#[test]
fn weak_potential_follows_the_born_limit() {
    let r = 1.0;
    for profile in [Profile::SoftSphere, Profile::Bump] {
        let unit = RadialPotential::new(profile, 1.0, r).unwrap();
        // pick the strength so that a₀/R ≈ 5e-3
        let strength = 5e-3 * 8.0 * PI * r / unit.integral();
        let v = RadialPotential::new(profile, strength, r).unwrap();
        let s = solve(&v);
        let born = v.integral() / (8.0 * PI);
        assert!(s.scattering_length / r <= 1e-2);
        assert!((s.scattering_length - born).abs() / born < 0.02);
    }
}

#[test]
fn identity_holds_for_generic_bumps() {
    for (v, r) in [(0.3, 1.0), (5.0, 1.0), (50.0, 0.5)] {
        let s = solve(&RadialPotential::bump(v, r).unwrap());
        assert!(check_identity(&s).rel_err <= 1e-6);
    }
}

#[test]
fn couplings_are_ordered() {
    let mut last_ratio = 0.0;
    for v in [100.0, 10.0, 1.0, 0.1, 0.01] {
        let s = solve(&RadialPotential::bump(v, 1.0).unwrap());
        let c = coupling_constants(&s).unwrap();
        assert!(c.g_gp < c.b0);
        let ratio = c.g_gp / c.b0;
        assert!(ratio > last_ratio);
        last_ratio = ratio;
    }
    assert!(last_ratio > 0.99);
}

#[test]
fn scaling_law() {
    let s = solve(&RadialPotential::bump(3.0, 1.0).unwrap());
    assert_eq!(scaled_scattering_length(&s, 1.0).unwrap(), s.scattering_length);
    let check = scaled_direct(&s, 16.0, &ScatteringOptions::default()).unwrap();
    assert!(check.rel_err <= 1e-8, "{check:?}");
    assert!(scaled_scattering_length(&s, 0.5).is_err());
    let g = 8.0 * PI * s.scattering_length;
    for n in [1.0, 4.0, 16.0] {
        assert!((scaled_mass(&s, n) - g).abs() / g <= 1e-6);
    }
}

#[test]
fn profile_is_monotone_and_bounded() {
    let s = solve(&RadialPotential::soft_sphere(30.0, 1.0).unwrap());
    for w in s.f.windows(2) {
        assert!(w[1] >= w[0] - 1e-14);
    }
    assert!(s.f.iter().all(|&f| (0.0..=1.0).contains(&f)));
    let last = *s.nodes.last().unwrap();
    let asymptote = 1.0 - s.scattering_length / last;
    assert!((s.f.last().unwrap() - asymptote).abs() < 1e-8);
    let mut prev = f64::INFINITY;
    for k in 0..200 {
        let r = 0.1 * k as f64;
        let w = s.omega(r);
        assert!((0.0..=1.0).contains(&w) && w <= prev + 1e-14);
        prev = w;
    }
}

#[test]
fn tighter_tolerance_stays_within_the_error_estimate() {
    let v = RadialPotential::bump(8.0, 1.0).unwrap();
    let grid = RadialGrid::for_range(1.0).unwrap();
    let coarse = solve_zero_energy(&v, &grid, &ScatteringOptions::default()).unwrap();
    let fine = solve_zero_energy(&v, &grid, &ScatteringOptions { tol: 5e-11, ..ScatteringOptions::default() }).unwrap();
    assert!((coarse.scattering_length - fine.scattering_length).abs() <= coarse.error_estimate);
}

#[test]
fn bad_inputs_are_rejected() {
    assert!(RadialPotential::soft_sphere(-1.0, 1.0).is_err());
    assert!(RadialGrid::new(1.0, 4.0, 100, 100).is_err());
    assert!(RadialGrid::new(1.0, 10.0, 101, 100).is_err());
    let opts = ScatteringOptions { fit_tol: 0.0, ..ScatteringOptions::default() };
    let err = solve_zero_energy(&RadialPotential::bump(5.0, 1.0).unwrap(), &RadialGrid::for_range(1.0).unwrap(), &opts);
    assert!(matches!(err, Err(Error::FitResidual { .. })));
}

#[test]
fn kernel_examples() {
    let s = solve(&RadialPotential::bump(3.0, 1.0).unwrap());
    let g = Grid1D::new(16, 0.5).unwrap();
    let zero = correlation_kernel(&s, 32.0, &Orbital::zeros(g), &g).unwrap();
    assert_eq!(zero.hilbert_schmidt_norm(), 0.0);

    let phi = Orbital::from_fn(g, |x| C64::new(1.0 + 0.3 * x.cos(), 0.2 * x.sin())).unwrap().normalized().unwrap();
    let n = 32.0;
    let k = correlation_kernel(&s, n, &phi, &g).unwrap();
    let a = phi.amps();
    for x in 0..16 {
        for y in 0..16 {
            assert_eq!(k.kernel()[(x, y)], k.kernel()[(y, x)]);
            let d = g.distance(x, y);
            if n * d >= 10.0 {
                let far = a[x] * a[y] * (-s.scattering_length / d);
                assert!((k.kernel()[(x, y)] - far).norm() <= 0.05 * far.norm());
            }
        }
    }
    let other = Grid1D::new(16, 0.4).unwrap();
    assert!(correlation_kernel(&s, n, &phi, &other).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn two_routes_to_the_scattering_length_agree(v in 0.05..60.0f64, r in 0.3..2.0f64, bump in any::<bool>()) {
        let profile = if bump { Profile::Bump } else { Profile::SoftSphere };
        let s = solve(&RadialPotential::new(profile, v, r).unwrap());
        prop_assert!(s.scattering_length > 0.0);
        prop_assert!(check_identity(&s).rel_err <= 1e-6);
        prop_assert!(coupling_constants(&s).is_ok());
    }
}
