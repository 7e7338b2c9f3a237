use boselab::lattice::*;
use boselab::{Error, C64};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn orbital(grid: Grid1D, parts: &[(f64, f64)]) -> Orbital {
    Orbital::new(grid, parts.iter().map(|&(a, b)| c(a, b)).collect()).unwrap()
}

#[test]
fn constant_is_in_the_kernel() {
    let g = Grid1D::new(7, 0.3).unwrap();
    let out = laplacian_apply(&Orbital::constant(g));
    assert!(out.amps().iter().all(|z| z.norm() < 1e-12));
}

#[test]
fn plane_waves_are_eigenvectors() {
    let g = Grid1D::new(8, 0.5).unwrap();
    for m in -3..=4 {
        let pw = Orbital::plane_wave(g, m);
        let out = laplacian_apply(&pw);
        let lambda = laplacian_eigenvalue(&g, g.wave_number(m));
        let expected = 2.0 / 0.25 * (1.0 - (g.wave_number(m) * 0.5).cos());
        assert!((lambda - expected).abs() < 1e-12);
        for (a, b) in out.amps().iter().zip(pw.amps()) {
            assert!((a - b * lambda).norm() < 1e-12);
        }
    }
}

#[test]
fn stencil_readout_on_a_delta() {
    let g = Grid1D::new(4, 1.0).unwrap();
    let out = laplacian_apply(&orbital(g, &[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)]));
    let re: Vec<f64> = out.amps().iter().map(|z| z.re).collect();
    assert_eq!(re, vec![2.0, -1.0, 0.0, -1.0]);
}

#[test]
fn convolution_examples() {
    let g = Grid1D::new(6, 0.5).unwrap();
    let rho = vec![0.4, 0.1, 0.3, 0.7, 0.0, 0.5];
    let zero = convolve(&PairPotential::zero(g), &rho).unwrap();
    assert!(zero.iter().all(|&x| x == 0.0));

    let v = PairPotential::from_samples(g, vec![3.0, 1.0, 0.5, 0.2, 0.5, 1.0]).unwrap();
    let mut delta = vec![0.0; 6];
    delta[2] = 1.0 / 0.5;
    let out = convolve(&v, &delta).unwrap();
    for (i, x) in out.iter().enumerate() {
        assert!((x - v.between(i, 2)).abs() < 1e-12);
    }

    let flat = PairPotential::from_samples(g, vec![1.7; 6]).unwrap();
    let mass: f64 = rho.iter().sum::<f64>() * 0.5;
    let normalized: Vec<f64> = rho.iter().map(|r| r / mass).collect();
    for x in convolve(&flat, &normalized).unwrap() {
        assert!((x - 1.7).abs() < 1e-12);
    }
}

#[test]
fn convolution_rejects_wrong_length() {
    let g = Grid1D::new(4, 1.0).unwrap();
    let err = convolve(&PairPotential::zero(g), &[1.0; 5]).unwrap_err();
    assert!(matches!(err, Error::GridMismatch(_) | Error::DimensionMismatch { .. }));
}

#[test]
fn odd_potential_is_rejected() {
    let g = Grid1D::new(4, 1.0).unwrap();
    assert!(PairPotential::from_samples(g, vec![1.0, 2.0, 0.0, 1.0]).is_err());
    assert!(PairPotential::from_samples(g, vec![1.0, f64::NAN, 0.0, f64::NAN]).is_err());
}

#[test]
fn grid_validation() {
    assert!(Grid1D::new(1, 1.0).is_err());
    assert!(Grid1D::new(4, 0.0).is_err());
    assert!(Grid1D::new(4, -1.0).is_err());
    let g = Grid1D::new(5, 0.2).unwrap();
    assert!((g.length() - 1.0).abs() < 1e-15);
    assert!((g.distance(0, 4) - 0.2).abs() < 1e-12);
}

#[test]
fn inner_product_examples() {
    let g = Grid1D::new(6, 0.4).unwrap();
    let one = Orbital::constant(g);
    assert!((l2_inner(&one, &one).unwrap() - 1.0).norm() < 1e-12);
    for (m, n) in [(0, 1), (1, 2), (-1, 2), (2, 3)] {
        let z = l2_inner(&Orbital::plane_wave(g, m), &Orbital::plane_wave(g, n)).unwrap();
        assert!(z.norm() < 1e-12);
    }
    let zero = Orbital::zeros(g);
    assert_eq!(l2_inner(&zero, &zero).unwrap(), c(0.0, 0.0));
    let other = Grid1D::new(6, 0.5).unwrap();
    assert!(l2_inner(&one, &Orbital::constant(other)).is_err());
}

fn arb_orbital(m: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), m)
}

proptest! {
    #[test]
    fn laplacian_is_hermitian_and_nonnegative(a in arb_orbital(6), b in arb_orbital(6), h in 0.1..2.0f64) {
        let g = Grid1D::new(6, h).unwrap();
        let (phi, psi) = (orbital(g, &a), orbital(g, &b));
        let lhs = l2_inner(&phi, &laplacian_apply(&psi)).unwrap();
        let rhs = l2_inner(&laplacian_apply(&phi), &psi).unwrap();
        let scale = lhs.norm().max(rhs.norm()).max(1e-12);
        prop_assert!((lhs - rhs).norm() <= 1e-12 * scale.max(1.0));
        let q = l2_inner(&phi, &laplacian_apply(&phi)).unwrap();
        prop_assert!(q.re >= -1e-12);
        prop_assert!(q.im.abs() <= 1e-12 * q.re.abs().max(1.0));
    }

    #[test]
    fn mean_field_potential_is_real(a in arb_orbital(5), b in arb_orbital(5), w in 0.2..1.5f64) {
        let g = Grid1D::new(5, 0.7).unwrap();
        let v = PairPotential::gaussian(g, 1.3, w).unwrap();
        let (phi, psi) = (orbital(g, &a), orbital(g, &b));
        let field = convolve(&v, &psi.density()).unwrap();
        let weighted = Orbital::new(g, phi.amps().iter().zip(&field).map(|(z, f)| z * f).collect()).unwrap();
        let z = l2_inner(&phi, &weighted).unwrap();
        prop_assert!(z.im.abs() <= 1e-12 * z.re.abs().max(1.0));
    }

    #[test]
    fn plane_waves_commute_through_both_operators(m in -4i64..4, w in 0.2..1.5f64) {
        let g = Grid1D::new(8, 0.6).unwrap();
        let v = PairPotential::gaussian(g, 0.8, w).unwrap();
        let pw = Orbital::plane_wave(g, m);
        let conv_then_lap = laplacian_apply(
            &Orbital::new(g, convolve_complex(&v, pw.amps()).unwrap()).unwrap(),
        );
        let lap_then_conv = convolve_complex(&v, laplacian_apply(&pw).amps()).unwrap();
        for (a, b) in conv_then_lap.amps().iter().zip(&lap_then_conv) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }
}
