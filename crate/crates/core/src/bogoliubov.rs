//! Quadratic fluctuation dynamics around a Hartree trajectory.
//!
//! The generator
//! `L(t) = Σ D_xy b_x†b_y + ½Σ (P_xy b_x†b_y† + conj(P_xy) b_x b_y)` has
//! `D = −Δ_h + V_ext + V∗|φ_t|² + X`, `X_xy = h·v(x−y)·φ_t(x)·conj(φ_t(y))`,
//! and pairing `P = conj(B)` with `B_xy = h·v(x−y)·conj(φ_t(x)·φ_t(y))`.
//!
//! Conjugation by the quadratic evolution acts linearly on
//! `A(f,g) = a(f) + a*(ḡ)`:
//! `U*(t;s) A(f,g) U(t;s) = A(θ(t;s)(f,g))`. In this Heisenberg convention
//! the map obeys `i∂_tθ(t;s) = −θ(t;s)·A(t)` with
//! `A(t) = [[D, −conj(B)], [B, −conj(D)]]`, and composes as
//! `θ(t;0) = θ(s;0)·θ(t;s)`. Both the sign and the order are pinned by
//! [`verify_bogoliubov_action`].

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{
    annihilate_smeared, assemble_monomials, create_smeared, quadratic_monomials, FockBasis, FockOptions, FockVector,
    SqueezeKernel,
};
use crate::krylov::{expm_apply, KrylovStats};
use crate::lattice::{convolve, LatticeModel, Orbital};
use crate::meanfield::Trajectory;
use crate::sparse::{Csr, LinearOperator};

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// One-body block `D` and pairing block `B` at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticGenerator {
    pub time: f64,
    pub d: DMatrix<C64>,
    pub b: DMatrix<C64>,
}

impl QuadraticGenerator {
    pub fn modes(&self) -> usize {
        self.d.nrows()
    }

    /// `[[D, −conj(B)], [B, −conj(D)]]`
    pub fn a_matrix(&self) -> DMatrix<C64> {
        let m = self.modes();
        let mut a = DMatrix::zeros(2 * m, 2 * m);
        a.view_mut((0, 0), (m, m)).copy_from(&self.d);
        a.view_mut((0, m), (m, m)).copy_from(&(-self.b.map(|c| c.conj())));
        a.view_mut((m, 0), (m, m)).copy_from(&self.b);
        a.view_mut((m, m), (m, m)).copy_from(&(-self.d.map(|c| c.conj())));
        a
    }

    /// Coefficient `P = conj(B)` of `½ b†b†` in the Fock-space generator.
    pub fn pairing(&self) -> DMatrix<C64> {
        self.b.map(|c| c.conj())
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.d - self.d.adjoint()).norm()
    }

    pub fn symmetry_defect(&self) -> f64 {
        (&self.b - self.b.transpose()).norm()
    }

    /// The generator as a sparse matrix on a truncated Fock basis.
    pub fn fock_matrix(&self, basis: &std::sync::Arc<FockBasis>) -> Result<Csr<C64>> {
        assemble_monomials(basis, &quadratic_monomials(&self.d, &self.pairing()))
    }
}

/// Generator blocks for the orbital `phi` (at time `time`) in `model`.
pub fn build_generator(model: &LatticeModel, phi: &Orbital, time: f64) -> Result<QuadraticGenerator> {
    if phi.grid() != &model.grid {
        return Err(Error::GridMismatch("orbital and model grids differ".into()));
    }
    let m = model.grid.num_sites();
    let h = model.grid.spacing();
    let c = phi.amps();
    let mean = convolve(&model.pair, &phi.density())?;
    let one_body = model.one_body_matrix();
    let mut d = DMatrix::from_fn(m, m, |x, y| C64::new(one_body[(x, y)], 0.0));
    let mut b = DMatrix::zeros(m, m);
    for x in 0..m {
        d[(x, x)] += mean[x];
        for y in 0..m {
            let v = h * model.pair.between(x, y);
            d[(x, y)] += v * c[x] * c[y].conj();
            b[(x, y)] = v * (c[x] * c[y]).conj();
        }
    }
    Ok(QuadraticGenerator { time, d, b })
}

/// `θ = [[U, conj(W)], [W, conj(U)]]`, stored through its two independent blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct BogoliubovMap {
    pub u: DMatrix<C64>,
    pub w: DMatrix<C64>,
}

impl BogoliubovMap {
    pub fn identity(m: usize) -> Self {
        Self {
            u: DMatrix::identity(m, m),
            w: DMatrix::zeros(m, m),
        }
    }

    pub fn modes(&self) -> usize {
        self.u.nrows()
    }

    pub fn full(&self) -> DMatrix<C64> {
        let m = self.modes();
        let mut t = DMatrix::zeros(2 * m, 2 * m);
        t.view_mut((0, 0), (m, m)).copy_from(&self.u);
        t.view_mut((0, m), (m, m)).copy_from(&self.w.map(|c| c.conj()));
        t.view_mut((m, 0), (m, m)).copy_from(&self.w);
        t.view_mut((m, m), (m, m)).copy_from(&self.u.map(|c| c.conj()));
        t
    }

    /// Reads a full `2M×2M` matrix, checking the conjugation block structure.
    pub fn from_full(t: &DMatrix<C64>) -> Result<Self> {
        let m = t.nrows() / 2;
        if t.nrows() != 2 * m || t.ncols() != 2 * m {
            return Err(Error::DimensionMismatch {
                expected: 2 * m,
                got: t.ncols(),
            });
        }
        let u = t.view((0, 0), (m, m)).into_owned();
        let w = t.view((m, 0), (m, m)).into_owned();
        let map = Self { u, w };
        let defect = (map.full() - t).norm();
        if defect > 1e-12 * t.norm().max(1.0) {
            return Err(Error::Consistency(format!(
                "matrix does not commute with the conjugation J (defect {defect:e})"
            )));
        }
        Ok(map)
    }

    /// `self · other`
    pub fn compose(&self, other: &BogoliubovMap) -> BogoliubovMap {
        let wbar = self.w.map(|c| c.conj());
        let ubar = self.u.map(|c| c.conj());
        BogoliubovMap {
            u: &self.u * &other.u + wbar * &other.w,
            w: &self.w * &other.u + ubar * &other.w,
        }
    }

    /// `θ(f, g)` on site-coefficient vectors.
    pub fn apply(&self, f: &[C64], g: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let m = self.modes();
        let fv = nalgebra::DVector::from_column_slice(f);
        let gv = nalgebra::DVector::from_column_slice(g);
        let top = &self.u * &fv + self.w.map(|c| c.conj()) * &gv;
        let bottom = &self.w * &fv + self.u.map(|c| c.conj()) * &gv;
        debug_assert_eq!(top.len(), m);
        (top.iter().copied().collect(), bottom.iter().copied().collect())
    }

    /// `‖θ*Sθ − S‖_F` with `S = diag(1, −1)`.
    pub fn symplectic_defect(&self) -> f64 {
        let m = self.modes();
        let t = self.full();
        let mut s = DMatrix::<C64>::identity(2 * m, 2 * m);
        for i in m..2 * m {
            s[(i, i)] = C64::new(-1.0, 0.0);
        }
        (t.adjoint() * &s * &t - s).norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThetaOptions {
    pub dt: f64,
    /// Largest tolerated symplectic defect per unit time.
    pub defect_bound: f64,
}

impl Default for ThetaOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            defect_bound: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BogoliubovFlow {
    pub theta: BogoliubovMap,
    pub times: Vec<f64>,
    pub defects: Vec<f64>,
}

impl BogoliubovFlow {
    pub fn max_defect(&self) -> f64 {
        self.defects.iter().fold(0.0, |a, &b| a.max(b))
    }
}

type Blocks = (DMatrix<C64>, DMatrix<C64>);

fn rhs(gen: &QuadraticGenerator, u: &DMatrix<C64>, w: &DMatrix<C64>) -> Blocks {
    // dU/dt = i(U D + conj(W) B), dW/dt = i(W D + conj(U) B)
    let i = C64::new(0.0, 1.0);
    let du = (u * &gen.d + w.map(|c| c.conj()) * &gen.b) * i;
    let dw = (w * &gen.d + u.map(|c| c.conj()) * &gen.b) * i;
    (du, dw)
}

/// RK4 integration of `θ(t;s)` from `θ(s;s) = 1`. `generator(τ)` must be
/// available at the step points and midpoints.
pub fn theta_evolve<G>(generator: G, s: f64, t: f64, opts: &ThetaOptions) -> Result<BogoliubovFlow>
where
    G: Fn(f64) -> Result<QuadraticGenerator>,
{
    if !(opts.dt > 0.0) {
        return Err(Error::InvalidInput("theta step must be positive".into()));
    }
    let first = generator(s)?;
    let m = first.modes();
    let mut map = BogoliubovMap::identity(m);
    let mut flow = BogoliubovFlow {
        theta: map.clone(),
        times: vec![s],
        defects: vec![0.0],
    };
    let span = t - s;
    let steps = (span.abs() / opts.dt - 1e-9).ceil().max(0.0) as usize;
    if steps == 0 {
        return Ok(flow);
    }
    let h = span / steps as f64;
    let bound = opts.defect_bound * span.abs().max(1.0);
    let mut g0 = first;
    for k in 0..steps {
        let t0 = s + k as f64 * h;
        let gm = generator(t0 + 0.5 * h)?;
        let g1 = generator(t0 + h)?;
        let (u, w) = (&map.u, &map.w);
        let half = C64::new(0.5 * h, 0.0);
        let full = C64::new(h, 0.0);
        let (k1u, k1w) = rhs(&g0, u, w);
        let (k2u, k2w) = rhs(&gm, &(u + &k1u * half), &(w + &k1w * half));
        let (k3u, k3w) = rhs(&gm, &(u + &k2u * half), &(w + &k2w * half));
        let (k4u, k4w) = rhs(&g1, &(u + &k3u * full), &(w + &k3w * full));
        let c = C64::new(h / 6.0, 0.0);
        let two = C64::new(2.0, 0.0);
        map = BogoliubovMap {
            u: u + (k1u + k2u * two + k3u * two + k4u) * c,
            w: w + (k1w + k2w * two + k3w * two + k4w) * c,
        };
        let defect = map.symplectic_defect();
        let now = t0 + h;
        if !defect.is_finite() {
            return Err(Error::NonFinite("bogoliubov flow".into()));
        }
        if defect > bound {
            return Err(Error::SymplecticDefect { defect, bound, time: now });
        }
        flow.times.push(now);
        flow.defects.push(defect);
        g0 = g1;
    }
    flow.theta = map;
    Ok(flow)
}

/// `θ(t;s)` along a stored Hartree trajectory, using linear interpolation
/// between samples (exact at the samples themselves).
pub fn theta_along(
    model: &LatticeModel,
    hartree: &Trajectory,
    s: f64,
    t: f64,
    opts: &ThetaOptions,
) -> Result<BogoliubovFlow> {
    theta_evolve(|tau| build_generator(model, &hartree.interpolate(tau), tau), s, t, opts)
}

/// `cosh_K = Σ (K K̄)ⁿ/(2n)!` and `sinh_K = Σ (K K̄)ⁿ K/(2n+1)!` for an
/// operator matrix `K` in the orthonormal site basis.
pub fn cosh_sinh_matrix(k: &DMatrix<C64>) -> (DMatrix<C64>, DMatrix<C64>) {
    let m = k.nrows();
    let kkbar = k * k.map(|c| c.conj());
    let mut cosh = DMatrix::<C64>::identity(m, m);
    let mut sinh = k.clone();
    let mut power = DMatrix::<C64>::identity(m, m);
    let mut n = 0usize;
    loop {
        n += 1;
        power = &power * &kkbar;
        let c_term = &power / C64::new(factorial(2 * n), 0.0);
        let s_term = &power * k / C64::new(factorial(2 * n + 1), 0.0);
        cosh += &c_term;
        sinh += &s_term;
        let small = c_term.norm() <= 1e-17 * cosh.norm() && s_term.norm() <= 1e-17 * sinh.norm().max(1e-300);
        if small || n > 170 / 2 - 1 {
            break;
        }
    }
    (cosh, sinh)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// [`cosh_sinh_matrix`] of the kernel's operator matrix `h·k`.
pub fn cosh_sinh(k: &SqueezeKernel) -> (DMatrix<C64>, DMatrix<C64>) {
    cosh_sinh_matrix(&k.operator_matrix())
}

/// Hermitian 4th-order Magnus generator
/// `½(L1 + L2) − i(√3·δ/12)[L2, L1]` at the two Gauss points of a step.
struct MagnusGenerator {
    l1: Csr<C64>,
    l2: Csr<C64>,
    c: f64,
}

impl LinearOperator for MagnusGenerator {
    fn dim(&self) -> usize {
        self.l1.nrows()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let n = x.len();
        let mut a = vec![zero(); n];
        let mut b = vec![zero(); n];
        let mut ab = vec![zero(); n];
        let mut ba = vec![zero(); n];
        self.l1.matvec(x, &mut a);
        self.l2.matvec(x, &mut b);
        self.l2.matvec(&a, &mut ab);
        self.l1.matvec(&b, &mut ba);
        let ic = C64::new(0.0, -self.c);
        for i in 0..n {
            y[i] = 0.5 * (a[i] + b[i]) + ic * (ab[i] - ba[i]);
        }
    }
}

/// Propagates `i∂Ψ = L(τ)Ψ` from `t0` to `t1` (either direction) with
/// 4th-order Magnus steps; `phi(τ)` supplies the Hartree orbital.
pub fn quadratic_fock_evolve<P>(
    model: &LatticeModel,
    phi: P,
    psi: &FockVector,
    t0: f64,
    t1: f64,
    dt: f64,
    opts: &FockOptions,
) -> Result<(FockVector, KrylovStats)>
where
    P: Fn(f64) -> Result<Orbital>,
{
    if !(dt > 0.0) {
        return Err(Error::InvalidInput("step must be positive".into()));
    }
    let basis = psi.basis().clone();
    if basis.modes() != model.grid.num_sites() {
        return Err(Error::DimensionMismatch {
            expected: model.grid.num_sites(),
            got: basis.modes(),
        });
    }
    let span = t1 - t0;
    let steps = (span.abs() / dt - 1e-9).ceil().max(0.0) as usize;
    let mut stats = KrylovStats::default();
    if steps == 0 {
        return Ok((psi.clone(), stats));
    }
    let delta = span / steps as f64;
    let g = 3f64.sqrt() / 6.0;
    let mut v = psi.amps().to_vec();
    for k in 0..steps {
        let a = t0 + k as f64 * delta;
        let (s1, s2) = (a + (0.5 - g) * delta, a + (0.5 + g) * delta);
        let l1 = build_generator(model, &phi(s1)?, s1)?.fock_matrix(&basis)?;
        let l2 = build_generator(model, &phi(s2)?, s2)?.fock_matrix(&basis)?;
        let op = MagnusGenerator {
            l1,
            l2,
            c: 3f64.sqrt() * delta / 12.0,
        };
        let (w, st) = expm_apply(&op, &v, delta, &opts.krylov)?;
        v = w;
        stats.merge(&st);
    }
    let out = FockVector::from_amps(&basis, v)?;
    let top = out.top_sector_weight() / out.norm_sqr().max(1e-300);
    if top > opts.truncation_tol {
        return Err(Error::TruncationInadequate {
            what: "quadratic evolution pushed weight into the top sector".into(),
            defect: top,
            tolerance: opts.truncation_tol,
        });
    }
    Ok((out, stats))
}

/// `A(f,g)Ψ = a(f)Ψ + a*(ḡ)Ψ`.
pub fn apply_field(f: &Orbital, g: &Orbital, psi: &FockVector) -> Result<FockVector> {
    let af = annihilate_smeared(f, psi)?;
    let cg = create_smeared(&g.conj(), psi)?;
    af.add_scaled(C64::new(1.0, 0.0), &cg)
}

/// Largest normalized residual `‖U*A(f,g)UΨ − A(θ(f,g))Ψ‖ / (‖(f,g)‖·‖(𝒩+1)^{1/2}Ψ‖)`
/// over the given pairs and vectors, with `U = U(t;0)` from
/// [`quadratic_fock_evolve`] along the same orbital path as `theta = θ(t;0)`.
#[allow(clippy::too_many_arguments)]
pub fn verify_bogoliubov_action<P>(
    model: &LatticeModel,
    phi: P,
    theta: &BogoliubovMap,
    t: f64,
    dt: f64,
    pairs: &[(Orbital, Orbital)],
    vectors: &[FockVector],
    opts: &FockOptions,
) -> Result<f64>
where
    P: Fn(f64) -> Result<Orbital> + Copy,
{
    let grid = model.grid;
    let mut worst = 0.0f64;
    for psi in vectors {
        let (forward, _) = quadratic_fock_evolve(model, phi, psi, 0.0, t, dt, opts)?;
        let (_, n1) = psi.number_root_norms();
        for (f, g) in pairs {
            let pushed = apply_field(f, g, &forward)?;
            let (lhs, _) = quadratic_fock_evolve(model, phi, &pushed, t, 0.0, dt, opts)?;
            let (tf, tg) = theta.apply(&f.site_coefficients(), &g.site_coefficients());
            let f2 = Orbital::from_site_coefficients(grid, &tf)?;
            let g2 = Orbital::from_site_coefficients(grid, &tg)?;
            let rhs = apply_field(&f2, &g2, psi)?;
            let scale = (f.norm_sqr() + g.norm_sqr()).sqrt() * n1;
            worst = worst.max(lhs.distance(&rhs)? / scale.max(1e-300));
        }
    }
    Ok(worst)
}

fn check_hermitian(o: &DMatrix<C64>) -> Result<()> {
    let defect = (o - o.adjoint()).norm();
    if defect > 1e-12 * o.norm().max(1.0) {
        return Err(Error::NonHermitian(defect));
    }
    Ok(())
}

/// Limiting variance of `N^{−1/2}·Σ_j (O_j − ⟨φ_t, Oφ_t⟩)` for factorized
/// initial data `φ^{⊗N}`.
///
/// With `g = (O − ⟨O⟩_t)φ_t` and `(u, ū) = θ(t;0)(g, ḡ)`, the field
/// `a(g) + a*(g)` at time `t` equals `a(u) + a*(u)` in the vacuum of the
/// initial fluctuations. Factorized data fixes the number quadrature
/// `a(φ) + a*(φ)`, so the variance is the Gaussian conditional one,
/// `‖u‖² − (Re⟨u, φ⟩)²`. At `t = 0` this is `⟨φ,O²φ⟩ − ⟨φ,Oφ⟩²`.
pub fn clt_variance(theta: &BogoliubovMap, phi: &Orbital, phi_t: &Orbital, o: &DMatrix<C64>) -> Result<f64> {
    check_hermitian(o)?;
    let m = phi.len();
    if o.nrows() != m || theta.modes() != m || phi_t.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: o.nrows(),
        });
    }
    let dev = (phi.norm_sqr() - 1.0).abs();
    if dev > 1e-10 {
        return Err(Error::NotNormalized { deviation: dev });
    }
    let ct = nalgebra::DVector::from_column_slice(&phi_t.site_coefficients());
    let mean = (ct.adjoint() * o * &ct)[(0, 0)].re;
    let g: Vec<C64> = (o * &ct - &ct * C64::new(mean, 0.0)).iter().copied().collect();
    let gbar: Vec<C64> = g.iter().map(|c| c.conj()).collect();
    let (u, _) = theta.apply(&g, &gbar);
    let c0 = phi.site_coefficients();
    let norm2: f64 = u.iter().map(|c| c.norm_sqr()).sum();
    let overlap: f64 = u.iter().zip(&c0).map(|(a, b)| (b.conj() * a).re).sum();
    Ok((norm2 - overlap * overlap).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Grid1D, PairPotential};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn generator_without_interaction_is_free() {
        let g = Grid1D::new(4, 0.8).unwrap();
        let model = LatticeModel::free(g);
        let phi = Orbital::plane_wave(g, 1);
        let gen = build_generator(&model, &phi, 0.0).unwrap();
        let lap = crate::lattice::laplacian_matrix(&g).map(|x| c(x, 0.0));
        assert!((&gen.d - lap).norm() < 1e-14);
        assert_eq!(gen.b.norm(), 0.0);
    }

    #[test]
    fn real_orbital_gives_real_symmetric_pairing() {
        let g = Grid1D::new(5, 1.0).unwrap();
        let pair = PairPotential::gaussian(g, 1.3, 1.0).unwrap();
        let model = LatticeModel::new(pair, None).unwrap();
        let phi = Orbital::from_fn(g, |x| c(1.0 + 0.3 * x, 0.0)).unwrap().normalized().unwrap();
        let gen = build_generator(&model, &phi, 0.0).unwrap();
        assert!(gen.b.iter().all(|z| z.im == 0.0));
        assert!(gen.symmetry_defect() == 0.0);
        assert!(gen.hermiticity_defect() < 1e-15);
    }

    #[test]
    fn single_mode_series() {
        for r in [0.0, 0.3, 1.7] {
            let k = DMatrix::from_element(1, 1, c(r, 0.0));
            let (ch, sh) = cosh_sinh_matrix(&k);
            assert!((ch[(0, 0)].re - f64::cosh(r)).abs() < 1e-14);
            assert!((sh[(0, 0)].re - f64::sinh(r)).abs() < 1e-14);
        }
    }

    #[test]
    fn composition_of_blocks_matches_full_product() {
        let m = 3;
        let u = DMatrix::from_fn(m, m, |i, j| c((i + 2 * j) as f64 * 0.1, (i as f64 - j as f64) * 0.2));
        let w = DMatrix::from_fn(m, m, |i, j| c((i * j) as f64 * 0.05, 0.1));
        let a = BogoliubovMap { u: u.clone(), w: w.clone() };
        let b = BogoliubovMap { u: w.clone(), w: u.clone() };
        let full = a.full() * b.full();
        assert!((a.compose(&b).full() - &full).norm() < 1e-14);
        assert!(BogoliubovMap::from_full(&full).is_ok());
        let mut broken = full.clone();
        broken[(0, 0)] += c(1.0, 0.0);
        assert!(BogoliubovMap::from_full(&broken).is_err());
    }

    #[test]
    fn identity_observable_has_no_variance() {
        let g = Grid1D::new(3, 1.0).unwrap();
        let phi = Orbital::from_fn(g, |x| c(1.0, 0.4 * x)).unwrap().normalized().unwrap();
        let id = DMatrix::<C64>::identity(3, 3);
        let theta = BogoliubovMap::identity(3);
        assert!(clt_variance(&theta, &phi, &phi, &id).unwrap() < 1e-28);
        let bad = DMatrix::from_fn(3, 3, |i, j| c(i as f64, j as f64));
        assert!(matches!(clt_variance(&theta, &phi, &phi, &bad), Err(Error::NonHermitian(_))));
    }
}
