//! Zero-energy scattering in three dimensions for radial, compactly
//! supported, repulsive potentials.
//!
//! With `u = r·f` the equation `(−Δ + V/2) f = 0` becomes `u'' = ½·V·u`.
//! Note the factor ½: with this normalization the scattering length obeys
//! `8π·a₀ = ∫ V f` without extra constants. Outside the support `u` is
//! linear, `u = α·(r − a₀)`, and `f = u/(α r) → 1`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::SqueezeKernel;
use crate::lattice::{Grid1D, Orbital};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Profile {
    Zero,
    /// `v·1[r ≤ R]`
    SoftSphere,
    /// `v·(1 − r²/R²)²` on `r ≤ R`
    Bump,
}

/// Radial potential `strength · profile(r / range)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RadialPotential {
    pub profile: Profile,
    pub strength: f64,
    pub range: f64,
}

impl RadialPotential {
    pub fn zero(range: f64) -> Self {
        Self {
            profile: Profile::Zero,
            strength: 0.0,
            range,
        }
    }

    pub fn soft_sphere(strength: f64, range: f64) -> Result<Self> {
        Self::new(Profile::SoftSphere, strength, range)
    }

    pub fn bump(strength: f64, range: f64) -> Result<Self> {
        Self::new(Profile::Bump, strength, range)
    }

    pub fn new(profile: Profile, strength: f64, range: f64) -> Result<Self> {
        if !(strength >= 0.0 && strength.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "only repulsive potentials are supported, got strength {strength}"
            )));
        }
        if !(range > 0.0 && range.is_finite()) {
            return Err(Error::InvalidInput(format!("potential range must be positive, got {range}")));
        }
        Ok(Self {
            profile,
            strength,
            range,
        })
    }

    pub fn at(&self, r: f64) -> f64 {
        let s = r / self.range;
        if s > 1.0 {
            return 0.0;
        }
        match self.profile {
            Profile::Zero => 0.0,
            Profile::SoftSphere => self.strength,
            Profile::Bump => {
                let q = 1.0 - s * s;
                self.strength * q * q
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.profile == Profile::Zero || self.strength == 0.0
    }

    /// `N²·V(N·)`: strength times `N²`, range divided by `N`.
    pub fn scaled(&self, n: f64) -> Self {
        Self {
            profile: self.profile,
            strength: self.strength * n * n,
            range: self.range / n,
        }
    }

    /// `b₀ = ∫ V d³x` in closed form.
    pub fn integral(&self) -> f64 {
        let r3 = self.range.powi(3);
        let pi4 = 4.0 * std::f64::consts::PI;
        match self.profile {
            Profile::Zero => 0.0,
            Profile::SoftSphere => pi4 * self.strength * r3 / 3.0,
            Profile::Bump => pi4 * self.strength * r3 * 8.0 / 105.0,
        }
    }
}

/// Soft-sphere scattering length `R − tanh(κR)/κ`, `κ = sqrt(v/2)`.
pub fn soft_sphere_scattering_length(strength: f64, range: f64) -> f64 {
    if strength == 0.0 {
        return 0.0;
    }
    let kappa = (0.5 * strength).sqrt();
    range - (kappa * range).tanh() / kappa
}

/// Radial nodes: uniform on `[0, R]` and on `[R, r_max]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadialGrid {
    range: f64,
    r_max: f64,
    inner_intervals: usize,
    outer_intervals: usize,
}

impl RadialGrid {
    pub fn new(range: f64, r_max: f64, inner_intervals: usize, outer_intervals: usize) -> Result<Self> {
        if !(range > 0.0) || !(r_max >= 5.0 * range) {
            return Err(Error::InvalidInput(format!(
                "radial grid needs r_max >= 5 R > 0, got R = {range}, r_max = {r_max}"
            )));
        }
        if inner_intervals < 2 || !inner_intervals.is_multiple_of(2) || outer_intervals < 4 {
            return Err(Error::InvalidInput(
                "radial grid needs an even number (>= 2) of inner intervals and >= 4 outer ones".into(),
            ));
        }
        Ok(Self {
            range,
            r_max,
            inner_intervals,
            outer_intervals,
        })
    }

    /// Default resolution for a potential of range `R`: `r_max = 10 R`.
    pub fn for_range(range: f64) -> Result<Self> {
        Self::new(range, 10.0 * range, 400, 400)
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn nodes(&self) -> Vec<f64> {
        let hi = self.range / self.inner_intervals as f64;
        let ho = (self.r_max - self.range) / self.outer_intervals as f64;
        let mut r: Vec<f64> = (0..=self.inner_intervals).map(|i| i as f64 * hi).collect();
        r[self.inner_intervals] = self.range;
        r.extend((1..=self.outer_intervals).map(|i| self.range + i as f64 * ho));
        *r.last_mut().unwrap() = self.r_max;
        r
    }

    /// Same node layout for the rescaled problem `N²V(N·)`.
    pub fn scaled(&self, n: f64) -> Self {
        Self {
            range: self.range / n,
            r_max: self.r_max / n,
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScatteringOptions {
    /// Relative tolerance of the adaptive integrator.
    pub tol: f64,
    /// Largest tolerated relative residual of the asymptotic linear fit.
    pub fit_tol: f64,
}

impl Default for ScatteringOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            fit_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScatteringSolution {
    pub potential: RadialPotential,
    pub grid: RadialGrid,
    pub nodes: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    /// `f = u/(α r)` at the nodes (`1/α` at the origin).
    pub f: Vec<f64>,
    pub alpha: f64,
    pub scattering_length: f64,
    pub fit_residual: f64,
    /// Spread of `a₀` under a coarser tolerance and a shifted fit window.
    pub error_estimate: f64,
}

impl ScatteringSolution {
    /// `ω(r) = 1 − f(r)`; cubic Hermite between nodes, `a₀/r` beyond `r_max`.
    pub fn omega(&self, r: f64) -> f64 {
        1.0 - self.f_at(r)
    }

    pub fn f_at(&self, r: f64) -> f64 {
        let n = self.nodes.len();
        if r >= self.nodes[n - 1] {
            return 1.0 - self.scattering_length / r;
        }
        if r <= 0.0 {
            return self.f[0];
        }
        let k = self.nodes.partition_point(|&x| x <= r).clamp(1, n - 1);
        let (r0, r1) = (self.nodes[k - 1], self.nodes[k]);
        let h = r1 - r0;
        let s = (r - r0) / h;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s),
            s * (1.0 - s) * (1.0 - s),
            s * s * (3.0 - 2.0 * s),
            s * s * (s - 1.0),
        );
        let u = h00 * self.u[k - 1] + h10 * h * self.du[k - 1] + h01 * self.u[k] + h11 * h * self.du[k];
        u / (self.alpha * r)
    }
}

/// One Dormand–Prince 5(4) step for `y = (u, u')`.
fn dp45_step(v: &RadialPotential, r: f64, y: [f64; 2], h: f64) -> ([f64; 2], [f64; 2]) {
    let f = |r: f64, y: [f64; 2]| [y[1], 0.5 * v.at(r) * y[0]];
    let add = |y: [f64; 2], terms: &[(f64, [f64; 2])]| {
        let mut o = y;
        for (c, k) in terms {
            o[0] += h * c * k[0];
            o[1] += h * c * k[1];
        }
        o
    };
    let k1 = f(r, y);
    let k2 = f(r + h / 5.0, add(y, &[(1.0 / 5.0, k1)]));
    let k3 = f(r + 3.0 * h / 10.0, add(y, &[(3.0 / 40.0, k1), (9.0 / 40.0, k2)]));
    let k4 = f(
        r + 4.0 * h / 5.0,
        add(y, &[(44.0 / 45.0, k1), (-56.0 / 15.0, k2), (32.0 / 9.0, k3)]),
    );
    let k5 = f(
        r + 8.0 * h / 9.0,
        add(
            y,
            &[
                (19372.0 / 6561.0, k1),
                (-25360.0 / 2187.0, k2),
                (64448.0 / 6561.0, k3),
                (-212.0 / 729.0, k4),
            ],
        ),
    );
    let k6 = f(
        r + h,
        add(
            y,
            &[
                (9017.0 / 3168.0, k1),
                (-355.0 / 33.0, k2),
                (46732.0 / 5247.0, k3),
                (49.0 / 176.0, k4),
                (-5103.0 / 18656.0, k5),
            ],
        ),
    );
    let b5 = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
    let y5 = add(y, &[(b5[0], k1), (b5[2], k3), (b5[3], k4), (b5[4], k5), (b5[5], k6)]);
    let k7 = f(r + h, y5);
    let b4 = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let ks = [k1, k2, k3, k4, k5, k6, k7];
    let mut err = [0.0; 2];
    for (i, k) in ks.iter().enumerate() {
        let b5i = if i < 6 { b5[i] } else { 0.0 };
        err[0] += h * (b5i - b4[i]) * k[0];
        err[1] += h * (b5i - b4[i]) * k[1];
    }
    (y5, err)
}

/// Integrates from `a` to `b` with step-size control; returns the state at `b`.
fn integrate_interval(v: &RadialPotential, a: f64, b: f64, mut y: [f64; 2], tol: f64) -> Result<[f64; 2]> {
    let span = b - a;
    let mut r = a;
    let mut h = 0.25 * span;
    let mut guard = 0;
    while r < b {
        if r + h > b {
            h = b - r;
        }
        let (y_new, err) = dp45_step(v, r, y, h);
        let su = y[0].abs().max(y_new[0].abs()).max(h * y[1].abs()).max(1e-300);
        let sd = y[1].abs().max(y_new[1].abs()).max(1e-300);
        let e = (err[0].abs() / su).max(err[1].abs() / sd) / tol;
        if e <= 1.0 {
            r = if (b - (r + h)).abs() <= 1e-14 * span { b } else { r + h };
            y = y_new;
        }
        let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        guard += 1;
        if guard > 1_000_000 || !y[0].is_finite() || !y[1].is_finite() {
            return Err(Error::NonFinite("radial scattering integration".into()));
        }
    }
    Ok(y)
}

struct Shot {
    u: Vec<f64>,
    du: Vec<f64>,
}

fn shoot(v: &RadialPotential, nodes: &[f64], tol: f64) -> Result<Shot> {
    let mut u = Vec::with_capacity(nodes.len());
    let mut du = Vec::with_capacity(nodes.len());
    let mut y = [0.0, 1.0];
    u.push(y[0]);
    du.push(y[1]);
    for w in nodes.windows(2) {
        y = integrate_interval(v, w[0], w[1], y, tol)?;
        u.push(y[0]);
        du.push(y[1]);
    }
    Ok(Shot { u, du })
}

/// Least-squares line `u ≈ α(r − a₀)` over nodes in `[lo, r_max]`, returning
/// `(α, a₀, relative max residual)`.
fn fit_asymptote(nodes: &[f64], u: &[f64], lo: f64) -> (f64, f64, f64) {
    let idx: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i] >= lo - 1e-12 * lo.abs()).collect();
    let a = DMatrix::from_fn(idx.len(), 2, |i, j| if j == 0 { nodes[idx[i]] } else { 1.0 });
    let b = DVector::from_iterator(idx.len(), idx.iter().map(|&i| u[i]));
    let sol = a.clone().svd(true, true).solve(&b, 1e-15).expect("svd solve");
    let (alpha, c) = (sol[0], sol[1]);
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    let resid = (a * &sol - &b).iter().fold(0.0f64, |m, x| m.max(x.abs())) / scale;
    (alpha, -c / alpha, resid)
}

pub fn solve_zero_energy(v: &RadialPotential, grid: &RadialGrid, opts: &ScatteringOptions) -> Result<ScatteringSolution> {
    if v.range > grid.range * (1.0 + 1e-12) && !v.is_zero() {
        return Err(Error::InvalidInput(format!(
            "potential range {} exceeds the grid's inner region {}",
            v.range, grid.range
        )));
    }
    let nodes = grid.nodes();
    let lo = (2.0 * grid.range).max(0.5 * grid.r_max);
    let shot = shoot(v, &nodes, opts.tol)?;
    let (mut alpha, mut a0, resid) = fit_asymptote(&nodes, &shot.u, lo);
    if v.is_zero() {
        // u = r exactly; keep round-off out of a₀
        (alpha, a0) = (1.0, 0.0);
    }
    if !(alpha > 0.0) {
        return Err(Error::BoundState { alpha });
    }
    if resid > opts.fit_tol {
        return Err(Error::FitResidual {
            residual: resid,
            tolerance: opts.fit_tol,
        });
    }
    // error estimate from a coarser run and a narrower window
    let coarse = shoot(v, &nodes, (opts.tol * 100.0).min(1e-4))?;
    let (_, a0_coarse, _) = fit_asymptote(&nodes, &coarse.u, lo);
    let lo2 = (3.0 * grid.range).max(0.75 * grid.r_max);
    let (_, a0_window, _) = fit_asymptote(&nodes, &shot.u, lo2);
    let error_estimate = (a0 - a0_coarse).abs().max((a0 - a0_window).abs()) + 1e-14 * a0.abs().max(grid.range);

    let f = nodes
        .iter()
        .zip(&shot.u)
        .zip(&shot.du)
        .map(|((&r, &u), &du)| if r == 0.0 { du / alpha } else { u / (alpha * r) })
        .collect();
    Ok(ScatteringSolution {
        potential: *v,
        grid: grid.clone(),
        nodes,
        u: shot.u,
        du: shot.du,
        f,
        alpha,
        scattering_length: a0,
        fit_residual: resid,
        error_estimate,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityCheck {
    /// `8π·a₀`
    pub lhs: f64,
    /// `4π·∫ V f r² dr`
    pub rhs: f64,
    pub rel_err: f64,
}

/// Composite Simpson rule over the inner nodes, where the potential lives.
fn inner_simpson(s: &ScatteringSolution, integrand: impl Fn(f64, usize) -> f64) -> f64 {
    let n = s.grid.inner_intervals;
    let h = s.grid.range / n as f64;
    let mut acc = integrand(s.nodes[0], 0) + integrand(s.nodes[n], n);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * integrand(s.nodes[i], i);
    }
    acc * h / 3.0
}

pub fn check_identity(s: &ScatteringSolution) -> IdentityCheck {
    let lhs = 8.0 * std::f64::consts::PI * s.scattering_length;
    // V f r² = V u r / α
    let v = &s.potential;
    let int = inner_simpson(s, |r, i| v.at(r) * s.u[i] * r);
    let rhs = 4.0 * std::f64::consts::PI * int / s.alpha;
    let rel_err = if lhs == 0.0 && rhs == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / lhs.abs().max(rhs.abs())
    };
    IdentityCheck { lhs, rhs, rel_err }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Couplings {
    /// `∫ V`
    pub b0: f64,
    /// `8π·a₀`
    pub g_gp: f64,
}

pub fn coupling_constants(s: &ScatteringSolution) -> Result<Couplings> {
    let b0 = s.potential.integral();
    let g_gp = 8.0 * std::f64::consts::PI * s.scattering_length;
    if g_gp > b0 * (1.0 + 1e-10) + 1e-14 {
        return Err(Error::Consistency(format!(
            "8πa₀ = {g_gp} exceeds ∫V = {b0} for a repulsive potential"
        )));
    }
    Ok(Couplings { b0, g_gp })
}

/// Scattering length of `N²V(N·)` by the scaling law, `a₀/N`.
pub fn scaled_scattering_length(s: &ScatteringSolution, n: f64) -> Result<f64> {
    if !(n >= 1.0) {
        return Err(Error::InvalidInput(format!("scale must be at least 1, got {n}")));
    }
    Ok(s.scattering_length / n)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingCheck {
    pub n: f64,
    pub predicted: f64,
    pub direct: f64,
    pub rel_err: f64,
}

/// Solves the rescaled problem directly and compares against `a₀/N`.
pub fn scaled_direct(s: &ScatteringSolution, n: f64, opts: &ScatteringOptions) -> Result<ScalingCheck> {
    let predicted = scaled_scattering_length(s, n)?;
    let sol = solve_zero_energy(&s.potential.scaled(n), &s.grid.scaled(n), opts)?;
    let direct = sol.scattering_length;
    let rel_err = if predicted == 0.0 && direct == 0.0 {
        0.0
    } else {
        (direct - predicted).abs() / predicted.abs().max(direct.abs())
    };
    if rel_err > 1e-8 {
        return Err(Error::Consistency(format!(
            "direct resolve at N = {n} gives {direct}, scaling law {predicted} (rel. {rel_err:e})"
        )));
    }
    Ok(ScalingCheck {
        n,
        predicted,
        direct,
        rel_err,
    })
}

/// `∫ N³V(Nx) f(Nx) d³x` by Simpson quadrature on the rescaled inner nodes.
pub fn scaled_mass(s: &ScatteringSolution, n: f64) -> f64 {
    let v = s.potential;
    let int = inner_simpson(s, |r, i| {
        let x = r / n;
        n.powi(3) * v.at(n * x) * s.f[i] * x * x
    });
    // Simpson above ran on the unscaled spacing; dx = dr/N
    4.0 * std::f64::consts::PI * int / n
}

/// `k(x,y) = −N·ω(N·dist(x,y))·φ(x)·φ(y)` on the lattice.
pub fn correlation_kernel(s: &ScatteringSolution, n: f64, phi: &Orbital, grid: &Grid1D) -> Result<SqueezeKernel> {
    if phi.grid() != grid {
        return Err(Error::GridMismatch("orbital and kernel grids differ".into()));
    }
    let m = grid.num_sites();
    let a = phi.amps();
    let mut k = DMatrix::<C64>::zeros(m, m);
    for x in 0..m {
        for y in x..m {
            let w = s.omega(n * grid.distance(x, y));
            let val = a[x] * a[y] * (-n * w);
            k[(x, y)] = val;
            k[(y, x)] = val;
        }
    }
    SqueezeKernel::new(*grid, k)
}
