//! Periodic one-dimensional lattice: grids, potentials, orbitals and the
//! one-body linear algebra everything else is built on.
//!
//! All L² quantities carry the measure weight `h`, so `‖φ‖² = h·Σ|c_i|²`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid1D {
    num_sites: usize,
    spacing: f64,
}

impl Grid1D {
    pub fn new(num_sites: usize, spacing: f64) -> Result<Self> {
        if num_sites < 2 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 2 sites, got {num_sites}"
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidInput(format!("grid spacing must be positive, got {spacing}")));
        }
        Ok(Self { num_sites, spacing })
    }

    /// Grid of `num_sites` points covering a ring of length `length`.
    pub fn with_length(num_sites: usize, length: f64) -> Result<Self> {
        Self::new(num_sites, length / num_sites as f64)
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn length(&self) -> f64 {
        self.num_sites as f64 * self.spacing
    }

    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.spacing
    }

    /// Displacement index `(i - j) mod M`.
    pub fn displacement(&self, i: usize, j: usize) -> usize {
        (i + self.num_sites - j % self.num_sites) % self.num_sites
    }

    /// Minimum-image distance for a displacement index.
    pub fn displacement_distance(&self, d: usize) -> f64 {
        let d = d % self.num_sites;
        d.min(self.num_sites - d) as f64 * self.spacing
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.displacement_distance(self.displacement(i, j))
    }

    /// Wave number of the `m`-th plane wave, `2πm/L`.
    pub fn wave_number(&self, m: i64) -> f64 {
        2.0 * std::f64::consts::PI * m as f64 / self.length()
    }

    pub(crate) fn ensure_same(&self, other: &Grid1D) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "({} sites, h = {}) vs ({} sites, h = {})",
                self.num_sites, self.spacing, other.num_sites, other.spacing
            )))
        }
    }
}

/// Even pair potential sampled per lattice displacement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairPotential {
    grid: Grid1D,
    samples: Vec<f64>,
    descriptor: Option<String>,
}

impl PairPotential {
    pub fn from_samples(grid: Grid1D, samples: Vec<f64>) -> Result<Self> {
        let m = grid.num_sites();
        if samples.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: samples.len(),
            });
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pair potential samples".into()));
        }
        for d in 1..m {
            let (a, b) = (samples[d], samples[m - d]);
            if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                return Err(Error::InvalidInput(format!(
                    "pair potential is not even: v[{d}] = {a}, v[{}] = {b}",
                    m - d
                )));
            }
        }
        Ok(Self {
            grid,
            samples,
            descriptor: None,
        })
    }

    /// Samples `v(r)` at the minimum-image distance of every displacement.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        let samples = (0..grid.num_sites())
            .map(|d| f(grid.displacement_distance(d)))
            .collect();
        Self::from_samples(grid, samples)
    }

    pub fn zero(grid: Grid1D) -> Self {
        Self {
            grid,
            samples: vec![0.0; grid.num_sites()],
            descriptor: Some("zero".into()),
        }
    }

    /// `strength · exp(-r² / (2 width²))`
    pub fn gaussian(grid: Grid1D, strength: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::InvalidInput("gaussian width must be positive".into()));
        }
        let mut v = Self::from_fn(grid, |r| strength * (-r * r / (2.0 * width * width)).exp())?;
        v.descriptor = Some(format!("gaussian(strength={strength}, width={width})"));
        Ok(v)
    }

    /// Periodic Gaussian of lattice mass `h·Σ_d v_d = mass` and width `width`.
    ///
    /// As the width shrinks below the spacing the family tends to
    /// `(mass/h)·δ_{d,0}`, whose convolution is the local nonlinearity `mass·|φ|²`.
    pub fn mollified_delta(grid: Grid1D, mass: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::InvalidInput("mollifier width must be positive".into()));
        }
        let profile: Vec<f64> = (0..grid.num_sites())
            .map(|d| {
                let r = grid.displacement_distance(d);
                (-r * r / (2.0 * width * width)).exp()
            })
            .collect();
        let total: f64 = grid.spacing() * profile.iter().sum::<f64>();
        let samples = profile.into_iter().map(|p| mass * p / total).collect();
        let mut v = Self::from_samples(grid, samples)?;
        v.descriptor = Some(format!("mollified_delta(mass={mass}, width={width})"));
        Ok(v)
    }

    pub fn with_descriptor(mut self, descriptor: impl Into<String>) -> Self {
        self.descriptor = Some(descriptor.into());
        self
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn descriptor(&self) -> Option<&str> {
        self.descriptor.as_deref()
    }

    /// `v` at displacement index `d` (taken mod M).
    pub fn at(&self, d: usize) -> f64 {
        self.samples[d % self.samples.len()]
    }

    /// `v(x_i - x_j)`
    pub fn between(&self, i: usize, j: usize) -> f64 {
        self.samples[self.grid.displacement(i, j)]
    }

    /// Lattice mass `h·Σ_d v_d`.
    pub fn mass(&self) -> f64 {
        self.grid.spacing() * self.samples.iter().sum::<f64>()
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|&v| v == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExternalPotential {
    samples: Vec<f64>,
}

impl ExternalPotential {
    pub fn from_samples(grid: &Grid1D, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.num_sites() {
            return Err(Error::DimensionMismatch {
                expected: grid.num_sites(),
                got: samples.len(),
            });
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("external potential samples".into()));
        }
        Ok(Self { samples })
    }

    pub fn from_fn(grid: &Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_samples(grid, (0..grid.num_sites()).map(|i| f(grid.coord(i))).collect())
    }

    /// `strength·(1 - cos(2πx/L))`, a smooth periodic trap centred at `x = 0`.
    pub fn cosine_trap(grid: &Grid1D, strength: f64) -> Result<Self> {
        let l = grid.length();
        Self::from_fn(grid, |x| strength * (1.0 - (2.0 * std::f64::consts::PI * x / l).cos()))
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// One-body wave function on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Orbital {
    grid: Grid1D,
    amps: Vec<C64>,
}

impl Orbital {
    pub fn new(grid: Grid1D, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != grid.num_sites() {
            return Err(Error::DimensionMismatch {
                expected: grid.num_sites(),
                got: amps.len(),
            });
        }
        if amps.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("orbital amplitudes".into()));
        }
        Ok(Self { grid, amps })
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self {
            grid,
            amps: vec![C64::new(0.0, 0.0); grid.num_sites()],
        }
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> C64) -> Result<Self> {
        Self::new(grid, (0..grid.num_sites()).map(|i| f(grid.coord(i))).collect())
    }

    /// Normalized constant orbital `1/sqrt(L)`.
    pub fn constant(grid: Grid1D) -> Self {
        let c = C64::new(1.0 / grid.length().sqrt(), 0.0);
        Self {
            grid,
            amps: vec![c; grid.num_sites()],
        }
    }

    /// Normalized plane wave `e^{ikx}/sqrt(L)` with `k = 2πm/L`.
    pub fn plane_wave(grid: Grid1D, m: i64) -> Self {
        let k = grid.wave_number(m);
        let s = 1.0 / grid.length().sqrt();
        let amps = (0..grid.num_sites())
            .map(|i| C64::from_polar(s, k * grid.coord(i)))
            .collect();
        Self { grid, amps }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amps(self) -> Vec<C64> {
        self.amps
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.grid.spacing() * self.amps.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::InvalidInput("cannot normalize the zero orbital".into()));
        }
        for c in &mut self.amps {
            *c /= n;
        }
        Ok(self)
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self {
            grid: self.grid,
            amps: self.amps.iter().map(|c| c * s).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            grid: self.grid,
            amps: self.amps.iter().map(|c| c.conj()).collect(),
        }
    }

    /// Pointwise `|c_i|²`.
    pub fn density(&self) -> Vec<f64> {
        self.amps.iter().map(|c| c.norm_sqr()).collect()
    }

    /// `self - other`, for distances between orbitals.
    pub fn sub(&self, other: &Orbital) -> Result<Orbital> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            amps: self.amps.iter().zip(&other.amps).map(|(a, b)| a - b).collect(),
        })
    }

    /// Coefficients in the orthonormal site basis, `sqrt(h)·c_i`.
    pub fn site_coefficients(&self) -> Vec<C64> {
        let s = self.grid.spacing().sqrt();
        self.amps.iter().map(|c| c * s).collect()
    }

    /// Inverse of [`Orbital::site_coefficients`].
    pub fn from_site_coefficients(grid: Grid1D, coeffs: &[C64]) -> Result<Self> {
        let s = 1.0 / grid.spacing().sqrt();
        Self::new(grid, coeffs.iter().map(|c| c * s).collect())
    }
}

/// `(−Δ_h φ)_i = (2c_i − c_{i+1} − c_{i−1}) / h²` with periodic wrap-around.
pub fn laplacian_apply(phi: &Orbital) -> Orbital {
    let m = phi.len();
    let h2 = phi.grid.spacing() * phi.grid.spacing();
    let c = &phi.amps;
    let amps = (0..m)
        .map(|i| (2.0 * c[i] - c[(i + 1) % m] - c[(i + m - 1) % m]) / h2)
        .collect();
    Orbital {
        grid: phi.grid,
        amps,
    }
}

/// Dense matrix of `−Δ_h` in the site basis (real symmetric circulant).
pub fn laplacian_matrix(grid: &Grid1D) -> DMatrix<f64> {
    let m = grid.num_sites();
    let h2 = grid.spacing() * grid.spacing();
    let mut a = DMatrix::zeros(m, m);
    for i in 0..m {
        a[(i, i)] += 2.0 / h2;
        a[(i, (i + 1) % m)] -= 1.0 / h2;
        a[(i, (i + m - 1) % m)] -= 1.0 / h2;
    }
    a
}

/// Eigenvalue of `−Δ_h` on the plane wave with wave number `k`.
pub fn laplacian_eigenvalue(grid: &Grid1D, k: f64) -> f64 {
    let h = grid.spacing();
    2.0 / (h * h) * (1.0 - (k * h).cos())
}

/// Periodic convolution `(V∗ρ)_i = h·Σ_j v_{i−j} ρ_j`.
pub fn convolve(v: &PairPotential, rho: &[f64]) -> Result<Vec<f64>> {
    let m = v.grid.num_sites();
    if rho.len() != m {
        return Err(Error::GridMismatch(format!(
            "field of length {} on a {m}-site potential",
            rho.len()
        )));
    }
    let h = v.grid.spacing();
    Ok((0..m)
        .map(|i| h * (0..m).map(|j| v.samples[(i + m - j) % m] * rho[j]).sum::<f64>())
        .collect())
}

/// Complex version of [`convolve`], used for exchange-type terms `V∗(φ̄f)`.
pub fn convolve_complex(v: &PairPotential, field: &[C64]) -> Result<Vec<C64>> {
    let m = v.grid.num_sites();
    if field.len() != m {
        return Err(Error::GridMismatch(format!(
            "field of length {} on a {m}-site potential",
            field.len()
        )));
    }
    let h = v.grid.spacing();
    Ok((0..m)
        .map(|i| h * (0..m).map(|j| v.samples[(i + m - j) % m] * field[j]).sum::<C64>())
        .collect())
}

/// `⟨φ, ψ⟩ = h·Σ conj(φ_i) ψ_i`.
pub fn l2_inner(phi: &Orbital, psi: &Orbital) -> Result<C64> {
    phi.grid.ensure_same(&psi.grid)?;
    Ok(phi.grid.spacing()
        * phi
            .amps
            .iter()
            .zip(&psi.amps)
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>())
}

/// Grid, pair interaction and optional trap shared by the exact and
/// effective dynamics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LatticeModel {
    pub grid: Grid1D,
    pub pair: PairPotential,
    pub external: Option<ExternalPotential>,
}

impl LatticeModel {
    pub fn new(pair: PairPotential, external: Option<ExternalPotential>) -> Result<Self> {
        let grid = *pair.grid();
        if let Some(w) = &external {
            if w.len() != grid.num_sites() {
                return Err(Error::DimensionMismatch {
                    expected: grid.num_sites(),
                    got: w.len(),
                });
            }
        }
        Ok(Self {
            grid,
            pair,
            external,
        })
    }

    pub fn free(grid: Grid1D) -> Self {
        Self {
            grid,
            pair: PairPotential::zero(grid),
            external: None,
        }
    }

    pub fn external_at(&self, i: usize) -> f64 {
        self.external.as_ref().map_or(0.0, |w| w.samples()[i])
    }

    /// One-body matrix `−Δ_h + V_ext` in the site basis.
    pub fn one_body_matrix(&self) -> DMatrix<f64> {
        let mut a = laplacian_matrix(&self.grid);
        for i in 0..self.grid.num_sites() {
            a[(i, i)] += self.external_at(i);
        }
        a
    }
}
