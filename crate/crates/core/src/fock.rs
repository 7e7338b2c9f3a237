//! Truncated bosonic Fock space over the lattice sites.
//!
//! Site modes `b_i` are orthonormal: `[b_i, b_j†] = δ_ij`. Smeared operators
//! absorb the lattice weight, `a(f) = sqrt(h)·Σ conj(f_i) b_i`, so that
//! `[a(f), a*(g)] = ⟨f, g⟩` with the weighted inner product of
//! [`crate::lattice::l2_inner`].
//!
//! Truncation keeps every occupation vector with `Σn ≤ N_max`; creation
//! operators send the top sector to zero, so the commutation relations hold
//! exactly on all interior sectors.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::krylov::{expm_apply, KrylovOptions, KrylovStats};
use crate::lattice::{Grid1D, Orbital};
use crate::par;
use crate::sparse::Csr;

/// Largest number of modes a [`FockBasis`] accepts.
pub const MAX_MODES: usize = 64;

/// Default cap on the number of basis states.
pub const DEFAULT_BASIS_CAP: usize = 5_000_000;

/// Occupation-number basis with a total-particle cutoff, in graded
/// lexicographic order: by total particle number, then lexicographically
/// ascending. The vacuum is index 0 and every sector is a contiguous range.
#[derive(Debug)]
pub struct FockBasis {
    modes: usize,
    n_max: usize,
    occ: Vec<u16>,
    sector_start: Vec<usize>,
    // binom[a * (modes + 1) + b] = C(a, b), b <= modes
    binom: Vec<u64>,
}

impl FockBasis {
    pub fn new(modes: usize, n_max: usize) -> Result<Arc<Self>> {
        Self::with_cap(modes, n_max, DEFAULT_BASIS_CAP)
    }

    pub fn with_cap(modes: usize, n_max: usize, cap: usize) -> Result<Arc<Self>> {
        if modes == 0 || modes > MAX_MODES {
            return Err(Error::InvalidInput(format!(
                "fock basis needs 1..={MAX_MODES} modes, got {modes}"
            )));
        }
        if n_max > u16::MAX as usize {
            return Err(Error::InvalidInput(format!("cutoff {n_max} too large")));
        }
        let size = basis_size_u128(modes, n_max);
        if size > cap as u128 {
            return Err(Error::BasisTooLarge {
                modes,
                n_max,
                size,
                cap,
            });
        }
        let size = size as usize;
        let rows = n_max + modes + 1;
        let mut binom = vec![0u64; rows * (modes + 1)];
        for a in 0..rows {
            binom[a * (modes + 1)] = 1;
            for b in 1..=modes.min(a) {
                let left = binom[(a - 1) * (modes + 1) + b - 1];
                let up = if b < a { binom[(a - 1) * (modes + 1) + b] } else { 0 };
                binom[a * (modes + 1) + b] = left.saturating_add(up);
            }
        }

        let mut occ = Vec::with_capacity(size * modes);
        let mut sector_start = Vec::with_capacity(n_max + 2);
        let mut current = vec![0u16; modes];
        for n in 0..=n_max {
            sector_start.push(occ.len() / modes);
            push_compositions(&mut occ, &mut current, 0, n);
        }
        sector_start.push(occ.len() / modes);
        debug_assert_eq!(occ.len(), size * modes);
        Ok(Arc::new(Self {
            modes,
            n_max,
            occ,
            sector_start,
            binom,
        }))
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn len(&self) -> usize {
        self.occ.len() / self.modes
    }

    pub fn is_empty(&self) -> bool {
        self.occ.is_empty()
    }

    pub fn occupation(&self, index: usize) -> &[u16] {
        &self.occ[index * self.modes..(index + 1) * self.modes]
    }

    pub fn sector_range(&self, n: usize) -> Range<usize> {
        self.sector_start[n]..self.sector_start[n + 1]
    }

    pub fn sector_dim(&self, n: usize) -> usize {
        self.sector_start[n + 1] - self.sector_start[n]
    }

    pub fn sector_of(&self, index: usize) -> usize {
        self.occupation(index).iter().map(|&c| c as usize).sum()
    }

    fn choose(&self, a: usize, b: usize) -> u64 {
        if b > a {
            0
        } else {
            self.binom[a * (self.modes + 1) + b]
        }
    }

    /// Number of compositions of `r` into `m >= 1` ordered parts.
    fn compositions(&self, r: usize, m: usize) -> u64 {
        self.choose(r + m - 1, m - 1)
    }

    /// Index of `occ + changes` (per-mode signed deltas), or `None` when the
    /// resulting vector has a negative entry or lies above the cutoff.
    pub fn index_with(&self, occ: &[u16], changes: &[(usize, i32)]) -> Option<usize> {
        let m = self.modes;
        let mut buf = [0i64; MAX_MODES];
        let mut total: i64 = 0;
        for i in 0..m {
            buf[i] = occ[i] as i64;
        }
        for &(mode, d) in changes {
            buf[mode] += d as i64;
        }
        for &v in &buf[..m] {
            if v < 0 {
                return None;
            }
            total += v;
        }
        let n = total as usize;
        if n > self.n_max {
            return None;
        }
        let mut rank: u64 = 0;
        let mut r = n;
        for (i, &part) in buf[..m - 1].iter().enumerate() {
            let parts = m - i;
            let a = part as usize;
            rank += self.compositions(r, parts) - self.compositions(r - a, parts);
            r -= a;
        }
        Some(self.sector_start[n] + rank as usize)
    }

    pub fn index_of(&self, occ: &[u16]) -> Option<usize> {
        if occ.len() != self.modes {
            return None;
        }
        self.index_with(occ, &[])
    }

    /// Cutoff satisfying `N_max ≥ λ + 8·sqrt(λ) + 10` for a coherent mean `λ`.
    pub fn adequate_cutoff(mean: f64) -> usize {
        Self::cutoff_with(mean, 8.0, 10.0)
    }

    /// `ceil(λ + sigmas·√λ + offset)`.
    pub fn cutoff_with(mean: f64, sigmas: f64, offset: f64) -> usize {
        (mean + sigmas * mean.max(0.0).sqrt() + offset).ceil().max(0.0) as usize
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.modes {
            Err(Error::ModeOutOfRange {
                mode,
                modes: self.modes,
            })
        } else {
            Ok(())
        }
    }
}

fn push_compositions(out: &mut Vec<u16>, current: &mut [u16], pos: usize, remaining: usize) {
    if pos + 1 == current.len() {
        current[pos] = remaining as u16;
        out.extend_from_slice(current);
        return;
    }
    for first in 0..=remaining {
        current[pos] = first as u16;
        push_compositions(out, current, pos + 1, remaining - first);
    }
}

/// `Σ_{n=0}^{N_max} C(n+M−1, M−1) = C(N_max + M, M)`.
pub fn basis_size_u128(modes: usize, n_max: usize) -> u128 {
    let mut c: u128 = 1;
    for k in 1..=modes as u128 {
        c = c * (n_max as u128 + k) / k;
    }
    c
}

#[derive(Clone, Debug)]
pub struct FockVector {
    basis: Arc<FockBasis>,
    amps: Vec<C64>,
}

impl FockVector {
    pub fn zeros(basis: &Arc<FockBasis>) -> Self {
        Self {
            basis: basis.clone(),
            amps: vec![C64::new(0.0, 0.0); basis.len()],
        }
    }

    pub fn vacuum(basis: &Arc<FockBasis>) -> Self {
        let mut v = Self::zeros(basis);
        v.amps[0] = C64::new(1.0, 0.0);
        v
    }

    pub fn from_amps(basis: &Arc<FockBasis>, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: amps.len(),
            });
        }
        if amps.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("fock amplitudes".into()));
        }
        Ok(Self {
            basis: basis.clone(),
            amps,
        })
    }

    /// Basis vector `|occ⟩`.
    pub fn basis_state(basis: &Arc<FockBasis>, occ: &[u16]) -> Result<Self> {
        let idx = basis
            .index_of(occ)
            .ok_or_else(|| Error::InvalidInput(format!("occupation {occ:?} not in basis")))?;
        let mut v = Self::zeros(basis);
        v.amps[idx] = C64::new(1.0, 0.0);
        Ok(v)
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
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

    pub fn sector_amps(&self, n: usize) -> &[C64] {
        &self.amps[self.basis.sector_range(n)]
    }

    pub fn norm_sqr(&self) -> f64 {
        par::norm_sqr(&self.amps)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::InvalidInput("cannot normalize the zero vector".into()));
        }
        par::scale(C64::new(1.0 / n, 0.0), &mut self.amps);
        Ok(self)
    }

    pub fn scaled(&self, s: C64) -> Self {
        let mut out = self.clone();
        par::scale(s, &mut out.amps);
        out
    }

    fn ensure_same_basis(&self, other: &FockVector) -> Result<()> {
        if Arc::ptr_eq(&self.basis, &other.basis)
            || (self.basis.modes == other.basis.modes && self.basis.n_max == other.basis.n_max)
        {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.basis.len(),
                got: other.basis.len(),
            })
        }
    }

    pub fn inner(&self, other: &FockVector) -> Result<C64> {
        self.ensure_same_basis(other)?;
        Ok(par::dot(&self.amps, &other.amps))
    }

    /// `self + s·other`
    pub fn add_scaled(&self, s: C64, other: &FockVector) -> Result<FockVector> {
        self.ensure_same_basis(other)?;
        let mut out = self.clone();
        par::axpy(s, &other.amps, &mut out.amps);
        Ok(out)
    }

    pub fn distance(&self, other: &FockVector) -> Result<f64> {
        Ok(self.add_scaled(C64::new(-1.0, 0.0), other)?.norm())
    }

    /// Unnormalized sector populations `‖P_n Ψ‖²`.
    pub fn sector_weights(&self) -> Vec<f64> {
        (0..=self.basis.n_max)
            .map(|n| self.sector_amps(n).iter().map(|c| c.norm_sqr()).sum())
            .collect()
    }

    pub fn top_sector_weight(&self) -> f64 {
        self.sector_amps(self.basis.n_max).iter().map(|c| c.norm_sqr()).sum()
    }

    /// The single sector holding all of the weight, if there is one.
    pub fn pure_sector(&self, tol: f64) -> Option<usize> {
        let w = self.sector_weights();
        let total: f64 = w.iter().sum();
        let (n, &max) = w.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
        (total - max <= tol * total.max(1e-300)).then_some(n)
    }

    /// `⟨Ψ, 𝒩 Ψ⟩` (unnormalized).
    pub fn number_moment(&self) -> f64 {
        self.sector_weights()
            .iter()
            .enumerate()
            .map(|(n, w)| n as f64 * w)
            .sum()
    }

    /// `‖𝒩^{1/2} Ψ‖` and `‖(𝒩+1)^{1/2} Ψ‖`.
    pub fn number_root_norms(&self) -> (f64, f64) {
        let w = self.sector_weights();
        let n: f64 = w.iter().enumerate().map(|(k, x)| k as f64 * x).sum();
        let total: f64 = w.iter().sum();
        (n.sqrt(), (n + total).sqrt())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ladder {
    Create,
    Annihilate,
}

/// `b_i Ψ` or `b_i† Ψ` with standard `sqrt(n)` matrix elements.
pub fn apply_ladder(which: Ladder, mode: usize, psi: &FockVector) -> Result<FockVector> {
    let basis = psi.basis.clone();
    basis.check_mode(mode)?;
    let mut out = vec![C64::new(0.0, 0.0); basis.len()];
    let src = &psi.amps;
    par::fill_indexed(&mut out, |j| {
        let m = basis.occupation(j);
        match which {
            Ladder::Annihilate => basis
                .index_with(m, &[(mode, 1)])
                .map_or(C64::new(0.0, 0.0), |s| src[s] * ((m[mode] as f64 + 1.0).sqrt())),
            Ladder::Create => {
                if m[mode] == 0 {
                    C64::new(0.0, 0.0)
                } else {
                    let s = basis.index_with(m, &[(mode, -1)]).expect("lower sector present");
                    src[s] * (m[mode] as f64).sqrt()
                }
            }
        }
    });
    Ok(FockVector { basis, amps: out })
}

fn check_orbital(basis: &FockBasis, f: &Orbital) -> Result<()> {
    if f.len() != basis.modes() {
        return Err(Error::DimensionMismatch {
            expected: basis.modes(),
            got: f.len(),
        });
    }
    Ok(())
}

/// `a(f) Ψ = sqrt(h)·Σ conj(f_i) b_i Ψ`.
pub fn annihilate_smeared(f: &Orbital, psi: &FockVector) -> Result<FockVector> {
    let basis = psi.basis.clone();
    check_orbital(&basis, f)?;
    let coeff: Vec<C64> = f.site_coefficients().iter().map(|c| c.conj()).collect();
    let src = &psi.amps;
    let mut out = vec![C64::new(0.0, 0.0); basis.len()];
    par::fill_indexed(&mut out, |j| {
        let m = basis.occupation(j);
        let mut acc = C64::new(0.0, 0.0);
        for (i, c) in coeff.iter().enumerate() {
            if *c == C64::new(0.0, 0.0) {
                continue;
            }
            if let Some(s) = basis.index_with(m, &[(i, 1)]) {
                acc += c * src[s] * (m[i] as f64 + 1.0).sqrt();
            }
        }
        acc
    });
    Ok(FockVector { basis, amps: out })
}

/// `a*(f) Ψ = sqrt(h)·Σ f_i b_i† Ψ`.
pub fn create_smeared(f: &Orbital, psi: &FockVector) -> Result<FockVector> {
    let basis = psi.basis.clone();
    check_orbital(&basis, f)?;
    let coeff = f.site_coefficients();
    let src = &psi.amps;
    let mut out = vec![C64::new(0.0, 0.0); basis.len()];
    par::fill_indexed(&mut out, |j| {
        let m = basis.occupation(j);
        let mut acc = C64::new(0.0, 0.0);
        for (i, c) in coeff.iter().enumerate() {
            if m[i] == 0 || *c == C64::new(0.0, 0.0) {
                continue;
            }
            let s = basis.index_with(m, &[(i, -1)]).expect("lower sector present");
            acc += c * src[s] * (m[i] as f64).sqrt();
        }
        acc
    });
    Ok(FockVector { basis, amps: out })
}

/// `𝒩 Ψ`
pub fn apply_number(psi: &FockVector) -> FockVector {
    let basis = psi.basis.clone();
    let mut out = psi.amps.clone();
    for n in 0..=basis.n_max {
        for c in &mut out[basis.sector_range(n)] {
            *c *= n as f64;
        }
    }
    FockVector { basis, amps: out }
}

/// Normal-ordered product `coef · b†_{c1} b†_{c2}… b_{a1} b_{a2}…`.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub create: Vec<usize>,
    pub annihilate: Vec<usize>,
    pub coef: C64,
}

impl Monomial {
    pub fn new(create: &[usize], annihilate: &[usize], coef: C64) -> Self {
        Self {
            create: create.to_vec(),
            annihilate: annihilate.to_vec(),
            coef,
        }
    }
}

/// Assembles a sum of normal-ordered monomials as a sparse matrix on `basis`.
/// Matrix elements leaving the truncated space are dropped.
pub fn assemble_monomials(basis: &Arc<FockBasis>, terms: &[Monomial]) -> Result<Csr<C64>> {
    for t in terms {
        for &i in t.create.iter().chain(&t.annihilate) {
            basis.check_mode(i)?;
        }
    }
    let modes = basis.modes();
    let b = basis.clone();
    Ok(Csr::from_row_fn(basis.len(), basis.len(), move |row, buf| {
        let m = b.occupation(row);
        let mut changes: Vec<(usize, i32)> = Vec::with_capacity(4);
        let mut work = [0u16; MAX_MODES];
        for t in terms {
            if t.coef == C64::new(0.0, 0.0) {
                continue;
            }
            changes.clear();
            for &c in &t.create {
                changes.push((c, -1));
            }
            for &a in &t.annihilate {
                changes.push((a, 1));
            }
            let Some(col) = b.index_with(m, &changes) else {
                continue;
            };
            work[..modes].copy_from_slice(b.occupation(col));
            let mut amp = 1.0;
            for &a in t.annihilate.iter().rev() {
                amp *= (work[a] as f64).sqrt();
                work[a] = work[a].saturating_sub(1);
            }
            for &c in t.create.iter().rev() {
                work[c] += 1;
                amp *= (work[c] as f64).sqrt();
            }
            if amp != 0.0 {
                buf.push((col as u32, t.coef * amp));
            }
        }
    }))
}

/// Hermitian quadratic form
/// `Σ_xy hop_xy b_x† b_y + ½ Σ_xy (pair_xy b_x† b_y† + conj(pair_xy) b_x b_y)`
/// in the orthonormal site basis; `pair` must be symmetric.
pub fn quadratic_monomials(hop: &DMatrix<C64>, pair: &DMatrix<C64>) -> Vec<Monomial> {
    let m = hop.nrows();
    let mut terms = Vec::new();
    for x in 0..m {
        for y in 0..m {
            let h = hop[(x, y)];
            if h != C64::new(0.0, 0.0) {
                terms.push(Monomial::new(&[x], &[y], h));
            }
            let p = pair[(x, y)];
            if p != C64::new(0.0, 0.0) {
                terms.push(Monomial::new(&[x, y], &[], 0.5 * p));
                terms.push(Monomial::new(&[], &[x, y], 0.5 * p.conj()));
            }
        }
    }
    terms
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FockOptions {
    pub krylov: KrylovOptions,
    /// Largest tolerated weight in the top sector after an exponential.
    pub truncation_tol: f64,
    /// Largest tolerated Poisson tail above the cutoff for coherent states.
    pub tail_tol: f64,
}

impl Default for FockOptions {
    fn default() -> Self {
        Self {
            krylov: KrylovOptions::default(),
            truncation_tol: 1e-8,
            tail_tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NumberStatistics {
    pub expectation: f64,
    pub variance: f64,
    /// `P(n)` for `n = 0..=N_max`.
    pub distribution: Vec<f64>,
}

pub fn number_statistics(psi: &FockVector) -> Result<NumberStatistics> {
    let p = psi.sector_weights();
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized {
            deviation: (total - 1.0).abs(),
        });
    }
    let mean: f64 = p.iter().enumerate().map(|(n, w)| n as f64 * w).sum();
    let second: f64 = p.iter().enumerate().map(|(n, w)| (n * n) as f64 * w).sum();
    Ok(NumberStatistics {
        expectation: mean,
        variance: second - mean * mean,
        distribution: p,
    })
}

/// `P(X > n_max)` for `X ~ Poisson(mean)`, summed directly from the tail.
pub fn poisson_tail(mean: f64, n_max: usize) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut k = n_max + 1;
    loop {
        let term = (k as f64 * mean.ln() - mean - ln_gamma(k as f64 + 1.0)).exp();
        total += term;
        if k as f64 > mean && term < 1e-18 * total.max(1e-300) || term == 0.0 && k as f64 > mean {
            break;
        }
        k += 1;
        if k > n_max + 100_000 {
            break;
        }
    }
    total
}

pub fn poisson_pmf(mean: f64, n: usize) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (n as f64 * mean.ln() - mean - ln_gamma(n as f64 + 1.0)).exp()
}

#[derive(Clone, Debug)]
pub struct CoherentState {
    pub state: FockVector,
    /// `1 − ‖state‖²`, the weight lost above the cutoff.
    pub norm_defect: f64,
}

/// `W(φ)Ω = e^{−‖φ‖²/2} Σ_n φ^{⊗n}/sqrt(n!)`, written in the occupation basis:
/// amplitude `e^{−‖φ‖²/2} Π_i α_i^{n_i}/sqrt(n_i!)` with `α_i = sqrt(h)·φ_i`.
pub fn coherent_state(phi: &Orbital, basis: &Arc<FockBasis>, tail_tol: f64) -> Result<CoherentState> {
    check_orbital(basis, phi)?;
    let mean = phi.norm_sqr();
    let tail = poisson_tail(mean, basis.n_max());
    if tail > tail_tol {
        return Err(Error::TruncationInadequate {
            what: format!("coherent state with mean {mean} above cutoff {}", basis.n_max()),
            defect: tail,
            tolerance: tail_tol,
        });
    }
    let alpha = phi.site_coefficients();
    let log_abs: Vec<f64> = alpha.iter().map(|a| a.norm().ln()).collect();
    let arg: Vec<f64> = alpha.iter().map(|a| a.arg()).collect();
    let ln_fact: Vec<f64> = (0..=basis.n_max()).map(|k| ln_gamma(k as f64 + 1.0)).collect();
    let mut amps = vec![C64::new(0.0, 0.0); basis.len()];
    let b = basis.clone();
    par::fill_indexed(&mut amps, |j| {
        let occ = b.occupation(j);
        let mut ln_mag = -0.5 * mean;
        let mut phase = 0.0;
        for (i, &n) in occ.iter().enumerate() {
            if n == 0 {
                continue;
            }
            if alpha[i] == C64::new(0.0, 0.0) {
                return C64::new(0.0, 0.0);
            }
            ln_mag += n as f64 * log_abs[i] - 0.5 * ln_fact[n as usize];
            phase += n as f64 * arg[i];
        }
        C64::from_polar(ln_mag.exp(), phase)
    });
    let state = FockVector::from_amps(basis, amps)?;
    let norm_defect = 1.0 - state.norm_sqr();
    Ok(CoherentState { state, norm_defect })
}

/// Applies `exp(G)` for an anti-Hermitian quadratic or linear generator given
/// as monomials of `iG` (which is Hermitian).
fn apply_unitary(
    hermitian_terms: &[Monomial],
    psi: &FockVector,
    opts: &FockOptions,
    what: &str,
) -> Result<(FockVector, KrylovStats)> {
    let h = assemble_monomials(&psi.basis, hermitian_terms)?;
    // exp(G) = exp(-i·(iG))
    let (amps, stats) = expm_apply(&h, &psi.amps, 1.0, &opts.krylov)?;
    let out = FockVector {
        basis: psi.basis.clone(),
        amps,
    };
    let scale = out.norm_sqr().max(1e-300);
    let top = out.top_sector_weight() / scale;
    if top > opts.truncation_tol {
        return Err(Error::TruncationInadequate {
            what: format!("{what}: weight in the top sector {}", psi.basis.n_max()),
            defect: top,
            tolerance: opts.truncation_tol,
        });
    }
    let drift = (out.norm() - psi.norm()).abs();
    if drift > 1e-8 * psi.norm().max(1.0) {
        return Err(Error::TruncationInadequate {
            what: format!("{what}: norm drift"),
            defect: drift,
            tolerance: 1e-8,
        });
    }
    Ok((out, stats))
}

/// Monomials of `i(a*(φ) − a(φ))`.
fn weyl_generator_terms(phi: &Orbital) -> Vec<Monomial> {
    let i = C64::new(0.0, 1.0);
    phi.site_coefficients()
        .iter()
        .enumerate()
        .filter(|(_, a)| **a != C64::new(0.0, 0.0))
        .flat_map(|(x, a)| {
            [
                Monomial::new(&[x], &[], i * a),
                Monomial::new(&[], &[x], -i * a.conj()),
            ]
        })
        .collect()
}

/// `W(φ)Ψ = exp(a*(φ) − a(φ))Ψ` on the truncated basis.
pub fn weyl_apply(phi: &Orbital, psi: &FockVector, opts: &FockOptions) -> Result<FockVector> {
    check_orbital(&psi.basis, phi)?;
    if phi.norm_sqr() == 0.0 {
        return Ok(psi.clone());
    }
    Ok(apply_unitary(&weyl_generator_terms(phi), psi, opts, "weyl operator")?.0)
}

/// Symmetric pair kernel `k(x, y)` defining the squeeze operator
/// `T = exp(Σ_xy h²(k_xy a_x† a_y† − conj(k_xy) a_x a_y))`.
///
/// In site modes the exponent is `Σ_xy K_xy b_x† b_y† − h.c.` with the
/// operator matrix `K = h·k`. Conjugation then acts as
/// `T* a(f) T = a(cosh_κ f) + a*(sinh_κ f̄)` with `κ = 2K`; for one mode with
/// real `k = r` the squeezed vacuum has `⟨𝒩⟩ = sinh²(2hr)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SqueezeKernel {
    grid: Grid1D,
    kernel: DMatrix<C64>,
}

impl SqueezeKernel {
    pub fn new(grid: Grid1D, kernel: DMatrix<C64>) -> Result<Self> {
        let m = grid.num_sites();
        if kernel.nrows() != m || kernel.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: kernel.nrows(),
            });
        }
        let scale = kernel.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
        for x in 0..m {
            for y in 0..x {
                if (kernel[(x, y)] - kernel[(y, x)]).norm() > 1e-12 * scale {
                    return Err(Error::InvalidInput(format!(
                        "squeeze kernel is not symmetric at ({x}, {y})"
                    )));
                }
            }
        }
        if kernel.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("squeeze kernel".into()));
        }
        Ok(Self { grid, kernel })
    }

    pub fn zero(grid: Grid1D) -> Self {
        let m = grid.num_sites();
        Self {
            grid,
            kernel: DMatrix::zeros(m, m),
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn kernel(&self) -> &DMatrix<C64> {
        &self.kernel
    }

    /// Matrix of the integral operator `(k f)(x) = h·Σ_y k(x,y) f(y)`.
    pub fn operator_matrix(&self) -> DMatrix<C64> {
        &self.kernel * C64::new(self.grid.spacing(), 0.0)
    }

    pub fn hilbert_schmidt_norm(&self) -> f64 {
        self.operator_matrix().norm()
    }
}

fn squeeze_terms(operator: &DMatrix<C64>) -> Vec<Monomial> {
    // iG = Σ iK b†b† − i conj(K) b b  = ½Σ(P b†b† + conj(P) bb) with P = 2iK
    let m = operator.nrows();
    let pair = operator * C64::new(0.0, 2.0);
    quadratic_monomials(&DMatrix::zeros(m, m), &pair)
}

pub fn squeeze_apply(k: &SqueezeKernel, psi: &FockVector, opts: &FockOptions) -> Result<FockVector> {
    if k.grid.num_sites() != psi.basis.modes() {
        return Err(Error::DimensionMismatch {
            expected: psi.basis.modes(),
            got: k.grid.num_sites(),
        });
    }
    squeeze_apply_matrix(&k.operator_matrix(), psi, opts)
}

/// [`squeeze_apply`] for an operator matrix `K` in the orthonormal site basis.
pub fn squeeze_apply_matrix(operator: &DMatrix<C64>, psi: &FockVector, opts: &FockOptions) -> Result<FockVector> {
    if operator.iter().all(|c| *c == C64::new(0.0, 0.0)) {
        return Ok(psi.clone());
    }
    Ok(apply_unitary(&squeeze_terms(operator), psi, opts, "squeeze operator")?.0)
}

/// `P_n Ψ`, not renormalized.
pub fn sector_project(n: usize, psi: &FockVector) -> Result<FockVector> {
    let basis = psi.basis.clone();
    if n > basis.n_max() {
        return Err(Error::SectorOutOfRange {
            sector: n,
            n_max: basis.n_max(),
        });
    }
    let r = basis.sector_range(n);
    let mut amps = vec![C64::new(0.0, 0.0); basis.len()];
    amps[r.clone()].copy_from_slice(&psi.amps[r]);
    Ok(FockVector { basis, amps })
}
