//! Exact many-body dynamics on the truncated Fock space.
//!
//! The Hamiltonian conserves particle number, so it is stored and propagated
//! one sector at a time; sectors are independent jobs for the thread pool.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{coherent_state, weyl_apply, FockBasis, FockOptions, FockVector};
use crate::krylov::{expm_apply, KrylovOptions, KrylovStats};
use crate::lattice::{LatticeModel, Orbital};
use crate::meanfield::Trajectory;
use crate::par;
use crate::sparse::{Csr, LinearOperator};

/// Second-quantized lattice Hamiltonian
/// `Σ (−Δ_h + V_ext)_xy b_x†b_y + (λ/2)·Σ v_{x−y} b_x†b_y†b_y b_x`
/// in orthonormal site modes, with coupling `λ` (usually `1/N`).
#[derive(Debug)]
pub struct ManyBodyHamiltonian {
    basis: Arc<FockBasis>,
    model: LatticeModel,
    coupling: f64,
    blocks: Vec<Csr<f64>>,
}

/// Assembles the mean-field Hamiltonian with coupling `1/n_particles`.
pub fn assemble_hamiltonian(model: &LatticeModel, n_particles: usize, basis: &Arc<FockBasis>) -> Result<ManyBodyHamiltonian> {
    if n_particles == 0 {
        return Err(Error::InvalidInput("particle number must be positive".into()));
    }
    assemble_with_coupling(model, 1.0 / n_particles as f64, basis)
}

pub fn assemble_with_coupling(model: &LatticeModel, coupling: f64, basis: &Arc<FockBasis>) -> Result<ManyBodyHamiltonian> {
    let m = model.grid.num_sites();
    if basis.modes() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: basis.modes(),
        });
    }
    if !coupling.is_finite() {
        return Err(Error::InvalidInput(format!("coupling {coupling} is not finite")));
    }
    let one_body = model.one_body_matrix();
    let mut hops: Vec<(usize, usize, f64)> = Vec::new();
    for x in 0..m {
        for y in 0..m {
            if x != y && one_body[(x, y)] != 0.0 {
                hops.push((x, y, one_body[(x, y)]));
            }
        }
    }
    let diag: Vec<f64> = (0..m).map(|x| one_body[(x, x)]).collect();
    let v: Vec<Vec<f64>> = (0..m)
        .map(|x| (0..m).map(|y| model.pair.between(x, y)).collect())
        .collect();
    let v0 = model.pair.at(0);

    let sectors: Vec<usize> = (0..=basis.n_max()).collect();
    let blocks = par::map_jobs(sectors, |n| {
        let range = basis.sector_range(n);
        let start = range.start;
        Csr::from_row_fn(range.len(), range.len(), |local, buf| {
            let occ = basis.occupation(start + local);
            let mut d = 0.0;
            let mut inter = 0.0;
            for x in 0..m {
                let mx = occ[x] as f64;
                if mx == 0.0 {
                    continue;
                }
                d += diag[x] * mx;
                for y in 0..m {
                    inter += v[x][y] * mx * occ[y] as f64;
                }
                inter -= v0 * mx;
            }
            d += 0.5 * coupling * inter;
            buf.push((local as u32, d));
            // b_x† b_y: source has one more particle in y, one fewer in x
            for &(x, y, c) in &hops {
                if occ[x] == 0 {
                    continue;
                }
                let src = basis
                    .index_with(occ, &[(x, -1), (y, 1)])
                    .expect("hop stays inside the sector");
                let amp = c * ((occ[x] as f64) * (occ[y] as f64 + 1.0)).sqrt();
                buf.push(((src - start) as u32, amp));
            }
        })
    });
    Ok(ManyBodyHamiltonian {
        basis: basis.clone(),
        model: model.clone(),
        coupling,
        blocks,
    })
}

impl ManyBodyHamiltonian {
    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn model(&self) -> &LatticeModel {
        &self.model
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn sector_block(&self, n: usize) -> &Csr<f64> {
        &self.blocks[n]
    }

    pub fn nnz(&self) -> usize {
        self.blocks.iter().map(|b| b.nnz()).sum()
    }

    /// Dense copy of one sector block, for small oracles.
    pub fn sector_dense(&self, n: usize) -> DMatrix<C64> {
        let b = &self.blocks[n];
        let mut d = DMatrix::zeros(b.nrows(), b.ncols());
        for i in 0..b.nrows() {
            for (j, v) in b.row(i) {
                d[(i, j)] = C64::new(*v, 0.0);
            }
        }
        d
    }

    /// Largest asymmetry `|H_ij − H_ji|` over all blocks.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for b in &self.blocks {
            for i in 0..b.nrows() {
                for (j, v) in b.row(i) {
                    let back = b.row(j).find(|(k, _)| *k == i).map_or(0.0, |(_, w)| *w);
                    worst = worst.max((v - back).abs());
                }
            }
        }
        worst
    }

    /// `⟨Ψ, HΨ⟩`
    pub fn expectation(&self, psi: &FockVector) -> Result<f64> {
        self.check_vector(psi)?;
        let mut y = vec![C64::new(0.0, 0.0); psi.amps().len()];
        self.apply(psi.amps(), &mut y);
        Ok(par::dot(psi.amps(), &y).re)
    }

    fn check_vector(&self, psi: &FockVector) -> Result<()> {
        let b = psi.basis();
        if b.modes() != self.basis.modes() || b.n_max() != self.basis.n_max() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.len(),
                got: b.len(),
            });
        }
        Ok(())
    }
}

impl LinearOperator for ManyBodyHamiltonian {
    fn dim(&self) -> usize {
        self.basis.len()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        for (n, b) in self.blocks.iter().enumerate() {
            let r = self.basis.sector_range(n);
            b.matvec(&x[r.clone()], &mut y[r]);
        }
    }
}

/// `e^{−iHt}Ψ`, sector by sector, in output steps of `dt` (the Krylov
/// propagator chooses its own sub-steps below `dt`).
pub fn propagate(
    h: &ManyBodyHamiltonian,
    psi: &FockVector,
    t: f64,
    dt: f64,
    opts: &KrylovOptions,
) -> Result<(FockVector, KrylovStats)> {
    h.check_vector(psi)?;
    if !(dt > 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("need dt > 0 and finite t, got dt = {dt}, t = {t}")));
    }
    let steps = (t.abs() / dt - 1e-9).ceil().max(0.0) as usize;
    if steps == 0 {
        return Ok((psi.clone(), KrylovStats::default()));
    }
    let tau = t / steps as f64;
    let basis = h.basis.clone();
    let sectors: Vec<usize> = (0..=basis.n_max())
        .filter(|&n| psi.sector_amps(n).iter().any(|c| *c != C64::new(0.0, 0.0)))
        .collect();
    let results = par::map_jobs(sectors, |n| -> Result<(usize, Vec<C64>, KrylovStats)> {
        let block = &h.blocks[n];
        let mut v = psi.sector_amps(n).to_vec();
        let mut stats = KrylovStats::default();
        for _ in 0..steps {
            let (w, s) = expm_apply(block, &v, tau, opts)?;
            v = w;
            stats.merge(&s);
        }
        Ok((n, v, stats))
    });
    let mut out = vec![C64::new(0.0, 0.0); basis.len()];
    let mut stats = KrylovStats::default();
    for r in results {
        let (n, v, s) = r?;
        out[basis.sector_range(n)].copy_from_slice(&v);
        stats.merge(&s);
    }
    let out = FockVector::from_amps(&basis, out)?;
    let drift = (out.norm() - psi.norm()).abs();
    if drift > 1e-9 * psi.norm().max(1.0) {
        return Err(Error::Consistency(format!("propagation changed the norm by {drift:e}")));
    }
    Ok((out, stats))
}

/// `e^{−iHt}Ψ` by dense diagonalization of every occupied sector.
pub fn propagate_dense(h: &ManyBodyHamiltonian, psi: &FockVector, t: f64) -> Result<FockVector> {
    h.check_vector(psi)?;
    let basis = h.basis.clone();
    let mut out = vec![C64::new(0.0, 0.0); basis.len()];
    for n in 0..=basis.n_max() {
        let amps = psi.sector_amps(n);
        if amps.iter().all(|c| *c == C64::new(0.0, 0.0)) {
            continue;
        }
        let eig = SymmetricEigen::new(h.sector_dense(n));
        let u = &eig.eigenvectors;
        let coeffs = u.adjoint() * nalgebra::DVector::from_column_slice(amps);
        let phased = nalgebra::DVector::from_iterator(
            coeffs.len(),
            coeffs
                .iter()
                .zip(eig.eigenvalues.iter())
                .map(|(c, &e)| c * C64::from_polar(1.0, -t * e)),
        );
        let v = u * phased;
        out[basis.sector_range(n)].copy_from_slice(v.as_slice());
    }
    FockVector::from_amps(&basis, out)
}

/// Largest `k` supported by [`reduced_density`].
pub const MAX_DENSITY_ORDER: usize = 2;

/// Trace-one `k`-particle density matrix in orthonormal site modes; rows and
/// columns are indexed by `x_1·M^{k−1} + … + x_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedDensity {
    order: usize,
    modes: usize,
    matrix: DMatrix<C64>,
}

impl ReducedDensity {
    pub fn from_matrix(order: usize, modes: usize, matrix: DMatrix<C64>) -> Result<Self> {
        let dim = modes.pow(order as u32);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: matrix.nrows(),
            });
        }
        Ok(Self { order, modes, matrix })
    }

    /// `|φ⟩⟨φ|^{⊗k}` for a normalized orbital, in site modes `h·φ_x conj(φ_y)`.
    pub fn projector(phi: &Orbital, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidInput("density order must be at least 1".into()));
        }
        let c = phi.site_coefficients();
        let mut v = nalgebra::DVector::from_column_slice(&c);
        for _ in 1..order {
            v = v.kronecker(&nalgebra::DVector::from_column_slice(&c));
        }
        Self::from_matrix(order, c.len(), &v * v.adjoint())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(herm).eigenvalues.iter().copied().collect()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).norm()
    }

    /// Trace over the last particle slot.
    pub fn partial_trace(&self) -> Result<ReducedDensity> {
        if self.order < 2 {
            return Err(Error::InvalidInput("partial trace needs order at least 2".into()));
        }
        let m = self.modes;
        let outer = m.pow(self.order as u32 - 1);
        let mut out = DMatrix::zeros(outer, outer);
        for a in 0..outer {
            for b in 0..outer {
                out[(a, b)] = (0..m).map(|z| self.matrix[(a * m + z, b * m + z)]).sum();
            }
        }
        Self::from_matrix(self.order - 1, m, out)
    }

    /// `Tr(O γ)` for an operator on the `k`-particle space.
    pub fn expectation(&self, op: &DMatrix<C64>) -> Result<C64> {
        if op.shape() != self.matrix.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.matrix.nrows(),
                got: op.nrows(),
            });
        }
        Ok((op * &self.matrix).trace())
    }
}

/// Sector-`(n − r)` vector `b_{x_r}…b_{x_1} ψ_n` from the sector-`n` slice.
fn annihilate_in_sector(basis: &FockBasis, amps: &[C64], n: usize, modes: &[usize]) -> Vec<C64> {
    let r = modes.len();
    let target = basis.sector_range(n - r);
    let source_start = basis.sector_range(n).start;
    let m = basis.modes();
    let mut out = vec![C64::new(0.0, 0.0); target.len()];
    let mut changes: Vec<(usize, i32)> = Vec::with_capacity(r);
    for &x in modes {
        match changes.iter_mut().find(|c| c.0 == x) {
            Some(c) => c.1 += 1,
            None => changes.push((x, 1)),
        }
    }
    par::fill_indexed(&mut out, |local| {
        let occ = basis.occupation(target.start + local);
        let src = basis.index_with(occ, &changes).expect("source lies in sector n");
        let mut work = [0u16; crate::fock::MAX_MODES];
        work[..m].copy_from_slice(basis.occupation(src));
        let mut amp = 1.0;
        for &x in modes {
            amp *= (work[x] as f64).sqrt();
            work[x] -= 1;
        }
        amps[src - source_start] * amp
    });
    out
}

/// `Γ^(k)` with entries `⟨b†_{y_1}…b†_{y_k} b_{x_k}…b_{x_1}⟩ / ⟨𝒩(𝒩−1)…(𝒩−k+1)⟩`.
pub fn reduced_density(psi: &FockVector, order: usize) -> Result<ReducedDensity> {
    if order == 0 || order > MAX_DENSITY_ORDER {
        return Err(Error::InvalidInput(format!(
            "density order {order} outside 1..={MAX_DENSITY_ORDER}"
        )));
    }
    let basis = psi.basis();
    let m = basis.modes();
    let dim = m.pow(order as u32);
    let tuples: Vec<Vec<usize>> = (0..dim)
        .map(|mut idx| {
            let mut t = vec![0; order];
            for slot in (0..order).rev() {
                t[slot] = idx % m;
                idx /= m;
            }
            t
        })
        .collect();
    let weights = psi.sector_weights();
    let falling = |n: usize| (0..order).map(|j| n as f64 - j as f64).product::<f64>();
    let norm: f64 = weights.iter().enumerate().map(|(n, w)| falling(n) * w).sum();
    if norm <= 0.0 {
        return Err(Error::VacuumInput);
    }

    let mut g = DMatrix::<C64>::zeros(dim, dim);
    for (n, &w) in weights.iter().enumerate().skip(order) {
        if w == 0.0 {
            continue;
        }
        let amps = psi.sector_amps(n);
        let vecs: Vec<Vec<C64>> = tuples
            .iter()
            .map(|t| annihilate_in_sector(basis, amps, n, t))
            .collect();
        for a in 0..dim {
            for b in 0..=a {
                // Γ[a, b] = ⟨v_b, v_a⟩
                let val = par::dot(&vecs[b], &vecs[a]);
                g[(a, b)] += val;
                if a != b {
                    g[(b, a)] += val.conj();
                }
            }
        }
    }
    g /= C64::new(norm, 0.0);
    ReducedDensity::from_matrix(order, m, g)
}

/// Sum of absolute eigenvalues of `A − B`.
pub fn trace_norm_distance(a: &ReducedDensity, b: &ReducedDensity) -> Result<f64> {
    if a.matrix.shape() != b.matrix.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.matrix.nrows(),
            got: b.matrix.nrows(),
        });
    }
    let d = &a.matrix - &b.matrix;
    let herm = (&d + d.adjoint()) * C64::new(0.5, 0.0);
    Ok(SymmetricEigen::new(herm).eigenvalues.iter().map(|e| e.abs()).sum())
}

fn sector_pure_n(psi: &FockVector) -> Result<usize> {
    psi.pure_sector(1e-12).ok_or(Error::NotSectorPure)
}

/// Residual matrix of the first hierarchy equation at the middle of three
/// equally spaced sector-pure states:
/// `i∂_tγ1 − [K, γ1] − ((N−1)/N)·Σ_z (v_{x−z} − v_{x'−z}) γ2(x,z; x',z)`,
/// with `K = −Δ_h + V_ext` and the time derivative by centered difference.
pub fn bbgky_residual_matrix(
    model: &LatticeModel,
    states: [&FockVector; 3],
    dt: f64,
) -> Result<DMatrix<C64>> {
    let n = sector_pure_n(states[1])?;
    for s in [states[0], states[2]] {
        if sector_pure_n(s)? != n {
            return Err(Error::NotSectorPure);
        }
    }
    let m = model.grid.num_sites();
    let g_prev = reduced_density(states[0], 1)?;
    let g_next = reduced_density(states[2], 1)?;
    let g1 = reduced_density(states[1], 1)?;
    let g2 = reduced_density(states[1], 2)?;
    let k = model.one_body_matrix().map(|x| C64::new(x, 0.0));
    let i = C64::new(0.0, 1.0);
    let dgamma = (g_next.matrix() - g_prev.matrix()) / C64::new(2.0 * dt, 0.0);
    let mut r = dgamma * i - (&k * g1.matrix() - g1.matrix() * &k);
    let factor = if n > 0 { (n as f64 - 1.0) / n as f64 } else { 0.0 };
    for x in 0..m {
        for xp in 0..m {
            let mut c = C64::new(0.0, 0.0);
            for z in 0..m {
                let dv = model.pair.between(x, z) - model.pair.between(xp, z);
                c += dv * g2.matrix()[(x * m + z, xp * m + z)];
            }
            r[(x, xp)] -= factor * c;
        }
    }
    Ok(r)
}

/// Frobenius norm of [`bbgky_residual_matrix`].
pub fn bbgky_residual(model: &LatticeModel, states: [&FockVector; 3], dt: f64) -> Result<f64> {
    Ok(bbgky_residual_matrix(model, states, dt)?.norm())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BbgkyReport {
    pub time: f64,
    pub dt: f64,
    pub residual: f64,
    pub residual_half_step: f64,
    /// Richardson estimate `(4/3)·‖r(dt) − r(dt/2)‖` of the `O(dt²)` part.
    pub reference_scale: f64,
    /// `‖r(dt)‖ / ‖r(dt/2)‖`, close to 4 for a second-order difference.
    pub halving_ratio: f64,
}

/// Runs the residual at time `t` with steps `dt` and `dt/2`, using dense
/// per-sector diagonalization for the trajectory.
pub fn bbgky_report(h: &ManyBodyHamiltonian, psi0: &FockVector, t: f64, dt: f64) -> Result<BbgkyReport> {
    let model = h.model();
    let run = |step: f64| -> Result<DMatrix<C64>> {
        let prev = propagate_dense(h, psi0, t - step)?;
        let mid = propagate_dense(h, psi0, t)?;
        let next = propagate_dense(h, psi0, t + step)?;
        bbgky_residual_matrix(model, [&prev, &mid, &next], step)
    };
    let r1 = run(dt)?;
    let r2 = run(0.5 * dt)?;
    let residual = r1.norm();
    let residual_half_step = r2.norm();
    Ok(BbgkyReport {
        time: t,
        dt,
        residual,
        residual_half_step,
        reference_scale: 4.0 / 3.0 * (&r1 - &r2).norm(),
        halving_ratio: residual / residual_half_step,
    })
}

/// How the fluctuation number is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FluctuationMethod {
    /// `⟨𝒩⟩ − 2√N·Re⟨a(φ_t)⟩ + N‖φ_t‖²` on the evolved state; exact for the
    /// truncated state and cheap.
    Moments,
    /// Moments plus the explicit `W*(√N φ_t)` shift as a cross-check; the
    /// shift needs the shifted tail to fit the cutoff.
    WithWeyl,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FluctuationSample {
    pub t: f64,
    /// `⟨Ω, 𝒰*(t;0) 𝒩 𝒰(t;0) Ω⟩` from moments of the evolved state.
    pub number: f64,
    /// The same quantity from the Weyl-shifted state, when requested.
    pub number_weyl: Option<f64>,
    /// Top-sector weight of the evolved state (and of the shifted one).
    pub truncation_defect: f64,
}

/// Fluctuation-number growth for coherent initial data `W(√N φ)Ω`, evaluated
/// at the requested times against the Hartree trajectory `hartree`.
pub fn fluctuation_number_growth(
    h: &ManyBodyHamiltonian,
    hartree: &Trajectory,
    n_particles: usize,
    times: &[f64],
    dt: f64,
    method: FluctuationMethod,
    opts: &FockOptions,
) -> Result<Vec<FluctuationSample>> {
    let basis = h.basis().clone();
    let sqrt_n = (n_particles as f64).sqrt();
    let phi0 = &hartree.states[0];
    let cs = coherent_state(&phi0.scaled(C64::new(sqrt_n, 0.0)), &basis, opts.tail_tol)?;
    let mut psi = cs.state;
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t < now {
            return Err(Error::InvalidInput("fluctuation times must be nondecreasing".into()));
        }
        let (next, _) = propagate(h, &psi, t - now, dt, &opts.krylov)?;
        psi = next;
        now = t;
        let phi_t = hartree_at(hartree, t)?;
        let number = fluctuation_number(&psi, &phi_t, n_particles)?;
        let norm = psi.norm_sqr();
        let mut defect = psi.top_sector_weight() / norm;
        let number_weyl = match method {
            FluctuationMethod::Moments => None,
            FluctuationMethod::WithWeyl => {
                let shifted = weyl_apply(&phi_t.scaled(C64::new(-sqrt_n, 0.0)), &psi, opts)?;
                defect = defect.max(shifted.top_sector_weight() / shifted.norm_sqr());
                Some(shifted.number_moment() / shifted.norm_sqr())
            }
        };
        out.push(FluctuationSample {
            t,
            number,
            number_weyl,
            truncation_defect: defect,
        });
    }
    Ok(out)
}

/// `⟨W*(√N φ_t) 𝒩 W(√N φ_t)⟩` in the state `psi`, from its moments:
/// `⟨𝒩⟩ − 2√N·Re⟨a(φ_t)⟩ + N‖φ_t‖²`.
pub fn fluctuation_number(psi: &FockVector, phi_t: &Orbital, n_particles: usize) -> Result<f64> {
    let a_phi = crate::fock::annihilate_smeared(phi_t, psi)?;
    let mean_a = psi.inner(&a_phi)?;
    let sqrt_n = (n_particles as f64).sqrt();
    Ok((psi.number_moment() - 2.0 * sqrt_n * mean_a.re) / psi.norm_sqr() + n_particles as f64 * phi_t.norm_sqr())
}

/// Sample of a trajectory at a stored time.
pub fn hartree_at(traj: &Trajectory, t: f64) -> Result<Orbital> {
    let k = traj.index_near(t);
    if (traj.times[k] - t).abs() > 1e-9 * t.abs().max(1.0) {
        return Err(Error::InvalidInput(format!(
            "time {t} is not on the stored trajectory (nearest {})",
            traj.times[k]
        )));
    }
    Ok(traj.states[k].clone())
}

/// One-body operator `O` (site basis) lifted to the first of `k` slots.
pub fn lift_first_slot(op: &DMatrix<C64>, order: usize) -> DMatrix<C64> {
    let mut out = op.clone();
    for _ in 1..order {
        out = out.kronecker(&DMatrix::<C64>::identity(op.nrows(), op.nrows()));
    }
    out
}
