//! Effective one-body dynamics: lattice Hartree and cubic Gross-Pitaevskii
//! evolution, the GP energy functional and its constrained minimizer.
//!
//! Both evolutions share a split-step integrator. The free part `−Δ_h` is
//! diagonal in plane waves and applied exactly through an FFT; the remaining
//! potential `V_ext + V∗|φ|²` (or `μ|φ|²`) leaves `|φ|` invariant, so its
//! substep is an exact pointwise phase.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{convolve, laplacian_apply, l2_inner, ExternalPotential, Grid1D, Orbital, PairPotential};

#[derive(Clone, Debug, PartialEq)]
pub enum Interaction {
    /// Hartree nonlinearity `(V∗|φ|²)φ`.
    Kernel(PairPotential),
    /// Local cubic nonlinearity `μ|φ|²φ`.
    Local(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeanFieldProblem {
    pub grid: Grid1D,
    pub interaction: Interaction,
    pub external: Option<ExternalPotential>,
    pub initial: Orbital,
}

impl MeanFieldProblem {
    pub fn hartree(pair: PairPotential, external: Option<ExternalPotential>, initial: Orbital) -> Result<Self> {
        Self::new(*pair.grid(), Interaction::Kernel(pair), external, initial)
    }

    pub fn gross_pitaevskii(mu: f64, external: Option<ExternalPotential>, initial: Orbital) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::InvalidInput(format!("coupling {mu} is not finite")));
        }
        Self::new(*initial.grid(), Interaction::Local(mu), external, initial)
    }

    fn new(grid: Grid1D, interaction: Interaction, external: Option<ExternalPotential>, initial: Orbital) -> Result<Self> {
        grid_check(&grid, initial.grid())?;
        if let Some(w) = &external {
            if w.len() != grid.num_sites() {
                return Err(Error::DimensionMismatch {
                    expected: grid.num_sites(),
                    got: w.len(),
                });
            }
        }
        let dev = (initial.norm_sqr() - 1.0).abs();
        if dev > 1e-10 {
            return Err(Error::NotNormalized { deviation: dev });
        }
        Ok(Self {
            grid,
            interaction,
            external,
            initial,
        })
    }

    /// Pointwise potential `V_ext + V∗|φ|²` or `V_ext + μ|φ|²`.
    pub fn potential(&self, phi: &Orbital) -> Result<Vec<f64>> {
        let rho = phi.density();
        let mut w = match &self.interaction {
            Interaction::Kernel(v) => convolve(v, &rho)?,
            Interaction::Local(mu) => rho.iter().map(|r| mu * r).collect(),
        };
        if let Some(ext) = &self.external {
            for (wi, e) in w.iter_mut().zip(ext.samples()) {
                *wi += e;
            }
        }
        Ok(w)
    }

    /// Hartree energy `⟨φ,(−Δ+V_ext)φ⟩ + ½⟨|φ|², V∗|φ|²⟩`, or the GP energy
    /// for a local interaction.
    pub fn energy(&self, phi: &Orbital) -> Result<f64> {
        match &self.interaction {
            Interaction::Kernel(v) => hartree_energy(phi, v, self.external.as_ref()),
            Interaction::Local(mu) => gp_energy(phi, *mu, self.external.as_ref()),
        }
    }
}

fn grid_check(a: &Grid1D, b: &Grid1D) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!("{a:?} vs {b:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SplitOrder {
    /// Symmetric second-order splitting.
    Strang,
    /// Fourth-order triple-jump composition of Strang steps.
    Yoshida4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EvolveOptions {
    pub dt: f64,
    pub order: SplitOrder,
    /// Keep every `save_every`-th step (the endpoints are always kept).
    pub save_every: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            order: SplitOrder::Yoshida4,
            save_every: 1,
        }
    }
}

impl EvolveOptions {
    pub fn with_dt(dt: f64) -> Self {
        Self { dt, ..Self::default() }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Orbital>,
}

impl Trajectory {
    pub fn last(&self) -> &Orbital {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the stored time closest to `t`.
    pub fn index_near(&self, t: f64) -> usize {
        self.times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map_or(0, |(k, _)| k)
    }

    /// State at the stored time closest to `t`.
    pub fn nearest(&self, t: f64) -> &Orbital {
        &self.states[self.index_near(t)]
    }

    /// Linear interpolation between stored samples.
    pub fn interpolate(&self, t: f64) -> Orbital {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return self.states[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.states[n - 1].clone();
        }
        let k = self.times.partition_point(|&s| s <= t).clamp(1, n - 1);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        let (a, b) = (&self.states[k - 1], &self.states[k]);
        let amps = a
            .amps()
            .iter()
            .zip(b.amps())
            .map(|(x, y)| x * (1.0 - w) + y * w)
            .collect();
        Orbital::new(*a.grid(), amps).expect("interpolated orbital shares the grid")
    }
}

struct SplitStepper<'a> {
    problem: &'a MeanFieldProblem,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kinetic: Vec<f64>,
    scratch: Vec<C64>,
}

impl<'a> SplitStepper<'a> {
    fn new(problem: &'a MeanFieldProblem) -> Self {
        let m = problem.grid.num_sites();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let h = problem.grid.spacing();
        let kinetic = (0..m)
            .map(|k| 2.0 / (h * h) * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / m as f64).cos()))
            .collect();
        let scratch = vec![C64::new(0.0, 0.0); forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len())];
        Self {
            problem,
            forward,
            inverse,
            kinetic,
            scratch,
        }
    }

    fn free(&mut self, amps: &mut [C64], tau: f64) {
        self.forward.process_with_scratch(amps, &mut self.scratch);
        let inv_m = 1.0 / amps.len() as f64;
        for (c, e) in amps.iter_mut().zip(&self.kinetic) {
            *c *= C64::from_polar(inv_m, -tau * e);
        }
        self.inverse.process_with_scratch(amps, &mut self.scratch);
    }

    fn potential(&self, phi: &mut Orbital, tau: f64) -> Result<()> {
        let w = self.problem.potential(phi)?;
        for (c, wi) in phi.amps_mut().iter_mut().zip(&w) {
            *c *= C64::from_polar(1.0, -tau * wi);
        }
        Ok(())
    }

    fn strang(&mut self, phi: &mut Orbital, dt: f64) -> Result<()> {
        self.potential(phi, 0.5 * dt)?;
        self.free(phi.amps_mut(), dt);
        self.potential(phi, 0.5 * dt)
    }

    fn step(&mut self, phi: &mut Orbital, dt: f64, order: SplitOrder) -> Result<()> {
        match order {
            SplitOrder::Strang => self.strang(phi, dt),
            SplitOrder::Yoshida4 => {
                let [w1, w0] = yoshida_weights();
                self.strang(phi, w1 * dt)?;
                self.strang(phi, w0 * dt)?;
                self.strang(phi, w1 * dt)
            }
        }
    }
}

fn yoshida_weights() -> [f64; 2] {
    let c = 2f64.powf(1.0 / 3.0);
    [1.0 / (2.0 - c), -c / (2.0 - c)]
}

impl SplitOrder {
    /// Longest substep as a multiple of `dt`.
    fn substep_factor(self) -> f64 {
        match self {
            SplitOrder::Strang => 1.0,
            SplitOrder::Yoshida4 => yoshida_weights()[1].abs(),
        }
    }
}

/// Largest phase increment per step allowed by the stability test.
pub const PHASE_LIMIT: f64 = std::f64::consts::PI;

/// Integrates `i∂φ = (−Δ_h + W[φ])φ` from the problem's initial state up to
/// time `t`. The step is shrunk to `t / ceil(t/dt)` so the run ends on `t`.
pub fn evolve(problem: &MeanFieldProblem, t: f64, opts: &EvolveOptions) -> Result<Trajectory> {
    if !(opts.dt > 0.0 && opts.dt.is_finite()) || !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("need dt > 0 and t >= 0, got dt = {}, t = {t}", opts.dt)));
    }
    let steps = (t / opts.dt - 1e-9).ceil().max(0.0) as usize;
    let dt = if steps == 0 { 0.0 } else { t / steps as f64 };
    let mut phi = problem.initial.clone();

    let h = problem.grid.spacing();
    let w0 = problem.potential(&phi)?;
    let max_w = w0.iter().fold(0.0f64, |a, w| a.max(w.abs()));
    let rate = (4.0 / (h * h)).max(max_w);
    let longest = dt * opts.order.substep_factor();
    if longest * rate > PHASE_LIMIT {
        return Err(Error::Stability(format!(
            "substep·max(4/h², |W|) = {:.3} exceeds {PHASE_LIMIT:.3}",
            longest * rate
        )));
    }

    let stride = opts.save_every.max(1);
    let mut stepper = SplitStepper::new(problem);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![phi.clone()],
    };
    for k in 1..=steps {
        stepper.step(&mut phi, dt, opts.order)?;
        if phi.amps().iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite(format!("mean-field step {k}")));
        }
        if k % stride == 0 || k == steps {
            traj.times.push(k as f64 * dt);
            traj.states.push(phi.clone());
        }
    }
    Ok(traj)
}

/// Lattice Hartree evolution `i∂φ = (−Δ_h + V_ext)φ + (V∗|φ|²)φ`.
pub fn hartree_evolve(problem: &MeanFieldProblem, t: f64, dt: f64) -> Result<Trajectory> {
    if !matches!(problem.interaction, Interaction::Kernel(_)) {
        return Err(Error::InvalidInput("hartree evolution needs a pair kernel".into()));
    }
    evolve(problem, t, &EvolveOptions::with_dt(dt))
}

/// Cubic GP evolution `i∂φ = (−Δ_h + V_ext)φ + μ|φ|²φ`.
pub fn gp_evolve(problem: &MeanFieldProblem, t: f64, dt: f64) -> Result<Trajectory> {
    if !matches!(problem.interaction, Interaction::Local(_)) {
        return Err(Error::InvalidInput("gross-pitaevskii evolution needs a local coupling".into()));
    }
    evolve(problem, t, &EvolveOptions::with_dt(dt))
}

/// `⟨φ, (−Δ_h + V_ext) φ⟩ = h·Σ |∇⁺φ|² + h·Σ V_ext |φ|²`.
pub fn one_body_energy(phi: &Orbital, external: Option<&ExternalPotential>) -> Result<f64> {
    let g = phi.grid();
    let h = g.spacing();
    let m = phi.len();
    let c = phi.amps();
    let mut e = h * (0..m).map(|i| ((c[(i + 1) % m] - c[i]) / h).norm_sqr()).sum::<f64>();
    if let Some(w) = external {
        if w.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: w.len() });
        }
        e += h * c.iter().zip(w.samples()).map(|(a, v)| v * a.norm_sqr()).sum::<f64>();
    }
    Ok(e)
}

pub fn hartree_energy(phi: &Orbital, v: &PairPotential, external: Option<&ExternalPotential>) -> Result<f64> {
    let rho = phi.density();
    let vr = convolve(v, &rho)?;
    let h = phi.grid().spacing();
    let inter = 0.5 * h * rho.iter().zip(&vr).map(|(a, b)| a * b).sum::<f64>();
    Ok(one_body_energy(phi, external)? + inter)
}

/// `h·Σ [ |∇⁺φ|² + V_ext|φ|² + (μ/2)|φ|⁴ ]`.
pub fn gp_energy(phi: &Orbital, mu: f64, external: Option<&ExternalPotential>) -> Result<f64> {
    let h = phi.grid().spacing();
    let quartic = 0.5 * mu * h * phi.density().iter().map(|r| r * r).sum::<f64>();
    Ok(one_body_energy(phi, external)? + quartic)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MinimizeOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub initial_step: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iterations: 200_000,
            initial_step: 0.1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GroundState {
    pub orbital: Orbital,
    pub energy: f64,
    /// Rayleigh quotient `⟨φ, H[φ]φ⟩`.
    pub chemical_potential: f64,
    /// `‖H[φ]φ − λφ‖` at the returned iterate.
    pub residual: f64,
    pub iterations: usize,
    pub energies: Vec<f64>,
}

/// Relative size of round-off in a GP energy evaluation; the minimizer's
/// energy sequence is monotone up to this.
pub const ENERGY_ROUNDOFF: f64 = 8.0 * f64::EPSILON;

/// Normalized projected-gradient descent on the GP functional with a
/// backtracking (Armijo) line search.
pub fn gp_minimize(
    mu: f64,
    external: Option<&ExternalPotential>,
    grid: &Grid1D,
    opts: &MinimizeOptions,
) -> Result<GroundState> {
    if !(mu >= 0.0) {
        return Err(Error::InvalidInput(format!("minimizer needs a repulsive coupling, got {mu}")));
    }
    if let Some(w) = external {
        if w.len() != grid.num_sites() {
            return Err(Error::DimensionMismatch {
                expected: grid.num_sites(),
                got: w.len(),
            });
        }
    }
    let energy = |phi: &Orbital| gp_energy(phi, mu, external);
    let apply_h = |phi: &Orbital| -> Orbital {
        let lap = laplacian_apply(phi);
        let amps = phi
            .amps()
            .iter()
            .zip(lap.amps())
            .enumerate()
            .map(|(i, (c, l))| {
                let w = external.map_or(0.0, |e| e.samples()[i]) + mu * c.norm_sqr();
                l + c * w
            })
            .collect();
        Orbital::new(*grid, amps).expect("same grid")
    };

    // start from a slightly tilted constant so symmetric traps do not pin a saddle
    let mut phi = Orbital::from_fn(*grid, |x| C64::new(1.0 + 0.1 * (2.0 * std::f64::consts::PI * x / grid.length()).cos(), 0.0))?
        .normalized()?;
    let mut e = energy(&phi)?;
    let mut energies = vec![e];
    let mut iterations = 0;
    loop {
        let hphi = apply_h(&phi);
        let lambda = l2_inner(&phi, &hphi)?.re;
        let grad = hphi.sub(&phi.scaled(C64::new(lambda, 0.0)))?;
        let gnorm2 = grad.norm_sqr();
        let residual = gnorm2.sqrt();
        if residual <= opts.tol {
            return Ok(GroundState {
                orbital: phi,
                energy: e,
                chemical_potential: lambda,
                residual,
                iterations,
                energies,
            });
        }
        if iterations >= opts.max_iterations {
            return Err(Error::IterationCap {
                iterations,
                residual,
                tolerance: opts.tol,
            });
        }
        // Below this the energy test is decided by round-off; steps are
        // then accepted when they shrink the residual without raising the
        // energy beyond it.
        let floor = ENERGY_ROUNDOFF * e.abs().max(1.0);
        let mut s = opts.initial_step;
        let accepted = loop {
            let trial = phi.sub(&grad.scaled(C64::new(s, 0.0)))?.normalized()?;
            let et = energy(&trial)?;
            let decrease = 1e-4 * s * gnorm2;
            if et <= e - decrease {
                break Some((trial, et));
            }
            if decrease < floor && et <= e + floor {
                let ht = apply_h(&trial);
                let lt = l2_inner(&trial, &ht)?.re;
                if ht.sub(&trial.scaled(C64::new(lt, 0.0)))?.norm() < residual {
                    break Some((trial, et));
                }
            }
            s *= 0.5;
            if s < 1e-14 {
                break None;
            }
        };
        match accepted {
            Some((trial, et)) => {
                phi = trial;
                e = et;
                energies.push(e);
            }
            None => {
                // at the round-off floor: report what we have
                return Err(Error::IterationCap {
                    iterations,
                    residual,
                    tolerance: opts.tol,
                });
            }
        }
        iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::laplacian_eigenvalue;

    #[test]
    fn stability_violation_is_reported() {
        let g = Grid1D::new(16, 0.1).unwrap();
        let p = MeanFieldProblem::gross_pitaevskii(0.0, None, Orbital::constant(g)).unwrap();
        assert!(matches!(gp_evolve(&p, 1.0, 0.1), Err(Error::Stability(_))));
    }

    #[test]
    fn step_lands_on_final_time() {
        let g = Grid1D::new(8, 1.0).unwrap();
        let p = MeanFieldProblem::gross_pitaevskii(1.0, None, Orbital::constant(g)).unwrap();
        let tr = gp_evolve(&p, 0.25, 0.1).unwrap();
        assert_eq!(tr.len(), 4);
        assert!((tr.times[3] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn plane_wave_energy() {
        let g = Grid1D::new(12, 0.5).unwrap();
        let pw = Orbital::plane_wave(g, 2);
        let e = gp_energy(&pw, 0.0, None).unwrap();
        assert!((e - laplacian_eigenvalue(&g, g.wave_number(2))).abs() < 1e-12);
        assert_eq!(gp_energy(&Orbital::zeros(g), 3.0, None).unwrap(), 0.0);
    }
}
