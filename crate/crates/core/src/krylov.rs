//! Short-time Lanczos propagator for `exp(-iτH)·v` with Hermitian `H`.
//!
//! Each step builds an orthonormal Krylov basis, exponentiates the projected
//! tridiagonal matrix exactly and picks the largest sub-step whose a-posteriori
//! error estimate `β_m·|[exp(-isT)e₁]_m|` stays below the tolerance.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::par;
use crate::sparse::LinearOperator;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KrylovOptions {
    /// Per-step error tolerance relative to the vector norm.
    pub tol: f64,
    /// Largest Krylov subspace dimension.
    pub max_dim: usize,
    /// Full Gram-Schmidt against the whole basis at every iteration.
    pub reorthogonalize: bool,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_dim: 40,
            reorthogonalize: true,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct KrylovStats {
    pub steps: usize,
    pub matvecs: usize,
    /// Sum of the accepted per-step error estimates.
    pub error_estimate: f64,
}

impl KrylovStats {
    pub fn merge(&mut self, other: &KrylovStats) {
        self.steps += other.steps;
        self.matvecs += other.matvecs;
        self.error_estimate += other.error_estimate;
    }
}

struct Tridiagonal {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl Tridiagonal {
    /// `exp(-i s T) e₁` for the leading `j×j` block.
    fn exp_e1(&self, j: usize, s: f64) -> Vec<C64> {
        if j == 1 {
            return vec![C64::from_polar(1.0, -s * self.alpha[0])];
        }
        let mut t = DMatrix::<f64>::zeros(j, j);
        for k in 0..j {
            t[(k, k)] = self.alpha[k];
            if k + 1 < j {
                t[(k, k + 1)] = self.beta[k];
                t[(k + 1, k)] = self.beta[k];
            }
        }
        let eig = SymmetricEigen::new(t);
        let z = &eig.eigenvectors;
        (0..j)
            .map(|r| {
                (0..j)
                    .map(|l| C64::from_polar(z[(r, l)] * z[(0, l)], -s * eig.eigenvalues[l]))
                    .sum()
            })
            .collect()
    }
}

/// `exp(-iτH)·v`; `tau` may be negative.
pub fn expm_apply<A: LinearOperator + ?Sized>(
    op: &A,
    v: &[C64],
    tau: f64,
    opts: &KrylovOptions,
) -> Result<(Vec<C64>, KrylovStats)> {
    let n = op.dim();
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.len(),
        });
    }
    let mut stats = KrylovStats::default();
    let mut w = v.to_vec();
    if tau == 0.0 || n == 0 {
        return Ok((w, stats));
    }
    let sign = tau.signum();
    let mut remaining = tau.abs();
    let max_dim = opts.max_dim.clamp(2, n.max(2));

    while remaining > 0.0 {
        let beta0 = par::norm(&w);
        if beta0 == 0.0 {
            break;
        }
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(max_dim);
        let mut q = w.clone();
        par::scale(C64::new(1.0 / beta0, 0.0), &mut q);
        basis.push(q);
        let mut tri = Tridiagonal {
            alpha: Vec::with_capacity(max_dim),
            beta: Vec::with_capacity(max_dim),
        };
        let mut next = vec![C64::new(0.0, 0.0); n];
        let mut accepted: Option<(f64, Vec<C64>, f64)> = None;

        for j in 0..max_dim {
            op.apply(&basis[j], &mut next);
            stats.matvecs += 1;
            let a = par::dot(&basis[j], &next).re;
            tri.alpha.push(a);
            par::axpy(C64::new(-a, 0.0), &basis[j], &mut next);
            if j > 0 {
                par::axpy(C64::new(-tri.beta[j - 1], 0.0), &basis[j - 1], &mut next);
            }
            if opts.reorthogonalize {
                for qk in &basis {
                    let c = par::dot(qk, &next);
                    par::axpy(-c, qk, &mut next);
                }
            }
            let b = par::norm(&next);
            let dim = j + 1;
            let happy = b <= 1e-13 * (a.abs() + tri.beta.last().copied().unwrap_or(0.0) + 1e-300);
            if happy || dim == n {
                let y = tri.exp_e1(dim, remaining);
                accepted = Some((remaining, y, 0.0));
                break;
            }
            tri.beta.push(b);

            // try to finish the remaining interval early, every few iterations
            let last = dim == max_dim;
            if dim % 5 == 0 || last {
                let mut s = remaining;
                for _ in 0..64 {
                    let y = tri.exp_e1(dim, s);
                    let err = b * y[dim - 1].norm();
                    if err <= opts.tol {
                        accepted = Some((s, y, err));
                        break;
                    }
                    if !last {
                        break;
                    }
                    s *= 0.5;
                }
                if accepted.is_some() {
                    break;
                }
                if last {
                    return Err(Error::KrylovNoConvergence {
                        estimate: b * tri.exp_e1(dim, s).last().map_or(0.0, |c| c.norm()),
                        dim,
                    });
                }
            }
            let mut qn = std::mem::replace(&mut next, vec![C64::new(0.0, 0.0); n]);
            par::scale(C64::new(1.0 / b, 0.0), &mut qn);
            basis.push(qn);
        }

        let (s, y, err) = accepted.expect("lanczos loop always accepts or errors");
        // accumulate w = β₀ Σ y_k q_k (the sign of τ enters through conjugation)
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (k, yk) in y.iter().enumerate() {
            let coeff = if sign < 0.0 { yk.conj() } else { *yk } * beta0;
            par::axpy(coeff, &basis[k], &mut out);
        }
        w = out;
        stats.steps += 1;
        stats.error_estimate += err * beta0;
        remaining -= s;
        if remaining < 1e-15 * tau.abs() {
            remaining = 0.0;
        }
    }
    if w.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::NonFinite("krylov propagation".into()));
    }
    Ok((w, stats))
}
