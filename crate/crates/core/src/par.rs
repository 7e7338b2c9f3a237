//! Dense vector kernels and data-parallel helpers.
//!
//! With the `parallel` feature the kernels fan out over rayon's global pool;
//! without it every helper runs the same code sequentially. The `*_seq`
//! variants are always available so benches can compare the two paths.

use num_complex::Complex64 as C64;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this length the parallel kernels fall back to a plain loop.
///
/// Reductions sum fixed-size chunks in order, so results do not depend on
/// the thread count or on scheduling.
pub const PAR_THRESHOLD: usize = 1 << 14;

#[cfg(feature = "parallel")]
const MIN_CHUNK: usize = 4096;

pub fn dot_seq(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `<a, b>` with the conjugate on the left argument.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    #[cfg(feature = "parallel")]
    if a.len() >= PAR_THRESHOLD {
        let parts: Vec<C64> = a
            .par_chunks(MIN_CHUNK)
            .zip(b.par_chunks(MIN_CHUNK))
            .map(|(x, y)| dot_seq(x, y))
            .collect();
        return parts.into_iter().sum();
    }
    dot_seq(a, b)
}

pub fn norm_sqr(a: &[C64]) -> f64 {
    #[cfg(feature = "parallel")]
    if a.len() >= PAR_THRESHOLD {
        let parts: Vec<f64> = a
            .par_chunks(MIN_CHUNK)
            .map(|x| x.iter().map(|v| v.norm_sqr()).sum::<f64>())
            .collect();
        return parts.into_iter().sum();
    }
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    norm_sqr(a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    debug_assert_eq!(x.len(), y.len());
    #[cfg(feature = "parallel")]
    if x.len() >= PAR_THRESHOLD {
        y.par_iter_mut()
            .with_min_len(MIN_CHUNK)
            .zip(x.par_iter())
            .for_each(|(yi, xi)| *yi += alpha * xi);
        return;
    }
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: C64, x: &mut [C64]) {
    #[cfg(feature = "parallel")]
    if x.len() >= PAR_THRESHOLD {
        x.par_iter_mut().with_min_len(MIN_CHUNK).for_each(|v| *v *= alpha);
        return;
    }
    for v in x {
        *v *= alpha;
    }
}

/// Fill `out[i] = f(i)`, in parallel when enabled.
pub fn fill_indexed<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if out.len() >= PAR_THRESHOLD {
        out.par_iter_mut()
            .with_min_len(MIN_CHUNK)
            .enumerate()
            .for_each(|(i, o)| *o = f(i));
        return;
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o = f(i);
    }
}

/// Map over a list of independent jobs; output order matches input order.
pub fn map_jobs<I, O, F>(items: Vec<I>, f: F) -> Vec<O>
where
    I: Send,
    O: Send,
    F: Fn(I) -> O + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

/// Sum of `f(i)` over `0..n`.
pub fn sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if n >= PAR_THRESHOLD {
        let parts: Vec<f64> = (0..n.div_ceil(MIN_CHUNK))
            .into_par_iter()
            .map(|c| (c * MIN_CHUNK..((c + 1) * MIN_CHUNK).min(n)).map(&f).sum::<f64>())
            .collect();
        return parts.into_iter().sum();
    }
    (0..n).map(f).sum()
}
