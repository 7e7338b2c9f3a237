//! Compressed sparse row matrices and the linear-operator abstraction used
//! by the Krylov propagators.

use std::ops::Mul;

use num_complex::Complex64 as C64;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Something that can be applied to a complex vector. Implementors used with
/// the Lanczos propagator must be Hermitian.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    /// `y = A x`; `y` is overwritten.
    fn apply(&self, x: &[C64], y: &mut [C64]);
}

#[derive(Clone, Debug, Default)]
pub struct Csr<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<T>,
}

/// Row entries produced by a row builder: `(column, value)` pairs.
pub type RowEntries<T> = Vec<(u32, T)>;

const BUILD_CHUNK: usize = 2048;

impl<T> Csr<T>
where
    T: Copy + Send + Sync + Default + std::ops::AddAssign + PartialEq,
{
    /// Builds the matrix row by row. `row(i, &mut buf)` appends the entries of
    /// row `i`; duplicate columns are summed and explicit zeros dropped.
    pub fn from_row_fn<F>(nrows: usize, ncols: usize, row: F) -> Self
    where
        F: Fn(usize, &mut RowEntries<T>) + Sync + Send,
    {
        let chunk_starts: Vec<usize> = (0..nrows).step_by(BUILD_CHUNK).collect();
        let build_chunk = |start: usize| {
            let end = (start + BUILD_CHUNK).min(nrows);
            let mut counts = Vec::with_capacity(end - start);
            let mut indices = Vec::new();
            let mut values = Vec::new();
            let mut buf: RowEntries<T> = Vec::new();
            for i in start..end {
                buf.clear();
                row(i, &mut buf);
                buf.sort_unstable_by_key(|e| e.0);
                let before = indices.len();
                let mut k = 0;
                while k < buf.len() {
                    let col = buf[k].0;
                    let mut v = buf[k].1;
                    k += 1;
                    while k < buf.len() && buf[k].0 == col {
                        v += buf[k].1;
                        k += 1;
                    }
                    if v != T::default() {
                        indices.push(col);
                        values.push(v);
                    }
                }
                counts.push(indices.len() - before);
            }
            (counts, indices, values)
        };

        #[cfg(feature = "parallel")]
        let chunks: Vec<_> = chunk_starts.into_par_iter().map(build_chunk).collect();
        #[cfg(not(feature = "parallel"))]
        let chunks: Vec<_> = chunk_starts.into_iter().map(build_chunk).collect();

        let nnz = chunks.iter().map(|c| c.1.len()).sum();
        let mut indptr = Vec::with_capacity(nrows + 1);
        indptr.push(0);
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for (counts, idx, vals) in chunks {
            for c in counts {
                let last = *indptr.last().unwrap();
                indptr.push(last + c);
            }
            indices.extend(idx);
            values.extend(vals);
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }
}

impl<T> Csr<T> {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, &T)> {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()]
            .iter()
            .map(|&c| c as usize)
            .zip(&self.values[r])
    }
}

impl<T> Csr<T>
where
    T: Copy + Send + Sync + Mul<C64, Output = C64>,
{
    fn row_dot(&self, i: usize, x: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for k in self.indptr[i]..self.indptr[i + 1] {
            acc += self.values[k] * x[self.indices[k] as usize];
        }
        acc
    }

    /// `y = A x` on the calling thread.
    pub fn matvec_seq(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row_dot(i, x);
        }
    }

    /// `y = A x`, row-parallel when the `parallel` feature is on.
    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        #[cfg(feature = "parallel")]
        if self.nrows >= crate::par::PAR_THRESHOLD {
            y.par_iter_mut()
                .with_min_len(1024)
                .enumerate()
                .for_each(|(i, yi)| *yi = self.row_dot(i, x));
            return;
        }
        self.matvec_seq(x, y);
    }
}

impl<T> LinearOperator for Csr<T>
where
    T: Copy + Send + Sync + Mul<C64, Output = C64>,
{
    fn dim(&self) -> usize {
        self.nrows
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.matvec(x, y);
    }
}

/// Largest absolute row sum, an upper bound on the spectral radius.
pub fn row_sum_bound<T>(a: &Csr<T>, abs: impl Fn(&T) -> f64) -> f64 {
    (0..a.nrows)
        .map(|i| a.row(i).map(|(_, v)| abs(v)).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_entries_are_merged() {
        let a: Csr<f64> = Csr::from_row_fn(3, 3, |i, buf| {
            buf.push((i as u32, 1.0));
            buf.push((i as u32, 2.0));
            buf.push(((i as u32 + 1) % 3, 0.5));
            buf.push(((i as u32 + 2) % 3, 0.0));
        });
        assert_eq!(a.nnz(), 6);
        let x = vec![C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(3.0, 0.0)];
        let mut y = vec![C64::new(0.0, 0.0); 3];
        a.matvec(&x, &mut y);
        assert_eq!(y[0].re, 3.0 + 1.0);
        assert_eq!(y[2].re, 9.0 + 0.5);
    }

    #[test]
    fn parallel_and_sequential_matvec_agree() {
        let n = 40_000;
        let a: Csr<C64> = Csr::from_row_fn(n, n, |i, buf| {
            buf.push((i as u32, C64::new(2.0, 0.0)));
            buf.push((((i + 1) % n) as u32, C64::new(-1.0, 0.1)));
            buf.push((((i + n - 1) % n) as u32, C64::new(-1.0, -0.1)));
        });
        let x: Vec<C64> = (0..n).map(|i| C64::new((i as f64).sin(), (i as f64).cos())).collect();
        let mut y1 = vec![C64::default(); n];
        let mut y2 = vec![C64::default(); n];
        a.matvec(&x, &mut y1);
        a.matvec_seq(&x, &mut y2);
        assert!(y1.iter().zip(&y2).all(|(p, q)| (p - q).norm() == 0.0));
    }
}
