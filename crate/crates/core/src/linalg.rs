//! Small complex linear-algebra and FFT helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::cell::RefCell;
use std::sync::Arc;

use crate::{Error, Result};

pub type C64 = Complex<f64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// `exp(j·2π·cycles)`.
#[inline]
pub fn cis_cycles(cycles: f64) -> C64 {
    let frac = cycles - cycles.floor();
    C64::from_polar(1.0, std::f64::consts::TAU * frac)
}

/// Kronecker product of two column vectors, `a` is the slow (outer) index.
pub fn kron(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        out.extend(b.iter().map(|&y| x * y));
    }
    out
}

pub fn vdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn energy(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction))
}

/// Unnormalized forward DFT: `X[n] = Σ x[k]·exp(−j2πnk/N)`.
pub fn fft(buf: &mut [C64]) {
    if buf.len() > 1 {
        plan(buf.len(), FftDirection::Forward).process(buf);
    }
}

/// Unnormalized inverse DFT: `x[k] = Σ X[n]·exp(+j2πnk/N)`.
pub fn ifft(buf: &mut [C64]) {
    if buf.len() > 1 {
        plan(buf.len(), FftDirection::Inverse).process(buf);
    }
}

/// Forward FFT along every row of `m` (the column axis).
pub fn fft_rows(m: &DMatrix<C64>) -> DMatrix<C64> {
    let (r, c) = m.shape();
    let mut out = DMatrix::zeros(r, c);
    let mut buf = vec![ZERO; c];
    let f = plan(c, FftDirection::Forward);
    for i in 0..r {
        for j in 0..c {
            buf[j] = m[(i, j)];
        }
        if c > 1 {
            f.process(&mut buf);
        }
        for j in 0..c {
            out[(i, j)] = buf[j];
        }
    }
    out
}

/// Forward FFT of a row vector.
pub fn fft_row_vector(v: &[C64]) -> Vec<C64> {
    let mut b = v.to_vec();
    fft(&mut b);
    b
}

/// Forward 2D FFT of a vector laid out as `rows × cols` with the column
/// index fastest (the layout of `a_y ⊗ a_x`).
pub fn fft2_inplace(v: &mut [C64], cols: usize, rows: usize) {
    debug_assert_eq!(v.len(), cols * rows);
    for r in 0..rows {
        fft(&mut v[r * cols..(r + 1) * cols]);
    }
    if rows > 1 {
        let f = plan(rows, FftDirection::Forward);
        let mut col = vec![ZERO; rows];
        for c in 0..cols {
            for r in 0..rows {
                col[r] = v[r * cols + c];
            }
            f.process(&mut col);
            for r in 0..rows {
                v[r * cols + c] = col[r];
            }
        }
    }
}

pub fn to_dvector(v: &[C64]) -> DVector<C64> {
    DVector::from_column_slice(v)
}

/// `Y·Yᴴ / n`.
pub fn sample_covariance(y: &DMatrix<C64>) -> DMatrix<C64> {
    let n = y.ncols().max(1) as f64;
    let mut s = y * y.adjoint();
    s.unscale_mut(n);
    hermitize(&mut s);
    s
}

/// Replaces `m` by `(m + mᴴ)/2`.
pub fn hermitize(m: &mut DMatrix<C64>) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
        for j in i + 1..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

pub fn trace_re(m: &DMatrix<C64>) -> f64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)].re).sum()
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order (columns of the returned matrix follow the same order).
pub fn hermitian_eigen_desc(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Number of eigenvalues above `rtol · λ_max`.
pub fn numerical_rank(eigenvalues_desc: &[f64], rtol: f64) -> usize {
    let max = eigenvalues_desc.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return 0;
    }
    eigenvalues_desc.iter().filter(|&&l| l > rtol * max).count()
}

/// Relative eigenvalue threshold used to declare a covariance singular.
pub const SINGULAR_RTOL: f64 = 1e-12;

/// Solves `S·x = b` for Hermitian positive semi-definite `S`. Falls back to
/// the eigenvalue pseudo-inverse when `S` is numerically singular; the flag
/// reports whether the fallback was taken.
pub fn hermitian_solve(s: &DMatrix<C64>, b: &[C64]) -> (Vec<C64>, bool) {
    let (vals, vecs) = hermitian_eigen_desc(s);
    let rank = numerical_rank(&vals, SINGULAR_RTOL);
    let singular = rank < vals.len();
    let bv = to_dvector(b);
    let proj = vecs.adjoint() * bv;
    let mut scaled = proj.clone();
    for i in 0..vals.len() {
        scaled[i] = if i < rank { proj[i] / vals[i] } else { ZERO };
    }
    let x = vecs * scaled;
    (x.iter().copied().collect(), singular)
}

/// Solves a well-conditioned square system through LU.
pub fn lu_solve(s: &DMatrix<C64>, b: &[C64]) -> Result<Vec<C64>> {
    let x = s
        .clone()
        .lu()
        .solve(&to_dvector(b))
        .ok_or_else(|| Error::Numerical("LU solve of a singular matrix".into()))?;
    Ok(x.iter().copied().collect())
}

/// Moore-Penrose pseudo-inverse through the SVD.
pub fn pinv(m: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    m.clone()
        .pseudo_inverse(1e-12 * scale)
        .map_err(|e| Error::Numerical(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kron_ordering_puts_first_factor_outside() {
        let a = [ONE, C64::new(2.0, 0.0)];
        let b = [ONE, C64::new(0.0, 1.0), C64::new(-1.0, 0.0)];
        let k = kron(&a, &b);
        assert_eq!(k.len(), 6);
        assert_eq!(k[4], C64::new(0.0, 2.0));
    }

    #[test]
    fn fft2_matches_direct_sum() {
        let (cols, rows) = (4, 3);
        let v: Vec<C64> = (0..12)
            .map(|i| C64::new(i as f64, (i * i) as f64 * 0.1))
            .collect();
        let mut f = v.clone();
        fft2_inplace(&mut f, cols, rows);
        for ky in 0..rows {
            for kx in 0..cols {
                let mut s = ZERO;
                for y in 0..rows {
                    for x in 0..cols {
                        s += v[y * cols + x]
                            * cis_cycles(
                                -((kx * x) as f64 / cols as f64 + (ky * y) as f64 / rows as f64),
                            );
                    }
                }
                assert!((s - f[ky * cols + kx]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn eigen_sorted_and_reconstructs() {
        let a = DMatrix::from_fn(4, 3, |i, j| {
            C64::new((i * i + 2 * j) as f64, (i * j * j) as f64 - 1.0)
        });
        let s = sample_covariance(&a);
        let (vals, vecs) = hermitian_eigen_desc(&s);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let lam = DMatrix::from_diagonal(&DVector::from_iterator(
            4,
            vals.iter().map(|&l| C64::new(l, 0.0)),
        ));
        let back = &vecs * lam * vecs.adjoint();
        for (x, y) in back.iter().zip(s.iter()) {
            assert!((x - y).norm() < 1e-9);
        }
        assert_eq!(numerical_rank(&vals, 1e-10), 3);
    }

    #[test]
    fn hermitian_solve_matches_lu_on_full_rank() {
        let s = DMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                C64::new(4.0, 0.0)
            } else {
                C64::new(0.5, if i < j { 0.25 } else { -0.25 })
            }
        });
        let b = [ONE, C64::new(0.0, 2.0), C64::new(-1.0, 1.0)];
        let (x, singular) = hermitian_solve(&s, &b);
        assert!(!singular);
        let y = lu_solve(&s, &b).unwrap();
        for (p, q) in x.iter().zip(&y) {
            assert_relative_eq!(p.re, q.re, epsilon = 1e-12);
            assert_relative_eq!(p.im, q.im, epsilon = 1e-12);
        }
    }
}
