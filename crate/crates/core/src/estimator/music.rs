//! MUSIC refinement of coarse angle and velocity estimates.
//!
//! Spatial MUSIC uses the PRI columns of the expanded tone matrix as
//! snapshots, temporal MUSIC uses its element rows. Both apply
//! forward-backward averaging and scan a grid `factor` times finer than the
//! FFT bins within ±1 coarse bin.

use nalgebra::DMatrix;

use crate::linalg::{cis_cycles, hermitian_eigen_desc, hermitize, numerical_rank, C64};
use crate::scene::steering_ura_sin;
use crate::{Error, Result};

const RANK_RTOL: f64 = 1e-10;

/// `(R + J·R*·J)/2`.
pub fn forward_backward(r: &DMatrix<C64>) -> DMatrix<C64> {
    let n = r.nrows();
    let mut out = DMatrix::from_fn(n, n, |i, j| {
        (r[(i, j)] + r[(n - 1 - i, n - 1 - j)].conj()) * 0.5
    });
    hermitize(&mut out);
    out
}

/// Signal subspace of a covariance with `sources` sources.
fn signal_subspace(r: &DMatrix<C64>, sources: usize) -> Result<DMatrix<C64>> {
    let (vals, vecs) = hermitian_eigen_desc(r);
    let rank = numerical_rank(&vals, RANK_RTOL);
    if rank < sources + 1 {
        return Err(Error::RankDeficient {
            rank,
            required: sources + 1,
        });
    }
    Ok(vecs.columns(0, sources).into_owned())
}

/// `1 / ‖E_nᴴ a‖²` written through the signal subspace.
fn pseudo_spectrum(es: &DMatrix<C64>, a: &[C64]) -> f64 {
    let norm: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let mut proj = 0.0;
    for c in 0..es.ncols() {
        let d: C64 = es.column(c).iter().zip(a).map(|(e, x)| e.conj() * x).sum();
        proj += d.norm_sqr();
    }
    1.0 / (norm - proj).max(1e-300)
}

/// Geometry of the array that produced the rows of a tone matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    pub cols: usize,
    pub rows: usize,
    pub spacing_x_m: f64,
    pub spacing_y_m: f64,
    pub wavelength_m: f64,
    pub sin_step_x: f64,
    pub sin_step_y: f64,
}

/// Refines `(sin ψx, sin ψy)` around a coarse estimate.
pub fn spatial_music(
    y: &DMatrix<C64>,
    grid: &SpatialGrid,
    coarse: (f64, f64),
    sources: usize,
    factor: usize,
) -> Result<(f64, f64)> {
    if y.nrows() != grid.cols * grid.rows {
        return Err(Error::Dimension(format!(
            "{} rows for a {}×{} array",
            y.nrows(),
            grid.cols,
            grid.rows
        )));
    }
    let factor = factor.max(1);
    let r = forward_backward(&crate::linalg::sample_covariance(y));
    let es = signal_subspace(&r, sources)?;
    let steps = factor as i64;
    let mut best = (f64::NEG_INFINITY, coarse);
    for jy in -steps..=steps {
        let sy = coarse.1 + jy as f64 * grid.sin_step_y / factor as f64;
        if grid.rows == 1 && jy != 0 {
            continue;
        }
        for jx in -steps..=steps {
            let sx = coarse.0 + jx as f64 * grid.sin_step_x / factor as f64;
            if grid.cols == 1 && jx != 0 {
                continue;
            }
            let a = steering_ura_sin(
                sx,
                sy,
                grid.cols,
                grid.rows,
                grid.spacing_x_m,
                grid.spacing_y_m,
                grid.wavelength_m,
            );
            let p = pseudo_spectrum(&es, &a);
            if p > best.0 {
                best = (p, (sx, sy));
            }
        }
    }
    Ok(best.1)
}

/// Refines a Doppler frequency around a coarse estimate.
pub fn temporal_music(
    y: &DMatrix<C64>,
    pri_s: f64,
    coarse_doppler_hz: f64,
    doppler_step_hz: f64,
    sources: usize,
    factor: usize,
) -> Result<f64> {
    let (e, m) = y.shape();
    let factor = factor.max(1);
    let mut r = y.transpose() * y.conjugate();
    r.unscale_mut(e.max(1) as f64);
    hermitize(&mut r);
    let r = forward_backward(&r);
    let es = signal_subspace(&r, sources)?;
    let steps = factor as i64;
    let mut best = (f64::NEG_INFINITY, coarse_doppler_hz);
    for j in -steps..=steps {
        let fd = coarse_doppler_hz + j as f64 * doppler_step_hz / factor as f64;
        let a: Vec<C64> = (0..m).map(|k| cis_cycles(fd * k as f64 * pri_s)).collect();
        let p = pseudo_spectrum(&es, &a);
        if p > best.0 {
            best = (p, fd);
        }
    }
    Ok(best.1)
}
