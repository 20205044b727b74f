//! Column compression of the raw tone branch and nearest-neighbour
//! expansion over the chirp-bearing PRIs.

use nalgebra::DMatrix;

use crate::linalg::{C64, ZERO};
use crate::{Error, Result};

/// Sums each run of `n` consecutive columns.
pub fn column_compress(raw: &DMatrix<C64>, n: usize) -> Result<DMatrix<C64>> {
    if n == 0 || !raw.ncols().is_multiple_of(n) {
        return Err(Error::Dimension(format!(
            "{} columns are not a multiple of {n}",
            raw.ncols()
        )));
    }
    let m = raw.ncols() / n;
    let mut out = DMatrix::from_element(raw.nrows(), m, ZERO);
    for c in 0..m {
        for r in 0..raw.nrows() {
            out[(r, c)] = (0..n).map(|k| raw[(r, c * n + k)]).sum();
        }
    }
    Ok(out)
}

/// Source column in the compressed tone matrix for PRI `m`. Chirp PRIs
/// copy the nearest preceding tone PRI.
pub fn nn_source(m: usize, chirp_indices: &[usize]) -> usize {
    let g = chirp_indices.iter().take_while(|&&i| i < m).count();
    if chirp_indices.binary_search(&m).is_ok() {
        m - g - 1
    } else {
        m - g
    }
}

/// Restores the full `M`-column PRI grid from the `M − W` tone columns.
pub fn expand_nn(
    ys2: &DMatrix<C64>,
    chirp_indices: &[usize],
    m_total: usize,
) -> Result<DMatrix<C64>> {
    if chirp_indices.first() == Some(&0) {
        return Err(Error::Schedule(
            "chirp at PRI 0 has no preceding tone PRI to copy".into(),
        ));
    }
    if chirp_indices.windows(2).any(|w| w[0] >= w[1])
        || chirp_indices.last().is_some_and(|&i| i >= m_total)
    {
        return Err(Error::Schedule(
            "chirp indices must increase and stay below M".into(),
        ));
    }
    if ys2.ncols() + chirp_indices.len() != m_total {
        return Err(Error::Dimension(format!(
            "{} tone columns + {} chirps != {m_total}",
            ys2.ncols(),
            chirp_indices.len()
        )));
    }
    let mut out = DMatrix::from_element(ys2.nrows(), m_total, ZERO);
    for m in 0..m_total {
        out.set_column(m, &ys2.column(nn_source(m, chirp_indices)));
    }
    Ok(out)
}
