//! Space-time range spectra: STAP with diagonal loading, its matched-filter
//! limit, and the two-stage STHP (temporal zero-forcing then spatial
//! combining).

use nalgebra::DMatrix;

use super::EpsMode;
use crate::linalg::{
    fft, hermitian_solve, kron, lu_solve, pinv, sample_covariance, trace_re, C64, ONE, ZERO,
};
use crate::{Error, Result};

/// Chirp data stacked as `W·L × N`: block row `w` holds chirp occasion `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeSnapshot {
    pub y: DMatrix<C64>,
    pub occasions: usize,
    pub elements: usize,
}

impl SpaceTimeSnapshot {
    pub fn block(&self, w: usize) -> DMatrix<C64> {
        self.y.rows(w * self.elements, self.elements).into_owned()
    }
}

/// `L × W·N` (occasions side by side) to `W·L × N`.
pub fn reshape_space_time(chirp: &DMatrix<C64>, n: usize) -> Result<SpaceTimeSnapshot> {
    if n == 0 || !chirp.ncols().is_multiple_of(n) {
        return Err(Error::Dimension(format!(
            "{} chirp columns are not a multiple of {n}",
            chirp.ncols()
        )));
    }
    let w = chirp.ncols() / n;
    let l = chirp.nrows();
    let y = DMatrix::from_fn(w * l, n, |r, k| chirp[(r % l, (r / l) * n + k)]);
    Ok(SpaceTimeSnapshot {
        y,
        occasions: w,
        elements: l,
    })
}

pub fn unreshape_space_time(st: &SpaceTimeSnapshot) -> DMatrix<C64> {
    let (l, n) = (st.elements, st.y.ncols());
    DMatrix::from_fn(l, st.occasions * n, |r, c| st.y[((c / n) * l + r, c % n)])
}

/// `exp(j2π·f_d·t_w)` over the chirp timestamps.
pub fn temporal_steering(doppler_hz: f64, chirp_times_s: &[f64]) -> Vec<C64> {
    chirp_times_s
        .iter()
        .map(|&t| crate::linalg::cis_cycles(doppler_hz * t))
        .collect()
}

/// `a_T ⊗ a_S`.
pub fn space_time_steering(a_t: &[C64], a_s: &[C64]) -> Vec<C64> {
    kron(a_t, a_s)
}

/// `Y·Yᴴ / N`.
pub fn interference_cov(y_st: &DMatrix<C64>) -> DMatrix<C64> {
    sample_covariance(y_st)
}

/// `tr(S) / dim(S)`.
pub fn epsilon_m(s: &DMatrix<C64>) -> f64 {
    trace_re(s) / s.nrows() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeSpectrum {
    pub values: Vec<C64>,
    pub peak_bin: usize,
    /// The covariance was numerically singular and the eigenvalue
    /// pseudo-inverse was used.
    pub pinv_used: bool,
}

impl RangeSpectrum {
    fn from_values(values: Vec<C64>, pinv_used: bool) -> Self {
        let peak_bin = (0..values.len())
            .max_by(|&a, &b| {
                values[a]
                    .norm()
                    .total_cmp(&values[b].norm())
                    .then(b.cmp(&a))
            })
            .unwrap_or(0);
        RangeSpectrum {
            values,
            peak_bin,
            pinv_used,
        }
    }

    pub fn peak_magnitude(&self) -> f64 {
        self.values.get(self.peak_bin).map_or(0.0, |z| z.norm())
    }
}

/// `(xᴴ·Y·F_N) / (xᴴ·a)` for a weight direction `x`.
fn combine(y: &DMatrix<C64>, x: &[C64], a: &[C64]) -> Vec<C64> {
    let n = y.ncols();
    let norm: C64 = x.iter().zip(a).map(|(p, q)| p.conj() * q).sum();
    let mut d = vec![ZERO; n];
    for k in 0..n {
        d[k] = (0..y.nrows()).map(|i| x[i].conj() * y[(i, k)]).sum();
    }
    fft(&mut d);
    let inv = if norm.norm() > 0.0 { ONE / norm } else { ZERO };
    d.iter_mut().for_each(|z| *z *= inv);
    d
}

/// Weight direction `(S + εI)⁻¹·a`, or `a` for the matched filter.
fn loaded_solve(s: &DMatrix<C64>, a: &[C64], eps: EpsMode) -> Result<(Vec<C64>, bool)> {
    let load = match eps {
        EpsMode::Inf => return Ok((a.to_vec(), false)),
        EpsMode::Zero => return Ok(hermitian_solve(s, a)),
        EpsMode::Em => epsilon_m(s),
        EpsMode::EmScaled(k) => k * epsilon_m(s),
        EpsMode::Value(v) => v,
    };
    if !(load > 0.0) {
        return Ok(hermitian_solve(s, a));
    }
    let mut m = s.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += load;
    }
    Ok((lu_solve(&m, a)?, false))
}

/// STAP range spectrum with the loading picked by `eps`.
pub fn stap_range_spectrum(
    y_st: &DMatrix<C64>,
    a_st: &[C64],
    eps: EpsMode,
) -> Result<RangeSpectrum> {
    if a_st.len() != y_st.nrows() {
        return Err(Error::Dimension(format!(
            "steering of length {} for {} rows",
            a_st.len(),
            y_st.nrows()
        )));
    }
    if eps == EpsMode::Inf {
        return Ok(RangeSpectrum::from_values(combine(y_st, a_st, a_st), false));
    }
    stap_range_spectrum_with_cov(y_st, &interference_cov(y_st), a_st, eps)
}

/// STAP with a precomputed interference covariance, shared across targets.
pub fn stap_range_spectrum_with_cov(
    y_st: &DMatrix<C64>,
    cov: &DMatrix<C64>,
    a_st: &[C64],
    eps: EpsMode,
) -> Result<RangeSpectrum> {
    if a_st.len() != y_st.nrows() || cov.nrows() != y_st.nrows() {
        return Err(Error::Dimension(format!(
            "steering of length {} and covariance of order {} for {} rows",
            a_st.len(),
            cov.nrows(),
            y_st.nrows()
        )));
    }
    let (x, singular) = loaded_solve(cov, a_st, eps)?;
    Ok(RangeSpectrum::from_values(
        combine(y_st, &x, a_st),
        singular,
    ))
}

/// First row of `pinv([a_T, 1])`: passes `a_T` with unit gain and nulls
/// anything constant across occasions.
pub fn sthp_time_weights(a_t: &[C64]) -> Result<Vec<C64>> {
    let w = a_t.len();
    if w < 2 {
        return Err(Error::Dimension(
            "STHP needs at least two chirp occasions".into(),
        ));
    }
    let norm2: f64 = a_t.iter().map(|z| z.norm_sqr()).sum();
    let inner: C64 = a_t.iter().sum();
    if inner.norm_sqr() >= (1.0 - 1e-9) * norm2 * w as f64 {
        return Err(Error::CollinearTemporal(
            "the target's temporal signature matches a static scatterer".into(),
        ));
    }
    let m = DMatrix::from_fn(w, 2, |i, j| if j == 0 { a_t[i] } else { ONE });
    let p = pinv(&m)?;
    Ok(p.row(0).iter().copied().collect())
}

/// `Y_S = Σ_w w_T[w]·Y_w` (`L × N`).
pub fn sthp_time_combine(st: &SpaceTimeSnapshot, w_t: &[C64]) -> Result<DMatrix<C64>> {
    if w_t.len() != st.occasions {
        return Err(Error::Dimension(format!(
            "{} time weights for {} occasions",
            w_t.len(),
            st.occasions
        )));
    }
    let mut ys = DMatrix::from_element(st.elements, st.y.ncols(), ZERO);
    for (w, &g) in w_t.iter().enumerate() {
        ys += st.block(w) * g;
    }
    Ok(ys)
}

/// STHP range spectrum: temporal zero-forcing of static returns followed
/// by spatial combining with loading `eps` on `Y_S·Y_Sᴴ/N`.
pub fn sthp_range_spectrum(
    st: &SpaceTimeSnapshot,
    a_t: &[C64],
    a_s: &[C64],
    eps: EpsMode,
) -> Result<RangeSpectrum> {
    if a_s.len() != st.elements {
        return Err(Error::Dimension(format!(
            "spatial steering of length {} for {} elements",
            a_s.len(),
            st.elements
        )));
    }
    let w_t = sthp_time_weights(a_t)?;
    let ys = sthp_time_combine(st, &w_t)?;
    let (x, singular) = if eps == EpsMode::Inf {
        (a_s.to_vec(), false)
    } else {
        loaded_solve(&sample_covariance(&ys), a_s, eps)?
    };
    Ok(RangeSpectrum::from_values(combine(&ys, &x, a_s), singular))
}
