//! Frequency-agile baseline: a nonuniform matched filter over range and
//! velocity per angle bin.

use nalgebra::DMatrix;

use crate::linalg::{cis_cycles, fft, fft2_inplace, C64, ZERO};
use crate::{Error, Result};

use super::map::{signed_bin, wrap_bin};

/// Range-velocity magnitudes of one angle bin, indexed `r·M + kv`.
///
/// Cell `(r, kv)` correlates the per-PRI measurements `z_m` (taken on
/// subcarrier `n_m`) against `exp(−j2π·n_m·r/N)·exp(j2π·kv·m/M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeDopplerMap {
    pub range_bins: usize,
    pub velocity_bins: usize,
    pub values: Vec<f64>,
}

impl RangeDopplerMap {
    pub fn get(&self, r: usize, kv: usize) -> f64 {
        self.values[r * self.velocity_bins + kv]
    }

    /// Strongest cell outside the `±guard` zero-velocity band.
    pub fn peak(&self, guard: usize) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for r in 0..self.range_bins {
            for kv in 0..self.velocity_bins {
                if signed_bin(kv, self.velocity_bins).unsigned_abs() as usize <= guard {
                    continue;
                }
                let v = self.get(r, kv);
                if best.is_none_or(|b| v > b.2) {
                    best = Some((r, kv, v));
                }
            }
        }
        best
    }
}

pub fn fa_range_doppler_map(
    z: &[C64],
    subcarriers: &[usize],
    range_bins: usize,
) -> Result<RangeDopplerMap> {
    let m = z.len();
    if subcarriers.len() != m {
        return Err(Error::Dimension(format!(
            "{m} measurements but {} subcarrier indices",
            subcarriers.len()
        )));
    }
    let mut values = vec![0.0; range_bins * m];
    let mut buf = vec![ZERO; m];
    for r in 0..range_bins {
        for (i, b) in buf.iter_mut().enumerate() {
            let turns = ((subcarriers[i] * r) % range_bins) as f64 / range_bins as f64;
            *b = z[i] * cis_cycles(turns);
        }
        fft(&mut buf);
        for (kv, b) in buf.iter().enumerate() {
            values[r * m + kv] = b.norm() / m as f64;
        }
    }
    Ok(RangeDopplerMap {
        range_bins,
        velocity_bins: m,
        values,
    })
}

/// Detection on the frequency-agile baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaPeak {
    pub ix: usize,
    pub iy: usize,
    pub range_bin: usize,
    pub iv: usize,
    pub magnitude: f64,
}

/// Spatial 2D FFT per PRI, a range-velocity map per angle bin, and the `k`
/// strongest angle bins with a ±1-bin exclusion zone.
pub fn fa_detect(
    tone: &DMatrix<C64>,
    cols: usize,
    rows: usize,
    subcarriers: &[usize],
    range_bins: usize,
    k: usize,
    guard: usize,
) -> Result<Vec<FaPeak>> {
    let (e, m) = tone.shape();
    if e != cols * rows {
        return Err(Error::Dimension(format!(
            "{e} rows cannot be laid out as {cols} × {rows}"
        )));
    }
    let mut spatial = vec![ZERO; e * m];
    for c in 0..m {
        let block = &mut spatial[c * e..(c + 1) * e];
        for (v, b) in block.iter_mut().enumerate() {
            *b = tone[(v, c)];
        }
        fft2_inplace(block, cols, rows);
    }
    let mut cands = Vec::with_capacity(e);
    for v in 0..e {
        let z: Vec<C64> = (0..m).map(|c| spatial[c * e + v]).collect();
        let map = fa_range_doppler_map(&z, subcarriers, range_bins)?;
        if let Some((r, kv, mag)) = map.peak(guard) {
            if mag > 0.0 {
                cands.push(FaPeak {
                    ix: v % cols,
                    iy: v / cols,
                    range_bin: r,
                    iv: kv,
                    magnitude: mag,
                });
            }
        }
    }
    cands.sort_by(|p, q| {
        q.magnitude
            .total_cmp(&p.magnitude)
            .then((p.iy, p.ix).cmp(&(q.iy, q.ix)))
    });
    let near = |a: usize, b: usize, len: usize| {
        let d = wrap_bin(a as i64 - b as i64, len);
        d <= 1 || d + 1 >= len
    };
    let mut out: Vec<FaPeak> = Vec::with_capacity(k);
    for c in cands {
        if out.len() == k {
            break;
        }
        if !out
            .iter()
            .any(|p| near(p.ix, c.ix, cols) && near(p.iy, c.iy, rows))
        {
            out.push(c);
        }
    }
    if out.len() < k {
        return Err(Error::NotEnoughPeaks {
            found: out.len(),
            wanted: k,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn measurements(subs: &[usize], n: usize, r: f64, kv: f64) -> Vec<C64> {
        let m = subs.len();
        subs.iter()
            .enumerate()
            .map(|(i, &s)| cis_cycles(-(s as f64) * r / n as f64 + kv * i as f64 / m as f64))
            .collect()
    }

    #[test]
    fn single_target_peaks_at_its_cell() {
        let (n, m) = (64, 32);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let subs: Vec<usize> = (0..m).map(|_| rng.random_range(0..n)).collect();
        let z = measurements(&subs, n, 23.0, 5.0);
        let map = fa_range_doppler_map(&z, &subs, n).unwrap();
        // exhaustive scan of the grid
        let mut best = (0, 0, 0.0);
        for r in 0..n {
            for kv in 0..m {
                if map.get(r, kv) > best.2 {
                    best = (r, kv, map.get(r, kv));
                }
            }
        }
        assert_eq!((best.0, best.1), (23, 5));
        assert!((best.2 - 1.0).abs() < 1e-12);
        assert_eq!(map.peak(1).map(|p| (p.0, p.1)), Some((23, 5)));
    }

    #[test]
    fn zero_measurements_give_a_zero_map() {
        let map = fa_range_doppler_map(&[ZERO; 8], &[1, 2, 3, 4, 5, 6, 7, 0], 16).unwrap();
        assert!(map.values.iter().all(|&v| v == 0.0));
        assert!(fa_range_doppler_map(&[ZERO; 3], &[1], 16).is_err());
    }

    #[test]
    fn detect_finds_angle_bin() {
        let (n, m, cols, rows) = (32, 16, 4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let subs: Vec<usize> = (0..m).map(|_| rng.random_range(0..n)).collect();
        let z = measurements(&subs, n, 9.0, -3.0);
        let a = crate::scene::steering_ura_sin(0.5, 1.0, cols, rows, 0.5, 0.5, 1.0);
        let tone = DMatrix::from_fn(cols * rows, m, |v, c| a[v] * z[c]);
        let p = fa_detect(&tone, cols, rows, &subs, n, 1, 1).unwrap();
        assert_eq!((p[0].ix, p[0].iy, p[0].range_bin, p[0].iv), (1, 1, 9, 13));
    }
}
