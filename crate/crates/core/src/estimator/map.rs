//! Angle-velocity maps and coarse peak extraction.

use nalgebra::DMatrix;

use crate::linalg::{cis_cycles, fft, fft2_inplace, C64};
use crate::{Error, Result};

/// Signed FFT bin in `[−len/2, len/2)`.
pub fn signed_bin(k: usize, len: usize) -> i64 {
    let k = k as i64;
    let len = len as i64;
    if k >= len - len / 2 {
        k - len
    } else {
        k
    }
}

/// Position in `0..len` of a signed bin.
pub fn wrap_bin(b: i64, len: usize) -> usize {
    b.rem_euclid(len as i64) as usize
}

/// Bin-to-physical mapping of a map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapAxes {
    pub cols: usize,
    pub rows: usize,
    pub velocity_bins: usize,
    pub sin_step_x: f64,
    pub sin_step_y: f64,
    pub velocity_step_mps: f64,
    /// Doppler spacing of one velocity bin, `1/(M·T_PRI)`.
    pub doppler_step_hz: f64,
}

impl MapAxes {
    pub fn sin_x(&self, ix: usize) -> f64 {
        signed_bin(ix, self.cols) as f64 * self.sin_step_x
    }

    pub fn sin_y(&self, iy: usize) -> f64 {
        signed_bin(iy, self.rows) as f64 * self.sin_step_y
    }

    pub fn velocity(&self, iv: usize) -> f64 {
        signed_bin(iv, self.velocity_bins) as f64 * self.velocity_step_mps
    }

    pub fn doppler(&self, iv: usize) -> f64 {
        signed_bin(iv, self.velocity_bins) as f64 * self.doppler_step_hz
    }
}

/// Time-division slot and symbol length, used to remove the per-slot
/// Doppler phase after the velocity transform.
#[derive(Debug, Clone)]
pub struct SlotCompensation {
    pub slot_of_row: Vec<usize>,
    pub symbol_s: f64,
}

/// Unitary 3D spectrum indexed `(velocity, y, x)` with `x` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleVelocityMap {
    pub axes: MapAxes,
    pub values: Vec<C64>,
}

impl AngleVelocityMap {
    pub fn index(&self, ix: usize, iy: usize, iv: usize) -> usize {
        (iv * self.axes.rows + iy) * self.axes.cols + ix
    }

    pub fn magnitude(&self, ix: usize, iy: usize, iv: usize) -> f64 {
        self.values[self.index(ix, iy, iv)].norm()
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Velocity FFT along each row of `y` (`E × M`, rows in x-fastest URA
/// order) followed by a 2D spatial FFT per velocity bin.
pub fn angle_velocity_map(
    y: &DMatrix<C64>,
    axes: MapAxes,
    slot_comp: Option<&SlotCompensation>,
) -> Result<AngleVelocityMap> {
    let (e, m) = y.shape();
    if e != axes.cols * axes.rows {
        return Err(Error::Dimension(format!(
            "{e} rows cannot be laid out as {} × {}",
            axes.cols, axes.rows
        )));
    }
    if m != axes.velocity_bins {
        return Err(Error::Dimension(format!(
            "{m} columns but {} velocity bins",
            axes.velocity_bins
        )));
    }
    let scale = 1.0 / ((e * m) as f64).sqrt();
    let mut values = vec![C64::new(0.0, 0.0); e * m];
    let mut row = vec![C64::new(0.0, 0.0); m];
    for v in 0..e {
        for k in 0..m {
            row[k] = y[(v, k)];
        }
        fft(&mut row);
        for k in 0..m {
            let mut z = row[k] * scale;
            if let Some(sc) = slot_comp {
                z *= cis_cycles(-axes.doppler(k) * sc.slot_of_row[v] as f64 * sc.symbol_s);
            }
            values[k * e + v] = z;
        }
    }
    for k in 0..m {
        fft2_inplace(&mut values[k * e..(k + 1) * e], axes.cols, axes.rows);
    }
    Ok(AngleVelocityMap { axes, values })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPeak {
    pub ix: usize,
    pub iy: usize,
    pub iv: usize,
    pub magnitude: f64,
}

fn cyclic_close(a: usize, b: usize, len: usize) -> bool {
    let d = (a as i64 - b as i64).rem_euclid(len as i64);
    d <= 1 || d >= len as i64 - 1
}

/// The `k` strongest local maxima outside the `±guard` zero-velocity band,
/// selected greedily with a ±1-bin exclusion zone around each pick.
pub fn stte_peaks(map: &AngleVelocityMap, k: usize, guard: usize) -> Result<Vec<MapPeak>> {
    let a = map.axes;
    let (nx, ny, nv) = (a.cols, a.rows, a.velocity_bins);
    let mut cands = Vec::new();
    for iv in 0..nv {
        if signed_bin(iv, nv).unsigned_abs() as usize <= guard {
            continue;
        }
        for iy in 0..ny {
            for ix in 0..nx {
                let mag = map.magnitude(ix, iy, iv);
                let mut is_max = true;
                'nb: for dv in -1i64..=1 {
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            if dv == 0 && dy == 0 && dx == 0 {
                                continue;
                            }
                            let jx = wrap_bin(ix as i64 + dx, nx);
                            let jy = wrap_bin(iy as i64 + dy, ny);
                            let jv = wrap_bin(iv as i64 + dv, nv);
                            if map.magnitude(jx, jy, jv) > mag {
                                is_max = false;
                                break 'nb;
                            }
                        }
                    }
                }
                if is_max && mag > 0.0 {
                    cands.push(MapPeak {
                        ix,
                        iy,
                        iv,
                        magnitude: mag,
                    });
                }
            }
        }
    }
    cands.sort_by(|p, q| {
        q.magnitude
            .total_cmp(&p.magnitude)
            .then((p.iv, p.iy, p.ix).cmp(&(q.iv, q.iy, q.ix)))
    });
    let mut out: Vec<MapPeak> = Vec::with_capacity(k);
    for c in cands {
        if out.len() == k {
            break;
        }
        let blocked = out.iter().any(|p| {
            cyclic_close(p.ix, c.ix, nx)
                && cyclic_close(p.iy, c.iy, ny)
                && cyclic_close(p.iv, c.iv, nv)
        });
        if !blocked {
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
