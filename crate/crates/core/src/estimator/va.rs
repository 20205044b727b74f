//! Virtual-aperture bookkeeping: stacking per-slot receive data into the
//! large virtual array and the per-slot Doppler phase that time division
//! leaves on it.

use nalgebra::DMatrix;

use crate::channel::IfCube;
use crate::linalg::{cis_cycles, C64, ZERO};
use crate::scene::ArrayGeometry;
use crate::{Error, Result};

/// Row of the processing array fed by slot `s` and receive element `l`.
pub fn effective_index(arr: &ArrayGeometry, slot: usize, rx: usize) -> usize {
    if arr.va_enabled {
        arr.virtual_index(slot, rx)
    } else {
        rx
    }
}

/// Stacks one `L × n` matrix per transmit slot (x-fastest over the small
/// array) into the `η_x·L_x · η_y·L_y × n` virtual-array matrix whose rows
/// follow the URA steering of the large array.
pub fn va_assemble(slots: &[DMatrix<C64>], arr: &ArrayGeometry) -> Result<DMatrix<C64>> {
    let want = arr.slots();
    if slots.len() != want {
        return Err(Error::Dimension(format!(
            "{} slot matrices given, {want} transmit slots expected",
            slots.len()
        )));
    }
    let l = arr.rx_count();
    let n = slots[0].ncols();
    if slots.iter().any(|m| m.nrows() != l || m.ncols() != n) {
        return Err(Error::Dimension(format!(
            "every slot matrix must be {l} × {n}"
        )));
    }
    let mut out = DMatrix::from_element(arr.effective_count(), n, ZERO);
    for (s, m) in slots.iter().enumerate() {
        for r in 0..l {
            out.set_row(effective_index(arr, s, r), &m.row(r));
        }
    }
    Ok(out)
}

/// Tone branch reorganised as `E × M_tone`, one column per tone PRI.
pub fn assemble_tone(cube: &IfCube, arr: &ArrayGeometry) -> Result<DMatrix<C64>> {
    check_cube(cube, arr)?;
    let slots = cube.slots();
    let mut out = DMatrix::from_element(arr.effective_count(), cube.tone_count(), ZERO);
    for i in 0..cube.tone_count() {
        for s in 0..slots {
            for l in 0..cube.rx_count() {
                out[(effective_index(arr, s, l), i)] = cube.tone[(l, i * slots + s)];
            }
        }
    }
    Ok(out)
}

/// Chirp occasion `w` as `E × N`.
pub fn assemble_chirp(cube: &IfCube, arr: &ArrayGeometry, occasion: usize) -> Result<DMatrix<C64>> {
    check_cube(cube, arr)?;
    let blocks: Vec<DMatrix<C64>> = (0..cube.slots())
        .map(|s| cube.chirp_block(occasion, s))
        .collect();
    va_assemble(&blocks, arr)
}

fn check_cube(cube: &IfCube, arr: &ArrayGeometry) -> Result<()> {
    if cube.rx_cols != arr.rx_cols || cube.rx_rows != arr.rx_rows || cube.slots() != arr.slots() {
        return Err(Error::Dimension(format!(
            "cube is {}×{} rx with {} slots, array expects {}×{} with {}",
            cube.rx_cols,
            cube.rx_rows,
            cube.slots(),
            arr.rx_cols,
            arr.rx_rows,
            arr.slots()
        )));
    }
    Ok(())
}

/// `exp(j2π·f_d·s(v)·T_sym)` for every row `v` of the processing array.
pub fn slot_phases(arr: &ArrayGeometry, doppler_hz: f64, symbol_s: f64) -> Vec<C64> {
    (0..arr.effective_count())
        .map(|v| cis_cycles(doppler_hz * arr.slot_of_effective(v) as f64 * symbol_s))
        .collect()
}
