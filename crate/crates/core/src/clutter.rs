//! GTRI ground clutter: area reflectivity, the per-cell patch field around
//! the station and its aggregation into a (range bin × virtual element)
//! amplitude table.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{cis_cycles, C64, ZERO};
use crate::scene::{received_power, ArrayGeometry, LinkKind, RadioParams};
use crate::seed::rng_for;
use crate::{Error, Result, SPEED_OF_LIGHT};

const GTRI_PRESETS: &str = include_str!("../presets/gtri.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtriParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub sigma_h_cm: f64,
}

impl GtriParams {
    pub fn preset(name: &str) -> Result<GtriParams> {
        let table: toml::Table = toml::from_str(GTRI_PRESETS)
            .map_err(|e| Error::config("gtri presets", e.to_string()))?;
        let entry = table.get(name).ok_or_else(|| {
            let known: Vec<&str> = table.keys().map(String::as_str).collect();
            Error::config(
                "clutter.terrain",
                format!(
                    "unknown terrain preset `{name}` (known: {})",
                    known.join(", ")
                ),
            )
        })?;
        entry
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(format!("gtri.{name}"), e.to_string()))
    }

    pub fn preset_names() -> Vec<String> {
        toml::from_str::<toml::Table>(GTRI_PRESETS)
            .map(|t| t.keys().cloned().collect())
            .unwrap_or_default()
    }
}

/// Area reflectivity `σ⁰ = A(δ + C)^B · exp(−D / (1 + 0.1σ_h/λ))`.
pub fn gtri_reflectivity(grazing_rad: f64, p: &GtriParams, wavelength_m: f64) -> Result<f64> {
    let base = grazing_rad + p.c;
    if base < 0.0 && p.b.fract() != 0.0 {
        return Err(Error::NegativeBase {
            base,
            exponent: p.b,
        });
    }
    Ok(p.a * base.powf(p.b) * (-p.d / (1.0 + 0.1 * p.sigma_h_cm / wavelength_m)).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClutterSettings {
    pub enabled: bool,
    pub terrain: String,
    pub gtri: GtriParams,
    /// Cross-range extent, centred on the station.
    pub extent_x_m: f64,
    /// Down-range extent in front of the station.
    pub extent_y_m: f64,
    pub cell_m: f64,
    pub station_height_m: f64,
}

impl ClutterSettings {
    pub fn grid_dims(&self) -> (usize, usize) {
        (
            (self.extent_x_m / self.cell_m).round() as usize,
            (self.extent_y_m / self.cell_m).round() as usize,
        )
    }
}

/// One ground cell after geometry and link budget, at unit transmit power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Patch {
    pub bin: u32,
    pub sin_x: f64,
    pub sin_y: f64,
    /// Echo amplitude with its random phase.
    pub amp: C64,
}

/// Every cell of the clutter grid that lands inside the receive window.
/// Cell phases are uniform and drawn from one seeded stream per grid row.
pub fn clutter_patches(
    settings: &ClutterSettings,
    radio: &RadioParams,
    seed: u64,
) -> Result<Vec<Patch>> {
    if !(settings.station_height_m > 0.0) {
        return Err(Error::Invalid(vec![format!(
            "station height {} m must be positive for the grazing-angle model",
            settings.station_height_m
        )]));
    }
    if !(settings.cell_m > 0.0) {
        return Err(Error::Invalid(vec![
            "clutter cell size must be positive".into()
        ]));
    }
    let (nx, ny) = settings.grid_dims();
    let h = settings.station_height_m;
    let lambda = radio.wavelength_m();
    let range_res = SPEED_OF_LIGHT / (2.0 * radio.bandwidth_hz());
    let n_bins = radio.num_subcarriers;
    let cell_area = settings.cell_m * settings.cell_m;

    let rows: Vec<Result<Vec<Patch>>> = (0..ny)
        .into_par_iter()
        .map(|iy| {
            let mut rng = rng_for(seed, "clutter-phase", &[iy as u64]);
            let y = (iy as f64 + 0.5) * settings.cell_m;
            let mut row = Vec::with_capacity(nx);
            for ix in 0..nx {
                let phase: f64 = rng.random();
                let x = -settings.extent_x_m / 2.0 + (ix as f64 + 0.5) * settings.cell_m;
                let ground = x.hypot(y);
                let slant = ground.hypot(h);
                let bin = (slant / range_res).round();
                if bin >= n_bins as f64 {
                    continue;
                }
                let grazing = h.atan2(ground);
                let sigma0 = gtri_reflectivity(grazing, &settings.gtri, lambda)?;
                let rcs = sigma0 * cell_area;
                if !(rcs > 0.0) {
                    continue;
                }
                let p = received_power(
                    LinkKind::Radar,
                    1.0,
                    radio.tx_gain,
                    radio.rx_gain,
                    lambda,
                    slant,
                    Some(rcs),
                )?;
                row.push(Patch {
                    bin: bin as u32,
                    sin_x: x / slant,
                    sin_y: -h / slant,
                    amp: cis_cycles(phase) * p.sqrt(),
                });
            }
            Ok(row)
        })
        .collect();
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// Clutter aggregated per (range bin, element of the full virtual array) at
/// unit transmit power. Scale amplitudes by `√P` for a given symbol power.
#[derive(Debug, Clone, PartialEq)]
pub struct ClutterMap {
    pub range_bins: usize,
    pub cols: usize,
    pub rows: usize,
    /// Bin-major: entry `bin * cols * rows + element`.
    pub table: Vec<C64>,
    pub patch_count: usize,
    pub settings: ClutterSettings,
}

impl ClutterMap {
    pub fn elements(&self) -> usize {
        self.cols * self.rows
    }

    pub fn get(&self, bin: usize, element: usize) -> C64 {
        self.table[bin * self.elements() + element]
    }

    /// Amplitudes of one virtual element across all range bins.
    pub fn element_column(&self, element: usize) -> Vec<C64> {
        let e = self.elements();
        (0..self.range_bins)
            .map(|b| self.table[b * e + element])
            .collect()
    }

    /// `Σ_e |table[bin, e]|²` for each bin.
    pub fn power_per_bin(&self) -> Vec<f64> {
        self.table
            .chunks(self.elements())
            .map(|row| row.iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }
}

pub fn aggregate_patches(
    patches: &[Patch],
    range_bins: usize,
    array: &ArrayGeometry,
    wavelength_m: f64,
) -> Vec<C64> {
    let cols = array.full_virtual_cols();
    let rows = array.full_virtual_rows();
    let dx = array.rx_spacing_x_m / wavelength_m;
    let dy = array.rx_spacing_y_m / wavelength_m;
    let parts: Vec<Vec<C64>> = (0..rows)
        .into_par_iter()
        .map(|iy| {
            let mut part = vec![ZERO; range_bins * cols];
            for p in patches {
                let step = cis_cycles(dx * p.sin_x);
                let mut cur = p.amp * cis_cycles(iy as f64 * dy * p.sin_y);
                let base = p.bin as usize * cols;
                for ix in 0..cols {
                    part[base + ix] += cur;
                    cur *= step;
                }
            }
            part
        })
        .collect();
    let e = cols * rows;
    let mut table = vec![ZERO; range_bins * e];
    for (iy, part) in parts.iter().enumerate() {
        for b in 0..range_bins {
            table[b * e + iy * cols..b * e + (iy + 1) * cols]
                .copy_from_slice(&part[b * cols..(b + 1) * cols]);
        }
    }
    table
}

/// Builds the aggregated clutter table over the full virtual array so the
/// same map serves processing with and without the virtual aperture.
pub fn build_clutter_map(
    settings: &ClutterSettings,
    radio: &RadioParams,
    array: &ArrayGeometry,
    seed: u64,
) -> Result<ClutterMap> {
    let patches = clutter_patches(settings, radio, seed)?;
    let table = aggregate_patches(&patches, radio.num_subcarriers, array, radio.wavelength_m());
    Ok(ClutterMap {
        range_bins: radio.num_subcarriers,
        cols: array.full_virtual_cols(),
        rows: array.full_virtual_rows(),
        table,
        patch_count: patches.len(),
        settings: settings.clone(),
    })
}
