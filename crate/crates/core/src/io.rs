//! Binary cube files, CSV tables and run manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::IfCube;
use crate::config::hex;
use crate::harness::{CurveRow, DropReport};
use crate::linalg::C64;
use crate::{Error, Result};

pub const CUBE_MAGIC: &[u8; 8] = b"MARSCUBE";
pub const CUBE_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_matrix(out: &mut Vec<u8>, m: &DMatrix<C64>) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
}

/// Serializes a cube: magic, version, the dimensions `L, W, N, M_tone`,
/// slot and receive grid shapes, sample rate, chirp PRI indices, then both
/// branches as row-major little-endian `(re, im)` pairs, chirp first.
pub fn encode_cube(cube: &IfCube) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(64 + 16 * (cube.chirp.len() + cube.tone.len()));
    out.extend_from_slice(CUBE_MAGIC);
    out.extend_from_slice(&CUBE_VERSION.to_le_bytes());
    for v in [
        cube.rx_count(),
        cube.chirp_occasions(),
        cube.samples,
        cube.tone_count(),
        cube.slot_cols,
        cube.slot_rows,
        cube.rx_cols,
        cube.rx_rows,
    ] {
        put_u32(&mut out, v)?;
    }
    out.extend_from_slice(&cube.sample_rate_hz.to_le_bytes());
    for &i in &cube.chirp_pri_indices {
        put_u32(&mut out, i)?;
    }
    put_matrix(&mut out, &cube.chirp);
    put_matrix(&mut out, &cube.tone);
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| {
                Error::Format(format!("truncated at byte {} (needed {n} more)", self.pos))
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DMatrix<C64>> {
        let bytes = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(16))
            .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
        let raw = self.take(bytes)?;
        let mut vals = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mut m = DMatrix::from_element(rows, cols, C64::new(0.0, 0.0));
        for r in 0..rows {
            for c in 0..cols {
                let re = vals.next().unwrap();
                let im = vals.next().unwrap();
                m[(r, c)] = C64::new(re, im);
            }
        }
        Ok(m)
    }
}

pub fn decode_cube(bytes: &[u8]) -> Result<IfCube> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != CUBE_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = r.u32()? as u32;
    if version != CUBE_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let l = r.u32()?;
    let w = r.u32()?;
    let n = r.u32()?;
    let m_tone = r.u32()?;
    let slot_cols = r.u32()?;
    let slot_rows = r.u32()?;
    let rx_cols = r.u32()?;
    let rx_rows = r.u32()?;
    if rx_cols * rx_rows != l {
        return Err(Error::Format(format!(
            "{rx_cols}×{rx_rows} receive grid but L = {l}"
        )));
    }
    let sample_rate_hz = r.f64()?;
    let chirp_pri_indices = (0..w).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    if chirp_pri_indices.windows(2).any(|p| p[0] >= p[1])
        || chirp_pri_indices.last().is_some_and(|&i| i >= w + m_tone)
    {
        return Err(Error::Format(
            "chirp PRI indices must increase and stay below W + M_tone".into(),
        ));
    }
    let slots = slot_cols * slot_rows;
    let tone_pri_indices = (0..w + m_tone)
        .filter(|m| chirp_pri_indices.binary_search(m).is_err())
        .collect();
    let chirp = r.matrix(l, w * slots * n)?;
    let tone = r.matrix(l, m_tone * slots)?;
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok(IfCube {
        rx_cols,
        rx_rows,
        slot_cols,
        slot_rows,
        samples: n,
        chirp_pri_indices,
        tone_pri_indices,
        sample_rate_hz,
        chirp,
        tone,
    })
}

pub fn write_cube(path: &Path, cube: &IfCube) -> Result<()> {
    fs::write(path, encode_cube(cube)?)?;
    Ok(())
}

pub fn read_cube(path: &Path) -> Result<IfCube> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    decode_cube(&buf)
}

/// Scientific notation with the shortest round-trip digits.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// A CSV table built in memory; every value is written verbatim.
#[derive(Debug, Clone, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut c = Csv::default();
        c.row(header.iter().map(|s| s.to_string()));
        c
    }

    pub fn row(&mut self, fields: impl IntoIterator<Item = String>) {
        let fields: Vec<String> = fields.into_iter().collect();
        let _ = writeln!(self.text, "{}", fields.join(","));
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

pub const CURVE_COLUMNS: [&str; 7] = [
    "sweep_value",
    "pipeline",
    "metric",
    "value",
    "ci95",
    "drops",
    "targets",
];

pub fn curves_csv(rows: &[CurveRow]) -> String {
    let mut csv = Csv::new(&CURVE_COLUMNS);
    for r in rows {
        csv.row([
            opt(r.sweep_value),
            r.pipeline.clone(),
            r.metric.clone(),
            opt(r.value),
            opt(r.ci),
            r.drops.to_string(),
            r.targets.to_string(),
        ]);
    }
    csv.into_string()
}

pub const DROP_COLUMNS: [&str; 21] = [
    "pipeline",
    "sweep_index",
    "drop_index",
    "seed",
    "target",
    "truth_range_m",
    "truth_velocity_mps",
    "truth_sin_psi_x",
    "truth_sin_psi_y",
    "est_range_m",
    "est_velocity_mps",
    "est_sin_psi_x",
    "est_sin_psi_y",
    "offset_range_bins",
    "offset_velocity_bins",
    "offset_angle_x_bins",
    "offset_angle_y_bins",
    "hit",
    "shared_bin",
    "pinv_used",
    "failure",
];

pub fn drops_csv(drops: &[DropReport]) -> String {
    let mut csv = Csv::new(&DROP_COLUMNS);
    for d in drops {
        for (i, r) in d.records.iter().enumerate() {
            let e = r.estimate.as_ref();
            let o = r.offsets;
            csv.row([
                d.pipeline.clone(),
                d.sweep_index.to_string(),
                d.drop_index.to_string(),
                d.seed.to_string(),
                i.to_string(),
                num(r.truth.range_m),
                num(r.truth.radial_velocity_mps),
                num(r.truth.sin_psi_x()),
                num(r.truth.sin_psi_y()),
                opt(e.map(|e| e.range_m)),
                opt(e.map(|e| e.velocity_mps)),
                opt(e.map(|e| e.sin_psi_x())),
                opt(e.map(|e| e.sin_psi_y())),
                opt(o.map(|o| o.range)),
                opt(o.map(|o| o.velocity)),
                opt(o.map(|o| o.angle_x)),
                opt(o.map(|o| o.angle_y)),
                (r.hit as u8).to_string(),
                (r.shared_bin as u8).to_string(),
                e.map(|e| (e.pinv_used as u8).to_string())
                    .unwrap_or_default(),
                d.failure.clone().unwrap_or_default().replace(',', ";"),
            ]);
        }
    }
    csv.into_string()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Everything needed to rerun a command and check its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub command: String,
    /// Command options other than the configuration and output directory.
    pub args: BTreeMap<String, String>,
    /// Effective configuration (all defaults resolved) as TOML.
    pub config_toml: String,
    pub config_hash: String,
    pub seed: u64,
    pub timings_s: BTreeMap<String, f64>,
    pub outputs: Vec<OutputEntry>,
}

impl RunManifest {
    pub fn new(command: &str, config_toml: String, config_hash: String, seed: u64) -> Self {
        RunManifest {
            manifest_version: 1,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args: BTreeMap::new(),
            config_toml,
            config_hash,
            seed,
            timings_s: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    /// Writes `bytes` under `dir` and records the file.
    pub fn write_output(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
        let mut f = fs::File::create(dir.join(name))?;
        f.write_all(bytes)?;
        self.outputs.push(OutputEntry {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("manifest {}: {e}", path.display())))
    }
}
