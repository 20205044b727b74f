//! Detection stack: tone-branch angle-velocity map and peak extraction,
//! optional MUSIC refinement, then a per-target range spectrum from the
//! chirp branch.

pub mod compress;
pub mod fa;
pub mod map;
pub mod music;
pub mod stap;
pub mod va;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channel::IfCube;
use crate::linalg::{kron, C64, ZERO};
use crate::scene::{resolution_report, steering_effective, ArrayGeometry, RadioParams};
use crate::waveform::{MarsSchedule, Structure};
use crate::{Error, Result};

use map::{signed_bin, MapAxes, SlotCompensation};
use music::SpatialGrid;

/// Diagonal loading applied before the covariance inverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsMode {
    /// No loading; the eigenvalue pseudo-inverse covers singular cases.
    Zero,
    /// `ε = tr(S)/dim(S)`.
    Em,
    /// `ε → ∞`: the matched filter.
    Inf,
    /// A fixed `ε`.
    Value(f64),
    /// `k·tr(S)/dim(S)`.
    EmScaled(f64),
}

impl fmt::Display for EpsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsMode::Zero => f.write_str("zero"),
            EpsMode::Em => f.write_str("em"),
            EpsMode::Inf => f.write_str("inf"),
            EpsMode::Value(v) => write!(f, "{v}"),
            EpsMode::EmScaled(k) => write!(f, "em*{k}"),
        }
    }
}

impl FromStr for EpsMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "zero" => Ok(EpsMode::Zero),
            "em" => Ok(EpsMode::Em),
            "inf" => Ok(EpsMode::Inf),
            _ => {
                if let Some(k) = s.strip_prefix("em*") {
                    let k: f64 = k
                        .parse()
                        .map_err(|_| format!("bad loading multiplier in `{s}`"))?;
                    return if k > 0.0 {
                        Ok(EpsMode::EmScaled(k))
                    } else {
                        Err(format!("loading multiplier in `{s}` must be positive"))
                    };
                }
                match s.parse::<f64>() {
                    Ok(v) if v >= 0.0 && v.is_finite() => Ok(EpsMode::Value(v)),
                    _ => Err(format!(
                        "unknown eps mode `{s}` (zero, em, inf, em*<k>, or a number ≥ 0)"
                    )),
                }
            }
        }
    }
}

impl Serialize for EpsMode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            EpsMode::Value(v) => s.serialize_f64(*v),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for EpsMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => v.to_string().parse().map_err(serde::de::Error::custom),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Refinement {
    Fft,
    Music { factor: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suppressor {
    Stap,
    Sthp,
    #[serde(rename = "mf")]
    MatchedFilter,
}

impl Suppressor {
    pub fn as_str(&self) -> &'static str {
        match self {
            Suppressor::Stap => "stap",
            Suppressor::Sthp => "sthp",
            Suppressor::MatchedFilter => "mf",
        }
    }
}

impl FromStr for Suppressor {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "stap" => Ok(Suppressor::Stap),
            "sthp" => Ok(Suppressor::Sthp),
            "mf" => Ok(Suppressor::MatchedFilter),
            _ => Err(format!("unknown suppressor `{s}` (stap, sthp, mf)")),
        }
    }
}

/// One processing chain: waveform structure, angle/velocity refinement,
/// clutter suppressor with its loading, and virtual aperture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub label: String,
    pub structure: Structure,
    pub refinement: Refinement,
    pub suppressor: Suppressor,
    pub eps: EpsMode,
    pub va: bool,
}

impl PipelineConfig {
    pub fn default_label(&self) -> String {
        if self.structure == Structure::Fa {
            return "fa".into();
        }
        let mut s = format!("{}-{}", self.structure.as_str(), self.suppressor.as_str());
        if self.suppressor != Suppressor::MatchedFilter {
            s.push('-');
            s.push_str(&self.eps.to_string());
        }
        if let Refinement::Music { factor } = self.refinement {
            s.push_str(&format!("-music{factor}"));
        }
        if self.va {
            s.push_str("-va");
        }
        s
    }
}

/// Signed bin indices of an estimate; the range bin is in `0..N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimateBins {
    pub velocity: i64,
    pub angle_x: i64,
    pub angle_y: i64,
    pub range: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefinementTag {
    Fft,
    Music,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetEstimate {
    pub velocity_mps: f64,
    pub psi_x_rad: f64,
    pub psi_y_rad: f64,
    pub range_m: f64,
    pub amplitude: f64,
    pub bins: EstimateBins,
    pub refinement: RefinementTag,
    pub method: Suppressor,
    pub eps: EpsMode,
    /// The covariance was singular and its pseudo-inverse was used.
    pub pinv_used: bool,
}

impl TargetEstimate {
    pub fn sin_psi_x(&self) -> f64 {
        self.psi_x_rad.sin()
    }

    pub fn sin_psi_y(&self) -> f64 {
        self.psi_y_rad.sin()
    }
}

fn asin_clamped(s: f64) -> f64 {
    s.clamp(-1.0, 1.0).asin()
}

/// Bin-to-physical mapping of the processing array in `arr`.
pub fn map_axes(radio: &RadioParams, arr: &ArrayGeometry) -> MapAxes {
    let res = resolution_report(radio, arr);
    MapAxes {
        cols: arr.effective_cols(),
        rows: arr.effective_rows(),
        velocity_bins: radio.num_pri,
        sin_step_x: res.sin_angle_res_x,
        sin_step_y: res.sin_angle_res_y,
        velocity_step_mps: res.velocity_res_mps,
        doppler_step_hz: 1.0 / radio.cpi_s(),
    }
}

/// Expanded tone matrix `E × M` of a cube.
pub fn expanded_tone(
    cube: &IfCube,
    arr: &ArrayGeometry,
    schedule: &MarsSchedule,
) -> Result<DMatrix<C64>> {
    let ys2 = va::assemble_tone(cube, arr)?;
    compress::expand_nn(&ys2, &schedule.chirp_pri_indices, schedule.num_pri)
}

/// Chirp branch of a cube stacked as `W·E × N`.
pub fn space_time_snapshot(cube: &IfCube, arr: &ArrayGeometry) -> Result<stap::SpaceTimeSnapshot> {
    let e = arr.effective_count();
    let w = cube.chirp_occasions();
    let mut y = DMatrix::from_element(w * e, cube.samples, ZERO);
    for o in 0..w {
        let block = va::assemble_chirp(cube, arr, o)?;
        y.rows_mut(o * e, e).copy_from(&block);
    }
    Ok(stap::SpaceTimeSnapshot {
        y,
        occasions: w,
        elements: e,
    })
}

fn slot_compensation(arr: &ArrayGeometry, schedule: &MarsSchedule) -> Option<SlotCompensation> {
    (arr.slots() > 1).then(|| SlotCompensation {
        slot_of_row: (0..arr.effective_count())
            .map(|v| arr.slot_of_effective(v))
            .collect(),
        symbol_s: schedule.symbol_s,
    })
}

/// Runs one pipeline on a cube and returns `k` target estimates.
///
/// `array` must describe the processing array the cube was synthesized
/// with (its `va_enabled` flag selects the virtual aperture).
pub fn run_pipeline(
    cube: &IfCube,
    radio: &RadioParams,
    array: &ArrayGeometry,
    schedule: &MarsSchedule,
    cfg: &PipelineConfig,
    k: usize,
    guard: usize,
) -> Result<Vec<TargetEstimate>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    if array.va_enabled != cfg.va {
        return Err(Error::Dimension(format!(
            "pipeline `{}` expects va = {}, array has va = {}",
            cfg.label, cfg.va, array.va_enabled
        )));
    }
    if schedule.structure != cfg.structure {
        return Err(Error::Dimension(format!(
            "pipeline `{}` expects a {} schedule, got {}",
            cfg.label,
            cfg.structure.as_str(),
            schedule.structure.as_str()
        )));
    }
    match cfg.structure {
        Structure::ConventionalChirp => Err(Error::Unsupported(
            "the conventional chirp structure has no tone branch to extract angle and velocity from".into(),
        )),
        Structure::Fa => run_fa(cube, radio, array, schedule, cfg, k, guard),
        Structure::Lshape | Structure::Comb => run_mars(cube, radio, array, schedule, cfg, k, guard),
    }
}

fn run_fa(
    cube: &IfCube,
    radio: &RadioParams,
    array: &ArrayGeometry,
    schedule: &MarsSchedule,
    cfg: &PipelineConfig,
    k: usize,
    guard: usize,
) -> Result<Vec<TargetEstimate>> {
    if cfg.va {
        return Err(Error::Unsupported(
            "the frequency-agile baseline runs without the virtual aperture".into(),
        ));
    }
    if matches!(cfg.refinement, Refinement::Music { .. }) {
        return Err(Error::Unsupported(
            "MUSIC refinement is not defined for the frequency-agile baseline".into(),
        ));
    }
    let tone = va::assemble_tone(cube, array)?;
    let subs: Vec<usize> = cube
        .tone_pri_indices
        .iter()
        .map(|&m| schedule.tone_subcarrier_at(m))
        .collect();
    let axes = map_axes(radio, array);
    let range_res = resolution_report(radio, array).range_res_m;
    let peaks = fa::fa_detect(
        &tone,
        axes.cols,
        axes.rows,
        &subs,
        radio.num_subcarriers,
        k,
        guard,
    )?;
    Ok(peaks
        .into_iter()
        .map(|p| TargetEstimate {
            velocity_mps: axes.velocity(p.iv),
            psi_x_rad: asin_clamped(axes.sin_x(p.ix)),
            psi_y_rad: asin_clamped(axes.sin_y(p.iy)),
            range_m: p.range_bin as f64 * range_res,
            amplitude: p.magnitude,
            bins: EstimateBins {
                velocity: signed_bin(p.iv, axes.velocity_bins),
                angle_x: signed_bin(p.ix, axes.cols),
                angle_y: signed_bin(p.iy, axes.rows),
                range: p.range_bin,
            },
            refinement: RefinementTag::Fft,
            method: Suppressor::MatchedFilter,
            eps: EpsMode::Inf,
            pinv_used: false,
        })
        .collect())
}

fn run_mars(
    cube: &IfCube,
    radio: &RadioParams,
    array: &ArrayGeometry,
    schedule: &MarsSchedule,
    cfg: &PipelineConfig,
    k: usize,
    guard: usize,
) -> Result<Vec<TargetEstimate>> {
    let lambda = radio.wavelength_m();
    let axes = map_axes(radio, array);
    let y_e2 = expanded_tone(cube, array, schedule)?;
    let comp = slot_compensation(array, schedule);
    let avm = map::angle_velocity_map(&y_e2, axes, comp.as_ref())?;
    let peaks = map::stte_peaks(&avm, k, guard)?;

    let st = space_time_snapshot(cube, array)?;
    if st.occasions == 0 {
        return Err(Error::Schedule(
            "no chirp occasions to estimate range from".into(),
        ));
    }
    let times: Vec<f64> = (0..schedule.chirp_count())
        .map(|w| schedule.chirp_time_s(w))
        .collect();
    let eps = if cfg.suppressor == Suppressor::MatchedFilter {
        EpsMode::Inf
    } else {
        cfg.eps
    };
    let cov = (cfg.suppressor == Suppressor::Stap && eps != EpsMode::Inf)
        .then(|| stap::interference_cov(&st.y));
    let range_res = resolution_report(radio, array).range_res_m;

    let grid = SpatialGrid {
        cols: axes.cols,
        rows: axes.rows,
        spacing_x_m: array.rx_spacing_x_m,
        spacing_y_m: array.rx_spacing_y_m,
        wavelength_m: lambda,
        sin_step_x: axes.sin_step_x,
        sin_step_y: axes.sin_step_y,
    };

    let mut out = Vec::with_capacity(k);
    for p in peaks {
        let (mut sx, mut sy, mut fd) = (axes.sin_x(p.ix), axes.sin_y(p.iy), axes.doppler(p.iv));
        let tag = match cfg.refinement {
            Refinement::Fft => RefinementTag::Fft,
            Refinement::Music { factor } => {
                let phases = va::slot_phases(array, fd, schedule.symbol_s);
                let derot = DMatrix::from_fn(y_e2.nrows(), y_e2.ncols(), |v, m| {
                    y_e2[(v, m)] * phases[v].conj()
                });
                (sx, sy) = music::spatial_music(&derot, &grid, (sx, sy), k, factor)?;
                fd =
                    music::temporal_music(&y_e2, radio.pri_s, fd, axes.doppler_step_hz, k, factor)?;
                RefinementTag::Music
            }
        };
        let slot = va::slot_phases(array, fd, schedule.symbol_s);
        let a_s: Vec<C64> = steering_effective(array, sx, sy, lambda)
            .into_iter()
            .zip(&slot)
            .map(|(a, p)| a * p)
            .collect();
        let a_t = stap::temporal_steering(fd, &times);
        let spec = match cfg.suppressor {
            Suppressor::Sthp => {
                stap::sthp_range_spectrum(&st, &a_t, &a_s, eps).map_err(|e| match e {
                    Error::CollinearTemporal(_) => Error::CollinearTemporal(format!(
                        "velocity {:.3} m/s aliases to a static signature",
                        radio.velocity_from_doppler(fd)
                    )),
                    other => other,
                })?
            }
            Suppressor::Stap | Suppressor::MatchedFilter => {
                let a_st = kron(&a_t, &a_s);
                match &cov {
                    Some(c) => stap::stap_range_spectrum_with_cov(&st.y, c, &a_st, eps)?,
                    None => stap::stap_range_spectrum(&st.y, &a_st, EpsMode::Inf)?,
                }
            }
        };
        out.push(TargetEstimate {
            velocity_mps: radio.velocity_from_doppler(fd),
            psi_x_rad: asin_clamped(sx),
            psi_y_rad: asin_clamped(sy),
            range_m: spec.peak_bin as f64 * range_res,
            amplitude: spec.peak_magnitude(),
            bins: EstimateBins {
                velocity: signed_bin(p.iv, axes.velocity_bins),
                angle_x: signed_bin(p.ix, axes.cols),
                angle_y: signed_bin(p.iy, axes.rows),
                range: spec.peak_bin,
            },
            refinement: tag,
            method: cfg.suppressor,
            eps,
            pinv_used: spec.pinv_used,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps_mode_text_round_trip() {
        for (s, m) in [
            ("zero", EpsMode::Zero),
            ("em", EpsMode::Em),
            ("inf", EpsMode::Inf),
            ("em*1000", EpsMode::EmScaled(1000.0)),
            ("0.5", EpsMode::Value(0.5)),
        ] {
            assert_eq!(s.parse::<EpsMode>().unwrap(), m);
            assert_eq!(m.to_string().parse::<EpsMode>().unwrap(), m);
        }
        assert!("-1".parse::<EpsMode>().is_err());
        assert!("huge".parse::<EpsMode>().is_err());
    }

    #[test]
    fn eps_mode_serde_accepts_numbers_and_names() {
        let v: Vec<EpsMode> = serde_json::from_str(r#"["zero", 2.5, "em*10"]"#).unwrap();
        assert_eq!(
            v,
            vec![EpsMode::Zero, EpsMode::Value(2.5), EpsMode::EmScaled(10.0)]
        );
        assert_eq!(serde_json::to_string(&EpsMode::Inf).unwrap(), "\"inf\"");
    }

    #[test]
    fn labels() {
        let mut pc = PipelineConfig {
            label: String::new(),
            structure: Structure::Comb,
            refinement: Refinement::Fft,
            suppressor: Suppressor::Sthp,
            eps: EpsMode::Inf,
            va: true,
        };
        assert_eq!(pc.default_label(), "comb-sthp-inf-va");
        pc.refinement = Refinement::Music { factor: 10 };
        pc.va = false;
        assert_eq!(pc.default_label(), "comb-sthp-inf-music10");
        pc.structure = Structure::Fa;
        assert_eq!(pc.default_label(), "fa");
        assert_eq!(
            "mf".parse::<Suppressor>().unwrap(),
            Suppressor::MatchedFilter
        );
        assert!("capon".parse::<Suppressor>().is_err());
    }
}
