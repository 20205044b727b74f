//! Configuration files.
//!
//! Scenes are TOML with fixed sections. Unknown keys are rejected with their
//! full path. Physical quantities carry their unit in the key name
//! (`_dbm`, `_deg`, `_kmh`, `_m`, `_hz`, ...) and are converted to SI on
//! validation. [`SceneConfig::resolved`] fills every optional key with its
//! effective value so that a written-back config replays exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::ReceiverSettings;
use crate::clutter::{ClutterSettings, GtriParams};
use crate::estimator::{EpsMode, PipelineConfig, Refinement, Suppressor};
use crate::harness::{ExperimentPlan, SweepAxis, TargetDraw};
use crate::scene::{ArrayGeometry, RadioParams, Target, ValidatedScene};
use crate::waveform::{build_schedule, Structure, WaveformParams};
use crate::{Error, Result, SPEED_OF_LIGHT};

pub const REQUIRED_SECTIONS: [&str; 3] = ["radio", "array", "waveform"];

const PRESETS: [(&str, &str); 3] = [
    ("table1_car", include_str!("../presets/table1_car.toml")),
    ("table1_uav", include_str!("../presets/table1_uav.toml")),
    ("desk_small", include_str!("../presets/desk_small.toml")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn w_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default)]
    pub seed: u64,
    pub radio: RadioSection,
    pub array: ArraySection,
    pub waveform: WaveformSection,
    #[serde(default)]
    pub clutter: ClutterSection,
    #[serde(default)]
    pub receiver: ReceiverSettings,
    #[serde(default)]
    pub targets: Vec<TargetSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioSection {
    pub carrier_freq_hz: f64,
    pub subcarrier_spacing_hz: f64,
    pub num_subcarriers: usize,
    /// Checked against `N·Δf` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_hz: Option<f64>,
    pub symbols_per_pri: usize,
    /// Defaults to `symbols_per_pri / Δf`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pri_s: Option<f64>,
    pub num_pri: usize,
    /// Checked against `num_pri · pri_s` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpi_s: Option<f64>,
    pub avg_tx_power_dbm: f64,
    #[serde(default = "default_noise_density")]
    pub noise_density_dbm_per_hz: f64,
    #[serde(default = "default_si_attenuation")]
    pub si_attenuation_db: f64,
    #[serde(default = "default_uplink_power")]
    pub uplink_power_dbm: f64,
    #[serde(default = "default_uplink_distance")]
    pub uplink_distance_m: f64,
    #[serde(default)]
    pub tx_gain_dbi: f64,
    #[serde(default)]
    pub rx_gain_dbi: f64,
}

fn default_noise_density() -> f64 {
    -174.0
}
fn default_si_attenuation() -> f64 {
    50.0
}
fn default_uplink_power() -> f64 {
    23.0
}
fn default_uplink_distance() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySection {
    pub rx_cols: usize,
    pub rx_rows: usize,
    /// Defaults to half a wavelength.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rx_spacing_x_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rx_spacing_y_m: Option<f64>,
    #[serde(default = "one")]
    pub tx_cols: usize,
    #[serde(default = "one")]
    pub tx_rows: usize,
    #[serde(default)]
    pub va_enabled: bool,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformSection {
    pub structure: Structure,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chirp_indices: Option<Vec<usize>>,
    /// Defaults to the band centre `N/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tone_subcarrier: Option<usize>,
    #[serde(default)]
    pub guard_subcarriers: usize,
    #[serde(default = "default_chirp_factor")]
    pub chirp_power_factor: f64,
}

fn default_chirp_factor() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClutterSection {
    pub enabled: bool,
    pub terrain: String,
    pub extent_x_m: f64,
    pub extent_y_m: f64,
    pub cell_m: f64,
    pub station_height_m: f64,
    /// Overrides the terrain preset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gtri: Option<GtriParams>,
}

impl Default for ClutterSection {
    fn default() -> Self {
        ClutterSection {
            enabled: false,
            terrain: "grass_5ghz".into(),
            extent_x_m: 2000.0,
            extent_y_m: 1000.0,
            cell_m: 1.0,
            station_height_m: 10.0,
            gtri: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub range_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_mps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_kmh: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_x_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_y_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sin_psi_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sin_psi_y: Option<f64>,
    pub rcs_m2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Car,
    Uav,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_scenario")]
    pub scenario: Scenario,
    pub num_drops: usize,
    #[serde(default = "one")]
    pub targets_per_drop: usize,
    #[serde(default)]
    pub sweep_axis: SweepAxis,
    /// Range in metres or average transmit power in dBm.
    #[serde(default)]
    pub sweep_values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_min_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_max_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_min_kmh: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_max_kmh: Option<f64>,
    /// Largest `|sin ψ|` drawn on each axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sin_psi_max: Option<f64>,
    /// Target heights; when set, `sin ψy` follows from the geometry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_min_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_max_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rcs_m2: Option<f64>,
    #[serde(default = "one")]
    pub guard_bins: usize,
    #[serde(default = "one")]
    pub hit_tolerance_bins: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub pipelines: Vec<PipelineSection>,
}

fn default_scenario() -> Scenario {
    Scenario::Custom
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub structure: Structure,
    #[serde(default = "default_refinement")]
    pub refinement: String,
    #[serde(default = "default_music_factor")]
    pub music_factor: usize,
    #[serde(default = "default_suppressor")]
    pub suppressor: String,
    #[serde(default = "default_eps")]
    pub eps: EpsMode,
    /// Defaults to the scene's array setting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub va: Option<bool>,
}

fn default_refinement() -> String {
    "fft".into()
}
fn default_music_factor() -> usize {
    10
}
fn default_suppressor() -> String {
    "sthp".into()
}
fn default_eps() -> EpsMode {
    EpsMode::Inf
}

/// A parsed file together with its validated scene and experiment plan.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    /// Effective configuration with every default filled in.
    pub config: SceneConfig,
    pub scene: ValidatedScene,
    pub plan: Option<ExperimentPlan>,
}

impl LoadedConfig {
    pub fn config_hash(&self) -> String {
        config_hash(&self.config)
    }
}

/// SHA-256 of the canonical JSON form (keys sorted) of a config.
pub fn config_hash(config: &SceneConfig) -> String {
    let value = serde_json::to_value(config).expect("config serializes");
    let text = serde_json::to_string(&value).expect("json serializes");
    hex(&Sha256::digest(text.as_bytes()))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse_config_str(text: &str) -> Result<SceneConfig> {
    let table: toml::Table =
        toml::from_str(text).map_err(|e| Error::config("<root>", e.message().to_string()))?;
    let missing: Vec<&str> = REQUIRED_SECTIONS
        .iter()
        .copied()
        .filter(|s| !table.contains_key(*s))
        .collect();
    if !missing.is_empty() {
        return Err(Error::config(
            "<root>",
            format!("missing required sections: {}", missing.join(", ")),
        ));
    }
    let de = toml::Deserializer::parse(text)
        .map_err(|e| Error::config("<root>", e.message().to_string()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(path, e.into_inner().message().to_string())
    })
}

pub fn load_str(text: &str) -> Result<LoadedConfig> {
    let config = parse_config_str(text)?.resolved();
    let scene = config.to_validated()?;
    let plan = config
        .experiment
        .as_ref()
        .map(|e| e.to_plan(&scene, config.seed))
        .transpose()?;
    Ok(LoadedConfig {
        config,
        scene,
        plan,
    })
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)?;
    load_str(&text)
}

pub fn load_preset(name: &str) -> Result<LoadedConfig> {
    let text = preset_text(name).ok_or_else(|| {
        Error::config(
            "--preset",
            format!(
                "unknown preset `{name}` (known: {})",
                preset_names().join(", ")
            ),
        )
    })?;
    load_str(text)
}

impl SceneConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Copy with every defaulted optional key made explicit.
    pub fn resolved(&self) -> SceneConfig {
        let mut c = self.clone();
        let r = &mut c.radio;
        let lambda = SPEED_OF_LIGHT / r.carrier_freq_hz;
        if r.subcarrier_spacing_hz > 0.0 {
            r.bandwidth_hz
                .get_or_insert(r.num_subcarriers as f64 * r.subcarrier_spacing_hz);
            r.pri_s
                .get_or_insert(r.symbols_per_pri as f64 / r.subcarrier_spacing_hz);
        }
        if let Some(pri) = r.pri_s {
            r.cpi_s.get_or_insert(r.num_pri as f64 * pri);
        }
        c.array.rx_spacing_x_m.get_or_insert(lambda / 2.0);
        c.array.rx_spacing_y_m.get_or_insert(lambda / 2.0);
        let w = &mut c.waveform;
        w.tone_subcarrier.get_or_insert(c.radio.num_subcarriers / 2);
        match w.structure {
            Structure::Lshape => {
                w.chirp_indices
                    .get_or_insert(vec![crate::waveform::DEFAULT_LSHAPE_INDEX]);
            }
            Structure::Comb => {}
            _ => {
                w.chirp_indices.get_or_insert(Vec::new());
            }
        }
        if c.clutter.gtri.is_none() {
            c.clutter.gtri = GtriParams::preset(&c.clutter.terrain).ok();
        }
        if let Some(e) = c.experiment.as_mut() {
            e.resolve_defaults(c.seed, c.array.va_enabled);
        }
        c
    }

    /// Converts to SI and checks every invariant; all violations are
    /// reported together.
    pub fn to_validated(&self) -> Result<ValidatedScene> {
        let c = self.resolved();
        let mut errs = Vec::new();
        let r = &c.radio;
        if !(r.carrier_freq_hz > 0.0) {
            errs.push("radio.carrier_freq_hz must be positive".to_string());
        }
        if !(r.subcarrier_spacing_hz > 0.0) {
            errs.push("radio.subcarrier_spacing_hz must be positive".into());
        }
        if r.num_subcarriers < 2 {
            errs.push("radio.num_subcarriers must be at least 2".into());
        }
        let b = r.num_subcarriers as f64 * r.subcarrier_spacing_hz;
        if let Some(given) = r.bandwidth_hz {
            if (given - b).abs() > 1e-9 * b.abs().max(1.0) {
                errs.push(format!(
                    "radio.bandwidth_hz = {given} differs from N·Δf = {b}"
                ));
            }
        }
        if r.symbols_per_pri == 0 {
            errs.push("radio.symbols_per_pri must be at least 1".into());
        }
        if r.num_pri == 0 {
            errs.push("radio.num_pri must be at least 1".into());
        }
        let pri = r.pri_s.unwrap_or(0.0);
        let spp_time = r.symbols_per_pri as f64 / r.subcarrier_spacing_hz;
        if !(pri > 0.0) {
            errs.push("radio.pri_s must be positive".into());
        } else if (pri - spp_time).abs() > 1e-6 * pri {
            errs.push(format!(
                "radio.pri_s = {pri} s does not hold {} symbols of {} s",
                r.symbols_per_pri,
                1.0 / r.subcarrier_spacing_hz
            ));
        }
        if let Some(cpi) = r.cpi_s {
            let want = r.num_pri as f64 * pri;
            if (cpi - want).abs() > 1e-9 * want.max(1e-300) {
                errs.push(format!(
                    "radio.cpi_s = {cpi} differs from num_pri·pri_s = {want}"
                ));
            }
        }
        if !(r.si_attenuation_db >= 0.0) {
            errs.push("radio.si_attenuation_db must be non-negative".into());
        }
        if !(r.uplink_distance_m > 0.0) {
            errs.push("radio.uplink_distance_m must be positive".into());
        }
        for (name, v) in [
            ("avg_tx_power_dbm", r.avg_tx_power_dbm),
            ("noise_density_dbm_per_hz", r.noise_density_dbm_per_hz),
            ("uplink_power_dbm", r.uplink_power_dbm),
            ("tx_gain_dbi", r.tx_gain_dbi),
            ("rx_gain_dbi", r.rx_gain_dbi),
        ] {
            if !v.is_finite() {
                errs.push(format!("radio.{name} must be finite"));
            }
        }
        let radio = RadioParams {
            carrier_freq_hz: r.carrier_freq_hz,
            subcarrier_spacing_hz: r.subcarrier_spacing_hz,
            num_subcarriers: r.num_subcarriers,
            symbols_per_pri: r.symbols_per_pri,
            num_pri: r.num_pri,
            pri_s: pri,
            avg_tx_power_w: dbm_to_w(r.avg_tx_power_dbm),
            noise_density_w_per_hz: dbm_to_w(r.noise_density_dbm_per_hz),
            si_attenuation_db: r.si_attenuation_db,
            uplink_power_w: dbm_to_w(r.uplink_power_dbm),
            uplink_distance_m: r.uplink_distance_m,
            tx_gain: db_to_lin(r.tx_gain_dbi),
            rx_gain: db_to_lin(r.rx_gain_dbi),
        };

        let a = &c.array;
        if a.rx_cols == 0 || a.rx_rows == 0 {
            errs.push("array.rx_cols and array.rx_rows must be at least 1".into());
        }
        if a.tx_cols == 0 || a.tx_rows == 0 {
            errs.push("array.tx_cols and array.tx_rows must be at least 1".into());
        }
        let (dx, dy) = (
            a.rx_spacing_x_m.unwrap_or(0.0),
            a.rx_spacing_y_m.unwrap_or(0.0),
        );
        if !(dx > 0.0 && dy > 0.0) {
            errs.push("array spacings must be positive".into());
        }
        let array = ArrayGeometry {
            rx_cols: a.rx_cols,
            rx_rows: a.rx_rows,
            rx_spacing_x_m: dx,
            rx_spacing_y_m: dy,
            tx_cols: a.tx_cols,
            tx_rows: a.tx_rows,
            va_enabled: a.va_enabled,
        };

        let w = &c.waveform;
        let waveform = WaveformParams {
            structure: w.structure,
            chirp_indices: w.chirp_indices.clone().unwrap_or_default(),
            tone_subcarrier: w.tone_subcarrier.unwrap_or(0),
            guard_subcarriers: w.guard_subcarriers,
            chirp_power_factor: w.chirp_power_factor,
        };
        if matches!(w.structure, Structure::Comb | Structure::Lshape)
            && waveform.chirp_indices.first() == Some(&0)
        {
            errs.push(
                "waveform.chirp_indices: index 0 is not allowed (no preceding tone PRI)".into(),
            );
        }
        if w.structure == Structure::Comb && waveform.chirp_indices.is_empty() {
            errs.push("waveform.chirp_indices is required for the comb structure".into());
        }
        if !(w.chirp_power_factor > 0.0) {
            errs.push("waveform.chirp_power_factor must be positive".into());
        }

        let mut targets = Vec::new();
        for (i, t) in c.targets.iter().enumerate() {
            match t.to_target() {
                Ok(tt) => {
                    if let Err(e) = tt.check() {
                        errs.push(format!("targets[{i}]: {e}"));
                    }
                    targets.push(tt);
                }
                Err(e) => errs.push(format!("targets[{i}]: {e}")),
            }
        }

        let cl = &c.clutter;
        let gtri = match &cl.gtri {
            Some(g) => *g,
            None => match GtriParams::preset(&cl.terrain) {
                Ok(g) => g,
                Err(e) => {
                    errs.push(e.to_string());
                    GtriParams {
                        a: 0.0,
                        b: 1.0,
                        c: 0.0,
                        d: 0.0,
                        sigma_h_cm: 0.0,
                    }
                }
            },
        };
        if cl.enabled {
            if !(cl.station_height_m > 0.0) {
                errs.push("clutter.station_height_m must be positive".into());
            }
            if !(cl.cell_m > 0.0 && cl.extent_x_m > 0.0 && cl.extent_y_m > 0.0) {
                errs.push("clutter extents and cell size must be positive".into());
            }
        }
        let clutter = ClutterSettings {
            enabled: cl.enabled,
            terrain: cl.terrain.clone(),
            gtri,
            extent_x_m: cl.extent_x_m,
            extent_y_m: cl.extent_y_m,
            cell_m: cl.cell_m,
            station_height_m: cl.station_height_m,
        };

        let rx = &c.receiver;
        if rx.butterworth_order == 0 {
            errs.push("receiver.butterworth_order must be at least 1".into());
        }
        if let Some(fc) = rx.cutoff_hz {
            if !(fc > 0.0) {
                errs.push("receiver.cutoff_hz must be positive".into());
            }
        }
        if rx.uplink_sin_psi_x.powi(2) + rx.uplink_sin_psi_y.powi(2) > 1.0 {
            errs.push("receiver uplink direction has sin²ψx + sin²ψy > 1".into());
        }

        if errs.is_empty() {
            if let Err(e) = build_schedule(&radio, &array, &waveform, c.seed) {
                errs.push(e.to_string());
            }
        }
        if !errs.is_empty() {
            return Err(Error::Invalid(errs));
        }
        Ok(ValidatedScene {
            radio,
            array,
            waveform,
            clutter,
            receiver: rx.clone(),
            targets,
            seed: c.seed,
        })
    }
}

impl TargetSection {
    fn to_target(&self) -> std::result::Result<Target, String> {
        let v = match (self.velocity_mps, self.velocity_kmh) {
            (Some(v), None) => v,
            (None, Some(k)) => k / 3.6,
            (None, None) => 0.0,
            _ => return Err("give velocity_mps or velocity_kmh, not both".into()),
        };
        let axis = |deg: Option<f64>, sin: Option<f64>, name: &str| match (deg, sin) {
            (Some(d), None) => Ok(d.to_radians()),
            (None, Some(s)) if s.abs() <= 1.0 => Ok(s.asin()),
            (None, Some(s)) => Err(format!("sin_psi_{name} = {s} outside [-1, 1]")),
            (None, None) => Ok(0.0),
            _ => Err(format!("give psi_{name}_deg or sin_psi_{name}, not both")),
        };
        Ok(Target {
            range_m: self.range_m,
            radial_velocity_mps: v,
            psi_x_rad: axis(self.psi_x_deg, self.sin_psi_x, "x")?,
            psi_y_rad: axis(self.psi_y_deg, self.sin_psi_y, "y")?,
            rcs_m2: self.rcs_m2,
        })
    }
}

impl ExperimentSection {
    fn resolve_defaults(&mut self, scene_seed: u64, va: bool) {
        let (speeds, rcs, heights) = match self.scenario {
            Scenario::Car => ((5.0, 300.0), 100.0, Some((0.0, 0.0))),
            Scenario::Uav => ((5.0, 80.0), 0.02, Some((0.0, 100.0))),
            Scenario::Custom => ((5.0, 300.0), 100.0, None),
        };
        self.range_min_m.get_or_insert(100.0);
        self.range_max_m.get_or_insert(1000.0);
        self.speed_min_kmh.get_or_insert(speeds.0);
        self.speed_max_kmh.get_or_insert(speeds.1);
        self.rcs_m2.get_or_insert(rcs);
        if self.height_min_m.is_none() && self.height_max_m.is_none() {
            if let Some((lo, hi)) = heights {
                self.height_min_m = Some(lo);
                self.height_max_m = Some(hi);
            }
        }
        if self.height_min_m.is_none() {
            self.sin_psi_max.get_or_insert(0.5);
        } else {
            self.sin_psi_max.get_or_insert(0.7);
        }
        self.seed.get_or_insert(scene_seed);
        for p in &mut self.pipelines {
            p.va.get_or_insert(va && p.structure != Structure::Fa);
        }
    }

    fn to_plan(&self, scene: &ValidatedScene, scene_seed: u64) -> Result<ExperimentPlan> {
        let mut e = self.clone();
        e.resolve_defaults(scene_seed, scene.array.va_enabled);
        let mut errs = Vec::new();
        if e.targets_per_drop == 0 {
            errs.push("experiment.targets_per_drop must be at least 1".to_string());
        }
        if e.sweep_values.windows(2).any(|w| w[0] > w[1]) {
            errs.push("experiment.sweep_values must be sorted".into());
        }
        if e.sweep_axis != SweepAxis::None && e.sweep_values.is_empty() {
            errs.push("experiment.sweep_values is empty for a sweep".into());
        }
        let (rmin, rmax) = (e.range_min_m.unwrap(), e.range_max_m.unwrap());
        if !(rmin > 0.0 && rmax >= rmin) {
            errs.push("experiment range bounds must satisfy 0 < min ≤ max".into());
        }
        let (smin, smax) = (e.speed_min_kmh.unwrap(), e.speed_max_kmh.unwrap());
        if !(smin >= 0.0 && smax >= smin) {
            errs.push("experiment speed bounds must satisfy 0 ≤ min ≤ max".into());
        }
        let sin_max = e.sin_psi_max.unwrap();
        if !(sin_max > 0.0 && sin_max <= 1.0) {
            errs.push("experiment.sin_psi_max must lie in (0, 1]".into());
        }
        let height = match (e.height_min_m, e.height_max_m) {
            (Some(lo), Some(hi)) if hi >= lo => Some((lo, hi)),
            (None, None) => None,
            _ => {
                errs.push("experiment height bounds must both be given with min ≤ max".into());
                None
            }
        };
        let mut pipelines = Vec::new();
        for (i, p) in e.pipelines.iter().enumerate() {
            match p.to_pipeline() {
                Ok(pc) => pipelines.push(pc),
                Err(m) => errs.push(format!("experiment.pipelines[{i}]: {m}")),
            }
        }
        if pipelines.is_empty() {
            errs.push("experiment.pipelines must list at least one pipeline".into());
        }
        if !errs.is_empty() {
            return Err(Error::Invalid(errs));
        }
        Ok(ExperimentPlan {
            num_drops: e.num_drops,
            targets_per_drop: e.targets_per_drop,
            sweep_axis: e.sweep_axis,
            sweep_values: e.sweep_values.clone(),
            draw: TargetDraw {
                range_min_m: rmin,
                range_max_m: rmax,
                speed_min_mps: smin / 3.6,
                speed_max_mps: smax / 3.6,
                sin_psi_max: sin_max,
                height_m: height,
                station_height_m: scene.clutter.station_height_m,
                rcs_m2: e.rcs_m2.unwrap(),
            },
            pipelines,
            guard_bins: e.guard_bins,
            hit_tolerance_bins: e.hit_tolerance_bins,
            seed: e.seed.unwrap(),
        })
    }
}

impl PipelineSection {
    fn to_pipeline(&self) -> std::result::Result<PipelineConfig, String> {
        let refinement = match self.refinement.as_str() {
            "fft" => Refinement::Fft,
            "music" => {
                if self.music_factor == 0 {
                    return Err("music_factor must be at least 1".into());
                }
                Refinement::Music {
                    factor: self.music_factor,
                }
            }
            other => return Err(format!("unknown refinement `{other}` (fft, music)")),
        };
        let suppressor: Suppressor = self.suppressor.parse()?;
        let va = self.va.unwrap_or(false);
        if va && self.structure == Structure::Fa {
            return Err("the frequency-agile structure cannot use the virtual aperture".into());
        }
        let mut pc = PipelineConfig {
            label: String::new(),
            structure: self.structure,
            refinement,
            suppressor,
            eps: self.eps,
            va,
        };
        pc.label = self.label.clone().unwrap_or_else(|| pc.default_label());
        Ok(pc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table1_car_preset() {
        let lc = load_preset("table1_car").unwrap();
        let s = &lc.scene;
        assert_eq!(s.array.rx_count(), 64);
        assert_eq!(s.radio.num_pri, 500);
        assert!((s.radio.bandwidth_hz() - 122.88e6).abs() < 1e-3);
        assert!((w_to_dbm(s.radio.avg_tx_power_w) - 10.0).abs() < 1e-12);
        assert_eq!(s.waveform.chirp_indices, vec![1, 3, 6, 10]);
        assert!((s.radio.noise_density_w_per_hz - 10f64.powf(-20.4)).abs() < 1e-30);
        assert_eq!(s.receiver.butterworth_order, 5);
    }

    #[test]
    fn every_preset_validates() {
        for name in preset_names() {
            let lc = load_preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(lc.plan.is_some(), "{name} has no experiment");
        }
    }

    #[test]
    fn empty_file_lists_required_sections() {
        let err = parse_config_str("").unwrap_err().to_string();
        for s in REQUIRED_SECTIONS {
            assert!(err.contains(s), "{err}");
        }
    }

    #[test]
    fn key_typo_is_named() {
        let text = preset_text("desk_small")
            .unwrap()
            .replace("num_subcarriers", "num_subcarrier");
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("num_subcarrier"), "{err}");
        assert!(err.contains("radio"), "{err}");
    }

    #[test]
    fn boresight_target_is_valid_and_oversteered_is_not() {
        let base = preset_text("desk_small").unwrap();
        let ok =
            format!("{base}\n[[targets]]\nrange_m = 200.0\nvelocity_mps = 10.0\nrcs_m2 = 1.0\n");
        assert_eq!(load_str(&ok).unwrap().scene.targets.len(), 1);
        let bad = format!("{base}\n[[targets]]\nrange_m = 200.0\nsin_psi_x = 0.8\nsin_psi_y = 0.8\nrcs_m2 = 1.0\n");
        let err = load_str(&bad).unwrap_err().to_string();
        assert!(err.contains("exceeds 1"), "{err}");
    }

    #[test]
    fn violations_are_reported_together() {
        let text = preset_text("desk_small")
            .unwrap()
            .replace("chirp_indices = [1, 3, 6]", "chirp_indices = [0, 3, 6]")
            .replace(
                "num_subcarriers = 512",
                "num_subcarriers = 512\nbandwidth_hz = 1.0",
            );
        match load_str(&text).unwrap_err() {
            Error::Invalid(v) => {
                assert!(v.iter().any(|m| m.contains("index 0")), "{v:?}");
                assert!(v.iter().any(|m| m.contains("bandwidth")), "{v:?}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn resolved_config_round_trips_and_hash_ignores_key_order() {
        let lc = load_preset("desk_small").unwrap();
        let text = lc.config.to_toml();
        let again = load_str(&text).unwrap();
        assert_eq!(again.config, lc.config);
        assert_eq!(again.config_hash(), lc.config_hash());

        let a = "seed = 3\n[radio]\ncarrier_freq_hz = 5e9\nsubcarrier_spacing_hz = 60e3\nnum_subcarriers = 64\nsymbols_per_pri = 15\nnum_pri = 16\navg_tx_power_dbm = 20.0\n[array]\nrx_cols = 2\nrx_rows = 2\n[waveform]\nstructure = \"lshape\"\n";
        let b = "[waveform]\nstructure = \"lshape\"\n[array]\nrx_rows = 2\nrx_cols = 2\n[radio]\navg_tx_power_dbm = 20.0\nnum_pri = 16\nsymbols_per_pri = 15\nnum_subcarriers = 64\nsubcarrier_spacing_hz = 60e3\ncarrier_freq_hz = 5e9\n";
        let b = format!("seed = 3\n{b}");
        let ha = config_hash(&parse_config_str(a).unwrap().resolved());
        let hb = config_hash(&parse_config_str(&b).unwrap().resolved());
        assert_eq!(ha, hb);
    }
}
