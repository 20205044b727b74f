//! Chirp generation through the OFDM path, sensing schedules and resource
//! overhead accounting.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{cis_cycles, fft, ifft, C64};
use crate::scene::{ArrayGeometry, RadioParams};
use crate::seed::rng_for;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChirpSpec {
    pub chirp_rate_hz_per_s: f64,
    pub symbol_duration_s: f64,
    pub num_samples: usize,
}

impl ChirpSpec {
    /// A chirp sweeping the whole band within one symbol (`μ = B/T_sym`).
    pub fn from_radio(radio: &RadioParams) -> Self {
        let t = radio.symbol_duration_s();
        ChirpSpec {
            chirp_rate_hz_per_s: radio.bandwidth_hz() / t,
            symbol_duration_s: t,
            num_samples: radio.num_subcarriers,
        }
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.chirp_rate_hz_per_s * self.symbol_duration_s
    }
}

/// `x[k] = exp(jπμ(k·T_sym/N)²)`.
///
/// When `μ·T_sym²` is an integer the phase is reduced exactly in integer
/// arithmetic, which keeps the samples at machine precision for long symbols.
pub fn chirp_time_samples(spec: &ChirpSpec) -> Vec<C64> {
    let n = spec.num_samples;
    let q = spec.chirp_rate_hz_per_s * spec.symbol_duration_s * spec.symbol_duration_s;
    let q_int = q.round();
    if q_int > 0.0 && (q - q_int).abs() <= 1e-9 * q && q_int < 1e12 {
        // phase = π q k² / N² = 2π (q k² mod 2N²) / (2N²)
        let q_int = q_int as u128;
        let modulus = 2 * (n as u128) * (n as u128);
        (0..n)
            .map(|k| {
                let k = k as u128;
                let r = (q_int * (k * k % modulus)) % modulus;
                cis_cycles(r as f64 / modulus as f64)
            })
            .collect()
    } else {
        (0..n)
            .map(|k| {
                let t = k as f64 * spec.symbol_duration_s / n as f64;
                cis_cycles(0.5 * spec.chirp_rate_hz_per_s * t * t)
            })
            .collect()
    }
}

/// Unitary DFT of one symbol: the OFDM subcarrier data that reproduces the
/// given time samples.
pub fn chirp_freq_coeffs(samples: &[C64]) -> Vec<C64> {
    let mut x = samples.to_vec();
    fft(&mut x);
    let s = 1.0 / (samples.len() as f64).sqrt();
    x.iter_mut().for_each(|z| *z *= s);
    x
}

/// OFDM synthesis of one symbol sampled at `t = k·T_sym/N`:
/// `x[k] = (1/√N) Σ_n X_n exp(j2π·n·Δf·t)`.
pub fn ofdm_symbol_samples(coeffs: &[C64]) -> Vec<C64> {
    let mut x = coeffs.to_vec();
    ifft(&mut x);
    let s = 1.0 / (coeffs.len() as f64).sqrt();
    x.iter_mut().for_each(|z| *z *= s);
    x
}

/// A single-tone symbol on subcarrier `n`.
pub fn tone_time_samples(subcarrier: usize, num_samples: usize) -> Vec<C64> {
    (0..num_samples)
        .map(|k| cis_cycles(((subcarrier * k) % num_samples) as f64 / num_samples as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    /// Frequency-agile: one random subcarrier per sensing symbol.
    Fa,
    /// One wideband chirp followed by single tones.
    Lshape,
    /// Several wideband chirps interleaved with single tones.
    Comb,
    /// A chirp in every sensing symbol.
    ConventionalChirp,
}

impl Structure {
    pub fn as_str(&self) -> &'static str {
        match self {
            Structure::Fa => "fa",
            Structure::Lshape => "lshape",
            Structure::Comb => "comb",
            Structure::ConventionalChirp => "conventional_chirp",
        }
    }
}

impl std::str::FromStr for Structure {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fa" => Ok(Structure::Fa),
            "lshape" => Ok(Structure::Lshape),
            "comb" => Ok(Structure::Comb),
            "conventional_chirp" => Ok(Structure::ConventionalChirp),
            _ => Err(format!("unknown structure `{s}`")),
        }
    }
}

/// Waveform part of a validated scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformParams {
    pub structure: Structure,
    /// Chirp PRI indices for comb; empty selects the default for L-shape.
    pub chirp_indices: Vec<usize>,
    pub tone_subcarrier: usize,
    pub guard_subcarriers: usize,
    /// Chirp symbols carry this multiple of the average power.
    pub chirp_power_factor: f64,
}

impl WaveformParams {
    pub fn with_structure(&self, structure: Structure) -> WaveformParams {
        let chirp_indices = match structure {
            Structure::Comb => self.chirp_indices.clone(),
            _ => Vec::new(),
        };
        WaveformParams {
            structure,
            chirp_indices,
            ..self.clone()
        }
    }
}

pub const DEFAULT_LSHAPE_INDEX: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SymbolKind {
    Chirp { occasion: usize },
    Tone { subcarrier: usize },
}

/// One sensing-bearing OFDM symbol of a schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingSymbol {
    pub pri: usize,
    pub slot: usize,
    pub kind: SymbolKind,
    pub power_w: f64,
    pub time_s: f64,
}

/// Fully resolved per-PRI sensing plan of one CPI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarsSchedule {
    pub structure: Structure,
    pub num_pri: usize,
    pub symbols_per_pri: usize,
    pub num_subcarriers: usize,
    pub chirp_pri_indices: Vec<usize>,
    pub tone_subcarrier: usize,
    pub guard_subcarriers: usize,
    /// Fraction of each PRI's symbols that carry sensing content.
    pub duty_ratio: f64,
    /// Per-PRI subcarrier for the frequency-agile structure.
    pub fa_subcarrier_indices: Vec<usize>,
    pub fa_seed: Option<u64>,
    /// Transmit element `[x, y]` active in each time-division slot.
    pub va_slots: Vec<[usize; 2]>,
    pub chirp_power_w: f64,
    pub tone_power_w: f64,
    pub avg_power_w: f64,
    pub pri_s: f64,
    pub symbol_s: f64,
}

impl MarsSchedule {
    pub fn slots(&self) -> usize {
        self.va_slots.len()
    }

    pub fn chirp_count(&self) -> usize {
        self.chirp_pri_indices.len()
    }

    pub fn is_chirp_pri(&self, m: usize) -> bool {
        self.chirp_pri_indices.binary_search(&m).is_ok()
    }

    /// PRIs carrying a single tone, in time order.
    pub fn tone_pri_indices(&self) -> Vec<usize> {
        (0..self.num_pri)
            .filter(|&m| !self.is_chirp_pri(m))
            .collect()
    }

    pub fn tone_subcarrier_at(&self, m: usize) -> usize {
        match self.structure {
            Structure::Fa => self.fa_subcarrier_indices[m],
            _ => self.tone_subcarrier,
        }
    }

    /// Start time of the chirp occasion `w`.
    pub fn chirp_time_s(&self, w: usize) -> f64 {
        self.chirp_pri_indices[w] as f64 * self.pri_s
    }

    pub fn slot_offset_s(&self, slot: usize) -> f64 {
        slot as f64 * self.symbol_s
    }

    /// Every sensing symbol of the CPI in transmission order.
    pub fn sensing_symbols(&self) -> Vec<SensingSymbol> {
        let mut out = Vec::with_capacity(self.num_pri * self.slots());
        let mut occasion = 0;
        for m in 0..self.num_pri {
            let chirp = self.is_chirp_pri(m);
            for s in 0..self.slots() {
                let kind = if chirp {
                    SymbolKind::Chirp { occasion }
                } else {
                    SymbolKind::Tone {
                        subcarrier: self.tone_subcarrier_at(m),
                    }
                };
                out.push(SensingSymbol {
                    pri: m,
                    slot: s,
                    kind,
                    power_w: if chirp {
                        self.chirp_power_w
                    } else {
                        self.tone_power_w
                    },
                    time_s: m as f64 * self.pri_s + self.slot_offset_s(s),
                });
            }
            if chirp {
                occasion += 1;
            }
        }
        out
    }

    /// Mean power over the sensing symbols.
    pub fn average_power_w(&self) -> f64 {
        let syms = self.sensing_symbols();
        syms.iter().map(|s| s.power_w).sum::<f64>() / syms.len() as f64
    }

    /// Unit-power baseband samples of a sensing symbol.
    pub fn symbol_samples(&self, sym: &SensingSymbol) -> Vec<C64> {
        match sym.kind {
            SymbolKind::Chirp { .. } => chirp_time_samples(&ChirpSpec {
                chirp_rate_hz_per_s: self.num_subcarriers as f64 / (self.symbol_s * self.symbol_s),
                symbol_duration_s: self.symbol_s,
                num_samples: self.num_subcarriers,
            }),
            SymbolKind::Tone { subcarrier } => tone_time_samples(subcarrier, self.num_subcarriers),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schedule serializes")
    }

    pub fn from_toml(text: &str) -> Result<MarsSchedule> {
        toml::from_str(text).map_err(|e| Error::config("schedule", e.to_string()))
    }
}

/// Resolves a sensing schedule. `fa_seed` drives the frequency-agile
/// subcarrier draw and is recorded in the schedule.
pub fn build_schedule(
    radio: &RadioParams,
    array: &ArrayGeometry,
    params: &WaveformParams,
    fa_seed: u64,
) -> Result<MarsSchedule> {
    let m = radio.num_pri;
    let n = radio.num_subcarriers;
    let slots = array.slots();
    if m == 0 {
        return Err(Error::Schedule("at least one PRI is required".into()));
    }
    if slots > radio.symbols_per_pri {
        return Err(Error::Schedule(format!(
            "{slots} time-division slots do not fit in {} symbols per PRI",
            radio.symbols_per_pri
        )));
    }
    if params.tone_subcarrier >= n {
        return Err(Error::Schedule(format!(
            "tone subcarrier {} outside 0..{n}",
            params.tone_subcarrier
        )));
    }
    let p_avg = radio.avg_tx_power_w;
    let va_slots = (0..slots)
        .map(|s| [s % array.tx_cols, s / array.tx_cols])
        .collect();

    let mut fa_subcarrier_indices = Vec::new();
    let mut fa_seed_used = None;
    let (chirp_pri_indices, chirp_power_w, tone_power_w) = match params.structure {
        Structure::Fa => {
            if array.va_enabled {
                return Err(Error::Schedule(
                    "frequency-agile structure cannot be combined with the virtual aperture".into(),
                ));
            }
            let mut rng = rng_for(fa_seed, "fa-subcarriers", &[]);
            fa_subcarrier_indices = (0..m).map(|_| rng.random_range(0..n)).collect();
            fa_seed_used = Some(fa_seed);
            (Vec::new(), 0.0, p_avg)
        }
        Structure::ConventionalChirp => ((0..m).collect(), p_avg, 0.0),
        Structure::Lshape | Structure::Comb => {
            let indices = if params.structure == Structure::Lshape {
                match params.chirp_indices.as_slice() {
                    [] => vec![DEFAULT_LSHAPE_INDEX],
                    [i] => vec![*i],
                    _ => {
                        return Err(Error::Schedule(
                            "L-shape carries exactly one chirp occasion".into(),
                        ))
                    }
                }
            } else {
                params.chirp_indices.clone()
            };
            if indices.is_empty() {
                return Err(Error::Schedule(
                    "comb needs at least one chirp index".into(),
                ));
            }
            if indices[0] == 0 {
                return Err(Error::Schedule(
                    "chirp index 0 has no preceding tone PRI for nearest-neighbour expansion"
                        .into(),
                ));
            }
            if indices.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Schedule(
                    "chirp indices must be strictly increasing".into(),
                ));
            }
            if let Some(&last) = indices.last() {
                if last >= m {
                    return Err(Error::Schedule(format!(
                        "chirp index {last} outside 0..{m}"
                    )));
                }
            }
            let w = indices.len() as f64;
            let factor = params.chirp_power_factor;
            if factor * w >= m as f64 {
                return Err(Error::Schedule(format!(
                    "chirp power factor {factor} × {w} chirps leaves no power for {m} PRIs"
                )));
            }
            let tone = (m as f64 - factor * w) / (m as f64 - w) * p_avg;
            (indices, factor * p_avg, tone)
        }
    };

    Ok(MarsSchedule {
        structure: params.structure,
        num_pri: m,
        symbols_per_pri: radio.symbols_per_pri,
        num_subcarriers: n,
        chirp_pri_indices,
        tone_subcarrier: params.tone_subcarrier,
        guard_subcarriers: params.guard_subcarriers,
        duty_ratio: slots as f64 / radio.symbols_per_pri as f64,
        fa_subcarrier_indices,
        fa_seed: fa_seed_used,
        va_slots,
        chirp_power_w,
        tone_power_w,
        avg_power_w: p_avg,
        pri_s: radio.pri_s,
        symbol_s: radio.symbol_duration_s(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub chirp_elements: usize,
    pub tone_elements: usize,
    pub total_elements: usize,
    pub fraction: f64,
}

/// Time-frequency resource elements used by sensing relative to the whole
/// CPI grid. A chirp symbol uses all `N` subcarriers; a tone symbol uses one
/// subcarrier plus its guard band on both sides.
pub fn overhead(schedule: &MarsSchedule) -> OverheadReport {
    let n = schedule.num_subcarriers;
    let slots = schedule.slots();
    let chirp_symbols = schedule.chirp_count() * slots;
    let tone_symbols = (schedule.num_pri - schedule.chirp_count()) * slots;
    let tone_width = match schedule.structure {
        Structure::Fa => 1,
        _ => 1 + 2 * schedule.guard_subcarriers,
    };
    let chirp_elements = chirp_symbols * n;
    let tone_elements = tone_symbols * tone_width;
    let total_elements = schedule.num_pri * schedule.symbols_per_pri * n;
    OverheadReport {
        chirp_elements,
        tone_elements,
        total_elements,
        fraction: (chirp_elements + tone_elements) as f64 / total_elements as f64,
    }
}

pub fn overhead_fraction(schedule: &MarsSchedule) -> f64 {
    overhead(schedule).fraction
}
