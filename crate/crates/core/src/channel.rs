//! IF-domain synthesis of the two receive branches.
//!
//! Echoes are written directly in their post-mixing form: a chirp echo
//! becomes a beat tone at `τ·B` cycles per symbol, a single-tone echo becomes
//! one complex value per PRI after integrate-and-hold. Clutter comes from the
//! aggregated [`ClutterMap`], scaled by the symbol power.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clutter::ClutterMap;
use crate::linalg::{cis_cycles, fft, ifft, C64, ZERO};
use crate::scene::{
    received_power, steering_full_virtual, steering_ura_sin, LinkKind, ValidatedScene,
};
use crate::seed::rng_for;
use crate::waveform::MarsSchedule;
use crate::{Error, Result, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverSettings {
    pub butterworth_order: u32,
    /// Low-pass cutoff of the tone branch; `None` picks half the spacing
    /// between the tone and the first data subcarrier.
    pub cutoff_hz: Option<f64>,
    /// Mean subtraction per chirp symbol on the chirp branch.
    pub dcoc: bool,
    /// Leftover self-interference after DCOC, dB relative to the SI power.
    pub residual_dc_db: Option<f64>,
    /// Removal of the per-element mean across PRIs on the tone branch.
    pub tone_dc_removal: bool,
    /// Keep the Doppler phase progression inside each symbol.
    pub exact_doppler: bool,
    pub noise: bool,
    pub self_interference: bool,
    pub uplink: bool,
    pub uplink_sin_psi_x: f64,
    pub uplink_sin_psi_y: f64,
}

impl Default for ReceiverSettings {
    fn default() -> Self {
        ReceiverSettings {
            butterworth_order: 5,
            cutoff_hz: None,
            dcoc: true,
            residual_dc_db: None,
            tone_dc_removal: true,
            exact_doppler: false,
            noise: true,
            self_interference: true,
            uplink: true,
            uplink_sin_psi_x: 0.3,
            uplink_sin_psi_y: 0.0,
        }
    }
}

impl ReceiverSettings {
    /// Everything but the echoes switched off.
    pub fn clean() -> Self {
        ReceiverSettings {
            noise: false,
            self_interference: false,
            uplink: false,
            ..Default::default()
        }
    }
}

/// `|H(f)|²` of an analog Butterworth low-pass.
pub fn butterworth_power_gain(freq_hz: f64, cutoff_hz: f64, order: u32) -> f64 {
    1.0 / (1.0 + (freq_hz / cutoff_hz).abs().powi(2 * order as i32))
}

pub fn default_cutoff_hz(guard_subcarriers: usize, spacing_hz: f64) -> f64 {
    (guard_subcarriers as f64 + 1.0) * spacing_hz / 2.0
}

/// Fraction of a flat uplink OFDM signal that survives the tone-branch
/// low-pass: `(1/N)·Σ |H((n − n_st)Δf)|²` over the data subcarriers.
pub fn uplink_leakage_fraction(
    num_subcarriers: usize,
    tone_subcarrier: usize,
    guard: usize,
    spacing_hz: f64,
    order: u32,
    cutoff_hz: f64,
) -> f64 {
    let n = num_subcarriers as i64;
    let mut acc = 0.0;
    for k in 0..n {
        let mut off = (k - tone_subcarrier as i64).rem_euclid(n);
        if off >= n - n / 2 {
            off -= n;
        }
        if off.unsigned_abs() as usize <= guard {
            continue;
        }
        acc += butterworth_power_gain(off as f64 * spacing_hz, cutoff_hz, order);
    }
    acc / num_subcarriers as f64
}

/// Sampled receiver output of one CPI.
///
/// The chirp branch holds `L` rows and `W·S·N` columns ordered
/// `(occasion, slot, sample)`; the tone branch holds `L` rows and
/// `M_tone·S` columns ordered `(tone PRI, slot)`. `S` is the number of
/// time-division transmit slots (1 without the virtual aperture).
#[derive(Debug, Clone, PartialEq)]
pub struct IfCube {
    pub rx_cols: usize,
    pub rx_rows: usize,
    pub slot_cols: usize,
    pub slot_rows: usize,
    pub samples: usize,
    pub chirp_pri_indices: Vec<usize>,
    pub tone_pri_indices: Vec<usize>,
    pub sample_rate_hz: f64,
    pub chirp: DMatrix<C64>,
    pub tone: DMatrix<C64>,
}

impl IfCube {
    pub fn rx_count(&self) -> usize {
        self.rx_cols * self.rx_rows
    }

    pub fn slots(&self) -> usize {
        self.slot_cols * self.slot_rows
    }

    pub fn chirp_occasions(&self) -> usize {
        self.chirp_pri_indices.len()
    }

    pub fn tone_count(&self) -> usize {
        self.tone_pri_indices.len()
    }

    /// `L × N` samples of one chirp occasion and slot.
    pub fn chirp_block(&self, occasion: usize, slot: usize) -> DMatrix<C64> {
        let n = self.samples;
        let start = (occasion * self.slots() + slot) * n;
        self.chirp.columns(start, n).into_owned()
    }

    /// `L` values of one tone PRI (by position among tone PRIs) and slot.
    pub fn tone_column(&self, tone_idx: usize, slot: usize) -> Vec<C64> {
        self.tone
            .column(tone_idx * self.slots() + slot)
            .iter()
            .copied()
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.chirp
            .iter()
            .chain(self.tone.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

struct Echo {
    amp: f64,
    carrier_cycles: f64,
    delay_s: f64,
    beat_bins: f64,
    doppler_hz: f64,
    steer: Vec<C64>,
}

fn echoes(scene: &ValidatedScene) -> Result<Vec<Echo>> {
    let radio = &scene.radio;
    let lambda = radio.wavelength_m();
    let t_sym = radio.symbol_duration_s();
    scene
        .targets
        .iter()
        .map(|t| {
            let tau = 2.0 * t.range_m / SPEED_OF_LIGHT;
            if tau >= t_sym {
                return Err(Error::RangeAliased {
                    range_m: t.range_m,
                    max_range_m: radio.max_range_m(),
                });
            }
            let p = received_power(
                LinkKind::Radar,
                1.0,
                radio.tx_gain,
                radio.rx_gain,
                lambda,
                t.range_m,
                Some(t.rcs_m2),
            )?;
            let carrier = radio.carrier_freq_hz * tau;
            Ok(Echo {
                amp: p.sqrt(),
                carrier_cycles: -(carrier - carrier.floor()),
                delay_s: tau,
                beat_bins: tau * radio.bandwidth_hz(),
                doppler_hz: radio.doppler_hz(t.radial_velocity_mps),
                steer: steering_full_virtual(&scene.array, t.sin_psi_x(), t.sin_psi_y(), lambda),
            })
        })
        .collect()
}

/// `(1/N)·Σ_k exp(j2π f_d k / B)`: the in-symbol Doppler smearing of an
/// integrated tone.
pub fn doppler_dirichlet(doppler_hz: f64, num_samples: usize, sample_rate_hz: f64) -> C64 {
    let step = doppler_hz / sample_rate_hz;
    let mut acc = ZERO;
    for k in 0..num_samples {
        acc += cis_cycles(step * k as f64);
    }
    acc / num_samples as f64
}

fn complex_normal<R: Rng>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

fn si_phases(seed: u64, count: usize) -> Vec<C64> {
    let mut rng = rng_for(seed, "si-phase", &[]);
    (0..count)
        .map(|_| cis_cycles(rng.random::<f64>()))
        .collect()
}

struct Plan<'a> {
    scene: &'a ValidatedScene,
    schedule: &'a MarsSchedule,
    echoes: Vec<Echo>,
    slots: usize,
    rx: usize,
    n: usize,
    fs: f64,
}

impl<'a> Plan<'a> {
    fn new(scene: &'a ValidatedScene, schedule: &'a MarsSchedule) -> Result<Self> {
        let slots = scene.array.slots();
        if schedule.slots() != slots {
            return Err(Error::Dimension(format!(
                "schedule has {} slots, array has {slots}",
                schedule.slots()
            )));
        }
        if schedule.num_subcarriers != scene.radio.num_subcarriers
            || schedule.num_pri != scene.radio.num_pri
        {
            return Err(Error::Dimension(
                "schedule does not match the radio parameters".into(),
            ));
        }
        Ok(Plan {
            scene,
            schedule,
            echoes: echoes(scene)?,
            slots,
            rx: scene.array.rx_count(),
            n: scene.radio.num_subcarriers,
            fs: scene.radio.bandwidth_hz(),
        })
    }

    fn si_amp(&self, power_w: f64) -> f64 {
        if self.scene.receiver.self_interference {
            (power_w * 10f64.powf(-self.scene.radio.si_attenuation_db / 10.0)).sqrt()
        } else {
            0.0
        }
    }

    /// Integrated tone-branch value of all echoes (without the `N` factor)
    /// for receive element `l`, slot `s` of PRI `m` on subcarrier `sub`.
    fn tone_echo(
        &self,
        m: usize,
        s: usize,
        l: usize,
        sub: usize,
        clutter_n: Option<&[Vec<C64>]>,
    ) -> C64 {
        let sch = self.schedule;
        let arr = &self.scene.array;
        let v = arr.virtual_index(s, l);
        let t = m as f64 * sch.pri_s + sch.slot_offset_s(s);
        let amp = sch.tone_power_w.sqrt();
        let mut acc = ZERO;
        for e in &self.echoes {
            let mut z = cis_cycles(
                e.carrier_cycles - sub as f64 * self.scene.radio.subcarrier_spacing_hz * e.delay_s
                    + e.doppler_hz * t,
            ) * e.steer[v]
                * e.amp;
            if self.scene.receiver.exact_doppler {
                z *= doppler_dirichlet(e.doppler_hz, self.n, self.fs);
            }
            acc += z;
        }
        if let Some(cn) = clutter_n {
            acc += cn[v][sub];
        }
        acc * amp
    }
}

/// Forward DFT of every clutter-table column: entry `[v][n]` is the
/// clutter seen by virtual element `v` on subcarrier `n` at unit power.
fn clutter_tone_table(clutter: &ClutterMap) -> Vec<Vec<C64>> {
    (0..clutter.elements())
        .into_par_iter()
        .map(|v| {
            let mut col = clutter.element_column(v);
            fft(&mut col);
            col
        })
        .collect()
}

fn check_clutter(scene: &ValidatedScene, clutter: Option<&ClutterMap>) -> Result<()> {
    if let Some(c) = clutter {
        if c.range_bins != scene.radio.num_subcarriers
            || c.cols != scene.array.full_virtual_cols()
            || c.rows != scene.array.full_virtual_rows()
        {
            return Err(Error::Dimension(format!(
                "clutter map is {}×{}×{}, scene needs {}×{}×{}",
                c.range_bins,
                c.cols,
                c.rows,
                scene.radio.num_subcarriers,
                scene.array.full_virtual_cols(),
                scene.array.full_virtual_rows()
            )));
        }
    }
    Ok(())
}

/// Synthesizes both receive branches of one CPI. Every random stream
/// (noise, SI phases, uplink symbols) is derived from `seed`, so the output
/// does not depend on thread scheduling.
pub fn synthesize_if_cube(
    scene: &ValidatedScene,
    schedule: &MarsSchedule,
    clutter: Option<&ClutterMap>,
    seed: u64,
) -> Result<IfCube> {
    check_clutter(scene, clutter)?;
    let plan = Plan::new(scene, schedule)?;
    let (rx, slots, n) = (plan.rx, plan.slots, plan.n);
    let radio = &scene.radio;
    let recv = &scene.receiver;
    let arr = &scene.array;
    let si = si_phases(seed, rx);

    // chirp branch
    let w_count = schedule.chirp_count();
    let chirp_cols = w_count * slots * n;
    let clutter_time: Option<Vec<Vec<C64>>> = clutter.filter(|_| w_count > 0).map(|c| {
        (0..c.elements())
            .into_par_iter()
            .map(|v| {
                let mut col = c.element_column(v);
                ifft(&mut col);
                col
            })
            .collect()
    });
    let p_chirp = schedule.chirp_power_w;
    let chirp_amp = p_chirp.sqrt();
    let chirp_si = plan.si_amp(p_chirp);
    let residual = recv
        .residual_dc_db
        .map(|db| 10f64.powf(db / 20.0))
        .unwrap_or(0.0);
    let chirp_noise_var = radio.noise_density_w_per_hz * radio.bandwidth_hz();
    let chirp_rows: Vec<Vec<C64>> = (0..rx)
        .into_par_iter()
        .map(|l| {
            let mut rng = rng_for(seed, "chirp-noise", &[l as u64]);
            let mut row = vec![ZERO; chirp_cols];
            for w in 0..w_count {
                for s in 0..slots {
                    let v = arr.virtual_index(s, l);
                    let t0 = schedule.chirp_time_s(w) + schedule.slot_offset_s(s);
                    let buf = &mut row[(w * slots + s) * n..(w * slots + s + 1) * n];
                    for e in &plan.echoes {
                        let base = e.carrier_cycles + e.doppler_hz * t0;
                        let step = e.beat_bins / n as f64
                            + if recv.exact_doppler {
                                e.doppler_hz / plan.fs
                            } else {
                                0.0
                            };
                        let g = e.steer[v] * (e.amp * chirp_amp);
                        for (k, y) in buf.iter_mut().enumerate() {
                            *y += g * cis_cycles(base + step * k as f64);
                        }
                    }
                    if let Some(ct) = &clutter_time {
                        for (y, c) in buf.iter_mut().zip(&ct[v]) {
                            *y += c * chirp_amp;
                        }
                    }
                    let si_val = si[l] * chirp_si;
                    for y in buf.iter_mut() {
                        *y += si_val;
                    }
                    if recv.noise {
                        for y in buf.iter_mut() {
                            *y += complex_normal(&mut rng, chirp_noise_var);
                        }
                    }
                    if recv.dcoc {
                        let mean = buf.iter().sum::<C64>() / n as f64;
                        for y in buf.iter_mut() {
                            *y += si_val * residual - mean;
                        }
                    }
                }
            }
            row
        })
        .collect();

    // tone branch
    let tone_pris = schedule.tone_pri_indices();
    let m_tone = tone_pris.len();
    let tone_cols = m_tone * slots;
    let clutter_n = clutter.filter(|_| m_tone > 0).map(clutter_tone_table);
    let nf = n as f64;
    let tone_si = plan.si_amp(schedule.tone_power_w);
    let tone_noise_var = nf * nf * radio.noise_density_w_per_hz / radio.pri_s;
    let uplink: Option<(Vec<C64>, Vec<C64>)> = if recv.uplink && m_tone > 0 {
        let cutoff = recv.cutoff_hz.unwrap_or_else(|| {
            default_cutoff_hz(schedule.guard_subcarriers, radio.subcarrier_spacing_hz)
        });
        let leak = uplink_leakage_fraction(
            n,
            schedule.tone_subcarrier,
            schedule.guard_subcarriers,
            radio.subcarrier_spacing_hz,
            recv.butterworth_order,
            cutoff,
        );
        let p_up = received_power(
            LinkKind::Comm,
            radio.uplink_power_w,
            1.0,
            radio.rx_gain,
            radio.wavelength_m(),
            radio.uplink_distance_m,
            None,
        )?;
        let mut rng = rng_for(seed, "uplink", &[]);
        let amp = nf * (p_up * leak).sqrt();
        let draws = (0..tone_cols)
            .map(|_| complex_normal(&mut rng, 1.0) * amp)
            .collect();
        let steer = steering_ura_sin(
            recv.uplink_sin_psi_x,
            recv.uplink_sin_psi_y,
            arr.rx_cols,
            arr.rx_rows,
            arr.rx_spacing_x_m,
            arr.rx_spacing_y_m,
            radio.wavelength_m(),
        );
        Some((draws, steer))
    } else {
        None
    };
    let tone_rows: Vec<Vec<C64>> = (0..rx)
        .into_par_iter()
        .map(|l| {
            let mut rng = rng_for(seed, "tone-noise", &[l as u64]);
            let mut row = vec![ZERO; tone_cols];
            for (i, &m) in tone_pris.iter().enumerate() {
                let sub = schedule.tone_subcarrier_at(m);
                for s in 0..slots {
                    let c = i * slots + s;
                    let mut y = plan.tone_echo(m, s, l, sub, clutter_n.as_deref()) * nf;
                    y += si[l] * tone_si * nf;
                    if let Some((draws, steer)) = &uplink {
                        y += draws[c] * steer[l];
                    }
                    if recv.noise {
                        y += complex_normal(&mut rng, tone_noise_var);
                    }
                    row[c] = y;
                }
            }
            if recv.tone_dc_removal && m_tone > 0 {
                for s in 0..slots {
                    let mean = (0..m_tone).map(|i| row[i * slots + s]).sum::<C64>() / m_tone as f64;
                    for i in 0..m_tone {
                        row[i * slots + s] -= mean;
                    }
                }
            }
            row
        })
        .collect();

    let (slot_cols, slot_rows) = if arr.va_enabled {
        (arr.tx_cols, arr.tx_rows)
    } else {
        (1, 1)
    };
    Ok(IfCube {
        rx_cols: arr.rx_cols,
        rx_rows: arr.rx_rows,
        slot_cols,
        slot_rows,
        samples: n,
        chirp_pri_indices: schedule.chirp_pri_indices.clone(),
        tone_pri_indices: tone_pris,
        sample_rate_hz: plan.fs,
        chirp: DMatrix::from_fn(rx, chirp_cols, |r, c| chirp_rows[r][c]),
        tone: DMatrix::from_fn(rx, tone_cols, |r, c| tone_rows[r][c]),
    })
}

/// Noiseless tone-branch samples before integrate-and-hold:
/// `L × (M_tone·S·N)`, columns ordered `(tone PRI, slot, sample)`. Doppler
/// is applied per sample, so the column sums equal the exact-Doppler
/// integrated branch.
pub fn synthesize_tone_raw(
    scene: &ValidatedScene,
    schedule: &MarsSchedule,
    clutter: Option<&ClutterMap>,
    seed: u64,
) -> Result<DMatrix<C64>> {
    check_clutter(scene, clutter)?;
    let plan = Plan::new(scene, schedule)?;
    let (rx, slots, n) = (plan.rx, plan.slots, plan.n);
    let arr = &scene.array;
    let si = si_phases(seed, rx);
    let tone_si = plan.si_amp(schedule.tone_power_w);
    let clutter_n = clutter.map(clutter_tone_table);
    let tone_pris = schedule.tone_pri_indices();
    let amp = schedule.tone_power_w.sqrt();
    let spacing = scene.radio.subcarrier_spacing_hz;
    let mut out = DMatrix::from_element(rx, tone_pris.len() * slots * n, ZERO);
    for l in 0..rx {
        for (i, &m) in tone_pris.iter().enumerate() {
            let sub = schedule.tone_subcarrier_at(m);
            for s in 0..slots {
                let v = arr.virtual_index(s, l);
                let t = m as f64 * schedule.pri_s + schedule.slot_offset_s(s);
                let fixed = clutter_n.as_ref().map_or(ZERO, |c| c[v][sub]) * amp + si[l] * tone_si;
                for k in 0..n {
                    let tk = t + k as f64 / plan.fs;
                    let mut y = fixed;
                    for e in &plan.echoes {
                        y += cis_cycles(
                            e.carrier_cycles - sub as f64 * spacing * e.delay_s + e.doppler_hz * tk,
                        ) * e.steer[v]
                            * (e.amp * amp);
                    }
                    out[(l, (i * slots + s) * n + k)] = y;
                }
            }
        }
    }
    Ok(out)
}
