//! Radio, array and target descriptions, steering vectors, resolution and
//! link-budget formulas.
//!
//! Angles are the per-axis ULA angles `ψx`, `ψy`: the direction vector from
//! the array to a target is `[sin ψx, sin ψy, √(1 − sin²ψx − sin²ψy)]`.
//! Everything below works in SI units.

use serde::{Deserialize, Serialize};

use crate::channel::ReceiverSettings;
use crate::clutter::ClutterSettings;
use crate::config::SceneConfig;
use crate::linalg::{cis_cycles, kron, C64};
use crate::waveform::WaveformParams;
use crate::{Error, Result, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub carrier_freq_hz: f64,
    pub subcarrier_spacing_hz: f64,
    pub num_subcarriers: usize,
    /// OFDM symbols per pulse repetition interval.
    pub symbols_per_pri: usize,
    /// Number of PRIs in one coherent processing interval (`M`).
    pub num_pri: usize,
    pub pri_s: f64,
    pub avg_tx_power_w: f64,
    pub noise_density_w_per_hz: f64,
    /// Self-interference power below the transmit power, dB.
    pub si_attenuation_db: f64,
    pub uplink_power_w: f64,
    pub uplink_distance_m: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
}

impl RadioParams {
    pub fn bandwidth_hz(&self) -> f64 {
        self.num_subcarriers as f64 * self.subcarrier_spacing_hz
    }

    pub fn symbol_duration_s(&self) -> f64 {
        1.0 / self.subcarrier_spacing_hz
    }

    pub fn cpi_s(&self) -> f64 {
        self.num_pri as f64 * self.pri_s
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq_hz
    }

    /// Round-trip Doppler shift of a radial velocity.
    pub fn doppler_hz(&self, velocity_mps: f64) -> f64 {
        2.0 * velocity_mps * self.carrier_freq_hz / SPEED_OF_LIGHT
    }

    pub fn velocity_from_doppler(&self, doppler_hz: f64) -> f64 {
        doppler_hz * SPEED_OF_LIGHT / (2.0 * self.carrier_freq_hz)
    }

    /// Largest range whose round-trip delay stays within one symbol.
    pub fn max_range_m(&self) -> f64 {
        SPEED_OF_LIGHT * self.symbol_duration_s() / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub rx_cols: usize,
    pub rx_rows: usize,
    pub rx_spacing_x_m: f64,
    pub rx_spacing_y_m: f64,
    pub tx_cols: usize,
    pub tx_rows: usize,
    pub va_enabled: bool,
}

impl ArrayGeometry {
    pub fn rx_count(&self) -> usize {
        self.rx_cols * self.rx_rows
    }

    pub fn tx_count(&self) -> usize {
        self.tx_cols * self.tx_rows
    }

    /// Transmit slots per sensing occasion: one per transmit element with
    /// the virtual aperture, otherwise a single transmitter.
    pub fn slots(&self) -> usize {
        if self.va_enabled {
            self.tx_count()
        } else {
            1
        }
    }

    pub fn effective_cols(&self) -> usize {
        if self.va_enabled {
            self.tx_cols * self.rx_cols
        } else {
            self.rx_cols
        }
    }

    pub fn effective_rows(&self) -> usize {
        if self.va_enabled {
            self.tx_rows * self.rx_rows
        } else {
            self.rx_rows
        }
    }

    pub fn effective_count(&self) -> usize {
        self.effective_cols() * self.effective_rows()
    }

    /// The full virtual array (`η_x·L_x × η_y·L_y`), regardless of whether
    /// the virtual aperture is used for processing.
    pub fn full_virtual_cols(&self) -> usize {
        self.tx_cols * self.rx_cols
    }

    pub fn full_virtual_rows(&self) -> usize {
        self.tx_rows * self.rx_rows
    }

    pub fn with_va(&self, va_enabled: bool) -> ArrayGeometry {
        ArrayGeometry {
            va_enabled,
            ..self.clone()
        }
    }

    /// Index in the full virtual array of the channel formed by transmit
    /// slot `slot` (x-fastest over the small array) and receive element `rx`
    /// (x-fastest over the large array).
    pub fn virtual_index(&self, slot: usize, rx: usize) -> usize {
        let (tx_x, tx_y) = (slot % self.tx_cols, slot / self.tx_cols);
        let (rx_x, rx_y) = (rx % self.rx_cols, rx / self.rx_cols);
        let ix = tx_x * self.rx_cols + rx_x;
        let iy = tx_y * self.rx_rows + rx_y;
        iy * self.full_virtual_cols() + ix
    }

    /// Transmit slot that feeds row `v` of the effective (processing) array.
    pub fn slot_of_effective(&self, v: usize) -> usize {
        if !self.va_enabled {
            return 0;
        }
        let cols = self.effective_cols();
        let (ix, iy) = (v % cols, v / cols);
        (ix / self.rx_cols) + self.tx_cols * (iy / self.rx_rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub range_m: f64,
    pub radial_velocity_mps: f64,
    pub psi_x_rad: f64,
    pub psi_y_rad: f64,
    pub rcs_m2: f64,
}

impl Target {
    pub fn sin_psi_x(&self) -> f64 {
        self.psi_x_rad.sin()
    }

    pub fn sin_psi_y(&self) -> f64 {
        self.psi_y_rad.sin()
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        if !(self.range_m > 0.0) {
            return Err(format!("target range {} m must be positive", self.range_m));
        }
        if !(self.rcs_m2 > 0.0) {
            return Err(format!("target RCS {} m² must be positive", self.rcs_m2));
        }
        let s = self.sin_psi_x().powi(2) + self.sin_psi_y().powi(2);
        if s > 1.0 + 1e-12 {
            return Err(format!(
                "target direction sin²ψx + sin²ψy = {s:.4} exceeds 1"
            ));
        }
        if !self.radial_velocity_mps.is_finite() {
            return Err("target velocity must be finite".into());
        }
        Ok(())
    }
}

/// Converts azimuth `θ` and elevation `φ` (spherical convention, `θ` from
/// boresight) to per-axis ULA angles.
pub fn psi_from_theta_phi(theta: f64, phi: f64) -> (f64, f64) {
    let sx = theta.sin() * phi.cos();
    let sy = theta.sin() * phi.sin();
    (sx.clamp(-1.0, 1.0).asin(), sy.clamp(-1.0, 1.0).asin())
}

pub fn theta_phi_from_psi(psi_x: f64, psi_y: f64) -> (f64, f64) {
    let (sx, sy) = (psi_x.sin(), psi_y.sin());
    let st = (sx * sx + sy * sy).sqrt().min(1.0);
    (st.asin(), sy.atan2(sx))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionReport {
    pub range_res_m: f64,
    pub velocity_res_mps: f64,
    pub sin_angle_res_x: f64,
    pub sin_angle_res_y: f64,
    pub max_unambiguous_speed_mps: f64,
}

/// Range, velocity and sin-angle resolutions of a configuration. The
/// sin-angle resolution uses the virtual aperture when `arr.va_enabled`.
pub fn resolution_report(radio: &RadioParams, arr: &ArrayGeometry) -> ResolutionReport {
    let lambda = radio.wavelength_m();
    ResolutionReport {
        range_res_m: SPEED_OF_LIGHT / (2.0 * radio.bandwidth_hz()),
        velocity_res_mps: SPEED_OF_LIGHT / (2.0 * radio.cpi_s() * radio.carrier_freq_hz),
        sin_angle_res_x: lambda / (arr.effective_cols() as f64 * arr.rx_spacing_x_m),
        sin_angle_res_y: lambda / (arr.effective_rows() as f64 * arr.rx_spacing_y_m),
        max_unambiguous_speed_mps: SPEED_OF_LIGHT / (4.0 * radio.carrier_freq_hz * radio.pri_s),
    }
}

/// ULA steering vector `exp(j2π·l·d·sinψ/λ)`, `l = 0..count`.
pub fn steering_ula(psi: f64, count: usize, spacing_m: f64, wavelength_m: f64) -> Vec<C64> {
    steering_ula_sin(psi.sin(), count, spacing_m, wavelength_m)
}

pub fn steering_ula_sin(sin_psi: f64, count: usize, spacing_m: f64, wavelength_m: f64) -> Vec<C64> {
    let step = spacing_m * sin_psi / wavelength_m;
    (0..count).map(|l| cis_cycles(l as f64 * step)).collect()
}

/// URA steering vector `a(ψy) ⊗ a(ψx)`: the x index runs fastest.
pub fn steering_ura(
    psi_x: f64,
    psi_y: f64,
    cols: usize,
    rows: usize,
    dx: f64,
    dy: f64,
    wavelength_m: f64,
) -> Vec<C64> {
    steering_ura_sin(psi_x.sin(), psi_y.sin(), cols, rows, dx, dy, wavelength_m)
}

pub fn steering_ura_sin(
    sin_x: f64,
    sin_y: f64,
    cols: usize,
    rows: usize,
    dx: f64,
    dy: f64,
    wavelength_m: f64,
) -> Vec<C64> {
    kron(
        &steering_ula_sin(sin_y, rows, dy, wavelength_m),
        &steering_ula_sin(sin_x, cols, dx, wavelength_m),
    )
}

/// Steering vector over the processing array of `arr` (the virtual array
/// when the virtual aperture is enabled).
pub fn steering_effective(
    arr: &ArrayGeometry,
    sin_x: f64,
    sin_y: f64,
    wavelength_m: f64,
) -> Vec<C64> {
    steering_ura_sin(
        sin_x,
        sin_y,
        arr.effective_cols(),
        arr.effective_rows(),
        arr.rx_spacing_x_m,
        arr.rx_spacing_y_m,
        wavelength_m,
    )
}

/// Steering vector over the full virtual array.
pub fn steering_full_virtual(
    arr: &ArrayGeometry,
    sin_x: f64,
    sin_y: f64,
    wavelength_m: f64,
) -> Vec<C64> {
    steering_ura_sin(
        sin_x,
        sin_y,
        arr.full_virtual_cols(),
        arr.full_virtual_rows(),
        arr.rx_spacing_x_m,
        arr.rx_spacing_y_m,
        wavelength_m,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkKind {
    /// One-way link, `R²` spreading.
    Comm,
    /// Monostatic echo, `R⁴` spreading.
    Radar,
}

pub fn received_power(
    kind: LinkKind,
    p_t: f64,
    g_t: f64,
    g_r: f64,
    wavelength_m: f64,
    range_m: f64,
    rcs_m2: Option<f64>,
) -> Result<f64> {
    if !(range_m > 0.0) {
        return Err(Error::Invalid(vec![format!(
            "range {range_m} m must be positive"
        )]));
    }
    let four_pi = 4.0 * std::f64::consts::PI;
    let base = p_t * g_t * g_r * wavelength_m * wavelength_m;
    match kind {
        LinkKind::Comm => Ok(base / (four_pi.powi(2) * range_m.powi(2))),
        LinkKind::Radar => {
            let rcs = rcs_m2.ok_or_else(|| {
                Error::Invalid(vec![
                    "radar link budget requires a radar cross section".into()
                ])
            })?;
            if !(rcs > 0.0) {
                return Err(Error::Invalid(vec![format!(
                    "RCS {rcs} m² must be positive"
                )]));
            }
            Ok(base * rcs / (four_pi.powi(3) * range_m.powi(4)))
        }
    }
}

/// A scene with every quantity normalized to SI units and every derived
/// value resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatedScene {
    pub radio: RadioParams,
    pub array: ArrayGeometry,
    pub waveform: WaveformParams,
    pub clutter: ClutterSettings,
    pub receiver: ReceiverSettings,
    pub targets: Vec<Target>,
    pub seed: u64,
}

impl ValidatedScene {
    pub fn resolution(&self) -> ResolutionReport {
        resolution_report(&self.radio, &self.array)
    }
}

/// Normalizes a parsed configuration and checks every scene invariant.
/// All violations are reported together.
pub fn validate_scene(config: &SceneConfig) -> Result<ValidatedScene> {
    config.to_validated()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table1_radio() -> RadioParams {
        RadioParams {
            carrier_freq_hz: 5e9,
            subcarrier_spacing_hz: 60e3,
            num_subcarriers: 2048,
            symbols_per_pri: 15,
            num_pri: 500,
            pri_s: 0.25e-3,
            avg_tx_power_w: 0.01,
            noise_density_w_per_hz: 10f64.powf(-17.4) * 1e-3,
            si_attenuation_db: 50.0,
            uplink_power_w: 0.2,
            uplink_distance_m: 100.0,
            tx_gain: 1.0,
            rx_gain: 1.0,
        }
    }

    fn table1_array(va: bool) -> ArrayGeometry {
        let half = SPEED_OF_LIGHT / 5e9 / 2.0;
        ArrayGeometry {
            rx_cols: 8,
            rx_rows: 8,
            rx_spacing_x_m: half,
            rx_spacing_y_m: half,
            tx_cols: 2,
            tx_rows: 2,
            va_enabled: va,
        }
    }

    #[test]
    fn table1_resolutions() {
        let radio = table1_radio();
        assert_relative_eq!(radio.bandwidth_hz(), 122.88e6);
        let r = resolution_report(&radio, &table1_array(false));
        assert_eq!(format!("{:.2}", r.range_res_m), "1.22");
        assert_eq!(format!("{:.2}", r.velocity_res_mps), "0.24");
        assert_relative_eq!(r.sin_angle_res_x, 0.25, epsilon = 1e-12);
        let v = resolution_report(&radio, &table1_array(true));
        assert_relative_eq!(v.sin_angle_res_x, 0.125, epsilon = 1e-12);
        assert_relative_eq!(v.sin_angle_res_y, 0.125, epsilon = 1e-12);
        // c / (4 f_c PRI), roughly 60 m/s
        assert_relative_eq!(r.max_unambiguous_speed_mps, 59.958, epsilon = 1e-3);
    }

    #[test]
    fn resolution_homogeneity() {
        let radio = table1_radio();
        let arr = table1_array(false);
        let base = resolution_report(&radio, &arr);
        let mut wide = radio.clone();
        wide.subcarrier_spacing_hz *= 2.0;
        wide.pri_s /= 2.0;
        wide.num_pri *= 2;
        let w = resolution_report(&wide, &arr);
        assert_relative_eq!(w.range_res_m, base.range_res_m / 2.0, epsilon = 1e-12);
        let mut long = radio;
        long.num_pri *= 2;
        let l = resolution_report(&long, &arr);
        assert_relative_eq!(
            l.velocity_res_mps,
            base.velocity_res_mps / 2.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn ula_trivial_cases() {
        let ones = steering_ula(0.0, 5, 0.5, 1.0);
        assert!(ones.iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-15));
        let v = steering_ula(std::f64::consts::FRAC_PI_2, 2, 0.5, 1.0);
        assert!((v[1] - C64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn ula_matches_direct_formula() {
        let psi = std::f64::consts::PI / 6.0;
        let v = steering_ula(psi, 8, 0.5, 1.0);
        for (l, z) in v.iter().enumerate() {
            let expect = C64::from_polar(1.0, std::f64::consts::PI * l as f64 * 0.5);
            assert!((z - expect).norm() < 1e-12, "element {l}");
        }
    }

    #[test]
    fn ura_two_by_two() {
        let v = steering_ura(std::f64::consts::FRAC_PI_2, 0.0, 2, 2, 0.5, 0.5, 1.0);
        let expect = [1.0, -1.0, 1.0, -1.0];
        for (z, e) in v.iter().zip(expect) {
            assert!((z - C64::new(e, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn virtual_aperture_steering_identity() {
        // a(ψ, η, L·d) ⊗ a(ψ, L, d) == a(ψ, η·L, d)
        let (eta, l, d, lambda) = (2, 4, 0.5, 1.0);
        for &s in &[-0.7, -0.2, 0.0, 0.33, 0.9] {
            let psi = f64::asin(s);
            let big = steering_ula(psi, eta * l, d, lambda);
            let k = kron(
                &steering_ula(psi, eta, l as f64 * d, lambda),
                &steering_ula(psi, l, d, lambda),
            );
            for (a, b) in big.iter().zip(&k) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn virtual_index_matches_kronecker_channel() {
        let arr = ArrayGeometry {
            rx_cols: 2,
            rx_rows: 3,
            rx_spacing_x_m: 0.5,
            rx_spacing_y_m: 0.5,
            tx_cols: 2,
            tx_rows: 2,
            va_enabled: true,
        };
        let (sx, sy) = (0.31, -0.47);
        let big = steering_full_virtual(&arr, sx, sy, 1.0);
        let a_t = steering_ura_sin(sx, sy, 2, 2, 1.0, 1.5, 1.0);
        let a_r = steering_ura_sin(sx, sy, 2, 3, 0.5, 0.5, 1.0);
        for (slot, t) in a_t.iter().enumerate() {
            for (rx, r) in a_r.iter().enumerate() {
                let v = arr.virtual_index(slot, rx);
                assert!((big[v] - t * r).norm() < 1e-12);
                assert_eq!(arr.slot_of_effective(v), slot);
            }
        }
    }

    #[test]
    fn link_budget_laws() {
        let lambda = SPEED_OF_LIGHT / 5e9;
        let r1 =
            received_power(LinkKind::Radar, 1.0, 1.0, 1.0, lambda, 100.0, Some(100.0)).unwrap();
        let r2 =
            received_power(LinkKind::Radar, 1.0, 1.0, 1.0, lambda, 200.0, Some(100.0)).unwrap();
        assert_relative_eq!(r1 / r2, 16.0, epsilon = 1e-12);
        let c1 = received_power(LinkKind::Comm, 1.0, 1.0, 1.0, lambda, 100.0, None).unwrap();
        let c2 = received_power(LinkKind::Comm, 1.0, 1.0, 1.0, lambda, 200.0, None).unwrap();
        assert_relative_eq!(c1 / c2, 4.0, epsilon = 1e-12);
        assert!(received_power(LinkKind::Radar, 1.0, 1.0, 1.0, lambda, 100.0, None).is_err());
    }

    #[test]
    fn car_link_budget_hand_value() {
        // P_T G_T G_R λ² σ / ((4π)³ R⁴) with P_T = 10 mW, σ = 100 m², R = 100 m.
        let lambda: f64 = 299_792_458.0 / 5e9;
        let expect = 0.01 * lambda.powi(2) * 100.0 / ((4.0 * std::f64::consts::PI).powi(3) * 1e8);
        let got =
            received_power(LinkKind::Radar, 0.01, 1.0, 1.0, lambda, 100.0, Some(100.0)).unwrap();
        assert_relative_eq!(got, expect, max_relative = 1e-14);
        assert_relative_eq!(got, 1.811_639_6e-14, max_relative = 1e-7);
    }

    #[test]
    fn target_direction_constraint() {
        let mut t = Target {
            range_m: 100.0,
            radial_velocity_mps: 10.0,
            psi_x_rad: 0.0,
            psi_y_rad: 0.0,
            rcs_m2: 1.0,
        };
        assert!(t.check().is_ok());
        t.psi_x_rad = 0.8f64.asin();
        t.psi_y_rad = 0.8f64.asin();
        assert!(t.check().is_err());
    }

    #[test]
    fn theta_phi_round_trip() {
        let (px, py) = psi_from_theta_phi(0.6, 1.1);
        let (t, p) = theta_phi_from_psi(px, py);
        assert_relative_eq!(t, 0.6, epsilon = 1e-12);
        assert_relative_eq!(p, 1.1, epsilon = 1e-12);
    }
}
