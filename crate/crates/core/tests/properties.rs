use nalgebra::DMatrix;
use proptest::prelude::*;

use mars_core::channel::IfCube;
use mars_core::config::{load_preset, load_str, preset_text};
use mars_core::estimator::compress::expand_nn;
use mars_core::estimator::stap::{stap_range_spectrum, sthp_time_weights, temporal_steering};
use mars_core::estimator::{EpsMode, EstimateBins, RefinementTag, Suppressor, TargetEstimate};
use mars_core::harness::{hit_rate, rmse_normalized, score, score_grids, TargetRecord};
use mars_core::io::{decode_cube, encode_cube};
use mars_core::linalg::energy;
use mars_core::scene::Target;
use mars_core::waveform::{chirp_freq_coeffs, ofdm_symbol_samples};
use mars_core::C64;

fn complex() -> impl Strategy<Value = C64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| C64::new(re, im))
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<C64>> {
    prop::collection::vec(complex(), rows * cols)
        .prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn target() -> impl Strategy<Value = Target> {
    (50.0f64..500.0, -50.0f64..50.0, -0.5f64..0.5, -0.5f64..0.5).prop_map(|(r, v, sx, sy)| Target {
        range_m: r,
        radial_velocity_mps: v,
        psi_x_rad: sx.asin(),
        psi_y_rad: sy.asin(),
        rcs_m2: 1.0,
    })
}

fn estimate_of(t: &Target) -> TargetEstimate {
    TargetEstimate {
        velocity_mps: t.radial_velocity_mps,
        psi_x_rad: t.psi_x_rad,
        psi_y_rad: t.psi_y_rad,
        range_m: t.range_m,
        amplitude: 1.0,
        bins: EstimateBins {
            velocity: 0,
            angle_x: 0,
            angle_y: 0,
            range: 0,
        },
        refinement: RefinementTag::Fft,
        method: Suppressor::Sthp,
        eps: EpsMode::Inf,
        pinv_used: false,
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unitary_dft_preserves_energy(x in prop::collection::vec(complex(), 1..200)) {
        let f = chirp_freq_coeffs(&x);
        prop_assert!((energy(&f) - energy(&x)).abs() <= 1e-10 * energy(&x).max(1.0));
        let back = ofdm_symbol_samples(&f);
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn stap_peak_is_scale_invariant(
        y in matrix(6, 32),
        a in prop::collection::vec(complex(), 6),
        scale in 0.01f64..100.0,
        phase in 0.0f64..std::f64::consts::TAU,
    ) {
        let c = C64::from_polar(scale, phase);
        for eps in [EpsMode::Em, EpsMode::Zero, EpsMode::Inf] {
            let base = stap_range_spectrum(&y, &a, eps).unwrap();
            let scaled = stap_range_spectrum(&(&y * c), &a, eps).unwrap();
            prop_assume!(base.values.iter().all(|z| z.norm().is_finite()));
            let mags: Vec<f64> = base.values.iter().map(|z| z.norm()).collect();
            let mut sorted = mags.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            prop_assume!(sorted[0] > sorted[1] * (1.0 + 1e-6));
            prop_assert_eq!(base.peak_bin, scaled.peak_bin);
            prop_assert_eq!(argmax(&mags), base.peak_bin);
        }
    }

    #[test]
    fn sthp_weights_null_static_and_pass_target(
        fd in 50.0f64..2000.0,
        times in prop::collection::btree_set(0usize..60, 2..6),
    ) {
        let times: Vec<f64> = times.into_iter().map(|t| t as f64 * 0.25e-3).collect();
        let a = temporal_steering(fd, &times);
        let s: C64 = a.iter().sum();
        prop_assume!(s.norm_sqr() < (1.0 - 1e-3) * (a.len() as f64).powi(2));
        let w = sthp_time_weights(&a).unwrap();
        let on_static: C64 = w.iter().sum();
        let on_target: C64 = w.iter().zip(&a).map(|(w, a)| w * a).sum();
        prop_assert!(on_static.norm() < 1e-8, "{on_static}");
        prop_assert!((on_target - 1.0).norm() < 1e-8, "{on_target}");
    }

    #[test]
    fn expansion_copies_nearest_preceding_tone(
        m in 4usize..40,
        picks in prop::collection::btree_set(1usize..40, 0..6),
    ) {
        let chirps: Vec<usize> = picks.into_iter().filter(|&i| i < m).collect();
        let tones: Vec<usize> = (0..m).filter(|i| !chirps.contains(i)).collect();
        let ys2 = DMatrix::from_fn(2, tones.len(), |r, c| C64::new(tones[c] as f64, r as f64));
        let out = expand_nn(&ys2, &chirps, m).unwrap();
        for k in 0..m {
            let src = *tones.iter().filter(|&&t| t <= k).max().unwrap();
            prop_assert_eq!(out[(0, k)].re, src as f64);
            prop_assert_eq!(out[(1, k)].im, 1.0);
        }
    }

    #[test]
    fn infinite_tolerance_hits_everything(
        truths in prop::collection::vec(target(), 1..6),
        ests in prop::collection::vec(target(), 6),
    ) {
        let scene = load_preset("desk_small").unwrap().scene;
        let (grid, norm) = score_grids(&scene);
        let ests: Vec<TargetEstimate> = ests[..truths.len()].iter().map(estimate_of).collect();
        let records = score(&truths, &ests, &grid, &norm, usize::MAX / 2);
        prop_assert_eq!(hit_rate(&records), Some(1.0));
    }

    #[test]
    fn rmse_ignores_added_misses(
        truths in prop::collection::vec(target(), 1..6),
        jitter in prop::collection::vec(-2.0f64..2.0, 6),
        misses in prop::collection::vec(target(), 1..4),
    ) {
        let scene = load_preset("desk_small").unwrap().scene;
        let (grid, norm) = score_grids(&scene);
        let ests: Vec<TargetEstimate> = truths
            .iter()
            .zip(&jitter)
            .map(|(t, j)| {
                let mut e = estimate_of(t);
                e.range_m += j;
                e
            })
            .collect();
        let mut records = score(&truths, &ests, &grid, &norm, 1);
        let before = rmse_normalized(&records);
        records.extend(misses.into_iter().map(|t| TargetRecord {
            truth: t,
            estimate: None,
            offsets: None,
            normalized: None,
            hit: false,
            shared_bin: false,
        }));
        prop_assert_eq!(before, rmse_normalized(&records));
    }

    #[test]
    fn cube_round_trips(
        w in 0usize..3,
        extra in 1usize..4,
        slots in (1usize..3, 1usize..3),
        rx in (1usize..3, 1usize..3),
        samples in 1usize..9,
        seed in any::<u64>(),
    ) {
        let m_tone = w + extra;
        let chirp_pri_indices: Vec<usize> = (0..w).map(|i| 2 * i + 1).collect();
        let tone_pri_indices: Vec<usize> = (0..w + m_tone).filter(|i| !chirp_pri_indices.contains(i)).collect();
        let l = rx.0 * rx.1;
        let s = slots.0 * slots.1;
        let val = |r: usize, c: usize, k: u64| {
            let h = seed.wrapping_mul(6364136223846793005).wrapping_add((r * 1000 + c) as u64 * 2 + k);
            (h % 100_003) as f64 / 7.0 - 5000.0
        };
        let cube = IfCube {
            rx_cols: rx.0,
            rx_rows: rx.1,
            slot_cols: slots.0,
            slot_rows: slots.1,
            samples,
            chirp_pri_indices,
            tone_pri_indices,
            sample_rate_hz: 30.72e6,
            chirp: DMatrix::from_fn(l, w * s * samples, |r, c| C64::new(val(r, c, 0), val(r, c, 1))),
            tone: DMatrix::from_fn(l, m_tone * s, |r, c| C64::new(val(r, c, 2), -val(r, c, 3))),
        };
        let bytes = encode_cube(&cube).unwrap();
        prop_assert_eq!(decode_cube(&bytes).unwrap(), cube);
        prop_assert!(decode_cube(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn config_hash_ignores_key_order(order in Just((0usize..11).collect::<Vec<_>>()).prop_shuffle()) {
        let text = preset_text("desk_small").unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let start = lines.iter().position(|l| *l == "[radio]").unwrap() + 1;
        let end = start + lines[start..].iter().position(|l| l.is_empty()).unwrap();
        let keys = &lines[start..end];
        prop_assert_eq!(keys.len(), order.len());
        let mut shuffled: Vec<&str> = lines[..start].to_vec();
        shuffled.extend(order.iter().map(|&i| keys[i]));
        shuffled.extend(&lines[end..]);
        let a = load_str(text).unwrap().config_hash();
        let b = load_str(&shuffled.join("\n")).unwrap().config_hash();
        prop_assert_eq!(a, b);
    }
}
