//! Monte-Carlo drops: random targets, one cube per pipeline, scoring by hit
//! rate and resolution-normalized RMSE.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::synthesize_if_cube;
use crate::clutter::ClutterMap;
use crate::config::dbm_to_w;
use crate::estimator::{run_pipeline, PipelineConfig, TargetEstimate};
use crate::scene::{resolution_report, ResolutionReport, Target, ValidatedScene};
use crate::seed::{derive_seed, rng_for};
use crate::waveform::{build_schedule, MarsSchedule};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    #[default]
    None,
    /// Target range in metres.
    Range,
    /// Average sensing transmit power in dBm.
    TxPower,
}

/// Distribution of random targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDraw {
    pub range_min_m: f64,
    pub range_max_m: f64,
    pub speed_min_mps: f64,
    pub speed_max_mps: f64,
    pub sin_psi_max: f64,
    /// Target heights; `sin ψy` then follows from the station height.
    pub height_m: Option<(f64, f64)>,
    pub station_height_m: f64,
    pub rcs_m2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub num_drops: usize,
    pub targets_per_drop: usize,
    pub sweep_axis: SweepAxis,
    pub sweep_values: Vec<f64>,
    pub draw: TargetDraw,
    pub pipelines: Vec<PipelineConfig>,
    pub guard_bins: usize,
    pub hit_tolerance_bins: usize,
    pub seed: u64,
}

impl ExperimentPlan {
    /// Sweep points; a plan without a sweep has a single point.
    pub fn sweep_points(&self) -> Vec<Option<f64>> {
        if self.sweep_axis == SweepAxis::None || self.sweep_values.is_empty() {
            vec![None]
        } else {
            self.sweep_values.iter().copied().map(Some).collect()
        }
    }
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Draws `k` targets. Speeds are radial with a random sign.
pub fn draw_targets<R: Rng>(
    draw: &TargetDraw,
    k: usize,
    fixed_range_m: Option<f64>,
    rng: &mut R,
) -> Vec<Target> {
    (0..k)
        .map(|_| {
            let range_m =
                fixed_range_m.unwrap_or_else(|| uniform(rng, draw.range_min_m, draw.range_max_m));
            let speed = uniform(rng, draw.speed_min_mps, draw.speed_max_mps);
            let v = if rng.random::<bool>() { speed } else { -speed };
            let sx = uniform(rng, -draw.sin_psi_max, draw.sin_psi_max);
            let sy = match draw.height_m {
                Some((lo, hi)) => {
                    let h = uniform(rng, lo, hi);
                    ((h - draw.station_height_m) / range_m)
                        .clamp(-draw.sin_psi_max, draw.sin_psi_max)
                }
                None => uniform(rng, -draw.sin_psi_max, draw.sin_psi_max),
            };
            let sy = sy.clamp(-(1.0 - sx * sx).sqrt(), (1.0 - sx * sx).sqrt());
            Target {
                range_m,
                radial_velocity_mps: v,
                psi_x_rad: sx.asin(),
                psi_y_rad: sy.asin(),
                rcs_m2: draw.rcs_m2,
            }
        })
        .collect()
}

/// Scene of a sweep point: the swept quantity applied, targets untouched.
pub fn sweep_scene(scene: &ValidatedScene, axis: SweepAxis, value: Option<f64>) -> ValidatedScene {
    let mut s = scene.clone();
    if let (SweepAxis::TxPower, Some(dbm)) = (axis, value) {
        s.radio.avg_tx_power_w = dbm_to_w(dbm);
    }
    s
}

/// Truth targets of a drop, shared by every pipeline.
pub fn drop_targets(plan: &ExperimentPlan, sweep_idx: usize, drop_idx: usize) -> Vec<Target> {
    let value = plan.sweep_points()[sweep_idx];
    let fixed = if plan.sweep_axis == SweepAxis::Range {
        value
    } else {
        None
    };
    let mut rng = rng_for(plan.seed, "drop", &[sweep_idx as u64, drop_idx as u64]);
    draw_targets(&plan.draw, plan.targets_per_drop, fixed, &mut rng)
}

pub fn cube_seed(plan: &ExperimentPlan, sweep_idx: usize, drop_idx: usize) -> u64 {
    derive_seed(plan.seed, "cube", &[sweep_idx as u64, drop_idx as u64])
}

pub fn schedule_seed(plan: &ExperimentPlan, sweep_idx: usize, drop_idx: usize) -> u64 {
    derive_seed(
        plan.seed,
        "fa-schedule",
        &[sweep_idx as u64, drop_idx as u64],
    )
}

/// Scene and schedule a pipeline sees in one drop.
pub fn pipeline_scene(
    scene: &ValidatedScene,
    plan: &ExperimentPlan,
    pipeline: &PipelineConfig,
    sweep_idx: usize,
    drop_idx: usize,
) -> Result<(ValidatedScene, MarsSchedule)> {
    let points = plan.sweep_points();
    let value = *points.get(sweep_idx).ok_or_else(|| {
        Error::Dimension(format!("sweep index {sweep_idx} out of {}", points.len()))
    })?;
    let mut s = sweep_scene(scene, plan.sweep_axis, value);
    s.array = s.array.with_va(pipeline.va);
    s.waveform = s.waveform.with_structure(pipeline.structure);
    s.targets = drop_targets(plan, sweep_idx, drop_idx);
    let schedule = build_schedule(
        &s.radio,
        &s.array,
        &s.waveform,
        schedule_seed(plan, sweep_idx, drop_idx),
    )?;
    Ok((s, schedule))
}

/// Offsets `estimate − truth` in bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinOffsets {
    pub range: f64,
    pub velocity: f64,
    pub angle_x: f64,
    pub angle_y: f64,
}

impl BinOffsets {
    pub fn as_array(&self) -> [f64; 4] {
        [self.range, self.velocity, self.angle_x, self.angle_y]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub truth: Target,
    pub estimate: Option<TargetEstimate>,
    /// Offsets in bins of the pipeline's own grid.
    pub offsets: Option<BinOffsets>,
    /// Offsets normalized by the resolution without the virtual aperture.
    pub normalized: Option<BinOffsets>,
    pub hit: bool,
    /// The truth shares an angle-velocity bin with an earlier target and is
    /// left out of the hit rate.
    pub shared_bin: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropReport {
    pub pipeline: String,
    pub sweep_index: usize,
    pub drop_index: usize,
    pub seed: u64,
    pub records: Vec<TargetRecord>,
    /// Detection failure reported by the pipeline, if any.
    pub failure: Option<String>,
    pub runtime_s: f64,
}

/// Geometry of a bin grid for scoring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreGrid {
    pub resolution: ResolutionReport,
    pub velocity_bins: usize,
    pub cols: usize,
    pub rows: usize,
}

fn cyclic(d: f64, period: f64) -> f64 {
    d - period * (d / period).round()
}

/// Continuous offsets `estimate − truth` on a grid, cyclic in velocity and
/// both angle axes.
pub fn bin_offsets(truth: &Target, est: &TargetEstimate, g: &ScoreGrid) -> BinOffsets {
    let r = &g.resolution;
    BinOffsets {
        range: (est.range_m - truth.range_m) / r.range_res_m,
        velocity: cyclic(
            (est.velocity_mps - truth.radial_velocity_mps) / r.velocity_res_mps,
            g.velocity_bins as f64,
        ),
        angle_x: cyclic(
            (est.sin_psi_x() - truth.sin_psi_x()) / r.sin_angle_res_x,
            g.cols as f64,
        ),
        angle_y: cyclic(
            (est.sin_psi_y() - truth.sin_psi_y()) / r.sin_angle_res_y,
            g.rows as f64,
        ),
    }
}

fn cyclic_bin_distance(a: i64, b: i64, period: usize) -> u64 {
    let p = period.max(1) as i64;
    let d = (a - b).rem_euclid(p);
    d.min(p - d) as u64
}

/// True when every dimension's estimated bin lies within `tol` bins of the
/// truth bin.
pub fn is_hit(truth: &Target, est: &TargetEstimate, g: &ScoreGrid, tol: usize) -> bool {
    let r = &g.resolution;
    let bin = |x: f64, step: f64| (x / step).round() as i64;
    let tol = tol as u64;
    let range = bin(est.range_m, r.range_res_m).abs_diff(bin(truth.range_m, r.range_res_m));
    let vel = cyclic_bin_distance(
        bin(est.velocity_mps, r.velocity_res_mps),
        bin(truth.radial_velocity_mps, r.velocity_res_mps),
        g.velocity_bins,
    );
    let ax = cyclic_bin_distance(
        bin(est.sin_psi_x(), r.sin_angle_res_x),
        bin(truth.sin_psi_x(), r.sin_angle_res_x),
        g.cols,
    );
    let ay = cyclic_bin_distance(
        bin(est.sin_psi_y(), r.sin_angle_res_y),
        bin(truth.sin_psi_y(), r.sin_angle_res_y),
        g.rows,
    );
    range <= tol && vel <= tol && ax <= tol && ay <= tol
}

/// Marks every truth whose angle-velocity bin is already taken by an
/// earlier truth.
pub fn shared_bins(truths: &[Target], g: &ScoreGrid) -> Vec<bool> {
    let r = &g.resolution;
    let wrap = |x: f64, step: f64, period: usize| {
        ((x / step).round() as i64).rem_euclid(period.max(1) as i64)
    };
    let keys: Vec<_> = truths
        .iter()
        .map(|t| {
            (
                wrap(t.radial_velocity_mps, r.velocity_res_mps, g.velocity_bins),
                wrap(t.sin_psi_x(), r.sin_angle_res_x, g.cols),
                wrap(t.sin_psi_y(), r.sin_angle_res_y, g.rows),
            )
        })
        .collect();
    (0..keys.len())
        .map(|i| keys[..i].contains(&keys[i]))
        .collect()
}

/// Greedy assignment on summed absolute bin offsets, then per-target scoring.
/// Truths in a shared bin get no estimate.
pub fn score(
    truths: &[Target],
    estimates: &[TargetEstimate],
    grid: &ScoreGrid,
    norm: &ScoreGrid,
    tol: usize,
) -> Vec<TargetRecord> {
    let shared = shared_bins(truths, grid);
    let mut pairs = Vec::new();
    for (i, t) in truths.iter().enumerate().filter(|(i, _)| !shared[*i]) {
        for (j, e) in estimates.iter().enumerate() {
            let cost: f64 = bin_offsets(t, e, grid)
                .as_array()
                .iter()
                .map(|d| d.abs())
                .sum();
            pairs.push((cost, i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut assigned: Vec<Option<usize>> = vec![None; truths.len()];
    let mut used = vec![false; estimates.len()];
    for (_, i, j) in pairs {
        if assigned[i].is_none() && !used[j] {
            assigned[i] = Some(j);
            used[j] = true;
        }
    }
    truths
        .iter()
        .zip(assigned)
        .zip(shared)
        .map(|((t, a), shared_bin)| match a {
            Some(j) => {
                let e = &estimates[j];
                TargetRecord {
                    truth: t.clone(),
                    estimate: Some(e.clone()),
                    offsets: Some(bin_offsets(t, e, grid)),
                    normalized: Some(bin_offsets(t, e, norm)),
                    hit: is_hit(t, e, grid, tol),
                    shared_bin,
                }
            }
            None => TargetRecord {
                truth: t.clone(),
                estimate: None,
                offsets: None,
                normalized: None,
                hit: false,
                shared_bin,
            },
        })
        .collect()
}

/// Scoring grids of a pipeline scene: its own and the one without the
/// virtual aperture.
pub fn score_grids(scene: &ValidatedScene) -> (ScoreGrid, ScoreGrid) {
    let make = |arr: &crate::scene::ArrayGeometry| ScoreGrid {
        resolution: resolution_report(&scene.radio, arr),
        velocity_bins: scene.radio.num_pri,
        cols: arr.effective_cols(),
        rows: arr.effective_rows(),
    };
    (make(&scene.array), make(&scene.array.with_va(false)))
}

fn is_detection_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::NotEnoughPeaks { .. } | Error::RankDeficient { .. } | Error::CollinearTemporal(_)
    )
}

/// Runs pipeline `pipeline_idx` on one drop. Detection failures become
/// misses; other errors carry the drop seed.
pub fn run_drop(
    scene: &ValidatedScene,
    plan: &ExperimentPlan,
    clutter: Option<&ClutterMap>,
    pipeline_idx: usize,
    sweep_idx: usize,
    drop_idx: usize,
) -> Result<DropReport> {
    let start = Instant::now();
    let pc = plan
        .pipelines
        .get(pipeline_idx)
        .ok_or_else(|| Error::Dimension(format!("pipeline index {pipeline_idx} out of range")))?;
    let seed = cube_seed(plan, sweep_idx, drop_idx);
    let attach = |e: Error| {
        Error::Numerical(format!(
            "pipeline `{}`, sweep {sweep_idx}, drop {drop_idx} (seed {seed}): {e}",
            pc.label
        ))
    };
    let (s, schedule) = pipeline_scene(scene, plan, pc, sweep_idx, drop_idx).map_err(attach)?;
    let clutter = clutter.filter(|_| s.clutter.enabled);
    let cube = synthesize_if_cube(&s, &schedule, clutter, seed).map_err(attach)?;
    let (grid, norm) = score_grids(&s);
    let extractable = shared_bins(&s.targets, &grid)
        .iter()
        .filter(|&&b| !b)
        .count();
    let (estimates, failure) = match run_pipeline(
        &cube,
        &s.radio,
        &s.array,
        &schedule,
        pc,
        extractable,
        plan.guard_bins,
    ) {
        Ok(e) => (e, None),
        Err(e) if is_detection_failure(&e) => (Vec::new(), Some(e.to_string())),
        Err(e) => return Err(attach(e)),
    };
    Ok(DropReport {
        pipeline: pc.label.clone(),
        sweep_index: sweep_idx,
        drop_index: drop_idx,
        seed,
        records: score(
            &s.targets,
            &estimates,
            &grid,
            &norm,
            plan.hit_tolerance_bins,
        ),
        failure,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Hits over targets outside shared bins; `None` for an empty set.
pub fn hit_rate<'a>(records: impl IntoIterator<Item = &'a TargetRecord>) -> Option<f64> {
    let (mut n, mut h) = (0usize, 0usize);
    for r in records.into_iter().filter(|r| !r.shared_bin) {
        n += 1;
        h += r.hit as usize;
    }
    (n > 0).then(|| h as f64 / n as f64)
}

/// Per-dimension RMSE of the normalized offsets over hits only, ordered
/// range, velocity, angle x, angle y. `None` without hits.
pub fn rmse_normalized<'a>(
    records: impl IntoIterator<Item = &'a TargetRecord>,
) -> Option<[f64; 4]> {
    let mut acc = [0.0; 4];
    let mut n = 0usize;
    for r in records {
        if let (true, Some(o)) = (r.hit, r.normalized) {
            for (a, d) in acc.iter_mut().zip(o.as_array()) {
                *a += d * d;
            }
            n += 1;
        }
    }
    (n > 0).then(|| acc.map(|a| (a / n as f64).sqrt()))
}

/// Half-width of the 95% Wilson score interval.
pub fn wilson_half_width(successes: usize, trials: usize) -> f64 {
    if trials == 0 {
        return f64::NAN;
    }
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()
}

pub const METRICS: [&str; 5] = [
    "hit_rate",
    "rmse_range",
    "rmse_velocity",
    "rmse_angle_x",
    "rmse_angle_y",
];

/// One CSV row of a curve table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub sweep_value: Option<f64>,
    pub pipeline: String,
    pub metric: String,
    pub value: Option<f64>,
    pub ci: Option<f64>,
    pub drops: usize,
    pub targets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloResult {
    pub rows: Vec<CurveRow>,
    pub drops: Vec<DropReport>,
}

/// Curve rows of one (sweep point, pipeline) group.
pub fn curve_rows(
    sweep_value: Option<f64>,
    pipeline: &str,
    reports: &[&DropReport],
) -> Vec<CurveRow> {
    let records: Vec<&TargetRecord> = reports
        .iter()
        .flat_map(|r| &r.records)
        .filter(|r| !r.shared_bin)
        .collect();
    let targets = records.len();
    let hits = records.iter().filter(|r| r.hit).count();
    let rmse = rmse_normalized(records.iter().copied());
    let row = |metric: &str, value: Option<f64>, ci: Option<f64>| CurveRow {
        sweep_value,
        pipeline: pipeline.to_string(),
        metric: metric.to_string(),
        value,
        ci,
        drops: reports.len(),
        targets,
    };
    let mut out = vec![row(
        METRICS[0],
        hit_rate(records.iter().copied()),
        (targets > 0).then(|| wilson_half_width(hits, targets)),
    )];
    for (i, m) in METRICS[1..].iter().enumerate() {
        out.push(row(m, rmse.map(|r| r[i]), None));
    }
    out
}

/// Runs every drop of every sweep point for every pipeline. Drops run in
/// parallel and are collected in index order.
pub fn monte_carlo(
    scene: &ValidatedScene,
    plan: &ExperimentPlan,
    clutter: Option<&ClutterMap>,
) -> Result<MonteCarloResult> {
    let points = plan.sweep_points();
    let jobs: Vec<(usize, usize, usize)> = (0..points.len())
        .flat_map(|s| {
            (0..plan.pipelines.len()).flat_map(move |p| (0..plan.num_drops).map(move |d| (s, p, d)))
        })
        .collect();
    let drops: Vec<DropReport> = jobs
        .par_iter()
        .map(|&(s, p, d)| run_drop(scene, plan, clutter, p, s, d))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (s, value) in points.iter().enumerate() {
        for pc in &plan.pipelines {
            let group: Vec<&DropReport> = drops
                .iter()
                .filter(|r| r.sweep_index == s && r.pipeline == pc.label)
                .collect();
            if group.is_empty() {
                continue;
            }
            rows.extend(curve_rows(*value, &pc.label, &group));
        }
    }
    Ok(MonteCarloResult { rows, drops })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{EpsMode, EstimateBins, RefinementTag, Suppressor};

    fn grid() -> ScoreGrid {
        ScoreGrid {
            resolution: ResolutionReport {
                range_res_m: 1.0,
                velocity_res_mps: 1.0,
                sin_angle_res_x: 0.25,
                sin_angle_res_y: 0.25,
                max_unambiguous_speed_mps: 8.0,
            },
            velocity_bins: 16,
            cols: 8,
            rows: 8,
        }
    }

    fn truth(r: f64, v: f64, sx: f64, sy: f64) -> Target {
        Target {
            range_m: r,
            radial_velocity_mps: v,
            psi_x_rad: sx.asin(),
            psi_y_rad: sy.asin(),
            rcs_m2: 1.0,
        }
    }

    fn est(r: f64, v: f64, sx: f64, sy: f64) -> TargetEstimate {
        TargetEstimate {
            velocity_mps: v,
            psi_x_rad: sx.asin(),
            psi_y_rad: sy.asin(),
            range_m: r,
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

    #[test]
    fn hit_rule() {
        let g = grid();
        let t = truth(10.0, 3.0, 0.25, -0.25);
        assert!(is_hit(&t, &est(10.0, 3.0, 0.25, -0.25), &g, 1));
        assert!(is_hit(&t, &est(11.0, 2.0, 0.5, 0.0), &g, 1));
        assert!(!is_hit(&t, &est(12.0, 3.0, 0.25, -0.25), &g, 1));
        assert!(is_hit(&t, &est(12.0, 3.0, 0.25, -0.25), &g, 2));
        // velocity wraps around the unambiguous span
        let fast = truth(10.0, 7.6, 0.0, 0.0);
        assert!(is_hit(&fast, &est(10.0, -8.0, 0.0, 0.0), &g, 1));
        assert!(is_hit(&t, &est(1e6, -7.0, -0.9, 0.9), &g, usize::MAX / 2));
    }

    #[test]
    fn greedy_assignment_pairs_nearest() {
        let g = grid();
        let ts = [truth(10.0, 3.0, 0.0, 0.0), truth(50.0, -4.0, 0.5, 0.5)];
        let es = [est(50.0, -4.0, 0.5, 0.5), est(10.4, 3.0, 0.0, 0.0)];
        let recs = score(&ts, &es, &g, &g, 1);
        assert_eq!(recs.len(), 2);
        assert!(recs.iter().all(|r| r.hit));
        assert!((recs[0].offsets.unwrap().range - 0.4).abs() < 1e-12);
        let missing = score(&ts, &es[..1], &g, &g, 1);
        assert!(missing[0].estimate.is_none() && !missing[0].hit && missing[1].hit);
    }

    #[test]
    fn shared_bin_truth_is_reported_apart() {
        let g = grid();
        let ts = [
            truth(10.0, 3.0, 0.25, 0.0),
            truth(40.0, 3.1, 0.26, 0.0),
            truth(20.0, -4.0, 0.0, 0.0),
        ];
        assert_eq!(shared_bins(&ts, &g), [false, true, false]);
        let es = [est(40.0, 3.0, 0.25, 0.0), est(20.0, -4.0, 0.0, 0.0)];
        let recs = score(&ts, &es, &g, &g, 1);
        assert!(recs[1].shared_bin && recs[1].estimate.is_none());
        assert!(!recs[0].hit && recs[2].hit);
        assert_eq!(hit_rate(&recs), Some(0.5));
    }

    #[test]
    fn rates_and_rmse() {
        let g = grid();
        let t = truth(10.0, 3.0, 0.0, 0.0);
        let hit = score(
            std::slice::from_ref(&t),
            &[est(10.5, 3.0, 0.0, 0.0)],
            &g,
            &g,
            1,
        )
        .remove(0);
        let exact = score(
            std::slice::from_ref(&t),
            &[est(10.0, 3.0, 0.0, 0.0)],
            &g,
            &g,
            1,
        )
        .remove(0);
        let miss = score(
            std::slice::from_ref(&t),
            &[est(20.0, 3.0, 0.0, 0.0)],
            &g,
            &g,
            1,
        )
        .remove(0);
        assert_eq!(hit_rate(&[hit.clone(), miss.clone()]), Some(0.5));
        assert_eq!(hit_rate(&[]), None);
        assert_eq!(
            rmse_normalized(std::slice::from_ref(&exact)),
            Some([0.0; 4])
        );
        assert_eq!(rmse_normalized(std::slice::from_ref(&miss)), None);
        let a = rmse_normalized(&[hit.clone(), exact.clone()]).unwrap();
        let b = rmse_normalized(&[hit, exact, miss]).unwrap();
        assert_eq!(a, b);
        assert!((a[0] - (0.125f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn wilson_interval() {
        // closed form at p = 1/2, n = 100
        let z = 1.959_963_984_540_054f64;
        let want = z / (1.0 + z * z / 100.0) * (0.25 / 100.0 + z * z / 40000.0).sqrt();
        assert!((wilson_half_width(50, 100) - want).abs() < 1e-15);
        assert!(wilson_half_width(100, 100) > 0.0);
        assert!(wilson_half_width(0, 0).is_nan());
    }

    #[test]
    fn draws_respect_bounds() {
        let draw = TargetDraw {
            range_min_m: 100.0,
            range_max_m: 500.0,
            speed_min_mps: 5.0,
            speed_max_mps: 55.0,
            sin_psi_max: 0.5,
            height_m: None,
            station_height_m: 10.0,
            rcs_m2: 100.0,
        };
        let mut rng = rng_for(1, "t", &[]);
        for t in draw_targets(&draw, 500, None, &mut rng) {
            assert!((100.0..500.0).contains(&t.range_m));
            assert!((5.0..55.0).contains(&t.radial_velocity_mps.abs()));
            assert!(t.sin_psi_x().abs() <= 0.5 + 1e-12 && t.sin_psi_y().abs() <= 0.5 + 1e-12);
            assert!(t.check().is_ok());
        }
        let fixed = draw_targets(&draw, 3, Some(250.0), &mut rng);
        assert!(fixed.iter().all(|t| t.range_m == 250.0));
    }
}
