use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mars_core::channel::synthesize_if_cube;
use mars_core::clutter::{build_clutter_map, ClutterMap};
use mars_core::config::{load_preset, load_str, parse_config, LoadedConfig};
use mars_core::estimator::{run_pipeline, EpsMode, PipelineConfig, Refinement, Suppressor};
use mars_core::harness::{self, draw_targets, ExperimentPlan};
use mars_core::io::{curves_csv, drops_csv, num, Csv, RunManifest};
use mars_core::scene::{resolution_report, Target, ValidatedScene};
use mars_core::seed::{derive_seed, rng_for};
use mars_core::waveform::{build_schedule, overhead, MarsSchedule, Structure, SymbolKind};
use mars_core::Error;

#[derive(Parser)]
#[command(
    name = "mars",
    version,
    about = "Sparse OFDM radar sensing: simulation, estimation and Monte-Carlo scoring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print range, velocity and angle resolutions.
    Resolution(Common),
    /// Resolve the sensing schedule and report its overhead.
    Waveform(Common),
    /// Build the ground-clutter map and write its per-bin power.
    ClutterMap(Common),
    /// Synthesize one CPI and run the matching estimator.
    Simulate(SimulateArgs),
    /// Run the experiment section of a configuration.
    Montecarlo(MonteCarloArgs),
    /// Rerun a command from its manifest and compare every output.
    Replay(ReplayArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Shipped preset name (table1_car, table1_uav, desk_small).
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// Configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Replace the configured targets with K targets drawn from the
    /// experiment's target distribution.
    #[arg(long, value_name = "K")]
    targets: Option<usize>,
    /// Write the receiver data as `cube.bin`.
    #[arg(long)]
    dump_cube: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scale {
    /// At most 20 drops per sweep point and pipeline.
    Desk,
    /// The configured number of drops.
    Full,
}

#[derive(Args)]
struct MonteCarloArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "desk")]
    scale: Scale,
    /// Drops per sweep point; overrides --scale.
    #[arg(long)]
    drops: Option<usize>,
    /// Run a single drop (with --sweep, default 0).
    #[arg(long)]
    drop: Option<usize>,
    #[arg(long, default_value_t = 0, requires = "drop")]
    sweep: usize,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for the rerun; defaults to `replay/` next to the
    /// manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

const DESK_DROPS: usize = 20;

#[derive(Debug)]
enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Invalid(_)
            | Error::Config { .. }
            | Error::Schedule(_)
            | Error::NegativeBase { .. } => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Res<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match cli.command {
        Command::Resolution(c) => with_config(&c).and_then(|lc| resolution(&lc, &c.out)),
        Command::Waveform(c) => with_config(&c).and_then(|lc| waveform(&lc, &c.out)),
        Command::ClutterMap(c) => with_config(&c).and_then(|lc| clutter_map(&lc, &c.out)),
        Command::Simulate(a) => with_config(&a.common)
            .and_then(|lc| simulate(&lc, &a.common.out, a.targets, a.dump_cube)),
        Command::Montecarlo(a) => with_config(&a.common).and_then(|lc| {
            let configured = lc.plan.as_ref().map_or(0, |p| p.num_drops);
            let drops = match (a.drops, a.scale) {
                (Some(d), _) => d,
                (None, Scale::Desk) => configured.min(DESK_DROPS),
                (None, Scale::Full) => configured,
            };
            let single = a.drop.map(|d| (a.sweep, d));
            montecarlo(&lc, &a.common.out, drops, single)
        }),
        Command::Replay(a) => replay(&a.manifest, a.out.as_deref()),
    };
    match out {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(4)
        }
    }
}

fn with_config(c: &Common) -> Res<LoadedConfig> {
    let lc = match (&c.preset, &c.config) {
        (Some(p), _) => load_preset(p)?,
        (None, Some(path)) => parse_config(path)?,
        (None, None) => {
            return Err(Failure::Config(
                "one of --preset or --config is required".into(),
            ))
        }
    };
    fs::create_dir_all(&c.out)?;
    Ok(lc)
}

fn manifest(lc: &LoadedConfig, command: &str) -> RunManifest {
    RunManifest::new(
        command,
        lc.config.to_toml(),
        lc.config_hash(),
        lc.config.seed,
    )
}

fn finish(m: &RunManifest, out: &Path) -> Res<()> {
    m.save(&out.join("manifest.json"))?;
    Ok(())
}

fn resolution(lc: &LoadedConfig, out: &Path) -> Res<()> {
    let t = Instant::now();
    let s = &lc.scene;
    let plain = resolution_report(&s.radio, &s.array.with_va(false));
    let va = resolution_report(&s.radio, &s.array.with_va(true));
    println!("ΔR = {:.2} m", plain.range_res_m);
    println!("Δv = {:.2} m/s", plain.velocity_res_mps);
    println!(
        "Δsinψx = {} (no VA), {} (VA)",
        fmt3(plain.sin_angle_res_x),
        fmt3(va.sin_angle_res_x)
    );
    println!(
        "Δsinψy = {} (no VA), {} (VA)",
        fmt3(plain.sin_angle_res_y),
        fmt3(va.sin_angle_res_y)
    );
    println!("v_max = {:.2} m/s", plain.max_unambiguous_speed_mps);
    println!("R_max = {:.2} m", s.radio.max_range_m());
    let mut csv = Csv::new(&["quantity", "value", "unit"]);
    for (q, v, u) in [
        ("range_resolution", plain.range_res_m, "m"),
        ("velocity_resolution", plain.velocity_res_mps, "m/s"),
        ("sin_angle_resolution_x", plain.sin_angle_res_x, "1"),
        ("sin_angle_resolution_y", plain.sin_angle_res_y, "1"),
        ("sin_angle_resolution_x_va", va.sin_angle_res_x, "1"),
        ("sin_angle_resolution_y_va", va.sin_angle_res_y, "1"),
        (
            "max_unambiguous_speed",
            plain.max_unambiguous_speed_mps,
            "m/s",
        ),
        ("max_range", s.radio.max_range_m(), "m"),
    ] {
        csv.row([q.to_string(), num(v), u.to_string()]);
    }
    let mut m = manifest(lc, "resolution");
    m.write_output(out, "resolution.csv", csv.as_str().as_bytes())?;
    m.timings_s
        .insert("resolution".into(), t.elapsed().as_secs_f64());
    finish(&m, out)
}

/// Three significant figures.
fn fmt3(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let digits = (2 - v.abs().log10().floor() as i32).max(0) as usize;
    format!("{v:.digits$}")
}

fn scene_schedule(s: &ValidatedScene) -> Res<MarsSchedule> {
    Ok(build_schedule(&s.radio, &s.array, &s.waveform, s.seed)?)
}

fn waveform(lc: &LoadedConfig, out: &Path) -> Res<()> {
    let t = Instant::now();
    let sch = scene_schedule(&lc.scene)?;
    let o = overhead(&sch);
    println!("structure = {}", sch.structure.as_str());
    println!("chirp PRIs = {:?}", sch.chirp_pri_indices);
    println!("slots per PRI = {}", sch.slots());
    println!(
        "chirp power = {} W, tone power = {} W",
        num(sch.chirp_power_w),
        num(sch.tone_power_w)
    );
    println!(
        "overhead = {:.3}% ({} of {} resource elements)",
        100.0 * o.fraction,
        o.chirp_elements + o.tone_elements,
        o.total_elements
    );
    let mut csv = Csv::new(&["pri", "slot", "kind", "subcarrier", "power_w", "time_s"]);
    for sym in sch.sensing_symbols() {
        let (kind, sub) = match sym.kind {
            SymbolKind::Chirp { .. } => ("chirp", String::new()),
            SymbolKind::Tone { subcarrier } => ("tone", subcarrier.to_string()),
        };
        csv.row([
            sym.pri.to_string(),
            sym.slot.to_string(),
            kind.into(),
            sub,
            num(sym.power_w),
            num(sym.time_s),
        ]);
    }
    let mut ov = Csv::new(&[
        "chirp_elements",
        "tone_elements",
        "total_elements",
        "fraction",
    ]);
    ov.row([
        o.chirp_elements.to_string(),
        o.tone_elements.to_string(),
        o.total_elements.to_string(),
        num(o.fraction),
    ]);
    let mut m = manifest(lc, "waveform");
    m.write_output(out, "schedule.toml", sch.to_toml().as_bytes())?;
    m.write_output(out, "symbols.csv", csv.as_str().as_bytes())?;
    m.write_output(out, "overhead.csv", ov.as_str().as_bytes())?;
    m.timings_s
        .insert("waveform".into(), t.elapsed().as_secs_f64());
    finish(&m, out)
}

fn build_clutter(s: &ValidatedScene) -> Res<Option<ClutterMap>> {
    if !s.clutter.enabled {
        return Ok(None);
    }
    Ok(Some(build_clutter_map(
        &s.clutter, &s.radio, &s.array, s.seed,
    )?))
}

fn clutter_map(lc: &LoadedConfig, out: &Path) -> Res<()> {
    let t = Instant::now();
    let s = &lc.scene;
    let map = build_clutter_map(&s.clutter, &s.radio, &s.array, s.seed)?;
    let res = resolution_report(&s.radio, &s.array).range_res_m;
    let per_bin = map.power_per_bin();
    let total: f64 = per_bin.iter().sum();
    println!(
        "terrain = {}, patches = {}",
        map.settings.terrain, map.patch_count
    );
    println!(
        "clutter power at unit transmit power = {} W per element",
        num(total / map.elements() as f64)
    );
    let mut csv = Csv::new(&["range_bin", "range_m", "power_w"]);
    for (b, p) in per_bin.iter().enumerate() {
        csv.row([
            b.to_string(),
            num(b as f64 * res),
            num(p / map.elements() as f64),
        ]);
    }
    let mut m = manifest(lc, "clutter-map");
    m.write_output(out, "clutter_map.csv", csv.as_str().as_bytes())?;
    m.timings_s
        .insert("clutter_map".into(), t.elapsed().as_secs_f64());
    finish(&m, out)
}

/// Pipeline used by `simulate`: the first configured pipeline matching the
/// scene, otherwise a default for its structure.
fn simulate_pipeline(lc: &LoadedConfig) -> PipelineConfig {
    let s = &lc.scene;
    let va = s.array.va_enabled;
    if let Some(p) = lc.plan.as_ref().and_then(|p| {
        p.pipelines
            .iter()
            .find(|p| p.structure == s.waveform.structure && p.va == va)
    }) {
        return p.clone();
    }
    let (suppressor, eps) = match s.waveform.structure {
        Structure::Comb => (Suppressor::Sthp, EpsMode::Inf),
        Structure::Lshape => (Suppressor::Stap, EpsMode::Zero),
        _ => (Suppressor::MatchedFilter, EpsMode::Inf),
    };
    let mut pc = PipelineConfig {
        label: String::new(),
        structure: s.waveform.structure,
        refinement: Refinement::Fft,
        suppressor,
        eps,
        va,
    };
    pc.label = pc.default_label();
    pc
}

fn targets_csv(targets: &[Target]) -> String {
    let mut csv = Csv::new(&[
        "target",
        "range_m",
        "velocity_mps",
        "sin_psi_x",
        "sin_psi_y",
        "rcs_m2",
    ]);
    for (i, t) in targets.iter().enumerate() {
        csv.row([
            i.to_string(),
            num(t.range_m),
            num(t.radial_velocity_mps),
            num(t.sin_psi_x()),
            num(t.sin_psi_y()),
            num(t.rcs_m2),
        ]);
    }
    csv.into_string()
}

fn simulate(lc: &LoadedConfig, out: &Path, k: Option<usize>, dump: bool) -> Res<()> {
    let mut s = lc.scene.clone();
    let mut m = manifest(lc, "simulate");
    if let Some(k) = k {
        let plan = lc.plan.as_ref().ok_or_else(|| {
            Failure::Config("--targets needs an [experiment] section to draw targets from".into())
        })?;
        let mut rng = rng_for(s.seed, "simulate-targets", &[]);
        s.targets = draw_targets(&plan.draw, k, None, &mut rng);
        m.args.insert("targets".into(), k.to_string());
    }
    if dump {
        m.args.insert("dump_cube".into(), "true".into());
    }
    let t = Instant::now();
    let clutter = build_clutter(&s)?;
    m.timings_s
        .insert("clutter".into(), t.elapsed().as_secs_f64());
    let t = Instant::now();
    let sch = scene_schedule(&s)?;
    let cube = synthesize_if_cube(
        &s,
        &sch,
        clutter.as_ref(),
        derive_seed(s.seed, "simulate-cube", &[]),
    )?;
    m.timings_s
        .insert("synthesize".into(), t.elapsed().as_secs_f64());
    println!(
        "cube: L = {}, W = {}, N = {}, M_tone = {}, slots = {}",
        cube.rx_count(),
        cube.chirp_occasions(),
        cube.samples,
        cube.tone_count(),
        cube.slots()
    );
    m.write_output(out, "targets.csv", targets_csv(&s.targets).as_bytes())?;
    if dump {
        m.write_output(out, "cube.bin", &mars_core::io::encode_cube(&cube)?)?;
    }
    if !s.targets.is_empty() {
        let pc = simulate_pipeline(lc);
        let guard = lc.plan.as_ref().map_or(1, |p| p.guard_bins);
        let t = Instant::now();
        let est = run_pipeline(&cube, &s.radio, &s.array, &sch, &pc, s.targets.len(), guard)?;
        m.timings_s
            .insert("estimate".into(), t.elapsed().as_secs_f64());
        let mut csv = Csv::new(&[
            "target",
            "pipeline",
            "range_m",
            "velocity_mps",
            "sin_psi_x",
            "sin_psi_y",
            "amplitude",
            "range_bin",
            "velocity_bin",
            "angle_x_bin",
            "angle_y_bin",
        ]);
        for (i, e) in est.iter().enumerate() {
            println!(
                "estimate {i}: R = {:.2} m, v = {:.2} m/s, sinψx = {:.3}, sinψy = {:.3} ({})",
                e.range_m,
                e.velocity_mps,
                e.sin_psi_x(),
                e.sin_psi_y(),
                pc.label
            );
            csv.row([
                i.to_string(),
                pc.label.clone(),
                num(e.range_m),
                num(e.velocity_mps),
                num(e.sin_psi_x()),
                num(e.sin_psi_y()),
                num(e.amplitude),
                e.bins.range.to_string(),
                e.bins.velocity.to_string(),
                e.bins.angle_x.to_string(),
                e.bins.angle_y.to_string(),
            ]);
        }
        m.write_output(out, "estimates.csv", csv.as_str().as_bytes())?;
    }
    finish(&m, out)
}

fn montecarlo(
    lc: &LoadedConfig,
    out: &Path,
    drops: usize,
    single: Option<(usize, usize)>,
) -> Res<()> {
    let mut plan: ExperimentPlan = lc
        .plan
        .clone()
        .ok_or_else(|| Failure::Config("the configuration has no [experiment] section".into()))?;
    let mut m = manifest(lc, "montecarlo");
    plan.num_drops = drops;
    m.args.insert("drops".into(), drops.to_string());
    let t = Instant::now();
    let clutter = build_clutter(&lc.scene)?;
    m.timings_s
        .insert("clutter".into(), t.elapsed().as_secs_f64());
    let t = Instant::now();
    let result = match single {
        Some((s, d)) => {
            m.args.insert("sweep".into(), s.to_string());
            m.args.insert("drop".into(), d.to_string());
            if s >= plan.sweep_points().len() {
                return Err(Failure::Config(format!("sweep index {s} out of range")));
            }
            let reports = (0..plan.pipelines.len())
                .map(|p| harness::run_drop(&lc.scene, &plan, clutter.as_ref(), p, s, d))
                .collect::<Result<Vec<_>, _>>()?;
            let value = plan.sweep_points()[s];
            let rows = reports
                .iter()
                .flat_map(|r| harness::curve_rows(value, &r.pipeline, &[r]))
                .collect();
            harness::MonteCarloResult {
                rows,
                drops: reports,
            }
        }
        None => harness::monte_carlo(&lc.scene, &plan, clutter.as_ref())?,
    };
    m.timings_s
        .insert("drops".into(), t.elapsed().as_secs_f64());
    for r in result.rows.iter().filter(|r| r.metric == "hit_rate") {
        println!(
            "{:>28} {:>10} hit rate {} ± {} over {} targets",
            r.pipeline,
            r.sweep_value.map(num).unwrap_or_else(|| "-".into()),
            r.value
                .map(|v| format!("{v:.3}"))
                .unwrap_or_else(|| "-".into()),
            r.ci.map(|v| format!("{v:.3}"))
                .unwrap_or_else(|| "-".into()),
            r.targets
        );
    }
    m.write_output(out, "curves.csv", curves_csv(&result.rows).as_bytes())?;
    m.write_output(out, "drops.csv", drops_csv(&result.drops).as_bytes())?;
    finish(&m, out)
}

fn replay(path: &Path, out: Option<&Path>) -> Res<()> {
    let old = RunManifest::load(path)?;
    let lc = load_str(&old.config_toml)?;
    if lc.config_hash() != old.config_hash {
        return Err(Failure::Runtime(format!(
            "config hash mismatch: manifest {}, recomputed {}",
            old.config_hash,
            lc.config_hash()
        )));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let out = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| base.join("replay"));
    fs::create_dir_all(&out)?;
    let arg = |k: &str| -> Res<Option<usize>> {
        old.args
            .get(k)
            .map(|v| {
                v.parse()
                    .map_err(|_| Failure::Runtime(format!("bad manifest argument {k} = {v}")))
            })
            .transpose()
    };
    match old.command.as_str() {
        "resolution" => resolution(&lc, &out)?,
        "waveform" => waveform(&lc, &out)?,
        "clutter-map" => clutter_map(&lc, &out)?,
        "simulate" => simulate(
            &lc,
            &out,
            arg("targets")?,
            old.args.contains_key("dump_cube"),
        )?,
        "montecarlo" => {
            let single = arg("drop")?.map(|d| (arg("sweep").ok().flatten().unwrap_or(0), d));
            let drops = arg("drops")?
                .ok_or_else(|| Failure::Runtime("manifest lacks the drop count".into()))?;
            montecarlo(&lc, &out, drops, single)?
        }
        other => {
            return Err(Failure::Runtime(format!(
                "unknown command `{other}` in manifest"
            )))
        }
    }
    let mut mismatches = 0;
    for o in &old.outputs {
        let now = fs::read(out.join(&o.path))
            .map(|b| mars_core::io::sha256_hex(&b))
            .unwrap_or_default();
        let same = now == o.sha256;
        println!("{} {}", if same { "identical" } else { "DIFFERS" }, o.path);
        mismatches += usize::from(!same);
    }
    if mismatches > 0 {
        return Err(Failure::Runtime(format!(
            "{mismatches} output(s) differ from the manifest"
        )));
    }
    Ok(())
}
