//! Command-line surface: run scenarios, dump intermediate grids, benchmark
//! the pipeline, validate input files, and regenerate bundled fixtures.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleParams;
use crate::fixtures;
use crate::grid_io::{write_grid_stack, GridStack};
use crate::occupancy::{load_occupancy, predict_ego_conditioned_yield, PredictorConfig};
use crate::planner::{plan, PlannerConfig};
use crate::proposals::{build_deviation_maps, load_proposals, sample_centerline_proposals};
use crate::raster::{build_input_layers, AgentHistory, Grid, GridSpec};
use crate::sim::{
    load_scenario, step_closed_loop, Predictor, Scenario, SimMode, SimResult, StackConfig,
};
use crate::{T_FUTURE, T_POSE, TICK_DT};

#[derive(Parser)]
#[command(name = "gridplan", about = "Proposal-guided MCTS motion planner and scenario simulator")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one or more scenario files closed-loop and write metrics.
    Run(RunArgs),
    /// Write the planner's intermediate grids for one scenario tick.
    DumpGrids(DumpArgs),
    /// Time each pipeline module over repeated runs of a dense scene.
    Bench(BenchArgs),
    /// Schema-check scenario, map, or proposal files.
    Validate(ValidateArgs),
    /// Regenerate the bundled scenario fixtures.
    GenFixtures(GenFixturesArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Nr,
    R,
}

impl From<ModeArg> for SimMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Nr => SimMode::Nr,
            ModeArg::R => SimMode::R,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON files.
    #[arg(required = true)]
    scenarios: Vec<PathBuf>,
    /// Override the scenario's execution mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Occupancy predictor: `cv`, `ego-cond`, or `file:<path>`.
    #[arg(long, default_value = "ego-cond")]
    predictor: String,
    /// Proposal file used at the first tick instead of the sampler.
    #[arg(long)]
    proposals: Option<PathBuf>,
    /// JSON config file with optional `planner`, `vehicle`, `predictor` sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Planner rng seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also export per-tick frames as JSON lines.
    #[arg(long)]
    frames: bool,
}

#[derive(Args)]
struct DumpArgs {
    scenario: PathBuf,
    /// Tick at which to capture the planner inputs.
    #[arg(long, default_value_t = 0)]
    tick: usize,
    #[arg(long, default_value = "ego-cond")]
    predictor: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Repetitions per measurement.
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FileKind {
    Scenario,
    Map,
    Proposals,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, value_enum)]
    kind: FileKind,
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

#[derive(Args)]
struct GenFixturesArgs {
    #[arg(long, default_value = "fixtures")]
    out: PathBuf,
}

/// Optional config file sections; anything omitted keeps defaults.
#[derive(Default, Deserialize)]
#[serde(default)]
struct ConfigFile {
    planner: Option<PlannerConfig>,
    vehicle: Option<VehicleParams>,
    predictor: Option<PredictorConfig>,
}

fn read_config(path: &Option<PathBuf>) -> Result<ConfigFile> {
    match path {
        None => Ok(ConfigFile::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn parse_predictor(arg: &str, spec_hint: Option<&GridSpec>) -> Result<Predictor> {
    match arg {
        "cv" => Ok(Predictor::ConstantVelocity),
        "ego-cond" => Ok(Predictor::EgoConditioned),
        other => {
            let path = other
                .strip_prefix("file:")
                .ok_or_else(|| anyhow!("unknown predictor `{other}` (expected cv, ego-cond, or file:<path>)"))?;
            let spec = spec_hint.ok_or_else(|| anyhow!("file predictor needs a scenario"))?;
            let seq = load_occupancy(Path::new(path), spec)?;
            Ok(Predictor::Precomputed(seq))
        }
    }
}

/// Entry point; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::DumpGrids(args) => cmd_dump_grids(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Validate(args) => cmd_validate(args),
        Command::GenFixtures(args) => cmd_gen_fixtures(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

#[derive(Serialize)]
struct MetricStat {
    mean: f64,
    min: f64,
    max: f64,
}

impl MetricStat {
    fn over(values: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        Self {
            mean: values.iter().sum::<f64>() / n,
            min: values.iter().cloned().fold(f64::INFINITY, f64::min),
            max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Serialize)]
struct SummaryScenario {
    name: String,
    mode: SimMode,
    collision: bool,
    collision_time: Option<f64>,
    offroad_fraction: f64,
    progress_ratio: f64,
    ticks: usize,
}

#[derive(Serialize)]
struct Summary {
    scenarios: Vec<SummaryScenario>,
    collisions: usize,
    offroad_fraction: MetricStat,
    progress_ratio: MetricStat,
}

fn build_stack(args_predictor: &str, proposals: &Option<PathBuf>, config: &ConfigFile, seed: u64, frames: bool, scn: &Scenario) -> Result<StackConfig> {
    let mut planner = config.planner.unwrap_or_default();
    planner.seed = seed;
    let spec = GridSpec::ego_centric(scn.ego_state.pose());
    let predictor = parse_predictor(args_predictor, Some(&spec))?;
    let initial_proposals = match proposals {
        None => None,
        Some(path) => Some(load_proposals(path, &scn.ego_state, &scn.ego_params)?),
    };
    Ok(StackConfig {
        modes: 3,
        predictor,
        predictor_cfg: config.predictor.unwrap_or_default(),
        planner,
        initial_proposals,
        collect_frames: frames,
    })
}

fn cmd_run(args: RunArgs) -> Result<i32> {
    std::fs::create_dir_all(&args.out)?;
    let config = read_config(&args.config)?;
    let mut results: Vec<SimResult> = Vec::new();
    let mut failed = false;

    for path in &args.scenarios {
        let mut scn = load_scenario(path).with_context(|| format!("loading {}", path.display()))?;
        if let Some(v) = config.vehicle {
            scn.ego_params = v;
        }
        let mode = args.mode.map(SimMode::from).unwrap_or(scn.mode);
        let stack = build_stack(&args.predictor, &args.proposals, &config, args.seed, args.frames, &scn)?;
        let result = step_closed_loop(&scn, mode, &stack)
            .with_context(|| format!("scenario {}", scn.name))?;
        if let Some(reason) = &result.aborted {
            eprintln!(
                "scenario {} aborted at tick {}: {reason}",
                result.scenario, result.ticks_executed
            );
            failed = true;
        }

        let base = args.out.join(&result.scenario);
        std::fs::write(
            base.with_extension("metrics.json"),
            serde_json::to_string_pretty(&result)?,
        )?;
        std::fs::write(
            base.with_extension("timings.json"),
            serde_json::to_string_pretty(&serde_json::json!({
                "scenario": result.scenario,
                "planner_latency_s": result.latencies_s,
            }))?,
        )?;
        if args.frames {
            let mut lines = String::new();
            for frame in &result.frames {
                lines.push_str(&serde_json::to_string(frame)?);
                lines.push('\n');
            }
            std::fs::write(base.with_extension("frames.jsonl"), lines)?;
        }
        results.push(result);
    }

    let offroad: Vec<f64> = results.iter().map(|r| r.offroad_fraction).collect();
    let progress: Vec<f64> = results.iter().map(|r| r.progress_ratio).collect();
    let summary = Summary {
        scenarios: results
            .iter()
            .map(|r| SummaryScenario {
                name: r.scenario.clone(),
                mode: r.mode,
                collision: r.collision.is_some(),
                collision_time: r.collision.map(|c| c.time),
                offroad_fraction: r.offroad_fraction,
                progress_ratio: r.progress_ratio,
                ticks: r.ticks_executed,
            })
            .collect(),
        collisions: results.iter().filter(|r| r.collision.is_some()).count(),
        offroad_fraction: MetricStat::over(&offroad),
        progress_ratio: MetricStat::over(&progress),
    };
    std::fs::write(
        args.out.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    println!(
        "{} scenario(s): {} collision(s), mean progress {:.3}",
        results.len(),
        summary.collisions,
        summary.progress_ratio.mean
    );
    Ok(if failed { 2 } else { 0 })
}

fn grids_to_stack(grids: &[Grid]) -> GridStack {
    let spec = grids[0].spec;
    GridStack {
        height: spec.height as u32,
        width: spec.width as u32,
        resolution: spec.resolution as f32,
        frames: grids.iter().map(|g| g.values.clone()).collect(),
    }
}

fn cmd_dump_grids(args: DumpArgs) -> Result<i32> {
    std::fs::create_dir_all(&args.out)?;
    let config = read_config(&args.config)?;
    let mut scn = load_scenario(&args.scenario)?;
    if args.tick > scn.n_ticks {
        bail!("tick {} beyond scenario duration ({} ticks)", args.tick, scn.n_ticks);
    }

    // Advance the closed loop to the requested tick, then capture the planner
    // inputs exactly as the next planning call would see them.
    let stack = build_stack(&args.predictor, &None, &config, args.seed, false, &scn)?;
    let (ego, ego_history, agent_tracks) = if args.tick == 0 {
        let ego = scn.ego_state;
        let tracks: Vec<(String, (f64, f64), Vec<crate::geom::Pose2>)> = scn
            .agents
            .iter()
            .map(|a| {
                let p = a.poses[0];
                (a.id.clone(), a.dims, vec![crate::geom::Pose2::new(p[0], p[1], p[2])])
            })
            .collect();
        (ego, vec![ego.pose()], tracks)
    } else {
        scn.n_ticks = args.tick;
        scn.duration = args.tick as f64 * TICK_DT;
        let result = step_closed_loop(&scn, scn.mode, &stack)?;
        if let Some(reason) = result.aborted {
            bail!("scenario aborted before tick {}: {reason}", args.tick);
        }
        let ego = *result.executed.states.last().unwrap();
        let history = result.executed.states.iter().map(|s| s.pose()).collect();
        let tracks = result
            .agent_logs
            .into_iter()
            .map(|l| (l.id, l.dims, l.poses))
            .collect();
        (ego, history, tracks)
    };

    let pad = |poses: &[crate::geom::Pose2]| -> Vec<crate::geom::Pose2> {
        let mut out = Vec::with_capacity(T_POSE);
        for i in 0..T_POSE {
            let idx = (poses.len() + i).checked_sub(T_POSE);
            out.push(idx.map_or(poses[0], |j| poses[j]));
        }
        out
    };

    let spec = GridSpec::ego_centric(ego.pose());
    let proposals = sample_centerline_proposals(&ego, &scn.route, &scn.ego_params, 3)?;

    let tracks: Vec<crate::occupancy::AgentTrack> = agent_tracks
        .iter()
        .map(|(id, dims, poses)| crate::occupancy::AgentTrack {
            id: id.clone(),
            dims: *dims,
            poses: poses.clone(),
            speed: if poses.len() >= 2 {
                poses[poses.len() - 1]
                    .position()
                    .dist(poses[poses.len() - 2].position())
                    / TICK_DT
            } else {
                0.0
            },
            lane: None,
        })
        .collect();

    let occ_per_mode: Vec<_> = match &stack.predictor {
        Predictor::ConstantVelocity => {
            let occ = crate::occupancy::predict_constant_velocity(&tracks, &spec, &stack.predictor_cfg);
            vec![occ; proposals.len()]
        }
        Predictor::EgoConditioned => proposals
            .modes
            .iter()
            .map(|m| predict_ego_conditioned_yield(&tracks, m, scn.ego_params.dims(), &spec, &stack.predictor_cfg))
            .collect::<Result<_, _>>()?,
        Predictor::Precomputed(seq) => vec![seq.clone(); proposals.len()],
    };
    let dev_per_mode: Vec<_> = proposals
        .modes
        .iter()
        .map(|m| build_deviation_maps(m, scn.ego_params.dims(), &spec))
        .collect::<Result<_, _>>()?;

    let result = plan(&ego, &proposals, &occ_per_mode, &dev_per_mode, &scn.ego_params, &stack.planner)?;
    let mode = result.mode;

    let others: Vec<AgentHistory> = agent_tracks
        .iter()
        .map(|(_, dims, poses)| AgentHistory {
            dims: *dims,
            poses: pad(poses),
        })
        .collect();
    let layers = build_input_layers(
        &AgentHistory {
            dims: scn.ego_params.dims(),
            poses: pad(&ego_history),
        },
        &others,
        (&scn.graph, &scn.drivable),
        &proposals.modes[mode]
            .states
            .iter()
            .map(|s| s.pose())
            .collect::<Vec<_>>(),
        scn.ego_params.dims(),
        T_FUTURE,
        &spec,
    )?;

    let occ = &occ_per_mode[mode];
    let dev = &dev_per_mode[mode];
    let cost: Vec<Grid> = (0..T_FUTURE)
        .map(|t| {
            let mut g = occ.grids[t].clone();
            let alpha = stack.planner.alpha as f32;
            let beta = stack.planner.beta as f32;
            for (v, d) in g.values.iter_mut().zip(&dev.maps[t].values) {
                *v = alpha * *v + beta * d;
            }
            g
        })
        .collect();

    for (name, grids) in [
        ("p_ego", &layers.p_ego),
        ("p_others", &layers.p_others),
        ("statics", &layers.statics),
        ("ego_future", &layers.ego_future),
        ("occupancy", &occ.grids),
        ("deviation", &dev.maps),
        ("cost", &cost),
    ] {
        write_grid_stack(&args.out.join(format!("{name}.hypg")), &grids_to_stack(grids))?;
    }
    println!(
        "dumped tick {} grids for mode {mode} to {}",
        args.tick,
        args.out.display()
    );
    Ok(0)
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    samples[samples.len() / 2]
}

fn cmd_bench(args: BenchArgs) -> Result<i32> {
    let config = read_config(&args.config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool");
    pool.install(|| bench_inner(&config, args.reps.max(1)))
}

fn bench_inner(config: &ConfigFile, reps: usize) -> Result<i32> {
    // Dense scene: the merge fixture's planning query plus extra traffic.
    let doc = fixtures::merge();
    let scn = Scenario::from_doc(doc).expect("bundled fixture");
    let params = config.vehicle.unwrap_or(scn.ego_params);
    let predictor_cfg = config.predictor.unwrap_or_default();
    let planner_cfg = config.planner.unwrap_or_default();
    let ego = scn.ego_state;
    let spec = GridSpec::ego_centric(ego.pose());

    let mut tracks: Vec<crate::occupancy::AgentTrack> = scn
        .agents
        .iter()
        .map(|a| crate::occupancy::AgentTrack {
            id: a.id.clone(),
            dims: a.dims,
            poses: vec![crate::geom::Pose2::new(a.poses[0][0], a.poses[0][1], a.poses[0][2])],
            speed: 8.0,
            lane: a.lane.clone(),
        })
        .collect();
    for i in 0..5 {
        let x = 40.0 + 12.0 * i as f64;
        tracks.push(crate::occupancy::AgentTrack {
            id: format!("traffic{i}"),
            dims: (4.8, 2.0),
            poses: vec![crate::geom::Pose2::new(x, if i % 2 == 0 { 3.0 } else { -3.0 }, 0.0)],
            speed: 6.0,
            lane: None,
        });
    }

    println!("module timings over {reps} reps (median seconds)");
    println!("{:<22}{:>10}{:>10}{:>10}", "module", "1 mode", "2 modes", "3 modes");
    let mut per_modes: Vec<[f64; 4]> = Vec::new();
    let mut totals = [0.0f64; 3];
    for (mi, modes) in [1usize, 2, 3].iter().enumerate() {
        let mut t_prop = vec![];
        let mut t_occ = vec![];
        let mut t_dev = vec![];
        let mut t_plan = vec![];
        let mut t_total = vec![];
        for _ in 0..reps {
            let start_all = Instant::now();
            let t0 = Instant::now();
            let proposals = sample_centerline_proposals(&ego, &scn.route, &params, *modes)?;
            t_prop.push(t0.elapsed().as_secs_f64());

            let t0 = Instant::now();
            let occ: Vec<_> = proposals
                .modes
                .iter()
                .map(|m| predict_ego_conditioned_yield(&tracks, m, params.dims(), &spec, &predictor_cfg))
                .collect::<Result<_, _>>()?;
            t_occ.push(t0.elapsed().as_secs_f64());

            let t0 = Instant::now();
            let dev: Vec<_> = proposals
                .modes
                .iter()
                .map(|m| build_deviation_maps(m, params.dims(), &spec))
                .collect::<Result<_, _>>()?;
            t_dev.push(t0.elapsed().as_secs_f64());

            let t0 = Instant::now();
            plan(&ego, &proposals, &occ, &dev, &params, &planner_cfg)?;
            t_plan.push(t0.elapsed().as_secs_f64());
            t_total.push(start_all.elapsed().as_secs_f64());
        }
        per_modes.push([
            median(&mut t_prop),
            median(&mut t_occ),
            median(&mut t_dev),
            median(&mut t_plan),
        ]);
        totals[mi] = median(&mut t_total);
    }
    for (row, label) in [
        (0usize, "proposal generation"),
        (1, "occupancy prediction"),
        (2, "rasterization"),
        (3, "mcts planning"),
    ] {
        println!(
            "{:<22}{:>10.4}{:>10.4}{:>10.4}",
            label, per_modes[0][row], per_modes[1][row], per_modes[2][row]
        );
    }
    println!(
        "{:<22}{:>10.4}{:>10.4}{:>10.4}",
        "total", totals[0], totals[1], totals[2]
    );
    for (mi, total) in totals.iter().enumerate() {
        let sum: f64 = per_modes[mi].iter().sum();
        println!(
            "accounting {} mode(s): modules sum {:.4}s vs total {:.4}s",
            mi + 1,
            sum,
            total
        );
    }
    Ok(0)
}

fn cmd_validate(args: ValidateArgs) -> Result<i32> {
    let mut failed = false;
    for path in &args.files {
        let outcome: Result<()> = (|| {
            let text = std::fs::read_to_string(path)?;
            match args.kind {
                FileKind::Scenario => {
                    crate::sim::load_scenario_str(&text)?;
                }
                FileKind::Map => {
                    crate::map::load_map(&text)?;
                }
                FileKind::Proposals => {
                    // Validate against the file's own starting state.
                    let value: serde_json::Value = serde_json::from_str(&text)?;
                    let first = value
                        .pointer("/modes/0/states/0")
                        .and_then(|s| s.as_array())
                        .ok_or_else(|| anyhow!("no modes/states in proposal file"))?;
                    let state = crate::dynamics::VehicleState::new(
                        first[0].as_f64().unwrap_or(0.0),
                        first[1].as_f64().unwrap_or(0.0),
                        first[2].as_f64().unwrap_or(0.0),
                        first[3].as_f64().unwrap_or(0.0),
                    );
                    load_proposals(path, &state, &VehicleParams::default())?;
                }
            }
            Ok(())
        })();
        match outcome {
            Ok(()) => println!("{}: ok", path.display()),
            Err(e) => {
                println!("{}: INVALID ({e:#})", path.display());
                failed = true;
            }
        }
    }
    Ok(if failed { 2 } else { 0 })
}

fn cmd_gen_fixtures(args: GenFixturesArgs) -> Result<i32> {
    fixtures::write_all(&args.out)?;
    println!("wrote {} fixtures to {}", fixtures::all().len(), args.out.display());
    Ok(0)
}
