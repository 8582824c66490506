//! `ctxmem` subcommands.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use context_memory::eval::{
    bench_retrieval, compare_strategies, revisit_suite, BenchLayout, EvalSettings,
};
use context_memory::geometry::{Bounds, CameraPose};
use context_memory::trajectory::{
    check_constraints, generate_roam, loop_roam, rotate_and_return, ConstraintLimits, LoopSpec,
    RoamSpec, Trajectory, DESK_SCALE_FRAMES,
};
use context_memory::world::{generate_world, WorldSpec};

use crate::config::{Config, Overrides, LOG_ENV};

type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Parser)]
#[command(
    name = "ctxmem",
    version,
    about = "FOV-overlap context memory for camera-controlled generation"
)]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic world and write it as JSON.
    Worldgen {
        #[arg(long, default_value_t = 4.0)]
        density: f64,
        #[arg(long, default_value_t = 8)]
        occluders: usize,
        /// Half-width of the square world, meters.
        #[arg(long, default_value_t = 50.0)]
        half_size: f64,
        #[arg(long = "world-seed", default_value_t = 7)]
        world_seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Generate a camera trajectory as JSONL.
    Trajgen {
        #[arg(value_enum)]
        kind: TrajKind,
        #[arg(long, default_value_t = DESK_SCALE_FRAMES)]
        frames: usize,
        #[arg(long, default_value_t = 50.0)]
        half_size: f64,
        #[arg(long, default_value_t = 12)]
        control_points: usize,
        #[arg(long = "traj-seed", default_value_t = 1)]
        traj_seed: u64,
        /// Rotation for `rotate`, degrees.
        #[arg(long, default_value_t = 360.0)]
        degrees: f64,
        /// Loop radius, meters.
        #[arg(long, default_value_t = 12.0)]
        radius: f64,
        #[arg(long, default_value_t = 2.0)]
        laps: f64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Check a trajectory's per-segment motion limits; exits 1 on failure.
    CheckTraj {
        path: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Compare retrieval strategies on the revisit fixtures.
    Eval {
        /// Write the JSON report here.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write per-segment rows here.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        timing: bool,
    },
    /// Naive scan vs grid pruning.
    Bench {
        #[arg(long, default_value_t = 10_000)]
        frames: usize,
        #[arg(long, default_value_t = 1_000)]
        queries: usize,
        #[arg(long, default_value_t = 500.0)]
        world_size: f64,
        #[arg(long = "bench-seed", default_value_t = 1)]
        bench_seed: u64,
        #[arg(long)]
        single_cell: bool,
        #[arg(long)]
        json: bool,
    },
    /// Run the steering HTTP server.
    Serve {
        /// Overrides the environment and the config file.
        #[arg(long)]
        bind: Option<String>,
    },
    /// Re-run a session step log and compare every step; exits 1 on mismatch.
    SessionReplay { log: PathBuf },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TrajKind {
    Roam,
    Rotate,
    Loop,
}

pub fn run(cli: Cli) -> Result<ExitCode, BoxError> {
    let cfg = Config::resolve(&cli.overrides)?;
    let mut out = io::stdout().lock();
    match cli.command {
        Command::Worldgen {
            density,
            occluders,
            half_size,
            world_seed,
            out: path,
        } => {
            let world = generate_world(&WorldSpec {
                density,
                occluder_count: occluders,
                bounds: Bounds::centered(half_size),
                seed: world_seed,
            })?;
            world.save(&path)?;
            writeln!(
                out,
                "{} landmarks, {} occluders -> {}",
                world.landmarks.len(),
                world.occluders.len(),
                path.display()
            )?;
        }
        Command::Trajgen {
            kind,
            frames,
            half_size,
            control_points,
            traj_seed,
            degrees,
            radius,
            laps,
            out: path,
        } => {
            let traj = match kind {
                TrajKind::Roam => generate_roam(&RoamSpec::new(
                    frames,
                    Bounds::centered(half_size),
                    control_points,
                    traj_seed,
                ))?,
                TrajKind::Rotate => {
                    rotate_and_return(CameraPose::at(0.0, 0.0, 0.0), degrees, frames + frames % 2)?
                }
                TrajKind::Loop => loop_roam(&LoopSpec {
                    radius,
                    laps,
                    ..LoopSpec::default()
                })?,
            };
            traj.save(&path)?;
            writeln!(out, "{} frames -> {}", traj.len(), path.display())?;
        }
        Command::CheckTraj { path, json } => {
            let traj = Trajectory::load(&path)?;
            let report = check_constraints(&traj, &ConstraintLimits::default());
            if json {
                writeln!(out, "{}", context_memory::json::to_string(&report)?)?;
            } else {
                writeln!(out, "segment  frames      disp_m  net_deg  cum_deg  ok")?;
                for s in &report.segments {
                    writeln!(
                        out,
                        "{:>7}  {:>5}-{:<5} {:>6.2}  {:>7.1}  {:>7.1}  {}",
                        s.index,
                        s.start_frame,
                        s.end_frame,
                        s.displacement,
                        s.net_yaw_change.to_degrees(),
                        s.cumulative_yaw_change.to_degrees(),
                        if s.pass { "yes" } else { "NO" }
                    )?;
                }
                let failed = report.segments.iter().filter(|s| !s.pass).count();
                writeln!(
                    out,
                    "{}: {} segments, {failed} failing",
                    if report.pass { "PASS" } else { "FAIL" },
                    report.segments.len()
                )?;
            }
            if !report.pass {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Eval { json, csv, timing } => {
            let settings = EvalSettings {
                overlap: cfg.overlap,
                retrieval: cfg.retrieval,
                strategies: cfg.eval.strategies.clone(),
                seeds: cfg.eval.seeds.clone(),
                timing,
                ..EvalSettings::default()
            };
            let cases = revisit_suite(&cfg.eval.world_seeds)?;
            let run = compare_strategies(&cases, &settings)?;
            writeln!(
                out,
                "# overlap   {}",
                context_memory::json::to_string(&cfg.overlap)?
            )?;
            writeln!(
                out,
                "# retrieval {}",
                context_memory::json::to_string(&cfg.retrieval)?
            )?;
            write!(out, "{}", run.report.to_table())?;
            if let Some(p) = json {
                fs::write(&p, run.report.to_json())?;
            }
            if let Some(p) = csv {
                fs::write(&p, run.series_csv())?;
            }
        }
        Command::Bench {
            frames,
            queries,
            world_size,
            bench_seed,
            single_cell,
            json,
        } => {
            let layout = if single_cell {
                BenchLayout::SingleCell
            } else {
                BenchLayout::Uniform
            };
            let r = bench_retrieval(
                frames,
                queries,
                world_size,
                layout,
                &cfg.overlap,
                bench_seed,
            )?;
            if json {
                writeln!(out, "{}", context_memory::json::to_string(&r)?)?;
            } else {
                writeln!(
                    out,
                    "frames {}  queries {}  world {} m",
                    r.n_frames, r.queries, r.world_size
                )?;
                writeln!(
                    out,
                    "build  naive {:>9.2} ms  grid {:>9.2} ms  x{:.2}  evaluated {:.2}%",
                    r.build_naive_ms,
                    r.build_grid_ms,
                    r.build_speedup,
                    100.0 * r.build_evaluated_fraction
                )?;
                writeln!(
                    out,
                    "query  naive {:>9.2} ms  grid {:>9.2} ms  x{:.2}",
                    r.query_naive_ms, r.query_grid_ms, r.query_speedup
                )?;
                writeln!(out, "results equal: {}", r.results_equal)?;
            }
            if !r.results_equal {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Serve { bind } => {
            let filter = tracing_subscriber::EnvFilter::try_from_env(LOG_ENV)
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
            let _ = tracing_subscriber::fmt()
                .with_env_filter(filter)
                .with_writer(io::stderr)
                .try_init();
            let addr = cfg.bind_address(bind.as_deref());
            tokio::runtime::Runtime::new()?.block_on(crate::api::serve(&addr))?;
        }
        Command::SessionReplay { log } => {
            let text = fs::read_to_string(&log)?;
            let replay = crate::session::replay(&text)?;
            for m in &replay.mismatches {
                writeln!(
                    out,
                    "step {}: logged {:?} / replayed {:?}",
                    m.step, m.logged, m.replayed
                )?;
            }
            writeln!(
                out,
                "{}: {} steps replayed, {} mismatches",
                if replay.mismatches.is_empty() {
                    "OK"
                } else {
                    "MISMATCH"
                },
                replay.results.len(),
                replay.mismatches.len()
            )?;
            if !replay.mismatches.is_empty() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
