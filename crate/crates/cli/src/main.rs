use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cyldrag_bridge::{serve_stdio, session_id, Pacing, ServerConfig, TcpServer};
use cyldrag_core::env::{CylinderEnv, EnvConfig, EpisodeLog, Preset, Task};
use cyldrag_core::export::{vorticity_grid, write_file, write_vorticity_png};
use cyldrag_core::lattice::LatticeState;
use cyldrag_core::openloop::{grid_sweep, ternary_sinusoid, Evaluator, Grid, SinusoidPolicy, SweepCache, SweepOptions};
use cyldrag_core::replay::{anti_alignment_probe, record, replay, ActionTrajectory, ProbeInput, SeedPolicy};

#[derive(Parser)]
#[command(name = "cyldrag", version, about = "Rotating-cylinder drag control in a simulated water channel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct EnvArgs {
    /// Environment config as JSON; missing fields take desk defaults.
    #[arg(long, value_name = "FILE")]
    env: Option<PathBuf>,
    /// Full-length protocol: 60 s episodes after 60 s of stabilization.
    #[arg(long, conflicts_with = "desk")]
    paper: bool,
    /// Desk protocol: 20 s episodes after 10 s of stabilization (default).
    #[arg(long)]
    desk: bool,
    /// Use the half-resolution channel.
    #[arg(long)]
    coarse: bool,
    #[arg(long)]
    task: Option<Task>,
    #[arg(long)]
    seed: Option<u64>,
    /// No-control torque, mN·m. Calibrated when absent.
    #[arg(long)]
    baseline: Option<f64>,
}

impl EnvArgs {
    fn config(&self) -> Result<EnvConfig> {
        let mut cfg = match &self.env {
            Some(path) => serde_json::from_reader(BufReader::new(File::open(path).with_context(|| path.display().to_string())?))
                .with_context(|| format!("parsing {}", path.display()))?,
            None if self.paper => EnvConfig::paper(),
            None => EnvConfig::desk(),
        };
        if self.coarse {
            cfg = cfg.coarse();
        }
        if let Some(t) = self.task {
            cfg.task = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.baseline.is_some() {
            cfg.baseline = self.baseline;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Score every cell of a sinusoid amplitude × frequency grid.
    Sweep {
        #[command(flatten)]
        env: EnvArgs,
        /// `paper` or a JSON file with `amplitudes` and `frequencies`.
        #[arg(long, default_value = "paper")]
        grid: String,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// JSON-lines cache; an interrupted sweep resumes from it.
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Ternary search over frequency at a fixed amplitude.
    Ternary {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long = "A", default_value_t = 15.7)]
        amplitude: f64,
        #[arg(long, default_value_t = 0.71)]
        flo: f64,
        #[arg(long, default_value_t = 0.89)]
        fhi: f64,
        #[arg(long, default_value_t = 5)]
        steps: usize,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// Writes the search record as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract the action trajectory from an episode log.
    Record {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a trajectory open loop and write its running-average curves.
    Replay {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long)]
        traj: PathBuf,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value = "fresh")]
        seeds: SeedPolicy,
        #[arg(long, default_value = "curves.csv")]
        out: PathBuf,
    },
    /// Initial vs long-run torque response to a spin-up or a sinusoid.
    Probe {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long, default_value = "step")]
        mode: ProbeMode,
        /// Step onset, seconds into the episode.
        #[arg(long, default_value_t = 2.0)]
        onset: f64,
        #[arg(long = "A", default_value_t = 15.7)]
        amplitude: f64,
        #[arg(long, default_value_t = 0.776)]
        frequency: f64,
        #[arg(long, default_value = "probe.json")]
        out: PathBuf,
    },
    /// Vorticity snapshot of the uncontrolled wake as PNG and raw f32 grid.
    Snapshot {
        #[command(flatten)]
        env: EnvArgs,
        /// Simulated seconds from rest.
        #[arg(long, default_value_t = 20.0)]
        seconds: f64,
        /// Rotation rate held throughout, rad/s.
        #[arg(long, default_value_t = 0.0)]
        omega: f64,
        #[arg(long, default_value = "vorticity.png")]
        out: PathBuf,
    },
    /// Expose the environment to an external agent.
    Serve {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long, env = "CYLDRAG_ADDR", default_value = "127.0.0.1:7777")]
        addr: String,
        #[arg(long, default_value = "fast")]
        pacing: Pacing,
        #[arg(long, env = "CYLDRAG_LOG_DIR")]
        log_dir: Option<PathBuf>,
        /// Serve one session over stdin/stdout instead of TCP.
        #[arg(long)]
        stdio: bool,
        /// Observation presets a client may select, comma separated.
        #[arg(long, value_delimiter = ',')]
        allow: Option<Vec<Preset>>,
        #[arg(long)]
        max_episodes: Option<usize>,
        /// Exit after this many TCP sessions.
        #[arg(long)]
        sessions: Option<usize>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ProbeMode {
    Step,
    Sinusoid,
}

fn load_grid(spec: &str) -> Result<Grid> {
    if spec == "paper" {
        return Ok(Grid::paper());
    }
    let f = File::open(spec).with_context(|| format!("grid {spec}"))?;
    Ok(serde_json::from_reader(BufReader::new(f))?)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    write_file(path, |w| serde_json::to_writer_pretty(w, value).map_err(Into::into))?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Sweep { env, grid, reps, workers, cache, out } => {
            let grid = load_grid(&grid)?;
            let ev = Evaluator::new(env.config()?)?;
            let cache = cache.map(|p| SweepCache::open(p, &ev.config().hash(), reps)).transpose()?;
            let table = grid_sweep(&ev, &grid, SweepOptions { reps, workers }, cache.as_ref())?;
            write_file(&out, |w| table.write_csv(w))?;
            if let Some(best) = table.best() {
                eprintln!(
                    "best: A={} f={} score {:.2}% [{:.2}, {:.2}]",
                    best.policy.amplitude, best.policy.frequency, best.score.mean, best.score.min, best.score.max
                );
            }
        }
        Command::Ternary { env, amplitude, flo, fhi, steps, reps, out } => {
            let ev = Evaluator::new(env.config()?)?;
            let (result, score) = ternary_sinusoid(&ev, amplitude, flo, fhi, steps, reps)?;
            println!(
                "f* = {:.4} Hz in [{:.4}, {:.4}], score {:.2}% [{:.2}, {:.2}]",
                result.argmax, result.lo, result.hi, score.mean, score.min, score.max
            );
            if let Some(out) = out {
                write_json(&out, &(result, score))?;
            }
        }
        Command::Record { log, out } => {
            let log = EpisodeLog::read_jsonl(BufReader::new(File::open(&log).with_context(|| log.display().to_string())?))?;
            let traj = record(&log)?;
            write_file(&out, |w| traj.write_json(w))?;
        }
        Command::Replay { env, traj, reps, seeds, out } => {
            let t = ActionTrajectory::read_json(File::open(&traj).with_context(|| traj.display().to_string())?)?;
            let outcome = replay(&t, reps, &env.config()?, seeds)?;
            write_file(&out, |w| outcome.curves.write_csv(w))?;
            for (seed, score) in outcome.seeds.iter().zip(outcome.curves.final_scores()) {
                println!("seed {seed:#018x}: {score:.3}%");
            }
        }
        Command::Probe { env, mode, onset, amplitude, frequency, out } => {
            let ev = Evaluator::new(env.config()?)?;
            let inputs = match mode {
                ProbeMode::Step => vec![ProbeInput::Step { onset, sign: 1.0 }, ProbeInput::Step { onset, sign: -1.0 }],
                ProbeMode::Sinusoid => vec![ProbeInput::Sinusoid(SinusoidPolicy::new(amplitude, frequency))],
            };
            let report = anti_alignment_probe(&ev, &inputs)?;
            for e in &report.entries {
                println!(
                    "{}: initial {:+.4}, long-run {:+.4} mN·m",
                    e.name, e.report.initial_change, e.report.long_run_change
                );
            }
            write_json(&out, &report)?;
        }
        Command::Snapshot { env, seconds, omega, out } => {
            let cfg = env.config()?;
            let mut s = LatticeState::new(cfg.fluid.clone())?;
            let n = (seconds / s.units().dt).round() as usize;
            s.advance(n, omega)?;
            write_file(&out, |w| write_vorticity_png(w, &s, None))?;
            write_file(out.with_extension("f32"), |w| vorticity_grid(&s).write_to(w))?;
        }
        Command::Serve { env, addr, pacing, log_dir, stdio, allow, max_episodes, sessions } => {
            let mut config = ServerConfig::new(env.config()?);
            config.pacing = pacing;
            config.log_dir = log_dir;
            config.max_episodes = max_episodes;
            if let Some(a) = allow {
                if a.is_empty() {
                    bail!("--allow needs at least one preset");
                }
                config.allowed = a;
            }
            if stdio {
                let summary = serve_stdio(config, &session_id(0))?;
                eprintln!("{}: {} steps", summary.id, summary.manifest.agent_steps);
            } else {
                // One instance is built up front so a bad config fails here,
                // not at the first hello.
                CylinderEnv::new(config.env.clone())?;
                let server = TcpServer::bind(&addr, config)?;
                eprintln!("listening on {}", server.local_addr()?);
                for s in server.serve(sessions)? {
                    eprintln!("{}: {} steps", s.id, s.manifest.agent_steps);
                }
            }
        }
    }
    Ok(())
}
