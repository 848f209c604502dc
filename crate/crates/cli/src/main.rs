use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use indoor_pilot::fsm::dump_table;
use indoor_pilot::harness::{
    default_suite, emit_report, emit_trajectory_plot, replay_episode, run_benchmark, run_benchmark_with, run_episode,
    BenchmarkReport, EpisodeConfig, EpisodeResult, Outcome, Query, ReportFormat, Suite,
};
use indoor_pilot::percept::{render_frontal, render_rear};
use indoor_pilot::pilot::{PilotConfig, PromptVariant, Provider};
use indoor_pilot::sim::{DronePose, RotationConvention, SimConfig};
use indoor_pilot::simserve::{run_episode_remote, Server};
use indoor_pilot::world::{default_plan, default_plan_toml, load_floor_plan, FloorPlan};

#[derive(Parser)]
#[command(name = "indoor-pilot", version, about = "Indoor drone simulator, pilots and benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fly one episode.
    Run(RunArgs),
    /// Run a suite of episodes and print a report.
    Bench(BenchArgs),
    /// Re-run an episode from a transcript.
    Replay(ReplayArgs),
    /// Render the camera views at a pose to PNG.
    Render(RenderArgs),
    /// Print the state table.
    Fsm {
        #[command(subcommand)]
        action: FsmAction,
    },
    /// Print the default floor plan as TOML.
    Plan,
    /// Serve simulator sessions over TCP.
    Simserve(ServeArgs),
}

#[derive(Subcommand)]
enum FsmAction {
    Dump,
}

#[derive(Args)]
struct WorldArgs {
    /// Floor plan TOML; the built-in plan when absent.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long, default_value = "b_right")]
    rotation_convention: RotationConvention,
}

impl WorldArgs {
    fn load(&self) -> Result<(Arc<FloorPlan>, SimConfig)> {
        let plan = match &self.plan {
            Some(p) => load_floor_plan(p).with_context(|| format!("loading {}", p.display()))?,
            None => default_plan(),
        };
        let sim = SimConfig {
            rotation_convention: self.rotation_convention,
            ..SimConfig::default()
        };
        Ok((Arc::new(plan), sim))
    }
}

#[derive(Args)]
struct PilotArgs {
    /// oracle, openai, gemini or replay.
    #[arg(long, default_value = "oracle")]
    pilot: Provider,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
    #[arg(long, default_value_t = 2)]
    max_retries: u32,
    #[arg(long, default_value = "standard")]
    variant: PromptVariant,
}

impl PilotArgs {
    fn config(&self, provider: Provider) -> PilotConfig {
        let mut c = PilotConfig::new(provider);
        c.model = self.model.clone();
        c.endpoint = self.endpoint.clone();
        c.timeout_secs = self.timeout_secs;
        c.max_retries = self.max_retries;
        c.variant = self.variant;
        c
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    world: WorldArgs,
    #[command(flatten)]
    pilot: PilotArgs,
    /// Spawn id from the suite, or a pose "x,y,z,yaw".
    #[arg(long)]
    spawn: String,
    #[arg(long)]
    query: String,
    /// Target room id; inferred from the query when absent.
    #[arg(long)]
    target_room: Option<String>,
    #[arg(long)]
    target_object: Option<String>,
    #[arg(long, default_value_t = 50)]
    max_steps: usize,
    /// Suite file whose spawn ids `--spawn` may name.
    #[arg(long)]
    suite: Option<PathBuf>,
    /// Transcript to write, or to read with `--pilot replay`.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Directory for per-step PNG frames.
    #[arg(long)]
    frames: Option<PathBuf>,
    /// Write a top-down SVG of the trajectory.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// `local` or `remote:HOST:PORT`.
    #[arg(long, default_value = "local")]
    sim: String,
    /// Print the full result as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    world: WorldArgs,
    #[command(flatten)]
    pilot_opts: PilotArgs,
    /// Additional pilots reported side by side with `--pilot`.
    #[arg(long = "also")]
    also: Vec<Provider>,
    /// Suite TOML; the built-in suite when absent.
    #[arg(long)]
    suite: Option<PathBuf>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Concurrent episodes; 1 for live pilots unless set.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "markdown")]
    format: ReportFormat,
    /// Directory for one transcript per episode.
    #[arg(long)]
    transcripts: Option<PathBuf>,
    #[arg(long, default_value = "local")]
    sim: String,
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    world: WorldArgs,
    #[arg(long)]
    transcript: PathBuf,
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    world: WorldArgs,
    /// Pose "x,y,z,yaw".
    #[arg(long, allow_hyphen_values = true)]
    pose: DronePose,
    #[arg(long, default_value = "front.png")]
    out: PathBuf,
    #[arg(long)]
    rear: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    world: WorldArgs,
    #[arg(long, default_value = "127.0.0.1:7007")]
    bind: String,
}

enum SimTarget {
    Local,
    Remote(String),
}

fn parse_sim(s: &str) -> Result<SimTarget> {
    match s {
        "local" => Ok(SimTarget::Local),
        _ => match s.strip_prefix("remote:") {
            Some(addr) if !addr.is_empty() => Ok(SimTarget::Remote(addr.to_string())),
            _ => bail!("--sim must be `local` or `remote:HOST:PORT`, got `{s}`"),
        },
    }
}

fn run_one(config: &EpisodeConfig, target: &SimTarget) -> Result<EpisodeResult, indoor_pilot::harness::HarnessError> {
    match target {
        SimTarget::Local => run_episode(config),
        SimTarget::Remote(addr) => run_episode_remote(config, addr),
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn summarize(r: &EpisodeResult) -> String {
    let mut s = format!(
        "{:?} after {} steps; final pose {} in state {}",
        r.outcome, r.steps_used, r.final_pose, r.final_state
    );
    if let Some(c) = &r.cause {
        s.push_str(&format!(" ({c})"));
    }
    s
}

fn resolve_spawn(spec: &str, suite: &Suite) -> Result<DronePose> {
    if let Some(s) = suite.spawn(spec) {
        return Ok(s.pose);
    }
    spec.parse()
        .map_err(|e| anyhow!("`{spec}` is neither a spawn id nor a pose: {e}"))
}

fn cmd_run(a: RunArgs) -> Result<bool> {
    let (plan, sim) = a.world.load()?;
    let suite = match &a.suite {
        Some(p) => Suite::load(p)?,
        None => default_suite(),
    };
    let spawn = resolve_spawn(&a.spawn, &suite)?;
    let query = match &a.target_room {
        Some(room) => Query::new(&a.query, room, a.target_object.clone()),
        None => {
            let mut q = Query::infer(&plan, &a.query)?;
            if a.target_object.is_some() {
                q.target_object = a.target_object.clone();
            }
            q
        }
    };
    let mut pilot = a.pilot.config(a.pilot.pilot);
    let mut config = EpisodeConfig::new(plan.clone(), spawn, query, pilot.clone());
    if a.pilot.pilot == Provider::Replay {
        let path = a.transcript.clone().context("--pilot replay needs --transcript")?;
        pilot.transcript = Some(path);
        config.pilot = pilot;
    } else {
        config.transcript = a.transcript.clone();
    }
    config.sim = sim;
    config.max_steps = a.max_steps;
    config.frames_dir = a.frames.clone();
    let result = run_one(&config, &parse_sim(&a.sim)?)?;
    if let Some(p) = &a.plot {
        write(p, emit_trajectory_plot(&result, &plan).as_bytes())?;
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&result)?);
    } else {
        println!("{}", summarize(&result));
    }
    Ok(result.outcome != Outcome::ProtocolError)
}

fn cmd_bench(a: BenchArgs) -> Result<bool> {
    let (plan, sim) = a.world.load()?;
    let mut suite = match &a.suite {
        Some(p) => Suite::load(p)?,
        None => default_suite(),
    };
    if let Some(r) = a.reps {
        suite.repetitions = r;
    }
    if let Some(m) = a.max_steps {
        suite.max_steps = m;
    }
    let target = parse_sim(&a.sim)?;
    let mut providers = vec![a.pilot_opts.pilot];
    providers.extend(a.also.iter().copied());
    let mut merged: Option<BenchmarkReport> = None;
    let mut clean = true;
    for provider in providers {
        if provider == Provider::Replay {
            bail!("bench replays transcripts with `replay`; choose a live or oracle pilot");
        }
        let pilot = a.pilot_opts.config(provider);
        let live = matches!(provider, Provider::OpenAi | Provider::Gemini);
        let jobs = a.jobs.unwrap_or(if live {
            1
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        });
        let dir = a.transcripts.as_ref().map(|d| d.join(pilot.label()));
        let (report, results) = match &target {
            SimTarget::Local => run_benchmark(&suite, plan.clone(), sim, &pilot, jobs, dir.as_deref())?,
            SimTarget::Remote(_) => {
                run_benchmark_with(&suite, plan.clone(), sim, &pilot, jobs, dir.as_deref(), |c| run_one(c, &target))?
            }
        };
        clean &= results.iter().all(|r| r.outcome != Outcome::ProtocolError);
        match merged.as_mut() {
            Some(m) => m.merge(&report)?,
            None => merged = Some(report),
        }
    }
    let text = emit_report(&merged.expect("at least one pilot"), a.format);
    match &a.out {
        Some(p) => write(p, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(clean)
}

fn cmd_replay(a: ReplayArgs) -> Result<bool> {
    let (plan, sim) = a.world.load()?;
    let result = replay_episode(plan.clone(), sim, &a.transcript)?;
    if let Some(p) = &a.plot {
        write(p, emit_trajectory_plot(&result, &plan).as_bytes())?;
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&result)?);
    } else {
        println!("{}", summarize(&result));
    }
    Ok(result.outcome != Outcome::ProtocolError)
}

fn cmd_render(a: RenderArgs) -> Result<bool> {
    let (plan, sim) = a.world.load()?;
    let front = render_frontal(&plan, &a.pose, &sim.camera);
    write(&a.out, &front.to_png()?)?;
    if let Some(rear) = &a.rear {
        write(rear, &render_rear(&plan, &a.pose, &sim.camera).to_png()?)?;
    }
    Ok(true)
}

fn cmd_serve(a: ServeArgs) -> Result<bool> {
    let (plan, sim) = a.world.load()?;
    let server = Server::start(plan, sim, &a.bind).with_context(|| format!("binding {}", a.bind))?;
    eprintln!("simserve listening on {}", server.local_addr());
    server.wait();
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Replay(a) => cmd_replay(a),
        Command::Render(a) => cmd_render(a),
        Command::Fsm { action: FsmAction::Dump } => {
            print!("{}", dump_table());
            Ok(true)
        }
        Command::Plan => {
            print!("{}", default_plan_toml());
            Ok(true)
        }
        Command::Simserve(a) => cmd_serve(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
