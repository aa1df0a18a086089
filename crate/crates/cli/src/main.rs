//! Command-line front end: training, evaluation, demonstrations, the
//! environment server, plots and trajectory rendering.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aircombat::bc::{bc_pretrain, collect_demonstrations, load_pairs, save_pairs};
use aircombat::harness::{
    emit_plots, train, train_dogfight, validate, RunConfig, Trajectory, METRICS_FILE, TRAJECTORY_DIR,
};
use aircombat::net::serve;
use aircombat::nn::Checkpoint;
use aircombat::sim::{GOAL_DIM, GOAL_OBS_DIM};
use aircombat::td3::Td3Agent;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "aircombat", version, about = "Dubins-vehicle TD3 training and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Goal-reaching run: exploration, training, validation, checkpoints.
    Train(TrainArgs),
    /// Two agents sharing one replay buffer in the dogfight scenario.
    TrainDogfight(TrainArgs),
    /// Deterministic validation episodes of a saved agent.
    Evaluate(EvaluateArgs),
    /// Collect expert demonstrations and pretrain an actor on them.
    BcPretrain(BcArgs),
    /// Serve the scenario over TCP until killed.
    ServeEnv(ServeArgs),
    /// Charts and CSV tables from a metrics log.
    Plot(PlotArgs),
    /// Render a stored trajectory as SVG.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set td3.batch_size=64`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Scenario file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Seed for both the environments and the agent.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Training episodes after exploration.
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    exploration_episodes: Option<usize>,
    #[arg(long)]
    steps_per_episode: Option<u32>,
    #[arg(long)]
    validation_every: Option<usize>,
    #[arg(long)]
    her: Option<bool>,
    /// Environment server address; repeat for lockstep collection across servers.
    #[arg(long = "remote", value_name = "ADDR")]
    remote: Vec<String>,
    /// Number of in-process environments when no server is given.
    #[arg(long)]
    envs: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 30)]
    episodes: usize,
    /// Save the first episode's path as JSON.
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

#[derive(Args)]
struct BcArgs {
    #[command(flatten)]
    common: Common,
    /// Expert episodes to collect (bc.demo_episodes).
    #[arg(long)]
    demos: Option<usize>,
    /// Pretraining epochs; defaults to bc.pretrain_epochs, or 50 when that is 0.
    #[arg(long)]
    epochs: Option<usize>,
    /// Read pairs from this file instead of running the expert.
    #[arg(long)]
    from_demos: Option<PathBuf>,
    /// Where to write the demonstration pairs.
    #[arg(long)]
    demo_file: Option<PathBuf>,
    /// Where to write the agent with the pretrained actor.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "127.0.0.1:7070")]
    bind: String,
}

#[derive(Args)]
struct PlotArgs {
    #[command(flatten)]
    common: Common,
    /// Metrics log; defaults to the output directory's log.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Chart directory; defaults to `<output>/plots`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    common: Common,
    /// Trajectory JSON; defaults to the newest one under the output directory.
    #[arg(long)]
    episode: Option<PathBuf>,
    /// SVG path; defaults to the trajectory path with an .svg extension.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn quoted(s: &str) -> String {
    format!("{s:?}")
}

fn path_value(p: &Path) -> String {
    quoted(&p.display().to_string())
}

impl Common {
    fn load(&self, mut extra: Vec<String>) -> Result<RunConfig> {
        let mut overrides = self.set.clone();
        if let Some(p) = &self.scenario {
            overrides.push(format!("scenario={}", path_value(p)));
        }
        if let Some(p) = &self.output {
            overrides.push(format!("output_dir={}", path_value(p)));
        }
        if let Some(s) = self.seed {
            overrides.push(format!("seeds.env={s}"));
            overrides.push(format!("seeds.agent={s}"));
        }
        overrides.append(&mut extra);
        Ok(match &self.config {
            Some(path) => RunConfig::load_with_overrides(path, &overrides)?,
            None => RunConfig::parse_with_overrides("", &overrides)?,
        })
    }
}

impl TrainArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut o = Vec::new();
        if let Some(n) = self.episodes {
            o.push(format!("schedule.total_episodes={n}"));
        }
        if let Some(n) = self.exploration_episodes {
            o.push(format!("schedule.exploration_episodes={n}"));
        }
        if let Some(n) = self.steps_per_episode {
            o.push(format!("schedule.steps_per_episode={n}"));
        }
        if let Some(n) = self.validation_every {
            o.push(format!("schedule.validation_every={n}"));
        }
        if let Some(b) = self.her {
            o.push(format!("her_enabled={b}"));
        }
        if !self.remote.is_empty() {
            let list: Vec<String> = self.remote.iter().map(|a| quoted(a)).collect();
            o.push(format!("remote.addresses=[{}]", list.join(", ")));
        }
        if let Some(n) = self.envs {
            o.push(format!("remote.count={n}"));
        }
        self.common.load(o)
    }
}

fn run_train(args: &TrainArgs, dogfight: bool) -> Result<()> {
    let cfg = args.load()?;
    let scenario = cfg.load_scenario()?;
    if dogfight {
        let out = train_dogfight(&cfg, &scenario)?;
        println!(
            "{} world steps; checkpoints {} and {}; metrics {}",
            out.world_steps,
            out.checkpoints[0].display(),
            out.checkpoints[1].display(),
            out.metrics_path.display()
        );
    } else {
        let out = train(&cfg, &scenario)?;
        if let Some(v) = out.validations.last() {
            println!("final validation: mean return {:.3}, success rate {:.3}", v.mean_return, v.success_rate);
        }
        println!(
            "{} training episodes; checkpoint {}; metrics {}",
            out.training_episodes,
            out.final_checkpoint.display(),
            out.metrics_path.display()
        );
    }
    Ok(())
}

fn run_evaluate(args: &EvaluateArgs) -> Result<()> {
    let cfg = args.common.load(Vec::new())?;
    let scenario = cfg.load_scenario()?;
    let ck = Checkpoint::load(&args.checkpoint)?;
    let agent = Td3Agent::from_checkpoint(&ck, Some(GOAL_OBS_DIM + GOAL_DIM))
        .with_context(|| format!("restoring agent from {}", args.checkpoint.display()))?;
    let v = validate(&agent, &scenario, args.episodes, cfg.schedule.validation_seed)?;
    println!("episodes {}: mean return {:.3}, success rate {:.3}", args.episodes, v.mean_return, v.success_rate);
    if let Some(p) = &args.trajectory {
        v.first_trajectory.save(p)?;
    }
    Ok(())
}

fn run_bc(args: &BcArgs) -> Result<()> {
    let mut o = Vec::new();
    if let Some(n) = args.demos {
        o.push(format!("bc.demo_episodes={n}"));
    }
    let cfg = args.common.load(o)?;
    let scenario = cfg.load_scenario()?;
    let pairs = match &args.from_demos {
        Some(p) => load_pairs(p).with_context(|| format!("reading {}", p.display()))?,
        None => {
            let n = if cfg.bc.demo_episodes == 0 { 100 } else { cfg.bc.demo_episodes };
            let d = collect_demonstrations(&scenario, n, cfg.seeds.env)?;
            println!("expert: {} of {n} episodes reached the goal, {} pairs", d.successes, d.pairs.len());
            d.pairs
        }
    };
    std::fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    let demo_file = args.demo_file.clone().unwrap_or_else(|| cfg.output_dir.join("demos.bin"));
    save_pairs(&pairs, &demo_file)?;

    let mut agent = Td3Agent::new(GOAL_OBS_DIM + GOAL_DIM, 2, &cfg.td3.hidden, cfg.seeds.agent)?;
    let mut bc = cfg.bc.to_config();
    bc.epochs = match args.epochs {
        Some(n) => n,
        None if bc.epochs == 0 => 50,
        None => bc.epochs,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seeds.agent);
    let report = bc_pretrain(&mut agent.actor, &pairs, &bc, &mut rng)?;
    agent.actor_target = agent.actor.clone();
    let ck_path = args.checkpoint.clone().unwrap_or_else(|| cfg.output_dir.join("bc.ckpt"));
    agent.to_checkpoint().save(&ck_path)?;
    println!(
        "train mse {:.6}, holdout mse {}; demos {}; checkpoint {}",
        report.final_train().unwrap_or(f64::NAN),
        report.final_holdout().map_or("n/a".to_string(), |h| format!("{h:.6}")),
        demo_file.display(),
        ck_path.display()
    );
    Ok(())
}

fn run_serve(args: &ServeArgs) -> Result<()> {
    let cfg = args.common.load(Vec::new())?;
    let scenario = cfg.load_scenario()?;
    let server = serve(scenario.clone(), args.bind.as_str()).with_context(|| format!("binding {}", args.bind))?;
    println!("listening on {} scenario {}", server.local_addr(), scenario.fingerprint());
    std::io::stdout().flush()?;
    server.join();
    Ok(())
}

fn run_plot(args: &PlotArgs) -> Result<()> {
    let cfg = args.common.load(Vec::new())?;
    let metrics = args.metrics.clone().unwrap_or_else(|| cfg.output_dir.join(METRICS_FILE));
    let out = args.out.clone().unwrap_or_else(|| cfg.output_dir.join("plots"));
    let files = emit_plots(&metrics, &out)?;
    println!("wrote {} files to {}", files.len(), out.display());
    Ok(())
}

fn newest_trajectory(dir: &Path) -> Result<PathBuf> {
    let mut found: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    found.sort();
    match found.pop() {
        Some(p) => Ok(p),
        None => bail!("no trajectories in {}", dir.display()),
    }
}

fn run_replay(args: &ReplayArgs) -> Result<()> {
    let cfg = args.common.load(Vec::new())?;
    let episode = match &args.episode {
        Some(p) => p.clone(),
        None => newest_trajectory(&cfg.output_dir.join(TRAJECTORY_DIR))?,
    };
    let t = Trajectory::load(&episode)?;
    let out = args.out.clone().unwrap_or_else(|| episode.with_extension("svg"));
    std::fs::write(&out, t.to_svg()).with_context(|| format!("writing {}", out.display()))?;
    println!("{}", out.display());
    Ok(())
}

/// Error chain on one line, skipping causes already quoted by their parent.
fn one_line(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out.replace('\n', " ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => run_train(a, false),
        Command::TrainDogfight(a) => run_train(a, true),
        Command::Evaluate(a) => run_evaluate(a),
        Command::BcPretrain(a) => run_bc(a),
        Command::ServeEnv(a) => run_serve(a),
        Command::Plot(a) => run_plot(a),
        Command::Replay(a) => run_replay(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::FAILURE
        }
    }
}
