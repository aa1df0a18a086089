//! Goal-reaching schedule: optional demonstrations, random exploration,
//! then training with periodic deterministic validation.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bc::{bc_pretrain, collect_demonstrations, seed_buffer};
use crate::net::{seed_stream, Collected, LocalEnv, RemoteEnv, StepEnv, VectorEnv};
use crate::nn::NnError;
use crate::replay::{Episode, GoalRelabeler, ReplayBuffer};
use crate::sim::{GoalWorld, Scenario, GOAL_DIM, GOAL_OBS_DIM};
use crate::td3::{ActionMode, InputEncoding, Td3Agent, Td3Config, Td3Error, TrainReport};

use super::metrics::{MetricsRecord, MetricsWriter, Phase};
use super::trajectory::Trajectory;
use super::{create_dir, HarnessError, Result, RunConfig};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const LATEST_CHECKPOINT: &str = "latest.ckpt";
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";
pub const TRAJECTORY_DIR: &str = "trajectories";

const DEMO_SEED_OFFSET: u64 = 0x5eed_de30;

/// Deterministic evaluation of one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    pub mean_return: f64,
    pub success_rate: f64,
    pub returns: Vec<f64>,
    /// Path of the first evaluation episode.
    pub first_trajectory: Trajectory,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub agent: Td3Agent<f64>,
    pub validations: Vec<Validation>,
    pub exploration_transitions: usize,
    pub training_episodes: usize,
    pub buffer: ReplayBuffer<f64>,
    pub metrics_path: PathBuf,
    pub final_checkpoint: PathBuf,
    pub best_checkpoint: Option<PathBuf>,
}

/// Runs `policy(observation, position, goal)` for `n_episodes` episodes
/// started from the seed stream of `seed`.
pub fn validate_with<P>(scenario: &Scenario<f64>, n_episodes: usize, seed: u64, mut policy: P) -> Result<Validation>
where
    P: FnMut(&[f64], [f64; 2], [f64; 2]) -> Result<[f64; 2]>,
{
    let mut world = GoalWorld::new(scenario.clone(), seed)?;
    let goal = scenario.goal;
    let mut returns = Vec::with_capacity(n_episodes);
    let mut successes = 0usize;
    let mut first = None;
    for s in seed_stream(seed, 0).take(n_episodes) {
        let mut obs = world.reset(s)?;
        let mut points = vec![world.position()];
        let mut ret = 0.0;
        loop {
            let action = policy(&obs, world.position(), goal)?;
            let step = world.step(action)?;
            ret += step.reward;
            points.push(step.achieved);
            obs = step.observation;
            if step.done {
                successes += usize::from(step.events.goal_reached);
                if first.is_none() {
                    first = Some(Trajectory::new(scenario, points, step.events.goal_reached, ret));
                }
                break;
            }
        }
        returns.push(ret);
    }
    let n = n_episodes.max(1) as f64;
    Ok(Validation {
        mean_return: returns.iter().sum::<f64>() / n,
        success_rate: successes as f64 / n,
        returns,
        first_trajectory: first.unwrap_or_else(|| Trajectory::new(scenario, Vec::new(), false, 0.0)),
    })
}

/// Noise-free episodes of `agent`'s actor.
pub fn validate(agent: &Td3Agent<f64>, scenario: &Scenario<f64>, n_episodes: usize, seed: u64) -> Result<Validation> {
    let encoding = InputEncoding::goal_relative(scenario);
    let config = Td3Config::default();
    let mut unused = ChaCha8Rng::seed_from_u64(0);
    validate_with(scenario, n_episodes, seed, |obs, pos, goal| {
        let input = encoding.encode(obs, goal, pos);
        let a = agent.select_action(&input, ActionMode::Deterministic, &config, &mut unused)?;
        Ok([a[0], a[1]])
    })
}

/// Running sums for one lane's current episode.
#[derive(Debug, Default)]
struct Lane {
    episode: Episode<f64>,
    ret: f64,
    actor: (f64, usize),
    critic: ([f64; 2], usize),
}

impl Lane {
    fn add_report(&mut self, r: &TrainReport<f64>) {
        if let Some((a, b)) = r.critic_losses {
            self.critic.0[0] += a;
            self.critic.0[1] += b;
            self.critic.1 += 1;
        }
        if let Some(a) = r.actor_loss {
            self.actor.0 += a;
            self.actor.1 += 1;
        }
    }

    fn finish(&mut self, record: &mut MetricsRecord) -> Episode<f64> {
        if self.actor.1 > 0 {
            record.actor_loss = Some(self.actor.0 / self.actor.1 as f64);
        }
        if self.critic.1 > 0 {
            let n = self.critic.1 as f64;
            record.critic_loss = Some([self.critic.0[0] / n, self.critic.0[1] / n]);
        }
        let done = std::mem::take(&mut self.episode);
        *self = Lane::default();
        done
    }
}

pub(crate) fn build_envs(config: &RunConfig, scenario: &Scenario<f64>) -> Result<Vec<Box<dyn StepEnv>>> {
    if config.remote.addresses.is_empty() {
        return (0..config.remote.count)
            .map(|_| Ok(Box::new(LocalEnv::new(scenario.clone())?) as Box<dyn StepEnv>))
            .collect();
    }
    let deadline = Duration::from_millis(config.remote.deadline_ms);
    let hash = scenario.fingerprint();
    config
        .remote
        .addresses
        .iter()
        .map(|a| Ok(Box::new(RemoteEnv::connect(a.as_str(), &hash, deadline)?) as Box<dyn StepEnv>))
        .collect()
}

fn divergence(e: Td3Error, episode: usize, checkpoint: &Path) -> HarnessError {
    match e {
        Td3Error::Nn(NnError::NonFiniteGradient) | Td3Error::Divergence(_) => HarnessError::Divergence {
            episode,
            checkpoint: checkpoint.to_path_buf(),
        },
        other => other.into(),
    }
}

fn save(agent: &Td3Agent<f64>, path: &Path) -> Result<()> {
    agent.to_checkpoint().save(path)?;
    Ok(())
}

/// Full goal-reaching run into `config.output_dir`.
pub fn train(config: &RunConfig, scenario: &Scenario<f64>) -> Result<TrainOutcome> {
    config.validate()?;
    let scenario = config.apply_schedule(scenario.clone());
    scenario.validate()?;
    let out = config.output_dir.clone();
    create_dir(&out)?;
    create_dir(&out.join(TRAJECTORY_DIR))?;
    let clock = Instant::now();
    let mut metrics = MetricsWriter::create(out.join(METRICS_FILE))?;
    let latest = out.join(LATEST_CHECKPOINT);

    let td3 = config.td3.to_config();
    let encoding = InputEncoding::goal_relative(&scenario);
    let mut agent = Td3Agent::new(GOAL_OBS_DIM + GOAL_DIM, 2, &config.td3.hidden, config.seeds.agent)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seeds.agent);
    rng.set_stream(1);
    let mut buffer = ReplayBuffer::new(config.td3.buffer_capacity);
    let relabeler = config.her_enabled.then(|| GoalRelabeler::from_scenario(&scenario));

    if config.bc.demo_episodes > 0 {
        let demos = collect_demonstrations(&scenario, config.bc.demo_episodes, config.seeds.env ^ DEMO_SEED_OFFSET)?;
        let mut total = 0;
        for (i, e) in demos.episodes.iter().enumerate() {
            total += e.len() as u64;
            let mut r = MetricsRecord::episode(Phase::Demo, 0, i, e.len() as u64, 0, e.total_reward());
            r.success = e.transitions.last().is_some_and(|t| t.done);
            r.wall_seconds = clock.elapsed().as_secs_f64();
            metrics.write(&r)?;
        }
        if config.bc.pretrain_epochs > 0 {
            let report = bc_pretrain(&mut agent.actor, &demos.pairs, &config.bc.to_config(), &mut rng)?;
            agent.actor_target = agent.actor.clone();
            info!(
                "behavioral cloning on {} pairs: train mse {:?}, holdout mse {:?}",
                demos.pairs.len(),
                report.final_train(),
                report.final_holdout()
            );
        }
        if config.bc.seed_buffer {
            seed_buffer(&mut buffer, &demos.episodes, relabeler.as_ref())?;
        }
        info!("{} demonstration episodes, {total} steps", demos.episodes.len());
    }
    save(&agent, &latest)?;

    let envs = build_envs(config, &scenario)?;
    let goals = vec![scenario.goal; envs.len()];
    let mut venv = VectorEnv::new(envs, goals, config.seeds.env);
    let mut lanes: Vec<Lane> = (0..venv.len()).map(|_| Lane::default()).collect();
    let mut total_steps = 0u64;

    // exploration: uniform random actions, no updates
    let mut explored = 0usize;
    let mut exploration_transitions = 0usize;
    while explored < config.schedule.exploration_episodes {
        let streams = venv
            .collect(|_, _, _, _| [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)], 1)
            .map_err(HarnessError::Collect)?;
        for (i, stream) in streams.into_iter().enumerate() {
            for c in stream {
                total_steps += 1;
                exploration_transitions += 1;
                let lane = &mut lanes[i];
                lane.ret += c.transition.reward;
                let end = c.episode_end;
                let success = c.events.goal_reached;
                lane.episode.push(c.transition);
                if !end {
                    continue;
                }
                let mut r = MetricsRecord::episode(Phase::Explore, 0, explored, lane.episode.len() as u64, total_steps, lane.ret);
                let ep = lane.finish(&mut r);
                buffer.store_episode(&ep, relabeler.as_ref())?;
                // with several lanes, episodes ending after the quota are stored but not counted
                if explored < config.schedule.exploration_episodes {
                    r.success = success;
                    r.wall_seconds = clock.elapsed().as_secs_f64();
                    metrics.write(&r)?;
                    explored += 1;
                }
            }
        }
    }

    let mut validations = Vec::new();
    let mut best: Option<(f64, PathBuf)> = None;
    let mut trained = 0usize;
    'training: while trained < config.schedule.total_episodes {
        let streams = venv
            .collect(
                |_, obs, pos, goal| {
                    let input = encoding.encode(obs, goal, pos);
                    // the actor is finite here; select_action only fails on width
                    let a = agent
                        .select_action(&input, ActionMode::Explore, &td3, &mut rng)
                        .expect("input width matches the actor");
                    [a[0], a[1]]
                },
                1,
            )
            .map_err(HarnessError::Collect)?;
        for (i, stream) in streams.into_iter().enumerate() {
            for c in stream {
                total_steps += 1;
                let report = agent
                    .train_step(&buffer, &encoding, &td3, &mut rng)
                    .map_err(|e| divergence(e, trained, &latest))?;
                let finite = report.critic_losses.is_none_or(|(a, b)| a.is_finite() && b.is_finite())
                    && report.actor_loss.is_none_or(f64::is_finite);
                if !finite {
                    return Err(HarnessError::Divergence { episode: trained, checkpoint: latest });
                }
                let lane = &mut lanes[i];
                lane.add_report(&report);
                lane.ret += c.transition.reward;
                let Collected { transition, events, episode_end } = c;
                lane.episode.push(transition);
                if !episode_end {
                    continue;
                }
                let mut r = MetricsRecord::episode(Phase::Train, 0, trained, lane.episode.len() as u64, total_steps, lane.ret);
                let ep = lane.finish(&mut r);
                buffer.store_episode(&ep, relabeler.as_ref())?;
                r.success = events.goal_reached;
                r.wall_seconds = clock.elapsed().as_secs_f64();
                metrics.write(&r)?;
                trained += 1;

                if trained.is_multiple_of(config.schedule.validation_every) {
                    let v = validate(&agent, &scenario, config.schedule.validation_episodes, config.schedule.validation_seed)?;
                    let k = validations.len();
                    let mut r = MetricsRecord::episode(
                        Phase::Validate,
                        0,
                        k,
                        v.first_trajectory.points.len().saturating_sub(1) as u64,
                        total_steps,
                        v.mean_return,
                    );
                    r.success = v.success_rate > 0.0;
                    r.success_rate = Some(v.success_rate);
                    r.wall_seconds = clock.elapsed().as_secs_f64();
                    metrics.write(&r)?;
                    v.first_trajectory.save(out.join(TRAJECTORY_DIR).join(format!("validation_{k:04}.json")))?;
                    save(&agent, &latest)?;
                    if best.as_ref().is_none_or(|(b, _)| v.mean_return > *b) {
                        let p = out.join(BEST_CHECKPOINT);
                        save(&agent, &p)?;
                        best = Some((v.mean_return, p));
                    }
                    info!(
                        "episode {trained}: validation return {:.1}, success {:.2}",
                        v.mean_return, v.success_rate
                    );
                    let stop = config.schedule.stop_at_success.is_some_and(|s| v.success_rate >= s);
                    validations.push(v);
                    if stop {
                        break 'training;
                    }
                }
                if trained >= config.schedule.total_episodes {
                    break 'training;
                }
            }
        }
    }

    let final_checkpoint = out.join(FINAL_CHECKPOINT);
    save(&agent, &final_checkpoint)?;
    Ok(TrainOutcome {
        agent,
        validations,
        exploration_transitions,
        training_episodes: trained,
        buffer,
        metrics_path: metrics.path().to_path_buf(),
        final_checkpoint,
        best_checkpoint: best.map(|(_, p)| p),
    })
}
