//! Two learners, one shared replay buffer, dense pursuit rewards.

use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::net::seed_stream;
use crate::replay::{ReplayBuffer, Transition};
use crate::sim::{DogfightWorld, Scenario, DOGFIGHT_OBS_DIM};
use crate::td3::{ActionMode, InputEncoding, Td3Agent, TrainReport};

use super::metrics::{MetricsRecord, MetricsWriter, Phase};
use super::train::METRICS_FILE;
use super::{create_dir, HarnessError, Result, RunConfig};

pub const AGENT_CHECKPOINTS: [&str; 2] = ["agent0.ckpt", "agent1.ckpt"];
const SECOND_AGENT_SEED: u64 = 0x0b5e_55ed;

#[derive(Debug)]
pub struct DogfightOutcome {
    pub agents: [Td3Agent<f64>; 2],
    /// Per-agent episode returns, exploration included.
    pub returns: [Vec<f64>; 2],
    pub buffer_len: usize,
    pub world_steps: u64,
    pub metrics_path: PathBuf,
    pub checkpoints: [PathBuf; 2],
}

#[derive(Default)]
struct Sums {
    ret: f64,
    actor: (f64, usize),
    critic: ([f64; 2], usize),
}

impl Sums {
    fn add(&mut self, r: &TrainReport<f64>) {
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
}

/// Exploration then training episodes; both agents write to and sample from one buffer.
pub fn train_dogfight(config: &RunConfig, scenario: &Scenario<f64>) -> Result<DogfightOutcome> {
    config.validate()?;
    let scenario = config.apply_schedule(scenario.clone());
    scenario.validate()?;
    let out = config.output_dir.clone();
    create_dir(&out)?;
    let clock = Instant::now();
    let mut metrics = MetricsWriter::create(out.join(METRICS_FILE))?;

    let td3 = config.td3.to_config();
    let hidden = &config.td3.hidden;
    let mut agents = [
        Td3Agent::new(DOGFIGHT_OBS_DIM, 2, hidden, config.seeds.agent)?,
        Td3Agent::new(DOGFIGHT_OBS_DIM, 2, hidden, config.seeds.agent ^ SECOND_AGENT_SEED)?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seeds.agent);
    rng.set_stream(2);
    let mut buffer = ReplayBuffer::new(config.td3.buffer_capacity);
    let encoding = InputEncoding::Observation;
    let mut world = DogfightWorld::new(scenario.clone(), config.seeds.env)?;
    let mut seeds = seed_stream(config.seeds.env, 0);

    let explore = config.schedule.exploration_episodes;
    let total = explore + config.schedule.total_episodes;
    let mut returns = [Vec::with_capacity(total), Vec::with_capacity(total)];
    let mut world_steps = 0u64;
    for episode in 0..total {
        let exploring = episode < explore;
        let (phase, index) = if exploring { (Phase::Explore, episode) } else { (Phase::Train, episode - explore) };
        world.reset(seeds.next().expect("endless seed stream"))?;
        let mut sums = [Sums::default(), Sums::default()];
        let mut steps = 0u64;
        loop {
            let obs = [world.observe(0)?, world.observe(1)?];
            let before = [world.vehicle(0)?.position(), world.vehicle(1)?.position()];
            let mut actions = [[0.0; 2]; 2];
            for k in 0..2 {
                actions[k] = if exploring {
                    [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)]
                } else {
                    let a = agents[k].select_action(&obs[k], ActionMode::Explore, &td3, &mut rng)?;
                    [a[0], a[1]]
                };
            }
            let results = world.step(actions[0], actions[1])?;
            steps += 1;
            world_steps += 1;
            for k in 0..2 {
                sums[k].ret += results[k].reward;
                buffer.push(Transition::from_step(obs[k].clone(), [0.0, 0.0], actions[k], before[k], &results[k]));
            }
            if !exploring {
                for k in 0..2 {
                    let report = agents[k].train_step(&buffer, &encoding, &td3, &mut rng)?;
                    let bad = report.critic_losses.is_some_and(|(a, b)| !a.is_finite() || !b.is_finite())
                        || report.actor_loss.is_some_and(|a| !a.is_finite());
                    if bad {
                        return Err(HarnessError::Divergence { episode: index, checkpoint: out.join(AGENT_CHECKPOINTS[k]) });
                    }
                    sums[k].add(&report);
                }
            }
            if results[0].done {
                break;
            }
        }
        for k in 0..2 {
            let s = &sums[k];
            let mut r = MetricsRecord::episode(phase, k, index, steps, world_steps, s.ret);
            r.actor_loss = (s.actor.1 > 0).then(|| s.actor.0 / s.actor.1 as f64);
            r.critic_loss = (s.critic.1 > 0).then(|| [s.critic.0[0] / s.critic.1 as f64, s.critic.0[1] / s.critic.1 as f64]);
            r.wall_seconds = clock.elapsed().as_secs_f64();
            metrics.write(&r)?;
            returns[k].push(s.ret);
        }
    }

    let checkpoints = AGENT_CHECKPOINTS.map(|n| out.join(n));
    for k in 0..2 {
        agents[k].to_checkpoint().save(&checkpoints[k])?;
    }
    Ok(DogfightOutcome {
        agents,
        returns,
        buffer_len: buffer.len(),
        world_steps,
        metrics_path: metrics.path().to_path_buf(),
        checkpoints,
    })
}
