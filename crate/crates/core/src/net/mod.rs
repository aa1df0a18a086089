//! Remote environments: framed request/response protocol, a threaded
//! server, and lockstep collection across several environments.

mod client;
mod server;
pub mod wire;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::replay::Transition;
use crate::sim::{Events, GoalWorld, Scenario, SimError, StepResult};

pub use client::{RemoteEnv, RemoteError, SessionState, DEFAULT_DEADLINE};
pub use server::{serve, ServerHandle};
pub use wire::{ErrorCode, WireError, WireMessage, MAX_FRAME, PROTOCOL_VERSION};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Remote(#[from] RemoteError),
}

/// An episodic goal-reaching environment whose steps can be split into a
/// dispatch and a wait, so several can run in one tick.
pub trait StepEnv {
    /// Starts an episode; returns the observation and the vehicle position.
    fn reset(&mut self, seed: u64) -> Result<(Vec<f64>, [f64; 2]), EnvError>;
    fn begin_step(&mut self, action: [f64; 2]) -> Result<(), EnvError>;
    fn finish_step(&mut self) -> Result<StepResult<f64>, EnvError>;

    fn step(&mut self, action: [f64; 2]) -> Result<StepResult<f64>, EnvError> {
        self.begin_step(action)?;
        self.finish_step()
    }
}

/// In-process environment.
#[derive(Debug, Clone)]
pub struct LocalEnv {
    world: GoalWorld<f64>,
    pending: Option<Result<StepResult<f64>, SimError>>,
}

impl LocalEnv {
    pub fn new(scenario: Scenario<f64>) -> Result<Self, SimError> {
        Ok(Self { world: GoalWorld::new(scenario, 0)?, pending: None })
    }

    pub fn world(&self) -> &GoalWorld<f64> {
        &self.world
    }
}

impl StepEnv for LocalEnv {
    fn reset(&mut self, seed: u64) -> Result<(Vec<f64>, [f64; 2]), EnvError> {
        let obs = self.world.reset(seed)?;
        Ok((obs, self.world.position()))
    }

    fn begin_step(&mut self, action: [f64; 2]) -> Result<(), EnvError> {
        self.pending = Some(self.world.step(action));
        Ok(())
    }

    fn finish_step(&mut self) -> Result<StepResult<f64>, EnvError> {
        match self.pending.take() {
            Some(r) => Ok(r?),
            None => Err(SimError::Usage("finish_step without begin_step".into()).into()),
        }
    }
}

impl StepEnv for RemoteEnv {
    fn reset(&mut self, seed: u64) -> Result<(Vec<f64>, [f64; 2]), EnvError> {
        Ok(RemoteEnv::reset(self, seed)?)
    }

    fn begin_step(&mut self, action: [f64; 2]) -> Result<(), EnvError> {
        Ok(self.send_step(action)?)
    }

    fn finish_step(&mut self) -> Result<StepResult<f64>, EnvError> {
        Ok(self.recv_step()?)
    }
}

impl<E: StepEnv + ?Sized> StepEnv for Box<E> {
    fn reset(&mut self, seed: u64) -> Result<(Vec<f64>, [f64; 2]), EnvError> {
        (**self).reset(seed)
    }

    fn begin_step(&mut self, action: [f64; 2]) -> Result<(), EnvError> {
        (**self).begin_step(action)
    }

    fn finish_step(&mut self) -> Result<StepResult<f64>, EnvError> {
        (**self).finish_step()
    }
}

/// Episode seeds for environment `index` of a vector seeded with `base`.
pub fn seed_stream(base: u64, index: usize) -> impl Iterator<Item = u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index as u64);
    std::iter::repeat_with(move || rng.random())
}

/// One collected step.
#[derive(Debug, Clone, PartialEq)]
pub struct Collected {
    pub transition: Transition<f64>,
    pub events: Events,
    /// The environment was reset after this step.
    pub episode_end: bool,
}

#[derive(Debug, Error)]
#[error("environment {env} failed after {completed_ticks} complete ticks: {source}")]
pub struct CollectError {
    pub env: usize,
    pub completed_ticks: usize,
    /// Per-environment streams truncated to the last complete tick.
    pub partial: Vec<Vec<Collected>>,
    pub source: EnvError,
}

struct Lane<E> {
    env: E,
    goal: [f64; 2],
    seeds: Box<dyn Iterator<Item = u64> + Send>,
    current: Option<(Vec<f64>, [f64; 2])>,
}

/// Several environments stepped in lockstep.
pub struct VectorEnv<E> {
    lanes: Vec<Lane<E>>,
}

impl<E: StepEnv> VectorEnv<E> {
    /// `goals[i]` is the goal environment `i` runs with; episode seeds come
    /// from [`seed_stream`]`(base_seed, i)`.
    pub fn new(envs: Vec<E>, goals: Vec<[f64; 2]>, base_seed: u64) -> Self {
        assert_eq!(envs.len(), goals.len(), "one goal per environment");
        let lanes = envs
            .into_iter()
            .zip(goals)
            .enumerate()
            .map(|(i, (env, goal))| Lane { env, goal, seeds: Box::new(seed_stream(base_seed, i)), current: None })
            .collect();
        Self { lanes }
    }

    pub fn len(&self) -> usize {
        self.lanes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lanes.is_empty()
    }

    pub fn env(&self, i: usize) -> &E {
        &self.lanes[i].env
    }

    pub fn into_envs(self) -> Vec<E> {
        self.lanes.into_iter().map(|l| l.env).collect()
    }

    /// Runs `ticks` lockstep ticks. `policy(env, observation, position, goal)`
    /// is queried once per environment per tick. Environments without a
    /// running episode are reset first with their next seed.
    pub fn collect<P>(&mut self, mut policy: P, ticks: usize) -> Result<Vec<Vec<Collected>>, CollectError>
    where
        P: FnMut(usize, &[f64], [f64; 2], [f64; 2]) -> [f64; 2],
    {
        let n = self.lanes.len();
        let mut streams: Vec<Vec<Collected>> = (0..n).map(|_| Vec::with_capacity(ticks)).collect();
        for tick in 0..ticks {
            let fail = |streams: &mut Vec<Vec<Collected>>, env: usize, source: EnvError| {
                for s in streams.iter_mut() {
                    s.truncate(tick);
                }
                CollectError { env, completed_ticks: tick, partial: std::mem::take(streams), source }
            };
            for i in 0..n {
                if self.lanes[i].current.is_none() {
                    let lane = &mut self.lanes[i];
                    let seed = lane.seeds.next().expect("endless seed stream");
                    match lane.env.reset(seed) {
                        Ok(start) => lane.current = Some(start),
                        Err(e) => return Err(fail(&mut streams, i, e)),
                    }
                }
            }
            let mut actions = Vec::with_capacity(n);
            for (i, lane) in self.lanes.iter().enumerate() {
                let (obs, position) = lane.current.as_ref().expect("reset above");
                actions.push(policy(i, obs, *position, lane.goal));
            }
            for (i, lane) in self.lanes.iter_mut().enumerate() {
                if let Err(e) = lane.env.begin_step(actions[i]) {
                    return Err(fail(&mut streams, i, e));
                }
            }
            let mut failure = None;
            for (i, lane) in self.lanes.iter_mut().enumerate() {
                // drain every reply so no session is left with one in flight
                match lane.env.finish_step() {
                    Ok(step) => {
                        let (obs, position) = lane.current.take().expect("reset above");
                        let transition = Transition::from_step(obs, lane.goal, actions[i], position, &step);
                        if !step.done {
                            lane.current = Some((step.observation.clone(), step.achieved));
                        }
                        streams[i].push(Collected { transition, events: step.events, episode_end: step.done });
                    }
                    Err(e) => {
                        lane.current = None;
                        failure.get_or_insert((i, e));
                    }
                }
            }
            if let Some((i, e)) = failure {
                return Err(fail(&mut streams, i, e));
            }
        }
        Ok(streams)
    }
}

#[cfg(test)]
mod tests;
