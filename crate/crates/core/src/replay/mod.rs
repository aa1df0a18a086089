//! Goal-conditioned ring replay buffer with final-state hindsight relabeling.

mod snapshot;

use rand::Rng;
use thiserror::Error;

use crate::container::ContainerError;
use crate::sim::{goal_reward, Events, RewardParams, Scenario, StepResult};
use crate::Real;

pub use snapshot::REPLAY_MAGIC;

pub const DEFAULT_CAPACITY: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("buffer holds {have} transitions, {need} requested")]
    Insufficient { have: usize, need: usize },
    #[error("episode is empty")]
    EmptyEpisode,
    #[error("invalid episode: {0}")]
    InvalidEpisode(String),
    #[error(transparent)]
    Container(#[from] ContainerError),
}

pub type Result<T> = std::result::Result<T, ReplayError>;

/// One stored step.
///
/// `goal` is an absolute position in meters; networks see it through a
/// position-relative descriptor built at batch time, so relabeling only has
/// to swap this field. `done` marks a terminal step for bootstrapping (goal
/// reached, dogfight collision); running out of steps is not terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T> {
    pub obs: Vec<T>,
    pub goal: [T; 2],
    pub action: [T; 2],
    pub reward: T,
    pub next_obs: Vec<T>,
    pub done: bool,
    pub wall_hit: bool,
    pub achieved: [T; 2],
    pub achieved_next: [T; 2],
}

impl<T: Real> Transition<T> {
    /// Builds the stored record for one environment step taken from `obs`
    /// at position `achieved` towards `goal`.
    pub fn from_step(obs: Vec<T>, goal: [T; 2], action: [T; 2], achieved: [T; 2], step: &StepResult<T>) -> Self {
        Self {
            obs,
            goal,
            action,
            reward: step.reward,
            next_obs: step.observation.clone(),
            done: step.events.goal_reached || step.events.collision,
            wall_hit: step.events.wall_hit,
            achieved,
            achieved_next: step.achieved,
        }
    }
}

/// Consecutive transitions of one rollout, sharing one goal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Episode<T> {
    pub transitions: Vec<Transition<T>>,
}

impl<T: Real> Episode<T> {
    pub fn new() -> Self {
        Self { transitions: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn push(&mut self, t: Transition<T>) {
        self.transitions.push(t);
    }

    pub fn total_reward(&self) -> T {
        self.transitions.iter().map(|t| t.reward).sum()
    }

    /// Checks the chain and terminal-flag invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.transitions.len();
        for (k, pair) in self.transitions.windows(2).enumerate() {
            if pair[0].achieved_next != pair[1].achieved {
                return Err(ReplayError::InvalidEpisode(format!("position chain breaks at step {k}")));
            }
        }
        if self.transitions.iter().take(n.saturating_sub(1)).any(|t| t.done) {
            return Err(ReplayError::InvalidEpisode("terminal flag before the last step".into()));
        }
        let one = T::one();
        if self
            .transitions
            .iter()
            .any(|t| !t.reward.is_finite() || t.action.iter().any(|a| a.abs() > one))
        {
            return Err(ReplayError::InvalidEpisode("non-finite reward or action outside [-1, 1]".into()));
        }
        Ok(())
    }
}

/// Recomputes goal-reaching rewards against a substitute goal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalRelabeler<T> {
    pub rewards: RewardParams<T>,
    pub goal_radius: T,
}

impl<T: Real> GoalRelabeler<T> {
    pub fn from_scenario(scenario: &Scenario<T>) -> Self {
        Self { rewards: scenario.rewards, goal_radius: scenario.goal_radius }
    }

    fn reached(&self, position: [T; 2], goal: [T; 2]) -> bool {
        (position[0] - goal[0]).hypot(position[1] - goal[1]) <= self.goal_radius
    }
}

/// Final-state hindsight relabeling.
///
/// The substitute goal is the last achieved position. Every transition is
/// copied with that goal, its reward recomputed (wall penalties kept), and the
/// copy is cut at the first step that lands within the goal radius, which
/// becomes terminal. The input episode is not modified.
pub fn her_relabel<T: Real>(episode: &Episode<T>, relabeler: &GoalRelabeler<T>) -> Result<Episode<T>> {
    let last = episode.transitions.last().ok_or(ReplayError::EmptyEpisode)?;
    let goal = last.achieved_next;
    let mut out = Episode::new();
    for t in &episode.transitions {
        let reached = relabeler.reached(t.achieved_next, goal);
        let events = Events { wall_hit: t.wall_hit, goal_reached: reached, ..Events::default() };
        out.push(Transition {
            goal,
            reward: goal_reward(t.achieved_next, goal, events, &relabeler.rewards),
            done: reached,
            ..t.clone()
        });
        if reached {
            break;
        }
    }
    Ok(out)
}

/// Fixed-capacity ring of transitions; once full, each push replaces the oldest.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    storage: Vec<Transition<T>>,
    cursor: usize,
}

impl<T: Real> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, storage: Vec::with_capacity(capacity.min(1 << 16)), cursor: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    /// Slot the next push writes to.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn get(&self, index: usize) -> Option<&Transition<T>> {
        self.storage.get(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition<T>> {
        self.storage.iter()
    }

    pub fn push(&mut self, t: Transition<T>) {
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.storage.len() < batch_size || self.storage.is_empty() {
            return Err(ReplayError::Insufficient { have: self.storage.len(), need: batch_size });
        }
        let n = self.storage.len();
        Ok((0..batch_size).map(|_| rng.random_range(0..n)).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&Transition<T>>> {
        Ok(self
            .sample_indices(batch_size, rng)?
            .into_iter()
            .map(|i| &self.storage[i])
            .collect())
    }

    /// Pushes the episode, then (when `her` is given) its relabeled copy.
    /// Returns the number of transitions pushed.
    pub fn store_episode(&mut self, episode: &Episode<T>, her: Option<&GoalRelabeler<T>>) -> Result<usize> {
        let mut pushed = 0;
        for t in &episode.transitions {
            self.push(t.clone());
            pushed += 1;
        }
        if let Some(relabeler) = her {
            if !episode.is_empty() {
                for t in her_relabel(episode, relabeler)?.transitions {
                    self.push(t);
                    pushed += 1;
                }
            }
        }
        Ok(pushed)
    }

    pub(crate) fn from_parts(capacity: usize, storage: Vec<Transition<T>>, cursor: usize) -> Self {
        Self { capacity, storage, cursor }
    }
}
