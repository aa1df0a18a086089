use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::Real;

use super::geometry::{first_crossing, is_free};
use super::{
    goal_reward, lidar_scan, normalize_angle, Events, Result, Scenario, SimError, VehicleState,
    MAX_ACCEL, MAX_SPEED, MAX_TURN, VEHICLE_LENGTH,
};

/// Length of the goal-reaching observation.
pub const GOAL_OBS_DIM: usize = 14;
/// Length of the goal descriptor appended to observations for the networks.
pub const GOAL_DIM: usize = 2;

const MAX_RESET_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult<T> {
    pub observation: Vec<T>,
    pub reward: T,
    pub done: bool,
    pub events: Events,
    /// Post-step vehicle position.
    pub achieved: [T; 2],
}

/// Goal offset from `position`, scaled by the arena extent.
pub fn goal_descriptor<T: Real>(position: [T; 2], goal: [T; 2], scenario: &Scenario<T>) -> [T; 2] {
    [
        (goal[0] - position[0]) / scenario.width,
        (goal[1] - position[1]) / scenario.height,
    ]
}

/// Samples a start pose away from the walls and inflated obstacles.
/// `accept` adds scenario-specific rejection on top of that.
pub(crate) fn sample_start<T: Real>(
    scenario: &Scenario<T>,
    rng: &mut ChaCha8Rng,
    accept: impl Fn([T; 2]) -> bool,
) -> Result<VehicleState<T>> {
    let margin = T::lit(VEHICLE_LENGTH);
    let inflated: Vec<_> = scenario.obstacles.iter().map(|o| o.inflate(margin)).collect();
    for _ in 0..MAX_RESET_ATTEMPTS {
        let ux: f64 = rng.random();
        let uy: f64 = rng.random();
        let uh: f64 = rng.random();
        let x = margin + (scenario.width - margin - margin) * T::lit(ux);
        let y = margin + (scenario.height - margin - margin) * T::lit(uy);
        // (-π, π]
        let heading = T::PI() - T::lit(2.0 * std::f64::consts::PI * uh);
        let p = [x, y];
        if inflated.iter().any(|o| o.contains_closed(p)) || !accept(p) {
            continue;
        }
        return Ok(VehicleState::at_rest(x, y, heading));
    }
    Err(SimError::Config(format!(
        "no feasible start position found after {MAX_RESET_ATTEMPTS} attempts"
    )))
}

/// Moves `prev` to `next`, resolving contact with walls and obstacle edges.
/// Returns the resolved state and whether a contact occurred.
pub(crate) fn resolve_motion<T: Real>(
    prev: &VehicleState<T>,
    mut next: VehicleState<T>,
    scenario: &Scenario<T>,
) -> (VehicleState<T>, bool) {
    let from = prev.position();
    let to = next.position();
    let Some((t, edge)) = first_crossing(from, to, scenario) else {
        return (next, false);
    };
    let contact = [from[0] + t * (to[0] - from[0]), from[1] + t * (to[1] - from[1])];
    let offset = T::lit(VEHICLE_LENGTH);
    let pushed = [contact[0] + offset * edge.normal[0], contact[1] + offset * edge.normal[1]];
    // the offset point can land in another obstacle in tight layouts; stay put then
    let p = if is_free(pushed, scenario) && first_crossing(contact, pushed, scenario).is_none() {
        pushed
    } else {
        from
    };
    next.x = p[0];
    next.y = p[1];
    next.speed = T::zero();
    next.accel = T::zero();
    (next, true)
}

/// Single-vehicle goal-reaching episode.
#[derive(Debug, Clone)]
pub struct GoalWorld<T> {
    scenario: Scenario<T>,
    state: VehicleState<T>,
    steps: u32,
    done: bool,
}

impl<T: Real> GoalWorld<T> {
    /// Creates a world with a seeded random start.
    pub fn new(scenario: Scenario<T>, seed: u64) -> Result<Self> {
        let mut w = Self {
            state: VehicleState::at_rest(T::zero(), T::zero(), T::zero()),
            scenario,
            steps: 0,
            done: false,
        };
        w.reset(seed)?;
        Ok(w)
    }

    /// Places the vehicle at an explicit state (tests and replays).
    pub fn with_state(scenario: Scenario<T>, state: VehicleState<T>) -> Self {
        Self { scenario, state, steps: 0, done: false }
    }

    pub fn reset(&mut self, seed: u64) -> Result<Vec<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let goal = self.scenario.goal;
        let radius = self.scenario.goal_radius;
        self.state = sample_start(&self.scenario, &mut rng, |p| {
            (p[0] - goal[0]).hypot(p[1] - goal[1]) > radius
        })?;
        self.steps = 0;
        self.done = false;
        self.observe()
    }

    pub fn scenario(&self) -> &Scenario<T> {
        &self.scenario
    }

    pub fn state(&self) -> &VehicleState<T> {
        &self.state
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn position(&self) -> [T; 2] {
        self.state.position()
    }

    /// The 14-entry observation: eight normalized LIDAR ranges, velocity,
    /// acceleration, last turn, heading.
    pub fn observe(&self) -> Result<Vec<T>> {
        observe_goal(&self.state, &self.scenario)
    }

    pub fn step(&mut self, action: [T; 2]) -> Result<StepResult<T>> {
        if self.done {
            return Err(SimError::Usage("step called on a finished episode".into()));
        }
        let moved = self.state.apply_action(action, self.scenario.dt)?;
        let (state, wall_hit) = resolve_motion(&self.state, moved, &self.scenario);
        self.state = state;
        self.steps += 1;

        let pos = self.state.position();
        let goal = self.scenario.goal;
        let mut events = Events { wall_hit, ..Events::default() };
        events.goal_reached = (pos[0] - goal[0]).hypot(pos[1] - goal[1]) <= self.scenario.goal_radius;
        events.timeout = !events.goal_reached && self.steps >= self.scenario.max_steps;
        self.done = events.goal_reached || events.timeout;

        let reward = goal_reward(pos, goal, events, &self.scenario.rewards);
        Ok(StepResult {
            observation: self.observe()?,
            reward,
            done: self.done,
            events,
            achieved: pos,
        })
    }
}

pub(crate) fn observe_goal<T: Real>(state: &VehicleState<T>, scenario: &Scenario<T>) -> Result<Vec<T>> {
    let lidar = lidar_scan(state, scenario)?;
    let vmax = T::lit(MAX_SPEED);
    let amax = T::lit(MAX_ACCEL);
    let [vx, vy] = state.velocity();
    let [ax, ay] = state.acceleration();
    let mut obs: Vec<T> = lidar.iter().map(|&d| d / scenario.lidar_range).collect();
    obs.extend([
        vx / vmax,
        vy / vmax,
        ax / amax,
        ay / amax,
        state.last_turn / T::lit(MAX_TURN),
        normalize_angle(state.heading) / T::PI(),
    ]);
    Ok(obs)
}
