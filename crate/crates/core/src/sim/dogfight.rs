use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::Real;

use super::world::{resolve_motion, sample_start};
use super::{
    dogfight_reward, normalize_angle, Events, Result, Scenario, SimError, StepResult, VehicleState,
    MAX_SPEED, MAX_TURN,
};

/// Length of the per-agent dogfight observation.
pub const DOGFIGHT_OBS_DIM: usize = 9;

/// Two vehicles sharing one arena.
#[derive(Debug, Clone)]
pub struct DogfightWorld<T> {
    scenario: Scenario<T>,
    vehicles: [VehicleState<T>; 2],
    steps: u32,
    done: bool,
}

impl<T: Real> DogfightWorld<T> {
    pub fn new(scenario: Scenario<T>, seed: u64) -> Result<Self> {
        let zero = VehicleState::at_rest(T::zero(), T::zero(), T::zero());
        let mut w = Self { scenario, vehicles: [zero, zero], steps: 0, done: false };
        w.reset(seed)?;
        Ok(w)
    }

    pub fn with_states(scenario: Scenario<T>, v0: VehicleState<T>, v1: VehicleState<T>) -> Self {
        Self { scenario, vehicles: [v0, v1], steps: 0, done: false }
    }

    /// Random starts for both vehicles, separated by more than `r_min`.
    pub fn reset(&mut self, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v0 = sample_start(&self.scenario, &mut rng, |_| true)?;
        let r_min = self.scenario.dogfight.r_min;
        let v1 = sample_start(&self.scenario, &mut rng, |p| (p[0] - v0.x).hypot(p[1] - v0.y) > r_min)?;
        self.vehicles = [v0, v1];
        self.steps = 0;
        self.done = false;
        Ok(())
    }

    pub fn scenario(&self) -> &Scenario<T> {
        &self.scenario
    }

    pub fn vehicle(&self, agent: usize) -> Result<&VehicleState<T>> {
        self.vehicles.get(agent).ok_or(SimError::InvalidAgent(agent))
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn observe(&self, agent: usize) -> Result<Vec<T>> {
        observe_dogfight(self, agent)
    }

    /// Advances both vehicles simultaneously; rewards use the post-step geometry.
    pub fn step(&mut self, action0: [T; 2], action1: [T; 2]) -> Result<[StepResult<T>; 2]> {
        if self.done {
            return Err(SimError::Usage("step called on a finished dogfight".into()));
        }
        let dt = self.scenario.dt;
        let moved = [
            self.vehicles[0].apply_action(action0, dt)?,
            self.vehicles[1].apply_action(action1, dt)?,
        ];
        let mut hits = [false; 2];
        for i in 0..2 {
            let (v, hit) = resolve_motion(&self.vehicles[i], moved[i], &self.scenario);
            self.vehicles[i] = v;
            hits[i] = hit;
        }
        self.steps += 1;

        let [a, b] = &self.vehicles;
        let range = (a.x - b.x).hypot(a.y - b.y);
        let collision = range < self.scenario.dogfight.r_min;
        let timeout = !collision && self.steps >= self.scenario.max_steps;
        self.done = collision || timeout;

        let mut out = Vec::with_capacity(2);
        for (i, &hit) in hits.iter().enumerate() {
            let mut reward = dogfight_reward(&self.vehicles[i], &self.vehicles[1 - i], &self.scenario.dogfight)?;
            if hit {
                reward += self.scenario.dogfight.g_hit;
            }
            out.push(StepResult {
                observation: self.observe(i)?,
                reward,
                done: self.done,
                events: Events { wall_hit: hits[i], goal_reached: false, timeout, collision },
                achieved: self.vehicles[i].position(),
            });
        }
        let second = out.pop().expect("two results");
        let first = out.pop().expect("two results");
        Ok([first, second])
    }
}

/// Nine entries: own position, heading, velocity, opponent position, last
/// turn, and the signed bearing to the opponent.
pub fn observe_dogfight<T: Real>(world: &DogfightWorld<T>, agent: usize) -> Result<Vec<T>> {
    if agent > 1 {
        return Err(SimError::InvalidAgent(agent));
    }
    let me = &world.vehicles[agent];
    let opp = &world.vehicles[1 - agent];
    let sc = &world.scenario;
    let vmax = T::lit(MAX_SPEED);
    let [vx, vy] = me.velocity();
    let bearing = normalize_angle((opp.y - me.y).atan2(opp.x - me.x) - me.heading);
    Ok(vec![
        me.x / sc.width,
        me.y / sc.height,
        me.heading / T::PI(),
        vx / vmax,
        vy / vmax,
        opp.x / sc.width,
        opp.y / sc.height,
        me.last_turn / T::lit(MAX_TURN),
        bearing / T::PI(),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn world(v0: VehicleState<f64>, v1: VehicleState<f64>) -> DogfightWorld<f64> {
        DogfightWorld::with_states(Scenario::open_arena(4000.0, 4000.0), v0, v1)
    }

    #[test]
    fn tail_chase_rewards_are_opposite() {
        let mut w = world(VehicleState::at_rest(1000.0, 2000.0, 0.0), VehicleState::at_rest(2000.0, 2000.0, 0.0));
        let [r0, r1] = w.step([0.0, 0.0], [0.0, 0.0]).unwrap();
        assert_eq!((r0.reward, r1.reward), (1.0, -1.0));
        assert!(!r0.done);
    }

    #[test]
    fn head_on_is_neutral() {
        let mut w = world(VehicleState::at_rest(1000.0, 2000.0, 0.0), VehicleState::at_rest(2000.0, 2000.0, PI));
        let [r0, r1] = w.step([0.0, 0.0], [0.0, 0.0]).unwrap();
        assert_eq!((r0.reward, r1.reward), (0.0, 0.0));
    }

    #[test]
    fn close_pass_is_mutual_collision() {
        let mut w = world(VehicleState::at_rest(1000.0, 2000.0, 0.0), VehicleState::at_rest(1050.0, 2000.0, 1.0));
        let [r0, r1] = w.step([0.0, 0.0], [0.0, 0.0]).unwrap();
        assert_eq!((r0.reward, r1.reward), (-10.0, -10.0));
        assert!(r0.done && r1.done && r0.events.collision);
        assert!(w.step([0.0, 0.0], [0.0, 0.0]).is_err());
    }

    #[test]
    fn observation_perspective() {
        let w = world(VehicleState::at_rest(1000.0, 2000.0, 0.0), VehicleState::at_rest(3000.0, 2000.0, 0.5));
        let o0 = w.observe(0).unwrap();
        let o1 = w.observe(1).unwrap();
        assert_eq!(o0.len(), DOGFIGHT_OBS_DIM);
        assert_eq!(&o0[5..7], &o1[0..2]);
        assert_eq!(&o1[5..7], &o0[0..2]);
        assert_eq!(o0[8], 0.0);
        assert!(o0.iter().chain(&o1).all(|v| (-1.0..=1.0).contains(v)));
        assert!(matches!(w.observe(2), Err(SimError::InvalidAgent(2))));
    }

    #[test]
    fn reset_separates_vehicles() {
        for seed in 0..200 {
            let w = DogfightWorld::new(Scenario::<f64>::open_arena(4000.0, 4000.0), seed).unwrap();
            let (a, b) = (w.vehicle(0).unwrap(), w.vehicle(1).unwrap());
            assert!((a.x - b.x).hypot(a.y - b.y) > 100.0);
        }
    }
}
