use serde::{Deserialize, Serialize};

use crate::Real;

use super::{normalize_angle, DogfightParams, RewardParams, Result, SimError, VehicleState};

/// Events recorded during one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Events {
    pub wall_hit: bool,
    pub goal_reached: bool,
    pub timeout: bool,
    /// Dogfight only: the vehicles came closer than `r_min`.
    #[serde(default)]
    pub collision: bool,
}

fn distance<T: Real>(a: [T; 2], b: [T; 2]) -> T {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Per-step goal-reaching reward: distance penalty, then wall penalty, then goal bonus.
pub fn goal_reward<T: Real>(position: [T; 2], goal: [T; 2], events: Events, params: &RewardParams<T>) -> T {
    let mut r = -params.distance_coeff * distance(position, goal);
    if events.wall_hit {
        r += params.wall_penalty;
    }
    if events.goal_reached {
        r += params.goal_bonus;
    }
    r
}

/// Aspect angle and antenna train angle, both unsigned in `[0, π]`.
///
/// ATA is measured at the attacker between its nose and the line of sight to
/// the target; AA is measured at the target between its tail and the line
/// back to the attacker.
pub fn aa_ata<T: Real>(attacker: &VehicleState<T>, target: &VehicleState<T>) -> Result<(T, T)> {
    let dx = target.x - attacker.x;
    let dy = target.y - attacker.y;
    if dx == T::zero() && dy == T::zero() {
        return Err(SimError::UndefinedGeometry);
    }
    let los = dy.atan2(dx);
    let ata = normalize_angle(los - attacker.heading).abs();
    let back = (-dy).atan2(-dx);
    let tail = target.heading + T::PI();
    let aa = normalize_angle(back - tail).abs();
    Ok((aa, ata))
}

/// Geometry reward for `attacker` against `target`.
pub fn dogfight_reward<T: Real>(
    attacker: &VehicleState<T>,
    target: &VehicleState<T>,
    params: &DogfightParams<T>,
) -> Result<T> {
    let range = distance(attacker.position(), target.position());
    if range < params.r_min {
        return Ok(params.g_collision);
    }
    if range > params.r_min && range < params.r_max {
        let (aa, ata) = aa_ata(attacker, target)?;
        if aa < params.aa_fire && ata < params.ata_fire {
            return Ok(params.g_advantage);
        }
        if ata > params.ata_tail && aa > params.aa_tail {
            return Ok(params.g_disadvantage);
        }
    }
    Ok(T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Scenario;
    use std::f64::consts::PI;

    fn v(x: f64, y: f64, h: f64) -> VehicleState<f64> {
        VehicleState::at_rest(x, y, h)
    }

    #[test]
    fn goal_reward_table() {
        let p = Scenario::<f64>::open_arena(4000.0, 4000.0).rewards;
        let none = Events::default();
        assert_eq!(goal_reward([0.0, 0.0], [3000.0, 4000.0], none, &p), -0.05);
        let reached = Events { goal_reached: true, ..none };
        assert_eq!(goal_reward([10.0, 20.0], [10.0, 20.0], reached, &p), 10_000.0);
        let wall = Events { wall_hit: true, ..none };
        assert_eq!(goal_reward([0.0, 0.0], [3000.0, 4000.0], wall, &p), -100.0 - 0.05);
        assert_eq!(goal_reward([7.0, 7.0], [7.0, 7.0], none, &p), 0.0);
    }

    #[test]
    fn aa_ata_reference_geometries() {
        let (aa, ata) = aa_ata(&v(0.0, 0.0, 0.0), &v(1000.0, 0.0, 0.0)).unwrap();
        assert_eq!((aa, ata), (0.0, 0.0));
        let (aa, ata) = aa_ata(&v(0.0, 0.0, 0.0), &v(1000.0, 0.0, PI)).unwrap();
        assert_eq!((aa, ata), (PI, 0.0));
        let (aa, ata) = aa_ata(&v(0.0, 0.0, 0.0), &v(-1000.0, 0.0, 0.0)).unwrap();
        assert_eq!((aa, ata), (PI, PI));
        assert!(matches!(
            aa_ata(&v(1.0, 1.0, 0.0), &v(1.0, 1.0, 2.0)),
            Err(SimError::UndefinedGeometry)
        ));
    }

    #[test]
    fn dogfight_branches() {
        let p = Scenario::<f64>::open_arena(4000.0, 4000.0).dogfight;
        let a = v(0.0, 0.0, 0.0);
        assert_eq!(dogfight_reward(&a, &v(1000.0, 0.0, 0.0), &p).unwrap(), 1.0);
        assert_eq!(dogfight_reward(&v(1000.0, 0.0, 0.0), &a, &p).unwrap(), -1.0);
        assert_eq!(dogfight_reward(&a, &v(1000.0, 0.0, PI), &p).unwrap(), 0.0);
        let close = v(50.0, 0.0, 1.0);
        assert_eq!(dogfight_reward(&a, &close, &p).unwrap(), -10.0);
        assert_eq!(dogfight_reward(&close, &a, &p).unwrap(), -10.0);
        assert_eq!(dogfight_reward(&a, &v(3000.0, 0.0, 0.0), &p).unwrap(), 0.0);
    }
}
