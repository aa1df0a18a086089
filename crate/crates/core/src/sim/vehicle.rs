use crate::Real;

use super::{Result, SimError};

pub const MAX_SPEED: f64 = 300.0;
pub const MAX_ACCEL: f64 = 600.0;
/// Commanded acceleration per unit of throttle action (m/s²).
pub const ACCEL_GAIN: f64 = 500.0;
/// Deceleration applied when the throttle sits in its dead zone (m/s²).
pub const FRICTION_DECEL: f64 = 50.0;
pub const THROTTLE_DEAD_ZONE: f64 = 0.15;
pub const STEER_DEAD_ZONE: f64 = 0.1;
/// Heading change for a full steering action, applied once per control step.
pub const MAX_TURN: f64 = std::f64::consts::FRAC_PI_3;
pub const VEHICLE_LENGTH: f64 = 50.0;

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle<T: Real>(angle: T) -> T {
    let pi = T::PI();
    let two_pi = pi + pi;
    let mut r = angle % two_pi;
    if r > pi {
        r -= two_pi;
    } else if r <= -pi {
        r += two_pi;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState<T> {
    pub x: T,
    pub y: T,
    /// Radians, counter-clockwise from east, kept in `(-π, π]`.
    pub heading: T,
    /// Signed speed along the heading; negative is reverse.
    pub speed: T,
    pub accel: T,
    /// Heading change applied by the most recent step.
    pub last_turn: T,
}

impl<T: Real> VehicleState<T> {
    /// A vehicle at rest.
    pub fn at_rest(x: T, y: T, heading: T) -> Self {
        Self {
            x,
            y,
            heading: normalize_angle(heading),
            speed: T::zero(),
            accel: T::zero(),
            last_turn: T::zero(),
        }
    }

    pub fn position(&self) -> [T; 2] {
        [self.x, self.y]
    }

    pub fn velocity(&self) -> [T; 2] {
        [self.speed * self.heading.cos(), self.speed * self.heading.sin()]
    }

    pub fn acceleration(&self) -> [T; 2] {
        [self.accel * self.heading.cos(), self.accel * self.heading.sin()]
    }

    /// Advances the vehicle one control period. `action = (throttle, steering)`,
    /// each in `[-1, 1]`; out-of-range components are clamped.
    ///
    /// Walls are not considered here; collision resolution belongs to the world.
    pub fn apply_action(&self, action: [T; 2], dt: T) -> Result<Self> {
        if !action[0].is_finite() || !action[1].is_finite() {
            return Err(SimError::InvalidInput(format!(
                "non-finite action ({}, {})",
                action[0], action[1]
            )));
        }
        let one = T::one();
        let throttle = action[0].max(-one).min(one);
        let steer = action[1].max(-one).min(one);
        let max_speed = T::lit(MAX_SPEED);
        let max_accel = T::lit(MAX_ACCEL);

        let mut next = *self;
        if throttle.abs() > T::lit(THROTTLE_DEAD_ZONE) {
            next.accel = (T::lit(ACCEL_GAIN) * throttle).max(-max_accel).min(max_accel);
            next.speed = (self.speed + next.accel * dt).max(-max_speed).min(max_speed);
        } else if self.speed == T::zero() {
            next.accel = T::zero();
        } else if self.speed.abs() <= T::lit(FRICTION_DECEL) * dt {
            // friction brings the vehicle to rest, never through zero
            next.accel = -self.speed / dt;
            next.speed = T::zero();
        } else {
            next.accel = -self.speed.signum() * T::lit(FRICTION_DECEL);
            next.speed = self.speed + next.accel * dt;
        }

        if steer.abs() > T::lit(STEER_DEAD_ZONE) {
            let turn = -T::lit(MAX_TURN) * steer;
            next.heading = normalize_angle(self.heading + turn);
            next.last_turn = turn;
        } else {
            next.last_turn = T::zero();
        }

        next.x = self.x + next.speed * next.heading.cos() * dt;
        next.y = self.y + next.speed * next.heading.sin() * dt;
        Ok(next)
    }
}
