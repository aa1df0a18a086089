//! Scripted pursuit expert, demonstration collection, behavioral cloning.

mod demo;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::container::ContainerError;
use crate::nn::{adam_step, AdamState, GradientSet, Mlp, NnError};
use crate::replay::{Episode, GoalRelabeler, ReplayBuffer, ReplayError, Transition};
use crate::sim::{normalize_angle, GoalWorld, Scenario, SimError, VehicleState, ACCEL_GAIN, MAX_TURN};
use crate::td3::InputEncoding;
use crate::Real;

pub use demo::{load_pairs, pairs_from_bytes, pairs_to_bytes, save_pairs, DEMO_MAGIC};

/// Distance short of the goal at which the braking envelope reaches zero speed.
pub const BRAKE_MARGIN: f64 = 25.0;
/// Speed error (m/s) at which the throttle saturates.
pub const SPEED_BAND: f64 = 50.0;

pub const MIN_PAIRS: usize = 10;

#[derive(Debug, Error)]
pub enum BcError {
    #[error("need at least {MIN_PAIRS} demonstration pairs, got {0}")]
    TooFewPairs(usize),
    #[error("invalid settings: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Container(#[from] ContainerError),
}

pub type Result<T> = std::result::Result<T, BcError>;

/// Network input paired with the expert's action for it.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoPair<T> {
    pub input: Vec<T>,
    pub action: [T; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demonstrations<T> {
    pub episodes: Vec<Episode<T>>,
    pub pairs: Vec<DemoPair<T>>,
    /// Episodes that ended inside the goal radius.
    pub successes: usize,
}

/// Pure pursuit towards `goal`.
///
/// Steering cancels the bearing error in one step where the turn limit
/// allows. Throttle tracks the braking envelope, the speed
/// `sqrt(2·500·(d − margin))` from which full braking stops the vehicle
/// `margin` short of the goal: full throttle well below it, full brake well
/// above it, proportional in between.
pub fn expert_action<T: Real>(state: &VehicleState<T>, goal: [T; 2]) -> [T; 2] {
    let one = T::one();
    let (dx, dy) = (goal[0] - state.x, goal[1] - state.y);
    let distance = dx.hypot(dy);
    let bearing = if distance > T::zero() {
        normalize_angle(dy.atan2(dx) - state.heading)
    } else {
        T::zero()
    };
    let steer = clamp(-bearing / T::lit(MAX_TURN), -one, one);
    let envelope = (T::lit(2.0 * ACCEL_GAIN) * (distance - T::lit(BRAKE_MARGIN)).max(T::zero())).sqrt();
    let throttle = clamp((envelope - state.speed) / T::lit(SPEED_BAND), -one, one);
    [throttle, steer]
}

fn clamp<T: Real>(v: T, lo: T, hi: T) -> T {
    v.max(lo).min(hi)
}

/// Runs the expert for `n_episodes` seeded episodes of `scenario`.
pub fn collect_demonstrations<T: Real>(scenario: &Scenario<T>, n_episodes: usize, seed: u64) -> Result<Demonstrations<T>> {
    let encoding = InputEncoding::goal_relative(scenario);
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut world = GoalWorld::new(scenario.clone(), seed)?;
    let goal = scenario.goal;
    let mut out = Demonstrations { episodes: Vec::with_capacity(n_episodes), pairs: Vec::new(), successes: 0 };
    for _ in 0..n_episodes {
        let mut obs = world.reset(seeds.random())?;
        let mut episode = Episode::new();
        loop {
            let position = world.position();
            let action = expert_action(world.state(), goal);
            out.pairs.push(DemoPair { input: encoding.encode(&obs, goal, position), action });
            let step = world.step(action)?;
            let next = step.observation.clone();
            episode.push(Transition::from_step(obs, goal, action, position, &step));
            obs = next;
            if step.done {
                if step.events.goal_reached {
                    out.successes += 1;
                }
                break;
            }
        }
        out.episodes.push(episode);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcConfig<T> {
    pub epochs: usize,
    pub lr: T,
    pub holdout_fraction: T,
    pub batch_size: usize,
}

impl<T: Real> Default for BcConfig<T> {
    fn default() -> Self {
        Self { epochs: 50, lr: T::lit(1e-3), holdout_fraction: T::lit(0.2), batch_size: 64 }
    }
}

/// Per-epoch mean squared errors, measured after each epoch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BcReport<T> {
    pub train_mse: Vec<T>,
    pub holdout_mse: Vec<T>,
}

impl<T: Real> BcReport<T> {
    pub fn final_train(&self) -> Option<T> {
        self.train_mse.last().copied()
    }

    pub fn final_holdout(&self) -> Option<T> {
        self.holdout_mse.last().copied()
    }
}

/// Mean squared error over every action component, and its parameter gradient.
pub fn bc_loss_gradient<T: Real>(actor: &Mlp<T>, inputs: ArrayView2<T>, targets: ArrayView2<T>) -> Result<(T, GradientSet<T>)> {
    let cache = actor.forward(inputs)?;
    let out = cache.output();
    if out.dim() != targets.dim() {
        return Err(NnError::Shape(format!("targets {:?} vs outputs {:?}", targets.dim(), out.dim())).into());
    }
    let diff = out - &targets;
    let n = T::lit(diff.len() as f64);
    let loss = diff.iter().map(|&d| d * d).sum::<T>() / n;
    // backward averages over rows already, so only the per-row width remains
    let width = T::lit(diff.ncols() as f64);
    let grad_out = diff.mapv(|d| T::lit(2.0) * d / width);
    let (grads, _) = actor.backward(&cache, grad_out.view())?;
    Ok((loss, grads))
}

fn stack<T: Real>(pairs: &[&DemoPair<T>]) -> Result<(Array2<T>, Array2<T>)> {
    let width = pairs[0].input.len();
    let mut x = Vec::with_capacity(pairs.len() * width);
    let mut y = Vec::with_capacity(pairs.len() * 2);
    for p in pairs {
        if p.input.len() != width {
            return Err(NnError::Shape("demonstration inputs differ in width".into()).into());
        }
        x.extend_from_slice(&p.input);
        y.extend_from_slice(&p.action);
    }
    let x = Array2::from_shape_vec((pairs.len(), width), x).expect("row-major stack");
    let y = Array2::from_shape_vec((pairs.len(), 2), y).expect("row-major stack");
    Ok((x, y))
}

fn mse<T: Real>(actor: &Mlp<T>, x: &Array2<T>, y: &Array2<T>) -> Result<T> {
    let out = actor.predict(x.view())?;
    let n = T::lit(out.len() as f64);
    Ok(out.iter().zip(y.iter()).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / n)
}

/// Regresses the actor onto expert actions with minibatched Adam.
///
/// A shuffled `holdout_fraction` of the pairs is kept out of training; with
/// fewer than two pairs in it, the holdout curve stays empty.
pub fn bc_pretrain<T: Real, R: Rng + ?Sized>(
    actor: &mut Mlp<T>,
    pairs: &[DemoPair<T>],
    config: &BcConfig<T>,
    rng: &mut R,
) -> Result<BcReport<T>> {
    if pairs.len() < MIN_PAIRS {
        return Err(BcError::TooFewPairs(pairs.len()));
    }
    let frac = config.holdout_fraction.as_f64();
    if !(0.0..1.0).contains(&frac) || config.batch_size == 0 {
        return Err(BcError::Config(format!(
            "holdout fraction {frac} must be in [0, 1) and batch size positive"
        )));
    }
    let mut order: Vec<&DemoPair<T>> = pairs.iter().collect();
    order.shuffle(rng);
    let n_hold = (pairs.len() as f64 * frac).round() as usize;
    let (hold, train) = order.split_at(n_hold.min(pairs.len() - 1));
    let mut train = train.to_vec();
    let (train_x, train_y) = stack(&train)?;
    let holdout = if hold.is_empty() { None } else { Some(stack(hold)?) };

    let mut opt = AdamState::new(actor);
    let mut report = BcReport::default();
    for _ in 0..config.epochs {
        train.shuffle(rng);
        for chunk in train.chunks(config.batch_size) {
            let (x, y) = stack(chunk)?;
            let (_, grads) = bc_loss_gradient(actor, x.view(), y.view())?;
            adam_step(actor, &grads, &mut opt, config.lr)?;
        }
        report.train_mse.push(mse(actor, &train_x, &train_y)?);
        if let Some((x, y)) = &holdout {
            report.holdout_mse.push(mse(actor, x, y)?);
        }
    }
    Ok(report)
}

/// Stores demonstration episodes (and their relabeled copies when `her`
/// is given). Returns the number of transitions pushed.
pub fn seed_buffer<T: Real>(buffer: &mut ReplayBuffer<T>, episodes: &[Episode<T>], her: Option<&GoalRelabeler<T>>) -> Result<usize> {
    let mut pushed = 0;
    for e in episodes {
        pushed += buffer.store_episode(e, her)?;
    }
    Ok(pushed)
}
