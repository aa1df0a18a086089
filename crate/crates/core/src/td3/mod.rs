//! Twin-critic deterministic actor-critic learner with delayed policy updates.
//!
//! Each `train_step` samples a minibatch, forms the clipped double-Q target
//! from smoothed target-policy actions, regresses both critics onto it, and on
//! every `policy_delay`-th critic update takes one actor step on `-Q1(s, μ(s))`
//! followed by polyak updates of all three target networks.

mod batch;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::container::ContainerError;
use crate::nn::{adam_step, AdamState, Checkpoint, GradientSet, Mlp, NnError, OutputActivation};
use crate::replay::{ReplayBuffer, ReplayError};
use crate::Real;

pub use batch::{Batch, InputEncoding};

#[derive(Debug, Error)]
pub enum Td3Error {
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Checkpoint(#[from] ContainerError),
}

pub type Result<T> = std::result::Result<T, Td3Error>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Td3Config<T> {
    pub gamma: T,
    /// Fraction of the old target kept on each polyak update.
    pub rho: T,
    pub actor_lr: T,
    pub critic_lr: T,
    pub target_noise_sigma: T,
    pub target_noise_clip: T,
    pub policy_delay: u64,
    pub batch_size: usize,
    pub explore_sigma: T,
    /// Probability of replacing an exploring action by a uniform random one.
    pub epsilon_random: T,
    pub action_low: T,
    pub action_high: T,
    /// Multiplier applied to rewards inside the critic targets only.
    pub reward_scale: T,
}

impl<T: Real> Default for Td3Config<T> {
    fn default() -> Self {
        Self {
            gamma: T::lit(0.99),
            rho: T::lit(0.995),
            actor_lr: T::lit(3e-4),
            critic_lr: T::lit(3e-4),
            target_noise_sigma: T::lit(0.2),
            target_noise_clip: T::lit(0.5),
            policy_delay: 2,
            batch_size: 256,
            explore_sigma: T::lit(0.1),
            epsilon_random: T::lit(0.1),
            action_low: -T::one(),
            action_high: T::one(),
            reward_scale: T::one(),
        }
    }
}

impl<T: Real> Td3Config<T> {
    pub fn validate(&self) -> Result<()> {
        let (zero, one) = (T::zero(), T::one());
        let unit = |v: T| v >= zero && v <= one;
        let checks = [
            (unit(self.gamma), "gamma must lie in [0, 1]"),
            (unit(self.rho), "rho must lie in [0, 1]"),
            (unit(self.epsilon_random), "epsilon_random must lie in [0, 1]"),
            (self.target_noise_sigma >= zero, "target_noise_sigma must be non-negative"),
            (self.target_noise_clip >= zero, "target_noise_clip must be non-negative"),
            (self.explore_sigma >= zero, "explore_sigma must be non-negative"),
            (self.actor_lr >= zero && self.critic_lr >= zero, "learning rates must be non-negative"),
            (self.policy_delay >= 1, "policy_delay must be at least 1"),
            (self.batch_size >= 1, "batch_size must be at least 1"),
            (self.action_low < self.action_high, "action_low must be below action_high"),
            (self.reward_scale.is_finite() && self.reward_scale > zero, "reward_scale must be positive"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Td3Error::Config((*msg).into())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    Deterministic,
    Explore,
}

/// Outcome of one `train_step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport<T> {
    pub critic_losses: Option<(T, T)>,
    /// `None` when the actor update was skipped by the delay rule.
    pub actor_loss: Option<T>,
    pub critic_updates: u64,
    pub actor_updates: u64,
    /// Set when the buffer held fewer transitions than one batch.
    pub insufficient_data: bool,
}

fn clip<T: Real>(v: T, lo: T, hi: T) -> T {
    v.max(lo).min(hi)
}

fn gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Td3Agent<T> {
    pub actor: Mlp<T>,
    pub actor_target: Mlp<T>,
    pub critic1: Mlp<T>,
    pub critic2: Mlp<T>,
    pub critic1_target: Mlp<T>,
    pub critic2_target: Mlp<T>,
    pub actor_opt: AdamState<T>,
    pub critic1_opt: AdamState<T>,
    pub critic2_opt: AdamState<T>,
    pub critic_updates: u64,
    pub actor_updates: u64,
}

const NET_NAMES: [&str; 6] = ["actor", "actor_target", "critic1", "critic2", "critic1_target", "critic2_target"];
const OPT_NAMES: [&str; 3] = ["actor_opt", "critic1_opt", "critic2_opt"];

impl<T: Real> Td3Agent<T> {
    /// Actor `input → hidden… → action` with `tanh` output; critics
    /// `input + action → hidden… → 1`, linear.
    pub fn new(input_dim: usize, action_dim: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        let layers = |first: usize, last: usize| {
            let mut v = vec![first];
            v.extend_from_slice(hidden);
            v.push(last);
            v
        };
        let actor = Mlp::new(&layers(input_dim, action_dim), OutputActivation::Tanh, seed)?;
        let critic_sizes = layers(input_dim + action_dim, 1);
        let c1 = Mlp::new(&critic_sizes, OutputActivation::Linear, seed.wrapping_add(1))?;
        let c2 = Mlp::new(&critic_sizes, OutputActivation::Linear, seed.wrapping_add(2))?;
        Self::from_networks(actor, c1, c2)
    }

    /// Wraps live networks; targets start as exact copies.
    pub fn from_networks(actor: Mlp<T>, critic1: Mlp<T>, critic2: Mlp<T>) -> Result<Self> {
        let expected_in = actor.input_dim() + actor.output_dim();
        if critic1.sizes() != critic2.sizes() || critic1.input_dim() != expected_in || critic1.output_dim() != 1 {
            return Err(Td3Error::Config(format!(
                "critics {:?}/{:?} incompatible with actor {:?}",
                critic1.sizes(),
                critic2.sizes(),
                actor.sizes()
            )));
        }
        Ok(Self {
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor_opt: AdamState::new(&actor),
            critic1_opt: AdamState::new(&critic1),
            critic2_opt: AdamState::new(&critic2),
            actor,
            critic1,
            critic2,
            critic_updates: 0,
            actor_updates: 0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.actor.output_dim()
    }

    pub fn select_action<R: Rng + ?Sized>(
        &self,
        input: &[T],
        mode: ActionMode,
        config: &Td3Config<T>,
        rng: &mut R,
    ) -> Result<Vec<T>> {
        let (lo, hi) = (config.action_low, config.action_high);
        if input.len() != self.input_dim() {
            return Err(NnError::Shape(format!("input width {} != {}", input.len(), self.input_dim())).into());
        }
        if mode == ActionMode::Explore && T::lit(rng.random::<f64>()) < config.epsilon_random {
            return Ok((0..self.action_dim())
                .map(|_| lo + (hi - lo) * T::lit(rng.random::<f64>()))
                .collect());
        }
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row view");
        let out = self.actor.predict(x)?;
        Ok(out
            .row(0)
            .iter()
            .map(|&a| match mode {
                ActionMode::Deterministic => clip(a, lo, hi),
                ActionMode::Explore => clip(a + config.explore_sigma * gaussian::<T, R>(rng), lo, hi),
            })
            .collect())
    }

    /// Target-policy smoothing with caller-supplied raw noise `ε` (same shape as the actions).
    pub fn smooth_target_action_with_noise(
        &self,
        next_states: ArrayView2<T>,
        raw_noise: ArrayView2<T>,
        config: &Td3Config<T>,
    ) -> Result<Array2<T>> {
        let mut a = self.actor_target.predict(next_states)?;
        if raw_noise.dim() != a.dim() {
            return Err(NnError::Shape("noise shape differs from action batch".into()).into());
        }
        let c = config.target_noise_clip;
        ndarray::Zip::from(&mut a)
            .and(&raw_noise)
            .for_each(|a, &e| *a = clip(*a + clip(e, -c, c), config.action_low, config.action_high));
        Ok(a)
    }

    /// `clip(μ_target(s') + clip(ε, −c, c), low, high)` with `ε ~ N(0, σ)` per component.
    pub fn smooth_target_action<R: Rng + ?Sized>(
        &self,
        next_states: ArrayView2<T>,
        config: &Td3Config<T>,
        rng: &mut R,
    ) -> Result<Array2<T>> {
        let noise = Array2::from_shape_simple_fn((next_states.nrows(), self.action_dim()), || {
            config.target_noise_sigma * gaussian::<T, R>(rng)
        });
        self.smooth_target_action_with_noise(next_states, noise.view(), config)
    }

    /// Both target critics evaluated at `(s', a')`.
    pub fn target_q_values(&self, next_states: ArrayView2<T>, next_actions: ArrayView2<T>) -> Result<(Array1<T>, Array1<T>)> {
        let x = concatenate![Axis(1), next_states, next_actions];
        let q1 = self.critic1_target.predict(x.view())?.column(0).to_owned();
        let q2 = self.critic2_target.predict(x.view())?.column(0).to_owned();
        Ok((q1, q2))
    }

    /// `y = scale·r + γ(1 − d)·min(Q1'(s', a'), Q2'(s', a'))` for given next actions.
    pub fn td_target_with_actions(&self, batch: &Batch<T>, next_actions: ArrayView2<T>, config: &Td3Config<T>) -> Result<Array1<T>> {
        let (q1, q2) = self.target_q_values(batch.next_states.view(), next_actions)?;
        let one = T::one();
        Ok(ndarray::Zip::from(&batch.rewards)
            .and(&batch.dones)
            .and(&q1)
            .and(&q2)
            .map_collect(|&r, &d, &a, &b| config.reward_scale * r + config.gamma * (one - d) * a.min(b)))
    }

    pub fn compute_td_target<R: Rng + ?Sized>(&self, batch: &Batch<T>, config: &Td3Config<T>, rng: &mut R) -> Result<Array1<T>> {
        let next_actions = self.smooth_target_action(batch.next_states.view(), config, rng)?;
        self.td_target_with_actions(batch, next_actions.view(), config)
    }

    fn critic_input(batch: &Batch<T>) -> Array2<T> {
        concatenate![Axis(1), batch.states, batch.actions]
    }

    /// Mean squared error of `critic` against `targets` and its parameter gradient.
    pub fn critic_loss_gradient(critic: &Mlp<T>, batch: &Batch<T>, targets: &Array1<T>) -> Result<(T, GradientSet<T>)> {
        let x = Self::critic_input(batch);
        let cache = critic.forward(x.view())?;
        let q = cache.output().column(0);
        let err = &q - targets;
        let loss = err.mapv(|e| e * e).mean().unwrap_or_else(T::zero);
        let grad_out = err.mapv(|e| e + e).insert_axis(Axis(1));
        let (grads, _) = critic.backward(&cache, grad_out.view())?;
        Ok((loss, grads))
    }

    /// One Adam step per critic toward the shared `targets`.
    pub fn critic_update(&mut self, batch: &Batch<T>, targets: &Array1<T>, config: &Td3Config<T>) -> Result<(T, T)> {
        let (l1, g1) = Self::critic_loss_gradient(&self.critic1, batch, targets)?;
        let (l2, g2) = Self::critic_loss_gradient(&self.critic2, batch, targets)?;
        if !l1.is_finite() || !l2.is_finite() || !g1.is_finite() || !g2.is_finite() {
            return Err(Td3Error::Divergence(format!("critic losses {l1}, {l2}")));
        }
        adam_step(&mut self.critic1, &g1, &mut self.critic1_opt, config.critic_lr)?;
        adam_step(&mut self.critic2, &g2, &mut self.critic2_opt, config.critic_lr)?;
        self.critic_updates += 1;
        Ok((l1, l2))
    }

    /// `−mean Q1(s, μ(s))` and its gradient with respect to the actor parameters.
    pub fn actor_loss_gradient(&self, states: ArrayView2<T>) -> Result<(T, GradientSet<T>)> {
        let actor_cache = self.actor.forward(states)?;
        let x = concatenate![Axis(1), states, actor_cache.output().view()];
        let critic_cache = self.critic1.forward(x.view())?;
        let loss = -critic_cache.output().mean().unwrap_or_else(T::zero);
        let grad_q = Array2::from_elem((states.nrows(), 1), -T::one());
        let (_, dx) = self.critic1.backward(&critic_cache, grad_q.view())?;
        let da = dx.slice(s![.., states.ncols()..]);
        let (grads, _) = self.actor.backward(&actor_cache, da)?;
        Ok((loss, grads))
    }

    /// Delayed actor step plus target tracking. Returns `None` when skipped.
    pub fn actor_update(&mut self, batch: &Batch<T>, config: &Td3Config<T>) -> Result<Option<T>> {
        if self.critic_updates == 0 || !self.critic_updates.is_multiple_of(config.policy_delay) {
            return Ok(None);
        }
        let (loss, grads) = self.actor_loss_gradient(batch.states.view())?;
        if !loss.is_finite() || !grads.is_finite() {
            return Err(Td3Error::Divergence(format!("actor loss {loss}")));
        }
        adam_step(&mut self.actor, &grads, &mut self.actor_opt, config.actor_lr)?;
        self.actor_target.polyak_from(&self.actor, config.rho)?;
        self.critic1_target.polyak_from(&self.critic1, config.rho)?;
        self.critic2_target.polyak_from(&self.critic2, config.rho)?;
        self.actor_updates += 1;
        Ok(Some(loss))
    }

    /// Runs one full update on a batch that has already been assembled.
    pub fn train_on_batch<R: Rng + ?Sized>(&mut self, batch: &Batch<T>, config: &Td3Config<T>, rng: &mut R) -> Result<TrainReport<T>> {
        let targets = self.compute_td_target(batch, config, rng)?;
        let losses = self.critic_update(batch, &targets, config)?;
        let actor_loss = self.actor_update(batch, config)?;
        Ok(TrainReport {
            critic_losses: Some(losses),
            actor_loss,
            critic_updates: self.critic_updates,
            actor_updates: self.actor_updates,
            insufficient_data: false,
        })
    }

    /// Sample, target, critic update, and (possibly) actor update. A buffer
    /// smaller than one batch leaves every parameter untouched.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        buffer: &ReplayBuffer<T>,
        encoding: &InputEncoding<T>,
        config: &Td3Config<T>,
        rng: &mut R,
    ) -> Result<TrainReport<T>> {
        if buffer.len() < config.batch_size {
            return Ok(TrainReport {
                critic_losses: None,
                actor_loss: None,
                critic_updates: self.critic_updates,
                actor_updates: self.actor_updates,
                insufficient_data: true,
            });
        }
        let sample = buffer.sample(config.batch_size, rng)?;
        let batch = Batch::from_transitions(&sample, encoding)?;
        self.train_on_batch(&batch, config, rng)
    }

    pub fn to_checkpoint(&self) -> Checkpoint<T> {
        let nets = [
            &self.actor,
            &self.actor_target,
            &self.critic1,
            &self.critic2,
            &self.critic1_target,
            &self.critic2_target,
        ];
        let opts = [&self.actor_opt, &self.critic1_opt, &self.critic2_opt];
        let mut ck = Checkpoint::new();
        for (name, net) in NET_NAMES.iter().zip(nets) {
            ck = ck.with_network(name, net);
        }
        for (name, opt) in OPT_NAMES.iter().zip(opts) {
            ck = ck.with_optimizer(name, opt);
        }
        ck.with_counter("critic_updates", self.critic_updates)
            .with_counter("actor_updates", self.actor_updates)
    }

    /// Restores an agent; `input_dim` (when given) must match the stored actor.
    pub fn from_checkpoint(ck: &Checkpoint<T>, input_dim: Option<usize>) -> Result<Self> {
        let actor = ck.network("actor", None)?.clone();
        if let Some(d) = input_dim {
            if actor.input_dim() != d {
                let mut expected = actor.sizes().to_vec();
                expected[0] = d;
                return Err(ContainerError::ShapeMismatch {
                    name: "actor".into(),
                    expected,
                    found: actor.sizes().to_vec(),
                }
                .into());
            }
        }
        let critic_sizes = ck.network("critic1", None)?.sizes().to_vec();
        let get = |name: &str, sizes: &[usize]| ck.network(name, Some(sizes)).cloned();
        let opt = |name: &str, sizes: &[usize]| -> Result<AdamState<T>> {
            let st = ck.optimizer(name)?.clone();
            if st.m.sizes() != sizes {
                return Err(ContainerError::ShapeMismatch {
                    name: name.into(),
                    expected: sizes.to_vec(),
                    found: st.m.sizes(),
                }
                .into());
            }
            Ok(st)
        };
        let agent = Self {
            actor_target: get("actor_target", actor.sizes())?,
            critic1: get("critic1", &critic_sizes)?,
            critic2: get("critic2", &critic_sizes)?,
            critic1_target: get("critic1_target", &critic_sizes)?,
            critic2_target: get("critic2_target", &critic_sizes)?,
            actor_opt: opt("actor_opt", actor.sizes())?,
            critic1_opt: opt("critic1_opt", &critic_sizes)?,
            critic2_opt: opt("critic2_opt", &critic_sizes)?,
            critic_updates: ck.counter("critic_updates")?,
            actor_updates: ck.counter("actor_updates")?,
            actor,
        };
        Ok(agent)
    }
}

#[cfg(test)]
mod tests;
