use ndarray::{Array1, Array2};

use crate::nn::NnError;
use crate::replay::Transition;
use crate::sim::Scenario;
use crate::Real;

use super::Result;

/// How stored transitions become network inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputEncoding<T> {
    /// The observation alone (dogfight).
    Observation,
    /// Observation followed by the goal offset scaled by the arena extent.
    GoalRelative { width: T, height: T },
}

impl<T: Real> InputEncoding<T> {
    pub fn goal_relative(scenario: &Scenario<T>) -> Self {
        Self::GoalRelative { width: scenario.width, height: scenario.height }
    }

    pub fn extra_dims(&self) -> usize {
        match self {
            Self::Observation => 0,
            Self::GoalRelative { .. } => 2,
        }
    }

    pub fn encode_into(&self, out: &mut Vec<T>, obs: &[T], goal: [T; 2], position: [T; 2]) {
        out.extend_from_slice(obs);
        if let Self::GoalRelative { width, height } = *self {
            // same scaling as sim::goal_descriptor
            out.push((goal[0] - position[0]) / width);
            out.push((goal[1] - position[1]) / height);
        }
    }

    pub fn encode(&self, obs: &[T], goal: [T; 2], position: [T; 2]) -> Vec<T> {
        let mut v = Vec::with_capacity(obs.len() + self.extra_dims());
        self.encode_into(&mut v, obs, goal, position);
        v
    }
}

/// Minibatch as dense matrices, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    pub states: Array2<T>,
    pub actions: Array2<T>,
    pub rewards: Array1<T>,
    pub next_states: Array2<T>,
    /// 1 for terminal transitions, 0 otherwise.
    pub dones: Array1<T>,
}

impl<T: Real> Batch<T> {
    pub fn from_transitions(items: &[&Transition<T>], encoding: &InputEncoding<T>) -> Result<Self> {
        let first = items.first().ok_or_else(|| NnError::Shape("empty batch".into()))?;
        let width = first.obs.len() + encoding.extra_dims();
        let n = items.len();
        let mut states = Vec::with_capacity(n * width);
        let mut next = Vec::with_capacity(n * width);
        let mut actions = Vec::with_capacity(n * 2);
        for t in items {
            if t.obs.len() != first.obs.len() || t.next_obs.len() != first.obs.len() {
                return Err(NnError::Shape("observations of differing length in one batch".into()).into());
            }
            encoding.encode_into(&mut states, &t.obs, t.goal, t.achieved);
            encoding.encode_into(&mut next, &t.next_obs, t.goal, t.achieved_next);
            actions.extend_from_slice(&t.action);
        }
        let shape_err = |e: ndarray::ShapeError| NnError::Shape(e.to_string());
        Ok(Self {
            states: Array2::from_shape_vec((n, width), states).map_err(shape_err)?,
            actions: Array2::from_shape_vec((n, 2), actions).map_err(shape_err)?,
            rewards: items.iter().map(|t| t.reward).collect(),
            next_states: Array2::from_shape_vec((n, width), next).map_err(shape_err)?,
            dones: items.iter().map(|t| if t.done { T::one() } else { T::zero() }).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}
