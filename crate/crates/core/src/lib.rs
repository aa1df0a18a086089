//! Dubins-vehicle reinforcement learning stack.
//!
//! * [`sim`]: deterministic 2D arena with LIDAR, goal and dogfight rewards.
//! * [`nn`]: dense MLPs with manual backprop, Adam, and a checkpoint container.
//! * [`replay`]: ring replay buffer with final-state hindsight relabeling.
//! * [`td3`]: twin-critic delayed actor-critic learner.
//! * [`bc`]: pure-pursuit expert and behavioral-cloning pretraining.
//! * [`net`]: length-prefixed lockstep protocol for remote environments.
//! * [`harness`]: training schedule, metrics, plots.
//!
//! The numeric core is generic over [`Real`]; the aliases below pin it to `f64`,
//! which is what the harness, the wire protocol and the checkpoints use.

pub mod bc;
pub mod container;
pub mod harness;
pub mod net;
pub mod nn;
pub mod replay;
pub mod scalar;
pub mod sim;
pub mod td3;

pub use scalar::Real;

pub type VehicleState = sim::VehicleState<f64>;
pub type Scenario = sim::Scenario<f64>;
pub type GoalWorld = sim::GoalWorld<f64>;
pub type DogfightWorld = sim::DogfightWorld<f64>;
pub type StepResult = sim::StepResult<f64>;
pub type Mlp = nn::Mlp<f64>;
pub type GradientSet = nn::GradientSet<f64>;
pub type AdamState = nn::AdamState<f64>;
pub type Transition = replay::Transition<f64>;
pub type Episode = replay::Episode<f64>;
pub type ReplayBuffer = replay::ReplayBuffer<f64>;
pub type Td3Config = td3::Td3Config<f64>;
pub type Td3Agent = td3::Td3Agent<f64>;
