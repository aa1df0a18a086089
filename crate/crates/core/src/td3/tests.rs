use ndarray::{array, Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::nn::{finite_difference_grad, max_relative_error};
use crate::replay::Transition;

fn constant_critic(input: usize, value: f64) -> Mlp<f64> {
    Mlp::from_parts(vec![Array2::zeros((1, input))], vec![array![value]], OutputActivation::Linear).unwrap()
}

fn tiny_agent(seed: u64) -> Td3Agent<f64> {
    Td3Agent::new(3, 2, &[8, 8], seed).unwrap()
}

fn batch(n: usize, seed: u64) -> Batch<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = |r: f64| (rng.random::<f64>() * 2.0 - 1.0) * r;
    Batch {
        states: Array2::from_shape_simple_fn((n, 3), || u(1.0)),
        actions: Array2::from_shape_simple_fn((n, 2), || u(1.0)),
        rewards: Array1::from_shape_simple_fn(n, || u(2.0)),
        next_states: Array2::from_shape_simple_fn((n, 3), || u(1.0)),
        dones: Array1::from_shape_simple_fn(n, || if u(1.0) > 0.6 { 1.0 } else { 0.0 }),
    }
}

#[test]
fn clipped_double_q_target_by_hand() {
    let actor = Mlp::new(&[3, 4, 2], OutputActivation::Tanh, 0).unwrap();
    let agent = Td3Agent::from_networks(actor, constant_critic(5, 5.0), constant_critic(5, 3.0)).unwrap();
    let cfg = Td3Config::default();
    let mut b = batch(1, 0);
    b.rewards[0] = 1.0;
    b.dones[0] = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let y = agent.compute_td_target(&b, &cfg, &mut rng).unwrap();
    assert!((y[0] - 3.97).abs() < 1e-12, "{}", y[0]);
    b.dones[0] = 1.0;
    assert_eq!(agent.compute_td_target(&b, &cfg, &mut rng).unwrap()[0], 1.0);

    let twin = Td3Agent::from_networks(
        Mlp::new(&[3, 4, 2], OutputActivation::Tanh, 0).unwrap(),
        constant_critic(5, 4.0),
        constant_critic(5, 4.0),
    )
    .unwrap();
    b.dones[0] = 0.0;
    assert!((twin.compute_td_target(&b, &cfg, &mut rng).unwrap()[0] - (1.0 + 0.99 * 4.0)).abs() < 1e-12);
}

#[test]
fn smoothing_clips_noise_then_action() {
    // actor with zero weights and bias atanh(0.95) outputs exactly tanh(atanh(0.95))
    let b = 0.95f64.atanh();
    let actor = Mlp::from_parts(vec![Array2::zeros((2, 3))], vec![array![b, b]], OutputActivation::Tanh).unwrap();
    let agent = Td3Agent::from_networks(actor, constant_critic(5, 0.0), constant_critic(5, 0.0)).unwrap();
    let cfg = Td3Config::default();
    let s = Array2::zeros((1, 3));
    let a = agent.smooth_target_action_with_noise(s.view(), array![[0.9, -0.9]].view(), &cfg).unwrap();
    assert_eq!(a[[0, 0]], 1.0);
    let mu = 0.95f64.atanh().tanh();
    assert!((a[[0, 1]] - (mu - 0.5)).abs() < 1e-15);

    let zero_sigma = Td3Config { target_noise_sigma: 0.0, ..cfg };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = agent.smooth_target_action(s.view(), &zero_sigma, &mut rng).unwrap();
    assert_eq!(a, array![[mu, mu]]);
}

#[test]
fn select_action_modes() {
    let agent = tiny_agent(4);
    let cfg = Td3Config::default();
    let input = [0.3, -0.2, 0.8];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let det = agent.select_action(&input, ActionMode::Deterministic, &cfg, &mut rng).unwrap();
    let direct = agent.actor.predict(array![[0.3, -0.2, 0.8]].view()).unwrap();
    assert_eq!(det, direct.row(0).to_vec());

    let quiet = Td3Config { explore_sigma: 0.0, epsilon_random: 0.0, ..cfg };
    assert_eq!(agent.select_action(&input, ActionMode::Explore, &quiet, &mut rng).unwrap(), det);

    let always_random = Td3Config { epsilon_random: 1.0, ..cfg };
    let mut seen_far = false;
    for _ in 0..200 {
        let a = agent.select_action(&input, ActionMode::Explore, &always_random, &mut rng).unwrap();
        assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
        seen_far |= a.iter().any(|v| v.abs() > 0.9);
    }
    assert!(seen_far);
    assert!(agent.select_action(&[0.0; 4], ActionMode::Deterministic, &cfg, &mut rng).is_err());
}

#[test]
fn critic_loss_matches_hand_value() {
    // Q(s, a) = 0.5·s0 − a1 + 0.25
    let w = array![[0.5, 0.0, 0.0, 0.0, -1.0]];
    let critic = Mlp::from_parts(vec![w], vec![array![0.25]], OutputActivation::Linear).unwrap();
    let b = Batch {
        states: array![[2.0, 1.0, 1.0]],
        actions: array![[0.3, 0.4]],
        rewards: array![0.0],
        next_states: array![[0.0, 0.0, 0.0]],
        dones: array![1.0],
    };
    let y = array![-1.0];
    let (loss, _) = Td3Agent::critic_loss_gradient(&critic, &b, &y).unwrap();
    let q: f64 = 0.5 * 2.0 - 0.4 + 0.25;
    assert!((loss - (q + 1.0).powi(2)).abs() < 1e-14);
}

#[test]
fn zero_learning_rate_updates_nothing_but_counters() {
    let mut agent = tiny_agent(5);
    let initial = agent.clone();
    let cfg = Td3Config { actor_lr: 0.0, critic_lr: 0.0, ..Td3Config::default() };
    let b = batch(16, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..4 {
        let r = agent.train_on_batch(&b, &cfg, &mut rng).unwrap();
        assert!(r.critic_losses.unwrap().0.is_finite());
    }
    assert_eq!(agent.actor, initial.actor);
    assert_eq!(agent.critic1, initial.critic1);
    assert_eq!(agent.critic2_target, initial.critic2_target);
    assert_eq!((agent.critic_updates, agent.actor_updates), (4, 2));
}

#[test]
fn actor_lr_zero_still_tracks_targets() {
    let mut agent = tiny_agent(6);
    let cfg = Td3Config { actor_lr: 0.0, ..Td3Config::default() };
    let b = batch(16, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let actor_before = agent.actor.clone();
    let target_before = agent.critic1_target.clone();
    agent.train_on_batch(&b, &cfg, &mut rng).unwrap();
    agent.train_on_batch(&b, &cfg, &mut rng).unwrap();
    assert_eq!(agent.actor, actor_before);
    assert_ne!(agent.critic1_target, target_before);
}

#[test]
fn rho_one_freezes_targets() {
    let mut agent = tiny_agent(7);
    let cfg = Td3Config { rho: 1.0, ..Td3Config::default() };
    let initial = agent.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for i in 0..6 {
        agent.train_on_batch(&batch(8, i), &cfg, &mut rng).unwrap();
    }
    assert_ne!(agent.actor, initial.actor);
    assert_eq!(agent.actor_target, initial.actor_target);
    assert_eq!(agent.critic1_target, initial.critic1_target);
    assert_eq!(agent.critic2_target, initial.critic2_target);
}

#[test]
fn actor_cadence() {
    let mut agent = tiny_agent(8);
    let cfg = Td3Config::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let b = batch(8, 1);
    let updated: Vec<bool> = (0..4)
        .map(|_| agent.train_on_batch(&b, &cfg, &mut rng).unwrap().actor_loss.is_some())
        .collect();
    assert_eq!(updated, vec![false, true, false, true]);
    let cfg3 = Td3Config { policy_delay: 3, ..cfg };
    for _ in 0..11 {
        agent.train_on_batch(&b, &cfg3, &mut rng).unwrap();
    }
    // counts 5..=15 contain multiples of 3: 6, 9, 12, 15
    assert_eq!(agent.actor_updates, 2 + 4);
}

#[test]
fn repeated_critic_updates_reduce_loss() {
    let mut agent = tiny_agent(9);
    let cfg = Td3Config { critic_lr: 1e-2, ..Td3Config::default() };
    let b = batch(32, 5);
    let y = Array1::from_shape_fn(32, |i| (i as f64 * 0.37).sin());
    let first = agent.critic_update(&b, &y, &cfg).unwrap().0;
    let mut last = first;
    for _ in 0..49 {
        last = agent.critic_update(&b, &y, &cfg).unwrap().0;
    }
    assert!(last < first, "{last} !< {first}");
}

#[test]
fn actor_gradient_matches_finite_differences() {
    let agent = tiny_agent(10);
    let b = batch(6, 6);
    let (_, analytic) = agent.actor_loss_gradient(b.states.view()).unwrap();
    let states = b.states.clone();
    let critic = agent.critic1.clone();
    let numeric = finite_difference_grad(&agent.actor, b.states.view(), |a| {
        let x = ndarray::concatenate![Axis(1), states, *a];
        -critic.predict(x.view()).unwrap().mean().unwrap()
    });
    assert!(max_relative_error(&analytic, &numeric, 1e-4) < 1e-5);
}

#[test]
fn train_step_on_small_buffer_is_noop() {
    let mut agent = tiny_agent(11);
    let before = agent.clone();
    let mut buf = ReplayBuffer::new(100);
    buf.push(Transition {
        obs: vec![0.0; 3],
        goal: [0.0; 2],
        action: [0.0; 2],
        reward: 0.0,
        next_obs: vec![0.0; 3],
        done: false,
        wall_hit: false,
        achieved: [0.0; 2],
        achieved_next: [0.0; 2],
    });
    let cfg = Td3Config { batch_size: 4, ..Td3Config::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let r = agent.train_step(&buf, &InputEncoding::Observation, &cfg, &mut rng).unwrap();
    assert!(r.insufficient_data && r.critic_losses.is_none());
    assert_eq!(agent, before);
}

#[test]
fn checkpoint_roundtrip() {
    let mut agent = tiny_agent(12);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    agent.train_on_batch(&batch(8, 2), &Td3Config::default(), &mut rng).unwrap();
    agent.train_on_batch(&batch(8, 3), &Td3Config::default(), &mut rng).unwrap();
    let ck = Checkpoint::from_bytes(&agent.to_checkpoint().to_bytes()).unwrap();
    assert_eq!(Td3Agent::from_checkpoint(&ck, Some(3)).unwrap(), agent);
    assert!(matches!(
        Td3Agent::<f64>::from_checkpoint(&ck, Some(9)),
        Err(Td3Error::Checkpoint(ContainerError::ShapeMismatch { .. }))
    ));
}

#[test]
fn config_validation() {
    assert!(Td3Config::<f64>::default().validate().is_ok());
    assert!(Td3Config::<f64> { policy_delay: 0, ..Default::default() }.validate().is_err());
    assert!(Td3Config::<f64> { gamma: 1.5, ..Default::default() }.validate().is_err());
    assert!(Td3Config::<f64> { action_low: 1.0, ..Default::default() }.validate().is_err());
}
