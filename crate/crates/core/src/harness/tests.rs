use std::f64::consts::PI;

use super::*;
use crate::net::seed_stream;
use crate::sim::{GoalWorld, Scenario};

fn smoke(dir: &Path) -> RunConfig {
    let mut c = RunConfig { output_dir: dir.to_path_buf(), her_enabled: false, ..RunConfig::default() };
    c.td3.hidden = vec![8];
    c.td3.batch_size = 8;
    c.td3.buffer_capacity = 100_000;
    c.schedule = Schedule {
        exploration_episodes: 3,
        steps_per_episode: Some(12),
        validation_every: 2,
        validation_episodes: 2,
        total_episodes: 4,
        stop_at_success: None,
        validation_seed: 99,
    };
    c
}

fn arena() -> Scenario<f64> {
    Scenario::open_arena(800.0, 800.0)
}

#[test]
fn exploration_fills_buffer_without_updates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke(dir.path());
    let out = train(&cfg, &arena()).unwrap();
    let records = read_metrics(&out.metrics_path).unwrap();
    let explore: Vec<_> = records.iter().filter(|r| r.phase == Phase::Explore).collect();
    assert_eq!(explore.len(), 3);
    let explored: u64 = explore.iter().map(|r| r.steps).sum();
    assert_eq!(out.exploration_transitions as u64, explored);
    assert!(explore.iter().all(|r| r.actor_loss.is_none() && r.critic_loss.is_none()));

    let trained: u64 = records.iter().filter(|r| r.phase == Phase::Train).map(|r| r.steps).sum();
    assert_eq!(out.buffer.len() as u64, explored + trained);
    // every training step found a full batch, and exploration added no updates
    assert_eq!(out.agent.critic_updates, trained);
    assert_eq!(out.agent.actor_updates, trained / 2);
}

#[test]
fn validation_schedule_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = smoke(dir.path());
    cfg.schedule.total_episodes = 30;
    cfg.schedule.validation_every = 10;
    cfg.schedule.steps_per_episode = Some(4);
    let out = train(&cfg, &arena()).unwrap();
    let records = read_metrics(&out.metrics_path).unwrap();
    let vals: Vec<_> = records.iter().filter(|r| r.phase == Phase::Validate).collect();
    assert_eq!(vals.len(), 3);
    assert_eq!(out.validations.len(), 3);
    assert_eq!(vals.iter().map(|r| r.episode).collect::<Vec<_>>(), vec![0, 1, 2]);
    for name in [LATEST_CHECKPOINT, BEST_CHECKPOINT, FINAL_CHECKPOINT] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    assert_eq!(std::fs::read_dir(dir.path().join(TRAJECTORY_DIR)).unwrap().count(), 3);
    let best = crate::nn::Checkpoint::<f64>::load(dir.path().join(BEST_CHECKPOINT)).unwrap();
    assert!(crate::td3::Td3Agent::from_checkpoint(&best, Some(16)).is_ok());
    let train_idx: Vec<usize> = records.iter().filter(|r| r.phase == Phase::Train).map(|r| r.episode).collect();
    assert_eq!(train_idx, (0..30).collect::<Vec<_>>());
}

#[test]
fn runs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut ca = smoke(a.path());
    ca.her_enabled = true;
    ca.bc.demo_episodes = 2;
    ca.bc.pretrain_epochs = 2;
    let mut cb = ca.clone();
    cb.output_dir = b.path().to_path_buf();
    let ra = read_metrics(train(&ca, &arena()).unwrap().metrics_path).unwrap();
    let rb = read_metrics(train(&cb, &arena()).unwrap().metrics_path).unwrap();
    assert_eq!(without_wall_clock(&ra), without_wall_clock(&rb));
    assert!(ra.iter().any(|r| r.phase == Phase::Demo));
}

#[test]
fn exploration_actions_are_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = smoke(dir.path());
    cfg.schedule.exploration_episodes = 40;
    cfg.schedule.steps_per_episode = Some(100);
    cfg.schedule.total_episodes = 1;
    cfg.schedule.validation_every = 1;
    let out = train(&cfg, &Scenario::open_arena(4000.0, 4000.0)).unwrap();
    let n = out.exploration_transitions;
    assert!(n >= 2000);
    for k in 0..2 {
        let xs: Vec<f64> = out.buffer.iter().take(n).map(|t| t.action[k]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        // sd of the mean is 0.577/sqrt(n)
        assert!(mean.abs() < 5.0 * 0.577 / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0 / 3.0).abs() < 0.03, "var {var}");
        let mut bins = [0usize; 10];
        for x in &xs {
            bins[(((x + 1.0) / 2.0 * 10.0) as usize).min(9)] += 1;
        }
        let expect = n as f64 / 10.0;
        let chi2: f64 = bins.iter().map(|&b| (b as f64 - expect).powi(2) / expect).sum();
        // 9 degrees of freedom, 0.999 quantile
        assert!(chi2 < 27.88, "chi2 {chi2}");
    }
}

#[test]
fn validation_is_bounded_deterministic_and_read_only() {
    let sc = arena();
    let agent = crate::td3::Td3Agent::new(16, 2, &[8], 3).unwrap();
    let before = agent.clone();
    let v1 = validate(&agent, &sc, 5, 7).unwrap();
    let v2 = validate(&agent, &sc, 5, 7).unwrap();
    assert_eq!(v1, v2);
    assert_eq!(agent, before);
    assert!((0.0..=1.0).contains(&v1.success_rate));
    assert!(v1.mean_return <= 10_000.0);
    assert_eq!(v1.returns.len(), 5);
}

#[test]
fn driving_straight_misses_an_off_axis_goal() {
    let sc = Scenario::open_arena(4000.0, 4000.0);
    let v = validate_with(&sc, 30, 5, |_, _, _| Ok([1.0, 0.0])).unwrap();
    assert_eq!(v.success_rate, 0.0);
    // oracle: every start ray passes the goal disc at a distance beyond its radius
    let mut world = GoalWorld::new(sc.clone(), 0).unwrap();
    for seed in seed_stream(5, 0).take(30) {
        world.reset(seed).unwrap();
        let s = world.state();
        let (dx, dy) = (sc.goal[0] - s.x, sc.goal[1] - s.y);
        let (c, si) = (s.heading.cos(), s.heading.sin());
        let along = dx * c + dy * si;
        let miss = if along > 0.0 { (dx * si - dy * c).abs() } else { dx.hypot(dy) };
        assert!(miss > sc.goal_radius, "start {seed} points at the goal");
        assert!(s.heading.abs() <= PI);
    }
}

#[test]
fn dogfight_shares_one_buffer() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = smoke(dir.path());
    cfg.schedule.exploration_episodes = 2;
    cfg.schedule.total_episodes = 3;
    cfg.schedule.steps_per_episode = Some(15);
    let mut sc = Scenario::open_arena(4000.0, 4000.0);
    sc.dogfight.r_min = 1.0;
    let out = train_dogfight(&cfg, &sc).unwrap();
    assert_eq!(out.buffer_len as u64, 2 * out.world_steps);
    assert_eq!(out.world_steps, 5 * 15);
    assert_eq!(out.returns[0].len(), out.returns[1].len());
    let records = read_metrics(&out.metrics_path).unwrap();
    let per_agent = |a| records.iter().filter(|r| r.agent == a).count();
    assert_eq!(per_agent(0), 5);
    assert_eq!(per_agent(1), 5);
    assert!(out.checkpoints.iter().all(|p| p.exists()));
    assert!(out.agents[0].critic_updates > 0);

    let mut small = cfg.clone();
    small.td3.buffer_capacity = 50;
    small.output_dir = dir.path().join("small");
    let out = train_dogfight(&small, &sc).unwrap();
    assert_eq!(out.buffer_len, 50usize.min(2 * out.world_steps as usize));
}

#[test]
fn unwritable_output_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let cfg = smoke(&blocker.join("sub"));
    assert!(matches!(train(&cfg, &arena()), Err(HarnessError::Io { .. })));
}

#[test]
fn remote_servers_drive_training() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = smoke(dir.path());
    let sc = cfg.apply_schedule(arena());
    let servers: Vec<_> = (0..2).map(|_| crate::net::serve(sc.clone(), "127.0.0.1:0").unwrap()).collect();
    cfg.remote.addresses = servers.iter().map(|s| s.local_addr().to_string()).collect();
    let out = train(&cfg, &arena()).unwrap();
    assert_eq!(out.training_episodes, 4);
    let records = read_metrics(&out.metrics_path).unwrap();
    assert_eq!(records.iter().filter(|r| r.phase == Phase::Explore).count(), 3);
}
