use std::f64::consts::PI;

use aircombat::nn::{Checkpoint, Mlp, OutputActivation};
use aircombat::replay::{her_relabel, Episode, GoalRelabeler, ReplayBuffer, Transition};
use aircombat::sim::{dogfight_reward, lidar_scan, GoalWorld, Rect, Scenario, VehicleState, LIDAR_RAYS};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scene(w: f64, h: f64, boxes: &[(f64, f64, f64, f64)]) -> Scenario<f64> {
    let mut sc = Scenario::open_arena(w, h);
    sc.obstacles = boxes
        .iter()
        .map(|&(fx, fy, fw, fh)| {
            let (bw, bh) = (fw * w / 4.0 + 5.0, fh * h / 4.0 + 5.0);
            let x = 1.0 + fx * (w - bw - 2.0);
            let y = 1.0 + fy * (h - bh - 2.0);
            Rect::new(x, y, x + bw, y + bh)
        })
        .filter(|r| !r.contains_closed(sc.goal))
        .collect();
    sc
}

fn march(sc: &Scenario<f64>, p: [f64; 2], angle: f64) -> f64 {
    let (c, s) = (angle.cos(), angle.sin());
    (0..)
        .map(|k| k as f64 * 0.25)
        .find(|&t| {
            let q = [p[0] + t * c, p[1] + t * s];
            t >= sc.lidar_range
                || q[0] < 0.0
                || q[1] < 0.0
                || q[0] > sc.width
                || q[1] > sc.height
                || sc.obstacles.iter().any(|o| o.contains_closed(q))
        })
        .unwrap()
        .min(sc.lidar_range)
}

fn transition(rng: &mut ChaCha8Rng, at: [f64; 2], next: [f64; 2]) -> Transition<f64> {
    Transition {
        obs: vec![rng.random(); 3],
        goal: [0.0, 0.0],
        action: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
        reward: rng.random_range(-1.0..1.0),
        next_obs: vec![rng.random(); 3],
        done: false,
        wall_hit: rng.random_bool(0.1),
        achieved: at,
        achieved_next: next,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vehicle_stays_within_limits(
        speed in -300.0f64..=300.0,
        heading in -PI..PI,
        throttle in -3.0f64..3.0,
        steer in -3.0f64..3.0,
    ) {
        let s = VehicleState { speed, ..VehicleState::at_rest(500.0, 500.0, heading) };
        let n = s.apply_action([throttle, steer], 0.1).unwrap();
        prop_assert!(n.speed.abs() <= 300.0);
        prop_assert!(n.accel.abs() <= 600.0);
        prop_assert!(n.heading > -PI && n.heading <= PI);
        if throttle.abs() <= 0.15 {
            // friction never pushes through zero
            prop_assert!(n.speed * speed >= 0.0);
            prop_assert!(n.speed.abs() <= speed.abs());
        }
    }

    #[test]
    fn rollouts_stay_in_free_space(
        seed in any::<u64>(),
        boxes in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 0..5),
    ) {
        let sc = scene(1200.0, 900.0, &boxes);
        let mut world = GoalWorld::new(sc.clone(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        world.reset(seed).unwrap();
        let mut prev = world.position();
        for _ in 0..200 {
            if world.is_done() {
                break;
            }
            let step = world.step([rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).unwrap();
            let p = step.achieved;
            prop_assert!(p[0] >= 0.0 && p[1] >= 0.0 && p[0] <= sc.width && p[1] <= sc.height);
            prop_assert!(sc.obstacles.iter().all(|o| !o.contains_strict(p)), "{p:?} inside an obstacle");
            prop_assert_eq!(step.observation.len(), 14);
            prop_assert!(step.observation.iter().all(|v| v.is_finite()));
            prop_assert!(step.observation[..LIDAR_RAYS].iter().all(|&r| (0.0..=1.0).contains(&r)));
            prop_assert!(step.reward.is_finite());
            prop_assert_eq!(world.position(), p);
            prev = p;
        }
        prop_assert_eq!(world.position(), prev);
    }

    #[test]
    fn lidar_matches_marching(
        px in 0.0f64..1.0, py in 0.0f64..1.0, heading in -PI..PI,
        boxes in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 0..7),
    ) {
        let sc = scene(2000.0, 1500.0, &boxes);
        let p = [px * sc.width, py * sc.height];
        prop_assume!(sc.obstacles.iter().all(|o| !o.contains_closed(p)));
        let state = VehicleState::at_rest(p[0], p[1], heading);
        let scan = lidar_scan(&state, &sc).unwrap();
        for (k, r) in scan.iter().enumerate() {
            let oracle = march(&sc, p, state.heading + k as f64 * PI / 4.0);
            prop_assert!((r - oracle).abs() <= 0.5, "ray {k}: {r} vs {oracle}");
        }
    }

    #[test]
    fn firing_geometry_is_antisymmetric(
        x in 0.0f64..4000.0, y in 0.0f64..4000.0, h in -PI..PI,
        range in 100.5f64..1999.5, off in -0.5f64..0.5, th in -PI..PI,
    ) {
        let d = Scenario::<f64>::open_arena(4000.0, 4000.0).dogfight;
        let a = VehicleState::at_rest(x, y, h);
        let b = VehicleState::at_rest(x + range * (h + off).cos(), y + range * (h + off).sin(), th);
        if dogfight_reward(&a, &b, &d).unwrap() == 1.0 {
            prop_assert_eq!(dogfight_reward(&b, &a, &d).unwrap(), -1.0);
        }
    }

    #[test]
    fn ring_keeps_the_newest(capacity in 1usize..20, pushes in 0usize..60, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut buf = ReplayBuffer::new(capacity);
        let items: Vec<_> = (0..pushes).map(|i| transition(&mut rng, [i as f64, 0.0], [i as f64 + 1.0, 0.0])).collect();
        for t in &items {
            buf.push(t.clone());
        }
        prop_assert_eq!(buf.len(), pushes.min(capacity));
        prop_assert_eq!(buf.cursor(), pushes % capacity);
        let mut kept: Vec<f64> = buf.iter().map(|t| t.achieved[0]).collect();
        kept.sort_by(f64::total_cmp);
        let newest: Vec<f64> = (pushes.saturating_sub(capacity)..pushes).map(|i| i as f64).collect();
        prop_assert_eq!(kept, newest);
    }

    #[test]
    fn relabeled_episodes_are_valid(seed in any::<u64>(), len in 1usize..80, radius in 1.0f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ep = Episode::new();
        let mut p = [500.0, 500.0];
        for _ in 0..len {
            let next = [p[0] + rng.random_range(-30.0..30.0), p[1] + rng.random_range(-30.0..30.0)];
            ep.push(transition(&mut rng, p, next));
            p = next;
        }
        let mut sc = Scenario::<f64>::open_arena(1000.0, 1000.0);
        sc.goal_radius = radius;
        let out = her_relabel(&ep, &GoalRelabeler::from_scenario(&sc)).unwrap();
        prop_assert!(out.validate().is_ok());
        prop_assert!(!out.is_empty() && out.len() <= ep.len());
        prop_assert!(out.transitions.last().unwrap().done);
        let mut buf = ReplayBuffer::new(1000);
        let stored = buf.store_episode(&ep, Some(&GoalRelabeler::from_scenario(&sc))).unwrap();
        prop_assert_eq!(stored, ep.len() + out.len());
    }

    #[test]
    fn polyak_interpolates(seed in any::<u64>(), rho in 0.0f64..=1.0) {
        let live = Mlp::<f64>::new(&[3, 5, 2], OutputActivation::Tanh, seed).unwrap();
        let old = Mlp::<f64>::new(&[3, 5, 2], OutputActivation::Tanh, seed ^ 1).unwrap();
        let mut target = old.clone();
        target.polyak_from(&live, rho).unwrap();
        for k in 0..2 {
            for ((t, o), l) in target.weights()[k].iter().zip(old.weights()[k].iter()).zip(live.weights()[k].iter()) {
                prop_assert!((t - (rho * o + (1.0 - rho) * l)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn checkpoint_bytes_roundtrip(seed in any::<u64>(), hidden in 1usize..12) {
        let net = Mlp::<f64>::new(&[4, hidden, 2], OutputActivation::Tanh, seed).unwrap();
        let ck = Checkpoint::new().with_network("actor", &net).with_counter("steps", seed);
        let back = Checkpoint::<f64>::from_bytes(&ck.to_bytes()).unwrap();
        prop_assert_eq!(back.network("actor", Some(&[4, hidden, 2])).unwrap(), &net);
        prop_assert_eq!(back.counter("steps").unwrap(), seed);
    }
}

#[test]
fn scenario_text_roundtrip() {
    for sc in [Scenario::<f64>::obstacle_course(), Scenario::open_arena(600.0, 600.0)] {
        let back = Scenario::<f64>::parse(&sc.to_toml()).unwrap();
        assert_eq!(back.to_toml(), sc.to_toml());
        assert_eq!(back.fingerprint(), sc.fingerprint());
    }
}
