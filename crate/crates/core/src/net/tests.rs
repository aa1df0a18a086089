use std::io::BufReader;
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::Duration;

use super::wire::{read_frame, write_frame};
use super::*;

fn scenario() -> Scenario<f64> {
    Scenario::open_arena(1200.0, 1200.0)
}

fn raw(addr: std::net::SocketAddr) -> (BufReader<TcpStream>, TcpStream) {
    let s = TcpStream::connect(addr).unwrap();
    s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    (BufReader::new(s.try_clone().unwrap()), s)
}

fn hello(version: u32) -> WireMessage {
    WireMessage::Hello { protocol_version: version, scenario_hash: String::new() }
}

#[test]
fn version_mismatch_is_rejected_and_closed() {
    let server = serve(scenario(), "127.0.0.1:0").unwrap();
    let (mut r, mut w) = raw(server.local_addr());
    write_frame(&mut w, &hello(99)).unwrap();
    match read_frame(&mut r).unwrap() {
        WireMessage::Error { code, .. } => assert_eq!(code, ErrorCode::BadVersion),
        other => panic!("{other:?}"),
    }
    assert!(matches!(read_frame(&mut r), Err(WireError::Closed)));
}

#[test]
fn step_before_reset_is_bad_state() {
    let server = serve(scenario(), "127.0.0.1:0").unwrap();
    let (mut r, mut w) = raw(server.local_addr());
    write_frame(&mut w, &hello(PROTOCOL_VERSION)).unwrap();
    assert!(matches!(read_frame(&mut r).unwrap(), WireMessage::HelloAck { protocol_version: 1, .. }));
    write_frame(&mut w, &WireMessage::Step { action: [0.5, 0.0] }).unwrap();
    assert!(matches!(read_frame(&mut r).unwrap(), WireMessage::Error { code: ErrorCode::BadState, .. }));
    // the session survives and can still reset
    write_frame(&mut w, &WireMessage::Reset { seed: 1 }).unwrap();
    assert!(matches!(read_frame(&mut r).unwrap(), WireMessage::ResetAck { .. }));
}

#[test]
fn garbage_frame_is_bad_payload() {
    let server = serve(scenario(), "127.0.0.1:0").unwrap();
    let (mut r, mut w) = raw(server.local_addr());
    use std::io::Write;
    w.write_all(&4u32.to_be_bytes()).unwrap();
    w.write_all(b"{]}x").unwrap();
    assert!(matches!(read_frame(&mut r).unwrap(), WireMessage::Error { code: ErrorCode::BadPayload, .. }));
    assert!(matches!(read_frame(&mut r), Err(WireError::Closed)));
}

#[test]
fn scenario_hash_is_checked() {
    let sc = scenario();
    let server = serve(sc.clone(), "127.0.0.1:0").unwrap();
    let addr = server.local_addr().to_string();
    let ok = RemoteEnv::connect(addr.as_str(), &sc.fingerprint(), DEFAULT_DEADLINE).unwrap();
    assert_eq!(ok.scenario_hash(), sc.fingerprint());
    assert_eq!(ok.state(), SessionState::Ready);
    let err = RemoteEnv::connect(addr.as_str(), "0000000000000000", DEFAULT_DEADLINE).unwrap_err();
    assert!(matches!(err, RemoteError::Server { code: ErrorCode::BadPayload, .. }), "{err}");
}

#[test]
fn reset_is_deterministic_across_connections() {
    let server = serve(scenario(), "127.0.0.1:0").unwrap();
    let addr = server.local_addr().to_string();
    let a = RemoteEnv::connect(addr.as_str(), "", DEFAULT_DEADLINE).unwrap().reset(7).unwrap();
    let b = RemoteEnv::connect(addr.as_str(), "", DEFAULT_DEADLINE).unwrap().reset(7).unwrap();
    assert_eq!(a, b);
    let mut local = GoalWorld::new(scenario(), 0).unwrap();
    assert_eq!(local.reset(7).unwrap(), a.0);
    assert_eq!(local.position(), a.1);
}

#[test]
fn remote_steps_match_in_process_bit_for_bit() {
    let sc = scenario();
    let server = serve(sc.clone(), "127.0.0.1:0").unwrap();
    let mut remote = RemoteEnv::connect(server.local_addr().to_string().as_str(), "", DEFAULT_DEADLINE).unwrap();
    let mut local = GoalWorld::new(sc, 0).unwrap();
    assert_eq!(remote.reset(3).unwrap().0, local.reset(3).unwrap());
    for k in 0..120 {
        let t = k as f64;
        let action = [(t * 0.37).sin(), (t * 0.11).cos() * 0.7];
        let r = remote.step(action).unwrap();
        let l = local.step(action).unwrap();
        assert_eq!(r.observation.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), l.observation.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(r, l);
        if l.done {
            break;
        }
    }
}

#[test]
fn stepping_a_finished_episode_is_a_server_error() {
    let mut sc = scenario();
    sc.max_steps = 3;
    let server = serve(sc, "127.0.0.1:0").unwrap();
    let mut env = RemoteEnv::connect(server.local_addr().to_string().as_str(), "", DEFAULT_DEADLINE).unwrap();
    env.reset(0).unwrap();
    for _ in 0..3 {
        env.step([0.0, 0.0]).unwrap();
    }
    assert_eq!(env.state(), SessionState::Done);
    let err = env.step([0.0, 0.0]).unwrap_err();
    assert!(matches!(err, RemoteError::Server { code: ErrorCode::BadState, .. }), "{err}");
    env.reset(1).unwrap();
    assert_eq!(env.state(), SessionState::MidEpisode);
    env.close();
}

#[test]
fn silent_server_times_out_and_fails_the_session() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let mute = thread::spawn(move || {
        let (s, _) = listener.accept().unwrap();
        let mut r = BufReader::new(s.try_clone().unwrap());
        let mut w = s;
        read_frame(&mut r).unwrap();
        write_frame(&mut w, &WireMessage::HelloAck { protocol_version: 1, scenario_hash: "x".into() }).unwrap();
        // swallow the RESET and never answer
        let _ = read_frame(&mut r);
        thread::sleep(Duration::from_millis(600));
    });
    let mut env = RemoteEnv::connect(addr.to_string().as_str(), "", Duration::from_millis(200)).unwrap();
    let err = env.reset(0).unwrap_err();
    assert!(matches!(err, RemoteError::Timeout { .. }), "{err}");
    assert_eq!(env.state(), SessionState::Failed);
    assert!(matches!(env.reset(0), Err(RemoteError::Failed { .. })));
    mute.join().unwrap();
}

fn wander(i: usize, obs: &[f64], _pos: [f64; 2], _goal: [f64; 2]) -> [f64; 2] {
    [0.6 - 0.1 * i as f64, obs[0] - obs[4]]
}

#[test]
fn single_env_collection_equals_local_rollout() {
    let mut sc = scenario();
    sc.max_steps = 40;
    let server = serve(sc.clone(), "127.0.0.1:0").unwrap();
    let remote = RemoteEnv::connect(server.local_addr().to_string().as_str(), "", DEFAULT_DEADLINE).unwrap();
    let mut venv = VectorEnv::new(vec![remote], vec![sc.goal], 21);
    let got = venv.collect(wander, 150).unwrap();

    let mut world = GoalWorld::new(sc.clone(), 0).unwrap();
    let mut seeds = seed_stream(21, 0);
    let mut expected = Vec::new();
    let mut obs = world.reset(seeds.next().unwrap()).unwrap();
    for _ in 0..150 {
        let pos = world.position();
        let action = wander(0, &obs, pos, sc.goal);
        let step = world.step(action).unwrap();
        expected.push(Collected {
            transition: Transition::from_step(obs.clone(), sc.goal, action, pos, &step),
            events: step.events,
            episode_end: step.done,
        });
        obs = if step.done { world.reset(seeds.next().unwrap()).unwrap() } else { step.observation };
    }
    assert_eq!(got, vec![expected]);
    assert!(got[0].iter().filter(|c| c.episode_end).count() >= 3);
}

#[test]
fn four_envs_hundred_ticks() {
    let servers: Vec<_> = (0..4).map(|_| serve(scenario(), "127.0.0.1:0").unwrap()).collect();
    let envs: Vec<_> = servers
        .iter()
        .map(|s| RemoteEnv::connect(s.local_addr().to_string().as_str(), "", DEFAULT_DEADLINE).unwrap())
        .collect();
    let mut venv = VectorEnv::new(envs, vec![scenario().goal; 4], 5);
    let streams = venv.collect(|_, _, _, _| [0.0, 0.0], 100).unwrap();
    assert_eq!(streams.iter().map(Vec::len).collect::<Vec<_>>(), vec![100; 4]);
    assert!(streams.iter().flatten().all(|c| !c.episode_end));
}

#[test]
fn killed_server_aborts_with_partial_report() {
    let mut servers: Vec<_> = (0..3).map(|_| Some(serve(scenario(), "127.0.0.1:0").unwrap())).collect();
    let envs: Vec<_> = servers
        .iter()
        .map(|s| {
            let addr = s.as_ref().unwrap().local_addr().to_string();
            RemoteEnv::connect(addr.as_str(), "", Duration::from_secs(2)).unwrap()
        })
        .collect();
    let mut venv = VectorEnv::new(envs, vec![scenario().goal; 3], 9);
    let first = venv.collect(|_, _, _, _| [0.3, 0.0], 10).unwrap();
    assert_eq!(first[2].len(), 10);
    servers[1].take().unwrap().shutdown();
    let err = venv.collect(|_, _, _, _| [0.3, 0.0], 10).unwrap_err();
    assert_eq!(err.env, 1);
    assert_eq!(err.completed_ticks, 0);
    assert_eq!(err.partial.len(), 3);
    assert!(err.partial.iter().all(Vec::is_empty));
    assert!(matches!(err.source, EnvError::Remote(RemoteError::Connection { .. })), "{}", err.source);
}

#[test]
fn local_env_matches_world() {
    let mut env = LocalEnv::new(scenario()).unwrap();
    let (obs, pos) = env.reset(4).unwrap();
    let mut world = GoalWorld::new(scenario(), 0).unwrap();
    assert_eq!(world.reset(4).unwrap(), obs);
    assert_eq!(world.position(), pos);
    assert_eq!(env.step([1.0, 0.2]).unwrap(), world.step([1.0, 0.2]).unwrap());
    assert!(env.finish_step().is_err());
}
