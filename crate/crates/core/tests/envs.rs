use std::f64::consts::PI;

use proptest::prelude::*;
use robustrl::envs::{
    run_episode, wrap_angle, CartPole, Env, EnvKind, EnvState, Environment, Pendulum,
    PhysicsParams,
};
use robustrl::Error;

fn frictionless_pendulum() -> Pendulum {
    let mut p = Pendulum::default();
    p.constants.damping = 0.0;
    p
}

#[test]
fn undamped_pendulum_energy_does_not_drift() {
    let env = frictionless_pendulum();
    let mut s = EnvState {
        values: vec![2.0, 0.0],
        step_counter: 0,
    };
    let e0 = env.energy(&s);
    let window = 1000;
    let mut energies = Vec::new();
    for _ in 0..20 * window {
        s = env.step(&s, &[0.0]).unwrap().state;
        energies.push(env.energy(&s));
    }
    // semi-implicit Euler oscillates around a conserved shadow energy: the
    // error is O(dt) but does not grow
    let worst = energies.iter().fold(0.0f64, |m, e| m.max((e - e0).abs() / e0));
    assert!(worst < 0.05, "relative energy error {worst}");
    let mean = |w: &[f64]| w.iter().sum::<f64>() / w.len() as f64;
    let first = mean(&energies[..window]);
    let last = mean(&energies[energies.len() - window..]);
    assert!((last - first).abs() / e0 < 2e-3, "{first} -> {last}");
}

#[test]
fn damping_dissipates_energy() {
    let env = Pendulum::default();
    let mut s = EnvState {
        values: vec![2.0, 0.0],
        step_counter: 0,
    };
    let e0 = env.energy(&s);
    for _ in 0..2000 {
        s = env.step(&s, &[0.0]).unwrap().state;
    }
    assert!(env.energy(&s) < 0.5 * e0);
}

#[test]
fn pendulum_reset_moments() {
    let env = Pendulum::default();
    let n = 20_000;
    let (mut m_theta, mut m_omega, mut sq_theta) = (0.0, 0.0, 0.0);
    for seed in 0..n {
        let s = env.reset(seed);
        assert!(s.values[0] > -PI && s.values[0] <= PI);
        assert!(s.values[1].abs() <= 1.0);
        m_theta += s.values[0];
        m_omega += s.values[1];
        sq_theta += s.values[0] * s.values[0];
    }
    let n = n as f64;
    // uniform on (-pi, pi]: mean 0, variance pi^2 / 3
    assert!((m_theta / n).abs() < 0.05);
    assert!((m_omega / n).abs() < 0.02);
    assert!((sq_theta / n - PI * PI / 3.0).abs() < 0.1);
}

#[test]
fn cartpole_falls_without_control_and_balances_with_pd() {
    let env = Env::nominal(EnvKind::CartPole);
    let idle = run_episode(&env, 3, |_| Ok(vec![0.0])).unwrap();
    assert!(idle.length < 200);
    let pd = run_episode(&env, 3, |o| Ok(vec![10.0 * (o[2] * 10.0 + o[3] + 0.1 * o[0] + 0.2 * o[1])])).unwrap();
    assert_eq!(pd.length, 500);
    assert_eq!(pd.total_reward, 500.0);
    assert_eq!(pd.action_trace.len(), 500);
    assert_eq!(pd.state_trace.len(), 501);
    assert!(pd.tracking_trace.is_none());
}

#[test]
fn heavier_cartpole_responds_more_slowly() {
    let env = CartPole::default();
    let heavy = env.with_params(env.params.with_scales(2.0, 1.0)).unwrap();
    let s = EnvState {
        values: vec![0.0; 4],
        step_counter: 0,
    };
    let a = env.step(&s, &[10.0]).unwrap().state.values[1];
    let b = heavy.step(&s, &[10.0]).unwrap().state.values[1];
    assert!(b < a && b > 0.0);
}

#[test]
fn invalid_physics_is_rejected() {
    let env = Env::nominal(EnvKind::Pendulum);
    for bad in [
        env.params().with_scales(0.0, 1.0),
        env.params().with_scales(1.0, -1.0),
        PhysicsParams {
            timestep: 0.1,
            ..env.params()
        },
    ] {
        assert!(matches!(env.with_params(bad), Err(Error::InvalidInput(_))));
    }
}

#[test]
fn diverging_state_is_reported() {
    let env = Pendulum::default();
    let s = EnvState {
        values: vec![0.0, f64::INFINITY],
        step_counter: 0,
    };
    assert!(matches!(env.step(&s, &[0.0]), Err(Error::EnvironmentDiverged { .. })));
}

#[test]
fn pendulum_tracks_angle_to_upright() {
    let env = Env::nominal(EnvKind::Pendulum);
    let ep = run_episode(&env, 0, |_| Ok(vec![0.0])).unwrap();
    let trk = ep.tracking_trace.unwrap();
    assert_eq!(trk.len(), 200);
    assert!(trk.iter().all(|&e| (0.0..=PI).contains(&e)));
}

#[test]
fn env_round_trips_through_json() {
    let env = Env::nominal(EnvKind::CartPole)
        .with_params(PhysicsParams::nominal(9.8).with_scales(1.4, 0.6))
        .unwrap();
    let text = serde_json::to_string(&env).unwrap();
    assert_eq!(serde_json::from_str::<Env>(&text).unwrap(), env);
}

proptest! {
    #[test]
    fn wrap_lands_in_half_open_interval(theta in -100.0f64..100.0) {
        let w = wrap_angle(theta);
        prop_assert!(w > -PI && w <= PI);
        let k = ((theta - w) / (2.0 * PI)).round();
        prop_assert!((theta - w - 2.0 * PI * k).abs() < 1e-9);
    }

    #[test]
    fn episodes_are_deterministic(seed in any::<u64>(), gain in -5.0f64..5.0) {
        let env = Env::nominal(EnvKind::Pendulum);
        let a = run_episode(&env, seed, |o| Ok(vec![gain * o[1]])).unwrap();
        let b = run_episode(&env, seed, |o| Ok(vec![gain * o[1]])).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn actions_are_clipped_to_the_bound(u in -1e6f64..1e6, seed in 0u64..1000) {
        let env = Env::nominal(EnvKind::CartPole);
        let s = env.reset(seed);
        let clipped = env.step(&s, &[u.clamp(-10.0, 10.0)]).unwrap();
        let raw = env.step(&s, &[u]).unwrap();
        prop_assert_eq!(clipped, raw);
    }
}
