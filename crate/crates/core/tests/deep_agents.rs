use rand::Rng;
use rrl_core::deep::{
    ddpg_targets, dqn_targets, pr_ddpg_targets, pr_dqn_pessimistic_targets, pr_dqn_robust_targets, q_regression_step,
    r_ddpg_targets, r_dqn_targets, train_ddpg, train_dqn, verify_pessimistic_successors, DdpgTargetNets, DeepConfig,
    DeepVariant, ObsRecord, PessimisticObs, QAgent, VmaxBuffer,
};
use rrl_core::env::{cartpole_env, pendulum_env};
use rrl_core::nn::{Adam, AdamConfig, Mlp, OutputActivation};
use rrl_core::{prng, Prng};

fn obs(rng: &mut Prng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn batch<A>(rng: &mut Prng, n: usize, obs_dim: usize, mut action: impl FnMut(&mut Prng) -> A) -> Vec<ObsRecord<A>> {
    (0..n)
        .map(|_| {
            let cost = rng.gen_range(-1.0..1.0);
            ObsRecord {
                obs: obs(rng, obs_dim),
                action: action(rng),
                cost,
                next_obs: obs(rng, obs_dim),
                terminal: rng.gen_bool(0.1),
                pessimistic: Some(PessimisticObs {
                    u: action(rng),
                    cost_p: -cost,
                    x_next_obs: obs(rng, obs_dim),
                    x_terminal: rng.gen_bool(0.1),
                }),
            }
        })
        .collect()
}

fn bits(xs: &[f64]) -> Vec<u64> {
    xs.iter().map(|x| x.to_bits()).collect()
}

fn small_config(variant: DeepVariant, r: f64, base: DeepConfig) -> DeepConfig {
    DeepConfig {
        variant,
        r,
        total_steps: 600,
        warmup_steps: 100,
        batch_size: 16,
        hidden: vec![16],
        eval_every: 300,
        eval_episodes: 1,
        ..base
    }
}

#[test]
fn zero_level_targets_match_the_plain_algorithms() {
    let mut rng = prng(4);
    let q_net = Mlp::new(&[3, 8, 2], OutputActivation::Linear, &mut rng).unwrap();
    let critic = Mlp::new(&[4, 8, 1], OutputActivation::Linear, &mut rng).unwrap();
    let bounds = OutputActivation::TanhScaled { low: vec![-2.0], high: vec![2.0] };
    let actor = Mlp::new(&[3, 8, 1], bounds, &mut rng).unwrap();
    let mut vmax = VmaxBuffer::new(16);
    vmax.push(rng.gen_range(5.0..9.0));
    for _ in 0..20 {
        let discrete = batch(&mut rng, 32, 3, |r| r.gen_range(0..2));
        let plain = dqn_targets(&discrete, &q_net, 0.99).unwrap();
        assert_eq!(bits(&pr_dqn_robust_targets(&discrete, &q_net, 0.99, 0.0).unwrap()), bits(&plain));
        assert_eq!(bits(&r_dqn_targets(&discrete, &q_net, 0.99, 0.0, &vmax).unwrap()), bits(&plain));

        let continuous = batch(&mut rng, 32, 3, |r| vec![r.gen_range(-2.0..2.0)]);
        let plain = ddpg_targets(&continuous, &critic, &actor, 0.98).unwrap();
        let nets = DdpgTargetNets { critic_pi: &critic, actor_pi: &actor, critic_phi: &critic, actor_phi: &actor };
        assert_eq!(bits(&pr_ddpg_targets(&continuous, nets, 0.98, 0.0).unwrap().0), bits(&plain));
        assert_eq!(bits(&r_ddpg_targets(&continuous, &critic, &actor, 0.98, 0.0, &vmax).unwrap()), bits(&plain));
    }
}

#[test]
fn pessimistic_learning_ignores_the_robustness_level() {
    let mut rng = prng(8);
    let critic = Mlp::new(&[4, 8, 1], OutputActivation::Linear, &mut rng).unwrap();
    let bounds = OutputActivation::TanhScaled { low: vec![-2.0], high: vec![2.0] };
    let actor = Mlp::new(&[3, 8, 1], bounds, &mut rng).unwrap();
    let continuous = batch(&mut rng, 32, 3, |r| vec![r.gen_range(-2.0..2.0)]);
    let nets = DdpgTargetNets { critic_pi: &critic, actor_pi: &actor, critic_phi: &critic, actor_phi: &actor };
    let (y_lo, phi_lo) = pr_ddpg_targets(&continuous, nets, 0.98, 0.05).unwrap();
    let (y_hi, phi_hi) = pr_ddpg_targets(&continuous, nets, 0.98, 0.5).unwrap();
    assert_eq!(bits(&phi_lo), bits(&phi_hi));
    assert_ne!(bits(&y_lo), bits(&y_hi));

    // Identical sample streams, robust agents at different levels: the
    // pessimistic agents stay bit-identical while the robust ones diverge.
    let net = Mlp::new(&[3, 8, 2], OutputActivation::Linear, &mut rng).unwrap();
    let fresh = || QAgent {
        net: net.clone(),
        target: net.clone(),
        opt: Adam::new(&net, AdamConfig::default()).unwrap(),
    };
    let (mut pi_a, mut phi_a, mut pi_b, mut phi_b) = (fresh(), fresh(), fresh(), fresh());
    for _ in 0..50 {
        let b = batch(&mut rng, 16, 3, |r| r.gen_range(0..2));
        let acts: Vec<usize> = b.iter().map(|r| r.action).collect();
        let us: Vec<usize> = b.iter().map(|r| r.pessimistic.as_ref().unwrap().u).collect();
        for (pi, phi, r) in [(&mut pi_a, &mut phi_a, 0.05), (&mut pi_b, &mut phi_b, 0.5)] {
            let y = pr_dqn_robust_targets(&b, &pi.target, 0.99, r).unwrap();
            q_regression_step(pi, &b, &acts, &y, Some(10.0)).unwrap();
            let y_phi = pr_dqn_pessimistic_targets(&b, &phi.target, 0.99).unwrap();
            q_regression_step(phi, &b, &us, &y_phi, Some(10.0)).unwrap();
        }
    }
    assert_eq!(phi_a.net, phi_b.net);
    assert_ne!(pi_a.net, pi_b.net);
}

#[test]
fn double_agent_runs_store_replayable_successors() {
    let cfg = small_config(DeepVariant::Pessimistic, 0.1, DeepConfig::cartpole());
    let run = train_dqn(&cartpole_env(), &cfg).unwrap();
    let (ok, total) = verify_pessimistic_successors(&mut cartpole_env(), &run.records).unwrap();
    assert_eq!((ok, total), (600, 600));

    let cfg = small_config(DeepVariant::Pessimistic, 0.1, DeepConfig::pendulum());
    let run = train_ddpg(&pendulum_env(), &cfg).unwrap();
    let (ok, total) = verify_pessimistic_successors(&mut pendulum_env(), &run.records).unwrap();
    assert_eq!((ok, total), (600, 600));
    assert!(run.log.rows.iter().all(|r| r.loss_q_phi.is_some() && r.loss_actor_phi.is_some()));
}

#[test]
fn single_agent_runs_store_no_pessimistic_branch() {
    for variant in [DeepVariant::Base, DeepVariant::RContamination] {
        let cfg = small_config(variant, 0.1, DeepConfig::cartpole());
        let run = train_dqn(&cartpole_env(), &cfg).unwrap();
        assert!(run.agents.pessimistic.is_none());
        assert!(run.records.iter().all(|r| r.pessimistic.is_none()));
        assert!(run.log.rows.iter().all(|r| r.loss_q_phi.is_none()));
    }
}

#[test]
fn random_pessimist_never_trains_its_networks() {
    let cfg = DeepConfig {
        random_pessimist: true,
        ..small_config(DeepVariant::Pessimistic, 0.1, DeepConfig::pendulum())
    };
    let run = train_ddpg(&pendulum_env(), &cfg).unwrap();
    let p = run.agents.pessimistic.unwrap();
    assert_eq!(p.critic, p.critic_target);
    assert_eq!(p.actor, p.actor_target);
    assert_eq!(p.critic_opt.step_count(), 0);
    let (ok, total) = verify_pessimistic_successors(&mut pendulum_env(), &run.records).unwrap();
    assert_eq!(ok, total);
}

#[test]
fn deep_training_is_reproducible() {
    let cfg = small_config(DeepVariant::RContamination, 0.1, DeepConfig::cartpole());
    let a = train_dqn(&cartpole_env(), &cfg).unwrap();
    let b = train_dqn(&cartpole_env(), &cfg).unwrap();
    assert_eq!(a.agents.robust.net, b.agents.robust.net);
    assert_eq!(a.log, b.log);

    let cfg = small_config(DeepVariant::Pessimistic, 0.1, DeepConfig::pendulum());
    let a = train_ddpg(&pendulum_env(), &cfg).unwrap();
    let b = train_ddpg(&pendulum_env(), &cfg).unwrap();
    assert_eq!(a.agents.robust.actor, b.agents.robust.actor);
    assert_eq!(a.log, b.log);
}

#[test]
fn log_has_a_row_per_checkpoint() {
    let cfg = small_config(DeepVariant::Base, 0.0, DeepConfig::pendulum());
    let run = train_ddpg(&pendulum_env(), &cfg).unwrap();
    let steps: Vec<usize> = run.log.rows.iter().map(|r| r.step).collect();
    assert_eq!(steps, vec![300, 600]);
    let csv = run.log.to_csv();
    assert!(csv.starts_with("step,train_return,eval_return_mean,eval_return_std,loss_q_pi,loss_q_phi,loss_actor_pi,loss_actor_phi\n"));
}
