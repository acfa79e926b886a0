use std::time::{Duration, Instant};

use rand::Rng;

use super::targets::{dqn_targets, min_q_batch, pr_dqn_pessimistic_targets, pr_dqn_robust_targets, r_dqn_targets, ObsRecord};
use super::vmax::VmaxBuffer;
use super::{Accumulator, DeepConfig, DeepLog, DeepRecord, DeepVariant, GreedyQ};
use crate::env::{DiscreteActions, VectorObservation};
use crate::eval::evaluate_policy;
use crate::mdp::argmin;
use crate::nn::{soft_update, Adam, AdamConfig, Mlp, OutputActivation};
use crate::replay::ReplayBuffer;
use crate::sampling::Sampler;
use crate::{derive_seed, prng, Error, Prng, Result};

/// Online Q-network, its target copy and its optimizer.
#[derive(Debug, Clone)]
pub struct QAgent {
    pub net: Mlp,
    pub target: Mlp,
    pub opt: Adam,
}

impl QAgent {
    fn new(sizes: &[usize], lr: f64, rng: &mut Prng) -> Result<Self> {
        let net = Mlp::new(sizes, OutputActivation::Linear, rng)?;
        let opt = Adam::new(&net, AdamConfig { lr, ..AdamConfig::default() })?;
        Ok(Self {
            target: net.clone(),
            net,
            opt,
        })
    }

    fn greedy(&self, obs: &[f64]) -> Result<usize> {
        Ok(argmin(&self.net.forward(obs)?))
    }
}

#[derive(Debug, Clone)]
pub struct DqnAgents {
    pub robust: QAgent,
    /// Present for the pessimistic variant.
    pub pessimistic: Option<QAgent>,
}

#[derive(Debug, Clone)]
pub struct DqnRun<S> {
    pub agents: DqnAgents,
    pub log: DeepLog,
    /// Wall-clock training time excluding evaluation checkpoints.
    pub train_seconds: f64,
    /// Final replay contents, oldest first.
    pub records: Vec<DeepRecord<S, usize>>,
}

/// One squared-error step of `Q(obs_b, action_b)` toward `targets_b`.
/// Returns the pre-step loss.
pub fn q_regression_step(
    agent: &mut QAgent,
    batch: &[ObsRecord<usize>],
    actions: &[usize],
    targets: &[f64],
    max_grad_norm: Option<f64>,
) -> Result<f64> {
    let n = batch.len();
    let na = agent.net.output_dim();
    let mut obs = Vec::with_capacity(n * agent.net.input_dim());
    for r in batch {
        obs.extend_from_slice(&r.obs);
    }
    let (q, cache) = agent.net.forward_batch(&obs, n)?;
    let mut d_out = vec![0.0; n * na];
    let mut loss = 0.0;
    for b in 0..n {
        let i = b * na + actions[b];
        let diff = q[i] - targets[b];
        loss += diff * diff;
        d_out[i] = 2.0 * diff / n as f64;
    }
    let (mut grads, _) = agent.net.backward(&cache, &d_out)?;
    if let Some(m) = max_grad_norm {
        grads.clip_norm(m);
    }
    agent.opt.step(&mut agent.net, &grads)?;
    Ok(loss / n as f64)
}

fn epsilon_greedy(agent: &QAgent, obs: &[f64], eps: f64, n_actions: usize, rng: &mut Prng) -> Result<usize> {
    if rng.gen::<f64>() < eps {
        Ok(rng.gen_range(0..n_actions))
    } else {
        agent.greedy(obs)
    }
}

fn at_step(step: usize, e: Error) -> Error {
    match e {
        Error::Diverged { msg, .. } => Error::Diverged { step, msg },
        other => other,
    }
}

/// Trains DQN, R-DQN or PR-DQN according to `cfg.variant`.
pub fn train_dqn<E>(env: &E, cfg: &DeepConfig) -> Result<DqnRun<E::State>>
where
    E: DiscreteActions + VectorObservation + Clone,
{
    cfg.validate()?;
    let mut env = env.clone();
    let mut eval_env = env.clone();
    let n_actions = env.n_actions();
    let sizes = cfg.layer_sizes(env.obs_dim(), n_actions);
    let mut init_rng = prng(derive_seed(cfg.seed, 10));
    let pessimistic = cfg.variant == DeepVariant::Pessimistic;
    let mut agents = DqnAgents {
        robust: QAgent::new(&sizes, cfg.lr_q, &mut init_rng)?,
        pessimistic: if pessimistic {
            Some(QAgent::new(&sizes, cfg.lr_q, &mut init_rng)?)
        } else {
            None
        },
    };
    let max_steps = env.max_episode_steps();
    let mut sampler = Sampler::new(&mut env, derive_seed(cfg.seed, 1), max_steps);
    let mut rng = prng(derive_seed(cfg.seed, 2));
    let mut buffer: ReplayBuffer<DeepRecord<E::State, usize>> =
        ReplayBuffer::new(cfg.buffer_capacity, derive_seed(cfg.seed, 3))?;
    let mut vmax = VmaxBuffer::new(cfg.vmax_capacity);
    let eval_seed = derive_seed(cfg.seed, 4);
    let mut acc = Accumulator::default();
    let mut log = DeepLog::default();
    let started = Instant::now();
    let mut eval_time = Duration::ZERO;

    for step in 0..cfg.total_steps {
        let eps = cfg.epsilon.at(step as f64 / cfg.total_steps as f64);
        let obs = env.observe(sampler.state());
        let a = epsilon_greedy(&agents.robust, &obs, eps, n_actions, &mut rng)?;
        let (record, finished): (DeepRecord<E::State, usize>, _) = match &agents.pessimistic {
            Some(p) => {
                let u = if cfg.random_pessimist {
                    rng.gen_range(0..n_actions)
                } else {
                    epsilon_greedy(p, &obs, eps, n_actions, &mut rng)?
                };
                let (t, f) = sampler.double_step(&mut env, a, u)?;
                (t.into(), f)
            }
            None => {
                let (t, f) = sampler.step(&mut env, a)?;
                (t.into(), f)
            }
        };
        if cfg.variant == DeepVariant::RContamination && !record.terminal {
            let v = min_q_batch(&agents.robust.target, &env.observe(&record.s_next), 1)?;
            vmax.push(v[0]);
        }
        buffer.push(record);
        acc.returns.extend(finished);

        if step + 1 >= cfg.warmup_steps {
            let idx = buffer.sample_indices(cfg.batch_size);
            let batch: Vec<ObsRecord<usize>> = idx.iter().map(|&i| buffer.get(i).observe(&env)).collect();
            let actions: Vec<usize> = batch.iter().map(|r| r.action).collect();
            let y = match cfg.variant {
                DeepVariant::Base => dqn_targets(&batch, &agents.robust.target, cfg.gamma)?,
                DeepVariant::RContamination => r_dqn_targets(&batch, &agents.robust.target, cfg.gamma, cfg.r, &vmax)?,
                DeepVariant::Pessimistic => pr_dqn_robust_targets(&batch, &agents.robust.target, cfg.gamma, cfg.r)?,
            };
            let loss = q_regression_step(&mut agents.robust, &batch, &actions, &y, cfg.max_grad_norm).map_err(|e| at_step(step, e))?;
            acc.add(0, loss);
            if let (Some(p), false) = (agents.pessimistic.as_mut(), cfg.random_pessimist) {
                let y_phi = pr_dqn_pessimistic_targets(&batch, &p.target, cfg.gamma)?;
                let us: Vec<usize> = batch
                    .iter()
                    .map(|r| r.pessimistic.as_ref().map_or(0, |b| b.u))
                    .collect();
                let loss = q_regression_step(p, &batch, &us, &y_phi, cfg.max_grad_norm).map_err(|e| at_step(step, e))?;
                acc.add(1, loss);
                soft_update(&mut p.target, &p.net, cfg.tau)?;
            }
            soft_update(&mut agents.robust.target, &agents.robust.net, cfg.tau)?;
        }

        let done = step + 1 == cfg.total_steps;
        if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0) || done {
            let t0 = Instant::now();
            let report = evaluate_policy(
                &mut eval_env,
                &GreedyQ(&agents.robust.net),
                cfg.eval_episodes.max(1),
                max_steps,
                eval_seed,
            )?;
            eval_time += t0.elapsed();
            log.rows.push(acc.take(step + 1, report.mean_return, report.std_return));
        }
    }

    Ok(DqnRun {
        agents,
        log,
        train_seconds: (started.elapsed() - eval_time).as_secs_f64(),
        records: buffer.iter().cloned().collect(),
    })
}
