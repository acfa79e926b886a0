use std::time::{Duration, Instant};

use rand_distr::{Distribution, Normal};

use super::targets::{actor_values, critic_input, ddpg_policy_grad, ddpg_targets, pr_ddpg_targets, r_ddpg_targets, DdpgTargetNets, ObsRecord};
use super::vmax::VmaxBuffer;
use super::{Accumulator, ActorPolicy, DeepConfig, DeepLog, DeepRecord, DeepVariant};
use crate::env::{ContinuousActions, VectorObservation};
use crate::eval::evaluate_policy;
use crate::nn::{mse_loss, soft_update, Adam, AdamConfig, Mlp, OutputActivation};
use crate::replay::ReplayBuffer;
use crate::sampling::Sampler;
use crate::{derive_seed, prng, Error, Prng, Result};

/// Deterministic actor, Q critic, their target copies and optimizers.
#[derive(Debug, Clone)]
pub struct ActorCritic {
    pub critic: Mlp,
    pub critic_target: Mlp,
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub critic_opt: Adam,
    pub actor_opt: Adam,
}

impl ActorCritic {
    fn new(cfg: &DeepConfig, obs_dim: usize, low: &[f64], high: &[f64], rng: &mut Prng) -> Result<Self> {
        let act_dim = low.len();
        let critic = Mlp::new(&cfg.layer_sizes(obs_dim + act_dim, 1), OutputActivation::Linear, rng)?;
        let bounds = OutputActivation::TanhScaled {
            low: low.to_vec(),
            high: high.to_vec(),
        };
        let actor = Mlp::new(&cfg.layer_sizes(obs_dim, act_dim), bounds, rng)?;
        Ok(Self {
            critic_opt: Adam::new(&critic, AdamConfig { lr: cfg.lr_q, ..AdamConfig::default() })?,
            actor_opt: Adam::new(&actor, AdamConfig { lr: cfg.lr_policy, ..AdamConfig::default() })?,
            critic_target: critic.clone(),
            actor_target: actor.clone(),
            critic,
            actor,
        })
    }

    /// Actor output plus clipped Gaussian noise.
    fn noisy_action(&self, obs: &[f64], sigma: &[f64], low: &[f64], high: &[f64], rng: &mut Prng) -> Result<Vec<f64>> {
        let mut a = self.actor.forward(obs)?;
        for (i, x) in a.iter_mut().enumerate() {
            if sigma[i] > 0.0 {
                let n = Normal::new(0.0, sigma[i]).map_err(|e| Error::Config(e.to_string()))?;
                *x += n.sample(rng);
            }
            *x = x.clamp(low[i], high[i]);
        }
        Ok(a)
    }

    /// One squared-error critic step on stacked `[obs, action]` rows.
    fn critic_step(&mut self, input: &[f64], targets: &[f64], max_grad_norm: Option<f64>) -> Result<f64> {
        let (q, cache) = self.critic.forward_batch(input, targets.len())?;
        let (loss, d_out) = mse_loss(&q, targets);
        let (mut grads, _) = self.critic.backward(&cache, &d_out)?;
        if let Some(m) = max_grad_norm {
            grads.clip_norm(m);
        }
        self.critic_opt.step(&mut self.critic, &grads)?;
        Ok(loss)
    }

    /// One actor step minimising the critic's value at `obs`.
    fn actor_step(&mut self, obs: &[f64], batch: usize, max_grad_norm: Option<f64>) -> Result<f64> {
        let (loss, mut grads) = ddpg_policy_grad(&self.actor, &self.critic, obs, batch)?;
        if let Some(m) = max_grad_norm {
            grads.clip_norm(m);
        }
        self.actor_opt.step(&mut self.actor, &grads)?;
        Ok(loss)
    }

    fn soft_update(&mut self, tau: f64) -> Result<()> {
        soft_update(&mut self.critic_target, &self.critic, tau)?;
        soft_update(&mut self.actor_target, &self.actor, tau)
    }
}

#[derive(Debug, Clone)]
pub struct DdpgAgents {
    pub robust: ActorCritic,
    /// Present for the pessimistic variant.
    pub pessimistic: Option<ActorCritic>,
}

#[derive(Debug, Clone)]
pub struct DdpgRun<S> {
    pub agents: DdpgAgents,
    pub log: DeepLog,
    /// Wall-clock training time excluding evaluation checkpoints.
    pub train_seconds: f64,
    /// Final replay contents, oldest first.
    pub records: Vec<DeepRecord<S, Vec<f64>>>,
}

fn at_step(step: usize, e: Error) -> Error {
    match e {
        Error::Diverged { msg, .. } => Error::Diverged { step, msg },
        other => other,
    }
}

/// Trains DDPG, R-DDPG or PR-DDPG according to `cfg.variant`.
pub fn train_ddpg<E>(env: &E, cfg: &DeepConfig) -> Result<DdpgRun<E::State>>
where
    E: ContinuousActions + VectorObservation + Clone,
{
    cfg.validate()?;
    let mut env = env.clone();
    let mut eval_env = env.clone();
    let (low, high) = (env.action_low(), env.action_high());
    let sigma: Vec<f64> = low
        .iter()
        .zip(&high)
        .map(|(l, h)| cfg.exploration_noise * (h - l) / 2.0)
        .collect();
    let obs_dim = env.obs_dim();
    let act_dim = low.len();
    let mut init_rng = prng(derive_seed(cfg.seed, 10));
    let pessimistic = cfg.variant == DeepVariant::Pessimistic;
    let mut agents = DdpgAgents {
        robust: ActorCritic::new(cfg, obs_dim, &low, &high, &mut init_rng)?,
        pessimistic: if pessimistic {
            Some(ActorCritic::new(cfg, obs_dim, &low, &high, &mut init_rng)?)
        } else {
            None
        },
    };
    let max_steps = env.max_episode_steps();
    let mut sampler = Sampler::new(&mut env, derive_seed(cfg.seed, 1), max_steps);
    let mut rng = prng(derive_seed(cfg.seed, 2));
    let mut buffer: ReplayBuffer<DeepRecord<E::State, Vec<f64>>> =
        ReplayBuffer::new(cfg.buffer_capacity, derive_seed(cfg.seed, 3))?;
    let mut vmax = VmaxBuffer::new(cfg.vmax_capacity);
    let eval_seed = derive_seed(cfg.seed, 4);
    let mut acc = Accumulator::default();
    let mut log = DeepLog {
        rows: Vec::new(),
        has_actor: true,
    };
    let started = Instant::now();
    let mut eval_time = Duration::ZERO;

    for step in 0..cfg.total_steps {
        let warming = step < cfg.warmup_steps;
        let obs = env.observe(sampler.state());
        let a = if warming {
            env.random_action(&mut rng)
        } else {
            agents.robust.noisy_action(&obs, &sigma, &low, &high, &mut rng)?
        };
        let (record, finished): (DeepRecord<E::State, Vec<f64>>, _) = match &agents.pessimistic {
            Some(p) => {
                let u = if warming || cfg.random_pessimist {
                    env.random_action(&mut rng)
                } else {
                    p.noisy_action(&obs, &sigma, &low, &high, &mut rng)?
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
            let r = &agents.robust;
            let v = actor_values(&r.critic_target, &r.actor_target, &env.observe(&record.s_next), 1)?;
            vmax.push(v[0]);
        }
        buffer.push(record);
        acc.returns.extend(finished);

        if step + 1 >= cfg.warmup_steps {
            let idx = buffer.sample_indices(cfg.batch_size);
            let batch: Vec<ObsRecord<Vec<f64>>> = idx.iter().map(|&i| buffer.get(i).observe(&env)).collect();
            let n = batch.len();
            let mut obs = Vec::with_capacity(n * obs_dim);
            let mut acts = Vec::with_capacity(n * act_dim);
            for r in &batch {
                obs.extend_from_slice(&r.obs);
                acts.extend_from_slice(&r.action);
            }
            let (y_pi, y_phi) = {
                let r = &agents.robust;
                match (&cfg.variant, &agents.pessimistic) {
                    (DeepVariant::Base, _) => (ddpg_targets(&batch, &r.critic_target, &r.actor_target, cfg.gamma)?, None),
                    (DeepVariant::RContamination, _) => (
                        r_ddpg_targets(&batch, &r.critic_target, &r.actor_target, cfg.gamma, cfg.r, &vmax)?,
                        None,
                    ),
                    (DeepVariant::Pessimistic, Some(p)) => {
                        let nets = DdpgTargetNets {
                            critic_pi: &r.critic_target,
                            actor_pi: &r.actor_target,
                            critic_phi: &p.critic_target,
                            actor_phi: &p.actor_target,
                        };
                        let (y_pi, y_phi) = pr_ddpg_targets(&batch, nets, cfg.gamma, cfg.r)?;
                        (y_pi, Some(y_phi))
                    }
                    (DeepVariant::Pessimistic, None) => unreachable!("pessimistic variant always builds both agents"),
                }
            };
            let input = critic_input(&obs, obs_dim, &acts, act_dim);
            let robust = &mut agents.robust;
            acc.add(0, robust.critic_step(&input, &y_pi, cfg.max_grad_norm).map_err(|e| at_step(step, e))?);
            acc.add(2, robust.actor_step(&obs, n, cfg.max_grad_norm).map_err(|e| at_step(step, e))?);
            robust.soft_update(cfg.tau)?;
            if let (Some(p), Some(y_phi), false) = (agents.pessimistic.as_mut(), y_phi, cfg.random_pessimist) {
                let mut us = Vec::with_capacity(n * act_dim);
                for r in &batch {
                    us.extend_from_slice(&r.pessimistic.as_ref().expect("double-agent record").u);
                }
                let input = critic_input(&obs, obs_dim, &us, act_dim);
                acc.add(1, p.critic_step(&input, &y_phi, cfg.max_grad_norm).map_err(|e| at_step(step, e))?);
                acc.add(3, p.actor_step(&obs, n, cfg.max_grad_norm).map_err(|e| at_step(step, e))?);
                p.soft_update(cfg.tau)?;
            }
        }

        let done = step + 1 == cfg.total_steps;
        if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0) || done {
            let t0 = Instant::now();
            let report = evaluate_policy(
                &mut eval_env,
                &ActorPolicy(&agents.robust.actor),
                cfg.eval_episodes.max(1),
                max_steps,
                eval_seed,
            )?;
            eval_time += t0.elapsed();
            log.rows.push(acc.take(step + 1, report.mean_return, report.std_return));
        }
    }

    Ok(DdpgRun {
        agents,
        log,
        train_seconds: (started.elapsed() - eval_time).as_secs_f64(),
        records: buffer.iter().cloned().collect(),
    })
}
