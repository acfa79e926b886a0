//! Bootstrap targets and the deterministic policy gradient, batched.
//!
//! All targets bootstrap with 0 at terminal successors and route the robust
//! blend through [`robust_target`], so that `R = 0` reproduces the plain
//! targets bit for bit.

use super::vmax::VmaxBuffer;
use crate::nn::{Grads, Mlp};
use crate::robust::robust_target;
use crate::{Error, Result};

/// Pessimistic branch of a replay record, in observation space.
#[derive(Debug, Clone, PartialEq)]
pub struct PessimisticObs<A> {
    pub u: A,
    pub cost_p: f64,
    pub x_next_obs: Vec<f64>,
    pub x_terminal: bool,
}

/// Replay record with states replaced by network observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsRecord<A> {
    pub obs: Vec<f64>,
    pub action: A,
    pub cost: f64,
    pub next_obs: Vec<f64>,
    pub terminal: bool,
    pub pessimistic: Option<PessimisticObs<A>>,
}

impl<A> ObsRecord<A> {
    fn pess(&self) -> Result<&PessimisticObs<A>> {
        self.pessimistic
            .as_ref()
            .ok_or_else(|| Error::Contract("record lacks the pessimistic branch".into()))
    }
}

fn stack<'a>(rows: impl Iterator<Item = &'a [f64]>) -> (Vec<f64>, usize) {
    let mut out = Vec::new();
    let mut n = 0;
    for r in rows {
        out.extend_from_slice(r);
        n += 1;
    }
    (out, n)
}

/// `min_a Q(obs, a)` for every row of a stacked observation matrix.
pub fn min_q_batch(net: &Mlp, obs: &[f64], batch: usize) -> Result<Vec<f64>> {
    let (q, _) = net.forward_batch(obs, batch)?;
    Ok(q.chunks_exact(net.output_dim())
        .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
        .collect())
}

#[inline]
fn live(v: f64, terminal: bool) -> f64 {
    if terminal {
        0.0
    } else {
        v
    }
}

fn next_values_discrete<A>(batch: &[ObsRecord<A>], target: &Mlp) -> Result<Vec<f64>> {
    let (obs, n) = stack(batch.iter().map(|r| r.next_obs.as_slice()));
    min_q_batch(target, &obs, n)
}

/// `c + gamma min_a' Qbar(s', a')`.
pub fn dqn_targets<A>(batch: &[ObsRecord<A>], target: &Mlp, gamma: f64) -> Result<Vec<f64>> {
    let v = next_values_discrete(batch, target)?;
    Ok(batch
        .iter()
        .zip(v)
        .map(|(r, v)| r.cost + gamma * live(v, r.terminal))
        .collect())
}

/// `c + gamma((1-R) Vbar(s') + R Vbar(x'))` with `Vbar = min_a Qbar`.
pub fn pr_dqn_robust_targets<A>(batch: &[ObsRecord<A>], target: &Mlp, gamma: f64, r: f64) -> Result<Vec<f64>> {
    let v_s = next_values_discrete(batch, target)?;
    let pess = batch.iter().map(|b| b.pess()).collect::<Result<Vec<_>>>()?;
    let (x_obs, n) = stack(pess.iter().map(|p| p.x_next_obs.as_slice()));
    let v_x = min_q_batch(target, &x_obs, n)?;
    Ok(batch
        .iter()
        .zip(pess)
        .enumerate()
        .map(|(i, (rec, p))| robust_target(rec.cost, gamma, r, live(v_s[i], rec.terminal), live(v_x[i], p.x_terminal)))
        .collect())
}

/// `c^p + gamma min_u' Qbar^phi(x', u')`.
pub fn pr_dqn_pessimistic_targets<A>(batch: &[ObsRecord<A>], target_phi: &Mlp, gamma: f64) -> Result<Vec<f64>> {
    let pess = batch.iter().map(|b| b.pess()).collect::<Result<Vec<_>>>()?;
    let (x_obs, n) = stack(pess.iter().map(|p| p.x_next_obs.as_slice()));
    let v = min_q_batch(target_phi, &x_obs, n)?;
    Ok(pess
        .iter()
        .zip(v)
        .map(|(p, v)| p.cost_p + gamma * live(v, p.x_terminal))
        .collect())
}

/// `c + gamma((1-R) Vbar(s') + R max(vmax))`; an empty value buffer falls
/// back to `Vbar(s')` (unbootstrapped at terminals).
pub fn r_dqn_targets<A>(batch: &[ObsRecord<A>], target: &Mlp, gamma: f64, r: f64, vmax: &VmaxBuffer) -> Result<Vec<f64>> {
    let v = next_values_discrete(batch, target)?;
    Ok(batch
        .iter()
        .zip(v)
        .map(|(rec, v)| {
            let expected = live(v, rec.terminal);
            robust_target(rec.cost, gamma, r, expected, vmax.max().unwrap_or(expected))
        })
        .collect())
}

/// Row-wise concatenation `[obs, action]` used as critic input.
pub fn critic_input(obs: &[f64], obs_dim: usize, actions: &[f64], act_dim: usize) -> Vec<f64> {
    let batch = obs.len() / obs_dim;
    let mut out = Vec::with_capacity(batch * (obs_dim + act_dim));
    for b in 0..batch {
        out.extend_from_slice(&obs[b * obs_dim..(b + 1) * obs_dim]);
        out.extend_from_slice(&actions[b * act_dim..(b + 1) * act_dim]);
    }
    out
}

/// `Qbar(obs, actor(obs))` for every row.
pub fn actor_values(critic: &Mlp, actor: &Mlp, obs: &[f64], batch: usize) -> Result<Vec<f64>> {
    let (acts, _) = actor.forward_batch(obs, batch)?;
    let input = critic_input(obs, actor.input_dim(), &acts, actor.output_dim());
    Ok(critic.forward_batch(&input, batch)?.0)
}

/// `c + gamma Qbar(s', pibar(s'))`.
pub fn ddpg_targets(batch: &[ObsRecord<Vec<f64>>], critic_t: &Mlp, actor_t: &Mlp, gamma: f64) -> Result<Vec<f64>> {
    let (obs, n) = stack(batch.iter().map(|r| r.next_obs.as_slice()));
    let v = actor_values(critic_t, actor_t, &obs, n)?;
    Ok(batch
        .iter()
        .zip(v)
        .map(|(r, v)| r.cost + gamma * live(v, r.terminal))
        .collect())
}

/// Target networks of a DDPG agent pair: `(critic, actor)` for each agent.
#[derive(Debug, Clone, Copy)]
pub struct DdpgTargetNets<'a> {
    pub critic_pi: &'a Mlp,
    pub actor_pi: &'a Mlp,
    pub critic_phi: &'a Mlp,
    pub actor_phi: &'a Mlp,
}

/// Robust and pessimistic critic targets:
/// `y_pi = c + gamma((1-R) Qbar^pi(s', pibar(s')) + R Qbar^pi(x', pibar(x')))`,
/// `y_phi = c^p + gamma Qbar^phi(x', phibar(x'))`.
pub fn pr_ddpg_targets(
    batch: &[ObsRecord<Vec<f64>>],
    nets: DdpgTargetNets<'_>,
    gamma: f64,
    r: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let pess = batch.iter().map(|b| b.pess()).collect::<Result<Vec<_>>>()?;
    let (s_obs, n) = stack(batch.iter().map(|r| r.next_obs.as_slice()));
    let (x_obs, _) = stack(pess.iter().map(|p| p.x_next_obs.as_slice()));
    let v_s = actor_values(nets.critic_pi, nets.actor_pi, &s_obs, n)?;
    let v_x = actor_values(nets.critic_pi, nets.actor_pi, &x_obs, n)?;
    let v_phi = actor_values(nets.critic_phi, nets.actor_phi, &x_obs, n)?;
    let mut y_pi = Vec::with_capacity(n);
    let mut y_phi = Vec::with_capacity(n);
    for (i, (rec, p)) in batch.iter().zip(&pess).enumerate() {
        y_pi.push(robust_target(rec.cost, gamma, r, live(v_s[i], rec.terminal), live(v_x[i], p.x_terminal)));
        y_phi.push(p.cost_p + gamma * live(v_phi[i], p.x_terminal));
    }
    Ok((y_pi, y_phi))
}

/// R-contamination DDPG target with the value-buffer maximum.
pub fn r_ddpg_targets(
    batch: &[ObsRecord<Vec<f64>>],
    critic_t: &Mlp,
    actor_t: &Mlp,
    gamma: f64,
    r: f64,
    vmax: &VmaxBuffer,
) -> Result<Vec<f64>> {
    let (obs, n) = stack(batch.iter().map(|r| r.next_obs.as_slice()));
    let v = actor_values(critic_t, actor_t, &obs, n)?;
    Ok(batch
        .iter()
        .zip(v)
        .map(|(rec, v)| {
            let expected = live(v, rec.terminal);
            robust_target(rec.cost, gamma, r, expected, vmax.max().unwrap_or(expected))
        })
        .collect())
}

/// Gradient of `mean_b Q(x_b, actor(x_b))` w.r.t. the actor parameters, with
/// the critic held fixed. Returns the loss and the actor gradients.
pub fn ddpg_policy_grad(actor: &Mlp, critic: &Mlp, states: &[f64], batch: usize) -> Result<(f64, Grads)> {
    let (obs_dim, act_dim) = (actor.input_dim(), actor.output_dim());
    if critic.input_dim() != obs_dim + act_dim || critic.output_dim() != 1 {
        return Err(Error::Shape("critic must take [observation, action] and output one value".into()));
    }
    let (acts, actor_cache) = actor.forward_batch(states, batch)?;
    let input = critic_input(states, obs_dim, &acts, act_dim);
    let (q, critic_cache) = critic.forward_batch(&input, batch)?;
    let loss = q.iter().sum::<f64>() / batch as f64;
    let d_q = vec![1.0 / batch as f64; batch];
    let (_, d_input) = critic.backward(&critic_cache, &d_q)?;
    let mut d_act = Vec::with_capacity(batch * act_dim);
    for row in d_input.chunks_exact(obs_dim + act_dim) {
        d_act.extend_from_slice(&row[obs_dim..]);
    }
    let (grads, _) = actor.backward(&actor_cache, &d_act)?;
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::OutputActivation;

    fn record(cost: f64, terminal: bool) -> ObsRecord<usize> {
        ObsRecord {
            obs: vec![0.0],
            action: 0,
            cost,
            next_obs: vec![1.0],
            terminal,
            pessimistic: Some(PessimisticObs {
                u: 1,
                cost_p: -cost,
                x_next_obs: vec![2.0],
                x_terminal: false,
            }),
        }
    }

    /// Q(o, .) = [w0 o + b0, w1 o + b1] with w = [1, -1], b = [0.5, 0.0].
    fn two_action_net() -> Mlp {
        let mut n = Mlp::zeros(&[1, 2], OutputActivation::Linear).unwrap();
        n.weights_mut(0).copy_from_slice(&[1.0, -1.0]);
        n.biases_mut(0).copy_from_slice(&[0.5, 0.0]);
        n
    }

    #[test]
    fn zero_target_net_returns_cost() {
        let zero = Mlp::zeros(&[1, 2], OutputActivation::Linear).unwrap();
        let b = [record(3.0, false)];
        assert_eq!(pr_dqn_pessimistic_targets(&b, &zero, 0.9).unwrap(), vec![-3.0]);
        assert_eq!(dqn_targets(&b, &zero, 0.9).unwrap(), vec![3.0]);
    }

    #[test]
    fn hand_set_targets() {
        let net = two_action_net();
        let b = [record(1.0, false)];
        // V(1) = min(1.5, -1) = -1; V(2) = min(2.5, -2) = -2
        assert_eq!(dqn_targets(&b, &net, 0.5).unwrap(), vec![1.0 - 0.5]);
        let y = pr_dqn_robust_targets(&b, &net, 0.5, 0.3).unwrap()[0];
        assert!((y - (1.0 + 0.5 * (0.7 * -1.0 + 0.3 * -2.0))).abs() < 1e-15);
        assert_eq!(pr_dqn_pessimistic_targets(&b, &net, 0.5).unwrap(), vec![-1.0 - 1.0]);
        let t = [record(1.0, true)];
        assert_eq!(dqn_targets(&t, &net, 0.5).unwrap(), vec![1.0]);
    }

    #[test]
    fn value_buffer_target() {
        let zero = Mlp::zeros(&[1, 2], OutputActivation::Linear).unwrap();
        let mut vmax = VmaxBuffer::new(10);
        let b = [record(1.0, false)];
        assert_eq!(r_dqn_targets(&b, &zero, 0.9, 1.0, &vmax).unwrap(), vec![1.0]);
        vmax.push(5.0);
        assert_eq!(r_dqn_targets(&b, &zero, 0.9, 1.0, &vmax).unwrap(), vec![1.0 + 0.9 * 5.0]);
    }

    #[test]
    fn action_blind_critic_gives_zero_actor_gradient() {
        let mut rng = crate::prng(3);
        let actor = Mlp::new(&[2, 4, 1], OutputActivation::Linear, &mut rng).unwrap();
        let mut critic = Mlp::new(&[3, 1], OutputActivation::Linear, &mut rng).unwrap();
        critic.weights_mut(0)[2] = 0.0;
        let (_, g) = ddpg_policy_grad(&actor, &critic, &[0.3, -0.2, 1.0, 0.5], 2).unwrap();
        assert!(g.norm() == 0.0);
    }

    #[test]
    fn identity_critic_gives_actor_jacobian() {
        // Q(x, a) = a and a = w.x + b, so dL/dw = mean(x), dL/db = 1.
        let mut actor = Mlp::zeros(&[2, 1], OutputActivation::Linear).unwrap();
        actor.weights_mut(0).copy_from_slice(&[0.4, -0.1]);
        let mut critic = Mlp::zeros(&[3, 1], OutputActivation::Linear).unwrap();
        critic.weights_mut(0)[2] = 1.0;
        let (_, g) = ddpg_policy_grad(&actor, &critic, &[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(g.weights[0], vec![2.0, 3.0]);
        assert_eq!(g.biases[0], vec![1.0]);
    }
}
