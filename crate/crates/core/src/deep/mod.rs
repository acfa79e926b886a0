//! Deep agents: DQN / R-DQN / PR-DQN for discrete actions and
//! DDPG / R-DDPG / PR-DDPG for box actions.
//!
//! * `Base` is the plain algorithm.
//! * `RContamination` replaces the worst-case next value by the largest entry
//!   of a FIFO window of recently observed target values.
//! * `Pessimistic` trains a second agent on negated costs and uses its
//!   state-shared successor `x'` as the worst-case next state.

mod ddpg;
mod dqn;
mod targets;
mod vmax;

pub use ddpg::{train_ddpg, ActorCritic, DdpgAgents, DdpgRun};
pub use dqn::{q_regression_step, train_dqn, DqnAgents, DqnRun, QAgent};
pub use targets::{
    actor_values, critic_input, ddpg_policy_grad, ddpg_targets, dqn_targets, min_q_batch,
    pr_ddpg_targets, pr_dqn_pessimistic_targets, pr_dqn_robust_targets, r_ddpg_targets,
    r_dqn_targets, DdpgTargetNets, ObsRecord, PessimisticObs,
};
pub use vmax::VmaxBuffer;

use std::fmt::Write as _;

use crate::env::{ContinuousActions, DiscreteActions, Environment, VectorObservation};
use crate::eval::Policy;
use crate::mdp::argmin;
use crate::nn::Mlp;
use crate::sampling::{DoubleAgentTransition, Transition};
use crate::tabular::EpsilonSchedule;
use crate::{Error, Prng, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeepVariant {
    Base,
    RContamination,
    Pessimistic,
}

impl DeepVariant {
    pub const ALL: [DeepVariant; 3] = [Self::Base, Self::RContamination, Self::Pessimistic];

    /// Algorithm name with the given family suffix, e.g. `pr-dqn`.
    pub fn name(self, family: &str) -> String {
        match self {
            Self::Base => family.to_string(),
            Self::RContamination => format!("r-{family}"),
            Self::Pessimistic => format!("pr-{family}"),
        }
    }

    /// Parses `dqn`, `r-dqn`, `pr-ddpg`, ... into `(variant, family)`.
    pub fn parse(name: &str) -> Result<(DeepVariant, &str)> {
        let (variant, family) = if let Some(f) = name.strip_prefix("pr-") {
            (Self::Pessimistic, f)
        } else if let Some(f) = name.strip_prefix("r-") {
            (Self::RContamination, f)
        } else {
            (Self::Base, name)
        };
        match family {
            "dqn" | "ddpg" => Ok((variant, family)),
            _ => Err(Error::Config(format!("unknown deep algorithm `{name}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeepConfig {
    pub variant: DeepVariant,
    pub gamma: f64,
    pub r: f64,
    /// Soft target update rate.
    pub tau: f64,
    pub lr_q: f64,
    pub lr_policy: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Environment steps before gradient updates begin.
    pub warmup_steps: usize,
    pub total_steps: usize,
    pub hidden: Vec<usize>,
    /// Discrete actions: epsilon-greedy schedule over training progress.
    pub epsilon: EpsilonSchedule,
    /// Box actions: Gaussian noise std as a fraction of the half action range.
    pub exploration_noise: f64,
    /// Capacity of the R-contamination value window.
    pub vmax_capacity: usize,
    /// Pessimistic variant only: uniform pessimistic actions, no pessimistic learning.
    pub random_pessimist: bool,
    pub max_grad_norm: Option<f64>,
    /// Steps between evaluation checkpoints.
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub seed: u64,
}

impl Default for DeepConfig {
    fn default() -> Self {
        Self {
            variant: DeepVariant::Base,
            gamma: 0.99,
            r: 0.0,
            tau: 0.005,
            lr_q: 1e-3,
            lr_policy: 1e-3,
            batch_size: 64,
            buffer_capacity: 100_000,
            warmup_steps: 1000,
            total_steps: 50_000,
            hidden: vec![64, 64],
            epsilon: EpsilonSchedule {
                start: 1.0,
                end: 0.05,
                decay_fraction: 0.1,
            },
            exploration_noise: 0.1,
            vmax_capacity: 10_000,
            random_pessimist: false,
            max_grad_norm: Some(10.0),
            eval_every: 5000,
            eval_episodes: 5,
            seed: 0,
        }
    }
}

impl DeepConfig {
    /// CartPole defaults for the DQN family.
    pub fn cartpole() -> Self {
        Self::default()
    }

    /// Pendulum defaults for the DDPG family.
    pub fn pendulum() -> Self {
        Self {
            gamma: 0.98,
            total_steps: 20_000,
            eval_every: 2000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0,1), got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.r) {
            return bad(format!("robustness level must lie in [0,1], got {}", self.r));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau must lie in (0,1], got {}", self.tau));
        }
        if !(self.lr_q > 0.0 && self.lr_policy > 0.0) {
            return bad("learning rates must be positive".into());
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.total_steps == 0 {
            return bad("batch size, buffer capacity and step budget must be positive".into());
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive".into());
        }
        if self.exploration_noise < 0.0 {
            return bad("exploration noise must be non-negative".into());
        }
        Ok(())
    }

    fn layer_sizes(&self, input: usize, output: usize) -> Vec<usize> {
        let mut sizes = vec![input];
        sizes.extend(&self.hidden);
        sizes.push(output);
        sizes
    }
}

/// Pessimistic half of a replay record.
#[derive(Debug, Clone, PartialEq)]
pub struct PessimisticBranch<S, A> {
    pub u: A,
    pub cost_p: f64,
    pub x_next: S,
    pub x_terminal: bool,
}

/// Replay record in environment-state space.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepRecord<S, A> {
    pub s: S,
    pub a: A,
    pub cost: f64,
    pub s_next: S,
    pub terminal: bool,
    pub pessimistic: Option<PessimisticBranch<S, A>>,
}

impl<S, A> From<Transition<S, A>> for DeepRecord<S, A> {
    fn from(t: Transition<S, A>) -> Self {
        Self {
            s: t.s,
            a: t.a,
            cost: t.cost,
            s_next: t.s_next,
            terminal: t.terminal,
            pessimistic: None,
        }
    }
}

impl<S, A> From<DoubleAgentTransition<S, A>> for DeepRecord<S, A> {
    fn from(t: DoubleAgentTransition<S, A>) -> Self {
        Self {
            s: t.s,
            a: t.a,
            cost: t.cost,
            s_next: t.s_next,
            terminal: t.terminal,
            pessimistic: Some(PessimisticBranch {
                u: t.u,
                cost_p: t.cost_p,
                x_next: t.x_next,
                x_terminal: t.x_terminal,
            }),
        }
    }
}

impl<S, A: Clone> DeepRecord<S, A> {
    pub fn observe<E: VectorObservation<State = S>>(&self, env: &E) -> ObsRecord<A> {
        ObsRecord {
            obs: env.observe(&self.s),
            action: self.a.clone(),
            cost: self.cost,
            next_obs: env.observe(&self.s_next),
            terminal: self.terminal,
            pessimistic: self.pessimistic.as_ref().map(|p| PessimisticObs {
                u: p.u.clone(),
                cost_p: p.cost_p,
                x_next_obs: env.observe(&p.x_next),
                x_terminal: p.x_terminal,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeepLogRow {
    pub step: usize,
    /// Mean return of training episodes finished since the previous row.
    pub train_return: Option<f64>,
    pub eval_return_mean: f64,
    pub eval_return_std: f64,
    pub loss_q_pi: Option<f64>,
    pub loss_q_phi: Option<f64>,
    pub loss_actor_pi: Option<f64>,
    pub loss_actor_phi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeepLog {
    pub rows: Vec<DeepLogRow>,
    /// Whether actor-loss columns are emitted.
    pub has_actor: bool,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl DeepLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,train_return,eval_return_mean,eval_return_std,loss_q_pi,loss_q_phi");
        if self.has_actor {
            out.push_str(",loss_actor_pi,loss_actor_phi");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{},{},{}",
                r.step,
                opt(r.train_return),
                r.eval_return_mean,
                r.eval_return_std,
                opt(r.loss_q_pi),
                opt(r.loss_q_phi)
            );
            if self.has_actor {
                let _ = write!(out, ",{},{}", opt(r.loss_actor_pi), opt(r.loss_actor_phi));
            }
            out.push('\n');
        }
        out
    }

    pub fn last(&self) -> Option<&DeepLogRow> {
        self.rows.last()
    }
}

/// Running means of losses and training returns between checkpoints.
#[derive(Debug, Default)]
struct Accumulator {
    sums: [f64; 4],
    counts: [usize; 4],
    returns: Vec<f64>,
}

impl Accumulator {
    fn add(&mut self, slot: usize, v: f64) {
        self.sums[slot] += v;
        self.counts[slot] += 1;
    }

    fn take(&mut self, step: usize, eval_mean: f64, eval_std: f64) -> DeepLogRow {
        let mean = |i: usize| (self.counts[i] > 0).then(|| self.sums[i] / self.counts[i] as f64);
        let row = DeepLogRow {
            step,
            train_return: (!self.returns.is_empty()).then(|| self.returns.iter().sum::<f64>() / self.returns.len() as f64),
            eval_return_mean: eval_mean,
            eval_return_std: eval_std,
            loss_q_pi: mean(0),
            loss_q_phi: mean(1),
            loss_actor_pi: mean(2),
            loss_actor_phi: mean(3),
        };
        *self = Self::default();
        row
    }
}

/// Greedy (cost-minimising) policy of a Q-network.
pub struct GreedyQ<'a>(pub &'a Mlp);

impl<E: DiscreteActions + VectorObservation> Policy<E> for GreedyQ<'_> {
    fn act(&self, env: &E, state: &E::State, _rng: &mut Prng) -> usize {
        let q = self.0.forward(&env.observe(state)).expect("network input matches observation size");
        argmin(&q)
    }
}

/// Deterministic actor network.
pub struct ActorPolicy<'a>(pub &'a Mlp);

impl<E: ContinuousActions + VectorObservation> Policy<E> for ActorPolicy<'_> {
    fn act(&self, env: &E, state: &E::State, _rng: &mut Prng) -> Vec<f64> {
        self.0.forward(&env.observe(state)).expect("network input matches observation size")
    }
}

/// Replays every pessimistic branch: `x'` must be what one nominal step from
/// `s` with action `u` produces. Returns `(verified, total)`.
pub fn verify_pessimistic_successors<E>(env: &mut E, records: &[DeepRecord<E::State, E::Action>]) -> Result<(usize, usize)>
where
    E: Environment,
{
    let mut ok = 0;
    let mut total = 0;
    for rec in records {
        if let Some(p) = &rec.pessimistic {
            total += 1;
            env.set_state(&rec.s)?;
            let step = env.step(&p.u);
            if step.state == p.x_next && step.terminal == p.x_terminal && -step.cost == p.cost_p {
                ok += 1;
            }
        }
    }
    Ok((ok, total))
}
