//! Rollout bookkeeping for single-agent and double-agent (state-sharing) sampling.
//!
//! In double-agent sampling both agents branch from the same state `s`: the
//! robust agent's action produces `s'`, the pessimistic agent's action, taken
//! from `x = s`, produces `x'`. Only the robust trajectory continues; the
//! pessimistic agent is re-synchronised to it on every step.

use crate::env::Environment;
use crate::replay::ReplayBuffer;
use crate::{derive_seed, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S, A> {
    pub s: S,
    pub a: A,
    pub cost: f64,
    pub s_next: S,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoubleAgentTransition<S, A> {
    /// Shared state of both agents at sampling time.
    pub s: S,
    pub a: A,
    pub cost: f64,
    pub s_next: S,
    pub terminal: bool,
    /// Pessimistic action taken from `s`.
    pub u: A,
    /// Negated cost of `(s, u)`.
    pub cost_p: f64,
    pub x_next: S,
    pub x_terminal: bool,
}

impl<S: Clone, A: Clone> DoubleAgentTransition<S, A> {
    /// The robust agent's part of the record.
    pub fn robust_part(&self) -> Transition<S, A> {
        Transition {
            s: self.s.clone(),
            a: self.a.clone(),
            cost: self.cost,
            s_next: self.s_next.clone(),
            terminal: self.terminal,
        }
    }
}

/// Episode state machine around an environment.
///
/// Episode `k` is reset with `derive_seed(seed, k)`. An episode ends when the
/// environment reports a terminal state or after `max_steps` steps; the
/// latter is a truncation and leaves `terminal = false` in the record.
#[derive(Debug, Clone)]
pub struct Sampler<S> {
    seed: u64,
    episode: u64,
    steps_in_episode: usize,
    max_steps: usize,
    total_steps: usize,
    current: S,
    episode_cost: f64,
}

impl<S: Clone> Sampler<S> {
    pub fn new<E: Environment<State = S>>(env: &mut E, seed: u64, max_steps: usize) -> Self {
        let current = env.reset(derive_seed(seed, 0));
        Self {
            seed,
            episode: 0,
            steps_in_episode: 0,
            max_steps: max_steps.max(1),
            total_steps: 0,
            current,
            episode_cost: 0.0,
        }
    }

    pub fn state(&self) -> &S {
        &self.current
    }

    pub fn episodes_completed(&self) -> u64 {
        self.episode
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    /// Advances along the robust trajectory; returns the finished episode's
    /// return (`-sum(cost)`) when the episode ended on this step.
    fn advance<E: Environment<State = S>>(&mut self, env: &mut E, next: &S, cost: f64, terminal: bool) -> Result<Option<f64>> {
        self.steps_in_episode += 1;
        self.total_steps += 1;
        self.episode_cost += cost;
        if terminal || self.steps_in_episode >= self.max_steps {
            let ret = -self.episode_cost;
            self.episode += 1;
            self.steps_in_episode = 0;
            self.episode_cost = 0.0;
            self.current = env.reset(derive_seed(self.seed, self.episode));
            Ok(Some(ret))
        } else {
            self.current = next.clone();
            env.set_state(next)?;
            Ok(None)
        }
    }

    pub fn step<E: Environment<State = S>>(
        &mut self,
        env: &mut E,
        action: E::Action,
    ) -> Result<(Transition<S, E::Action>, Option<f64>)> {
        let s = self.current.clone();
        let out = env.step(&action);
        let finished = self.advance(env, &out.state, out.cost, out.terminal)?;
        Ok((
            Transition {
                s,
                a: action,
                cost: out.cost,
                s_next: out.state,
                terminal: out.terminal,
            },
            finished,
        ))
    }

    /// One state-sharing step: both agents act from the current state.
    pub fn double_step<E: Environment<State = S>>(
        &mut self,
        env: &mut E,
        action: E::Action,
        pessimistic_action: E::Action,
    ) -> Result<(DoubleAgentTransition<S, E::Action>, Option<f64>)> {
        let s = self.current.clone();
        env.set_state(&s)?;
        let robust = env.step(&action);
        env.set_state(&s)?;
        let pess = env.step(&pessimistic_action);
        let finished = self.advance(env, &robust.state, robust.cost, robust.terminal)?;
        Ok((
            DoubleAgentTransition {
                s,
                a: action,
                cost: robust.cost,
                s_next: robust.state,
                terminal: robust.terminal,
                u: pessimistic_action,
                cost_p: -pess.cost,
                x_next: pess.state,
                x_terminal: pess.terminal,
            },
            finished,
        ))
    }
}

/// Runs `steps` state-sharing steps and appends one record per step.
/// Returns the returns of episodes completed along the way.
pub fn double_agent_sample<E, R, P>(
    env: &mut E,
    mut robust_policy: R,
    mut pessimistic_policy: P,
    steps: usize,
    buffer: &mut ReplayBuffer<DoubleAgentTransition<E::State, E::Action>>,
    seed: u64,
) -> Result<Vec<f64>>
where
    E: Environment,
    R: FnMut(&E::State) -> E::Action,
    P: FnMut(&E::State) -> E::Action,
{
    let max_steps = env.max_episode_steps();
    let mut sampler = Sampler::new(env, seed, max_steps);
    let mut returns = Vec::new();
    for _ in 0..steps {
        let a = robust_policy(sampler.state());
        let u = pessimistic_policy(sampler.state());
        let (record, finished) = sampler.double_step(env, a, u)?;
        buffer.push(record);
        returns.extend(finished);
    }
    Ok(returns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{cliffwalking_env, Move};

    #[test]
    fn identical_policies_give_identical_branches() {
        let mut env = cliffwalking_env();
        let mut buf = ReplayBuffer::new(1000, 0).unwrap();
        let policy = |s: &usize| (s * 7 + 1) % 4;
        double_agent_sample(&mut env, policy, policy, 300, &mut buf, 3).unwrap();
        assert_eq!(buf.len(), 300);
        for r in buf.iter() {
            assert_eq!(r.s_next, r.x_next);
            assert_eq!(r.cost_p, -r.cost);
        }
    }

    #[test]
    fn pessimist_in_cliff_does_not_move_robust_agent() {
        let mut env = cliffwalking_env();
        let mut buf = ReplayBuffer::new(10, 0).unwrap();
        let up = |_: &usize| Move::Up as usize;
        let right = |_: &usize| Move::Right as usize;
        double_agent_sample(&mut env, up, right, 1, &mut buf, 0).unwrap();
        let r = buf.get(0);
        assert_eq!(r.s, env.start());
        assert_eq!(r.cost_p, -100.0);
        assert_eq!(r.x_next, env.start());
        assert_eq!(r.s_next, env.index(2, 0));
        assert_eq!(env.state(), env.index(2, 0));
    }

    #[test]
    fn truncation_resets_without_terminal_flag() {
        let mut env = cliffwalking_env().with_max_steps(5);
        let mut sampler = Sampler::new(&mut env, 0, 5);
        let mut ends = 0;
        for i in 0..10 {
            let (t, done) = sampler.step(&mut env, Move::Left as usize).unwrap();
            assert!(!t.terminal);
            if done.is_some() {
                ends += 1;
                assert_eq!(i % 5, 4);
                assert_eq!(done, Some(-5.0));
            }
        }
        assert_eq!(ends, 2);
    }
}
