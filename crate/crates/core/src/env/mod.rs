//! Environments and test-time perturbation wrappers.
//!
//! An environment owns its episode state and its own random stream. `reset`
//! reseeds that stream, so replaying a seed and an action sequence reproduces
//! the same `(state, cost, terminal)` sequence. Episode length limits are the
//! caller's business; [`Environment::max_episode_steps`] is only advisory.

mod cartpole;
mod grid;
mod pendulum;
mod perturb;

pub use cartpole::{cartpole_env, CartPole, CartPoleParams};
pub use grid::{cliffwalking_env, frozenlake_env, true_neighbor_sets, GridEnv, Move};
pub use pendulum::{pendulum_env, Pendulum, PendulumParams};
pub use perturb::{
    wrap_action_perturbation, wrap_parameter_perturbation, ActionPerturbation, PerturbKind,
    PerturbSpec,
};

use std::fmt::Debug;

use crate::mdp::TabularMdp;
use crate::{Prng, Result};

/// Result of one environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Step<S> {
    pub state: S,
    pub cost: f64,
    pub terminal: bool,
}

pub trait Environment {
    type State: Clone + Debug + PartialEq;
    type Action: Clone + Debug;

    /// Starts a new episode; the environment's random stream is reseeded from `seed`.
    fn reset(&mut self, seed: u64) -> Self::State;

    fn step(&mut self, action: &Self::Action) -> Step<Self::State>;

    fn state(&self) -> Self::State;

    /// Moves the environment to an explicit state. Needed for state sharing.
    fn set_state(&mut self, state: &Self::State) -> Result<()>;

    /// Uniform draw from the action space.
    fn random_action(&self, rng: &mut Prng) -> Self::Action;

    fn max_episode_steps(&self) -> usize;
}

/// Environments with a finite action set `{0, .., n-1}`.
pub trait DiscreteActions: Environment<Action = usize> {
    fn n_actions(&self) -> usize;
}

/// Environments with a box action space.
pub trait ContinuousActions: Environment<Action = Vec<f64>> {
    fn action_low(&self) -> Vec<f64>;
    fn action_high(&self) -> Vec<f64>;

    fn action_dim(&self) -> usize {
        self.action_low().len()
    }
}

/// Environments that expose a real-valued feature vector for function approximation.
pub trait VectorObservation: Environment {
    fn obs_dim(&self) -> usize;
    fn observe(&self, state: &Self::State) -> Vec<f64>;
}

/// One outcome of a tabular transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub next: usize,
    pub prob: f64,
    pub cost: f64,
    pub terminal: bool,
}

/// Finite environments with an enumerable nominal kernel.
pub trait TabularEnv: DiscreteActions + Environment<State = usize> {
    fn n_states(&self) -> usize;

    /// All successor outcomes of `(s, a)` with positive probability.
    fn outcomes(&self, s: usize, a: usize) -> Vec<Outcome>;

    /// States at which episodes end (absorbing, zero-cost in the MDP view).
    fn is_terminal(&self, s: usize) -> bool;
}

/// Environments with named, strictly positive physical parameters.
pub trait Parameterized: Clone {
    fn param_names(&self) -> &'static [&'static str];
    fn param(&self, name: &str) -> Option<f64>;
    fn set_param(&mut self, name: &str, value: f64) -> Result<()>;
}

/// Nominal MDP of a tabular environment; terminal states become absorbing
/// zero-cost states and costs are expectations over outcomes.
pub fn to_mdp<E: TabularEnv>(env: &E, gamma: f64) -> Result<TabularMdp> {
    let (n, na) = (env.n_states(), env.n_actions());
    let mut kernel = vec![0.0; n * na * n];
    let mut cost = vec![0.0; n * na];
    for s in 0..n {
        for a in 0..na {
            let row = &mut kernel[(s * na + a) * n..(s * na + a + 1) * n];
            if env.is_terminal(s) {
                row[s] = 1.0;
                continue;
            }
            for o in env.outcomes(s, a) {
                row[o.next] += o.prob;
                cost[s * na + a] += o.prob * o.cost;
            }
        }
    }
    TabularMdp::new(n, na, kernel, cost, gamma)
}
