//! Episodic policy evaluation.

use rand::Rng;

use crate::env::Environment;
use crate::mdp::TabularPolicy;
use crate::{derive_seed, prng, Error, Prng, Result};

/// Anything that maps an environment state to an action.
pub trait Policy<E: Environment> {
    fn act(&self, env: &E, state: &E::State, rng: &mut Prng) -> E::Action;
}

impl<E: Environment<State = usize, Action = usize>> Policy<E> for TabularPolicy {
    fn act(&self, _env: &E, state: &usize, rng: &mut Prng) -> usize {
        match self {
            TabularPolicy::Deterministic(actions) => actions[*state],
            TabularPolicy::Stochastic(rows) => {
                let row = &rows[*state];
                let mut u: f64 = rng.gen();
                for (a, p) in row.iter().enumerate() {
                    if u < *p {
                        return a;
                    }
                    u -= p;
                }
                row.len() - 1
            }
        }
    }
}

/// Adapter turning a closure into a [`Policy`].
pub struct FnPolicy<F>(pub F);

impl<E: Environment, F: Fn(&E::State) -> E::Action> Policy<E> for FnPolicy<F> {
    fn act(&self, _env: &E, state: &E::State, _rng: &mut Prng) -> E::Action {
        (self.0)(state)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Mean undiscounted return (reward = -cost).
    pub mean_return: f64,
    /// Population standard deviation of the returns.
    pub std_return: f64,
    pub episode_returns: Vec<f64>,
    pub episodes: usize,
    pub seed: u64,
    /// Episodes cut off at `max_steps` without reaching a terminal state.
    pub truncated: usize,
}

impl EvalReport {
    pub fn from_returns(episode_returns: Vec<f64>, seed: u64, truncated: usize) -> Self {
        let (mean_return, std_return) = mean_std(&episode_returns);
        Self {
            mean_return,
            std_return,
            episodes: episode_returns.len(),
            episode_returns,
            seed,
            truncated,
        }
    }
}

/// Mean and population standard deviation; `(0, 0)` for an empty slice.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs `episodes` episodes seeded `seed, seed + 1, ...`, each cut at
/// `max_steps`, and reports undiscounted returns as `-sum(cost)`.
pub fn evaluate_policy<E, P>(env: &mut E, policy: &P, episodes: usize, max_steps: usize, seed: u64) -> Result<EvalReport>
where
    E: Environment,
    P: Policy<E> + ?Sized,
{
    if episodes == 0 {
        return Err(Error::Config("evaluation needs at least one episode".into()));
    }
    let mut returns = Vec::with_capacity(episodes);
    let mut truncated = 0;
    for k in 0..episodes as u64 {
        let episode_seed = seed.wrapping_add(k);
        let mut rng = prng(derive_seed(episode_seed, 0xE7A1));
        let mut state = env.reset(episode_seed);
        let mut total_cost = 0.0;
        let mut done = false;
        for _ in 0..max_steps {
            let action = policy.act(env, &state, &mut rng);
            let step = env.step(&action);
            total_cost += step.cost;
            state = step.state;
            if step.terminal {
                done = true;
                break;
            }
        }
        if !done {
            truncated += 1;
        }
        returns.push(-total_cost);
    }
    Ok(EvalReport::from_returns(returns, seed, truncated))
}
