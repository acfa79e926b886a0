//! Test-time mismatch between training and evaluation environments.

use rand::Rng;

use super::{
    ContinuousActions, DiscreteActions, Environment, Outcome, Parameterized, Step, TabularEnv,
    VectorObservation,
};
use crate::{derive_seed, prng, Error, Prng, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbKind {
    Action,
    Parameter,
}

/// One point of a perturbation sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbSpec {
    pub kind: PerturbKind,
    pub action_noise_prob: f64,
    /// Multiplicative factors keyed by parameter name.
    pub parameter_scales: Vec<(String, f64)>,
}

impl PerturbSpec {
    pub fn none() -> Self {
        Self::action(0.0)
    }

    pub fn action(p: f64) -> Self {
        Self {
            kind: PerturbKind::Action,
            action_noise_prob: p,
            parameter_scales: Vec::new(),
        }
    }

    pub fn parameter(name: &str, scale: f64) -> Self {
        Self {
            kind: PerturbKind::Parameter,
            action_noise_prob: 0.0,
            parameter_scales: vec![(name.to_string(), scale)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.action_noise_prob) {
            return Err(Error::Config(format!(
                "action noise probability {} outside [0,1]",
                self.action_noise_prob
            )));
        }
        if let Some((name, s)) = self.parameter_scales.iter().find(|(_, s)| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Config(format!("scale for `{name}` must be positive, got {s}")));
        }
        Ok(())
    }

    /// Scalar magnitude used as the x coordinate of sweep plots.
    pub fn magnitude(&self) -> f64 {
        match self.kind {
            PerturbKind::Action => self.action_noise_prob,
            PerturbKind::Parameter => self.parameter_scales.first().map_or(1.0, |(_, s)| *s),
        }
    }
}

/// With probability `p` per step the agent's action is replaced by a uniform
/// random one before the inner environment sees it.
#[derive(Debug, Clone)]
pub struct ActionPerturbation<E> {
    inner: E,
    p: f64,
    seed: u64,
    rng: Prng,
    replaced: usize,
    steps: usize,
}

pub fn wrap_action_perturbation<E: Environment>(env: E, p: f64, seed: u64) -> Result<ActionPerturbation<E>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("action noise probability {p} outside [0,1]")));
    }
    Ok(ActionPerturbation {
        inner: env,
        p,
        seed,
        rng: prng(seed),
        replaced: 0,
        steps: 0,
    })
}

impl<E> ActionPerturbation<E> {
    pub fn inner(&self) -> &E {
        &self.inner
    }

    pub fn into_inner(self) -> E {
        self.inner
    }

    pub fn probability(&self) -> f64 {
        self.p
    }

    /// `(replaced, total)` step counts since construction.
    pub fn replacement_counts(&self) -> (usize, usize) {
        (self.replaced, self.steps)
    }
}

impl<E: Environment> ActionPerturbation<E> {
    /// The action actually forwarded to the inner environment.
    fn perturb(&mut self, action: &E::Action) -> E::Action {
        self.steps += 1;
        if self.rng.gen::<f64>() < self.p {
            self.replaced += 1;
            self.inner.random_action(&mut self.rng)
        } else {
            action.clone()
        }
    }
}

impl<E: Environment> Environment for ActionPerturbation<E> {
    type State = E::State;
    type Action = E::Action;

    fn reset(&mut self, seed: u64) -> E::State {
        self.rng = prng(derive_seed(self.seed, seed));
        self.inner.reset(seed)
    }

    fn step(&mut self, action: &E::Action) -> Step<E::State> {
        let action = self.perturb(action);
        self.inner.step(&action)
    }

    fn state(&self) -> E::State {
        self.inner.state()
    }

    fn set_state(&mut self, state: &E::State) -> Result<()> {
        self.inner.set_state(state)
    }

    fn random_action(&self, rng: &mut Prng) -> E::Action {
        self.inner.random_action(rng)
    }

    fn max_episode_steps(&self) -> usize {
        self.inner.max_episode_steps()
    }
}

impl<E: DiscreteActions> DiscreteActions for ActionPerturbation<E> {
    fn n_actions(&self) -> usize {
        self.inner.n_actions()
    }
}

impl<E: ContinuousActions> ContinuousActions for ActionPerturbation<E> {
    fn action_low(&self) -> Vec<f64> {
        self.inner.action_low()
    }

    fn action_high(&self) -> Vec<f64> {
        self.inner.action_high()
    }
}

impl<E: VectorObservation> VectorObservation for ActionPerturbation<E> {
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    fn observe(&self, state: &E::State) -> Vec<f64> {
        self.inner.observe(state)
    }
}

/// The perturbed kernel is `(1-p) * nominal + p * uniform-action mixture`.
impl<E: TabularEnv> TabularEnv for ActionPerturbation<E> {
    fn n_states(&self) -> usize {
        self.inner.n_states()
    }

    fn outcomes(&self, s: usize, a: usize) -> Vec<Outcome> {
        let n_actions = self.inner.n_actions();
        let mut out: Vec<Outcome> = Vec::new();
        let mut add = |o: Outcome, w: f64| {
            if w == 0.0 {
                return;
            }
            match out
                .iter_mut()
                .find(|x| x.next == o.next && x.cost == o.cost && x.terminal == o.terminal)
            {
                Some(x) => x.prob += o.prob * w,
                None => out.push(Outcome {
                    prob: o.prob * w,
                    ..o
                }),
            }
        };
        for o in self.inner.outcomes(s, a) {
            add(o, 1.0 - self.p);
        }
        for b in 0..n_actions {
            for o in self.inner.outcomes(s, b) {
                add(o, self.p / n_actions as f64);
            }
        }
        out
    }

    fn is_terminal(&self, s: usize) -> bool {
        self.inner.is_terminal(s)
    }
}

/// Copy of `env` with each named parameter multiplied by its scale.
pub fn wrap_parameter_perturbation<E: Parameterized>(env: &E, spec: &PerturbSpec) -> Result<E> {
    spec.validate()?;
    let mut out = env.clone();
    for (name, scale) in &spec.parameter_scales {
        let base = env
            .param(name)
            .ok_or_else(|| Error::Config(format!("unknown parameter `{name}`")))?;
        out.set_param(name, base * scale)?;
    }
    Ok(out)
}
