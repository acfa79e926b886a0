//! Trained agents, their on-disk checkpoints and perturbed evaluation.

use std::fs;
use std::path::{Path, PathBuf};

use rrl_core::deep::{ActorPolicy, GreedyQ};
use rrl_core::env::{
    cartpole_env, cliffwalking_env, frozenlake_env, pendulum_env, wrap_action_perturbation, wrap_parameter_perturbation,
    CartPole, Environment, GridEnv, Parameterized, Pendulum, PerturbKind, PerturbSpec,
};
use rrl_core::eval::{evaluate_policy, EvalReport, Policy};
use rrl_core::mdp::{greedy_policy, QTable};
use rrl_core::neighbors::NeighborTable;
use rrl_core::nn::Mlp;
use rrl_core::derive_seed;

use crate::error::{HarnessError, Result};

/// Environment identifier plus construction options.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvId {
    CliffWalking,
    FrozenLake { size: usize, slippery: bool },
    CartPole,
    Pendulum,
}

impl EnvId {
    pub fn name(&self) -> &'static str {
        match self {
            Self::CliffWalking => "cliffwalking",
            Self::FrozenLake { .. } => "frozenlake",
            Self::CartPole => "cartpole",
            Self::Pendulum => "pendulum",
        }
    }

    pub fn is_tabular(&self) -> bool {
        matches!(self, Self::CliffWalking | Self::FrozenLake { .. })
    }

    pub fn grid(&self, max_steps: Option<usize>) -> Result<GridEnv> {
        let env = match self {
            Self::CliffWalking => cliffwalking_env(),
            Self::FrozenLake { size, slippery } => frozenlake_env(*size, *slippery)?,
            _ => return Err(HarnessError::Capability(format!("`{}` is not a gridworld", self.name()))),
        };
        Ok(match max_steps {
            Some(m) => env.with_max_steps(m),
            None => env,
        })
    }
}

/// What a training instance leaves behind.
#[derive(Debug, Clone)]
pub enum TrainedAgent {
    Tabular {
        q: QTable,
        q_pessimistic: Option<QTable>,
        neighbors: NeighborTable,
    },
    Dqn {
        net: Mlp,
        pessimistic: Option<Mlp>,
    },
    Ddpg {
        actor: Mlp,
        critic: Mlp,
        pessimistic: Option<(Mlp, Mlp)>,
    },
}

fn write(dir: &Path, name: &str, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    written.push(path);
    Ok(())
}

fn read(dir: &Path, name: &str) -> Result<Option<String>> {
    let path = dir.join(name);
    match fs::read_to_string(&path) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(HarnessError::io(path, e)),
    }
}

fn require(dir: &Path, name: &str) -> Result<String> {
    read(dir, name)?.ok_or_else(|| HarnessError::Capability(format!("{} has no `{name}` checkpoint", dir.display())))
}

impl TrainedAgent {
    /// Writes the checkpoint files into `dir`; returns their paths.
    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        match self {
            Self::Tabular { q, q_pessimistic, neighbors } => {
                write(dir, "q.csv", &q.to_csv(), &mut written)?;
                if let Some(qp) = q_pessimistic {
                    write(dir, "q_pessimistic.csv", &qp.to_csv(), &mut written)?;
                }
                write(dir, "neighbors.txt", &neighbors.to_text(), &mut written)?;
            }
            Self::Dqn { net, pessimistic } => {
                write(dir, "q_net.txt", &net.to_text(), &mut written)?;
                if let Some(p) = pessimistic {
                    write(dir, "q_net_pessimistic.txt", &p.to_text(), &mut written)?;
                }
            }
            Self::Ddpg { actor, critic, pessimistic } => {
                write(dir, "actor.txt", &actor.to_text(), &mut written)?;
                write(dir, "critic.txt", &critic.to_text(), &mut written)?;
                if let Some((a, c)) = pessimistic {
                    write(dir, "actor_pessimistic.txt", &a.to_text(), &mut written)?;
                    write(dir, "critic_pessimistic.txt", &c.to_text(), &mut written)?;
                }
            }
        }
        Ok(written)
    }

    /// Loads whichever checkpoint kind is present in `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        if let Some(q) = read(dir, "q.csv")? {
            return Ok(Self::Tabular {
                q: QTable::from_csv(&q)?,
                q_pessimistic: read(dir, "q_pessimistic.csv")?.map(|t| QTable::from_csv(&t)).transpose()?,
                neighbors: NeighborTable::from_text(&require(dir, "neighbors.txt")?)?,
            });
        }
        if let Some(net) = read(dir, "q_net.txt")? {
            return Ok(Self::Dqn {
                net: Mlp::from_text(&net)?,
                pessimistic: read(dir, "q_net_pessimistic.txt")?.map(|t| Mlp::from_text(&t)).transpose()?,
            });
        }
        let actor = Mlp::from_text(&require(dir, "actor.txt")?)?;
        let critic = Mlp::from_text(&require(dir, "critic.txt")?)?;
        let pessimistic = match (read(dir, "actor_pessimistic.txt")?, read(dir, "critic_pessimistic.txt")?) {
            (Some(a), Some(c)) => Some((Mlp::from_text(&a)?, Mlp::from_text(&c)?)),
            _ => None,
        };
        Ok(Self::Ddpg { actor, critic, pessimistic })
    }
}

fn run_eval<E, P>(env: E, spec: &PerturbSpec, policy: &P, episodes: usize, seed: u64) -> Result<EvalReport>
where
    E: Environment,
    P: Policy<rrl_core::env::ActionPerturbation<E>>,
{
    let max_steps = env.max_episode_steps();
    let mut wrapped = wrap_action_perturbation(env, spec.action_noise_prob, derive_seed(seed, 6))?;
    Ok(evaluate_policy(&mut wrapped, policy, episodes, max_steps, derive_seed(seed, 5))?)
}

fn with_parameters<E: Parameterized>(env: E, spec: &PerturbSpec) -> Result<E> {
    match spec.kind {
        PerturbKind::Action => Ok(env),
        PerturbKind::Parameter => Ok(wrap_parameter_perturbation(&env, spec)?),
    }
}

/// Evaluates `agent` on `env` under one perturbation point.
pub fn evaluate_agent(
    agent: &TrainedAgent,
    env: &EnvId,
    max_steps: Option<usize>,
    spec: &PerturbSpec,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport> {
    spec.validate()?;
    match (agent, env) {
        (TrainedAgent::Tabular { q, .. }, id) if id.is_tabular() => {
            if spec.kind == PerturbKind::Parameter {
                return Err(HarnessError::Capability(format!("`{}` has no physical parameters", id.name())));
            }
            run_eval(id.grid(max_steps)?, spec, &greedy_policy(q), episodes, seed)
        }
        (TrainedAgent::Dqn { net, .. }, EnvId::CartPole) => {
            let env: CartPole = with_parameters(cartpole_env(), spec)?;
            run_eval(env, spec, &GreedyQ(net), episodes, seed)
        }
        (TrainedAgent::Ddpg { actor, .. }, EnvId::Pendulum) => {
            let env: Pendulum = with_parameters(pendulum_env(), spec)?;
            run_eval(env, spec, &ActorPolicy(actor), episodes, seed)
        }
        (_, id) => Err(HarnessError::Capability(format!("agent kind does not match environment `{}`", id.name()))),
    }
}
