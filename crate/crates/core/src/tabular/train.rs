use std::fmt::Write as _;

use rand::Rng;

use super::update::{
    arq_update, prq_pessimistic_update, prq_robust_update, q_learning_update, robust_q_update,
    TabularDoubleTransition, TabularTransition,
};
use crate::env::TabularEnv;
use crate::eval::evaluate_policy;
use crate::mdp::{greedy_policy, QTable};
use crate::neighbors::NeighborTable;
use crate::replay::ReplayBuffer;
use crate::sampling::Sampler;
use crate::{derive_seed, prng, Error, Prng, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TabularAlgorithm {
    QLearning,
    RobustQ,
    Arq,
    Prq,
}

impl TabularAlgorithm {
    pub const ALL: [TabularAlgorithm; 4] = [Self::QLearning, Self::RobustQ, Self::Arq, Self::Prq];

    pub fn name(self) -> &'static str {
        match self {
            Self::QLearning => "q-learning",
            Self::RobustQ => "robust-q",
            Self::Arq => "arq",
            Self::Prq => "prq",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown tabular algorithm `{name}`")))
    }
}

/// Linear decay from `start` to `end` over the first `decay_fraction` of training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_fraction: f64,
}

impl EpsilonSchedule {
    /// Exploration rate at `progress` in `[0, 1]`.
    pub fn at(&self, progress: f64) -> f64 {
        if self.decay_fraction <= 0.0 {
            return self.end;
        }
        let frac = (progress / self.decay_fraction).clamp(0.0, 1.0);
        self.start * (1.0 - frac) + self.end * frac
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub r: f64,
    pub episodes: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Environment steps before buffer updates begin.
    pub warmup_steps: usize,
    pub epsilon: EpsilonSchedule,
    /// Update on each fresh sample instead of replaying the buffer.
    pub online: bool,
    /// PRQ only: the pessimistic agent acts uniformly at random and never learns.
    pub random_pessimist: bool,
    /// Episodes between evaluation checkpoints (0 disables intermediate ones).
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            gamma: 0.99,
            r: 0.0,
            episodes: 1000,
            batch_size: 32,
            buffer_capacity: 20_000,
            warmup_steps: 500,
            epsilon: EpsilonSchedule {
                start: 1.0,
                end: 0.05,
                decay_fraction: 0.5,
            },
            online: false,
            random_pessimist: false,
            eval_every: 50,
            eval_episodes: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn cliffwalking() -> Self {
        Self::default()
    }

    pub fn frozenlake() -> Self {
        Self {
            episodes: 4000,
            eval_every: 200,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0,1], got {}", self.alpha));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0,1), got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.r) {
            return bad(format!("robustness level must lie in [0,1], got {}", self.r));
        }
        if self.episodes == 0 || self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("episodes, batch size and buffer capacity must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub episode: usize,
    pub env_steps: usize,
    pub mean_return: f64,
    pub std_return: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
    /// Return of every training episode, in order.
    pub train_returns: Vec<f64>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("episode,env_steps,mean_return,std_return\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.episode, r.env_steps, r.mean_return, r.std_return);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TabularRun {
    pub algorithm: TabularAlgorithm,
    pub q: QTable,
    /// Pessimistic agent's table (PRQ only).
    pub q_pessimistic: Option<QTable>,
    /// Successors observed along the robust trajectory.
    pub neighbors: NeighborTable,
    pub log: TrainLog,
    pub env_steps: usize,
    /// Final replay contents (PRQ only), oldest first.
    pub double_records: Vec<TabularDoubleTransition>,
}

fn epsilon_greedy(q: &QTable, s: usize, eps: f64, rng: &mut Prng) -> usize {
    if rng.gen::<f64>() < eps {
        rng.gen_range(0..q.n_actions())
    } else {
        q.argmin(s)
    }
}

enum Memory {
    Single(ReplayBuffer<TabularTransition>),
    Double(ReplayBuffer<TabularDoubleTransition>),
}

struct Learner<'a> {
    algorithm: TabularAlgorithm,
    cfg: &'a TrainConfig,
    q: QTable,
    q_phi: QTable,
    neighbors: NeighborTable,
}

impl Learner<'_> {
    fn single(&mut self, t: &TabularTransition) -> Result<()> {
        let c = self.cfg;
        match self.algorithm {
            TabularAlgorithm::QLearning => q_learning_update(&mut self.q, t, c.alpha, c.gamma),
            TabularAlgorithm::RobustQ => {
                robust_q_update(&mut self.q, t, c.alpha, c.gamma, c.r);
            }
            TabularAlgorithm::Arq => {
                arq_update(&mut self.q, t, self.neighbors.effective(t.s), c.alpha, c.gamma, c.r)?
            }
            TabularAlgorithm::Prq => unreachable!("PRQ consumes double-agent records"),
        }
        Ok(())
    }

    fn double(&mut self, t: &TabularDoubleTransition) {
        let c = self.cfg;
        if !c.random_pessimist {
            prq_pessimistic_update(&mut self.q_phi, t, c.alpha, c.gamma);
        }
        prq_robust_update(&mut self.q, t, c.alpha, c.gamma, c.r);
    }
}

/// Trains one tabular agent. Exploration is epsilon-greedy on the agent's own
/// table, with the schedule advanced per completed episode.
pub fn train_tabular<E: TabularEnv + Clone>(env: &E, algorithm: TabularAlgorithm, cfg: &TrainConfig) -> Result<TabularRun> {
    cfg.validate()?;
    let mut env = env.clone();
    let mut eval_env = env.clone();
    let (ns, na) = (env.n_states(), env.n_actions());
    let max_steps = env.max_episode_steps();
    let mut sampler = Sampler::new(&mut env, derive_seed(cfg.seed, 1), max_steps);
    let mut rng = prng(derive_seed(cfg.seed, 2));
    let mut memory = if algorithm == TabularAlgorithm::Prq {
        Memory::Double(ReplayBuffer::new(cfg.buffer_capacity, derive_seed(cfg.seed, 3))?)
    } else {
        Memory::Single(ReplayBuffer::new(cfg.buffer_capacity, derive_seed(cfg.seed, 3))?)
    };
    let mut learner = Learner {
        algorithm,
        cfg,
        q: QTable::zeros(ns, na),
        q_phi: QTable::zeros(ns, na),
        neighbors: NeighborTable::new(ns),
    };
    let mut log = TrainLog::default();
    let eval_seed = derive_seed(cfg.seed, 4);
    let checkpoint = |q: &QTable, episode: usize, steps: usize, eval_env: &mut E, log: &mut TrainLog| -> Result<()> {
        let report = evaluate_policy(eval_env, &greedy_policy(q), cfg.eval_episodes.max(1), max_steps, eval_seed)?;
        log.rows.push(LogRow {
            episode,
            env_steps: steps,
            mean_return: report.mean_return,
            std_return: report.std_return,
        });
        Ok(())
    };

    while (sampler.episodes_completed() as usize) < cfg.episodes {
        let eps = cfg.epsilon.at(sampler.episodes_completed() as f64 / cfg.episodes as f64);
        let s = *sampler.state();
        let a = epsilon_greedy(&learner.q, s, eps, &mut rng);
        let finished = match &mut memory {
            Memory::Single(buffer) => {
                let (t, finished) = sampler.step(&mut env, a)?;
                learner.neighbors.insert(t.s, t.s_next);
                if cfg.online {
                    learner.single(&t)?;
                } else {
                    buffer.push(t);
                    if sampler.total_steps() >= cfg.warmup_steps {
                        for i in buffer.sample_indices(cfg.batch_size) {
                            let t = buffer.get(i).clone();
                            learner.single(&t)?;
                        }
                    }
                }
                finished
            }
            Memory::Double(buffer) => {
                let u = if cfg.random_pessimist {
                    rng.gen_range(0..na)
                } else {
                    epsilon_greedy(&learner.q_phi, s, eps, &mut rng)
                };
                let (t, finished) = sampler.double_step(&mut env, a, u)?;
                learner.neighbors.insert(t.s, t.s_next);
                if cfg.online {
                    learner.double(&t);
                } else {
                    buffer.push(t);
                    if sampler.total_steps() >= cfg.warmup_steps {
                        for i in buffer.sample_indices(cfg.batch_size) {
                            let t = buffer.get(i).clone();
                            learner.double(&t);
                        }
                    }
                }
                finished
            }
        };
        if let Some(ret) = finished {
            log.train_returns.push(ret);
            let episode = sampler.episodes_completed() as usize;
            if cfg.eval_every > 0 && episode % cfg.eval_every == 0 && episode < cfg.episodes {
                checkpoint(&learner.q, episode, sampler.total_steps(), &mut eval_env, &mut log)?;
            }
        }
    }
    if !learner.q.is_finite() {
        return Err(Error::Diverged {
            step: sampler.total_steps(),
            msg: "non-finite Q-table".into(),
        });
    }
    checkpoint(&learner.q, cfg.episodes, sampler.total_steps(), &mut eval_env, &mut log)?;

    let double_records = match memory {
        Memory::Double(buffer) => buffer.iter().cloned().collect(),
        Memory::Single(_) => Vec::new(),
    };
    Ok(TabularRun {
        algorithm,
        q: learner.q,
        q_pessimistic: (algorithm == TabularAlgorithm::Prq).then_some(learner.q_phi),
        neighbors: learner.neighbors,
        log,
        env_steps: sampler.total_steps(),
        double_records,
    })
}

pub fn q_train<E: TabularEnv + Clone>(env: &E, cfg: &TrainConfig) -> Result<TabularRun> {
    train_tabular(env, TabularAlgorithm::QLearning, cfg)
}

pub fn robust_q_train<E: TabularEnv + Clone>(env: &E, cfg: &TrainConfig) -> Result<TabularRun> {
    train_tabular(env, TabularAlgorithm::RobustQ, cfg)
}

pub fn arq_train<E: TabularEnv + Clone>(env: &E, cfg: &TrainConfig) -> Result<TabularRun> {
    train_tabular(env, TabularAlgorithm::Arq, cfg)
}

pub fn prq_train<E: TabularEnv + Clone>(env: &E, cfg: &TrainConfig) -> Result<TabularRun> {
    train_tabular(env, TabularAlgorithm::Prq, cfg)
}
