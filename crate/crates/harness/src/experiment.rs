//! Multi-instance training, perturbed evaluation and aggregation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use rrl_core::deep::{train_ddpg, train_dqn, DeepConfig, DeepVariant};
use rrl_core::env::{cartpole_env, pendulum_env, PerturbKind, PerturbSpec};
use rrl_core::eval::{mean_std, EvalReport};
use rrl_core::tabular::{train_tabular, EpsilonSchedule, TabularAlgorithm, TrainConfig};

use crate::agent::{evaluate_agent, EnvId, TrainedAgent};
use crate::config::{ConfigDoc, Flag};
use crate::error::{ConfigError, HarnessError, Result};
use crate::manifest::{code_version_hash, InstanceRecord, InstanceStatus, RunManifest};

pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const AGGREGATE_HEADER: &str = "# rrl-aggregate v1";
pub const AGGREGATE_COLUMNS: &str = "algorithm,perturbation,level,mean_return,std_return,instances";
pub const EVAL_HEADER: &str = "# rrl-eval v1";
pub const EVAL_COLUMNS: &str = "perturbation,level,mean_return,std_return,episodes,truncated";
pub const CONFIG_SNAPSHOT: &str = "config.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmKind {
    Tabular(TabularAlgorithm),
    Dqn(DeepVariant),
    Ddpg(DeepVariant),
}

impl AlgorithmKind {
    pub fn parse(name: &str) -> Result<Self, ConfigError> {
        if let Ok(t) = TabularAlgorithm::from_name(name) {
            return Ok(Self::Tabular(t));
        }
        match DeepVariant::parse(name) {
            Ok((v, "dqn")) => Ok(Self::Dqn(v)),
            Ok((v, _)) => Ok(Self::Ddpg(v)),
            Err(_) => Err(ConfigError::new(format!("unknown algorithm `{name}`"))),
        }
    }

    fn fits(self, env: &EnvId) -> bool {
        match self {
            Self::Tabular(_) => env.is_tabular(),
            Self::Dqn(_) => *env == EnvId::CartPole,
            Self::Ddpg(_) => *env == EnvId::Pendulum,
        }
    }
}

/// Evaluation sweep: one perturbation kind over several levels.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbSweep {
    pub kind: PerturbKind,
    /// Parameter name for parameter sweeps.
    pub parameter: Option<String>,
    pub levels: Vec<f64>,
}

impl PerturbSweep {
    pub fn specs(&self) -> Vec<PerturbSpec> {
        self.levels
            .iter()
            .map(|&l| match (&self.kind, &self.parameter) {
                (PerturbKind::Parameter, Some(name)) => PerturbSpec::parameter(name, l),
                _ => PerturbSpec::action(l),
            })
            .collect()
    }

    pub fn kind_name(&self) -> String {
        match (&self.kind, &self.parameter) {
            (PerturbKind::Parameter, Some(name)) => format!("parameter:{name}"),
            _ => "action".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvId,
    /// Episode cap override for gridworlds.
    pub max_steps: Option<usize>,
    pub algorithms: Vec<String>,
    pub tabular: TrainConfig,
    pub deep: DeepConfig,
    pub sweep: PerturbSweep,
    pub n_instances: usize,
    pub eval_episodes: usize,
    /// One seed per instance.
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    /// Normalised snapshot written next to the results.
    pub doc: ConfigDoc,
}

const EXPERIMENT_KEYS: &[&str] = &["env", "algorithms", "instances", "eval_episodes", "base_seed", "seeds", "output"];
const ENV_KEYS: &[&str] = &["max_steps", "size", "slippery"];
const TRAIN_KEYS: &[&str] = &[
    "alpha",
    "gamma",
    "r",
    "episodes",
    "batch_size",
    "buffer_capacity",
    "warmup_steps",
    "epsilon_start",
    "epsilon_end",
    "epsilon_decay_fraction",
    "online",
    "random_pessimist",
    "eval_every",
    "eval_episodes",
    "tau",
    "lr_q",
    "lr_policy",
    "total_steps",
    "hidden",
    "exploration_noise",
    "vmax_capacity",
    "max_grad_norm",
];
const PERTURBATION_KEYS: &[&str] = &["kind", "parameter", "levels"];

fn set<T: std::str::FromStr>(doc: &ConfigDoc, key: &str, slot: &mut T) -> Result<(), ConfigError>
where
    T::Err: std::fmt::Display,
{
    if let Some(v) = doc.value("train", key)? {
        *slot = v;
    }
    Ok(())
}

fn epsilon(doc: &ConfigDoc, base: EpsilonSchedule) -> Result<EpsilonSchedule, ConfigError> {
    let mut e = base;
    set(doc, "epsilon_start", &mut e.start)?;
    set(doc, "epsilon_end", &mut e.end)?;
    set(doc, "epsilon_decay_fraction", &mut e.decay_fraction)?;
    Ok(e)
}

fn flag(doc: &ConfigDoc, key: &str, slot: &mut bool) -> Result<(), ConfigError> {
    if let Some(Flag(b)) = doc.value("train", key)? {
        *slot = b;
    }
    Ok(())
}

fn tabular_settings(doc: &ConfigDoc, env: &EnvId) -> Result<TrainConfig, ConfigError> {
    let mut c = match env {
        EnvId::FrozenLake { .. } => TrainConfig::frozenlake(),
        _ => TrainConfig::cliffwalking(),
    };
    set(doc, "alpha", &mut c.alpha)?;
    set(doc, "gamma", &mut c.gamma)?;
    set(doc, "r", &mut c.r)?;
    set(doc, "episodes", &mut c.episodes)?;
    set(doc, "batch_size", &mut c.batch_size)?;
    set(doc, "buffer_capacity", &mut c.buffer_capacity)?;
    set(doc, "warmup_steps", &mut c.warmup_steps)?;
    set(doc, "eval_every", &mut c.eval_every)?;
    set(doc, "eval_episodes", &mut c.eval_episodes)?;
    flag(doc, "online", &mut c.online)?;
    flag(doc, "random_pessimist", &mut c.random_pessimist)?;
    c.epsilon = epsilon(doc, c.epsilon)?;
    c.validate().map_err(|e| ConfigError::new(e.to_string()))?;
    Ok(c)
}

fn deep_settings(doc: &ConfigDoc, env: &EnvId) -> Result<DeepConfig, ConfigError> {
    let mut c = match env {
        EnvId::Pendulum => DeepConfig::pendulum(),
        _ => DeepConfig::cartpole(),
    };
    set(doc, "gamma", &mut c.gamma)?;
    set(doc, "r", &mut c.r)?;
    set(doc, "tau", &mut c.tau)?;
    set(doc, "lr_q", &mut c.lr_q)?;
    set(doc, "lr_policy", &mut c.lr_policy)?;
    set(doc, "batch_size", &mut c.batch_size)?;
    set(doc, "buffer_capacity", &mut c.buffer_capacity)?;
    set(doc, "warmup_steps", &mut c.warmup_steps)?;
    set(doc, "total_steps", &mut c.total_steps)?;
    set(doc, "exploration_noise", &mut c.exploration_noise)?;
    set(doc, "vmax_capacity", &mut c.vmax_capacity)?;
    set(doc, "eval_every", &mut c.eval_every)?;
    set(doc, "eval_episodes", &mut c.eval_episodes)?;
    flag(doc, "random_pessimist", &mut c.random_pessimist)?;
    if let Some(h) = doc.list("train", "hidden")? {
        c.hidden = h;
    }
    if let Some(e) = doc.get("train", "max_grad_norm") {
        c.max_grad_norm = match e.value.as_str() {
            "none" => None,
            v => Some(v.parse().map_err(|err| ConfigError::at(e.line, format!("[train] max_grad_norm: {err}")))?),
        };
    }
    c.epsilon = epsilon(doc, c.epsilon)?;
    c.validate().map_err(|e| ConfigError::new(e.to_string()))?;
    Ok(c)
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        Self::from_doc(ConfigDoc::parse(text)?)
    }

    pub fn from_doc(doc: ConfigDoc) -> Result<Self, ConfigError> {
        doc.check_keys(&[
            ("experiment", EXPERIMENT_KEYS),
            ("env", ENV_KEYS),
            ("train", TRAIN_KEYS),
            ("perturbation", PERTURBATION_KEYS),
        ])?;
        let env_name: String = doc
            .value("experiment", "env")?
            .ok_or_else(|| ConfigError::new("[experiment] env is required"))?;
        let env = match env_name.as_str() {
            "cliffwalking" => EnvId::CliffWalking,
            "frozenlake" => EnvId::FrozenLake {
                size: doc.value("env", "size")?.unwrap_or(8),
                slippery: doc.value::<Flag>("env", "slippery")?.map_or(true, |f| f.0),
            },
            "cartpole" => EnvId::CartPole,
            "pendulum" => EnvId::Pendulum,
            other => return Err(ConfigError::at(doc.get("experiment", "env").map_or(0, |e| e.line), format!("unknown environment `{other}`"))),
        };
        let algorithms: Vec<String> = doc
            .list("experiment", "algorithms")?
            .ok_or_else(|| ConfigError::new("[experiment] algorithms is required"))?;
        if algorithms.is_empty() {
            return Err(ConfigError::new("[experiment] algorithms is empty"));
        }
        for a in &algorithms {
            if !AlgorithmKind::parse(a)?.fits(&env) {
                return Err(ConfigError::new(format!("algorithm `{a}` cannot run on `{}`", env.name())));
            }
        }
        let n_instances = doc.value("experiment", "instances")?.unwrap_or(5);
        if n_instances == 0 {
            return Err(ConfigError::new("[experiment] instances must be positive"));
        }
        let seeds = match doc.list::<u64>("experiment", "seeds")? {
            Some(s) if s.len() == n_instances => s,
            Some(s) => {
                return Err(ConfigError::new(format!(
                    "[experiment] seeds lists {} seeds for {n_instances} instances",
                    s.len()
                )))
            }
            None => {
                let base: u64 = doc.value("experiment", "base_seed")?.unwrap_or(0);
                (0..n_instances as u64).map(|i| base + i).collect()
            }
        };
        let eval_episodes = doc.value("experiment", "eval_episodes")?.unwrap_or(100);
        if eval_episodes == 0 {
            return Err(ConfigError::new("[experiment] eval_episodes must be positive"));
        }
        let kind = match doc.value::<String>("perturbation", "kind")?.as_deref() {
            None | Some("action") => PerturbKind::Action,
            Some("parameter") => PerturbKind::Parameter,
            Some(other) => return Err(ConfigError::new(format!("unknown perturbation kind `{other}`"))),
        };
        let parameter: Option<String> = doc.value("perturbation", "parameter")?;
        if kind == PerturbKind::Parameter && parameter.is_none() {
            return Err(ConfigError::new("[perturbation] parameter sweeps need `parameter`"));
        }
        let default_levels = if kind == PerturbKind::Parameter { vec![1.0] } else { vec![0.0] };
        let sweep = PerturbSweep {
            kind,
            parameter,
            levels: doc.list("perturbation", "levels")?.unwrap_or(default_levels),
        };
        for spec in sweep.specs() {
            spec.validate().map_err(|e| ConfigError::new(e.to_string()))?;
        }
        let output = doc
            .value::<String>("experiment", "output")?
            .map_or_else(|| PathBuf::from(format!("runs/{env_name}")), PathBuf::from);
        Ok(Self {
            max_steps: doc.value("env", "max_steps")?,
            tabular: tabular_settings(&doc, &env)?,
            deep: deep_settings(&doc, &env)?,
            env,
            algorithms,
            sweep,
            n_instances,
            eval_episodes,
            seeds,
            output,
            doc,
        })
    }
}

/// Per-instance outcome of training plus evaluation.
#[derive(Debug, Clone)]
pub struct InstanceResult {
    pub algorithm: String,
    pub index: usize,
    pub seed: u64,
    pub train_seconds: f64,
    pub env_steps: usize,
    /// One report per sweep level.
    pub reports: Vec<EvalReport>,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub algorithm: String,
    pub perturbation: String,
    pub level: f64,
    pub mean_return: f64,
    pub std_return: f64,
    pub instances: usize,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub aggregate: Vec<AggregateRow>,
    pub instances: Vec<InstanceResult>,
}

pub fn eval_csv(sweep: &PerturbSweep, reports: &[EvalReport]) -> String {
    let mut out = format!("{EVAL_HEADER}\n{EVAL_COLUMNS}\n");
    for (level, r) in sweep.levels.iter().zip(reports) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            sweep.kind_name(),
            level,
            r.mean_return,
            r.std_return,
            r.episodes,
            r.truncated
        );
    }
    out
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = format!("{AGGREGATE_HEADER}\n{AGGREGATE_COLUMNS}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.algorithm, r.perturbation, r.level, r.mean_return, r.std_return, r.instances
        );
    }
    out
}

/// Mean and population std across instances of each instance's mean return.
pub fn aggregate(algorithms: &[String], sweep: &PerturbSweep, results: &[InstanceResult]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for alg in algorithms {
        let done: Vec<&InstanceResult> = results.iter().filter(|r| &r.algorithm == alg).collect();
        if done.is_empty() {
            continue;
        }
        for (li, &level) in sweep.levels.iter().enumerate() {
            let means: Vec<f64> = done.iter().map(|r| r.reports[li].mean_return).collect();
            let (mean, std) = mean_std(&means);
            rows.push(AggregateRow {
                algorithm: alg.clone(),
                perturbation: sweep.kind_name(),
                level,
                mean_return: mean,
                std_return: std,
                instances: done.len(),
            });
        }
    }
    rows
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| HarnessError::io(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<PathBuf> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))?;
    Ok(path.to_path_buf())
}

/// Trains one instance; returns the agent, its log CSV, training seconds and env steps.
pub fn train_instance(cfg: &ExperimentConfig, algorithm: &str, seed: u64) -> Result<(TrainedAgent, String, f64, usize)> {
    match AlgorithmKind::parse(algorithm)? {
        AlgorithmKind::Tabular(alg) => {
            let env = cfg.env.grid(cfg.max_steps)?;
            let tc = TrainConfig { seed, ..cfg.tabular.clone() };
            let started = Instant::now();
            let run = train_tabular(&env, alg, &tc)?;
            let secs = started.elapsed().as_secs_f64();
            let agent = TrainedAgent::Tabular {
                q: run.q,
                q_pessimistic: run.q_pessimistic,
                neighbors: run.neighbors,
            };
            Ok((agent, run.log.to_csv(), secs, run.env_steps))
        }
        AlgorithmKind::Dqn(variant) => {
            let dc = DeepConfig { variant, seed, ..cfg.deep.clone() };
            let run = train_dqn(&cartpole_env(), &dc)?;
            let agent = TrainedAgent::Dqn {
                net: run.agents.robust.net,
                pessimistic: run.agents.pessimistic.map(|p| p.net),
            };
            Ok((agent, run.log.to_csv(), run.train_seconds, dc.total_steps))
        }
        AlgorithmKind::Ddpg(variant) => {
            let dc = DeepConfig { variant, seed, ..cfg.deep.clone() };
            let run = train_ddpg(&pendulum_env(), &dc)?;
            let agent = TrainedAgent::Ddpg {
                actor: run.agents.robust.actor,
                critic: run.agents.robust.critic,
                pessimistic: run.agents.pessimistic.map(|p| (p.actor, p.critic)),
            };
            Ok((agent, run.log.to_csv(), run.train_seconds, dc.total_steps))
        }
    }
}

/// Evaluates a saved or fresh agent across the sweep.
pub fn evaluate_sweep(cfg: &ExperimentConfig, agent: &TrainedAgent, seed: u64) -> Result<Vec<EvalReport>> {
    cfg.sweep
        .specs()
        .iter()
        .map(|spec| evaluate_agent(agent, &cfg.env, cfg.max_steps, spec, cfg.eval_episodes, seed))
        .collect()
}

fn instance_dir(root: &Path, algorithm: &str, index: usize) -> PathBuf {
    root.join(algorithm).join(format!("instance-{index}"))
}

fn run_instance(cfg: &ExperimentConfig, root: &Path, algorithm: &str, index: usize, seed: u64) -> Result<InstanceResult> {
    let dir = instance_dir(root, algorithm, index);
    create_dir(&dir)?;
    let (agent, log_csv, train_seconds, env_steps) = train_instance(cfg, algorithm, seed)?;
    let mut files = agent.save(&dir)?;
    files.push(write_file(&dir.join("train_log.csv"), &log_csv)?);
    let reports = evaluate_sweep(cfg, &agent, seed)?;
    files.push(write_file(&dir.join("eval.csv"), &eval_csv(&cfg.sweep, &reports))?);
    Ok(InstanceResult {
        algorithm: algorithm.to_string(),
        index,
        seed,
        train_seconds,
        env_steps,
        reports,
        files,
    })
}

/// Trains every (algorithm, instance) pair in parallel, evaluates each across
/// the sweep and writes the run directory. Failed instances are recorded in
/// the manifest and left out of the aggregate.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let started = Instant::now();
    let root = cfg.output.clone();
    create_dir(&root)?;
    let mut files = vec![write_file(&root.join(CONFIG_SNAPSHOT), &cfg.doc.to_text())?];

    let jobs: Vec<(String, usize, u64)> = cfg
        .algorithms
        .iter()
        .flat_map(|a| cfg.seeds.iter().enumerate().map(move |(i, &s)| (a.clone(), i, s)))
        .collect();
    let outcomes: Vec<(String, usize, u64, Result<InstanceResult>)> = jobs
        .into_par_iter()
        .map(|(a, i, s)| {
            let r = run_instance(cfg, &root, &a, i, s);
            (a, i, s, r)
        })
        .collect();

    let mut records = Vec::new();
    let mut results = Vec::new();
    let mut warnings = Vec::new();
    for (algorithm, index, seed, outcome) in outcomes {
        match outcome {
            Ok(r) => {
                records.push(InstanceRecord {
                    algorithm,
                    index,
                    seed,
                    status: InstanceStatus::Completed,
                    train_seconds: r.train_seconds,
                    env_steps: r.env_steps,
                });
                files.extend(r.files.iter().cloned());
                results.push(r);
            }
            Err(e) if e.exit_code() == 1 => return Err(e),
            Err(e) => {
                let msg = e.to_string();
                warnings.push(format!("{algorithm} instance {index} (seed {seed}) failed: {msg}"));
                records.push(InstanceRecord {
                    algorithm,
                    index,
                    seed,
                    status: InstanceStatus::Failed(msg),
                    train_seconds: 0.0,
                    env_steps: 0,
                });
            }
        }
    }
    for alg in &cfg.algorithms {
        let done = results.iter().filter(|r| &r.algorithm == alg).count();
        if done < cfg.n_instances {
            warnings.push(format!("{alg}: aggregated {done} of {} instances", cfg.n_instances));
        }
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let rows = aggregate(&cfg.algorithms, &cfg.sweep, &results);
    files.push(write_file(&root.join(AGGREGATE_FILE), &aggregate_csv(&rows))?);

    let mut manifest = RunManifest {
        environment: cfg.env.name().to_string(),
        algorithms: cfg.algorithms.clone(),
        code_hash: code_version_hash(),
        runtime_seconds: started.elapsed().as_secs_f64(),
        instances: records,
        files: Vec::new(),
        warnings,
    };
    manifest.index_files(&root, &files)?;
    manifest.write(&root)?;
    Ok(RunSummary {
        dir: root,
        manifest,
        aggregate: rows,
        instances: results,
    })
}

/// Re-evaluates the agents of a finished run under `sweep`; writes
/// `eval-<tag>.csv` per instance and `aggregate-<tag>.csv`.
pub fn evaluate_run(run_dir: &Path, sweep: &PerturbSweep, eval_episodes: Option<usize>, tag: &str) -> Result<Vec<AggregateRow>> {
    let snapshot = run_dir.join(CONFIG_SNAPSHOT);
    let text = fs::read_to_string(&snapshot).map_err(|e| HarnessError::io(&snapshot, e))?;
    let mut cfg = ExperimentConfig::from_text(&text)?;
    cfg.sweep = sweep.clone();
    if let Some(n) = eval_episodes {
        cfg.eval_episodes = n;
    }
    let manifest = RunManifest::read(run_dir)?;
    let mut results = Vec::new();
    for inst in manifest.instances.iter().filter(|i| i.status == InstanceStatus::Completed) {
        let dir = instance_dir(run_dir, &inst.algorithm, inst.index);
        let agent = TrainedAgent::load(&dir)?;
        let reports = evaluate_sweep(&cfg, &agent, inst.seed)?;
        write_file(&dir.join(format!("eval-{tag}.csv")), &eval_csv(sweep, &reports))?;
        results.push(InstanceResult {
            algorithm: inst.algorithm.clone(),
            index: inst.index,
            seed: inst.seed,
            train_seconds: inst.train_seconds,
            env_steps: inst.env_steps,
            reports,
            files: Vec::new(),
        });
    }
    let rows = aggregate(&cfg.algorithms, sweep, &results);
    write_file(&run_dir.join(format!("aggregate-{tag}.csv")), &aggregate_csv(&rows))?;
    Ok(rows)
}
