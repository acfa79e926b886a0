//! End-to-end acceptance checks. Each test prints one `[PASS]` or `[FAIL]`
//! line before asserting; `cargo test --test acceptance -- --nocapture`
//! shows them.

use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::Rng;
use rrl_core::deep::{
    ddpg_targets, dqn_targets, pr_ddpg_targets, pr_dqn_robust_targets, train_ddpg, train_dqn,
    verify_pessimistic_successors, DdpgTargetNets, DeepConfig, DeepVariant, ObsRecord, PessimisticObs,
};
use rrl_core::env::{cartpole_env, cliffwalking_env, pendulum_env, GridEnv, TabularEnv};
use rrl_core::eval::mean_std;
use rrl_core::mdp::{random_mdp, QTable};
use rrl_core::neighbors::{kernel_neighbors, NeighborTable};
use rrl_core::nn::{Mlp, OutputActivation};
use rrl_core::robust::{
    lp_support_oracle, robust_backup, robust_value_iteration, support_function, SetKind, UncertaintySet,
};
use rrl_core::tabular::{
    arq_update, generative_learning, max_state_report, prq_robust_update, q_learning_update, robust_q_update,
    train_tabular, TabularAlgorithm, TabularDoubleTransition, TrainConfig,
};
use rrl_core::{prng, Prng};
use rrl_harness::agent::TrainedAgent;
use rrl_harness::checks::gradient_suite;
use rrl_harness::experiment::{run_experiment, AggregateRow, ExperimentConfig, RunSummary};
use rrl_harness::policy_view::greedy_path;

fn verdict(id: u32, name: &str, passed: bool, detail: String) {
    let line = format!("[{}] C{id} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    // Written to the raw handle so libtest does not capture it.
    let _ = writeln!(std::io::stderr().lock(), "{line}");
    assert!(passed, "criterion {id} ({name}) failed: {detail}");
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

fn random_q(ns: usize, na: usize, rng: &mut Prng) -> QTable {
    QTable::from_values(ns, na, (0..ns * na).map(|_| rng.gen_range(-10.0..10.0)).collect()).unwrap()
}

fn random_simplex(n: usize, rng: &mut Prng) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

#[test]
fn c01_backups_are_gamma_contractions() {
    let started = Instant::now();
    let mut rng = prng(1);
    let mut worst_slack = f64::NEG_INFINITY;
    let mut violations = 0;
    for _ in 0..1000 {
        let (ns, na) = (rng.gen_range(2..8), rng.gen_range(1..4));
        let gamma = rng.gen_range(0.1..0.99);
        let mdp = random_mdp(ns, na, 3, gamma, &mut rng).unwrap();
        let mut nb = kernel_neighbors(&mdp);
        for s in 0..ns {
            nb.insert(s, s);
        }
        let (q1, q2) = (random_q(ns, na, &mut rng), random_q(ns, na, &mut rng));
        let r = rng.gen::<f64>();
        let gap = q1.sup_distance(&q2);
        for kind in [SetKind::RContamination, SetKind::AdjacentRContamination] {
            let set = UncertaintySet::new(kind, r).unwrap();
            let d = robust_backup(&mdp, &set, &nb, &q1)
                .unwrap()
                .sup_distance(&robust_backup(&mdp, &set, &nb, &q2).unwrap());
            worst_slack = worst_slack.max(d - gamma * gap);
            if d > gamma * gap + 1e-12 {
                violations += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    verdict(
        1,
        "contraction",
        violations == 0 && within(elapsed, 10),
        format!("2000 backups, {violations} violations, max(d - gamma*gap) = {worst_slack:.3e}, {elapsed:.2?}"),
    );
}

#[test]
fn c02_support_function_matches_vertex_oracle() {
    let started = Instant::now();
    let mut rng = prng(2);
    let mut worst = 0.0_f64;
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=8);
        let p = random_simplex(n, &mut rng);
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-20.0..20.0)).collect();
        let k = rng.gen_range(1..=n);
        let nbrs = rand::seq::index::sample(&mut rng, n, k).into_vec();
        let r = rng.gen::<f64>();
        for kind in [SetKind::Nominal, SetKind::RContamination, SetKind::AdjacentRContamination] {
            let set = UncertaintySet::new(kind, r).unwrap();
            let closed = support_function(&set, &p, &v, &nbrs).unwrap();
            let oracle = lp_support_oracle(&set, &p, &v, &nbrs).unwrap();
            worst = worst.max((closed - oracle).abs());
        }
    }
    let elapsed = started.elapsed();
    verdict(
        2,
        "support oracle",
        worst <= 1e-12 && within(elapsed, 30),
        format!("30000 comparisons, worst |closed - oracle| = {worst:.3e}, {elapsed:.2?}"),
    );
}

#[test]
fn c03_sampled_learning_recovers_oracle_fixed_points() {
    let mut rows = Vec::new();
    let mut passed = true;
    for seed in 0..3u64 {
        let started = Instant::now();
        let mut rng = prng(300 + seed);
        let mdp = random_mdp(5, 2, 3, 0.8, &mut rng).unwrap();
        let nb = kernel_neighbors(&mdp);
        let mut errs = Vec::new();
        for set in [UncertaintySet::adjacent(0.2).unwrap(), UncertaintySet::r_contamination(0.2).unwrap()] {
            let oracle = robust_value_iteration(&mdp, &set, &nb, 1e-13, 100_000, None).unwrap().q;
            let learned = generative_learning(&mdp, &set, &nb, 1 << 21, seed).unwrap();
            errs.push(learned.sup_distance(&oracle));
        }
        let elapsed = started.elapsed();
        passed &= errs.iter().all(|&e| e < 1e-3) && within(elapsed, 120);
        rows.push(format!("mdp {seed}: arq {:.2e}, robust-q {:.2e} ({elapsed:.1?})", errs[0], errs[1]));
    }
    verdict(3, "fixed-point recovery", passed, rows.join("; "));
}

fn random_double(ns: usize, na: usize, rng: &mut Prng) -> TabularDoubleTransition {
    let cost = rng.gen_range(-2.0..2.0);
    TabularDoubleTransition {
        s: rng.gen_range(0..ns),
        a: rng.gen_range(0..na),
        cost,
        s_next: rng.gen_range(0..ns),
        terminal: rng.gen_bool(0.1),
        u: rng.gen_range(0..na),
        cost_p: -cost,
        x_next: rng.gen_range(0..ns),
        x_terminal: false,
    }
}

#[test]
fn c04_prq_equals_arq_under_the_oracle_pessimist() {
    let mut rng = prng(4);
    let mut mismatches = 0;
    let cases = 10_000;
    for _ in 0..cases {
        let (ns, na) = (rng.gen_range(2..10), rng.gen_range(1..4));
        let q0 = random_q(ns, na, &mut rng);
        let sets: Vec<Vec<usize>> = (0..ns)
            .map(|_| {
                let k = rng.gen_range(1..=ns);
                rand::seq::index::sample(&mut rng, ns, k).into_vec()
            })
            .collect();
        let table = NeighborTable::from_sets(sets).unwrap();
        let mut t = random_double(ns, na, &mut rng);
        t.x_next = table.argmax(t.s, &q0.state_values());
        let (alpha, r) = (rng.gen::<f64>(), rng.gen::<f64>());
        let mut arq = q0.clone();
        arq_update(&mut arq, &t.robust_part(), table.effective(t.s), alpha, 0.99, r).unwrap();
        let mut prq = q0.clone();
        prq_robust_update(&mut prq, &t, alpha, 0.99, r);
        if arq.values().iter().zip(prq.values()).any(|(a, b)| a.to_bits() != b.to_bits()) {
            mismatches += 1;
        }
    }
    verdict(4, "PRQ = ARQ with analytic max-state", mismatches == 0, format!("{cases} updates, {mismatches} bit mismatches"));
}

fn bits(xs: &[f64]) -> Vec<u64> {
    xs.iter().map(|x| x.to_bits()).collect()
}

fn obs_batch<A>(rng: &mut Prng, n: usize, dim: usize, mut action: impl FnMut(&mut Prng) -> A) -> Vec<ObsRecord<A>> {
    let obs = |rng: &mut Prng| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    (0..n)
        .map(|_| {
            let cost = rng.gen_range(-1.0..1.0);
            ObsRecord {
                obs: obs(rng),
                action: action(rng),
                cost,
                next_obs: obs(rng),
                terminal: rng.gen_bool(0.1),
                pessimistic: Some(PessimisticObs {
                    u: action(rng),
                    cost_p: -cost,
                    x_next_obs: obs(rng),
                    x_terminal: rng.gen_bool(0.1),
                }),
            }
        })
        .collect()
}

#[test]
fn c05_zero_robustness_reduces_to_standard_updates() {
    let mut rng = prng(5);
    let (ns, na) = (12, 4);
    let nbrs: Vec<usize> = (0..ns).collect();
    let start = random_q(ns, na, &mut rng);
    let (mut plain, mut rq, mut arq, mut prq) = (start.clone(), start.clone(), start.clone(), start);
    let mut tabular_mismatch = 0;
    for _ in 0..20_000 {
        let t = random_double(ns, na, &mut rng);
        let single = t.robust_part();
        q_learning_update(&mut plain, &single, 0.1, 0.99);
        robust_q_update(&mut rq, &single, 0.1, 0.99, 0.0);
        arq_update(&mut arq, &single, &nbrs, 0.1, 0.99, 0.0).unwrap();
        prq_robust_update(&mut prq, &t, 0.1, 0.99, 0.0);
        for other in [&rq, &arq, &prq] {
            if bits(plain.values()) != bits(other.values()) {
                tabular_mismatch += 1;
            }
        }
    }

    let q_net = Mlp::new(&[4, 16, 2], OutputActivation::Linear, &mut rng).unwrap();
    let critic = Mlp::new(&[4, 16, 1], OutputActivation::Linear, &mut rng).unwrap();
    let actor = Mlp::new(&[3, 16, 1], OutputActivation::TanhScaled { low: vec![-2.0], high: vec![2.0] }, &mut rng).unwrap();
    let mut deep_mismatch = 0;
    for _ in 0..200 {
        let discrete = obs_batch(&mut rng, 64, 4, |r| r.gen_range(0..2));
        if bits(&dqn_targets(&discrete, &q_net, 0.99).unwrap())
            != bits(&pr_dqn_robust_targets(&discrete, &q_net, 0.99, 0.0).unwrap())
        {
            deep_mismatch += 1;
        }
        let continuous = obs_batch(&mut rng, 64, 3, |r| vec![r.gen_range(-2.0..2.0)]);
        let nets = DdpgTargetNets { critic_pi: &critic, actor_pi: &actor, critic_phi: &critic, actor_phi: &actor };
        if bits(&ddpg_targets(&continuous, &critic, &actor, 0.98).unwrap())
            != bits(&pr_ddpg_targets(&continuous, nets, 0.98, 0.0).unwrap().0)
        {
            deep_mismatch += 1;
        }
    }
    verdict(
        5,
        "R=0 reductions",
        tabular_mismatch == 0 && deep_mismatch == 0,
        format!("20000-step tabular stream: {tabular_mismatch} mismatches; 400 deep batches: {deep_mismatch} mismatches"),
    );
}

const TABULAR_ALGORITHMS: [&str; 4] = ["q-learning", "robust-q", "arq", "prq"];

struct TabularRuns {
    dir: tempfile::TempDir,
    summary: RunSummary,
    elapsed: Duration,
}

impl TabularRuns {
    fn agent(&self, algorithm: &str, instance: usize) -> (QTable, Option<QTable>, NeighborTable) {
        let dir = self.dir.path().join(algorithm).join(format!("instance-{instance}"));
        match TrainedAgent::load(&dir).unwrap() {
            TrainedAgent::Tabular { q, q_pessimistic, neighbors } => (q, q_pessimistic, neighbors),
            _ => unreachable!("tabular run"),
        }
    }

    fn row(&self, algorithm: &str, level: f64) -> &AggregateRow {
        self.summary
            .aggregate
            .iter()
            .find(|r| r.algorithm == algorithm && r.level == level)
            .unwrap()
    }
}

/// Five CliffWalking instances per tabular learner with the reference
/// hyperparameters (gamma 0.99, alpha 0.01, batch 32, buffer 20000, 1000
/// episodes) and R = 0.2, evaluated 100 episodes per instance.
fn tabular_runs() -> &'static TabularRuns {
    static RUNS: OnceLock<TabularRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "[experiment]\nenv = cliffwalking\nalgorithms = {}\ninstances = 5\neval_episodes = 100\noutput = {}\n\
             [train]\nr = 0.2\n[perturbation]\nkind = action\nlevels = 0, 0.1\n",
            TABULAR_ALGORITHMS.join(", "),
            dir.path().display()
        );
        let cfg = ExperimentConfig::from_text(&text).unwrap();
        assert_eq!(cfg.tabular, TrainConfig { r: 0.2, ..TrainConfig::cliffwalking() });
        let started = Instant::now();
        let summary = run_experiment(&cfg).unwrap();
        TabularRuns { dir, summary, elapsed: started.elapsed() }
    })
}

fn cliff_adjacent(env: &GridEnv, s: usize) -> bool {
    let (r, c) = env.cell(s);
    [(r + 1, c), (r, c + 1), (r, c.wrapping_sub(1))]
        .iter()
        .any(|&(rr, cc)| rr < env.rows() && cc < env.cols() && env.is_hazard(env.index(rr, cc)))
}

#[test]
fn c06_cliff_paths() {
    let runs = tabular_runs();
    let env = cliffwalking_env();
    let edge: Vec<usize> = (1..env.cols() - 1).map(|c| env.index(env.rows() - 2, c)).collect();
    let mut counts = Vec::new();
    let mut passed = true;
    for alg in ["q-learning", "arq", "prq"] {
        let ok = (0..5)
            .filter(|&i| {
                let path = greedy_path(&env, &runs.agent(alg, i).0, 200);
                let reaches = path.last() == Some(&env.goal());
                let inner = &path[1..path.len().saturating_sub(1)];
                if alg == "q-learning" {
                    reaches && edge.iter().all(|s| path.contains(s))
                } else {
                    reaches && inner.iter().all(|&s| !cliff_adjacent(&env, s))
                }
            })
            .count();
        passed &= ok >= 4;
        counts.push(format!("{alg} {ok}/5"));
    }
    passed &= within(runs.elapsed, 300);
    verdict(
        6,
        "cliff paths",
        passed,
        format!("{} (edge path for q-learning, detour for arq/prq); training {:.1?}", counts.join(", "), runs.elapsed),
    );
}

#[test]
fn c07_tabular_action_perturbation_trend() {
    let runs = tabular_runs();
    let means: Vec<f64> = TABULAR_ALGORITHMS.iter().map(|a| runs.row(a, 0.1).mean_return).collect();
    let robust_floor = means[2].min(means[3]);
    let baseline_ceiling = means[0].max(means[1]);
    let detail = TABULAR_ALGORITHMS
        .iter()
        .zip(&means)
        .map(|(a, m)| format!("{a} {m:.2}"))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(
        7,
        "tabular trend at p=0.1",
        robust_floor >= baseline_ceiling && within(runs.elapsed, 600),
        format!("{detail}; run {:.1?}", runs.elapsed),
    );
}

#[test]
fn c08_max_state_agreement() {
    let runs = tabular_runs();
    let env = cliffwalking_env();
    let mut per_seed = Vec::new();
    let (mut agree, mut total) = (0usize, 0usize);
    for i in 0..5 {
        let (q_arq, _, nb_arq) = runs.agent("arq", i);
        let (_, q_phi, nb_prq) = runs.agent("prq", i);
        let q_phi = q_phi.expect("prq saves its pessimistic table");
        let states: Vec<usize> = nb_arq
            .visited_states()
            .into_iter()
            .filter(|&s| nb_prq.is_visited(s) && !env.is_terminal(s) && !env.is_hazard(s))
            .collect();
        let report = max_state_report(&env, &q_arq, &nb_arq, &q_phi, &states);
        agree += report.rows.iter().filter(|r| r.agrees).count();
        total += report.rows.len();
        per_seed.push(format!("{:.2}", report.agreement));
    }
    let agreement = agree as f64 / total.max(1) as f64;
    verdict(
        8,
        "max-state agreement",
        agreement >= 0.9,
        format!("{agreement:.3} over {total} visited states (per seed {})", per_seed.join(", ")),
    );
}

#[test]
fn c09_gradients_match_finite_differences() {
    let started = Instant::now();
    let suite = gradient_suite(100, 9, 1e-5, 1e-4).unwrap();
    let elapsed = started.elapsed();
    let worst = suite.backward.worst_rel_err.max(suite.policy.worst_rel_err);
    verdict(
        9,
        "gradient check",
        suite.passed() && worst < 1e-4 && within(elapsed, 30),
        format!(
            "backward {:.2e}, policy gradient {:.2e} over 100 networks each, {elapsed:.2?}",
            suite.backward.worst_rel_err, suite.policy.worst_rel_err
        ),
    );
}

struct DeepRuns {
    _dirs: Vec<tempfile::TempDir>,
    cartpole: RunSummary,
    pendulum: RunSummary,
    random_pessimist: RunSummary,
    elapsed: Duration,
}

fn deep_run(dir: &Path, env: &str, algorithms: &str, extra: &str) -> RunSummary {
    let text = format!(
        "[experiment]\nenv = {env}\nalgorithms = {algorithms}\ninstances = 5\neval_episodes = 100\noutput = {}\n\
         [train]\nr = 0.1\n{extra}[perturbation]\nkind = action\nlevels = 0, 0.1\n",
        dir.display()
    );
    run_experiment(&ExperimentConfig::from_text(&text).unwrap()).unwrap()
}

/// CartPole DQN family (50k steps) and pendulum DDPG family (20k steps), five
/// seeds each, R = 0.1, plus PR-DDPG with an untrained uniform pessimist.
fn deep_runs() -> &'static DeepRuns {
    static RUNS: OnceLock<DeepRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let started = Instant::now();
        let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
        let cartpole = deep_run(dirs[0].path(), "cartpole", "dqn, r-dqn, pr-dqn", "");
        let pendulum = deep_run(dirs[1].path(), "pendulum", "ddpg, r-ddpg, pr-ddpg", "");
        let random_pessimist = deep_run(dirs[2].path(), "pendulum", "pr-ddpg", "random_pessimist = true\n");
        DeepRuns { _dirs: dirs, cartpole, pendulum, random_pessimist, elapsed: started.elapsed() }
    })
}

fn row<'a>(summary: &'a RunSummary, algorithm: &str, level: f64) -> &'a AggregateRow {
    summary
        .aggregate
        .iter()
        .find(|r| r.algorithm == algorithm && r.level == level)
        .unwrap_or_else(|| panic!("no aggregate row for {algorithm} at {level}"))
}

#[test]
fn c10_deep_action_perturbation_trend() {
    let runs = deep_runs();
    let mut passed = within(runs.elapsed, 7200);
    let mut parts = Vec::new();
    for (summary, family) in [(&runs.cartpole, "dqn"), (&runs.pendulum, "ddpg")] {
        let [base, r, pr] = [DeepVariant::Base, DeepVariant::RContamination, DeepVariant::Pessimistic]
            .map(|v| row(summary, &v.name(family), 0.1));
        passed &= pr.mean_return >= base.mean_return && pr.mean_return >= r.mean_return;
        parts.push(
            [base, r, pr]
                .iter()
                .map(|x| format!("{} {:.1}±{:.1}", x.algorithm, x.mean_return, 0.5 * x.std_return))
                .collect::<Vec<_>>()
                .join(", "),
        );
    }
    verdict(
        10,
        "deep trend at p=0.1",
        passed,
        format!("{}; all deep runs {:.0?}", parts.join(" | "), runs.elapsed),
    );
}

#[test]
fn c11_random_pessimist_matches_trained_pessimist() {
    let runs = deep_runs();
    let trained = row(&runs.pendulum, "pr-ddpg", 0.0);
    let random = row(&runs.random_pessimist, "pr-ddpg", 0.0);
    let band = |r: &AggregateRow| (r.mean_return - 0.5 * r.std_return, r.mean_return + 0.5 * r.std_return);
    let (t, u) = (band(trained), band(random));
    let overlap = t.0 <= u.1 && u.0 <= t.1;
    verdict(
        11,
        "random pessimist ablation",
        overlap,
        format!(
            "trained [{:.1}, {:.1}] vs random [{:.1}, {:.1}] (mean ± 0.5 std, unperturbed)",
            t.0, t.1, u.0, u.1
        ),
    );
}

#[test]
fn c12_pessimist_roughly_doubles_training_time() {
    let runs = deep_runs();
    let secs = |alg: &str| {
        let xs: Vec<f64> = runs
            .pendulum
            .instances
            .iter()
            .filter(|i| i.algorithm == alg)
            .map(|i| i.train_seconds)
            .collect();
        mean_std(&xs).0
    };
    let (base, pr) = (secs("ddpg"), secs("pr-ddpg"));
    let ratio = pr / base;
    verdict(
        12,
        "runtime ratio",
        (1.5..=3.0).contains(&ratio),
        format!("pr-ddpg {pr:.1}s / ddpg {base:.1}s = {ratio:.2}"),
    );
}

fn small_deep(variant: DeepVariant, base: DeepConfig) -> DeepConfig {
    DeepConfig {
        variant,
        r: 0.1,
        total_steps: 3000,
        warmup_steps: 200,
        hidden: vec![32, 32],
        eval_every: 3000,
        eval_episodes: 1,
        ..base
    }
}

fn tabular_support_check(mdp_env: &GridEnv, records: &[TabularDoubleTransition]) -> (usize, usize) {
    let ok = records
        .iter()
        .filter(|t| {
            mdp_env
                .outcomes(t.s, t.u)
                .iter()
                .any(|o| o.prob > 0.0 && o.next == t.x_next && o.terminal == t.x_terminal)
        })
        .count();
    (ok, records.len())
}

#[test]
fn c13_pessimistic_successors_are_reachable() {
    let mut parts = Vec::new();
    let mut passed = true;

    let cliff = cliffwalking_env();
    let lake = rrl_core::env::frozenlake_env(8, true).unwrap();
    for (name, env) in [("cliffwalking", &cliff), ("frozenlake", &lake)] {
        let cfg = TrainConfig { r: 0.2, episodes: 300, eval_every: 0, ..TrainConfig::cliffwalking() };
        let run = train_tabular(env, TabularAlgorithm::Prq, &cfg).unwrap();
        let (ok, total) = tabular_support_check(env, &run.double_records);
        passed &= total > 0 && ok == total;
        parts.push(format!("{name} {ok}/{total}"));
    }

    let dqn = train_dqn(&cartpole_env(), &small_deep(DeepVariant::Pessimistic, DeepConfig::cartpole())).unwrap();
    let (ok, total) = verify_pessimistic_successors(&mut cartpole_env(), &dqn.records).unwrap();
    passed &= total > 0 && ok == total;
    parts.push(format!("cartpole replay {ok}/{total}"));

    let ddpg = train_ddpg(&pendulum_env(), &small_deep(DeepVariant::Pessimistic, DeepConfig::pendulum())).unwrap();
    let (ok, total) = verify_pessimistic_successors(&mut pendulum_env(), &ddpg.records).unwrap();
    passed &= total > 0 && ok == total;
    parts.push(format!("pendulum replay {ok}/{total}"));

    verdict(13, "pessimistic successor reachability", passed, parts.join(", "));
}
