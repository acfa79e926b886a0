//! Numerical self-checks exposed on the command line.

use rand::Rng;
use rrl_core::deep::{actor_values, ddpg_policy_grad};
use rrl_core::env::{to_mdp, true_neighbor_sets, TabularEnv};
use rrl_core::mdp::{QTable, TabularMdp};
use rrl_core::neighbors::NeighborTable;
use rrl_core::nn::{grad_check, mse_loss, GradCheckReport, Mlp, OutputActivation};
use rrl_core::robust::{robust_value_iteration, UncertaintySet};
use rrl_core::{prng, Prng};

use crate::error::Result;

fn random_net(rng: &mut Prng, input: usize, output: usize, bounded: bool) -> Result<Mlp> {
    let depth = rng.gen_range(0..3);
    let mut sizes = vec![input];
    sizes.extend((0..depth).map(|_| rng.gen_range(2..7)));
    sizes.push(output);
    let act = if bounded {
        let low = (0..output).map(|_| rng.gen_range(-3.0..-0.5)).collect();
        let high = (0..output).map(|_| rng.gen_range(0.5..3.0)).collect();
        OutputActivation::TanhScaled { low, high }
    } else {
        OutputActivation::Linear
    };
    Ok(Mlp::new(&sizes, act, rng)?)
}

/// Worst finite-difference reports over random networks.
#[derive(Debug, Clone)]
pub struct GradSuite {
    pub cases: usize,
    pub backward: GradCheckReport,
    pub policy: GradCheckReport,
}

impl GradSuite {
    pub fn passed(&self) -> bool {
        self.backward.passed && self.policy.passed
    }
}

fn keep_worst(slot: &mut Option<GradCheckReport>, r: GradCheckReport) {
    let worse = match slot {
        Some(w) => (!r.passed && w.passed) || (r.passed == w.passed && r.worst_rel_err > w.worst_rel_err),
        None => true,
    };
    if worse {
        *slot = Some(r);
    }
}

/// Checks MSE backpropagation and the deterministic policy gradient against
/// central differences with step `h` on `cases` random networks each.
pub fn gradient_suite(cases: usize, seed: u64, h: f64, tolerance: f64) -> Result<GradSuite> {
    let mut rng = prng(seed);
    let mut backward = None;
    let mut policy = None;
    for _ in 0..cases {
        let (input, output, batch) = (rng.gen_range(1..5), rng.gen_range(1..4), rng.gen_range(1..6));
        let bounded = rng.gen_bool(0.5);
        let net = random_net(&mut rng, input, output, bounded)?;
        let x: Vec<f64> = (0..input * batch).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..output * batch).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (pred, cache) = net.forward_batch(&x, batch)?;
        let (grads, _) = net.backward(&cache, &mse_loss(&pred, &y).1)?;
        let loss = |n: &Mlp| n.forward_batch(&x, batch).map_or(f64::NAN, |(p, _)| mse_loss(&p, &y).0);
        keep_worst(&mut backward, grad_check(&net, loss, &grads, h, tolerance));

        let (obs_dim, act_dim, batch) = (rng.gen_range(1..4), rng.gen_range(1..3), rng.gen_range(1..5));
        let actor = random_net(&mut rng, obs_dim, act_dim, true)?;
        let critic = random_net(&mut rng, obs_dim + act_dim, 1, false)?;
        let states: Vec<f64> = (0..obs_dim * batch).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (_, grads) = ddpg_policy_grad(&actor, &critic, &states, batch)?;
        let objective = |a: &Mlp| {
            actor_values(&critic, a, &states, batch).map_or(f64::NAN, |v| v.iter().sum::<f64>() / batch as f64)
        };
        keep_worst(&mut policy, grad_check(&actor, objective, &grads, h, tolerance));
    }
    let empty = || GradCheckReport {
        passed: true,
        worst_rel_err: 0.0,
        worst_param: "none".into(),
        worst_layer: 0,
    };
    Ok(GradSuite {
        cases,
        backward: backward.unwrap_or_else(empty),
        policy: policy.unwrap_or_else(empty),
    })
}

/// Robust value-iteration fixed point of a tabular MDP.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub q: QTable,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

pub fn solve_oracle(mdp: &TabularMdp, set: &UncertaintySet, neighbors: &NeighborTable, tol: f64) -> Result<OracleSolution> {
    let vi = robust_value_iteration(mdp, set, neighbors, tol, 1_000_000, None)?;
    Ok(OracleSolution {
        residual: vi.final_residual(),
        iterations: vi.iterations,
        converged: vi.converged,
        q: vi.q,
    })
}

/// Nominal MDP and true neighbour sets of a tabular environment.
pub fn env_oracle_inputs<E: TabularEnv>(env: &E, gamma: f64) -> Result<(TabularMdp, NeighborTable)> {
    Ok((to_mdp(env, gamma)?, true_neighbor_sets(env)))
}
