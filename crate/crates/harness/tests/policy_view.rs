use std::fs;

use rrl_core::env::{cliffwalking_env, to_mdp, true_neighbor_sets, GridEnv, TabularEnv};
use rrl_core::mdp::QTable;
use rrl_core::robust::{robust_value_iteration, UncertaintySet};
use rrl_harness::policy_view::{greedy_path, max_state_grid, policy_grid, show_policy};
use rrl_harness::HarnessError;

fn oracle_q(env: &GridEnv, set: &UncertaintySet) -> QTable {
    let mdp = to_mdp(env, 0.99).unwrap();
    robust_value_iteration(&mdp, set, &true_neighbor_sets(env), 1e-10, 100_000, None).unwrap().q
}

fn cliff_adjacent(env: &GridEnv, s: usize) -> bool {
    let (r, c) = env.cell(s);
    [(r + 1, c), (r, c + 1), (r, c.wrapping_sub(1))]
        .iter()
        .any(|&(rr, cc)| rr < env.rows() && cc < env.cols() && env.is_hazard(env.index(rr, cc)))
}

#[test]
fn uniform_q_points_every_cell_left() {
    let env = cliffwalking_env();
    let grid = policy_grid(&env, &QTable::zeros(env.n_states(), 4));
    let arrows: Vec<char> = grid.chars().filter(|c| "<>^v".contains(*c)).collect();
    assert_eq!(arrows.len(), 37);
    assert!(arrows.iter().all(|&c| c == '<'));
}

#[test]
fn nominal_optimum_runs_directly_above_the_cliff() {
    let env = cliffwalking_env();
    let q = oracle_q(&env, &UncertaintySet::nominal());
    let path = greedy_path(&env, &q, 100);
    assert_eq!(path.len(), 14);
    assert_eq!(*path.last().unwrap(), env.goal());
    assert!(path[1..12].iter().all(|&s| env.cell(s).0 == env.rows() - 2));
}

#[test]
fn adjacent_robust_optimum_detours_away_from_the_cliff() {
    let env = cliffwalking_env();
    let q = oracle_q(&env, &UncertaintySet::adjacent(0.2).unwrap());
    let path = greedy_path(&env, &q, 100);
    assert_eq!(*path.last().unwrap(), env.goal());
    assert!(path[1..path.len() - 1].iter().all(|&s| !cliff_adjacent(&env, s)), "{path:?}");
}

// The global worst case adds the same constant to every backup, so the
// full-simplex set keeps the edge path.
#[test]
fn full_contamination_optimum_keeps_the_edge_path() {
    let env = cliffwalking_env();
    let q = oracle_q(&env, &UncertaintySet::r_contamination(0.2).unwrap());
    let path = greedy_path(&env, &q, 100);
    assert_eq!(path.len(), 14);
    assert!(path[1..12].iter().all(|&s| env.cell(s).0 == env.rows() - 2));
}

#[test]
fn max_state_view_marks_unvisited_cells() {
    let env = cliffwalking_env();
    let neighbors = rrl_core::neighbors::NeighborTable::new(env.n_states());
    let view = max_state_grid(&env, &QTable::zeros(env.n_states(), 4), &neighbors);
    assert_eq!(view.chars().filter(|&c| c == '?').count(), 37);
}

#[test]
fn deep_runs_have_no_policy_view() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("config.txt"), "[experiment]\nenv = cartpole\nalgorithms = dqn\n").unwrap();
    let err = show_policy(dir.path(), "dqn", 0, false).unwrap_err();
    assert!(matches!(err, HarnessError::Capability(_)));
}
