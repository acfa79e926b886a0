//! ASCII views of tabular policies and max-states.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rrl_core::env::{GridEnv, Move, TabularEnv};
use rrl_core::mdp::QTable;
use rrl_core::neighbors::NeighborTable;

use crate::agent::TrainedAgent;
use crate::error::{HarnessError, Result};
use crate::experiment::{ExperimentConfig, CONFIG_SNAPSHOT};

/// One arrow per cell for the greedy (argmin) action.
pub fn policy_grid(env: &GridEnv, q: &QTable) -> String {
    env.render_ascii(|s| (!env.is_terminal(s)).then(|| Move::from_index(q.argmin(s)).arrow()))
}

fn direction(env: &GridEnv, from: usize, to: usize) -> char {
    let (r0, c0) = env.cell(from);
    let (r1, c1) = env.cell(to);
    match (r1 as isize - r0 as isize, c1 as isize - c0 as isize) {
        (0, 0) => '@',
        (0, -1) => '<',
        (1, 0) => 'v',
        (0, 1) => '>',
        (-1, 0) => '^',
        _ => '*',
    }
}

/// Per cell, where `argmax_{n in N_s} V(n)` lies: an arrow for an adjacent
/// cell, `@` for the cell itself, `*` for a distant cell (a cliff reset) and
/// `?` for a state never visited.
pub fn max_state_grid(env: &GridEnv, q: &QTable, neighbors: &NeighborTable) -> String {
    let v = q.state_values();
    let mut out = env.render_ascii(|s| {
        if env.is_terminal(s) {
            None
        } else if !neighbors.is_visited(s) {
            Some('?')
        } else {
            Some(direction(env, s, neighbors.argmax(s, &v)))
        }
    });
    out.push('\n');
    for s in neighbors.visited_states() {
        if !env.is_terminal(s) {
            let _ = writeln!(out, "{s} -> {}", neighbors.argmax(s, &v));
        }
    }
    out
}

/// States visited by following the most likely outcome of the greedy action
/// from the start, until a terminal state, a revisit or `max_steps`.
pub fn greedy_path(env: &GridEnv, q: &QTable, max_steps: usize) -> Vec<usize> {
    let mut path = vec![env.start()];
    let mut s = env.start();
    for _ in 0..max_steps {
        if env.is_terminal(s) {
            break;
        }
        let next = env
            .outcomes(s, q.argmin(s))
            .into_iter()
            .fold(None::<(usize, f64)>, |best, o| match best {
                Some((_, p)) if p >= o.prob => best,
                _ => Some((o.next, o.prob)),
            })
            .map_or(s, |(n, _)| n);
        if path.contains(&next) {
            path.push(next);
            break;
        }
        path.push(next);
        s = next;
    }
    path
}

/// Renders the policy (or max-state) view of one instance of a finished run.
pub fn show_policy(run_dir: &Path, algorithm: &str, instance: usize, max_states: bool) -> Result<String> {
    let snapshot = run_dir.join(CONFIG_SNAPSHOT);
    let text = fs::read_to_string(&snapshot).map_err(|e| HarnessError::io(&snapshot, e))?;
    let cfg = ExperimentConfig::from_text(&text)?;
    if !cfg.env.is_tabular() {
        return Err(HarnessError::Capability(format!(
            "show-policy needs a tabular run; `{}` is not one",
            cfg.env.name()
        )));
    }
    let env = cfg.env.grid(cfg.max_steps)?;
    let dir = run_dir.join(algorithm).join(format!("instance-{instance}"));
    match TrainedAgent::load(&dir)? {
        TrainedAgent::Tabular { q, neighbors, .. } => Ok(if max_states {
            max_state_grid(&env, &q, &neighbors)
        } else {
            policy_grid(&env, &q)
        }),
        _ => Err(HarnessError::Capability(format!("{} holds no Q-table", dir.display()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rrl_core::env::cliffwalking_env;

    #[test]
    fn path_of_uniform_q_stops_at_the_wall() {
        let env = cliffwalking_env();
        let q = QTable::zeros(env.n_states(), 4);
        assert_eq!(greedy_path(&env, &q, 100), vec![env.start(), env.start()]);
    }
}
