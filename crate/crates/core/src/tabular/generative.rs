//! Synchronous sample-based learning on a known kernel: every sweep draws one
//! successor for each `(s, a)` and applies the matching update.

use rand::Rng;

use super::update::{arq_update, q_learning_update, robust_q_update, TabularTransition};
use crate::mdp::{QTable, TabularMdp};
use crate::neighbors::NeighborTable;
use crate::robust::{SetKind, UncertaintySet};
use crate::{prng, Prng, Result};

/// Rescaled linear step size `1 / (1 + (1 - gamma) k)` for sweep `k >= 1`.
pub fn rescaled_linear_step(k: usize, gamma: f64) -> f64 {
    1.0 / (1.0 + (1.0 - gamma) * k as f64)
}

fn draw(row: &[f64], rng: &mut Prng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (next, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return next;
        }
    }
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

/// Runs `sweeps` synchronous sweeps of the learner matching `set`: Q-learning
/// for the nominal set, Robust-Q for R-contamination and ARQ for the adjacent
/// set with `neighbors`. Step sizes follow [`rescaled_linear_step`].
pub fn generative_learning(
    mdp: &TabularMdp,
    set: &UncertaintySet,
    neighbors: &NeighborTable,
    sweeps: usize,
    seed: u64,
) -> Result<QTable> {
    let mut rng = prng(seed);
    let gamma = mdp.gamma();
    let mut q = QTable::zeros(mdp.n_states(), mdp.n_actions());
    for k in 1..=sweeps {
        let alpha = rescaled_linear_step(k, gamma);
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                let t = TabularTransition {
                    s,
                    a,
                    cost: mdp.cost(s, a),
                    s_next: draw(mdp.row(s, a), &mut rng),
                    terminal: false,
                };
                match set.kind {
                    SetKind::Nominal => q_learning_update(&mut q, &t, alpha, gamma),
                    SetKind::RContamination => {
                        robust_q_update(&mut q, &t, alpha, gamma, set.r());
                    }
                    SetKind::AdjacentRContamination => arq_update(&mut q, &t, neighbors.effective(s), alpha, gamma, set.r())?,
                }
            }
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_size_starts_below_one() {
        assert_eq!(rescaled_linear_step(1, 0.0), 0.5);
        assert!((rescaled_linear_step(10, 0.9) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn deterministic_chain_converges() {
        // 0 -> 1 -> 1, cost 1 at state 0 only: Q(0) = 1, Q(1) = 0.
        let mdp = TabularMdp::new(2, 1, vec![0.0, 1.0, 0.0, 1.0], vec![1.0, 0.0], 0.5).unwrap();
        let q = generative_learning(&mdp, &UncertaintySet::nominal(), &NeighborTable::new(2), 2000, 0).unwrap();
        assert!((q.get(0, 0) - 1.0).abs() < 1e-5);
        assert_eq!(q.get(1, 0), 0.0);
    }
}
