//! Single-entry tabular updates `Q(s,a) <- (1-alpha) Q(s,a) + alpha y`.
//!
//! Terminal successors bootstrap with 0. The worst-case term of the robust
//! targets is taken over the neighbouring set regardless of termination,
//! matching the absorbing zero-cost terminal convention of the MDP view.

use crate::mdp::QTable;
use crate::robust::robust_target;
use crate::sampling::{DoubleAgentTransition, Transition};
use crate::{Error, Result};

pub type TabularTransition = Transition<usize, usize>;
pub type TabularDoubleTransition = DoubleAgentTransition<usize, usize>;

#[inline]
fn blend(q: &mut QTable, s: usize, a: usize, alpha: f64, target: f64) {
    let old = q.get(s, a);
    q.set(s, a, (1.0 - alpha) * old + alpha * target);
}

#[inline]
fn bootstrap(q: &QTable, s: usize, terminal: bool) -> f64 {
    if terminal {
        0.0
    } else {
        q.min_value(s)
    }
}

/// `y = c + gamma min_a' Q(s',a')`.
pub fn q_learning_update(q: &mut QTable, t: &TabularTransition, alpha: f64, gamma: f64) {
    let target = t.cost + gamma * bootstrap(q, t.s_next, t.terminal);
    blend(q, t.s, t.a, alpha, target);
}

/// `max_s V(s)` over the whole table.
pub fn max_state_value(q: &QTable) -> f64 {
    (0..q.n_states()).map(|s| q.min_value(s)).fold(f64::NEG_INFINITY, f64::max)
}

/// R-contamination target `c + gamma((1-R) V(s') + R max_s V(s))`, with the
/// maximum recomputed from the table. Returns the maximum used.
pub fn robust_q_update(q: &mut QTable, t: &TabularTransition, alpha: f64, gamma: f64, r: f64) -> f64 {
    let vmax = max_state_value(q);
    let target = robust_target(t.cost, gamma, r, bootstrap(q, t.s_next, t.terminal), vmax);
    blend(q, t.s, t.a, alpha, target);
    vmax
}

/// Adjacent-set target `c + gamma((1-R) V(s') + R max_{n in N_s} V(n))`.
pub fn arq_update(
    q: &mut QTable,
    t: &TabularTransition,
    neighbors_of_s: &[usize],
    alpha: f64,
    gamma: f64,
    r: f64,
) -> Result<()> {
    if neighbors_of_s.is_empty() {
        return Err(Error::Contract(format!("empty neighbouring set at state {}", t.s)));
    }
    let worst = neighbors_of_s
        .iter()
        .map(|&n| q.min_value(n))
        .fold(f64::NEG_INFINITY, f64::max);
    let target = robust_target(t.cost, gamma, r, bootstrap(q, t.s_next, t.terminal), worst);
    blend(q, t.s, t.a, alpha, target);
    Ok(())
}

/// Pessimistic learner on negated costs: `y = c^p + gamma min_u' Q^phi(x',u')`.
pub fn prq_pessimistic_update(q_phi: &mut QTable, t: &TabularDoubleTransition, alpha: f64, gamma: f64) {
    let target = t.cost_p + gamma * bootstrap(q_phi, t.x_next, t.x_terminal);
    blend(q_phi, t.s, t.u, alpha, target);
}

/// Robust learner with the pessimistic successor standing in for the
/// neighbourhood maximiser: `y = c + gamma((1-R) V(s') + R V(x'))`.
pub fn prq_robust_update(q_pi: &mut QTable, t: &TabularDoubleTransition, alpha: f64, gamma: f64, r: f64) {
    let target = robust_target(
        t.cost,
        gamma,
        r,
        bootstrap(q_pi, t.s_next, t.terminal),
        bootstrap(q_pi, t.x_next, t.x_terminal),
    );
    blend(q_pi, t.s, t.a, alpha, target);
}
