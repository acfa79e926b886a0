use crate::env::TabularEnv;
use crate::mdp::QTable;
use crate::neighbors::NeighborTable;

#[derive(Debug, Clone, PartialEq)]
pub struct MaxStateRow {
    pub state: usize,
    /// Lowest-index `argmax_{n in N_s} V^pi(n)`.
    pub analytic: usize,
    /// Most likely successor of the pessimistic greedy action.
    pub pessimistic: usize,
    /// The pessimistic successor attains the neighbourhood maximum of `V^pi`.
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxStateReport {
    pub rows: Vec<MaxStateRow>,
    pub agreement: f64,
}

/// Compares the neighbourhood maximiser of `V^pi` with the state the
/// pessimistic agent's greedy action leads to, on the given states.
///
/// A state agrees when the pessimistic successor's value equals the
/// neighbourhood maximum (within 1e-9), so ties among maximisers count as
/// agreement.
pub fn max_state_report<E: TabularEnv>(
    env: &E,
    q_pi: &QTable,
    neighbors: &NeighborTable,
    q_phi: &QTable,
    states: &[usize],
) -> MaxStateReport {
    let v = q_pi.state_values();
    let rows: Vec<MaxStateRow> = states
        .iter()
        .map(|&s| {
            let analytic = neighbors.argmax(s, &v);
            let u = q_phi.argmin(s);
            let pessimistic = env
                .outcomes(s, u)
                .into_iter()
                .fold(None::<(usize, f64)>, |best, o| match best {
                    Some((_, p)) if p >= o.prob => best,
                    _ => Some((o.next, o.prob)),
                })
                .map_or(s, |(n, _)| n);
            MaxStateRow {
                state: s,
                analytic,
                pessimistic,
                agrees: v[pessimistic] >= v[analytic] - 1e-9,
            }
        })
        .collect();
    let agreement = if rows.is_empty() {
        0.0
    } else {
        rows.iter().filter(|r| r.agrees).count() as f64 / rows.len() as f64
    };
    MaxStateReport { rows, agreement }
}
