//! Uncertainty sets, support functions and robust Bellman backups.
//!
//! For a contamination set `{(1-R) p + R q : q in Q_s}` the support function
//! has the closed form `(1-R) p.v + R max_{s' in support(Q_s)} v(s')`. The
//! plain R-contamination set allows `q` anywhere on the simplex; the adjacent
//! set restricts it to the neighbouring set `N_s`.

use crate::mdp::{QTable, TabularMdp};
use crate::neighbors::NeighborTable;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetKind {
    /// Singleton `{p}`; robust RL reduces to standard RL.
    Nominal,
    /// `q` ranges over the whole simplex.
    RContamination,
    /// `q` is supported on the neighbouring set of the current state.
    AdjacentRContamination,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintySet {
    pub kind: SetKind,
    r: f64,
}

impl UncertaintySet {
    pub fn new(kind: SetKind, r: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Config(format!("robustness level {r} outside [0,1]")));
        }
        Ok(Self { kind, r })
    }

    pub fn nominal() -> Self {
        Self {
            kind: SetKind::Nominal,
            r: 0.0,
        }
    }

    pub fn r_contamination(r: f64) -> Result<Self> {
        Self::new(SetKind::RContamination, r)
    }

    pub fn adjacent(r: f64) -> Result<Self> {
        Self::new(SetKind::AdjacentRContamination, r)
    }

    /// Effective robustness level (always 0 for the nominal set).
    pub fn r(&self) -> f64 {
        match self.kind {
            SetKind::Nominal => 0.0,
            _ => self.r,
        }
    }
}

/// Convex blend `(1-R) expected + R worst`; the one formula every robust
/// target in the crate goes through.
#[inline]
pub fn contamination_blend(r: f64, expected: f64, worst: f64) -> f64 {
    (1.0 - r) * expected + r * worst
}

/// `c + gamma ((1-R) expected_next + R worst_next)`.
#[inline]
pub fn robust_target(cost: f64, gamma: f64, r: f64, expected_next: f64, worst_next: f64) -> f64 {
    cost + gamma * contamination_blend(r, expected_next, worst_next)
}

fn dot(p: &[f64], v: &[f64]) -> f64 {
    p.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(f64::NEG_INFINITY, f64::max)
}

/// `max_{k in P_s^a} k.v` in closed form.
pub fn support_function(set: &UncertaintySet, p_row: &[f64], v: &[f64], neighbors_of_s: &[usize]) -> Result<f64> {
    if p_row.len() != v.len() {
        return Err(Error::Shape(format!(
            "probability row of length {} against value vector of length {}",
            p_row.len(),
            v.len()
        )));
    }
    let expected = dot(p_row, v);
    let worst = match set.kind {
        SetKind::Nominal => return Ok(expected),
        SetKind::RContamination => max_of(v.iter().copied()),
        SetKind::AdjacentRContamination => {
            if neighbors_of_s.is_empty() {
                return Err(Error::Contract("empty neighbouring set for the adjacent set".into()));
            }
            max_of(neighbors_of_s.iter().map(|&n| v[n]))
        }
    };
    Ok(contamination_blend(set.r(), expected, worst))
}

/// Brute-force support function by enumerating the vertices
/// `(1-R) p + R e_j` of the feasible kernel set. Refuses more than 12 states.
pub fn lp_support_oracle(set: &UncertaintySet, p_row: &[f64], v: &[f64], neighbors_of_s: &[usize]) -> Result<f64> {
    let n = v.len();
    if n > 12 {
        return Err(Error::Contract(format!("vertex enumeration limited to 12 states, got {n}")));
    }
    let r = set.r();
    let vertices: Vec<usize> = match set.kind {
        SetKind::Nominal => Vec::new(),
        SetKind::RContamination => (0..n).collect(),
        SetKind::AdjacentRContamination => neighbors_of_s.to_vec(),
    };
    if set.kind == SetKind::Nominal {
        return Ok((0..n).map(|i| p_row[i] * v[i]).sum());
    }
    if vertices.is_empty() {
        return Err(Error::Contract("empty feasible set".into()));
    }
    let mut best = f64::NEG_INFINITY;
    for &j in &vertices {
        let mut kernel: Vec<f64> = p_row.iter().map(|p| (1.0 - r) * p).collect();
        kernel[j] += r;
        let value: f64 = kernel.iter().zip(v).map(|(k, x)| k * x).sum();
        best = best.max(value);
    }
    Ok(best)
}

/// One synchronous sweep `(TQ)(s,a) = c(s,a) + gamma * sigma(V)` with
/// `V(s') = min_a' Q(s',a')`.
pub fn robust_backup(mdp: &TabularMdp, set: &UncertaintySet, neighbors: &NeighborTable, q: &QTable) -> Result<QTable> {
    if q.n_states() != mdp.n_states() || q.n_actions() != mdp.n_actions() {
        return Err(Error::Shape("Q-table does not match the MDP".into()));
    }
    if neighbors.n_states() != mdp.n_states() {
        return Err(Error::Shape("neighbour table does not match the MDP".into()));
    }
    let v = q.state_values();
    let mut out = QTable::zeros(mdp.n_states(), mdp.n_actions());
    for s in 0..mdp.n_states() {
        let nbrs = neighbors.effective(s);
        for a in 0..mdp.n_actions() {
            let sigma = support_function(set, mdp.row(s, a), &v, nbrs)?;
            out.set(s, a, mdp.cost(s, a) + mdp.gamma() * sigma);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ValueIteration {
    pub q: QTable,
    pub iterations: usize,
    /// `||Q_{k+1} - Q_k||_inf` per sweep.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

impl ValueIteration {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// Iterates [`robust_backup`] from `init` (zeros when `None`) until the
/// sup-norm residual drops below `tol`. Not converging within `max_iters` is
/// reported through `converged = false`.
pub fn robust_value_iteration(
    mdp: &TabularMdp,
    set: &UncertaintySet,
    neighbors: &NeighborTable,
    tol: f64,
    max_iters: usize,
    init: Option<&QTable>,
) -> Result<ValueIteration> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let mut q = match init {
        Some(q0) => q0.clone(),
        None => QTable::zeros(mdp.n_states(), mdp.n_actions()),
    };
    let mut residuals = Vec::new();
    for _ in 0..max_iters {
        let next = robust_backup(mdp, set, neighbors, &q)?;
        let res = next.sup_distance(&q);
        residuals.push(res);
        q = next;
        if res < tol {
            return Ok(ValueIteration {
                q,
                iterations: residuals.len(),
                residuals,
                converged: true,
            });
        }
    }
    Ok(ValueIteration {
        q,
        iterations: residuals.len(),
        residuals,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_level_is_nominal_expectation() {
        let p = [0.2, 0.3, 0.5];
        let v = [1.0, -2.0, 7.0];
        let exact: f64 = 0.2 * 1.0 + 0.3 * -2.0 + 0.5 * 7.0;
        for kind in [SetKind::Nominal, SetKind::RContamination, SetKind::AdjacentRContamination] {
            let set = UncertaintySet::new(kind, 0.0).unwrap();
            assert_eq!(support_function(&set, &p, &v, &[0]).unwrap(), exact);
        }
    }

    #[test]
    fn two_state_examples() {
        let p = [0.5, 0.5];
        let v = [1.0, 3.0];
        let rc = UncertaintySet::r_contamination(0.5).unwrap();
        assert!((support_function(&rc, &p, &v, &[]).unwrap() - 2.5).abs() < 1e-15);
        let adj = UncertaintySet::adjacent(0.5).unwrap();
        assert!((support_function(&adj, &p, &v, &[0]).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn empty_neighbors_violate_contract() {
        let adj = UncertaintySet::adjacent(0.3).unwrap();
        assert!(matches!(
            support_function(&adj, &[1.0], &[0.0], &[]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn oracle_degenerate_sets() {
        let p = [0.1, 0.6, 0.3];
        let v = [2.0, -1.0, 4.0];
        let full = UncertaintySet::adjacent(1.0).unwrap();
        assert_eq!(lp_support_oracle(&full, &p, &v, &[1]).unwrap(), -1.0);
        assert_eq!(lp_support_oracle(&full, &p, &v, &[0, 1, 2]).unwrap(), 4.0);
        let big = vec![0.0; 13];
        assert!(lp_support_oracle(&full, &big, &big, &[0]).is_err());
    }

    #[test]
    fn level_out_of_range() {
        assert!(UncertaintySet::adjacent(1.5).is_err());
        assert!(UncertaintySet::r_contamination(-0.1).is_err());
    }

    /// 2 states, 1 action, p(.|0) = [0.5,0.5], p(.|1) = [0,1], c = [1,0],
    /// gamma = 0.5, R = 0.5, N_s = {s}:
    ///   Q1 = 0 + 0.5 (0.5 Q1 + 0.5 Q1) => Q1 = 0
    ///   Q0 = 1 + 0.5 (0.5 (0.5 Q0 + 0.5 Q1) + 0.5 Q0) => Q0 = 1 / (1 - 0.375) = 1.6
    #[test]
    fn two_state_fixed_point_matches_hand_solution() {
        let mdp = TabularMdp::new(2, 1, vec![0.5, 0.5, 0.0, 1.0], vec![1.0, 0.0], 0.5).unwrap();
        let n = NeighborTable::from_sets(vec![vec![0], vec![1]]).unwrap();
        let set = UncertaintySet::adjacent(0.5).unwrap();
        let vi = robust_value_iteration(&mdp, &set, &n, 1e-12, 10_000, None).unwrap();
        assert!(vi.converged);
        assert!((vi.q.get(0, 0) - 1.6).abs() < 1e-10);
        assert!(vi.q.get(1, 0).abs() < 1e-10);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let mdp = TabularMdp::new(1, 1, vec![1.0], vec![1.0], 0.99).unwrap();
        let n = NeighborTable::complete(1);
        let vi = robust_value_iteration(&mdp, &UncertaintySet::nominal(), &n, 1e-12, 5, None).unwrap();
        assert!(!vi.converged);
        assert_eq!(vi.iterations, 5);
    }
}
