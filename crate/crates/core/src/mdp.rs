//! Finite MDPs, action-value tables and policies.
//!
//! Costs are minimised throughout, so `V(s) = min_a Q(s, a)` and greedy
//! policies take the argmin (lowest action index on ties).

use std::fmt;

use rand::Rng;

use crate::{Error, Prng, Result};

const ROW_SUM_TOL: f64 = 1e-9;

/// A nominal MDP `(S, A, P, c, gamma)` with dense storage.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// `kernel[(s * n_actions + a) * n_states + s']`
    kernel: Vec<f64>,
    /// `cost[s * n_actions + a]`
    cost: Vec<f64>,
    gamma: f64,
}

impl TabularMdp {
    /// Builds an MDP from row-major tables without validating them; use
    /// [`validate_mdp`] to inspect the invariants.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        kernel: Vec<f64>,
        cost: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Shape("an MDP needs at least one state and one action".into()));
        }
        if kernel.len() != n_states * n_actions * n_states {
            return Err(Error::Shape(format!(
                "kernel has {} entries, expected {}",
                kernel.len(),
                n_states * n_actions * n_states
            )));
        }
        if cost.len() != n_states * n_actions {
            return Err(Error::Shape(format!(
                "cost table has {} entries, expected {}",
                cost.len(),
                n_states * n_actions
            )));
        }
        Ok(Self {
            n_states,
            n_actions,
            kernel,
            cost,
            gamma,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn cost(&self, s: usize, a: usize) -> f64 {
        self.cost[s * self.n_actions + a]
    }

    /// Successor distribution `p(. | s, a)`.
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.kernel[start..start + self.n_states]
    }

    pub fn row_mut(&mut self, s: usize, a: usize) -> &mut [f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &mut self.kernel[start..start + self.n_states]
    }

    pub fn set_cost(&mut self, s: usize, a: usize, c: f64) {
        self.cost[s * self.n_actions + a] = c;
    }

    pub fn set_gamma(&mut self, gamma: f64) {
        self.gamma = gamma;
    }

    /// Parses the plain-text matrix format.
    ///
    /// ```text
    /// # comments and blank lines are ignored
    /// <states> <actions> <gamma>
    /// <states lines of <actions> costs>
    /// <states*actions lines of <states> probabilities, ordered (s0,a0), (s0,a1), ...>
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let (hline, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::parse(hline, "header must be `states actions gamma`"));
        }
        let n_states: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(hline, "bad state count"))?;
        let n_actions: usize = fields[1]
            .parse()
            .map_err(|_| Error::parse(hline, "bad action count"))?;
        let gamma: f64 = fields[2]
            .parse()
            .map_err(|_| Error::parse(hline, "bad discount"))?;

        let mut read_row = |width: usize, what: &str| -> Result<Vec<f64>> {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("unexpected end of input reading {what}")))?;
            let row = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map_err(|_| Error::parse(ln, format!("bad number `{t}`"))))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != width {
                return Err(Error::parse(
                    ln,
                    format!("{what} row has {} values, expected {width}", row.len()),
                ));
            }
            Ok(row)
        };

        let mut cost = Vec::with_capacity(n_states * n_actions);
        for _ in 0..n_states {
            cost.extend(read_row(n_actions, "cost")?);
        }
        let mut kernel = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            kernel.extend(read_row(n_states, "kernel")?);
        }
        Self::new(n_states, n_actions, kernel, cost, gamma)
    }

    /// Inverse of [`TabularMdp::parse`]; floats use the shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.n_states, self.n_actions, self.gamma);
        out.push_str("# costs\n");
        for s in 0..self.n_states {
            let row: Vec<String> = (0..self.n_actions).map(|a| self.cost(s, a).to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out.push_str("# kernel\n");
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let row: Vec<String> = self.row(s, a).iter().map(f64::to_string).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
        out
    }
}

/// One broken invariant found by [`validate_mdp`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RowSum { s: usize, a: usize, sum: f64 },
    NegativeProbability { s: usize, a: usize, next: usize, p: f64 },
    NonFiniteCost { s: usize, a: usize },
    Gamma(f64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowSum { s, a, sum } => write!(f, "row sum {sum} at (s={s},a={a})"),
            Violation::NegativeProbability { s, a, next, p } => {
                write!(f, "negative probability {p} to s'={next} at (s={s},a={a})")
            }
            Violation::NonFiniteCost { s, a } => write!(f, "non-finite cost at (s={s},a={a})"),
            Violation::Gamma(g) => write!(f, "gamma out of (0,1): {g}"),
        }
    }
}

/// Lists every violated `TabularMdp` invariant; empty means valid.
pub fn validate_mdp(mdp: &TabularMdp) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(mdp.gamma > 0.0 && mdp.gamma < 1.0) {
        out.push(Violation::Gamma(mdp.gamma));
    }
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            let row = mdp.row(s, a);
            for (next, &p) in row.iter().enumerate() {
                if p < 0.0 || !p.is_finite() {
                    out.push(Violation::NegativeProbability { s, a, next, p });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                out.push(Violation::RowSum { s, a, sum });
            }
            if !mdp.cost(s, a).is_finite() {
                out.push(Violation::NonFiniteCost { s, a });
            }
        }
    }
    out
}

/// Random MDP with sparse rows: each `(s, a)` moves to between one and
/// `max_support` distinct successors with random weights; costs are uniform
/// on `[0, 1)`.
pub fn random_mdp(n_states: usize, n_actions: usize, max_support: usize, gamma: f64, rng: &mut Prng) -> Result<TabularMdp> {
    if max_support == 0 {
        return Err(Error::Config("successor support must be at least 1".into()));
    }
    let mut kernel = vec![0.0; n_states * n_actions * n_states];
    for row in kernel.chunks_exact_mut(n_states.max(1)) {
        let k = rng.gen_range(1..=max_support.min(n_states));
        let support = rand::seq::index::sample(rng, n_states, k);
        let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        for (next, w) in support.iter().zip(weights) {
            row[next] = w / total;
        }
    }
    let cost = (0..n_states * n_actions).map(|_| rng.gen::<f64>()).collect();
    TabularMdp::new(n_states, n_actions, kernel, cost, gamma)
}

/// Dense `|S| x |A|` table of action values.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn from_values(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::Shape(format!(
                "{} values for a {n_states}x{n_actions} table",
                values.len()
            )));
        }
        Ok(Self {
            n_states,
            n_actions,
            values,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `min_a Q(s, a)` without bounds checking beyond the slice index.
    #[inline]
    pub fn min_value(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Lowest-index argmin of `Q(s, .)`.
    #[inline]
    pub fn argmin(&self, s: usize) -> usize {
        argmin(self.row(s))
    }

    /// Vector of `V(s) = min_a Q(s, a)` over all states.
    pub fn state_values(&self) -> Vec<f64> {
        (0..self.n_states).map(|s| self.min_value(s)).collect()
    }

    /// `max |Q1 - Q2|`.
    pub fn sup_distance(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// One CSV line per state, one column per action.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for s in 0..self.n_states {
            let row: Vec<String> = self.row(s).iter().map(f64::to_string).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        let mut n_actions = None;
        let mut n_states = 0;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| Error::parse(i + 1, format!("bad number `{t}`"))))
                .collect::<Result<Vec<_>>>()?;
            match n_actions {
                None => n_actions = Some(row.len()),
                Some(n) if n != row.len() => {
                    return Err(Error::parse(i + 1, format!("expected {n} columns, found {}", row.len())))
                }
                _ => {}
            }
            values.extend(row);
            n_states += 1;
        }
        let n_actions = n_actions.ok_or_else(|| Error::parse(1, "empty table"))?;
        Self::from_values(n_states, n_actions, values)
    }
}

/// Lowest-index argmin of a non-empty slice.
#[inline]
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// `V(s) = min_a Q(s, a)`.
pub fn state_value(q: &QTable, s: usize) -> Result<f64> {
    if s >= q.n_states {
        return Err(Error::Index {
            what: "state",
            index: s,
            size: q.n_states,
        });
    }
    Ok(q.min_value(s))
}

/// A tabular policy, deterministic or stochastic.
#[derive(Debug, Clone, PartialEq)]
pub enum TabularPolicy {
    Deterministic(Vec<usize>),
    Stochastic(Vec<Vec<f64>>),
}

impl TabularPolicy {
    /// Checks the policy invariants against an action count.
    pub fn validate(&self, n_actions: usize) -> Result<()> {
        match self {
            TabularPolicy::Deterministic(actions) => {
                if let Some((s, &a)) = actions.iter().enumerate().find(|(_, &a)| a >= n_actions) {
                    return Err(Error::Contract(format!("action {a} at state {s} >= {n_actions}")));
                }
            }
            TabularPolicy::Stochastic(rows) => {
                for (s, row) in rows.iter().enumerate() {
                    if row.len() != n_actions || row.iter().any(|&p| p < 0.0) {
                        return Err(Error::Contract(format!("bad probability row at state {s}")));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > ROW_SUM_TOL {
                        return Err(Error::Contract(format!("row sum {sum} at state {s}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// The deterministic action, or `None` for a stochastic policy.
    pub fn action(&self, s: usize) -> Option<usize> {
        match self {
            TabularPolicy::Deterministic(actions) => actions.get(s).copied(),
            TabularPolicy::Stochastic(_) => None,
        }
    }
}

/// Argmin-greedy deterministic policy of a Q-table.
pub fn greedy_policy(q: &QTable) -> TabularPolicy {
    TabularPolicy::Deterministic((0..q.n_states).map(|s| q.argmin(s)).collect())
}
