use rand::Rng;

use super::{DiscreteActions, Environment, Outcome, Step, TabularEnv, VectorObservation};
use crate::neighbors::NeighborTable;
use crate::{prng, Error, Prng, Result};

/// Grid moves. The index order matches FrozenLake's action encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Left = 0,
    Down = 1,
    Right = 2,
    Up = 3,
}

impl Move {
    pub const ALL: [Move; 4] = [Move::Left, Move::Down, Move::Right, Move::Up];

    pub fn from_index(a: usize) -> Move {
        Move::ALL[a % 4]
    }

    pub fn arrow(self) -> char {
        match self {
            Move::Left => '<',
            Move::Down => 'v',
            Move::Right => '>',
            Move::Up => '^',
        }
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Move::Left => (0, -1),
            Move::Down => (1, 0),
            Move::Right => (0, 1),
            Move::Up => (-1, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HazardKind {
    /// Entering the cell costs `hazard_cost` and teleports the agent to the start.
    Cliff,
    /// Entering the cell ends the episode.
    Hole,
}

/// Rectangular gridworld with cliffs or holes.
#[derive(Debug, Clone)]
pub struct GridEnv {
    rows: usize,
    cols: usize,
    start: usize,
    goal: usize,
    hazards: Vec<bool>,
    hazard_kind: HazardKind,
    slippery: bool,
    step_cost: f64,
    hazard_cost: f64,
    goal_cost: f64,
    max_steps: usize,
    pos: usize,
    rng: Prng,
}

/// The 4x12 cliff walk: start bottom-left, goal bottom-right, cliff in between.
///
/// Every move costs 1; stepping into the cliff costs 100 and returns the agent
/// to the start.
pub fn cliffwalking_env() -> GridEnv {
    let (rows, cols) = (4, 12);
    let mut hazards = vec![false; rows * cols];
    for c in 1..cols - 1 {
        hazards[(rows - 1) * cols + c] = true;
    }
    GridEnv {
        rows,
        cols,
        start: (rows - 1) * cols,
        goal: rows * cols - 1,
        hazards,
        hazard_kind: HazardKind::Cliff,
        slippery: false,
        step_cost: 1.0,
        hazard_cost: 100.0,
        goal_cost: 1.0,
        max_steps: 500,
        pos: (rows - 1) * cols,
        rng: prng(0),
    }
}

const FROZENLAKE_8X8: [&str; 8] = [
    "SFFFFFFF", "FFFFFFFF", "FFFHFFFF", "FFFFFHFF", "FFFHFFFF", "FHHFFFHF", "FHFFHFHF", "FFFHFFFG",
];

/// The standard 8x8 FrozenLake map. Reaching the goal has reward 1 (cost -1),
/// everything else reward 0; holes and the goal end the episode.
///
/// Slippery moves go in the intended direction or either perpendicular one,
/// each with probability 1/3.
pub fn frozenlake_env(size: usize, slippery: bool) -> Result<GridEnv> {
    if size != 8 {
        return Err(Error::Config(format!("unsupported FrozenLake size {size}; only 8 is available")));
    }
    let mut hazards = Vec::with_capacity(64);
    let (mut start, mut goal) = (0, 0);
    for (r, line) in FROZENLAKE_8X8.iter().enumerate() {
        for (c, ch) in line.chars().enumerate() {
            let idx = r * 8 + c;
            hazards.push(ch == 'H');
            match ch {
                'S' => start = idx,
                'G' => goal = idx,
                _ => {}
            }
        }
    }
    Ok(GridEnv {
        rows: 8,
        cols: 8,
        start,
        goal,
        hazards,
        hazard_kind: HazardKind::Hole,
        slippery,
        step_cost: 0.0,
        hazard_cost: 0.0,
        goal_cost: -1.0,
        max_steps: 200,
        pos: start,
        rng: prng(0),
    })
}

impl GridEnv {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn goal(&self) -> usize {
        self.goal
    }

    pub fn is_hazard(&self, s: usize) -> bool {
        self.hazards[s]
    }

    pub fn is_slippery(&self) -> bool {
        self.slippery
    }

    pub fn cell(&self, s: usize) -> (usize, usize) {
        (s / self.cols, s % self.cols)
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    /// Checks the layout invariants. Cliff grids additionally need
    /// `hazard_cost > step_cost >= 0`.
    pub fn validate(&self) -> Result<()> {
        let n = self.rows * self.cols;
        if self.start >= n || self.goal >= n {
            return Err(Error::Config("start or goal outside the grid".into()));
        }
        if self.hazards[self.start] {
            return Err(Error::Config("start cell is a hazard".into()));
        }
        if self.hazard_kind == HazardKind::Cliff && !(self.hazard_cost > self.step_cost && self.step_cost >= 0.0) {
            return Err(Error::Config("cliff cost must exceed the step cost".into()));
        }
        Ok(())
    }

    fn moved(&self, s: usize, m: Move) -> usize {
        let (r, c) = self.cell(s);
        let (dr, dc) = m.delta();
        let nr = (r as isize + dr).clamp(0, self.rows as isize - 1) as usize;
        let nc = (c as isize + dc).clamp(0, self.cols as isize - 1) as usize;
        self.index(nr, nc)
    }

    /// Outcome of landing on `cell`.
    fn land(&self, cell: usize) -> (usize, f64, bool) {
        if cell == self.goal {
            (cell, self.goal_cost, true)
        } else if self.hazards[cell] {
            match self.hazard_kind {
                HazardKind::Cliff => (self.start, self.hazard_cost, false),
                HazardKind::Hole => (cell, self.hazard_cost, true),
            }
        } else {
            (cell, self.step_cost, false)
        }
    }

    fn intended_moves(&self, a: usize) -> Vec<(Move, f64)> {
        if self.slippery {
            let third = 1.0 / 3.0;
            vec![
                (Move::from_index(a + 3), third),
                (Move::from_index(a), third),
                (Move::from_index(a + 1), third),
            ]
        } else {
            vec![(Move::from_index(a), 1.0)]
        }
    }

    /// ASCII map; `overlay` may replace the glyph of any non-special cell.
    pub fn render_ascii(&self, overlay: impl Fn(usize) -> Option<char>) -> String {
        let mut out = String::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                let s = self.index(r, c);
                let glyph = if s == self.goal {
                    'G'
                } else if self.hazards[s] {
                    match self.hazard_kind {
                        HazardKind::Cliff => 'C',
                        HazardKind::Hole => 'H',
                    }
                } else {
                    overlay(s).unwrap_or(if s == self.start { 'S' } else { '.' })
                };
                out.push(glyph);
                if c + 1 < self.cols {
                    out.push(' ');
                }
            }
            out.push('\n');
        }
        out
    }
}

impl Environment for GridEnv {
    type State = usize;
    type Action = usize;

    fn reset(&mut self, seed: u64) -> usize {
        self.rng = prng(seed);
        self.pos = self.start;
        self.pos
    }

    fn step(&mut self, action: &usize) -> Step<usize> {
        let outcomes = self.outcomes(self.pos, *action);
        let mut u: f64 = if outcomes.len() > 1 { self.rng.gen() } else { 0.0 };
        let mut chosen = outcomes[outcomes.len() - 1];
        for o in &outcomes {
            if u < o.prob {
                chosen = *o;
                break;
            }
            u -= o.prob;
        }
        self.pos = chosen.next;
        Step {
            state: chosen.next,
            cost: chosen.cost,
            terminal: chosen.terminal,
        }
    }

    fn state(&self) -> usize {
        self.pos
    }

    fn set_state(&mut self, state: &usize) -> Result<()> {
        if *state >= self.rows * self.cols {
            return Err(Error::Index {
                what: "grid cell",
                index: *state,
                size: self.rows * self.cols,
            });
        }
        self.pos = *state;
        Ok(())
    }

    fn random_action(&self, rng: &mut Prng) -> usize {
        rng.gen_range(0..4)
    }

    fn max_episode_steps(&self) -> usize {
        self.max_steps
    }
}

impl DiscreteActions for GridEnv {
    fn n_actions(&self) -> usize {
        4
    }
}

impl TabularEnv for GridEnv {
    fn n_states(&self) -> usize {
        self.rows * self.cols
    }

    fn outcomes(&self, s: usize, a: usize) -> Vec<Outcome> {
        if self.is_terminal(s) {
            return vec![Outcome {
                next: s,
                prob: 1.0,
                cost: 0.0,
                terminal: true,
            }];
        }
        let mut out: Vec<Outcome> = Vec::with_capacity(3);
        for (m, prob) in self.intended_moves(a) {
            let (next, cost, terminal) = self.land(self.moved(s, m));
            match out.iter_mut().find(|o| o.next == next && o.cost == cost && o.terminal == terminal) {
                Some(o) => o.prob += prob,
                None => out.push(Outcome {
                    next,
                    prob,
                    cost,
                    terminal,
                }),
            }
        }
        out
    }

    fn is_terminal(&self, s: usize) -> bool {
        s == self.goal || (self.hazard_kind == HazardKind::Hole && self.hazards[s])
    }
}

/// One-hot cell encoding, so the DQN family can also run on grids.
impl VectorObservation for GridEnv {
    fn obs_dim(&self) -> usize {
        self.rows * self.cols
    }

    fn observe(&self, state: &usize) -> Vec<f64> {
        let mut v = vec![0.0; self.rows * self.cols];
        v[*state] = 1.0;
        v
    }
}

/// Exact neighbouring sets `N_s = { s' : p(s' | s, a) > 0 for some a }`.
pub fn true_neighbor_sets<E: TabularEnv>(env: &E) -> NeighborTable {
    let n = env.n_states();
    let mut table = NeighborTable::new(n);
    for s in 0..n {
        for a in 0..env.n_actions() {
            for o in env.outcomes(s, a) {
                if o.prob > 0.0 {
                    table.insert(s, o.next);
                }
            }
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cliff_step_right_from_start_hits_cliff() {
        let mut env = cliffwalking_env();
        let start = env.reset(0);
        let step = env.step(&(Move::Right as usize));
        assert_eq!(step.cost, 100.0);
        assert_eq!(step.state, start);
        assert!(!step.terminal);
    }

    #[test]
    fn cliff_step_up_from_start() {
        let mut env = cliffwalking_env();
        env.reset(0);
        let step = env.step(&(Move::Up as usize));
        assert_eq!(step.state, env.index(2, 0));
        assert_eq!(step.cost, 1.0);
    }

    #[test]
    fn cliff_goal_terminates() {
        let mut env = cliffwalking_env();
        env.reset(0);
        env.set_state(&env.index(2, 11)).unwrap();
        let step = env.step(&(Move::Down as usize));
        assert_eq!(step.state, env.goal());
        assert!(step.terminal);
    }

    #[test]
    fn cliff_neighbor_sets() {
        let env = cliffwalking_env();
        let n = true_neighbor_sets(&env);
        let interior = env.index(1, 5);
        let expected: Vec<usize> = vec![env.index(0, 5), env.index(1, 4), env.index(1, 6), env.index(2, 5)];
        let mut got = n.get(interior).to_vec();
        got.sort();
        let mut exp = expected;
        exp.sort();
        assert_eq!(got, exp);
        // start: right goes to the cliff and back to start, left/down bump the wall
        assert!(n.contains(env.start(), env.start()));
        // cliff-edge cells can fall back to start
        assert!(n.contains(env.index(2, 5), env.start()));
        // top-left corner: bumps make it its own neighbour
        assert!(n.contains(0, 0));
    }

    #[test]
    fn frozenlake_rejects_other_sizes() {
        assert!(matches!(frozenlake_env(4, false), Err(Error::Config(_))));
    }

    #[test]
    fn frozenlake_deterministic_move() {
        let mut env = frozenlake_env(8, false).unwrap();
        env.reset(3);
        env.set_state(&env.index(1, 1)).unwrap();
        let o = env.outcomes(env.index(1, 1), Move::Right as usize);
        assert_eq!(o.len(), 1);
        assert_eq!(o[0].next, env.index(1, 2));
        assert_eq!(o[0].prob, 1.0);
    }

    #[test]
    fn frozenlake_corner_has_at_most_three_neighbors() {
        let env = frozenlake_env(8, false).unwrap();
        let n = true_neighbor_sets(&env);
        assert!(n.get(0).len() <= 3);
        assert!(n.contains(0, 0));
    }

    #[test]
    fn frozenlake_hole_terminates_with_zero_reward() {
        let mut env = frozenlake_env(8, false).unwrap();
        env.reset(0);
        // (2,3) is a hole; step down from (1,3)
        env.set_state(&env.index(1, 3)).unwrap();
        let step = env.step(&(Move::Down as usize));
        assert!(step.terminal);
        assert_eq!(step.cost, 0.0);
        assert!(env.is_hazard(step.state));
    }

    #[test]
    fn slippery_kernel_rows_sum_to_one() {
        let env = frozenlake_env(8, true).unwrap();
        for s in 0..64 {
            for a in 0..4 {
                let total: f64 = env.outcomes(s, a).iter().map(|o| o.prob).sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn layouts_validate() {
        assert!(cliffwalking_env().validate().is_ok());
        assert!(frozenlake_env(8, true).unwrap().validate().is_ok());
    }
}
