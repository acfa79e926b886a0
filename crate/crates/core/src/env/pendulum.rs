use std::f64::consts::PI;

use rand::Rng;

use super::{ContinuousActions, Environment, Parameterized, Step, VectorObservation};
use crate::{prng, Error, Prng, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumParams {
    pub g: f64,
    pub m: f64,
    pub l: f64,
    pub dt: f64,
    pub max_speed: f64,
    pub max_torque: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            g: 10.0,
            m: 1.0,
            l: 1.0,
            dt: 0.05,
            max_speed: 8.0,
            max_torque: 2.0,
        }
    }
}

/// Single-link pendulum swing-up; `theta = 0` is upright.
///
/// Per-step cost `theta^2 + 0.1 theta_dot^2 + 0.001 u^2` with theta wrapped to
/// `[-pi, pi]`. Episodes run 200 steps with no early termination. Out-of-range
/// torques are clamped and counted in [`Pendulum::clamped_actions`].
#[derive(Debug, Clone)]
pub struct Pendulum {
    pub params: PendulumParams,
    state: [f64; 2],
    rng: Prng,
    clamped: usize,
}

pub fn pendulum_env() -> Pendulum {
    Pendulum {
        params: PendulumParams::default(),
        state: [0.0; 2],
        rng: prng(0),
        clamped: 0,
    }
}

pub fn wrap_angle(theta: f64) -> f64 {
    (theta + PI).rem_euclid(2.0 * PI) - PI
}

impl Pendulum {
    pub fn cost(state: &[f64; 2], torque: f64) -> f64 {
        let th = wrap_angle(state[0]);
        th * th + 0.1 * state[1] * state[1] + 0.001 * torque * torque
    }

    pub fn clamped_actions(&self) -> usize {
        self.clamped
    }

    /// Pure transition for an already clamped torque.
    pub fn dynamics(&self, state: &[f64; 2], torque: f64) -> [f64; 2] {
        let p = &self.params;
        let [th, thdot] = *state;
        let acc = 3.0 * p.g / (2.0 * p.l) * th.sin() + 3.0 / (p.m * p.l * p.l) * torque;
        let new_thdot = (thdot + acc * p.dt).clamp(-p.max_speed, p.max_speed);
        [th + new_thdot * p.dt, new_thdot]
    }
}

impl Environment for Pendulum {
    type State = [f64; 2];
    type Action = Vec<f64>;

    fn reset(&mut self, seed: u64) -> [f64; 2] {
        self.rng = prng(seed);
        self.state = [self.rng.gen_range(-PI..PI), self.rng.gen_range(-1.0..1.0)];
        self.state
    }

    fn step(&mut self, action: &Vec<f64>) -> Step<[f64; 2]> {
        let raw = action.first().copied().unwrap_or(0.0);
        let max = self.params.max_torque;
        let u = raw.clamp(-max, max);
        if u != raw {
            self.clamped += 1;
        }
        let cost = Self::cost(&self.state, u);
        self.state = self.dynamics(&self.state, u);
        Step {
            state: self.state,
            cost,
            terminal: false,
        }
    }

    fn state(&self) -> [f64; 2] {
        self.state
    }

    fn set_state(&mut self, state: &[f64; 2]) -> Result<()> {
        self.state = *state;
        Ok(())
    }

    fn random_action(&self, rng: &mut Prng) -> Vec<f64> {
        let max = self.params.max_torque;
        vec![rng.gen_range(-max..=max)]
    }

    fn max_episode_steps(&self) -> usize {
        200
    }
}

impl ContinuousActions for Pendulum {
    fn action_low(&self) -> Vec<f64> {
        vec![-self.params.max_torque]
    }

    fn action_high(&self) -> Vec<f64> {
        vec![self.params.max_torque]
    }
}

impl VectorObservation for Pendulum {
    fn obs_dim(&self) -> usize {
        3
    }

    fn observe(&self, state: &[f64; 2]) -> Vec<f64> {
        let (sin, cos) = state[0].sin_cos();
        vec![cos, sin, state[1]]
    }
}

impl Parameterized for Pendulum {
    fn param_names(&self) -> &'static [&'static str] {
        &["g", "m", "l", "dt"]
    }

    fn param(&self, name: &str) -> Option<f64> {
        let p = &self.params;
        Some(match name {
            "g" => p.g,
            "m" => p.m,
            "l" => p.l,
            "dt" => p.dt,
            _ => return None,
        })
    }

    fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::Config(format!("parameter {name} must be positive, got {value}")));
        }
        let p = &mut self.params;
        let slot = match name {
            "g" => &mut p.g,
            "m" => &mut p.m,
            "l" => &mut p.l,
            "dt" => &mut p.dt,
            _ => return Err(Error::Config(format!("unknown pendulum parameter `{name}`"))),
        };
        *slot = value;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_at_rest_and_hanging() {
        assert_eq!(Pendulum::cost(&[0.0, 0.0], 0.0), 0.0);
        assert!((Pendulum::cost(&[PI, 0.0], 0.0) - PI * PI).abs() < 1e-12);
    }

    #[test]
    fn opposite_torques_mirror_trajectories() {
        let mut a = pendulum_env();
        let mut b = pendulum_env();
        a.set_state(&[0.7, -0.4]).unwrap();
        b.set_state(&[-0.7, 0.4]).unwrap();
        for _ in 0..50 {
            let sa = a.step(&vec![2.0]);
            let sb = b.step(&vec![-2.0]);
            assert!((sa.state[0] + sb.state[0]).abs() < 1e-12);
            assert!((sa.state[1] + sb.state[1]).abs() < 1e-12);
            assert!((sa.cost - sb.cost).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_range_torque_is_clamped() {
        let mut a = pendulum_env();
        let mut b = pendulum_env();
        a.set_state(&[0.3, 0.0]).unwrap();
        b.set_state(&[0.3, 0.0]).unwrap();
        let sa = a.step(&vec![5.0]);
        let sb = b.step(&vec![2.0]);
        assert_eq!(sa, sb);
        assert_eq!(a.clamped_actions(), 1);
    }

    #[test]
    fn angle_wrapping() {
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_angle(-0.25) + 0.25).abs() < 1e-15);
    }
}
