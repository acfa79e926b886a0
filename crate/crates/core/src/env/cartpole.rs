use rand::Rng;

use super::{DiscreteActions, Environment, Parameterized, Step, VectorObservation};
use crate::{prng, Error, Prng, Result};

/// Physical constants of the cart-pole (SI units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPoleParams {
    pub gravity: f64,
    pub masscart: f64,
    pub masspole: f64,
    /// Half the pole length.
    pub length: f64,
    pub force_mag: f64,
    /// Euler time step.
    pub tau: f64,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        Self {
            gravity: 9.8,
            masscart: 1.0,
            masspole: 0.1,
            length: 0.5,
            force_mag: 10.0,
            tau: 0.02,
        }
    }
}

const X_THRESHOLD: f64 = 2.4;
const THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;

/// Classic cart-pole balancing task with two push actions.
///
/// Cost is -1 for every step taken (the terminating step included). The
/// episode ends when `|x| > 2.4` or `|theta| > 12 deg`; callers truncate at 500 steps.
#[derive(Debug, Clone)]
pub struct CartPole {
    pub params: CartPoleParams,
    state: [f64; 4],
    rng: Prng,
}

pub fn cartpole_env() -> CartPole {
    CartPole {
        params: CartPoleParams::default(),
        state: [0.0; 4],
        rng: prng(0),
    }
}

impl CartPole {
    /// Second derivatives `(x_acc, theta_acc)` at `state` under `force`.
    pub fn accelerations(&self, state: &[f64; 4], force: f64) -> (f64, f64) {
        let p = &self.params;
        let [_, _, theta, theta_dot] = *state;
        let total_mass = p.masspole + p.masscart;
        let polemass_length = p.masspole * p.length;
        let (sin, cos) = theta.sin_cos();
        let temp = (force + polemass_length * theta_dot * theta_dot * sin) / total_mass;
        let theta_acc =
            (p.gravity * sin - cos * temp) / (p.length * (4.0 / 3.0 - p.masspole * cos * cos / total_mass));
        let x_acc = temp - polemass_length * theta_acc * cos / total_mass;
        (x_acc, theta_acc)
    }

    /// Pure Euler transition; `action` 0 pushes left, anything else right.
    pub fn dynamics(&self, state: &[f64; 4], action: usize) -> [f64; 4] {
        let force = if action == 1 {
            self.params.force_mag
        } else {
            -self.params.force_mag
        };
        let (x_acc, theta_acc) = self.accelerations(state, force);
        let [x, x_dot, theta, theta_dot] = *state;
        let tau = self.params.tau;
        [
            x + tau * x_dot,
            x_dot + tau * x_acc,
            theta + tau * theta_dot,
            theta_dot + tau * theta_acc,
        ]
    }

    pub fn is_failure(state: &[f64; 4]) -> bool {
        state[0].abs() > X_THRESHOLD || state[2].abs() > THETA_THRESHOLD
    }
}

impl Environment for CartPole {
    type State = [f64; 4];
    type Action = usize;

    fn reset(&mut self, seed: u64) -> [f64; 4] {
        self.rng = prng(seed);
        for v in self.state.iter_mut() {
            *v = self.rng.gen_range(-0.05..0.05);
        }
        self.state
    }

    fn step(&mut self, action: &usize) -> Step<[f64; 4]> {
        self.state = self.dynamics(&self.state, *action);
        Step {
            state: self.state,
            cost: -1.0,
            terminal: Self::is_failure(&self.state),
        }
    }

    fn state(&self) -> [f64; 4] {
        self.state
    }

    fn set_state(&mut self, state: &[f64; 4]) -> Result<()> {
        self.state = *state;
        Ok(())
    }

    fn random_action(&self, rng: &mut Prng) -> usize {
        rng.gen_range(0..2)
    }

    fn max_episode_steps(&self) -> usize {
        500
    }
}

impl DiscreteActions for CartPole {
    fn n_actions(&self) -> usize {
        2
    }
}

impl VectorObservation for CartPole {
    fn obs_dim(&self) -> usize {
        4
    }

    fn observe(&self, state: &[f64; 4]) -> Vec<f64> {
        state.to_vec()
    }
}

impl Parameterized for CartPole {
    fn param_names(&self) -> &'static [&'static str] {
        &["gravity", "masscart", "masspole", "length", "force_mag", "tau"]
    }

    fn param(&self, name: &str) -> Option<f64> {
        let p = &self.params;
        Some(match name {
            "gravity" => p.gravity,
            "masscart" => p.masscart,
            "masspole" => p.masspole,
            "length" => p.length,
            "force_mag" => p.force_mag,
            "tau" => p.tau,
            _ => return None,
        })
    }

    fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::Config(format!("parameter {name} must be positive, got {value}")));
        }
        let p = &mut self.params;
        let slot = match name {
            "gravity" => &mut p.gravity,
            "masscart" => &mut p.masscart,
            "masspole" => &mut p.masspole,
            "length" => &mut p.length,
            "force_mag" => &mut p.force_mag,
            "tau" => &mut p.tau,
            _ => return Err(Error::Config(format!("unknown cart-pole parameter `{name}`"))),
        };
        *slot = value;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_state_accelerations_match_closed_form() {
        let env = cartpole_env();
        let (x_acc, theta_acc) = env.accelerations(&[0.0; 4], 10.0);
        // sin=0, cos=1: temp = F/M, theta_acc = -temp / (l (4/3 - m_p/M)), x_acc = temp - m_p l theta_acc / M
        let m = 1.1;
        let temp = 10.0 / m;
        let expected_theta = -temp / (0.5 * (4.0 / 3.0 - 0.1 / m));
        let expected_x = temp - 0.1 * 0.5 * expected_theta / m;
        assert!((theta_acc - expected_theta).abs() < 1e-10);
        assert!((x_acc - expected_x).abs() < 1e-10);
    }

    #[test]
    fn mirrored_states_give_mirrored_successors() {
        let env = cartpole_env();
        let s = [0.1, -0.3, 0.05, 0.2];
        let m = [-0.1, 0.3, -0.05, -0.2];
        let a = env.dynamics(&s, 1);
        let b = env.dynamics(&m, 0);
        for i in 0..4 {
            assert!((a[i] + b[i]).abs() < 1e-15, "component {i}: {} vs {}", a[i], b[i]);
        }
    }

    #[test]
    fn alternating_actions_survive_beyond_ten_steps() {
        let mut env = cartpole_env();
        env.set_state(&[0.0; 4]).unwrap();
        for t in 0..11 {
            let step = env.step(&(t % 2));
            assert!(!step.terminal, "fell at step {t}");
        }
    }

    #[test]
    fn unknown_and_nonpositive_parameters_rejected() {
        let mut env = cartpole_env();
        assert!(env.set_param("length", 0.0).is_err());
        assert!(env.set_param("colour", 1.0).is_err());
        env.set_param("length", 1.0).unwrap();
        assert_eq!(env.param("length"), Some(1.0));
    }
}
