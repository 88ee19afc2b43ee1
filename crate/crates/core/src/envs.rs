//! Seeded continuous-control tasks: the classic torque-limited pendulum and
//! a two-attractor point mass.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvId {
    Pendulum,
    PointMass,
}

impl EnvId {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvId::Pendulum => "pendulum",
            EnvId::PointMass => "pointmass",
        }
    }

    pub fn make(self) -> Box<dyn Env> {
        match self {
            EnvId::Pendulum => Box::new(Pendulum::default()),
            EnvId::PointMass => Box::new(PointMass::default()),
        }
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pendulum" => Ok(EnvId::Pendulum),
            "pointmass" => Ok(EnvId::PointMass),
            other => Err(Error::UnknownEnv(other.to_string())),
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// Horizon reached.
    pub done: bool,
}

/// An episodic task. `reset` fully determines the episode from `seed`.
pub trait Env: Send {
    fn obs_dim(&self) -> usize;
    fn action_low(&self) -> Vec<f64>;
    fn action_high(&self) -> Vec<f64>;
    fn horizon(&self) -> usize;
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Result<StepResult>;

    fn action_dim(&self) -> usize {
        self.action_low().len()
    }
}

pub fn env_reset(env: EnvId, seed: u64) -> (Box<dyn Env>, Vec<f64>) {
    let mut e = env.make();
    let obs = e.reset(seed);
    (e, obs)
}

fn check_action(action: &[f64], dim: usize) -> Result<()> {
    if action.len() != dim {
        return Err(Error::Dimension {
            context: "action",
            expected: dim,
            actual: action.len(),
        });
    }
    if action.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("action".into()));
    }
    Ok(())
}

/// Maps an angle into (−π, π].
pub fn wrap_angle(theta: f64) -> f64 {
    PI - (PI - theta).rem_euclid(2.0 * PI)
}

#[derive(Debug, Clone)]
pub struct Pendulum {
    pub theta: f64,
    pub theta_dot: f64,
    steps: usize,
}

impl Pendulum {
    pub const DT: f64 = 0.05;
    pub const G: f64 = 10.0;
    pub const MASS: f64 = 1.0;
    pub const LENGTH: f64 = 1.0;
    pub const MAX_SPEED: f64 = 8.0;
    pub const MAX_TORQUE: f64 = 2.0;
    pub const HORIZON: usize = 200;

    pub fn with_state(theta: f64, theta_dot: f64) -> Self {
        Self {
            theta,
            theta_dot,
            steps: 0,
        }
    }

    pub fn observation(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::with_state(0.0, 0.0)
    }
}

impl Env for Pendulum {
    fn obs_dim(&self) -> usize {
        3
    }

    fn action_low(&self) -> Vec<f64> {
        vec![-Self::MAX_TORQUE]
    }

    fn action_high(&self) -> Vec<f64> {
        vec![Self::MAX_TORQUE]
    }

    fn horizon(&self) -> usize {
        Self::HORIZON
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.theta = rng.random_range(-PI..PI);
        self.theta_dot = rng.random_range(-1.0..1.0);
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        check_action(action, 1)?;
        let u = action[0].clamp(-Self::MAX_TORQUE, Self::MAX_TORQUE);
        let (th, thdot) = (self.theta, self.theta_dot);
        let cost = wrap_angle(th).powi(2) + 0.1 * thdot * thdot + 0.001 * u * u;
        let accel = 3.0 * Self::G / (2.0 * Self::LENGTH) * th.sin()
            + 3.0 / (Self::MASS * Self::LENGTH * Self::LENGTH) * u;
        let new_thdot = (thdot + accel * Self::DT).clamp(-Self::MAX_SPEED, Self::MAX_SPEED);
        self.theta = th + new_thdot * Self::DT;
        self.theta_dot = new_thdot;
        self.steps += 1;
        Ok(StepResult {
            observation: self.observation(),
            reward: -cost,
            done: self.steps >= Self::HORIZON,
        })
    }
}

/// Point in the unit box moved by bounded velocity commands. The reward has a
/// wide global peak at (0.8, 0.8) and a narrow, lower one at (−0.5, −0.5).
#[derive(Debug, Clone, Default)]
pub struct PointMass {
    pub position: [f64; 2],
    steps: usize,
}

impl PointMass {
    pub const MAX_SPEED: f64 = 0.1;
    pub const HORIZON: usize = 100;
    pub const GOAL: [f64; 2] = [0.8, 0.8];
    pub const DISTRACTOR: [f64; 2] = [-0.5, -0.5];

    pub fn reward_at(p: [f64; 2]) -> f64 {
        let sq = |c: [f64; 2]| (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
        (-sq(Self::GOAL) / 0.02).exp() + 0.4 * (-sq(Self::DISTRACTOR) / 0.005).exp()
    }
}

impl Env for PointMass {
    fn obs_dim(&self) -> usize {
        2
    }

    fn action_low(&self) -> Vec<f64> {
        vec![-Self::MAX_SPEED; 2]
    }

    fn action_high(&self) -> Vec<f64> {
        vec![Self::MAX_SPEED; 2]
    }

    fn horizon(&self) -> usize {
        Self::HORIZON
    }

    fn reset(&mut self, _seed: u64) -> Vec<f64> {
        self.position = [0.0, 0.0];
        self.steps = 0;
        self.position.to_vec()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        check_action(action, 2)?;
        for (p, a) in self.position.iter_mut().zip(action) {
            *p = (*p + a.clamp(-Self::MAX_SPEED, Self::MAX_SPEED)).clamp(-1.0, 1.0);
        }
        self.steps += 1;
        Ok(StepResult {
            observation: self.position.to_vec(),
            reward: Self::reward_at(self.position),
            done: self.steps >= Self::HORIZON,
        })
    }
}
