//! Run configuration: a TOML tree with `ppo`, `esa`, `pipeline` and
//! `baselines` sections layered over per-environment defaults.
//!
//! ```toml
//! env = "pendulum"
//! method = "explorler"
//! seeds = [0, 1, 2, 3]
//! out = "runs"
//! smoothing_window = 10
//!
//! [ppo]
//! learning_rate = 0.001
//!
//! [esa]
//! num_neighbors = 6   # num_agents defaults to ceil(ppo.n_epochs / 2)
//!
//! [pipeline]
//! esa_interval = 10
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::envs::EnvId;
use crate::error::{Error, Result};
use crate::esa::EsaConfig;
use crate::pipeline::{BaselineConfig, ExperimentConfig, Method, PipelineConfig};
use crate::ppo::PpoConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvId,
    pub method: Method,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    /// Trailing moving-average window for suite statistics.
    pub smoothing_window: usize,
    pub ppo: PpoConfig,
    pub esa: EsaConfig,
    pub pipeline: PipelineConfig,
    pub baselines: BaselineConfig,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub env: Option<EnvId>,
    pub method: Option<Method>,
    pub seeds: Option<Vec<u64>>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn defaults(env: EnvId) -> Self {
        let (ppo, total_iterations) = match env {
            // 196 rollouts of 1024 steps is just over 200k environment steps.
            EnvId::Pendulum => (PpoConfig::pendulum(), 196),
            EnvId::PointMass => (
                PpoConfig {
                    learning_rate: 3e-4,
                    steps_per_rollout: 500,
                    batch_size: 50,
                    gamma: 0.98,
                    init_log_std: -1.0,
                    ..PpoConfig::pendulum()
                },
                60,
            ),
        };
        let esa = EsaConfig {
            num_agents: ppo.n_epochs.div_ceil(2),
            ..EsaConfig::default()
        };
        Self {
            env,
            method: Method::Explorler,
            seeds: vec![0, 1, 2, 3],
            out: PathBuf::from("runs"),
            smoothing_window: 10,
            ppo,
            esa,
            pipeline: PipelineConfig {
                total_iterations,
                ..PipelineConfig::default()
            },
            baselines: BaselineConfig::default(),
        }
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            env: self.env,
            method: self.method,
            ppo: self.ppo.clone(),
            esa: self.esa.clone(),
            pipeline: self.pipeline.clone(),
            baselines: self.baselines.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(config_err("seeds", "at least one seed is required"));
        }
        if let Some(&s) = self.seeds.iter().find(|&&s| s > i64::MAX as u64) {
            return Err(config_err("seeds", &format!("seed {s} does not fit a TOML integer")));
        }
        if self.smoothing_window == 0 {
            return Err(config_err("smoothing_window", "must be at least 1"));
        }
        self.experiment().validate()
    }

    /// Fully resolved TOML; parsing it back yields an equal config.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidArgument(format!("cannot encode config: {e}")))
    }

    pub fn parse(text: &str, overrides: &Overrides) -> Result<Self> {
        let user: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Format {
                path: PathBuf::from("<config>"),
                message: e.to_string(),
            })?;
        let env = match overrides.env {
            Some(env) => env,
            None => match user.get("env") {
                Some(Value::String(s)) => s.parse()?,
                Some(_) => return Err(config_err("env", "expected a string")),
                None => EnvId::Pendulum,
            },
        };
        if let Some(m) = user.get("method") {
            match m.as_str().map(str::parse::<Method>) {
                Some(Ok(_)) => {}
                _ => return Err(config_err("method", &format!("expected one of {}", method_names()))),
            }
        }
        let defaults = Self::defaults(env);
        let mut merged = Table::try_from(&defaults)
            .map_err(|e| Error::InvalidArgument(format!("cannot encode defaults: {e}")))?;
        merge(&mut merged, &user, "")?;
        let agents_given = user
            .get("esa")
            .and_then(Value::as_table)
            .is_some_and(|t| t.contains_key("num_agents"));

        let mut cfg: RunConfig = Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| config_err("<root>", &e.to_string()))?;
        cfg.env = env;
        if !agents_given {
            cfg.esa.num_agents = cfg.ppo.n_epochs.div_ceil(2);
        }
        if let Some(m) = overrides.method {
            cfg.method = m;
        }
        if let Some(seeds) = &overrides.seeds {
            cfg.seeds = seeds.clone();
        }
        if let Some(out) = &overrides.out {
            cfg.out = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, overrides).map_err(|e| match e {
            Error::Format { message, .. } => Error::Format {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }
}

fn config_err(key: &str, message: &str) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.to_string(),
    }
}

fn method_names() -> String {
    Method::ALL.map(Method::as_str).join(", ")
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

/// Overlays `user` on `base`, rejecting keys and types the defaults do not
/// have. Integers are accepted where floats are expected.
fn merge(base: &mut Table, user: &Table, prefix: &str) -> Result<()> {
    for (key, value) in user {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        let Some(slot) = base.get_mut(key) else {
            return Err(config_err(&path, "unknown key"));
        };
        match (slot, value) {
            (Value::Table(b), Value::Table(u)) => merge(b, u, &path)?,
            (Value::Table(_), other) => {
                return Err(config_err(&path, &format!("expected a table, got {}", type_name(other))))
            }
            (slot @ Value::Float(_), Value::Integer(i)) => *slot = Value::Float(*i as f64),
            (slot, value) if std::mem::discriminant(slot) == std::mem::discriminant(value) => {
                *slot = value.clone()
            }
            (slot, value) => {
                return Err(config_err(
                    &path,
                    &format!("expected {}, got {}", type_name(slot), type_name(value)),
                ))
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::parse(text, &Overrides::default())
    }

    #[test]
    fn empty_file_resolves_pendulum_defaults() {
        let cfg = parse("").unwrap();
        assert_eq!(cfg.env, EnvId::Pendulum);
        assert_eq!(cfg.ppo.learning_rate, 1e-3);
        assert_eq!(cfg.ppo.clip_epsilon, 0.2);
        assert_eq!(cfg.ppo.steps_per_rollout, 1024);
        assert_eq!(cfg.ppo.batch_size, 64);
        assert_eq!(cfg.ppo.gamma, 0.9);
        assert_eq!(cfg.ppo.gae_lambda, 0.95);
        assert_eq!(cfg.ppo.entropy_coef, 0.0);
        assert_eq!(cfg.esa.num_neighbors, 6);
        assert_eq!(cfg.esa.num_agents, 5);
        assert_eq!(cfg.pipeline.esa_interval, 10);
    }

    #[test]
    fn agents_follow_epochs_unless_given() {
        assert_eq!(parse("[ppo]\nn_epochs = 7").unwrap().esa.num_agents, 4);
        let cfg = parse("[ppo]\nn_epochs = 7\n[esa]\nnum_agents = 2").unwrap();
        assert_eq!(cfg.esa.num_agents, 2);
    }

    #[test]
    fn errors_name_the_key() {
        let key = |text: &str| match parse(text).unwrap_err() {
            Error::Config { key, .. } => key,
            other => panic!("unexpected {other}"),
        };
        assert_eq!(key("[ppo]\nlearning_rate = -0.1"), "ppo.learning_rate");
        assert_eq!(key("[ppo]\nlearnin_rate = 0.1"), "ppo.learnin_rate");
        assert_eq!(key("[esa]\nnum_steps = \"sixty\""), "esa.num_steps");
        assert_eq!(key("bogus = 1"), "bogus");
        assert_eq!(key("[pipeline]\neval_episodes = 0"), "pipeline.eval_episodes");
        assert!(matches!(parse("env = \"cartpole\""), Err(Error::UnknownEnv(_))));
        assert_eq!(key("method = \"sac\""), "method");
    }

    #[test]
    fn integers_widen_to_floats() {
        assert_eq!(parse("[ppo]\ninit_log_std = -1").unwrap().ppo.init_log_std, -1.0);
    }

    #[test]
    fn overrides_win() {
        let o = Overrides {
            env: Some(EnvId::PointMass),
            method: Some(Method::Pbt),
            seeds: Some(vec![9]),
            out: Some("x".into()),
        };
        let cfg = RunConfig::parse("env = \"pendulum\"\nseeds = [1, 2]", &o).unwrap();
        assert_eq!(cfg.env, EnvId::PointMass);
        assert_eq!(cfg.method, Method::Pbt);
        assert_eq!(cfg.seeds, vec![9]);
        assert_eq!(cfg.ppo, RunConfig::defaults(EnvId::PointMass).ppo);
    }

    #[test]
    fn echo_round_trips() {
        for env in [EnvId::Pendulum, EnvId::PointMass] {
            let cfg = RunConfig::parse(
                "method = \"guided_es\"\n[ppo]\nlearning_rate = 0.00037\nn_epochs = 5\n[baselines.vfs]\nsteps = 2",
                &Overrides {
                    env: Some(env),
                    ..Default::default()
                },
            )
            .unwrap();
            let echoed = cfg.to_toml().unwrap();
            assert_eq!(parse(&echoed).unwrap(), cfg);
        }
    }
}
