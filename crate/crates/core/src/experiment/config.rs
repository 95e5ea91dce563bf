//! Line-oriented `key = value` experiment definitions.
//!
//! ```text
//! # chain attack
//! env.name = chain
//! env.n = 5
//! gamma = 0.9
//! attack.mode = sleepernets_outer
//! attack.beta = 0.05
//! seeds = 1, 2, 3
//! ```
//!
//! Blank lines and `#` comments are ignored. Keys outside the table below
//! are rejected so typos never silently fall back to defaults.
//!
//! | key | default |
//! |-----|---------|
//! | `env.name` | required: `chain`, `gridworld`, `m1`, `m1-episodic`, `m2`, `random` |
//! | `env.c` | 1 |
//! | `env.width`, `env.height` | 4, 4 |
//! | `env.goal_reward`, `env.step_cost`, `env.slip` | 1, 0, 0 |
//! | `env.n`, `env.fwd_reward` | 5, 1 |
//! | `env.n_states`, `env.n_actions`, `env.seed`, `env.reward_scale` | 4, 2, 0, 1 |
//! | `learner.kind` | `policy_gradient` (or `q_learning`) |
//! | `learner.learning_rate`, `learner.epsilon` | 0.5, 0.1 |
//! | `learner.batch_episodes`, `learner.baseline` | 1, 0 |
//! | `learner.buffer_capacity`, `learner.replay_samples` | 100, 64 |
//! | `attack.mode` | `none` (or `static_inner`, `sleepernets_outer`) |
//! | `attack.beta`, `attack.alpha`, `attack.c`, `attack.target_action` | 0, 1, 1, 0 |
//! | `attack.anneal`, `attack.anneal_threshold` | true, 1 |
//! | `attack.accumulate_budget` | false |
//! | `gamma`, `episodes`, `horizon` | 0.9, 1000, 100 |
//! | `seeds` | 0 |
//! | `eval_interval`, `eval_episodes` | 50, 20 |
//! | `asr_precision` | 0.001 |
//! | `output_dir` | unset (caller decides) |

use std::path::PathBuf;
use std::str::FromStr;

use crate::envs::{
    make_chain, make_gridworld, make_m1, make_m1_episodic, make_m2, make_random_mdp, EnvDescriptor,
};
use crate::error::{Error, Result};
use crate::harness::TrainingOptions;
use crate::learners::LearnerConfig;
use crate::poison::AttackSpec;

/// Environment name plus every constructor parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvConfig {
    pub name: String,
    pub c: f64,
    pub width: usize,
    pub height: usize,
    pub goal_reward: f64,
    pub step_cost: f64,
    pub slip: f64,
    pub n: usize,
    pub fwd_reward: f64,
    pub n_states: usize,
    pub n_actions: usize,
    pub seed: u64,
    pub reward_scale: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            name: String::new(),
            c: 1.0,
            width: 4,
            height: 4,
            goal_reward: 1.0,
            step_cost: 0.0,
            slip: 0.0,
            n: 5,
            fwd_reward: 1.0,
            n_states: 4,
            n_actions: 2,
            seed: 0,
            reward_scale: 1.0,
        }
    }
}

impl EnvConfig {
    pub fn build(&self, gamma: f64) -> Result<EnvDescriptor> {
        match self.name.as_str() {
            "chain" => make_chain(self.n, self.fwd_reward, gamma),
            "gridworld" => make_gridworld(
                self.width,
                self.height,
                self.goal_reward,
                self.step_cost,
                self.slip,
                gamma,
            ),
            "m1" => make_m1(self.c, gamma),
            "m1-episodic" => make_m1_episodic(self.c, gamma),
            "m2" => make_m2(self.c, gamma),
            "random" => make_random_mdp(
                self.n_states,
                self.n_actions,
                self.seed,
                self.reward_scale,
                gamma,
            ),
            "" => Err(Error::Config("missing required field env.name".into())),
            other => Err(Error::Config(format!("unknown environment '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub learner: LearnerConfig,
    pub attack: AttackSpec,
    pub gamma: f64,
    pub episodes: usize,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub asr_precision: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let opts = TrainingOptions::default();
        ExperimentConfig {
            env: EnvConfig::default(),
            learner: LearnerConfig::default(),
            attack: AttackSpec::default(),
            gamma: 0.9,
            episodes: opts.episodes,
            horizon: opts.horizon,
            seeds: vec![0],
            eval_interval: opts.eval_interval,
            eval_episodes: opts.eval_episodes,
            asr_precision: opts.asr_precision,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    /// Training options for one seed.
    pub fn training_options(&self, seed: u64) -> TrainingOptions {
        TrainingOptions {
            episodes: self.episodes,
            horizon: self.horizon,
            eval_interval: self.eval_interval,
            eval_episodes: self.eval_episodes,
            seed,
            asr_precision: self.asr_precision,
        }
    }

    /// Full consistency check: builds the environment and checks every
    /// sub-configuration against it.
    pub fn validate(&self) -> Result<EnvDescriptor> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let env = self.env.build(self.gamma)?;
        self.learner.check()?;
        self.attack.check(env.mdp.n_actions())?;
        self.training_options(0).check()?;
        Ok(env)
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value;
        match key {
            "env.name" => self.env.name = v.to_string(),
            "env.c" => self.env.c = num(key, v)?,
            "env.width" => self.env.width = num(key, v)?,
            "env.height" => self.env.height = num(key, v)?,
            "env.goal_reward" => self.env.goal_reward = num(key, v)?,
            "env.step_cost" => self.env.step_cost = num(key, v)?,
            "env.slip" => self.env.slip = num(key, v)?,
            "env.n" => self.env.n = num(key, v)?,
            "env.fwd_reward" => self.env.fwd_reward = num(key, v)?,
            "env.n_states" => self.env.n_states = num(key, v)?,
            "env.n_actions" => self.env.n_actions = num(key, v)?,
            "env.seed" => self.env.seed = num(key, v)?,
            "env.reward_scale" => self.env.reward_scale = num(key, v)?,
            "learner.kind" => self.learner.kind = v.parse()?,
            "learner.learning_rate" => self.learner.learning_rate = num(key, v)?,
            "learner.epsilon" => self.learner.epsilon = num(key, v)?,
            "learner.batch_episodes" => self.learner.batch_episodes = num(key, v)?,
            "learner.buffer_capacity" => self.learner.buffer_capacity = num(key, v)?,
            "learner.replay_samples" => self.learner.replay_samples = num(key, v)?,
            "learner.baseline" => self.learner.baseline = num(key, v)?,
            "attack.mode" => self.attack.mode = v.parse()?,
            "attack.beta" => self.attack.beta = num(key, v)?,
            "attack.alpha" => self.attack.alpha = num(key, v)?,
            "attack.c" => self.attack.c = num(key, v)?,
            "attack.target_action" => self.attack.target_action = num(key, v)?,
            "attack.anneal" => self.attack.anneal = num(key, v)?,
            "attack.anneal_threshold" => self.attack.anneal_threshold = num(key, v)?,
            "attack.accumulate_budget" => self.attack.accumulate_budget = num(key, v)?,
            "gamma" => self.gamma = num(key, v)?,
            "episodes" => self.episodes = num(key, v)?,
            "horizon" => self.horizon = num(key, v)?,
            "seeds" => {
                self.seeds = v
                    .split(',')
                    .map(|s| num(key, s.trim()))
                    .collect::<Result<Vec<u64>>>()?
            }
            "eval_interval" => self.eval_interval = num(key, v)?,
            "eval_episodes" => self.eval_episodes = num(key, v)?,
            "asr_precision" => self.asr_precision = num(key, v)?,
            "output_dir" => self.output_dir = Some(PathBuf::from(v)),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

/// Parses a document and validates the result.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config = parse_config_unchecked(text)?;
    config.validate()?;
    Ok(config)
}

/// Parses a document without checking cross-field consistency.
pub fn parse_config_unchecked(text: &str) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", i + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(Error::Config(format!(
                "line {}: expected 'key = value'",
                i + 1
            )));
        }
        config.set(key, value).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("line {}: {msg}", i + 1)),
            other => other,
        })?;
    }
    Ok(config)
}
