//! Run configuration (TOML) with dotted-key overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bc::BcConfig;
use crate::replay::DEFAULT_CAPACITY;
use crate::sim::Scenario;
use crate::td3::Td3Config;

use super::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Scenario file; the built-in 4000 m open arena when absent.
    pub scenario: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub her_enabled: bool,
    pub td3: Td3Section,
    pub schedule: Schedule,
    pub bc: BcSection,
    pub seeds: Seeds,
    pub remote: RemoteSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            output_dir: PathBuf::from("runs/default"),
            her_enabled: true,
            td3: Td3Section::default(),
            schedule: Schedule::default(),
            bc: BcSection::default(),
            seeds: Seeds::default(),
            remote: RemoteSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Td3Section {
    pub gamma: f64,
    pub rho: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub target_noise_sigma: f64,
    pub target_noise_clip: f64,
    pub policy_delay: u64,
    pub batch_size: usize,
    pub explore_sigma: f64,
    pub epsilon_random: f64,
    pub reward_scale: f64,
    pub hidden: Vec<usize>,
    pub buffer_capacity: usize,
}

impl Default for Td3Section {
    fn default() -> Self {
        let d = Td3Config::<f64>::default();
        Self {
            gamma: d.gamma,
            rho: d.rho,
            actor_lr: d.actor_lr,
            critic_lr: d.critic_lr,
            target_noise_sigma: d.target_noise_sigma,
            target_noise_clip: d.target_noise_clip,
            policy_delay: d.policy_delay,
            batch_size: d.batch_size,
            explore_sigma: d.explore_sigma,
            epsilon_random: d.epsilon_random,
            reward_scale: d.reward_scale,
            hidden: vec![256, 256],
            buffer_capacity: DEFAULT_CAPACITY,
        }
    }
}

impl Td3Section {
    pub fn to_config(&self) -> Td3Config<f64> {
        Td3Config {
            gamma: self.gamma,
            rho: self.rho,
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            target_noise_sigma: self.target_noise_sigma,
            target_noise_clip: self.target_noise_clip,
            policy_delay: self.policy_delay,
            batch_size: self.batch_size,
            explore_sigma: self.explore_sigma,
            epsilon_random: self.epsilon_random,
            reward_scale: self.reward_scale,
            ..Td3Config::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    pub exploration_episodes: usize,
    /// Overrides the scenario's episode length when set.
    pub steps_per_episode: Option<u32>,
    /// Training episodes between validations.
    pub validation_every: usize,
    pub validation_episodes: usize,
    /// Training episodes, not counting exploration.
    pub total_episodes: usize,
    /// Stop once a validation reaches this success rate.
    pub stop_at_success: Option<f64>,
    /// Validation seeds are drawn from this base, apart from training seeds.
    pub validation_seed: u64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            exploration_episodes: 200,
            steps_per_episode: None,
            validation_every: 100,
            validation_episodes: 30,
            total_episodes: 1000,
            stop_at_success: None,
            validation_seed: 1_000_003,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcSection {
    /// Expert episodes collected before exploration; 0 disables behavioral cloning.
    pub demo_episodes: usize,
    /// Actor pretraining epochs; 0 skips pretraining.
    pub pretrain_epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub holdout_fraction: f64,
    /// Push the demonstration episodes into the replay buffer.
    pub seed_buffer: bool,
}

impl Default for BcSection {
    fn default() -> Self {
        let d = BcConfig::<f64>::default();
        Self {
            demo_episodes: 0,
            pretrain_epochs: 0,
            lr: d.lr,
            batch_size: d.batch_size,
            holdout_fraction: d.holdout_fraction,
            seed_buffer: true,
        }
    }
}

impl BcSection {
    pub fn to_config(&self) -> BcConfig<f64> {
        BcConfig {
            epochs: self.pretrain_epochs,
            lr: self.lr,
            holdout_fraction: self.holdout_fraction,
            batch_size: self.batch_size,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct Seeds {
    pub env: u64,
    pub agent: u64,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteSection {
    /// Server addresses; empty runs `count` in-process environments.
    pub addresses: Vec<String>,
    pub count: usize,
    pub deadline_ms: u64,
}

impl Default for RemoteSection {
    fn default() -> Self {
        Self { addresses: Vec::new(), count: 1, deadline_ms: 10_000 }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with_overrides(path, &[])
    }

    /// Reads `path`, applies `key=value` overrides (dotted keys, TOML
    /// values, bare words taken as strings), then validates.
    pub fn load_with_overrides(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.into(), source })?;
        Self::parse_with_overrides(&text, overrides)
    }

    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: &str| Err(HarnessError::Config(format!("{key}: {why}")));
        let s = &self.schedule;
        if s.total_episodes == 0 {
            return bad("schedule.total_episodes", "must be positive");
        }
        if s.validation_every == 0 || s.validation_every > s.total_episodes {
            return bad("schedule.validation_every", "must be in 1..=total_episodes");
        }
        if s.validation_episodes == 0 {
            return bad("schedule.validation_episodes", "must be positive");
        }
        if s.steps_per_episode == Some(0) {
            return bad("schedule.steps_per_episode", "must be positive");
        }
        if self.td3.hidden.is_empty() || self.td3.hidden.contains(&0) {
            return bad("td3.hidden", "needs at least one positive layer width");
        }
        if self.td3.buffer_capacity == 0 {
            return bad("td3.buffer_capacity", "must be positive");
        }
        if self.remote.addresses.is_empty() && self.remote.count == 0 {
            return bad("remote.count", "must be positive");
        }
        if self.bc.pretrain_epochs > 0 && self.bc.demo_episodes == 0 {
            return bad("bc.demo_episodes", "pretraining needs demonstrations");
        }
        self.td3.to_config().validate().map_err(|e| HarnessError::Config(format!("td3: {e}")))?;
        Ok(())
    }

    /// The scenario named by the config, with the schedule's episode length applied.
    pub fn load_scenario(&self) -> Result<Scenario<f64>> {
        let sc = match &self.scenario {
            Some(p) => Scenario::load(p).map_err(|e| HarnessError::Config(format!("scenario {}: {e}", p.display())))?,
            None => Scenario::from_file(&Default::default())?,
        };
        Ok(self.apply_schedule(sc))
    }

    pub fn apply_schedule(&self, mut scenario: Scenario<f64>) -> Scenario<f64> {
        if let Some(n) = self.schedule.steps_per_episode {
            scenario.max_steps = n;
        }
        scenario
    }
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| HarnessError::Config(format!("override `{item}` is not key=value")))?;
    let key = key.trim();
    let value = parse_value(raw.trim());
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| HarnessError::Config(format!("empty key in `{item}`")))?;
    let mut node = table;
    for p in parts {
        let entry = node.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| HarnessError::Config(format!("{key}: `{p}` is not a section")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
