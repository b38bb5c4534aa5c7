use serde::{Deserialize, Serialize};

use crate::agent::{ExplorationStrategy, LearnerConfig};
use crate::error::ConfigError;
use crate::gridworld::MapSpec;
use crate::metrics::SMOOTHING_WINDOW;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentSet {
    /// One fixed exploration rate per cell.
    #[default]
    Fixed,
    /// ε decays linearly from 1 to 0 over `dynamic_total_episodes`.
    Dynamic,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    #[default]
    EpsilonGreedy,
    Softmax,
}

/// How "the policy is destroyed" is decided, see
/// [`attacks_to_breakage`](super::attacks_to_breakage).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BreakageConfig {
    /// Fraction of the pre-onset plateau below which the policy counts as broken.
    pub threshold: f64,
    /// Episodes right before the onset whose smoothed return forms the plateau.
    pub plateau_window: usize,
    /// Consecutive episodes the smoothed return must stay below the threshold.
    pub persistence: usize,
}

impl Default for BreakageConfig {
    fn default() -> Self {
        Self {
            threshold: 0.2,
            plateau_window: 100,
            persistence: 100,
        }
    }
}

/// Everything that determines a sweep. Serialized as TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Used as the sweep directory name when set.
    pub name: Option<String>,
    pub experiment_set: ExperimentSet,
    /// Exploration family of the fixed set. Ignored by the dynamic set.
    pub strategy: StrategyKind,
    /// ε values (ε-greedy) or temperatures (softmax) of the fixed set.
    pub exploration_values: Vec<f64>,
    pub attack_probabilities: Vec<f64>,
    pub attack_start_episode: usize,
    /// Episodes per cell.
    pub episodes: usize,
    /// Horizon `L` of the dynamic schedule.
    pub dynamic_total_episodes: usize,
    pub maps: usize,
    pub seeds: usize,
    pub master_seed: u64,
    pub smoothing_window: usize,
    pub learner: LearnerConfig,
    pub map: MapSpec,
    pub breakage: BreakageConfig,
}

/// `0.0, 0.1, ..., 1.0` without accumulated rounding.
pub fn tenths() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Softmax temperatures: the tenths grid with 0.0 replaced by 0.01.
pub fn softmax_temperatures() -> Vec<f64> {
    std::iter::once(0.01).chain((1..=10).map(|i| i as f64 / 10.0)).collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::fixed(StrategyKind::EpsilonGreedy)
    }
}

impl ExperimentConfig {
    /// Fixed-exploration sweep with attacks from episode 1000 at p = 0.3.
    pub fn fixed(strategy: StrategyKind) -> Self {
        Self {
            name: None,
            experiment_set: ExperimentSet::Fixed,
            strategy,
            exploration_values: match strategy {
                StrategyKind::EpsilonGreedy => tenths(),
                StrategyKind::Softmax => softmax_temperatures(),
            },
            attack_probabilities: vec![0.3],
            attack_start_episode: 1000,
            episodes: 3000,
            dynamic_total_episodes: 5000,
            maps: 50,
            seeds: 10,
            master_seed: 0,
            smoothing_window: SMOOTHING_WINDOW,
            learner: LearnerConfig::default(),
            map: MapSpec::default(),
            breakage: BreakageConfig::default(),
        }
    }

    /// Dynamic-ε sweep over p = 0.0..1.0 with attacks from the first episode.
    pub fn dynamic() -> Self {
        Self {
            experiment_set: ExperimentSet::Dynamic,
            exploration_values: Vec::new(),
            attack_probabilities: tenths(),
            attack_start_episode: 0,
            episodes: 5000,
            ..Self::fixed(StrategyKind::EpsilonGreedy)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Exploration strategies swept, in cell order.
    pub fn strategies(&self) -> Vec<ExplorationStrategy> {
        match self.experiment_set {
            ExperimentSet::Dynamic => vec![ExplorationStrategy::DynamicEpsilon {
                total_episodes: self.dynamic_total_episodes,
            }],
            ExperimentSet::Fixed => self
                .exploration_values
                .iter()
                .map(|&v| match self.strategy {
                    StrategyKind::EpsilonGreedy => ExplorationStrategy::EpsilonGreedy { epsilon: v },
                    StrategyKind::Softmax => ExplorationStrategy::Softmax { tau: v },
                })
                .collect(),
        }
    }

    pub fn cell_count(&self) -> usize {
        self.strategies().len() * self.attack_probabilities.len() * self.maps * self.seeds
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.experiment_set == ExperimentSet::Fixed && self.exploration_values.is_empty() {
            return bad("exploration_values is empty".into());
        }
        for s in self.strategies() {
            s.validate().map_err(ConfigError::Invalid)?;
        }
        if self.attack_probabilities.is_empty() {
            return bad("attack_probabilities is empty".into());
        }
        if let Some(p) = self.attack_probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return bad(format!("attack probability {p} outside [0, 1]"));
        }
        if self.episodes == 0 || self.maps == 0 || self.seeds == 0 {
            return bad("episodes, maps and seeds must be positive".into());
        }
        if self.smoothing_window == 0 {
            return bad("smoothing_window must be positive".into());
        }
        if !(self.breakage.threshold > 0.0 && self.breakage.threshold <= 1.0) {
            return bad(format!("breakage threshold {} outside (0, 1]", self.breakage.threshold));
        }
        self.learner.validate().map_err(ConfigError::Invalid)?;
        if !(0.0..=1.0).contains(&self.map.slip_probability) {
            return bad(format!("slip probability {} outside [0, 1]", self.map.slip_probability));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_cardinalities() {
        assert_eq!(ExperimentConfig::fixed(StrategyKind::EpsilonGreedy).cell_count(), 5500);
        assert_eq!(ExperimentConfig::fixed(StrategyKind::Softmax).cell_count(), 5500);
        assert_eq!(ExperimentConfig::dynamic().cell_count(), 11 * 50 * 10);
        assert_eq!(tenths()[3], 0.3);
        assert_eq!(softmax_temperatures()[0], 0.01);
    }

    #[test]
    fn toml_round_trip_and_defaults() {
        let cfg = ExperimentConfig::dynamic();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);

        let partial = "maps = 5\nseeds = 3\nexploration_values = [0.0, 0.1, 0.3]\nattack_probabilities = [0.0, 0.3]\n[learner]\nalpha = 0.25\n";
        let cfg = ExperimentConfig::from_toml(partial).unwrap();
        assert_eq!(cfg.cell_count(), 90);
        assert_eq!(cfg.learner.alpha, 0.25);
        assert_eq!(cfg.learner.gamma, 0.95);
        assert_eq!(cfg.attack_start_episode, 1000);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_toml("unknown_key = 1").is_err());
        assert!(ExperimentConfig::from_toml("attack_probabilities = [1.5]").is_err());
        assert!(ExperimentConfig::from_toml("strategy = \"softmax\"\nexploration_values = [0.0]").is_err());
        assert!(ExperimentConfig::from_toml("[learner]\ngamma = 1.0").is_err());
    }
}
