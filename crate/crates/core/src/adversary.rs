//! The reward-channel adversary.
//!
//! The adversary sits between the environment and the learner. Whenever a
//! nonzero (goal) reward passes, it draws `phi` uniformly and, if
//! `phi <= p`, replaces the reward with its negation. Its cost is the number
//! of rewards it replaced.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The path rewards take from the environment to the learner.
pub trait RewardChannel {
    /// Returns the reward the learner sees for `reward` emitted at
    /// (`episode`, `step`).
    fn observe(&mut self, episode: usize, step: usize, reward: f64) -> f64;

    /// Number of corrupted rewards injected so far.
    fn attacks_performed(&self) -> u64 {
        0
    }
}

/// Passes rewards through unchanged.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityChannel;

impl RewardChannel for IdentityChannel {
    #[inline]
    fn observe(&mut self, _episode: usize, _step: usize, reward: f64) -> f64 {
        reward
    }
}

impl<C: RewardChannel + ?Sized> RewardChannel for &mut C {
    fn observe(&mut self, episode: usize, step: usize, reward: f64) -> f64 {
        (**self).observe(episode, step, reward)
    }

    fn attacks_performed(&self) -> u64 {
        (**self).attacks_performed()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversaryConfig {
    pub attack_probability: f64,
    /// First episode in which goal rewards may be flipped.
    pub attack_start_episode: usize,
    pub seed: u64,
}

impl AdversaryConfig {
    pub fn new(attack_probability: f64, attack_start_episode: usize, seed: u64) -> Self {
        assert!(
            (0.0..=1.0).contains(&attack_probability),
            "attack probability {attack_probability} outside [0, 1]"
        );
        Self {
            attack_probability,
            attack_start_episode,
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryState {
    pub attacks_performed: u64,
    pub goal_events_seen: u64,
}

/// Applies the sign-flip attack to a single reward and updates `state`.
#[inline]
pub fn intercept<R: Rng + ?Sized>(
    reward: f64,
    episode: usize,
    config: &AdversaryConfig,
    state: &mut AdversaryState,
    rng: &mut R,
) -> f64 {
    if episode < config.attack_start_episode || reward == 0.0 {
        return reward;
    }
    state.goal_events_seen += 1;
    // phi in (0, 1], so p = 0 never fires and p = 1 always does.
    let phi = 1.0 - rng.gen::<f64>();
    if phi <= config.attack_probability {
        state.attacks_performed += 1;
        -reward
    } else {
        reward
    }
}

/// One intercepted goal reward.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttackLogEntry {
    pub episode: usize,
    pub step: usize,
    pub true_reward: f64,
    pub observed_reward: f64,
    pub attacked: bool,
}

/// A reward channel with the adversary spliced in.
#[derive(Clone, Debug)]
pub struct Adversary<C = IdentityChannel> {
    inner: C,
    config: AdversaryConfig,
    state: AdversaryState,
    rng: ChaCha8Rng,
    log: Option<Vec<AttackLogEntry>>,
}

/// Wraps `channel` so every reward leaving it goes through [`intercept`].
pub fn attach<C: RewardChannel>(channel: C, config: AdversaryConfig) -> Adversary<C> {
    Adversary {
        inner: channel,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        config,
        state: AdversaryState::default(),
        log: None,
    }
}

impl<C> Adversary<C> {
    /// Keeps a record of every nonzero reward seen.
    pub fn with_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn config(&self) -> &AdversaryConfig {
        &self.config
    }

    pub fn state(&self) -> AdversaryState {
        self.state
    }

    pub fn log(&self) -> Option<&[AttackLogEntry]> {
        self.log.as_deref()
    }

    pub fn into_inner(self) -> C {
        self.inner
    }
}

impl<C: RewardChannel> RewardChannel for Adversary<C> {
    #[inline]
    fn observe(&mut self, episode: usize, step: usize, reward: f64) -> f64 {
        let upstream = self.inner.observe(episode, step, reward);
        let before = self.state.attacks_performed;
        let out = intercept(upstream, episode, &self.config, &mut self.state, &mut self.rng);
        if let Some(log) = &mut self.log {
            if upstream != 0.0 {
                log.push(AttackLogEntry {
                    episode,
                    step,
                    true_reward: upstream,
                    observed_reward: out,
                    attacked: self.state.attacks_performed > before,
                });
            }
        }
        out
    }

    fn attacks_performed(&self) -> u64 {
        self.state.attacks_performed + self.inner.attacks_performed()
    }
}

/// Writes an attack log as CSV with header
/// `episode_index,step_index,true_reward,observed_reward,attacked`.
pub fn write_attack_log<W: Write>(entries: &[AttackLogEntry], mut out: W) -> std::io::Result<()> {
    writeln!(out, "episode_index,step_index,true_reward,observed_reward,attacked")?;
    for e in entries {
        writeln!(
            out,
            "{},{},{:?},{:?},{}",
            e.episode, e.step, e.true_reward, e.observed_reward, e.attacked as u8
        )?;
    }
    Ok(())
}
