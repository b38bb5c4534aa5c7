//! Tabular on-policy SARSA with ε-greedy, softmax and linearly decaying ε
//! exploration.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::RewardChannel;
use crate::gridworld::{Direction, GridWorld, StateId};
use crate::metrics::EpisodeRecord;

pub const NUM_ACTIONS: usize = 4;

/// Dense `|S| x 4` action-value table, zero-initialised.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    values: Vec<[f64; NUM_ACTIONS]>,
}

impl QTable {
    pub fn zeros(num_states: usize) -> Self {
        Self {
            values: vec![[0.0; NUM_ACTIONS]; num_states],
        }
    }

    pub fn for_world(world: &GridWorld) -> Self {
        Self::zeros(world.num_states())
    }

    pub fn num_states(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn get(&self, s: StateId, a: Direction) -> f64 {
        self.values[s][a.index()]
    }

    #[inline]
    pub fn row(&self, s: StateId) -> &[f64; NUM_ACTIONS] {
        &self.values[s]
    }

    /// Overwrites one entry. Panics on a non-finite value.
    pub fn set(&mut self, s: StateId, a: Direction, v: f64) {
        assert!(v.is_finite(), "Q-table entries must be finite, got {v}");
        self.values[s][a.index()] = v;
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64; NUM_ACTIONS]> {
        self.values.iter()
    }

    /// One SARSA backup of `Q(s, a)` towards `r + gamma * Q(s', a')`.
    /// `next` is `None` when `s'` is terminal, which bootstraps from zero.
    /// Returns the new value.
    #[inline]
    pub fn sarsa_update(
        &mut self,
        s: StateId,
        a: Direction,
        r: f64,
        next: Option<(StateId, Direction)>,
        alpha: f64,
        gamma: f64,
    ) -> f64 {
        debug_assert!(r.is_finite());
        let bootstrap = next.map_or(0.0, |(s2, a2)| self.values[s2][a2.index()]);
        let q = &mut self.values[s][a.index()];
        *q = (1.0 - alpha) * *q + alpha * (r + gamma * bootstrap);
        debug_assert!(q.is_finite());
        *q
    }

    /// Text dump, one line per state: `x y q_up q_down q_left q_right`.
    pub fn dump(&self, width: usize) -> String {
        let mut out = String::new();
        for (s, row) in self.values.iter().enumerate() {
            let _ = writeln!(
                out,
                "{} {} {:?} {:?} {:?} {:?}",
                s % width,
                s / width,
                row[0],
                row[1],
                row[2],
                row[3]
            );
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExplorationStrategy {
    EpsilonGreedy {
        epsilon: f64,
    },
    Softmax {
        tau: f64,
    },
    /// ε-greedy with `ε = 1 - episode / total_episodes`.
    DynamicEpsilon {
        total_episodes: usize,
    },
}

impl ExplorationStrategy {
    pub fn validate(&self) -> Result<(), String> {
        match *self {
            Self::EpsilonGreedy { epsilon } if !(0.0..=1.0).contains(&epsilon) => {
                Err(format!("epsilon {epsilon} outside [0, 1]"))
            }
            Self::Softmax { tau } if !(tau > 0.0 && tau.is_finite()) => {
                Err(format!("softmax temperature must be positive, got {tau}"))
            }
            Self::DynamicEpsilon { total_episodes: 0 } => Err("dynamic epsilon needs L >= 1".into()),
            _ => Ok(()),
        }
    }

    /// Short label used in file names and plot legends, e.g. `eps0.1`.
    pub fn label(&self) -> String {
        match *self {
            Self::EpsilonGreedy { epsilon } => format!("eps{epsilon}"),
            Self::Softmax { tau } => format!("tau{tau}"),
            Self::DynamicEpsilon { total_episodes } => format!("dyn{total_episodes}"),
        }
    }
}

impl Default for ExplorationStrategy {
    fn default() -> Self {
        Self::EpsilonGreedy { epsilon: 0.1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub max_steps: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.125,
            gamma: 0.95,
            max_steps: 500,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(format!("alpha {} outside (0, 1]", self.alpha));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(format!("gamma {} outside [0, 1)", self.gamma));
        }
        if self.max_steps == 0 {
            return Err("max_steps must be positive".into());
        }
        Ok(())
    }
}

/// `1 - episode / total`, clamped to `[0, 1]`.
pub fn dynamic_epsilon(episode: usize, total: usize) -> f64 {
    if total == 0 {
        log::warn!("dynamic epsilon with L = 0, using 0");
        return 0.0;
    }
    if episode > total {
        log::warn!("episode {episode} past dynamic epsilon horizon {total}, clamping to 0");
        return 0.0;
    }
    1.0 - episode as f64 / total as f64
}

/// Uniformly random index among the maximal entries of `row`.
#[inline]
pub fn argmax_random_tie<R: Rng + ?Sized>(row: &[f64; NUM_ACTIONS], rng: &mut R) -> usize {
    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut ties = [0usize; NUM_ACTIONS];
    let mut n = 0;
    for (i, &v) in row.iter().enumerate() {
        if v == best {
            ties[n] = i;
            n += 1;
        }
    }
    if n == 1 {
        ties[0]
    } else {
        ties[rng.gen_range(0..n)]
    }
}

/// Boltzmann probabilities `exp(q/tau) / sum exp(q/tau)`, computed with the
/// maximum subtracted so that tiny temperatures cannot overflow.
pub fn softmax_probabilities(row: &[f64; NUM_ACTIONS], tau: f64) -> [f64; NUM_ACTIONS] {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = row.map(|q| ((q - max) / tau).exp());
    let z: f64 = p.iter().sum();
    for v in &mut p {
        *v /= z;
    }
    p
}

fn epsilon_greedy<R: Rng + ?Sized>(row: &[f64; NUM_ACTIONS], epsilon: f64, rng: &mut R) -> usize {
    if rng.gen::<f64>() < epsilon {
        rng.gen_range(0..NUM_ACTIONS)
    } else {
        argmax_random_tie(row, rng)
    }
}

/// Picks the behaviour action for `state`.
pub fn select_action<R: Rng + ?Sized>(
    q: &QTable,
    state: StateId,
    strategy: &ExplorationStrategy,
    episode: usize,
    rng: &mut R,
) -> Direction {
    let row = q.row(state);
    let i = match *strategy {
        ExplorationStrategy::EpsilonGreedy { epsilon } => epsilon_greedy(row, epsilon, rng),
        ExplorationStrategy::DynamicEpsilon { total_episodes } => {
            epsilon_greedy(row, dynamic_epsilon(episode, total_episodes), rng)
        }
        ExplorationStrategy::Softmax { tau } => {
            let p = softmax_probabilities(row, tau);
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut pick = NUM_ACTIONS - 1;
            for (i, &pi) in p.iter().enumerate() {
                acc += pi;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        }
    };
    Direction::from_index(i)
}

/// One executed step of an episode, as seen by a trace observer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepTrace {
    pub step: usize,
    pub state: StateId,
    pub action: Direction,
    pub next_state: StateId,
    pub true_reward: f64,
    pub observed_reward: f64,
    pub terminal: bool,
}

/// RNG streams consumed by an episode: slip sampling and action selection.
pub struct EpisodeRngs<'a, E: Rng + ?Sized, L: Rng + ?Sized> {
    pub env: &'a mut E,
    pub learner: &'a mut L,
}

/// Runs one SARSA episode from the world's start cell.
///
/// The learner updates on rewards passed through `channel`; the record's
/// `true_return` is computed from the environment's own rewards.
pub fn run_episode<E, L, C>(
    world: &GridWorld,
    q: &mut QTable,
    config: &LearnerConfig,
    strategy: &ExplorationStrategy,
    episode: usize,
    channel: &mut C,
    rngs: EpisodeRngs<'_, E, L>,
) -> EpisodeRecord
where
    E: Rng + ?Sized,
    L: Rng + ?Sized,
    C: RewardChannel + ?Sized,
{
    run_episode_traced(world, q, config, strategy, episode, channel, rngs, |_| {})
}

/// [`run_episode`] with a callback invoked after every executed step.
#[allow(clippy::too_many_arguments)]
pub fn run_episode_traced<E, L, C, F>(
    world: &GridWorld,
    q: &mut QTable,
    config: &LearnerConfig,
    strategy: &ExplorationStrategy,
    episode: usize,
    channel: &mut C,
    rngs: EpisodeRngs<'_, E, L>,
    mut observe: F,
) -> EpisodeRecord
where
    E: Rng + ?Sized,
    L: Rng + ?Sized,
    C: RewardChannel + ?Sized,
    F: FnMut(&StepTrace),
{
    let EpisodeRngs { env, learner } = rngs;
    let LearnerConfig {
        alpha,
        gamma,
        max_steps,
    } = *config;

    let mut s = world.start_state();
    let mut a = select_action(q, s, strategy, episode, learner);
    // The reward that arrives after the t-th move is weighted gamma^t.
    let mut discount = gamma;
    let mut true_return = 0.0;
    let mut observed_return = 0.0;
    let mut steps = 0;
    let mut goal_reached = false;

    while steps < max_steps {
        let out = world.step(s, a, env);
        let observed = channel.observe(episode, steps, out.reward);
        true_return += discount * out.reward;
        observed_return += discount * observed;
        discount *= gamma;

        let next = if out.terminal {
            None
        } else {
            Some((
                out.next_state,
                select_action(q, out.next_state, strategy, episode, learner),
            ))
        };
        q.sarsa_update(s, a, observed, next, alpha, gamma);
        observe(&StepTrace {
            step: steps,
            state: s,
            action: a,
            next_state: out.next_state,
            true_reward: out.reward,
            observed_reward: observed,
            terminal: out.terminal,
        });
        steps += 1;

        match next {
            None => {
                goal_reached = true;
                break;
            }
            Some((s2, a2)) => {
                s = s2;
                a = a2;
            }
        }
    }

    EpisodeRecord {
        episode,
        steps,
        true_return,
        observed_return,
        goal_reached,
        cumulative_attacks: channel.attacks_performed(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::IdentityChannel;
    use crate::gridworld::{Goal, Pos};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn greedy_without_exploration_takes_argmax() {
        let mut q = QTable::zeros(1);
        for (a, v) in Direction::ALL.iter().zip([0.5, 0.1, 0.0, 0.0]) {
            q.set(0, *a, v);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let strat = ExplorationStrategy::EpsilonGreedy { epsilon: 0.0 };
        for _ in 0..1000 {
            assert_eq!(select_action(&q, 0, &strat, 0, &mut rng), Direction::Up);
        }
    }

    #[test]
    fn softmax_uniform_for_equal_values() {
        assert_eq!(softmax_probabilities(&[0.3; 4], 0.5), [0.25; 4]);
    }

    #[test]
    fn softmax_hand_evaluated() {
        let p = softmax_probabilities(&[1.0, 0.0, 0.0, 0.0], 1.0);
        let e = std::f64::consts::E;
        assert!((p[0] - e / (e + 3.0)).abs() < 1e-15);
        assert!((p[0] - 0.4754).abs() < 1e-4);
        for &pi in &p[1..] {
            assert!((pi - 1.0 / (e + 3.0)).abs() < 1e-15);
            assert!((pi - 0.1749).abs() < 1e-4);
        }
    }

    #[test]
    fn softmax_tiny_temperature_is_finite() {
        let p = softmax_probabilities(&[1.0, 0.999, -3.0, 0.0], 1e-6);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p[0] > 0.999_999);
    }

    #[test]
    fn dynamic_epsilon_schedule() {
        assert_eq!(dynamic_epsilon(0, 5000), 1.0);
        assert_eq!(dynamic_epsilon(5000, 5000), 0.0);
        assert_eq!(dynamic_epsilon(2500, 5000), 0.5);
        assert_eq!(dynamic_epsilon(9000, 5000), 0.0);
    }

    #[test]
    fn dynamic_start_is_uniform() {
        let mut q = QTable::zeros(1);
        q.set(0, Direction::Left, 5.0);
        let strat = ExplorationStrategy::DynamicEpsilon { total_episodes: 5000 };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut counts = [0usize; 4];
        let n = 100_000;
        for _ in 0..n {
            counts[select_action(&q, 0, &strat, 0, &mut rng).index()] += 1;
        }
        // 4 sigma binomial band around n/4.
        let band = 4.0 * (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 / 4.0).abs() < band, "{counts:?}");
        }
    }

    #[test]
    fn sarsa_update_examples() {
        let mut q = QTable::zeros(2);
        q.sarsa_update(0, Direction::Up, 0.0, Some((1, Direction::Down)), 0.125, 0.95);
        assert_eq!(q, QTable::zeros(2));

        q.sarsa_update(0, Direction::Up, 1.0, None, 0.125, 0.95);
        assert_eq!(q.get(0, Direction::Up), 0.125);

        let mut q = QTable::zeros(2);
        q.set(0, Direction::Right, 0.4);
        q.set(1, Direction::Left, 0.8);
        let v = q.sarsa_update(0, Direction::Right, 0.0, Some((1, Direction::Left)), 0.125, 0.95);
        assert!((v - 0.445).abs() < 1e-15);
        // Only the updated entry moves.
        assert_eq!(q.get(1, Direction::Left), 0.8);
        assert_eq!(q.get(0, Direction::Up), 0.0);
    }

    #[test]
    #[should_panic]
    fn non_finite_entries_rejected() {
        QTable::zeros(1).set(0, Direction::Up, f64::NAN);
    }

    #[test]
    fn strategy_validation() {
        assert!(ExplorationStrategy::Softmax { tau: 0.0 }.validate().is_err());
        assert!(ExplorationStrategy::EpsilonGreedy { epsilon: 1.5 }.validate().is_err());
        assert!(ExplorationStrategy::DynamicEpsilon { total_episodes: 0 }
            .validate()
            .is_err());
        assert!(ExplorationStrategy::Softmax { tau: 0.01 }.validate().is_ok());
    }

    #[test]
    fn unreachable_goals_truncate_with_zero_return() {
        let goals = vec![
            Goal {
                pos: Pos::new(4, 4),
                reward: 0.25,
            },
            Goal {
                pos: Pos::new(4, 3),
                reward: 0.5,
            },
            Goal {
                pos: Pos::new(3, 4),
                reward: 1.0,
            },
        ];
        let w = GridWorld::new(5, 5, &[Pos::new(1, 0), Pos::new(0, 1)], Pos::new(0, 0), goals, 0.1).unwrap();
        let mut q = QTable::for_world(&w);
        let mut env = ChaCha8Rng::seed_from_u64(1);
        let mut learner = ChaCha8Rng::seed_from_u64(2);
        let rec = run_episode(
            &w,
            &mut q,
            &LearnerConfig::default(),
            &ExplorationStrategy::EpsilonGreedy { epsilon: 0.3 },
            0,
            &mut IdentityChannel,
            EpisodeRngs {
                env: &mut env,
                learner: &mut learner,
            },
        );
        assert_eq!(rec.steps, 500);
        assert_eq!(rec.true_return, 0.0);
        assert!(!rec.goal_reached);
    }

    #[test]
    fn dump_has_one_line_per_state() {
        let mut q = QTable::zeros(6);
        q.set(4, Direction::Left, 0.1 + 0.2);
        let text = q.dump(3);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[4], "1 1 0.0 0.0 0.30000000000000004 0.0");
    }
}
