//! Self-check suite behind the `verify` command. Each check uses its own
//! straightforward reference computation rather than the library's fast path.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adversary::{intercept, AdversaryConfig, AdversaryState, IdentityChannel};
use crate::agent::{
    run_episode_traced, select_action, softmax_probabilities, EpisodeRngs, ExplorationStrategy, LearnerConfig, QTable,
};
use crate::gridworld::{generate_map, Direction, GridWorld, MapSpec, Pos};
use crate::harness::{run_cell, CellSpec, ExperimentConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, result: Result<String, String>) -> Check {
    match result {
        Ok(detail) => Check {
            name,
            passed: true,
            detail,
        },
        Err(detail) => Check {
            name,
            passed: false,
            detail,
        },
    }
}

fn bfs(world: &GridWorld, from: Pos, to: Pos) -> Option<usize> {
    let (w, h) = (world.width() as i64, world.height() as i64);
    let mut seen = vec![false; world.num_states()];
    let mut queue = VecDeque::from([(from.x as i64, from.y as i64, 0usize)]);
    seen[world.state_of(from)] = true;
    while let Some((x, y, d)) = queue.pop_front() {
        if (x as usize, y as usize) == (to.x, to.y) {
            return Some(d);
        }
        for (dx, dy) in [(0, 1), (0, -1), (1, 0), (-1, 0)] {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w || ny >= h {
                continue;
            }
            let s = (ny * w + nx) as usize;
            if !seen[s] && !world.is_blocked(s) {
                seen[s] = true;
                queue.push_back((nx, ny, d + 1));
            }
        }
    }
    None
}

fn maps(count: u64) -> Result<String, String> {
    let spec = MapSpec::default();
    for seed in 0..count {
        let world = generate_map(seed, &spec).map_err(|e| e.to_string())?;
        for g in world.goals() {
            match bfs(&world, world.start(), g.pos) {
                Some(d) if (spec.goal_distance_min..=spec.goal_distance_max).contains(&d) => {}
                other => return Err(format!("seed {seed}: goal {} at distance {other:?}", g.pos)),
            }
        }
        let text = world.to_map_string();
        let back: GridWorld = text.parse().map_err(|e| format!("seed {seed}: {e}"))?;
        if back.to_map_string() != text || back != world {
            return Err(format!("seed {seed}: map file round trip differs"));
        }
    }
    Ok(format!("{count} maps in distance band, round trip exact"))
}

fn sarsa_oracle(samples: usize) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let mut q = QTable::zeros(2);
        let (q0, q1): (f64, f64) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let r = rng.gen_range(-1.0..1.0);
        let alpha = rng.gen_range(0.001..=1.0);
        let gamma = rng.gen_range(0.0..0.999);
        q.set(0, Direction::Left, q0);
        q.set(1, Direction::Up, q1);
        let got = q.sarsa_update(0, Direction::Left, r, Some((1, Direction::Up)), alpha, gamma);
        // Incremental TD form of the same backup.
        let want = q0 + alpha * (r + gamma * q1 - q0);
        worst = worst.max((got - want).abs());
    }
    if worst <= 1e-12 {
        Ok(format!("{samples} updates, max deviation {worst:e}"))
    } else {
        Err(format!("max deviation {worst:e} exceeds 1e-12"))
    }
}

fn softmax(draws: usize) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10_000 {
        let row = [(); 4].map(|_| rng.gen_range(-2.0..2.0));
        let tau = rng.gen_range(1e-3..5.0);
        let p = softmax_probabilities(&row, tau);
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || p.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(format!("bad distribution {p:?} for {row:?}, tau {tau}"));
        }
    }
    let mut q = QTable::zeros(1);
    q.set(0, Direction::Down, 0.3);
    q.set(0, Direction::Left, 0.2);
    let strategy = ExplorationStrategy::Softmax { tau: 1e-4 };
    let hits = (0..draws)
        .filter(|_| select_action(&q, 0, &strategy, 0, &mut rng) == Direction::Down)
        .count();
    let freq = hits as f64 / draws as f64;
    if freq > 0.999 {
        Ok(format!("normalized; greedy frequency {freq} at tau=1e-4"))
    } else {
        Err(format!("greedy frequency {freq} at tau=1e-4"))
    }
}

fn attack_counts(events: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut notes = Vec::new();
    for p in [0.1, 0.3, 0.7] {
        let cfg = AdversaryConfig::new(p, 0, 0);
        let mut st = AdversaryState::default();
        for i in 0..events {
            let r = [0.25, 0.5, 1.0][(i % 3) as usize];
            let out = intercept(r, 0, &cfg, &mut st, &mut rng);
            if out.abs() != r {
                return Err(format!("magnitude changed: {r} -> {out}"));
            }
        }
        let n = events as f64;
        let band = 4.0 * (n * p * (1.0 - p)).sqrt();
        let got = st.attacks_performed as f64;
        if (got - n * p).abs() > band {
            return Err(format!("p={p}: {got} attacks, expected {} ± {band:.1}", n * p));
        }
        notes.push(format!("p={p}: {got}"));
    }
    Ok(notes.join(", "))
}

fn goal_only(episodes: usize) -> Result<String, String> {
    let world = generate_map(1, &MapSpec::default()).map_err(|e| e.to_string())?;
    let mut q = QTable::for_world(&world);
    let mut env = ChaCha8Rng::seed_from_u64(2);
    let mut learner = ChaCha8Rng::seed_from_u64(3);
    let cfg = LearnerConfig::default();
    let strategy = ExplorationStrategy::EpsilonGreedy { epsilon: 0.1 };
    for ep in 0..episodes {
        let mut trace = Vec::new();
        let rec = run_episode_traced(
            &world,
            &mut q,
            &cfg,
            &strategy,
            ep,
            &mut IdentityChannel,
            EpisodeRngs {
                env: &mut env,
                learner: &mut learner,
            },
            |s| trace.push(*s),
        );
        let nonzero: Vec<usize> = trace.iter().filter(|s| s.true_reward != 0.0).map(|s| s.step).collect();
        let last = trace.len() - 1;
        let ok = match nonzero.as_slice() {
            [] => !rec.goal_reached && rec.true_return == 0.0,
            [t] => *t == last && trace[last].terminal,
            _ => false,
        };
        if !ok {
            return Err(format!("episode {ep}: rewards at steps {nonzero:?} of {}", trace.len()));
        }
    }
    Ok(format!("{episodes} episodes"))
}

fn determinism() -> Result<String, String> {
    let cfg = ExperimentConfig {
        exploration_values: vec![0.1],
        attack_probabilities: vec![0.5],
        maps: 1,
        seeds: 1,
        episodes: 200,
        attack_start_episode: 100,
        ..ExperimentConfig::default()
    };
    let cell = CellSpec {
        strategy_index: 0,
        p_index: 0,
        map_index: 0,
        run_index: 0,
    };
    let a = run_cell(&cfg, &cell).map_err(|e| e.to_string())?;
    let b = run_cell(&cfg, &cell).map_err(|e| e.to_string())?;
    if a == b {
        Ok("cell replay identical".into())
    } else {
        Err("cell replay differs".into())
    }
}

/// Runs all checks. `quick` shrinks sample sizes.
pub fn run_all(quick: bool) -> Vec<Check> {
    let scale = if quick { 10 } else { 1 };
    vec![
        check("map constraints and round trip", maps(100 / scale as u64)),
        check("sarsa update oracle", sarsa_oracle(10_000 / scale)),
        check("softmax normalization and greedy limit", softmax(100_000)),
        check("binomial attack accounting", attack_counts(10_000)),
        check("goal-only reward structure", goal_only(200 / scale)),
        check("cell determinism", determinism()),
    ]
}
