mod support;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rewardflip::adversary::{attach, intercept, AdversaryConfig, AdversaryState, IdentityChannel, RewardChannel};
use rewardflip::agent::{run_episode, EpisodeRngs, ExplorationStrategy, LearnerConfig, QTable};
use rewardflip::gridworld::{generate_map, Direction, Goal, GridWorld, MapSpec, Pos};
use rewardflip::harness::{run_sweep, ExperimentConfig};
use rewardflip::metrics::{aggregate_series, discounted_return, performance_vs_cost, sliding_window_smooth};

/// Random small grid with (0, 0) as the start and optionally one goal.
fn arb_world() -> impl Strategy<Value = GridWorld> {
    (2usize..12, 2usize..12).prop_flat_map(|(w, h)| {
        (
            Just((w, h)),
            prop::collection::vec(prop::bool::weighted(0.3), w * h),
            0.0f64..=1.0,
            any::<prop::sample::Index>(),
        )
            .prop_map(|((w, h), mask, slip, goal)| {
                let obstacles: Vec<Pos> = (1..w * h)
                    .filter(|&i| mask[i])
                    .map(|i| Pos::new(i % w, i / w))
                    .collect();
                let g = goal.index(w * h - 1) + 1;
                let goals = if mask[g] {
                    Vec::new()
                } else {
                    vec![Goal {
                        pos: Pos::new(g % w, g / w),
                        reward: 1.0,
                    }]
                };
                GridWorld::new(w, h, &obstacles, Pos::new(0, 0), goals, slip).unwrap()
            })
    })
}

fn play(
    world: &GridWorld,
    q: &mut QTable,
    strategy: &ExplorationStrategy,
    episodes: usize,
    seed: u64,
    channel: &mut impl RewardChannel,
) -> Vec<rewardflip::EpisodeRecord> {
    let mut env = ChaCha8Rng::seed_from_u64(seed);
    let mut learner = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
    (0..episodes)
        .map(|ep| {
            run_episode(
                world,
                q,
                &LearnerConfig::default(),
                strategy,
                ep,
                channel,
                EpisodeRngs {
                    env: &mut env,
                    learner: &mut learner,
                },
            )
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shortest_paths_match_dijkstra(world in arb_world()) {
        for y in 0..world.height() {
            for x in 0..world.width() {
                let to = Pos::new(x, y);
                prop_assert_eq!(
                    world.shortest_path_length(world.start(), to),
                    support::dijkstra_distance(&world, world.start(), to)
                );
            }
        }
    }

    #[test]
    fn steps_stay_on_free_cells(world in arb_world(), seed: u64, a in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = world.start_state();
        for i in 0..200 {
            let out = world.step(s, Direction::from_index((a + i) % 4), &mut rng);
            prop_assert!(out.next_state < world.num_states());
            prop_assert!(!world.is_blocked(out.next_state));
            let (p, q) = (world.pos_of(s), world.pos_of(out.next_state));
            prop_assert!(p.x.abs_diff(q.x) + p.y.abs_diff(q.y) <= 1);
            prop_assert_eq!(out.terminal, world.is_goal(out.next_state));
            if out.terminal {
                s = world.start_state();
            } else {
                s = out.next_state;
            }
        }
    }

    #[test]
    fn smoothing_stays_within_range(series in prop::collection::vec(-1.0f64..1.0, 1..300), window in 1usize..120) {
        let sm = sliding_window_smooth(&series, window);
        prop_assert_eq!(sm.len(), series.len());
        for (i, v) in sm.iter().enumerate() {
            let lo = (i + 1).saturating_sub(window);
            let slice = &series[lo..=i];
            let min = slice.iter().copied().fold(f64::INFINITY, f64::min);
            let max = slice.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(*v >= min - 1e-12 && *v <= max + 1e-12);
        }
        prop_assert_eq!(sliding_window_smooth(&series, 1), series);
    }

    #[test]
    fn aggregate_mean_within_replicates(
        reps in (1usize..50).prop_flat_map(|len| prop::collection::vec(prop::collection::vec(-1.0f64..1.0, len), 1..8))
    ) {
        let curve = aggregate_series(&reps).unwrap();
        for (i, pt) in curve.points.iter().enumerate() {
            let col: Vec<f64> = reps.iter().map(|r| r[i]).collect();
            let min = col.iter().copied().fold(f64::INFINITY, f64::min);
            let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(pt.mean >= min - 1e-12 && pt.mean <= max + 1e-12);
            prop_assert!(pt.std >= 0.0);
            prop_assert_eq!(pt.n, reps.len());
        }
    }

    #[test]
    fn later_goals_are_worth_less(k1 in 0usize..500, k2 in 0usize..500, r in 0.01f64..1.0, gamma in 0.0f64..0.999) {
        let ret = |k: usize| {
            let mut v = vec![0.0; k + 1];
            v[k] = r;
            discounted_return(&v, gamma)
        };
        let (a, b) = (k1.min(k2), k1.max(k2));
        prop_assert!(ret(a) >= ret(b));
    }

    #[test]
    fn flips_only_change_sign_of_goal_rewards_after_onset(
        rewards in prop::collection::vec(prop::sample::select(vec![0.0, 0.25, 0.5, 1.0, -0.5]), 1..200),
        p in 0.0f64..=1.0,
        start in 0usize..10,
        seed: u64,
    ) {
        let cfg = AdversaryConfig::new(p, start, seed);
        let mut st = AdversaryState::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (i, &r) in rewards.iter().enumerate() {
            let episode = i / 20;
            let out = intercept(r, episode, &cfg, &mut st, &mut rng);
            prop_assert_eq!(out.abs(), r.abs());
            if out != r {
                prop_assert!(r != 0.0 && episode >= start);
            }
            if p == 0.0 {
                prop_assert_eq!(out, r);
            }
        }
        prop_assert!(st.attacks_performed <= st.goal_events_seen);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn generated_maps_round_trip_and_meet_distances(seed in 0u64..10_000) {
        let world = generate_map(seed, &MapSpec::default()).unwrap();
        let text = world.to_map_string();
        let back: GridWorld = text.parse().unwrap();
        prop_assert_eq!(&back, &world);
        prop_assert_eq!(back.to_map_string(), text);
        for g in world.goals() {
            let d = support::bfs_distance(&world, world.start(), g.pos).unwrap();
            prop_assert!((20..=25).contains(&d));
        }
    }

    #[test]
    fn q_values_stay_bounded_under_attack(seed in 0u64..1000, p in 0.0f64..=1.0, eps in 0.0f64..1.0) {
        let world = generate_map(seed, &MapSpec::default()).unwrap();
        let mut q = QTable::for_world(&world);
        let mut adv = attach(IdentityChannel, AdversaryConfig::new(p, 20, seed));
        play(&world, &mut q, &ExplorationStrategy::EpsilonGreedy { epsilon: eps }, 60, seed, &mut adv);
        let bound = 1.0 / (1.0 - LearnerConfig::default().gamma);
        for row in q.iter() {
            for v in row {
                prop_assert!(v.is_finite() && v.abs() <= bound);
            }
        }
    }

    #[test]
    fn attack_counts_are_conserved(seed in 0u64..1000, p in 0.0f64..=1.0) {
        let world = generate_map(seed, &MapSpec::default()).unwrap();
        let mut q = QTable::for_world(&world);
        let onset = 30;
        let mut adv = attach(IdentityChannel, AdversaryConfig::new(p, onset, seed)).with_log();
        let recs = play(&world, &mut q, &ExplorationStrategy::EpsilonGreedy { epsilon: 0.1 }, 150, seed, &mut adv);
        let total = adv.state().attacks_performed;
        let increments: u64 = recs
            .windows(2)
            .map(|w| w[1].cumulative_attacks - w[0].cumulative_attacks)
            .sum::<u64>()
            + recs[0].cumulative_attacks;
        prop_assert_eq!(increments, total);
        prop_assert_eq!(recs.last().unwrap().cumulative_attacks, total);
        let logged = adv.log().unwrap();
        prop_assert_eq!(logged.iter().filter(|e| e.attacked).count() as u64, total);
        prop_assert!(logged.iter().filter(|e| e.attacked).all(|e| e.episode >= onset && e.observed_reward == -e.true_reward));
        let cost = performance_vs_cost(&recs, 100, onset);
        prop_assert_eq!(cost.points.last().unwrap().x, total as f64);
    }

    #[test]
    fn noiseless_path_replay(seed in 0u64..10_000) {
        let world = generate_map(seed, &MapSpec::default()).unwrap().with_slip(0.0);
        let goal = *world.goals().iter().find(|g| g.reward == 1.0).unwrap();
        let path = world.shortest_path(world.start(), goal.pos).unwrap();
        let mut q = QTable::for_world(&world);
        let mut s = world.start_state();
        let mut crossed = false;
        for (i, &d) in path.iter().enumerate() {
            q.set(s, d, 1.0);
            s = world.resolve_move(s, d);
            crossed |= i + 1 < path.len() && world.is_goal(s);
        }
        prop_assume!(!crossed);
        prop_assert_eq!(s, world.state_of(goal.pos));
        let recs = play(&world, &mut q, &ExplorationStrategy::EpsilonGreedy { epsilon: 0.0 }, 1, seed, &mut IdentityChannel);
        prop_assert_eq!(recs[0].steps, path.len());
        prop_assert_eq!(Some(path.len()), support::bfs_distance(&world, world.start(), goal.pos));
        prop_assert!((recs[0].true_return - 0.95f64.powi(path.len() as i32)).abs() < 1e-12);
    }
}

#[test]
fn preseeded_twenty_step_path_return() {
    let world = GridWorld::new(
        21,
        1,
        &[],
        Pos::new(0, 0),
        vec![Goal {
            pos: Pos::new(20, 0),
            reward: 1.0,
        }],
        0.0,
    )
    .unwrap();
    let mut q = QTable::for_world(&world);
    for s in 0..world.num_states() {
        q.set(s, Direction::Right, 1.0);
    }
    let strategy = ExplorationStrategy::EpsilonGreedy { epsilon: 0.0 };
    let rec = &play(&world, &mut q, &strategy, 1, 0, &mut IdentityChannel)[0];
    assert_eq!(rec.steps, 20);
    assert!(rec.goal_reached);
    assert!((rec.true_return - 0.358486).abs() < 1e-6, "{}", rec.true_return);
}

#[test]
fn slip_frequencies() {
    let world = generate_map(3, &MapSpec::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 1_000_000;
    let mut counts = [0usize; 4];
    for _ in 0..n {
        counts[world.sample_direction(Direction::Up, &mut rng).index()] += 1;
    }
    let freq = counts.map(|c| c as f64 / n as f64);
    assert!((freq[Direction::Up.index()] - 0.9).abs() <= 0.004, "{freq:?}");
    for d in [Direction::Down, Direction::Left, Direction::Right] {
        assert!((freq[d.index()] - 0.1 / 3.0).abs() <= 0.004, "{freq:?}");
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let cfg = ExperimentConfig {
        exploration_values: vec![0.1, 0.5],
        attack_probabilities: vec![0.0, 0.5],
        attack_start_episode: 150,
        episodes: 400,
        maps: 2,
        seeds: 3,
        ..ExperimentConfig::default()
    };
    let one = run_sweep(&cfg, 1).unwrap();
    let eight = run_sweep(&cfg, 8).unwrap();
    assert_eq!(one, eight);
}
