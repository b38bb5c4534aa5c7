//! Headline statistics of a desk-scale sweep (10 maps x 5 runs), for
//! eyeballing how results move with the master seed.
//!
//! cargo run --release -p rewardflip-core --example desk_scale [eps|softmax|dynamic]
//!
//! `SEED` sets the master seed (default 0).

use std::time::Instant;

use rewardflip::harness::{median, pre_onset_plateau, run_sweep, ExperimentConfig, StrategyKind};
use rewardflip::metrics::smoothed_returns;
use rewardflip::ExplorationStrategy;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "eps".into());
    let mut cfg = match mode.as_str() {
        "dynamic" => ExperimentConfig {
            attack_probabilities: vec![0.0, 0.1, 0.2, 0.5],
            ..ExperimentConfig::dynamic()
        },
        "softmax" => ExperimentConfig {
            exploration_values: vec![0.01, 0.1, 0.3],
            ..ExperimentConfig::fixed(StrategyKind::Softmax)
        },
        _ => ExperimentConfig {
            exploration_values: vec![0.0, 0.1, 0.3, 0.5, 0.7, 0.9],
            ..ExperimentConfig::fixed(StrategyKind::EpsilonGreedy)
        },
    };
    if cfg.attack_start_episode > 0 {
        cfg.attack_probabilities = vec![0.0, 0.3, 0.5, 0.7, 1.0];
    }
    cfg.master_seed = std::env::var("SEED").ok().and_then(|v| v.parse().ok()).unwrap_or(0);
    cfg.maps = 10;
    cfg.seeds = 5;

    let t = Instant::now();
    let res = run_sweep(&cfg, std::thread::available_parallelism().map_or(1, |n| n.get())).unwrap();
    println!("{} cells in {:.1?}", res.cells.len(), t.elapsed());

    if cfg.attack_start_episode == 0 {
        for g in &res.groups {
            let m = g.learning.means();
            println!(
                "p={:<4} final-window mean {:.4}",
                g.attack_probability,
                mean(&m[m.len() - 300..])
            );
        }
        return;
    }

    let onset = cfg.attack_start_episode;
    println!("strategy     p     plateau  min-after  late     final    median-break  broken");
    for g in &res.groups {
        let m = g.learning.means();
        let plateau = pre_onset_plateau(&m, onset, 100).unwrap();
        let min = m[onset..onset + 500].iter().copied().fold(f64::INFINITY, f64::min);
        let attacks: Vec<f64> = g.breakage.iter().map(|b| b.attacks() as f64).collect();
        let broken = g.breakage.iter().filter(|b| b.is_broken()).count();
        println!(
            "{:<12} {:<4}  {plateau:.4}   {min:.4}     {:.4}   {:.4}   {:>8.1}      {broken}/{}",
            g.strategy.label(),
            g.attack_probability,
            mean(&m[m.len() - 300..]),
            m[m.len() - 1],
            median(&attacks).unwrap(),
            g.breakage.len()
        );
        if g.attack_probability == 0.0 {
            let si = cfg.strategies().iter().position(|s| *s == g.strategy).unwrap();
            let runs = res.runs(si, 0);
            let positive = runs
                .iter()
                .filter(|r| smoothed_returns(&r.records, 100)[onset] > 0.0)
                .count();
            println!("    positive at onset: {positive}/{}", runs.len());
        }
    }

    // Breakage pooled over the policy-following settings.
    for &p in &cfg.attack_probabilities {
        let pooled: Vec<f64> = res
            .groups
            .iter()
            .filter(|g| g.attack_probability == p)
            .filter(|g| match g.strategy {
                ExplorationStrategy::EpsilonGreedy { epsilon: v } | ExplorationStrategy::Softmax { tau: v } => v <= 0.3,
                ExplorationStrategy::DynamicEpsilon { .. } => false,
            })
            .flat_map(|g| g.breakage.iter().map(|b| b.attacks() as f64))
            .collect();
        println!(
            "pooled p={p}: median attacks {:?} over {}",
            median(&pooled),
            pooled.len()
        );
    }
}
