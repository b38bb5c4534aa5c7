//! Experiment sweeps: the cell plan, per-cell simulation, parallel
//! execution and aggregation.
//!
//! A cell is one (exploration value, attack probability, map, run)
//! combination. Every random stream of a cell is derived from the master
//! seed and the cell's map and run indices, so a cell's records do not
//! depend on which other cells run or on how work is scheduled.

mod breakage;
mod config;
pub mod results;
mod seeds;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use breakage::{attacks_to_breakage, median, pre_onset_plateau, Breakage};
pub use config::{softmax_temperatures, tenths, BreakageConfig, ExperimentConfig, ExperimentSet, StrategyKind};
pub use seeds::{derive_seed, stream_rng, Stream};

use crate::adversary::{attach, AdversaryConfig, IdentityChannel, RewardChannel};
use crate::agent::{run_episode, EpisodeRngs, ExplorationStrategy, QTable};
use crate::error::HarnessError;
use crate::gridworld::{generate_map, GridWorld};
use crate::metrics::{
    aggregate, aggregate_cost_curves, performance_vs_cost, Curve, CurvePoint, EpisodeRecord, COST_GRID_STEP,
};

/// Position of a cell in the sweep plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellSpec {
    pub strategy_index: usize,
    pub p_index: usize,
    pub map_index: usize,
    pub run_index: usize,
}

impl CellSpec {
    pub fn strategy(&self, config: &ExperimentConfig) -> ExplorationStrategy {
        config.strategies()[self.strategy_index]
    }

    pub fn attack_probability(&self, config: &ExperimentConfig) -> f64 {
        config.attack_probabilities[self.p_index]
    }

    /// Stable identifier, e.g. `eps0.1_p0.3_m004_r02`.
    pub fn id(&self, config: &ExperimentConfig) -> String {
        format!(
            "{}_p{}_m{:03}_r{:02}",
            self.strategy(config).label(),
            self.attack_probability(config),
            self.map_index,
            self.run_index
        )
    }
}

/// All cells of `config`, strategy-major then p, map, run.
pub fn plan(config: &ExperimentConfig) -> Vec<CellSpec> {
    let mut cells = Vec::with_capacity(config.cell_count());
    for strategy_index in 0..config.strategies().len() {
        for p_index in 0..config.attack_probabilities.len() {
            for map_index in 0..config.maps {
                for run_index in 0..config.seeds {
                    cells.push(CellSpec {
                        strategy_index,
                        p_index,
                        map_index,
                        run_index,
                    });
                }
            }
        }
    }
    cells
}

/// The map used by every cell with this map index.
pub fn build_map(config: &ExperimentConfig, map_index: usize) -> Result<GridWorld, crate::error::GenerationError> {
    generate_map(derive_seed(config.master_seed, map_index, 0, Stream::Map), &config.map)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRun {
    pub records: Vec<EpisodeRecord>,
    pub attacks_performed: u64,
    pub goal_events_seen: u64,
}

/// Whether the adversary is wired into the reward channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdversaryMode {
    Attached,
    Detached,
}

/// Runs every episode of one cell on an already generated map.
pub fn run_cell_on(world: &GridWorld, config: &ExperimentConfig, cell: &CellSpec, mode: AdversaryMode) -> CellRun {
    let strategy = cell.strategy(config);
    let (map, run, master) = (cell.map_index, cell.run_index, config.master_seed);
    let mut env = stream_rng(master, map, run, Stream::Env);
    let mut learner = stream_rng(master, map, run, Stream::Learner);
    let mut q = QTable::for_world(world);

    let mut play = |channel: &mut dyn RewardChannel| -> Vec<EpisodeRecord> {
        (0..config.episodes)
            .map(|episode| {
                run_episode(
                    world,
                    &mut q,
                    &config.learner,
                    &strategy,
                    episode,
                    channel,
                    EpisodeRngs {
                        env: &mut env,
                        learner: &mut learner,
                    },
                )
            })
            .collect()
    };

    match mode {
        AdversaryMode::Detached => CellRun {
            records: play(&mut IdentityChannel),
            attacks_performed: 0,
            goal_events_seen: 0,
        },
        AdversaryMode::Attached => {
            let adv_cfg = AdversaryConfig::new(
                cell.attack_probability(config),
                config.attack_start_episode,
                derive_seed(master, map, run, Stream::Adversary),
            );
            let mut adversary = attach(IdentityChannel, adv_cfg);
            let records = play(&mut adversary);
            let state = adversary.state();
            CellRun {
                records,
                attacks_performed: state.attacks_performed,
                goal_events_seen: state.goal_events_seen,
            }
        }
    }
}

/// Builds the cell's map and runs it with the adversary attached.
pub fn run_cell(config: &ExperimentConfig, cell: &CellSpec) -> Result<CellRun, HarnessError> {
    let world = build_map(config, cell.map_index).map_err(|source| HarnessError::MapGeneration {
        cell: cell.id(config),
        source,
    })?;
    Ok(run_cell_on(&world, config, cell, AdversaryMode::Attached))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub spec: CellSpec,
    pub id: String,
    /// Failure message on error (map generation is the only failure mode).
    pub result: Result<CellRun, String>,
}

/// Aggregates for one (strategy, p) pair over maps and runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub strategy: ExplorationStrategy,
    pub attack_probability: f64,
    /// Smoothed true return per episode, averaged over replicates.
    pub learning: Curve,
    /// Return against per-replicate cumulative attacks, interpolated on a
    /// common attack grid.
    pub cost: Curve,
    /// Return against the replicate-averaged cumulative attack count.
    pub cost_averaged: Curve,
    pub attack_totals: Vec<u64>,
    pub breakage: Vec<Breakage>,
}

impl GroupSummary {
    /// File stem shared by this group's curve files, e.g. `eps0.1_p0.3`.
    pub fn stem(&self) -> String {
        format!("{}_p{}", self.strategy.label(), self.attack_probability)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub cells: Vec<CellOutcome>,
    pub groups: Vec<GroupSummary>,
}

impl SweepResult {
    pub fn failures(&self) -> impl Iterator<Item = (&str, &str)> {
        self.cells
            .iter()
            .filter_map(|c| c.result.as_ref().err().map(|e| (c.id.as_str(), e.as_str())))
    }

    pub fn group(&self, strategy: &ExplorationStrategy, p: f64) -> Option<&GroupSummary> {
        self.groups
            .iter()
            .find(|g| g.strategy == *strategy && g.attack_probability == p)
    }

    /// Successful runs of one group, in plan order.
    pub fn runs(&self, strategy_index: usize, p_index: usize) -> Vec<&CellRun> {
        self.cells
            .iter()
            .filter(|c| c.spec.strategy_index == strategy_index && c.spec.p_index == p_index)
            .filter_map(|c| c.result.as_ref().ok())
            .collect()
    }
}

/// Runs every cell of `config` on `workers` threads.
pub fn run_sweep(config: &ExperimentConfig, workers: usize) -> Result<SweepResult, HarnessError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    let cells = plan(config);
    let outcomes = pool.install(|| {
        let maps: Vec<Result<GridWorld, String>> = (0..config.maps)
            .into_par_iter()
            .map(|m| build_map(config, m).map_err(|e| e.to_string()))
            .collect();
        cells
            .par_iter()
            .map(|cell| {
                let id = cell.id(config);
                let result = match &maps[cell.map_index] {
                    Ok(world) => Ok(run_cell_on(world, config, cell, AdversaryMode::Attached)),
                    Err(e) => {
                        log::error!("cell {id}: {e}");
                        Err(e.clone())
                    }
                };
                CellOutcome {
                    spec: *cell,
                    id,
                    result,
                }
            })
            .collect::<Vec<_>>()
    });
    let groups = summarize(config, &outcomes)?;
    Ok(SweepResult {
        config: config.clone(),
        cells: outcomes,
        groups,
    })
}

/// Per-group curves and breakage from completed cells.
pub fn summarize(config: &ExperimentConfig, cells: &[CellOutcome]) -> Result<Vec<GroupSummary>, HarnessError> {
    let strategies = config.strategies();
    let mut groups = Vec::new();
    for (si, strategy) in strategies.iter().enumerate() {
        for (pi, &p) in config.attack_probabilities.iter().enumerate() {
            let runs: Vec<&CellRun> = cells
                .iter()
                .filter(|c| c.spec.strategy_index == si && c.spec.p_index == pi)
                .filter_map(|c| c.result.as_ref().ok())
                .collect();
            if runs.is_empty() {
                continue;
            }
            let replicates: Vec<&[EpisodeRecord]> = runs.iter().map(|r| r.records.as_slice()).collect();
            let window = config.smoothing_window;
            let onset = config.attack_start_episode.min(config.episodes);
            let learning = aggregate(&replicates, window)?;
            let per_replicate: Vec<Curve> = replicates
                .iter()
                .map(|r| performance_vs_cost(r, window, onset))
                .collect();
            let cost = aggregate_cost_curves(&per_replicate, COST_GRID_STEP)?;
            let cost_averaged = averaged_cost_curve(&replicates, &learning, onset);
            let breakage = if onset >= config.breakage.plateau_window {
                replicates
                    .iter()
                    .map(|r| attacks_to_breakage(r, onset, window, &config.breakage))
                    .collect::<Result<Vec<_>, _>>()?
            } else {
                Vec::new()
            };
            groups.push(GroupSummary {
                strategy: *strategy,
                attack_probability: p,
                learning,
                cost,
                cost_averaged,
                attack_totals: runs.iter().map(|r| r.attacks_performed).collect(),
                breakage,
            });
        }
    }
    Ok(groups)
}

// x: mean cumulative attacks across replicates at each post-onset episode;
// episodes with equal x are merged.
fn averaged_cost_curve(replicates: &[&[EpisodeRecord]], learning: &Curve, onset: usize) -> Curve {
    let n = replicates.len() as f64;
    let mut points: Vec<CurvePoint> = Vec::new();
    for (e, lp) in learning.points.iter().enumerate().skip(onset) {
        let x = replicates.iter().map(|r| r[e].cumulative_attacks as f64).sum::<f64>() / n;
        match points.last_mut() {
            Some(last) if last.x == x => {
                let k = last.n as f64;
                last.mean = (last.mean * k + lp.mean) / (k + 1.0);
                last.n += 1;
            }
            _ => points.push(CurvePoint {
                x,
                mean: lp.mean,
                std: lp.std,
                n: 1,
            }),
        }
    }
    Curve { points }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            exploration_values: vec![0.1, 0.5],
            attack_probabilities: vec![0.0, 1.0],
            maps: 2,
            seeds: 2,
            episodes: 150,
            attack_start_episode: 100,
            master_seed: 3,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn plan_cardinality_and_ids() {
        let cfg = small();
        let cells = plan(&cfg);
        assert_eq!(cells.len(), cfg.cell_count());
        assert_eq!(cells.len(), 16);
        let ids: std::collections::HashSet<_> = cells.iter().map(|c| c.id(&cfg)).collect();
        assert_eq!(ids.len(), 16);
        assert_eq!(cells[0].id(&cfg), "eps0.1_p0_m000_r00");
    }

    #[test]
    fn zero_probability_equals_detached() {
        let cfg = small();
        let world = build_map(&cfg, 1).unwrap();
        let cell = CellSpec {
            strategy_index: 0,
            p_index: 0,
            map_index: 1,
            run_index: 1,
        };
        let a = run_cell_on(&world, &cfg, &cell, AdversaryMode::Attached);
        let d = run_cell_on(&world, &cfg, &cell, AdversaryMode::Detached);
        assert_eq!(a.records, d.records);
        assert_eq!(a.attacks_performed, 0);
    }

    #[test]
    fn attacks_only_after_onset() {
        let cfg = small();
        let cell = CellSpec {
            strategy_index: 0,
            p_index: 1,
            map_index: 0,
            run_index: 0,
        };
        let run = run_cell(&cfg, &cell).unwrap();
        assert!(run.records[..100].iter().all(|r| r.cumulative_attacks == 0));
        assert_eq!(run.records.last().unwrap().cumulative_attacks, run.attacks_performed);
        // p = 1 attacks every goal event after the onset.
        assert_eq!(run.attacks_performed, run.goal_events_seen);
        let goals_after = run.records[100..].iter().filter(|r| r.goal_reached).count() as u64;
        assert_eq!(run.attacks_performed, goals_after);
    }

    #[test]
    fn sweep_groups() {
        let cfg = small();
        let res = run_sweep(&cfg, 2).unwrap();
        assert_eq!(res.cells.len(), 16);
        assert_eq!(res.groups.len(), 4);
        assert_eq!(res.failures().count(), 0);
        let g = res
            .group(&ExplorationStrategy::EpsilonGreedy { epsilon: 0.1 }, 0.0)
            .unwrap();
        assert_eq!(g.learning.len(), 150);
        assert_eq!(g.cost.len(), 1);
        assert!(g.attack_totals.iter().all(|&a| a == 0));
        assert_eq!(g.breakage.len(), 4);
    }

    #[test]
    fn failing_maps_are_reported_per_cell() {
        let mut cfg = small();
        cfg.map.width = 5;
        cfg.map.height = 5;
        cfg.map.max_attempts = 5;
        let res = run_sweep(&cfg, 1).unwrap();
        assert_eq!(res.failures().count(), 16);
        assert!(res.groups.is_empty());
        assert!(matches!(
            run_cell(&cfg, &plan(&cfg)[0]),
            Err(HarnessError::MapGeneration { .. })
        ));
    }
}
