use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rewardflip::harness::results::{load_sweep, read_curves, sweep_id, write_curves, write_sweep};
use rewardflip::harness::{run_cell_on, AdversaryMode, CellSpec, ExperimentSet, StrategyKind};
use rewardflip::metrics::{smoothed_returns, write_episode_csv};
use rewardflip::{generate_map, plot, run_sweep, verify, ExperimentConfig, GridWorld, HarnessError, MapSpec};

const USAGE: u8 = 1;
const FAILURE: u8 = 2;
const VERIFY_FAILED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "rewardflip",
    version,
    about = "Sign-flip reward attacks on SARSA in random gridworlds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random map and write it in the text map format.
    GenMap(GenMapArgs),
    /// Run a single learner on one map and write its per-episode CSV.
    Run(RunArgs),
    /// Run a full sweep from a TOML config.
    Sweep(SweepArgs),
    /// Recompute aggregated curves from a sweep directory.
    Curves(CurvesArgs),
    /// Render SVG figures from a directory of curve CSVs.
    Plot(PlotArgs),
    /// Run the built-in self-check suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenMapArgs {
    #[arg(long, env = "REWARDFLIP_MASTER_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    obstacle_density: f64,
    #[arg(long, default_value_t = 20)]
    goal_distance_min: usize,
    #[arg(long, default_value_t = 25)]
    goal_distance_max: usize,
    #[arg(long, default_value_t = 20)]
    width: usize,
    #[arg(long, default_value_t = 20)]
    height: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    EpsilonGreedy,
    Softmax,
    Dynamic,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long, value_enum, default_value = "epsilon-greedy")]
    strategy: StrategyArg,
    /// Exploration rate for epsilon-greedy.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Temperature for softmax.
    #[arg(long)]
    tau: Option<f64>,
    /// Horizon L of the dynamic schedule.
    #[arg(long)]
    total_episodes: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    #[arg(long, default_value_t = 1000)]
    attack_start: usize,
    #[arg(long, default_value_t = 3000)]
    episodes: usize,
    #[arg(long, env = "REWARDFLIP_MASTER_SEED", default_value_t = 0)]
    seed: u64,
    /// Slip probability (not stored in map files).
    #[arg(long, default_value_t = 0.1)]
    slip: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, env = "REWARDFLIP_WORKERS")]
    workers: Option<usize>,
    /// Results go to `<out-dir>/<sweep id>`.
    #[arg(long)]
    out_dir: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long, env = "REWARDFLIP_MASTER_SEED")]
    master_seed: Option<u64>,
}

#[derive(Args)]
struct CurvesArgs {
    #[arg(long)]
    sweep_dir: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Directory of curve CSVs, e.g. `<sweep>/curves`.
    #[arg(long)]
    curves: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Smaller sample sizes.
    #[arg(long)]
    quick: bool,
}

/// An error carrying its exit code.
#[derive(Debug)]
struct Exit(u8, anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Exit {
    fn from(e: E) -> Self {
        Exit(FAILURE, e.into())
    }
}

fn usage(msg: impl Into<String>) -> Exit {
    Exit(USAGE, anyhow::anyhow!(msg.into()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    let result = match cli.command {
        Command::GenMap(a) => gen_map(a),
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Curves(a) => curves(a),
        Command::Plot(a) => plot_cmd(a),
        Command::Verify(a) => verify_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Exit(code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn gen_map(a: GenMapArgs) -> Result<(), Exit> {
    let spec = MapSpec {
        width: a.width,
        height: a.height,
        obstacle_density: a.obstacle_density,
        goal_distance_min: a.goal_distance_min,
        goal_distance_max: a.goal_distance_max,
        ..MapSpec::default()
    };
    let world = generate_map(a.seed, &spec)?;
    write(&a.out, world.to_map_string().as_bytes())?;
    for (g, d) in world.goals().iter().zip(world.goal_distances()) {
        println!(
            "goal {} reward {} distance {}",
            g.pos,
            g.reward,
            d.map_or("unreachable".into(), |d| d.to_string())
        );
    }
    Ok(())
}

fn run_config(a: &RunArgs) -> Result<ExperimentConfig, Exit> {
    let mut cfg = ExperimentConfig {
        attack_probabilities: vec![a.p],
        attack_start_episode: a.attack_start,
        episodes: a.episodes,
        maps: 1,
        seeds: 1,
        master_seed: a.seed,
        ..ExperimentConfig::default()
    };
    match a.strategy {
        StrategyArg::EpsilonGreedy => {
            if a.tau.is_some() || a.total_episodes.is_some() {
                return Err(usage("--tau and --total-episodes do not apply to epsilon-greedy"));
            }
            cfg.strategy = StrategyKind::EpsilonGreedy;
            cfg.exploration_values = vec![a.epsilon.ok_or_else(|| usage("epsilon-greedy needs --epsilon"))?];
        }
        StrategyArg::Softmax => {
            if a.epsilon.is_some() || a.total_episodes.is_some() {
                return Err(usage("--epsilon and --total-episodes do not apply to softmax"));
            }
            cfg.strategy = StrategyKind::Softmax;
            cfg.exploration_values = vec![a.tau.ok_or_else(|| usage("softmax needs --tau"))?];
        }
        StrategyArg::Dynamic => {
            if a.epsilon.is_some() || a.tau.is_some() {
                return Err(usage("--epsilon and --tau do not apply to the dynamic schedule"));
            }
            cfg.experiment_set = ExperimentSet::Dynamic;
            cfg.exploration_values = Vec::new();
            cfg.dynamic_total_episodes = a.total_episodes.unwrap_or(a.episodes);
        }
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn run(a: RunArgs) -> Result<(), Exit> {
    let cfg = run_config(&a)?;
    if !(0.0..=1.0).contains(&a.slip) {
        return Err(usage(format!("--slip {} outside [0, 1]", a.slip)));
    }
    let text = fs::read_to_string(&a.map).with_context(|| format!("reading {}", a.map.display()))?;
    let world: GridWorld = text.parse().with_context(|| format!("parsing {}", a.map.display()))?;
    let world = world.with_slip(a.slip);
    let cell = CellSpec {
        strategy_index: 0,
        p_index: 0,
        map_index: 0,
        run_index: 0,
    };
    let run = run_cell_on(&world, &cfg, &cell, AdversaryMode::Attached);
    let mut csv = Vec::new();
    write_episode_csv(&run.records, &mut csv)?;
    write(&a.out, &csv)?;
    let smoothed = smoothed_returns(&run.records, cfg.smoothing_window);
    let goals = run.records.iter().filter(|r| r.goal_reached).count();
    println!(
        "{}: final smoothed return {:.6}, total attacks {}, goals reached {}/{}",
        cell.id(&cfg),
        smoothed.last().copied().unwrap_or(0.0),
        run.attacks_performed,
        goals,
        run.records.len()
    );
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<(), Exit> {
    let text = fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let mut cfg = ExperimentConfig::from_toml(&text).with_context(|| format!("loading {}", a.config.display()))?;
    if let Some(seed) = a.master_seed {
        cfg.master_seed = seed;
    }
    let workers = a
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(usage("--workers must be positive"));
    }
    log::info!("running {} cells on {workers} workers", cfg.cell_count());
    let result = run_sweep(&cfg, workers)?;
    let dir = a.out_dir.join(sweep_id(&cfg));
    let manifest = write_sweep(&result, &dir)?;
    println!(
        "{}: {} cells, config {}",
        dir.display(),
        manifest.cell_count,
        &manifest.config_hash[..12]
    );
    for g in &manifest.groups {
        let broken = g.breakage.iter().filter(|b| b.is_broken()).count();
        if !g.breakage.is_empty() {
            println!("  {}: {broken}/{} replicates broken", g.stem, g.breakage.len());
        }
    }
    let failed: Vec<&str> = result.failures().map(|(id, _)| id).collect();
    if !failed.is_empty() {
        return Err(Exit(
            FAILURE,
            anyhow::anyhow!("{} cells failed: {}", failed.len(), failed.join(", ")),
        ));
    }
    Ok(())
}

fn curves(a: CurvesArgs) -> Result<(), Exit> {
    let result = match load_sweep(&a.sweep_dir) {
        Err(HarnessError::MissingCells(ids)) => {
            return Err(Exit(FAILURE, anyhow::anyhow!("missing cell files: {}", ids.join(", "))));
        }
        r => r?,
    };
    let written = write_curves(&result.groups, &a.sweep_dir.join("curves"))?;
    println!(
        "wrote {} curve files to {}",
        written.len(),
        a.sweep_dir.join("curves").display()
    );
    Ok(())
}

fn plot_cmd(a: PlotArgs) -> Result<(), Exit> {
    let curves = read_curves(&a.curves)?;
    if curves.is_empty() {
        return Err(anyhow::anyhow!("no curve files in {}", a.curves.display()).into());
    }
    let figures = plot::render_families(&curves).map_err(|m| anyhow::anyhow!(m))?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for (file, svg) in &figures {
        write(&a.out.join(file), svg.as_bytes())?;
    }
    println!("wrote {} figures to {}", figures.len(), a.out.display());
    Ok(())
}

fn verify_cmd(a: VerifyArgs) -> Result<(), Exit> {
    let checks = verify::run_all(a.quick);
    for c in &checks {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Exit(VERIFY_FAILED, anyhow::anyhow!("{failed} checks failed")));
    }
    Ok(())
}
