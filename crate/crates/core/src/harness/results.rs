//! On-disk layout of a sweep:
//!
//! ```text
//! <sweep-dir>/manifest.json       config, config hash, code version, cell index
//! <sweep-dir>/config.toml         the config that produced the sweep
//! <sweep-dir>/cells/<cell-id>.csv per-episode records
//! <sweep-dir>/curves/*.csv        learning_<stem>.csv, cost_<stem>.csv, cost_avg_<stem>.csv
//! ```

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    plan, summarize, Breakage, BreakageConfig, CellOutcome, CellRun, ExperimentConfig, GroupSummary, SweepResult,
};
use crate::error::HarnessError;
use crate::metrics::{read_episode_csv, write_episode_csv, Curve};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestCell {
    pub id: String,
    pub attacks_performed: Option<u64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestGroup {
    pub stem: String,
    pub attack_totals: Vec<u64>,
    pub breakage: Vec<Breakage>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub code_version: String,
    pub cell_count: usize,
    pub breakage: BreakageConfig,
    pub smoothing_window: usize,
    pub config: ExperimentConfig,
    pub cells: Vec<ManifestCell>,
    pub groups: Vec<ManifestGroup>,
}

/// SHA-256 of the config's canonical TOML, hex encoded.
pub fn config_hash(config: &ExperimentConfig) -> String {
    Sha256::digest(config.to_toml().as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Directory name for a sweep: the config's name, or `sweep-<hash prefix>`.
pub fn sweep_id(config: &ExperimentConfig) -> String {
    match &config.name {
        Some(name) if !name.is_empty() => name.clone(),
        _ => format!("sweep-{}", &config_hash(config)[..12]),
    }
}

fn create_dir(path: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(path).map_err(|e| HarnessError::io(path, e))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| HarnessError::io(path, e))
}

fn manifest(result: &SweepResult) -> Manifest {
    let config = &result.config;
    Manifest {
        config_hash: config_hash(config),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        cell_count: result.cells.len(),
        breakage: config.breakage,
        smoothing_window: config.smoothing_window,
        config: config.clone(),
        cells: result
            .cells
            .iter()
            .map(|c| ManifestCell {
                id: c.id.clone(),
                attacks_performed: c.result.as_ref().ok().map(|r| r.attacks_performed),
                error: c.result.as_ref().err().cloned(),
            })
            .collect(),
        groups: result
            .groups
            .iter()
            .map(|g| ManifestGroup {
                stem: g.stem(),
                attack_totals: g.attack_totals.clone(),
                breakage: g.breakage.clone(),
            })
            .collect(),
    }
}

/// Writes the full layout under `dir` and returns the manifest.
pub fn write_sweep(result: &SweepResult, dir: &Path) -> Result<Manifest, HarnessError> {
    let cells_dir = dir.join("cells");
    create_dir(&cells_dir)?;
    for cell in &result.cells {
        if let Ok(run) = &cell.result {
            write_file(&cells_dir.join(format!("{}.csv", cell.id)), |w| {
                write_episode_csv(&run.records, w)
            })?;
        }
    }
    write_curves(&result.groups, &dir.join("curves"))?;
    write_file(&dir.join(CONFIG_FILE), |w| {
        w.write_all(result.config.to_toml().as_bytes())
    })?;
    let manifest = manifest(result);
    write_file(&dir.join(MANIFEST_FILE), |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        writeln!(w)
    })?;
    Ok(manifest)
}

/// Writes `learning_`, `cost_` and `cost_avg_` curve files for every group.
pub fn write_curves(groups: &[GroupSummary], dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    create_dir(dir)?;
    let mut written = Vec::new();
    for g in groups {
        for (prefix, curve) in [
            ("learning", &g.learning),
            ("cost", &g.cost),
            ("cost_avg", &g.cost_averaged),
        ] {
            let path = dir.join(format!("{prefix}_{}.csv", g.stem()));
            write_file(&path, |w| curve.write_csv(w))?;
            written.push(path);
        }
    }
    Ok(written)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, HarnessError> {
    let path = dir.join(MANIFEST_FILE);
    let file = File::open(&path).map_err(|e| HarnessError::io(&path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| HarnessError::format(&path, e.to_string()))
}

/// Reloads a sweep from disk, recomputing the group summaries from the cell
/// files. Cells the manifest lists as completed but whose file is missing
/// are reported by id.
pub fn load_sweep(dir: &Path) -> Result<SweepResult, HarnessError> {
    let manifest = read_manifest(dir)?;
    let config = manifest.config.clone();
    let specs = plan(&config);
    if specs.len() != manifest.cells.len() {
        return Err(HarnessError::format(
            dir.join(MANIFEST_FILE),
            format!(
                "manifest lists {} cells, config plans {}",
                manifest.cells.len(),
                specs.len()
            ),
        ));
    }
    let mut cells = Vec::with_capacity(specs.len());
    let mut missing = Vec::new();
    for (spec, entry) in specs.into_iter().zip(&manifest.cells) {
        let id = spec.id(&config);
        if id != entry.id {
            return Err(HarnessError::format(
                dir.join(MANIFEST_FILE),
                format!("cell {} out of plan order (expected {id})", entry.id),
            ));
        }
        if let Some(err) = &entry.error {
            cells.push(CellOutcome {
                spec,
                id,
                result: Err(err.clone()),
            });
            continue;
        }
        let path = dir.join("cells").join(format!("{id}.csv"));
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(_) => {
                missing.push(id);
                continue;
            }
        };
        let records = read_episode_csv(BufReader::new(file)).map_err(|m| HarnessError::format(&path, m))?;
        if records.len() != config.episodes {
            return Err(HarnessError::format(
                &path,
                format!("{} episodes, expected {}", records.len(), config.episodes),
            ));
        }
        let attacks_performed = records.last().map_or(0, |r| r.cumulative_attacks);
        cells.push(CellOutcome {
            spec,
            id,
            result: Ok(CellRun {
                records,
                attacks_performed,
                goal_events_seen: 0,
            }),
        });
    }
    if !missing.is_empty() {
        return Err(HarnessError::MissingCells(missing));
    }
    let groups = summarize(&config, &cells)?;
    Ok(SweepResult { config, cells, groups })
}

/// Reads every `*.csv` curve in `dir`, sorted by file name.
pub fn read_curves(dir: &Path) -> Result<Vec<(String, Curve)>, HarnessError> {
    let entries = fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let name = path.file_stem().unwrap().to_string_lossy().into_owned();
            let file = File::open(&path).map_err(|e| HarnessError::io(&path, e))?;
            let curve =
                Curve::read_csv(BufReader::new(file)).map_err(|e| HarnessError::format(&path, e.to_string()))?;
            Ok((name, curve))
        })
        .collect()
}
