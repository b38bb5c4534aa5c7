use serde::{Deserialize, Serialize};

use super::config::BreakageConfig;
use crate::error::MetricsError;
use crate::metrics::{smoothed_returns, EpisodeRecord};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Breakage {
    /// The policy broke at `episode`, after `attacks` injections.
    Broken { episode: usize, attacks: u64 },
    /// Never broke; `attacks` is the total spent over the run.
    NotBroken { attacks: u64 },
}

impl Breakage {
    pub fn is_broken(&self) -> bool {
        matches!(self, Breakage::Broken { .. })
    }

    /// Attack count at breakage, or the run total when the policy survived.
    /// The latter is a lower bound on what breaking it would cost.
    pub fn attacks(&self) -> u64 {
        match *self {
            Breakage::Broken { attacks, .. } | Breakage::NotBroken { attacks } => attacks,
        }
    }
}

/// Mean smoothed return over the `plateau_window` episodes before `onset`.
pub fn pre_onset_plateau(smoothed: &[f64], onset: usize, plateau_window: usize) -> Result<f64, MetricsError> {
    if plateau_window == 0 || onset < plateau_window || onset > smoothed.len() {
        return Err(MetricsError::NoOnset {
            onset,
            window: plateau_window,
        });
    }
    let slice = &smoothed[onset - plateau_window..onset];
    Ok(slice.iter().sum::<f64>() / slice.len() as f64)
}

/// Cumulative attack count at the first episode from `onset` on where the
/// smoothed true return drops below `threshold * plateau` and stays there
/// for `persistence` consecutive episodes.
pub fn attacks_to_breakage(
    records: &[EpisodeRecord],
    onset: usize,
    smoothing_window: usize,
    config: &BreakageConfig,
) -> Result<Breakage, MetricsError> {
    let smoothed = smoothed_returns(records, smoothing_window);
    let plateau = pre_onset_plateau(&smoothed, onset, config.plateau_window)?;
    let limit = config.threshold * plateau;
    let persistence = config.persistence.max(1);
    let mut run = 0;
    for (i, &v) in smoothed.iter().enumerate().skip(onset) {
        if v < limit {
            run += 1;
            if run == persistence {
                let episode = i + 1 - persistence;
                return Ok(Breakage::Broken {
                    episode,
                    attacks: records[episode].cumulative_attacks,
                });
            }
        } else {
            run = 0;
        }
    }
    Ok(Breakage::NotBroken {
        attacks: records.last().map_or(0, |r| r.cumulative_attacks),
    })
}

/// Median of `values`, averaging the middle pair for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records(returns: &[f64], attacks: impl Fn(usize) -> u64) -> Vec<EpisodeRecord> {
        returns
            .iter()
            .enumerate()
            .map(|(i, &r)| EpisodeRecord {
                episode: i,
                steps: 25,
                true_return: r,
                observed_return: r,
                goal_reached: r != 0.0,
                cumulative_attacks: attacks(i),
            })
            .collect()
    }

    #[test]
    fn no_attacks_not_broken() {
        let recs = records(&vec![0.3; 1500], |_| 0);
        let b = attacks_to_breakage(&recs, 1000, 100, &BreakageConfig::default()).unwrap();
        assert_eq!(b, Breakage::NotBroken { attacks: 0 });
    }

    #[test]
    fn immediate_collapse_breaks_inside_first_window() {
        let mut returns = vec![0.5; 1000];
        returns.extend(vec![0.0; 500]);
        let recs = records(&returns, |i| i.saturating_sub(999) as u64);
        let cfg = BreakageConfig {
            threshold: 0.25,
            ..BreakageConfig::default()
        };
        let b = attacks_to_breakage(&recs, 1000, 100, &cfg).unwrap();
        // The smoothed value sinks below 0.25 * 0.5 once fewer than 25 of the
        // last 100 episodes are pre-onset, i.e. from episode 1075 on.
        assert_eq!(
            b,
            Breakage::Broken {
                episode: 1075,
                attacks: 76
            }
        );
    }

    #[test]
    fn short_dip_is_not_breakage() {
        let mut returns = vec![0.3; 1000];
        returns.extend(vec![0.0; 150]);
        returns.extend(vec![0.3; 500]);
        let recs = records(&returns, |_| 0);
        let cfg = BreakageConfig {
            persistence: 200,
            ..BreakageConfig::default()
        };
        assert!(!attacks_to_breakage(&recs, 1000, 100, &cfg).unwrap().is_broken());
    }

    #[test]
    fn needs_an_onset() {
        let recs = records(&[0.1; 50], |_| 0);
        assert!(attacks_to_breakage(&recs, 0, 100, &BreakageConfig::default()).is_err());
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }
}
