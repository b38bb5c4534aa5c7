//! Episode records, discounted returns, smoothing, aggregation across
//! replicates and performance-against-cost curves.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::MetricsError;

/// Default smoothing window, in episodes.
pub const SMOOTHING_WINDOW: usize = 100;

/// Default attack-count grid step for aggregated cost curves.
pub const COST_GRID_STEP: f64 = 10.0;

/// Outcome of one episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub steps: usize,
    /// Discounted return of the environment's rewards.
    pub true_return: f64,
    /// Discounted return of the rewards the learner observed.
    pub observed_return: f64,
    pub goal_reached: bool,
    /// Attacks performed up to the end of this episode.
    pub cumulative_attacks: u64,
}

pub const EPISODE_CSV_HEADER: &str = "episode,steps,true_return,observed_return,goal,attacks_cum";

/// Writes records as CSV with [`EPISODE_CSV_HEADER`]. Floats use the
/// shortest representation that parses back to the same value.
pub fn write_episode_csv<W: Write>(records: &[EpisodeRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{EPISODE_CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{:?},{:?},{},{}",
            r.episode, r.steps, r.true_return, r.observed_return, r.goal_reached as u8, r.cumulative_attacks
        )?;
    }
    Ok(())
}

pub fn read_episode_csv<R: BufRead>(input: R) -> Result<Vec<EpisodeRecord>, String> {
    let mut lines = input.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim_end() == EPISODE_CSV_HEADER => {}
        Some(Ok(h)) => return Err(format!("unexpected header {h:?}")),
        Some(Err(e)) => return Err(e.to_string()),
        None => return Err("empty file".into()),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(format!("line {}: expected 6 fields, got {}", i + 2, f.len()));
        }
        let bad = |what: &str| format!("line {}: bad {what}", i + 2);
        out.push(EpisodeRecord {
            episode: f[0].parse().map_err(|_| bad("episode"))?,
            steps: f[1].parse().map_err(|_| bad("steps"))?,
            true_return: f[2].parse().map_err(|_| bad("true_return"))?,
            observed_return: f[3].parse().map_err(|_| bad("observed_return"))?,
            goal_reached: match f[4] {
                "0" => false,
                "1" => true,
                _ => return Err(bad("goal")),
            },
            cumulative_attacks: f[5].parse().map_err(|_| bad("attacks_cum"))?,
        });
    }
    Ok(out)
}

/// `sum_t gamma^t r_t` where `rewards[i]` arrives after move `t = i + 1`.
/// A goal reached in `k` moves is worth `gamma^k` times its reward.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    let mut discount = gamma;
    let mut total = 0.0;
    for &r in rewards {
        total += discount * r;
        discount *= gamma;
    }
    total
}

/// Trailing moving average. Element `i` is the mean of the last
/// `min(i + 1, window)` values, so the output has the input's length.
pub fn sliding_window_smooth(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be at least 1");
    (0..series.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            let slice = &series[lo..=i];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Ordered `(x, mean, std, n)` samples with strictly increasing `x`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub points: Vec<CurvePoint>,
}

pub const CURVE_CSV_HEADER: &str = "x,mean,std,n";

impl Curve {
    pub fn new(points: Vec<CurvePoint>) -> Result<Self, MetricsError> {
        let curve = Self { points };
        curve.check()?;
        Ok(curve)
    }

    fn check(&self) -> Result<(), MetricsError> {
        for w in self.points.windows(2) {
            if w[0].x.partial_cmp(&w[1].x) != Some(std::cmp::Ordering::Less) {
                return Err(MetricsError::Curve(format!("x not increasing at {}", w[1].x)));
            }
        }
        if let Some(p) = self.points.iter().find(|p| p.n == 0) {
            return Err(MetricsError::Curve(format!("point at x={} has n=0", p.x)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean).collect()
    }

    /// Point at exactly `x`, if any.
    pub fn at(&self, x: f64) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.x == x)
    }

    /// Linear interpolation of the mean at `x`; `None` outside the curve's range.
    pub fn interpolate(&self, x: f64) -> Option<f64> {
        let first = self.points.first()?;
        let last = self.points.last()?;
        if x < first.x || x > last.x {
            return None;
        }
        let i = self.points.partition_point(|p| p.x < x);
        let hi = &self.points[i];
        if hi.x == x || i == 0 {
            return Some(hi.mean);
        }
        let lo = &self.points[i - 1];
        let t = (x - lo.x) / (hi.x - lo.x);
        Some(lo.mean + t * (hi.mean - lo.mean))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CURVE_CSV_HEADER}")?;
        for p in &self.points {
            writeln!(out, "{:?},{:?},{:?},{}", p.x, p.mean, p.std, p.n)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self, MetricsError> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| MetricsError::Curve("empty file".into()))?
            .map_err(|e| MetricsError::Curve(e.to_string()))?;
        if header.trim_end() != CURVE_CSV_HEADER {
            return Err(MetricsError::Curve(format!(
                "header {header:?} does not match {CURVE_CSV_HEADER:?}"
            )));
        }
        let mut points = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| MetricsError::Curve(e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let bad = || MetricsError::Curve(format!("row {}: {line:?}", i + 1));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            points.push(CurvePoint {
                x: f[0].parse().map_err(|_| bad())?,
                mean: f[1].parse().map_err(|_| bad())?,
                std: f[2].parse().map_err(|_| bad())?,
                n: f[3].parse().map_err(|_| bad())?,
            });
        }
        Curve::new(points)
    }
}

/// Per-index mean and sample std across equally long series.
pub fn aggregate_series(series: &[Vec<f64>]) -> Result<Curve, MetricsError> {
    let first = series.first().ok_or(MetricsError::Empty)?;
    let len = first.len();
    if let Some((index, s)) = series.iter().enumerate().find(|(_, s)| s.len() != len) {
        return Err(MetricsError::LengthMismatch {
            index,
            expected: len,
            found: s.len(),
        });
    }
    let mut column = Vec::with_capacity(series.len());
    let points = (0..len)
        .map(|i| {
            column.clear();
            column.extend(series.iter().map(|s| s[i]));
            let (mean, std) = mean_std(&column);
            CurvePoint {
                x: i as f64,
                mean,
                std,
                n: series.len(),
            }
        })
        .collect();
    Ok(Curve { points })
}

/// Smoothed true-return series of one replicate.
pub fn smoothed_returns(records: &[EpisodeRecord], window: usize) -> Vec<f64> {
    let raw: Vec<f64> = records.iter().map(|r| r.true_return).collect();
    sliding_window_smooth(&raw, window)
}

/// Learning curve: each replicate's true returns are smoothed, then
/// averaged per episode.
pub fn aggregate<R: AsRef<[EpisodeRecord]>>(replicates: &[R], window: usize) -> Result<Curve, MetricsError> {
    let series: Vec<Vec<f64>> = replicates
        .iter()
        .map(|r| smoothed_returns(r.as_ref(), window))
        .collect();
    aggregate_series(&series)
}

/// Smoothed true return against cumulative attack count for one replicate,
/// from episode `onset` onwards. Episodes sharing an attack count collapse
/// into one point (mean, std and count of their smoothed returns).
pub fn performance_vs_cost(records: &[EpisodeRecord], window: usize, onset: usize) -> Curve {
    let smoothed = smoothed_returns(records, window);
    let mut points: Vec<CurvePoint> = Vec::new();
    let mut bucket: Vec<f64> = Vec::new();
    let mut current: Option<u64> = None;
    let flush = |x: u64, bucket: &mut Vec<f64>, points: &mut Vec<CurvePoint>| {
        let (mean, std) = mean_std(bucket);
        points.push(CurvePoint {
            x: x as f64,
            mean,
            std,
            n: bucket.len(),
        });
        bucket.clear();
    };
    for (r, &v) in records.iter().zip(&smoothed).skip(onset) {
        if current.is_some_and(|c| c != r.cumulative_attacks) {
            flush(current.unwrap(), &mut bucket, &mut points);
        }
        current = Some(r.cumulative_attacks);
        bucket.push(v);
    }
    if let Some(c) = current {
        flush(c, &mut bucket, &mut points);
    }
    Curve { points }
}

/// Averages per-replicate cost curves on a common attack-count grid
/// (`0, step, 2 step, ...`) by linear interpolation. A grid point only
/// counts replicates whose curve spans it.
pub fn aggregate_cost_curves(curves: &[Curve], step: f64) -> Result<Curve, MetricsError> {
    if curves.is_empty() {
        return Err(MetricsError::Empty);
    }
    assert!(step > 0.0);
    let max_x = curves
        .iter()
        .filter_map(|c| c.points.last().map(|p| p.x))
        .fold(0.0, f64::max);
    let mut points = Vec::new();
    let mut k = 0usize;
    loop {
        let x = k as f64 * step;
        if x > max_x {
            break;
        }
        let values: Vec<f64> = curves.iter().filter_map(|c| c.interpolate(x)).collect();
        if !values.is_empty() {
            let (mean, std) = mean_std(&values);
            points.push(CurvePoint {
                x,
                mean,
                std,
                n: values.len(),
            });
        }
        k += 1;
    }
    Ok(Curve { points })
}
