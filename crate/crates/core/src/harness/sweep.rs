//! Parameter sweeps over the cost threshold and the cluster-size bound.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::episode::{run_seeds, EpisodeResult};
use crate::harness::scenario::{Algorithm, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepAxis {
    CostThreshold,
    ClusterSize,
}

impl SweepAxis {
    pub fn tag(&self) -> &'static str {
        match self {
            SweepAxis::CostThreshold => "cost_th",
            SweepAxis::ClusterSize => "cluster_b",
        }
    }

    /// Copy of `scenario` with this axis set to `value`.
    pub fn apply(&self, scenario: &Scenario, value: f64) -> Result<Scenario> {
        let mut s = scenario.clone();
        match self {
            SweepAxis::CostThreshold => s.cost_threshold = value,
            SweepAxis::ClusterSize => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::Scenario(format!("cluster size {value} is not a positive integer")));
                }
                s.network.max_cluster = value as usize;
            }
        }
        s.validate()?;
        Ok(s)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cost_th" => Ok(SweepAxis::CostThreshold),
            "cluster_b" => Ok(SweepAxis::ClusterSize),
            _ => Err(Error::Scenario(format!("unknown sweep axis {s:?}"))),
        }
    }
}

/// Aggregate of one (axis value, algorithm) cell over seeds and slots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub algorithm: Algorithm,
    pub seeds: usize,
    pub mean_total_delay: f64,
    /// Half-width of the normal 95% interval over per-seed means.
    pub ci95_total_delay: f64,
    pub mean_uplink_delay: f64,
    pub mean_cost: f64,
}

/// Mean and 95% half-width over per-seed values.
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

pub fn aggregate(axis: SweepAxis, value: f64, algorithm: Algorithm, episodes: &[EpisodeResult]) -> SweepRow {
    let per_seed = |f: fn(&EpisodeResult) -> f64| episodes.iter().map(f).collect::<Vec<_>>();
    let (mean_total_delay, ci95_total_delay) = mean_ci95(&per_seed(|e| e.summary.mean_total_delay));
    SweepRow {
        axis,
        value,
        algorithm,
        seeds: episodes.len(),
        mean_total_delay,
        ci95_total_delay,
        mean_uplink_delay: mean_ci95(&per_seed(|e| e.summary.mean_uplink_delay)).0,
        mean_cost: mean_ci95(&per_seed(|e| e.summary.mean_cost)).0,
    }
}

/// One row per (value, algorithm), values outermost, plus every episode run.
pub fn run_sweep(
    scenario: &Scenario,
    axis: SweepAxis,
    values: &[f64],
    algorithms: &[Algorithm],
    seeds: &[u64],
) -> Result<(Vec<SweepRow>, Vec<EpisodeResult>)> {
    if values.is_empty() || algorithms.is_empty() || seeds.is_empty() {
        return Err(Error::Empty("sweep"));
    }
    let mut rows = Vec::new();
    let mut all = Vec::new();
    for &value in values {
        let s = axis.apply(scenario, value)?;
        for &alg in algorithms {
            let episodes = run_seeds(&s, alg, seeds)?;
            rows.push(aggregate(axis, value, alg, &episodes));
            all.extend(episodes);
        }
    }
    Ok((rows, all))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value_sweep_matches_episodes() {
        let mut s = Scenario::default();
        s.slots = 2;
        s.network.bs_count = 3;
        s.network.max_cluster = 2;
        s.services.count = 2;
        let (rows, eps) = run_sweep(&s, SweepAxis::CostThreshold, &[2.0], &[Algorithm::Instant], &[1, 2]).unwrap();
        assert_eq!(rows.len(), 1);
        let direct = run_seeds(&s, Algorithm::Instant, &[1, 2]).unwrap();
        assert_eq!(eps, direct);
        let mean = (direct[0].summary.mean_total_delay + direct[1].summary.mean_total_delay) / 2.0;
        assert!((rows[0].mean_total_delay - mean).abs() < 1e-15);
    }

    #[test]
    fn axis_parsing_and_validation() {
        assert_eq!("cluster_b".parse::<SweepAxis>().unwrap(), SweepAxis::ClusterSize);
        assert!("b".parse::<SweepAxis>().is_err());
        assert!(SweepAxis::ClusterSize.apply(&Scenario::default(), 1.5).is_err());
        assert!(SweepAxis::CostThreshold.apply(&Scenario::default(), -1.0).is_err());
    }

    #[test]
    fn ci_of_constant_is_zero() {
        assert_eq!(mean_ci95(&[2.0, 2.0, 2.0]), (2.0, 0.0));
    }
}
