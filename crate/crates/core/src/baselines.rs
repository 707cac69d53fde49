//! Reference algorithms: exhaustive clustering, rate-greedy clustering and
//! block-coordinate descent. All share the primal solver of the main loop.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbd_primal::{solve_primal, SlotProblem};
use crate::jo_cdsd::{ProbeSolver, Solution};
use crate::workload::{CacheDecision, ClusterDecision, GIGA};

/// Largest BS count the enumerating baselines accept.
pub const ENUMERATION_LIMIT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    InstantOptimal,
    UplinkOptimal,
    BlockDescent,
}

fn guard(problem: &SlotProblem<'_>) -> Result<()> {
    if problem.bs_count() > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge { bs_count: problem.bs_count(), limit: ENUMERATION_LIMIT });
    }
    Ok(())
}

/// Every size-valid clustering with the exact primal; ties to the lowest mask.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExhaustiveSolver;

impl ProbeSolver for ExhaustiveSolver {
    fn solve(&self, problem: &SlotProblem<'_>, _: ClusterDecision, _: &mut ChaCha8Rng) -> Result<Option<Solution>> {
        guard(problem)?;
        let candidates = ClusterDecision::enumerate(problem.bs_count(), problem.max_cluster);
        let count = candidates.len();
        let mut best: Option<Solution> = None;
        for c in candidates {
            let r = solve_primal(problem, c)?;
            if r.is_feasible() && best.as_ref().is_none_or(|b| r.objective < b.objective) {
                best = Some(Solution { cluster: c, x: r.x, objective: r.objective, iterations: count, flags: Vec::new(), gbd: None });
            }
        }
        Ok(best)
    }
}

/// Size-valid clustering with the smallest mean uplink delay; ties to the
/// lowest mask.
pub fn best_rate_cluster(problem: &SlotProblem<'_>) -> Result<ClusterDecision> {
    guard(problem)?;
    let mut best: Option<(ClusterDecision, f64)> = None;
    for c in ClusterDecision::enumerate(problem.bs_count(), problem.max_cluster) {
        let d = problem.uplink.mean_delay(c);
        if best.is_none_or(|(_, b)| d < b) {
            best = Some((c, d));
        }
    }
    Ok(best.expect("at least one clustering").0)
}

/// Spread the leftover cache and compute of each clustered BS over the
/// catalog in proportion to `popularity`. Demanded services never rise above
/// their current hit probability, so the delay is unchanged.
pub fn popularity_fill(problem: &SlotProblem<'_>, cluster: ClusterDecision, x: &CacheDecision, popularity: &[f64]) -> CacheDecision {
    let mut out = x.clone();
    let members = cluster.members();
    let caps: Vec<f64> = (0..problem.services.len())
        .map(|k| {
            if problem.demands.iter().any(|d| d.service == k) {
                members.iter().map(|&m| x.get(k, m)).fold(0.0, f64::max)
            } else {
                1.0
            }
        })
        .collect();
    for &m in &members {
        let used_cache: f64 = problem.services.iter().map(|s| s.size_gbit() * out.get(s.index, m)).sum();
        let used_compute: f64 = problem.services.iter().map(|s| s.compute_ghz() * out.get(s.index, m)).sum();
        let free_cache = (problem.resources.cache_bits[m] / GIGA - used_cache).max(0.0);
        let free_compute = (problem.resources.compute_hz[m] / GIGA - used_compute).max(0.0);
        let open: Vec<usize> = (0..problem.services.len()).filter(|&k| out.get(k, m) < caps[k]).collect();
        let cache_need: f64 = open.iter().map(|&k| popularity[k] * problem.services[k].size_gbit()).sum();
        let compute_need: f64 = open.iter().map(|&k| popularity[k] * problem.services[k].compute_ghz()).sum();
        if cache_need <= 0.0 || compute_need <= 0.0 {
            continue;
        }
        // shave a relative 1e-12 so rounding never overshoots a capacity
        let t = (free_cache / cache_need).min(free_compute / compute_need) * (1.0 - 1e-12);
        for &k in &open {
            let v = out.get(k, m);
            out.set(k, m, (v + t * popularity[k]).min(caps[k]));
        }
    }
    out
}

/// Clustering by uplink rate alone, caching by delay alone, leftover
/// capacity filled by popularity.
#[derive(Debug, Clone, Default)]
pub struct UplinkSolver {
    pub popularity: Vec<f64>,
}

impl ProbeSolver for UplinkSolver {
    fn solve(&self, problem: &SlotProblem<'_>, _: ClusterDecision, _: &mut ChaCha8Rng) -> Result<Option<Solution>> {
        let cluster = best_rate_cluster(problem)?;
        let delay_only = SlotProblem { backlog: 0.0, ..*problem };
        let r = solve_primal(&delay_only, cluster)?;
        if !r.is_feasible() {
            return Ok(None);
        }
        let x = popularity_fill(problem, cluster, &r.x, &self.popularity);
        Ok(Some(Solution {
            cluster,
            objective: problem.evaluate(cluster, &x),
            x,
            iterations: 1,
            flags: Vec::new(),
            gbd: None,
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockDescentConfig {
    pub max_rounds: usize,
    pub tolerance: f64,
}

impl Default for BlockDescentConfig {
    fn default() -> Self {
        Self { max_rounds: 50, tolerance: 1e-6 }
    }
}

/// Block descent together with its objective after each round.
pub fn block_descent_run(
    problem: &SlotProblem<'_>,
    config: BlockDescentConfig,
    start: ClusterDecision,
) -> Result<Option<(Solution, Vec<f64>)>> {
    let m_count = problem.bs_count();
    let mut starts = vec![start];
    starts.extend((0..m_count).map(|m| ClusterDecision::from_members(m_count, &[m])));
    let mut init = None;
    for c in starts {
        let r = solve_primal(problem, c)?;
        if r.is_feasible() {
            init = Some((c, r.x, r.objective));
            break;
        }
    }
    let Some((mut c, mut x, mut obj)) = init else {
        return Ok(None);
    };
    let mut trace = vec![obj];
    let mut rounds = 0;
    while rounds < config.max_rounds {
        rounds += 1;
        let mut improved = false;
        loop {
            let mut best: Option<(ClusterDecision, f64)> = None;
            for m in 0..m_count {
                let next = c.flipped(m);
                if !next.is_size_valid(problem.max_cluster) || (c.contains(m) && !x.is_zero_column(m)) {
                    continue;
                }
                let v = problem.evaluate(next, &x);
                if v < obj - config.tolerance && best.is_none_or(|(_, b)| v < b) {
                    best = Some((next, v));
                }
            }
            let Some((next, v)) = best else { break };
            c = next;
            obj = v;
            improved = true;
        }
        let r = solve_primal(problem, c)?;
        if r.is_feasible() && r.objective < obj - config.tolerance {
            x = r.x;
            obj = r.objective;
            improved = true;
        }
        trace.push(obj);
        if !improved {
            break;
        }
    }
    Ok(Some((Solution { cluster: c, x, objective: obj, iterations: rounds, flags: Vec::new(), gbd: None }, trace)))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BlockDescentSolver {
    pub config: BlockDescentConfig,
}

impl ProbeSolver for BlockDescentSolver {
    fn solve(&self, problem: &SlotProblem<'_>, start: ClusterDecision, _: &mut ChaCha8Rng) -> Result<Option<Solution>> {
        Ok(block_descent_run(problem, self.config, start)?.map(|(s, _)| s))
    }
}
