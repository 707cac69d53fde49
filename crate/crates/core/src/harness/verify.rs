//! Oracle-equivalence check: the main algorithm against exhaustive search on
//! small instances, slot by slot on identical states.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::episode::EpisodeContext;
use crate::harness::scenario::{Algorithm, Scenario};
use crate::jo_cdsd::Flag;
use crate::lyapunov::VirtualQueue;

/// Largest relative excess over the exhaustive objective accepted per slot.
pub const VERIFY_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRow {
    pub seed: u64,
    pub slot: u64,
    pub backlog: f64,
    pub jo_objective: f64,
    pub instant_objective: f64,
    /// `(jo - instant) / |instant|`.
    pub rel_gap: f64,
    pub flagged: bool,
}

/// Five BSs, clusters of at most two, three services.
pub fn verify_scenario() -> Scenario {
    let mut s = Scenario::default();
    s.slots = 3;
    s.network.bs_count = 5;
    s.network.max_cluster = 2;
    s.services.count = 3;
    s.tasks.data_mbit = [10.0, 30.0];
    s.tasks.workload_gcycles = [0.1, 0.3];
    s
}

fn bad(flags: &[Flag]) -> bool {
    flags.iter().any(|f| matches!(f, Flag::SolverError | Flag::ConstraintViolation))
}

/// Compare both algorithms on every slot; the queue follows the main
/// algorithm's decisions.
pub fn verify_seed(scenario: &Scenario, seed: u64) -> Result<Vec<VerifyRow>> {
    let ctx = EpisodeContext::new(scenario, seed)?;
    let mut queue = VirtualQueue::new(scenario.cost_threshold)?;
    let mut rows = Vec::with_capacity(scenario.slots);
    for t in 1..=scenario.slots as u64 {
        let inputs = ctx.inputs(t)?;
        let backlog = queue.backlog();
        let jo = ctx.solve_slot(&inputs, Algorithm::JoCdsd, backlog);
        let oracle = ctx.solve_slot(&inputs, Algorithm::Instant, backlog);
        let jo_objective: f64 = jo.iter().map(|g| g.objective).sum();
        let instant_objective: f64 = oracle.iter().map(|g| g.objective).sum();
        let rel_gap = (jo_objective - instant_objective) / instant_objective.abs().max(1e-12);
        let flagged = !(-1e-9..=VERIFY_TOLERANCE).contains(&rel_gap)
            || jo.iter().chain(&oracle).any(|g| bad(&g.flags));
        rows.push(VerifyRow { seed, slot: t, backlog, jo_objective, instant_objective, rel_gap, flagged });
        queue.update(jo.iter().map(|g| g.cost).sum())?;
    }
    Ok(rows)
}

pub fn run_verify(scenario: &Scenario, seeds: &[u64]) -> Result<Vec<VerifyRow>> {
    if seeds.is_empty() {
        return Err(Error::Empty("verify seeds"));
    }
    let per_seed: Vec<Vec<VerifyRow>> = seeds.par_iter().map(|&s| verify_seed(scenario, s)).collect::<Result<_>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

pub fn write_verify(rows: &[VerifyRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["seed", "slot", "backlog", "jo_cdsd_objective", "instant_objective", "rel_gap", "flagged"])?;
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            r.slot.to_string(),
            format!("{}", r.backlog),
            format!("{}", r.jo_objective),
            format!("{}", r.instant_objective),
            format!("{}", r.rel_gap),
            r.flagged.to_string(),
        ])?;
    }
    w.flush().map_err(|source| Error::Io { path: path.display().to_string(), source })
}
