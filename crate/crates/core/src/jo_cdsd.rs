//! The per-slot GBD loop and the multi-user dichotomy on the delay target.

use std::collections::HashSet;
use std::fmt;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbd_master::{run_clustering, CutStore, GibbsConfig};
use crate::gbd_primal::{make_cut, solve_primal, Demand, Mode, SlotProblem};
use crate::workload::{CacheDecision, ClusterDecision, ServiceSpec, Task};

/// Conditions recorded alongside a slot decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Flag {
    /// GBD hit its iteration budget before the gap closed.
    BudgetExhausted,
    /// The master proposed an already evaluated clustering with the gap open.
    Stalled,
    /// The serving-BS caching probability was relaxed below one.
    Relaxed,
    /// No feasible caching decision; every task goes to the cloud.
    CloudOnly,
    /// All-edge delay exceeded all-cloud delay; the bracket was swapped.
    ThetaSwapped,
    /// Some user has a zero uplink rate.
    ZeroRate,
    /// The decision violates a resource or size constraint.
    ConstraintViolation,
    /// The solver returned an error; the slot carries sentinel values.
    SolverError,
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flag::BudgetExhausted => "budget-exhausted",
            Flag::Stalled => "stalled",
            Flag::Relaxed => "relaxed",
            Flag::CloudOnly => "cloud-only",
            Flag::ThetaSwapped => "theta-swapped",
            Flag::ZeroRate => "zero-rate",
            Flag::ConstraintViolation => "constraint-violation",
            Flag::SolverError => "solver-error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdConfig {
    pub tau_max: usize,
    pub epsilon: f64,
    pub gibbs: GibbsConfig,
}

impl Default for GbdConfig {
    fn default() -> Self {
        Self { tau_max: 2000, epsilon: 1e-4, gibbs: GibbsConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    Stalled,
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPoint {
    pub tau: usize,
    pub ubd: f64,
    pub lbd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbdRun {
    pub ubd: f64,
    pub lbd: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub trace: Vec<BoundPoint>,
    /// Master score per Gibbs iteration of the first master solve.
    pub gibbs_trace: Vec<f64>,
    /// Iteration of the last improvement in each master solve.
    pub gibbs_improvements: Vec<usize>,
}

/// A caching and clustering decision for one probe or slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub cluster: ClusterDecision,
    pub x: CacheDecision,
    pub objective: f64,
    pub iterations: usize,
    pub flags: Vec<Flag>,
    pub gbd: Option<GbdRun>,
}

/// Solves one fixed-mode slot problem; `None` when no clustering is feasible.
pub trait ProbeSolver: Sync {
    fn solve(&self, problem: &SlotProblem<'_>, start: ClusterDecision, rng: &mut ChaCha8Rng) -> Result<Option<Solution>>;
}

/// Generalized Benders decomposition with a Gibbs-sampling master.
pub fn run_gbd(
    problem: &SlotProblem<'_>,
    config: &GbdConfig,
    start: ClusterDecision,
    rng: &mut ChaCha8Rng,
) -> Result<(GbdRun, Option<Solution>)> {
    let mut store = CutStore::new();
    let mut evaluated = HashSet::new();
    let mut incumbent: Option<Solution> = None;
    let (mut ubd, mut lbd) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut run = GbdRun {
        ubd,
        lbd,
        epsilon: config.epsilon,
        iterations: 0,
        termination: Termination::BudgetExhausted,
        trace: Vec::new(),
        gibbs_trace: Vec::new(),
        gibbs_improvements: Vec::new(),
    };
    let mut c_bar = start;

    for tau in 1..=config.tau_max {
        let primal = solve_primal(problem, c_bar)?;
        evaluated.insert(c_bar.mask());
        if primal.is_feasible() && primal.objective < ubd {
            ubd = primal.objective;
            incumbent = Some(Solution {
                cluster: c_bar,
                x: primal.x.clone(),
                objective: primal.objective,
                iterations: tau,
                flags: Vec::new(),
                gbd: None,
            });
        }
        store.push(make_cut(problem, &primal, tau));

        let master = run_clustering(
            &mut store,
            problem,
            &config.gibbs,
            start,
            incumbent.as_ref().map(|s| s.cluster),
            rng,
        );
        if tau == 1 {
            run.gibbs_trace = master.trace.clone();
        }
        run.gibbs_improvements.push(master.last_improvement);
        if master.value.bounded() {
            lbd = lbd.max(master.value.value());
        }
        run.trace.push(BoundPoint { tau, ubd, lbd });
        run.iterations = tau;
        if ubd - lbd <= config.epsilon {
            run.termination = Termination::Converged;
            break;
        }
        if evaluated.contains(&master.best.mask()) {
            run.termination = Termination::Stalled;
            break;
        }
        c_bar = master.best;
    }
    run.ubd = ubd;
    run.lbd = lbd;
    if let Some(s) = incumbent.as_mut() {
        s.iterations = run.iterations;
        match run.termination {
            Termination::Converged => {}
            Termination::Stalled => s.flags.push(Flag::Stalled),
            Termination::BudgetExhausted => s.flags.push(Flag::BudgetExhausted),
        }
        s.gbd = Some(run.clone());
    }
    Ok((run, incumbent))
}

#[derive(Debug, Clone, Default)]
pub struct GbdSolver {
    pub config: GbdConfig,
}

impl ProbeSolver for GbdSolver {
    fn solve(&self, problem: &SlotProblem<'_>, start: ClusterDecision, rng: &mut ChaCha8Rng) -> Result<Option<Solution>> {
        Ok(run_gbd(problem, &self.config, start, rng)?.1)
    }
}

fn cloud_only(problem: &SlotProblem<'_>, start: ClusterDecision) -> Solution {
    let x = CacheDecision::zeros(problem.services.len(), problem.bs_count());
    Solution {
        cluster: start,
        objective: problem.evaluate(start, &x),
        x,
        iterations: 0,
        flags: vec![Flag::CloudOnly],
        gbd: None,
    }
}

/// Single-user slot: solve with the serving BS pinned at one, relaxing the
/// pin in steps of 0.1 until some clustering is feasible.
pub fn solve_slot_single(
    problem: &SlotProblem<'_>,
    solver: &dyn ProbeSolver,
    start: ClusterDecision,
    rng: &mut ChaCha8Rng,
) -> Result<Solution> {
    let Mode::Single { edge_delay, backbone_delay, .. } = problem.mode else {
        return Err(Error::Invalid("single-user solve needs single-user mode".into()));
    };
    for step in 0..=10u32 {
        let pin = f64::from(10 - step) / 10.0;
        let p = problem.with_mode(Mode::Single { pin, edge_delay, backbone_delay });
        if let Some(mut s) = solver.solve(&p, start, rng)? {
            if step > 0 {
                s.flags.push(Flag::Relaxed);
            }
            return Ok(s);
        }
    }
    Ok(cloud_only(problem, start))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedTask {
    pub service: usize,
    pub data_bits: f64,
    pub workload_cycles: f64,
    pub users: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedRequestSet {
    /// Users of the group, in input order.
    pub users: Vec<usize>,
    /// One entry per distinct service, by increasing service index.
    pub merged: Vec<MergedTask>,
}

/// Group tasks by service and sum their data sizes and workloads.
pub fn merge_requests(tasks: &[Task]) -> MergedRequestSet {
    let mut merged: Vec<MergedTask> = Vec::new();
    for t in tasks {
        match merged.iter_mut().find(|m| m.service == t.service) {
            Some(m) => {
                m.data_bits += t.data_bits;
                m.workload_cycles += t.workload_cycles;
                m.users.push(t.user);
            }
            None => merged.push(MergedTask {
                service: t.service,
                data_bits: t.data_bits,
                workload_cycles: t.workload_cycles,
                users: vec![t.user],
            }),
        }
    }
    merged.sort_by_key(|m| m.service);
    MergedRequestSet { users: tasks.iter().map(|t| t.user).collect(), merged }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaBounds {
    pub lo: f64,
    pub hi: f64,
    pub swapped: bool,
}

/// All-edge and all-cloud mean processing delays of the group, ordered.
pub fn theta_bounds(set: &MergedRequestSet, services: &[ServiceSpec], backbone_rate: f64) -> ThetaBounds {
    let n = set.users.len() as f64;
    let edge: f64 = set.merged.iter().map(|m| m.workload_cycles / services[m.service].compute_hz).sum::<f64>() / n;
    let cloud: f64 = set.merged.iter().map(|m| m.data_bits / backbone_rate).sum::<f64>() / n;
    if edge > cloud {
        ThetaBounds { lo: cloud, hi: edge, swapped: true }
    } else {
        ThetaBounds { lo: edge, hi: cloud, swapped: false }
    }
}

/// Demands of the merged set and the mean all-cloud delay.
pub fn theta_demands(set: &MergedRequestSet, services: &[ServiceSpec], backbone_rate: f64) -> (Vec<Demand>, f64) {
    let n = set.users.len() as f64;
    let demands = set
        .merged
        .iter()
        .map(|m| Demand {
            service: m.service,
            theta_coeff: (m.data_bits / backbone_rate - m.workload_cycles / services[m.service].compute_hz) / n,
        })
        .collect();
    let mean_backbone = set.merged.iter().map(|m| m.data_bits / backbone_rate).sum::<f64>() / n;
    (demands, mean_backbone)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DichotomyConfig {
    pub iter_max: usize,
    pub epsilon: f64,
}

impl Default for DichotomyConfig {
    fn default() -> Self {
        Self { iter_max: 10, epsilon: 1e-2 }
    }
}

/// Bisection bracket on the delay target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaBracket {
    pub lo: f64,
    pub hi: f64,
    pub mid: f64,
    pub iter: usize,
    pub iter_max: usize,
    pub epsilon: f64,
}

impl ThetaBracket {
    pub fn new(bounds: ThetaBounds, config: DichotomyConfig) -> Self {
        Self {
            lo: bounds.lo,
            hi: bounds.hi,
            mid: 0.5 * (bounds.lo + bounds.hi),
            iter: 0,
            iter_max: config.iter_max,
            epsilon: config.epsilon,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// A feasible probe lowers the upper end, an infeasible one raises the lower.
    pub fn update(&mut self, feasible: bool) {
        if feasible {
            self.hi = self.mid;
        } else {
            self.lo = self.mid;
        }
        self.mid = 0.5 * (self.lo + self.hi);
        self.iter += 1;
    }

    pub fn done(&self) -> bool {
        self.iter >= self.iter_max || (self.iter > 0 && self.width() < self.epsilon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaProbe {
    pub iter: usize,
    pub theta: f64,
    pub feasible: bool,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DichotomyRun {
    pub solution: Solution,
    /// Delay target of the returned probe (the all-cloud delay on fallback).
    pub theta: f64,
    pub bracket: ThetaBracket,
    pub probes: Vec<ThetaProbe>,
}

/// Multi-user slot for one group sharing a cluster: bisect the delay target
/// and keep the feasible probe with the lowest objective.
pub fn solve_slot_multi(
    problem: &SlotProblem<'_>,
    bounds: ThetaBounds,
    config: DichotomyConfig,
    solver: &dyn ProbeSolver,
    start: ClusterDecision,
    rng: &mut ChaCha8Rng,
) -> Result<DichotomyRun> {
    let Mode::Theta { mean_backbone, .. } = problem.mode else {
        return Err(Error::Invalid("multi-user solve needs delay-target mode".into()));
    };
    if !(bounds.lo.is_finite() && bounds.hi.is_finite()) {
        return Err(Error::NonFinite("delay-target bracket"));
    }
    let mut bracket = ThetaBracket::new(bounds, config);
    let mut probes = Vec::new();
    let mut best: Option<(Solution, f64)> = None;
    while !bracket.done() {
        let theta = bracket.mid;
        let p = problem.with_mode(Mode::Theta { theta, mean_backbone });
        let found = solver.solve(&p, start, rng)?;
        let feasible = found.is_some();
        if let Some(s) = found {
            if best.as_ref().is_none_or(|(b, _)| s.objective < b.objective) {
                best = Some((s, theta));
            }
        }
        bracket.update(feasible);
        probes.push(ThetaProbe { iter: bracket.iter, theta, feasible, lo: bracket.lo, hi: bracket.hi });
    }
    let (mut solution, theta) = match best {
        Some(b) => b,
        None => {
            let p = problem.with_mode(Mode::Theta { theta: mean_backbone, mean_backbone });
            (cloud_only(&p, start), mean_backbone)
        }
    };
    if bounds.swapped {
        solution.flags.push(Flag::ThetaSwapped);
    }
    solution.iterations = probes.len();
    Ok(DichotomyRun { solution, theta, bracket, probes })
}
