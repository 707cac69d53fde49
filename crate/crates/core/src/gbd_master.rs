//! Relaxed master problem over the clustering, evaluated through the cut
//! store and minimized by Gibbs sampling with annealing.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gbd_primal::{Cut, CutKind, SlotProblem};
use crate::workload::ClusterDecision;

/// Weight on the summed positive feasibility-cut violations.
pub const FEASIBILITY_PENALTY: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MasterValue {
    /// Max over optimality cuts; `-inf` when there are none.
    pub d0: f64,
    /// `FEASIBILITY_PENALTY` times the summed positive violations.
    pub penalty: f64,
}

impl MasterValue {
    pub fn feasible(&self) -> bool {
        self.penalty == 0.0
    }

    pub fn bounded(&self) -> bool {
        self.d0 > f64::NEG_INFINITY
    }

    /// `d0 + penalty`.
    pub fn value(&self) -> f64 {
        self.d0 + self.penalty
    }

    /// Finite surrogate used for sampling before any optimality cut exists.
    pub fn score(&self) -> f64 {
        if self.bounded() {
            self.value()
        } else {
            self.penalty
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Memo {
    d0: f64,
    violation: f64,
    opt_seen: usize,
    feas_seen: usize,
}

/// Optimality and feasibility cuts of one slot's GBD run. Master values are
/// memoized per clustering and brought up to date as cuts are appended.
#[derive(Debug, Clone, Default)]
pub struct CutStore {
    optimality: Vec<Cut>,
    feasibility: Vec<Cut>,
    memo: HashMap<u64, Memo>,
}

impl CutStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, cut: Cut) {
        match cut.kind {
            CutKind::Optimality => self.optimality.push(cut),
            CutKind::Feasibility => self.feasibility.push(cut),
        }
    }

    pub fn optimality_cuts(&self) -> &[Cut] {
        &self.optimality
    }

    pub fn feasibility_cuts(&self) -> &[Cut] {
        &self.feasibility
    }

    pub fn is_empty(&self) -> bool {
        self.optimality.is_empty() && self.feasibility.is_empty()
    }

    pub fn len(&self) -> usize {
        self.optimality.len() + self.feasibility.len()
    }

    /// `d0 = max_cuts L*(c)` plus the feasibility penalty.
    pub fn master_value(&mut self, problem: &SlotProblem<'_>, cluster: ClusterDecision) -> MasterValue {
        let entry = self.memo.entry(cluster.mask()).or_insert(Memo {
            d0: f64::NEG_INFINITY,
            violation: 0.0,
            opt_seen: 0,
            feas_seen: 0,
        });
        for cut in &self.optimality[entry.opt_seen..] {
            entry.d0 = entry.d0.max(cut.evaluate(problem, cluster));
        }
        for cut in &self.feasibility[entry.feas_seen..] {
            entry.violation += cut.evaluate(problem, cluster).max(0.0);
        }
        entry.opt_seen = self.optimality.len();
        entry.feas_seen = self.feasibility.len();
        MasterValue { d0: entry.d0, penalty: FEASIBILITY_PENALTY * entry.violation }
    }
}

/// `P(c_m = 1 | rest)` from the two master values, in log-space. Returns the
/// probability and whether both states were infinite (then 0.5).
pub fn conditional_distribution(f0: f64, f1: f64, phi: f64) -> (f64, bool) {
    match (f0.is_finite(), f1.is_finite()) {
        (false, false) => (0.5, true),
        (true, false) => (0.0, false),
        (false, true) => (1.0, false),
        (true, true) => {
            let z = (f1 - f0) / phi;
            let p = if z > 0.0 {
                let e = (-z).exp();
                e / (1.0 + e)
            } else {
                1.0 / (1.0 + z.exp())
            };
            (p, false)
        }
    }
}

/// Exploration probability `1 / (1 + exp(min(F~ - F, rho) / phi))`.
pub fn acceptance_probability(f_new: f64, f_current: f64, rho: f64, phi: f64) -> f64 {
    if !f_new.is_finite() {
        return 0.0;
    }
    let diff = (f_new - f_current).min(rho);
    1.0 / (1.0 + (diff / phi).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub budget: usize,
    pub phi_start: f64,
    pub phi_end: f64,
    pub rho: f64,
    /// Stop after this many consecutive proposals without an accepted move
    /// that lowers the current value.
    pub plateau: Option<usize>,
    /// Independent chains: the first from the given start, the others from
    /// the best-scoring single BSs. The best result wins, ties to the
    /// earliest chain.
    pub restarts: usize,
    /// Keep every visited state (for concentration diagnostics).
    pub record_visits: bool,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self { budget: 2000, phi_start: 0.8, phi_end: 0.01, rho: 0.5, plateau: Some(200), restarts: 8, record_visits: false }
    }
}

impl GibbsConfig {
    /// Geometric schedule from `phi_start` to `phi_end` over the budget.
    pub fn temperature(&self, iteration: usize) -> f64 {
        if self.budget <= 1 {
            return self.phi_end;
        }
        let frac = iteration.min(self.budget - 1) as f64 / (self.budget - 1) as f64;
        self.phi_start * (self.phi_end / self.phi_start).powf(frac)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsState {
    pub cluster: ClusterDecision,
    pub value: f64,
    pub phi: f64,
    pub rho: f64,
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub best: ClusterDecision,
    pub value: MasterValue,
    pub iterations: usize,
    /// Iteration at which the best state was last improved.
    pub last_improvement: usize,
    /// Master score of the current state after each iteration.
    pub trace: Vec<f64>,
    pub visits: Vec<ClusterDecision>,
    /// Number of vertex updates where both states were infinite.
    pub degenerate_updates: usize,
}

fn score_of(store: &mut CutStore, problem: &SlotProblem<'_>, cluster: ClusterDecision) -> f64 {
    if !cluster.is_size_valid(problem.max_cluster) {
        return f64::INFINITY;
    }
    store.master_value(problem, cluster).score()
}

/// One vertex update: resample `c_m` from its conditional, then accept the
/// change with the exploration probability.
pub fn gibbs_step<R: Rng + ?Sized>(
    state: &mut GibbsState,
    vertex: usize,
    store: &mut CutStore,
    problem: &SlotProblem<'_>,
    rng: &mut R,
) -> bool {
    let f0 = score_of(store, problem, state.cluster.with(vertex, false));
    let f1 = score_of(store, problem, state.cluster.with(vertex, true));
    let (p1, degenerate) = conditional_distribution(f0, f1, state.phi);
    let proposal = rng.random::<f64>() < p1;
    if proposal != state.cluster.contains(vertex) {
        let f_new = if proposal { f1 } else { f0 };
        let eta = acceptance_probability(f_new, state.value, state.rho, state.phi);
        if rng.random::<f64>() < eta {
            state.cluster = state.cluster.with(vertex, proposal);
            state.value = f_new;
        }
    }
    state.iteration += 1;
    degenerate
}

struct Chain {
    best: (ClusterDecision, f64),
    last_improvement: usize,
    iterations: usize,
}

fn run_chain<R: Rng + ?Sized>(
    store: &mut CutStore,
    problem: &SlotProblem<'_>,
    config: &GibbsConfig,
    start: ClusterDecision,
    rng: &mut R,
    out: &mut ClusteringResult,
    record: bool,
) -> Chain {
    let m_count = problem.bs_count();
    let mut state = GibbsState {
        cluster: start,
        value: score_of(store, problem, start),
        phi: config.temperature(0),
        rho: config.rho,
        iteration: 0,
    };
    let mut best = (state.cluster, state.value);
    let mut last_improvement = 0;
    let mut last_descent = 0;
    let mut order: Vec<usize> = (0..m_count).collect();

    for i in 0..config.budget {
        if i % m_count == 0 {
            order.shuffle(rng);
        }
        state.phi = config.temperature(i);
        let before = state.value;
        if gibbs_step(&mut state, order[i % m_count], store, problem, rng) {
            out.degenerate_updates += 1;
        }
        if state.value < before {
            last_descent = i + 1;
        }
        if record {
            out.trace.push(state.value);
            if config.record_visits {
                out.visits.push(state.cluster);
            }
        }
        if state.value < best.1 {
            best = (state.cluster, state.value);
            last_improvement = i + 1;
        }
        if config.plateau.is_some_and(|p| i + 1 - last_descent >= p) {
            break;
        }
    }
    Chain { best, last_improvement, iterations: state.iteration }
}

/// Gibbs-sampling minimization of the master from `start`; `incumbent`, when
/// given, competes with the best visited state. The trace and visits cover
/// the first chain.
pub fn run_clustering<R: Rng + ?Sized>(
    store: &mut CutStore,
    problem: &SlotProblem<'_>,
    config: &GibbsConfig,
    start: ClusterDecision,
    incumbent: Option<ClusterDecision>,
    rng: &mut R,
) -> ClusteringResult {
    let mut out = ClusteringResult {
        best: start,
        value: MasterValue { d0: f64::NEG_INFINITY, penalty: 0.0 },
        iterations: 0,
        last_improvement: 0,
        trace: Vec::with_capacity(config.budget),
        visits: Vec::new(),
        degenerate_updates: 0,
    };
    let mut singles: Vec<(f64, ClusterDecision)> = (0..problem.bs_count())
        .map(|m| ClusterDecision::from_members(problem.bs_count(), &[m]))
        .filter(|c| *c != start)
        .map(|c| (score_of(store, problem, c), c))
        .collect();
    singles.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.mask().cmp(&b.1.mask())));
    let mut best: Option<(ClusterDecision, f64)> = None;
    for chain in 0..config.restarts.max(1) {
        let from = if chain == 0 { start } else { singles.get(chain - 1).map_or(start, |s| s.1) };
        let c = run_chain(store, problem, config, from, rng, &mut out, chain == 0);
        out.iterations += c.iterations;
        if best.is_none_or(|b| c.best.1 < b.1) {
            best = Some(c.best);
            out.last_improvement = c.last_improvement;
        }
    }
    let mut best = best.expect("at least one chain");
    if let Some(inc) = incumbent {
        let f = score_of(store, problem, inc);
        if f < best.1 {
            best = (inc, f);
        }
    }
    out.best = best.0;
    out.value = store.master_value(problem, best.0);
    out
}

/// Exhaustive master minimum over every size-valid clustering; ties go to the
/// lowest mask.
pub fn exhaustive_master(store: &mut CutStore, problem: &SlotProblem<'_>) -> (ClusterDecision, MasterValue) {
    let mut best: Option<(ClusterDecision, MasterValue)> = None;
    for c in ClusterDecision::enumerate(problem.bs_count(), problem.max_cluster) {
        let v = store.master_value(problem, c);
        if best.is_none_or(|(_, b)| v.score() < b.score()) {
            best = Some((c, v));
        }
    }
    best.expect("at least one size-valid clustering")
}
