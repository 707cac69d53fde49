//! Caching subproblem with the clustering fixed, its minimum-violation
//! variant, and the Lagrangian cuts handed to the master.
//!
//! The max-equality on the requested service is handled by enumerating which
//! clustered BS serves each demand. Each branch is a small LP over the
//! caching probabilities of the clustered BSs; the best branch wins, ties to
//! the first branch in lexicographic member order.
//!
//! Cuts dualize the resource rows (and the delay-target rows in multi-user
//! mode) and keep the box, the serving-BS pin and the argmax structure in the
//! inner set, so the inner infimum has a closed form for any clustering.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::numerics::{lp_solve, LpProblem, LpStatus, RowSense};
use crate::radio::{cluster_rate, uplink_delay, ChannelRealization, Topology};
use crate::workload::{BsResources, CacheDecision, ClusterDecision, ServiceSpec, GIGA};

/// Half-width of the band that turns the delay-target equality into two rows.
pub const THETA_BAND: f64 = 1e-9;

/// Scale applied to minimum-violation multipliers of infeasible branches
/// when they are folded into an optimality cut.
pub const INFEASIBLE_BRANCH_WEIGHT: f64 = 1e3;

const MAX_BRANCH_WEIGHT: f64 = 1e12;

/// Mean uplink delay of the served users as a function of the clustering.
pub trait UplinkOracle: Sync {
    fn mean_delay(&self, cluster: ClusterDecision) -> f64;
}

/// Uplink delay that does not depend on the clustering.
#[derive(Debug, Clone, Copy)]
pub struct ConstantUplink(pub f64);

impl UplinkOracle for ConstantUplink {
    fn mean_delay(&self, _: ClusterDecision) -> f64 {
        self.0
    }
}

/// Zero-forcing uplink of a user group sharing one cluster, memoized per mask.
/// Users outside the group interfere through each member's combiner.
pub struct ZfUplink<'a> {
    channels: &'a ChannelRealization,
    topology: &'a Topology,
    /// `(user, data bits)` of the group.
    users: Vec<(usize, f64)>,
    interferers: Vec<usize>,
    cache: Mutex<HashMap<u64, Vec<f64>>>,
}

impl<'a> ZfUplink<'a> {
    pub fn new(
        channels: &'a ChannelRealization,
        topology: &'a Topology,
        users: Vec<(usize, f64)>,
        interferers: Vec<usize>,
    ) -> Self {
        Self { channels, topology, users, interferers, cache: Mutex::new(HashMap::new()) }
    }

    /// Per-user uplink delays, in group order. Numerical failures in the
    /// beamformer count as a zero rate.
    pub fn user_delays(&self, cluster: ClusterDecision) -> Vec<f64> {
        if let Some(v) = self.cache.lock().expect("uplink cache").get(&cluster.mask()) {
            return v.clone();
        }
        let members = cluster.members();
        let group: Vec<usize> = self.users.iter().map(|&(u, _)| u).collect();
        let delays: Vec<f64> = self
            .users
            .iter()
            .map(|&(u, bits)| {
                if members.is_empty() {
                    return f64::INFINITY;
                }
                let rate = cluster_rate(self.channels, self.topology, u, &members, &group, &self.interferers)
                    .unwrap_or(0.0);
                uplink_delay(bits, rate)
            })
            .collect();
        self.cache.lock().expect("uplink cache").insert(cluster.mask(), delays.clone());
        delays
    }

    pub fn user_rates(&self, cluster: ClusterDecision) -> Vec<f64> {
        self.user_delays(cluster)
            .iter()
            .zip(&self.users)
            .map(|(d, &(_, bits))| if d.is_finite() { bits / d } else { 0.0 })
            .collect()
    }
}

impl UplinkOracle for ZfUplink<'_> {
    fn mean_delay(&self, cluster: ClusterDecision) -> f64 {
        let d = self.user_delays(cluster);
        d.iter().sum::<f64>() / d.len() as f64
    }
}

/// One requested service; in multi-user mode, the merge of all requests for it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Demand {
    pub service: usize,
    /// Weight of this service's hit probability in the delay-target row:
    /// the summed `(D_bkb - D_edge)` of its requests over the user count.
    pub theta_coeff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// One task; the serving BS caches the service with probability `pin`.
    Single { pin: f64, edge_delay: f64, backbone_delay: f64 },
    /// Mean processing delay of the group held at `theta`.
    Theta { theta: f64, mean_backbone: f64 },
}

/// Everything that defines one slot's caching subproblem except the clustering.
#[derive(Clone, Copy)]
pub struct SlotProblem<'a> {
    pub services: &'a [ServiceSpec],
    pub resources: &'a BsResources,
    pub backlog: f64,
    pub threshold: f64,
    pub v: f64,
    pub max_cluster: usize,
    pub demands: &'a [Demand],
    pub mode: Mode,
    pub uplink: &'a dyn UplinkOracle,
}

impl<'a> SlotProblem<'a> {
    pub fn bs_count(&self) -> usize {
        self.resources.bs_count()
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        Self { mode, ..*self }
    }

    /// Hit-probability bounds of a demand's serving BS.
    fn serve_bounds(&self) -> (f64, f64) {
        match self.mode {
            Mode::Single { pin, .. } => (pin, pin),
            Mode::Theta { .. } => (0.0, 1.0),
        }
    }

    fn theta_rhs(&self) -> Option<f64> {
        match self.mode {
            Mode::Theta { theta, mean_backbone } => Some(mean_backbone - theta),
            Mode::Single { .. } => None,
        }
    }

    /// Part of the objective that does not depend on the caching variables.
    pub fn constant(&self, cluster: ClusterDecision) -> f64 {
        let delay = match self.mode {
            Mode::Single { pin, edge_delay, backbone_delay } => {
                pin * edge_delay + (1.0 - pin) * backbone_delay
            }
            Mode::Theta { theta, .. } => theta,
        };
        -self.backlog * self.threshold + self.v * (self.uplink.mean_delay(cluster) + delay)
    }

    /// Cost weight `C(t) xi_k s_k` of caching service `k` on a clustered BS.
    fn cost_coeff(&self, k: usize) -> f64 {
        self.backlog * self.services[k].full_cost()
    }

    /// Mean expected processing delay of a decision, hit probabilities taken
    /// at the serving BS.
    pub fn processing_delay(&self, cluster: ClusterDecision, x: &CacheDecision) -> f64 {
        let hit = |k: usize| cluster.members().iter().map(|&m| x.get(k, m)).fold(0.0, f64::max);
        match self.mode {
            Mode::Single { edge_delay, backbone_delay, .. } => {
                let p = hit(self.demands[0].service);
                p * edge_delay + (1.0 - p) * backbone_delay
            }
            Mode::Theta { mean_backbone, .. } => {
                mean_backbone - self.demands.iter().map(|d| d.theta_coeff * hit(d.service)).sum::<f64>()
            }
        }
    }

    /// Drift-plus-penalty value of a concrete decision.
    pub fn evaluate(&self, cluster: ClusterDecision, x: &CacheDecision) -> f64 {
        let arrival: f64 = cluster
            .members()
            .iter()
            .map(|&m| self.services.iter().map(|s| s.full_cost() * x.get(s.index, m)).sum::<f64>())
            .sum();
        self.backlog * (arrival - self.threshold)
            + self.v * (self.uplink.mean_delay(cluster) + self.processing_delay(cluster, x))
    }
}

/// Multipliers in the `(cache per BS, compute per BS, max)` layout, plus the
/// two delay-target rows in multi-user mode. All entries are non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub cache: Vec<f64>,
    pub compute: Vec<f64>,
    pub max: f64,
    pub theta_le: f64,
    pub theta_ge: f64,
}

impl Multipliers {
    pub fn zeros(bs_count: usize) -> Self {
        Self { cache: vec![0.0; bs_count], compute: vec![0.0; bs_count], max: 0.0, theta_le: 0.0, theta_ge: 0.0 }
    }

    /// Flat `2M + 1` vector.
    pub fn as_layout(&self) -> Vec<f64> {
        let mut v = self.cache.clone();
        v.extend(&self.compute);
        v.push(self.max);
        v
    }

    pub fn sum(&self) -> f64 {
        self.cache.iter().chain(&self.compute).sum::<f64>() + self.max + self.theta_le + self.theta_ge
    }

    fn scaled(&self, a: f64) -> Self {
        Self {
            cache: self.cache.iter().map(|v| v * a).collect(),
            compute: self.compute.iter().map(|v| v * a).collect(),
            max: self.max * a,
            theta_le: self.theta_le * a,
            theta_ge: self.theta_ge * a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimalStatus {
    Feasible,
    Infeasible,
}

/// Outcome of one serving-BS branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchOutcome {
    /// Serving BS per demand.
    pub assignment: Vec<usize>,
    pub feasible: bool,
    /// Objective when feasible, minimum violation otherwise.
    pub value: f64,
    pub x: CacheDecision,
    pub multipliers: Multipliers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalResult {
    pub cluster: ClusterDecision,
    pub status: PrimalStatus,
    pub x: CacheDecision,
    /// Drift-plus-penalty value when feasible; minimum violation when not.
    pub objective: f64,
    /// `mu` when feasible, normalized `lambda` when not.
    pub multipliers: Multipliers,
    /// Serving BS per demand of the winning branch.
    pub assignment: Vec<usize>,
    pub branches: Vec<BranchOutcome>,
}

impl PrimalResult {
    pub fn is_feasible(&self) -> bool {
        self.status == PrimalStatus::Feasible
    }
}

/// Serving-BS assignments over `members`, lexicographic in member order.
pub fn assignments(members: &[usize], demands: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..demands {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                members.iter().map(move |&m| {
                    let mut p = prefix.clone();
                    p.push(m);
                    p
                })
            })
            .collect();
    }
    out
}

struct BranchLp {
    lp: LpProblem,
    cache_rows: Vec<usize>,
    compute_rows: Vec<usize>,
    theta_rows: Option<(usize, usize)>,
    pinned: Option<usize>,
}

/// LP of one branch over the clustered BSs. With `relaxed`, a trailing
/// variable `alpha >= 0` is subtracted from every resource and delay-target
/// row and becomes the only objective.
fn build_branch(problem: &SlotProblem<'_>, members: &[usize], assignment: &[usize], relaxed: bool) -> BranchLp {
    let width = members.len();
    let k_count = problem.services.len();
    let var = |k: usize, j: usize| k * width + j;
    let n = k_count * width + usize::from(relaxed);
    let mut lp = LpProblem::unit_box(n);
    let alpha = relaxed.then_some(n - 1);
    if let Some(a) = alpha {
        lp.bounds[a] = (0.0, f64::INFINITY);
        lp.objective[a] = 1.0;
    } else {
        for k in 0..k_count {
            for j in 0..width {
                lp.objective[var(k, j)] = problem.cost_coeff(k);
            }
        }
    }
    let slack = |row: &mut Vec<f64>, coef: f64| {
        if let Some(a) = alpha {
            row[a] = coef;
        }
    };

    let mut cache_rows = Vec::with_capacity(width);
    let mut compute_rows = Vec::with_capacity(width);
    for (j, &m) in members.iter().enumerate() {
        let mut row = vec![0.0; n];
        for (k, s) in problem.services.iter().enumerate() {
            row[var(k, j)] = s.size_gbit();
        }
        slack(&mut row, -1.0);
        cache_rows.push(lp.add_row(row, RowSense::Le, problem.resources.cache_bits[m] / GIGA));
        let mut row = vec![0.0; n];
        for (k, s) in problem.services.iter().enumerate() {
            row[var(k, j)] = s.compute_ghz();
        }
        slack(&mut row, -1.0);
        compute_rows.push(lp.add_row(row, RowSense::Le, problem.resources.compute_hz[m] / GIGA));
    }

    let col = |m: usize| members.iter().position(|&x| x == m).expect("assignment inside cluster");
    for (d, &serve) in problem.demands.iter().zip(assignment) {
        let js = col(serve);
        for j in 0..width {
            if j != js {
                let mut row = vec![0.0; n];
                row[var(d.service, j)] = 1.0;
                row[var(d.service, js)] = -1.0;
                lp.add_row(row, RowSense::Le, 0.0);
            }
        }
    }

    let mut pinned = None;
    match problem.mode {
        Mode::Single { pin, .. } => {
            let v = var(problem.demands[0].service, col(assignment[0]));
            lp.bounds[v] = (pin, pin);
            pinned = Some(v);
        }
        Mode::Theta { .. } => {}
    }

    let theta_rows = problem.theta_rhs().map(|rhs| {
        let mut row = vec![0.0; n];
        for (d, &serve) in problem.demands.iter().zip(assignment) {
            row[var(d.service, col(serve))] += d.theta_coeff;
        }
        let mut le = row.clone();
        slack(&mut le, -1.0);
        let mut ge = row;
        slack(&mut ge, 1.0);
        (
            lp.add_row(le, RowSense::Le, rhs + THETA_BAND),
            lp.add_row(ge, RowSense::Ge, rhs - THETA_BAND),
        )
    });

    BranchLp { lp, cache_rows, compute_rows, theta_rows, pinned }
}

fn scatter(problem: &SlotProblem<'_>, members: &[usize], point: &[f64]) -> CacheDecision {
    let k_count = problem.services.len();
    let mut x = CacheDecision::zeros(k_count, problem.bs_count());
    for k in 0..k_count {
        for (j, &m) in members.iter().enumerate() {
            x.set(k, m, point[k * members.len() + j].clamp(0.0, 1.0));
        }
    }
    x
}

fn row_multipliers(problem: &SlotProblem<'_>, members: &[usize], b: &BranchLp, duals: &[f64]) -> Multipliers {
    let mut mult = Multipliers::zeros(problem.bs_count());
    for (j, &m) in members.iter().enumerate() {
        mult.cache[m] = duals[b.cache_rows[j]].max(0.0);
        mult.compute[m] = duals[b.compute_rows[j]].max(0.0);
    }
    if let Some((le, ge)) = b.theta_rows {
        mult.theta_le = duals[le].max(0.0);
        mult.theta_ge = (-duals[ge]).max(0.0);
    }
    mult
}

fn check_cluster(problem: &SlotProblem<'_>, cluster: ClusterDecision) -> Result<Vec<usize>> {
    if cluster.bs_count() != problem.bs_count() {
        return Err(Error::Dimension {
            op: "solve_primal",
            detail: format!("cluster over {} BSs, resources for {}", cluster.bs_count(), problem.bs_count()),
        });
    }
    if !cluster.is_size_valid(problem.max_cluster) {
        return Err(Error::Invalid(format!("cluster size {} outside [1, {}]", cluster.size(), problem.max_cluster)));
    }
    if problem.demands.is_empty() || problem.demands.iter().any(|d| d.service >= problem.services.len()) {
        return Err(Error::Invalid("demands must name catalog services".into()));
    }
    if matches!(problem.mode, Mode::Single { .. }) && problem.demands.len() != 1 {
        return Err(Error::Invalid("single-user mode takes exactly one demand".into()));
    }
    Ok(cluster.members())
}

/// Minimum-violation LP of one branch.
fn relaxed_branch(problem: &SlotProblem<'_>, members: &[usize], assignment: &[usize], index: usize) -> Result<BranchOutcome> {
    let b = build_branch(problem, members, assignment, true);
    let sol = lp_solve(&b.lp).map_err(|e| Error::Lp { branch: index, detail: e.to_string() })?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp { branch: index, detail: format!("minimum-violation LP ended {:?}", sol.status) });
    }
    let mut lambda = row_multipliers(problem, members, &b, &sol.duals);
    let total = lambda.sum();
    if total > 1e-12 {
        lambda = lambda.scaled(1.0 / total);
    } else {
        let rows = 2 * members.len() + if b.theta_rows.is_some() { 2 } else { 0 };
        let w = 1.0 / rows as f64;
        for &m in members {
            lambda.cache[m] = w;
            lambda.compute[m] = w;
        }
        if b.theta_rows.is_some() {
            lambda.theta_le = w;
            lambda.theta_ge = w;
        }
    }
    Ok(BranchOutcome {
        assignment: assignment.to_vec(),
        feasible: false,
        value: sol.objective.max(0.0),
        x: scatter(problem, members, &sol.point),
        multipliers: lambda,
    })
}

fn feasible_branch(problem: &SlotProblem<'_>, members: &[usize], assignment: &[usize], index: usize, constant: f64) -> Result<Option<BranchOutcome>> {
    let b = build_branch(problem, members, assignment, false);
    let sol = lp_solve(&b.lp).map_err(|e| Error::Lp { branch: index, detail: e.to_string() })?;
    match sol.status {
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(Error::Lp { branch: index, detail: "unbounded caching LP".into() }),
        LpStatus::Optimal => {
            let mut mu = row_multipliers(problem, members, &b, &sol.duals);
            if let Some(v) = b.pinned {
                mu.max = sol.reduced_costs[v].max(0.0);
            }
            Ok(Some(BranchOutcome {
                assignment: assignment.to_vec(),
                feasible: true,
                value: sol.objective + constant,
                x: scatter(problem, members, &sol.point),
                multipliers: mu,
            }))
        }
    }
}

/// Solve the caching subproblem at `cluster` over every serving-BS branch.
/// Infeasible branches also carry their minimum-violation multipliers.
pub fn solve_primal(problem: &SlotProblem<'_>, cluster: ClusterDecision) -> Result<PrimalResult> {
    let members = check_cluster(problem, cluster)?;
    let constant = problem.constant(cluster);
    let mut branches = Vec::new();
    for (i, a) in assignments(&members, problem.demands.len()).iter().enumerate() {
        let outcome = match feasible_branch(problem, &members, a, i, constant)? {
            Some(o) => o,
            None => relaxed_branch(problem, &members, a, i)?,
        };
        branches.push(outcome);
    }
    let pick = |feasible: bool| {
        branches
            .iter()
            .filter(|b| b.feasible == feasible)
            .fold(None::<&BranchOutcome>, |best, b| match best {
                Some(c) if c.value <= b.value => Some(c),
                _ => Some(b),
            })
    };
    let (status, best) = match pick(true) {
        Some(b) => (PrimalStatus::Feasible, b),
        None => (PrimalStatus::Infeasible, pick(false).expect("at least one branch")),
    };
    Ok(PrimalResult {
        cluster,
        status,
        x: best.x.clone(),
        objective: best.value,
        multipliers: best.multipliers.clone(),
        assignment: best.assignment.clone(),
        branches: branches.clone(),
    })
}

/// Minimum-violation problem at `cluster`: resource (and delay-target) rows
/// relaxed by a common slack, minimized over branches.
pub fn solve_infeasible_primal(problem: &SlotProblem<'_>, cluster: ClusterDecision) -> Result<PrimalResult> {
    let members = check_cluster(problem, cluster)?;
    let mut branches = Vec::new();
    for (i, a) in assignments(&members, problem.demands.len()).iter().enumerate() {
        branches.push(relaxed_branch(problem, &members, a, i)?);
    }
    let best = branches
        .iter()
        .fold(None::<&BranchOutcome>, |best, b| match best {
            Some(c) if c.value <= b.value => Some(c),
            _ => Some(b),
        })
        .expect("at least one branch");
    Ok(PrimalResult {
        cluster,
        status: PrimalStatus::Infeasible,
        x: best.x.clone(),
        objective: best.value,
        multipliers: best.multipliers.clone(),
        assignment: best.assignment.clone(),
        branches: branches.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutKind {
    Optimality,
    Feasibility,
}

/// Frozen multipliers of one serving-BS branch, pre-multiplied into the
/// per-variable coefficients and per-BS capacity weights.
#[derive(Debug, Clone, PartialEq)]
struct CutBranch {
    assignment: Vec<usize>,
    /// `mu1_m s_k + mu2_m f_k`, row-major by service.
    coeff: Vec<f64>,
    /// `mu1_m S_m + mu2_m C_m`; the cut subtracts `c_m` times this.
    capacity: Vec<f64>,
    /// Net multiplier on the delay-target expression.
    theta: f64,
    theta_const: f64,
}

/// Lagrangian cut, evaluable at any clustering of the same slot problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub kind: CutKind,
    pub iteration: usize,
    pub generator: ClusterDecision,
    branches: Vec<CutBranch>,
}

fn freeze(problem: &SlotProblem<'_>, assignment: &[usize], mu: &Multipliers) -> CutBranch {
    let m_count = problem.bs_count();
    let mut coeff = vec![0.0; problem.services.len() * m_count];
    for (k, s) in problem.services.iter().enumerate() {
        for m in 0..m_count {
            coeff[k * m_count + m] = mu.cache[m] * s.size_gbit() + mu.compute[m] * s.compute_ghz();
        }
    }
    let capacity = (0..m_count)
        .map(|m| {
            mu.cache[m] * problem.resources.cache_bits[m] / GIGA
                + mu.compute[m] * problem.resources.compute_hz[m] / GIGA
        })
        .collect();
    let rhs = problem.theta_rhs().unwrap_or(0.0);
    CutBranch {
        assignment: assignment.to_vec(),
        coeff,
        capacity,
        theta: mu.theta_le - mu.theta_ge,
        theta_const: -mu.theta_le * (rhs + THETA_BAND) + mu.theta_ge * (rhs - THETA_BAND),
    }
}

/// Build the optimality cut (feasible result) or feasibility cut (infeasible
/// result). Infeasible branches inside an optimality cut contribute their
/// minimum-violation multipliers scaled by [`INFEASIBLE_BRANCH_WEIGHT`],
/// raised tenfold at a time while the cut is still below the primal value at
/// its generator.
pub fn make_cut(problem: &SlotProblem<'_>, result: &PrimalResult, iteration: usize) -> Cut {
    let kind = if result.is_feasible() { CutKind::Optimality } else { CutKind::Feasibility };
    let build = |weight: f64| {
        let branches = result
            .branches
            .iter()
            .map(|b| {
                let mu = if kind == CutKind::Optimality && !b.feasible {
                    b.multipliers.scaled(weight)
                } else {
                    b.multipliers.clone()
                };
                freeze(problem, &b.assignment, &mu)
            })
            .collect();
        Cut { kind, iteration, generator: result.cluster, branches }
    };
    let mut weight = INFEASIBLE_BRANCH_WEIGHT;
    let mut cut = build(weight);
    if kind == CutKind::Optimality && result.branches.iter().any(|b| !b.feasible) {
        let target = result.objective - 1e-9 * (1.0 + result.objective.abs());
        while weight < MAX_BRANCH_WEIGHT && cut.evaluate(problem, result.cluster) < target {
            weight *= 10.0;
            cut = build(weight);
        }
    }
    cut
}

impl Cut {
    /// `L*(C)` for optimality cuts, `L~*(C)` for feasibility cuts: the minimum
    /// over serving-BS assignments inside `cluster` of the Lagrangian's inner
    /// infimum. Assignments never solved use zero multipliers, which for a
    /// feasibility cut means "not certified infeasible".
    pub fn evaluate(&self, problem: &SlotProblem<'_>, cluster: ClusterDecision) -> f64 {
        let members = cluster.members();
        if members.is_empty() {
            return f64::INFINITY;
        }
        let optimality = self.kind == CutKind::Optimality;
        let (lo, hi) = problem.serve_bounds();
        let m_count = problem.bs_count();
        let k_count = problem.services.len();
        let mut demanded = vec![None; k_count];
        for (i, d) in problem.demands.iter().enumerate() {
            demanded[d.service] = Some(i);
        }

        let lagrangian = |a: &[usize], branch: Option<&CutBranch>| -> f64 {
            let coef = |k: usize, m: usize| {
                let objective = if optimality && cluster.contains(m) { problem.cost_coeff(k) } else { 0.0 };
                objective + branch.map_or(0.0, |b| b.coeff[k * m_count + m])
            };
            let mut total = 0.0;
            for (k, slot) in demanded.iter().enumerate() {
                match slot {
                    None => total += (0..m_count).map(|m| coef(k, m).min(0.0)).sum::<f64>(),
                    Some(i) => {
                        let serve = a[*i];
                        let mut s = coef(k, serve)
                            + branch.map_or(0.0, |b| b.theta) * problem.demands[*i].theta_coeff;
                        for m in 0..m_count {
                            if m == serve {
                                continue;
                            }
                            if cluster.contains(m) {
                                s += coef(k, m).min(0.0);
                            } else {
                                total += coef(k, m).min(0.0);
                            }
                        }
                        total += (lo * s).min(hi * s);
                    }
                }
            }
            if let Some(b) = branch {
                total -= members.iter().map(|&m| b.capacity[m]).sum::<f64>();
                total += b.theta_const;
            }
            total
        };

        let mut best = f64::INFINITY;
        for a in assignments(&members, problem.demands.len()) {
            let branch = self.branches.iter().find(|b| b.assignment == a);
            let value = match (branch, optimality) {
                (None, false) => 0.0,
                (b, _) => lagrangian(&a, b),
            };
            best = best.min(value);
        }
        if optimality {
            best + problem.constant(cluster)
        } else {
            best
        }
    }
}
