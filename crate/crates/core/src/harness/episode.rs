//! Seeded episodes: per-slot channel and task generation, dispatch to the
//! selected algorithm, queue accounting and time averages.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{BlockDescentSolver, ExhaustiveSolver, UplinkSolver};
use crate::error::{Error, Result};
use crate::gbd_primal::{Demand, Mode, SlotProblem, ZfUplink};
use crate::harness::scenario::{Algorithm, Scenario};
use crate::jo_cdsd::{
    merge_requests, solve_slot_multi, solve_slot_single, theta_bounds, theta_demands, Flag, GbdRun, GbdSolver,
    ProbeSolver, ThetaProbe,
};
use crate::lyapunov::{arrival_rate, VirtualQueue};
use crate::radio::{generate_channels, place_nodes, ChannelRealization, Topology};
use crate::seeding::{rng_for, Purpose};
use crate::workload::{
    check_constraints, sample_request, total_delay, BsResources, CacheDecision, ClusterDecision, ServiceSpec, Task,
};

/// Decision and metrics of one user group in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupDecision {
    pub users: Vec<usize>,
    pub cluster: ClusterDecision,
    pub x: CacheDecision,
    pub objective: f64,
    /// Mean over the group's users.
    pub uplink_delay: f64,
    /// Mean over the group's users.
    pub processing_delay: f64,
    pub cost: f64,
    pub flags: Vec<Flag>,
    pub gbd: Option<GbdRun>,
    pub probes: Vec<ThetaProbe>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    /// One-based slot index.
    pub slot: u64,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub groups: Vec<GroupDecision>,
    /// Means over all users of the slot.
    pub uplink_delay: f64,
    pub processing_delay: f64,
    pub total_delay: f64,
    /// Caching cost summed over groups.
    pub cost: f64,
    /// Drift-plus-penalty values summed over groups.
    pub objective: f64,
    /// Backlog after this slot's update.
    pub queue: f64,
    pub gbd_iters: usize,
    pub flags: Vec<Flag>,
}

impl SlotOutcome {
    pub fn flag_string(&self) -> String {
        self.flags.iter().map(Flag::to_string).collect::<Vec<_>>().join(";")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeSummary {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub slots: usize,
    /// `(1/t) sum_{s<=t}` of each metric, per slot.
    pub running_total_delay: Vec<f64>,
    pub running_uplink_delay: Vec<f64>,
    pub running_cost: Vec<f64>,
    pub mean_total_delay: f64,
    pub mean_uplink_delay: f64,
    pub mean_processing_delay: f64,
    pub mean_cost: f64,
    pub final_queue: f64,
    pub flagged_slots: usize,
}

fn running_mean(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut sum = 0.0;
    values
        .enumerate()
        .map(|(i, v)| {
            sum += v;
            sum / (i + 1) as f64
        })
        .collect()
}

impl EpisodeSummary {
    pub fn from_slots(algorithm: Algorithm, seed: u64, slots: &[SlotOutcome]) -> Result<Self> {
        if slots.is_empty() {
            return Err(Error::Empty("episode summary"));
        }
        let n = slots.len() as f64;
        let mean = |f: fn(&SlotOutcome) -> f64| slots.iter().map(f).sum::<f64>() / n;
        Ok(Self {
            algorithm,
            seed,
            slots: slots.len(),
            running_total_delay: running_mean(slots.iter().map(|s| s.total_delay)),
            running_uplink_delay: running_mean(slots.iter().map(|s| s.uplink_delay)),
            running_cost: running_mean(slots.iter().map(|s| s.cost)),
            mean_total_delay: mean(|s| s.total_delay),
            mean_uplink_delay: mean(|s| s.uplink_delay),
            mean_processing_delay: mean(|s| s.processing_delay),
            mean_cost: mean(|s| s.cost),
            final_queue: slots.last().map_or(0.0, |s| s.queue),
            flagged_slots: slots.iter().filter(|s| !s.flags.is_empty()).count(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub summary: EpisodeSummary,
    pub slots: Vec<SlotOutcome>,
}

/// Channels and tasks of one slot.
#[derive(Debug, Clone)]
pub struct SlotInputs {
    pub slot: u64,
    pub channels: ChannelRealization,
    /// One task per user, by user index.
    pub tasks: Vec<Task>,
}

/// Everything fixed for one seed: placement, catalog and capacities.
#[derive(Debug, Clone)]
pub struct EpisodeContext<'s> {
    pub scenario: &'s Scenario,
    pub seed: u64,
    pub topology: Topology,
    pub services: Vec<ServiceSpec>,
    pub resources: BsResources,
    pub groups: Vec<Vec<usize>>,
}

impl<'s> EpisodeContext<'s> {
    pub fn new(scenario: &'s Scenario, seed: u64) -> Result<Self> {
        scenario.validate()?;
        let n = &scenario.network;
        let mut rng = rng_for(seed, 0, Purpose::Topology);
        let users = scenario.user_count();
        let (bs_positions, user_positions) = place_nodes(&mut rng, n.bs_count, users, n.bs_inner_km, n.bs_outer_km);
        let bandwidth_hz = n.bandwidth_mhz * 1e6;
        let topology = Topology {
            antennas: n.antennas,
            bs_positions,
            user_positions,
            tx_power_w: vec![n.tx_power_w; users],
            noise_power_w: 10f64.powf((n.noise_dbm_per_hz - 30.0) / 10.0) * bandwidth_hz,
            bandwidth_hz,
        };
        topology.validate()?;
        Ok(Self {
            scenario,
            seed,
            topology,
            services: scenario.catalog()?,
            resources: scenario.resources(),
            groups: scenario.groups(),
        })
    }

    pub fn inputs(&self, slot: u64) -> Result<SlotInputs> {
        let channels = generate_channels(&self.topology, slot, self.seed)?;
        let mut rng = rng_for(self.seed, slot, Purpose::Tasks);
        let t = &self.scenario.tasks;
        let tasks = t
            .zipf
            .iter()
            .enumerate()
            .map(|(user, &exp)| {
                let service = sample_request(exp, self.services.len(), &mut rng);
                let data_bits = rng.random_range(t.data_mbit[0]..=t.data_mbit[1]) * 1e6;
                let workload_cycles = rng.random_range(t.workload_gcycles[0]..=t.workload_gcycles[1]) * 1e9;
                Task { user, slot, data_bits, workload_cycles, service }
            })
            .collect();
        Ok(SlotInputs { slot, channels, tasks })
    }

    /// Cluster made of the BS nearest to the group's first user.
    pub fn nearest_start(&self, group: &[usize]) -> ClusterDecision {
        ClusterDecision::from_members(self.resources.bs_count(), &self.topology.nearest_bs(group[0])[..1])
    }

    fn solver(&self, algorithm: Algorithm, group: &[usize]) -> Box<dyn ProbeSolver> {
        match algorithm {
            Algorithm::JoCdsd => Box::new(GbdSolver { config: self.scenario.gbd_config() }),
            Algorithm::Instant => Box::new(ExhaustiveSolver),
            Algorithm::Uplink => Box::new(UplinkSolver { popularity: self.scenario.popularity(group) }),
            Algorithm::Block => Box::new(BlockDescentSolver { config: self.scenario.block_config() }),
        }
    }

    fn solve_group(
        &self,
        inputs: &SlotInputs,
        group: &[usize],
        solver: &dyn ProbeSolver,
        backlog: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<GroupDecision> {
        let sc = self.scenario;
        let rate = sc.backbone_rate();
        let interferers: Vec<usize> = (0..sc.user_count()).filter(|u| !group.contains(u)).collect();
        let uplink = ZfUplink::new(
            &inputs.channels,
            &self.topology,
            group.iter().map(|&u| (u, inputs.tasks[u].data_bits)).collect(),
            interferers,
        );
        let start = self.nearest_start(group);
        let group_tasks: Vec<Task> = group.iter().map(|&u| inputs.tasks[u].clone()).collect();
        let (demands, mode, bounds) = if let [task] = group_tasks.as_slice() {
            let edge_delay = task.edge_delay(&self.services);
            let backbone_delay = task.backbone_delay(rate);
            let demands = vec![Demand { service: task.service, theta_coeff: backbone_delay - edge_delay }];
            (demands, Mode::Single { pin: 1.0, edge_delay, backbone_delay }, None)
        } else {
            let merged = merge_requests(&group_tasks);
            let bounds = theta_bounds(&merged, &self.services, rate);
            let (demands, mean_backbone) = theta_demands(&merged, &self.services, rate);
            (demands, Mode::Theta { theta: bounds.lo, mean_backbone }, Some(bounds))
        };
        let problem = SlotProblem {
            services: &self.services,
            resources: &self.resources,
            backlog,
            threshold: sc.cost_threshold,
            v: sc.v,
            max_cluster: sc.network.max_cluster,
            demands: &demands,
            mode,
            uplink: &uplink,
        };
        let (solution, probes) = match bounds {
            None => (solve_slot_single(&problem, solver, start, rng)?, Vec::new()),
            Some(b) => {
                let run = solve_slot_multi(&problem, b, sc.dichotomy_config(), solver, start, rng)?;
                (run.solution, run.probes)
            }
        };
        let uplink_delay = uplink_mean(&uplink, solution.cluster);
        let processing_delay = problem.processing_delay(solution.cluster, &solution.x);
        let mut flags = solution.flags.clone();
        if !uplink_delay.is_finite() {
            flags.push(Flag::ZeroRate);
        }
        if !check_constraints(&solution.cluster, &solution.x, &self.resources, &self.services, sc.network.max_cluster)
            .is_empty()
        {
            flags.push(Flag::ConstraintViolation);
        }
        Ok(GroupDecision {
            users: group.to_vec(),
            cost: arrival_rate(&solution.cluster, &solution.x, &self.services),
            cluster: solution.cluster,
            x: solution.x,
            objective: solution.objective,
            uplink_delay,
            processing_delay,
            flags,
            gbd: solution.gbd,
            probes,
        })
    }

    /// Decisions for every group of one slot. Solver errors become flagged
    /// groups with infinite delays and zero cost.
    pub fn solve_slot(&self, inputs: &SlotInputs, algorithm: Algorithm, backlog: f64) -> Vec<GroupDecision> {
        let mut rng = rng_for(self.seed, inputs.slot, Purpose::Clustering);
        self.groups
            .iter()
            .map(|group| {
                let solver = self.solver(algorithm, group);
                self.solve_group(inputs, group, solver.as_ref(), backlog, &mut rng).unwrap_or_else(|_| {
                    let start = self.nearest_start(group);
                    GroupDecision {
                        users: group.clone(),
                        cluster: start,
                        x: CacheDecision::zeros(self.services.len(), self.resources.bs_count()),
                        objective: f64::INFINITY,
                        uplink_delay: f64::INFINITY,
                        processing_delay: f64::INFINITY,
                        cost: 0.0,
                        flags: vec![Flag::SolverError],
                        gbd: None,
                        probes: Vec::new(),
                    }
                })
            })
            .collect()
    }
}

fn uplink_mean(uplink: &ZfUplink<'_>, cluster: ClusterDecision) -> f64 {
    let d = uplink.user_delays(cluster);
    d.iter().sum::<f64>() / d.len() as f64
}

/// Combine group decisions into a slot row; delays are means over users.
pub fn slot_outcome(
    slot: u64,
    algorithm: Algorithm,
    seed: u64,
    groups: Vec<GroupDecision>,
    queue_after: f64,
) -> SlotOutcome {
    let users: usize = groups.iter().map(|g| g.users.len()).sum();
    let weighted = |f: fn(&GroupDecision) -> f64| {
        groups.iter().map(|g| f(g) * g.users.len() as f64).sum::<f64>() / users as f64
    };
    let uplink_delay = weighted(|g| g.uplink_delay);
    let processing_delay = weighted(|g| g.processing_delay);
    let mut flags: Vec<Flag> = Vec::new();
    for f in groups.iter().flat_map(|g| g.flags.iter()) {
        if !flags.contains(f) {
            flags.push(*f);
        }
    }
    SlotOutcome {
        slot,
        algorithm,
        seed,
        uplink_delay,
        processing_delay,
        total_delay: total_delay(uplink_delay, processing_delay),
        cost: groups.iter().map(|g| g.cost).sum(),
        objective: groups.iter().map(|g| g.objective).sum(),
        queue: queue_after,
        gbd_iters: groups.iter().filter_map(|g| g.gbd.as_ref()).map(|r| r.iterations).sum(),
        flags,
        groups,
    }
}

/// Run `scenario.slots` slots of one algorithm for one seed.
pub fn run_episode(scenario: &Scenario, algorithm: Algorithm, seed: u64) -> Result<EpisodeResult> {
    let ctx = EpisodeContext::new(scenario, seed)?;
    let mut queue = VirtualQueue::new(scenario.cost_threshold)?;
    let mut slots = Vec::with_capacity(scenario.slots);
    for t in 1..=scenario.slots as u64 {
        let inputs = ctx.inputs(t)?;
        let groups = ctx.solve_slot(&inputs, algorithm, queue.backlog());
        let arrival: f64 = groups.iter().map(|g| g.cost).sum();
        let after = queue.update(arrival)?;
        slots.push(slot_outcome(t, algorithm, seed, groups, after));
    }
    Ok(EpisodeResult { summary: EpisodeSummary::from_slots(algorithm, seed, &slots)?, slots })
}

/// Episodes for every seed, in seed order. Seeds run in parallel.
pub fn run_seeds(scenario: &Scenario, algorithm: Algorithm, seeds: &[u64]) -> Result<Vec<EpisodeResult>> {
    seeds.par_iter().map(|&seed| run_episode(scenario, algorithm, seed)).collect()
}
