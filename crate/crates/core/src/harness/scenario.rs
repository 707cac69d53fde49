//! Scenario file: every experiment parameter, with defaults for the reference
//! single-user setting. Human units (km, MHz, Gbit, GHz, Mbit) on disk.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::BlockDescentConfig;
use crate::error::{Error, Result};
use crate::gbd_master::GibbsConfig;
use crate::jo_cdsd::{DichotomyConfig, GbdConfig};
use crate::workload::{zipf_pmf, BsResources, ServiceSpec, GIGA};

/// Slot-level decision algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    JoCdsd,
    Instant,
    Uplink,
    Block,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::JoCdsd, Algorithm::Instant, Algorithm::Uplink, Algorithm::Block];

    pub fn tag(&self) -> &'static str {
        match self {
            Algorithm::JoCdsd => "jo_cdsd",
            Algorithm::Instant => "instant",
            Algorithm::Uplink => "uplink",
            Algorithm::Block => "block",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.tag() == s)
            .ok_or_else(|| Error::Scenario(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub bs_count: usize,
    pub antennas: usize,
    /// Largest cluster size.
    pub max_cluster: usize,
    pub bandwidth_mhz: f64,
    /// BSs are placed uniformly in this annulus around the first user.
    pub bs_inner_km: f64,
    pub bs_outer_km: f64,
    pub tx_power_w: f64,
    pub noise_dbm_per_hz: f64,
    pub cache_gbit: f64,
    pub compute_ghz: f64,
    /// Backbone rate to the cloud.
    pub backbone_mbps: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            bs_count: 10,
            antennas: 3,
            max_cluster: 3,
            bandwidth_mhz: 10.0,
            bs_inner_km: 0.1,
            bs_outer_km: 1.0,
            tx_power_w: 0.2,
            noise_dbm_per_hz: -174.0,
            cache_gbit: 3.0,
            compute_ghz: 3.0,
            backbone_mbps: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub count: usize,
    pub size_gbit: f64,
    pub compute_ghz: f64,
    /// Cost coefficient of service `k` (one-based) is `cost_step * k`.
    pub cost_step: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { count: 6, size_gbit: 3.0, compute_ghz: 0.3, cost_step: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    pub data_mbit: [f64; 2],
    pub workload_gcycles: [f64; 2],
    /// One Zipf exponent per user; the length sets the user count.
    pub zipf: Vec<f64>,
    /// Users sharing one cluster. Empty means a single group of all users.
    pub groups: Vec<Vec<usize>>,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self { data_mbit: [10.0, 60.0], workload_gcycles: [0.1, 0.6], zipf: vec![0.5], groups: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub gbd_budget: usize,
    pub gbd_epsilon: f64,
    pub gibbs_budget: usize,
    pub gibbs_phi_start: f64,
    pub gibbs_phi_end: f64,
    pub gibbs_rho: f64,
    /// Stop Gibbs after this many proposals without a descending move; 0 disables.
    pub gibbs_plateau: usize,
    /// Independent Gibbs chains per master solve.
    pub gibbs_restarts: usize,
    pub dichotomy_iter_max: usize,
    pub dichotomy_epsilon: f64,
    pub block_rounds: usize,
    pub block_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let g = GibbsConfig::default();
        let d = DichotomyConfig::default();
        let b = BlockDescentConfig::default();
        Self {
            gbd_budget: 2000,
            gbd_epsilon: 1e-4,
            gibbs_budget: g.budget,
            gibbs_phi_start: g.phi_start,
            gibbs_phi_end: g.phi_end,
            gibbs_rho: g.rho,
            gibbs_plateau: g.plateau.unwrap_or(0),
            gibbs_restarts: g.restarts,
            dichotomy_iter_max: d.iter_max,
            dichotomy_epsilon: d.epsilon,
            block_rounds: b.max_rounds,
            block_tolerance: b.tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    pub slots: usize,
    pub v: f64,
    pub cost_threshold: f64,
    pub algorithm: Algorithm,
    pub network: NetworkConfig,
    pub services: ServiceConfig,
    pub tasks: TaskConfig,
    pub solver: SolverConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            seed: 1,
            slots: 30,
            v: 5.0,
            cost_threshold: 2.0,
            algorithm: Algorithm::JoCdsd,
            network: NetworkConfig::default(),
            services: ServiceConfig::default(),
            tasks: TaskConfig::default(),
            solver: SolverConfig::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Scenario(format!("{name} must be positive, got {v}")))
    }
}

fn range(name: &str, r: [f64; 2]) -> Result<()> {
    positive(name, r[0])?;
    positive(name, r[1])?;
    if r[0] > r[1] {
        return Err(Error::Scenario(format!("{name} range {r:?} is reversed")));
    }
    Ok(())
}

impl Scenario {
    /// Three users with distinct popularity skews sharing one cluster.
    pub fn multi_user() -> Self {
        let mut s = Self::default();
        s.tasks.zipf = vec![0.3, 0.2, 1.0];
        s
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.network;
        if self.slots == 0 {
            return Err(Error::Scenario("slots must be at least 1".into()));
        }
        if n.bs_count == 0 || n.bs_count > 64 {
            return Err(Error::Scenario(format!("bs_count {} outside 1..=64", n.bs_count)));
        }
        if n.antennas == 0 || n.max_cluster == 0 || self.services.count == 0 {
            return Err(Error::Scenario("antennas, max_cluster and service count must be positive".into()));
        }
        if !(n.bs_inner_km > 0.0 && n.bs_inner_km <= n.bs_outer_km) {
            return Err(Error::Scenario(format!("BS annulus [{}, {}] km", n.bs_inner_km, n.bs_outer_km)));
        }
        for (name, v) in [
            ("bandwidth_mhz", n.bandwidth_mhz),
            ("bs_outer_km", n.bs_outer_km),
            ("tx_power_w", n.tx_power_w),
            ("cache_gbit", n.cache_gbit),
            ("compute_ghz", n.compute_ghz),
            ("backbone_mbps", n.backbone_mbps),
            ("services.size_gbit", self.services.size_gbit),
            ("services.compute_ghz", self.services.compute_ghz),
            ("services.cost_step", self.services.cost_step),
            ("cost_threshold", self.cost_threshold),
            ("gbd_epsilon", self.solver.gbd_epsilon),
            ("gibbs_phi_start", self.solver.gibbs_phi_start),
            ("gibbs_phi_end", self.solver.gibbs_phi_end),
            ("gibbs_rho", self.solver.gibbs_rho),
            ("dichotomy_epsilon", self.solver.dichotomy_epsilon),
        ] {
            positive(name, v)?;
        }
        if !(self.v >= 0.0 && self.v.is_finite()) {
            return Err(Error::Scenario(format!("v must be non-negative, got {}", self.v)));
        }
        range("data_mbit", self.tasks.data_mbit)?;
        range("workload_gcycles", self.tasks.workload_gcycles)?;
        if self.tasks.zipf.is_empty() || self.tasks.zipf.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(Error::Scenario("zipf needs one non-negative exponent per user".into()));
        }
        let users = self.user_count();
        let mut seen = vec![false; users];
        for g in self.groups() {
            if g.is_empty() {
                return Err(Error::Scenario("empty user group".into()));
            }
            for u in g {
                if u >= users || std::mem::replace(&mut seen[u], true) {
                    return Err(Error::Scenario(format!("user {u} missing or listed twice in groups")));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Scenario("every user must belong to a group".into()));
        }
        if self.solver.gbd_budget == 0 || self.solver.gibbs_budget == 0 || self.solver.gibbs_restarts == 0 || self.solver.dichotomy_iter_max == 0 {
            return Err(Error::Scenario("solver budgets must be positive".into()));
        }
        Ok(())
    }

    pub fn user_count(&self) -> usize {
        self.tasks.zipf.len()
    }

    pub fn groups(&self) -> Vec<Vec<usize>> {
        if self.tasks.groups.is_empty() {
            vec![(0..self.user_count()).collect()]
        } else {
            self.tasks.groups.clone()
        }
    }

    pub fn catalog(&self) -> Result<Vec<ServiceSpec>> {
        let s = &self.services;
        (0..s.count)
            .map(|k| ServiceSpec::new(k, s.size_gbit * GIGA, s.compute_ghz * GIGA, s.cost_step * (k + 1) as f64))
            .collect()
    }

    pub fn resources(&self) -> BsResources {
        let n = &self.network;
        BsResources::uniform(n.bs_count, n.compute_ghz * GIGA, n.cache_gbit * GIGA)
    }

    pub fn backbone_rate(&self) -> f64 {
        self.network.backbone_mbps * 1e6
    }

    /// Mean request distribution of a user group.
    pub fn popularity(&self, users: &[usize]) -> Vec<f64> {
        let k = self.services.count;
        let mut p = vec![0.0; k];
        for &u in users {
            for (acc, q) in p.iter_mut().zip(zipf_pmf(self.tasks.zipf[u], k)) {
                *acc += q / users.len() as f64;
            }
        }
        p
    }

    pub fn gbd_config(&self) -> GbdConfig {
        let s = &self.solver;
        GbdConfig {
            tau_max: s.gbd_budget,
            epsilon: s.gbd_epsilon,
            gibbs: GibbsConfig {
                budget: s.gibbs_budget,
                phi_start: s.gibbs_phi_start,
                phi_end: s.gibbs_phi_end,
                rho: s.gibbs_rho,
                plateau: (s.gibbs_plateau > 0).then_some(s.gibbs_plateau),
                restarts: s.gibbs_restarts,
                record_visits: false,
            },
        }
    }

    pub fn dichotomy_config(&self) -> DichotomyConfig {
        DichotomyConfig { iter_max: self.solver.dichotomy_iter_max, epsilon: self.solver.dichotomy_epsilon }
    }

    pub fn block_config(&self) -> BlockDescentConfig {
        BlockDescentConfig { max_rounds: self.solver.block_rounds, tolerance: self.solver.block_tolerance }
    }
}
