//! Service catalog, task generation, caching cost, delays and the per-slot
//! resource and cluster-size constraints.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bits per gigabit; caching cost and LP rows are expressed in Gbit / GHz.
pub const GIGA: f64 = 1e9;

/// Absolute slack (in Gbit or GHz) tolerated by [`check_constraints`].
pub const CONSTRAINT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceSpec {
    /// Zero-based service index.
    pub index: usize,
    pub size_bits: f64,
    /// CPU rate the service runs at once cached (cycles/s).
    pub compute_hz: f64,
    /// Cost per Gbit cached.
    pub cost_coeff: f64,
}

impl ServiceSpec {
    pub fn new(index: usize, size_bits: f64, compute_hz: f64, cost_coeff: f64) -> Result<Self> {
        if !(size_bits > 0.0 && compute_hz > 0.0 && cost_coeff >= 0.0) {
            return Err(Error::Invalid(format!(
                "service {index}: size {size_bits}, rate {compute_hz}, cost {cost_coeff}"
            )));
        }
        Ok(Self { index, size_bits, compute_hz, cost_coeff })
    }

    pub fn size_gbit(&self) -> f64 {
        self.size_bits / GIGA
    }

    pub fn compute_ghz(&self) -> f64 {
        self.compute_hz / GIGA
    }

    /// Cost of caching the whole service once (xi_k * s_k).
    pub fn full_cost(&self) -> f64 {
        self.cost_coeff * self.size_gbit()
    }
}

/// Uniform catalog with `xi_k = 0.1 * k` for one-based `k`.
pub fn default_catalog(count: usize, size_bits: f64, compute_hz: f64) -> Vec<ServiceSpec> {
    (0..count)
        .map(|k| ServiceSpec {
            index: k,
            size_bits,
            compute_hz,
            cost_coeff: 0.1 * (k + 1) as f64,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub user: usize,
    pub slot: u64,
    pub data_bits: f64,
    pub workload_cycles: f64,
    /// Zero-based index of the requested service.
    pub service: usize,
}

impl Task {
    /// One-hot request vector over `service_count` services.
    pub fn request_vector(&self, service_count: usize) -> Vec<f64> {
        (0..service_count)
            .map(|k| if k == self.service { 1.0 } else { 0.0 })
            .collect()
    }

    pub fn edge_delay(&self, services: &[ServiceSpec]) -> f64 {
        self.workload_cycles / services[self.service].compute_hz
    }

    pub fn backbone_delay(&self, backbone_rate: f64) -> f64 {
        self.data_bits / backbone_rate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsResources {
    pub compute_hz: Vec<f64>,
    pub cache_bits: Vec<f64>,
}

impl BsResources {
    pub fn uniform(bs_count: usize, compute_hz: f64, cache_bits: f64) -> Self {
        Self {
            compute_hz: vec![compute_hz; bs_count],
            cache_bits: vec![cache_bits; bs_count],
        }
    }

    pub fn bs_count(&self) -> usize {
        self.cache_bits.len()
    }

    /// Whether BS `m` can host service `k` with probability one.
    pub fn can_host(&self, m: usize, service: &ServiceSpec) -> bool {
        service.size_bits <= self.cache_bits[m] * (1.0 + 1e-12)
            && service.compute_hz <= self.compute_hz[m] * (1.0 + 1e-12)
    }
}

/// Caching probabilities `x[k][m]`, stored row-major by service.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheDecision {
    services: usize,
    bs_count: usize,
    x: Vec<f64>,
}

impl CacheDecision {
    pub fn zeros(services: usize, bs_count: usize) -> Self {
        Self { services, bs_count, x: vec![0.0; services * bs_count] }
    }

    pub fn services(&self) -> usize {
        self.services
    }

    pub fn bs_count(&self) -> usize {
        self.bs_count
    }

    #[inline]
    pub fn get(&self, k: usize, m: usize) -> f64 {
        self.x[k * self.bs_count + m]
    }

    #[inline]
    pub fn set(&mut self, k: usize, m: usize, v: f64) {
        self.x[k * self.bs_count + m] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    /// Entrywise convex combination `a * self + (1 - a) * other`.
    pub fn blend(&self, other: &Self, a: f64) -> Self {
        Self {
            services: self.services,
            bs_count: self.bs_count,
            x: self.x.iter().zip(&other.x).map(|(p, q)| a * p + (1.0 - a) * q).collect(),
        }
    }

    pub fn is_zero_column(&self, m: usize) -> bool {
        (0..self.services).all(|k| self.get(k, m) == 0.0)
    }
}

/// Binary clustering vector for one user (or a user group sharing a cluster),
/// held as a bit mask over at most 64 base stations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClusterDecision {
    mask: u64,
    bs_count: usize,
}

impl ClusterDecision {
    pub const MAX_BS: usize = 64;

    pub fn empty(bs_count: usize) -> Self {
        assert!(bs_count <= Self::MAX_BS, "at most 64 base stations");
        Self { mask: 0, bs_count }
    }

    pub fn from_mask(bs_count: usize, mask: u64) -> Self {
        let mut c = Self::empty(bs_count);
        c.mask = if bs_count == 64 { mask } else { mask & ((1u64 << bs_count) - 1) };
        c
    }

    pub fn from_members(bs_count: usize, members: &[usize]) -> Self {
        let mut c = Self::empty(bs_count);
        for &m in members {
            assert!(m < bs_count, "BS index {m} out of range");
            c.mask |= 1 << m;
        }
        c
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn bs_count(&self) -> usize {
        self.bs_count
    }

    pub fn contains(&self, m: usize) -> bool {
        self.mask >> m & 1 == 1
    }

    pub fn size(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn with(&self, m: usize, on: bool) -> Self {
        let mut c = *self;
        if on {
            c.mask |= 1 << m;
        } else {
            c.mask &= !(1 << m);
        }
        c
    }

    pub fn flipped(&self, m: usize) -> Self {
        self.with(m, !self.contains(m))
    }

    pub fn members(&self) -> Vec<usize> {
        (0..self.bs_count).filter(|&m| self.contains(m)).collect()
    }

    pub fn is_size_valid(&self, max_size: usize) -> bool {
        (1..=max_size).contains(&self.size())
    }

    /// All clusterings with `1 <= size <= max_size`, in increasing mask order.
    pub fn enumerate(bs_count: usize, max_size: usize) -> Vec<Self> {
        assert!(bs_count < 64);
        (1u64..(1u64 << bs_count))
            .filter(|mask| (mask.count_ones() as usize) <= max_size)
            .map(|mask| Self { mask, bs_count })
            .collect()
    }
}

impl fmt::Display for ClusterDecision {
    /// Bit string, BS 0 first.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in 0..self.bs_count {
            f.write_str(if self.contains(m) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// `P(k) = k^-s / sum_j j^-s` over one-based ranks.
pub fn zipf_pmf(exponent: f64, count: usize) -> Vec<f64> {
    let w: Vec<f64> = (1..=count).map(|k| (k as f64).powf(-exponent)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Draw a zero-based service index from Zipf(exponent, count).
pub fn sample_request<R: Rng + ?Sized>(exponent: f64, count: usize, rng: &mut R) -> usize {
    let pmf = zipf_pmf(exponent, count);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in pmf.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    count - 1
}

/// Caching cost of BS `bs`: `sum_k xi_k s_k x_{k,m}` with `s_k` in Gbit.
pub fn caching_cost(bs: usize, x: &CacheDecision, services: &[ServiceSpec]) -> f64 {
    services
        .iter()
        .map(|s| s.full_cost() * x.get(s.index, bs))
        .sum()
}

/// BS that processes the task: highest caching probability of the requested
/// service inside the cluster, lowest index on ties. `None` for an empty cluster.
pub fn serving_bs(service: usize, cluster: &ClusterDecision, x: &CacheDecision) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for m in cluster.members() {
        let p = x.get(service, m);
        if best.is_none_or(|(_, b)| p > b) {
            best = Some((m, p));
        }
    }
    best
}

/// Expected processing delay: edge with probability `hit`, cloud otherwise.
pub fn processing_delay(task: &Task, hit: f64, services: &[ServiceSpec], backbone_rate: f64) -> f64 {
    hit * task.edge_delay(services) + (1.0 - hit) * task.backbone_delay(backbone_rate)
}

pub fn total_delay(uplink: f64, processing: f64) -> f64 {
    uplink + processing
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ClusterSize { size: usize, max: usize },
    Probability { service: usize, bs: usize, value: f64 },
    Cache { bs: usize, used_gbit: f64, capacity_gbit: f64 },
    Compute { bs: usize, used_ghz: f64, capacity_ghz: f64 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check cluster size bounds and per-BS cache/compute capacity, where
/// unclustered BSs have zero capacity.
pub fn check_constraints(
    cluster: &ClusterDecision,
    x: &CacheDecision,
    resources: &BsResources,
    services: &[ServiceSpec],
    max_cluster: usize,
) -> ViolationReport {
    let mut report = ViolationReport::default();
    if !cluster.is_size_valid(max_cluster) {
        report.violations.push(Violation::ClusterSize { size: cluster.size(), max: max_cluster });
    }
    for m in 0..x.bs_count() {
        let on = if cluster.contains(m) { 1.0 } else { 0.0 };
        let mut cache = 0.0;
        let mut compute = 0.0;
        for s in services {
            let v = x.get(s.index, m);
            if !(-CONSTRAINT_TOL..=1.0 + CONSTRAINT_TOL).contains(&v) {
                report.violations.push(Violation::Probability { service: s.index, bs: m, value: v });
            }
            cache += v * s.size_gbit();
            compute += v * s.compute_ghz();
        }
        let cache_cap = on * resources.cache_bits[m] / GIGA;
        let compute_cap = on * resources.compute_hz[m] / GIGA;
        if cache > cache_cap + CONSTRAINT_TOL {
            report.violations.push(Violation::Cache { bs: m, used_gbit: cache, capacity_gbit: cache_cap });
        }
        if compute > compute_cap + CONSTRAINT_TOL {
            report.violations.push(Violation::Compute { bs: m, used_ghz: compute, capacity_ghz: compute_cap });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_services() -> Vec<ServiceSpec> {
        vec![
            ServiceSpec::new(0, 3e9, 0.3e9, 0.1).unwrap(),
            ServiceSpec::new(1, 3e9, 0.3e9, 0.2).unwrap(),
        ]
    }

    #[test]
    fn zipf_zero_exponent_is_uniform() {
        for p in zipf_pmf(0.0, 5) {
            assert!((p - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn zipf_half_six() {
        // sum_{k=1..6} k^-0.5 = 3.639912...
        let pmf = zipf_pmf(0.5, 6);
        assert!((pmf[0] - 0.27473).abs() < 5e-6);
        assert!((pmf[5] - 0.11216).abs() < 5e-6);
    }

    #[test]
    fn zipf_sampling_is_seeded() {
        let a: Vec<usize> = {
            let mut r = ChaCha8Rng::seed_from_u64(3);
            (0..50).map(|_| sample_request(0.5, 6, &mut r)).collect()
        };
        let b: Vec<usize> = {
            let mut r = ChaCha8Rng::seed_from_u64(3);
            (0..50).map(|_| sample_request(0.5, 6, &mut r)).collect()
        };
        assert_eq!(a, b);
        assert!(a.iter().all(|&k| k < 6));
    }

    #[test]
    fn caching_cost_examples() {
        let services = two_services();
        let mut x = CacheDecision::zeros(2, 1);
        assert_eq!(caching_cost(0, &x, &services), 0.0);
        x.set(0, 0, 1.0);
        x.set(1, 0, 0.5);
        assert!((caching_cost(0, &x, &services) - 0.6).abs() < 1e-12);
        x.set(1, 0, 1.0);
        let envelope: f64 = services.iter().map(ServiceSpec::full_cost).sum();
        assert!((caching_cost(0, &x, &services) - envelope).abs() < 1e-12);
    }

    #[test]
    fn serving_bs_examples() {
        let mut x = CacheDecision::zeros(1, 3);
        let single = ClusterDecision::from_members(3, &[1]);
        assert_eq!(serving_bs(0, &single, &x).unwrap().0, 1);

        for (m, p) in [0.2, 0.9, 0.9].into_iter().enumerate() {
            x.set(0, m, p);
        }
        let all = ClusterDecision::from_members(3, &[0, 1, 2]);
        assert_eq!(serving_bs(0, &all, &x), Some((1, 0.9)));

        for (m, p) in [0.5, 0.7, 0.9].into_iter().enumerate() {
            x.set(0, m, p);
        }
        let masked = ClusterDecision::from_members(3, &[0, 2]);
        assert_eq!(serving_bs(0, &masked, &x), Some((2, 0.9)));
        assert_eq!(serving_bs(0, &ClusterDecision::empty(3), &x), None);
    }

    #[test]
    fn processing_and_total_delay() {
        let services = vec![ServiceSpec::new(0, 3e9, 0.3e9, 0.1).unwrap()];
        let task = Task { user: 0, slot: 0, data_bits: 10e6, workload_cycles: 0.3e9, service: 0 };
        assert!((processing_delay(&task, 1.0, &services, 50e6) - 1.0).abs() < 1e-12);
        assert!((processing_delay(&task, 0.0, &services, 50e6) - 0.2).abs() < 1e-12);
        let slow = Task { data_bits: 200e6, ..task.clone() };
        // D_edge = 1 s, D_bkb = 4 s
        assert!((processing_delay(&slow, 0.5, &services, 50e6) - 2.5).abs() < 1e-12);
        assert_eq!(total_delay(1.0, 1.0), 2.0);
        assert_eq!(total_delay(0.5, 2.5), 3.0);
        assert_eq!(total_delay(f64::INFINITY, 1.0), f64::INFINITY);
        assert_eq!(task.request_vector(3), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn constraint_examples() {
        let services = default_catalog(6, 3e9, 0.3e9);
        let res = BsResources::uniform(2, 3e9, 3e9);
        let c = ClusterDecision::from_members(2, &[0]);
        let mut x = CacheDecision::zeros(6, 2);
        assert!(check_constraints(&c, &x, &res, &services, 3).is_empty());

        x.set(0, 1, 0.5);
        let r = check_constraints(&c, &x, &res, &services, 3);
        assert!(matches!(r.violations[0], Violation::Cache { bs: 1, .. }));

        let mut y = CacheDecision::zeros(6, 2);
        for k in 0..6 {
            y.set(k, 0, 0.2);
        }
        let r = check_constraints(&c, &y, &res, &services, 3);
        assert_eq!(r.violations.len(), 1);
        match &r.violations[0] {
            Violation::Cache { used_gbit, .. } => assert!((used_gbit - 3.6).abs() < 1e-12),
            v => panic!("unexpected {v:?}"),
        }

        let big = ClusterDecision::from_members(2, &[0, 1]);
        let r = check_constraints(&big, &CacheDecision::zeros(6, 2), &res, &services, 1);
        assert!(matches!(r.violations[0], Violation::ClusterSize { size: 2, max: 1 }));
    }

    #[test]
    fn enumerate_counts() {
        assert_eq!(ClusterDecision::enumerate(10, 10).len(), 1023);
        assert_eq!(ClusterDecision::enumerate(10, 3).len(), 175);
        assert_eq!(ClusterDecision::enumerate(1, 3).len(), 1);
    }

    #[test]
    fn cluster_display_and_flip() {
        let c = ClusterDecision::from_members(4, &[0, 2]);
        assert_eq!(c.to_string(), "1010");
        assert_eq!(c.flipped(1).members(), vec![0, 1, 2]);
        assert_eq!(c.flipped(0).members(), vec![2]);
    }
}
