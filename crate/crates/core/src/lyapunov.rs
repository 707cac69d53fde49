//! Virtual caching-cost queue and the per-slot drift-plus-penalty objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::workload::{caching_cost, CacheDecision, ClusterDecision, ServiceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueRecord {
    pub arrival: f64,
    pub threshold: f64,
    /// Backlog after the update.
    pub backlog: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VirtualQueue {
    backlog: f64,
    threshold: f64,
    history: Vec<QueueRecord>,
}

impl VirtualQueue {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::Invalid(format!("cost threshold {threshold}")));
        }
        Ok(Self { backlog: 0.0, threshold, history: Vec::new() })
    }

    pub fn backlog(&self) -> f64 {
        self.backlog
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn history(&self) -> &[QueueRecord] {
        &self.history
    }

    /// `C(t+1) = max(C(t) + a - b, 0)`; returns the new backlog.
    pub fn update(&mut self, arrival: f64) -> Result<f64> {
        if !(arrival >= 0.0 && arrival.is_finite()) {
            return Err(Error::Invalid(format!("queue arrival {arrival}")));
        }
        self.backlog = (self.backlog + arrival - self.threshold).max(0.0);
        self.history.push(QueueRecord { arrival, threshold: self.threshold, backlog: self.backlog });
        Ok(self.backlog)
    }
}

/// Caching cost summed over the clustered BSs.
pub fn arrival_rate(cluster: &ClusterDecision, x: &CacheDecision, services: &[ServiceSpec]) -> f64 {
    cluster.members().into_iter().map(|m| caching_cost(m, x, services)).sum()
}

/// Upper bound on the quadratic term of the one-slot drift when every BS in
/// `cluster_size` caches the whole catalog.
pub fn drift_quadratic_bound(cluster_size: usize, services: &[ServiceSpec], threshold: f64) -> f64 {
    let full: f64 = cluster_size as f64 * services.iter().map(ServiceSpec::full_cost).sum::<f64>();
    0.5 * (full * full + threshold * threshold)
}

/// Whether `0.5 C(t+1)^2 - 0.5 C(t)^2 <= bound + C(t) (a - b)` holds.
pub fn drift_bound_holds(before: f64, after: f64, arrival: f64, threshold: f64, bound: f64) -> bool {
    let lhs = 0.5 * after * after - 0.5 * before * before;
    lhs <= bound + before * (arrival - threshold) + 1e-9 * (1.0 + lhs.abs())
}

/// `C(t) (a - b) + V D_total`.
pub fn drift_plus_penalty(backlog: f64, threshold: f64, v: f64, arrival: f64, total_delay: f64) -> f64 {
    let drift = backlog * (arrival - threshold);
    if v == 0.0 {
        drift
    } else {
        drift + v * total_delay
    }
}

/// Snapshot of the queue and weights that define one slot's objective.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftPenaltyObjective {
    pub backlog: f64,
    pub threshold: f64,
    pub v: f64,
    /// `xi_k s_k` per service, `s_k` in Gbit.
    pub xi: Vec<f64>,
}

impl DriftPenaltyObjective {
    pub fn new(queue: &VirtualQueue, v: f64, services: &[ServiceSpec]) -> Result<Self> {
        if !(v >= 0.0) {
            return Err(Error::Invalid(format!("penalty weight {v}")));
        }
        Ok(Self {
            backlog: queue.backlog(),
            threshold: queue.threshold(),
            v,
            xi: services.iter().map(ServiceSpec::full_cost).collect(),
        })
    }

    pub fn evaluate(&self, cluster: &ClusterDecision, x: &CacheDecision, total_delay: f64) -> f64 {
        let arrival: f64 = cluster
            .members()
            .into_iter()
            .map(|m| self.xi.iter().enumerate().map(|(k, xi)| xi * x.get(k, m)).sum::<f64>())
            .sum();
        drift_plus_penalty(self.backlog, self.threshold, self.v, arrival, total_delay)
    }
}
