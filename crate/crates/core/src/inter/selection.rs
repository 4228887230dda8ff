//! Service capability records and cost-minimal domain path selection.

use serde::{Deserialize, Serialize};

use super::{apply_policies, InterError, KpiRequirementSet, Policy, TaskIntent};

/// What a domain advertises to the inter-domain orchestrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapabilityRecord {
    pub domain: String,
    pub free_bps: u64,
    pub min_latency_us: u64,
    pub reliability_floor: f64,
    /// Cost per Gbps carried.
    pub unit_cost: f64,
    /// Zone ids reachable through this domain.
    pub prefixes: Vec<String>,
}

impl CapabilityRecord {
    pub fn covers(&self, zone: &str) -> bool {
        self.prefixes.iter().any(|p| p == zone)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSelection {
    pub path: Vec<String>,
    pub cost: f64,
    /// Per-domain cost terms along the path, same order as `path`.
    pub cost_terms: Vec<f64>,
}

/// Cost term of carrying `kpi`'s downlink throughput through one domain.
pub fn carriage_cost(cap: &CapabilityRecord, kpi: &KpiRequirementSet) -> f64 {
    cap.unit_cost * (kpi.throughput_dl_bps as f64 / 1e9)
}

fn path_feasible(path: &[&CapabilityRecord], kpi: &KpiRequirementSet) -> bool {
    let latency: u64 = path.iter().map(|c| c.min_latency_us).sum();
    let reliability: f64 = path.iter().map(|c| c.reliability_floor).product();
    latency <= kpi.latency_bound_us
        && reliability >= kpi.reliability_min
        && path.iter().all(|c| c.free_bps >= kpi.throughput_dl_bps)
}

/// Picks the cheapest feasible path of at most two domains. The first
/// domain must cover the intent's zone; when `destination` is given the
/// last domain must cover it. Ties go to the lexicographically smallest
/// path. Only domains admitted by `policies` are considered.
pub fn select_domains(
    intent: &TaskIntent,
    kpi: &KpiRequirementSet,
    destination: Option<&str>,
    caps: &[CapabilityRecord],
    policies: &[Policy],
) -> Result<DomainSelection, InterError> {
    if caps.is_empty() {
        return Err(InterError::NoCapabilities);
    }
    let names: Vec<String> = caps.iter().map(|c| c.domain.clone()).collect();
    let admissible = apply_policies(&names, intent, policies);
    let allowed: Vec<&CapabilityRecord> = caps
        .iter()
        .filter(|c| admissible.contains(&c.domain))
        .collect();

    let mut paths: Vec<Vec<&CapabilityRecord>> = Vec::new();
    for &first in allowed.iter().filter(|c| c.covers(&intent.zone)) {
        paths.push(vec![first]);
        for &second in &allowed {
            if second.domain != first.domain {
                paths.push(vec![first, second]);
            }
        }
    }

    let mut best: Option<DomainSelection> = None;
    for path in paths {
        let ends_ok = destination.is_none_or(|d| path.last().expect("non-empty").covers(d));
        if !ends_ok || !path_feasible(&path, kpi) {
            continue;
        }
        let terms: Vec<f64> = path.iter().map(|c| carriage_cost(c, kpi)).collect();
        let candidate = DomainSelection {
            path: path.iter().map(|c| c.domain.clone()).collect(),
            cost: terms.iter().sum(),
            cost_terms: terms,
        };
        let better = match &best {
            None => true,
            Some(b) => {
                candidate.cost < b.cost || (candidate.cost == b.cost && candidate.path < b.path)
            }
        };
        if better {
            best = Some(candidate);
        }
    }
    best.ok_or_else(|| InterError::NoFeasibleDomain(intent.zone.clone()))
}
