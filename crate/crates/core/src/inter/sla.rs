//! End-to-end SLAs and their per-domain decomposition.
//!
//! Budgets recompose exactly: latency and jitter add up to the end-to-end
//! bound, reliability multiplies back to the end-to-end floor, throughput is
//! copied to every domain.

use serde::{Deserialize, Serialize};

use super::{CapabilityRecord, InterError, KpiRequirementSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlaState {
    Proposed,
    Active,
    Violated,
    Terminated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E2eSla {
    pub id: String,
    pub kpi: KpiRequirementSet,
    pub domain_path: Vec<String>,
    pub state: SlaState,
}

impl E2eSla {
    pub fn new(id: impl Into<String>, kpi: KpiRequirementSet) -> Self {
        E2eSla {
            id: id.into(),
            kpi,
            domain_path: Vec::new(),
            state: SlaState::Proposed,
        }
    }

    pub fn activate(&mut self, path: Vec<String>) -> Result<(), InterError> {
        if path.is_empty() {
            return Err(InterError::EmptyPath);
        }
        self.domain_path = path;
        self.state = SlaState::Active;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSla {
    pub parent: String,
    pub domain: String,
    pub kpi: KpiRequirementSet,
}

/// Splits `total` proportionally to `weights` in integer units, handing the
/// rounding remainder to the last entry. Equal split when all weights are 0.
fn split_proportional(total: u64, weights: &[u64]) -> Vec<u64> {
    let k = weights.len() as u128;
    let sum: u128 = weights.iter().map(|&w| w as u128).sum();
    let mut out: Vec<u64> = weights
        .iter()
        .map(|&w| {
            if sum == 0 {
                (total as u128 / k) as u64
            } else {
                (total as u128 * w as u128 / sum) as u64
            }
        })
        .collect();
    let assigned: u64 = out.iter().sum();
    *out.last_mut().expect("non-empty") += total - assigned;
    out
}

/// Per-domain budgets for `sla` along its domain path. `caps` must contain
/// a record for every domain on the path (extra records are ignored).
pub fn decompose_sla(
    sla: &E2eSla,
    caps: &[CapabilityRecord],
) -> Result<Vec<DomainSla>, InterError> {
    if sla.domain_path.is_empty() {
        return Err(InterError::EmptyPath);
    }
    let mins = sla
        .domain_path
        .iter()
        .map(|d| {
            caps.iter()
                .find(|c| &c.domain == d)
                .map(|c| c.min_latency_us)
                .ok_or_else(|| InterError::UnknownDomain(d.clone()))
        })
        .collect::<Result<Vec<u64>, _>>()?;
    let floor: u64 = mins.iter().sum();
    if floor > sla.kpi.latency_bound_us {
        return Err(InterError::InfeasibleBudget {
            required_us: floor,
            bound_us: sla.kpi.latency_bound_us,
        });
    }

    let k = sla.domain_path.len();
    let latency = split_proportional(sla.kpi.latency_bound_us, &mins);
    let jitter = sla.kpi.jitter_bound_us.map(|j| split_proportional(j, &mins));
    let reliability = if k == 1 {
        sla.kpi.reliability_min
    } else {
        sla.kpi.reliability_min.powf(1.0 / k as f64)
    };

    Ok(sla
        .domain_path
        .iter()
        .enumerate()
        .map(|(i, d)| DomainSla {
            parent: sla.id.clone(),
            domain: d.clone(),
            kpi: KpiRequirementSet {
                latency_bound_us: latency[i],
                jitter_bound_us: jitter.as_ref().map(|j| j[i]),
                reliability_min: reliability,
                ..sla.kpi.clone()
            },
        })
        .collect())
}

/// Inverse of [`decompose_sla`]: sums latency/jitter, multiplies
/// reliability, takes throughput from the first budget.
pub fn recompose(parts: &[DomainSla]) -> Option<KpiRequirementSet> {
    let first = parts.first()?;
    let latency = parts.iter().map(|p| p.kpi.latency_bound_us).sum();
    let jitter = parts
        .iter()
        .map(|p| p.kpi.jitter_bound_us)
        .sum::<Option<u64>>();
    let reliability = parts.iter().map(|p| p.kpi.reliability_min).product();
    Some(KpiRequirementSet {
        latency_bound_us: latency,
        jitter_bound_us: jitter,
        reliability_min: reliability,
        ..first.kpi.clone()
    })
}
