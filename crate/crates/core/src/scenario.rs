//! Scenario documents: strict JSON loading and validation.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::access::{AccessTech, AtKind, PowerModel};
use crate::intra::{ComputeNode, PlacementConfig, Tier};
use crate::inter::{duplicate_priority, Policy};
use crate::matric::{MobilityConfig, ScoreWeights, DEFAULT_TELEMETRY_CAPACITY};
use crate::workloads::UseCaseSpec;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        field: field.into(),
        reason: reason.into(),
    }
}

/// An access technology built from its kind's preset, with optional
/// per-field overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtSpec {
    pub id: String,
    pub kind: AtKind,
    pub coverage: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity_bps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_latency_us: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter_span_us: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_error_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<PowerModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positioning_cm: Option<f64>,
}

impl AtSpec {
    pub fn build(&self) -> AccessTech {
        let zones: Vec<&str> = self.coverage.iter().map(String::as_str).collect();
        let mut at = AccessTech::from_preset(&self.id, self.kind, &zones);
        if let Some(v) = self.capacity_bps {
            at.capacity_bps = v;
        }
        if let Some(v) = self.base_latency_us {
            at.base_latency_us = v;
        }
        if let Some(v) = self.jitter_span_us {
            at.jitter_span_us = v;
        }
        if let Some(v) = self.per_error_rate {
            at.per_error_rate = v;
        }
        if let Some(v) = self.power {
            at.power = v;
        }
        if self.positioning_cm.is_some() {
            at.positioning_cm = self.positioning_cm;
        }
        at
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    pub tier: Tier,
    pub cpu_units: u32,
    pub mem_mb: u64,
    pub power: PowerModel,
}

impl NodeSpec {
    pub fn build(&self) -> ComputeNode {
        ComputeNode::new(&self.id, self.tier, self.cpu_units, self.mem_mb, self.power)
    }
}

fn default_unit_cost() -> f64 {
    1.0
}

fn default_telemetry() -> usize {
    DEFAULT_TELEMETRY_CAPACITY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub id: String,
    #[serde(default = "default_unit_cost")]
    pub unit_cost: f64,
    #[serde(default)]
    pub ats: Vec<AtSpec>,
    #[serde(default)]
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub weights: ScoreWeights,
    #[serde(default)]
    pub mobility: MobilityConfig,
    #[serde(default)]
    pub placement: PlacementConfig,
    #[serde(default = "default_telemetry")]
    pub telemetry_capacity: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Toggles {
    #[serde(default)]
    pub sleep_policy: bool,
    #[serde(default)]
    pub explain: bool,
}

fn default_tick_us() -> u64 {
    10_000
}

fn default_window_us() -> u64 {
    1_000_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timing {
    /// Link sampling and mobility period.
    #[serde(default = "default_tick_us")]
    pub tick_us: u64,
    /// KPI window and SLA evaluation period.
    #[serde(default = "default_window_us")]
    pub window_us: u64,
}

impl Default for Timing {
    fn default() -> Self {
        Timing {
            tick_us: default_tick_us(),
            window_us: default_window_us(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub seed: u64,
    pub duration_s: f64,
    pub domains: Vec<DomainSpec>,
    #[serde(default)]
    pub policies: Vec<Policy>,
    #[serde(default)]
    pub workloads: Vec<UseCaseSpec>,
    #[serde(default)]
    pub toggles: Toggles,
    #[serde(default)]
    pub timing: Timing,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let sc: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(invalid("duration_s", "must be positive"));
        }
        if self.domains.is_empty() {
            return Err(invalid("domains", "at least one domain is required"));
        }
        if self.timing.tick_us == 0 || self.timing.window_us < self.timing.tick_us {
            return Err(invalid("timing", "tick_us must be positive and no longer than window_us"));
        }
        let mut domains = BTreeSet::new();
        let mut ats = BTreeSet::new();
        let mut nodes = BTreeSet::new();
        for d in &self.domains {
            if !domains.insert(&d.id) {
                return Err(invalid("domains.id", format!("duplicate domain id {}", d.id)));
            }
            if !(d.unit_cost >= 0.0 && d.unit_cost.is_finite()) {
                return Err(invalid(format!("domains.{}.unit_cost", d.id), "must be non-negative"));
            }
            d.weights
                .validate()
                .map_err(|e| invalid(format!("domains.{}.weights", d.id), e.to_string()))?;
            if !(d.mobility.hysteresis >= 0.0) {
                return Err(invalid(format!("domains.{}.mobility", d.id), "hysteresis must be non-negative"));
            }
            for a in &d.ats {
                if !ats.insert(&a.id) {
                    return Err(invalid("ats.id", format!("duplicate AT id {}", a.id)));
                }
                a.build()
                    .validate()
                    .map_err(|e| invalid(format!("ats.{}", a.id), e.to_string()))?;
            }
            for n in &d.nodes {
                if !nodes.insert(&n.id) {
                    return Err(invalid("nodes.id", format!("duplicate node id {}", n.id)));
                }
                if n.cpu_units == 0 || n.mem_mb == 0 || !n.power.is_valid() {
                    return Err(invalid(format!("nodes.{}", n.id), "capacities and power model must be valid"));
                }
            }
        }
        if let Some(p) = duplicate_priority(&self.policies) {
            return Err(invalid("policies.priority", format!("duplicate priority {p}")));
        }
        let mut workloads = BTreeSet::new();
        for w in &self.workloads {
            if !workloads.insert(&w.id) {
                return Err(invalid("workloads.id", format!("duplicate workload id {}", w.id)));
            }
            w.validate()
                .map_err(|e| invalid(format!("workloads.{}", w.id), e.to_string()))?;
        }
        Ok(())
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_json(&text)
}
