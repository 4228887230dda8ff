//! Run report: per-SLA compliance rows, energy ledger, summary document
//! and event trace.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::cognition::Explanation;
use crate::inter::{CapabilityRecord, DomainSla, SecurityControlPlan};
use crate::intra::{PlacementPlan, ScaleAction};

pub const REPORT_HEADER: &str = "sla_id,kpi,measured,bound,pass";
pub const ENERGY_HEADER: &str = "component,joules";

/// Worst value seen for one KPI of one SLA across all evaluated windows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplianceRow {
    pub sla_id: String,
    pub kpi: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionRecord {
    pub request: String,
    pub workloads: Vec<String>,
    pub path: Option<Vec<String>>,
    pub cost: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecurityRecord {
    pub workload: String,
    pub plan: SecurityControlPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleRecord {
    pub t_s: f64,
    pub chain: String,
    pub action: ScaleAction,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SlaSummary {
    pub total: usize,
    pub evaluated: usize,
    pub violated: usize,
    pub violation_windows: u64,
    pub violations_by_kpi: BTreeMap<String, u64>,
    pub blocked_flows: usize,
    pub first_violation_s: Option<f64>,
    pub first_throughput_violation_s: Option<f64>,
    pub saturation_s: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct QosSummary {
    pub increase_share: u64,
    pub handover_requests: u64,
    pub escalations: u64,
    pub readmissions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergySummary {
    pub total_joules: f64,
    pub delivered_bits: u128,
    pub efficiency_bit_per_joule: f64,
    pub components: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub duration_s: f64,
    pub flows: usize,
    pub sla: SlaSummary,
    pub qos: QosSummary,
    pub handovers: BTreeMap<String, u64>,
    pub max_handovers_per_flow: u64,
    pub energy: EnergySummary,
    pub capabilities: Vec<CapabilityRecord>,
    pub selections: Vec<SelectionRecord>,
    pub decompositions: Vec<DomainSla>,
    pub security: Vec<SecurityRecord>,
    pub placements: Vec<PlacementPlan>,
    pub scaling: Vec<ScaleRecord>,
    pub drift_events: u64,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub explanations: Vec<Explanation>,
    pub events: usize,
    pub invariant_checks: u64,
    pub trace_digest: String,
    #[serde(skip)]
    pub rows: Vec<ComplianceRow>,
    #[serde(skip)]
    pub trace_text: String,
}

impl RunReport {
    pub fn report_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.sla_id, r.kpi, r.measured, r.bound, r.pass);
        }
        out
    }

    pub fn energy_csv(&self) -> String {
        let mut out = String::from(ENERGY_HEADER);
        out.push('\n');
        for (c, j) in &self.energy.components {
            let _ = writeln!(out, "{c},{j}");
        }
        let _ = writeln!(out, "total,{}", self.energy.total_joules);
        out
    }

    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn violations(&self) -> u64 {
        self.sla.violation_windows
    }

    /// Writes `report.csv`, `energy.csv`, `summary.json` and `trace.txt`.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.csv"), self.report_csv())?;
        std::fs::write(dir.join("energy.csv"), self.energy_csv())?;
        std::fs::write(dir.join("summary.json"), self.summary_json())?;
        std::fs::write(dir.join("trace.txt"), &self.trace_text)?;
        Ok(())
    }
}
