//! Inter-domain orchestration: intent translation, request composition,
//! SLA decomposition, capability-driven domain selection, policy filtering
//! and security-control planning.

mod intent;
mod policy;
mod security;
mod selection;
mod sla;

use thiserror::Error;

pub use intent::{
    compose_requests, translate_intent, AggregatedRequest, InteractionClass, KpiRequirementSet,
    TaskIntent, UseCaseKind, DEFAULT_RELIABILITY, GBPS, KBPS, MBPS,
};
pub use policy::{apply_policies, duplicate_priority, Effect, Issuer, Policy, PolicyRule};
pub use security::{select_controls, ControlStrength, RiskLevel, SecurityControlPlan};
pub use selection::{carriage_cost, select_domains, CapabilityRecord, DomainSelection};
pub use sla::{decompose_sla, recompose, DomainSla, E2eSla, SlaState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterError {
    #[error("unknown use case {0:?}")]
    UnknownUseCase(String),
    #[error("invalid intent: {0}")]
    InvalidIntent(String),
    #[error("invalid KPI field {field}: {reason}")]
    InvalidKpi { field: &'static str, reason: String },
    #[error("latency floor {required_us}us exceeds bound {bound_us}us")]
    InfeasibleBudget { required_us: u64, bound_us: u64 },
    #[error("SLA has an empty domain path")]
    EmptyPath,
    #[error("no capability record for domain {0}")]
    UnknownDomain(String),
    #[error("no capability records supplied")]
    NoCapabilities,
    #[error("no feasible domain path for zone {0}")]
    NoFeasibleDomain(String),
}
