//! End-to-end monitoring plane: advertised pipelines with subscriptions,
//! windowed KPI estimation, SLA compliance and energy accounting.

mod energy;
mod kpi;
mod pubsub;

use thiserror::Error;

use crate::kernel::SimTime;

pub use energy::{EnergyLedger, PowerReading};
pub use kpi::{
    compute_kpi, evaluate_sla, nearest_rank, percentile_sorted, ComplianceReport, KpiCheck,
    KpiKind, KpiValues, KpiWindow, SampleBuffer, DEFAULT_WINDOW,
};
pub use pubsub::{Broker, MetricSample, PipelineAd, SubscriptionId, Unit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonitorError {
    #[error("topic {0} already advertised")]
    DuplicateTopic(String),
    #[error("topic {0} is not advertised")]
    UnknownTopic(String),
    #[error("topic {topic} carries {expected:?}, got {got:?}")]
    SchemaMismatch { topic: String, expected: Unit, got: Unit },
    #[error("no samples in window for {0}")]
    EmptyWindow(String),
    #[error("SLA {sla} needs a measured {kpi}")]
    MissingKpi { sla: String, kpi: &'static str },
    #[error("interval [{t0}, {t1}] is not increasing")]
    NonMonotonicInterval { t0: SimTime, t1: SimTime },
    #[error("no power reading covers the start of the interval for {0}")]
    UncoveredInterval(String),
    #[error("negative or non-finite power for {0}")]
    NegativePower(String),
}

/// Topic carrying lifecycle events of one SLA.
pub fn sla_topic(sla_id: &str) -> String {
    format!("orch.sla.{sla_id}")
}
