//! Task intents and their translation into quantitative KPI bounds.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::InterError;

pub const GBPS: u64 = 1_000_000_000;
pub const MBPS: u64 = 1_000_000;
pub const KBPS: u64 = 1_000;

/// Reliability floor used by use cases whose KPI table gives none: one
/// minus the 6G packet-error-rate target of 1e-7.
pub const DEFAULT_RELIABILITY: f64 = 1.0 - 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UseCaseKind {
    Metaverse,
    DigitalTwin,
    VirtualProduction,
    FactoryDt,
    FactoryRobotics,
}

impl UseCaseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            UseCaseKind::Metaverse => "metaverse",
            UseCaseKind::DigitalTwin => "digital_twin",
            UseCaseKind::VirtualProduction => "virtual_production",
            UseCaseKind::FactoryDt => "factory_dt",
            UseCaseKind::FactoryRobotics => "factory_robotics",
        }
    }
}

impl fmt::Display for UseCaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UseCaseKind {
    type Err = InterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "metaverse" => UseCaseKind::Metaverse,
            "digital_twin" => UseCaseKind::DigitalTwin,
            "virtual_production" => UseCaseKind::VirtualProduction,
            "factory_dt" => UseCaseKind::FactoryDt,
            "factory_robotics" => UseCaseKind::FactoryRobotics,
            other => return Err(InterError::UnknownUseCase(other.to_string())),
        })
    }
}

/// Level of human interaction in a virtual-production session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionClass {
    NearLive,
    TwoWay,
    MultiWay,
    RemoteMusic,
}

impl InteractionClass {
    /// (latency bound, jitter bound) in microseconds, ordered by
    /// interactivity: the most interactive class gets the tightest pair.
    pub fn bounds_us(self) -> (u64, Option<u64>) {
        match self {
            InteractionClass::RemoteMusic => (15_000, Some(1_000)),
            InteractionClass::TwoWay => (50_000, Some(25_000)),
            InteractionClass::MultiWay => (150_000, Some(50_000)),
            InteractionClass::NearLive => (1_700_000, None),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            InteractionClass::NearLive => "near_live",
            InteractionClass::TwoWay => "two_way",
            InteractionClass::MultiWay => "multi_way",
            InteractionClass::RemoteMusic => "remote_music",
        }
    }
}

/// Quantitative KPI bounds. Latency and jitter are upper bounds (inclusive,
/// integer microseconds; a strict `< x ms` bound is stored as `x·1000 − 1`),
/// throughput and reliability are lower bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KpiRequirementSet {
    pub latency_bound_us: u64,
    #[serde(default = "default_percentile")]
    pub latency_percentile: f64,
    #[serde(default)]
    pub jitter_bound_us: Option<u64>,
    pub throughput_dl_bps: u64,
    pub throughput_ul_bps: u64,
    pub reliability_min: f64,
    #[serde(default)]
    pub positioning_cm: Option<f64>,
    #[serde(default)]
    pub sync_bound_us: Option<u64>,
}

fn default_percentile() -> f64 {
    0.99
}

impl KpiRequirementSet {
    pub fn validate(&self) -> Result<(), InterError> {
        let bad = |field: &'static str, reason: &str| {
            Err(InterError::InvalidKpi {
                field,
                reason: reason.to_string(),
            })
        };
        if self.latency_bound_us == 0 {
            return bad("latency_bound_us", "must be positive");
        }
        if !(self.latency_percentile > 0.0 && self.latency_percentile < 1.0) {
            return bad("latency_percentile", "must lie in (0, 1)");
        }
        if self.jitter_bound_us == Some(0) {
            return bad("jitter_bound_us", "must be positive");
        }
        if self.throughput_dl_bps == 0 || self.throughput_ul_bps == 0 {
            return bad("throughput", "must be positive");
        }
        if !(self.reliability_min > 0.0 && self.reliability_min <= 1.0) {
            return bad("reliability_min", "must lie in (0, 1]");
        }
        if self.positioning_cm.is_some_and(|p| p <= 0.0) {
            return bad("positioning_cm", "must be positive");
        }
        if self.sync_bound_us == Some(0) {
            return bad("sync_bound_us", "must be positive");
        }
        Ok(())
    }

    /// Same bounds with symmetric throughput.
    pub fn with_throughput(mut self, dl_bps: u64, ul_bps: u64) -> Self {
        self.throughput_dl_bps = dl_bps;
        self.throughput_ul_bps = ul_bps;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskIntent {
    pub kind: UseCaseKind,
    pub user_count: u32,
    pub area_m2: f64,
    pub zone: String,
    #[serde(default)]
    pub interaction_class: Option<InteractionClass>,
}

impl TaskIntent {
    pub fn validate(&self) -> Result<(), InterError> {
        if self.user_count == 0 {
            return Err(InterError::InvalidIntent("user_count must be at least 1".into()));
        }
        if !(self.area_m2 > 0.0) {
            return Err(InterError::InvalidIntent("area_m2 must be positive".into()));
        }
        Ok(())
    }
}

/// Maps an intent to the preset KPI set of its use case, taking the most
/// stringent end of each range except where a per-user minimum is the
/// meaningful requirement (throughput).
pub fn translate_intent(intent: &TaskIntent) -> Result<KpiRequirementSet, InterError> {
    intent.validate()?;
    let kpi = match intent.kind {
        UseCaseKind::Metaverse => KpiRequirementSet {
            latency_bound_us: 20_000,
            latency_percentile: 0.99,
            jitter_bound_us: None,
            throughput_dl_bps: 5 * GBPS,
            throughput_ul_bps: 5 * GBPS,
            reliability_min: 0.999_999,
            positioning_cm: Some(1.0),
            sync_bound_us: None,
        },
        UseCaseKind::DigitalTwin => KpiRequirementSet {
            latency_bound_us: 20_000,
            latency_percentile: 0.99,
            jitter_bound_us: None,
            throughput_dl_bps: 100 * MBPS,
            throughput_ul_bps: 50 * MBPS,
            reliability_min: DEFAULT_RELIABILITY,
            positioning_cm: Some(10.0),
            sync_bound_us: None,
        },
        UseCaseKind::VirtualProduction => {
            let class = intent
                .interaction_class
                .unwrap_or(InteractionClass::RemoteMusic);
            let (latency, jitter) = class.bounds_us();
            KpiRequirementSet {
                latency_bound_us: latency,
                latency_percentile: 0.99,
                jitter_bound_us: jitter,
                throughput_dl_bps: 50 * MBPS,
                throughput_ul_bps: 50 * MBPS,
                reliability_min: DEFAULT_RELIABILITY,
                positioning_cm: None,
                sync_bound_us: Some(1),
            }
        }
        // Read as "tolerates latency of at least 20 ms": the bound sits at 20 ms.
        UseCaseKind::FactoryDt => KpiRequirementSet {
            latency_bound_us: 20_000,
            latency_percentile: 0.99,
            jitter_bound_us: None,
            throughput_dl_bps: GBPS,
            throughput_ul_bps: GBPS,
            reliability_min: DEFAULT_RELIABILITY,
            positioning_cm: Some(10.0),
            sync_bound_us: None,
        },
        // Strict "< 20 ms"; "< 1 Mbps" read as the flow needing at most 1 Mbps.
        UseCaseKind::FactoryRobotics => KpiRequirementSet {
            latency_bound_us: 19_999,
            latency_percentile: 0.99,
            jitter_bound_us: None,
            throughput_dl_bps: MBPS,
            throughput_ul_bps: MBPS,
            reliability_min: DEFAULT_RELIABILITY,
            positioning_cm: Some(1.0),
            sync_bound_us: None,
        },
    };
    Ok(kpi)
}

/// Intents of the same nature merged into one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedRequest {
    pub kind: UseCaseKind,
    pub zone: String,
    pub interaction_class: Option<InteractionClass>,
    pub user_count: u32,
    pub area_m2: f64,
    /// Indices into the input intent list that were merged.
    pub members: Vec<usize>,
}

impl AggregatedRequest {
    pub fn as_intent(&self) -> TaskIntent {
        TaskIntent {
            kind: self.kind,
            user_count: self.user_count,
            area_m2: self.area_m2,
            zone: self.zone.clone(),
            interaction_class: self.interaction_class,
        }
    }
}

/// Merges intents with identical `(kind, zone, interaction_class)`; groups
/// appear in order of first occurrence.
pub fn compose_requests(intents: &[TaskIntent]) -> Vec<AggregatedRequest> {
    let mut groups: Vec<AggregatedRequest> = Vec::new();
    for (idx, intent) in intents.iter().enumerate() {
        let existing = groups.iter_mut().find(|g| {
            g.kind == intent.kind
                && g.zone == intent.zone
                && g.interaction_class == intent.interaction_class
        });
        match existing {
            Some(g) => {
                g.user_count += intent.user_count;
                g.area_m2 += intent.area_m2;
                g.members.push(idx);
            }
            None => groups.push(AggregatedRequest {
                kind: intent.kind,
                zone: intent.zone.clone(),
                interaction_class: intent.interaction_class,
                user_count: intent.user_count,
                area_m2: intent.area_m2,
                members: vec![idx],
            }),
        }
    }
    groups
}
