//! Per-domain multi-access controller: endpoint registry, telemetry
//! database, AT scoring and selection, QoS enforcement and inter-AT
//! mobility.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::access::{AccessError, AccessTech, Attachment, AtState, Flow};
use crate::kernel::SimTime;
use crate::monitoring::{
    evaluate_sla, Broker, KpiValues, KpiWindow, MetricSample, MonitorError, PipelineAd, Unit,
};

pub const DEFAULT_TELEMETRY_CAPACITY: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatricError {
    #[error("endpoint {0} already registered")]
    DuplicateId(String),
    #[error("unknown endpoint {0}")]
    UnknownEndpoint(String),
    #[error("unknown access technology {0}")]
    UnknownAt(String),
    #[error("{at} does not cover zone {zone}")]
    NoCoverage { at: String, zone: String },
    #[error("no feasible attachment for flow {0}")]
    NoFeasibleAt(String),
    #[error("score weights must be non-negative and sum to 1")]
    InvalidWeights,
    #[error(transparent)]
    Access(#[from] AccessError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointKind {
    Ue,
    At,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointRecord {
    pub id: String,
    pub kind: EndpointKind,
    pub registered_at: SimTime,
    pub authorized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreWeights {
    pub latency: f64,
    pub capacity: f64,
    pub energy: f64,
}

impl ScoreWeights {
    pub fn new(latency: f64, capacity: f64, energy: f64) -> Result<Self, MatricError> {
        let w = ScoreWeights {
            latency,
            capacity,
            energy,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), MatricError> {
        let parts = [self.latency, self.capacity, self.energy];
        if parts.iter().any(|p| *p < 0.0 || !p.is_finite())
            || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(MatricError::InvalidWeights);
        }
        Ok(())
    }
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights {
            latency: 0.5,
            capacity: 0.3,
            energy: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilityConfig {
    pub hysteresis: f64,
    pub min_dwell: SimTime,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        MobilityConfig {
            hysteresis: 0.05,
            min_dwell: SimTime::from_millis(100),
        }
    }
}

/// The three normalized features an AT score is built from, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreTerms {
    /// `1 − min(base_latency / latency_bound, 1)`
    pub latency: f64,
    /// `headroom / capacity`, counting the flow's own share as free.
    pub capacity: f64,
    /// `p_max / max p_max` among the candidates.
    pub energy: f64,
}

impl ScoreTerms {
    pub const NAMES: [&'static str; 3] = ["latency", "capacity", "energy"];

    /// Signed weighted contributions in `NAMES` order.
    pub fn contributions(&self, w: &ScoreWeights) -> [f64; 3] {
        [
            w.latency * self.latency,
            w.capacity * self.capacity,
            -w.energy * self.energy,
        ]
    }

    /// Score using only the features whose bit is set in `mask`, clamped
    /// to [0, 1]. `mask = 0b111` is the full score.
    pub fn score_masked(&self, w: &ScoreWeights, mask: u32) -> f64 {
        let raw: f64 = self
            .contributions(w)
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, c)| c)
            .sum();
        raw.clamp(0.0, 1.0)
    }

    pub fn score(&self, w: &ScoreWeights) -> f64 {
        self.score_masked(w, 0b111)
    }
}

/// Headroom available to `flow` on `at`, counting its current share.
pub fn effective_headroom(at: &AccessTech, flow: &Flow) -> u64 {
    at.headroom_bps() + at.share_of(&flow.id).unwrap_or(0)
}

pub fn score_terms(at: &AccessTech, flow: &Flow, max_p_max: f64) -> Result<ScoreTerms, MatricError> {
    if !at.covers(&flow.zone) {
        return Err(MatricError::NoCoverage {
            at: at.id.clone(),
            zone: flow.zone.clone(),
        });
    }
    if at.state() == AtState::Sleeping {
        return Err(AccessError::AtSleeping(at.id.clone()).into());
    }
    let bound = flow.kpi.latency_bound_us as f64;
    let latency = 1.0 - (at.base_latency_us as f64 / bound).min(1.0);
    let capacity = effective_headroom(at, flow) as f64 / at.capacity_bps as f64;
    let energy = if max_p_max > 0.0 {
        at.power.p_max_w / max_p_max
    } else {
        0.0
    };
    Ok(ScoreTerms {
        latency,
        capacity,
        energy,
    })
}

/// `w_l·latency + w_c·capacity − w_e·energy`, clamped to [0, 1].
pub fn score_at(
    at: &AccessTech,
    flow: &Flow,
    w: &ScoreWeights,
    max_p_max: f64,
) -> Result<f64, MatricError> {
    Ok(score_terms(at, flow, max_p_max)?.score(w))
}

pub fn max_p_max<'a>(candidates: impl IntoIterator<Item = &'a AccessTech>) -> f64 {
    candidates
        .into_iter()
        .map(|a| a.power.p_max_w)
        .fold(0.0, f64::max)
}

/// Whether `at` could carry `flow` at all: awake, covering the UE's zone,
/// base latency within the bound, and positioning accuracy strictly better
/// than any required accuracy.
pub fn eligible(at: &AccessTech, flow: &Flow) -> bool {
    at.is_active()
        && at.covers(&flow.zone)
        && at.base_latency_us <= flow.kpi.latency_bound_us
        && match flow.kpi.positioning_cm {
            None => true,
            Some(req) => at.positioning_cm.is_some_and(|p| p < req),
        }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttachmentPlan {
    pub flow: String,
    /// One branch, or two for a split; highest-scored branch first.
    pub branches: Vec<Attachment>,
    pub scores: Vec<f64>,
}

impl AttachmentPlan {
    pub fn is_split(&self) -> bool {
        self.branches.len() == 2
    }
}

/// Chooses where to attach `flow`. A single AT with enough headroom is
/// always preferred (highest score, then smallest id). Otherwise the pair
/// of eligible ATs with the highest score sum whose combined headroom
/// covers the demand carries a split, the higher-scored branch filled
/// first.
pub fn select_at(
    flow: &Flow,
    candidates: &[&AccessTech],
    w: &ScoreWeights,
) -> Result<AttachmentPlan, MatricError> {
    let energy_ref = max_p_max(candidates.iter().copied());
    let mut scored: Vec<(&AccessTech, f64, u64)> = Vec::new();
    for &at in candidates {
        if !eligible(at, flow) {
            continue;
        }
        let s = score_at(at, flow, w, energy_ref)?;
        scored.push((at, s, effective_headroom(at, flow)));
    }
    // Best first: score descending, id ascending.
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.id.cmp(&b.0.id)));

    if let Some((at, s, _)) = scored.iter().find(|(_, _, h)| *h >= flow.demand_bps) {
        return Ok(AttachmentPlan {
            flow: flow.id.clone(),
            branches: vec![Attachment {
                at_id: at.id.clone(),
                allocated_bps: flow.demand_bps,
            }],
            scores: vec![*s],
        });
    }

    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..scored.len() {
        for j in (i + 1)..scored.len() {
            let (hi, hj) = (scored[i].2, scored[j].2);
            if hi == 0 || hj == 0 || (hi as u128 + hj as u128) < (flow.demand_bps as u128) {
                continue;
            }
            let sum = scored[i].1 + scored[j].1;
            // Pairs are visited in sorted order, so the first maximum found
            // is the tie-break winner.
            if best.is_none_or(|(_, _, b)| sum > b) {
                best = Some((i, j, sum));
            }
        }
    }
    let (i, j, _) = best.ok_or_else(|| MatricError::NoFeasibleAt(flow.id.clone()))?;
    let (first, second) = (&scored[i], &scored[j]);
    let first_share = first.2.min(flow.demand_bps);
    Ok(AttachmentPlan {
        flow: flow.id.clone(),
        branches: vec![
            Attachment {
                at_id: first.0.id.clone(),
                allocated_bps: first_share,
            },
            Attachment {
                at_id: second.0.id.clone(),
                allocated_bps: flow.demand_bps - first_share,
            },
        ],
        scores: vec![first.1, second.1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum QosAction {
    IncreaseShare { at: String, extra_bps: u64 },
    RequestHandover,
    Escalate { flow: String, violations: Vec<String> },
}

/// QoS ladder for a flow whose window violates its KPI set: grow the share
/// on the current AT when throughput is short and headroom exists; if that
/// does not cover everything, ask for a handover when some other AT could
/// carry the whole flow, else escalate to the domain orchestrator.
pub fn enforce_qos(
    flow: &Flow,
    window: &KpiWindow,
    candidates: &[&AccessTech],
) -> Result<Vec<QosAction>, MatricError> {
    let values = KpiValues::measure(window, &flow.kpi)?;
    let report = evaluate_sla(&flow.id, &flow.kpi, &values)?;
    if report.compliant() {
        return Ok(Vec::new());
    }
    let mut actions = Vec::new();
    let mut unresolved: Vec<String> = Vec::new();
    for failed in report.failures() {
        if failed.kpi == "throughput" {
            let deficit = (failed.bound - failed.measured).ceil().max(1.0) as u64;
            let current = flow
                .primary_at()
                .and_then(|id| candidates.iter().find(|a| a.id == id));
            let headroom = current.map_or(0, |a| a.headroom_bps());
            if headroom > 0 {
                let extra = deficit.min(headroom);
                actions.push(QosAction::IncreaseShare {
                    at: current.expect("headroom implies AT").id.clone(),
                    extra_bps: extra,
                });
                if extra >= deficit {
                    continue;
                }
            }
        }
        unresolved.push(failed.kpi.clone());
    }
    if unresolved.is_empty() {
        return Ok(actions);
    }
    let attached: Vec<&str> = flow.attachments.iter().map(|a| a.at_id.as_str()).collect();
    let alternative = candidates.iter().any(|a| {
        !attached.contains(&a.id.as_str())
            && eligible(a, flow)
            && effective_headroom(a, flow) >= flow.demand_bps
    });
    if alternative {
        actions.push(QosAction::RequestHandover);
    } else {
        actions.push(QosAction::Escalate {
            flow: flow.id.clone(),
            violations: unresolved,
        });
    }
    Ok(actions)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HandoverDecision {
    Stay,
    Handover { target: String },
}

/// Hand over iff the best alternative beats the current score by strictly
/// more than the hysteresis and the flow has dwelt at least `min_dwell`.
pub fn handover_decision(
    current_score: f64,
    best_alternative: Option<(&str, f64)>,
    cfg: &MobilityConfig,
    dwell: SimTime,
) -> HandoverDecision {
    match best_alternative {
        Some((id, s)) if s > current_score + cfg.hysteresis && dwell >= cfg.min_dwell => {
            HandoverDecision::Handover {
                target: id.to_string(),
            }
        }
        _ => HandoverDecision::Stay,
    }
}

pub fn evaluate_handover(
    flow: &Flow,
    candidates: &[&AccessTech],
    cfg: &MobilityConfig,
    w: &ScoreWeights,
    t: SimTime,
) -> HandoverDecision {
    // Split flows stay split; unattached flows have nothing to hand over.
    if flow.attachments.len() != 1 {
        return HandoverDecision::Stay;
    }
    let current_id = &flow.attachments[0].at_id;
    let energy_ref = max_p_max(candidates.iter().copied());
    let Some(current) = candidates.iter().find(|a| &a.id == current_id) else {
        return HandoverDecision::Stay;
    };
    let Ok(current_score) = score_at(current, flow, w, energy_ref) else {
        return HandoverDecision::Stay;
    };
    let best = candidates
        .iter()
        .filter(|a| &a.id != current_id && eligible(a, flow))
        .filter(|a| effective_headroom(a, flow) >= flow.demand_bps)
        .filter_map(|a| score_at(a, flow, w, energy_ref).ok().map(|s| (a.id.as_str(), s)))
        .fold(None::<(&str, f64)>, |best, (id, s)| match best {
            Some((bid, bs)) if bs > s || (bs == s && bid < id) => Some((bid, bs)),
            _ => Some((id, s)),
        });
    handover_decision(current_score, best, cfg, t.saturating_sub(flow.attached_at))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Load,
    CommittedBps,
    Power,
    State,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::Load,
        MetricKind::CommittedBps,
        MetricKind::Power,
        MetricKind::State,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Load => "load",
            MetricKind::CommittedBps => "committed_bps",
            MetricKind::Power => "power",
            MetricKind::State => "state",
        }
    }

    pub fn unit(self) -> Unit {
        match self {
            MetricKind::Load => Unit::Fraction,
            MetricKind::CommittedBps => Unit::Bps,
            MetricKind::Power => Unit::Watts,
            MetricKind::State => Unit::Bool,
        }
    }
}

/// Bounded per-(AT, metric) ring buffers.
#[derive(Debug, Clone)]
pub struct TelemetryDb {
    capacity: usize,
    buffers: BTreeMap<(String, MetricKind), VecDeque<MetricSample>>,
}

impl TelemetryDb {
    pub fn new(capacity: usize) -> Self {
        TelemetryDb {
            capacity: capacity.max(1),
            buffers: BTreeMap::new(),
        }
    }

    fn push(&mut self, at: &str, kind: MetricKind, s: MetricSample) {
        let buf = self.buffers.entry((at.to_string(), kind)).or_default();
        if buf.len() == self.capacity {
            buf.pop_front();
        }
        buf.push_back(s);
    }

    fn query(&self, at: &str, kind: MetricKind, since: SimTime) -> Vec<MetricSample> {
        self.buffers
            .get(&(at.to_string(), kind))
            .map(|b| b.iter().filter(|s| s.t >= since).cloned().collect())
            .unwrap_or_default()
    }
}

pub fn metric_topic(domain: &str, at: &str, kind: MetricKind) -> String {
    format!("matric.{domain}.{at}.{}", kind.as_str())
}

/// One controller per domain; owns the domain's access technologies.
#[derive(Debug, Clone)]
pub struct Matric {
    domain: String,
    ats: BTreeMap<String, AccessTech>,
    endpoints: BTreeMap<String, EndpointRecord>,
    telemetry: TelemetryDb,
    pub weights: ScoreWeights,
    pub mobility: MobilityConfig,
}

impl Matric {
    pub fn new(domain: impl Into<String>, telemetry_capacity: usize) -> Self {
        Matric {
            domain: domain.into(),
            ats: BTreeMap::new(),
            endpoints: BTreeMap::new(),
            telemetry: TelemetryDb::new(telemetry_capacity),
            weights: ScoreWeights::default(),
            mobility: MobilityConfig::default(),
        }
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn register_endpoint(&mut self, rec: EndpointRecord) -> Result<(), MatricError> {
        if self.endpoints.contains_key(&rec.id) {
            return Err(MatricError::DuplicateId(rec.id));
        }
        self.endpoints.insert(rec.id.clone(), rec);
        Ok(())
    }

    pub fn deregister_endpoint(&mut self, id: &str) -> Result<EndpointRecord, MatricError> {
        self.endpoints
            .remove(id)
            .ok_or_else(|| MatricError::UnknownEndpoint(id.to_string()))
    }

    pub fn endpoint(&self, id: &str) -> Option<&EndpointRecord> {
        self.endpoints.get(id)
    }

    pub fn endpoints(&self) -> impl Iterator<Item = &EndpointRecord> {
        self.endpoints.values()
    }

    /// Registers an AT as an endpoint and advertises its telemetry topics.
    pub fn add_at(
        &mut self,
        at: AccessTech,
        t: SimTime,
        broker: &mut Broker,
    ) -> Result<(), MatricError> {
        at.validate()?;
        self.register_endpoint(EndpointRecord {
            id: at.id.clone(),
            kind: EndpointKind::At,
            registered_at: t,
            authorized: true,
        })?;
        for kind in MetricKind::ALL {
            broker.advertise(PipelineAd {
                topic: metric_topic(&self.domain, &at.id, kind),
                producer: format!("matric.{}", self.domain),
                schema: kind.unit(),
            })?;
        }
        self.ats.insert(at.id.clone(), at);
        Ok(())
    }

    pub fn at(&self, id: &str) -> Result<&AccessTech, MatricError> {
        self.ats.get(id).ok_or_else(|| MatricError::UnknownAt(id.to_string()))
    }

    pub fn at_mut(&mut self, id: &str) -> Result<&mut AccessTech, MatricError> {
        self.ats
            .get_mut(id)
            .ok_or_else(|| MatricError::UnknownAt(id.to_string()))
    }

    pub fn ats(&self) -> impl Iterator<Item = &AccessTech> {
        self.ats.values()
    }

    pub fn ats_mut(&mut self) -> impl Iterator<Item = &mut AccessTech> {
        self.ats.values_mut()
    }

    pub fn candidates(&self) -> Vec<&AccessTech> {
        self.ats.values().collect()
    }

    /// Samples load, committed bandwidth, power and state of one AT into
    /// the telemetry database and onto its monitoring topics.
    pub fn collect_metrics(
        &mut self,
        at_id: &str,
        t: SimTime,
        broker: &mut Broker,
    ) -> Result<Vec<MetricSample>, MatricError> {
        let at = self.at(at_id)?;
        let values = [
            (MetricKind::Load, at.load_fraction()),
            (MetricKind::CommittedBps, at.committed_bps() as f64),
            (MetricKind::Power, at.power_w()),
            (MetricKind::State, if at.is_active() { 1.0 } else { 0.0 }),
        ];
        let mut out = Vec::with_capacity(values.len());
        for (kind, value) in values {
            let sample = MetricSample {
                t,
                topic: metric_topic(&self.domain, at_id, kind),
                value,
                unit: kind.unit(),
            };
            broker.publish(sample.clone())?;
            self.telemetry.push(at_id, kind, sample.clone());
            out.push(sample);
        }
        Ok(out)
    }

    pub fn query_telemetry(
        &self,
        at_id: &str,
        kind: MetricKind,
        since: SimTime,
    ) -> Result<Vec<MetricSample>, MatricError> {
        self.at(at_id)?;
        Ok(self.telemetry.query(at_id, kind, since))
    }

    pub fn select_at(&self, flow: &Flow) -> Result<AttachmentPlan, MatricError> {
        select_at(flow, &self.candidates(), &self.weights)
    }

    /// Admits every branch of `plan`; on any failure the branches already
    /// admitted are rolled back and the flow is left untouched.
    pub fn attach(&mut self, flow: &mut Flow, plan: &AttachmentPlan, t: SimTime) -> Result<(), MatricError> {
        let mut done: Vec<&str> = Vec::new();
        for b in &plan.branches {
            let res = self.at_mut(&b.at_id).and_then(|at| Ok(at.admit(&flow.id, b.allocated_bps)?));
            if let Err(e) = res {
                for id in done {
                    self.at_mut(id)?.release(&flow.id)?;
                }
                return Err(e);
            }
            done.push(&b.at_id);
        }
        flow.attachments = plan.branches.clone();
        flow.attached_at = t;
        Ok(())
    }

    pub fn detach(&mut self, flow: &mut Flow) -> Result<(), MatricError> {
        for b in std::mem::take(&mut flow.attachments) {
            self.at_mut(&b.at_id)?.release(&flow.id)?;
        }
        Ok(())
    }

    pub fn evaluate_handover(&self, flow: &Flow, t: SimTime) -> HandoverDecision {
        evaluate_handover(flow, &self.candidates(), &self.mobility, &self.weights, t)
    }

    /// Moves a single-attachment flow to `target` with make-before-break
    /// semantics inside one call: the flow is never observed with zero or
    /// two primary attachments.
    pub fn execute_handover(&mut self, flow: &mut Flow, target: &str, t: SimTime) -> Result<(), MatricError> {
        let [old] = flow.attachments.as_slice() else {
            return Err(MatricError::NoFeasibleAt(flow.id.clone()));
        };
        let old = old.clone();
        self.at_mut(target)?.admit(&flow.id, old.allocated_bps)?;
        self.at_mut(&old.at_id)?.release(&flow.id)?;
        flow.attachments = vec![Attachment {
            at_id: target.to_string(),
            allocated_bps: old.allocated_bps,
        }];
        flow.attached_at = t;
        Ok(())
    }

    /// Grows a flow's share on one of its ATs.
    pub fn increase_share(&mut self, flow: &mut Flow, at_id: &str, extra: u64) -> Result<(), MatricError> {
        self.at_mut(at_id)?.increase_share(&flow.id, extra)?;
        if let Some(a) = flow.attachments.iter_mut().find(|a| a.at_id == at_id) {
            a.allocated_bps += extra;
        }
        Ok(())
    }
}
