//! Scenario execution: wires workloads, inter- and intra-domain
//! orchestration, the per-domain controllers and monitoring onto the event
//! kernel.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::access::{AccessTech, Flow, LinkSample};
use crate::cognition::{detect_drift, explain_at_score, explain_domain_selection, DEFAULT_DRIFT_K};
use crate::intra::{advertise_capabilities, IntraOrchestrator, ServiceChain, ServiceFunction, Usage};
use crate::inter::{
    compose_requests, decompose_sla, select_controls, select_domains, CapabilityRecord, E2eSla,
    KpiRequirementSet, SlaState,
};
use crate::kernel::{EventKind, Kernel, KernelError, RngStream, SimTime};
use crate::matric::{
    evaluate_handover, max_p_max, score_terms, select_at, AttachmentPlan, HandoverDecision, Matric,
    MatricError, QosAction,
};
use crate::monitoring::{
    evaluate_sla, sla_topic, Broker, ComplianceReport, EnergyLedger, KpiValues, MetricSample,
    PipelineAd, SampleBuffer, Unit,
};
use crate::report::{
    ComplianceRow, EnergySummary, QosSummary, RunReport, ScaleRecord, SecurityRecord,
    SelectionRecord, SlaSummary,
};
use crate::scenario::{Scenario, ScenarioError};
use crate::workloads::{generate, WorkloadError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("workload {workload}: {source}")]
    Workload {
        workload: String,
        source: WorkloadError,
    },
    #[error("t={t} {event}: {reason}")]
    Event {
        t: SimTime,
        event: String,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimEvent {
    Arrival(usize),
    Departure(usize),
    Tick,
    Monitor,
}

impl EventKind for SimEvent {
    fn kind(&self) -> &str {
        match self {
            SimEvent::Arrival(_) => "arrival",
            SimEvent::Departure(_) => "departure",
            SimEvent::Tick => "tick",
            SimEvent::Monitor => "monitor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Pending,
    Active,
    Blocked,
    Departed,
}

struct DomainRt {
    unit_cost: f64,
    matric: Matric,
    intra: IntraOrchestrator,
    handovers: u64,
}

struct FlowRt {
    flow: Flow,
    workload: String,
    sla: E2eSla,
    domain: Option<usize>,
    transit_us: u64,
    status: Status,
    buffer: SampleBuffer,
    rng: RngStream,
    active_since: SimTime,
    last_sample: SimTime,
    worst: Vec<ComplianceRow>,
    violated_windows: u64,
    ever_blocked: bool,
    departure: Option<SimTime>,
    reference: Option<Vec<f64>>,
    handovers: u64,
}

struct WorkloadRt {
    domain: Option<usize>,
    service: Vec<ServiceFunction>,
    kpi: Option<KpiRequirementSet>,
    active: usize,
    deployed: bool,
}

struct Sim {
    sc: Scenario,
    t_end: SimTime,
    window: SimTime,
    domains: Vec<DomainRt>,
    broker: Broker,
    flows: Vec<FlowRt>,
    active: BTreeSet<usize>,
    blocked: BTreeSet<usize>,
    workloads: BTreeMap<String, WorkloadRt>,
    ledger: EnergyLedger,
    last_energy: SimTime,
    sla: SlaSummary,
    qos: QosSummary,
    capabilities: Vec<CapabilityRecord>,
    selections: Vec<SelectionRecord>,
    decompositions: Vec<crate::inter::DomainSla>,
    security: Vec<SecurityRecord>,
    placements: Vec<crate::intra::PlacementPlan>,
    scaling: Vec<ScaleRecord>,
    explanations: Vec<crate::cognition::Explanation>,
    drift_events: u64,
    warnings: Vec<String>,
    invariant_checks: u64,
}

fn at_component(domain: &str, at: &str) -> String {
    format!("at:{domain}/{at}")
}

fn node_component(domain: &str, node: &str) -> String {
    format!("node:{domain}/{node}")
}

/// ATs as decisions see them: sleeping ATs count as awake, since they are
/// woken on demand. `None` means nothing sleeps and the live set applies.
fn awake_view(m: &Matric) -> Option<Vec<AccessTech>> {
    if m.ats().all(AccessTech::is_active) {
        return None;
    }
    Some(
        m.ats()
            .cloned()
            .map(|mut a| {
                a.set_sleep(false).expect("waking never fails");
                a
            })
            .collect(),
    )
}

fn view_refs<'a>(m: &'a Matric, view: &'a Option<Vec<AccessTech>>) -> Vec<&'a AccessTech> {
    match view {
        Some(v) => v.iter().collect(),
        None => m.candidates(),
    }
}

impl Sim {
    fn fail(&self, t: SimTime, event: &str, reason: impl ToString) -> RunError {
        RunError::Event {
            t,
            event: event.to_string(),
            reason: reason.to_string(),
        }
    }

    fn new(sc: &Scenario) -> Result<(Self, Kernel<SimEvent>), RunError> {
        sc.validate()?;
        let t_end = SimTime::from_secs_f64(sc.duration_s);
        let mut broker = Broker::new();
        let mut domains = Vec::with_capacity(sc.domains.len());
        for d in &sc.domains {
            let mut m = Matric::new(&d.id, d.telemetry_capacity);
            m.weights = d.weights;
            m.mobility = d.mobility;
            for a in &d.ats {
                m.add_at(a.build(), SimTime::ZERO, &mut broker)
                    .map_err(|e| RunError::Event {
                        t: SimTime::ZERO,
                        event: "setup".into(),
                        reason: e.to_string(),
                    })?;
            }
            let mut intra = IntraOrchestrator::new(&d.id, d.nodes.iter().map(|n| n.build()).collect());
            intra.placement = d.placement;
            domains.push(DomainRt {
                unit_cost: d.unit_cost,
                matric: m,
                intra,
                handovers: 0,
            });
        }
        let capabilities: Vec<CapabilityRecord> = domains
            .iter()
            .map(|d| advertise_capabilities(d.matric.domain(), d.matric.ats(), d.unit_cost))
            .collect();

        let mut sim = Sim {
            sc: sc.clone(),
            t_end,
            window: SimTime(sc.timing.window_us),
            domains,
            broker,
            flows: Vec::new(),
            active: BTreeSet::new(),
            blocked: BTreeSet::new(),
            workloads: BTreeMap::new(),
            ledger: EnergyLedger::new(),
            last_energy: SimTime::ZERO,
            sla: SlaSummary::default(),
            qos: QosSummary::default(),
            capabilities,
            selections: Vec::new(),
            decompositions: Vec::new(),
            security: Vec::new(),
            placements: Vec::new(),
            scaling: Vec::new(),
            explanations: Vec::new(),
            drift_events: 0,
            warnings: Vec::new(),
            invariant_checks: 0,
        };
        sim.generate()?;
        sim.orchestrate()?;

        let mut kernel = Kernel::new(sc.seed);
        for (i, f) in sim.flows.iter().enumerate() {
            if f.active_since <= t_end {
                kernel.schedule(f.active_since, f.flow.id.clone(), SimEvent::Arrival(i))?;
            }
        }
        for (i, f) in sim.flows.iter().enumerate() {
            if let Some(dep) = f.departure.filter(|&d| d <= t_end) {
                kernel.schedule(dep, f.flow.id.clone(), SimEvent::Departure(i))?;
            }
        }
        let tick = SimTime(sc.timing.tick_us);
        if tick <= t_end {
            kernel.schedule(tick, "net", SimEvent::Tick)?;
        }
        Ok((sim, kernel))
    }

    fn generate(&mut self) -> Result<(), RunError> {
        for spec in &self.sc.workloads {
            let mut rng = RngStream::derive(self.sc.seed, &format!("workload.{}", spec.id));
            let g = generate(spec, &mut rng).map_err(|source| RunError::Workload {
                workload: spec.id.clone(),
                source,
            })?;
            self.warnings.extend(g.warnings);
            if let Some(risk) = spec.risk {
                self.security.push(SecurityRecord {
                    workload: spec.id.clone(),
                    plan: select_controls(risk),
                });
            }
            self.workloads.insert(
                spec.id.clone(),
                WorkloadRt {
                    domain: None,
                    service: spec.service.clone(),
                    kpi: g.flows.first().map(|f| f.kpi.clone()),
                    active: 0,
                    deployed: false,
                },
            );
            for tpl in g.flows {
                let mut flow = Flow::new(&tpl.id, &tpl.ue, &tpl.zone, tpl.demand_bps(), tpl.kpi.clone());
                flow.attached_at = tpl.arrival;
                let departure = tpl.holding.map(|h| tpl.arrival + h).filter(|&d| d > tpl.arrival);
                self.broker
                    .advertise(PipelineAd {
                        topic: sla_topic(&tpl.id),
                        producer: "orch".into(),
                        schema: Unit::Bool,
                    })
                    .map_err(|e| self.fail(SimTime::ZERO, "setup", e))?;
                self.flows.push(FlowRt {
                    rng: RngStream::derive(self.sc.seed, &format!("flow.{}", tpl.id)),
                    sla: E2eSla::new(&tpl.id, tpl.kpi.clone()),
                    flow,
                    workload: tpl.workload.clone(),
                    domain: None,
                    transit_us: 0,
                    status: Status::Pending,
                    buffer: SampleBuffer::default(),
                    active_since: tpl.arrival,
                    last_sample: tpl.arrival,
                    worst: Vec::new(),
                    violated_windows: 0,
                    ever_blocked: false,
                    departure,
                    reference: None,
                    handovers: 0,
                });
            }
        }
        Ok(())
    }

    /// Groups intents into requests, selects a domain path per request and
    /// decomposes every member flow's SLA along it.
    fn orchestrate(&mut self) -> Result<(), RunError> {
        let intents: Vec<_> = self.sc.workloads.iter().map(|w| w.intent()).collect();
        for (r, req) in compose_requests(&intents).into_iter().enumerate() {
            let members: Vec<String> = req.members.iter().map(|&i| self.sc.workloads[i].id.clone()).collect();
            let flow_idx: Vec<usize> = (0..self.flows.len())
                .filter(|&i| members.contains(&self.flows[i].workload))
                .collect();
            let request = format!("r{r}");
            let Some(envelope) = envelope(flow_idx.iter().map(|&i| &self.flows[i].flow.kpi)) else {
                continue;
            };
            let destination = req
                .members
                .iter()
                .find_map(|&i| self.sc.workloads[i].destination.clone());
            let sel = select_domains(
                &req.as_intent(),
                &envelope,
                destination.as_deref(),
                &self.capabilities,
                &self.sc.policies,
            );
            let sel = match sel {
                Ok(s) => s,
                Err(e) => {
                    self.selections.push(SelectionRecord {
                        request,
                        workloads: members,
                        path: None,
                        cost: None,
                        error: Some(e.to_string()),
                    });
                    continue;
                }
            };
            if self.sc.toggles.explain {
                if let Ok(e) = explain_domain_selection(&format!("select_domains {request}"), &sel) {
                    self.explanations.push(e);
                }
            }
            let domain = self
                .domains
                .iter()
                .position(|d| d.matric.domain() == sel.path[0])
                .expect("selected domain exists");
            let transit: u64 = self
                .capabilities
                .iter()
                .filter(|c| sel.path[1..].contains(&c.domain))
                .map(|c| c.min_latency_us)
                .sum();
            for w in &members {
                if let Some(wl) = self.workloads.get_mut(w) {
                    wl.domain = Some(domain);
                }
            }
            for &i in &flow_idx {
                let f = &mut self.flows[i];
                f.sla.activate(sel.path.clone()).expect("non-empty path");
                match decompose_sla(&f.sla, &self.capabilities) {
                    Ok(parts) => {
                        self.decompositions.extend(parts);
                        f.domain = Some(domain);
                        f.transit_us = transit;
                    }
                    Err(e) => self.warnings.push(format!("{}: {e}", f.flow.id)),
                }
            }
            self.selections.push(SelectionRecord {
                request,
                workloads: members,
                path: Some(sel.path.clone()),
                cost: Some(sel.cost),
                error: None,
            });
        }
        Ok(())
    }

    /// Charges every AT and compute node for `[last_energy, now)` at its
    /// current power.
    fn advance_energy(&mut self, now: SimTime) -> Result<(), RunError> {
        if now <= self.last_energy {
            return Ok(());
        }
        let t0 = self.last_energy;
        for d in &self.domains {
            let dom = d.matric.domain();
            for at in d.matric.ats() {
                self.ledger
                    .add_interval(&at_component(dom, &at.id), t0, now, at.power_w())
                    .map_err(|e| RunError::Event {
                        t: now,
                        event: "energy".into(),
                        reason: e.to_string(),
                    })?;
            }
            for n in d.intra.nodes() {
                self.ledger
                    .add_interval(&node_component(dom, &n.id), t0, now, n.power_w())
                    .map_err(|e| RunError::Event {
                        t: now,
                        event: "energy".into(),
                        reason: e.to_string(),
                    })?;
            }
        }
        self.last_energy = now;
        Ok(())
    }

    fn handle(&mut self, k: &mut Kernel<SimEvent>, ev: SimEvent, now: SimTime) -> Result<(), RunError> {
        self.advance_energy(now)?;
        match ev {
            SimEvent::Arrival(i) => self.on_arrival(i, now)?,
            SimEvent::Departure(i) => self.on_departure(i, now)?,
            SimEvent::Tick => {
                self.on_tick(now)?;
                if now.0.is_multiple_of(self.window.0) {
                    k.schedule(now, "net", SimEvent::Monitor)?;
                }
                let next = now + SimTime(self.sc.timing.tick_us);
                if next <= self.t_end {
                    k.schedule(next, "net", SimEvent::Tick)?;
                }
            }
            SimEvent::Monitor => self.on_monitor(now)?,
        }
        self.check_invariants();
        Ok(())
    }

    fn check_invariants(&mut self) {
        for d in &self.domains {
            for at in d.matric.ats() {
                assert!(at.capacity_conserved(), "capacity invariant broken on {}", at.id);
            }
            assert!(d.intra.conserved(), "compute invariant broken in {}", d.matric.domain());
        }
        for &i in &self.active {
            let n = self.flows[i].flow.attachments.len();
            assert!((1..=2).contains(&n), "flow {} has {n} attachments", self.flows[i].flow.id);
        }
        self.invariant_checks += 1;
    }

    /// Attaches flow `i` in its access domain. Returns false when no AT
    /// combination can carry it.
    fn admit(&mut self, i: usize, now: SimTime) -> Result<bool, RunError> {
        let Some(d) = self.flows[i].domain else {
            return Ok(false);
        };
        let explain = self.sc.toggles.explain;
        let dom = &mut self.domains[d];
        let view = awake_view(&dom.matric);
        let refs = view_refs(&dom.matric, &view);
        let f = &mut self.flows[i];
        let plan: AttachmentPlan = match select_at(&f.flow, &refs, &dom.matric.weights) {
            Ok(p) => p,
            Err(MatricError::NoFeasibleAt(_)) => return Ok(false),
            Err(e) => return Err(self.fail(now, "admit", e)),
        };
        if explain {
            let primary = &plan.branches[0].at_id;
            let at = refs.iter().find(|a| &a.id == primary).expect("planned AT");
            if let Ok(terms) = score_terms(at, &f.flow, max_p_max(refs.iter().copied())) {
                self.explanations.push(explain_at_score(
                    &format!("select_at {} -> {primary}", f.flow.id),
                    &terms,
                    &dom.matric.weights,
                ));
            }
        }
        drop(refs);
        for b in &plan.branches {
            let at = dom.matric.at_mut(&b.at_id).map_err(|e| RunError::Event {
                t: now,
                event: "admit".into(),
                reason: e.to_string(),
            })?;
            if !at.is_active() {
                at.set_sleep(false).expect("waking never fails");
            }
        }
        dom.matric.attach(&mut f.flow, &plan, now).map_err(|e| RunError::Event {
            t: now,
            event: "admit".into(),
            reason: e.to_string(),
        })?;
        f.status = Status::Active;
        f.active_since = now;
        f.last_sample = now;
        f.buffer.clear();
        self.active.insert(i);
        self.blocked.remove(&i);
        let wl_id = f.workload.clone();
        self.workload_up(&wl_id, now)?;
        Ok(true)
    }

    fn workload_up(&mut self, id: &str, now: SimTime) -> Result<(), RunError> {
        let wl = self.workloads.get_mut(id).expect("known workload");
        wl.active += 1;
        if wl.deployed || wl.service.is_empty() {
            return Ok(());
        }
        let (Some(d), Some(kpi)) = (wl.domain, wl.kpi.clone()) else {
            return Ok(());
        };
        let chain = ServiceChain {
            id: format!("chain.{id}"),
            functions: wl.service.clone(),
            kpi,
        };
        match self.domains[d].intra.deploy(chain) {
            Ok(plan) => {
                wl.deployed = true;
                self.placements.push(plan);
            }
            Err(e) => self.warnings.push(format!("t={now} {id}: {e}")),
        }
        Ok(())
    }

    fn workload_down(&mut self, id: &str) -> Result<(), RunError> {
        let wl = self.workloads.get_mut(id).expect("known workload");
        wl.active -= 1;
        if wl.active == 0 && wl.deployed {
            wl.deployed = false;
            let d = wl.domain.expect("deployed implies domain");
            self.domains[d]
                .intra
                .undeploy(&format!("chain.{id}"))
                .map_err(|e| RunError::Event {
                    t: SimTime::ZERO,
                    event: "undeploy".into(),
                    reason: e.to_string(),
                })?;
        }
        Ok(())
    }

    fn block(&mut self, i: usize, now: SimTime) {
        let f = &mut self.flows[i];
        f.status = Status::Blocked;
        f.ever_blocked = true;
        self.blocked.insert(i);
        if f.domain.is_some() && self.sla.saturation_s.is_none() {
            self.sla.saturation_s = Some(now.as_secs_f64());
        }
    }

    fn on_arrival(&mut self, i: usize, now: SimTime) -> Result<(), RunError> {
        if !self.admit(i, now)? {
            self.block(i, now);
        }
        Ok(())
    }

    fn on_departure(&mut self, i: usize, now: SimTime) -> Result<(), RunError> {
        let status = self.flows[i].status;
        if status == Status::Active {
            let f = &mut self.flows[i];
            let d = f.domain.expect("active implies domain");
            self.domains[d]
                .matric
                .detach(&mut f.flow)
                .map_err(|e| RunError::Event {
                    t: now,
                    event: "departure".into(),
                    reason: e.to_string(),
                })?;
            self.active.remove(&i);
            let wl = f.workload.clone();
            self.workload_down(&wl)?;
        }
        self.blocked.remove(&i);
        let f = &mut self.flows[i];
        f.status = Status::Departed;
        if f.sla.state != SlaState::Violated {
            f.sla.state = SlaState::Terminated;
        }
        Ok(())
    }

    fn sample(&mut self, i: usize, now: SimTime) -> Result<(), RunError> {
        let f = &mut self.flows[i];
        let start = f.last_sample.max(f.active_since);
        if now <= start {
            return Ok(());
        }
        let d = f.domain.expect("active implies domain");
        let m = &self.domains[d].matric;
        let mut latency = 0u64;
        let mut lost = false;
        let mut bits = 0u64;
        for b in &f.flow.attachments {
            let at = m.at(&b.at_id).map_err(|e| RunError::Event {
                t: now,
                event: "tick".into(),
                reason: e.to_string(),
            })?;
            let load = at.load_fraction().min(1.0 - 1e-9);
            let lat = at.sample_latency(load, &mut f.rng).map_err(|e| RunError::Event {
                t: now,
                event: "tick".into(),
                reason: e.to_string(),
            })?;
            let branch_lost = at.sample_loss(&mut f.rng);
            latency = latency.max(lat);
            lost |= branch_lost;
            if !branch_lost {
                // Difference of floors against absolute time, so whole
                // seconds always carry exactly the allocated rate.
                let a = b.allocated_bps as u128;
                bits += (a * now.0 as u128 / 1_000_000 - a * start.0 as u128 / 1_000_000) as u64;
            }
        }
        f.buffer.push(
            LinkSample {
                t: now,
                latency_us: latency + f.transit_us,
                delivered_bits: bits,
                lost,
            },
            self.window,
        );
        f.last_sample = now;
        self.ledger.add_bits(bits);
        Ok(())
    }

    fn handover(&mut self, i: usize, now: SimTime) -> Result<bool, RunError> {
        self.handover_cached(i, now, &mut None)
    }

    /// Evaluates and executes a handover for flow `i`. `cache` holds the
    /// domain's awake view between calls and is cleared when a handover
    /// changes AT state.
    fn handover_cached(
        &mut self,
        i: usize,
        now: SimTime,
        cache: &mut Option<Option<Vec<AccessTech>>>,
    ) -> Result<bool, RunError> {
        let d = self.flows[i].domain.expect("active implies domain");
        let dom = &mut self.domains[d];
        // Stay is certain before the dwell time has elapsed.
        if now.saturating_sub(self.flows[i].flow.attached_at) < dom.matric.mobility.min_dwell {
            return Ok(false);
        }
        let view = cache.get_or_insert_with(|| awake_view(&dom.matric));
        let refs = view_refs(&dom.matric, view);
        let decision = evaluate_handover(
            &self.flows[i].flow,
            &refs,
            &dom.matric.mobility,
            &dom.matric.weights,
            now,
        );
        drop(refs);
        let HandoverDecision::Handover { target } = decision else {
            return Ok(false);
        };
        *cache = None;
        let err = |e: MatricError| RunError::Event {
            t: now,
            event: "handover".into(),
            reason: e.to_string(),
        };
        let at = dom.matric.at_mut(&target).map_err(err)?;
        if !at.is_active() {
            at.set_sleep(false).expect("waking never fails");
        }
        dom.matric
            .execute_handover(&mut self.flows[i].flow, &target, now)
            .map_err(err)?;
        dom.handovers += 1;
        self.flows[i].handovers += 1;
        Ok(true)
    }

    fn on_tick(&mut self, now: SimTime) -> Result<(), RunError> {
        let active: Vec<usize> = self.active.iter().copied().collect();
        for &i in &active {
            self.sample(i, now)?;
        }
        let mut views: Vec<Option<Option<Vec<AccessTech>>>> = vec![None; self.domains.len()];
        for &i in &active {
            if self.flows[i].flow.attachments.len() == 1 {
                let d = self.flows[i].domain.expect("active implies domain");
                let mut cache = views[d].take();
                self.handover_cached(i, now, &mut cache)?;
                views[d] = cache;
            }
        }
        if self.sc.toggles.sleep_policy {
            for d in &mut self.domains {
                for at in d.matric.ats_mut() {
                    if at.is_active() && at.committed_bps() == 0 {
                        at.set_sleep(true).expect("idle AT can sleep");
                    }
                }
            }
        }
        Ok(())
    }

    fn record(&mut self, i: usize, report: &ComplianceReport, now: SimTime) -> Result<(), RunError> {
        let f = &mut self.flows[i];
        for c in &report.checks {
            match f.worst.iter_mut().find(|r| r.kpi == c.kpi) {
                Some(r) => {
                    let higher_is_worse = c.kpi.starts_with("latency") || c.kpi == "jitter";
                    if (higher_is_worse && c.measured > r.measured)
                        || (!higher_is_worse && c.measured < r.measured)
                    {
                        r.measured = c.measured;
                    }
                    r.pass &= c.pass;
                }
                None => f.worst.push(ComplianceRow {
                    sla_id: report.sla_id.clone(),
                    kpi: c.kpi.clone(),
                    measured: c.measured,
                    bound: c.bound,
                    pass: c.pass,
                }),
            }
        }
        if report.compliant() {
            return Ok(());
        }
        f.sla.state = SlaState::Violated;
        f.violated_windows += 1;
        self.sla.violation_windows += 1;
        let t = now.as_secs_f64();
        self.sla.first_violation_s.get_or_insert(t);
        for c in report.failures() {
            *self.sla.violations_by_kpi.entry(c.kpi.clone()).or_default() += 1;
            if c.kpi == "throughput" {
                self.sla.first_throughput_violation_s.get_or_insert(t);
            }
        }
        self.broker
            .publish(MetricSample {
                t: now,
                topic: sla_topic(&report.sla_id),
                value: 1.0,
                unit: Unit::Bool,
            })
            .map_err(|e| RunError::Event {
                t: now,
                event: "monitor".into(),
                reason: e.to_string(),
            })?;
        Ok(())
    }

    fn evaluate_active(&mut self, i: usize, now: SimTime) -> Result<(), RunError> {
        let f = &self.flows[i];
        let window = f.buffer.window(&f.flow.id, now, self.window);
        if window.is_empty() {
            return Ok(());
        }
        let err = |e: String| RunError::Event {
            t: now,
            event: "monitor".into(),
            reason: e,
        };
        let values = KpiValues::measure(&window, &f.flow.kpi).map_err(|e| err(e.to_string()))?;
        let report = evaluate_sla(&f.flow.id, &f.flow.kpi, &values).map_err(|e| err(e.to_string()))?;

        let latencies: Vec<f64> = window.samples.iter().map(|s| s.latency_us as f64).collect();
        match &self.flows[i].reference {
            None => self.flows[i].reference = Some(latencies),
            Some(r) => {
                if detect_drift(r, &latencies, DEFAULT_DRIFT_K)
                    .map_err(|e| err(e.to_string()))?
                    .drifted
                {
                    self.drift_events += 1;
                }
            }
        }

        self.record(i, &report, now)?;
        if report.compliant() {
            return Ok(());
        }
        let d = self.flows[i].domain.expect("active implies domain");
        let actions = {
            let m = &self.domains[d].matric;
            let view = awake_view(m);
            let refs = view_refs(m, &view);
            crate::matric::enforce_qos(&self.flows[i].flow, &window, &refs).map_err(|e| err(e.to_string()))?
        };
        for a in actions {
            match a {
                QosAction::IncreaseShare { at, extra_bps } => {
                    self.domains[d]
                        .matric
                        .increase_share(&mut self.flows[i].flow, &at, extra_bps)
                        .map_err(|e| err(e.to_string()))?;
                    self.qos.increase_share += 1;
                }
                QosAction::RequestHandover => {
                    self.qos.handover_requests += 1;
                    self.handover(i, now)?;
                }
                QosAction::Escalate { .. } => self.qos.escalations += 1,
            }
        }
        Ok(())
    }

    fn evaluate_blocked(&mut self, i: usize, now: SimTime) -> Result<(), RunError> {
        let f = &self.flows[i];
        let values = KpiValues {
            latency_us: Some(f64::INFINITY),
            jitter_us: Some(f64::INFINITY),
            throughput_bps: Some(0.0),
            reliability: Some(0.0),
        };
        let report = evaluate_sla(&f.flow.id, &f.flow.kpi, &values).map_err(|e| RunError::Event {
            t: now,
            event: "monitor".into(),
            reason: e.to_string(),
        })?;
        self.record(i, &report, now)
    }

    fn on_monitor(&mut self, now: SimTime) -> Result<(), RunError> {
        for d in 0..self.domains.len() {
            let ids: Vec<String> = self.domains[d].matric.ats().map(|a| a.id.clone()).collect();
            for id in ids {
                self.domains[d]
                    .matric
                    .collect_metrics(&id, now, &mut self.broker)
                    .map_err(|e| RunError::Event {
                        t: now,
                        event: "monitor".into(),
                        reason: e.to_string(),
                    })?;
            }
        }
        let blocked: Vec<usize> = self.blocked.iter().copied().collect();
        for i in blocked {
            if self.admit(i, now)? {
                self.qos.readmissions += 1;
            } else {
                self.evaluate_blocked(i, now)?;
            }
        }
        let active: Vec<usize> = self.active.iter().copied().collect();
        for i in active {
            if now.saturating_sub(self.flows[i].active_since) >= self.window {
                self.evaluate_active(i, now)?;
            }
        }
        self.autoscale(now)
    }

    /// Feeds each deployed chain a usage sample proportional to the share
    /// of its workload's flows that are active, then lets the domain
    /// orchestrator scale it.
    fn autoscale(&mut self, now: SimTime) -> Result<(), RunError> {
        let mut totals: BTreeMap<&str, usize> = BTreeMap::new();
        for f in &self.flows {
            *totals.entry(f.workload.as_str()).or_default() += 1;
        }
        for (id, wl) in &self.workloads {
            if !wl.deployed {
                continue;
            }
            let d = wl.domain.expect("deployed implies domain");
            let chain = format!("chain.{id}");
            let intra = &mut self.domains[d].intra;
            let Some(dep) = intra.deployment(&chain) else {
                continue;
            };
            let share = wl.active as f64 / totals.get(id.as_str()).copied().unwrap_or(1).max(1) as f64;
            let base: u32 = wl.service.iter().map(|f| f.cpu_units).sum();
            let mem: u64 = wl.service.iter().map(|f| f.mem_mb).sum();
            let egress: u64 = dep.chain.functions.iter().map(|f| f.egress_bps).sum();
            let usage = Usage {
                cpu_units: base as f64 * share,
                mem_mb: mem as f64 * share,
                egress_bps: egress as f64 * share,
            };
            let err = |e: crate::intra::IntraError| RunError::Event {
                t: now,
                event: "autoscale".into(),
                reason: e.to_string(),
            };
            intra.observe(&chain, usage).map_err(err)?;
            for action in intra.autoscale(&chain).map_err(err)? {
                self.scaling.push(ScaleRecord {
                    t_s: now.as_secs_f64(),
                    chain: chain.clone(),
                    action,
                });
            }
        }
        Ok(())
    }

    fn finish(mut self, kernel: &Kernel<SimEvent>) -> Result<RunReport, RunError> {
        self.advance_energy(self.t_end)?;
        let mut order: Vec<usize> = (0..self.flows.len()).collect();
        order.sort_by(|&a, &b| self.flows[a].flow.id.cmp(&self.flows[b].flow.id));
        let mut rows = Vec::new();
        for &i in &order {
            rows.extend(self.flows[i].worst.iter().cloned());
        }
        self.sla.total = self.flows.len();
        self.sla.evaluated = self.flows.iter().filter(|f| !f.worst.is_empty()).count();
        self.sla.violated = self.flows.iter().filter(|f| f.violated_windows > 0).count();
        self.sla.blocked_flows = self.flows.iter().filter(|f| f.ever_blocked).count();
        let handovers = self
            .domains
            .iter()
            .map(|d| (d.matric.domain().to_string(), d.handovers))
            .collect();
        let components: BTreeMap<String, f64> =
            self.ledger.components().map(|(c, j)| (c.to_string(), j)).collect();
        let trace = kernel.trace();
        Ok(RunReport {
            scenario: self.sc.name.clone(),
            seed: self.sc.seed,
            duration_s: self.sc.duration_s,
            flows: self.flows.len(),
            max_handovers_per_flow: self.flows.iter().map(|f| f.handovers).max().unwrap_or(0),
            sla: self.sla,
            qos: self.qos,
            handovers,
            energy: EnergySummary {
                total_joules: self.ledger.total_joules(),
                delivered_bits: self.ledger.delivered_bits(),
                efficiency_bit_per_joule: self.ledger.efficiency(),
                components,
            },
            capabilities: self.capabilities,
            selections: self.selections,
            decompositions: self.decompositions,
            security: self.security,
            placements: self.placements,
            scaling: self.scaling,
            drift_events: self.drift_events,
            warnings: self.warnings,
            explanations: self.explanations,
            events: trace.len(),
            invariant_checks: self.invariant_checks,
            trace_digest: trace.digest(),
            rows,
            trace_text: trace.to_text(),
        })
    }
}

/// Strictest requirement across a set of flows: the tightest latency and
/// reliability and the largest per-flow throughput. Used to pick a domain
/// path that can carry every member flow.
fn envelope<'a>(kpis: impl IntoIterator<Item = &'a KpiRequirementSet>) -> Option<KpiRequirementSet> {
    kpis.into_iter().fold(None, |acc: Option<KpiRequirementSet>, k| {
        Some(match acc {
            None => k.clone(),
            Some(mut e) => {
                e.latency_bound_us = e.latency_bound_us.min(k.latency_bound_us);
                e.throughput_dl_bps = e.throughput_dl_bps.max(k.throughput_dl_bps);
                e.throughput_ul_bps = e.throughput_ul_bps.max(k.throughput_ul_bps);
                e.reliability_min = e.reliability_min.max(k.reliability_min);
                e
            }
        })
    })
}

/// Runs a validated scenario to its duration.
pub fn run(sc: &Scenario) -> Result<RunReport, RunError> {
    let (mut sim, mut kernel) = Sim::new(sc)?;
    let t_end = sim.t_end;
    kernel.run_until_with(t_end, |k, ev| sim.handle(k, ev.payload, ev.at))?;
    sim.finish(&kernel)
}
