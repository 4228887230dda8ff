//! Use-case workload generators: intents, per-user flows and arrivals.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::intra::ServiceFunction;
use crate::inter::{
    translate_intent, InterError, InteractionClass, KpiRequirementSet, RiskLevel, TaskIntent,
    UseCaseKind, GBPS, KBPS, MBPS,
};
use crate::kernel::SimTime;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorkloadError {
    #[error("generator for {expected} given a {got} spec")]
    KindMismatch { expected: UseCaseKind, got: UseCaseKind },
    #[error("invalid workload: {0}")]
    Invalid(String),
    #[error(transparent)]
    Inter(#[from] InterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Arrival {
    AllAtStart,
    Poisson { rate: f64 },
}

fn default_arrival() -> Arrival {
    Arrival::AllAtStart
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UseCaseSpec {
    pub id: String,
    pub kind: UseCaseKind,
    pub user_count: u32,
    pub area_m2: f64,
    pub zone: String,
    /// Active window of the workload; arrivals past it are dropped.
    pub duration_s: f64,
    #[serde(default = "default_arrival")]
    pub arrival: Arrival,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction_class: Option<InteractionClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kpi_override: Option<KpiRequirementSet>,
    /// Mean of an exponential holding time; flows stay to the end if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holding_s: Option<f64>,
    /// Zone the traffic must reach, forcing a transit domain if needed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destination: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<RiskLevel>,
    /// Service chain deployed in the access domain while the workload runs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub service: Vec<ServiceFunction>,
}

impl UseCaseSpec {
    pub fn intent(&self) -> TaskIntent {
        TaskIntent {
            kind: self.kind,
            user_count: self.user_count,
            area_m2: self.area_m2,
            zone: self.zone.clone(),
            interaction_class: self.interaction_class,
        }
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        self.intent().validate()?;
        if !(self.duration_s > 0.0) {
            return Err(WorkloadError::Invalid(format!("{}: duration_s must be positive", self.id)));
        }
        if let Arrival::Poisson { rate } = self.arrival {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(WorkloadError::Invalid(format!("{}: poisson rate must be positive", self.id)));
            }
        }
        if self.holding_s.is_some_and(|h| !(h > 0.0)) {
            return Err(WorkloadError::Invalid(format!("{}: holding_s must be positive", self.id)));
        }
        if let Some(k) = &self.kpi_override {
            k.validate()?;
        }
        if self.interaction_class.is_some() && self.kind != UseCaseKind::VirtualProduction {
            return Err(WorkloadError::Invalid(format!(
                "{}: interaction_class applies to virtual_production only",
                self.id
            )));
        }
        Ok(())
    }

    /// Consistency warnings against the use case's own density and areal
    /// capacity figures. Never fatal.
    pub fn warnings(&self, per_user_bps: f64) -> Vec<String> {
        let mut out = Vec::new();
        let density = self.user_count as f64 / self.area_m2;
        // (min, max) users per m², max areal capacity in bps per m².
        let limits = match self.kind {
            UseCaseKind::Metaverse => Some(((10.0, 100.0), 100e12 / 1e6)),
            UseCaseKind::DigitalTwin => Some(((1.0, 100.0), 100e9 / 1e6)),
            _ => None,
        };
        if let Some(((lo, hi), areal_max)) = limits {
            if density < lo || density > hi {
                out.push(format!(
                    "{}: density {density:.3}/m² outside [{lo}, {hi}] for {}",
                    self.id, self.kind
                ));
            }
            let areal = density * per_user_bps;
            if areal > areal_max {
                out.push(format!(
                    "{}: areal load {:.3e} bps/m² exceeds the use case's capacity of {:.3e} bps/m²",
                    self.id, areal, areal_max
                ));
            }
        }
        out
    }
}

/// One flow to be offered to the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTemplate {
    pub id: String,
    pub workload: String,
    pub ue: String,
    pub zone: String,
    pub kpi: KpiRequirementSet,
    pub arrival: SimTime,
    pub holding: Option<SimTime>,
}

impl FlowTemplate {
    pub fn demand_bps(&self) -> u64 {
        self.kpi.throughput_dl_bps
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub intent: TaskIntent,
    pub flows: Vec<FlowTemplate>,
    pub warnings: Vec<String>,
}

fn check_kind(spec: &UseCaseSpec, expected: UseCaseKind) -> Result<(), WorkloadError> {
    if spec.kind != expected {
        return Err(WorkloadError::KindMismatch {
            expected,
            got: spec.kind,
        });
    }
    spec.validate()
}

/// Per-user arrival instants; Poisson arrivals past the workload's
/// duration are dropped.
pub fn arrival_times<R: Rng + ?Sized>(spec: &UseCaseSpec, rng: &mut R) -> Vec<SimTime> {
    match spec.arrival {
        Arrival::AllAtStart => vec![SimTime::ZERO; spec.user_count as usize],
        Arrival::Poisson { rate } => {
            let exp = Exp::new(rate).expect("validated rate");
            let end = SimTime::from_secs_f64(spec.duration_s);
            let mut t = 0.0;
            let mut out = Vec::with_capacity(spec.user_count as usize);
            for _ in 0..spec.user_count {
                t += exp.sample(rng);
                let at = SimTime::from_secs_f64(t);
                if at >= end {
                    break;
                }
                out.push(at);
            }
            out
        }
    }
}

fn holding<R: Rng + ?Sized>(spec: &UseCaseSpec, rng: &mut R) -> Option<SimTime> {
    spec.holding_s.map(|mean| {
        let exp = Exp::new(1.0 / mean).expect("validated holding");
        SimTime::from_secs_f64(exp.sample(rng)).max(SimTime(1))
    })
}

fn uniform_bps<R: Rng + ?Sized>(rng: &mut R, lo: u64, hi: u64) -> u64 {
    rng.random_range(lo..=hi)
}

fn base_kpi(spec: &UseCaseSpec) -> Result<KpiRequirementSet, WorkloadError> {
    Ok(translate_intent(&spec.intent())?)
}

/// Users draw symmetric throughput uniformly from 5 to 100 Gbps unless the
/// spec overrides the KPI set.
pub fn gen_metaverse<R: Rng + ?Sized>(spec: &UseCaseSpec, rng: &mut R) -> Result<Generated, WorkloadError> {
    check_kind(spec, UseCaseKind::Metaverse)?;
    let preset = base_kpi(spec)?;
    let arrivals = arrival_times(spec, rng);
    let mut flows = Vec::with_capacity(arrivals.len());
    for (u, at) in arrivals.into_iter().enumerate() {
        let kpi = match &spec.kpi_override {
            Some(k) => k.clone(),
            None => {
                let r = uniform_bps(rng, 5 * GBPS, 100 * GBPS);
                preset.clone().with_throughput(r, r)
            }
        };
        flows.push(FlowTemplate {
            id: format!("{}.u{u}", spec.id),
            workload: spec.id.clone(),
            ue: format!("{}.u{u}", spec.id),
            zone: spec.zone.clone(),
            kpi,
            arrival: at,
            holding: holding(spec, rng),
        });
    }
    let mean = flows.iter().map(|f| f.demand_bps() as f64).sum::<f64>() / flows.len().max(1) as f64;
    Ok(Generated {
        intent: spec.intent(),
        warnings: spec.warnings(mean),
        flows,
    })
}

pub const ANCILLARY_BPS: u64 = 64 * KBPS;
pub const EDGE_LEG_BPS: u64 = 10 * GBPS;
/// Strict "< 50 ms" and "< 10 ms" for the edge/cloud leg.
pub const EDGE_LEG_LATENCY_US: u64 = 49_999;
pub const EDGE_LEG_JITTER_US: u64 = 9_999;

/// Each participant sends a UHD video stream (20–50 Mbps), an audio stream
/// (0.048–3 Mbps) and a 64 kbps ancillary stream; the session adds one
/// 10 Gbps edge/cloud leg.
pub fn gen_virtual_production<R: Rng + ?Sized>(
    spec: &UseCaseSpec,
    rng: &mut R,
) -> Result<Generated, WorkloadError> {
    check_kind(spec, UseCaseKind::VirtualProduction)?;
    let preset = match &spec.kpi_override {
        Some(k) => k.clone(),
        None => base_kpi(spec)?,
    };
    let arrivals = arrival_times(spec, rng);
    let mut flows = Vec::with_capacity(arrivals.len() * 3 + 1);
    for (u, at) in arrivals.iter().enumerate() {
        let uhd = uniform_bps(rng, 20 * MBPS, 50 * MBPS);
        let audio = uniform_bps(rng, 48 * KBPS, 3 * MBPS);
        let hold = holding(spec, rng);
        for (stream, rate) in [("uhd", uhd), ("audio", audio), ("anc", ANCILLARY_BPS)] {
            flows.push(FlowTemplate {
                id: format!("{}.u{u}.{stream}", spec.id),
                workload: spec.id.clone(),
                ue: format!("{}.u{u}", spec.id),
                zone: spec.zone.clone(),
                kpi: preset.clone().with_throughput(rate, rate),
                arrival: *at,
                holding: hold,
            });
        }
    }
    if let Some(first) = arrivals.first() {
        let mut edge = preset.clone().with_throughput(EDGE_LEG_BPS, EDGE_LEG_BPS);
        edge.latency_bound_us = EDGE_LEG_LATENCY_US;
        edge.jitter_bound_us = Some(EDGE_LEG_JITTER_US);
        flows.push(FlowTemplate {
            id: format!("{}.edge", spec.id),
            workload: spec.id.clone(),
            ue: format!("{}.edge", spec.id),
            zone: spec.zone.clone(),
            kpi: edge,
            arrival: *first,
            holding: None,
        });
    }
    Ok(Generated {
        intent: spec.intent(),
        warnings: Vec::new(),
        flows,
    })
}

/// Downlink 0.1–10 Gbps and uplink 0.05–5 Gbps per user.
pub fn gen_digital_twin<R: Rng + ?Sized>(spec: &UseCaseSpec, rng: &mut R) -> Result<Generated, WorkloadError> {
    check_kind(spec, UseCaseKind::DigitalTwin)?;
    let preset = base_kpi(spec)?;
    let arrivals = arrival_times(spec, rng);
    let mut flows = Vec::with_capacity(arrivals.len());
    for (u, at) in arrivals.into_iter().enumerate() {
        let kpi = match &spec.kpi_override {
            Some(k) => k.clone(),
            None => {
                let dl = uniform_bps(rng, 100 * MBPS, 10 * GBPS);
                let ul = uniform_bps(rng, 50 * MBPS, 5 * GBPS);
                preset.clone().with_throughput(dl, ul)
            }
        };
        flows.push(FlowTemplate {
            id: format!("{}.u{u}", spec.id),
            workload: spec.id.clone(),
            ue: format!("{}.u{u}", spec.id),
            zone: spec.zone.clone(),
            kpi,
            arrival: at,
            holding: holding(spec, rng),
        });
    }
    let mean = flows.iter().map(|f| f.demand_bps() as f64).sum::<f64>() / flows.len().max(1) as f64;
    Ok(Generated {
        intent: spec.intent(),
        warnings: spec.warnings(mean),
        flows,
    })
}

/// Factory twins stream at their 1 Gbps preset with centimetre
/// positioning; robots need at most 1 Mbps with sub-centimetre
/// positioning under a strict 20 ms bound.
pub fn gen_factory<R: Rng + ?Sized>(spec: &UseCaseSpec, rng: &mut R) -> Result<Generated, WorkloadError> {
    if !matches!(spec.kind, UseCaseKind::FactoryDt | UseCaseKind::FactoryRobotics) {
        return Err(WorkloadError::KindMismatch {
            expected: UseCaseKind::FactoryDt,
            got: spec.kind,
        });
    }
    spec.validate()?;
    let kpi = match &spec.kpi_override {
        Some(k) => k.clone(),
        None => base_kpi(spec)?,
    };
    let flows = arrival_times(spec, rng)
        .into_iter()
        .enumerate()
        .map(|(u, at)| FlowTemplate {
            id: format!("{}.u{u}", spec.id),
            workload: spec.id.clone(),
            ue: format!("{}.u{u}", spec.id),
            zone: spec.zone.clone(),
            kpi: kpi.clone(),
            arrival: at,
            holding: holding(spec, rng),
        })
        .collect();
    Ok(Generated {
        intent: spec.intent(),
        warnings: Vec::new(),
        flows,
    })
}

pub fn generate<R: Rng + ?Sized>(spec: &UseCaseSpec, rng: &mut R) -> Result<Generated, WorkloadError> {
    match spec.kind {
        UseCaseKind::Metaverse => gen_metaverse(spec, rng),
        UseCaseKind::VirtualProduction => gen_virtual_production(spec, rng),
        UseCaseKind::DigitalTwin => gen_digital_twin(spec, rng),
        UseCaseKind::FactoryDt | UseCaseKind::FactoryRobotics => gen_factory(spec, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::RngStream;

    fn spec(kind: UseCaseKind, users: u32) -> UseCaseSpec {
        UseCaseSpec {
            id: "w".into(),
            kind,
            user_count: users,
            area_m2: 1.0,
            zone: "z".into(),
            duration_s: 60.0,
            arrival: Arrival::AllAtStart,
            interaction_class: None,
            kpi_override: None,
            holding_s: None,
            destination: None,
            risk: None,
            service: Vec::new(),
        }
    }

    fn rng() -> RngStream {
        RngStream::derive(7, "workload")
    }

    #[test]
    fn metaverse_rates_in_range() {
        let g = gen_metaverse(&spec(UseCaseKind::Metaverse, 10), &mut rng()).unwrap();
        assert_eq!(g.flows.len(), 10);
        for f in &g.flows {
            assert!((5 * GBPS..=100 * GBPS).contains(&f.kpi.throughput_dl_bps));
            assert_eq!(f.kpi.throughput_dl_bps, f.kpi.throughput_ul_bps);
            assert_eq!(f.arrival, SimTime::ZERO);
            f.kpi.validate().unwrap();
        }
    }

    #[test]
    fn metaverse_deterministic_and_validated() {
        let s = spec(UseCaseKind::Metaverse, 10);
        assert_eq!(
            gen_metaverse(&s, &mut rng()).unwrap().flows,
            gen_metaverse(&s, &mut rng()).unwrap().flows
        );
        assert!(gen_metaverse(&spec(UseCaseKind::Metaverse, 0), &mut rng()).is_err());
        assert!(matches!(
            gen_metaverse(&spec(UseCaseKind::DigitalTwin, 1), &mut rng()),
            Err(WorkloadError::KindMismatch { .. })
        ));
    }

    #[test]
    fn metaverse_areal_warning() {
        let g = gen_metaverse(&spec(UseCaseKind::Metaverse, 20), &mut rng()).unwrap();
        assert_eq!(g.warnings.len(), 1);
        let mut sparse = spec(UseCaseKind::Metaverse, 1);
        sparse.area_m2 = 1e6;
        let g = gen_metaverse(&sparse, &mut rng()).unwrap();
        assert!(g.warnings[0].contains("density"));
    }

    #[test]
    fn virtual_production_streams() {
        let mut s = spec(UseCaseKind::VirtualProduction, 4);
        s.interaction_class = Some(InteractionClass::RemoteMusic);
        let g = gen_virtual_production(&s, &mut rng()).unwrap();
        assert_eq!(g.flows.len(), 13);
        let anc: Vec<_> = g.flows.iter().filter(|f| f.id.ends_with(".anc")).collect();
        assert!(anc.iter().all(|f| f.kpi.throughput_dl_bps == 64_000));
        for f in g.flows.iter().filter(|f| f.id.ends_with(".uhd")) {
            assert!((20 * MBPS..=50 * MBPS).contains(&f.kpi.throughput_dl_bps));
            assert_eq!(f.kpi.latency_bound_us, 15_000);
            assert_eq!(f.kpi.jitter_bound_us, Some(1_000));
        }
        for f in g.flows.iter().filter(|f| f.id.ends_with(".audio")) {
            assert!((48 * KBPS..=3 * MBPS).contains(&f.kpi.throughput_dl_bps));
        }
        let edge = g.flows.last().unwrap();
        assert_eq!(edge.kpi.throughput_dl_bps, 10 * GBPS);
        assert!(edge.kpi.latency_bound_us < 50_000);
        assert!(edge.kpi.jitter_bound_us.unwrap() < 10_000);
    }

    #[test]
    fn digital_twin_ranges() {
        let g = gen_digital_twin(&spec(UseCaseKind::DigitalTwin, 50), &mut rng()).unwrap();
        for f in &g.flows {
            assert!((100 * MBPS..=10 * GBPS).contains(&f.kpi.throughput_dl_bps));
            assert!((50 * MBPS..=5 * GBPS).contains(&f.kpi.throughput_ul_bps));
        }
    }

    #[test]
    fn factory_presets() {
        let g = gen_factory(&spec(UseCaseKind::FactoryRobotics, 3), &mut rng()).unwrap();
        for f in &g.flows {
            assert!(f.kpi.latency_bound_us < 20_000);
            assert!(f.kpi.throughput_dl_bps <= MBPS);
            assert!(f.kpi.positioning_cm.unwrap() <= 1.0);
            assert_eq!(f.arrival, SimTime::ZERO);
        }
        let g = gen_factory(&spec(UseCaseKind::FactoryDt, 3), &mut rng()).unwrap();
        assert!(g.flows.iter().all(|f| f.kpi.throughput_dl_bps >= GBPS));
        assert!(gen_factory(&spec(UseCaseKind::Metaverse, 3), &mut rng()).is_err());
    }

    #[test]
    fn poisson_mean_interarrival() {
        let rate = 50.0;
        let mut s = spec(UseCaseKind::FactoryRobotics, 10_000);
        s.arrival = Arrival::Poisson { rate };
        s.duration_s = 1e6;
        for seed in 0..3 {
            let times = arrival_times(&s, &mut RngStream::derive(seed, "arrivals"));
            assert_eq!(times.len(), 10_000);
            let mean = times.last().unwrap().as_secs_f64() / times.len() as f64;
            assert!((mean - 1.0 / rate).abs() <= 0.05 / rate, "mean {mean}");
        }
    }

    #[test]
    fn poisson_arrivals_stop_at_duration() {
        let mut s = spec(UseCaseKind::FactoryRobotics, 1_000);
        s.arrival = Arrival::Poisson { rate: 10.0 };
        s.duration_s = 5.0;
        let times = arrival_times(&s, &mut rng());
        assert!(times.len() < 1_000);
        assert!(times.iter().all(|t| *t < SimTime::from_secs(5)));
    }
}
