//! Infrastructure plane: access technologies, flows and their link samples,
//! and per-AT power draw.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inter::KpiRequirementSet;
use crate::kernel::SimTime;

/// Queueing multiplier ceiling relative to base latency.
pub const MAX_QUEUE_FACTOR: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AccessError {
    #[error("access technology {0} is sleeping")]
    AtSleeping(String),
    #[error("access technology {at} cannot fit {requested} bps (headroom {headroom} bps)")]
    InsufficientCapacity {
        at: String,
        requested: u64,
        headroom: u64,
    },
    #[error("flow {flow} is not attached to {at}")]
    NotAttached { at: String, flow: String },
    #[error("flow {flow} is already attached to {at}")]
    AlreadyAttached { at: String, flow: String },
    #[error("access technology {0} still carries traffic")]
    AtBusy(String),
    #[error("load fraction {0} outside [0, 1)")]
    InvalidLoad(f64),
    #[error("share must be positive")]
    ZeroShare,
    #[error("invalid access technology {id}: {reason}")]
    Invalid { id: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtKind {
    Cellular,
    Wifi,
    Lifi,
    Satellite,
    Fibre,
}

impl AtKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AtKind::Cellular => "cellular",
            AtKind::Wifi => "wifi",
            AtKind::Lifi => "lifi",
            AtKind::Satellite => "satellite",
            AtKind::Fibre => "fibre",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerModel {
    pub p_idle_w: f64,
    pub p_max_w: f64,
    pub p_sleep_w: f64,
}

impl PowerModel {
    pub fn new(p_idle_w: f64, p_max_w: f64, p_sleep_w: f64) -> Option<Self> {
        let pm = PowerModel {
            p_idle_w,
            p_max_w,
            p_sleep_w,
        };
        pm.is_valid().then_some(pm)
    }

    pub fn is_valid(&self) -> bool {
        0.0 <= self.p_sleep_w && self.p_sleep_w <= self.p_idle_w && self.p_idle_w <= self.p_max_w
    }

    /// Linear idle-to-max draw for an active element.
    pub fn active_power(&self, load_fraction: f64) -> f64 {
        let u = load_fraction.clamp(0.0, 1.0);
        self.p_idle_w + (self.p_max_w - self.p_idle_w) * u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtState {
    Active,
    Sleeping,
}

/// Preset parameters for one access-technology kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtPreset {
    pub capacity_bps: u64,
    pub base_latency_us: u64,
    pub jitter_span_us: u64,
    pub per_error_rate: f64,
    pub power: PowerModel,
    pub positioning_cm: Option<f64>,
}

/// Default presets. LiFi capacity follows the "up to 100 Gbps" figure and
/// satellite spans the 20-40 ms LEO latency range via base + jitter.
pub fn preset(kind: AtKind) -> AtPreset {
    match kind {
        AtKind::Cellular => AtPreset {
            capacity_bps: 20_000_000_000,
            base_latency_us: 1_000,
            jitter_span_us: 500,
            per_error_rate: 1e-7,
            power: PowerModel {
                p_idle_w: 500.0,
                p_max_w: 1_000.0,
                p_sleep_w: 50.0,
            },
            positioning_cm: Some(10.0),
        },
        AtKind::Wifi => AtPreset {
            capacity_bps: 10_000_000_000,
            base_latency_us: 2_000,
            jitter_span_us: 1_000,
            per_error_rate: 1e-6,
            power: PowerModel {
                p_idle_w: 10.0,
                p_max_w: 20.0,
                p_sleep_w: 1.0,
            },
            positioning_cm: None,
        },
        AtKind::Lifi => AtPreset {
            capacity_bps: 100_000_000_000,
            base_latency_us: 500,
            jitter_span_us: 100,
            per_error_rate: 1e-7,
            power: PowerModel {
                p_idle_w: 5.0,
                p_max_w: 15.0,
                p_sleep_w: 0.5,
            },
            positioning_cm: Some(0.5),
        },
        AtKind::Satellite => AtPreset {
            capacity_bps: 1_000_000_000,
            base_latency_us: 20_000,
            jitter_span_us: 20_000,
            per_error_rate: 1e-5,
            power: PowerModel {
                p_idle_w: 200.0,
                p_max_w: 400.0,
                p_sleep_w: 100.0,
            },
            positioning_cm: None,
        },
        AtKind::Fibre => AtPreset {
            capacity_bps: 400_000_000_000,
            base_latency_us: 100,
            jitter_span_us: 10,
            per_error_rate: 1e-9,
            power: PowerModel {
                p_idle_w: 20.0,
                p_max_w: 40.0,
                p_sleep_w: 5.0,
            },
            positioning_cm: None,
        },
    }
}

/// An access technology and the bandwidth currently committed on it.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessTech {
    pub id: String,
    pub kind: AtKind,
    pub capacity_bps: u64,
    pub base_latency_us: u64,
    pub jitter_span_us: u64,
    pub per_error_rate: f64,
    pub coverage: BTreeSet<String>,
    pub power: PowerModel,
    pub positioning_cm: Option<f64>,
    state: AtState,
    shares: BTreeMap<String, u64>,
    committed_bps: u64,
}

impl AccessTech {
    pub fn from_preset(id: impl Into<String>, kind: AtKind, coverage: &[&str]) -> Self {
        let p = preset(kind);
        AccessTech {
            id: id.into(),
            kind,
            capacity_bps: p.capacity_bps,
            base_latency_us: p.base_latency_us,
            jitter_span_us: p.jitter_span_us,
            per_error_rate: p.per_error_rate,
            coverage: coverage.iter().map(|z| z.to_string()).collect(),
            power: p.power,
            positioning_cm: p.positioning_cm,
            state: AtState::Active,
            shares: BTreeMap::new(),
            committed_bps: 0,
        }
    }

    pub fn validate(&self) -> Result<(), AccessError> {
        let bad = |reason: &str| {
            Err(AccessError::Invalid {
                id: self.id.clone(),
                reason: reason.to_string(),
            })
        };
        if self.capacity_bps == 0 {
            return bad("capacity_bps must be positive");
        }
        if !(0.0..=1.0).contains(&self.per_error_rate) {
            return bad("per_error_rate must lie in [0, 1]");
        }
        if !self.power.is_valid() {
            return bad("power model requires 0 <= p_sleep <= p_idle <= p_max");
        }
        Ok(())
    }

    pub fn state(&self) -> AtState {
        self.state
    }

    pub fn is_active(&self) -> bool {
        self.state == AtState::Active
    }

    pub fn covers(&self, zone: &str) -> bool {
        self.coverage.contains(zone)
    }

    pub fn committed_bps(&self) -> u64 {
        self.committed_bps
    }

    pub fn headroom_bps(&self) -> u64 {
        self.capacity_bps - self.committed_bps
    }

    pub fn share_of(&self, flow: &str) -> Option<u64> {
        self.shares.get(flow).copied()
    }

    pub fn flows(&self) -> impl Iterator<Item = (&str, u64)> {
        self.shares.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn load_fraction(&self) -> f64 {
        self.committed_bps as f64 / self.capacity_bps as f64
    }

    /// One-way latency draw: base scaled by a capped `1/(1-u)` queueing
    /// factor, plus uniform jitter on `[0, jitter_span_us]`.
    pub fn sample_latency<R: Rng + ?Sized>(
        &self,
        load_fraction: f64,
        rng: &mut R,
    ) -> Result<u64, AccessError> {
        if !self.is_active() {
            return Err(AccessError::AtSleeping(self.id.clone()));
        }
        if !(0.0..1.0).contains(&load_fraction) {
            return Err(AccessError::InvalidLoad(load_fraction));
        }
        let factor = (1.0 / (1.0 - load_fraction)).min(MAX_QUEUE_FACTOR);
        let queued = (self.base_latency_us as f64 * factor).round() as u64;
        let jitter = if self.jitter_span_us == 0 {
            0
        } else {
            rng.random_range(0..=self.jitter_span_us)
        };
        Ok(queued.max(self.base_latency_us) + jitter)
    }

    /// Bernoulli packet loss at the AT's error rate.
    pub fn sample_loss<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        rng.random::<f64>() < self.per_error_rate
    }

    pub fn admit(&mut self, flow: &str, share_bps: u64) -> Result<(), AccessError> {
        if share_bps == 0 {
            return Err(AccessError::ZeroShare);
        }
        if !self.is_active() {
            return Err(AccessError::AtSleeping(self.id.clone()));
        }
        if self.shares.contains_key(flow) {
            return Err(AccessError::AlreadyAttached {
                at: self.id.clone(),
                flow: flow.to_string(),
            });
        }
        if share_bps > self.headroom_bps() {
            return Err(AccessError::InsufficientCapacity {
                at: self.id.clone(),
                requested: share_bps,
                headroom: self.headroom_bps(),
            });
        }
        self.shares.insert(flow.to_string(), share_bps);
        self.committed_bps += share_bps;
        assert!(self.committed_bps <= self.capacity_bps, "AT capacity exceeded");
        Ok(())
    }

    /// Grows an existing share in place.
    pub fn increase_share(&mut self, flow: &str, extra_bps: u64) -> Result<(), AccessError> {
        if !self.shares.contains_key(flow) {
            return Err(AccessError::NotAttached {
                at: self.id.clone(),
                flow: flow.to_string(),
            });
        }
        if extra_bps > self.headroom_bps() {
            return Err(AccessError::InsufficientCapacity {
                at: self.id.clone(),
                requested: extra_bps,
                headroom: self.headroom_bps(),
            });
        }
        *self.shares.get_mut(flow).expect("checked") += extra_bps;
        self.committed_bps += extra_bps;
        assert!(self.committed_bps <= self.capacity_bps, "AT capacity exceeded");
        Ok(())
    }

    /// Returns the released share.
    pub fn release(&mut self, flow: &str) -> Result<u64, AccessError> {
        let share = self.shares.remove(flow).ok_or_else(|| AccessError::NotAttached {
            at: self.id.clone(),
            flow: flow.to_string(),
        })?;
        self.committed_bps -= share;
        Ok(share)
    }

    pub fn power_w(&self) -> f64 {
        self.power_at_load(self.load_fraction())
    }

    pub fn power_at_load(&self, load_fraction: f64) -> f64 {
        match self.state {
            AtState::Sleeping => self.power.p_sleep_w,
            AtState::Active => self.power.active_power(load_fraction),
        }
    }

    pub fn set_sleep(&mut self, sleeping: bool) -> Result<(), AccessError> {
        if sleeping {
            if self.committed_bps > 0 {
                return Err(AccessError::AtBusy(self.id.clone()));
            }
            self.state = AtState::Sleeping;
        } else {
            self.state = AtState::Active;
        }
        Ok(())
    }

    /// True when committed bandwidth equals the sum of per-flow shares and
    /// fits in capacity.
    pub fn capacity_conserved(&self) -> bool {
        self.shares.values().sum::<u64>() == self.committed_bps
            && self.committed_bps <= self.capacity_bps
    }
}

/// One branch of a flow's attachment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attachment {
    pub at_id: String,
    pub allocated_bps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub id: String,
    pub ue: String,
    pub zone: String,
    pub demand_bps: u64,
    pub kpi: KpiRequirementSet,
    pub attachments: Vec<Attachment>,
    pub attached_at: SimTime,
}

impl Flow {
    pub fn new(
        id: impl Into<String>,
        ue: impl Into<String>,
        zone: impl Into<String>,
        demand_bps: u64,
        kpi: KpiRequirementSet,
    ) -> Self {
        Flow {
            id: id.into(),
            ue: ue.into(),
            zone: zone.into(),
            demand_bps,
            kpi,
            attachments: Vec::new(),
            attached_at: SimTime::ZERO,
        }
    }

    pub fn allocated_bps(&self) -> u64 {
        self.attachments.iter().map(|a| a.allocated_bps).sum()
    }

    pub fn is_split(&self) -> bool {
        self.attachments.len() == 2
    }

    pub fn primary_at(&self) -> Option<&str> {
        self.attachments.first().map(|a| a.at_id.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSample {
    pub t: SimTime,
    pub latency_us: u64,
    pub delivered_bits: u64,
    pub lost: bool,
}
