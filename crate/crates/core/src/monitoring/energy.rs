//! Joule accounting and energy efficiency.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MonitorError;
use crate::kernel::SimTime;

/// Instantaneous power of one component, valid from `t` until the next
/// reading for the same component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReading {
    pub component: String,
    pub t: SimTime,
    pub watts: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    joules: BTreeMap<String, f64>,
    delivered_bits: u128,
}

impl EnergyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rectangle `watts · (t1 − t0)` charged to `component`.
    pub fn add_interval(
        &mut self,
        component: &str,
        t0: SimTime,
        t1: SimTime,
        watts: f64,
    ) -> Result<f64, MonitorError> {
        if t1 < t0 {
            return Err(MonitorError::NonMonotonicInterval { t0, t1 });
        }
        if watts < 0.0 || !watts.is_finite() {
            return Err(MonitorError::NegativePower(component.to_string()));
        }
        let j = watts * (t1 - t0).as_secs_f64();
        *self.joules.entry(component.to_string()).or_default() += j;
        Ok(j)
    }

    /// Integrates piecewise-constant readings over `[t0, t1]`. Every
    /// component appearing in `readings` needs a reading at or before `t0`.
    /// Returns the joules added per component.
    pub fn account_energy(
        &mut self,
        t0: SimTime,
        t1: SimTime,
        readings: &[PowerReading],
    ) -> Result<BTreeMap<String, f64>, MonitorError> {
        if t1 <= t0 {
            return Err(MonitorError::NonMonotonicInterval { t0, t1 });
        }
        let mut per: BTreeMap<&str, Vec<&PowerReading>> = BTreeMap::new();
        for r in readings {
            per.entry(&r.component).or_default().push(r);
        }
        // Validate everything before touching the ledger.
        for (c, rs) in per.iter_mut() {
            rs.sort_by_key(|r| r.t);
            if rs[0].t > t0 {
                return Err(MonitorError::UncoveredInterval(c.to_string()));
            }
            if rs.iter().any(|r| r.watts < 0.0 || !r.watts.is_finite()) {
                return Err(MonitorError::NegativePower(c.to_string()));
            }
        }
        let mut delta = BTreeMap::new();
        for (c, rs) in per {
            let mut total = 0.0;
            for (i, r) in rs.iter().enumerate() {
                let start = r.t.max(t0);
                let end = rs.get(i + 1).map_or(t1, |n| n.t).min(t1);
                if end > start {
                    total += r.watts * (end - start).as_secs_f64();
                }
            }
            *self.joules.entry(c.to_string()).or_default() += total;
            delta.insert(c.to_string(), total);
        }
        Ok(delta)
    }

    pub fn add_bits(&mut self, bits: u64) {
        self.delivered_bits += bits as u128;
    }

    pub fn delivered_bits(&self) -> u128 {
        self.delivered_bits
    }

    pub fn joules(&self, component: &str) -> f64 {
        self.joules.get(component).copied().unwrap_or(0.0)
    }

    pub fn components(&self) -> impl Iterator<Item = (&str, f64)> {
        self.joules.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Sum over components, in component-id order.
    pub fn total_joules(&self) -> f64 {
        self.joules.values().sum()
    }

    /// Delivered bits per joule; zero before any energy is consumed.
    pub fn efficiency(&self) -> f64 {
        let j = self.total_joules();
        if j == 0.0 {
            0.0
        } else {
            self.delivered_bits as f64 / j
        }
    }

    pub fn efficiency_tbit_per_joule(&self) -> f64 {
        self.efficiency() / 1e12
    }
}
