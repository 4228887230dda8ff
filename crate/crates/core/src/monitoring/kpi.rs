//! Windowed KPI estimation and SLA compliance checks.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::MonitorError;
use crate::access::LinkSample;
use crate::inter::KpiRequirementSet;
use crate::kernel::SimTime;

/// Default estimation window: one simulated second.
pub const DEFAULT_WINDOW: SimTime = SimTime::from_secs(1);

/// Samples of one flow inside `(t_end - span, t_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KpiWindow {
    pub flow: String,
    pub samples: Vec<LinkSample>,
    pub span: SimTime,
    pub t_end: SimTime,
}

impl KpiWindow {
    /// Keeps the samples with `t_end - span < t <= t_end`, preserving order.
    /// A window reaching back past time zero includes `t = 0`.
    pub fn from_samples<'a>(
        flow: impl Into<String>,
        samples: impl IntoIterator<Item = &'a LinkSample>,
        t_end: SimTime,
        span: SimTime,
    ) -> Self {
        let truncated = t_end < span;
        let start = t_end.saturating_sub(span);
        let samples = samples
            .into_iter()
            .filter(|s| s.t <= t_end && (truncated || s.t > start))
            .copied()
            .collect();
        KpiWindow {
            flow: flow.into(),
            samples,
            span,
            t_end,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Rolling per-flow sample buffer trimmed to one window span.
#[derive(Debug, Clone, Default)]
pub struct SampleBuffer {
    samples: VecDeque<LinkSample>,
}

impl SampleBuffer {
    pub fn push(&mut self, s: LinkSample, span: SimTime) {
        let horizon = s.t.saturating_sub(span);
        self.samples.push_back(s);
        while self.samples.front().is_some_and(|f| f.t < horizon) {
            self.samples.pop_front();
        }
    }

    pub fn window(&self, flow: &str, t_end: SimTime, span: SimTime) -> KpiWindow {
        KpiWindow::from_samples(flow, self.samples.iter(), t_end, span)
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KpiKind {
    /// Nearest-rank latency percentile, `p` in (0, 1).
    LatencyPercentile(f64),
    Jitter,
    Throughput,
    Reliability,
}

/// 1-based nearest rank `ceil(p * n)`, clamped to `[1, n]`. The small
/// offset absorbs representation error in products like `0.99 * 100`.
pub fn nearest_rank(p: f64, n: usize) -> usize {
    let r = (p * n as f64 - 1e-9).ceil();
    (r.max(1.0) as usize).min(n)
}

/// Nearest-rank percentile of an already sorted slice.
pub fn percentile_sorted(sorted: &[u64], p: f64) -> u64 {
    sorted[nearest_rank(p, sorted.len()) - 1]
}

pub fn compute_kpi(window: &KpiWindow, kind: KpiKind) -> Result<f64, MonitorError> {
    if window.is_empty() {
        return Err(MonitorError::EmptyWindow(window.flow.clone()));
    }
    let n = window.samples.len();
    Ok(match kind {
        KpiKind::LatencyPercentile(p) => {
            let mut lat: Vec<u64> = window.samples.iter().map(|s| s.latency_us).collect();
            lat.sort_unstable();
            percentile_sorted(&lat, p) as f64
        }
        KpiKind::Jitter => {
            let mut lat: Vec<u64> = window.samples.iter().map(|s| s.latency_us).collect();
            lat.sort_unstable();
            let median = percentile_sorted(&lat, 0.5);
            let mut dev: Vec<u64> = lat.iter().map(|&l| l.abs_diff(median)).collect();
            dev.sort_unstable();
            percentile_sorted(&dev, 0.99) as f64
        }
        KpiKind::Throughput => {
            let bits: u64 = window.samples.iter().map(|s| s.delivered_bits).sum();
            bits as f64 / window.span.as_secs_f64()
        }
        KpiKind::Reliability => {
            let lost = window.samples.iter().filter(|s| s.lost).count();
            1.0 - lost as f64 / n as f64
        }
    })
}

/// Measured values for one evaluation. Latency and jitter in µs,
/// throughput in bps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KpiValues {
    pub latency_us: Option<f64>,
    pub jitter_us: Option<f64>,
    pub throughput_bps: Option<f64>,
    pub reliability: Option<f64>,
}

impl KpiValues {
    /// Every KPI the requirement set can bound, measured over `window`.
    pub fn measure(window: &KpiWindow, kpi: &KpiRequirementSet) -> Result<Self, MonitorError> {
        Ok(KpiValues {
            latency_us: Some(compute_kpi(
                window,
                KpiKind::LatencyPercentile(kpi.latency_percentile),
            )?),
            jitter_us: Some(compute_kpi(window, KpiKind::Jitter)?),
            throughput_bps: Some(compute_kpi(window, KpiKind::Throughput)?),
            reliability: Some(compute_kpi(window, KpiKind::Reliability)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiCheck {
    pub kpi: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub sla_id: String,
    pub checks: Vec<KpiCheck>,
}

impl ComplianceReport {
    pub fn compliant(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &KpiCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Per-KPI pass/fail with inclusive bounds: latency and jitter must not
/// exceed theirs, throughput and reliability must reach theirs. Jitter is
/// required only when the set bounds it.
pub fn evaluate_sla(
    sla_id: &str,
    kpi: &KpiRequirementSet,
    values: &KpiValues,
) -> Result<ComplianceReport, MonitorError> {
    let need = |v: Option<f64>, name: &'static str| {
        v.ok_or_else(|| MonitorError::MissingKpi {
            sla: sla_id.to_string(),
            kpi: name,
        })
    };
    let mut checks = Vec::with_capacity(4);
    let latency = need(values.latency_us, "latency")?;
    let bound = kpi.latency_bound_us as f64;
    checks.push(KpiCheck {
        kpi: format!("latency_p{}", fmt_percentile(kpi.latency_percentile)),
        measured: latency,
        bound,
        pass: latency <= bound,
    });
    if let Some(j) = kpi.jitter_bound_us {
        let jitter = need(values.jitter_us, "jitter")?;
        checks.push(KpiCheck {
            kpi: "jitter".into(),
            measured: jitter,
            bound: j as f64,
            pass: jitter <= j as f64,
        });
    }
    let tput = need(values.throughput_bps, "throughput")?;
    let bound = kpi.throughput_dl_bps as f64;
    checks.push(KpiCheck {
        kpi: "throughput".into(),
        measured: tput,
        bound,
        pass: tput >= bound,
    });
    let rel = need(values.reliability, "reliability")?;
    checks.push(KpiCheck {
        kpi: "reliability".into(),
        measured: rel,
        bound: kpi.reliability_min,
        pass: rel >= kpi.reliability_min,
    });
    Ok(ComplianceReport {
        sla_id: sla_id.to_string(),
        checks,
    })
}

fn fmt_percentile(p: f64) -> String {
    let s = format!("{}", p * 100.0);
    s.trim_end_matches(".0").replace('.', "_")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inter::GBPS;

    fn samples_ms(lat_ms: impl IntoIterator<Item = u64>) -> Vec<LinkSample> {
        lat_ms
            .into_iter()
            .enumerate()
            .map(|(i, ms)| LinkSample {
                t: SimTime::from_millis(i as u64 + 1),
                latency_us: ms * 1_000,
                delivered_bits: 1_000,
                lost: false,
            })
            .collect()
    }

    fn window(s: Vec<LinkSample>) -> KpiWindow {
        KpiWindow {
            flow: "f".into(),
            samples: s,
            span: SimTime::from_secs(1),
            t_end: SimTime::from_secs(1),
        }
    }

    fn kpi() -> KpiRequirementSet {
        KpiRequirementSet {
            latency_bound_us: 20_000,
            latency_percentile: 0.99,
            jitter_bound_us: None,
            throughput_dl_bps: 5 * GBPS,
            throughput_ul_bps: 5 * GBPS,
            reliability_min: 0.999999,
            positioning_cm: None,
            sync_bound_us: None,
        }
    }

    #[test]
    fn p99_of_one_to_hundred_ms() {
        let w = window(samples_ms(1..=100));
        assert_eq!(compute_kpi(&w, KpiKind::LatencyPercentile(0.99)).unwrap(), 99_000.0);
    }

    #[test]
    fn constant_latency_has_zero_jitter() {
        let w = window(samples_ms(std::iter::repeat_n(7, 50)));
        assert_eq!(compute_kpi(&w, KpiKind::Jitter).unwrap(), 0.0);
    }

    #[test]
    fn no_losses_full_reliability() {
        let w = window(samples_ms(1..=10));
        assert_eq!(compute_kpi(&w, KpiKind::Reliability).unwrap(), 1.0);
        assert_eq!(compute_kpi(&w, KpiKind::Throughput).unwrap(), 10_000.0);
    }

    #[test]
    fn empty_window_is_an_error() {
        let w = window(vec![]);
        assert!(matches!(
            compute_kpi(&w, KpiKind::Throughput),
            Err(MonitorError::EmptyWindow(_))
        ));
    }

    #[test]
    fn window_is_half_open() {
        let all: Vec<LinkSample> = (0..=20)
            .map(|i| LinkSample {
                t: SimTime::from_millis(i * 100),
                latency_us: 1,
                delivered_bits: 1,
                lost: false,
            })
            .collect();
        let w = KpiWindow::from_samples("f", all.iter(), SimTime::from_secs(2), SimTime::from_secs(1));
        assert_eq!(w.samples.len(), 10);
        assert_eq!(w.samples[0].t, SimTime::from_millis(1_100));
    }

    #[test]
    fn bounds_are_inclusive() {
        let k = kpi();
        let v = KpiValues {
            latency_us: Some(20_000.0),
            jitter_us: None,
            throughput_bps: Some(5e9),
            reliability: Some(0.999999),
        };
        let r = evaluate_sla("s", &k, &v).unwrap();
        assert!(r.compliant());
        assert_eq!(r.checks[0].kpi, "latency_p99");
    }

    #[test]
    fn latency_over_bound_fails() {
        let v = KpiValues {
            latency_us: Some(21_000.0),
            jitter_us: None,
            throughput_bps: Some(5e9),
            reliability: Some(1.0),
        };
        let r = evaluate_sla("s", &kpi(), &v).unwrap();
        assert!(!r.compliant());
        let failed: Vec<&str> = r.failures().map(|c| c.kpi.as_str()).collect();
        assert_eq!(failed, ["latency_p99"]);
    }

    #[test]
    fn missing_jitter_when_bounded() {
        let mut k = kpi();
        k.jitter_bound_us = Some(1_000);
        let v = KpiValues {
            latency_us: Some(1.0),
            jitter_us: None,
            throughput_bps: Some(5e9),
            reliability: Some(1.0),
        };
        assert!(matches!(
            evaluate_sla("s", &k, &v),
            Err(MonitorError::MissingKpi { kpi: "jitter", .. })
        ));
    }

    #[test]
    fn rolling_buffer_keeps_one_span() {
        let mut b = SampleBuffer::default();
        let span = SimTime::from_millis(100);
        for i in 0..1_000 {
            b.push(
                LinkSample {
                    t: SimTime::from_millis(i),
                    latency_us: 1,
                    delivered_bits: 1,
                    lost: false,
                },
                span,
            );
        }
        let w = b.window("f", SimTime::from_millis(999), span);
        assert_eq!(w.samples.len(), 100);
        assert!(b.samples.len() <= 101);
    }
}
