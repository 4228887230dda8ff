//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line to
//! the real stdout (bypassing the harness capture) and then asserts.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use mdsim::access::{AccessTech, AtKind, Flow, LinkSample, PowerModel};
use mdsim::cognition::{detect_drift, shapley_exact, CharacteristicFn};
use mdsim::inter::{decompose_sla, recompose, CapabilityRecord, E2eSla, KpiRequirementSet};
use mdsim::intra::{place_service, ComputeNode, PlacementConfig, ServiceChain, ServiceFunction, Tier};
use mdsim::kernel::SimTime;
use mdsim::matric::{HandoverDecision, Matric};
use mdsim::monitoring::{compute_kpi, Broker, EnergyLedger, KpiKind, KpiWindow, PowerReading};
use mdsim::runner::run;
use mdsim::scenario::{load_scenario, Scenario};

fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn bundled(name: &str) -> Scenario {
    load_scenario(scenario_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn kpi(latency_bound_us: u64, throughput_bps: u64) -> KpiRequirementSet {
    KpiRequirementSet {
        latency_bound_us,
        latency_percentile: 0.99,
        jitter_bound_us: None,
        throughput_dl_bps: throughput_bps,
        throughput_ul_bps: throughput_bps,
        reliability_min: 0.999,
        positioning_cm: None,
        sync_bound_us: None,
    }
}

fn verdict(n: u32, pass: bool, elapsed: Duration, detail: &str) {
    let line = format!(
        "criterion {n}: {} ({detail}; {:.3}s)\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(pass, "criterion {n} failed: {detail}");
}

#[test]
fn criterion_1_determinism() {
    let mut names: Vec<String> = std::fs::read_dir(scenario_dir())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".json"))
        .collect();
    names.sort();
    let start = Instant::now();
    let mut ok = !names.is_empty();
    let mut slowest = Duration::ZERO;
    let mut detail = Vec::new();
    for name in &names {
        let sc = bundled(name);
        let t = Instant::now();
        let a = run(&sc).unwrap();
        let b = run(&sc).unwrap();
        let each = t.elapsed() / 2;
        slowest = slowest.max(each);
        let same = a.report_csv() == b.report_csv() && a.trace_text == b.trace_text;
        ok &= same && each < Duration::from_secs(10);
        detail.push(format!("{name}={}", if same { "identical" } else { "DIFFERENT" }));
    }
    detail.push(format!("slowest run {:.3}s", slowest.as_secs_f64()));
    verdict(1, ok, start.elapsed(), &detail.join(", "));
}

/// A randomized multi-domain scenario large enough to deliver at least
/// 10^5 events.
fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinds = ["cellular", "wifi", "lifi", "fibre"];
    let mut domains = Vec::new();
    let mut workloads = Vec::new();
    for d in 0..3 {
        let zone = format!("z{d}");
        let ats: Vec<_> = (0..rng.random_range(2..=4))
            .map(|a| {
                json!({
                    "id": format!("d{d}-at{a}"),
                    "kind": kinds[rng.random_range(0..kinds.len())],
                    "coverage": [zone.clone()],
                    "capacity_bps": rng.random_range(2u64..=12) * 1_000_000_000,
                    "per_error_rate": 1e-9,
                    "positioning_cm": null,
                })
            })
            .collect();
        let nodes: Vec<_> = (0..rng.random_range(1..=3))
            .map(|n| {
                json!({
                    "id": format!("d{d}-n{n}"),
                    "tier": if n == 0 { "edge" } else { "core" },
                    "cpu_units": rng.random_range(8u32..=32),
                    "mem_mb": rng.random_range(8u64..=64) * 1024,
                    "power": {"p_idle_w": 50.0, "p_max_w": 200.0, "p_sleep_w": 5.0},
                })
            })
            .collect();
        domains.push(json!({
            "id": format!("d{d}"),
            "unit_cost": rng.random_range(1..=4) as f64,
            "ats": ats,
            "nodes": nodes,
        }));
        for w in 0..2 {
            let service: Vec<_> = (0..rng.random_range(0..=3))
                .map(|_| {
                    json!({
                        "cpu_units": rng.random_range(1u32..=6),
                        "mem_mb": rng.random_range(1u64..=8) * 512,
                        "egress_bps": 100_000_000u64,
                    })
                })
                .collect();
            workloads.push(json!({
                "id": format!("w{d}{w}"),
                "kind": "digital_twin",
                "user_count": 20_000,
                "area_m2": 1000.0,
                "zone": zone.clone(),
                "duration_s": 250.0,
                "arrival": {"type": "poisson", "rate": rng.random_range(15.0..35.0)},
                "holding_s": rng.random_range(0.5..3.0),
                "kpi_override": {
                    "latency_bound_us": 40_000,
                    "throughput_dl_bps": rng.random_range(1u64..=8) * 50_000_000,
                    "throughput_ul_bps": 100_000_000,
                    "reliability_min": 0.99,
                },
                "service": service,
            }));
        }
    }
    let doc = json!({
        "name": "randomized",
        "seed": seed,
        "duration_s": 250.0,
        "domains": domains,
        "workloads": workloads,
        "toggles": {"sleep_policy": true},
        "timing": {"tick_us": 10_000, "window_us": 1_000_000},
    });
    Scenario::from_json(&doc.to_string()).expect("generated scenario is valid")
}

#[test]
fn criterion_2_conservation() {
    let start = Instant::now();
    let sc = random_scenario(0x5eed);
    let report = run(&sc).expect("randomized run completes");
    let elapsed = start.elapsed();
    // Capacity, compute and attachment invariants are asserted after every
    // delivered event; reaching here means none fired.
    let pass = report.events >= 100_000
        && report.invariant_checks == report.events as u64
        && elapsed < Duration::from_secs(30);
    verdict(
        2,
        pass,
        elapsed,
        &format!(
            "{} events, {} invariant checks, {} flows, {} blocked",
            report.events, report.invariant_checks, report.flows, report.sla.blocked_flows
        ),
    );
}

#[test]
fn criterion_3_sla_decomposition() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures = 0;
    for i in 0..1000 {
        let bound = rng.random_range(1_000u64..=100_000);
        let jitter = rng.random_bool(0.5).then(|| rng.random_range(1u64..=bound));
        let kpi = KpiRequirementSet {
            latency_bound_us: bound,
            latency_percentile: 0.99,
            jitter_bound_us: jitter,
            throughput_dl_bps: rng.random_range(1u64..=10_000_000_000),
            throughput_ul_bps: rng.random_range(1u64..=10_000_000_000),
            reliability_min: 1.0 - 10f64.powf(-rng.random_range(1.0..9.0)),
            positioning_cm: None,
            sync_bound_us: None,
        };
        let k = rng.random_range(1..=2);
        let caps: Vec<CapabilityRecord> = (0..k)
            .map(|d| CapabilityRecord {
                domain: format!("d{d}"),
                free_bps: u64::MAX,
                min_latency_us: rng.random_range(0..=bound / 2),
                reliability_floor: 1.0,
                unit_cost: 1.0,
                prefixes: vec![],
            })
            .collect();
        let mut sla = E2eSla::new(format!("s{i}"), kpi.clone());
        sla.activate(caps.iter().map(|c| c.domain.clone()).collect()).unwrap();
        let parts = decompose_sla(&sla, &caps).unwrap();
        let latency: u64 = parts.iter().map(|p| p.kpi.latency_bound_us).sum();
        let jitter_ok = match jitter {
            Some(j) => parts.iter().map(|p| p.kpi.jitter_bound_us.unwrap()).sum::<u64>() == j,
            None => parts.iter().all(|p| p.kpi.jitter_bound_us.is_none()),
        };
        let reliability: f64 = parts.iter().map(|p| p.kpi.reliability_min).product();
        let throughput = parts.iter().all(|p| {
            p.kpi.throughput_dl_bps == kpi.throughput_dl_bps && p.kpi.throughput_ul_bps == kpi.throughput_ul_bps
        });
        let back = recompose(&parts).unwrap();
        let ok = latency == bound
            && jitter_ok
            && reliability >= kpi.reliability_min - 1e-12
            && throughput
            && back.latency_bound_us == bound
            && back.reliability_min >= kpi.reliability_min - 1e-12;
        if !ok {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        3,
        failures == 0 && elapsed < Duration::from_secs(5),
        elapsed,
        &format!("1000 SLAs, {failures} unsound"),
    );
}

#[test]
fn criterion_4_metaverse_desk() {
    let start = Instant::now();
    let m1 = bundled("m1_metaverse.json");
    let aggregate: u64 = m1.domains[0].ats.iter().map(|a| a.build().capacity_bps).sum();
    let base_ok = m1.domains[0].ats.iter().all(|a| a.build().base_latency_us <= 5_000);
    let r1 = run(&m1).unwrap();
    let worst_p99 = r1
        .rows
        .iter()
        .filter(|r| r.kpi == "latency_p99")
        .map(|r| r.measured)
        .fold(0.0, f64::max);
    let m1_ok = aggregate == 200_000_000_000
        && base_ok
        && r1.flows == 20
        && r1.sla.evaluated == 20
        && worst_p99 <= 20_000.0
        && r1.violations() == 0;

    let m2 = bundled("m2_saturated.json");
    let aggregate2: u64 = m2.domains[0].ats.iter().map(|a| a.build().capacity_bps).sum();
    let r2 = run(&m2).unwrap();
    let throughput_violations = r2.sla.violations_by_kpi.get("throughput").copied().unwrap_or(0);
    let lag = match (r2.sla.saturation_s, r2.sla.first_throughput_violation_s) {
        (Some(s), Some(v)) => Some(v - s),
        _ => None,
    };
    let m2_ok = aggregate2 == 80_000_000_000
        && throughput_violations >= 1
        && lag.is_some_and(|l| (0.0..=5.0).contains(&l));
    let elapsed = start.elapsed();
    verdict(
        4,
        m1_ok && m2_ok && elapsed < Duration::from_secs(20),
        elapsed,
        &format!(
            "M1 worst p99 {worst_p99} us, {} violations; M2 {throughput_violations} throughput violations, detection lag {:?} s",
            r1.violations(),
            lag
        ),
    );
}

/// Average marginal contribution over every join order.
fn permutation_oracle(cf: &CharacteristicFn) -> Vec<f64> {
    fn orders(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for o in orders(n - 1) {
            for pos in 0..=o.len() {
                let mut p = o.clone();
                p.insert(pos, n - 1);
                out.push(p);
            }
        }
        out
    }
    let n = cf.players();
    let all = orders(n);
    let mut phi = vec![0.0; n];
    for order in &all {
        let mut mask = 0u32;
        for &i in order {
            let before = cf.value(mask);
            mask |= 1 << i;
            phi[i] += cf.value(mask) - before;
        }
    }
    phi.iter().map(|s| s / all.len() as f64).collect()
}

#[test]
fn criterion_5_shapley() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_eff: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    let mut oracle_games = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=10);
        let table: Vec<f64> = (0..1u32 << n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let cf = CharacteristicFn::from_table(table).unwrap();
        let phi = shapley_exact(&cf).phi;
        let sum: f64 = phi.iter().sum();
        worst_eff = worst_eff.max((sum - (cf.grand() - cf.empty())).abs());
        if n <= 6 {
            oracle_games += 1;
            for (a, b) in phi.iter().zip(permutation_oracle(&cf)) {
                worst_oracle = worst_oracle.max((a - b).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        5,
        worst_eff <= 1e-9 && worst_oracle <= 1e-9 && elapsed < Duration::from_secs(10),
        elapsed,
        &format!(
            "max efficiency gap {worst_eff:.2e}, max oracle gap {worst_oracle:.2e} over {oracle_games} games with n <= 6"
        ),
    );
}

/// Enumerates every assignment, committing each function on cloned nodes
/// and charging the change in node power (idle power included when a node
/// leaves the idle state).
fn placement_oracle(chain: &ServiceChain, nodes: &[ComputeNode], cfg: &PlacementConfig) -> Option<f64> {
    let k = chain.functions.len();
    let mut best: Option<f64> = None;
    let total = nodes.len().pow(k as u32);
    for code in 0..total {
        let mut a = Vec::with_capacity(k);
        let mut c = code;
        for _ in 0..k {
            a.push(c % nodes.len());
            c /= nodes.len();
        }
        let mut work = nodes.to_vec();
        if chain
            .functions
            .iter()
            .zip(&a)
            .any(|(f, &n)| work[n].commit(f.cpu_units, f.mem_mb).is_err())
        {
            continue;
        }
        let power: f64 = nodes
            .iter()
            .zip(&work)
            .filter(|(before, after)| before.committed() != after.committed())
            .map(|(before, after)| {
                let base = if before.committed().0 == 0 { 0.0 } else { before.power_w() };
                after.power_w() - base
            })
            .sum();
        let hops = a.windows(2).filter(|w| w[0] != w[1]).count() as u64;
        let cost = power + cfg.lambda * (hops * cfg.inter_node_latency_us) as f64;
        if best.is_none_or(|b| cost < b) {
            best = Some(cost);
        }
    }
    best
}

#[test]
fn criterion_6_placement_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = PlacementConfig::default();
    let (mut equal, mut feasible) = (0, 0);
    let mut mismatches = Vec::new();
    for i in 0..200 {
        // Power-of-two CPU sizes and integer wattages keep every power
        // figure a short dyadic fraction, so sums are exact in any order.
        let nodes: Vec<ComputeNode> = (0..rng.random_range(1..=4))
            .map(|n| {
                let idle = rng.random_range(10..=100) as f64;
                let power = PowerModel::new(idle, idle + rng.random_range(0..=200) as f64, 1.0).unwrap();
                let mut node = ComputeNode::new(
                    format!("n{n}"),
                    Tier::Edge,
                    1 << rng.random_range(1..=4),
                    rng.random_range(1..=8) * 1024,
                    power,
                );
                if rng.random_bool(0.3) {
                    let _ = node.commit(1, 512);
                }
                node
            })
            .collect();
        let chain = ServiceChain {
            id: format!("c{i}"),
            functions: (0..rng.random_range(1..=3))
                .map(|_| ServiceFunction {
                    cpu_units: rng.random_range(1..=6),
                    mem_mb: rng.random_range(1..=6) * 512,
                    egress_bps: 1_000_000,
                })
                .collect(),
            kpi: kpi(20_000, 1_000_000),
        };
        let got = place_service(&chain, &nodes, &cfg).ok().map(|p| p.cost);
        let want = placement_oracle(&chain, &nodes, &cfg);
        if want.is_some() {
            feasible += 1;
        }
        if got == want {
            equal += 1;
        } else {
            mismatches.push(format!("{i}: {got:?} vs {want:?}"));
        }
    }
    let elapsed = start.elapsed();
    verdict(
        6,
        equal == 200 && feasible > 100 && elapsed < Duration::from_secs(5),
        elapsed,
        &format!("{equal}/200 equal ({feasible} feasible) {}", mismatches.join("; ")),
    );
}

#[test]
fn criterion_7_energy() {
    let start = Instant::now();
    // (a) piecewise-constant fixtures.
    let mut ledger = EnergyLedger::new();
    ledger.add_interval("x", SimTime::ZERO, SimTime::from_secs(2), 10.0).unwrap();
    ledger.add_interval("x", SimTime::from_secs(2), SimTime::from_millis(2_500), 4.0).unwrap();
    let readings = [
        PowerReading { component: "y".into(), t: SimTime::ZERO, watts: 5.0 },
        PowerReading { component: "y".into(), t: SimTime::from_secs(1), watts: 0.5 },
        PowerReading { component: "y".into(), t: SimTime::from_secs(3), watts: 20.0 },
        PowerReading { component: "z".into(), t: SimTime::ZERO, watts: 8.0 },
    ];
    let delta = ledger.account_energy(SimTime::ZERO, SimTime::from_millis(3_250), &readings).unwrap();
    let fixtures_ok = ledger.joules("x") == 22.0
        && delta["y"] == 5.0 + 1.0 + 5.0
        && delta["z"] == 26.0
        && ledger.total_joules() == 22.0 + 11.0 + 26.0;

    // (b) sleep policy against always-on on the same intermittent load.
    let mut on = bundled("intermittent_energy.json");
    on.toggles.sleep_policy = true;
    let mut off = on.clone();
    off.toggles.sleep_policy = false;
    let r_on = run(&on).unwrap();
    let r_off = run(&off).unwrap();
    let sleep_ok = r_on.energy.total_joules < r_off.energy.total_joules
        && r_on.energy.delivered_bits == r_off.energy.delivered_bits
        && r_on.energy.delivered_bits > 0;

    // (c) 10^12 bits over one joule.
    let mut unit = EnergyLedger::new();
    unit.add_interval("at", SimTime::ZERO, SimTime::from_secs(1), 1.0).unwrap();
    unit.add_bits(1_000_000_000_000);
    let tbit_ok = unit.efficiency_tbit_per_joule() == 1.0;

    let elapsed = start.elapsed();
    verdict(
        7,
        fixtures_ok && sleep_ok && tbit_ok && elapsed < Duration::from_secs(10),
        elapsed,
        &format!(
            "fixtures {fixtures_ok}; sleep {:.1} J vs always-on {:.1} J, bits {} vs {}; 1e12 bit/J -> {} Tbit/J",
            r_on.energy.total_joules,
            r_off.energy.total_joules,
            r_on.energy.delivered_bits,
            r_off.energy.delivered_bits,
            unit.efficiency_tbit_per_joule()
        ),
    );
}

/// Smallest 1-based rank `r` with `r / n >= num / den`, in integers.
fn rank(num: usize, den: usize, n: usize) -> usize {
    ((num * n).div_ceil(den)).clamp(1, n)
}

#[test]
fn criterion_8_estimators() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mismatches = 0;
    for w in 0..500 {
        let n = rng.random_range(1..=400);
        let samples: Vec<LinkSample> = (0..n)
            .map(|i| LinkSample {
                t: SimTime(i as u64 + 1),
                latency_us: rng.random_range(0..50_000),
                delivered_bits: 0,
                lost: false,
            })
            .collect();
        let window = KpiWindow::from_samples(format!("f{w}"), &samples, SimTime(n as u64), SimTime(n as u64));
        let mut sorted: Vec<u64> = samples.iter().map(|s| s.latency_us).collect();
        sorted.sort_unstable();

        let per_mille = rng.random_range(1..1000);
        let want = sorted[rank(per_mille, 1000, n) - 1] as f64;
        let got = compute_kpi(&window, KpiKind::LatencyPercentile(per_mille as f64 / 1000.0)).unwrap();
        let p99 = sorted[rank(99, 100, n) - 1] as f64;
        let got99 = compute_kpi(&window, KpiKind::LatencyPercentile(0.99)).unwrap();

        let median = sorted[rank(1, 2, n) - 1];
        let mut dev: Vec<u64> = sorted.iter().map(|&l| l.abs_diff(median)).collect();
        dev.sort_unstable();
        let jitter = dev[rank(99, 100, n) - 1] as f64;
        let got_jitter = compute_kpi(&window, KpiKind::Jitter).unwrap();

        if got != want || got99 != p99 || got_jitter != jitter {
            mismatches += 1;
        }
    }

    // Reference mean 3, population sd sqrt(2), k = 3: threshold 4.2426.
    let reference = [1.0, 2.0, 3.0, 4.0, 5.0];
    let d_up = detect_drift(&reference, &[8.0, 8.0], 3.0).unwrap();
    let d_in = detect_drift(&reference, &[7.0, 7.0], 3.0).unwrap();
    let d_down = detect_drift(&reference, &[-2.0, -2.0], 3.0).unwrap();
    let d_flat_same = detect_drift(&[5.0, 5.0, 5.0], &[5.0, 5.0], 3.0).unwrap();
    let d_flat_moved = detect_drift(&[5.0, 5.0, 5.0], &[5.0, 6.0], 3.0).unwrap();
    let drift_ok = d_up.drifted
        && d_up.mean_shift == 5.0
        && (d_up.threshold - 3.0 * 2f64.sqrt()).abs() < 1e-12
        && !d_in.drifted
        && d_in.mean_shift == 4.0
        && d_down.drifted
        && d_down.mean_shift == -5.0
        && !d_flat_same.drifted
        && d_flat_moved.drifted
        && d_flat_moved.threshold == 0.0;

    let elapsed = start.elapsed();
    verdict(
        8,
        mismatches == 0 && drift_ok && elapsed < Duration::from_secs(5),
        elapsed,
        &format!("{mismatches}/500 estimator mismatches; drift fixtures {drift_ok}"),
    );
}

struct Oscillation {
    handovers: Vec<SimTime>,
    bad_attachment_states: usize,
}

/// Two co-located ATs whose latencies swap every `period_ticks` ticks of
/// 10 ms, with the controller evaluating handover on every tick.
fn oscillate(fast_us: u64, slow_us: u64, period_ticks: u64, ticks: u64) -> (Oscillation, SimTime) {
    let mut broker = Broker::new();
    let mut m = Matric::new("osc", 16);
    for id in ["a", "b"] {
        m.add_at(AccessTech::from_preset(id, AtKind::Lifi, &["z"]), SimTime::ZERO, &mut broker)
            .unwrap();
    }
    let mut flow = Flow::new("f", "ue", "z", 1_000_000_000, kpi(20_000, 1_000_000_000));
    let set = |m: &mut Matric, good: &str| {
        for id in ["a", "b"] {
            m.at_mut(id).unwrap().base_latency_us = if id == good { fast_us } else { slow_us };
        }
    };
    set(&mut m, "a");
    let plan = m.select_at(&flow).unwrap();
    m.attach(&mut flow, &plan, SimTime::ZERO).unwrap();

    let mut out = Oscillation {
        handovers: Vec::new(),
        bad_attachment_states: 0,
    };
    let check = |m: &Matric, flow: &Flow| {
        let holders = ["a", "b"].iter().filter(|id| m.at(id).unwrap().share_of("f").is_some()).count();
        flow.attachments.len() == 1 && holders == 1
    };
    for tick in 1..=ticks {
        let t = SimTime::from_millis(10 * tick);
        set(&mut m, if (tick / period_ticks).is_multiple_of(2) { "a" } else { "b" });
        if let HandoverDecision::Handover { target } = m.evaluate_handover(&flow, t) {
            m.execute_handover(&mut flow, &target, t).unwrap();
            out.handovers.push(t);
        }
        if !check(&m, &flow) {
            out.bad_attachment_states += 1;
        }
    }
    (out, m.mobility.min_dwell)
}

#[test]
fn criterion_9_handover_stability() {
    let start = Instant::now();
    let (fast, dwell) = oscillate(100, 15_000, 3, 1_000);
    let min_gap = fast
        .handovers
        .windows(2)
        .map(|w| w[1] - w[0])
        .min()
        .unwrap_or(SimTime(u64::MAX));
    // Per dwell-length window: sliding count over handover instants.
    let max_per_dwell = fast
        .handovers
        .iter()
        .map(|&t0| fast.handovers.iter().filter(|&&t| t >= t0 && t < t0 + dwell).count())
        .max()
        .unwrap_or(0);
    let (small, _) = oscillate(1_000, 1_500, 3, 1_000);
    let mut per_second: BTreeMap<u64, usize> = BTreeMap::new();
    for t in &fast.handovers {
        *per_second.entry(t.0 / 1_000_000).or_default() += 1;
    }
    let pass = !fast.handovers.is_empty()
        && min_gap >= dwell
        && max_per_dwell <= 1
        && fast.bad_attachment_states == 0
        && small.handovers.is_empty()
        && small.bad_attachment_states == 0;
    let elapsed = start.elapsed();
    verdict(
        9,
        pass && elapsed < Duration::from_secs(5),
        elapsed,
        &format!(
            "{} handovers in 10 s of 30 ms swaps, min gap {} us vs dwell {} us, max {} per dwell, {} bad attachment states; sub-hysteresis swaps gave {} handovers",
            fast.handovers.len(),
            min_gap.0,
            dwell.0,
            max_per_dwell,
            fast.bad_attachment_states,
            small.handovers.len()
        ),
    );
}
