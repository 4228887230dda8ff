//! Per-domain orchestration: service chain placement on compute nodes,
//! usage profiling, scaling and capability advertisement.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::access::{AccessTech, PowerModel};
use crate::inter::{CapabilityRecord, KpiRequirementSet};

pub const EXHAUSTIVE_LIMIT: u64 = 100_000;
pub const SCALE_UP_ABOVE: f64 = 0.8;
pub const SCALE_DOWN_BELOW: f64 = 0.3;
pub const SCALE_TARGET: f64 = 1.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntraError {
    #[error("no feasible placement for chain {0}")]
    NoFeasiblePlacement(String),
    #[error("no compute nodes")]
    NoNodes,
    #[error("usage history is empty")]
    EmptyHistory,
    #[error("smoothing factor {0} outside (0, 1]")]
    InvalidAlpha(f64),
    #[error("invalid service chain {id}: {reason}")]
    InvalidChain { id: String, reason: String },
    #[error("unknown compute node {0}")]
    UnknownNode(String),
    #[error("unknown service chain {0}")]
    UnknownChain(String),
    #[error("chain {0} already deployed")]
    AlreadyDeployed(String),
    #[error("node {node} cannot hold {cpu} cpu / {mem} MB more")]
    Overcommit { node: String, cpu: u32, mem: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Edge,
    Core,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputeNode {
    pub id: String,
    pub tier: Tier,
    pub cpu_units: u32,
    pub mem_mb: u64,
    pub power: PowerModel,
    #[serde(skip)]
    committed_cpu: u32,
    #[serde(skip)]
    committed_mem: u64,
}

impl ComputeNode {
    pub fn new(id: impl Into<String>, tier: Tier, cpu_units: u32, mem_mb: u64, power: PowerModel) -> Self {
        ComputeNode {
            id: id.into(),
            tier,
            cpu_units,
            mem_mb,
            power,
            committed_cpu: 0,
            committed_mem: 0,
        }
    }

    pub fn committed(&self) -> (u32, u64) {
        (self.committed_cpu, self.committed_mem)
    }

    pub fn headroom(&self) -> (u32, u64) {
        (
            self.cpu_units - self.committed_cpu,
            self.mem_mb - self.committed_mem,
        )
    }

    pub fn cpu_load(&self) -> f64 {
        if self.cpu_units == 0 {
            0.0
        } else {
            self.committed_cpu as f64 / self.cpu_units as f64
        }
    }

    pub fn power_w(&self) -> f64 {
        self.power.active_power(self.cpu_load())
    }

    pub fn commit(&mut self, cpu: u32, mem: u64) -> Result<(), IntraError> {
        let (hc, hm) = self.headroom();
        if cpu > hc || mem > hm {
            return Err(IntraError::Overcommit {
                node: self.id.clone(),
                cpu,
                mem,
            });
        }
        self.committed_cpu += cpu;
        self.committed_mem += mem;
        assert!(self.conserved(), "compute capacity exceeded on {}", self.id);
        Ok(())
    }

    /// Returns resources; saturates at zero.
    pub fn release(&mut self, cpu: u32, mem: u64) {
        self.committed_cpu = self.committed_cpu.saturating_sub(cpu);
        self.committed_mem = self.committed_mem.saturating_sub(mem);
    }

    pub fn conserved(&self) -> bool {
        self.committed_cpu <= self.cpu_units && self.committed_mem <= self.mem_mb
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceFunction {
    pub cpu_units: u32,
    pub mem_mb: u64,
    pub egress_bps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceChain {
    pub id: String,
    pub functions: Vec<ServiceFunction>,
    pub kpi: KpiRequirementSet,
}

impl ServiceChain {
    pub fn validate(&self) -> Result<(), IntraError> {
        let bad = |reason: &str| IntraError::InvalidChain {
            id: self.id.clone(),
            reason: reason.into(),
        };
        if self.functions.is_empty() {
            return Err(bad("no functions"));
        }
        if self
            .functions
            .iter()
            .any(|f| f.cpu_units == 0 || f.mem_mb == 0 || f.egress_bps == 0)
        {
            return Err(bad("function requirements must be positive"));
        }
        Ok(())
    }

    pub fn total_cpu(&self) -> u32 {
        self.functions.iter().map(|f| f.cpu_units).sum()
    }

    pub fn total_mem(&self) -> u64 {
        self.functions.iter().map(|f| f.mem_mb).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementConfig {
    /// Watts per microsecond of estimated latency.
    pub lambda: f64,
    /// Latency added whenever consecutive functions sit on different nodes.
    pub inter_node_latency_us: u64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        PlacementConfig {
            lambda: 0.001,
            inter_node_latency_us: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementPlan {
    pub chain: String,
    /// Node id per function index.
    pub assignments: Vec<String>,
    pub est_latency_us: u64,
    pub est_power_w: f64,
    pub cost: f64,
    pub exhaustive: bool,
}

/// Marginal power and latency of putting function `i` on `nodes[a[i]]`,
/// or `None` when some node would overflow. Nodes are visited in slice
/// order when summing power.
fn evaluate(
    chain: &ServiceChain,
    nodes: &[&ComputeNode],
    a: &[usize],
    cfg: &PlacementConfig,
) -> Option<(f64, u64)> {
    let mut cpu = vec![0u32; nodes.len()];
    let mut mem = vec![0u64; nodes.len()];
    for (f, &n) in chain.functions.iter().zip(a) {
        cpu[n] += f.cpu_units;
        mem[n] += f.mem_mb;
    }
    let mut power = 0.0;
    for (n, node) in nodes.iter().enumerate() {
        let (hc, hm) = node.headroom();
        if cpu[n] > hc || mem[n] > hm {
            return None;
        }
        if cpu[n] == 0 && mem[n] == 0 {
            continue;
        }
        let span = node.power.p_max_w - node.power.p_idle_w;
        power += span * cpu[n] as f64 / node.cpu_units as f64;
        if node.committed().0 == 0 {
            power += node.power.p_idle_w;
        }
    }
    let hops = a.windows(2).filter(|w| w[0] != w[1]).count() as u64;
    Some((power, hops * cfg.inter_node_latency_us))
}

fn plan_from(
    chain: &ServiceChain,
    nodes: &[&ComputeNode],
    a: &[usize],
    cfg: &PlacementConfig,
    exhaustive: bool,
) -> Option<PlacementPlan> {
    let (power, latency) = evaluate(chain, nodes, a, cfg)?;
    Some(PlacementPlan {
        chain: chain.id.clone(),
        assignments: a.iter().map(|&n| nodes[n].id.clone()).collect(),
        est_latency_us: latency,
        est_power_w: power,
        cost: power + cfg.lambda * latency as f64,
        exhaustive,
    })
}

/// Minimum-cost placement, exhaustive when the search space is at most
/// `EXHAUSTIVE_LIMIT` assignments and first-fit-decreasing otherwise.
/// Cost is marginal power plus `lambda` times estimated latency; ties go
/// to the lexicographically smallest assignment of node ids.
pub fn place_service(
    chain: &ServiceChain,
    nodes: &[ComputeNode],
    cfg: &PlacementConfig,
) -> Result<PlacementPlan, IntraError> {
    if nodes.is_empty() {
        return Err(IntraError::NoNodes);
    }
    chain.validate()?;
    let mut sorted: Vec<&ComputeNode> = nodes.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let k = chain.functions.len();
    let space = (sorted.len() as u64).checked_pow(k as u32);
    let plan = match space {
        Some(s) if s <= EXHAUSTIVE_LIMIT => exhaustive(chain, &sorted, cfg),
        _ => first_fit_decreasing(chain, &sorted, cfg),
    };
    plan.ok_or_else(|| IntraError::NoFeasiblePlacement(chain.id.clone()))
}

fn exhaustive(chain: &ServiceChain, nodes: &[&ComputeNode], cfg: &PlacementConfig) -> Option<PlacementPlan> {
    let k = chain.functions.len();
    let mut a = vec![0usize; k];
    let mut best: Option<PlacementPlan> = None;
    loop {
        if let Some(p) = plan_from(chain, nodes, &a, cfg, true) {
            // Odometer order is lexicographic, so strict improvement keeps
            // the smallest assignment among equal costs.
            if best.as_ref().is_none_or(|b| p.cost < b.cost) {
                best = Some(p);
            }
        }
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            a[i] += 1;
            if a[i] < nodes.len() {
                break;
            }
            a[i] = 0;
        }
    }
}

fn first_fit_decreasing(
    chain: &ServiceChain,
    nodes: &[&ComputeNode],
    cfg: &PlacementConfig,
) -> Option<PlacementPlan> {
    let mut order: Vec<usize> = (0..chain.functions.len()).collect();
    order.sort_by(|&x, &y| chain.functions[y].cpu_units.cmp(&chain.functions[x].cpu_units));
    let mut free: Vec<(u32, u64)> = nodes.iter().map(|n| n.headroom()).collect();
    let mut a = vec![0usize; order.len()];
    for i in order {
        let f = &chain.functions[i];
        let n = free
            .iter()
            .position(|&(c, m)| c >= f.cpu_units && m >= f.mem_mb)?;
        free[n].0 -= f.cpu_units;
        free[n].1 -= f.mem_mb;
        a[i] = n;
    }
    plan_from(chain, nodes, &a, cfg, false)
}

/// Observed resource usage of one chain over one profiling period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Usage {
    pub cpu_units: f64,
    pub mem_mb: f64,
    pub egress_bps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub predicted: Usage,
    pub alpha: f64,
}

/// Per-dimension EWMA with `s_0 = x_0`.
pub fn profile_predict(history: &[Usage], alpha: f64) -> Result<Profile, IntraError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(IntraError::InvalidAlpha(alpha));
    }
    let (first, rest) = history.split_first().ok_or(IntraError::EmptyHistory)?;
    let ewma = |s: f64, x: f64| alpha * x + (1.0 - alpha) * s;
    let predicted = rest.iter().fold(*first, |s, x| Usage {
        cpu_units: ewma(s.cpu_units, x.cpu_units),
        mem_mb: ewma(s.mem_mb, x.mem_mb),
        egress_bps: ewma(s.egress_bps, x.egress_bps),
    });
    Ok(Profile { predicted, alpha })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Cpu,
    Mem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ScaleAction {
    ScaleUp { dim: Dimension, target: f64 },
    ScaleDown { dim: Dimension, target: f64 },
    Replace { dim: Dimension },
}

/// Headroom summed over the distinct nodes a plan uses.
fn plan_headroom(plan: &PlacementPlan, nodes: &[ComputeNode]) -> (u64, u64) {
    let used: BTreeSet<&str> = plan.assignments.iter().map(String::as_str).collect();
    nodes
        .iter()
        .filter(|n| used.contains(n.id.as_str()))
        .map(|n| n.headroom())
        .fold((0, 0), |(c, m), (hc, hm)| (c + hc as u64, m + hm))
}

/// Hysteresis-band scaling per dimension: above 0.8× allocation grow to
/// 1.25× prediction (capped by headroom on the plan's nodes, or re-place
/// when there is none); below 0.3× shrink to 1.25× prediction.
pub fn scale_service(
    chain: &ServiceChain,
    profile: &Profile,
    plan: &PlacementPlan,
    nodes: &[ComputeNode],
) -> Vec<ScaleAction> {
    let (head_cpu, head_mem) = plan_headroom(plan, nodes);
    let dims = [
        (Dimension::Cpu, chain.total_cpu() as f64, profile.predicted.cpu_units, head_cpu),
        (Dimension::Mem, chain.total_mem() as f64, profile.predicted.mem_mb, head_mem),
    ];
    let mut out = Vec::new();
    for (dim, allocated, predicted, headroom) in dims {
        let target = SCALE_TARGET * predicted;
        if predicted > SCALE_UP_ABOVE * allocated {
            if headroom == 0 {
                out.push(ScaleAction::Replace { dim });
            } else if target > allocated {
                out.push(ScaleAction::ScaleUp {
                    dim,
                    target: target.min(allocated + headroom as f64),
                });
            }
        } else if predicted < SCALE_DOWN_BELOW * allocated {
            out.push(ScaleAction::ScaleDown { dim, target });
        }
    }
    out
}

/// Whole units for a fractional target, tolerant of rounding noise.
pub fn whole_units(target: f64) -> u64 {
    (target - 1e-9).ceil().max(1.0) as u64
}

/// Free capacity, best latency, reliability floor and zones of a domain's
/// access technologies. Sleeping ATs count as available capacity since
/// they are woken on demand.
pub fn advertise_capabilities<'a>(
    domain: &str,
    ats: impl IntoIterator<Item = &'a AccessTech>,
    unit_cost: f64,
) -> CapabilityRecord {
    let ats: Vec<&AccessTech> = ats.into_iter().collect();
    let free_bps = ats.iter().map(|a| a.headroom_bps()).sum();
    let active_min = ats
        .iter()
        .filter(|a| a.is_active())
        .map(|a| a.base_latency_us)
        .min();
    let min_latency_us = active_min
        .or_else(|| ats.iter().map(|a| a.base_latency_us).min())
        .unwrap_or(0);
    let reliability_floor = ats
        .iter()
        .map(|a| 1.0 - a.per_error_rate)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |m| m.min(r))))
        .unwrap_or(0.0);
    let prefixes: BTreeSet<String> = ats.iter().flat_map(|a| a.coverage.iter().cloned()).collect();
    CapabilityRecord {
        domain: domain.to_string(),
        free_bps,
        min_latency_us,
        reliability_floor,
        unit_cost,
        prefixes: prefixes.into_iter().collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deployment {
    pub chain: ServiceChain,
    pub plan: PlacementPlan,
    #[serde(skip)]
    pub history: Vec<Usage>,
}

/// Per-domain orchestrator owning the domain's compute nodes.
#[derive(Debug, Clone)]
pub struct IntraOrchestrator {
    pub domain: String,
    nodes: Vec<ComputeNode>,
    deployments: BTreeMap<String, Deployment>,
    pub placement: PlacementConfig,
    pub alpha: f64,
    /// Sliding profiling history length.
    pub history_len: usize,
}

impl IntraOrchestrator {
    pub fn new(domain: impl Into<String>, mut nodes: Vec<ComputeNode>) -> Self {
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        IntraOrchestrator {
            domain: domain.into(),
            nodes,
            deployments: BTreeMap::new(),
            placement: PlacementConfig::default(),
            alpha: 0.5,
            history_len: 16,
        }
    }

    pub fn nodes(&self) -> &[ComputeNode] {
        &self.nodes
    }

    pub fn deployments(&self) -> impl Iterator<Item = &Deployment> {
        self.deployments.values()
    }

    pub fn deployment(&self, chain: &str) -> Option<&Deployment> {
        self.deployments.get(chain)
    }

    fn node_mut(&mut self, id: &str) -> Result<&mut ComputeNode, IntraError> {
        self.nodes
            .iter_mut()
            .find(|n| n.id == id)
            .ok_or_else(|| IntraError::UnknownNode(id.to_string()))
    }

    fn commit_plan(&mut self, chain: &ServiceChain, plan: &PlacementPlan) -> Result<(), IntraError> {
        for (f, node) in chain.functions.iter().zip(&plan.assignments) {
            self.node_mut(node)?.commit(f.cpu_units, f.mem_mb)?;
        }
        Ok(())
    }

    fn release_plan(&mut self, chain: &ServiceChain, plan: &PlacementPlan) -> Result<(), IntraError> {
        for (f, node) in chain.functions.iter().zip(&plan.assignments) {
            self.node_mut(node)?.release(f.cpu_units, f.mem_mb);
        }
        Ok(())
    }

    pub fn deploy(&mut self, chain: ServiceChain) -> Result<PlacementPlan, IntraError> {
        if self.deployments.contains_key(&chain.id) {
            return Err(IntraError::AlreadyDeployed(chain.id));
        }
        let plan = place_service(&chain, &self.nodes, &self.placement)?;
        self.commit_plan(&chain, &plan)?;
        self.deployments.insert(
            chain.id.clone(),
            Deployment {
                chain,
                plan: plan.clone(),
                history: Vec::new(),
            },
        );
        Ok(plan)
    }

    pub fn undeploy(&mut self, chain_id: &str) -> Result<(), IntraError> {
        let d = self
            .deployments
            .remove(chain_id)
            .ok_or_else(|| IntraError::UnknownChain(chain_id.to_string()))?;
        self.release_plan(&d.chain, &d.plan)
    }

    pub fn observe(&mut self, chain_id: &str, usage: Usage) -> Result<(), IntraError> {
        let len = self.history_len.max(1);
        let d = self
            .deployments
            .get_mut(chain_id)
            .ok_or_else(|| IntraError::UnknownChain(chain_id.to_string()))?;
        if d.history.len() == len {
            d.history.remove(0);
        }
        d.history.push(usage);
        Ok(())
    }

    /// Profiles a deployed chain, decides scaling actions and applies them.
    /// Returns the actions taken.
    pub fn autoscale(&mut self, chain_id: &str) -> Result<Vec<ScaleAction>, IntraError> {
        let d = self
            .deployments
            .get(chain_id)
            .ok_or_else(|| IntraError::UnknownChain(chain_id.to_string()))?;
        if d.history.is_empty() {
            return Ok(Vec::new());
        }
        let profile = profile_predict(&d.history, self.alpha)?;
        let actions = scale_service(&d.chain, &profile, &d.plan, &self.nodes);
        for a in &actions {
            self.apply(chain_id, a)?;
        }
        Ok(actions)
    }

    fn apply(&mut self, chain_id: &str, action: &ScaleAction) -> Result<(), IntraError> {
        let mut d = self
            .deployments
            .remove(chain_id)
            .ok_or_else(|| IntraError::UnknownChain(chain_id.to_string()))?;
        let res = match action {
            ScaleAction::ScaleUp { dim, target } => self.grow(&mut d, *dim, whole_units(*target)),
            ScaleAction::ScaleDown { dim, target } => {
                self.shrink(&mut d, *dim, whole_units(*target));
                Ok(())
            }
            ScaleAction::Replace { .. } => self.replace(&mut d),
        };
        self.deployments.insert(chain_id.to_string(), d);
        res
    }

    /// Adds capacity function by function on each function's own node.
    fn grow(&mut self, d: &mut Deployment, dim: Dimension, target: u64) -> Result<(), IntraError> {
        let total = match dim {
            Dimension::Cpu => d.chain.total_cpu() as u64,
            Dimension::Mem => d.chain.total_mem(),
        };
        let mut need = target.saturating_sub(total);
        for (f, node_id) in d.chain.functions.iter_mut().zip(&d.plan.assignments) {
            if need == 0 {
                break;
            }
            let node = self
                .nodes
                .iter_mut()
                .find(|n| &n.id == node_id)
                .ok_or_else(|| IntraError::UnknownNode(node_id.clone()))?;
            let (hc, hm) = node.headroom();
            match dim {
                Dimension::Cpu => {
                    let add = need.min(hc as u64) as u32;
                    node.commit(add, 0)?;
                    f.cpu_units += add;
                    need -= add as u64;
                }
                Dimension::Mem => {
                    let add = need.min(hm);
                    node.commit(0, add)?;
                    f.mem_mb += add;
                    need -= add;
                }
            }
        }
        Ok(())
    }

    /// Takes capacity back from the last functions first, keeping every
    /// function at one unit or more.
    fn shrink(&mut self, d: &mut Deployment, dim: Dimension, target: u64) {
        let total = match dim {
            Dimension::Cpu => d.chain.total_cpu() as u64,
            Dimension::Mem => d.chain.total_mem(),
        };
        let mut excess = total.saturating_sub(target);
        for (f, node_id) in d.chain.functions.iter_mut().zip(&d.plan.assignments).rev() {
            if excess == 0 {
                break;
            }
            let Some(node) = self.nodes.iter_mut().find(|n| &n.id == node_id) else {
                continue;
            };
            match dim {
                Dimension::Cpu => {
                    let cut = excess.min(f.cpu_units as u64 - 1) as u32;
                    node.release(cut, 0);
                    f.cpu_units -= cut;
                    excess -= cut as u64;
                }
                Dimension::Mem => {
                    let cut = excess.min(f.mem_mb - 1);
                    node.release(0, cut);
                    f.mem_mb -= cut;
                    excess -= cut;
                }
            }
        }
    }

    /// Re-places the chain from scratch; keeps the old plan when no better
    /// placement exists.
    fn replace(&mut self, d: &mut Deployment) -> Result<(), IntraError> {
        self.release_plan(&d.chain, &d.plan)?;
        match place_service(&d.chain, &self.nodes, &self.placement) {
            Ok(plan) => {
                self.commit_plan(&d.chain, &plan)?;
                d.plan = plan;
            }
            Err(_) => self.commit_plan(&d.chain, &d.plan)?,
        }
        Ok(())
    }

    pub fn conserved(&self) -> bool {
        self.nodes.iter().all(ComputeNode::conserved)
    }
}
