//! Deterministic discrete-event simulator of a multi-domain 6G network:
//! access technologies under per-domain controllers, two-level service
//! orchestration, closed-loop KPI and energy monitoring, and Shapley-based
//! decision attribution.

pub mod access;
pub mod cognition;
pub mod inter;
pub mod intra;
pub mod kernel;
pub mod matric;
pub mod monitoring;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod workloads;
