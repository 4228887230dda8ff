//! Policy management: rules issued by different parties that filter which
//! domains may serve an intent.

use serde::{Deserialize, Serialize};

use super::{TaskIntent, UseCaseKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Issuer {
    Government,
    Regulator,
    Business,
    Customer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    Allow,
    Deny,
}

/// Predicate over `(intent, domain)`. An absent selector matches anything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyRule {
    pub effect: Effect,
    #[serde(default)]
    pub domains: Option<Vec<String>>,
    #[serde(default)]
    pub kinds: Option<Vec<UseCaseKind>>,
    #[serde(default)]
    pub zones: Option<Vec<String>>,
}

impl PolicyRule {
    pub fn matches(&self, intent: &TaskIntent, domain: &str) -> bool {
        self.domains
            .as_ref()
            .is_none_or(|ds| ds.iter().any(|d| d == domain))
            && self.kinds.as_ref().is_none_or(|ks| ks.contains(&intent.kind))
            && self
                .zones
                .as_ref()
                .is_none_or(|zs| zs.iter().any(|z| z == &intent.zone))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Policy {
    pub id: String,
    pub issuer: Issuer,
    pub rule: PolicyRule,
    pub priority: i64,
}

/// Filters `candidates` through `policies`. Rules are consulted in
/// descending priority and the first matching rule decides; a candidate no
/// rule matches stays admissible.
pub fn apply_policies(candidates: &[String], intent: &TaskIntent, policies: &[Policy]) -> Vec<String> {
    let mut ordered: Vec<&Policy> = policies.iter().collect();
    ordered.sort_by(|a, b| b.priority.cmp(&a.priority).then_with(|| a.id.cmp(&b.id)));
    candidates
        .iter()
        .filter(|d| {
            ordered
                .iter()
                .find(|p| p.rule.matches(intent, d))
                .is_none_or(|p| p.rule.effect == Effect::Allow)
        })
        .cloned()
        .collect()
}

/// Priorities must be unique within a policy set.
pub fn duplicate_priority(policies: &[Policy]) -> Option<i64> {
    let mut seen = std::collections::BTreeSet::new();
    policies.iter().map(|p| p.priority).find(|p| !seen.insert(*p))
}
