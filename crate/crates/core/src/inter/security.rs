//! Trust and security management: maps assessed risk to a layered control
//! plan (number of independent defense layers and control strength).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskLevel {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlStrength {
    Baseline,
    Hardened,
    Rigorous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecurityControlPlan {
    pub did_layers: u32,
    pub soc_level: ControlStrength,
}

pub fn select_controls(risk: RiskLevel) -> SecurityControlPlan {
    let (did_layers, soc_level) = match risk {
        RiskLevel::Low => (1, ControlStrength::Baseline),
        RiskLevel::Medium => (2, ControlStrength::Hardened),
        RiskLevel::High => (3, ControlStrength::Rigorous),
    };
    SecurityControlPlan {
        did_layers,
        soc_level,
    }
}
