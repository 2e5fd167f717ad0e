//! JSON instance files.
//!
//! ```json
//! {
//!   "tasks": [0],
//!   "agents": [0, 1, 2],
//!   "trust_model": {"kind": "weighted_sum", "weights": [0.0, 0.5, 0.5]},
//!   "valuations": [{"requester": 0, "atoms": [{"bundle": [0], "value": 1.0}]}],
//!   "bids": [{"performer": 1, "atoms": [{"bundle": [0], "cost": 0.0}]}],
//!   "eqos": [{"reporter": 1, "entries": [{"performer": 1, "task": 0, "value": 0.6}]}],
//!   "free_disposal": false,
//!   "eqos_domain": [0.0, 1.0]
//! }
//! ```
//!
//! `weights` align with `agents`. Other trust kinds: `uniform` (the default
//! when `trust_model` is absent) and `self_report`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trust::{TrustKind, TrustModel};
use crate::types::{
    validate_report_profile, AgentId, BidAtom, EqosDomain, EqosMatrix, ReportProfile, TaskId, TaskSet, ValuationMap,
    Violation,
};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    tasks: Vec<TaskId>,
    agents: Vec<AgentId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trust_model: Option<RawTrust>,
    #[serde(default)]
    valuations: Vec<RawValuation>,
    #[serde(default)]
    bids: Vec<RawBids>,
    #[serde(default)]
    eqos: Vec<RawEqos>,
    #[serde(default)]
    free_disposal: bool,
    #[serde(default = "default_domain")]
    eqos_domain: [f64; 2],
}

fn default_domain() -> [f64; 2] {
    [0.0, 1.0]
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawTrust {
    WeightedSum {
        weights: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        monotone: Option<bool>,
    },
    Uniform,
    SelfReport,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawValuation {
    requester: AgentId,
    atoms: Vec<RawValueAtom>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawValueAtom {
    bundle: TaskSet,
    value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBids {
    performer: AgentId,
    atoms: Vec<RawCostAtom>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCostAtom {
    bundle: TaskSet,
    cost: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEqos {
    reporter: AgentId,
    entries: Vec<RawEqosEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEqosEntry {
    performer: AgentId,
    task: TaskId,
    value: f64,
}

/// A report profile together with its trust model.
#[derive(Clone, Debug)]
pub struct InstanceFile {
    pub profile: ReportProfile,
    pub trust_model: TrustModel,
}

impl InstanceFile {
    /// Parses and validates; any violation is an error.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawInstance = serde_json::from_str(text)?;
        let mut violations = Vec::new();

        let mut valuations = Vec::new();
        for v in raw.valuations {
            let mut vmap = ValuationMap::new(v.requester);
            for a in v.atoms {
                if vmap.entries.insert(a.bundle, a.value).is_some() {
                    violations.push(Violation::DuplicateBundle { agent: v.requester, bundle: a.bundle });
                }
            }
            valuations.push(vmap);
        }
        let bids: Vec<BidAtom> = raw
            .bids
            .into_iter()
            .flat_map(|b| b.atoms.into_iter().map(move |a| BidAtom { performer: b.performer, bundle: a.bundle, cost: a.cost }))
            .collect();
        let mut eqos = Vec::new();
        for m in raw.eqos {
            let mut matrix = EqosMatrix::new(m.reporter);
            let mut seen = BTreeSet::new();
            for e in m.entries {
                if !seen.insert((e.performer, e.task)) {
                    return Err(Error::Config(format!(
                        "{} rates {} on {} twice",
                        m.reporter, e.performer, e.task
                    )));
                }
                matrix.set(e.performer, e.task, e.value);
            }
            eqos.push(matrix);
        }
        let profile = ReportProfile {
            agents: raw.agents,
            tasks: raw.tasks,
            valuations,
            bids,
            eqos,
            free_disposal: raw.free_disposal,
            eqos_domain: EqosDomain { lo: raw.eqos_domain[0], hi: raw.eqos_domain[1] },
        };
        violations.extend(validate_report_profile(&profile));
        if !violations.is_empty() {
            return Err(Error::InvalidProfile(violations));
        }
        let trust_model = match raw.trust_model.unwrap_or(RawTrust::Uniform) {
            RawTrust::Uniform => TrustModel::uniform(&profile.agents)?,
            RawTrust::SelfReport => TrustModel::self_report(),
            RawTrust::WeightedSum { weights, monotone } => {
                if weights.len() != profile.agents.len() {
                    return Err(Error::Config(format!(
                        "{} trust weights for {} agents",
                        weights.len(),
                        profile.agents.len()
                    )));
                }
                let mut model = TrustModel::weighted_sum(profile.agents.iter().copied().zip(weights).collect())?;
                if let Some(m) = monotone {
                    model.monotone = m;
                }
                model
            }
        };
        Ok(InstanceFile { profile, trust_model })
    }

    pub fn to_json(&self) -> Result<String> {
        let p = &self.profile;
        let trust_model = match &self.trust_model.kind {
            TrustKind::WeightedSum(w) => {
                let known: BTreeSet<&AgentId> = p.agents.iter().collect();
                if let Some(a) = w.keys().find(|a| !known.contains(a)) {
                    return Err(Error::Config(format!("trust weight for {a}, who is not listed as an agent")));
                }
                RawTrust::WeightedSum {
                    weights: p.agents.iter().map(|a| w.get(a).copied().unwrap_or(0.0)).collect(),
                    monotone: (!self.trust_model.monotone).then_some(false),
                }
            }
            TrustKind::Custom(rule) if rule.name() == "self_report" => RawTrust::SelfReport,
            TrustKind::Custom(rule) => {
                return Err(Error::Config(format!("trust rule '{}' cannot be written to JSON", rule.name())))
            }
        };
        let mut bids: BTreeMap<AgentId, Vec<RawCostAtom>> = BTreeMap::new();
        for b in &p.bids {
            bids.entry(b.performer).or_default().push(RawCostAtom { bundle: b.bundle, cost: b.cost });
        }
        let raw = RawInstance {
            tasks: p.tasks.clone(),
            agents: p.agents.clone(),
            trust_model: Some(trust_model),
            valuations: p
                .valuations
                .iter()
                .map(|v| RawValuation {
                    requester: v.requester,
                    atoms: v.atoms().map(|a| RawValueAtom { bundle: a.bundle, value: a.value }).collect(),
                })
                .collect(),
            bids: bids.into_iter().map(|(performer, atoms)| RawBids { performer, atoms }).collect(),
            eqos: p
                .eqos
                .iter()
                .map(|m| RawEqos {
                    reporter: m.reporter,
                    entries: m
                        .entries
                        .iter()
                        .map(|(&(performer, task), &value)| RawEqosEntry { performer, task, value })
                        .collect(),
                })
                .collect(),
            free_disposal: p.free_disposal,
            eqos_domain: [p.eqos_domain.lo, p.eqos_domain.hi],
        };
        let mut s = serde_json::to_string_pretty(&raw)?;
        s.push('\n');
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE2: &str = r#"{
      "tasks": [0],
      "agents": [0, 1, 2],
      "trust_model": {"kind": "weighted_sum", "weights": [0.0, 0.5, 0.5]},
      "valuations": [{"requester": 0, "atoms": [{"bundle": [0], "value": 1.0}]}],
      "bids": [
        {"performer": 1, "atoms": [{"bundle": [0], "cost": 0.0}]},
        {"performer": 2, "atoms": [{"bundle": [0], "cost": 0.0}]}
      ],
      "eqos": [
        {"reporter": 0, "entries": [{"performer": 1, "task": 0, "value": 0.7}, {"performer": 2, "task": 0, "value": 0.8}]},
        {"reporter": 1, "entries": [{"performer": 1, "task": 0, "value": 0.6}, {"performer": 2, "task": 0, "value": 1.0}]},
        {"reporter": 2, "entries": [{"performer": 1, "task": 0, "value": 0.8}, {"performer": 2, "task": 0, "value": 0.6}]}
      ]
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let f = InstanceFile::from_json(TABLE2).unwrap();
        assert_eq!(f.profile.agents.len(), 3);
        assert!(!f.profile.free_disposal);
        let again = InstanceFile::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(again.profile, f.profile);
        assert_eq!(again.to_json().unwrap(), f.to_json().unwrap());
    }

    #[test]
    fn duplicate_value_bundle_is_a_violation() {
        let text = TABLE2.replace(
            r#"[{"bundle": [0], "value": 1.0}]"#,
            r#"[{"bundle": [0], "value": 1.0}, {"bundle": [0], "value": 2.0}]"#,
        );
        match InstanceFile::from_json(&text) {
            Err(Error::InvalidProfile(v)) => assert!(matches!(v[0], Violation::DuplicateBundle { .. })),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn weights_must_match_agents() {
        let text = TABLE2.replace("[0.0, 0.5, 0.5]", "[0.5, 0.5]");
        assert!(matches!(InstanceFile::from_json(&text), Err(Error::Config(_))));
    }

    #[test]
    fn out_of_range_eqos_rejected() {
        let text = TABLE2.replace(r#""value": 0.6}"#, r#""value": 1.3}"#);
        assert!(matches!(InstanceFile::from_json(&text), Err(Error::InvalidProfile(_))));
    }

    #[test]
    fn malformed_json_is_an_error() {
        assert!(matches!(InstanceFile::from_json("{not json"), Err(Error::Json(_))));
    }
}
