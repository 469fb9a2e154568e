//! Scenario files: network parameters, node roster, scripted actions,
//! the CA's maliciousness oracle, and expected outcomes.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::expect::Expectation;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Ca,
    Owner,
    Redactor,
    #[serde(alias = "witness-capable")]
    Witness,
    Producer,
    Ordinary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Behavior {
    #[default]
    Honest,
    /// Sends requests its certificate does not authorize.
    UnauthorizedRedactor,
    /// Presents a certificate it signed itself.
    CertForger,
    /// Rewrites content but keeps the old opening.
    CollisionSkipper,
    /// As collector, drops every vote.
    SilentCollector,
    /// Rebroadcasts approvals it has seen after the group changes.
    StaleApprovalReplayer,
    /// Approves flagged-malicious requests that pass review.
    MaliciousQuorum,
    /// Sends each vote twice.
    DoubleVoter,
}

impl Behavior {
    pub fn is_honest(self) -> bool {
        self == Behavior::Honest
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub name: String,
    pub roles: BTreeSet<Role>,
    /// Lottery trials per election; stands in for hash power.
    #[serde(default)]
    pub trial_budget: u64,
    #[serde(default)]
    pub behavior: Behavior,
    /// Certified by the CA at setup, together with the node's identity
    /// attribute.
    #[serde(default)]
    pub attributes: Vec<String>,
}

impl NodeSpec {
    pub fn has(&self, role: Role) -> bool {
        self.roles.contains(&role)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainParams {
    /// Leading zero bits required of a block hash.
    pub block_bits: u32,
    /// A block is produced every this many slots.
    pub block_interval: u64,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self { block_bits: 8, block_interval: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WitnessParams {
    /// Leading zero bits required of a lottery hash.
    pub tv_bits: u32,
    pub epoch_len: u64,
    pub sp_len: u64,
    pub wgn: usize,
    /// `[numerator, denominator]`.
    pub ts_fraction: [u64; 2],
}

impl Default for WitnessParams {
    fn default() -> Self {
        Self { tv_bits: 6, epoch_len: 60, sp_len: 10, wgn: 20, ts_fraction: [2, 3] }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EconomyParams {
    pub initial_balance: u64,
    pub deposit: u64,
    /// Slots after a term ends before deposits unlock. Defaults to two
    /// epochs.
    pub unlock_delay: Option<u64>,
    pub reward_share: [u64; 2],
    /// Slots the collector waits for votes.
    pub vote_deadline: u64,
}

impl Default for EconomyParams {
    fn default() -> Self {
        Self { initial_balance: 1000, deposit: 100, unlock_delay: None, reward_share: [1, 2], vote_deadline: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Action {
    /// Publish a transaction. Without a policy it is immutable. `@name`
    /// in a policy stands for that node's identity attribute.
    SubmitTx {
        at: u64,
        by: String,
        label: String,
        content: String,
        #[serde(default)]
        policy: Option<String>,
    },
    Redact {
        at: u64,
        by: String,
        label: String,
        target: String,
        content: String,
        #[serde(default)]
        policy: Option<String>,
        fee: u64,
    },
    /// Report the approved redaction produced by request `request`.
    Report { at: u64, by: String, request: String },
    /// Rebroadcast the approval of `request`.
    Replay { at: u64, by: String, request: String },
}

impl Action {
    pub fn at(&self) -> u64 {
        match self {
            Action::SubmitTx { at, .. } | Action::Redact { at, .. } | Action::Report { at, .. } | Action::Replay { at, .. } => *at,
        }
    }

    pub fn by(&self) -> &str {
        match self {
            Action::SubmitTx { by, .. } | Action::Redact { by, .. } | Action::Report { by, .. } | Action::Replay { by, .. } => by,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub seed: u64,
    /// Last slot at which timers and actions fire.
    pub end_slot: u64,
    #[serde(default)]
    pub chain: ChainParams,
    #[serde(default)]
    pub witness: WitnessParams,
    #[serde(default)]
    pub economy: EconomyParams,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub actions: Vec<Action>,
    /// Request labels the CA judges malicious when reported.
    #[serde(default)]
    pub malicious: BTreeSet<String>,
    #[serde(default)]
    pub expect: Vec<Expectation>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn unlock_delay(&self) -> u64 {
        self.economy.unlock_delay.unwrap_or(2 * self.witness.epoch_len)
    }

    pub fn node(&self, name: &str) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut names = BTreeSet::new();
        for n in &self.nodes {
            if n.name.is_empty() || n.name.starts_with('@') {
                return invalid(format!("bad node name {:?}", n.name));
            }
            if !names.insert(n.name.as_str()) {
                return invalid(format!("duplicate node {}", n.name));
            }
            if n.roles.is_empty() {
                return invalid(format!("node {} has no roles", n.name));
            }
            if n.has(Role::Witness) && n.trial_budget == 0 {
                return invalid(format!("witness {} needs a trial_budget", n.name));
            }
        }
        let cas = self.nodes.iter().filter(|n| n.has(Role::Ca)).count();
        if cas != 1 {
            return invalid(format!("exactly one ca required, found {cas}"));
        }
        if !self.nodes.iter().any(|n| n.has(Role::Producer)) {
            return invalid("no producer");
        }
        let w = &self.witness;
        if w.ts_fraction[1] == 0 || w.sp_len >= w.epoch_len || w.wgn == 0 {
            return invalid("witness parameters out of range");
        }
        if self.chain.block_interval == 0 || !(1..=24).contains(&self.chain.block_bits) {
            return invalid("chain parameters out of range");
        }
        if !(1..=24).contains(&w.tv_bits) || w.tv_bits >= self.chain.block_bits {
            return invalid("tv_bits must be positive and below block_bits");
        }
        if self.economy.reward_share[1] == 0 || self.economy.reward_share[0] > self.economy.reward_share[1] {
            return invalid("reward_share must be a fraction in [0, 1]");
        }
        let mut txs = BTreeMap::new();
        let mut requests = BTreeSet::new();
        let mut actions: Vec<&Action> = self.actions.iter().collect();
        actions.sort_by_key(|a| a.at());
        for a in actions {
            if !names.contains(a.by()) {
                return invalid(format!("action by unknown node {}", a.by()));
            }
            if a.at() == 0 || a.at() > self.end_slot {
                return invalid(format!("action at slot {} outside 1..={}", a.at(), self.end_slot));
            }
            match a {
                Action::SubmitTx { label, content, policy, .. } => {
                    if content.is_empty() || txs.insert(label.as_str(), policy.is_some()).is_some() {
                        return invalid(format!("tx {label}: empty content or duplicate label"));
                    }
                }
                Action::Redact { label, target, fee, .. } => {
                    if txs.get(target.as_str()) != Some(&true) {
                        return invalid(format!("request {label}: unknown or immutable target {target}"));
                    }
                    if *fee == 0 || !requests.insert(label.as_str()) {
                        return invalid(format!("request {label}: zero fee or duplicate label"));
                    }
                }
                Action::Report { request, .. } | Action::Replay { request, .. } => {
                    if !requests.contains(request.as_str()) {
                        return invalid(format!("unknown request {request}"));
                    }
                }
            }
        }
        if let Some(m) = self.malicious.iter().find(|m| !requests.contains(m.as_str())) {
            return invalid(format!("malicious flag on unknown request {m}"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> serde_json::Value {
        serde_json::json!({
            "name": "m", "seed": 1, "end_slot": 30,
            "nodes": [
                {"name": "ca", "roles": ["ca", "producer"]},
                {"name": "w", "roles": ["witness-capable"], "trial_budget": 10}
            ],
            "actions": [
                {"kind": "submit-tx", "at": 2, "by": "ca", "label": "t", "content": "x", "policy": "A"},
                {"kind": "redact", "at": 9, "by": "ca", "label": "r", "target": "t", "content": "y", "fee": 1}
            ]
        })
    }

    fn check(edit: impl FnOnce(&mut serde_json::Value)) -> Result<Scenario, ScenarioError> {
        let mut v = minimal();
        edit(&mut v);
        Scenario::from_json(&v.to_string())
    }

    #[test]
    fn minimal_is_valid() {
        let s = check(|_| {}).unwrap();
        assert!(s.node("w").unwrap().has(Role::Witness));
        assert_eq!(s.unlock_delay(), 120);
    }

    #[test]
    fn rejects_bad_scenarios() {
        assert!(check(|v| v["nodes"][1]["roles"] = serde_json::json!(["ca"])).is_err());
        assert!(check(|v| v["nodes"][1]["trial_budget"] = 0.into()).is_err());
        assert!(check(|v| v["actions"][1]["fee"] = 0.into()).is_err());
        assert!(check(|v| v["actions"][1]["at"] = 31.into()).is_err());
        assert!(check(|v| v["actions"][1]["target"] = "nope".into()).is_err());
        assert!(check(|v| v["malicious"] = serde_json::json!(["nope"])).is_err());
        assert!(check(|v| v["witness"] = serde_json::json!({"tv_bits": 8})).is_err());
        assert!(matches!(check(|v| v["bogus"] = 1.into()), Err(ScenarioError::Parse(_))));
    }
}
