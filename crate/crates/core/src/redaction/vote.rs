use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::crypto::{ds_sign, ds_verify, PublicKey, SecretKey, Signature};
use crate::encoding::Encoder;
use crate::ledger::{RedactableTransaction, TxIndex};
use crate::witness::WitnessGroup;

use super::RedactionRequest;

/// What every witness signs: the rewritten content and policy, the chameleon
/// opening, the redactor's certificate and signature, the target index, and
/// the approving epoch.
pub fn vote_message(new_tx: &RedactableTransaction, ind: TxIndex, epoch: u64) -> Vec<u8> {
    let mut enc = Encoder::tagged("efrb/vote");
    enc.u64(epoch)
        .bytes(&new_tx.content)
        .str(new_tx.policy.canonical_text())
        .bytes(&new_tx.h.to_bytes())
        .fixed(&new_tx.r.to_bytes());
    if let Some(meta) = &new_tx.redaction {
        meta.redactor_cert.encode_into(&mut enc);
        enc.fixed(&meta.redactor_sig.0);
    }
    ind.encode_into(&mut enc);
    enc.finish()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub witness_pk: PublicKey,
    pub sig: Signature,
}

pub fn cast_vote(witness_sk: &SecretKey, req: &RedactionRequest, epoch: u64) -> Vote {
    Vote {
        witness_pk: witness_sk.public_key(),
        sig: ds_sign(&vote_message(&req.new_tx, req.ind, epoch), witness_sk),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApprovalEntry {
    pub witness_pk: PublicKey,
    pub sig: Signature,
}

/// Witness signatures whose combined weight exceeded the threshold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregatedApproval {
    pub epoch: u64,
    /// Sorted by key, one entry per witness.
    pub entries: Vec<ApprovalEntry>,
    pub claimed_weight: u64,
}

impl AggregatedApproval {
    pub fn encode_into(&self, enc: &mut Encoder) {
        enc.u64(self.epoch).u64(self.entries.len() as u64);
        for e in &self.entries {
            enc.fixed(e.witness_pk.as_bytes()).fixed(&e.sig.0);
        }
        enc.u64(self.claimed_weight);
    }
}

/// Why the collector set a vote aside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IgnoredVote {
    Duplicate,
    UnknownWitness,
    BadSignature,
    AlreadyDecided,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CollectOutcome {
    Approved(AggregatedApproval),
    Pending { weight: u64 },
    Ignored(IgnoredVote),
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CollectorState {
    Open,
    Approved,
    Failed,
}

/// Collector-side tally for a single request.
#[derive(Debug, Clone)]
pub struct VoteCollector {
    epoch: u64,
    message: Vec<u8>,
    weights: BTreeMap<PublicKey, u64>,
    ts_abs: u64,
    deadline: u64,
    received: BTreeMap<PublicKey, Signature>,
    weight: u64,
    state: CollectorState,
    audit: Vec<(PublicKey, IgnoredVote)>,
}

impl VoteCollector {
    /// `deadline` is the last slot at which votes are still counted.
    pub fn new(req: &RedactionRequest, group: &WitnessGroup, deadline: u64) -> Self {
        Self {
            epoch: group.epoch,
            message: vote_message(&req.new_tx, req.ind, group.epoch),
            weights: group.weight_map(),
            ts_abs: group.ts_abs(),
            deadline,
            received: BTreeMap::new(),
            weight: 0,
            state: CollectorState::Open,
            audit: Vec::new(),
        }
    }

    pub fn ts_abs(&self) -> u64 {
        self.ts_abs
    }

    pub fn weight(&self) -> u64 {
        self.weight
    }

    pub fn deadline(&self) -> u64 {
        self.deadline
    }

    pub fn is_open(&self) -> bool {
        self.state == CollectorState::Open
    }

    /// Votes that were set aside, in arrival order.
    pub fn audit(&self) -> &[(PublicKey, IgnoredVote)] {
        &self.audit
    }

    fn ignore(&mut self, pk: PublicKey, why: IgnoredVote) -> CollectOutcome {
        self.audit.push((pk, why));
        CollectOutcome::Ignored(why)
    }

    pub fn add_vote(&mut self, vote: &Vote) -> CollectOutcome {
        if self.state != CollectorState::Open {
            return self.ignore(vote.witness_pk, IgnoredVote::AlreadyDecided);
        }
        let Some(&w) = self.weights.get(&vote.witness_pk) else {
            return self.ignore(vote.witness_pk, IgnoredVote::UnknownWitness);
        };
        if self.received.contains_key(&vote.witness_pk) {
            return self.ignore(vote.witness_pk, IgnoredVote::Duplicate);
        }
        if !ds_verify(&vote.sig, &self.message, &vote.witness_pk) {
            return self.ignore(vote.witness_pk, IgnoredVote::BadSignature);
        }
        self.received.insert(vote.witness_pk, vote.sig);
        self.weight += w;
        if self.weight > self.ts_abs {
            self.state = CollectorState::Approved;
            CollectOutcome::Approved(self.approval())
        } else {
            CollectOutcome::Pending { weight: self.weight }
        }
    }

    /// Marks the request failed once `now` passes the deadline without
    /// enough weight.
    pub fn tick(&mut self, now: u64) -> Option<CollectOutcome> {
        (self.state == CollectorState::Open && now > self.deadline).then(|| {
            self.state = CollectorState::Failed;
            CollectOutcome::Failed
        })
    }

    fn approval(&self) -> AggregatedApproval {
        AggregatedApproval {
            epoch: self.epoch,
            entries: self
                .received
                .iter()
                .map(|(pk, sig)| ApprovalEntry { witness_pk: *pk, sig: *sig })
                .collect(),
            claimed_weight: self.weight,
        }
    }
}

/// Batch form: feeds every vote and reports the first approval, or
/// `Failed` when `deadline_passed` and the weight never exceeded the
/// threshold, or `Pending` otherwise.
pub fn collect<'a>(
    votes: impl IntoIterator<Item = &'a Vote>,
    req: &RedactionRequest,
    group: &WitnessGroup,
    deadline_passed: bool,
) -> CollectOutcome {
    let mut c = VoteCollector::new(req, group, u64::MAX - 1);
    for v in votes {
        if let CollectOutcome::Approved(a) = c.add_vote(v) {
            return CollectOutcome::Approved(a);
        }
    }
    if deadline_passed {
        CollectOutcome::Failed
    } else {
        CollectOutcome::Pending { weight: c.weight() }
    }
}
