use std::collections::BTreeMap;

use efrb_core::crypto::{Digest, SigningKeyPair};
use efrb_core::ledger::{Chain, RedactableTransaction, Transaction, TxIndex};
use efrb_core::policy::AttributeCertificate;
use efrb_core::redaction::{CaLedger, RedactionRequest, VoteCollector};
use efrb_core::witness::{ElectionRecord, WitnessCandidate, WitnessGroup};
use rand_chacha::ChaCha20Rng;

use crate::scenario::NodeSpec;

/// The group a node believes is in office.
#[derive(Debug, Clone)]
pub(crate) struct Office {
    pub group: WitnessGroup,
    pub dissolved: bool,
}

pub(crate) struct Collecting {
    pub label: String,
    pub req: RedactionRequest,
    pub tally: VoteCollector,
}

pub(crate) struct OwnRequest {
    pub req: RedactionRequest,
    pub epoch: u64,
    pub resolved: bool,
    pub retries: usize,
}

/// CA-only state.
pub(crate) struct Authority {
    pub ledger: CaLedger,
    pub candidacies: BTreeMap<u64, Vec<WitnessCandidate>>,
    pub next_epoch: u64,
    pub last_window_end: Option<u64>,
}

pub(crate) struct Node {
    pub spec: NodeSpec,
    pub keys: SigningKeyPair,
    pub cert: AttributeCertificate,
    pub rng: ChaCha20Rng,
    pub chain: Chain,
    pub office: Option<Office>,
    pub mempool: Vec<Transaction>,
    pub elections: Vec<ElectionRecord>,
    pub collecting: BTreeMap<Digest, Collecting>,
    pub own: BTreeMap<String, OwnRequest>,
    pub approvals: BTreeMap<String, (TxIndex, RedactableTransaction)>,
    pub authority: Option<Authority>,
}

impl Node {
    /// Group in office, unless dissolved.
    pub fn active_group(&self) -> Option<&WitnessGroup> {
        self.office.as_ref().filter(|o| !o.dissolved).map(|o| &o.group)
    }

    pub fn find_tx(&self, leaf: &Digest) -> Option<(TxIndex, &Transaction)> {
        self.chain.transactions().find(|(_, tx)| tx.leaf_digest() == *leaf)
    }
}
