#![allow(dead_code)]

use std::collections::BTreeMap;

use efrb_core::crypto::{ds_kgen, Digest, SigningKeyPair};
use efrb_core::ledger::{build_redactable_tx, Chain, ChainConfig, Transaction, TxIndex};
use efrb_core::policy::{issue_certificate, parse_policy, AttributeCertificate, AttributeSet, Policy};
use efrb_core::redaction::{
    attach_approval, cast_vote, collect, make_request, CollectOutcome, RedactionReject, RedactionRequest,
};
use efrb_core::witness::{elect, SelConfig, WitnessGroup};
use efrb_core::ledger::RedactableTransaction;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub const BLOCK_BITS: u32 = 8;

/// A chain with one elected witness group and a block of redactable
/// transactions owned by `owner`, redactable by holders of `Teacher` or
/// `Student`, or by the owner's identity attribute.
pub struct World {
    pub rng: ChaCha20Rng,
    pub ca: SigningKeyPair,
    pub chain: Chain,
    pub witnesses: Vec<SigningKeyPair>,
    pub group: WitnessGroup,
    pub owner: SigningKeyPair,
    pub owner_cert: AttributeCertificate,
    pub redactor: SigningKeyPair,
    pub cert: AttributeCertificate,
    pub inds: Vec<TxIndex>,
    pub slot: u64,
}

pub fn certify(ca: &SigningKeyPair, who: &SigningKeyPair, attrs: &[&str]) -> AttributeCertificate {
    issue_certificate(&ca.sk, &who.pk, AttributeSet::new(attrs.iter().copied()).unwrap()).unwrap()
}

impl World {
    pub fn new(seed: u64, n_txs: usize) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let ca = ds_kgen(&mut rng);
        let config = ChainConfig::new(Digest::with_leading_zero_bits(BLOCK_BITS), ca.pk, SelConfig::default());
        let mut chain = Chain::new(config.clone()).unwrap();
        let witnesses: Vec<SigningKeyPair> = (0..5).map(|_| ds_kgen(&mut rng)).collect();
        let participants: Vec<_> = witnesses.iter().map(|w| (w.pk, 640)).collect();
        let deposits: BTreeMap<_, _> = witnesses.iter().map(|w| (w.pk, 100)).collect();
        let window = config.witness.election_window(0);
        let record = elect(&chain, &config.witness, 1, window, &participants, &deposits, 100, &mut rng).unwrap();
        let group = record.group.clone();

        let owner = ds_kgen(&mut rng);
        let redactor = ds_kgen(&mut rng);
        let policy = parse_policy(&format!("\"{}\" OR Teacher OR Student", owner.pk.identity_attribute())).unwrap();
        let mut txs = vec![Transaction::Election(record), Transaction::immutable(b"fixed".to_vec())];
        for i in 0..n_txs {
            let content = format!("record {i}");
            let tx = build_redactable_tx(&owner, content.as_bytes(), policy.clone(), &mut rng).unwrap();
            txs.push(Transaction::Redactable(tx));
        }
        let slot = window.end + 1;
        let block = chain.build_block(slot, txs, 0).unwrap();
        chain.append_block(block).unwrap();
        let inds = (0..n_txs).map(|i| TxIndex::new(slot, 2 + i as u64)).collect();
        let owner_cert = certify(&ca, &owner, &[&owner.pk.identity_attribute()]);
        let cert = certify(&ca, &redactor, &["Teacher"]);
        World { rng, ca, chain, witnesses, group, owner, owner_cert, redactor, cert, inds, slot }
    }

    pub fn request(&self, ind: TxIndex, content: &str, policy: Option<Policy>) -> RedactionRequest {
        make_request(&self.chain, ind, content.as_bytes(), policy, &self.redactor.sk, &self.cert, 10).unwrap()
    }

    pub fn owner_request(&self, ind: TxIndex, content: &str, policy: Option<Policy>) -> RedactionRequest {
        make_request(&self.chain, ind, content.as_bytes(), policy, &self.owner.sk, &self.owner_cert, 10).unwrap()
    }

    /// Every witness votes; returns the transaction with approval attached.
    pub fn approve(&self, req: &RedactionRequest) -> RedactableTransaction {
        let votes: Vec<_> = self.witnesses.iter().map(|w| cast_vote(&w.sk, req, self.group.epoch)).collect();
        match collect(&votes, req, &self.group, true) {
            CollectOutcome::Approved(a) => attach_approval(req, a),
            other => panic!("not approved: {other:?}"),
        }
    }

    pub fn apply(&mut self, ind: TxIndex, tx: RedactableTransaction) -> Result<(), RedactionReject> {
        self.slot += 1;
        let group = self.group.clone();
        self.chain.apply_redaction(ind, tx, &group, self.slot)
    }

    pub fn redact(&mut self, ind: TxIndex, content: &str) -> Result<(), RedactionReject> {
        let req = self.request(ind, content, None);
        let tx = self.approve(&req);
        self.apply(ind, tx)
    }

    pub fn current(&self, ind: TxIndex) -> &RedactableTransaction {
        self.chain.tx(ind).and_then(Transaction::as_redactable).unwrap()
    }
}
