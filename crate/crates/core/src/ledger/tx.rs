use std::fmt;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::crypto::{
    ch_hash, ch_kgen, ch_verify, ds_sign, ds_verify, hash, Digest, Point, PrimeOrderGroup,
    PublicKey, Scalar, SigningKeyPair, Signature, STANDARD_GROUP,
};
use crate::encoding::{hex_bytes, Encoder};
use crate::policy::{AttributeCertificate, Policy};
use crate::redaction::AggregatedApproval;
use crate::witness::ElectionRecord;

use super::LedgerError;

/// Address of a transaction: the slot of its block and its position inside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TxIndex {
    pub block_slot: u64,
    pub position: u64,
}

impl TxIndex {
    pub fn new(block_slot: u64, position: u64) -> Self {
        Self { block_slot, position }
    }

    pub fn encode_into(&self, enc: &mut Encoder) {
        enc.u64(self.block_slot).u64(self.position);
    }
}

impl fmt::Display for TxIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.block_slot, self.position)
    }
}

impl std::str::FromStr for TxIndex {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("expected <slot>:<position>, got {s:?}"))?;
        Ok(TxIndex {
            block_slot: a.trim().parse().map_err(|e| format!("bad slot: {e}"))?,
            position: b.trim().parse().map_err(|e| format!("bad position: {e}"))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImmutableTransaction {
    #[serde(with = "hex_bytes")]
    pub content: Vec<u8>,
}

/// Attached by a redaction: who rewrote the transaction and who approved it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedactionMeta {
    pub redactor_cert: AttributeCertificate,
    pub redactor_sig: Signature,
    /// Filled in by the collector once the vote weight passes the threshold.
    pub approval: Option<AggregatedApproval>,
}

/// A transaction whose Merkle leaf is its chameleon hash `h`, so content and
/// policy can be rewritten by finding a new opening `r`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedactableTransaction {
    #[serde(with = "hex_bytes")]
    pub content: Vec<u8>,
    pub policy: Policy,
    pub ch_pk: Point,
    /// The chameleon trapdoor, published with the transaction.
    pub ch_sk: Scalar,
    pub h: Point,
    pub r: Scalar,
    pub owner_pk: PublicKey,
    /// Owner signature over the original `(content, policy)`.
    pub owner_sig: Signature,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub redaction: Option<RedactionMeta>,
}

/// The message that is chameleon-hashed and owner-signed.
pub fn redactable_message(content: &[u8], policy: &Policy) -> Vec<u8> {
    let mut enc = Encoder::tagged("efrb/tx-msg");
    enc.bytes(content).str(policy.canonical_text());
    enc.finish()
}

pub fn build_redactable_tx<R: RngCore + CryptoRng>(
    owner: &SigningKeyPair,
    content: &[u8],
    policy: Policy,
    rng: &mut R,
) -> Result<RedactableTransaction, LedgerError> {
    if content.is_empty() {
        return Err(LedgerError::EmptyContent);
    }
    let group = STANDARD_GROUP;
    let keys = ch_kgen(&group, rng);
    let msg = redactable_message(content, &policy);
    let digest = ch_hash(&group, &keys.pk, &msg, rng);
    let owner_sig = ds_sign(&msg, &owner.sk);
    Ok(RedactableTransaction {
        content: content.to_vec(),
        policy,
        ch_pk: keys.pk,
        ch_sk: keys.sk,
        h: digest.h,
        r: digest.r,
        owner_pk: owner.pk,
        owner_sig,
        redaction: None,
    })
}

impl RedactableTransaction {
    pub fn message(&self) -> Vec<u8> {
        redactable_message(&self.content, &self.policy)
    }

    pub fn ch_verify(&self) -> bool {
        ch_verify(&STANDARD_GROUP, &self.ch_pk, &self.h, &self.r, &self.message())
    }

    pub fn owner_sig_valid(&self) -> bool {
        ds_verify(&self.owner_sig, &self.message(), &self.owner_pk)
    }

    /// Trapdoor and public key belong together.
    pub fn keys_consistent(&self) -> bool {
        STANDARD_GROUP.pow(&STANDARD_GROUP.generator(), &self.ch_sk) == self.ch_pk
    }

    /// Same chameleon identity: key pair, hash value, and owner binding.
    pub fn same_origin(&self, other: &RedactableTransaction) -> bool {
        self.ch_pk == other.ch_pk
            && self.ch_sk == other.ch_sk
            && self.h == other.h
            && self.owner_pk == other.owner_pk
            && self.owner_sig == other.owner_sig
    }

    /// Checks for a transaction as first published (no redaction attached).
    pub fn validate_fresh(&self) -> Result<(), TxFault> {
        if self.redaction.is_some() {
            return Err(TxFault::UnexpectedRedaction);
        }
        if !self.keys_consistent() {
            return Err(TxFault::TrapdoorMismatch);
        }
        if !self.ch_verify() {
            return Err(TxFault::ChameleonVerify);
        }
        if !self.owner_sig_valid() {
            return Err(TxFault::OwnerSignature);
        }
        Ok(())
    }

    pub fn encode_into(&self, enc: &mut Encoder) {
        enc.bytes(&self.content)
            .str(self.policy.canonical_text())
            .bytes(&self.ch_pk.to_bytes())
            .fixed(&self.ch_sk.to_bytes())
            .bytes(&self.h.to_bytes())
            .fixed(&self.r.to_bytes())
            .fixed(self.owner_pk.as_bytes())
            .fixed(&self.owner_sig.0);
        match &self.redaction {
            None => {
                enc.u64(0);
            }
            Some(meta) => {
                enc.u64(1);
                meta.redactor_cert.encode_into(enc);
                enc.fixed(&meta.redactor_sig.0);
                match &meta.approval {
                    None => {
                        enc.u64(0);
                    }
                    Some(a) => {
                        enc.u64(1);
                        a.encode_into(enc);
                    }
                }
            }
        }
    }
}

/// Why a single transaction failed validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(rename_all = "kebab-case")]
pub enum TxFault {
    #[error("chameleon hash does not open to (content, policy)")]
    ChameleonVerify,
    #[error("owner signature invalid")]
    OwnerSignature,
    #[error("trapdoor does not match chameleon public key")]
    TrapdoorMismatch,
    #[error("redaction metadata on a transaction that was never redacted")]
    UnexpectedRedaction,
    #[error("transaction was patched but carries no redaction metadata")]
    MissingRedaction,
    #[error("redaction invalid: {0}")]
    Redaction(String),
    #[error("election record invalid: {0}")]
    Election(String),
    #[error("empty content")]
    EmptyContent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Transaction {
    Immutable(ImmutableTransaction),
    Redactable(RedactableTransaction),
    /// Witness election results packaged by the block producer.
    Election(ElectionRecord),
}

impl Transaction {
    pub fn immutable(content: impl Into<Vec<u8>>) -> Self {
        Transaction::Immutable(ImmutableTransaction { content: content.into() })
    }

    /// Redactable transactions contribute only `h`; everything that a
    /// redaction may change stays outside the leaf.
    pub fn leaf_digest(&self) -> Digest {
        match self {
            Transaction::Immutable(tx) => {
                let mut enc = Encoder::tagged("efrb/leaf/immutable");
                enc.bytes(&tx.content);
                hash(enc.as_slice())
            }
            Transaction::Redactable(tx) => {
                let mut enc = Encoder::tagged("efrb/leaf/redactable");
                enc.bytes(&tx.h.to_bytes());
                hash(enc.as_slice())
            }
            Transaction::Election(rec) => {
                let mut enc = Encoder::tagged("efrb/leaf/election");
                rec.encode_into(&mut enc);
                hash(enc.as_slice())
            }
        }
    }

    pub fn as_redactable(&self) -> Option<&RedactableTransaction> {
        match self {
            Transaction::Redactable(tx) => Some(tx),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Transaction::Immutable(_) => "immutable",
            Transaction::Redactable(_) => "redactable",
            Transaction::Election(_) => "election",
        }
    }
}
