use serde::{Deserialize, Serialize};

use crate::crypto::{ch_adapt, ds_sign, hash, Digest, SecretKey, STANDARD_GROUP};
use crate::encoding::Encoder;
use crate::ledger::{redactable_message, Chain, RedactableTransaction, RedactionMeta, Transaction, TxIndex};
use crate::policy::{matches, AttributeCertificate, Policy};

use super::{AggregatedApproval, RedactionError};

/// A proposed rewrite sent to the witness group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedactionRequest {
    pub new_tx: RedactableTransaction,
    pub ind: TxIndex,
    pub fee: u64,
}

impl RedactionRequest {
    pub fn encode_into(&self, enc: &mut Encoder) {
        self.new_tx.encode_into(enc);
        self.ind.encode_into(enc);
        enc.u64(self.fee);
    }

    /// Stable identifier used for fee escrow and vote bookkeeping.
    pub fn id(&self) -> Digest {
        let mut enc = Encoder::tagged("efrb/request");
        self.encode_into(&mut enc);
        hash(enc.as_slice())
    }
}

/// The bytes a redactor signs: new content, new policy, and the full
/// certificate the redactor presents.
pub fn redactor_message(content: &[u8], policy: &Policy, cert: &AttributeCertificate) -> Vec<u8> {
    let mut enc = Encoder::tagged("efrb/redactor");
    enc.bytes(content).str(policy.canonical_text());
    cert.encode_into(&mut enc);
    enc.finish()
}

/// Rewrites `original` to `(content, policy)` with opening `r` and attaches
/// a redactor signature. Performs no authorization check.
pub fn rewrite(
    original: &RedactableTransaction,
    content: Vec<u8>,
    policy: Policy,
    r: crate::crypto::Scalar,
    redactor_sk: &SecretKey,
    cert: AttributeCertificate,
) -> RedactableTransaction {
    let redactor_sig = ds_sign(&redactor_message(&content, &policy, &cert), redactor_sk);
    RedactableTransaction {
        content,
        policy,
        r,
        redaction: Some(RedactionMeta { redactor_cert: cert, redactor_sig, approval: None }),
        ..original.clone()
    }
}

pub(crate) fn redactable_at(chain: &Chain, ind: TxIndex) -> Result<&RedactableTransaction, RedactionError> {
    match chain.tx(ind) {
        None => Err(RedactionError::NoSuchTx),
        Some(Transaction::Redactable(tx)) => Ok(tx),
        Some(_) => Err(RedactionError::WrongTxType),
    }
}

/// Builds a request after checking locally that the certificate satisfies
/// the current policy. `new_policy = None` keeps the policy unchanged.
pub fn make_request(
    chain: &Chain,
    ind: TxIndex,
    new_content: &[u8],
    new_policy: Option<Policy>,
    redactor_sk: &SecretKey,
    cert: &AttributeCertificate,
    fee: u64,
) -> Result<RedactionRequest, RedactionError> {
    let original = redactable_at(chain, ind)?;
    if fee == 0 {
        return Err(RedactionError::BadFee);
    }
    if !matches(&original.policy, &cert.attributes) {
        return Err(RedactionError::NotAuthorized);
    }
    if new_content.is_empty() {
        return Err(RedactionError::EmptyContent);
    }
    let policy = new_policy.unwrap_or_else(|| original.policy.clone());
    let r_new = ch_adapt(
        &STANDARD_GROUP,
        &original.ch_sk,
        &original.h,
        &original.r,
        &original.message(),
        &redactable_message(new_content, &policy),
    )?;
    let new_tx = rewrite(original, new_content.to_vec(), policy, r_new, redactor_sk, cert.clone());
    Ok(RedactionRequest { new_tx, ind, fee })
}

/// The request's transaction with the collector's approval attached, ready
/// for inclusion.
pub fn attach_approval(req: &RedactionRequest, approval: AggregatedApproval) -> RedactableTransaction {
    let mut tx = req.new_tx.clone();
    if let Some(meta) = &mut tx.redaction {
        meta.approval = Some(approval);
    }
    tx
}
