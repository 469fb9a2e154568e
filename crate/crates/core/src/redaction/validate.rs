use std::collections::BTreeSet;

use crate::crypto::{ds_verify, PublicKey};
use crate::ledger::{Chain, RedactableTransaction, Transaction, TxIndex};
use crate::policy::{matches, verify_certificate};
use crate::witness::WitnessGroup;

use super::{redactor_message, vote_message, RedactionRequest, RedactionReject};

/// The checks a witness runs before voting. The first failure is the reason.
pub fn review_request(
    req: &RedactionRequest,
    chain: &Chain,
    ca_pk: &PublicKey,
) -> Result<(), RedactionReject> {
    let original = current_version(chain, req.ind)?;
    check_authorization(original, &req.new_tx, ca_pk)
}

fn current_version(chain: &Chain, ind: TxIndex) -> Result<&RedactableTransaction, RedactionReject> {
    match chain.tx(ind) {
        None => Err(RedactionReject::NoSuchTx),
        Some(Transaction::Redactable(tx)) => Ok(tx),
        Some(_) => Err(RedactionReject::ImmutableTarget),
    }
}

/// Certificate, policy, redactor signature and collision, in that order.
fn check_authorization(
    previous: &RedactableTransaction,
    new_tx: &RedactableTransaction,
    ca_pk: &PublicKey,
) -> Result<(), RedactionReject> {
    let meta = new_tx.redaction.as_ref().ok_or(RedactionReject::MissingMeta)?;
    let cert = &meta.redactor_cert;
    if !verify_certificate(ca_pk, cert) {
        return Err(RedactionReject::BadCert);
    }
    if !matches(&previous.policy, &cert.attributes) {
        return Err(RedactionReject::PolicyMismatch);
    }
    let msg = redactor_message(&new_tx.content, &new_tx.policy, cert);
    if !ds_verify(&meta.redactor_sig, &msg, &cert.subject_pk) {
        return Err(RedactionReject::BadRedactorSig);
    }
    if !new_tx.ch_verify() {
        return Err(RedactionReject::BadCollision);
    }
    Ok(())
}

/// The predicate every full node runs before swapping in `new_tx`:
/// leaf invariance, redactor authorization, a valid opening, and witness
/// approval weight strictly above the threshold of `group`.
pub fn check_redaction(
    previous: &RedactableTransaction,
    new_tx: &RedactableTransaction,
    ind: TxIndex,
    group: &WitnessGroup,
    ca_pk: &PublicKey,
) -> Result<(), RedactionReject> {
    if !previous.same_origin(new_tx) {
        return Err(RedactionReject::LeafMismatch);
    }
    check_authorization(previous, new_tx, ca_pk)?;
    let approval = new_tx
        .redaction
        .as_ref()
        .and_then(|m| m.approval.as_ref())
        .ok_or(RedactionReject::MissingApproval)?;
    if approval.epoch != group.epoch {
        return Err(RedactionReject::StaleGroup);
    }
    let msg = vote_message(new_tx, ind, approval.epoch);
    let mut seen = BTreeSet::new();
    let mut weight = 0u64;
    for e in &approval.entries {
        let w = group.weight_of(&e.witness_pk).ok_or(RedactionReject::BadWitnessSig)?;
        if !seen.insert(e.witness_pk) || !ds_verify(&e.sig, &msg, &e.witness_pk) {
            return Err(RedactionReject::BadWitnessSig);
        }
        weight += w;
    }
    if weight != approval.claimed_weight || weight <= group.ts_abs() {
        return Err(RedactionReject::WeightNotExceeded);
    }
    Ok(())
}

/// [`check_redaction`] against the version currently stored at `ind`.
pub fn validate_redacted_tx(
    new_tx: &RedactableTransaction,
    ind: TxIndex,
    chain: &Chain,
    group: &WitnessGroup,
    ca_pk: &PublicKey,
) -> Result<(), RedactionReject> {
    let previous = current_version(chain, ind)?;
    check_redaction(previous, new_tx, ind, group, ca_pk)
}
