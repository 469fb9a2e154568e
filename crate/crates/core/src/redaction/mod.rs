//! Redaction requests, witness votes, the validation predicate full nodes
//! run before patching, and the CA-held deposit and fee accounts.

mod economy;
mod request;
mod validate;
mod vote;

pub use economy::{
    file_report, pro_rata, redaction_key, CaLedger, EscrowEntry, EscrowStatus, Punishment, Report, ReportOutcome,
    Settlement,
};
pub use request::{attach_approval, make_request, redactor_message, rewrite, RedactionRequest};
pub use validate::{check_redaction, review_request, validate_redacted_tx};
pub use vote::{
    cast_vote, collect, vote_message, AggregatedApproval, ApprovalEntry, CollectOutcome, IgnoredVote, Vote,
    VoteCollector,
};

use serde::{Deserialize, Serialize};

use crate::crypto::CryptoError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RedactionError {
    #[error("no transaction at that index")]
    NoSuchTx,
    #[error("target is not redactable")]
    WrongTxType,
    #[error("certificate attributes do not satisfy the policy")]
    NotAuthorized,
    #[error("processing fee must be positive")]
    BadFee,
    #[error("redacted content is empty")]
    EmptyContent,
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

impl RedactionError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::NoSuchTx => "no-such-tx",
            Self::WrongTxType => "wrong-tx-type",
            Self::NotAuthorized => "not-authorized",
            Self::BadFee => "bad-fee",
            Self::EmptyContent => "empty-content",
            Self::Crypto(_) => "crypto",
        }
    }
}

/// Why a redacted transaction was refused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, thiserror::Error)]
#[serde(rename_all = "kebab-case")]
pub enum RedactionReject {
    #[error("no transaction at that index")]
    NoSuchTx,
    #[error("target is immutable")]
    ImmutableTarget,
    #[error("chameleon identity differs from the stored transaction")]
    LeafMismatch,
    #[error("redactor certificate and signature missing")]
    MissingMeta,
    #[error("no witness approval attached")]
    MissingApproval,
    #[error("approval was not issued by the given group")]
    StaleGroup,
    #[error("approval contains an invalid or foreign witness signature")]
    BadWitnessSig,
    #[error("approval weight does not exceed the threshold")]
    WeightNotExceeded,
    #[error("certificate not issued by the CA")]
    BadCert,
    #[error("certificate attributes do not satisfy the policy")]
    PolicyMismatch,
    #[error("redactor signature invalid")]
    BadRedactorSig,
    #[error("new opening does not match the chameleon hash")]
    BadCollision,
}

impl RedactionReject {
    pub const ALL: [RedactionReject; 12] = [
        Self::NoSuchTx,
        Self::ImmutableTarget,
        Self::LeafMismatch,
        Self::MissingMeta,
        Self::MissingApproval,
        Self::StaleGroup,
        Self::BadWitnessSig,
        Self::WeightNotExceeded,
        Self::BadCert,
        Self::PolicyMismatch,
        Self::BadRedactorSig,
        Self::BadCollision,
    ];

    pub fn code(&self) -> &'static str {
        match self {
            Self::NoSuchTx => "no-such-tx",
            Self::ImmutableTarget => "immutable-target",
            Self::LeafMismatch => "leaf-mismatch",
            Self::MissingMeta => "missing-meta",
            Self::MissingApproval => "missing-approval",
            Self::StaleGroup => "stale-group",
            Self::BadWitnessSig => "bad-witness-sig",
            Self::WeightNotExceeded => "weight-not-exceeded",
            Self::BadCert => "bad-cert",
            Self::PolicyMismatch => "policy-mismatch",
            Self::BadRedactorSig => "bad-redactor-sig",
            Self::BadCollision => "bad-collision",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EconomyError {
    #[error("insufficient funds")]
    InsufficientFunds,
    #[error("deposit already posted for this epoch")]
    DuplicateDeposit,
    #[error("processing fee must be positive")]
    BadFee,
    #[error("request already escrowed")]
    DuplicateRequest,
    #[error("unknown request")]
    UnknownRequest,
    #[error("escrow already closed")]
    EscrowClosed,
    #[error("report evidence lacks signatures")]
    MalformedEvidence,
    #[error("unlock delay has not passed")]
    TooEarly,
    #[error("group was slashed")]
    AlreadySlashed,
    #[error("epoch already settled")]
    AlreadySettled,
}

impl EconomyError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::InsufficientFunds => "insufficient-funds",
            Self::DuplicateDeposit => "duplicate-deposit",
            Self::BadFee => "bad-fee",
            Self::DuplicateRequest => "duplicate-request",
            Self::UnknownRequest => "unknown-request",
            Self::EscrowClosed => "escrow-closed",
            Self::MalformedEvidence => "malformed-evidence",
            Self::TooEarly => "too-early",
            Self::AlreadySlashed => "already-slashed",
            Self::AlreadySettled => "already-settled",
        }
    }
}
