//! Core protocol library for a redactable blockchain in which rewrites of
//! chameleon-hashed transactions need a policy-authorized redactor and a
//! weighted quorum of an elected witness group.

pub mod crypto;
pub mod encoding;
pub mod policy;
pub mod ledger;
pub mod witness;
pub mod redaction;
