//! Blocks, transactions, Merkle roots, proof-of-work and the chain, including
//! in-place replacement of redactable transactions.

mod block;
mod chain;
mod log;
mod merkle;
mod tx;

pub use block::{pow_seal, pow_seal_bounded, Block, BlockHeader};
pub use chain::{
    apply_redaction, validate_block, validate_chain, AuditEntry, BlockReject, Chain, ChainConfig,
    ChainReject, PatchRecord, DEFAULT_MAX_BLOCK_TXS,
};
pub use log::{read_chain_log, write_chain_log, LogRecord};
pub use merkle::{merkle_root, merkle_root_of_leaves, node_hash};
pub use tx::{
    build_redactable_tx, redactable_message, ImmutableTransaction, RedactableTransaction,
    RedactionMeta, Transaction, TxFault, TxIndex,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("transaction content is empty")]
    EmptyContent,
    #[error("a block needs at least one transaction")]
    EmptyBlock,
    #[error("proof-of-work target is zero")]
    ZeroTarget,
    #[error("nonce space exhausted")]
    NonceExhausted,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("chain log: {0}")]
    Log(String),
}
