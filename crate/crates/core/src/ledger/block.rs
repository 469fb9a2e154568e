use serde::{Deserialize, Serialize};

use crate::crypto::{hash, Digest};
use crate::encoding::Encoder;

use super::{merkle_root, LedgerError, Transaction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockHeader {
    pub slot: u64,
    pub prev_hash: Digest,
    pub merkle_root: Digest,
    pub nonce: u64,
}

impl BlockHeader {
    pub fn encode(&self) -> Vec<u8> {
        header_preimage(self.slot, &self.prev_hash, &self.merkle_root, self.nonce)
    }

    pub fn hash(&self) -> Digest {
        hash(&self.encode())
    }
}

fn header_preimage(slot: u64, prev_hash: &Digest, merkle_root: &Digest, nonce: u64) -> Vec<u8> {
    let mut enc = Encoder::new();
    enc.u64(slot).fixed(prev_hash.as_bytes()).fixed(merkle_root.as_bytes()).u64(nonce);
    enc.finish()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<Transaction>,
}

impl Block {
    /// Computes the Merkle root and searches for a nonce from `start_nonce`.
    pub fn seal(
        slot: u64,
        prev_hash: Digest,
        transactions: Vec<Transaction>,
        target: &Digest,
        start_nonce: u64,
    ) -> Result<Block, LedgerError> {
        let root = merkle_root(&transactions)?;
        let nonce = pow_seal(slot, &prev_hash, &root, target, start_nonce)?;
        Ok(Block {
            header: BlockHeader { slot, prev_hash, merkle_root: root, nonce },
            transactions,
        })
    }

    pub fn slot(&self) -> u64 {
        self.header.slot
    }

    pub fn hash(&self) -> Digest {
        self.header.hash()
    }
}

/// Unbounded sequential nonce search: the first `ne >= start_nonce` with
/// `H(sl, ph, mt, ne) < target`.
pub fn pow_seal(
    slot: u64,
    prev_hash: &Digest,
    merkle_root: &Digest,
    target: &Digest,
    start_nonce: u64,
) -> Result<u64, LedgerError> {
    pow_seal_bounded(slot, prev_hash, merkle_root, target, start_nonce, u64::MAX)
}

pub fn pow_seal_bounded(
    slot: u64,
    prev_hash: &Digest,
    merkle_root: &Digest,
    target: &Digest,
    start_nonce: u64,
    max_trials: u64,
) -> Result<u64, LedgerError> {
    if *target == Digest::ZERO {
        return Err(LedgerError::ZeroTarget);
    }
    let mut nonce = start_nonce;
    for _ in 0..max_trials {
        if hash(&header_preimage(slot, prev_hash, merkle_root, nonce)) < *target {
            return Ok(nonce);
        }
        nonce = nonce.checked_add(1).ok_or(LedgerError::NonceExhausted)?;
    }
    Err(LedgerError::NonceExhausted)
}
