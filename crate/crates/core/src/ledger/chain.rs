use serde::{Deserialize, Serialize};

use crate::crypto::{hash, Digest, PublicKey};
use crate::encoding::Encoder;
use crate::redaction::{self, RedactionReject};
use crate::witness::{self, ElectionRecord, HeadLookup, SelConfig, WitnessGroup};

use super::{merkle_root, Block, BlockHeader, LedgerError, RedactableTransaction, Transaction, TxFault, TxIndex};

/// Genesis parameters shared by every node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub pow_target: Digest,
    pub max_block_txs: usize,
    pub ca_pk: PublicKey,
    pub witness: SelConfig,
}

pub const DEFAULT_MAX_BLOCK_TXS: usize = 512;

impl ChainConfig {
    pub fn new(pow_target: Digest, ca_pk: PublicKey, witness: SelConfig) -> Self {
        Self { pow_target, max_block_txs: DEFAULT_MAX_BLOCK_TXS, ca_pk, witness }
    }

    pub fn validate(&self) -> Result<(), LedgerError> {
        if self.pow_target == Digest::ZERO {
            return Err(LedgerError::ZeroTarget);
        }
        if self.witness.tv <= self.pow_target {
            return Err(LedgerError::Config("witness target must be easier than block target".into()));
        }
        if self.max_block_txs == 0 {
            return Err(LedgerError::Config("max_block_txs must be positive".into()));
        }
        self.witness.validate().map_err(|e| LedgerError::Config(e.to_string()))
    }

    fn genesis_content(&self) -> Vec<u8> {
        let mut enc = Encoder::tagged("efrb/genesis");
        enc.fixed(self.pow_target.as_bytes())
            .u64(self.max_block_txs as u64)
            .fixed(self.ca_pk.as_bytes());
        self.witness.encode_into(&mut enc);
        enc.finish()
    }
}

/// Why a block was refused.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum BlockReject {
    #[error("bad-link")]
    BadLink,
    #[error("bad-pow")]
    BadPow,
    #[error("bad-merkle")]
    BadMerkle,
    #[error("too many transactions")]
    TooManyTxs,
    #[error("bad-tx({index}): {cause}")]
    BadTx { index: usize, cause: TxFault },
}

impl BlockReject {
    pub fn code(&self) -> &'static str {
        match self {
            BlockReject::BadLink => "bad-link",
            BlockReject::BadPow => "bad-pow",
            BlockReject::BadMerkle => "bad-merkle",
            BlockReject::TooManyTxs => "too-many-txs",
            BlockReject::BadTx { .. } => "bad-tx",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("chain invalid at height {height}: {reason}")]
pub struct ChainReject {
    pub height: usize,
    pub reason: BlockReject,
}

/// Context-free block check against its predecessor header. Redactable
/// transactions must be in their freshly published form.
pub fn validate_block(block: &Block, prev: &BlockHeader, target: &Digest) -> Result<(), BlockReject> {
    validate_block_with(block, prev, target, usize::MAX, |_, tx| tx.validate_fresh())
}

fn validate_block_with(
    block: &Block,
    prev: &BlockHeader,
    target: &Digest,
    max_txs: usize,
    mut redactable: impl FnMut(usize, &RedactableTransaction) -> Result<(), TxFault>,
) -> Result<(), BlockReject> {
    if block.header.prev_hash != prev.hash() || block.header.slot <= prev.slot {
        return Err(BlockReject::BadLink);
    }
    if block.header.hash() >= *target {
        return Err(BlockReject::BadPow);
    }
    match merkle_root(&block.transactions) {
        Ok(root) if root == block.header.merkle_root => {}
        _ => return Err(BlockReject::BadMerkle),
    }
    if block.transactions.len() > max_txs {
        return Err(BlockReject::TooManyTxs);
    }
    for (index, tx) in block.transactions.iter().enumerate() {
        let res = match tx {
            Transaction::Immutable(t) if t.content.is_empty() => Err(TxFault::EmptyContent),
            Transaction::Immutable(_) | Transaction::Election(_) => Ok(()),
            Transaction::Redactable(t) => redactable(index, t),
        };
        res.map_err(|cause| BlockReject::BadTx { index, cause })?;
    }
    Ok(())
}

/// One applied redaction. `previous` is the version that was replaced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchRecord {
    pub ind: TxIndex,
    pub slot: u64,
    pub previous: RedactableTransaction,
    pub replacement: RedactableTransaction,
}

/// Verdict of one redaction validation, kept for offline audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub slot: u64,
    pub ind: TxIndex,
    pub tx_digest: Digest,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    config: ChainConfig,
    blocks: Vec<Block>,
    patches: Vec<PatchRecord>,
    audit: Vec<AuditEntry>,
}

impl Chain {
    pub fn new(config: ChainConfig) -> Result<Self, LedgerError> {
        config.validate()?;
        let genesis = Block::seal(
            0,
            Digest::ZERO,
            vec![Transaction::immutable(config.genesis_content())],
            &config.pow_target,
            0,
        )?;
        Ok(Self { config, blocks: vec![genesis], patches: Vec::new(), audit: Vec::new() })
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn patches(&self) -> &[PatchRecord] {
        &self.patches
    }

    pub fn audit(&self) -> &[AuditEntry] {
        &self.audit
    }

    pub fn genesis(&self) -> &Block {
        &self.blocks[0]
    }

    pub fn head(&self) -> &Block {
        self.blocks.last().expect("chain always holds genesis")
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn headers(&self) -> Vec<BlockHeader> {
        self.blocks.iter().map(|b| b.header).collect()
    }

    pub fn block_at_slot(&self, slot: u64) -> Option<&Block> {
        self.blocks
            .binary_search_by_key(&slot, Block::slot)
            .ok()
            .map(|i| &self.blocks[i])
    }

    fn block_index(&self, slot: u64) -> Option<usize> {
        self.blocks.binary_search_by_key(&slot, Block::slot).ok()
    }

    pub fn tx(&self, ind: TxIndex) -> Option<&Transaction> {
        self.block_at_slot(ind.block_slot)?
            .transactions
            .get(usize::try_from(ind.position).ok()?)
    }

    /// Every transaction with its index, in chain order.
    pub fn transactions(&self) -> impl Iterator<Item = (TxIndex, &Transaction)> {
        self.blocks.iter().flat_map(|b| {
            b.transactions
                .iter()
                .enumerate()
                .map(move |(i, tx)| (TxIndex::new(b.slot(), i as u64), tx))
        })
    }

    /// Seals a block of `txs` on top of the current head.
    pub fn build_block(&self, slot: u64, txs: Vec<Transaction>, start_nonce: u64) -> Result<Block, LedgerError> {
        Block::seal(slot, self.head().hash(), txs, &self.config.pow_target, start_nonce)
    }

    pub fn append_block(&mut self, block: Block) -> Result<(), ChainReject> {
        let height = self.blocks.len();
        let prev = self.head().header;
        let reject = |reason| ChainReject { height, reason };
        validate_block_with(&block, &prev, &self.config.pow_target, self.config.max_block_txs, |_, tx| {
            tx.validate_fresh()
        })
        .map_err(reject)?;
        self.check_elections(&block, self.latest_election().map(|r| r.group.epoch))
            .map_err(reject)?;
        self.blocks.push(block);
        Ok(())
    }

    fn check_elections(&self, block: &Block, mut last_epoch: Option<u64>) -> Result<(), BlockReject> {
        for (index, tx) in block.transactions.iter().enumerate() {
            if let Transaction::Election(rec) = tx {
                let prev_window_end = self.election_before(block.slot()).map(|r| r.window.end);
                witness::verify_election_record(rec, self, &self.config.witness, last_epoch, prev_window_end, block.slot())
                    .map_err(|e| BlockReject::BadTx { index, cause: TxFault::Election(e.to_string()) })?;
                last_epoch = Some(rec.group.epoch);
            }
        }
        Ok(())
    }

    fn election_before(&self, slot: u64) -> Option<&ElectionRecord> {
        self.blocks
            .iter()
            .rev()
            .filter(|b| b.slot() < slot)
            .flat_map(|b| b.transactions.iter().rev())
            .find_map(|tx| match tx {
                Transaction::Election(r) => Some(r),
                _ => None,
            })
    }

    pub fn elections(&self) -> impl Iterator<Item = (u64, &ElectionRecord)> {
        self.blocks.iter().flat_map(|b| {
            b.transactions.iter().filter_map(move |tx| match tx {
                Transaction::Election(r) => Some((b.slot(), r)),
                _ => None,
            })
        })
    }

    pub fn latest_election(&self) -> Option<&ElectionRecord> {
        self.elections().last().map(|(_, r)| r)
    }

    pub fn election_record(&self, epoch: u64) -> Option<&ElectionRecord> {
        self.elections().map(|(_, r)| r).find(|r| r.group.epoch == epoch)
    }

    /// The version a transaction had before its most recent redaction.
    pub fn previous_version(&self, ind: TxIndex) -> Option<&RedactableTransaction> {
        self.patches.iter().rev().find(|p| p.ind == ind).map(|p| &p.previous)
    }

    pub fn redaction_history(&self, ind: TxIndex) -> impl Iterator<Item = &PatchRecord> {
        self.patches.iter().filter(move |p| p.ind == ind)
    }

    /// Runs the full redaction predicate against `group` and, on success,
    /// swaps the transaction in place. Block headers never change. The
    /// verdict is appended to the audit trail either way.
    pub fn apply_redaction(
        &mut self,
        ind: TxIndex,
        new_tx: RedactableTransaction,
        group: &WitnessGroup,
        slot: u64,
    ) -> Result<(), RedactionReject> {
        let verdict = redaction::validate_redacted_tx(&new_tx, ind, self, group, &self.config.ca_pk);
        let mut enc = Encoder::tagged("efrb/audit-tx");
        new_tx.encode_into(&mut enc);
        self.audit.push(AuditEntry {
            slot,
            ind,
            tx_digest: hash(enc.as_slice()),
            verdict: match &verdict {
                Ok(()) => "accept".into(),
                Err(r) => r.code().into(),
            },
        });
        verdict?;
        let bi = self.block_index(ind.block_slot).ok_or(RedactionReject::NoSuchTx)?;
        let slot_ref = &mut self.blocks[bi].transactions[ind.position as usize];
        let previous = match slot_ref {
            Transaction::Redactable(tx) => tx.clone(),
            _ => return Err(RedactionReject::ImmutableTarget),
        };
        *slot_ref = Transaction::Redactable(new_tx.clone());
        self.patches.push(PatchRecord { ind, slot, previous, replacement: new_tx });
        Ok(())
    }

    /// Full re-validation from genesis. Redacted transactions are checked
    /// against the version they replaced and the group recorded for the
    /// approving epoch.
    pub fn validate_chain(&self) -> Result<(), ChainReject> {
        let genesis = &self.blocks[0];
        let expected_genesis = Chain::new(self.config.clone())
            .map_err(|_| ChainReject { height: 0, reason: BlockReject::BadLink })?;
        if genesis.header != expected_genesis.blocks[0].header {
            return Err(ChainReject { height: 0, reason: BlockReject::BadLink });
        }
        let mut prefix = Chain {
            config: self.config.clone(),
            blocks: vec![genesis.clone()],
            patches: Vec::new(),
            audit: Vec::new(),
        };
        let mut last_epoch = None;
        for (height, block) in self.blocks.iter().enumerate().skip(1) {
            let reject = |reason| ChainReject { height, reason };
            let prev = prefix.head().header;
            validate_block_with(block, &prev, &self.config.pow_target, self.config.max_block_txs, |pos, tx| {
                self.check_tx_in_place(TxIndex::new(block.slot(), pos as u64), tx)
            })
            .map_err(reject)?;
            prefix.check_elections(block, last_epoch).map_err(reject)?;
            if let Some(r) = block.transactions.iter().rev().find_map(|t| match t {
                Transaction::Election(r) => Some(r),
                _ => None,
            }) {
                last_epoch = Some(r.group.epoch);
            }
            prefix.blocks.push(block.clone());
        }
        Ok(())
    }

    fn check_tx_in_place(&self, ind: TxIndex, tx: &RedactableTransaction) -> Result<(), TxFault> {
        match (&tx.redaction, self.previous_version(ind)) {
            (None, None) => tx.validate_fresh(),
            (None, Some(_)) => Err(TxFault::MissingRedaction),
            (Some(_), None) => Err(TxFault::UnexpectedRedaction),
            (Some(meta), Some(previous)) => {
                let approval = meta
                    .approval
                    .as_ref()
                    .ok_or_else(|| TxFault::Redaction(RedactionReject::MissingApproval.code().into()))?;
                let record = self
                    .election_record(approval.epoch)
                    .ok_or_else(|| TxFault::Redaction(RedactionReject::StaleGroup.code().into()))?;
                redaction::check_redaction(previous, tx, ind, &record.group, &self.config.ca_pk)
                    .map_err(|r| TxFault::Redaction(r.code().into()))
            }
        }
    }

    /// Blocks exactly as sealed: every patch undone, newest first.
    pub fn original_blocks(&self) -> Vec<Block> {
        let mut blocks = self.blocks.clone();
        for patch in self.patches.iter().rev() {
            if let Some(bi) = self.block_index(patch.ind.block_slot) {
                blocks[bi].transactions[patch.ind.position as usize] =
                    Transaction::Redactable(patch.previous.clone());
            }
        }
        blocks
    }

    /// Rebuilds a chain from sealed blocks plus patch records, replaying
    /// each patch verbatim. Call [`Chain::validate_chain`] afterwards.
    pub fn from_parts(
        config: ChainConfig,
        blocks: Vec<Block>,
        patches: Vec<PatchRecord>,
        audit: Vec<AuditEntry>,
    ) -> Result<Self, LedgerError> {
        let mut chain = Chain::new(config)?;
        let mut iter = blocks.into_iter();
        match iter.next() {
            Some(g) if g == chain.blocks[0] => {}
            _ => return Err(LedgerError::Log("genesis mismatch".into())),
        }
        for b in iter {
            chain.append_block(b).map_err(|e| LedgerError::Log(e.to_string()))?;
        }
        for p in patches {
            let bi = chain
                .block_index(p.ind.block_slot)
                .ok_or_else(|| LedgerError::Log(format!("patch for unknown slot {}", p.ind)))?;
            let slot_ref = chain.blocks[bi]
                .transactions
                .get_mut(p.ind.position as usize)
                .ok_or_else(|| LedgerError::Log(format!("patch for unknown tx {}", p.ind)))?;
            if slot_ref.as_redactable() != Some(&p.previous) {
                return Err(LedgerError::Log(format!("patch {} does not match current version", p.ind)));
            }
            *slot_ref = Transaction::Redactable(p.replacement.clone());
            chain.patches.push(p);
        }
        chain.audit = audit;
        Ok(chain)
    }
}

impl HeadLookup for Chain {
    fn head_at(&self, slot: u64) -> Option<BlockHeader> {
        let idx = self.blocks.partition_point(|b| b.slot() <= slot);
        (idx > 0).then(|| self.blocks[idx - 1].header)
    }
}

/// Free-function form: validates and returns the patched chain, leaving
/// the input untouched.
pub fn apply_redaction(
    chain: &Chain,
    ind: TxIndex,
    new_tx: RedactableTransaction,
    group: &WitnessGroup,
    slot: u64,
) -> Result<Chain, RedactionReject> {
    let mut next = chain.clone();
    next.apply_redaction(ind, new_tx, group, slot)?;
    Ok(next)
}

pub fn validate_chain(chain: &Chain) -> Result<(), ChainReject> {
    chain.validate_chain()
}
