use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::crypto::{hash, Digest, PublicKey};
use crate::encoding::Encoder;
use crate::ledger::{RedactableTransaction, TxIndex};
use crate::witness::{Ratio, WitnessGroup};

use super::EconomyError;

/// Identifies a redaction independent of the approval attached later.
pub fn redaction_key(new_tx: &RedactableTransaction, ind: TxIndex) -> Digest {
    let mut bare = new_tx.clone();
    if let Some(meta) = &mut bare.redaction {
        meta.approval = None;
    }
    let mut enc = Encoder::tagged("efrb/redaction-key");
    bare.encode_into(&mut enc);
    ind.encode_into(&mut enc);
    hash(enc.as_slice())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EscrowStatus {
    Pending,
    Served,
    Refunded,
    Paid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscrowEntry {
    pub fee: u64,
    pub payer: PublicKey,
    pub epoch: u64,
    pub key: Digest,
    pub status: EscrowStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub reporter_pk: PublicKey,
    pub ind: TxIndex,
    pub evidence: RedactableTransaction,
    pub claim: String,
}

impl Report {
    pub fn id(&self) -> Digest {
        let mut enc = Encoder::tagged("efrb/report");
        self.evidence.encode_into(&mut enc);
        self.ind.encode_into(&mut enc);
        hash(enc.as_slice())
    }
}

/// Evidence must carry a redactor signature and an approval.
pub fn file_report(
    reporter_pk: PublicKey,
    ind: TxIndex,
    evidence: RedactableTransaction,
    claim: impl Into<String>,
) -> Result<Report, EconomyError> {
    match &evidence.redaction {
        Some(meta) if meta.approval.as_ref().is_some_and(|a| !a.entries.is_empty()) => Ok(Report {
            reporter_pk,
            ind,
            evidence,
            claim: claim.into(),
        }),
        _ => Err(EconomyError::MalformedEvidence),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Punishment {
    pub epoch: u64,
    pub slashed: u64,
    pub reporter_reward: u64,
    pub burned: u64,
    /// Fees returned to payers: `(payer, amount)`.
    pub refunds: Vec<(PublicKey, u64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum ReportOutcome {
    Punished(Punishment),
    Dismissed,
    DismissedDuplicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Settlement {
    pub deposits_returned: BTreeMap<PublicKey, u64>,
    pub fee_payouts: BTreeMap<PublicKey, u64>,
    pub refunds: Vec<(PublicKey, u64)>,
}

/// Splits `total` by weight, flooring each share; the remainder goes to
/// `collector`.
pub fn pro_rata(total: u64, weights: &[(PublicKey, u64)], collector: &PublicKey) -> BTreeMap<PublicKey, u64> {
    let sum: u128 = weights.iter().map(|(_, w)| *w as u128).sum();
    let mut out = BTreeMap::new();
    if sum == 0 {
        out.insert(*collector, total);
        return out;
    }
    let mut paid = 0u64;
    for (pk, w) in weights {
        let share = (total as u128 * *w as u128 / sum) as u64;
        *out.entry(*pk).or_insert(0) += share;
        paid += share;
    }
    *out.entry(*collector).or_insert(0) += total - paid;
    out
}

/// Integer accounts held by the CA: balances, deposits, fee escrow, burns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaLedger {
    pub balances: BTreeMap<PublicKey, u64>,
    /// `(epoch, pk) -> amount`.
    pub deposits: BTreeMap<(u64, PublicKey), u64>,
    pub escrow: BTreeMap<Digest, EscrowEntry>,
    pub burned: u64,
    pub minted: u64,
    pub unlock_delay: u64,
    pub reward_share: Ratio,
    pub slashed: BTreeSet<u64>,
    pub settled: BTreeSet<u64>,
    pub reports: BTreeSet<Digest>,
}

impl CaLedger {
    pub fn new(unlock_delay: u64, reward_share: Ratio) -> Self {
        Self {
            balances: BTreeMap::new(),
            deposits: BTreeMap::new(),
            escrow: BTreeMap::new(),
            burned: 0,
            minted: 0,
            unlock_delay,
            reward_share,
            slashed: BTreeSet::new(),
            settled: BTreeSet::new(),
            reports: BTreeSet::new(),
        }
    }

    pub fn balance(&self, pk: &PublicKey) -> u64 {
        self.balances.get(pk).copied().unwrap_or(0)
    }

    /// Initial endowment; the only way funds enter the system.
    pub fn mint(&mut self, pk: PublicKey, amount: u64) {
        *self.balances.entry(pk).or_insert(0) += amount;
        self.minted += amount;
    }

    fn debit(&mut self, pk: &PublicKey, amount: u64) -> Result<(), EconomyError> {
        let bal = self.balances.get_mut(pk).filter(|b| **b >= amount).ok_or(EconomyError::InsufficientFunds)?;
        *bal -= amount;
        Ok(())
    }

    fn credit(&mut self, pk: PublicKey, amount: u64) {
        *self.balances.entry(pk).or_insert(0) += amount;
    }

    pub fn post_deposit(&mut self, pk: PublicKey, epoch: u64, amount: u64) -> Result<(), EconomyError> {
        if self.deposits.contains_key(&(epoch, pk)) {
            return Err(EconomyError::DuplicateDeposit);
        }
        self.debit(&pk, amount)?;
        self.deposits.insert((epoch, pk), amount);
        Ok(())
    }

    /// Deposits posted for `epoch`, keyed by holder.
    pub fn deposits_for(&self, epoch: u64) -> BTreeMap<PublicKey, u64> {
        self.deposits
            .iter()
            .filter(|((e, _), _)| *e == epoch)
            .map(|((_, pk), a)| (*pk, *a))
            .collect()
    }

    /// Returns a deposit before any term starts, e.g. for a candidate that
    /// was not selected.
    pub fn release_deposit(&mut self, epoch: u64, pk: &PublicKey) -> Option<u64> {
        let amount = self.deposits.remove(&(epoch, *pk))?;
        self.credit(*pk, amount);
        Some(amount)
    }

    pub fn deposited(&self) -> u64 {
        self.deposits.values().sum()
    }

    pub fn escrowed(&self) -> u64 {
        self.escrow
            .values()
            .filter(|e| matches!(e.status, EscrowStatus::Pending | EscrowStatus::Served))
            .map(|e| e.fee)
            .sum()
    }

    pub fn escrow_fee(
        &mut self,
        request_id: Digest,
        key: Digest,
        payer: PublicKey,
        fee: u64,
        epoch: u64,
    ) -> Result<(), EconomyError> {
        if fee == 0 {
            return Err(EconomyError::BadFee);
        }
        if self.escrow.contains_key(&request_id) {
            return Err(EconomyError::DuplicateRequest);
        }
        self.debit(&payer, fee)?;
        self.escrow
            .insert(request_id, EscrowEntry { fee, payer, epoch, key, status: EscrowStatus::Pending });
        Ok(())
    }

    pub fn mark_served(&mut self, request_id: &Digest) -> Result<(), EconomyError> {
        match self.escrow.get_mut(request_id) {
            Some(e) if e.status == EscrowStatus::Pending => {
                e.status = EscrowStatus::Served;
                Ok(())
            }
            Some(_) => Err(EconomyError::EscrowClosed),
            None => Err(EconomyError::UnknownRequest),
        }
    }

    /// Returns a pending or served fee to its payer.
    pub fn refund_fee(&mut self, request_id: &Digest) -> Result<u64, EconomyError> {
        let e = self.escrow.get_mut(request_id).ok_or(EconomyError::UnknownRequest)?;
        if !matches!(e.status, EscrowStatus::Pending | EscrowStatus::Served) {
            return Err(EconomyError::EscrowClosed);
        }
        e.status = EscrowStatus::Refunded;
        let (payer, fee) = (e.payer, e.fee);
        self.credit(payer, fee);
        Ok(fee)
    }

    fn open_escrow(&self, epoch: u64) -> Vec<(Digest, EscrowEntry)> {
        self.escrow
            .iter()
            .filter(|(_, e)| e.epoch == epoch && matches!(e.status, EscrowStatus::Pending | EscrowStatus::Served))
            .map(|(id, e)| (*id, e.clone()))
            .collect()
    }

    /// `malicious` is the CA's judgment of the reported redaction. A
    /// confirmed report confiscates every deposit of the approving epoch,
    /// pays the reporter its share, burns the rest and refunds that
    /// epoch's open fees.
    pub fn process_report(&mut self, report: &Report, malicious: bool) -> ReportOutcome {
        if !self.reports.insert(report.id()) {
            return ReportOutcome::DismissedDuplicate;
        }
        let Some(epoch) = report.evidence.redaction.as_ref().and_then(|m| m.approval.as_ref()).map(|a| a.epoch)
        else {
            return ReportOutcome::Dismissed;
        };
        if !malicious || self.slashed.contains(&epoch) || self.settled.contains(&epoch) {
            return ReportOutcome::Dismissed;
        }
        let deposits = self.deposits_for(epoch);
        let slashed: u64 = deposits.values().sum();
        for pk in deposits.keys() {
            self.deposits.remove(&(epoch, *pk));
        }
        let reporter_reward = self.reward_share.floor_mul(slashed);
        let burned = slashed - reporter_reward;
        self.credit(report.reporter_pk, reporter_reward);
        self.burned += burned;
        self.slashed.insert(epoch);
        let mut refunds = Vec::new();
        for (id, e) in self.open_escrow(epoch) {
            if self.refund_fee(&id).is_ok() {
                refunds.push((e.payer, e.fee));
            }
        }
        ReportOutcome::Punished(Punishment { epoch, slashed, reporter_reward, burned, refunds })
    }

    /// Returns deposits and pays served fees pro rata once the unlock delay
    /// after `epoch_end` has passed. Pending fees are refunded.
    pub fn settle_epoch(
        &mut self,
        group: &WitnessGroup,
        epoch_end: u64,
        now_slot: u64,
    ) -> Result<Settlement, EconomyError> {
        let epoch = group.epoch;
        if self.slashed.contains(&epoch) {
            return Err(EconomyError::AlreadySlashed);
        }
        if self.settled.contains(&epoch) {
            return Err(EconomyError::AlreadySettled);
        }
        if now_slot < epoch_end.saturating_add(self.unlock_delay) {
            return Err(EconomyError::TooEarly);
        }
        let mut out = Settlement::default();
        for (pk, amount) in self.deposits_for(epoch) {
            self.deposits.remove(&(epoch, pk));
            self.credit(pk, amount);
            out.deposits_returned.insert(pk, amount);
        }
        let mut fees = 0u64;
        for (id, e) in self.open_escrow(epoch) {
            if e.status == EscrowStatus::Served {
                fees += e.fee;
                self.escrow.get_mut(&id).expect("present").status = EscrowStatus::Paid;
            } else if self.refund_fee(&id).is_ok() {
                out.refunds.push((e.payer, e.fee));
            }
        }
        if fees > 0 {
            let weights: Vec<_> = group.members.iter().map(|m| (m.pk, m.weight)).collect();
            for (pk, amount) in pro_rata(fees, &weights, &group.collector) {
                if amount > 0 {
                    self.credit(pk, amount);
                    out.fee_payouts.insert(pk, amount);
                }
            }
        }
        self.settled.insert(epoch);
        Ok(out)
    }

    /// Everything the ledger accounts for. Equals `minted` at all times.
    pub fn total(&self) -> u64 {
        self.balances.values().sum::<u64>() + self.deposited() + self.escrowed() + self.burned
    }
}
