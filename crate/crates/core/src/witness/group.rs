use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::crypto::PublicKey;
use crate::encoding::Encoder;

use super::{Ratio, WitnessCandidate, WitnessError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Member {
    pub pk: PublicKey,
    pub weight: u64,
}

/// Descending weight, ties to the smaller key encoding.
fn rank(a: &Member, b: &Member) -> std::cmp::Ordering {
    b.weight.cmp(&a.weight).then_with(|| a.pk.cmp(&b.pk))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessGroup {
    pub epoch: u64,
    /// Ranked: heaviest first.
    pub members: Vec<Member>,
    pub collector: PublicKey,
    pub total_weight: u64,
    pub deposits: BTreeMap<PublicKey, u64>,
    pub ts_fraction: Ratio,
    /// Members passed over as collector. Local bookkeeping, not on chain.
    #[serde(skip)]
    pub flagged: BTreeSet<PublicKey>,
}

impl WitnessGroup {
    /// `F(pk)`.
    pub fn weight_of(&self, pk: &PublicKey) -> Option<u64> {
        self.members.iter().find(|m| m.pk == *pk).map(|m| m.weight)
    }

    pub fn is_member(&self, pk: &PublicKey) -> bool {
        self.weight_of(pk).is_some()
    }

    /// `ceil(ts_fraction * total_weight)`; approval needs strictly more.
    pub fn ts_abs(&self) -> u64 {
        self.ts_fraction.ceil_mul(self.total_weight)
    }

    pub fn weight_map(&self) -> BTreeMap<PublicKey, u64> {
        self.members.iter().map(|m| (m.pk, m.weight)).collect()
    }

    pub fn encode_into(&self, enc: &mut Encoder) {
        enc.u64(self.epoch).u64(self.members.len() as u64);
        for m in &self.members {
            enc.fixed(m.pk.as_bytes()).u64(m.weight);
        }
        enc.fixed(self.collector.as_bytes()).u64(self.total_weight);
        enc.u64(self.deposits.len() as u64);
        for (pk, amount) in &self.deposits {
            enc.fixed(pk.as_bytes()).u64(*amount);
        }
        enc.u64(self.ts_fraction.num).u64(self.ts_fraction.den);
    }
}

/// Keeps the `wgn` heaviest candidates that posted at least `min_deposit`.
/// Zero-weight candidates never qualify; a key appearing twice keeps its
/// heaviest entry.
pub fn form_group(
    epoch: u64,
    candidates: &[WitnessCandidate],
    wgn: usize,
    deposits: &BTreeMap<PublicKey, u64>,
    min_deposit: u64,
    ts_fraction: Ratio,
) -> Result<WitnessGroup, WitnessError> {
    let mut best: BTreeMap<PublicKey, u64> = BTreeMap::new();
    for c in candidates {
        let funded = deposits.get(&c.pk).is_some_and(|&d| d >= min_deposit && d > 0);
        if c.weight > 0 && funded {
            let w = best.entry(c.pk).or_default();
            *w = (*w).max(c.weight);
        }
    }
    let mut members: Vec<Member> = best.into_iter().map(|(pk, weight)| Member { pk, weight }).collect();
    members.sort_by(rank);
    members.truncate(wgn);
    let collector = select_collector(&members).ok_or(WitnessError::NoCandidates)?;
    let total_weight = members.iter().map(|m| m.weight).sum();
    let deposits = members.iter().map(|m| (m.pk, deposits[&m.pk])).collect();
    Ok(WitnessGroup {
        epoch,
        members,
        collector,
        total_weight,
        deposits,
        ts_fraction,
        flagged: BTreeSet::new(),
    })
}

/// Heaviest member, ties to the smaller key encoding.
pub fn select_collector(members: &[Member]) -> Option<PublicKey> {
    members.iter().min_by(|a, b| rank(a, b)).map(|m| m.pk)
}

/// Flags the current collector and promotes the next member in rank order
/// that has not been flagged before.
pub fn replace_collector(group: &mut WitnessGroup, misbehaving: &PublicKey) -> Result<PublicKey, WitnessError> {
    if group.collector != *misbehaving {
        return Err(WitnessError::NotCollector);
    }
    group.flagged.insert(*misbehaving);
    let mut ranked = group.members.clone();
    ranked.sort_by(rank);
    let next = ranked
        .iter()
        .find(|m| !group.flagged.contains(&m.pk))
        .ok_or(WitnessError::GroupDissolved)?;
    group.collector = next.pk;
    Ok(next.pk)
}
