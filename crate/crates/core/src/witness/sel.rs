//! The witness lottery. A candidate's weight is the number of
//! reduced-difficulty puzzles it solved during the select period, and the
//! proof is the list of solutions.

use std::collections::HashSet;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::crypto::{hash, Digest, PublicKey};
use crate::encoding::Encoder;
use crate::ledger::BlockHeader;

use super::SlotRange;

/// Resolves "the chain head as of slot `tm`".
pub trait HeadLookup {
    fn head_at(&self, slot: u64) -> Option<BlockHeader>;
}

/// A lone header acts as the head for every slot at or after its own.
impl HeadLookup for BlockHeader {
    fn head_at(&self, slot: u64) -> Option<BlockHeader> {
        (self.slot <= slot).then_some(*self)
    }
}

impl<T: HeadLookup + ?Sized> HeadLookup for &T {
    fn head_at(&self, slot: u64) -> Option<BlockHeader> {
        (**self).head_at(slot)
    }
}

/// One solved puzzle: `H(tm, ph, mt, ne, pk) < tv`, where `ph` is the hash
/// of the head header at `tm` and `mt` that header's Merkle root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WitnessProofEntry {
    pub tm: u64,
    pub ph: Digest,
    pub mt: Digest,
    pub ne: u64,
    pub pk: PublicKey,
}

impl WitnessProofEntry {
    pub fn lottery_hash(&self) -> Digest {
        let mut enc = Encoder::tagged("efrb/sel");
        enc.u64(self.tm)
            .fixed(self.ph.as_bytes())
            .fixed(self.mt.as_bytes())
            .u64(self.ne)
            .fixed(self.pk.as_bytes());
        hash(enc.as_slice())
    }

    pub fn encode_into(&self, enc: &mut Encoder) {
        enc.u64(self.tm)
            .fixed(self.ph.as_bytes())
            .fixed(self.mt.as_bytes())
            .u64(self.ne)
            .fixed(self.pk.as_bytes());
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessCandidate {
    pub pk: PublicKey,
    pub weight: u64,
    pub proof: Vec<WitnessProofEntry>,
}

impl WitnessCandidate {
    pub fn encode_into(&self, enc: &mut Encoder) {
        enc.fixed(self.pk.as_bytes()).u64(self.weight).u64(self.proof.len() as u64);
        for e in &self.proof {
            e.encode_into(enc);
        }
    }
}

/// Runs `trial_budget` lottery trials spread evenly over the slots of `sp`.
/// Each trial draws a fresh nonce from `rng`. The budget stands in for the
/// node's hash power.
pub fn sel(
    heads: &dyn HeadLookup,
    tv: &Digest,
    sp: SlotRange,
    pk: &PublicKey,
    trial_budget: u64,
    rng: &mut dyn RngCore,
) -> (u64, Vec<WitnessProofEntry>) {
    let mut info = Vec::new();
    if sp.is_empty() || trial_budget == 0 {
        return (0, info);
    }
    let span = sp.len();
    let mut seen = HashSet::new();
    let mut cached: Option<(u64, Option<BlockHeader>)> = None;
    for i in 0..trial_budget {
        let tm = sp.start + (i as u128 * span as u128 / trial_budget as u128) as u64;
        let head = match cached {
            Some((slot, h)) if slot == tm => h,
            _ => {
                let h = heads.head_at(tm);
                cached = Some((tm, h));
                h
            }
        };
        let ne = rng.next_u64();
        let Some(head) = head else { continue };
        let entry = WitnessProofEntry { tm, ph: head.hash(), mt: head.merkle_root, ne, pk: *pk };
        if entry.lottery_hash() < *tv && seen.insert((tm, ne)) {
            info.push(entry);
        }
    }
    (info.len() as u64, info)
}

/// Accepts iff every entry is a distinct, in-period solution for one key,
/// anchored to the head at its slot, and the count equals the claimed weight.
pub fn vsel(
    w: u64,
    info: &[WitnessProofEntry],
    sp: SlotRange,
    tv: &Digest,
    heads: &dyn HeadLookup,
) -> bool {
    if info.len() as u64 != w {
        return false;
    }
    let Some(first) = info.first() else {
        return true;
    };
    let mut seen = HashSet::new();
    let mut c = 0u64;
    for e in info {
        let anchored = heads
            .head_at(e.tm)
            .is_some_and(|h| h.hash() == e.ph && h.merkle_root == e.mt);
        if e.pk == first.pk
            && sp.contains(e.tm)
            && e.lottery_hash() < *tv
            && anchored
            && seen.insert((e.tm, e.ne))
        {
            c += 1;
        }
    }
    c == w
}

pub fn vsel_candidate(c: &WitnessCandidate, sp: SlotRange, tv: &Digest, heads: &dyn HeadLookup) -> bool {
    c.proof.iter().all(|e| e.pk == c.pk) && vsel(c.weight, &c.proof, sp, tv, heads)
}
