//! Witness-group election: the lottery and its verifier, group formation,
//! and collector selection.

mod group;
mod sel;

use std::collections::BTreeMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::crypto::{Digest, PublicKey};
use crate::encoding::Encoder;

pub use group::{form_group, replace_collector, select_collector, Member, WitnessGroup};
pub use sel::{sel, vsel, vsel_candidate, HeadLookup, WitnessCandidate, WitnessProofEntry};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WitnessError {
    #[error("no eligible witness candidates")]
    NoCandidates,
    #[error("only the current collector can be replaced")]
    NotCollector,
    #[error("every member has been flagged; group dissolved")]
    GroupDissolved,
    #[error("invalid witness configuration: {0}")]
    Config(&'static str),
    #[error("invalid election record: {0}")]
    Record(String),
}

/// Exact fraction `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub const fn new(num: u64, den: u64) -> Self {
        Self { num, den }
    }

    pub fn ceil_mul(&self, v: u64) -> u64 {
        let p = self.num as u128 * v as u128;
        p.div_ceil(self.den as u128) as u64
    }

    pub fn floor_mul(&self, v: u64) -> u64 {
        (self.num as u128 * v as u128 / self.den as u128) as u64
    }
}

/// Inclusive slot interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRange {
    pub start: u64,
    pub end: u64,
}

impl SlotRange {
    pub fn new(start: u64, end: u64) -> Self {
        Self { start, end }
    }

    pub fn is_empty(&self) -> bool {
        self.start > self.end
    }

    pub fn len(&self) -> u64 {
        if self.is_empty() { 0 } else { self.end - self.start + 1 }
    }

    pub fn contains(&self, slot: u64) -> bool {
        self.start <= slot && slot <= self.end
    }
}

/// Election parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelConfig {
    /// Lottery target; must be easier than the block target.
    pub tv: Digest,
    /// Slots between scheduled elections (`t`).
    pub epoch_len: u64,
    /// Length of the select period after its first slot.
    pub sp_len: u64,
    /// Group size cap.
    pub wgn: usize,
    pub ts_fraction: Ratio,
}

impl Default for SelConfig {
    fn default() -> Self {
        Self {
            tv: Digest::with_leading_zero_bits(6),
            epoch_len: 100,
            sp_len: 10,
            wgn: 20,
            ts_fraction: Ratio::new(2, 3),
        }
    }
}

impl SelConfig {
    pub fn validate(&self) -> Result<(), WitnessError> {
        let ts = self.ts_fraction;
        if ts.den == 0 || 2 * ts.num < ts.den || ts.num >= ts.den {
            return Err(WitnessError::Config("ts_fraction must lie in [1/2, 1)"));
        }
        if self.wgn == 0 {
            return Err(WitnessError::Config("wgn must be positive"));
        }
        if self.sp_len >= self.epoch_len {
            return Err(WitnessError::Config("select period must be shorter than the epoch"));
        }
        Ok(())
    }

    /// Window of the scheduled election after `m` groups: `[t*m, t*m + sp_len]`.
    pub fn election_window(&self, m: u64) -> SlotRange {
        let start = self.epoch_len * m;
        SlotRange::new(start, start + self.sp_len)
    }

    /// Window of an out-of-cadence election starting at `start`.
    pub fn window_from(&self, start: u64) -> SlotRange {
        SlotRange::new(start, start + self.sp_len)
    }

    pub fn encode_into(&self, enc: &mut Encoder) {
        enc.fixed(self.tv.as_bytes())
            .u64(self.epoch_len)
            .u64(self.sp_len)
            .u64(self.wgn as u64)
            .u64(self.ts_fraction.num)
            .u64(self.ts_fraction.den);
    }
}

/// Election result as packaged into a block: the group plus each member's
/// lottery proof so that any node can re-run `vsel`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectionRecord {
    pub window: SlotRange,
    pub group: WitnessGroup,
    pub proofs: Vec<WitnessCandidate>,
}

impl ElectionRecord {
    /// Pairs each member with the candidacy it was selected from.
    pub fn assemble(window: SlotRange, group: WitnessGroup, candidates: &[WitnessCandidate]) -> Self {
        let proofs = group
            .members
            .iter()
            .map(|m| {
                candidates
                    .iter()
                    .find(|c| c.pk == m.pk && c.weight == m.weight)
                    .cloned()
                    .expect("member drawn from candidates")
            })
            .collect();
        Self { window, group, proofs }
    }

    pub fn encode_into(&self, enc: &mut Encoder) {
        enc.u64(self.window.start).u64(self.window.end);
        self.group.encode_into(enc);
        enc.u64(self.proofs.len() as u64);
        for p in &self.proofs {
            p.encode_into(enc);
        }
    }
}

/// Contextual check of an election record included in the block at
/// `block_slot`.
pub fn verify_election_record(
    rec: &ElectionRecord,
    heads: &dyn HeadLookup,
    config: &SelConfig,
    last_epoch: Option<u64>,
    prev_window_end: Option<u64>,
    block_slot: u64,
) -> Result<(), WitnessError> {
    let fail = |m: &str| Err(WitnessError::Record(m.to_string()));
    let g = &rec.group;
    if g.epoch != last_epoch.map_or(1, |e| e + 1) {
        return fail("epoch out of sequence");
    }
    if rec.window.end != rec.window.start + config.sp_len || rec.window.end >= block_slot {
        return fail("select period malformed or not yet closed");
    }
    if prev_window_end.is_some_and(|e| rec.window.start <= e) {
        return fail("select period overlaps the previous election");
    }
    if g.members.is_empty() || g.members.len() > config.wgn {
        return fail("group size out of range");
    }
    if g.ts_fraction != config.ts_fraction {
        return fail("threshold differs from configuration");
    }
    if g.total_weight != g.members.iter().map(|m| m.weight).sum::<u64>() {
        return fail("total weight mismatch");
    }
    if select_collector(&g.members) != Some(g.collector) {
        return fail("collector is not the heaviest member");
    }
    if rec.proofs.len() != g.members.len() {
        return fail("proof count differs from member count");
    }
    for (m, p) in g.members.iter().zip(&rec.proofs) {
        if p.pk != m.pk || p.weight != m.weight || m.weight == 0 {
            return fail("proof does not match member");
        }
        if !g.deposits.get(&m.pk).is_some_and(|&d| d > 0) {
            return fail("member without deposit");
        }
        if !vsel_candidate(p, rec.window, &config.tv, heads) {
            return fail("lottery proof rejected");
        }
    }
    let mut ranked = g.members.clone();
    ranked.sort_by(|a, b| b.weight.cmp(&a.weight).then_with(|| a.pk.cmp(&b.pk)));
    if ranked != g.members {
        return fail("members not in rank order");
    }
    Ok(())
}

/// Runs the lottery for every participant over `window` and forms the
/// group. Each participant is `(pk, trial_budget)`.
#[allow(clippy::too_many_arguments)]
pub fn elect(
    heads: &dyn HeadLookup,
    config: &SelConfig,
    epoch: u64,
    window: SlotRange,
    participants: &[(PublicKey, u64)],
    deposits: &BTreeMap<PublicKey, u64>,
    min_deposit: u64,
    rng: &mut dyn RngCore,
) -> Result<ElectionRecord, WitnessError> {
    let candidates: Vec<WitnessCandidate> = participants
        .iter()
        .map(|(pk, budget)| {
            let (weight, proof) = sel(heads, &config.tv, window, pk, *budget, rng);
            WitnessCandidate { pk: *pk, weight, proof }
        })
        .collect();
    let group = form_group(epoch, &candidates, config.wgn, deposits, min_deposit, config.ts_fraction)?;
    Ok(ElectionRecord::assemble(window, group, &candidates))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_rounding() {
        let r = Ratio::new(2, 3);
        assert_eq!(r.ceil_mul(10), 7);
        assert_eq!(r.ceil_mul(9), 6);
        assert_eq!(r.floor_mul(10), 6);
    }

    #[test]
    fn config_bounds() {
        assert!(SelConfig::default().validate().is_ok());
        let mut c = SelConfig::default();
        c.ts_fraction = Ratio::new(1, 3);
        assert!(c.validate().is_err());
        c.ts_fraction = Ratio::new(1, 2);
        assert!(c.validate().is_ok());
        c.ts_fraction = Ratio::new(3, 3);
        assert!(c.validate().is_err());
    }

    #[test]
    fn scheduled_windows() {
        let c = SelConfig::default();
        assert_eq!(c.election_window(0), SlotRange::new(0, 10));
        assert_eq!(c.election_window(2), SlotRange::new(200, 210));
        assert_eq!(SlotRange::new(3, 2).len(), 0);
    }
}
