use efrb_core::crypto::Digest;
use efrb_core::ledger::merkle_root_of_leaves;
use proptest::prelude::*;
use sha2::{Digest as _, Sha256};

/// Recursive definition: pad each odd level by repeating its last node.
fn reference(level: Vec<[u8; 32]>) -> [u8; 32] {
    if level.len() == 1 {
        return level[0];
    }
    let mut padded = level.clone();
    if padded.len() % 2 == 1 {
        padded.push(*padded.last().unwrap());
    }
    let next = padded
        .chunks(2)
        .map(|p| {
            let mut h = Sha256::new();
            h.update(p[0]);
            h.update(p[1]);
            h.finalize().into()
        })
        .collect();
    reference(next)
}

proptest! {
    #[test]
    fn root_matches_reference(leaves in prop::collection::vec(any::<[u8; 32]>(), 1..=16)) {
        let ds: Vec<Digest> = leaves.iter().map(|l| Digest(*l)).collect();
        prop_assert_eq!(merkle_root_of_leaves(&ds).unwrap().0, reference(leaves));
    }

    #[test]
    fn any_leaf_change_moves_root(leaves in prop::collection::vec(any::<[u8; 32]>(), 1..=16),
                                  pick: prop::sample::Index, bit in 0usize..256) {
        let ds: Vec<Digest> = leaves.iter().map(|l| Digest(*l)).collect();
        let mut changed = ds.clone();
        let i = pick.index(ds.len());
        changed[i].0[bit / 8] ^= 1 << (bit % 8);
        prop_assert_ne!(merkle_root_of_leaves(&ds).unwrap(), merkle_root_of_leaves(&changed).unwrap());
    }
}
