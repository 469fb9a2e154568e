use crate::crypto::{hash, Digest};

use super::{LedgerError, Transaction};

/// Bitcoin-style binary tree: an odd node at any level is paired with
/// itself, and a single leaf is its own root.
pub fn merkle_root_of_leaves(leaves: &[Digest]) -> Result<Digest, LedgerError> {
    if leaves.is_empty() {
        return Err(LedgerError::EmptyBlock);
    }
    let mut level = leaves.to_vec();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| {
                let right = pair.get(1).unwrap_or(&pair[0]);
                node_hash(&pair[0], right)
            })
            .collect();
    }
    Ok(level[0])
}

pub fn node_hash(left: &Digest, right: &Digest) -> Digest {
    let mut buf = [0u8; 64];
    buf[..32].copy_from_slice(left.as_bytes());
    buf[32..].copy_from_slice(right.as_bytes());
    hash(&buf)
}

pub fn merkle_root(txs: &[Transaction]) -> Result<Digest, LedgerError> {
    let leaves: Vec<Digest> = txs.iter().map(Transaction::leaf_digest).collect();
    merkle_root_of_leaves(&leaves)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(i: u8) -> Digest {
        hash(&[i])
    }

    #[test]
    fn single_leaf_is_root() {
        assert_eq!(merkle_root_of_leaves(&[leaf(1)]).unwrap(), leaf(1));
    }

    #[test]
    fn two_leaves_concatenate() {
        let mut buf = leaf(1).0.to_vec();
        buf.extend_from_slice(&leaf(2).0);
        assert_eq!(merkle_root_of_leaves(&[leaf(1), leaf(2)]).unwrap(), hash(&buf));
    }

    #[test]
    fn three_leaves_duplicate_last() {
        let l = [leaf(1), leaf(2), leaf(3)];
        let expected = node_hash(&node_hash(&l[0], &l[1]), &node_hash(&l[2], &l[2]));
        assert_eq!(merkle_root_of_leaves(&l).unwrap(), expected);
    }

    #[test]
    fn empty_is_error() {
        assert_eq!(merkle_root_of_leaves(&[]), Err(LedgerError::EmptyBlock));
        assert_eq!(merkle_root(&[]), Err(LedgerError::EmptyBlock));
    }
}
