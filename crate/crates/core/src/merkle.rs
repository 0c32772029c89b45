//! Binary Merkle tree over per-epoch certification keys.
//!
//! Leaves are padded to the next power of two with the all-zero digest.
//! Interior nodes are domain-tagged, so a path node can never be confused
//! with a leaf preimage.

use crate::keyderive::tagged_sha256;

const TAG_NODE: &[u8] = b"lrsha.v1.fs.node";

pub type Digest32 = [u8; 32];

#[derive(Clone)]
pub struct MerkleTree {
    leaf_count: usize,
    levels: Vec<Vec<Digest32>>,
}

fn node_hash(left: &Digest32, right: &Digest32) -> Digest32 {
    tagged_sha256(TAG_NODE, &[left, right])
}

impl MerkleTree {
    /// Build a tree over the given leaves. Panics on an empty leaf set.
    pub fn from_leaves(mut leaves: Vec<Digest32>) -> Self {
        assert!(!leaves.is_empty(), "merkle tree needs at least one leaf");
        let leaf_count = leaves.len();
        let padded = leaf_count.next_power_of_two();
        leaves.resize(padded, [0u8; 32]);

        let mut levels = vec![leaves];
        while levels.last().unwrap().len() > 1 {
            let below = levels.last().unwrap();
            let mut level = Vec::with_capacity(below.len() / 2);
            for pair in below.chunks_exact(2) {
                level.push(node_hash(&pair[0], &pair[1]));
            }
            levels.push(level);
        }
        MerkleTree { leaf_count, levels }
    }

    pub fn root(&self) -> Digest32 {
        self.levels.last().unwrap()[0]
    }

    /// Number of real (unpadded) leaves.
    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn leaves(&self) -> &[Digest32] {
        &self.levels[0][..self.leaf_count]
    }

    /// Sibling path from leaf `index` up to (excluding) the root.
    pub fn path(&self, index: usize) -> Vec<Digest32> {
        assert!(index < self.levels[0].len(), "leaf index out of range");
        let mut path = Vec::with_capacity(self.levels.len() - 1);
        let mut idx = index;
        for level in &self.levels[..self.levels.len() - 1] {
            path.push(level[idx ^ 1]);
            idx >>= 1;
        }
        path
    }
}

/// Fold a sibling path back up and compare against the root.
pub fn verify_path(root: &Digest32, index: u64, leaf: &Digest32, path: &[Digest32]) -> bool {
    if path.len() >= 64 || (path.len() < 64 && index >> path.len() != 0) {
        return false;
    }
    let mut acc = *leaf;
    let mut idx = index;
    for sibling in path {
        acc = if idx & 1 == 0 {
            node_hash(&acc, sibling)
        } else {
            node_hash(sibling, &acc)
        };
        idx >>= 1;
    }
    acc == *root
}
