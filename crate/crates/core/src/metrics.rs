//! Thread-local operation counters.
//!
//! The cost contracts of the schemes are part of their interface: signing must
//! perform zero group exponentiations and the warm verification path exactly
//! two. Tests and the benchmark harness pin those contracts by diffing
//! snapshots around an operation. Counters are per-thread so parallel tests do
//! not interfere with each other.

use std::cell::Cell;
use std::ops::Sub;

/// Running counts of the primitive operations performed on this thread.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounts {
    /// Group exponentiations (scalar multiplications on the curve backend).
    pub exp: u64,
    /// Scalar additions.
    pub scalar_add: u64,
    /// Fused scalar multiply-subtract operations.
    pub scalar_mulsub: u64,
    /// Seed-to-scalar chain reductions.
    pub seed_reduce: u64,
    /// PRF evaluations (both scalar and mask outputs).
    pub prf: u64,
    /// Hash-to-scalar evaluations.
    pub hash_to_scalar: u64,
    /// Single hash-chain steps.
    pub chain_step: u64,
}

impl Sub for OpCounts {
    type Output = OpCounts;

    fn sub(self, earlier: OpCounts) -> OpCounts {
        OpCounts {
            exp: self.exp - earlier.exp,
            scalar_add: self.scalar_add - earlier.scalar_add,
            scalar_mulsub: self.scalar_mulsub - earlier.scalar_mulsub,
            seed_reduce: self.seed_reduce - earlier.seed_reduce,
            prf: self.prf - earlier.prf,
            hash_to_scalar: self.hash_to_scalar - earlier.hash_to_scalar,
            chain_step: self.chain_step - earlier.chain_step,
        }
    }
}

thread_local! {
    static COUNTS: Cell<OpCounts> = const { Cell::new(OpCounts {
        exp: 0,
        scalar_add: 0,
        scalar_mulsub: 0,
        seed_reduce: 0,
        prf: 0,
        hash_to_scalar: 0,
        chain_step: 0,
    }) };
}

/// Current counter values for this thread.
pub fn snapshot() -> OpCounts {
    COUNTS.with(Cell::get)
}

pub(crate) fn bump(f: impl FnOnce(&mut OpCounts)) {
    COUNTS.with(|c| {
        let mut v = c.get();
        f(&mut v);
        c.set(v);
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_diff_isolates_window() {
        let before = snapshot();
        bump(|c| c.exp += 3);
        bump(|c| c.prf += 1);
        let delta = snapshot() - before;
        assert_eq!(delta.exp, 3);
        assert_eq!(delta.prf, 1);
        assert_eq!(delta.scalar_add, 0);
    }
}
