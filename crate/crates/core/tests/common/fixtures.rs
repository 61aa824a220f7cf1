//! Hand-built views shared by several test targets.

#![allow(dead_code)]

use std::sync::Arc;

use gasperlab_core::*;

/// Branch votes justify a pair that no block on that branch ever records,
/// while the other branch carries its own justification in a block.
pub fn unrecorded_justification_view() -> (View, BlockId, BlockId) {
    let vs = Arc::new(ValidatorSet::uniform(3));
    let mut v = View::new(2, vs);
    let x = Block::new(ValidatorId(0), 2, BlockId::GENESIS, vec![], vec![]);
    v.deliver(x.clone()).unwrap();
    let x_pair = CheckpointPair::new(x.id, 1);
    let first: Vec<Attestation> = (0..3)
        .map(|i| Attestation::new(ValidatorId(i), 2 + u64::from(i % 2), x.id, CheckpointPair::GENESIS, x_pair))
        .collect();
    for a in &first {
        v.deliver(a.clone()).unwrap();
    }
    let recorded = Block::new(ValidatorId(1), 4, x.id, first.iter().map(|a| a.id).collect(), b"kept".to_vec());
    let bare = Block::new(ValidatorId(2), 4, x.id, vec![], b"bare".to_vec());
    v.deliver(recorded.clone()).unwrap();
    v.deliver(bare.clone()).unwrap();
    for i in 0..3 {
        let a = Attestation::new(ValidatorId(i), 4 + u64::from(i % 2), bare.id, x_pair, CheckpointPair::new(bare.id, 2));
        v.deliver(a).unwrap();
    }
    (v, recorded.id, bare.id)
}
