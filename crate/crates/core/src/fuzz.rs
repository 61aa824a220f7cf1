//! Random view generators and the property runs built on them.

use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ffg::{self, build_attestation};
use crate::slashing::{self, Detection};
use crate::types::*;
use crate::view::View;

pub use crate::simulator::{fuzz_plausible_liveness, liveness_case, LivenessFailure, LivenessReport};

fn random_stakes<R: Rng>(rng: &mut R, n: usize) -> ValidatorSet {
    if rng.random_bool(0.5) {
        return ValidatorSet::uniform(n);
    }
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
    let s: f64 = raw.iter().sum();
    ValidatorSet::new(raw.iter().map(|x| x * n as f64 / s).collect()).expect("normalized stakes")
}

/// A random valid view with at most `max_blocks` blocks (genesis included)
/// and `max_atts` attestations. Attestations are produced by
/// `build_attestation` on random blocks, so justification does occur.
pub fn random_view<R: Rng>(rng: &mut R, max_blocks: usize, max_atts: usize) -> View {
    let n = rng.random_range(3..=9usize);
    let c = rng.random_range(1..=4u64);
    let vs = Arc::new(random_stakes(rng, n));
    let mut view = View::new(c, vs);
    let n_blocks = rng.random_range(1..=max_blocks.max(1));
    let n_atts = rng.random_range(0..=max_atts);
    let mut blocks = vec![BlockId::GENESIS];
    let mut atts = 0;
    let mut nonce = 0u64;
    while blocks.len() < n_blocks || atts < n_atts {
        let make_block = atts >= n_atts || (blocks.len() < n_blocks && rng.random_bool(0.3));
        if make_block {
            let parent = *blocks.choose(rng).unwrap();
            let ps = view.block(parent).unwrap().slot;
            let slot = ps + rng.random_range(1..=3);
            let include: Vec<AttestationId> = view
                .attestations()
                .filter(|a| a.slot < slot && rng.random_bool(0.5))
                .map(|a| a.id)
                .collect();
            nonce += 1;
            let proposer = ValidatorId(rng.random_range(0..n as u32));
            let b = Block::new(proposer, slot, parent, include, nonce.to_le_bytes().to_vec());
            view.deliver(b.clone()).expect("generated block is valid");
            blocks.push(b.id);
        } else {
            let head = *blocks.choose(rng).unwrap();
            let slot = view.block(head).unwrap().slot + rng.random_range(0..=3);
            let author = ValidatorId(rng.random_range(0..n as u32));
            let a = build_attestation(&view, author, slot, head).expect("head is accepted");
            view.deliver(a).expect("generated attestation is valid");
            atts += 1;
        }
    }
    view
}

/// Pairs of finalized checkpoints whose blocks conflict.
pub fn conflicting_finalized(view: &View) -> Vec<(CheckpointPair, CheckpointPair)> {
    let f: Vec<CheckpointPair> = ffg::finalized(view).into_iter().collect();
    let mut out = Vec::new();
    for i in 0..f.len() {
        for j in i + 1..f.len() {
            if view.conflicts(f[i].block, f[j].block).unwrap_or(false) {
                out.push((f[i], f[j]));
            }
        }
    }
    out
}

fn supermajority_subset<R: Rng>(rng: &mut R, vs: &ValidatorSet) -> Vec<ValidatorId> {
    let mut ids: Vec<ValidatorId> = vs.ids().collect();
    ids.shuffle(rng);
    let mut w = 0.0;
    let mut out = Vec::new();
    for v in ids {
        if vs.is_supermajority(w) {
            break;
        }
        w += vs.stake(v);
        out.push(v);
    }
    out
}

/// Adds a branch from `fork` with one boundary block per target epoch and
/// supermajority votes linking each target to the previous one (or, with
/// some probability, to the one before, giving 2-finalizations).
fn add_branch<R: Rng>(rng: &mut R, view: &mut View, fork: BlockId, tag: &[u8], start_epoch: Epoch) {
    let c = view.slots_per_epoch();
    let vs = view.validators().clone();
    let mut epochs = Vec::new();
    let mut e = start_epoch;
    for _ in 0..rng.random_range(2..=4) {
        e += if rng.random_bool(0.7) { 1 } else { 2 };
        epochs.push(e);
    }
    let mut parent = fork;
    let mut justified: Vec<CheckpointPair> = vec![CheckpointPair::GENESIS];
    for e in epochs {
        let proposer = ValidatorId(rng.random_range(0..vs.len() as u32));
        let b = Block::new(proposer, e * c, parent, vec![], tag.to_vec());
        view.deliver(b.clone()).expect("branch block is valid");
        parent = b.id;
        let source = if justified.len() >= 2 && rng.random_bool(0.25) {
            justified[justified.len() - 2]
        } else {
            *justified.last().unwrap()
        };
        let target = view.lebb(b.id).unwrap();
        let voters = supermajority_subset(rng, &vs);
        for v in voters {
            let slot = e * c + rng.random_range(0..c);
            let a = Attestation::new(v, slot, b.id, source, target);
            view.deliver(a).expect("branch attestation is valid");
        }
        justified.push(target);
    }
}

/// A view in which two branches each gather supermajority links.
pub fn conflicting_view<R: Rng>(rng: &mut R) -> View {
    let n = rng.random_range(4..=16usize);
    let c = rng.random_range(1..=4u64);
    let vs = Arc::new(random_stakes(rng, n));
    let mut view = View::new(c, vs);
    // short common prefix inside epoch 0
    let mut fork = BlockId::GENESIS;
    for s in 1..c.min(1 + rng.random_range(0..3)) {
        let b = Block::new(ValidatorId(0), s, fork, vec![], b"prefix".to_vec());
        view.deliver(b.clone()).unwrap();
        fork = b.id;
    }
    add_branch(rng, &mut view, fork, b"left", 0);
    add_branch(rng, &mut view, fork, b"right", 0);
    // a little unrelated noise
    let leaves = view.leaves();
    for _ in 0..rng.random_range(0..10) {
        let head = *leaves.choose(rng).unwrap();
        let slot = view.block(head).unwrap().slot + rng.random_range(0..c);
        let author = ValidatorId(rng.random_range(0..n as u32));
        let a = build_attestation(&view, author, slot, head).unwrap();
        view.deliver(a).unwrap();
    }
    view
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SafetyReport {
    pub cases: u64,
    /// Views whose finalized set contained conflicting blocks.
    pub conflicting: u64,
    /// Smallest slashable-stake fraction among conflicting views.
    pub min_slashable_fraction: Option<f64>,
    /// Seeds of conflicting views with less than a third slashable.
    pub failures: Vec<u64>,
}

pub fn safety_case(seed: u64) -> (View, Vec<(CheckpointPair, CheckpointPair)>, Detection) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let view = conflicting_view(&mut rng);
    let conflicts = conflicting_finalized(&view);
    let det = slashing::detect(&view);
    (view, conflicts, det)
}

pub fn fuzz_safety(seed: u64, n_cases: u64) -> SafetyReport {
    let mut report = SafetyReport { cases: n_cases, ..Default::default() };
    for case in 0..n_cases {
        let s = seed.wrapping_mul(1_000_003).wrapping_add(case);
        let (view, conflicts, det) = safety_case(s);
        if conflicts.is_empty() {
            continue;
        }
        report.conflicting += 1;
        let total = view.validators().total();
        let frac = det.slashable_stake / total;
        report.min_slashable_fraction = Some(report.min_slashable_fraction.map_or(frac, |m: f64| m.min(frac)));
        if 3.0 * det.slashable_stake < total - 1e-9 * total {
            report.failures.push(s);
        }
    }
    report
}
