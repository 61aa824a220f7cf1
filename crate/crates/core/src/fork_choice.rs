use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ffg::{self, highest_pair};
use crate::types::*;
use crate::view::View;

/// Per validator, the attestation with the highest slot (smallest id on ties).
pub type LatestMessageMap = BTreeMap<ValidatorId, Attestation>;

/// Filters applied to the attestations that feed GHOST weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ForkChoiceOptions {
    /// Only attestations with slot strictly below this are counted.
    pub before_slot: Option<Slot>,
    /// Attestations from epochs below this are dropped as stale.
    pub min_epoch: Option<Epoch>,
}

impl ForkChoiceOptions {
    fn admits(&self, a: &Attestation, slots_per_epoch: u64) -> bool {
        if self.before_slot.is_some_and(|s| a.slot >= s) {
            return false;
        }
        if self.min_epoch.is_some_and(|e| a.epoch(slots_per_epoch) < e) {
            return false;
        }
        true
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentStep {
    pub parent: BlockId,
    pub candidates: Vec<(BlockId, Stake)>,
    pub chosen: BlockId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForkChoiceOutcome {
    pub head: BlockId,
    /// Pair the descent started from.
    pub start: CheckpointPair,
    /// Set when several blocks share the highest justified epoch.
    pub tie: bool,
    pub steps: Vec<DescentStep>,
}

pub fn latest_messages(view: &View) -> LatestMessageMap {
    latest_messages_with(view, &ForkChoiceOptions::default())
}

pub fn latest_messages_with(view: &View, opts: &ForkChoiceOptions) -> LatestMessageMap {
    let c = view.slots_per_epoch();
    let mut m: LatestMessageMap = BTreeMap::new();
    for a in view.attestations().filter(|a| opts.admits(a, c)) {
        match m.get(&a.author) {
            Some(cur) if (cur.slot, std::cmp::Reverse(cur.id)) >= (a.slot, std::cmp::Reverse(a.id)) => {}
            _ => {
                m.insert(a.author, a.clone());
            }
        }
    }
    m
}

/// Stake of validators whose latest message votes for `b` or a descendant.
pub fn ghost_weight(view: &View, b: BlockId, m: &LatestMessageMap) -> Result<Stake> {
    view.block(b)?;
    let mut w = 0.0;
    for (v, a) in m {
        if view.is_ancestor(b, a.block)? {
            w += view.validators().stake(*v);
        }
    }
    Ok(w)
}

/// Weights of all blocks at once. Every block's sum is accumulated in
/// validator order, so the result is bit-identical to `ghost_weight`.
pub fn subtree_weights(view: &View, m: &LatestMessageMap) -> BTreeMap<BlockId, Stake> {
    let mut w: BTreeMap<BlockId, Stake> = view.blocks().map(|b| (b.id, 0.0)).collect();
    for (v, a) in m {
        let s = view.validators().stake(*v);
        let mut cur = Some(a.block);
        while let Some(b) = cur {
            *w.get_mut(&b).expect("vote targets an accepted block") += s;
            cur = view.block(b).ok().and_then(|blk| blk.parent);
        }
    }
    w
}

fn descend(
    view: &View,
    start: BlockId,
    weights: &BTreeMap<BlockId, Stake>,
    allowed: Option<&BTreeSet<BlockId>>,
) -> (BlockId, Vec<DescentStep>) {
    let mut cur = start;
    let mut steps = Vec::new();
    loop {
        let candidates: Vec<(BlockId, Stake)> = view
            .children(cur)
            .iter()
            .filter(|c| allowed.is_none_or(|a| a.contains(c)))
            .map(|c| (*c, weights[c]))
            .collect();
        // children are in id order, so a strict comparison keeps the smallest id on ties
        let Some(&(best, _)) = candidates
            .iter()
            .fold(None, |acc: Option<&(BlockId, Stake)>, c| match acc {
                Some(b) if b.1 >= c.1 => Some(b),
                _ => Some(c),
            })
        else {
            return (cur, steps);
        };
        steps.push(DescentStep { parent: cur, candidates, chosen: best });
        cur = best;
    }
}

/// Plain LMD GHOST from genesis.
pub fn lmd_ghost(view: &View) -> BlockId {
    lmd_ghost_with(view, &ForkChoiceOptions::default()).head
}

pub fn lmd_ghost_with(view: &View, opts: &ForkChoiceOptions) -> ForkChoiceOutcome {
    let m = latest_messages_with(view, opts);
    let w = subtree_weights(view, &m);
    let (head, steps) = descend(view, BlockId::GENESIS, &w, None);
    ForkChoiceOutcome { head, start: CheckpointPair::GENESIS, tie: false, steps }
}

/// The first-draft hybrid rule: start from the highest justified pair of the
/// whole view. Kept as a reference; it can follow a branch whose own FFG
/// view never justified that pair.
pub fn hlmd_prototype(view: &View) -> BlockId {
    hlmd_prototype_with(view, &ForkChoiceOptions::default()).head
}

pub fn hlmd_prototype_with(view: &View, opts: &ForkChoiceOptions) -> ForkChoiceOutcome {
    let j = ffg::justified(view);
    let (start, tie) = highest_pair(j.iter().filter(|p| view.has_block(p.block)));
    let m = latest_messages_with(view, opts);
    let w = subtree_weights(view, &m);
    let (head, steps) = descend(view, start.block, &w, None);
    ForkChoiceOutcome { head, start, tie, steps }
}

/// Hybrid LMD GHOST.
pub fn hlmd(view: &View) -> BlockId {
    hlmd_with(view, &ForkChoiceOptions::default()).head
}

pub fn hlmd_with(view: &View, opts: &ForkChoiceOptions) -> ForkChoiceOutcome {
    let (start, tie, allowed) = filtered_tree(view);
    let m = latest_messages_with(view, opts);
    let w = subtree_weights(view, &m);
    // a start block off every admitted chain can only arise in slashable views
    let (head, steps) = if allowed.contains(&start.block) {
        descend(view, start.block, &w, Some(&allowed))
    } else {
        (start.block, Vec::new())
    };
    ForkChoiceOutcome { head, start, tie, steps }
}

/// The starting pair of `hlmd` and the union of the chains of the leaves
/// whose FFG view justifies it.
pub fn hlmd_filtered_blocks(view: &View) -> (CheckpointPair, BTreeSet<BlockId>) {
    let (start, _, allowed) = filtered_tree(view);
    (start, allowed)
}

fn filtered_tree(view: &View) -> (CheckpointPair, bool, BTreeSet<BlockId>) {
    let leaves = view.leaves();
    let per_leaf: Vec<_> = leaves
        .iter()
        .map(|l| view.ffg_justified(*l).expect("leaf is accepted"))
        .collect();
    let (start, tie) = highest_pair(per_leaf.iter().flat_map(|j| j.iter()));
    let mut allowed = BTreeSet::new();
    for (leaf, j) in leaves.iter().zip(&per_leaf) {
        if j.contains(&start) {
            allowed.extend(view.chain(*leaf).expect("leaf is accepted"));
        }
    }
    (start, tie, allowed)
}
