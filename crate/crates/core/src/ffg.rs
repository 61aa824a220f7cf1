use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::committees::Committees;
use crate::error::{Error, Result};
use crate::fork_choice::{self, ForkChoiceOptions};
use crate::types::*;
use crate::view::View;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupermajorityLink {
    pub source: CheckpointPair,
    pub target: CheckpointPair,
    pub weight: Stake,
}

pub type JustifiedSet = BTreeSet<CheckpointPair>;
pub type FinalizedSet = BTreeSet<CheckpointPair>;

/// A finalized pair together with the smallest k witnessing it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Finalization {
    pub pair: CheckpointPair,
    pub k: u64,
}

/// Stake behind every checkpoint edge, counting each author once per edge.
pub fn edge_weights<'a>(
    atts: impl IntoIterator<Item = &'a Attestation>,
    validators: &ValidatorSet,
) -> BTreeMap<(CheckpointPair, CheckpointPair), Stake> {
    let mut voters: BTreeMap<(CheckpointPair, CheckpointPair), BTreeSet<ValidatorId>> = BTreeMap::new();
    for a in atts {
        voters.entry((a.source, a.target)).or_default().insert(a.author);
    }
    voters
        .into_iter()
        .map(|(edge, vs)| (edge, vs.into_iter().map(|v| validators.stake(v)).sum()))
        .collect()
}

pub fn links_from<'a>(
    atts: impl IntoIterator<Item = &'a Attestation>,
    validators: &ValidatorSet,
) -> Vec<SupermajorityLink> {
    edge_weights(atts, validators)
        .into_iter()
        .filter(|((s, t), w)| s.epoch < t.epoch && validators.is_supermajority(*w))
        .map(|((source, target), weight)| SupermajorityLink { source, target, weight })
        .collect()
}

/// Forward closure of supermajority links from the genesis pair.
pub fn closure_from_links(links: &[SupermajorityLink]) -> JustifiedSet {
    let mut out_edges: BTreeMap<CheckpointPair, Vec<CheckpointPair>> = BTreeMap::new();
    for l in links {
        out_edges.entry(l.source).or_default().push(l.target);
    }
    let mut j = BTreeSet::from([CheckpointPair::GENESIS]);
    let mut stack = vec![CheckpointPair::GENESIS];
    while let Some(p) = stack.pop() {
        for t in out_edges.get(&p).into_iter().flatten() {
            if j.insert(*t) {
                stack.push(*t);
            }
        }
    }
    j
}

pub fn justified_from<'a>(
    atts: impl IntoIterator<Item = &'a Attestation>,
    validators: &ValidatorSet,
) -> JustifiedSet {
    closure_from_links(&links_from(atts, validators))
}

pub fn supermajority_links(view: &View) -> Vec<SupermajorityLink> {
    links_from(view.attestations(), view.validators())
}

pub fn justified(view: &View) -> JustifiedSet {
    justified_from(view.attestations(), view.validators())
}

/// Highest-epoch pair; ties across blocks go to the smallest block id and
/// set the flag (such a tie means the view is slashable).
pub fn highest_pair<'a>(pairs: impl IntoIterator<Item = &'a CheckpointPair>) -> (CheckpointPair, bool) {
    let mut best = CheckpointPair::GENESIS;
    let mut tie = false;
    for p in pairs {
        if p.epoch > best.epoch || (p.epoch == best.epoch && p.block < best.block) {
            tie = p.epoch == best.epoch && p.block != best.block;
            best = *p;
        } else if p.epoch == best.epoch && p.block != best.block {
            tie = true;
        }
    }
    (best, tie)
}

/// Every k-finalization in the view (general k), smallest k per pair.
pub fn finalizations(view: &View) -> Vec<Finalization> {
    let links = supermajority_links(view);
    let j = closure_from_links(&links);
    let mut best: BTreeMap<CheckpointPair, u64> = BTreeMap::new();
    best.insert(CheckpointPair::GENESIS, 0);
    for l in &links {
        if !j.contains(&l.source) || !view.has_block(l.target.block) {
            continue;
        }
        if let Some(k) = finalization_span(view, &j, l.source, l.target) {
            let e = best.entry(l.source).or_insert(k);
            *e = (*e).min(k);
        }
    }
    best.into_iter().map(|(pair, k)| Finalization { pair, k }).collect()
}

// k if the link source -> target spans adjacent boundary pairs on
// chain(target) whose intermediate members are all justified.
fn finalization_span(view: &View, j: &JustifiedSet, source: CheckpointPair, target: CheckpointPair) -> Option<u64> {
    let k = target.epoch.checked_sub(source.epoch)?;
    if k == 0 {
        return None;
    }
    if view.ebb(target.block, source.epoch).ok()? != source {
        return None;
    }
    if view.ebb(target.block, target.epoch).ok()? != target {
        return None;
    }
    for i in 1..k {
        let p = view.ebb(target.block, source.epoch + i).ok()?;
        if !j.contains(&p) {
            return None;
        }
    }
    Some(k)
}

pub fn finalized(view: &View) -> FinalizedSet {
    finalizations(view).into_iter().map(|f| f.pair).collect()
}

/// The practical rule that only inspects four consecutive boundary pairs
/// P1..P4 of a chain at a time. Windows are slid over every leaf's chain.
pub fn finalized_four_case(view: &View) -> FinalizedSet {
    let links: BTreeSet<(CheckpointPair, CheckpointPair)> =
        supermajority_links(view).into_iter().map(|l| (l.source, l.target)).collect();
    let j = closure_from_links(
        &links
            .iter()
            .map(|(s, t)| SupermajorityLink { source: *s, target: *t, weight: 0.0 })
            .collect::<Vec<_>>(),
    );
    let max_epoch = j.iter().map(|p| p.epoch).max().unwrap_or(0);
    let mut out = BTreeSet::from([CheckpointPair::GENESIS]);
    for leaf in view.leaves() {
        for e in 1..=max_epoch {
            let window = four_window(view, leaf, e);
            for pair in four_case_window(&window, &j, &links) {
                out.insert(pair);
            }
        }
    }
    out
}

// [P1, P2, P3, P4] ending at epoch e on chain(leaf); missing slots before epoch 0 are None.
fn four_window(view: &View, leaf: BlockId, e: Epoch) -> [Option<CheckpointPair>; 4] {
    let mut w = [None; 4];
    for (idx, back) in (0..4u64).rev().enumerate() {
        if let Some(ep) = e.checked_sub(back) {
            w[idx] = view.ebb(leaf, ep).ok();
        }
    }
    w
}

/// The four finalization rules applied to one window.
pub fn four_case_window(
    w: &[Option<CheckpointPair>; 4],
    j: &JustifiedSet,
    links: &BTreeSet<(CheckpointPair, CheckpointPair)>,
) -> Vec<CheckpointPair> {
    let jst = |p: Option<CheckpointPair>| p.is_some_and(|p| j.contains(&p));
    let link = |a: Option<CheckpointPair>, b: Option<CheckpointPair>| match (a, b) {
        (Some(a), Some(b)) => links.contains(&(a, b)),
        _ => false,
    };
    let [p1, p2, p3, p4] = *w;
    let mut out = Vec::new();
    if jst(p1) && jst(p2) && jst(p3) && link(p1, p3) {
        out.push(p1.unwrap());
    }
    if jst(p2) && jst(p3) && link(p2, p3) {
        out.push(p2.unwrap());
    }
    if jst(p2) && jst(p3) && jst(p4) && link(p2, p4) {
        out.push(p2.unwrap());
    }
    if jst(p3) && jst(p4) && link(p3, p4) {
        out.push(p3.unwrap());
    }
    out
}

/// Attestation for `slot` voting for `head`: target is the boundary pair of
/// the head in the attestation's epoch, source the highest justified pair
/// of the head's FFG view.
pub fn build_attestation(view: &View, author: ValidatorId, slot: Slot, head: BlockId) -> Result<Attestation> {
    let epoch = view.epoch_of(slot);
    if view.block(head)?.slot > slot {
        return Err(Error::InvalidArgument(format!("head {head} is newer than slot {slot}")));
    }
    let target = view.lebb_at(head, slot)?;
    let js = view.ffg_justified(head)?;
    // in epoch 0 both ends are the genesis pair
    let (source, _) = highest_pair(js.iter().filter(|p| p.epoch < epoch || epoch == 0));
    Ok(Attestation::new(author, slot, head, source, target))
}

/// Honest attestation: GHOST vote from the hybrid fork choice.
pub fn make_attestation(
    view: &View,
    committees: &Committees,
    author: ValidatorId,
    slot: Slot,
    opts: &ForkChoiceOptions,
) -> Result<Attestation> {
    if !committees.committee_for_slot(slot).contains(&author) {
        return Err(Error::NotInCommittee { validator: author, slot });
    }
    let head = fork_choice::hlmd_with(view, opts).head;
    build_attestation(view, author, slot, head)
}
