use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::*;
use crate::view::View;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViolationKind {
    /// Two distinct attestations in the same epoch.
    S1,
    /// One checkpoint edge strictly surrounds the other.
    S2,
    /// Two blocks proposed for the same slot.
    DoubleProposal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlashingEvidence {
    pub author: ValidatorId,
    pub kind: ViolationKind,
    pub first: MessageId,
    pub second: MessageId,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub evidence: Vec<SlashingEvidence>,
    pub offenders: BTreeSet<ValidatorId>,
    pub slashable_stake: Stake,
}

pub fn check_pair(a1: &Attestation, a2: &Attestation, slots_per_epoch: u64) -> Result<Option<ViolationKind>> {
    if a1.author != a2.author {
        return Err(Error::InvalidArgument(format!(
            "attestations by different authors {} and {}",
            a1.author, a2.author
        )));
    }
    if a1.id == a2.id {
        return Ok(None);
    }
    if a1.epoch(slots_per_epoch) == a2.epoch(slots_per_epoch) {
        return Ok(Some(ViolationKind::S1));
    }
    let surrounds = |o: &Attestation, i: &Attestation| {
        o.source.epoch < i.source.epoch && i.source.epoch < i.target.epoch && i.target.epoch < o.target.epoch
    };
    if surrounds(a1, a2) || surrounds(a2, a1) {
        return Ok(Some(ViolationKind::S2));
    }
    Ok(None)
}

/// Scans a set of messages for slashable pairs. Stake is counted once per
/// offending author.
pub fn detect_in<'a>(
    atts: impl IntoIterator<Item = &'a Attestation>,
    blocks: impl IntoIterator<Item = &'a Block>,
    validators: &ValidatorSet,
    slots_per_epoch: u64,
) -> Detection {
    let mut by_author: BTreeMap<ValidatorId, Vec<&Attestation>> = BTreeMap::new();
    for a in atts {
        by_author.entry(a.author).or_default().push(a);
    }
    let mut evidence = Vec::new();
    for (author, mut list) in by_author {
        list.sort_by_key(|a| a.id);
        list.dedup_by_key(|a| a.id);
        for i in 0..list.len() {
            for j in i + 1..list.len() {
                if let Some(kind) = check_pair(list[i], list[j], slots_per_epoch).expect("same author") {
                    evidence.push(SlashingEvidence {
                        author,
                        kind,
                        first: MessageId::Attestation(list[i].id),
                        second: MessageId::Attestation(list[j].id),
                    });
                }
            }
        }
    }
    let mut by_slot: BTreeMap<(ValidatorId, Slot), BTreeSet<BlockId>> = BTreeMap::new();
    for b in blocks {
        if let Some(p) = b.proposer {
            by_slot.entry((p, b.slot)).or_default().insert(b.id);
        }
    }
    for ((author, _), ids) in by_slot {
        let ids: Vec<_> = ids.into_iter().collect();
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                evidence.push(SlashingEvidence {
                    author,
                    kind: ViolationKind::DoubleProposal,
                    first: MessageId::Block(ids[i]),
                    second: MessageId::Block(ids[j]),
                });
            }
        }
    }
    evidence.sort_by_key(|e| (e.author, e.kind, e.first, e.second));
    let offenders: BTreeSet<ValidatorId> = evidence.iter().map(|e| e.author).collect();
    let slashable_stake = offenders.iter().map(|v| validators.stake(*v)).sum();
    Detection { evidence, offenders, slashable_stake }
}

pub fn detect(view: &View) -> Detection {
    detect_in(view.attestations(), view.blocks(), view.validators(), view.slots_per_epoch())
}

/// Stake bookkeeping between a base validator set and two later sets that
/// each finalized one side of a conflict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidatorSetDiff {
    pub w_left: Stake,
    pub w_right: Stake,
    pub a_left: Stake,
    pub e_left: Stake,
    pub a_right: Stake,
    pub e_right: Stake,
}

impl ValidatorSetDiff {
    /// Builds the diff from explicit stake maps. Activations are weighed in
    /// the later set, exits in the base set.
    pub fn from_sets(
        base: &BTreeMap<ValidatorId, Stake>,
        left: &BTreeMap<ValidatorId, Stake>,
        right: &BTreeMap<ValidatorId, Stake>,
    ) -> Self {
        let activated = |x: &BTreeMap<ValidatorId, Stake>| -> Stake {
            x.iter().filter(|(v, _)| !base.contains_key(v)).map(|(_, s)| s).sum()
        };
        let exited = |x: &BTreeMap<ValidatorId, Stake>| -> Stake {
            base.iter().filter(|(v, _)| !x.contains_key(v)).map(|(_, s)| s).sum()
        };
        ValidatorSetDiff {
            w_left: left.values().sum(),
            w_right: right.values().sum(),
            a_left: activated(left),
            e_left: exited(left),
            a_right: activated(right),
            e_right: exited(right),
        }
    }
}

/// Guaranteed slashable stake when conflicting blocks are finalized under
/// different validator sets. Can be negative under heavy churn.
pub fn dynamic_safety_bound(d: &ValidatorSetDiff) -> Stake {
    let left = d.w_left - d.a_left - d.e_right;
    let right = d.w_right - d.a_right - d.e_left;
    left.max(right) - d.w_left / 3.0 - d.w_right / 3.0
}

/// The weaker linear-combination form of the same guarantee.
pub fn linear_combination_bound(d: &ValidatorSetDiff) -> Stake {
    d.w_left / 3.0 - (2.0 * d.a_left / 3.0 + 2.0 * d.e_right / 3.0 + d.a_right / 3.0 + d.e_left / 3.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChurnPolicy {
    /// At most k stake enters or leaves per epoch.
    Constant,
    /// Stake may grow by a factor (1 + k) per epoch.
    Proportional,
}

pub fn churn_bound(policy: ChurnPolicy, k: f64, dt: f64, w0: Stake) -> Result<Stake> {
    if k < 0.0 || dt < 0.0 || w0 < 0.0 || !k.is_finite() || !dt.is_finite() || !w0.is_finite() {
        return Err(Error::InvalidArgument("churn inputs must be finite and nonnegative".into()));
    }
    Ok(match policy {
        ChurnPolicy::Constant => k * dt,
        ChurnPolicy::Proportional => w0 * (1.0 + k).powf(dt),
    })
}
