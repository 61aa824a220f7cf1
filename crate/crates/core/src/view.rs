use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ffg;
use crate::types::*;

/// A message that was dropped because it failed validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub id: MessageId,
    pub reason: String,
}

/// A validator's local state: accepted messages forming a block tree rooted at
/// genesis, plus messages that were seen but are still waiting on a dependency
/// or on the local clock.
#[derive(Clone, Debug)]
pub struct View {
    slots_per_epoch: u64,
    validators: Arc<ValidatorSet>,
    clock: Option<f64>,
    blocks: BTreeMap<BlockId, Block>,
    children: BTreeMap<BlockId, Vec<BlockId>>,
    attestations: BTreeMap<AttestationId, Attestation>,
    order: Vec<MessageId>,
    // missing dependency -> messages blocked on it
    waiting: BTreeMap<MessageId, Vec<MessageId>>,
    buffered: BTreeMap<MessageId, Message>,
    future: BTreeMap<MessageId, Message>,
    rejected: Vec<Rejection>,
    // J(view(B)) for every accepted block B
    justified_at: BTreeMap<BlockId, Arc<BTreeSet<CheckpointPair>>>,
}

impl View {
    /// A view that has accepted genesis and nothing else.
    pub fn new(slots_per_epoch: u64, validators: Arc<ValidatorSet>) -> Self {
        let mut v = View::empty(slots_per_epoch, validators);
        v.deliver(Block::genesis()).expect("genesis is well formed");
        v
    }

    pub fn empty(slots_per_epoch: u64, validators: Arc<ValidatorSet>) -> Self {
        assert!(slots_per_epoch > 0, "slots_per_epoch must be positive");
        View {
            slots_per_epoch,
            validators,
            clock: None,
            blocks: BTreeMap::new(),
            children: BTreeMap::new(),
            attestations: BTreeMap::new(),
            order: Vec::new(),
            waiting: BTreeMap::new(),
            buffered: BTreeMap::new(),
            future: BTreeMap::new(),
            rejected: Vec::new(),
            justified_at: BTreeMap::new(),
        }
    }

    /// Enables the timestamp gate: messages claiming a time later than the
    /// clock are held back until the clock catches up.
    pub fn with_clock(mut self, t: f64) -> Self {
        self.clock = Some(t);
        self
    }

    pub fn slots_per_epoch(&self) -> u64 {
        self.slots_per_epoch
    }

    pub fn validators(&self) -> &Arc<ValidatorSet> {
        &self.validators
    }

    pub fn clock(&self) -> Option<f64> {
        self.clock
    }

    pub fn epoch_of(&self, slot: Slot) -> Epoch {
        epoch_of(slot, self.slots_per_epoch)
    }

    // ---- delivery ------------------------------------------------------

    pub fn deliver(&mut self, msg: impl Into<Message>) -> Result<Vec<MessageId>> {
        let msg = msg.into();
        let id = msg.id();
        if self.is_accepted(id) || self.buffered.contains_key(&id) || self.future.contains_key(&id) {
            return Ok(Vec::new());
        }
        if let Err(reason) = self.check_static(&msg) {
            self.rejected.push(Rejection { id, reason: reason.clone() });
            return Err(Error::Malformed { id, reason });
        }
        if let Some(t) = self.clock {
            if msg.timestamp() > t {
                self.future.insert(id, msg);
                return Ok(Vec::new());
            }
        }
        match self.first_missing(&msg) {
            Some(dep) => {
                self.waiting.entry(dep).or_default().push(id);
                self.buffered.insert(id, msg);
                Ok(Vec::new())
            }
            None => {
                if let Err(reason) = self.check_against_view(&msg) {
                    self.rejected.push(Rejection { id, reason: reason.clone() });
                    return Err(Error::Malformed { id, reason });
                }
                let mut out = Vec::new();
                self.accept(msg);
                out.push(id);
                self.cascade(&mut out);
                Ok(out)
            }
        }
    }

    /// Delivers every message, collecting newly accepted ids. Malformed
    /// messages are recorded in `rejections` and skipped.
    pub fn deliver_all<I, M>(&mut self, msgs: I) -> Vec<MessageId>
    where
        I: IntoIterator<Item = M>,
        M: Into<Message>,
    {
        let mut out = Vec::new();
        for m in msgs {
            if let Ok(ids) = self.deliver(m) {
                out.extend(ids);
            }
        }
        out
    }

    /// Moves the local clock forward and releases held-back messages whose
    /// claimed timestamp is now reached, earliest first.
    pub fn advance_clock(&mut self, t: f64) -> Vec<MessageId> {
        if let Some(c) = self.clock {
            if t < c {
                return Vec::new();
            }
        }
        self.clock = Some(t);
        let mut ready: Vec<Message> = Vec::new();
        let due: Vec<MessageId> =
            self.future.iter().filter(|(_, m)| m.timestamp() <= t).map(|(k, _)| *k).collect();
        for k in due {
            ready.push(self.future.remove(&k).unwrap());
        }
        ready.sort_by(|a, b| a.timestamp().total_cmp(&b.timestamp()).then(a.id().cmp(&b.id())));
        self.deliver_all(ready)
    }

    fn cascade(&mut self, out: &mut Vec<MessageId>) {
        let mut i = out.len() - 1;
        while i < out.len() {
            let done = out[i];
            i += 1;
            let Some(blocked) = self.waiting.remove(&done) else { continue };
            for w in blocked {
                let Some(msg) = self.buffered.remove(&w) else { continue };
                match self.first_missing(&msg) {
                    Some(dep) => {
                        self.waiting.entry(dep).or_default().push(w);
                        self.buffered.insert(w, msg);
                    }
                    None => match self.check_against_view(&msg) {
                        Ok(()) => {
                            self.accept(msg);
                            out.push(w);
                        }
                        Err(reason) => self.rejected.push(Rejection { id: w, reason }),
                    },
                }
            }
        }
    }

    fn first_missing(&self, msg: &Message) -> Option<MessageId> {
        msg.dependencies().into_iter().find(|d| !self.is_accepted(*d))
    }

    fn check_static(&self, msg: &Message) -> std::result::Result<(), String> {
        match msg {
            Message::Block(b) => {
                if b.id.is_genesis() {
                    if b.slot != 0 || b.parent.is_some() || !b.newattests.is_empty() {
                        return Err("reserved genesis id on a non-genesis block".into());
                    }
                    return Ok(());
                }
                let Some(parent) = b.parent else {
                    return Err("non-genesis block without parent".into());
                };
                if parent == b.id {
                    return Err("block is its own parent".into());
                }
                if b.slot == 0 {
                    return Err("only genesis may occupy slot 0".into());
                }
                match b.proposer {
                    Some(p) if self.validators.contains(p) => {}
                    Some(p) => return Err(format!("unknown proposer {p}")),
                    None => return Err("missing proposer".into()),
                }
                let distinct: BTreeSet<_> = b.newattests.iter().collect();
                if distinct.len() != b.newattests.len() {
                    return Err("duplicate entries in newattests".into());
                }
                Ok(())
            }
            Message::Attestation(a) => {
                if !self.validators.contains(a.author) {
                    return Err(format!("unknown author {}", a.author));
                }
                if a.target.epoch != self.epoch_of(a.slot) {
                    return Err(format!(
                        "target epoch {} differs from attestation epoch {}",
                        a.target.epoch,
                        self.epoch_of(a.slot)
                    ));
                }
                let epoch_zero_vote = a.target.epoch == 0 && a.source == CheckpointPair::GENESIS;
                if a.source.epoch >= a.target.epoch && !epoch_zero_vote {
                    return Err("source epoch must precede target epoch".into());
                }
                Ok(())
            }
        }
    }

    // Checks that need the dependencies in hand.
    fn check_against_view(&self, msg: &Message) -> std::result::Result<(), String> {
        match msg {
            Message::Block(b) => {
                if let Some(p) = b.parent {
                    let ps = self.blocks[&p].slot;
                    if ps >= b.slot {
                        return Err(format!("parent slot {ps} is not below block slot {}", b.slot));
                    }
                }
                for a in &b.newattests {
                    if self.attestations[a].slot >= b.slot {
                        return Err(format!("included attestation {a} is not older than the block"));
                    }
                }
                Ok(())
            }
            Message::Attestation(a) => {
                let head = &self.blocks[&a.block];
                if head.slot > a.slot {
                    return Err("GHOST vote is newer than the attestation".into());
                }
                let Some(t) = self.blocks.get(&a.target.block) else {
                    return Err("target block is not an ancestor of the GHOST vote".into());
                };
                if t.slot > a.target.epoch * self.slots_per_epoch {
                    return Err("target block lies after its epoch boundary".into());
                }
                if !self.is_ancestor_unchecked(a.target.block, a.block) {
                    return Err("target block is not an ancestor of the GHOST vote".into());
                }
                Ok(())
            }
        }
    }

    fn accept(&mut self, msg: Message) {
        let id = msg.id();
        match msg {
            Message::Block(b) => {
                let bid = b.id;
                if let Some(p) = b.parent {
                    let kids = self.children.entry(p).or_default();
                    let pos = kids.binary_search(&bid).unwrap_or_else(|e| e);
                    kids.insert(pos, bid);
                }
                self.blocks.insert(bid, b);
                let atts = self.closure_attestations(bid);
                let j = ffg::justified_from(atts.iter().map(|a| &self.attestations[a]), &self.validators);
                self.justified_at.insert(bid, Arc::new(j));
            }
            Message::Attestation(a) => {
                self.attestations.insert(a.id, a);
            }
        }
        self.order.push(id);
    }

    // ---- message queries ----------------------------------------------

    pub fn is_accepted(&self, id: MessageId) -> bool {
        match id {
            MessageId::Block(b) => self.blocks.contains_key(&b),
            MessageId::Attestation(a) => self.attestations.contains_key(&a),
        }
    }

    pub fn is_pending(&self, id: MessageId) -> bool {
        self.buffered.contains_key(&id) || self.future.contains_key(&id)
    }

    pub fn has_block(&self, b: BlockId) -> bool {
        self.blocks.contains_key(&b)
    }

    pub fn block(&self, b: BlockId) -> Result<&Block> {
        self.blocks.get(&b).ok_or(Error::UnknownBlock(b))
    }

    pub fn attestation(&self, a: AttestationId) -> Option<&Attestation> {
        self.attestations.get(&a)
    }

    /// Accepted blocks in id order.
    pub fn blocks(&self) -> impl Iterator<Item = &Block> {
        self.blocks.values()
    }

    /// Accepted attestations in id order.
    pub fn attestations(&self) -> impl Iterator<Item = &Attestation> {
        self.attestations.values()
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn attestation_count(&self) -> usize {
        self.attestations.len()
    }

    /// Accepted message ids in acceptance order.
    pub fn acceptance_order(&self) -> &[MessageId] {
        &self.order
    }

    pub fn message(&self, id: MessageId) -> Option<Message> {
        match id {
            MessageId::Block(b) => self.blocks.get(&b).cloned().map(Message::Block),
            MessageId::Attestation(a) => self.attestations.get(&a).cloned().map(Message::Attestation),
        }
    }

    /// Seen but not accepted, either waiting on a dependency or on the clock.
    pub fn pending(&self) -> impl Iterator<Item = &Message> {
        self.buffered.values().chain(self.future.values())
    }

    pub fn pending_count(&self) -> usize {
        self.buffered.len() + self.future.len()
    }

    pub fn rejections(&self) -> &[Rejection] {
        &self.rejected
    }

    pub fn children(&self, b: BlockId) -> &[BlockId] {
        self.children.get(&b).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Blocks without children, in id order.
    pub fn leaves(&self) -> Vec<BlockId> {
        self.blocks.keys().copied().filter(|b| self.children(*b).is_empty()).collect()
    }

    // ---- chain queries --------------------------------------------------

    pub fn chain(&self, b: BlockId) -> Result<Vec<BlockId>> {
        let mut out = vec![b];
        let mut cur = self.block(b)?;
        while let Some(p) = cur.parent {
            out.push(p);
            cur = &self.blocks[&p];
        }
        out.reverse();
        Ok(out)
    }

    /// True if `a` is `b` or one of its ancestors.
    pub fn is_ancestor(&self, a: BlockId, b: BlockId) -> Result<bool> {
        self.block(a)?;
        self.block(b)?;
        Ok(self.is_ancestor_unchecked(a, b))
    }

    fn is_ancestor_unchecked(&self, a: BlockId, b: BlockId) -> bool {
        let target_slot = self.blocks[&a].slot;
        let mut cur = b;
        loop {
            if cur == a {
                return true;
            }
            let blk = &self.blocks[&cur];
            if blk.slot <= target_slot {
                return false;
            }
            match blk.parent {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }

    pub fn conflicts(&self, a: BlockId, b: BlockId) -> Result<bool> {
        Ok(!self.is_ancestor(a, b)? && !self.is_ancestor(b, a)?)
    }

    /// The j-th epoch boundary pair of `b`: the highest block of chain(b)
    /// with slot at most jC, paired with j.
    pub fn ebb(&self, b: BlockId, j: Epoch) -> Result<CheckpointPair> {
        let limit = j.saturating_mul(self.slots_per_epoch);
        let mut cur = self.block(b)?;
        while cur.slot > limit {
            cur = &self.blocks[&cur.parent.expect("only genesis lacks a parent")];
        }
        Ok(CheckpointPair::new(cur.id, j))
    }

    /// Last epoch boundary pair of `b` in the epoch of its own slot.
    pub fn lebb(&self, b: BlockId) -> Result<CheckpointPair> {
        let slot = self.block(b)?.slot;
        self.ebb(b, self.epoch_of(slot))
    }

    /// Last epoch boundary pair of `b` as seen by an attestor at `slot`.
    pub fn lebb_at(&self, b: BlockId, slot: Slot) -> Result<CheckpointPair> {
        self.ebb(b, self.epoch_of(slot))
    }

    /// Blocks and attestations in the dependency closure of `b`.
    pub fn closure(&self, b: BlockId) -> Result<(BTreeSet<BlockId>, BTreeSet<AttestationId>)> {
        self.block(b)?;
        let mut blocks = BTreeSet::new();
        let mut atts = BTreeSet::new();
        let mut stack = vec![b];
        while let Some(x) = stack.pop() {
            if !blocks.insert(x) {
                continue;
            }
            let blk = &self.blocks[&x];
            if let Some(p) = blk.parent {
                stack.push(p);
            }
            for a in &blk.newattests {
                if atts.insert(*a) {
                    stack.push(self.attestations[a].block);
                }
            }
        }
        Ok((blocks, atts))
    }

    fn closure_attestations(&self, b: BlockId) -> BTreeSet<AttestationId> {
        self.closure(b).map(|(_, a)| a).unwrap_or_default()
    }

    /// view(b): the sub-view holding b and its dependency closure.
    pub fn sub_view(&self, b: BlockId) -> Result<View> {
        let (blocks, atts) = self.closure(b)?;
        let mut v = View::empty(self.slots_per_epoch, self.validators.clone());
        for id in &self.order {
            let keep = match id {
                MessageId::Block(x) => blocks.contains(x),
                MessageId::Attestation(x) => atts.contains(x),
            };
            if keep {
                v.deliver(self.message(*id).unwrap()).expect("sub-view messages were already valid");
            }
        }
        Ok(v)
    }

    /// The FFG view of `b`: view(LEBB(b)).
    pub fn ffg_view(&self, b: BlockId) -> Result<View> {
        let l = self.lebb(b)?;
        self.sub_view(l.block)
    }

    /// J(ffg_view(b)), served from the per-block cache.
    pub fn ffg_justified(&self, b: BlockId) -> Result<Arc<BTreeSet<CheckpointPair>>> {
        let l = self.lebb(b)?;
        Ok(self.justified_at[&l.block].clone())
    }

    /// J(view(b)), served from the per-block cache.
    pub fn justified_in_block_view(&self, b: BlockId) -> Result<Arc<BTreeSet<CheckpointPair>>> {
        self.block(b)?;
        Ok(self.justified_at[&b].clone())
    }

    /// Copy of this view restricted to the accepted messages satisfying `keep`,
    /// closed under dependencies.
    pub fn filtered(&self, mut keep: impl FnMut(&Message) -> bool) -> View {
        let mut v = View::empty(self.slots_per_epoch, self.validators.clone());
        for id in &self.order {
            let m = self.message(*id).unwrap();
            if keep(&m) {
                let _ = v.deliver(m);
            }
        }
        v.buffered.clear();
        v.waiting.clear();
        v
    }

    pub(crate) fn raw_future(&self) -> impl Iterator<Item = &Message> {
        self.future.values()
    }

    pub(crate) fn raw_buffered(&self) -> impl Iterator<Item = &Message> {
        self.buffered.values()
    }
}
