//! Slow, independent reimplementations used as test oracles. Everything
//! here works from the raw message lists and parent pointers only.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use gasperlab_core::types::*;
use gasperlab_core::View;

pub struct Raw {
    pub c: u64,
    pub stakes: Vec<Stake>,
    pub blocks: BTreeMap<BlockId, Block>,
    pub atts: BTreeMap<AttestationId, Attestation>,
}

impl Raw {
    pub fn of(view: &View) -> Raw {
        Raw {
            c: view.slots_per_epoch(),
            stakes: view.validators().stakes().to_vec(),
            blocks: view.blocks().map(|b| (b.id, b.clone())).collect(),
            atts: view.attestations().map(|a| (a.id, a.clone())).collect(),
        }
    }

    pub fn total(&self) -> Stake {
        self.stakes.iter().sum()
    }

    /// Ancestors of `b` including itself, by walking parent pointers.
    pub fn parent_walk(&self, b: BlockId) -> Vec<BlockId> {
        let mut out = vec![b];
        let mut cur = b;
        while let Some(p) = self.blocks[&cur].parent {
            out.push(p);
            cur = p;
        }
        out
    }

    pub fn descends(&self, b: BlockId, from: BlockId) -> bool {
        self.parent_walk(b).contains(&from)
    }

    pub fn children(&self, b: BlockId) -> Vec<BlockId> {
        let mut c: Vec<BlockId> = self.blocks.values().filter(|x| x.parent == Some(b)).map(|x| x.id).collect();
        c.sort();
        c
    }

    pub fn leaves(&self) -> Vec<BlockId> {
        self.blocks.keys().copied().filter(|b| self.children(*b).is_empty()).collect()
    }

    /// Breadth-first dependency closure of a block.
    pub fn closure(&self, b: BlockId) -> (BTreeSet<BlockId>, BTreeSet<AttestationId>) {
        let mut blocks = BTreeSet::new();
        let mut atts = BTreeSet::new();
        let mut queue = std::collections::VecDeque::from([MessageId::Block(b)]);
        while let Some(m) = queue.pop_front() {
            match m {
                MessageId::Block(x) => {
                    if blocks.insert(x) {
                        let blk = &self.blocks[&x];
                        queue.extend(blk.parent.map(MessageId::Block));
                        queue.extend(blk.newattests.iter().map(|a| MessageId::Attestation(*a)));
                    }
                }
                MessageId::Attestation(a) => {
                    if atts.insert(a) {
                        queue.push_back(MessageId::Block(self.atts[&a].block));
                    }
                }
            }
        }
        (blocks, atts)
    }

    /// Highest-slot block on the chain of `b` with slot at most jC.
    pub fn ebb(&self, b: BlockId, j: Epoch) -> CheckpointPair {
        let best = self
            .parent_walk(b)
            .into_iter()
            .filter(|x| self.blocks[x].slot <= j * self.c)
            .max_by_key(|x| self.blocks[x].slot)
            .unwrap();
        CheckpointPair::new(best, j)
    }

    pub fn lebb(&self, b: BlockId) -> CheckpointPair {
        self.ebb(b, self.blocks[&b].slot / self.c)
    }

    /// Fixed-point justification over an attestation subset.
    pub fn justified(&self, atts: &BTreeSet<AttestationId>) -> BTreeSet<CheckpointPair> {
        let mut j = BTreeSet::from([CheckpointPair::GENESIS]);
        loop {
            let mut grew = false;
            let mut edges: BTreeMap<(CheckpointPair, CheckpointPair), BTreeSet<u32>> = BTreeMap::new();
            for id in atts {
                let a = &self.atts[id];
                if j.contains(&a.source) && a.source.epoch < a.target.epoch {
                    edges.entry((a.source, a.target)).or_default().insert(a.author.0);
                }
            }
            for ((_, t), who) in edges {
                let w: Stake = who.iter().map(|v| self.stakes[*v as usize]).sum();
                if 3.0 * w > 2.0 * self.total() && j.insert(t) {
                    grew = true;
                }
            }
            if !grew {
                return j;
            }
        }
    }

    pub fn justified_all(&self) -> BTreeSet<CheckpointPair> {
        self.justified(&self.atts.keys().copied().collect())
    }

    /// J of the view of LEBB(b).
    pub fn ffg_justified(&self, b: BlockId) -> BTreeSet<CheckpointPair> {
        let l = self.lebb(b);
        self.justified(&self.closure(l.block).1)
    }

    /// Latest message per validator: highest slot, smallest id on ties.
    pub fn latest(&self, before_slot: Option<Slot>) -> BTreeMap<u32, BlockId> {
        let mut best: BTreeMap<u32, (Slot, AttestationId, BlockId)> = BTreeMap::new();
        for a in self.atts.values() {
            if before_slot.is_some_and(|s| a.slot >= s) {
                continue;
            }
            let e = best.entry(a.author.0).or_insert((a.slot, a.id, a.block));
            if a.slot > e.0 || (a.slot == e.0 && a.id < e.1) {
                *e = (a.slot, a.id, a.block);
            }
        }
        best.into_iter().map(|(v, (_, _, b))| (v, b)).collect()
    }

    pub fn weight(&self, b: BlockId, latest: &BTreeMap<u32, BlockId>) -> Stake {
        let mut w = 0.0;
        for (v, vote) in latest {
            if self.descends(*vote, b) {
                w += self.stakes[*v as usize];
            }
        }
        w
    }

    /// Every root-to-leaf path of the tree below `root`, restricted to
    /// `allowed` when given.
    pub fn paths(&self, root: BlockId, allowed: Option<&BTreeSet<BlockId>>) -> Vec<Vec<BlockId>> {
        let kids: Vec<BlockId> =
            self.children(root).into_iter().filter(|c| allowed.is_none_or(|a| a.contains(c))).collect();
        if kids.is_empty() {
            return vec![vec![root]];
        }
        let mut out = Vec::new();
        for k in kids {
            for mut p in self.paths(k, allowed) {
                p.insert(0, root);
                out.push(p);
            }
        }
        out
    }

    /// The unique path on which every step takes a heaviest child, smallest
    /// id among equals. Returns its last block.
    pub fn exhaustive_descent(&self, root: BlockId, allowed: Option<&BTreeSet<BlockId>>, before_slot: Option<Slot>) -> BlockId {
        let latest = self.latest(before_slot);
        let good: Vec<Vec<BlockId>> = self
            .paths(root, allowed)
            .into_iter()
            .filter(|p| {
                p.windows(2).all(|step| {
                    let chosen = step[1];
                    let wc = self.weight(chosen, &latest);
                    self.children(step[0]).into_iter().filter(|c| allowed.is_none_or(|a| a.contains(c))).all(|c| {
                        let w = self.weight(c, &latest);
                        w < wc || (w == wc && c >= chosen)
                    })
                })
            })
            .collect();
        assert_eq!(good.len(), 1, "greedy path must be unique");
        *good[0].last().unwrap()
    }

    pub fn lmd_ghost(&self) -> BlockId {
        self.exhaustive_descent(BlockId::GENESIS, None, None)
    }

    pub fn hlmd(&self) -> BlockId {
        let leaves = self.leaves();
        let per_leaf: Vec<BTreeSet<CheckpointPair>> = leaves.iter().map(|l| self.ffg_justified(*l)).collect();
        let start = per_leaf
            .iter()
            .flatten()
            .copied()
            .max_by(|a, b| a.epoch.cmp(&b.epoch).then(b.block.cmp(&a.block)))
            .unwrap();
        let mut allowed = BTreeSet::new();
        for (l, j) in leaves.iter().zip(&per_leaf) {
            if j.contains(&start) {
                allowed.extend(self.parent_walk(*l));
            }
        }
        if !allowed.contains(&start.block) {
            return start.block;
        }
        self.exhaustive_descent(start.block, Some(&allowed), None)
    }
}

/// F_{n+2} / 2^n: sequences of n fair outcomes with no two adjacent successes.
pub fn fibonacci_no_finalization(n: u32) -> f64 {
    let (mut a, mut b) = (1u128, 1u128);
    for _ in 0..n {
        (a, b) = (b, a + b);
    }
    b as f64 / 2f64.powi(n as i32)
}
