use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Error;

pub type Slot = u64;
pub type Epoch = u64;
pub type Stake = f64;

/// Epoch containing slot `i`.
pub fn epoch_of(slot: Slot, slots_per_epoch: u64) -> Epoch {
    slot / slots_per_epoch
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ValidatorId(pub u32);

impl fmt::Display for ValidatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockId(pub u64);

impl BlockId {
    pub const GENESIS: BlockId = BlockId(0);

    /// Content-derived id. Never collides with the genesis id.
    pub fn derive(proposer: ValidatorId, slot: Slot, parent: BlockId, salt: &[u8]) -> BlockId {
        let mut h = Sha256::new();
        h.update(b"block");
        h.update(proposer.0.to_le_bytes());
        h.update(slot.to_le_bytes());
        h.update(parent.0.to_le_bytes());
        h.update(salt);
        let id = truncate(&h.finalize());
        BlockId(if id == 0 { 1 } else { id })
    }

    pub fn is_genesis(self) -> bool {
        self == BlockId::GENESIS
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AttestationId(pub u64);

impl AttestationId {
    /// The timestamp is deliberately left out so a replayed vote keeps its id.
    pub fn derive(
        author: ValidatorId,
        slot: Slot,
        block: BlockId,
        source: CheckpointPair,
        target: CheckpointPair,
    ) -> AttestationId {
        let mut h = Sha256::new();
        h.update(b"attestation");
        h.update(author.0.to_le_bytes());
        h.update(slot.to_le_bytes());
        h.update(block.0.to_le_bytes());
        for p in [source, target] {
            h.update(p.block.0.to_le_bytes());
            h.update(p.epoch.to_le_bytes());
        }
        AttestationId(truncate(&h.finalize()))
    }
}

impl fmt::Display for AttestationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

fn truncate(digest: &[u8]) -> u64 {
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    u64::from_be_bytes(b)
}

/// A (block, attestation epoch) pair.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CheckpointPair {
    pub block: BlockId,
    pub epoch: Epoch,
}

impl CheckpointPair {
    pub const GENESIS: CheckpointPair = CheckpointPair { block: BlockId::GENESIS, epoch: 0 };

    pub fn new(block: BlockId, epoch: Epoch) -> Self {
        CheckpointPair { block, epoch }
    }
}

impl fmt::Display for CheckpointPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.block, self.epoch)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: BlockId,
    pub slot: Slot,
    pub parent: Option<BlockId>,
    pub proposer: Option<ValidatorId>,
    pub newattests: Vec<AttestationId>,
    pub payload: Vec<u8>,
    /// Claimed send time in slot units.
    pub timestamp: f64,
}

impl Block {
    pub fn genesis() -> Block {
        Block {
            id: BlockId::GENESIS,
            slot: 0,
            parent: None,
            proposer: None,
            newattests: Vec::new(),
            payload: Vec::new(),
            timestamp: 0.0,
        }
    }

    /// Builds a block whose id is derived from its contents.
    pub fn new(
        proposer: ValidatorId,
        slot: Slot,
        parent: BlockId,
        newattests: Vec<AttestationId>,
        payload: Vec<u8>,
    ) -> Block {
        let mut salt = payload.clone();
        for a in &newattests {
            salt.extend_from_slice(&a.0.to_le_bytes());
        }
        Block {
            id: BlockId::derive(proposer, slot, parent, &salt),
            slot,
            parent: Some(parent),
            proposer: Some(proposer),
            newattests,
            payload,
            timestamp: slot as f64,
        }
    }

    pub fn with_timestamp(mut self, t: f64) -> Block {
        self.timestamp = t;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attestation {
    pub id: AttestationId,
    pub author: ValidatorId,
    pub slot: Slot,
    /// GHOST vote.
    pub block: BlockId,
    /// LJ: last justified pair.
    pub source: CheckpointPair,
    /// LE: last epoch boundary pair.
    pub target: CheckpointPair,
    pub timestamp: f64,
}

impl Attestation {
    pub fn new(
        author: ValidatorId,
        slot: Slot,
        block: BlockId,
        source: CheckpointPair,
        target: CheckpointPair,
    ) -> Attestation {
        Attestation {
            id: AttestationId::derive(author, slot, block, source, target),
            author,
            slot,
            block,
            source,
            target,
            timestamp: slot as f64 + 0.5,
        }
    }

    pub fn with_timestamp(mut self, t: f64) -> Attestation {
        self.timestamp = t;
        self
    }

    pub fn epoch(&self, slots_per_epoch: u64) -> Epoch {
        epoch_of(self.slot, slots_per_epoch)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Message {
    Block(Block),
    Attestation(Attestation),
}

impl Message {
    pub fn id(&self) -> MessageId {
        match self {
            Message::Block(b) => MessageId::Block(b.id),
            Message::Attestation(a) => MessageId::Attestation(a.id),
        }
    }

    pub fn timestamp(&self) -> f64 {
        match self {
            Message::Block(b) => b.timestamp,
            Message::Attestation(a) => a.timestamp,
        }
    }

    pub fn dependencies(&self) -> Vec<MessageId> {
        match self {
            Message::Block(b) => {
                let mut deps: Vec<MessageId> = b.parent.into_iter().map(MessageId::Block).collect();
                deps.extend(b.newattests.iter().copied().map(MessageId::Attestation));
                deps
            }
            Message::Attestation(a) => vec![MessageId::Block(a.block)],
        }
    }
}

impl From<Block> for Message {
    fn from(b: Block) -> Self {
        Message::Block(b)
    }
}

impl From<Attestation> for Message {
    fn from(a: Attestation) -> Self {
        Message::Attestation(a)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MessageId {
    Block(BlockId),
    Attestation(AttestationId),
}

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MessageId::Block(b) => write!(f, "block {b}"),
            MessageId::Attestation(a) => write!(f, "attestation {a}"),
        }
    }
}

/// Validators are indexed `0..N`; total stake must equal `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidatorSet {
    stakes: Vec<Stake>,
}

impl ValidatorSet {
    pub fn new(stakes: Vec<Stake>) -> Result<Self, Error> {
        if stakes.is_empty() {
            return Err(Error::Config("validator set is empty".into()));
        }
        if stakes.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::Config("stakes must be finite and nonnegative".into()));
        }
        let n = stakes.len() as f64;
        let total: f64 = stakes.iter().sum();
        if (total - n).abs() > 1e-9 * n {
            return Err(Error::Config(format!(
                "total stake {total} must equal the validator count {n}"
            )));
        }
        Ok(ValidatorSet { stakes })
    }

    pub fn uniform(n: usize) -> Self {
        ValidatorSet { stakes: vec![1.0; n] }
    }

    pub fn len(&self) -> usize {
        self.stakes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stakes.is_empty()
    }

    pub fn stake(&self, v: ValidatorId) -> Stake {
        self.stakes.get(v.0 as usize).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, v: ValidatorId) -> bool {
        (v.0 as usize) < self.stakes.len()
    }

    pub fn stakes(&self) -> &[Stake] {
        &self.stakes
    }

    pub fn total(&self) -> Stake {
        self.stakes.iter().sum()
    }

    pub fn ids(&self) -> impl Iterator<Item = ValidatorId> + '_ {
        (0..self.stakes.len() as u32).map(ValidatorId)
    }

    /// Strictly more than two thirds of the total stake.
    pub fn is_supermajority(&self, w: Stake) -> bool {
        3.0 * w > 2.0 * self.total()
    }
}
