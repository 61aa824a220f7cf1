use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{epoch_of, Epoch, Slot, ValidatorId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShuffleMode {
    /// Fisher-Yates shuffle driven by ChaCha8 seeded with (seed, epoch).
    Seeded(u64),
    /// ρ_j is the identity for every epoch. Useful for hand-built tests.
    Identity,
}

/// Per-epoch committee schedule. Committee k of epoch j holds the validators
/// at shuffled positions s with s ≡ k (mod C); its first member proposes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Committees {
    validator_count: usize,
    slots_per_epoch: u64,
    mode: ShuffleMode,
}

impl Committees {
    pub fn new(validator_count: usize, slots_per_epoch: u64, mode: ShuffleMode) -> Result<Self> {
        if slots_per_epoch == 0 {
            return Err(Error::Config("slots_per_epoch must be positive".into()));
        }
        if validator_count == 0 || validator_count as u64 % slots_per_epoch != 0 {
            return Err(Error::Config(format!(
                "slots_per_epoch {slots_per_epoch} must divide validator_count {validator_count}"
            )));
        }
        Ok(Committees { validator_count, slots_per_epoch, mode })
    }

    pub fn seeded(validator_count: usize, slots_per_epoch: u64, seed: u64) -> Result<Self> {
        Self::new(validator_count, slots_per_epoch, ShuffleMode::Seeded(seed))
    }

    pub fn identity(validator_count: usize, slots_per_epoch: u64) -> Result<Self> {
        Self::new(validator_count, slots_per_epoch, ShuffleMode::Identity)
    }

    pub fn slots_per_epoch(&self) -> u64 {
        self.slots_per_epoch
    }

    pub fn validator_count(&self) -> usize {
        self.validator_count
    }

    pub fn committee_size(&self) -> usize {
        self.validator_count / self.slots_per_epoch as usize
    }

    /// ρ_j as a vector: position s holds validator ρ_j(s).
    pub fn permutation(&self, epoch: Epoch) -> Vec<ValidatorId> {
        let mut p: Vec<ValidatorId> = (0..self.validator_count as u32).map(ValidatorId).collect();
        if let ShuffleMode::Seeded(seed) = self.mode {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(epoch);
            p.shuffle(&mut rng);
        }
        p
    }

    /// S_k for epoch j, ordered by shuffled position.
    pub fn committee(&self, epoch: Epoch, k: u64) -> Result<Vec<ValidatorId>> {
        if k >= self.slots_per_epoch {
            return Err(Error::InvalidArgument(format!(
                "slot index {k} out of range for {} slots per epoch",
                self.slots_per_epoch
            )));
        }
        let p = self.permutation(epoch);
        Ok(p.into_iter().skip(k as usize).step_by(self.slots_per_epoch as usize).collect())
    }

    pub fn committee_for_slot(&self, slot: Slot) -> Vec<ValidatorId> {
        let c = self.slots_per_epoch;
        self.committee(epoch_of(slot, c), slot % c).expect("index reduced mod C")
    }

    pub fn proposer(&self, slot: Slot) -> ValidatorId {
        let c = self.slots_per_epoch;
        self.permutation(epoch_of(slot, c))[(slot % c) as usize]
    }

    /// Slot-in-epoch at which each validator attests during `epoch`.
    pub fn assignments(&self, epoch: Epoch) -> Vec<u64> {
        let mut out = vec![0u64; self.validator_count];
        for (s, v) in self.permutation(epoch).into_iter().enumerate() {
            out[v.0 as usize] = s as u64 % self.slots_per_epoch;
        }
        out
    }
}
