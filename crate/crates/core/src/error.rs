use thiserror::Error;

use crate::types::{BlockId, MessageId, Slot, ValidatorId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown block {0}")]
    UnknownBlock(BlockId),
    #[error("malformed {id}: {reason}")]
    Malformed { id: MessageId, reason: String },
    #[error("validator {validator} is not in the committee for slot {slot}")]
    NotInCommittee { validator: ValidatorId, slot: Slot },
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("snapshot line {line}: {reason}")]
    Snapshot { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
