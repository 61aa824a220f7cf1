//! Gasper consensus model: views, committees, hybrid LMD GHOST fork choice,
//! FFG justification and finalization, slashing detection, a discrete-event
//! simulator and the liveness analytics.

pub mod analytics;
pub mod committees;
pub mod config;
pub mod equiv_game;
pub mod error;
pub mod ffg;
pub mod fork_choice;
pub mod fuzz;
pub mod simulator;
pub mod slashing;
pub mod snapshot;
pub mod types;
pub mod view;

pub use error::{Error, Result};
pub use types::*;
pub use view::View;
