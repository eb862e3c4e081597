//! Synthetic coding-agent training data with soft verification.
//!
//! The crate covers the whole data path: a two-rollout generation loop
//! against any chat-completions endpoint ([`orchestrate`]), patch parsing
//! and line-level recall ([`patchdiff`], [`verification`]), trajectory
//! accounting and curation ([`trajectory`], [`curation`]), and the
//! analysis side: cost-performance scaling fits ([`scaling`]), cost
//! accounting ([`costmodel`]) and seed statistics ([`stats`]).
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod chat;
pub mod costmodel;
pub mod curation;
pub mod jsonl;
pub mod orchestrate;
pub mod patchdiff;
pub mod scaling;
pub mod stats;
pub mod trajectory;
pub mod verification;

pub use patchdiff::{change_set, parse_unified_diff, recall, ChangeSet, IdentityMode, Patch};
pub use trajectory::{ByteQuarterCounter, TokenCounter, Trajectory};
pub use verification::{verify_pair, Bucket, VerificationRecord};
