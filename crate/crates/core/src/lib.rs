//! Subjective-logic trust management and misbehavior detection for
//! multi-agent systems.
//!
//! - [`opinion`]: opinions, Dirichlet evidence, projection and fusion.
//! - [`trust`]: trust records, rewards, aging and discounting.
//! - [`misbehavior`]: conflict clustering, classification and trust revision.
//! - [`broker`]: a cycle-based publish/subscribe broker simulation.
//! - [`scenarios`]: Monte-Carlo experiments built on the above.
//! - [`cli`]: the command-line front end used by the `sl-trust` binary.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod broker;
pub mod cli;
pub mod misbehavior;
pub mod opinion;
pub mod scenarios;
pub mod trust;

pub use misbehavior::{detect, ClassificationResult, DetectParams, ReportedOpinion};
pub use opinion::{average_fuse, cumulative_fuse, BinomialOpinion, Domain, EvidenceRecord, Opinion, OpinionError};
pub use trust::{AgentId, DiscountContext, TrustRecord, TrustStore};
