//! Samplers over associations and track sets.

pub mod baseline;
pub mod chain;
pub mod counts;
pub mod intervals;
pub mod proposal;
pub mod schedule;
pub mod selection;
pub mod trace;

pub use baseline::{run_baseline, Baseline, BaselineConfig};
pub use chain::{drive, run_chain, Budget, Chain, ChainConfig, ChainLevel, ChainOutcome, Sampler, StepInfo};
pub use counts::{PcFocus, ProposalConfig};
pub use proposal::{HispProposal, MoveRecord, Proposal, RejectReason};
pub use schedule::AnnealSchedule;
pub use trace::{MoveKind, TraceRecord};
