//! Attribution of an LLM agent's realized action to its interaction history.
//!
//! Level 1 ranks trajectory components by the temporal gain in the action's
//! log-likelihood as each component is revealed. Level 2 scores the sentences
//! of the highest-gain components by probability drop and hold.

pub mod baselines;
pub mod component;
pub mod evaluation;
pub mod fanout;
pub mod replay;
pub mod report;
pub mod scorer;
pub mod sentence;
pub mod trajectory;

pub use replay::{AttributionError, ReplayConfig};
