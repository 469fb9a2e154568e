//! Deterministic multi-node simulator for the redactable chain.

mod engine;
mod expect;
mod node;
mod scenario;
mod transcript;

pub use engine::{run, RunOutput};
pub use expect::{transcript_assert, Expectation, Quantifier};
pub use scenario::{
    Action, Behavior, ChainParams, EconomyParams, NodeSpec, Role, Scenario, ScenarioError, WitnessParams,
};
pub use transcript::{MemberInfo, NodeFinal, NodeInfo, Record, Transcript, TxState};
