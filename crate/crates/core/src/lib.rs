//! Deterministic indoor drone simulation with a state-machine navigation
//! controller, pluggable pilots and a benchmark harness.

pub mod fsm;
pub mod harness;
pub mod percept;
pub mod pilot;
pub mod sim;
pub mod simserve;
pub mod world;
