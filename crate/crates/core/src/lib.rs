//! Adaptive coverage-guided fuzzing for EVM bytecode.

pub mod abi;
pub mod coverage;
pub mod evm;
pub mod fixtures;
pub mod fuzz;
pub mod oracle;
pub mod runner;
pub mod word;
