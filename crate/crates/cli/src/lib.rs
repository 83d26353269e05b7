//! Library side of the `ratelqg` command-line tool: the solve pipeline,
//! budget sweeps, CSV output, and the benchmark systems behind
//! `reproduce-paper`.

pub mod pipeline;
pub mod reproduce;

pub use pipeline::{solve_instance, tradeoff, SolveOutcome, TradeoffPoint};
