//! Monte Carlo ensembles, a brute-force oracle, traces and invariant checks
//! over scenarios.

pub mod audit;
pub mod check;
pub mod ensemble;
pub mod oracle;
pub mod stats;
pub mod trace;
