//! Tabular reinforcement-learning workbench built around criticality-based
//! varying step-number (CVS) updates.
//!
//! - [`mdp`]: environment contract, Q-table, ε-greedy selection, seeded RNG.
//! - [`roadtree`] and [`shooter`]: the benchmark environments.
//! - [`criticality`]: providers mapping states to criticality in `[0, 1]`.
//! - [`agents`]: Q-learning, SARSA, Watkins Q(λ), Monte Carlo and CVS.
//! - [`harness`]: declarative experiments, multi-run averaging and CSV output.

pub mod agents;
pub mod criticality;
pub mod harness;
pub mod mdp;
pub mod roadtree;
pub mod shooter;
