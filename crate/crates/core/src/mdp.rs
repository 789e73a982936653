//! Shared MDP plumbing: the environment contract, the tabular action-value
//! function, ε-greedy selection and the seeded random stream every run owns.

use std::collections::HashMap;
use std::fmt::Debug;
use std::hash::Hash;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

/// Index of an action, valid relative to the action count of one state.
pub type ActionIndex = usize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MdpError {
    #[error("terminal state has no actions")]
    NoActions,
    #[error("cannot step a terminal state")]
    TerminalStep,
    #[error("action {action} out of range for a state with {count} actions")]
    InvalidAction { action: ActionIndex, count: usize },
}

/// Result of applying one action.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<S> {
    pub next_state: S,
    pub reward: f64,
    pub terminal: bool,
}

/// An episodic, finite-action environment.
///
/// Implementations are immutable descriptions; the per-episode cursor is the
/// `State` value threaded through `step`, so one handle can serve many
/// concurrent episodes.
pub trait Environment {
    type State: Clone + Debug;
    /// Hashable encoding used by tabular learners and criticality providers.
    type Key: Clone + Eq + Hash + Debug + Send;

    fn reset(&self, rng: &mut RngStream) -> Self::State;

    fn step(
        &self,
        state: &Self::State,
        action: ActionIndex,
    ) -> Result<StepOutcome<Self::State>, MdpError>;

    /// Number of legal actions; zero exactly on terminal states.
    fn action_count(&self, state: &Self::State) -> usize;

    fn key(&self, state: &Self::State) -> Self::Key;
}

/// Deterministic random stream backed by ChaCha8 (`rand_chacha`).
///
/// `seed_from_u64` expands the seed with PCG32 as specified by `rand_core`,
/// so the draw sequence for a given seed is identical on every platform.
/// Per-run streams share the key derived from the base seed and differ in
/// the ChaCha stream id, which is the run index: adding runs never changes
/// the draws seen by earlier runs.
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    pub fn from_seed(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn for_run(base_seed: u64, run_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
        rng.set_stream(run_index);
        Self(rng)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)` from the top 53 bits of one draw.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `[0, n)` from exactly one draw (widening multiply,
    /// no rejection loop, bias below 2^-64 · n).
    pub fn below(&mut self, n: usize) -> usize {
        scale_to(self.next_u64(), n)
    }
}

fn scale_to(draw: u64, n: usize) -> usize {
    debug_assert!(n > 0);
    ((draw as u128 * n as u128) >> 64) as usize
}

/// Learning hyper-parameters shared by all agents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// Trace decay, read only by Q(λ).
    pub lambda: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 1.0,
            epsilon: 0.1,
            lambda: 0.9,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        for (name, v) in [
            ("gamma", self.gamma),
            ("epsilon", self.epsilon),
            ("lambda", self.lambda),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        Ok(())
    }
}

/// Tabular action-value function. Unseen pairs read as `default_value`.
#[derive(Debug, Clone)]
pub struct QTable<K> {
    rows: HashMap<K, Vec<f64>>,
    default_value: f64,
}

impl<K: Eq + Hash + Clone> Default for QTable<K> {
    fn default() -> Self {
        Self::new(0.0)
    }
}

impl<K: Eq + Hash + Clone> QTable<K> {
    pub fn new(default_value: f64) -> Self {
        assert!(default_value.is_finite(), "Q default must be finite");
        Self {
            rows: HashMap::new(),
            default_value,
        }
    }

    pub fn default_value(&self) -> f64 {
        self.default_value
    }

    pub fn lookup(&self, s: &K, a: ActionIndex) -> f64 {
        self.rows
            .get(s)
            .and_then(|row| row.get(a).copied())
            .unwrap_or(self.default_value)
    }

    pub fn store(&mut self, s: &K, a: ActionIndex, value: f64) {
        debug_assert!(value.is_finite(), "non-finite Q value {value}");
        let default = self.default_value;
        let row = match self.rows.get_mut(s) {
            Some(row) => row,
            None => self.rows.entry(s.clone()).or_default(),
        };
        if row.len() <= a {
            row.resize(a + 1, default);
        }
        row[a] = value;
    }

    /// Moves `Q(s, a)` a step of size `alpha` toward `target`.
    pub fn nudge(&mut self, s: &K, a: ActionIndex, target: f64, alpha: f64) {
        let q = self.lookup(s, a);
        self.store(s, a, q + alpha * (target - q));
    }

    /// Action values of `s` over `[0, n_actions)`.
    pub fn action_values(&self, s: &K, n_actions: usize) -> Vec<f64> {
        (0..n_actions).map(|a| self.lookup(s, a)).collect()
    }

    /// `max_a Q(s, a)`; zero when `n_actions == 0`.
    pub fn max_value(&self, s: &K, n_actions: usize) -> f64 {
        if n_actions == 0 {
            return 0.0;
        }
        (0..n_actions)
            .map(|a| self.lookup(s, a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn len(&self) -> usize {
        self.rows.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every explicitly stored `(state, action, value)` triple.
    pub fn entries(&self) -> impl Iterator<Item = (&K, ActionIndex, f64)> {
        self.rows
            .iter()
            .flat_map(|(k, row)| row.iter().enumerate().map(move |(a, v)| (k, a, *v)))
    }

    /// Bitwise equality of the stored contents, including the default value.
    pub fn bit_identical(&self, other: &Self) -> bool {
        if self.default_value.to_bits() != other.default_value.to_bits()
            || self.rows.len() != other.rows.len()
        {
            return false;
        }
        self.rows.iter().all(|(k, row)| {
            other.rows.get(k).is_some_and(|o| {
                o.len() == row.len() && o.iter().zip(row).all(|(x, y)| x.to_bits() == y.to_bits())
            })
        })
    }
}

/// All argmax actions of `s`, in increasing index order.
pub fn greedy_actions<K: Eq + Hash + Clone>(
    table: &QTable<K>,
    s: &K,
    n_actions: usize,
) -> Result<Vec<ActionIndex>, MdpError> {
    if n_actions == 0 {
        return Err(MdpError::NoActions);
    }
    let values = table.action_values(s, n_actions);
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v == best)
        .map(|(a, _)| a)
        .collect())
}

/// ε-greedy selection with uniform tie-breaking among greedy actions.
///
/// Always consumes exactly two draws: an exploration coin and an action pick.
pub fn epsilon_greedy<K: Eq + Hash + Clone>(
    table: &QTable<K>,
    s: &K,
    n_actions: usize,
    epsilon: f64,
    rng: &mut RngStream,
) -> Result<ActionIndex, MdpError> {
    if n_actions == 0 {
        return Err(MdpError::NoActions);
    }
    let coin = rng.next_unit();
    let pick = rng.next_u64();
    if coin < epsilon {
        return Ok(scale_to(pick, n_actions));
    }
    if n_actions == 1 {
        return Ok(0);
    }
    let greedy = greedy_actions(table, s, n_actions)?;
    Ok(greedy[scale_to(pick, greedy.len())])
}
