//! Criticality-based varying step-number updates.
//!
//! Every visited pair waits on a list while the discounted rewards and the
//! criticalities of its successors accumulate. Once the cumulative
//! criticality reaches 1 the pair is updated toward the n-step return that
//! bootstraps from the successor reached at that moment; pairs still
//! waiting at the end of the episode get the full Monte Carlo return.

use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::mdp::{ActionIndex, AgentConfig, QTable};

/// Bootstrap value used when an entry fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// `Q(S_n, A_n)` for the action actually chosen at `S_n`.
    Sarsa,
    /// `max_a Q(S_n, a)`.
    QLearning,
}

/// When a pending entry fires.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accumulation {
    /// Cumulative criticality of the successors reaches 1.
    Cumulative,
    /// A successor at least two steps away has criticality `>= theta`.
    Threshold(f64),
}

/// Order of the cumulative test relative to adding the new successor's
/// criticality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CritOrder {
    /// Add `crit(S')`, then fire if the sum is `>= 1`: bootstraps from the
    /// first successor that brings the sum to 1.
    #[default]
    AccumulateThenCheck,
    /// Fire if the sum is already `>= 1`, otherwise add `crit(S')`. Lags one
    /// step behind and never fires on the first step. Kept for comparison.
    CheckThenAccumulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvsMode {
    #[serde(default = "default_target")]
    pub target_kind: TargetKind,
    #[serde(default = "default_accumulation")]
    pub accumulation: Accumulation,
    #[serde(default)]
    pub order: CritOrder,
}

fn default_target() -> TargetKind {
    TargetKind::QLearning
}

fn default_accumulation() -> Accumulation {
    Accumulation::Cumulative
}

impl Default for CvsMode {
    fn default() -> Self {
        Self {
            target_kind: default_target(),
            accumulation: default_accumulation(),
            order: CritOrder::default(),
        }
    }
}

impl CvsMode {
    pub fn validate(&self) -> Result<(), String> {
        match self.accumulation {
            Accumulation::Threshold(theta) if !(theta > 0.0 && theta <= 1.0) => {
                Err(format!("threshold must lie in (0, 1], got {theta}"))
            }
            _ => Ok(()),
        }
    }
}

/// A state-action pair waiting for its update.
#[derive(Debug, Clone, PartialEq)]
pub struct WaitEntry<K> {
    pub state: K,
    pub action: ActionIndex,
    /// `sum_i gamma^i R_{t+i}` over the steps elapsed so far.
    pub acc_reward: f64,
    /// `gamma^k` after `k` elapsed steps.
    pub discount_pow: f64,
    pub crit_cum: f64,
    /// Elapsed steps `k`.
    pub steps: usize,
}

/// Record of one applied CVS update.
#[derive(Debug, Clone, PartialEq)]
pub struct FiredUpdate<K> {
    pub state: K,
    pub action: ActionIndex,
    pub target: f64,
    /// Step count `n` of the return used as target.
    pub steps: usize,
    /// State whose value was bootstrapped; `None` for a terminal flush.
    pub bootstrap: Option<K>,
}

/// Pending entries in insertion (time) order.
#[derive(Debug, Clone)]
pub struct Waitlist<K> {
    entries: Vec<WaitEntry<K>>,
}

impl<K> Default for Waitlist<K> {
    fn default() -> Self {
        Self {
            entries: Vec::new(),
        }
    }
}

impl<K: Clone> Waitlist<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[WaitEntry<K>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds the reward of the latest transition to every pending entry.
    pub fn accumulate_reward(&mut self, r: f64, gamma: f64) {
        for e in &mut self.entries {
            e.acc_reward += e.discount_pow * r;
            e.discount_pow *= gamma;
            e.steps += 1;
        }
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

pub fn cvs_insert<K: Clone>(waitlist: &mut Waitlist<K>, s: &K, a: ActionIndex) {
    waitlist.entries.push(WaitEntry {
        state: s.clone(),
        action: a,
        acc_reward: 0.0,
        discount_pow: 1.0,
        crit_cum: 0.0,
        steps: 0,
    });
}

/// Processes a non-terminal transition that yielded `r` and arrived at
/// `s_next` (criticality `crit_next`), where the behaviour policy picked
/// `a_next`. Entries are visited in insertion order; the ones that fire are
/// updated and removed.
#[allow(clippy::too_many_arguments)]
pub fn cvs_step<K: Eq + Hash + Clone>(
    waitlist: &mut Waitlist<K>,
    table: &mut QTable<K>,
    crit_next: f64,
    r: f64,
    s_next: &K,
    a_next: ActionIndex,
    n_actions_next: usize,
    mode: &CvsMode,
    cfg: &AgentConfig,
) -> Vec<FiredUpdate<K>> {
    waitlist.accumulate_reward(r, cfg.gamma);
    let mut fired = Vec::new();
    let mut kept = Vec::with_capacity(waitlist.entries.len());
    for mut entry in waitlist.entries.drain(..) {
        let fire = match (mode.accumulation, mode.order) {
            (Accumulation::Threshold(theta), _) => entry.steps >= 2 && crit_next >= theta,
            (Accumulation::Cumulative, CritOrder::AccumulateThenCheck) => {
                entry.crit_cum += crit_next;
                entry.crit_cum >= 1.0
            }
            (Accumulation::Cumulative, CritOrder::CheckThenAccumulate) => {
                let ready = entry.crit_cum >= 1.0;
                if !ready {
                    entry.crit_cum += crit_next;
                }
                ready
            }
        };
        if !fire {
            kept.push(entry);
            continue;
        }
        let bootstrap = match mode.target_kind {
            TargetKind::Sarsa => table.lookup(s_next, a_next),
            TargetKind::QLearning => table.max_value(s_next, n_actions_next),
        };
        let target = entry.acc_reward + entry.discount_pow * bootstrap;
        table.nudge(&entry.state, entry.action, target, cfg.alpha);
        fired.push(FiredUpdate {
            state: entry.state,
            action: entry.action,
            target,
            steps: entry.steps,
            bootstrap: Some(s_next.clone()),
        });
    }
    waitlist.entries = kept;
    fired
}

/// Updates every pending entry toward its accumulated return (terminal
/// bootstrap 0) and empties the list. The terminal reward must already
/// have been added with [`Waitlist::accumulate_reward`].
pub fn cvs_flush<K: Eq + Hash + Clone>(
    waitlist: &mut Waitlist<K>,
    table: &mut QTable<K>,
    cfg: &AgentConfig,
) -> Vec<FiredUpdate<K>> {
    waitlist
        .entries
        .drain(..)
        .map(|e| {
            table.nudge(&e.state, e.action, e.acc_reward, cfg.alpha);
            FiredUpdate {
                state: e.state,
                action: e.action,
                target: e.acc_reward,
                steps: e.steps,
                bootstrap: None,
            }
        })
        .collect()
}
