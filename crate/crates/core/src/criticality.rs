//! Criticality providers: how much the action taken in a state matters,
//! on a scale from 0 (irrelevant) to 1 (decisive).

use std::collections::HashMap;
use std::hash::Hash;

use crate::mdp::QTable;
use crate::roadtree::{junction_criticality, RoadTreeState};
use crate::shooter::ShooterKey;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CriticalityError {
    #[error("criticality must lie in [0, 1], got {0}")]
    OutOfRange(f64),
    #[error("distance {dist} outside [1, {field_length}]")]
    BadDistance { dist: u32, field_length: u32 },
    #[error("field length must be at least 2, got {0}")]
    ShortField(u32),
}

/// Maps a state to a criticality in `[0, 1]`.
///
/// Learned providers override [`observe`](Self::observe), which the episode
/// driver calls once for every visited state before its criticality is read.
pub trait CriticalityProvider<K>: Send {
    fn crit(&self, key: &K) -> f64;

    fn observe(&mut self, _table: &QTable<K>, _key: &K, _n_actions: usize) {}
}

impl<K, P: CriticalityProvider<K> + ?Sized> CriticalityProvider<K> for Box<P> {
    fn crit(&self, key: &K) -> f64 {
        (**self).crit(key)
    }

    fn observe(&mut self, table: &QTable<K>, key: &K, n_actions: usize) {
        (**self).observe(table, key, n_actions)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantCriticality(f64);

impl ConstantCriticality {
    pub fn new(c: f64) -> Result<Self, CriticalityError> {
        if (0.0..=1.0).contains(&c) {
            Ok(Self(c))
        } else {
            Err(CriticalityError::OutOfRange(c))
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

impl<K> CriticalityProvider<K> for ConstantCriticality {
    fn crit(&self, _key: &K) -> f64 {
        self.0
    }
}

/// Road-Tree measure: junctions and leaves are critical, road cells are not.
#[derive(Debug, Clone, Copy, Default)]
pub struct JunctionCriticality;

impl CriticalityProvider<RoadTreeState> for JunctionCriticality {
    fn crit(&self, key: &RoadTreeState) -> f64 {
        junction_criticality(key)
    }
}

/// Shooter measure: critical until the shot has been taken.
#[derive(Debug, Clone, Copy, Default)]
pub struct ShooterCriticality;

impl CriticalityProvider<ShooterKey> for ShooterCriticality {
    fn crit(&self, key: &ShooterKey) -> f64 {
        if key.has_fired() {
            0.0
        } else {
            1.0
        }
    }
}

/// Wraps a hand-written measure; outputs are clamped into `[0, 1]`.
pub struct FnCriticality<F>(pub F);

impl<K, F: Fn(&K) -> f64 + Send> CriticalityProvider<K> for FnCriticality<F> {
    fn crit(&self, key: &K) -> f64 {
        let c = (self.0)(key);
        if c.is_nan() {
            0.0
        } else {
            c.clamp(0.0, 1.0)
        }
    }
}

/// Linear distance measure for a ball approaching the agent's baseline:
/// 1 one step away, 0 at the far end, 0 whenever the ball moves away.
pub fn linear_distance_criticality(
    dist: u32,
    field_length: u32,
    moving_toward: bool,
) -> Result<f64, CriticalityError> {
    if field_length < 2 {
        return Err(CriticalityError::ShortField(field_length));
    }
    if dist < 1 || dist > field_length {
        return Err(CriticalityError::BadDistance { dist, field_length });
    }
    if !moving_toward {
        return Ok(0.0);
    }
    let c = 1.0 - f64::from(dist - 1) / f64::from(field_length - 1);
    Ok(c.clamp(0.0, 1.0))
}

/// Spread statistic of a state's action values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spread {
    /// Population variance over the action set.
    Variance,
    /// `max_a Q - min_a Q`.
    Range,
}

impl Spread {
    pub fn of(self, values: &[f64]) -> f64 {
        if values.len() < 2 {
            return 0.0;
        }
        match self {
            Spread::Variance => {
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
            }
            Spread::Range => {
                let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let min = values.iter().copied().fold(f64::INFINITY, f64::min);
                max - min
            }
        }
    }
}

/// Criticality learned from the Q-table: the spread of a state's action
/// values at its latest observation, divided by the largest spread seen so
/// far. Unobserved states, and everything before any non-zero spread has
/// been seen, read as 0.
#[derive(Debug, Clone)]
pub struct LearnedCriticality<K> {
    spread: Spread,
    running_max: f64,
    latest: HashMap<K, f64>,
}

impl<K: Eq + Hash + Clone> LearnedCriticality<K> {
    pub fn new(spread: Spread) -> Self {
        Self {
            spread,
            running_max: 0.0,
            latest: HashMap::new(),
        }
    }

    pub fn variance() -> Self {
        Self::new(Spread::Variance)
    }

    /// Max-minus-min "importance" baseline.
    pub fn importance() -> Self {
        Self::new(Spread::Range)
    }

    pub fn running_max(&self) -> f64 {
        self.running_max
    }
}

impl<K: Eq + Hash + Clone + Send> CriticalityProvider<K> for LearnedCriticality<K> {
    fn crit(&self, key: &K) -> f64 {
        if self.running_max <= 0.0 {
            return 0.0;
        }
        self.latest
            .get(key)
            .map_or(0.0, |v| (v / self.running_max).clamp(0.0, 1.0))
    }

    fn observe(&mut self, table: &QTable<K>, key: &K, n_actions: usize) {
        let v = self.spread.of(&table.action_values(key, n_actions));
        self.running_max = self.running_max.max(v);
        match self.latest.get_mut(key) {
            Some(slot) => *slot = v,
            None => {
                self.latest.insert(key.clone(), v);
            }
        }
    }
}
