//! One-step Q-learning and SARSA, Watkins Q(λ), and every-visit Monte Carlo.

use std::collections::HashMap;
use std::hash::Hash;

use crate::mdp::{ActionIndex, AgentConfig, QTable};

#[allow(clippy::too_many_arguments)]
pub fn q_learning_update<K: Eq + Hash + Clone>(
    table: &mut QTable<K>,
    s: &K,
    a: ActionIndex,
    r: f64,
    s_next: &K,
    n_actions_next: usize,
    terminal: bool,
    cfg: &AgentConfig,
) {
    let target = if terminal {
        r
    } else {
        r + cfg.gamma * table.max_value(s_next, n_actions_next)
    };
    table.nudge(s, a, target, cfg.alpha);
}

#[allow(clippy::too_many_arguments)]
pub fn sarsa_update<K: Eq + Hash + Clone>(
    table: &mut QTable<K>,
    s: &K,
    a: ActionIndex,
    r: f64,
    s_next: &K,
    a_next: ActionIndex,
    terminal: bool,
    cfg: &AgentConfig,
) {
    let target = if terminal {
        r
    } else {
        r + cfg.gamma * table.lookup(s_next, a_next)
    };
    table.nudge(s, a, target, cfg.alpha);
}

/// Per-pair eligibility traces for Q(λ).
#[derive(Debug, Clone)]
pub struct EligibilityTable<K> {
    traces: HashMap<(K, ActionIndex), f64>,
    replacing: bool,
}

impl<K: Eq + Hash + Clone> EligibilityTable<K> {
    /// `replacing = false` gives accumulating traces (`e += 1` on a visit),
    /// `true` resets the visited pair's trace to 1.
    pub fn new(replacing: bool) -> Self {
        Self {
            traces: HashMap::new(),
            replacing,
        }
    }

    pub fn get(&self, s: &K, a: ActionIndex) -> f64 {
        self.traces.get(&(s.clone(), a)).copied().unwrap_or(0.0)
    }

    pub fn is_clear(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn clear(&mut self) {
        self.traces.clear();
    }

    fn visit(&mut self, s: &K, a: ActionIndex) {
        let e = self.traces.entry((s.clone(), a)).or_insert(0.0);
        *e = if self.replacing { 1.0 } else { *e + 1.0 };
    }

    fn decay(&mut self, factor: f64) {
        if factor == 0.0 {
            self.traces.clear();
        } else {
            self.traces.values_mut().for_each(|e| *e *= factor);
        }
    }
}

/// One Watkins Q(λ) transition `(s, a) -> r, s_next`, with `a_next` the
/// action the behaviour policy already picked at `s_next` (ignored when
/// terminal). Traces survive only while the agent keeps acting greedily.
#[allow(clippy::too_many_arguments)]
pub fn watkins_qlambda_step<K: Eq + Hash + Clone>(
    table: &mut QTable<K>,
    traces: &mut EligibilityTable<K>,
    s: &K,
    a: ActionIndex,
    r: f64,
    s_next: &K,
    a_next: ActionIndex,
    n_actions_next: usize,
    terminal: bool,
    cfg: &AgentConfig,
) {
    let (bootstrap, next_is_greedy) = if terminal {
        (0.0, false)
    } else {
        let best = table.max_value(s_next, n_actions_next);
        (best, table.lookup(s_next, a_next) == best)
    };
    let delta = r + cfg.gamma * bootstrap - table.lookup(s, a);
    traces.visit(s, a);
    let step = cfg.alpha * delta;
    for ((x, b), e) in &traces.traces {
        let q = table.lookup(x, *b);
        table.store(x, *b, q + step * e);
    }
    if next_is_greedy {
        traces.decay(cfg.gamma * cfg.lambda);
    } else {
        traces.clear();
    }
}

/// Discounted returns `G_t = sum_k gamma^(k-t) r_k` for every step.
pub fn monte_carlo_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut g = 0.0;
    for (t, r) in rewards.iter().enumerate().rev() {
        g = r + gamma * g;
        out[t] = g;
    }
    out
}

/// Every-visit constant-α Monte Carlo update over a finished episode,
/// applied in forward time order. Returns the per-step targets.
pub fn mc_control_episode<K: Eq + Hash + Clone>(
    table: &mut QTable<K>,
    episode: &[(K, ActionIndex, f64)],
    cfg: &AgentConfig,
) -> Vec<f64> {
    let rewards: Vec<f64> = episode.iter().map(|(_, _, r)| *r).collect();
    let returns = monte_carlo_returns(&rewards, cfg.gamma);
    for ((s, a, _), g) in episode.iter().zip(&returns) {
        table.nudge(s, *a, *g, cfg.alpha);
    }
    returns
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> AgentConfig {
        AgentConfig::default()
    }

    #[test]
    fn q_learning_examples() {
        let mut t = QTable::<u8>::default();
        q_learning_update(&mut t, &0, 0, 1.0, &1, 0, true, &cfg());
        assert_eq!(t.lookup(&0, 0), 0.1);

        let mut t = QTable::<u8>::default();
        t.store(&1, 1, 2.0);
        q_learning_update(&mut t, &0, 0, 0.0, &1, 2, false, &cfg());
        assert!((t.lookup(&0, 0) - 0.2).abs() < 1e-15);

        let mut t = QTable::<u8>::default();
        q_learning_update(&mut t, &0, 0, 0.0, &1, 0, true, &AgentConfig { alpha: 0.7, ..cfg() });
        assert_eq!(t.lookup(&0, 0), 0.0);
    }

    #[test]
    fn sarsa_examples() {
        let mut t = QTable::<u8>::default();
        sarsa_update(&mut t, &0, 0, 1.0, &1, 0, true, &cfg());
        assert_eq!(t.lookup(&0, 0), 0.1);

        let mut t = QTable::<u8>::default();
        t.store(&1, 0, 2.0);
        t.store(&1, 1, 9.0);
        sarsa_update(&mut t, &0, 0, 0.0, &1, 0, false, &cfg());
        assert!((t.lookup(&0, 0) - 0.2).abs() < 1e-15);

        let mut t = QTable::<u8>::default();
        t.store(&1, 0, 3.0);
        sarsa_update(&mut t, &0, 0, 5.0, &1, 0, false, &AgentConfig { alpha: 1.0, gamma: 0.0, ..cfg() });
        assert_eq!(t.lookup(&0, 0), 5.0);
    }

    #[test]
    fn qlambda_two_step_chain() {
        let mut t = QTable::<u8>::default();
        let mut e = EligibilityTable::new(false);
        let c = cfg();
        watkins_qlambda_step(&mut t, &mut e, &0, 0, 0.0, &1, 0, 1, false, &c);
        assert!((e.get(&0, 0) - 0.9).abs() < 1e-15);
        watkins_qlambda_step(&mut t, &mut e, &1, 0, 1.0, &2, 0, 0, true, &c);
        assert!((t.lookup(&0, 0) - 0.09).abs() < 1e-15);
        assert!((t.lookup(&1, 0) - 0.1).abs() < 1e-15);
        assert!(e.is_clear());
    }

    #[test]
    fn qlambda_cuts_traces_on_exploration() {
        let mut t = QTable::<u8>::default();
        t.store(&1, 1, 1.0);
        let mut e = EligibilityTable::new(false);
        watkins_qlambda_step(&mut t, &mut e, &0, 0, 0.0, &1, 0, 2, false, &cfg());
        assert!(e.is_clear());
    }

    #[test]
    fn qlambda_zero_lambda_is_q_learning() {
        let c = AgentConfig { lambda: 0.0, gamma: 0.9, ..cfg() };
        let mut a = QTable::<u8>::default();
        let mut b = QTable::<u8>::default();
        for t in [&mut a, &mut b] {
            t.store(&2, 1, 0.5);
        }
        let mut e = EligibilityTable::new(false);
        let path: [(u8, usize, f64, u8, usize, bool); 3] =
            [(0, 0, 0.3, 1, 0, false), (1, 0, -0.2, 2, 1, false), (2, 1, 1.0, 3, 0, true)];
        for (s, act, r, s2, a2, term) in path {
            let n2 = if term { 0 } else { 2 };
            watkins_qlambda_step(&mut a, &mut e, &s, act, r, &s2, a2, n2, term, &c);
            q_learning_update(&mut b, &s, act, r, &s2, n2, term, &c);
        }
        for s in 0..3u8 {
            for act in 0..2 {
                assert!((a.lookup(&s, act) - b.lookup(&s, act)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn replacing_traces_cap_at_one() {
        let mut e = EligibilityTable::<u8>::new(true);
        e.visit(&0, 0);
        e.visit(&0, 0);
        assert_eq!(e.get(&0, 0), 1.0);
        let mut e = EligibilityTable::<u8>::new(false);
        e.visit(&0, 0);
        e.visit(&0, 0);
        assert_eq!(e.get(&0, 0), 2.0);
    }

    #[test]
    fn monte_carlo_targets() {
        assert_eq!(monte_carlo_returns(&[0.0, 7.0], 1.0), vec![7.0, 7.0]);
        assert_eq!(monte_carlo_returns(&[1.0, 1.0], 0.5), vec![1.5, 1.0]);
        assert!(monte_carlo_returns(&[], 1.0).is_empty());

        let mut t = QTable::<u8>::default();
        let targets = mc_control_episode(&mut t, &[(0, 0, 1.0)], &cfg());
        assert_eq!(targets, vec![1.0]);
        assert_eq!(t.lookup(&0, 0), 0.1);

        let mut t = QTable::<u8>::default();
        mc_control_episode(&mut t, &[], &cfg());
        assert!(t.is_empty());
    }
}
