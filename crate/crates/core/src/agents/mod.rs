//! Learning agents and the episode driver that runs them.

mod cvs;
mod tabular;

pub use cvs::{
    cvs_flush, cvs_insert, cvs_step, Accumulation, CritOrder, CvsMode, FiredUpdate, TargetKind,
    WaitEntry, Waitlist,
};
pub use tabular::{
    mc_control_episode, monte_carlo_returns, q_learning_update, sarsa_update,
    watkins_qlambda_step, EligibilityTable,
};

use serde::{Deserialize, Serialize};

use crate::criticality::CriticalityProvider;
use crate::mdp::{epsilon_greedy, ActionIndex, AgentConfig, Environment, MdpError, QTable, RngStream};

/// Which learning rule an agent applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentKind {
    QLearning,
    Sarsa,
    QLambda {
        #[serde(default)]
        replacing_traces: bool,
    },
    MonteCarlo,
    Cvs(CvsMode),
}

impl AgentKind {
    pub fn name(&self) -> &'static str {
        match self {
            AgentKind::QLearning => "q_learning",
            AgentKind::Sarsa => "sarsa",
            AgentKind::QLambda { .. } => "q_lambda",
            AgentKind::MonteCarlo => "monte_carlo",
            AgentKind::Cvs(_) => "cvs",
        }
    }
}

/// One agent's learned table plus its per-episode working state.
#[derive(Debug, Clone)]
pub struct Learner<K> {
    pub kind: AgentKind,
    pub cfg: AgentConfig,
    pub table: QTable<K>,
    traces: EligibilityTable<K>,
    waitlist: Waitlist<K>,
}

impl<K: Clone + Eq + std::hash::Hash> Learner<K> {
    pub fn new(kind: AgentKind, cfg: AgentConfig) -> Self {
        let replacing = matches!(
            kind,
            AgentKind::QLambda {
                replacing_traces: true
            }
        );
        Self {
            kind,
            cfg,
            table: QTable::default(),
            traces: EligibilityTable::new(replacing),
            waitlist: Waitlist::new(),
        }
    }

    pub fn waitlist(&self) -> &Waitlist<K> {
        &self.waitlist
    }

    pub fn traces(&self) -> &EligibilityTable<K> {
        &self.traces
    }
}

/// Optional per-episode record for inspection and oracle checks.
#[derive(Debug, Clone)]
pub struct EpisodeTrace<K> {
    /// `(state, action, reward)` per step.
    pub steps: Vec<(K, ActionIndex, f64)>,
    /// CVS updates in the order they were applied.
    pub fired: Vec<FiredUpdate<K>>,
}

impl<K> Default for EpisodeTrace<K> {
    fn default() -> Self {
        Self {
            steps: Vec::new(),
            fired: Vec::new(),
        }
    }
}

/// Plays one ε-greedy episode, learning as it goes, and returns the
/// undiscounted episode return.
///
/// Agents whose update needs the next action (SARSA, Q(λ), CVS with a SARSA
/// target) pick it before updating; Q-learning-style agents update first.
/// Every visited state is shown to `crit.observe` before its criticality
/// is read.
pub fn run_episode<E: Environment>(
    env: &E,
    learner: &mut Learner<E::Key>,
    crit: &mut dyn CriticalityProvider<E::Key>,
    rng: &mut RngStream,
    mut trace: Option<&mut EpisodeTrace<E::Key>>,
) -> Result<f64, MdpError> {
    let cfg = learner.cfg;
    let kind = learner.kind;
    let mut state = env.reset(rng);
    let mut key = env.key(&state);
    let mut n_actions = env.action_count(&state);
    crit.observe(&learner.table, &key, n_actions);
    if n_actions == 0 {
        return Ok(0.0);
    }
    let mut action = epsilon_greedy(&learner.table, &key, n_actions, cfg.epsilon, rng)?;
    let mut episode_return = 0.0;
    let mut mc_buffer = Vec::new();

    loop {
        if let AgentKind::Cvs(_) = kind {
            cvs_insert(&mut learner.waitlist, &key, action);
        }
        let out = env.step(&state, action)?;
        let r = out.reward;
        episode_return += r;
        let next_key = env.key(&out.next_state);
        let next_n = if out.terminal {
            0
        } else {
            env.action_count(&out.next_state)
        };
        crit.observe(&learner.table, &next_key, next_n);
        if let Some(t) = trace.as_deref_mut() {
            t.steps.push((key.clone(), action, r));
        }

        let select = |table: &QTable<E::Key>, rng: &mut RngStream| {
            if out.terminal {
                Ok(0)
            } else {
                epsilon_greedy(table, &next_key, next_n, cfg.epsilon, rng)
            }
        };

        let next_action = match kind {
            AgentKind::QLearning => {
                q_learning_update(&mut learner.table, &key, action, r, &next_key, next_n, out.terminal, &cfg);
                select(&learner.table, rng)?
            }
            AgentKind::Sarsa => {
                let a2 = select(&learner.table, rng)?;
                sarsa_update(&mut learner.table, &key, action, r, &next_key, a2, out.terminal, &cfg);
                a2
            }
            AgentKind::QLambda { .. } => {
                let a2 = select(&learner.table, rng)?;
                watkins_qlambda_step(
                    &mut learner.table,
                    &mut learner.traces,
                    &key,
                    action,
                    r,
                    &next_key,
                    a2,
                    next_n,
                    out.terminal,
                    &cfg,
                );
                a2
            }
            AgentKind::MonteCarlo => {
                mc_buffer.push((key.clone(), action, r));
                select(&learner.table, rng)?
            }
            AgentKind::Cvs(mode) => {
                if out.terminal {
                    learner.waitlist.accumulate_reward(r, cfg.gamma);
                    let fired = cvs_flush(&mut learner.waitlist, &mut learner.table, &cfg);
                    if let Some(t) = trace.as_deref_mut() {
                        t.fired.extend(fired);
                    }
                    0
                } else {
                    let c = crit.crit(&next_key);
                    let pre_selected = match mode.target_kind {
                        TargetKind::Sarsa => Some(select(&learner.table, rng)?),
                        TargetKind::QLearning => None,
                    };
                    let fired = cvs_step(
                        &mut learner.waitlist,
                        &mut learner.table,
                        c,
                        r,
                        &next_key,
                        pre_selected.unwrap_or(0),
                        next_n,
                        &mode,
                        &cfg,
                    );
                    if let Some(t) = trace.as_deref_mut() {
                        t.fired.extend(fired);
                    }
                    match pre_selected {
                        Some(a2) => a2,
                        None => select(&learner.table, rng)?,
                    }
                }
            }
        };

        if out.terminal {
            break;
        }
        state = out.next_state;
        key = next_key;
        n_actions = next_n;
        action = next_action;
        debug_assert!(action < n_actions);
    }

    if let AgentKind::MonteCarlo = kind {
        mc_control_episode(&mut learner.table, &mc_buffer, &cfg);
    }
    debug_assert!(learner.waitlist.is_empty());
    debug_assert!(learner.traces.is_clear());
    Ok(episode_return)
}
