//! Reproduction configs for the tabular learning-curve comparisons.

use crate::agents::{AgentKind, CvsMode};
use crate::mdp::AgentConfig;

use super::{CritSpec, EnvSpec, ExperimentSpec};

pub const BUILTIN_ENVIRONMENTS: &[&str] = &["tree1", "tree2", "tree3", "shooter"];

const BASE_SEED: u64 = 1;

fn spec(name: &str, env: EnvSpec, agent: AgentKind, crit: CritSpec, episodes: usize) -> ExperimentSpec {
    ExperimentSpec {
        name: name.into(),
        env,
        agent,
        config: AgentConfig::default(),
        criticality: Some(crit),
        episodes,
        runs: 20,
        base_seed: BASE_SEED,
        smoothing_window: 100,
    }
}

/// The eight paired comparisons: Q-learning, Q(λ = 0.9) and Monte Carlo
/// against CVS (Q-learning target) on the three trees and the shooter.
pub fn builtin_experiments() -> Vec<ExperimentSpec> {
    let cvs = AgentKind::Cvs(CvsMode::default());
    let tree3 = EnvSpec::Tree3 { siblings: 99 };
    let shooter = EnvSpec::Shooter {
        config: Default::default(),
    };
    vec![
        spec("fig2_qlearning", EnvSpec::Tree1, AgentKind::QLearning, CritSpec::Junction, 8000),
        spec("fig2_cvs", EnvSpec::Tree1, cvs, CritSpec::Junction, 8000),
        spec(
            "fig4_qlambda",
            EnvSpec::Tree2,
            AgentKind::QLambda {
                replacing_traces: false,
            },
            CritSpec::Junction,
            1000,
        ),
        spec("fig4_cvs", EnvSpec::Tree2, cvs, CritSpec::Junction, 1000),
        spec("fig6_mc", tree3.clone(), AgentKind::MonteCarlo, CritSpec::Junction, 600),
        spec("fig6_cvs", tree3, cvs, CritSpec::Junction, 600),
        spec("fig8_qlearning", shooter.clone(), AgentKind::QLearning, CritSpec::Shooter, 2000),
        spec("fig8_cvs", shooter, cvs, CritSpec::Shooter, 2000),
    ]
}

pub fn builtin_experiment(name: &str) -> Option<ExperimentSpec> {
    builtin_experiments().into_iter().find(|s| s.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_valid_specs() {
        let all = builtin_experiments();
        assert_eq!(all.len(), 8);
        for s in &all {
            s.validate().unwrap();
            assert_eq!(s.runs, 20);
            assert_eq!((s.config.alpha, s.config.epsilon, s.config.gamma), (0.1, 0.1, 1.0));
        }
    }

    #[test]
    fn paper_settings() {
        let ql = builtin_experiment("fig4_qlambda").unwrap();
        assert!(matches!(ql.agent, AgentKind::QLambda { .. }));
        assert_eq!(ql.config.lambda, 0.9);
        assert_eq!(builtin_experiment("fig8_cvs").unwrap().criticality, Some(CritSpec::Shooter));
        assert_eq!(builtin_experiment("fig6_mc").unwrap().env, EnvSpec::Tree3 { siblings: 99 });
        assert!(builtin_experiment("fig9").is_none());
    }
}
