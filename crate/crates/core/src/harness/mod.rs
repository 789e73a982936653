//! Declarative experiments: build an environment, agent and criticality
//! provider from a spec, run it for several seeded runs and collect the
//! per-episode returns.

mod builtin;
mod csv;

pub use builtin::{builtin_experiment, builtin_experiments, BUILTIN_ENVIRONMENTS};
pub use csv::{to_csv_string, write_csv};

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{run_episode, AgentKind, Learner};
use crate::criticality::{
    ConstantCriticality, CriticalityProvider, JunctionCriticality, LearnedCriticality,
    ShooterCriticality,
};
use crate::mdp::{AgentConfig, Environment, MdpError, RngStream};
use crate::roadtree::{RoadTree, RoadTreeState, TreeSpec, TreeSpecError};
use crate::shooter::{Shooter, ShooterConfig, ShooterConfigError, ShooterKey};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid experiment `{name}`: {reason}")]
    Config { name: String, reason: String },
    #[error(transparent)]
    Tree(#[from] TreeSpecError),
    #[error(transparent)]
    Shooter(#[from] ShooterConfigError),
    #[error("episode failed: {0}")]
    Episode(#[from] MdpError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing experiment {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Tree1,
    Tree2,
    Tree3 {
        #[serde(default = "default_siblings")]
        siblings: usize,
    },
    Shooter {
        #[serde(default)]
        config: ShooterConfig,
    },
    /// Road-Tree loaded from a JSON `TreeSpec` file.
    TreeFile { path: PathBuf },
}

fn default_siblings() -> usize {
    99
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CritSpec {
    Constant { value: f64 },
    Junction,
    Shooter,
    LearnedVariance,
    Importance,
}

impl CritSpec {
    fn name(&self) -> &'static str {
        match self {
            CritSpec::Constant { .. } => "constant",
            CritSpec::Junction => "junction",
            CritSpec::Shooter => "shooter",
            CritSpec::LearnedVariance => "learned_variance",
            CritSpec::Importance => "importance",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub env: EnvSpec,
    pub agent: AgentKind,
    #[serde(default)]
    pub config: AgentConfig,
    /// Defaults to the environment's natural measure (junction or shooter).
    #[serde(default)]
    pub criticality: Option<CritSpec>,
    pub episodes: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_window")]
    pub smoothing_window: usize,
}

fn default_runs() -> usize {
    20
}

fn default_window() -> usize {
    100
}

impl ExperimentSpec {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|source| HarnessError::Parse {
            path: origin.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, path)
    }

    fn config_error(&self, reason: impl Into<String>) -> HarnessError {
        HarnessError::Config {
            name: self.name.clone(),
            reason: reason.into(),
        }
    }

    fn criticality_spec(&self) -> CritSpec {
        self.criticality.unwrap_or(match self.env {
            EnvSpec::Shooter { .. } => CritSpec::Shooter,
            _ => CritSpec::Junction,
        })
    }

    /// Checks everything that can be checked without running an episode.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.episodes < 1 {
            return Err(self.config_error("episodes must be at least 1"));
        }
        if self.runs < 1 {
            return Err(self.config_error("runs must be at least 1"));
        }
        if self.smoothing_window < 1 {
            return Err(self.config_error("smoothing_window must be at least 1"));
        }
        self.config.validate().map_err(|r| self.config_error(r))?;
        if let AgentKind::Cvs(mode) = &self.agent {
            mode.validate().map_err(|r| self.config_error(r))?;
        }
        match self.resolve_env()? {
            ResolvedEnv::Tree(_) => self.tree_provider().map(drop),
            ResolvedEnv::Shooter(_) => self.shooter_provider().map(drop),
        }
    }

    fn resolve_env(&self) -> Result<ResolvedEnv, HarnessError> {
        Ok(match &self.env {
            EnvSpec::Tree1 => ResolvedEnv::Tree(RoadTree::build(&TreeSpec::tree1())?),
            EnvSpec::Tree2 => ResolvedEnv::Tree(RoadTree::build(&TreeSpec::tree2())?),
            EnvSpec::Tree3 { siblings } => {
                ResolvedEnv::Tree(RoadTree::build(&TreeSpec::tree3(*siblings)?)?)
            }
            EnvSpec::TreeFile { path } => ResolvedEnv::Tree(RoadTree::build(&TreeSpec::load(path)?)?),
            EnvSpec::Shooter { config } => ResolvedEnv::Shooter(Shooter::new(config.clone())?),
        })
    }

    fn constant(&self, value: f64) -> Result<ConstantCriticality, HarnessError> {
        ConstantCriticality::new(value).map_err(|e| self.config_error(e.to_string()))
    }

    fn tree_provider(&self) -> Result<Box<dyn CriticalityProvider<RoadTreeState>>, HarnessError> {
        Ok(match self.criticality_spec() {
            CritSpec::Constant { value } => Box::new(self.constant(value)?),
            CritSpec::Junction => Box::new(JunctionCriticality),
            CritSpec::LearnedVariance => Box::new(LearnedCriticality::variance()),
            CritSpec::Importance => Box::new(LearnedCriticality::importance()),
            other => {
                return Err(self.config_error(format!(
                    "criticality `{}` does not apply to road-tree environments",
                    other.name()
                )))
            }
        })
    }

    fn shooter_provider(&self) -> Result<Box<dyn CriticalityProvider<ShooterKey>>, HarnessError> {
        Ok(match self.criticality_spec() {
            CritSpec::Constant { value } => Box::new(self.constant(value)?),
            CritSpec::Shooter => Box::new(ShooterCriticality),
            CritSpec::LearnedVariance => Box::new(LearnedCriticality::variance()),
            CritSpec::Importance => Box::new(LearnedCriticality::importance()),
            other => {
                return Err(self.config_error(format!(
                    "criticality `{}` does not apply to the shooter environment",
                    other.name()
                )))
            }
        })
    }
}

enum ResolvedEnv {
    Tree(RoadTree),
    Shooter(Shooter),
}

/// Per-run, per-episode returns with their run average and its trailing
/// running mean.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMatrix {
    returns: Vec<Vec<f64>>,
    mean_curve: Vec<f64>,
    smoothed_curve: Vec<f64>,
    window: usize,
}

impl RunMatrix {
    /// `returns[run][episode]`; every run must have the same length.
    pub fn new(returns: Vec<Vec<f64>>, window: usize) -> Self {
        assert!(!returns.is_empty(), "at least one run");
        assert!(window >= 1, "window must be positive");
        let episodes = returns[0].len();
        assert!(returns.iter().all(|r| r.len() == episodes), "ragged run matrix");
        let runs = returns.len() as f64;
        let mean_curve: Vec<f64> = (0..episodes)
            .map(|e| returns.iter().map(|r| r[e]).sum::<f64>() / runs)
            .collect();
        let smoothed_curve = running_mean(&mean_curve, window);
        Self {
            returns,
            mean_curve,
            smoothed_curve,
            window,
        }
    }

    pub fn runs(&self) -> usize {
        self.returns.len()
    }

    pub fn episodes(&self) -> usize {
        self.mean_curve.len()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn returns(&self) -> &[Vec<f64>] {
        &self.returns
    }

    pub fn mean_curve(&self) -> &[f64] {
        &self.mean_curve
    }

    pub fn smoothed_curve(&self) -> &[f64] {
        &self.smoothed_curve
    }
}

/// Trailing mean: element `e` averages `curve[max(0, e - window + 1)..=e]`.
pub fn running_mean(curve: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be positive");
    (0..curve.len())
        .map(|e| {
            let slice = &curve[(e + 1).saturating_sub(window)..=e];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Serial,
}

/// Runs every seeded run of `spec`. Run `i` draws from
/// `RngStream::for_run(base_seed, i)` with a fresh table and provider, so the
/// result does not depend on `execution`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunMatrix, HarnessError> {
    run_experiment_with(spec, Execution::Parallel)
}

pub fn run_experiment_with(
    spec: &ExperimentSpec,
    execution: Execution,
) -> Result<RunMatrix, HarnessError> {
    spec.validate()?;
    let returns = match spec.resolve_env()? {
        ResolvedEnv::Tree(env) => run_all(spec, &env, || spec.tree_provider(), execution)?,
        ResolvedEnv::Shooter(env) => run_all(spec, &env, || spec.shooter_provider(), execution)?,
    };
    Ok(RunMatrix::new(returns, spec.smoothing_window))
}

fn run_all<E, F>(
    spec: &ExperimentSpec,
    env: &E,
    provider: F,
    execution: Execution,
) -> Result<Vec<Vec<f64>>, HarnessError>
where
    E: Environment + Sync,
    F: Fn() -> Result<Box<dyn CriticalityProvider<E::Key>>, HarnessError> + Sync,
{
    let one = |run: usize| -> Result<Vec<f64>, HarnessError> {
        let mut rng = RngStream::for_run(spec.base_seed, run as u64);
        let mut learner = Learner::new(spec.agent, spec.config);
        let mut crit = provider()?;
        (0..spec.episodes)
            .map(|_| Ok(run_episode(env, &mut learner, crit.as_mut(), &mut rng, None)?))
            .collect()
    };
    match execution {
        Execution::Parallel => (0..spec.runs).into_par_iter().map(one).collect(),
        Execution::Serial => (0..spec.runs).map(one).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(agent: AgentKind, env: EnvSpec) -> ExperimentSpec {
        ExperimentSpec {
            name: "t".into(),
            env,
            agent,
            config: AgentConfig::default(),
            criticality: None,
            episodes: 30,
            runs: 3,
            base_seed: 5,
            smoothing_window: 10,
        }
    }

    #[test]
    fn running_mean_examples() {
        assert_eq!(running_mean(&[1.0, 2.0, 3.0], 1), vec![1.0, 2.0, 3.0]);
        assert_eq!(running_mean(&[1.0, 2.0, 3.0, 4.0], 2), vec![1.0, 1.5, 2.5, 3.5]);
        assert_eq!(running_mean(&[0.25; 7], 3), vec![0.25; 7]);
        assert!(running_mean(&[], 4).is_empty());
    }

    #[test]
    fn matrix_shape_and_mean() {
        let m = RunMatrix::new(vec![vec![1.0, 3.0], vec![3.0, 5.0]], 2);
        assert_eq!(m.mean_curve(), &[2.0, 4.0]);
        assert_eq!(m.smoothed_curve(), &[2.0, 3.0]);
        assert_eq!((m.runs(), m.episodes()), (2, 2));
    }

    #[test]
    fn serial_and_parallel_agree() {
        let spec = small(AgentKind::Cvs(Default::default()), EnvSpec::Shooter { config: Default::default() });
        let a = run_experiment_with(&spec, Execution::Serial).unwrap();
        let b = run_experiment_with(&spec, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, run_experiment(&spec).unwrap());
    }

    #[test]
    fn adding_runs_keeps_earlier_runs() {
        let mut spec = small(AgentKind::QLearning, EnvSpec::Tree1);
        let a = run_experiment(&spec).unwrap();
        spec.runs = 5;
        let b = run_experiment(&spec).unwrap();
        assert_eq!(a.returns(), &b.returns()[..3]);
    }

    #[test]
    fn tree_returns_are_path_sums() {
        let tree = RoadTree::build(&TreeSpec::tree3(5).unwrap()).unwrap();
        let paths = tree.path_returns();
        let spec = small(AgentKind::MonteCarlo, EnvSpec::Tree3 { siblings: 5 });
        let m = run_experiment(&spec).unwrap();
        assert!(m.returns().iter().flatten().all(|r| paths.contains(r)));
        let (lo, hi) = paths.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(*p), h.max(*p)));
        assert!(m.mean_curve().iter().all(|v| *v >= lo && *v <= hi));
    }

    #[test]
    fn config_errors_surface_before_running() {
        let mut spec = small(AgentKind::QLearning, EnvSpec::Tree1);
        spec.criticality = Some(CritSpec::Shooter);
        let err = run_experiment(&spec).unwrap_err().to_string();
        assert!(err.contains("does not apply to road-tree"), "{err}");

        let mut spec = small(AgentKind::QLearning, EnvSpec::Shooter { config: Default::default() });
        spec.criticality = Some(CritSpec::Junction);
        assert!(run_experiment(&spec).is_err());

        let mut spec = small(AgentKind::QLearning, EnvSpec::Tree1);
        spec.runs = 0;
        assert!(spec.validate().is_err());

        let mut spec = small(AgentKind::QLearning, EnvSpec::Tree1);
        spec.criticality = Some(CritSpec::Constant { value: 2.0 });
        assert!(spec.validate().is_err());

        let spec = small(AgentKind::QLearning, EnvSpec::Tree3 { siblings: 0 });
        assert!(spec.validate().is_err());

        let spec = small(AgentKind::QLearning, EnvSpec::TreeFile { path: "/nonexistent/tree.json".into() });
        assert!(spec.validate().unwrap_err().to_string().contains("/nonexistent/tree.json"));
    }

    #[test]
    fn spec_json_defaults() {
        let text = r#"{"name":"x","env":{"kind":"tree3"},"agent":{"kind":"cvs"},"episodes":10}"#;
        let spec = ExperimentSpec::from_json(text, Path::new("x.json")).unwrap();
        assert_eq!(spec.env, EnvSpec::Tree3 { siblings: 99 });
        assert_eq!((spec.runs, spec.smoothing_window, spec.base_seed), (20, 100, 0));
        assert_eq!(spec.config, AgentConfig::default());
        assert!(ExperimentSpec::from_json(r#"{"name":"x","env":{"kind":"pong"},"agent":{"kind":"cvs"},"episodes":1}"#, Path::new("y")).is_err());
    }

    #[test]
    fn learned_providers_run() {
        for crit in [CritSpec::LearnedVariance, CritSpec::Importance, CritSpec::Constant { value: 0.5 }] {
            let mut spec = small(AgentKind::Cvs(Default::default()), EnvSpec::Tree1);
            spec.criticality = Some(crit);
            let m = run_experiment(&spec).unwrap();
            assert_eq!(m.episodes(), 30);
        }
    }
}
