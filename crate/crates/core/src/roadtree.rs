//! Road-Tree: a rooted tree of junctions joined by roads of simple states.
//!
//! A road of distance `d` holds `d - 1` single-action simple states. Rewards
//! are paid only on arrival at a junction or leaf; the root reward is never
//! paid because episodes start there. Child order in a [`TreeSpec`] fixes the
//! action numbering at each junction.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::mdp::{ActionIndex, Environment, MdpError, RngStream, StepOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub id: String,
    pub distance: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    pub reward: f64,
    #[serde(default)]
    pub children: Vec<EdgeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSpec {
    pub root_id: String,
    pub nodes: Vec<NodeSpec>,
}

#[derive(Debug, thiserror::Error)]
pub enum TreeSpecError {
    #[error("duplicate node id `{0}`")]
    DuplicateId(String),
    #[error("node `{parent}` references unknown child `{child}`")]
    UnknownChild { parent: String, child: String },
    #[error("edge `{parent}` -> `{child}` has distance {distance}; distances must be >= 1")]
    BadDistance {
        parent: String,
        child: String,
        distance: u32,
    },
    #[error("node `{0}` has more than one parent")]
    MultipleParents(String),
    #[error("root `{0}` is not a node of the tree")]
    UnknownRoot(String),
    #[error("root `{0}` must not be the child of another node")]
    RootHasParent(String),
    #[error("node `{0}` is not reachable from the root (detached or cyclic)")]
    Unreachable(String),
    #[error("node `{0}` has a non-finite reward")]
    BadReward(String),
    #[error("tree3 needs at least one bad sibling, got {0}")]
    NoSiblings(usize),
    #[error("reading tree spec {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing tree spec: {0}")]
    Parse(#[from] serde_json::Error),
}

impl TreeSpec {
    pub fn from_json(text: &str) -> Result<Self, TreeSpecError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, TreeSpecError> {
        let text = std::fs::read_to_string(path).map_err(|source| TreeSpecError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Two-level tree: the optimal leaf (reward 7) hides behind a
    /// zero-reward junction far from the root.
    pub fn tree1() -> Self {
        Self {
            root_id: "root".into(),
            nodes: vec![
                node("root", 0.0, &[("left", 20), ("right", 10)]),
                node("left", 0.0, &[("left.0", 10), ("left.1", 15)]),
                node("right", 1.0, &[("right.0", 15), ("right.1", 15)]),
                node("left.0", 0.0, &[]),
                node("left.1", 7.0, &[]),
                node("right.0", 1.0, &[]),
                node("right.1", 1.0, &[]),
            ],
        }
    }

    /// Two roads of equal length 50 ending in rewards 1 and 2.
    pub fn tree2() -> Self {
        Self {
            root_id: "root".into(),
            nodes: vec![
                node("root", 0.0, &[("left", 50), ("right", 50)]),
                node("left", 1.0, &[]),
                node("right", 2.0, &[]),
            ],
        }
    }

    /// Three-level tree whose optimal leaf (+1 behind a +1 junction) is the
    /// last child among `siblings` leaves worth -2. All roads have length 10.
    pub fn tree3(siblings: usize) -> Result<Self, TreeSpecError> {
        if siblings < 1 {
            return Err(TreeSpecError::NoSiblings(siblings));
        }
        let mut right_children: Vec<EdgeSpec> = (0..siblings)
            .map(|i| EdgeSpec {
                id: format!("right.bad{i}"),
                distance: 10,
            })
            .collect();
        right_children.push(EdgeSpec {
            id: "right.good".into(),
            distance: 10,
        });
        let mut nodes = vec![
            node("root", 0.0, &[("left", 10), ("right", 10)]),
            node("left", 0.0, &[("left.0", 10), ("left.1", 10)]),
            NodeSpec {
                id: "right".into(),
                reward: 1.0,
                children: right_children,
            },
            node("left.0", 0.0, &[]),
            node("left.1", 1.0, &[]),
        ];
        nodes.extend((0..siblings).map(|i| node(&format!("right.bad{i}"), -2.0, &[])));
        nodes.push(node("right.good", 1.0, &[]));
        Ok(Self {
            root_id: "root".into(),
            nodes,
        })
    }
}

fn node(id: &str, reward: f64, children: &[(&str, u32)]) -> NodeSpec {
    NodeSpec {
        id: id.into(),
        reward,
        children: children
            .iter()
            .map(|(c, d)| EdgeSpec {
                id: (*c).into(),
                distance: *d,
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Edge {
    child: usize,
    distance: u32,
}

#[derive(Debug, Clone)]
struct Node {
    id: String,
    reward: f64,
    children: Vec<Edge>,
}

/// Position of the agent in a Road-Tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RoadTreeState {
    /// At a junction or leaf (node index in build order).
    AtNode(usize),
    /// On the road `child` of junction `parent`, `offset` steps along it,
    /// with `1 <= offset <= distance - 1`.
    OnEdge {
        parent: usize,
        child: usize,
        offset: u32,
    },
}

/// 1 at junctions and leaves, 0 on simple road states.
pub fn junction_criticality(state: &RoadTreeState) -> f64 {
    match state {
        RoadTreeState::AtNode(_) => 1.0,
        RoadTreeState::OnEdge { .. } => 0.0,
    }
}

/// A validated Road-Tree environment.
#[derive(Debug, Clone)]
pub struct RoadTree {
    nodes: Vec<Node>,
    root: usize,
}

impl RoadTree {
    pub fn build(spec: &TreeSpec) -> Result<Self, TreeSpecError> {
        let mut index = HashMap::with_capacity(spec.nodes.len());
        for (i, n) in spec.nodes.iter().enumerate() {
            if index.insert(n.id.as_str(), i).is_some() {
                return Err(TreeSpecError::DuplicateId(n.id.clone()));
            }
            if !n.reward.is_finite() {
                return Err(TreeSpecError::BadReward(n.id.clone()));
            }
        }
        let root = *index
            .get(spec.root_id.as_str())
            .ok_or_else(|| TreeSpecError::UnknownRoot(spec.root_id.clone()))?;

        let mut has_parent = vec![false; spec.nodes.len()];
        let mut nodes = Vec::with_capacity(spec.nodes.len());
        for n in &spec.nodes {
            let mut children = Vec::with_capacity(n.children.len());
            for e in &n.children {
                let child = *index
                    .get(e.id.as_str())
                    .ok_or_else(|| TreeSpecError::UnknownChild {
                        parent: n.id.clone(),
                        child: e.id.clone(),
                    })?;
                if e.distance < 1 {
                    return Err(TreeSpecError::BadDistance {
                        parent: n.id.clone(),
                        child: e.id.clone(),
                        distance: e.distance,
                    });
                }
                if child == root {
                    return Err(TreeSpecError::RootHasParent(e.id.clone()));
                }
                if std::mem::replace(&mut has_parent[child], true) {
                    return Err(TreeSpecError::MultipleParents(e.id.clone()));
                }
                children.push(Edge {
                    child,
                    distance: e.distance,
                });
            }
            nodes.push(Node {
                id: n.id.clone(),
                reward: n.reward,
                children,
            });
        }

        // With single parents and a parentless root, reachability rules out cycles.
        let mut seen = HashSet::new();
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            if seen.insert(i) {
                stack.extend(nodes[i].children.iter().map(|e| e.child));
            }
        }
        if let Some(n) = (0..nodes.len()).find(|i| !seen.contains(i)) {
            return Err(TreeSpecError::Unreachable(nodes[n].id.clone()));
        }

        Ok(Self { nodes, root })
    }

    pub fn root_state(&self) -> RoadTreeState {
        RoadTreeState::AtNode(self.root)
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn node_id(&self, index: usize) -> &str {
        &self.nodes[index].id
    }

    pub fn is_terminal(&self, state: &RoadTreeState) -> bool {
        matches!(state, RoadTreeState::AtNode(n) if self.nodes[*n].children.is_empty())
    }

    /// Undiscounted return of every root-to-leaf path.
    pub fn path_returns(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut stack = vec![(self.root, 0.0)];
        while let Some((i, acc)) = stack.pop() {
            let n = &self.nodes[i];
            if n.children.is_empty() {
                out.push(acc);
            }
            for e in &n.children {
                stack.push((e.child, acc + self.nodes[e.child].reward));
            }
        }
        out
    }

    fn arrive(&self, child: usize) -> StepOutcome<RoadTreeState> {
        StepOutcome {
            next_state: RoadTreeState::AtNode(child),
            reward: self.nodes[child].reward,
            terminal: self.nodes[child].children.is_empty(),
        }
    }
}

impl Environment for RoadTree {
    type State = RoadTreeState;
    type Key = RoadTreeState;

    fn reset(&self, _rng: &mut RngStream) -> RoadTreeState {
        self.root_state()
    }

    fn step(
        &self,
        state: &RoadTreeState,
        action: ActionIndex,
    ) -> Result<StepOutcome<RoadTreeState>, MdpError> {
        let count = self.action_count(state);
        if count == 0 {
            return Err(MdpError::TerminalStep);
        }
        if action >= count {
            return Err(MdpError::InvalidAction { action, count });
        }
        Ok(match *state {
            RoadTreeState::AtNode(n) => {
                let edge = self.nodes[n].children[action];
                if edge.distance >= 2 {
                    StepOutcome {
                        next_state: RoadTreeState::OnEdge {
                            parent: n,
                            child: action,
                            offset: 1,
                        },
                        reward: 0.0,
                        terminal: false,
                    }
                } else {
                    self.arrive(edge.child)
                }
            }
            RoadTreeState::OnEdge {
                parent,
                child,
                offset,
            } => {
                let edge = self.nodes[parent].children[child];
                if offset + 1 < edge.distance {
                    StepOutcome {
                        next_state: RoadTreeState::OnEdge {
                            parent,
                            child,
                            offset: offset + 1,
                        },
                        reward: 0.0,
                        terminal: false,
                    }
                } else {
                    self.arrive(edge.child)
                }
            }
        })
    }

    fn action_count(&self, state: &RoadTreeState) -> usize {
        match state {
            RoadTreeState::AtNode(n) => self.nodes[*n].children.len(),
            RoadTreeState::OnEdge { .. } => 1,
        }
    }

    fn key(&self, state: &RoadTreeState) -> RoadTreeState {
        *state
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn walk(tree: &RoadTree, choices: &[ActionIndex]) -> (Vec<f64>, RoadTreeState) {
        let mut s = tree.root_state();
        let mut rewards = Vec::new();
        let mut choices = choices.iter();
        loop {
            let a = if tree.action_count(&s) > 1 {
                *choices.next().expect("ran out of junction choices")
            } else {
                0
            };
            let out = tree.step(&s, a).unwrap();
            rewards.push(out.reward);
            s = out.next_state;
            if out.terminal {
                return (rewards, s);
            }
        }
    }

    #[test]
    fn tree1_root_has_two_actions() {
        let t = RoadTree::build(&TreeSpec::tree1()).unwrap();
        assert_eq!(t.action_count(&t.root_state()), 2);
    }

    #[test]
    fn tree1_right_road_pays_on_arrival() {
        let t = RoadTree::build(&TreeSpec::tree1()).unwrap();
        let mut s = t.step(&t.root_state(), 1).unwrap();
        for _ in 0..9 {
            assert_eq!(s.reward, 0.0);
            assert_eq!(t.action_count(&s.next_state), 1);
            assert_eq!(junction_criticality(&s.next_state), 0.0);
            s = t.step(&s.next_state, 0).unwrap();
        }
        assert_eq!(s.reward, 1.0);
        assert!(!s.terminal);
        assert_eq!(s.next_state, RoadTreeState::AtNode(t.node_index("right").unwrap()));
    }

    #[test]
    fn tree1_optimal_path() {
        let t = RoadTree::build(&TreeSpec::tree1()).unwrap();
        let (rewards, end) = walk(&t, &[0, 1]);
        assert_eq!(rewards.iter().sum::<f64>(), 7.0);
        assert_eq!(rewards.len(), 20 + 15);
        assert_eq!(junction_criticality(&end), 1.0);
        assert!(t.is_terminal(&end));
    }

    #[test]
    fn tree2_reward_two_road() {
        let t = RoadTree::build(&TreeSpec::tree2()).unwrap();
        let (rewards, _) = walk(&t, &[1]);
        assert_eq!(rewards.len(), 50);
        assert!(rewards[..49].iter().all(|r| *r == 0.0));
        assert_eq!(rewards[49], 2.0);
    }

    #[test]
    fn tree3_paths() {
        let t = RoadTree::build(&TreeSpec::tree3(99).unwrap()).unwrap();
        let right = t.node_index("right").unwrap();
        assert_eq!(t.action_count(&RoadTreeState::AtNode(right)), 100);
        let (bad, _) = walk(&t, &[1, 0]);
        assert_eq!(bad.iter().sum::<f64>(), -1.0);
        let (good, _) = walk(&t, &[1, 99]);
        assert_eq!(good.iter().sum::<f64>(), 2.0);
        assert!(matches!(TreeSpec::tree3(0), Err(TreeSpecError::NoSiblings(0))));
        assert_eq!(TreeSpec::tree3(19).unwrap().nodes.len(), 5 + 20);
    }

    #[test]
    fn degenerate_and_unit_distance() {
        let single = TreeSpec {
            root_id: "r".into(),
            nodes: vec![node("r", 0.0, &[])],
        };
        let t = RoadTree::build(&single).unwrap();
        let mut rng = RngStream::from_seed(0);
        let s = t.reset(&mut rng);
        assert!(t.is_terminal(&s));
        assert_eq!(t.step(&s, 0), Err(MdpError::TerminalStep));

        let short = TreeSpec {
            root_id: "r".into(),
            nodes: vec![node("r", 0.0, &[("a", 1), ("b", 3)]), node("a", 4.0, &[]), node("b", 0.0, &[])],
        };
        let t = RoadTree::build(&short).unwrap();
        let out = t.step(&t.root_state(), 0).unwrap();
        assert_eq!(out.reward, 4.0);
        assert!(out.terminal);
        assert_eq!(t.step(&t.root_state(), 2), Err(MdpError::InvalidAction { action: 2, count: 2 }));
    }

    #[test]
    fn validation_names_offending_node() {
        let cases: Vec<(TreeSpec, &str)> = vec![
            (
                TreeSpec { root_id: "r".into(), nodes: vec![node("r", 0.0, &[]), node("r", 1.0, &[])] },
                "duplicate node id `r`",
            ),
            (
                TreeSpec { root_id: "r".into(), nodes: vec![node("r", 0.0, &[("x", 2)])] },
                "unknown child `x`",
            ),
            (
                TreeSpec { root_id: "r".into(), nodes: vec![node("r", 0.0, &[("a", 0)]), node("a", 0.0, &[])] },
                "`r` -> `a` has distance 0",
            ),
            (
                TreeSpec {
                    root_id: "r".into(),
                    nodes: vec![node("r", 0.0, &[("a", 1)]), node("a", 0.0, &[("b", 1)]), node("b", 0.0, &[("a", 1)])],
                },
                "node `a` has more than one parent",
            ),
            (
                TreeSpec {
                    root_id: "r".into(),
                    nodes: vec![node("r", 0.0, &[]), node("a", 0.0, &[("b", 1)]), node("b", 0.0, &[("a", 1)])],
                },
                "node `a` is not reachable",
            ),
            (
                TreeSpec { root_id: "r".into(), nodes: vec![node("r", 0.0, &[("r", 1)])] },
                "root `r` must not be the child",
            ),
        ];
        for (spec, needle) in cases {
            let err = RoadTree::build(&spec).unwrap_err().to_string();
            assert!(err.contains(needle), "{err:?} lacks {needle:?}");
        }
    }

    #[test]
    fn json_round_trip_of_builtin() {
        let text = serde_json::to_string(&TreeSpec::tree1()).unwrap();
        assert_eq!(TreeSpec::from_json(&text).unwrap(), TreeSpec::tree1());
        let handmade = r#"{"root_id":"s","nodes":[{"id":"s","reward":0,"children":[{"id":"t","distance":2}]},{"id":"t","reward":3}]}"#;
        let t = RoadTree::build(&TreeSpec::from_json(handmade).unwrap()).unwrap();
        assert_eq!(t.path_returns(), vec![3.0]);
    }

    proptest::proptest! {
        // Episode length is the summed road distance and the return the summed
        // node rewards along the chosen path.
        #[test]
        fn episode_length_and_return_follow_path(choices in proptest::collection::vec(0usize..100, 2)) {
            let t = RoadTree::build(&TreeSpec::tree3(99).unwrap()).unwrap();
            let first = choices[0] % 2;
            let second = if first == 0 { choices[1] % 2 } else { choices[1] };
            let (rewards, _) = walk(&t, &[first, second]);
            proptest::prop_assert_eq!(rewards.len(), 20);
            let expected = match (first, second) {
                (0, 0) => 0.0,
                (0, _) => 1.0,
                (1, 99) => 2.0,
                _ => -1.0,
            };
            proptest::prop_assert_eq!(rewards.iter().sum::<f64>(), expected);
        }
    }
}
