//! Scripted stand-ins for the learned fast policy and slow reasoner.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FastPolicy, PolicyDecision, PolicyInput, ReasonerInput, ReasonerOutput, SlowReasoner};
use crate::env::{self, GridMap, MetaAction, Pose};
use crate::planner::{aligned_heading, astar_cells, compile_from, plan_to_nearest, rotations};
use crate::Point;

pub const STUB_REASONING_TOKENS: u64 = 150;
/// Greedy and oracle policies stop within this straight-line distance.
pub const GREEDY_STOP_RADIUS: f64 = 0.5;

/// First action of the bearing rule toward `target`: turn (fewest steps,
/// left on ties) until within 15° of the bearing, then move.
pub fn bearing_action(pose: &Pose, target: &Point) -> MetaAction {
    let bearing = pose.position().bearing_deg(target);
    let want = aligned_heading(pose.heading, bearing);
    rotations(pose.heading, want).next().unwrap_or(MetaAction::MoveAhead)
}

const FILLER: [&str; 12] = [
    "Keep", "checking", "doorways", "and", "open", "floor", "while", "moving", "along", "the", "chosen", "direction.",
];

/// Template reasoning text with exactly `tokens` whitespace-separated words.
pub fn stub_reasoning_text(goal_index: usize, landmarks: usize, bearing_deg: f64, tokens: u64) -> String {
    let head = format!(
        "Looking for target {goal_index}. Memory stores {landmarks} landmarks so far. \
         The next leg heads at about {:.0} degrees from the x axis, so I will turn toward it and advance.",
        bearing_deg
    );
    head.split_whitespace()
        .chain(FILLER.iter().copied().cycle())
        .take(tokens as usize)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Bearing rule toward the goal with a fixed-length template rationale.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubReasoner {
    pub tokens: u64,
}

impl StubReasoner {
    pub fn new() -> Self {
        Self { tokens: STUB_REASONING_TOKENS }
    }

    /// Reasoning toward an arbitrary point, used when the guiding point is
    /// known in hindsight.
    pub fn reason_toward(&self, pose: &Pose, goal_index: usize, landmarks: usize, toward: &Point) -> ReasonerOutput {
        let bearing = pose.position().bearing_deg(toward);
        let text = stub_reasoning_text(goal_index, landmarks, bearing, self.tokens);
        ReasonerOutput {
            reasoning_tokens: super::count_tokens(&text),
            reasoning_text: text,
            action: bearing_action(pose, toward),
            plan: Vec::new(),
        }
    }
}

impl SlowReasoner for StubReasoner {
    fn reason(&mut self, input: &ReasonerInput<'_>, _rng: &mut ChaCha8Rng) -> ReasonerOutput {
        self.reason_toward(input.pose, input.goal.index, input.memory.len(), &input.goal.position)
    }
}

/// Plans the shortest route to the nearest target and returns its first
/// `horizon` actions as guidance.
#[derive(Debug, Clone, Copy)]
pub struct OracleReasoner {
    pub horizon: usize,
    pub tokens: u64,
}

impl OracleReasoner {
    pub fn new(horizon: usize) -> Self {
        Self { horizon: horizon.max(1), tokens: STUB_REASONING_TOKENS }
    }
}

impl SlowReasoner for OracleReasoner {
    fn reason(&mut self, input: &ReasonerInput<'_>, _rng: &mut ChaCha8Rng) -> ReasonerOutput {
        let stub = StubReasoner { tokens: self.tokens };
        let Ok((path, compiled)) = plan_to_nearest(input.map, input.pose, input.map.targets()) else {
            return stub.reason_toward(input.pose, input.goal.index, input.memory.len(), &input.goal.position);
        };
        let mut actions = compiled.actions;
        actions.push(MetaAction::End);
        actions.truncate(self.horizon);
        let waypoint = input.map.center(path.goal());
        let mut out = stub.reason_toward(input.pose, input.goal.index, input.memory.len(), &waypoint);
        out.action = actions[0];
        out.plan = actions[1..].to_vec();
        out
    }
}

/// Replays the compiled shortest path to the goal, replanning whenever the
/// pose leaves the plan.
#[derive(Debug, Clone, Default)]
pub struct OraclePolicy {
    plan: VecDeque<MetaAction>,
    expected: Option<Pose>,
}

impl OraclePolicy {
    fn replan(&mut self, map: &GridMap, pose: &Pose, goal: &Point) {
        self.plan.clear();
        let compiled = map
            .cell_of(&pose.position())
            .zip(map.cell_of(goal))
            .and_then(|(from, to)| astar_cells(map, from, to).ok())
            .and_then(|path| compile_from(map, &path, pose).ok());
        if let Some(c) = compiled {
            self.plan.extend(c.actions);
            self.plan.push_back(MetaAction::End);
        }
    }
}

impl FastPolicy for OraclePolicy {
    fn decide(&mut self, input: &PolicyInput<'_>, _rng: &mut ChaCha8Rng) -> PolicyDecision {
        if self.expected != Some(*input.pose) || self.plan.is_empty() {
            self.replan(input.map, input.pose, &input.goal.position);
        }
        let action = self.plan.pop_front().unwrap_or_else(|| {
            if input.pose.position().distance(&input.goal.position) <= GREEDY_STOP_RADIUS {
                MetaAction::End
            } else {
                bearing_action(input.pose, &input.goal.position)
            }
        });
        self.expected = Some(env::step(input.map, input.pose, action).0);
        PolicyDecision { action }
    }
}

/// Turns toward the straight-line bearing to the goal and moves, ending
/// within 0.5 m. Follows slow-system guidance when offered; with
/// probability `noise` takes a random motor action instead.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyPolicy {
    pub noise: f64,
}

impl FastPolicy for GreedyPolicy {
    fn decide(&mut self, input: &PolicyInput<'_>, rng: &mut ChaCha8Rng) -> PolicyDecision {
        let random = self.noise > 0.0 && rng.gen_bool(self.noise.min(1.0));
        let action = if random {
            MetaAction::MOTOR[rng.gen_range(0..MetaAction::MOTOR.len())]
        } else if let Some(a) = input.guidance {
            a
        } else if input.pose.position().distance(&input.goal.position) <= GREEDY_STOP_RADIUS {
            MetaAction::End
        } else if input.obs_advised {
            MetaAction::Obs
        } else {
            bearing_action(input.pose, &input.goal.position)
        };
        PolicyDecision { action }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StuckPattern {
    /// Rotates in place forever.
    Spin,
    /// Two steps forward, half turn, repeat.
    Shuttle,
    /// Always moves ahead, pushing into whatever wall it meets.
    Forward,
}

/// Never ends and ignores guidance.
#[derive(Debug, Clone, Copy)]
pub struct StuckPolicy {
    pub pattern: StuckPattern,
    counter: usize,
}

impl StuckPolicy {
    pub fn new(pattern: StuckPattern) -> Self {
        Self { pattern, counter: 0 }
    }
}

impl FastPolicy for StuckPolicy {
    fn decide(&mut self, _input: &PolicyInput<'_>, _rng: &mut ChaCha8Rng) -> PolicyDecision {
        let i = self.counter;
        self.counter += 1;
        let action = match self.pattern {
            StuckPattern::Spin => MetaAction::RotateLeft,
            StuckPattern::Forward => MetaAction::MoveAhead,
            StuckPattern::Shuttle => {
                if i % 8 < 2 {
                    MetaAction::MoveAhead
                } else {
                    MetaAction::RotateLeft
                }
            }
        };
        PolicyDecision { action }
    }
}

/// Serializable policy selector. Text form: `oracle`, `greedy[:noise]`,
/// `stuck[:spin|shuttle|forward]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PolicySpec {
    Oracle,
    Greedy { noise: f64 },
    Stuck { pattern: StuckPattern },
}

impl PolicySpec {
    pub fn build(&self) -> Box<dyn FastPolicy + Send> {
        match *self {
            PolicySpec::Oracle => Box::new(OraclePolicy::default()),
            PolicySpec::Greedy { noise } => Box::new(GreedyPolicy { noise }),
            PolicySpec::Stuck { pattern } => Box::new(StuckPolicy::new(pattern)),
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Oracle => f.write_str("oracle"),
            PolicySpec::Greedy { noise } => write!(f, "greedy:{noise}"),
            PolicySpec::Stuck { pattern } => write!(f, "stuck:{}", match pattern {
                StuckPattern::Spin => "spin",
                StuckPattern::Shuttle => "shuttle",
                StuckPattern::Forward => "forward",
            }),
        }
    }
}

impl FromStr for PolicySpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, arg) = s.split_once(':').map_or((s, None), |(n, a)| (n, Some(a)));
        match (name, arg) {
            ("oracle", None) => Ok(PolicySpec::Oracle),
            ("greedy", None) => Ok(PolicySpec::Greedy { noise: 0.0 }),
            ("greedy", Some(a)) => {
                let noise: f64 = a.parse().map_err(|_| format!("bad greedy noise {a:?}"))?;
                if !(0.0..=1.0).contains(&noise) {
                    return Err(format!("greedy noise must be in [0, 1], got {noise}"));
                }
                Ok(PolicySpec::Greedy { noise })
            }
            ("stuck", None) | ("stuck", Some("spin")) => Ok(PolicySpec::Stuck { pattern: StuckPattern::Spin }),
            ("stuck", Some("shuttle")) => Ok(PolicySpec::Stuck { pattern: StuckPattern::Shuttle }),
            ("stuck", Some("forward")) => Ok(PolicySpec::Stuck { pattern: StuckPattern::Forward }),
            _ => Err(format!("unknown policy {s:?} (expected oracle, greedy[:noise] or stuck[:pattern])")),
        }
    }
}

/// Serializable reasoner selector. Text form: `stub`, `oracle[:horizon]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ReasonerSpec {
    Stub,
    Oracle { horizon: usize },
}

pub const DEFAULT_ORACLE_HORIZON: usize = 12;

impl ReasonerSpec {
    pub fn build(&self) -> Box<dyn SlowReasoner + Send> {
        match *self {
            ReasonerSpec::Stub => Box::new(StubReasoner::new()),
            ReasonerSpec::Oracle { horizon } => Box::new(OracleReasoner::new(horizon)),
        }
    }
}

impl fmt::Display for ReasonerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReasonerSpec::Stub => f.write_str("stub"),
            ReasonerSpec::Oracle { horizon } => write!(f, "oracle:{horizon}"),
        }
    }
}

impl FromStr for ReasonerSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "stub" => Ok(ReasonerSpec::Stub),
            None if s == "oracle" => Ok(ReasonerSpec::Oracle { horizon: DEFAULT_ORACLE_HORIZON }),
            Some(("oracle", h)) => match h.parse::<usize>() {
                Ok(horizon) if horizon > 0 => Ok(ReasonerSpec::Oracle { horizon }),
                _ => Err(format!("bad oracle horizon {h:?}")),
            },
            _ => Err(format!("unknown reasoner {s:?} (expected stub or oracle[:horizon])")),
        }
    }
}
