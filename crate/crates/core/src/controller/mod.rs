//! Dual-process episode runner.
//!
//! A fast policy emits one action per step. An `Obs` action (chosen by the
//! policy, forced by the interval cap, or injected by a trigger) takes a
//! panoramic scan, stores it as a landmark and hands the next step to the
//! slow reasoner, whose output is reasoning text plus one motor action.

mod batch;
mod builtin;

use std::collections::VecDeque;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{self, Event, GridMap, MetaAction, PanoramicScan, Pose, StagnationKind};
use crate::memory::{MemoryGraph, DEFAULT_MAX_LANDMARKS};
use crate::{rng, Point};

pub use batch::{derive_episode_seed, run_batch, EpisodeSpec};
pub use builtin::{
    bearing_action, stub_reasoning_text, GreedyPolicy, OraclePolicy, OracleReasoner, PolicySpec, ReasonerSpec,
    StubReasoner, StuckPattern, StuckPolicy, DEFAULT_ORACLE_HORIZON, GREEDY_STOP_RADIUS, STUB_REASONING_TOKENS,
};

pub const EPISODE_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_MAX_STEPS: usize = 200;
pub const ADVISORY_OBS_INTERVAL: usize = 30;
pub const MAX_OBS_INTERVAL: usize = 35;
pub const SUCCESS_RADIUS: f64 = 1.0;
pub const ACTION_TOKENS: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Slow,
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    Timeout,
    Misidentification,
    Running,
}

/// The designated target instance for an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub index: usize,
    pub position: Point,
}

impl Goal {
    pub fn of(map: &GridMap, index: usize) -> Self {
        Self { index, position: map.targets()[index] }
    }
}

/// One logged step: the pose before the action, the action and its cost
/// accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub x: f64,
    pub y: f64,
    pub heading: env::Heading,
    pub action: MetaAction,
    pub mode: Mode,
    pub reasoning_tokens: Option<u64>,
    pub action_tokens: Option<u64>,
    pub events: Vec<Event>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<String>,
}

impl StepRecord {
    pub fn pose(&self) -> Pose {
        Pose::new(self.x, self.y, self.heading)
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub schema_version: u32,
    pub map: String,
    pub seed: u64,
    pub start: Pose,
    pub goal: Goal,
    pub outcome: Outcome,
    pub steps: Vec<StepRecord>,
    pub final_pose: Pose,
}

/// Trajectories and episodes share one log format.
pub type Trajectory = Episode;

impl Episode {
    pub fn actions(&self) -> impl Iterator<Item = MetaAction> + '_ {
        self.steps.iter().map(|s| s.action)
    }

    /// `p_0 .. p_T`: the pose before every step followed by the final pose.
    pub fn positions(&self) -> Vec<Point> {
        self.steps.iter().map(StepRecord::position).chain([self.final_pose.position()]).collect()
    }

    pub fn slow_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.mode == Mode::Slow).count()
    }

    pub fn ended(&self) -> bool {
        self.steps.last().is_some_and(|s| s.action == MetaAction::End)
    }

    /// Replays every action on `map` from `start`; returns the first step
    /// whose logged pose disagrees with the simulation.
    pub fn replay_mismatch(&self, map: &GridMap) -> Option<usize> {
        let mut pose = self.start;
        for (i, s) in self.steps.iter().enumerate() {
            if s.pose() != pose {
                return Some(i);
            }
            pose = env::step(map, &pose, s.action).0;
        }
        (pose != self.final_pose).then_some(self.steps.len())
    }
}

/// End-of-episode verdict: an `End` within `radius` (geodesic) of any target
/// is a success; an `End` elsewhere is a misidentification; no `End` is a
/// timeout.
pub fn classify(map: &GridMap, ep: &Episode, radius: f64) -> Outcome {
    if ep.ended() {
        if map.distance_to_targets(&ep.final_pose.position()) <= radius {
            Outcome::Success
        } else {
            Outcome::Misidentification
        }
    } else {
        Outcome::Timeout
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasoningSchedule {
    /// Slow steps follow every `Obs`.
    #[default]
    Adaptive,
    /// Every step is a slow step; no `Obs` is issued.
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    pub max_steps: usize,
    pub advisory_interval: usize,
    pub max_obs_interval: usize,
    pub success_radius: f64,
    pub action_tokens: u64,
    pub max_landmarks: usize,
    pub view_range: f64,
    pub schedule: ReasoningSchedule,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            max_steps: DEFAULT_MAX_STEPS,
            advisory_interval: ADVISORY_OBS_INTERVAL,
            max_obs_interval: MAX_OBS_INTERVAL,
            success_radius: SUCCESS_RADIUS,
            action_tokens: ACTION_TOKENS,
            max_landmarks: DEFAULT_MAX_LANDMARKS,
            view_range: env::DEFAULT_VIEW_RANGE,
            schedule: ReasoningSchedule::Adaptive,
        }
    }
}

/// Mutable controller state for one episode.
#[derive(Debug, Clone)]
pub struct AgentContext {
    pub mode: Mode,
    pub fast_steps_since_obs: usize,
    pub memory: MemoryGraph,
    pub goal: Goal,
    pub actions_since_landmark: Vec<MetaAction>,
    pub step: usize,
}

/// Whether an `Obs` is due: advisory from `advisory_interval` non-`Obs`
/// steps, mandatory from `max_obs_interval`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObsDue {
    No,
    Advised,
    Forced,
}

pub fn obs_due(ctx: &AgentContext, cfg: &ControllerConfig) -> ObsDue {
    if ctx.fast_steps_since_obs >= cfg.max_obs_interval {
        ObsDue::Forced
    } else if ctx.fast_steps_since_obs >= cfg.advisory_interval {
        ObsDue::Advised
    } else {
        ObsDue::No
    }
}

pub fn should_force_obs(ctx: &AgentContext, cfg: &ControllerConfig) -> bool {
    obs_due(ctx, cfg) != ObsDue::No
}

pub struct PolicyInput<'a> {
    pub map: &'a GridMap,
    pub pose: &'a Pose,
    pub goal: &'a Goal,
    pub step: usize,
    pub fast_steps_since_obs: usize,
    /// The advisory observation threshold has been reached.
    pub obs_advised: bool,
    /// Next action of the most recent slow-system plan, if still on it.
    pub guidance: Option<MetaAction>,
    pub last_events: &'a [Event],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicyDecision {
    pub action: MetaAction,
}

pub trait FastPolicy {
    fn decide(&mut self, input: &PolicyInput<'_>, rng: &mut ChaCha8Rng) -> PolicyDecision;
}

pub struct ReasonerInput<'a> {
    pub map: &'a GridMap,
    pub pose: &'a Pose,
    pub goal: &'a Goal,
    pub step: usize,
    pub memory: &'a MemoryGraph,
    pub memory_text: &'a str,
    pub scan: Option<&'a PanoramicScan>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReasonerOutput {
    pub reasoning_text: String,
    pub reasoning_tokens: u64,
    pub action: MetaAction,
    /// Optional action plan following `action`, offered to the fast policy
    /// as guidance.
    pub plan: Vec<MetaAction>,
}

/// Reasoning text is tokenized on whitespace.
pub fn count_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

pub trait SlowReasoner {
    fn reason(&mut self, input: &ReasonerInput<'_>, rng: &mut ChaCha8Rng) -> ReasonerOutput;
}

/// Hook that can replace a fast step with `Obs`. `trace` holds the pose
/// positions `p_0..=p_t`, with `p_t` the current one.
pub trait SlowTrigger {
    fn check(&mut self, map: &GridMap, trace: &[Point], t: usize) -> Option<(StagnationKind, usize)>;
}

pub struct NoTrigger;

impl SlowTrigger for NoTrigger {
    fn check(&mut self, _: &GridMap, _: &[Point], _: usize) -> Option<(StagnationKind, usize)> {
        None
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("policy fault at step {step}: {message}")]
    PolicyFault { step: usize, message: String },
    #[error("invalid episode setup: {0}")]
    Setup(String),
}

pub fn run_episode(
    map: &GridMap,
    start: Pose,
    goal: Goal,
    policy: &mut dyn FastPolicy,
    reasoner: &mut dyn SlowReasoner,
    cfg: &ControllerConfig,
    seed: u64,
) -> Result<Episode, ControllerError> {
    run_episode_with(map, start, goal, policy, reasoner, &mut NoTrigger, cfg, seed)
}

#[allow(clippy::too_many_arguments)]
pub fn run_episode_with(
    map: &GridMap,
    start: Pose,
    goal: Goal,
    policy: &mut dyn FastPolicy,
    reasoner: &mut dyn SlowReasoner,
    trigger: &mut dyn SlowTrigger,
    cfg: &ControllerConfig,
    seed: u64,
) -> Result<Episode, ControllerError> {
    if !map.is_free_point(&start.position()) {
        return Err(ControllerError::Setup(format!("start ({}, {}) is not on a free cell", start.x, start.y)));
    }
    if map.targets().get(goal.index) != Some(&goal.position) {
        return Err(ControllerError::Setup(format!("goal {} is not a target of map {}", goal.index, map.name())));
    }
    let mut policy_rng = rng::stream(seed, "policy");
    let mut reasoner_rng = rng::stream(seed, "reasoner");

    let mut pose = start;
    let mut ctx = AgentContext {
        mode: Mode::Slow,
        fast_steps_since_obs: 0,
        memory: MemoryGraph::new(cfg.max_landmarks),
        goal,
        actions_since_landmark: Vec::new(),
        step: 0,
    };
    let mut scan = Some(env::panoramic_with_range(map, &pose, cfg.view_range));
    ctx.memory.append_landmark(scan.clone().expect("initial scan"), pose, 0, Vec::new());

    let mut steps: Vec<StepRecord> = Vec::new();
    let mut trace: Vec<Point> = Vec::new();
    let mut plan: VecDeque<MetaAction> = VecDeque::new();
    let mut last_events: Vec<Event> = Vec::new();
    let mut outcome = Outcome::Running;

    for t in 0..cfg.max_steps {
        ctx.step = t;
        trace.push(pose.position());
        let slow = ctx.mode == Mode::Slow || cfg.schedule == ReasoningSchedule::Dense;
        let mut extra_events = Vec::new();
        let (action, mode, reasoning_tokens, reasoning) = if slow {
            let memory_text = ctx.memory.to_text();
            let input = ReasonerInput {
                map,
                pose: &pose,
                goal: &goal,
                step: t,
                memory: &ctx.memory,
                memory_text: &memory_text,
                scan: scan.as_ref(),
            };
            let out = reasoner.reason(&input, &mut reasoner_rng);
            if out.action == MetaAction::Obs {
                return Err(ControllerError::PolicyFault { step: t, message: "reasoner emitted obs".into() });
            }
            if count_tokens(&out.reasoning_text) != out.reasoning_tokens {
                return Err(ControllerError::PolicyFault {
                    step: t,
                    message: format!(
                        "reasoner declared {} tokens for a text of {}",
                        out.reasoning_tokens,
                        count_tokens(&out.reasoning_text)
                    ),
                });
            }
            plan = out.plan.into_iter().collect();
            (out.action, Mode::Slow, Some(out.reasoning_tokens), Some(out.reasoning_text))
        } else {
            let due = obs_due(&ctx, cfg);
            let fast_before = steps.last().is_some_and(|s| s.mode == Mode::Fast);
            let action = if due == ObsDue::Forced {
                extra_events.push(Event::ForcedObs);
                MetaAction::Obs
            } else if let Some((kind, witness)) = fast_before.then(|| trigger.check(map, &trace, t)).flatten() {
                extra_events.push(Event::Stagnation { kind, witness });
                MetaAction::Obs
            } else {
                let input = PolicyInput {
                    map,
                    pose: &pose,
                    goal: &goal,
                    step: t,
                    fast_steps_since_obs: ctx.fast_steps_since_obs,
                    obs_advised: due == ObsDue::Advised,
                    guidance: plan.front().copied(),
                    last_events: &last_events,
                };
                policy.decide(&input, &mut policy_rng).action
            };
            (action, Mode::Fast, None, None)
        };

        let (next, mut events) = env::step(map, &pose, action);
        events.extend(extra_events);
        steps.push(StepRecord {
            x: pose.x,
            y: pose.y,
            heading: pose.heading,
            action,
            mode,
            reasoning_tokens,
            action_tokens: Some(cfg.action_tokens),
            events: events.clone(),
            reasoning,
        });

        if mode == Mode::Fast {
            if plan.front() == Some(&action) {
                plan.pop_front();
            } else {
                plan.clear();
            }
        }
        if events.contains(&Event::Collision) {
            plan.clear();
        }
        pose = next;
        ctx.mode = Mode::Fast;
        scan = None;
        match action {
            MetaAction::Obs => {
                let s = env::panoramic_with_range(map, &pose, cfg.view_range);
                let edge = std::mem::take(&mut ctx.actions_since_landmark);
                ctx.memory.append_landmark(s.clone(), pose, t + 1, edge);
                scan = Some(s);
                ctx.fast_steps_since_obs = 0;
                ctx.mode = Mode::Slow;
                plan.clear();
            }
            MetaAction::End => {
                outcome = if map.distance_to_targets(&pose.position()) <= cfg.success_radius {
                    Outcome::Success
                } else {
                    Outcome::Misidentification
                };
                break;
            }
            _ => {
                ctx.actions_since_landmark.push(action);
                ctx.fast_steps_since_obs += 1;
            }
        }
        last_events = events;
    }
    if outcome == Outcome::Running {
        outcome = Outcome::Timeout;
    }
    Ok(Episode {
        schema_version: EPISODE_SCHEMA_VERSION,
        map: map.name().to_string(),
        seed,
        start,
        goal,
        outcome,
        steps,
        final_pose: pose,
    })
}
