//! Stagnation detection during rollouts, and collect-and-repair generation
//! of successful training episodes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{
    self, classify, count_tokens, run_batch, run_episode_with, ControllerConfig, ControllerError, Episode, EpisodeSpec,
    FastPolicy, Goal, Mode, Outcome, PolicySpec, ReasonerInput, ReasonerSpec, SlowReasoner, SlowTrigger, StepRecord,
};
use crate::env::{self, Event, GridMap, MetaAction, Pose, StagnationKind};
use crate::memory::MemoryGraph;
use crate::planner::{plan_to_nearest, PlanError};
use crate::{rng, Point};

pub const MAX_REPAIRED_STEPS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StagnationConfig {
    pub t_stag: usize,
    pub delta_stag: f64,
    pub dt_low: usize,
    pub dt_high: usize,
}

impl Default for StagnationConfig {
    fn default() -> Self {
        Self { t_stag: 20, delta_stag: 0.5, dt_low: 20, dt_high: 35 }
    }
}

impl StagnationConfig {
    pub fn is_valid(&self) -> bool {
        self.dt_low >= 1 && self.dt_high >= self.dt_low && self.delta_stag >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagnationEvent {
    pub t: usize,
    pub kind: StagnationKind,
    /// Matched earlier step for repetition, look-back window for no
    /// progress.
    pub witness: usize,
}

/// Look-back window for the no-progress check at step `t`, uniform in
/// `[dt_low, dt_high]` and clamped to `t`. A pure function of
/// `(seed, t)`: the stream position is the step index.
pub fn sample_dt(seed: u64, t: usize, cfg: &StagnationConfig) -> usize {
    let mut r = ChaCha8Rng::seed_from_u64(rng::derive_seed(seed, "stagnation", 0));
    r.set_stream(t as u64);
    r.gen_range(cfg.dt_low..=cfg.dt_high).min(t)
}

/// Fires when `p_t` is within `delta_stag` of some `p_k`, `k ≤ t − t_stag`;
/// the witness is the smallest such `k`.
pub fn detect_repetitive(trace: &[Point], t: usize, cfg: &StagnationConfig) -> Option<StagnationEvent> {
    if t < cfg.t_stag || t >= trace.len() {
        return None;
    }
    let p = trace[t];
    (0..=t - cfg.t_stag)
        .find(|&k| p.distance(&trace[k]) <= cfg.delta_stag)
        .map(|k| StagnationEvent { t, kind: StagnationKind::Repetitive, witness: k })
}

/// Fires when the geodesic distance to the nearest target at `p_t` exceeds
/// the one at `p_{t−Δt}`.
pub fn detect_no_progress(
    trace: &[Point],
    t: usize,
    map: &GridMap,
    cfg: &StagnationConfig,
    seed: u64,
) -> Option<StagnationEvent> {
    if t < cfg.dt_low || t >= trace.len() {
        return None;
    }
    let dt = sample_dt(seed, t, cfg);
    let now = map.distance_to_targets(&trace[t]);
    let before = map.distance_to_targets(&trace[t - dt]);
    (now > before).then_some(StagnationEvent { t, kind: StagnationKind::NoProgress, witness: dt })
}

/// Either detector, repetition first.
pub fn detect_any(trace: &[Point], t: usize, map: &GridMap, cfg: &StagnationConfig, seed: u64) -> Option<StagnationEvent> {
    detect_repetitive(trace, t, cfg).or_else(|| detect_no_progress(trace, t, map, cfg, seed))
}

/// Controller hook that turns a stagnation point into an `Obs`.
#[derive(Debug, Clone, Copy)]
pub struct StagnationTrigger {
    pub cfg: StagnationConfig,
    pub seed: u64,
}

impl SlowTrigger for StagnationTrigger {
    fn check(&mut self, map: &GridMap, trace: &[Point], t: usize) -> Option<(StagnationKind, usize)> {
        detect_any(trace, t, map, &self.cfg, self.seed).map(|e| (e.kind, e.witness))
    }
}

#[allow(clippy::too_many_arguments)]
pub fn rollout_with_stagnation(
    map: &GridMap,
    start: Pose,
    goal: Goal,
    policy: &mut dyn FastPolicy,
    reasoner: &mut dyn SlowReasoner,
    cfg: &ControllerConfig,
    stag: &StagnationConfig,
    seed: u64,
) -> Result<Episode, ControllerError> {
    let mut trigger = StagnationTrigger { cfg: *stag, seed };
    run_episode_with(map, start, goal, policy, reasoner, &mut trigger, cfg, seed)
}

pub fn classify_failure(map: &GridMap, ep: &Episode, radius: f64) -> Outcome {
    classify(map, ep, radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intervention {
    pub t_star: usize,
    /// No stagnation point existed; `t_star` is the closest step overall.
    pub fallback: bool,
}

/// Step whose action is replaced by `Obs` during repair. The last step for
/// a misidentification; for a timeout, the stagnation point closest to a
/// target (earliest on ties), or the closest step overall when there is
/// none.
pub fn find_intervention(
    ep: &Episode,
    map: &GridMap,
    cfg: &StagnationConfig,
    radius: f64,
) -> Option<Intervention> {
    if ep.steps.is_empty() {
        return None;
    }
    match classify(map, ep, radius) {
        Outcome::Success | Outcome::Running => None,
        Outcome::Misidentification => Some(Intervention { t_star: ep.steps.len() - 1, fallback: false }),
        Outcome::Timeout => {
            let trace = ep.positions();
            let dist: Vec<f64> = ep.steps.iter().map(|s| map.distance_to_targets(&s.position())).collect();
            let argmin = |ts: &mut dyn Iterator<Item = usize>| {
                ts.fold(None, |best: Option<usize>, t| match best {
                    Some(b) if dist[b] <= dist[t] => Some(b),
                    _ => Some(t),
                })
            };
            let mut stagnant = (0..ep.steps.len()).filter(|&t| detect_any(&trace, t, map, cfg, ep.seed).is_some());
            match argmin(&mut stagnant) {
                Some(t_star) => Some(Intervention { t_star, fallback: false }),
                None => argmin(&mut (0..ep.steps.len())).map(|t_star| Intervention { t_star, fallback: true }),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Length,
    Disconnected,
    SpliceFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairOutcome {
    KeptAsIs,
    Repaired { t_star: usize, spliced: usize, fallback: bool },
    Dropped(DropReason),
}

/// Rebuilds the landmark memory implied by a step log.
pub fn memory_from_steps(map: &GridMap, start: &Pose, steps: &[StepRecord], cfg: &ControllerConfig) -> MemoryGraph {
    let mut mem = MemoryGraph::new(cfg.max_landmarks);
    mem.append_landmark(env::panoramic_with_range(map, start, cfg.view_range), *start, 0, Vec::new());
    let mut edge = Vec::new();
    for (i, s) in steps.iter().enumerate() {
        match s.action {
            MetaAction::Obs => {
                let (next, _) = env::step(map, &s.pose(), s.action);
                let scan = env::panoramic_with_range(map, &next, cfg.view_range);
                mem.append_landmark(scan, next, i + 1, std::mem::take(&mut edge));
            }
            MetaAction::End => {}
            a => edge.push(a),
        }
    }
    mem
}

struct Splicer<'a> {
    map: &'a GridMap,
    goal: Goal,
    cfg: &'a ControllerConfig,
    steps: Vec<StepRecord>,
    pose: Pose,
    since_obs: usize,
    memory: MemoryGraph,
}

impl Splicer<'_> {
    fn push(&mut self, action: MetaAction, mode: Mode, extra: &[Event], reasoning: Option<(String, u64)>) {
        let (next, mut events) = env::step(self.map, &self.pose, action);
        events.extend_from_slice(extra);
        let (text, tokens) = reasoning.map_or((None, None), |(t, n)| (Some(t), Some(n)));
        self.steps.push(StepRecord {
            x: self.pose.x,
            y: self.pose.y,
            heading: self.pose.heading,
            action,
            mode,
            reasoning_tokens: tokens,
            action_tokens: Some(self.cfg.action_tokens),
            events,
            reasoning: text,
        });
        if action == MetaAction::Obs {
            let scan = env::panoramic_with_range(self.map, &next, self.cfg.view_range);
            let edge = edge_since_last_obs(&self.steps[..self.steps.len() - 1]);
            self.memory.append_landmark(scan, next, self.steps.len(), edge);
            self.since_obs = 0;
        } else if action != MetaAction::End {
            self.since_obs += 1;
        }
        self.pose = next;
    }

    fn slow(&mut self, reasoner: &mut dyn SlowReasoner, action: MetaAction, rng: &mut ChaCha8Rng) {
        let text = self.memory.to_text();
        let input = ReasonerInput {
            map: self.map,
            pose: &self.pose,
            goal: &self.goal,
            step: self.steps.len(),
            memory: &self.memory,
            memory_text: &text,
            scan: None,
        };
        let out = reasoner.reason(&input, rng);
        let tokens = count_tokens(&out.reasoning_text);
        self.push(action, Mode::Slow, &[Event::Spliced], Some((out.reasoning_text, tokens)));
    }
}

fn edge_since_last_obs(steps: &[StepRecord]) -> Vec<MetaAction> {
    let from = steps.iter().rposition(|s| s.action == MetaAction::Obs).map_or(0, |i| i + 1);
    steps[from..].iter().map(|s| s.action).filter(|a| a.is_locomotion()).collect()
}

/// Keeps `steps[..t*]` verbatim, replaces step `t*` with `Obs`, then
/// appends a slow step and the compiled shortest path to the nearest target
/// (observing every `max_obs_interval` non-`Obs` steps) followed by `End`.
pub fn repair(
    ep: &Episode,
    map: &GridMap,
    reasoner: &mut dyn SlowReasoner,
    cfg: &ControllerConfig,
    stag: &StagnationConfig,
) -> (RepairOutcome, Option<Episode>) {
    let Some(iv) = find_intervention(ep, map, stag, cfg.success_radius) else {
        return (RepairOutcome::KeptAsIs, None);
    };
    let t_star = iv.t_star;
    let prefix = &ep.steps[..t_star];
    let at = ep.steps[t_star].pose();
    let plan = match plan_to_nearest(map, &at, map.targets()) {
        Ok((_, compiled)) => compiled.actions,
        Err(PlanError::Unreachable | PlanError::NoPath { .. }) => {
            return (RepairOutcome::Dropped(DropReason::Disconnected), None)
        }
        Err(_) => return (RepairOutcome::Dropped(DropReason::SpliceFailure), None),
    };

    let mut rng = rng::stream(ep.seed, "repair");
    let since_obs = prefix.iter().rev().take_while(|s| s.action != MetaAction::Obs).count();
    let mut sp = Splicer {
        map,
        goal: ep.goal,
        cfg,
        steps: prefix.to_vec(),
        pose: at,
        since_obs,
        memory: memory_from_steps(map, &ep.start, prefix, cfg),
    };
    sp.push(MetaAction::Obs, Mode::Fast, &[Event::RepairObs], None);
    let mut rest = plan.into_iter().chain([MetaAction::End]);
    let first = rest.next().expect("chain is non-empty");
    sp.slow(reasoner, first, &mut rng);
    if first != MetaAction::End {
        for action in rest {
            if sp.since_obs >= cfg.max_obs_interval && action != MetaAction::End {
                sp.push(MetaAction::Obs, Mode::Fast, &[Event::ForcedObs, Event::Spliced], None);
                sp.slow(reasoner, action, &mut rng);
            } else {
                sp.push(action, Mode::Fast, &[Event::Spliced], None);
            }
        }
    }

    let spliced = sp.steps.len() - t_star;
    let mut out = Episode { steps: sp.steps, final_pose: sp.pose, outcome: Outcome::Running, ..ep.clone() };
    out.outcome = classify(map, &out, cfg.success_radius);
    if out.steps.len() > MAX_REPAIRED_STEPS {
        return (RepairOutcome::Dropped(DropReason::Length), None);
    }
    if out.outcome != Outcome::Success {
        return (RepairOutcome::Dropped(DropReason::SpliceFailure), None);
    }
    (RepairOutcome::Repaired { t_star, spliced, fallback: iv.fallback }, Some(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DropCounts {
    pub length: usize,
    pub disconnected: usize,
    pub splice_failure: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RoundReport {
    pub n_rollouts: usize,
    pub n_success_raw: usize,
    pub n_repaired: usize,
    pub n_dropped: DropCounts,
    pub sr_raw: f64,
    pub sr_final: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub n_faulted: usize,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

impl RoundReport {
    pub fn from_outcomes<'a>(outcomes: impl IntoIterator<Item = &'a Option<RepairOutcome>>) -> Self {
        let mut r = RoundReport::default();
        for o in outcomes {
            r.n_rollouts += 1;
            match o {
                None => r.n_faulted += 1,
                Some(RepairOutcome::KeptAsIs) => r.n_success_raw += 1,
                Some(RepairOutcome::Repaired { .. }) => r.n_repaired += 1,
                Some(RepairOutcome::Dropped(DropReason::Length)) => r.n_dropped.length += 1,
                Some(RepairOutcome::Dropped(DropReason::Disconnected)) => r.n_dropped.disconnected += 1,
                Some(RepairOutcome::Dropped(DropReason::SpliceFailure)) => r.n_dropped.splice_failure += 1,
            }
        }
        if r.n_rollouts > 0 {
            r.sr_raw = r.n_success_raw as f64 / r.n_rollouts as f64;
            r.sr_final = (r.n_success_raw + r.n_repaired) as f64 / r.n_rollouts as f64;
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrftRound {
    pub raw: Vec<Result<Episode, ControllerError>>,
    /// Per rollout; `None` for rollouts that faulted.
    pub outcomes: Vec<Option<RepairOutcome>>,
    /// Successful raw episodes and successful repairs, in rollout order.
    pub dataset: Vec<Episode>,
    pub report: RoundReport,
}

/// Collects `specs.len()` rollouts with stagnation triggering, keeps the
/// successes and repairs the failures.
pub fn irft_round(
    maps: &[GridMap],
    specs: &[EpisodeSpec],
    policy: &PolicySpec,
    reasoner: &ReasonerSpec,
    cfg: &ControllerConfig,
    stag: &StagnationConfig,
    jobs: usize,
) -> IrftRound {
    let raw = run_batch(
        maps,
        specs,
        policy,
        reasoner,
        cfg,
        |spec| Box::new(StagnationTrigger { cfg: *stag, seed: spec.seed }) as Box<dyn SlowTrigger>,
        jobs,
    );
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool");
    let processed: Vec<(Option<RepairOutcome>, Option<Episode>)> = pool.install(|| {
        raw.par_iter()
            .zip(specs.par_iter())
            .map(|(r, spec)| match r {
                Err(_) => (None, None),
                Ok(ep) if ep.outcome == Outcome::Success => (Some(RepairOutcome::KeptAsIs), Some(ep.clone())),
                Ok(ep) => {
                    let mut rs = reasoner.build();
                    let (o, fixed) = repair(ep, &maps[spec.map], rs.as_mut(), cfg, stag);
                    (Some(o), fixed)
                }
            })
            .collect()
    });
    let outcomes: Vec<Option<RepairOutcome>> = processed.iter().map(|(o, _)| *o).collect();
    let report = RoundReport::from_outcomes(&outcomes);
    let dataset = processed.into_iter().filter_map(|(_, e)| e).collect();
    IrftRound { raw, outcomes, dataset, report }
}

/// Runs the same suite as [`irft_round`] but returns only the raw rollouts.
pub fn collect_rollouts(
    maps: &[GridMap],
    specs: &[EpisodeSpec],
    policy: &PolicySpec,
    reasoner: &ReasonerSpec,
    cfg: &ControllerConfig,
    stag: Option<&StagnationConfig>,
    jobs: usize,
) -> Vec<Result<Episode, ControllerError>> {
    match stag {
        Some(s) => run_batch(
            maps,
            specs,
            policy,
            reasoner,
            cfg,
            |spec| Box::new(StagnationTrigger { cfg: *s, seed: spec.seed }) as Box<dyn SlowTrigger>,
            jobs,
        ),
        None => run_batch(maps, specs, policy, reasoner, cfg, |_| Box::new(controller::NoTrigger) as Box<dyn SlowTrigger>, jobs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stationary_agent_repeats_at_twenty() {
        let cfg = StagnationConfig::default();
        let trace = vec![Point::new(1.0, 1.0); 25];
        assert_eq!(detect_repetitive(&trace, 19, &cfg), None);
        assert_eq!(
            detect_repetitive(&trace, 20, &cfg),
            Some(StagnationEvent { t: 20, kind: StagnationKind::Repetitive, witness: 0 })
        );
    }

    #[test]
    fn straight_walk_never_repeats() {
        let cfg = StagnationConfig::default();
        let trace: Vec<Point> = (0..200).map(|i| Point::new(0.25 * i as f64, 0.0)).collect();
        assert!((0..200).all(|t| detect_repetitive(&trace, t, &cfg).is_none()));
    }

    #[test]
    fn dt_is_reproducible_and_in_range() {
        let cfg = StagnationConfig::default();
        for t in 0..100 {
            let a = sample_dt(42, t, &cfg);
            assert_eq!(a, sample_dt(42, t, &cfg));
            assert!(a <= t && (t < 20 || (20..=35).contains(&a)));
        }
        let v1: Vec<usize> = (40..80).map(|t| sample_dt(1, t, &cfg)).collect();
        let v2: Vec<usize> = (40..80).map(|t| sample_dt(2, t, &cfg)).collect();
        assert_ne!(v1, v2);
    }

    #[test]
    fn report_counts() {
        let outcomes = vec![
            Some(RepairOutcome::KeptAsIs),
            Some(RepairOutcome::Repaired { t_star: 3, spliced: 5, fallback: false }),
            Some(RepairOutcome::Dropped(DropReason::Length)),
            None,
        ];
        let r = RoundReport::from_outcomes(&outcomes);
        assert_eq!((r.n_rollouts, r.n_success_raw, r.n_repaired, r.n_faulted), (4, 1, 1, 1));
        assert_eq!(r.n_dropped.length, 1);
        assert_eq!(r.sr_raw, 0.25);
        assert_eq!(r.sr_final, 0.5);
    }
}
