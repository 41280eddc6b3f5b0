//! Success rate, path- and time-weighted success, reasoning ratio and the
//! per-token latency sweep.

mod time;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{Episode, Mode, Outcome, SUCCESS_RADIUS};
use crate::env::{GridMap, MetaAction, MOVE_DISTANCE};
use crate::planner::{optimal_success_time, PlanError};
use crate::{compensated_sum, Scalar};

pub use time::TimeModel;

pub const DEFAULT_TAU_GRID: [f64; 7] = [0.0075, 0.015, 0.03, 0.06, 0.12, 0.24, 0.48];

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("episode {episode} step {step} has no token counts")]
    MissingTokenCounts { episode: usize, step: usize },
    #[error("episode {episode} refers to unknown map {map:?}")]
    UnknownMap { episode: usize, map: String },
    #[error("tau grid must be non-empty and positive")]
    BadTauGrid,
    #[error("episode on {map}: {source}")]
    Plan { map: String, source: PlanError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Total physical execution time of the logged actions.
pub fn t_phys<T: Scalar>(ep: &Episode, tm: &TimeModel<T>) -> T {
    tm.physical_time(ep.actions())
}

/// Summed reasoning and action token counts.
pub fn token_totals(ep: &Episode) -> Option<(u64, u64)> {
    let mut reasoning = 0;
    let mut action = 0;
    for s in &ep.steps {
        action += s.action_tokens?;
        match (s.mode, s.reasoning_tokens) {
            (Mode::Slow, None) => return None,
            (_, Some(n)) => reasoning += n,
            (Mode::Fast, None) => {}
        }
    }
    Some((reasoning, action))
}

/// `τ × (N_cot + N_action)`.
pub fn t_inf<T: Scalar>(ep: &Episode, tm: &TimeModel<T>) -> Result<T, MetricsError> {
    let (r, a) = token_totals(ep).ok_or_else(|| missing_tokens(0, ep))?;
    Ok(tm.inference_time(r, a))
}

fn missing_tokens(episode: usize, ep: &Episode) -> MetricsError {
    let step = ep
        .steps
        .iter()
        .position(|s| s.action_tokens.is_none() || (s.mode == Mode::Slow && s.reasoning_tokens.is_none()))
        .unwrap_or(0);
    MetricsError::MissingTokenCounts { episode, step }
}

/// Time-weighted success of one episode, `S · T_opt / max(T_opt, T_phys + T_inf)`.
pub fn sot_term<T: Scalar>(success: bool, t_optimal: T, t_phys: T, t_inf: T) -> T {
    if !success {
        return T::zero();
    }
    let actual = t_phys + t_inf;
    let denom = if actual > t_optimal { actual } else { t_optimal };
    if denom == T::zero() {
        T::one()
    } else {
        t_optimal / denom
    }
}

/// Path-weighted success of one episode, `S · ℓ_opt / max(ℓ_opt, ℓ_actual)`.
pub fn spl_term(success: bool, l_opt: f64, l_actual: f64) -> f64 {
    if !success {
        return 0.0;
    }
    let denom = l_opt.max(l_actual);
    if denom == 0.0 {
        1.0
    } else {
        l_opt / denom
    }
}

/// The per-episode quantities every metric is computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub map: String,
    pub seed: u64,
    pub success: bool,
    pub steps: usize,
    pub slow_steps: usize,
    pub move_count: usize,
    /// Geodesic distance from the start to the nearest target.
    pub l_opt: f64,
    /// Optimal time to stop within the success radius of a target; `None`
    /// when no target is reachable from the start.
    pub t_optimal: Option<f64>,
    pub t_phys: f64,
    pub reasoning_tokens: u64,
    pub action_tokens: u64,
}

impl EpisodeSummary {
    pub fn l_actual(&self) -> f64 {
        MOVE_DISTANCE * self.move_count as f64
    }

    pub fn spl(&self) -> f64 {
        spl_term(self.success, self.l_opt, self.l_actual())
    }

    pub fn t_inf(&self, tau: f64) -> f64 {
        TimeModel::<f64>::standard().with_tau(tau).inference_time(self.reasoning_tokens, self.action_tokens)
    }

    /// `None` for unsolvable episodes.
    pub fn sot(&self, tau: f64) -> Option<f64> {
        self.t_optimal.map(|t_opt| sot_term(self.success, t_opt, self.t_phys, self.t_inf(tau)))
    }
}

pub fn summarize(map: &GridMap, ep: &Episode, tm: &TimeModel<f64>) -> Result<EpisodeSummary, MetricsError> {
    let (reasoning_tokens, action_tokens) = token_totals(ep).ok_or_else(|| missing_tokens(0, ep))?;
    let t_optimal = match optimal_success_time(map, &ep.start, SUCCESS_RADIUS, tm) {
        Ok(t) => Some(t),
        Err(PlanError::Unreachable | PlanError::NoPath { .. }) => None,
        Err(source) => return Err(MetricsError::Plan { map: map.name().to_string(), source }),
    };
    Ok(EpisodeSummary {
        map: ep.map.clone(),
        seed: ep.seed,
        success: ep.outcome == Outcome::Success,
        steps: ep.steps.len(),
        slow_steps: ep.slow_steps(),
        move_count: ep.actions().filter(|a| *a == MetaAction::MoveAhead).count(),
        l_opt: map.distance_to_targets(&ep.start.position()),
        t_optimal,
        t_phys: t_phys(ep, tm),
        reasoning_tokens,
        action_tokens,
    })
}

/// Summarizes a list of episodes, resolving each one's map by name.
pub fn summarize_all(
    maps: &BTreeMap<String, GridMap>,
    episodes: &[Episode],
    tm: &TimeModel<f64>,
) -> Result<Vec<EpisodeSummary>, MetricsError> {
    episodes
        .iter()
        .enumerate()
        .map(|(i, ep)| {
            let map = maps.get(&ep.map).ok_or_else(|| MetricsError::UnknownMap { episode: i, map: ep.map.clone() })?;
            summarize(map, ep, tm).map_err(|e| match e {
                MetricsError::MissingTokenCounts { step, .. } => MetricsError::MissingTokenCounts { episode: i, step },
                other => other,
            })
        })
        .collect()
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        0.0
    } else {
        compensated_sum(v.iter().copied()) / v.len() as f64
    }
}

pub fn sr(rows: &[EpisodeSummary]) -> f64 {
    mean(rows.iter().map(|r| if r.success { 1.0 } else { 0.0 }))
}

pub fn spl(rows: &[EpisodeSummary]) -> f64 {
    mean(rows.iter().map(EpisodeSummary::spl))
}

/// Mean time-weighted success over solvable episodes and the number of
/// unsolvable episodes left out.
pub fn sot(rows: &[EpisodeSummary], tau: f64) -> (f64, usize) {
    let terms: Vec<f64> = rows.iter().filter_map(|r| r.sot(tau)).collect();
    let excluded = rows.len() - terms.len();
    (mean(terms), excluded)
}

/// Slow steps over all logged steps, pooled.
pub fn reasoning_ratio(rows: &[EpisodeSummary]) -> f64 {
    let steps: usize = rows.iter().map(|r| r.steps).sum();
    if steps == 0 {
        0.0
    } else {
        rows.iter().map(|r| r.slow_steps).sum::<usize>() as f64 / steps as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauRow {
    pub tau: f64,
    pub sot: f64,
    pub sr: f64,
}

pub fn tau_sweep(rows: &[EpisodeSummary], taus: &[f64]) -> Result<Vec<TauRow>, MetricsError> {
    if taus.is_empty() || taus.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(MetricsError::BadTauGrid);
    }
    let sr = sr(rows);
    Ok(taus.iter().map(|&tau| TauRow { tau, sot: sot(rows, tau).0, sr }).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_episodes: usize,
    pub n_unsolvable: usize,
    pub sr: f64,
    pub spl: f64,
    pub sot: f64,
    pub reasoning_ratio: f64,
    pub tau: f64,
    pub per_episode: Vec<EpisodeSummary>,
    pub tau_sweep: Option<Vec<TauRow>>,
}

impl MetricsReport {
    pub fn new(rows: Vec<EpisodeSummary>, tau: f64) -> Self {
        let (sot, n_unsolvable) = sot(&rows, tau);
        Self {
            n_episodes: rows.len(),
            n_unsolvable,
            sr: sr(&rows),
            spl: spl(&rows),
            sot,
            reasoning_ratio: reasoning_ratio(&rows),
            tau,
            per_episode: rows,
            tau_sweep: None,
        }
    }

    /// `metric,value` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "metric,value")?;
        writeln!(out, "n_episodes,{}", self.n_episodes)?;
        writeln!(out, "n_unsolvable,{}", self.n_unsolvable)?;
        writeln!(out, "sr,{}", self.sr)?;
        writeln!(out, "spl,{}", self.spl)?;
        writeln!(out, "sot,{}", self.sot)?;
        writeln!(out, "reasoning_ratio,{}", self.reasoning_ratio)?;
        writeln!(out, "tau,{}", self.tau)
    }
}

/// `tau,sot,sr` rows.
pub fn write_sweep_csv<W: Write>(rows: &[TauRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "tau,sot,sr")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.tau, r.sot, r.sr)?;
    }
    Ok(())
}
