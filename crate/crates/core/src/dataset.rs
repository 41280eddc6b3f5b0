//! Conversation and segment training records, and the versioned JSONL files
//! they are stored in.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{count_tokens, Episode, Goal, Mode, Outcome, StubReasoner, EPISODE_SCHEMA_VERSION};
use crate::env::{self, GridMap, MetaAction};
use crate::memory::{parse_memory_text, MemoryGraph, DEFAULT_MAX_LANDMARKS};

pub const STAGE1_SCHEMA_VERSION: u32 = 1;
pub const STAGE2_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEG_LEN: usize = 16;

const STAGE1_TEMPLATE: &str = include_str!("../templates/stage1_system.txt");
const STAGE2_TEMPLATE: &str = include_str!("../templates/stage2_system.txt");

pub fn stage1_instruction(goal: &Goal) -> String {
    STAGE1_TEMPLATE.trim_end().replace("{goal}", &goal.index.to_string())
}

pub fn stage2_instruction(goal: &Goal) -> String {
    STAGE2_TEMPLATE.trim_end().replace("{goal}", &goal.index.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct SchemaError {
    /// 1-based.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("trajectory does not replay on its map (first bad step {step})")]
    ReplayMismatch { step: usize },
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One conversation turn: an observation reference and the action taken.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    /// Step index in the source trajectory.
    pub index: usize,
    pub view: String,
    pub action: String,
}

fn frame_ref(i: usize) -> String {
    format!("frame:{i}")
}

fn panorama_ref(i: usize) -> String {
    format!("panorama:{i}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationRecord {
    pub schema_version: u32,
    pub map: String,
    pub seed: u64,
    pub goal: Goal,
    pub system_instruction: String,
    pub turns: Vec<Turn>,
}

/// One turn per step, after checking the trajectory replays on `map`.
pub fn format_stage1(map: &GridMap, traj: &Episode) -> Result<ConversationRecord, DatasetError> {
    if let Some(step) = traj.replay_mismatch(map) {
        return Err(DatasetError::ReplayMismatch { step });
    }
    let turns = traj
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| Turn { index: i, view: frame_ref(i), action: s.action.spelling().to_owned() })
        .collect();
    Ok(ConversationRecord {
        schema_version: STAGE1_SCHEMA_VERSION,
        map: traj.map.clone(),
        seed: traj.seed,
        goal: traj.goal,
        system_instruction: stage1_instruction(&traj.goal),
        turns,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub schema_version: u32,
    pub map: String,
    pub seed: u64,
    pub goal: Goal,
    /// 0-based position of this segment in its trajectory.
    pub segment: usize,
    pub seg_len: usize,
    pub max_landmarks: usize,
    pub terminal: bool,
    pub system_instruction: String,
    pub memory_text: String,
    pub reasoning_text: String,
    pub reasoning_tokens: u64,
    /// The first turn's view is the panorama at the segment start.
    pub turns: Vec<Turn>,
    /// Inserted `obs` closing a non-terminal segment.
    pub trailing: Option<Turn>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentConfig {
    pub seg_len: usize,
    pub max_landmarks: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self { seg_len: DEFAULT_SEG_LEN, max_landmarks: DEFAULT_MAX_LANDMARKS }
    }
}

/// Cuts a trajectory into `seg_len`-turn segments. Segment `i` carries the
/// memory of the landmarks recorded at the start of segments `0..=i` and a
/// rationale pointing at where the segment ends.
pub fn segment_stage2(map: &GridMap, traj: &Episode, cfg: &SegmentConfig, reasoner: &StubReasoner) -> Vec<SegmentRecord> {
    assert!(cfg.seg_len > 0, "segment length must be positive");
    let positions = traj.positions();
    let n = traj.steps.len();
    let mut memory = MemoryGraph::new(cfg.max_landmarks);
    let mut out = Vec::with_capacity(n.div_ceil(cfg.seg_len));
    for (segment, from) in (0..n).step_by(cfg.seg_len).enumerate() {
        let to = (from + cfg.seg_len).min(n);
        let pose = traj.steps[from].pose();
        let edge = if segment == 0 {
            Vec::new()
        } else {
            traj.steps[from - cfg.seg_len..from].iter().map(|s| s.action).filter(|a| a.is_locomotion()).collect()
        };
        memory.append_landmark(env::panoramic(map, &pose), pose, from, edge);
        let reasoning = reasoner.reason_toward(&pose, traj.goal.index, memory.len(), &positions[to]);
        let terminal = to == n;
        let turns = (from..to)
            .map(|i| Turn {
                index: i,
                view: if i == from { panorama_ref(i) } else { frame_ref(i) },
                action: traj.steps[i].action.spelling().to_owned(),
            })
            .collect();
        let trailing =
            (!terminal).then(|| Turn { index: to, view: frame_ref(to), action: MetaAction::Obs.spelling().to_owned() });
        out.push(SegmentRecord {
            schema_version: STAGE2_SCHEMA_VERSION,
            map: traj.map.clone(),
            seed: traj.seed,
            goal: traj.goal,
            segment,
            seg_len: cfg.seg_len,
            max_landmarks: cfg.max_landmarks,
            terminal,
            system_instruction: stage2_instruction(&traj.goal),
            memory_text: memory.to_text(),
            reasoning_tokens: reasoning.reasoning_tokens,
            reasoning_text: reasoning.reasoning_text,
            turns,
            trailing,
        });
    }
    out
}

/// A line-oriented record with a version stamp and structural checks.
pub trait Record: Serialize + DeserializeOwned {
    const SCHEMA_VERSION: u32;
    fn validate(&self) -> Result<(), String>;
}

fn parse_action(s: &str) -> Result<MetaAction, String> {
    let a: MetaAction = s.parse()?;
    if a.spelling() != s {
        return Err(format!("non-canonical action spelling {s:?}"));
    }
    Ok(a)
}

fn check_turns(turns: &[Turn], first: usize) -> Result<Vec<MetaAction>, String> {
    turns
        .iter()
        .enumerate()
        .map(|(k, t)| {
            if t.index != first + k {
                return Err(format!("turn index {} where {} expected", t.index, first + k));
            }
            parse_action(&t.action)
        })
        .collect()
}

impl Record for ConversationRecord {
    const SCHEMA_VERSION: u32 = STAGE1_SCHEMA_VERSION;

    fn validate(&self) -> Result<(), String> {
        let actions = check_turns(&self.turns, 0)?;
        match actions.last() {
            None => return Err("no turns".into()),
            Some(MetaAction::End | MetaAction::Obs) => {}
            Some(a) => return Err(format!("last action is {a}")),
        }
        if let Some(t) = self.turns.iter().find(|t| t.view != frame_ref(t.index)) {
            return Err(format!("turn {} has view {:?}", t.index, t.view));
        }
        if actions[..actions.len() - 1].contains(&MetaAction::End) {
            return Err("end before the last turn".into());
        }
        Ok(())
    }
}

impl Record for SegmentRecord {
    const SCHEMA_VERSION: u32 = STAGE2_SCHEMA_VERSION;

    fn validate(&self) -> Result<(), String> {
        if self.seg_len == 0 || self.max_landmarks == 0 {
            return Err("seg_len and max_landmarks must be positive".into());
        }
        let first = self.segment * self.seg_len;
        let actions = check_turns(&self.turns, first)?;
        if actions.is_empty() || actions.len() > self.seg_len {
            return Err(format!("{} turns in a segment of length {}", actions.len(), self.seg_len));
        }
        for t in &self.turns {
            let want = if t.index == first { panorama_ref(t.index) } else { frame_ref(t.index) };
            if t.view != want {
                return Err(format!("turn {} has view {:?}", t.index, t.view));
            }
        }
        let ends = actions.iter().filter(|a| **a == MetaAction::End).count();
        if self.terminal {
            if self.trailing.is_some() {
                return Err("terminal segment has a trailing obs".into());
            }
            if ends != 1 || actions.last() != Some(&MetaAction::End) {
                return Err("terminal segment must close with end".into());
            }
        } else {
            if actions.len() != self.seg_len || ends != 0 {
                return Err("non-terminal segment must hold exactly seg_len non-end turns".into());
            }
            let end = first + self.seg_len;
            match &self.trailing {
                Some(t) if t.action == MetaAction::Obs.spelling() && t.index == end && t.view == frame_ref(end) => {}
                _ => return Err("non-terminal segment must close with obs".into()),
            }
        }
        if count_tokens(&self.reasoning_text) != self.reasoning_tokens {
            return Err("reasoning token count does not match text".into());
        }
        let memory = parse_memory_text(&self.memory_text).map_err(|e| e.to_string())?;
        if memory.landmarks != (self.segment + 1).min(self.max_landmarks) {
            return Err(format!("memory holds {} landmarks", memory.landmarks));
        }
        Ok(())
    }
}

impl Record for Episode {
    const SCHEMA_VERSION: u32 = EPISODE_SCHEMA_VERSION;

    fn validate(&self) -> Result<(), String> {
        if self.outcome == Outcome::Running {
            return Err("episode has no verdict".into());
        }
        for (i, s) in self.steps.iter().enumerate() {
            if let (Some(text), Some(n)) = (&s.reasoning, s.reasoning_tokens) {
                if count_tokens(text) != n {
                    return Err(format!("step {i}: reasoning token count does not match text"));
                }
            }
            if s.mode == Mode::Slow && s.reasoning_tokens.is_none() {
                return Err(format!("step {i}: slow step without reasoning tokens"));
            }
        }
        if self.steps.iter().rev().skip(1).any(|s| s.action == MetaAction::End) {
            return Err("end before the last step".into());
        }
        Ok(())
    }
}

/// One JSON document per line, `\n`-terminated.
pub fn write_jsonl<T: Record, W: Write>(mut out: W, records: &[T]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn to_jsonl<T: Record>(records: &[T]) -> String {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, records).expect("writing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

fn parse_line<T: Record>(line: &str, line_no: usize) -> Result<T, SchemaError> {
    let err = |message: String| SchemaError { line: line_no, message };
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
    match value.get("schema_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(T::SCHEMA_VERSION) => {}
        Some(v) => return Err(err(format!("unsupported schema version {v}"))),
        None => return Err(err("missing schema_version".into())),
    }
    let record: T = serde_json::from_value(value).map_err(|e| err(e.to_string()))?;
    record.validate().map_err(err)?;
    Ok(record)
}

/// Reads and validates every line; fails on the first bad one.
pub fn read_jsonl<T: Record, R: BufRead>(input: R) -> Result<Vec<T>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        out.push(parse_line(&line?, i + 1)?);
    }
    Ok(out)
}

pub fn from_jsonl<T: Record>(text: &str) -> Result<Vec<T>, SchemaError> {
    text.lines().enumerate().map(|(i, l)| parse_line(l, i + 1)).collect()
}
