//! Landmark memory: panoramic scans joined by the actions executed between
//! them, pruned to a fixed capacity by evenly spaced sampling.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{MetaAction, PanoramicScan, Pose};

pub const DEFAULT_MAX_LANDMARKS: usize = 10;

const IMAGE: &str = "<image>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub id: usize,
    pub scan: PanoramicScan,
    pub pose: Pose,
    pub step_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ActionEdge {
    pub actions: Vec<MetaAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryGraph {
    landmarks: Vec<Landmark>,
    edges: Vec<ActionEdge>,
    max_landmarks: usize,
}

impl Default for MemoryGraph {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_LANDMARKS)
    }
}

/// Indices kept when `n` landmarks are sampled down to `capacity`:
/// `round(i·(n−1)/(capacity−1))` for `i = 0..capacity`, ascending and
/// deduplicated. Halves round up.
pub fn kept_indices(n: usize, capacity: usize) -> Vec<usize> {
    if n <= capacity {
        return (0..n).collect();
    }
    if capacity == 1 {
        return vec![n - 1];
    }
    let mut out: Vec<usize> = (0..capacity)
        .map(|i| {
            let num = i * (n - 1);
            let den = capacity - 1;
            (2 * num + den) / (2 * den)
        })
        .collect();
    out.dedup();
    out
}

impl MemoryGraph {
    pub fn new(max_landmarks: usize) -> Self {
        assert!(max_landmarks >= 1, "memory capacity must be positive");
        Self { landmarks: Vec::new(), edges: Vec::new(), max_landmarks }
    }

    pub fn landmarks(&self) -> &[Landmark] {
        &self.landmarks
    }

    pub fn edges(&self) -> &[ActionEdge] {
        &self.edges
    }

    pub fn max_landmarks(&self) -> usize {
        self.max_landmarks
    }

    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    pub fn action_count(&self) -> usize {
        self.edges.iter().map(|e| e.actions.len()).sum()
    }

    /// Adds a landmark joined to the previous one by `actions_since_last`,
    /// then prunes if over capacity.
    pub fn append_landmark(
        &mut self,
        scan: PanoramicScan,
        pose: Pose,
        step_index: usize,
        actions_since_last: Vec<MetaAction>,
    ) {
        debug_assert!(actions_since_last.iter().all(|a| a.is_locomotion()));
        if !self.landmarks.is_empty() {
            self.edges.push(ActionEdge { actions: actions_since_last });
        }
        let id = self.landmarks.last().map_or(0, |l| l.id + 1);
        self.landmarks.push(Landmark { id, scan, pose, step_index });
        if self.landmarks.len() > self.max_landmarks {
            *self = self.prune();
        }
    }

    /// Evenly spaced subsample keeping the first and last landmarks. Edges
    /// between retained landmarks concatenate the dropped ones in order.
    pub fn prune(&self) -> Self {
        let keep = kept_indices(self.landmarks.len(), self.max_landmarks);
        let landmarks = keep.iter().map(|&i| self.landmarks[i].clone()).collect();
        let edges = keep
            .windows(2)
            .map(|w| ActionEdge { actions: self.edges[w[0]..w[1]].iter().flat_map(|e| e.actions.iter().copied()).collect() })
            .collect();
        Self { landmarks, edges, max_landmarks: self.max_landmarks }
    }

    /// Text rendering with landmarks numbered from 1 and one `<image>` per
    /// panoramic view, ending with the current view.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, lm) in self.landmarks.iter().enumerate() {
            out.push_str(&format!("At landmark{}, you see {}; ", k + 1, IMAGE.repeat(lm.scan.views.len())));
            if let Some(edge) = self.edges.get(k) {
                out.push_str(&render_edge(&edge.actions, k + 1));
            }
        }
        out.push_str("Your current view is <image>.");
        out
    }
}

fn render_edge(actions: &[MetaAction], from: usize) -> String {
    let list = if actions.is_empty() {
        "no action".to_string()
    } else {
        actions.iter().map(|a| a.spelling()).collect::<Vec<_>>().join(", ")
    };
    format!("Executed {list} from landmark {from} to landmark {}; ", from + 1)
}

#[derive(Debug, Error, PartialEq)]
#[error("malformed memory text at byte {offset}: {message}")]
pub struct MemoryParseError {
    pub offset: usize,
    pub message: String,
}

/// Landmark count and edge action lists recovered from [`MemoryGraph::to_text`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedMemory {
    pub landmarks: usize,
    pub edges: Vec<Vec<MetaAction>>,
}

pub fn parse_memory_text(text: &str) -> Result<ParsedMemory, MemoryParseError> {
    let err = |offset: usize, message: &str| MemoryParseError { offset, message: message.to_string() };
    let body = text
        .strip_suffix("Your current view is <image>.")
        .ok_or_else(|| err(text.len(), "missing current view"))?;
    let mut parsed = ParsedMemory { landmarks: 0, edges: Vec::new() };
    let mut offset = 0;
    for clause in body.split_terminator("; ") {
        let at = offset;
        offset += clause.len() + 2;
        if let Some(rest) = clause.strip_prefix("At landmark") {
            let (num, images) = rest.split_once(", you see ").ok_or_else(|| err(at, "bad landmark clause"))?;
            if num.parse::<usize>().ok() != Some(parsed.landmarks + 1) {
                return Err(err(at, "landmarks out of order"));
            }
            if images.is_empty() || images.replace(IMAGE, "").len() != 0 {
                return Err(err(at, "bad image list"));
            }
            parsed.landmarks += 1;
        } else if let Some(rest) = clause.strip_prefix("Executed ") {
            let expect = format!(" from landmark {} to landmark {}", parsed.landmarks, parsed.landmarks + 1);
            let list = rest.strip_suffix(expect.as_str()).ok_or_else(|| err(at, "edge endpoints out of order"))?;
            let actions = if list == "no action" {
                Vec::new()
            } else {
                list.split(", ").map(|s| s.parse::<MetaAction>().map_err(|e| err(at, &e))).collect::<Result<_, _>>()?
            };
            parsed.edges.push(actions);
        } else {
            return Err(err(at, "unknown clause"));
        }
    }
    if !body.is_empty() && !body.ends_with("; ") {
        return Err(err(body.len(), "missing clause separator"));
    }
    if parsed.edges.len() != parsed.landmarks.saturating_sub(1) {
        return Err(err(body.len(), "edge count does not match landmark count"));
    }
    Ok(parsed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kept_indices_by_hand() {
        assert_eq!(kept_indices(12, 10), vec![0, 1, 2, 4, 5, 6, 7, 9, 10, 11]);
        assert_eq!(kept_indices(10, 10), (0..10).collect::<Vec<_>>());
        assert_eq!(kept_indices(3, 2), vec![0, 2]);
        assert_eq!(kept_indices(11, 10), vec![0, 1, 2, 3, 4, 6, 7, 8, 9, 10]);
    }

    #[test]
    fn parser_rejects_garbage() {
        assert!(parse_memory_text("hello").is_err());
        assert!(parse_memory_text("At landmark2, you see <image>; Your current view is <image>.").is_err());
        assert_eq!(
            parse_memory_text("Your current view is <image>.").unwrap(),
            ParsedMemory { landmarks: 0, edges: vec![] }
        );
    }
}
