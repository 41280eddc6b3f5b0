use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::map::GridMap;
use crate::Point;

/// Forward translation of one `MoveAhead`, meters.
pub const MOVE_DISTANCE: f64 = 0.25;
/// Rotation of one `RotateLeft`/`RotateRight`, degrees.
pub const ROTATE_DEGREES: u16 = 30;

const COS30: f64 = 0.866_025_403_784_438_6;

// Unit vectors for the twelve headings; exact where the trig value is exact.
const UNIT: [(f64, f64); 12] = [
    (1.0, 0.0),
    (COS30, 0.5),
    (0.5, COS30),
    (0.0, 1.0),
    (-0.5, COS30),
    (-COS30, 0.5),
    (-1.0, 0.0),
    (-COS30, -0.5),
    (-0.5, -COS30),
    (0.0, -1.0),
    (0.5, -COS30),
    (COS30, -0.5),
];

/// Heading in degrees: a multiple of 30 in `[0, 330]`, counterclockwise
/// from the +x axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub struct Heading(u16);

impl Heading {
    pub const EAST: Heading = Heading(0);
    pub const NORTH: Heading = Heading(90);
    pub const WEST: Heading = Heading(180);
    pub const SOUTH: Heading = Heading(270);

    pub fn new(degrees: u16) -> Option<Self> {
        (degrees < 360 && degrees % ROTATE_DEGREES == 0).then_some(Self(degrees))
    }

    /// Nearest heading to an arbitrary bearing; exact half-way ties round
    /// counterclockwise.
    pub fn nearest(bearing_deg: f64) -> Self {
        let b = bearing_deg.rem_euclid(360.0);
        let k = ((b / 30.0) + 0.5).floor() as u16 % 12;
        Self(k * ROTATE_DEGREES)
    }

    pub fn degrees(self) -> u16 {
        self.0
    }

    pub fn step_index(self) -> usize {
        (self.0 / ROTATE_DEGREES) as usize
    }

    pub fn left(self) -> Self {
        Self((self.0 + ROTATE_DEGREES) % 360)
    }

    pub fn right(self) -> Self {
        Self((self.0 + 360 - ROTATE_DEGREES) % 360)
    }

    pub fn unit(self) -> (f64, f64) {
        UNIT[self.step_index()]
    }

    /// Signed smallest rotation from `self` to `other` in 30° steps,
    /// positive counterclockwise. A half turn resolves to `+6` (left).
    pub fn turns_to(self, other: Heading) -> i32 {
        let diff = (other.step_index() as i32 - self.step_index() as i32).rem_euclid(12);
        if diff <= 6 {
            diff
        } else {
            diff - 12
        }
    }

    /// Absolute angular offset from a bearing, in degrees within `[0, 180]`.
    pub fn offset_from(self, bearing_deg: f64) -> f64 {
        let d = (bearing_deg - self.0 as f64).rem_euclid(360.0);
        d.min(360.0 - d)
    }
}

impl TryFrom<u16> for Heading {
    type Error = String;
    fn try_from(v: u16) -> Result<Self, Self::Error> {
        Heading::new(v).ok_or_else(|| format!("heading {v} is not a multiple of 30 in [0, 330]"))
    }
}

impl From<Heading> for u16 {
    fn from(h: Heading) -> u16 {
        h.0
    }
}

/// Agent pose: continuous position, quantized heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: Heading,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: Heading) -> Self {
        Self { x, y, heading }
    }

    pub fn at(p: Point, heading: Heading) -> Self {
        Self::new(p.x, p.y, heading)
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// The agent's discrete action vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetaAction {
    MoveAhead,
    RotateLeft,
    RotateRight,
    /// Transition token: panoramic scan and a switch to the slow system.
    Obs,
    End,
}

impl MetaAction {
    pub const MOTOR: [MetaAction; 3] = [MetaAction::MoveAhead, MetaAction::RotateLeft, MetaAction::RotateRight];

    pub fn is_locomotion(self) -> bool {
        matches!(self, MetaAction::MoveAhead | MetaAction::RotateLeft | MetaAction::RotateRight)
    }

    /// Conversation spelling: `MoveAhead 0.25`, `RotateLeft 30.0`,
    /// `RotateRight 30.0`, `obs`, `end`.
    pub fn spelling(self) -> &'static str {
        match self {
            MetaAction::MoveAhead => "MoveAhead 0.25",
            MetaAction::RotateLeft => "RotateLeft 30.0",
            MetaAction::RotateRight => "RotateRight 30.0",
            MetaAction::Obs => "obs",
            MetaAction::End => "end",
        }
    }
}

impl fmt::Display for MetaAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.spelling())
    }
}

impl FromStr for MetaAction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "MoveAhead 0.25" | "MoveAhead" => Ok(MetaAction::MoveAhead),
            "RotateLeft 30.0" | "RotateLeft" => Ok(MetaAction::RotateLeft),
            "RotateRight 30.0" | "RotateRight" => Ok(MetaAction::RotateRight),
            "obs" | "Obs" => Ok(MetaAction::Obs),
            "end" | "End" => Ok(MetaAction::End),
            other => Err(format!("unknown action {other:?}")),
        }
    }
}

/// Which stagnation condition fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StagnationKind {
    Repetitive,
    NoProgress,
}

/// Things that happened during a step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Event {
    Collision,
    ObsRequested,
    Terminated,
    /// The 35-step cap replaced the policy's action with `Obs`.
    ForcedObs,
    /// A stagnation detector replaced the policy's action with `Obs`.
    Stagnation { kind: StagnationKind, witness: usize },
    /// This `Obs` was spliced in by trajectory repair.
    RepairObs,
    /// Step belongs to an A* corrective leg appended by repair.
    Spliced,
}

/// Applies one action. Pure: blocked motion becomes a `Collision` event.
pub fn step(map: &GridMap, pose: &Pose, action: MetaAction) -> (Pose, Vec<Event>) {
    match action {
        MetaAction::RotateLeft => (Pose { heading: pose.heading.left(), ..*pose }, Vec::new()),
        MetaAction::RotateRight => (Pose { heading: pose.heading.right(), ..*pose }, Vec::new()),
        MetaAction::Obs => (*pose, vec![Event::ObsRequested]),
        MetaAction::End => (*pose, vec![Event::Terminated]),
        MetaAction::MoveAhead => {
            let (ux, uy) = pose.heading.unit();
            let target = Point::new(pose.x + MOVE_DISTANCE * ux, pose.y + MOVE_DISTANCE * uy);
            if sweep_is_free(map, &pose.position(), &target) {
                (Pose { x: target.x, y: target.y, heading: pose.heading }, Vec::new())
            } else {
                (*pose, vec![Event::Collision])
            }
        }
    }
}

/// Samples the segment at no more than a quarter cell apart, endpoints
/// included.
pub fn sweep_is_free(map: &GridMap, from: &Point, to: &Point) -> bool {
    let len = from.distance(to);
    let spacing = map.resolution() / 4.0;
    let n = ((len / spacing).ceil() as usize).max(1);
    (0..=n).all(|i| {
        let t = i as f64 / n as f64;
        map.is_free_point(&Point::new(from.x + t * (to.x - from.x), from.y + t * (to.y - from.y)))
    })
}
