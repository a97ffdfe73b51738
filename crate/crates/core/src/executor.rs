//! Execution semantics for the five-symbol action alphabet.
//!
//! `WALK` advances one tile along the current street. The three turns
//! snap to the continuation at the current tile whose bearing is closest
//! to the requested relative angle (clockwise positive: right = +90,
//! left = -90, around = 180), within a ±60° window. `END` terminates a
//! route. [`route_to_actions`] inverts execution to produce supervision.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::map::{EntityId, GridMap, MapError, TileCoord};

/// Maximum deviation, in degrees, between a turn's target angle and the
/// chosen continuation.
pub const TURN_WINDOW_DEG: f64 = 60.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Walk,
    TurnLeft,
    TurnRight,
    TurnAround,
    End,
}

impl Action {
    pub const ALL: [Action; 5] = [
        Action::Walk,
        Action::TurnLeft,
        Action::TurnRight,
        Action::TurnAround,
        Action::End,
    ];
    pub const TURNS: [Action; 3] = [Action::TurnLeft, Action::TurnRight, Action::TurnAround];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    pub fn token(self) -> &'static str {
        match self {
            Action::Walk => "WALK",
            Action::TurnLeft => "TURN_LEFT",
            Action::TurnRight => "TURN_RIGHT",
            Action::TurnAround => "TURN_AROUND",
            Action::End => "END",
        }
    }

    pub fn is_turn(self) -> bool {
        matches!(self, Action::TurnLeft | Action::TurnRight | Action::TurnAround)
    }

    /// Relative angle a turn aims for, clockwise positive.
    pub fn turn_target(self) -> Option<f64> {
        match self {
            Action::TurnLeft => Some(-90.0),
            Action::TurnRight => Some(90.0),
            Action::TurnAround => Some(180.0),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::ALL
            .into_iter()
            .find(|a| a.token() == s)
            .ok_or_else(|| format!("unknown action {s:?}"))
    }
}

/// Parses a space-separated action line such as `WALK TURN_LEFT END`.
pub fn parse_actions(line: &str) -> Result<Vec<Action>, String> {
    line.split_whitespace().map(str::parse).collect()
}

pub fn format_actions(actions: &[Action]) -> String {
    actions.iter().map(|a| a.token()).collect::<Vec<_>>().join(" ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TravelDir {
    Forward,
    Backward,
}

impl TravelDir {
    pub fn delta(self) -> i64 {
        match self {
            TravelDir::Forward => 1,
            TravelDir::Backward => -1,
        }
    }

    pub fn reversed(self) -> TravelDir {
        match self {
            TravelDir::Forward => TravelDir::Backward,
            TravelDir::Backward => TravelDir::Forward,
        }
    }
}

impl fmt::Display for TravelDir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TravelDir::Forward => "+1",
            TravelDir::Backward => "-1",
        })
    }
}

impl FromStr for TravelDir {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "+1" | "1" => Ok(TravelDir::Forward),
            "-1" => Ok(TravelDir::Backward),
            other => Err(format!("travel direction must be +1 or -1, got {other:?}")),
        }
    }
}

/// Agent state: a position on a street plus the direction of travel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pose {
    pub street: EntityId,
    pub index: usize,
    pub dir: TravelDir,
}

impl Pose {
    pub fn new(street: EntityId, index: usize, dir: TravelDir) -> Self {
        Self { street, index, dir }
    }

    pub fn tile(&self, map: &GridMap) -> Result<TileCoord, MapError> {
        let street = map.street(self.street)?;
        street.tiles.get(self.index).copied().ok_or(MapError::NoSuccessor {
            street: self.street,
            index: self.index,
            dir: self.dir,
        })
    }

    /// The direction the agent faces: the bearing to the next tile, or at
    /// a street end, the bearing it arrived with.
    pub fn heading(&self, map: &GridMap) -> Result<f64, MapError> {
        match map.bearing(self.street, self.index, self.dir) {
            Ok(b) => Ok(b),
            Err(MapError::NoSuccessor { .. }) => {
                let back = map.street(self.street)?.successor(self.index, self.dir.reversed());
                match back {
                    Some(prev) => map.bearing(self.street, prev, self.dir),
                    None => Err(MapError::NoSuccessor {
                        street: self.street,
                        index: self.index,
                        dir: self.dir,
                    }),
                }
            }
            Err(e) => Err(e),
        }
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.street, self.index, self.dir)
    }
}

impl FromStr for Pose {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [street, index, dir] = parts.as_slice() else {
            return Err(format!("expected street:index:dir, got {s:?}"));
        };
        Ok(Pose {
            street: EntityId(street.parse().map_err(|_| format!("bad street id in {s:?}"))?),
            index: index.parse().map_err(|_| format!("bad index in {s:?}"))?,
            dir: dir.parse()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub tiles: Vec<TileCoord>,
    pub final_pose: Pose,
}

impl Route {
    pub fn start(&self) -> TileCoord {
        self.tiles[0]
    }

    pub fn end(&self) -> TileCoord {
        *self.tiles.last().unwrap()
    }

    /// Appends `next`, which must start where `self` ends.
    pub fn chain(&mut self, next: &Route) {
        debug_assert_eq!(self.end(), next.start());
        self.tiles.extend_from_slice(&next.tiles[1..]);
        self.final_pose = next.final_pose;
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum StepError {
    #[error("cannot walk past the end of street {street} at index {index}")]
    InvalidWalk { street: EntityId, index: usize },
    #[error("no continuation within the turn window for {action} at {tile}")]
    InvalidTurn { action: Action, tile: TileCoord },
    #[error("END does not move the agent")]
    EndIsTerminal,
    #[error("invalid pose: {0}")]
    InvalidPose(String),
}

impl From<MapError> for StepError {
    fn from(e: MapError) -> Self {
        StepError::InvalidPose(e.to_string())
    }
}

/// One candidate continuation examined by a turn.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TurnCandidate {
    pub pose: Pose,
    /// Signed angle from the current heading, in `(-180, 180]`.
    pub relative: f64,
    /// Angular distance from the turn's target.
    pub miss: f64,
}

/// Normalizes an angle to `(-180, 180]`.
pub fn signed_angle(deg: f64) -> f64 {
    let mut a = deg % 360.0;
    if a <= -180.0 {
        a += 360.0;
    } else if a > 180.0 {
        a -= 360.0;
    }
    a
}

/// Angular distance on the circle, in `[0, 180]`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    signed_angle(a - b).abs()
}

// quantized so equal geometry compares equal regardless of rounding path
fn quantize(x: f64) -> i64 {
    (x * 1e6).round() as i64
}

/// All continuations a turn may snap to at the pose's tile, in selection
/// order (best first). Candidates outside the window are included; callers
/// filter on `miss`.
pub fn turn_candidates(map: &GridMap, pose: &Pose, action: Action) -> Result<Vec<TurnCandidate>, StepError> {
    let target = action
        .turn_target()
        .ok_or_else(|| StepError::InvalidPose(format!("{action} is not a turn")))?;
    let heading = pose.heading(map)?;
    let tile = pose.tile(map)?;
    let mut out = Vec::new();
    for (street, index) in map.streets_through(tile)? {
        for dir in [TravelDir::Forward, TravelDir::Backward] {
            let Ok(b) = map.bearing(street, index, dir) else {
                continue;
            };
            let relative = signed_angle(b - heading);
            out.push(TurnCandidate {
                pose: Pose { street, index, dir },
                relative,
                miss: angular_distance(relative, target),
            });
        }
    }
    out.sort_by_key(|c| {
        (
            quantize(c.miss),
            quantize(c.relative.abs()),
            c.pose.street,
            c.pose.dir != TravelDir::Forward,
            c.pose.index,
        )
    });
    Ok(out)
}

fn turn(map: &GridMap, pose: &Pose, action: Action) -> Result<(Pose, f64), StepError> {
    let tile = pose.tile(map)?;
    turn_candidates(map, pose, action)?
        .into_iter()
        .next()
        .filter(|c| quantize(c.miss) <= quantize(TURN_WINDOW_DEG))
        .map(|c| (c.pose, c.miss))
        .ok_or(StepError::InvalidTurn { action, tile })
}

/// Applies one non-`END` action.
pub fn step(map: &GridMap, pose: &Pose, action: Action) -> Result<Pose, StepError> {
    match action {
        Action::Walk => {
            let street = map.street(pose.street)?;
            if pose.index >= street.len() {
                return Err(StepError::InvalidPose(format!("index {} out of range", pose.index)));
            }
            street
                .successor(pose.index, pose.dir)
                .map(|index| Pose { index, ..*pose })
                .ok_or(StepError::InvalidWalk {
                    street: pose.street,
                    index: pose.index,
                })
        }
        Action::End => Err(StepError::EndIsTerminal),
        turn_action => turn(map, pose, turn_action).map(|(p, _)| p),
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ExecError {
    #[error("action {position}: {source}")]
    Step {
        position: usize,
        #[source]
        source: StepError,
    },
    #[error("action string must end with a single END")]
    Malformed,
}

/// A failed execution, with the route walked before the failure.
#[derive(Clone, Debug, PartialEq, Error)]
#[error("{error}")]
pub struct ExecFailure {
    pub error: ExecError,
    pub partial: Route,
}

/// Folds [`step`] over `actions`. TURNs do not add tiles to the route.
pub fn execute(map: &GridMap, p0: &Pose, actions: &[Action]) -> Result<Route, Box<ExecFailure>> {
    let start = p0.tile(map).map_err(|e| {
        Box::new(ExecFailure {
            error: ExecError::Step {
                position: 0,
                source: e.into(),
            },
            partial: Route {
                tiles: Vec::new(),
                final_pose: *p0,
            },
        })
    })?;
    let mut route = Route {
        tiles: vec![start],
        final_pose: *p0,
    };
    let well_formed =
        actions.last() == Some(&Action::End) && actions[..actions.len() - 1].iter().all(|a| *a != Action::End);
    for (position, &action) in actions.iter().enumerate() {
        if action == Action::End {
            break;
        }
        match step(map, &route.final_pose, action) {
            Ok(next) => {
                if action == Action::Walk {
                    route.tiles.push(map.street(next.street).unwrap().tiles[next.index]);
                }
                route.final_pose = next;
            }
            Err(source) => {
                return Err(Box::new(ExecFailure {
                    error: ExecError::Step { position, source },
                    partial: route,
                }))
            }
        }
    }
    if !well_formed {
        return Err(Box::new(ExecFailure {
            error: ExecError::Malformed,
            partial: route,
        }));
    }
    Ok(route)
}

/// Executes and keeps whatever route was walked, even on failure.
pub fn execute_lenient(map: &GridMap, p0: &Pose, actions: &[Action]) -> Route {
    match execute(map, p0, actions) {
        Ok(r) => r,
        Err(f) => f.partial,
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum RouteError {
    #[error("route does not start at the pose tile")]
    StartMismatch,
    #[error("route tile {index} cannot be reached with one TURN and a WALK")]
    UnreachableStep { index: usize },
    #[error("final pose cannot be reached with one TURN")]
    UnreachableFinalPose,
    #[error(transparent)]
    Step(#[from] StepError),
}

/// Minimal action string reproducing `route` from `p0`.
pub fn route_to_actions(map: &GridMap, p0: &Pose, route: &Route) -> Result<Vec<Action>, RouteError> {
    if route.tiles.first() != Some(&p0.tile(map).map_err(StepError::from)?) {
        return Err(RouteError::StartMismatch);
    }
    let mut pose = *p0;
    let mut actions = Vec::new();
    for (i, &next) in route.tiles.iter().enumerate().skip(1) {
        let here = pose.tile(map).map_err(StepError::from)?;
        if next == here {
            continue;
        }
        if let Ok(p) = step(map, &pose, Action::Walk) {
            if p.tile(map).map_err(StepError::from)? == next {
                actions.push(Action::Walk);
                pose = p;
                continue;
            }
        }
        let mut best: Option<(i64, Action, Pose)> = None;
        for kind in Action::TURNS {
            let Ok((turned, miss)) = turn(map, &pose, kind) else {
                continue;
            };
            let Ok(walked) = step(map, &turned, Action::Walk) else {
                continue;
            };
            if walked.tile(map).map_err(StepError::from)? == next && best.is_none_or(|(m, _, _)| quantize(miss) < m) {
                best = Some((quantize(miss), kind, walked));
            }
        }
        let (_, kind, walked) = best.ok_or(RouteError::UnreachableStep { index: i })?;
        actions.push(kind);
        actions.push(Action::Walk);
        pose = walked;
    }
    if pose != route.final_pose {
        let want = route.final_pose.heading(map).map_err(StepError::from)?;
        let have = pose.heading(map).map_err(StepError::from)?;
        if quantize(angular_distance(want, have)) != 0 {
            let mut best: Option<(u8, i64, Action)> = None;
            for kind in Action::TURNS {
                let Ok((turned, miss)) = turn(map, &pose, kind) else {
                    continue;
                };
                let exact = if turned == route.final_pose {
                    0
                } else if quantize(angular_distance(turned.heading(map).map_err(StepError::from)?, want)) == 0 {
                    1
                } else {
                    continue;
                };
                if best.is_none_or(|(e, m, _)| (exact, quantize(miss)) < (e, m)) {
                    best = Some((exact, quantize(miss), kind));
                }
            }
            let (_, _, kind) = best.ok_or(RouteError::UnreachableFinalPose)?;
            actions.push(kind);
        }
    }
    actions.push(Action::End);
    Ok(actions)
}
