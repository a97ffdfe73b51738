//! Independent reference implementations and random fixtures shared by
//! the property tests and the acceptance suite.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use urbanav_core::abstraction::{normalize_token, Lexicon};
use urbanav_core::executor::{Action, Pose, Route, TravelDir};
use urbanav_core::map::{Entity, EntityId, EntityType, GridMap, Street, TileCoord};

/// Compass bearing from tile `a` to tile `b` on square tiles, degrees in
/// `[0, 360)`, 0 = north (row decreasing), 90 = east.
pub fn naive_bearing(a: TileCoord, b: TileCoord) -> f64 {
    let dx = b.col as f64 - a.col as f64;
    let dy = a.row as f64 - b.row as f64;
    let deg = dx.atan2(dy).to_degrees();
    if deg < 0.0 {
        deg + 360.0
    } else {
        deg
    }
}

fn wrap(mut a: f64) -> f64 {
    while a > 180.0 {
        a -= 360.0;
    }
    while a <= -180.0 {
        a += 360.0;
    }
    a
}

fn find_street(map: &GridMap, id: EntityId) -> Option<&Street> {
    map.streets().iter().find(|s| s.id == id)
}

fn offset(i: usize, dir: TravelDir, len: usize) -> Option<usize> {
    let j = match dir {
        TravelDir::Forward => i as i64 + 1,
        TravelDir::Backward => i as i64 - 1,
    };
    (j >= 0 && (j as usize) < len).then_some(j as usize)
}

pub fn naive_heading(map: &GridMap, p: &Pose) -> Option<f64> {
    let s = find_street(map, p.street)?;
    let here = *s.tiles.get(p.index)?;
    if let Some(n) = offset(p.index, p.dir, s.tiles.len()) {
        return Some(naive_bearing(here, s.tiles[n]));
    }
    let prev = offset(p.index, p.dir.reversed(), s.tiles.len())?;
    Some(naive_bearing(s.tiles[prev], here))
}

/// Straight-line reading of the action semantics.
pub fn naive_step(map: &GridMap, p: &Pose, a: Action) -> Option<Pose> {
    let s = find_street(map, p.street)?;
    let here = *s.tiles.get(p.index)?;
    let target = match a {
        Action::Walk => {
            let n = offset(p.index, p.dir, s.tiles.len())?;
            return Some(Pose::new(p.street, n, p.dir));
        }
        Action::End => return None,
        Action::TurnLeft => -90.0,
        Action::TurnRight => 90.0,
        Action::TurnAround => 180.0,
    };
    let heading = naive_heading(map, p)?;
    let q = |x: f64| (x * 1e6).round() as i64;
    type Rank = (i64, i64, u32, u8, usize);
    let mut best: Option<(Rank, Pose)> = None;
    for st in map.streets() {
        for (i, t) in st.tiles.iter().enumerate() {
            if *t != here {
                continue;
            }
            for (rank, dir) in [(0u8, TravelDir::Forward), (1u8, TravelDir::Backward)] {
                let Some(n) = offset(i, dir, st.tiles.len()) else {
                    continue;
                };
                let rel = wrap(naive_bearing(here, st.tiles[n]) - heading);
                let d = (rel - target).abs();
                let miss = d.min(360.0 - d);
                if q(miss) > q(60.0) {
                    continue;
                }
                let key = (q(miss), q(rel.abs()), st.id.0, rank, i);
                if best.as_ref().is_none_or(|(k, _)| key < *k) {
                    best = Some((key, Pose::new(st.id, i, dir)));
                }
            }
        }
    }
    best.map(|(_, p)| p)
}

/// Returns the route, or the position of the first failing action.
pub fn naive_execute(map: &GridMap, p0: &Pose, actions: &[Action]) -> Result<Route, usize> {
    let s = find_street(map, p0.street).ok_or(0usize)?;
    let start = *s.tiles.get(p0.index).ok_or(0usize)?;
    let mut tiles = vec![start];
    let mut pose = *p0;
    let ends = actions.iter().filter(|a| **a == Action::End).count();
    for (i, &a) in actions.iter().enumerate() {
        if a == Action::End {
            break;
        }
        pose = naive_step(map, &pose, a).ok_or(i)?;
        if a == Action::Walk {
            tiles.push(find_street(map, pose.street).unwrap().tiles[pose.index]);
        }
    }
    if ends != 1 || actions.last() != Some(&Action::End) {
        return Err(actions.len());
    }
    Ok(Route {
        tiles,
        final_pose: pose,
    })
}

/// Every entity or street with a footprint tile within Chebyshev `radius`.
pub fn naive_entities_at(map: &GridMap, c: TileCoord, radius: u32) -> Vec<EntityId> {
    let near = |t: &TileCoord| t.col.abs_diff(c.col).max(t.row.abs_diff(c.row)) <= radius;
    let mut out: Vec<EntityId> = map
        .entities()
        .iter()
        .filter(|e| e.footprint.iter().any(near))
        .map(|e| e.id)
        .chain(map.streets().iter().filter(|s| s.tiles.iter().any(near)).map(|s| s.id))
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Brute-force greedy leftmost-longest segmentation: every entry is tried
/// at every position without any index.
pub fn naive_segment(tokens: &[String], lexicon: &Lexicon) -> Vec<(usize, usize, EntityId)> {
    let norm: Vec<String> = tokens.iter().map(|t| normalize_token(t)).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let mut best: Option<(usize, usize, std::cmp::Reverse<EntityId>)> = None;
        for e in lexicon.entries() {
            let n = e.normalized.len();
            if i + n > tokens.len() || norm[i..i + n] != e.normalized[..] {
                continue;
            }
            let exact = (0..n).filter(|k| tokens[i + k] == e.tokens[*k]).count();
            let key = (n, exact, std::cmp::Reverse(e.entity));
            if best.as_ref().is_none_or(|b| key > *b) {
                best = Some(key);
            }
        }
        match best {
            Some((n, _, std::cmp::Reverse(id))) => {
                out.push((i, i + n, id));
                i += n;
            }
            None => i += 1,
        }
    }
    out
}

/// A random map with irregular 8-connected streets (which may cross and
/// run alongside each other) and a few entities.
pub fn random_map(rng: &mut ChaCha8Rng) -> GridMap {
    let w = rng.gen_range(4..12u32);
    let h = rng.gen_range(4..12u32);
    let mut streets = Vec::new();
    let n_streets = rng.gen_range(1..6u32);
    for id in 1..=n_streets {
        let len = rng.gen_range(2..14);
        let mut t = TileCoord::new(rng.gen_range(0..w), rng.gen_range(0..h));
        let mut tiles = vec![t];
        let mut heading = (rng.gen_range(-1..=1i64), rng.gen_range(-1..=1i64));
        while tiles.len() < len {
            if heading == (0, 0) || rng.gen_bool(0.3) {
                heading = (rng.gen_range(-1..=1), rng.gen_range(-1..=1));
                if heading == (0, 0) {
                    continue;
                }
            }
            let c = t.col as i64 + heading.0;
            let r = t.row as i64 + heading.1;
            if c < 0 || r < 0 || c >= w as i64 || r >= h as i64 {
                heading = (0, 0);
                continue;
            }
            t = TileCoord::new(c as u32, r as u32);
            tiles.push(t);
        }
        streets.push(Street {
            id: EntityId(id),
            name: Some(format!("S{id} Street")),
            tiles,
        });
    }
    let mut entities = Vec::new();
    for k in 0..rng.gen_range(0..6u32) {
        let n = rng.gen_range(1..4);
        let mut footprint: Vec<TileCoord> = (0..n)
            .map(|_| TileCoord::new(rng.gen_range(0..w), rng.gen_range(0..h)))
            .collect();
        footprint.sort();
        footprint.dedup();
        entities.push(Entity {
            id: EntityId(100 + k),
            name: Some(format!("Place {k}")),
            entity_type: *EntityType::ALL.choose(rng).unwrap(),
            is_building: rng.gen_bool(0.5),
            house_number: None,
            footprint,
        });
    }
    GridMap::new("random", w, h, entities, streets).expect("random map is valid")
}

pub fn random_pose(map: &GridMap, rng: &mut ChaCha8Rng) -> Pose {
    let s = map.streets().choose(rng).unwrap();
    let dir = if rng.gen_bool(0.5) {
        TravelDir::Forward
    } else {
        TravelDir::Backward
    };
    Pose::new(s.id, rng.gen_range(0..s.len()), dir)
}

pub fn random_action(rng: &mut ChaCha8Rng) -> Action {
    *Action::ALL.choose(rng).unwrap()
}

/// A random executable route made of segments "optional turn, then WALKs",
/// with at most one trailing turn.
pub fn random_route(map: &GridMap, p0: &Pose, rng: &mut ChaCha8Rng) -> (Vec<Action>, Route) {
    let mut pose = *p0;
    let mut actions = Vec::new();
    for _ in 0..rng.gen_range(0..5) {
        if rng.gen_bool(0.5) {
            let turn = *Action::TURNS.choose(rng).unwrap();
            if let Some(p) = naive_step(map, &pose, turn) {
                if naive_step(map, &p, Action::Walk).is_some() {
                    actions.push(turn);
                    pose = p;
                }
            }
        }
        for _ in 0..rng.gen_range(1..8) {
            match naive_step(map, &pose, Action::Walk) {
                Some(p) => {
                    actions.push(Action::Walk);
                    pose = p;
                }
                None => break,
            }
        }
    }
    if rng.gen_bool(0.3) {
        let turn = *Action::TURNS.choose(rng).unwrap();
        if naive_step(map, &pose, turn).is_some() {
            actions.push(turn);
        }
    }
    actions.push(Action::End);
    let route = naive_execute(map, p0, &actions).expect("constructed route executes");
    (actions, route)
}

/// A random tile path on a single row, used for predicate fixtures.
pub fn random_tiles(rng: &mut ChaCha8Rng, len: usize, width: u32) -> Vec<TileCoord> {
    (0..len).map(|_| TileCoord::new(rng.gen_range(0..width), 0)).collect()
}
