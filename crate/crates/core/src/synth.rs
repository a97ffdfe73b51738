//! Seeded synthetic maps and navigation corpora.
//!
//! Maps are grids of vertical avenues, horizontal streets and one diagonal
//! boulevard, with named points of interest beside the streets and
//! traffic signals at some crossings. Every map draws names from its own
//! pool, so a map held out for testing only mentions names never seen in
//! the others. Paragraphs are random walks over sentence templates; gold
//! actions always come from [`route_to_actions`].

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{abstract_text, tokenize, Lexicon};
use crate::corpus::{Corpus, Instruction, MapSet, Paragraph};
use crate::executor::{route_to_actions, signed_angle, step, Action, Pose, Route, TravelDir};
use crate::map::{compass_bearing, Entity, EntityId, EntityType, GridMap, MapError, Street, TileCoord};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("infeasible spec: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("generated instruction failed validation: {0}")]
    Internal(String),
}

/// Paragraph and instruction counts of one map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapCounts {
    pub paragraphs: usize,
    pub instructions: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub width: u32,
    pub height: u32,
    pub avenues: usize,
    pub cross_streets: usize,
    pub diagonal: bool,
    pub pois_per_map: usize,
    /// Fraction of crossings with a traffic signal.
    pub signal_rate: f64,
    /// Fraction of POI names carrying a direction word.
    pub distractor_rate: f64,
    pub min_walk: usize,
    pub max_walk: usize,
    /// One entry per map.
    pub counts: Vec<MapCounts>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            width: 40,
            height: 40,
            avenues: 5,
            cross_streets: 5,
            diagonal: true,
            pois_per_map: 40,
            signal_rate: 0.4,
            distractor_rate: 0.5,
            min_walk: 1,
            max_walk: 15,
            counts: vec![
                MapCounts {
                    paragraphs: 33,
                    instructions: 200,
                };
                3
            ],
            seed: 7,
        }
    }
}

impl SynthSpec {
    /// Paragraph and instruction counts of the three original maps.
    pub fn run_scale(seed: u64) -> SynthSpec {
        let counts = [(159, 874), (128, 884), (102, 757)]
            .into_iter()
            .map(|(paragraphs, instructions)| MapCounts {
                paragraphs,
                instructions,
            })
            .collect();
        SynthSpec {
            width: 64,
            height: 64,
            avenues: 8,
            cross_streets: 8,
            pois_per_map: 120,
            counts,
            seed,
            ..SynthSpec::default()
        }
    }

    /// A tiny spec for smoke tests.
    pub fn tiny(seed: u64) -> SynthSpec {
        SynthSpec {
            width: 24,
            height: 24,
            avenues: 3,
            cross_streets: 3,
            pois_per_map: 12,
            counts: vec![
                MapCounts {
                    paragraphs: 4,
                    instructions: 12,
                };
                3
            ],
            seed,
            ..SynthSpec::default()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Infeasible(m.to_string()));
        if self.counts.is_empty() {
            return bad("no maps requested");
        }
        if self.avenues + self.cross_streets == 0 {
            return bad("no streets");
        }
        if self.min_walk == 0 || self.min_walk > self.max_walk {
            return bad("need 1 <= min_walk <= max_walk");
        }
        if !(0.0..=1.0).contains(&self.signal_rate) || !(0.0..=1.0).contains(&self.distractor_rate) {
            return bad("rates must lie in [0, 1]");
        }
        let min_side = 2 * (self.avenues.max(self.cross_streets) as u32) + 3;
        if self.width < min_side || self.height < min_side {
            return bad("grid too small for the requested streets");
        }
        for c in &self.counts {
            if c.instructions < c.paragraphs {
                return bad("fewer instructions than paragraphs");
            }
        }
        Ok(())
    }
}

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ven", "dor", "sa", "ri", "tel", "bru", "no", "fa", "zen", "qui", "pa", "mor", "lin", "ta",
    "gre", "vo", "shi", "ber", "cal", "du", "el", "fin", "gar", "hol", "jun", "kir", "mas",
];

const DISTRACTORS: &[&str] = &["Left", "Right", "Around", "Turn", "Walk", "End"];

const STREET_SUFFIXES: &[&str] = &["Street", "Avenue", "Road", "Lane", "Boulevard"];

const POI_TYPES: &[(EntityType, &str)] = &[
    (EntityType::Restaurant, "Grill"),
    (EntityType::Cafe, "Cafe"),
    (EntityType::Bar, "Pub"),
    (EntityType::Shop, "Store"),
    (EntityType::Supermarket, "Market"),
    (EntityType::Bank, "Bank"),
    (EntityType::Pharmacy, "Pharmacy"),
    (EntityType::Hotel, "Hotel"),
    (EntityType::PlaceOfWorship, "Church"),
    (EntityType::School, "School"),
    (EntityType::Hospital, "Hospital"),
    (EntityType::Park, "Park"),
    (EntityType::Library, "Library"),
    (EntityType::Theatre, "Theatre"),
    (EntityType::Cinema, "Cinema"),
    (EntityType::PostOffice, "Post Office"),
    (EntityType::Fuel, "Gas"),
];

/// Generates unique pseudo-word stems shared across all maps, so the
/// pools of different maps are disjoint.
struct NamePool {
    used: HashSet<String>,
}

impl NamePool {
    fn next(&mut self, rng: &mut ChaCha8Rng) -> String {
        loop {
            let n = rng.gen_range(2..=3);
            let mut s: String = (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
            if self.used.insert(s.clone()) {
                s[..1].make_ascii_uppercase();
                return s;
            }
        }
    }
}

fn spaced_positions(n: usize, extent: u32, rng: &mut ChaCha8Rng) -> Vec<u32> {
    if n == 0 {
        return Vec::new();
    }
    let lo = 2u32;
    let hi = extent - 3;
    let gap = (hi - lo) as f64 / n as f64;
    (0..n)
        .map(|i| {
            let base = lo as f64 + gap * (i as f64 + 0.5);
            let jitter = (gap / 2.0 - 2.0).max(0.0).floor() as i64;
            let j = if jitter > 0 { rng.gen_range(-jitter..=jitter) } else { 0 };
            (base.round() as i64 + j).clamp(lo as i64, hi as i64) as u32
        })
        .collect()
}

/// Distractor words owned by map `index`: each word belongs to exactly
/// one map, so names on a held-out map use words never seen inside
/// training-map names.
fn map_distractors(index: usize, n_maps: usize) -> Vec<&'static str> {
    DISTRACTORS
        .iter()
        .enumerate()
        .filter(|(i, _)| i % n_maps.max(1) == index % n_maps.max(1))
        .map(|(_, d)| *d)
        .collect()
}

fn with_distractor(base: String, words: &[&str], rate: f64, rng: &mut ChaCha8Rng) -> String {
    if !words.is_empty() && rng.gen_bool(rate) {
        format!("{} {base}", words.choose(rng).unwrap())
    } else {
        base
    }
}

fn generate_map(
    spec: &SynthSpec,
    index: usize,
    pool: &mut NamePool,
    rng: &mut ChaCha8Rng,
) -> Result<GridMap, SynthError> {
    let (w, h) = (spec.width, spec.height);
    let mut streets = Vec::new();
    let mut next_id = 1u32;
    let distractors = map_distractors(index, spec.counts.len());
    let street_name = |pool: &mut NamePool, rng: &mut ChaCha8Rng| {
        let base = format!("{} {}", pool.next(rng), STREET_SUFFIXES.choose(rng).unwrap());
        with_distractor(base, &distractors, spec.distractor_rate, rng)
    };
    for col in spaced_positions(spec.avenues, w, rng) {
        let mut tiles: Vec<TileCoord> = (1..h - 1).map(|r| TileCoord::new(col, r)).collect();
        if rng.gen_bool(0.5) {
            tiles.reverse();
        }
        streets.push(Street {
            id: EntityId(next_id),
            name: Some(street_name(pool, rng)),
            tiles,
        });
        next_id += 1;
    }
    for row in spaced_positions(spec.cross_streets, h, rng) {
        let mut tiles: Vec<TileCoord> = (1..w - 1).map(|c| TileCoord::new(c, row)).collect();
        if rng.gen_bool(0.5) {
            tiles.reverse();
        }
        streets.push(Street {
            id: EntityId(next_id),
            name: Some(street_name(pool, rng)),
            tiles,
        });
        next_id += 1;
    }
    if spec.diagonal {
        let n = (w.min(h) - 2) as i64;
        let rising = rng.gen_bool(0.5);
        let mut tiles: Vec<TileCoord> = (0..n)
            .map(|k| {
                let col = 1 + k as u32;
                let row = if rising { h - 2 - k as u32 } else { 1 + k as u32 };
                TileCoord::new(col, row)
            })
            .collect();
        if rng.gen_bool(0.5) {
            tiles.reverse();
        }
        streets.push(Street {
            id: EntityId(next_id),
            name: Some(street_name(pool, rng)),
            tiles,
        });
        next_id += 1;
    }

    let mut on_street = vec![0u8; (w * h) as usize];
    for s in &streets {
        for t in &s.tiles {
            on_street[(t.row * w + t.col) as usize] += 1;
        }
    }
    let is_street = |c: TileCoord| on_street[(c.row * w + c.col) as usize] > 0;
    let mut entities = Vec::new();

    // signals at crossings
    let mut crossings: Vec<TileCoord> = (0..h)
        .flat_map(|r| (0..w).map(move |c| TileCoord::new(c, r)))
        .filter(|c| on_street[(c.row * w + c.col) as usize] > 1)
        .collect();
    crossings.shuffle(rng);
    let n_signals = (crossings.len() as f64 * spec.signal_rate).round() as usize;
    for &c in crossings.iter().take(n_signals) {
        entities.push(Entity {
            id: EntityId(next_id),
            name: None,
            entity_type: EntityType::TrafficSignal,
            is_building: false,
            house_number: None,
            footprint: vec![c],
        });
        next_id += 1;
    }

    // points of interest beside streets, one per tile, not touching a crossing
    let mut sites: Vec<TileCoord> = (0..h)
        .flat_map(|r| (0..w).map(move |c| TileCoord::new(c, r)))
        .filter(|&c| {
            !is_street(c)
                && neighbors(c, w, h).any(is_street)
                && !neighbors(c, w, h).any(|n| on_street[(n.row * w + n.col) as usize] > 1)
        })
        .collect();
    sites.shuffle(rng);
    let mut taken: HashSet<TileCoord> = HashSet::new();
    let mut placed = 0;
    for &site in &sites {
        if placed == spec.pois_per_map {
            break;
        }
        if neighbors(site, w, h).any(|n| taken.contains(&n)) || taken.contains(&site) {
            continue;
        }
        taken.insert(site);
        let (ty, noun) = *POI_TYPES.choose(rng).unwrap();
        let stem = pool.next(rng);
        let name = with_distractor(format!("{stem} {noun}"), &distractors, spec.distractor_rate, rng);
        entities.push(Entity {
            id: EntityId(next_id),
            name: Some(name),
            entity_type: ty,
            is_building: true,
            house_number: Some(format!("{}", rng.gen_range(1..200))),
            footprint: vec![site],
        });
        next_id += 1;
        placed += 1;
    }
    if placed < spec.pois_per_map {
        return Err(SynthError::Infeasible(format!(
            "only {placed} of {} points of interest fit on the grid",
            spec.pois_per_map
        )));
    }
    Ok(GridMap::new(format!("map{}", index + 1), w, h, entities, streets)?)
}

fn neighbors(c: TileCoord, w: u32, h: u32) -> impl Iterator<Item = TileCoord> {
    (-1i64..=1).flat_map(move |dr| {
        (-1i64..=1).filter_map(move |dc| {
            let (col, row) = (c.col as i64 + dc, c.row as i64 + dr);
            ((dc, dr) != (0, 0) && col >= 0 && row >= 0 && col < w as i64 && row < h as i64)
                .then(|| TileCoord::new(col as u32, row as u32))
        })
    })
}

/// A sentence plan: what to say and where it leads.
#[derive(Clone, Debug)]
enum Plan {
    TurnOnly {
        turn: Action,
        onto: Option<EntityId>,
    },
    WalkToPoi {
        poi: EntityId,
        past: Option<EntityId>,
        steps: usize,
    },
    WalkToStreet {
        street: EntityId,
        steps: usize,
        turn: Option<Action>,
    },
    WalkToLight {
        steps: usize,
        turn: Option<Action>,
    },
    WalkPast {
        poi: EntityId,
        steps: usize,
    },
    Verify {
        poi: EntityId,
    },
}

impl Plan {
    fn weight(&self) -> f64 {
        match self {
            Plan::TurnOnly {
                turn: Action::TurnAround,
                ..
            } => 0.4,
            Plan::TurnOnly { .. } => 1.5,
            Plan::WalkToPoi { .. } => 3.0,
            Plan::WalkToStreet { turn: None, .. } => 1.5,
            Plan::WalkToStreet { .. } => 2.0,
            Plan::WalkToLight { .. } => 1.5,
            Plan::WalkPast { .. } => 1.0,
            Plan::Verify { .. } => 1.0,
        }
    }
}

fn is_poi(map: &GridMap, id: EntityId) -> bool {
    map.feature(id).is_some_and(|f| {
        f.name().is_some() && !matches!(f.entity_type(), EntityType::Street | EntityType::TrafficSignal)
    })
}

fn has_signal(map: &GridMap, ids: &[EntityId]) -> bool {
    ids.iter().any(|id| {
        map.feature(*id)
            .is_some_and(|f| f.entity_type() == EntityType::TrafficSignal)
    })
}

fn turn_onto(map: &GridMap, pose: &Pose, turn: Action) -> Option<Pose> {
    let p = step(map, pose, turn).ok()?;
    (p.street != pose.street).then_some(p)
}

fn plans(map: &GridMap, pose: &Pose, spec: &SynthSpec) -> Result<Vec<Plan>, MapError> {
    let mut out = Vec::new();
    let here_tile = pose.tile(map)?;
    let here = map.entities_at(here_tile, 1)?;
    for turn in [Action::TurnLeft, Action::TurnRight] {
        if let Some(p) = turn_onto(map, pose, turn) {
            if step(map, &p, Action::Walk).is_ok() {
                out.push(Plan::TurnOnly {
                    turn,
                    onto: Some(p.street),
                });
            }
        }
    }
    if step(map, pose, Action::TurnAround).is_ok() {
        out.push(Plan::TurnOnly {
            turn: Action::TurnAround,
            onto: None,
        });
    }
    for &id in &here {
        if is_poi(map, id) {
            out.push(Plan::Verify { poi: id });
        }
    }

    let path = map.path_ahead(pose, spec.max_walk + 3)?;
    let mut seen: HashSet<EntityId> = here.iter().copied().collect();
    let mut pois_so_far: Vec<EntityId> = Vec::new();
    let mut light_done = has_signal(map, &here);
    let mut open: Vec<(EntityId, usize)> = Vec::new();
    let street_of_pose = pose.street;
    for (j0, &tile) in path.iter().enumerate() {
        let steps = j0 + 1;
        let near = map.entities_at(tile, 1)?;
        // pois we were passing and have now left behind
        open.retain(|&(id, first)| {
            if near.contains(&id) {
                true
            } else {
                if steps <= spec.max_walk && first >= spec.min_walk {
                    out.push(Plan::WalkPast { poi: id, steps });
                }
                false
            }
        });
        if steps > spec.max_walk {
            continue;
        }
        let in_range = steps >= spec.min_walk;
        for &id in &near {
            if !seen.insert(id) || !is_poi(map, id) {
                continue;
            }
            if in_range {
                out.push(Plan::WalkToPoi {
                    poi: id,
                    past: None,
                    steps,
                });
                if let Some(&prev) = pois_so_far.last() {
                    out.push(Plan::WalkToPoi {
                        poi: id,
                        past: Some(prev),
                        steps,
                    });
                }
            }
            pois_so_far.push(id);
            open.push((id, steps));
        }
        let at = map.entities_at(tile, 0)?;
        let index = pose_index_at(map, pose, steps)?;
        let arrived = Pose::new(street_of_pose, index, pose.dir);
        for (sid, _) in map.streets_through(tile)? {
            if sid == street_of_pose || !in_range {
                continue;
            }
            out.push(Plan::WalkToStreet {
                street: sid,
                steps,
                turn: None,
            });
            for turn in [Action::TurnLeft, Action::TurnRight] {
                if let Some(p) = turn_onto(map, &arrived, turn) {
                    if p.street == sid && step(map, &p, Action::Walk).is_ok() {
                        out.push(Plan::WalkToStreet {
                            street: sid,
                            steps,
                            turn: Some(turn),
                        });
                    }
                }
            }
        }
        for &id in &near {
            seen.insert(id);
        }
        if !light_done && has_signal(map, &at) {
            light_done = true;
            if in_range {
                out.push(Plan::WalkToLight { steps, turn: None });
                for turn in [Action::TurnLeft, Action::TurnRight] {
                    if let Some(p) = turn_onto(map, &arrived, turn) {
                        if step(map, &p, Action::Walk).is_ok() {
                            out.push(Plan::WalkToLight {
                                steps,
                                turn: Some(turn),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn pose_index_at(map: &GridMap, pose: &Pose, steps: usize) -> Result<usize, MapError> {
    let street = map.street(pose.street)?;
    let mut index = pose.index;
    for _ in 0..steps {
        index = street.successor(index, pose.dir).ok_or(MapError::NoSuccessor {
            street: pose.street,
            index,
            dir: pose.dir,
        })?;
    }
    Ok(index)
}

fn name(map: &GridMap, id: EntityId) -> String {
    map.feature(id).and_then(|f| f.name()).unwrap_or("").to_string()
}

fn the(name: String) -> String {
    format!("the {name}")
}

fn dir_word(a: Action) -> &'static str {
    match a {
        Action::TurnLeft => "left",
        Action::TurnRight => "right",
        _ => "around",
    }
}

fn side_of(map: &GridMap, pose: &Pose, poi: EntityId) -> Result<Option<&'static str>, MapError> {
    let heading = pose.heading(map)?;
    let tile = pose.tile(map)?;
    let target = map.feature(poi).ok_or(MapError::NoSuchEntity(poi))?.footprint()[0];
    let rel = signed_angle(compass_bearing(tile, target, map.tile_size_m) - heading);
    Ok(if (30.0..150.0).contains(&rel) {
        Some("right")
    } else if (-150.0..=-30.0).contains(&rel) {
        Some("left")
    } else {
        None
    })
}

fn pick<'a>(rng: &mut ChaCha8Rng, options: &[&'a str]) -> &'a str {
    options.choose(rng).unwrap()
}

fn render(map: &GridMap, pose: &Pose, plan: &Plan, rng: &mut ChaCha8Rng) -> Result<String, MapError> {
    let text = match plan {
        Plan::TurnOnly {
            turn: Action::TurnAround,
            ..
        } => pick(
            rng,
            &[
                "Turn around.",
                "Turn around so you face the other way.",
                "Make a u-turn.",
            ],
        )
        .to_string(),
        Plan::TurnOnly { turn, onto } => {
            let d = dir_word(*turn);
            match onto {
                Some(s) if rng.gen_bool(0.6) => {
                    let s = name(map, *s);
                    match rng.gen_range(0..3) {
                        0 => format!("Turn {d} onto {s}."),
                        1 => format!("Make a {d} onto {s}."),
                        _ => format!("Take a {d} on {s}."),
                    }
                }
                _ => pick(rng, &["Turn {d}.", "Make a {d}.", "Take a {d} here."]).replace("{d}", d),
            }
        }
        Plan::WalkToPoi { poi, past: None, .. } => {
            let p = the(name(map, *poi));
            match rng.gen_range(0..6) {
                0 => format!("Walk to {p}."),
                1 if rng.gen_bool(0.5) => format!("Walk down {} to {p}.", name(map, pose.street)),
                5 => format!("Follow {} until you reach {p}.", name(map, pose.street)),
                1 => format!("Go straight to {p}."),
                2 => format!("Continue until you reach {p}."),
                3 => format!("Walk forward until you get to {p}."),
                _ => format!("Head down the street to {p}."),
            }
        }
        Plan::WalkToPoi { poi, past: Some(a), .. } => {
            let (a, p) = (the(name(map, *a)), the(name(map, *poi)));
            match rng.gen_range(0..3) {
                0 => format!("Walk past {a} to {p}."),
                1 => format!("Go past {a} and stop at {p}."),
                _ => format!("Pass {a} and continue to {p}."),
            }
        }
        Plan::WalkToStreet { street, turn: None, .. } => {
            let s = name(map, *street);
            match rng.gen_range(0..4) {
                0 => format!("Walk to {s}."),
                3 => format!("Walk along {} to {s}.", name(map, pose.street)),
                1 => format!("Go straight until you hit {s}."),
                _ => format!("Continue to the intersection with {s}."),
            }
        }
        Plan::WalkToStreet {
            street, turn: Some(t), ..
        } => {
            let (s, d) = (name(map, *street), dir_word(*t));
            match rng.gen_range(0..3) {
                0 => format!("Walk to {s} and turn {d}."),
                1 => format!("Go straight to {s}, then make a {d}."),
                _ => format!("When you reach {s}, turn {d}."),
            }
        }
        Plan::WalkToLight { turn: None, .. } => pick(
            rng,
            &[
                "Walk to the next light.",
                "Continue to the traffic light.",
                "Go straight until you reach the lights.",
            ],
        )
        .to_string(),
        Plan::WalkToLight { turn: Some(t), .. } => {
            let d = dir_word(*t);
            pick(
                rng,
                &[
                    "At the next light, turn {d}.",
                    "Walk to the light and turn {d}.",
                    "Go to the traffic light and make a {d}.",
                ],
            )
            .replace("{d}", d)
        }
        Plan::WalkPast { poi, .. } => {
            let p = the(name(map, *poi));
            match rng.gen_range(0..3) {
                0 => format!("Walk past {p}."),
                1 => format!("Continue past {p}."),
                _ => format!("Go a little past {p}."),
            }
        }
        Plan::Verify { poi } => {
            let p = the(name(map, *poi));
            match side_of(map, pose, *poi)? {
                Some(side) if rng.gen_bool(0.7) => format!("You should see {p} on your {side}."),
                _ => match rng.gen_range(0..2) {
                    0 => format!("You are now at {p}."),
                    _ => format!("{} should be right next to you.", capitalize(&p)),
                },
            }
        }
    };
    Ok(text)
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

fn with_connective(text: String, rng: &mut ChaCha8Rng) -> String {
    let roll = rng.gen_range(0..10);
    let connective = match roll {
        0 | 1 => "Then",
        2 => "Next,",
        3 => "After that,",
        _ => return text,
    };
    let mut c = text.chars();
    let first = c.next().unwrap();
    format!("{connective} {}{}", first.to_lowercase(), c.as_str())
}

fn gold_route(map: &GridMap, pose: &Pose, plan: &Plan) -> Result<Route, SynthError> {
    let (steps, turn) = match plan {
        Plan::TurnOnly { turn, .. } => (0, Some(*turn)),
        Plan::WalkToPoi { steps, .. } | Plan::WalkPast { steps, .. } => (*steps, None),
        Plan::WalkToStreet { steps, turn, .. } | Plan::WalkToLight { steps, turn } => (*steps, *turn),
        Plan::Verify { .. } => (0, None),
    };
    let internal = |e: &dyn std::fmt::Display| SynthError::Internal(e.to_string());
    let mut tiles = vec![pose.tile(map)?];
    let mut p = *pose;
    for _ in 0..steps {
        p = step(map, &p, Action::Walk).map_err(|e| internal(&e))?;
        tiles.push(p.tile(map)?);
    }
    if let Some(t) = turn {
        p = step(map, &p, t).map_err(|e| internal(&e))?;
    }
    Ok(Route { tiles, final_pose: p })
}

fn random_start(map: &GridMap, rng: &mut ChaCha8Rng) -> Pose {
    let s = map.streets().choose(rng).unwrap();
    let index = rng.gen_range(0..s.len());
    let dir = if index + 1 == s.len() || (index > 0 && rng.gen_bool(0.5)) {
        TravelDir::Backward
    } else {
        TravelDir::Forward
    };
    Pose::new(s.id, index, dir)
}

/// Splits `total` into `parts` positive sizes.
fn partition(total: usize, parts: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut sizes = vec![1; parts];
    for _ in parts..total {
        let i = rng.gen_range(0..parts);
        sizes[i] += 1;
    }
    sizes
}

fn make_instruction(
    map: &GridMap,
    lexicon: &Lexicon,
    pose: &Pose,
    plan: &Plan,
    text: String,
) -> Result<Instruction, SynthError> {
    let internal = |e: &dyn std::fmt::Display| SynthError::Internal(e.to_string());
    let gold_route = gold_route(map, pose, plan)?;
    let gold_actions = route_to_actions(map, pose, &gold_route).map_err(|e| internal(&e))?;
    let tokens = tokenize(&text).map_err(|e| internal(&e))?.tokens;
    let (_, abstracted) = abstract_text(&text, lexicon).map_err(|e| internal(&e))?;
    Ok(Instruction {
        text,
        tokens,
        abstracted,
        gold_route,
        gold_actions,
    })
}

fn generate_paragraphs(
    map: &GridMap,
    counts: MapCounts,
    spec: &SynthSpec,
    first_id: u32,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Paragraph>, SynthError> {
    let lexicon = Lexicon::from_map(map);
    let sizes = partition(counts.instructions, counts.paragraphs, rng);
    let mut out = Vec::with_capacity(sizes.len());
    for (k, &n) in sizes.iter().enumerate() {
        let start = random_start(map, rng);
        let mut pose = start;
        let mut instructions = Vec::with_capacity(n);
        let mut last: Option<Plan> = None;
        for i in 0..n {
            let mut options = plans(map, &pose, spec)?;
            match last {
                Some(Plan::TurnOnly { .. }) => options.retain(|p| !matches!(p, Plan::TurnOnly { .. })),
                Some(Plan::Verify { .. }) => options.retain(|p| !matches!(p, Plan::Verify { .. })),
                _ => {}
            }
            if options.is_empty() {
                options = plans(map, &pose, spec)?;
            }
            let plan = options
                .choose_weighted(rng, |p| p.weight())
                .map_err(|e| SynthError::Internal(e.to_string()))?
                .clone();
            let text = render(map, &pose, &plan, rng)?;
            let text = if i > 0 { with_connective(text, rng) } else { text };
            let ins = make_instruction(map, &lexicon, &pose, &plan, text)?;
            pose = ins.gold_route.final_pose;
            last = Some(plan);
            instructions.push(ins);
        }
        out.push(Paragraph {
            id: first_id + k as u32,
            map_id: map.id.clone(),
            start,
            instructions,
        });
    }
    Ok(out)
}

/// Generates maps and a corpus. A pure function of the spec.
pub fn generate(spec: &SynthSpec) -> Result<(MapSet, Corpus), SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pool = NamePool { used: HashSet::new() };
    let mut maps = Vec::new();
    let mut corpus = Corpus::default();
    let mut next_id = 1;
    for (i, &counts) in spec.counts.iter().enumerate() {
        let map = generate_map(spec, i, &mut pool, &mut rng)?;
        let paragraphs = generate_paragraphs(&map, counts, spec, next_id, &mut rng)?;
        next_id += paragraphs.len() as u32;
        corpus.paragraphs.extend(paragraphs);
        maps.push(map);
    }
    Ok((MapSet::new(maps), corpus))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_spec_generates_a_valid_corpus() {
        let (maps, corpus) = generate(&SynthSpec::tiny(3)).unwrap();
        assert_eq!(maps.len(), 3);
        assert_eq!(corpus.paragraphs.len(), 12);
        assert_eq!(corpus.n_instructions(), 36);
        corpus.validate(&maps).unwrap();
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&SynthSpec::tiny(5)).unwrap();
        let b = generate(&SynthSpec::tiny(5)).unwrap();
        assert_eq!(a.1, b.1);
        assert_eq!(a.0.iter().collect::<Vec<_>>(), b.0.iter().collect::<Vec<_>>());
    }

    #[test]
    fn map_name_pools_are_disjoint() {
        let (maps, _) = generate(&SynthSpec::tiny(1)).unwrap();
        let names: Vec<HashSet<String>> = maps
            .iter()
            .map(|m| {
                m.entities()
                    .iter()
                    .filter_map(|e| e.name.clone())
                    .chain(m.streets().iter().filter_map(|s| s.name.clone()))
                    .flat_map(|n| n.split(' ').map(String::from).collect::<Vec<_>>())
                    .filter(|w| w.chars().next().is_some_and(|c| c.is_uppercase()))
                    .filter(|w| !POI_TYPES.iter().any(|(_, n)| n.contains(w.as_str())))
                    .filter(|w| !STREET_SUFFIXES.contains(&w.as_str()))
                    .collect()
            })
            .collect();
        for i in 0..names.len() {
            for j in i + 1..names.len() {
                assert!(names[i].is_disjoint(&names[j]));
            }
        }
    }

    #[test]
    fn infeasible_spec_is_rejected() {
        let spec = SynthSpec {
            pois_per_map: 10_000,
            ..SynthSpec::tiny(0)
        };
        assert!(matches!(generate(&spec), Err(SynthError::Infeasible(_))));
    }

    #[test]
    fn partition_sums_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = partition(874, 159, &mut rng);
        assert_eq!(p.iter().sum::<usize>(), 874);
        assert!(p.iter().all(|&x| x >= 1));
    }
}
