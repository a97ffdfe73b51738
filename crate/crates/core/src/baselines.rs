//! Non-learned reference policies: NO_MOVE, RANDOM and JUMP.

use std::collections::hash_map::Entry;
use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::abstraction::Binding;
use crate::corpus::{Instruction, MapSet, Paragraph};
use crate::evaluator::{EvalError, Follower, PolicyFactory};
use crate::executor::{step, Action, Pose};
use crate::map::{EntityId, GridMap, TileCoord};

/// Step budget per target entity in [`jump`].
pub const JUMP_BUDGET: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineKind {
    NoMove,
    Random,
    Jump,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [BaselineKind::NoMove, BaselineKind::Random, BaselineKind::Jump];

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::NoMove => "no-move",
            BaselineKind::Random => "random",
            BaselineKind::Jump => "jump",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "no-move" | "nomove" => Ok(BaselineKind::NoMove),
            "random" => Ok(BaselineKind::Random),
            "jump" => Ok(BaselineKind::Jump),
            _ => Err(format!("unknown baseline {s:?} (expected no-move, random or jump)")),
        }
    }
}

pub fn no_move() -> Vec<Action> {
    vec![Action::End]
}

/// An optional random turn, then `round(avg_len)` WALKs, then END. An
/// invalid turn is skipped; an invalid WALK ends the rollout.
pub fn random_walk(map: &GridMap, p0: &Pose, avg_len: f64, seed: u64) -> Vec<Action> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut actions = Vec::new();
    let mut pose = *p0;
    let choice = [
        None,
        Some(Action::TurnLeft),
        Some(Action::TurnRight),
        Some(Action::TurnAround),
    ]
    .choose(&mut rng)
    .copied()
    .flatten();
    if let Some(turn) = choice {
        if let Ok(p) = step(map, &pose, turn) {
            actions.push(turn);
            pose = p;
        }
    }
    for _ in 0..avg_len.max(0.0).round() as usize {
        match step(map, &pose, Action::Walk) {
            Ok(p) => {
                actions.push(Action::Walk);
                pose = p;
            }
            Err(_) => break,
        }
    }
    actions.push(Action::End);
    actions
}

/// Walkable tiles the agent should reach for `entity`: its walkable
/// footprint tiles, or else the walkable tiles nearest its footprint.
pub fn goal_tiles(map: &GridMap, entity: EntityId) -> Vec<TileCoord> {
    let Some(f) = map.feature(entity) else {
        return Vec::new();
    };
    let on: Vec<TileCoord> = f.footprint().iter().copied().filter(|t| map.is_walkable(*t)).collect();
    if !on.is_empty() {
        return on;
    }
    for radius in 1..=map.width.max(map.height) {
        let mut out = Vec::new();
        for t in f.footprint() {
            let (c0, r0) = (t.col.saturating_sub(radius), t.row.saturating_sub(radius));
            for row in r0..=(t.row + radius).min(map.height - 1) {
                for col in c0..=(t.col + radius).min(map.width - 1) {
                    let c = TileCoord::new(col, row);
                    if map.is_walkable(c) && !out.contains(&c) {
                        out.push(c);
                    }
                }
            }
        }
        if !out.is_empty() {
            return out;
        }
    }
    Vec::new()
}

/// Street-graph distance (in tiles) from every walkable tile to `goals`.
pub fn street_distances(map: &GridMap, goals: &[TileCoord]) -> HashMap<TileCoord, usize> {
    let mut adj: HashMap<TileCoord, Vec<TileCoord>> = HashMap::new();
    for s in map.streets() {
        for w in s.tiles.windows(2) {
            adj.entry(w[0]).or_default().push(w[1]);
            adj.entry(w[1]).or_default().push(w[0]);
        }
    }
    let mut dist = HashMap::new();
    let mut queue = VecDeque::new();
    for &g in goals {
        if dist.insert(g, 0).is_none() {
            queue.push_back(g);
        }
    }
    while let Some(t) = queue.pop_front() {
        let d = dist[&t];
        for &n in adj.get(&t).into_iter().flatten() {
            if let Entry::Vacant(e) = dist.entry(n) {
                e.insert(d + 1);
                queue.push_back(n);
            }
        }
    }
    dist
}

/// Visits the bound entities in sentence order by greedy descent on
/// street-graph distance.
pub fn jump(map: &GridMap, p0: &Pose, bindings: &[Binding], seed: u64) -> Vec<Action> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut actions = Vec::new();
    let mut pose = *p0;
    for b in bindings {
        let dist = street_distances(map, &goal_tiles(map, b.entity));
        let d_of = |p: &Pose| p.tile(map).ok().and_then(|t| dist.get(&t).copied());
        let mut budget = JUMP_BUDGET;
        while budget > 0 {
            let Some(here) = d_of(&pose) else { break };
            if here == 0 {
                break;
            }
            let Ok(walked) = step(map, &pose, Action::Walk) else {
                let turn = *Action::TURNS.choose(&mut rng).unwrap();
                if let Ok(p) = step(map, &pose, turn) {
                    actions.push(turn);
                    pose = p;
                }
                budget -= 1;
                continue;
            };
            let mut best: Option<(usize, Option<Action>, Pose)> =
                d_of(&walked).filter(|d| *d < here).map(|d| (d, None, walked));
            for turn in Action::TURNS {
                let Ok(turned) = step(map, &pose, turn) else { continue };
                let Ok(w) = step(map, &turned, Action::Walk) else {
                    continue;
                };
                if let Some(d) = d_of(&w).filter(|d| *d < here) {
                    if best.is_none_or(|(bd, _, _)| d < bd) {
                        best = Some((d, Some(turn), w));
                    }
                }
            }
            let Some((_, turn, next)) = best else { break };
            if let Some(t) = turn {
                actions.push(t);
                budget -= 1;
                if budget == 0 {
                    break;
                }
            }
            actions.push(Action::Walk);
            budget -= 1;
            pose = next;
        }
        // a trailing turn was only useful with its WALK
        if actions.last().is_some_and(|a| a.is_turn()) && budget == 0 {
            actions.pop();
        }
    }
    actions.push(Action::End);
    actions
}

/// Mean number of WALK actions per gold instruction.
pub fn average_walks(paragraphs: &[&Paragraph]) -> f64 {
    let (mut walks, mut n) = (0usize, 0usize);
    for p in paragraphs {
        for ins in &p.instructions {
            walks += ins.gold_actions.iter().filter(|a| **a == Action::Walk).count();
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        walks as f64 / n as f64
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Baseline {
    pub kind: BaselineKind,
    pub avg_len: f64,
}

impl Follower for Baseline {
    fn follow(&self, map: &GridMap, pose: &Pose, instruction: &Instruction, seed: u64) -> Vec<Action> {
        match self.kind {
            BaselineKind::NoMove => no_move(),
            BaselineKind::Random => random_walk(map, pose, self.avg_len, seed),
            BaselineKind::Jump => jump(map, pose, &instruction.abstracted.bindings, seed),
        }
    }
}

pub struct BaselineFactory(pub BaselineKind);

impl PolicyFactory for BaselineFactory {
    fn policy(&self) -> String {
        self.0.to_string()
    }

    fn variant(&self) -> String {
        "baseline".into()
    }

    fn fit(
        &self,
        train: &[&Paragraph],
        val: &[&Paragraph],
        _maps: &MapSet,
        _seed: u64,
    ) -> Result<Box<dyn Follower>, EvalError> {
        let all: Vec<&Paragraph> = train.iter().chain(val).copied().collect();
        Ok(Box::new(Baseline {
            kind: self.0,
            avg_len: average_walks(&all),
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::Variable;
    use crate::executor::{execute, TravelDir};
    use crate::map::{Entity, EntityType, Street};

    fn straight() -> GridMap {
        let s = Street {
            id: EntityId(1),
            name: Some("Long Street".into()),
            tiles: (0..10).map(|c| TileCoord::new(c, 2)).collect(),
        };
        let signal = Entity {
            id: EntityId(2),
            name: Some("Clock".into()),
            entity_type: EntityType::TrafficSignal,
            is_building: false,
            house_number: None,
            footprint: vec![TileCoord::new(3, 2)],
        };
        GridMap::new("s", 10, 5, vec![signal], vec![s]).unwrap()
    }

    fn bind(id: u32) -> Binding {
        Binding {
            variable: Variable {
                entity_type: EntityType::TrafficSignal,
                k: 1,
            },
            entity: EntityId(id),
        }
    }

    #[test]
    fn jump_walks_three_tiles_to_an_entity_ahead() {
        let m = straight();
        let p = Pose::new(EntityId(1), 0, TravelDir::Forward);
        assert_eq!(
            jump(&m, &p, &[bind(2)], 0),
            vec![Action::Walk, Action::Walk, Action::Walk, Action::End]
        );
    }

    #[test]
    fn jump_turns_around_for_an_entity_behind() {
        let m = straight();
        let p = Pose::new(EntityId(1), 6, TravelDir::Forward);
        let a = jump(&m, &p, &[bind(2)], 0);
        assert_eq!(a[0], Action::TurnAround);
        assert_eq!(execute(&m, &p, &a).unwrap().end(), TileCoord::new(3, 2));
    }

    #[test]
    fn jump_without_entities_ends() {
        let m = straight();
        let p = Pose::new(EntityId(1), 0, TravelDir::Forward);
        assert_eq!(jump(&m, &p, &[], 1), vec![Action::End]);
    }

    #[test]
    fn random_with_zero_length_is_at_most_one_turn() {
        let m = straight();
        let p = Pose::new(EntityId(1), 4, TravelDir::Forward);
        for seed in 0..20 {
            let a = random_walk(&m, &p, 0.0, seed);
            assert!(a.len() <= 2);
            assert_eq!(*a.last().unwrap(), Action::End);
        }
    }

    #[test]
    fn random_is_reproducible_and_truncates() {
        let m = straight();
        let p = Pose::new(EntityId(1), 7, TravelDir::Forward);
        for seed in 0..20 {
            let a = random_walk(&m, &p, 6.0, seed);
            assert_eq!(a, random_walk(&m, &p, 6.0, seed));
            assert!(execute(&m, &p, &a).is_ok());
        }
    }

    #[test]
    fn kinds_parse() {
        for k in BaselineKind::ALL {
            assert_eq!(k.as_str().parse::<BaselineKind>().unwrap(), k);
        }
        assert!("teleport".parse::<BaselineKind>().is_err());
    }
}
