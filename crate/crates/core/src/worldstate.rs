//! World-state features: two multi-hot vectors describing what is at the
//! agent's position and what lies on the street ahead.
//!
//! Each vector has a type block (one bit per [`EntityType`]) followed by
//! a variable block (one bit per `<TYPE_k>` slot, `k ≤ slots_per_type`)
//! that grounds the sentence's binding table on the map.

use serde::{Deserialize, Serialize};

use crate::abstraction::{Binding, Variable};
use crate::executor::Pose;
use crate::map::{EntityId, EntityType, GridMap, MapError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldConfig {
    /// Tiles of street ahead considered "in the path ahead".
    pub horizon: usize,
    /// Chebyshev radius considered "at the current position".
    pub radius: u32,
    pub slots_per_type: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            horizon: 10,
            radius: 1,
            slots_per_type: 4,
        }
    }
}

impl WorldConfig {
    /// Width of each of the two vectors.
    pub fn width(&self) -> usize {
        EntityType::ALL.len() * (1 + self.slots_per_type)
    }

    /// Position of a variable's bit, if it has a slot.
    pub fn slot(&self, v: Variable) -> Option<usize> {
        (v.k >= 1 && v.k <= self.slots_per_type)
            .then(|| EntityType::ALL.len() + v.entity_type.index() * self.slots_per_type + v.k - 1)
    }

    /// Human-readable labels for every position, in order.
    pub fn slot_order(&self) -> Vec<String> {
        let mut out: Vec<String> = EntityType::ALL.iter().map(|t| t.as_str().to_string()).collect();
        for t in EntityType::ALL {
            for k in 1..=self.slots_per_type {
                out.push(Variable { entity_type: *t, k }.to_string());
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub here: Vec<f32>,
    pub ahead: Vec<f32>,
}

impl WorldState {
    pub fn zeros(width: usize) -> WorldState {
        WorldState {
            here: vec![0.0; width],
            ahead: vec![0.0; width],
        }
    }

    /// `[here; ahead]`.
    pub fn concat(&self) -> Vec<f32> {
        let mut v = self.here.clone();
        v.extend_from_slice(&self.ahead);
        v
    }
}

fn fill(bits: &mut [f32], ids: &[EntityId], map: &GridMap, bindings: &[Binding], cfg: &WorldConfig) {
    for id in ids {
        if let Some(f) = map.feature(*id) {
            bits[f.entity_type().index()] = 1.0;
        }
    }
    for b in bindings {
        if ids.binary_search(&b.entity).is_ok() {
            if let Some(slot) = cfg.slot(b.variable) {
                bits[slot] = 1.0;
            }
        }
    }
}

/// Computes the world state at `pose`.
pub fn compute(map: &GridMap, pose: &Pose, bindings: &[Binding], cfg: &WorldConfig) -> Result<WorldState, MapError> {
    let tile = pose.tile(map)?;
    let here_ids = map.entities_at(tile, cfg.radius)?;
    let mut ahead_ids = Vec::new();
    for t in map.path_ahead(pose, cfg.horizon)? {
        ahead_ids.extend(map.entities_at(t, 0)?);
    }
    ahead_ids.sort_unstable();
    ahead_ids.dedup();
    let mut ws = WorldState::zeros(cfg.width());
    fill(&mut ws.here, &here_ids, map, bindings, cfg);
    fill(&mut ws.ahead, &ahead_ids, map, bindings, cfg);
    Ok(ws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::TravelDir;
    use crate::map::{Entity, Street, TileCoord};

    fn map() -> GridMap {
        let s1 = Street {
            id: EntityId(1),
            name: Some("Main Street".into()),
            tiles: (0..8).map(|c| TileCoord::new(c, 3)).collect(),
        };
        let s2 = Street {
            id: EntityId(2),
            name: Some("Oak Avenue".into()),
            tiles: (0..8).map(|r| TileCoord::new(5, r)).collect(),
        };
        let cafe = Entity {
            id: EntityId(3),
            name: Some("Blue Cup".into()),
            entity_type: EntityType::Cafe,
            is_building: true,
            house_number: None,
            footprint: vec![TileCoord::new(2, 4)],
        };
        GridMap::new("w", 8, 8, vec![cafe], vec![s1, s2]).unwrap()
    }

    fn var(t: EntityType, k: usize) -> Variable {
        Variable { entity_type: t, k }
    }

    #[test]
    fn empty_region_is_all_zero() {
        let s = Street {
            id: EntityId(1),
            name: None,
            tiles: vec![TileCoord::new(0, 0), TileCoord::new(1, 0)],
        };
        let m = GridMap::new("e", 10, 10, vec![], vec![s]).unwrap();
        let cfg = WorldConfig {
            horizon: 0,
            radius: 0,
            ..Default::default()
        };
        let p = Pose::new(EntityId(1), 0, TravelDir::Forward);
        let ws = compute(&m, &p, &[], &cfg).unwrap();
        // only the street under the agent
        assert_eq!(ws.here.iter().sum::<f32>(), 1.0);
        assert!(ws.ahead.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn bound_street_adjacent_sets_its_slot() {
        let m = map();
        let cfg = WorldConfig::default();
        let bindings = [Binding {
            variable: var(EntityType::Street, 1),
            entity: EntityId(2),
        }];
        // one tile west of the crossing with Oak Avenue
        let p = Pose::new(EntityId(1), 4, TravelDir::Forward);
        let ws = compute(&m, &p, &bindings, &cfg).unwrap();
        let slot = cfg.slot(var(EntityType::Street, 1)).unwrap();
        assert_eq!(ws.here[slot], 1.0);
        assert_eq!(ws.ahead[slot], 1.0);
        // at the crossing: still here, no longer ahead
        let p = Pose::new(EntityId(1), 5, TravelDir::Forward);
        let ws = compute(&m, &p, &bindings, &cfg).unwrap();
        assert_eq!(ws.here[slot], 1.0);
        assert_eq!(ws.ahead[slot], 0.0);
    }

    #[test]
    fn overflow_variables_only_set_the_type_bit() {
        let m = map();
        let cfg = WorldConfig {
            slots_per_type: 1,
            ..Default::default()
        };
        let bindings = [Binding {
            variable: var(EntityType::Cafe, 2),
            entity: EntityId(3),
        }];
        let p = Pose::new(EntityId(1), 2, TravelDir::Forward);
        let ws = compute(&m, &p, &bindings, &cfg).unwrap();
        assert_eq!(ws.here[EntityType::Cafe.index()], 1.0);
        assert_eq!(ws.here.iter().sum::<f32>(), 2.0); // street + cafe
    }

    #[test]
    fn width_and_slot_order_agree() {
        let cfg = WorldConfig::default();
        assert_eq!(cfg.slot_order().len(), cfg.width());
        let v = var(EntityType::Bank, 3);
        assert_eq!(cfg.slot_order()[cfg.slot(v).unwrap()], v.to_string());
    }
}
