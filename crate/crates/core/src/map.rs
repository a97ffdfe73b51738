//! Symbolic tile-grid maps.
//!
//! A [`GridMap`] is a rectangular grid of square tiles. Entities (shops,
//! churches, traffic signals, ...) cover one or more tiles; streets are
//! ordered tile lists with a start and an end. Streets and entities share
//! one id space, and a street counts as an entity of type
//! [`EntityType::Street`] whose footprint is its tile list.
//!
//! Maps are immutable once built and validated.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::{Pose, TravelDir};

/// Edge length of a tile in meters.
pub const TILE_SIZE_M: f64 = 11.132;

/// Version of the closed [`EntityType`] inventory.
pub const TYPE_INVENTORY_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: invalid {record}: {message}")]
    Validation {
        line: usize,
        record: String,
        message: String,
    },
    #[error("tile {0} lies outside the grid")]
    OutOfGrid(TileCoord),
    #[error("no street with id {0}")]
    NoSuchStreet(EntityId),
    #[error("no entity with id {0}")]
    NoSuchEntity(EntityId),
    #[error("street {street} has no tile after index {index} in direction {dir}")]
    NoSuccessor {
        street: EntityId,
        index: usize,
        dir: TravelDir,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TileCoord {
    pub col: u32,
    pub row: u32,
}

impl TileCoord {
    pub const fn new(col: u32, row: u32) -> Self {
        Self { col, row }
    }

    pub fn chebyshev(self, other: TileCoord) -> u32 {
        self.col.abs_diff(other.col).max(self.row.abs_diff(other.row))
    }

    /// Euclidean distance in tile units.
    pub fn euclidean(self, other: TileCoord) -> f64 {
        let dc = self.col as f64 - other.col as f64;
        let dr = self.row as f64 - other.row as f64;
        (dc * dc + dr * dr).sqrt()
    }

    /// Tile center in meters, x growing east and y growing south.
    pub fn center_m(self, tile_size_m: f64) -> (f64, f64) {
        (
            (self.col as f64 + 0.5) * tile_size_m,
            (self.row as f64 + 0.5) * tile_size_m,
        )
    }
}

impl fmt::Display for TileCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.col, self.row)
    }
}

impl FromStr for TileCoord {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s
            .trim()
            .strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .ok_or_else(|| format!("expected (c,r), got {s:?}"))?;
        let (c, r) = inner
            .split_once(',')
            .ok_or_else(|| format!("expected (c,r), got {s:?}"))?;
        let col = c.trim().parse().map_err(|_| format!("bad column in {s:?}"))?;
        let row = r.trim().parse().map_err(|_| format!("bad row in {s:?}"))?;
        Ok(TileCoord { col, row })
    }
}

/// Formats a tile list as `(c,r);(c,r);...`.
pub fn format_tiles(tiles: &[TileCoord]) -> String {
    tiles.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

pub fn parse_tiles(s: &str) -> Result<Vec<TileCoord>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(';').map(str::parse).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

macro_rules! entity_types {
    ($($variant:ident => $name:literal),+ $(,)?) => {
        /// Closed entity-type inventory. Unknown type names map to
        /// [`EntityType::Other`].
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum EntityType {
            $($variant),+
        }

        impl EntityType {
            pub const ALL: &'static [EntityType] = &[$(EntityType::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(EntityType::$variant => $name),+
                }
            }

            /// Parses an inventory name; anything unknown becomes `Other`.
            pub fn from_name(name: &str) -> EntityType {
                match name.to_ascii_lowercase().as_str() {
                    $($name => EntityType::$variant,)+
                    _ => EntityType::Other,
                }
            }
        }
    };
}

entity_types! {
    Street => "street",
    Restaurant => "restaurant",
    Cafe => "cafe",
    Bar => "bar",
    Shop => "shop",
    Supermarket => "supermarket",
    Bank => "bank",
    Pharmacy => "pharmacy",
    Hotel => "hotel",
    PlaceOfWorship => "place_of_worship",
    School => "school",
    Hospital => "hospital",
    Park => "park",
    Library => "library",
    Theatre => "theatre",
    Cinema => "cinema",
    PostOffice => "post_office",
    Fuel => "fuel",
    TrafficSignal => "traffic_signal",
    BusStop => "bus_stop",
    Other => "other",
}

impl EntityType {
    /// Position in [`EntityType::ALL`].
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|t| *t == self).unwrap()
    }

    /// Upper-case form used in variable tokens, e.g. `PLACE_OF_WORSHIP`.
    pub fn variable_prefix(self) -> String {
        self.as_str().to_ascii_uppercase()
    }

    pub fn from_variable_prefix(prefix: &str) -> Option<EntityType> {
        Self::ALL.iter().copied().find(|t| t.variable_prefix() == prefix)
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub name: Option<String>,
    pub entity_type: EntityType,
    pub is_building: bool,
    pub house_number: Option<String>,
    pub footprint: Vec<TileCoord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Street {
    pub id: EntityId,
    pub name: Option<String>,
    pub tiles: Vec<TileCoord>,
}

impl Street {
    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    /// Index of the tile after `index` when moving in `dir`, if any.
    pub fn successor(&self, index: usize, dir: TravelDir) -> Option<usize> {
        let next = index as i64 + dir.delta();
        (next >= 0 && (next as usize) < self.tiles.len()).then_some(next as usize)
    }
}

/// Per-tile contents of the spatial index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TileCell {
    pub entities: Vec<EntityId>,
    pub streets: Vec<EntityId>,
}

/// Borrowed view of anything addressable by [`EntityId`].
#[derive(Clone, Copy, Debug)]
pub enum Feature<'a> {
    Entity(&'a Entity),
    Street(&'a Street),
}

impl<'a> Feature<'a> {
    pub fn id(&self) -> EntityId {
        match self {
            Feature::Entity(e) => e.id,
            Feature::Street(s) => s.id,
        }
    }

    pub fn entity_type(&self) -> EntityType {
        match self {
            Feature::Entity(e) => e.entity_type,
            Feature::Street(_) => EntityType::Street,
        }
    }

    pub fn name(&self) -> Option<&'a str> {
        match self {
            Feature::Entity(e) => e.name.as_deref(),
            Feature::Street(s) => s.name.as_deref(),
        }
    }

    pub fn footprint(&self) -> &'a [TileCoord] {
        match self {
            Feature::Entity(e) => &e.footprint,
            Feature::Street(s) => &s.tiles,
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Slot {
    Entity(usize),
    Street(usize),
}

#[derive(Clone, Debug)]
pub struct GridMap {
    pub id: String,
    pub width: u32,
    pub height: u32,
    pub tile_size_m: f64,
    entities: Vec<Entity>,
    streets: Vec<Street>,
    cells: Vec<TileCell>,
    by_id: std::collections::HashMap<EntityId, Slot>,
}

impl PartialEq for GridMap {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.width == other.width
            && self.height == other.height
            && self.entities == other.entities
            && self.streets == other.streets
    }
}

impl GridMap {
    /// Builds and validates a map. Errors carry the position of the
    /// offending record in `entities` / `streets` as `line`.
    pub fn new(
        id: impl Into<String>,
        width: u32,
        height: u32,
        entities: Vec<Entity>,
        streets: Vec<Street>,
    ) -> Result<Self, MapError> {
        Self::build(id.into(), width, height, entities, streets, |_, i| i + 1)
    }

    fn build(
        id: String,
        width: u32,
        height: u32,
        entities: Vec<Entity>,
        streets: Vec<Street>,
        line_of: impl Fn(&str, usize) -> usize,
    ) -> Result<Self, MapError> {
        let mut map = GridMap {
            id,
            width,
            height,
            tile_size_m: TILE_SIZE_M,
            entities,
            streets,
            cells: Vec::new(),
            by_id: Default::default(),
        };
        map.validate_records(line_of)?;
        map.cells = build_index(width, height, &map.entities, &map.streets);
        map.by_id = map
            .entities
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id, Slot::Entity(i)))
            .chain(map.streets.iter().enumerate().map(|(i, s)| (s.id, Slot::Street(i))))
            .collect();
        Ok(map)
    }

    fn validate_records(&self, line_of: impl Fn(&str, usize) -> usize) -> Result<(), MapError> {
        if self.width == 0 || self.height == 0 {
            return Err(MapError::Validation {
                line: 0,
                record: "MAP".into(),
                message: "grid must be at least 1x1".into(),
            });
        }
        let mut ids = HashSet::new();
        for (i, e) in self.entities.iter().enumerate() {
            let fail = |message: String| MapError::Validation {
                line: line_of("ENTITY", i),
                record: format!("ENTITY {}", e.id),
                message,
            };
            if !ids.insert(e.id) {
                return Err(fail("duplicate id".into()));
            }
            if e.footprint.is_empty() {
                return Err(fail("empty footprint".into()));
            }
            let mut seen = HashSet::new();
            for &t in &e.footprint {
                if !self.contains(t) {
                    return Err(fail(format!("footprint tile {t} outside the grid")));
                }
                if !seen.insert(t) {
                    return Err(fail(format!("footprint tile {t} listed twice")));
                }
            }
        }
        for (i, s) in self.streets.iter().enumerate() {
            let fail = |message: String| MapError::Validation {
                line: line_of("STREET", i),
                record: format!("STREET {}", s.id),
                message,
            };
            if !ids.insert(s.id) {
                return Err(fail("duplicate id".into()));
            }
            if s.tiles.len() < 2 {
                return Err(fail("a street needs at least 2 tiles".into()));
            }
            for &t in &s.tiles {
                if !self.contains(t) {
                    return Err(fail(format!("tile {t} outside the grid")));
                }
            }
            for w in s.tiles.windows(2) {
                if w[0].chebyshev(w[1]) != 1 {
                    return Err(fail(format!("tiles {} and {} are not 8-neighbors", w[0], w[1])));
                }
            }
        }
        Ok(())
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn streets(&self) -> &[Street] {
        &self.streets
    }

    pub fn contains(&self, c: TileCoord) -> bool {
        c.col < self.width && c.row < self.height
    }

    fn cell_index(&self, c: TileCoord) -> usize {
        c.row as usize * self.width as usize + c.col as usize
    }

    pub fn cell(&self, c: TileCoord) -> Result<&TileCell, MapError> {
        if !self.contains(c) {
            return Err(MapError::OutOfGrid(c));
        }
        Ok(&self.cells[self.cell_index(c)])
    }

    pub fn is_walkable(&self, c: TileCoord) -> bool {
        self.cell(c).map(|cell| !cell.streets.is_empty()).unwrap_or(false)
    }

    pub fn feature(&self, id: EntityId) -> Option<Feature<'_>> {
        self.by_id.get(&id).map(|slot| match *slot {
            Slot::Entity(i) => Feature::Entity(&self.entities[i]),
            Slot::Street(i) => Feature::Street(&self.streets[i]),
        })
    }

    pub fn street(&self, id: EntityId) -> Result<&Street, MapError> {
        match self.by_id.get(&id) {
            Some(Slot::Street(i)) => Ok(&self.streets[*i]),
            _ => Err(MapError::NoSuchStreet(id)),
        }
    }

    /// Checks the spatial index against one rebuilt from scratch.
    pub fn index_is_consistent(&self) -> bool {
        build_index(self.width, self.height, &self.entities, &self.streets) == self.cells
    }

    /// Ids of all entities (streets included) whose footprint intersects
    /// the Chebyshev ball of `radius` around `c`, sorted by id.
    pub fn entities_at(&self, c: TileCoord, radius: u32) -> Result<Vec<EntityId>, MapError> {
        if !self.contains(c) {
            return Err(MapError::OutOfGrid(c));
        }
        let col_lo = c.col.saturating_sub(radius);
        let row_lo = c.row.saturating_sub(radius);
        let col_hi = (c.col + radius).min(self.width - 1);
        let row_hi = (c.row + radius).min(self.height - 1);
        let mut out = Vec::new();
        for row in row_lo..=row_hi {
            for col in col_lo..=col_hi {
                let cell = &self.cells[self.cell_index(TileCoord { col, row })];
                out.extend_from_slice(&cell.entities);
                out.extend_from_slice(&cell.streets);
            }
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// The next `horizon` tiles along the pose's street in its travel
    /// direction, current tile excluded, clipped at the street end.
    pub fn path_ahead(&self, pose: &Pose, horizon: usize) -> Result<Vec<TileCoord>, MapError> {
        let street = self.street(pose.street)?;
        let mut out = Vec::with_capacity(horizon);
        let mut index = pose.index;
        while out.len() < horizon {
            match street.successor(index, pose.dir) {
                Some(next) => {
                    out.push(street.tiles[next]);
                    index = next;
                }
                None => break,
            }
        }
        Ok(out)
    }

    /// Every (street, position) pair whose tile list contains `c`, sorted.
    pub fn streets_through(&self, c: TileCoord) -> Result<Vec<(EntityId, usize)>, MapError> {
        let cell = self.cell(c)?;
        let mut out = Vec::new();
        for &sid in &cell.streets {
            let street = self.street(sid)?;
            out.extend(
                street
                    .tiles
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| **t == c)
                    .map(|(i, _)| (sid, i)),
            );
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Compass bearing in degrees, `[0, 360)`, from the tile at `index`
    /// to the next tile in `dir`. 0 is north (decreasing row), 90 east.
    pub fn bearing(&self, street: EntityId, index: usize, dir: TravelDir) -> Result<f64, MapError> {
        let s = self.street(street)?;
        if index >= s.len() {
            return Err(MapError::NoSuccessor { street, index, dir });
        }
        let next = s
            .successor(index, dir)
            .ok_or(MapError::NoSuccessor { street, index, dir })?;
        Ok(compass_bearing(s.tiles[index], s.tiles[next], self.tile_size_m))
    }
}

/// Bearing between two tile centers in meter space.
pub fn compass_bearing(from: TileCoord, to: TileCoord, tile_size_m: f64) -> f64 {
    let (x0, y0) = from.center_m(tile_size_m);
    let (x1, y1) = to.center_m(tile_size_m);
    let east = x1 - x0;
    let north = y0 - y1;
    let deg = east.atan2(north).to_degrees();
    if deg < 0.0 {
        deg + 360.0
    } else if deg >= 360.0 {
        deg - 360.0
    } else {
        deg
    }
}

fn build_index(width: u32, height: u32, entities: &[Entity], streets: &[Street]) -> Vec<TileCell> {
    let mut cells = vec![TileCell::default(); width as usize * height as usize];
    let at = |c: TileCoord| c.row as usize * width as usize + c.col as usize;
    for e in entities {
        for &t in &e.footprint {
            cells[at(t)].entities.push(e.id);
        }
    }
    for s in streets {
        for &t in &s.tiles {
            cells[at(t)].streets.push(s.id);
        }
    }
    for cell in &mut cells {
        cell.entities.sort_unstable();
        cell.entities.dedup();
        cell.streets.sort_unstable();
        cell.streets.dedup();
    }
    cells
}

// ---------------------------------------------------------------------------
// Native map format
// ---------------------------------------------------------------------------

/// Splits a record line into whitespace-separated fields, keeping quoted
/// strings (with `\"` and `\\` escapes) inside a single field.
pub(crate) fn split_fields(line: &str) -> Result<Vec<String>, String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut chars = line.chars();
    let mut in_quotes = false;
    while let Some(ch) = chars.next() {
        match ch {
            '"' => {
                in_quotes = !in_quotes;
                cur.push(ch);
            }
            '\\' if in_quotes => match chars.next() {
                Some(esc @ ('"' | '\\')) => {
                    cur.push('\\');
                    cur.push(esc);
                }
                Some(other) => return Err(format!("unknown escape \\{other}")),
                None => return Err("dangling escape".into()),
            },
            c if c.is_whitespace() && !in_quotes => {
                if !cur.is_empty() {
                    fields.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if in_quotes {
        return Err("unterminated quoted string".into());
    }
    if !cur.is_empty() {
        fields.push(cur);
    }
    Ok(fields)
}

/// Decodes a `"..."` field body.
pub(crate) fn unquote(s: &str) -> Result<String, String> {
    let inner = s
        .strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .ok_or_else(|| format!("expected a quoted string, got {s}"))?;
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some(e) => out.push(e),
                None => return Err("dangling escape".into()),
            }
        } else {
            out.push(c);
        }
    }
    Ok(out)
}

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

pub fn load_map(path: impl AsRef<Path>) -> Result<GridMap, MapError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| MapError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_map(&text)
}

/// Parses the line-delimited map format:
///
/// ```text
/// MAP <id> <width> <height>
/// ENTITY <id> <type> <is_building:0|1> [name="..."] [house="..."] tiles=(c,r);(c,r);...
/// STREET <id> [name="..."] tiles=(c,r);(c,r);...
/// ```
///
/// Blank lines and lines starting with `#` are ignored.
pub fn parse_map(text: &str) -> Result<GridMap, MapError> {
    let mut header: Option<(String, u32, u32)> = None;
    let mut entities = Vec::new();
    let mut entity_lines = Vec::new();
    let mut streets = Vec::new();
    let mut street_lines = Vec::new();

    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let perr = |message: String| MapError::Parse { line: line_no, message };
        let fields = split_fields(line).map_err(perr)?;
        match fields[0].as_str() {
            "MAP" => {
                if header.is_some() {
                    return Err(perr("duplicate MAP record".into()));
                }
                let [_, id, w, h] = fields.as_slice() else {
                    return Err(perr("MAP expects <id> <width> <height>".into()));
                };
                let w = w.parse().map_err(|_| perr(format!("bad width {w}")))?;
                let h = h.parse().map_err(|_| perr(format!("bad height {h}")))?;
                header = Some((id.clone(), w, h));
            }
            "ENTITY" => {
                if header.is_none() {
                    return Err(perr("ENTITY before MAP".into()));
                }
                if fields.len() < 5 {
                    return Err(perr("ENTITY expects <id> <type> <is_building> ... tiles=...".into()));
                }
                let id = fields[1]
                    .parse()
                    .map_err(|_| perr(format!("bad entity id {}", fields[1])))?;
                let entity_type = EntityType::from_name(&fields[2]);
                let is_building = match fields[3].as_str() {
                    "0" => false,
                    "1" => true,
                    other => return Err(perr(format!("is_building must be 0 or 1, got {other}"))),
                };
                let attrs = parse_attrs(&fields[4..], &["name", "house", "tiles"]).map_err(perr)?;
                let footprint = match attrs.tiles {
                    Some(t) => parse_tiles(&t).map_err(perr)?,
                    None => return Err(perr("ENTITY without tiles=".into())),
                };
                entities.push(Entity {
                    id: EntityId(id),
                    name: attrs.name,
                    entity_type,
                    is_building,
                    house_number: attrs.house,
                    footprint,
                });
                entity_lines.push(line_no);
            }
            "STREET" => {
                if header.is_none() {
                    return Err(perr("STREET before MAP".into()));
                }
                if fields.len() < 3 {
                    return Err(perr("STREET expects <id> ... tiles=...".into()));
                }
                let id = fields[1]
                    .parse()
                    .map_err(|_| perr(format!("bad street id {}", fields[1])))?;
                let attrs = parse_attrs(&fields[2..], &["name", "tiles"]).map_err(perr)?;
                let tiles = match attrs.tiles {
                    Some(t) => parse_tiles(&t).map_err(perr)?,
                    None => return Err(perr("STREET without tiles=".into())),
                };
                streets.push(Street {
                    id: EntityId(id),
                    name: attrs.name,
                    tiles,
                });
                street_lines.push(line_no);
            }
            other => return Err(perr(format!("unknown record kind {other:?}"))),
        }
    }
    let (id, width, height) = header.ok_or(MapError::Parse {
        line: 0,
        message: "missing MAP record".into(),
    })?;
    GridMap::build(id, width, height, entities, streets, |kind, i| {
        if kind == "ENTITY" {
            entity_lines[i]
        } else {
            street_lines[i]
        }
    })
}

#[derive(Default)]
struct Attrs {
    name: Option<String>,
    house: Option<String>,
    tiles: Option<String>,
}

fn parse_attrs(fields: &[String], allowed: &[&str]) -> Result<Attrs, String> {
    let mut attrs = Attrs::default();
    for f in fields {
        let (key, value) = f
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got {f}"))?;
        if !allowed.contains(&key) {
            return Err(format!("unknown attribute {key:?}"));
        }
        let slot = match key {
            "name" => &mut attrs.name,
            "house" => &mut attrs.house,
            _ => &mut attrs.tiles,
        };
        if slot.is_some() {
            return Err(format!("attribute {key:?} given twice"));
        }
        *slot = Some(if key == "tiles" {
            value.to_string()
        } else {
            unquote(value)?
        });
    }
    Ok(attrs)
}

/// Canonical serialization of a map in the native format.
pub fn write_map(map: &GridMap) -> String {
    let mut out = format!("MAP {} {} {}\n", map.id, map.width, map.height);
    for e in &map.entities {
        out.push_str(&format!(
            "ENTITY {} {} {}",
            e.id,
            e.entity_type,
            u8::from(e.is_building)
        ));
        if let Some(name) = &e.name {
            out.push_str(&format!(" name={}", quote(name)));
        }
        if let Some(house) = &e.house_number {
            out.push_str(&format!(" house={}", quote(house)));
        }
        out.push_str(&format!(" tiles={}\n", format_tiles(&e.footprint)));
    }
    for s in &map.streets {
        out.push_str(&format!("STREET {}", s.id));
        if let Some(name) = &s.name {
            out.push_str(&format!(" name={}", quote(name)));
        }
        out.push_str(&format!(" tiles={}\n", format_tiles(&s.tiles)));
    }
    out
}
