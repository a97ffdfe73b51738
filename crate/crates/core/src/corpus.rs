//! Navigation corpora and their canonical text format.
//!
//! ```text
//! URBANAV-CORPUS 1
//! PARAGRAPH <id> map=<map id> start=<street>:<index>:<+1|-1>
//! INSTRUCTION text="Walk to Macy's."
//! TOKENS walk to macy's .
//! ABSTRACT walk to <SHOP_1> .
//! BINDINGS <SHOP_1>=17
//! ROUTE (3,4);(4,4) final=2:5:+1
//! ACTIONS WALK END
//! ```
//!
//! Paragraphs are separated by a blank line. Writing is canonical, so
//! `write(read(f)) == f` for any file this module wrote.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{AbstractedSentence, Binding, Variable};
use crate::executor::{execute, format_actions, parse_actions, route_to_actions, Action, Pose, Route};
use crate::map::{format_tiles, parse_tiles, quote, split_fields, unquote, GridMap};

const MAGIC: &str = "URBANAV-CORPUS 1";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("paragraph {paragraph}, instruction {index}: {message}")]
    Invalid {
        paragraph: u32,
        index: usize,
        message: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub text: String,
    pub tokens: Vec<String>,
    pub abstracted: AbstractedSentence,
    pub gold_route: Route,
    pub gold_actions: Vec<Action>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Paragraph {
    pub id: u32,
    pub map_id: String,
    pub start: Pose,
    pub instructions: Vec<Instruction>,
}

impl Paragraph {
    /// Start pose of instruction `i`: the paragraph start, then each gold
    /// instruction's final pose.
    pub fn start_of(&self, i: usize) -> Pose {
        if i == 0 {
            self.start
        } else {
            self.instructions[i - 1].gold_route.final_pose
        }
    }

    /// The whole gold route of the paragraph.
    pub fn gold_route(&self) -> Route {
        let mut route = self.instructions[0].gold_route.clone();
        for ins in &self.instructions[1..] {
            route.chain(&ins.gold_route);
        }
        route
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub paragraphs: Vec<Paragraph>,
}

impl Corpus {
    pub fn n_instructions(&self) -> usize {
        self.paragraphs.iter().map(|p| p.instructions.len()).sum()
    }

    pub fn for_map<'a>(&'a self, map_id: &'a str) -> impl Iterator<Item = &'a Paragraph> + 'a {
        self.paragraphs.iter().filter(move |p| p.map_id == map_id)
    }

    /// Checks chaining and that every gold route round-trips through
    /// route_to_actions/execute and matches the stored actions.
    pub fn validate(&self, maps: &MapSet) -> Result<(), CorpusError> {
        for p in &self.paragraphs {
            let invalid = |index: usize, message: String| CorpusError::Invalid {
                paragraph: p.id,
                index,
                message,
            };
            let map = maps
                .get(&p.map_id)
                .ok_or_else(|| invalid(0, format!("unknown map {}", p.map_id)))?;
            if p.instructions.is_empty() {
                return Err(invalid(0, "paragraph without instructions".into()));
            }
            for (i, ins) in p.instructions.iter().enumerate() {
                let start = p.start_of(i);
                let actions = route_to_actions(map, &start, &ins.gold_route).map_err(|e| invalid(i, e.to_string()))?;
                let replay = execute(map, &start, &actions).map_err(|e| invalid(i, e.to_string()))?;
                if replay.tiles != ins.gold_route.tiles {
                    return Err(invalid(i, "gold route does not round-trip".into()));
                }
                let stored = execute(map, &start, &ins.gold_actions).map_err(|e| invalid(i, e.to_string()))?;
                if stored != ins.gold_route {
                    return Err(invalid(i, "gold actions do not reproduce the gold route".into()));
                }
            }
        }
        Ok(())
    }
}

/// Maps by id, in insertion order.
#[derive(Clone, Debug, Default)]
pub struct MapSet {
    maps: Vec<GridMap>,
}

impl MapSet {
    pub fn new(maps: Vec<GridMap>) -> MapSet {
        MapSet { maps }
    }

    pub fn get(&self, id: &str) -> Option<&GridMap> {
        self.maps.iter().find(|m| m.id == id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.maps.iter().map(|m| m.id.clone()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &GridMap> {
        self.maps.iter()
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// Loads every `*.map` file in a directory, sorted by file name.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<MapSet, crate::map::MapError> {
        let dir = dir.as_ref();
        let io = |source| crate::map::MapError::Io {
            path: dir.display().to_string(),
            source,
        };
        let mut paths: Vec<_> = fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "map"))
            .collect();
        paths.sort();
        let maps = paths.iter().map(crate::map::load_map).collect::<Result<Vec<_>, _>>()?;
        Ok(MapSet::new(maps))
    }
}

fn format_bindings(bindings: &[Binding]) -> String {
    bindings
        .iter()
        .map(|b| format!("{}={}", b.variable, b.entity))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn write_corpus(corpus: &Corpus) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    for p in &corpus.paragraphs {
        out.push('\n');
        out.push_str(&format!("PARAGRAPH {} map={} start={}\n", p.id, p.map_id, p.start));
        for ins in &p.instructions {
            out.push_str(&format!("INSTRUCTION text={}\n", quote(&ins.text)));
            out.push_str(&line("TOKENS", &ins.tokens.join(" ")));
            out.push_str(&line("ABSTRACT", &ins.abstracted.tokens.join(" ")));
            out.push_str(&line("BINDINGS", &format_bindings(&ins.abstracted.bindings)));
            out.push_str(&format!(
                "ROUTE {} final={}\n",
                format_tiles(&ins.gold_route.tiles),
                ins.gold_route.final_pose
            ));
            out.push_str(&line("ACTIONS", &format_actions(&ins.gold_actions)));
        }
    }
    out
}

fn line(tag: &str, body: &str) -> String {
    if body.is_empty() {
        format!("{tag}\n")
    } else {
        format!("{tag} {body}\n")
    }
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    fs::write(path, write_corpus(corpus)).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(&text)
}

pub fn parse_corpus(text: &str) -> Result<Corpus, CorpusError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();
    match lines.next() {
        Some((_, l)) if l.trim() == MAGIC => {}
        other => {
            return Err(CorpusError::Parse {
                line: other.map(|x| x.0).unwrap_or(1),
                message: format!("missing {MAGIC:?} header"),
            })
        }
    }
    let mut corpus = Corpus::default();
    while let Some((n, l)) = lines.next() {
        let perr = |message: String| CorpusError::Parse { line: n, message };
        let (tag, rest) = l.split_once(' ').unwrap_or((l, ""));
        match tag {
            "PARAGRAPH" => {
                let f: Vec<&str> = rest.split_whitespace().collect();
                let [id, map, start] = f.as_slice() else {
                    return Err(perr("PARAGRAPH expects <id> map=... start=...".into()));
                };
                let id = id.parse().map_err(|_| perr(format!("bad paragraph id {id}")))?;
                let map_id = map
                    .strip_prefix("map=")
                    .ok_or_else(|| perr("expected map=".into()))?
                    .to_string();
                let start = start
                    .strip_prefix("start=")
                    .ok_or_else(|| perr("expected start=".into()))?
                    .parse()
                    .map_err(perr)?;
                corpus.paragraphs.push(Paragraph {
                    id,
                    map_id,
                    start,
                    instructions: Vec::new(),
                });
            }
            "INSTRUCTION" => {
                let p = corpus
                    .paragraphs
                    .last_mut()
                    .ok_or_else(|| perr("INSTRUCTION before PARAGRAPH".into()))?;
                let fields = split_fields(rest).map_err(perr)?;
                let [text_field] = fields.as_slice() else {
                    return Err(perr("INSTRUCTION expects text=\"...\"".into()));
                };
                let text = unquote(
                    text_field
                        .strip_prefix("text=")
                        .ok_or_else(|| perr("expected text=".into()))?,
                )
                .map_err(perr)?;
                let mut expect = |want: &str| -> Result<(usize, String), CorpusError> {
                    match lines.next() {
                        Some((n, l)) => {
                            let (tag, rest) = l.split_once(' ').unwrap_or((l, ""));
                            if tag == want {
                                Ok((n, rest.to_string()))
                            } else {
                                Err(CorpusError::Parse {
                                    line: n,
                                    message: format!("expected {want}, found {tag}"),
                                })
                            }
                        }
                        None => Err(CorpusError::Parse {
                            line: n,
                            message: format!("unexpected end of file, expected {want}"),
                        }),
                    }
                };
                let (_, tokens) = expect("TOKENS")?;
                let (_, abs) = expect("ABSTRACT")?;
                let (bn, bindings) = expect("BINDINGS")?;
                let (rn, route) = expect("ROUTE")?;
                let (an, actions) = expect("ACTIONS")?;
                let bindings = parse_bindings(&bindings).map_err(|message| CorpusError::Parse { line: bn, message })?;
                let gold_route = parse_route(&route).map_err(|message| CorpusError::Parse { line: rn, message })?;
                let gold_actions =
                    parse_actions(&actions).map_err(|message| CorpusError::Parse { line: an, message })?;
                p.instructions.push(Instruction {
                    text,
                    tokens: split_tokens(&tokens),
                    abstracted: AbstractedSentence {
                        tokens: split_tokens(&abs),
                        bindings,
                    },
                    gold_route,
                    gold_actions,
                });
            }
            other => return Err(perr(format!("unknown record {other:?}"))),
        }
    }
    Ok(corpus)
}

fn split_tokens(s: &str) -> Vec<String> {
    s.split(' ').filter(|t| !t.is_empty()).map(String::from).collect()
}

fn parse_bindings(s: &str) -> Result<Vec<Binding>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|item| {
            let (v, e) = item.split_once('=').ok_or_else(|| format!("bad binding {item:?}"))?;
            let variable: Variable = v.parse().map_err(|_| format!("bad variable {v:?}"))?;
            let entity = e.parse().map_err(|_| format!("bad entity id {e:?}"))?;
            Ok(Binding {
                variable,
                entity: crate::map::EntityId(entity),
            })
        })
        .collect()
}

fn parse_route(s: &str) -> Result<Route, String> {
    let (tiles, fin) = s.rsplit_once(' ').ok_or("ROUTE expects <tiles> final=<pose>")?;
    let final_pose = fin.strip_prefix("final=").ok_or("expected final=")?.parse()?;
    let tiles = parse_tiles(tiles)?;
    if tiles.is_empty() {
        return Err("empty route".into());
    }
    Ok(Route { tiles, final_pose })
}

/// Per-map instruction counts, handy for reports.
pub fn instructions_per_map(corpus: &Corpus) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for p in &corpus.paragraphs {
        *out.entry(p.map_id.clone()).or_insert(0) += p.instructions.len();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::TravelDir;
    use crate::map::{EntityId, EntityType, TileCoord};

    fn sample() -> Corpus {
        let start = Pose::new(EntityId(2), 0, TravelDir::Forward);
        let ins = Instruction {
            text: "Walk to \"Macy's\".".into(),
            tokens: vec!["walk".into(), "to".into(), "macy's".into(), ".".into()],
            abstracted: AbstractedSentence {
                tokens: vec!["walk".into(), "to".into(), "<SHOP_1>".into(), ".".into()],
                bindings: vec![Binding {
                    variable: Variable {
                        entity_type: EntityType::Shop,
                        k: 1,
                    },
                    entity: EntityId(17),
                }],
            },
            gold_route: Route {
                tiles: vec![TileCoord::new(0, 0), TileCoord::new(1, 0)],
                final_pose: Pose::new(EntityId(2), 1, TravelDir::Forward),
            },
            gold_actions: vec![Action::Walk, Action::End],
        };
        let turn = Instruction {
            text: "Turn around.".into(),
            tokens: vec!["turn".into(), "around".into(), ".".into()],
            abstracted: AbstractedSentence {
                tokens: vec!["turn".into(), "around".into(), ".".into()],
                bindings: vec![],
            },
            gold_route: Route {
                tiles: vec![TileCoord::new(1, 0)],
                final_pose: Pose::new(EntityId(2), 1, TravelDir::Backward),
            },
            gold_actions: vec![Action::TurnAround, Action::End],
        };
        Corpus {
            paragraphs: vec![Paragraph {
                id: 4,
                map_id: "m1".into(),
                start,
                instructions: vec![ins, turn],
            }],
        }
    }

    #[test]
    fn corpus_round_trips_byte_identically() {
        let c = sample();
        let text = write_corpus(&c);
        let back = parse_corpus(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(write_corpus(&back), text);
    }

    #[test]
    fn missing_header_is_an_error() {
        assert!(matches!(
            parse_corpus("PARAGRAPH 1 map=a start=1:0:+1\n"),
            Err(CorpusError::Parse { .. })
        ));
    }

    #[test]
    fn truncated_instruction_is_an_error() {
        let text = format!("{MAGIC}\nPARAGRAPH 1 map=a start=1:0:+1\nINSTRUCTION text=\"x\"\nTOKENS x\n");
        assert!(parse_corpus(&text).is_err());
    }

    #[test]
    fn start_poses_chain() {
        let c = sample();
        let p = &c.paragraphs[0];
        assert_eq!(p.start_of(1), p.instructions[0].gold_route.final_pose);
        assert_eq!(p.gold_route().tiles.len(), 2);
    }
}
