//! Core of the urban navigation workbench: tile-grid maps, the action
//! executor, entity abstraction, world-state features, corpora, the
//! synthetic generator, baselines and the evaluation protocol.

pub mod abstraction;
pub mod baselines;
pub mod config;
pub mod corpus;
pub mod evaluator;
pub mod executor;
pub mod map;
pub mod stats;
pub mod synth;
pub mod worldstate;

pub use abstraction::{AbstractedSentence, Binding, Lexicon, Variable, Vocabulary};
pub use corpus::{Corpus, Instruction, MapSet, Paragraph};
pub use executor::{execute, route_to_actions, Action, Pose, Route, TravelDir};
pub use map::{Entity, EntityId, EntityType, GridMap, Street, TileCoord};
pub use worldstate::{WorldConfig, WorldState};
