//! Entity abstraction: replace map-entity mentions with typed, numbered
//! variables such as `<SHOP_1>` and `<STREET_2>`.
//!
//! Mentions are found by greedy leftmost-longest matching against a
//! lexicon of the map's named streets and entities. Numbering is per type
//! and restarts with every sentence; a repeated mention of the same entity
//! reuses its variable.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::map::{EntityId, EntityType, GridMap};

#[derive(Debug, Error, PartialEq)]
pub enum AbstractionError {
    #[error("cannot tokenize empty text")]
    EmptyText,
    #[error("matches overlap or are out of order at token {0}")]
    OverlappingMatches(usize),
    #[error("variable {0} has no binding")]
    UnboundVariable(String),
    #[error("entity {0} is not on the map")]
    UnknownEntity(EntityId),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedSentence {
    pub raw: String,
    pub tokens: Vec<String>,
    /// Byte range of each token in `raw`.
    pub offsets: Vec<(usize, usize)>,
}

const SPLIT_PUNCT: &[char] = &['.', ',', ';', ':', '!', '?', '"', '(', ')', '[', ']', '{', '}'];

pub fn is_variable_token(tok: &str) -> bool {
    tok.parse::<Variable>().is_ok()
}

/// Lowercases, splits on whitespace and peels punctuation off word edges.
/// Intra-word symbols (`&`, `'`, `-`) stay inside their word; variable
/// tokens keep their case.
pub fn tokenize(text: &str) -> Result<TokenizedSentence, AbstractionError> {
    if text.trim().is_empty() {
        return Err(AbstractionError::EmptyText);
    }
    let mut tokens = Vec::new();
    let mut offsets = Vec::new();
    let mut push = |start: usize, end: usize| {
        let piece = &text[start..end];
        if is_variable_token(piece) {
            tokens.push(piece.to_string());
        } else {
            tokens.push(piece.to_lowercase());
        }
        offsets.push((start, end));
    };
    let mut pos = 0;
    for chunk in text.split_whitespace() {
        let start = pos + text[pos..].find(chunk).unwrap();
        let end = start + chunk.len();
        pos = end;
        if is_variable_token(chunk) {
            push(start, end);
            continue;
        }
        let mut lo = start;
        let mut hi = end;
        let mut leading = Vec::new();
        while let Some(c) = text[lo..hi].chars().next().filter(|c| SPLIT_PUNCT.contains(c)) {
            leading.push((lo, lo + c.len_utf8()));
            lo += c.len_utf8();
        }
        let mut trailing = Vec::new();
        while let Some(c) = text[lo..hi].chars().next_back().filter(|c| SPLIT_PUNCT.contains(c)) {
            trailing.push((hi - c.len_utf8(), hi));
            hi -= c.len_utf8();
        }
        for (a, b) in leading {
            push(a, b);
        }
        if lo < hi {
            push(lo, hi);
        }
        for (a, b) in trailing.into_iter().rev() {
            push(a, b);
        }
    }
    Ok(TokenizedSentence {
        raw: text.to_string(),
        tokens,
        offsets,
    })
}

/// Rebuilds lowercased text from tokens, with a single space wherever the
/// original had whitespace.
pub fn detokenize(s: &TokenizedSentence) -> String {
    let mut out = String::new();
    for (i, tok) in s.tokens.iter().enumerate() {
        if i > 0 && s.offsets[i].0 > s.offsets[i - 1].1 {
            out.push(' ');
        }
        out.push_str(tok);
    }
    out
}

/// Possessive and apostrophe stripping applied on both sides of matching.
pub fn normalize_token(tok: &str) -> String {
    let lower = tok.to_lowercase();
    let base = lower
        .strip_suffix("'s")
        .or_else(|| lower.strip_suffix("\u{2019}s"))
        .unwrap_or(&lower);
    let stripped: String = base.chars().filter(|c| *c != '\'' && *c != '\u{2019}').collect();
    if stripped.is_empty() {
        lower
    } else {
        stripped
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexiconEntry {
    pub entity: EntityId,
    pub entity_type: EntityType,
    pub tokens: Vec<String>,
    pub normalized: Vec<String>,
}

/// Name lexicon of a map: named streets and named entities.
#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    by_first: HashMap<String, Vec<usize>>,
}

impl Lexicon {
    pub fn from_map(map: &GridMap) -> Lexicon {
        let mut entries = Vec::new();
        for s in map.streets() {
            if let Some(name) = &s.name {
                entries.extend(entry(s.id, EntityType::Street, name));
            }
        }
        for e in map.entities() {
            if let Some(name) = &e.name {
                entries.extend(entry(e.id, e.entity_type, name));
            }
        }
        Lexicon::from_entries(entries)
    }

    pub fn from_entries(entries: Vec<LexiconEntry>) -> Lexicon {
        let mut by_first: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            by_first.entry(e.normalized[0].clone()).or_default().push(i);
        }
        Lexicon { entries, by_first }
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    /// Entries matching at `start`, in no particular order.
    pub fn matches_at<'a>(
        &'a self,
        tokens: &'a [String],
        normalized: &'a [String],
        start: usize,
    ) -> impl Iterator<Item = (usize, &'a LexiconEntry)> + 'a {
        self.by_first
            .get(&normalized[start])
            .into_iter()
            .flatten()
            .map(|&i| &self.entries[i])
            .filter(move |e| {
                let end = start + e.normalized.len();
                end <= normalized.len() && normalized[start..end] == e.normalized[..]
            })
            .map(move |e| {
                let exact = e.tokens.iter().zip(&tokens[start..]).filter(|(a, b)| a == b).count();
                (exact, e)
            })
    }
}

fn entry(entity: EntityId, entity_type: EntityType, name: &str) -> Option<LexiconEntry> {
    let tokens = tokenize(name).ok()?.tokens;
    let normalized = tokens.iter().map(|t| normalize_token(t)).collect();
    Some(LexiconEntry {
        entity,
        entity_type,
        tokens,
        normalized,
    })
}

/// A matched mention: tokens `start..end` refer to `entity`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMatch {
    pub start: usize,
    pub end: usize,
    pub entity: EntityId,
    pub entity_type: EntityType,
}

/// Greedy leftmost-longest matching. Length ties go to the entry with more
/// exactly-equal (pre-normalization) tokens, then to the lower entity id.
pub fn find_matches(tokens: &[String], lexicon: &Lexicon) -> Vec<EntityMatch> {
    let normalized: Vec<String> = tokens.iter().map(|t| normalize_token(t)).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let best = lexicon.matches_at(tokens, &normalized, i).max_by(|(xa, a), (xb, b)| {
            a.normalized
                .len()
                .cmp(&b.normalized.len())
                .then(xa.cmp(xb))
                .then(b.entity.cmp(&a.entity))
        });
        match best {
            Some((_, e)) => {
                let end = i + e.normalized.len();
                out.push(EntityMatch {
                    start: i,
                    end,
                    entity: e.entity,
                    entity_type: e.entity_type,
                });
                i = end;
            }
            None => i += 1,
        }
    }
    out
}

pub fn match_entities(s: &TokenizedSentence, map: &GridMap) -> Vec<EntityMatch> {
    find_matches(&s.tokens, &Lexicon::from_map(map))
}

/// A typed variable `<TYPE_k>`, `k ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Variable {
    pub entity_type: EntityType,
    pub k: usize,
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}_{}>", self.entity_type.variable_prefix(), self.k)
    }
}

impl FromStr for Variable {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s.strip_prefix('<').and_then(|s| s.strip_suffix('>')).ok_or(())?;
        let (prefix, k) = inner.rsplit_once('_').ok_or(())?;
        if k.is_empty() || !k.bytes().all(|b| b.is_ascii_digit()) {
            return Err(());
        }
        let k: usize = k.parse().map_err(|_| ())?;
        if k == 0 {
            return Err(());
        }
        let entity_type = EntityType::from_variable_prefix(prefix).ok_or(())?;
        Ok(Variable { entity_type, k })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub variable: Variable,
    pub entity: EntityId,
}

/// Binding table of one sentence, in order of first mention.
pub type BindingTable = Vec<Binding>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractedSentence {
    pub tokens: Vec<String>,
    pub bindings: BindingTable,
}

impl AbstractedSentence {
    pub fn entity_of(&self, variable: Variable) -> Option<EntityId> {
        self.bindings.iter().find(|b| b.variable == variable).map(|b| b.entity)
    }
}

/// Replaces each matched span with its variable.
pub fn abstract_sentence(tokens: &[String], matches: &[EntityMatch]) -> Result<AbstractedSentence, AbstractionError> {
    let mut next = 0;
    for m in matches {
        if m.start < next || m.end <= m.start || m.end > tokens.len() {
            return Err(AbstractionError::OverlappingMatches(m.start));
        }
        next = m.end;
    }
    let mut counters: BTreeMap<EntityType, usize> = BTreeMap::new();
    let mut assigned: HashMap<EntityId, Variable> = HashMap::new();
    let mut bindings = Vec::new();
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    for m in matches {
        out.extend_from_slice(&tokens[i..m.start]);
        let var = *assigned.entry(m.entity).or_insert_with(|| {
            let k = counters.entry(m.entity_type).or_insert(0);
            *k += 1;
            let v = Variable {
                entity_type: m.entity_type,
                k: *k,
            };
            bindings.push(Binding {
                variable: v,
                entity: m.entity,
            });
            v
        });
        out.push(var.to_string());
        i = m.end;
    }
    out.extend_from_slice(&tokens[i..]);
    Ok(AbstractedSentence { tokens: out, bindings })
}

/// Tokenize, match against the map lexicon, abstract.
pub fn abstract_text(
    text: &str,
    lexicon: &Lexicon,
) -> Result<(TokenizedSentence, AbstractedSentence), AbstractionError> {
    let s = tokenize(text)?;
    let matches = find_matches(&s.tokens, lexicon);
    let a = abstract_sentence(&s.tokens, &matches)?;
    Ok((s, a))
}

/// Substitutes each variable with its entity's name tokens.
pub fn deabstract(a: &AbstractedSentence, map: &GridMap) -> Result<Vec<String>, AbstractionError> {
    let mut out = Vec::new();
    for tok in &a.tokens {
        match tok.parse::<Variable>() {
            Ok(v) => {
                let id = a
                    .entity_of(v)
                    .ok_or_else(|| AbstractionError::UnboundVariable(tok.clone()))?;
                let name = map
                    .feature(id)
                    .and_then(|f| f.name())
                    .ok_or(AbstractionError::UnknownEntity(id))?;
                out.extend(tokenize(name)?.tokens);
            }
            Err(()) => out.push(tok.clone()),
        }
    }
    Ok(out)
}

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";

/// Closed token inventory. Index 0 is PAD, 1 is UNK.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub const PAD_ID: usize = 0;
    pub const UNK_ID: usize = 1;

    /// Every non-variable token seen at least `min_count` times, plus
    /// `<TYPE_1>..<TYPE_max>` for each variable type observed.
    pub fn build<I, S>(sentences: I, min_count: usize) -> Vocabulary
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[String]>,
    {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut max_k: BTreeMap<EntityType, usize> = BTreeMap::new();
        for s in sentences {
            for tok in s.as_ref() {
                match tok.parse::<Variable>() {
                    Ok(v) => {
                        let k = max_k.entry(v.entity_type).or_insert(0);
                        *k = (*k).max(v.k);
                    }
                    Err(()) => *counts.entry(tok.clone()).or_insert(0) += 1,
                }
            }
        }
        let mut tokens = vec![PAD.to_string(), UNK.to_string()];
        tokens.extend(
            counts
                .into_iter()
                .filter(|(_, c)| *c >= min_count.max(1))
                .map(|(t, _)| t),
        );
        for (ty, k) in max_k {
            tokens.extend((1..=k).map(|k| Variable { entity_type: ty, k }.to_string()));
        }
        Vocabulary::from_tokens(tokens)
    }

    pub fn from_tokens(tokens: Vec<String>) -> Vocabulary {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, tok: &str) -> usize {
        self.index.get(tok).copied().unwrap_or(Self::UNK_ID)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    /// Restores the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }
}
