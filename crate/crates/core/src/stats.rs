//! Corpus statistics.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, MapSet};
use crate::executor::Action;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub maps: usize,
    pub paragraphs: usize,
    pub instructions: usize,
    pub vocabulary: usize,
    pub abstracted_vocabulary: usize,
    pub tokens_per_instruction: f64,
    pub instructions_per_paragraph: f64,
    pub entities_per_map: f64,
    pub named_entities_per_instruction: f64,
    pub tiles_per_sentence: f64,
    pub tiles_per_paragraph: f64,
    pub actions_per_instruction: f64,
    pub walks_per_instruction: f64,
}

fn mean(total: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        total as f64 / n as f64
    }
}

/// Tiles moved counts route length minus the start tile.
pub fn stats(corpus: &Corpus, maps: &MapSet) -> CorpusStats {
    let instructions: Vec<_> = corpus.paragraphs.iter().flat_map(|p| &p.instructions).collect();
    let n = instructions.len();
    let vocab: BTreeSet<&str> = instructions
        .iter()
        .flat_map(|i| i.tokens.iter().map(String::as_str))
        .collect();
    let abs_vocab: BTreeSet<&str> = instructions
        .iter()
        .flat_map(|i| i.abstracted.tokens.iter().map(String::as_str))
        .collect();
    let sum = |f: &dyn Fn(&crate::corpus::Instruction) -> usize| instructions.iter().map(|i| f(i)).sum::<usize>();
    let entities: usize = maps.iter().map(|m| m.entities().len() + m.streets().len()).sum();
    let para_tiles: usize = corpus
        .paragraphs
        .iter()
        .map(|p| {
            p.instructions
                .iter()
                .map(|i| i.gold_route.tiles.len() - 1)
                .sum::<usize>()
        })
        .sum();
    CorpusStats {
        maps: maps.len(),
        paragraphs: corpus.paragraphs.len(),
        instructions: n,
        vocabulary: vocab.len(),
        abstracted_vocabulary: abs_vocab.len(),
        tokens_per_instruction: mean(sum(&|i| i.tokens.len()), n),
        instructions_per_paragraph: mean(n, corpus.paragraphs.len()),
        entities_per_map: mean(entities, maps.len()),
        named_entities_per_instruction: mean(sum(&|i| i.abstracted.bindings.len()), n),
        tiles_per_sentence: mean(sum(&|i| i.gold_route.tiles.len() - 1), n),
        tiles_per_paragraph: mean(para_tiles, corpus.paragraphs.len()),
        actions_per_instruction: mean(sum(&|i| i.gold_actions.len()), n),
        walks_per_instruction: mean(
            sum(&|i| i.gold_actions.iter().filter(|a| **a == Action::Walk).count()),
            n,
        ),
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: [(&str, String); 13] = [
            ("maps", self.maps.to_string()),
            ("paragraphs", self.paragraphs.to_string()),
            ("instructions", self.instructions.to_string()),
            ("vocabulary", self.vocabulary.to_string()),
            ("abstracted vocabulary", self.abstracted_vocabulary.to_string()),
            ("tokens / instruction", format!("{:.2}", self.tokens_per_instruction)),
            (
                "instructions / paragraph",
                format!("{:.2}", self.instructions_per_paragraph),
            ),
            ("entities / map", format!("{:.2}", self.entities_per_map)),
            (
                "named entities / instruction",
                format!("{:.2}", self.named_entities_per_instruction),
            ),
            ("tiles moved / sentence", format!("{:.2}", self.tiles_per_sentence)),
            ("tiles moved / paragraph", format!("{:.2}", self.tiles_per_paragraph)),
            ("actions / instruction", format!("{:.2}", self.actions_per_instruction)),
            ("walks / instruction", format!("{:.2}", self.walks_per_instruction)),
        ];
        for (k, v) in rows {
            writeln!(f, "{k:<30}{v:>10}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_corpus_gives_zeros() {
        let s = stats(&Corpus::default(), &MapSet::default());
        assert_eq!(s, CorpusStats::default());
        assert!(s.to_string().contains("instructions"));
    }
}
