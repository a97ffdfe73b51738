//! Exact-route evaluation: success predicates, fold plans and reports.
//!
//! A predicted sentence route succeeds when its tiles form an
//! order-preserving subsequence of the gold tiles, its terminal tile is
//! within a Euclidean tolerance of the gold terminal, and (for single
//! sentences) its final heading is close to the gold heading. Paragraphs
//! are evaluated by chaining predicted final poses from sentence to
//! sentence.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Instruction, MapSet, Paragraph};
use crate::executor::{angular_distance, execute_lenient, Action, Pose, Route};
use crate::map::{GridMap, TileCoord};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("fold {fold} has no test items")]
    EmptyFold { fold: usize },
    #[error("map {0} is not loaded")]
    UnknownMap(String),
    #[error("policy could not be fitted: {0}")]
    Fit(String),
    #[error("report i/o: {0}")]
    Io(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessConfig {
    pub terminal_tolerance_tiles: f64,
    pub heading_tolerance_deg: f64,
    pub check_heading: bool,
}

impl Default for SuccessConfig {
    fn default() -> Self {
        SuccessConfig {
            terminal_tolerance_tiles: 5.0,
            heading_tolerance_deg: 45.0,
            check_heading: true,
        }
    }
}

impl SuccessConfig {
    pub fn paragraph(&self) -> SuccessConfig {
        SuccessConfig {
            check_heading: false,
            ..*self
        }
    }
}

/// True iff `pred` is a subsequence of `gold`.
pub fn contained_in_order(pred: &[TileCoord], gold: &[TileCoord]) -> bool {
    let mut g = gold.iter();
    pred.iter().all(|t| g.any(|x| x == t))
}

fn heading_ok(map: &GridMap, pred: &Pose, gold: &Pose, tol: f64) -> bool {
    match (pred.heading(map), gold.heading(map)) {
        (Ok(a), Ok(b)) => angular_distance(a, b) <= tol + 1e-9,
        _ => false,
    }
}

pub fn sentence_success(map: &GridMap, pred: &Route, gold: &Route, cfg: &SuccessConfig) -> bool {
    if pred.tiles.is_empty() || gold.tiles.is_empty() {
        return false;
    }
    contained_in_order(&pred.tiles, &gold.tiles)
        && pred.end().euclidean(gold.end()) <= cfg.terminal_tolerance_tiles
        && (!cfg.check_heading || heading_ok(map, &pred.final_pose, &gold.final_pose, cfg.heading_tolerance_deg))
}

/// Chains per-sentence predicted routes and applies the predicate to the
/// whole paragraph.
pub fn paragraph_success(map: &GridMap, preds: &[Route], gold: &Route, cfg: &SuccessConfig) -> bool {
    let Some(first) = preds.first() else {
        return false;
    };
    let mut chained = first.clone();
    for r in &preds[1..] {
        if r.tiles.first() != Some(&chained.end()) {
            return false;
        }
        chained.chain(r);
    }
    sentence_success(map, &chained, gold, &cfg.paragraph())
}

/// Σ acc·n / Σ n; `None` when the total size is zero.
pub fn weighted_average(folds: &[(f64, usize)]) -> Option<f64> {
    let n: usize = folds.iter().map(|f| f.1).sum();
    (n > 0).then(|| folds.iter().map(|(a, k)| a * *k as f64).sum::<f64>() / n as f64)
}

/// An instruction follower: maps one instruction at a pose to actions.
pub trait Follower: Send + Sync {
    fn follow(&self, map: &GridMap, pose: &Pose, instruction: &Instruction, seed: u64) -> Vec<Action>;
}

/// Builds a follower from training data.
pub trait PolicyFactory: Sync {
    fn policy(&self) -> String;
    fn variant(&self) -> String;
    fn fit(
        &self,
        train: &[&Paragraph],
        val: &[&Paragraph],
        maps: &MapSet,
        seed: u64,
    ) -> Result<Box<dyn Follower>, EvalError>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    pub train_maps: Vec<String>,
    pub test_map: String,
}

/// Leave-one-map-out folds; training paragraphs are split into train and
/// validation by a seeded shuffle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
    pub validation_fraction: f64,
}

pub struct FoldSplit<'a> {
    pub train: Vec<&'a Paragraph>,
    pub validation: Vec<&'a Paragraph>,
    pub test: Vec<&'a Paragraph>,
}

impl FoldPlan {
    pub fn leave_one_out(map_ids: &[String], validation_fraction: f64) -> FoldPlan {
        let folds = map_ids
            .iter()
            .enumerate()
            .map(|(i, test)| Fold {
                index: i + 1,
                train_maps: map_ids.iter().filter(|m| *m != test).cloned().collect(),
                test_map: test.clone(),
            })
            .collect();
        FoldPlan {
            folds,
            validation_fraction,
        }
    }

    pub fn split<'a>(&self, fold: &Fold, corpus: &'a Corpus, seed: u64) -> FoldSplit<'a> {
        let mut pool: Vec<&Paragraph> = corpus
            .paragraphs
            .iter()
            .filter(|p| fold.train_maps.contains(&p.map_id))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (fold.index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        pool.shuffle(&mut rng);
        let n_val = if pool.len() >= 2 {
            ((pool.len() as f64 * self.validation_fraction).round() as usize).clamp(1, pool.len() - 1)
        } else {
            0
        };
        let validation = pool.split_off(pool.len() - n_val);
        let test = corpus.paragraphs.iter().filter(|p| p.map_id == fold.test_map).collect();
        FoldSplit {
            train: pool,
            validation,
            test,
        }
    }
}

/// Seed of one instruction, independent of evaluation order.
pub fn instruction_seed(seed: u64, paragraph: u32, index: usize) -> u64 {
    let mut x = seed ^ ((paragraph as u64) << 32) ^ index as u64;
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub sentences: usize,
    pub sentence_hits: usize,
    pub paragraphs: usize,
    pub paragraph_hits: usize,
}

impl Counts {
    pub fn sent_acc(&self) -> f64 {
        percent(self.sentence_hits, self.sentences)
    }

    pub fn para_acc(&self) -> f64 {
        percent(self.paragraph_hits, self.paragraphs)
    }

    fn add(mut self, o: Counts) -> Counts {
        self.sentences += o.sentences;
        self.sentence_hits += o.sentence_hits;
        self.paragraphs += o.paragraphs;
        self.paragraph_hits += o.paragraph_hits;
        self
    }
}

fn percent(k: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * k as f64 / n as f64
    }
}

fn evaluate_paragraph(follower: &dyn Follower, map: &GridMap, p: &Paragraph, cfg: &SuccessConfig, seed: u64) -> Counts {
    let mut counts = Counts {
        paragraphs: 1,
        ..Counts::default()
    };
    let mut chained = Vec::with_capacity(p.instructions.len());
    let mut pose = p.start;
    for (i, ins) in p.instructions.iter().enumerate() {
        let s = instruction_seed(seed, p.id, i);
        let gold_start = p.start_of(i);
        let route = execute_lenient(map, &gold_start, &follower.follow(map, &gold_start, ins, s));
        counts.sentences += 1;
        counts.sentence_hits += usize::from(sentence_success(map, &route, &ins.gold_route, cfg));
        let chained_route = if pose == gold_start {
            route
        } else {
            execute_lenient(map, &pose, &follower.follow(map, &pose, ins, s))
        };
        pose = chained_route.final_pose;
        chained.push(chained_route);
    }
    counts.paragraph_hits = usize::from(paragraph_success(map, &chained, &p.gold_route(), cfg));
    counts
}

/// Sentence (gold start poses) and paragraph (chained predicted poses)
/// success counts of `follower` on `paragraphs`.
pub fn evaluate(
    follower: &dyn Follower,
    paragraphs: &[&Paragraph],
    maps: &MapSet,
    cfg: &SuccessConfig,
    seed: u64,
) -> Result<Counts, EvalError> {
    for p in paragraphs {
        maps.get(&p.map_id)
            .ok_or_else(|| EvalError::UnknownMap(p.map_id.clone()))?;
    }
    Ok(paragraphs
        .par_iter()
        .map(|p| evaluate_paragraph(follower, maps.get(&p.map_id).unwrap(), p, cfg, seed))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Counts::default(), Counts::add))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub policy: String,
    pub variant: String,
    /// Fold index, or `weighted` for the size-weighted average.
    pub fold: String,
    pub n_sentences: usize,
    pub n_paragraphs: usize,
    pub sent_acc: f64,
    pub para_acc: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub policy: String,
    pub variant: String,
    pub seeds: Vec<u64>,
    pub sent_mean: f64,
    pub sent_std_seeds: f64,
    pub sent_std_folds: f64,
    pub para_mean: f64,
    pub para_std_seeds: f64,
    pub para_std_folds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub code_version: String,
    pub config: BTreeMap<String, String>,
    pub rows: Vec<ReportRow>,
    pub summary: Vec<Summary>,
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

impl Report {
    pub fn new(config: BTreeMap<String, String>) -> Report {
        Report {
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            rows: Vec::new(),
            summary: Vec::new(),
        }
    }

    /// Weighted rows of one policy/variant, one per seed.
    pub fn weighted(&self, policy: &str, variant: &str) -> Vec<&ReportRow> {
        self.rows
            .iter()
            .filter(|r| r.policy == policy && r.variant == variant && r.fold == "weighted")
            .collect()
    }

    pub fn summary_of(&self, policy: &str, variant: &str) -> Option<&Summary> {
        self.summary.iter().find(|s| s.policy == policy && s.variant == variant)
    }

    pub fn merge(&mut self, other: Report) {
        self.rows.extend(other.rows);
        self.summary.extend(other.summary);
    }

    pub fn to_csv(&self) -> Result<String, EvalError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| EvalError::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| EvalError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| EvalError::Io(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String, EvalError> {
        serde_json::to_string_pretty(self).map_err(|e| EvalError::Io(e.to_string()))
    }
}

/// Runs every fold of `plan` for every seed: fit on the fold's training
/// maps, evaluate on its test map, then add size-weighted rows and a
/// summary across seeds.
pub fn run_protocol(
    corpus: &Corpus,
    maps: &MapSet,
    factory: &dyn PolicyFactory,
    plan: &FoldPlan,
    cfg: &SuccessConfig,
    seeds: &[u64],
    config: BTreeMap<String, String>,
) -> Result<Report, EvalError> {
    let mut report = Report::new(config);
    let (policy, variant) = (factory.policy(), factory.variant());
    let mut sent_weighted = Vec::new();
    let mut para_weighted = Vec::new();
    let mut sent_fold_std = Vec::new();
    let mut para_fold_std = Vec::new();
    for &seed in seeds {
        let mut per_fold = Vec::new();
        for fold in &plan.folds {
            let split = plan.split(fold, corpus, seed);
            if split.test.is_empty() {
                return Err(EvalError::EmptyFold { fold: fold.index });
            }
            let follower = factory.fit(&split.train, &split.validation, maps, seed)?;
            let counts = evaluate(follower.as_ref(), &split.test, maps, cfg, seed)?;
            report.rows.push(ReportRow {
                policy: policy.clone(),
                variant: variant.clone(),
                fold: fold.index.to_string(),
                n_sentences: counts.sentences,
                n_paragraphs: counts.paragraphs,
                sent_acc: round4(counts.sent_acc()),
                para_acc: round4(counts.para_acc()),
                seed,
            });
            per_fold.push(counts);
        }
        let sent: Vec<(f64, usize)> = per_fold.iter().map(|c| (c.sent_acc(), c.sentences)).collect();
        let para: Vec<(f64, usize)> = per_fold.iter().map(|c| (c.para_acc(), c.paragraphs)).collect();
        let s = weighted_average(&sent).unwrap_or(0.0);
        let p = weighted_average(&para).unwrap_or(0.0);
        sent_fold_std.push(std_dev(&sent.iter().map(|x| x.0).collect::<Vec<_>>()));
        para_fold_std.push(std_dev(&para.iter().map(|x| x.0).collect::<Vec<_>>()));
        sent_weighted.push(s);
        para_weighted.push(p);
        report.rows.push(ReportRow {
            policy: policy.clone(),
            variant: variant.clone(),
            fold: "weighted".into(),
            n_sentences: per_fold.iter().map(|c| c.sentences).sum(),
            n_paragraphs: per_fold.iter().map(|c| c.paragraphs).sum(),
            sent_acc: round4(s),
            para_acc: round4(p),
            seed,
        });
    }
    let mean = |xs: &[f64]| {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().sum::<f64>() / xs.len() as f64
        }
    };
    report.summary.push(Summary {
        policy,
        variant,
        seeds: seeds.to_vec(),
        sent_mean: round4(mean(&sent_weighted)),
        sent_std_seeds: round4(std_dev(&sent_weighted)),
        sent_std_folds: round4(mean(&sent_fold_std)),
        para_mean: round4(mean(&para_weighted)),
        para_std_seeds: round4(std_dev(&para_weighted)),
        para_std_folds: round4(mean(&para_fold_std)),
    });
    Ok(report)
}
