//! Teacher-forced training with Adam, gradient clipping and dropout,
//! keeping the checkpoint with the best validation sentence accuracy.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use urbanav_core::abstraction::{Binding, Vocabulary};
use urbanav_core::corpus::{Instruction, MapSet, Paragraph};
use urbanav_core::evaluator::{sentence_success, SuccessConfig};
use urbanav_core::executor::{execute_lenient, step, Action, Pose};
use urbanav_core::map::GridMap;
use urbanav_core::worldstate;

use crate::autodiff::{Adam, Grads, Tape};
use crate::beam::{greedy, SearchConfig};
use crate::model::{Model, ModelConfig};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged (non-finite loss) at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },
    #[error("no training instructions")]
    Empty,
    #[error("paragraph {paragraph} refers to unknown map {map}")]
    UnknownMap { paragraph: u32, map: String },
    #[error("gold actions of paragraph {paragraph}, instruction {index} do not execute")]
    BadGold { paragraph: u32, index: usize },
}

/// One training example with its precomputed world states.
#[derive(Clone, Debug)]
pub struct Example {
    pub tokens: Vec<usize>,
    pub actions: Vec<Action>,
    /// `[here; ahead]` before each action (empty without world input).
    pub worlds: Vec<Vec<f32>>,
}

/// The tokens a model reads and the bindings its world state uses.
pub fn model_inputs<'a>(model: &Model<f32>, ins: &'a Instruction) -> (Vec<usize>, &'a [Binding]) {
    let tokens = model.token_ids(&ins.tokens, &ins.abstracted.tokens);
    let bindings: &[Binding] = if model.arch.abstraction {
        &ins.abstracted.bindings
    } else {
        &[]
    };
    (tokens, bindings)
}

/// World states along the gold action prefix.
pub fn gold_worlds(
    map: &GridMap,
    p0: &Pose,
    actions: &[Action],
    bindings: &[Binding],
    model: &Model<f32>,
) -> Option<Vec<Vec<f32>>> {
    let mut pose = *p0;
    let mut out = Vec::with_capacity(actions.len());
    for &a in actions {
        out.push(
            worldstate::compute(map, &pose, bindings, &model.config.world)
                .ok()?
                .concat(),
        );
        if a != Action::End {
            pose = step(map, &pose, a).ok()?;
        }
    }
    Some(out)
}

pub fn examples(model: &Model<f32>, paragraphs: &[&Paragraph], maps: &MapSet) -> Result<Vec<Example>, TrainError> {
    let mut out = Vec::new();
    for p in paragraphs {
        let map = maps.get(&p.map_id).ok_or_else(|| TrainError::UnknownMap {
            paragraph: p.id,
            map: p.map_id.clone(),
        })?;
        for (i, ins) in p.instructions.iter().enumerate() {
            let (tokens, bindings) = model_inputs(model, ins);
            let worlds = if model.arch.world {
                gold_worlds(map, &p.start_of(i), &ins.gold_actions, bindings, model).ok_or(TrainError::BadGold {
                    paragraph: p.id,
                    index: i,
                })?
            } else {
                Vec::new()
            };
            out.push(Example {
                tokens,
                actions: ins.gold_actions.clone(),
                worlds,
            });
        }
    }
    Ok(out)
}

/// Vocabulary over the training instructions as the variant reads them.
pub fn build_vocabulary(config: &ModelConfig, train: &[&Paragraph]) -> Vocabulary {
    let abstracted = config.variant.architecture().abstraction;
    let sentences = train.iter().flat_map(|p| &p.instructions).map(|ins| {
        if abstracted {
            &ins.abstracted.tokens
        } else {
            &ins.tokens
        }
    });
    Vocabulary::build(sentences, config.min_count)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    /// Mean per-instruction NLL over the epoch (with dropout).
    pub train_nll: f64,
    pub val_sentence_acc: f64,
    pub val_nll: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<EpochRow>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_nll,val_sentence_acc\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:.6},{:.4}", r.epoch, r.train_nll, r.val_sentence_acc);
        }
        s
    }
}

pub fn search_config(config: &ModelConfig) -> SearchConfig {
    SearchConfig {
        beam_width: config.beam_width,
        alpha: config.length_norm_alpha,
        max_len: config.max_decode_len,
    }
}

/// Greedy sentence accuracy (percent) and mean teacher-forced NLL.
pub fn validate(model: &Model<f32>, paragraphs: &[&Paragraph], maps: &MapSet, examples: &[Example]) -> (f64, f64) {
    let sc = search_config(&model.config);
    let cfg = SuccessConfig::default();
    let (mut hits, mut n) = (0usize, 0usize);
    for p in paragraphs {
        let Some(map) = maps.get(&p.map_id) else { continue };
        for (i, ins) in p.instructions.iter().enumerate() {
            let p0 = p.start_of(i);
            let (tokens, bindings) = model_inputs(model, ins);
            let d = greedy(model, map, &p0, &tokens, bindings, &sc);
            let route = execute_lenient(map, &p0, &d.actions);
            hits += usize::from(sentence_success(map, &route, &ins.gold_route, &cfg));
            n += 1;
        }
    }
    let acc = if n == 0 { 0.0 } else { 100.0 * hits as f64 / n as f64 };
    let nll = if examples.is_empty() {
        0.0
    } else {
        examples.iter().map(|e| example_nll(model, e)).sum::<f64>() / examples.len() as f64
    };
    (acc, nll)
}

fn example_nll(model: &Model<f32>, e: &Example) -> f64 {
    let mut tape = Tape::new(&model.params);
    let l = model.nll(&mut tape, &e.tokens, &e.actions, &e.worlds, &mut None);
    tape.scalar(l) as f64
}

/// Trains `model` in place order-deterministically and returns the
/// parameters of the best validation epoch.
pub fn fit(
    mut model: Model<f32>,
    train: &[&Paragraph],
    val: &[&Paragraph],
    maps: &MapSet,
) -> Result<(Model<f32>, TrainLog), TrainError> {
    let train_ex = examples(&model, train, maps)?;
    if train_ex.is_empty() {
        return Err(TrainError::Empty);
    }
    let val_ex = examples(&model, val, maps)?;
    let cfg = model.config.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7452_4149_4E00_0000);
    let mut adam = Adam::new(&model.params, cfg.learning_rate);
    let mut grads = Grads::zeros(&model.params);
    let mut order: Vec<usize> = (0..train_ex.len()).collect();
    let mut log = TrainLog::default();
    let mut best: Option<(f64, f64, Model<f32>)> = None;
    let batch_size = cfg.batch_size.max(1);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0f64;
        for (b, batch) in order.chunks(batch_size).enumerate() {
            grads.clear();
            let mut batch_loss = 0.0f64;
            for &i in batch {
                let e = &train_ex[i];
                let mut tape = Tape::new(&model.params);
                let loss = model.nll(&mut tape, &e.tokens, &e.actions, &e.worlds, &mut Some(&mut rng));
                batch_loss += tape.scalar(loss) as f64;
                tape.backward(loss, &mut grads);
            }
            if !batch_loss.is_finite() || !grads.all_finite() {
                return Err(TrainError::Divergence { epoch, batch: b + 1 });
            }
            total += batch_loss;
            grads.scale(1.0 / batch.len() as f32);
            let norm = grads.norm() as f64;
            if norm > cfg.clip_norm {
                grads.scale((cfg.clip_norm / norm) as f32);
            }
            adam.step(&mut model.params, &grads);
            if !model.params.all_finite() {
                return Err(TrainError::Divergence { epoch, batch: b + 1 });
            }
        }
        let (acc, vnll) = validate(&model, val, maps, &val_ex);
        log.rows.push(EpochRow {
            epoch,
            train_nll: total / train_ex.len() as f64,
            val_sentence_acc: acc,
            val_nll: vnll,
        });
        let better = match &best {
            None => true,
            Some((a, l, _)) => acc > *a || (acc == *a && vnll < *l),
        };
        if better {
            best = Some((acc, vnll, model.clone()));
            log.best_epoch = epoch;
        }
    }
    Ok((best.map(|b| b.2).unwrap_or(model), log))
}

/// Builds the vocabulary and a fresh model from `config`, then fits it.
pub fn train(
    config: &ModelConfig,
    train: &[&Paragraph],
    val: &[&Paragraph],
    maps: &MapSet,
) -> Result<(Model<f32>, TrainLog), TrainError> {
    let vocab = build_vocabulary(config, train);
    let model = Model::new(config.clone(), config.variant.architecture(), vocab);
    fit(model, train, val, maps)
}
