//! Adapters that plug trained models into the evaluation protocol.

use std::sync::Mutex;

use urbanav_core::corpus::{Instruction, MapSet, Paragraph};
use urbanav_core::evaluator::{EvalError, Follower, PolicyFactory};
use urbanav_core::executor::{Action, Pose};
use urbanav_core::map::GridMap;

use crate::beam::{beam_search, SearchConfig};
use crate::model::{Model, ModelConfig};
use crate::train::{model_inputs, search_config, train, TrainLog};

/// Follows instructions by beam search.
pub struct NeuralFollower {
    pub model: Model<f32>,
    pub search: SearchConfig,
}

impl NeuralFollower {
    pub fn new(model: Model<f32>) -> Self {
        let search = search_config(&model.config);
        NeuralFollower { model, search }
    }
}

impl Follower for NeuralFollower {
    fn follow(&self, map: &GridMap, pose: &Pose, instruction: &Instruction, _seed: u64) -> Vec<Action> {
        let (tokens, bindings) = model_inputs(&self.model, instruction);
        beam_search(&self.model, map, pose, &tokens, bindings, &self.search).actions
    }
}

/// Trains one model per fold. The protocol seed replaces the configured
/// seed; training logs are kept in fold order.
pub struct NeuralFactory {
    pub config: ModelConfig,
    pub logs: Mutex<Vec<TrainLog>>,
}

impl NeuralFactory {
    pub fn new(config: ModelConfig) -> Self {
        NeuralFactory {
            config,
            logs: Mutex::new(Vec::new()),
        }
    }
}

impl PolicyFactory for NeuralFactory {
    fn policy(&self) -> String {
        "neural".into()
    }

    fn variant(&self) -> String {
        self.config.variant.to_string()
    }

    fn fit(
        &self,
        train_set: &[&Paragraph],
        val: &[&Paragraph],
        maps: &MapSet,
        seed: u64,
    ) -> Result<Box<dyn Follower>, EvalError> {
        let config = ModelConfig {
            seed,
            ..self.config.clone()
        };
        let (model, log) = train(&config, train_set, val, maps).map_err(|e| EvalError::Fit(e.to_string()))?;
        self.logs.lock().expect("log lock").push(log);
        Ok(Box::new(NeuralFollower::new(model)))
    }
}
