//! Finite-difference verification of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use urbanav_core::abstraction::Vocabulary;
use urbanav_core::executor::Action;

use crate::autodiff::{Fault, Grads, ParamStore, Tape};
use crate::model::{Model, ModelConfig};

/// Central-difference step.
pub const STEP: f64 = 1e-4;

/// Gradients smaller than this are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// `name[index]` of the worst scalar.
    pub worst: String,
    pub checked: usize,
}

/// `|a - n| / max(|a|, |n|, REL_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares the analytic gradient of `loss` with central differences on
/// every scalar of `params`.
pub fn check_store(
    params: &ParamStore<f64>,
    fault: Option<Fault>,
    loss: impl Fn(&mut Tape<f64>) -> crate::autodiff::NodeId,
) -> GradCheck {
    let mut tape = Tape::new(params).with_fault(fault);
    let l = loss(&mut tape);
    let mut grads = Grads::zeros(params);
    tape.backward(l, &mut grads);
    drop(tape);
    let eval = |p: &ParamStore<f64>| {
        let mut t = Tape::new(p);
        let l = loss(&mut t);
        t.scalar(l)
    };
    let mut work = params.clone();
    let mut out = GradCheck {
        max_rel_error: 0.0,
        worst: String::new(),
        checked: 0,
    };
    for (id, p) in params.iter() {
        for k in 0..p.value.len() {
            let orig = p.value[k];
            work.get_mut(id).value[k] = orig + STEP;
            let up = eval(&work);
            work.get_mut(id).value[k] = orig - STEP;
            let down = eval(&work);
            work.get_mut(id).value[k] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let err = relative_error(grads.g[id.0][k], numeric);
            out.checked += 1;
            if err > out.max_rel_error {
                out.max_rel_error = err;
                out.worst = format!("{}[{k}]", p.name);
            }
        }
    }
    out
}

/// A random example for a tiny model: tokens, actions and sparse world
/// states.
fn random_example(model: &Model<f64>, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<Action>, Vec<Vec<f64>>) {
    let n = rng.gen_range(3..7);
    let tokens = (0..n).map(|_| rng.gen_range(1..model.vocab.len())).collect();
    let t = rng.gen_range(3..6);
    let mut actions: Vec<Action> = (0..t - 1).map(|_| Action::ALL[rng.gen_range(0..4)]).collect();
    actions.push(Action::End);
    let worlds = (0..t)
        .map(|_| {
            (0..2 * model.world_width)
                .map(|_| if rng.gen_bool(0.2) { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    (tokens, actions, worlds)
}

/// Perturbs every parameter so that no gradient is trivially zero.
fn jitter(store: &mut ParamStore<f64>, rng: &mut ChaCha8Rng) {
    let ids: Vec<_> = store.iter().map(|(id, _)| id).collect();
    for id in ids {
        for x in &mut store.get_mut(id).value {
            *x += rng.gen_range(-0.3..0.3);
        }
    }
}

/// Gradient check of the full network (dropout off) on one random
/// example. `fault` corrupts a backward rule for negative controls.
pub fn gradient_check(config: &ModelConfig, seed: u64, fault: Option<Fault>) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = Vocabulary::from_tokens((0..9).map(|i| format!("w{i}")).collect());
    let mut model: Model<f64> = Model::new(
        ModelConfig { seed, ..config.clone() },
        config.variant.architecture(),
        vocab,
    );
    jitter(&mut model.params, &mut rng);
    let (tokens, actions, worlds) = random_example(&model, &mut rng);
    let params = model.params.clone();
    check_store(&params, fault, |t| model.nll(t, &tokens, &actions, &worlds, &mut None))
}

/// Gradient check of `c · (W x + b)`, which is linear in every parameter.
pub fn linear_check(seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::<f64>::new();
    let mut rand_vec = |n: usize| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    let x = rand_vec(6);
    let c = rand_vec(4);
    let w = store.add("w", 4, 6, rand_vec(24));
    let b = store.add("b", 1, 4, rand_vec(4));
    check_store(&store.clone(), None, |t| {
        let xi = t.input(x.clone());
        let y = t.matvec(w, xi);
        let bi = t.param(b);
        let z = t.add(y, bi);
        let ci = t.input(c.clone());
        t.dot(z, ci)
    })
}
