use std::sync::OnceLock;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use urbanav_core::abstraction::Vocabulary;
use urbanav_core::corpus::{Corpus, MapSet, Paragraph};
use urbanav_core::evaluator::FoldPlan;
use urbanav_core::executor::Action;
use urbanav_core::synth::{generate, SynthSpec};
use urbanav_neural::autodiff::{softmax, Fault, Tape};
use urbanav_neural::beam::{beam_search, greedy, length_penalty, score_sequence, SearchConfig};
use urbanav_neural::checkpoint::{self, CheckpointError};
use urbanav_neural::gradcheck::{gradient_check, linear_check};
use urbanav_neural::model::{Architecture, DecState, Model, ModelConfig, Variant};
use urbanav_neural::train::{build_vocabulary, fit, model_inputs, train, TrainError};

fn vocab(n: usize) -> Vocabulary {
    Vocabulary::from_tokens((0..n).map(|i| format!("w{i}")).collect())
}

fn jittered(config: ModelConfig, arch: Architecture, seed: u64) -> Model<f64> {
    let mut m: Model<f64> = Model::new(config, arch, vocab(12));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<_> = m.params.iter().map(|(id, _)| id).collect();
    for id in ids {
        for x in &mut m.params.get_mut(id).value {
            *x += rng.gen_range(-0.2..0.2);
        }
    }
    m
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Plain-loop LSTM over one direction, reading weights by name.
fn naive_direction(m: &Model<f64>, tokens: &[usize], dir: &str, reverse: bool) -> Vec<Vec<f64>> {
    let p = |n: &str| m.params.get(m.params.id(n).unwrap()).clone();
    let (emb, wx, wh, b) = (
        p("embed.tokens"),
        p(&format!("enc.{dir}.wx")),
        p(&format!("enc.{dir}.wh")),
        p(&format!("enc.{dir}.b")),
    );
    let h_dim = wh.cols;
    let mut h = vec![0.0; h_dim];
    let mut c = vec![0.0; h_dim];
    let mut out = vec![Vec::new(); tokens.len()];
    let order: Vec<usize> = if reverse {
        (0..tokens.len()).rev().collect()
    } else {
        (0..tokens.len()).collect()
    };
    for i in order {
        let x = &emb.value[tokens[i] * emb.cols..(tokens[i] + 1) * emb.cols];
        let mut z = vec![0.0; 4 * h_dim];
        for (r, zr) in z.iter_mut().enumerate() {
            let mut s = b.value[r];
            for (j, xj) in x.iter().enumerate() {
                s += wx.value[r * wx.cols + j] * xj;
            }
            for (j, hj) in h.iter().enumerate() {
                s += wh.value[r * h_dim + j] * hj;
            }
            *zr = s;
        }
        for k in 0..h_dim {
            let ig = sigmoid(z[k]);
            let fg = sigmoid(z[h_dim + k]);
            let gg = z[2 * h_dim + k].tanh();
            let og = sigmoid(z[3 * h_dim + k]);
            c[k] = fg * c[k] + ig * gg;
            h[k] = og * c[k].tanh();
        }
        out[i] = h.clone();
    }
    out
}

#[test]
fn encoder_matches_hand_unrolled_recurrence() {
    let m = jittered(ModelConfig::tiny(Variant::Cga), Variant::Cga.architecture(), 3);
    let tokens = [2, 5, 7, 1, 11, 3, 2];
    let mut t = Tape::new(&m.params);
    let enc = m.encode(&mut t, &tokens, &mut None);
    assert_eq!(enc.states.len(), 7);
    let fwd = naive_direction(&m, &tokens, "fwd", false);
    let bwd = naive_direction(&m, &tokens, "bwd", true);
    for i in 0..7 {
        let expected: Vec<f64> = fwd[i].iter().chain(&bwd[i]).copied().collect();
        for (a, b) in t.value(enc.states[i]).iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12, "state {i}: {a} vs {b}");
        }
    }
}

#[test]
fn attention_weights_and_action_distribution_sum_to_one() {
    for seed in 0..20 {
        let m = jittered(ModelConfig::tiny(Variant::Cgaew), Variant::Cgaew.architecture(), seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tokens: Vec<usize> = (0..rng.gen_range(1..9)).map(|_| rng.gen_range(0..12)).collect();
        let world: Vec<f64> = (0..2 * m.world_width)
            .map(|_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 })
            .collect();
        let mut t = Tape::new(&m.params);
        let enc = m.encode(&mut t, &tokens, &mut None);
        let w = t.input(world.clone());
        let (_, weights) = m.attend(&mut t, &enc, enc.s0, Some(w));
        assert!((t.value(weights).iter().sum::<f64>() - 1.0).abs() < 1e-6);
        let (lp, _) = m.decode_step(
            &mut t,
            &enc,
            None,
            DecState { s: enc.s0, c: enc.c0 },
            Some(&world),
            &mut None,
        );
        assert!((t.value(lp).iter().map(|x| x.exp()).sum::<f64>() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn zero_output_projection_gives_uniform_actions() {
    let mut m = jittered(ModelConfig::tiny(Variant::Cgae), Variant::Cgae.architecture(), 1);
    for id in [m.ids.out_w, m.ids.out_b] {
        m.params.get_mut(id).value.iter_mut().for_each(|x| *x = 0.0);
    }
    let mut t = Tape::new(&m.params);
    let enc = m.encode(&mut t, &[3, 4], &mut None);
    let (lp, _) = m.decode_step(
        &mut t,
        &enc,
        Some(Action::Walk),
        DecState { s: enc.s0, c: enc.c0 },
        None,
        &mut None,
    );
    for p in t.value(lp) {
        assert!((p.exp() - 0.2).abs() < 1e-12);
    }
}

#[test]
fn zero_world_weights_reproduce_cgae_attention_bit_for_bit() {
    let cfg = ModelConfig::tiny(Variant::Cgaew);
    let mut w: Model<f64> = Model::new(cfg.clone(), Variant::Cgaew.architecture(), vocab(12));
    w.freeze_world();
    let e: Model<f64> = Model::new(
        ModelConfig {
            variant: Variant::Cgae,
            ..cfg
        },
        Variant::Cgae.architecture(),
        vocab(12),
    );
    let tokens = [4, 9, 2, 2, 7];
    let world: Vec<f64> = (0..2 * w.world_width).map(|i| (i % 3 == 0) as u8 as f64).collect();
    let (mut tw, mut te) = (Tape::new(&w.params), Tape::new(&e.params));
    let (ew, ee) = (
        w.encode(&mut tw, &tokens, &mut None),
        e.encode(&mut te, &tokens, &mut None),
    );
    let wn = tw.input(world);
    let (_, aw) = w.attend(&mut tw, &ew, ew.s0, Some(wn));
    let (_, ae) = e.attend(&mut te, &ee, ee.s0, None);
    assert_eq!(tw.value(aw), te.value(ae));
}

#[test]
fn world_model_without_abstraction_and_world_weights_equals_cga() {
    let cfg = ModelConfig::tiny(Variant::Cga);
    let mut w: Model<f64> = Model::new(
        cfg.clone(),
        Architecture {
            abstraction: false,
            world: true,
        },
        vocab(12),
    );
    w.freeze_world();
    let g: Model<f64> = Model::new(cfg, Variant::Cga.architecture(), vocab(12));
    let tokens = [1, 3, 5, 7, 9, 11];
    let actions = [Action::TurnLeft, Action::Walk, Action::Walk, Action::End];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let worlds: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..2 * w.world_width).map(|_| rng.gen_range(0..2) as f64).collect())
        .collect();
    let (mut tw, mut tg) = (Tape::new(&w.params), Tape::new(&g.params));
    let (ew, eg) = (
        w.encode(&mut tw, &tokens, &mut None),
        g.encode(&mut tg, &tokens, &mut None),
    );
    let (mut sw, mut sg) = (DecState { s: ew.s0, c: ew.c0 }, DecState { s: eg.s0, c: eg.c0 });
    let mut prev = None;
    for (t, a) in actions.iter().enumerate() {
        let (lw, nw) = w.decode_step(&mut tw, &ew, prev, sw, Some(&worlds[t]), &mut None);
        let (lg, ng) = g.decode_step(&mut tg, &eg, prev, sg, None, &mut None);
        for (x, y) in tw.value(lw).iter().zip(tg.value(lg)) {
            assert!((x.exp() - y.exp()).abs() < 1e-9);
        }
        let argmax = |v: &[f64]| (0..5).max_by(|i, j| v[*i].total_cmp(&v[*j])).unwrap();
        assert_eq!(argmax(tw.value(lw)), argmax(tg.value(lg)));
        (sw, sg, prev) = (nw, ng, Some(*a));
    }
}

#[test]
fn gradients_match_finite_differences() {
    for variant in Variant::ALL {
        let r = gradient_check(&ModelConfig::tiny(variant), 11, None);
        assert!(r.max_rel_error < 1e-4, "{variant}: {r:?}");
        assert!(r.checked > 500);
    }
    let r = linear_check(3);
    assert!(r.max_rel_error < 1e-8, "{r:?}");
}

#[test]
fn corrupted_backward_rules_are_detected() {
    for fault in [Fault::TanhBackward, Fault::MulBackward] {
        let r = gradient_check(&ModelConfig::tiny(Variant::Cgaew), 11, Some(fault));
        assert!(r.max_rel_error > 1e-2, "{fault:?}: {r:?}");
    }
}

proptest! {
    #[test]
    fn softmax_is_a_shift_invariant_distribution(
        xs in prop::collection::vec(-30.0f64..30.0, 1..12),
        shift in -500.0f64..500.0,
    ) {
        let a = softmax(&xs);
        let shifted: Vec<f64> = xs.iter().map(|x| x + shift).collect();
        let b = softmax(&shifted);
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(*x >= 0.0);
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn length_penalty_grows_with_length(len in 0usize..200, alpha in 0.0f64..2.0) {
        prop_assert!(length_penalty(len + 1, alpha) >= length_penalty(len, alpha));
        prop_assert!((length_penalty(1, alpha) - 1.0).abs() < 1e-12);
    }
}

fn tiny_data() -> &'static (MapSet, Corpus) {
    static DATA: OnceLock<(MapSet, Corpus)> = OnceLock::new();
    DATA.get_or_init(|| generate(&SynthSpec::tiny(4)).unwrap())
}

fn fast_config(variant: Variant) -> ModelConfig {
    ModelConfig {
        variant,
        embed_dim: 12,
        encoder_hidden: 12,
        decoder_hidden: 16,
        attention_dim: 12,
        epochs: 3,
        min_count: 1,
        ..ModelConfig::default()
    }
}

#[test]
fn memorizes_a_single_example() {
    let (maps, corpus) = tiny_data();
    let p = corpus
        .paragraphs
        .iter()
        .find(|p| p.instructions[0].gold_actions == [Action::Walk, Action::Walk, Action::End])
        .or_else(|| {
            corpus
                .paragraphs
                .iter()
                .find(|p| p.instructions[0].gold_actions.len() > 1)
        })
        .unwrap();
    let one = Paragraph {
        instructions: vec![p.instructions[0].clone()],
        ..p.clone()
    };
    let cfg = ModelConfig {
        keep_prob: 1.0,
        epochs: 150,
        learning_rate: 0.01,
        ..fast_config(Variant::Cgaew)
    };
    let (model, log) = train(&cfg, &[&one], &[&one], maps).unwrap();
    assert!(log.rows.last().unwrap().train_nll < 0.01, "{:?}", log.rows.last());
    let map = maps.get(&one.map_id).unwrap();
    let (tokens, bindings) = model_inputs(&model, &one.instructions[0]);
    let d = greedy(
        &model,
        map,
        &one.start,
        &tokens,
        bindings,
        &SearchConfig {
            beam_width: 1,
            alpha: 0.6,
            max_len: 80,
        },
    );
    assert_eq!(d.actions, one.instructions[0].gold_actions);
}

#[test]
fn training_loss_decreases_over_first_epochs() {
    let (maps, corpus) = generate(&SynthSpec::default()).unwrap();
    let plan = FoldPlan::leave_one_out(&maps.ids(), 0.1);
    let split = plan.split(&plan.folds[0], &corpus, 1);
    let cfg = ModelConfig {
        epochs: 3,
        ..ModelConfig::default()
    };
    let (_, log) = train(&cfg, &split.train, &split.validation, &maps).unwrap();
    let nll: Vec<f64> = log.rows.iter().map(|r| r.train_nll).collect();
    assert!(nll[0] > nll[1] && nll[1] > nll[2], "{nll:?}");
    assert!(log.to_csv().starts_with("epoch,train_nll,val_sentence_acc\n"));
    assert_eq!(log.to_csv().lines().count(), 4);
}

#[test]
fn training_is_deterministic_and_seed_dependent() {
    let (maps, corpus) = tiny_data();
    let ps: Vec<&Paragraph> = corpus.paragraphs.iter().collect();
    let (train_set, val) = ps.split_at(ps.len() - 2);
    let cfg = fast_config(Variant::Cgaew);
    let (a, la) = train(&cfg, train_set, val, maps).unwrap();
    let (b, lb) = train(&cfg, train_set, val, maps).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(la, lb);
    let (c, _) = train(&ModelConfig { seed: 2, ..cfg }, train_set, val, maps).unwrap();
    assert_ne!(a.params, c.params);
    assert!(a.params.all_finite());
}

#[test]
fn divergence_names_epoch_and_batch() {
    let (maps, corpus) = tiny_data();
    let ps: Vec<&Paragraph> = corpus.paragraphs.iter().collect();
    let cfg = ModelConfig {
        learning_rate: f64::NAN,
        ..fast_config(Variant::Cga)
    };
    match train(&cfg, &ps, &[], maps) {
        Err(TrainError::Divergence { epoch, batch }) => assert_eq!((epoch, batch), (1, 1)),
        other => panic!("expected divergence, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn frozen_world_weights_stay_zero_during_training() {
    let (maps, corpus) = tiny_data();
    let ps: Vec<&Paragraph> = corpus.paragraphs.iter().collect();
    let cfg = fast_config(Variant::Cgaew);
    let mut m = Model::new(cfg.clone(), cfg.variant.architecture(), build_vocabulary(&cfg, &ps));
    m.freeze_world();
    let (m, _) = fit(m, &ps, &[], maps).unwrap();
    let ww = &m.params.get(m.ids.att_w.unwrap()).value;
    assert!(ww.iter().all(|x| *x == 0.0));
}

fn trained_tiny() -> &'static Model<f32> {
    static MODEL: OnceLock<Model<f32>> = OnceLock::new();
    MODEL.get_or_init(|| {
        let (maps, corpus) = tiny_data();
        let ps: Vec<&Paragraph> = corpus.paragraphs.iter().collect();
        train(&fast_config(Variant::Cgaew), &ps, &[], maps).unwrap().0
    })
}

#[test]
fn beam_search_contracts() {
    let (maps, corpus) = tiny_data();
    let model = trained_tiny();
    let sc = SearchConfig {
        beam_width: 4,
        alpha: 0.6,
        max_len: 30,
    };
    for p in &corpus.paragraphs {
        let map = maps.get(&p.map_id).unwrap();
        for (i, ins) in p.instructions.iter().enumerate() {
            let p0 = p.start_of(i);
            let (tokens, bindings) = model_inputs(model, ins);
            let g = greedy(model, map, &p0, &tokens, bindings, &sc);
            let w1 = beam_search(
                model,
                map,
                &p0,
                &tokens,
                bindings,
                &SearchConfig {
                    beam_width: 1,
                    ..sc.clone()
                },
            );
            assert_eq!(g.actions, w1.actions);
            let b = beam_search(model, map, &p0, &tokens, bindings, &sc);
            assert!(b.live_per_step.iter().all(|n| *n <= 4));
            assert!(b.score >= g.score - 1e-12);
            assert!(!b.all_pruned);
            assert_eq!(b.actions.last(), Some(&Action::End));
            let (lp, s) = score_sequence(model, map, &p0, &tokens, bindings, &b.actions, 0.6).unwrap();
            assert!((lp - b.log_prob).abs() < 1e-3 && (s - b.score).abs() < 1e-3);
            let raw = beam_search(
                model,
                map,
                &p0,
                &tokens,
                bindings,
                &SearchConfig {
                    alpha: 0.0,
                    ..sc.clone()
                },
            );
            assert_eq!(raw.score, raw.log_prob);
        }
    }
}

#[test]
fn checkpoints_round_trip() {
    let model = trained_tiny();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    checkpoint::save(model, &path).unwrap();
    let back = checkpoint::load(&path).unwrap();
    assert_eq!(back.params, model.params);
    assert_eq!(back.vocab.tokens(), model.vocab.tokens());
    assert_eq!(back.config, model.config);
    let bytes = checkpoint::to_bytes(model);
    assert!(bytes.starts_with(b"URBANAV-MODEL 1\n"));
    assert!(matches!(
        checkpoint::from_bytes(b"NOPE\n{}\n"),
        Err(CheckpointError::Magic)
    ));
    assert!(matches!(
        checkpoint::from_bytes(&bytes[..bytes.len() - 3]),
        Err(CheckpointError::Payload { .. })
    ));
}
