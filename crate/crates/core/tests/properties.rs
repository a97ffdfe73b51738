mod oracles;

use std::sync::OnceLock;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use oracles::*;
use urbanav_core::abstraction::{abstract_sentence, deabstract, find_matches, Lexicon};
use urbanav_core::corpus::{parse_corpus, write_corpus, Corpus, MapSet};
use urbanav_core::evaluator::{contained_in_order, sentence_success, weighted_average, SuccessConfig};
use urbanav_core::executor::{execute, route_to_actions, step, Action, Route, TravelDir};
use urbanav_core::map::{GridMap, TileCoord};
use urbanav_core::stats::stats;
use urbanav_core::synth::{generate, SynthSpec};
use urbanav_core::worldstate::{compute, WorldConfig};

fn synth() -> &'static (MapSet, Corpus) {
    static DATA: OnceLock<(MapSet, Corpus)> = OnceLock::new();
    DATA.get_or_init(|| generate(&SynthSpec::tiny(11)).unwrap())
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #[test]
    fn step_agrees_with_naive_interpreter(seed in any::<u64>()) {
        let mut r = rng(seed);
        let map = random_map(&mut r);
        for _ in 0..20 {
            let p = random_pose(&map, &mut r);
            let a = random_action(&mut r);
            prop_assert_eq!(step(&map, &p, a).ok(), naive_step(&map, &p, a));
        }
    }

    #[test]
    fn execute_agrees_with_naive_interpreter(seed in any::<u64>()) {
        let mut r = rng(seed);
        let map = random_map(&mut r);
        let p = random_pose(&map, &mut r);
        let mut actions: Vec<Action> = (0..r.gen_range(0..8)).map(|_| random_action(&mut r)).collect();
        if r.gen_bool(0.8) {
            actions.retain(|a| *a != Action::End);
            actions.push(Action::End);
        }
        match (execute(&map, &p, &actions), naive_execute(&map, &p, &actions)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "executor {:?} vs naive {:?}", a, b),
        }
    }

    #[test]
    fn route_round_trips_through_actions(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (maps, _) = synth();
        let map = maps.iter().collect::<Vec<_>>().choose(&mut r).copied().unwrap();
        let p = random_pose(map, &mut r);
        let (_, route) = random_route(map, &p, &mut r);
        let actions = route_to_actions(map, &p, &route).unwrap();
        prop_assert_eq!(execute(map, &p, &actions).unwrap(), route);
    }

    #[test]
    fn entities_at_matches_brute_force(seed in any::<u64>(), radius in 0u32..4) {
        let mut r = rng(seed);
        let map = random_map(&mut r);
        let c = TileCoord::new(r.gen_range(0..map.width), r.gen_range(0..map.height));
        prop_assert_eq!(map.entities_at(c, radius).unwrap(), naive_entities_at(&map, c, radius));
    }

    #[test]
    fn path_ahead_concatenates(seed in any::<u64>(), a in 0usize..6, b in 0usize..6) {
        let mut r = rng(seed);
        let map = random_map(&mut r);
        let p = random_pose(&map, &mut r);
        let whole = map.path_ahead(&p, a + b).unwrap();
        let first = map.path_ahead(&p, a).unwrap();
        let mut q = p;
        for _ in 0..first.len() {
            q = step(&map, &q, Action::Walk).unwrap();
        }
        let mut joined = first.clone();
        if first.len() == a {
            joined.extend(map.path_ahead(&q, b).unwrap());
        }
        prop_assert_eq!(whole, joined);
    }

    #[test]
    fn bearings_are_antisymmetric(seed in any::<u64>()) {
        let mut r = rng(seed);
        let map = random_map(&mut r);
        let s = map.streets().choose(&mut r).unwrap();
        let i = r.gen_range(0..s.len() - 1);
        let fwd = map.bearing(s.id, i, TravelDir::Forward).unwrap();
        let back = map.bearing(s.id, i + 1, TravelDir::Backward).unwrap();
        let d = (fwd - back).rem_euclid(360.0);
        prop_assert!((d - 180.0).abs() < 1e-9, "{} vs {}", fwd, back);
    }

    #[test]
    fn index_matches_records(seed in any::<u64>()) {
        let mut r = rng(seed);
        prop_assert!(random_map(&mut r).index_is_consistent());
    }

    #[test]
    fn worldstate_matches_brute_force_and_is_monotone(seed in any::<u64>(), radius in 0u32..3, horizon in 0usize..6) {
        let mut r = rng(seed);
        let (maps, corpus) = synth();
        let p = corpus.paragraphs.choose(&mut r).unwrap();
        let ins = p.instructions.choose(&mut r).unwrap();
        let map = maps.get(&p.map_id).unwrap();
        let pose = random_pose(map, &mut r);
        let cfg = WorldConfig { horizon, radius, slots_per_type: 4 };
        let ws = compute(map, &pose, &ins.abstracted.bindings, &cfg).unwrap();

        let tile = map.street(pose.street).unwrap().tiles[pose.index];
        let here = naive_entities_at(map, tile, radius);
        let mut ahead = Vec::new();
        let mut q = pose;
        for _ in 0..horizon {
            match naive_step(map, &q, Action::Walk) {
                Some(n) => {
                    q = n;
                    ahead.extend(naive_entities_at(map, map.street(q.street).unwrap().tiles[q.index], 0));
                }
                None => break,
            }
        }
        let expect = |ids: &[urbanav_core::map::EntityId]| {
            let mut v = vec![0.0f32; cfg.width()];
            for id in ids {
                v[map.feature(*id).unwrap().entity_type().index()] = 1.0;
            }
            for b in &ins.abstracted.bindings {
                if ids.contains(&b.entity) {
                    if let Some(s) = cfg.slot(b.variable) {
                        v[s] = 1.0;
                    }
                }
            }
            v
        };
        prop_assert_eq!(&ws.here, &expect(&here));
        prop_assert_eq!(&ws.ahead, &expect(&ahead));

        let wider = compute(map, &pose, &ins.abstracted.bindings, &WorldConfig { radius: radius + 1, horizon: horizon + 1, ..cfg }).unwrap();
        for (a, b) in ws.here.iter().zip(&wider.here).chain(ws.ahead.iter().zip(&wider.ahead)) {
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn segmentation_matches_brute_force(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (maps, _) = synth();
        let map = maps.iter().collect::<Vec<_>>().choose(&mut r).copied().unwrap();
        let lexicon = Lexicon::from_map(map);
        let tokens = constructed_sentence(&lexicon, &mut r);
        let got: Vec<_> = find_matches(&tokens, &lexicon).iter().map(|m| (m.start, m.end, m.entity)).collect();
        prop_assert_eq!(got, naive_segment(&tokens, &lexicon));
    }

    #[test]
    fn abstraction_is_idempotent_and_reversible(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (maps, _) = synth();
        let map = maps.iter().collect::<Vec<_>>().choose(&mut r).copied().unwrap();
        let lexicon = Lexicon::from_map(map);
        let tokens = constructed_sentence(&lexicon, &mut r);
        let a = abstract_sentence(&tokens, &find_matches(&tokens, &lexicon)).unwrap();
        let again = abstract_sentence(&a.tokens, &find_matches(&a.tokens, &lexicon)).unwrap();
        prop_assert_eq!(&again.tokens, &a.tokens);
        prop_assert_eq!(deabstract(&a, map).unwrap(), tokens);
    }

    #[test]
    fn success_is_reflexive(seed in any::<u64>()) {
        let mut r = rng(seed);
        let map = random_map(&mut r);
        let p = random_pose(&map, &mut r);
        let route = urbanav_core::executor::execute_lenient(&map, &p, &(0..6).map(|_| random_action(&mut r)).collect::<Vec<_>>());
        prop_assert!(sentence_success(&map, &route, &route, &SuccessConfig::default()));
    }

    #[test]
    fn success_is_monotone_in_tolerance(seed in any::<u64>(), tau in 0.0f64..8.0, extra in 0.0f64..8.0) {
        let mut r = rng(seed);
        let (pred, gold, map) = route_pair(&mut r);
        let lo = SuccessConfig { terminal_tolerance_tiles: tau, ..SuccessConfig::default() };
        let hi = SuccessConfig { terminal_tolerance_tiles: tau + extra, ..SuccessConfig::default() };
        if sentence_success(&map, &pred, &gold, &lo) {
            prop_assert!(sentence_success(&map, &pred, &gold, &hi));
        }
    }

    #[test]
    fn containment_matches_brute_force(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (ng, np) = (r.gen_range(1..8), r.gen_range(1..5));
        let gold = random_tiles(&mut r, ng, 4);
        let pred = random_tiles(&mut r, np, 4);
        prop_assert_eq!(contained_in_order(&pred, &gold), brute_subsequence(&pred, &gold));
    }

    #[test]
    fn weighted_average_is_bounded(folds in prop::collection::vec((0.0f64..=100.0, 1usize..1000), 1..6)) {
        let w = weighted_average(&folds).unwrap();
        let lo = folds.iter().map(|f| f.0).fold(f64::INFINITY, f64::min);
        let hi = folds.iter().map(|f| f.0).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(w >= lo - 1e-9 && w <= hi + 1e-9);
    }
}

/// Every way of choosing which positions of `pred` map to `gold`.
fn brute_subsequence(pred: &[TileCoord], gold: &[TileCoord]) -> bool {
    fn go(p: &[TileCoord], g: &[TileCoord]) -> bool {
        match p.split_first() {
            None => true,
            Some((x, rest)) => (0..g.len()).any(|i| g[i] == *x && go(rest, &g[i + 1..])),
        }
    }
    go(pred, gold)
}

fn constructed_sentence(lexicon: &Lexicon, r: &mut ChaCha8Rng) -> Vec<String> {
    let filler = ["walk", "to", "the", "and", "turn", "left", "past", ".", ","];
    let mut out = Vec::new();
    for _ in 0..r.gen_range(1..6) {
        if r.gen_bool(0.5) {
            out.push(filler.choose(r).unwrap().to_string());
        } else {
            let e = lexicon.entries().choose(r).unwrap();
            out.extend(e.tokens.iter().cloned());
        }
    }
    out
}

fn route_pair(r: &mut ChaCha8Rng) -> (Route, Route, GridMap) {
    let (maps, _) = synth();
    let map = maps.iter().collect::<Vec<_>>().choose(r).copied().unwrap().clone();
    let p = random_pose(&map, r);
    let (_, gold) = random_route(&map, &p, r);
    let (_, pred) = random_route(&map, &p, r);
    (pred, gold, map)
}

#[test]
fn corpus_file_round_trips_byte_identically() {
    let (maps, corpus) = synth();
    corpus.validate(maps).unwrap();
    let text = write_corpus(corpus);
    let back = parse_corpus(&text).unwrap();
    assert_eq!(&back, corpus);
    assert_eq!(write_corpus(&back), text);
}

#[test]
fn synthetic_instructions_deabstract_exactly() {
    let (maps, corpus) = synth();
    for p in &corpus.paragraphs {
        let map = maps.get(&p.map_id).unwrap();
        for ins in &p.instructions {
            assert_eq!(deabstract(&ins.abstracted, map).unwrap(), ins.tokens);
        }
    }
}

#[test]
fn tiles_moved_matches_recount() {
    let (maps, corpus) = synth();
    let s = stats(corpus, maps);
    let mut moved = 0usize;
    let mut n = 0usize;
    for p in &corpus.paragraphs {
        for (i, ins) in p.instructions.iter().enumerate() {
            let route = execute(maps.get(&p.map_id).unwrap(), &p.start_of(i), &ins.gold_actions).unwrap();
            moved += route.tiles.len() - 1;
            n += 1;
        }
    }
    assert!((s.tiles_per_sentence - moved as f64 / n as f64).abs() < 1e-12);
}
