//! Beam-search decoding interleaved with the executor: every hypothesis
//! carries its own pose, and hypotheses whose last action the executor
//! rejects are pruned.

use urbanav_core::abstraction::Binding;
use urbanav_core::executor::{step, Action, Pose};
use urbanav_core::map::GridMap;
use urbanav_core::worldstate;

use crate::autodiff::{Real, Tape};
use crate::model::{DecState, Model};

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub beam_width: usize,
    pub alpha: f64,
    pub max_len: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    /// Actions including the final END.
    pub actions: Vec<Action>,
    pub log_prob: f64,
    /// `log_prob / lp(T)`.
    pub score: f64,
    /// Set when no hypothesis survived and `[END]` was returned instead.
    pub all_pruned: bool,
    /// Live hypotheses entering each decoding step.
    pub live_per_step: Vec<usize>,
}

/// `((5 + T) / 6)^alpha`.
pub fn length_penalty(len: usize, alpha: f64) -> f64 {
    ((5.0 + len as f64) / 6.0).powf(alpha)
}

pub fn normalized_score(log_prob: f64, len: usize, alpha: f64) -> f64 {
    log_prob / length_penalty(len, alpha)
}

struct Hyp {
    actions: Vec<Action>,
    log_prob: f64,
    state: DecState,
    pose: Pose,
}

fn search<R: Real>(
    model: &Model<R>,
    map: &GridMap,
    p0: &Pose,
    tokens: &[usize],
    bindings: &[Binding],
    cfg: &SearchConfig,
) -> Decoded {
    let width = cfg.beam_width.max(1);
    let mut tape = Tape::new(&model.params);
    let enc = model.encode(&mut tape, tokens, &mut None);
    let mut live = vec![Hyp {
        actions: Vec::new(),
        log_prob: 0.0,
        state: DecState { s: enc.s0, c: enc.c0 },
        pose: *p0,
    }];
    let mut finished: Vec<(Vec<Action>, f64)> = Vec::new();
    let mut live_per_step = Vec::new();
    for t in 1..=cfg.max_len.max(1) {
        if live.is_empty() {
            break;
        }
        live_per_step.push(live.len());
        // (log_prob, parent, action, next pose or None when finished)
        let mut cands: Vec<(f64, usize, Action, Option<Pose>)> = Vec::new();
        let mut next_states = Vec::with_capacity(live.len());
        for (k, h) in live.iter().enumerate() {
            let world = if model.arch.world {
                match worldstate::compute(map, &h.pose, bindings, &model.config.world) {
                    Ok(w) => Some(w.concat().into_iter().map(|x| R::of(x as f64)).collect::<Vec<R>>()),
                    Err(_) => {
                        next_states.push(h.state);
                        continue;
                    }
                }
            } else {
                None
            };
            let (lp, st) = model.decode_step(
                &mut tape,
                &enc,
                h.actions.last().copied(),
                h.state,
                world.as_deref(),
                &mut None,
            );
            next_states.push(st);
            let lp = tape.value(lp);
            for a in Action::ALL {
                let score = h.log_prob + lp[a.index()].f64();
                if a == Action::End {
                    cands.push((score, k, a, None));
                } else if t < cfg.max_len {
                    if let Ok(p) = step(map, &h.pose, a) {
                        cands.push((score, k, a, Some(p)));
                    }
                }
            }
        }
        cands.sort_by(|x, y| {
            y.0.total_cmp(&x.0)
                .then(x.1.cmp(&y.1))
                .then(x.2.index().cmp(&y.2.index()))
        });
        cands.truncate(width);
        let mut next = Vec::with_capacity(width);
        for (score, k, a, pose) in cands {
            let mut actions = live[k].actions.clone();
            actions.push(a);
            match pose {
                None => finished.push((actions, score)),
                Some(pose) => next.push(Hyp {
                    actions,
                    log_prob: score,
                    state: next_states[k],
                    pose,
                }),
            }
        }
        live = next;
    }
    let best = finished
        .into_iter()
        .map(|(a, lp)| {
            let s = normalized_score(lp, a.len(), cfg.alpha);
            (a, lp, s)
        })
        .fold(None::<(Vec<Action>, f64, f64)>, |best, c| match best {
            Some(b) if b.2 >= c.2 => Some(b),
            _ => Some(c),
        });
    match best {
        Some((actions, log_prob, score)) => Decoded {
            actions,
            log_prob,
            score,
            all_pruned: false,
            live_per_step,
        },
        None => Decoded {
            actions: vec![Action::End],
            log_prob: f64::NEG_INFINITY,
            score: f64::NEG_INFINITY,
            all_pruned: true,
            live_per_step,
        },
    }
}

/// Greedy decoding: the most probable executable action at every step.
pub fn greedy<R: Real>(
    model: &Model<R>,
    map: &GridMap,
    p0: &Pose,
    tokens: &[usize],
    bindings: &[Binding],
    cfg: &SearchConfig,
) -> Decoded {
    search(
        model,
        map,
        p0,
        tokens,
        bindings,
        &SearchConfig {
            beam_width: 1,
            ..cfg.clone()
        },
    )
}

/// Length-normalized beam search. The greedy sequence competes with the
/// beam's finished hypotheses, so the result never scores below it.
pub fn beam_search<R: Real>(
    model: &Model<R>,
    map: &GridMap,
    p0: &Pose,
    tokens: &[usize],
    bindings: &[Binding],
    cfg: &SearchConfig,
) -> Decoded {
    let beam = search(model, map, p0, tokens, bindings, cfg);
    if cfg.beam_width <= 1 {
        return beam;
    }
    let g = greedy(model, map, p0, tokens, bindings, cfg);
    if g.score > beam.score || beam.all_pruned {
        Decoded {
            live_per_step: beam.live_per_step,
            ..g
        }
    } else {
        beam
    }
}

/// Scores a fixed action sequence under the model (teacher forcing, no
/// dropout), returning `(log_prob, normalized score)`.
pub fn score_sequence<R: Real>(
    model: &Model<R>,
    map: &GridMap,
    p0: &Pose,
    tokens: &[usize],
    bindings: &[Binding],
    actions: &[Action],
    alpha: f64,
) -> Option<(f64, f64)> {
    let mut worlds = Vec::new();
    let mut pose = *p0;
    for (i, &a) in actions.iter().enumerate() {
        if model.arch.world {
            let w = worldstate::compute(map, &pose, bindings, &model.config.world).ok()?;
            worlds.push(w.concat().into_iter().map(|x| R::of(x as f64)).collect());
        }
        if a != Action::End {
            pose = step(map, &pose, a).ok()?;
        } else if i + 1 != actions.len() {
            return None;
        }
    }
    let mut tape = Tape::new(&model.params);
    let nll = model.nll(&mut tape, tokens, actions, &worlds, &mut None);
    let lp = -tape.scalar(nll).f64();
    Some((lp, normalized_score(lp, actions.len(), alpha)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_alpha_is_no_penalty() {
        for t in 1..20 {
            assert_eq!(length_penalty(t, 0.0), 1.0);
        }
        assert_eq!(length_penalty(1, 0.6), 1.0);
        assert!(length_penalty(10, 0.6) > 1.0);
    }
}
