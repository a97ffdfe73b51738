//! The CGA / CGAE / CGAEW network: a bidirectional LSTM encoder, additive
//! attention conditioned on the decoder state (and, for CGAEW, the world
//! state), and an LSTM decoder over the five actions.

use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use urbanav_core::abstraction::Vocabulary;
use urbanav_core::config::{ConfigError, FlatConfig};
use urbanav_core::executor::Action;
use urbanav_core::worldstate::WorldConfig;

use crate::autodiff::{NodeId, ParamId, ParamStore, Real, Tape};

pub const N_ACTIONS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Cga,
    Cgae,
    Cgaew,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Cga, Variant::Cgae, Variant::Cgaew];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Cga => "cga",
            Variant::Cgae => "cgae",
            Variant::Cgaew => "cgaew",
        }
    }

    pub fn architecture(self) -> Architecture {
        Architecture {
            abstraction: self != Variant::Cga,
            world: self == Variant::Cgaew,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cga" => Ok(Variant::Cga),
            "cgae" => Ok(Variant::Cgae),
            "cgaew" => Ok(Variant::Cgaew),
            _ => Err(format!("unknown variant {s:?} (expected cga, cgae or cgaew)")),
        }
    }
}

/// Which inputs the network sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    /// Read abstracted tokens instead of raw tokens.
    pub abstraction: bool,
    /// Feed the world state to attention and the decoder input.
    pub world: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub embed_dim: usize,
    /// Hidden size of each encoder direction.
    pub encoder_hidden: usize,
    pub decoder_hidden: usize,
    pub attention_dim: usize,
    /// Probability of keeping a unit under dropout.
    pub keep_prob: f64,
    pub beam_width: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub length_norm_alpha: f64,
    pub max_decode_len: usize,
    /// Training tokens rarer than this map to UNK.
    pub min_count: usize,
    pub seed: u64,
    pub world: WorldConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::Cgaew,
            embed_dim: 64,
            encoder_hidden: 64,
            decoder_hidden: 128,
            attention_dim: 64,
            keep_prob: 0.9,
            beam_width: 4,
            epochs: 30,
            learning_rate: 0.003,
            batch_size: 16,
            clip_norm: 5.0,
            length_norm_alpha: 0.6,
            max_decode_len: 80,
            min_count: 1,
            seed: 1,
            world: WorldConfig::default(),
        }
    }
}

/// Keys accepted by [`ModelConfig::apply`].
pub const CONFIG_KEYS: &[&str] = &[
    "variant",
    "embed_dim",
    "encoder_hidden",
    "decoder_hidden",
    "attention_dim",
    "keep_prob",
    "beam_width",
    "epochs",
    "learning_rate",
    "batch_size",
    "clip_norm",
    "length_norm_alpha",
    "max_decode_len",
    "min_count",
    "seed",
    "world_horizon",
    "world_radius",
    "world_slots",
];

impl ModelConfig {
    /// Tiny sizes for gradient checks and fast tests.
    pub fn tiny(variant: Variant) -> Self {
        ModelConfig {
            variant,
            embed_dim: 4,
            encoder_hidden: 4,
            decoder_hidden: 8,
            attention_dim: 6,
            world: WorldConfig {
                slots_per_type: 1,
                ..WorldConfig::default()
            },
            ..ModelConfig::default()
        }
    }

    /// Overrides fields from a flat config; unknown keys are left for
    /// the caller to check.
    pub fn apply(&mut self, cfg: &FlatConfig) -> Result<(), ConfigError> {
        cfg.apply("variant", &mut self.variant)?;
        cfg.apply("embed_dim", &mut self.embed_dim)?;
        cfg.apply("encoder_hidden", &mut self.encoder_hidden)?;
        cfg.apply("decoder_hidden", &mut self.decoder_hidden)?;
        cfg.apply("attention_dim", &mut self.attention_dim)?;
        cfg.apply("keep_prob", &mut self.keep_prob)?;
        cfg.apply("beam_width", &mut self.beam_width)?;
        cfg.apply("epochs", &mut self.epochs)?;
        cfg.apply("learning_rate", &mut self.learning_rate)?;
        cfg.apply("batch_size", &mut self.batch_size)?;
        cfg.apply("clip_norm", &mut self.clip_norm)?;
        cfg.apply("length_norm_alpha", &mut self.length_norm_alpha)?;
        cfg.apply("max_decode_len", &mut self.max_decode_len)?;
        cfg.apply("min_count", &mut self.min_count)?;
        cfg.apply("seed", &mut self.seed)?;
        cfg.apply("world_horizon", &mut self.world.horizon)?;
        cfg.apply("world_radius", &mut self.world.radius)?;
        cfg.apply("world_slots", &mut self.world.slots_per_type)?;
        Ok(())
    }

    /// Flat rendering for reports.
    pub fn to_map(&self) -> Vec<(String, String)> {
        let w = self.world;
        [
            ("variant", self.variant.to_string()),
            ("embed_dim", self.embed_dim.to_string()),
            ("encoder_hidden", self.encoder_hidden.to_string()),
            ("decoder_hidden", self.decoder_hidden.to_string()),
            ("attention_dim", self.attention_dim.to_string()),
            ("keep_prob", self.keep_prob.to_string()),
            ("beam_width", self.beam_width.to_string()),
            ("epochs", self.epochs.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("clip_norm", self.clip_norm.to_string()),
            ("length_norm_alpha", self.length_norm_alpha.to_string()),
            ("max_decode_len", self.max_decode_len.to_string()),
            ("min_count", self.min_count.to_string()),
            ("seed", self.seed.to_string()),
            ("world_horizon", w.horizon.to_string()),
            ("world_radius", w.radius.to_string()),
            ("world_slots", w.slots_per_type.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// Handles of every parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamIds {
    pub tokens: ParamId,
    pub actions: ParamId,
    pub enc_fwd: [ParamId; 3],
    pub enc_bwd: [ParamId; 3],
    pub init_w: ParamId,
    pub init_b: ParamId,
    pub att_h: ParamId,
    pub att_s: ParamId,
    pub att_w: Option<ParamId>,
    pub att_v: ParamId,
    pub dec_action: ParamId,
    pub dec_context: ParamId,
    pub dec_world: Option<ParamId>,
    pub dec_h: ParamId,
    pub dec_b: ParamId,
    pub out_w: ParamId,
    pub out_b: ParamId,
}

/// Shape and initialization of one tensor.
#[derive(Clone, Copy, Debug)]
enum Init {
    Glorot,
    Zero,
    /// LSTM gate bias: zero except a forget-gate block of ones.
    ForgetBias,
}

/// Parameter layout: `(name, rows, cols, init)` in storage order.
fn layout(
    c: &ModelConfig,
    arch: Architecture,
    vocab: usize,
    world_width: usize,
) -> Vec<(&'static str, usize, usize, Init)> {
    let (e, h, d, a) = (c.embed_dim, c.encoder_hidden, c.decoder_hidden, c.attention_dim);
    let w2 = 2 * world_width;
    let mut l = vec![
        ("embed.tokens", vocab, e, Init::Glorot),
        ("embed.actions", N_ACTIONS, e, Init::Glorot),
        ("enc.fwd.wx", 4 * h, e, Init::Glorot),
        ("enc.fwd.wh", 4 * h, h, Init::Glorot),
        ("enc.fwd.b", 1, 4 * h, Init::ForgetBias),
        ("enc.bwd.wx", 4 * h, e, Init::Glorot),
        ("enc.bwd.wh", 4 * h, h, Init::Glorot),
        ("enc.bwd.b", 1, 4 * h, Init::ForgetBias),
        ("dec.init.w", d, 2 * h, Init::Glorot),
        ("dec.init.b", 1, d, Init::Zero),
        ("att.wh", a, 2 * h, Init::Glorot),
        ("att.ws", a, d, Init::Glorot),
    ];
    if arch.world {
        l.push(("att.ww", a, w2, Init::Glorot));
    }
    l.extend([
        ("att.v", 1, a, Init::Glorot),
        ("dec.wx.action", 4 * d, e, Init::Glorot),
        ("dec.wx.context", 4 * d, 2 * h, Init::Glorot),
    ]);
    if arch.world {
        l.push(("dec.wx.world", 4 * d, w2, Init::Glorot));
    }
    l.extend([
        ("dec.wh", 4 * d, d, Init::Glorot),
        ("dec.b", 1, 4 * d, Init::ForgetBias),
        ("out.w", N_ACTIONS, d, Init::Glorot),
        ("out.b", 1, N_ACTIONS, Init::Zero),
    ]);
    l
}

/// Per-tensor RNG seed: the same `(seed, name)` always yields the same
/// values, whatever other tensors exist.
fn tensor_seed(seed: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn init_values<R: Real>(init: Init, rows: usize, cols: usize, seed: u64, name: &str) -> Vec<R> {
    match init {
        Init::Zero => vec![R::zero(); rows * cols],
        Init::ForgetBias => {
            let n = cols / 4;
            (0..cols)
                .map(|i| if (n..2 * n).contains(&i) { R::one() } else { R::zero() })
                .collect()
        }
        Init::Glorot => {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(tensor_seed(seed, name));
            let dist = Uniform::new_inclusive(-limit, limit);
            (0..rows * cols).map(|_| R::of(dist.sample(&mut rng))).collect()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model<R: Real> {
    pub config: ModelConfig,
    pub arch: Architecture,
    pub vocab: Vocabulary,
    /// Width of each world-state vector.
    pub world_width: usize,
    pub params: ParamStore<R>,
    pub ids: ParamIds,
}

/// Encoder output plus everything the decoder reuses at every step.
#[derive(Clone, Debug)]
pub struct Encoded {
    /// `[fwd_i; bwd_i]` per token.
    pub states: Vec<NodeId>,
    /// `W_h h_i` per token.
    pub keys: Vec<NodeId>,
    pub s0: NodeId,
    pub c0: NodeId,
}

/// Decoder recurrent state.
#[derive(Clone, Copy, Debug)]
pub struct DecState {
    pub s: NodeId,
    pub c: NodeId,
}

/// Dropout source; `None` disables dropout.
pub type DropoutRng<'a> = Option<&'a mut ChaCha8Rng>;

impl<R: Real> Model<R> {
    /// A freshly initialized model.
    pub fn new(config: ModelConfig, arch: Architecture, vocab: Vocabulary) -> Self {
        let world_width = config.world.width();
        let mut params = ParamStore::new();
        for (name, rows, cols, init) in layout(&config, arch, vocab.len(), world_width) {
            params.add(name, rows, cols, init_values(init, rows, cols, config.seed, name));
        }
        Self::from_params(config, arch, vocab, params).expect("fresh layout is consistent")
    }

    /// Wraps an existing parameter store, checking its layout.
    pub fn from_params(
        config: ModelConfig,
        arch: Architecture,
        vocab: Vocabulary,
        params: ParamStore<R>,
    ) -> Result<Self, String> {
        let world_width = config.world.width();
        let expected = layout(&config, arch, vocab.len(), world_width);
        if expected.len() != params.len() {
            return Err(format!("expected {} tensors, found {}", expected.len(), params.len()));
        }
        for (name, rows, cols, _) in expected {
            let id = params.id(name).ok_or_else(|| format!("missing tensor {name}"))?;
            let p = params.get(id);
            if (p.rows, p.cols) != (rows, cols) {
                return Err(format!(
                    "tensor {name} is {}x{}, expected {rows}x{cols}",
                    p.rows, p.cols
                ));
            }
        }
        let id = |n: &str| params.id(n).unwrap();
        let ids = ParamIds {
            tokens: id("embed.tokens"),
            actions: id("embed.actions"),
            enc_fwd: [id("enc.fwd.wx"), id("enc.fwd.wh"), id("enc.fwd.b")],
            enc_bwd: [id("enc.bwd.wx"), id("enc.bwd.wh"), id("enc.bwd.b")],
            init_w: id("dec.init.w"),
            init_b: id("dec.init.b"),
            att_h: id("att.wh"),
            att_s: id("att.ws"),
            att_w: params.id("att.ww"),
            att_v: id("att.v"),
            dec_action: id("dec.wx.action"),
            dec_context: id("dec.wx.context"),
            dec_world: params.id("dec.wx.world"),
            dec_h: id("dec.wh"),
            dec_b: id("dec.b"),
            out_w: id("out.w"),
            out_b: id("out.b"),
        };
        Ok(Model {
            config,
            arch,
            vocab,
            world_width,
            params,
            ids,
        })
    }

    /// Zeroes and freezes every world-state weight.
    pub fn freeze_world(&mut self) {
        for id in [self.ids.att_w, self.ids.dec_world].into_iter().flatten() {
            let p = self.params.get_mut(id);
            p.value.iter_mut().for_each(|x| *x = R::zero());
            p.frozen = true;
        }
    }

    pub fn cast<S: Real>(&self) -> Model<S> {
        Model {
            config: self.config.clone(),
            arch: self.arch,
            vocab: self.vocab.clone(),
            world_width: self.world_width,
            params: self.params.cast(),
            ids: self.ids.clone(),
        }
    }

    /// Token ids the model reads for an instruction.
    pub fn token_ids(&self, raw: &[String], abstracted: &[String]) -> Vec<usize> {
        self.vocab.encode(if self.arch.abstraction { abstracted } else { raw })
    }

    fn dropout(&self, tape: &mut Tape<R>, x: NodeId, rng: &mut DropoutRng) -> NodeId {
        let keep = self.config.keep_prob;
        match rng {
            Some(rng) if keep < 1.0 => {
                let scale = R::of(1.0 / keep);
                let mask = (0..tape.value(x).len())
                    .map(|_| if rng.gen_bool(keep) { scale } else { R::zero() })
                    .collect();
                tape.mask(x, mask)
            }
            _ => x,
        }
    }

    /// One LSTM step with gate order (input, forget, cell, output).
    /// `inputs` pairs each input weight block with its input.
    pub fn lstm_step(
        tape: &mut Tape<R>,
        inputs: &[(ParamId, NodeId)],
        wh: ParamId,
        b: ParamId,
        h: NodeId,
        c: NodeId,
    ) -> (NodeId, NodeId) {
        let n = tape.value(h).len();
        let mut terms: Vec<NodeId> = inputs.iter().map(|(w, x)| tape.matvec(*w, *x)).collect();
        terms.push(tape.matvec(wh, h));
        terms.push(tape.param(b));
        let z = tape.add_all(&terms);
        let zi = tape.slice(z, 0, n);
        let zf = tape.slice(z, n, n);
        let zg = tape.slice(z, 2 * n, n);
        let zo = tape.slice(z, 3 * n, n);
        let i = tape.sigmoid(zi);
        let f = tape.sigmoid(zf);
        let g = tape.tanh(zg);
        let o = tape.sigmoid(zo);
        let fc = tape.mul(f, c);
        let ig = tape.mul(i, g);
        let c2 = tape.add(fc, ig);
        let tc = tape.tanh(c2);
        let h2 = tape.mul(o, tc);
        (h2, c2)
    }

    /// Bidirectional encoding of `tokens`, plus attention keys and the
    /// initial decoder state `s0 = tanh(W [fwd_N; bwd_1] + b)`, `c0 = 0`.
    pub fn encode(&self, tape: &mut Tape<R>, tokens: &[usize], rng: &mut DropoutRng) -> Encoded {
        assert!(!tokens.is_empty(), "cannot encode an empty sentence");
        let h = self.config.encoder_hidden;
        let emb: Vec<NodeId> = tokens
            .iter()
            .map(|&t| {
                let e = tape.row(self.ids.tokens, t);
                self.dropout(tape, e, rng)
            })
            .collect();
        let run = |tape: &mut Tape<R>, order: &mut dyn Iterator<Item = usize>, w: &[ParamId; 3]| {
            let mut out = vec![None; emb.len()];
            let mut hs = tape.input(vec![R::zero(); h]);
            let mut cs = tape.input(vec![R::zero(); h]);
            for i in order {
                (hs, cs) = Self::lstm_step(tape, &[(w[0], emb[i])], w[1], w[2], hs, cs);
                out[i] = Some(hs);
            }
            out.into_iter().map(Option::unwrap).collect::<Vec<_>>()
        };
        let fwd = run(tape, &mut (0..emb.len()), &self.ids.enc_fwd);
        let bwd = run(tape, &mut (0..emb.len()).rev(), &self.ids.enc_bwd);
        let states: Vec<NodeId> = fwd.iter().zip(&bwd).map(|(f, b)| tape.concat(&[*f, *b])).collect();
        let keys = states.iter().map(|s| tape.matvec(self.ids.att_h, *s)).collect();
        let summary = tape.concat(&[*fwd.last().unwrap(), bwd[0]]);
        let lin = tape.matvec(self.ids.init_w, summary);
        let b = tape.param(self.ids.init_b);
        let pre = tape.add(lin, b);
        let s0 = tape.tanh(pre);
        let c0 = tape.input(vec![R::zero(); self.config.decoder_hidden]);
        Encoded { states, keys, s0, c0 }
    }

    /// Additive attention; returns `(context, weights)`.
    pub fn attend(&self, tape: &mut Tape<R>, enc: &Encoded, s: NodeId, world: Option<NodeId>) -> (NodeId, NodeId) {
        let mut q = tape.matvec(self.ids.att_s, s);
        if let (Some(w), Some(ww)) = (world, self.ids.att_w) {
            let t = tape.matvec(ww, w);
            q = tape.add(q, t);
        }
        let scores = tape.additive_scores(&enc.keys, q, self.ids.att_v);
        let weights = tape.softmax(scores);
        let ctx = tape.weighted_sum(weights, &enc.states);
        (ctx, weights)
    }

    /// One decoder step: attends with the previous state, feeds
    /// `[emb(prev); context; world]` to the LSTM and returns the action
    /// log-probabilities with the new state. `prev = None` is the start.
    pub fn decode_step(
        &self,
        tape: &mut Tape<R>,
        enc: &Encoded,
        prev: Option<Action>,
        state: DecState,
        world: Option<&[R]>,
        rng: &mut DropoutRng,
    ) -> (NodeId, DecState) {
        let world = match (self.arch.world, world) {
            (true, Some(w)) => {
                assert_eq!(w.len(), 2 * self.world_width, "world-state width");
                Some(tape.input(w.to_vec()))
            }
            (true, None) => panic!("this model needs a world state"),
            (false, _) => None,
        };
        let (ctx, _) = self.attend(tape, enc, state.s, world);
        let a = tape.row(self.ids.actions, prev.unwrap_or(Action::End).index());
        let a = self.dropout(tape, a, rng);
        let mut inputs = vec![(self.ids.dec_action, a), (self.ids.dec_context, ctx)];
        if let (Some(w), Some(dw)) = (world, self.ids.dec_world) {
            inputs.push((dw, w));
        }
        let (s, c) = Self::lstm_step(tape, &inputs, self.ids.dec_h, self.ids.dec_b, state.s, state.c);
        let sd = self.dropout(tape, s, rng);
        let lin = tape.matvec(self.ids.out_w, sd);
        let b = tape.param(self.ids.out_b);
        let logits = tape.add(lin, b);
        (tape.log_softmax(logits), DecState { s, c })
    }

    /// Teacher-forced negative log-likelihood of `actions`; `worlds[t]` is
    /// the `[here; ahead]` vector before action `t`.
    pub fn nll(
        &self,
        tape: &mut Tape<R>,
        tokens: &[usize],
        actions: &[Action],
        worlds: &[Vec<R>],
        rng: &mut DropoutRng,
    ) -> NodeId {
        let enc = self.encode(tape, tokens, rng);
        let mut state = DecState { s: enc.s0, c: enc.c0 };
        let mut prev = None;
        let mut terms = Vec::with_capacity(actions.len());
        for (t, &a) in actions.iter().enumerate() {
            let w = self.arch.world.then(|| worlds[t].as_slice());
            let (lp, st) = self.decode_step(tape, &enc, prev, state, w, rng);
            terms.push(tape.pick(lp, a.index()));
            state = st;
            prev = Some(a);
        }
        let total = tape.sum(&terms);
        tape.scale(total, -R::one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::from_tokens(
            ["<pad>", "<unk>", "walk", "to", "the", "light"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        )
    }

    #[test]
    fn variants_parse_and_map_to_architectures() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
        assert!(!Variant::Cga.architecture().abstraction);
        assert!(Variant::Cgae.architecture().abstraction && !Variant::Cgae.architecture().world);
        assert!(Variant::Cgaew.architecture().world);
    }

    #[test]
    fn initialization_is_per_tensor() {
        let c = ModelConfig::tiny(Variant::Cgaew);
        let a: Model<f64> = Model::new(c.clone(), Variant::Cgaew.architecture(), vocab());
        let b: Model<f64> = Model::new(c, Variant::Cgae.architecture(), vocab());
        for (_, p) in b.params.iter() {
            let q = a.params.get(a.params.id(&p.name).unwrap());
            assert_eq!(p.value, q.value, "{}", p.name);
        }
        assert_eq!(a.params.len(), b.params.len() + 2);
    }

    #[test]
    fn forget_gate_bias_is_one() {
        let m: Model<f32> = Model::new(ModelConfig::tiny(Variant::Cga), Variant::Cga.architecture(), vocab());
        let b = &m.params.get(m.ids.dec_b).value;
        let n = m.config.decoder_hidden;
        assert!(b[..n].iter().all(|x| *x == 0.0));
        assert!(b[n..2 * n].iter().all(|x| *x == 1.0));
    }

    #[test]
    fn one_token_sentence_gives_one_state() {
        let m: Model<f64> = Model::new(ModelConfig::tiny(Variant::Cga), Variant::Cga.architecture(), vocab());
        let mut t = Tape::new(&m.params);
        let enc = m.encode(&mut t, &[2], &mut None);
        assert_eq!(enc.states.len(), 1);
        assert_eq!(t.value(enc.states[0]).len(), 2 * m.config.encoder_hidden);
        let (_, w) = m.attend(&mut t, &enc, enc.s0, None);
        assert_eq!(t.value(w), &[1.0]);
    }

    #[test]
    fn config_round_trips_through_flat_text() {
        let mut c = ModelConfig::default();
        let text: String = ModelConfig::tiny(Variant::Cgae)
            .to_map()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        let flat = FlatConfig::parse(&text).unwrap();
        flat.check_keys(CONFIG_KEYS).unwrap();
        c.apply(&flat).unwrap();
        assert_eq!(c, ModelConfig::tiny(Variant::Cgae));
    }
}
