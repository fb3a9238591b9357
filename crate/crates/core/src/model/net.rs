use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::config::{ModelConfig, Variant};
use crate::model::experts::{expert_forward, ExpertOut, ExpertParams};
use crate::model::fusion::{fuse_stage1, fuse_stage2, top_k_mask, Stage1};
use crate::model::params::{init_rng, Bound, ParamStore};
use crate::numeric::{Tape, Tensor, Var};
use crate::scalar::Scalar;
use crate::text::{causal_cls_loss_tape, dropout_mask, position_table, CausalText, MaskedLabel, RoleEmbedding, Vocab};
use crate::gestalt::region_soft_iou_tape;

pub const END_TOKEN: &str = "<end>";

/// One question about one image, preprocessed for the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T> {
    /// `[R, f]` region descriptors.
    pub features: Tensor<T>,
    /// `[4, R]` proximity, similarity, closure and continuity maps.
    pub layers: Tensor<T>,
    /// Region the question refers to.
    pub query: usize,
    pub text: CausalText,
    /// Target answer ids ending with the end token; empty when unknown.
    pub answer: Vec<usize>,
    /// Per-region pixel counts inside / outside the answer object's mask.
    pub mask_inside: Vec<usize>,
    pub mask_outside: Vec<usize>,
}

impl<T: Scalar> Sample<T> {
    pub fn regions(&self) -> usize {
        self.features.shape()[0]
    }
}

/// Counterfactual edits applied inside the forward pass.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Edit {
    pub deleted_region: Option<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct ForwardOpts {
    /// Enables token dropout with this seed.
    pub dropout_seed: Option<u64>,
    pub edit: Edit,
    /// Overrides the configured intervention-layer switch.
    pub intervention_layers: Option<bool>,
    /// Training pass: causal weights stay dense unless the config asks
    /// for top-k selection during training too.
    pub training: bool,
}

/// Handles of the intermediate results of one forward pass.
#[derive(Clone, Debug)]
pub struct Encoded {
    /// `[1, R]`.
    pub prior: Var,
    /// `[1, 4]` layer gate (tower variants only).
    pub gate: Option<Var>,
    pub stage1: Stage1,
    /// `[1, R]` normalized, sparsified stage-2 weights.
    pub causal_weights: Var,
    pub fused: Var,
    pub hidden: Var,
    /// Residual branch outputs of the blocks with intervention layers.
    pub branches: Vec<Var>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossWeights {
    pub closure: f64,
    pub causal: f64,
}

/// Loss components of one sample.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub task: f64,
    pub closure: f64,
    pub causal: f64,
    pub total: f64,
}

#[derive(Clone, Copy, Debug)]
struct Ids {
    tok_emb: usize,
    role_emb: usize,
    text_w: usize,
    text_b: usize,
    region_w: usize,
    region_b: usize,
    gate_w: usize,
    gate_b: usize,
    attn_qt: usize,
    attn_qr: usize,
    attn_k: usize,
    w_v: usize,
    w_t: usize,
    w_c: usize,
    aw_q: usize,
    aw_k: usize,
    sharpness: usize,
    dec_w: usize,
    dec_b: usize,
    blocks: usize,
    ans_emb: usize,
    trunk_w: usize,
    role_cls_w: usize,
}

/// Text encoder, prior, two-stage fusion, residual decoder and experts.
#[derive(Clone, Debug)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub text_vocab: Vocab,
    /// Answer tokens; index 0 is the end token.
    pub answer_vocab: Vec<String>,
    pub feature_dim: usize,
    pub seed: u64,
    pub params: ParamStore<T>,
    /// Per-unit multipliers of the intervention layers, one `[1, width]`
    /// row per hosting block.
    pub dependency_scales: Vec<Tensor<T>>,
    ids: Option<Ids>,
}

const MAX_TOKENS: usize = 64;

impl<T: Scalar> Model<T> {
    pub fn new(
        config: ModelConfig,
        text_vocab: Vocab,
        answer_vocab: Vec<String>,
        feature_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if answer_vocab.first().map(String::as_str) != Some(END_TOKEN) {
            return Err(Error::Config(format!("answer vocabulary must start with {END_TOKEN}")));
        }
        let mut rng = init_rng(seed);
        let mut p = ParamStore::new();
        let (dt, dj, da, w) = (config.text_dim, config.joint_dim, config.attention_dim, config.decoder_width);
        let a = answer_vocab.len();
        let roles = RoleEmbedding::<T>::random(dt, seed.wrapping_add(1));
        let mut role_data = roles.e_cause.clone();
        role_data.extend_from_slice(&roles.e_effect);
        let ids = Ids {
            tok_emb: p.add_random("text.token_embedding", &[text_vocab.len(), dt], &mut rng)?,
            role_emb: p.add("text.role_embedding", Tensor::new(vec![2, dt], role_data)?)?,
            text_w: p.add_random("text.w", &[dt, dt], &mut rng)?,
            text_b: p.add_zeros("text.b", &[1, dt])?,
            region_w: p.add_random("region.w", &[feature_dim, dj], &mut rng)?,
            region_b: p.add_zeros("region.b", &[1, dj])?,
            gate_w: p.add_zeros("tower.gate_w", &[dt, 4])?,
            gate_b: p.add("tower.gate_b", Tensor::row(config.gate_init.iter().map(|&g| T::lit(g)).collect()))?,
            attn_qt: p.add_random("attention.q_text", &[dt, da], &mut rng)?,
            attn_qr: p.add_random("attention.q_region", &[dj, da], &mut rng)?,
            attn_k: p.add_random("attention.k", &[dj, da], &mut rng)?,
            w_v: p.add_random("fusion.w_v", &[dj, dj], &mut rng)?,
            // no shared text direction at init; it would favour background regions
            w_t: p.add_zeros("fusion.w_t", &[dt, dj])?,
            w_c: p.add_random("fusion.w_c", &[dt, dj], &mut rng)?,
            aw_q: p.add_random("fusion.attn_q", &[dt, da], &mut rng)?,
            aw_k: p.add_random("fusion.attn_k", &[dj, da], &mut rng)?,
            sharpness: p.add("fusion.log_sharpness", Tensor::new(vec![1, 1], vec![T::lit(config.causal_sharpness.ln())])?)?,
            dec_w: p.add_random("decoder.in_w", &[dj + dt, w], &mut rng)?,
            dec_b: p.add_zeros("decoder.in_b", &[1, w])?,
            blocks: p.len(),
            ans_emb: 0,
            trunk_w: 0,
            role_cls_w: 0,
        };
        let mut ids = ids;
        for b in 0..config.decoder_blocks {
            p.add_random(&format!("decoder.block{b}.w1"), &[w, w], &mut rng)?;
            p.add_zeros(&format!("decoder.block{b}.b1"), &[1, w])?;
            let w2 = p.add_random(&format!("decoder.block{b}.w2"), &[w, w], &mut rng)?;
            // small residual branches at init
            let scaled = p.get(w2).scale(T::lit(0.1));
            p.set(w2, scaled)?;
            p.add_zeros(&format!("decoder.block{b}.b2"), &[1, w])?;
        }
        ids.ans_emb = p.add_random("decoder.answer_embedding", &[a + 1, w], &mut rng)?;
        let h = (w / 2).max(1);
        ids.trunk_w = p.add_random("experts.trunk_w", &[w, h], &mut rng)?;
        p.add_zeros("experts.trunk_b", &[1, h])?;
        p.add_random("experts.causal_w", &[h, a], &mut rng)?;
        p.add_zeros("experts.causal_b", &[1, a])?;
        p.add_random("experts.stat_w", &[h, a], &mut rng)?;
        p.add_zeros("experts.stat_b", &[1, a])?;
        p.add_random("experts.gate_w", &[h, 1], &mut rng)?;
        p.add_zeros("experts.gate_b", &[1, 1])?;
        ids.role_cls_w = p.add_random("pretext.role_w", &[dt, 3], &mut rng)?;
        p.add_zeros("pretext.role_b", &[1, 3])?;
        let dependency_scales = vec![Tensor::full(&[1, w], T::one()); config.intervention_blocks];
        Ok(Self { config, text_vocab, answer_vocab, feature_dim, seed, params: p, dependency_scales, ids: Some(ids) })
    }

    /// A model without parameters; every forward pass fails.
    pub fn empty(config: ModelConfig) -> Self {
        Self {
            config,
            text_vocab: Vocab::new([]),
            answer_vocab: vec![END_TOKEN.to_string()],
            feature_dim: 0,
            seed: 0,
            params: ParamStore::new(),
            dependency_scales: Vec::new(),
            ids: None,
        }
    }

    /// Rebuilds a model from a parameter store with the standard layout.
    pub fn from_parts(
        config: ModelConfig,
        text_vocab: Vocab,
        answer_vocab: Vec<String>,
        feature_dim: usize,
        seed: u64,
        params: ParamStore<T>,
        dependency_scales: Vec<Tensor<T>>,
    ) -> Result<Self> {
        let mut m = Self::new(config, text_vocab, answer_vocab, feature_dim, seed)?;
        if m.params.names() != params.names() || m.params.shapes() != params.shapes() {
            return Err(Error::Data("parameter layout does not match the configuration".into()));
        }
        if dependency_scales.len() != m.dependency_scales.len()
            || dependency_scales.iter().any(|s| s.shape() != [1, m.config.decoder_width])
        {
            return Err(Error::Data("dependency scales do not match the configuration".into()));
        }
        m.params = params;
        m.dependency_scales = dependency_scales;
        Ok(m)
    }

    fn ids(&self) -> Result<Ids> {
        self.ids.ok_or_else(|| Error::Uninitialized("model parameters are not loaded".into()))
    }

    pub fn end_id(&self) -> usize {
        0
    }

    pub fn answer_id(&self, token: &str) -> Result<usize> {
        self.answer_vocab.iter().position(|t| t == token).ok_or_else(|| Error::not_found(format!("answer token {token:?}")))
    }

    /// Answer ids for a phrase, followed by the end token.
    pub fn answer_ids(&self, answer: &str) -> Result<Vec<usize>> {
        let mut ids: Vec<usize> = answer.split_whitespace().map(|t| self.answer_id(t)).collect::<Result<_>>()?;
        ids.push(self.end_id());
        Ok(ids)
    }

    pub fn answer_text(&self, ids: &[usize]) -> String {
        ids.iter()
            .filter(|&&i| i != self.end_id())
            .map(|&i| self.answer_vocab.get(i).map_or("?", String::as_str))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn check_sample(&self, s: &Sample<T>) -> Result<()> {
        let (r, f) = s.features.dims2()?;
        if f != self.feature_dim {
            return Err(Error::shape(format!("{f} region features, model expects {}", self.feature_dim)));
        }
        if r == 0 || s.layers.shape() != [4, r] {
            return Err(Error::shape(format!("layer maps {:?} for {r} regions", s.layers.shape())));
        }
        if s.query >= r {
            return Err(Error::not_found(format!("query region {} of {r}", s.query)));
        }
        if s.text.is_empty() || s.text.len() > MAX_TOKENS {
            return Err(Error::invalid(format!("question has {} tokens (1..={MAX_TOKENS})", s.text.len())));
        }
        Ok(())
    }

    /// `[n, text_dim]` token vectors.
    fn encode_text(&self, tape: &mut Tape<T>, b: &Bound, text: &CausalText, dropout: Option<u64>) -> Result<Var> {
        let ids = self.ids()?;
        let dt = self.config.text_dim;
        let n = text.len();
        let emb = tape.gather_rows(b.get(ids.tok_emb), &text.ids)?;
        let pe = tape.constant(position_table(n, dt));
        let zero = tape.constant(Tensor::zeros(&[1, dt]));
        let table = tape.concat(&[zero, b.get(ids.role_emb)], 0)?;
        let role = tape.gather_rows(table, &text.role_codes())?;
        let x = tape.add(emb, pe)?;
        let mut x = tape.add(x, role)?;
        if let Some(seed) = dropout {
            if self.config.text_dropout > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mask = dropout_mask::<T>(n, dt, &text.c_mask, self.config.text_dropout, &mut rng)?;
                let mask = tape.constant(mask);
                x = tape.mul(x, mask)?;
            }
        }
        let y = tape.matmul(x, b.get(ids.text_w))?;
        let y = tape.add_row(y, b.get(ids.text_b))?;
        Ok(tape.relu(y))
    }

    fn keep_mask(r: usize, edit: &Edit) -> Result<Option<Tensor<T>>> {
        match edit.deleted_region {
            None => Ok(None),
            Some(d) if d >= r => Err(Error::not_found(format!("region {d} of {r}"))),
            Some(d) => {
                let mut keep = vec![T::one(); r];
                keep[d] = T::zero();
                Ok(Some(Tensor::row(keep)))
            }
        }
    }

    fn renormalize(tape: &mut Tape<T>, w: Var) -> Var {
        let total = tape.sum(w);
        let total = tape.add_scalar(total, T::min_positive_value());
        let inv = tape.recip(total);
        tape.mul_scalar(w, inv).expect("scalar")
    }

    pub fn encode(&self, tape: &mut Tape<T>, b: &Bound, s: &Sample<T>, opts: &ForwardOpts) -> Result<Encoded> {
        let ids = self.ids()?;
        self.check_sample(s)?;
        let r = s.regions();
        let keep = Self::keep_mask(r, &opts.edit)?;
        let text_h = self.encode_text(tape, b, &s.text, opts.dropout_seed)?;

        let mut features = s.features.clone();
        if let Some(d) = opts.edit.deleted_region {
            for v in &mut features.data_mut()[d * self.feature_dim..(d + 1) * self.feature_dim] {
                *v = T::zero();
            }
        }
        let f = tape.constant(features);
        let h = tape.matmul(f, b.get(ids.region_w))?;
        let h = tape.add_row(h, b.get(ids.region_b))?;
        let region_h = tape.relu(h);

        let pool = tape.constant(Tensor::row(crate::model::fusion::summary_weights(&s.text.c_mask)));
        let ts = tape.matmul(pool, text_h)?;
        let scale = T::one() / T::from_usize_lossy(self.config.attention_dim).sqrt();

        let (mut prior, gate) = if self.config.variant.uses_tower() {
            let logits = tape.matmul(ts, b.get(ids.gate_w))?;
            let mut logits = tape.add_row(logits, b.get(ids.gate_b))?;
            let off = self.config.variant.disabled_layers();
            if off.iter().any(|&o| o) {
                let mask = off.iter().map(|&o| if o { T::neg_infinity() } else { T::zero() }).collect();
                let mask = tape.constant(Tensor::row(mask));
                logits = tape.add(logits, mask)?;
            }
            let gate = tape.softmax(logits);
            let layers = tape.constant(s.layers.clone());
            (tape.matmul(gate, layers)?, Some(gate))
        } else {
            let hq = tape.gather_rows(region_h, &[s.query])?;
            let qt = tape.matmul(ts, b.get(ids.attn_qt))?;
            let qr = tape.matmul(hq, b.get(ids.attn_qr))?;
            let q = tape.add(qt, qr)?;
            let k = tape.matmul(region_h, b.get(ids.attn_k))?;
            let kt = tape.transpose(k)?;
            let scores = tape.matmul(q, kt)?;
            let scores = tape.scale(scores, scale);
            (tape.softmax(scores), None)
        };
        if let Some(k) = &keep {
            let k = tape.constant(k.clone());
            prior = tape.mul(prior, k)?;
            prior = Self::renormalize(tape, prior);
        }

        let stage1 = fuse_stage1(tape, text_h, &s.text.c_mask, prior, region_h, b.get(ids.w_v), b.get(ids.w_t))?;

        let raw = if self.config.variant == Variant::AttentionWeights {
            let q = tape.matmul(ts, b.get(ids.aw_q))?;
            let k = tape.matmul(region_h, b.get(ids.aw_k))?;
            let kt = tape.transpose(k)?;
            let scores = tape.matmul(q, kt)?;
            let scores = tape.scale(scores, scale);
            tape.softmax(scores)
        } else {
            // cosine, so the prior's scale on the region vectors does not
            // saturate the softmax
            let u = tape.matmul(ts, b.get(ids.w_c))?;
            let u = unit_rows(tape, u)?;
            let v = unit_rows(tape, stage1.vectors)?;
            let ut = tape.transpose(u)?;
            let sc = tape.matmul(v, ut)?;
            let sc = tape.reshape(sc, vec![1, r])?;
            let k = tape.exp(b.get(ids.sharpness));
            let sc = tape.mul_scalar(sc, k)?;
            tape.softmax(sc)
        };
        let mut dense = raw;
        if let Some(k) = &keep {
            let k = tape.constant(k.clone());
            dense = tape.mul(dense, k)?;
            dense = Self::renormalize(tape, dense);
        }
        let causal_weights = if opts.training && !self.config.sparsify_in_training {
            dense
        } else {
            let kept = top_k_mask(tape.value(dense).data(), self.config.sparsify_k.min(r))?;
            let kept = tape.constant(Tensor::row(kept.iter().map(|&k| if k { T::one() } else { T::zero() }).collect()));
            let w = tape.mul(dense, kept)?;
            Self::renormalize(tape, w)
        };
        let col = tape.reshape(causal_weights, vec![r, 1])?;
        let fused = fuse_stage2(tape, &stage1, col)?;

        let x = tape.matmul(fused, b.get(ids.dec_w))?;
        let x = tape.add_row(x, b.get(ids.dec_b))?;
        let mut x = tape.relu(x);
        let layers_on = opts.intervention_layers.unwrap_or(self.config.intervention_layers);
        let first = self.config.first_intervention_block();
        let mut branches = Vec::new();
        for blk in 0..self.config.decoder_blocks {
            let base = ids.blocks + 4 * blk;
            let y = tape.matmul(x, b.get(base))?;
            let y = tape.add_row(y, b.get(base + 1))?;
            let y = tape.relu(y);
            let y = tape.matmul(y, b.get(base + 2))?;
            let mut y = tape.add_row(y, b.get(base + 3))?;
            if blk >= first {
                if layers_on {
                    let sc = tape.constant(self.dependency_scales[blk - first].clone());
                    y = tape.mul(y, sc)?;
                }
                branches.push(y);
            }
            x = tape.add(x, y)?;
        }
        Ok(Encoded { prior, gate, stage1, causal_weights, fused, hidden: x, branches })
    }

    fn expert_params(&self, b: &Bound) -> Result<ExpertParams> {
        let t = self.ids()?.trunk_w;
        Ok(ExpertParams {
            trunk_w: b.get(t),
            trunk_b: b.get(t + 1),
            causal_w: b.get(t + 2),
            causal_b: b.get(t + 3),
            stat_w: b.get(t + 4),
            stat_b: b.get(t + 5),
            gate_w: b.get(t + 6),
            gate_b: b.get(t + 7),
        })
    }

    /// Expert outputs for the next answer token after `prev`
    /// (`None` at the first step).
    pub fn step(&self, tape: &mut Tape<T>, b: &Bound, hidden: Var, prev: Option<usize>) -> Result<ExpertOut> {
        let ids = self.ids()?;
        let start = self.answer_vocab.len();
        let e = tape.gather_rows(b.get(ids.ans_emb), &[prev.unwrap_or(start)])?;
        let u = tape.add(hidden, e)?;
        let u = tape.relu(u);
        let p = self.expert_params(b)?;
        expert_forward(tape, &p, u, self.config.gate_override.map(T::lit))
    }

    /// Teacher-forced expert outputs along `tokens`.
    pub fn steps(&self, tape: &mut Tape<T>, b: &Bound, hidden: Var, tokens: &[usize]) -> Result<Vec<ExpertOut>> {
        let mut out = Vec::with_capacity(tokens.len());
        for t in 0..tokens.len() {
            let prev = if t == 0 { None } else { Some(tokens[t - 1]) };
            out.push(self.step(tape, b, hidden, prev)?);
        }
        Ok(out)
    }

    /// Role logits `[m, 3]` for the masked positions of a pretext text.
    pub fn pretext_logits(&self, tape: &mut Tape<T>, b: &Bound, text: &CausalText, labels: &[MaskedLabel]) -> Result<Var> {
        let ids = self.ids()?;
        let h = self.encode_text(tape, b, text, None)?;
        let pos: Vec<usize> = labels.iter().map(|l| l.position).collect();
        let rows = tape.gather_rows(h, &pos)?;
        let y = tape.matmul(rows, b.get(ids.role_cls_w))?;
        tape.add_row(y, b.get(ids.role_cls_w + 1))
    }

    /// Weighted training loss of one sample; returns the total node and its parts.
    pub fn loss(
        &self,
        tape: &mut Tape<T>,
        b: &Bound,
        s: &Sample<T>,
        weights: LossWeights,
        dropout_seed: Option<u64>,
        pretext: Option<(&CausalText, &[MaskedLabel])>,
    ) -> Result<(Var, LossParts)> {
        if s.answer.is_empty() {
            return Err(Error::invalid("sample has no target answer"));
        }
        let opts = ForwardOpts { dropout_seed, training: true, ..Default::default() };
        let enc = self.encode(tape, b, s, &opts)?;
        let outs = self.steps(tape, b, enc.hidden, &s.answer)?;
        let mut task: Option<Var> = None;
        for (o, &t) in outs.iter().zip(&s.answer) {
            let ce = tape.cross_entropy(o.mixed, t)?;
            task = Some(match task {
                Some(acc) => tape.add(acc, ce)?,
                None => ce,
            });
        }
        let task = tape.scale(task.expect("non-empty answer"), T::one() / T::from_usize_lossy(s.answer.len()));
        let mut parts = LossParts { task: tape.value(task).item()?.to_f64_lossy(), ..Default::default() };
        let mut total = task;
        if weights.closure > 0.0 {
            let c = region_soft_iou_tape(tape, enc.prior, &s.mask_inside, &s.mask_outside)?;
            parts.closure = tape.value(c).item()?.to_f64_lossy();
            let c = tape.scale(c, T::lit(weights.closure));
            total = tape.add(total, c)?;
        }
        if weights.causal > 0.0 {
            if let Some((text, labels)) = pretext {
                let logits = self.pretext_logits(tape, b, text, labels)?;
                if let Some(c) = causal_cls_loss_tape(tape, logits, &labels.iter().map(|l| l.role).collect::<Vec<_>>())? {
                    parts.causal = tape.value(c).item()?.to_f64_lossy();
                    let c = tape.scale(c, T::lit(weights.causal));
                    total = tape.add(total, c)?;
                }
            }
        }
        parts.total = tape.value(total).item()?.to_f64_lossy();
        Ok((total, parts))
    }

    /// Greedy answer ids (end token excluded).
    pub fn decode(&self, s: &Sample<T>, opts: &ForwardOpts) -> Result<Vec<usize>> {
        let mut tape = Tape::new();
        let b = self.params.bind(&mut tape);
        let enc = self.encode(&mut tape, &b, s, opts)?;
        let mut out = Vec::new();
        let mut prev = None;
        for _ in 0..self.config.max_answer_len {
            let o = self.step(&mut tape, &b, enc.hidden, prev)?;
            let logits = tape.value(o.mixed).data();
            let best = argmax(logits);
            if best == self.end_id() {
                break;
            }
            out.push(best);
            prev = Some(best);
        }
        Ok(out)
    }

    /// Probability of each of `tokens` under teacher forcing.
    pub fn token_probs(&self, s: &Sample<T>, tokens: &[usize], opts: &ForwardOpts) -> Result<(Vec<T>, Snapshot<T>)> {
        let mut tape = Tape::new();
        let b = self.params.bind(&mut tape);
        let enc = self.encode(&mut tape, &b, s, opts)?;
        let outs = self.steps(&mut tape, &b, enc.hidden, tokens)?;
        let probs = outs
            .iter()
            .zip(tokens)
            .map(|(o, &t)| crate::numeric::softmax(tape.value(o.mixed).data())[t])
            .collect();
        let snap = Snapshot {
            prior: tape.value(enc.prior).data().to_vec(),
            causal_weights: tape.value(enc.causal_weights).data().to_vec(),
            branches: enc.branches.iter().map(|&v| tape.value(v).data().to_vec()).collect(),
        };
        Ok((probs, snap))
    }
}

/// Values captured during a forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot<T> {
    pub prior: Vec<T>,
    pub causal_weights: Vec<T>,
    pub branches: Vec<Vec<T>>,
}

pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Rows scaled to unit length. Rows much shorter than `UNIT_FLOOR` shrink
/// smoothly towards zero instead of snapping to an arbitrary direction
/// (regions whose features are all cut by the ReLU land there).
const UNIT_FLOOR: f64 = 1e-2;

fn unit_rows<T: Scalar>(tape: &mut Tape<T>, a: Var) -> Result<Var> {
    let (_, d) = tape.value(a).dims2()?;
    let sq = tape.mul(a, a)?;
    let ones = tape.constant(Tensor::full(&[d, 1], T::one()));
    let n2 = tape.matmul(sq, ones)?;
    let n2 = tape.add_scalar(n2, T::lit(UNIT_FLOOR * UNIT_FLOOR));
    let ln = tape.ln(n2);
    let ln = tape.scale(ln, T::lit(-0.5));
    let inv = tape.exp(ln);
    tape.mul_rows(a, inv)
}
