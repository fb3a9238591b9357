use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numeric::{Tape, Tensor, Var};
use crate::scalar::Scalar;
use crate::text::lexicon::{Role, TriggerLexicon, CAUSE_TAG, EFFECT_TAG, MASK_TAG};
use crate::text::tokenize::{assign_roles, detect_triggers, tokenize, wrap_causal_intent};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";

/// Lower-cased token vocabulary. Ids 0..5 are reserved for
/// `[PAD] [UNK] [CAUSE] [EFFECT] [MASK]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        let mut v = Self { tokens: Vec::new(), index: HashMap::new() };
        for w in [PAD, UNK, CAUSE_TAG, EFFECT_TAG, MASK_TAG] {
            v.insert(w);
        }
        for w in words {
            v.insert(&w.to_lowercase());
        }
        v
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let v = Self::new(tokens.iter().skip(5).map(String::as_str));
        if v.tokens != tokens {
            return Err(Error::Data("vocabulary has duplicate or misplaced entries".into()));
        }
        Ok(v)
    }

    fn insert(&mut self, w: &str) {
        if !self.index.contains_key(w) {
            self.index.insert(w.to_string(), self.tokens.len());
            self.tokens.push(w.to_string());
        }
    }

    pub fn id(&self, token: &str) -> usize {
        let key = if token.starts_with('[') { token.to_string() } else { token.to_lowercase() };
        self.index.get(&key).copied().unwrap_or(1)
    }

    pub fn mask_id(&self) -> usize {
        4
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Tokenized question with trigger mask and roles.
#[derive(Clone, Debug, PartialEq)]
pub struct CausalText {
    pub tokens: Vec<String>,
    pub ids: Vec<usize>,
    pub c_mask: Vec<u8>,
    pub roles: Vec<Role>,
}

impl CausalText {
    /// Tokenizes `text` (wrapped in the intent tags when `wrap` is set) and
    /// fills the trigger mask and roles.
    pub fn encode(text: &str, lexicon: &TriggerLexicon, vocab: &Vocab, wrap: bool) -> Self {
        let source = if wrap { wrap_causal_intent(text) } else { text.to_string() };
        let tokens = tokenize(&source, lexicon);
        let ids = tokens.iter().map(|t| vocab.id(t)).collect();
        let c_mask = detect_triggers(&tokens, lexicon);
        let roles = assign_roles(&tokens, lexicon);
        Self { tokens, ids, c_mask, roles }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn role_codes(&self) -> Vec<usize> {
        self.roles.iter().map(|r| r.code()).collect()
    }

    /// Replaces token `i` by `[MASK]`; it stops counting as a trigger and
    /// loses its role input.
    pub fn mask_position(&mut self, i: usize, vocab: &Vocab) -> Result<()> {
        if i >= self.len() {
            return Err(Error::not_found(format!("token index {i} of {}", self.len())));
        }
        self.tokens[i] = MASK_TAG.to_string();
        self.ids[i] = vocab.mask_id();
        self.c_mask[i] = 0;
        self.roles[i] = Role::Irrelevant;
        Ok(())
    }
}

/// Learned cause/effect vectors; irrelevant is the zero vector.
#[derive(Clone, Debug, PartialEq)]
pub struct RoleEmbedding<T> {
    pub e_cause: Vec<T>,
    pub e_effect: Vec<T>,
}

impl<T: Scalar> RoleEmbedding<T> {
    pub fn random(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || (0..dim).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect();
        let e_cause = draw();
        let e_effect = draw();
        Self { e_cause, e_effect }
    }

    pub fn dim(&self) -> usize {
        self.e_cause.len()
    }

    pub fn vector(&self, role: Role) -> Vec<T> {
        match role {
            Role::Irrelevant => vec![T::zero(); self.dim()],
            Role::Cause => self.e_cause.clone(),
            Role::Effect => self.e_effect.clone(),
        }
    }

    /// `[3, dim]` table indexed by role code.
    pub fn table(&self) -> Tensor<T> {
        let mut data = vec![T::zero(); self.dim()];
        data.extend_from_slice(&self.e_cause);
        data.extend_from_slice(&self.e_effect);
        Tensor::new(vec![3, self.dim()], data).expect("3 x dim")
    }
}

pub fn sinusoidal<T: Scalar>(position: usize, dim: usize) -> Vec<T> {
    (0..dim)
        .map(|j| {
            let i = (j / 2) as f64;
            let angle = position as f64 / 10000f64.powf(2.0 * i / dim as f64);
            T::lit(if j % 2 == 0 { angle.sin() } else { angle.cos() })
        })
        .collect()
}

/// `[n, dim]` table of sinusoidal position vectors.
pub fn position_table<T: Scalar>(n: usize, dim: usize) -> Tensor<T> {
    let data = (0..n).flat_map(|p| sinusoidal::<T>(p, dim)).collect();
    Tensor::new(vec![n, dim], data).expect("n x dim")
}

pub fn compose_position_encoding<T: Scalar>(
    position: usize,
    role: Role,
    roles: &RoleEmbedding<T>,
    dim: usize,
) -> Result<Vec<T>> {
    if roles.e_cause.len() != dim || roles.e_effect.len() != dim {
        return Err(Error::invalid(format!("role vectors have {} dims, positions {dim}", roles.dim())));
    }
    let base = sinusoidal::<T>(position, dim);
    Ok(base.iter().zip(roles.vector(role)).map(|(&b, r)| b + r).collect())
}

/// A masked position and the role it carried before masking.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaskedLabel {
    pub position: usize,
    pub role: Role,
}

/// Masks each trigger independently with probability `p`.
pub fn mask_triggers_pretext(
    text: &CausalText,
    vocab: &Vocab,
    p: f64,
    seed: u64,
) -> Result<(CausalText, Vec<MaskedLabel>)> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("mask probability {p} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = text.clone();
    let mut labels = Vec::new();
    for i in 0..text.len() {
        if text.c_mask[i] == 1 && rng.random::<f64>() < p {
            labels.push(MaskedLabel { position: i, role: text.roles[i] });
            out.mask_position(i, vocab)?;
        }
    }
    Ok((out, labels))
}

/// Mean cross-entropy over rows of `[m, 3]` logits; zero rows give 0.
pub fn causal_cls_loss<T: Scalar>(logits: &Tensor<T>, labels: &[Role]) -> Result<T> {
    if labels.is_empty() {
        return Ok(T::zero());
    }
    let (m, c) = logits.dims2()?;
    if m != labels.len() || c != 3 {
        return Err(Error::shape(format!("logits {m}x{c} for {} labels", labels.len())));
    }
    let mut total = T::zero();
    for (r, l) in labels.iter().enumerate() {
        let row = logits.row_slice(r);
        let max = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
        total += lse - row[l.code()];
    }
    Ok(total / T::from_usize_lossy(labels.len()))
}

/// Tape version of [`causal_cls_loss`]; `None` when there are no labels.
pub fn causal_cls_loss_tape<T: Scalar>(tape: &mut Tape<T>, logits: Var, labels: &[Role]) -> Result<Option<Var>> {
    if labels.is_empty() {
        return Ok(None);
    }
    let (m, c) = tape.value(logits).dims2()?;
    if m != labels.len() || c != 3 {
        return Err(Error::shape(format!("logits {m}x{c} for {} labels", labels.len())));
    }
    let mut total: Option<Var> = None;
    for (r, l) in labels.iter().enumerate() {
        let row = tape.slice(logits, r * 3, vec![1, 3])?;
        let ce = tape.cross_entropy(row, l.code())?;
        total = Some(match total {
            Some(t) => tape.add(t, ce)?,
            None => ce,
        });
    }
    let total = total.expect("at least one label");
    Ok(Some(tape.scale(total, T::one() / T::from_usize_lossy(m))))
}

/// Multiplicative inverted-dropout mask for `[n, d]` embeddings; rows with
/// `c_mask = 1` are all ones.
pub fn dropout_mask<T: Scalar>(n: usize, d: usize, c_mask: &[u8], p: f64, rng: &mut impl Rng) -> Result<Tensor<T>> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid(format!("dropout probability {p} outside [0, 1)")));
    }
    if c_mask.len() != n {
        return Err(Error::shape(format!("c_mask has {} entries for {n} tokens", c_mask.len())));
    }
    let keep = T::one() / T::lit(1.0 - p);
    let mut data = vec![T::one(); n * d];
    if p > 0.0 {
        for r in (0..n).filter(|&r| c_mask[r] == 0) {
            for v in &mut data[r * d..(r + 1) * d] {
                *v = if rng.random::<f64>() < p { T::zero() } else { keep };
            }
        }
    }
    Tensor::new(vec![n, d], data)
}

/// Inverted dropout on non-trigger rows; trigger rows pass through untouched.
pub fn dropout_preserving_triggers<T: Scalar>(
    embeddings: &Tensor<T>,
    c_mask: &[u8],
    p: f64,
    seed: u64,
) -> Result<Tensor<T>> {
    let (n, d) = embeddings.dims2()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = dropout_mask::<T>(n, d, c_mask, p, &mut rng)?;
    let mut out = embeddings.mul(&mask)?;
    // copy trigger rows so they stay bit-identical regardless of the mask
    for r in (0..n).filter(|&r| c_mask[r] == 1) {
        out.data_mut()[r * d..(r + 1) * d].copy_from_slice(embeddings.row_slice(r));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocab {
        Vocab::new(["because", "a", "so", "b", ","])
    }

    #[test]
    fn reserved_ids() {
        let v = vocab();
        assert_eq!(v.id("[MASK]"), v.mask_id());
        assert_eq!(v.id("Because"), 5);
        assert_eq!(v.id("zebra"), 1);
        assert_eq!(Vocab::from_tokens(v.tokens().to_vec()).unwrap(), v);
    }

    #[test]
    fn pretext_masks_every_trigger_at_p_one() {
        let lex = TriggerLexicon::default();
        let t = CausalText::encode("Because A, so B", &lex, &vocab(), false);
        let (m, labels) = mask_triggers_pretext(&t, &vocab(), 1.0, 7).unwrap();
        assert_eq!(crate::text::detokenize(&m.tokens), "[MASK] A, [MASK] B");
        assert_eq!(labels, vec![MaskedLabel { position: 0, role: Role::Cause }, MaskedLabel { position: 3, role: Role::Effect }]);
        let (same, none) = mask_triggers_pretext(&t, &vocab(), 0.0, 7).unwrap();
        assert_eq!(same, t);
        assert!(none.is_empty());
    }

    #[test]
    fn wrapped_text_has_tags_at_ends() {
        let t = CausalText::encode("why is it hidden?", &TriggerLexicon::default(), &vocab(), true);
        assert_eq!(t.tokens.first().unwrap(), CAUSE_TAG);
        assert_eq!(t.tokens.last().unwrap(), EFFECT_TAG);
        assert_eq!(t.c_mask.len(), t.len());
    }

    #[test]
    fn cls_loss_examples() {
        let uniform = Tensor::zeros(&[2, 3]);
        let l: f64 = causal_cls_loss(&uniform, &[Role::Cause, Role::Effect]).unwrap();
        assert!((l - 3f64.ln()).abs() < 1e-12);
        let confident = Tensor::matrix(1, 3, vec![0.0, 1e3, 0.0]).unwrap();
        assert!(causal_cls_loss(&confident, &[Role::Cause]).unwrap() < 1e-9);
        assert_eq!(causal_cls_loss(&Tensor::<f64>::zeros(&[0, 3]), &[]).unwrap(), 0.0);
    }

    #[test]
    fn encoding_composition() {
        let roles = RoleEmbedding::<f64>::random(8, 1);
        let base = sinusoidal::<f64>(3, 8);
        assert_eq!(compose_position_encoding(3, Role::Irrelevant, &roles, 8).unwrap(), base);
        let c = compose_position_encoding(3, Role::Cause, &roles, 8).unwrap();
        let e = compose_position_encoding(3, Role::Effect, &roles, 8).unwrap();
        for j in 0..8 {
            assert!((c[j] - e[j] - (roles.e_cause[j] - roles.e_effect[j])).abs() < 1e-12);
        }
        assert_ne!(sinusoidal::<f64>(1, 8), sinusoidal::<f64>(2, 8));
        assert!(compose_position_encoding(0, Role::Cause, &roles, 6).is_err());
    }

    #[test]
    fn dropout_identity_at_zero() {
        let x = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(dropout_preserving_triggers(&x, &[0, 1], 0.0, 3).unwrap(), x);
        assert!(dropout_preserving_triggers(&x, &[0, 1], 1.0, 3).is_err());
    }
}
