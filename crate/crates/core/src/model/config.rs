use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which prior and which stage-2 weighting the model uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Gated four-layer prior, text-guided causal weights.
    GestaltTower,
    /// Single-head scaled dot-product attention in place of the prior.
    DotProductAttention,
    /// Tower without the closure layer.
    NoClosure,
    /// Tower without the continuity layer.
    NoContinuity,
    /// Tower prior, but stage-2 weights from softmax attention scores.
    AttentionWeights,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::GestaltTower,
        Variant::DotProductAttention,
        Variant::NoClosure,
        Variant::NoContinuity,
        Variant::AttentionWeights,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::GestaltTower => "gestalt_tower",
            Variant::DotProductAttention => "dot_product_attention",
            Variant::NoClosure => "no_closure",
            Variant::NoContinuity => "no_continuity",
            Variant::AttentionWeights => "attention_weights_vs_causal_weights",
        }
    }

    pub fn uses_tower(self) -> bool {
        self != Variant::DotProductAttention
    }

    /// Layers switched off by this variant, in proximity/similarity/closure/continuity order.
    pub fn disabled_layers(self) -> [bool; 4] {
        match self {
            Variant::NoClosure => [false, false, true, false],
            Variant::NoContinuity => [false, false, false, true],
            _ => [false; 4],
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s || (s == "attention_weights" && *v == Variant::AttentionWeights))
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Token embedding width.
    pub text_dim: usize,
    /// Width of region and joint embeddings.
    pub joint_dim: usize,
    /// Attention key width of the dot-product baseline.
    pub attention_dim: usize,
    pub decoder_width: usize,
    pub decoder_blocks: usize,
    /// Decoder blocks (counted from the end) that host intervention layers.
    pub intervention_blocks: usize,
    pub intervention_layers: bool,
    pub sparsify_k: usize,
    /// Apply the top-k selection in training passes as well; by default it
    /// is an inference-time saving only.
    pub sparsify_in_training: bool,
    /// Starting inverse temperature on the cosine causal scores (learned).
    pub causal_sharpness: f64,
    pub max_answer_len: usize,
    pub gate_init: [f64; 4],
    /// When set, the expert gate is pinned to this value.
    pub gate_override: Option<f64>,
    pub text_dropout: f64,
    pub strengthen_factor: f64,
    pub strengthen_cap: f64,
    pub delta: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: Variant::GestaltTower,
            text_dim: 32,
            joint_dim: 32,
            attention_dim: 8,
            decoder_width: 128,
            decoder_blocks: 4,
            intervention_blocks: 2,
            intervention_layers: true,
            sparsify_k: 8,
            sparsify_in_training: false,
            causal_sharpness: 5.0,
            max_answer_len: 3,
            gate_init: [0.0; 4],
            gate_override: None,
            text_dropout: 0.1,
            strengthen_factor: 1.1,
            strengthen_cap: 4.0,
            delta: 0.05,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.text_dim == 0 || self.joint_dim == 0 || self.decoder_width == 0 || self.attention_dim == 0 {
            return bad("model widths must be positive");
        }
        if self.decoder_blocks == 0 {
            return bad("decoder needs at least one block");
        }
        if self.intervention_blocks != 2.min(self.decoder_blocks) {
            return bad("intervention layers are restricted to the last two decoder blocks");
        }
        if !(self.causal_sharpness.is_finite() && self.causal_sharpness > 0.0) {
            return bad("causal_sharpness must be positive");
        }
        if self.sparsify_k == 0 {
            return bad("sparsify_k must be at least 1");
        }
        if self.max_answer_len == 0 {
            return bad("max_answer_len must be at least 1");
        }
        if !(0.0..1.0).contains(&self.text_dropout) {
            return bad("text_dropout must lie in [0, 1)");
        }
        if let Some(g) = self.gate_override {
            if !(0.0..=1.0).contains(&g) {
                return bad("gate_override must lie in [0, 1]");
            }
        }
        if !(self.strengthen_factor >= 1.0 && self.strengthen_cap >= 1.0) {
            return bad("strengthening factor and cap must be at least 1");
        }
        if !(self.delta >= 0.0) {
            return bad("delta must be nonnegative");
        }
        if self.gate_init.iter().any(|g| g.is_nan()) {
            return bad("gate_init contains NaN");
        }
        Ok(())
    }

    /// Index of the first decoder block with an intervention layer.
    pub fn first_intervention_block(&self) -> usize {
        self.decoder_blocks - self.intervention_blocks
    }
}

/// Counterfactual edit applied before re-running the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "target", rename_all = "snake_case")]
pub enum InterventionSpec {
    None,
    /// Token index in the wrapped question.
    MaskTextToken(usize),
    DeleteRegion(usize),
}

impl FromStr for InterventionSpec {
    type Err = Error;

    /// `none`, `mask_text_token:<index>` or `delete_region:<id>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "none" {
            return Ok(InterventionSpec::None);
        }
        let (kind, target) = s.split_once(':').ok_or_else(|| Error::Config(format!("bad intervention spec {s:?}")))?;
        let target: usize =
            target.trim().parse().map_err(|_| Error::Config(format!("bad intervention target {target:?}")))?;
        match kind.trim() {
            "mask_text_token" => Ok(InterventionSpec::MaskTextToken(target)),
            "delete_region" => Ok(InterventionSpec::DeleteRegion(target)),
            k => Err(Error::Config(format!("unknown intervention kind {k:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing() {
        assert_eq!("none".parse::<InterventionSpec>().unwrap(), InterventionSpec::None);
        assert_eq!("delete_region:4".parse::<InterventionSpec>().unwrap(), InterventionSpec::DeleteRegion(4));
        assert_eq!("mask_text_token:2".parse::<InterventionSpec>().unwrap(), InterventionSpec::MaskTextToken(2));
        assert!("delete_region".parse::<InterventionSpec>().is_err());
        assert!("explode:1".parse::<InterventionSpec>().is_err());
    }

    #[test]
    fn intervention_blocks_are_the_last_two() {
        let mut c = ModelConfig::default();
        c.validate().unwrap();
        c.intervention_blocks = 3;
        assert!(c.validate().is_err());
        assert_eq!(ModelConfig::default().first_intervention_block(), 2);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
    }
}
