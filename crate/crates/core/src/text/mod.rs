//! Question tokenization with causal intent tags, trigger masks, role
//! embeddings and the masked-trigger pretext objective.

mod encode;
mod lexicon;
mod tokenize;

pub use encode::{
    causal_cls_loss, causal_cls_loss_tape, compose_position_encoding, dropout_mask, dropout_preserving_triggers,
    mask_triggers_pretext, position_table, sinusoidal, CausalText, MaskedLabel, RoleEmbedding, Vocab, PAD, UNK,
};
pub use lexicon::{is_special, Role, TriggerLexicon, CAUSE_TAG, EFFECT_TAG, MASK_TAG, SPECIAL_TAGS};
pub use tokenize::{assign_roles, detect_triggers, detokenize, segment_roles, tokenize, wrap_causal_intent};
