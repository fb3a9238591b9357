//! Two-stage fusion network with a residual decoder, expert heads and
//! counterfactual intervention layers.

mod checkpoint;
mod config;
mod experts;
mod fusion;
mod intervene;
mod net;
mod params;

pub use checkpoint::{config_hash, load_model, save_model, Checkpoint, Manifest, StoredTensor, CHECKPOINT_VERSION};
pub use config::{InterventionSpec, ModelConfig, Variant};
pub use experts::{expert_forward, ExpertOut, ExpertParams};
pub use fusion::{fuse_stage1, fuse_stage2, sparsify, summary_weights, top_k_mask, JointEmbedding, Stage1};
pub use intervene::{intervene, intervention_heatmap, strengthen, InterventionReport};
pub use net::{argmax, Edit, Encoded, ForwardOpts, LossParts, LossWeights, Model, Sample, Snapshot, END_TOKEN};
pub use params::{init_rng, Bound, ParamStore};
