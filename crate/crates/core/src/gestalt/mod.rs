//! The four grouping layers (proximity, similarity, closure, continuity)
//! and their gated combination into a per-region prior.

mod closure;
mod continuity;
mod contour;
mod proximity;
mod similarity;
mod tower;

pub use closure::{
    binarize, closure_layer, closure_loss, mask_loss, rasterize_prior, region_soft_iou_tape, soft_iou_loss,
    soft_iou_loss_tape,
};
pub use continuity::{entity_component, entity_flags, entity_steps, greedy_path, trace_continuity_path};
pub use contour::{
    bridge_pixels, complete_contour, disc_and_outline, fill_enclosed, mask_iou, sobel_edges, thin, BinaryMap,
    Contour, ContourSet,
};
pub use proximity::{hop_distances, normalize_or_uniform, proximity_weights, ProximityParams};
pub use similarity::{cluster_regions, cosine, kmeans, similarity_weights, similarity_weights_in_cluster};
pub use tower::{
    closure_fill, combine_layers, gestalt_forward, layer_maps, GestaltPrior, TowerConfig, TowerInputs, LAYER_NAMES,
};
