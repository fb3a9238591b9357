use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gestalt::closure::closure_layer;
use crate::gestalt::contour::{complete_contour, sobel_edges, BinaryMap};
use crate::gestalt::continuity::trace_continuity_path;
use crate::gestalt::proximity::{proximity_weights, ProximityParams};
use crate::gestalt::similarity::{cluster_regions, similarity_weights, similarity_weights_in_cluster};
use crate::numeric::softmax;
use crate::region::{Image, RegionGraph};
use crate::scalar::Scalar;

pub const LAYER_NAMES: [&str; 4] = ["proximity", "similarity", "closure", "continuity"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TowerConfig {
    pub proximity: ProximityParams,
    /// Restrict similarity to the query's k-means cluster when set.
    pub k_clusters: Option<usize>,
    pub cluster_seed: u64,
    pub bridge_gap: f64,
    pub sobel_threshold: f64,
    pub decay: f64,
    /// Binarization threshold of the hard closure IoU, as a fraction of the peak.
    pub theta: f64,
    pub entity_intensity: f64,
    pub entity_variance: f64,
}

impl Default for TowerConfig {
    fn default() -> Self {
        Self {
            proximity: ProximityParams::default(),
            k_clusters: None,
            cluster_seed: 0,
            bridge_gap: 5.0,
            sobel_threshold: 0.5,
            decay: 0.7,
            theta: 0.5,
            entity_intensity: 0.1,
            entity_variance: 0.01,
        }
    }
}

/// Per-region prior replacing an attention distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct GestaltPrior<T> {
    pub weights: Vec<T>,
    /// Normalized layer maps per region, in [`LAYER_NAMES`] order.
    pub layer_contrib: Vec<[T; 4]>,
    pub gate: [T; 4],
}

/// Per-image inputs that do not depend on the query.
pub struct TowerInputs<'a, T> {
    pub graph: &'a RegionGraph<T>,
    pub closure_fill: &'a BinaryMap,
    pub entity: &'a [bool],
}

/// Filled interiors of the completed Sobel contours of `image`.
pub fn closure_fill<T: Scalar>(image: &Image<T>, config: &TowerConfig) -> BinaryMap {
    complete_contour(&sobel_edges(image, config.sobel_threshold), config.bridge_gap).filled_mask()
}

/// The four normalized layer maps for one query.
pub fn layer_maps<T: Scalar>(
    inputs: &TowerInputs<'_, T>,
    query: usize,
    query_feature: &[T],
    text_guidance: Option<&[T]>,
    config: &TowerConfig,
) -> Result<[Vec<T>; 4]> {
    let g = inputs.graph;
    let prox = proximity_weights(g, query, &config.proximity)?;
    let sim = match config.k_clusters {
        Some(k) => {
            let assign = cluster_regions(g, k, config.cluster_seed)?;
            similarity_weights_in_cluster(g, query_feature, &assign, assign[query])?
        }
        None => similarity_weights(g, query_feature)?,
    };
    let clo = closure_layer(g, inputs.closure_fill)?;
    let cont = trace_continuity_path(g, query, text_guidance, inputs.entity, config.decay)?;
    Ok([prox, sim, clo, cont])
}

/// Convex combination of layer maps by `softmax(gate_logits)`.
pub fn combine_layers<T: Scalar>(maps: &[Vec<T>; 4], gate_logits: &[T; 4]) -> Result<GestaltPrior<T>> {
    let n = maps[0].len();
    if maps.iter().any(|m| m.len() != n) {
        return Err(Error::shape("layer maps differ in length"));
    }
    if gate_logits.iter().any(|g| g.is_nan()) {
        return Err(Error::invalid("gate logits contain NaN"));
    }
    let g = softmax(gate_logits);
    let gate = [g[0], g[1], g[2], g[3]];
    let layer_contrib: Vec<[T; 4]> = (0..n).map(|i| [maps[0][i], maps[1][i], maps[2][i], maps[3][i]]).collect();
    let weights = layer_contrib
        .iter()
        .map(|c| {
            // skip zero-gated layers so that 0 * x never matters
            (0..4).filter(|&l| gate[l] > T::zero()).map(|l| gate[l] * c[l]).sum()
        })
        .collect();
    Ok(GestaltPrior { weights, layer_contrib, gate })
}

pub fn gestalt_forward<T: Scalar>(
    inputs: &TowerInputs<'_, T>,
    query: usize,
    query_feature: &[T],
    text_guidance: Option<&[T]>,
    gate_logits: &[T; 4],
    config: &TowerConfig,
) -> Result<GestaltPrior<T>> {
    let maps = layer_maps(inputs, query, query_feature, text_guidance, config)?;
    combine_layers(&maps, gate_logits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_layers_give_uniform_prior() {
        let u = vec![0.25f64; 4];
        let maps = [u.clone(), u.clone(), u.clone(), u.clone()];
        let p = combine_layers(&maps, &[3.0, -1.0, 0.5, 2.0]).unwrap();
        for w in p.weights {
            assert!((w - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn infinite_gate_selects_one_layer() {
        let maps = [vec![0.7, 0.3], vec![0.5, 0.5], vec![0.0, 1.0], vec![1.0, 0.0]];
        let p = combine_layers(&maps, &[f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY]).unwrap();
        assert_eq!(p.weights, vec![0.7, 0.3]);
        assert_eq!(p.gate, [1.0, 0.0, 0.0, 0.0]);
    }
}
