use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::{centroid_distance, Metric, RegionGraph};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProximityParams {
    /// Decay length in pixels.
    pub tau: f64,
    pub metric: Metric,
    /// Maximum graph hops from the query; `None` means unbounded.
    pub hops: Option<usize>,
}

impl Default for ProximityParams {
    fn default() -> Self {
        Self { tau: 16.0, metric: Metric::Euclidean, hops: None }
    }
}

impl ProximityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::invalid("tau must be positive"));
        }
        if self.hops == Some(0) {
            return Err(Error::invalid("hops must be at least 1"));
        }
        Ok(())
    }
}

/// Hop count from `start` to every region (`usize::MAX` when unreachable).
pub fn hop_distances<T: Scalar>(graph: &RegionGraph<T>, start: usize) -> Result<Vec<usize>> {
    graph.region(start)?;
    let mut hops = vec![usize::MAX; graph.len()];
    hops[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(r) = queue.pop_front() {
        for &n in graph.neighbors(r) {
            if hops[n] == usize::MAX {
                hops[n] = hops[r] + 1;
                queue.push_back(n);
            }
        }
    }
    Ok(hops)
}

/// `exp(-d(query, i) / tau)` over regions within the hop limit, normalized.
pub fn proximity_weights<T: Scalar>(graph: &RegionGraph<T>, query: usize, params: &ProximityParams) -> Result<Vec<T>> {
    params.validate()?;
    let q = graph.region(query)?.centroid;
    let hops = hop_distances(graph, query)?;
    let limit = params.hops.unwrap_or(usize::MAX);
    let tau = T::lit(params.tau);
    let raw: Vec<T> = graph
        .regions()
        .iter()
        .zip(&hops)
        .map(|(r, &h)| {
            if h != usize::MAX && h <= limit {
                (-centroid_distance(q, r.centroid, params.metric) / tau).exp()
            } else {
                T::zero()
            }
        })
        .collect();
    Ok(normalize_or_uniform(raw))
}

/// Scales to sum 1; a vector with no positive mass becomes uniform.
pub fn normalize_or_uniform<T: Scalar>(mut v: Vec<T>) -> Vec<T> {
    let total: T = v.iter().copied().sum();
    if total > T::zero() && total.is_finite() {
        for x in v.iter_mut() {
            *x /= total;
        }
    } else if !v.is_empty() {
        let u = T::one() / T::from_usize_lossy(v.len());
        v.fill(u);
    }
    v
}
