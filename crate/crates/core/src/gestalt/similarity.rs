use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gestalt::proximity::normalize_or_uniform;
use crate::region::RegionGraph;
use crate::scalar::Scalar;

pub fn cosine<T: Scalar>(a: &[T], b: &[T]) -> T {
    let dot: T = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    let na = a.iter().map(|&x| x * x).sum::<T>().sqrt();
    let nb = b.iter().map(|&x| x * x).sum::<T>().sqrt();
    if na == T::zero() || nb == T::zero() {
        T::zero()
    } else {
        dot / (na * nb)
    }
}

/// `max(0, cos(query, feature_i))`, normalized (uniform when all are zero).
pub fn similarity_weights<T: Scalar>(graph: &RegionGraph<T>, query_feature: &[T]) -> Result<Vec<T>> {
    similarity_in(graph, query_feature, None)
}

/// Like [`similarity_weights`] but regions outside `cluster` get no weight.
pub fn similarity_weights_in_cluster<T: Scalar>(
    graph: &RegionGraph<T>,
    query_feature: &[T],
    assignment: &[usize],
    cluster: usize,
) -> Result<Vec<T>> {
    if assignment.len() != graph.len() {
        return Err(Error::invalid("cluster assignment length differs from region count"));
    }
    similarity_in(graph, query_feature, Some((assignment, cluster)))
}

fn similarity_in<T: Scalar>(
    graph: &RegionGraph<T>,
    query: &[T],
    restrict: Option<(&[usize], usize)>,
) -> Result<Vec<T>> {
    if query.len() != graph.feature_dim() {
        return Err(Error::invalid(format!(
            "query feature has {} dims, regions have {}",
            query.len(),
            graph.feature_dim()
        )));
    }
    if query.iter().all(|&x| x == T::zero()) {
        return Err(Error::invalid("query feature is the zero vector"));
    }
    let raw = graph
        .regions()
        .iter()
        .enumerate()
        .map(|(i, r)| match restrict {
            Some((a, c)) if a[i] != c => T::zero(),
            _ => cosine(query, &r.feature).max(T::zero()),
        })
        .collect();
    Ok(normalize_or_uniform(raw))
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// K-means over region features with k-means++ seeding. Cluster ids are
/// renumbered by first appearance in region order.
pub fn cluster_regions<T: Scalar>(graph: &RegionGraph<T>, k: usize, seed: u64) -> Result<Vec<usize>> {
    let feats: Vec<&[T]> = graph.regions().iter().map(|r| r.feature.as_slice()).collect();
    kmeans(&feats, k, seed)
}

pub fn kmeans<T: Scalar>(points: &[&[T]], k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} must be in 1..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<T>> = vec![points[rng.random_range(0..n)].to_vec()];
    while centers.len() < k {
        let d2: Vec<f64> = points
            .iter()
            .map(|p| centers.iter().map(|c| sq_dist(p, c)).fold(T::infinity(), T::min).to_f64_lossy())
            .collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && r < d {
                    idx = i;
                    break;
                }
                r -= d;
            }
            if d2[idx] == 0.0 {
                d2.iter().rposition(|&d| d > 0.0).unwrap_or(idx)
            } else {
                idx
            }
        } else {
            centers.len() % n
        };
        centers.push(points[pick].to_vec());
    }

    let mut assign = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| {
                    sq_dist(p, &centers[a])
                        .partial_cmp(&sq_dist(p, &centers[b]))
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("k >= 1");
            if best != assign[i] {
                assign[i] = best;
                changed = true;
            }
        }
        let dim = points[0].len();
        let mut sums = vec![vec![T::zero(); dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            for (s, &v) in sums[a].iter_mut().zip(p.iter()) {
                *s += v;
            }
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|&s| s / T::from_usize_lossy(counts[c])).collect();
            } else {
                // re-seed an empty cluster at the point farthest from its center
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(points[a], &centers[assign[a]])
                            .partial_cmp(&sq_dist(points[b], &centers[assign[b]]))
                            .unwrap_or(std::cmp::Ordering::Equal)
                    })
                    .expect("n >= 1");
                centers[c] = points[far].to_vec();
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut remap = vec![usize::MAX; k];
    let mut next = 0;
    for a in assign.iter_mut() {
        if remap[*a] == usize::MAX {
            remap[*a] = next;
            next += 1;
        }
        *a = remap[*a];
    }
    Ok(assign)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_examples() {
        assert!((cosine(&[1.0, 0.0], &[0.6, 0.8]) - 0.6f64).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 2.0]), 0.0f64);
    }

    #[test]
    fn kmeans_edge_counts() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        assert_eq!(kmeans(&refs, 1, 3).unwrap(), vec![0; 6]);
        assert_eq!(kmeans(&refs, 6, 3).unwrap(), vec![0, 1, 2, 3, 4, 5]);
        assert!(kmeans(&refs, 0, 3).is_err());
        assert!(kmeans(&refs, 7, 3).is_err());
    }
}
