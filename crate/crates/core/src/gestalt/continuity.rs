use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::region::RegionGraph;
use crate::scalar::Scalar;

/// Entity/background split from region features laid out as
/// `[channel means | variance | cx, cy]`: a region is an entity when its
/// mean intensity or its variance exceeds the threshold.
pub fn entity_flags<T: Scalar>(graph: &RegionGraph<T>, intensity_min: f64, variance_min: f64) -> Vec<bool> {
    graph
        .regions()
        .iter()
        .map(|r| {
            let f = &r.feature;
            let ch = f.len().saturating_sub(3).max(1);
            let mean = f[..ch].iter().map(|v| v.to_f64_lossy()).sum::<f64>() / ch as f64;
            let var = f.get(ch).map_or(0.0, |v| v.to_f64_lossy());
            mean > intensity_min || var > variance_min
        })
        .collect()
}

/// Entity regions reachable from `r` in one step: directly adjacent ones,
/// or ones adjacent to a background neighbour of `r`.
pub fn entity_steps<T: Scalar>(graph: &RegionGraph<T>, entity: &[bool], r: usize) -> (Vec<usize>, Vec<usize>) {
    let direct: BTreeSet<usize> = graph.neighbors(r).iter().copied().filter(|&n| entity[n]).collect();
    let mut bridged = BTreeSet::new();
    for &b in graph.neighbors(r).iter().filter(|&&n| !entity[n]) {
        for &n in graph.neighbors(b) {
            if entity[n] && n != r && !direct.contains(&n) {
                bridged.insert(n);
            }
        }
    }
    (direct.into_iter().collect(), bridged.into_iter().collect())
}

/// Regions reachable from `start` through entity steps (start included).
pub fn entity_component<T: Scalar>(graph: &RegionGraph<T>, entity: &[bool], start: usize) -> Vec<usize> {
    let mut seen = vec![false; graph.len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    let mut out = Vec::new();
    while let Some(r) = queue.pop_front() {
        out.push(r);
        let (d, b) = entity_steps(graph, entity, r);
        for n in d.into_iter().chain(b) {
            if !seen[n] {
                seen[n] = true;
                queue.push_back(n);
            }
        }
    }
    out.sort_unstable();
    out
}

/// Greedy walk from `start` over entity regions, always stepping to the
/// unvisited candidate with the highest direction score (lower id on ties).
/// Directly adjacent entities are preferred over ones reached across a
/// single background region. Step `t` gets weight `decay^t`; the result is
/// normalized. Missing or constant scores give uniform weight over the
/// start's entity component.
pub fn trace_continuity_path<T: Scalar>(
    graph: &RegionGraph<T>,
    start: usize,
    direction_scores: Option<&[T]>,
    entity: &[bool],
    decay: f64,
) -> Result<Vec<T>> {
    graph.region(start)?;
    if !(decay > 0.0 && decay < 1.0) {
        return Err(Error::invalid("decay must lie in (0, 1)"));
    }
    if entity.len() != graph.len() {
        return Err(Error::invalid("entity flags length differs from region count"));
    }
    let n = graph.len();
    let mut out = vec![T::zero(); n];
    let informative = direction_scores.filter(|s| {
        let lo = s.iter().fold(T::infinity(), |m, &v| m.min(v));
        let hi = s.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        hi > lo
    });
    let Some(scores) = informative else {
        if let Some(s) = direction_scores {
            if s.len() != n {
                return Err(Error::invalid("direction scores length differs from region count"));
            }
        }
        let comp = entity_component(graph, entity, start);
        let u = T::one() / T::from_usize_lossy(comp.len());
        for r in comp {
            out[r] = u;
        }
        return Ok(out);
    };
    if scores.len() != n {
        return Err(Error::invalid("direction scores length differs from region count"));
    }
    let path = greedy_path(graph, entity, scores, start);
    let d = T::lit(decay);
    let mut w = T::one();
    let mut total = T::zero();
    for &r in &path {
        out[r] = w;
        total += w;
        w *= d;
    }
    for v in out.iter_mut() {
        *v /= total;
    }
    Ok(out)
}

/// Visit order of the greedy walk.
pub fn greedy_path<T: Scalar>(graph: &RegionGraph<T>, entity: &[bool], scores: &[T], start: usize) -> Vec<usize> {
    let mut visited = vec![false; graph.len()];
    visited[start] = true;
    let mut path = vec![start];
    let mut cur = start;
    loop {
        let (direct, bridged) = entity_steps(graph, entity, cur);
        let pick = |c: &[usize]| {
            c.iter().copied().filter(|&r| !visited[r]).fold(None, |best: Option<usize>, r| match best {
                Some(b) if scores[b] >= scores[r] => Some(b),
                _ => Some(r),
            })
        };
        let Some(next) = pick(&direct).or_else(|| pick(&bridged)) else { break };
        visited[next] = true;
        path.push(next);
        cur = next;
    }
    path
}
