//! SLIC superpixels: k-means over `(x, y, channels)` with a compactness
//! weight on the spatial term, seeded on a uniform grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::graph::RegionGraph;
use crate::region::image::Image;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlicParams {
    pub k: usize,
    /// Weight of spatial distance relative to color distance (colors in `[0, 1]`).
    pub compactness: f64,
    pub iters: usize,
    /// Connected components smaller than this merge into a neighbour.
    pub min_region: usize,
}

impl Default for SlicParams {
    fn default() -> Self {
        Self { k: 64, compactness: 0.1, iters: 10, min_region: 4 }
    }
}

/// Uniform grid of exactly `k` seed positions.
pub(crate) fn grid_seeds(width: usize, height: usize, k: usize) -> Vec<(f64, f64)> {
    let rows = ((k as f64 * height as f64 / width as f64).sqrt().round() as usize).clamp(1, k.min(height));
    let mut seeds = Vec::with_capacity(k);
    for j in 0..rows {
        let in_row = k / rows + usize::from(j < k % rows);
        let y = (j as f64 + 0.5) * height as f64 / rows as f64 - 0.5;
        for i in 0..in_row {
            let x = (i as f64 + 0.5) * width as f64 / in_row as f64 - 0.5;
            seeds.push((x, y));
        }
    }
    seeds
}

pub fn segment_slic<T: Scalar>(image: &Image<T>, params: &SlicParams) -> Result<RegionGraph<T>> {
    let labels = slic_labels(image, params)?;
    RegionGraph::from_labels(image, &labels)
}

/// Per-pixel labels after clustering and connectivity enforcement.
pub fn slic_labels<T: Scalar>(image: &Image<T>, params: &SlicParams) -> Result<Vec<usize>> {
    let (w, h, ch) = (image.width(), image.height(), image.channels());
    let n = w * h;
    if params.k == 0 || params.k > n {
        return Err(Error::invalid(format!("k = {} must be in 1..={n}", params.k)));
    }
    if !(params.compactness >= 0.0) {
        return Err(Error::invalid("compactness must be nonnegative"));
    }
    let step = (n as f64 / params.k as f64).sqrt();
    let spatial = T::lit((params.compactness / step).powi(2));
    let radius = (2.0 * step).ceil() as isize;

    let mut centers: Vec<Vec<T>> = grid_seeds(w, h, params.k)
        .into_iter()
        .map(|(x, y)| {
            let px = ((x + 0.5).floor() as usize).min(w - 1);
            let py = ((y + 0.5).floor() as usize).min(h - 1);
            let mut c = vec![T::lit(x), T::lit(y)];
            c.extend_from_slice(image.pixel(px, py));
            c
        })
        .collect();

    let dist = |c: &[T], x: usize, y: usize| -> T {
        let dx = T::from_usize_lossy(x) - c[0];
        let dy = T::from_usize_lossy(y) - c[1];
        let color: T = image.pixel(x, y).iter().zip(&c[2..]).map(|(&a, &b)| (a - b) * (a - b)).sum();
        color + spatial * (dx * dx + dy * dy)
    };

    let mut labels = vec![usize::MAX; n];
    let mut best = vec![T::infinity(); n];
    for _ in 0..params.iters.max(1) {
        labels.fill(usize::MAX);
        best.fill(T::infinity());
        for (ci, c) in centers.iter().enumerate() {
            let cx = c[0].to_f64_lossy().round() as isize;
            let cy = c[1].to_f64_lossy().round() as isize;
            let y0 = (cy - radius).max(0) as usize;
            let y1 = ((cy + radius).max(-1) + 1).min(h as isize) as usize;
            let x0 = (cx - radius).max(0) as usize;
            let x1 = ((cx + radius).max(-1) + 1).min(w as isize) as usize;
            for y in y0..y1 {
                for x in x0..x1 {
                    let d = dist(c, x, y);
                    if d < best[y * w + x] {
                        best[y * w + x] = d;
                        labels[y * w + x] = ci;
                    }
                }
            }
        }
        for i in 0..n {
            if labels[i] == usize::MAX {
                let (x, y) = (i % w, i / w);
                let mut bi = 0;
                let mut bd = T::infinity();
                for (ci, c) in centers.iter().enumerate() {
                    let d = dist(c, x, y);
                    if d < bd {
                        bd = d;
                        bi = ci;
                    }
                }
                labels[i] = bi;
            }
        }
        let mut sums = vec![vec![T::zero(); 2 + ch]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (i, &l) in labels.iter().enumerate() {
            let (x, y) = (i % w, i / w);
            sums[l][0] += T::from_usize_lossy(x);
            sums[l][1] += T::from_usize_lossy(y);
            for (s, &v) in sums[l][2..].iter_mut().zip(image.pixel(x, y)) {
                *s += v;
            }
            counts[l] += 1;
        }
        for ((c, s), &cnt) in centers.iter_mut().zip(&sums).zip(&counts) {
            if cnt > 0 {
                let k = T::from_usize_lossy(cnt);
                for (ci, &si) in c.iter_mut().zip(s) {
                    *ci = si / k;
                }
            }
        }
    }
    Ok(enforce_connectivity(image, &labels, params.min_region))
}

/// Splits labels into 4-connected components and merges components smaller
/// than `min_size` into the adjacent component with the nearest mean color.
pub(crate) fn enforce_connectivity<T: Scalar>(image: &Image<T>, labels: &[usize], min_size: usize) -> Vec<usize> {
    let (w, h) = (image.width(), image.height());
    let mut comp = connected_components(labels, w, h);
    loop {
        let ncomp = comp.iter().copied().max().map_or(0, |m| m + 1);
        let mut size = vec![0usize; ncomp];
        let mut color = vec![vec![T::zero(); image.channels()]; ncomp];
        for (i, &c) in comp.iter().enumerate() {
            size[c] += 1;
            for (s, &v) in color[c].iter_mut().zip(image.pixel(i % w, i / w)) {
                *s += v;
            }
        }
        for (c, s) in color.iter_mut().zip(&size) {
            for v in c.iter_mut() {
                *v /= T::from_usize_lossy((*s).max(1));
            }
        }
        let mut adj = vec![std::collections::BTreeSet::new(); ncomp];
        for y in 0..h {
            for x in 0..w {
                let a = comp[y * w + x];
                if x + 1 < w && comp[y * w + x + 1] != a {
                    let b = comp[y * w + x + 1];
                    adj[a].insert(b);
                    adj[b].insert(a);
                }
                if y + 1 < h && comp[(y + 1) * w + x] != a {
                    let b = comp[(y + 1) * w + x];
                    adj[a].insert(b);
                    adj[b].insert(a);
                }
            }
        }
        // smallest orphan first, ties by id
        let orphan = (0..ncomp)
            .filter(|&c| size[c] < min_size && !adj[c].is_empty())
            .min_by_key(|&c| (size[c], c));
        let Some(o) = orphan else { break };
        let target = *adj[o]
            .iter()
            .min_by(|&&a, &&b| {
                let da: T = color[a].iter().zip(&color[o]).map(|(&p, &q)| (p - q) * (p - q)).sum();
                let db: T = color[b].iter().zip(&color[o]).map(|(&p, &q)| (p - q) * (p - q)).sum();
                da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
            })
            .expect("orphan has a neighbour");
        for c in comp.iter_mut() {
            if *c == o {
                *c = target;
            }
        }
        comp = connected_components(&comp, w, h);
    }
    comp
}

/// 4-connected components of equal labels, numbered in raster order.
pub(crate) fn connected_components(labels: &[usize], w: usize, h: usize) -> Vec<usize> {
    let mut comp = vec![usize::MAX; labels.len()];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..labels.len() {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if comp[j] == usize::MAX && labels[j] == labels[start] {
                    comp[j] = next;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        next += 1;
    }
    comp
}
