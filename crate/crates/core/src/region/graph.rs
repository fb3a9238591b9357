use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::image::Image;
use crate::scalar::Scalar;

pub type Pixel = (usize, usize);

/// Distance between region centroids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Manhattan,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" => Ok(Metric::Euclidean),
            "manhattan" => Ok(Metric::Manhattan),
            other => Err(Error::invalid(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Region<T> {
    pub id: usize,
    /// Raster-ordered member pixels.
    pub pixels: Vec<Pixel>,
    pub centroid: (T, T),
    /// `[mean per channel | intensity variance | cx / width, cy / height]`,
    /// optionally followed by appended descriptors.
    pub feature: Vec<T>,
    /// Member pixels with a 4-neighbour outside the region or the image.
    pub boundary: Vec<Pixel>,
}

impl<T: Scalar> Region<T> {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge<T> {
    pub a: usize,
    pub b: usize,
    pub distance: T,
}

/// Superpixel regions plus their 4-connected adjacency.
#[derive(Clone, Debug)]
pub struct RegionGraph<T> {
    width: usize,
    height: usize,
    regions: Vec<Region<T>>,
    edges: Vec<Edge<T>>,
    labels: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
}

pub fn spatial_distance<T: Scalar>(a: &Region<T>, b: &Region<T>, metric: Metric) -> T {
    centroid_distance(a.centroid, b.centroid, metric)
}

pub(crate) fn centroid_distance<T: Scalar>(a: (T, T), b: (T, T), metric: Metric) -> T {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    match metric {
        Metric::Euclidean => (dx * dx + dy * dy).sqrt(),
        Metric::Manhattan => dx.abs() + dy.abs(),
    }
}

pub(crate) fn centroid_of<T: Scalar>(pixels: &[Pixel]) -> (T, T) {
    let n = T::from_usize_lossy(pixels.len().max(1));
    let sx: usize = pixels.iter().map(|p| p.0).sum();
    let sy: usize = pixels.iter().map(|p| p.1).sum();
    (T::from_usize_lossy(sx) / n, T::from_usize_lossy(sy) / n)
}

/// Base feature vector of a pixel set.
pub fn region_feature<T: Scalar>(image: &Image<T>, pixels: &[Pixel]) -> Vec<T> {
    let ch = image.channels();
    let n = T::from_usize_lossy(pixels.len().max(1));
    let mut mean = vec![T::zero(); ch];
    let mut isum = T::zero();
    let mut isq = T::zero();
    for &(x, y) in pixels {
        for (m, &v) in mean.iter_mut().zip(image.pixel(x, y)) {
            *m += v;
        }
        let i = image.intensity(x, y);
        isum += i;
        isq += i * i;
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let imean = isum / n;
    let var = (isq / n - imean * imean).max(T::zero());
    let (cx, cy) = centroid_of::<T>(pixels);
    mean.push(var);
    mean.push(cx / T::from_usize_lossy(image.width()));
    mean.push(cy / T::from_usize_lossy(image.height()));
    mean
}

/// Edges between regions with 4-connected pixel contact, each carrying the
/// euclidean centroid distance. Fails when two regions share a pixel.
pub fn build_adjacency<T: Scalar>(regions: &[Region<T>]) -> Result<Vec<Edge<T>>> {
    let mut owner: HashMap<Pixel, usize> = HashMap::new();
    for (idx, r) in regions.iter().enumerate() {
        for &p in &r.pixels {
            if let Some(prev) = owner.insert(p, idx) {
                if prev != idx {
                    return Err(Error::invalid(format!(
                        "regions {} and {} overlap at {:?}",
                        regions[prev].id, r.id, p
                    )));
                }
            }
        }
    }
    let mut pairs = std::collections::BTreeSet::new();
    for (&(x, y), &i) in &owner {
        for q in [(x + 1, y), (x, y + 1)] {
            if let Some(&j) = owner.get(&q) {
                if i != j {
                    pairs.insert((i.min(j), i.max(j)));
                }
            }
        }
    }
    Ok(pairs
        .into_iter()
        .map(|(i, j)| Edge {
            a: regions[i].id.min(regions[j].id),
            b: regions[i].id.max(regions[j].id),
            distance: spatial_distance(&regions[i], &regions[j], Metric::Euclidean),
        })
        .collect())
}

impl<T: Scalar> RegionGraph<T> {
    /// Builds regions from a per-pixel label map. Labels are compacted to
    /// `0..n` in raster order of first appearance.
    pub fn from_labels(image: &Image<T>, labels: &[usize]) -> Result<Self> {
        let (w, h) = (image.width(), image.height());
        if labels.len() != w * h {
            return Err(Error::invalid("label map does not cover the image"));
        }
        let mut remap: HashMap<usize, usize> = HashMap::new();
        let mut compact = Vec::with_capacity(labels.len());
        for &l in labels {
            let next = remap.len();
            compact.push(*remap.entry(l).or_insert(next));
        }
        let n = remap.len();
        let mut pixels: Vec<Vec<Pixel>> = vec![Vec::new(); n];
        for (i, &l) in compact.iter().enumerate() {
            pixels[l].push((i % w, i / w));
        }
        let regions: Vec<Region<T>> = pixels
            .into_iter()
            .enumerate()
            .map(|(id, px)| {
                let boundary = px
                    .iter()
                    .copied()
                    .filter(|&(x, y)| {
                        let l = compact[y * w + x];
                        x == 0
                            || y == 0
                            || x + 1 == w
                            || y + 1 == h
                            || compact[y * w + x - 1] != l
                            || compact[y * w + x + 1] != l
                            || compact[(y - 1) * w + x] != l
                            || compact[(y + 1) * w + x] != l
                    })
                    .collect();
                Region {
                    id,
                    centroid: centroid_of(&px),
                    feature: region_feature(image, &px),
                    boundary,
                    pixels: px,
                }
            })
            .collect();
        let edges = adjacency_from_labels(&regions, &compact, w, h);
        Ok(Self::assemble(w, h, regions, edges, compact))
    }

    /// Validates and assembles a graph from explicit regions.
    pub fn from_regions(width: usize, height: usize, regions: Vec<Region<T>>) -> Result<Self> {
        let mut labels = vec![usize::MAX; width * height];
        for (idx, r) in regions.iter().enumerate() {
            if r.id != idx {
                return Err(Error::invalid("region ids must be 0..n in order"));
            }
            if r.pixels.is_empty() {
                return Err(Error::invalid(format!("region {idx} is empty")));
            }
            for &(x, y) in &r.pixels {
                if x >= width || y >= height {
                    return Err(Error::invalid(format!("pixel {:?} outside image", (x, y))));
                }
                if labels[y * width + x] != usize::MAX {
                    return Err(Error::invalid(format!("pixel {:?} in two regions", (x, y))));
                }
                labels[y * width + x] = idx;
            }
        }
        if labels.contains(&usize::MAX) {
            return Err(Error::invalid("regions do not cover the image"));
        }
        let edges = build_adjacency(&regions)?;
        Ok(Self::assemble(width, height, regions, edges, labels))
    }

    fn assemble(width: usize, height: usize, regions: Vec<Region<T>>, edges: Vec<Edge<T>>, labels: Vec<usize>) -> Self {
        let mut neighbors = vec![Vec::new(); regions.len()];
        for e in &edges {
            neighbors[e.a].push(e.b);
            neighbors[e.b].push(e.a);
        }
        for n in neighbors.iter_mut() {
            n.sort_unstable();
        }
        Self { width, height, regions, edges, labels, neighbors }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn regions(&self) -> &[Region<T>] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn region(&self, id: usize) -> Result<&Region<T>> {
        self.regions.get(id).ok_or_else(|| Error::not_found(format!("region {id}")))
    }

    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }

    /// Region id per pixel, row-major.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn neighbors(&self, id: usize) -> &[usize] {
        &self.neighbors[id]
    }

    pub fn feature_dim(&self) -> usize {
        self.regions.first().map_or(0, |r| r.feature.len())
    }

    /// Appends per-region descriptors to every feature vector.
    pub fn append_features(&mut self, extra: &[Vec<T>]) -> Result<()> {
        if extra.len() != self.regions.len() {
            return Err(Error::invalid("one descriptor row per region required"));
        }
        let w = extra.first().map_or(0, Vec::len);
        if extra.iter().any(|e| e.len() != w) {
            return Err(Error::invalid("ragged descriptor rows"));
        }
        for (r, e) in self.regions.iter_mut().zip(extra) {
            r.feature.extend_from_slice(e);
        }
        Ok(())
    }

    /// Copy of the graph with region `i` renamed to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.regions.len();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::invalid("not a permutation of region ids"));
        }
        let mut regions = self.regions.clone();
        for r in regions.iter_mut() {
            r.id = perm[r.id];
        }
        regions.sort_by_key(|r| r.id);
        let labels: Vec<usize> = self.labels.iter().map(|&l| perm[l]).collect();
        let edges = adjacency_from_labels(&regions, &labels, self.width, self.height);
        Ok(Self::assemble(self.width, self.height, regions, edges, labels))
    }

    /// Checks the partition and adjacency invariants exactly.
    pub fn validate(&self) -> Result<()> {
        let mut count = vec![0usize; self.width * self.height];
        for r in &self.regions {
            if r.pixels.is_empty() {
                return Err(Error::invalid(format!("region {} empty", r.id)));
            }
            for &(x, y) in &r.pixels {
                count[y * self.width + x] += 1;
                if self.labels[y * self.width + x] != r.id {
                    return Err(Error::invalid("label map disagrees with region pixels"));
                }
            }
        }
        if count.iter().any(|&c| c != 1) {
            return Err(Error::invalid("regions do not partition the image"));
        }
        let expected = adjacency_from_labels(&self.regions, &self.labels, self.width, self.height);
        if expected.len() != self.edges.len()
            || expected.iter().zip(&self.edges).any(|(a, b)| a.a != b.a || a.b != b.b)
        {
            return Err(Error::invalid("edge list does not match pixel contact"));
        }
        Ok(())
    }

    /// Line-oriented text form: `R id cx cy npix` then `E id id dist`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.regions {
            let _ = writeln!(out, "R {} {} {} {}", r.id, r.centroid.0, r.centroid.1, r.pixels.len());
        }
        for e in &self.edges {
            let _ = writeln!(out, "E {} {} {}", e.a, e.b, e.distance);
        }
        out
    }
}

/// One `R` line of the graph text format.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionRecord {
    pub id: usize,
    pub centroid: (f64, f64),
    pub npix: usize,
}

/// Parses the graph text format back into records and edges.
pub fn parse_graph_text(text: &str) -> Result<(Vec<RegionRecord>, Vec<Edge<f64>>)> {
    let mut regions = Vec::new();
    let mut edges = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Data(format!("line {}: malformed graph record {line:?}", ln + 1));
        match parts.as_slice() {
            [] => {}
            ["R", id, cx, cy, n] => regions.push(RegionRecord {
                id: id.parse().map_err(|_| bad())?,
                centroid: (cx.parse().map_err(|_| bad())?, cy.parse().map_err(|_| bad())?),
                npix: n.parse().map_err(|_| bad())?,
            }),
            ["E", a, b, d] => edges.push(Edge {
                a: a.parse().map_err(|_| bad())?,
                b: b.parse().map_err(|_| bad())?,
                distance: d.parse().map_err(|_| bad())?,
            }),
            _ => return Err(bad()),
        }
    }
    Ok((regions, edges))
}

fn adjacency_from_labels<T: Scalar>(regions: &[Region<T>], labels: &[usize], w: usize, h: usize) -> Vec<Edge<T>> {
    let mut pairs = std::collections::BTreeSet::new();
    for y in 0..h {
        for x in 0..w {
            let l = labels[y * w + x];
            if x + 1 < w && labels[y * w + x + 1] != l {
                let m = labels[y * w + x + 1];
                pairs.insert((l.min(m), l.max(m)));
            }
            if y + 1 < h && labels[(y + 1) * w + x] != l {
                let m = labels[(y + 1) * w + x];
                pairs.insert((l.min(m), l.max(m)));
            }
        }
    }
    pairs
        .into_iter()
        .map(|(a, b)| Edge { a, b, distance: spatial_distance(&regions[a], &regions[b], Metric::Euclidean) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region(id: usize, pixels: Vec<Pixel>) -> Region<f64> {
        Region { id, centroid: centroid_of(&pixels), feature: vec![], boundary: vec![], pixels }
    }

    #[test]
    fn distances_between_centroids() {
        let a = Region { centroid: (0.0, 0.0), ..region(0, vec![(0, 0)]) };
        let b = Region { centroid: (3.0, 4.0), ..region(1, vec![(1, 0)]) };
        assert_eq!(spatial_distance(&a, &b, Metric::Euclidean), 5.0);
        assert_eq!(spatial_distance(&a, &b, Metric::Manhattan), 7.0);
        assert_eq!(spatial_distance(&a, &a, Metric::Euclidean), 0.0);
        assert_eq!(spatial_distance(&b, &a, Metric::Manhattan), 7.0);
    }

    #[test]
    fn quadrants_have_rook_adjacency() {
        let mut quads = vec![Vec::new(); 4];
        for y in 0..8 {
            for x in 0..8 {
                quads[(y / 4) * 2 + x / 4].push((x, y));
            }
        }
        let regions: Vec<_> = quads.into_iter().enumerate().map(|(i, p)| region(i, p)).collect();
        let edges = build_adjacency(&regions).unwrap();
        let pairs: Vec<_> = edges.iter().map(|e| (e.a, e.b)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 3), (2, 3)]);
        assert_eq!(edges[0].distance, 4.0);
    }

    #[test]
    fn single_region_and_strip() {
        let one = vec![region(0, vec![(0, 0), (1, 0)])];
        assert!(build_adjacency(&one).unwrap().is_empty());
        let strip: Vec<_> = (0..3).map(|i| region(i, vec![(i, 0)])).collect();
        assert_eq!(build_adjacency(&strip).unwrap().len(), 2);
    }

    #[test]
    fn overlap_is_rejected() {
        let regions = vec![region(0, vec![(0, 0), (1, 0)]), region(1, vec![(1, 0)])];
        assert!(matches!(build_adjacency(&regions), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn text_format_round_trips() {
        let img = Image::<f64>::filled(4, 2, 1, 0.5).unwrap();
        let labels = vec![0, 0, 1, 1, 0, 0, 1, 1];
        let g = RegionGraph::from_labels(&img, &labels).unwrap();
        g.validate().unwrap();
        let (rs, es) = parse_graph_text(&g.to_text()).unwrap();
        assert_eq!(rs.len(), 2);
        assert_eq!(rs[1], RegionRecord { id: 1, centroid: (2.5, 0.5), npix: 4 });
        assert_eq!(es.len(), 1);
        assert_eq!(es[0].distance, 2.0);
        assert!(parse_graph_text("X 1 2").is_err());
    }
}
