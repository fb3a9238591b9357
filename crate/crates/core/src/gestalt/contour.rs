//! Edge detection, contour tracing and virtual-bridge gap closing.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::region::{Image, Pixel};
use crate::scalar::Scalar;

/// Boolean pixel grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl BinaryMap {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![false; width * height] }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: &[Pixel]) -> Result<Self> {
        let mut m = Self::new(width, height);
        for &(x, y) in pixels {
            if x >= width || y >= height {
                return Err(Error::invalid(format!("pixel {:?} outside {width}x{height}", (x, y))));
            }
            m.set(x, y, true);
        }
        Ok(m)
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn pixels(&self) -> Vec<Pixel> {
        (0..self.data.len())
            .filter(|&i| self.data[i])
            .map(|i| (i % self.width, i / self.width))
            .collect()
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::shape("binary maps differ in size"));
        }
        Ok(Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a || b).collect(),
        })
    }
}

/// Sobel gradient magnitude (maximum over channels) thresholded to a mask.
pub fn sobel_edges<T: Scalar>(image: &Image<T>, threshold: f64) -> BinaryMap {
    let (w, h) = (image.width(), image.height());
    let mut out = BinaryMap::new(w, h);
    let at = |x: isize, y: isize, c: usize| -> f64 {
        let xc = x.clamp(0, w as isize - 1) as usize;
        let yc = y.clamp(0, h as isize - 1) as usize;
        image.pixel(xc, yc)[c].to_f64_lossy()
    };
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut mag: f64 = 0.0;
            for c in 0..image.channels() {
                let gx = at(x + 1, y - 1, c) + 2.0 * at(x + 1, y, c) + at(x + 1, y + 1, c)
                    - at(x - 1, y - 1, c)
                    - 2.0 * at(x - 1, y, c)
                    - at(x - 1, y + 1, c);
                let gy = at(x - 1, y + 1, c) + 2.0 * at(x, y + 1, c) + at(x + 1, y + 1, c)
                    - at(x - 1, y - 1, c)
                    - 2.0 * at(x, y - 1, c)
                    - at(x + 1, y - 1, c);
                mag = mag.max((gx * gx + gy * gy).sqrt());
            }
            out.set(x as usize, y as usize, mag > threshold);
        }
    }
    out
}

/// Zhang-Suen thinning to 8-connected one pixel wide curves.
pub fn thin(map: &BinaryMap) -> BinaryMap {
    let (w, h) = (map.width, map.height);
    let mut img = map.clone();
    let get = |m: &BinaryMap, x: isize, y: isize| -> bool {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && m.get(x as usize, y as usize)
    };
    loop {
        let mut changed = false;
        for pass in 0..2 {
            let mut remove = Vec::new();
            for y in 0..h as isize {
                for x in 0..w as isize {
                    if !get(&img, x, y) {
                        continue;
                    }
                    // P2..P9 clockwise from north
                    let n = [
                        get(&img, x, y - 1),
                        get(&img, x + 1, y - 1),
                        get(&img, x + 1, y),
                        get(&img, x + 1, y + 1),
                        get(&img, x, y + 1),
                        get(&img, x - 1, y + 1),
                        get(&img, x - 1, y),
                        get(&img, x - 1, y - 1),
                    ];
                    let b = n.iter().filter(|&&v| v).count();
                    if !(2..=6).contains(&b) {
                        continue;
                    }
                    let a = (0..8).filter(|&i| !n[i] && n[(i + 1) % 8]).count();
                    if a != 1 {
                        continue;
                    }
                    let (p2, p4, p6, p8) = (n[0], n[2], n[4], n[6]);
                    let ok = if pass == 0 {
                        !(p2 && p4 && p6) && !(p4 && p6 && p8)
                    } else {
                        !(p2 && p4 && p8) && !(p2 && p6 && p8)
                    };
                    if ok {
                        remove.push((x as usize, y as usize));
                    }
                }
            }
            changed |= !remove.is_empty();
            for (x, y) in remove {
                img.set(x, y, false);
            }
        }
        if !changed {
            return img;
        }
    }
}

fn neighbors8(p: Pixel, w: usize, h: usize) -> impl Iterator<Item = Pixel> {
    const D: [(isize, isize); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];
    D.iter().filter_map(move |&(dx, dy)| {
        let x = p.0 as isize + dx;
        let y = p.1 as isize + dy;
        (x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h).then_some((x as usize, y as usize))
    })
}

#[cfg(test)]
fn adjacent8(a: Pixel, b: Pixel) -> bool {
    a != b && a.0.abs_diff(b.0) <= 1 && a.1.abs_diff(b.1) <= 1
}

fn pixel_distance(a: Pixel, b: Pixel) -> f64 {
    let dx = a.0 as f64 - b.0 as f64;
    let dy = a.1 as f64 - b.1 as f64;
    (dx * dx + dy * dy).sqrt()
}

/// Bresenham segment strictly between `a` and `b`.
pub fn bridge_pixels(a: Pixel, b: Pixel) -> Vec<Pixel> {
    let (mut x, mut y) = (a.0 as isize, a.1 as isize);
    let (x1, y1) = (b.0 as isize, b.1 as isize);
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::new();
    loop {
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
        if x == x1 && y == y1 {
            break;
        }
        out.push((x as usize, y as usize));
    }
    out
}

/// 8-connected components in raster order of their first pixel.
fn components8(map: &BinaryMap) -> Vec<Vec<Pixel>> {
    let (w, h) = (map.width, map.height);
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for start in 0..w * h {
        if !map.data[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = Vec::new();
        let mut stack = vec![(start % w, start / w)];
        while let Some(p) = stack.pop() {
            comp.push(p);
            for q in neighbors8(p, w, h) {
                let i = q.1 * w + q.0;
                if map.data[i] && !seen[i] {
                    seen[i] = true;
                    stack.push(q);
                }
            }
        }
        comp.sort_by_key(|p| (p.1, p.0));
        out.push(comp);
    }
    out
}

/// Pixels enclosed by `wall`: not reachable from the image border through
/// 4-connected non-wall pixels. The wall itself is included.
pub fn fill_enclosed(wall: &BinaryMap) -> BinaryMap {
    let (w, h) = (wall.width, wall.height);
    let mut outside = vec![false; w * h];
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if (x == 0 || y == 0 || x + 1 == w || y + 1 == h) && !wall.get(x, y) {
                outside[y * w + x] = true;
                queue.push_back((x, y));
            }
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        let mut push = |nx: usize, ny: usize| {
            let i = ny * w + nx;
            if !outside[i] && !wall.data[i] {
                outside[i] = true;
                queue.push_back((nx, ny));
            }
        };
        if x > 0 {
            push(x - 1, y);
        }
        if x + 1 < w {
            push(x + 1, y);
        }
        if y > 0 {
            push(x, y - 1);
        }
        if y + 1 < h {
            push(x, y + 1);
        }
    }
    BinaryMap { width: w, height: h, data: outside.iter().map(|&o| !o).collect() }
}

fn encloses_area(wall: &BinaryMap) -> bool {
    fill_enclosed(wall).count() > wall.count()
}

/// One traced contour.
#[derive(Clone, Debug, PartialEq)]
pub struct Contour {
    /// Ordered chain; consecutive pixels are 8-adjacent.
    pub chain: Vec<Pixel>,
    pub closed: bool,
    /// The two chain ends of an open contour.
    pub endpoints: Option<(Pixel, Pixel)>,
    /// Virtual bridge pixels inserted to close or link the contour.
    pub bridges: Vec<Pixel>,
    /// Every edge pixel of the contour plus its bridges.
    pub pixels: Vec<Pixel>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContourSet {
    pub width: usize,
    pub height: usize,
    pub contours: Vec<Contour>,
}

impl ContourSet {
    pub fn closed_flags(&self) -> Vec<bool> {
        self.contours.iter().map(|c| c.closed).collect()
    }

    pub fn gap_endpoints(&self) -> Vec<Option<(Pixel, Pixel)>> {
        self.contours.iter().map(|c| c.endpoints).collect()
    }

    /// Union of the interiors (walls included) of all closed contours.
    pub fn filled_mask(&self) -> BinaryMap {
        let mut out = BinaryMap::new(self.width, self.height);
        for c in self.contours.iter().filter(|c| c.closed) {
            let wall = BinaryMap::from_pixels(self.width, self.height, &c.pixels).expect("in bounds");
            let fill = fill_enclosed(&wall);
            for (o, f) in out.data.iter_mut().zip(&fill.data) {
                *o |= *f;
            }
        }
        out
    }
}

struct Work {
    chain: Vec<Pixel>,
    members: Vec<Pixel>,
    bridges: Vec<Pixel>,
    closed: bool,
    self_tried: bool,
}

impl Work {
    fn ends(&self) -> (Pixel, Pixel) {
        (self.chain[0], *self.chain.last().expect("non-empty chain"))
    }
}

fn bfs_path(set: &BinaryMap, from: Pixel, to: Pixel, blocked: &dyn Fn(Pixel, Pixel) -> bool) -> Option<Vec<Pixel>> {
    let (w, h) = (set.width, set.height);
    let mut prev = vec![usize::MAX; w * h];
    let idx = |p: Pixel| p.1 * w + p.0;
    prev[idx(from)] = idx(from);
    let mut queue = VecDeque::from([from]);
    while let Some(p) = queue.pop_front() {
        if p == to {
            let mut path = vec![to];
            let mut cur = idx(to);
            while cur != idx(from) {
                cur = prev[cur];
                path.push((cur % w, cur / w));
            }
            path.reverse();
            return Some(path);
        }
        for q in neighbors8(p, w, h) {
            if set.get(q.0, q.1) && prev[idx(q)] == usize::MAX && !blocked(p, q) {
                prev[idx(q)] = idx(p);
                queue.push_back(q);
            }
        }
    }
    None
}

fn farthest(set: &BinaryMap, from: Pixel) -> Pixel {
    let (w, h) = (set.width, set.height);
    let mut dist = vec![usize::MAX; w * h];
    dist[from.1 * w + from.0] = 0;
    let mut queue = VecDeque::from([from]);
    let mut best = from;
    while let Some(p) = queue.pop_front() {
        let d = dist[p.1 * w + p.0];
        if d > dist[best.1 * w + best.0] {
            best = p;
        }
        for q in neighbors8(p, w, h) {
            let i = q.1 * w + q.0;
            if set.data[i] && dist[i] == usize::MAX {
                dist[i] = d + 1;
                queue.push_back(q);
            }
        }
    }
    best
}

/// Moore-neighbour trace of the outer boundary of the component holding
/// `start`, which must be its first pixel in raster order.
fn moore_trace(set: &BinaryMap, start: Pixel) -> Vec<Pixel> {
    const D: [(isize, isize); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];
    let (w, h) = (set.width as isize, set.height as isize);
    let inside = |x: isize, y: isize| x >= 0 && y >= 0 && x < w && y < h && set.get(x as usize, y as usize);
    let step = |p: Pixel, back: usize| -> Option<(Pixel, usize)> {
        for k in 1..=8 {
            let d = (back + k) % 8;
            let (x, y) = (p.0 as isize + D[d].0, p.1 as isize + D[d].1);
            if inside(x, y) {
                // next scan starts from the background cell checked just before
                let prev = (d + 7) % 8;
                let (bx, by) = (p.0 as isize + D[prev].0, p.1 as isize + D[prev].1);
                let back_dir = (0..8)
                    .find(|&j| (x + D[j].0, y + D[j].1) == (bx, by))
                    .unwrap_or((d + 4) % 8);
                return Some(((x as usize, y as usize), back_dir));
            }
        }
        None
    };
    // west of the first raster pixel is background
    let Some((first, first_back)) = step(start, 4) else { return vec![start] };
    let mut chain = vec![start];
    let (mut cur, mut back) = (first, first_back);
    let limit = 4 * set.count() + 8;
    while chain.len() < limit {
        let (next, nb) = step(cur, back).expect("component has more than one pixel");
        if cur == start && next == first {
            break;
        }
        chain.push(cur);
        cur = next;
        back = nb;
    }
    chain
}

/// Traces contours in a binary edge map and closes near-closed ones with
/// straight virtual bridges no longer than `bridge_gap_max` pixels.
pub fn complete_contour(edges: &BinaryMap, bridge_gap_max: f64) -> ContourSet {
    let (w, h) = (edges.width, edges.height);
    let thinned = thin(edges);
    let mut work: Vec<Work> = Vec::new();
    for comp in components8(edges) {
        let wall = BinaryMap::from_pixels(w, h, &comp).expect("in bounds");
        let mut skeleton: Vec<Pixel> = comp.iter().copied().filter(|p| thinned.get(p.0, p.1)).collect();
        if skeleton.is_empty() {
            skeleton = vec![comp[0]];
        }
        let skel = BinaryMap::from_pixels(w, h, &skeleton).expect("in bounds");
        if encloses_area(&wall) {
            work.push(Work {
                chain: moore_trace(&wall, comp[0]),
                members: comp,
                bridges: Vec::new(),
                closed: true,
                self_tried: true,
            });
        } else {
            let a = farthest(&skel, skeleton[0]);
            let b = farthest(&skel, a);
            let chain = bfs_path(&skel, a, b, &|_, _| false).unwrap_or_else(|| vec![a]);
            work.push(Work { chain, members: comp, bridges: Vec::new(), closed: false, self_tried: false });
        }
    }

    loop {
        let mut changed = false;
        for item in work.iter_mut().filter(|c| !c.closed && !c.self_tried) {
            item.self_tried = true;
            let (a, b) = item.ends();
            if pixel_distance(a, b) > bridge_gap_max || item.chain.len() < 3 {
                continue;
            }
            let bridge = bridge_pixels(b, a);
            let mut wall_px = item.members.clone();
            wall_px.extend_from_slice(&bridge);
            let wall = BinaryMap::from_pixels(w, h, &wall_px).expect("in bounds");
            if encloses_area(&wall) {
                item.chain.extend_from_slice(&bridge);
                item.bridges.extend_from_slice(&bridge);
                item.closed = true;
                changed = true;
            }
        }
        // link the closest pair of endpoints from two different open contours
        let open: Vec<usize> = (0..work.len()).filter(|&i| !work[i].closed).collect();
        let mut best: Option<(f64, usize, bool, usize, bool)> = None;
        for (oi, &i) in open.iter().enumerate() {
            for &j in &open[oi + 1..] {
                let (ia, ib) = work[i].ends();
                let (ja, jb) = work[j].ends();
                for (i_last, ip) in [(false, ia), (true, ib)] {
                    for (j_first, jp) in [(true, ja), (false, jb)] {
                        let d = pixel_distance(ip, jp);
                        if d <= bridge_gap_max && best.is_none_or(|bst| d < bst.0) {
                            best = Some((d, i, i_last, j, j_first));
                        }
                    }
                }
            }
        }
        if let Some((_, i, i_last, j, j_first)) = best {
            let mut right = work.remove(j);
            let left = &mut work[i];
            if !i_last {
                left.chain.reverse();
            }
            if !j_first {
                right.chain.reverse();
            }
            let bridge = bridge_pixels(*left.chain.last().expect("chain"), right.chain[0]);
            left.chain.extend_from_slice(&bridge);
            left.chain.extend_from_slice(&right.chain);
            left.members.extend_from_slice(&right.members);
            left.members.extend_from_slice(&right.bridges);
            left.bridges.extend_from_slice(&bridge);
            left.bridges.extend_from_slice(&right.bridges);
            left.self_tried = false;
            changed = true;
        }
        if !changed {
            break;
        }
    }

    let contours = work
        .into_iter()
        .map(|c| {
            let mut chain = c.chain;
            if !c.closed && (chain[chain.len() - 1].1, chain[chain.len() - 1].0) < (chain[0].1, chain[0].0) {
                chain.reverse();
            }
            let endpoints = (!c.closed).then(|| (chain[0], chain[chain.len() - 1]));
            let mut pixels = c.members;
            pixels.extend_from_slice(&c.bridges);
            pixels.sort_by_key(|p| (p.1, p.0));
            pixels.dedup();
            Contour { chain, closed: c.closed, endpoints, bridges: c.bridges, pixels }
        })
        .collect();
    ContourSet { width: w, height: h, contours }
}

/// Rasterized disc `(x - cx)^2 + (y - cy)^2 <= r^2` and its inner boundary.
pub fn disc_and_outline(width: usize, height: usize, cx: f64, cy: f64, r: f64) -> (BinaryMap, BinaryMap) {
    let mut disc = BinaryMap::new(width, height);
    for y in 0..height {
        for x in 0..width {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            disc.set(x, y, dx * dx + dy * dy <= r * r);
        }
    }
    let mut outline = BinaryMap::new(width, height);
    for y in 0..height {
        for x in 0..width {
            if !disc.get(x, y) {
                continue;
            }
            let edge = x == 0
                || y == 0
                || x + 1 == width
                || y + 1 == height
                || !disc.get(x - 1, y)
                || !disc.get(x + 1, y)
                || !disc.get(x, y - 1)
                || !disc.get(x, y + 1);
            outline.set(x, y, edge);
        }
    }
    (disc, outline)
}

/// Intersection over union of two masks; two empty masks give 1.
pub fn mask_iou(a: &BinaryMap, b: &BinaryMap) -> f64 {
    let inter = a.data.iter().zip(&b.data).filter(|(x, y)| **x && **y).count();
    let union = a.data.iter().zip(&b.data).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}
